#![allow(clippy::approx_constant)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use diinn::ImageRGB;
use diinn_cli::commands::ablate::{ablate_with, AblateArgs};
use diinn_cli::commands::eval::{eval_with, EvalArgs, Method};
use diinn_cli::commands::train::{train_with, TrainArgs};
use diinn_cli::commands::{self, ConfigSource};
use diinn_cli::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diinn"))
}

fn textured(h: usize, w: usize, k: usize) -> ImageRGB {
    ImageRGB::from_fn(h, w, |y, x, c| (((y * 13 + x * 7 + c * 5 + k) % 17) as f32) / 16.0).quantized()
}

fn folder(dir: &Path, images: &[(usize, usize)]) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    for (i, &(h, w)) in images.iter().enumerate() {
        textured(h, w, i).save(&dir.join(format!("img_{i:02}.png"))).unwrap();
    }
    dir.to_path_buf()
}

/// Tiny model, 2 epochs of 1 step over 12-pixel crops.
fn smoke_config(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::tiny();
    cfg.scales = vec![2];
    cfg.patch_base = 6;
    cfg.batch_hr = 2;
    cfg.epochs = 2;
    let path = dir.join("run.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn missing_data_dir_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["train", "--data"])
        .arg(tmp.path().join("nope"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn unknown_config_key_exits_2() {
    let out = bin().args(["config", "--set", "colour=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_exit_codes() {
    let ok = bin().arg("gradcheck").output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("max relative error"));
    // a step this coarse cannot meet the tolerance
    let bad = bin().args(["gradcheck", "--step", "0.3"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn config_prints_round_trippable_json() {
    let out = bin().args(["config", "--tiny", "--set", "mode=m_only"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let cfg = RunConfig::parse(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(cfg.hidden, 16);
    assert_eq!(cfg.mode.label(), "[m]");
}

#[test]
fn train_then_sr_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = folder(&tmp.path().join("data"), &[(20, 20), (16, 24)]);
    let cfg = smoke_config(tmp.path());
    let out = tmp.path().join("run");
    let st = bin().arg("train").arg("--config").arg(&cfg).arg("--data").arg(&data).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let stdout = String::from_utf8_lossy(&st.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("epoch")).count(), 2);
    for f in ["last.ckpt", "best.ckpt", "loss.csv", "epochs.csv", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(RunConfig::parse(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap(), RunConfig::parse(&fs::read_to_string(&cfg).unwrap()).unwrap());

    let input = tmp.path().join("in.png");
    textured(48, 48, 0).save(&input).unwrap();
    for (flag, value, want) in [("--scale", "2.5", (120, 120)), ("--scale", "1", (48, 48)), ("--size", "151x151", (151, 151))] {
        let png = tmp.path().join("sr.png");
        let st = bin()
            .arg("sr")
            .arg("--model")
            .arg(out.join("last.ckpt"))
            .arg("--input")
            .arg(&input)
            .args([flag, value])
            .arg("--output")
            .arg(&png)
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
        let img = ImageRGB::load(&png).unwrap();
        assert_eq!((img.height(), img.width()), want);
    }
}

#[test]
fn resume_continues_steps_and_matches_one_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = folder(&tmp.path().join("data"), &[(20, 20), (16, 24), (18, 18)]);
    let mut cfg = RunConfig::tiny();
    cfg.scales = vec![2];
    cfg.patch_base = 6;
    cfg.batch_hr = 2;
    cfg.epochs = 3;
    let full = train_with(&cfg, &data, &tmp.path().join("full"), None, false).unwrap();

    let mut first = cfg.clone();
    first.epochs = 1;
    train_with(&first, &data, &tmp.path().join("part"), None, false).unwrap();
    let resumed = train_with(&cfg, &data, &tmp.path().join("part"), Some(&tmp.path().join("part/last.ckpt")), false).unwrap();
    assert_eq!(resumed.steps.first().unwrap().step, 3);
    assert_eq!(resumed.checkpoint.meta.step, 6);
    assert_eq!(resumed.checkpoint.params, full.checkpoint.params);
    let full_csv = fs::read_to_string(tmp.path().join("full/loss.csv")).unwrap();
    let part_csv = fs::read_to_string(tmp.path().join("part/loss.csv")).unwrap();
    assert_eq!(full_csv, part_csv);
}

#[test]
fn eval_bicubic_unit_scale_and_golden_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let data = folder(&tmp.path().join("data"), &[(20, 20), (17, 23)]);
    let csv = tmp.path().join("eval.csv");
    let st = bin()
        .args(["eval", "--method", "bicubic", "--scales", "1,2", "--dataset"])
        .arg(&data)
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let table = String::from_utf8_lossy(&st.stdout).to_string();
    assert_eq!(table.lines().next().unwrap(), "scale  images  psnr_db    ssim  lr_psnr_db");
    assert_eq!(table.lines().nth(2).unwrap().split_whitespace().collect::<Vec<_>>(), ["1", "2", "inf", "1.0000", "inf"]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "image,scale,lr_h,lr_w,out_h,out_w,psnr_db,ssim,lr_psnr_db");
    assert_eq!(text.lines().nth(1).unwrap(), "img_00.png,1,20,20,20,20,inf,1.0000,inf");
    assert_eq!(text.lines().count(), 5);

    let again = bin().args(["eval", "--method", "bicubic", "--scales", "1,2", "--threads", "3", "--dataset"]).arg(&data).output().unwrap();
    assert_eq!(again.stdout, st.stdout);
}

#[test]
fn eval_requires_a_model_for_model_method() {
    let tmp = tempfile::tempdir().unwrap();
    let data = folder(&tmp.path().join("data"), &[(8, 8)]);
    let args = EvalArgs {
        config: ConfigSource::default(),
        method: Method::Model,
        model: None,
        dataset: data,
        scales: None,
        csv: None,
        threads: None,
    };
    assert!(commands::eval::run(&args).is_err());
}

#[test]
fn ablate_variant_equals_train_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let data = folder(&tmp.path().join("data"), &[(20, 20), (16, 24)]);
    let cfg_path = smoke_config(tmp.path());
    let cfg = RunConfig::load(Some(&cfg_path), &[]).unwrap();
    let scales = [2.0, 3.14];
    let report = ablate_with(&cfg, &data, &data, &tmp.path().join("abl"), &['d'], &scales).unwrap();

    let mut manual_cfg = cfg.clone();
    manual_cfg.mode = diinn::decoder::ModulationInput::MZ;
    manual_cfg.init_positional = false;
    manual_cfg.eval_scales = scales.to_vec();
    let out = tmp.path().join("manual");
    commands::train::run(&TrainArgs {
        config: ConfigSource { path: Some(cfg_path), overrides: vec!["mode=m_z".into()] },
        data: data.clone(),
        out: out.clone(),
        resume: None,
    })
    .unwrap();
    let model = diinn::model::Checkpoint::load(&out.join("last.ckpt")).unwrap().model().unwrap();
    let manual = eval_with(&manual_cfg, &data, Some(&model)).unwrap();
    assert_eq!(report.rows[0].eval, manual);
    assert_eq!(fs::read(out.join("last.ckpt")).unwrap(), fs::read(tmp.path().join("abl/variant_d/last.ckpt")).unwrap());
}

#[test]
fn ablate_csv_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let data = folder(&tmp.path().join("data"), &[(20, 20)]);
    let cfg = smoke_config(tmp.path());
    let out = tmp.path().join("abl");
    let report = commands::ablate::run(&AblateArgs {
        config: ConfigSource { path: Some(cfg), overrides: vec!["epochs=1".into()] },
        data,
        eval_data: None,
        out: out.clone(),
        variants: vec![],
        scales: Some(vec![2.0, 3.14]),
    })
    .unwrap();
    assert_eq!(report.rows.len(), 6);
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "model,mi,ip,param_count,psnr_x2,ssim_x2,lr_psnr_x2,psnr_x3.14,ssim_x3.14,lr_psnr_x3.14");
    let labels: Vec<String> = lines[1..].iter().map(|l| l.split(',').take(3).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(labels, ["(a),[m],Yes", "(b),[m],No", "(c),[m z],Yes", "(d),[m z],No", "(e),[s z],Yes", "(f),[s z],No"]);
}

#[test]
fn bench_single_repeat_table() {
    let st = bin()
        .args(["bench", "--set", "feat_channels=4", "--set", "hidden=8", "--set", "decoder_layers=2", "--set", "encoder_blocks=1"])
        .args(["--input-size", "8x8", "--output-sizes", "16x16,24x24", "--repeats", "1", "--warmup", "0"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let text = String::from_utf8_lossy(&st.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["method", "16x16", "24x24"]);
    assert!(lines[2].starts_with("bicubic"));
    assert!(lines[3].starts_with("diinn"));
}
