use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use diinn::decoder::ModulationInput;

use super::eval::{eval_with, EvalSummary};
use super::train::train_with;
use super::ConfigSource;
use crate::report::{db, ratio, scale_label, Table};
use crate::RunConfig;

/// Scales of the reference ablation table.
#[allow(clippy::approx_constant)]
pub const TABLE_SCALES: [f64; 3] = [3.14, 4.0, 8.0];

/// Variants (a)-(f): every modulation input, each with and without the positional initialization.
pub const VARIANTS: [(char, ModulationInput, bool); 6] = [
    ('a', ModulationInput::MOnly, true),
    ('b', ModulationInput::MOnly, false),
    ('c', ModulationInput::MZ, true),
    ('d', ModulationInput::MZ, false),
    ('e', ModulationInput::SZ, true),
    ('f', ModulationInput::SZ, false),
];

pub fn variant(name: char) -> Result<(ModulationInput, bool)> {
    match VARIANTS.iter().find(|v| v.0 == name) {
        Some(&(_, mode, ip)) => Ok((mode, ip)),
        None => bail!("unknown variant `{name}` (expected a-f)"),
    }
}

/// `cfg` with the decoder switched to variant `name`.
pub fn variant_config(cfg: &RunConfig, name: char) -> Result<RunConfig> {
    let (mode, ip) = variant(name)?;
    Ok(RunConfig { mode, init_positional: ip, ..cfg.clone() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: char,
    pub mode: ModulationInput,
    pub init_positional: bool,
    pub param_count: usize,
    pub eval: EvalSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub scales: Vec<f64>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn table(&self) -> Table {
        let mut header = vec!["model".to_string(), "mi".into(), "ip".into(), "param_count".into()];
        for s in &self.scales {
            let l = scale_label(*s);
            header.extend([format!("psnr_x{l}"), format!("ssim_x{l}"), format!("lr_psnr_x{l}")]);
        }
        let mut t = Table { header, rows: Vec::new() };
        for r in &self.rows {
            let mut row = vec![
                format!("({})", r.variant),
                r.mode.label().to_string(),
                if r.init_positional { "Yes" } else { "No" }.to_string(),
                r.param_count.to_string(),
            ];
            for s in &self.scales {
                let m = r.eval.mean(*s).expect("every scale evaluated");
                row.extend([db(m.psnr_db), ratio(m.ssim), db(m.lr_psnr_db)]);
            }
            t.push(row);
        }
        t
    }
}

#[derive(Clone, Debug)]
pub struct AblateArgs {
    pub config: ConfigSource,
    pub data: PathBuf,
    /// Evaluation folder; the training folder when absent.
    pub eval_data: Option<PathBuf>,
    pub out: PathBuf,
    pub variants: Vec<char>,
    pub scales: Option<Vec<f64>>,
}

pub const ABLATION_CSV: &str = "ablation.csv";

pub fn run(args: &AblateArgs) -> Result<AblationReport> {
    let cfg = args.config.resolve()?;
    let scales = args.scales.clone().unwrap_or_else(|| TABLE_SCALES.to_vec());
    let variants = if args.variants.is_empty() { VARIANTS.iter().map(|v| v.0).collect() } else { args.variants.clone() };
    let report = ablate_with(&cfg, &args.data, args.eval_data.as_deref().unwrap_or(&args.data), &args.out, &variants, &scales)?;
    let table = report.table();
    print!("{}", table.to_aligned());
    table.write_csv(&args.out.join(ABLATION_CSV))?;
    Ok(report)
}

/// Trains each variant into `out/variant_<x>` and evaluates its final weights.
pub fn ablate_with(
    cfg: &RunConfig,
    data: &Path,
    eval_data: &Path,
    out: &Path,
    variants: &[char],
    scales: &[f64],
) -> Result<AblationReport> {
    let mut rows = Vec::new();
    for &v in variants {
        let mut vcfg = variant_config(cfg, v)?;
        vcfg.eval_scales = scales.to_vec();
        vcfg.validate()?;
        let dir = out.join(format!("variant_{v}"));
        let outcome = train_with(&vcfg, data, &dir, None, false)?;
        let model = outcome.checkpoint.model()?;
        let eval = eval_with(&vcfg, eval_data, Some(&model))?;
        eval.rows_table().write_csv(&dir.join("eval.csv"))?;
        rows.push(AblationRow {
            variant: v,
            mode: vcfg.mode,
            init_positional: vcfg.init_positional,
            param_count: vcfg.model().param_count(),
            eval,
        });
    }
    Ok(AblationReport { scales: scales.to_vec(), rows })
}
