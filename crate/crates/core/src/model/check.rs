//! Whole-model gradient check.

use rand::Rng;

use super::{Model, ModelConfig};
use crate::error::Result;
use crate::numcore::{grad_check, GradCheckReport, Graph, Tape, Var};
use crate::params::{Bound, ParamSet};
use crate::{rng, Tensor};

#[derive(Clone, Debug)]
pub struct ModelGradCheck {
    pub report: GradCheckReport,
    /// Smallest distance of any relu input or L1 residual from zero.
    pub kink_margin: f64,
    pub params: usize,
}

/// Smallest half-gap accepted around a relu kink.
pub const MIN_GAP: f64 = 0.02;

/// Shifts the bias feeding each relu so that, per channel, zero falls in
/// the widest gap between that channel's pre-activations (among splits that
/// keep between a quarter and three quarters of the values active). When
/// no gap reaches `2 * MIN_GAP` the channel is shifted to be fully active.
///
/// `relu_inputs` evaluates the model and returns every relu input in
/// evaluation order; `bias_names[k]` is the bias added just before relu `k`.
/// Returns the smallest achieved distance from zero.
pub fn separate_relu_kinks(
    params: &mut ParamSet<f64>,
    bias_names: &[String],
    mut relu_inputs: impl FnMut(&ParamSet<f64>) -> Result<Vec<Tensor<f64>>>,
) -> Result<f64> {
    for (k, name) in bias_names.iter().enumerate() {
        let inputs = relu_inputs(params)?;
        let x = &inputs[k];
        let [b, c, h, w] = x.dims4()?;
        let plane = h * w;
        let bias = params.get_mut(name).expect("bias present");
        for ch in 0..c {
            let mut vals: Vec<f64> = (0..b).flat_map(|bi| x.data()[(bi * c + ch) * plane..][..plane].to_vec()).collect();
            vals.sort_by(f64::total_cmp);
            let n = vals.len();
            let (lo, hi) = (n / 4, n - n / 4);
            let best = (lo.max(1)..hi.min(n))
                .map(|i| (vals[i] - vals[i - 1], 0.5 * (vals[i] + vals[i - 1])))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            let mid = match best {
                Some((gap, mid)) if gap >= 2.0 * MIN_GAP => mid,
                // no usable split: make the whole channel active
                _ => vals[0] - MIN_GAP,
            };
            bias.data_mut()[ch] -= mid;
        }
    }
    let inputs = relu_inputs(params)?;
    Ok(inputs
        .iter()
        .flat_map(|t| t.data().iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min))
}

fn relu_inputs(model: &ModelConfig, params: &ParamSet<f64>, lr: &Tensor<f64>, out: (usize, usize)) -> Result<Vec<Tensor<f64>>> {
    let m = Model { config: *model, params: params.clone() };
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let x = tape.constant(lr.clone());
    m.forward(&mut tape, &bound, &x, out.0, out.1)?;
    Ok(tape.relu_inputs().iter().map(|v| tape.value(v).clone()).collect())
}

/// Checks every parameter gradient of the L1 loss through the full model
/// against central differences with step `h`, in 64-bit arithmetic.
///
/// Input and target are drawn from the `gradcheck` stream. Relu biases are
/// shifted away from kinks first and the target is offset from the
/// prediction, so the loss is smooth around the evaluation point.
pub fn model_gradcheck(cfg: &ModelConfig, lr_size: usize, out_size: usize, h: f64) -> Result<ModelGradCheck> {
    let base = Model::<f64>::new(*cfg)?;
    let mut params = base.params.clone();
    let mut r = rng::stream(cfg.seed, "gradcheck", &[]);
    let lr = Tensor::from_fn(&[1, 3, lr_size, lr_size], |_| r.gen_range(0.0..1.0));
    let out = (out_size, out_size);

    let relu_margin = separate_relu_kinks(&mut params, &cfg.relu_bias_names(), |p| relu_inputs(cfg, p, &lr, out))?;

    let pred = Model { config: *cfg, params: params.clone() }.predict(&lr, out_size, out_size)?;
    let target = pred.map(|v| {
        let off: f64 = r.gen_range(0.05..0.25);
        if r.gen_bool(0.5) {
            v + off
        } else {
            v - off
        }
    });
    let l1_margin = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).fold(f64::INFINITY, f64::min);

    let names = params.names().to_vec();
    let loss = |t: &mut Tape<f64>, vars: &[Var]| -> Result<Var> {
        let bound = Bound::new(names.clone(), vars.to_vec());
        let m = Model { config: *cfg, params: ParamSet::new() };
        let x = t.constant(lr.clone());
        let y = m.forward(t, &bound, &x, out.0, out.1)?;
        let tgt = t.constant(target.clone());
        t.l1_loss(&y, &tgt)
    };
    let report = grad_check(loss, params.tensors(), h)?;
    Ok(ModelGradCheck { report, kink_margin: relu_margin.min(l1_margin), params: params.scalar_count() })
}
