//! Central-difference gradient oracle.

use super::graph::Graph;
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::Tensor;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Max over checked scalars of `|a - cd| / max(|a|, |cd|, 1e-8)`.
    pub max_rel_error: f64,
    /// `(parameter index, element index)` of the worst scalar.
    pub worst: (usize, usize),
    pub checked: usize,
    /// Perturbations that moved a relu input or L1 residual across zero.
    /// Central differences are meaningless for those.
    pub kink_crossings: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol && self.kink_crossings == 0
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Builds a loss on a fresh tape, with `params` registered as trainable leaves.
pub trait LossFn: FnMut(&mut Tape<f64>, &[Var]) -> Result<Var> {}
impl<F: FnMut(&mut Tape<f64>, &[Var]) -> Result<Var>> LossFn for F {}

fn evaluate(f: &mut impl LossFn, params: &[Tensor<f64>]) -> Result<(f64, Vec<bool>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone(), true)).collect();
    let loss = f(&mut tape, &vars)?;
    Ok((tape.value(&loss).item(), tape.kink_signature()))
}

/// Analytic gradients of `f` at `params`, via one backward sweep.
pub fn analytic_gradients(f: &mut impl LossFn, params: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone(), true)).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    Ok(vars.iter().map(|&v| tape.grad(v).expect("leaf grad").clone()).collect())
}

/// Compares given analytic gradients against central differences with step `h`.
pub fn compare_gradients(
    f: &mut impl LossFn,
    params: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    h: f64,
) -> Result<GradCheckReport> {
    let (_, base_sig) = evaluate(f, params)?;
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (0, 0), checked: 0, kink_crossings: 0 };
    for (pi, grad) in analytic.iter().enumerate() {
        for ei in 0..params[pi].numel() {
            let orig = params[pi].data()[ei];
            work[pi].data_mut()[ei] = orig + h;
            let (plus, sig_plus) = evaluate(f, &work)?;
            work[pi].data_mut()[ei] = orig - h;
            let (minus, sig_minus) = evaluate(f, &work)?;
            work[pi].data_mut()[ei] = orig;
            if sig_plus != base_sig || sig_minus != base_sig {
                report.kink_crossings += 1;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(grad.data()[ei], numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (pi, ei);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Full check: analytic gradients from the tape versus central differences.
pub fn grad_check(mut f: impl LossFn, params: &[Tensor<f64>], h: f64) -> Result<GradCheckReport> {
    let analytic = analytic_gradients(&mut f, params)?;
    compare_gradients(&mut f, params, &analytic, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(tape: &mut Tape<f64>, p: &[Var]) -> Result<Var> {
        tape.hadamard(&p[0], &p[0])
    }

    #[test]
    fn square_at_three() {
        let params = [Tensor::scalar(3.0)];
        let g = analytic_gradients(&mut square, &params).unwrap();
        assert_eq!(g[0].item(), 6.0);
        let r = grad_check(square, &params, 1e-3).unwrap();
        assert!(r.max_rel_error < 1e-10, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let params = [Tensor::from_fn(&[4], |i| 0.5 + i as f64)];
        let mut f = |t: &mut Tape<f64>, p: &[Var]| -> Result<Var> {
            let s = t.sin(&p[0]);
            let z = t.constant(Tensor::zeros(&[4]));
            t.l1_loss(&s, &z)
        };
        let mut g = analytic_gradients(&mut f, &params).unwrap();
        g[0] = g[0].map(|v| 2.0 * v);
        let r = compare_gradients(&mut f, &params, &g, 1e-3).unwrap();
        assert!((r.max_rel_error - 0.5).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn kink_crossing_is_reported() {
        // relu input sits within h of zero
        let params = [Tensor::scalar(1e-5)];
        let f = |t: &mut Tape<f64>, p: &[Var]| -> Result<Var> { Ok(t.relu(&p[0])) };
        let r = grad_check(f, &params, 1e-3).unwrap();
        assert_eq!(r.kink_crossings, 1);
        assert!(!r.passes(1e-4));
    }
}
