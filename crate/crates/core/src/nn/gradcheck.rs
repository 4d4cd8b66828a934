use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{Tape, Tensor, Var};

/// Outcome of comparing reverse-mode gradients to central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Comparison settings. Entries whose analytic and numeric gradients are
/// both below `abs_floor` count as exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub eps: f64,
    /// Check at most this many entries per tensor, chosen at random.
    pub max_entries: Option<usize>,
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            eps: 1e-3,
            max_entries: None,
            abs_floor: 1e-7,
            seed: 0,
        }
    }
}

impl GradCheck {
    pub fn with_eps(eps: f64) -> Self {
        GradCheck { eps, ..Self::default() }
    }

    /// `fragment` builds a scalar from the leaves bound to `inputs`.
    pub fn run<F>(&self, inputs: &[Tensor<f64>], fragment: F) -> Result<GradCheckReport>
    where
        F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
    {
        let eval = |values: &[Tensor<f64>]| -> Result<f64> {
            let mut tape = Tape::new();
            let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone(), false)).collect();
            let out = fragment(&mut tape, &vars)?;
            Ok(tape.value(out).item())
        };

        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        let loss = fragment(&mut tape, &vars)?;
        let grads = tape.backward(loss)?;

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut work: Vec<Tensor<f64>> = inputs.to_vec();
        let mut report = GradCheckReport {
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            checked: 0,
        };
        for (t, &var) in vars.iter().enumerate() {
            let numel = inputs[t].numel();
            let indices: Vec<usize> = match self.max_entries {
                Some(k) if k < numel => {
                    let mut picked = sample(&mut rng, numel, k).into_vec();
                    picked.sort_unstable();
                    picked
                }
                _ => (0..numel).collect(),
            };
            for i in indices {
                let analytic = grads.get(var).map_or(0.0, |g| g.data()[i]);
                let orig = inputs[t].data()[i];
                work[t].data_mut()[i] = orig + self.eps;
                let plus = eval(&work)?;
                work[t].data_mut()[i] = orig - self.eps;
                let minus = eval(&work)?;
                work[t].data_mut()[i] = orig;
                let numeric = (plus - minus) / (2.0 * self.eps);

                let abs = (analytic - numeric).abs();
                let scale = analytic.abs().max(numeric.abs());
                let rel = if scale < self.abs_floor { 0.0 } else { abs / scale };
                report.max_abs_error = report.max_abs_error.max(abs);
                report.max_rel_error = report.max_rel_error.max(rel);
                report.checked += 1;
            }
        }
        Ok(report)
    }
}

/// Max relative error of reverse-mode vs central differences with step `eps`.
pub fn grad_check<F>(inputs: &[Tensor<f64>], eps: f64, fragment: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    GradCheck::with_eps(eps).run(inputs, fragment).map(|r| r.max_rel_error)
}
