use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Check at most this many randomly chosen coordinates per input.
    pub max_coords_per_input: Option<usize>,
    pub seed: u64,
    /// Skip coordinates whose `±step` probes change a ReLU sign or a max
    /// winner, where central differences measure a kink rather than the
    /// derivative.
    pub skip_kinks: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            max_coords_per_input: None,
            seed: 0,
            skip_kinks: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// Coordinates left out because a probe crossed a kink.
    pub coords_skipped: usize,
    /// `(input, coordinate, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Compares tape gradients of a scalar function against central differences.
///
/// `f` must rebuild the same computation from fresh leaves each call; any
/// randomness inside it has to be seeded from within so that every
/// evaluation sees the same draws. The relative error at a coordinate is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(f: F, inputs: &[Tensor], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<(f64, u64)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.param(v.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok((tape.value(out).item(), tape.branch_signature()))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|v| tape.param(v.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if tape.value(out).numel() != 1 {
        return Err(Error::shape("grad_check", tape.value(out).shape(), &[1]));
    }
    let grads = tape.backward(out)?;
    let signature = tape.branch_signature();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: 0,
        coords_skipped: 0,
        worst: None,
    };
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        let n = input.numel();
        let coords: Vec<usize> = match opts.max_coords_per_input {
            Some(limit) if limit < n => sample(&mut rng, n, limit).into_vec(),
            _ => (0..n).collect(),
        };
        for c in coords {
            let analytic = grads.get(vars[k]).map_or(0.0, |g| g.data()[c]);
            let x = input.data()[c];
            probe[k].data_mut()[c] = x + opts.step;
            let (plus, sig_plus) = eval(&probe)?;
            probe[k].data_mut()[c] = x - opts.step;
            let (minus, sig_minus) = eval(&probe)?;
            probe[k].data_mut()[c] = x;
            if opts.skip_kinks && (sig_plus != signature || sig_minus != signature) {
                report.coords_skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * opts.step);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            report.coords_checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((k, c, analytic, numeric));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let report = grad_check(
            |t, v| {
                let y = t.scale(v[0], 3.0);
                Ok(t.sum(y))
            },
            &[Tensor::scalar(0.7)],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert_eq!(report.coords_checked, 1);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // relu at an exact kink: the analytic subgradient is 0, the numeric slope 0.5
        let report = grad_check(
            |t, v| Ok(t.relu(v[0])),
            &[Tensor::scalar(0.0)],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error > 0.5);
    }

    #[test]
    fn detects_a_detached_path() {
        // x · stop_gradient(x): the tape sees only one factor
        let report = grad_check(
            |t, v| {
                let frozen = t.constant(t.value(v[0]).clone());
                let y = t.mul(v[0], frozen)?;
                Ok(t.sum(y))
            },
            &[Tensor::vector(vec![0.5, -1.5])],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!((report.max_rel_error - 0.5).abs() < 1e-6, "{report:?}");
    }

    #[test]
    fn kink_probes_are_skipped_on_request() {
        let f = |t: &mut Tape, v: &[Var]| {
            let y = t.relu(v[0]);
            Ok(t.sum(y))
        };
        let x = [Tensor::vector(vec![1e-7, 0.8])];
        let strict = grad_check(f, &x, &GradCheckOptions::default()).unwrap();
        assert!(strict.max_rel_error > 0.1);
        let opts = GradCheckOptions {
            skip_kinks: true,
            ..Default::default()
        };
        let lenient = grad_check(f, &x, &opts).unwrap();
        assert_eq!(lenient.coords_skipped, 1);
        assert_eq!(lenient.coords_checked, 1);
        assert!(lenient.max_rel_error < 1e-9);
    }

    #[test]
    fn coordinate_sampling_limits_work() {
        let report = grad_check(
            |t, v| Ok(t.sum_squares(v[0])),
            &[Tensor::filled(&[50], 0.3)],
            &GradCheckOptions {
                max_coords_per_input: Some(7),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(report.coords_checked, 7);
    }
}
