//! Central-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Matrix;

use super::model::{encoder_forward, ForwardOptions, Init, ModelConfig, ModelParams};
use super::tape::Tape;
use super::NnError;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Max of `|analytic - numeric| / max(1, |analytic|)`.
    pub max_rel_error: f64,
    /// Parameter path and flat index of the worst entry, e.g. `layers.1.ff_in.weight[37]`.
    pub worst: String,
    pub checked: usize,
    /// Coordinates discarded because a perturbation flipped a ReLU.
    pub skipped_kinks: usize,
}

impl GradCheckReport {
    fn record(&mut self, err: f64, path: String) {
        self.checked += 1;
        if err > self.max_rel_error || self.worst.is_empty() {
            self.max_rel_error = self.max_rel_error.max(err);
            self.worst = path;
        }
    }
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Check every tensor of a densely initialised encoder in double precision.
///
/// The scalar objective is `Σ output ⊙ W` for a fixed random `W`, which keeps
/// the loss smooth. `samples_per_tensor` entries are drawn from each tensor;
/// an entry whose ±`eps` perturbation flips any ReLU is replaced by another.
pub fn grad_check(
    cfg: &ModelConfig,
    seed: u64,
    len: usize,
    eps: f64,
    samples_per_tensor: usize,
) -> Result<GradCheckReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = cfg.clone();
    cfg.dropout = 0.0;
    let params: ModelParams<f64> = ModelParams::init(&cfg, &mut rng, Init::Dense)?;
    let features = Matrix::from_fn(len, cfg.d_in, |_, _| rng.gen_range(-1.0..1.0));
    let weights = Matrix::from_fn(len, cfg.d_out, |_, _| rng.gen_range(-1.0..1.0));
    let context = (len / 2).max(1);

    let objective = |p: &ModelParams<f64>| -> Result<(f64, Vec<bool>), NnError> {
        let f = encoder_forward(&features, &cfg, p, ForwardOptions::eval(context))?;
        let v: f64 = f
            .value()
            .as_slice()
            .iter()
            .zip(weights.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        Ok((v, f.tape.relu_pattern()))
    };

    let mut fwd = encoder_forward(&features, &cfg, &params, ForwardOptions::eval(context))?;
    let base_pattern = fwd.tape.relu_pattern();
    let grads = fwd.backward(weights.clone())?;

    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
        skipped_kinks: 0,
    };
    for (ti, name) in names.iter().enumerate() {
        let size = grads[ti].len();
        let mut done = 0;
        let mut attempts = 0;
        while done < samples_per_tensor.min(size) && attempts < 20 * samples_per_tensor {
            attempts += 1;
            let idx = rng.gen_range(0..size);
            let mut plus = params.clone();
            plus.tensors_mut()[ti].as_mut_slice()[idx] += eps;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].as_mut_slice()[idx] -= eps;
            let (fp, pp) = objective(&plus)?;
            let (fm, pm) = objective(&minus)?;
            if pp != base_pattern || pm != base_pattern {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * eps);
            let analytic = grads[ti].as_slice()[idx];
            report.record(rel_error(analytic, numeric), format!("{name}[{idx}]"));
            done += 1;
        }
    }
    Ok(report)
}

/// Same check on the purely linear path `x·W_in + b_in → ·W_out + b_out`.
///
/// Central differences are exact for a function linear in each parameter, so
/// the error here is rounding only.
pub fn grad_check_linear(
    d_in: usize,
    d_model: usize,
    d_out: usize,
    len: usize,
    seed: u64,
    eps: f64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_m = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let x = rand_m(len, d_in);
    let weights = rand_m(len, d_out);
    let tensors = vec![
        rand_m(d_in, d_model),
        rand_m(1, d_model),
        rand_m(d_model, d_out),
        rand_m(1, d_out),
    ];
    let names = ["input.weight", "input.bias", "output.weight", "output.bias"];

    let build = |ts: &[Matrix<f64>]| {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let vars: Vec<_> = ts.iter().enumerate().map(|(i, t)| tape.param(t.clone(), i)).collect();
        let h = tape.matmul(xv, vars[0]);
        let h = tape.add_row(h, vars[1]);
        let y = tape.matmul(h, vars[2]);
        let y = tape.add_row(y, vars[3]);
        (tape, y)
    };
    let objective = |ts: &[Matrix<f64>]| {
        let (tape, y) = build(ts);
        tape.value(y)
            .as_slice()
            .iter()
            .zip(weights.as_slice())
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let (mut tape, y) = build(&tensors);
    let grads = tape.backward(y, weights.clone()).expect("fresh tape");

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
        skipped_kinks: 0,
    };
    for (ti, name) in names.iter().enumerate() {
        for idx in 0..tensors[ti].len() {
            let mut plus = tensors.clone();
            plus[ti].as_mut_slice()[idx] += eps;
            let mut minus = tensors.clone();
            minus[ti].as_mut_slice()[idx] -= eps;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * eps);
            report.record(
                rel_error(grads[ti].as_slice()[idx], numeric),
                format!("{name}[{idx}]"),
            );
        }
    }
    report
}
