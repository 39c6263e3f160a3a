use serde::{Deserialize, Serialize};

use crate::nn::ModelParams;
use crate::tensor::{Matrix, Scalar};

use super::TrainError;

/// AdamW with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            weight_decay: 0.01,
        }
    }
}

/// First and second moments per tensor, in [`ModelParams::named`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Vec<Matrix<T>>,
    pub v: Vec<Matrix<T>>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let zeros: Vec<Matrix<T>> = params
            .named()
            .iter()
            .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

impl AdamW {
    /// One bias-corrected update. Nothing is modified if any gradient is non-finite.
    pub fn step<T: Scalar>(
        &self,
        params: &mut ModelParams<T>,
        grads: &[Matrix<T>],
        state: &mut OptimizerState<T>,
        lr: f64,
    ) -> Result<(), TrainError> {
        let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
        if grads.len() != names.len() || state.m.len() != names.len() {
            return Err(TrainError::Shape(format!(
                "{} gradients for {} tensors",
                grads.len(),
                names.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(TrainError::NonFiniteGradient {
                name: names[i].clone(),
            });
        }
        state.step += 1;
        let t = state.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - self.beta1), T::from_f64(1.0 - self.beta2));
        let step_size = T::from_f64(lr / bc1);
        let inv_bc2 = T::from_f64(1.0 / bc2);
        let eps = T::from_f64(self.eps);
        let decay = T::from_f64(1.0 - lr * self.weight_decay);
        for (i, p) in params.tensors_mut().into_iter().enumerate() {
            let g = grads[i].as_slice();
            if g.len() != p.len() {
                return Err(TrainError::Shape(format!("gradient for {} has wrong size", names[i])));
            }
            let m = state.m[i].as_mut_slice();
            let v = state.v[i].as_mut_slice();
            for (k, w) in p.as_mut_slice().iter_mut().enumerate() {
                m[k] = b1 * m[k] + one_b1 * g[k];
                v[k] = b2 * v[k] + one_b2 * g[k] * g[k];
                *w *= decay;
                *w -= step_size * m[k] / ((v[k] * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Scale gradients so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Matrix<T>], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.sum_sq()).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = T::from_f64(max_norm / norm);
        for g in grads.iter_mut() {
            g.scale_in_place(s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Init, ModelConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ModelParams<f64> {
        let cfg = ModelConfig { layers: 1, heads: 1, d_model: 4, d_ff: 4, max_rel_dist: 2, ..ModelConfig::tiny(3, 2) };
        ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(1), Init::Dense).unwrap()
    }

    fn fill(p: &ModelParams<f64>, v: f64) -> Vec<Matrix<f64>> {
        p.named().iter().map(|(_, m)| Matrix::filled(m.rows(), m.cols(), v)).collect()
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = params();
        let before = p.clone();
        let opt = AdamW { weight_decay: 0.0, ..Default::default() };
        let mut st = OptimizerState::new(&p);
        opt.step(&mut p, &fill(&before, 0.0), &mut st, 1e-3).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = params();
        let before = p.clone();
        let opt = AdamW { beta1: 0.9, beta2: 0.999, eps: 0.0, weight_decay: 0.0 };
        let mut st = OptimizerState::new(&p);
        opt.step(&mut p, &fill(&before, 1.0), &mut st, 0.01).unwrap();
        for ((_, a), (_, b)) in p.named().iter().zip(before.named().iter()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((y - x - 0.01).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decay_alone_shrinks_geometrically() {
        let mut p = params();
        let before = p.clone();
        let opt = AdamW { weight_decay: 0.1, ..Default::default() };
        let mut st = OptimizerState::new(&p);
        opt.step(&mut p, &fill(&before, 0.0), &mut st, 0.5).unwrap();
        let w0 = before.named()[0].1.get(0, 0);
        assert!((p.named()[0].1.get(0, 0) - w0 * 0.95).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_the_tensor() {
        let mut p = params();
        let mut g = fill(&p, 0.0);
        g[3].set(0, 0, f64::NAN);
        let name = p.named()[3].0.clone();
        let mut st = OptimizerState::new(&p);
        match AdamW::default().step(&mut p, &g, &mut st, 1e-3) {
            Err(TrainError::NonFiniteGradient { name: n }) => assert_eq!(n, name),
            other => panic!("{other:?}"),
        }
        assert_eq!(st.step, 0);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut g = vec![Matrix::from_vec(1, 2, vec![3.0, 0.0]), Matrix::from_vec(1, 1, vec![4.0])];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        let n: f64 = g.iter().map(|m| m.sum_sq()).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert_eq!(clip_global_norm(&mut g, 2.0), n);
    }
}
