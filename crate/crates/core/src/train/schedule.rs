use rand::Rng;

use super::TrainError;

/// `d_model^-0.5 · min(step^-0.5, step · warmup^-1.5)`.
pub fn noam_lr(step: u64, d_model: usize, warmup: u64) -> Result<f64, TrainError> {
    if step == 0 {
        return Err(TrainError::StepZero);
    }
    let s = step as f64;
    let w = warmup.max(1) as f64;
    Ok((d_model as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5)))
}

/// Uniform integer in `m_min..=m_max`.
pub fn sample_transition_length(rng: &mut impl Rng, m_min: usize, m_max: usize) -> usize {
    assert!(m_min <= m_max, "empty transition range {m_min}..={m_max}");
    rng.gen_range(m_min..=m_max)
}
