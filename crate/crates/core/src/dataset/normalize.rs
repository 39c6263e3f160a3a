use crate::tensor::Matrix;

use super::DatasetError;

pub const NORMALIZER_EPS: f64 = 1e-8;

/// Per-column standardisation `x → (x − mean) / std`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`NORMALIZER_EPS`].
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Pass-through normalizer for `cols` columns.
    pub fn identity(cols: usize) -> Self {
        Self {
            mean: vec![0.0; cols],
            std: vec![1.0; cols],
        }
    }

    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self, DatasetError> {
        let mut n = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for row in rows {
            if n == 0 {
                mean = vec![0.0; row.len()];
                m2 = vec![0.0; row.len()];
            }
            assert_eq!(row.len(), mean.len(), "ragged normalizer rows");
            n += 1;
            // Welford update.
            for ((m, s), x) in mean.iter_mut().zip(&mut m2).zip(row) {
                let d = x - *m;
                *m += d / n as f64;
                *s += d * (x - *m);
            }
        }
        if n == 0 {
            return Err(DatasetError::EmptyNormalizer);
        }
        let std = m2
            .iter()
            .map(|s| (s / n as f64).sqrt().max(NORMALIZER_EPS))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn cols(&self) -> usize {
        self.mean.len()
    }

    /// Restrict to `cols`, in that order.
    pub fn select(&self, cols: &[usize]) -> Self {
        Self {
            mean: cols.iter().map(|c| self.mean[*c]).collect(),
            std: cols.iter().map(|c| self.std[*c]).collect(),
        }
    }

    pub fn apply(&self, m: &mut Matrix<f64>) {
        assert_eq!(m.cols(), self.cols(), "normalizer width");
        for r in 0..m.rows() {
            for ((x, mu), sd) in m.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - mu) / sd;
            }
        }
    }

    pub fn invert(&self, m: &mut Matrix<f64>) {
        assert_eq!(m.cols(), self.cols(), "normalizer width");
        for r in 0..m.rows() {
            for ((x, mu), sd) in m.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = *x * sd + mu;
            }
        }
    }

    /// Mean and std concatenated, for checkpoint storage.
    pub fn to_stats(&self) -> Vec<f64> {
        self.mean.iter().chain(&self.std).copied().collect()
    }

    pub fn from_stats(v: &[f64]) -> Option<Self> {
        if v.len() % 2 != 0 {
            return None;
        }
        let (mean, std) = v.split_at(v.len() / 2);
        Some(Self {
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Matrix<f64> {
        Matrix::from_fn(50, 3, |r, c| ((r * 7 + c * 3) % 11) as f64 * (c + 1) as f64 - 4.0)
    }

    #[test]
    fn constant_column_clamps_std() {
        let rows = [[2.0, 5.0], [2.0, 7.0]];
        let n = Normalizer::fit(rows.iter().map(|r| &r[..])).unwrap();
        assert_eq!(n.std[0], NORMALIZER_EPS);
        let mut m = Matrix::from_vec(1, 2, vec![2.0, 6.0]);
        n.apply(&mut m);
        assert_eq!(m.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn standardises_training_columns() {
        let d = data();
        let n = Normalizer::fit((0..d.rows()).map(|r| d.row(r))).unwrap();
        let mut m = d.clone();
        n.apply(&mut m);
        for c in 0..3 {
            let col: Vec<f64> = (0..m.rows()).map(|r| m.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-6 && (var.sqrt() - 1.0).abs() < 1e-6);
        }
        n.invert(&mut m);
        assert!(m.max_abs_diff(&d) < 1e-9);
    }

    #[test]
    fn empty_fit_errors_and_stats_round_trip() {
        assert!(Normalizer::fit(std::iter::empty()).is_err());
        let d = data();
        let n = Normalizer::fit((0..d.rows()).map(|r| d.row(r))).unwrap();
        assert_eq!(Normalizer::from_stats(&n.to_stats()).unwrap(), n);
        assert_eq!(n.select(&[2, 0]).mean, vec![n.mean[2], n.mean[0]]);
    }
}
