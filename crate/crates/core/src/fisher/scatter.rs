use nalgebra::{DMatrix, DVector};

use super::LdaError;

/// Labeled training vectors of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSamples {
    vectors: Vec<DVector<f64>>,
    labels: Vec<usize>,
    /// Distinct labels, ascending.
    classes: Vec<usize>,
}

impl LabeledSamples {
    pub fn new(vectors: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, LdaError> {
        if vectors.len() != labels.len() {
            return Err(LdaError::LengthMismatch(vectors.len(), labels.len()));
        }
        let d = vectors.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(LdaError::Empty);
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(LdaError::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(LdaError::NonFinite);
        }
        let mut classes = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        Ok(Self {
            vectors: vectors.into_iter().map(DVector::from_vec).collect(),
            labels,
            classes,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Per-class `(mean, count)` in ascending label order.
    pub fn class_means(&self) -> Vec<(DVector<f64>, usize)> {
        self.classes
            .iter()
            .map(|&c| {
                let mut sum = DVector::zeros(self.dim());
                let mut n = 0;
                for (v, &l) in self.vectors.iter().zip(&self.labels) {
                    if l == c {
                        sum += v;
                        n += 1;
                    }
                }
                (sum / n as f64, n)
            })
            .collect()
    }

    /// Mean of the class means (not the sample mean, unless balanced).
    pub fn mean_of_means(&self) -> DVector<f64> {
        let means = self.class_means();
        let mut m = DVector::zeros(self.dim());
        for (mu, _) in &means {
            m += mu;
        }
        m / means.len() as f64
    }

    pub(crate) fn class_index(&self, label: usize) -> usize {
        self.classes.binary_search(&label).expect("label belongs to a class")
    }
}

/// Within-class `S_w = Σ_i Σ_{x∈X_i} (x−μ_i)(x−μ_i)ᵀ` and between-class
/// `S_b = Σ_i N_i (μ_i−μ)(μ_i−μ)ᵀ` scatter, with `μ` the mean of the class
/// means.
pub fn scatter_matrices(s: &LabeledSamples) -> Result<(DMatrix<f64>, DMatrix<f64>), LdaError> {
    if s.class_count() < 2 {
        return Err(LdaError::SingleClass);
    }
    let d = s.dim();
    let means = s.class_means();
    let mu = s.mean_of_means();
    let mut sw = DMatrix::zeros(d, d);
    for (v, &l) in s.vectors().iter().zip(s.labels()) {
        let dev = v - &means[s.class_index(l)].0;
        sw.syger(1.0, &dev, &dev, 1.0);
    }
    let mut sb = DMatrix::zeros(d, d);
    for (m, n) in &means {
        let dev = m - &mu;
        sb.syger(*n as f64, &dev, &dev, 1.0);
    }
    // syger fills the lower triangle only
    sw.fill_upper_triangle_with_lower_triangle();
    sb.fill_upper_triangle_with_lower_triangle();
    Ok((sw, sb))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_example() -> LabeledSamples {
        LabeledSamples::new(
            vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![5.0, 1.0], vec![7.0, 1.0]],
            vec![1, 1, 2, 2],
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluated_two_class_scatter() {
        let (sw, sb) = scatter_matrices(&two_class_example()).unwrap();
        // μ1=(1,0), μ2=(6,1), μ=(3.5,0.5); μ_i−μ = ∓(2.5,0.5)
        assert_eq!(sw, DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]));
        assert_eq!(sb, DMatrix::from_row_slice(2, 2, &[25.0, 5.0, 5.0, 1.0]));
    }

    #[test]
    fn samples_at_class_means_have_zero_within_scatter() {
        let s = LabeledSamples::new(
            vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![3.0, -1.0], vec![3.0, -1.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let (sw, _) = scatter_matrices(&s).unwrap();
        assert_eq!(sw, DMatrix::zeros(2, 2));
    }

    #[test]
    fn equal_class_means_have_zero_between_scatter() {
        let s = LabeledSamples::new(
            vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![2.0, 1.0], vec![0.0, 3.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let (_, sb) = scatter_matrices(&s).unwrap();
        assert_eq!(sb, DMatrix::zeros(2, 2));
    }

    #[test]
    fn rejects_single_class_and_ragged_input() {
        let s = LabeledSamples::new(vec![vec![0.0], vec![1.0]], vec![3, 3]).unwrap();
        assert!(matches!(scatter_matrices(&s), Err(LdaError::SingleClass)));
        assert!(matches!(
            LabeledSamples::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0, 1]),
            Err(LdaError::DimensionMismatch { .. })
        ));
        assert!(matches!(LabeledSamples::new(vec![vec![0.0]], vec![0, 1]), Err(LdaError::LengthMismatch(1, 2))));
    }
}
