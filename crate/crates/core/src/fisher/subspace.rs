use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::scatter::{scatter_matrices, LabeledSamples};
use super::LdaError;

/// Eigenvalues below this fraction of the largest are treated as zero when
/// determining numerical rank.
const RANK_REL_TOL: f64 = 1e-10;
/// Leading generalized eigenvalue (between/within ratio) at or below which
/// the classes are considered indistinguishable.
const ZERO_DISCRIMINANT: f64 = 1e-12;

/// Regularization added to the within-class scatter before whitening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    None,
    Absolute(f64),
    /// `scale · trace(S_w) / q`, with `S_w` taken in the PCA space of
    /// dimension `q`.
    RelativeTrace(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::RelativeTrace(1e-6)
    }
}

/// A Fisherface projection: PCA to `q` dimensions, then LDA to `r ≤ C−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminativeSubspace {
    pub mean: DVector<f64>,
    /// `d × q`, orthonormal columns.
    pub pca_basis: DMatrix<f64>,
    /// `q × r`, unit columns in descending eigenvalue order.
    pub lda_basis: DMatrix<f64>,
    /// Generalized eigenvalues of the kept directions.
    pub eigenvalues: Vec<f64>,
    /// `pca_basis · lda_basis`, cached for projection.
    combined: DMatrix<f64>,
}

impl DiscriminativeSubspace {
    pub fn from_parts(
        mean: DVector<f64>,
        pca_basis: DMatrix<f64>,
        lda_basis: DMatrix<f64>,
        eigenvalues: Vec<f64>,
    ) -> Result<Self, LdaError> {
        let d = mean.len();
        if pca_basis.nrows() != d || lda_basis.nrows() != pca_basis.ncols() || lda_basis.ncols() != eigenvalues.len() {
            return Err(LdaError::ShapeMismatch);
        }
        let combined = &pca_basis * &lda_basis;
        Ok(Self {
            mean,
            pca_basis,
            lda_basis,
            eigenvalues,
            combined,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn pca_dim(&self) -> usize {
        self.pca_basis.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.lda_basis.ncols()
    }

    /// Discriminant directions in the input space (`d × r`).
    pub fn directions(&self) -> &DMatrix<f64> {
        &self.combined
    }

    /// `lda_basisᵀ · pca_basisᵀ · (v − mean)`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, LdaError> {
        if v.len() != self.input_dim() {
            return Err(LdaError::DimensionMismatch {
                expected: self.input_dim(),
                found: v.len(),
            });
        }
        let r = self.output_dim();
        let mut out = vec![0.0; r];
        for (j, o) in out.iter_mut().enumerate() {
            let col = self.combined.column(j);
            *o = v
                .iter()
                .zip(self.mean.iter())
                .zip(col.iter())
                .map(|((x, m), w)| (x - m) * w)
                .sum();
        }
        Ok(out)
    }
}

pub fn project(sub: &DiscriminativeSubspace, v: &[f64]) -> Result<Vec<f64>, LdaError> {
    sub.project(v)
}

/// Fisherface training.
///
/// The centered data is first reduced by PCA to `q = min(d, N−C)` dimensions
/// (fewer if the data has lower rank) so the within-class scatter can be
/// inverted. In that space the generalized problem `S_b v = λ (S_w + ρI) v`
/// is solved by whitening with the Cholesky factor of `S_w + ρI`; the top
/// `r = min(C−1, rank S_b)` eigenvectors are kept, each scaled to unit length
/// with its largest-magnitude entry positive.
pub fn fit_subspace(s: &LabeledSamples, ridge: Ridge) -> Result<DiscriminativeSubspace, LdaError> {
    let c = s.class_count();
    if c < 2 {
        return Err(LdaError::SingleClass);
    }
    let n = s.len();
    if n < c + 1 {
        return Err(LdaError::TooFewSamples { samples: n, classes: c });
    }
    let d = s.dim();
    let mean = s.mean_of_means();
    let centered = DMatrix::from_columns(&s.vectors().iter().map(|v| v - &mean).collect::<Vec<_>>());

    let pca_basis = pca_basis(&centered, d.min(n - c))?;
    let q = pca_basis.ncols();

    let reduced: Vec<Vec<f64>> = s
        .vectors()
        .iter()
        .map(|v| (pca_basis.transpose() * (v - &mean)).as_slice().to_vec())
        .collect();
    let reduced = LabeledSamples::new(reduced, s.labels().to_vec())?;
    let (mut sw, sb) = scatter_matrices(&reduced)?;

    let rho = match ridge {
        Ridge::None => 0.0,
        Ridge::Absolute(a) => a,
        Ridge::RelativeTrace(scale) => scale * sw.trace() / q as f64,
    };
    if !rho.is_finite() || rho < 0.0 {
        return Err(LdaError::NumericalFailure(format!("invalid ridge {rho}")));
    }
    for i in 0..q {
        sw[(i, i)] += rho;
    }

    let chol = sw
        .clone()
        .cholesky()
        .ok_or_else(|| LdaError::NumericalFailure("within-class scatter is not positive definite".into()))?;
    let l = chol.l();
    // M = L⁻¹ S_b L⁻ᵀ
    let linv_sb = l
        .solve_lower_triangular(&sb)
        .ok_or_else(|| LdaError::NumericalFailure("singular Cholesky factor".into()))?;
    let m_t = l
        .solve_lower_triangular(&linv_sb.transpose())
        .ok_or_else(|| LdaError::NumericalFailure("singular Cholesky factor".into()))?;
    let m = (&m_t + m_t.transpose()) * 0.5;

    let (values, vectors) = sorted_eigen(m);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LdaError::NumericalFailure("non-finite eigenvalue".into()));
    }
    let top = values.first().copied().unwrap_or(0.0);
    if top <= ZERO_DISCRIMINANT {
        return Err(LdaError::ZeroDiscriminant);
    }
    let rank = values.iter().filter(|&&v| v > RANK_REL_TOL * top).count();
    let r = (c - 1).min(rank);

    let lt = l.transpose();
    let mut lda = DMatrix::zeros(q, r);
    for j in 0..r {
        let v = lt
            .solve_upper_triangular(&vectors.column(j).into_owned())
            .ok_or_else(|| LdaError::NumericalFailure("singular Cholesky factor".into()))?;
        let v = normalize_with_sign(v)
            .ok_or_else(|| LdaError::NumericalFailure("zero discriminant direction".into()))?;
        lda.set_column(j, &v);
    }
    DiscriminativeSubspace::from_parts(mean, pca_basis, lda, values[..r].to_vec())
}

/// Leading principal directions of the columns of `centered` (`d × N`),
/// keeping at most `max_q` and dropping numerically null ones.
fn pca_basis(centered: &DMatrix<f64>, max_q: usize) -> Result<DMatrix<f64>, LdaError> {
    let (d, n) = centered.shape();
    let (values, raw) = if n < d {
        // snapshot method: eigenvectors u of XᵀX give directions X·u
        let (values, u) = sorted_eigen(centered.transpose() * centered);
        let dirs = centered * u;
        (values, dirs)
    } else {
        sorted_eigen(centered * centered.transpose())
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LdaError::NumericalFailure("non-finite PCA eigenvalue".into()));
    }
    let top = values.first().copied().unwrap_or(0.0);
    if top.is_nan() || top <= 0.0 {
        return Err(LdaError::ZeroDiscriminant);
    }
    let keep = values
        .iter()
        .take(max_q)
        .take_while(|&&v| v > RANK_REL_TOL * top)
        .count();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(keep);
    for j in 0..keep {
        let mut v = raw.column(j).into_owned();
        // two passes of modified Gram-Schmidt against the kept columns
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        match normalize_with_sign(v) {
            Some(v) => basis.push(v),
            None => break,
        }
    }
    if basis.is_empty() {
        return Err(LdaError::ZeroDiscriminant);
    }
    Ok(DMatrix::from_columns(&basis))
}

/// Symmetric eigen-decomposition with eigenpairs in descending eigenvalue
/// order (ties keep the solver's order).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<DVector<f64>> = idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let vectors = if cols.is_empty() {
        DMatrix::zeros(0, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    (values, vectors)
}

/// Unit length, largest-magnitude entry (first on ties) positive.
fn normalize_with_sign(v: DVector<f64>) -> Option<DVector<f64>> {
    let norm = v.norm();
    if !norm.is_finite() || norm <= 0.0 {
        return None;
    }
    let mut pivot = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
    Some(v * (sign / norm))
}
