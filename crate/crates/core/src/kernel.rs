//! Kernel matrices over samples.
//!
//! A [`KernelMatrix`] is a symmetric `N x N` matrix, optionally carrying a
//! factor `Z` with `K = Z Zᵀ`. The factor is what the prefix sampler consumes;
//! kernels built from features get it for free, other kernels obtain it from a
//! PSD eigen-projection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::{FeatureMatrix, KernelMeta};
use crate::linalg::symmetric_eigen;

/// Rows whose norm falls below this are treated as zero.
pub const ZERO_ROW_TOL: f64 = 1e-12;

/// Eigenvalues below `EIGEN_CUTOFF * λ_max` are dropped by [`factorize`].
pub const EIGEN_CUTOFF: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("sample {row} has a zero feature vector (norm < 1e-12)")]
    ZeroRow { row: usize },
    #[error("kernel must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite kernel entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("kernel sizes differ: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    CenteredCosine,
    Linear,
    Precomputed,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::CenteredCosine => "centered_cosine",
            KernelKind::Linear => "linear",
            KernelKind::Precomputed => "precomputed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    data: DMatrix<f64>,
    centered: bool,
    factor: Option<DMatrix<f64>>,
    kind: KernelKind,
    symmetrized: bool,
    source_model_id: Option<String>,
}

impl KernelMatrix {
    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        self.factor.as_ref()
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// True when a precomputed input was not symmetric and had to be averaged
    /// with its transpose.
    pub fn was_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn source_model_id(&self) -> Option<&str> {
        self.source_model_id.as_deref()
    }

    pub fn with_source(mut self, model_id: impl Into<String>) -> Self {
        self.source_model_id = Some(model_id.into());
        self
    }

    /// Kernel `Z Zᵀ` built from an explicit factor.
    pub fn from_factor(factor: DMatrix<f64>, kind: KernelKind) -> Self {
        let data = &factor * factor.transpose();
        let centered = factor
            .column_iter()
            .all(|c| c.sum().abs() <= 1e-9 * (1.0 + c.amax() * c.len() as f64));
        Self {
            data,
            centered,
            factor: Some(factor),
            kind,
            symmetrized: false,
            source_model_id: None,
        }
    }

    /// Attaches a PSD factor computed by [`factorize`] if none is present.
    pub fn with_factor(mut self) -> Self {
        if self.factor.is_none() {
            self.factor = Some(psd_factor(&self.data));
        }
        self
    }

    pub fn meta(&self) -> KernelMeta {
        KernelMeta {
            kernel_kind: self.kind,
            centered: self.centered,
            source_model_id: self.source_model_id.clone(),
            n: self.n(),
            symmetrized: self.symmetrized,
        }
    }

    /// Checks the structural invariants; returns the first violation.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.n();
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (self.data[(i, j)], self.data[(j, i)]);
                if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                    return Err(format!("asymmetric at ({i}, {j}): {a} vs {b}"));
                }
            }
        }
        if self.centered {
            for (i, row) in self.data.row_iter().enumerate() {
                if row.sum().abs() > 1e-6 * n as f64 {
                    return Err(format!("row {i} sums to {}", row.sum()));
                }
            }
        }
        if let Some(z) = &self.factor {
            let err = (&self.data - z * z.transpose()).amax();
            if err > 1e-6 {
                return Err(format!("factor residual {err}"));
            }
        }
        Ok(())
    }
}

/// Double-centering `H K H` with `H = I - 11ᵀ/N`.
pub fn center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows() as f64;
    let row_means: Vec<f64> = k.row_iter().map(|r| r.sum() / n).collect();
    let col_means: Vec<f64> = k.column_iter().map(|c| c.sum() / n).collect();
    let grand = row_means.iter().sum::<f64>() / n;
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        k[(i, j)] - row_means[i] - col_means[j] + grand
    })
}

/// Subtracts the per-column mean, i.e. left-multiplies by `H`.
pub fn center_columns(f: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = f.clone();
    let n = f.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// Centered cosine similarity: rows are L2-normalized, the cosine Gram matrix
/// is formed and then double-centered.
///
/// The factor is the column-centered matrix of normalized rows `H F̂`, so that
/// `K = H F̂ F̂ᵀ H = (H F̂)(H F̂)ᵀ` holds exactly.
pub fn centered_cosine_kernel(features: &FeatureMatrix) -> Result<KernelMatrix, KernelError> {
    let mut unit = features.data().clone();
    for (row, mut r) in unit.row_iter_mut().enumerate() {
        let norm = r.norm();
        if norm < ZERO_ROW_TOL {
            return Err(KernelError::ZeroRow { row });
        }
        r /= norm;
    }
    let factor = center_columns(&unit);
    if let Some(row) = factor.row_iter().position(|r| r.norm() < ZERO_ROW_TOL) {
        return Err(KernelError::ZeroRow { row });
    }
    let data = &factor * factor.transpose();
    Ok(KernelMatrix {
        data,
        centered: true,
        factor: Some(factor),
        kind: KernelKind::CenteredCosine,
        symmetrized: false,
        source_model_id: Some(features.model_id().to_string()),
    })
}

/// Plain inner-product kernel `F Fᵀ`, optionally on column-centered features.
pub fn linear_kernel(features: &FeatureMatrix, center_features: bool) -> KernelMatrix {
    let factor = if center_features {
        center_columns(features.data())
    } else {
        features.data().clone()
    };
    let data = &factor * factor.transpose();
    KernelMatrix {
        data,
        centered: center_features,
        factor: Some(factor),
        kind: KernelKind::Linear,
        symmetrized: false,
        source_model_id: Some(features.model_id().to_string()),
    }
}

/// Wraps a user-supplied matrix. Asymmetric input is replaced by `(K + Kᵀ)/2`
/// and flagged in [`KernelMatrix::was_symmetrized`].
pub fn precomputed_kernel(data: DMatrix<f64>, center_kernel: bool) -> Result<KernelMatrix, KernelError> {
    let (rows, cols) = data.shape();
    if rows != cols {
        return Err(KernelError::NotSquare { rows, cols });
    }
    for row in 0..rows {
        for col in 0..cols {
            if !data[(row, col)].is_finite() {
                return Err(KernelError::NonFinite { row, col });
            }
        }
    }
    let symmetrized = (0..rows).any(|i| (0..i).any(|j| data[(i, j)] != data[(j, i)]));
    let sym = if symmetrized {
        (&data + data.transpose()) * 0.5
    } else {
        data
    };
    let data = if center_kernel { center(&sym) } else { sym };
    Ok(KernelMatrix {
        data,
        centered: center_kernel,
        factor: None,
        kind: KernelKind::Precomputed,
        symmetrized,
        source_model_id: None,
    })
}

/// Factor `Z` with `Z Zᵀ = K₊`, the PSD projection of `K`.
///
/// Returns the stored factor when the kernel already has one.
pub fn factorize(k: &KernelMatrix) -> DMatrix<f64> {
    match &k.factor {
        Some(z) => z.clone(),
        None => psd_factor(&k.data),
    }
}

/// Eigen-decomposition route behind [`factorize`]: negative eigenvalues are
/// clipped to zero and eigenvalues `<= 1e-10 λ_max` dropped. Columns are
/// ordered by decreasing eigenvalue.
pub fn psd_factor(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let (values, vectors) = symmetric_eigen(k).expect("symmetric eigen-decomposition of a finite matrix");
    let lambda_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if n == 0 || lambda_max <= 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let cutoff = EIGEN_CUTOFF * lambda_max;
    let mut kept: Vec<usize> = (0..n).filter(|&i| values[i] > cutoff).collect();
    kept.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut z = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        z.set_column(c, &(vectors.column(i) * values[i].sqrt()));
    }
    z
}

/// Kernel of the product prior `μ_{K1} μ_{K2} ∝ μ_{K1+K2}`.
pub fn combine_priors(k1: &KernelMatrix, k2: &KernelMatrix) -> Result<KernelMatrix, KernelError> {
    if k1.n() != k2.n() {
        return Err(KernelError::ShapeMismatch {
            left: k1.n(),
            right: k2.n(),
        });
    }
    let factor = match (&k1.factor, &k2.factor) {
        (Some(a), Some(b)) => {
            let mut z = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
            z.columns_mut(0, a.ncols()).copy_from(a);
            z.columns_mut(a.ncols(), b.ncols()).copy_from(b);
            Some(z)
        }
        _ => None,
    };
    let source_model_id = match (&k1.source_model_id, &k2.source_model_id) {
        (Some(a), Some(b)) => Some(format!("{a}+{b}")),
        (a, b) => a.clone().or_else(|| b.clone()),
    };
    Ok(KernelMatrix {
        data: &k1.data + &k2.data,
        centered: k1.centered && k2.centered,
        factor,
        kind: if k1.kind == k2.kind {
            k1.kind
        } else {
            KernelKind::Precomputed
        },
        symmetrized: k1.symmetrized || k2.symmetrized,
        source_model_id,
    })
}

/// Block-diagonal graph of `n_samples` groups of `n_views` augmented views:
/// `G_ij = 1` iff `⌊i/V⌋ = ⌊j/V⌋`.
pub fn ssl_prior_graph(n_samples: usize, n_views: usize) -> KernelMatrix {
    let size = n_samples * n_views;
    let v = n_views.max(1);
    let data = DMatrix::from_fn(size, size, |i, j| if i / v == j / v { 1.0 } else { 0.0 });
    KernelMatrix {
        data,
        centered: false,
        factor: None,
        kind: KernelKind::Precomputed,
        symmetrized: false,
        source_model_id: None,
    }
}

/// One-hot labels that induce [`ssl_prior_graph`]: view `n` belongs to class
/// `⌊n/V⌋`, giving an `NV x N` matrix `Y` with `Y Yᵀ = G`.
pub fn ssl_labels(n_samples: usize, n_views: usize) -> DMatrix<f64> {
    let v = n_views.max(1);
    DMatrix::from_fn(n_samples * n_views, n_samples, |row, class| {
        if row / v == class {
            1.0
        } else {
            0.0
        }
    })
}
