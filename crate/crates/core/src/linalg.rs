//! Dense symmetric linear algebra helpers.
//!
//! Every matrix this crate exponentiates or factors is symmetric, so all of
//! it goes through one eigendecomposition path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigendecomposition with eigenvalues sorted ascending and eigenvectors
/// permuted to match.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SortedEigen {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let sym = symmetrize(m);
        let eig = jacobi_polish(&sym, SymmetricEigen::new(sym.clone()));
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DVector::from_iterator(self.values.len(), self.values.iter().map(|&l| f(l)));
        let mut left = self.vectors.clone();
        for (j, s) in scaled.iter().enumerate() {
            left.column_mut(j).scale_mut(*s);
        }
        &left * self.vectors.transpose()
    }

    /// `V · diag(f(λ)) · Vᵀ · x` without forming the matrix.
    pub fn apply(&self, f: impl Fn(f64) -> f64, x: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.vectors.tr_mul(x);
        for (c, &l) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= f(l);
        }
        &self.vectors * coeffs
    }
}

/// Cyclic Jacobi sweeps on `VᵀAV`. The QR-based decomposition can leave
/// `V·diag(λ)·Vᵀ` off by ~1e-11 when eigenvalues cluster; a few rotations on the
/// nearly diagonal matrix bring it down to rounding level.
fn jacobi_polish(a: &DMatrix<f64>, eig: SymmetricEigen<f64, nalgebra::Dyn>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let n = a.nrows();
    let mut v = eig.eigenvectors;
    let mut d = symmetrize(&(v.transpose() * a * &v));
    for _ in 0..8 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = d[(p, q)];
                if apq == 0.0 || apq.abs() <= f64::EPSILON * 1e-3 * (d[(p, p)].abs() + d[(q, q)].abs()) {
                    continue;
                }
                rotated = true;
                let theta = (d[(q, q)] - d[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (dkp, dkq) = (d[(k, p)], d[(k, q)]);
                    d[(k, p)] = c * dkp - s * dkq;
                    d[(k, q)] = s * dkp + c * dkq;
                }
                for k in 0..n {
                    let (dpk, dqk) = (d[(p, k)], d[(q, k)]);
                    d[(p, k)] = c * dpk - s * dqk;
                    d[(q, k)] = s * dpk + c * dqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    SymmetricEigen { eigenvalues: d.diagonal(), eigenvectors: v }
}

/// Average a matrix with its transpose; removes rounding asymmetry.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    SortedEigen::new(m).values.iter().copied().collect()
}

/// `exp(m · t)` for symmetric `m`.
pub fn sym_expm(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    SortedEigen::new(m).map(|l| (l * t).exp())
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `11ᵀ/N`.
pub fn averaging_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, n, 1.0 / n as f64)
}
