//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};

pub type Mat = DMatrix<f64>;

/// Block-diagonal matrix assembled from square blocks, in order.
pub fn block_diag(blocks: &[Mat]) -> Mat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let m = b.nrows();
        out.view_mut((at, at), (m, m)).copy_from(b);
        at += m;
    }
    out
}

/// `a ⊗ I_m`.
pub fn kron_identity(a: &Mat, m: usize) -> Mat {
    let (r, c) = a.shape();
    let mut out = Mat::zeros(r * m, c * m);
    for i in 0..r {
        for j in 0..c {
            let v = a[(i, j)];
            if v != 0.0 {
                for d in 0..m {
                    out[(i * m + d, j * m + d)] = v;
                }
            }
        }
    }
    out
}

/// `1_n ⊗ I_m`, an `nm × m` stack of identities.
pub fn stacked_identity(n: usize, m: usize) -> Mat {
    let mut out = Mat::zeros(n * m, m);
    for k in 0..n {
        for d in 0..m {
            out[(k * m + d, d)] = 1.0;
        }
    }
    out
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `a`.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().copied().collect()
}

pub fn lambda_max(a: &Mat) -> f64 {
    sym_eigenvalues(a).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn lambda_min(a: &Mat) -> f64 {
    sym_eigenvalues(a).into_iter().fold(f64::INFINITY, f64::min)
}

/// Positive semi-definiteness with a roundoff allowance scaled by the
/// largest eigenvalue magnitude.
pub fn is_psd(a: &Mat, rel_tol: f64) -> bool {
    let ev = sym_eigenvalues(a);
    let scale = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    min >= -rel_tol * scale.max(f64::MIN_POSITIVE)
}

/// Spectral radius of a general square matrix.
pub fn spectral_radius(a: &Mat) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}
