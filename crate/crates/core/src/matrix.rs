//! Dense complex matrices and a few standard gates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const UNITARY_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `|| U^dag U - I ||_max`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let prod = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - c(target, 0.0)).norm());
        }
    }
    worst
}

pub fn check_unitary(u: &CMatrix, tol: f64) -> Result<()> {
    let residual = unitarity_residual(u);
    if residual > tol {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

/// log2 of the dimension of a square power-of-two matrix.
pub fn qubit_count(u: &CMatrix) -> Result<usize> {
    let d = u.nrows();
    if !u.is_square() || d == 0 || !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    Ok(d.trailing_zeros() as usize)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// Permutation matrix sending basis state `j` to `perm(j)`.
pub fn permutation(d: usize, perm: impl Fn(usize) -> usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        m[(perm(j), j)] = c(1.0, 0.0);
    }
    m
}

pub fn cnot() -> CMatrix {
    permutation(4, |j| if j & 2 != 0 { j ^ 1 } else { j })
}

pub fn swap() -> CMatrix {
    permutation(4, |j| ((j & 1) << 1) | (j >> 1))
}

pub fn toffoli() -> CMatrix {
    permutation(8, |j| if j & 6 == 6 { j ^ 1 } else { j })
}

pub fn fredkin() -> CMatrix {
    permutation(8, |j| if j & 4 != 0 { 4 | ((j & 1) << 1) | ((j >> 1) & 1) } else { j })
}

pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let d: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = CMatrix::zeros(d, d);
    let mut off = 0;
    for b in blocks {
        m.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    m
}

/// Haar-random unitary via QR of a complex Gaussian matrix with the phase
/// of the diagonal of R absorbed.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let z = CMatrix::from_fn(d, d, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal)) / 2f64.sqrt()
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let ph = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Frobenius-norm distance after removing the best global phase.
pub fn phase_aligned_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let ph = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c(1.0, 0.0) };
    (a * ph - b).norm()
}

pub fn is_identity(u: &CMatrix, tol: f64) -> bool {
    u.is_square() && (u - identity(u.nrows())).iter().all(|x| x.norm() <= tol)
}

/// Rows of `[re, im]` pairs.
pub type MatrixRows = Vec<Vec<[f64; 2]>>;

pub fn to_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn from_rows(rows: &MatrixRows) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("matrix must be square and non-empty".into()));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::InvalidArgument("non-finite matrix entry".into()));
            }
            m[(i, j)] = c(v[0], v[1]);
        }
    }
    Ok(m)
}

/// `#[serde(with = "crate::matrix::rows")]` for `CMatrix` fields.
pub mod rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let r = MatrixRows::deserialize(d)?;
        from_rows(&r).map_err(serde::de::Error::custom)
    }
}

/// Same as [`rows`] for `Vec<CMatrix>`.
pub mod rows_vec {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMatrix>, D::Error> {
        let r = Vec::<MatrixRows>::deserialize(d)?;
        r.iter()
            .map(|x| from_rows(x).map_err(serde::de::Error::custom))
            .collect()
    }
}
