//! Cosine-sine decomposition of an even-dimensional unitary:
//! `U = (A1 ⊕ A2) [[C, -S], [S, C]] (B1 ⊕ B2)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{check_unitary, CMatrix};

/// Columns whose sine is below this are completed by orthogonalization
/// instead of being read off the lower-left block.
const SINE_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct Csd {
    pub a1: CMatrix,
    pub a2: CMatrix,
    pub b1: CMatrix,
    pub b2: CMatrix,
    /// Cosines, non-increasing.
    pub c: Vec<f64>,
    pub s: Vec<f64>,
}

impl Csd {
    pub fn half(&self) -> usize {
        self.c.len()
    }

    /// The rotation `[[c, -s], [s, c]]` acting on the leading qubit for the
    /// `r`-th value of the remaining ones.
    pub fn rotation(&self, r: usize) -> CMatrix {
        let (c, s) = (self.c[r], self.s[r]);
        CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(c, 0.0),
                Complex64::new(-s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
            ],
        )
    }

    pub fn middle(&self) -> CMatrix {
        let k = self.half();
        let mut m = CMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            m[(i, i)] = Complex64::new(self.c[i], 0.0);
            m[(k + i, k + i)] = Complex64::new(self.c[i], 0.0);
            m[(i, k + i)] = Complex64::new(-self.s[i], 0.0);
            m[(k + i, i)] = Complex64::new(self.s[i], 0.0);
        }
        m
    }

    pub fn reconstruct(&self) -> CMatrix {
        let k = self.half();
        let mut a = CMatrix::zeros(2 * k, 2 * k);
        let mut b = CMatrix::zeros(2 * k, 2 * k);
        a.view_mut((0, 0), (k, k)).copy_from(&self.a1);
        a.view_mut((k, k), (k, k)).copy_from(&self.a2);
        b.view_mut((0, 0), (k, k)).copy_from(&self.b1);
        b.view_mut((k, k), (k, k)).copy_from(&self.b2);
        a * self.middle() * b
    }
}

fn column_norm(m: &CMatrix, j: usize) -> f64 {
    m.column(j).norm()
}

/// Orthonormalizes `v` against `basis` (two passes).
fn orthonormalize(mut v: nalgebra::DVector<Complex64>, basis: &[nalgebra::DVector<Complex64>]) -> Option<nalgebra::DVector<Complex64>> {
    for _ in 0..2 {
        for q in basis {
            let p = q.dotc(&v);
            v -= q * p;
        }
    }
    let n = v.norm();
    (n > 1e-6).then(|| v / Complex64::new(n, 0.0))
}

pub fn csd(u: &CMatrix) -> Result<Csd> {
    check_unitary(u, 1e-8)?;
    let d = u.nrows();
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("csd needs an even dimension, got {d}")));
    }
    let k = d / 2;
    let u00 = u.view((0, 0), (k, k)).into_owned();
    let u01 = u.view((0, k), (k, k)).into_owned();
    let u10 = u.view((k, 0), (k, k)).into_owned();
    let u11 = u.view((k, k), (k, k)).into_owned();

    let svd = u00.svd(true, true);
    let (su, svt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let a1 = CMatrix::from_fn(k, k, |r, j| su[(r, order[j])]);
    let b1 = CMatrix::from_fn(k, k, |i, col| svt[(order[i], col)]);
    let c_raw: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].min(1.0)).collect();

    let z = &u10 * b1.adjoint();
    let s_raw: Vec<f64> = (0..k).map(|j| column_norm(&z, j)).collect();

    let mut by_sine: Vec<usize> = (0..k).collect();
    by_sine.sort_by(|&i, &j| s_raw[j].total_cmp(&s_raw[i]));
    let mut cols: Vec<Option<nalgebra::DVector<Complex64>>> = vec![None; k];
    let mut basis = Vec::with_capacity(k);
    let mut spare = 0usize;
    for &j in &by_sine {
        let candidate = if s_raw[j] > SINE_FLOOR {
            orthonormalize(z.column(j) / Complex64::new(s_raw[j], 0.0), &basis)
        } else {
            None
        };
        let col = match candidate {
            Some(v) => v,
            None => loop {
                let mut e = nalgebra::DVector::<Complex64>::zeros(k);
                e[spare % k] = Complex64::new(1.0, 0.0);
                spare += 1;
                if let Some(v) = orthonormalize(e, &basis) {
                    break v;
                }
                if spare > 2 * k {
                    return Err(Error::InvalidArgument("csd completion failed".into()));
                }
            },
        };
        basis.push(col.clone());
        cols[j] = Some(col);
    }
    let mut a2 = CMatrix::zeros(k, k);
    for (j, col) in cols.into_iter().enumerate() {
        a2.set_column(j, &col.expect("every column filled"));
    }

    // Angles from both blocks so that c^2 + s^2 = 1 exactly.
    let (c, s): (Vec<f64>, Vec<f64>) = (0..k)
        .map(|i| {
            let t = s_raw[i].atan2(c_raw[i]);
            (t.cos(), t.sin())
        })
        .unzip();

    let top = a1.adjoint() * &u01;
    let bottom = a2.adjoint() * &u11;
    let b2 = CMatrix::from_fn(k, k, |i, j| {
        if s[i] > c[i] {
            -top[(i, j)] / s[i]
        } else {
            bottom[(i, j)] / c[i]
        }
    });

    Ok(Csd { a1, a2, b1, b2, c, s })
}
