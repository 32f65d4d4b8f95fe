//! Reference values computed without the simulator: matrices assembled
//! entry by entry, resource closed forms, and detector sums.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;

pub type Matrix = DMatrix<Complex64>;
pub type Q = Ratio<i128>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn eye(d: usize) -> Matrix {
    DMatrix::from_fn(d, d, |i, j| if i == j { c(1.0) } else { c(0.0) })
}

/// Direct assembly of `diag(blocks...)`.
pub fn assemble(blocks: &[Matrix]) -> Matrix {
    let d: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = DMatrix::from_element(d, d, c(0.0));
    let mut at = 0;
    for b in blocks {
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                m[(at + i, at + j)] = b[(i, j)];
            }
        }
        at += b.nrows();
    }
    m
}

/// Permutation matrix sending basis state `j` to `f(j)`.
pub fn perm_matrix(d: usize, f: impl Fn(usize) -> usize) -> Matrix {
    let mut m = DMatrix::from_element(d, d, c(0.0));
    for j in 0..d {
        m[(f(j), j)] = c(1.0);
    }
    m
}

pub fn cnot() -> Matrix {
    perm_matrix(4, |j| if j >= 2 { j ^ 1 } else { j })
}

pub fn swap() -> Matrix {
    perm_matrix(4, |j| [0, 2, 1, 3][j])
}

pub fn toffoli() -> Matrix {
    perm_matrix(8, |j| if j >= 6 { j ^ 1 } else { j })
}

pub fn fredkin() -> Matrix {
    perm_matrix(8, |j| match j {
        5 => 6,
        6 => 5,
        x => x,
    })
}

fn pow(b: i128, e: u32) -> Q {
    Q::from_integer(b.pow(e))
}

pub fn multiplexor_xpm(n: u32) -> u64 {
    (1u64 << n) + n as u64 - 3
}

pub fn multiplexor_xpm_original(n: u32) -> u64 {
    3 * (1u64 << (n - 1)) + 2 * n as u64 - 5
}

pub fn cpm1_xpm(n: u32) -> Q {
    Q::new(10, 9) * pow(4, n) - pow(2, n) - Q::new(7 * n as i128, 3) - Q::new(1, 9)
}

pub fn cpm1_qubus(n: u32) -> Q {
    pow(4, n) / Q::from_integer(6) - Q::new(n as i128, 2) - Q::new(1, 6)
}

pub fn cpm1_interference(n: u32) -> Q {
    Q::new(4, 3) * pow(4, n) - Q::from_integer(4 * n as i128) - Q::new(4, 3)
}

pub fn cpm2_xpm(n: u32) -> Q {
    let m = n as i128;
    pow(4, n) + Q::from_integer(m - 3) * pow(2, n) + Q::new(m * m - 9 * m + 8, 2)
}

/// `sum_k e^{-|a|^2} |a|^{2k} / k! (1-eta)^k`.
pub fn fock_no_click(a: Complex64, eta: f64) -> f64 {
    let m = a.norm_sqr();
    let mut term = (-m).exp();
    let mut total = term;
    for k in 1..4000 {
        term *= m * (1.0 - eta) / k as f64;
        total += term;
        if term < 1e-30 && k as f64 > m {
            break;
        }
    }
    total
}

/// Log of `sum_k Pois(k; lambda) exp(-2 eta gamma^2 sin^2(k theta / 2))`
/// with `lambda = 2 alpha^2 sin^2 theta`, by direct recurrence on the
/// Poisson weights.
pub fn pnd_error_log(alpha: f64, theta: f64, gamma: f64, eta: f64) -> f64 {
    let lambda = 2.0 * alpha * alpha * theta.sin().powi(2);
    let hi = (lambda + 20.0 * lambda.sqrt() + 60.0) as u64;
    // log Pois(k) accumulated term by term
    let mut log_p = -lambda;
    let mut logs = Vec::with_capacity(hi as usize + 1);
    for k in 0..=hi {
        if k > 0 {
            log_p += lambda.ln() - (k as f64).ln();
        }
        logs.push(log_p - 2.0 * eta * gamma * gamma * (k as f64 * theta / 2.0).sin().powi(2));
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
}
