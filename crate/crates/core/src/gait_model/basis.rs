//! Basis functions and the Kronecker-structured regressor.
//!
//! The regressor row is `ramp(r) ⊗ stride(l) ⊗ phase(p)`, so coefficient
//! index `(ir * 2 + il) * (2N + 1) + k` multiplies ramp term `ir`, stride
//! term `il` and Fourier term `k`. Fourier term `0` is the constant,
//! `2m - 1` is `cos(2πmp)` and `2m` is `sin(2πmp)`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, RowDVector};

/// First-order ramp basis `(r, 1 - r)`, with `r` in degrees.
///
/// The basis is affine in `r`; entries go negative outside `[0, 1]`.
pub fn basis_ramp(r: f64) -> [f64; 2] {
    [r, 1.0 - r]
}

/// First-order stride basis `(l, 1 - l)` on leg-length-normalized stride.
pub fn basis_stride(l: f64) -> [f64; 2] {
    [l, 1.0 - l]
}

/// Number of Fourier terms for harmonic order `n`.
pub const fn phase_basis_len(n: usize) -> usize {
    2 * n + 1
}

/// Regressor length `4 (2N + 1)`.
pub const fn regressor_len(n: usize) -> usize {
    4 * phase_basis_len(n)
}

/// Fourier basis `(1, cos 2πp, sin 2πp, ..., cos 2πNp, sin 2πNp)`.
pub fn basis_phase(p: f64, n: usize) -> RowDVector<f64> {
    basis_phase_derivative(p, n, 0)
}

/// `order`-th derivative of [`basis_phase`] with respect to `p`.
pub fn basis_phase_derivative(p: f64, n: usize, order: u32) -> RowDVector<f64> {
    let mut out = RowDVector::zeros(phase_basis_len(n));
    out[0] = if order == 0 { 1.0 } else { 0.0 };
    for m in 1..=n {
        let w = TAU * m as f64;
        let (s, c) = (w * p).sin_cos();
        // d/dp cos = -w sin, d/dp sin = w cos; the pair rotates by a quarter turn per order.
        let scale = w.powi(order as i32);
        let (dc, ds) = match order % 4 {
            0 => (c, s),
            1 => (-s, c),
            2 => (-c, -s),
            _ => (s, -c),
        };
        out[2 * m - 1] = scale * dc;
        out[2 * m] = scale * ds;
    }
    out
}

/// Kronecker product of two matrices (row vectors are `1 × n` matrices).
pub fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * aij));
        }
    }
    out
}

/// Kronecker product of two row vectors.
pub fn kronecker_row(a: &[f64], b: &[f64]) -> RowDVector<f64> {
    RowDVector::from_iterator(
        a.len() * b.len(),
        a.iter().flat_map(|&ai| b.iter().map(move |&bj| ai * bj)),
    )
}

/// Full regressor row at normalized coordinates.
pub fn regressor_normalized(p: f64, l_norm: f64, r: f64, n: usize) -> RowDVector<f64> {
    regressor_derivative(p, l_norm, r, n, [0, 0, 0])
}

/// Regressor row differentiated `orders = [dp, dl, dr]` times.
///
/// The ramp and stride bases are linear, so any order above one vanishes.
pub fn regressor_derivative(
    p: f64,
    l_norm: f64,
    r: f64,
    n: usize,
    orders: [u32; 3],
) -> RowDVector<f64> {
    let ramp = match orders[2] {
        0 => basis_ramp(r),
        1 => [1.0, -1.0],
        _ => [0.0, 0.0],
    };
    let stride = match orders[1] {
        0 => basis_stride(l_norm),
        1 => [1.0, -1.0],
        _ => [0.0, 0.0],
    };
    let phase = basis_phase_derivative(p, n, orders[0]);
    let rl = kronecker_row(&ramp, &stride);
    kronecker_row(rl.as_slice(), phase.as_slice())
}

/// Human-readable name of a regressor coefficient, used in error reports.
pub fn term_name(index: usize, n: usize) -> String {
    let per = phase_basis_len(n);
    let block = index / per;
    let k = index % per;
    let ramp = if block / 2 == 0 { "r" } else { "(1-r)" };
    let stride = if block.is_multiple_of(2) { "l" } else { "(1-l)" };
    let phase = match k {
        0 => "1".to_string(),
        k if k % 2 == 1 => format!("cos{}", k.div_ceil(2)),
        k => format!("sin{}", k / 2),
    };
    format!("{ramp}*{stride}*{phase}")
}
