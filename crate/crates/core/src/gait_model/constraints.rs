//! Equality constraints on the gait-model coefficients.
//!
//! Three families keep the model physically sensible:
//! 1. at zero stride length every sinusoid coefficient vanishes, so the
//!    kinematics are constant over phase;
//! 2. at zero stride length the constant terms match resting priors: shank
//!    vertical, foot aligned with the ramp, heel at the origin;
//! 3. at phase 0.2 the foot angle equals the ramp angle for every stride
//!    length and incline (flat-foot contact).
//!
//! The families overlap (family 3 at `l = 0` is implied by 1 and 2), so each
//! output column keeps only a linearly independent subset of rows.

use nalgebra::{DMatrix, DVector};

use super::basis::{basis_phase, basis_ramp, basis_stride, kronecker, phase_basis_len, regressor_len};
use super::{Output, ParameterMatrix, FLAT_FOOT_PHASE};
use crate::error::{Error, Result};

/// Ramp angles (deg) that pin the linear ramp dependence.
const RAMP_ANCHORS: [f64; 2] = [0.0, 10.0];
/// Normalized stride lengths that pin the linear stride dependence.
const STRIDE_ANCHORS: [f64; 2] = [0.0, 1.0];

/// `A x = b` for a single output column, with `A` of full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraints {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearConstraints {
    pub fn empty(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, dim),
            b: DVector::zeros(0),
        }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        if self.rows() == 0 {
            return 0.0;
        }
        (&self.a * x - &self.b).amax()
    }

    /// Closest point (Euclidean) satisfying the constraints.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.rows() == 0 {
            return x.clone();
        }
        let gram = &self.a * self.a.transpose();
        let resid = &self.a * x - &self.b;
        let chol = gram
            .cholesky()
            .expect("constraint rows are independent after reduction");
        x - self.a.transpose() * chol.solve(&resid)
    }

    /// Remove rows that are linear combinations of earlier rows.
    ///
    /// A dependent row whose right-hand side disagrees with the combination
    /// is a contradiction and is reported.
    pub fn reduced(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let dim = a.ncols();
        let mut basis: Vec<(DVector<f64>, f64)> = Vec::new();
        let mut kept = Vec::new();
        for i in 0..a.nrows() {
            let row = a.row(i).transpose();
            let norm = row.norm();
            if norm == 0.0 {
                if b[i].abs() > 1e-12 {
                    return Err(Error::InconsistentConstraints {
                        row: i,
                        residual: b[i].abs(),
                    });
                }
                continue;
            }
            let mut v = row.clone();
            let mut beta = b[i];
            // two Gram-Schmidt passes keep the residual orthogonal in floating point
            for _ in 0..2 {
                for (q, bq) in &basis {
                    let c = q.dot(&v);
                    v.axpy(-c, q, 1.0);
                    beta -= c * bq;
                }
            }
            let vn = v.norm();
            if vn <= 1e-10 * norm {
                if beta.abs() > 1e-9 * (1.0 + b[i].abs()) {
                    return Err(Error::InconsistentConstraints {
                        row: i,
                        residual: beta.abs(),
                    });
                }
                continue;
            }
            basis.push((v / vn, beta / vn));
            kept.push(i);
        }
        let mut ra = DMatrix::zeros(kept.len(), dim);
        let mut rb = DVector::zeros(kept.len());
        for (k, &i) in kept.iter().enumerate() {
            ra.row_mut(k).copy_from(&a.row(i));
            rb[k] = b[i];
        }
        Ok(Self { a: ra, b: rb })
    }
}

/// The raw constraint families before per-column reduction.
#[derive(Debug, Clone)]
pub struct ConstraintFamilies {
    /// Zero-stride sinusoid rows, `4N × D`, right-hand side `4N × 4`.
    pub sinusoid: (DMatrix<f64>, DMatrix<f64>),
    /// Zero-stride constant rows, `2 × D`, right-hand side `2 × 4`.
    pub constant: (DMatrix<f64>, DMatrix<f64>),
    /// Flat-foot rows on the foot-angle output, `4 × D`.
    pub flat_foot: (DMatrix<f64>, DVector<f64>),
}

fn row(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.len(), v)
}

fn stacked(rows: &[[f64; 2]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j])
}

impl ConstraintFamilies {
    pub fn new(order: usize) -> Self {
        let per = phase_basis_len(order);
        let stride_zero = row(&basis_stride(0.0));

        // (0 | I_2N) picks out the sinusoid coefficients of a Fourier block
        let mut sinusoid_sel = DMatrix::zeros(2 * order, per);
        for k in 0..2 * order {
            sinusoid_sel[(k, k + 1)] = 1.0;
        }
        let a_sin = kronecker(
            &kronecker(&DMatrix::identity(2, 2), &stride_zero),
            &sinusoid_sel,
        );
        let b_sin = DMatrix::zeros(a_sin.nrows(), 4);

        let ramp_rows = stacked(&RAMP_ANCHORS.map(basis_ramp));
        let mut constant_sel = DMatrix::zeros(1, per);
        constant_sel[(0, 0)] = 1.0;
        let a_const = kronecker(&kronecker(&ramp_rows, &stride_zero), &constant_sel);
        // Resting priors: shank vertical, foot along the ramp, heel at the origin.
        let mut b_const = DMatrix::zeros(2, 4);
        for (i, r) in RAMP_ANCHORS.iter().enumerate() {
            b_const[(i, Output::FootAngle.index())] = *r;
        }

        let stride_rows = stacked(&STRIDE_ANCHORS.map(basis_stride));
        let phase = basis_phase(FLAT_FOOT_PHASE, order);
        let a_flat = kronecker(
            &kronecker(&ramp_rows, &stride_rows),
            &row(phase.as_slice()),
        );
        // rows run over (r, l) in (0,0), (0,1), (10,0), (10,1); the foot matches r
        let b_flat = DVector::from_iterator(
            4,
            RAMP_ANCHORS
                .iter()
                .flat_map(|&r| STRIDE_ANCHORS.iter().map(move |_| r)),
        );

        debug_assert_eq!(a_sin.ncols(), regressor_len(order));
        Self {
            sinusoid: (a_sin, b_sin),
            constant: (a_const, b_const),
            flat_foot: (a_flat, b_flat),
        }
    }

    /// Stack all rows that apply to output `j`.
    pub fn stacked_for(&self, output: Output) -> (DMatrix<f64>, DVector<f64>) {
        let j = output.index();
        let mut blocks: Vec<(&DMatrix<f64>, DVector<f64>)> = vec![
            (&self.sinusoid.0, self.sinusoid.1.column(j).into_owned()),
            (&self.constant.0, self.constant.1.column(j).into_owned()),
        ];
        if output == Output::FootAngle {
            blocks.push((&self.flat_foot.0, self.flat_foot.1.clone()));
        }
        let rows: usize = blocks.iter().map(|(a, _)| a.nrows()).sum();
        let dim = self.sinusoid.0.ncols();
        let mut a = DMatrix::zeros(rows, dim);
        let mut b = DVector::zeros(rows);
        let mut at = 0;
        for (ab, bb) in blocks {
            a.rows_mut(at, ab.nrows()).copy_from(ab);
            b.rows_mut(at, ab.nrows()).copy_from(&bb);
            at += ab.nrows();
        }
        (a, b)
    }
}

/// Per-output equality constraints for a model of a given order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    order: usize,
    columns: Vec<LinearConstraints>,
}

impl ConstraintSet {
    /// No constraints on any of `outputs` columns.
    pub fn empty(order: usize, outputs: usize) -> Self {
        Self {
            order,
            columns: vec![LinearConstraints::empty(regressor_len(order)); outputs],
        }
    }

    pub fn from_columns(order: usize, columns: Vec<LinearConstraints>) -> Self {
        Self { order, columns }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn outputs(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &LinearConstraints {
        &self.columns[j]
    }

    pub fn total_rows(&self) -> usize {
        self.columns.iter().map(LinearConstraints::rows).sum()
    }

    /// Largest absolute constraint residual over all columns.
    pub fn max_violation(&self, phi: &ParameterMatrix) -> f64 {
        self.columns
            .iter()
            .enumerate()
            .map(|(j, c)| c.max_violation(&phi.column(j)))
            .fold(0.0, f64::max)
    }

    /// Project every column of `phi` onto its constraint set.
    pub fn project(&self, phi: &ParameterMatrix) -> ParameterMatrix {
        let mut coeffs = phi.coeffs().clone();
        for (j, c) in self.columns.iter().enumerate() {
            let x = c.project(&phi.column(j));
            coeffs.set_column(j, &x);
        }
        ParameterMatrix::new(phi.order(), coeffs).expect("projection keeps the shape")
    }
}

/// Assemble and reduce the three constraint families for order `order`.
pub fn build_constraints(order: usize) -> Result<ConstraintSet> {
    if order == 0 {
        return Err(Error::Config("harmonic order must be at least 1".into()));
    }
    let families = ConstraintFamilies::new(order);
    let columns = Output::ALL
        .iter()
        .map(|&o| {
            let (a, b) = families.stacked_for(o);
            LinearConstraints::reduced(&a, &b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstraintSet { order, columns })
}
