//! Equality-constrained least squares through KKT-augmented normal equations.
//!
//! Each output column is solved independently:
//!
//! ```text
//! [ XᵀX/n  Aᵀ ] [ φ ]   [ Xᵀy/n ]
//! [ A      0  ] [ λ ] = [ b     ]
//! ```
//!
//! The system is symmetric indefinite. It is checked for rank with an SVD,
//! solved by LU with partial pivoting, and polished with iterative
//! refinement so the constraint residual sits near round-off.

use nalgebra::{DMatrix, DVector, RowDVector};

use super::basis::{regressor_len, regressor_normalized, term_name};
use super::{ConstraintSet, Output, ParameterMatrix};
use crate::error::{Error, Result};
use crate::simdata::StrideDataset;

const CHUNK_ROWS: usize = 2048;

/// Accumulated `XᵀX`, `XᵀY` and `YᵀY` for a multi-output regression.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    order: usize,
    gram: DMatrix<f64>,
    xty: DMatrix<f64>,
    yty: DVector<f64>,
    samples: usize,
    chunk_x: DMatrix<f64>,
    chunk_y: DMatrix<f64>,
    pending: usize,
}

impl NormalEquations {
    pub fn new(order: usize, outputs: usize) -> Self {
        let d = regressor_len(order);
        Self {
            order,
            gram: DMatrix::zeros(d, d),
            xty: DMatrix::zeros(d, outputs),
            yty: DVector::zeros(outputs),
            samples: 0,
            chunk_x: DMatrix::zeros(CHUNK_ROWS, d),
            chunk_y: DMatrix::zeros(CHUNK_ROWS, outputs),
            pending: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn outputs(&self) -> usize {
        self.xty.ncols()
    }

    pub fn samples(&self) -> usize {
        self.samples + self.pending
    }

    /// Add one observation at normalized coordinates.
    pub fn add_sample(&mut self, p: f64, l_norm: f64, r: f64, y: &[f64]) {
        let row = regressor_normalized(p, l_norm, r, self.order);
        self.add_row(&row, y);
    }

    pub fn add_row(&mut self, row: &RowDVector<f64>, y: &[f64]) {
        assert_eq!(y.len(), self.outputs(), "target width");
        self.chunk_x.row_mut(self.pending).copy_from(row);
        for (j, v) in y.iter().enumerate() {
            self.chunk_y[(self.pending, j)] = *v;
        }
        self.pending += 1;
        if self.pending == CHUNK_ROWS {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.pending == 0 {
            return;
        }
        let x = self.chunk_x.rows(0, self.pending);
        let y = self.chunk_y.rows(0, self.pending);
        self.gram.gemm_tr(1.0, &x, &x, 1.0);
        self.xty.gemm_tr(1.0, &x, &y, 1.0);
        for j in 0..y.ncols() {
            self.yty[j] += y.column(j).norm_squared();
        }
        self.samples += self.pending;
        self.pending = 0;
    }

    /// Flushed normal equations, ready to solve.
    pub fn finish(mut self) -> Self {
        self.flush();
        self
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Sum of squared residuals per output column for coefficients `phi`.
    pub fn sse(&self, phi: &ParameterMatrix) -> Vec<f64> {
        (0..self.outputs())
            .map(|j| {
                let x = phi.column(j);
                let g = &self.gram * &x;
                self.yty[j] - 2.0 * self.xty.column(j).dot(&x) + x.dot(&g)
            })
            .collect()
    }
}

/// Fit the kinematic model to a stride dataset under `constraints`.
///
/// Stride lengths are normalized by each subject's leg length; angles stay
/// in degrees and heel positions in meters.
pub fn fit_gait_model(
    data: &StrideDataset,
    constraints: &ConstraintSet,
    order: usize,
) -> Result<ParameterMatrix> {
    let ne = gait_normal_equations(data, order)?;
    solve_constrained_lsq(&ne, constraints)
}

/// Accumulate the normal equations of the kinematic regression.
pub fn gait_normal_equations(data: &StrideDataset, order: usize) -> Result<NormalEquations> {
    let total = data.sample_count();
    if total == 0 {
        return Err(Error::InsufficientData("dataset has no samples".into()));
    }
    if total < regressor_len(order) {
        return Err(Error::InsufficientData(format!(
            "{total} samples for {} coefficients",
            regressor_len(order)
        )));
    }
    let mut ne = NormalEquations::new(order, 4);
    for subject in data.subjects() {
        for stride in &subject.strides {
            for s in &stride.samples {
                ne.add_sample(
                    s.phase,
                    s.stride_length / subject.leg_length,
                    s.incline,
                    &s.outputs(),
                );
            }
        }
    }
    Ok(ne.finish())
}

/// Solve every output column of the regression under its constraints.
pub fn solve_constrained_lsq(
    ne: &NormalEquations,
    constraints: &ConstraintSet,
) -> Result<ParameterMatrix> {
    if constraints.outputs() != ne.outputs() {
        return Err(Error::LengthMismatch {
            what: "constraint columns vs regression outputs",
            left: constraints.outputs(),
            right: ne.outputs(),
        });
    }
    if constraints.order() != ne.order() {
        return Err(Error::Config(format!(
            "constraints built for order {} but regression has order {}",
            constraints.order(),
            ne.order()
        )));
    }
    if ne.samples() == 0 {
        return Err(Error::InsufficientData("no samples accumulated".into()));
    }
    let d = regressor_len(ne.order);
    let scale = 1.0 / ne.samples() as f64;
    let mut coeffs = DMatrix::zeros(d, ne.outputs());
    for j in 0..ne.outputs() {
        let c = constraints.column(j);
        let m = c.rows();
        let mut kkt = DMatrix::zeros(d + m, d + m);
        kkt.view_mut((0, 0), (d, d)).copy_from(&(&ne.gram * scale));
        let mut rhs = DVector::zeros(d + m);
        rhs.rows_mut(0, d).copy_from(&(ne.xty.column(j) * scale));
        for i in 0..m {
            // unit-norm constraint rows keep the two blocks on a similar scale
            let norm = c.a.row(i).norm();
            for k in 0..d {
                let v = c.a[(i, k)] / norm;
                kkt[(d + i, k)] = v;
                kkt[(k, d + i)] = v;
            }
            rhs[d + i] = c.b[i] / norm;
        }
        let context = if ne.outputs() == 4 {
            format!("output {}", Output::ALL[j].name())
        } else {
            format!("output column {j}")
        };
        check_rank(&kkt, d, ne.order, &context)?;
        let sol = solve_refined(&kkt, &rhs, &context)?;
        coeffs.set_column(j, &sol.rows(0, d));
    }
    ParameterMatrix::new(ne.order, coeffs)
}

fn check_rank(kkt: &DMatrix<f64>, d: usize, order: usize, context: &str) -> Result<()> {
    let svd = kkt.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let tol = smax * kkt.nrows() as f64 * f64::EPSILON * 4.0;
    let deficient: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol)
        .map(|(i, _)| i)
        .collect();
    if deficient.is_empty() {
        return Ok(());
    }
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut directions = Vec::new();
    for i in deficient {
        let v = v_t.row(i);
        let (k, _) = v
            .iter()
            .take(d)
            .enumerate()
            .fold((0, 0.0), |acc, (k, x)| if x.abs() > acc.1 { (k, x.abs()) } else { acc });
        let name = term_name(k, order);
        if !directions.contains(&name) {
            directions.push(name);
        }
    }
    Err(Error::RankDeficient {
        context: context.to_string(),
        directions,
    })
}

fn solve_refined(kkt: &DMatrix<f64>, rhs: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let lu = kkt.clone().lu();
    let mut x = lu.solve(rhs).ok_or_else(|| Error::RankDeficient {
        context: context.to_string(),
        directions: vec!["LU factorization failed".into()],
    })?;
    for _ in 0..3 {
        let r = rhs - kkt * &x;
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait_model::build_constraints;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_equations(order: usize, phi: &ParameterMatrix) -> NormalEquations {
        let mut ne = NormalEquations::new(order, phi.outputs());
        for &r in &[-10.0, -2.5, 0.0, 5.0, 10.0] {
            for &l in &[0.9, 1.2, 1.5] {
                for k in 0..60 {
                    let p = k as f64 / 60.0;
                    let y = phi.evaluate_with_regressor(p, l, r);
                    ne.add_sample(p, l, r, y.as_slice());
                }
            }
        }
        ne.finish()
    }

    #[test]
    fn recovers_constraint_satisfying_truth() {
        let order = 4;
        let set = build_constraints(order).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = regressor_len(order);
        let raw = ParameterMatrix::new(order, DMatrix::from_fn(d, 4, |_, _| rng.random_range(-2.0..2.0))).unwrap();
        let truth = set.project(&raw);
        let ne = grid_equations(order, &truth);
        let fit = solve_constrained_lsq(&ne, &set).unwrap();
        let err = (fit.coeffs() - truth.coeffs()).amax() / truth.coeffs().amax();
        assert!(err < 1e-6, "relative error {err}");
        assert!(set.max_violation(&fit) < 1e-8);
    }

    #[test]
    fn constrained_sse_is_not_below_unconstrained() {
        let order = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = regressor_len(order);
        let raw = ParameterMatrix::new(order, DMatrix::from_fn(d, 4, |_, _| rng.random_range(-2.0..2.0))).unwrap();
        let ne = grid_equations(order, &raw);
        let free = solve_constrained_lsq(&ne, &ConstraintSet::empty(order, 4)).unwrap();
        let set = build_constraints(order).unwrap();
        let tied = solve_constrained_lsq(&ne, &set).unwrap();
        let a: f64 = ne.sse(&free).iter().sum();
        let b: f64 = ne.sse(&tied).iter().sum();
        assert!(a <= b + 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        assert!(a < 1e-8);
    }

    #[test]
    fn single_incline_is_rank_deficient() {
        let order = 2;
        let mut ne = NormalEquations::new(order, 1);
        for &l in &[0.9, 1.4] {
            for k in 0..40 {
                let p = k as f64 / 40.0;
                ne.add_sample(p, l, 0.0, &[p.sin()]);
            }
        }
        let err = solve_constrained_lsq(&ne.finish(), &ConstraintSet::empty(order, 1)).unwrap_err();
        match err {
            Error::RankDeficient { directions, .. } => assert!(!directions.is_empty()),
            other => panic!("unexpected {other:?}"),
        }
    }
}
