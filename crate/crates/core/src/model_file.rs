//! Versioned JSON container for fitted models.
//!
//! A kinematic model file holds the harmonic order, the regressor length,
//! the stride normalization flag, the coefficients in row-major order and
//! the 150 residual covariance matrices. A torque model file holds a single
//! output column and the torque scale instead of the covariance table.

use std::path::Path;

use nalgebra::{DMatrix, Matrix6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_model::{CovarianceTable, Output, ParameterMatrix, KNOTS};
use crate::torque_model::TorqueSurface;

pub const FORMAT: &str = "gait-ekf-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Kinematics,
    Torque,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    kind: ModelKind,
    order: usize,
    dim: usize,
    outputs: Vec<String>,
    stride_normalized_by_leg_length: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    torque_scale: Option<f64>,
    coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    covariance: Option<Vec<Vec<f64>>>,
}

/// A kinematic model together with its residual covariance table.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitModel {
    pub phi: ParameterMatrix,
    pub table: CovarianceTable,
}

fn row_major(phi: &ParameterMatrix) -> Vec<f64> {
    let c = phi.coeffs();
    (0..c.nrows())
        .flat_map(|i| (0..c.ncols()).map(move |j| c[(i, j)]))
        .collect()
}

fn bad(path: &Path, message: impl Into<String>) -> Error {
    Error::ModelFile {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn write(path: &Path, c: &Container) -> Result<()> {
    let text = serde_json::to_string_pretty(c)?;
    std::fs::write(path, text)?;
    Ok(())
}

fn read(path: &Path, kind: ModelKind) -> Result<(Container, ParameterMatrix)> {
    let text = std::fs::read_to_string(path)?;
    let c: Container = serde_json::from_str(&text).map_err(|e| bad(path, e.to_string()))?;
    if c.format != FORMAT {
        return Err(bad(path, format!("unknown format {:?}", c.format)));
    }
    if c.version != VERSION {
        return Err(bad(path, format!("unsupported version {}", c.version)));
    }
    if c.kind != kind {
        return Err(bad(path, format!("expected a {kind:?} model, found {:?}", c.kind)));
    }
    let ncol = c.outputs.len();
    if ncol == 0 || c.coefficients.len() != c.dim * ncol {
        return Err(bad(
            path,
            format!("{} coefficients for {} x {ncol}", c.coefficients.len(), c.dim),
        ));
    }
    let coeffs = DMatrix::from_row_slice(c.dim, ncol, &c.coefficients);
    let phi = ParameterMatrix::new(c.order, coeffs).map_err(|e| bad(path, e.to_string()))?;
    Ok((c, phi))
}

pub fn save_gait_model(path: &Path, model: &GaitModel) -> Result<()> {
    let phi = &model.phi;
    let c = Container {
        format: FORMAT.into(),
        version: VERSION,
        kind: ModelKind::Kinematics,
        order: phi.order(),
        dim: phi.dim(),
        outputs: Output::ALL.iter().take(phi.outputs()).map(|o| o.name().to_string()).collect(),
        stride_normalized_by_leg_length: true,
        torque_scale: None,
        coefficients: row_major(phi),
        covariance: Some(
            model
                .table
                .knots()
                .iter()
                .map(|m| m.transpose().as_slice().to_vec())
                .collect(),
        ),
    };
    write(path, &c)
}

pub fn load_gait_model(path: &Path) -> Result<GaitModel> {
    let (c, phi) = read(path, ModelKind::Kinematics)?;
    if phi.outputs() != 4 {
        return Err(bad(path, "kinematic model needs four outputs"));
    }
    let cov = c.covariance.ok_or_else(|| bad(path, "missing covariance table"))?;
    if cov.len() != KNOTS {
        return Err(bad(path, format!("{} covariance knots, expected {KNOTS}", cov.len())));
    }
    let knots = cov
        .iter()
        .map(|m| {
            if m.len() != 36 {
                return Err(bad(path, "covariance knot needs 36 entries"));
            }
            Ok(Matrix6::from_row_slice(m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaitModel {
        phi,
        table: CovarianceTable::new(knots)?,
    })
}

pub fn save_torque_model(path: &Path, surface: &TorqueSurface) -> Result<()> {
    let phi = surface.parameters();
    let c = Container {
        format: FORMAT.into(),
        version: VERSION,
        kind: ModelKind::Torque,
        order: phi.order(),
        dim: phi.dim(),
        outputs: vec!["torque".into()],
        stride_normalized_by_leg_length: true,
        torque_scale: Some(surface.scale()),
        coefficients: row_major(phi),
        covariance: None,
    };
    write(path, &c)
}

pub fn load_torque_model(path: &Path) -> Result<TorqueSurface> {
    let (c, phi) = read(path, ModelKind::Torque)?;
    let scale = c.torque_scale.ok_or_else(|| bad(path, "missing torque scale"))?;
    TorqueSurface::new(phi, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gait_model_round_trips_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let order = 3;
        let d = crate::gait_model::regressor_len(order);
        let phi = ParameterMatrix::new(order, DMatrix::from_fn(d, 4, |_, _| rng.random::<f64>() - 0.5)).unwrap();
        let knots = (0..KNOTS)
            .map(|_| {
                let a = Matrix6::from_fn(|_, _| rng.random::<f64>());
                a * a.transpose()
            })
            .collect();
        let model = GaitModel {
            phi,
            table: CovarianceTable::new(knots).unwrap(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_gait_model(&path, &model).unwrap();
        assert_eq!(load_gait_model(&path).unwrap(), model);
        assert!(load_torque_model(&path).is_err());
    }

    #[test]
    fn rejects_wrong_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let surface = TorqueSurface::new(ParameterMatrix::zeros(2, 1), 5.0).unwrap();
        save_torque_model(&path, &surface).unwrap();
        assert_eq!(load_torque_model(&path).unwrap(), surface);
        let text = std::fs::read_to_string(&path).unwrap().replace("\"version\": 1", "\"version\": 9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_torque_model(&path), Err(Error::ModelFile { .. })));
    }
}
