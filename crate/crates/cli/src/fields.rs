use std::path::Path;

use nalgebra::{DMatrix, DVector};
use roughnet::cde::{Activation, ActivationField, ActivationLayer, LinearField, VectorField};

use crate::error::{CliError, CliResult};
use crate::weights::WeightFile;

/// Builds the fields named on the command line for a weight file.
///
/// With `m` declared the channels are flattened `m x m` matrices plus a time
/// ramp, and field `mu = i m + j` is `sigma(x_j) e_i`: each layer is
/// `x + theta sigma(x)` with `theta` the increment of the series. Without `m`
/// the state lives in `R^d` and channel `mu` drives coordinate `mu` alone.
/// `linear` uses the identity in place of `sigma`, or explicit matrices.
pub fn build_field(name: &str, file: &WeightFile, matrices: Option<&Path>) -> CliResult<Box<dyn VectorField>> {
    if name.eq_ignore_ascii_case("linear") {
        let mats = match matrices {
            Some(path) => load_matrices(path)?,
            None => linear_layout(file),
        };
        if mats.len() != file.d {
            return Err(CliError::input(format!("{} matrices given for d = {} channels", mats.len(), file.d)));
        }
        return Ok(Box::new(LinearField::new(mats)?));
    }
    if matrices.is_some() {
        return Err(CliError::input("--matrices only applies to --field linear"));
    }
    let act: Activation = name.parse()?;
    Ok(match file.m {
        Some(m) => Box::new(ActivationField::matvec(act, m, true)),
        None => {
            let d = file.d;
            let layers = (0..d)
                .map(|mu| {
                    let mut inner = DMatrix::zeros(1, d);
                    inner[(0, mu)] = 1.0;
                    let mut outer = DMatrix::zeros(d, 1);
                    outer[(mu, 0)] = 1.0;
                    ActivationLayer::new(inner, DVector::zeros(1), outer)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Box::new(ActivationField::new(act, layers)?)
        }
    })
}

fn linear_layout(file: &WeightFile) -> Vec<DMatrix<f64>> {
    match file.m {
        Some(m) => {
            let mut mats: Vec<DMatrix<f64>> = (0..m * m)
                .map(|mu| {
                    let mut a = DMatrix::zeros(m, m);
                    a[(mu / m, mu % m)] = 1.0;
                    a
                })
                .collect();
            mats.push(DMatrix::zeros(m, m));
            mats
        }
        None => (0..file.d)
            .map(|mu| {
                let mut a = DMatrix::zeros(file.d, file.d);
                a[(mu, mu)] = 1.0;
                a
            })
            .collect(),
    }
}

/// A JSON array of square matrices, each an array of rows.
pub fn load_matrices(path: &Path) -> CliResult<Vec<DMatrix<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let raw: Vec<Vec<Vec<f64>>> = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{} is not a JSON array of matrices: {e}", path.display())))?;
    raw.iter().enumerate().map(|(i, rows)| square_matrix(rows, i)).collect()
}

fn square_matrix(rows: &[Vec<f64>], index: usize) -> CliResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::input(format!("matrix {index} is not square and non-empty")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::input(format!("matrix {index} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
