use std::sync::Arc;

use nalgebra::DMatrix;

use super::VectorField;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// A layer map `sigma(y, theta)`: arguments are `y` in `R^m` and `theta`
/// flattened row-major; the result is written to the output slice.
pub type Sigma = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// `sigma(y, theta) = tanh(theta y)` applied coordinatewise.
pub fn tanh_matvec() -> Sigma {
    Arc::new(|y: &[f64], theta: &[f64], out: &mut [f64]| {
        let m = y.len();
        for i in 0..m {
            out[i] = (0..m).map(|j| theta[i * m + j] * y[j]).sum::<f64>().tanh();
        }
    })
}

/// Fields on `R^n`, `n = m + d`, `d = m^2 + 1`, that turn the non-linear
/// recursion `y_{k+1} = y_k + sigma(y_k, theta_k)` into a system linear in
/// the control. Coordinates are `(y, theta flattened, t)`:
///
/// ```text
/// f_mu(x)    = e_{m+mu}                              mu < d - 1
/// f_{d-1}(x) = e_{m+d-1} + sum_nu sigma_nu(y, theta) e_nu
/// ```
#[derive(Clone)]
pub struct EmbeddedResNet {
    m: usize,
    sigma: Sigma,
}

impl EmbeddedResNet {
    pub fn new(m: usize, sigma: Sigma) -> Self {
        Self { m, sigma }
    }

    pub fn width(&self) -> usize {
        self.m
    }
}

impl std::fmt::Debug for EmbeddedResNet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddedResNet").field("m", &self.m).finish_non_exhaustive()
    }
}

impl VectorField for EmbeddedResNet {
    fn state_dim(&self) -> usize {
        self.m + self.m * self.m + 1
    }

    fn num_fields(&self) -> usize {
        self.m * self.m + 1
    }

    fn eval(&self, mu: usize, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        out.iter_mut().for_each(|o| *o = 0.0);
        out[m + mu] = 1.0;
        if mu == m * m {
            (self.sigma)(&x[..m], &x[m..m + m * m], &mut out[..m]);
        }
    }
}

/// Output of [`embed_resnet`].
#[derive(Debug, Clone)]
pub struct Embedding {
    pub field: EmbeddedResNet,
    /// `N + 1` points: `(theta_k flattened, k)`, the last point repeating `theta_{N-1}`.
    pub w: TimeSeries,
    /// `(y_0, theta_0 flattened, 0)`
    pub x0: Vec<f64>,
}

fn check_layers(theta: &[DMatrix<f64>], m: usize) -> Result<()> {
    if theta.is_empty() {
        return Err(Error::InvalidParameter("at least one layer matrix is required".into()));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("width must be >= 1".into()));
    }
    for t in theta {
        if t.shape() != (m, m) {
            return Err(Error::DimensionMismatch { expected: m * m, found: t.len() });
        }
    }
    Ok(())
}

fn flatten(t: &DMatrix<f64>) -> impl Iterator<Item = f64> + '_ {
    // index mu <-> (mu / m, mu % m)
    (0..t.nrows()).flat_map(move |i| (0..t.ncols()).map(move |j| t[(i, j)]))
}

/// Embeds `y_{k+1} = y_k + sigma(y_k, theta_k)`, `k < N`, as a controlled
/// difference equation whose solution projects onto `y`.
///
/// The control holds the layer matrices themselves (`w^mu_k = theta_k`), so
/// its increments are `theta_{k+1} - theta_k` and the state keeps
/// `theta_k` in its middle block at step `k`.
pub fn embed_resnet(sigma: Sigma, theta: &[DMatrix<f64>], y0: &[f64]) -> Result<Embedding> {
    let m = y0.len();
    check_layers(theta, m)?;
    let n = theta.len();
    let d = m * m + 1;
    let mut data = Vec::with_capacity((n + 1) * d);
    for k in 0..=n {
        data.extend(flatten(&theta[k.min(n - 1)]));
        data.push(k as f64);
    }
    let w = TimeSeries::from_flat(d, data)?;
    let mut x0 = y0.to_vec();
    x0.extend(flatten(&theta[0]));
    x0.push(0.0);
    Ok(Embedding { field: EmbeddedResNet::new(m, sigma), w, x0 })
}

/// The recursion `y_{k+1} = y_k + sigma(y_k, theta_k)` run directly.
pub fn resnet_forward(sigma: &Sigma, theta: &[DMatrix<f64>], y0: &[f64]) -> Result<TimeSeries> {
    let m = y0.len();
    check_layers(theta, m)?;
    let mut data = y0.to_vec();
    let mut step = vec![0.0; m];
    for (k, t) in theta.iter().enumerate() {
        let flat: Vec<f64> = flatten(t).collect();
        let y = data[k * m..(k + 1) * m].to_vec();
        sigma(&y, &flat, &mut step);
        data.extend(y.iter().zip(&step).map(|(a, b)| a + b));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residual recursion left the finite range".into()));
    }
    TimeSeries::from_flat(m, data)
}

/// `pi`: the first `m` coordinates of every point.
pub fn project(x: &TimeSeries, m: usize) -> Result<TimeSeries> {
    if m == 0 || m > x.dim() {
        return Err(Error::DimensionMismatch { expected: m, found: x.dim() });
    }
    TimeSeries::from_flat(m, x.points().flat_map(|p| p[..m].iter().copied()).collect())
}
