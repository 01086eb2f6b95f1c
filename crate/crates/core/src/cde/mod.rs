//! Controlled difference equations
//!
//! ```text
//! x_{k+1} = x_k + sum_mu f_mu(x_k) (w^mu_{k+1} - w^mu_k)
//! ```
//!
//! driven by a series `w` in `R^d`, together with the vector-field data the
//! estimates need, the remainder arrays and the residual-network embedding.

mod activation;
mod embed;
mod fields;
mod remainder;

pub use activation::Activation;
pub use embed::{embed_resnet, project, resnet_forward, tanh_matvec, EmbeddedResNet, Embedding, Sigma};
pub use fields::{
    ActivationField, ActivationLayer, ConstantField, FnField, LinearField, ScaledField, SecondOrderFields,
};
pub use remainder::{remainders, RemainderView, SolutionBundle};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Norm, TimeSeries};

/// Which estimate family applies: Young for `1 <= p < 2`, rough for `2 <= p < 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Young,
    Rough,
}

impl Regime {
    pub fn for_p(p: f64) -> Result<Self> {
        if (1.0..2.0).contains(&p) {
            Ok(Regime::Young)
        } else if (2.0..3.0).contains(&p) {
            Ok(Regime::Rough)
        } else {
            Err(Error::WrongRegime { p, regime: "[1, 3)" })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSource {
    Analytic,
    /// Sampled on a grid: a lower estimate of the true supremum.
    Estimated,
}

/// `sup[k]` bounds `max_mu sup_x ||D^k f_mu(x)||` for `k = 0..=3`, operator
/// norms taken with respect to the chosen vector norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub sup: [f64; 4],
    pub source: BoundSource,
}

impl DerivativeBounds {
    pub fn analytic(sup: [f64; 4]) -> Self {
        Self { sup, source: BoundSource::Analytic }
    }

    /// `max_{k=1..n} sup[k]`: derivatives only, order zero excluded.
    pub fn cnb(&self, n: usize) -> f64 {
        self.sup[1..=n.min(3)].iter().copied().fold(0.0, f64::max)
    }

    /// `max_{k=0..n} sup[k]`: the sup of the fields themselves included.
    pub fn with_values(&self, n: usize) -> f64 {
        self.sup[..=n.min(3)].iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { sup: self.sup.map(|s| s * factor.abs()), source: self.source }
    }
}

/// `d` vector fields `f_mu: R^m -> R^m`.
///
/// Implementations must be reentrant. Derivatives default to finite
/// differences of [`eval`](Self::eval).
pub trait VectorField: Send + Sync {
    fn state_dim(&self) -> usize;

    fn num_fields(&self) -> usize;

    fn eval(&self, mu: usize, x: &[f64], out: &mut [f64]);

    /// `Df_mu(x)` row-major: `out[i * m + j] = d f^i / d x^j`.
    fn jacobian(&self, mu: usize, x: &[f64], out: &mut [f64]) {
        fd_jacobian(self, mu, x, out);
    }

    /// `D^order f_mu(x)[u, ..., u]` for `order <= 3`.
    fn directional(&self, mu: usize, x: &[f64], u: &[f64], order: usize, out: &mut [f64]) {
        fd_directional(self, mu, x, u, order, out);
    }

    /// Rigorous derivative sups, when known.
    fn derivative_bounds(&self, _norm: Norm) -> Option<DerivativeBounds> {
        None
    }
}

pub(crate) fn fd_jacobian<F: VectorField + ?Sized>(f: &F, mu: usize, x: &[f64], out: &mut [f64]) {
    let m = f.state_dim();
    let mut probe = x.to_vec();
    let (mut plus, mut minus) = (vec![0.0; m], vec![0.0; m]);
    for j in 0..m {
        let h = 1e-6 * (1.0 + x[j].abs());
        probe[j] = x[j] + h;
        f.eval(mu, &probe, &mut plus);
        probe[j] = x[j] - h;
        f.eval(mu, &probe, &mut minus);
        probe[j] = x[j];
        for i in 0..m {
            out[i * m + j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
}

pub(crate) fn fd_directional<F: VectorField + ?Sized>(
    f: &F,
    mu: usize,
    x: &[f64],
    u: &[f64],
    order: usize,
    out: &mut [f64],
) {
    let m = f.state_dim();
    if order == 0 {
        f.eval(mu, x, out);
        return;
    }
    if order == 1 {
        let mut jac = vec![0.0; m * m];
        f.jacobian(mu, x, &mut jac);
        for i in 0..m {
            out[i] = (0..m).map(|j| jac[i * m + j] * u[j]).sum();
        }
        return;
    }
    let along = |t: f64| {
        let probe: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + t * b).collect();
        let mut v = vec![0.0; m];
        f.eval(mu, &probe, &mut v);
        v
    };
    match order {
        2 => {
            let h = 1e-4;
            let (p, c, n) = (along(h), along(0.0), along(-h));
            for i in 0..m {
                out[i] = (p[i] - 2.0 * c[i] + n[i]) / (h * h);
            }
        }
        3 => {
            let h = 1e-3;
            let (p2, p1, n1, n2) = (along(2.0 * h), along(h), along(-h), along(-2.0 * h));
            for i in 0..m {
                out[i] = (p2[i] - 2.0 * p1[i] + 2.0 * n1[i] - n2[i]) / (2.0 * h * h * h);
            }
        }
        _ => panic!("directional derivative of order {order} not available"),
    }
}

/// Runs the difference equation from `xi`. Replaying the loop reproduces the
/// result bit for bit.
pub fn solve<F: VectorField + ?Sized>(field: &F, w: &TimeSeries, xi: &[f64]) -> Result<TimeSeries> {
    let (m, d) = (field.state_dim(), field.num_fields());
    if w.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: w.dim() });
    }
    if xi.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: xi.len() });
    }
    let n = w.horizon();
    let mut data = Vec::with_capacity((n + 1) * m);
    data.extend_from_slice(xi);
    let mut value = vec![0.0; m];
    for k in 0..n {
        let (cur, next) = (w.point(k), w.point(k + 1));
        let mut state = data[k * m..(k + 1) * m].to_vec();
        for mu in 0..d {
            let dw = next[mu] - cur[mu];
            if dw == 0.0 {
                continue;
            }
            field.eval(mu, &data[k * m..(k + 1) * m], &mut value);
            for (s, v) in state.iter_mut().zip(&value) {
                *s += v * dw;
            }
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow { step: k + 1 });
        }
        data.extend_from_slice(&state);
    }
    TimeSeries::from_flat(m, data)
}

/// Axis-aligned box `[lo, hi]^m` sampled with `resolution` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBox {
    pub lo: f64,
    pub hi: f64,
    pub resolution: usize,
}

const MAX_PROBES: usize = 4_000_000;

fn probe_directions(m: usize, norm: Norm) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        dirs.push(e);
    }
    for i in 0..m {
        for j in i + 1..m {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                e[j] = sign;
                dirs.push(e);
            }
        }
    }
    if m > 2 {
        dirs.push(vec![1.0; m]);
    }
    for d in &mut dirs {
        let s = norm.of(d);
        d.iter_mut().for_each(|v| *v /= s);
    }
    dirs
}

/// Grid estimates of `max_mu sup ||D^k f_mu||` for `k = 0..=n`.
///
/// Directional derivatives `D^k f(x)[u, ..., u]` are sampled over grid points
/// and a fixed set of unit directions, so every entry is a lower estimate.
pub fn estimate_derivative_sups<F: VectorField + ?Sized>(
    field: &F,
    n: usize,
    probe: ProbeBox,
    norm: Norm,
) -> Result<Vec<f64>> {
    if n > 3 {
        return Err(Error::Unsupported(format!("derivative order {n} > 3")));
    }
    if !(probe.lo <= probe.hi) || probe.resolution < 1 {
        return Err(Error::InvalidParameter("probe box needs lo <= hi and resolution >= 1".into()));
    }
    let m = field.state_dim();
    let total = (probe.resolution as u128).pow(m as u32);
    if total > MAX_PROBES as u128 {
        return Err(Error::InvalidParameter(format!("{total} probe points exceed the limit {MAX_PROBES}")));
    }
    let dirs = probe_directions(m, norm);
    let res = probe.resolution;
    let coord = |i: usize| {
        if res == 1 {
            0.5 * (probe.lo + probe.hi)
        } else {
            probe.lo + (probe.hi - probe.lo) * i as f64 / (res - 1) as f64
        }
    };
    let sups = (0..total as usize)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; m];
            for xi in x.iter_mut() {
                *xi = coord(idx % res);
                idx /= res;
            }
            let mut out = vec![0.0; m];
            let mut local = vec![0.0f64; n + 1];
            for mu in 0..field.num_fields() {
                field.eval(mu, &x, &mut out);
                local[0] = local[0].max(norm.of(&out));
                for (k, slot) in local.iter_mut().enumerate().skip(1) {
                    for u in &dirs {
                        field.directional(mu, &x, u, k, &mut out);
                        *slot = slot.max(norm.of(&out));
                    }
                }
            }
            local
        })
        .reduce(|| vec![0.0; n + 1], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    Ok(sups)
}

/// `max_{k=1..n} sup ||D^k f||` estimated on a grid; a lower estimate of the
/// true value. Orders outside `1..=3` are unsupported.
pub fn estimate_cnb_norm<F: VectorField + ?Sized>(field: &F, n: usize, probe: ProbeBox, norm: Norm) -> Result<f64> {
    if n == 0 {
        return Err(Error::Unsupported("the C^n_b norm needs n >= 1".into()));
    }
    let sups = estimate_derivative_sups(field, n, probe, norm)?;
    Ok(sups[1..].iter().copied().fold(0.0, f64::max))
}

/// Grid estimates packaged as [`DerivativeBounds`]; orders above `n` are infinite.
pub fn estimated_bounds<F: VectorField + ?Sized>(
    field: &F,
    n: usize,
    probe: ProbeBox,
    norm: Norm,
) -> Result<DerivativeBounds> {
    let sups = estimate_derivative_sups(field, n, probe, norm)?;
    let mut sup = [f64::INFINITY; 4];
    sup[..sups.len()].copy_from_slice(&sups);
    Ok(DerivativeBounds { sup, source: BoundSource::Estimated })
}
