use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{fd_directional, Activation, DerivativeBounds, VectorField};
use crate::error::{Error, Result};
use crate::series::Norm;

/// One field `f(x) = outer * sigma(inner * x + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationLayer {
    /// `h x m`
    pub inner: DMatrix<f64>,
    /// length `h`
    pub bias: DVector<f64>,
    /// `m x h`
    pub outer: DMatrix<f64>,
}

impl ActivationLayer {
    pub fn new(inner: DMatrix<f64>, bias: DVector<f64>, outer: DMatrix<f64>) -> Result<Self> {
        let (h, m) = inner.shape();
        if bias.len() != h {
            return Err(Error::DimensionMismatch { expected: h, found: bias.len() });
        }
        if outer.shape() != (m, h) {
            return Err(Error::DimensionMismatch { expected: m * h, found: outer.len() });
        }
        Ok(Self { inner, bias, outer })
    }

    fn hidden(&self) -> usize {
        self.inner.nrows()
    }

    fn pre_activation(&self, x: &[f64]) -> DVector<f64> {
        &self.inner * DVector::from_column_slice(x) + &self.bias
    }
}

/// Fields `f_mu(x) = B_mu sigma(A_mu x + b_mu)` with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationField {
    activation: Activation,
    m: usize,
    layers: Vec<ActivationLayer>,
}

impl ActivationField {
    pub fn new(activation: Activation, layers: Vec<ActivationLayer>) -> Result<Self> {
        let m = layers
            .first()
            .ok_or_else(|| Error::InvalidParameter("at least one field is required".into()))?
            .inner
            .ncols();
        for layer in &layers {
            if layer.inner.ncols() != m {
                return Err(Error::DimensionMismatch { expected: m, found: layer.inner.ncols() });
            }
        }
        Ok(Self { activation, m, layers })
    }

    /// A single field applying `sigma` to each coordinate.
    pub fn componentwise(activation: Activation, m: usize) -> Self {
        let layer = ActivationLayer {
            inner: DMatrix::identity(m, m),
            bias: DVector::zeros(m),
            outer: DMatrix::identity(m, m),
        };
        Self { activation, m, layers: vec![layer] }
    }

    /// The residual layer `x -> x + theta sigma(x)` written as a control system:
    /// field `mu = i * m + j` is `sigma(x_j) e_i`, so that
    /// `sum_mu f_mu(x) w^mu_{k,k+1} = (w_{k+1} - w_k) sigma(x)` with the increment
    /// read as an `m x m` matrix. With `time_channel` an extra zero field
    /// absorbs a trailing time coordinate.
    pub fn matvec(activation: Activation, m: usize, time_channel: bool) -> Self {
        let mut layers = Vec::with_capacity(m * m + 1);
        for i in 0..m {
            for j in 0..m {
                let mut inner = DMatrix::zeros(1, m);
                inner[(0, j)] = 1.0;
                let mut outer = DMatrix::zeros(m, 1);
                outer[(i, 0)] = 1.0;
                layers.push(ActivationLayer { inner, bias: DVector::zeros(1), outer });
            }
        }
        if time_channel {
            layers.push(ActivationLayer { inner: DMatrix::zeros(1, m), bias: DVector::zeros(1), outer: DMatrix::zeros(m, 1) });
        }
        Self { activation, m, layers }
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[ActivationLayer] {
        &self.layers
    }
}

impl VectorField for ActivationField {
    fn state_dim(&self) -> usize {
        self.m
    }

    fn num_fields(&self) -> usize {
        self.layers.len()
    }

    fn eval(&self, mu: usize, x: &[f64], out: &mut [f64]) {
        let layer = &self.layers[mu];
        let z = layer.pre_activation(x).map(|t| self.activation.derivative(0, t));
        out.copy_from_slice((&layer.outer * z).as_slice());
    }

    fn jacobian(&self, mu: usize, x: &[f64], out: &mut [f64]) {
        let layer = &self.layers[mu];
        let slope = layer.pre_activation(x).map(|t| self.activation.derivative(1, t));
        let scaled_inner = DMatrix::from_fn(layer.hidden(), self.m, |r, c| slope[r] * layer.inner[(r, c)]);
        let jac = &layer.outer * scaled_inner;
        for i in 0..self.m {
            for j in 0..self.m {
                out[i * self.m + j] = jac[(i, j)];
            }
        }
    }

    fn directional(&self, mu: usize, x: &[f64], u: &[f64], order: usize, out: &mut [f64]) {
        let layer = &self.layers[mu];
        let z = layer.pre_activation(x);
        let au = &layer.inner * DVector::from_column_slice(u);
        let inner = DVector::from_fn(layer.hidden(), |r, _| {
            self.activation.derivative(order, z[r]) * au[r].powi(order as i32)
        });
        out.copy_from_slice((&layer.outer * inner).as_slice());
    }

    /// `||D^k f_mu|| <= ||B_mu|| S_k ||A_mu||^k` with `S_k = sup |sigma^{(k)}|`;
    /// for `k = 0` the entries of `sigma(.)` are bounded by `S_0`.
    fn derivative_bounds(&self, norm: Norm) -> Option<DerivativeBounds> {
        let table = self.activation.sup_table()?;
        let mut sup = [0.0f64; 4];
        for layer in &self.layers {
            let (b, a) = (norm.op_norm(&layer.outer), norm.op_norm(&layer.inner));
            if b == 0.0 {
                continue;
            }
            sup[0] = sup[0].max(b * table[0] * norm.entry_factor(layer.hidden()));
            for k in 1..4 {
                sup[k] = sup[k].max(b * table[k] * a.powi(k as i32));
            }
        }
        Some(DerivativeBounds::analytic(sup))
    }
}

/// `f_mu(x) = A_mu x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    mats: Vec<DMatrix<f64>>,
}

impl LinearField {
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = mats.first().ok_or_else(|| Error::InvalidParameter("at least one field is required".into()))?.nrows();
        for a in &mats {
            if a.shape() != (m, m) {
                return Err(Error::DimensionMismatch { expected: m * m, found: a.len() });
            }
        }
        Ok(Self { mats })
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.mats
    }
}

impl VectorField for LinearField {
    fn state_dim(&self) -> usize {
        self.mats[0].nrows()
    }

    fn num_fields(&self) -> usize {
        self.mats.len()
    }

    fn eval(&self, mu: usize, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice((&self.mats[mu] * DVector::from_column_slice(x)).as_slice());
    }

    fn jacobian(&self, mu: usize, _x: &[f64], out: &mut [f64]) {
        let a = &self.mats[mu];
        let m = a.nrows();
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = a[(i, j)];
            }
        }
    }

    fn directional(&self, mu: usize, x: &[f64], u: &[f64], order: usize, out: &mut [f64]) {
        match order {
            0 => self.eval(mu, x, out),
            1 => self.eval(mu, u, out),
            _ => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    /// Unbounded unless every matrix vanishes.
    fn derivative_bounds(&self, norm: Norm) -> Option<DerivativeBounds> {
        let lip = self.mats.iter().map(|a| norm.op_norm(a)).fold(0.0, f64::max);
        let sup0 = if lip == 0.0 { 0.0 } else { f64::INFINITY };
        Some(DerivativeBounds::analytic([sup0, lip, 0.0, 0.0]))
    }
}

/// State-independent fields `f_mu(x) = c_mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField {
    values: Vec<Vec<f64>>,
}

impl ConstantField {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let m = values.first().ok_or_else(|| Error::InvalidParameter("at least one field is required".into()))?.len();
        if m == 0 {
            return Err(Error::InvalidParameter("state dimension must be >= 1".into()));
        }
        if let Some(bad) = values.iter().find(|v| v.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: bad.len() });
        }
        Ok(Self { values })
    }
}

impl VectorField for ConstantField {
    fn state_dim(&self) -> usize {
        self.values[0].len()
    }

    fn num_fields(&self) -> usize {
        self.values.len()
    }

    fn eval(&self, mu: usize, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.values[mu]);
    }

    fn jacobian(&self, _mu: usize, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn directional(&self, mu: usize, x: &[f64], _u: &[f64], order: usize, out: &mut [f64]) {
        if order == 0 {
            self.eval(mu, x, out);
        } else {
            out.iter_mut().for_each(|o| *o = 0.0);
        }
    }

    fn derivative_bounds(&self, norm: Norm) -> Option<DerivativeBounds> {
        let sup0 = self.values.iter().map(|v| norm.of(v)).fold(0.0, f64::max);
        Some(DerivativeBounds::analytic([sup0, 0.0, 0.0, 0.0]))
    }
}

type FieldFn = dyn Fn(usize, &[f64], &mut [f64]) + Send + Sync;

/// Black-box fields; derivatives by finite differences. Bounds are absent
/// unless attached with [`with_bounds`](Self::with_bounds).
#[derive(Clone)]
pub struct FnField {
    m: usize,
    d: usize,
    f: Arc<FieldFn>,
    bounds: Option<DerivativeBounds>,
}

impl FnField {
    pub fn new<F>(m: usize, d: usize, f: F) -> Self
    where
        F: Fn(usize, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { m, d, f: Arc::new(f), bounds: None }
    }

    pub fn with_bounds(mut self, bounds: DerivativeBounds) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

impl std::fmt::Debug for FnField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnField").field("m", &self.m).field("d", &self.d).finish_non_exhaustive()
    }
}

impl VectorField for FnField {
    fn state_dim(&self) -> usize {
        self.m
    }

    fn num_fields(&self) -> usize {
        self.d
    }

    fn eval(&self, mu: usize, x: &[f64], out: &mut [f64]) {
        (self.f)(mu, x, out)
    }

    fn derivative_bounds(&self, _norm: Norm) -> Option<DerivativeBounds> {
        self.bounds
    }
}

/// `factor * f`.
#[derive(Clone, Copy)]
pub struct ScaledField<'a> {
    inner: &'a dyn VectorField,
    factor: f64,
}

impl<'a> ScaledField<'a> {
    pub fn new(inner: &'a dyn VectorField, factor: f64) -> Self {
        Self { inner, factor }
    }
}

impl VectorField for ScaledField<'_> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn num_fields(&self) -> usize {
        self.inner.num_fields()
    }

    fn eval(&self, mu: usize, x: &[f64], out: &mut [f64]) {
        self.inner.eval(mu, x, out);
        out.iter_mut().for_each(|o| *o *= self.factor);
    }

    fn jacobian(&self, mu: usize, x: &[f64], out: &mut [f64]) {
        self.inner.jacobian(mu, x, out);
        out.iter_mut().for_each(|o| *o *= self.factor);
    }

    fn directional(&self, mu: usize, x: &[f64], u: &[f64], order: usize, out: &mut [f64]) {
        self.inner.directional(mu, x, u, order, out);
        out.iter_mut().for_each(|o| *o *= self.factor);
    }

    fn derivative_bounds(&self, norm: Norm) -> Option<DerivativeBounds> {
        self.inner.derivative_bounds(norm).map(|b| b.scaled(self.factor))
    }
}

/// The `d^2` fields `F_{mu nu}(x) = Df_nu(x) f_mu(x)`, indexed `mu * d + nu`.
#[derive(Clone, Copy)]
pub struct SecondOrderFields<'a> {
    base: &'a dyn VectorField,
}

impl<'a> SecondOrderFields<'a> {
    pub fn new(base: &'a dyn VectorField) -> Self {
        Self { base }
    }
}

impl VectorField for SecondOrderFields<'_> {
    fn state_dim(&self) -> usize {
        self.base.state_dim()
    }

    fn num_fields(&self) -> usize {
        let d = self.base.num_fields();
        d * d
    }

    fn eval(&self, index: usize, x: &[f64], out: &mut [f64]) {
        let (d, m) = (self.base.num_fields(), self.base.state_dim());
        let (mu, nu) = (index / d, index % d);
        let mut value = vec![0.0; m];
        let mut jac = vec![0.0; m * m];
        self.base.eval(mu, x, &mut value);
        self.base.jacobian(nu, x, &mut jac);
        for i in 0..m {
            out[i] = (0..m).map(|j| jac[i * m + j] * value[j]).sum();
        }
    }

    fn directional(&self, mu: usize, x: &[f64], u: &[f64], order: usize, out: &mut [f64]) {
        fd_directional(self, mu, x, u, order, out);
    }

    /// `||F_{mu nu}||_{C^k} <= (2^{k+1} - 1) ||f||^2_{C^{k+1}}` with order zero
    /// included in the norms on both sides; order three is left unbounded.
    fn derivative_bounds(&self, norm: Norm) -> Option<DerivativeBounds> {
        let base = self.base.derivative_bounds(norm)?;
        let mut sup = [f64::INFINITY; 4];
        for (k, slot) in sup.iter_mut().enumerate().take(3) {
            let full = base.with_values(k + 1);
            *slot = (2f64.powi(k as i32 + 1) - 1.0) * full * full;
        }
        Some(DerivativeBounds { sup, source: base.source })
    }
}
