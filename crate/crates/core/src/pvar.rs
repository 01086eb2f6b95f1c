//! p-variation of series and triangular arrays, and discrete controls.
//!
//! For a triangular array `Xi` the p-variation on `[k, l]` is
//!
//! ```text
//! ||Xi||_{p;[k,l]} = ( max_{k = s_0 < s_1 < ... < s_{m+1} = l} sum_j |Xi_{s_j, s_{j+1}}|^p )^{1/p}
//! ```
//!
//! The maximum decomposes at the last partition point, so it is computed
//! by the recurrence `V(j) = max_{k <= i < j} V(i) + |Xi_{i,j}|^p`, `V(k) = 0`.
//! The recurrence does not depend on convexity of `t -> t^p`, so quasi-norm
//! exponents `p < 1` are handled by the same code.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{Norm, TimeSeries, TriangularArray, ValueShape};

/// Anything with increments `|Xi_{k,l}|` indexed by pairs in `0..=N`.
pub trait Variation: Sync {
    fn horizon(&self) -> usize;
    fn magnitude(&self, k: usize, l: usize, norm: Norm) -> f64;
}

impl Variation for TimeSeries {
    fn horizon(&self) -> usize {
        TimeSeries::horizon(self)
    }

    fn magnitude(&self, k: usize, l: usize, norm: Norm) -> f64 {
        norm.dist(self.point(l), self.point(k))
    }
}

impl Variation for TriangularArray {
    fn horizon(&self) -> usize {
        TriangularArray::horizon(self)
    }

    fn magnitude(&self, k: usize, l: usize, norm: Norm) -> f64 {
        TriangularArray::magnitude(self, k, l, norm)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p-variation exponent must be > 0, got {p}")))
    }
}

fn check_interval(horizon: usize, k: usize, l: usize) -> Result<()> {
    if k <= l && l <= horizon {
        Ok(())
    } else {
        Err(Error::IndexOrder(format!("interval [{k}, {l}] outside 0..={horizon}")))
    }
}

/// Runs the last-point recurrence from `k` and returns `V(j)` for `j = k..=l`.
fn accumulate<V: Variation + ?Sized>(x: &V, p: f64, k: usize, l: usize, norm: Norm) -> Vec<f64> {
    let mut best = vec![0.0; l - k + 1];
    for j in k + 1..=l {
        let mut v = f64::NEG_INFINITY;
        for i in k..j {
            let cand = best[i - k] + x.magnitude(i, j, norm).powf(p);
            if cand > v {
                v = cand;
            }
        }
        best[j - k] = v;
    }
    best
}

/// `||x||_{p;[k,l]}`; zero when `k == l`.
pub fn pvar<V: Variation + ?Sized>(x: &V, p: f64, k: usize, l: usize, norm: Norm) -> Result<f64> {
    check_exponent(p)?;
    check_interval(x.horizon(), k, l)?;
    if k == l {
        return Ok(0.0);
    }
    let best = accumulate(x, p, k, l, norm);
    Ok(best[l - k].powf(1.0 / p))
}

/// `||x||_{p;[0,N]}`.
pub fn pvar_total<V: Variation + ?Sized>(x: &V, p: f64, norm: Norm) -> Result<f64> {
    pvar(x, p, 0, x.horizon(), norm)
}

/// Evaluates `pvar` at each exponent of a grid. Exponents are independent and
/// evaluated in parallel; output order follows the input.
pub fn pvar_grid<V: Variation + ?Sized>(
    x: &V,
    p_values: &[f64],
    k: usize,
    l: usize,
    norm: Norm,
) -> Result<Vec<(f64, f64)>> {
    p_values.iter().try_for_each(|&p| check_exponent(p))?;
    check_interval(x.horizon(), k, l)?;
    p_values.par_iter().map(|&p| pvar(x, p, k, l, norm).map(|v| (p, v))).collect()
}

/// A discrete control: non-negative, `omega_{k,k} = 0`, and superadditive,
/// `omega_{k,l} + omega_{l,m} <= omega_{k,m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    values: TriangularArray,
}

/// First triple `(k, l, m)` found where superadditivity fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperadditivityViolation {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub excess: f64,
}

impl Control {
    /// Wraps a scalar array without checking superadditivity. Use
    /// [`check`](Self::check) to verify.
    pub fn from_array(values: TriangularArray) -> Result<Self> {
        if values.shape() != ValueShape::Scalar {
            return Err(Error::InvalidParameter("a control must be scalar-valued".into()));
        }
        if let Some(v) = values.as_flat().iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("control values must be >= 0, found {v}")));
        }
        Ok(Self { values })
    }

    pub fn zero(horizon: usize) -> Self {
        Self { values: TriangularArray::zeros(horizon, ValueShape::Scalar) }
    }

    /// Builds a control from `f(k, l)`; superadditivity is not checked.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(horizon: usize, mut f: F) -> Result<Self> {
        Self::from_array(TriangularArray::from_fn(horizon, ValueShape::Scalar, |k, l, out| out[0] = f(k, l)))
    }

    pub fn horizon(&self) -> usize {
        self.values.horizon()
    }

    /// `omega_{k,l}`, with `omega_{k,k} = 0`.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        if k == l {
            0.0
        } else {
            self.values.get(k, l)[0]
        }
    }

    pub fn as_array(&self) -> &TriangularArray {
        &self.values
    }

    /// Exhaustive O(N^3) superadditivity check with relative slack `tol`.
    pub fn check(&self, tol: f64) -> Option<SuperadditivityViolation> {
        let n = self.horizon();
        for k in 0..n {
            for l in k + 1..n {
                let left = self.get(k, l);
                for m in l + 1..=n {
                    let whole = self.get(k, m);
                    let excess = left + self.get(l, m) - whole;
                    if excess > tol * (1.0 + whole.abs()) {
                        return Some(SuperadditivityViolation { k, l, m, excess });
                    }
                }
            }
        }
        None
    }

    pub fn is_superadditive(&self) -> bool {
        self.check(1e-12).is_none()
    }

    /// Multiplies every value by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::InvalidParameter(format!("control scale must be >= 0, got {c}")));
        }
        Ok(Self { values: self.values.scaled(c) })
    }

    /// Pointwise sum of two controls.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.horizon() != other.horizon() {
            return Err(Error::HorizonMismatch { left: self.horizon(), right: other.horizon() });
        }
        Self::from_fn(self.horizon(), |k, l| self.get(k, l) + other.get(k, l))
    }

    pub fn max_value(&self) -> f64 {
        self.values.as_flat().iter().copied().fold(0.0, f64::max)
    }
}

/// `omega_{k,l} = ||x||_{p;[k,l]}^p`, superadditive by construction.
pub fn pvar_control<V: Variation + ?Sized>(x: &V, p: f64, norm: Norm) -> Result<Control> {
    check_exponent(p)?;
    let n = x.horizon();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|k| accumulate(x, p, k, n, norm)).collect();
    let values = TriangularArray::from_fn(n, ValueShape::Scalar, |k, l, out| out[0] = rows[k][l - k]);
    Ok(Control { values })
}

/// `phi(omega_{k,l})` for an increasing convex `phi` with `phi(0) = 0`.
///
/// Convexity is the caller's contract. Debug builds sample 20 chords on
/// `[0, max omega]` and panic if `phi` is visibly not increasing or convex.
pub fn control_convex_map<F: Fn(f64) -> f64>(omega: &Control, phi: F) -> Result<Control> {
    #[cfg(debug_assertions)]
    {
        let top = omega.max_value().max(1.0);
        debug_assert!(phi(0.0).abs() <= 1e-12, "phi(0) must vanish");
        let samples = 20;
        for i in 0..samples {
            let a = top * i as f64 / samples as f64;
            let b = top * (i + 1) as f64 / samples as f64;
            let mid = 0.5 * (a + b);
            let (fa, fb, fm) = (phi(a), phi(b), phi(mid));
            let slack = 1e-9 * (1.0 + fa.abs().max(fb.abs()));
            debug_assert!(fb + slack >= fa, "phi must be non-decreasing on [{a}, {b}]");
            debug_assert!(fm <= 0.5 * (fa + fb) + slack, "phi must be convex on [{a}, {b}]");
        }
    }
    let mut values = omega.values.clone();
    for k in 0..omega.horizon() {
        for l in k + 1..=omega.horizon() {
            let v = phi(omega.get(k, l));
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter(format!("phi produced {v} at ({k}, {l})")));
            }
            values.get_mut(k, l)[0] = v;
        }
    }
    Ok(Control { values })
}

/// `omega_{k,l}^alpha * omega~_{k,l}^beta`, a control when `alpha + beta >= 1`.
pub fn control_product(omega: &Control, other: &Control, alpha: f64, beta: f64) -> Result<Control> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("exponents must be positive, got {alpha}, {beta}")));
    }
    if alpha + beta < 1.0 {
        return Err(Error::InvalidParameter(format!("alpha + beta must be >= 1, got {}", alpha + beta)));
    }
    if omega.horizon() != other.horizon() {
        return Err(Error::HorizonMismatch { left: omega.horizon(), right: other.horizon() });
    }
    Control::from_fn(omega.horizon(), |k, l| omega.get(k, l).powf(alpha) * other.get(k, l).powf(beta))
}
