//! Level-2 iterated-sums lift of a time series.
//!
//! For `w` in `R^d` the lift is the array of `d x d` matrices
//!
//! ```text
//! W^{mu nu}_{k,l} = sum_{j=k}^{l-1} (w^mu_j - w^mu_k) (w^nu_{j+1} - w^nu_j)
//! ```
//!
//! It satisfies Chen's identity `delta W_{k,l,m} = w_{k,l} (x) w_{l,m}`.

use crate::error::{Error, Result};
use crate::pvar::pvar;
use crate::series::{Norm, TimeSeries, TriangularArray, ValueShape};

/// A series together with its level-2 lift.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSeries {
    base: TimeSeries,
    second: TriangularArray,
}

impl LiftedSeries {
    pub fn base(&self) -> &TimeSeries {
        &self.base
    }

    /// The `d x d` matrices `W_{k,l}`, flattened row-major (`mu * d + nu`).
    pub fn second_level(&self) -> &TriangularArray {
        &self.second
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn horizon(&self) -> usize {
        self.base.horizon()
    }

    /// `W^{mu nu}_{k,l}`; zero on the diagonal.
    pub fn entry(&self, k: usize, l: usize, mu: usize, nu: usize) -> f64 {
        if k == l {
            0.0
        } else {
            self.second.get(k, l)[mu * self.dim() + nu]
        }
    }

    /// Lift of `lambda * w`, i.e. first level times `lambda`, second times `lambda^2`.
    pub fn dilated(&self, lambda: f64) -> Self {
        Self { base: self.base.scaled(lambda), second: self.second.scaled(lambda * lambda) }
    }
}

/// Computes the lift with the recursion
/// `W_{k,l+1} = W_{k,l} + w_{k,l} (x) w_{l,l+1}`, `O(N^2 d^2)` in total.
pub fn lift(w: &TimeSeries) -> Result<LiftedSeries> {
    let n = w.horizon();
    if n < 1 {
        return Err(Error::InvalidParameter("lift needs at least two points".into()));
    }
    let d = w.dim();
    let mut second = TriangularArray::zeros(n, ValueShape::Matrix(d, d));
    let mut acc = vec![0.0; d * d];
    for k in 0..n {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let base = w.point(k);
        for l in k + 1..=n {
            // W_{k,k+1} = 0; afterwards add the j = l - 1 term.
            if l > k + 1 {
                let (prev, cur) = (w.point(l - 1), w.point(l));
                for mu in 0..d {
                    let left = prev[mu] - base[mu];
                    for nu in 0..d {
                        acc[mu * d + nu] += left * (cur[nu] - prev[nu]);
                    }
                }
            }
            second.get_mut(k, l).copy_from_slice(&acc);
        }
    }
    Ok(LiftedSeries { base: w.clone(), second })
}

fn check_rough_exponent(p: f64) -> Result<()> {
    if (2.0..3.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::WrongRegime { p, regime: "[2, 3)" })
    }
}

/// `|||W|||_{p;[k,l]} = ||w||_{p;[k,l]} + ||W||_{p/2;[k,l]}^{1/2}`, for `2 <= p < 3`.
pub fn homogeneous_norm(lifted: &LiftedSeries, p: f64, k: usize, l: usize, norm: Norm) -> Result<f64> {
    check_rough_exponent(p)?;
    let first = pvar(&lifted.base, p, k, l, norm)?;
    let second = pvar(&lifted.second, p / 2.0, k, l, norm)?;
    Ok(first + second.sqrt())
}

/// `rho_p(W, W~) = ||w - w~||_{p;[0,N]} + ||W - W~||_{p/2;[0,N]}`, for `2 <= p < 3`.
pub fn rho_p(a: &LiftedSeries, b: &LiftedSeries, p: f64, norm: Norm) -> Result<f64> {
    check_rough_exponent(p)?;
    a.base.check_compatible(&b.base)?;
    let n = a.horizon();
    let first = pvar(&a.base.sub(&b.base)?, p, 0, n, norm)?;
    let second = pvar(&a.second.sub(&b.second)?, p / 2.0, 0, n, norm)?;
    Ok(first + second)
}
