use rayon::prelude::*;

use super::{Regime, VectorField};
use crate::error::{Error, Result};
use crate::lift::LiftedSeries;
use crate::series::{TimeSeries, TriangularArray, ValueShape};

/// Per-interval access to the remainders of a solution:
///
/// ```text
/// I_{k,l}    = x_{k,l} - sum_mu f_mu(x_k) w^mu_{k,l}
/// R_{k,l}    = I_{k,l}                                   (Young)
/// R_{k,l}    = I_{k,l} - sum_{mu,nu} F_{mu nu}(x_k) W^{mu nu}_{k,l}   (rough)
/// J^mu_{k,l} = f_mu(x_l) - f_mu(x_k) - sum_nu Df_mu(x_k) f_nu(x_k) w^nu_{k,l}
/// ```
///
/// Field values and Jacobians are cached once per time index, so a single
/// entry costs `O(d m^2)`.
pub struct RemainderView<'a> {
    regime: Regime,
    w: &'a TimeSeries,
    x: &'a TimeSeries,
    lift: Option<&'a LiftedSeries>,
    m: usize,
    d: usize,
    values: Vec<f64>,
    jacobians: Vec<f64>,
    second: Vec<f64>,
}

impl<'a> RemainderView<'a> {
    pub fn new<F: VectorField + ?Sized>(
        field: &F,
        w: &'a TimeSeries,
        x: &'a TimeSeries,
        regime: Regime,
        lift: Option<&'a LiftedSeries>,
    ) -> Result<Self> {
        let (m, d) = (field.state_dim(), field.num_fields());
        if w.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: w.dim() });
        }
        if x.dim() != m {
            return Err(Error::DimensionMismatch { expected: m, found: x.dim() });
        }
        if w.horizon() != x.horizon() {
            return Err(Error::HorizonMismatch { left: w.horizon(), right: x.horizon() });
        }
        if regime == Regime::Rough {
            let l = lift.ok_or(Error::MissingLift)?;
            if l.base() != w {
                return Err(Error::InvalidParameter("lift does not belong to the driving series".into()));
            }
        }
        let per_point: Vec<(Vec<f64>, Vec<f64>)> = (0..=x.horizon())
            .into_par_iter()
            .map(|k| {
                let xk = x.point(k);
                let mut vals = vec![0.0; d * m];
                let mut jacs = vec![0.0; d * m * m];
                for mu in 0..d {
                    field.eval(mu, xk, &mut vals[mu * m..(mu + 1) * m]);
                    field.jacobian(mu, xk, &mut jacs[mu * m * m..(mu + 1) * m * m]);
                }
                (vals, jacs)
            })
            .collect();
        let values: Vec<f64> = per_point.iter().flat_map(|(v, _)| v.iter().copied()).collect();
        let jacobians: Vec<f64> = per_point.iter().flat_map(|(_, j)| j.iter().copied()).collect();
        let mut view = Self { regime, w, x, lift, m, d, values, jacobians, second: Vec::new() };
        if regime == Regime::Rough {
            view.second = (0..=x.horizon())
                .flat_map(|k| {
                    let mut out = vec![0.0; d * d * m];
                    for mu in 0..d {
                        for nu in 0..d {
                            let slot = &mut out[(mu * d + nu) * m..(mu * d + nu + 1) * m];
                            view.apply_jacobian(k, nu, view.value(k, mu), slot);
                        }
                    }
                    out
                })
                .collect();
        }
        Ok(view)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn horizon(&self) -> usize {
        self.x.horizon()
    }

    pub fn state_dim(&self) -> usize {
        self.m
    }

    pub fn num_fields(&self) -> usize {
        self.d
    }

    /// `f_mu(x_k)`
    pub fn value(&self, k: usize, mu: usize) -> &[f64] {
        let start = (k * self.d + mu) * self.m;
        &self.values[start..start + self.m]
    }

    /// `F_{mu nu}(x_k) = Df_nu(x_k) f_mu(x_k)`; rough regime only.
    pub fn second_order_value(&self, k: usize, mu: usize, nu: usize) -> &[f64] {
        assert_eq!(self.regime, Regime::Rough, "second-order fields are cached in the rough regime only");
        let start = ((k * self.d + mu) * self.d + nu) * self.m;
        &self.second[start..start + self.m]
    }

    fn apply_jacobian(&self, k: usize, mu: usize, v: &[f64], out: &mut [f64]) {
        let m = self.m;
        let start = (k * self.d + mu) * m * m;
        let jac = &self.jacobians[start..start + m * m];
        for i in 0..m {
            out[i] = (0..m).map(|j| jac[i * m + j] * v[j]).sum();
        }
    }

    /// `sum_mu f_mu(x_k) w^mu_{k,l}`
    pub fn first_order_germ(&self, k: usize, l: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let (wk, wl) = (self.w.point(k), self.w.point(l));
        for mu in 0..self.d {
            let dw = wl[mu] - wk[mu];
            for (o, v) in out.iter_mut().zip(self.value(k, mu)) {
                *o += v * dw;
            }
        }
    }

    /// The regime's germ: the first-order germ, plus
    /// `sum F_{mu nu}(x_k) W^{mu nu}_{k,l}` in the rough regime.
    /// Its sewing defect `sum_j Xi_{j,j+1} - Xi_{k,l}` is `R_{k,l}`.
    pub fn germ(&self, k: usize, l: usize, out: &mut [f64]) {
        self.first_order_germ(k, l, out);
        if self.regime == Regime::Rough && k < l {
            let lift = self.lift.expect("checked at construction");
            let second = lift.second_level().get(k, l);
            for mu in 0..self.d {
                for nu in 0..self.d {
                    let coeff = second[mu * self.d + nu];
                    for (o, v) in out.iter_mut().zip(self.second_order_value(k, mu, nu)) {
                        *o += v * coeff;
                    }
                }
            }
        }
    }

    pub fn i(&self, k: usize, l: usize, out: &mut [f64]) {
        self.first_order_germ(k, l, out);
        for ((o, a), b) in out.iter_mut().zip(self.x.point(l)).zip(self.x.point(k)) {
            *o = (a - b) - *o;
        }
    }

    pub fn r(&self, k: usize, l: usize, out: &mut [f64]) {
        self.germ(k, l, out);
        for ((o, a), b) in out.iter_mut().zip(self.x.point(l)).zip(self.x.point(k)) {
            *o = (a - b) - *o;
        }
    }

    pub fn j(&self, k: usize, l: usize, mu: usize, out: &mut [f64]) {
        let mut germ = vec![0.0; self.m];
        self.first_order_germ(k, l, &mut germ);
        self.apply_jacobian(k, mu, &germ, out);
        for ((o, a), b) in out.iter_mut().zip(self.value(l, mu)).zip(self.value(k, mu)) {
            *o = (a - b) - *o;
        }
    }

    /// `f_mu(x_l) - f_mu(x_k) - Df_mu(x_k) x_{k,l}`, so that `J = T + Df I`.
    pub fn taylor(&self, k: usize, l: usize, mu: usize, out: &mut [f64]) {
        let dx: Vec<f64> = self.x.point(l).iter().zip(self.x.point(k)).map(|(a, b)| a - b).collect();
        self.apply_jacobian(k, mu, &dx, out);
        for ((o, a), b) in out.iter_mut().zip(self.value(l, mu)).zip(self.value(k, mu)) {
            *o = (a - b) - *o;
        }
    }

    /// `Df_mu(x_k) v`
    pub fn jacobian_times(&self, k: usize, mu: usize, v: &[f64], out: &mut [f64]) {
        self.apply_jacobian(k, mu, v, out);
    }
}

/// A solution with every remainder filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionBundle {
    pub regime: Regime,
    pub x: TimeSeries,
    pub r: TriangularArray,
    pub i: TriangularArray,
    /// One array per field.
    pub j: Vec<TriangularArray>,
}

/// Fills `R`, `I` and every `J^mu` over all pairs, rows in parallel.
pub fn remainders<F: VectorField + ?Sized>(
    field: &F,
    w: &TimeSeries,
    x: &TimeSeries,
    regime: Regime,
    lift: Option<&LiftedSeries>,
) -> Result<SolutionBundle> {
    let view = RemainderView::new(field, w, x, regime, lift)?;
    let (n, m) = (x.horizon(), x.dim());
    let shape = ValueShape::Vector(m);
    let i = TriangularArray::par_from_fn(n, shape, |k, l, out| view.i(k, l, out));
    let r = match regime {
        Regime::Young => i.clone(),
        Regime::Rough => TriangularArray::par_from_fn(n, shape, |k, l, out| view.r(k, l, out)),
    };
    let j = (0..field.num_fields())
        .map(|mu| TriangularArray::par_from_fn(n, shape, |k, l, out| view.j(k, l, mu, out)))
        .collect();
    Ok(SolutionBundle { regime, x: x.clone(), r, i, j })
}
