//! Time series, triangular arrays and the norms used to measure them.
//!
//! A [`TimeSeries`] is a finite sequence `w_0, ..., w_N` of points in `R^d`.
//! A [`TriangularArray`] holds one value per ordered index pair `0 <= k < l <= N`;
//! increments `w_{k,l} = w_l - w_k`, remainders and level-2 lifts all live
//! in this shape. Storage is dense, one row per left index.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vector norm used for every magnitude in the crate. Matrices are measured
/// by flattening their entries under the same variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    #[default]
    L2,
    LInf,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::LInf => v.iter().fold(0.0, |acc, x| acc.max(x.abs())),
        }
    }

    /// Distance `|a - b|` without allocating.
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|t| t * t).sum::<f64>().sqrt(),
            Norm::LInf => diffs.fold(0.0, f64::max),
        }
    }

    /// `sup { |v|_1 : |v| <= 1 }` on `R^n`.
    ///
    /// Sums of the form `sum_mu |f_mu| |w^mu|` are bounded by
    /// `max_mu |f_mu| * dual_factor(d) * |w|`.
    pub fn dual_factor(self, n: usize) -> f64 {
        match self {
            Norm::L1 => 1.0,
            Norm::L2 => (n as f64).sqrt(),
            Norm::LInf => n as f64,
        }
    }

    /// `sup { |a|_q : |a| <= 1 }` for the `q` of this norm compared with sup-norm
    /// bounded entries: a vector whose entries are all bounded by `s` has norm at
    /// most `s * entry_factor(n)`.
    pub fn entry_factor(self, n: usize) -> f64 {
        match self {
            Norm::L1 => n as f64,
            Norm::L2 => (n as f64).sqrt(),
            Norm::LInf => 1.0,
        }
    }

    /// Upper bound on the operator norm induced by this norm. Exact for
    /// `L1` and `LInf`; the Frobenius norm stands in for the spectral norm.
    pub fn op_norm_bound(self, a: &DMatrix<f64>) -> f64 {
        match self {
            Norm::L1 => a
                .column_iter()
                .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Norm::LInf => a
                .row_iter()
                .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Norm::L2 => a.norm(),
        }
    }

    /// Exact induced operator norm (spectral norm for `L2`).
    pub fn op_norm(self, a: &DMatrix<f64>) -> f64 {
        match self {
            Norm::L2 => {
                if a.is_empty() {
                    0.0
                } else if a.nrows() == 1 || a.ncols() == 1 {
                    a.norm()
                } else {
                    a.singular_values().max()
                }
            }
            _ => self.op_norm_bound(a),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" | "l-inf" | "inf" => Ok(Norm::LInf),
            other => Err(Error::InvalidParameter(format!("unknown norm `{other}`"))),
        }
    }
}

/// Finite sequence of points in `R^d`, indexed `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dim: usize,
    data: Vec<f64>,
}

impl TimeSeries {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySeries)?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("points must have dimension >= 1".into()));
        }
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            data.extend_from_slice(p);
        }
        Ok(Self { dim, data })
    }

    /// Builds a series from row-major storage of `N+1` points.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("points must have dimension >= 1".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: data.len() % dim });
        }
        Ok(Self { dim, data })
    }

    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec())
    }

    pub fn constant(point: &[f64], horizon: usize) -> Result<Self> {
        let data = point.iter().copied().cycle().take(point.len() * (horizon + 1)).collect();
        Self::from_flat(point.len(), data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N`, the index of the last point.
    pub fn horizon(&self) -> usize {
        self.data.len() / self.dim - 1
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// `w_{k,l} = w_l - w_k`.
    pub fn increment(&self, k: usize, l: usize) -> Vec<f64> {
        self.point(l).iter().zip(self.point(k)).map(|(a, b)| a - b).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|x| x * factor).collect() }
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { dim: self.dim, data })
    }

    /// The subseries `(w_k, ..., w_l)`, re-indexed from zero.
    pub fn window(&self, k: usize, l: usize) -> Result<Self> {
        if k > l || l > self.horizon() {
            return Err(Error::IndexOrder(format!("window [{k}, {l}] in horizon {}", self.horizon())));
        }
        Ok(Self { dim: self.dim, data: self.data[k * self.dim..(l + 1) * self.dim].to_vec() })
    }

    /// `max_k |w_k|`.
    pub fn sup_norm(&self, norm: Norm) -> f64 {
        self.points().map(|p| norm.of(p)).fold(0.0, f64::max)
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if self.horizon() != other.horizon() {
            return Err(Error::HorizonMismatch { left: self.horizon(), right: other.horizon() });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Shape shared by all values of a [`TriangularArray`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueShape {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl ValueShape {
    pub fn width(self) -> usize {
        match self {
            ValueShape::Scalar => 1,
            ValueShape::Vector(d) => d,
            ValueShape::Matrix(r, c) => r * c,
        }
    }
}

/// Values `Xi_{k,l}` for `0 <= k < l <= N`, stored densely row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularArray {
    horizon: usize,
    shape: ValueShape,
    data: Vec<f64>,
}

#[inline]
fn row_offset(horizon: usize, k: usize) -> usize {
    // sum_{i<k} (N - i)
    k * horizon - k * k.saturating_sub(1) / 2
}

impl TriangularArray {
    pub fn zeros(horizon: usize, shape: ValueShape) -> Self {
        let pairs = horizon * (horizon + 1) / 2;
        Self { horizon, shape, data: vec![0.0; pairs * shape.width()] }
    }

    /// Fills every entry with `fill(k, l, out)`.
    pub fn from_fn<F>(horizon: usize, shape: ValueShape, mut fill: F) -> Self
    where
        F: FnMut(usize, usize, &mut [f64]),
    {
        let mut arr = Self::zeros(horizon, shape);
        for k in 0..horizon {
            for l in k + 1..=horizon {
                fill(k, l, arr.get_mut(k, l));
            }
        }
        arr
    }

    /// Parallel variant of [`from_fn`](Self::from_fn); rows are filled independently.
    pub fn par_from_fn<F>(horizon: usize, shape: ValueShape, fill: F) -> Self
    where
        F: Fn(usize, usize, &mut [f64]) + Sync,
    {
        use rayon::prelude::*;
        let width = shape.width();
        let rows: Vec<Vec<f64>> = (0..horizon)
            .into_par_iter()
            .map(|k| {
                let mut row = vec![0.0; (horizon - k) * width];
                for (i, out) in row.chunks_exact_mut(width).enumerate() {
                    fill(k, k + 1 + i, out);
                }
                row
            })
            .collect();
        Self { horizon, shape, data: rows.concat() }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn shape(&self) -> ValueShape {
        self.shape
    }

    #[inline]
    fn index(&self, k: usize, l: usize) -> usize {
        debug_assert!(k < l && l <= self.horizon, "({k}, {l}) outside horizon {}", self.horizon);
        (row_offset(self.horizon, k) + (l - k - 1)) * self.shape.width()
    }

    pub fn get(&self, k: usize, l: usize) -> &[f64] {
        let i = self.index(k, l);
        &self.data[i..i + self.shape.width()]
    }

    pub fn get_mut(&mut self, k: usize, l: usize) -> &mut [f64] {
        let i = self.index(k, l);
        let w = self.shape.width();
        &mut self.data[i..i + w]
    }

    /// `|Xi_{k,l}|` under `norm`; zero on the diagonal.
    pub fn magnitude(&self, k: usize, l: usize, norm: Norm) -> f64 {
        if k == l {
            0.0
        } else {
            norm.of(self.get(k, l))
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.horizon != other.horizon {
            return Err(Error::HorizonMismatch { left: self.horizon, right: other.horizon });
        }
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch {
                expected: self.shape.width(),
                found: other.shape.width(),
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { horizon: self.horizon, shape: self.shape, data })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            horizon: self.horizon,
            shape: self.shape,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// Extracts one component as a scalar array.
    pub fn component(&self, index: usize) -> Self {
        let w = self.shape.width();
        assert!(index < w, "component {index} out of range for width {w}");
        Self {
            horizon: self.horizon,
            shape: ValueShape::Scalar,
            data: self.data.iter().skip(index).step_by(w).copied().collect(),
        }
    }

    /// The restriction to `[k, l]`, re-indexed from zero.
    pub fn window(&self, k: usize, l: usize) -> Result<Self> {
        if k > l || l > self.horizon {
            return Err(Error::IndexOrder(format!("window [{k}, {l}] in horizon {}", self.horizon)));
        }
        Ok(Self::from_fn(l - k, self.shape, |a, b, out| {
            out.copy_from_slice(self.get(k + a, k + b))
        }))
    }

    /// Largest entry magnitude, used to scale floating-point tolerances.
    pub fn max_magnitude(&self, norm: Norm) -> f64 {
        self.data
            .chunks_exact(self.shape.width())
            .map(|v| norm.of(v))
            .fold(0.0, f64::max)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// `w_{k,l} = w_l - w_k` for all pairs.
pub fn increments(w: &TimeSeries) -> TriangularArray {
    TriangularArray::from_fn(w.horizon(), ValueShape::Vector(w.dim()), |k, l, out| {
        for ((o, a), b) in out.iter_mut().zip(w.point(l)).zip(w.point(k)) {
            *o = a - b;
        }
    })
}

/// `delta Xi_{k,l,m} = Xi_{k,m} - Xi_{k,l} - Xi_{l,m}`.
pub fn delta(xi: &TriangularArray, k: usize, l: usize, m: usize) -> Result<Vec<f64>> {
    if !(k < l && l < m && m <= xi.horizon()) {
        return Err(Error::IndexOrder(format!(
            "delta needs k < l < m <= {}, got ({k}, {l}, {m})",
            xi.horizon()
        )));
    }
    Ok(delta_unchecked(xi, k, l, m))
}

pub(crate) fn delta_unchecked(xi: &TriangularArray, k: usize, l: usize, m: usize) -> Vec<f64> {
    let (km, kl, lm) = (xi.get(k, m), xi.get(k, l), xi.get(l, m));
    km.iter().zip(kl).zip(lm).map(|((a, b), c)| a - b - c).collect()
}
