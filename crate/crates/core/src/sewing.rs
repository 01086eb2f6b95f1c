//! Discrete sewing defect bounds and Grönwall-type inequalities.
//!
//! The checks in this module are certification tools: they return reports
//! (worst ratios, first violation) rather than bare booleans.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pvar::Control;
use crate::series::{delta_unchecked, Norm, TimeSeries, TriangularArray};

/// Above this horizon the O(N^3) hypothesis scan only runs when forced.
pub const HYPOTHESIS_SCAN_LIMIT: usize = 512;

/// Relative slack accepted when comparing a measured quantity to its bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// `zeta_N(s) = sum_{n=1}^N n^{-s}`.
pub fn zeta_partial(s: f64, n: usize) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("zeta exponent must be > 0, got {s}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("zeta partial sum needs N >= 1".into()));
    }
    // Smallest terms first to limit rounding.
    Ok((1..=n).rev().map(|i| (i as f64).powf(-s)).sum())
}

/// `sum_{j=k}^{l-1} Xi_{j,j+1} - Xi_{k,l}`.
pub fn sewing_defect(xi: &TriangularArray, k: usize, l: usize) -> Result<Vec<f64>> {
    if !(k < l && l <= xi.horizon()) {
        return Err(Error::IndexOrder(format!("sewing defect needs k < l <= {}, got ({k}, {l})", xi.horizon())));
    }
    let width = xi.shape().width();
    let mut out = vec![0.0; width];
    for j in k..l {
        for (o, v) in out.iter_mut().zip(xi.get(j, j + 1)) {
            *o += v;
        }
    }
    for (o, v) in out.iter_mut().zip(xi.get(k, l)) {
        *o -= v;
    }
    Ok(out)
}

/// One term `omega_{k,l}^alpha * omega~_{l,m}^beta` of a sewing hypothesis.
#[derive(Debug, Clone)]
pub struct SewingBudget {
    pub omega: Control,
    pub omega_tilde: Control,
    pub alpha: f64,
    pub beta: f64,
}

impl SewingBudget {
    pub fn new(omega: Control, omega_tilde: Control, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("sewing exponents must be positive, got {alpha}, {beta}")));
        }
        if !(alpha + beta > 1.0) {
            return Err(Error::InvalidParameter(format!("sewing needs alpha + beta > 1, got {}", alpha + beta)));
        }
        if omega.horizon() != omega_tilde.horizon() {
            return Err(Error::HorizonMismatch { left: omega.horizon(), right: omega_tilde.horizon() });
        }
        Ok(Self { omega, omega_tilde, alpha, beta })
    }

    pub fn theta(&self) -> f64 {
        self.alpha + self.beta
    }

    fn split(&self, k: usize, l: usize, m: usize) -> f64 {
        self.omega.get(k, l).powf(self.alpha) * self.omega_tilde.get(l, m).powf(self.beta)
    }

    fn joint(&self, k: usize, l: usize) -> f64 {
        self.omega.get(k, l).powf(self.alpha) * self.omega_tilde.get(k, l).powf(self.beta)
    }
}

/// Whether the O(N^3) hypothesis scan runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HypothesisScan {
    /// Scan when `N <= HYPOTHESIS_SCAN_LIMIT`.
    #[default]
    Auto,
    Force,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripleViolation {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SewingEntry {
    pub k: usize,
    pub l: usize,
    pub defect: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SewingReport {
    /// `2^theta zeta_N(theta)`.
    pub constant: f64,
    pub hypothesis_checked: bool,
    pub hypothesis_violation: Option<TripleViolation>,
    /// `max |delta Xi| / rhs` over all scanned triples.
    pub worst_hypothesis_ratio: f64,
    pub entries: Vec<SewingEntry>,
    pub max_ratio: f64,
    /// Every defect is within its bound up to [`BOUND_SLACK`].
    pub within_bound: bool,
}

impl SewingReport {
    pub fn hypothesis_holds(&self) -> bool {
        self.hypothesis_checked && self.hypothesis_violation.is_none()
    }

    pub fn worst(&self) -> Option<&SewingEntry> {
        self.entries.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio))
    }
}

/// Checks `|defect_{k,l}| <= 2^theta zeta_N(theta) omega_{k,l}^alpha omega~_{k,l}^beta`
/// for every pair, after scanning the hypothesis
/// `|delta Xi_{k,l,m}| <= omega_{k,l}^alpha omega~_{l,m}^beta`.
pub fn check_sewing_bound(xi: &TriangularArray, budget: &SewingBudget, norm: Norm) -> Result<SewingReport> {
    check_generalized_sewing(xi, std::slice::from_ref(budget), norm)
}

/// Multi-term version: the hypothesis is a sum of budgets and the constant
/// uses `theta^ = min_r (alpha_r + beta_r)`.
pub fn check_generalized_sewing(xi: &TriangularArray, budgets: &[SewingBudget], norm: Norm) -> Result<SewingReport> {
    check_generalized_sewing_with(xi, budgets, norm, HypothesisScan::Auto)
}

pub fn check_generalized_sewing_with(
    xi: &TriangularArray,
    budgets: &[SewingBudget],
    norm: Norm,
    scan: HypothesisScan,
) -> Result<SewingReport> {
    let n = xi.horizon();
    if n == 0 {
        return Err(Error::InvalidParameter("sewing needs N >= 1".into()));
    }
    if budgets.is_empty() {
        return Err(Error::InvalidParameter("at least one sewing budget is required".into()));
    }
    for b in budgets {
        if b.omega.horizon() != n {
            return Err(Error::HorizonMismatch { left: n, right: b.omega.horizon() });
        }
        if !(b.alpha > 0.0 && b.beta > 0.0 && b.theta() > 1.0) {
            return Err(Error::InvalidParameter(format!("invalid sewing exponents {}, {}", b.alpha, b.beta)));
        }
    }
    let theta = budgets.iter().map(SewingBudget::theta).fold(f64::INFINITY, f64::min);
    let constant = 2f64.powf(theta) * zeta_partial(theta, n)?;
    let abs_slack = 1e-12 * xi.max_magnitude(norm);

    let hypothesis_checked = match scan {
        HypothesisScan::Auto => n <= HYPOTHESIS_SCAN_LIMIT,
        HypothesisScan::Force => true,
        HypothesisScan::Skip => false,
    };
    let (hypothesis_violation, worst_hypothesis_ratio) = if hypothesis_checked {
        scan_hypothesis(xi, budgets, norm, abs_slack)
    } else {
        (None, f64::NAN)
    };

    let entries: Vec<SewingEntry> = (0..n)
        .into_par_iter()
        .flat_map_iter(|k| {
            (k + 1..=n).map(move |l| {
                let defect = norm.of(&sewing_defect(xi, k, l).expect("valid pair"));
                let bound = constant * budgets.iter().map(|b| b.joint(k, l)).sum::<f64>();
                SewingEntry { k, l, defect, bound, ratio: ratio(defect, bound, abs_slack) }
            })
        })
        .collect();
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    Ok(SewingReport {
        constant,
        hypothesis_checked,
        hypothesis_violation,
        worst_hypothesis_ratio,
        within_bound: max_ratio <= 1.0 + BOUND_SLACK,
        entries,
        max_ratio,
    })
}

fn ratio(value: f64, bound: f64, abs_slack: f64) -> f64 {
    if value <= abs_slack {
        0.0
    } else if bound > 0.0 {
        value / bound
    } else {
        f64::INFINITY
    }
}

fn scan_hypothesis(
    xi: &TriangularArray,
    budgets: &[SewingBudget],
    norm: Norm,
    abs_slack: f64,
) -> (Option<TripleViolation>, f64) {
    let n = xi.horizon();
    let per_row: Vec<(Option<TripleViolation>, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut first = None;
            let mut worst = 0.0f64;
            for l in k + 1..n {
                for m in l + 1..=n {
                    let lhs = norm.of(&delta_unchecked(xi, k, l, m));
                    let rhs: f64 = budgets.iter().map(|b| b.split(k, l, m)).sum();
                    worst = worst.max(ratio(lhs, rhs, abs_slack));
                    if first.is_none() && lhs > rhs * (1.0 + BOUND_SLACK) + abs_slack {
                        first = Some(TripleViolation { k, l, m, lhs, rhs });
                    }
                }
            }
            (first, worst)
        })
        .collect();
    let violation = per_row.iter().find_map(|(v, _)| *v);
    let worst = per_row.iter().map(|(_, w)| *w).fold(0.0, f64::max);
    (violation, worst)
}

/// Product and exponential forms of the discrete Grönwall bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteGronwall {
    /// `c * prod_{i=1}^{j-1} (1 + v_i)`
    pub product: f64,
    /// `c * exp(sum_{i=1}^{j-1} v_i)`
    pub exponential: f64,
}

/// Bound on `phi_j` when `phi_j <= c + sum_{i=1}^{j-1} v_i phi_i`.
///
/// `v[0]` holds `v_1`.
pub fn discrete_gronwall_bound(c: f64, v: &[f64], j: usize) -> Result<DiscreteGronwall> {
    if !(c >= 0.0) {
        return Err(Error::InvalidParameter(format!("c must be >= 0, got {c}")));
    }
    if j == 0 || j - 1 > v.len() {
        return Err(Error::IndexOrder(format!("j = {j} needs 1 <= j <= {}", v.len() + 1)));
    }
    let used = &v[..j - 1];
    if let Some(bad) = used.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::InvalidParameter(format!("v must be non-negative, found {bad}")));
    }
    let product = c * used.iter().map(|x| 1.0 + x).product::<f64>();
    let exponential = c * used.iter().sum::<f64>().exp();
    Ok(DiscreteGronwall { product, exponential })
}

/// Data for the rough Grönwall bound: a sequence `z` with
///
/// ```text
/// |z_{k,l}| <= C (max_{j<=l} |z_j|) omega_{k,l}^{1/kappa} + omega~_{k,l}^{1/rho}
/// ```
///
/// whenever `omega_{k,l} <= L` or `l = k + 1`.
#[derive(Debug, Clone)]
pub struct GronwallInput {
    pub z: TimeSeries,
    pub omega: Control,
    pub omega_tilde: Control,
    pub c: f64,
    pub kappa: f64,
    pub rho: f64,
    /// The localisation threshold `L`.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoughGronwallBound {
    pub value: f64,
    /// `min(1, 1 / (L (2 C e^2)^kappa))`
    pub alpha: f64,
    pub observed_max: f64,
}

impl GronwallInput {
    fn validate(&self) -> Result<()> {
        let n = self.z.horizon();
        for c in [&self.omega, &self.omega_tilde] {
            if c.horizon() != n {
                return Err(Error::HorizonMismatch { left: n, right: c.horizon() });
            }
        }
        if !(self.c > 0.0 && self.threshold > 0.0) {
            return Err(Error::InvalidParameter("C and L must be positive".into()));
        }
        if !(self.kappa >= 1.0 && self.rho >= 1.0) {
            return Err(Error::InvalidParameter("kappa and rho must be >= 1".into()));
        }
        Ok(())
    }

    /// Scans the hypothesis on `{(k, l) : omega_{k,l} <= L or l = k + 1}` and
    /// reports the first violating pair.
    pub fn check_hypothesis(&self, norm: Norm) -> Result<()> {
        self.validate()?;
        let n = self.z.horizon();
        let running_max: Vec<f64> = self
            .z
            .points()
            .scan(0.0f64, |m, p| {
                *m = m.max(norm.of(p));
                Some(*m)
            })
            .collect();
        for k in 0..n {
            for l in k + 1..=n {
                let w = self.omega.get(k, l);
                if !(w <= self.threshold || l == k + 1) {
                    continue;
                }
                let lhs = norm.dist(self.z.point(l), self.z.point(k));
                let rhs = self.c * running_max[l] * w.powf(1.0 / self.kappa)
                    + self.omega_tilde.get(k, l).powf(1.0 / self.rho);
                if lhs > rhs * (1.0 + BOUND_SLACK) + 1e-14 * running_max[n] {
                    return Err(Error::Hypothesis { k, l, lhs, rhs });
                }
            }
        }
        Ok(())
    }
}

/// ```text
/// max_j |z_j| <= 2 exp(omega_{0,N} / (alpha L)) { |z_0| + max_j omega~_{0,j}^{1/rho}
///                (1 + 2 omega_{0,j} / (alpha L))^{1 - 1/rho} exp(-omega_{0,j} / (alpha L)) }
/// ```
///
/// The hypothesis is verified first; a violation is returned as an error.
pub fn rough_gronwall_bound(input: &GronwallInput, norm: Norm) -> Result<RoughGronwallBound> {
    input.check_hypothesis(norm)?;
    Ok(rough_gronwall_value(input, norm))
}

/// The bound formula alone, without the hypothesis scan.
pub fn rough_gronwall_value(input: &GronwallInput, norm: Norm) -> RoughGronwallBound {
    let n = input.z.horizon();
    let growth = input.threshold * (2.0 * input.c * std::f64::consts::E.powi(2)).powf(input.kappa);
    let alpha = if growth > 1.0 { 1.0 / growth } else { 1.0 };
    let scale = alpha * input.threshold;
    let total = input.omega.get(0, n) / scale;
    let z0 = norm.of(input.z.point(0));
    let head = if z0 > 0.0 { z0 * total.exp() } else { 0.0 };
    // exp(x_N) exp(-x_j) folded together so large exponents do not produce inf * 0.
    let tail = (0..=n)
        .map(|j| {
            let tilde = input.omega_tilde.get(0, j).powf(1.0 / input.rho);
            if tilde == 0.0 {
                return 0.0;
            }
            let x = input.omega.get(0, j) / scale;
            tilde * (1.0 + 2.0 * x).powf(1.0 - 1.0 / input.rho) * (total - x).exp()
        })
        .fold(0.0, f64::max);
    let observed_max = input.z.sup_norm(norm);
    RoughGronwallBound { value: 2.0 * (head + tail), alpha, observed_max }
}
