//! Explicit constants and computable certificates for the a priori and
//! stability estimates.
//!
//! Every certificate runs the network, measures the quantity the estimate
//! controls, evaluates the bound, and records all inputs and constants.
//!
//! Field norms: a sum `sum_mu f_mu(x) w^mu` is bounded by
//! `max_mu |f_mu(x)| * dual_factor(d) * |w|`, so every norm of `f` entering a
//! bound is `dual_factor(d) * max_{k <= n} sup ||D^k f_mu||`, order zero
//! included.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::cde::{solve, BoundSource, DerivativeBounds, Regime, RemainderView, ScaledField, VectorField};
use crate::error::{Error, Result};
use crate::lift::{homogeneous_norm, lift, rho_p, LiftedSeries};
use crate::pvar::pvar;
use crate::series::{Norm, TimeSeries, TriangularArray, ValueShape};
use crate::sewing::{zeta_partial, BOUND_SLACK};

/// `f64` that serializes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

/// Every constant appearing in the estimates, evaluated literally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsTable {
    pub p: f64,
    pub horizon: usize,
    /// `zeta_N(2/p)`
    pub zeta: f64,
    /// `C_{p,N} = 2^{2/p} zeta_N(2/p)`
    pub c_pn: f64,
    /// `(4e^2)^p (4^{p-1} C^p + 1)`, Young stability.
    pub c_young: f64,
    /// `2^p (4^{p-1} C^p + 1)`, the Young stability constant per unit `L^p`.
    pub a_p: f64,
    /// `9 * 2^{6(1-1/p)} (1 v 6^{1-1/p} 8^{(1-1/p)(1-2/p)} C^{1-1/p})`
    pub k_p: f64,
    /// `3 * 2^{1-2/p} (1 + K_p^2)`
    pub k_p_prime: f64,
    /// `4^{3/2-2/p} 7^{2-3/p} C`, as stated with the theorem.
    pub l_p: f64,
    /// `2 * 7^{1-1/p} * 24^{1-2/p} C`, as derived in the proof.
    pub l_p_proof: f64,
    /// `2^p e^{2p} (max(L_p) + K_p^2 + K_p')^p`, rough stability.
    pub c_rough: f64,
    /// `2^{1-2/p} c^{1/p}`, as stated with the theorem.
    pub c_prime_statement: f64,
    /// `2^{1-2/p} c`, as in the last display of the proof; used to certify.
    pub c_prime_proof: f64,
}

/// Evaluates every constant for `1 <= p < 3` and horizon `N >= 1`.
pub fn constants(p: f64, horizon: usize) -> Result<ConstantsTable> {
    if !(1.0..3.0).contains(&p) {
        return Err(Error::WrongRegime { p, regime: "[1, 3)" });
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("constants need N >= 1".into()));
    }
    let zeta = zeta_partial(2.0 / p, horizon)?;
    let c = 2f64.powf(2.0 / p) * zeta;
    let e = std::f64::consts::E;
    let young_core = 4f64.powf(p - 1.0) * c.powf(p) + 1.0;
    let q = 1.0 - 1.0 / p;
    let r = 1.0 - 2.0 / p;
    let k_p = 9.0 * 2f64.powf(6.0 * q) * f64::max(1.0, 6f64.powf(q) * 8f64.powf(q * r) * c.powf(q));
    let k_p_prime = 3.0 * 2f64.powf(r) * (1.0 + k_p * k_p);
    let l_p = 4f64.powf(1.5 - 2.0 / p) * 7f64.powf(2.0 - 3.0 / p) * c;
    let l_p_proof = 2.0 * 7f64.powf(q) * 24f64.powf(r) * c;
    let c_rough = 2f64.powf(p) * e.powf(2.0 * p) * (l_p.max(l_p_proof) + k_p * k_p + k_p_prime).powf(p);
    Ok(ConstantsTable {
        p,
        horizon,
        zeta,
        c_pn: c,
        c_young: (4.0 * e * e).powf(p) * young_core,
        a_p: 2f64.powf(p) * young_core,
        k_p,
        k_p_prime,
        l_p,
        l_p_proof,
        c_rough,
        c_prime_statement: 2f64.powf(r) * c_rough.powf(1.0 / p),
        c_prime_proof: 2f64.powf(r) * c_rough,
    })
}

/// `e^{L ||w~||_1} (|xi - xi~| + F ||w - w~||_1)`
pub fn onevar_bound(lipschitz: f64, sup: f64, tilde_1var: f64, dxi: f64, diff_1var: f64) -> f64 {
    times((lipschitz * tilde_1var).exp(), dxi + times(sup, diff_1var))
}

/// `2 (2^p C^{p-1} F^p ||w||^p v 2 F ||w||)`
pub fn young_apriori_bound(c: &ConstantsTable, f: f64, w_p: f64) -> f64 {
    let p = c.p;
    let fw = times(f, w_p);
    2.0 * f64::max(2f64.powf(p) * c.c_pn.powf(p - 1.0) * fw.powf(p), 2.0 * fw)
}

/// The proof's closing form `3 C^{-1} (2^p F^p C^p ||w||^p v 2 F C ||w||)`.
pub fn young_apriori_bound_proof(c: &ConstantsTable, f: f64, w_p: f64) -> f64 {
    let (p, cc) = (c.p, c.c_pn);
    let fw = times(f, w_p);
    3.0 / cc * f64::max(2f64.powf(p) * fw.powf(p) * cc.powf(p), 2.0 * fw * cc)
}

/// `2 c^{1/p} exp(c L^p (||w||^p + ||w~||^p)) (|xi - xi~| + L ||w - w~||)`
pub fn young_stability_bound(c: &ConstantsTable, l: f64, w_p: f64, tilde_p: f64, dxi: f64, diff_p: f64) -> f64 {
    let p = c.p;
    let exponent = c.c_young * (times(l, w_p).powf(p) + times(l, tilde_p).powf(p));
    2.0 * c.c_young.powf(1.0 / p) * times(exponent.exp(), dxi + times(l, diff_p))
}

/// `(K_p (|||W|||^p v |||W|||), K_p' (|||W|||^{2p} v |||W|||^2))`
pub fn rough_apriori_bounds(c: &ConstantsTable, hom: f64) -> (f64, f64) {
    let p = c.p;
    (c.k_p * f64::max(hom.powf(p), hom), c.k_p_prime * f64::max(hom.powf(2.0 * p), hom * hom))
}

/// `2 c' exp(c F^p (|||W|||^p + |||W~|||^p)) (|xi - xi~| + F rho_p)`
pub fn rough_stability_bound(c: &ConstantsTable, c_prime: f64, f: f64, hom: f64, tilde_hom: f64, dxi: f64, rho: f64) -> f64 {
    let p = c.p;
    let exponent = c.c_rough * (times(f, hom).powf(p) + times(f, tilde_hom).powf(p));
    2.0 * c_prime * times(exponent.exp(), dxi + times(f, rho))
}

/// Product with `0 * inf = 0`: a vanishing gap or variation contributes
/// nothing, however large its coefficient.
fn times(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateRegime {
    OneVar,
    Young,
    Rough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisStatus {
    /// Field norms come from analytic bounds.
    Verified,
    /// Field norms are grid estimates, i.e. lower estimates of the true sups.
    EstimatedHypothesis,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldNormDigest {
    pub sup: [Real; 4],
    pub source: BoundSource,
    pub dual_factor: f64,
    /// Highest derivative order entering the estimate.
    pub order: usize,
    /// `dual_factor * max_{k <= order} sup[k]`
    pub effective: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputsDigest {
    pub p: f64,
    pub horizon: usize,
    pub interval: [usize; 2],
    pub norm: Norm,
    pub state_dim: usize,
    pub num_fields: usize,
    pub field_norms: FieldNormDigest,
    /// Variation norms and other measured inputs, by name.
    pub measured: BTreeMap<String, Real>,
}

/// A secondary evaluation of the same estimate with a different constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeBound {
    pub label: String,
    pub bound_value: Real,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub regime: CertificateRegime,
    pub estimate: String,
    /// What `observed` measures.
    pub quantity: String,
    pub bound_value: Real,
    pub observed: Real,
    /// `observed <= bound_value * (1 + 1e-9)`
    pub holds: bool,
    pub hypothesis: HypothesisStatus,
    pub inputs: InputsDigest,
    pub constants: Option<ConstantsTable>,
    pub alternatives: Vec<AlternativeBound>,
    pub notes: Vec<String>,
}

fn within(observed: f64, bound: f64) -> bool {
    observed <= bound * (1.0 + BOUND_SLACK) || (bound.is_infinite() && bound > 0.0)
}

impl Certificate {
    pub fn ratio(&self) -> f64 {
        if self.observed.0 == 0.0 {
            0.0
        } else {
            self.observed.0 / self.bound_value.0
        }
    }

    fn finish(mut self) -> Self {
        self.holds = within(self.observed.0, self.bound_value.0);
        if self.bound_value.0.is_infinite() {
            self.notes.push("bound is infinite: the certificate is vacuous".into());
        }
        for alt in &mut self.alternatives {
            alt.holds = within(self.observed.0, alt.bound_value.0);
        }
        self
    }
}

/// Derivative data and norm choice shared by all certificates of one system.
#[derive(Clone, Copy)]
pub struct Certifier<'a> {
    field: &'a dyn VectorField,
    bounds: DerivativeBounds,
    norm: Norm,
}

impl<'a> Certifier<'a> {
    /// Uses the field's own derivative bounds.
    pub fn new(field: &'a dyn VectorField, norm: Norm) -> Result<Self> {
        let bounds = field.derivative_bounds(norm).ok_or_else(|| {
            Error::NoDerivativeBounds(
                "the field provides no derivative bounds (ReLU fields are not differentiable; use softplus, \
                 or attach grid estimates)"
                    .into(),
            )
        })?;
        Ok(Self { field, bounds, norm })
    }

    /// Uses externally supplied bounds, e.g. grid estimates.
    pub fn with_bounds(field: &'a dyn VectorField, bounds: DerivativeBounds, norm: Norm) -> Self {
        Self { field, bounds, norm }
    }

    pub fn bounds(&self) -> &DerivativeBounds {
        &self.bounds
    }

    fn dual(&self) -> f64 {
        self.norm.dual_factor(self.field.num_fields())
    }

    /// `dual_factor(d) * max_{k <= order} sup ||D^k f||`.
    pub fn effective_norm(&self, order: usize) -> f64 {
        times(self.dual(), self.bounds.with_values(order))
    }

    fn hypothesis(&self) -> HypothesisStatus {
        match self.bounds.source {
            BoundSource::Analytic => HypothesisStatus::Verified,
            BoundSource::Estimated => HypothesisStatus::EstimatedHypothesis,
        }
    }

    fn digest(&self, p: f64, horizon: usize, interval: [usize; 2], order: usize) -> InputsDigest {
        InputsDigest {
            p,
            horizon,
            interval,
            norm: self.norm,
            state_dim: self.field.state_dim(),
            num_fields: self.field.num_fields(),
            field_norms: FieldNormDigest {
                sup: self.bounds.sup.map(Real),
                source: self.bounds.source,
                dual_factor: self.dual(),
                order,
                effective: Real(self.effective_norm(order)),
            },
            measured: BTreeMap::new(),
        }
    }

    fn skeleton(&self, regime: CertificateRegime, estimate: &str, quantity: &str, inputs: InputsDigest) -> Certificate {
        Certificate {
            regime,
            estimate: estimate.into(),
            quantity: quantity.into(),
            bound_value: Real(f64::NAN),
            observed: Real(f64::NAN),
            holds: false,
            hypothesis: self.hypothesis(),
            inputs,
            constants: None,
            alternatives: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn sup_distance(&self, x: &TimeSeries, y: &TimeSeries) -> f64 {
        x.points().zip(y.points()).map(|(a, b)| self.norm.dist(a, b)).fold(0.0, f64::max)
    }

    /// `sup_k |x_k - x~_k| <= e^{L ||w~||_1} (|xi - xi~| + ||f||_inf ||w - w~||_1)`.
    pub fn onevar_stability(&self, w: &TimeSeries, xi: &[f64], w2: &TimeSeries, xi2: &[f64]) -> Result<Certificate> {
        w.check_compatible(w2)?;
        let n = w.horizon();
        let x = solve(self.field, w, xi)?;
        let x2 = solve(self.field, w2, xi2)?;
        let dual = self.dual();
        let (sup, lip) = (times(dual, self.bounds.sup[0]), times(dual, self.bounds.sup[1]));
        let tilde_1 = pvar(w2, 1.0, 0, n, self.norm)?;
        let diff_1 = pvar(&w.sub(w2)?, 1.0, 0, n, self.norm)?;
        let dxi = self.norm.dist(xi, xi2);
        let mut inputs = self.digest(1.0, n, [0, n], 1);
        inputs.measured.insert("lipschitz".into(), Real(lip));
        inputs.measured.insert("sup".into(), Real(sup));
        inputs.measured.insert("tilde_w_1var".into(), Real(tilde_1));
        inputs.measured.insert("w_diff_1var".into(), Real(diff_1));
        inputs.measured.insert("xi_distance".into(), Real(dxi));
        let mut cert = self.skeleton(CertificateRegime::OneVar, "onevar_stability", "sup_k |x_k - x~_k|", inputs);
        cert.bound_value = Real(onevar_bound(lip, sup, tilde_1, dxi, diff_1));
        cert.observed = Real(self.sup_distance(&x, &x2));
        Ok(cert.finish())
    }

    /// `||x||_{p;[k,l]} <= 2 (2^p C^{p-1} ||f||^p ||w||^p v 2 ||f|| ||w||)` for `1 <= p < 2`.
    ///
    /// The looser form from the end of the proof is attached as an alternative.
    pub fn young_apriori(&self, w: &TimeSeries, xi: &[f64], p: f64, k: usize, l: usize) -> Result<Certificate> {
        expect_regime(p, Regime::Young)?;
        let n = w.horizon();
        let c = constants(p, n.max(1))?;
        let x = solve(self.field, w, xi)?;
        let f = self.effective_norm(1);
        let w_p = pvar(w, p, k, l, self.norm)?;
        let mut inputs = self.digest(p, n, [k, l], 1);
        inputs.measured.insert("w_pvar".into(), Real(w_p));
        let mut cert = self.skeleton(CertificateRegime::Young, "young_apriori", "||x||_p on [k, l]", inputs);
        cert.bound_value = Real(young_apriori_bound(&c, f, w_p));
        cert.observed = Real(pvar(&x, p, k, l, self.norm)?);
        cert.alternatives.push(AlternativeBound {
            label: "proof form 3 C^{-1} (...)".into(),
            bound_value: Real(young_apriori_bound_proof(&c, f, w_p)),
            holds: false,
        });
        cert.constants = Some(c);
        let cert = cert.finish();
        if !cert.holds && cert.alternatives[0].holds {
            let mut cert = cert;
            cert.notes.push("statement form violated while the proof form holds".into());
            return Ok(cert);
        }
        Ok(cert)
    }

    /// `sup_k |x_k - x~_k| <= 2 c^{1/p} e^{c L^p (||w||^p + ||w~||^p)} (|xi - xi~| + L ||w - w~||_p)`
    /// for `1 <= p < 2`, `L` bounding the `C^2_b` norms.
    pub fn young_stability(
        &self,
        (w, xi): (&TimeSeries, &[f64]),
        (w2, xi2): (&TimeSeries, &[f64]),
        p: f64,
    ) -> Result<Certificate> {
        expect_regime(p, Regime::Young)?;
        w.check_compatible(w2)?;
        let n = w.horizon();
        let c = constants(p, n.max(1))?;
        let x = solve(self.field, w, xi)?;
        let x2 = solve(self.field, w2, xi2)?;
        let l = self.effective_norm(2);
        let w_p = pvar(w, p, 0, n, self.norm)?;
        let tilde_p = pvar(w2, p, 0, n, self.norm)?;
        let diff_p = pvar(&w.sub(w2)?, p, 0, n, self.norm)?;
        let dxi = self.norm.dist(xi, xi2);
        let mut inputs = self.digest(p, n, [0, n], 2);
        inputs.measured.insert("w_pvar".into(), Real(w_p));
        inputs.measured.insert("tilde_w_pvar".into(), Real(tilde_p));
        inputs.measured.insert("w_diff_pvar".into(), Real(diff_p));
        inputs.measured.insert("xi_distance".into(), Real(dxi));
        let mut cert = self.skeleton(CertificateRegime::Young, "young_stability", "sup_k |x_k - x~_k|", inputs);
        cert.bound_value = Real(young_stability_bound(&c, l, w_p, tilde_p, dxi, diff_p));
        cert.observed = Real(self.sup_distance(&x, &x2));
        cert.constants = Some(c);
        Ok(cert.finish())
    }

    /// The two rough a priori estimates on `[k, l]`, for `2 <= p < 3`:
    /// `||x||_p <= K_p (|||W|||^p v |||W|||)` and
    /// `||I||_{p/2} <= K_p' (|||W|||^{2p} v |||W|||^2)`.
    ///
    /// The estimate is stated for `||f||_{C^2_b} <= 1`; with `lambda = ||f||`
    /// the system `(f / lambda, lambda w)` has the same solution and a unit norm
    /// field, so the bounds are evaluated on the dilated lift.
    pub fn rough_apriori(&self, lifted: &LiftedSeries, xi: &[f64], p: f64, k: usize, l: usize) -> Result<[Certificate; 2]> {
        expect_regime(p, Regime::Rough)?;
        let w = lifted.base();
        let n = w.horizon();
        let c = constants(p, n.max(1))?;
        let x = solve(self.field, w, xi)?;
        let f = self.effective_norm(2);
        let lambda = if f > 0.0 && f.is_finite() { f } else { 1.0 };
        let hom = if f == 0.0 { 0.0 } else { homogeneous_norm(&lifted.dilated(lambda), p, k, l, self.norm)? };
        let view = RemainderView::new(self.field, w, &x, Regime::Young, None)?;
        let i = TriangularArray::par_from_fn(n, ValueShape::Vector(x.dim()), |a, b, out| view.i(a, b, out));
        let (x_bound, i_bound) = if f.is_finite() { rough_apriori_bounds(&c, hom) } else { (f64::INFINITY, f64::INFINITY) };

        let mut inputs = self.digest(p, n, [k, l], 2);
        inputs.measured.insert("rescaling".into(), Real(lambda));
        inputs.measured.insert("homogeneous_norm_rescaled".into(), Real(hom));
        let mut first = self.skeleton(CertificateRegime::Rough, "rough_apriori_path", "||x||_p on [k, l]", inputs.clone());
        first.bound_value = Real(x_bound);
        first.observed = Real(pvar(&x, p, k, l, self.norm)?);
        first.constants = Some(c);
        let mut second = self.skeleton(CertificateRegime::Rough, "rough_apriori_remainder", "||I||_{p/2} on [k, l]", inputs);
        second.bound_value = Real(i_bound);
        second.observed = Real(pvar(&i, p / 2.0, k, l, self.norm)?);
        second.constants = Some(c);
        Ok([first.finish(), second.finish()])
    }

    /// `sup_k |x_k - x~_k| <= 2 c' e^{c ||f||^p (|||W|||^p + |||W~|||^p)} (|xi - xi~| + ||f|| rho_p)`
    /// for `2 <= p < 3`, `||f||` the `C^3_b` norm. Certified with the proof's
    /// `c'`; the stated `c'` is attached as an alternative.
    pub fn rough_stability(
        &self,
        (lifted, xi): (&LiftedSeries, &[f64]),
        (lifted2, xi2): (&LiftedSeries, &[f64]),
        p: f64,
    ) -> Result<Certificate> {
        expect_regime(p, Regime::Rough)?;
        let (w, w2) = (lifted.base(), lifted2.base());
        w.check_compatible(w2)?;
        let n = w.horizon();
        let c = constants(p, n.max(1))?;
        let x = solve(self.field, w, xi)?;
        let x2 = solve(self.field, w2, xi2)?;
        let f = self.effective_norm(3);
        let hom = homogeneous_norm(lifted, p, 0, n, self.norm)?;
        let tilde_hom = homogeneous_norm(lifted2, p, 0, n, self.norm)?;
        let rho = rho_p(lifted, lifted2, p, self.norm)?;
        let dxi = self.norm.dist(xi, xi2);
        let mut inputs = self.digest(p, n, [0, n], 3);
        inputs.measured.insert("homogeneous_norm".into(), Real(hom));
        inputs.measured.insert("tilde_homogeneous_norm".into(), Real(tilde_hom));
        inputs.measured.insert("rho_p".into(), Real(rho));
        inputs.measured.insert("xi_distance".into(), Real(dxi));
        let mut cert = self.skeleton(CertificateRegime::Rough, "rough_stability", "sup_k |x_k - x~_k|", inputs);
        cert.bound_value = Real(rough_stability_bound(&c, c.c_prime_proof, f, hom, tilde_hom, dxi, rho));
        cert.observed = Real(self.sup_distance(&x, &x2));
        cert.alternatives.push(AlternativeBound {
            label: "stated c' = 2^{1-2/p} c^{1/p}".into(),
            bound_value: Real(rough_stability_bound(&c, c.c_prime_statement, f, hom, tilde_hom, dxi, rho)),
            holds: false,
        });
        cert.constants = Some(c);
        Ok(cert.finish())
    }

    /// Dispatches to the Young or rough stability certificate by `p`.
    pub fn stability(
        &self,
        (w, xi): (&TimeSeries, &[f64]),
        (w2, xi2): (&TimeSeries, &[f64]),
        p: f64,
    ) -> Result<Certificate> {
        match Regime::for_p(p)? {
            Regime::Young => self.young_stability((w, xi), (w2, xi2), p),
            Regime::Rough => {
                let (a, b) = (lift(w)?, lift(w2)?);
                self.rough_stability((&a, xi), (&b, xi2), p)
            }
        }
    }
}

fn expect_regime(p: f64, regime: Regime) -> Result<()> {
    let found = Regime::for_p(p)?;
    if found == regime {
        Ok(())
    } else {
        Err(Error::WrongRegime {
            p,
            regime: match regime {
                Regime::Young => "[1, 2)",
                Regime::Rough => "[2, 3)",
            },
        })
    }
}

/// `solve(f / lambda, lambda w, xi)`: identical to `solve(f, w, xi)` up to rounding.
pub fn solve_rescaled(field: &dyn VectorField, w: &TimeSeries, xi: &[f64], lambda: f64) -> Result<TimeSeries> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("rescaling factor must be positive, got {lambda}")));
    }
    solve(&ScaledField::new(field, 1.0 / lambda), &w.scaled(lambda), xi)
}
