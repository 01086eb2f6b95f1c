//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use roughnet::cde::{solve, Activation, ActivationField, ActivationLayer, Regime, RemainderView, SecondOrderFields, VectorField};
use roughnet::lift::lift;
use roughnet::pvar::{pvar_control, Control};
use roughnet::sewing::{check_generalized_sewing, check_sewing_bound, GronwallInput, SewingBudget, SewingReport};
use roughnet::{Norm, TimeSeries, TriangularArray, ValueShape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random walk from the origin with `N(0, step^2)` increments.
pub fn random_walk(rng: &mut ChaCha8Rng, horizon: usize, dim: usize, step: f64) -> TimeSeries {
    let normal = Normal::new(0.0, step).unwrap();
    let mut data = vec![0.0; dim];
    for k in 0..horizon {
        for i in 0..dim {
            let next = data[k * dim + i] + normal.sample(rng);
            data.push(next);
        }
    }
    TimeSeries::from_flat(dim, data).unwrap()
}

/// Gaussian entries, any scale.
pub fn random_points(rng: &mut ChaCha8Rng, horizon: usize, dim: usize, scale: f64) -> TimeSeries {
    let normal = Normal::new(0.0, scale).unwrap();
    TimeSeries::from_flat(dim, (0..(horizon + 1) * dim).map(|_| normal.sample(rng)).collect()).unwrap()
}

/// `w + eps * noise`, noise being a standard random walk.
pub fn perturb(rng: &mut ChaCha8Rng, w: &TimeSeries, eps: f64) -> TimeSeries {
    let noise = random_walk(rng, w.horizon(), w.dim(), 1.0);
    TimeSeries::from_flat(w.dim(), w.as_flat().iter().zip(noise.as_flat()).map(|(a, b)| a + eps * b).collect()).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, scale).unwrap();
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// `d` fields `B sigma(A x + b)` on `R^m` with `hidden` units each.
pub fn random_activation_field(rng: &mut ChaCha8Rng, act: Activation, m: usize, d: usize, hidden: usize) -> ActivationField {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let layers = (0..d)
        .map(|_| {
            let inner = DMatrix::from_fn(hidden, m, |_, _| normal.sample(rng));
            let bias = DVector::from_fn(hidden, |_, _| 0.5 * normal.sample(rng));
            let outer = DMatrix::from_fn(m, hidden, |_, _| normal.sample(rng) / (hidden as f64).sqrt());
            ActivationLayer::new(inner, bias, outer).unwrap()
        })
        .collect();
    ActivationField::new(act, layers).unwrap()
}

pub fn random_tanh_field(rng: &mut ChaCha8Rng, m: usize, d: usize) -> ActivationField {
    random_activation_field(rng, Activation::Tanh, m, d, 3)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Exhaustive p-variation: every increasing sequence from `k` to `l`
/// (both endpoints fixed), `2^{l-k-1}` of them.
pub fn brute_pvar(x: &TimeSeries, p: f64, k: usize, l: usize, norm: Norm) -> f64 {
    if k == l {
        return 0.0;
    }
    let interior = l - k - 1;
    let mut best: f64 = 0.0;
    for mask in 0u64..(1u64 << interior) {
        let mut prev = k;
        let mut total = 0.0;
        for bit in 0..interior {
            if mask & (1 << bit) != 0 {
                let t = k + 1 + bit;
                total += norm.dist(x.point(t), x.point(prev)).powf(p);
                prev = t;
            }
        }
        total += norm.dist(x.point(l), x.point(prev)).powf(p);
        best = best.max(total);
    }
    best.powf(1.0 / p)
}

/// Iterated sums computed straight from the definition, for cross-checking the lift.
pub fn brute_second_level(w: &TimeSeries, k: usize, l: usize, mu: usize, nu: usize) -> f64 {
    (k..l).map(|j| (w.point(j)[mu] - w.point(k)[mu]) * (w.point(j + 1)[nu] - w.point(j)[nu])).sum()
}

pub fn sup_distance(a: &TimeSeries, b: &TimeSeries, norm: Norm) -> f64 {
    a.points().zip(b.points()).map(|(x, y)| norm.dist(x, y)).fold(0.0, f64::max)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn component_arrays(view: &RemainderView<'_>, n: usize, m: usize, d: usize) -> Vec<TriangularArray> {
    (0..d)
        .map(|mu| TriangularArray::par_from_fn(n, ValueShape::Vector(m), |k, l, out| view.j(k, l, mu, out)))
        .collect()
}

/// Young germ `sum_mu f_mu(x_k) w^mu_{k,l}` of a random tanh system, checked
/// against the budget `(L ||x||_{p;[k,l]})^{1/p}`-by-`||w||_{p;[l,m]}`, where
/// `L` is the Lipschitz constant of the fields in the dual norm.
pub fn young_sewing_report(seed: u64, p: f64, n: usize) -> SewingReport {
    let mut rng = rng(seed);
    let norm = Norm::L2;
    let field = random_tanh_field(&mut rng, 2, 2);
    let step = uniform(&mut rng, 0.05, 0.6);
    let w = random_walk(&mut rng, n, 2, step);
    let xi = random_vector(&mut rng, 2, 1.0);
    let x = solve(&field, &w, &xi).unwrap();
    let view = RemainderView::new(&field, &w, &x, Regime::Young, None).unwrap();
    let germ = TriangularArray::par_from_fn(n, ValueShape::Vector(2), |k, l, out| view.germ(k, l, out));
    let bounds = field.derivative_bounds(norm).unwrap();
    let lip = norm.dual_factor(2) * bounds.sup[1];
    let omega = pvar_control(&x, p, norm).unwrap().scaled(lip.powf(p)).unwrap();
    let omega_tilde = pvar_control(&w, p, norm).unwrap();
    let budget = SewingBudget::new(omega, omega_tilde, 1.0 / p, 1.0 / p).unwrap();
    check_sewing_bound(&germ, &budget, norm).unwrap()
}

/// Rough germ with the second-order term. Its three-point defect is
///
/// ```text
/// -sum_nu J^nu_{k,l} w^nu_{l,m} - sum_{mu nu} (F_{mu nu}(x_l) - F_{mu nu}(x_k)) W^{mu nu}_{l,m}
/// ```
///
/// which gives two budgets: `(sum_nu ||J^nu||^{p/2}_{p/2})^{2/p}` against
/// `|w_{l,m}|`, and `Lip(F) |x_{k,l}|` against `|W_{l,m}|`.
pub fn rough_sewing_report(seed: u64, p: f64, n: usize) -> SewingReport {
    let mut rng = rng(seed);
    let norm = Norm::L2;
    let (m, d) = (2, 2);
    let field = random_tanh_field(&mut rng, m, d);
    let step = uniform(&mut rng, 0.05, 0.6);
    let w = random_walk(&mut rng, n, d, step);
    let lifted = lift(&w).unwrap();
    let xi = random_vector(&mut rng, m, 1.0);
    let x = solve(&field, &w, &xi).unwrap();
    let view = RemainderView::new(&field, &w, &x, Regime::Rough, Some(&lifted)).unwrap();
    let germ = TriangularArray::par_from_fn(n, ValueShape::Vector(m), |k, l, out| view.germ(k, l, out));

    let j_control = component_arrays(&view, n, m, d)
        .iter()
        .map(|a| pvar_control(a, p / 2.0, norm).unwrap())
        .reduce(|a, b| a.sum(&b).unwrap())
        .unwrap();
    let w_control = pvar_control(&w, p, norm).unwrap().scaled(norm.dual_factor(d).powf(p)).unwrap();
    let first = SewingBudget::new(j_control, w_control, 2.0 / p, 1.0 / p).unwrap();

    let second_order = SecondOrderFields::new(&field);
    let lip_f = second_order.derivative_bounds(norm).unwrap().sup[1];
    let x_control = pvar_control(&x, p, norm).unwrap().scaled(lip_f.powf(p)).unwrap();
    let lift_control = pvar_control(lifted.second_level(), p / 2.0, norm)
        .unwrap()
        .scaled(norm.dual_factor(d * d).powf(p / 2.0))
        .unwrap();
    let second = SewingBudget::new(x_control, lift_control, 1.0 / p, 2.0 / p).unwrap();
    check_generalized_sewing(&germ, &[first, second], norm).unwrap()
}

/// A sequence built to meet the rough Grönwall hypothesis on every pair:
/// `z_{j+1} = z_j + C G_j (u_{j+1} - u_j) e_j + (v_{j+1} - v_j)` with
/// `G_j = max_{i<=j} |z_i|`, `omega = (u_l - u_k)^kappa` and
/// `omega~ = ||v||^rho_{rho;[k,l]}`. The direction `e_j` follows `z_j` half
/// of the time so the growth term is saturated.
pub fn gronwall_instance(seed: u64) -> GronwallInput {
    let mut rng = rng(seed);
    let norm = Norm::L2;
    let dim = 1 + (seed as usize % 3);
    let n = 20 + (seed as usize % 41);
    let kappa = uniform(&mut rng, 1.0, 3.0);
    let rho = uniform(&mut rng, 1.0, 3.0);
    let c = uniform(&mut rng, 0.2, 2.0);
    let threshold = uniform(&mut rng, 0.05, 2.0);
    // Keep omega_{0,N} / (alpha L) in a range where the exponential stays finite.
    let target = uniform(&mut rng, 0.5, 30.0);
    let growth = (threshold * (2.0 * c * std::f64::consts::E.powi(2)).powf(kappa)).max(1.0);
    let total = (target * threshold / growth).powf(1.0 / kappa);
    let raw: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.0, 1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut u = vec![0.0];
    for r in &raw {
        u.push(u.last().unwrap() + total * r / sum);
    }
    let v_step = uniform(&mut rng, 0.0, 0.3);
    let v = random_walk(&mut rng, n, dim, v_step);
    let saturate = seed.is_multiple_of(2);

    let mut z = if seed.is_multiple_of(5) { vec![0.0; dim] } else { random_vector(&mut rng, dim, 1.0) };
    let mut g = norm.of(&z[..dim]);
    for j in 0..n {
        let zj = z[j * dim..(j + 1) * dim].to_vec();
        let size = norm.of(&zj);
        let dir: Vec<f64> = if saturate && size > 0.0 {
            zj.iter().map(|a| a / size).collect()
        } else {
            let r = random_vector(&mut rng, dim, 1.0);
            let s = norm.of(&r).max(1e-300);
            r.iter().map(|a| a / s).collect()
        };
        let scale = c * g * (u[j + 1] - u[j]);
        for i in 0..dim {
            let next = zj[i] + scale * dir[i] + (v.point(j + 1)[i] - v.point(j)[i]);
            z.push(next);
        }
        g = g.max(norm.of(&z[(j + 1) * dim..]));
    }
    let z = TimeSeries::from_flat(dim, z).unwrap();
    let omega = Control::from_fn(n, |k, l| (u[l] - u[k]).powf(kappa)).unwrap();
    let omega_tilde = pvar_control(&v, rho, norm).unwrap();
    GronwallInput { z, omega, omega_tilde, c, kappa, rho, threshold }
}

/// Inputs for a pair of certificate runs on a random tanh system.
pub struct CertificateInstance {
    pub field: ActivationField,
    pub w: TimeSeries,
    pub xi: Vec<f64>,
    pub w2: TimeSeries,
    pub xi2: Vec<f64>,
    pub k: usize,
    pub l: usize,
}

fn base_instance(rng: &mut ChaCha8Rng, n: usize) -> CertificateInstance {
    let field = random_tanh_field(rng, 2, 2);
    let w = random_walk(rng, n, 2, 1.0);
    let eps = 10f64.powf(uniform(rng, -3.0, -1.0));
    let w2 = perturb(rng, &w, eps);
    let xi = random_vector(rng, 2, 1.0);
    let dxi = 10f64.powf(uniform(rng, -4.0, -1.0));
    let xi2: Vec<f64> = xi.iter().zip(random_vector(rng, 2, 1.0)).map(|(a, b)| a + dxi * b).collect();
    let k = rng.random_range(0..n / 2);
    let l = rng.random_range(k + 1..=n);
    CertificateInstance { field, w, xi, w2, xi2, k, l }
}

impl CertificateInstance {
    pub fn scale_series(mut self, s: f64) -> Self {
        self.w = self.w.scaled(s);
        self.w2 = self.w2.scaled(s);
        self
    }
}

/// Young instance with the weights scaled so the stability exponent
/// `c L^p (||w||^p + ||w~||^p)` lands in `[0.5, 20]`.
pub fn young_instance(seed: u64, p: f64, n: usize) -> CertificateInstance {
    let mut rng = rng(seed);
    let inst = base_instance(&mut rng, n);
    let norm = Norm::L2;
    let cert = roughnet::bounds::Certifier::new(&inst.field, norm).unwrap();
    let l = cert.effective_norm(2);
    let c = roughnet::bounds::constants(p, n).unwrap();
    let a = roughnet::pvar::pvar_total(&inst.w, p, norm).unwrap();
    let b = roughnet::pvar::pvar_total(&inst.w2, p, norm).unwrap();
    let target = uniform(&mut rng, 0.5, 20.0);
    let s = (target / (c.c_young * l.powf(p) * (a.powf(p) + b.powf(p)))).powf(1.0 / p);
    inst.scale_series(s)
}

/// Rough instance for the a priori bounds: `||f|| |||W|||` in `[0.05, 5]`.
pub fn rough_apriori_instance(seed: u64, p: f64, n: usize) -> CertificateInstance {
    let mut rng = rng(seed);
    let inst = base_instance(&mut rng, n);
    let norm = Norm::L2;
    let f = roughnet::bounds::Certifier::new(&inst.field, norm).unwrap().effective_norm(2);
    let hom = roughnet::lift::homogeneous_norm(&lift(&inst.w).unwrap(), p, 0, n, norm).unwrap();
    let target = 10f64.powf(uniform(&mut rng, -1.3, 0.7));
    inst.scale_series(target / (f * hom))
}

/// Rough instance with the stability exponent `c ||f||^p (|||W|||^p + |||W~|||^p)` in `[0.5, 20]`.
pub fn rough_stability_instance(seed: u64, p: f64, n: usize) -> CertificateInstance {
    let mut rng = rng(seed);
    let inst = base_instance(&mut rng, n);
    let norm = Norm::L2;
    let f = roughnet::bounds::Certifier::new(&inst.field, norm).unwrap().effective_norm(3);
    let c = roughnet::bounds::constants(p, n).unwrap();
    let h = roughnet::lift::homogeneous_norm(&lift(&inst.w).unwrap(), p, 0, n, norm).unwrap();
    let h2 = roughnet::lift::homogeneous_norm(&lift(&inst.w2).unwrap(), p, 0, n, norm).unwrap();
    let target = uniform(&mut rng, 0.5, 20.0);
    let s = (target / (c.c_rough * f.powf(p) * (h.powf(p) + h2.powf(p)))).powf(1.0 / p);
    inst.scale_series(s)
}

/// 50-digit evaluation of the constants by `oracle/constants.py`, one row per `(p, N)`.
// zeta, c_pn, c_young, a_p, k_p, k_p_prime, l_p, l_p_proof, c_rough, c_prime_statement, c_prime_proof
#[allow(clippy::excessive_precision)]
pub const FROZEN_CONSTANTS: &[(f64, usize, [f64; 11])] = &[
    (1.0, 1, [1.0000000000000000000, 4.0000000000000000000, 147.78112197861300454, 10.000000000000000000, 9.0000000000000000000, 123.00000000000000000, 0.28571428571428571429, 0.33333333333333333333, 3019.6609257629923929, 1509.8304628814961964, 1509.8304628814961964]),
    (1.0, 64, [1.6294305014088875063, 6.5177220056355500253, 222.19547854322608389, 15.035444011271100051, 9.0000000000000000000, 123.00000000000000000, 0.46555157183111071609, 0.54314350046962916877, 3022.7615239531846045, 1511.3807619765923023, 1511.3807619765923023]),
    (1.2, 64, [2.0302591309156290220, 6.4456709603670241276, 776.49164969092130914, 30.661545261141114374, 26.272359019853605651, 1306.3557837718958770, 1.9336407054468045537, 2.1429250074916310934, 231445.72193811669489, 18607.483145002776284, 145801.66848897442625]),
    (1.5, 64, [2.8528840939894315970, 7.1888174458550973409, 6354.9468703003987594, 111.86223308977094082, 100.20638709268830366, 23911.784032041402412, 9.0573424238843347625, 9.5349052913936849304, 355574478.36857847956, 398361.22192151377923, 282219650.50766263351]),
    (1.9, 64, [4.3224807472464647241, 8.9661654230564328446, 140594.20191551857275, 842.73569206037851099, 404.68720299921779071, 473717.21272043631473, 37.825103809064895575, 38.133234473733884670, 17816542605720.938846, 9083932.7655517788084, 17178282746755.967318]),
    (1.5, 1000, [3.3009877393477527505, 8.3179678764982491328, 7870.2388611764186392, 138.53498887229472686, 105.19990120015909810, 26354.078011745440527, 10.479982819949502732, 11.032556678010334276, 411429327.74995092906, 439056.25178172241090, 326551673.84042061451]),
    (2.0, 1, [1.0000000000000000000, 2.0000000000000000000, 14850.696809015233029, 68.000000000000000000, 249.41531628991833027, 186627.00000000000000, 10.583005244258362362, 10.583005244258362362, 13523770490869.199236, 3677467.9455937069032, 13523770490869.199236]),
    (2.0, 32, [4.0584951954365201028, 8.1169903908730402055, 231096.17622768841208, 1058.1685280884043203, 502.46479390870266479, 757415.60735314512766, 42.951075937102059522, 42.951075937102059522, 222751159229803.38750, 14924850.392208405233, 222751159229803.38750]),
    (2.2, 32, [4.6657274575004052901, 8.7615914611403662576, 1077149.9504008502682, 2878.1568307544672575, 837.13447137498447840, 2239126.8043472759914, 68.570194735581357759, 67.615974417189692947, 63609564861374980.976, 46273367.043607083373, 67746800258760781.738]),
    (2.6, 32, [5.9033919232510397550, 10.061509738858632541, 24775605.737092134610, 22543.170031239030778, 1949.2750753861417236, 13376302.724560918466, 143.78481586082909254, 138.75983234157114011, 7.1090972287313916498e+21, 297860203.09685216318, 8.3422445042447536779e+21]),
    (2.9, 500, [19.508878727189283432, 31.465830769551818774, 5656282004.9592514054, 2294225.3356298732454, 6492.2117975272572533, 156794103.44875389438, 633.39135391612584230, 603.80338147715314692, 2.8721795891905524822e+27, 3645624437.7693351280, 3.5615143104657920592e+27]),
];

/// Table fields in the column order of [`FROZEN_CONSTANTS`].
pub fn constant_columns(t: &roughnet::bounds::ConstantsTable) -> [(&'static str, f64); 11] {
    [
        ("zeta", t.zeta),
        ("c_pn", t.c_pn),
        ("c_young", t.c_young),
        ("a_p", t.a_p),
        ("k_p", t.k_p),
        ("k_p_prime", t.k_p_prime),
        ("l_p", t.l_p),
        ("l_p_proof", t.l_p_proof),
        ("c_rough", t.c_rough),
        ("c_prime_statement", t.c_prime_statement),
        ("c_prime_proof", t.c_prime_proof),
    ]
}
