use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use roughnet::bounds::{Certificate, Certifier};
use roughnet::cde::{embed_resnet, project, resnet_forward, solve, tanh_matvec, Sigma};
use roughnet::lift::lift;
use roughnet::pvar::pvar_grid;
use roughnet::{Norm, TimeSeries};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::fields::{build_field, load_matrices};
use crate::weights::WeightFile;

/// Inclusive grid `A:B:STEP`. Points are rounded to the number of decimals
/// written in the argument so that `1:3:0.05` yields `1.15`, not `1.1500000000000001`.
pub fn parse_grid(arg: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = arg.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        return Err(CliError::input(format!("p-grid must be A:B:STEP, got `{arg}`")));
    };
    let num = |s: &str| -> CliResult<f64> {
        s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::input(format!("bad number `{s}` in p-grid")))
    };
    let (lo, hi, h) = (num(a)?, num(b)?, num(step)?);
    if !(h > 0.0) {
        return Err(CliError::input("p-grid STEP must be positive"));
    }
    if hi < lo {
        return Err(CliError::input("p-grid needs A <= B"));
    }
    let decimals = [a, b, step].iter().map(|s| s.trim().split_once('.').map_or(0, |(_, f)| f.len())).max().unwrap_or(0);
    let count = ((hi - lo) / h + 1e-9).floor() as usize + 1;
    let unit = 10f64.powi(decimals.min(15) as i32);
    Ok((0..count).map(|i| ((lo + i as f64 * h) * unit).round() / unit).collect())
}

pub fn parse_vector(arg: &str) -> CliResult<Vec<f64>> {
    arg.split(',')
        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::input(format!("bad number `{s}`"))))
        .collect()
}

pub fn parse_interval(arg: &str, horizon: usize) -> CliResult<(usize, usize)> {
    let (k, l) = arg.split_once(',').ok_or_else(|| CliError::input(format!("interval must be k,l, got `{arg}`")))?;
    let idx = |s: &str| s.trim().parse::<usize>().map_err(|_| CliError::input(format!("bad index `{s}`")));
    let (k, l) = (idx(k)?, idx(l)?);
    if k > l || l > horizon {
        return Err(CliError::input(format!("interval [{k}, {l}] outside 0..={horizon}")));
    }
    Ok((k, l))
}

pub struct PvarOptions<'a> {
    pub grid: &'a str,
    pub interval: Option<&'a str>,
    pub lifted: bool,
    pub allow_quasinorm: bool,
    pub norm: Norm,
}

/// CSV rows `p,value,norm_kind`. With `lifted`, exponents `p >= 2` use
/// `||w||_p + ||W||_{p/2}^{1/2}` and are tagged `homogeneous`.
pub fn pvar_csv(file: &WeightFile, opts: &PvarOptions<'_>) -> CliResult<String> {
    let grid = parse_grid(opts.grid)?;
    if grid[0] < 1.0 && !opts.allow_quasinorm {
        return Err(CliError::regime(format!(
            "p = {} < 1 gives a quasi-norm; pass --allow-quasinorm to compute it anyway",
            grid[0]
        )));
    }
    if grid[0] <= 0.0 {
        return Err(CliError::input("p-grid values must be positive"));
    }
    let w = file.to_series()?;
    let (k, l) = match opts.interval {
        Some(s) => parse_interval(s, w.horizon())?,
        None => (0, w.horizon()),
    };
    let first = pvar_grid(&w, &grid, k, l, opts.norm)?;
    let rough: Vec<f64> = if opts.lifted { grid.iter().copied().filter(|&p| p >= 2.0).collect() } else { Vec::new() };
    let second: Vec<f64> = if rough.is_empty() || w.horizon() == 0 {
        vec![0.0; rough.len()]
    } else {
        let halves: Vec<f64> = rough.iter().map(|p| p / 2.0).collect();
        pvar_grid(lift(&w)?.second_level(), &halves, k, l, opts.norm)?.into_iter().map(|(_, v)| v).collect()
    };
    let mut out = String::from("p,value,norm_kind\n");
    let mut lifted_values = second.into_iter();
    for (p, v) in first {
        if opts.lifted && p >= 2.0 {
            let s = lifted_values.next().expect("one lifted value per rough exponent");
            writeln!(out, "{p},{},homogeneous", v + s.sqrt()).unwrap();
        } else {
            writeln!(out, "{p},{v},pvar").unwrap();
        }
    }
    Ok(out)
}

pub fn solve_csv(file: &WeightFile, field: &str, matrices: Option<&Path>, x0: &str) -> CliResult<String> {
    let f = build_field(field, file, matrices)?;
    let xi = parse_vector(x0)?;
    if xi.len() != f.state_dim() {
        return Err(CliError::input(format!("--x0 has {} entries, the state has dimension {}", xi.len(), f.state_dim())));
    }
    let x = solve(f.as_ref(), &file.to_series()?, &xi)?;
    let mut out = String::from("k");
    for i in 0..x.dim() {
        write!(out, ",x{i}").unwrap();
    }
    out.push('\n');
    for (k, point) in x.points().enumerate() {
        write!(out, "{k}").unwrap();
        for v in point {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub struct CertifyOptions<'a> {
    pub field: &'a str,
    pub matrices: Option<&'a Path>,
    pub p: f64,
    pub x0: Option<&'a str>,
    pub perturb_x0: f64,
    pub norm: Norm,
}

/// Stability certificate for `(w, x0)` against `(w~, x0 + eps)`, where `w~`
/// is the second file or `w` itself.
pub fn certify(file: &WeightFile, other: Option<&WeightFile>, opts: &CertifyOptions<'_>) -> CliResult<Certificate> {
    if !(1.0..3.0).contains(&opts.p) {
        return Err(CliError::regime(format!("p = {} is outside [1, 3); no estimate applies", opts.p)));
    }
    if !opts.perturb_x0.is_finite() {
        return Err(CliError::input("--perturb-x0 must be finite"));
    }
    let other = other.unwrap_or(file);
    if other.d != file.d || other.n != file.n || other.m != file.m {
        return Err(CliError::input(format!(
            "second input has N = {}, d = {}, m = {:?}; expected N = {}, d = {}, m = {:?}",
            other.n, other.d, other.m, file.n, file.d, file.m
        )));
    }
    let f = build_field(opts.field, file, opts.matrices)?;
    let xi = match opts.x0 {
        Some(s) => parse_vector(s)?,
        None => vec![1.0; f.state_dim()],
    };
    if xi.len() != f.state_dim() {
        return Err(CliError::input(format!("--x0 has {} entries, the state has dimension {}", xi.len(), f.state_dim())));
    }
    let xi2: Vec<f64> = xi.iter().map(|v| v + opts.perturb_x0).collect();
    let (w, w2) = (file.to_series()?, other.to_series()?);
    let certifier = Certifier::new(f.as_ref(), opts.norm)?;
    let mut cert = certifier.stability((&w, &xi), (&w2, &xi2), opts.p)?;
    if opts.x0.is_none() {
        cert.notes.push("initial condition defaulted to the all-ones vector".into());
    }
    Ok(cert)
}

fn load_theta(path: &Path) -> CliResult<Vec<DMatrix<f64>>> {
    let mats = load_matrices(path)?;
    if mats.is_empty() {
        return Err(CliError::input("theta file holds no matrices"));
    }
    if mats.iter().any(|a| a.shape() != mats[0].shape()) {
        return Err(CliError::input("theta matrices must share one shape"));
    }
    Ok(mats)
}

/// Embeds `y_{k+1} = y_k + sigma(y_k, theta_k)` and checks the projection of
/// the embedded solution against the direct recursion before returning.
pub fn embed(theta_path: &Path, sigma: &str, y0: &str) -> CliResult<WeightFile> {
    let sigma_fn: Sigma = match sigma {
        "tanh-matvec" => tanh_matvec(),
        other => return Err(CliError::input(format!("unknown sigma `{other}`; supported: tanh-matvec"))),
    };
    let theta = load_theta(theta_path)?;
    let y0 = parse_vector(y0)?;
    let m = theta[0].nrows();
    if y0.len() != m {
        return Err(CliError::input(format!("--y0 has {} entries, theta matrices are {m} x {m}", y0.len())));
    }
    let e = embed_resnet(sigma_fn.clone(), &theta, &y0)?;
    let x = solve(&e.field, &e.w, &e.x0)?;
    let y = project(&x, m)?;
    let direct = resnet_forward(&sigma_fn, &theta, &y0)?;
    let discrepancy = max_gap(&y, &direct);
    let scale = direct.as_flat().iter().fold(1.0f64, |a, b| a.max(b.abs()));
    if !(discrepancy <= 1e-10 * scale) {
        return Err(CliError::violation(format!("embedded solution differs from the direct recursion by {discrepancy:e}")));
    }
    let mut meta = BTreeMap::new();
    meta.insert("convention".into(), Value::from("flattened-plus-time-ramp"));
    meta.insert("sigma".into(), Value::from(sigma));
    meta.insert("y0".into(), Value::from(y0));
    meta.insert("x0".into(), Value::from(e.x0.clone()));
    meta.insert("max_discrepancy".into(), Value::from(discrepancy));
    Ok(WeightFile::from_series(&e.w, Some(m), meta))
}

fn max_gap(a: &TimeSeries, b: &TimeSeries) -> f64 {
    a.as_flat().iter().zip(b.as_flat()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
