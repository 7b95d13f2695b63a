//! Solve, evolve and sweep commands.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use twophase::field::{evolve as run_evolve, evolve_residual, inverse_tangential_transform, norms, tangential_transform, EvolveOptions, RandomData, ACTIVE_TOL};
use twophase::mode::{eval_mode_solution, residual_report, solve_coefficients, BoundaryDataHat, ModeSolution, ResidualReport};
use twophase::regions::{region_contains, uniqueness_predicates};
use twophase::symbols::{det_bound_ratio, det_l, MultiplierGrid};
use twophase::{PhysicalParams, RegionCase, SpectralPoint, C64};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{complex_columns, OutputDir};

pub const MODE_RESIDUAL_TOL: f64 = 1e-8;
pub const EVOLVE_RESIDUAL_TOL: f64 = 1e-5;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// What a command leaves behind: pass/fail and a one-line summary.
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

/// Why `pt` is not in the admissible region, or `None` if it is.
pub fn region_diagnostic(pt: &SpectralPoint, p: &PhysicalParams) -> Option<String> {
    if region_contains(pt, p) {
        return None;
    }
    let l = pt.lambda;
    let mut why = vec![];
    if l.norm() < p.lambda0 {
        why.push(format!("|lambda| = {:.6} is below lambda0 = {}", l.norm(), p.lambda0));
    }
    match pt.case {
        RegionCase::C1 => {
            let theta = std::f64::consts::PI - p.eps;
            if l.arg().abs() > theta {
                why.push(format!("|arg lambda| = {:.6} exceeds pi - eps = {theta:.6}", l.arg().abs()));
            }
            let c = p.coupling() + p.eps;
            if (l.re + c).powi(2) + l.im * l.im < c * c {
                why.push(format!("lambda lies in the excluded disc of radius {c:.6} centred at -{c:.6}"));
            }
        }
        RegionCase::C2 => why.push(format!("case C2 needs Re lambda >= |Re delta / Im delta| |Im lambda| for delta = {}", pt.delta)),
        RegionCase::C3 => why.push(format!("case C3 needs Re lambda >= lambda0 |Im lambda| (lambda0 = {})", p.lambda0)),
    }
    Some(format!("lambda = {l} is outside the admissible region for case {}: {}", pt.case, why.join("; ")))
}

pub fn spectral_point(cfg: &RunConfig, lambda: C64, xi: &[f64]) -> Result<SpectralPoint, CliError> {
    let pt = SpectralPoint::new(lambda, xi, cfg.case, &cfg.params, cfg.delta)?;
    match region_diagnostic(&pt, &cfg.params) {
        Some(msg) => Err(CliError::Precondition(msg)),
        None => Ok(pt),
    }
}

/// Unit normal stress `h = e_N`, `k = 0`.
pub fn unit_normal_data(n: usize) -> BoundaryDataHat {
    let mut d = BoundaryDataHat::zeros(n);
    d.h[n - 1] = C64::new(1.0, 0.0);
    d
}

fn read_data(path: &Path, n: usize) -> Result<BoundaryDataHat, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read data file {}: {e}", path.display())))?;
    let d: BoundaryDataHat = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("schema error in {}: {e}", path.display())))?;
    if d.h.len() != n || d.k.len() != n {
        return Err(CliError::Usage(format!("data file {}: h and k need {n} components, got {} and {}", path.display(), d.h.len(), d.k.len())));
    }
    Ok(d)
}

fn push_complex(row: &mut Vec<f64>, vs: &[C64]) {
    for v in vs {
        row.push(v.re);
        row.push(v.im);
    }
}

fn velocity_columns(n: usize) -> Vec<String> {
    (1..=n).flat_map(|c| complex_columns(&format!("v{c}"))).collect()
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Serialize)]
struct ModeReport<'a> {
    point: &'a SpectralPoint,
    data: &'a BoundaryDataHat,
    coefficients: Vec<C64>,
    residual: &'a ResidualReport,
    tol: f64,
    pass: bool,
}

pub fn solve_mode(cfg: &RunConfig, out: &Path, lambda: Option<C64>, xi: Option<Vec<f64>>, data: Option<&Path>) -> Result<Outcome, CliError> {
    let xi = xi.unwrap_or_else(|| cfg.mode.xi.clone());
    let pt = spectral_point(cfg, lambda.unwrap_or(cfg.mode.lambda), &xi)?;
    let n = pt.dim();
    let data = match data {
        Some(p) => read_data(p, n)?,
        None => unit_normal_data(n),
    };
    let p = &cfg.params;
    let coeffs = solve_coefficients(&pt, p, &data)?;
    let sol = eval_mode_solution(&coeffs, &pt, p)?;
    let res = residual_report(&sol)?;
    let tol = cfg.tol_or(MODE_RESIDUAL_TOL);
    let pass = res.normalized <= tol;

    let mut dir = OutputDir::create(out, "solve-mode", cfg)?;
    let np = cfg.mode.profile_points;
    let mut header = vec!["x".to_string()];
    header.extend(velocity_columns(n));
    let upper: Vec<Vec<f64>> = uniform(0.0, res.upper_extent, np)
        .into_iter()
        .map(|x| {
            let mut row = vec![x];
            push_complex(&mut row, &sol.v_plus(x)?.value);
            Ok(row)
        })
        .collect::<twophase::Result<_>>()?;
    dir.csv("profile_upper.csv", &header, &upper)?;
    header.extend(complex_columns("p"));
    let lower: Vec<Vec<f64>> = uniform(-p.b, 0.0, np)
        .into_iter()
        .map(|x| {
            let mut row = vec![x];
            push_complex(&mut row, &sol.v_minus(x)?.value);
            push_complex(&mut row, &sol.p_minus(x)?[..1]);
            Ok(row)
        })
        .collect::<twophase::Result<_>>()?;
    dir.csv("profile_lower.csv", &header, &lower)?;
    dir.json("residual.json", &ModeReport { point: &pt, data: &data, coefficients: coeffs.to_vec(), residual: &res, tol, pass })?;
    dir.finish(cfg, Some(pass))?;
    Ok(Outcome { pass, summary: format!("normalized residual {:.3e} (tol {tol:e})", res.normalized) })
}

/// Real interface stress `h_c(x) = sum_k a cos(k x') + b sin(k x')` with
/// harmonics `1..=max_harmonic` of the periodic grid and coefficients drawn from `seed`.
pub fn random_interface_stress(m: usize, max_harmonic: i32, seed: u64) -> [Vec<f64>; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = [vec![0.0; m], vec![0.0; m]];
    for comp in h.iter_mut() {
        for k in 1..=max_harmonic {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for (j, v) in comp.iter_mut().enumerate() {
                let th = std::f64::consts::TAU * (k as f64) * j as f64 / m as f64;
                *v += a * th.cos() + b * th.sin();
            }
        }
    }
    h
}

#[derive(Serialize)]
struct FieldReport {
    lambda: C64,
    active_modes: Vec<usize>,
    worst_mode_residual: f64,
    tol: f64,
    pass: bool,
}

/// Resolvent field at one `lambda` on the periodic tangential grid (`N = 2`):
/// every active tangential mode of a random interface stress is solved in closed form.
pub fn solve_field(cfg: &RunConfig, out: &Path, lambda: Option<C64>) -> Result<Outcome, CliError> {
    let grid = cfg.field.grid;
    if 2 * cfg.field.max_harmonic as usize >= grid.m {
        return Err(CliError::Usage(format!("field.max_harmonic {} is not resolved by m = {}", cfg.field.max_harmonic, grid.m)));
    }
    let lambda = lambda.unwrap_or(cfg.mode.lambda);
    spectral_point(cfg, lambda, &[1.0])?;
    let p = cfg.params;
    let h = random_interface_stress(grid.m, cfg.field.max_harmonic, cfg.seed);
    let amps: Vec<Vec<C64>> = h.iter().map(|c| tangential_transform(&c.iter().map(|v| C64::new(*v, 0.0)).collect::<Vec<_>>())).collect::<twophase::Result<_>>()?;
    let peak = amps.iter().flatten().map(|a| a.norm()).fold(0.0, f64::max);
    let xis = grid.xis();
    let active: Vec<usize> = (0..grid.m).filter(|&k| xis[k] != 0.0 && amps.iter().any(|a| a[k].norm() > ACTIVE_TOL * peak)).collect();
    let solved: Vec<(usize, ModeSolution, f64)> = active
        .par_iter()
        .map(|&k| {
            let pt = SpectralPoint::new(lambda, &[xis[k]], cfg.case, &p, cfg.delta)?;
            let data = BoundaryDataHat { h: vec![amps[0][k], amps[1][k]], k: vec![ZERO; 2] };
            let sol = eval_mode_solution(&solve_coefficients(&pt, &p, &data)?, &pt, &p)?;
            let r = residual_report(&sol)?.normalized;
            Ok((k, sol, r))
        })
        .collect::<twophase::Result<_>>()?;
    let worst = solved.iter().map(|s| s.2).fold(0.0, f64::max);
    let tol = cfg.tol_or(MODE_RESIDUAL_TOL);
    let pass = worst <= tol;

    // synthesize v(x, z) column by column
    let np = cfg.mode.profile_points;
    let xs = grid.xs();
    let synth = |zs: &[f64], upper: bool| -> twophase::Result<Vec<Vec<f64>>> {
        let ncol = if upper { 2 } else { 3 };
        let mut rows = vec![];
        for &z in zs {
            let mut hats = vec![vec![ZERO; grid.m]; ncol];
            for (k, sol, _) in &solved {
                let v = if upper { sol.v_plus(z)?.value } else { sol.v_minus(z)?.value };
                hats[0][*k] = v[0];
                hats[1][*k] = v[1];
                if !upper {
                    hats[2][*k] = sol.p_minus(z)?[0];
                }
            }
            let cols: Vec<Vec<C64>> = hats.iter().map(|h| inverse_tangential_transform(h)).collect::<twophase::Result<_>>()?;
            for (j, x) in xs.iter().enumerate() {
                let mut row = vec![*x, z];
                push_complex(&mut row, &cols.iter().map(|c| c[j]).collect::<Vec<_>>());
                rows.push(row);
            }
        }
        Ok(rows)
    };
    let upper = synth(&uniform(0.0, grid.x_max, np), true)?;
    let lower = synth(&uniform(-p.b, 0.0, np), false)?;

    let mut dir = OutputDir::create(out, "solve-field", cfg)?;
    let mut header = vec!["x".to_string(), "z".to_string()];
    header.extend(velocity_columns(2));
    dir.csv("field_upper.csv", &header, &upper)?;
    header.extend(complex_columns("p"));
    dir.csv("field_lower.csv", &header, &lower)?;
    let stress: Vec<Vec<f64>> = xs.iter().enumerate().map(|(j, x)| vec![*x, h[0][j], h[1][j]]).collect();
    dir.csv("interface_stress.csv", &["x".into(), "h1".into(), "h2".into()], &stress)?;
    dir.json("residual.json", &FieldReport { lambda, active_modes: active.clone(), worst_mode_residual: worst, tol, pass })?;
    dir.finish(cfg, Some(pass))?;
    Ok(Outcome { pass, summary: format!("{} active modes, worst mode residual {worst:.3e} (tol {tol:e})", active.len()) })
}

#[derive(Serialize)]
struct EvolveReport<'a> {
    data: &'a RandomData,
    gamma: f64,
    active_modes: &'a [usize],
    closed_form_solves: usize,
    fd_solves: usize,
    imag_ratio: f64,
    residual: &'a twophase::mode::Checker,
    worst_residual: f64,
    norms: &'a twophase::field::NormBundle,
    tol: f64,
    pass: bool,
}

pub fn evolve(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let grid = cfg.field.grid;
    let gamma = cfg.field.gamma;
    let rd = RandomData::draw(cfg.seed, cfg.field.interior, cfg.field.max_harmonic);
    let data = rd.sample(&grid);
    let res = run_evolve(&data, &grid, &cfg.params, &EvolveOptions::new(gamma))?;
    let nb = norms(&res, gamma)?;
    let chk = evolve_residual(&res, &data)?;
    let worst = chk.worst();
    let tol = cfg.tol_or(EVOLVE_RESIDUAL_TOL);
    let pass = worst <= tol && nb.ratio.is_finite();

    let mut dir = OutputDir::create(out, "evolve", cfg)?;
    let mut header = vec!["t".to_string(), "x".to_string()];
    header.extend(velocity_columns(2));
    let (ts, xs) = (grid.times(), grid.xs());
    let (v1, v2) = (res.interface_velocity(0), res.interface_velocity(1));
    let rows: Vec<Vec<f64>> = (0..grid.n_t)
        .flat_map(|it| xs.iter().enumerate().map(move |(ix, x)| (it, ix, *x)))
        .map(|(it, ix, x)| {
            let i = it * grid.m + ix;
            vec![ts[it], x, v1[i].re, v1[i].im, v2[i].re, v2[i].im]
        })
        .collect();
    dir.csv("interface_velocity.csv", &header, &rows)?;
    dir.json(
        "evolve.json",
        &EvolveReport {
            data: &rd,
            gamma,
            active_modes: &res.active_modes,
            closed_form_solves: res.closed_form_solves,
            fd_solves: res.fd_solves,
            imag_ratio: res.imag_ratio,
            residual: &chk,
            worst_residual: worst,
            norms: &nb,
            tol,
            pass,
        },
    )?;
    dir.finish(cfg, Some(pass))?;
    Ok(Outcome { pass, summary: format!("residual {worst:.3e} (tol {tol:e}), norm ratio {:.4}", nb.ratio) })
}

#[derive(Serialize)]
struct SweepSummary {
    points: usize,
    failures: usize,
    min_det_ratio: f64,
    worst_residual: f64,
    uniqueness_failures: usize,
    tol: f64,
    pass: bool,
}

/// Determinant bound, closed-form residual and uniqueness predicates over a
/// tensor grid of region points.
pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let p = cfg.params;
    let s = &cfg.sweep;
    let pts = MultiplierGrid::tensor(&p, cfg.case, cfg.delta_or_zero(), s.n_lambda, s.lambda_max, s.n_a, s.a_range);
    let data = unit_normal_data(2);
    let rows: Vec<(Vec<f64>, bool, bool)> = pts
        .par_iter()
        .map(|pt| {
            let det = det_l(pt, &p);
            let ratio = det_bound_ratio(pt, &p);
            let resid = solve_coefficients(pt, &p, &data).and_then(|c| eval_mode_solution(&c, pt, &p)).and_then(|s| residual_report(&s)).map(|r| r.normalized);
            let unique = uniqueness_predicates(pt, &p).all_satisfied();
            let ok = det.is_ok() && ratio.is_ok() && resid.is_ok();
            let d = det.unwrap_or(C64::new(f64::NAN, f64::NAN));
            let row = vec![pt.lambda.re, pt.lambda.im, pt.a(), d.re, d.im, ratio.unwrap_or(f64::NAN), resid.unwrap_or(f64::NAN), if unique { 1.0 } else { 0.0 }];
            (row, ok, unique)
        })
        .collect();
    let tol = cfg.tol_or(MODE_RESIDUAL_TOL);
    let failures = rows.iter().filter(|r| !r.1).count();
    let uniqueness_failures = rows.iter().filter(|r| !r.2).count();
    let min_det_ratio = rows.iter().map(|r| r.0[5]).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let worst_residual = rows.iter().map(|r| r.0[6]).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let pass = failures == 0 && uniqueness_failures == 0 && worst_residual <= tol;

    let mut dir = OutputDir::create(out, "sweep", cfg)?;
    let header: Vec<String> = ["lambda_re", "lambda_im", "a", "det_re", "det_im", "det_ratio", "residual", "unique"].iter().map(|s| s.to_string()).collect();
    dir.csv("sweep.csv", &header, &rows.into_iter().map(|r| r.0).collect::<Vec<_>>())?;
    dir.json("sweep.json", &SweepSummary { points: pts.len(), failures, min_det_ratio, worst_residual, uniqueness_failures, tol, pass })?;
    dir.finish(cfg, Some(pass))?;
    Ok(Outcome { pass, summary: format!("{} points, min det ratio {min_det_ratio:.4e}, worst residual {worst_residual:.3e}, {failures} solve failures, {uniqueness_failures} uniqueness failures", pts.len()) })
}
