//! `verify` subcommands: the module-level checks with a pass/fail verdict.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use twophase::fd::{compare_oracle, observed_orders, solve_mode_fd, ConvergenceRecord, ModeGrid, ModeSources, OracleError};
use twophase::field::{check_compatibility, evolve, evolve_residual, norms, EvolveOptions, InitialState, RandomData};
use twophase::kernels::{family_lambdas, kernel_bound_check, kernel_operator, rbound_estimate, BoundSamples, KernelKind, KernelMultiplier, KernelOperatorGrid};
use twophase::lagrangian::{log_slope, nonlinear_sources, normal_consistency, perturbation, PressureLaw, SourceInput};
use twophase::mode::{eval_mode_solution, mode_symbols, solve_coefficients, BoundaryDataHat, DET_FLOOR};
use twophase::symbols::{char_roots, det_bound_sweep, det_l, multiplier_check, multiplier_check_family, MultiplierGrid, MultiplierType, SymbolSpec};
use twophase::{SpectralPoint, C64};

use crate::commands::{spectral_point, Outcome, EVOLVE_RESIDUAL_TOL};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputDir;

pub const DETBOUND_STABILITY: f64 = 0.05;
pub const ORACLE_ORDER: (f64, f64) = (1.8, 2.2);
pub const KERNEL_STABILITY: f64 = 0.10;
pub const NONLINEAR_SLOPE: f64 = 1.9;
pub const NORMAL_TOL: f64 = 1e-10;
pub const COMPAT_TOL: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Check {
    Detbound,
    Multipliers,
    Kernels,
    Oracle,
    Evolve,
    Nonlinear,
    Compat,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Detbound => "detbound",
            Check::Multipliers => "multipliers",
            Check::Kernels => "kernels",
            Check::Oracle => "oracle",
            Check::Evolve => "evolve",
            Check::Nonlinear => "nonlinear",
            Check::Compat => "compat",
        }
    }
}

pub fn run(check: Check, cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let mut dir = OutputDir::create(out, &format!("verify {}", check.name()), cfg)?;
    let outcome = match check {
        Check::Detbound => detbound(cfg, &mut dir),
        Check::Multipliers => multipliers(cfg, &mut dir),
        Check::Kernels => kernels(cfg, &mut dir),
        Check::Oracle => oracle(cfg, &mut dir),
        Check::Evolve => evolve_check(cfg, &mut dir),
        Check::Nonlinear => nonlinear(cfg, &mut dir),
        Check::Compat => compat(cfg, &mut dir),
    }?;
    dir.finish(cfg, Some(outcome.pass))?;
    Ok(outcome)
}

#[derive(Serialize)]
struct Verdict<'a, T> {
    pass: bool,
    tol: f64,
    #[serde(flatten)]
    body: &'a T,
}

fn detbound(cfg: &RunConfig, dir: &mut OutputDir) -> Result<Outcome, CliError> {
    let rep = det_bound_sweep(&cfg.params, cfg.case, cfg.delta_or_zero(), cfg.verify.det_samples, cfg.seed)?;
    let tol = cfg.tol_or(DETBOUND_STABILITY);
    let pass = rep.min_ratio > 0.0 && rep.relative_change.abs() < tol;
    let header: Vec<String> = ["lambda_re", "lambda_im", "a", "det_abs", "ratio", "regime"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<f64>> = rep.samples.iter().map(|s| vec![s.lambda.re, s.lambda.im, s.a, s.det_abs, s.ratio, s.regime as f64]).collect();
    dir.csv("detbound_samples.csv", &header, &rows)?;
    #[derive(Serialize)]
    struct Summary {
        samples: usize,
        min_ratio: f64,
        min_by_regime: [f64; 4],
        min_ratio_doubled: f64,
        relative_change: f64,
    }
    let s = Summary { samples: rep.samples.len(), min_ratio: rep.min_ratio, min_by_regime: rep.min_by_regime, min_ratio_doubled: rep.min_ratio_doubled, relative_change: rep.relative_change };
    dir.json("detbound.json", &Verdict { pass, tol, body: &s })?;
    Ok(Outcome { pass, summary: format!("{} samples, min ratio {:.4e}, change under doubling {:.2}%", s.samples, s.min_ratio, 100.0 * s.relative_change) })
}

fn multipliers(cfg: &RunConfig, dir: &mut OutputDir) -> Result<Outcome, CliError> {
    let p = cfg.params;
    let grid = MultiplierGrid::standard(&p, cfg.case, cfg.delta_or_zero());
    let bm = SymbolSpec { name: "B-".into(), order: 1.0, kind: MultiplierType::One, eval: Box::new(|pt: &SpectralPoint| char_roots(pt, &p).map(|r| r.b_minus)) };
    let det_inv = SymbolSpec { name: "1/det L".into(), order: -3.0, kind: MultiplierType::Two, eval: Box::new(|pt: &SpectralPoint| det_l(pt, &p).map(|d| 1.0 / d)) };
    let mut reports = vec![multiplier_check(&bm, &grid, &p)?, multiplier_check(&det_inv, &grid, &p)?];
    let probe = mode_symbols(&grid.base[0], &p, DET_FLOOR)?.flatten();
    let orders: Vec<f64> = probe.iter().map(|s| s.1).collect();
    let family = |pt: &SpectralPoint| mode_symbols(pt, &p, DET_FLOOR).map(|s| s.flatten().into_iter().map(|v| v.2).collect::<Vec<_>>());
    let fam = multiplier_check_family("symbols", &orders, MultiplierType::Two, family, &grid, &p)?;
    reports.extend(fam.into_iter().zip(&probe).map(|(mut r, s)| {
        r.symbol = s.0.clone();
        r
    }));
    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.symbol.clone()).collect();
    let pass = failed.is_empty();
    #[derive(Serialize)]
    struct Summary<'a> {
        grid: &'a str,
        failed: &'a [String],
        reports: &'a [twophase::symbols::MultiplierReport],
    }
    dir.json("multipliers.json", &Verdict { pass, tol: 0.0, body: &Summary { grid: &grid.description, failed: &failed, reports: &reports } })?;
    Ok(Outcome { pass, summary: format!("{} symbols checked, {} failed {:?}", reports.len(), failed.len(), failed) })
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn kernels(cfg: &RunConfig, dir: &mut OutputDir) -> Result<Outcome, CliError> {
    let p = cfg.params;
    let lambda = cfg.verify.kernel_lambda;
    let samples = BoundSamples::default();
    let tol = cfg.tol_or(KERNEL_STABILITY);
    let mut bounds = vec![];
    let mut pass = true;
    let mut lines = vec![];
    for kind in [KernelKind::K1, KernelKind::K2] {
        let base = kernel_bound_check(kind, KernelMultiplier::unit(), lambda, &samples, &p)?;
        let fine = kernel_bound_check(kind, KernelMultiplier::unit(), lambda, &samples.doubled(), &p)?;
        let change = (fine.sup / base.sup - 1.0).abs();
        pass &= base.finite && fine.finite && base.sup > 0.0 && change < tol;
        lines.push(format!("{kind:?} sup {:.4} ({:.1}% under refinement)", base.sup, 100.0 * change));
        bounds.push((base, fine, change));
    }

    let grid = KernelOperatorGrid::uniform(8, std::f64::consts::TAU, p.b, 2.0, 3, 3);
    let lambdas = family_lambdas(&p, cfg.verify.rbound_family, 1e2);
    let n = grid.input_len();
    let mats: Vec<Vec<C64>> = lambdas.iter().map(|&l| kernel_operator(KernelKind::K1, KernelMultiplier::unit(), l, &grid, &p)).collect::<twophase::Result<_>>()?;
    let rows = mats[0].len() / n;
    let ops: Vec<_> = mats.iter().map(|a| move |x: &[C64]| (0..rows).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect::<Vec<C64>>()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<Vec<Vec<C64>>> = (0..10).map(|_| (0..ops.len()).map(|_| random_field(&mut rng, n)).collect()).collect();
    let rb = rbound_estimate(&ops, &draws, 256, cfg.seed)?;
    pass &= rb.estimate.is_finite() && rb.estimate > 0.0;
    lines.push(format!("R-bound estimate {:.4} over {} operators", rb.estimate, rb.operators));

    #[derive(Serialize)]
    struct Summary<'a> {
        bounds: &'a [(twophase::kernels::BoundReport, twophase::kernels::BoundReport, f64)],
        rbound_lambdas: &'a [C64],
        rbound: &'a twophase::kernels::RBoundReport,
    }
    dir.json("kernels.json", &Verdict { pass, tol, body: &Summary { bounds: &bounds, rbound_lambdas: &lambdas, rbound: &rb } })?;
    Ok(Outcome { pass, summary: lines.join(", ") })
}

fn oracle(cfg: &RunConfig, dir: &mut OutputDir) -> Result<Outcome, CliError> {
    let p = cfg.params;
    let pt = spectral_point(cfg, cfg.mode.lambda, &cfg.mode.xi)?;
    let n = pt.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let data = BoundaryDataHat { h: random_field(&mut rng, n), k: random_field(&mut rng, n) };
    let closed = eval_mode_solution(&solve_coefficients(&pt, &p, &data)?, &pt, &p)?;
    let mut grid = ModeGrid::resolved(&pt, &p, cfg.mode.oracle_resolution)?;
    let mut errors: Vec<(ModeGrid, OracleError)> = vec![];
    for _ in 0..cfg.mode.oracle_levels {
        let fd = solve_mode_fd(&pt, &p, &ModeSources::boundary_only(data.clone()), &grid)?;
        errors.push((grid, compare_oracle(&closed, &fd)?));
        grid = grid.refined();
    }
    let records: Vec<ConvergenceRecord> = errors.iter().map(|(g, e)| ConvergenceRecord { h: g.h_lower(), error: e.max }).collect();
    let orders = observed_orders(&records);
    let pass = orders.iter().all(|o| (ORACLE_ORDER.0..=ORACLE_ORDER.1).contains(o));
    let header: Vec<String> = ["h_lower", "h_upper", "upper_max", "lower_max", "pressure_max", "max"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<f64>> = errors.iter().map(|(g, e)| vec![g.h_lower(), g.h_upper(), e.upper_max, e.lower_max, e.pressure_max, e.max]).collect();
    dir.csv("convergence.csv", &header, &rows)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        point: &'a SpectralPoint,
        data: &'a BoundaryDataHat,
        order_range: (f64, f64),
        orders: &'a [f64],
        errors: Vec<OracleError>,
    }
    let body = Summary { point: &pt, data: &data, order_range: ORACLE_ORDER, orders: &orders, errors: errors.iter().map(|e| e.1).collect() };
    dir.json("oracle.json", &Verdict { pass, tol: 0.0, body: &body })?;
    let shown: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
    Ok(Outcome { pass, summary: format!("observed orders [{}], expected in [{}, {}]", shown.join(", "), ORACLE_ORDER.0, ORACLE_ORDER.1) })
}

fn evolve_check(cfg: &RunConfig, dir: &mut OutputDir) -> Result<Outcome, CliError> {
    let grid = cfg.field.grid;
    let gamma = cfg.field.gamma;
    let tol = cfg.tol_or(EVOLVE_RESIDUAL_TOL);
    #[derive(Serialize)]
    struct Bundle {
        seed: u64,
        residual: f64,
        ratio: f64,
    }
    let mut bundles = vec![];
    for seed in cfg.seed..cfg.seed + cfg.verify.bundles as u64 {
        let data = RandomData::draw(seed, cfg.field.interior, cfg.field.max_harmonic).sample(&grid);
        let res = evolve(&data, &grid, &cfg.params, &EvolveOptions::new(gamma))?;
        let ratio = norms(&res, gamma)?.ratio;
        bundles.push(Bundle { seed, residual: evolve_residual(&res, &data)?.worst(), ratio });
    }
    let worst = bundles.iter().map(|b| b.residual).fold(0.0, f64::max);
    let sup = bundles.iter().map(|b| b.ratio).fold(0.0, f64::max);
    let pass = worst <= tol && bundles.iter().all(|b| b.ratio.is_finite()) && sup <= cfg.verify.ratio_bound;
    #[derive(Serialize)]
    struct Summary<'a> {
        gamma: f64,
        ratio_bound: f64,
        worst_residual: f64,
        sup_ratio: f64,
        bundles: &'a [Bundle],
    }
    dir.json("evolve.json", &Verdict { pass, tol, body: &Summary { gamma, ratio_bound: cfg.verify.ratio_bound, worst_residual: worst, sup_ratio: sup, bundles: &bundles } })?;
    Ok(Outcome { pass, summary: format!("{} bundles, worst residual {worst:.3e} (tol {tol:e}), sup norm ratio {sup:.4}", bundles.len()) })
}

fn nonlinear(cfg: &RunConfig, dir: &mut OutputDir) -> Result<Outcome, CliError> {
    let g = cfg.verify.nonlinear_grid;
    let t_index = g.n_t * 5 / 8;
    let eps = [1e-2, 1e-3, 1e-4];
    let delta = 0.9;
    let mut source_norms = vec![];
    for &e in &eps {
        let (eta, v_plus, v_minus, q_minus) = perturbation(&g, e);
        let input = SourceInput { grid: g, params: cfg.params, eta, v_plus, v_minus, q_minus, law: PressureLaw::Power { coef: 1.0, exponent: 1.4 }, delta };
        source_norms.push(nonlinear_sources(&input, t_index)?.max_norms());
    }
    let slopes: Vec<f64> = (0..6).map(|c| log_slope(&eps, &source_norms.iter().map(|n| n[c]).collect::<Vec<_>>())).collect();
    let (_, vp, vm, _) = perturbation(&g, 0.05);
    let normal = normal_consistency(&vp, &vm, &g, t_index, delta)?;
    let tol = cfg.tol_or(NORMAL_TOL);
    let pass = slopes.iter().all(|s| *s >= NONLINEAR_SLOPE) && normal.worst() < tol;
    #[derive(Serialize)]
    struct Summary<'a> {
        eps: [f64; 3],
        source_norms: &'a [[f64; 6]],
        slopes: &'a [f64],
        min_slope: f64,
        normal: &'a twophase::lagrangian::NormalReport,
    }
    dir.json("nonlinear.json", &Verdict { pass, tol, body: &Summary { eps, source_norms: &source_norms, slopes: &slopes, min_slope: NONLINEAR_SLOPE, normal: &normal } })?;
    let shown: Vec<String> = slopes.iter().map(|s| format!("{s:.3}")).collect();
    Ok(Outcome { pass, summary: format!("log slopes [{}], normal discrepancy {:.2e}", shown.join(", "), normal.worst()) })
}

fn compat(cfg: &RunConfig, dir: &mut OutputDir) -> Result<Outcome, CliError> {
    let grid = cfg.field.grid;
    let data = RandomData::draw(cfg.seed, cfg.field.interior, cfg.field.max_harmonic).sample(&grid);
    let res = evolve(&data, &grid, &cfg.params, &EvolveOptions::new(cfg.field.gamma))?;
    let init = InitialState::from_snapshot(&grid, &res.snapshots[0]);
    let rep = check_compatibility(&grid, &cfg.params, &init, &data.tapered(&grid))?;
    let tol = cfg.tol_or(COMPAT_TOL);
    let pass = rep.all_hold(tol);
    let worst = rep.conditions.iter().map(|c| c.relative()).fold(0.0, f64::max);
    dir.json("compat.json", &Verdict { pass, tol, body: &rep })?;
    Ok(Outcome { pass, summary: format!("{} conditions, worst relative defect {worst:.3e} (tol {tol:e})", rep.conditions.len()) })
}
