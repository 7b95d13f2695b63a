mod common;

use common::manufactured::{manufactured_errors, Manufactured};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twophase::fd::{compare_oracle, full_resolvent_mode, solve_mode_fd, ModeGrid, ModeSources};
use twophase::mode::{eval_mode_solution, solve_coefficients};
use twophase::{PhysicalParams, SpectralPoint, C64};

fn orders(errs: &[[f64; 4]], comp: usize) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0][comp] / w[1][comp]).log2()).collect()
}

#[test]
fn manufactured_reduced_problem_is_second_order() {
    let p = PhysicalParams::default();
    let pt = SpectralPoint::c1(C64::new(1.5, 0.8), &[0.9], &p).unwrap();
    let m = Manufactured::new(2, p.b, 6.0, false);
    let errs: Vec<[f64; 4]> = [16usize, 32, 64]
        .iter()
        .map(|&n| {
            let g = ModeGrid::new(p.b, 6.0, n, 4 * n).unwrap();
            let src = m.sources(&pt, &p, &g);
            manufactured_errors(&m, &pt, &p, &solve_mode_fd(&pt, &p, &src, &g).unwrap())
        })
        .collect();
    for comp in 0..3 {
        for o in orders(&errs, comp) {
            assert!((1.8..2.2).contains(&o), "component {comp}: {errs:?}");
        }
    }
}

#[test]
fn manufactured_three_dimensional() {
    let p = PhysicalParams { mu_minus: 0.5, nu_plus: 1.5, ..Default::default() };
    let pt = SpectralPoint::c1(C64::new(3.0, -2.0), &[0.6, -0.8], &p).unwrap();
    let m = Manufactured::new(3, p.b, 6.0, false);
    let errs: Vec<[f64; 4]> = [16usize, 32, 64]
        .iter()
        .map(|&n| {
            let g = ModeGrid::new(p.b, 6.0, n, 4 * n).unwrap();
            manufactured_errors(&m, &pt, &p, &solve_mode_fd(&pt, &p, &m.sources(&pt, &p, &g), &g).unwrap())
        })
        .collect();
    for comp in 0..3 {
        for o in orders(&errs, comp) {
            assert!((1.8..2.2).contains(&o), "component {comp}: {errs:?}");
        }
    }
}

#[test]
fn full_resolvent_recovers_density() {
    let p = PhysicalParams::default();
    let pt = SpectralPoint::c1(C64::new(2.0, 1.0), &[1.1], &p).unwrap();
    let m = Manufactured::new(2, p.b, 6.0, true);
    let mut errs = Vec::new();
    for n in [16usize, 32, 64] {
        let g = ModeGrid::new(p.b, 6.0, n, 4 * n).unwrap();
        let src = m.sources(&pt, &p, &g);
        assert!(src.divergence_consistency(&pt.xi, &g).unwrap() < 10.0 * g.h_lower().powi(2));
        let sol = full_resolvent_mode(&pt, &p, &src, &g).unwrap();
        let h = g.h_upper();
        let mass = sol.mass_residual(&p, src.f_plus.as_deref()).unwrap();
        assert!(mass < 10.0 * h * h, "mass residual {mass} at h={h}");
        errs.push(manufactured_errors(&m, &pt, &p, &sol));
    }
    for comp in 0..4 {
        for o in orders(&errs, comp) {
            assert!((1.8..2.2).contains(&o), "component {comp}: {errs:?}");
        }
    }
}

#[test]
fn constant_density_forcing() {
    // f = lambda c with no other data: rho satisfies the mass equation
    let p = PhysicalParams::default();
    let pt = SpectralPoint::c1(C64::new(1.0, 0.0), &[1.0], &p).unwrap();
    let g = ModeGrid::resolved(&pt, &p, 16).unwrap();
    let c = C64::new(0.7, 0.0);
    let mut src = ModeSources::boundary_only(twophase::mode::BoundaryDataHat::zeros(2));
    src.f_plus = Some(vec![pt.lambda * c; g.n_upper + 1]);
    let sol = full_resolvent_mode(&pt, &p, &src, &g).unwrap();
    let h = g.h_upper();
    assert!(sol.mass_residual(&p, src.f_plus.as_deref()).unwrap() < 10.0 * h * h);
    assert!(sol.rho_plus.unwrap().iter().any(|r| r.norm() > 1e-3));
}

#[test]
fn boundary_data_full_resolvent_matches_closed_form() {
    let p = PhysicalParams::default();
    let pt = SpectralPoint::c1(C64::new(2.0, 2.0), &[0.8], &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = common::random_data(2, &mut rng);
    let closed = eval_mode_solution(&solve_coefficients(&pt, &p, &data).unwrap(), &pt, &p).unwrap();
    let g = ModeGrid::resolved(&pt, &p, 16).unwrap();
    let sol = full_resolvent_mode(&pt, &p, &ModeSources::boundary_only(data), &g).unwrap();
    let e = compare_oracle(&closed, &sol).unwrap();
    assert!(e.max < 20.0 * g.h_lower().powi(2), "{e:?}");
}

#[test]
fn oracle_constant_stable_over_draws() {
    let p = PhysicalParams::default();
    let pt = SpectralPoint::c1(C64::new(1.0, 1.0), &[1.0], &p).unwrap();
    let g = ModeGrid::resolved(&pt, &p, 16).unwrap();
    let h2 = g.h_lower().powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cs: Vec<f64> = (0..10)
        .map(|_| {
            let data = common::random_data(2, &mut rng);
            let closed = eval_mode_solution(&solve_coefficients(&pt, &p, &data).unwrap(), &pt, &p).unwrap();
            let fd = solve_mode_fd(&pt, &p, &ModeSources::boundary_only(data), &g).unwrap();
            compare_oracle(&closed, &fd).unwrap().max / h2
        })
        .collect();
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |a, c| (a.0.min(*c), a.1.max(*c)));
    assert!(hi.is_finite() && hi / lo < 10.0, "{cs:?}");
}
