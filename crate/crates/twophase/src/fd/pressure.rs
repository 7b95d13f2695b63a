use super::{diff1, diff2, divergence, ModeGrid, Profile};
use crate::linalg::BandedMatrix;
use crate::{Error, PhysicalParams, Result, C64};

/// Piecewise-linear Galerkin solve of `(d_N^2 - A^2) theta = i xi'.F' + d_N F_N`
/// on `[-b, 0]` with `theta(0) = theta0` and the natural condition
/// `theta'(-b) = F_N(-b)`. `force` is node-major on the lower grid.
pub fn solve_k_problem(xi: &[f64], grid: &ModeGrid, force: &Profile, theta0: C64) -> Result<Vec<C64>> {
    let nt = xi.len();
    let a2: f64 = xi.iter().map(|x| x * x).sum();
    if a2 == 0.0 {
        return Err(Error::ZeroMode);
    }
    let m = grid.n_lower;
    if force.len() != m + 1 {
        return Err(Error::Dimension("force profile does not match the lower grid".into()));
    }
    let h = grid.h_lower();
    // G = -i xi'.F' pairs with the test function, F_N with its derivative
    let g: Vec<C64> = force.iter().map(|r| (0..nt).map(|j| C64::new(0.0, -xi[j]) * r[j]).sum()).collect();
    let fnorm: Vec<C64> = force.iter().map(|r| r[nt]).collect();
    let k_diag = 1.0 / h + a2 * h / 3.0;
    let k_off = -1.0 / h + a2 * h / 6.0;
    let mut mat = BandedMatrix::new(m + 1, 1, 1);
    let mut rhs = vec![C64::new(0.0, 0.0); m + 1];
    for e in 0..m {
        let (i, j) = (e, e + 1);
        let favg = 0.5 * (fnorm[i] + fnorm[j]);
        mat.add(i, i, C64::new(k_diag, 0.0));
        mat.add(i, j, C64::new(k_off, 0.0));
        rhs[i] += -favg + h / 6.0 * (2.0 * g[i] + g[j]);
        // the interface row is replaced by the Dirichlet condition
        if j < m {
            mat.add(j, j, C64::new(k_diag, 0.0));
            mat.add(j, i, C64::new(k_off, 0.0));
            rhs[j] += favg + h / 6.0 * (g[i] + 2.0 * g[j]);
        }
    }
    mat.add(m, m, C64::new(1.0, 0.0));
    rhs[m] = theta0;
    Ok(mat.solve(&rhs)?.0)
}

/// Per-mode pressure correction: builds `F = Div S_-(v_-) - grad div v_-` and the
/// interface value `S_- n.n - div v_- - S_+ n.n + gamma2 rho` from the
/// profiles and solves the variational problem.
pub fn pressure_k_mode(xi: &[f64], params: &PhysicalParams, rho_trace: C64, v_plus: &Profile, v_minus: &Profile, grid: &ModeGrid) -> Result<Vec<C64>> {
    let n = xi.len() + 1;
    let nt = n - 1;
    if v_plus.len() != grid.n_upper + 1 || v_minus.len() != grid.n_lower + 1 {
        return Err(Error::Dimension("velocity profiles do not match the grid".into()));
    }
    let a2: f64 = xi.iter().map(|x| x * x).sum();
    let (hl, hu) = (grid.h_lower(), grid.h_upper());
    let mum = params.mu_minus;
    let comp = |p: &Profile, c: usize| p.iter().map(|r| r[c]).collect::<Vec<C64>>();
    let div_lo = divergence(v_minus, xi, hl, false);
    let ddiv = diff1(&div_lo, hl);
    let d2: Vec<Vec<C64>> = (0..n).map(|c| diff2(&comp(v_minus, c), hl)).collect();
    // Div(mu D v) - grad div v = mu (v'' - A^2 v) + (mu - 1) grad div v
    let force: Profile = (0..=grid.n_lower)
        .map(|i| {
            (0..n)
                .map(|c| {
                    let grad = if c < nt { C64::new(0.0, xi[c]) * div_lo[i] } else { ddiv[i] };
                    mum * (d2[c][i] - a2 * v_minus[i][c]) + (mum - 1.0) * grad
                })
                .collect()
        })
        .collect();
    let m = grid.n_lower;
    let dvn_lo = diff1(&comp(v_minus, nt), hl)[m];
    let dvn_up = diff1(&comp(v_plus, nt), hu)[0];
    let div_up = divergence(v_plus, xi, hu, false)[0];
    let s_minus = 2.0 * mum * dvn_lo;
    let s_plus = 2.0 * params.mu_plus * dvn_up + (params.nu_plus - params.mu_plus) * div_up;
    let theta0 = s_minus - div_lo[m] - s_plus + params.gamma2_plus * rho_trace;
    solve_k_problem(xi, grid, &force, theta0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> ModeGrid {
        ModeGrid::new(1.0, 10.0, m, 16).unwrap()
    }

    #[test]
    fn density_trace_only() {
        let p = PhysicalParams::default();
        let a = 1.3;
        let g = grid(64);
        let zl = vec![vec![C64::new(0.0, 0.0); 2]; 65];
        let zu = vec![vec![C64::new(0.0, 0.0); 2]; 17];
        let th = pressure_k_mode(&[a], &p, C64::new(1.0, 0.0), &zu, &zl, &g).unwrap();
        let err = g
            .lower_nodes()
            .iter()
            .zip(&th)
            .map(|(x, t)| (t - p.gamma2_plus * (a * (x + 1.0)).cosh() / a.cosh()).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn manufactured_second_order() {
        // theta = cos x, F = (0, F_N) with F_N' = theta'' - A^2 theta, F_N(-1) = theta'(-1)
        let a: f64 = 0.8;
        let exact = |x: f64| x.cos();
        let f_n = |x: f64| -x.sin() - a * a * (x.sin() + 1f64.sin());
        let errs: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&m| {
                let g = grid(m);
                let force: Profile = g.lower_nodes().iter().map(|&x| vec![C64::new(0.0, 0.0), C64::new(f_n(x), 0.0)]).collect();
                let th = solve_k_problem(&[a], &g, &force, C64::new(1.0, 0.0)).unwrap();
                g.lower_nodes().iter().zip(&th).map(|(x, t)| (t.re - exact(*x)).abs()).fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..2.2).contains(&order), "{errs:?}");
        }
    }

    #[test]
    fn large_frequency_localizes() {
        let a = 40.0;
        let g = grid(400);
        let force = vec![vec![C64::new(0.0, 0.0); 2]; 401];
        let th = solve_k_problem(&[a], &g, &force, C64::new(1.0, 0.0)).unwrap();
        let xs = g.lower_nodes();
        // fit the log-slope over the first few decay lengths below the interface
        let pts: Vec<(f64, f64)> = xs.iter().zip(&th).filter(|(x, _)| **x > -0.1 && **x < -0.01).map(|(x, t)| (*x, t.norm().ln())).collect();
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |s, p| (s.0 + p.0, s.1 + p.1));
        let (mx, my) = (sx / n, sy / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - a).abs() / a < 0.02, "{slope}");
    }

    #[test]
    fn zero_frequency_rejected() {
        let g = grid(8);
        let force = vec![vec![C64::new(0.0, 0.0); 2]; 9];
        assert_eq!(solve_k_problem(&[0.0], &g, &force, C64::new(1.0, 0.0)), Err(Error::ZeroMode));
    }
}
