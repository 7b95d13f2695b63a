use super::{diff1, divergence, DiscreteModeSolution, ModeGrid, ModeSources};
use crate::linalg::BandedMatrix;
use crate::regions::region_contains;
use crate::symbols::char_roots;
use crate::{Error, PhysicalParams, RegionCase, Result, SpectralPoint, C64};

/// Staggered layout: each lower node carries `v` and the pressure of the cell
/// above it (the interface pressure at the top node); upper nodes carry `v`.
struct Layout {
    n: usize,
    ml: usize,
    mu: usize,
}

impl Layout {
    fn lo(&self, i: usize, c: usize) -> usize {
        i * (self.n + 1) + c
    }

    fn p(&self, i: usize) -> usize {
        self.lo(i, self.n)
    }

    fn up(&self, i: usize, c: usize) -> usize {
        (self.ml + 1) * (self.n + 1) + i * self.n + c
    }

    fn size(&self) -> usize {
        self.up(self.mu, self.n)
    }
}

fn assemble_and_solve(pt: &SpectralPoint, params: &PhysicalParams, src: &ModeSources, grid: &ModeGrid, with_mass: bool) -> Result<DiscreteModeSolution> {
    if !region_contains(pt, params) {
        return Err(Error::OutOfRegion(format!("lambda = {}", pt.lambda)));
    }
    let n = pt.dim();
    let nt = n - 1;
    src.check(grid, n)?;
    if (grid.b - params.b).abs() > 1e-12 * params.b {
        return Err(Error::Mismatch(format!("grid depth {} vs layer depth {}", grid.b, params.b)));
    }
    let lay = Layout { n, ml: grid.n_lower, mu: grid.n_upper };
    let size = lay.size();
    let band = 4 * (n + 1) + 2 * n;
    let mut m = BandedMatrix::new(size, band, band);
    let mut rhs = vec![C64::new(0.0, 0.0); size];
    let one = C64::new(1.0, 0.0);
    let iz = |j: usize| C64::new(0.0, pt.xi[j]);
    let a2 = pt.a() * pt.a();
    let l = pt.lambda;
    let (hl, hu) = (grid.h_lower(), grid.h_upper());
    let (mup, mum) = (params.mu_plus, params.mu_minus);
    let visc = params.nu_plus + pt.delta;
    let c_lo = params.gamma1_minus * l + mum * a2;
    let c_up = params.gamma1_plus * l + mup * a2;
    let ml = lay.ml;
    let mu = lay.mu;

    // density forcing enters as -gamma2/lambda grad f
    let (f_grad, f_trace): (Option<(Vec<C64>, Vec<C64>)>, C64) = match (&src.f_plus, with_mass) {
        (Some(f), true) => {
            let s = params.gamma2_plus / l;
            let df = diff1(f, hu);
            (Some((f.iter().map(|v| v * s).collect(), df.iter().map(|v| v * s).collect())), f[0] * s)
        }
        _ => (None, C64::new(0.0, 0.0)),
    };
    let gd_mid = |i: usize| src.g_d.as_ref().map_or(C64::new(0.0, 0.0), |g| 0.5 * (g[i] + g[i + 1]));

    // divergence on the cell (i, i+1)
    let div_row = |m: &mut BandedMatrix, row: usize, i: usize| {
        for j in 0..nt {
            m.add(row, lay.lo(i, j), 0.5 * iz(j));
            m.add(row, lay.lo(i + 1, j), 0.5 * iz(j));
        }
        m.add(row, lay.lo(i, nt), C64::new(-1.0 / hl, 0.0));
        m.add(row, lay.lo(i + 1, nt), C64::new(1.0 / hl, 0.0));
    };

    // bottom
    for c in 0..n {
        m.add(lay.lo(0, c), lay.lo(0, c), one);
    }
    div_row(&mut m, lay.p(0), 0);
    rhs[lay.p(0)] = gd_mid(0);

    // lower interior
    let inv_h2 = 1.0 / (hl * hl);
    for i in 1..ml {
        for c in 0..n {
            let row = lay.lo(i, c);
            m.add(row, lay.lo(i, c), c_lo + 2.0 * mum * inv_h2);
            m.add(row, lay.lo(i - 1, c), C64::new(-mum * inv_h2, 0.0));
            m.add(row, lay.lo(i + 1, c), C64::new(-mum * inv_h2, 0.0));
            if c < nt {
                m.add(row, lay.p(i), 0.5 * iz(c));
                m.add(row, lay.p(i - 1), 0.5 * iz(c));
            } else {
                m.add(row, lay.p(i), C64::new(1.0 / hl, 0.0));
                m.add(row, lay.p(i - 1), C64::new(-1.0 / hl, 0.0));
            }
            if let Some(g) = &src.g_minus {
                rhs[row] = g[i][c];
            }
        }
        div_row(&mut m, lay.p(i), i);
        rhs[lay.p(i)] = gd_mid(i);
    }

    // one-sided derivatives at the interface
    let dlo = |c: usize| [(lay.lo(ml, c), 1.5 / hl), (lay.lo(ml - 1, c), -2.0 / hl), (lay.lo(ml - 2, c), 0.5 / hl)];
    let dup = |c: usize| [(lay.up(0, c), -1.5 / hu), (lay.up(1, c), 2.0 / hu), (lay.up(2, c), -0.5 / hu)];
    for c in 0..nt {
        let row = lay.lo(ml, c);
        for (k, w) in dup(c) {
            m.add(row, k, C64::new(mup * w, 0.0));
        }
        m.add(row, lay.up(0, nt), mup * iz(c));
        for (k, w) in dlo(c) {
            m.add(row, k, C64::new(-mum * w, 0.0));
        }
        m.add(row, lay.lo(ml, nt), -mum * iz(c));
        rhs[row] = src.data.h[c];
    }
    let row = lay.lo(ml, nt);
    for (k, w) in dup(nt) {
        m.add(row, k, (2.0 * mup + visc - mup) * w);
    }
    for j in 0..nt {
        m.add(row, lay.up(0, j), (visc - mup) * iz(j));
    }
    for (k, w) in dlo(nt) {
        m.add(row, k, C64::new(-2.0 * mum * w, 0.0));
    }
    m.add(row, lay.p(ml), one);
    rhs[row] = src.data.h[nt] + f_trace;
    // interface pressure by linear extrapolation from the two top cells
    let row = lay.p(ml);
    m.add(row, lay.p(ml), one);
    m.add(row, lay.p(ml - 1), C64::new(-1.5, 0.0));
    m.add(row, lay.p(ml - 2), C64::new(0.5, 0.0));

    // velocity jump
    for c in 0..n {
        let row = lay.up(0, c);
        m.add(row, lay.up(0, c), one);
        m.add(row, lay.lo(ml, c), -one);
        rhs[row] = src.data.k[c];
    }

    // upper interior
    let inv_h2 = 1.0 / (hu * hu);
    let inv_2h = 1.0 / (2.0 * hu);
    for i in 1..mu {
        for c in 0..n {
            let row = lay.up(i, c);
            m.add(row, lay.up(i, c), c_up + 2.0 * mup * inv_h2);
            m.add(row, lay.up(i - 1, c), C64::new(-mup * inv_h2, 0.0));
            m.add(row, lay.up(i + 1, c), C64::new(-mup * inv_h2, 0.0));
            if c < nt {
                // -(nu+delta) i xi_c (i xi'.v' + v_N')
                for j in 0..nt {
                    m.add(row, lay.up(i, j), -visc * iz(c) * iz(j));
                }
                m.add(row, lay.up(i + 1, nt), -visc * iz(c) * inv_2h);
                m.add(row, lay.up(i - 1, nt), visc * iz(c) * inv_2h);
            } else {
                for j in 0..nt {
                    m.add(row, lay.up(i + 1, j), -visc * iz(j) * inv_2h);
                    m.add(row, lay.up(i - 1, j), visc * iz(j) * inv_2h);
                }
                m.add(row, lay.up(i, nt), 2.0 * visc * inv_h2);
                m.add(row, lay.up(i + 1, nt), -visc * inv_h2);
                m.add(row, lay.up(i - 1, nt), -visc * inv_h2);
            }
            let mut r = src.g_plus.as_ref().map_or(C64::new(0.0, 0.0), |g| g[i][c]);
            if let Some((f, df)) = &f_grad {
                r -= if c < nt { iz(c) * f[i] } else { df[i] };
            }
            rhs[row] = r;
        }
    }
    for c in 0..n {
        m.add(lay.up(mu, c), lay.up(mu, c), one);
    }

    let (x, pivot_ratio) = m.solve(&rhs)?;
    let lower = (0..=ml).map(|i| (0..n).map(|c| x[lay.lo(i, c)]).collect()).collect();
    let upper: Vec<Vec<C64>> = (0..=mu).map(|i| (0..n).map(|c| x[lay.up(i, c)]).collect()).collect();
    let pressure_mid: Vec<C64> = (0..ml).map(|i| x[lay.p(i)]).collect();
    let mut pressure = Vec::with_capacity(ml + 1);
    pressure.push(1.5 * pressure_mid[0] - 0.5 * pressure_mid[1]);
    for i in 1..ml {
        pressure.push(0.5 * (pressure_mid[i - 1] + pressure_mid[i]));
    }
    pressure.push(x[lay.p(ml)]);
    let rho_plus = with_mass.then(|| {
        let div = divergence(&upper, &pt.xi, hu, false);
        div.iter()
            .enumerate()
            .map(|(i, d)| (src.f_plus.as_ref().map_or(C64::new(0.0, 0.0), |f| f[i]) - params.gamma1_plus * d) / l)
            .collect()
    });
    Ok(DiscreteModeSolution { point: pt.clone(), grid: *grid, upper, lower, pressure_mid, pressure, rho_plus, pivot_ratio })
}

/// Solves the reduced mode problem (shifted upper stress, no density) with
/// the given sources. `f_plus` is ignored.
pub fn solve_mode_fd(pt: &SpectralPoint, params: &PhysicalParams, sources: &ModeSources, grid: &ModeGrid) -> Result<DiscreteModeSolution> {
    assemble_and_solve(pt, params, sources, grid, false)
}

/// Solves the full resolvent mode problem by eliminating
/// `rho = (f - gamma1 div v) / lambda`; returns `rho` on the upper grid.
pub fn full_resolvent_mode(pt: &SpectralPoint, params: &PhysicalParams, sources: &ModeSources, grid: &ModeGrid) -> Result<DiscreteModeSolution> {
    if pt.case != RegionCase::C1 {
        return Err(Error::InvalidDelta("density elimination requires case C1".into()));
    }
    char_roots(pt, params)?;
    assemble_and_solve(pt, params, sources, grid, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode::{eval_mode_solution, solve_coefficients, BoundaryDataHat};

    fn unit() -> (PhysicalParams, SpectralPoint) {
        let p = PhysicalParams::default();
        let pt = SpectralPoint::c1(C64::new(1.0, 0.5), &[1.0], &p).unwrap();
        (p, pt)
    }

    #[test]
    fn zero_sources_zero_solution() {
        let (p, pt) = unit();
        let g = ModeGrid::resolved(&pt, &p, 8).unwrap();
        let s = solve_mode_fd(&pt, &p, &ModeSources::boundary_only(BoundaryDataHat::zeros(2)), &g).unwrap();
        assert!(s.upper.iter().chain(&s.lower).flatten().all(|v| *v == C64::new(0.0, 0.0)));
        assert!(s.pressure.iter().all(|v| *v == C64::new(0.0, 0.0)));
        assert!(s.pivot_ratio > 0.0 && s.pivot_ratio.is_finite());
    }

    #[test]
    fn boundary_data_matches_closed_form() {
        let (p, pt) = unit();
        let data = BoundaryDataHat { h: vec![C64::new(0.3, -0.2), C64::new(1.0, 0.1)], k: vec![C64::new(-0.4, 0.0), C64::new(0.2, 0.6)] };
        let closed = eval_mode_solution(&solve_coefficients(&pt, &p, &data).unwrap(), &pt, &p).unwrap();
        let g = ModeGrid::resolved(&pt, &p, 16).unwrap();
        let s = solve_mode_fd(&pt, &p, &ModeSources::boundary_only(data), &g).unwrap();
        let e = crate::fd::compare_oracle(&closed, &s).unwrap();
        assert!(e.max < 5e-3, "{e:?}");
    }

    #[test]
    fn zero_forcing_density_is_elimination() {
        let (p, pt) = unit();
        let data = BoundaryDataHat { h: vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)], k: vec![C64::new(0.0, 0.0); 2] };
        let g = ModeGrid::resolved(&pt, &p, 8).unwrap();
        let s = full_resolvent_mode(&pt, &p, &ModeSources::boundary_only(data), &g).unwrap();
        let div = divergence(&s.upper, &pt.xi, g.h_upper(), false);
        for (r, d) in s.rho_plus.as_ref().unwrap().iter().zip(&div) {
            assert!((r + p.gamma1_plus * d / pt.lambda).norm() < 1e-14);
        }
    }

    #[test]
    fn out_of_region_and_mismatch() {
        let (p, pt) = unit();
        let g = ModeGrid::resolved(&pt, &p, 8).unwrap();
        let bad = SpectralPoint::raw(C64::new(-5.0, 0.0), pt.delta, &pt.xi, pt.case);
        let src = ModeSources::boundary_only(BoundaryDataHat::zeros(2));
        assert!(matches!(solve_mode_fd(&bad, &p, &src, &g), Err(Error::OutOfRegion(_))));
        let short = ModeSources::boundary_only(BoundaryDataHat::zeros(3));
        assert!(matches!(solve_mode_fd(&pt, &p, &short, &g), Err(Error::Dimension(_))));
    }
}
