use serde::Serialize;

use super::DiscreteModeSolution;
use crate::cmath::vnorm;
use crate::mode::ModeSolution;
use crate::{Error, Result, C64};

/// Max-norm and discrete L2 discrepancies per component.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct OracleError {
    pub upper_max: f64,
    pub lower_max: f64,
    pub pressure_max: f64,
    pub upper_l2: f64,
    pub lower_l2: f64,
    pub pressure_l2: f64,
    /// Largest of the three max-norm errors.
    pub max: f64,
}

struct Acc {
    max: f64,
    sq: f64,
}

impl Acc {
    fn new() -> Self {
        Self { max: 0.0, sq: 0.0 }
    }

    fn push(&mut self, e: f64, w: f64) {
        self.max = self.max.max(e);
        self.sq += w * e * e;
    }
}

/// Compares a finite-difference solution with the closed form on the FD nodes.
pub fn compare_oracle(closed: &ModeSolution, fd: &DiscreteModeSolution) -> Result<OracleError> {
    if closed.point.lambda != fd.point.lambda || closed.point.xi != fd.point.xi || closed.point.delta != fd.point.delta {
        return Err(Error::Mismatch("closed-form and discrete solutions are for different modes".into()));
    }
    if (closed.params.b - fd.grid.b).abs() > 1e-12 {
        return Err(Error::Mismatch("layer depth differs".into()));
    }
    let (hl, hu) = (fd.grid.h_lower(), fd.grid.h_upper());
    let mut up = Acc::new();
    for (x, v) in fd.grid.upper_nodes().iter().zip(&fd.upper) {
        let ex = closed.v_plus(*x)?;
        let d: Vec<C64> = ex.value.iter().zip(v).map(|(a, b)| a - b).collect();
        up.push(vnorm(&d), hu);
    }
    let mut lo = Acc::new();
    let mut pr = Acc::new();
    for ((x, v), p) in fd.grid.lower_nodes().iter().zip(&fd.lower).zip(&fd.pressure) {
        let ex = closed.v_minus(*x)?;
        let d: Vec<C64> = ex.value.iter().zip(v).map(|(a, b)| a - b).collect();
        lo.push(vnorm(&d), hl);
        pr.push((closed.p_minus(*x)?[0] - p).norm(), hl);
    }
    Ok(OracleError {
        upper_max: up.max,
        lower_max: lo.max,
        pressure_max: pr.max,
        upper_l2: up.sq.sqrt(),
        lower_l2: lo.sq.sqrt(),
        pressure_l2: pr.sq.sqrt(),
        max: up.max.max(lo.max).max(pr.max),
    })
}

/// One level of a refinement study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRecord {
    pub h: f64,
    pub error: f64,
}

/// `log2(e_k / e_{k+1})` for successive halvings.
pub fn observed_orders(records: &[ConvergenceRecord]) -> Vec<f64> {
    records.windows(2).map(|w| (w[0].error / w[1].error).log2()).collect()
}

/// CSV with columns `h,error,order`; the first row has an empty order.
pub fn convergence_csv(records: &[ConvergenceRecord]) -> String {
    let orders = observed_orders(records);
    let mut s = String::from("h,error,order\n");
    for (k, r) in records.iter().enumerate() {
        let o = if k == 0 { String::new() } else { format!("{:.6}", orders[k - 1]) };
        s.push_str(&format!("{:.10e},{:.10e},{o}\n", r.h, r.error));
    }
    s
}

/// Order estimate from three nested solutions (spacing ratio 2) without a
/// reference: `log2(|u_h - u_{h/2}| / |u_{h/2} - u_{h/4}|)` on the coarse nodes.
pub fn richardson_order(coarse: &DiscreteModeSolution, mid: &DiscreteModeSolution, fine: &DiscreteModeSolution) -> Result<f64> {
    let nested = |a: &DiscreteModeSolution, b: &DiscreteModeSolution| {
        b.grid.n_lower == 2 * a.grid.n_lower && b.grid.n_upper == 2 * a.grid.n_upper && a.grid.x_max == b.grid.x_max
    };
    if !nested(coarse, mid) || !nested(mid, fine) {
        return Err(Error::Mismatch("grids are not nested by halving".into()));
    }
    let diff = |stride: usize, other: &DiscreteModeSolution, base_stride: usize, base: &DiscreteModeSolution| {
        let mut m = 0.0f64;
        for i in 0..=coarse.grid.n_lower {
            let d: Vec<C64> = other.lower[stride * i].iter().zip(&base.lower[base_stride * i]).map(|(a, b)| a - b).collect();
            m = m.max(vnorm(&d));
            m = m.max((other.pressure[stride * i] - base.pressure[base_stride * i]).norm());
        }
        for i in 0..=coarse.grid.n_upper {
            let d: Vec<C64> = other.upper[stride * i].iter().zip(&base.upper[base_stride * i]).map(|(a, b)| a - b).collect();
            m = m.max(vnorm(&d));
        }
        m
    };
    let d1 = diff(2, mid, 1, coarse);
    let d2 = diff(4, fine, 2, mid);
    Ok((d1 / d2).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::{solve_mode_fd, ModeGrid, ModeSources};
    use crate::mode::{eval_mode_solution, solve_coefficients, BoundaryDataHat};
    use crate::{PhysicalParams, SpectralPoint};

    fn setup() -> (PhysicalParams, SpectralPoint, ModeSolution, BoundaryDataHat) {
        let p = PhysicalParams::default();
        let pt = SpectralPoint::c1(C64::new(2.0, -1.0), &[0.7], &p).unwrap();
        let data = BoundaryDataHat { h: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.5)], k: vec![C64::new(0.0, 0.0), C64::new(0.3, 0.0)] };
        let closed = eval_mode_solution(&solve_coefficients(&pt, &p, &data).unwrap(), &pt, &p).unwrap();
        (p, pt, closed, data)
    }

    #[test]
    fn sampled_closed_form_has_zero_error() {
        let (p, pt, closed, data) = setup();
        let g = ModeGrid::resolved(&pt, &p, 4).unwrap();
        let mut fd = solve_mode_fd(&pt, &p, &ModeSources::boundary_only(data), &g).unwrap();
        fd.upper = g.upper_nodes().iter().map(|x| closed.v_plus(*x).unwrap().value).collect();
        fd.lower = g.lower_nodes().iter().map(|x| closed.v_minus(*x).unwrap().value).collect();
        fd.pressure = g.lower_nodes().iter().map(|x| closed.p_minus(*x).unwrap()[0]).collect();
        assert_eq!(compare_oracle(&closed, &fd).unwrap().max, 0.0);
    }

    #[test]
    fn halving_gives_second_order() {
        let (p, pt, closed, data) = setup();
        let mut g = ModeGrid::resolved(&pt, &p, 8).unwrap();
        let mut recs = Vec::new();
        let mut sols = Vec::new();
        for _ in 0..3 {
            let fd = solve_mode_fd(&pt, &p, &ModeSources::boundary_only(data.clone()), &g).unwrap();
            recs.push(ConvergenceRecord { h: g.h_lower(), error: compare_oracle(&closed, &fd).unwrap().max });
            sols.push(fd);
            g = g.refined();
        }
        for o in observed_orders(&recs) {
            assert!((3.4f64.log2()..4.7f64.log2()).contains(&o), "{recs:?}");
        }
        let r = richardson_order(&sols[0], &sols[1], &sols[2]).unwrap();
        assert!((1.8..2.2).contains(&r), "{r}");
        assert!(convergence_csv(&recs).lines().count() == 4);
    }

    #[test]
    fn truncation_below_discretization() {
        let (p, pt, closed, data) = setup();
        let g = ModeGrid::resolved(&pt, &p, 16).unwrap();
        let long = ModeGrid { x_max: 2.0 * g.x_max, n_upper: 2 * g.n_upper, ..g };
        let e1 = compare_oracle(&closed, &solve_mode_fd(&pt, &p, &ModeSources::boundary_only(data.clone()), &g).unwrap()).unwrap();
        let e2 = compare_oracle(&closed, &solve_mode_fd(&pt, &p, &ModeSources::boundary_only(data), &long).unwrap()).unwrap();
        // doubling the extent at fixed spacing leaves only the discretization error
        assert!((e1.max - e2.max).abs() < 1e-3 * e1.max, "{} {}", e1.max, e2.max);
    }

    #[test]
    fn mismatched_modes_rejected() {
        let (p, pt, closed, data) = setup();
        let other = pt.with_xi(&[0.9]);
        let g = ModeGrid::resolved(&other, &p, 4).unwrap();
        let fd = solve_mode_fd(&other, &p, &ModeSources::boundary_only(data), &g).unwrap();
        assert!(matches!(compare_oracle(&closed, &fd), Err(Error::Mismatch(_))));
    }
}
