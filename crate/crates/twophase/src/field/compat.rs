use std::f64::consts::PI;

use serde::Serialize;

use super::data::DataBundle;
use super::evolve::Snapshot;
use super::grid::{Field, FieldGrid, Side};
use super::transform::{inverse_tangential_transform, tangential_transform};
use crate::fd::diff1;
use crate::{Error, PhysicalParams, Result, C64};

/// `h - (h.n) n`.
pub fn tangential_projection(h: &[f64], n: &[f64]) -> Vec<f64> {
    let hn: f64 = h.iter().zip(n).map(|(a, b)| a * b).sum();
    h.iter().zip(n).map(|(a, b)| a - hn * b).collect()
}

/// Initial velocities (and optionally density) on the field grid, stored as
/// single-time [`Field`]s.
#[derive(Debug, Clone, Serialize)]
pub struct InitialState {
    pub rho_plus: Option<Field>,
    pub v_plus: Field,
    pub v_minus: Field,
    /// Exact interface normal derivatives `[x][side][c]`, side 0 upper; when
    /// absent they are differenced from the samples.
    pub interface_dz: Option<Vec<[[f64; 2]; 2]>>,
}

impl InitialState {
    pub fn zeros(grid: &FieldGrid) -> Self {
        let g = FieldGrid { n_t: 1, ..*grid };
        Self { rho_plus: None, v_plus: Field::zeros(&g, Side::Upper, 2), v_minus: Field::zeros(&g, Side::Lower, 2), interface_dz: None }
    }

    /// Samples `v_plus(x, z)` and `v_minus(x, z)`.
    pub fn from_fn(grid: &FieldGrid, v_plus: impl Fn(f64, f64) -> [f64; 2], v_minus: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let g = FieldGrid { n_t: 1, ..*grid };
        Self {
            rho_plus: None,
            v_plus: Field::from_fn(&g, Side::Upper, 2, |_, x, z| v_plus(x, z).to_vec()),
            v_minus: Field::from_fn(&g, Side::Lower, 2, |_, x, z| v_minus(x, z).to_vec()),
            interface_dz: None,
        }
    }

    /// Real part of an evolution snapshot.
    pub fn from_snapshot(grid: &FieldGrid, snap: &Snapshot) -> Self {
        let mut s = Self::zeros(grid);
        for x in 0..grid.m {
            for (z, v) in snap.v_plus[x].iter().enumerate() {
                for c in 0..2 {
                    let k = s.v_plus.idx(0, x, z, c);
                    s.v_plus.data[k] = v[c].re;
                }
            }
            for (z, v) in snap.v_minus[x].iter().enumerate() {
                for c in 0..2 {
                    let k = s.v_minus.idx(0, x, z, c);
                    s.v_minus.data[k] = v[c].re;
                }
            }
        }
        s.interface_dz = Some(snap.interface_dz.iter().map(|d| [[d[0][0].re, d[0][1].re], [d[1][0].re, d[1][1].re]]).collect());
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatCondition {
    pub name: String,
    /// Discrete `L2` size of the defect.
    pub residual: f64,
    /// Size of the terms entering the condition.
    pub scale: f64,
}

impl CompatCondition {
    pub fn relative(&self) -> f64 {
        if self.residual == 0.0 {
            0.0
        } else {
            self.residual / self.scale
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatReport {
    pub conditions: Vec<CompatCondition>,
}

impl CompatReport {
    pub fn get(&self, name: &str) -> Option<&CompatCondition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn all_hold(&self, tol: f64) -> bool {
        self.conditions.iter().all(|c| c.relative() <= tol)
    }
}

/// Column `[x][z]` of a single-time field component.
fn plane(f: &Field, t: usize, c: usize) -> Vec<Vec<C64>> {
    (0..f.m).map(|x| (0..f.nz).map(|z| C64::new(f.get(t, x, z, c), 0.0)).collect()).collect()
}

fn zeros_like(f: &Field) -> Vec<Vec<C64>> {
    vec![vec![C64::new(0.0, 0.0); f.nz]; f.m]
}

fn dx_plane(u: &[Vec<C64>], xis: &[f64]) -> Result<Vec<Vec<C64>>> {
    let (m, nz) = (u.len(), u[0].len());
    let mut out = vec![vec![C64::new(0.0, 0.0); nz]; m];
    for z in 0..nz {
        let col: Vec<C64> = u.iter().map(|r| r[z]).collect();
        let mut a = tangential_transform(&col)?;
        for (v, xi) in a.iter_mut().zip(xis) {
            *v *= C64::new(0.0, *xi);
        }
        for (x, v) in inverse_tangential_transform(&a)?.into_iter().enumerate() {
            out[x][z] = v;
        }
    }
    Ok(out)
}

fn dz_plane(u: &[Vec<C64>], h: f64) -> Vec<Vec<C64>> {
    u.iter().map(|r| diff1(r, h)).collect()
}

/// Trapezoid in `z`, rectangle (periodic) in `x`.
fn l2_plane(u: &[Vec<C64>], dx: f64, dz: f64) -> f64 {
    let n = u[0].len();
    let s: f64 = u.iter().flat_map(|r| r.iter().enumerate().map(move |(i, v)| if i == 0 || i == n - 1 { 0.5 * v.norm_sqr() } else { v.norm_sqr() })).sum();
    (s * dx * dz).sqrt()
}

fn l2_line(u: &[C64], dx: f64) -> f64 {
    (u.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx).sqrt()
}

/// Fourth-order one-sided derivative at the first (`forward`) or last node.
fn end_derivative(u: &[C64], h: f64, forward: bool) -> C64 {
    const W: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    let n = u.len();
    let s: C64 = (0..5).map(|i| W[i] * if forward { u[i] } else { -u[n - 1 - i] }).sum();
    s / (12.0 * h)
}

fn condition(name: &str, residual: f64, scale: f64) -> CompatCondition {
    CompatCondition { name: name.into(), residual, scale }
}

/// Number of vertical cosine modes in the weak-pairing test basis.
pub fn pairing_modes(grid: &FieldGrid) -> usize {
    (grid.n_lower / 4).max(1)
}

/// Evaluates the compatibility conditions between initial velocities and the
/// data at `t = 0` (`n = e_N`):
///
/// - `div v_{-,0} = g_d(0)`
/// - `(v_{-,0} - frak_g_d(0), grad phi) = 0` for `phi = e^{i xi x} cos(pi (j + 1/2)(z + b)/b)`, which vanish on the interface
/// - tangential part of `(mu+ D(v+) - mu- D(v-)) n - h(0)` on the interface
/// - `v_{+,0} = v_{-,0}` on the interface and `v_{-,0} = 0` at the bottom
pub fn check_compatibility(grid: &FieldGrid, params: &PhysicalParams, init: &InitialState, data: &DataBundle) -> Result<CompatReport> {
    grid.validate()?;
    let g1 = FieldGrid { n_t: 1, ..*grid };
    if !init.v_plus.matches(&g1, Side::Upper, 2) || !init.v_minus.matches(&g1, Side::Lower, 2) {
        return Err(Error::Dimension("initial velocities do not match the field grid".into()));
    }
    data.validate(grid)?;
    let mg = grid.mode_grid();
    let (hl, hu, dx) = (mg.h_lower(), mg.h_upper(), grid.dx());
    let xis = grid.xis();
    let vm = &init.v_minus;
    let vp = &init.v_plus;
    let (vmx, vmz) = (plane(vm, 0, 0), plane(vm, 0, 1));
    let (vpx, vpz) = (plane(vp, 0, 0), plane(vp, 0, 1));
    let data0 = |f: &Option<Field>, c: usize, like: &Field| f.as_ref().map_or_else(|| zeros_like(like), |f| plane(f, 0, c));
    let mut out = Vec::new();

    // divergence
    let dvx = dx_plane(&vmx, &xis)?;
    let dvz = dz_plane(&vmz, hl);
    let gd = data0(&data.g_d, 0, vm);
    let div: Vec<Vec<C64>> = dvx.iter().zip(&dvz).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
    let defect: Vec<Vec<C64>> = div.iter().zip(&gd).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    out.push(condition("divergence", l2_plane(&defect, dx, hl), l2_plane(&dvx, dx, hl) + l2_plane(&dvz, dx, hl) + l2_plane(&gd, dx, hl)));

    // weak pairing
    let (fx, fz) = (data0(&data.frak_g_d, 0, vm), data0(&data.frak_g_d, 1, vm));
    let wx: Vec<Vec<C64>> = vmx.iter().zip(&fx).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    let wz: Vec<Vec<C64>> = vmz.iter().zip(&fz).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    let amp_x: Vec<Vec<C64>> = transpose_transform(&wx)?;
    let amp_z: Vec<Vec<C64>> = transpose_transform(&wz)?;
    let zs = mg.lower_nodes();
    let b = grid.b;
    let nz = zs.len();
    let trap = |i: usize| if i == 0 || i == nz - 1 { 0.5 * hl } else { hl };
    let mut worst = 0.0f64;
    for (m, xi) in xis.iter().enumerate() {
        for j in 0..pairing_modes(grid) {
            let k = PI * (j as f64 + 0.5) / b;
            // (w, grad phi) with phi = e^{i xi x} cos(k (z + b)); conj(phi) enters the pairing
            let mut s = C64::new(0.0, 0.0);
            let mut nrm = 0.0;
            for (i, z) in zs.iter().enumerate() {
                let (c, sn) = ((k * (z + b)).cos(), (k * (z + b)).sin());
                let gx = C64::new(0.0, *xi) * c;
                let gz = C64::new(-k * sn, 0.0);
                s += trap(i) * (amp_x[m][i] * gx.conj() + amp_z[m][i] * gz.conj());
                nrm += trap(i) * (gx.norm_sqr() + gz.norm_sqr());
            }
            // Plancherel: the x-integral contributes L
            worst = worst.max(s.norm() * grid.lx / (nrm * grid.lx).sqrt());
        }
    }
    let w_scale = l2_plane(&vmx, dx, hl) + l2_plane(&vmz, dx, hl) + l2_plane(&fx, dx, hl) + l2_plane(&fz, dx, hl);
    out.push(condition("weak divergence", worst, w_scale));

    // tangential stress on the interface
    let top = mg.n_lower;
    let dxp = dx_plane(&vpz, &xis)?;
    let dxm = dx_plane(&vmz, &xis)?;
    let dz_at = |x: usize, side: usize| match &init.interface_dz {
        Some(d) => C64::new(d[x][side][0], 0.0),
        None if side == 0 => end_derivative(&vpx[x], hu, true),
        None => end_derivative(&vmx[x], hl, false),
    };
    let hx = data.h_upper.as_ref().map_or_else(|| vec![C64::new(0.0, 0.0); grid.m], |h| (0..grid.m).map(|x| C64::new(h.get(0, x, 0, 0), 0.0)).collect());
    let plus: Vec<C64> = (0..grid.m).map(|x| params.mu_plus * (dz_at(x, 0) + dxp[x][0])).collect();
    let minus: Vec<C64> = (0..grid.m).map(|x| params.mu_minus * (dz_at(x, 1) + dxm[x][top])).collect();
    let st: Vec<C64> = (0..grid.m).map(|x| plus[x] - minus[x] - hx[x]).collect();
    out.push(condition("tangential stress", l2_line(&st, dx), l2_line(&plus, dx) + l2_line(&minus, dx) + l2_line(&hx, dx)));

    // interface trace
    let mut jump = Vec::with_capacity(2 * grid.m);
    let mut sides = Vec::with_capacity(2 * grid.m);
    for (p, m) in [(&vpx, &vmx), (&vpz, &vmz)] {
        for x in 0..grid.m {
            jump.push(p[x][0] - m[x][top]);
            sides.push(p[x][0].norm() + m[x][top].norm());
        }
    }
    let sides: Vec<C64> = sides.into_iter().map(|s| C64::new(s, 0.0)).collect();
    out.push(condition("velocity trace", l2_line(&jump, dx), l2_line(&sides, dx)));

    // bottom
    let bottom: Vec<C64> = vmx.iter().chain(&vmz).map(|r| r[0]).collect();
    let scale = l2_plane(&vmx, dx, hl) + l2_plane(&vmz, dx, hl);
    out.push(condition("bottom", l2_line(&bottom, dx), scale));
    Ok(CompatReport { conditions: out })
}

/// Tangential amplitudes `[m][z]` of a `[x][z]` plane.
fn transpose_transform(u: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    let (m, nz) = (u.len(), u[0].len());
    let mut out = vec![vec![C64::new(0.0, 0.0); nz]; m];
    for z in 0..nz {
        let col: Vec<C64> = u.iter().map(|r| r[z]).collect();
        for (k, v) in tangential_transform(&col)?.into_iter().enumerate() {
            out[k][z] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> FieldGrid {
        FieldGrid { m: 16, n_t: 8, n_lower: 64, n_upper: 64, ..Default::default() }
    }

    #[test]
    fn zero_everything_holds_exactly() {
        let g = grid();
        let rep = check_compatibility(&g, &PhysicalParams::default(), &InitialState::zeros(&g), &DataBundle::default()).unwrap();
        assert!(rep.conditions.iter().all(|c| c.residual == 0.0));
        assert!(rep.all_hold(0.0));
    }

    #[test]
    fn divergence_defect_is_the_divergence() {
        let g = grid();
        // v = (0, (z + b)^2): div = 2(z + b), other conditions hold except the trace
        let init = InitialState::from_fn(&g, |_, _| [0.0, 1.0], |_, z| [0.0, (z + 1.0).powi(2)]);
        let rep = check_compatibility(&g, &PhysicalParams::default(), &init, &DataBundle::default()).unwrap();
        let want = (2.0 * PI * 4.0 / 3.0f64).sqrt();
        let got = rep.get("divergence").unwrap().residual;
        assert!((got - want).abs() < 1e-3 * want, "{got} vs {want}");
        assert_eq!(rep.get("bottom").unwrap().residual, 0.0);
        assert!(rep.get("velocity trace").unwrap().residual < 1e-12);
        assert!(rep.get("weak divergence").unwrap().relative() > 1e-2);
    }

    #[test]
    fn compatible_divergence_free_state() {
        let g = grid();
        // stream function psi = sin x (z + 1)^2 z^2 on the layer: zero at the bottom with zero gradient
        let psi_z = |x: f64, z: f64| x.sin() * (2.0 * (z + 1.0) * z * z + 2.0 * (z + 1.0).powi(2) * z);
        let psi_x = |x: f64, z: f64| x.cos() * (z + 1.0).powi(2) * z * z;
        let init = InitialState::from_fn(&g, |_, _| [0.0, 0.0], |x, z| [psi_z(x, z), -psi_x(x, z)]);
        let rep = check_compatibility(&g, &PhysicalParams::default(), &init, &DataBundle::default()).unwrap();
        assert!(rep.get("divergence").unwrap().relative() < 5e-3, "{rep:?}");
        assert!(rep.get("weak divergence").unwrap().relative() < 1e-3);
        assert!(rep.get("bottom").unwrap().residual < 1e-14);
        assert!(rep.get("velocity trace").unwrap().residual < 1e-14);
    }

    #[test]
    fn projection_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = [0.0, 0.0, 1.0];
            let h: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(tangential_projection(&n, &n).iter().all(|v| v.abs() < 1e-15));
            let once = tangential_projection(&h, &n);
            let twice = tangential_projection(&once, &n);
            assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() < 1e-15));
            let th: f64 = rng.gen_range(0.0..PI);
            let m = [th.cos(), 0.0, th.sin()];
            let p = tangential_projection(&h, &m);
            assert!(p.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-15);
        }
    }
}
