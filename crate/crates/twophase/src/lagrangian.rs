//! Lagrangian flow map, the `V0` Neumann series, transformed operators and the
//! nonlinear source terms of the two-phase system in Lagrangian coordinates,
//! for `N = 2` on the periodic field grid.
//!
//! Gradients follow `(grad v)_{ij} = d_i v_j`, `A : B = tr(A B)` and
//! `(B grad | A)_i = sum_{jk} B_{jk} d_k A_{ij}`.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::fd::diff1;
use crate::field::{inverse_tangential_transform, tangential_transform, Field, FieldGrid, Side};
use crate::quad::adaptive_gl16;
use crate::{Error, PhysicalParams, Result, C64};

/// Default truncation tolerance of [`v0_series`].
pub const V0_TOL: f64 = 1e-13;
/// Spectral radius above which [`v0_series`] inverts instead of summing.
pub const FALLBACK_RADIUS: f64 = 0.9;
/// Tolerance of the `Q` quadrature.
pub const Q_TOL: f64 = 1e-12;

type M2 = Matrix2<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct V0 {
    pub value: DMatrix<f64>,
    /// Series terms summed; zero when inverted.
    pub terms: usize,
    pub inverted: bool,
}

pub fn spectral_radius(k: &DMatrix<f64>) -> f64 {
    k.complex_eigenvalues().iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `V0(k) = sum_{j >= 1} (-k)^j`, summed until the added term is below `tol`
/// in Frobenius norm. Falls back to `(I + k)^{-1} - I` when the spectral radius
/// lies in `[0.9, 1)`.
pub fn v0_series(k: &DMatrix<f64>, tol: f64) -> Result<V0> {
    if !k.is_square() {
        return Err(Error::Dimension("k must be square".into()));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k".into()));
    }
    let r = spectral_radius(k);
    if r >= 1.0 {
        return Err(Error::Smallness(format!("spectral radius of k is {r}")));
    }
    let n = k.nrows();
    if r >= FALLBACK_RADIUS {
        log::warn!("spectral radius {r} near 1; V0 by direct inversion");
        let inv = (DMatrix::identity(n, n) + k).try_inverse().ok_or(Error::Singular(0.0))?;
        return Ok(V0 { value: inv - DMatrix::identity(n, n), terms: 0, inverted: true });
    }
    let mut term = -k.clone();
    let mut sum = term.clone();
    let mut terms = 1;
    while term.norm() >= tol {
        term = -&term * k;
        sum += &term;
        terms += 1;
        if terms > 100_000 || !term.norm().is_finite() {
            return Err(Error::Smallness("V0 series stalled".into()));
        }
    }
    Ok(V0 { value: sum, terms, inverted: false })
}

fn v0_2(k: &M2) -> Result<M2> {
    let v = v0_series(&DMatrix::from_column_slice(2, 2, k.as_slice()), V0_TOL)?;
    Ok(M2::from_column_slice(v.value.as_slice()))
}

fn inner(a: &M2, b: &M2) -> f64 {
    (a * b).trace()
}

/// Barotropic pressure law `P(rho)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PressureLaw {
    /// `coef * rho^exponent`
    Power { coef: f64, exponent: f64 },
    /// `offset + slope * rho`
    Affine { offset: f64, slope: f64 },
    /// Samples of `P, P', P''` at increasing densities; `P` by cubic Hermite,
    /// `P''` by cubic (Catmull-Rom) interpolation.
    Tabulated { rho: Vec<f64>, value: Vec<f64>, first: Vec<f64>, second: Vec<f64> },
}

impl PressureLaw {
    pub fn validate(&self) -> Result<()> {
        if let PressureLaw::Tabulated { rho, value, first, second } = self {
            let n = rho.len();
            if n < 4 || value.len() != n || first.len() != n || second.len() != n {
                return Err(Error::InvalidParams("tabulated law needs >= 4 rows of equal length".into()));
            }
            if rho.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParams("tabulated densities must increase".into()));
            }
        }
        Ok(())
    }

    fn locate(rho: &[f64], r: f64) -> Result<(usize, f64)> {
        let n = rho.len();
        if !(r >= rho[0] && r <= rho[n - 1]) {
            return Err(Error::Domain(r));
        }
        let i = rho.partition_point(|&x| x <= r).clamp(1, n - 1) - 1;
        Ok((i, (r - rho[i]) / (rho[i + 1] - rho[i])))
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        Ok(match self {
            PressureLaw::Power { coef, exponent } => coef * r.powf(*exponent),
            PressureLaw::Affine { offset, slope } => offset + slope * r,
            PressureLaw::Tabulated { rho, value, first, .. } => {
                let (i, s) = Self::locate(rho, r)?;
                let h = rho[i + 1] - rho[i];
                let (s2, s3) = (s * s, s * s * s);
                (2.0 * s3 - 3.0 * s2 + 1.0) * value[i] + (s3 - 2.0 * s2 + s) * h * first[i] + (-2.0 * s3 + 3.0 * s2) * value[i + 1] + (s3 - s2) * h * first[i + 1]
            }
        })
    }

    pub fn second(&self, r: f64) -> Result<f64> {
        Ok(match self {
            PressureLaw::Power { coef, exponent } => coef * exponent * (exponent - 1.0) * r.powf(exponent - 2.0),
            PressureLaw::Affine { .. } => 0.0,
            PressureLaw::Tabulated { rho, second, .. } => {
                let (i, s) = Self::locate(rho, r)?;
                let n = rho.len();
                let slope = |j: usize| {
                    let (a, b) = (j.saturating_sub(1), (j + 1).min(n - 1));
                    (second[b] - second[a]) / (rho[b] - rho[a])
                };
                let h = rho[i + 1] - rho[i];
                let (s2, s3) = (s * s, s * s * s);
                (2.0 * s3 - 3.0 * s2 + 1.0) * second[i] + (s3 - 2.0 * s2 + s) * h * slope(i) + (-2.0 * s3 + 3.0 * s2) * second[i + 1] + (s3 - s2) * h * slope(i + 1)
            }
        })
    }

    /// `Q(eta) = eta^2 int_0^1 P''(base + theta eta)(1 - theta) dtheta`.
    pub fn q(&self, base: f64, eta: f64) -> Result<f64> {
        if eta == 0.0 {
            return Ok(0.0);
        }
        // the density range is an interval, so its ends settle the domain
        self.second(base)?;
        self.second(base + eta)?;
        let v = adaptive_gl16(|th| self.second(base + th * eta).unwrap_or(f64::NAN) * (1.0 - th), 0.0, 1.0, Q_TOL)?;
        Ok(eta * eta * v)
    }
}

/// Samples `[x][z]` of one time level.
struct Plane {
    m: usize,
    nz: usize,
    data: Vec<f64>,
}

impl Plane {
    fn from_field(f: &Field, t: usize, c: usize) -> Self {
        let data = (0..f.m).flat_map(|x| (0..f.nz).map(move |z| (x, z))).map(|(x, z)| f.get(t, x, z, c)).collect();
        Self { m: f.m, nz: f.nz, data }
    }

    fn from_fn(m: usize, nz: usize, g: impl Fn(usize) -> f64) -> Self {
        Self { m, nz, data: (0..m * nz).map(g).collect() }
    }

    fn dx(&self, xis: &[f64]) -> Result<Self> {
        let mut out = vec![0.0; self.data.len()];
        for z in 0..self.nz {
            let col: Vec<C64> = (0..self.m).map(|x| C64::new(self.data[x * self.nz + z], 0.0)).collect();
            let mut a = tangential_transform(&col)?;
            for (v, xi) in a.iter_mut().zip(xis) {
                *v *= C64::new(0.0, *xi);
            }
            // the Nyquist mode has no real derivative
            if self.m % 2 == 0 {
                a[self.m / 2] = C64::new(0.0, 0.0);
            }
            for (x, v) in inverse_tangential_transform(&a)?.into_iter().enumerate() {
                out[x * self.nz + z] = v.re;
            }
        }
        Ok(Self { m: self.m, nz: self.nz, data: out })
    }

    fn dz(&self, h: f64) -> Self {
        let mut out = vec![0.0; self.data.len()];
        for x in 0..self.m {
            let col: Vec<C64> = (0..self.nz).map(|z| C64::new(self.data[x * self.nz + z], 0.0)).collect();
            for (z, v) in diff1(&col, h).into_iter().enumerate() {
                out[x * self.nz + z] = v.re;
            }
        }
        Self { m: self.m, nz: self.nz, data: out }
    }
}

fn side_step(grid: &FieldGrid, side: Side) -> f64 {
    let mg = grid.mode_grid();
    match side {
        Side::Upper => mg.h_upper(),
        Side::Lower => mg.h_lower(),
    }
}

/// `grad v` at every `(x, z)` of time level `t`.
fn gradient(v: &Field, grid: &FieldGrid, t: usize) -> Result<Vec<M2>> {
    let xis = grid.xis();
    let h = side_step(grid, v.side);
    let (vx, vz) = (Plane::from_field(v, t, 0), Plane::from_field(v, t, 1));
    let (a, b, c, d) = (vx.dx(&xis)?, vz.dx(&xis)?, vx.dz(h), vz.dz(h));
    Ok((0..vx.data.len()).map(|i| M2::new(a.data[i], b.data[i], c.data[i], d.data[i])).collect())
}

/// Flow map of a velocity history at one time level.
#[derive(Debug, Clone)]
pub struct LagrangianMap {
    pub t_index: usize,
    pub t: f64,
    /// `X(y, t) - y` at every `(x, z)`.
    pub displacement: Vec<Vector2<f64>>,
    /// `k = int_0^t grad v ds`.
    pub k: Vec<M2>,
    /// Max-norm surrogate of `int_0^t ||v||_{H^1_inf} ds`.
    pub smallness: f64,
}

/// Trapezoidal flow map `X = y + int_0^t v ds` and `k = int_0^t grad v ds`.
/// Fails when the smallness surrogate exceeds `delta` (which must be < 1).
pub fn lagrangian_map(v: &Field, grid: &FieldGrid, t_index: usize, delta: f64) -> Result<LagrangianMap> {
    if v.ncomp != 2 || v.n_t != grid.n_t || v.m != grid.m {
        return Err(Error::Dimension("velocity history does not match the grid".into()));
    }
    if t_index >= grid.n_t {
        return Err(Error::Dimension(format!("time index {t_index} beyond the history")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!("smallness bound must lie in (0, 1), got {delta}")));
    }
    let dt = grid.dt();
    let n = v.m * v.nz;
    let mut disp = vec![Vector2::zeros(); n];
    let mut k = vec![M2::zeros(); n];
    let mut small = 0.0;
    for s in 0..=t_index {
        let w = if t_index == 0 {
            0.0
        } else if s == 0 || s == t_index {
            0.5 * dt
        } else {
            dt
        };
        let g = gradient(v, grid, s)?;
        let mut sup = 0.0f64;
        for i in 0..n {
            let (x, z) = (i / v.nz, i % v.nz);
            let vi = Vector2::new(v.get(s, x, z, 0), v.get(s, x, z, 1));
            disp[i] += w * vi;
            k[i] += w * g[i];
            sup = sup.max(vi.norm() + g[i].norm());
        }
        small += w * sup;
    }
    if small > delta {
        return Err(Error::Smallness(format!("int ||v||_H1inf = {small} exceeds {delta}")));
    }
    Ok(LagrangianMap { t_index, t: t_index as f64 * dt, displacement: disp, k, smallness: small })
}

/// Pointwise deformation quantities derived from `k`.
#[derive(Debug, Clone)]
pub struct DeformationState {
    pub k: Vec<M2>,
    pub v0: Vec<M2>,
    /// `det(I + k)`.
    pub jacobian: Vec<f64>,
}

impl DeformationState {
    pub fn new(k: Vec<M2>) -> Result<Self> {
        let v0 = k.iter().map(v0_2).collect::<Result<Vec<_>>>()?;
        let jacobian = k.iter().map(|k| (M2::identity() + k).determinant()).collect();
        Ok(Self { k, v0, jacobian })
    }

    /// Max of `|(I + k)(I + V0) - I|`.
    pub fn inverse_defect(&self) -> f64 {
        self.k.iter().zip(&self.v0).map(|(k, v)| ((M2::identity() + k) * (M2::identity() + v) - M2::identity()).norm()).fold(0.0, f64::max)
    }
}

/// Fields entering the nonlinear sources.
#[derive(Debug, Clone)]
pub struct SourceInput {
    pub grid: FieldGrid,
    pub params: PhysicalParams,
    /// Density perturbation on the upper grid, one component.
    pub eta: Field,
    pub v_plus: Field,
    pub v_minus: Field,
    /// Lower pressure perturbation, one component.
    pub q_minus: Field,
    pub law: PressureLaw,
    pub delta: f64,
}

/// Source terms at one time level, `[x * nz + z]`; `h` on the interface, `[x]`.
#[derive(Debug, Clone, Serialize)]
pub struct SourceBundle {
    pub f_plus: Vec<f64>,
    pub g_plus: Vec<[f64; 2]>,
    pub g_minus: Vec<[f64; 2]>,
    pub g_d: Vec<f64>,
    pub frak_g_d: Vec<[f64; 2]>,
    pub h: Vec<[f64; 2]>,
}

impl SourceBundle {
    /// Max-norms of each term, in the order `f, g+, g-, g_d, frak_g_d, h`.
    pub fn max_norms(&self) -> [f64; 6] {
        let s = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let vv = |v: &[[f64; 2]]| v.iter().fold(0.0f64, |m, x| m.max(x[0].hypot(x[1])));
        [s(&self.f_plus), vv(&self.g_plus), vv(&self.g_minus), s(&self.g_d), vv(&self.frak_g_d), vv(&self.h)]
    }
}

/// Row-wise divergence `(Div A)_i = sum_j d_j A_{ij}` and `(B grad | A)`.
fn div_and_pairing(a: &[M2], b: &[M2], m: usize, nz: usize, xis: &[f64], h: f64) -> Result<(Vec<Vector2<f64>>, Vec<Vector2<f64>>)> {
    let comp = |i: usize, j: usize| Plane::from_fn(m, nz, |p| a[p][(i, j)]);
    let mut dx = vec![M2::zeros(); a.len()];
    let mut dzs = vec![M2::zeros(); a.len()];
    for i in 0..2 {
        for j in 0..2 {
            let pl = comp(i, j);
            let (px, pz) = (pl.dx(xis)?, pl.dz(h));
            for p in 0..a.len() {
                dx[p][(i, j)] = px.data[p];
                dzs[p][(i, j)] = pz.data[p];
            }
        }
    }
    let mut div = Vec::with_capacity(a.len());
    let mut pair = Vec::with_capacity(a.len());
    for p in 0..a.len() {
        let dk = [dx[p], dzs[p]];
        div.push(Vector2::new(dk[0][(0, 0)] + dk[1][(0, 1)], dk[0][(1, 0)] + dk[1][(1, 1)]));
        let mut v = Vector2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for (kk, dkk) in dk.iter().enumerate() {
                    v[i] += b[p][(j, kk)] * dkk[(i, j)];
                }
            }
        }
        pair.push(v);
    }
    Ok((div, pair))
}

fn sym(a: &M2) -> M2 {
    a + a.transpose()
}

/// Time derivative of a history at one level (second-order differences).
fn time_derivative(v: &Field, t: usize, dt: f64) -> Vec<Vector2<f64>> {
    let n = v.m * v.nz;
    (0..n)
        .map(|i| {
            let (x, z) = (i / v.nz, i % v.nz);
            let comp = |c: usize| {
                let s: Vec<C64> = (0..v.n_t).map(|tt| C64::new(v.get(tt, x, z, c), 0.0)).collect();
                diff1(&s, dt)[t].re
            };
            Vector2::new(comp(0), comp(1))
        })
        .collect()
}

/// Evaluates every source term of the linearized Lagrangian system at time
/// level `t_index`:
///
/// - `f+ = -eta div v+ - (gamma1 + eta) V0(k+) : grad v+`
/// - `g+ = -eta d_t v+ + Div(S_D(v+) - Q I) + (V0(k+) grad | S_v(v+) - gamma2 eta I - Q I)`
/// - `g- = Div(mu- D_D(v-)) + (V0(k-) grad | mu- D_v(v-) - q I)`
/// - `g_d = -V0(k-) : grad v-`, `frak_g_d = -V0(k-)^T v-`
/// - `h = T+ n - T_v+ (n_v+ - n) - T_v+ n - T- n + T_v- (n_v- - n) + T_v- n` on the interface
pub fn nonlinear_sources(input: &SourceInput, t_index: usize) -> Result<SourceBundle> {
    let g = &input.grid;
    let p = &input.params;
    input.law.validate()?;
    if !input.eta.matches(g, Side::Upper, 1) || !input.v_plus.matches(g, Side::Upper, 2) || !input.v_minus.matches(g, Side::Lower, 2) || !input.q_minus.matches(g, Side::Lower, 1) {
        return Err(Error::Dimension("source inputs do not match the grid".into()));
    }
    let xis = g.xis();
    let (hu, hl) = (side_step(g, Side::Upper), side_step(g, Side::Lower));
    let (m, nzu, nzl) = (g.m, g.n_upper + 1, g.n_lower + 1);

    // upper phase
    let mp = lagrangian_map(&input.v_plus, g, t_index, input.delta)?;
    let dp = DeformationState::new(mp.k)?;
    let gu = gradient(&input.v_plus, g, t_index)?;
    let dtv = time_derivative(&input.v_plus, t_index, g.dt());
    let nu = m * nzu;
    let mut f_plus = Vec::with_capacity(nu);
    let mut q = Vec::with_capacity(nu);
    let mut sd = Vec::with_capacity(nu);
    let mut sv_minus = Vec::with_capacity(nu);
    for i in 0..nu {
        let eta = input.eta.data[t_index * nu + i];
        let v0 = &dp.v0[i];
        let gv = &gu[i];
        let div = gv.trace();
        f_plus.push(-eta * div - (p.gamma1_plus + eta) * inner(v0, gv));
        let qi = input.law.q(p.gamma1_plus, eta)?;
        q.push(qi);
        let dd = sym(&(v0 * gv));
        sd.push(p.mu_plus * dd + (p.nu_plus - p.mu_plus) * inner(v0, gv) * M2::identity() - qi * M2::identity());
        let dv = sym(&((M2::identity() + v0) * gv));
        let sv = p.mu_plus * dv + (p.nu_plus - p.mu_plus) * inner(&(M2::identity() + v0), gv) * M2::identity();
        sv_minus.push(sv - (p.gamma2_plus * eta + qi) * M2::identity());
    }
    let (div_sd, _) = div_and_pairing(&sd, &dp.v0, m, nzu, &xis, hu)?;
    let (_, pair_u) = div_and_pairing(&sv_minus, &dp.v0, m, nzu, &xis, hu)?;
    let g_plus = (0..nu)
        .map(|i| {
            let eta = input.eta.data[t_index * nu + i];
            let v = -eta * dtv[i] + div_sd[i] + pair_u[i];
            [v[0], v[1]]
        })
        .collect();

    // lower phase
    let mm = lagrangian_map(&input.v_minus, g, t_index, input.delta)?;
    let dm = DeformationState::new(mm.k)?;
    let gl = gradient(&input.v_minus, g, t_index)?;
    let nl = m * nzl;
    let mut a_div = Vec::with_capacity(nl);
    let mut a_pair = Vec::with_capacity(nl);
    let mut g_d = Vec::with_capacity(nl);
    let mut frak = Vec::with_capacity(nl);
    for i in 0..nl {
        let v0 = &dm.v0[i];
        let gv = &gl[i];
        let qv = input.q_minus.data[t_index * nl + i];
        a_div.push(p.mu_minus * sym(&(v0 * gv)));
        a_pair.push(p.mu_minus * sym(&((M2::identity() + v0) * gv)) - qv * M2::identity());
        g_d.push(-inner(v0, gv));
        let (x, z) = (i / nzl, i % nzl);
        let v = Vector2::new(input.v_minus.get(t_index, x, z, 0), input.v_minus.get(t_index, x, z, 1));
        let f = -(v0.transpose() * v);
        frak.push([f[0], f[1]]);
    }
    let (div_l, _) = div_and_pairing(&a_div, &dm.v0, m, nzl, &xis, hl)?;
    let (_, pair_l) = div_and_pairing(&a_pair, &dm.v0, m, nzl, &xis, hl)?;
    let g_minus = (0..nl).map(|i| [div_l[i][0] + pair_l[i][0], div_l[i][1] + pair_l[i][1]]).collect();

    // interface: z index 0 above, n_lower below
    let n = Vector2::new(0.0, 1.0);
    let h = (0..m)
        .map(|x| {
            let iu = x * nzu;
            let il = x * nzl + g.n_lower;
            let eta = input.eta.data[t_index * nu + iu];
            let qv = input.q_minus.data[t_index * nl + il];
            let (gvp, gvm) = (gu[iu], gl[il]);
            let (v0p, v0m) = (dp.v0[iu], dm.v0[il]);
            let t_plus = p.mu_plus * sym(&gvp) + ((p.nu_plus - p.mu_plus) * gvp.trace() - p.gamma2_plus * eta) * M2::identity();
            let tv_plus = p.mu_plus * sym(&((M2::identity() + v0p) * gvp)) + ((p.nu_plus - p.mu_plus) * inner(&(M2::identity() + v0p), &gvp) - p.gamma2_plus * eta - q[iu]) * M2::identity();
            let t_minus = p.mu_minus * sym(&gvm) - qv * M2::identity();
            let tv_minus = p.mu_minus * sym(&((M2::identity() + v0m) * gvm)) - qv * M2::identity();
            let np = (M2::identity() + v0p) * n;
            let nm = (M2::identity() + v0m) * n;
            let (np, nm) = (np / np.norm(), nm / nm.norm());
            let v = t_plus * n - tv_plus * (np - n) - tv_plus * n - t_minus * n + tv_minus * (nm - n) + tv_minus * n;
            [v[0], v[1]]
        })
        .collect();
    Ok(SourceBundle { f_plus, g_plus, g_minus, g_d, frak_g_d: frak, h })
}

/// Discrepancies behind the interface normal identity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalReport {
    /// Max of `|n_v+ - n_v-|`.
    pub normal: f64,
    /// Max of `|A_v+ n - A_v- n|` with cofactor matrices computed directly.
    pub cofactor: f64,
    /// Max of `|J (I + V0(k)) n - A n|` over both sides.
    pub series_vs_cofactor: f64,
}

impl NormalReport {
    pub fn worst(&self) -> f64 {
        self.normal.max(self.cofactor).max(self.series_vs_cofactor)
    }
}

fn cofactor_normal(k: &M2) -> Vector2<f64> {
    // adj(I + k) e_2 for (I + k) = [[a, b], [c, d]] is (-b, a)
    let f = M2::identity() + k;
    Vector2::new(-f[(0, 1)], f[(0, 0)])
}

/// Compares the two interface normals built from `k+` and `k-` and the
/// cofactor identity `A_v+ n = A_v- n`.
pub fn normal_consistency(v_plus: &Field, v_minus: &Field, grid: &FieldGrid, t_index: usize, delta: f64) -> Result<NormalReport> {
    let mp = lagrangian_map(v_plus, grid, t_index, delta)?;
    let mm = lagrangian_map(v_minus, grid, t_index, delta)?;
    let n = Vector2::new(0.0, 1.0);
    let (nzu, nzl) = (grid.n_upper + 1, grid.n_lower + 1);
    let mut rep = NormalReport { normal: 0.0, cofactor: 0.0, series_vs_cofactor: 0.0 };
    for x in 0..grid.m {
        let kp = mp.k[x * nzu];
        let km = mm.k[x * nzl + grid.n_lower];
        let (vp, vm) = (v0_2(&kp)?, v0_2(&km)?);
        let (ap, am) = (cofactor_normal(&kp), cofactor_normal(&km));
        let (jp, jm) = ((M2::identity() + kp).determinant(), (M2::identity() + km).determinant());
        let (sp, sm) = ((M2::identity() + vp) * n, (M2::identity() + vm) * n);
        rep.normal = rep.normal.max((sp / sp.norm() - sm / sm.norm()).norm());
        rep.cofactor = rep.cofactor.max((ap - am).norm());
        rep.series_vs_cofactor = rep.series_vs_cofactor.max((jp * sp - ap).norm()).max((jm * sm - am).norm());
    }
    Ok(rep)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Smooth test fields scaled by `eps`: a divergence-free lower flow from a
/// stream function vanishing at the bottom, an upper flow with matching
/// interface trace, a density and a pressure perturbation. All vanish at `t = 0`.
pub fn perturbation(grid: &FieldGrid, eps: f64) -> (Field, Field, Field, Field) {
    let b = grid.b;
    let tw = |t: f64| t * (-t).exp();
    // psi = s(t) sin x (z + b)^2, v- = (psi_z, -psi_x)
    let v_minus = Field::from_fn(grid, Side::Lower, 2, |t, x, z| {
        let s = eps * tw(t);
        vec![s * x.sin() * 2.0 * (z + b), -s * x.cos() * (z + b).powi(2)]
    });
    // upper flow: the lower trace extended with decay, plus a compressive part vanishing at z = 0
    let v_plus = Field::from_fn(grid, Side::Upper, 2, |t, x, z| {
        let s = eps * tw(t);
        let e = (-z).exp();
        vec![s * (x.sin() * 2.0 * b * e + z * e * x.cos()), s * (-x.cos() * b * b * e + z * z * e * (2.0 * x).sin())]
    });
    let eta = Field::from_fn(grid, Side::Upper, 1, |t, x, z| vec![eps * tw(t) * (x.cos() + 0.5) * (-z).exp()]);
    let q = Field::from_fn(grid, Side::Lower, 1, |t, x, z| vec![eps * tw(t) * (x.sin() + z)]);
    (eta, v_plus, v_minus, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dm(rows: &[f64]) -> DMatrix<f64> {
        let n = (rows.len() as f64).sqrt() as usize;
        DMatrix::from_row_slice(n, n, rows)
    }

    #[test]
    fn v0_zero_is_zero() {
        let v = v0_series(&DMatrix::zeros(3, 3), V0_TOL).unwrap();
        assert!(v.value.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn v0_scalar_multiple() {
        for c in [-0.8, -0.3, 0.25, 0.85] {
            let v = v0_series(&(c * DMatrix::identity(2, 2)), V0_TOL).unwrap();
            let want = -c / (1.0 + c);
            assert!((v.value[(0, 0)] - want).abs() < 1e-12 && v.value[(0, 1)] == 0.0, "{c}");
        }
    }

    #[test]
    fn v0_nilpotent_is_finite() {
        let k = dm(&[0.0, 2.0, 3.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0]);
        let v = v0_series(&k, V0_TOL).unwrap();
        assert!(v.terms <= 3);
        let id = DMatrix::identity(3, 3);
        assert_eq!((&id + &k) * (&id + &v.value), id);
    }

    #[test]
    fn v0_rejects_and_falls_back() {
        assert!(matches!(v0_series(&(1.2 * DMatrix::identity(2, 2)), V0_TOL), Err(Error::Smallness(_))));
        let v = v0_series(&(0.95 * DMatrix::identity(2, 2)), V0_TOL).unwrap();
        assert!(v.inverted);
        assert!((v.value[(0, 0)] + 0.95 / 1.95).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn v0_inverse_identity(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0, s in 0.0f64..0.89) {
            let k = dm(&[a, b, c, d]);
            let r = spectral_radius(&k);
            prop_assume!(r > 1e-3);
            let k = k * (s / r);
            let v = v0_series(&k, V0_TOL).unwrap();
            let id = DMatrix::identity(2, 2);
            let defect = ((&id + &k) * (&id + &v.value) - &id).norm();
            // non-normal k can make the tail larger than the last term
            prop_assert!(defect < 1e-11, "{defect}");
        }
    }

    #[test]
    fn pressure_laws() {
        let sq = PressureLaw::Power { coef: 1.0, exponent: 2.0 };
        for eta in [0.3, -0.2, 1e-3] {
            assert!((sq.q(1.0, eta).unwrap() - eta * eta).abs() < 1e-12 * eta * eta);
        }
        assert_eq!(PressureLaw::Affine { offset: 1.0, slope: 3.0 }.q(1.0, 0.4).unwrap(), 0.0);
        let cubic = PressureLaw::Power { coef: 1.0, exponent: 3.0 };
        // P'' = 6 rho: Q = eta^2 (3 base + eta)
        assert!((cubic.q(2.0, 0.5).unwrap() - 0.25 * 6.5).abs() < 1e-12);
        let rho: Vec<f64> = (0..41).map(|i| 0.5 + 0.05 * i as f64).collect();
        let tab = PressureLaw::Tabulated {
            value: rho.iter().map(|r| r.powi(3)).collect(),
            first: rho.iter().map(|r| 3.0 * r * r).collect(),
            second: rho.iter().map(|r| 6.0 * r).collect(),
            rho,
        };
        assert!((tab.value(1.23).unwrap() - 1.23f64.powi(3)).abs() < 1e-12);
        assert!((tab.q(1.0, 0.3).unwrap() - 0.09 * 3.3).abs() < 1e-12);
        assert!(matches!(tab.value(3.0), Err(Error::Domain(_))));
    }

    fn grid() -> FieldGrid {
        FieldGrid { m: 16, n_t: 16, n_lower: 16, n_upper: 32, x_max: 8.0, t_end: 1.0, ..Default::default() }
    }

    #[test]
    fn flow_map_examples() {
        let g = grid();
        let zero = Field::zeros(&g, Side::Lower, 2);
        let lm = lagrangian_map(&zero, &g, 8, 0.5).unwrap();
        assert!(lm.displacement.iter().all(|d| d.norm() == 0.0) && lm.k.iter().all(|k| k.norm() == 0.0));
        let c = Field::from_fn(&g, Side::Lower, 2, |_, _, _| vec![0.1, -0.2]);
        let lm = lagrangian_map(&c, &g, 8, 0.5).unwrap();
        let t = lm.t;
        assert!(lm.displacement.iter().all(|d| (d - Vector2::new(0.1 * t, -0.2 * t)).norm() < 1e-15));
        assert!(lm.k.iter().all(|k| k.norm() < 1e-15));
        // v = (z, 0): d_z v_x = 1 sits at (1, 0)
        let shear = Field::from_fn(&g, Side::Lower, 2, |_, _, z| vec![0.2 * z, 0.0]);
        let lm = lagrangian_map(&shear, &g, 8, 0.5).unwrap();
        let want = M2::new(0.0, 0.0, 0.2 * lm.t, 0.0);
        assert!(lm.k.iter().all(|k| (k - want).norm() < 1e-13));
        let dstate = DeformationState::new(lm.k).unwrap();
        assert!(dstate.jacobian.iter().all(|j| (j - 1.0).abs() < 1e-14));
        assert!(dstate.inverse_defect() < 1e-15);
        let big = Field::from_fn(&g, Side::Lower, 2, |_, _, _| vec![3.0, 0.0]);
        assert!(matches!(lagrangian_map(&big, &g, 15, 0.5), Err(Error::Smallness(_))));
    }

    fn input(g: &FieldGrid, eps: f64) -> SourceInput {
        let (eta, v_plus, v_minus, q_minus) = perturbation(g, eps);
        SourceInput { grid: *g, params: PhysicalParams::default(), eta, v_plus, v_minus, q_minus, law: PressureLaw::Power { coef: 1.0, exponent: 1.4 }, delta: 0.9 }
    }

    #[test]
    fn zero_fields_zero_sources() {
        let g = grid();
        let s = nonlinear_sources(&input(&g, 0.0), 10).unwrap();
        assert_eq!(s.max_norms(), [0.0; 6]);
    }

    #[test]
    fn lower_sources_vanish_without_lower_flow() {
        let g = grid();
        let mut inp = input(&g, 1e-2);
        inp.v_minus = Field::zeros(&g, Side::Lower, 2);
        let s = nonlinear_sources(&inp, 10).unwrap();
        let n = s.max_norms();
        assert_eq!((n[3], n[4]), (0.0, 0.0));
        assert!(n[0] > 0.0);
    }

    #[test]
    fn sources_are_quadratic() {
        let g = grid();
        let eps = [1e-2, 1e-3, 1e-4];
        let norms: Vec<[f64; 6]> = eps.iter().map(|e| nonlinear_sources(&input(&g, *e), 10).unwrap().max_norms()).collect();
        for c in 0..6 {
            let y: Vec<f64> = norms.iter().map(|n| n[c]).collect();
            let s = log_slope(&eps, &y);
            assert!(s >= 1.9, "term {c}: slope {s}, {y:?}");
        }
    }

    #[test]
    fn normals_agree_on_matched_traces() {
        let g = grid();
        let (_, vp, vm, _) = perturbation(&g, 0.05);
        let z = Field::zeros(&g, Side::Upper, 2);
        let zl = Field::zeros(&g, Side::Lower, 2);
        let rep = normal_consistency(&z, &zl, &g, 10, 0.9).unwrap();
        assert_eq!(rep.worst(), 0.0);
        let rep = normal_consistency(&vp, &vm, &g, 10, 0.9).unwrap();
        assert!(rep.worst() < 1e-10, "{rep:?}");
        // break the trace match
        let bad = Field::from_fn(&g, Side::Upper, 2, |t, x, zz| vec![vp.get(0, 0, 0, 0) + 0.05 * t * x.sin() * (-zz).exp(), 0.0]);
        let rep = normal_consistency(&bad, &vm, &g, 10, 0.9).unwrap();
        assert!(rep.normal > 1e-4 && rep.cofactor > 1e-4, "{rep:?}");
    }
}
