//! Second-order finite-difference solver for a single Fourier mode, used as an
//! independent check of the closed form and for problems with interior sources.

mod compare;
mod pressure;
mod solve;

pub use compare::{compare_oracle, convergence_csv, observed_orders, richardson_order, ConvergenceRecord, OracleError};
pub use pressure::{pressure_k_mode, solve_k_problem};
pub use solve::{full_resolvent_mode, solve_mode_fd};

use serde::{Deserialize, Serialize};

use crate::mode::BoundaryDataHat;
use crate::symbols::char_roots;
use crate::{Error, PhysicalParams, Result, SpectralPoint, C64};

/// Node-major vector profile: `profile[node][component]`.
pub type Profile = Vec<Vec<C64>>;

/// Default truncation factor: `X_max = 28 / Re min(A+, B+)`.
pub const X_MAX_FACTOR: f64 = 28.0;

/// Uniform grids on `[-b, 0]` and `[0, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub b: f64,
    pub x_max: f64,
    pub n_lower: usize,
    pub n_upper: usize,
}

impl ModeGrid {
    pub fn new(b: f64, x_max: f64, n_lower: usize, n_upper: usize) -> Result<Self> {
        if !(b > 0.0 && x_max > 0.0) || n_lower < 4 || n_upper < 4 {
            return Err(Error::InvalidParams(format!("grid b={b} x_max={x_max} n=({n_lower},{n_upper})")));
        }
        Ok(Self { b, x_max, n_lower, n_upper })
    }

    /// Truncation length for a mode, `28 / Re min(A+, B+)` clamped to `[5, 200]`.
    pub fn default_x_max(pt: &SpectralPoint, params: &PhysicalParams) -> Result<f64> {
        let r = char_roots(pt, params)?;
        Ok((X_MAX_FACTOR / r.a_plus.re.min(r.b_plus.re)).clamp(5.0, 200.0))
    }

    /// Grid with about `n` points per boundary-layer width on each side.
    pub fn resolved(pt: &SpectralPoint, params: &PhysicalParams, n: usize) -> Result<Self> {
        let x_max = Self::default_x_max(pt, params)?;
        Self::resolved_with(pt, params, n, x_max)
    }

    pub fn resolved_with(pt: &SpectralPoint, params: &PhysicalParams, n: usize, x_max: f64) -> Result<Self> {
        let r = char_roots(pt, params)?;
        let b = params.b;
        let len_lo = b.min(1.0 / r.b_minus.norm().max(r.a));
        let len_up = 1f64.min(1.0 / r.b_plus.norm().max(r.a_plus.norm()));
        let n_lower = ((b / len_lo) * n as f64).ceil() as usize;
        let n_upper = ((x_max / len_up) * n as f64).ceil() as usize;
        Self::new(b, x_max, n_lower.max(4), n_upper.max(4))
    }

    pub fn h_lower(&self) -> f64 {
        self.b / self.n_lower as f64
    }

    pub fn h_upper(&self) -> f64 {
        self.x_max / self.n_upper as f64
    }

    /// Same extents with both spacings halved.
    pub fn refined(&self) -> Self {
        Self { n_lower: 2 * self.n_lower, n_upper: 2 * self.n_upper, ..*self }
    }

    pub fn lower_nodes(&self) -> Vec<f64> {
        let h = self.h_lower();
        (0..=self.n_lower).map(|i| -self.b + i as f64 * h).collect()
    }

    pub fn upper_nodes(&self) -> Vec<f64> {
        let h = self.h_upper();
        (0..=self.n_upper).map(|i| i as f64 * h).collect()
    }
}

/// Interior sources and interface data for one mode. Missing profiles are zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSources {
    pub f_plus: Option<Vec<C64>>,
    pub g_plus: Option<Profile>,
    pub g_minus: Option<Profile>,
    pub g_d: Option<Vec<C64>>,
    pub frak_g_d: Option<Profile>,
    pub data: BoundaryDataHat,
}

impl ModeSources {
    pub fn boundary_only(data: BoundaryDataHat) -> Self {
        Self { f_plus: None, g_plus: None, g_minus: None, g_d: None, frak_g_d: None, data }
    }

    fn check(&self, grid: &ModeGrid, n: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Dimension(format!("source {what} does not match grid")));
        if self.data.h.len() != n || self.data.k.len() != n {
            return bad("data");
        }
        if self.f_plus.as_ref().is_some_and(|f| f.len() != grid.n_upper + 1) {
            return bad("f_plus");
        }
        if self.g_d.as_ref().is_some_and(|f| f.len() != grid.n_lower + 1) {
            return bad("g_d");
        }
        for (name, prof, len) in [("g_plus", &self.g_plus, grid.n_upper + 1), ("g_minus", &self.g_minus, grid.n_lower + 1), ("frak_g_d", &self.frak_g_d, grid.n_lower + 1)] {
            if prof.as_ref().is_some_and(|p| p.len() != len || p.iter().any(|r| r.len() != n)) {
                return bad(name);
            }
        }
        Ok(())
    }

    /// Max defect of `g_d = i xi'.frak_g' + d_N frak_g_N` on the lower grid,
    /// relative to the size of `g_d`; `None` unless both are present.
    pub fn divergence_consistency(&self, xi: &[f64], grid: &ModeGrid) -> Option<f64> {
        let (gd, fg) = (self.g_d.as_ref()?, self.frak_g_d.as_ref()?);
        let n = xi.len() + 1;
        let normal: Vec<C64> = fg.iter().map(|r| r[n - 1]).collect();
        let dn = diff1(&normal, grid.h_lower());
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..gd.len() {
            let d: C64 = (0..n - 1).map(|j| C64::new(0.0, xi[j]) * fg[i][j]).sum::<C64>() + dn[i];
            worst = worst.max((d - gd[i]).norm());
            scale = scale.max(gd[i].norm());
        }
        Some(if scale == 0.0 { worst } else { worst / scale })
    }
}

/// Discrete profiles returned by the finite-difference solvers.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteModeSolution {
    pub point: SpectralPoint,
    pub grid: ModeGrid,
    pub upper: Profile,
    pub lower: Profile,
    /// Pressure at cell midpoints of the lower grid.
    pub pressure_mid: Vec<C64>,
    /// Pressure interpolated to the lower nodes.
    pub pressure: Vec<C64>,
    pub rho_plus: Option<Vec<C64>>,
    /// Smallest over largest pivot magnitude of the banded factorization.
    pub pivot_ratio: f64,
}

impl DiscreteModeSolution {
    pub fn dim(&self) -> usize {
        self.point.dim()
    }

    /// Max residual of `lambda rho + gamma1 div v = f` on the upper grid with
    /// a fourth-order divergence, divided by the largest term.
    pub fn mass_residual(&self, params: &PhysicalParams, f_plus: Option<&[C64]>) -> Option<f64> {
        let rho = self.rho_plus.as_ref()?;
        let div = divergence(&self.upper, &self.point.xi, self.grid.h_upper(), true);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..rho.len() {
            let f = f_plus.map_or(C64::new(0.0, 0.0), |f| f[i]);
            let a = self.point.lambda * rho[i];
            let b = params.gamma1_plus * div[i];
            worst = worst.max((a + b - f).norm());
            scale = scale.max(a.norm()).max(b.norm()).max(f.norm());
        }
        Some(if scale == 0.0 { 0.0 } else { worst / scale })
    }
}

/// Second-order first derivative: centered inside, one-sided at the ends.
pub fn diff1(u: &[C64], h: f64) -> Vec<C64> {
    let n = u.len();
    assert!(n >= 3);
    let mut d = vec![C64::new(0.0, 0.0); n];
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    d
}

/// Second-order second derivative: centered inside, one-sided at the ends.
pub fn diff2(u: &[C64], h: f64) -> Vec<C64> {
    let n = u.len();
    assert!(n >= 4);
    let h2 = h * h;
    let mut d = vec![C64::new(0.0, 0.0); n];
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
    }
    d[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
    d[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    d
}

/// Fourth-order first derivative (five-point stencils, one-sided near the ends).
fn diff1_high(u: &[C64], h: f64) -> Vec<C64> {
    let n = u.len();
    if n < 5 {
        return diff1(u, h);
    }
    let mut d = vec![C64::new(0.0, 0.0); n];
    for i in 2..n - 2 {
        d[i] = (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) / (12.0 * h);
    }
    let fwd = |k: usize| (-25.0 * u[k] + 48.0 * u[k + 1] - 36.0 * u[k + 2] + 16.0 * u[k + 3] - 3.0 * u[k + 4]) / (12.0 * h);
    let skew = |k: usize| (-3.0 * u[k - 1] - 10.0 * u[k] + 18.0 * u[k + 1] - 6.0 * u[k + 2] + u[k + 3]) / (12.0 * h);
    let bwd = |k: usize| (25.0 * u[k] - 48.0 * u[k - 1] + 36.0 * u[k - 2] - 16.0 * u[k - 3] + 3.0 * u[k - 4]) / (12.0 * h);
    let bskew = |k: usize| (3.0 * u[k + 1] + 10.0 * u[k] - 18.0 * u[k - 1] + 6.0 * u[k - 2] - u[k - 3]) / (12.0 * h);
    d[0] = fwd(0);
    d[1] = skew(1);
    d[n - 1] = bwd(n - 1);
    d[n - 2] = bskew(n - 2);
    d
}

fn component(p: &Profile, c: usize) -> Vec<C64> {
    p.iter().map(|r| r[c]).collect()
}

/// `i xi'.v' + d_N v_N` on a uniform grid.
pub(crate) fn divergence(v: &Profile, xi: &[f64], h: f64, high: bool) -> Vec<C64> {
    let nt = xi.len();
    let vn = component(v, nt);
    let dn = if high { diff1_high(&vn, h) } else { diff1(&vn, h) };
    v.iter().zip(dn).map(|(r, d)| (0..nt).map(|j| C64::new(0.0, xi[j]) * r[j]).sum::<C64>() + d).collect()
}
