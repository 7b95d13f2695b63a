use rayon::prelude::*;
use serde::Serialize;

use super::data::DataBundle;
use super::grid::{Field, FieldGrid};
use super::transform::{inverse_laplace_transform, inverse_tangential_transform, laplace_points, laplace_transform, time_derivative, TAPER_FRACTION};
use crate::fd::{diff1, diff2, full_resolvent_mode, ModeGrid, ModeSources};
use crate::mode::{eval_mode_solution, solve_coefficients, BoundaryDataHat, Checker, Groups, A_MIN};
use crate::regions::region_contains;
use crate::{Error, PhysicalParams, Result, SpectralPoint, C64};

/// Tangential modes whose data amplitude is below this fraction of the largest
/// are treated as zero.
pub const ACTIVE_TOL: f64 = 1e-13;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Serialize)]
pub struct EvolveOptions {
    pub gamma: f64,
    /// Number of interior probe heights on each side.
    pub upper_probes: usize,
    pub lower_probes: usize,
    /// Time indices at which full fields are kept.
    pub snapshots: Vec<usize>,
}

impl EvolveOptions {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, upper_probes: 16, lower_probes: 8, snapshots: vec![0] }
    }
}

/// Per-tangential-mode Laplace samples of one datum, `[k][z][c]`.
struct ModeField {
    nz: usize,
    ncomp: usize,
    modes: Vec<Option<Vec<C64>>>,
}

impl ModeField {
    fn profile(&self, m: usize, k: usize, c: usize) -> Vec<C64> {
        let v = self.modes[m].as_ref().expect("inactive mode");
        (0..self.nz).map(|z| v[(k * self.nz + z) * self.ncomp + c]).collect()
    }
}

fn tangential_pass(f: &Field) -> Vec<C64> {
    let lines = f.nz * f.ncomp;
    let per_t = f.m * lines;
    let s = 1.0 / f.m as f64;
    let mut out = vec![ZERO; f.data.len()];
    out.par_chunks_mut(per_t).enumerate().for_each(|(t, chunk)| {
        // one batched transform over all (z, c) lines of this time level
        let mut buf = vec![ZERO; per_t];
        let src = &f.data[t * per_t..(t + 1) * per_t];
        for x in 0..f.m {
            for l in 0..lines {
                buf[l * f.m + x] = C64::new(src[x * lines + l], 0.0);
            }
        }
        super::transform::fft_batch(&mut buf, f.m, false);
        for l in 0..lines {
            for m in 0..f.m {
                chunk[m * lines + l] = buf[l * f.m + m] * s;
            }
        }
    });
    out
}

struct ModeData {
    active: Vec<usize>,
    fields: [Option<ModeField>; 7],
}

const F_PLUS: usize = 0;
const G_PLUS: usize = 1;
const G_MINUS: usize = 2;
const G_D: usize = 3;
const FRAK_G_D: usize = 4;
const H_UPPER: usize = 5;
const H_LOWER: usize = 6;

fn bundle_fields(d: &DataBundle) -> [Option<&Field>; 7] {
    [d.f_plus.as_ref(), d.g_plus.as_ref(), d.g_minus.as_ref(), d.g_d.as_ref(), d.frak_g_d.as_ref(), d.h_upper.as_ref(), d.h_lower.as_ref()]
}

fn transform_data(data: &DataBundle, grid: &FieldGrid, gamma: f64) -> Result<ModeData> {
    let fields = bundle_fields(data);
    let tang: Vec<Option<Vec<C64>>> = fields.par_iter().map(|f| f.map(tangential_pass)).collect();
    let mut amp = vec![0.0f64; grid.m];
    for (f, t) in fields.iter().zip(&tang) {
        if let (Some(f), Some(t)) = (f, t) {
            for (k, block) in t.chunks(f.nz * f.ncomp).enumerate() {
                let m = k % f.m;
                amp[m] = block.iter().fold(amp[m], |a, v| a.max(v.norm_sqr()));
            }
        }
    }
    let peak = amp.iter().cloned().fold(0.0, f64::max);
    // amp holds squared magnitudes
    let active: Vec<usize> = (0..grid.m).filter(|&m| peak > 0.0 && amp[m] > ACTIVE_TOL * ACTIVE_TOL * peak).collect();
    let dt = grid.dt();
    let mut out: [Option<ModeField>; 7] = Default::default();
    for (slot, (f, t)) in fields.iter().zip(tang).enumerate() {
        let (Some(f), Some(t)) = (f, t) else { continue };
        let mut modes = vec![None; grid.m];
        let built: Vec<(usize, Vec<C64>)> = active
            .par_iter()
            .map(|&m| {
                let mut v = vec![ZERO; f.n_t * f.nz * f.ncomp];
                for z in 0..f.nz {
                    for c in 0..f.ncomp {
                        let series: Vec<C64> = (0..f.n_t).map(|tt| t[f.idx(tt, m, z, c)]).collect();
                        let hat = laplace_transform(&series, dt, gamma)?;
                        for (k, h) in hat.into_iter().enumerate() {
                            v[(k * f.nz + z) * f.ncomp + c] = h;
                        }
                    }
                }
                Ok((m, v))
            })
            .collect::<Result<_>>()?;
        for (m, v) in built {
            modes[m] = Some(v);
        }
        out[slot] = Some(ModeField { nz: f.nz, ncomp: f.ncomp, modes });
    }
    Ok(ModeData { active, fields: out })
}

/// Full vertical profiles of one mode solution and the derivatives used by
/// the residual and the norms.
struct ModeQuantities {
    up_v: Vec<[C64; 2]>,
    up_dv: Vec<[C64; 2]>,
    up_d2v: Vec<[C64; 2]>,
    rho: Vec<C64>,
    drho: Vec<C64>,
    lo_v: Vec<[C64; 2]>,
    lo_dv: Vec<[C64; 2]>,
    lo_d2v: Vec<[C64; 2]>,
    p: Vec<C64>,
    dp: Vec<C64>,
    /// Tangential velocity and `d_N v_N` on each lower cell.
    mid_vt: Vec<C64>,
    mid_dvn: Vec<C64>,
}

fn pairs(rows: &[Vec<C64>]) -> Vec<[C64; 2]> {
    rows.iter().map(|r| [r[0], r[1]]).collect()
}

fn derive(v: &[[C64; 2]], h: f64, second: bool) -> Vec<[C64; 2]> {
    let d: Vec<Vec<C64>> = (0..2)
        .map(|c| {
            let col: Vec<C64> = v.iter().map(|r| r[c]).collect();
            if second {
                diff2(&col, h)
            } else {
                diff1(&col, h)
            }
        })
        .collect();
    (0..v.len()).map(|i| [d[0][i], d[1][i]]).collect()
}

fn closed_form_quantities(pt: &SpectralPoint, params: &PhysicalParams, h: [C64; 2], mg: &ModeGrid) -> Result<ModeQuantities> {
    let data = BoundaryDataHat { h: h.to_vec(), k: vec![ZERO; 2] };
    let sol = eval_mode_solution(&solve_coefficients(pt, params, &data)?, pt, params)?;
    let xi = pt.xi[0];
    let l = pt.lambda;
    let g1 = params.gamma1_plus;
    let (mut up_v, mut up_dv, mut up_d2v, mut rho, mut drho) = (vec![], vec![], vec![], vec![], vec![]);
    for x in mg.upper_nodes() {
        let j = sol.v_plus(x)?;
        up_v.push([j.value[0], j.value[1]]);
        up_dv.push([j.d1[0], j.d1[1]]);
        up_d2v.push([j.d2[0], j.d2[1]]);
        rho.push(-g1 * (I * xi * j.value[0] + j.d1[1]) / l);
        drho.push(-g1 * (I * xi * j.d1[0] + j.d2[1]) / l);
    }
    let (mut lo_v, mut lo_dv, mut lo_d2v, mut p, mut dp) = (vec![], vec![], vec![], vec![], vec![]);
    for x in mg.lower_nodes() {
        let j = sol.v_minus(x)?;
        lo_v.push([j.value[0], j.value[1]]);
        lo_dv.push([j.d1[0], j.d1[1]]);
        lo_d2v.push([j.d2[0], j.d2[1]]);
        let pr = sol.p_minus(x)?;
        p.push(pr[0]);
        dp.push(pr[1]);
    }
    let hl = mg.h_lower();
    let (mut mid_vt, mut mid_dvn) = (vec![], vec![]);
    for x in mg.lower_nodes().iter().take(mg.n_lower) {
        let j = sol.v_minus(x + 0.5 * hl)?;
        mid_vt.push(j.value[0]);
        mid_dvn.push(j.d1[1]);
    }
    Ok(ModeQuantities { up_v, up_dv, up_d2v, rho, drho, lo_v, lo_dv, lo_d2v, p, dp, mid_vt, mid_dvn })
}

fn fd_quantities(pt: &SpectralPoint, params: &PhysicalParams, src: &ModeSources, mg: &ModeGrid) -> Result<ModeQuantities> {
    let sol = full_resolvent_mode(pt, params, src, mg)?;
    let (hl, hu) = (mg.h_lower(), mg.h_upper());
    let xi = pt.xi[0];
    let l = pt.lambda;
    let up_v = pairs(&sol.upper);
    let up_dv = derive(&up_v, hu, false);
    let up_d2v = derive(&up_v, hu, true);
    let rho = sol.rho_plus.clone().unwrap_or_default();
    let df = src.f_plus.as_ref().map(|f| diff1(f, hu));
    let drho = (0..up_v.len())
        .map(|i| {
            let d = df.as_ref().map_or(ZERO, |d| d[i]);
            (d - params.gamma1_plus * (I * xi * up_dv[i][0] + up_d2v[i][1])) / l
        })
        .collect();
    let lo_v = pairs(&sol.lower);
    let lo_dv = derive(&lo_v, hl, false);
    let lo_d2v = derive(&lo_v, hl, true);
    let p = sol.pressure.clone();
    let ends = diff1(&p, hl);
    let ml = mg.n_lower;
    let dp = (0..=ml)
        .map(|i| if i == 0 || i == ml { ends[i] } else { (sol.pressure_mid[i] - sol.pressure_mid[i - 1]) / hl })
        .collect();
    let mid_vt = (0..ml).map(|i| 0.5 * (lo_v[i][0] + lo_v[i + 1][0])).collect();
    let mid_dvn = (0..ml).map(|i| (lo_v[i + 1][1] - lo_v[i][1]) / hl).collect();
    Ok(ModeQuantities { up_v, up_dv, up_d2v, rho, drho, lo_v, lo_dv, lo_d2v, p, dp, mid_vt, mid_dvn })
}

/// `int |u|^2 dz` by the trapezoid rule.
fn sq_integral(vals: impl Iterator<Item = f64>, n: usize, h: f64) -> f64 {
    vals.enumerate().map(|(i, v)| if i == 0 || i == n - 1 { 0.5 * v } else { v }).sum::<f64>() * h
}

fn vec_sq(v: &[[C64; 2]], h: f64) -> f64 {
    sq_integral(v.iter().map(|r| r[0].norm_sqr() + r[1].norm_sqr()), v.len(), h)
}

fn scal_sq(v: &[C64], h: f64) -> f64 {
    sq_integral(v.iter().map(|r| r.norm_sqr()), v.len(), h)
}

/// Vertical integrals of squared solution profiles for one `(lambda, xi)`.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SolutionIntegrals {
    pub rho: f64,
    pub drho: f64,
    pub p: f64,
    pub dp: f64,
    pub vp: f64,
    pub dvp: f64,
    pub d2vp: f64,
    pub vm: f64,
    pub dvm: f64,
    pub d2vm: f64,
}

/// Vertical integrals of squared data profiles for one `(lambda, xi)`.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct DataIntegrals {
    pub f: f64,
    pub df: f64,
    pub gp: f64,
    pub gm: f64,
    pub gd: f64,
    pub dgd: f64,
    pub frak: f64,
    pub hu: f64,
    pub dhu: f64,
    pub hl: f64,
    pub dhl: f64,
}

/// Integrals for one mode, tagged by its `lambda` and `|xi|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModeIntegrals {
    pub lambda: C64,
    pub a: f64,
    pub solution: SolutionIntegrals,
    pub data: DataIntegrals,
}

fn solution_integrals(q: &ModeQuantities, mg: &ModeGrid) -> SolutionIntegrals {
    let (hl, hu) = (mg.h_lower(), mg.h_upper());
    SolutionIntegrals {
        rho: scal_sq(&q.rho, hu),
        drho: scal_sq(&q.drho, hu),
        p: scal_sq(&q.p, hl),
        dp: scal_sq(&q.dp, hl),
        vp: vec_sq(&q.up_v, hu),
        dvp: vec_sq(&q.up_dv, hu),
        d2vp: vec_sq(&q.up_d2v, hu),
        vm: vec_sq(&q.lo_v, hl),
        dvm: vec_sq(&q.lo_dv, hl),
        d2vm: vec_sq(&q.lo_d2v, hl),
    }
}

fn data_integrals(md: &ModeData, m: usize, k: usize, mg: &ModeGrid) -> DataIntegrals {
    let (hl, hu) = (mg.h_lower(), mg.h_upper());
    let get = |slot: usize, c: usize| md.fields[slot].as_ref().map(|f| f.profile(m, k, c));
    let both = |slot: usize, h: f64| -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        let nc = md.fields[slot].as_ref().map_or(0, |f| f.ncomp);
        for c in 0..nc {
            let p = get(slot, c).unwrap();
            v += scal_sq(&p, h);
            d += scal_sq(&diff1(&p, h), h);
        }
        (v, d)
    };
    let (f, df) = both(F_PLUS, hu);
    let (gd, dgd) = both(G_D, hl);
    let (hu_v, hu_d) = both(H_UPPER, hu);
    let (hl_v, hl_d) = both(H_LOWER, hl);
    DataIntegrals { f, df, gp: both(G_PLUS, hu).0, gm: both(G_MINUS, hl).0, gd, dgd, frak: both(FRAK_G_D, hl).0, hu: hu_v, dhu: hu_d, hl: hl_v, dhl: hl_d }
}

/// Which probe values are stored, and where.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeSet {
    pub upper: Vec<usize>,
    pub lower: Vec<usize>,
}

const UPPER_Q: usize = 8;
const LOWER_Q: usize = 10;
const IFACE_Q: usize = 10;

impl ProbeSet {
    fn new(mg: &ModeGrid, nu: usize, nl: usize) -> Self {
        let pick = |n: usize, count: usize| -> Vec<usize> {
            let stride = (n / (count + 1)).max(1);
            (1..n).step_by(stride).take(count).collect()
        };
        Self { upper: pick(mg.n_upper, nu), lower: pick(mg.n_lower, nl) }
    }

    fn len(&self) -> usize {
        self.upper.len() * UPPER_Q + self.lower.len() * LOWER_Q + IFACE_Q + 2
    }

    fn upper_at(&self, u: usize, q: usize) -> usize {
        u * UPPER_Q + q
    }

    fn lower_at(&self, l: usize, q: usize) -> usize {
        self.upper.len() * UPPER_Q + l * LOWER_Q + q
    }

    fn iface_at(&self, q: usize) -> usize {
        self.upper.len() * UPPER_Q + self.lower.len() * LOWER_Q + q
    }

    fn bottom_at(&self, c: usize) -> usize {
        self.iface_at(IFACE_Q) + c
    }

    fn collect(&self, q: &ModeQuantities) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.len());
        for &i in &self.upper {
            out.extend([q.up_v[i][0], q.up_v[i][1], q.up_dv[i][0], q.up_dv[i][1], q.up_d2v[i][0], q.up_d2v[i][1], q.rho[i], q.drho[i]]);
        }
        for &i in &self.lower {
            out.extend([q.lo_v[i][0], q.lo_v[i][1], q.lo_dv[i][0], q.lo_dv[i][1], q.lo_d2v[i][0], q.lo_d2v[i][1], q.p[i], q.dp[i], q.mid_vt[i], q.mid_dvn[i]]);
        }
        let ml = q.lo_v.len() - 1;
        out.extend([q.up_v[0][0], q.up_v[0][1], q.up_dv[0][0], q.up_dv[0][1], q.lo_v[ml][0], q.lo_v[ml][1], q.lo_dv[ml][0], q.lo_dv[ml][1], q.p[ml], q.rho[0]]);
        out.extend([q.lo_v[0][0], q.lo_v[0][1]]);
        out
    }
}

/// Full fields at one time level, indexed `[x][z]` (velocities `[x][z][c]`).
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t_index: usize,
    pub t: f64,
    pub v_plus: Vec<Vec<[C64; 2]>>,
    pub v_minus: Vec<Vec<[C64; 2]>>,
    pub pressure: Vec<Vec<C64>>,
    pub rho: Vec<Vec<C64>>,
    /// Normal derivatives on the interface, `[x][side][c]` with side 0 upper, 1 lower.
    pub interface_dz: Vec<[[C64; 2]; 2]>,
}

/// Output of [`evolve`]: solution samples at probe heights for every `(t, x)`,
/// full snapshots at selected times and the per-mode norm integrals.
#[derive(Debug, Clone, Serialize)]
pub struct EvolveResult {
    pub grid: FieldGrid,
    pub gamma: f64,
    pub params: PhysicalParams,
    pub active_modes: Vec<usize>,
    pub closed_form_solves: usize,
    pub fd_solves: usize,
    pub probes: ProbeSet,
    /// `[quantity][t * m + x]`.
    #[serde(skip)]
    probe_fields: Vec<Vec<C64>>,
    pub integrals: Vec<ModeIntegrals>,
    pub snapshots: Vec<Snapshot>,
    pub taper_fraction: f64,
    /// Largest imaginary part of the synthesized probe values relative to their size.
    pub imag_ratio: f64,
}

impl EvolveResult {
    fn series(&self, q: usize) -> &[C64] {
        &self.probe_fields[q]
    }

    /// Velocity component `c` at upper probe `u`, `[t * m + x]`.
    pub fn upper_velocity(&self, u: usize, c: usize) -> &[C64] {
        self.series(self.probes.upper_at(u, c))
    }

    pub fn lower_velocity(&self, l: usize, c: usize) -> &[C64] {
        self.series(self.probes.lower_at(l, c))
    }

    pub fn lower_pressure(&self, l: usize) -> &[C64] {
        self.series(self.probes.lower_at(l, 6))
    }

    pub fn upper_density(&self, u: usize) -> &[C64] {
        self.series(self.probes.upper_at(u, 6))
    }

    /// Interface velocity from above, component `c`.
    pub fn interface_velocity(&self, c: usize) -> &[C64] {
        self.series(self.probes.iface_at(c))
    }
}

fn mode_sources(md: &ModeData, m: usize, k: usize) -> ModeSources {
    let scalar = |slot: usize| md.fields[slot].as_ref().map(|f| f.profile(m, k, 0));
    let vector = |slot: usize| {
        md.fields[slot].as_ref().map(|f| {
            let (a, b) = (f.profile(m, k, 0), f.profile(m, k, 1));
            a.into_iter().zip(b).map(|(x, y)| vec![x, y]).collect()
        })
    };
    let h = md.fields[H_UPPER].as_ref().map_or(vec![ZERO; 2], |f| vec![f.profile(m, k, 0)[0], f.profile(m, k, 1)[0]]);
    ModeSources {
        f_plus: scalar(F_PLUS),
        g_plus: vector(G_PLUS),
        g_minus: vector(G_MINUS),
        g_d: scalar(G_D),
        frak_g_d: vector(FRAK_G_D),
        data: BoundaryDataHat { h, k: vec![ZERO; 2] },
    }
}

struct ModeRun {
    m: usize,
    probes: Vec<Vec<C64>>,
    integrals: Vec<ModeIntegrals>,
    snaps: Vec<ModeQuantitiesSlice>,
    closed: usize,
    fd: usize,
}

/// Accumulated time-slice of one tangential mode.
#[derive(Clone)]
struct ModeQuantitiesSlice {
    up: Vec<[C64; 2]>,
    lo: Vec<[C64; 2]>,
    p: Vec<C64>,
    rho: Vec<C64>,
    dz: [[C64; 2]; 2],
}

impl ModeQuantitiesSlice {
    fn zeros(mg: &ModeGrid) -> Self {
        Self { up: vec![[ZERO; 2]; mg.n_upper + 1], lo: vec![[ZERO; 2]; mg.n_lower + 1], p: vec![ZERO; mg.n_lower + 1], rho: vec![ZERO; mg.n_upper + 1], dz: [[ZERO; 2]; 2] }
    }

    fn axpy(&mut self, w: C64, q: &ModeQuantities) {
        for (a, b) in self.up.iter_mut().zip(&q.up_v) {
            a[0] += w * b[0];
            a[1] += w * b[1];
        }
        for (a, b) in self.lo.iter_mut().zip(&q.lo_v) {
            a[0] += w * b[0];
            a[1] += w * b[1];
        }
        for (a, b) in self.p.iter_mut().zip(&q.p) {
            *a += w * b;
        }
        for (a, b) in self.rho.iter_mut().zip(&q.rho) {
            *a += w * b;
        }
        let ml = q.lo_dv.len() - 1;
        for c in 0..2 {
            self.dz[0][c] += w * q.up_dv[0][c];
            self.dz[1][c] += w * q.lo_dv[ml][c];
        }
    }
}

/// Zero-initial-data evolution: Laplace transform in time (`lambda = gamma + i tau`)
/// and Fourier transform along the interface, a resolvent solve per mode
/// (closed form for boundary data, finite differences when interior sources are
/// present or at the zero mode), then both inverse transforms. Data are tapered
/// over the last tenth of the window first.
pub fn evolve(data: &DataBundle, grid: &FieldGrid, params: &PhysicalParams, opts: &EvolveOptions) -> Result<EvolveResult> {
    grid.validate()?;
    params.validate()?;
    data.validate(grid)?;
    if (grid.b - params.b).abs() > 1e-12 * params.b {
        return Err(Error::Mismatch(format!("grid depth {} vs layer depth {}", grid.b, params.b)));
    }
    let gamma = opts.gamma;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
    }
    let mg = grid.mode_grid();
    let tapered = data.tapered(grid);
    let md = transform_data(&tapered, grid, gamma)?;
    let lambdas = laplace_points(grid.n_t, grid.dt(), gamma);
    let xis = grid.xis();
    // every mode must lie in the admissible region
    for l in &lambdas {
        let pt = SpectralPoint::c1(*l, &[1.0], params)?;
        if !region_contains(&pt, params) {
            return Err(Error::OutOfRegion(format!("lambda = {l} (gamma below the admissible floor)")));
        }
    }
    let probes = ProbeSet::new(&mg, opts.upper_probes, opts.lower_probes);
    let interior = tapered.has_interior_sources();
    let dt = grid.dt();
    let n_t = grid.n_t;
    let snap_idx: Vec<usize> = opts.snapshots.iter().copied().filter(|&j| j < n_t).collect();

    let runs: Vec<ModeRun> = md
        .active
        .par_iter()
        .map(|&m| {
            let xi = xis[m];
            let mut run = ModeRun { m, probes: Vec::with_capacity(n_t), integrals: Vec::with_capacity(n_t), snaps: vec![ModeQuantitiesSlice::zeros(&mg); snap_idx.len()], closed: 0, fd: 0 };
            for (k, &l) in lambdas.iter().enumerate() {
                let pt = SpectralPoint::c1(l, &[xi], params)?;
                let src = mode_sources(&md, m, k);
                let q = if !interior && xi.abs() >= A_MIN {
                    run.closed += 1;
                    closed_form_quantities(&pt, params, [src.data.h[0], src.data.h[1]], &mg)?
                } else {
                    run.fd += 1;
                    fd_quantities(&pt, params, &src, &mg)?
                };
                run.probes.push(probes.collect(&q));
                run.integrals.push(ModeIntegrals { lambda: l, a: xi.abs(), solution: solution_integrals(&q, &mg), data: data_integrals(&md, m, k, &mg) });
                for (s, &j) in run.snaps.iter_mut().zip(&snap_idx) {
                    let t = j as f64 * dt;
                    let w = C64::from_polar((gamma * t).exp() / (n_t as f64 * dt), l.im * t);
                    s.axpy(w, &q);
                }
            }
            Ok(run)
        })
        .collect::<Result<_>>()?;

    // synthesis of probe series: inverse Laplace per mode, then inverse tangential per time
    let nq = probes.len();
    let m_count = grid.m;
    let probe_fields: Vec<Vec<C64>> = (0..nq)
        .into_par_iter()
        .map(|q| {
            let mut tm = vec![ZERO; n_t * m_count];
            for run in &runs {
                let hat: Vec<C64> = run.probes.iter().map(|p| p[q]).collect();
                let series = inverse_laplace_transform(&hat, dt, gamma)?;
                for (t, v) in series.into_iter().enumerate() {
                    tm[t * m_count + run.m] = v;
                }
            }
            let mut out = vec![ZERO; n_t * m_count];
            for t in 0..n_t {
                let row = inverse_tangential_transform(&tm[t * m_count..(t + 1) * m_count])?;
                out[t * m_count..(t + 1) * m_count].copy_from_slice(&row);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let (mut im, mut re) = (0.0f64, 0.0f64);
    for v in probe_fields.iter().flatten() {
        im = im.max(v.im.abs());
        re = re.max(v.norm());
    }

    let mut snapshots = Vec::with_capacity(snap_idx.len());
    for (si, &j) in snap_idx.iter().enumerate() {
        let synth = |get: &dyn Fn(&ModeQuantitiesSlice, usize) -> C64, nz: usize| -> Result<Vec<Vec<C64>>> {
            let mut out = vec![vec![ZERO; nz]; m_count];
            for z in 0..nz {
                let mut amps = vec![ZERO; m_count];
                for run in &runs {
                    amps[run.m] = get(&run.snaps[si], z);
                }
                for (x, v) in inverse_tangential_transform(&amps)?.into_iter().enumerate() {
                    out[x][z] = v;
                }
            }
            Ok(out)
        };
        let nu = mg.n_upper + 1;
        let nl = mg.n_lower + 1;
        let zip2 = |a: Vec<Vec<C64>>, b: Vec<Vec<C64>>| a.into_iter().zip(b).map(|(r, s)| r.into_iter().zip(s).map(|(x, y)| [x, y]).collect()).collect();
        snapshots.push(Snapshot {
            t_index: j,
            t: j as f64 * dt,
            v_plus: zip2(synth(&|s, z| s.up[z][0], nu)?, synth(&|s, z| s.up[z][1], nu)?),
            v_minus: zip2(synth(&|s, z| s.lo[z][0], nl)?, synth(&|s, z| s.lo[z][1], nl)?),
            pressure: synth(&|s, z| s.p[z], nl)?,
            rho: synth(&|s, z| s.rho[z], nu)?,
            interface_dz: {
                let d: Vec<Vec<Vec<C64>>> = (0..4).map(|k| synth(&|s, _| s.dz[k / 2][k % 2], 1)).collect::<Result<_>>()?;
                (0..m_count).map(|x| [[d[0][x][0], d[1][x][0]], [d[2][x][0], d[3][x][0]]]).collect()
            },
        });
    }

    Ok(EvolveResult {
        grid: *grid,
        gamma,
        params: *params,
        active_modes: md.active,
        closed_form_solves: runs.iter().map(|r| r.closed).sum(),
        fd_solves: runs.iter().map(|r| r.fd).sum(),
        probes,
        probe_fields,
        integrals: runs.into_iter().flat_map(|r| r.integrals).collect(),
        snapshots,
        taper_fraction: TAPER_FRACTION,
        imag_ratio: if re == 0.0 { 0.0 } else { im / re },
    })
}

/// Spectral `d/dx` of a `[t * m + x]` array.
fn dx(f: &[C64], grid: &FieldGrid) -> Result<Vec<C64>> {
    let m = grid.m;
    let xis = grid.xis();
    let mut out = vec![ZERO; f.len()];
    for t in 0..grid.n_t {
        let mut a = super::transform::tangential_transform(&f[t * m..(t + 1) * m])?;
        for (v, xi) in a.iter_mut().zip(&xis) {
            *v *= I * xi;
        }
        out[t * m..(t + 1) * m].copy_from_slice(&inverse_tangential_transform(&a)?);
    }
    Ok(out)
}

/// Spectral `d/dt` of a `[t * m + x]` array through the weighted transform.
fn dt_field(f: &[C64], grid: &FieldGrid, gamma: f64) -> Result<Vec<C64>> {
    let m = grid.m;
    let mut out = vec![ZERO; f.len()];
    for x in 0..m {
        let s: Vec<C64> = (0..grid.n_t).map(|t| f[t * m + x]).collect();
        for (t, v) in time_derivative(&s, grid.dt(), gamma)?.into_iter().enumerate() {
            out[t * m + x] = v;
        }
    }
    Ok(out)
}

fn data_at(f: Option<&Field>, z: usize, c: usize, grid: &FieldGrid) -> Vec<C64> {
    let mut out = vec![ZERO; grid.n_t * grid.m];
    if let Some(f) = f {
        for t in 0..grid.n_t {
            for x in 0..grid.m {
                out[t * grid.m + x] = C64::new(f.get(t, x, z, c), 0.0);
            }
        }
    }
    out
}

/// Residuals of the time-dependent system evaluated on the probe samples
/// (spectral derivatives in `t` and `x`, the solver's vertical stencils),
/// against the tapered data. Each group is divided by its largest term.
pub fn evolve_residual(res: &EvolveResult, data: &DataBundle) -> Result<Checker> {
    let grid = &res.grid;
    let p = &res.params;
    let g = res.gamma;
    let tapered = data.tapered(grid);
    let mut groups = Groups::default();
    let n = grid.n_t * grid.m;
    let mut track = |name: &str, terms: &[&[C64]], rhs: &[C64]| {
        let mut r = 0.0f64;
        let mut s = 0.0f64;
        for i in 0..n {
            let sum: C64 = terms.iter().map(|t| t[i]).sum();
            r = r.max((sum - rhs[i]).norm());
            s = terms.iter().fold(s, |a, t| a.max(t[i].norm())).max(rhs[i].norm());
        }
        groups.add(name, r, s);
    };
    let sc = |v: &[C64], c: f64| v.iter().map(|x| x * c).collect::<Vec<C64>>();
    let pr = &res.probes;
    for (u, &iz) in pr.upper.iter().enumerate() {
        let q = |k: usize| res.series(pr.upper_at(u, k));
        let (vx, vn, dvx, dvn, d2vx, d2vn, rho, drho) = (q(0), q(1), q(2), q(3), q(4), q(5), q(6), q(7));
        let f = data_at(tapered.f_plus.as_ref(), iz, 0, grid);
        let gx = data_at(tapered.g_plus.as_ref(), iz, 0, grid);
        let gn = data_at(tapered.g_plus.as_ref(), iz, 1, grid);
        let dvx_x = dx(vx, grid)?;
        let dvn_x = dx(vn, grid)?;
        track("mass", &[&dt_field(rho, grid, g)?, &sc(&dvx_x, p.gamma1_plus), &sc(dvn, p.gamma1_plus)], &f);
        let div_x = dx(&dvx_x.iter().zip(dvn).map(|(a, b)| a + b).collect::<Vec<_>>(), grid)?;
        track(
            "upper tangential momentum",
            &[&sc(&dt_field(vx, grid, g)?, p.gamma1_plus), &sc(&dx(&dvx_x, grid)?, -p.mu_plus), &sc(d2vx, -p.mu_plus), &sc(&div_x, -p.nu_plus), &sc(&dx(rho, grid)?, p.gamma2_plus)],
            &gx,
        );
        track(
            "upper normal momentum",
            &[
                &sc(&dt_field(vn, grid, g)?, p.gamma1_plus),
                &sc(&dx(&dvn_x, grid)?, -p.mu_plus),
                &sc(d2vn, -p.mu_plus),
                &sc(&dx(dvx, grid)?, -p.nu_plus),
                &sc(d2vn, -p.nu_plus),
                &sc(drho, p.gamma2_plus),
            ],
            &gn,
        );
    }
    for (l, &iz) in pr.lower.iter().enumerate() {
        let q = |k: usize| res.series(pr.lower_at(l, k));
        let (vx, vn, d2vx, d2vn, pp, dp, vt_mid, dvn_mid) = (q(0), q(1), q(4), q(5), q(6), q(7), q(8), q(9));
        let gx = data_at(tapered.g_minus.as_ref(), iz, 0, grid);
        let gn = data_at(tapered.g_minus.as_ref(), iz, 1, grid);
        track(
            "lower tangential momentum",
            &[&sc(&dt_field(vx, grid, g)?, p.gamma1_minus), &sc(&dx(&dx(vx, grid)?, grid)?, -p.mu_minus), &sc(d2vx, -p.mu_minus), &dx(pp, grid)?],
            &gx,
        );
        track("lower normal momentum", &[&sc(&dt_field(vn, grid, g)?, p.gamma1_minus), &sc(&dx(&dx(vn, grid)?, grid)?, -p.mu_minus), &sc(d2vn, -p.mu_minus), dp], &gn);
        let gd0 = data_at(tapered.g_d.as_ref(), iz, 0, grid);
        let gd1 = data_at(tapered.g_d.as_ref(), iz + 1, 0, grid);
        let gd: Vec<C64> = gd0.iter().zip(&gd1).map(|(a, b)| 0.5 * (a + b)).collect();
        track("lower divergence", &[&dx(vt_mid, grid)?, dvn_mid], &gd);
    }
    let q = |k: usize| res.series(pr.iface_at(k));
    let (vpx, vpn, dvpx, dvpn, vmx, vmn, dvmx, dvmn, p0, rho0) = (q(0), q(1), q(2), q(3), q(4), q(5), q(6), q(7), q(8), q(9));
    let hx = data_at(tapered.h_upper.as_ref(), 0, 0, grid);
    let hn = data_at(tapered.h_upper.as_ref(), 0, 1, grid);
    track("tangential stress", &[&sc(dvpx, p.mu_plus), &sc(&dx(vpn, grid)?, p.mu_plus), &sc(dvmx, -p.mu_minus), &sc(&dx(vmn, grid)?, -p.mu_minus)], &hx);
    track(
        "normal stress",
        &[
            &sc(dvpn, 2.0 * p.mu_plus),
            &sc(&dx(vpx, grid)?, p.nu_plus - p.mu_plus),
            &sc(dvpn, p.nu_plus - p.mu_plus),
            &sc(rho0, -p.gamma2_plus),
            &sc(dvmn, -2.0 * p.mu_minus),
            p0,
        ],
        &hn,
    );
    let zero = vec![ZERO; n];
    track("velocity jump", &[vpx, &sc(vmx, -1.0)], &zero);
    track("velocity jump", &[vpn, &sc(vmn, -1.0)], &zero);
    // the bottom trace is measured against the interface velocity scale
    let scale = vmx.iter().chain(vmn).fold(0.0f64, |a, v| a.max(v.norm()));
    let bottom = res.series(pr.bottom_at(0)).iter().chain(res.series(pr.bottom_at(1))).fold(0.0f64, |a, v| a.max(v.norm()));
    groups.add("bottom", bottom, scale.max(f64::MIN_POSITIVE));
    Ok(groups.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::data::RandomData;

    fn small_grid() -> FieldGrid {
        FieldGrid { m: 16, n_t: 64, n_lower: 16, n_upper: 64, ..Default::default() }
    }

    #[test]
    fn zero_data_zero_solution() {
        let g = small_grid();
        let p = PhysicalParams::default();
        let r = evolve(&DataBundle::default(), &g, &p, &EvolveOptions::new(2.0)).unwrap();
        assert!(r.active_modes.is_empty());
        assert!(r.probe_fields.iter().flatten().all(|v| *v == ZERO));
    }

    #[test]
    fn gamma_below_floor_rejected() {
        let g = small_grid();
        let p = PhysicalParams::default();
        let d = RandomData::draw(1, false, 2).sample(&g);
        assert!(matches!(evolve(&d, &g, &p, &EvolveOptions::new(0.5)), Err(Error::OutOfRegion(_))));
    }

    #[test]
    fn boundary_data_residual_small() {
        let g = small_grid();
        let p = PhysicalParams::default();
        let d = RandomData::draw(5, false, 2).sample(&g);
        let r = evolve(&d, &g, &p, &EvolveOptions::new(2.0)).unwrap();
        assert!(r.closed_form_solves > 0 && r.fd_solves == 0);
        let chk = evolve_residual(&r, &d).unwrap();
        assert!(chk.worst() < 1e-5, "{chk:?}");
    }

    #[test]
    fn interior_sources_residual_small() {
        let g = small_grid();
        let p = PhysicalParams::default();
        let d = RandomData::draw(9, true, 2).sample(&g);
        let r = evolve(&d, &g, &p, &EvolveOptions::new(2.0)).unwrap();
        assert!(r.fd_solves > 0);
        let chk = evolve_residual(&r, &d).unwrap();
        assert!(chk.worst() < 1e-5, "{chk:?}");
    }
}
