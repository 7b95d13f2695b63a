use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Field, FieldGrid, Side};
use super::transform::{taper, TAPER_FRACTION};
use crate::{Error, Result, C64};

/// Time-dependent data of the evolution problem (`N = 2`). `None` is zero.
/// `h` is given on both sides; its interface value is the upper trace.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DataBundle {
    pub f_plus: Option<Field>,
    pub g_plus: Option<Field>,
    pub g_minus: Option<Field>,
    pub g_d: Option<Field>,
    pub frak_g_d: Option<Field>,
    pub h_upper: Option<Field>,
    pub h_lower: Option<Field>,
}

impl DataBundle {
    pub fn validate(&self, grid: &FieldGrid) -> Result<()> {
        let checks: [(&str, &Option<Field>, Side, usize); 7] = [
            ("f_plus", &self.f_plus, Side::Upper, 1),
            ("g_plus", &self.g_plus, Side::Upper, 2),
            ("g_minus", &self.g_minus, Side::Lower, 2),
            ("g_d", &self.g_d, Side::Lower, 1),
            ("frak_g_d", &self.frak_g_d, Side::Lower, 2),
            ("h_upper", &self.h_upper, Side::Upper, 2),
            ("h_lower", &self.h_lower, Side::Lower, 2),
        ];
        for (name, f, side, nc) in checks {
            if let Some(f) = f {
                if !f.matches(grid, side, nc) {
                    return Err(Error::Dimension(format!("{name} does not match the field grid")));
                }
                if f.data.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(name.into()));
                }
            }
        }
        Ok(())
    }

    pub fn has_interior_sources(&self) -> bool {
        [&self.f_plus, &self.g_plus, &self.g_minus, &self.g_d].iter().any(|f| f.as_ref().is_some_and(|f| f.max_abs() > 0.0))
    }

    fn map(&self, op: impl Fn(&Field) -> Field) -> Self {
        let m = |f: &Option<Field>| f.as_ref().map(&op);
        Self {
            f_plus: m(&self.f_plus),
            g_plus: m(&self.g_plus),
            g_minus: m(&self.g_minus),
            g_d: m(&self.g_d),
            frak_g_d: m(&self.frak_g_d),
            h_upper: m(&self.h_upper),
            h_lower: m(&self.h_lower),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|f| f.scaled(s))
    }

    /// Multiplies every field by the end-of-window taper.
    pub fn tapered(&self, grid: &FieldGrid) -> Self {
        let w: Vec<f64> = grid.times().iter().map(|&t| taper(t, grid.t_end, TAPER_FRACTION)).collect();
        self.map(|f| {
            let mut g = f.clone();
            let per_t = f.m * f.nz * f.ncomp;
            for (k, v) in g.data.iter_mut().enumerate() {
                *v *= w[k / per_t];
            }
            g
        })
    }
}

/// Which datum a random term contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    FPlus,
    GPlus(usize),
    GMinus(usize),
    FrakGd(usize),
    H(usize),
}

/// `env(t) Re[amp e^{i k 2pi x / L}] phi(z)` with
/// `env = (t/t0)^3 e^{-t/t0} cos(omega t + phase)` and `phi = e^{-kappa |z|}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DataTerm {
    pub target: Target,
    pub harmonic: i32,
    pub amp: C64,
    pub omega: f64,
    pub phase: f64,
    pub t0: f64,
    pub kappa: f64,
}

impl DataTerm {
    fn env(&self, t: f64) -> f64 {
        let s = t / self.t0;
        s.powi(3) * (-s).exp() * (self.omega * t + self.phase).cos()
    }

    fn wave(&self, x: f64, lx: f64) -> C64 {
        self.amp * C64::from_polar(1.0, self.harmonic as f64 * 2.0 * std::f64::consts::PI * x / lx)
    }
}

/// A reproducible smooth data bundle built from a few separable terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomData {
    pub terms: Vec<DataTerm>,
}

impl RandomData {
    /// One term per datum component (boundary data only when `interior` is false),
    /// harmonics in `1..=max_harmonic`.
    pub fn draw(seed: u64, interior: bool, max_harmonic: i32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut targets = vec![Target::H(0), Target::H(1)];
        if interior {
            targets.extend([Target::FPlus, Target::GPlus(0), Target::GPlus(1), Target::GMinus(0), Target::GMinus(1), Target::FrakGd(0), Target::FrakGd(1)]);
        } else {
            targets.extend([Target::H(0), Target::H(1)]);
        }
        let terms = targets
            .into_iter()
            .map(|target| DataTerm {
                target,
                harmonic: rng.gen_range(1..=max_harmonic),
                amp: C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                omega: rng.gen_range(0.0..3.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                t0: rng.gen_range(0.3..0.8),
                kappa: rng.gen_range(0.5..2.0),
            })
            .collect();
        Self { terms }
    }

    pub fn sample(&self, grid: &FieldGrid) -> DataBundle {
        let lx = grid.lx;
        let (ts, xs) = (grid.times(), grid.xs());
        let mg = grid.mode_grid();
        // every contribution is env(t) X(x) Z(z)
        let sum = |side: Side, ncomp: usize, pick: &dyn Fn(&DataTerm) -> Option<(usize, Box<dyn Fn(f64) -> f64 + '_>, Box<dyn Fn(f64) -> f64 + '_>)>| -> Option<Field> {
            if !self.terms.iter().any(|t| pick(t).is_some()) {
                return None;
            }
            let zs = match side {
                Side::Upper => mg.upper_nodes(),
                Side::Lower => mg.lower_nodes(),
            };
            let mut f = Field::zeros(grid, side, ncomp);
            for term in &self.terms {
                let Some((c, xf, zf)) = pick(term) else { continue };
                let env: Vec<f64> = ts.iter().map(|&t| term.env(t)).collect();
                let xv: Vec<f64> = xs.iter().map(|&x| xf(x)).collect();
                let zv: Vec<f64> = zs.iter().map(|&z| zf(z)).collect();
                for (it, e) in env.iter().enumerate() {
                    for (ix, xw) in xv.iter().enumerate() {
                        let ex = e * xw;
                        for (iz, zw) in zv.iter().enumerate() {
                            let k = f.idx(it, ix, iz, c);
                            f.data[k] += ex * zw;
                        }
                    }
                }
            }
            Some(f)
        };
        type Factors<'a> = Option<(usize, Box<dyn Fn(f64) -> f64 + 'a>, Box<dyn Fn(f64) -> f64 + 'a>)>;
        let plain = |term: &DataTerm, c: usize| -> Factors<'_> {
            let t = *term;
            Some((c, Box::new(move |x| t.wave(x, lx).re), Box::new(move |z: f64| (-t.kappa * z.abs()).exp())))
        };
        let f_plus = sum(Side::Upper, 1, &|term| if matches!(term.target, Target::FPlus) { plain(term, 0) } else { None });
        let g_plus = sum(Side::Upper, 2, &|term| if let Target::GPlus(c) = term.target { plain(term, c) } else { None });
        let g_minus = sum(Side::Lower, 2, &|term| if let Target::GMinus(c) = term.target { plain(term, c) } else { None });
        let frak_g_d = sum(Side::Lower, 2, &|term| if let Target::FrakGd(c) = term.target { plain(term, c) } else { None });
        // g_d = d_x frak_g_x + d_z frak_g_z, exactly
        let g_d = sum(Side::Lower, 1, &|term| {
            let t = *term;
            match term.target {
                Target::FrakGd(0) => {
                    let xi = t.harmonic as f64 * 2.0 * std::f64::consts::PI / lx;
                    Some((0, Box::new(move |x| (C64::new(0.0, xi) * t.wave(x, lx)).re), Box::new(move |z: f64| (t.kappa * z).exp())))
                }
                Target::FrakGd(_) => Some((0, Box::new(move |x| t.wave(x, lx).re), Box::new(move |z: f64| t.kappa * (t.kappa * z).exp()))),
                _ => None,
            }
        });
        let h_upper = sum(Side::Upper, 2, &|term| if let Target::H(c) = term.target { plain(term, c) } else { None });
        let h_lower = sum(Side::Lower, 2, &|term| if let Target::H(c) = term.target { plain(term, c) } else { None });
        DataBundle { f_plus, g_plus, g_minus, g_d, frak_g_d, h_upper, h_lower }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_bundle_is_valid_and_tapered() {
        let g = FieldGrid { m: 16, n_t: 32, n_lower: 8, n_upper: 16, ..Default::default() };
        let d = RandomData::draw(3, true, 2).sample(&g);
        d.validate(&g).unwrap();
        assert!(d.has_interior_sources());
        let tp = d.tapered(&g);
        let h = tp.h_upper.as_ref().unwrap();
        // first sample vanishes through the envelope, later ones through the taper
        assert!((0..g.m).all(|x| h.get(0, x, 0, 0) == 0.0));
        let b = RandomData::draw(3, false, 2).sample(&g);
        assert!(!b.has_interior_sources());
        assert!(b.g_minus.is_none());
    }
}
