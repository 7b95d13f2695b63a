use serde::{Deserialize, Serialize};

use super::transform::fft_frequencies;
use crate::fd::ModeGrid;
use crate::{Error, Result};

/// Periodic tangential grid (`N = 2`), vertical grids and a uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldGrid {
    pub lx: f64,
    pub m: usize,
    pub b: f64,
    pub x_max: f64,
    pub n_lower: usize,
    pub n_upper: usize,
    pub t_end: f64,
    pub n_t: usize,
}

impl Default for FieldGrid {
    fn default() -> Self {
        Self { lx: 2.0 * std::f64::consts::PI, m: 64, b: 1.0, x_max: 16.0, n_lower: 32, n_upper: 256, t_end: 8.0, n_t: 128 }
    }
}

impl FieldGrid {
    pub fn validate(&self) -> Result<()> {
        for n in [self.m, self.n_t] {
            if !n.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(n));
            }
        }
        if !(self.lx > 0.0 && self.b > 0.0 && self.x_max > 0.0 && self.t_end > 0.0) || self.n_lower < 4 || self.n_upper < 4 {
            return Err(Error::InvalidParams(format!("bad field grid {self:?}")));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_t as f64
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.m as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t).map(|j| j as f64 * self.dt()).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.m).map(|j| j as f64 * self.dx()).collect()
    }

    pub fn xis(&self) -> Vec<f64> {
        fft_frequencies(self.m, self.lx)
    }

    pub fn mode_grid(&self) -> ModeGrid {
        ModeGrid { b: self.b, x_max: self.x_max, n_lower: self.n_lower, n_upper: self.n_upper }
    }

    /// Same extents with twice as many time samples.
    pub fn with_time_refined(&self) -> Self {
        Self { n_t: 2 * self.n_t, ..*self }
    }
}

/// Which vertical grid a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Upper,
    Lower,
}

/// Real samples indexed `(t, x, z, component)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub side: Side,
    pub n_t: usize,
    pub m: usize,
    pub nz: usize,
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &FieldGrid, side: Side, ncomp: usize) -> Self {
        let nz = match side {
            Side::Upper => grid.n_upper + 1,
            Side::Lower => grid.n_lower + 1,
        };
        Self { side, n_t: grid.n_t, m: grid.m, nz, ncomp, data: vec![0.0; grid.n_t * grid.m * nz * ncomp] }
    }

    /// Samples `f(t, x, z) -> [value; ncomp]` on the grid.
    pub fn from_fn(grid: &FieldGrid, side: Side, ncomp: usize, f: impl Fn(f64, f64, f64) -> Vec<f64>) -> Self {
        let mut out = Self::zeros(grid, side, ncomp);
        let zs = match side {
            Side::Upper => grid.mode_grid().upper_nodes(),
            Side::Lower => grid.mode_grid().lower_nodes(),
        };
        let (ts, xs) = (grid.times(), grid.xs());
        for (it, &t) in ts.iter().enumerate() {
            for (ix, &x) in xs.iter().enumerate() {
                for (iz, &z) in zs.iter().enumerate() {
                    let v = f(t, x, z);
                    for c in 0..ncomp {
                        let k = out.idx(it, ix, iz, c);
                        out.data[k] = v[c];
                    }
                }
            }
        }
        out
    }

    pub fn idx(&self, t: usize, x: usize, z: usize, c: usize) -> usize {
        ((t * self.m + x) * self.nz + z) * self.ncomp + c
    }

    pub fn get(&self, t: usize, x: usize, z: usize, c: usize) -> f64 {
        self.data[self.idx(t, x, z, c)]
    }

    pub fn matches(&self, grid: &FieldGrid, side: Side, ncomp: usize) -> bool {
        let nz = match side {
            Side::Upper => grid.n_upper + 1,
            Side::Lower => grid.n_lower + 1,
        };
        self.side == side && self.n_t == grid.n_t && self.m == grid.m && self.nz == nz && self.ncomp == ncomp
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { data: self.data.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_valid() {
        let g = FieldGrid::default();
        g.validate().unwrap();
        assert_eq!(g.xis()[1], 1.0);
        assert!(FieldGrid { m: 48, ..g }.validate().is_err());
    }

    #[test]
    fn field_indexing() {
        let g = FieldGrid { m: 4, n_t: 4, n_lower: 4, n_upper: 4, ..Default::default() };
        let f = Field::from_fn(&g, Side::Lower, 2, |t, x, z| vec![t + x, z]);
        assert_eq!(f.get(1, 2, 0, 1), -1.0);
        assert!((f.get(1, 2, 3, 0) - (g.dt() + 2.0 * g.dx())).abs() < 1e-15);
    }
}
