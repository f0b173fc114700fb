//! Uniform periodic space-time grids and sampled fields.
//!
//! A `Grid` discretizes a periodic box [0,Lx[ x [0,Ly[ x [0,Lz[ at nx x ny x nz
//! cell centers x_i = i*h (no duplicated endpoint) and an interval of nt time
//! samples t_k = t_start + k*dt. A `FieldSnapshot` stores a scalar or
//! 3-component vector field sampled on such a grid, in (t, component, z, y, x)
//! index order with x fastest.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub box_length: [f64; 3],
    pub nt: usize,
    pub dt: f64,
    pub t_start: f64,
}

impl Grid {
    pub fn new(
        nx: usize,
        ny: usize,
        nz: usize,
        box_length: [f64; 3],
        nt: usize,
        dt: f64,
        t_start: f64,
    ) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny), ("nz", nz), ("nt", nt)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::Parameter(format!(
                    "{name} = {n}: all sample counts must be even and >= 4"
                )));
            }
        }
        if box_length.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Parameter(format!(
                "box_length {box_length:?} must be positive and finite"
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() || !t_start.is_finite() {
            return Err(Error::Parameter(format!(
                "dt = {dt}, t_start = {t_start}: need dt > 0 and finite times"
            )));
        }
        Ok(Grid {
            nx,
            ny,
            nz,
            box_length,
            nt,
            dt,
            t_start,
        })
    }

    /// Cubic helper: n^3 points on a box of side `l`, nt slices.
    pub fn cubic(n: usize, l: f64, nt: usize, dt: f64, t_start: f64) -> Result<Self> {
        Grid::new(n, n, n, [l, l, l], nt, dt, t_start)
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            self.box_length[0] / self.nx as f64,
            self.box_length[1] / self.ny as f64,
            self.box_length[2] / self.nz as f64,
        ]
    }

    /// Points per spatial slice.
    pub fn n3(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Spatial cell volume hx*hy*hz.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    pub fn x_coord(&self, i: usize) -> f64 {
        i as f64 * self.box_length[0] / self.nx as f64
    }
    pub fn y_coord(&self, j: usize) -> f64 {
        j as f64 * self.box_length[1] / self.ny as f64
    }
    pub fn z_coord(&self, k: usize) -> f64 {
        k as f64 * self.box_length[2] / self.nz as f64
    }
    pub fn t_coord(&self, it: usize) -> f64 {
        self.t_start + it as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_coord(self.nt - 1)
    }

    /// Shortest periodic displacement from `b` to `a` along axis `axis`.
    pub fn periodic_delta(&self, a: f64, b: f64, axis: usize) -> f64 {
        let l = self.box_length[axis];
        let mut d = (a - b) % l;
        if d > l / 2.0 {
            d -= l;
        } else if d < -l / 2.0 {
            d += l;
        }
        d
    }

    pub fn same_space(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.nz == other.nz
            && self.box_length == other.box_length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub grid: Grid,
    pub components: usize,
    pub data: Vec<f64>,
}

impl FieldSnapshot {
    pub fn new(grid: Grid, components: usize, data: Vec<f64>) -> Result<Self> {
        if components != 1 && components != 3 {
            return Err(Error::Contract(format!(
                "components = {components}: only scalar (1) and vector (3) fields supported"
            )));
        }
        let expect = grid.nt * components * grid.n3();
        if data.len() != expect {
            return Err(Error::Contract(format!(
                "data length {} does not match grid shape (expected {expect})",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("field contains NaN or Inf".into()));
        }
        Ok(FieldSnapshot {
            grid,
            components,
            data,
        })
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        let n = grid.nt * components * grid.n3();
        FieldSnapshot {
            grid,
            components,
            data: vec![0.0; n],
        }
    }

    /// Sample `f(t, [x,y,z], component)` at every grid point.
    pub fn from_fn<F>(grid: Grid, components: usize, f: F) -> Self
    where
        F: Fn(f64, [f64; 3], usize) -> f64 + Sync,
    {
        let n3 = grid.n3();
        let slabs = crate::par::par_map(grid.nt * components, |tc| {
            let (it, c) = (tc / components, tc % components);
            let t = grid.t_coord(it);
            let mut out = vec![0.0; n3];
            let mut p = 0;
            for k in 0..grid.nz {
                let z = grid.z_coord(k);
                for j in 0..grid.ny {
                    let y = grid.y_coord(j);
                    for i in 0..grid.nx {
                        out[p] = f(t, [grid.x_coord(i), y, z], c);
                        p += 1;
                    }
                }
            }
            out
        });
        FieldSnapshot {
            grid,
            components,
            data: slabs.concat(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.components == 1
    }

    fn slab(&self, it: usize, c: usize) -> usize {
        debug_assert!(it < self.grid.nt && c < self.components);
        (it * self.components + c) * self.grid.n3()
    }

    /// One spatial slice (fixed time, fixed component), x fastest.
    pub fn slice(&self, it: usize, c: usize) -> &[f64] {
        let s = self.slab(it, c);
        &self.data[s..s + self.grid.n3()]
    }

    pub fn slice_mut(&mut self, it: usize, c: usize) -> &mut [f64] {
        let s = self.slab(it, c);
        let n3 = self.grid.n3();
        &mut self.data[s..s + n3]
    }

    pub fn at(&self, it: usize, c: usize, k: usize, j: usize, i: usize) -> f64 {
        self.slice(it, c)[(k * self.grid.ny + j) * self.grid.nx + i]
    }

    pub fn check_same_grid(&self, other: &FieldSnapshot, what: &str) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Pointwise linear combination self + s*other.
    pub fn axpy(&self, s: f64, other: &FieldSnapshot) -> Result<FieldSnapshot> {
        self.check_same_grid(other, "axpy")?;
        if self.components != other.components {
            return Err(Error::Contract("axpy: component mismatch".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + s * b)
            .collect();
        Ok(FieldSnapshot {
            grid: self.grid,
            components: self.components,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> FieldSnapshot {
        FieldSnapshot {
            grid: self.grid,
            components: self.components,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Copy of the field restricted to `len` consecutive time slices starting
    /// at `start`, on a grid with the matching time interval.
    pub fn time_window(&self, start: usize, len: usize) -> Result<FieldSnapshot> {
        if start + len > self.grid.nt {
            return Err(Error::Parameter(format!(
                "time window {start}..{} exceeds nt = {}",
                start + len,
                self.grid.nt
            )));
        }
        let grid = Grid::new(
            self.grid.nx,
            self.grid.ny,
            self.grid.nz,
            self.grid.box_length,
            len,
            self.grid.dt,
            self.grid.t_coord(start),
        )?;
        let n3 = self.grid.n3();
        let a = start * self.components * n3;
        let b = (start + len) * self.components * n3;
        Ok(FieldSnapshot {
            grid,
            components: self.components,
            data: self.data[a..b].to_vec(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
