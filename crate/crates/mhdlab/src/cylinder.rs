//! Parabolic cylinders Q_r = ]t0-r^2, t0+r^2[ x B(x0, r) and midpoint
//! quadrature over the grid cells whose centers they contain.

use crate::error::{Error, Result};
use crate::grid::{FieldSnapshot, Grid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub t0: f64,
    pub x0: [f64; 3],
    pub r: f64,
}

impl ParabolicCylinder {
    pub fn new(t0: f64, x0: [f64; 3], r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Parameter(format!("cylinder radius {r} must be > 0")));
        }
        Ok(ParabolicCylinder { t0, x0, r })
    }

    /// Same center, different radius.
    pub fn with_radius(&self, r: f64) -> Self {
        ParabolicCylinder { r, ..*self }
    }

    pub fn contains(&self, grid: &Grid, t: f64, x: [f64; 3]) -> bool {
        if (t - self.t0).abs() >= self.r * self.r {
            return false;
        }
        let mut d2 = 0.0;
        for a in 0..3 {
            let d = grid.periodic_delta(x[a], self.x0[a], a);
            d2 += d * d;
        }
        d2 < self.r * self.r
    }

    /// Check that Q fits strictly inside the sampled domain with a one-cell
    /// margin, naming the violated face on failure.
    pub fn check_inside(&self, grid: &Grid) -> Result<()> {
        let r2 = self.r * self.r;
        if self.t0 - r2 < grid.t_start + grid.dt {
            return Err(Error::Domain(format!(
                "cylinder exits domain at face t-min: t0 - r^2 = {} < {}",
                self.t0 - r2,
                grid.t_start + grid.dt
            )));
        }
        if self.t0 + r2 > grid.t_end() - grid.dt {
            return Err(Error::Domain(format!(
                "cylinder exits domain at face t-max: t0 + r^2 = {} > {}",
                self.t0 + r2,
                grid.t_end() - grid.dt
            )));
        }
        let h = grid.spacing();
        for (a, name) in [(0usize, "x"), (1, "y"), (2, "z")] {
            if self.r + h[a] > grid.box_length[a] / 2.0 {
                return Err(Error::Domain(format!(
                    "cylinder exits domain at face {name}: radius {} exceeds {} (half box minus one cell)",
                    self.r,
                    grid.box_length[a] / 2.0 - h[a]
                )));
            }
        }
        Ok(())
    }
}

/// Grid cells whose centers lie in a parabolic cylinder. The spatial ball is
/// time-independent, so it is stored once as linear slice indices.
#[derive(Debug, Clone)]
pub struct CylinderCells {
    /// Time slice indices with t strictly inside ]t0-r^2, t0+r^2[.
    pub times: Vec<usize>,
    /// Linear indices (k*ny + j)*nx + i of the ball cell centers.
    pub ball: Vec<usize>,
    /// Space-time cell measure dt * hx * hy * hz.
    pub cell_measure: f64,
}

impl CylinderCells {
    pub fn len(&self) -> usize {
        self.times.len() * self.ball.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Index set of grid cells inside Q plus the quadrature cell measure.
pub fn restrict_cylinder(grid: &Grid, q: &ParabolicCylinder) -> Result<CylinderCells> {
    q.check_inside(grid)?;
    let r2 = q.r * q.r;
    let times: Vec<usize> = (0..grid.nt)
        .filter(|&it| (grid.t_coord(it) - q.t0).abs() < r2)
        .collect();
    let mut ball = Vec::new();
    for k in 0..grid.nz {
        let dz = grid.periodic_delta(grid.z_coord(k), q.x0[2], 2);
        for j in 0..grid.ny {
            let dy = grid.periodic_delta(grid.y_coord(j), q.x0[1], 1);
            for i in 0..grid.nx {
                let dx = grid.periodic_delta(grid.x_coord(i), q.x0[0], 0);
                if dx * dx + dy * dy + dz * dz < r2 {
                    ball.push((k * grid.ny + j) * grid.nx + i);
                }
            }
        }
    }
    if times.is_empty() || ball.is_empty() {
        return Err(Error::Domain(format!(
            "cylinder Q(t0={}, r={}) contains no grid cell centers",
            q.t0, q.r
        )));
    }
    Ok(CylinderCells {
        times,
        ball,
        cell_measure: grid.dt * grid.cell_volume(),
    })
}

/// Midpoint-rule space-time integral of a scalar field over the cells.
/// The first and last time slices are never included by `restrict_cylinder`'s
/// one-cell margin, so central-difference artifacts stay out automatically.
pub fn integrate(x: &FieldSnapshot, cells: &CylinderCells) -> f64 {
    let mut sum = 0.0;
    for &it in &cells.times {
        let s = x.slice(it, 0);
        for &p in &cells.ball {
            sum += s[p];
        }
    }
    sum * cells.cell_measure
}

/// Space-time L^p norm over the cells of |X| (all components pooled as a
/// Euclidean vector magnitude).
pub fn lp_norm(x: &FieldSnapshot, cells: &CylinderCells, p: f64) -> f64 {
    let mut sum = 0.0;
    for &it in &cells.times {
        match x.components {
            1 => {
                let s = x.slice(it, 0);
                for &pt in &cells.ball {
                    sum += s[pt].abs().powf(p);
                }
            }
            _ => {
                let (s0, s1, s2) = (x.slice(it, 0), x.slice(it, 1), x.slice(it, 2));
                for &pt in &cells.ball {
                    let m2 = s0[pt] * s0[pt] + s1[pt] * s1[pt] + s2[pt] * s2[pt];
                    sum += m2.powf(p / 2.0);
                }
            }
        }
    }
    (sum * cells.cell_measure).powf(1.0 / p)
}

/// Max of |X| (vector magnitude for 3-component fields) over the cells.
pub fn sup_norm(x: &FieldSnapshot, cells: &CylinderCells) -> f64 {
    let mut m = 0.0f64;
    for &it in &cells.times {
        match x.components {
            1 => {
                let s = x.slice(it, 0);
                for &pt in &cells.ball {
                    m = m.max(s[pt].abs());
                }
            }
            _ => {
                let (s0, s1, s2) = (x.slice(it, 0), x.slice(it, 1), x.slice(it, 2));
                for &pt in &cells.ball {
                    let m2 = s0[pt] * s0[pt] + s1[pt] * s1[pt] + s2[pt] * s2[pt];
                    m = m.max(m2.sqrt());
                }
            }
        }
    }
    m
}
