//! Smooth space-time cut-off ladders.
//!
//! A ladder holds radii rho0 < rho3 < rho2 < rho1 < rho around a center
//! (t0, x0) and two sampled cut-offs:
//!
//! - psi: identically 1 on Q_{rho1}, supported in Q_{rho};
//! - phi: identically 1 on Q_{rho3}, supported in Q_{rho2}.
//!
//! Both factor as time profile x radial space profile. The profile family is
//! selectable; the default is the clamped error-function ramp, whose Gaussian
//! spectral tail decays fast enough for the harmonic-correction identity
//! checks. A C-infinity exponential ramp and the C^2 quintic smoothstep are
//! kept as alternatives.

use crate::cylinder::ParabolicCylinder;
use crate::error::{Error, Result};
use crate::grid::{FieldSnapshot, Grid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// Error-function ramp clamped where its deviation from {0,1} drops
    /// below ~4e-10. The Gaussian spectral tail exp(-sigma^2 k^2 / 2) makes
    /// this the most accurate choice for the harmonic-correction identities;
    /// the clamp step is far below every tolerance in use.
    Gauss,
    /// sigma(s) = f(s)/(f(s)+f(1-s)) with f(s) = exp(-1/s): C-infinity ramp.
    SmoothExp,
    /// sigma(s) = 6s^5 - 15s^4 + 10s^3: C^2 ramp with polynomial tails.
    Quintic,
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss" => Ok(Self::Gauss),
            "smooth-exp" => Ok(Self::SmoothExp),
            "quintic" => Ok(Self::Quintic),
            other => Err(Error::Parameter(format!(
                "unknown cutoff profile {other:?} (expected gauss, smooth-exp or quintic)"
            ))),
        }
    }
}

/// Half-width of the Gauss ramp in standard deviations: the ramp runs over
/// s in [0,1] with sigma = 0.5 / GAUSS_HALFWIDTH.
const GAUSS_HALFWIDTH: f64 = 6.0;

impl ProfileKind {
    /// Rising ramp: 0 for s <= 0, 1 for s >= 1, smooth and monotone between.
    pub fn rise(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        match self {
            ProfileKind::Gauss => {
                let sigma = 0.5 / GAUSS_HALFWIDTH;
                let v = 0.5
                    * (1.0 + libm::erf((s - 0.5) / (std::f64::consts::SQRT_2 * sigma)));
                v.clamp(0.0, 1.0)
            }
            ProfileKind::SmoothExp => {
                let f = |x: f64| (-1.0 / x).exp();
                let g = f(s);
                g / (g + f(1.0 - s))
            }
            ProfileKind::Quintic => s * s * s * (10.0 + s * (-15.0 + 6.0 * s)),
        }
    }

    /// Falling ramp from 1 at `a` to 0 at `b` in the variable `d`.
    pub fn fall_between(&self, d: f64, a: f64, b: f64) -> f64 {
        1.0 - self.rise((d - a) / (b - a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffRadii {
    pub rho0: f64,
    pub rho3: f64,
    pub rho2: f64,
    pub rho1: f64,
    pub rho: f64,
}

impl CutoffRadii {
    /// Equal-margin default ladder (0.5, 0.6, 0.7, 0.8, 1.0) * rho.
    pub fn default_for(rho: f64) -> Self {
        CutoffRadii {
            rho0: 0.5 * rho,
            rho3: 0.6 * rho,
            rho2: 0.7 * rho,
            rho1: 0.8 * rho,
            rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = [self.rho0, self.rho3, self.rho2, self.rho1, self.rho];
        if !(r[0] > 0.0) || r.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter(format!(
                "cutoff radii must satisfy 0 < rho0 < rho3 < rho2 < rho1 < rho, got {r:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CutoffLadder {
    pub t0: f64,
    pub x0: [f64; 3],
    pub radii: CutoffRadii,
    pub profile: ProfileKind,
    /// Cut-off with plateau Q_{rho1}, support Q_{rho}.
    pub psi: FieldSnapshot,
    /// Cut-off with plateau Q_{rho3}, support Q_{rho2}.
    pub phi: FieldSnapshot,
    /// Spatial factor of psi (one slice, x fastest): psi = psi_tfac * psi_space.
    pub psi_space: Vec<f64>,
    /// Time factor of psi per slice.
    pub psi_tfac: Vec<f64>,
}

impl CutoffLadder {
    pub fn cylinder(&self, r: f64) -> ParabolicCylinder {
        ParabolicCylinder {
            t0: self.t0,
            x0: self.x0,
            r,
        }
    }

    /// The inner cylinder Q_{rho0}.
    pub fn inner(&self) -> ParabolicCylinder {
        self.cylinder(self.radii.rho0)
    }
}

/// Spatial ramp S(|x-x0|) sampled on one slice, and time factors T(t) per
/// slice; the sampled cut-off is the exact product T(t) * S(x).
fn sample_factors(
    grid: Grid,
    t0: f64,
    x0: [f64; 3],
    r_in: f64,
    r_out: f64,
    profile: ProfileKind,
) -> (Vec<f64>, Vec<f64>) {
    let mut space = vec![0.0; grid.n3()];
    let mut p = 0;
    for k in 0..grid.nz {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let x = [grid.x_coord(i), grid.y_coord(j), grid.z_coord(k)];
                let mut d2 = 0.0;
                for a in 0..3 {
                    let d = grid.periodic_delta(x[a], x0[a], a);
                    d2 += d * d;
                }
                space[p] = profile.fall_between(d2.sqrt(), r_in, r_out);
                p += 1;
            }
        }
    }
    let tfac: Vec<f64> = (0..grid.nt)
        .map(|it| profile.fall_between((grid.t_coord(it) - t0).abs(), r_in * r_in, r_out * r_out))
        .collect();
    (space, tfac)
}

fn assemble(grid: Grid, space: &[f64], tfac: &[f64]) -> FieldSnapshot {
    let mut f = FieldSnapshot::zeros(grid, 1);
    for it in 0..grid.nt {
        let t = tfac[it];
        let s = f.slice_mut(it, 0);
        for (dst, sp) in s.iter_mut().zip(space) {
            *dst = t * sp;
        }
    }
    f
}

/// Build and validate the cut-off ladder on the grid.
pub fn build_cutoff(
    grid: Grid,
    t0: f64,
    x0: [f64; 3],
    radii: CutoffRadii,
    profile: ProfileKind,
) -> Result<CutoffLadder> {
    radii.validate()?;
    let outer = ParabolicCylinder::new(t0, x0, radii.rho)?;
    outer.check_inside(&grid)?;
    let (psi_space, psi_tfac) = sample_factors(grid, t0, x0, radii.rho1, radii.rho, profile);
    let (phi_space, phi_tfac) = sample_factors(grid, t0, x0, radii.rho3, radii.rho2, profile);
    let psi = assemble(grid, &psi_space, &psi_tfac);
    let phi = assemble(grid, &phi_space, &phi_tfac);
    let ladder = CutoffLadder {
        t0,
        x0,
        radii,
        profile,
        psi,
        phi,
        psi_space,
        psi_tfac,
    };
    ladder.verify_on_grid(&grid)?;
    Ok(ladder)
}

impl CutoffLadder {
    /// On-grid invariant check: plateau, support, and range of both cut-offs.
    fn verify_on_grid(&self, grid: &Grid) -> Result<()> {
        let checks = [
            (&self.psi, self.radii.rho1, self.radii.rho, "psi"),
            (&self.phi, self.radii.rho3, self.radii.rho2, "phi"),
        ];
        for (field, r_in, r_out, name) in checks {
            let q_in = self.cylinder(r_in);
            let q_out = self.cylinder(r_out);
            for it in 0..grid.nt {
                let t = grid.t_coord(it);
                let s = field.slice(it, 0);
                let mut p = 0;
                for k in 0..grid.nz {
                    for j in 0..grid.ny {
                        for i in 0..grid.nx {
                            let v = s[p];
                            p += 1;
                            if !(0.0..=1.0).contains(&v) {
                                return Err(Error::Contract(format!(
                                    "{name} = {v} out of [0,1]"
                                )));
                            }
                            let x = [grid.x_coord(i), grid.y_coord(j), grid.z_coord(k)];
                            if q_in.contains(grid, t, x) && (v - 1.0).abs() > 1e-12 {
                                return Err(Error::Contract(format!(
                                    "{name} = {v} != 1 on the plateau cylinder"
                                )));
                            }
                            if !q_out.contains(grid, t, x) && v.abs() > 1e-12 {
                                return Err(Error::Contract(format!(
                                    "{name} = {v} != 0 outside the support cylinder"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
