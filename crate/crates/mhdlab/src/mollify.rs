//! Space-time mollifier ladders.
//!
//! Mollification uses the separable kernel theta_alpha(t) * phi_eps(x) with
//! theta_alpha(t) = theta(t/alpha)/alpha supported in (-alpha, alpha) and
//! phi_eps(x) = phi(x/eps)/eps^3 supported in B(0, eps). Profiles are named
//! smooth bumps; both are renormalized to exact discrete unit mass on the
//! grid. Space convolutions run through the FFT (periodic), time convolutions
//! are direct; near the time boundary the truncated window is renormalized so
//! constants are preserved everywhere.

use crate::error::{Error, Result};
use crate::grid::{FieldSnapshot, Grid};
use crate::par::par_map;
use crate::spectral::SpectralWorkspace;
use serde::{Deserialize, Serialize};

type C64 = rustfft::num_complex::Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BumpKind {
    /// exp(-1/(1-s^2)) on |s| < 1: the standard C-infinity bump.
    Exponential,
    /// (1-s^2)^4 on |s| < 1: a C^3 polynomial bump.
    Polynomial,
}

impl std::str::FromStr for BumpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(Self::Exponential),
            "polynomial" => Ok(Self::Polynomial),
            other => Err(Error::Parameter(format!(
                "unknown bump profile {other:?} (expected exponential or polynomial)"
            ))),
        }
    }
}

impl BumpKind {
    /// Unnormalized bump value at |s| (support |s| < 1).
    pub fn eval(&self, s: f64) -> f64 {
        let s2 = s * s;
        if s2 >= 1.0 {
            return 0.0;
        }
        match self {
            BumpKind::Exponential => (-1.0 / (1.0 - s2)).exp(),
            BumpKind::Polynomial => {
                let w = 1.0 - s2;
                w * w * w * w
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollifierLadder {
    pub theta_profile: BumpKind,
    pub phi_profile: BumpKind,
    /// Decreasing time halfwidths.
    pub alphas: Vec<f64>,
    /// Decreasing space halfwidths.
    pub epsilons: Vec<f64>,
}

impl MollifierLadder {
    /// Ratio-2 ladder ending at the resolvability floor (2 dt, 2 h).
    pub fn ratio2(grid: &Grid, rungs: usize) -> Self {
        let h = grid.spacing()[0].max(grid.spacing()[1]).max(grid.spacing()[2]);
        let alphas = (0..rungs)
            .rev()
            .map(|j| 2.0 * grid.dt * (1 << j) as f64)
            .collect();
        let epsilons = (0..rungs).rev().map(|j| 2.0 * h * (1 << j) as f64).collect();
        MollifierLadder {
            theta_profile: BumpKind::Exponential,
            phi_profile: BumpKind::Exponential,
            alphas,
            epsilons,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let h = grid.spacing()[0].max(grid.spacing()[1]).max(grid.spacing()[2]);
        let check = |name: &str, list: &[f64], floor: f64| -> Result<()> {
            if list.is_empty()
                || list.iter().any(|w| !(*w > 0.0))
                || list.windows(2).any(|w| w[0] <= w[1])
            {
                return Err(Error::Parameter(format!(
                    "{name} must be a non-empty strictly decreasing positive list"
                )));
            }
            for &w in list {
                if w < floor {
                    return Err(Error::Parameter(format!(
                        "{name} entry {w} below the resolvability floor {floor}"
                    )));
                }
            }
            Ok(())
        };
        check("alphas", &self.alphas, 2.0 * grid.dt)?;
        check("epsilons", &self.epsilons, 2.0 * h)?;
        let half = grid.box_length[0]
            .min(grid.box_length[1])
            .min(grid.box_length[2])
            / 2.0;
        if self.epsilons[0] >= half {
            return Err(Error::Parameter(format!(
                "epsilon {} does not fit in half the periodic box {half}",
                self.epsilons[0]
            )));
        }
        Ok(())
    }
}

/// Discrete time-kernel weights at offsets -m..=m, renormalized so their sum
/// is exactly 1 (discrete unit mass).
pub fn time_kernel(grid: &Grid, kind: BumpKind, alpha: f64) -> Result<Vec<f64>> {
    if alpha < 2.0 * grid.dt {
        return Err(Error::Parameter(format!(
            "alpha = {alpha} below the resolvability floor {}",
            2.0 * grid.dt
        )));
    }
    let m = (alpha / grid.dt).ceil() as i64 - 1;
    let mut w: Vec<f64> = (-m..=m)
        .map(|j| kind.eval(j as f64 * grid.dt / alpha))
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    Ok(w)
}

/// Spatial kernel sampled periodically around the origin cell, normalized to
/// exact discrete unit mass (sum * cell volume = 1).
pub fn space_kernel(grid: &Grid, kind: BumpKind, epsilon: f64) -> Result<Vec<f64>> {
    let h = grid.spacing();
    let hmax = h[0].max(h[1]).max(h[2]);
    if epsilon < 2.0 * hmax {
        return Err(Error::Parameter(format!(
            "epsilon = {epsilon} below the resolvability floor {}",
            2.0 * hmax
        )));
    }
    if epsilon
        >= grid.box_length[0]
            .min(grid.box_length[1])
            .min(grid.box_length[2])
            / 2.0
    {
        return Err(Error::Parameter(format!(
            "epsilon = {epsilon} does not fit in half the periodic box"
        )));
    }
    let mut w = vec![0.0; grid.n3()];
    let mut p = 0;
    for k in 0..grid.nz {
        let dz = grid.periodic_delta(grid.z_coord(k), 0.0, 2);
        for j in 0..grid.ny {
            let dy = grid.periodic_delta(grid.y_coord(j), 0.0, 1);
            for i in 0..grid.nx {
                let dx = grid.periodic_delta(grid.x_coord(i), 0.0, 0);
                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                w[p] = kind.eval(r / epsilon);
                p += 1;
            }
        }
    }
    let sum: f64 = w.iter().sum();
    let norm = 1.0 / (sum * grid.cell_volume());
    for v in &mut w {
        *v *= norm;
    }
    Ok(w)
}

/// Fourier multiplier of the sampled spatial kernel: unit value at k = 0, so
/// convolution through it preserves constants exactly.
pub fn space_kernel_multiplier(
    ws: &SpectralWorkspace,
    grid: &Grid,
    kind: BumpKind,
    epsilon: f64,
) -> Result<Vec<C64>> {
    let kernel = space_kernel(grid, kind, epsilon)?;
    let mut spec = ws.forward_slice(&kernel);
    let vol = grid.cell_volume();
    for v in &mut spec {
        *v *= vol;
    }
    Ok(spec)
}

/// Convolve every slice/component with a precomputed spatial multiplier.
pub fn apply_space_multiplier(
    ws: &SpectralWorkspace,
    x: &FieldSnapshot,
    multiplier: &[C64],
) -> FieldSnapshot {
    let grid = x.grid;
    let slabs = par_map(grid.nt * x.components, |tc| {
        let (it, c) = (tc / x.components, tc % x.components);
        let mut spec = ws.forward_slice(x.slice(it, c));
        for (v, m) in spec.iter_mut().zip(multiplier) {
            *v *= m;
        }
        ws.inverse_slice(spec)
    });
    FieldSnapshot {
        grid,
        components: x.components,
        data: slabs.concat(),
    }
}

/// Spatial mollification X * phi_eps on every slice.
pub fn mollify_space(
    ws: &SpectralWorkspace,
    x: &FieldSnapshot,
    kind: BumpKind,
    epsilon: f64,
) -> Result<FieldSnapshot> {
    let multiplier = space_kernel_multiplier(ws, &x.grid, kind, epsilon)?;
    Ok(apply_space_multiplier(ws, x, &multiplier))
}

/// Time mollification X * theta_alpha. Slices whose window exits the sampled
/// interval use the truncated window renormalized to unit mass.
pub fn mollify_time(x: &FieldSnapshot, kind: BumpKind, alpha: f64) -> Result<FieldSnapshot> {
    let grid = x.grid;
    let w = time_kernel(&grid, kind, alpha)?;
    let m = (w.len() as i64 - 1) / 2;
    let n3 = grid.n3();
    let slabs = par_map(grid.nt * x.components, |tc| {
        let (it, c) = (tc / x.components, tc % x.components);
        let mut out = vec![0.0; n3];
        let mut mass = 0.0;
        for (dj, &wj) in (-m..=m).zip(&w) {
            let js = it as i64 - dj;
            if js < 0 || js >= grid.nt as i64 {
                continue;
            }
            mass += wj;
            let src = x.slice(js as usize, c);
            for (o, s) in out.iter_mut().zip(src) {
                *o += wj * s;
            }
        }
        for o in &mut out {
            *o /= mass;
        }
        out
    });
    Ok(FieldSnapshot {
        grid,
        components: x.components,
        data: slabs.concat(),
    })
}

/// Full space-time mollification with the separable kernel.
pub fn mollify(
    ws: &SpectralWorkspace,
    x: &FieldSnapshot,
    theta: BumpKind,
    phi: BumpKind,
    alpha: f64,
    epsilon: f64,
) -> Result<FieldSnapshot> {
    let t = mollify_time(x, theta, alpha)?;
    mollify_space(ws, &t, phi, epsilon)
}
