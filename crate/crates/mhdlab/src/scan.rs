//! Small-gradient point diagnostics, candidate singular-set box counting, and
//! local Serrin-type hypothesis checks.
//!
//! The central quantity is the scaled local gradient energy
//!   G(r) = (1/r) * integral over Q_r of |grad u|^2 + |grad b|^2,
//! evaluated on parabolic cylinders Q_r = ]t0-r^2, t0+r^2[ x B(x0, r) with
//! spectral gradients and midpoint quadrature. A point is labelled a
//! regular candidate when the finite-resolution limsup surrogate (the maximum
//! of G over the smallest resolvable rungs) stays below a threshold
//! epsilon_star; points where G stays large and shows no decay trend are
//! irregular candidates. The labels are about the sampled data only, never a
//! claim about the underlying solution.

use crate::cylinder::{restrict_cylinder, ParabolicCylinder};
use crate::dissipation::grad_sq;
use crate::error::{Error, Result};
use crate::grid::{FieldSnapshot, Grid};
use crate::norms::{
    ball_indicator, convolve_slice, cylinder_lp, morrey_norm, MorreyParams, MorreyReport,
};
use crate::par::par_map;
use crate::spectral::SpectralWorkspace;
use serde::{Deserialize, Serialize};

/// A G(r) value below this threshold at all window rungs labels the point a
/// regular candidate; above it, the log-log slope decides between irregular
/// candidate (no decay) and inconclusive (decaying trend).
pub const DEFAULT_EPSILON_STAR: f64 = 0.01;

/// Minimum log-log decay slope for G(r) to count as "trending to zero".
const DECAY_SLOPE: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionParams {
    /// Smallness threshold for the limsup surrogate.
    pub epsilon_star: f64,
    /// Strictly decreasing radii ladder for G(r).
    pub scan_radii: Vec<f64>,
    /// Number of smallest rungs entering the limsup surrogate and the slope.
    pub window: usize,
}

impl CriterionParams {
    pub fn defaults(grid: &Grid) -> Self {
        let h = grid.spacing();
        let hmax = h[0].max(h[1]).max(h[2]);
        let rmax = grid.box_length[0]
            .min(grid.box_length[1])
            .min(grid.box_length[2])
            / 2.0
            - 2.0 * hmax;
        let mut scan_radii = Vec::new();
        let mut r = rmax;
        while r >= 2.0 * hmax && scan_radii.len() < 6 {
            scan_radii.push(r);
            r /= 2.0;
        }
        CriterionParams {
            epsilon_star: DEFAULT_EPSILON_STAR,
            scan_radii,
            window: 3,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.epsilon_star > 0.0) || !self.epsilon_star.is_finite() {
            return Err(Error::Parameter(format!(
                "epsilon_star = {} must be positive and finite",
                self.epsilon_star
            )));
        }
        if self.scan_radii.is_empty()
            || self.scan_radii.iter().any(|r| !(*r > 0.0))
            || self.scan_radii.windows(2).any(|w| w[0] <= w[1])
        {
            return Err(Error::Parameter(
                "scan_radii must be a non-empty strictly decreasing positive list".into(),
            ));
        }
        let h = grid.spacing();
        let hmax = h[0].max(h[1]).max(h[2]);
        let rmin = *self.scan_radii.last().unwrap();
        if rmin < 2.0 * hmax {
            return Err(Error::Parameter(format!(
                "smallest scan radius {rmin} is below two cells ({})",
                2.0 * hmax
            )));
        }
        if self.window < 2 || self.window > self.scan_radii.len() {
            return Err(Error::Parameter(format!(
                "window = {} must lie in 2..={}",
                self.window,
                self.scan_radii.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    RegularCandidate,
    IrregularCandidate,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointVerdict {
    pub t0: f64,
    pub x0: [f64; 3],
    /// (r, G(r)) pairs, largest radius first.
    pub g_table: Vec<(f64, f64)>,
    /// Maximum of G over the `window` smallest rungs.
    pub limsup_surrogate: f64,
    /// Least-squares slope of log G vs log r over the window (+inf when G
    /// vanishes identically there).
    pub slope: f64,
    pub verdict: Verdict,
}

fn window_stats(g_table: &[(f64, f64)], window: usize) -> (f64, f64) {
    let tail = &g_table[g_table.len() - window..];
    let limsup = tail.iter().fold(0.0f64, |m, &(_, g)| m.max(g));
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|&&(_, g)| g > 0.0)
        .map(|&(r, g)| (r.ln(), g.ln()))
        .collect();
    if pts.len() < 2 {
        // G vanishes on (most of) the window: decaying as fast as measurable.
        return (limsup, f64::INFINITY);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (limsup, sxy / sxx)
}

fn classify(limsup: f64, slope: f64, epsilon_star: f64) -> Verdict {
    if limsup < epsilon_star {
        Verdict::RegularCandidate
    } else if slope < DECAY_SLOPE {
        Verdict::IrregularCandidate
    } else {
        Verdict::Inconclusive
    }
}

/// Pointwise gradient energy density |grad u|^2 + |grad b|^2 (spectral).
pub fn gradient_energy_density(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
) -> Result<FieldSnapshot> {
    u.check_same_grid(b, "gradient_energy_density")?;
    if u.components != 3 || b.components != 3 {
        return Err(Error::Contract(
            "gradient_energy_density expects two vector fields".into(),
        ));
    }
    grad_sq(ws, u).axpy(1.0, &grad_sq(ws, b))
}

/// Evaluate G(r) over the radii ladder at each requested point and classify.
/// Errors when any cylinder of the ladder exits the sampled domain.
pub fn gradient_density_scan(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    points: &[(f64, [f64; 3])],
    params: &CriterionParams,
) -> Result<Vec<PointVerdict>> {
    params.validate(&u.grid)?;
    let density = gradient_energy_density(ws, u, b)?;
    let grid = u.grid;
    points
        .iter()
        .map(|&(t0, x0)| {
            let mut g_table = Vec::with_capacity(params.scan_radii.len());
            for &r in &params.scan_radii {
                let q = ParabolicCylinder::new(t0, x0, r)?;
                let cells = restrict_cylinder(&grid, &q)?;
                let mut sum = 0.0;
                for &it in &cells.times {
                    let s = density.slice(it, 0);
                    for &p in &cells.ball {
                        sum += s[p];
                    }
                }
                g_table.push((r, sum * cells.cell_measure / r));
            }
            let (limsup_surrogate, slope) = window_stats(&g_table, params.window);
            Ok(PointVerdict {
                t0,
                x0,
                g_table,
                limsup_surrogate,
                slope,
                verdict: classify(limsup_surrogate, slope, params.epsilon_star),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxCountEntry {
    /// Parabolic box scale: spatial side `r`, temporal extent `r^2`.
    pub scale: f64,
    /// Number of boxes of this scale containing at least one candidate.
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularSetReport {
    pub epsilon_star: f64,
    /// Grid indices [it, iz, iy, ix] of irregular candidates.
    pub candidates: Vec<[usize; 4]>,
    pub box_counts: Vec<BoxCountEntry>,
    /// Least-squares slope of log count vs log (1/scale); 0 when fewer than
    /// two non-empty scales exist.
    pub dimension_slope: f64,
}

/// Scan every admissible grid point with the `window` smallest rungs of the
/// ladder (via FFT ball sums, all centers of a slice at once), collect the
/// irregular candidates, and count the dyadic parabolic boxes covering them.
pub fn singular_set_boxcount(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    params: &CriterionParams,
) -> Result<SingularSetReport> {
    params.validate(&u.grid)?;
    let density = gradient_energy_density(ws, u, b)?;
    let grid = u.grid;
    let n3 = grid.n3();
    let radii = &params.scan_radii[params.scan_radii.len() - params.window..];
    let h = grid.spacing();
    for &r in radii {
        for a in 0..3 {
            if r + h[a] > grid.box_length[a] / 2.0 {
                return Err(Error::Domain(format!(
                    "scan radius {r} does not fit in half the periodic box"
                )));
            }
        }
    }
    let measure = grid.dt * grid.cell_volume();

    // g_per_radius[ir][it * n3 + cell] = G(r) for the cylinder centered there,
    // or NaN where the cylinder exits the time interval.
    let g_per_radius: Vec<Vec<f64>> = radii
        .iter()
        .map(|&r| {
            let kernel = ws.forward_slice(&ball_indicator(&grid, r));
            let ballsums = par_map(grid.nt, |it| {
                convolve_slice(ws, density.slice(it, 0), &kernel)
            });
            // Prefix sums over time for O(1) cylinder sums per center.
            let mut prefix = vec![vec![0.0; n3]; grid.nt + 1];
            for it in 0..grid.nt {
                for p in 0..n3 {
                    prefix[it + 1][p] = prefix[it][p] + ballsums[it][p];
                }
            }
            let r2 = r * r;
            let mut g = vec![f64::NAN; grid.nt * n3];
            for it in 0..grid.nt {
                let t0 = grid.t_coord(it);
                if t0 - r2 < grid.t_start + grid.dt || t0 + r2 > grid.t_end() - grid.dt {
                    continue;
                }
                // Slices with |t - t0| < r^2 (strict).
                let lo = ((t0 - r2 - grid.t_start) / grid.dt).floor() as i64 + 1;
                let hi = ((t0 + r2 - grid.t_start) / grid.dt).ceil() as i64 - 1;
                let (lo, hi) = (lo.max(0) as usize, (hi.min(grid.nt as i64 - 1)) as usize);
                for p in 0..n3 {
                    g[it * n3 + p] = (prefix[hi + 1][p] - prefix[lo][p]) * measure / r;
                }
            }
            g
        })
        .collect();

    let mut candidates = Vec::new();
    for it in 0..grid.nt {
        for p in 0..n3 {
            let idx = it * n3 + p;
            if g_per_radius.iter().any(|g| g[idx].is_nan()) {
                continue;
            }
            // FFT round-off can leave tiny negative ball sums; clamp.
            let g_table: Vec<(f64, f64)> = radii
                .iter()
                .enumerate()
                .map(|(ir, &r)| (r, g_per_radius[ir][idx].max(0.0)))
                .collect();
            let (limsup, slope) = window_stats(&g_table, g_table.len());
            if classify(limsup, slope, params.epsilon_star) == Verdict::IrregularCandidate {
                let i = p % grid.nx;
                let j = (p / grid.nx) % grid.ny;
                let k = p / (grid.nx * grid.ny);
                candidates.push([it, k, j, i]);
            }
        }
    }

    // Dyadic parabolic box counting over the candidate set.
    let hmax = h[0].max(h[1]).max(h[2]);
    let mut box_counts = Vec::new();
    let mut scale = grid.box_length[0]
        .min(grid.box_length[1])
        .min(grid.box_length[2])
        / 2.0;
    while scale >= 2.0 * hmax {
        let wt = ((scale * scale / grid.dt).floor() as usize).max(1);
        let wx = ((scale / h[0]).floor() as usize).max(1);
        let wy = ((scale / h[1]).floor() as usize).max(1);
        let wz = ((scale / h[2]).floor() as usize).max(1);
        let mut boxes: Vec<[usize; 4]> = candidates
            .iter()
            .map(|&[it, k, j, i]| [it / wt, k / wz, j / wy, i / wx])
            .collect();
        boxes.sort_unstable();
        boxes.dedup();
        box_counts.push(BoxCountEntry {
            scale,
            count: boxes.len(),
        });
        scale /= 2.0;
    }

    let pts: Vec<(f64, f64)> = box_counts
        .iter()
        .filter(|e| e.count > 0)
        .map(|e| ((1.0 / e.scale).ln(), (e.count as f64).ln()))
        .collect();
    let dimension_slope = if pts.len() < 2 {
        0.0
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        sxy / sxx
    };

    Ok(SingularSetReport {
        epsilon_star: params.epsilon_star,
        candidates,
        box_counts,
        dimension_slope,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SerrinExponents {
    pub p0: f64,
    pub q0: f64,
    pub p1: f64,
    pub q1: f64,
}

impl SerrinExponents {
    /// 2 < p <= q, 5 < q < inf for both pairs; the second pair is dominated
    /// by the first (p1 <= p0, q1 <= q0).
    pub fn validate(&self) -> Result<()> {
        for (p, q, who) in [(self.p0, self.q0, "first"), (self.p1, self.q1, "second")] {
            if !(p > 2.0 && p <= q && q > 5.0 && q.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{who} exponent pair ({p}, {q}) violates 2 < p <= q and 5 < q < inf"
                )));
            }
        }
        if self.p1 > self.p0 || self.q1 > self.q0 {
            return Err(Error::Parameter(format!(
                "second pair ({}, {}) must be dominated by the first ({}, {})",
                self.p1, self.q1, self.p0, self.q0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SerrinReport {
    pub exponents: SerrinExponents,
    pub region: ParabolicCylinder,
    /// Morrey norm of the first field restricted to the region, M^{p0,q0}.
    pub morrey_first: MorreyReport,
    /// Morrey norm of the second field restricted to the region, M^{p1,q1}.
    pub morrey_second: MorreyReport,
    /// L^{q0} / L^{q1} norms over the half-radius core cylinder.
    pub core_lq_first: f64,
    pub core_lq_second: f64,
    pub hypotheses_satisfied: bool,
}

/// Check the local integrability hypotheses of the one-sided regularity
/// statement: both fields restricted to the region lie in the stated parabolic
/// Morrey spaces, with the exponent ordering validated, and report the
/// higher-integrability norms on the half-radius core as the conclusion check.
pub fn serrin_hypothesis_check(
    ws: &SpectralWorkspace,
    first: &FieldSnapshot,
    second: &FieldSnapshot,
    region: &ParabolicCylinder,
    exponents: &SerrinExponents,
    scan_radii: &[f64],
    center_stride: usize,
) -> Result<SerrinReport> {
    exponents.validate()?;
    first.check_same_grid(second, "serrin_hypothesis_check")?;
    region.check_inside(&first.grid)?;
    let mp = |p, q| MorreyParams {
        p,
        q,
        scan_radii: scan_radii.to_vec(),
        center_stride,
    };
    let morrey_first = morrey_norm(ws, first, &mp(exponents.p0, exponents.q0), Some(region))?;
    let morrey_second = morrey_norm(ws, second, &mp(exponents.p1, exponents.q1), Some(region))?;
    let core = region.with_radius(region.r / 2.0);
    let core_lq_first = cylinder_lp(first, &core, exponents.q0)?;
    let core_lq_second = cylinder_lp(second, &core, exponents.q1)?;
    let hypotheses_satisfied = morrey_first.value.is_finite()
        && morrey_second.value.is_finite()
        && core_lq_first.is_finite()
        && core_lq_second.is_finite();
    Ok(SerrinReport {
        exponents: *exponents,
        region: *region,
        morrey_first,
        morrey_second,
        core_lq_first,
        core_lq_second,
        hypotheses_satisfied,
    })
}
