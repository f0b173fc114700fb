//! Regularized local energy balances and the dissipativity verdict.
//!
//! The building blocks, for divergence-free fields X, Y, Z and a spatial
//! mollifier theta_eps:
//!
//!   N_eps(X,Y,Z) = (Y*theta).([(X.grad)Z]*theta) + (Z*theta).([(X.grad)Y]*theta)
//!                  - div((Y.Z) X)
//!   R_eps(X,Y,Z) = int (grad theta_eps(y).delta_y[X]) (Y(x-y)-Z(x)).(Z(x-y)-Y(x)) dy
//!   S_eps(X,Y,Z) = int (grad theta_eps(y).delta_y[X]) (delta_y[Y]).((Z*theta)(x)-Y(x)) dy
//!   T_eps(X,Y,Z) = int (grad theta_eps(y).delta_y[X]) (delta_y[Z]).((Y*theta)(x)-Z(x)) dy
//!
//! with delta_y[X](t,x) = X(t,x-y) - X(t,x). Every y-integral is expanded
//! into circular convolutions with the spectral gradient of the sampled
//! kernel, so the key cancellation int grad theta_eps(y).delta_y[X] dy = 0
//! holds to machine precision for spectrally divergence-free X.
//!
//! On top of these: mu_eps / eta_eps commutator distributions, the
//! (alpha, eps) defect table of the regularized energy identity, the iterated
//! pressure limit lim_eps lim_alpha div(P_ae (u_ae + b_ae)) by Richardson
//! extrapolation, and the assembled distribution
//!
//!   lambda = -dt(|u|^2+|b|^2) + Lap(|u|^2+|b|^2) - 2(|grad u|^2+|grad b|^2)
//!            - div(|u|^2 b + |b|^2 u) - 2 <div(P(u+b))> + 2(f.u + g.b),
//!
//! paired against a bank of non-negative C^2 test bumps; the verdict is
//! "dissipative" iff every pairing is >= -tol_sign.

use crate::cylinder::ParabolicCylinder;
use crate::error::{Error, Result};
use crate::grid::{FieldSnapshot, Grid};
use crate::mollify::{
    mollify_space, mollify_time, space_kernel_multiplier, BumpKind, MollifierLadder,
};
use crate::par::par_map;
use crate::sim::advect_slice;
use crate::spectral::{max_divergence, SpectralWorkspace};
use serde::Serialize;

type C64 = rustfft::num_complex::Complex<f64>;

// ---------------------------------------------------------------------------
// Test functions: non-negative C^2 product bumps with analytic derivatives.
// ---------------------------------------------------------------------------

/// 1D bump (1-s^2)^3 on |s| < 1: non-negative, C^2 at the edges.
fn bump(s: f64) -> f64 {
    let w = 1.0 - s * s;
    if w <= 0.0 {
        0.0
    } else {
        w * w * w
    }
}

/// Non-negative C^2 space-time bump chi(t,x) = B((t-tc)/at) prod_a B(dx_a/ax).
///
/// Derivative pairings use the discrete adjoints of the operators applied to
/// the fields: per-axis spectral derivatives of the sampled bump (same
/// Nyquist conventions as the 3D gradient and Laplacian) and a central time
/// difference. Summation by parts is then exact at any resolution, e.g.
/// pair_lap(X) equals the plain pairing of the spectral Laplacian of X with
/// chi, and pair_grad(F) equals minus the pairing of the spectral divergence
/// of F.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestFunction {
    pub t_center: f64,
    pub x_center: [f64; 3],
    pub t_halfwidth: f64,
    pub x_halfwidth: f64,
}

/// Per-axis bump samples (value, first, second derivative in the coordinate).
struct AxisTables {
    bt: Vec<(f64, f64)>,
    bx: [Vec<(f64, f64, f64)>; 3],
}

impl TestFunction {
    fn tables(&self, grid: &Grid) -> AxisTables {
        let vt: Vec<f64> = (0..grid.nt)
            .map(|it| bump((grid.t_coord(it) - self.t_center) / self.t_halfwidth))
            .collect();
        let bt = (0..grid.nt)
            .map(|it| {
                let d = if it == 0 || it == grid.nt - 1 {
                    0.0
                } else {
                    (vt[it + 1] - vt[it - 1]) / (2.0 * grid.dt)
                };
                (vt[it], d)
            })
            .collect();
        let axis = |n: usize, coord: &dyn Fn(usize) -> f64, ax: usize| {
            let vals: Vec<f64> = (0..n)
                .map(|i| {
                    let d = grid_delta(grid, coord(i), self.x_center[ax], ax);
                    bump(d / self.x_halfwidth)
                })
                .collect();
            let (d1, d2) = spectral_derivs_1d(&vals, grid.box_length[ax]);
            vals.into_iter()
                .zip(d1)
                .zip(d2)
                .map(|((v, a), b)| (v, a, b))
                .collect()
        };
        AxisTables {
            bt,
            bx: [
                axis(grid.nx, &|i| grid.x_coord(i), 0),
                axis(grid.ny, &|j| grid.y_coord(j), 1),
                axis(grid.nz, &|k| grid.z_coord(k), 2),
            ],
        }
    }

    /// Integral of X * chi over interior time slices (scalar X).
    pub fn pair_value(&self, x: &FieldSnapshot) -> f64 {
        self.pair_impl(x, Weight::Value)
    }
    /// Integral of X * dt(chi).
    pub fn pair_dt(&self, x: &FieldSnapshot) -> f64 {
        self.pair_impl(x, Weight::Dt)
    }
    /// Integral of X * Lap(chi).
    pub fn pair_lap(&self, x: &FieldSnapshot) -> f64 {
        self.pair_impl(x, Weight::Lap)
    }

    fn pair_impl(&self, x: &FieldSnapshot, weight: Weight) -> f64 {
        assert_eq!(x.components, 1, "pairing expects a scalar field");
        let grid = x.grid;
        let tab = self.tables(&grid);
        let measure = grid.dt * grid.cell_volume();
        let mut sum = 0.0;
        for it in 1..grid.nt - 1 {
            let (bt, btd) = tab.bt[it];
            let tfac = match weight {
                Weight::Dt => btd,
                _ => bt,
            };
            if tfac == 0.0 && !matches!(weight, Weight::Lap) {
                continue;
            }
            if bt == 0.0 && btd == 0.0 {
                continue;
            }
            let s = x.slice(it, 0);
            let mut p = 0;
            for k in 0..grid.nz {
                let (bz, _, bzdd) = tab.bx[2][k];
                for j in 0..grid.ny {
                    let (by, _, bydd) = tab.bx[1][j];
                    for i in 0..grid.nx {
                        let (bx, _, bxdd) = tab.bx[0][i];
                        let w = match weight {
                            Weight::Value => tfac * bx * by * bz,
                            Weight::Dt => tfac * bx * by * bz,
                            Weight::Lap => {
                                bt * (bxdd * by * bz + bx * bydd * bz + bx * by * bzdd)
                            }
                        };
                        if w != 0.0 {
                            sum += s[p] * w;
                        }
                        p += 1;
                    }
                }
            }
        }
        sum * measure
    }

    /// Integral of X . grad(chi) for a 3-component X.
    pub fn pair_grad(&self, x: &FieldSnapshot) -> f64 {
        assert_eq!(x.components, 3, "pair_grad expects a vector field");
        let grid = x.grid;
        let tab = self.tables(&grid);
        let measure = grid.dt * grid.cell_volume();
        let mut sum = 0.0;
        for it in 1..grid.nt - 1 {
            let (bt, _) = tab.bt[it];
            if bt == 0.0 {
                continue;
            }
            let (s0, s1, s2) = (x.slice(it, 0), x.slice(it, 1), x.slice(it, 2));
            let mut p = 0;
            for k in 0..grid.nz {
                let (bz, bzd, _) = tab.bx[2][k];
                for j in 0..grid.ny {
                    let (by, byd, _) = tab.bx[1][j];
                    for i in 0..grid.nx {
                        let (bx, bxd, _) = tab.bx[0][i];
                        let gx = bxd * by * bz;
                        let gy = bx * byd * bz;
                        let gz = bx * by * bzd;
                        if gx != 0.0 || gy != 0.0 || gz != 0.0 {
                            sum += bt * (s0[p] * gx + s1[p] * gy + s2[p] * gz);
                        }
                        p += 1;
                    }
                }
            }
        }
        sum * measure
    }
}

enum Weight {
    Value,
    Dt,
    Lap,
}

fn grid_delta(grid: &Grid, a: f64, b: f64, axis: usize) -> f64 {
    grid.periodic_delta(a, b, axis)
}

/// First and second periodic spectral derivatives of a 1D sample vector.
/// The first derivative zeroes the unsigned Nyquist mode and the second keeps
/// it, matching the 3D gradient and Laplacian multipliers, so pairings built
/// from these tables are exact discrete adjoints of those operators.
fn spectral_derivs_1d(vals: &[f64], length: f64) -> (Vec<f64>, Vec<f64>) {
    let n = vals.len();
    let mut planner = rustfft::FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spec: Vec<C64> = vals.iter().map(|&v| C64::new(v, 0.0)).collect();
    fwd.process(&mut spec);
    let mut d1 = spec.clone();
    let mut d2 = spec;
    for m in 0..n {
        let mm = if m <= n / 2 {
            m as i64
        } else {
            m as i64 - n as i64
        };
        let k = 2.0 * std::f64::consts::PI * mm as f64 / length;
        let kd = if n % 2 == 0 && m == n / 2 { 0.0 } else { k };
        d1[m] *= C64::new(0.0, kd);
        d2[m] *= -k * k;
    }
    inv.process(&mut d1);
    inv.process(&mut d2);
    let s = 1.0 / n as f64;
    (
        d1.iter().map(|c| c.re * s).collect(),
        d2.iter().map(|c| c.re * s).collect(),
    )
}

/// Fixed bank of non-negative test bumps centered on a lattice inside a
/// parabolic cylinder.
#[derive(Debug, Clone, Serialize)]
pub struct TestBank {
    pub functions: Vec<TestFunction>,
}

impl TestBank {
    /// `per_axis`^3 spatial centers around the cylinder axis, all supports
    /// strictly inside Q (product bumps live in a box of circumradius
    /// sqrt(3) * x_halfwidth).
    pub fn lattice(
        grid: &Grid,
        q: &ParabolicCylinder,
        per_axis: usize,
        t_halfwidth: f64,
        x_halfwidth: f64,
    ) -> Result<TestBank> {
        q.check_inside(grid)?;
        if per_axis == 0 {
            return Err(Error::Parameter("per_axis must be >= 1".into()));
        }
        if t_halfwidth <= grid.dt || t_halfwidth > q.r * q.r {
            return Err(Error::Parameter(format!(
                "t_halfwidth {t_halfwidth} must lie in (dt, r^2 = {}]",
                q.r * q.r
            )));
        }
        let circum = 3.0f64.sqrt() * x_halfwidth;
        let slack = q.r - circum;
        if slack <= 0.0 {
            return Err(Error::Parameter(format!(
                "x_halfwidth {x_halfwidth} too large: bump circumradius {circum} exceeds r = {}",
                q.r
            )));
        }
        // Lattice offsets keep |center - axis| + circumradius < r.
        let reach = 0.9 * slack / 3.0f64.sqrt();
        let offset = |m: usize| -> f64 {
            if per_axis == 1 {
                0.0
            } else {
                -reach + 2.0 * reach * m as f64 / (per_axis - 1) as f64
            }
        };
        let mut functions = Vec::new();
        for mz in 0..per_axis {
            for my in 0..per_axis {
                for mx in 0..per_axis {
                    functions.push(TestFunction {
                        t_center: q.t0,
                        x_center: [
                            q.x0[0] + offset(mx),
                            q.x0[1] + offset(my),
                            q.x0[2] + offset(mz),
                        ],
                        t_halfwidth,
                        x_halfwidth,
                    });
                }
            }
        }
        Ok(TestBank { functions })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }
    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

// ---------------------------------------------------------------------------
// N, R, S, T and the commutator distributions.
// ---------------------------------------------------------------------------

/// The four increment quantities, sampled on the grid, plus the measured
/// supremum of the would-be-zero cancellation field theta_eps * div(X).
#[derive(Debug)]
pub struct NrstFields {
    pub n: FieldSnapshot,
    pub r: FieldSnapshot,
    pub s: FieldSnapshot,
    pub t: FieldSnapshot,
    pub cancellation: f64,
}

fn slices3(x: &FieldSnapshot, it: usize) -> [&[f64]; 3] {
    [x.slice(it, 0), x.slice(it, 1), x.slice(it, 2)]
}

/// Multiply a half-spectrum by i*k_axis and the kernel multiplier.
fn ik_mult(ws: &SpectralWorkspace, spec: &[C64], mult: &[C64], axis: usize) -> Vec<C64> {
    let mut out = spec.to_vec();
    ws.for_each_mode(|m, kx, ky, kz, _| {
        out[m] *= C64::new(0.0, [kx, ky, kz][axis]) * mult[m];
    });
    out
}

fn add_assign(acc: &mut [C64], other: &[C64]) {
    for (a, o) in acc.iter_mut().zip(other) {
        *a += o;
    }
}

/// Evaluate N, R, S, T for divergence-free X, Y, Z with the spatial bump
/// `kind` at width `epsilon`. All y-integrals are FFT convolutions against
/// the spectral gradient of the sampled kernel.
pub fn nrst(
    ws: &SpectralWorkspace,
    x: &FieldSnapshot,
    y: &FieldSnapshot,
    z: &FieldSnapshot,
    kind: BumpKind,
    epsilon: f64,
) -> Result<NrstFields> {
    x.check_same_grid(y, "nrst")?;
    x.check_same_grid(z, "nrst")?;
    for (name, field) in [("X", x), ("Y", y), ("Z", z)] {
        if field.components != 3 {
            return Err(Error::Contract(format!("nrst: {name} must be a vector field")));
        }
        let div = max_divergence(ws, field)?;
        if div > 1e-6 {
            return Err(Error::Contract(format!(
                "nrst: {name} is not divergence-free (max div = {div:.3e})"
            )));
        }
    }
    let grid = x.grid;
    let mult = space_kernel_multiplier(ws, &grid, kind, epsilon)?;
    let n3 = grid.n3();

    struct SlabOut {
        n: Vec<f64>,
        r: Vec<f64>,
        s: Vec<f64>,
        t: Vec<f64>,
        cancel: f64,
    }

    let slabs: Vec<SlabOut> = par_map(grid.nt, |it| {
        let xs = slices3(x, it);
        let ys = slices3(y, it);
        let zs = slices3(z, it);

        // Spectra of the raw components and the needed product fields.
        let xh: [Vec<C64>; 3] = std::array::from_fn(|c| ws.forward_slice(xs[c]));
        let yh: [Vec<C64>; 3] = std::array::from_fn(|c| ws.forward_slice(ys[c]));
        let zh: [Vec<C64>; 3] = std::array::from_fn(|c| ws.forward_slice(zs[c]));
        let prod = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(u, v)| u * v).collect()
        };
        let ydz: Vec<f64> = (0..n3)
            .map(|p| ys[0][p] * zs[0][p] + ys[1][p] * zs[1][p] + ys[2][p] * zs[2][p])
            .collect();
        let xy_h: Vec<Vec<C64>> = (0..9)
            .map(|ij| ws.forward_slice(&prod(xs[ij / 3], ys[ij % 3])))
            .collect();
        let xz_h: Vec<Vec<C64>> = (0..9)
            .map(|ij| ws.forward_slice(&prod(xs[ij / 3], zs[ij % 3])))
            .collect();
        let xydz_h: [Vec<C64>; 3] = std::array::from_fn(|i| ws.forward_slice(&prod(xs[i], &ydz)));
        let ydz_h = ws.forward_slice(&ydz);

        // D_i[F] = d/dx_i (theta_eps * F); sums over i come pre-combined.
        let d_sum = |specs: [&Vec<C64>; 3]| -> Vec<f64> {
            let mut acc = ik_mult(ws, specs[0], &mult, 0);
            add_assign(&mut acc, &ik_mult(ws, specs[1], &mult, 1));
            add_assign(&mut acc, &ik_mult(ws, specs[2], &mult, 2));
            ws.inverse_slice(acc)
        };
        let d_one = |spec: &Vec<C64>, axis: usize| -> Vec<f64> {
            ws.inverse_slice(ik_mult(ws, spec, &mult, axis))
        };

        let e_j: [Vec<f64>; 3] =
            std::array::from_fn(|j| d_sum([&xy_h[j], &xy_h[3 + j], &xy_h[6 + j]]));
        let f_j: [Vec<f64>; 3] =
            std::array::from_fn(|j| d_sum([&xz_h[j], &xz_h[3 + j], &xz_h[6 + j]]));
        let g_field = d_sum([&xydz_h[0], &xydz_h[1], &xydz_h[2]]);
        let c0 = d_sum([&xh[0], &xh[1], &xh[2]]);
        let dyz_i: [Vec<f64>; 3] = std::array::from_fn(|i| d_one(&ydz_h, i));
        let dy_ij: Vec<Vec<f64>> = (0..9).map(|ij| d_one(&yh[ij % 3], ij / 3)).collect();
        let dz_ij: Vec<Vec<f64>> = (0..9).map(|ij| d_one(&zh[ij % 3], ij / 3)).collect();

        // Mollified fields and mollified advections for N.
        let moll = |spec: &Vec<C64>| -> Vec<f64> {
            let mut s = spec.clone();
            for (v, m) in s.iter_mut().zip(&mult) {
                *v *= m;
            }
            ws.inverse_slice(s)
        };
        let y_eps: [Vec<f64>; 3] = std::array::from_fn(|c| moll(&yh[c]));
        let z_eps: [Vec<f64>; 3] = std::array::from_fn(|c| moll(&zh[c]));
        let adv_xz = advect_slice(ws, xs, zs);
        let adv_xy = advect_slice(ws, xs, ys);
        let adv_xz_eps: [Vec<f64>; 3] =
            std::array::from_fn(|c| moll(&ws.forward_slice(&adv_xz[c])));
        let adv_xy_eps: [Vec<f64>; 3] =
            std::array::from_fn(|c| moll(&ws.forward_slice(&adv_xy[c])));
        // div((Y.Z) X): spectral divergence of the product field.
        let div_ydzx = {
            let mut acc = vec![C64::default(); ws.spec_len()];
            for (i, spec) in xydz_h.iter().enumerate() {
                let mut d = spec.clone();
                ws.for_each_mode(|m, kx, ky, kz, _| {
                    d[m] *= C64::new(0.0, [kx, ky, kz][i]);
                });
                add_assign(&mut acc, &d);
            }
            ws.inverse_slice(acc)
        };

        let mut out = SlabOut {
            n: vec![0.0; n3],
            r: vec![0.0; n3],
            s: vec![0.0; n3],
            t: vec![0.0; n3],
            cancel: 0.0,
        };
        for p in 0..n3 {
            out.cancel = out.cancel.max(c0[p].abs());
            let mut n_val = -div_ydzx[p];
            let mut r_val = g_field[p] + ydz[p] * c0[p];
            let mut s_val = 0.0;
            let mut t_val = 0.0;
            for j in 0..3 {
                n_val += y_eps[j][p] * adv_xz_eps[j][p] + z_eps[j][p] * adv_xy_eps[j][p];
                r_val -= ys[j][p] * e_j[j][p] + zs[j][p] * f_j[j][p];
                let mut sy = e_j[j][p] - ys[j][p] * c0[p];
                let mut tz = f_j[j][p] - zs[j][p] * c0[p];
                for i in 0..3 {
                    sy -= xs[i][p] * dy_ij[3 * i + j][p];
                    tz -= xs[i][p] * dz_ij[3 * i + j][p];
                }
                s_val += (z_eps[j][p] - ys[j][p]) * sy;
                t_val += (y_eps[j][p] - zs[j][p]) * tz;
            }
            for i in 0..3 {
                let mut inner = dyz_i[i][p];
                for j in 0..3 {
                    inner -= ys[j][p] * dy_ij[3 * i + j][p] + zs[j][p] * dz_ij[3 * i + j][p];
                }
                r_val -= xs[i][p] * inner;
            }
            out.n[p] = n_val;
            out.r[p] = r_val;
            out.s[p] = s_val;
            out.t[p] = t_val;
        }
        out
    });

    let collect = |pick: fn(&SlabOut) -> &Vec<f64>| -> FieldSnapshot {
        FieldSnapshot {
            grid,
            components: 1,
            data: slabs.iter().flat_map(|s| pick(s).iter().copied()).collect(),
        }
    };
    let cancellation = slabs.iter().fold(0.0f64, |m, s| m.max(s.cancel));
    Ok(NrstFields {
        n: collect(|s| &s.n),
        r: collect(|s| &s.r),
        s: collect(|s| &s.s),
        t: collect(|s| &s.t),
        cancellation,
    })
}

/// Just the N quantity (used by the commutator distributions).
pub fn n_field(
    ws: &SpectralWorkspace,
    x: &FieldSnapshot,
    y: &FieldSnapshot,
    z: &FieldSnapshot,
    kind: BumpKind,
    epsilon: f64,
) -> Result<FieldSnapshot> {
    x.check_same_grid(y, "n_field")?;
    x.check_same_grid(z, "n_field")?;
    let grid = x.grid;
    let mult = space_kernel_multiplier(ws, &grid, kind, epsilon)?;
    let n3 = grid.n3();
    let slabs = par_map(grid.nt, |it| {
        let xs = slices3(x, it);
        let ys = slices3(y, it);
        let zs = slices3(z, it);
        let moll = |field: &[f64]| -> Vec<f64> {
            let mut s = ws.forward_slice(field);
            for (v, m) in s.iter_mut().zip(&mult) {
                *v *= m;
            }
            ws.inverse_slice(s)
        };
        let y_eps: [Vec<f64>; 3] = std::array::from_fn(|c| moll(ys[c]));
        let z_eps: [Vec<f64>; 3] = std::array::from_fn(|c| moll(zs[c]));
        let adv_xz = advect_slice(ws, xs, zs);
        let adv_xy = advect_slice(ws, xs, ys);
        let adv_xz_eps: [Vec<f64>; 3] = std::array::from_fn(|c| moll(&adv_xz[c]));
        let adv_xy_eps: [Vec<f64>; 3] = std::array::from_fn(|c| moll(&adv_xy[c]));
        let ydzx_h: [Vec<C64>; 3] = std::array::from_fn(|i| {
            let f: Vec<f64> = (0..n3)
                .map(|p| {
                    xs[i][p] * (ys[0][p] * zs[0][p] + ys[1][p] * zs[1][p] + ys[2][p] * zs[2][p])
                })
                .collect();
            ws.forward_slice(&f)
        });
        let mut acc = vec![C64::default(); ws.spec_len()];
        for (i, spec) in ydzx_h.iter().enumerate() {
            let mut d = spec.clone();
            ws.for_each_mode(|m, kx, ky, kz, _| {
                d[m] *= C64::new(0.0, [kx, ky, kz][i]);
            });
            add_assign(&mut acc, &d);
        }
        let div_ydzx = ws.inverse_slice(acc);
        let mut out = vec![0.0; n3];
        for p in 0..n3 {
            let mut v = -div_ydzx[p];
            for j in 0..3 {
                v += y_eps[j][p] * adv_xz_eps[j][p] + z_eps[j][p] * adv_xy_eps[j][p];
            }
            out[p] = v;
        }
        out
    });
    Ok(FieldSnapshot {
        grid,
        components: 1,
        data: slabs.concat(),
    })
}

/// The commutator distributions mu_eps = N(u,b,b) + N(b,u,u) and
/// eta_eps = N(v,h,h) + N(h,v,v).
pub fn mu_eta(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    v: &FieldSnapshot,
    h: &FieldSnapshot,
    kind: BumpKind,
    epsilon: f64,
) -> Result<(FieldSnapshot, FieldSnapshot)> {
    let mu = n_field(ws, u, b, b, kind, epsilon)?
        .axpy(1.0, &n_field(ws, b, u, u, kind, epsilon)?)?;
    let eta = n_field(ws, v, h, h, kind, epsilon)?
        .axpy(1.0, &n_field(ws, h, v, v, kind, epsilon)?)?;
    Ok((mu, eta))
}

// ---------------------------------------------------------------------------
// Regularized energy-balance defect table.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DefectEntry {
    pub alpha: f64,
    pub epsilon: f64,
    /// Residual of the regularized identity paired with each test function.
    pub residual: Vec<f64>,
    /// div(P_ae (u_ae + b_ae)) paired with each test function.
    pub div_pressure: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectTable {
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub entries: Vec<DefectEntry>,
    /// mu_eps pairings per epsilon rung (space-only mollification).
    pub mu: Vec<Vec<f64>>,
}

/// Central time differences on interior slices, zero on the boundary slices.
fn dt_central(x: &FieldSnapshot) -> FieldSnapshot {
    let grid = x.grid;
    let mut out = FieldSnapshot::zeros(grid, x.components);
    let inv2dt = 1.0 / (2.0 * grid.dt);
    for it in 1..grid.nt - 1 {
        for c in 0..x.components {
            let (plus, minus) = (x.slice(it + 1, c).to_vec(), x.slice(it - 1, c).to_vec());
            let dst = out.slice_mut(it, c);
            for p in 0..dst.len() {
                dst[p] = (plus[p] - minus[p]) * inv2dt;
            }
        }
    }
    out
}

/// |X|^2 pointwise (vector magnitude squared).
fn mag2(x: &FieldSnapshot) -> FieldSnapshot {
    let grid = x.grid;
    let mut out = FieldSnapshot::zeros(grid, 1);
    for it in 0..grid.nt {
        let src = slices3(x, it);
        let dst = out.slice_mut(it, 0);
        for p in 0..dst.len() {
            dst[p] = src[0][p] * src[0][p] + src[1][p] * src[1][p] + src[2][p] * src[2][p];
        }
    }
    out
}

/// Sum of squared spectral gradient entries of all components, per point.
pub(crate) fn grad_sq(ws: &SpectralWorkspace, x: &FieldSnapshot) -> FieldSnapshot {
    let grid = x.grid;
    let n3 = grid.n3();
    let slabs = par_map(grid.nt, |it| {
        let mut out = vec![0.0; n3];
        for c in 0..x.components {
            let spec = ws.forward_slice(x.slice(it, c));
            for axis in 0..3 {
                let mut d = spec.clone();
                ws.for_each_mode(|m, kx, ky, kz, _| {
                    d[m] *= C64::new(0.0, [kx, ky, kz][axis]);
                });
                let g = ws.inverse_slice(d);
                for p in 0..n3 {
                    out[p] += g[p] * g[p];
                }
            }
        }
        out
    });
    FieldSnapshot {
        grid,
        components: 1,
        data: slabs.concat(),
    }
}

/// Spectral Laplacian of a scalar field.
fn lap_scalar(ws: &SpectralWorkspace, x: &FieldSnapshot) -> FieldSnapshot {
    crate::spectral::map_spectral(ws, x, |ws, spec| {
        ws.for_each_mode(|m, _, _, _, k2| {
            spec[m] *= -k2;
        });
    })
}

/// Spectral divergence of P * X (pointwise product, vector X, scalar P).
fn div_scaled(ws: &SpectralWorkspace, p_field: &FieldSnapshot, x: &FieldSnapshot) -> FieldSnapshot {
    let grid = x.grid;
    let slabs = par_map(grid.nt, |it| {
        let ps = p_field.slice(it, 0);
        let mut acc = vec![C64::default(); ws.spec_len()];
        for axis in 0..3 {
            let f: Vec<f64> = x.slice(it, axis).iter().zip(ps).map(|(a, b)| a * b).collect();
            let mut spec = ws.forward_slice(&f);
            ws.for_each_mode(|m, kx, ky, kz, _| {
                spec[m] *= C64::new(0.0, [kx, ky, kz][axis]);
            });
            add_assign(&mut acc, &spec);
        }
        ws.inverse_slice(acc)
    });
    FieldSnapshot {
        grid,
        components: 1,
        data: slabs.concat(),
    }
}

/// Pointwise dot product of two vector fields.
fn dot(a: &FieldSnapshot, b: &FieldSnapshot) -> FieldSnapshot {
    let grid = a.grid;
    let mut out = FieldSnapshot::zeros(grid, 1);
    for it in 0..grid.nt {
        let (x, y) = (slices3(a, it), slices3(b, it));
        let dst = out.slice_mut(it, 0);
        for p in 0..dst.len() {
            dst[p] = x[0][p] * y[0][p] + x[1][p] * y[1][p] + x[2][p] * y[2][p];
        }
    }
    out
}

/// Defect table of the regularized energy identity over the (alpha, eps)
/// ladder: for exact solutions every residual pairing tends to zero.
pub fn energy_balance_defect(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    p: &FieldSnapshot,
    f: &FieldSnapshot,
    g: &FieldSnapshot,
    ladder: &MollifierLadder,
    bank: &TestBank,
) -> Result<DefectTable> {
    let grid = u.grid;
    ladder.validate(&grid)?;
    if bank.is_empty() {
        return Err(Error::Parameter("empty test bank".into()));
    }
    // Unmollified advections, reused across the whole ladder.
    let adv_bu = crate::sim::advect(ws, b, u)?;
    let adv_ub = crate::sim::advect(ws, u, b)?;

    let mut entries = Vec::new();
    for &alpha in &ladder.alphas {
        let ua = mollify_time(u, ladder.theta_profile, alpha)?;
        let ba = mollify_time(b, ladder.theta_profile, alpha)?;
        let pa = mollify_time(p, ladder.theta_profile, alpha)?;
        let fa = mollify_time(f, ladder.theta_profile, alpha)?;
        let ga = mollify_time(g, ladder.theta_profile, alpha)?;
        let adv_bu_a = mollify_time(&adv_bu, ladder.theta_profile, alpha)?;
        let adv_ub_a = mollify_time(&adv_ub, ladder.theta_profile, alpha)?;
        for &epsilon in &ladder.epsilons {
            let sm = |x: &FieldSnapshot| mollify_space(ws, x, ladder.phi_profile, epsilon);
            let uae = sm(&ua)?;
            let bae = sm(&ba)?;
            let pae = sm(&pa)?;
            let fae = sm(&fa)?;
            let gae = sm(&ga)?;
            let adv_bu_ae = sm(&adv_bu_a)?;
            let adv_ub_ae = sm(&adv_ub_a)?;

            let e = mag2(&uae).axpy(1.0, &mag2(&bae))?;
            let dte = dt_central(&e);
            let lape = lap_scalar(ws, &e);
            let gsq = grad_sq(ws, &uae).axpy(1.0, &grad_sq(ws, &bae))?;
            let divp = div_scaled(ws, &pae, &uae.axpy(1.0, &bae)?);
            let advpair = dot(&uae, &adv_bu_ae).axpy(1.0, &dot(&bae, &adv_ub_ae))?;
            let force = dot(&uae, &fae).axpy(1.0, &dot(&bae, &gae))?;

            // residual = RHS - dt(e) of the regularized identity.
            let mut residual = lape;
            residual = residual.axpy(-2.0, &gsq)?;
            residual = residual.axpy(-2.0, &divp)?;
            residual = residual.axpy(-2.0, &advpair)?;
            residual = residual.axpy(2.0, &force)?;
            residual = residual.axpy(-1.0, &dte)?;

            entries.push(DefectEntry {
                alpha,
                epsilon,
                residual: bank.functions.iter().map(|chi| chi.pair_value(&residual)).collect(),
                div_pressure: bank.functions.iter().map(|chi| chi.pair_value(&divp)).collect(),
            });
        }
    }
    // mu_eps pairings per epsilon (space-only mollification).
    let mut mu_rows = Vec::new();
    for &epsilon in &ladder.epsilons {
        let mu = n_field(ws, u, b, b, ladder.phi_profile, epsilon)?
            .axpy(1.0, &n_field(ws, b, u, u, ladder.phi_profile, epsilon)?)?;
        mu_rows.push(bank.functions.iter().map(|chi| chi.pair_value(&mu)).collect());
    }
    Ok(DefectTable {
        alphas: ladder.alphas.clone(),
        epsilons: ladder.epsilons.clone(),
        entries,
        mu: mu_rows,
    })
}

// ---------------------------------------------------------------------------
// Richardson extrapolation and the iterated pressure limit.
// ---------------------------------------------------------------------------

/// Iterated Richardson extrapolation for a ratio-2 width ladder (widest
/// first) with an even error series starting at `order`. Returns the deepest
/// extrapolant and the last increment as an error bar.
pub fn richardson(values: &[f64], order: f64) -> (f64, f64) {
    assert!(values.len() >= 2, "need at least two ladder rungs");
    let mut row = values.to_vec();
    let mut prev_best = *row.last().unwrap();
    let mut level = 0;
    while row.len() > 1 {
        let fac = 2.0f64.powf(order + 2.0 * level as f64);
        row = row
            .windows(2)
            .map(|w| (fac * w[1] - w[0]) / (fac - 1.0))
            .collect();
        level += 1;
        if row.len() > 1 {
            prev_best = *row.last().unwrap();
        }
    }
    let best = row[0];
    (best, (best - prev_best).abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct PressureLimitEntry {
    /// alpha-first iterated limit of <div(P_ae (u_ae + b_ae)), chi>.
    pub value: f64,
    /// Extrapolation error bar (outer increment plus worst inner increment).
    pub error_bar: f64,
    /// Joint-path (diagonal) extrapolation, for the order-independence check.
    pub joint_value: f64,
    pub path_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PressureLimitReport {
    pub per_test: Vec<PressureLimitEntry>,
}

/// Iterated limit lim_eps lim_alpha <div(P_ae (u_ae + b_ae)), chi> per test
/// function, by Richardson extrapolation over the mollifier ladder. The
/// divergence pairing is integrated by parts against the analytic gradient
/// of chi, so no discrete divergence enters.
pub fn pressure_defect_limit(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    p: &FieldSnapshot,
    ladder: &MollifierLadder,
    bank: &TestBank,
) -> Result<PressureLimitReport> {
    let grid = u.grid;
    ladder.validate(&grid)?;
    if bank.is_empty() {
        return Err(Error::Parameter("empty test bank".into()));
    }
    let na = ladder.alphas.len();
    let ne = ladder.epsilons.len();
    // pair[t][ia][ie]
    let mut table = vec![vec![vec![0.0; ne]; na]; bank.len()];
    for (ia, &alpha) in ladder.alphas.iter().enumerate() {
        let ua = mollify_time(u, ladder.theta_profile, alpha)?;
        let ba = mollify_time(b, ladder.theta_profile, alpha)?;
        let pa = mollify_time(p, ladder.theta_profile, alpha)?;
        for (ie, &epsilon) in ladder.epsilons.iter().enumerate() {
            let uae = mollify_space(ws, &ua, ladder.phi_profile, epsilon)?;
            let bae = mollify_space(ws, &ba, ladder.phi_profile, epsilon)?;
            let pae = mollify_space(ws, &pa, ladder.phi_profile, epsilon)?;
            let sum = uae.axpy(1.0, &bae)?;
            // W = P_ae (u_ae + b_ae); <div W, chi> = -int W . grad chi.
            let mut w = FieldSnapshot::zeros(grid, 3);
            for it in 0..grid.nt {
                let ps = pae.slice(it, 0).to_vec();
                for c in 0..3 {
                    let src = sum.slice(it, c).to_vec();
                    let dst = w.slice_mut(it, c);
                    for q in 0..dst.len() {
                        dst[q] = ps[q] * src[q];
                    }
                }
            }
            for (t, chi) in bank.functions.iter().enumerate() {
                table[t][ia][ie] = -chi.pair_grad(&w);
            }
        }
    }
    let per_test = table
        .iter()
        .map(|tab| {
            let mut inner = Vec::with_capacity(ne);
            let mut worst_inner = 0.0f64;
            for ie in 0..ne {
                let col: Vec<f64> = (0..na).map(|ia| tab[ia][ie]).collect();
                let (lim, err) = richardson(&col, 2.0);
                inner.push(lim);
                worst_inner = worst_inner.max(err);
            }
            let (value, outer_err) = richardson(&inner, 2.0);
            let diag: Vec<f64> = (0..na.min(ne)).map(|j| tab[j][j]).collect();
            let (joint_value, _) = richardson(&diag, 2.0);
            PressureLimitEntry {
                value,
                error_bar: outer_err + worst_inner,
                joint_value,
                path_difference: (value - joint_value).abs(),
            }
        })
        .collect();
    Ok(PressureLimitReport { per_test })
}

// ---------------------------------------------------------------------------
// Assembled dissipation distribution and verdict.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LambdaEntry {
    /// Direct assembly of <lambda, chi> with the iterated pressure limit.
    pub direct: f64,
    pub direct_error: f64,
    /// The same pairing through the companion commutator eta_eps.
    pub eta_route: f64,
    pub eta_error: f64,
    pub routes_agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaReport {
    pub per_test: Vec<LambdaEntry>,
    pub dissipative: bool,
    pub min_pairing: f64,
    pub tol_sign: f64,
}

/// Pair the assembled dissipation distribution with every bank function via
/// two routes and issue the sign verdict.
#[allow(clippy::too_many_arguments)]
pub fn lambda_assemble(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    v: &FieldSnapshot,
    h: &FieldSnapshot,
    p: &FieldSnapshot,
    f: &FieldSnapshot,
    g: &FieldSnapshot,
    ladder: &MollifierLadder,
    bank: &TestBank,
    tol_sign: f64,
) -> Result<LambdaReport> {
    let grid = u.grid;
    ladder.validate(&grid)?;
    if bank.is_empty() {
        return Err(Error::Parameter("empty test bank".into()));
    }
    // Route (i): direct assembly, derivatives moved onto the analytic chi.
    let e = mag2(u).axpy(1.0, &mag2(b))?;
    let gsq = grad_sq(ws, u).axpy(1.0, &grad_sq(ws, b))?;
    // |u|^2 b + |b|^2 u.
    let mut cubic = FieldSnapshot::zeros(grid, 3);
    {
        let eu = mag2(u);
        let eb = mag2(b);
        for it in 0..grid.nt {
            let (mu2, mb2) = (eu.slice(it, 0).to_vec(), eb.slice(it, 0).to_vec());
            for c in 0..3 {
                let (us, bs) = (u.slice(it, c).to_vec(), b.slice(it, c).to_vec());
                let dst = cubic.slice_mut(it, c);
                for q in 0..dst.len() {
                    dst[q] = mu2[q] * bs[q] + mb2[q] * us[q];
                }
            }
        }
    }
    let force = dot(f, u).axpy(1.0, &dot(g, b))?;
    let pressure = pressure_defect_limit(ws, u, b, p, ladder, bank)?;

    // Route (ii): eta_eps pairings over the epsilon ladder, extrapolated.
    let mut eta_rows: Vec<Vec<f64>> = vec![Vec::new(); bank.len()];
    for &epsilon in &ladder.epsilons {
        let eta = n_field(ws, v, h, h, ladder.phi_profile, epsilon)?
            .axpy(1.0, &n_field(ws, h, v, v, ladder.phi_profile, epsilon)?)?;
        for (t, chi) in bank.functions.iter().enumerate() {
            eta_rows[t].push(chi.pair_value(&eta));
        }
    }

    let mut per_test = Vec::with_capacity(bank.len());
    let mut min_pairing = f64::INFINITY;
    for (t, chi) in bank.functions.iter().enumerate() {
        let direct = chi.pair_dt(&e)
            + chi.pair_lap(&e)
            - 2.0 * chi.pair_value(&gsq)
            + chi.pair_grad(&cubic)
            - 2.0 * pressure.per_test[t].value
            + 2.0 * chi.pair_value(&force);
        let direct_error = 2.0 * pressure.per_test[t].error_bar;
        let (eta_route, eta_error) = richardson(&eta_rows[t], 2.0);
        min_pairing = min_pairing.min(direct);
        per_test.push(LambdaEntry {
            direct,
            direct_error,
            eta_route,
            eta_error,
            routes_agree: (direct - eta_route).abs()
                <= direct_error + eta_error + tol_sign,
        });
    }
    Ok(LambdaReport {
        dissipative: min_pairing >= -tol_sign,
        min_pairing,
        tol_sign,
        per_test,
    })
}
