//! Data generation: manufactured exact solutions with forcing residuals and
//! a mini pseudo-spectral time stepper for the symmetrized MHD system
//!
//!   dt u = Lap u - (b.grad) u - grad P + f
//!   dt b = Lap b - (u.grad) b - grad P + g,   div u = div b = 0,
//!
//! with unit viscosity/resistivity. Manufactured tuples pick smooth
//! divergence-free u, b with analytic time derivatives, set P by the
//! spectral pressure solve, and define the forces so the system holds
//! identically: f = dt u - Lap u + (b.grad) u + grad P, g symmetrically.

use crate::elsasser::{pressure_slice, solve_pressure};
use crate::error::{Error, Result};
use crate::grid::{FieldSnapshot, Grid};
use crate::par::par_map;
use crate::spectral::{
    dealias, gradient, laplacian, map_spectral, SpectralWorkspace,
};

type C64 = rustfft::num_complex::Complex<f64>;

/// (X.grad) Y with 2/3-dealiased products, per time slice.
pub fn advect(
    ws: &SpectralWorkspace,
    x: &FieldSnapshot,
    y: &FieldSnapshot,
) -> Result<FieldSnapshot> {
    x.check_same_grid(y, "advect")?;
    if x.components != 3 || y.components != 3 {
        return Err(Error::Contract("advect: need 3-component fields".into()));
    }
    let grid = x.grid;
    let slabs = par_map(grid.nt, |it| {
        let xs = [x.slice(it, 0), x.slice(it, 1), x.slice(it, 2)];
        let ys = [y.slice(it, 0), y.slice(it, 1), y.slice(it, 2)];
        advect_slice(ws, xs, ys).concat()
    });
    Ok(FieldSnapshot {
        grid,
        components: 3,
        data: slabs.concat(),
    })
}

/// One spatial slice of (X.grad) Y; returns the three components.
pub fn advect_slice(ws: &SpectralWorkspace, x: [&[f64]; 3], y: [&[f64]; 3]) -> [Vec<f64>; 3] {
    let n = x[0].len();
    std::array::from_fn(|c| {
        let spec_yc = ws.forward_slice(y[c]);
        let mut acc = vec![0.0f64; n];
        for j in 0..3 {
            let mut d = spec_yc.clone();
            ws.for_each_mode(|m, kx, ky, kz, _| {
                d[m] *= C64::new(0.0, [kx, ky, kz][j]);
            });
            let dy = ws.inverse_slice(d);
            for p in 0..n {
                acc[p] += x[j][p] * dy[p];
            }
        }
        let mut spec = ws.forward_slice(&acc);
        ws.dealias_spec(&mut spec);
        ws.inverse_slice(spec)
    })
}

/// Names of the bundled manufactured solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedName {
    TaylorGreen,
    AbcDrift,
    ProductModes,
}

impl std::str::FromStr for ManufacturedName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "taylor-green" => Ok(Self::TaylorGreen),
            "abc-drift" => Ok(Self::AbcDrift),
            "product-modes" => Ok(Self::ProductModes),
            other => Err(Error::Parameter(format!(
                "unknown manufactured solution {other:?} (expected taylor-green, abc-drift, product-modes)"
            ))),
        }
    }
}

/// Exact tuple (u, b, P, f, g) for a manufactured solution on `grid`.
/// The box must be 2*pi-periodic-compatible in each axis for the bundled
/// trigonometric patterns; amplitudes decay exponentially in time.
pub fn manufactured_solution(
    name: ManufacturedName,
    grid: Grid,
) -> Result<(
    FieldSnapshot,
    FieldSnapshot,
    FieldSnapshot,
    FieldSnapshot,
    FieldSnapshot,
)> {
    let ws = SpectralWorkspace::new(&grid);
    // Patterns are built for the 2*pi box; other sizes would break periodicity.
    for l in grid.box_length {
        if (l - std::f64::consts::TAU).abs() > 1e-12 {
            return Err(Error::Parameter(
                "manufactured solutions require a 2*pi-periodic box".into(),
            ));
        }
    }
    let (sig_u, sig_b) = (0.08, 0.12);
    let pattern_u = move |x: [f64; 3], c: usize| -> f64 {
        match name {
            ManufacturedName::TaylorGreen => match c {
                0 => x[0].sin() * x[1].cos() * x[2].cos(),
                1 => -(x[0].cos()) * x[1].sin() * x[2].cos(),
                _ => 0.0,
            },
            ManufacturedName::AbcDrift => match c {
                0 => x[2].sin() + x[1].cos(),
                1 => x[0].sin() + x[2].cos(),
                _ => x[1].sin() + x[0].cos(),
            },
            ManufacturedName::ProductModes => match c {
                0 => 0.0,
                1 => x[0].sin(),
                _ => x[0].cos() * 0.8,
            },
        }
    };
    let pattern_b = move |x: [f64; 3], c: usize| -> f64 {
        match name {
            ManufacturedName::TaylorGreen => match c {
                0 => 0.6 * x[2].sin(),
                1 => 0.6 * x[0].sin(),
                _ => 0.6 * x[1].sin(),
            },
            ManufacturedName::AbcDrift => {
                let s = [x[0] + 1.0, x[1] + 1.0, x[2] + 1.0];
                0.5 * match c {
                    0 => s[2].sin() + s[1].cos(),
                    1 => s[0].sin() + s[2].cos(),
                    _ => s[1].sin() + s[0].cos(),
                }
            }
            ManufacturedName::ProductModes => match c {
                0 => 0.7 * x[1].cos(),
                1 => 0.0,
                _ => 0.7 * x[1].sin(),
            },
        }
    };
    let u = FieldSnapshot::from_fn(grid, 3, |t, x, c| (-sig_u * t).exp() * pattern_u(x, c));
    let b = FieldSnapshot::from_fn(grid, 3, |t, x, c| (-sig_b * t).exp() * pattern_b(x, c));
    let dudt = u.scale(-sig_u);
    let dbdt = b.scale(-sig_b);
    let p = solve_pressure(&ws, &u, &b)?;
    let grad_p = gradient(&ws, &p)?;
    // f = dt u - Lap u + (b.grad) u + grad P (divergence-free by construction).
    let f = dudt
        .axpy(-1.0, &laplacian(&ws, &u)?)?
        .axpy(1.0, &advect(&ws, &b, &u)?)?
        .axpy(1.0, &grad_p)?;
    let g = dbdt
        .axpy(-1.0, &laplacian(&ws, &b)?)?
        .axpy(1.0, &advect(&ws, &u, &b)?)?
        .axpy(1.0, &grad_p)?;
    Ok((u, b, p, f, g))
}

/// Max-norm residuals of both equations, using 2nd-order central time
/// differences on the interior slices. Returns (residual_u, residual_b).
pub fn mhd_residual(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    p: &FieldSnapshot,
    f: &FieldSnapshot,
    g: &FieldSnapshot,
) -> Result<(f64, f64)> {
    let grid = u.grid;
    let grad_p = gradient(ws, p)?;
    let mut res = [0.0f64; 2];
    for (which, (a, adv_by, force)) in [(u, b, f), (b, u, g)].into_iter().enumerate() {
        let lap = laplacian(ws, a)?;
        let adv = advect(ws, adv_by, a)?;
        for it in 1..grid.nt - 1 {
            for c in 0..3 {
                let prev = a.slice(it - 1, c);
                let next = a.slice(it + 1, c);
                let l = lap.slice(it, c);
                let ad = adv.slice(it, c);
                let gp = grad_p.slice(it, c);
                let fo = force.slice(it, c);
                for pidx in 0..grid.n3() {
                    let ddt = (next[pidx] - prev[pidx]) / (2.0 * grid.dt);
                    let r = ddt - l[pidx] + ad[pidx] + gp[pidx] - fo[pidx];
                    res[which] = res[which].max(r.abs());
                }
            }
        }
    }
    Ok((res[0], res[1]))
}

/// Simulation configuration for the mini stepper.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub grid: Grid,
    /// Initial condition: "taylor-green", "abc-drift", "product-modes",
    /// or "random".
    pub initial: String,
    /// Amplitude applied to the initial condition.
    pub amplitude: f64,
    /// Forcing name; only "none" is bundled.
    pub forcing: String,
    pub cfl: f64,
    pub seed: u64,
}

/// Single-time state of the stepper: six component slices at time t.
pub struct SimState {
    pub t: f64,
    pub u: [Vec<f64>; 3],
    pub b: [Vec<f64>; 3],
}

fn leray_slice(ws: &SpectralWorkspace, v: [Vec<f64>; 3]) -> [Vec<f64>; 3] {
    let mut s = v.map(|c| ws.forward_slice(&c));
    ws.for_each_mode(|i, kx, ky, kz, _| {
        let kd2 = kx * kx + ky * ky + kz * kz;
        if kd2 > 0.0 {
            let kdotx = kx * s[0][i] + ky * s[1][i] + kz * s[2][i];
            let fac = kdotx / kd2;
            s[0][i] -= kx * fac;
            s[1][i] -= ky * fac;
            s[2][i] -= kz * fac;
        }
    });
    s.map(|c| ws.inverse_slice(c))
}

/// Multiply every mode by exp(-|k|^2 tau) (heat semigroup).
fn heat_slice(ws: &SpectralWorkspace, v: &[Vec<f64>; 3], tau: f64) -> [Vec<f64>; 3] {
    std::array::from_fn(|c| {
        let mut s = ws.forward_slice(&v[c]);
        ws.for_each_mode(|i, _, _, _, k2| s[i] *= (-k2 * tau).exp());
        ws.inverse_slice(s)
    })
}

/// Projected nonlinear term: N_u = Leray(-(b.grad)u), N_b = Leray(-(u.grad)b).
fn nonlinear(ws: &SpectralWorkspace, u: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
    fn as_ref(v: &[Vec<f64>; 3]) -> [&[f64]; 3] {
        [&v[0], &v[1], &v[2]]
    }
    let mut nu = advect_slice(ws, as_ref(b), as_ref(u));
    let mut nb = advect_slice(ws, as_ref(u), as_ref(b));
    for c in 0..3 {
        nu[c].iter_mut().for_each(|x| *x = -*x);
        nb[c].iter_mut().for_each(|x| *x = -*x);
    }
    (leray_slice(ws, nu), leray_slice(ws, nb))
}

fn axpy3(a: &[Vec<f64>; 3], s: f64, b: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
    std::array::from_fn(|c| a[c].iter().zip(&b[c]).map(|(x, y)| x + s * y).collect())
}

/// One integrating-factor RK4 step of size dt. Errors on CFL violation
/// (dt > cfl * h / max(|u|,|b|)).
pub fn step(ws: &SpectralWorkspace, state: &SimState, dt: f64, cfl: f64, h: f64) -> Result<SimState> {
    let vmax = state
        .u
        .iter()
        .chain(state.b.iter())
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if vmax > 0.0 && dt > cfl * h / vmax {
        return Err(Error::Parameter(format!(
            "CFL violation: dt = {dt} exceeds cfl*h/|v|max = {}",
            cfl * h / vmax
        )));
    }
    // Integrating-factor RK4 for dt w = Lap w + N(w).
    let (k1u, k1b) = nonlinear(ws, &state.u, &state.b);
    let eu = heat_slice(ws, &state.u, dt / 2.0);
    let eb = heat_slice(ws, &state.b, dt / 2.0);
    let u1 = heat_slice(ws, &axpy3(&state.u, dt / 2.0, &k1u), dt / 2.0);
    let b1 = heat_slice(ws, &axpy3(&state.b, dt / 2.0, &k1b), dt / 2.0);
    let (k2u, k2b) = nonlinear(ws, &u1, &b1);
    let u2 = axpy3(&eu, dt / 2.0, &k2u);
    let b2 = axpy3(&eb, dt / 2.0, &k2b);
    let (k3u, k3b) = nonlinear(ws, &u2, &b2);
    let u3 = heat_slice(ws, &axpy3(&eu, dt, &k3u), dt / 2.0);
    let b3 = heat_slice(ws, &axpy3(&eb, dt, &k3b), dt / 2.0);
    let (k4u, k4b) = nonlinear(ws, &u3, &b3);

    let combine = |w0: &[Vec<f64>; 3], k1: &[Vec<f64>; 3], k2: &[Vec<f64>; 3], k3: &[Vec<f64>; 3], k4: &[Vec<f64>; 3]| {
        // w_{n+1} = E2 w0 + dt/6 (E2 k1 + 2 E k2 + 2 E k3 + k4),
        // E = heat(dt/2), E2 = heat(dt).
        let w_full = heat_slice(ws, &axpy3(w0, dt / 6.0, k1), dt);
        let mid = heat_slice(ws, &axpy3(k2, 1.0, k3), dt / 2.0);
        axpy3(&axpy3(&w_full, dt / 3.0, &mid), dt / 6.0, k4)
    };
    let u_next = combine(&state.u, &k1u, &k2u, &k3u, &k4u);
    let b_next = combine(&state.b, &k1b, &k2b, &k3b, &k4b);
    Ok(SimState {
        t: state.t + dt,
        u: leray_slice(ws, u_next),
        b: leray_slice(ws, b_next),
    })
}

/// Run the configured simulation and record every `stride`-th step into
/// snapshots (u, b, P); P is recomputed per recorded slice. The number of
/// recorded slices is grid.nt; grid.dt is the recording interval, so the
/// integration step is dt / stride.
pub fn record(
    ws: &SpectralWorkspace,
    config: &SimConfig,
    stride: usize,
) -> Result<(FieldSnapshot, FieldSnapshot, FieldSnapshot)> {
    if stride == 0 {
        return Err(Error::Parameter("stride must be >= 1".into()));
    }
    if !(config.cfl > 0.0 && config.cfl < 1.0) {
        return Err(Error::Parameter(format!(
            "cfl = {} must lie in ]0,1[",
            config.cfl
        )));
    }
    let grid = config.grid;
    let init = initial_state(ws, config)?;
    let h = grid.spacing()[0].min(grid.spacing()[1]).min(grid.spacing()[2]);
    let dt_step = grid.dt / stride as f64;

    let mut u = FieldSnapshot::zeros(grid, 3);
    let mut b = FieldSnapshot::zeros(grid, 3);
    let mut p = FieldSnapshot::zeros(grid, 1);
    let mut state = init;
    for it in 0..grid.nt {
        if it > 0 {
            for _ in 0..stride {
                state = step(ws, &state, dt_step, config.cfl, h)?;
            }
        }
        for c in 0..3 {
            u.slice_mut(it, c).copy_from_slice(&state.u[c]);
            b.slice_mut(it, c).copy_from_slice(&state.b[c]);
        }
        let ps = pressure_slice(
            ws,
            [&state.u[0], &state.u[1], &state.u[2]],
            [&state.b[0], &state.b[1], &state.b[2]],
        );
        p.slice_mut(it, 0).copy_from_slice(&ps);
    }
    Ok((u, b, p))
}

/// Divergence-free initial state at grid.t_start.
pub fn initial_state(ws: &SpectralWorkspace, config: &SimConfig) -> Result<SimState> {
    let grid = config.grid;
    let one_slice = Grid::new(
        grid.nx,
        grid.ny,
        grid.nz,
        grid.box_length,
        4,
        grid.dt,
        grid.t_start,
    )?;
    let (u0, b0) = match config.initial.as_str() {
        "random" => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
            let n = 4 * 3 * grid.n3();
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let raw = FieldSnapshot::new(one_slice, 3, data).unwrap();
                // Low-pass to |m| <= n/6 so the random data is well resolved.
                let mmax = (grid.nx / 6).max(1) as i64;
                map_spectral(ws, &raw, |ws, spec| {
                    ws.for_each_mode_numbers(|i, mx, my, mz| {
                        if mx.abs() > mmax || my.abs() > mmax || mz.abs() > mmax {
                            spec[i] = C64::default();
                        }
                    });
                })
            };
            (mk(&mut rng), mk(&mut rng))
        }
        name => {
            let mname: ManufacturedName = name.parse()?;
            let (u, b, _, _, _) = manufactured_solution(mname, one_slice)?;
            (u, b)
        }
    };
    let u0 = crate::spectral::leray_project(ws, &dealias(ws, &u0))?;
    let b0 = crate::spectral::leray_project(ws, &dealias(ws, &b0))?;
    let amp = config.amplitude;
    Ok(SimState {
        t: grid.t_start,
        u: std::array::from_fn(|c| u0.slice(0, c).iter().map(|v| v * amp).collect()),
        b: std::array::from_fn(|c| b0.slice(0, c).iter().map(|v| v * amp).collect()),
    })
}
