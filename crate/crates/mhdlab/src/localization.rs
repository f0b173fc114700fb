//! Harmonic corrections and their companion system.
//!
//! Given divergence-free u, b and a cut-off ladder psi, the corrections
//!
//!   v = -(1/Lap) curl(psi curl u),   h = -(1/Lap) curl(psi curl b)
//!
//! agree with u, b on the inner cylinder Q_{rho0} up to harmonic correctors
//! beta = u - v, gamma = b - h. The pair (v, h) satisfies an MHD-shaped
//! companion system
//!
//!   dt v = Lap v - (h.grad) v - grad q + k,
//!   dt h = Lap h - (v.grad) h - grad r + l,
//!
//! on Q_{rho0}, with pressures q = q1 + q2, r = r1 + r2 and divergence-free
//! forces k = k0 + k1 + k2 + k3, l = l0 + l1 + l2 + l3:
//!
//!   q1 = -(1/Lap) div(psi (b.grad)u),
//!   q2 =  (1/Lap) div(psi A),   A = (h.grad)beta + (gamma.grad)v + (gamma.grad)beta,
//!   k0 = -(1/Lap) curl(psi curl f),
//!   k1 = -(1/Lap) curl( curl((Lap psi) u) - grad(Lap psi) x u )
//!        + 2 (1/Lap) curl( sum_i d_i( curl((d_i psi) u) - grad(d_i psi) x u ) ),
//!   k2 = -(1/Lap) curl( grad(psi) x ((b.grad)u) ),
//!   k3 = -psi A + grad (1/Lap) div(psi A)    (sharing the q2 evaluation),
//!
//! and the l/r formulas obtained by swapping u <-> b, v <-> h, beta <-> gamma,
//! f -> g. All cut-off derivative fields use the ladder's exact tensor
//! factorization psi = T(t) S(x), so the spatial derivatives of S are
//! computed once.

use crate::cutoff::CutoffLadder;
use crate::cylinder::{lp_norm, restrict_cylinder, sup_norm, CylinderCells};
use crate::error::{Error, Result};
use crate::grid::FieldSnapshot;
use crate::par::par_map;
use crate::sim::advect_slice;
use crate::spectral::{max_divergence, SpectralWorkspace};

type C64 = rustfft::num_complex::Complex<f64>;
type Spec3 = [Vec<C64>; 3];

// --- slice-level spectral kernels ---

fn fwd3(ws: &SpectralWorkspace, x: [&[f64]; 3]) -> Spec3 {
    std::array::from_fn(|c| ws.forward_slice(x[c]))
}

fn inv3(ws: &SpectralWorkspace, s: Spec3) -> [Vec<f64>; 3] {
    let [a, b, c] = s;
    [
        ws.inverse_slice(a),
        ws.inverse_slice(b),
        ws.inverse_slice(c),
    ]
}

fn curl_spec(ws: &SpectralWorkspace, s: &Spec3) -> Spec3 {
    let mut out: Spec3 = std::array::from_fn(|_| vec![C64::default(); ws.spec_len()]);
    ws.for_each_mode(|i, kx, ky, kz, _| {
        out[0][i] = C64::new(0.0, ky) * s[2][i] - C64::new(0.0, kz) * s[1][i];
        out[1][i] = C64::new(0.0, kz) * s[0][i] - C64::new(0.0, kx) * s[2][i];
        out[2][i] = C64::new(0.0, kx) * s[1][i] - C64::new(0.0, ky) * s[0][i];
    });
    out
}

/// Multiply by 1/|k|^2 (zero mode to zero): the spectral form of -(1/Lap).
fn neg_invlap_spec(ws: &SpectralWorkspace, s: &mut Spec3) {
    ws.for_each_mode(|i, _, _, _, k2| {
        for comp in s.iter_mut() {
            comp[i] = if k2 > 0.0 {
                comp[i] / k2
            } else {
                C64::default()
            };
        }
    });
}

/// (1/Lap) div X as a spectral scalar: (i k . X_hat) / (-|k|^2).
fn invlap_div_spec(ws: &SpectralWorkspace, s: &Spec3) -> Vec<C64> {
    let mut out = vec![C64::default(); ws.spec_len()];
    ws.for_each_mode(|i, kx, ky, kz, k2| {
        if k2 > 0.0 {
            let div = C64::new(0.0, kx) * s[0][i]
                + C64::new(0.0, ky) * s[1][i]
                + C64::new(0.0, kz) * s[2][i];
            out[i] = div / -k2;
        }
    });
    out
}

fn grad_spec(ws: &SpectralWorkspace, s: &[C64]) -> Spec3 {
    let mut out: Spec3 = std::array::from_fn(|_| vec![C64::default(); ws.spec_len()]);
    ws.for_each_mode(|i, kx, ky, kz, _| {
        out[0][i] = C64::new(0.0, kx) * s[i];
        out[1][i] = C64::new(0.0, ky) * s[i];
        out[2][i] = C64::new(0.0, kz) * s[i];
    });
    out
}

fn scale_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn cross_phys(a: [&[f64]; 3], b: [&[f64]; 3]) -> [Vec<f64>; 3] {
    let n = a[0].len();
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    for p in 0..n {
        out[0][p] = a[1][p] * b[2][p] - a[2][p] * b[1][p];
        out[1][p] = a[2][p] * b[0][p] - a[0][p] * b[2][p];
        out[2][p] = a[0][p] * b[1][p] - a[1][p] * b[0][p];
    }
    out
}

fn r3(x: &[Vec<f64>; 3]) -> [&[f64]; 3] {
    [&x[0], &x[1], &x[2]]
}

fn add3(a: &mut [Vec<f64>; 3], b: &[Vec<f64>; 3]) {
    for c in 0..3 {
        for (x, y) in a[c].iter_mut().zip(&b[c]) {
            *x += y;
        }
    }
}

/// Zero every mode with a Nyquist component: derivative symbols vanish
/// there, so keeping them would break the exact grad/div/inverse-Laplacian
/// cancellations used below.
fn zero_nyquist(ws: &SpectralWorkspace, s: &mut [C64]) {
    let (hx, hy, hz) = (
        (ws.nx / 2) as i64,
        (ws.ny / 2) as i64,
        (ws.nz / 2) as i64,
    );
    ws.for_each_mode_numbers(|i, mx, my, mz| {
        if mx == hx || my == hy || mz == hz {
            s[i] = C64::default();
        }
    });
}

/// Forward transform of (scalar * vector). The product is kept at (almost)
/// full spectral resolution: these are linear diagnostics of sampled fields,
/// and truncating to the 2/3 band would break the pointwise plateau
/// identities by far more than the aliasing it prevents. Only the Nyquist
/// planes are dropped, matching the derivative convention.
fn fwd_scaled(ws: &SpectralWorkspace, scalar: &[f64], x: [&[f64]; 3]) -> Spec3 {
    std::array::from_fn(|c| {
        let prod = scale_mul(scalar, x[c]);
        let mut s = ws.forward_slice(&prod);
        zero_nyquist(ws, &mut s);
        s
    })
}

/// One slice of the harmonic correction -(1/Lap) curl(psi curl X).
pub fn harmonic_slice(ws: &SpectralWorkspace, x: [&[f64]; 3], psi: &[f64]) -> [Vec<f64>; 3] {
    let spec = fwd3(ws, x);
    let w = inv3(ws, curl_spec(ws, &spec));
    let pw = fwd_scaled(ws, psi, [&w[0], &w[1], &w[2]]);
    let mut v = curl_spec(ws, &pw);
    neg_invlap_spec(ws, &mut v);
    inv3(ws, v)
}

/// Harmonic correction v = -(1/Lap) curl(psi curl X) per time slice.
pub fn harmonic_correction(
    ws: &SpectralWorkspace,
    x: &FieldSnapshot,
    psi: &FieldSnapshot,
) -> Result<FieldSnapshot> {
    x.check_same_grid(psi, "harmonic_correction")?;
    if x.components != 3 || psi.components != 1 {
        return Err(Error::Contract(
            "harmonic_correction: need 3-component X and scalar psi".into(),
        ));
    }
    let d = max_divergence(ws, x)?;
    if d > 1e-6 {
        return Err(Error::Contract(format!(
            "harmonic_correction: divergence of X is {d:.3e}, exceeds 1e-6"
        )));
    }
    let grid = x.grid;
    let slabs = par_map(grid.nt, |it| {
        harmonic_slice(
            ws,
            [x.slice(it, 0), x.slice(it, 1), x.slice(it, 2)],
            psi.slice(it, 0),
        )
        .concat()
    });
    Ok(FieldSnapshot {
        grid,
        components: 3,
        data: slabs.concat(),
    })
}

/// beta = u - v, gamma = b - h.
pub fn correctors(
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    v: &FieldSnapshot,
    h: &FieldSnapshot,
) -> Result<(FieldSnapshot, FieldSnapshot)> {
    u.check_same_grid(v, "correctors u/v")?;
    b.check_same_grid(h, "correctors b/h")?;
    Ok((u.axpy(-1.0, v)?, b.axpy(-1.0, h)?))
}

/// Spatial derivative fields of the cut-off's space profile S, computed
/// spectrally once: grad S, Lap S, grad(Lap S), and the Hessian rows
/// grad(d_i S).
struct SpaceDerivs {
    grad: [Vec<f64>; 3],
    lap: Vec<f64>,
    grad_lap: [Vec<f64>; 3],
    hess: [[Vec<f64>; 3]; 3],
}

fn space_derivs(ws: &SpectralWorkspace, s: &[f64]) -> SpaceDerivs {
    let spec = ws.forward_slice(s);
    let grad_s = grad_spec(ws, &spec);
    let grad = inv3(
        ws,
        std::array::from_fn(|c| grad_s[c].clone()),
    );
    let mut lap_spec = spec.clone();
    ws.for_each_mode(|i, _, _, _, k2| lap_spec[i] *= -k2);
    let grad_lap = inv3(ws, grad_spec(ws, &lap_spec));
    let lap = ws.inverse_slice(lap_spec);
    let hess = std::array::from_fn(|i| inv3(ws, grad_spec(ws, &grad_s[i])));
    SpaceDerivs {
        grad,
        lap,
        grad_lap,
        hess,
    }
}

/// Companion pressures and forces for one slice and one equation.
struct SliceForces {
    q1: Vec<f64>,
    q2: Vec<f64>,
    k0: [Vec<f64>; 3],
    k1: [Vec<f64>; 3],
    k2: [Vec<f64>; 3],
    k3: [Vec<f64>; 3],
}

/// Assemble q1, q2, k0..k3 for the v-equation at one slice. Arguments:
/// `adv` = (b.grad)u, `a_field` = A, `u` the corrected field, `force` = f,
/// `psi` the cut-off slice, `sd`/`tfac` the spatial derivatives of S and the
/// time factor with psi = tfac * S.
#[allow(clippy::too_many_arguments)]
fn slice_forces(
    ws: &SpectralWorkspace,
    u: [&[f64]; 3],
    force: [&[f64]; 3],
    adv: &[Vec<f64>; 3],
    a_field: &[Vec<f64>; 3],
    psi: &[f64],
    sd: &SpaceDerivs,
    tfac: f64,
) -> SliceForces {
    let n = u[0].len();
    // q1 = -(1/Lap) div(psi adv)
    let psi_adv = fwd_scaled(ws, psi, [&adv[0], &adv[1], &adv[2]]);
    let mut q1_spec = invlap_div_spec(ws, &psi_adv);
    q1_spec.iter_mut().for_each(|v| *v = -*v);
    let q1 = ws.inverse_slice(q1_spec);

    // q2 = (1/Lap) div(psi A); k3 = -psi A + grad q2 (shared evaluation).
    let psi_a: [Vec<f64>; 3] = std::array::from_fn(|c| scale_mul(psi, &a_field[c]));
    let psi_a_spec = fwd_scaled(ws, &vec![1.0; n], [&psi_a[0], &psi_a[1], &psi_a[2]]);
    let q2_spec = invlap_div_spec(ws, &psi_a_spec);
    let grad_q2 = inv3(ws, grad_spec(ws, &q2_spec));
    let q2 = ws.inverse_slice(q2_spec);
    // Evaluate -psi A from the same spectrum as q2 so that div(k3) = 0
    // exactly in the spectral representation.
    let psi_a_roundtrip = inv3(ws, std::array::from_fn(|c| psi_a_spec[c].clone()));
    let k3: [Vec<f64>; 3] = std::array::from_fn(|c| {
        psi_a_roundtrip[c]
            .iter()
            .zip(&grad_q2[c])
            .map(|(pa, gq)| -pa + gq)
            .collect()
    });

    // k0 = harmonic correction of the force.
    let k0 = harmonic_slice(ws, force, psi);

    // k2 = -(1/Lap) curl(grad(psi) x adv); grad psi = tfac * grad S.
    let gpsi: [Vec<f64>; 3] = std::array::from_fn(|c| sd.grad[c].iter().map(|v| v * tfac).collect());
    let cr = cross_phys(
        [&gpsi[0], &gpsi[1], &gpsi[2]],
        [&adv[0], &adv[1], &adv[2]],
    );
    let cr_spec = fwd_scaled(ws, &vec![1.0; n], [&cr[0], &cr[1], &cr[2]]);
    let mut k2_spec = curl_spec(ws, &cr_spec);
    neg_invlap_spec(ws, &mut k2_spec);
    let k2 = inv3(ws, k2_spec);

    // k1 = -(1/Lap) curl(curl((Lap psi) u) - grad(Lap psi) x u)
    //      + 2 (1/Lap) curl(sum_i d_i(curl((d_i psi) u) - grad(d_i psi) x u)).
    let curl_minus_cross = |scalar: &[f64], gvec: &[Vec<f64>; 3]| -> Spec3 {
        let su = fwd_scaled(ws, scalar, u);
        let mut spec = curl_spec(ws, &su);
        let gv: [Vec<f64>; 3] = std::array::from_fn(|c| gvec[c].iter().map(|v| v * tfac).collect());
        let cx = cross_phys([&gv[0], &gv[1], &gv[2]], u);
        let cx_spec = fwd_scaled(ws, &vec![1.0; n], [&cx[0], &cx[1], &cx[2]]);
        for c in 0..3 {
            for (s, x) in spec[c].iter_mut().zip(&cx_spec[c]) {
                *s -= x;
            }
        }
        spec
    };
    let lap_psi: Vec<f64> = sd.lap.iter().map(|v| v * tfac).collect();
    let term_a = curl_minus_cross(&lap_psi, &sd.grad_lap);
    let mut term_b: Spec3 = std::array::from_fn(|_| vec![C64::default(); ws.spec_len()]);
    for i in 0..3 {
        let dpsi_i: Vec<f64> = sd.grad[i].iter().map(|v| v * tfac).collect();
        let ti = curl_minus_cross(&dpsi_i, &sd.hess[i]);
        ws.for_each_mode(|m, kx, ky, kz, _| {
            let ki = [kx, ky, kz][i];
            for c in 0..3 {
                term_b[c][m] += C64::new(0.0, ki) * ti[c][m];
            }
        });
    }
    // -(1/Lap) Y has spectral form Y_hat / |k|^2; +(1/Lap) Y flips the sign.
    let mut k1_spec = curl_spec(ws, &term_a);
    let tb = curl_spec(ws, &term_b);
    for c in 0..3 {
        for (a, b) in k1_spec[c].iter_mut().zip(&tb[c]) {
            *a -= 2.0 * b;
        }
    }
    neg_invlap_spec(ws, &mut k1_spec);
    let k1 = inv3(ws, k1_spec);

    SliceForces {
        q1,
        q2,
        k0,
        k1,
        k2,
        k3,
    }
}

/// The full companion system on the grid.
pub struct CompanionSystem {
    pub v: FieldSnapshot,
    pub h: FieldSnapshot,
    pub beta: FieldSnapshot,
    pub gamma: FieldSnapshot,
    pub q: FieldSnapshot,
    pub r: FieldSnapshot,
    pub k: FieldSnapshot,
    pub l: FieldSnapshot,
    pub k0: FieldSnapshot,
    pub l0: FieldSnapshot,
    /// (q1, q2) and (r1, r2) when part retention is requested.
    pub q_parts: Option<(FieldSnapshot, FieldSnapshot)>,
    pub r_parts: Option<(FieldSnapshot, FieldSnapshot)>,
    /// (k1, k2, k3) and (l1, l2, l3) when part retention is requested.
    pub k_parts: Option<[FieldSnapshot; 3]>,
    pub l_parts: Option<[FieldSnapshot; 3]>,
}

/// Build the complete companion system. `keep_parts` retains the individual
/// pressure/force parts (memory-heavy at high resolution).
pub fn build_companion(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    f: &FieldSnapshot,
    g: &FieldSnapshot,
    ladder: &CutoffLadder,
    keep_parts: bool,
) -> Result<CompanionSystem> {
    for (x, name) in [(b, "b"), (f, "f"), (g, "g")] {
        u.check_same_grid(x, name)?;
    }
    u.check_same_grid(&ladder.psi, "psi")?;
    let grid = u.grid;
    let sd = space_derivs(ws, &ladder.psi_space);

    struct SlabOut {
        v: Vec<f64>,
        h: Vec<f64>,
        q: Vec<f64>,
        r: Vec<f64>,
        k: Vec<f64>,
        l: Vec<f64>,
        k0: Vec<f64>,
        l0: Vec<f64>,
        parts: Option<Box<SlabParts>>,
    }
    struct SlabParts {
        q1: Vec<f64>,
        q2: Vec<f64>,
        r1: Vec<f64>,
        r2: Vec<f64>,
        k1: Vec<f64>,
        k2: Vec<f64>,
        k3: Vec<f64>,
        l1: Vec<f64>,
        l2: Vec<f64>,
        l3: Vec<f64>,
    }

    let slabs: Vec<SlabOut> = par_map(grid.nt, |it| {
        let tfac = ladder.psi_tfac[it];
        let psi = ladder.psi.slice(it, 0);
        let us = [u.slice(it, 0), u.slice(it, 1), u.slice(it, 2)];
        let bs = [b.slice(it, 0), b.slice(it, 1), b.slice(it, 2)];
        let fs = [f.slice(it, 0), f.slice(it, 1), f.slice(it, 2)];
        let gs = [g.slice(it, 0), g.slice(it, 1), g.slice(it, 2)];

        let v = harmonic_slice(ws, us, psi);
        let h = harmonic_slice(ws, bs, psi);
        let beta: [Vec<f64>; 3] =
            std::array::from_fn(|c| us[c].iter().zip(&v[c]).map(|(a, x)| a - x).collect());
        let gamma: [Vec<f64>; 3] =
            std::array::from_fn(|c| bs[c].iter().zip(&h[c]).map(|(a, x)| a - x).collect());

        let adv_bu = advect_slice(ws, bs, us);
        let adv_ub = advect_slice(ws, us, bs);
        // A (v-equation) and its u <-> b mirror.
        let mut a_u = advect_slice(ws, r3(&h), r3(&beta));
        add3(&mut a_u, &advect_slice(ws, r3(&gamma), r3(&v)));
        add3(&mut a_u, &advect_slice(ws, r3(&gamma), r3(&beta)));
        let mut a_b = advect_slice(ws, r3(&v), r3(&gamma));
        add3(&mut a_b, &advect_slice(ws, r3(&beta), r3(&h)));
        add3(&mut a_b, &advect_slice(ws, r3(&beta), r3(&gamma)));

        let fu = slice_forces(ws, us, fs, &adv_bu, &a_u, psi, &sd, tfac);
        let fb = slice_forces(ws, bs, gs, &adv_ub, &a_b, psi, &sd, tfac);

        let sum3 = |parts: [&[Vec<f64>; 3]; 4]| -> Vec<f64> {
            let mut out: [Vec<f64>; 3] = std::array::from_fn(|c| parts[0][c].clone());
            for p in &parts[1..] {
                add3(&mut out, p);
            }
            out.concat()
        };
        let sum1 = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };

        SlabOut {
            q: sum1(&fu.q1, &fu.q2),
            r: sum1(&fb.q1, &fb.q2),
            k: sum3([&fu.k0, &fu.k1, &fu.k2, &fu.k3]),
            l: sum3([&fb.k0, &fb.k1, &fb.k2, &fb.k3]),
            k0: fu.k0.concat(),
            l0: fb.k0.concat(),
            parts: keep_parts.then(|| {
                Box::new(SlabParts {
                    q1: fu.q1,
                    q2: fu.q2,
                    r1: fb.q1,
                    r2: fb.q2,
                    k1: fu.k1.concat(),
                    k2: fu.k2.concat(),
                    k3: fu.k3.concat(),
                    l1: fb.k1.concat(),
                    l2: fb.k2.concat(),
                    l3: fb.k3.concat(),
                })
            }),
            v: v.concat(),
            h: h.concat(),
        }
    });

    let gather3 = |get: &dyn Fn(&SlabOut) -> &[f64]| FieldSnapshot {
        grid,
        components: 3,
        data: slabs.iter().flat_map(|s| get(s).iter().copied()).collect(),
    };
    let gather1 = |get: &dyn Fn(&SlabOut) -> &[f64]| FieldSnapshot {
        grid,
        components: 1,
        data: slabs.iter().flat_map(|s| get(s).iter().copied()).collect(),
    };
    let v = gather3(&|s| &s.v);
    let h = gather3(&|s| &s.h);
    let (beta, gamma) = correctors(u, b, &v, &h)?;
    let parts_field = |get: &dyn Fn(&SlabParts) -> &[f64], comps: usize| FieldSnapshot {
        grid,
        components: comps,
        data: slabs
            .iter()
            .flat_map(|s| get(s.parts.as_ref().unwrap()).iter().copied())
            .collect(),
    };
    let (q_parts, r_parts, k_parts, l_parts) = if keep_parts {
        (
            Some((parts_field(&|p| &p.q1, 1), parts_field(&|p| &p.q2, 1))),
            Some((parts_field(&|p| &p.r1, 1), parts_field(&|p| &p.r2, 1))),
            Some([
                parts_field(&|p| &p.k1, 3),
                parts_field(&|p| &p.k2, 3),
                parts_field(&|p| &p.k3, 3),
            ]),
            Some([
                parts_field(&|p| &p.l1, 3),
                parts_field(&|p| &p.l2, 3),
                parts_field(&|p| &p.l3, 3),
            ]),
        )
    } else {
        (None, None, None, None)
    };
    Ok(CompanionSystem {
        q: gather1(&|s| &s.q),
        r: gather1(&|s| &s.r),
        k: gather3(&|s| &s.k),
        l: gather3(&|s| &s.l),
        k0: gather3(&|s| &s.k0),
        l0: gather3(&|s| &s.l0),
        v,
        h,
        beta,
        gamma,
        q_parts,
        r_parts,
        k_parts,
        l_parts,
    })
}

/// Companion pressures alone (with parts), per the q1/q2 formulas.
#[allow(clippy::too_many_arguments)]
pub fn companion_pressures(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    v: &FieldSnapshot,
    h: &FieldSnapshot,
    beta: &FieldSnapshot,
    gamma: &FieldSnapshot,
    psi: &FieldSnapshot,
) -> Result<(FieldSnapshot, FieldSnapshot, FieldSnapshot, FieldSnapshot)> {
    for (x, name) in [(b, "b"), (v, "v"), (h, "h"), (beta, "beta"), (gamma, "gamma")] {
        u.check_same_grid(x, name)?;
    }
    let grid = u.grid;
    let slabs: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = par_map(grid.nt, |it| {
        let psi_s = psi.slice(it, 0);
        let pick = |x: &FieldSnapshot| -> [Vec<f64>; 3] {
            std::array::from_fn(|c| x.slice(it, c).to_vec())
        };
        let (us, bs) = (pick(u), pick(b));
        let (vs, hs) = (pick(v), pick(h));
        let (be, ga) = (pick(beta), pick(gamma));
        let q1 = {
            let adv = advect_slice(ws, r3(&bs), r3(&us));
            let spec = fwd_scaled(ws, psi_s, r3(&adv));
            let mut s = invlap_div_spec(ws, &spec);
            s.iter_mut().for_each(|x| *x = -*x);
            ws.inverse_slice(s)
        };
        let r1 = {
            let adv = advect_slice(ws, r3(&us), r3(&bs));
            let spec = fwd_scaled(ws, psi_s, r3(&adv));
            let mut s = invlap_div_spec(ws, &spec);
            s.iter_mut().for_each(|x| *x = -*x);
            ws.inverse_slice(s)
        };
        let q2 = {
            let mut a = advect_slice(ws, r3(&hs), r3(&be));
            add3(&mut a, &advect_slice(ws, r3(&ga), r3(&vs)));
            add3(&mut a, &advect_slice(ws, r3(&ga), r3(&be)));
            let spec = fwd_scaled(ws, psi_s, r3(&a));
            ws.inverse_slice(invlap_div_spec(ws, &spec))
        };
        let r2 = {
            let mut a = advect_slice(ws, r3(&vs), r3(&ga));
            add3(&mut a, &advect_slice(ws, r3(&be), r3(&hs)));
            add3(&mut a, &advect_slice(ws, r3(&be), r3(&ga)));
            let spec = fwd_scaled(ws, psi_s, r3(&a));
            ws.inverse_slice(invlap_div_spec(ws, &spec))
        };
        (q1, q2, r1, r2)
    });
    let gather = |get: &dyn Fn(&(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)) -> &[f64]| FieldSnapshot {
        grid,
        components: 1,
        data: slabs.iter().flat_map(|s| get(s).iter().copied()).collect(),
    };
    Ok((
        gather(&|s| &s.0),
        gather(&|s| &s.1),
        gather(&|s| &s.2),
        gather(&|s| &s.3),
    ))
}

/// Residual fields of both companion equations using 2nd-order central time
/// differences; the first and last slices are zero.
pub fn companion_residual(
    ws: &SpectralWorkspace,
    cs: &CompanionSystem,
) -> Result<(FieldSnapshot, FieldSnapshot)> {
    let grid = cs.v.grid;
    let mut out = Vec::new();
    for (w, other, press, force) in [
        (&cs.v, &cs.h, &cs.q, &cs.k),
        (&cs.h, &cs.v, &cs.r, &cs.l),
    ] {
        let lap = crate::spectral::laplacian(ws, w)?;
        let adv = crate::sim::advect(ws, other, w)?;
        let gq = crate::spectral::gradient(ws, press)?;
        let mut res = FieldSnapshot::zeros(grid, 3);
        for it in 1..grid.nt - 1 {
            for c in 0..3 {
                let prev = w.slice(it - 1, c);
                let next = w.slice(it + 1, c);
                let (l, a, gp, f) = (
                    lap.slice(it, c),
                    adv.slice(it, c),
                    gq.slice(it, c),
                    force.slice(it, c),
                );
                let dst = res.slice_mut(it, c);
                for p in 0..grid.n3() {
                    let ddt = (next[p] - prev[p]) / (2.0 * grid.dt);
                    dst[p] = ddt - l[p] + a[p] + gp[p] - f[p];
                }
            }
        }
        out.push(res);
    }
    let h_res = out.pop().unwrap();
    let v_res = out.pop().unwrap();
    Ok((v_res, h_res))
}

/// Numerical verification report for the companion construction.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LocalizationReport {
    /// ||v||_{L-inf L2 (Q_rho0)} / ||u||_{L-inf L2}.
    pub c_psi_v: f64,
    pub c_psi_h: f64,
    /// sup over Q_rho0 of the corrector gradient magnitudes.
    pub lip_beta: f64,
    pub lip_gamma: f64,
    /// L^{3/2} norms of the companion pressures over Q_rho0.
    pub q_l32: f64,
    pub r_l32: f64,
    /// L^2 norms of k - k0, l - l0 over Q_rho0.
    pub k_minus_k0_l2: f64,
    pub l_minus_l0_l2: f64,
    /// Max companion residuals over Q_rho0 (central time differences).
    pub residual_v: f64,
    pub residual_h: f64,
    /// Max |div| over k, l, v, h.
    pub max_div_k: f64,
    pub max_div_l: f64,
    pub max_div_v: f64,
    pub max_div_h: f64,
    /// Max |Lap v - Lap u| and |Lap h - Lap b| over Q_rho0.
    pub harmonic_identity_v: f64,
    pub harmonic_identity_h: f64,
}

fn linf_l2_cells(x: &FieldSnapshot, cells: &CylinderCells, hvol: f64) -> f64 {
    let mut worst = 0.0f64;
    for &it in &cells.times {
        let mut sum = 0.0;
        for c in 0..x.components {
            let s = x.slice(it, c);
            for &p in &cells.ball {
                sum += s[p] * s[p];
            }
        }
        worst = worst.max((sum * hvol).sqrt());
    }
    worst
}

fn linf_l2_global(x: &FieldSnapshot, hvol: f64) -> f64 {
    let mut worst = 0.0f64;
    for it in 0..x.grid.nt {
        let mut sum = 0.0;
        for c in 0..x.components {
            sum += x.slice(it, c).iter().map(|v| v * v).sum::<f64>();
        }
        worst = worst.max((sum * hvol).sqrt());
    }
    worst
}

/// Sup of the gradient magnitude (Frobenius over components) on the cells.
pub fn sup_gradient(
    ws: &SpectralWorkspace,
    x: &FieldSnapshot,
    cells: &CylinderCells,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &it in &cells.times {
        for c in 0..x.components {
            let spec = ws.forward_slice(x.slice(it, c));
            let g = inv3(ws, grad_spec(ws, &spec));
            for &p in &cells.ball {
                let m2 = g[0][p] * g[0][p] + g[1][p] * g[1][p] + g[2][p] * g[2][p];
                worst = worst.max(m2);
            }
        }
    }
    Ok(worst.sqrt())
}

/// Run the full verification suite on a companion system.
pub fn verify_companion(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    cs: &CompanionSystem,
    ladder: &CutoffLadder,
) -> Result<LocalizationReport> {
    let grid = u.grid;
    let cells = restrict_cylinder(&grid, &ladder.inner())?;
    let hvol = grid.cell_volume();

    let (rv, rh) = companion_residual(ws, cs)?;
    let lap_diff = |a: &FieldSnapshot, x: &FieldSnapshot| -> Result<f64> {
        let d = crate::spectral::laplacian(ws, a)?
            .axpy(-1.0, &crate::spectral::laplacian(ws, x)?)?;
        Ok(sup_norm(&d, &cells))
    };

    Ok(LocalizationReport {
        c_psi_v: linf_l2_cells(&cs.v, &cells, hvol) / linf_l2_global(u, hvol).max(1e-300),
        c_psi_h: linf_l2_cells(&cs.h, &cells, hvol) / linf_l2_global(b, hvol).max(1e-300),
        lip_beta: sup_gradient(ws, &cs.beta, &cells)?,
        lip_gamma: sup_gradient(ws, &cs.gamma, &cells)?,
        q_l32: lp_norm(&cs.q, &cells, 1.5),
        r_l32: lp_norm(&cs.r, &cells, 1.5),
        k_minus_k0_l2: lp_norm(&cs.k.axpy(-1.0, &cs.k0)?, &cells, 2.0),
        l_minus_l0_l2: lp_norm(&cs.l.axpy(-1.0, &cs.l0)?, &cells, 2.0),
        residual_v: sup_norm(&rv, &cells),
        residual_h: sup_norm(&rh, &cells),
        max_div_k: max_divergence(ws, &cs.k)?,
        max_div_l: max_divergence(ws, &cs.l)?,
        max_div_v: max_divergence(ws, &cs.v)?,
        max_div_h: max_divergence(ws, &cs.h)?,
        harmonic_identity_v: lap_diff(&cs.v, u)?,
        harmonic_identity_h: lap_diff(&cs.h, b)?,
    })
}
