//! Conversions between physical variables (U, B, F, G) and the symmetrized
//! cross-advection variables (u, b, f, g), plus the spectral pressure solve.
//!
//! u = U + B, b = U - B, f = F + G, g = F - G. The pressure satisfies
//! Delta P = -sum_ij d_i d_j (u_i b_j) and is normalized to zero spatial
//! mean on every time slice.

use crate::error::{Error, Result};
use crate::grid::FieldSnapshot;
use crate::par::par_map;
use crate::spectral::{max_divergence, SpectralWorkspace};

/// Divergence-free pair with pressure and forces in symmetrized variables.
pub struct ElsasserState {
    pub u: FieldSnapshot,
    pub b: FieldSnapshot,
    pub p: FieldSnapshot,
    pub f: FieldSnapshot,
    pub g: FieldSnapshot,
}

impl ElsasserState {
    /// Validates divergence-free u, b (<= 1e-8) and per-slice zero-mean P.
    pub fn new(
        ws: &SpectralWorkspace,
        u: FieldSnapshot,
        b: FieldSnapshot,
        p: FieldSnapshot,
        f: FieldSnapshot,
        g: FieldSnapshot,
    ) -> Result<Self> {
        for (x, name) in [(&b, "b"), (&p, "P"), (&f, "f"), (&g, "g")] {
            u.check_same_grid(x, name)?;
        }
        for (x, name) in [(&u, "u"), (&b, "b")] {
            let d = max_divergence(ws, x)?;
            if d > 1e-8 {
                return Err(Error::Contract(format!(
                    "divergence of {name} is {d:.3e}, exceeds 1e-8"
                )));
            }
        }
        let n3 = p.grid.n3() as f64;
        for it in 0..p.grid.nt {
            let mean: f64 = p.slice(it, 0).iter().sum::<f64>() / n3;
            if mean.abs() > 1e-10 {
                return Err(Error::Contract(format!(
                    "pressure mean {mean:.3e} at slice {it} is not zero"
                )));
            }
        }
        Ok(ElsasserState { u, b, p, f, g })
    }
}

fn pair_check(a: &FieldSnapshot, b: &FieldSnapshot, what: &str) -> Result<()> {
    a.check_same_grid(b, what)?;
    if a.components != b.components {
        return Err(Error::Contract(format!("{what}: component mismatch")));
    }
    Ok(())
}

/// (U, B, F, G) -> (u, b, f, g) = (U+B, U-B, F+G, F-G).
pub fn to_elsasser(
    cap_u: &FieldSnapshot,
    cap_b: &FieldSnapshot,
    cap_f: &FieldSnapshot,
    cap_g: &FieldSnapshot,
) -> Result<(FieldSnapshot, FieldSnapshot, FieldSnapshot, FieldSnapshot)> {
    pair_check(cap_u, cap_b, "to_elsasser U/B")?;
    pair_check(cap_f, cap_g, "to_elsasser F/G")?;
    cap_u.check_same_grid(cap_f, "to_elsasser U/F")?;
    Ok((
        cap_u.axpy(1.0, cap_b)?,
        cap_u.axpy(-1.0, cap_b)?,
        cap_f.axpy(1.0, cap_g)?,
        cap_f.axpy(-1.0, cap_g)?,
    ))
}

/// (u, b, f, g) -> (U, B, F, G) = ((u+b)/2, (u-b)/2, (f+g)/2, (f-g)/2).
pub fn from_elsasser(
    u: &FieldSnapshot,
    b: &FieldSnapshot,
    f: &FieldSnapshot,
    g: &FieldSnapshot,
) -> Result<(FieldSnapshot, FieldSnapshot, FieldSnapshot, FieldSnapshot)> {
    pair_check(u, b, "from_elsasser u/b")?;
    pair_check(f, g, "from_elsasser f/g")?;
    u.check_same_grid(f, "from_elsasser u/f")?;
    Ok((
        u.axpy(1.0, b)?.scale(0.5),
        u.axpy(-1.0, b)?.scale(0.5),
        f.axpy(1.0, g)?.scale(0.5),
        f.axpy(-1.0, g)?.scale(0.5),
    ))
}

/// Spectral solve of Delta P = -sum_ij d_i d_j (u_i b_j) with 2/3-dealiased
/// products and zero-mean normalization per slice.
pub fn solve_pressure(
    ws: &SpectralWorkspace,
    u: &FieldSnapshot,
    b: &FieldSnapshot,
) -> Result<FieldSnapshot> {
    pair_check(u, b, "solve_pressure")?;
    if u.components != 3 {
        return Err(Error::Contract("solve_pressure: need 3-component fields".into()));
    }
    for (x, name) in [(u, "u"), (b, "b")] {
        let d = max_divergence(ws, x)?;
        if d > 1e-6 {
            return Err(Error::Contract(format!(
                "solve_pressure: divergence of {name} is {d:.3e}, exceeds 1e-6"
            )));
        }
    }
    let grid = u.grid;
    let slabs = par_map(grid.nt, |it| {
        pressure_slice(ws, [u.slice(it, 0), u.slice(it, 1), u.slice(it, 2)], [
            b.slice(it, 0),
            b.slice(it, 1),
            b.slice(it, 2),
        ])
    });
    Ok(FieldSnapshot {
        grid,
        components: 1,
        data: slabs.concat(),
    })
}

/// One spatial slice of the pressure solve; shared with the time stepper.
pub fn pressure_slice(ws: &SpectralWorkspace, u: [&[f64]; 3], b: [&[f64]; 3]) -> Vec<f64> {
    let mut acc = vec![rustfft::num_complex::Complex::<f64>::default(); ws.spec_len()];
    let n = u[0].len();
    let mut prod = vec![0.0f64; n];
    for i in 0..3 {
        for j in 0..3 {
            for p in 0..n {
                prod[p] = u[i][p] * b[j][p];
            }
            let spec = ws.forward_slice(&prod);
            ws.for_each_mode(|m, kx, ky, kz, k2| {
                if k2 > 0.0 {
                    let k = [kx, ky, kz];
                    // P_hat = -k_i k_j (u_i b_j)_hat / |k|^2
                    acc[m] -= spec[m] * (k[i] * k[j] / k2);
                }
            });
        }
    }
    ws.dealias_spec(&mut acc);
    ws.inverse_slice(acc)
}
