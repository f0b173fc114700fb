//! Pseudo-spectral operators on the periodic box.
//!
//! All differential and nonlocal operators (gradient, curl, divergence,
//! Laplacian, inverse Laplacian, Leray projection) act per time slice through
//! a real-to-complex 3D FFT. Conventions:
//!
//! - wavenumbers k_j = 2*pi*m_j / L_j with integer mode numbers m_j;
//! - the x axis is stored half-spectrum (m_x = 0..nx/2), y and z full;
//! - odd-order derivative symbols use Nyquist-zeroed wavenumbers so the
//!   result of differentiating a real field stays exactly real;
//! - the inverse Laplacian maps the k = 0 mode to zero (zero-mean convention);
//! - dealiasing follows the 2/3 rule: modes with |m_j| > n_j/3 are removed.

use crate::error::{Error, Result};
use crate::grid::{FieldSnapshot, Grid};
use crate::par::par_map;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

type C64 = Complex<f64>;

pub struct SpectralWorkspace {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Stored x-modes: nx/2 + 1.
    pub nxc: usize,
    pub box_length: [f64; 3],
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
    fft_z: Arc<dyn Fft<f64>>,
    ifft_z: Arc<dyn Fft<f64>>,
    /// Derivative wavenumbers (Nyquist zeroed), x half-spectrum.
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    pub kz: Vec<f64>,
    /// Magnitude wavenumbers (Nyquist kept) for even symbols.
    kx_m: Vec<f64>,
    ky_m: Vec<f64>,
    kz_m: Vec<f64>,
    /// 2/3-rule keep masks per axis.
    keep_x: Vec<bool>,
    keep_y: Vec<bool>,
    keep_z: Vec<bool>,
}

impl SpectralWorkspace {
    pub fn new(grid: &Grid) -> Self {
        let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
        let nxc = nx / 2 + 1;
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        let tau = std::f64::consts::TAU;
        let [lx, ly, lz] = grid.box_length;

        let signed = |i: usize, n: usize| -> i64 {
            if i <= n / 2 {
                i as i64
            } else {
                i as i64 - n as i64
            }
        };

        let kx_m: Vec<f64> = (0..nxc).map(|i| tau * i as f64 / lx).collect();
        let ky_m: Vec<f64> = (0..ny).map(|j| tau * signed(j, ny) as f64 / ly).collect();
        let kz_m: Vec<f64> = (0..nz).map(|k| tau * signed(k, nz) as f64 / lz).collect();
        let mut kx = kx_m.clone();
        kx[nxc - 1] = 0.0;
        let mut ky = ky_m.clone();
        ky[ny / 2] = 0.0;
        let mut kz = kz_m.clone();
        kz[nz / 2] = 0.0;

        let keep = |m: i64, n: usize| 3 * m.unsigned_abs() as usize <= n;
        let keep_x: Vec<bool> = (0..nxc).map(|i| keep(i as i64, nx)).collect();
        let keep_y: Vec<bool> = (0..ny).map(|j| keep(signed(j, ny), ny)).collect();
        let keep_z: Vec<bool> = (0..nz).map(|k| keep(signed(k, nz), nz)).collect();

        SpectralWorkspace {
            nx,
            ny,
            nz,
            nxc,
            box_length: grid.box_length,
            r2c: rp.plan_fft_forward(nx),
            c2r: rp.plan_fft_inverse(nx),
            fft_y: cp.plan_fft_forward(ny),
            ifft_y: cp.plan_fft_inverse(ny),
            fft_z: cp.plan_fft_forward(nz),
            ifft_z: cp.plan_fft_inverse(nz),
            kx,
            ky,
            kz,
            kx_m,
            ky_m,
            kz_m,
            keep_x,
            keep_y,
            keep_z,
        }
    }

    /// Spectral slice length nz*ny*nxc.
    pub fn spec_len(&self) -> usize {
        self.nz * self.ny * self.nxc
    }

    #[inline]
    pub fn spec_idx(&self, kz: usize, ky: usize, kx: usize) -> usize {
        (kz * self.ny + ky) * self.nxc + kx
    }

    /// Forward transform of one real spatial slice (unnormalized).
    pub fn forward_slice(&self, real: &[f64]) -> Vec<C64> {
        let (nx, ny, nz, nxc) = (self.nx, self.ny, self.nz, self.nxc);
        assert_eq!(real.len(), nx * ny * nz);
        let mut spec = vec![C64::default(); self.spec_len()];
        let mut row_in = vec![0.0f64; nx];
        let mut row_out = vec![C64::default(); nxc];
        let mut scr = vec![C64::default(); self.r2c.get_scratch_len()];
        for zy in 0..nz * ny {
            row_in.copy_from_slice(&real[zy * nx..(zy + 1) * nx]);
            self.r2c
                .process_with_scratch(&mut row_in, &mut row_out, &mut scr)
                .expect("r2c");
            spec[zy * nxc..(zy + 1) * nxc].copy_from_slice(&row_out);
        }
        self.transform_yz(&mut spec, true);
        spec
    }

    /// Inverse transform into a real slice; normalizes by 1/(nx*ny*nz).
    /// Consumes the spectral buffer (it is used as scratch).
    pub fn inverse_slice(&self, mut spec: Vec<C64>) -> Vec<f64> {
        let (nx, ny, nz, nxc) = (self.nx, self.ny, self.nz, self.nxc);
        assert_eq!(spec.len(), self.spec_len());
        self.transform_yz(&mut spec, false);
        let mut real = vec![0.0f64; nx * ny * nz];
        let mut row_in = vec![C64::default(); nxc];
        let mut row_out = vec![0.0f64; nx];
        let mut scr = vec![C64::default(); self.c2r.get_scratch_len()];
        let norm = 1.0 / (nx * ny * nz) as f64;
        for zy in 0..nz * ny {
            row_in.copy_from_slice(&spec[zy * nxc..(zy + 1) * nxc]);
            // After the y,z inverse passes each x-row is the spectrum of a
            // real 1D signal; roundoff can leave stray imaginary parts on the
            // DC/Nyquist entries which c2r rejects, so clear them.
            row_in[0].im = 0.0;
            row_in[nxc - 1].im = 0.0;
            self.c2r
                .process_with_scratch(&mut row_in, &mut row_out, &mut scr)
                .expect("c2r");
            for (dst, src) in real[zy * nx..(zy + 1) * nx].iter_mut().zip(&row_out) {
                *dst = src * norm;
            }
        }
        real
    }

    fn transform_yz(&self, spec: &mut [C64], forward: bool) {
        let (ny, nz, nxc) = (self.ny, self.nz, self.nxc);
        let (py, pz) = if forward {
            (&self.fft_y, &self.fft_z)
        } else {
            (&self.ifft_y, &self.ifft_z)
        };
        let mut col = vec![C64::default(); ny.max(nz)];
        let mut scr = vec![
            C64::default();
            py.get_inplace_scratch_len().max(pz.get_inplace_scratch_len())
        ];
        for z in 0..nz {
            for x in 0..nxc {
                let base = z * ny * nxc + x;
                for y in 0..ny {
                    col[y] = spec[base + y * nxc];
                }
                py.process_with_scratch(&mut col[..ny], &mut scr);
                for y in 0..ny {
                    spec[base + y * nxc] = col[y];
                }
            }
        }
        for y in 0..ny {
            for x in 0..nxc {
                let base = y * nxc + x;
                for z in 0..nz {
                    col[z] = spec[base + z * ny * nxc];
                }
                pz.process_with_scratch(&mut col[..nz], &mut scr);
                for z in 0..nz {
                    spec[base + z * ny * nxc] = col[z];
                }
            }
        }
    }

    /// Apply the 2/3-rule mask in place.
    pub fn dealias_spec(&self, spec: &mut [C64]) {
        for z in 0..self.nz {
            let kz_ok = self.keep_z[z];
            for y in 0..self.ny {
                let zy_ok = kz_ok && self.keep_y[y];
                let base = (z * self.ny + y) * self.nxc;
                for x in 0..self.nxc {
                    if !(zy_ok && self.keep_x[x]) {
                        spec[base + x] = C64::default();
                    }
                }
            }
        }
    }

    /// Visit every mode with signed integer mode numbers: f(index, mx, my, mz).
    /// mx runs over the stored half-spectrum 0..=nx/2; my, mz are signed.
    pub fn for_each_mode_numbers<F: FnMut(usize, i64, i64, i64)>(&self, mut f: F) {
        let signed = |i: usize, n: usize| -> i64 {
            if i <= n / 2 {
                i as i64
            } else {
                i as i64 - n as i64
            }
        };
        for z in 0..self.nz {
            let mz = signed(z, self.nz);
            for y in 0..self.ny {
                let my = signed(y, self.ny);
                let base = (z * self.ny + y) * self.nxc;
                for x in 0..self.nxc {
                    f(base + x, x as i64, my, mz);
                }
            }
        }
    }

    /// Visit every mode: f(index, kx_deriv, ky_deriv, kz_deriv, |k|^2).
    #[inline]
    pub fn for_each_mode<F: FnMut(usize, f64, f64, f64, f64)>(&self, mut f: F) {
        for z in 0..self.nz {
            let (kz, kzm) = (self.kz[z], self.kz_m[z]);
            for y in 0..self.ny {
                let (ky, kym) = (self.ky[y], self.ky_m[y]);
                let base = (z * self.ny + y) * self.nxc;
                let zy2 = kym * kym + kzm * kzm;
                for x in 0..self.nxc {
                    let kxm = self.kx_m[x];
                    f(base + x, self.kx[x], ky, kz, kxm * kxm + zy2);
                }
            }
        }
    }
}

/// Apply `op` to every (time, component) spectral slice of `x`.
/// `op` receives the workspace and the mutable spectral buffer.
pub fn map_spectral<F>(ws: &SpectralWorkspace, x: &FieldSnapshot, op: F) -> FieldSnapshot
where
    F: Fn(&SpectralWorkspace, &mut [C64]) + Sync,
{
    let nt = x.grid.nt;
    let nc = x.components;
    let slabs = par_map(nt * nc, |tc| {
        let mut spec = ws.forward_slice(x.slice(tc / nc, tc % nc));
        op(ws, &mut spec);
        ws.inverse_slice(spec)
    });
    FieldSnapshot {
        grid: x.grid,
        components: x.components,
        data: slabs.concat(),
    }
}

fn expect_scalar(x: &FieldSnapshot, what: &str) -> Result<()> {
    if !x.is_scalar() {
        return Err(Error::Contract(format!("{what}: expected a scalar field")));
    }
    Ok(())
}

fn expect_vector(x: &FieldSnapshot, what: &str) -> Result<()> {
    if x.components != 3 {
        return Err(Error::Contract(format!(
            "{what}: expected a 3-component field"
        )));
    }
    Ok(())
}

/// Spectral gradient of a scalar field.
pub fn gradient(ws: &SpectralWorkspace, f: &FieldSnapshot) -> Result<FieldSnapshot> {
    expect_scalar(f, "gradient")?;
    let nt = f.grid.nt;
    let slabs = par_map(nt * 3, |tc| {
        let (it, c) = (tc / 3, tc % 3);
        let mut spec = ws.forward_slice(f.slice(it, 0));
        ws.for_each_mode(|i, kx, ky, kz, _| {
            let k = [kx, ky, kz][c];
            spec[i] *= C64::new(0.0, k);
        });
        ws.inverse_slice(spec)
    });
    Ok(FieldSnapshot {
        grid: f.grid,
        components: 3,
        data: slabs.concat(),
    })
}

/// Spectral divergence of a vector field.
pub fn divergence(ws: &SpectralWorkspace, x: &FieldSnapshot) -> Result<FieldSnapshot> {
    expect_vector(x, "divergence")?;
    let nt = x.grid.nt;
    let slabs = par_map(nt, |it| {
        let mut acc = vec![C64::default(); ws.spec_len()];
        for c in 0..3 {
            let spec = ws.forward_slice(x.slice(it, c));
            ws.for_each_mode(|i, kx, ky, kz, _| {
                let k = [kx, ky, kz][c];
                acc[i] += C64::new(0.0, k) * spec[i];
            });
        }
        ws.inverse_slice(acc)
    });
    Ok(FieldSnapshot {
        grid: x.grid,
        components: 1,
        data: slabs.concat(),
    })
}

/// Spectral curl of a vector field.
pub fn curl(ws: &SpectralWorkspace, x: &FieldSnapshot) -> Result<FieldSnapshot> {
    expect_vector(x, "curl")?;
    let nt = x.grid.nt;
    let slabs = par_map(nt, |it| {
        let sx = ws.forward_slice(x.slice(it, 0));
        let sy = ws.forward_slice(x.slice(it, 1));
        let sz = ws.forward_slice(x.slice(it, 2));
        let mut out = Vec::with_capacity(3);
        for c in 0..3 {
            let mut spec = vec![C64::default(); ws.spec_len()];
            ws.for_each_mode(|i, kx, ky, kz, _| {
                let v = match c {
                    0 => C64::new(0.0, ky) * sz[i] - C64::new(0.0, kz) * sy[i],
                    1 => C64::new(0.0, kz) * sx[i] - C64::new(0.0, kx) * sz[i],
                    _ => C64::new(0.0, kx) * sy[i] - C64::new(0.0, ky) * sx[i],
                };
                spec[i] = v;
            });
            out.push(ws.inverse_slice(spec));
        }
        out.concat()
    });
    Ok(FieldSnapshot {
        grid: x.grid,
        components: 3,
        data: slabs.concat(),
    })
}

/// Spectral Laplacian (any component count).
pub fn laplacian(ws: &SpectralWorkspace, x: &FieldSnapshot) -> Result<FieldSnapshot> {
    Ok(map_spectral(ws, x, |ws, spec| {
        ws.for_each_mode(|i, _, _, _, k2| spec[i] *= -k2);
    }))
}

/// Spectral inverse Laplacian; the k = 0 mode maps to zero.
pub fn inverse_laplacian(ws: &SpectralWorkspace, x: &FieldSnapshot) -> Result<FieldSnapshot> {
    Ok(map_spectral(ws, x, |ws, spec| {
        ws.for_each_mode(|i, _, _, _, k2| {
            spec[i] = if k2 > 0.0 {
                spec[i] / -k2
            } else {
                C64::default()
            };
        });
    }))
}

/// Leray projection onto divergence-free fields: X - k (k.X)/|k|^2.
pub fn leray_project(ws: &SpectralWorkspace, x: &FieldSnapshot) -> Result<FieldSnapshot> {
    expect_vector(x, "leray_project")?;
    let nt = x.grid.nt;
    let slabs = par_map(nt, |it| {
        let mut s = [
            ws.forward_slice(x.slice(it, 0)),
            ws.forward_slice(x.slice(it, 1)),
            ws.forward_slice(x.slice(it, 2)),
        ];
        ws.for_each_mode(|i, kx, ky, kz, _| {
            let kd2 = kx * kx + ky * ky + kz * kz;
            if kd2 > 0.0 {
                // k.X in coefficient form (the divergence is i times this).
                let kdotx = kx * s[0][i] + ky * s[1][i] + kz * s[2][i];
                let fac = kdotx / kd2;
                s[0][i] -= kx * fac;
                s[1][i] -= ky * fac;
                s[2][i] -= kz * fac;
            }
        });
        let [a, b, c] = s;
        [
            ws.inverse_slice(a),
            ws.inverse_slice(b),
            ws.inverse_slice(c),
        ]
        .concat()
    });
    Ok(FieldSnapshot {
        grid: x.grid,
        components: 3,
        data: slabs.concat(),
    })
}

/// Remove modes above the 2/3-rule cutoff from every slice.
pub fn dealias(ws: &SpectralWorkspace, x: &FieldSnapshot) -> FieldSnapshot {
    map_spectral(ws, x, |ws, spec| ws.dealias_spec(spec))
}

/// Subtract the spatial mean from every (time, component) slice.
pub fn remove_mean(x: &FieldSnapshot) -> FieldSnapshot {
    let mut out = x.clone();
    let n3 = x.grid.n3() as f64;
    for it in 0..x.grid.nt {
        for c in 0..x.components {
            let s = out.slice_mut(it, c);
            let mean: f64 = s.iter().sum::<f64>() / n3;
            s.iter_mut().for_each(|v| *v -= mean);
        }
    }
    out
}

/// Max |divergence| over all slices; used to validate divergence-free inputs.
pub fn max_divergence(ws: &SpectralWorkspace, x: &FieldSnapshot) -> Result<f64> {
    Ok(divergence(ws, x)?.max_abs())
}

/// Pointwise product of two scalar slices followed by 2/3 dealiasing.
/// The workhorse for quadratic terms; both inputs stay untouched.
pub fn dealiased_product_slice(ws: &SpectralWorkspace, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mut spec = ws.forward_slice(&prod);
    ws.dealias_spec(&mut spec);
    prod = ws.inverse_slice(spec);
    prod
}
