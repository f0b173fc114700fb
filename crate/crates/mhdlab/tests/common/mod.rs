#![allow(dead_code)]

//! Shared helpers for the integration tests.

use mhdlab::grid::{FieldSnapshot, Grid};
use mhdlab::spectral::{map_spectral, SpectralWorkspace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random field low-passed to |m_j| <= m_max in every axis, normalized to
/// unit max amplitude. Deterministic in `seed`.
pub fn random_band_limited(
    grid: Grid,
    components: usize,
    seed: u64,
    m_max: usize,
) -> FieldSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.nt * components * grid.n3();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let raw = FieldSnapshot::new(grid, components, data).unwrap();
    let ws = SpectralWorkspace::new(&grid);
    let m = m_max as i64;
    let mut low = map_spectral(&ws, &raw, |ws, spec| {
        ws.for_each_mode_numbers(|i, mx, my, mz| {
            if mx.abs() > m || my.abs() > m || mz.abs() > m {
                spec[i] = Default::default();
            }
        });
    });
    let m = low.max_abs().max(1e-300);
    for v in &mut low.data {
        *v /= m;
    }
    low
}

/// Divergence-free random band-limited field (Leray-projected).
pub fn random_divfree(grid: Grid, seed: u64, m_max: usize) -> FieldSnapshot {
    let ws = SpectralWorkspace::new(&grid);
    let x = random_band_limited(grid, 3, seed, m_max);
    mhdlab::spectral::leray_project(&ws, &x).unwrap()
}

pub fn max_abs_diff(a: &FieldSnapshot, b: &FieldSnapshot) -> f64 {
    a.data
        .iter()
        .zip(&b.data)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
