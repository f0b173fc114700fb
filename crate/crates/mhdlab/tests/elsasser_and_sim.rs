//! Variable conversions, pressure solve, manufactured solutions, and the
//! mini time stepper.

mod common;

use common::{max_abs_diff, random_divfree};
use mhdlab::elsasser::*;
use mhdlab::grid::{FieldSnapshot, Grid};
use mhdlab::sim::*;
use mhdlab::spectral::*;
use std::f64::consts::TAU;

fn small_grid(n: usize) -> Grid {
    Grid::cubic(n, TAU, 4, 0.1, 0.0).unwrap()
}

#[test]
fn zero_magnetic_field_collapses_variables() {
    let g = small_grid(8);
    let cap_u = random_divfree(g, 1, 2);
    let cap_f = random_divfree(g, 2, 2);
    let zero = FieldSnapshot::zeros(g, 3);
    let (u, b, f, gg) = to_elsasser(&cap_u, &zero, &cap_f, &zero).unwrap();
    assert_eq!(u.data, cap_u.data);
    assert_eq!(b.data, cap_u.data);
    assert_eq!(f.data, cap_f.data);
    assert_eq!(gg.data, cap_f.data);
}

#[test]
fn elsasser_roundtrip_is_machine_exact() {
    let g = small_grid(8);
    let cap_u = random_divfree(g, 3, 2);
    let cap_b = random_divfree(g, 4, 2);
    let cap_f = random_divfree(g, 5, 2);
    let cap_g = random_divfree(g, 6, 2);
    let (u, b, f, gg) = to_elsasser(&cap_u, &cap_b, &cap_f, &cap_g).unwrap();
    let (ru, rb, rf, rg) = from_elsasser(&u, &b, &f, &gg).unwrap();
    for (a, c) in [(&ru, &cap_u), (&rb, &cap_b), (&rf, &cap_f), (&rg, &cap_g)] {
        assert!(max_abs_diff(a, c) <= 1e-15);
    }
}

#[test]
fn elsasser_variables_stay_divergence_free() {
    let g = small_grid(16);
    let ws = SpectralWorkspace::new(&g);
    let cap_u = random_divfree(g, 7, 4);
    let cap_b = random_divfree(g, 8, 4);
    let zero = FieldSnapshot::zeros(g, 3);
    let (u, b, _, _) = to_elsasser(&cap_u, &cap_b, &zero, &zero).unwrap();
    assert!(max_divergence(&ws, &u).unwrap() <= 1e-8);
    assert!(max_divergence(&ws, &b).unwrap() <= 1e-8);
}

#[test]
fn grid_mismatch_is_rejected() {
    let g1 = small_grid(8);
    let g2 = small_grid(16);
    let a = FieldSnapshot::zeros(g1, 3);
    let b = FieldSnapshot::zeros(g2, 3);
    assert!(to_elsasser(&a, &b, &a, &a).is_err());
}

#[test]
fn pressure_of_zero_field_is_zero() {
    let g = small_grid(8);
    let ws = SpectralWorkspace::new(&g);
    let u = random_divfree(g, 9, 2);
    let zero = FieldSnapshot::zeros(g, 3);
    assert!(solve_pressure(&ws, &u, &zero).unwrap().max_abs() <= 1e-14);
    assert!(solve_pressure(&ws, &zero, &u).unwrap().max_abs() <= 1e-14);
}

#[test]
fn pressure_residual_for_abc_like_fields() {
    let g = small_grid(16);
    let ws = SpectralWorkspace::new(&g);
    let u = FieldSnapshot::from_fn(g, 3, |_, x, c| {
        0.9 * match c {
            0 => x[2].sin(),
            1 => x[0].sin(),
            _ => x[1].sin(),
        }
    });
    let p = solve_pressure(&ws, &u, &u).unwrap();
    // Independent residual route: Lap P + div(div(u (x) u)) with dealiased
    // products assembled through the generic operators.
    let mut rows = Vec::new();
    for i in 0..3 {
        let mut row = FieldSnapshot::zeros(g, 3);
        for j in 0..3 {
            for it in 0..g.nt {
                let prod = dealiased_product_slice(&ws, u.slice(it, i), u.slice(it, j));
                row.slice_mut(it, j).copy_from_slice(&prod);
            }
        }
        rows.push(divergence(&ws, &row).unwrap());
    }
    let mut divrows = FieldSnapshot::zeros(g, 3);
    for (i, r) in rows.iter().enumerate() {
        for it in 0..g.nt {
            divrows.slice_mut(it, i).copy_from_slice(r.slice(it, 0));
        }
    }
    let divdiv = divergence(&ws, &divrows).unwrap();
    let residual = laplacian(&ws, &p).unwrap().axpy(1.0, &divdiv).unwrap();
    assert!(residual.max_abs() <= 1e-8, "residual = {}", residual.max_abs());
}

#[test]
fn pressure_matches_taylor_green_closed_form() {
    let g = small_grid(16);
    let ws = SpectralWorkspace::new(&g);
    let a = 1.3;
    let u = FieldSnapshot::from_fn(g, 3, |_, x, c| {
        a * match c {
            0 => x[0].sin() * x[1].cos(),
            1 => -(x[0].cos()) * x[1].sin(),
            _ => 0.0,
        }
    });
    let p = solve_pressure(&ws, &u, &u).unwrap();
    // For this vortex with b = u: (u.grad)u = grad(-(cos 2x + cos 2y)/4) a^2,
    // so P = (a^2/4)(cos 2x + cos 2y), already zero-mean.
    let expect = FieldSnapshot::from_fn(g, 1, |_, x, _| {
        (a * a / 4.0) * ((2.0 * x[0]).cos() + (2.0 * x[1]).cos())
    });
    assert!(
        max_abs_diff(&p, &expect) <= 1e-10,
        "diff = {}",
        max_abs_diff(&p, &expect)
    );
}

#[test]
fn pressure_is_bilinear() {
    let g = small_grid(16);
    let ws = SpectralWorkspace::new(&g);
    let u = random_divfree(g, 10, 4);
    let b = random_divfree(g, 11, 4);
    let p1 = solve_pressure(&ws, &u.scale(2.5), &b).unwrap();
    let p2 = solve_pressure(&ws, &u, &b).unwrap().scale(2.5);
    assert!(max_abs_diff(&p1, &p2) <= 1e-12);
}

#[test]
fn pressure_rejects_non_divergence_free_inputs() {
    let g = small_grid(16);
    let ws = SpectralWorkspace::new(&g);
    let f = common::random_band_limited(g, 1, 12, 4);
    let x = gradient(&ws, &f).unwrap();
    assert!(solve_pressure(&ws, &x, &x).is_err());
}

// --- manufactured solutions ---

fn residual_grid(n: usize, dt: f64) -> Grid {
    Grid::cubic(n, TAU, 6, dt, 0.0).unwrap()
}

#[test]
fn manufactured_residual_is_small_and_second_order_in_dt() {
    let mut res = Vec::new();
    for dt in [0.02, 0.01] {
        let g = residual_grid(16, dt);
        let ws = SpectralWorkspace::new(&g);
        let (u, b, p, f, gg) =
            manufactured_solution(ManufacturedName::TaylorGreen, g).unwrap();
        let (ru, rb) = mhd_residual(&ws, &u, &b, &p, &f, &gg).unwrap();
        println!("dt = {dt}: residual_u = {ru:.3e}, residual_b = {rb:.3e}");
        res.push(ru.max(rb));
    }
    assert!(res[0] < 1e-5);
    // Halving dt must shrink the central-difference residual ~4x.
    assert!(res[1] <= res[0] / 3.0, "res = {res:?}");
}

#[test]
fn manufactured_zero_amplitude_residual_is_zero() {
    let g = residual_grid(8, 0.05);
    let ws = SpectralWorkspace::new(&g);
    let z3 = FieldSnapshot::zeros(g, 3);
    let z1 = FieldSnapshot::zeros(g, 1);
    let (ru, rb) = mhd_residual(&ws, &z3, &z3, &z1, &z3, &z3).unwrap();
    assert_eq!((ru, rb), (0.0, 0.0));
}

#[test]
fn aligned_manufactured_fields_have_symmetric_residuals() {
    // With b = u both equations coincide, so the two residuals are identical.
    let g = residual_grid(16, 0.02);
    let ws = SpectralWorkspace::new(&g);
    let (u, _, p, f, _) = manufactured_solution(ManufacturedName::AbcDrift, g).unwrap();
    let (ru, rb) = mhd_residual(&ws, &u, &u, &p, &f, &f).unwrap();
    assert!((ru - rb).abs() <= 1e-12, "ru = {ru}, rb = {rb}");
}

#[test]
fn all_manufactured_families_are_divergence_free() {
    let g = residual_grid(16, 0.02);
    let ws = SpectralWorkspace::new(&g);
    for name in [
        ManufacturedName::TaylorGreen,
        ManufacturedName::AbcDrift,
        ManufacturedName::ProductModes,
    ] {
        let (u, b, _, f, gg) = manufactured_solution(name, g).unwrap();
        for x in [&u, &b, &f, &gg] {
            assert!(max_divergence(&ws, x).unwrap() <= 1e-9);
        }
    }
}

#[test]
fn unknown_manufactured_name_is_rejected() {
    assert!("spiral".parse::<ManufacturedName>().is_err());
}

// --- time stepper ---

fn energy(ws: &SpectralWorkspace, v: &[Vec<f64>; 3], hvol: f64) -> f64 {
    let _ = ws;
    0.5 * v
        .iter()
        .flat_map(|c| c.iter())
        .map(|x| x * x)
        .sum::<f64>()
        * hvol
}

fn grad_energy(ws: &SpectralWorkspace, v: &[Vec<f64>; 3], grid: &Grid) -> f64 {
    // Parseval: int |grad v|^2 = sum_k |k|^2 |v_hat|^2 * vol / n3^2 (with
    // half-spectrum weights).
    let n3 = grid.n3() as f64;
    let vol: f64 = grid.box_length.iter().product();
    let mut sum = 0.0;
    for c in v {
        let spec = ws.forward_slice(c);
        ws.for_each_mode(|i, _, _, _, k2| {
            let x = i % ws.nxc;
            let w = if x == 0 || x == ws.nxc - 1 { 1.0 } else { 2.0 };
            sum += w * k2 * spec[i].norm_sqr();
        });
    }
    sum * vol / (n3 * n3)
}

#[test]
fn single_diffusive_mode_decays_exactly() {
    let g = Grid::cubic(16, TAU, 4, 0.05, 0.0).unwrap();
    let ws = SpectralWorkspace::new(&g);
    let mk = || {
        let f = FieldSnapshot::from_fn(g, 3, |_, x, c| if c == 1 { x[0].sin() } else { 0.0 });
        std::array::from_fn(|c| f.slice(0, c).to_vec())
    };
    let mut state = SimState { t: 0.0, u: mk(), b: mk() };
    let dt = 0.05;
    for _ in 0..10 {
        state = step(&ws, &state, dt, 0.9, g.spacing()[0]).unwrap();
    }
    let expect = (-0.5f64).exp();
    let got = state.u[1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((got - expect).abs() <= 1e-9, "got {got}, expect {expect}");
}

#[test]
fn alignment_is_preserved_and_divergence_stays_zero() {
    let g = Grid::cubic(16, TAU, 4, 0.02, 0.0).unwrap();
    let ws = SpectralWorkspace::new(&g);
    let config = SimConfig {
        grid: g,
        initial: "abc-drift".into(),
        amplitude: 0.5,
        forcing: "none".into(),
        cfl: 0.9,
        seed: 1,
    };
    let mut state = initial_state(&ws, &config).unwrap();
    state.b = state.u.clone();
    for _ in 0..20 {
        state = step(&ws, &state, 0.02, 0.9, g.spacing()[0]).unwrap();
    }
    let mut diff = 0.0f64;
    for c in 0..3 {
        for (a, b) in state.u[c].iter().zip(&state.b[c]) {
            diff = diff.max((a - b).abs());
        }
    }
    assert!(diff <= 1e-9, "u-b drift {diff}");
    let f = FieldSnapshot::from_fn(g, 3, |_, _, _| 0.0);
    let mut u = f.clone();
    for c in 0..3 {
        for it in 0..g.nt {
            u.slice_mut(it, c).copy_from_slice(&state.u[c]);
        }
    }
    assert!(max_divergence(&ws, &u).unwrap() <= 1e-10);
}

#[test]
fn unforced_energy_balance_closes() {
    let g = Grid::cubic(16, TAU, 4, 2e-3, 0.0).unwrap();
    let ws = SpectralWorkspace::new(&g);
    let config = SimConfig {
        grid: g,
        initial: "random".into(),
        amplitude: 0.4,
        forcing: "none".into(),
        cfl: 0.9,
        seed: 7,
    };
    let mut state = initial_state(&ws, &config).unwrap();
    let hvol = g.cell_volume();
    let e0 = energy(&ws, &state.u, hvol) + energy(&ws, &state.b, hvol);
    let dt = 2e-3;
    let mut diss = vec![grad_energy(&ws, &state.u, &g) + grad_energy(&ws, &state.b, &g)];
    for _ in 0..100 {
        state = step(&ws, &state, dt, 0.9, g.spacing()[0]).unwrap();
        diss.push(grad_energy(&ws, &state.u, &g) + grad_energy(&ws, &state.b, &g));
    }
    // Composite Simpson quadrature of the dissipation rate (rapid decay makes
    // trapezoid too coarse at this tolerance).
    let mut dissipated = diss[0] + diss[100];
    for (i, d) in diss.iter().enumerate().take(100).skip(1) {
        dissipated += if i % 2 == 1 { 4.0 } else { 2.0 } * d;
    }
    dissipated *= dt / 3.0;
    let e1 = energy(&ws, &state.u, hvol) + energy(&ws, &state.b, hvol);
    let defect = (e1 - e0 + dissipated).abs();
    println!("E0 = {e0:.6}, E1 = {e1:.6}, dissipated = {dissipated:.6}, defect = {defect:.3e}");
    assert!(defect <= 1e-6, "energy balance defect {defect}");
}

#[test]
fn cfl_violation_is_rejected() {
    let g = Grid::cubic(8, TAU, 4, 0.05, 0.0).unwrap();
    let ws = SpectralWorkspace::new(&g);
    let big = FieldSnapshot::from_fn(g, 3, |_, x, c| if c == 1 { 50.0 * x[0].sin() } else { 0.0 });
    let state = SimState {
        t: 0.0,
        u: std::array::from_fn(|c| big.slice(0, c).to_vec()),
        b: std::array::from_fn(|c| big.slice(0, c).to_vec()),
    };
    assert!(step(&ws, &state, 0.05, 0.5, g.spacing()[0]).is_err());
}

#[test]
fn record_produces_consistent_snapshots() {
    let g = Grid::cubic(8, TAU, 4, 0.01, 0.0).unwrap();
    let ws = SpectralWorkspace::new(&g);
    let config = SimConfig {
        grid: g,
        initial: "taylor-green".into(),
        amplitude: 0.3,
        forcing: "none".into(),
        cfl: 0.9,
        seed: 1,
    };
    let (u, b, p) = record(&ws, &config, 2).unwrap();
    assert_eq!(u.grid.nt, 4);
    assert!(max_divergence(&ws, &u).unwrap() <= 1e-10);
    assert!(max_divergence(&ws, &b).unwrap() <= 1e-10);
    // P matches a fresh pressure solve on the recorded fields.
    let p2 = solve_pressure(&ws, &u, &b).unwrap();
    assert!(max_abs_diff(&p, &p2) <= 1e-12);
}
