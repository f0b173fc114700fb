//! Grid/field construction contracts, cylinder restriction, and FSNAP1 round trips.

mod common;

use mhdlab::cylinder::{restrict_cylinder, ParabolicCylinder};
use mhdlab::grid::{FieldSnapshot, Grid};
use mhdlab::io::{read_fsnap, write_fsnap};
use std::f64::consts::TAU;

#[test]
fn grid_rejects_odd_or_tiny_counts() {
    assert!(Grid::cubic(3, TAU, 4, 0.1, 0.0).is_err());
    assert!(Grid::cubic(7, TAU, 4, 0.1, 0.0).is_err());
    assert!(Grid::new(8, 8, 8, [TAU; 3], 5, 0.1, 0.0).is_err());
    assert!(Grid::cubic(8, -1.0, 4, 0.1, 0.0).is_err());
    assert!(Grid::cubic(8, TAU, 4, 0.0, 0.0).is_err());
    assert!(Grid::cubic(8, TAU, 4, 0.1, 0.0).is_ok());
}

#[test]
fn snapshot_rejects_bad_shape_and_nonfinite() {
    let g = Grid::cubic(4, 1.0, 4, 0.1, 0.0).unwrap();
    assert!(FieldSnapshot::new(g, 2, vec![0.0; 4 * 2 * 64]).is_err());
    assert!(FieldSnapshot::new(g, 1, vec![0.0; 10]).is_err());
    let mut data = vec![0.0; 4 * 64];
    data[17] = f64::NAN;
    assert!(FieldSnapshot::new(g, 1, data).is_err());
}

#[test]
fn from_fn_index_order_is_t_c_z_y_x() {
    let g = Grid::new(4, 6, 8, [1.0, 2.0, 3.0], 4, 0.5, 1.0).unwrap();
    let f = FieldSnapshot::from_fn(g, 3, |t, x, c| {
        t + 10.0 * x[0] + 100.0 * x[1] + 1000.0 * x[2] + 10000.0 * c as f64
    });
    let (it, c, k, j, i) = (2, 1, 5, 3, 1);
    let expect = g.t_coord(it)
        + 10.0 * g.x_coord(i)
        + 100.0 * g.y_coord(j)
        + 1000.0 * g.z_coord(k)
        + 10000.0 * c as f64;
    assert_eq!(f.at(it, c, k, j, i), expect);
}

fn demo_grid() -> Grid {
    Grid::cubic(16, TAU, 32, 0.05, 0.0).unwrap()
}

#[test]
fn cylinder_matches_enumeration_oracle() {
    let g = demo_grid();
    let q = ParabolicCylinder::new(0.7, [3.0, 3.0, 3.0], 0.55).unwrap();
    let cells = restrict_cylinder(&g, &q).unwrap();
    // Independent brute-force enumeration over every space-time cell center.
    let mut count = 0usize;
    for it in 0..g.nt {
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let x = [g.x_coord(i), g.y_coord(j), g.z_coord(k)];
                    if q.contains(&g, g.t_coord(it), x) {
                        count += 1;
                    }
                }
            }
        }
    }
    assert_eq!(cells.len(), count);
    assert!((cells.cell_measure - g.dt * g.cell_volume()).abs() < 1e-15);
}

#[test]
fn cylinder_translation_equivariance() {
    let g = demo_grid();
    let h = g.spacing()[0];
    let q1 = ParabolicCylinder::new(0.7, [3.0, 3.0, 3.0], 0.55).unwrap();
    let q2 = ParabolicCylinder::new(0.7, [3.0 + h, 3.0, 3.0], 0.55).unwrap();
    let c1 = restrict_cylinder(&g, &q1).unwrap();
    let c2 = restrict_cylinder(&g, &q2).unwrap();
    let shifted: Vec<usize> = c1
        .ball
        .iter()
        .map(|&p| {
            let (row, i) = (p / g.nx, p % g.nx);
            row * g.nx + (i + 1) % g.nx
        })
        .collect();
    let mut sorted = shifted.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, c2.ball);
}

#[test]
fn cylinder_smaller_than_a_cell_is_a_domain_error() {
    let g = demo_grid();
    // Center placed between cell centers, radius below half a cell: no centers inside.
    let h = g.spacing()[0];
    let mid = 7.5 * h;
    let q = ParabolicCylinder::new(0.7, [mid, mid, mid], h / 4.0).unwrap();
    let err = restrict_cylinder(&g, &q).unwrap_err();
    assert!(err.to_string().contains("no grid cell centers"), "{err}");
}

#[test]
fn cylinder_outside_domain_names_the_face() {
    let g = demo_grid();
    let late = ParabolicCylinder::new(1.5, [3.0; 3], 0.3).unwrap();
    let err = restrict_cylinder(&g, &late).unwrap_err().to_string();
    assert!(err.contains("t-max"), "{err}");
    let early = ParabolicCylinder::new(0.01, [3.0; 3], 0.3).unwrap();
    let err = restrict_cylinder(&g, &early).unwrap_err().to_string();
    assert!(err.contains("t-min"), "{err}");
    let gt = Grid::cubic(16, TAU, 200, 1.0, 0.0).unwrap();
    let wide = ParabolicCylinder::new(100.0, [3.0; 3], 3.05).unwrap();
    let err = restrict_cylinder(&gt, &wide).unwrap_err().to_string();
    assert!(err.contains("face x"), "{err}");
}

#[test]
fn fsnap_roundtrip_is_bit_exact() {
    let g = Grid::cubic(8, TAU, 4, 0.1, -0.5).unwrap();
    let f = common::random_band_limited(g, 3, 42, 3);
    let dir = std::env::temp_dir().join("mhdlab_io_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("roundtrip.fsnap");
    write_fsnap(&path, &f, "velocity").unwrap();
    let (back, name) = read_fsnap(&path).unwrap();
    assert_eq!(name, "velocity");
    assert_eq!(back.grid, f.grid);
    assert_eq!(back.components, 3);
    assert_eq!(back.data, f.data);
}

#[test]
fn fsnap_rejects_wrong_payload_length_and_bad_magic() {
    let g = Grid::cubic(4, 1.0, 4, 0.1, 0.0).unwrap();
    let f = FieldSnapshot::zeros(g, 1);
    let dir = std::env::temp_dir().join("mhdlab_io_test");
    std::fs::create_dir_all(&dir).unwrap();

    let path = dir.join("short.fsnap");
    write_fsnap(&path, &f, "p").unwrap();
    let full = std::fs::read(&path).unwrap();
    std::fs::write(&path, &full[..full.len() - 8]).unwrap();
    assert!(read_fsnap(&path).unwrap_err().to_string().contains("payload"));

    let path = dir.join("long.fsnap");
    let mut longer = full.clone();
    longer.extend_from_slice(&[0u8; 8]);
    std::fs::write(&path, &longer).unwrap();
    assert!(read_fsnap(&path).unwrap_err().to_string().contains("longer"));

    let path = dir.join("magic.fsnap");
    let text = String::from_utf8_lossy(&full[..full.iter().position(|&b| b == b'\n').unwrap()])
        .replace("FSNAP1", "FSNAP9");
    let mut bad = text.into_bytes();
    bad.push(b'\n');
    bad.extend_from_slice(&full[full.iter().position(|&b| b == b'\n').unwrap() + 1..]);
    std::fs::write(&path, &bad).unwrap();
    assert!(read_fsnap(&path).unwrap_err().to_string().contains("magic"));
}
