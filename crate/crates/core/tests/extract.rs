use std::collections::HashMap;

use meshconflate_core::extract::marching_cubes;
use meshconflate_core::tsdf::{TsdfVolume, Voxel};
use meshconflate_core::{TriangleMesh, Vec3};
use proptest::prelude::*;

/// Stores `f` at every lattice point of `[-n, n]^3`.
fn field(voxel: f64, n: i32, f: impl Fn(Vec3) -> f64) -> TsdfVolume {
    let mut v = TsdfVolume::new(voxel, 10.0 * voxel).unwrap();
    for i in -n..=n {
        for j in -n..=n {
            for k in -n..=n {
                let key = [i, j, k];
                let distance = f(v.voxel_center(key));
                v.set(
                    key,
                    Voxel {
                        distance,
                        weight: 1.0,
                    },
                );
            }
        }
    }
    v
}

fn signed_volume(m: &TriangleMesh) -> f64 {
    m.triangles().map(|[a, b, c]| a.dot(b.cross(c)) / 6.0).sum()
}

fn edge_uses(m: &TriangleMesh) -> HashMap<(u32, u32), usize> {
    let mut uses = HashMap::new();
    for f in m.faces() {
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    uses
}

#[test]
fn linear_field_gives_a_flat_sheet() {
    let v = field(0.25, 6, |p| p.z - 0.37);
    let m = marching_cubes(&v);
    assert!(!m.is_empty());
    for p in m.vertices() {
        assert!((p.z - 0.37).abs() <= 1e-6, "{p:?}");
    }
    // the sheet spans the whole 3 x 3 block
    let b = m.bounds().unwrap();
    assert!((b.extent().x - 3.0).abs() < 1e-9 && (b.extent().y - 3.0).abs() < 1e-9);
    assert!((m.total_area() - 9.0).abs() < 1e-9);
}

#[test]
fn sphere_vertices_lie_on_the_radius() {
    let v = field(0.1, 25, |p| p.norm() - 2.0);
    let m = marching_cubes(&v);
    assert!(m.face_count() > 1000);
    for p in m.vertices() {
        let r = p.norm();
        assert!((1.99..=2.01).contains(&r), "radius {r}");
    }
    // closed, welded and facing away from the negative side
    assert!(edge_uses(&m).values().all(|&n| n == 2));
    let vol = signed_volume(&m);
    let exact = 4.0 / 3.0 * std::f64::consts::PI * 8.0;
    assert!(vol > 0.0 && (vol - exact).abs() < 0.02 * exact, "{vol}");
}

#[test]
fn unobserved_corners_stop_extraction() {
    let mut v = field(0.25, 4, |p| p.z - 0.1);
    assert!(!marching_cubes(&v).is_empty());
    // dropping one layer of lattice points next to the crossing removes every straddling cell
    for i in -4..=4 {
        for j in -4..=4 {
            v.set(
                [i, j, 0],
                Voxel {
                    distance: 0.0,
                    weight: 0.0,
                },
            );
        }
    }
    assert!(marching_cubes(&v).is_empty());
    assert!(marching_cubes(&TsdfVolume::new(0.25, 1.0).unwrap()).is_empty());
}

#[test]
fn uniform_sign_gives_nothing() {
    assert!(marching_cubes(&field(0.5, 3, |_| 0.7)).is_empty());
    assert!(marching_cubes(&field(0.5, 3, |_| -0.7)).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tilted_planes_are_exact_and_face_the_positive_side(
        nx in -1.0..1.0f64, ny in -1.0..1.0f64, nz in -1.0..1.0f64, c in -0.4..0.4f64,
    ) {
        let n = Vec3::new(nx, ny, nz);
        prop_assume!(n.norm() > 0.2);
        let n = n.normalized().unwrap();
        let v = field(0.2, 5, |p| p.dot(n) - c);
        let m = marching_cubes(&v);
        prop_assert!(!m.is_empty());
        for p in m.vertices() {
            prop_assert!((p.dot(n) - c).abs() <= 1e-9);
        }
        for [a, b, q] in m.triangles() {
            let g = (b - a).cross(q - a);
            if g.norm() > 1e-12 {
                prop_assert!(g.dot(n) > 0.0);
            }
        }
        prop_assert!(edge_uses(&m).values().all(|&k| k <= 2));
    }
}
