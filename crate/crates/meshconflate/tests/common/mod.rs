#![allow(dead_code)]

use meshconflate_core::{TriangleMesh, Vec3};

pub fn mesh(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::from_raw(vertices, faces).unwrap().0
}

/// Axis-aligned rectangle at height `z`, split into `n x n` quads.
pub fn plane(z: f64, x0: f64, y0: f64, x1: f64, y1: f64, n: usize) -> TriangleMesh {
    let mut v = Vec::new();
    let mut f = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let x = x0 + (x1 - x0) * i as f64 / n as f64;
            let y = y0 + (y1 - y0) * j as f64 / n as f64;
            v.push(Vec3::new(x, y, z));
        }
    }
    let id = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    for j in 0..n {
        for i in 0..n {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    mesh(v, f)
}

/// Box surface between `lo` and `hi`, outward winding. `bottom` toggles the
/// lower face.
pub fn boxed(lo: Vec3, hi: Vec3, bottom: bool) -> TriangleMesh {
    let v: Vec<Vec3> = (0..8)
        .map(|c| {
            Vec3::new(
                if c & 1 == 0 { lo.x } else { hi.x },
                if c & 2 == 0 { lo.y } else { hi.y },
                if c & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect();
    let mut quads = vec![
        [4, 5, 7, 6], // top
        [0, 1, 5, 4], // y-
        [2, 6, 7, 3], // y+
        [0, 4, 6, 2], // x-
        [1, 3, 7, 5], // x+
    ];
    if bottom {
        quads.push([0, 2, 3, 1]);
    }
    let f = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    mesh(v, f)
}

pub fn cube(center: Vec3, edge: f64) -> TriangleMesh {
    let h = Vec3::splat(edge / 2.0);
    boxed(center - h, center + h, true)
}

/// Footprint `[x0, x1] x [y0, y1]` and height of one town building.
pub const TOWN_BUILDINGS: [(f64, f64, f64, f64, f64); 4] = [
    (-12.0, -6.0, -12.0, -6.0, 2.0),
    (4.0, 12.0, -13.0, -7.0, 5.0),
    (-11.0, -4.0, 5.0, 12.0, 7.5),
    (3.0, 9.0, 4.0, 10.0, 10.0),
];

/// Four open-bottom buildings on a 40 x 40 m ground plane. The ground is
/// cut out under each footprint, so every face is visible from outside.
pub fn town() -> TriangleMesh {
    let mut xs = vec![-20.0, 20.0];
    let mut ys = vec![-20.0, 20.0];
    for &(x0, x1, y0, y1, _) in &TOWN_BUILDINGS {
        xs.extend([x0, x1]);
        ys.extend([y0, y1]);
    }
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    xs.dedup();
    ys.dedup();
    let inside = |x: f64, y: f64| {
        TOWN_BUILDINGS
            .iter()
            .any(|&(x0, x1, y0, y1, _)| x > x0 && x < x1 && y > y0 && y < y1)
    };
    let mut ground = TriangleMesh::empty();
    for w in xs.windows(2) {
        for h in ys.windows(2) {
            if inside(0.5 * (w[0] + w[1]), 0.5 * (h[0] + h[1])) {
                continue;
            }
            ground.append(&plane(0.0, w[0], h[0], w[1], h[1], 1));
        }
    }
    let mut m = ground;
    for &(x0, x1, y0, y1, z) in &TOWN_BUILDINGS {
        m.append(&boxed(Vec3::new(x0, y0, 0.0), Vec3::new(x1, y1, z), false));
    }
    m
}
