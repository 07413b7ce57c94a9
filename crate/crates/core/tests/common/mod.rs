#![allow(dead_code)]

use meshconflate_core::{TriangleMesh, Vec3};

pub fn mesh(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::from_raw(vertices, faces).unwrap().0
}

/// Rectangle at height `z` split into `n x n` quads.
pub fn plane(z: f64, half: f64, n: usize) -> TriangleMesh {
    let mut v = Vec::new();
    let mut f = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let x = -half + 2.0 * half * i as f64 / n as f64;
            let y = -half + 2.0 * half * j as f64 / n as f64;
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

/// Closed axis-aligned box with outward winding.
pub fn cuboid(lo: Vec3, hi: Vec3) -> TriangleMesh {
    let v: Vec<Vec3> = (0..8)
        .map(|c| {
            Vec3::new(
                if c & 1 == 0 { lo.x } else { hi.x },
                if c & 2 == 0 { lo.y } else { hi.y },
                if c & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect();
    let quads = [
        [4, 5, 7, 6],
        [0, 2, 3, 1],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    mesh(
        v,
        quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect(),
    )
}

/// Bumpy height field over `[-half, half]^2` with `2 n^2` triangles.
pub fn terrain(half: f64, n: usize) -> TriangleMesh {
    let flat = plane(0.0, half, n);
    let v = flat
        .vertices()
        .iter()
        .map(|p| Vec3::new(p.x, p.y, (0.7 * p.x).sin() * (0.5 * p.y).cos() + 0.1 * p.x))
        .collect();
    mesh(v, flat.faces().to_vec())
}

/// Textbook Moller-Trumbore, two-sided.
pub fn moller_trumbore(o: Vec3, d: Vec3, [a, b, c]: [Vec3; 3]) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = d.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(q) * inv)
}

/// Nearest brute-force hit with `t > t_min`.
pub fn brute_first_hit(mesh: &TriangleMesh, o: Vec3, d: Vec3, t_min: f64) -> Option<f64> {
    mesh.triangles()
        .filter_map(|t| moller_trumbore(o, d, t))
        .filter(|&t| t > t_min)
        .fold(None, |best, t| Some(best.map_or(t, |b: f64| b.min(t))))
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}
