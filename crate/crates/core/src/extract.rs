//! Zero level set extraction with marching cubes over the observed band.
//!
//! Only cells whose eight corners are all stored take part, so nothing is
//! extrapolated across the truncation boundary. Corners with `D == 0` count
//! as outside. Vertices are welded on the lattice edge they interpolate (or
//! the lattice point, when they land exactly on one).

use alloc::vec::Vec;

use hashbrown::HashMap;
use rustc_hash::FxBuildHasher;

use crate::geometry::Vec3;
use crate::mc_tables::{EDGE_TABLE, TRI_TABLE};
use crate::mesh::TriangleMesh;
use crate::tsdf::{TsdfVolume, VoxelKey};

const CORNERS: [[i32; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Weld key: lower lattice endpoint plus axis (0..3), or axis 3 for a
/// vertex sitting on the lattice point itself.
type WeldKey = (VoxelKey, u8);

/// Extracts the zero crossing of `volume`. An empty volume, or one without
/// any fully observed straddling cell, yields an empty mesh.
pub fn marching_cubes(volume: &TsdfVolume) -> TriangleMesh {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut weld: HashMap<WeldKey, u32, FxBuildHasher> = HashMap::with_hasher(FxBuildHasher);

    let mut keys: Vec<VoxelKey> = volume.iter().map(|(k, _)| k).collect();
    keys.sort_unstable();

    let mut d = [0.0f64; 8];
    'cells: for base in keys {
        for (c, off) in CORNERS.iter().enumerate() {
            match volume.get([base[0] + off[0], base[1] + off[1], base[2] + off[2]]) {
                Some(v) => d[c] = v.distance,
                None => continue 'cells,
            }
        }
        let case = (0..8).fold(0usize, |acc, c| acc | (((d[c] < 0.0) as usize) << c));
        if EDGE_TABLE[case] == 0 {
            continue;
        }
        let mut edge_vertex = [u32::MAX; 12];
        for (e, &[a, b]) in EDGES.iter().enumerate() {
            if EDGE_TABLE[case] & (1 << e) == 0 {
                continue;
            }
            edge_vertex[e] = weld_vertex(volume, &mut weld, &mut vertices, base, a, b, d[a], d[b]);
        }
        let row = &TRI_TABLE[case];
        for tri in row.chunks_exact(3) {
            if tri[0] < 0 {
                break;
            }
            let f = [
                edge_vertex[tri[0] as usize],
                edge_vertex[tri[1] as usize],
                edge_vertex[tri[2] as usize],
            ];
            // table winding has the normal toward the negative side; flip so
            // faces point outward (toward positive distance)
            faces.push([f[0], f[2], f[1]]);
        }
    }

    compact(vertices, faces)
}

#[allow(clippy::too_many_arguments)]
fn weld_vertex(
    volume: &TsdfVolume,
    weld: &mut HashMap<WeldKey, u32, FxBuildHasher>,
    vertices: &mut Vec<Vec3>,
    base: VoxelKey,
    a: usize,
    b: usize,
    da: f64,
    db: f64,
) -> u32 {
    let ka = add(base, CORNERS[a]);
    let kb = add(base, CORNERS[b]);
    // orient the edge from its lower lattice point so both cells sharing it
    // compute the same position
    let (lo, hi, dlo, dhi) = if ka < kb {
        (ka, kb, da, db)
    } else {
        (kb, ka, db, da)
    };
    let key = if dlo == 0.0 {
        (lo, 3)
    } else if dhi == 0.0 {
        (hi, 3)
    } else {
        let axis = (0..3).find(|&i| lo[i] != hi[i]).unwrap_or(0) as u8;
        (lo, axis)
    };
    *weld.entry(key).or_insert_with(|| {
        let p = if key.1 == 3 {
            volume.voxel_center(key.0)
        } else {
            let t = dlo / (dlo - dhi);
            let pl = volume.voxel_center(lo);
            let ph = volume.voxel_center(hi);
            pl + (ph - pl) * t
        };
        vertices.push(p);
        (vertices.len() - 1) as u32
    })
}

#[inline]
fn add(a: VoxelKey, b: [i32; 3]) -> VoxelKey {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Drops degenerate faces and unreferenced vertices, keeping first-use order.
fn compact(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriangleMesh {
    let (mesh, _) =
        TriangleMesh::from_raw(vertices, faces).expect("indices come from the weld map");
    let mut remap = alloc::vec![u32::MAX; mesh.vertex_count()];
    let mut kept = Vec::new();
    let faces: Vec<[u32; 3]> = mesh
        .faces()
        .iter()
        .map(|f| {
            f.map(|v| {
                let slot = &mut remap[v as usize];
                if *slot == u32::MAX {
                    *slot = kept.len() as u32;
                    kept.push(mesh.vertices()[v as usize]);
                }
                *slot
            })
        })
        .collect();
    TriangleMesh::from_raw(kept, faces)
        .expect("remapped indices are in range")
        .0
}
