//! Virtual panoramic camera placement over the top height layer, and the
//! Fibonacci lattice of ray directions every camera shares.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::occupancy::{HeightLayer, OccupancyGrid};

/// Default search window, in coarse cells.
pub const DEFAULT_WINDOW: usize = 3;

/// Default number of ray directions per camera.
pub const DEFAULT_RAYS_PER_CAMERA: usize = 10_000;

/// A panoramic camera in free space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualCamera {
    /// Ray origin, at the center of `cell`.
    pub center: Vec3,
    /// Column and layer `(i, j, k)` produced by the placement sweep.
    pub spawn: [usize; 3],
    /// Coarse cell actually holding the camera (at least one above `spawn`).
    pub cell: [i64; 3],
}

impl VirtualCamera {
    /// A camera placed by hand rather than by the sweep; `spawn` and `cell`
    /// are zero.
    pub fn at(center: Vec3) -> Self {
        VirtualCamera {
            center,
            spawn: [0; 3],
            cell: [0; 3],
        }
    }
}

/// Highest column top inside the half-open window `[i - phi, i + phi) x
/// [j - phi, j + phi)`, clamped to the layer. `-1` when every column in the
/// window is empty.
pub fn find_high_cell(layer: &HeightLayer, i: usize, j: usize, phi: usize) -> i32 {
    let [p, q] = layer.dims();
    window_max(p, q, i, j, phi, |ii, jj| layer.top(ii, jj))
}

#[inline]
fn window_max(
    p: usize,
    q: usize,
    i: usize,
    j: usize,
    phi: usize,
    at: impl Fn(usize, usize) -> i32,
) -> i32 {
    let mut z = -1;
    for ii in i.saturating_sub(phi)..(i + phi).min(p) {
        for jj in j.saturating_sub(phi)..(j + phi).min(q) {
            z = z.max(at(ii, jj));
        }
    }
    z
}

/// The placement sweep proper: yields `(i, j, k)` for
/// `k in begin_k[i, j]..end_k[i, j]`, where `begin_k` is the windowed maximum
/// of the height layer and `end_k` is one past the windowed maximum of
/// `begin_k`. Columns whose `begin_k` is `-1` yield nothing.
///
/// Order is `i`, then `j`, then `k`, ascending.
pub fn camera_cells(layer: &HeightLayer, phi: usize) -> Result<Vec<[usize; 3]>> {
    if phi == 0 {
        return Err(Error::param("phi", "window must be at least one cell"));
    }
    let [p, q] = layer.dims();
    let mut begin = vec![-1i32; p * q];
    for i in 0..p {
        for j in 0..q {
            begin[i * q + j] = find_high_cell(layer, i, j, phi);
        }
    }
    let mut out = Vec::new();
    for i in 0..p {
        for j in 0..q {
            let b = begin[i * q + j];
            if b < 0 {
                continue;
            }
            let end = window_max(p, q, i, j, phi, |ii, jj| begin[ii * q + jj]) + 1;
            out.extend((b..end).map(|k| [i, j, k as usize]));
        }
    }
    Ok(out)
}

/// Places one camera per swept cell, at the center of the cell directly above
/// it, lifted further while that cell is occupied.
pub fn sample_camera_centers(
    grid: &OccupancyGrid,
    layer: &HeightLayer,
    phi: usize,
) -> Result<Vec<VirtualCamera>> {
    if layer.dims() != [grid.dims()[0], grid.dims()[1]] {
        return Err(Error::param("layer", "does not match the occupancy grid"));
    }
    Ok(camera_cells(layer, phi)?
        .into_iter()
        .map(|spawn| {
            let [i, j, k] = spawn;
            let (i, j) = (i as i64, j as i64);
            let mut z = k as i64 + 1;
            while grid.is_occupied(i, j, z) {
                z += 1;
            }
            VirtualCamera {
                center: grid.cell_center(i, j, z),
                spawn,
                cell: [i, j, z],
            }
        })
        .collect())
}

/// Unit ray directions shared by every camera.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    directions: Vec<Vec3>,
}

impl DirectionSet {
    pub fn from_directions(directions: Vec<Vec3>) -> Self {
        DirectionSet { directions }
    }

    pub fn empty() -> Self {
        DirectionSet {
            directions: Vec::new(),
        }
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Golden angle `pi * (3 - sqrt 5)` in radians.
pub const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// `n` near-equal-area directions on the unit sphere. Direction `i` has
/// `z = 1 - 2 (i + 0.5) / n` and azimuth `i * GOLDEN_ANGLE`.
pub fn fibonacci_directions(n: usize) -> Result<DirectionSet> {
    if n == 0 {
        return Err(Error::param("n", "need at least one direction"));
    }
    let inv = 1.0 / n as f64;
    let directions = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) * inv;
            let rho = libm::sqrt((1.0 - z * z).max(0.0));
            // Reduce the angle first: i * GOLDEN_ANGLE grows past 2^20 rad for large n.
            let az = libm::fmod(i as f64 * GOLDEN_ANGLE, core::f64::consts::TAU);
            let (s, c) = libm::sincos(az);
            Vec3::new(rho * c, rho * s, z)
        })
        .collect();
    Ok(DirectionSet { directions })
}
