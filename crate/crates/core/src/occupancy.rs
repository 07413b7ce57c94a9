//! Coarse boolean voxelization over the union of all source meshes, and the
//! top height layer derived from it.
//!
//! World Z is up. Cells are half-open `[lo, hi)` boxes; a triangle marks a
//! cell when it overlaps it with positive extent on every axis where the
//! triangle itself is not flat (so a face lying exactly on a cell boundary
//! plane marks one layer, not two).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::mesh::TriangleMesh;

/// Default upper bound on the number of coarse cells.
pub const DEFAULT_CELL_BUDGET: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    origin: Vec3,
    cell_size: f64,
    dims: [usize; 3],
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    /// Occupancy of cell `(i, j, k)`; cells outside the grid are empty.
    pub fn is_occupied(&self, i: i64, j: i64, k: i64) -> bool {
        let [p, q, r] = self.dims;
        if i < 0 || j < 0 || k < 0 || i as usize >= p || j as usize >= q || k as usize >= r {
            return false;
        }
        self.occupied[self.linear(i as usize, j as usize, k as usize)]
    }

    /// Cell containing `point` (floor indexing, may lie outside the grid).
    pub fn cell_of(&self, point: Vec3) -> [i64; 3] {
        let rel = (point - self.origin) / self.cell_size;
        [
            libm::floor(rel.x) as i64,
            libm::floor(rel.y) as i64,
            libm::floor(rel.z) as i64,
        ]
    }

    pub fn cell_center(&self, i: i64, j: i64, k: i64) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell_size
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Indices of occupied cells, x fastest.
    pub fn occupied_cells(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [p, q, _] = self.dims;
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(move |(n, _)| [n % p, (n / p) % q, n / (p * q)])
    }

    pub fn occupied_centers(&self) -> Vec<Vec3> {
        self.occupied_cells()
            .map(|[i, j, k]| self.cell_center(i as i64, j as i64, k as i64))
            .collect()
    }

    /// World-space bounds of the whole grid.
    pub fn bounds(&self) -> Aabb {
        let [p, q, r] = self.dims;
        Aabb::new(
            self.origin,
            self.origin + Vec3::new(p as f64, q as f64, r as f64) * self.cell_size,
        )
    }
}

/// Voxelizes the union of `meshes` with the default cell budget.
pub fn build_occupancy(meshes: &[&TriangleMesh], cell_size: f64) -> Result<OccupancyGrid> {
    build_occupancy_with_budget(meshes, cell_size, DEFAULT_CELL_BUDGET)
}

pub fn build_occupancy_with_budget(
    meshes: &[&TriangleMesh],
    cell_size: f64,
    budget: u64,
) -> Result<OccupancyGrid> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::param("cell_size", "must be positive and finite"));
    }
    let bounds = meshes
        .iter()
        .filter_map(|m| m.bounds().ok())
        .fold(Aabb::EMPTY, Aabb::union);
    if bounds.is_empty() {
        return Err(Error::EmptyMesh);
    }

    // One padding cell below, and at least one full cell above the cell that
    // holds the maximum corner.
    let origin = bounds.min - Vec3::splat(cell_size);
    let span = (bounds.max - origin) / cell_size;
    let dims = [
        libm::floor(span.x) as usize + 2,
        libm::floor(span.y) as usize + 2,
        libm::floor(span.z) as usize + 2,
    ];
    let required = dims.iter().map(|&d| d as u64).product::<u64>();
    if required > budget {
        return Err(Error::CellBudgetExceeded { required, budget });
    }

    let mut grid = OccupancyGrid {
        origin,
        cell_size,
        dims,
        occupied: vec![false; required as usize],
    };
    for mesh in meshes {
        for tri in mesh.triangles() {
            mark_triangle(&mut grid, tri);
        }
    }
    Ok(grid)
}

fn mark_triangle(grid: &mut OccupancyGrid, tri: [Vec3; 3]) {
    let tb = Aabb::from_points(tri);
    let lo = grid.cell_of(tb.min);
    let hi = grid.cell_of(tb.max);
    let dims = grid.dims;
    let clamp = |v: i64, axis: usize| v.clamp(0, dims[axis] as i64 - 1) as usize;
    let h = grid.cell_size * 0.5;
    // Start one cell low so that faces ending exactly on a lower boundary
    // still get their flat-axis test against the cell below.
    for k in clamp(lo[2] - 1, 2)..=clamp(hi[2], 2) {
        for j in clamp(lo[1] - 1, 1)..=clamp(hi[1], 1) {
            for i in clamp(lo[0] - 1, 0)..=clamp(hi[0], 0) {
                let n = grid.linear(i, j, k);
                if grid.occupied[n] {
                    continue;
                }
                let center = grid.cell_center(i as i64, j as i64, k as i64);
                let cmin = center - Vec3::splat(h);
                let cmax = center + Vec3::splat(h);
                if triangle_overlaps_cell(tri, &tb, cmin, cmax) {
                    grid.occupied[n] = true;
                }
            }
        }
    }
}

#[inline]
fn axis_overlaps(tmin: f64, tmax: f64, lo: f64, hi: f64) -> bool {
    if tmin == tmax {
        lo <= tmin && tmin < hi
    } else {
        tmax > lo && tmin < hi
    }
}

/// Separating-axis triangle/box test. The three box axes use the half-open
/// rule from the module docs; the normal and the nine edge-cross axes are
/// closed (touching counts as overlap).
pub fn triangle_overlaps_cell(tri: [Vec3; 3], tri_bounds: &Aabb, cmin: Vec3, cmax: Vec3) -> bool {
    for axis in 0..3 {
        if !axis_overlaps(
            tri_bounds.min[axis],
            tri_bounds.max[axis],
            cmin[axis],
            cmax[axis],
        ) {
            return false;
        }
    }

    let center = (cmin + cmax) * 0.5;
    let half = (cmax - cmin) * 0.5;
    let v = [tri[0] - center, tri[1] - center, tri[2] - center];
    let edges = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    let separated = |axis: Vec3| -> bool {
        let p0 = v[0].dot(axis);
        let p1 = v[1].dot(axis);
        let p2 = v[2].dot(axis);
        let r = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
        p0.min(p1).min(p2) > r || p0.max(p1).max(p2) < -r
    };

    let normal = edges[0].cross(edges[1]);
    if separated(normal) {
        return false;
    }
    let units = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ];
    for e in edges {
        for u in units {
            let axis = u.cross(e);
            if axis.norm_squared() > 0.0 && separated(axis) {
                return false;
            }
        }
    }
    true
}

/// Per-column index of the highest occupied cell (`-1` for empty columns).
#[derive(Debug, Clone, PartialEq)]
pub struct HeightLayer {
    dims: [usize; 2],
    top: Vec<i32>,
}

impl HeightLayer {
    /// Builds a layer from explicit column tops, `i` outermost:
    /// `top[i * q + j]`.
    pub fn from_tops(p: usize, q: usize, top: Vec<i32>) -> Result<Self> {
        if top.len() != p * q {
            return Err(Error::param("top", "length must equal p * q"));
        }
        if top.iter().any(|&t| t < -1) {
            return Err(Error::param("top", "entries must be >= -1"));
        }
        Ok(HeightLayer { dims: [p, q], top })
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    #[inline]
    pub fn top(&self, i: usize, j: usize) -> i32 {
        self.top[i * self.dims[1] + j]
    }

    pub fn tops(&self) -> &[i32] {
        &self.top
    }
}

pub fn top_height_layer(grid: &OccupancyGrid) -> HeightLayer {
    let [p, q, r] = grid.dims;
    let mut top = vec![-1i32; p * q];
    for i in 0..p {
        for j in 0..q {
            top[i * q + j] = (0..r)
                .rev()
                .find(|&k| grid.occupied[grid.linear(i, j, k)])
                .map_or(-1, |k| k as i32);
        }
    }
    HeightLayer { dims: [p, q], top }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mesh(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriangleMesh {
        TriangleMesh::from_raw(vertices, faces).unwrap().0
    }

    fn unit_square() -> TriangleMesh {
        mesh(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    #[test]
    fn unit_square_marks_one_two_by_two_layer() {
        let m = unit_square();
        let g = build_occupancy(&[&m], 0.5).unwrap();
        let cells: Vec<_> = g.occupied_cells().collect();
        // origin is -0.5 on every axis: x/y cells 1..=2, z layer 1
        assert_eq!(cells, vec![[1, 1, 1], [2, 1, 1], [1, 2, 1], [2, 2, 1]]);
    }

    #[test]
    fn small_triangle_marks_one_cell() {
        let m = mesh(
            vec![
                Vec3::new(0.1, 0.1, 0.1),
                Vec3::new(0.3, 0.1, 0.1),
                Vec3::new(0.1, 0.3, 0.2),
            ],
            vec![[0, 1, 2]],
        );
        let g = build_occupancy(&[&m], 1.0).unwrap();
        assert_eq!(g.occupied_count(), 1);
    }

    #[test]
    fn large_triangle_marks_interior_cells() {
        let m = mesh(
            vec![
                Vec3::new(0.0, 0.0, 0.25),
                Vec3::new(8.0, 0.0, 0.25),
                Vec3::new(0.0, 8.0, 0.25),
            ],
            vec![[0, 1, 2]],
        );
        let g = build_occupancy(&[&m], 1.0).unwrap();
        // x, y in [3, 4): inside the triangle, no vertex nearby
        let [i, j, k] = g.cell_of(Vec3::new(3.5, 3.5, 0.25));
        assert!(g.is_occupied(i, j, k));
        // x, y in [5, 6): beyond the hypotenuse
        let [i, j, k] = g.cell_of(Vec3::new(5.5, 5.5, 0.25));
        assert!(!g.is_occupied(i, j, k));
    }

    #[test]
    fn grid_is_padded_on_every_side() {
        let m = unit_square();
        let g = build_occupancy(&[&m], 0.5).unwrap();
        let b = g.bounds();
        let inner = m.bounds().unwrap();
        assert!(b.min.x <= inner.min.x - 0.5 && b.max.x >= inner.max.x + 0.5);
        assert!(b.min.z <= inner.min.z - 0.5 && b.max.z >= inner.max.z + 0.5);
    }

    #[test]
    fn errors() {
        let m = unit_square();
        assert!(matches!(
            build_occupancy(&[&m], 0.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert_eq!(
            build_occupancy(&[&TriangleMesh::empty()], 1.0).unwrap_err(),
            Error::EmptyMesh
        );
        assert!(matches!(
            build_occupancy_with_budget(&[&m], 0.001, 1000),
            Err(Error::CellBudgetExceeded { .. })
        ));
    }

    #[test]
    fn top_layer_takes_column_maximum() {
        // Three small triangles in one column, in z cells at heights 1.5, 4.5, 2.5.
        let mut vs = Vec::new();
        let mut fs = Vec::new();
        for z in [1.5, 4.5, 2.5] {
            let b = vs.len() as u32;
            vs.push(Vec3::new(0.2, 0.2, z));
            vs.push(Vec3::new(0.4, 0.2, z));
            vs.push(Vec3::new(0.2, 0.4, z));
            fs.push([b, b + 1, b + 2]);
        }
        let m = mesh(vs, fs);
        let g = build_occupancy(&[&m], 1.0).unwrap();
        let layer = top_height_layer(&g);
        let [i, j, _] = g.cell_of(Vec3::new(0.3, 0.3, 0.0));
        let [_, _, k] = g.cell_of(Vec3::new(0.3, 0.3, 4.5));
        assert_eq!(layer.top(i as usize, j as usize), k as i32);
        assert_eq!(layer.top(0, 0), -1);
    }
}
