//! Binned-SAH bounding volume hierarchy over one mesh's triangles.
//!
//! Used for nearest ray hits and for nearest-point queries. Triangles are
//! copied into leaf order so traversal touches contiguous memory.

use alloc::vec::Vec;

use crate::geometry::{Aabb, Vec3};
use crate::mesh::TriangleMesh;

const LEAF_SIZE: usize = 4;
const BINS: usize = 16;
const MAX_DEPTH: usize = 60;
const STACK: usize = MAX_DEPTH + 4;

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first triangle. Inner: index of the left child (right is `+ 1`).
    first: u32,
    /// Zero for inner nodes.
    count: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<[Vec3; 3]>,
    ids: Vec<u32>,
}

/// Per-ray constants for the watertight triangle test.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RayFrame {
    origin: Vec3,
    inv_dir: Vec3,
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl RayFrame {
    pub(crate) fn new(origin: Vec3, dir: Vec3) -> Self {
        let a = dir.abs();
        let kz = if a.x >= a.y && a.x >= a.z {
            0
        } else if a.y >= a.z {
            1
        } else {
            2
        };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            core::mem::swap(&mut kx, &mut ky);
        }
        RayFrame {
            origin,
            inv_dir: Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z),
            kx,
            ky,
            kz,
            sx: dir[kx] / dir[kz],
            sy: dir[ky] / dir[kz],
            sz: 1.0 / dir[kz],
        }
    }

    /// Two-sided watertight ray/triangle test. Edge functions of a shared
    /// edge are computed from identical operands in both triangles, so a ray
    /// through the edge is never rejected by both. Returns the hit distance.
    #[inline]
    pub(crate) fn intersect(&self, tri: &[Vec3; 3]) -> Option<f64> {
        let (kx, ky, kz) = (self.kx, self.ky, self.kz);
        let a = tri[0] - self.origin;
        let b = tri[1] - self.origin;
        let c = tri[2] - self.origin;
        let ax = a[kx] - self.sx * a[kz];
        let ay = a[ky] - self.sy * a[kz];
        let bx = b[kx] - self.sx * b[kz];
        let by = b[ky] - self.sy * b[kz];
        let cx = c[kx] - self.sx * c[kz];
        let cy = c[ky] - self.sy * c[kz];
        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
            return None;
        }
        let det = u + v + w;
        if det == 0.0 {
            return None;
        }
        let t = (u * self.sz * a[kz] + v * self.sz * b[kz] + w * self.sz * c[kz]) / det;
        t.is_finite().then_some(t)
    }
}

#[derive(Clone, Copy)]
struct Bin {
    bounds: Aabb,
    count: usize,
}

impl Bvh {
    /// Caller guarantees a non-empty mesh.
    pub(crate) fn build(mesh: &TriangleMesh) -> Self {
        let n = mesh.face_count();
        let mut ids: Vec<u32> = (0..n as u32).collect();
        let boxes: Vec<Aabb> = mesh.triangles().map(Aabb::from_points).collect();
        let centroids: Vec<Vec3> = boxes.iter().map(Aabb::center).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        nodes.push(Node {
            bounds: Aabb::EMPTY,
            first: 0,
            count: 0,
        });
        build_node(&mut nodes, 0, &mut ids, 0, &boxes, &centroids, 0);
        // hits are two-sided, so a canonical vertex order makes every query
        // independent of the input winding
        let tris = ids
            .iter()
            .map(|&f| {
                let mut t = mesh.triangle(f as usize);
                t.sort_by(|a, b| a.to_array().partial_cmp(&b.to_array()).unwrap());
                t
            })
            .collect();
        Bvh { nodes, tris, ids }
    }

    /// Nearest hit with `t_min < t < t_max`: `(t, face id)`.
    pub(crate) fn nearest_hit(&self, ray: &RayFrame, t_min: f64, t_max: f64) -> Option<(f64, u32)> {
        let mut best_t = t_max;
        let mut best: Option<u32> = None;
        let mut stack = [0u32; STACK];
        let mut sp = 0usize;
        self.nodes[0]
            .bounds
            .ray_entry(ray.origin, ray.inv_dir, t_min, best_t)?;
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = self.nodes[stack[sp] as usize];
            if node.count > 0 {
                let start = node.first as usize;
                for k in start..start + node.count as usize {
                    if let Some(t) = ray.intersect(&self.tris[k]) {
                        // ties resolve to the lower face id so results do not
                        // depend on leaf layout
                        if t > t_min
                            && (t < best_t
                                || (t == best_t && best.is_some_and(|b| self.ids[k] < b)))
                        {
                            best_t = t;
                            best = Some(self.ids[k]);
                        }
                    }
                }
                continue;
            }
            let l = node.first as usize;
            let r = l + 1;
            let tl = self.nodes[l]
                .bounds
                .ray_entry(ray.origin, ray.inv_dir, t_min, best_t);
            let tr = self.nodes[r]
                .bounds
                .ray_entry(ray.origin, ray.inv_dir, t_min, best_t);
            match (tl, tr) {
                (Some(a), Some(b)) => {
                    // push the far child first
                    let (near, far) = if a <= b { (l, r) } else { (r, l) };
                    stack[sp] = far as u32;
                    stack[sp + 1] = near as u32;
                    sp += 2;
                }
                (Some(_), None) => {
                    stack[sp] = l as u32;
                    sp += 1;
                }
                (None, Some(_)) => {
                    stack[sp] = r as u32;
                    sp += 1;
                }
                (None, None) => {}
            }
        }
        best.map(|f| (best_t, f))
    }

    /// Closest point on the surface to `p`: `(squared distance, face id, point)`.
    pub(crate) fn nearest_point(&self, p: Vec3) -> (f64, u32, Vec3) {
        let mut best_d2 = f64::INFINITY;
        let mut best = (0u32, p);
        let mut stack = [0u32; STACK];
        stack[0] = 0;
        let mut sp = 1usize;
        while sp > 0 {
            sp -= 1;
            let node = self.nodes[stack[sp] as usize];
            if node.bounds.distance_squared(p) > best_d2 {
                continue;
            }
            if node.count > 0 {
                let start = node.first as usize;
                for k in start..start + node.count as usize {
                    let [a, b, c] = self.tris[k];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d2 = (q - p).norm_squared();
                    if d2 < best_d2 || (d2 == best_d2 && self.ids[k] < best.0) {
                        best_d2 = d2;
                        best = (self.ids[k], q);
                    }
                }
                continue;
            }
            let l = node.first as usize;
            let r = l + 1;
            let dl = self.nodes[l].bounds.distance_squared(p);
            let dr = self.nodes[r].bounds.distance_squared(p);
            let (near, far, dn, df) = if dl <= dr {
                (l, r, dl, dr)
            } else {
                (r, l, dr, dl)
            };
            if df <= best_d2 {
                stack[sp] = far as u32;
                sp += 1;
            }
            if dn <= best_d2 {
                stack[sp] = near as u32;
                sp += 1;
            }
        }
        (best_d2, best.0, best.1)
    }

    pub(crate) fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub(crate) fn triangle_count(&self) -> usize {
        self.tris.len()
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    index: usize,
    ids: &mut [u32],
    first: usize,
    boxes: &[Aabb],
    centroids: &[Vec3],
    depth: usize,
) {
    let bounds = ids
        .iter()
        .fold(Aabb::EMPTY, |b, &f| b.union(boxes[f as usize]));
    let make_leaf = |nodes: &mut Vec<Node>| {
        nodes[index] = Node {
            bounds,
            first: first as u32,
            count: ids.len() as u32,
        };
    };
    if ids.len() <= LEAF_SIZE || depth >= MAX_DEPTH {
        make_leaf(nodes);
        return;
    }

    let cb = Aabb::from_points(ids.iter().map(|&f| centroids[f as usize]));
    let axis = cb.largest_axis();
    let lo = cb.min[axis];
    let extent = cb.max[axis] - lo;
    let mid = if extent > 0.0 {
        sah_split(ids, boxes, centroids, axis, lo, extent, &bounds)
            .unwrap_or_else(|| median_split(ids, centroids, axis))
    } else {
        // all centroids coincide
        ids.len() / 2
    };

    let left = nodes.len();
    nodes.push(Node {
        bounds: Aabb::EMPTY,
        first: 0,
        count: 0,
    });
    nodes.push(Node {
        bounds: Aabb::EMPTY,
        first: 0,
        count: 0,
    });
    nodes[index] = Node {
        bounds,
        first: left as u32,
        count: 0,
    };
    let (l, r) = ids.split_at_mut(mid);
    build_node(nodes, left, l, first, boxes, centroids, depth + 1);
    build_node(nodes, left + 1, r, first + mid, boxes, centroids, depth + 1);
}

fn bin_of(c: f64, lo: f64, extent: f64) -> usize {
    let b = ((c - lo) / extent * BINS as f64) as usize;
    b.min(BINS - 1)
}

/// Partitions `ids` at the cheapest bin boundary. `None` when splitting is
/// not cheaper than a leaf.
fn sah_split(
    ids: &mut [u32],
    boxes: &[Aabb],
    centroids: &[Vec3],
    axis: usize,
    lo: f64,
    extent: f64,
    bounds: &Aabb,
) -> Option<usize> {
    let mut bins = [Bin {
        bounds: Aabb::EMPTY,
        count: 0,
    }; BINS];
    for &f in ids.iter() {
        let b = bin_of(centroids[f as usize][axis], lo, extent);
        bins[b].count += 1;
        bins[b].bounds = bins[b].bounds.union(boxes[f as usize]);
    }
    let mut right_area = [0.0; BINS];
    let mut right_count = [0usize; BINS];
    let mut acc = Aabb::EMPTY;
    let mut cnt = 0;
    for b in (1..BINS).rev() {
        acc = acc.union(bins[b].bounds);
        cnt += bins[b].count;
        right_area[b] = acc.surface_area();
        right_count[b] = cnt;
    }
    let mut best_cost = f64::INFINITY;
    let mut best_bin = 0;
    let mut acc = Aabb::EMPTY;
    let mut cnt = 0;
    for b in 0..BINS - 1 {
        acc = acc.union(bins[b].bounds);
        cnt += bins[b].count;
        if cnt == 0 || right_count[b + 1] == 0 {
            continue;
        }
        let cost = acc.surface_area() * cnt as f64 + right_area[b + 1] * right_count[b + 1] as f64;
        if cost < best_cost {
            best_cost = cost;
            best_bin = b;
        }
    }
    let leaf_cost = bounds.surface_area() * ids.len() as f64;
    if !best_cost.is_finite() || (best_cost >= leaf_cost && ids.len() <= 4 * LEAF_SIZE) {
        return None;
    }
    let mut i = 0;
    let mut j = ids.len();
    while i < j {
        if bin_of(centroids[ids[i] as usize][axis], lo, extent) <= best_bin {
            i += 1;
        } else {
            j -= 1;
            ids.swap(i, j);
        }
    }
    (i > 0 && i < ids.len()).then_some(i)
}

fn median_split(ids: &mut [u32], centroids: &[Vec3], axis: usize) -> usize {
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    mid
}

/// Closest point to `p` on triangle `abc`, by Voronoi region classification.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
