//! Per-source ray acceleration and depth rendering from virtual cameras.
//!
//! Hits are orientation-agnostic: front and back faces both count, and the
//! sign of the distance field later comes from traversal order along the ray.

use alloc::vec::Vec;

use crate::bvh::{Bvh, RayFrame};
use crate::camera::{DirectionSet, VirtualCamera};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::mesh::TriangleMesh;

/// Hits closer than this to the ray origin are ignored.
pub const T_MIN: f64 = 1e-6;

/// Default gap skipped past a previous hit when looking for the next surface.
pub const DEFAULT_SKIP_EPSILON: f64 = 1e-4;

/// `r(t) = origin + t * direction` for `t >= 0`, with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`; fails on a zero or non-finite direction.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::param("origin", "must be finite"));
        }
        let direction = direction.normalized().ok_or(Error::param(
            "direction",
            "must be a non-zero finite vector",
        ))?;
        Ok(Ray { origin, direction })
    }

    /// Trusts the caller that `direction` is unit length.
    #[inline]
    pub(crate) fn from_unit(origin: Vec3, direction: Vec3) -> Self {
        Ray { origin, direction }
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: u32,
    pub source: usize,
}

/// Bounding volume hierarchy over one source mesh.
#[derive(Debug, Clone)]
pub struct RayAccelerator {
    bvh: Bvh,
    source: usize,
    skip_epsilon: f64,
}

impl RayAccelerator {
    pub fn build(mesh: &TriangleMesh, source: usize) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok(RayAccelerator {
            bvh: Bvh::build(mesh),
            source,
            skip_epsilon: DEFAULT_SKIP_EPSILON,
        })
    }

    pub fn with_skip_epsilon(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::param("skip_epsilon", "must be positive"));
        }
        self.skip_epsilon = eps;
        Ok(self)
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn skip_epsilon(&self) -> f64 {
        self.skip_epsilon
    }

    pub fn bounds(&self) -> Aabb {
        self.bvh.bounds()
    }

    pub fn triangle_count(&self) -> usize {
        self.bvh.triangle_count()
    }

    /// Nearest intersection with `t > T_MIN`.
    pub fn first_hit(&self, ray: &Ray) -> Option<RayHit> {
        self.hit_beyond(&RayFrame::new(ray.origin, ray.direction), T_MIN)
    }

    /// Nearest intersection with `t > t_prev + skip_epsilon`.
    pub fn next_hit_after(&self, ray: &Ray, t_prev: f64) -> Option<RayHit> {
        self.hit_beyond(
            &RayFrame::new(ray.origin, ray.direction),
            t_prev + self.skip_epsilon,
        )
    }

    #[inline]
    fn hit_beyond(&self, frame: &RayFrame, t_min: f64) -> Option<RayHit> {
        self.bvh
            .nearest_hit(frame, t_min, f64::INFINITY)
            .map(|(t, triangle)| RayHit {
                t,
                triangle,
                source: self.source,
            })
    }

    /// Closest surface point to `p`: `(distance, face id, point)`.
    pub fn closest_point(&self, p: Vec3) -> (f64, u32, Vec3) {
        let (d2, face, q) = self.bvh.nearest_point(p);
        (libm::sqrt(d2), face, q)
    }

    /// Casts one ray per direction from `camera`. Misses are omitted; every
    /// recorded ray also carries the next surface behind its first hit.
    pub fn render_depth(
        &self,
        camera: &VirtualCamera,
        camera_index: usize,
        dirs: &DirectionSet,
    ) -> DepthSampleBatch {
        let origin = camera.center;
        let samples = dirs
            .directions()
            .iter()
            .enumerate()
            .filter_map(|(k, &dir)| {
                let frame = RayFrame::new(origin, dir);
                let first = self.hit_beyond(&frame, T_MIN)?;
                let next = self.hit_beyond(&frame, first.t + self.skip_epsilon);
                Some(DepthSample {
                    direction_index: k as u32,
                    direction: dir,
                    t_hit: first.t,
                    t_next: next.map(|h| h.t),
                })
            })
            .collect();
        DepthSampleBatch {
            camera: camera_index,
            origin,
            source: self.source,
            samples,
        }
    }
}

/// Convenience wrapper over [`RayAccelerator::build`].
pub fn build_accelerator(mesh: &TriangleMesh, source: usize) -> Result<RayAccelerator> {
    RayAccelerator::build(mesh, source)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub direction_index: u32,
    pub direction: Vec3,
    pub t_hit: f64,
    /// Next surface along the same ray, strictly beyond `t_hit + skip`.
    pub t_next: Option<f64>,
}

/// Depth samples of one camera against one source.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSampleBatch {
    pub camera: usize,
    pub origin: Vec3,
    pub source: usize,
    pub samples: Vec<DepthSample>,
}

impl DepthSampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn hit_points(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.samples
            .iter()
            .map(move |s| self.origin + s.direction * s.t_hit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn plane(z: f64, half: f64, flip: bool) -> TriangleMesh {
        let v = vec![
            Vec3::new(-half, -half, z),
            Vec3::new(half, -half, z),
            Vec3::new(half, half, z),
            Vec3::new(-half, half, z),
        ];
        let f = if flip {
            vec![[0, 2, 1], [0, 3, 2]]
        } else {
            vec![[0, 1, 2], [0, 2, 3]]
        };
        TriangleMesh::from_raw(v, f).unwrap().0
    }

    fn slab(flip_top: bool, flip_bottom: bool) -> TriangleMesh {
        let mut m = plane(0.0, 10.0, flip_top);
        m.append(&plane(-1.0, 10.0, flip_bottom));
        m
    }

    #[test]
    fn axis_aligned_plane_hit() {
        let acc = build_accelerator(&plane(0.0, 10.0, false), 0).unwrap();
        let down = Ray::new(Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(acc.first_hit(&down).unwrap().t, 5.0);
        let up = Ray::new(Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(acc.first_hit(&up).is_none());
    }

    #[test]
    fn slab_first_and_next_hit_ignore_winding() {
        let ray = Ray::new(Vec3::new(0.3, -0.2, 5.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
        for (a, b) in [(false, false), (true, false), (false, true), (true, true)] {
            let acc = build_accelerator(&slab(a, b), 0).unwrap();
            let first = acc.first_hit(&ray).unwrap();
            assert_eq!(first.t, 5.0);
            let next = acc.next_hit_after(&ray, first.t).unwrap();
            assert_eq!(next.t, 6.0);
            assert!(acc.next_hit_after(&ray, next.t).is_none());
        }
    }

    #[test]
    fn single_plane_has_no_next_hit() {
        let acc = build_accelerator(&plane(0.0, 10.0, false), 0).unwrap();
        let ray = Ray::new(Vec3::new(1.0, 1.0, 2.0), Vec3::new(0.1, 0.0, -1.0)).unwrap();
        let first = acc.first_hit(&ray).unwrap();
        assert!(acc.next_hit_after(&ray, first.t).is_none());
    }

    #[test]
    fn empty_direction_set_gives_empty_batch() {
        let acc = build_accelerator(&plane(0.0, 10.0, false), 3).unwrap();
        let cam = VirtualCamera {
            center: Vec3::new(0.0, 0.0, 1.0),
            spawn: [0, 0, 0],
            cell: [0, 0, 1],
        };
        let batch = acc.render_depth(&cam, 0, &DirectionSet::empty());
        assert!(batch.is_empty());
        assert_eq!(batch.source, 3);
    }

    #[test]
    fn empty_mesh_is_rejected() {
        assert_eq!(
            build_accelerator(&TriangleMesh::empty(), 0).unwrap_err(),
            Error::EmptyMesh
        );
    }

    #[test]
    fn ray_normalizes_direction() {
        let r = Ray::new(Vec3::ZERO, Vec3::new(0.0, 3.0, 4.0)).unwrap();
        assert!((r.direction().norm() - 1.0).abs() < 1e-12);
        assert!(Ray::new(Vec3::ZERO, Vec3::ZERO).is_err());
    }
}
