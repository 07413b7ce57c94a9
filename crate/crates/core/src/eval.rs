//! Surface-to-surface comparison: mean distance, precision, recall and
//! F-score at a distance threshold.
//!
//! Both meshes are sampled area-uniformly with the same seed and stream, so
//! swapping result and reference swaps precision and recall exactly.

use alloc::vec::Vec;

pub use crate::bvh::closest_point_on_triangle;
use crate::bvh::Bvh;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::{sample_surface_points, TriangleMesh};

/// Default number of surface samples per mesh.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Default F-score threshold in meters.
pub const DEFAULT_TAU: f64 = 0.5;

/// Distances below this fraction of the scene diagonal are reported as zero:
/// they are below the placement accuracy of a surface sample.
pub const ON_SURFACE_TOLERANCE: f64 = 1e-9;

/// Nearest-point structure over one mesh.
#[derive(Debug, Clone)]
pub struct MeshProximity {
    bvh: Bvh,
}

impl MeshProximity {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok(MeshProximity {
            bvh: Bvh::build(mesh),
        })
    }

    /// Closest point on the mesh: `(distance, face id, point)`.
    pub fn closest(&self, p: Vec3) -> (f64, u32, Vec3) {
        let (d2, f, q) = self.bvh.nearest_point(p);
        (libm::sqrt(d2), f, q)
    }
}

/// Exact Euclidean distance from `point` to the nearest triangle.
pub fn point_to_mesh_distance(point: Vec3, mesh: &MeshProximity) -> f64 {
    mesh.closest(point).0
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Mean distance from result samples to the reference surface.
    pub mean_distance: f64,
    /// Mean distance from reference samples to the result surface.
    pub mean_distance_reverse: f64,
    /// Average of the two directed means.
    pub mean_distance_symmetric: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub tau: f64,
    pub samples: usize,
    pub seed: u64,
    pub result_vertices: usize,
    pub result_faces: usize,
    pub reference_vertices: usize,
    pub reference_faces: usize,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn harmonic_f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn snap_tolerance(a: &TriangleMesh, b: &TriangleMesh) -> Result<f64> {
    Ok(ON_SURFACE_TOLERANCE * a.bounds()?.union(b.bounds()?).diagonal())
}

/// Directed distances from `points` to `target`, snapped below `snap`.
fn distances(points: &[Vec3], target: &MeshProximity, snap: f64) -> Vec<f64> {
    let one = |p: &Vec3| {
        let d = point_to_mesh_distance(*p, target);
        if d <= snap {
            0.0
        } else {
            d
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(one).collect()
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn fraction_within(values: &[f64], tau: f64) -> f64 {
    values.iter().filter(|&&d| d <= tau).count() as f64 / values.len() as f64
}

/// Mean distance from `n_samples` area-uniform points on `result` to the
/// `reference` surface.
pub fn mean_distance(
    result: &TriangleMesh,
    reference: &TriangleMesh,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let snap = snap_tolerance(result, reference)?;
    let target = MeshProximity::new(reference)?;
    let samples = sample_surface_points(result, n_samples, seed)?;
    Ok(mean(&distances(&samples.points, &target, snap)))
}

/// Precision (result samples within `tau` of the reference), recall
/// (reference samples within `tau` of the result), their harmonic mean, and
/// the directed and symmetric mean distances.
pub fn f_score(
    result: &TriangleMesh,
    reference: &TriangleMesh,
    tau: f64,
    n_samples: usize,
    seed: u64,
) -> Result<EvalReport> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::param("tau", "must be positive"));
    }
    let snap = snap_tolerance(result, reference)?;
    let result_index = MeshProximity::new(result)?;
    let reference_index = MeshProximity::new(reference)?;
    let result_samples = sample_surface_points(result, n_samples, seed)?;
    let reference_samples = sample_surface_points(reference, n_samples, seed)?;

    let forward = distances(&result_samples.points, &reference_index, snap);
    let backward = distances(&reference_samples.points, &result_index, snap);
    let precision = fraction_within(&forward, tau);
    let recall = fraction_within(&backward, tau);
    let mean_distance = mean(&forward);
    let mean_distance_reverse = mean(&backward);
    Ok(EvalReport {
        mean_distance,
        mean_distance_reverse,
        mean_distance_symmetric: 0.5 * (mean_distance + mean_distance_reverse),
        precision,
        recall,
        f_score: harmonic_f_score(precision, recall),
        tau,
        samples: n_samples,
        seed,
        result_vertices: result.vertex_count(),
        result_faces: result.face_count(),
        reference_vertices: reference.vertex_count(),
        reference_faces: reference.face_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn square(z: f64, half: f64) -> TriangleMesh {
        TriangleMesh::from_raw(
            vec![
                Vec3::new(-half, -half, z),
                Vec3::new(half, -half, z),
                Vec3::new(half, half, z),
                Vec3::new(-half, half, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
        .0
    }

    #[test]
    fn point_above_plane() {
        let idx = MeshProximity::new(&square(0.0, 5.0)).unwrap();
        assert_eq!(point_to_mesh_distance(Vec3::new(1.0, -2.0, 3.5), &idx), 3.5);
        assert_eq!(point_to_mesh_distance(Vec3::new(1.0, -2.0, 0.0), &idx), 0.0);
    }

    #[test]
    fn f_score_edge_cases() {
        assert_eq!(harmonic_f_score(0.0, 0.0), 0.0);
        assert_eq!(harmonic_f_score(1.0, 1.0), 1.0);
        assert!((harmonic_f_score(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_meshes_score_perfectly() {
        let m = square(0.0, 5.0);
        let r = f_score(&m, &m, 0.5, 2000, 3).unwrap();
        assert_eq!((r.precision, r.recall, r.f_score), (1.0, 1.0, 1.0));
        assert_eq!(r.mean_distance, 0.0);
        assert_eq!(r.result_faces, 2);
    }

    #[test]
    fn displaced_far_beyond_tau_scores_zero() {
        let r = f_score(&square(5.0, 5.0), &square(0.0, 5.0), 0.5, 1000, 3).unwrap();
        assert_eq!(r.f_score, 0.0);
        assert!((r.mean_distance - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tau() {
        let m = square(0.0, 1.0);
        assert!(f_score(&m, &m, 0.0, 10, 1).is_err());
        assert!(f_score(&m, &TriangleMesh::empty(), 1.0, 10, 1).is_err());
    }
}
