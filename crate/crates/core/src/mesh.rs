//! Indexed triangle meshes, bounds and area-uniform surface sampling.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};

/// Faces with less area than this are treated as degenerate and dropped.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle surface, possibly open and non-manifold.
///
/// Constructed through [`TriangleMesh::from_raw`], which enforces index
/// bounds, finite coordinates, and drops degenerate faces. Input normals are
/// carried through but never used by the pipeline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    normals: Option<Vec<Vec3>>,
}

impl TriangleMesh {
    pub fn empty() -> Self {
        TriangleMesh::default()
    }

    /// Validates raw buffers. Returns the mesh and the number of degenerate
    /// faces that were dropped (repeated index or area below
    /// [`DEGENERATE_AREA`]).
    pub fn from_raw(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<(Self, usize)> {
        if let Some(bad) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteVertex(bad));
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i as usize >= n) {
                return Err(Error::IndexOutOfRange {
                    face: fi,
                    index: index as usize,
                    vertex_count: n,
                });
            }
        }
        let before = faces.len();
        let faces: Vec<[u32; 3]> = faces
            .into_iter()
            .filter(|&[a, b, c]| {
                a != b
                    && b != c
                    && a != c
                    && triangle_area(
                        vertices[a as usize],
                        vertices[b as usize],
                        vertices[c as usize],
                    ) >= DEGENERATE_AREA
            })
            .collect();
        let dropped = before - faces.len();
        Ok((
            TriangleMesh {
                vertices,
                faces,
                normals: None,
            },
            dropped,
        ))
    }

    /// Attaches per-vertex normals. Ignored if the count does not match.
    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Self {
        if normals.len() == self.vertices.len() {
            self.normals = Some(normals);
        }
        self
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    #[inline]
    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangles(&self) -> impl ExactSizeIterator<Item = [Vec3; 3]> + '_ {
        (0..self.faces.len()).map(move |f| self.triangle(f))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        triangle_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Tight componentwise bounds over all vertices.
    pub fn bounds(&self) -> Result<Aabb> {
        if self.vertices.is_empty() || self.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok(Aabb::from_points(self.vertices.iter().copied()))
    }

    /// Returns a copy with every vertex shifted by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }

    /// Appends another mesh's geometry, re-indexing its faces.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(
            other
                .faces
                .iter()
                .map(|f| [f[0] + base, f[1] + base, f[2] + base]),
        );
        self.normals = None;
    }
}

#[inline]
pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * (b - a).cross(c - a).norm()
}

/// Points drawn area-uniformly from a mesh surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSampleSet {
    pub points: Vec<Vec3>,
    /// Face each point was drawn from, parallel to `points`.
    pub faces: Vec<u32>,
    pub seed: u64,
}

impl SurfaceSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws `count` points: a face with probability proportional to its area,
/// then a uniform point inside it. Deterministic in `seed`.
pub fn sample_surface_points(
    mesh: &TriangleMesh,
    count: usize,
    seed: u64,
) -> Result<SurfaceSampleSet> {
    sample_surface_points_stream(mesh, count, seed, 0)
}

/// As [`sample_surface_points`] with an explicit ChaCha stream, so two meshes
/// sampled with the same seed draw independent sequences.
pub fn sample_surface_points_stream(
    mesh: &TriangleMesh,
    count: usize,
    seed: u64,
    stream: u64,
) -> Result<SurfaceSampleSet> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for f in 0..mesh.face_count() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut points = Vec::with_capacity(count);
    let mut faces = Vec::with_capacity(count);
    let last = cumulative.len() - 1;
    for _ in 0..count {
        let target = rng.random::<f64>() * total;
        let face = cumulative.partition_point(|&c| c <= target).min(last);
        let [a, b, c] = mesh.triangle(face);
        let s = libm::sqrt(rng.random::<f64>());
        let r = rng.random::<f64>();
        points.push(a * (1.0 - s) + b * (s * (1.0 - r)) + c * (s * r));
        faces.push(face as u32);
    }
    Ok(SurfaceSampleSet {
        points,
        faces,
        seed,
    })
}
