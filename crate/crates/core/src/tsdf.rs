//! Sparse truncated signed distance volume, per-ray integration with
//! per-source weights and adaptive negative bandwidth, and the end-to-end
//! conflation driver.
//!
//! Along a ray `r(t) = o + t v` with first hit `t_i`, a sample at `t` gets
//! the signed distance `clamp(t_i - t, -m, m)`: positive in front of the
//! surface (outside), negative behind it. Each source contributes weight
//! `C_k` inside its band and nothing outside it. Voxels fold contributions
//! with the running weighted average `D <- (W D + w d) / (W + w)`,
//! `W <- W + w`, which is commutative, so integrating every source into one
//! volume equals averaging per-source volumes with weights `C_k`.

use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rustc_hash::FxBuildHasher;

use crate::camera::{
    fibonacci_directions, sample_camera_centers, DirectionSet, VirtualCamera,
    DEFAULT_RAYS_PER_CAMERA, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::mesh::TriangleMesh;
use crate::occupancy::{
    build_occupancy_with_budget, top_height_layer, HeightLayer, OccupancyGrid, DEFAULT_CELL_BUDGET,
};
use crate::raycast::{DepthSampleBatch, Ray, RayAccelerator, DEFAULT_SKIP_EPSILON};

/// Integer lattice coordinate of a voxel center.
pub type VoxelKey = [i32; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voxel {
    pub distance: f64,
    pub weight: f64,
}

/// Sparse voxel field. Voxel `key` sits at `origin + key * voxel_size`;
/// absent voxels have zero weight.
#[derive(Debug, Clone)]
pub struct TsdfVolume {
    voxel_size: f64,
    max_bandwidth: f64,
    origin: Vec3,
    voxels: HashMap<VoxelKey, Voxel, FxBuildHasher>,
}

impl TsdfVolume {
    pub fn new(voxel_size: f64, max_bandwidth: f64) -> Result<Self> {
        if !(voxel_size > 0.0) || !voxel_size.is_finite() {
            return Err(Error::param("voxel_size", "must be positive and finite"));
        }
        if !(max_bandwidth >= voxel_size) || !max_bandwidth.is_finite() {
            return Err(Error::param("max_bandwidth", "must be at least one voxel"));
        }
        Ok(TsdfVolume {
            voxel_size,
            max_bandwidth,
            origin: Vec3::ZERO,
            voxels: HashMap::with_hasher(FxBuildHasher),
        })
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn max_bandwidth(&self) -> f64 {
        self.max_bandwidth
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    #[inline]
    pub fn get(&self, key: VoxelKey) -> Option<Voxel> {
        self.voxels.get(&key).copied()
    }

    #[inline]
    pub fn voxel_center(&self, key: VoxelKey) -> Vec3 {
        self.origin + Vec3::new(key[0] as f64, key[1] as f64, key[2] as f64) * self.voxel_size
    }

    /// Voxel whose cell contains `p` (nearest lattice point).
    #[inline]
    pub fn key_of(&self, p: Vec3) -> VoxelKey {
        let r = (p - self.origin) / self.voxel_size;
        [
            libm::round(r.x) as i32,
            libm::round(r.y) as i32,
            libm::round(r.z) as i32,
        ]
    }

    /// Unordered iteration over stored voxels.
    pub fn iter(&self) -> impl Iterator<Item = (VoxelKey, Voxel)> + '_ {
        self.voxels.iter().map(|(k, v)| (*k, *v))
    }

    /// Stored voxels in lexicographic key order.
    pub fn sorted(&self) -> Vec<(VoxelKey, Voxel)> {
        let mut all: Vec<_> = self.iter().collect();
        all.sort_unstable_by_key(|(k, _)| *k);
        all
    }

    /// Folds one weighted observation into a voxel.
    #[inline]
    pub fn fold(&mut self, key: VoxelKey, d: f64, w: f64) {
        if !(w > 0.0) {
            return;
        }
        let v = self.voxels.entry(key).or_insert(Voxel {
            distance: 0.0,
            weight: 0.0,
        });
        let total = v.weight + w;
        v.distance = (v.weight * v.distance + w * d) / total;
        v.weight = total;
    }

    /// Overwrites a voxel. Intended for analytic fields and tests.
    pub fn set(&mut self, key: VoxelKey, voxel: Voxel) {
        if voxel.weight > 0.0 {
            self.voxels.insert(key, voxel);
        } else {
            self.voxels.remove(&key);
        }
    }

    /// Bounds of the stored voxel centers.
    pub fn bounds(&self) -> Option<Aabb> {
        if self.voxels.is_empty() {
            return None;
        }
        Some(Aabb::from_points(
            self.voxels.keys().map(|&k| self.voxel_center(k)),
        ))
    }
}

/// Empty volume; see [`TsdfVolume::new`].
pub fn new_volume(voxel_size: f64, max_bandwidth: f64) -> Result<TsdfVolume> {
    TsdfVolume::new(voxel_size, max_bandwidth)
}

/// `max(-m, min(m, t_i - t))`.
#[inline]
pub fn truncated_distance(t_hit: f64, t: f64, m: f64) -> f64 {
    (t_hit - t).min(m).max(-m)
}

/// Per-ray band around the hit at `t_hit`: `positive` in front of the
/// surface, `negative` behind it, with `0 < negative <= positive`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayBand {
    pub t_hit: f64,
    pub positive: f64,
    pub negative: f64,
}

impl RayBand {
    pub fn symmetric(t_hit: f64, m: f64) -> Self {
        RayBand {
            t_hit,
            positive: m,
            negative: m,
        }
    }

    fn validate(&self, max_bandwidth: f64) -> Result<()> {
        if !(self.negative > 0.0
            && self.negative <= self.positive
            && self.positive <= max_bandwidth)
        {
            return Err(Error::param(
                "band",
                "need 0 < negative <= positive <= max bandwidth",
            ));
        }
        if !self.t_hit.is_finite() || !(self.t_hit > 0.0) {
            return Err(Error::param(
                "band",
                "hit distance must be positive and finite",
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        let s = self.t_hit - t;
        s <= self.positive && s >= -self.negative
    }
}

/// `C` inside the (possibly asymmetric) band, 0 outside. Boundaries are
/// inclusive.
#[inline]
pub fn ray_weight(band: &RayBand, t: f64, weight: f64) -> f64 {
    if band.contains(t) {
        weight
    } else {
        0.0
    }
}

/// Negative-side bandwidth for a ray whose next surface lies at `t_next`.
///
/// Unconstrained (`m_k`) when there is no next surface or it is at least
/// `2 m_k` away; otherwise half the gap, floored at one voxel and capped at
/// `m_k`, so the band behind the first surface stops at the midpoint toward
/// the second.
pub fn adaptive_negative_band(t_hit: f64, t_next: Option<f64>, m_k: f64, voxel_size: f64) -> f64 {
    match t_next {
        Some(next) if next - t_hit < 2.0 * m_k => (0.5 * (next - t_hit)).max(voxel_size).min(m_k),
        _ => m_k,
    }
}

/// Folds one ray into the volume. Voxels are visited by stepping the ray at
/// half a voxel over `[t_hit - positive, t_hit + negative]` (clipped to
/// `t >= 0`); each distinct voxel is evaluated at the projection of its
/// center onto the ray. Returns the number of voxels updated.
pub fn integrate_ray(
    volume: &mut TsdfVolume,
    ray: &Ray,
    band: &RayBand,
    weight: f64,
) -> Result<usize> {
    band.validate(volume.max_bandwidth)?;
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::param("weight", "must be positive and finite"));
    }
    Ok(integrate_ray_unchecked(volume, ray, band, weight))
}

fn integrate_ray_unchecked(
    volume: &mut TsdfVolume,
    ray: &Ray,
    band: &RayBand,
    weight: f64,
) -> usize {
    let step = 0.5 * volume.voxel_size;
    let t0 = (band.t_hit - band.positive).max(0.0);
    let t1 = band.t_hit + band.negative;
    if t1 < t0 {
        return 0;
    }
    let steps = libm::ceil((t1 - t0) / step) as usize;
    let origin = ray.origin();
    let dir = ray.direction();
    let mut last: Option<VoxelKey> = None;
    let mut updated = 0;
    for s in 0..=steps {
        let t = (t0 + s as f64 * step).min(t1);
        let key = volume.key_of(origin + dir * t);
        if last == Some(key) {
            continue;
        }
        last = Some(key);
        let tc = (volume.voxel_center(key) - origin).dot(dir);
        if tc < 0.0 || !band.contains(tc) {
            continue;
        }
        let d = truncated_distance(band.t_hit, tc, band.positive);
        volume.fold(key, d, weight);
        updated += 1;
    }
    updated
}

/// Per-source conflation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceProfile {
    /// Index of the source in the conflation input.
    pub source: usize,
    /// Weight constant `C_k`.
    pub weight: f64,
    /// Truncation bandwidth `m_k` in meters.
    pub bandwidth: f64,
    pub note: String,
}

impl SourceProfile {
    pub fn new(source: usize, weight: f64, bandwidth: f64) -> Self {
        SourceProfile {
            source,
            weight,
            bandwidth,
            note: String::new(),
        }
    }

    pub fn validate(&self, max_bandwidth: f64) -> Result<()> {
        if !(self.weight > 0.0) || !self.weight.is_finite() {
            return Err(Error::param("weight", "source weight must be positive"));
        }
        if !(self.bandwidth > 0.0) || self.bandwidth > max_bandwidth {
            return Err(Error::param(
                "bandwidth",
                "source bandwidth must be in (0, max_bandwidth]",
            ));
        }
        Ok(())
    }
}

/// Folds every sample of a batch with the profile's weight and bandwidth.
/// Returns the number of voxel updates.
pub fn integrate_view(
    volume: &mut TsdfVolume,
    batch: &DepthSampleBatch,
    profile: &SourceProfile,
    adaptive: bool,
) -> Result<usize> {
    if batch.source != profile.source {
        return Err(Error::SourceMismatch {
            batch: batch.source,
            profile: profile.source,
        });
    }
    profile.validate(volume.max_bandwidth)?;
    let vs = volume.voxel_size;
    let mut updated = 0;
    for s in &batch.samples {
        let negative = if adaptive {
            adaptive_negative_band(s.t_hit, s.t_next, profile.bandwidth, vs)
        } else {
            profile.bandwidth
        };
        let band = RayBand {
            t_hit: s.t_hit,
            positive: profile.bandwidth,
            negative,
        };
        let ray = Ray::from_unit(batch.origin, s.direction);
        updated += integrate_ray_unchecked(volume, &ray, &band, profile.weight);
    }
    Ok(updated)
}

/// Scalar knobs of the conflation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflationParams {
    pub voxel_size: f64,
    pub max_bandwidth: f64,
    /// Coarse occupancy cell size as a multiple of `voxel_size`.
    pub coarse_cell_factor: f64,
    pub window: usize,
    pub rays_per_camera: usize,
    pub adaptive_band: bool,
    pub skip_epsilon: f64,
    pub cell_budget: u64,
}

impl Default for ConflationParams {
    fn default() -> Self {
        ConflationParams {
            voxel_size: 0.5,
            max_bandwidth: 5.0,
            coarse_cell_factor: 4.0,
            window: DEFAULT_WINDOW,
            rays_per_camera: DEFAULT_RAYS_PER_CAMERA,
            adaptive_band: true,
            skip_epsilon: DEFAULT_SKIP_EPSILON,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

impl ConflationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0) || !self.voxel_size.is_finite() {
            return Err(Error::param("voxel_size", "must be positive and finite"));
        }
        if !(self.max_bandwidth >= self.voxel_size) || !self.max_bandwidth.is_finite() {
            return Err(Error::param("max_bandwidth", "must be at least one voxel"));
        }
        if !(self.coarse_cell_factor > 0.0) || !self.coarse_cell_factor.is_finite() {
            return Err(Error::param("coarse_cell_factor", "must be positive"));
        }
        if self.window == 0 {
            return Err(Error::param("window", "must be at least one cell"));
        }
        if self.rays_per_camera == 0 {
            return Err(Error::param("rays_per_camera", "must be at least one"));
        }
        if !(self.skip_epsilon > 0.0) {
            return Err(Error::param("skip_epsilon", "must be positive"));
        }
        Ok(())
    }

    pub fn coarse_cell_size(&self) -> f64 {
        self.voxel_size * self.coarse_cell_factor
    }
}

/// One input mesh with its profile. `profile.source` must equal the
/// position of the input in the source list.
#[derive(Debug, Clone, Copy)]
pub struct SourceInput<'a> {
    pub mesh: &'a TriangleMesh,
    pub profile: &'a SourceProfile,
}

/// Occupancy, height layer, cameras and directions shared by all sources.
#[derive(Debug, Clone)]
pub struct CameraPlan {
    pub grid: OccupancyGrid,
    pub layer: HeightLayer,
    pub cameras: Vec<VirtualCamera>,
    pub directions: DirectionSet,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub cameras: usize,
    pub rays_cast: u64,
    pub rays_hit: u64,
    pub voxel_updates: u64,
}

pub struct Conflation {
    pub volume: TsdfVolume,
    pub plan: CameraPlan,
    pub stats: IntegrationStats,
}

fn validate_sources(sources: &[SourceInput<'_>], params: &ConflationParams) -> Result<Aabb> {
    params.validate()?;
    if sources.is_empty() {
        return Err(Error::NoSources);
    }
    let mut bounds = Aabb::EMPTY;
    for (k, s) in sources.iter().enumerate() {
        if s.profile.source != k {
            return Err(Error::SourceMismatch {
                batch: k,
                profile: s.profile.source,
            });
        }
        s.profile.validate(params.max_bandwidth)?;
        bounds = bounds.union(s.mesh.bounds()?);
    }
    if params.voxel_size >= bounds.diagonal() {
        return Err(Error::param(
            "voxel_size",
            "must be smaller than the scene diagonal",
        ));
    }
    Ok(bounds)
}

/// Coarse occupancy over the union of `meshes`, the height layer, and the
/// camera field placed on it.
pub fn plan_cameras(meshes: &[&TriangleMesh], params: &ConflationParams) -> Result<CameraPlan> {
    params.validate()?;
    let grid = build_occupancy_with_budget(meshes, params.coarse_cell_size(), params.cell_budget)?;
    let layer = top_height_layer(&grid);
    let cameras = sample_camera_centers(&grid, &layer, params.window)?;
    let directions = fibonacci_directions(params.rays_per_camera)?;
    Ok(CameraPlan {
        grid,
        layer,
        cameras,
        directions,
    })
}

/// Builds one accelerator per source.
pub fn build_accelerators(
    sources: &[SourceInput<'_>],
    params: &ConflationParams,
) -> Result<Vec<RayAccelerator>> {
    sources
        .iter()
        .enumerate()
        .map(|(k, s)| RayAccelerator::build(s.mesh, k)?.with_skip_epsilon(params.skip_epsilon))
        .collect()
}

const CAMERA_CHUNK: usize = 32;

/// Renders every (camera, source) pair and folds the batches into `volume`,
/// cameras in order and sources in order within each camera. With the
/// `parallel` feature, rendering runs on the current rayon pool; folding is
/// always sequential, so the volume does not depend on the thread count.
///
/// `observer` sees every batch right before it is integrated.
pub fn integrate_sources(
    volume: &mut TsdfVolume,
    sources: &[SourceInput<'_>],
    accelerators: &[RayAccelerator],
    cameras: &[VirtualCamera],
    directions: &DirectionSet,
    adaptive: bool,
    mut observer: Option<&mut dyn FnMut(&DepthSampleBatch)>,
) -> Result<IntegrationStats> {
    if accelerators.len() != sources.len() {
        return Err(Error::param(
            "accelerators",
            "need one accelerator per source",
        ));
    }
    let mut stats = IntegrationStats {
        cameras: cameras.len(),
        ..Default::default()
    };
    for (chunk_index, chunk) in cameras.chunks(CAMERA_CHUNK).enumerate() {
        let base = chunk_index * CAMERA_CHUNK;
        let batches = render_chunk(chunk, base, accelerators, directions);
        for batch in &batches {
            stats.rays_cast += directions.len() as u64;
            stats.rays_hit += batch.len() as u64;
            if let Some(obs) = observer.as_mut() {
                obs(batch);
            }
            stats.voxel_updates +=
                integrate_view(volume, batch, sources[batch.source].profile, adaptive)? as u64;
        }
    }
    Ok(stats)
}

#[cfg(feature = "parallel")]
fn render_chunk(
    chunk: &[VirtualCamera],
    base: usize,
    accelerators: &[RayAccelerator],
    directions: &DirectionSet,
) -> Vec<DepthSampleBatch> {
    use rayon::prelude::*;
    let jobs: Vec<(usize, usize)> = (0..chunk.len())
        .flat_map(|c| (0..accelerators.len()).map(move |s| (c, s)))
        .collect();
    jobs.par_iter()
        .map(|&(c, s)| accelerators[s].render_depth(&chunk[c], base + c, directions))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn render_chunk(
    chunk: &[VirtualCamera],
    base: usize,
    accelerators: &[RayAccelerator],
    directions: &DirectionSet,
) -> Vec<DepthSampleBatch> {
    let mut out = Vec::with_capacity(chunk.len() * accelerators.len());
    for (c, cam) in chunk.iter().enumerate() {
        for acc in accelerators {
            out.push(acc.render_depth(cam, base + c, directions));
        }
    }
    out
}

/// Full pipeline: union occupancy, camera field, per-(camera, source) depth
/// rendering, and weighted integration into one volume.
pub fn conflate(sources: &[SourceInput<'_>], params: &ConflationParams) -> Result<Conflation> {
    conflate_observed(sources, params, None)
}

pub fn conflate_observed(
    sources: &[SourceInput<'_>],
    params: &ConflationParams,
    observer: Option<&mut dyn FnMut(&DepthSampleBatch)>,
) -> Result<Conflation> {
    validate_sources(sources, params)?;
    let meshes: Vec<&TriangleMesh> = sources.iter().map(|s| s.mesh).collect();
    let plan = plan_cameras(&meshes, params)?;
    let accelerators = build_accelerators(sources, params)?;
    let mut volume = TsdfVolume::new(params.voxel_size, params.max_bandwidth)?;
    let stats = integrate_sources(
        &mut volume,
        sources,
        &accelerators,
        &plan.cameras,
        &plan.directions,
        params.adaptive_band,
        observer,
    )?;
    Ok(Conflation {
        volume,
        plan,
        stats,
    })
}

/// Integrates the sources from an explicit camera set instead of the
/// placement sweep. The returned stats count the given cameras.
pub fn conflate_with_cameras(
    sources: &[SourceInput<'_>],
    cameras: &[VirtualCamera],
    params: &ConflationParams,
) -> Result<(TsdfVolume, IntegrationStats)> {
    validate_sources(sources, params)?;
    let directions = fibonacci_directions(params.rays_per_camera)?;
    let accelerators = build_accelerators(sources, params)?;
    let mut volume = TsdfVolume::new(params.voxel_size, params.max_bandwidth)?;
    let stats = integrate_sources(
        &mut volume,
        sources,
        &accelerators,
        cameras,
        &directions,
        params.adaptive_band,
        None,
    )?;
    Ok((volume, stats))
}
