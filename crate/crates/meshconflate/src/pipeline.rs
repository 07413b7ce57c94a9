//! Config-driven runs of the conflation, camera export and evaluation
//! commands. Each run reports per-stage counts and wall times through `log`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};

use meshconflate_core::eval::{f_score, EvalReport};
use meshconflate_core::extract::marching_cubes;
use meshconflate_core::raycast::DepthSampleBatch;
use meshconflate_core::tsdf::{
    build_accelerators, integrate_sources, plan_cameras, SourceInput, SourceProfile, TsdfVolume,
};
use meshconflate_core::{TriangleMesh, Vec3};

use crate::config::ConflationConfig;
use crate::io::{load_mesh, save_mesh, save_point_cloud, save_volume_dump};

#[derive(Debug, Clone, Copy)]
pub struct StageTime {
    pub name: &'static str,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct ConflateSummary {
    pub sources: usize,
    pub occupied_cells: usize,
    pub cameras: usize,
    pub rays_cast: u64,
    pub rays_hit: u64,
    pub stored_voxels: usize,
    pub vertices: usize,
    pub faces: usize,
    pub stages: Vec<StageTime>,
    pub output: Option<PathBuf>,
    pub evaluation: Option<EvalReport>,
}

struct Stopwatch {
    stages: Vec<StageTime>,
}

impl Stopwatch {
    fn time<T>(&mut self, name: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        log::info!("{name}: {:.3} s", elapsed.as_secs_f64());
        self.stages.push(StageTime { name, elapsed });
        out
    }
}

fn load_sources(cfg: &ConflationConfig) -> Result<Vec<TriangleMesh>> {
    cfg.sources
        .iter()
        .map(|s| {
            let loaded = load_mesh(&s.path)
                .with_context(|| format!("loading source {}", s.path.display()))?;
            log::info!(
                "source {}: {} vertices, {} faces, {} degenerate dropped",
                s.path.display(),
                loaded.mesh.vertex_count(),
                loaded.mesh.face_count(),
                loaded.dropped_faces
            );
            Ok(loaded.mesh)
        })
        .collect()
}

/// The conflated volume and mesh of a validated config, without writing
/// anything.
pub struct ConflateOutput {
    pub volume: TsdfVolume,
    pub mesh: TriangleMesh,
    pub summary: ConflateSummary,
    pub camera_centers: Vec<Vec3>,
    pub occupied_centers: Vec<Vec3>,
    pub hit_points: Vec<Vec3>,
}

pub fn conflate_config(cfg: &ConflationConfig) -> Result<ConflateOutput> {
    cfg.validate()?;
    let mut sw = Stopwatch { stages: Vec::new() };
    let meshes = sw.time("load", || load_sources(cfg))?;
    let profiles: Vec<SourceProfile> = cfg.profiles();
    let sources: Vec<SourceInput<'_>> = meshes
        .iter()
        .zip(&profiles)
        .map(|(mesh, profile)| SourceInput { mesh, profile })
        .collect();
    let params = cfg.params();

    let mesh_refs: Vec<&TriangleMesh> = meshes.iter().collect();
    let plan = sw.time("cameras", || plan_cameras(&mesh_refs, &params))?;
    log::info!(
        "occupancy: {} of {} coarse cells occupied; {} cameras, {} rays each",
        plan.grid.occupied_count(),
        plan.grid.dims().iter().product::<usize>(),
        plan.cameras.len(),
        plan.directions.len()
    );
    if plan.cameras.is_empty() {
        bail!("camera placement produced no cameras");
    }
    let accelerators = sw.time("bvh", || build_accelerators(&sources, &params))?;

    let mut volume = TsdfVolume::new(params.voxel_size, params.max_bandwidth)?;
    let want_hits = cfg.debug.hit_points.is_some();
    let mut hit_points = Vec::new();
    let mut collect = |b: &DepthSampleBatch| hit_points.extend(b.hit_points());
    let observer: Option<&mut dyn FnMut(&DepthSampleBatch)> =
        if want_hits { Some(&mut collect) } else { None };
    let stats = sw.time("integrate", || {
        integrate_sources(
            &mut volume,
            &sources,
            &accelerators,
            &plan.cameras,
            &plan.directions,
            params.adaptive_band,
            observer,
        )
    })?;
    log::info!(
        "integration: {} rays cast, {} hit, {} voxel updates, {} voxels stored",
        stats.rays_cast,
        stats.rays_hit,
        stats.voxel_updates,
        volume.len()
    );
    let mesh = sw.time("extract", || marching_cubes(&volume));
    log::info!(
        "extraction: {} vertices, {} faces",
        mesh.vertex_count(),
        mesh.face_count()
    );

    let summary = ConflateSummary {
        sources: sources.len(),
        occupied_cells: plan.grid.occupied_count(),
        cameras: plan.cameras.len(),
        rays_cast: stats.rays_cast,
        rays_hit: stats.rays_hit,
        stored_voxels: volume.len(),
        vertices: mesh.vertex_count(),
        faces: mesh.face_count(),
        stages: sw.stages,
        output: cfg.output.clone(),
        evaluation: None,
    };
    Ok(ConflateOutput {
        camera_centers: plan.cameras.iter().map(|c| c.center).collect(),
        occupied_centers: plan.grid.occupied_centers(),
        volume,
        mesh,
        summary,
        hit_points,
    })
}

/// Runs the config end to end and writes the mesh, debug exports and the
/// optional evaluation report.
pub fn run_conflate(cfg: &ConflationConfig) -> Result<ConflateSummary> {
    let out = conflate_config(cfg)?;
    let mut summary = out.summary;
    let output = cfg
        .output
        .as_deref()
        .context("no output path (set `output` or pass --output)")?;
    if out.mesh.is_empty() {
        bail!("extraction produced an empty mesh");
    }
    save_mesh(&out.mesh, output).with_context(|| format!("writing {}", output.display()))?;
    log::info!("wrote {}", output.display());

    let d = &cfg.debug;
    if let Some(p) = &d.cameras {
        save_point_cloud(&out.camera_centers, p)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &d.occupancy {
        save_point_cloud(&out.occupied_centers, p)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &d.hit_points {
        save_point_cloud(&out.hit_points, p).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &d.volume {
        save_volume_dump(&out.volume, p).with_context(|| format!("writing {}", p.display()))?;
    }

    if let Some(e) = &cfg.evaluation {
        let reference = load_mesh(&e.reference)
            .with_context(|| format!("loading reference {}", e.reference.display()))?
            .mesh;
        let report = f_score(&out.mesh, &reference, e.tau, e.samples, cfg.seed)?;
        if let Some(p) = &e.report {
            std::fs::write(p, report_text(&report))
                .with_context(|| format!("writing {}", p.display()))?;
        }
        summary.evaluation = Some(report);
    }
    Ok(summary)
}

/// Camera centers of a config's scene, without ray casting.
pub fn camera_centers(cfg: &ConflationConfig) -> Result<Vec<Vec3>> {
    cfg.validate()?;
    let meshes = load_sources(cfg)?;
    let refs: Vec<&TriangleMesh> = meshes.iter().collect();
    let plan = plan_cameras(&refs, &cfg.params())?;
    if plan.grid.occupied_count() == 0 || plan.cameras.is_empty() {
        bail!("scene has no occupied cells, so no cameras can be placed");
    }
    log::info!("{} cameras", plan.cameras.len());
    Ok(plan.cameras.iter().map(|c| c.center).collect())
}

pub fn run_cameras(cfg: &ConflationConfig, out: &Path) -> Result<usize> {
    let centers = camera_centers(cfg)?;
    save_point_cloud(&centers, out).with_context(|| format!("writing {}", out.display()))?;
    Ok(centers.len())
}

pub fn run_evaluate(
    result: &Path,
    reference: &Path,
    tau: f64,
    samples: usize,
    seed: u64,
) -> Result<EvalReport> {
    let r = load_mesh(result).with_context(|| format!("loading {}", result.display()))?;
    let g = load_mesh(reference).with_context(|| format!("loading {}", reference.display()))?;
    Ok(f_score(&r.mesh, &g.mesh, tau, samples, seed)?)
}

/// `key = value` lines.
pub fn report_text(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mean_distance = {}", r.mean_distance);
    let _ = writeln!(s, "mean_distance_reverse = {}", r.mean_distance_reverse);
    let _ = writeln!(s, "mean_distance_symmetric = {}", r.mean_distance_symmetric);
    let _ = writeln!(s, "precision = {}", r.precision);
    let _ = writeln!(s, "recall = {}", r.recall);
    let _ = writeln!(s, "f_score = {}", r.f_score);
    let _ = writeln!(s, "tau = {}", r.tau);
    let _ = writeln!(s, "samples = {}", r.samples);
    let _ = writeln!(s, "seed = {}", r.seed);
    let _ = writeln!(s, "result_vertices = {}", r.result_vertices);
    let _ = writeln!(s, "result_faces = {}", r.result_faces);
    let _ = writeln!(s, "reference_vertices = {}", r.reference_vertices);
    let _ = writeln!(s, "reference_faces = {}", r.reference_faces);
    s
}

/// One row: mean distance, F-score, vertex and face counts.
pub fn table_row(name: &str, r: &EvalReport) -> String {
    format!(
        "{:<12} {:>10} {:>8} {:>10} {:>10}\n{:<12} {:>10.3} {:>8.3} {:>10} {:>10}",
        "method",
        "mean (m)",
        "F",
        "vertices",
        "faces",
        name,
        r.mean_distance,
        r.f_score,
        r.result_vertices,
        r.result_faces
    )
}
