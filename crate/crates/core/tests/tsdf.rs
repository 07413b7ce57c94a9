mod common;

use std::collections::HashMap;

use common::{cuboid, plane, terrain};
use meshconflate_core::camera::{fibonacci_directions, VirtualCamera};
use meshconflate_core::raycast::{build_accelerator, DepthSample, DepthSampleBatch, Ray};
use meshconflate_core::tsdf::{
    adaptive_negative_band, conflate, integrate_ray, integrate_view, ray_weight,
    truncated_distance, ConflationParams, RayBand, SourceInput, SourceProfile, TsdfVolume,
    VoxelKey,
};
use meshconflate_core::Vec3;
use proptest::prelude::*;

const VOXEL: f64 = 0.2;
const M_MAX: f64 = 1.0;

/// Batches of two sources (a bumpy ground and a box) seen from a few cameras.
fn batches(rays: usize) -> (Vec<DepthSampleBatch>, Vec<SourceProfile>) {
    let ground = terrain(4.0, 8);
    let block = cuboid(Vec3::new(-1.0, -1.0, -0.5), Vec3::new(1.0, 0.5, 1.5));
    let accs = [
        build_accelerator(&ground, 0).unwrap(),
        build_accelerator(&block, 1).unwrap(),
    ];
    let dirs = fibonacci_directions(rays).unwrap();
    let cams = [
        Vec3::new(-2.0, -2.0, 3.0),
        Vec3::new(2.5, 0.0, 2.5),
        Vec3::new(0.0, 2.0, 3.5),
    ];
    let mut out = Vec::new();
    for (c, &center) in cams.iter().enumerate() {
        for acc in &accs {
            out.push(acc.render_depth(&VirtualCamera::at(center), c, &dirs));
        }
    }
    let profiles = vec![
        SourceProfile::new(0, 1.0, M_MAX),
        SourceProfile::new(1, 2.5, 0.6),
    ];
    (out, profiles)
}

fn integrate_all(
    order: &[usize],
    all: &[DepthSampleBatch],
    profiles: &[SourceProfile],
    adaptive: bool,
) -> TsdfVolume {
    let mut v = TsdfVolume::new(VOXEL, M_MAX).unwrap();
    for &k in order {
        integrate_view(&mut v, &all[k], &profiles[all[k].source], adaptive).unwrap();
    }
    v
}

fn single_ray_batch(batch: &DepthSampleBatch, s: &DepthSample) -> DepthSampleBatch {
    DepthSampleBatch {
        camera: batch.camera,
        origin: batch.origin,
        source: batch.source,
        samples: vec![*s],
    }
}

#[test]
fn final_distance_is_the_weighted_mean_of_recorded_contributions() {
    let (all, profiles) = batches(300);
    let fused = integrate_all(&(0..all.len()).collect::<Vec<_>>(), &all, &profiles, true);
    // each ray alone, into a fresh volume, records its own (d, w) per voxel
    let mut sums: HashMap<VoxelKey, (f64, f64)> = HashMap::new();
    for b in &all {
        for s in &b.samples {
            let mut alone = TsdfVolume::new(VOXEL, M_MAX).unwrap();
            integrate_view(
                &mut alone,
                &single_ray_batch(b, s),
                &profiles[b.source],
                true,
            )
            .unwrap();
            for (k, v) in alone.iter() {
                let e = sums.entry(k).or_default();
                e.0 += v.weight * v.distance;
                e.1 += v.weight;
            }
        }
    }
    assert_eq!(sums.len(), fused.len());
    for (k, (wd, w)) in sums {
        let v = fused.get(k).unwrap();
        assert!((v.weight - w).abs() <= 1e-9 * w);
        assert!((v.distance - wd / w).abs() <= 1e-9 * M_MAX, "{k:?}");
    }
}

#[test]
fn stored_voxels_are_bounded_and_weighted() {
    let (all, profiles) = batches(400);
    for adaptive in [true, false] {
        let v = integrate_all(
            &(0..all.len()).collect::<Vec<_>>(),
            &all,
            &profiles,
            adaptive,
        );
        assert!(!v.is_empty());
        for (_, x) in v.iter() {
            assert!(x.weight > 0.0 && x.distance.abs() <= M_MAX);
        }
    }
}

fn single_ray(
    t_hit: f64,
    t_next: Option<f64>,
    m: f64,
    adaptive: bool,
) -> (Ray, RayBand, TsdfVolume) {
    let ray = Ray::new(Vec3::new(0.03, -0.07, 5.0), Vec3::new(0.3, 0.2, -1.0)).unwrap();
    let negative = if adaptive {
        adaptive_negative_band(t_hit, t_next, m, VOXEL)
    } else {
        m
    };
    let band = RayBand {
        t_hit,
        positive: m,
        negative,
    };
    let mut v = TsdfVolume::new(VOXEL, M_MAX.max(m)).unwrap();
    integrate_ray(&mut v, &ray, &band, 1.0).unwrap();
    (ray, band, v)
}

fn along(ray: &Ray, v: &TsdfVolume, k: VoxelKey) -> f64 {
    (v.voxel_center(k) - ray.origin()).dot(ray.direction())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn view_and_source_order_do_not_matter(seed in any::<u64>()) {
        let (all, profiles) = batches(150);
        let mut order: Vec<usize> = (0..all.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = integrate_all(&(0..all.len()).collect::<Vec<_>>(), &all, &profiles, true).sorted();
        let b = integrate_all(&order, &all, &profiles, true).sorted();
        prop_assert_eq!(a.len(), b.len());
        for ((ka, va), (kb, vb)) in a.iter().zip(&b) {
            prop_assert_eq!(ka, kb);
            prop_assert_eq!(va.weight, vb.weight);
            let scale = va.distance.abs().max(vb.distance.abs()).max(VOXEL);
            prop_assert!((va.distance - vb.distance).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn sign_follows_traversal_order(t_hit in 1.0..4.0f64, m in 0.2..1.0f64) {
        let (ray, band, v) = single_ray(t_hit, None, m, true);
        prop_assert!(!v.is_empty());
        for (k, x) in v.iter() {
            let t = along(&ray, &v, k);
            prop_assert!(band.contains(t));
            if t < t_hit { prop_assert!(x.distance >= 0.0); }
            if t > t_hit { prop_assert!(x.distance <= 0.0); }
            prop_assert_eq!(x.distance, truncated_distance(t_hit, t, m));
        }
    }

    #[test]
    fn adaptive_band_stays_short_of_the_midpoint(t_hit in 1.0..3.0f64, gap in (2.0 * VOXEL)..3.0f64, m in 0.2..1.0f64) {
        let (ray, _, v) = single_ray(t_hit, Some(t_hit + gap), m, true);
        let mid = t_hit + gap / 2.0;
        for (k, x) in v.iter() {
            let t = along(&ray, &v, k);
            prop_assert!(!(t > mid + 1e-12 && t <= t_hit + gap && x.distance < 0.0), "t {} mid {}", t, mid);
        }
    }

    #[test]
    fn symmetric_band_is_the_plain_box_weight(t_hit in 1.0..4.0f64, m in 0.2..1.0f64, t in 0.0..6.0f64) {
        let band = RayBand::symmetric(t_hit, m);
        let expected = if (t_hit - t).abs() <= m { 2.0 } else { 0.0 };
        prop_assert_eq!(ray_weight(&band, t, 2.0), expected);
        let (ray, _, v) = single_ray(t_hit, Some(t_hit + 0.5), m, false);
        for (k, _) in v.iter() {
            prop_assert!((t_hit - along(&ray, &v, k)).abs() <= m);
        }
    }
}

#[test]
fn duplicate_sources_keep_the_zero_level_set() {
    let ground = plane(0.13, 3.0, 2);
    let params = ConflationParams {
        voxel_size: 0.25,
        max_bandwidth: 1.0,
        rays_per_camera: 500,
        ..Default::default()
    };
    let one = SourceProfile::new(0, 1.0, 1.0);
    let a = conflate(
        &[SourceInput {
            mesh: &ground,
            profile: &one,
        }],
        &params,
    )
    .unwrap();
    let p0 = SourceProfile::new(0, 3.0, 1.0);
    let p1 = SourceProfile::new(1, 0.5, 1.0);
    let b = conflate(
        &[
            SourceInput {
                mesh: &ground,
                profile: &p0,
            },
            SourceInput {
                mesh: &ground,
                profile: &p1,
            },
        ],
        &params,
    )
    .unwrap();
    for (k, x) in a.volume.iter() {
        let y = b.volume.get(k).unwrap();
        assert!((x.distance - y.distance).abs() <= 1e-12);
        assert!((y.weight - 3.5 * x.weight).abs() <= 1e-9 * y.weight);
    }
    assert_eq!(a.volume.len(), b.volume.len());
}
