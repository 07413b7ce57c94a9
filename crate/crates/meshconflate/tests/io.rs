mod common;

use std::fs;

use common::{cube, plane};
use meshconflate::io::{
    load_mesh, load_point_cloud, save_mesh, save_ply, save_point_cloud, save_volume_dump,
    MeshIoError, PlyEncoding,
};
use meshconflate_core::tsdf::{TsdfVolume, Voxel};
use meshconflate_core::{TriangleMesh, Vec3};
use proptest::prelude::*;
use tempfile::tempdir;

const TRIANGLE_PLY: &str = "ply
format ascii 1.0
comment one triangle
element vertex 3
property float x
property float y
property float z
property uchar red
element face 1
property list uchar int vertex_indices
end_header
0 0 0 255
1 0 0 0
0 1 0.5 7
3 0 1 2
";

#[test]
fn minimal_ascii_ply() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("tri.ply");
    fs::write(&p, TRIANGLE_PLY).unwrap();
    let m = load_mesh(&p).unwrap();
    assert_eq!(
        (m.mesh.vertex_count(), m.mesh.face_count(), m.dropped_faces),
        (3, 1, 0)
    );
    assert_eq!(m.mesh.vertices()[2], Vec3::new(0.0, 1.0, 0.5));
}

#[test]
fn out_of_range_index_is_a_body_error() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("bad.ply");
    fs::write(&p, TRIANGLE_PLY.replace("3 0 1 2", "3 0 1 3")).unwrap();
    assert!(matches!(load_mesh(&p), Err(MeshIoError::MalformedBody(_))));
}

#[test]
fn broken_header_and_truncated_body() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("h.ply");
    fs::write(
        &p,
        TRIANGLE_PLY.replace("element vertex 3", "element vertex three"),
    )
    .unwrap();
    assert!(matches!(
        load_mesh(&p),
        Err(MeshIoError::MalformedHeader(_))
    ));
    fs::write(
        &p,
        TRIANGLE_PLY
            .replace("end_header\n", "")
            .lines()
            .take(5)
            .collect::<Vec<_>>()
            .join("\n"),
    )
    .unwrap();
    assert!(matches!(
        load_mesh(&p),
        Err(MeshIoError::MalformedHeader(_))
    ));
    // readable files in formats outside the supported subset
    fs::write(
        &p,
        TRIANGLE_PLY.replace("format ascii", "format binary_big_endian"),
    )
    .unwrap();
    assert!(matches!(
        load_mesh(&p),
        Err(MeshIoError::UnsupportedFormat(_))
    ));
    fs::write(&p, "solid\n").unwrap();
    assert!(matches!(
        load_mesh(&p),
        Err(MeshIoError::UnsupportedFormat(_))
    ));
    fs::write(&p, TRIANGLE_PLY.replace("3 0 1 2\n", "")).unwrap();
    assert!(matches!(load_mesh(&p), Err(MeshIoError::MalformedBody(_))));
}

#[test]
fn obj_cube_with_quads_and_texture_indices() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("cube.obj");
    let mut s = String::from("# cube\no box\n");
    for c in 0..8 {
        s += &format!("v {} {} {}\n", c & 1, (c >> 1) & 1, (c >> 2) & 1);
    }
    s += "vt 0 0\nvn 0 0 1\n";
    for q in [
        [1, 3, 4, 2],
        [5, 6, 8, 7],
        [1, 2, 6, 5],
        [3, 7, 8, 4],
        [1, 5, 7, 3],
        [2, 4, 8, 6],
    ] {
        s += &format!("f {}/1/1 {}/1/1 {}/1/1 {}/1/1\n", q[0], q[1], q[2], q[3]);
    }
    fs::write(&p, s).unwrap();
    let m = load_mesh(&p).unwrap().mesh;
    assert_eq!((m.vertex_count(), m.face_count()), (8, 12));
    assert!((m.total_area() - 6.0).abs() < 1e-12);
}

#[test]
fn obj_negative_indices() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("neg.obj");
    fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
    let m = load_mesh(&p).unwrap().mesh;
    assert_eq!(m.faces(), &[[0, 1, 2]]);
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("c.ply");
    let m = cube(Vec3::new(0.1, -1.0 / 3.0, 1e-7), std::f64::consts::PI);
    save_mesh(&m, &p).unwrap();
    let back = load_mesh(&p).unwrap().mesh;
    assert_eq!(back.faces(), m.faces());
    for (a, b) in back.vertices().iter().zip(m.vertices()) {
        assert_eq!(
            a.to_array().map(f64::to_bits),
            b.to_array().map(f64::to_bits)
        );
    }
}

#[test]
fn ascii_and_obj_round_trips() {
    let dir = tempdir().unwrap();
    let m = plane(0.123456789, -2.7, -1.1, 2.7, 1.3, 3);
    let a = dir.path().join("a.ply");
    save_ply(&m, &a, PlyEncoding::Ascii).unwrap();
    let o = dir.path().join("a.obj");
    save_mesh(&m, &o).unwrap();
    for p in [a, o] {
        let back = load_mesh(&p).unwrap().mesh;
        assert_eq!(back.faces(), m.faces());
        for (x, y) in back.vertices().iter().zip(m.vertices()) {
            assert!(x.distance(*y) <= 1e-6);
        }
    }
}

#[test]
fn missing_unsupported_empty_and_unwritable() {
    let dir = tempdir().unwrap();
    assert!(matches!(
        load_mesh(&dir.path().join("none.ply")),
        Err(MeshIoError::NotFound(_))
    ));
    let stl = dir.path().join("x.stl");
    fs::write(&stl, "solid x\nendsolid x\n").unwrap();
    assert!(matches!(
        load_mesh(&stl),
        Err(MeshIoError::UnsupportedFormat(_))
    ));
    let empty = dir.path().join("e.obj");
    fs::write(&empty, "# nothing\n").unwrap();
    assert!(matches!(load_mesh(&empty), Err(MeshIoError::EmptyMesh)));
    let m = plane(0.0, 0.0, 0.0, 1.0, 1.0, 1);
    assert!(matches!(
        save_mesh(&m, &dir.path().join("no/such/dir/m.ply")),
        Err(MeshIoError::Io(_))
    ));
    assert!(matches!(
        save_mesh(&m, &dir.path().join("m.stl")),
        Err(MeshIoError::UnsupportedFormat(_))
    ));
}

#[test]
fn degenerate_faces_are_dropped_and_counted() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("d.obj");
    fs::write(
        &p,
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 3\nf 1 1 2\nf 1 2 4\n",
    )
    .unwrap();
    let m = load_mesh(&p).unwrap();
    assert_eq!((m.mesh.face_count(), m.dropped_faces), (1, 2));
}

#[test]
fn point_cloud_and_volume_dump() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("pts.ply");
    let pts = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-0.5, 0.25, 1e-3)];
    save_point_cloud(&pts, &p).unwrap();
    assert_eq!(load_point_cloud(&p).unwrap(), pts);

    let mut v = TsdfVolume::new(0.5, 1.0).unwrap();
    v.set(
        [1, -2, 3],
        Voxel {
            distance: -0.25,
            weight: 2.0,
        },
    );
    v.set(
        [0, 0, 0],
        Voxel {
            distance: 0.5,
            weight: 1.0,
        },
    );
    let d = dir.path().join("vol.txt");
    save_volume_dump(&v, &d).unwrap();
    let text = fs::read_to_string(&d).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.contains(&vec![1.0, -2.0, 3.0, -0.25, 2.0]));
}

fn arbitrary_mesh() -> impl Strategy<Value = TriangleMesh> {
    prop::collection::vec(prop::array::uniform3(-1e6..1e6f64), 3..40).prop_flat_map(|pts| {
        let n = pts.len() as u32;
        prop::collection::vec(prop::array::uniform3(0..n), 1..60).prop_map(move |faces| {
            let v = pts.iter().map(|&[x, y, z]| Vec3::new(x, y, z)).collect();
            TriangleMesh::from_raw(v, faces).unwrap().0
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_writer_round_trips_exactly(m in arbitrary_mesh()) {
        prop_assume!(!m.is_empty());
        let dir = tempdir().unwrap();
        let bin = dir.path().join("m.ply");
        let ascii = dir.path().join("a.ply");
        let obj = dir.path().join("m.obj");
        save_mesh(&m, &bin).unwrap();
        save_ply(&m, &ascii, PlyEncoding::Ascii).unwrap();
        save_mesh(&m, &obj).unwrap();
        for p in [bin, ascii, obj] {
            let back = load_mesh(&p).unwrap();
            prop_assert_eq!(back.dropped_faces, 0);
            prop_assert_eq!(back.mesh.faces(), m.faces());
            prop_assert_eq!(back.mesh.vertices(), m.vertices());
        }
    }
}
