//! PLY (ASCII and binary little-endian) and OBJ triangle mesh files, plus
//! point cloud and volume dumps for debugging.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use meshconflate_core::tsdf::TsdfVolume;
use meshconflate_core::{TriangleMesh, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum MeshIoError {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed body: {0}")]
    MalformedBody(String),
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = MeshIoError> = std::result::Result<T, E>;

/// A loaded mesh and the number of degenerate faces dropped while loading.
#[derive(Debug, Clone)]
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    pub dropped_faces: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Loads a PLY or OBJ file, chosen by extension.
pub fn load_mesh(path: &Path) -> Result<LoadedMesh> {
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => MeshIoError::NotFound(path.to_path_buf()),
        _ => MeshIoError::Io(e),
    })?;
    let mut reader = BufReader::new(file);
    let (vertices, faces) = match extension(path).as_str() {
        "ply" => read_ply(&mut reader)?,
        "obj" => read_obj(&mut reader)?,
        other => {
            return Err(MeshIoError::UnsupportedFormat(format!(
                "extension '{other}'"
            )))
        }
    };
    build_mesh(vertices, faces)
}

fn build_mesh(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<LoadedMesh> {
    let (mesh, dropped_faces) = TriangleMesh::from_raw(vertices, faces)
        .map_err(|e| MeshIoError::MalformedBody(e.to_string()))?;
    if mesh.is_empty() {
        return Err(MeshIoError::EmptyMesh);
    }
    if dropped_faces > 0 {
        log::warn!("dropped {dropped_faces} degenerate faces");
    }
    Ok(LoadedMesh {
        mesh,
        dropped_faces,
    })
}

/// Saves by extension: `.ply` as binary little-endian with double vertices,
/// `.obj` as text.
pub fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    match extension(path).as_str() {
        "ply" => save_ply(mesh, path, PlyEncoding::BinaryLittleEndian),
        "obj" => {
            let mut w = BufWriter::new(File::create(path)?);
            write_obj(mesh, &mut w)?;
            w.flush()?;
            Ok(())
        }
        other => Err(MeshIoError::UnsupportedFormat(format!(
            "extension '{other}'"
        ))),
    }
}

pub fn save_ply(mesh: &TriangleMesh, path: &Path, encoding: PlyEncoding) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ply(mesh, &mut w, encoding)?;
    w.flush()?;
    Ok(())
}

pub fn write_ply<W: Write>(
    mesh: &TriangleMesh,
    w: &mut W,
    encoding: PlyEncoding,
) -> io::Result<()> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {format} 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "element face {}", mesh.face_count())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    match encoding {
        PlyEncoding::Ascii => {
            for v in mesh.vertices() {
                writeln!(w, "{:?} {:?} {:?}", v.x, v.y, v.z)?;
            }
            for f in mesh.faces() {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            for v in mesh.vertices() {
                for c in v.to_array() {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
            for f in mesh.faces() {
                w.write_all(&[3u8])?;
                for &i in f {
                    w.write_all(&(i as i32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_obj<W: Write>(mesh: &TriangleMesh, w: &mut W) -> io::Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// Serializes a mesh to binary PLY bytes.
pub fn mesh_to_ply_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::new();
    write_ply(mesh, &mut out, PlyEncoding::BinaryLittleEndian).expect("writing to memory");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n, _) | Property::List(n, _, _) => n,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

fn header_err(msg: impl Into<String>) -> MeshIoError {
    MeshIoError::MalformedHeader(msg.into())
}

fn body_err(msg: impl Into<String>) -> MeshIoError {
    MeshIoError::MalformedBody(msg.into())
}

fn read_header<R: BufRead>(r: &mut R) -> Result<(PlyEncoding, Vec<Element>)> {
    let mut line = String::new();
    let mut next_line = |r: &mut R| -> Result<String> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(header_err("unexpected end of file in header"));
        }
        Ok(line.trim().to_string())
    };
    if next_line(r)? != "ply" {
        return Err(MeshIoError::UnsupportedFormat("missing 'ply' magic".into()));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(r)?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            [] => continue,
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => {
                        return Err(MeshIoError::UnsupportedFormat(format!(
                            "PLY format '{other}'"
                        )))
                    }
                });
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| header_err(format!("bad element count '{count}'")))?,
                properties: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| header_err("property before element"))?;
                let ct = Scalar::parse(ct).ok_or_else(|| header_err(format!("bad type '{ct}'")))?;
                let it = Scalar::parse(it).ok_or_else(|| header_err(format!("bad type '{it}'")))?;
                el.properties.push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| header_err("property before element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| header_err(format!("bad type '{ty}'")))?;
                el.properties.push(Property::Scalar(name.to_string(), ty));
            }
            _ => return Err(header_err(format!("unrecognized line '{l}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| header_err("missing format line"))?;
    Ok((encoding, elements))
}

/// One parsed element record: scalar values and list values in property order.
enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

trait RecordSource {
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
}

struct AsciiSource<R> {
    reader: R,
    tokens: std::vec::IntoIter<String>,
}

impl<R: BufRead> AsciiSource<R> {
    fn token(&mut self) -> Result<String> {
        loop {
            if let Some(t) = self.tokens.next() {
                return Ok(t);
            }
            let mut line = String::new();
            if self.reader.read_line(&mut line)? == 0 {
                return Err(body_err("unexpected end of file"));
            }
            self.tokens = line
                .split_whitespace()
                .map(str::to_string)
                .collect::<Vec<_>>()
                .into_iter();
        }
    }
}

impl<R: BufRead> RecordSource for AsciiSource<R> {
    fn scalar(&mut self, _ty: Scalar) -> Result<f64> {
        let t = self.token()?;
        t.parse::<f64>()
            .map_err(|_| body_err(format!("bad number '{t}'")))
    }
}

struct BinarySource<R> {
    reader: R,
}

impl<R: Read> RecordSource for BinarySource<R> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let mut buf = [0u8; 8];
        self.reader
            .read_exact(&mut buf[..ty.size()])
            .map_err(|e| match e.kind() {
                io::ErrorKind::UnexpectedEof => body_err("unexpected end of file"),
                _ => MeshIoError::Io(e),
            })?;
        Ok(ty.decode(&buf))
    }
}

fn read_record(src: &mut dyn RecordSource, props: &[Property], out: &mut Vec<Value>) -> Result<()> {
    out.clear();
    for p in props {
        match *p {
            Property::Scalar(_, ty) => out.push(Value::Scalar(src.scalar(ty)?)),
            Property::List(_, ct, it) => {
                let n = src.scalar(ct)?;
                if !(n >= 0.0) || n.fract() != 0.0 {
                    return Err(body_err(format!("bad list length {n}")));
                }
                let items = (0..n as usize)
                    .map(|_| src.scalar(it))
                    .collect::<Result<Vec<_>>>()?;
                out.push(Value::List(items));
            }
        }
    }
    Ok(())
}

fn read_ply<R: BufRead>(r: &mut R) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let (encoding, elements) = read_header(r)?;
    let vertex_el = elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| header_err("no vertex element"))?;
    let axis = |n: &str| {
        vertex_el
            .properties
            .iter()
            .position(|p| matches!(p, Property::Scalar(name, _) if name == n))
            .ok_or_else(|| header_err(format!("vertex element lacks scalar '{n}'")))
    };
    let xyz = [axis("x")?, axis("y")?, axis("z")?];
    let face_index = elements.iter().find(|e| e.name == "face").map(|f| {
        f.properties
            .iter()
            .position(|p| {
                matches!(p, Property::List(..))
                    && matches!(p.name(), "vertex_indices" | "vertex_index")
            })
            .ok_or_else(|| header_err("face element lacks a vertex_indices list"))
    });
    let face_index = face_index.transpose()?;

    let mut src: Box<dyn RecordSource + '_> = match encoding {
        PlyEncoding::Ascii => Box::new(AsciiSource {
            reader: r,
            tokens: Vec::new().into_iter(),
        }),
        PlyEncoding::BinaryLittleEndian => Box::new(BinarySource { reader: r }),
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut record = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            read_record(src.as_mut(), &el.properties, &mut record)?;
            if el.name == "vertex" {
                let c = xyz.map(|i| match record[i] {
                    Value::Scalar(v) => v,
                    Value::List(_) => unreachable!(),
                });
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            } else if el.name == "face" {
                if let Some(Value::List(idx)) = face_index.map(|i| &record[i]) {
                    push_polygon(idx, &mut faces)?;
                }
            }
        }
    }
    Ok((vertices, faces))
}

// range is checked once all vertices are known
fn push_polygon(idx: &[f64], faces: &mut Vec<[u32; 3]>) -> Result<()> {
    if idx.len() < 3 {
        return Err(body_err(format!("face with {} indices", idx.len())));
    }
    let mut ids = Vec::with_capacity(idx.len());
    for &i in idx {
        if !(i >= 0.0) || i.fract() != 0.0 || i > u32::MAX as f64 {
            return Err(body_err(format!("bad face index {i}")));
        }
        ids.push(i as u32);
    }
    fan(&ids, faces);
    Ok(())
}

fn fan(ids: &[u32], faces: &mut Vec<[u32; 3]>) {
    for k in 1..ids.len() - 1 {
        faces.push([ids[0], ids[k], ids[k + 1]]);
    }
}

fn read_obj<R: BufRead>(r: &mut R) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| body_err(format!("line {}: bad vertex", n + 1)))?;
                if c.len() != 3 {
                    return Err(body_err(format!(
                        "line {}: vertex needs 3 coordinates",
                        n + 1
                    )));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut ids = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| body_err(format!("line {}: bad face index '{t}'", n + 1)))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else {
                        vertices.len() as i64 + i
                    };
                    if i == 0 || resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(body_err(format!(
                            "line {}: face index {i} out of range",
                            n + 1
                        )));
                    }
                    ids.push(resolved as u32);
                }
                if ids.len() < 3 {
                    return Err(body_err(format!(
                        "line {}: face with {} indices",
                        n + 1,
                        ids.len()
                    )));
                }
                fan(&ids, &mut faces);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

/// Writes points as a binary PLY point cloud (double coordinates).
pub fn save_point_cloud(points: &[Vec3], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", points.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "end_header")?;
    for p in points {
        for c in p.to_array() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the vertex element of a PLY file, ignoring any faces.
pub fn load_point_cloud(path: &Path) -> Result<Vec<Vec3>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => MeshIoError::NotFound(path.to_path_buf()),
        _ => MeshIoError::Io(e),
    })?;
    Ok(read_ply(&mut BufReader::new(file))?.0)
}

/// Text dump of the volume, one `i j k D W` line per voxel in key order.
pub fn save_volume_dump(volume: &TsdfVolume, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# voxel_size {:?}", volume.voxel_size())?;
    for (k, v) in volume.sorted() {
        writeln!(
            w,
            "{} {} {} {:?} {:?}",
            k[0], k[1], k[2], v.distance, v.weight
        )?;
    }
    w.flush()?;
    Ok(())
}
