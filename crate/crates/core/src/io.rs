//! Point-cloud input and output, box-grid downsampling and PCA normals.
//!
//! Supported inputs are PLY (ascii and binary little-endian) with `x, y, z`
//! and optional `nx, ny, nz` vertex properties, and CSV with `x,y,z` or
//! `x,y,z,nx,ny,nz` rows.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use rstar::primitives::GeomWithData;
use rstar::RTree;
use thiserror::Error;

use crate::geometry::UnitVec3;

/// Default neighbourhood size for [`estimate_normals`].
pub const DEFAULT_K: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLe,
    Csv,
}

impl CloudFormat {
    pub fn name(self) -> &'static str {
        match self {
            CloudFormat::PlyAscii => "ply-ascii",
            CloudFormat::PlyBinaryLe => "ply-binary-le",
            CloudFormat::Csv => "csv",
        }
    }

    /// Guesses the format from the file contents: PLY files start with the
    /// `ply` magic line and declare their encoding in the header.
    pub fn detect(path: &Path) -> Result<Self, CloudError> {
        let bytes = fs::read(path)?;
        if !bytes.starts_with(b"ply") {
            return Ok(CloudFormat::Csv);
        }
        let header = parse_header(&bytes)?;
        Ok(match header.encoding {
            Encoding::Ascii => CloudFormat::PlyAscii,
            Encoding::BinaryLe => CloudFormat::PlyBinaryLe,
        })
    }
}

impl fmt::Display for CloudFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CloudFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [CloudFormat::PlyAscii, CloudFormat::PlyBinaryLe, CloudFormat::Csv]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown format `{s}` (expected ply-ascii, ply-binary-le or csv)"))
    }
}

/// Where in the input a parse error happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(u64),
    Offset(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Offset(o) => write!(f, "byte offset {o}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CloudError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("unsupported PLY property: {0}")]
    UnsupportedProperty(String),
    #[error("invalid point cloud: {0}")]
    Invalid(String),
}

fn parse_err(location: Location, message: impl Into<String>) -> CloudError {
    CloudError::Parse {
        location,
        message: message.into(),
    }
}

/// Points with optional per-point normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
    normals: Option<Vec<UnitVec3>>,
}

impl PointCloud {
    /// Fails on non-finite coordinates or a normal count that differs from
    /// the point count.
    pub fn new(points: Vec<[f64; 3]>, normals: Option<Vec<UnitVec3>>) -> Result<Self, CloudError> {
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(CloudError::Invalid(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(n) = &normals {
            if n.len() != points.len() {
                return Err(CloudError::Invalid(format!(
                    "{} normals for {} points",
                    n.len(),
                    points.len()
                )));
            }
        }
        Ok(Self { points, normals })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[UnitVec3]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reads a cloud in the given format.
pub fn read_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud, CloudError> {
    let bytes = fs::read(path)?;
    match format {
        CloudFormat::Csv => read_csv(&bytes),
        CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe => {
            let header = parse_header(&bytes)?;
            let declared = match header.encoding {
                Encoding::Ascii => CloudFormat::PlyAscii,
                Encoding::BinaryLe => CloudFormat::PlyBinaryLe,
            };
            if declared != format {
                return Err(parse_err(
                    Location::Line(2),
                    format!("file is {declared}, not {format}"),
                ));
            }
            read_ply_body(&bytes, &header)
        }
    }
}

/// Normals of a file: the normal columns when present, otherwise the rows of
/// a three-column CSV read as (not necessarily unit) normals.
pub fn read_normals(path: &Path, format: CloudFormat) -> Result<Vec<UnitVec3>, CloudError> {
    let cloud = read_cloud(path, format)?;
    if let Some(n) = cloud.normals {
        return Ok(n);
    }
    if format != CloudFormat::Csv {
        return Err(CloudError::Invalid("PLY file has no nx, ny, nz properties".into()));
    }
    cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            UnitVec3::new(p[0], p[1], p[2])
                .map_err(|e| parse_err(Location::Line(i as u64 + 1), format!("row is not a normal: {e}")))
        })
        .collect()
}

fn read_csv(bytes: &[u8]) -> Result<PointCloud, CloudError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(Location::Line(line), e.to_string())
        })?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if row == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let values: Vec<f64> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(Location::Line(line), format!("`{f}` is not a number")))
            })
            .collect::<Result<_, _>>()?;
        if values.len() != 3 && values.len() != 6 {
            return Err(parse_err(
                Location::Line(line),
                format!("expected 3 or 6 fields, found {}", values.len()),
            ));
        }
        if *width.get_or_insert(values.len()) != values.len() {
            return Err(parse_err(Location::Line(line), "rows mix 3 and 6 fields"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(Location::Line(line), "non-finite value"));
        }
        points.push([values[0], values[1], values[2]]);
        if values.len() == 6 {
            normals.push(
                UnitVec3::new(values[3], values[4], values[5])
                    .map_err(|e| parse_err(Location::Line(line), format!("bad normal: {e}")))?,
            );
        }
    }
    let normals = (width == Some(6)).then_some(normals);
    PointCloud::new(points, normals)
}

/// Writes `nx,ny,nz` rows under a header line.
pub fn write_normals_csv<W: Write>(out: W, normals: &[UnitVec3]) -> Result<(), CloudError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["nx", "ny", "nz"]).map_err(csv_io)?;
    for n in normals {
        w.serialize(n.to_array()).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CloudError {
    CloudError::Io(io::Error::other(e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone)]
struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    /// Byte offset of the body.
    body: usize,
    /// Number of header lines, so ascii body lines can be numbered.
    lines: u64,
}

fn parse_header(bytes: &[u8]) -> Result<Header, CloudError> {
    let mut pos = 0;
    let mut line_no = 0u64;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(len) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(parse_err(Location::Offset(pos), "header is not terminated by end_header"));
        };
        let raw = &bytes[pos..pos + len];
        pos += len + 1;
        line_no += 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_err(Location::Line(line_no), "header is not valid text"))?
            .trim();
        let words: Vec<&str> = line.split_whitespace().collect();
        let at = Location::Line(line_no);
        if line_no == 1 {
            if line != "ply" {
                return Err(parse_err(at, "missing `ply` magic"));
            }
            continue;
        }
        match words.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", kind, _version] => {
                encoding = Some(match *kind {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLe,
                    "binary_big_endian" => {
                        return Err(parse_err(at, "big-endian PLY is not supported"));
                    }
                    other => return Err(parse_err(at, format!("unknown encoding `{other}`"))),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(at, format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(at, "property before any element"))?;
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(CloudError::UnsupportedProperty(format!("{name} (list {count} {item})")));
                };
                element.properties.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(at, "property before any element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| CloudError::UnsupportedProperty(format!("{name} ({ty})")))?;
                element.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            ["end_header"] => break,
            _ => return Err(parse_err(at, format!("unrecognized header line `{line}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| parse_err(Location::Line(2), "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body: pos,
        lines: line_no,
    })
}

/// Positions of the coordinate and normal properties within a vertex.
struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
}

fn vertex_layout(e: &Element) -> Result<VertexLayout, CloudError> {
    let find = |wanted: &str| -> Result<Option<usize>, CloudError> {
        for (i, p) in e.properties.iter().enumerate() {
            match p {
                Property::Scalar { name, ty } if name == wanted => {
                    if !ty.is_float() {
                        return Err(CloudError::UnsupportedProperty(format!(
                            "{name} must be float or double, found {ty:?}"
                        )));
                    }
                    return Ok(Some(i));
                }
                Property::List { name, .. } => {
                    return Err(CloudError::UnsupportedProperty(format!("vertex list property {name}")));
                }
                _ => {}
            }
        }
        Ok(None)
    };
    let mut xyz = [0; 3];
    for (slot, name) in xyz.iter_mut().zip(["x", "y", "z"]) {
        *slot = find(name)?.ok_or_else(|| CloudError::Invalid(format!("vertex has no `{name}` property")))?;
    }
    let n = [find("nx")?, find("ny")?, find("nz")?];
    let normal = match n {
        [Some(a), Some(b), Some(c)] => Some([a, b, c]),
        [None, None, None] => None,
        _ => return Err(CloudError::Invalid("vertex has only some of nx, ny, nz".into())),
    };
    Ok(VertexLayout { xyz, normal })
}

fn read_ply_body(bytes: &[u8], header: &Header) -> Result<PointCloud, CloudError> {
    let vertex_index = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| CloudError::Invalid("PLY file has no vertex element".into()))?;
    let vertex = &header.elements[vertex_index];
    let layout = vertex_layout(vertex)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(vertex.count);

    match header.encoding {
        Encoding::Ascii => {
            let body = std::str::from_utf8(&bytes[header.body..])
                .map_err(|_| parse_err(Location::Offset(header.body), "ascii body is not valid text"))?;
            let mut lines = body
                .lines()
                .enumerate()
                .map(|(i, l)| (header.lines + 1 + i as u64, l))
                .filter(|(_, l)| !l.trim().is_empty());
            for e in &header.elements[..vertex_index] {
                for _ in 0..e.count {
                    lines
                        .next()
                        .ok_or_else(|| parse_err(Location::Line(header.lines), format!("truncated `{}` data", e.name)))?;
                }
            }
            for _ in 0..vertex.count {
                let (line_no, line) = lines
                    .next()
                    .ok_or_else(|| parse_err(Location::Line(header.lines), "fewer vertices than declared"))?;
                let values: Vec<f64> = line
                    .split_whitespace()
                    .map(|w| {
                        w.parse::<f64>()
                            .map_err(|_| parse_err(Location::Line(line_no), format!("`{w}` is not a number")))
                    })
                    .collect::<Result<_, _>>()?;
                if values.len() != vertex.properties.len() {
                    return Err(parse_err(
                        Location::Line(line_no),
                        format!("expected {} values, found {}", vertex.properties.len(), values.len()),
                    ));
                }
                rows.push(values);
            }
        }
        Encoding::BinaryLe => {
            let mut pos = header.body;
            let take = |pos: &mut usize, n: usize| -> Result<&[u8], CloudError> {
                let slice = bytes
                    .get(*pos..*pos + n)
                    .ok_or_else(|| parse_err(Location::Offset(*pos), "unexpected end of binary data"))?;
                *pos += n;
                Ok(slice)
            };
            for e in &header.elements[..vertex_index] {
                for _ in 0..e.count {
                    for p in &e.properties {
                        match p {
                            Property::Scalar { ty, .. } => {
                                take(&mut pos, ty.size())?;
                            }
                            Property::List { count, item, .. } => {
                                let n = count.read_le(take(&mut pos, count.size())?);
                                take(&mut pos, n as usize * item.size())?;
                            }
                        }
                    }
                }
            }
            for _ in 0..vertex.count {
                let mut values = Vec::with_capacity(vertex.properties.len());
                for p in &vertex.properties {
                    let Property::Scalar { ty, .. } = p else {
                        unreachable!("vertex lists are rejected by vertex_layout");
                    };
                    values.push(ty.read_le(take(&mut pos, ty.size())?));
                }
                rows.push(values);
            }
        }
    }

    let points: Vec<[f64; 3]> = rows
        .iter()
        .map(|r| [r[layout.xyz[0]], r[layout.xyz[1]], r[layout.xyz[2]]])
        .collect();
    let normals = layout
        .normal
        .map(|idx| {
            rows.iter()
                .enumerate()
                .map(|(i, r)| {
                    UnitVec3::new(r[idx[0]], r[idx[1]], r[idx[2]])
                        .map_err(|e| CloudError::Invalid(format!("vertex {i} has a bad normal: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    PointCloud::new(points, normals)
}

/// Writes `x y z [nx ny nz]` as double properties.
pub fn write_ply<W: Write>(out: W, cloud: &PointCloud, format: CloudFormat) -> Result<(), CloudError> {
    let encoding = match format {
        CloudFormat::PlyAscii => "ascii",
        CloudFormat::PlyBinaryLe => "binary_little_endian",
        CloudFormat::Csv => return Err(CloudError::Invalid("write_ply needs a PLY format".into())),
    };
    let mut w = BufWriter::new(out);
    writeln!(w, "ply\nformat {encoding} 1.0\nelement vertex {}", cloud.len())?;
    let mut names = vec!["x", "y", "z"];
    if cloud.normals.is_some() {
        names.extend(["nx", "ny", "nz"]);
    }
    for n in &names {
        writeln!(w, "property double {n}")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        let mut row: Vec<f64> = p.to_vec();
        if let Some(n) = &cloud.normals {
            row.extend(n[i].to_array());
        }
        if format == CloudFormat::PlyAscii {
            // Display prints the shortest representation that parses back exactly.
            let text: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{}", text.join(" "))?;
        } else {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Replaces the points of each occupied voxel of side `grid_step` by their
/// centroid.
///
/// Normals are averaged after flipping them into the half-space of the
/// voxel's first normal, so that opposite signs of one surface do not cancel.
/// A voxel whose normals still cancel (mean norm below `1e-9`) is dropped.
/// Output voxels are ordered by their integer grid coordinates.
///
/// # Panics
/// If `grid_step` is not positive and finite.
pub fn box_grid_downsample(c: &PointCloud, grid_step: f64) -> PointCloud {
    assert!(grid_step > 0.0 && grid_step.is_finite(), "grid step must be positive");
    struct Acc {
        sum: Vector3<f64>,
        normal: Vector3<f64>,
        reference: Option<Vector3<f64>>,
        count: usize,
    }
    let mut voxels: BTreeMap<[i64; 3], Acc> = BTreeMap::new();
    for (i, p) in c.points.iter().enumerate() {
        let key = p.map(|x| (x / grid_step).floor() as i64);
        let acc = voxels.entry(key).or_insert(Acc {
            sum: Vector3::zeros(),
            normal: Vector3::zeros(),
            reference: None,
            count: 0,
        });
        acc.sum += Vector3::from(*p);
        acc.count += 1;
        if let Some(n) = &c.normals {
            let n = n[i].to_vector();
            let r = *acc.reference.get_or_insert(n);
            acc.normal += if n.dot(&r) < 0.0 { -n } else { n };
        }
    }
    let mut points = Vec::with_capacity(voxels.len());
    let mut normals = Vec::with_capacity(voxels.len());
    for acc in voxels.values() {
        let centroid = acc.sum / acc.count as f64;
        if c.normals.is_some() {
            let mean = acc.normal / acc.count as f64;
            if mean.norm() < 1e-9 {
                continue;
            }
            normals.push(UnitVec3::from_vector(&mean).expect("mean normal is not degenerate"));
        }
        points.push([centroid.x, centroid.y, centroid.z]);
    }
    PointCloud {
        points,
        normals: c.normals.is_some().then_some(normals),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    /// Points whose two smallest covariance eigenvalues agree within `1e-12`,
    /// so the plane normal is ill-defined.
    pub degenerate: Vec<usize>,
}

/// Normal of every point from the covariance of its `k` nearest neighbours
/// (the point itself included).
///
/// The normal is the eigenvector of the smallest eigenvalue; its sign is
/// arbitrary.
pub fn estimate_normals(c: &PointCloud, k: usize) -> Result<NormalEstimate, CloudError> {
    if k < 3 {
        return Err(CloudError::Invalid(format!("k = {k}, need at least 3 neighbours")));
    }
    if c.len() <= k {
        return Err(CloudError::Invalid(format!("{} points, need more than k = {k}", c.len())));
    }
    let tree = RTree::bulk_load(
        c.points
            .iter()
            .enumerate()
            .map(|(i, p)| GeomWithData::new(*p, i))
            .collect(),
    );
    let fitted: Vec<(UnitVec3, bool)> = c
        .points
        .par_iter()
        .map(|p| {
            let nbrs: Vec<Vector3<f64>> = tree
                .nearest_neighbor_iter(p)
                .take(k)
                .map(|g| Vector3::from(*g.geom()))
                .collect();
            plane_normal(&nbrs)
        })
        .collect();
    let degenerate = fitted
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.1.then_some(i))
        .collect();
    Ok(NormalEstimate {
        cloud: PointCloud {
            points: c.points.clone(),
            normals: Some(fitted.into_iter().map(|f| f.0).collect()),
        },
        degenerate,
    })
}

/// Least-variance direction of a point set, and whether it is ambiguous.
fn plane_normal(pts: &[Vector3<f64>]) -> (UnitVec3, bool) {
    let n = pts.len() as f64;
    let mean = pts.iter().sum::<Vector3<f64>>() / n;
    let cov = pts
        .iter()
        .map(|p| (p - mean) * (p - mean).transpose())
        .sum::<Matrix3<f64>>()
        / n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let normal = eig.eigenvectors.column(order[0]).into_owned();
    let degenerate = eig.eigenvalues[order[1]] - eig.eigenvalues[order[0]] <= 1e-12;
    (
        UnitVec3::from_vector(&normal).expect("eigenvectors are unit"),
        degenerate,
    )
}
