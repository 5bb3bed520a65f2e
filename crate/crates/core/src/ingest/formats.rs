//! Point-cloud and pose file formats.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use ndarray::{Array1, Array2};
use ndarray_npy::{NpzReader, NpzWriter};
use serde::{Deserialize, Serialize};

use super::frame::{Pose, SubmapFrame};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFormat {
    KittiBin,
    Ply,
    Pcd,
    Npz,
}

impl PointFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "bin" => Some(PointFormat::KittiBin),
            "ply" => Some(PointFormat::Ply),
            "pcd" => Some(PointFormat::Pcd),
            "npz" => Some(PointFormat::Npz),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub dropped_non_finite: usize,
}

/// Reads a submap. The pose comes from the archive itself (npz) or from
/// `poses[frame_id]`.
pub fn load_submap(
    path: &Path,
    format: PointFormat,
    frame_id: usize,
    poses: Option<&[Pose]>,
) -> Result<(SubmapFrame, LoadReport)> {
    let (raw, archived) = match format {
        PointFormat::KittiBin => (read_kitti_bin(path)?, None),
        PointFormat::Ply => (read_ply(path)?, None),
        PointFormat::Pcd => (read_pcd(path)?, None),
        PointFormat::Npz => {
            let mut a = read_npz(path)?;
            (std::mem::take(&mut a.points), Some(a))
        }
    };
    let pose = match (&archived, poses) {
        (Some(a), _) => a.pose,
        (None, Some(list)) => *list.get(frame_id).ok_or(Error::MissingPose { frame_id })?,
        (None, None) => return Err(Error::MissingPose { frame_id }),
    };
    pose.validate()?;
    let before = raw.len();
    let points: Vec<[f64; 3]> = raw.into_iter().filter(|p| p.iter().all(|v| v.is_finite())).collect();
    let report = LoadReport {
        dropped_non_finite: before - points.len(),
    };
    if report.dropped_non_finite > 0 {
        log::warn!("{}: dropped {} non-finite points", path.display(), report.dropped_non_finite);
    }
    let (frame_id, trajectory_id, timestamp) = match &archived {
        Some(a) => (a.frame_id.unwrap_or(frame_id), a.trajectory_id.unwrap_or(0), a.timestamp),
        None => (frame_id, 0, None),
    };
    Ok((
        SubmapFrame {
            frame_id,
            trajectory_id,
            points,
            pose,
            timestamp,
        },
        report,
    ))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::unreadable(path, e))
}

/// Little-endian `f32` records `x y z intensity`; intensity is ignored.
pub fn read_kitti_bin(path: &Path) -> Result<Vec<[f64; 3]>> {
    let bytes = read_bytes(path)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::malformed(
            path,
            format!("{} bytes is not a whole number of 16-byte point records", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|r| {
            [
                LittleEndian::read_f32(&r[0..4]) as f64,
                LittleEndian::read_f32(&r[4..8]) as f64,
                LittleEndian::read_f32(&r[8..12]) as f64,
            ]
        })
        .collect())
}

pub fn write_kitti_bin(path: &Path, points: &[[f64; 3]]) -> Result<()> {
    let mut buf = vec![0u8; 16 * points.len()];
    for (r, p) in buf.chunks_exact_mut(16).zip(points) {
        LittleEndian::write_f32(&mut r[0..4], p[0] as f32);
        LittleEndian::write_f32(&mut r[4..8], p[1] as f32);
        LittleEndian::write_f32(&mut r[8..12], p[2] as f32);
    }
    fs::write(path, buf)?;
    Ok(())
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
    fn ply(name: &str) -> Option<Self> {
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

    fn pcd(kind: &str, size: usize) -> Option<Self> {
        Some(match (kind, size) {
            ("F", 4) => Scalar::F32,
            ("F", 8) => Scalar::F64,
            ("I", 1) => Scalar::I8,
            ("I", 2) => Scalar::I16,
            ("I", 4) => Scalar::I32,
            ("U", 1) => Scalar::U8,
            ("U", 2) => Scalar::U16,
            ("U", 4) => Scalar::U32,
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

    fn read<E: ByteOrder>(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => E::read_i16(b) as f64,
            Scalar::U16 => E::read_u16(b) as f64,
            Scalar::I32 => E::read_i32(b) as f64,
            Scalar::U32 => E::read_u32(b) as f64,
            Scalar::F32 => E::read_f32(b) as f64,
            Scalar::F64 => E::read_f64(b),
        }
    }
}

/// Byte layout of one record with named scalar fields.
struct Layout {
    fields: Vec<(String, Scalar, usize)>,
    stride: usize,
    xyz: [usize; 3],
}

impl Layout {
    fn new(path: &Path, fields: Vec<(String, Scalar, usize)>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(fields.len());
        let mut stride = 0;
        for (_, ty, count) in &fields {
            offsets.push(stride);
            stride += ty.size() * count;
        }
        let find = |name: &str| {
            fields
                .iter()
                .position(|(n, _, _)| n == name)
                .ok_or_else(|| Error::malformed(path, format!("missing mandatory field `{name}`")))
        };
        let xyz = [find("x")?, find("y")?, find("z")?];
        let fields = fields
            .into_iter()
            .zip(offsets)
            .map(|((n, t, _), off)| (n, t, off))
            .collect();
        Ok(Layout { fields, stride, xyz })
    }

    fn point<E: ByteOrder>(&self, rec: &[u8]) -> [f64; 3] {
        self.xyz.map(|i| {
            let (_, ty, off) = &self.fields[i];
            ty.read::<E>(&rec[*off..])
        })
    }

    fn decode<E: ByteOrder>(&self, path: &Path, body: &[u8], count: usize) -> Result<Vec<[f64; 3]>> {
        if body.len() < count * self.stride {
            return Err(Error::malformed(
                path,
                format!("expected {count} records of {} bytes, found {} bytes", self.stride, body.len()),
            ));
        }
        Ok(body[..count * self.stride]
            .chunks_exact(self.stride)
            .map(|r| self.point::<E>(r))
            .collect())
    }
}

/// Splits off the text header ending with the line that starts with `terminator`.
fn split_header<'a>(path: &Path, bytes: &'a [u8], terminator: &str) -> Result<(Vec<String>, &'a [u8])> {
    let mut lines = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let end = bytes[pos..].iter().position(|&c| c == b'\n').map_or(bytes.len(), |i| pos + i);
        let line = String::from_utf8_lossy(&bytes[pos..end]).trim().to_string();
        pos = (end + 1).min(bytes.len());
        let done = line.starts_with(terminator);
        lines.push(line);
        if done {
            return Ok((lines, &bytes[pos..]));
        }
    }
    Err(Error::malformed(path, format!("header has no `{terminator}` line")))
}

fn parse_ascii_rows(path: &Path, body: &[u8], count: usize, width: usize, xyz: [usize; 3]) -> Result<Vec<[f64; 3]>> {
    let text = String::from_utf8_lossy(body);
    let mut out = Vec::with_capacity(count);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()).take(count) {
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() < width {
            return Err(Error::malformed(path, format!("record `{line}` has fewer than {width} values")));
        }
        let mut p = [0.0; 3];
        for (k, &i) in xyz.iter().enumerate() {
            p[k] = match vals[i] {
                "nan" | "NaN" => f64::NAN,
                v => v
                    .parse()
                    .map_err(|_| Error::malformed(path, format!("bad number `{v}`")))?,
            };
        }
        out.push(p);
    }
    if out.len() < count {
        return Err(Error::malformed(path, format!("expected {count} records, found {}", out.len())));
    }
    Ok(out)
}

/// ASCII and binary PLY; the `vertex` element must carry scalar `x`, `y`, `z`.
pub fn read_ply(path: &Path) -> Result<Vec<[f64; 3]>> {
    let bytes = read_bytes(path)?;
    if !bytes.starts_with(b"ply") {
        return Err(Error::malformed(path, "missing `ply` magic"));
    }
    let (header, body) = split_header(path, &bytes, "end_header")?;
    let mut format = None;
    // (name, count, scalar properties, has list property)
    let mut elements: Vec<(String, usize, Vec<(String, Scalar, usize)>, bool)> = Vec::new();
    for line in &header {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", f, ..] => format = Some(f.to_string()),
            ["element", name, n] => {
                let n = n
                    .parse()
                    .map_err(|_| Error::malformed(path, format!("bad element count `{n}`")))?;
                elements.push((name.to_string(), n, Vec::new(), false));
            }
            ["property", "list", ..] => {
                if let Some(e) = elements.last_mut() {
                    e.3 = true;
                }
            }
            ["property", ty, name] => {
                let ty = Scalar::ply(ty).ok_or_else(|| Error::malformed(path, format!("unknown property type `{ty}`")))?;
                if let Some(e) = elements.last_mut() {
                    e.2.push((name.to_string(), ty, 1));
                }
            }
            _ => {}
        }
    }
    let vi = elements
        .iter()
        .position(|e| e.0 == "vertex")
        .ok_or_else(|| Error::malformed(path, "no vertex element"))?;
    if elements[vi].3 {
        return Err(Error::malformed(path, "vertex element has list properties"));
    }
    let format = format.ok_or_else(|| Error::malformed(path, "no format line"))?;
    let count = elements[vi].1;
    let props = elements[vi].2.clone();
    if format == "ascii" {
        if vi != 0 {
            return Err(Error::malformed(path, "vertex element must come first in ASCII PLY"));
        }
        let layout = Layout::new(path, props.clone())?;
        return parse_ascii_rows(path, body, count, props.len(), layout.xyz);
    }
    let mut skip = 0;
    for e in &elements[..vi] {
        if e.3 {
            return Err(Error::malformed(path, "list element precedes vertex element"));
        }
        skip += e.1 * e.2.iter().map(|p| p.1.size()).sum::<usize>();
    }
    let body = body.get(skip..).unwrap_or(&[]);
    let layout = Layout::new(path, props)?;
    match format.as_str() {
        "binary_little_endian" => layout.decode::<LittleEndian>(path, body, count),
        "binary_big_endian" => layout.decode::<BigEndian>(path, body, count),
        other => Err(Error::malformed(path, format!("unsupported PLY format `{other}`"))),
    }
}

/// Writes binary little-endian PLY with `float` x, y, z.
pub fn write_ply(path: &Path, points: &[[f64; 3]]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    )?;
    let mut rec = [0u8; 12];
    for p in points {
        for k in 0..3 {
            LittleEndian::write_f32(&mut rec[4 * k..], p[k] as f32);
        }
        w.write_all(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// ASCII and binary PCD (v0.7 header). `binary_compressed` is not supported.
pub fn read_pcd(path: &Path) -> Result<Vec<[f64; 3]>> {
    let bytes = read_bytes(path)?;
    let (header, body) = split_header(path, &bytes, "DATA")?;
    let mut names = Vec::new();
    let mut sizes = Vec::new();
    let mut types = Vec::new();
    let mut counts = Vec::new();
    let mut points = None;
    let mut width_height = (None, None);
    let mut data = String::new();
    let parse = |v: &str| -> Result<usize> { v.parse().map_err(|_| Error::malformed(path, format!("bad header value `{v}`"))) };
    for line in header.iter().filter(|l| !l.starts_with('#')) {
        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap_or("");
        let rest: Vec<&str> = tok.collect();
        match key {
            "FIELDS" => names = rest.iter().map(|s| s.to_string()).collect(),
            "SIZE" => sizes = rest.iter().map(|v| parse(v)).collect::<Result<_>>()?,
            "TYPE" => types = rest.iter().map(|s| s.to_string()).collect(),
            "COUNT" => counts = rest.iter().map(|v| parse(v)).collect::<Result<_>>()?,
            "POINTS" => points = Some(parse(rest.first().copied().unwrap_or(""))?),
            "WIDTH" => width_height.0 = Some(parse(rest.first().copied().unwrap_or(""))?),
            "HEIGHT" => width_height.1 = Some(parse(rest.first().copied().unwrap_or(""))?),
            "DATA" => data = rest.first().copied().unwrap_or("").to_string(),
            _ => {}
        }
    }
    if counts.is_empty() {
        counts = vec![1; names.len()];
    }
    if sizes.len() != names.len() || types.len() != names.len() || counts.len() != names.len() {
        return Err(Error::malformed(path, "FIELDS/SIZE/TYPE/COUNT lengths differ"));
    }
    let count = points
        .or(match width_height {
            (Some(w), Some(h)) => Some(w * h),
            _ => None,
        })
        .ok_or_else(|| Error::malformed(path, "no POINTS or WIDTH/HEIGHT"))?;
    let mut fields = Vec::with_capacity(names.len());
    for i in 0..names.len() {
        let ty = Scalar::pcd(&types[i], sizes[i])
            .ok_or_else(|| Error::malformed(path, format!("unsupported field type {}{}", types[i], sizes[i])))?;
        fields.push((names[i].clone(), ty, counts[i]));
    }
    let width: usize = counts.iter().sum();
    let layout = Layout::new(path, fields)?;
    match data.as_str() {
        "ascii" => {
            // Column index of each field's first value.
            let mut col = Vec::with_capacity(counts.len());
            let mut acc = 0;
            for c in &counts {
                col.push(acc);
                acc += c;
            }
            parse_ascii_rows(path, body, count, width, layout.xyz.map(|i| col[i]))
        }
        "binary" => layout.decode::<LittleEndian>(path, body, count),
        other => Err(Error::malformed(path, format!("unsupported PCD DATA `{other}`"))),
    }
}

/// Contents of a submap archive.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmapArchive {
    pub points: Vec<[f64; 3]>,
    pub pose: Pose,
    pub frame_id: Option<usize>,
    pub trajectory_id: Option<usize>,
    pub timestamp: Option<f64>,
}

fn npz_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Archive(format!("{}: {e}", path.display()))
}

/// Archive with `points` (N×3, f32 or f64) and `pose` (3×4); optional `ids`
/// `[frame_id, trajectory_id]` and `timestamp`.
pub fn read_npz(path: &Path) -> Result<SubmapArchive> {
    let file = fs::File::open(path).map_err(|e| Error::unreadable(path, e))?;
    let mut npz = NpzReader::new(BufReader::new(file)).map_err(|e| npz_err(path, e))?;
    let names = npz.names().map_err(|e| npz_err(path, e))?;
    let has = |k: &str| names.iter().any(|n| n == k || n == &format!("{k}.npy"));
    if !has("points") {
        return Err(Error::malformed(path, "archive has no `points` array"));
    }
    let pts: Array2<f64> = match npz.by_name::<ndarray::OwnedRepr<f64>, ndarray::Ix2>("points") {
        Ok(a) => a,
        Err(_) => npz
            .by_name::<ndarray::OwnedRepr<f32>, ndarray::Ix2>("points")
            .map_err(|e| npz_err(path, e))?
            .mapv(|v| v as f64),
    };
    if pts.ncols() != 3 {
        return Err(Error::malformed(path, format!("points has {} columns, expected 3", pts.ncols())));
    }
    if !has("pose") {
        return Err(Error::MissingPose { frame_id: 0 });
    }
    let pose_arr: Array2<f64> = match npz.by_name::<ndarray::OwnedRepr<f64>, ndarray::Ix2>("pose") {
        Ok(a) => a,
        Err(_) => npz
            .by_name::<ndarray::OwnedRepr<f32>, ndarray::Ix2>("pose")
            .map_err(|e| npz_err(path, e))?
            .mapv(|v| v as f64),
    };
    if pose_arr.dim() != (3, 4) && pose_arr.dim() != (4, 4) {
        return Err(Error::malformed(path, format!("pose has shape {:?}, expected 3×4", pose_arr.dim())));
    }
    let flat: Vec<f64> = pose_arr.rows().into_iter().take(3).flat_map(|r| r.to_vec()).collect();
    let (frame_id, trajectory_id) = if has("ids") {
        let ids: Array1<i64> = npz.by_name("ids").map_err(|e| npz_err(path, e))?;
        (ids.first().map(|&v| v as usize), ids.get(1).map(|&v| v as usize))
    } else {
        (None, None)
    };
    let timestamp = if has("timestamp") {
        let t: Array1<f64> = npz.by_name("timestamp").map_err(|e| npz_err(path, e))?;
        t.first().copied()
    } else {
        None
    };
    Ok(SubmapArchive {
        points: pts.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect(),
        pose: Pose::from_row_major(&flat),
        frame_id,
        trajectory_id,
        timestamp,
    })
}

pub fn write_npz(path: &Path, frame: &SubmapFrame) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut npz = NpzWriter::new(BufWriter::new(file));
    let pts = Array2::from_shape_vec((frame.points.len(), 3), frame.points.iter().flatten().copied().collect())
        .map_err(|e| npz_err(path, e))?;
    let pose = Array2::from_shape_vec((3, 4), frame.pose.to_row_major().to_vec()).map_err(|e| npz_err(path, e))?;
    let ids = Array1::from(vec![frame.frame_id as i64, frame.trajectory_id as i64]);
    npz.add_array("points", &pts).map_err(|e| npz_err(path, e))?;
    npz.add_array("pose", &pose).map_err(|e| npz_err(path, e))?;
    npz.add_array("ids", &ids).map_err(|e| npz_err(path, e))?;
    if let Some(t) = frame.timestamp {
        npz.add_array("timestamp", &Array1::from(vec![t])).map_err(|e| npz_err(path, e))?;
    }
    npz.finish().map_err(|e| npz_err(path, e))?;
    Ok(())
}

/// One row-major `3 × 4` transform per line, whitespace separated.
pub fn read_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = fs::read_to_string(path).map_err(|e| Error::unreadable(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::malformed(path, format!("line {}: {e}", i + 1)))?;
        if vals.len() != 12 {
            return Err(Error::malformed(path, format!("line {}: {} values, expected 12", i + 1, vals.len())));
        }
        out.push(Pose::from_row_major(&vals));
    }
    Ok(out)
}

pub fn write_poses(path: &Path, poses: &[Pose]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for p in poses {
        let row: Vec<String> = p.to_row_major().iter().map(|v| format!("{v:.9e}")).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Loads every recognised point file in `dir` in file-name order. Poses come
/// from `poses.txt` in the same directory unless the files are archives.
pub fn load_directory(dir: &Path) -> Result<Vec<SubmapFrame>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::unreadable(dir, e))?;
    let mut files: Vec<(PathBuf, PointFormat)> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| PointFormat::from_path(&p).map(|f| (p, f)))
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let pose_file = dir.join("poses.txt");
    let poses = if pose_file.exists() {
        Some(read_poses(&pose_file)?)
    } else {
        None
    };
    files
        .iter()
        .enumerate()
        .map(|(i, (p, f))| load_submap(p, *f, i, poses.as_deref()).map(|(frame, _)| frame))
        .collect()
}
