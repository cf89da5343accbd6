//! Binary sinogram and volume files, phantom descriptions and text outputs.
//!
//! Both binary formats are little-endian:
//!
//! ```text
//! TCTS  u32 version=1  u32 n_phi  u32 n_theta  u32 n_r  f64 r_max
//!       f64[n_theta] polar nodes  f64[n_theta] polar weights
//!       u8[n_phi·n_theta] mask  f64[n_phi·n_theta·n_r] data (r fastest)
//! TCTV  u32 version=1  u32 dim  f64 spacing  f64[3] origin
//!       f32[dim³] data (z fastest)
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{QuadratureRule, RadialGrid, TransducerGrid};
use crate::metrics::{Axis, LineProfile};
use crate::phantom::{defrise_phantom, Ellipsoid, Phantom};
use crate::sinogram::{ScanMask, Sinogram};
use crate::volume::Volume;

const SINOGRAM_MAGIC: &[u8; 4] = b"TCTS";
const VOLUME_MAGIC: &[u8; 4] = b"TCTV";
const VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                format!(
                    "truncated: needed {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.buf.len()
                )
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let bytes = self.take(n.checked_mul(8).ok_or("size overflow")?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> std::result::Result<(), String> {
        if self.take(4)? != magic {
            return Err(format!("bad magic, expected {}", String::from_utf8_lossy(magic)));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        Ok(())
    }

    fn finish(&self) -> std::result::Result<(), String> {
        if self.pos != self.buf.len() {
            return Err(format!("{} trailing bytes", self.buf.len() - self.pos));
        }
        Ok(())
    }
}

pub fn encode_sinogram(s: &Sinogram) -> Vec<u8> {
    let (n_phi, n_theta, n_r) = (s.n_phi(), s.n_theta(), s.n_r());
    let mut out = Vec::with_capacity(28 + 16 * n_theta + n_phi * n_theta + 8 * s.data.len());
    out.extend_from_slice(SINOGRAM_MAGIC);
    for v in [VERSION, n_phi as u32, n_theta as u32, n_r as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&s.radial.r_max.to_le_bytes());
    for v in s.grid.theta_rule.nodes.iter().chain(&s.grid.theta_rule.weights) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(s.mask.active.iter().map(|&a| a as u8));
    for v in &s.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_sinogram(bytes: &[u8], path: &Path) -> Result<Sinogram> {
    let mut rd = Reader { buf: bytes, pos: 0 };
    let fail = |e: String| format_err(path, e);
    rd.header(SINOGRAM_MAGIC).map_err(fail)?;
    let n_phi = rd.u32().map_err(fail)? as usize;
    let n_theta = rd.u32().map_err(fail)? as usize;
    let n_r = rd.u32().map_err(fail)? as usize;
    let r_max = rd.f64().map_err(fail)?;
    let nodes = rd.f64s(n_theta).map_err(fail)?;
    let weights = rd.f64s(n_theta).map_err(fail)?;
    let cells = n_phi.checked_mul(n_theta).ok_or_else(|| fail("size overflow".into()))?;
    let mask_bytes = rd.take(cells).map_err(fail)?;
    if let Some(b) = mask_bytes.iter().find(|&&b| b > 1) {
        return Err(fail(format!("mask byte {b} is neither 0 nor 1")));
    }
    let len = cells.checked_mul(n_r).ok_or_else(|| fail("size overflow".into()))?;
    let data = rd.f64s(len).map_err(fail)?;
    rd.finish().map_err(fail)?;

    let wrap = |e: Error| fail(e.to_string());
    let rule = QuadratureRule::from_parts(0.0, PI, nodes, weights).map_err(wrap)?;
    let grid = TransducerGrid::from_polar_rule(n_phi, rule).map_err(wrap)?;
    let radial = RadialGrid::new(n_r, r_max).map_err(wrap)?;
    let mask = ScanMask::new(n_phi, n_theta, mask_bytes.iter().map(|&b| b == 1).collect()).map_err(wrap)?;
    Ok(Sinogram {
        grid,
        radial,
        data,
        mask,
    })
}

pub fn write_sinogram(path: &Path, s: &Sinogram) -> Result<()> {
    write_bytes(path, &encode_sinogram(s))
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    decode_sinogram(&read_bytes(path)?, path)
}

/// Voxel values are stored as `f32`.
pub fn encode_volume(v: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(44 + 4 * v.data.len());
    out.extend_from_slice(VOLUME_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(v.dim as u32).to_le_bytes());
    out.extend_from_slice(&v.spacing.to_le_bytes());
    for o in v.origin {
        out.extend_from_slice(&o.to_le_bytes());
    }
    for &x in &v.data {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

pub fn decode_volume(bytes: &[u8], path: &Path) -> Result<Volume> {
    let mut rd = Reader { buf: bytes, pos: 0 };
    let fail = |e: String| format_err(path, e);
    rd.header(VOLUME_MAGIC).map_err(fail)?;
    let dim = rd.u32().map_err(fail)? as usize;
    if dim == 0 {
        return Err(fail("zero volume dimension".into()));
    }
    let spacing = rd.f64().map_err(fail)?;
    let origin = [
        rd.f64().map_err(fail)?,
        rd.f64().map_err(fail)?,
        rd.f64().map_err(fail)?,
    ];
    let n = dim
        .checked_mul(dim)
        .and_then(|d| d.checked_mul(dim))
        .and_then(|d| d.checked_mul(4))
        .ok_or_else(|| fail("size overflow".into()))?;
    let data = rd
        .take(n)
        .map_err(fail)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    rd.finish().map_err(fail)?;
    Ok(Volume {
        dim,
        spacing,
        origin,
        data,
    })
}

pub fn write_volume(path: &Path, v: &Volume) -> Result<()> {
    write_bytes(path, &encode_volume(v))
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    decode_volume(&read_bytes(path)?, path)
}

/// Parses a JSON array of `{center, semiaxes, amplitude}` objects.
pub fn parse_phantom_json(text: &str, path: &Path) -> Result<Phantom> {
    let ellipsoids: Vec<Ellipsoid> = serde_json::from_str(text).map_err(|e| format_err(path, e.to_string()))?;
    Phantom::new(ellipsoids).map_err(|e| format_err(path, e.to_string()))
}

pub fn phantom_to_json(ph: &Phantom) -> String {
    serde_json::to_string_pretty(ph.ellipsoids()).expect("ellipsoids serialize")
}

pub fn read_phantom(path: &Path) -> Result<Phantom> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_phantom_json(&text, path)
}

pub fn write_phantom(path: &Path, ph: &Phantom) -> Result<()> {
    write_bytes(path, phantom_to_json(ph).as_bytes())
}

fn parse_numbers(list: &str, what: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number '{s}' in {what} spec")))
        })
        .collect()
}

/// Resolves a built-in phantom name, or reads a JSON file otherwise.
///
/// Built-ins: `defrise`, `ball:cx,cy,cz,radius` and
/// `ellipsoid:cx,cy,cz,ex,ey,ez[,amplitude]`.
pub fn load_phantom(spec: &str) -> Result<Phantom> {
    if spec == "defrise" {
        return Ok(defrise_phantom());
    }
    if let Some(rest) = spec.strip_prefix("ball:") {
        let v = parse_numbers(rest, "ball")?;
        if v.len() != 4 {
            return Err(Error::invalid(format!("ball spec needs 4 numbers, got {}", v.len())));
        }
        return Phantom::new(vec![Ellipsoid::ball([v[0], v[1], v[2]], v[3])?]);
    }
    if let Some(rest) = spec.strip_prefix("ellipsoid:") {
        let v = parse_numbers(rest, "ellipsoid")?;
        let amplitude = match v.len() {
            6 => 1.0,
            7 => v[6],
            n => return Err(Error::invalid(format!("ellipsoid spec needs 6 or 7 numbers, got {n}"))),
        };
        return Phantom::new(vec![Ellipsoid::new([v[0], v[1], v[2]], [v[3], v[4], v[5]], amplitude)?]);
    }
    read_phantom(Path::new(spec))
}

/// `x` with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn profile_csv(p: &LineProfile) -> String {
    let mut out = format!("{},value\n", p.axis);
    for (c, v) in p.coords.iter().zip(&p.values) {
        out.push_str(&format!("{},{}\n", format_sig9(*c), format_sig9(*v)));
    }
    out
}

pub fn report_csv(report: &BTreeMap<String, f64>) -> String {
    let mut out = String::from("metric,value\n");
    for (k, v) in report {
        out.push_str(&format!("{k},{}\n", format_sig9(*v)));
    }
    out
}

pub fn report_json(report: &BTreeMap<String, f64>) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Planar slice `coord` along `axis`, as an 8-bit binary PGM.
///
/// Columns follow the first remaining axis left to right, rows the second
/// from top (largest coordinate) to bottom. `[min, max]` of the slice maps
/// linearly onto `[0, 255]` and is recorded in a header comment.
pub fn slice_pgm(v: &Volume, axis: Axis, coord: f64) -> Result<(Vec<u8>, f64, f64)> {
    if !(-1.0..=1.0).contains(&coord) {
        return Err(Error::invalid(format!("slice coordinate {coord} lies outside [-1, 1]")));
    }
    let d = axis.index();
    let [a, b] = axis.others();
    let plane = v.nearest_index(coord);
    let n = v.dim;
    let mut values = Vec::with_capacity(n * n);
    let mut idx = [0usize; 3];
    idx[d] = plane;
    for row in 0..n {
        idx[b] = n - 1 - row;
        for col in 0..n {
            idx[a] = col;
            values.push(v.get(idx[0], idx[1], idx[2]));
        }
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let range = hi - lo;
    let mut out = Vec::new();
    write!(
        out,
        "P5\n# window {} {}\n{n} {n}\n255\n",
        format_sig9(lo),
        format_sig9(hi)
    )
    .unwrap();
    out.extend(values.iter().map(|&x| {
        if range > 0.0 {
            (255.0 * (x - lo) / range).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    Ok((out, lo, hi))
}
