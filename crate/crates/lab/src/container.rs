//! Flat binary container.
//!
//! A file is a UTF-8 header followed by raw little-endian `f64` arrays:
//!
//! ```text
//! wavesrc-container 1
//! kind = boundary-dataset
//! key = value
//! ...
//! end
//! <payload>
//! ```
//!
//! The header's `layout` key lists the payload arrays in order. Sphere
//! nodes are stored as `x y z` triples, per-node arrays are node-major, and
//! complex values are interleaved `(re, im)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use wavesrc_core::forward::{BoundaryDataset, Channel, Provenance};
use wavesrc_core::geometry::{BallGrid, FrequencyGrid, SphereGrid, TimeGrid};
use wavesrc_core::source::{TemporalProfile, Waveform};
use wavesrc_core::spectral::SpectralData;
use wavesrc_core::Complex64;

use crate::error::{io_error, LabError, Result};

const MAGIC: &str = "wavesrc-container 1";

/// Parsed header plus the payload as `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: BTreeMap<String, String>,
    pub payload: Vec<f64>,
}

impl Container {
    pub fn new(kind: &str) -> Self {
        let mut header = BTreeMap::new();
        header.insert("kind".to_string(), kind.to_string());
        Self { header, payload: Vec::new() }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.header.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.header.get(key).map(String::as_str).ok_or_else(|| LabError::Container(format!("header has no `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse().map_err(|_| LabError::Container(format!("`{key} = {v}` does not parse")))
    }

    pub fn kind(&self) -> Result<&str> {
        self.get("kind")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut text = String::new();
        writeln!(text, "{MAGIC}").unwrap();
        writeln!(text, "kind = {}", self.header["kind"]).unwrap();
        for (k, v) in &self.header {
            if k != "kind" {
                writeln!(text, "{k} = {v}").unwrap();
            }
        }
        text.push_str("end\n");
        let mut out = text.into_bytes();
        out.reserve(self.payload.len() * 8);
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let end = find(bytes, b"\nend\n").ok_or_else(|| LabError::Container("missing `end` line".into()))?;
        let text = std::str::from_utf8(&bytes[..end]).map_err(|_| LabError::Container("header is not UTF-8".into()))?;
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(LabError::Container(format!("first line must be `{MAGIC}`")));
        }
        let mut header = BTreeMap::new();
        for line in lines {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| LabError::Container(format!("header line `{line}` is not `key = value`")))?;
            header.insert(k.to_string(), v.to_string());
        }
        let body = &bytes[end + 5..];
        if !body.len().is_multiple_of(8) {
            return Err(LabError::Container(format!("payload of {} bytes is not a whole number of f64", body.len())));
        }
        let payload = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let c = Self { header, payload };
        c.kind()?;
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(io_error(path))?;
        f.write_all(&self.to_bytes()).map_err(io_error(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_error(path))?;
        Self::from_bytes(&bytes)
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        let k = self.kind()?;
        if k != kind {
            return Err(LabError::Container(format!("expected a {kind} container, found {k}")));
        }
        Ok(())
    }
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

pub fn profile_to_string(p: &TemporalProfile) -> String {
    match p.waveform() {
        Waveform::Exponential { rate } => format!("exponential rate={rate:?} causal={}", p.is_causal()),
        Waveform::Ricker { peak_frequency, delay } => {
            format!("ricker peak_frequency={peak_frequency:?} delay={delay:?} causal={}", p.is_causal())
        }
    }
}

pub fn profile_from_str(s: &str) -> Result<TemporalProfile> {
    let bad = || LabError::Container(format!("unrecognized profile `{s}`"));
    let mut parts = s.split(' ');
    let kind = parts.next().ok_or_else(bad)?;
    let mut fields = BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(bad)?;
        fields.insert(k, v);
    }
    let num = |k: &str| -> Result<f64> { fields.get(k).ok_or_else(bad)?.parse().map_err(|_| bad()) };
    let causal: bool = fields.get("causal").ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let p = match kind {
        "exponential" => TemporalProfile::exponential(num("rate")?)?,
        "ricker" => TemporalProfile::ricker(num("peak_frequency")?, num("delay")?)?,
        _ => return Err(bad()),
    };
    Ok(p.with_causal(causal))
}

fn put_sphere(c: &mut Container, sphere: &SphereGrid) {
    c.set("nodes", sphere.len());
    c.set("radius", format!("{:?}", sphere.radius()));
    c.set("sphere_order", sphere.order().map_or("custom".to_string(), |o| o.to_string()));
    for x in sphere.nodes() {
        c.payload.extend_from_slice(x);
    }
    c.payload.extend_from_slice(sphere.weights());
}

fn take_sphere(c: &Container, payload: &[f64]) -> Result<(SphereGrid, usize)> {
    let n: usize = c.parse("nodes")?;
    let radius: f64 = c.parse("radius")?;
    if payload.len() < 4 * n {
        return Err(LabError::Container("payload too short for the sphere".into()));
    }
    let nodes: Vec<[f64; 3]> = payload[..3 * n].chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect();
    let weights = payload[3 * n..4 * n].to_vec();
    let sphere = match c.get("sphere_order")? {
        "custom" => SphereGrid::from_nodes(radius, nodes, weights)?,
        o => {
            let order: usize = o.parse().map_err(|_| LabError::Container(format!("bad sphere_order `{o}`")))?;
            let s = SphereGrid::new(radius, order)?;
            if s.nodes() != nodes.as_slice() || s.weights() != weights.as_slice() {
                return Err(LabError::Container("stored nodes differ from the sphere rule of the stated order".into()));
            }
            s
        }
    };
    Ok((sphere, 4 * n))
}

pub fn dataset_to_container(d: &BoundaryDataset) -> Container {
    let mut c = Container::new("boundary-dataset");
    let p = d.provenance();
    c.set("steps", d.time().steps());
    c.set("horizon", format!("{:?}", d.time().horizon()));
    c.set("dt", format!("{:?}", d.time().dt()));
    c.set("channels", Channel::ALL.map(|ch| ch.name()).join(","));
    c.set("source_fingerprint", &p.source_fingerprint);
    c.set("support_radius", format!("{:?}", p.support_radius));
    c.set("profile", profile_to_string(&p.profile));
    c.set("noise_level", format!("{:?}", p.noise_level));
    c.set("seed", p.seed.map_or("none".to_string(), |s| s.to_string()));
    c.set("layout", "node_xyz,node_weight,U,dtU,dt2U,dndtU,dnU");
    c.set("byte_order", "little-endian f64, per-node arrays node-major");
    put_sphere(&mut c, d.sphere());
    for ch in Channel::ALL {
        c.payload.extend_from_slice(d.channel(ch));
    }
    c
}

pub fn dataset_from_container(c: &Container) -> Result<BoundaryDataset> {
    c.expect_kind("boundary-dataset")?;
    let names = Channel::ALL.map(|ch| ch.name()).join(",");
    if c.get("channels")? != names {
        return Err(LabError::Container(format!("channels must be `{names}`")));
    }
    let time = TimeGrid::new(c.parse("horizon")?, c.parse("steps")?)?;
    let (sphere, mut at) = take_sphere(c, &c.payload)?;
    let block = sphere.len() * time.samples();
    if c.payload.len() != at + 5 * block {
        return Err(LabError::Container(format!(
            "payload holds {} values, expected {}",
            c.payload.len(),
            at + 5 * block
        )));
    }
    let channels = std::array::from_fn(|_| {
        let v = c.payload[at..at + block].to_vec();
        at += block;
        v
    });
    let seed = match c.get("seed")? {
        "none" => None,
        s => Some(s.parse().map_err(|_| LabError::Container(format!("bad seed `{s}`")))?),
    };
    let provenance = Provenance {
        source_fingerprint: c.get("source_fingerprint")?.to_string(),
        support_radius: c.parse("support_radius")?,
        profile: profile_from_str(c.get("profile")?)?,
        noise_level: c.parse("noise_level")?,
        seed,
    };
    Ok(BoundaryDataset::new(sphere, time, channels, provenance)?)
}

pub fn spectral_to_container(s: &SpectralData) -> Container {
    let mut c = Container::new("spectral-data");
    c.set("frequencies", s.frequencies().len());
    c.set("w_max", format!("{:?}", s.frequencies().max()));
    c.set("channels", "u,dnu");
    c.set("layout", "node_xyz,node_weight,u,dnu (complex interleaved re,im)");
    c.set("byte_order", "little-endian f64, per-node arrays node-major");
    put_sphere(&mut c, s.sphere());
    for z in s.u().iter().chain(s.dn_u()) {
        c.payload.push(z.re);
        c.payload.push(z.im);
    }
    c
}

pub fn spectral_from_container(c: &Container) -> Result<SpectralData> {
    c.expect_kind("spectral-data")?;
    let freq = FrequencyGrid::new(c.parse("w_max")?, c.parse("frequencies")?)?;
    let (sphere, at) = take_sphere(c, &c.payload)?;
    let block = sphere.len() * freq.len();
    if c.payload.len() != at + 4 * block {
        return Err(LabError::Container("spectral payload has the wrong length".into()));
    }
    let complex = |from: usize| -> Vec<Complex64> {
        c.payload[from..from + 2 * block].chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
    };
    Ok(SpectralData::new(sphere, freq, complex(at), complex(at + 2 * block))?)
}

/// Voxel values of a reconstruction on `ball`, in ball point order.
pub fn voxels_to_container(ball: &BallGrid, voxels: &[f64], meta: &[(&str, String)]) -> Container {
    let mut c = Container::new("voxel-field");
    let ctr = ball.center();
    c.set("voxels", voxels.len());
    c.set("ball_center", format!("{:?},{:?},{:?}", ctr[0], ctr[1], ctr[2]));
    c.set("ball_radius", format!("{:?}", ball.radius()));
    c.set("ball_resolution", ball.resolution());
    c.set("layout", "voxel values in lexicographic (x, y, z) order of cube cells inside the ball");
    c.set("byte_order", "little-endian f64");
    for (k, v) in meta {
        c.set(k, v);
    }
    c.payload.extend_from_slice(voxels);
    c
}

pub fn write_dataset(d: &BoundaryDataset, path: &Path) -> Result<()> {
    dataset_to_container(d).write(path)
}

pub fn read_dataset(path: &Path) -> Result<BoundaryDataset> {
    dataset_from_container(&Container::read(path)?)
}

/// One row per `(node, time)`: node, x, y, z, t and the five channels.
pub fn export_dataset_csv(d: &BoundaryDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["node", "x", "y", "z", "t"];
    head.extend(Channel::ALL.map(|c| c.name()));
    w.write_record(&head)?;
    let times = d.time().times();
    for (node, x) in d.sphere().nodes().iter().enumerate() {
        for (j, t) in times.iter().enumerate() {
            let mut row = vec![node.to_string(), x[0].to_string(), x[1].to_string(), x[2].to_string(), t.to_string()];
            row.extend(Channel::ALL.map(|c| d.series(c, node)[j].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(io_error(path))?;
    Ok(())
}
