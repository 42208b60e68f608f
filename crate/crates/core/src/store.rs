//! On-disk formats: tensor blobs, dataset directories, model directories.
//!
//! A blob is `HSAW`, u32 version, u32 name length, UTF-8 name, u32 ndim,
//! u32 dims, then the f32 payload; all little-endian. Manifests are JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::gan::{
    CoupleSet, CrossModalPair, DirectionNets, DiscriminatorNet, Direction, EpochLog, GeneratorNet, TrainConfig,
    TrainMeta,
};
use crate::hierarchy::{BuildConfig, ClusterStat, Hierarchy, HierarchyLevel, ThetaPolicy};
use crate::scene::{ActivityLabel, ScenarioConfig, Sequence, MAX_SPEED};
use crate::som::{SomGrid, SomTrainConfig};

pub const MAGIC: &[u8; 4] = b"HSAW";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const FRAMES_BLOB: &str = "frames.blob";
pub const FLOWS_BLOB: &str = "flows.blob";
pub const LABELS_BIN: &str = "labels.bin";

pub fn encode_blob(name: &str, t: &Tensor<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + name.len() + 4 * t.shape().len() + 4 * t.numel());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::PayloadLength {
                path: self.path.to_path_buf(),
                detail: format!("file ends inside the {what} ({} bytes total)", self.bytes.len()),
            });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_blob(bytes: &[u8], path: &Path) -> Result<(String, Tensor<f32>)> {
    let mut r = Reader { bytes, at: 0, path };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic { path: path.to_path_buf() });
    }
    r.take(4, "magic")?;
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { path: path.to_path_buf(), found: version, expected: FORMAT_VERSION });
    }
    let name_len = r.u32("name length")? as usize;
    let name = String::from_utf8(r.take(name_len, "name")?.to_vec()).map_err(|_| Error::Inconsistent {
        path: path.to_path_buf(),
        detail: "tensor name is not UTF-8".into(),
    })?;
    let ndim = r.u32("rank")? as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(r.u32("dims")? as usize);
    }
    let count: usize = dims.iter().product();
    let payload = bytes.len() - r.at;
    if payload != 4 * count {
        return Err(Error::PayloadLength {
            path: path.to_path_buf(),
            detail: format!("dims {dims:?} need {} payload bytes, found {payload}", 4 * count),
        });
    }
    let data = bytes[r.at..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let t = Tensor::new(dims, data).map_err(|e| Error::Inconsistent { path: path.to_path_buf(), detail: e.to_string() })?;
    Ok((name, t))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_blob(path: &Path, name: &str, t: &Tensor<f32>) -> Result<()> {
    write(path, &encode_blob(name, t))
}

pub fn load_blob(path: &Path) -> Result<(String, Tensor<f32>)> {
    decode_blob(&read(path)?, path)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("manifest types serialize");
    s.push('\n');
    write(path, s.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Manifest { path: path.to_path_buf(), detail: e.to_string() })
}

fn check_version(path: &Path, found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::Version { path: path.to_path_buf(), found, expected: FORMAT_VERSION });
    }
    Ok(())
}

/// f64 that survives JSON even when infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            v if v.is_finite() => s.serialize_f64(v),
            v if v.is_nan() => s.serialize_str("nan"),
            v if v > 0.0 => s.serialize_str("inf"),
            _ => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(v) => Ok(Num(v)),
            Raw::S(s) => match s.as_str() {
                "inf" => Ok(Num(f64::INFINITY)),
                "-inf" => Ok(Num(f64::NEG_INFINITY)),
                "nan" => Ok(Num(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}

// ---- datasets ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub straight: usize,
    pub curve: usize,
    pub pedestrian: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub scenario: u8,
    pub seed: u64,
    pub frames: usize,
    pub counts: LabelCounts,
    pub height: usize,
    pub width: usize,
    /// Flow blobs hold pixels; networks see flow / max_flow_speed.
    pub max_flow_speed: f64,
    pub config: ScenarioConfig,
}

/// Frames (N×1×H×W), flows in pixels (N×2×H×W) and per-frame labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub frames: Tensor<f32>,
    pub flows: Tensor<f32>,
    pub labels: Vec<ActivityLabel>,
}

fn counts(labels: &[ActivityLabel]) -> LabelCounts {
    let c = |l| labels.iter().filter(|&&x| x == l).count();
    LabelCounts {
        straight: c(ActivityLabel::Straight),
        curve: c(ActivityLabel::Curve),
        pedestrian: c(ActivityLabel::AbnormalPedestrian),
    }
}

impl Dataset {
    pub fn from_sequence(seq: &Sequence) -> Result<Self> {
        let n = seq.len();
        if n == 0 {
            return Err(Error::Empty("dataset: empty sequence".into()));
        }
        let (h, w) = (seq.config.height, seq.config.width);
        let frames = Tensor::new(vec![n, 1, h, w], seq.couples.iter().flat_map(|c| c.frame.iter().copied()).collect())?;
        let flows = Tensor::new(vec![n, 2, h, w], seq.couples.iter().flat_map(|c| c.flow.iter().copied()).collect())?;
        Ok(Self {
            manifest: DatasetManifest {
                format_version: FORMAT_VERSION,
                scenario: seq.config.scenario,
                seed: seq.config.seed,
                frames: n,
                counts: counts(&seq.labels),
                height: h,
                width: w,
                max_flow_speed: MAX_SPEED,
                config: seq.config.clone(),
            },
            frames,
            flows,
            labels: seq.labels.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Network inputs, with flow scaled by 1 / max_flow_speed.
    pub fn couple_set(&self) -> Result<CoupleSet> {
        let k = (1.0 / self.manifest.max_flow_speed) as f32;
        let flows = Tensor::new(self.flows.shape().to_vec(), self.flows.data().iter().map(|v| v * k).collect())?;
        CoupleSet::new(self.frames.clone(), flows)
    }
}

pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join(MANIFEST), &ds.manifest)?;
    save_blob(&dir.join(FRAMES_BLOB), "frames", &ds.frames)?;
    save_blob(&dir.join(FLOWS_BLOB), "flows", &ds.flows)?;
    write(&dir.join(LABELS_BIN), &ds.labels.iter().map(|l| l.code()).collect::<Vec<_>>())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let mpath = dir.join(MANIFEST);
    let manifest: DatasetManifest = read_json(&mpath)?;
    check_version(&mpath, manifest.format_version)?;
    let (fpath, lpath) = (dir.join(FRAMES_BLOB), dir.join(LABELS_BIN));
    let (_, frames) = load_blob(&fpath)?;
    let (_, flows) = load_blob(&dir.join(FLOWS_BLOB))?;
    let labels = read(&lpath)?
        .iter()
        .map(|&b| {
            ActivityLabel::from_code(b)
                .ok_or_else(|| Error::Inconsistent { path: lpath.clone(), detail: format!("unknown label byte {b}") })
        })
        .collect::<Result<Vec<_>>>()?;
    let bad = |path: &Path, detail: String| Err(Error::Inconsistent { path: path.to_path_buf(), detail });
    let (n, h, w) = (manifest.frames, manifest.height, manifest.width);
    if frames.shape() != [n, 1, h, w] {
        return bad(&fpath, format!("frames are {:?}, manifest says {n}×1×{h}×{w}", frames.shape()));
    }
    if flows.shape() != [n, 2, h, w] {
        return bad(&dir.join(FLOWS_BLOB), format!("flows are {:?}, manifest says {n}×2×{h}×{w}", flows.shape()));
    }
    if labels.len() != n {
        return bad(&lpath, format!("{} labels, manifest says {n} frames", labels.len()));
    }
    if counts(&labels) != manifest.counts {
        return bad(&mpath, format!("label counts {:?} disagree with labels.bin", manifest.counts));
    }
    Ok(Dataset { manifest, frames, flows, labels })
}

// ---- models ----

#[derive(Serialize, Deserialize)]
struct ThetaEntry {
    policy: String,
    value: Num,
}

#[derive(Serialize, Deserialize)]
struct BuildEntry {
    theta: ThetaEntry,
    max_levels: usize,
    min_cluster_frac: f64,
    seed: u64,
    train: TrainConfig,
    som: SomTrainConfig,
}

#[derive(Serialize, Deserialize)]
struct SomEntry {
    rows: usize,
    cols: usize,
    dim: usize,
    blob: String,
}

#[derive(Serialize, Deserialize)]
struct ClusterEntry {
    mu: Num,
    members: usize,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    blob: String,
}

#[derive(Serialize, Deserialize)]
struct NetEntry {
    role: String,
    direction: Direction,
    params: Vec<ParamEntry>,
}

#[derive(Serialize, Deserialize)]
struct TrainEntry {
    config: TrainConfig,
    subset_len: usize,
    subset_fingerprint: u64,
    log: Vec<EpochLog>,
}

#[derive(Serialize, Deserialize)]
struct LevelEntry {
    index: usize,
    theta: Num,
    som: SomEntry,
    normal_mask: Vec<bool>,
    cluster_stats: Vec<ClusterEntry>,
    subset: Vec<usize>,
    subset_fingerprint: u64,
    train: TrainEntry,
    networks: Vec<NetEntry>,
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    format_version: u32,
    tau: Num,
    dataset_fingerprint: u64,
    build: BuildEntry,
    levels: Vec<LevelEntry>,
}

fn theta_entry(p: ThetaPolicy) -> ThetaEntry {
    match p {
        ThetaPolicy::Fixed(v) => ThetaEntry { policy: "fixed".into(), value: Num(v) },
        ThetaPolicy::Auto(k) => ThetaEntry { policy: "auto".into(), value: Num(k) },
    }
}

fn save_params(dir: &Path, level: usize, store: &ParamStore<f32>) -> Result<Vec<ParamEntry>> {
    store
        .iter()
        .map(|p| {
            let blob = format!("l{level}.{}.blob", p.name);
            save_blob(&dir.join(&blob), &p.name, &p.tensor)?;
            Ok(ParamEntry { name: p.name.clone(), blob })
        })
        .collect()
}

pub fn save_model(dir: &Path, h: &Hierarchy) -> Result<()> {
    create_dir(dir)?;
    let mut levels = Vec::new();
    for l in &h.levels {
        let som_blob = format!("l{}.som.blob", l.index);
        let protos = Tensor::new(
            vec![l.som.neurons(), l.som.dim],
            l.som.prototypes.iter().flatten().map(|&v| v as f32).collect(),
        )?;
        save_blob(&dir.join(&som_blob), "som.prototypes", &protos)?;
        let mut networks = Vec::new();
        for d in Direction::BOTH {
            let n = l.pair.nets(d);
            networks.push(NetEntry { role: "gen".into(), direction: d, params: save_params(dir, l.index, &n.gen.params)? });
            networks.push(NetEntry { role: "disc".into(), direction: d, params: save_params(dir, l.index, &n.disc.params)? });
        }
        let m = &l.pair.meta;
        levels.push(LevelEntry {
            index: l.index,
            theta: Num(l.theta),
            som: SomEntry { rows: l.som.rows, cols: l.som.cols, dim: l.som.dim, blob: som_blob },
            normal_mask: l.normal_mask.clone(),
            cluster_stats: l.cluster_stats.iter().map(|c| ClusterEntry { mu: Num(c.mu), members: c.members }).collect(),
            subset: l.subset.clone(),
            subset_fingerprint: l.subset_fingerprint,
            train: TrainEntry {
                config: m.config.clone(),
                subset_len: m.subset_len,
                subset_fingerprint: m.subset_fingerprint,
                log: m.log.clone(),
            },
            networks,
        });
    }
    let c = &h.config;
    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        tau: Num(h.tau),
        dataset_fingerprint: h.dataset_fingerprint,
        build: BuildEntry {
            theta: theta_entry(c.theta),
            max_levels: c.max_levels,
            min_cluster_frac: c.min_cluster_frac,
            seed: c.seed,
            train: c.train.clone(),
            som: c.som.clone(),
        },
        levels,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

fn load_params(dir: &Path, entries: &[ParamEntry]) -> Result<ParamStore<f32>> {
    let mut store = ParamStore::new();
    for e in entries {
        let path = dir.join(&e.blob);
        if !path.is_file() {
            return Err(Error::MissingBlob { name: e.name.clone(), path });
        }
        let (name, t) = load_blob(&path)?;
        if name != e.name {
            return Err(Error::Inconsistent { path, detail: format!("blob holds `{name}`, manifest expects `{}`", e.name) });
        }
        store.add(name, t)?;
    }
    Ok(store)
}

pub fn load_model(dir: &Path) -> Result<Hierarchy> {
    let mpath = dir.join(MANIFEST);
    let m: ModelManifest = read_json(&mpath)?;
    check_version(&mpath, m.format_version)?;
    let manifest_err = |detail: String| Error::Manifest { path: mpath.clone(), detail };
    let theta = match m.build.theta.policy.as_str() {
        "fixed" => ThetaPolicy::Fixed(m.build.theta.value.0),
        "auto" => ThetaPolicy::Auto(m.build.theta.value.0),
        other => return Err(manifest_err(format!("unknown theta policy {other:?}"))),
    };
    let config = BuildConfig {
        theta,
        max_levels: m.build.max_levels,
        min_cluster_frac: m.build.min_cluster_frac,
        seed: m.build.seed,
        train: m.build.train,
        som: m.build.som,
    };
    if m.levels.is_empty() {
        return Err(manifest_err("model has no levels".into()));
    }
    let mut levels = Vec::new();
    for e in m.levels {
        let som_path = dir.join(&e.som.blob);
        if !som_path.is_file() {
            return Err(Error::MissingBlob { name: "som.prototypes".into(), path: som_path });
        }
        let (_, protos) = load_blob(&som_path)?;
        if protos.shape() != [e.som.rows * e.som.cols, e.som.dim] {
            return Err(Error::Inconsistent {
                path: som_path,
                detail: format!("prototypes are {:?}, manifest says {}×{}", protos.shape(), e.som.rows * e.som.cols, e.som.dim),
            });
        }
        let prototypes = protos.data().chunks(e.som.dim).map(|c| c.iter().map(|&v| v as f64).collect()).collect();
        let som = SomGrid::from_prototypes(e.som.rows, e.som.cols, prototypes)?;
        if e.normal_mask.len() != som.neurons() || e.cluster_stats.len() != som.neurons() {
            return Err(manifest_err(format!("level {}: mask/stats do not match {} neurons", e.index, som.neurons())));
        }
        let mut nets: Vec<Option<DirectionNets>> = vec![None, None];
        for d in Direction::BOTH {
            let find = |role: &str| {
                e.networks
                    .iter()
                    .find(|n| n.role == role && n.direction == d)
                    .ok_or_else(|| manifest_err(format!("level {}: no {role} network for {}", e.index, d.tag())))
            };
            let gen = GeneratorNet::from_params(d, load_params(dir, &find("gen")?.params)?)?;
            let disc = DiscriminatorNet::from_params(d, load_params(dir, &find("disc")?.params)?)?;
            nets[d as usize] = Some(DirectionNets { gen, disc });
        }
        let [net_fo, net_of] = [nets[0].take(), nets[1].take()].map(|n| n.expect("both directions loaded"));
        let meta = TrainMeta {
            config: e.train.config,
            subset_len: e.train.subset_len,
            subset_fingerprint: e.train.subset_fingerprint,
            log: e.train.log,
        };
        levels.push(HierarchyLevel {
            index: e.index,
            pair: CrossModalPair { net_fo, net_of, meta },
            som,
            cluster_stats: e.cluster_stats.iter().map(|c| ClusterStat { mu: c.mu.0, members: c.members }).collect(),
            normal_mask: e.normal_mask,
            theta: e.theta.0,
            subset: e.subset,
            subset_fingerprint: e.subset_fingerprint,
        });
    }
    Ok(Hierarchy { levels, tau: m.tau.0, config, dataset_fingerprint: m.dataset_fingerprint })
}

/// Path of the manifest inside an artifact directory.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST)
}
