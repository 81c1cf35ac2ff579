//! Reading and writing point clouds, checkpoints and synthetic episodes.
//!
//! Clouds: `xyz` (one `x y z` per line), `obj` (`v` lines only) and ascii
//! `ply`. Reals are written with 17 significant digits so a save/load cycle
//! is exact. Checkpoints are JSON documents carrying an integer
//! `format_version`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{Episode, FlowField, Point3, PointCloud};
use crate::morpher::{LayerParams, MorpherNet};
use crate::training::LatentStore;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudFormat {
    Xyz,
    Obj,
    Ply,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("xyz") | Some("txt") => Ok(CloudFormat::Xyz),
            Some("obj") => Ok(CloudFormat::Obj),
            Some("ply") => Ok(CloudFormat::Ply),
            _ => Err(Error::UnsupportedFormat(format!(
                "cannot infer point cloud format from {}",
                path.display()
            ))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" => Ok(CloudFormat::Xyz),
            "obj" => Ok(CloudFormat::Obj),
            "ply" => Ok(CloudFormat::Ply),
            other => Err(Error::UnsupportedFormat(format!("unknown cloud format '{other}'"))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_real(path: &Path, line: usize, tok: &str) -> Result<Real> {
    let v: Real = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("'{tok}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("'{tok}' is not finite")));
    }
    Ok(v)
}

fn parse_xyz(path: &Path, text: &str) -> Result<Vec<Point3>> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(path, i + 1, format!("expected 3 coordinates, found {}", toks.len())));
        }
        pts.push(Point3::new(
            parse_real(path, i + 1, toks[0])?,
            parse_real(path, i + 1, toks[1])?,
            parse_real(path, i + 1, toks[2])?,
        ));
    }
    Ok(pts)
}

fn parse_obj(path: &Path, text: &str) -> Result<Vec<Point3>> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut toks = line.split_whitespace();
        if toks.next() != Some("v") {
            continue;
        }
        let coords: Vec<&str> = toks.collect();
        if coords.len() < 3 {
            return Err(parse_err(path, i + 1, "vertex line needs 3 coordinates"));
        }
        pts.push(Point3::new(
            parse_real(path, i + 1, coords[0])?,
            parse_real(path, i + 1, coords[1])?,
            parse_real(path, i + 1, coords[2])?,
        ));
    }
    Ok(pts)
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
}

fn parse_ply(path: &Path, text: &str) -> Result<Vec<Point3>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(path, 1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    let mut header_done = false;
    for (i, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => saw_format = true,
            ["format", other, ..] => {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: PLY encoding '{other}' is not supported (ascii only)",
                    path.display()
                )))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(path, i + 1, "bad element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", _, _, name] | ["property", _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, i + 1, "property before any element"))?;
                el.properties.push(name.to_string());
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_err(path, i + 1, format!("unrecognized header line '{line}'"))),
        }
    }
    if !header_done {
        return Err(parse_err(path, 1, "header has no end_header"));
    }
    if !saw_format {
        return Err(parse_err(path, 1, "header has no format line"));
    }
    let mut pts = Vec::new();
    let mut found_vertex = false;
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let axes = if is_vertex {
            found_vertex = true;
            let find = |n: &str| {
                el.properties
                    .iter()
                    .position(|p| p == n)
                    .ok_or_else(|| parse_err(path, 1, format!("vertex element lacks property '{n}'")))
            };
            Some([find("x")?, find("y")?, find("z")?])
        } else {
            None
        };
        for _ in 0..el.count {
            let (i, line) = lines
                .by_ref()
                .find(|(_, l)| !l.trim().is_empty())
                .ok_or_else(|| parse_err(path, 0, format!("file ends inside element '{}'", el.name)))?;
            if let Some(ax) = axes {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() < el.properties.len() {
                    return Err(parse_err(
                        path,
                        i + 1,
                        format!("expected {} values, found {}", el.properties.len(), toks.len()),
                    ));
                }
                pts.push(Point3::new(
                    parse_real(path, i + 1, toks[ax[0]])?,
                    parse_real(path, i + 1, toks[ax[1]])?,
                    parse_real(path, i + 1, toks[ax[2]])?,
                ));
            }
        }
    }
    if !found_vertex {
        return Err(parse_err(path, 1, "no vertex element"));
    }
    Ok(pts)
}

/// Reads a cloud; `frame_id` is set to 0.
pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = match format {
        CloudFormat::Ply => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            String::from_utf8(bytes).map_err(|_| {
                Error::UnsupportedFormat(format!("{}: binary PLY is not supported", path.display()))
            })?
        }
        _ => read_text(path)?,
    };
    let pts = match format {
        CloudFormat::Xyz => parse_xyz(path, &text)?,
        CloudFormat::Obj => parse_obj(path, &text)?,
        CloudFormat::Ply => parse_ply(path, &text)?,
    };
    PointCloud::new(pts, 0)
}

/// [`load_cloud`] with the format taken from the file extension.
pub fn load_cloud_auto(path: &Path) -> Result<PointCloud> {
    load_cloud(path, CloudFormat::from_path(path)?)
}

fn fmt_real(v: Real) -> String {
    format!("{v:.16e}")
}

/// Text encoding of a cloud in the given format.
pub fn encode_cloud(cloud: &PointCloud, format: CloudFormat) -> Result<String> {
    cloud.require_non_empty("save_cloud")?;
    let mut s = String::new();
    match format {
        CloudFormat::Xyz => {}
        CloudFormat::Obj => s.push_str("# flowmorph point cloud\n"),
        CloudFormat::Ply => {
            let ty = if std::mem::size_of::<Real>() == 8 { "double" } else { "float" };
            let _ = write!(
                s,
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty {ty} x\nproperty {ty} y\nproperty {ty} z\nend_header\n",
                cloud.len()
            );
        }
    }
    let prefix = if format == CloudFormat::Obj { "v " } else { "" };
    for p in &cloud.points {
        let _ = writeln!(s, "{prefix}{} {} {}", fmt_real(p.x), fmt_real(p.y), fmt_real(p.z));
    }
    Ok(s)
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let text = encode_cloud(cloud, format)?;
    write_text(path, &text)
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub steps: usize,
    pub seed: u64,
    pub loss: Option<Real>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub pair_id: String,
    pub z: Vec<Real>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub layers: Vec<LayerParams>,
    pub metadata: TrainingMetadata,
    pub latents: Vec<LatentRecord>,
}

impl Checkpoint {
    pub fn new(net: &MorpherNet, latents: &[LatentRecord], metadata: TrainingMetadata) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            latent_dim: net.latent_dim(),
            hidden_dims: net.hidden_dims().to_vec(),
            layers: net.to_layers(),
            metadata,
            latents: latents.to_vec(),
        }
    }

    /// Rebuilds the net, checking the dimension chain and latent lengths.
    pub fn into_parts(self) -> Result<(MorpherNet, Vec<LatentRecord>, TrainingMetadata)> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::IncompatibleVersion {
                found: self.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let declared: Vec<usize> = self.layers.iter().take(self.layers.len().saturating_sub(1)).map(|l| l.out_dim).collect();
        if declared != self.hidden_dims {
            return Err(Error::InvalidCheckpoint(format!(
                "hidden_dims {:?} disagree with layer shapes {:?}",
                self.hidden_dims, declared
            )));
        }
        let net = MorpherNet::from_layers(self.latent_dim, self.layers)
            .map_err(|e| Error::InvalidCheckpoint(e.to_string()))?;
        for r in &self.latents {
            if r.z.len() != self.latent_dim {
                return Err(Error::InvalidCheckpoint(format!(
                    "latent '{}' has length {} but latent_dim is {}",
                    r.pair_id,
                    r.z.len(),
                    self.latent_dim
                )));
            }
        }
        Ok((net, self.latents, self.metadata))
    }
}

pub fn latent_records(store: &LatentStore) -> Vec<LatentRecord> {
    store
        .entries
        .iter()
        .map(|(id, e)| LatentRecord {
            pair_id: id.clone(),
            z: e.z.clone(),
        })
        .collect()
}

pub fn save_checkpoint(
    net: &MorpherNet,
    latents: &[LatentRecord],
    metadata: TrainingMetadata,
    path: &Path,
) -> Result<()> {
    let ck = Checkpoint::new(net, latents, metadata);
    let text = serde_json::to_string(&ck)?;
    write_text(path, &text)
}

pub fn decode_checkpoint(text: &str) -> Result<(MorpherNet, Vec<LatentRecord>, TrainingMetadata)> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::InvalidCheckpoint("missing integer format_version".into()))?;
    if version != CHECKPOINT_VERSION as u64 {
        return Err(Error::IncompatibleVersion {
            found: version as u32,
            expected: CHECKPOINT_VERSION,
        });
    }
    let ck: Checkpoint = serde_json::from_value(value)?;
    ck.into_parts()
}

pub fn load_checkpoint(path: &Path) -> Result<(MorpherNet, Vec<LatentRecord>, TrainingMetadata)> {
    decode_checkpoint(&read_text(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeManifest {
    pub episode_id: String,
    pub frames: [String; 3],
    pub gt_flows: Option<[Vec<Point3>; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub episodes: Vec<String>,
}

pub const DATASET_INDEX: &str = "dataset.json";

/// Writes three xyz frames plus `<id>.json`; returns the manifest path.
pub fn write_episode(ep: &Episode, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let names: [String; 3] = std::array::from_fn(|k| format!("{}_frame{k}.xyz", ep.episode_id));
    for (k, name) in names.iter().enumerate() {
        save_cloud(&ep.frames[k], &dir.join(name), CloudFormat::Xyz)?;
    }
    let manifest = EpisodeManifest {
        episode_id: ep.episode_id.clone(),
        frames: names,
        gt_flows: ep
            .gt_flows
            .as_ref()
            .map(|[a, b]| [a.vectors.clone(), b.vectors.clone()]),
    };
    let path = dir.join(format!("{}.json", ep.episode_id));
    write_text(&path, &serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn read_episode(manifest_path: &Path) -> Result<Episode> {
    let m: EpisodeManifest = serde_json::from_str(&read_text(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut frames = Vec::with_capacity(3);
    for (k, name) in m.frames.iter().enumerate() {
        let mut c = load_cloud_auto(&dir.join(name))?;
        c.frame_id = k as u32;
        frames.push(c);
    }
    let frames: [PointCloud; 3] = frames.try_into().expect("three frames");
    let gt_flows = match m.gt_flows {
        Some([a, b]) => Some([FlowField::new(a, 0)?, FlowField::new(b, 1)?]),
        None => None,
    };
    Episode::new(frames, gt_flows, m.episode_id)
}

pub fn write_dataset(episodes: &[Episode], dir: &Path) -> Result<()> {
    let mut index = DatasetIndex {
        episodes: Vec::with_capacity(episodes.len()),
    };
    for ep in episodes {
        let p = write_episode(ep, dir)?;
        index
            .episodes
            .push(p.file_name().expect("manifest name").to_string_lossy().into_owned());
    }
    write_text(&dir.join(DATASET_INDEX), &serde_json::to_string_pretty(&index)?)
}

pub fn read_dataset(dir: &Path) -> Result<Vec<Episode>> {
    let index: DatasetIndex = serde_json::from_str(&read_text(&dir.join(DATASET_INDEX))?)?;
    index.episodes.iter().map(|m| read_episode(&dir.join(m))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morpher::{forward, init_net, DEFAULT_HIDDEN_DIMS, DEFAULT_LATENT_DIM};
    use crate::rng::standard_normal_vec;
    use proptest::prelude::*;

    fn cloud(n: usize, seed: u64) -> PointCloud {
        let v = standard_normal_vec(seed, 3 * n);
        PointCloud::new(v.chunks(3).map(|c| Point3::new(c[0], c[1], c[2])).collect(), 0).unwrap()
    }

    #[test]
    fn reads_simple_xyz() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.xyz");
        fs::write(&p, "0 0 0\n1 2 3\n").unwrap();
        let c = load_cloud(&p, CloudFormat::Xyz).unwrap();
        assert_eq!(c.points, vec![Point3::ZERO, Point3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn malformed_xyz_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.xyz");
        fs::write(&p, "0 0\n").unwrap();
        match load_cloud(&p, CloudFormat::Xyz) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&p, "1 2 3\n4 five 6\n").unwrap();
        let msg = load_cloud(&p, CloudFormat::Xyz).unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn round_trips_every_format() {
        let dir = tempfile::tempdir().unwrap();
        let c = cloud(40, 1);
        for fmt in [CloudFormat::Xyz, CloudFormat::Ply, CloudFormat::Obj] {
            let p = dir.path().join(format!("c.{fmt:?}").to_lowercase());
            save_cloud(&c, &p, fmt).unwrap();
            let back = load_cloud_auto(&p).unwrap();
            assert_eq!(back.points, c.points, "{fmt:?}");
        }
    }

    #[test]
    fn xyz_line_uses_17_significant_digits() {
        let c = PointCloud::new(vec![Point3::new(0.1, -2.5, 1.0 / 3.0)], 0).unwrap();
        let s = encode_cloud(&c, CloudFormat::Xyz).unwrap();
        assert_eq!(s.lines().count(), 1);
        for tok in s.split_whitespace() {
            let mantissa = tok.split('e').next().unwrap();
            let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17, "{tok}");
        }
    }

    #[test]
    fn empty_cloud_cannot_be_saved() {
        let dir = tempfile::tempdir().unwrap();
        let empty = PointCloud::new(vec![], 0).unwrap();
        assert!(matches!(
            save_cloud(&empty, &dir.path().join("e.xyz"), CloudFormat::Xyz),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn ply_header_counts_vertices() {
        let s = encode_cloud(&cloud(7, 2), CloudFormat::Ply).unwrap();
        assert!(s.contains("element vertex 7\n"));
    }

    #[test]
    fn ply_with_extra_properties_and_faces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        fs::write(
            &p,
            "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n9 0 0 0\n9 1 0 0\n9 0 1 0\n3 0 1 2\n",
        )
        .unwrap();
        let c = load_cloud(&p, CloudFormat::Ply).unwrap();
        assert_eq!(c.points[1], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn binary_ply_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.ply");
        fs::write(&p, "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n").unwrap();
        assert!(matches!(load_cloud(&p, CloudFormat::Ply), Err(Error::UnsupportedFormat(_))));
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nend_header\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xfe, 0x00, 0x80]);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_cloud(&p, CloudFormat::Ply), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn obj_ignores_faces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        fs::write(&p, "# c\nv 1 2 3\nvn 0 0 1\nv 4 5 6 1.0\nf 1 2 1\n").unwrap();
        let c = load_cloud(&p, CloudFormat::Obj).unwrap();
        assert_eq!(c.points, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.json");
        let net = init_net(4, &[8, 6], 3).unwrap();
        let lat = vec![LatentRecord {
            pair_id: "e/0".into(),
            z: standard_normal_vec(1, 4),
        }];
        let meta = TrainingMetadata {
            steps: 10,
            seed: 3,
            loss: Some(0.25),
        };
        save_checkpoint(&net, &lat, meta.clone(), &p).unwrap();
        let (net2, lat2, meta2) = load_checkpoint(&p).unwrap();
        assert_eq!(net2, net);
        assert_eq!((lat2, meta2), (lat.clone(), meta));
        let pts = cloud(10, 4);
        let (f1, _) = forward(&net, &pts, &lat[0].z).unwrap();
        let (f2, _) = forward(&net2, &pts, &lat[0].z).unwrap();
        for (a, b) in f1.vectors.iter().zip(&f2.vectors) {
            assert!(a.distance(*b) <= 1e-15);
        }
    }

    #[test]
    fn default_architecture_checkpoint_loads() {
        let net = init_net(DEFAULT_LATENT_DIM, &DEFAULT_HIDDEN_DIMS, 0).unwrap();
        let text = serde_json::to_string(&Checkpoint::new(
            &net,
            &[],
            TrainingMetadata { steps: 0, seed: 0, loss: None },
        ))
        .unwrap();
        let (back, _, _) = decode_checkpoint(&text).unwrap();
        assert_eq!(back.hidden_dims(), &[512, 256, 128, 64]);
        assert_eq!(back.latent_dim(), 256);
        assert_eq!(back, net);
    }

    #[test]
    fn truncated_and_mismatched_checkpoints_fail() {
        let net = init_net(2, &[4], 0).unwrap();
        let meta = TrainingMetadata { steps: 0, seed: 0, loss: None };
        let text = serde_json::to_string(&Checkpoint::new(&net, &[], meta.clone())).unwrap();
        assert!(matches!(decode_checkpoint(&text[..text.len() / 2]), Err(Error::Json(_))));

        let mut ck = Checkpoint::new(&net, &[], meta.clone());
        ck.format_version = 2;
        let e = decode_checkpoint(&serde_json::to_string(&ck).unwrap()).unwrap_err();
        assert!(matches!(e, Error::IncompatibleVersion { found: 2, expected: 1 }));

        let mut ck = Checkpoint::new(&net, &[], meta.clone());
        ck.layers[1].in_dim = 5;
        ck.layers[1].weights.extend([0.0; 3]);
        assert!(matches!(
            decode_checkpoint(&serde_json::to_string(&ck).unwrap()),
            Err(Error::InvalidCheckpoint(_))
        ));

        let ck = Checkpoint::new(
            &net,
            &[LatentRecord { pair_id: "x".into(), z: vec![0.0; 3] }],
            meta,
        );
        assert!(matches!(
            decode_checkpoint(&serde_json::to_string(&ck).unwrap()),
            Err(Error::InvalidCheckpoint(_))
        ));
    }

    #[test]
    fn episodes_round_trip_through_manifests() {
        use crate::synth::{gen_dataset, FamilyRanges, MotionFamily, MotionKind};
        let dir = tempfile::tempdir().unwrap();
        let fam = MotionFamily::random(MotionKind::RigidRotation, &FamilyRanges::default(), 1);
        let ds = gen_dataset(&[fam], 2, 16, 5).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap(), ds);
    }

    proptest! {
        #[test]
        fn xyz_round_trip_is_exact(seed in 0u64..10_000, n in 1usize..50, scale in 1e-6..1e6f64) {
            let c = cloud(n, seed);
            let c = c.with_points(c.points.iter().map(|&p| p * scale as Real).collect());
            let text = encode_cloud(&c, CloudFormat::Xyz).unwrap();
            let back = parse_xyz(Path::new("mem"), &text).unwrap();
            prop_assert_eq!(back, c.points);
        }
    }
}
