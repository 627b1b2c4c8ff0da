//! Dataset directories:
//!
//! ```text
//! <root>/manifest.json        point count, gripper domain, label table, demo index
//! <root>/scenes/<id>.json     one scene per scene id
//! <root>/demos/<id>.bin       binary demo records
//! <root>/stats.json           augmentation statistics (augmented datasets only)
//! ```
//!
//! Directories are assembled next to the destination and renamed into place,
//! so a reader never sees a half-written dataset.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::BatchConfig;
use crate::demo::{Demonstration, Label, Provenance, ValidationRules};
use crate::format::{decode_demo, encode_demo, DemoIoError};
use crate::geometry::PlanarPose;
use crate::parser::Segment;
use crate::sampler::RejectionHistogram;
use crate::scene::Scene;

pub const MANIFEST: &str = "manifest.json";
pub const STATS: &str = "stats.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Demo {
        path: PathBuf,
        #[source]
        source: DemoIoError,
    },
    #[error("{path}: checksum mismatch (manifest {expected}, file {found})")]
    Checksum { path: PathBuf, expected: String, found: String },
    #[error("demo `{0}` not listed in the manifest")]
    UnknownDemo(String),
    #[error("scene `{0}` missing from the dataset")]
    MissingScene(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub code: u8,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoEntry {
    pub id: String,
    pub file: String,
    pub scene_id: String,
    pub frames: usize,
    pub frame_offsets: Vec<u64>,
    pub dock: PlanarPose,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<Segment>>,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub source_id: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub point_count: Option<usize>,
    pub binary_gripper: bool,
    pub fps_seed: u64,
    pub label_table: Vec<LabelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<BatchConfig>,
    pub demos: Vec<DemoEntry>,
    #[serde(default)]
    pub failures: Vec<FailureEntry>,
}

impl Manifest {
    pub fn rules(&self) -> ValidationRules {
        ValidationRules {
            point_count: self.point_count,
            binary_gripper: self.binary_gripper,
        }
    }
}

/// Per-source augmentation statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub source_id: String,
    pub segments: Vec<Segment>,
    pub attempts: usize,
    pub accepted: Vec<PlanarPose>,
    pub rejections: RejectionHistogram,
    pub augmented: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub sources: Vec<SourceStats>,
    pub total_augmented: usize,
    pub total_attempts: usize,
    pub rejections: RejectionHistogram,
}

impl Stats {
    pub fn push(&mut self, s: SourceStats) {
        self.total_augmented += s.augmented;
        self.total_attempts += s.attempts;
        self.rejections.visibility += s.rejections.visibility;
        self.rejections.reachability += s.rejections.reachability;
        self.rejections.collision += s.rejections.collision;
        self.sources.push(s);
    }
}

pub fn label_table(scenes: &[Scene]) -> Vec<LabelEntry> {
    let ids: BTreeSet<_> = scenes.iter().flat_map(|s| s.objects.iter().map(|o| o.id)).collect();
    [Label::Other, Label::Arm]
        .into_iter()
        .chain(ids.into_iter().map(Label::Object))
        .map(|l| LabelEntry { code: l.code(), name: l.to_string() })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A loaded dataset: manifest plus scenes. Demo payloads load on demand.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub scenes: Vec<Scene>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Json { path: path.to_path_buf(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| DatasetError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self, DatasetError> {
        let manifest: Manifest = read_json(&root.join(MANIFEST))?;
        let ids: BTreeSet<&str> = manifest.demos.iter().map(|d| d.scene_id.as_str()).collect();
        let mut scenes = Vec::new();
        for id in ids {
            let path = root.join("scenes").join(format!("{id}.json"));
            if !path.exists() {
                return Err(DatasetError::MissingScene(id.to_string()));
            }
            scenes.push(read_json::<Scene>(&path)?);
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
            scenes,
        })
    }

    pub fn scene(&self, id: &str) -> Option<&Scene> {
        self.scenes.iter().find(|s| s.id == id)
    }

    pub fn entry(&self, id: &str) -> Option<&DemoEntry> {
        self.manifest.demos.iter().find(|d| d.id == id)
    }

    /// Reads, checksums and decodes one demo.
    pub fn load(&self, entry: &DemoEntry) -> Result<Demonstration, DatasetError> {
        let path = self.root.join(&entry.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let found = sha256_hex(&bytes);
        if found != entry.sha256 {
            return Err(DatasetError::Checksum {
                path,
                expected: entry.sha256.clone(),
                found,
            });
        }
        decode_demo(&bytes).map(|(d, _)| d).map_err(|source| DatasetError::Demo { path, source })
    }

    pub fn load_all(&self) -> Result<Vec<Demonstration>, DatasetError> {
        self.manifest.demos.iter().map(|e| self.load(e)).collect()
    }
}

/// Contents of a dataset to be written.
#[derive(Clone, Debug)]
pub struct DatasetSpec<'a> {
    pub rules: ValidationRules,
    pub fps_seed: u64,
    pub config: Option<BatchConfig>,
    pub scenes: &'a [Scene],
    pub demos: Vec<(&'a Demonstration, Option<Vec<Segment>>)>,
    pub failures: Vec<FailureEntry>,
    pub stats: Option<Stats>,
}

fn staging_dir(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    out.with_file_name(name)
}

/// Writes the dataset into a staging directory, then renames it onto `out`.
pub fn write_dataset(out: &Path, spec: &DatasetSpec) -> Result<Manifest, DatasetError> {
    let stage = staging_dir(out);
    if stage.exists() {
        fs::remove_dir_all(&stage).map_err(io_err(&stage))?;
    }
    let demos_dir = stage.join("demos");
    let scenes_dir = stage.join("scenes");
    fs::create_dir_all(&demos_dir).map_err(io_err(&demos_dir))?;
    fs::create_dir_all(&scenes_dir).map_err(io_err(&scenes_dir))?;

    for s in spec.scenes {
        write_json(&scenes_dir.join(format!("{}.json", s.id)), s)?;
    }
    let mut entries = Vec::with_capacity(spec.demos.len());
    for (d, segments) in &spec.demos {
        let file = format!("demos/{}.bin", d.id);
        let enc = encode_demo(d, &spec.rules);
        let path = stage.join(&file);
        fs::write(&path, &enc.bytes).map_err(io_err(&path))?;
        entries.push(DemoEntry {
            id: d.id.clone(),
            file,
            scene_id: d.scene_id.clone(),
            frames: d.len(),
            frame_offsets: enc.frame_offsets,
            dock: d.docking,
            provenance: d.provenance.clone(),
            segments: segments.clone(),
            sha256: sha256_hex(&enc.bytes),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        point_count: spec.rules.point_count,
        binary_gripper: spec.rules.binary_gripper,
        fps_seed: spec.fps_seed,
        label_table: label_table(spec.scenes),
        config: spec.config.clone(),
        demos: entries,
        failures: spec.failures.clone(),
    };
    write_json(&stage.join(MANIFEST), &manifest)?;
    if let Some(stats) = &spec.stats {
        write_json(&stage.join(STATS), stats)?;
    }
    if out.exists() {
        fs::remove_dir_all(out).map_err(io_err(out))?;
    }
    fs::rename(&stage, out).map_err(io_err(out))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenes::pick_scene;

    #[test]
    fn write_open_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ds");
        let scene = pick_scene();
        let mut d = crate::demo::tests::tiny_demo(3, 16);
        d.scene_id = scene.id.clone();
        for f in &mut d.frames {
            f.cloud = f.cloud.quantized();
        }
        let spec = DatasetSpec {
            rules: ValidationRules { point_count: Some(16), binary_gripper: true },
            fps_seed: 0,
            config: None,
            scenes: std::slice::from_ref(&scene),
            demos: vec![(&d, None)],
            failures: vec![],
            stats: None,
        };
        let m = write_dataset(&out, &spec).unwrap();
        assert_eq!(m.demos[0].frame_offsets.len(), 3);
        assert!(!staging_dir(&out).exists());
        let ds = Dataset::open(&out).unwrap();
        assert_eq!(ds.manifest, m);
        assert_eq!(ds.load(&m.demos[0]).unwrap(), d);
        assert_eq!(ds.scene("pick"), Some(&scene));
        assert_eq!(m.label_table.iter().map(|l| l.name.as_str()).collect::<Vec<_>>(), vec!["other", "arm", "object:0"]);
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ds");
        let scene = pick_scene();
        let mut d = crate::demo::tests::tiny_demo(2, 4);
        d.scene_id = scene.id.clone();
        let spec = DatasetSpec {
            rules: ValidationRules::default(),
            fps_seed: 0,
            config: None,
            scenes: std::slice::from_ref(&scene),
            demos: vec![(&d, None)],
            failures: vec![],
            stats: None,
        };
        write_dataset(&out, &spec).unwrap();
        let p = out.join("demos/demo.bin");
        let mut b = fs::read(&p).unwrap();
        let n = b.len();
        b[n - 1] ^= 0xff;
        fs::write(&p, b).unwrap();
        let ds = Dataset::open(&out).unwrap();
        assert!(matches!(ds.load(&ds.manifest.demos[0]), Err(DatasetError::Checksum { .. })));
    }

    #[test]
    fn missing_manifest_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = Dataset::open(dir.path()).unwrap_err();
        assert!(err.to_string().contains("manifest.json"));
    }
}
