//! On-disk layout for platform models and superlearners.
//!
//! A platform archive is a directory holding one envelope per fitted
//! component, the out-of-fold table and a manifest with SHA-256 digests of
//! every file. A superlearner archive holds the meta model, a manifest and
//! one platform archive per registered platform under `platforms/`.
//! Directories are assembled under a temporary name and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::EmbeddingSpec;
use crate::embeddings::PlsModel;
use crate::error::{Error, Result};
use crate::features::LogOddsModel;
use crate::learners::{BinaryModel, MlpModel, MlpParams, Standardizer};
use crate::ordinal::{OrdinalClassifier, SeverityDistribution};
use crate::serial::Persist;
use crate::stack::{Pipeline, PipelineConfig, PlatformModel, SuperLearner};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
const PLATFORM_FORMAT: &str = "hatestack-platform";
const STACK_FORMAT: &str = "hatestack-superlearner";

/// Settings recorded alongside a model so it is only applied under the
/// conditions it was fitted in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveInfo {
    pub config_hash: String,
    pub lexicon_digests: BTreeMap<String, String>,
    pub embedding: EmbeddingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformManifest {
    pub format: String,
    pub format_version: u32,
    pub platform: String,
    pub embedding_dim: usize,
    pub n_oof: usize,
    pub config: PipelineConfig,
    pub info: ArchiveInfo,
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    pub format: String,
    pub format_version: u32,
    pub version: u32,
    pub platforms: Vec<String>,
    pub embedding_dim: usize,
    pub abstain_threshold: f64,
    pub meta_params: MlpParams,
    pub info: ArchiveInfo,
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("manifest serializes");
    out.push(b'\n');
    out
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = path.file_name().ok_or_else(|| Error::invalid(format!("`{}` is not a file path", path.display())))?;
    let tmp = parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Builds a directory with `fill` under a temporary name, then swaps it in.
fn write_dir_atomic(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = dir
        .file_name()
        .ok_or_else(|| Error::invalid(format!("`{}` is not a directory path", dir.display())))?
        .to_string_lossy()
        .to_string();
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    if let Err(e) = fill(&tmp) {
        let _ = std::fs::remove_dir_all(&tmp);
        return Err(e);
    }
    let old = parent.join(format!(".{name}.old-{}", std::process::id()));
    let had_old = dir.exists();
    if had_old {
        std::fs::rename(dir, &old).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
    if had_old {
        std::fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
    }
    Ok(())
}

fn put(dir: &Path, files: &mut BTreeMap<String, String>, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    files.insert(name.to_string(), sha256_hex(bytes));
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads every file listed in `files` and checks its digest.
fn read_checked(dir: &Path, files: &BTreeMap<String, String>) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for (name, digest) in files {
        let bytes = read(&dir.join(name))?;
        if sha256_hex(&bytes) != *digest {
            return Err(Error::Format(format!("{}: digest mismatch", dir.join(name).display())));
        }
        out.insert(name.clone(), bytes);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct OofRow {
    id: String,
    #[serde(flatten)]
    dist: SeverityDistribution,
}

fn oof_bytes(oof: &BTreeMap<String, SeverityDistribution>) -> Vec<u8> {
    let mut out = Vec::new();
    for (id, dist) in oof {
        serde_json::to_writer(&mut out, &OofRow { id: id.clone(), dist: *dist }).expect("oof row serializes");
        out.push(b'\n');
    }
    out
}

fn parse_oof(bytes: &[u8]) -> Result<BTreeMap<String, SeverityDistribution>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("oof table: {e}")))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: OofRow = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("oof table: {e}"),
        })?;
        if out.insert(row.id.clone(), row.dist).is_some() {
            return Err(Error::DuplicateId(row.id));
        }
    }
    Ok(out)
}

fn platform_files(dir: &Path, m: &PlatformModel, info: &ArchiveInfo) -> Result<()> {
    let mut files = BTreeMap::new();
    let p = &m.pipeline;
    put(dir, &mut files, "log_odds.json", &p.log_odds.to_bytes())?;
    put(dir, &mut files, "pls.json", &p.pls.to_bytes())?;
    put(dir, &mut files, "standardizer.json", &p.standardizer.to_bytes())?;
    put(dir, &mut files, "clf_not_clean.json", &p.ordinal.clf_not_clean.to_bytes())?;
    put(dir, &mut files, "clf_hate.json", &p.ordinal.clf_hate.to_bytes())?;
    put(dir, &mut files, "oof.jsonl", &oof_bytes(&m.oof))?;
    let manifest = PlatformManifest {
        format: PLATFORM_FORMAT.into(),
        format_version: FORMAT_VERSION,
        platform: m.platform.clone(),
        embedding_dim: m.embedding_dim(),
        n_oof: m.oof.len(),
        config: m.config.clone(),
        info: info.clone(),
        files,
    };
    let path = dir.join(MANIFEST);
    std::fs::write(&path, to_json_bytes(&manifest)).map_err(|e| Error::io(&path, e))
}

pub fn save_platform_model(dir: &Path, m: &PlatformModel, info: &ArchiveInfo) -> Result<()> {
    write_dir_atomic(dir, |tmp| platform_files(tmp, m, info))
}

pub fn read_platform_manifest(dir: &Path) -> Result<PlatformManifest> {
    let bytes = read(&dir.join(MANIFEST))?;
    let m: PlatformManifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", dir.join(MANIFEST).display())))?;
    if m.format != PLATFORM_FORMAT {
        return Err(Error::Format(format!(
            "{}: expected a platform archive, found `{}`",
            dir.display(),
            m.format
        )));
    }
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: archive format version {} is not supported (expected {FORMAT_VERSION})",
            dir.display(),
            m.format_version
        )));
    }
    Ok(m)
}

pub fn load_platform_model(dir: &Path) -> Result<(PlatformModel, PlatformManifest)> {
    let manifest = read_platform_manifest(dir)?;
    let files = read_checked(dir, &manifest.files)?;
    let get = |name: &str| {
        files
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Format(format!("{}: missing `{name}`", dir.display())))
    };
    let pipeline = Pipeline {
        log_odds: LogOddsModel::from_bytes(get("log_odds.json")?)?,
        pls: PlsModel::from_bytes(get("pls.json")?)?,
        standardizer: Standardizer::from_bytes(get("standardizer.json")?)?,
        ordinal: OrdinalClassifier {
            clf_not_clean: BinaryModel::from_bytes(get("clf_not_clean.json")?)?,
            clf_hate: BinaryModel::from_bytes(get("clf_hate.json")?)?,
            abstain_threshold: manifest.config.abstain_threshold,
        },
    };
    if pipeline.pls.input_dim() != manifest.embedding_dim {
        return Err(Error::Format(format!(
            "{}: PLS input width {} disagrees with manifest embedding dim {}",
            dir.display(),
            pipeline.pls.input_dim(),
            manifest.embedding_dim
        )));
    }
    let model = PlatformModel {
        platform: manifest.platform.clone(),
        config: manifest.config.clone(),
        pipeline,
        oof: parse_oof(get("oof.jsonl")?)?,
    };
    Ok((model, manifest))
}

fn platform_dir(root: &Path, platform: &str) -> PathBuf {
    root.join("platforms").join(platform)
}

pub fn save_superlearner(dir: &Path, sl: &SuperLearner, info: &ArchiveInfo) -> Result<()> {
    save_superlearner_with_sources(dir, sl, info, &BTreeMap::new())
}

/// Like [`save_superlearner`], but platforms listed in `sources` are copied
/// byte-for-byte from those platform archives instead of re-serialized.
pub fn save_superlearner_with_sources(
    dir: &Path,
    sl: &SuperLearner,
    info: &ArchiveInfo,
    sources: &BTreeMap<String, PathBuf>,
) -> Result<()> {
    write_dir_atomic(dir, |tmp| {
        let mut files = BTreeMap::new();
        for m in &sl.base {
            let pdir = platform_dir(tmp, &m.platform);
            std::fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;
            match sources.get(&m.platform) {
                Some(src) => copy_platform_archive(src, &pdir, &m.platform)?,
                None => platform_files(&pdir, m, info)?,
            }
            let rel = format!("platforms/{}/{MANIFEST}", m.platform);
            files.insert(rel, sha256_hex(&read(&pdir.join(MANIFEST))?));
        }
        put(tmp, &mut files, "meta.json", &sl.meta.to_bytes())?;
        let manifest = StackManifest {
            format: STACK_FORMAT.into(),
            format_version: FORMAT_VERSION,
            version: sl.version,
            platforms: sl.platforms(),
            embedding_dim: sl.base.first().map_or(0, PlatformModel::embedding_dim),
            abstain_threshold: sl.abstain_threshold,
            meta_params: sl.meta_params,
            info: info.clone(),
            files,
        };
        let path = tmp.join(MANIFEST);
        std::fs::write(&path, to_json_bytes(&manifest)).map_err(|e| Error::io(&path, e))
    })
}

fn copy_platform_archive(src: &Path, dst: &Path, platform: &str) -> Result<()> {
    let manifest = read_platform_manifest(src)?;
    if manifest.platform != platform {
        return Err(Error::Format(format!(
            "{}: holds platform `{}`, expected `{platform}`",
            src.display(),
            manifest.platform
        )));
    }
    for (name, bytes) in read_checked(src, &manifest.files)? {
        let path = dst.join(&name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    let bytes = read(&src.join(MANIFEST))?;
    let path = dst.join(MANIFEST);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

/// The directory holding `platform`'s archive inside a superlearner archive.
pub fn stacked_platform_dir(root: &Path, platform: &str) -> PathBuf {
    platform_dir(root, platform)
}

/// Errors unless `other` was fitted with the same dictionaries and embeddings.
pub fn check_compatible(expected: &ArchiveInfo, other: &ArchiveInfo, what: &str) -> Result<()> {
    if expected.lexicon_digests != other.lexicon_digests {
        return Err(Error::Format(format!("{what}: lexicon digests differ")));
    }
    if expected.embedding != other.embedding {
        return Err(Error::Format(format!(
            "{what}: embedding settings differ ({:?} vs {:?})",
            other.embedding, expected.embedding
        )));
    }
    Ok(())
}

pub fn read_stack_manifest(dir: &Path) -> Result<StackManifest> {
    let bytes = read(&dir.join(MANIFEST))?;
    let m: StackManifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", dir.join(MANIFEST).display())))?;
    if m.format != STACK_FORMAT {
        return Err(Error::Format(format!(
            "{}: expected a superlearner archive, found `{}`",
            dir.display(),
            m.format
        )));
    }
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: archive format version {} is not supported (expected {FORMAT_VERSION})",
            dir.display(),
            m.format_version
        )));
    }
    Ok(m)
}

pub fn load_superlearner(dir: &Path) -> Result<(SuperLearner, StackManifest)> {
    let manifest = read_stack_manifest(dir)?;
    let files = read_checked(dir, &manifest.files)?;
    let meta_bytes = files
        .get("meta.json")
        .ok_or_else(|| Error::Format(format!("{}: missing `meta.json`", dir.display())))?;
    let meta = MlpModel::from_bytes(meta_bytes)?;
    let mut base = Vec::with_capacity(manifest.platforms.len());
    for p in &manifest.platforms {
        let (m, pm) = load_platform_model(&platform_dir(dir, p))?;
        if m.platform != *p {
            return Err(Error::Format(format!("platform directory `{p}` holds a `{}` model", m.platform)));
        }
        check_compatible(&manifest.info, &pm.info, &format!("platform `{p}`"))?;
        base.push(m);
    }
    if meta.input_dim() != 4 * base.len() {
        return Err(Error::Format(format!(
            "meta model expects {} inputs but {} platforms are registered",
            meta.input_dim(),
            base.len()
        )));
    }
    let sl = SuperLearner {
        base,
        meta,
        meta_params: manifest.meta_params,
        version: manifest.version,
        abstain_threshold: manifest.abstain_threshold,
    };
    Ok((sl, manifest))
}

/// SHA-256 of every regular file under `dir`, keyed by relative path.
pub fn tree_digests(dir: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(dir, e))?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let path = e.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("walk stays under root");
                let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                out.insert(rel, sha256_hex(&read(&path)?));
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}
