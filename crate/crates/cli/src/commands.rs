use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use hatestack::archive::{
    check_compatible, load_platform_model, load_superlearner, read_platform_manifest, save_platform_model,
    save_superlearner_with_sources, stacked_platform_dir, write_atomic, ArchiveInfo,
};
use hatestack::config::{EmbeddingSpec, RunConfig};
use hatestack::corpus::{load_dataset, stratified_split, DatasetFormat};
use hatestack::embeddings::EmbeddingProvider;
use hatestack::eval::{self, AbstainMode};
use hatestack::features::{FeatureExtractor, HeuristicTagger, Lexicons};
use hatestack::ordinal::SeverityDistribution;
use hatestack::preprocess::{clean_text, is_viable};
use hatestack::stack::{
    add_platform_model, build_meta_rows, prepare_messages, train_platform_model, train_superlearner, MessageInput,
    PlatformModel, PredictionAudit, SuperLearner, NOT_VIABLE,
};
use hatestack::synth::{default_profiles, generate_corpus, profile_by_name};
use hatestack::{Dataset, Error, LabeledMessage, Result, SeverityLabel};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{Command, Global};

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_workers(n: usize) -> Result<()> {
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("cannot start {n} workers: {e}")))?;
    }
    Ok(())
}

fn archive_info(cfg: &RunConfig, lex: &Lexicons) -> ArchiveInfo {
    ArchiveInfo {
        config_hash: cfg.hash(),
        lexicon_digests: lex.digests(),
        embedding: cfg.embedding_spec(),
    }
}

fn extractor(lex: Lexicons) -> FeatureExtractor {
    FeatureExtractor::new(lex, Box::new(HeuristicTagger::default()))
}

/// The provider an archive was fitted with; external tables come from the
/// configured path.
fn provider_for(spec: &EmbeddingSpec, cfg: &RunConfig) -> Result<EmbeddingProvider> {
    spec.provider(cfg.embedding_path.as_deref())
}

fn load(path: &Path) -> Result<Dataset> {
    load_dataset(path, DatasetFormat::from_path(path))
}

fn load_all(paths: &[PathBuf]) -> Result<Dataset> {
    let parts = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    Dataset::concat(&parts)
}

fn json_line<T: Serialize>(out: &mut Vec<u8>, v: &T) {
    serde_json::to_writer(&mut *out, v).expect("record serializes");
    out.push(b'\n');
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn write_pretty<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut bytes = pretty(v).into_bytes();
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prep { .. } => "prep",
            Command::Synth { .. } => "synth",
            Command::TrainPlatform { .. } => "train-platform",
            Command::TrainStack { .. } => "train-stack",
            Command::Predict { .. } => "predict",
            Command::Eval { .. } => "eval",
            Command::AddPlatform { .. } => "add-platform",
            Command::Agreement { .. } => "agreement",
        }
    }
}

pub fn run(g: &Global, cmd: Command) -> Result<()> {
    let cfg = load_config(g)?;
    init_workers(cfg.workers)?;
    match cmd {
        Command::Prep { input, output } => prep(&input, &output),
        Command::Synth {
            out,
            n,
            platforms,
            split,
        } => synth(&cfg, &out, n, &platforms, split),
        Command::TrainPlatform { data, out, platform } => train_platform(&cfg, &data, &out, platform.as_deref()),
        Command::TrainStack { archives, data, out } => train_stack(&cfg, &archives, &data, &out),
        Command::Predict { model, input, output } => predict(&cfg, &model, &input, &output),
        Command::Eval {
            predictions,
            truth,
            abstain,
            grid,
            archives,
            output,
        } => {
            let mode: AbstainMode = abstain.parse().map_err(|e: Error| usage(e.to_string()))?;
            if grid {
                eval_grid(&cfg, &archives, &truth, mode, output.as_deref())
            } else {
                let predictions = predictions.ok_or_else(|| usage("--predictions is required"))?;
                eval_predictions(&predictions, &truth, mode, output.as_deref())
            }
        }
        Command::AddPlatform {
            model,
            archive,
            data,
            out,
        } => add_platform(&cfg, &model, &archive, &data, &out),
        Command::Agreement { a, b } => agreement(&a, &b),
    }
}

#[derive(Serialize)]
struct PrepRecord<'a> {
    id: &'a str,
    platform: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<SeverityLabel>,
    tokens: &'a [String],
    sentence_count: usize,
    punct_count: usize,
    hashtag_count: usize,
    char_count_original: usize,
}

#[derive(Serialize)]
struct SkipRecord<'a> {
    id: &'a str,
    skipped: &'a str,
}

fn prep(input: &Path, output: &Path) -> Result<()> {
    let d = load(input)?;
    let mut out = Vec::new();
    let mut skipped = 0;
    for m in d.messages() {
        let cleaned = if is_viable(&m.raw_text) {
            clean_text(m).map_err(|e| e.to_string())
        } else {
            Err(NOT_VIABLE.to_string())
        };
        match cleaned {
            Ok(cm) => json_line(
                &mut out,
                &PrepRecord {
                    id: &m.id,
                    platform: &m.platform,
                    label: m.label,
                    tokens: &cm.tokens,
                    sentence_count: cm.sentence_count,
                    punct_count: cm.punct_count,
                    hashtag_count: cm.hashtag_count,
                    char_count_original: cm.char_count_original,
                },
            ),
            Err(reason) => {
                skipped += 1;
                json_line(&mut out, &SkipRecord { id: &m.id, skipped: &reason });
            }
        }
    }
    write_atomic(output, &out)?;
    log::info!("prep: {} messages, {skipped} skipped", d.len());
    Ok(())
}

fn dataset_bytes(d: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    d.write_jsonl(&mut out).expect("in-memory write");
    out
}

fn synth(cfg: &RunConfig, out: &Path, n: usize, names: &[String], split: bool) -> Result<()> {
    let profiles = if names.is_empty() {
        default_profiles()
    } else {
        names
            .iter()
            .map(|name| profile_by_name(name).ok_or_else(|| usage(format!("unknown profile `{name}`"))))
            .collect::<Result<Vec<_>>>()?
    };
    let mut files = BTreeMap::new();
    for p in &profiles {
        let d = generate_corpus(std::slice::from_ref(p), n, cfg.seed)?;
        let mut entry = json!({ "all": format!("{}.jsonl", p.name), "class_counts": d.class_counts() });
        write_atomic(&out.join(format!("{}.jsonl", p.name)), &dataset_bytes(&d))?;
        if split {
            let (train, test) = stratified_split(&d, cfg.train_frac, cfg.seed)?;
            write_atomic(&out.join(format!("{}.train.jsonl", p.name)), &dataset_bytes(&train))?;
            write_atomic(&out.join(format!("{}.test.jsonl", p.name)), &dataset_bytes(&test))?;
            entry["train"] = json!(format!("{}.train.jsonl", p.name));
            entry["test"] = json!(format!("{}.test.jsonl", p.name));
        }
        files.insert(p.name.clone(), entry);
    }
    let manifest = json!({
        "seed": cfg.seed,
        "n_per_platform": n,
        "train_frac": split.then_some(cfg.train_frac),
        "profiles": profiles,
        "files": files,
    });
    write_pretty(&out.join("profiles.json"), &manifest)
}

fn train_platform(cfg: &RunConfig, data: &Path, out: &Path, platform: Option<&str>) -> Result<()> {
    let d = load(data)?;
    let platform = match platform {
        Some(p) => p.to_string(),
        None => match d.platforms().as_slice() {
            [only] => only.clone(),
            many => {
                return Err(usage(format!(
                    "dataset holds platforms {many:?}; choose one with --platform"
                )))
            }
        },
    };
    let d = d.filter_platform(&platform);
    if d.is_empty() {
        return Err(Error::InvalidInput(format!("no messages for platform `{platform}`")));
    }
    let lex = cfg.lexicons()?;
    let info = archive_info(cfg, &lex);
    let provider = cfg.embedding_provider()?;
    let prepared = prepare_messages(d.messages(), &extractor(lex), &provider)?;
    let (model, report) = train_platform_model(&platform, &prepared.inputs, &cfg.pipeline())?;
    save_platform_model(out, &model, &info)?;
    let summary = json!({
        "archive": out,
        "config_hash": info.config_hash,
        "skipped": prepared.skipped.len(),
        "report": report,
    });
    emit(&format!("{}\n", pretty(&summary)));
    Ok(())
}

/// Loads platform archives and checks them against the running settings.
fn load_platforms(paths: &[PathBuf], info: &ArchiveInfo) -> Result<Vec<(PlatformModel, PathBuf)>> {
    paths
        .iter()
        .map(|p| {
            let (m, manifest) = load_platform_model(p)?;
            check_compatible(info, &manifest.info, &p.display().to_string())?;
            Ok((m, p.clone()))
        })
        .collect()
}

fn meta_accuracy(sl: &SuperLearner, rows: &[(hatestack::stack::MetaFeatures, SeverityLabel)]) -> Result<f64> {
    let mut correct = 0usize;
    for (mf, y) in rows {
        if sl.predict_meta(mf)?.decision() == Some(*y) {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len().max(1) as f64)
}

fn meta_corpus(cfg: &RunConfig, data: &[PathBuf], lex: Lexicons, spec: &EmbeddingSpec) -> Result<(Vec<MessageInput>, usize)> {
    let d = load_all(data)?;
    let provider = provider_for(spec, cfg)?;
    let prepared = prepare_messages(d.messages(), &extractor(lex), &provider)?;
    Ok((prepared.inputs, prepared.skipped.len()))
}

fn train_stack(cfg: &RunConfig, archives: &[PathBuf], data: &[PathBuf], out: &Path) -> Result<()> {
    if archives.len() < 2 {
        return Err(usage(format!("stacking needs at least 2 platform archives, got {}", archives.len())));
    }
    let lex = cfg.lexicons()?;
    let info = archive_info(cfg, &lex);
    let loaded = load_platforms(archives, &info)?;
    let (inputs, skipped) = meta_corpus(cfg, data, lex, &info.embedding)?;
    let sources: BTreeMap<String, PathBuf> = loaded.iter().map(|(m, p)| (m.platform.clone(), p.clone())).collect();
    let base: Vec<PlatformModel> = loaded.into_iter().map(|(m, _)| m).collect();
    let audit = PredictionAudit::default();
    let rows = build_meta_rows(&base.iter().collect::<Vec<_>>(), &inputs, Some(&audit))?;
    let sl = train_superlearner(base, &rows, &cfg.meta_params(), cfg.abstain_threshold)?;
    save_superlearner_with_sources(out, &sl, &info, &sources)?;
    let summary = json!({
        "archive": out,
        "version": sl.version,
        "platforms": sl.platforms(),
        "config_hash": info.config_hash,
        "meta_rows": rows.len(),
        "skipped": skipped,
        "meta_train_accuracy": meta_accuracy(&sl, &rows)?,
        "oof_reads": audit.oof_reads(),
        "full_predictions": audit.full_predictions(),
        "own_row_full_predictions": audit.own_row_full_predictions(),
    });
    emit(&format!("{}\n", pretty(&summary)));
    Ok(())
}

fn add_platform(cfg: &RunConfig, model: &Path, archive: &Path, data: &[PathBuf], out: &Path) -> Result<()> {
    let (sl, manifest) = load_superlearner(model)?;
    let (new_model, new_manifest) = load_platform_model(archive)?;
    check_compatible(&manifest.info, &new_manifest.info, &archive.display().to_string())?;
    let lex = cfg.lexicons()?;
    if lex.digests() != manifest.info.lexicon_digests {
        return Err(Error::Format(format!(
            "{}: configured lexicons differ from the ones the superlearner was fitted with",
            model.display()
        )));
    }
    let mut sources: BTreeMap<String, PathBuf> = sl
        .platforms()
        .into_iter()
        .map(|p| {
            let dir = stacked_platform_dir(model, &p);
            (p, dir)
        })
        .collect();
    sources.insert(new_model.platform.clone(), archive.to_path_buf());
    let (inputs, skipped) = meta_corpus(cfg, data, lex, &manifest.info.embedding)?;
    let audit = PredictionAudit::default();
    let sl2 = add_platform_model(&sl, new_model, &inputs, Some(&audit))?;
    save_superlearner_with_sources(out, &sl2, &manifest.info, &sources)?;
    let summary = json!({
        "archive": out,
        "version": sl2.version,
        "platforms": sl2.platforms(),
        "meta_rows": inputs.len(),
        "skipped": skipped,
        "oof_reads": audit.oof_reads(),
        "own_row_full_predictions": audit.own_row_full_predictions(),
    });
    emit(&format!("{}\n", pretty(&summary)));
    Ok(())
}

#[derive(Serialize)]
struct PredictionRecord<'a> {
    id: &'a str,
    p_clean: f64,
    p_offensive: f64,
    p_hate: f64,
    label: SeverityLabel,
    abstained: bool,
}

/// One line of a predictions file; `skipped` rows carry only an id and a
/// reason.
#[derive(Deserialize)]
struct PredictionLine {
    id: String,
    p_clean: Option<f64>,
    p_offensive: Option<f64>,
    p_hate: Option<f64>,
    abstained: Option<bool>,
    skipped: Option<String>,
}

fn predict(cfg: &RunConfig, model: &Path, input: &Path, output: &Path) -> Result<()> {
    let (sl, manifest) = load_superlearner(model)?;
    let lex = cfg.lexicons()?;
    if lex.digests() != manifest.info.lexicon_digests {
        return Err(Error::Format(format!(
            "{}: configured lexicons differ from the ones the model was fitted with",
            model.display()
        )));
    }
    let provider = provider_for(&manifest.info.embedding, cfg)?;
    let d = load(input)?;
    let prepared = prepare_messages(d.messages(), &extractor(lex), &provider)?;
    let dists = sl.predict_all(&prepared.inputs)?;
    let scored: BTreeMap<&str, &SeverityDistribution> =
        prepared.inputs.iter().map(|m| m.id.as_str()).zip(&dists).collect();
    let reasons: BTreeMap<&str, &str> = prepared.skipped.iter().map(|(id, r)| (id.as_str(), r.as_str())).collect();
    let mut out = Vec::new();
    for m in d.messages() {
        match scored.get(m.id.as_str()) {
            Some(dist) => json_line(
                &mut out,
                &PredictionRecord {
                    id: &m.id,
                    p_clean: dist.p_clean,
                    p_offensive: dist.p_offensive,
                    p_hate: dist.p_hate,
                    label: dist.label(),
                    abstained: dist.abstained,
                },
            ),
            None => json_line(
                &mut out,
                &SkipRecord {
                    id: &m.id,
                    skipped: reasons.get(m.id.as_str()).copied().unwrap_or(NOT_VIABLE),
                },
            ),
        }
    }
    write_atomic(output, &out)?;
    log::info!("predict: {} scored, {} skipped", dists.len(), prepared.skipped.len());
    Ok(())
}

fn read_predictions(path: &Path) -> Result<BTreeMap<String, SeverityDistribution>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parse = |message: String| Error::Parse { line: i + 1, message };
        let rec: PredictionLine = serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
        let dist = match (rec.skipped, rec.p_clean, rec.p_offensive, rec.p_hate) {
            // A skipped message counts as an abstention with no preference.
            (Some(_), ..) => SeverityDistribution {
                p_clean: 1.0 / 3.0,
                p_offensive: 1.0 / 3.0,
                p_hate: 1.0 / 3.0,
                abstained: true,
            },
            (None, Some(p_clean), Some(p_offensive), Some(p_hate)) => SeverityDistribution {
                p_clean,
                p_offensive,
                p_hate,
                abstained: rec.abstained.unwrap_or(false),
            },
            _ => return Err(parse(format!("record `{}` lacks probabilities", rec.id))),
        };
        if out.insert(rec.id.clone(), dist).is_some() {
            return Err(Error::DuplicateId(rec.id));
        }
    }
    Ok(out)
}

fn labelled(d: &Dataset) -> Result<Vec<(&LabeledMessage, SeverityLabel)>> {
    d.messages()
        .iter()
        .map(|m| {
            m.label
                .map(|l| (m, l))
                .ok_or_else(|| Error::InvalidInput(format!("message `{}` has no label", m.id)))
        })
        .collect()
}

fn eval_predictions(predictions: &Path, truth: &[PathBuf], mode: AbstainMode, output: Option<&Path>) -> Result<()> {
    let preds = read_predictions(predictions)?;
    let truth = load_all(truth)?;
    let rows = labelled(&truth)?;
    let mut dists = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (m, l) in &rows {
        let d = preds
            .get(&m.id)
            .ok_or_else(|| Error::InvalidInput(format!("no prediction for `{}`", m.id)))?;
        dists.push(*d);
        labels.push(*l);
    }
    let known: BTreeSet<&str> = rows.iter().map(|(m, _)| m.id.as_str()).collect();
    if let Some(extra) = preds.keys().find(|id| !known.contains(id.as_str())) {
        return Err(Error::InvalidInput(format!("prediction `{extra}` has no labelled message")));
    }
    let report = eval::evaluate(&dists, &labels, mode)?;
    if let Some(path) = output {
        write_pretty(path, &report)?;
    }
    emit(&eval::render_table(&report));
    Ok(())
}

fn eval_grid(cfg: &RunConfig, archives: &[PathBuf], truth: &[PathBuf], mode: AbstainMode, output: Option<&Path>) -> Result<()> {
    if archives.is_empty() {
        return Err(usage("grid mode needs at least one --archive"));
    }
    let lex = cfg.lexicons()?;
    let first = read_platform_manifest(&archives[0])?.info;
    if lex.digests() != first.lexicon_digests {
        return Err(Error::Format("configured lexicons differ from the archives'".into()));
    }
    let models: Vec<PlatformModel> = load_platforms(archives, &first)?.into_iter().map(|(m, _)| m).collect();
    let d = load_all(truth)?;
    labelled(&d)?;
    let provider = provider_for(&first.embedding, cfg)?;
    let prepared = prepare_messages(d.messages(), &extractor(lex), &provider)?;
    let mut tests: BTreeMap<String, Vec<MessageInput>> = BTreeMap::new();
    for m in prepared.inputs {
        tests.entry(m.platform.clone()).or_default().push(m);
    }
    let grid = eval::cross_platform_grid(&models.iter().collect::<Vec<_>>(), &tests, mode)?;
    if let Some(path) = output {
        write_pretty(path, &grid)?;
    }
    emit(&eval::render_grid(&grid));
    Ok(())
}

fn agreement(a: &Path, b: &Path) -> Result<()> {
    let da = load(a)?;
    let db = load(b)?;
    let lb: BTreeMap<&str, SeverityLabel> = labelled(&db)?.into_iter().map(|(m, l)| (m.id.as_str(), l)).collect();
    let la = labelled(&da)?;
    if la.len() != lb.len() {
        return Err(Error::InvalidInput(format!(
            "annotation files differ in size ({} vs {})",
            la.len(),
            lb.len()
        )));
    }
    let mut xs = Vec::with_capacity(la.len());
    let mut ys = Vec::with_capacity(la.len());
    for (m, l) in la {
        let other = lb
            .get(m.id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("`{}` is missing from {}", m.id, b.display())))?;
        xs.push(l);
        ys.push(*other);
    }
    emit(&format!("{}\n", pretty(&eval::agreement(&xs, &ys)?)));
    Ok(())
}
