//! Labelled messages, dataset ingestion, and the stratified splitting,
//! folding and downsampling used throughout training.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Ordinal severity of a message. The derived ordering is the severity order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SeverityLabel {
    Clean = 0,
    Offensive = 1,
    Hate = 2,
}

impl SeverityLabel {
    pub const ALL: [SeverityLabel; 3] = [
        SeverityLabel::Clean,
        SeverityLabel::Offensive,
        SeverityLabel::Hate,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityLabel::Clean => "clean",
            SeverityLabel::Offensive => "offensive",
            SeverityLabel::Hate => "hate",
        }
    }
}

impl fmt::Display for SeverityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeverityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clean" => Ok(SeverityLabel::Clean),
            "offensive" => Ok(SeverityLabel::Offensive),
            "hate" => Ok(SeverityLabel::Hate),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

impl From<SeverityLabel> for String {
    fn from(l: SeverityLabel) -> String {
        l.as_str().to_string()
    }
}

impl TryFrom<String> for SeverityLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// One social-media post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMessage {
    pub id: String,
    pub platform: String,
    #[serde(rename = "text")]
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<SeverityLabel>,
}

impl LabeledMessage {
    pub fn new(
        id: impl Into<String>,
        platform: impl Into<String>,
        text: impl Into<String>,
        label: Option<SeverityLabel>,
    ) -> Self {
        Self {
            id: id.into(),
            platform: platform.into(),
            raw_text: text.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// `.csv` is CSV, anything else is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

/// An ordered, validated collection of messages. Counts are computed at
/// construction and the value is immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    messages: Vec<LabeledMessage>,
    class_counts: [usize; 3],
    unlabeled: usize,
    platform_counts: BTreeMap<String, usize>,
}

impl Dataset {
    pub fn new(messages: Vec<LabeledMessage>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(messages.len());
        let mut class_counts = [0usize; 3];
        let mut unlabeled = 0;
        let mut platform_counts = BTreeMap::new();
        for m in &messages {
            if m.id.is_empty() {
                return Err(Error::invalid("message with empty id"));
            }
            if m.raw_text.is_empty() {
                return Err(Error::invalid(format!("message `{}` has empty text", m.id)));
            }
            if !seen.insert(m.id.as_str()) {
                return Err(Error::DuplicateId(m.id.clone()));
            }
            match m.label {
                Some(l) => class_counts[l.index()] += 1,
                None => unlabeled += 1,
            }
            *platform_counts.entry(m.platform.clone()).or_insert(0) += 1;
        }
        Ok(Self {
            messages,
            class_counts,
            unlabeled,
            platform_counts,
        })
    }

    pub fn empty() -> Self {
        Self {
            messages: Vec::new(),
            class_counts: [0; 3],
            unlabeled: 0,
            platform_counts: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn messages(&self) -> &[LabeledMessage] {
        &self.messages
    }

    pub fn into_messages(self) -> Vec<LabeledMessage> {
        self.messages
    }

    /// Counts indexed by `SeverityLabel::index`.
    pub fn class_counts(&self) -> [usize; 3] {
        self.class_counts
    }

    pub fn unlabeled_count(&self) -> usize {
        self.unlabeled
    }

    pub fn platform_counts(&self) -> &BTreeMap<String, usize> {
        &self.platform_counts
    }

    pub fn platforms(&self) -> Vec<String> {
        self.platform_counts.keys().cloned().collect()
    }

    /// Labels of every message; fails if any message is unlabeled.
    pub fn labels(&self) -> Result<Vec<SeverityLabel>> {
        self.messages
            .iter()
            .map(|m| {
                m.label
                    .ok_or_else(|| Error::invalid(format!("message `{}` has no label", m.id)))
            })
            .collect()
    }

    /// Dataset of the messages at `indices`, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let messages = indices.iter().map(|&i| self.messages[i].clone()).collect();
        // ids stay unique because indices come from this dataset
        Dataset::new(messages).expect("subset of a valid dataset with distinct indices")
    }

    pub fn filter_platform(&self, platform: &str) -> Dataset {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.messages[i].platform == platform)
            .collect();
        self.subset(&idx)
    }

    /// Concatenates datasets, rejecting duplicate ids across them.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Result<Dataset> {
        let messages = parts
            .into_iter()
            .flat_map(|d| d.messages.iter().cloned())
            .collect();
        Dataset::new(messages)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for m in &self.messages {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn from_jsonl_reader<R: Read>(r: R) -> Result<Dataset> {
        let reader = BufReader::new(r);
        let mut messages = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            messages.push(rec.into_message(line_no)?);
        }
        finish_load(messages)
    }

    pub fn from_csv_reader<R: Read>(r: R) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut messages = Vec::new();
        for (i, rec) in reader.deserialize::<RawRecord>().enumerate() {
            // header is line 1
            let line_no = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            messages.push(rec.into_message(line_no)?);
        }
        finish_load(messages)
    }
}

fn finish_load(messages: Vec<LabeledMessage>) -> Result<Dataset> {
    if messages.is_empty() {
        return Err(Error::invalid("dataset file contains no records"));
    }
    Dataset::new(messages)
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    platform: Option<String>,
    text: Option<String>,
    #[serde(default)]
    label: Option<String>,
}

impl RawRecord {
    fn into_message(self, line: usize) -> Result<LabeledMessage> {
        let missing = |field: &str| Error::Parse {
            line,
            message: format!("missing `{field}` field"),
        };
        let id = self.id.ok_or_else(|| missing("id"))?;
        let platform = self.platform.ok_or_else(|| missing("platform"))?;
        let text = self.text.ok_or_else(|| missing("text"))?;
        let label = match self.label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<SeverityLabel>().map_err(|_| Error::Parse {
                line,
                message: format!("unknown label `{s}`"),
            })?),
        };
        if id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty id".into(),
            });
        }
        if text.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty text".into(),
            });
        }
        Ok(LabeledMessage {
            id,
            platform,
            raw_text: text,
            label,
        })
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        DatasetFormat::Jsonl => Dataset::from_jsonl_reader(file),
        DatasetFormat::Csv => Dataset::from_csv_reader(file),
    }
}

/// Shuffled member indices per class, in the order they will be consumed.
fn shuffled_class_members(labels: &[usize], n_classes: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    for (c, m) in members.iter_mut().enumerate() {
        let mut r = rng::seeded(rng::derive(seed, c as u64 + 1));
        m.shuffle(&mut r);
    }
    members
}

/// Per-class split of `labels` into (train, test) index lists, both sorted.
/// Each class contributes `round(train_frac * count)` rows to train, with
/// halves rounding up.
pub fn stratified_split_indices(
    labels: &[usize],
    n_classes: usize,
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac <= 1.0) {
        return Err(Error::invalid(format!(
            "train_frac must lie in (0, 1], got {train_frac}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, members) in shuffled_class_members(labels, n_classes, seed)
        .into_iter()
        .enumerate()
    {
        if members.is_empty() {
            log::warn!("stratified split: class {c} has no members");
            continue;
        }
        let n_train = (train_frac * members.len() as f64).round() as usize;
        let n_train = n_train.min(members.len());
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(d: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let labels: Vec<usize> = d.labels()?.iter().map(|l| l.index()).collect();
    let (train, test) = stratified_split_indices(&labels, 3, train_frac, seed)?;
    Ok((d.subset(&train), d.subset(&test)))
}

/// One cross-validation fold as sorted index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified k-fold over integer class labels. Every class in `0..n_classes`
/// must have at least `k` members.
pub fn stratified_kfold_indices(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    let members = shuffled_class_members(labels, n_classes, seed);
    let small: Vec<String> = members
        .iter()
        .enumerate()
        .filter(|(_, m)| m.len() < k)
        .map(|(c, m)| format!("class {c} has {} members", m.len()))
        .collect();
    if !small.is_empty() {
        return Err(Error::invalid(format!(
            "stratified {k}-fold impossible: {}",
            small.join(", ")
        )));
    }
    let mut fold_of = vec![0usize; labels.len()];
    // round-robin continues across classes so total fold sizes stay balanced
    let mut cursor = 0usize;
    for m in &members {
        for &i in m {
            fold_of[i] = cursor % k;
            cursor += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| fold_of[i] == f);
            Fold { train, validation }
        })
        .collect())
}

pub fn stratified_kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let labels: Vec<usize> = d.labels()?.iter().map(|l| l.index()).collect();
    stratified_kfold_indices(&labels, 3, k, seed)
}

/// Indices kept after capping every class at `ceil(ratio * m)`, where `m` is
/// the size of the smallest non-empty class. Output is sorted.
pub fn downsample_indices(labels: &[usize], n_classes: usize, ratio: f64, seed: u64) -> Vec<usize> {
    let members = shuffled_class_members(labels, n_classes, rng::derive(seed, 0xD0));
    let Some(m) = members.iter().map(Vec::len).filter(|&n| n > 0).min() else {
        return Vec::new();
    };
    let cap = (ratio.max(1.0) * m as f64).ceil() as usize;
    let mut kept: Vec<usize> = members
        .into_iter()
        .flat_map(|mut v| {
            v.truncate(cap);
            v
        })
        .collect();
    kept.sort_unstable();
    kept
}

pub fn downsample_majority(d: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    if ratio < 1.0 {
        return Err(Error::invalid(format!("downsample ratio must be >= 1, got {ratio}")));
    }
    let labels: Vec<usize> = d.labels()?.iter().map(|l| l.index()).collect();
    Ok(d.subset(&downsample_indices(&labels, 3, ratio, seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(counts: [usize; 3]) -> Dataset {
        let mut msgs = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                msgs.push(LabeledMessage::new(
                    format!("m{c}_{i}"),
                    "facebook",
                    format!("message number {i}"),
                    SeverityLabel::from_index(c),
                ));
            }
        }
        Dataset::new(msgs).unwrap()
    }

    #[test]
    fn label_order_and_parse() {
        assert!(SeverityLabel::Clean < SeverityLabel::Offensive);
        assert!(SeverityLabel::Offensive < SeverityLabel::Hate);
        assert_eq!("HATE".parse::<SeverityLabel>().unwrap(), SeverityLabel::Hate);
        for l in SeverityLabel::ALL {
            assert_eq!(l.to_string().parse::<SeverityLabel>().unwrap(), l);
        }
        assert!("hateful".parse::<SeverityLabel>().is_err());
    }

    #[test]
    fn jsonl_three_lines() {
        let src = r#"{"id":"a","platform":"gab","text":"hello there","label":"clean"}
{"id":"b","platform":"gab","text":"you flark","label":"offensive"}
{"id":"c","platform":"gab","text":"those grexlins","label":"HATE"}
"#;
        let d = Dataset::from_jsonl_reader(src.as_bytes()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.class_counts(), [1, 1, 1]);
        assert_eq!(d.platform_counts()["gab"], 3);
        assert_eq!(d.messages()[2].label, Some(SeverityLabel::Hate));
    }

    #[test]
    fn jsonl_missing_text_names_line() {
        let src = "{\"id\":\"a\",\"platform\":\"gab\",\"text\":\"ok then\"}\n{\"id\":\"b\",\"platform\":\"gab\"}\n";
        match Dataset::from_jsonl_reader(src.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("text"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_rejects_duplicates_unknown_labels_and_empty() {
        let dup = "{\"id\":\"a\",\"platform\":\"x\",\"text\":\"t\"}\n{\"id\":\"a\",\"platform\":\"x\",\"text\":\"u\"}\n";
        assert!(matches!(
            Dataset::from_jsonl_reader(dup.as_bytes()),
            Err(Error::DuplicateId(_))
        ));
        let bad = "{\"id\":\"a\",\"platform\":\"x\",\"text\":\"t\",\"label\":\"awful\"}\n";
        assert!(matches!(
            Dataset::from_jsonl_reader(bad.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(Dataset::from_jsonl_reader("".as_bytes()).is_err());
    }

    #[test]
    fn csv_with_quoting() {
        let src = "id,platform,text,label\n1,twitter,\"hello, world\",clean\n2,twitter,\"he said \"\"no\"\"\",Offensive\n";
        let d = Dataset::from_csv_reader(src.as_bytes()).unwrap();
        assert_eq!(d.messages()[0].raw_text, "hello, world");
        assert_eq!(d.messages()[1].raw_text, "he said \"no\"");
        assert_eq!(d.class_counts(), [1, 1, 0]);
    }

    #[test]
    fn split_counts_follow_rounding_rule() {
        let d = synthetic([70, 12, 18]);
        let (train, test) = stratified_split(&d, 0.8, 7).unwrap();
        // counting oracle: round(0.8 * n) per class
        let expected = [70, 12, 18].map(|n: usize| (0.8 * n as f64).round() as usize);
        assert_eq!(expected, [56, 10, 14]);
        let got = train.class_counts();
        for c in 0..3 {
            assert!(got[c].abs_diff(expected[c]) <= 1);
        }
        assert_eq!(train.len() + test.len(), 100);
    }

    #[test]
    fn split_full_fraction_and_determinism() {
        let d = synthetic([10, 5, 5]);
        let (train, test) = stratified_split(&d, 1.0, 1).unwrap();
        assert!(test.is_empty());
        assert_eq!(train, d);
        let a = stratified_split(&d, 0.6, 42).unwrap();
        let b = stratified_split(&d, 0.6, 42).unwrap();
        assert_eq!(a, b);
        assert!(stratified_split(&d, 0.0, 1).is_err());
    }

    #[test]
    fn kfold_one_of_each_class_per_fold() {
        let d = synthetic([10, 10, 10]);
        let folds = stratified_kfold(&d, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        let labels = d.labels().unwrap();
        let mut seen = vec![0usize; d.len()];
        for f in &folds {
            let mut per_class = [0usize; 3];
            for &i in &f.validation {
                per_class[labels[i].index()] += 1;
                seen[i] += 1;
                assert!(!f.train.contains(&i));
            }
            assert_eq!(per_class, [1, 1, 1]);
            assert_eq!(f.train.len() + f.validation.len(), d.len());
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn kfold_rejects_small_classes() {
        let d = synthetic([2, 1, 1]);
        let err = stratified_kfold(&d, 2, 0).unwrap_err().to_string();
        assert!(err.contains("class 1") && err.contains("class 2"));
    }

    #[test]
    fn downsample_rule() {
        let d = synthetic([100, 30, 20]);
        assert_eq!(downsample_majority(&d, 2.0, 5).unwrap().class_counts(), [40, 30, 20]);
        let d = synthetic([30, 30, 20]);
        assert_eq!(downsample_majority(&d, 2.0, 5).unwrap().class_counts(), [30, 30, 20]);
        let d = synthetic([5, 5, 5]);
        assert_eq!(downsample_majority(&d, 2.0, 5).unwrap(), d);
        // ceiling: m = 3, ratio 1.5 -> cap 5
        let d = synthetic([9, 3, 4]);
        assert_eq!(downsample_majority(&d, 1.5, 5).unwrap().class_counts(), [5, 3, 4]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_is_partition(a in 1usize..40, b in 1usize..40, c in 1usize..40,
                                  frac in 0.05f64..1.0, seed in any::<u64>()) {
                let d = synthetic([a, b, c]);
                let (tr, te) = stratified_split(&d, frac, seed).unwrap();
                let mut ids: Vec<&str> = tr.messages().iter().chain(te.messages())
                    .map(|m| m.id.as_str()).collect();
                ids.sort_unstable();
                let mut all: Vec<&str> = d.messages().iter().map(|m| m.id.as_str()).collect();
                all.sort_unstable();
                prop_assert_eq!(ids, all);
            }

            #[test]
            fn kfold_sizes_balanced(a in 5usize..30, b in 5usize..30, c in 5usize..30,
                                    k in 2usize..6, seed in any::<u64>()) {
                let d = synthetic([a, b, c]);
                let folds = stratified_kfold(&d, k, seed).unwrap();
                let labels = d.labels().unwrap();
                for cls in 0..3 {
                    let sizes: Vec<usize> = folds.iter()
                        .map(|f| f.validation.iter().filter(|&&i| labels[i].index() == cls).count())
                        .collect();
                    let lo = *sizes.iter().min().unwrap();
                    let hi = *sizes.iter().max().unwrap();
                    prop_assert!(hi - lo <= 1);
                }
            }

            #[test]
            fn downsample_keeps_minority(a in 1usize..60, b in 1usize..60, c in 1usize..60,
                                         seed in any::<u64>()) {
                let d = synthetic([a, b, c]);
                let out = downsample_majority(&d, 2.0, seed).unwrap();
                let m = a.min(b).min(c);
                let counts = out.class_counts();
                for (cls, &n) in [a, b, c].iter().enumerate() {
                    if n == m { prop_assert_eq!(counts[cls], n); }
                    prop_assert!(counts[cls] <= n);
                }
                prop_assert_eq!(out, downsample_majority(&d, 2.0, seed).unwrap());
            }
        }
    }
}
