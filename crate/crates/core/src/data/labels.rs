//! MOS label manifests: `clip_id,mos,split` CSV files.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LABEL_HEADER: [&str; 3] = ["clip_id", "mos", "split"];
pub const MOS_MIN: f64 = 1.0;
pub const MOS_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "dev")]
    Dev,
    #[serde(rename = "test-main")]
    TestMain,
    #[serde(rename = "test-other1")]
    TestOther1,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Dev, Split::TestMain, Split::TestOther1];
    pub const TEST: [Split; 2] = [Split::TestMain, Split::TestOther1];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::TestMain => "test-main",
            Split::TestOther1 => "test-other1",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown split `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipLabel {
    pub clip_id: String,
    pub mos: f64,
    pub split: Split,
}

/// Parses a label CSV. Rows are numbered from 1 for the first data row.
pub fn parse_labels(text: &str) -> Result<Vec<ClipLabel>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(LABEL_HEADER) {
        return Err(Error::Validation {
            row: 0,
            msg: format!("header must be `clip_id,mos,split`, got `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut seen = HashSet::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Validation { row, msg: e.to_string() })?;
        let (clip_id, mos, split) = (&rec[0], &rec[1], &rec[2]);
        if clip_id.is_empty() {
            return Err(Error::Validation { row, msg: "empty clip_id".into() });
        }
        let mos: f64 = mos.parse().map_err(|_| Error::Validation {
            row,
            msg: format!("mos `{mos}` is not a number"),
        })?;
        if !(MOS_MIN..=MOS_MAX).contains(&mos) {
            return Err(Error::Validation {
                row,
                msg: format!("mos {mos} outside [{MOS_MIN}, {MOS_MAX}]"),
            });
        }
        let split: Split = split.parse().map_err(|_| Error::Validation {
            row,
            msg: format!("unknown split `{split}` (expected train, dev, test-main or test-other1)"),
        })?;
        if !seen.insert(clip_id.to_owned()) {
            return Err(Error::Validation {
                row,
                msg: format!("duplicate clip_id `{clip_id}`"),
            });
        }
        labels.push(ClipLabel {
            clip_id: clip_id.to_owned(),
            mos,
            split,
        });
    }
    Ok(labels)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<ClipLabel>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text)
}

/// Serialises labels with LF line endings. MOS uses the shortest round-trip representation.
pub fn labels_to_csv(labels: &[ClipLabel]) -> String {
    let mut out = String::from("clip_id,mos,split\n");
    for l in labels {
        out.push_str(&format!("{},{},{}\n", l.clip_id, l.mos, l.split));
    }
    out
}

pub fn write_labels(labels: &[ClipLabel], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, labels_to_csv(labels)).map_err(|e| Error::io(path, e))
}

pub fn split_of(labels: &[ClipLabel], split: Split) -> Vec<&ClipLabel> {
    labels.iter().filter(|l| l.split == split).collect()
}
