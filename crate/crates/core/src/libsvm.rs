//! Sparse `label idx:val ...` text format, densified on load.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::{Dataset, Label, LabeledSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// At least one `0` label was read and mapped to `−1`.
    pub mapped_zero_labels: bool,
}

fn parse_label(token: &str, line: usize) -> Result<(Label, bool)> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        reason: format!("label `{token}` is not a number"),
    })?;
    if v == 1.0 {
        Ok((Label::Positive, false))
    } else if v == -1.0 {
        Ok((Label::Negative, false))
    } else if v == 0.0 {
        Ok((Label::Negative, true))
    } else {
        Err(Error::Parse {
            line,
            reason: format!("invalid label `{token}`, expected -1, +1, 0 or 1"),
        })
    }
}

/// Parses libsvm text. `min_dim` pads every row to at least that many
/// features (useful when a test file never mentions the last index).
pub fn parse_libsvm(text: &str, min_dim: usize) -> Result<LoadedDataset> {
    let mut rows: Vec<(Label, Vec<(usize, f64)>)> = Vec::new();
    let mut dim = min_dim;
    let mut mapped = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let (label, zero) = parse_label(tokens.next().expect("non-empty line"), line)?;
        mapped |= zero;
        let mut feats = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line,
                reason: format!("expected `index:value`, got `{tok}`"),
            })?;
            let idx: usize = i.parse().map_err(|_| Error::Parse {
                line,
                reason: format!("bad feature index `{i}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line,
                    reason: "feature indices are 1-based".into(),
                });
            }
            if idx <= last {
                return Err(Error::Parse {
                    line,
                    reason: format!("feature index {idx} is not increasing"),
                });
            }
            last = idx;
            let val: f64 = v.parse().map_err(|_| Error::Parse {
                line,
                reason: format!("bad feature value `{v}`"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line,
                    reason: format!("non-finite feature value `{v}`"),
                });
            }
            feats.push((idx, val));
        }
        dim = dim.max(last);
        rows.push((label, feats));
    }
    if dim == 0 && !rows.is_empty() {
        dim = 1;
    }
    let samples = rows
        .into_iter()
        .map(|(y, feats)| {
            let mut x = vec![0.0; dim];
            for (i, v) in feats {
                x[i - 1] = v;
            }
            LabeledSample::new(x, y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedDataset {
        dataset: Dataset::new(samples)?,
        mapped_zero_labels: mapped,
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LoadedDataset> {
    load_dataset_with_dim(path, 0)
}

pub fn load_dataset_with_dim(path: impl AsRef<Path>, min_dim: usize) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        reason: format!("{}: {e}", path.display()),
    })?;
    parse_libsvm(&text, min_dim)
}

/// Formats a dataset as libsvm text. Zero features are omitted except the
/// last one, so the dimension survives a round trip.
pub fn format_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for s in ds {
        out.push_str(match s.y {
            Label::Positive => "+1",
            Label::Negative => "-1",
        });
        let n = s.x.len();
        for (i, v) in s.x.iter().enumerate() {
            if *v != 0.0 || i + 1 == n {
                out.push_str(&format!(" {}:{}", i + 1, v));
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_libsvm(ds).as_bytes())
}
