//! File formats.
//!
//! Streams are JSON lines: a header object `{"d1","d2","q","seed","anomaly_rate"}`
//! followed by one `{"id","f","a","label"}` object per segment (`label` is
//! optional, `0` or `1`). Score reports and ROC curves are tab-separated
//! columns with a header row; missing values are written as `-`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterPath;
use crate::metrics::RocCurve;
use crate::stream::{validate_action_feature, InteractionFeature, Label, SegmentRecord, StreamConfig};

/// Metadata line at the top of a stream file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamHeader {
    pub d1: usize,
    pub d2: usize,
    pub q: usize,
    pub seed: u64,
    pub anomaly_rate: f64,
}

impl StreamHeader {
    pub fn from_config(cfg: &StreamConfig) -> Self {
        StreamHeader {
            d1: cfg.d1,
            d2: cfg.d2(),
            q: cfg.q,
            seed: cfg.seed,
            anomaly_rate: cfg.anomaly_rate,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: u64,
    f: Vec<f64>,
    a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
}

fn malformed(line: usize, detail: impl std::fmt::Display) -> Error {
    Error::Malformed {
        what: "stream file",
        detail: format!("line {line}: {detail}"),
    }
}

pub fn write_stream<W: Write>(
    mut out: W,
    header: &StreamHeader,
    segments: &[SegmentRecord],
) -> Result<()> {
    writeln!(out, "{}", json_line(header))?;
    for s in segments {
        let raw = RawRecord {
            id: s.id,
            f: s.action.as_slice().to_vec(),
            a: s.interaction.as_slice().to_vec(),
            label: s.label.map(Label::bit),
        };
        writeln!(out, "{}", json_line(&raw))?;
    }
    out.flush()?;
    Ok(())
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data always serialises")
}

/// Reads and validates a stream file.
///
/// Every record must match the header's dimensions and carry a valid
/// action distribution; errors name the offending line.
pub fn read_stream<R: BufRead>(input: R) -> Result<(StreamHeader, Vec<SegmentRecord>)> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (n, first) = lines
        .next()
        .ok_or_else(|| malformed(1, "missing header line"))?;
    let header: StreamHeader = serde_json::from_str(&first?).map_err(|e| malformed(n, e))?;
    let mut segments = Vec::new();
    for (n, line) in lines {
        let raw: RawRecord = serde_json::from_str(&line?).map_err(|e| malformed(n, e))?;
        if raw.f.len() != header.d1 {
            return Err(malformed(n, format!("f has {} entries, header says {}", raw.f.len(), header.d1)));
        }
        if raw.a.len() != header.d2 {
            return Err(malformed(n, format!("a has {} entries, header says {}", raw.a.len(), header.d2)));
        }
        let action = validate_action_feature(raw.f, false)
            .map_err(|e| Error::Validation(format!("line {n}: {e}")))?;
        let interaction = InteractionFeature::new(raw.a)
            .map_err(|e| Error::Validation(format!("line {n}: {e}")))?;
        let label = raw
            .label
            .map(Label::from_bit)
            .transpose()
            .map_err(|e| Error::Validation(format!("line {n}: {e}")))?;
        segments.push(SegmentRecord {
            id: raw.id,
            action,
            interaction,
            label,
        });
    }
    Ok((header, segments))
}

/// One line of a score report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    pub id: u64,
    pub re_i: Option<f64>,
    pub re_a: f64,
    pub re_ia: Option<f64>,
    pub label: Option<Label>,
    pub anomaly: bool,
    pub path: Option<FilterPath>,
}

pub const SCORE_HEADER: &str = "id\tre_i\tre_a\tre_ia\tlabel\tanomaly\tfilter_path";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn write_scores<W: Write>(mut out: W, rows: &[ScoreRow]) -> Result<()> {
    writeln!(out, "{SCORE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.id,
            opt(r.re_i),
            r.re_a,
            opt(r.re_ia),
            opt(r.label.map(Label::bit)),
            r.anomaly as u8,
            r.path.map_or("-", FilterPath::name),
        )?;
    }
    out.flush()?;
    Ok(())
}

fn parse_path(s: &str) -> Option<FilterPath> {
    FilterPath::ALL.into_iter().find(|p| p.name() == s)
}

pub fn read_scores<R: BufRead>(input: R) -> Result<Vec<ScoreRow>> {
    let bad = |n: usize, d: String| Error::Malformed {
        what: "score report",
        detail: format!("line {n}: {d}"),
    };
    let mut rows = Vec::new();
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != SCORE_HEADER {
        return Err(bad(1, "missing or unexpected header".into()));
    }
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(bad(n, format!("expected 7 columns, found {}", cols.len())));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| bad(n, format!("{s:?}: {e}")))
            }
        };
        rows.push(ScoreRow {
            id: cols[0].parse().map_err(|e| bad(n, format!("id: {e}")))?,
            re_i: num(cols[1])?,
            re_a: num(cols[2])?.ok_or_else(|| bad(n, "re_a is missing".into()))?,
            re_ia: num(cols[3])?,
            label: match cols[4] {
                "-" => None,
                "0" => Some(Label::Normal),
                "1" => Some(Label::Anomaly),
                other => return Err(bad(n, format!("label {other:?}"))),
            },
            anomaly: match cols[5] {
                "0" => false,
                "1" => true,
                other => return Err(bad(n, format!("anomaly flag {other:?}"))),
            },
            path: match cols[6] {
                "-" => None,
                s => Some(parse_path(s).ok_or_else(|| bad(n, format!("filter path {s:?}")))?),
            },
        });
    }
    Ok(rows)
}

pub fn write_roc<W: Write>(mut out: W, curve: &RocCurve) -> Result<()> {
    writeln!(out, "fpr\ttpr")?;
    for (x, y) in &curve.points {
        writeln!(out, "{x}\t{y}")?;
    }
    out.flush()?;
    Ok(())
}
