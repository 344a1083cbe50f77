//! Trial counts, log risk-ratio evidence, and non-inferiority margins.
//!
//! The hierarchical model works on approximately normal quantities: each
//! two-arm trial is collapsed to an estimated log risk ratio `y` with
//! standard error `s` via the delta method. This module owns that reduction,
//! the absolute-to-relative margin conversion that defines the decision
//! threshold, and ingestion of study data from CSV counts or previously
//! emitted JSON evidence records.
//!
//! Risk ratios are treatment over control, so `y > 0` favours the treatment
//! when the outcome is a response (success) indicator.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// Development phase a study belongs to. Phase II studies form the
/// historical basis for borrowing; phase III rows are the new trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Two => write!(f, "2"),
            Phase::Three => write!(f, "3"),
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "2" => Ok(Phase::Two),
            "3" => Ok(Phase::Three),
            other => Err(Error::Data(format!(
                "phase must be 2 or 3, got {other:?}"
            ))),
        }
    }
}

/// Responder counts of one two-arm study: `r_t` of `n_t` responders under
/// treatment, `r_c` of `n_c` under control.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyCounts {
    pub study_id: String,
    pub r_t: u64,
    pub n_t: u64,
    pub r_c: u64,
    pub n_c: u64,
    pub phase: Phase,
}

impl StudyCounts {
    pub fn new(
        study_id: impl Into<String>,
        r_t: u64,
        n_t: u64,
        r_c: u64,
        n_c: u64,
        phase: Phase,
    ) -> Result<Self> {
        let study_id = study_id.into();
        if study_id.trim().is_empty() {
            return Err(Error::Data("study_id must not be empty".into()));
        }
        if r_t > n_t || r_c > n_c {
            return Err(Error::Data(format!(
                "study {study_id}: responders exceed sample size ({r_t}/{n_t} treated, {r_c}/{n_c} control)"
            )));
        }
        Ok(StudyCounts {
            study_id,
            r_t,
            n_t,
            r_c,
            n_c,
            phase,
        })
    }

    /// Total number of patients in the study.
    pub fn total(&self) -> u64 {
        self.n_t + self.n_c
    }

    /// Collapse the 2x2 counts to a log risk ratio with delta-method
    /// standard error:
    ///
    /// ```text
    /// y = ln(r_t / n_t) - ln(r_c / n_c)
    /// s^2 = 1/r_t - 1/n_t + 1/r_c - 1/n_c
    /// ```
    ///
    /// A continuity correction of 0.5 responders and 1 patient per arm is
    /// applied only when some cell of the 2x2 table is empty (zero
    /// responders or zero non-responders in either arm); otherwise the raw
    /// counts are used. An arm with no patients at all admits no correction
    /// and is rejected.
    pub fn to_evidence(&self) -> Result<Evidence> {
        if self.n_t == 0 || self.n_c == 0 {
            return Err(Error::DegenerateEvidence(format!(
                "study {}: an arm has no patients",
                self.study_id
            )));
        }
        let boundary = self.r_t == 0 || self.r_t == self.n_t || self.r_c == 0 || self.r_c == self.n_c;
        let (rt, nt, rc, nc) = if boundary {
            (
                self.r_t as f64 + 0.5,
                self.n_t as f64 + 1.0,
                self.r_c as f64 + 0.5,
                self.n_c as f64 + 1.0,
            )
        } else {
            (
                self.r_t as f64,
                self.n_t as f64,
                self.r_c as f64,
                self.n_c as f64,
            )
        };
        let y = (rt / nt).ln() - (rc / nc).ln();
        let s2 = arm_var(rt, nt) + arm_var(rc, nc);
        debug_assert!(s2 > 0.0);
        Ok(Evidence {
            study_id: self.study_id.clone(),
            phase: self.phase,
            y,
            s: s2.sqrt(),
        })
    }
}

fn arm_var(r: f64, n: f64) -> f64 {
    1.0 / r - 1.0 / n
}

/// Normal-approximation evidence from one study: estimated log risk ratio
/// and its standard error. This is the unit of data the hierarchical model
/// consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub study_id: String,
    pub phase: Phase,
    pub y: f64,
    pub s: f64,
}

impl Evidence {
    pub fn new(study_id: impl Into<String>, phase: Phase, y: f64, s: f64) -> Result<Self> {
        let study_id = study_id.into();
        if !y.is_finite() {
            return Err(Error::DegenerateEvidence(format!(
                "study {study_id}: log risk ratio must be finite, got {y}"
            )));
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::DegenerateEvidence(format!(
                "study {study_id}: standard error must be finite and positive, got {s}"
            )));
        }
        Ok(Evidence {
            study_id,
            phase,
            y,
            s,
        })
    }

    /// Point estimate on the risk-ratio scale.
    pub fn rr(&self) -> f64 {
        self.y.exp()
    }
}

/// Non-inferiority margin stated on the absolute response-rate scale and
/// converted to the risk-ratio threshold the decision rules use.
///
/// With an anticipated control response rate `p_control` and an acceptable
/// absolute loss `margin_abs`, the treatment is non-inferior when its true
/// risk ratio exceeds `(p_control - margin_abs) / p_control`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NiMargin {
    p_control: f64,
    margin_abs: f64,
}

impl NiMargin {
    pub fn new(p_control: f64, margin_abs: f64) -> Result<Self> {
        if !(p_control > 0.0 && p_control < 1.0) {
            return Err(Error::InvalidMargin(format!(
                "control response rate must be in (0, 1), got {p_control}"
            )));
        }
        if !(margin_abs > 0.0 && margin_abs < p_control) {
            return Err(Error::InvalidMargin(format!(
                "absolute margin must be in (0, p_control = {p_control}), got {margin_abs}"
            )));
        }
        Ok(NiMargin {
            p_control,
            margin_abs,
        })
    }

    pub fn p_control(&self) -> f64 {
        self.p_control
    }

    pub fn margin_abs(&self) -> f64 {
        self.margin_abs
    }

    /// Risk-ratio non-inferiority threshold.
    pub fn rr_threshold(&self) -> f64 {
        margin_to_rr(self.p_control, self.margin_abs).expect("validated at construction")
    }

    /// The same threshold on the log scale the posteriors live on.
    pub fn log_rr_threshold(&self) -> f64 {
        self.rr_threshold().ln()
    }
}

/// Convert an absolute non-inferiority margin to the risk-ratio scale:
/// `(p_control - margin_abs) / p_control`.
pub fn margin_to_rr(p_control: f64, margin_abs: f64) -> Result<f64> {
    let margin = NiMargin::new(p_control, margin_abs)?;
    Ok((margin.p_control - margin.margin_abs) / margin.p_control)
}

// --- dataset ingestion ---------------------------------------------------------

/// Raw CSV row; the header names are part of the file-format contract.
#[derive(Debug, Deserialize)]
struct CountsRow {
    study_id: String,
    r_t: u64,
    n_t: u64,
    r_c: u64,
    n_c: u64,
    phase: String,
}

/// Read study counts from CSV with columns
/// `study_id,r_t,n_t,r_c,n_c,phase` (phase 2 or 3). Errors carry the
/// offending line.
pub fn parse_counts_csv<R: Read>(reader: R) -> Result<Vec<StudyCounts>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CountsRow>().enumerate() {
        let line = i + 2; // header is line 1
        let row = row.map_err(|e| Error::Data(format!("csv line {line}: {e}")))?;
        let phase: Phase = row
            .phase
            .parse()
            .map_err(|e| Error::Data(format!("csv line {line}: {e}")))?;
        let counts = StudyCounts::new(row.study_id, row.r_t, row.n_t, row.r_c, row.n_c, phase)
            .map_err(|e| Error::Data(format!("csv line {line}: {e}")))?;
        out.push(counts);
    }
    check_unique_ids(out.iter().map(|c| c.study_id.as_str()))?;
    if out.is_empty() {
        return Err(Error::EmptyEvidence);
    }
    Ok(out)
}

/// One line of a JSON records stream, as produced by the command-line tool.
/// Only the fields needed to recognise evidence records are modelled here;
/// unknown record kinds are skipped so an analysis output file can be fed
/// straight back in.
#[derive(Debug, Deserialize)]
struct RecordLine {
    record: String,
    #[serde(default)]
    study_id: Option<String>,
    #[serde(default)]
    phase: Option<u8>,
    #[serde(default)]
    y: Option<f64>,
    #[serde(default)]
    s: Option<f64>,
}

/// Read evidence from a JSON-lines records stream, keeping `"record":
/// "evidence"` lines and ignoring everything else.
pub fn parse_evidence_records<R: Read>(reader: R) -> Result<Vec<Evidence>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("records line {line_no}: {e}")))?;
        if rec.record != "evidence" {
            continue;
        }
        let study_id = rec
            .study_id
            .ok_or_else(|| Error::Data(format!("records line {line_no}: evidence record missing study_id")))?;
        let phase = match rec.phase {
            Some(2) => Phase::Two,
            Some(3) => Phase::Three,
            other => {
                return Err(Error::Data(format!(
                    "records line {line_no}: evidence record needs phase 2 or 3, got {other:?}"
                )))
            }
        };
        let y = rec
            .y
            .ok_or_else(|| Error::Data(format!("records line {line_no}: evidence record missing y")))?;
        let s = rec
            .s
            .ok_or_else(|| Error::Data(format!("records line {line_no}: evidence record missing s")))?;
        out.push(
            Evidence::new(study_id, phase, y, s)
                .map_err(|e| Error::Data(format!("records line {line_no}: {e}")))?,
        );
    }
    check_unique_ids(out.iter().map(|e| e.study_id.as_str()))?;
    if out.is_empty() {
        return Err(Error::EmptyEvidence);
    }
    Ok(out)
}

fn check_unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id.to_string()) {
            return Err(Error::Data(format!("duplicate study_id {id:?}")));
        }
    }
    Ok(())
}

/// A dataset as loaded from disk. Counts are kept when the source had them
/// because some quantities (the effective-sample-size reference, for one)
/// need patient totals, which log risk ratios alone do not carry.
#[derive(Debug, Clone)]
pub enum LoadedData {
    Counts(Vec<StudyCounts>),
    Evidence(Vec<Evidence>),
}

impl LoadedData {
    pub fn evidence(&self) -> Result<Vec<Evidence>> {
        match self {
            LoadedData::Counts(counts) => counts.iter().map(StudyCounts::to_evidence).collect(),
            LoadedData::Evidence(evs) => Ok(evs.clone()),
        }
    }

    /// Total patient count, available only when counts were loaded.
    pub fn total_patients(&self) -> Option<f64> {
        match self {
            LoadedData::Counts(counts) => {
                Some(counts.iter().map(|c| c.total() as f64).sum())
            }
            LoadedData::Evidence(_) => None,
        }
    }

    /// Restrict to studies satisfying the predicate on `(study_id, phase)`.
    pub fn retain(&mut self, mut keep: impl FnMut(&str, Phase) -> bool) {
        match self {
            LoadedData::Counts(counts) => counts.retain(|c| keep(&c.study_id, c.phase)),
            LoadedData::Evidence(evs) => evs.retain(|e| keep(&e.study_id, e.phase)),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            LoadedData::Counts(c) => c.is_empty(),
            LoadedData::Evidence(e) => e.is_empty(),
        }
    }
}

/// Load a dataset from a file, auto-detecting the format: JSON records when
/// the first non-blank byte is `{`, CSV counts otherwise.
pub fn load_dataset(path: &Path) -> Result<LoadedData> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    match first {
        Some(b'{') => Ok(LoadedData::Evidence(parse_evidence_records(&bytes[..])?)),
        Some(_) => Ok(LoadedData::Counts(parse_counts_csv(&bytes[..])?)),
        None => Err(Error::EmptyEvidence),
    }
}

/// Load a dataset and reduce it straight to evidence.
pub fn load_evidence(path: &Path) -> Result<Vec<Evidence>> {
    load_dataset(path)?.evidence()
}

// -----------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    // (study, r_t, n_t, r_c, n_c, expected y, expected s), standard errors
    // cross-checked against an independent implementation of the delta
    // method to ten decimals.
    const KNOWN: [(&str, u64, u64, u64, u64, f64, f64); 5] = [
        ("4", 19, 23, 16, 22, 0.12739849436, 0.16186034914),
        ("5", 15, 18, 12, 17, 0.16598513747, 0.18873503923),
        ("6", 31, 36, 27, 38, 0.19221755975, 0.12329450232),
        ("7IA", 35, 40, 36, 40, -0.02817087697, 0.07968190729),
        ("7FA", 74, 84, 73, 80, -0.03518451211, 0.05298473125),
    ];

    #[test]
    fn log_risk_ratio_matches_reference_values() {
        for (id, rt, nt, rc, nc, y, s) in KNOWN {
            let ev = StudyCounts::new(id, rt, nt, rc, nc, Phase::Two)
                .unwrap()
                .to_evidence()
                .unwrap();
            assert!((ev.y - y).abs() < 1e-10, "study {id}: y = {}", ev.y);
            assert!((ev.s - s).abs() < 1e-10, "study {id}: s = {}", ev.s);
        }
    }

    #[test]
    fn swapping_arms_negates_y_exactly() {
        for (id, rt, nt, rc, nc, _, _) in KNOWN {
            let fwd = StudyCounts::new(id, rt, nt, rc, nc, Phase::Two)
                .unwrap()
                .to_evidence()
                .unwrap();
            let rev = StudyCounts::new(id, rc, nc, rt, nt, Phase::Two)
                .unwrap()
                .to_evidence()
                .unwrap();
            assert_eq!(fwd.y, -rev.y, "study {id}");
            assert_eq!(fwd.s, rev.s, "study {id}");
        }
    }

    #[test]
    fn continuity_correction_only_on_boundary() {
        // 0 responders in the treated arm: corrected to 0.5/11 vs 5.5/11,
        // giving y = -ln(11) and s^2 = 2 exactly.
        let ev = StudyCounts::new("zero", 0, 10, 5, 10, Phase::Two)
            .unwrap()
            .to_evidence()
            .unwrap();
        assert!((ev.y + (11.0f64).ln()).abs() < 1e-12);
        assert!((ev.s * ev.s - 2.0).abs() < 1e-12);

        // all responders in one arm also triggers it
        let ev = StudyCounts::new("full", 10, 10, 8, 10, Phase::Two)
            .unwrap()
            .to_evidence()
            .unwrap();
        let want_y = (10.5f64 / 11.0).ln() - (8.5f64 / 11.0).ln();
        assert!((ev.y - want_y).abs() < 1e-12);

        // interior counts stay untouched
        let ev = StudyCounts::new("mid", 19, 23, 16, 22, Phase::Two)
            .unwrap()
            .to_evidence()
            .unwrap();
        let raw = (19.0f64 / 23.0).ln() - (16.0f64 / 22.0).ln();
        assert_eq!(ev.y, raw);
    }

    #[test]
    fn degenerate_counts_are_rejected() {
        assert!(matches!(
            StudyCounts::new("e", 0, 0, 5, 10, Phase::Two)
                .unwrap()
                .to_evidence(),
            Err(Error::DegenerateEvidence(_))
        ));
        assert!(StudyCounts::new("bad", 11, 10, 5, 10, Phase::Two).is_err());
        assert!(StudyCounts::new("", 1, 10, 5, 10, Phase::Two).is_err());
    }

    #[test]
    fn evidence_validation() {
        assert!(Evidence::new("a", Phase::Two, 0.1, 0.2).is_ok());
        assert!(Evidence::new("a", Phase::Two, f64::NAN, 0.2).is_err());
        assert!(Evidence::new("a", Phase::Two, 0.1, 0.0).is_err());
        assert!(Evidence::new("a", Phase::Two, 0.1, -1.0).is_err());
    }

    #[test]
    fn margin_conversion() {
        let margin = NiMargin::new(0.9, 0.12).unwrap();
        assert!((margin.rr_threshold() - 0.78 / 0.9).abs() < 1e-15);
        assert!((margin.rr_threshold() - 0.8666666666666667).abs() < 1e-12);
        assert!((margin.log_rr_threshold() - (0.78f64 / 0.9).ln()).abs() < 1e-15);
        assert!((margin_to_rr(0.9, 0.12).unwrap() - 0.8666666666666667).abs() < 1e-12);

        assert!(NiMargin::new(0.0, 0.1).is_err());
        assert!(NiMargin::new(1.0, 0.1).is_err());
        assert!(NiMargin::new(0.9, 0.0).is_err());
        assert!(NiMargin::new(0.9, 0.9).is_err());
        assert!(NiMargin::new(0.9, 0.95).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let csv = "study_id,r_t,n_t,r_c,n_c,phase\n4,19,23,16,22,2\n7FA,74,84,73,80,3\n";
        let counts = parse_counts_csv(csv.as_bytes()).unwrap();
        assert_eq!(counts.len(), 2);
        assert_eq!(counts[0].study_id, "4");
        assert_eq!(counts[0].phase, Phase::Two);
        assert_eq!(counts[1].phase, Phase::Three);
        assert_eq!(counts[1].n_c, 80);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let bad_value = "study_id,r_t,n_t,r_c,n_c,phase\n4,19,23,16,22,2\n5,x,18,12,17,2\n";
        let err = parse_counts_csv(bad_value.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");

        let bad_phase = "study_id,r_t,n_t,r_c,n_c,phase\n4,19,23,16,22,7\n";
        let err = parse_counts_csv(bad_phase.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("phase"), "{err}");

        let dup = "study_id,r_t,n_t,r_c,n_c,phase\n4,19,23,16,22,2\n4,15,18,12,17,2\n";
        let err = parse_counts_csv(dup.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let empty = "study_id,r_t,n_t,r_c,n_c,phase\n";
        assert!(matches!(
            parse_counts_csv(empty.as_bytes()),
            Err(Error::EmptyEvidence)
        ));
    }

    #[test]
    fn evidence_records_round_trip_and_skip_other_kinds() {
        let lines = concat!(
            "{\"record\":\"config\",\"command\":\"analyze\"}\n",
            "{\"record\":\"evidence\",\"study_id\":\"4\",\"phase\":2,\"y\":0.12739849441,\"s\":0.16186034912}\n",
            "\n",
            "{\"record\":\"summary\",\"target\":\"mu\"}\n",
            "{\"record\":\"evidence\",\"study_id\":\"7FA\",\"phase\":3,\"y\":-0.03518451213,\"s\":0.05298473132}\n",
        );
        let evs = parse_evidence_records(lines.as_bytes()).unwrap();
        assert_eq!(evs.len(), 2);
        assert_eq!(evs[0].study_id, "4");
        assert_eq!(evs[1].phase, Phase::Three);
        assert!((evs[1].y + 0.03518451213).abs() < 1e-15);

        let bad = "{\"record\":\"evidence\",\"study_id\":\"4\",\"phase\":2,\"y\":0.1}\n";
        let err = parse_evidence_records(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(err.to_string().contains("missing s"), "{err}");
    }
}
