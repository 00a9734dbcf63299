//! Run reports: a line-delimited stream of records.
//!
//! A report file is UTF-8 JSONL. The first line is a header carrying the
//! tool version, the seed and the full scenario echo; the following lines
//! appear in the order the run produced them: documents at authoring,
//! transfer/exchange events, registry entries, one check record per loyalty
//! sweep, then the unmatched-entry listing, the ground-truth summary and the
//! metrics. Truncating the file at any line boundary leaves a parseable
//! prefix. Document contents never appear in a report; documents are listed
//! as metadata only, so blinding survives end-to-end in the artifacts.
//!
//! A report is self-contained: `replay_check_verdicts` recomputes every
//! check's verdicts from the registry lines, the document metadata and the
//! recorded disclosures alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::BehaviorTag;
use crate::crypto::Signature;
use crate::engine::Metrics;
use crate::model::{AcquisitionChannel, Catalog, DocMeta, DocumentId, PlayerId};
use crate::protocols::{loyalty_check, Disclosure, Verdict};
use crate::registry::{Registry, RegistryEntry};
use crate::scenario::Scenario;

/// One delivery: a protocol transfer (either kind) or a collusion exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferEvent {
    pub round: u32,
    pub from: PlayerId,
    pub to: PlayerId,
    pub doc: DocumentId,
    pub channel: AcquisitionChannel,
    pub registered_send: bool,
    pub registered_receive: bool,
}

/// Ground truth for one transferred holding at a check round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldingRecord {
    pub sig: Signature,
    pub doc: DocumentId,
    pub sender: PlayerId,
    pub via: AcquisitionChannel,
    pub acquired_round: u32,
    pub out_of_need_to_know: bool,
}

/// Ground truth for one player at a check round: its true, unconcealed
/// holdings, derived from simulation state and never from disclosures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerHoldings {
    pub player: PlayerId,
    pub behavior: BehaviorTag,
    pub created: Vec<DocumentId>,
    pub transferred: Vec<HoldingRecord>,
}

/// Everything one loyalty check produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub round: u32,
    pub disclosures: Vec<Disclosure>,
    pub verdicts: Vec<Verdict>,
    pub all_loyal_agree: bool,
    pub loyal_majority: bool,
    pub assumed_traitor_bound: u32,
    pub actual_traitors: u32,
    pub ba_messages: u64,
    pub holdings: Vec<PlayerHoldings>,
}

/// Scenario-level ground truth: behavior tags and each player's first
/// out-of-need-to-know acquisition round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthSummary {
    #[serde(with = "crate::model::player_key_map")]
    pub behaviors: BTreeMap<PlayerId, BehaviorTag>,
    #[serde(with = "crate::model::player_key_map")]
    pub first_out_of_need_to_know: BTreeMap<PlayerId, u32>,
}

/// One line of a report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ReportRecord {
    Header {
        tool_version: String,
        seed: u64,
        scenario: Scenario,
    },
    Document(DocMeta),
    Event(TransferEvent),
    Registry {
        index: usize,
        entry: RegistryEntry,
    },
    Check(CheckRecord),
    Unmatched {
        entries: Vec<RegistryEntry>,
    },
    GroundTruth(GroundTruthSummary),
    Metrics(Metrics),
}

/// A full run report: the record stream plus typed accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub records: Vec<ReportRecord>,
}

impl Report {
    pub fn scenario(&self) -> Option<&Scenario> {
        self.records.iter().find_map(|r| match r {
            ReportRecord::Header { scenario, .. } => Some(scenario),
            _ => None,
        })
    }

    pub fn seed(&self) -> Option<u64> {
        self.records.iter().find_map(|r| match r {
            ReportRecord::Header { seed, .. } => Some(*seed),
            _ => None,
        })
    }

    pub fn documents(&self) -> impl Iterator<Item = &DocMeta> {
        self.records.iter().filter_map(|r| match r {
            ReportRecord::Document(meta) => Some(meta),
            _ => None,
        })
    }

    pub fn events(&self) -> impl Iterator<Item = &TransferEvent> {
        self.records.iter().filter_map(|r| match r {
            ReportRecord::Event(event) => Some(event),
            _ => None,
        })
    }

    pub fn registry_entries(&self) -> Vec<RegistryEntry> {
        self.records
            .iter()
            .filter_map(|r| match r {
                ReportRecord::Registry { entry, .. } => Some(entry.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn checks(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter_map(|r| match r {
            ReportRecord::Check(check) => Some(check),
            _ => None,
        })
    }

    pub fn unmatched(&self) -> &[RegistryEntry] {
        self.records
            .iter()
            .find_map(|r| match r {
                ReportRecord::Unmatched { entries } => Some(entries.as_slice()),
                _ => None,
            })
            .unwrap_or(&[])
    }

    pub fn ground_truth(&self) -> Option<&GroundTruthSummary> {
        self.records.iter().find_map(|r| match r {
            ReportRecord::GroundTruth(gt) => Some(gt),
            _ => None,
        })
    }

    pub fn metrics(&self) -> Option<&Metrics> {
        self.records.iter().find_map(|r| match r {
            ReportRecord::Metrics(m) => Some(m),
            _ => None,
        })
    }

    /// Render the report as JSONL, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Parse a complete report. Every line must decode.
    pub fn from_jsonl(text: &str) -> Result<Self, ReportError> {
        let mut records = Vec::new();
        for (number, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ReportRecord =
                serde_json::from_str(line).map_err(|source| ReportError::BadLine {
                    line: number + 1,
                    message: source.to_string(),
                })?;
            records.push(record);
        }
        Self::checked(records)
    }

    /// Parse as much of a (possibly truncated) report as decodes cleanly:
    /// reading stops at the first undecodable line.
    pub fn from_jsonl_prefix(text: &str) -> Result<Self, ReportError> {
        let mut records = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ReportRecord>(line) {
                Ok(record) => records.push(record),
                Err(_) => break,
            }
        }
        Self::checked(records)
    }

    fn checked(records: Vec<ReportRecord>) -> Result<Self, ReportError> {
        match records.first() {
            Some(ReportRecord::Header { .. }) => Ok(Self { records }),
            _ => Err(ReportError::MissingHeader),
        }
    }
}

/// Recompute every check's verdicts from the report alone: rebuild the
/// registry from its exported lines, the catalog from the document metadata,
/// and re-run the loyalty check against the recorded disclosures.
pub fn replay_check_verdicts(report: &Report) -> Result<Vec<Vec<Verdict>>, ReportError> {
    let scenario = report.scenario().ok_or(ReportError::MissingHeader)?;
    let registry = Registry::from_entries(report.registry_entries());
    let mut catalog = Catalog::default();
    for meta in report.documents() {
        catalog.insert(meta.clone());
    }
    let players: Vec<PlayerId> = (0..scenario.player_count() as u32).map(PlayerId).collect();

    let mut replayed = Vec::new();
    for check in report.checks() {
        let disclosures: BTreeMap<PlayerId, Disclosure> = check
            .disclosures
            .iter()
            .map(|d| (d.player, d.clone()))
            .collect();
        replayed.push(loyalty_check(
            &disclosures,
            &registry,
            &catalog,
            &players,
            check.round,
        ));
    }
    Ok(replayed)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("report line {line} did not decode: {message}")]
    BadLine { line: usize, message: String },
    #[error("report does not start with a header record")]
    MissingHeader,
}
