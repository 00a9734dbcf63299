//! The registry owner's append-only log of sends and receipts.
//!
//! Logging is non-judgmental: a receipt with no matching send (or the other
//! way around) is appended like anything else, and the mismatch only surfaces
//! when the log is queried. The log is the sole source for each player's
//! expected transferred set at loyalty checks.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{SigDigest, Signature};
use crate::model::{DocumentId, PlayerId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryKind {
    Send,
    Receive,
}

/// Which transfer protocol produced the entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolKind {
    Inter,
    Intra,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Inter => "inter",
            ProtocolKind::Intra => "intra",
        })
    }
}

/// One logged event: who moved which signature to whom, under what pretext,
/// in which round. Entries are never mutated or removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub kind: EntryKind,
    pub actor: PlayerId,
    pub counterparty: PlayerId,
    pub sig: Signature,
    pub pretext: String,
    pub round: u32,
    pub protocol: ProtocolKind,
}

/// Render the pretext a sender registers: the claimed document id plus a
/// free-text justification. The claimed id is what the registry owner later
/// parses to resolve a digest back to document metadata.
pub fn render_pretext(doc: DocumentId, reason: &str) -> String {
    format!("{doc} {reason}")
}

/// Parse the claimed document id out of a registered pretext.
pub fn claimed_document(pretext: &str) -> Option<DocumentId> {
    let token = pretext.split_whitespace().next()?;
    let rest = token.strip_prefix('d')?;
    let (origin, seq) = rest.split_once('.')?;
    Some(DocumentId::new(
        PlayerId(origin.parse().ok()?),
        seq.parse().ok()?,
    ))
}

/// Append-only event log, ordered by (round, arrival).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    entries: Vec<RegistryEntry>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuild a registry from exported entries (report replay).
    pub fn from_entries(entries: Vec<RegistryEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Log a send. Returns the entry index.
    pub fn register_send(
        &mut self,
        actor: PlayerId,
        counterparty: PlayerId,
        sig: Signature,
        pretext: String,
        round: u32,
        protocol: ProtocolKind,
    ) -> Result<usize, RegistryError> {
        self.append(RegistryEntry {
            kind: EntryKind::Send,
            actor,
            counterparty,
            sig,
            pretext,
            round,
            protocol,
        })
    }

    /// Log a receipt. Returns the entry index.
    pub fn register_receive(
        &mut self,
        actor: PlayerId,
        counterparty: PlayerId,
        sig: Signature,
        round: u32,
        protocol: ProtocolKind,
    ) -> Result<usize, RegistryError> {
        self.append(RegistryEntry {
            kind: EntryKind::Receive,
            actor,
            counterparty,
            sig,
            pretext: String::new(),
            round,
            protocol,
        })
    }

    fn append(&mut self, entry: RegistryEntry) -> Result<usize, RegistryError> {
        if entry.actor == entry.counterparty {
            return Err(RegistryError::SelfTransfer { actor: entry.actor });
        }
        self.entries.push(entry);
        Ok(self.entries.len() - 1)
    }

    /// Everything the log says `player` should be holding in its transferred
    /// set by the end of `up_to_round`: signatures it registered receiving,
    /// unioned with signatures someone registered sending to it. The sender
    /// side counts, so an honestly registered send witnesses the holding even
    /// when the receiver stays silent.
    pub fn expected_transferred_set(
        &self,
        player: PlayerId,
        up_to_round: u32,
    ) -> BTreeMap<SigDigest, Signature> {
        let mut expected = BTreeMap::new();
        for entry in self.entries.iter().filter(|e| e.round <= up_to_round) {
            let holds = match entry.kind {
                EntryKind::Receive => entry.actor == player,
                EntryKind::Send => entry.counterparty == player,
            };
            if holds {
                expected.entry(entry.sig.digest).or_insert(entry.sig);
            }
        }
        expected
    }

    /// Digest-to-claimed-document map built from registered send pretexts.
    /// First claim wins; receipts carry no pretext and contribute nothing.
    pub fn claimed_documents(&self, up_to_round: u32) -> BTreeMap<SigDigest, DocumentId> {
        let mut claims = BTreeMap::new();
        for entry in self.entries.iter().filter(|e| e.round <= up_to_round) {
            if entry.kind == EntryKind::Send {
                if let Some(doc) = claimed_document(&entry.pretext) {
                    claims.entry(entry.sig.digest).or_insert(doc);
                }
            }
        }
        claims
    }

    /// Entries with no matching opposite half: a Send with no Receive for the
    /// same signature between the same pair (roles swapped), and vice versa.
    /// Matching is by multiset, so repeated transfers pair up one-to-one.
    pub fn unmatched_entries(&self, up_to_round: u32) -> Vec<RegistryEntry> {
        // Key irrespective of direction: (sender, receiver, digest).
        let key = |e: &RegistryEntry| -> (PlayerId, PlayerId, SigDigest) {
            match e.kind {
                EntryKind::Send => (e.actor, e.counterparty, e.sig.digest),
                EntryKind::Receive => (e.counterparty, e.actor, e.sig.digest),
            }
        };

        let in_scope: Vec<&RegistryEntry> = self
            .entries
            .iter()
            .filter(|e| e.round <= up_to_round)
            .collect();

        let mut receive_pool: BTreeMap<_, u32> = BTreeMap::new();
        let mut send_pool: BTreeMap<_, u32> = BTreeMap::new();
        for entry in &in_scope {
            match entry.kind {
                EntryKind::Send => *send_pool.entry(key(entry)).or_default() += 1,
                EntryKind::Receive => *receive_pool.entry(key(entry)).or_default() += 1,
            }
        }

        let mut orphans = Vec::new();
        for entry in &in_scope {
            let k = key(entry);
            let opposite = match entry.kind {
                EntryKind::Send => &mut receive_pool,
                EntryKind::Receive => &mut send_pool,
            };
            match opposite.get_mut(&k) {
                Some(count) if *count > 0 => *count -= 1,
                _ => orphans.push((*entry).clone()),
            }
        }
        orphans
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("{actor} cannot register a transfer with itself")]
    SelfTransfer { actor: PlayerId },
}
