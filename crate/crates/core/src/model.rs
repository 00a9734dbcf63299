//! Domain types shared by every module: clearance levels, documents,
//! need-to-know lists, players and their two information sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::BehaviorKind;
use crate::crypto::{SealedEnvelope, SigDigest, Signature, SigningKey};

/// The three-tier clearance hierarchy. Information may only flow toward
/// players whose clearance dominates (is at least) the document's level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClearanceLevel {
    Confidential,
    Secret,
    TopSecret,
}

impl ClearanceLevel {
    pub const ALL: [ClearanceLevel; 3] = [
        ClearanceLevel::Confidential,
        ClearanceLevel::Secret,
        ClearanceLevel::TopSecret,
    ];
}

impl fmt::Display for ClearanceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ClearanceLevel::Confidential => "Confidential",
            ClearanceLevel::Secret => "Secret",
            ClearanceLevel::TopSecret => "TopSecret",
        };
        f.write_str(name)
    }
}

/// `true` iff clearance `a` is at least clearance `b`.
pub fn dominates(a: ClearanceLevel, b: ClearanceLevel) -> bool {
    a >= b
}

/// Small integer index identifying a player within one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub u32);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Serde adapter for maps keyed by [`PlayerId`]. JSON object keys are
/// strings, and the internally tagged report records replay buffered keys as
/// strings, so the key is written and parsed explicitly.
pub mod player_key_map {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::PlayerId;

    pub fn serialize<S, V>(map: &BTreeMap<PlayerId, V>, ser: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        V: Serialize,
    {
        ser.collect_map(map.iter().map(|(key, value)| (key.0.to_string(), value)))
    }

    pub fn deserialize<'de, D, V>(de: D) -> Result<BTreeMap<PlayerId, V>, D::Error>
    where
        D: Deserializer<'de>,
        V: Deserialize<'de>,
    {
        let raw = BTreeMap::<String, V>::deserialize(de)?;
        raw.into_iter()
            .map(|(key, value)| {
                key.parse::<u32>()
                    .map(|id| (PlayerId(id), value))
                    .map_err(|_| D::Error::custom(format!("bad player key `{key}`")))
            })
            .collect()
    }
}

/// Document identity: origin player plus a per-origin sequence number.
/// Deterministic given the scenario, globally unique within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocumentId {
    pub origin: PlayerId,
    pub seq: u32,
}

impl DocumentId {
    pub fn new(origin: PlayerId, seq: u32) -> Self {
        Self { origin, seq }
    }
}

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}.{}", self.origin.0, self.seq)
    }
}

/// A unit of classified information. Immutable once created; the origin is
/// always a member of its own need-to-know list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocumentId,
    #[serde(with = "crate::crypto::hex_vec")]
    pub content: Vec<u8>,
    pub level: ClearanceLevel,
    pub origin: PlayerId,
    pub need_to_know: BTreeSet<PlayerId>,
}

/// Metadata the registry owner keeps about every authored document.
/// Deliberately content-free: verdicts must never depend on document bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    pub id: DocumentId,
    pub origin: PlayerId,
    pub level: ClearanceLevel,
    pub need_to_know: BTreeSet<PlayerId>,
    pub authored_round: u32,
    pub content_len: usize,
}

/// Directory of all authored documents, keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    docs: BTreeMap<DocumentId, DocMeta>,
}

impl Catalog {
    pub fn insert(&mut self, meta: DocMeta) {
        self.docs.insert(meta.id, meta);
    }

    pub fn get(&self, id: DocumentId) -> Option<&DocMeta> {
        self.docs.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DocMeta> {
        self.docs.values()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// `true` iff `player` is on the need-to-know list of `doc`.
    pub fn in_need_to_know(&self, doc: DocumentId, player: PlayerId) -> bool {
        self.docs
            .get(&doc)
            .map(|m| m.need_to_know.contains(&player))
            .unwrap_or(false)
    }
}

/// How an item landed in a player's transferred set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionChannel {
    /// Cross-clearance protocol run: signature only.
    InterProtocol,
    /// Same-clearance protocol run: signature plus full document.
    IntraProtocol,
    /// Direct unregistered exchange between colluding players.
    Collusion,
}

/// One entry of the second information set: a signature, the full document
/// when the channel carried one, and bookkeeping about the acquisition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferredItem {
    pub sig: Signature,
    pub document: Option<Document>,
    pub sender: PlayerId,
    pub acquired_round: u32,
    pub via: AcquisitionChannel,
}

/// A player's two information sets: documents it created, and items that were
/// transferred to it by other players. The two sets never overlap by origin.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InformationSet {
    pub created: BTreeMap<DocumentId, Document>,
    pub transferred: BTreeMap<SigDigest, TransferredItem>,
}

impl InformationSet {
    /// `true` iff the player holds any item derived from `doc` (its own copy
    /// or a transferred signature/document).
    pub fn holds(&self, doc: DocumentId) -> bool {
        self.created.contains_key(&doc)
            || self.transferred.values().any(|item| item.sig.doc_id == doc)
    }

    /// Full document for `doc` if the player can produce one: either its own
    /// creation or a transferred copy that carried the document.
    pub fn full_document(&self, doc: DocumentId) -> Option<&Document> {
        if let Some(d) = self.created.get(&doc) {
            return Some(d);
        }
        self.transferred
            .values()
            .filter_map(|item| item.document.as_ref())
            .find(|d| d.id == doc)
    }
}

/// An envelope seen in transit by a player on the delivery path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedEnvelope {
    pub round: u32,
    pub from: PlayerId,
    pub to: PlayerId,
    pub envelope: SealedEnvelope,
}

/// A network member: clearance, behavior, signing key, both information
/// sets, and the append-only store of envelopes it has observed.
#[derive(Debug, Clone)]
pub struct Player {
    pub id: PlayerId,
    pub clearance: ClearanceLevel,
    pub behavior: BehaviorKind,
    pub key: SigningKey,
    pub info: InformationSet,
    pub message_store: Vec<ObservedEnvelope>,
}

impl Player {
    pub fn new(
        id: PlayerId,
        clearance: ClearanceLevel,
        behavior: BehaviorKind,
        key: SigningKey,
    ) -> Self {
        Self {
            id,
            clearance,
            behavior,
            key,
            info: InformationSet::default(),
            message_store: Vec::new(),
        }
    }

    /// Author a new document. The origin is added to the need-to-know list if
    /// absent; the fresh id is `(self.id, created-count)`.
    pub fn create_document(
        &mut self,
        content: Vec<u8>,
        level: ClearanceLevel,
        need_to_know: BTreeSet<PlayerId>,
    ) -> Result<Document, ModelError> {
        if !dominates(self.clearance, level) {
            return Err(ModelError::ClearanceViolation {
                player: self.id,
                clearance: self.clearance,
                level,
            });
        }
        let mut need_to_know = need_to_know;
        need_to_know.insert(self.id);
        let id = DocumentId::new(self.id, self.info.created.len() as u32);
        let doc = Document {
            id,
            content,
            level,
            origin: self.id,
            need_to_know,
        };
        self.info.created.insert(id, doc.clone());
        Ok(doc)
    }
}

/// `true` iff `player` is cleared for the document's level and on its
/// need-to-know list. Access and need-to-know are independent conditions.
pub fn may_receive(player: &Player, doc: &Document) -> bool {
    dominates(player.clearance, doc.level) && doc.need_to_know.contains(&player.id)
}

/// All players of one scenario, indexed by id.
#[derive(Debug, Clone, Default)]
pub struct Roster {
    players: Vec<Player>,
}

impl Roster {
    pub fn new(players: Vec<Player>) -> Self {
        Self { players }
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    pub fn get(&self, id: PlayerId) -> Option<&Player> {
        self.players.get(id.0 as usize)
    }

    pub fn get_mut(&mut self, id: PlayerId) -> Option<&mut Player> {
        self.players.get_mut(id.0 as usize)
    }

    pub fn ids(&self) -> impl Iterator<Item = PlayerId> + '_ {
        self.players.iter().map(|p| p.id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Player> {
        self.players.iter()
    }

    /// Mutable access to two distinct players at once.
    pub fn pair_mut(&mut self, a: PlayerId, b: PlayerId) -> Option<(&mut Player, &mut Player)> {
        let (a, b) = (a.0 as usize, b.0 as usize);
        if a == b || a >= self.players.len() || b >= self.players.len() {
            return None;
        }
        if a < b {
            let (lo, hi) = self.players.split_at_mut(b);
            Some((&mut lo[a], &mut hi[0]))
        } else {
            let (lo, hi) = self.players.split_at_mut(a);
            Some((&mut hi[0], &mut lo[b]))
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("{player} (clearance {clearance}) cannot author at level {level}")]
    ClearanceViolation {
        player: PlayerId,
        clearance: ClearanceLevel,
        level: ClearanceLevel,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::BehaviorKind;
    use crate::crypto::SigningKey;

    fn player(id: u32, clearance: ClearanceLevel) -> Player {
        Player::new(
            PlayerId(id),
            clearance,
            BehaviorKind::Loyal,
            SigningKey::derive(0, PlayerId(id)),
        )
    }

    #[test]
    fn dominance_matches_order() {
        use ClearanceLevel::*;
        assert!(dominates(TopSecret, Confidential));
        assert!(!dominates(Confidential, Secret));
        assert!(dominates(Secret, Secret));
    }

    #[test]
    fn dominance_is_a_total_order() {
        // Three levels: check reflexivity, antisymmetry and transitivity
        // exhaustively.
        for a in ClearanceLevel::ALL {
            assert!(dominates(a, a));
            for b in ClearanceLevel::ALL {
                if dominates(a, b) && dominates(b, a) {
                    assert_eq!(a, b);
                }
                assert!(dominates(a, b) || dominates(b, a));
                for c in ClearanceLevel::ALL {
                    if dominates(a, b) && dominates(b, c) {
                        assert!(dominates(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn receive_requires_both_clearance_and_need_to_know() {
        use ClearanceLevel::*;
        let mut author = player(0, Confidential);
        let doc = author
            .create_document(b"x".to_vec(), Confidential, [PlayerId(1)].into())
            .unwrap();

        let cleared_and_listed = player(1, TopSecret);
        assert!(may_receive(&cleared_and_listed, &doc));

        let cleared_not_listed = player(2, TopSecret);
        assert!(!may_receive(&cleared_not_listed, &doc));

        let mut secret_author = player(3, Secret);
        let secret_doc = secret_author
            .create_document(b"y".to_vec(), Secret, [PlayerId(4)].into())
            .unwrap();
        let listed_not_cleared = player(4, Confidential);
        assert!(!may_receive(&listed_not_cleared, &secret_doc));
    }

    #[test]
    fn raising_clearance_never_revokes_access() {
        use ClearanceLevel::*;
        let mut author = player(0, TopSecret);
        for level in ClearanceLevel::ALL {
            let doc = author
                .create_document(b"m".to_vec(), level, [PlayerId(1)].into())
                .unwrap();
            let mut prev = false;
            for clearance in ClearanceLevel::ALL {
                let p = player(1, clearance);
                let now = may_receive(&p, &doc);
                assert!(!prev || now, "raising clearance flipped access off");
                prev = now;
            }
        }
    }

    #[test]
    fn authoring_respects_clearance_and_freshness() {
        use ClearanceLevel::*;
        let mut p = player(0, Confidential);

        let first = p
            .create_document(b"a".to_vec(), Confidential, BTreeSet::new())
            .unwrap();
        assert_eq!(p.info.created.len(), 1);
        assert!(
            first.need_to_know.contains(&p.id),
            "origin joins need-to-know"
        );

        let err = p
            .create_document(b"b".to_vec(), TopSecret, BTreeSet::new())
            .unwrap_err();
        assert!(matches!(err, ModelError::ClearanceViolation { .. }));

        let second = p
            .create_document(b"c".to_vec(), Confidential, BTreeSet::new())
            .unwrap();
        assert_ne!(first.id, second.id);
        assert_eq!(p.info.created.len(), 2);
    }

    #[test]
    fn created_documents_carry_their_author_as_origin() {
        let mut p = player(5, ClearanceLevel::Secret);
        for n in 0..4 {
            p.create_document(vec![n], ClearanceLevel::Confidential, BTreeSet::new())
                .unwrap();
        }
        assert!(p.info.created.values().all(|d| d.origin == p.id));
    }

    #[test]
    fn pair_mut_rejects_degenerate_requests() {
        let mut roster = Roster::new(vec![
            player(0, ClearanceLevel::Confidential),
            player(1, ClearanceLevel::Secret),
        ]);
        assert!(roster.pair_mut(PlayerId(0), PlayerId(0)).is_none());
        assert!(roster.pair_mut(PlayerId(0), PlayerId(7)).is_none());
        let (a, b) = roster.pair_mut(PlayerId(1), PlayerId(0)).unwrap();
        assert_eq!(a.id, PlayerId(1));
        assert_eq!(b.id, PlayerId(0));
    }
}
