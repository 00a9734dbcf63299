//! The two registered transfer protocols and the loyalty check.
//!
//! Cross-clearance transfers blind the document behind a signature before it
//! moves; same-clearance transfers carry the full document so peers can
//! compare what is circulating. Both register the send (with a pretext) and
//! the receipt. At a loyalty check every player disclosing both information
//! sets is compared against the registry's expectations, and the verdict
//! vector is ratified by an agreement round so honest players end up with
//! identical copies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::disclosure_includes;
use crate::byzantine::{self, RatifyOutcome};
use crate::crypto::{
    open, seal, CryptoError, Payload, SealedEnvelope, SigDigest, Signature, Signer,
};
use crate::model::{
    dominates, AcquisitionChannel, Catalog, ClearanceLevel, DocumentId, PlayerId, Roster,
    TransferredItem,
};
use crate::registry::{render_pretext, ProtocolKind, Registry, RegistryError};

/// A transfer somebody wants executed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferRequest {
    pub from: PlayerId,
    pub to: PlayerId,
    pub doc: DocumentId,
    pub reason: String,
    pub protocol: ProtocolKind,
}

impl TransferRequest {
    /// Build a request, picking the protocol from the two players' levels:
    /// equal clearances go intra, different clearances go inter.
    pub fn between(
        roster: &Roster,
        from: PlayerId,
        to: PlayerId,
        doc: DocumentId,
        reason: impl Into<String>,
    ) -> Result<Self, ProtocolError> {
        let sender = roster
            .get(from)
            .ok_or(ProtocolError::UnknownPlayer { id: from })?;
        let receiver = roster
            .get(to)
            .ok_or(ProtocolError::UnknownPlayer { id: to })?;
        let protocol = if sender.clearance == receiver.clearance {
            ProtocolKind::Intra
        } else {
            ProtocolKind::Inter
        };
        Ok(Self {
            from,
            to,
            doc,
            reason: reason.into(),
            protocol,
        })
    }
}

/// Which registration steps to perform. Honest parties register both halves;
/// a traitor sender or receiver silently skips its own half.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferOptions {
    pub register_send: bool,
    pub register_receive: bool,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            register_send: true,
            register_receive: true,
        }
    }
}

/// What a completed transfer produced.
#[derive(Debug, Clone)]
pub struct DeliveryOutcome {
    pub sig: Signature,
    pub envelope: SealedEnvelope,
    pub send_entry: Option<usize>,
    pub receive_entry: Option<usize>,
}

/// Cross-clearance transfer: catalogue, sign (blinding), seal, transmit and
/// register the send, then the receiver opens and registers the receipt. The
/// receiver's transferred set gains the signature only — never the document.
pub fn inter_clearance_transfer(
    roster: &mut Roster,
    registry: &mut Registry,
    signer: &Signer,
    req: &TransferRequest,
    opts: TransferOptions,
    round: u32,
) -> Result<DeliveryOutcome, ProtocolError> {
    execute_transfer_kind(
        roster,
        registry,
        signer,
        req,
        opts,
        round,
        ProtocolKind::Inter,
    )
}

/// Same-clearance transfer: seal the full document, transmit and register the
/// send, then the receiver opens and registers the receipt. The receiver's
/// transferred set gains the signature and the full document.
pub fn intra_clearance_transfer(
    roster: &mut Roster,
    registry: &mut Registry,
    signer: &Signer,
    req: &TransferRequest,
    opts: TransferOptions,
    round: u32,
) -> Result<DeliveryOutcome, ProtocolError> {
    execute_transfer_kind(
        roster,
        registry,
        signer,
        req,
        opts,
        round,
        ProtocolKind::Intra,
    )
}

/// Dispatch on the request's protocol.
pub fn execute_transfer(
    roster: &mut Roster,
    registry: &mut Registry,
    signer: &Signer,
    req: &TransferRequest,
    opts: TransferOptions,
    round: u32,
) -> Result<DeliveryOutcome, ProtocolError> {
    execute_transfer_kind(roster, registry, signer, req, opts, round, req.protocol)
}

fn execute_transfer_kind(
    roster: &mut Roster,
    registry: &mut Registry,
    signer: &Signer,
    req: &TransferRequest,
    opts: TransferOptions,
    round: u32,
    kind: ProtocolKind,
) -> Result<DeliveryOutcome, ProtocolError> {
    if req.from == req.to {
        return Err(ProtocolError::SelfTransfer { player: req.from });
    }
    if roster.get(req.from).is_none() {
        return Err(ProtocolError::UnknownPlayer { id: req.from });
    }
    if roster.get(req.to).is_none() {
        return Err(ProtocolError::UnknownPlayer { id: req.to });
    }
    let (sender, receiver) = roster
        .pair_mut(req.from, req.to)
        .expect("both players exist and differ");

    // Step I: catalogue. The sender must be able to produce the document.
    let doc = sender
        .info
        .full_document(req.doc)
        .ok_or(ProtocolError::NotHolder {
            sender: req.from,
            doc: req.doc,
        })?
        .clone();
    if receiver.id == doc.origin {
        return Err(ProtocolError::OriginRecipient {
            receiver: req.to,
            doc: req.doc,
        });
    }
    match kind {
        ProtocolKind::Inter => {
            if sender.clearance == receiver.clearance {
                return Err(ProtocolError::LevelMismatch {
                    sender_level: sender.clearance,
                    receiver_level: receiver.clearance,
                    protocol: kind,
                });
            }
            if !dominates(receiver.clearance, doc.level) {
                return Err(ProtocolError::ClearanceViolation {
                    receiver: req.to,
                    clearance: receiver.clearance,
                    level: doc.level,
                });
            }
        }
        ProtocolKind::Intra => {
            if sender.clearance != receiver.clearance {
                return Err(ProtocolError::LevelMismatch {
                    sender_level: sender.clearance,
                    receiver_level: receiver.clearance,
                    protocol: kind,
                });
            }
        }
    }

    // Step II: blinding signature.
    let sig = signer.sign(&doc, &sender.key);

    // Step III: seal for the recipient.
    let payload = match kind {
        ProtocolKind::Inter => Payload::SignatureOnly(sig),
        ProtocolKind::Intra => Payload::DocumentAndSignature {
            document: doc.clone(),
            signature: sig,
        },
    };
    let envelope = seal(&payload, req.to);

    // Step IV: transmit; the sender registers the transfer and its pretext.
    let send_entry = if opts.register_send {
        Some(registry.register_send(
            req.from,
            req.to,
            sig,
            render_pretext(doc.id, &req.reason),
            round,
            kind,
        )?)
    } else {
        None
    };

    // Step V: the receiver opens and registers the receipt.
    let opened = open(&envelope, req.to)?;
    let item = match opened {
        Payload::SignatureOnly(signature) => TransferredItem {
            sig: signature,
            document: None,
            sender: req.from,
            acquired_round: round,
            via: AcquisitionChannel::InterProtocol,
        },
        Payload::DocumentAndSignature {
            document,
            signature,
        } => TransferredItem {
            sig: signature,
            document: Some(document),
            sender: req.from,
            acquired_round: round,
            via: AcquisitionChannel::IntraProtocol,
        },
    };
    receiver.info.transferred.entry(sig.digest).or_insert(item);

    let receive_entry = if opts.register_receive {
        Some(registry.register_receive(req.to, req.from, sig, round, kind)?)
    } else {
        None
    };

    Ok(DeliveryOutcome {
        sig,
        envelope,
        send_entry,
        receive_entry,
    })
}

/// One player's synchronized disclosure of both information sets, blinded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disclosure {
    pub player: PlayerId,
    pub round: u32,
    pub created_sigs: Vec<Signature>,
    pub transferred_sigs: Vec<Signature>,
}

/// Assemble every player's disclosure for the check at `round`, in unison.
/// Loyal and overt players disclose everything; concealing strategies omit
/// per their filter. One disclosure per player, always.
pub fn collect_disclosures(
    roster: &Roster,
    catalog: &Catalog,
    signer: &Signer,
    round: u32,
) -> BTreeMap<PlayerId, Disclosure> {
    let mut disclosures = BTreeMap::new();
    for player in roster.iter() {
        let created_sigs: Vec<Signature> = player
            .info
            .created
            .values()
            .map(|doc| signer.sign(doc, &player.key))
            .collect();
        let mut transferred_sigs: Vec<Signature> = player
            .info
            .transferred
            .values()
            .filter(|item| disclosure_includes(&player.behavior, player.id, item, catalog))
            .map(|item| item.sig)
            .collect();
        transferred_sigs.sort_by_key(|sig| sig.digest);
        disclosures.insert(
            player.id,
            Disclosure {
                player: player.id,
                round,
                created_sigs,
                transferred_sigs,
            },
        );
    }
    disclosures
}

/// A per-player loyalty outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Loyal,
    Curious,
}

/// Why a player was flagged. Every item except a missing disclosure names
/// exactly one signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Evidence {
    /// The registry expects the player to hold this, but the disclosure
    /// omitted it: concealment.
    UndisclosedHolding { sig: Signature, detail: String },
    /// The disclosure contains a holding no registered transfer explains.
    UnregisteredHolding { sig: Signature, detail: String },
    /// The player holds something whose need-to-know list excludes it.
    NeedToKnowViolation { sig: Signature, detail: String },
    /// The player failed to disclose at all at a check round.
    MissingDisclosure { detail: String },
}

impl Evidence {
    pub fn signature(&self) -> Option<&Signature> {
        match self {
            Evidence::UndisclosedHolding { sig, .. }
            | Evidence::UnregisteredHolding { sig, .. }
            | Evidence::NeedToKnowViolation { sig, .. } => Some(sig),
            Evidence::MissingDisclosure { .. } => None,
        }
    }
}

/// Verdict for one player at one check. Curious iff evidence is nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub player: PlayerId,
    pub round: u32,
    pub outcome: Outcome,
    pub evidence: Vec<Evidence>,
}

impl Verdict {
    pub fn loyal(player: PlayerId, round: u32) -> Self {
        Self {
            player,
            round,
            outcome: Outcome::Loyal,
            evidence: Vec::new(),
        }
    }

    pub fn is_curious(&self) -> bool {
        self.outcome == Outcome::Curious
    }
}

fn short_digest(digest: &SigDigest) -> String {
    hex::encode(&digest[..8])
}

/// Compare every player's disclosure against the registry.
///
/// Three rules produce evidence, all of them over blinded signatures:
/// (a) a registered holding missing from the disclosure, (b) a disclosed
/// holding the registry cannot explain, and (c) a holding — disclosed or
/// registered — whose document's need-to-know list excludes the player.
/// Signatures resolve to documents only through registered send pretexts,
/// never through document content. A player with no disclosure at all is
/// flagged outright.
pub fn loyalty_check(
    disclosures: &BTreeMap<PlayerId, Disclosure>,
    registry: &Registry,
    catalog: &Catalog,
    players: &[PlayerId],
    round: u32,
) -> Vec<Verdict> {
    let claims = registry.claimed_documents(round);
    // First registered send per digest, for evidence details.
    let mut first_send: BTreeMap<SigDigest, (PlayerId, u32)> = BTreeMap::new();
    for entry in registry.entries().iter().filter(|e| e.round <= round) {
        if entry.kind == crate::registry::EntryKind::Send {
            first_send
                .entry(entry.sig.digest)
                .or_insert((entry.actor, entry.round));
        }
    }

    let describe = |digest: &SigDigest| -> String {
        match claims.get(digest) {
            Some(doc) => format!("{doc}"),
            None => format!("unresolved item {}", short_digest(digest)),
        }
    };

    let mut verdicts = Vec::with_capacity(players.len());
    for &player in players {
        let expected = registry.expected_transferred_set(player, round);
        let mut evidence = Vec::new();

        let disclosed: BTreeMap<SigDigest, Signature> = match disclosures.get(&player) {
            Some(disclosure) => disclosure
                .transferred_sigs
                .iter()
                .map(|sig| (sig.digest, *sig))
                .collect(),
            None => {
                evidence.push(Evidence::MissingDisclosure {
                    detail: format!("no disclosure submitted at check round {round}"),
                });
                BTreeMap::new()
            }
        };

        // (a) Concealment: registered but not disclosed.
        for (digest, sig) in &expected {
            if !disclosed.contains_key(digest) {
                evidence.push(Evidence::UndisclosedHolding {
                    sig: *sig,
                    detail: format!(
                        "{} was registered for this player but missing from its disclosure",
                        describe(digest)
                    ),
                });
            }
        }

        // (b) Acquisition outside the registered protocols.
        for (digest, sig) in &disclosed {
            if !expected.contains_key(digest) {
                evidence.push(Evidence::UnregisteredHolding {
                    sig: *sig,
                    detail: format!(
                        "disclosed holding {} matches no registered transfer",
                        short_digest(digest)
                    ),
                });
            }
        }

        // (c) Need-to-know violations over the union of both views.
        let mut union: BTreeMap<SigDigest, Signature> = disclosed.clone();
        for (digest, sig) in &expected {
            union.entry(*digest).or_insert(*sig);
        }
        for (digest, sig) in &union {
            let Some(doc_id) = claims.get(digest) else {
                continue; // unresolvable: already covered by (b) when disclosed
            };
            let Some(meta) = catalog.get(*doc_id) else {
                continue;
            };
            if !meta.need_to_know.contains(&player) {
                let granted_by = first_send
                    .get(digest)
                    .map(|(sender, send_round)| format!("sent by {sender} in round {send_round}"))
                    .unwrap_or_else(|| "sender unregistered".to_string());
                evidence.push(Evidence::NeedToKnowViolation {
                    sig: *sig,
                    detail: format!(
                        "holds {} outside its need-to-know (origin {}, {granted_by})",
                        doc_id, meta.origin
                    ),
                });
            }
        }

        let outcome = if evidence.is_empty() {
            Outcome::Loyal
        } else {
            Outcome::Curious
        };
        verdicts.push(Verdict {
            player,
            round,
            outcome,
            evidence,
        });
    }
    verdicts
}

/// Everything one loyalty sweep produced.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub disclosures: BTreeMap<PlayerId, Disclosure>,
    /// Verdicts as computed from disclosures and the registry.
    pub computed: Vec<Verdict>,
    /// Verdicts after agreement ratification; what loyal players hold.
    pub ratified: Vec<Verdict>,
    pub ba_messages: u64,
    pub all_loyal_agree: bool,
}

/// Run the full detection sweep at `round`: collect synchronized disclosures,
/// compute verdicts, then broadcast the vector through the oral-messages
/// agreement with the registry owner as commander so every loyal player holds
/// the same verdicts. Traitorous relays substitute an all-loyal vector; with
/// enough honest players the ratified vector is the computed one.
pub fn loyalty_sweep(
    roster: &Roster,
    registry: &Registry,
    catalog: &Catalog,
    signer: &Signer,
    assumed_traitor_bound: u32,
    round: u32,
) -> SweepOutcome {
    let disclosures = collect_disclosures(roster, catalog, signer, round);
    let players: Vec<PlayerId> = roster.ids().collect();
    let computed = loyalty_check(&disclosures, registry, catalog, &players, round);

    let traitors: std::collections::BTreeSet<PlayerId> = roster
        .iter()
        .filter(|p| p.behavior.is_traitor())
        .map(|p| p.id)
        .collect();

    let RatifyOutcome {
        verdicts: ratified,
        messages: ba_messages,
        all_loyal_agree,
    } = byzantine::ratify_verdicts(&computed, &players, &traitors, assumed_traitor_bound);

    SweepOutcome {
        disclosures,
        computed,
        ratified,
        ba_messages,
        all_loyal_agree,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("receiver {receiver} (clearance {clearance}) cannot take level {level} material")]
    ClearanceViolation {
        receiver: PlayerId,
        clearance: ClearanceLevel,
        level: ClearanceLevel,
    },
    #[error("{sender} does not hold {doc} as a full document")]
    NotHolder { sender: PlayerId, doc: DocumentId },
    #[error("{protocol} protocol cannot pair clearances {sender_level} and {receiver_level}")]
    LevelMismatch {
        sender_level: ClearanceLevel,
        receiver_level: ClearanceLevel,
        protocol: ProtocolKind,
    },
    #[error("{receiver} already originated {doc}; nothing to transfer")]
    OriginRecipient { receiver: PlayerId, doc: DocumentId },
    #[error("{player} cannot transfer to itself")]
    SelfTransfer { player: PlayerId },
    #[error("no such player {id}")]
    UnknownPlayer { id: PlayerId },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}
