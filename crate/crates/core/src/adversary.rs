//! Behavior strategies: the honest baseline, the two over-collecting
//! ("curious") variants, and colluding traitors.
//!
//! Step functions are pure: given the same observable state, round and seed
//! they return the same action list. The engine executes the actions and owns
//! all mutation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{
    dominates, may_receive, Catalog, ClearanceLevel, DocumentId, PlayerId, Roster, TransferredItem,
};

fn default_request_rate() -> u32 {
    1
}

/// A player's strategy, as declared in the scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum BehaviorKind {
    /// Authors on schedule, shares within need-to-know, discloses fully.
    Loyal,
    /// Collects beyond its need-to-know but discloses everything it holds.
    CuriousOvert {
        #[serde(default = "default_request_rate")]
        requests_per_round: u32,
    },
    /// Collects beyond its need-to-know and omits those items at checks.
    CuriousConcealing {
        #[serde(default = "default_request_rate")]
        requests_per_round: u32,
    },
    /// Exchanges holdings with partners off the record and never registers
    /// or discloses anything incriminating.
    TraitorColluding {
        partners: Vec<PlayerId>,
        #[serde(default = "default_request_rate")]
        requests_per_round: u32,
    },
}

impl BehaviorKind {
    pub fn tag(&self) -> BehaviorTag {
        match self {
            BehaviorKind::Loyal => BehaviorTag::Loyal,
            BehaviorKind::CuriousOvert { .. } => BehaviorTag::CuriousOvert,
            BehaviorKind::CuriousConcealing { .. } => BehaviorTag::CuriousConcealing,
            BehaviorKind::TraitorColluding { .. } => BehaviorTag::TraitorColluding,
        }
    }

    pub fn is_loyal(&self) -> bool {
        matches!(self, BehaviorKind::Loyal)
    }

    pub fn is_traitor(&self) -> bool {
        matches!(self, BehaviorKind::TraitorColluding { .. })
    }

    /// Whether this behavior hoards every envelope it sees in transit.
    pub fn stores_observed(&self) -> bool {
        !self.is_loyal()
    }

    /// Whether this behavior registers its own protocol steps.
    pub fn registers(&self) -> bool {
        !self.is_traitor()
    }
}

/// Parameter-free label used in ground truth and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BehaviorTag {
    Loyal,
    CuriousOvert,
    CuriousConcealing,
    TraitorColluding,
}

impl BehaviorTag {
    pub fn is_loyal(self) -> bool {
        self == BehaviorTag::Loyal
    }
}

/// How a player answers transfer requests. Requests within the requester's
/// need-to-know are always granted; out-of-need-to-know requests are denied
/// when the holder verifies, otherwise granted with `grant_probability`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustPolicy {
    pub grant_probability: f64,
    pub verify_need_to_know: bool,
}

impl Default for TrustPolicy {
    fn default() -> Self {
        Self {
            grant_probability: 0.5,
            verify_need_to_know: false,
        }
    }
}

/// One thing a player wants done this round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Author a scheduled document.
    Author {
        level: ClearanceLevel,
        need_to_know: BTreeSet<PlayerId>,
    },
    /// Run a registered transfer protocol toward `to`.
    Share { to: PlayerId, doc: DocumentId },
    /// Ask `holder` to hand over `doc`.
    Request { holder: PlayerId, doc: DocumentId },
    /// Push every full-document holding to a collusion partner, off the record.
    Exchange { partner: PlayerId },
}

/// Everything a step function may look at.
pub struct StepContext<'a> {
    pub player: PlayerId,
    pub round: u32,
    pub roster: &'a Roster,
    pub catalog: &'a Catalog,
    /// Scheduled authorings due for this player this round, in file order.
    pub authorings_due: &'a [(ClearanceLevel, BTreeSet<PlayerId>)],
    /// Denied-request attempt counts for this player, per document.
    pub attempts: &'a BTreeMap<DocumentId, u32>,
}

/// Dispatch to the behavior's step function.
pub fn step(ctx: &StepContext<'_>) -> Vec<Action> {
    let me = ctx.roster.get(ctx.player).expect("player exists");
    match &me.behavior {
        BehaviorKind::Loyal => loyal_step(ctx),
        BehaviorKind::CuriousOvert { requests_per_round }
        | BehaviorKind::CuriousConcealing { requests_per_round } => {
            curious_step(ctx, *requests_per_round)
        }
        BehaviorKind::TraitorColluding {
            partners,
            requests_per_round,
        } => traitor_collude_step(ctx, partners, *requests_per_round),
    }
}

/// Honest baseline: author what the schedule says, then share every created
/// document with the need-to-know members that can receive it and do not
/// hold it yet.
pub fn loyal_step(ctx: &StepContext<'_>) -> Vec<Action> {
    let mut actions = authoring_actions(ctx);
    actions.extend(dissemination_actions(ctx));
    actions
}

/// Over-collection on top of the honest baseline: request documents outside
/// the player's need-to-know from likely holders, rotating targets after
/// denials. Overt and concealing variants differ only at disclosure time.
pub fn curious_step(ctx: &StepContext<'_>, requests_per_round: u32) -> Vec<Action> {
    let mut actions = loyal_step(ctx);
    actions.extend(collection_actions(ctx, requests_per_round));
    actions
}

/// Colluding traitors author their scheduled documents (skipping any
/// dissemination), push holdings to each partner off the record, and keep
/// requesting like curious players, retrying denied requests against
/// different peers across rounds.
pub fn traitor_collude_step(
    ctx: &StepContext<'_>,
    partners: &[PlayerId],
    requests_per_round: u32,
) -> Vec<Action> {
    let mut actions = authoring_actions(ctx);
    let mut partner_list: Vec<PlayerId> = partners.to_vec();
    partner_list.sort_unstable();
    partner_list.dedup();
    for partner in partner_list {
        if partner != ctx.player && ctx.roster.get(partner).is_some() {
            actions.push(Action::Exchange { partner });
        }
    }
    actions.extend(collection_actions(ctx, requests_per_round));
    actions
}

fn authoring_actions(ctx: &StepContext<'_>) -> Vec<Action> {
    ctx.authorings_due
        .iter()
        .map(|(level, need_to_know)| Action::Author {
            level: *level,
            need_to_know: need_to_know.clone(),
        })
        .collect()
}

fn dissemination_actions(ctx: &StepContext<'_>) -> Vec<Action> {
    let me = ctx.roster.get(ctx.player).expect("player exists");
    let mut actions = Vec::new();
    for doc in me.info.created.values() {
        for &target in &doc.need_to_know {
            if target == ctx.player {
                continue;
            }
            let Some(peer) = ctx.roster.get(target) else {
                continue;
            };
            if may_receive(peer, doc) && !peer.info.holds(doc.id) {
                actions.push(Action::Share {
                    to: target,
                    doc: doc.id,
                });
            }
        }
    }
    actions
}

/// Documents worth requesting: within this player's clearance, outside its
/// need-to-know, and not already held.
fn collection_targets(ctx: &StepContext<'_>) -> Vec<DocumentId> {
    let me = ctx.roster.get(ctx.player).expect("player exists");
    ctx.catalog
        .iter()
        .filter(|meta| {
            dominates(me.clearance, meta.level)
                && !meta.need_to_know.contains(&ctx.player)
                && !me.info.holds(meta.id)
        })
        .map(|meta| meta.id)
        .collect()
}

fn collection_actions(ctx: &StepContext<'_>, requests_per_round: u32) -> Vec<Action> {
    let mut actions = Vec::new();
    for doc in collection_targets(ctx) {
        if actions.len() as u32 >= requests_per_round {
            break;
        }
        // Candidate holders: the origin first, then everyone else in id
        // order. Each denial advances the rotation, so repeated attempts
        // land on different peers.
        let mut candidates = vec![doc.origin];
        candidates.extend(
            ctx.roster
                .ids()
                .filter(|&p| p != ctx.player && p != doc.origin),
        );
        if candidates.is_empty() {
            continue;
        }
        let attempt = ctx.attempts.get(&doc).copied().unwrap_or(0);
        let holder = candidates[attempt as usize % candidates.len()];
        actions.push(Action::Request { holder, doc });
    }
    actions
}

/// Holder-side answer to a request. `roll` is only consulted for the
/// exploitable case: an out-of-need-to-know request against a holder that
/// does not verify.
pub fn grants_request(
    behavior: &BehaviorKind,
    trust: &TrustPolicy,
    requester_in_need_to_know: bool,
    roll: impl FnOnce(f64) -> bool,
) -> bool {
    if behavior.is_traitor() {
        return false;
    }
    if requester_in_need_to_know {
        return true;
    }
    if trust.verify_need_to_know {
        return false;
    }
    roll(trust.grant_probability)
}

/// Whether `item` appears in this player's disclosure at a loyalty check.
pub fn disclosure_includes(
    behavior: &BehaviorKind,
    holder: PlayerId,
    item: &TransferredItem,
    catalog: &Catalog,
) -> bool {
    match behavior {
        BehaviorKind::Loyal | BehaviorKind::CuriousOvert { .. } => true,
        BehaviorKind::CuriousConcealing { .. } => catalog.in_need_to_know(item.sig.doc_id, holder),
        BehaviorKind::TraitorColluding { .. } => {
            item.via != crate::model::AcquisitionChannel::Collusion
                && catalog.in_need_to_know(item.sig.doc_id, holder)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SigningKey;
    use crate::model::{AcquisitionChannel, DocMeta, Player};

    fn roster_of(specs: &[(u32, ClearanceLevel, BehaviorKind)]) -> Roster {
        Roster::new(
            specs
                .iter()
                .map(|(id, clearance, behavior)| {
                    Player::new(
                        PlayerId(*id),
                        *clearance,
                        behavior.clone(),
                        SigningKey::derive(0, PlayerId(*id)),
                    )
                })
                .collect(),
        )
    }

    fn meta(origin: u32, seq: u32, level: ClearanceLevel, ntk: &[u32]) -> DocMeta {
        DocMeta {
            id: DocumentId::new(PlayerId(origin), seq),
            origin: PlayerId(origin),
            level,
            need_to_know: ntk.iter().map(|&p| PlayerId(p)).collect(),
            authored_round: 0,
            content_len: 4,
        }
    }

    #[test]
    fn idle_loyal_player_does_nothing() {
        use ClearanceLevel::*;
        let roster = roster_of(&[(0, Confidential, BehaviorKind::Loyal)]);
        let ctx = StepContext {
            player: PlayerId(0),
            round: 0,
            roster: &roster,
            catalog: &Catalog::default(),
            authorings_due: &[],
            attempts: &BTreeMap::new(),
        };
        assert!(loyal_step(&ctx).is_empty());
    }

    #[test]
    fn scheduled_authoring_becomes_an_author_action() {
        use ClearanceLevel::*;
        let roster = roster_of(&[(0, Confidential, BehaviorKind::Loyal)]);
        let due = vec![(Confidential, BTreeSet::from([PlayerId(0)]))];
        let ctx = StepContext {
            player: PlayerId(0),
            round: 0,
            roster: &roster,
            catalog: &Catalog::default(),
            authorings_due: &due,
            attempts: &BTreeMap::new(),
        };
        let actions = loyal_step(&ctx);
        assert_eq!(actions.len(), 1);
        assert!(matches!(actions[0], Action::Author { .. }));
    }

    #[test]
    fn curious_rotation_walks_through_peers() {
        use ClearanceLevel::*;
        let behavior = BehaviorKind::CuriousOvert {
            requests_per_round: 1,
        };
        let roster = roster_of(&[
            (0, Confidential, BehaviorKind::Loyal),
            (1, Confidential, BehaviorKind::Loyal),
            (2, Confidential, behavior.clone()),
        ]);
        let mut catalog = Catalog::default();
        catalog.insert(meta(0, 0, Confidential, &[0, 1]));

        let mut attempts = BTreeMap::new();
        let doc = DocumentId::new(PlayerId(0), 0);
        let mut seen = Vec::new();
        for attempt in 0..3u32 {
            attempts.insert(doc, attempt);
            let ctx = StepContext {
                player: PlayerId(2),
                round: attempt,
                roster: &roster,
                catalog: &catalog,
                authorings_due: &[],
                attempts: &attempts,
            };
            let actions = curious_step(&ctx, 1);
            let Some(Action::Request { holder, .. }) = actions.last() else {
                panic!("expected a request, got {actions:?}");
            };
            seen.push(*holder);
        }
        // Origin first, then the other peer, then back to the origin.
        assert_eq!(seen, vec![PlayerId(0), PlayerId(1), PlayerId(0)]);
    }

    #[test]
    fn curious_ignores_documents_it_cannot_read_or_already_has() {
        use ClearanceLevel::*;
        let behavior = BehaviorKind::CuriousOvert {
            requests_per_round: 8,
        };
        let roster = roster_of(&[
            (0, TopSecret, BehaviorKind::Loyal),
            (1, Confidential, behavior.clone()),
        ]);
        let mut catalog = Catalog::default();
        catalog.insert(meta(0, 0, TopSecret, &[0])); // above requester clearance
        catalog.insert(meta(0, 1, Confidential, &[0, 1])); // within need-to-know

        let ctx = StepContext {
            player: PlayerId(1),
            round: 0,
            roster: &roster,
            catalog: &catalog,
            authorings_due: &[],
            attempts: &BTreeMap::new(),
        };
        assert!(collection_actions(&ctx, 8).is_empty());
    }

    #[test]
    fn traitors_exchange_with_each_partner_and_keep_requesting() {
        use ClearanceLevel::*;
        let behavior = BehaviorKind::TraitorColluding {
            partners: vec![PlayerId(1), PlayerId(1), PlayerId(0)],
            requests_per_round: 1,
        };
        let roster = roster_of(&[
            (0, Confidential, behavior.clone()),
            (
                1,
                Confidential,
                BehaviorKind::TraitorColluding {
                    partners: vec![PlayerId(0)],
                    requests_per_round: 1,
                },
            ),
            (2, Confidential, BehaviorKind::Loyal),
        ]);
        let mut catalog = Catalog::default();
        catalog.insert(meta(2, 0, Confidential, &[2]));

        let ctx = StepContext {
            player: PlayerId(0),
            round: 3,
            roster: &roster,
            catalog: &catalog,
            authorings_due: &[],
            attempts: &BTreeMap::new(),
        };
        let actions = step(&ctx);
        // Partner list deduplicated and self-free: one exchange, one request.
        assert_eq!(
            actions,
            vec![
                Action::Exchange {
                    partner: PlayerId(1)
                },
                Action::Request {
                    holder: PlayerId(2),
                    doc: DocumentId::new(PlayerId(2), 0),
                },
            ]
        );
    }

    #[test]
    fn steps_are_pure_functions_of_their_inputs() {
        use ClearanceLevel::*;
        let behavior = BehaviorKind::CuriousConcealing {
            requests_per_round: 2,
        };
        let roster = roster_of(&[
            (0, Confidential, BehaviorKind::Loyal),
            (1, Confidential, behavior.clone()),
        ]);
        let mut catalog = Catalog::default();
        catalog.insert(meta(0, 0, Confidential, &[0]));
        let attempts = BTreeMap::new();
        let ctx = StepContext {
            player: PlayerId(1),
            round: 5,
            roster: &roster,
            catalog: &catalog,
            authorings_due: &[],
            attempts: &attempts,
        };
        assert_eq!(step(&ctx), step(&ctx));
    }

    #[test]
    fn trust_policy_gates_grants() {
        let loyal = BehaviorKind::Loyal;
        let verifying = TrustPolicy {
            grant_probability: 1.0,
            verify_need_to_know: true,
        };
        let lax = TrustPolicy {
            grant_probability: 1.0,
            verify_need_to_know: false,
        };

        // In-need-to-know requests never reach the roll.
        assert!(grants_request(&loyal, &verifying, true, |_| panic!(
            "rolled"
        )));
        // Verification kills out-of-need-to-know requests outright.
        assert!(!grants_request(&loyal, &verifying, false, |_| panic!(
            "rolled"
        )));
        // Exploitable trust: the roll decides.
        assert!(grants_request(&loyal, &lax, false, |p| p >= 1.0));
        // Traitors hoard.
        let traitor = BehaviorKind::TraitorColluding {
            partners: vec![],
            requests_per_round: 1,
        };
        assert!(!grants_request(&traitor, &lax, true, |_| true));
    }

    #[test]
    fn disclosure_filters_match_strategy_definitions() {
        use ClearanceLevel::*;
        let mut catalog = Catalog::default();
        catalog.insert(meta(0, 0, Confidential, &[0, 1]));
        catalog.insert(meta(0, 1, Confidential, &[0]));

        let in_ntk = TransferredItem {
            sig: crate::crypto::sign(
                &crate::model::Document {
                    id: DocumentId::new(PlayerId(0), 0),
                    content: vec![1],
                    level: Confidential,
                    origin: PlayerId(0),
                    need_to_know: [PlayerId(0), PlayerId(1)].into(),
                },
                &SigningKey::derive(0, PlayerId(0)),
            ),
            document: None,
            sender: PlayerId(0),
            acquired_round: 1,
            via: AcquisitionChannel::InterProtocol,
        };
        let mut out_of_ntk = in_ntk.clone();
        out_of_ntk.sig.doc_id = DocumentId::new(PlayerId(0), 1);
        let mut colluded = in_ntk.clone();
        colluded.via = AcquisitionChannel::Collusion;

        let holder = PlayerId(1);
        let overt = BehaviorKind::CuriousOvert {
            requests_per_round: 1,
        };
        let concealing = BehaviorKind::CuriousConcealing {
            requests_per_round: 1,
        };
        let traitor = BehaviorKind::TraitorColluding {
            partners: vec![],
            requests_per_round: 1,
        };

        assert!(disclosure_includes(
            &BehaviorKind::Loyal,
            holder,
            &in_ntk,
            &catalog
        ));
        assert!(disclosure_includes(&overt, holder, &out_of_ntk, &catalog));
        assert!(!disclosure_includes(
            &concealing,
            holder,
            &out_of_ntk,
            &catalog
        ));
        assert!(disclosure_includes(&concealing, holder, &in_ntk, &catalog));
        assert!(!disclosure_includes(&traitor, holder, &colluded, &catalog));
        assert!(disclosure_includes(&traitor, holder, &in_ntk, &catalog));
    }
}
