//! Round-synchronous scheduler.
//!
//! Each round evaluates players in id order; every player's step function
//! returns actions which the engine executes immediately, so the whole run is
//! a pure function of `(scenario, seed)`. Every `check_every` rounds the
//! engine runs a loyalty sweep and appends a check record. Envelopes travel
//! along the lexicographically smallest shortest path of the topology, and
//! everyone on that path who hoards messages gets a copy in its store.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::adversary::{self, Action, StepContext, TrustPolicy};
use crate::crypto::{SigDigest, Signer, SigningKey};
use crate::model::{
    AcquisitionChannel, Catalog, ClearanceLevel, DocMeta, Document, DocumentId, ObservedEnvelope,
    Player, PlayerId, Roster,
};
use crate::protocols::{self, TransferOptions, TransferRequest};
use crate::registry::Registry;
use crate::report::{
    CheckRecord, GroundTruthSummary, HoldingRecord, PlayerHoldings, Report, ReportRecord,
    TransferEvent,
};
use crate::rng::SeedStream;
use crate::scenario::{AuthoringsByRound, Scenario, ScenarioError};

/// Detection quality of one run, measured against ground-truth behavior tags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub true_positives: u32,
    pub false_positives: u32,
    pub false_negatives: u32,
    /// First flagged check round minus first out-of-need-to-know acquisition
    /// round, per detected player.
    #[serde(with = "crate::model::player_key_map")]
    pub rounds_to_detection: BTreeMap<PlayerId, i64>,
    pub ba_messages: u64,
    pub transfers: u64,
}

/// Engine knobs beyond the scenario itself. The defaults run the scenario as
/// written; the two fields exist for reruns that swap document contents while
/// holding signatures fixed, which is how content-independence of verdicts is
/// demonstrated.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Pin `(signer, document)` pairs to fixed digests.
    pub sig_overrides: BTreeMap<(PlayerId, DocumentId), SigDigest>,
    /// Author these documents with zeroed content (same length).
    pub zero_content_docs: BTreeSet<DocumentId>,
}

/// Run a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<Report, ScenarioError> {
    run_with_options(scenario, &RunOptions::default())
}

/// Run a scenario with explicit engine options.
pub fn run_with_options(
    scenario: &Scenario,
    options: &RunOptions,
) -> Result<Report, ScenarioError> {
    scenario.validate()?;
    let mut world = World::new(scenario, options)?;
    for round in 0..scenario.rounds {
        world.play_round(round);
        if (round + 1) % scenario.check_every == 0 {
            world.sweep(round);
        }
    }
    Ok(world.into_report())
}

/// Fold the verdict history against ground truth. A player counts as guilty
/// when its behavior tag is anything but loyal; `tp + fn` equals the number
/// of guilty players.
pub fn metrics_from(
    checks: &[CheckRecord],
    ground_truth: &GroundTruthSummary,
    transfers: u64,
) -> Metrics {
    let mut flagged_first: BTreeMap<PlayerId, u32> = BTreeMap::new();
    let mut ba_messages = 0u64;
    for check in checks {
        ba_messages += check.ba_messages;
        for verdict in &check.verdicts {
            if verdict.is_curious() {
                flagged_first.entry(verdict.player).or_insert(check.round);
            }
        }
    }

    let mut metrics = Metrics {
        transfers,
        ba_messages,
        ..Metrics::default()
    };
    for (&player, &tag) in &ground_truth.behaviors {
        let flagged = flagged_first.contains_key(&player);
        if tag.is_loyal() {
            if flagged {
                metrics.false_positives += 1;
            }
        } else if flagged {
            metrics.true_positives += 1;
        } else {
            metrics.false_negatives += 1;
        }
    }
    for (player, flag_round) in &flagged_first {
        if let Some(acquired) = ground_truth.first_out_of_need_to_know.get(player) {
            metrics
                .rounds_to_detection
                .insert(*player, *flag_round as i64 - *acquired as i64);
        }
    }
    metrics
}

struct World<'a> {
    scenario: &'a Scenario,
    options: &'a RunOptions,
    roster: Roster,
    registry: Registry,
    catalog: Catalog,
    signer: Signer,
    topology: Vec<BTreeSet<PlayerId>>,
    schedule: AuthoringsByRound,
    trust: Vec<TrustPolicy>,
    attempts: Vec<BTreeMap<DocumentId, u32>>,
    grant_streams: Vec<SeedStream>,
    content_root: SeedStream,
    records: Vec<ReportRecord>,
    checks: Vec<CheckRecord>,
    first_out_of_ntk: BTreeMap<PlayerId, u32>,
    transfers: u64,
}

impl<'a> World<'a> {
    fn new(scenario: &'a Scenario, options: &'a RunOptions) -> Result<Self, ScenarioError> {
        let topology = scenario.effective_topology()?;
        let players: Vec<Player> = scenario
            .players
            .iter()
            .enumerate()
            .map(|(index, spec)| {
                let id = PlayerId(index as u32);
                Player::new(
                    id,
                    spec.clearance,
                    spec.behavior.clone(),
                    SigningKey::derive(scenario.seed, id),
                )
            })
            .collect();
        let player_count = players.len();

        let grant_root = SeedStream::from_seed(scenario.seed, "grants");
        let records = vec![ReportRecord::Header {
            tool_version: crate::VERSION.to_string(),
            seed: scenario.seed,
            scenario: scenario.clone(),
        }];

        Ok(Self {
            scenario,
            options,
            roster: Roster::new(players),
            registry: Registry::new(),
            catalog: Catalog::default(),
            signer: Signer::with_overrides(options.sig_overrides.clone()),
            topology,
            schedule: scenario.schedule_by_round(),
            trust: scenario.players.iter().map(|p| p.trust).collect(),
            attempts: vec![BTreeMap::new(); player_count],
            grant_streams: (0..player_count)
                .map(|index| grant_root.derive_indexed("player", index as u64))
                .collect(),
            content_root: SeedStream::from_seed(scenario.seed, "content"),
            records,
            checks: Vec::new(),
            first_out_of_ntk: BTreeMap::new(),
            transfers: 0,
        })
    }

    fn play_round(&mut self, round: u32) {
        for index in 0..self.roster.len() {
            let player = PlayerId(index as u32);
            let actions = {
                let empty = Vec::new();
                let due = self.schedule.get(&(round, player)).unwrap_or(&empty);
                let ctx = StepContext {
                    player,
                    round,
                    roster: &self.roster,
                    catalog: &self.catalog,
                    authorings_due: due,
                    attempts: &self.attempts[index],
                };
                adversary::step(&ctx)
            };
            for action in actions {
                self.execute(player, action, round);
            }
        }
    }

    fn execute(&mut self, player: PlayerId, action: Action, round: u32) {
        match action {
            Action::Author {
                level,
                need_to_know,
            } => self.author(player, level, need_to_know, round),
            Action::Share { to, doc } => {
                self.protocol_transfer(player, to, doc, "need-to-know share", round);
            }
            Action::Request { holder, doc } => self.handle_request(player, holder, doc, round),
            Action::Exchange { partner } => self.collude_exchange(player, partner, round),
        }
    }

    fn author(
        &mut self,
        player: PlayerId,
        level: ClearanceLevel,
        need_to_know: BTreeSet<PlayerId>,
        round: u32,
    ) {
        let author = self.roster.get_mut(player).expect("player exists");
        let seq = author.info.created.len() as u32;
        let id = DocumentId::new(player, seq);
        let content = if self.options.zero_content_docs.contains(&id) {
            vec![0u8; 32]
        } else {
            self.content_root
                .derive_indexed("origin", player.0 as u64)
                .derive_indexed("seq", seq as u64)
                .next_bytes(32)
        };
        let doc = author
            .create_document(content, level, need_to_know)
            .expect("authoring schedule was validated");
        let meta = DocMeta {
            id: doc.id,
            origin: doc.origin,
            level: doc.level,
            need_to_know: doc.need_to_know.clone(),
            authored_round: round,
            content_len: doc.content.len(),
        };
        self.catalog.insert(meta.clone());
        self.records.push(ReportRecord::Document(meta));
    }

    fn protocol_transfer(
        &mut self,
        from: PlayerId,
        to: PlayerId,
        doc: DocumentId,
        reason: &str,
        round: u32,
    ) {
        let request = TransferRequest::between(&self.roster, from, to, doc, reason)
            .expect("both players exist");
        let opts = TransferOptions {
            register_send: self
                .roster
                .get(from)
                .expect("sender exists")
                .behavior
                .registers(),
            register_receive: self
                .roster
                .get(to)
                .expect("receiver exists")
                .behavior
                .registers(),
        };

        let log_start = self.registry.len();
        let outcome = protocols::execute_transfer(
            &mut self.roster,
            &mut self.registry,
            &self.signer,
            &request,
            opts,
            round,
        )
        .expect("engine-initiated transfers satisfy the protocol preconditions");
        self.transfers += 1;

        for index in log_start..self.registry.len() {
            self.records.push(ReportRecord::Registry {
                index,
                entry: self.registry.entries()[index].clone(),
            });
        }
        self.records.push(ReportRecord::Event(TransferEvent {
            round,
            from,
            to,
            doc,
            channel: match request.protocol {
                crate::registry::ProtocolKind::Inter => AcquisitionChannel::InterProtocol,
                crate::registry::ProtocolKind::Intra => AcquisitionChannel::IntraProtocol,
            },
            registered_send: outcome.send_entry.is_some(),
            registered_receive: outcome.receive_entry.is_some(),
        }));

        // Everyone on the delivery path sees the envelope go by; hoarders
        // keep a copy.
        for node in self.route(from, to) {
            let witness = self.roster.get_mut(node).expect("path node exists");
            if witness.behavior.stores_observed() {
                witness.message_store.push(ObservedEnvelope {
                    round,
                    from,
                    to,
                    envelope: outcome.envelope.clone(),
                });
            }
        }

        if !self.catalog.in_need_to_know(doc, to) {
            self.first_out_of_ntk.entry(to).or_insert(round);
        }
    }

    fn handle_request(
        &mut self,
        requester: PlayerId,
        holder: PlayerId,
        doc: DocumentId,
        round: u32,
    ) {
        if requester == holder || self.roster.get(holder).is_none() {
            return;
        }
        let feasible = {
            let holder_ref = self.roster.get(holder).expect("holder exists");
            let requester_ref = self.roster.get(requester).expect("requester exists");
            match holder_ref.info.full_document(doc) {
                None => false,
                Some(full) => {
                    full.origin != requester
                        && (holder_ref.clearance == requester_ref.clearance
                            || crate::model::dominates(requester_ref.clearance, full.level))
                }
            }
        };
        let granted = feasible && {
            let behavior = self
                .roster
                .get(holder)
                .expect("holder exists")
                .behavior
                .clone();
            let trust = self.trust[holder.0 as usize];
            let in_ntk = self.catalog.in_need_to_know(doc, requester);
            let stream = &mut self.grant_streams[holder.0 as usize];
            adversary::grants_request(&behavior, &trust, in_ntk, |p| stream.chance(p))
        };

        if granted {
            self.protocol_transfer(holder, requester, doc, "granted request", round);
        } else {
            *self.attempts[requester.0 as usize].entry(doc).or_default() += 1;
        }
    }

    /// Off-the-record push of every full-document holding to a partner.
    fn collude_exchange(&mut self, pusher: PlayerId, partner: PlayerId, round: u32) {
        if pusher == partner || self.roster.get(partner).is_none() {
            return;
        }
        let payload: Vec<Document> = {
            let source = self.roster.get(pusher).expect("pusher exists");
            let mut docs: Vec<Document> = source.info.created.values().cloned().collect();
            docs.extend(
                source
                    .info
                    .transferred
                    .values()
                    .filter_map(|item| item.document.clone()),
            );
            docs.sort_by_key(|d| d.id);
            docs.dedup_by_key(|d| d.id);
            docs
        };
        for doc in payload {
            let receiver = self.roster.get(partner).expect("partner exists");
            if doc.origin == partner || receiver.info.holds(doc.id) {
                continue;
            }
            let sig = {
                let source = self.roster.get(pusher).expect("pusher exists");
                self.signer.sign(&doc, &source.key)
            };
            let receiver = self.roster.get_mut(partner).expect("partner exists");
            receiver
                .info
                .transferred
                .entry(sig.digest)
                .or_insert(crate::model::TransferredItem {
                    sig,
                    document: Some(doc.clone()),
                    sender: pusher,
                    acquired_round: round,
                    via: AcquisitionChannel::Collusion,
                });
            self.records.push(ReportRecord::Event(TransferEvent {
                round,
                from: pusher,
                to: partner,
                doc: doc.id,
                channel: AcquisitionChannel::Collusion,
                registered_send: false,
                registered_receive: false,
            }));
            if !self.catalog.in_need_to_know(doc.id, partner) {
                self.first_out_of_ntk.entry(partner).or_insert(round);
            }
        }
    }

    /// Lexicographically smallest shortest path from `from` to `to`.
    fn route(&self, from: PlayerId, to: PlayerId) -> Vec<PlayerId> {
        if from == to {
            return vec![from];
        }
        let n = self.roster.len();
        let mut parent: Vec<Option<PlayerId>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from.0 as usize] = true;
        while let Some(current) = queue.pop_front() {
            if current == to {
                break;
            }
            for &next in &self.topology[current.0 as usize] {
                if !seen[next.0 as usize] {
                    seen[next.0 as usize] = true;
                    parent[next.0 as usize] = Some(current);
                    queue.push_back(next);
                }
            }
        }
        if !seen[to.0 as usize] {
            return vec![from, to];
        }
        let mut path = vec![to];
        let mut cursor = to;
        while let Some(prev) = parent[cursor.0 as usize] {
            path.push(prev);
            cursor = prev;
        }
        path.reverse();
        path
    }

    fn sweep(&mut self, round: u32) {
        let outcome = protocols::loyalty_sweep(
            &self.roster,
            &self.registry,
            &self.catalog,
            &self.signer,
            self.scenario.assumed_m,
            round,
        );
        let actual_traitors = self
            .roster
            .iter()
            .filter(|p| p.behavior.is_traitor())
            .count() as u32;
        let loyal = self.roster.iter().filter(|p| p.behavior.is_loyal()).count();
        let check = CheckRecord {
            round,
            disclosures: outcome.disclosures.into_values().collect(),
            verdicts: outcome.ratified,
            all_loyal_agree: outcome.all_loyal_agree,
            loyal_majority: loyal * 2 > self.roster.len(),
            assumed_traitor_bound: self.scenario.assumed_m,
            actual_traitors,
            ba_messages: outcome.ba_messages,
            holdings: self.snapshot_holdings(),
        };
        self.records.push(ReportRecord::Check(check.clone()));
        self.checks.push(check);
    }

    fn snapshot_holdings(&self) -> Vec<PlayerHoldings> {
        self.roster
            .iter()
            .map(|player| PlayerHoldings {
                player: player.id,
                behavior: player.behavior.tag(),
                created: player.info.created.keys().copied().collect(),
                transferred: player
                    .info
                    .transferred
                    .values()
                    .map(|item| HoldingRecord {
                        sig: item.sig,
                        doc: item.sig.doc_id,
                        sender: item.sender,
                        via: item.via,
                        acquired_round: item.acquired_round,
                        out_of_need_to_know: !self
                            .catalog
                            .in_need_to_know(item.sig.doc_id, player.id),
                    })
                    .collect(),
            })
            .collect()
    }

    fn into_report(mut self) -> Report {
        let ground_truth = GroundTruthSummary {
            behaviors: self
                .roster
                .iter()
                .map(|p| (p.id, p.behavior.tag()))
                .collect(),
            first_out_of_need_to_know: self.first_out_of_ntk.clone(),
        };
        let metrics = metrics_from(&self.checks, &ground_truth, self.transfers);
        self.records.push(ReportRecord::Unmatched {
            entries: self.registry.unmatched_entries(self.scenario.rounds),
        });
        self.records.push(ReportRecord::GroundTruth(ground_truth));
        self.records.push(ReportRecord::Metrics(metrics));
        Report {
            records: self.records,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::BehaviorKind;
    use crate::protocols::Outcome;
    use crate::scenario::{PlayerSpec, ScheduledAuthoring};

    fn spec(clearance: ClearanceLevel, behavior: BehaviorKind) -> PlayerSpec {
        PlayerSpec {
            clearance,
            behavior,
            trust: TrustPolicy {
                grant_probability: 1.0,
                verify_need_to_know: false,
            },
        }
    }

    fn schedule(round: u32, player: u32, level: ClearanceLevel, ntk: &[u32]) -> ScheduledAuthoring {
        ScheduledAuthoring {
            round,
            player: PlayerId(player),
            level,
            need_to_know: ntk.iter().map(|&p| PlayerId(p)).collect(),
        }
    }

    fn all_loyal_scenario() -> Scenario {
        use ClearanceLevel::*;
        Scenario {
            players: vec![
                spec(Confidential, BehaviorKind::Loyal),
                spec(Confidential, BehaviorKind::Loyal),
                spec(Secret, BehaviorKind::Loyal),
                spec(Secret, BehaviorKind::Loyal),
                spec(TopSecret, BehaviorKind::Loyal),
            ],
            topology: None,
            rounds: 10,
            check_every: 5,
            seed: 11,
            assumed_m: 1,
            authoring_schedule: vec![
                schedule(0, 0, Confidential, &[0, 1, 2]),
                schedule(0, 2, Secret, &[2, 3, 4]),
                schedule(1, 1, Confidential, &[1, 4]),
            ],
        }
    }

    fn curious_scenario() -> Scenario {
        use ClearanceLevel::*;
        let mut scenario = all_loyal_scenario();
        scenario.players.push(spec(
            Secret,
            BehaviorKind::CuriousConcealing {
                requests_per_round: 1,
            },
        ));
        // A target the curious player is cleared for but has no need to know.
        scenario
            .authoring_schedule
            .push(schedule(0, 0, Confidential, &[0, 1]));
        scenario
    }

    #[test]
    fn all_loyal_run_has_no_flags_and_no_false_positives() {
        let report = run(&all_loyal_scenario()).unwrap();
        let checks: Vec<_> = report.checks().collect();
        assert_eq!(checks.len(), 2);
        for check in &checks {
            assert!(check.verdicts.iter().all(|v| v.outcome == Outcome::Loyal));
            assert!(check.all_loyal_agree);
        }
        let metrics = report.metrics().unwrap();
        assert_eq!(metrics.false_positives, 0);
        assert_eq!(metrics.false_negatives, 0);
        assert!(metrics.transfers > 0, "dissemination should move documents");
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let scenario = curious_scenario();
        let a = run(&scenario).unwrap().to_jsonl();
        let b = run(&scenario).unwrap().to_jsonl();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let mut scenario = all_loyal_scenario();
        let a = run(&scenario).unwrap().to_jsonl();
        scenario.seed = 12;
        let b = run(&scenario).unwrap().to_jsonl();
        assert_ne!(a, b);
    }

    #[test]
    fn concealing_player_is_detected_at_the_first_check_after_acquisition() {
        let scenario = curious_scenario();
        let report = run(&scenario).unwrap();
        let ground_truth = report.ground_truth().unwrap();
        let curious = PlayerId(5);
        let acquired = ground_truth.first_out_of_need_to_know[&curious];

        let first_check_after = report
            .checks()
            .find(|check| check.round >= acquired)
            .expect("a check happens after the acquisition");
        let verdict = first_check_after
            .verdicts
            .iter()
            .find(|v| v.player == curious)
            .unwrap();
        assert_eq!(verdict.outcome, Outcome::Curious);

        let metrics = report.metrics().unwrap();
        assert_eq!(metrics.true_positives, 1);
        assert_eq!(metrics.false_positives, 0);
        assert_eq!(metrics.false_negatives, 0);
        assert_eq!(
            metrics.rounds_to_detection[&curious],
            first_check_after.round as i64 - acquired as i64
        );
    }

    // Oracle: rebuild holdings from the report's document and event records
    // alone and compare against the final check's ground-truth holdings.
    #[test]
    fn event_log_replay_conserves_holdings() {
        let scenario = curious_scenario();
        let report = run(&scenario).unwrap();

        let mut holdings: BTreeMap<PlayerId, BTreeSet<DocumentId>> = BTreeMap::new();
        for meta in report.documents() {
            holdings.entry(meta.origin).or_default().insert(meta.id);
        }
        for event in report.events() {
            holdings.entry(event.to).or_default().insert(event.doc);
        }

        let last_check = report.checks().last().unwrap();
        for truth in &last_check.holdings {
            let mut expected: BTreeSet<DocumentId> = truth.created.iter().copied().collect();
            expected.extend(truth.transferred.iter().map(|h| h.doc));
            let replayed = holdings.remove(&truth.player).unwrap_or_default();
            assert_eq!(
                replayed, expected,
                "event replay disagrees for {}",
                truth.player
            );
        }
    }

    #[test]
    fn colluding_pair_with_unwitnessed_channel_evades_detection() {
        use ClearanceLevel::*;
        let scenario = Scenario {
            players: vec![
                spec(Confidential, BehaviorKind::Loyal),
                spec(Confidential, BehaviorKind::Loyal),
                spec(Confidential, BehaviorKind::Loyal),
                spec(Secret, BehaviorKind::Loyal),
                spec(Secret, BehaviorKind::Loyal),
                spec(
                    Secret,
                    BehaviorKind::TraitorColluding {
                        partners: vec![PlayerId(6)],
                        requests_per_round: 0,
                    },
                ),
                spec(
                    Secret,
                    BehaviorKind::TraitorColluding {
                        partners: vec![PlayerId(5)],
                        requests_per_round: 0,
                    },
                ),
            ],
            topology: None,
            rounds: 10,
            check_every: 5,
            seed: 3,
            assumed_m: 2,
            authoring_schedule: vec![
                schedule(0, 0, Confidential, &[0, 1]),
                // Each traitor authors something the other has no need to know.
                schedule(0, 5, Secret, &[5]),
                schedule(0, 6, Secret, &[6]),
            ],
        };
        let report = run(&scenario).unwrap();

        // The exchange happened: both traitors hold out-of-need-to-know items.
        let ground_truth = report.ground_truth().unwrap();
        assert!(ground_truth
            .first_out_of_need_to_know
            .contains_key(&PlayerId(5)));
        assert!(ground_truth
            .first_out_of_need_to_know
            .contains_key(&PlayerId(6)));

        // And nobody was flagged: the registry never saw the channel.
        for check in report.checks() {
            assert!(check.verdicts.iter().all(|v| v.outcome == Outcome::Loyal));
        }
        let metrics = report.metrics().unwrap();
        assert_eq!(metrics.false_negatives, 2);
        assert_eq!(metrics.true_positives, 0);
        assert_eq!(metrics.false_positives, 0);
    }

    #[test]
    fn registered_grant_to_a_traitor_is_witnessed_and_flagged() {
        use ClearanceLevel::*;
        // Traitor 5 acquires through a registered grant from loyal player 3;
        // the loyal sender's registration witnesses the holding, the traitor
        // conceals it, and rule (a) fires. Partner 6 receives the same item
        // over the collusion channel and is missed.
        let scenario = Scenario {
            players: vec![
                spec(Confidential, BehaviorKind::Loyal),
                spec(Confidential, BehaviorKind::Loyal),
                spec(Confidential, BehaviorKind::Loyal),
                spec(Secret, BehaviorKind::Loyal),
                spec(Secret, BehaviorKind::Loyal),
                spec(
                    Secret,
                    BehaviorKind::TraitorColluding {
                        partners: vec![PlayerId(6)],
                        requests_per_round: 1,
                    },
                ),
                spec(
                    TopSecret,
                    BehaviorKind::TraitorColluding {
                        partners: vec![PlayerId(5)],
                        requests_per_round: 0,
                    },
                ),
            ],
            topology: None,
            rounds: 10,
            check_every: 5,
            seed: 5,
            assumed_m: 2,
            authoring_schedule: vec![schedule(0, 3, Secret, &[3, 4])],
        };
        let report = run(&scenario).unwrap();

        let flagged: BTreeSet<PlayerId> = report
            .checks()
            .flat_map(|check| check.verdicts.iter())
            .filter(|v| v.is_curious())
            .map(|v| v.player)
            .collect();
        assert!(flagged.contains(&PlayerId(5)), "witnessed traitor escapes");
        assert!(
            !flagged.contains(&PlayerId(6)),
            "unwitnessed partner flagged"
        );
        assert!(
            !report.unmatched().is_empty(),
            "the traitor's silent receipt should orphan the loyal send"
        );
    }

    #[test]
    fn curious_players_hoard_observed_envelopes() {
        let scenario = curious_scenario();
        // Not directly observable through the report; re-run the world here.
        let options = RunOptions::default();
        let mut world = World::new(&scenario, &options).unwrap();
        for round in 0..scenario.rounds {
            world.play_round(round);
        }
        let curious = world.roster.get(PlayerId(5)).unwrap();
        assert!(
            !curious.message_store.is_empty(),
            "a curious player on delivery paths should have stored envelopes"
        );
        let loyal = world.roster.get(PlayerId(0)).unwrap();
        assert!(loyal.message_store.is_empty());
    }

    #[test]
    fn check_cadence_follows_check_every() {
        let mut scenario = all_loyal_scenario();
        scenario.rounds = 9;
        scenario.check_every = 3;
        let report = run(&scenario).unwrap();
        let rounds: Vec<u32> = report.checks().map(|c| c.round).collect();
        assert_eq!(rounds, vec![2, 5, 8]);
    }

    #[test]
    fn round_causality_holds_everywhere() {
        let scenario = curious_scenario();
        let report = run(&scenario).unwrap();
        for entry in report.registry_entries() {
            assert!(entry.round < scenario.rounds);
        }
        for check in report.checks() {
            for disclosure in &check.disclosures {
                assert_eq!(disclosure.round, check.round);
            }
            for verdict in &check.verdicts {
                assert_eq!(verdict.round, check.round);
            }
            for holding in check.holdings.iter().flat_map(|h| h.transferred.iter()) {
                assert!(holding.acquired_round <= check.round);
            }
        }
    }
}
