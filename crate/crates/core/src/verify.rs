//! Exhaustive property verification at desk scale.
//!
//! Given a template scenario, enumerate every assignment of up to
//! `max_curious` curious roles (overt or concealing) over the player
//! positions, run each assignment, and check two properties:
//!
//! * completeness — a curious player with an out-of-need-to-know acquisition
//!   is flagged at the first check at or after the acquisition round;
//! * soundness — no loyal player is ever flagged.
//!
//! The template's behaviors are ignored: positions start loyal and only the
//! enumerated positions change. Optionally, colluding traitor pairs with an
//! unregistered exchange channel are enumerated too; those runs document the
//! detection boundary, and their completeness violations are expected.

use serde::{Deserialize, Serialize};

use crate::adversary::{BehaviorKind, BehaviorTag};
use crate::engine::run;
use crate::model::PlayerId;
use crate::report::Report;
use crate::scenario::{Scenario, ScenarioError};

/// Verification bounds. Exhaustive enumeration is capped at 10 players.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub max_players: usize,
    pub max_curious: usize,
    pub include_traitor_pairs: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            max_players: 10,
            max_curious: 2,
            include_traitor_pairs: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// A guilty player with an acquisition was not flagged in time.
    Completeness,
    /// A loyal player was flagged.
    Soundness,
}

/// One property violation, with the assignment that produced it, verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub assignment: Vec<BehaviorTag>,
    pub player: PlayerId,
    pub kind: ViolationKind,
    pub detail: String,
}

/// Outcome of one verification sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub player_count: usize,
    pub runs: u32,
    pub curious_runs: u32,
    pub traitor_runs: u32,
    /// (run, player) pairs where completeness was actually exercised: the
    /// player acquired out-of-need-to-know material and a check followed.
    pub detections_evaluated: u32,
    pub violations: Vec<Violation>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Enumerate role assignments over the template and verify both properties
/// on every run.
pub fn exhaustive_verify(
    template: &Scenario,
    options: &VerifyOptions,
) -> Result<PropertyReport, ScenarioError> {
    if options.max_players > 10 {
        return Err(ScenarioError::invalid(
            "max_players",
            "exhaustive verification is desk-scale: at most 10 players",
        ));
    }
    let positions = template.player_count();
    if positions > options.max_players {
        return Err(ScenarioError::invalid(
            "players",
            format!(
                "template has {positions} players, above the max_players bound {}",
                options.max_players
            ),
        ));
    }
    let base = loyal_base(template);
    base.validate()?;

    let mut report = PropertyReport {
        player_count: positions,
        runs: 0,
        curious_runs: 0,
        traitor_runs: 0,
        detections_evaluated: 0,
        violations: Vec::new(),
    };

    let curious_kinds = [BehaviorTag::CuriousOvert, BehaviorTag::CuriousConcealing];
    for subset in subsets_up_to(positions, options.max_curious) {
        for kinds in tag_products(&curious_kinds, subset.len()) {
            let assignment: Vec<(usize, BehaviorTag)> =
                subset.iter().copied().zip(kinds.iter().copied()).collect();
            // The verified regime keeps the loyal players in strict majority.
            if (positions - subset.len()) * 2 <= positions {
                continue;
            }
            let scenario = apply_assignment(&base, &assignment);
            let run_report = run(&scenario).expect("template validated");
            report.runs += 1;
            report.curious_runs += 1;
            report.detections_evaluated +=
                evaluate(&run_report, &tags_of(&scenario), &mut report.violations);
        }
    }

    if options.include_traitor_pairs {
        for first in 0..positions {
            for second in (first + 1)..positions {
                if (positions - 2) * 2 <= positions {
                    continue;
                }
                let mut scenario = base.clone();
                scenario.players[first].behavior = BehaviorKind::TraitorColluding {
                    partners: vec![PlayerId(second as u32)],
                    requests_per_round: 0,
                };
                scenario.players[second].behavior = BehaviorKind::TraitorColluding {
                    partners: vec![PlayerId(first as u32)],
                    requests_per_round: 0,
                };
                let run_report = run(&scenario).expect("template validated");
                report.runs += 1;
                report.traitor_runs += 1;
                report.detections_evaluated +=
                    evaluate(&run_report, &tags_of(&scenario), &mut report.violations);
            }
        }
    }

    Ok(report)
}

fn loyal_base(template: &Scenario) -> Scenario {
    let mut base = template.clone();
    for player in &mut base.players {
        player.behavior = BehaviorKind::Loyal;
    }
    base
}

fn tags_of(scenario: &Scenario) -> Vec<BehaviorTag> {
    scenario.players.iter().map(|p| p.behavior.tag()).collect()
}

fn apply_assignment(base: &Scenario, assignment: &[(usize, BehaviorTag)]) -> Scenario {
    let mut scenario = base.clone();
    for &(position, tag) in assignment {
        scenario.players[position].behavior = match tag {
            BehaviorTag::CuriousOvert => BehaviorKind::CuriousOvert {
                requests_per_round: 1,
            },
            BehaviorTag::CuriousConcealing => BehaviorKind::CuriousConcealing {
                requests_per_round: 1,
            },
            BehaviorTag::Loyal => BehaviorKind::Loyal,
            BehaviorTag::TraitorColluding => unreachable!("traitors are assigned pairwise"),
        };
    }
    scenario
}

/// All subsets of `0..positions` with size up to `max_size`, smallest first.
fn subsets_up_to(positions: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut subsets = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_size {
        let mut next = Vec::new();
        for subset in &frontier {
            let start = subset.last().map_or(0, |&last| last + 1);
            for position in start..positions {
                let mut grown = subset.clone();
                grown.push(position);
                next.push(grown);
            }
        }
        subsets.extend(next.iter().cloned());
        frontier = next;
    }
    subsets
}

/// Cartesian product of `kinds` over `len` slots.
fn tag_products(kinds: &[BehaviorTag], len: usize) -> Vec<Vec<BehaviorTag>> {
    let mut products = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for prefix in &products {
            for &kind in kinds {
                let mut grown = prefix.clone();
                grown.push(kind);
                next.push(grown);
            }
        }
        products = next;
    }
    products
}

fn evaluate(report: &Report, tags: &[BehaviorTag], violations: &mut Vec<Violation>) -> u32 {
    let checks: Vec<_> = report.checks().collect();
    let ground_truth = report
        .ground_truth()
        .expect("run reports carry ground truth");
    let mut evaluated = 0;

    for (index, &tag) in tags.iter().enumerate() {
        let player = PlayerId(index as u32);
        let flagged_at = checks.iter().find_map(|check| {
            check
                .verdicts
                .iter()
                .find(|v| v.player == player && v.is_curious())
                .map(|_| check.round)
        });

        if tag.is_loyal() {
            if let Some(round) = flagged_at {
                violations.push(Violation {
                    assignment: tags.to_vec(),
                    player,
                    kind: ViolationKind::Soundness,
                    detail: format!("loyal player flagged at check round {round}"),
                });
            }
            continue;
        }

        let Some(&acquired) = ground_truth.first_out_of_need_to_know.get(&player) else {
            continue; // nothing was over-collected, nothing to detect
        };
        let Some(due_check) = checks.iter().find(|check| check.round >= acquired) else {
            continue; // no check happened after the acquisition
        };
        evaluated += 1;
        let verdict = due_check
            .verdicts
            .iter()
            .find(|v| v.player == player)
            .expect("verdict vector covers all players");
        if !verdict.is_curious() {
            violations.push(Violation {
                assignment: tags.to_vec(),
                player,
                kind: ViolationKind::Completeness,
                detail: format!(
                    "acquired out-of-need-to-know in round {acquired} but passed the check at round {}",
                    due_check.round
                ),
            });
        }
    }
    evaluated
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::TrustPolicy;
    use crate::model::ClearanceLevel;
    use crate::scenario::{PlayerSpec, ScheduledAuthoring};

    /// Six players over three levels, always-granting trust, and one
    /// narrowly scoped document per player so every position has an
    /// out-of-need-to-know target.
    pub(crate) fn template_six() -> Scenario {
        use ClearanceLevel::*;
        let levels = [
            Confidential,
            Confidential,
            Secret,
            Secret,
            TopSecret,
            TopSecret,
        ];
        Scenario {
            players: levels
                .iter()
                .map(|&clearance| PlayerSpec {
                    clearance,
                    behavior: BehaviorKind::Loyal,
                    trust: TrustPolicy {
                        grant_probability: 1.0,
                        verify_need_to_know: false,
                    },
                })
                .collect(),
            topology: None,
            rounds: 10,
            check_every: 5,
            seed: 20,
            assumed_m: 1,
            authoring_schedule: (0..6u32)
                .map(|player| ScheduledAuthoring {
                    round: 0,
                    player: PlayerId(player),
                    level: Confidential,
                    need_to_know: vec![PlayerId(player)],
                })
                .collect(),
        }
    }

    #[test]
    fn subset_enumeration_counts_match() {
        // C(4,0) + C(4,1) + C(4,2) = 1 + 4 + 6
        assert_eq!(subsets_up_to(4, 2).len(), 11);
        assert_eq!(subsets_up_to(6, 1).len(), 7);
    }

    #[test]
    fn closed_protocol_template_verifies_clean() {
        let report = exhaustive_verify(&template_six(), &VerifyOptions::default()).unwrap();
        // 1 empty + 6*2 singles + 15*4 pairs = 73 assignments.
        assert_eq!(report.runs, 73);
        assert!(report.passed(), "violations: {:?}", report.violations);
        // Every curious position acquired something and faced a check:
        // 12 single-curious runs + 60 pair runs x 2 players.
        assert_eq!(report.detections_evaluated, 132);
    }

    #[test]
    fn zero_curious_assignments_flag_nobody() {
        let options = VerifyOptions {
            max_curious: 0,
            ..VerifyOptions::default()
        };
        let report = exhaustive_verify(&template_six(), &options).unwrap();
        assert_eq!(report.runs, 1);
        assert!(report.passed());
    }

    #[test]
    fn traitor_pairs_document_the_boundary() {
        let options = VerifyOptions {
            max_curious: 0,
            include_traitor_pairs: true,
            ..VerifyOptions::default()
        };
        let report = exhaustive_verify(&template_six(), &options).unwrap();
        assert_eq!(report.traitor_runs, 15);
        assert!(
            !report.passed(),
            "unregistered exchange must evade detection somewhere"
        );
        assert!(report
            .violations
            .iter()
            .all(|v| v.kind == ViolationKind::Completeness));
    }

    #[test]
    fn oversized_templates_are_rejected() {
        let template = template_six();
        let options = VerifyOptions {
            max_players: 4,
            ..VerifyOptions::default()
        };
        let err = exhaustive_verify(&template, &options).unwrap_err();
        assert_eq!(err.field(), "players");

        let options = VerifyOptions {
            max_players: 11,
            ..VerifyOptions::default()
        };
        let err = exhaustive_verify(&template, &options).unwrap_err();
        assert_eq!(err.field(), "max_players");
    }
}
