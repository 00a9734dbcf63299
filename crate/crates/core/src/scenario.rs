//! Scenario files: the full description of one simulated network.
//!
//! UTF-8 JSON, snake_case fields, unknown fields rejected. The topology is
//! optional; when absent, players at the same clearance form a complete
//! graph and the lowest-id player of each level pair is joined as a liaison,
//! keeping the graph connected and information able to flow upward.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{BehaviorKind, TrustPolicy};
use crate::model::{dominates, ClearanceLevel, PlayerId};

/// One player position: clearance, strategy, and how it answers requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerSpec {
    pub clearance: ClearanceLevel,
    pub behavior: BehaviorKind,
    #[serde(default)]
    pub trust: TrustPolicy,
}

/// A scheduled document authoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledAuthoring {
    pub round: u32,
    pub player: PlayerId,
    pub level: ClearanceLevel,
    pub need_to_know: Vec<PlayerId>,
}

/// Scheduled authorings grouped by (round, player), in file order.
pub type AuthoringsByRound = BTreeMap<(u32, PlayerId), Vec<(ClearanceLevel, BTreeSet<PlayerId>)>>;

/// A complete simulation input. `run` is a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub players: Vec<PlayerSpec>,
    /// Adjacency list; `null` or absent selects the default topology.
    #[serde(default)]
    pub topology: Option<Vec<Vec<PlayerId>>>,
    pub rounds: u32,
    pub check_every: u32,
    pub seed: u64,
    pub assumed_m: u32,
    #[serde(default)]
    pub authoring_schedule: Vec<ScheduledAuthoring>,
}

impl Scenario {
    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    /// Validate every invariant, returning the first field-level problem.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.players.len();
        if n < 2 {
            return Err(ScenarioError::invalid(
                "players",
                format!("need at least 2 players, got {n}"),
            ));
        }
        if self.check_every == 0 {
            return Err(ScenarioError::invalid("check_every", "must be at least 1"));
        }

        for (index, spec) in self.players.iter().enumerate() {
            if !(0.0..=1.0).contains(&spec.trust.grant_probability) {
                return Err(ScenarioError::invalid(
                    "players.trust.grant_probability",
                    format!(
                        "player {index}: {} is outside [0, 1]",
                        spec.trust.grant_probability
                    ),
                ));
            }
            if let BehaviorKind::TraitorColluding { partners, .. } = &spec.behavior {
                if partners.is_empty() {
                    return Err(ScenarioError::invalid(
                        "players.behavior.partners",
                        format!("player {index}: colluding behavior needs at least one partner"),
                    ));
                }
                for partner in partners {
                    if partner.0 as usize >= n {
                        return Err(ScenarioError::invalid(
                            "players.behavior.partners",
                            format!("player {index}: partner {partner} does not exist"),
                        ));
                    }
                    if partner.0 as usize == index {
                        return Err(ScenarioError::invalid(
                            "players.behavior.partners",
                            format!("player {index}: cannot collude with itself"),
                        ));
                    }
                    // Collusion is mutual: a non-traitor "partner" would be
                    // framed by pushes it never asked for.
                    if !matches!(
                        self.players[partner.0 as usize].behavior,
                        BehaviorKind::TraitorColluding { .. }
                    ) {
                        return Err(ScenarioError::invalid(
                            "players.behavior.partners",
                            format!("player {index}: partner {partner} is not colluding"),
                        ));
                    }
                }
            }
        }

        for (index, entry) in self.authoring_schedule.iter().enumerate() {
            let author = entry.player.0 as usize;
            if author >= n {
                return Err(ScenarioError::invalid(
                    "authoring_schedule.player",
                    format!("entry {index}: player {} does not exist", entry.player),
                ));
            }
            if !dominates(self.players[author].clearance, entry.level) {
                return Err(ScenarioError::invalid(
                    "authoring_schedule.level",
                    format!(
                        "entry {index}: {} (clearance {}) cannot author at {}",
                        entry.player, self.players[author].clearance, entry.level
                    ),
                ));
            }
            for member in &entry.need_to_know {
                if member.0 as usize >= n {
                    return Err(ScenarioError::invalid(
                        "authoring_schedule.need_to_know",
                        format!("entry {index}: member {member} does not exist"),
                    ));
                }
            }
        }

        self.effective_topology()?;
        Ok(())
    }

    /// The adjacency sets actually used: the explicit topology when present
    /// (validated), the default construction otherwise.
    pub fn effective_topology(&self) -> Result<Vec<BTreeSet<PlayerId>>, ScenarioError> {
        let n = self.players.len();
        let adjacency = match &self.topology {
            Some(lists) => {
                if lists.len() != n {
                    return Err(ScenarioError::invalid(
                        "topology",
                        format!("{} adjacency lists for {n} players", lists.len()),
                    ));
                }
                let mut sets: Vec<BTreeSet<PlayerId>> = vec![BTreeSet::new(); n];
                for (index, neighbors) in lists.iter().enumerate() {
                    for &neighbor in neighbors {
                        if neighbor.0 as usize >= n {
                            return Err(ScenarioError::invalid(
                                "topology",
                                format!("player {index} lists unknown neighbor {neighbor}"),
                            ));
                        }
                        if neighbor.0 as usize == index {
                            return Err(ScenarioError::invalid(
                                "topology",
                                format!("player {index} lists itself as a neighbor"),
                            ));
                        }
                        sets[index].insert(neighbor);
                        sets[neighbor.0 as usize].insert(PlayerId(index as u32));
                    }
                }
                sets
            }
            None => default_topology(&self.players.iter().map(|p| p.clearance).collect::<Vec<_>>()),
        };

        // Connectivity by breadth-first search from player 0.
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(current) = queue.pop_front() {
            for neighbor in &adjacency[current] {
                let idx = neighbor.0 as usize;
                if !seen[idx] {
                    seen[idx] = true;
                    queue.push_back(idx);
                }
            }
        }
        if let Some(unreached) = seen.iter().position(|&s| !s) {
            return Err(ScenarioError::invalid(
                "topology",
                format!("not connected: player {unreached} is unreachable from player 0"),
            ));
        }
        Ok(adjacency)
    }

    /// Scheduled authorings grouped by (round, player), preserving file order.
    pub fn schedule_by_round(&self) -> AuthoringsByRound {
        let mut grouped: AuthoringsByRound = BTreeMap::new();
        for entry in &self.authoring_schedule {
            grouped
                .entry((entry.round, entry.player))
                .or_default()
                .push((entry.level, entry.need_to_know.iter().copied().collect()));
        }
        grouped
    }
}

/// Complete graph within each clearance level, plus one liaison edge between
/// the lowest-id players of each pair of populated levels.
pub fn default_topology(clearances: &[ClearanceLevel]) -> Vec<BTreeSet<PlayerId>> {
    let n = clearances.len();
    let mut adjacency: Vec<BTreeSet<PlayerId>> = vec![BTreeSet::new(); n];
    for a in 0..n {
        for b in (a + 1)..n {
            if clearances[a] == clearances[b] {
                adjacency[a].insert(PlayerId(b as u32));
                adjacency[b].insert(PlayerId(a as u32));
            }
        }
    }
    let mut liaisons: BTreeMap<ClearanceLevel, usize> = BTreeMap::new();
    for (index, &clearance) in clearances.iter().enumerate() {
        liaisons.entry(clearance).or_insert(index);
    }
    let liaisons: Vec<usize> = liaisons.into_values().collect();
    for pair in liaisons.windows(2) {
        adjacency[pair[0]].insert(PlayerId(pair[1] as u32));
        adjacency[pair[1]].insert(PlayerId(pair[0] as u32));
    }
    adjacency
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("invalid scenario field `{field}`: {message}")]
    InvalidScenario { field: String, message: String },
}

impl ScenarioError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::InvalidScenario {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn field(&self) -> &str {
        match self {
            Self::InvalidScenario { field, .. } => field,
        }
    }
}
