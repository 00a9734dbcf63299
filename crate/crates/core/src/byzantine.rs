//! Recursive oral-messages agreement.
//!
//! `om_broadcast` runs the classic OM(m) schedule: the commander sends its
//! value to every lieutenant, each lieutenant relays what it received as the
//! commander of a smaller round, and everyone resolves with a strict-majority
//! vote that falls back to a fixed default on ties. With `n >= 3m + 1`
//! participants and at most `m` actual traitors, all loyal participants
//! decide the same value, and that value is the commander's when the
//! commander is loyal. Smaller networks get decisions too — the guarantees
//! simply may not hold, which the tests exhibit.
//!
//! The verdict vector of a loyalty sweep is ratified by broadcasting its
//! serialized bytes with the registry owner as commander.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::PlayerId;
use crate::protocols::Verdict;

/// Agreement round configuration.
#[derive(Debug, Clone)]
pub struct BaConfig {
    pub participants: Vec<PlayerId>,
    pub commander: PlayerId,
    /// Recursion depth: the number of traitors the round is sized to survive.
    pub max_traitors: usize,
}

impl BaConfig {
    pub fn player_count(&self) -> usize {
        self.participants.len()
    }
}

/// A message in flight: the relay chain so far and the carried value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaMessage<V> {
    pub path: Vec<PlayerId>,
    pub value: V,
}

/// What a traitor sends instead of the honest value. Called once per message
/// a traitor emits, in schedule order, so exhaustive enumeration can index
/// substitution choices deterministically.
pub trait TraitorStrategy<V> {
    fn substitute(&mut self, sender: PlayerId, path: &[PlayerId], dest: PlayerId, honest: &V) -> V;
}

/// Traitors that relay faithfully (useful as a baseline).
pub struct HonestRelay;

impl<V: Clone> TraitorStrategy<V> for HonestRelay {
    fn substitute(&mut self, _: PlayerId, _: &[PlayerId], _: PlayerId, honest: &V) -> V {
        honest.clone()
    }
}

/// Traitors that always send one fixed value.
pub struct SubstituteConstant<V>(pub V);

impl<V: Clone> TraitorStrategy<V> for SubstituteConstant<V> {
    fn substitute(&mut self, _: PlayerId, _: &[PlayerId], _: PlayerId, _: &V) -> V {
        self.0.clone()
    }
}

/// Result of one broadcast: every participant's decided value (the commander
/// stands by its own input) and the number of messages sent.
#[derive(Debug, Clone)]
pub struct BaOutcome<V> {
    pub decisions: BTreeMap<PlayerId, V>,
    pub messages: u64,
}

/// Strict majority of `values`, or `default` when no value clears half.
pub fn majority<V: Clone + Ord>(values: &[V], default: &V) -> Result<V, BaError> {
    if values.is_empty() {
        return Err(BaError::EmptyInput);
    }
    let mut counts: BTreeMap<&V, usize> = BTreeMap::new();
    for value in values {
        *counts.entry(value).or_default() += 1;
    }
    for (value, count) in counts {
        if count * 2 > values.len() {
            return Ok(value.clone());
        }
    }
    Ok(default.clone())
}

/// Run OM(`cfg.max_traitors`) from the commander over all participants.
pub fn om_broadcast<V: Clone + Ord>(
    cfg: &BaConfig,
    value: &V,
    default: &V,
    traitors: &BTreeSet<PlayerId>,
    strategy: &mut dyn TraitorStrategy<V>,
) -> BaOutcome<V> {
    let lieutenants: Vec<PlayerId> = cfg
        .participants
        .iter()
        .copied()
        .filter(|&p| p != cfg.commander)
        .collect();
    let mut messages = 0u64;
    let mut path = vec![cfg.commander];
    let mut decisions = om_round(
        cfg.max_traitors,
        cfg.commander,
        &lieutenants,
        value,
        default,
        traitors,
        strategy,
        &mut path,
        &mut messages,
    );
    decisions.insert(cfg.commander, value.clone());
    BaOutcome {
        decisions,
        messages,
    }
}

#[allow(clippy::too_many_arguments)]
fn om_round<V: Clone + Ord>(
    depth: usize,
    commander: PlayerId,
    lieutenants: &[PlayerId],
    value: &V,
    default: &V,
    traitors: &BTreeSet<PlayerId>,
    strategy: &mut dyn TraitorStrategy<V>,
    path: &mut Vec<PlayerId>,
    messages: &mut u64,
) -> BTreeMap<PlayerId, V> {
    // The commander sends its value to every lieutenant; a traitorous
    // commander may substitute per destination.
    let mut direct: BTreeMap<PlayerId, V> = BTreeMap::new();
    for &lt in lieutenants {
        let sent = if traitors.contains(&commander) {
            strategy.substitute(commander, path, lt, value)
        } else {
            value.clone()
        };
        *messages += 1;
        direct.insert(lt, sent);
    }
    if depth == 0 {
        return direct;
    }

    // Each lieutenant relays what it received as the commander of a smaller
    // round with the remaining lieutenants.
    let mut collected: BTreeMap<PlayerId, Vec<V>> = lieutenants
        .iter()
        .map(|&lt| (lt, vec![direct[&lt].clone()]))
        .collect();
    for &relay in lieutenants {
        let sub_lieutenants: Vec<PlayerId> = lieutenants
            .iter()
            .copied()
            .filter(|&p| p != relay)
            .collect();
        let relay_value = direct[&relay].clone();
        path.push(relay);
        let sub = om_round(
            depth - 1,
            relay,
            &sub_lieutenants,
            &relay_value,
            default,
            traitors,
            strategy,
            path,
            messages,
        );
        path.pop();
        for (lt, v) in sub {
            collected
                .get_mut(&lt)
                .expect("lieutenant collected")
                .push(v);
        }
    }

    lieutenants
        .iter()
        .map(|&lt| {
            let votes = &collected[&lt];
            let decided = majority(votes, default).expect("votes are nonempty");
            (lt, decided)
        })
        .collect()
}

/// Outcome of ratifying a verdict vector.
#[derive(Debug, Clone)]
pub struct RatifyOutcome {
    pub verdicts: Vec<Verdict>,
    pub messages: u64,
    pub all_loyal_agree: bool,
}

/// Broadcast the verdict vector with the registry owner as commander so every
/// loyal player decides the same vector. Traitorous relays push the all-loyal
/// vector, trying to exonerate themselves; ties also resolve to the all-loyal
/// vector, the conservative default.
pub fn ratify_verdicts(
    verdicts: &[Verdict],
    players: &[PlayerId],
    traitors: &BTreeSet<PlayerId>,
    assumed_traitor_bound: u32,
) -> RatifyOutcome {
    let round = verdicts.first().map(|v| v.round).unwrap_or(0);
    let value = serde_json::to_vec(verdicts).expect("verdicts serialize");
    let all_loyal: Vec<Verdict> = players.iter().map(|&p| Verdict::loyal(p, round)).collect();
    let default = serde_json::to_vec(&all_loyal).expect("verdicts serialize");

    let owner = PlayerId(players.iter().map(|p| p.0).max().map_or(0, |m| m + 1));
    let mut participants = players.to_vec();
    participants.push(owner);
    let cfg = BaConfig {
        participants,
        commander: owner,
        max_traitors: assumed_traitor_bound as usize,
    };

    let mut strategy = SubstituteConstant(default.clone());
    let outcome = om_broadcast(&cfg, &value, &default, traitors, &mut strategy);

    let loyal: Vec<PlayerId> = players
        .iter()
        .copied()
        .filter(|p| !traitors.contains(p))
        .collect();
    let Some(first) = loyal.first() else {
        return RatifyOutcome {
            verdicts: verdicts.to_vec(),
            messages: outcome.messages,
            all_loyal_agree: false,
        };
    };
    let reference = &outcome.decisions[first];
    let all_loyal_agree = loyal.iter().all(|p| &outcome.decisions[p] == reference);
    let decided: Vec<Verdict> =
        serde_json::from_slice(reference).unwrap_or_else(|_| verdicts.to_vec());

    RatifyOutcome {
        verdicts: decided,
        messages: outcome.messages,
        all_loyal_agree,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BaError {
    #[error("majority of an empty multiset")]
    EmptyInput,
}
