//! Detection engines run by a watching source node.
//!
//! The algebraic engine builds the candidate sets
//!
//! ```text
//! X̃_p = { x : h(x) = h(x_p) } ∩ B(x̃_p, r_p)
//! X̃_3 = { x : h(x) = h(x_3) } ∩ B(x̃_3, r_3)
//! ```
//!
//! maps every `x̂ ∈ X̃_p` to `α_w·x_w + α_p·x̂` and flags the relay when none
//! of the images lands in `X̃_3`.
//!
//! The trellis engine scores the same observation by summing path weights
//! through four layers: observed `[x̃_p, h(x_p)]`, candidate peer words,
//! their coded images, and observed `[x̃_3, h(x_3)]`.

use serde::{Deserialize, Serialize};

use crate::channel::{self, BinarySymmetricChannel, Radius};
use crate::gf2n::{FieldElement, FieldSpec};
use crate::hashing::{HashFunction, HashValue};
use crate::Word;

/// Default acceptance threshold for the trellis score.
pub const DEFAULT_THRESHOLD: f64 = f64::EPSILON;

/// Widest field for which a trellis may be materialized.
pub const TRELLIS_MAX_WIDTH: u8 = 12;

/// Everything a watcher knows when judging the relay.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub hash: HashFunction,
    pub own_value: FieldElement,
    pub own_coeff: FieldElement,
    pub peer_coeff: FieldElement,
    pub peer_hash: HashValue,
    pub relay_hash: HashValue,
    pub noisy_peer: Word,
    pub noisy_relay: Word,
    pub peer_channel: BinarySymmetricChannel,
    pub relay_channel: BinarySymmetricChannel,
    pub epsilon: f64,
}

impl Observation {
    pub fn spec(&self) -> FieldSpec {
        self.hash.spec()
    }

    pub fn width(&self) -> u32 {
        u32::from(self.spec().width())
    }

    /// `α_w·x_w`, the watcher's own contribution to the relay output.
    pub fn own_term(&self) -> Word {
        self.spec()
            .mul_words(self.own_coeff.value(), self.own_value.value())
    }

    /// Image of a candidate peer word in the relay's output space.
    #[inline]
    pub fn map_peer(&self, peer: Word) -> Word {
        self.own_term() ^ self.spec().mul_words(self.peer_coeff.value(), peer)
    }

    pub fn radius(&self, which: Which) -> Radius {
        let ch = match which {
            Which::Peer => self.peer_channel,
            Which::Relay => self.relay_channel,
        };
        channel::radius_for_epsilon(self.width(), ch.crossover(), self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Peer,
    Relay,
}

/// Hash-consistent words near an overheard payload.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// Sorted ascending.
    pub members: Vec<Word>,
    pub radius: Radius,
    pub target: HashValue,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, w: Word) -> bool {
        self.members.binary_search(&w).is_ok()
    }
}

pub fn candidate_set(obs: &Observation, which: Which) -> CandidateSet {
    let radius = obs.radius(which);
    candidate_set_with_radius(obs, which, radius)
}

pub fn candidate_set_with_radius(obs: &Observation, which: Which, radius: Radius) -> CandidateSet {
    let (center, target) = match which {
        Which::Peer => (obs.noisy_peer, obs.peer_hash),
        Which::Relay => (obs.noisy_relay, obs.relay_hash),
    };
    let mut members = Vec::new();
    channel::for_each_in_ball(center, obs.width(), radius.r, |x| {
        if obs.hash.evaluate_word(x) == target {
            members.push(x);
        }
    });
    members.sort_unstable();
    CandidateSet {
        members,
        radius,
        target,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Relay is well-behaving.
    H0,
    /// Relay is malicious.
    H1,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub peer_candidates: usize,
    pub relay_candidates: usize,
    pub surviving: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Hypothesis,
    pub consistency_score: f64,
    pub diagnostics: Diagnostics,
}

impl Verdict {
    pub fn flagged(&self) -> bool {
        self.decision == Hypothesis::H1
    }
}

/// Empty-intersection rule with radii chosen from the channel and `ε`.
pub fn algebraic_check(obs: &Observation) -> Verdict {
    algebraic_check_with_radii(obs, obs.radius(Which::Peer), obs.radius(Which::Relay))
}

pub fn algebraic_check_with_radii(obs: &Observation, peer_r: Radius, relay_r: Radius) -> Verdict {
    let peer = candidate_set_with_radius(obs, Which::Peer, peer_r);
    let relay = candidate_set_with_radius(obs, Which::Relay, relay_r);
    let surviving = peer
        .members
        .iter()
        .filter(|&&x| relay.contains(obs.map_peer(x)))
        .count();
    let consistency_score = if relay.is_empty() {
        0.0
    } else {
        surviving as f64 / relay.len() as f64
    };
    Verdict {
        decision: if surviving == 0 {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        },
        consistency_score,
        diagnostics: Diagnostics {
            peer_candidates: peer.len(),
            relay_candidates: relay.len(),
            surviving,
        },
    }
}

/// A layer-2 vertex with the edges on its path to the destination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrellisPath {
    /// Layer-2 vertex: a candidate peer word.
    pub peer: Word,
    /// Weight of the edge from the start vertex.
    pub entry_weight: f64,
    /// Layer-3 vertex `α_w·x_w + α_p·peer`.
    pub image: Word,
    /// Weight of the edge into the destination, `None` when the image's
    /// hash differs from the destination's.
    pub exit_weight: Option<f64>,
}

/// Four-layer graph materialized around one start and one destination.
///
/// Layers 1 and 4 hold only the observed vertices; layer 2 holds the words
/// reachable from the start and layer 3 their images under the coding map.
#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    pub start: (Word, HashValue),
    pub destination: (Word, HashValue),
    pub paths: Vec<TrellisPath>,
}

impl Trellis {
    pub fn layer2(&self) -> impl Iterator<Item = Word> + '_ {
        self.paths.iter().map(|p| p.peer)
    }

    pub fn layer3(&self) -> impl Iterator<Item = Word> + '_ {
        self.paths.iter().map(|p| p.image)
    }
}

/// Builds the trellis for `obs`. Panics for fields wider than
/// [`TRELLIS_MAX_WIDTH`].
pub fn build_trellis(obs: &Observation) -> Trellis {
    assert!(
        obs.spec().width() <= TRELLIS_MAX_WIDTH,
        "trellis limited to n <= {TRELLIS_MAX_WIDTH}"
    );
    let n = obs.width();
    let reachable = obs.hash.preimage_set(obs.peer_hash);
    let raw: Vec<f64> = reachable
        .iter()
        .map(|&w| obs.peer_channel.likelihood(n, w, obs.noisy_peer))
        .collect();
    let total: f64 = raw.iter().sum();
    let paths = reachable
        .iter()
        .zip(&raw)
        .map(|(&peer, &lik)| {
            let image = obs.map_peer(peer);
            // Every [w, h(image)] in layer 4 is a neighbour of `image` and
            // the channel's output distribution already sums to one over w.
            let exit_weight = (obs.hash.evaluate_word(image) == obs.relay_hash)
                .then(|| obs.relay_channel.likelihood(n, image, obs.noisy_relay));
            TrellisPath {
                peer,
                entry_weight: if total > 0.0 { lik / total } else { 0.0 },
                image,
                exit_weight,
            }
        })
        .collect();
    Trellis {
        start: (obs.noisy_peer, obs.peer_hash),
        destination: (obs.noisy_relay, obs.relay_hash),
        paths,
    }
}

/// Sum over start→destination paths of the product of edge weights.
pub fn consistency_probability(tr: &Trellis) -> f64 {
    let s: f64 = tr
        .paths
        .iter()
        .filter_map(|p| p.exit_weight.map(|w| p.entry_weight * w))
        .sum();
    s.clamp(0.0, 1.0)
}

/// Accept `H0` iff `score >= threshold`.
pub fn decide(score: f64, threshold: f64) -> Verdict {
    Verdict {
        decision: if score >= threshold {
            Hypothesis::H0
        } else {
            Hypothesis::H1
        },
        consistency_score: score,
        diagnostics: Diagnostics::default(),
    }
}

pub fn trellis_check(obs: &Observation, threshold: f64) -> Verdict {
    let tr = build_trellis(obs);
    let score = consistency_probability(&tr);
    let mut v = decide(score, threshold);
    v.diagnostics = Diagnostics {
        peer_candidates: tr.paths.len(),
        relay_candidates: tr.paths.iter().filter(|p| p.exit_weight.is_some()).count(),
        surviving: tr
            .paths
            .iter()
            .filter(|p| p.exit_weight.is_some_and(|w| w * p.entry_weight > 0.0))
            .count(),
    };
    v
}

/// Detection engine selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Algebraic,
    Trellis { threshold: f64 },
}

impl Engine {
    pub fn check(&self, obs: &Observation) -> Verdict {
        match *self {
            Engine::Algebraic => algebraic_check(obs),
            Engine::Trellis { threshold } => trellis_check(obs, threshold),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Algebraic => "algebraic",
            Engine::Trellis { .. } => "trellis",
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Engine::Algebraic => None,
            Engine::Trellis { threshold } => Some(threshold),
        }
    }
}
