//! Packets, the two-source/one-relay topology, relay behaviour and the
//! overhearing model.
//!
//! ```text
//!   v1 ──x1──▶ v3 ──x3──▶ v4        interference (overheard) edges:
//!   v2 ──x2──▶ v3                   1→2, 2→1, 3→1, 3→2
//! ```
//!
//! Headers (coefficients and hashes) are always received intact; only
//! payloads cross the noisy interference channels.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, BinarySymmetricChannel};
use crate::gf2n::{canonical_spec, FieldElement, FieldError, FieldSpec};
use crate::hashing::{HashFunction, HashValue};
use crate::watchdog::Observation;
use crate::Word;

/// Largest field width for which the exhaustive adversary is allowed.
pub const EXHAUSTIVE_MAX_WIDTH: u8 = 12;

/// Wire format version written by [`encode_packet`].
pub const WIRE_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("fixed_error(0) is not a misbehaving relay")]
    ZeroError,
    #[error("error pattern {e:#x} does not fit in {n} bits")]
    ErrorOutOfRange { e: Word, n: u8 },
    #[error("weight bound {w} must be in 1..={n}")]
    WeightBound { w: u32, n: u8 },
    #[error("exhaustive adversary needs n <= {EXHAUSTIVE_MAX_WIDTH}, got {0}")]
    ExhaustiveTooWide(u8),
    #[error("coding coefficient must be nonzero")]
    ZeroCoefficient,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frame truncated at byte {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("unsupported wire version {0}")]
    UnsupportedVersion(u8),
    #[error("bad header at byte {offset}: {reason}")]
    BadHeader { offset: usize, reason: String },
    #[error("value {value:#x} at byte {offset} does not fit in {bits} bits")]
    ValueOutOfRange { offset: usize, value: u64, bits: u8 },
    #[error("{0} trailing bytes after frame")]
    Trailing(usize),
}

/// `[coefficients, neighbour hashes, own hash, payload]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub coeffs: Vec<FieldElement>,
    pub neighbor_hashes: Vec<HashValue>,
    pub own_hash: HashValue,
    pub payload: Word,
}

impl Packet {
    /// Packet for a source node with no coded inputs.
    pub fn source(hf: &HashFunction, x: FieldElement) -> Self {
        Self {
            coeffs: Vec::new(),
            neighbor_hashes: Vec::new(),
            own_hash: hf.evaluate_word(x.value()),
            payload: x.value(),
        }
    }

    /// Checks that the payload is the advertised combination of `inputs`
    /// and that the hashes agree with the payloads.
    pub fn is_valid(&self, hf: &HashFunction, inputs: &[FieldElement]) -> bool {
        if self.coeffs.len() != self.neighbor_hashes.len() || self.coeffs.len() != inputs.len() {
            return false;
        }
        let spec = hf.spec();
        let combo = self
            .coeffs
            .iter()
            .zip(inputs)
            .fold(0, |acc, (a, x)| acc ^ spec.mul_words(a.value(), x.value()));
        let hashes_ok = inputs
            .iter()
            .zip(&self.neighbor_hashes)
            .all(|(x, h)| hf.evaluate_word(x.value()) == *h);
        combo == self.payload && hashes_ok && hf.evaluate_word(self.payload) == self.own_hash
    }
}

/// How the relay `v3` behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryStrategy {
    Honest,
    /// `e` uniform over the nonzero words.
    RandomNonzeroError,
    FixedError(Word),
    /// `e` uniform over nonzero words of Hamming weight at most `w`.
    WeightBoundedError(u32),
    /// Brute-force choice of `e` maximising the chance that the true coded
    /// value survives in both watchers' relay candidate sets.
    ExhaustiveBest,
}

impl AdversaryStrategy {
    pub fn validate(&self, n: u8) -> Result<(), ProtocolError> {
        match *self {
            AdversaryStrategy::FixedError(0) => Err(ProtocolError::ZeroError),
            AdversaryStrategy::FixedError(e) if e >> n != 0 => {
                Err(ProtocolError::ErrorOutOfRange { e, n })
            }
            AdversaryStrategy::WeightBoundedError(w) if w == 0 || w > u32::from(n) => {
                Err(ProtocolError::WeightBound { w, n })
            }
            AdversaryStrategy::ExhaustiveBest if n > EXHAUSTIVE_MAX_WIDTH => {
                Err(ProtocolError::ExhaustiveTooWide(n))
            }
            _ => Ok(()),
        }
    }

    pub fn is_malicious(&self) -> bool {
        !matches!(self, AdversaryStrategy::Honest)
    }

    pub fn name(&self) -> String {
        match self {
            AdversaryStrategy::Honest => "honest".into(),
            AdversaryStrategy::RandomNonzeroError => "random_nonzero_error".into(),
            AdversaryStrategy::FixedError(e) => format!("fixed_error({e})"),
            AdversaryStrategy::WeightBoundedError(w) => format!("weight_bounded_error({w})"),
            AdversaryStrategy::ExhaustiveBest => "exhaustive_best".into(),
        }
    }
}

/// Which source node is doing the watching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Watcher {
    V1,
    V2,
}

impl Watcher {
    pub const BOTH: [Watcher; 2] = [Watcher::V1, Watcher::V2];

    fn own_index(self) -> usize {
        match self {
            Watcher::V1 => 0,
            Watcher::V2 => 1,
        }
    }
}

/// Crossover probabilities of every edge in the two-source network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channels {
    pub p12: BinarySymmetricChannel,
    pub p21: BinarySymmetricChannel,
    pub p31: BinarySymmetricChannel,
    pub p32: BinarySymmetricChannel,
    // intended links 1→3, 2→3, 3→4 are modelled as reliable
}

impl Channels {
    pub fn uniform(p: f64) -> Result<Self, channel::ChannelError> {
        let ch = BinarySymmetricChannel::new(p)?;
        Ok(Self {
            p12: ch,
            p21: ch,
            p31: ch,
            p32: ch,
        })
    }

    /// `(peer → watcher, relay → watcher)` channels.
    pub fn overheard(&self, w: Watcher) -> (BinarySymmetricChannel, BinarySymmetricChannel) {
        match w {
            Watcher::V1 => (self.p21, self.p31),
            Watcher::V2 => (self.p12, self.p32),
        }
    }
}

/// Noise realizations on the four interference edges for one trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeNoise {
    pub e12: Word,
    pub e21: Word,
    pub e31: Word,
    pub e32: Word,
}

impl EdgeNoise {
    pub fn draw<R: Rng + ?Sized>(ch: &Channels, n: u32, rng: &mut R) -> Self {
        Self {
            e12: ch.p12.noise(n, rng),
            e21: ch.p21.noise(n, rng),
            e31: ch.p31.noise(n, rng),
            e32: ch.p32.noise(n, rng),
        }
    }

    fn overheard(&self, w: Watcher) -> (Word, Word) {
        match w {
            Watcher::V1 => (self.e21, self.e31),
            Watcher::V2 => (self.e12, self.e32),
        }
    }
}

/// One instance of the two-source network.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: FieldSpec,
    pub hash: HashFunction,
    pub sources: [FieldElement; 2],
    pub coeffs: [FieldElement; 2],
    pub channels: Channels,
    pub epsilon: f64,
}

impl Scenario {
    pub fn new(
        hash: HashFunction,
        sources: [FieldElement; 2],
        coeffs: [FieldElement; 2],
        channels: Channels,
        epsilon: f64,
    ) -> Result<Self, ProtocolError> {
        let spec = hash.spec();
        for v in sources.iter().chain(&coeffs) {
            if v.spec() != spec {
                return Err(FieldError::SpecMismatch {
                    left: spec.width(),
                    right: v.spec().width(),
                }
                .into());
            }
        }
        if coeffs.iter().any(FieldElement::is_zero) {
            return Err(ProtocolError::ZeroCoefficient);
        }
        Ok(Self::new_unchecked(hash, sources, coeffs, channels, epsilon))
    }

    /// Skips the nonzero-coefficient rule, for explicit overrides.
    pub fn new_unchecked(
        hash: HashFunction,
        sources: [FieldElement; 2],
        coeffs: [FieldElement; 2],
        channels: Channels,
        epsilon: f64,
    ) -> Self {
        Self {
            spec: hash.spec(),
            hash,
            sources,
            coeffs,
            channels,
            epsilon,
        }
    }

    pub fn width(&self) -> u32 {
        u32::from(self.spec.width())
    }

    /// `α1·x1 + α2·x2`.
    pub fn coded_value(&self) -> Word {
        let s = self.spec;
        s.mul_words(self.coeffs[0].value(), self.sources[0].value())
            ^ s.mul_words(self.coeffs[1].value(), self.sources[1].value())
    }

    pub fn source_packets(&self) -> [Packet; 2] {
        [
            Packet::source(&self.hash, self.sources[0]),
            Packet::source(&self.hash, self.sources[1]),
        ]
    }

    /// Relay packet carrying `coded_value() ^ e`, with a self-consistent hash.
    pub fn relay_packet_with_error(&self, e: Word) -> Packet {
        let payload = self.coded_value() ^ e;
        Packet {
            coeffs: self.coeffs.to_vec(),
            neighbor_hashes: self
                .sources
                .iter()
                .map(|x| self.hash.evaluate_word(x.value()))
                .collect(),
            own_hash: self.hash.evaluate_word(payload),
            payload,
        }
    }

    /// Error pattern the relay injects under `strategy`; 0 for honest.
    pub fn choose_error<R: Rng + ?Sized>(
        &self,
        strategy: AdversaryStrategy,
        rng: &mut R,
    ) -> Result<Word, ProtocolError> {
        strategy.validate(self.spec.width())?;
        let n = self.width();
        let e = match strategy {
            AdversaryStrategy::Honest => 0,
            AdversaryStrategy::RandomNonzeroError => rng.random_range(1..self.spec.order()),
            AdversaryStrategy::FixedError(e) => e,
            AdversaryStrategy::WeightBoundedError(w) => {
                // rejection from the uniform word distribution
                loop {
                    let e = rng.random_range(1..self.spec.order());
                    if e.count_ones() <= w {
                        break e;
                    }
                }
            }
            AdversaryStrategy::ExhaustiveBest => self.best_error(n),
        };
        Ok(e)
    }

    /// Maximises `[h(x3 ^ e) = h(x3)] · P(x3 ∈ B(x̃3, r31)) · P(x3 ∈ B(x̃3, r32))`
    /// over nonzero `e`; ties go to the smallest `e`.
    fn best_error(&self, n: u32) -> Word {
        let x3 = self.coded_value();
        let target = self.hash.evaluate_word(x3);
        let r31 = channel::radius_for_epsilon(n, self.channels.p31.crossover(), self.epsilon).r;
        let r32 = channel::radius_for_epsilon(n, self.channels.p32.crossover(), self.epsilon).r;
        let cover31: Vec<f64> = (0..=n)
            .map(|w| shifted_cover(n, w, self.channels.p31.crossover(), r31))
            .collect();
        let cover32: Vec<f64> = (0..=n)
            .map(|w| shifted_cover(n, w, self.channels.p32.crossover(), r32))
            .collect();
        let mut best = (f64::NEG_INFINITY, 1);
        for e in 1..self.spec.order() {
            let hit = self.hash.evaluate_word(x3 ^ e) == target;
            let w = e.count_ones() as usize;
            let score = if hit { cover31[w] * cover32[w] } else { 0.0 };
            if score > best.0 {
                best = (score, e);
            }
        }
        best.1
    }

    pub fn relay_output<R: Rng + ?Sized>(
        &self,
        strategy: AdversaryStrategy,
        rng: &mut R,
    ) -> Result<Packet, ProtocolError> {
        let e = self.choose_error(strategy, rng)?;
        Ok(self.relay_packet_with_error(e))
    }

    /// What `watcher` learns, given explicit noise realizations.
    pub fn observe_with_noise(
        &self,
        watcher: Watcher,
        source_packets: &[Packet; 2],
        relay_packet: &Packet,
        noise: &EdgeNoise,
    ) -> Observation {
        let own = watcher.own_index();
        let peer = 1 - own;
        let (peer_ch, relay_ch) = self.channels.overheard(watcher);
        let (peer_noise, relay_noise) = noise.overheard(watcher);
        Observation {
            hash: self.hash.clone(),
            own_value: self.sources[own],
            own_coeff: relay_packet.coeffs[own],
            peer_coeff: relay_packet.coeffs[peer],
            peer_hash: source_packets[peer].own_hash,
            relay_hash: relay_packet.own_hash,
            noisy_peer: source_packets[peer].payload ^ peer_noise,
            noisy_relay: relay_packet.payload ^ relay_noise,
            peer_channel: peer_ch,
            relay_channel: relay_ch,
            epsilon: self.epsilon,
        }
    }

    pub fn observe<R: Rng + ?Sized>(
        &self,
        watcher: Watcher,
        source_packets: &[Packet; 2],
        relay_packet: &Packet,
        rng: &mut R,
    ) -> Observation {
        let n = self.width();
        let (peer_ch, relay_ch) = self.channels.overheard(watcher);
        let peer_noise = peer_ch.noise(n, rng);
        let relay_noise = relay_ch.noise(n, rng);
        let noise = match watcher {
            Watcher::V1 => EdgeNoise {
                e21: peer_noise,
                e31: relay_noise,
                ..Default::default()
            },
            Watcher::V2 => EdgeNoise {
                e12: peer_noise,
                e32: relay_noise,
                ..Default::default()
            },
        };
        self.observe_with_noise(watcher, source_packets, relay_packet, &noise)
    }
}

/// Probability that a word at distance `w` from the transmitted word lands
/// within `r` of the received word: `P(wt(d ^ noise) <= r)` with `wt(d) = w`.
fn shifted_cover(n: u32, w: u32, p: f64, r: u32) -> f64 {
    let mut total = 0.0;
    // noise flips i of the w differing bits and j of the n - w others
    for i in 0..=w {
        for j in 0..=(n - w) {
            if w - i + j <= r {
                let pi = channel::binomial(w, i) as f64 * p.powi(i as i32) * (1.0 - p).powi((w - i) as i32);
                let pj = channel::binomial(n - w, j) as f64
                    * p.powi(j as i32)
                    * (1.0 - p).powi((n - w - j) as i32);
                total += pi * pj;
            }
        }
    }
    total
}

fn field_bytes(bits: u8) -> usize {
    usize::from(bits).div_ceil(8)
}

fn put(buf: &mut Vec<u8>, value: Word, bytes: usize) {
    buf.extend_from_slice(&value.to_le_bytes()[..bytes]);
}

/// Serializes a packet:
///
/// ```text
/// [u8 version][u8 n][u8 h][u8 count][count coeffs][count hashes][own hash][payload]
/// ```
///
/// Field values take `ceil(n/8)` bytes and hashes `ceil(h/8)` bytes, little
/// endian with zero padding.
pub fn encode_packet(pkt: &Packet, n: u8, h: u8) -> Vec<u8> {
    assert_eq!(pkt.coeffs.len(), pkt.neighbor_hashes.len());
    let fb = field_bytes(n);
    let hb = field_bytes(h);
    let mut buf = Vec::with_capacity(4 + pkt.coeffs.len() * (fb + hb) + hb + fb);
    buf.extend_from_slice(&[WIRE_VERSION, n, h, pkt.coeffs.len() as u8]);
    for c in &pkt.coeffs {
        put(&mut buf, c.value(), fb);
    }
    for hv in &pkt.neighbor_hashes {
        put(&mut buf, hv.value(), hb);
    }
    put(&mut buf, pkt.own_hash.value(), hb);
    put(&mut buf, pkt.payload, fb);
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8], DecodeError> {
        let rest = self.buf.len() - self.pos;
        if rest < len {
            return Err(DecodeError::Truncated {
                offset: self.buf.len(),
                needed: len - rest,
            });
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn word(&mut self, len: usize, bits: u8) -> Result<Word, DecodeError> {
        let offset = self.pos;
        let mut raw = [0u8; 4];
        raw[..len].copy_from_slice(self.take(len)?);
        let value = Word::from_le_bytes(raw);
        if u64::from(value) >> bits != 0 {
            return Err(DecodeError::ValueOutOfRange {
                offset,
                value: u64::from(value),
                bits,
            });
        }
        Ok(value)
    }
}

/// Inverse of [`encode_packet`]. Returns the packet and its `(n, h)`.
pub fn decode_packet(bytes: &[u8]) -> Result<(Packet, u8, u8), DecodeError> {
    let mut rd = Reader { buf: bytes, pos: 0 };
    let head = rd.take(4)?;
    let (version, n, h, count) = (head[0], head[1], head[2], usize::from(head[3]));
    if version != WIRE_VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let spec = canonical_spec(u32::from(n)).map_err(|e| DecodeError::BadHeader {
        offset: 1,
        reason: e.to_string(),
    })?;
    if h > n {
        return Err(DecodeError::BadHeader {
            offset: 2,
            reason: format!("hash width {h} exceeds field width {n}"),
        });
    }
    let fb = field_bytes(n);
    let hb = field_bytes(h);
    let mut coeffs = Vec::with_capacity(count);
    for _ in 0..count {
        let v = rd.word(fb, n)?;
        coeffs.push(spec.element(v).expect("range checked"));
    }
    let mut neighbor_hashes = Vec::with_capacity(count);
    for _ in 0..count {
        neighbor_hashes.push(HashValue(rd.word(hb, h)?));
    }
    let own_hash = HashValue(rd.word(hb, h)?);
    let payload = rd.word(fb, n)?;
    if rd.pos != bytes.len() {
        return Err(DecodeError::Trailing(bytes.len() - rd.pos));
    }
    Ok((
        Packet {
            coeffs,
            neighbor_hashes,
            own_hash,
            payload,
        },
        n,
        h,
    ))
}
