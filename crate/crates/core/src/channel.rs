//! Binary symmetric interference channels and Hamming-ball combinatorics.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Word;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("crossover probability {0} is outside [0, 0.5]")]
    Crossover(f64),
    #[error("radius {r} exceeds word width {n}")]
    Radius { r: u32, n: u32 },
}

/// Memoryless channel flipping each bit independently with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinarySymmetricChannel {
    p: f64,
}

impl BinarySymmetricChannel {
    pub fn new(p: f64) -> Result<Self, ChannelError> {
        if !(0.0..=0.5).contains(&p) {
            return Err(ChannelError::Crossover(p));
        }
        Ok(Self { p })
    }

    pub fn noiseless() -> Self {
        Self { p: 0.0 }
    }

    pub fn crossover(&self) -> f64 {
        self.p
    }

    /// One realization of the error pattern on an `n`-bit word.
    pub fn noise<R: Rng + ?Sized>(&self, n: u32, rng: &mut R) -> Word {
        if self.p == 0.0 {
            return 0;
        }
        (0..n).fold(0, |e, bit| {
            if rng.random_bool(self.p) {
                e | (1 << bit)
            } else {
                e
            }
        })
    }

    pub fn transmit<R: Rng + ?Sized>(&self, payload: Word, n: u32, rng: &mut R) -> Word {
        payload ^ self.noise(n, rng)
    }

    /// `ln P(received | sent)`; `-inf` when the channel cannot produce it.
    pub fn log_likelihood(&self, n: u32, sent: Word, received: Word) -> f64 {
        let k = (sent ^ received).count_ones();
        let flips = term(k, self.p);
        let keeps = term(n - k, 1.0 - self.p);
        flips + keeps
    }

    /// `P(received | sent)`.
    pub fn likelihood(&self, n: u32, sent: Word, received: Word) -> f64 {
        self.log_likelihood(n, sent, received).exp()
    }
}

// count * ln(q), with 0 * ln(0) = 0
fn term(count: u32, q: f64) -> f64 {
    if count == 0 {
        0.0
    } else if q == 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::from(count) * q.ln()
    }
}

/// A Hamming radius together with the miss budget it was chosen for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radius {
    pub r: u32,
    pub epsilon: f64,
}

/// Exact binomial coefficient.
pub fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * u64::from(n - i) / u64::from(i + 1))
}

/// `P(at most r of n bits flipped)` for crossover `p`.
pub fn binomial_cdf(n: u32, p: f64, r: u32) -> f64 {
    (0..=r.min(n))
        .map(|k| binomial(n, k) as f64 * (term(k, p) + term(n - k, 1.0 - p)).exp())
        .sum()
}

/// Smallest radius whose ball around the received word holds at least
/// `1 - eps` of the channel's output mass.
pub fn radius_for_epsilon(n: u32, p: f64, eps: f64) -> Radius {
    debug_assert!(eps > 0.0 && eps < 1.0);
    let target = 1.0 - eps;
    let mut mass = 0.0;
    for k in 0..=n {
        mass += binomial(n, k) as f64 * (term(k, p) + term(n - k, 1.0 - p)).exp();
        if mass >= target {
            return Radius { r: k, epsilon: eps };
        }
    }
    Radius { r: n, epsilon: eps }
}

/// `Σ_{k<=r} C(n, k)`.
pub fn ball_volume(n: u32, r: u32) -> Result<u64, ChannelError> {
    if r > n {
        return Err(ChannelError::Radius { r, n });
    }
    Ok((0..=r).map(|k| binomial(n, k)).sum())
}

/// All `n`-bit words within distance `r` of `center`, ordered by distance
/// and then by value.
pub fn ball_enumerate(center: Word, n: u32, r: u32) -> Vec<Word> {
    let r = r.min(n);
    let mut shells: Vec<Vec<Word>> = vec![Vec::new(); r as usize + 1];
    for mask in 0..(1u32 << n) {
        let w = mask.count_ones();
        if w <= r {
            shells[w as usize].push(center ^ mask);
        }
    }
    shells
        .into_iter()
        .flat_map(|mut shell| {
            shell.sort_unstable();
            shell
        })
        .collect()
}

/// Visits every word within distance `r` of `center`, in no particular
/// order, without allocating. Walks masks of each weight with Gosper's hack.
pub fn for_each_in_ball(center: Word, n: u32, r: u32, mut f: impl FnMut(Word)) {
    let r = r.min(n);
    f(center);
    let limit = 1u32 << n;
    for k in 1..=r {
        let mut mask: u32 = (1 << k) - 1;
        while mask < limit {
            f(center ^ mask);
            let c = mask & mask.wrapping_neg();
            let rr = mask + c;
            mask = (((rr ^ mask) >> 2) / c) | rr;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_transmit_is_identity() {
        let ch = BinarySymmetricChannel::noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for w in 0..256 {
            assert_eq!(ch.transmit(w, 8, &mut rng), w);
        }
    }

    fn mean_flips(p: f64) -> (f64, f64) {
        let ch = BinarySymmetricChannel::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 10_000;
        let total: u32 = (0..trials)
            .map(|_| (ch.transmit(0b1010_0110, 8, &mut rng) ^ 0b1010_0110).count_ones())
            .sum();
        let mean = f64::from(total) / trials as f64;
        let sigma = (8.0 * p * (1.0 - p) / trials as f64).sqrt();
        (mean, sigma)
    }

    #[test]
    fn flip_count_statistics() {
        let (m, s) = mean_flips(0.5);
        assert!((m - 4.0).abs() <= 3.0 * s, "mean {m}");
        let (m, s) = mean_flips(0.1);
        assert!((m - 0.8).abs() <= 3.0 * s, "mean {m}");
    }

    #[test]
    fn crossover_validation() {
        assert!(BinarySymmetricChannel::new(0.6).is_err());
        assert!(BinarySymmetricChannel::new(-0.1).is_err());
        assert!(BinarySymmetricChannel::new(0.5).is_ok());
    }

    #[test]
    fn radius_examples() {
        assert_eq!(radius_for_epsilon(8, 0.0, 0.01).r, 0);
        assert_eq!(radius_for_epsilon(8, 0.5, 1.0 / 512.0).r, 8);
        assert_eq!(radius_for_epsilon(12, 0.5, 1e-6).r, 12);
        let r = radius_for_epsilon(8, 0.1, 0.01);
        assert_eq!(r.r, 3);
        assert_eq!(r.epsilon, 0.01);
        assert!(binomial_cdf(8, 0.1, 2) < 0.99);
        assert!(binomial_cdf(8, 0.1, 3) >= 0.99);
    }

    #[test]
    fn radius_monotone_over_grid() {
        let ps = [0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5];
        let eps = [0.001, 0.01, 0.05, 0.1, 0.3];
        for n in [4, 8, 12, 16] {
            for &p in &ps {
                for w in eps.windows(2) {
                    assert!(radius_for_epsilon(n, p, w[0]).r >= radius_for_epsilon(n, p, w[1]).r);
                }
            }
            for &e in &eps {
                for w in ps.windows(2) {
                    assert!(radius_for_epsilon(n, w[0], e).r <= radius_for_epsilon(n, w[1], e).r);
                }
            }
        }
    }

    #[test]
    fn volumes() {
        assert_eq!(ball_volume(8, 0).unwrap(), 1);
        assert_eq!(ball_volume(8, 8).unwrap(), 256);
        assert_eq!(ball_volume(16, 16).unwrap(), 65536);
        assert_eq!(ball_volume(8, 2).unwrap(), 37);
        assert_eq!(ball_volume(8, 3).unwrap(), 93);
        assert_eq!(ball_volume(8, 9), Err(ChannelError::Radius { r: 9, n: 8 }));
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(ball_enumerate(0b1011, 4, 0), vec![0b1011]);
        assert_eq!(
            ball_enumerate(0, 4, 1),
            vec![0b0000, 0b0001, 0b0010, 0b0100, 0b1000]
        );
        let mut all = ball_enumerate(0b0110, 4, 4);
        assert_eq!(all.len(), 16);
        all.sort_unstable();
        assert_eq!(all, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn enumerate_is_ordered_and_complete() {
        for n in [5u32, 8, 10] {
            for r in 0..=n {
                let c = 0b10_1101_0011 & ((1 << n) - 1);
                let ball = ball_enumerate(c, n, r);
                assert_eq!(ball.len() as u64, ball_volume(n, r).unwrap());
                for pair in ball.windows(2) {
                    let key = |w: Word| ((w ^ c).count_ones(), w);
                    assert!(key(pair[0]) < key(pair[1]));
                }
                let mut visited = Vec::new();
                for_each_in_ball(c, n, r, |w| visited.push(w));
                visited.sort_unstable();
                let mut sorted = ball.clone();
                sorted.sort_unstable();
                assert_eq!(visited, sorted);
            }
        }
    }

    #[test]
    fn log_likelihood_examples() {
        let half = BinarySymmetricChannel::new(0.5).unwrap();
        let expect = 8.0 * 0.5f64.ln();
        assert!((half.log_likelihood(8, 0x3c, 0x3c) - expect).abs() < 1e-12);
        assert!((half.log_likelihood(8, 0x3c, 0xff) - expect).abs() < 1e-12);
        let ch = BinarySymmetricChannel::new(0.1).unwrap();
        let v = ch.log_likelihood(8, 0b0000_0000, 0b0001_0001);
        assert!((v - (-5.237)).abs() < 5e-4, "{v}");
    }

    #[test]
    fn degenerate_log_likelihood() {
        let ch = BinarySymmetricChannel::noiseless();
        assert_eq!(ch.log_likelihood(8, 7, 7), 0.0);
        assert_eq!(ch.log_likelihood(8, 7, 6), f64::NEG_INFINITY);
        assert_eq!(ch.likelihood(8, 7, 6), 0.0);
    }

    #[test]
    fn ball_mass_matches_cdf() {
        for &p in &[0.05, 0.1, 0.3] {
            let ch = BinarySymmetricChannel::new(p).unwrap();
            for r in 0..=8 {
                let mass: f64 = ball_enumerate(0x5a, 8, r)
                    .into_iter()
                    .map(|x| ch.likelihood(8, x, 0x5a))
                    .sum();
                assert!((mass - binomial_cdf(8, p, r)).abs() < 1e-12);
            }
        }
    }
}
