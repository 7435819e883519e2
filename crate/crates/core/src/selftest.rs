//! Built-in consistency suites run by `watchdog selftest`.
//!
//! Each suite checks the library against a separately written reference:
//! field products against schoolbook multiplication with long division,
//! the unpruned algebraic check against a full-domain scan and the trellis
//! support, and radius selection against a tail-sum binomial computation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::radius_for_epsilon;
use crate::gf2n::canonical_spec;
use crate::hashing::HashFunction;
use crate::protocol::{Channels, EdgeNoise, Scenario, Watcher};
use crate::watchdog::{algebraic_check_with_radii, build_trellis, consistency_probability};
use crate::{Radius, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: u64,
    pub failures: Vec<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Schoolbook product and reduction, independent of the library's
/// interleaved shift-and-reduce loop.
pub fn reference_mul(a: Word, b: Word, poly: u32) -> Word {
    let mut prod: u64 = 0;
    for i in 0..32 {
        if (b >> i) & 1 == 1 {
            prod ^= u64::from(a) << i;
        }
    }
    let deg = 31 - poly.leading_zeros();
    for bit in (deg..64).rev() {
        if (prod >> bit) & 1 == 1 {
            prod ^= u64::from(poly) << (bit - deg);
        }
    }
    prod as Word
}

/// Exhaustive products for `n <= 8`, `10^4` random pairs for wider fields.
pub fn field_suite() -> SuiteResult {
    let mut res = SuiteResult {
        name: "field arithmetic",
        checks: 0,
        failures: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for n in 2..=16u32 {
        let f = canonical_spec(n).expect("supported width");
        let check = |a: Word, b: Word, res: &mut SuiteResult| {
            res.checks += 1;
            let got = f.mul_words(a, b);
            let want = reference_mul(a, b, f.reduction_poly());
            if got != want && res.failures.len() < 10 {
                res.failures.push(format!("n={n}: {a:#x}*{b:#x} = {got:#x}, expected {want:#x}"));
            }
        };
        if n <= 8 {
            for a in 0..f.order() {
                for b in 0..f.order() {
                    check(a, b, &mut res);
                }
            }
        } else {
            for _ in 0..10_000 {
                let a = rng.random_range(0..f.order());
                let b = rng.random_range(0..f.order());
                check(a, b, &mut res);
            }
        }
    }
    res
}

/// Smallest radius by subtracting upper-tail terms from one.
pub fn reference_radius(n: u32, p: f64, eps: f64) -> u32 {
    let pmf = |k: u32| {
        let mut c = 1.0f64;
        for i in 0..k {
            c = c * f64::from(n - i) / f64::from(i + 1);
        }
        c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    };
    (0..=n)
        .find(|&r| {
            let tail: f64 = (r + 1..=n).map(pmf).sum();
            tail <= eps
        })
        .unwrap_or(n)
}

pub const RADIUS_GRID_N: [u32; 4] = [4, 8, 12, 16];
pub const RADIUS_GRID_P: [f64; 4] = [0.01, 0.05, 0.1, 0.2];
pub const RADIUS_GRID_EPS: [f64; 3] = [0.001, 0.01, 0.05];

pub fn radius_suite() -> SuiteResult {
    let mut res = SuiteResult {
        name: "radius selection",
        checks: 0,
        failures: Vec::new(),
    };
    for n in RADIUS_GRID_N {
        for p in RADIUS_GRID_P {
            for eps in RADIUS_GRID_EPS {
                res.checks += 1;
                let got = radius_for_epsilon(n, p, eps).r;
                let want = reference_radius(n, p, eps);
                if got != want {
                    res.failures.push(format!("n={n} p={p} eps={eps}: {got} vs {want}"));
                }
            }
        }
    }
    res
}

/// At `n = 4, h = 2`: over every `(x1, x2, e != 0)` with fixed coefficients
/// and noiseless overhearing, plus random noisy instances, the unpruned
/// algebraic check must accept exactly when a full-domain scan finds a
/// hash-consistent peer word whose image matches the relay hash, and
/// exactly when the trellis path-sum is positive.
pub fn engine_suite(random_instances: usize) -> SuiteResult {
    let mut res = SuiteResult {
        name: "engine equivalence",
        checks: 0,
        failures: Vec::new(),
    };
    let spec = canonical_spec(4).expect("supported width");
    let full = Radius { r: 4, epsilon: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(0xe9);
    let hash = HashFunction::sample(&mut rng, 3, spec, 2).expect("h <= n");
    let el = |v| spec.element(v).expect("in range");

    let compare = |scn: &Scenario, e: Word, noise: &EdgeNoise, res: &mut SuiteResult| {
        let src = scn.source_packets();
        let relay = scn.relay_packet_with_error(e);
        for w in Watcher::BOTH {
            let obs = scn.observe_with_noise(w, &src, &relay, noise);
            res.checks += 1;
            let alg = !algebraic_check_with_radii(&obs, full, full).flagged();
            let scan = (0..spec.order()).any(|x| {
                obs.hash.evaluate_word(x) == obs.peer_hash
                    && obs.hash.evaluate_word(obs.map_peer(x)) == obs.relay_hash
            });
            let trellis = consistency_probability(&build_trellis(&obs)) > 0.0;
            if (alg != scan || alg != trellis) && res.failures.len() < 10 {
                res.failures.push(format!(
                    "x=({},{}) e={e:#x} {w:?}: algebraic {alg}, scan {scan}, trellis {trellis}",
                    scn.sources[0].value(),
                    scn.sources[1].value()
                ));
            }
        }
    };

    // Radius n corresponds to an uninformative channel model (p = 1/2);
    // the overheard payloads themselves are noise-free.
    let model = Channels::uniform(0.5).expect("valid crossover");
    for x1 in 0..16 {
        for x2 in 0..16 {
            let scn = Scenario::new_unchecked(hash.clone(), [el(x1), el(x2)], [el(0b0011), el(0b0110)], model, 0.01);
            for e in 1..16 {
                compare(&scn, e, &EdgeNoise::default(), &mut res);
            }
        }
    }
    for _ in 0..random_instances {
        let hf = HashFunction::sample(&mut rng, 3, spec, 2).expect("h <= n");
        let ch = Channels::uniform(rng.random_range(0.01..=0.5)).expect("valid crossover");
        let scn = Scenario::new_unchecked(
            hf,
            [el(rng.random_range(0..16)), el(rng.random_range(0..16))],
            [el(rng.random_range(1..16)), el(rng.random_range(1..16))],
            ch,
            0.01,
        );
        let e = rng.random_range(0..16);
        let noise = EdgeNoise::draw(&ch, 4, &mut rng);
        compare(&scn, e, &noise, &mut res);
    }
    res
}

pub fn run_all() -> Vec<SuiteResult> {
    vec![field_suite(), engine_suite(1000), radius_suite()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_mul_small_cases() {
        assert_eq!(reference_mul(0b0010, 0b1000, 0b10011), 0b0011);
        assert_eq!(reference_mul(0x53, 0xca, 0x11b), 0x01);
    }

    #[test]
    fn reference_radius_example() {
        assert_eq!(reference_radius(8, 0.1, 0.01), 3);
        assert_eq!(reference_radius(8, 0.0, 0.01), 0);
    }

    #[test]
    fn suites_pass() {
        for s in run_all() {
            assert!(s.passed(), "{}: {:?}", s.name, s.failures);
            assert!(s.checks > 0);
        }
    }
}
