//! Fixtures shared by the criterion benchmarks.

use watchdog_core::hashing::HashFunction;
use watchdog_core::protocol::{Channels, EdgeNoise, Scenario, Watcher};
use watchdog_core::{canonical_spec, Observation, Word};

/// Observation of a relay that injected `error`, seen by watcher `v1`,
/// with a fixed hash and fixed noise patterns.
pub fn observation(n: u32, h: u8, p: f64, error: Word) -> Observation {
    let spec = canonical_spec(n).expect("supported width");
    let coeffs: Vec<_> = [0x1d, 0x7, 0x3, 0x5]
        .iter()
        .map(|&c| spec.element(c & spec.mask()).expect("masked"))
        .collect();
    let hash = HashFunction::new(&coeffs, h).expect("h <= n");
    let el = |v: Word| spec.element(v & spec.mask()).expect("masked");
    let scn = Scenario::new_unchecked(
        hash,
        [el(0x2b5), el(0x1c3)],
        [el(0x0e7), el(0x391)],
        Channels::uniform(p).expect("valid crossover"),
        0.01,
    );
    let src = scn.source_packets();
    let relay = scn.relay_packet_with_error(error & spec.mask());
    let noise = EdgeNoise {
        e12: 0b101 & spec.mask(),
        e21: 0b1000_0001 & spec.mask(),
        e31: 0b10 & spec.mask(),
        e32: 0,
    };
    scn.observe_with_noise(Watcher::V1, &src, &relay, &noise)
}
