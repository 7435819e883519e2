//! Closed-form false-detection and misdetection predictors.
//!
//! With `V(r) = Σ_{k<=r} C(n, k)` the misdetection probability seen by
//! watcher 1 is
//!
//! ```text
//! min{ 1, V(r12)/2^(h+n) · V(r21)/2^(h+n) · V(r31)/2^h }
//! ```
//!
//! and watcher 2 uses `r32` in place of `r31`. The scenario value takes
//! `r = min(r31, r32)`. Everything is computed as an exact rational; the
//! largest denominator at `n = h = 16` is `2^80`, well inside `u128`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ball_volume, radius_for_epsilon};
use crate::gf2n::MAX_WIDTH;

pub type Exact = Ratio<u128>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("field width {0} outside 1..={MAX_WIDTH}")]
    Width(u32),
    #[error("hash width {h} exceeds field width {n}")]
    HashWidth { h: u32, n: u32 },
    #[error("radius {name} = {r} exceeds n = {n}")]
    Radius { name: &'static str, r: u32, n: u32 },
}

/// Widths and the four overhearing radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub n: u32,
    pub h: u32,
    pub r12: u32,
    pub r21: u32,
    pub r31: u32,
    pub r32: u32,
}

impl TheoryParams {
    pub fn new(n: u32, h: u32, r12: u32, r21: u32, r31: u32, r32: u32) -> Result<Self, TheoryError> {
        let tp = Self {
            n,
            h,
            r12,
            r21,
            r31,
            r32,
        };
        tp.validate()?;
        Ok(tp)
    }

    /// Same radius on all four edges.
    pub fn uniform(n: u32, h: u32, r: u32) -> Result<Self, TheoryError> {
        Self::new(n, h, r, r, r, r)
    }

    /// Radii implied by per-edge crossover probabilities and `ε`.
    pub fn from_channels(n: u32, h: u32, p: [f64; 4], eps: f64) -> Result<Self, TheoryError> {
        let r = p.map(|p| radius_for_epsilon(n, p, eps).r);
        Self::new(n, h, r[0], r[1], r[2], r[3])
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.n == 0 || self.n > u32::from(MAX_WIDTH) {
            return Err(TheoryError::Width(self.n));
        }
        if self.h > self.n {
            return Err(TheoryError::HashWidth {
                h: self.h,
                n: self.n,
            });
        }
        for (name, r) in [
            ("r12", self.r12),
            ("r21", self.r21),
            ("r31", self.r31),
            ("r32", self.r32),
        ] {
            if r > self.n {
                return Err(TheoryError::Radius { name, r, n: self.n });
            }
        }
        Ok(())
    }

    fn volume(&self, r: u32) -> u128 {
        u128::from(ball_volume(self.n, r).expect("radius validated"))
    }
}

fn pow2(k: u32) -> u128 {
    1u128 << k
}

fn clamp(x: Exact) -> Exact {
    x.min(Exact::from_integer(1))
}

pub fn to_f64(x: &Exact) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn watcher_product(tp: &TheoryParams, relay_r: u32) -> Exact {
    let (n, h) = (tp.n, tp.h);
    let num = tp.volume(tp.r12) * tp.volume(tp.r21) * tp.volume(relay_r);
    let den = pow2(h + n) * pow2(h + n) * pow2(h);
    clamp(Exact::new(num, den))
}

pub fn misdetection_v1_exact(tp: &TheoryParams) -> Exact {
    watcher_product(tp, tp.r31)
}

pub fn misdetection_v2_exact(tp: &TheoryParams) -> Exact {
    watcher_product(tp, tp.r32)
}

pub fn predicted_beta_exact(tp: &TheoryParams) -> Exact {
    let (n, h) = (tp.n, tp.h);
    let r = tp.r31.min(tp.r32);
    let coverage = Exact::new(tp.volume(tp.r12), pow2(h + n)) * Exact::new(tp.volume(tp.r21), pow2(h + n));
    clamp(coverage * Exact::new(1, pow2(h)) * Exact::from_integer(tp.volume(r)))
}

/// Both peer-overhearing radii set to `n`: `min{1, V(r) / 8^h}`.
pub fn predicted_beta_no_overhear_exact(n: u32, h: u32, r31: u32, r32: u32) -> Result<Exact, TheoryError> {
    let tp = TheoryParams::new(n, h, n, n, r31, r32)?;
    let r = r31.min(r32);
    Ok(clamp(Exact::new(tp.volume(r), pow2(3 * h))))
}

/// Misdetection probability from watcher 1's side.
pub fn misdetection_v1(tp: &TheoryParams) -> f64 {
    to_f64(&misdetection_v1_exact(tp))
}

/// Misdetection probability from watcher 2's side.
pub fn misdetection_v2(tp: &TheoryParams) -> f64 {
    to_f64(&misdetection_v2_exact(tp))
}

pub fn predicted_beta(tp: &TheoryParams) -> f64 {
    to_f64(&predicted_beta_exact(tp))
}

pub fn predicted_beta_no_overhear(n: u32, h: u32, r31: u32, r32: u32) -> Result<f64, TheoryError> {
    predicted_beta_no_overhear_exact(n, h, r31, r32).map(|x| to_f64(&x))
}

/// Bound on false detection for one coverage event.
pub fn gamma_bound(eps: f64) -> f64 {
    eps.clamp(0.0, 1.0)
}

/// Per-watcher bound: the peer and relay candidate sets must both cover
/// the truth, so a union bound over the two misses gives `2ε`.
pub fn gamma_bound_per_watcher(eps: f64) -> f64 {
    (2.0 * eps).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub gamma_bound: f64,
    pub gamma_bound_per_watcher: f64,
    pub beta: f64,
    pub beta_v1: f64,
    pub beta_v2: f64,
}

impl Prediction {
    pub fn new(tp: &TheoryParams, eps: f64) -> Self {
        Self {
            gamma_bound: gamma_bound(eps),
            gamma_bound_per_watcher: gamma_bound_per_watcher(eps),
            beta: predicted_beta(tp),
            beta_v1: misdetection_v1(tp),
            beta_v2: misdetection_v2(tp),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_bound(0.01), 0.01);
        assert_eq!(gamma_bound(0.0), 0.0);
        assert_eq!(gamma_bound_per_watcher(0.01), 0.02);
        assert_eq!(gamma_bound_per_watcher(0.7), 1.0);
    }

    #[test]
    fn per_watcher_values() {
        let full = TheoryParams::uniform(8, 0, 8).unwrap();
        assert_eq!(misdetection_v1(&full), 1.0);
        assert_eq!(misdetection_v2(&full), 1.0);
        assert_eq!(predicted_beta(&full), 1.0);

        let tp = TheoryParams::uniform(8, 4, 2).unwrap();
        let v1 = misdetection_v1(&tp);
        assert_eq!(misdetection_v1_exact(&tp), Exact::new(37 * 37 * 37, 4096 * 4096 * 16));
        assert!(close(v1, 1.887e-4, 1e-3), "{v1}");

        let tp = TheoryParams::new(8, 4, 2, 2, 2, 3).unwrap();
        assert_eq!(misdetection_v2_exact(&tp), Exact::new(37 * 37 * 93, 4096 * 4096 * 16));
        assert!(close(misdetection_v2(&tp), 4.74e-4, 2e-3));

        let singleton = TheoryParams::uniform(8, 8, 0).unwrap();
        assert_eq!(misdetection_v1_exact(&singleton), Exact::new(1, 1 << 40));
    }

    #[test]
    fn beta_value() {
        let tp = TheoryParams::uniform(8, 3, 3).unwrap();
        assert_eq!(predicted_beta_exact(&tp), Exact::new(93 * 93 * 93, 2048 * 2048 * 8));
        assert!(close(predicted_beta(&tp), 2.40e-2, 5e-3));
        let tighter = TheoryParams::uniform(8, 4, 3).unwrap();
        assert!(predicted_beta(&tighter) < predicted_beta(&tp));
    }

    #[test]
    fn no_overhear_values() {
        let v = predicted_beta_no_overhear_exact(8, 4, 2, 5).unwrap();
        assert_eq!(v, Exact::new(37, 4096));
        assert!(close(to_f64(&v), 9.03e-3, 1e-3));
        assert_eq!(predicted_beta_no_overhear(8, 0, 8, 8).unwrap(), 1.0);
    }

    #[test]
    fn exact_at_widest_field() {
        let tp = TheoryParams::uniform(16, 16, 0).unwrap();
        let v = predicted_beta_exact(&tp);
        assert_eq!(*v.denom(), 1u128 << 80);
        assert!(to_f64(&v) > 0.0);
    }

    #[test]
    fn validation() {
        assert_eq!(TheoryParams::uniform(8, 9, 2), Err(TheoryError::HashWidth { h: 9, n: 8 }));
        assert!(matches!(TheoryParams::new(8, 3, 9, 0, 0, 0), Err(TheoryError::Radius { name: "r12", .. })));
        assert!(TheoryParams::uniform(17, 3, 2).is_err());
    }

    #[test]
    fn beta_shrinks_with_width_at_fixed_radius() {
        for r in 0..=3 {
            let vals: Vec<Exact> = [8u32, 10, 12, 14, 16]
                .iter()
                .map(|&n| predicted_beta_exact(&TheoryParams::uniform(n, 4, r).unwrap()))
                .collect();
            for w in vals.windows(2) {
                assert!(w[1] < w[0], "r = {r}: {vals:?}");
            }
        }
    }

    #[test]
    fn quarter_radius_does_not_shrink_with_width() {
        // V(n, n/4)^3 grows faster than 2^(2n), so the width trend reverses
        let at = |n: u32| predicted_beta(&TheoryParams::uniform(n, 4, n / 4).unwrap());
        assert!(at(12) > at(10));
        assert!(at(16) > at(14));
    }

    fn params() -> impl Strategy<Value = TheoryParams> {
        (1u32..=16).prop_flat_map(|n| {
            (Just(n), 0..=n, 0..=n, 0..=n, 0..=n, 0..=n)
                .prop_map(|(n, h, a, b, c, d)| TheoryParams::new(n, h, a, b, c, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn beta_is_min_over_watchers(tp in params()) {
            let b = predicted_beta_exact(&tp);
            prop_assert_eq!(b, misdetection_v1_exact(&tp).min(misdetection_v2_exact(&tp)));
            prop_assert!(b <= Exact::from_integer(1));
        }

        #[test]
        fn monotone_in_hash_and_radii(tp in params()) {
            let b = predicted_beta_exact(&tp);
            if tp.h < tp.n {
                let wider = TheoryParams { h: tp.h + 1, ..tp };
                prop_assert!(predicted_beta_exact(&wider) <= b);
            }
            if tp.r12 < tp.n {
                let bumped = TheoryParams { r12: tp.r12 + 1, ..tp };
                prop_assert!(predicted_beta_exact(&bumped) >= b);
            }
            if tp.r21 < tp.n {
                let bumped = TheoryParams { r21: tp.r21 + 1, ..tp };
                prop_assert!(predicted_beta_exact(&bumped) >= b);
            }
            if tp.r31 < tp.n {
                let bumped = TheoryParams { r31: tp.r31 + 1, ..tp };
                prop_assert!(predicted_beta_exact(&bumped) >= b);
            }
            if tp.r32 < tp.n {
                let bumped = TheoryParams { r32: tp.r32 + 1, ..tp };
                prop_assert!(predicted_beta_exact(&bumped) >= b);
            }
        }

        #[test]
        fn no_overhear_identity(tp in params()) {
            let full = TheoryParams { r12: tp.n, r21: tp.n, ..tp };
            prop_assert_eq!(
                predicted_beta_exact(&full),
                predicted_beta_no_overhear_exact(tp.n, tp.h, tp.r31, tp.r32).unwrap()
            );
        }
    }
}
