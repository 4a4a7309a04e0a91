//! Deterministic pseudo-random number generation.
//!
//! A 31-bit linear congruential generator drives all sample and offset draws,
//! so synthesis is bit-exact across platforms. Seed derivation goes through an
//! avalanche mixer: deriving seeds from nearby inputs (block coordinates,
//! frame indices) with the raw LCG leaves lattice correlations between
//! neighbouring blocks that are visible in the synthesized grain statistics.

/// LCG multiplier.
pub const LCG_MULTIPLIER: u32 = 1_103_515_245;
/// LCG increment.
pub const LCG_INCREMENT: u32 = 12_345;
/// State is kept modulo 2^31.
pub const LCG_MODULUS_BITS: u32 = 31;

const STATE_MASK: u32 = (1 << LCG_MODULUS_BITS) - 1;

/// 31-bit linear congruential generator:
/// `state' = (1103515245 * state + 12345) mod 2^31`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prng {
    state: u32,
}

impl Prng {
    pub fn new(seed: u32) -> Self {
        Prng {
            state: seed & STATE_MASK,
        }
    }

    /// Advances the generator and returns the new 31-bit state.
    #[inline]
    pub fn next_state(&mut self) -> u32 {
        self.state = (LCG_MULTIPLIER
            .wrapping_mul(self.state)
            .wrapping_add(LCG_INCREMENT))
            & STATE_MASK;
        self.state
    }

    /// One draw mapped to [0, 255] via bits 16..24 of the state.
    #[inline]
    pub fn next_byte(&mut self) -> u32 {
        (self.next_state() >> 16) & 0xFF
    }

    /// One draw reduced modulo `n` (n > 0).
    #[inline]
    pub fn next_mod(&mut self, n: u32) -> u32 {
        self.next_state() % n
    }
}

/// One LCG step applied to a raw seed value.
#[inline]
pub fn lcg_step(state: u32) -> u32 {
    (LCG_MULTIPLIER
        .wrapping_mul(state & STATE_MASK)
        .wrapping_add(LCG_INCREMENT))
        & STATE_MASK
}

/// 32-bit avalanche mixer (splitmix-style finalizer).
#[inline]
fn mix32(mut x: u32) -> u32 {
    x ^= x >> 16;
    x = x.wrapping_mul(0x7FEB_352D);
    x ^= x >> 15;
    x = x.wrapping_mul(0x846C_A68B);
    x ^= x >> 16;
    x
}

/// Derives an independent 31-bit seed from a master seed and a coordinate
/// pair (cutoff pair for pattern generation, block coordinates for offsets).
#[inline]
pub fn derive_seed(master: u32, a: u32, b: u32) -> u32 {
    let key = mix32(a.wrapping_mul(0x9E37_79B9) ^ b.wrapping_mul(0x85EB_CA6B));
    mix32(master ^ key) & STATE_MASK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcg_sequence_is_fixed() {
        let mut p = Prng::new(1);
        assert_eq!(p.next_state(), (1_103_515_245u64 + 12_345) as u32 & 0x7FFF_FFFF);
        // Two generators from the same seed agree.
        let mut a = Prng::new(42);
        let mut b = Prng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_state(), b.next_state());
        }
    }

    #[test]
    fn state_stays_31_bit() {
        let mut p = Prng::new(u32::MAX);
        for _ in 0..1000 {
            assert!(p.next_state() < (1 << 31));
        }
    }

    #[test]
    fn derived_seeds_decorrelate_neighbours() {
        // Offsets drawn for adjacent block coordinates must not be
        // linearly related.
        let n = 64;
        let mut xs = Vec::new();
        for by in 0..n {
            for bx in 0..n {
                let mut p = Prng::new(derive_seed(1, bx, by));
                xs.push(p.next_mod(57) as f64);
            }
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / xs.len() as f64;
        let mut cov = 0.0;
        let mut cnt = 0.0;
        for by in 0..n as usize {
            for bx in 0..n as usize - 1 {
                cov += (xs[by * n as usize + bx] - mean) * (xs[by * n as usize + bx + 1] - mean);
                cnt += 1.0;
            }
        }
        let corr = cov / cnt / var;
        assert!(corr.abs() < 0.05, "adjacent-block offset correlation {corr}");
    }

    #[test]
    fn derive_seed_differs_per_coordinate() {
        let s00 = derive_seed(1, 0, 0);
        let s01 = derive_seed(1, 0, 1);
        let s10 = derive_seed(1, 1, 0);
        assert_ne!(s00, s01);
        assert_ne!(s00, s10);
        assert_ne!(s01, s10);
    }
}
