//! Choice policies for nondeterministic points.
//!
//! The engine asks the chooser whenever more than one rule is applicable in
//! a neuron, and the register machine asks it for two-target ADD branches.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Default)]
pub enum Chooser {
    /// Always picks the first declared option. Deterministic.
    #[default]
    FirstDeclared,
    /// Uniform pseudo-random choice from an explicit seed. Replayable.
    SeededUniform(Box<ChaCha8Rng>),
}

impl Chooser {
    pub fn first_declared() -> Self {
        Chooser::FirstDeclared
    }

    pub fn seeded(seed: u64) -> Self {
        Chooser::SeededUniform(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    /// Pick an index in `0..n`. Single-option points never consume
    /// randomness, so the seeded stream only advances at real branches.
    pub fn pick(&mut self, n: usize) -> usize {
        debug_assert!(n >= 1, "chooser invoked with no options");
        match self {
            Chooser::FirstDeclared => 0,
            Chooser::SeededUniform(rng) => {
                if n <= 1 {
                    0
                } else {
                    rng.random_range(0..n)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_declared_is_constant() {
        let mut c = Chooser::first_declared();
        assert_eq!(c.pick(5), 0);
        assert_eq!(c.pick(2), 0);
    }

    #[test]
    fn seeded_replays_identically() {
        let mut a = Chooser::seeded(42);
        let mut b = Chooser::seeded(42);
        let seq_a: Vec<usize> = (0..50).map(|_| a.pick(4)).collect();
        let seq_b: Vec<usize> = (0..50).map(|_| b.pick(4)).collect();
        assert_eq!(seq_a, seq_b);
    }

    #[test]
    fn seeded_stays_in_range() {
        let mut c = Chooser::seeded(7);
        for _ in 0..200 {
            assert!(c.pick(3) < 3);
        }
    }
}
