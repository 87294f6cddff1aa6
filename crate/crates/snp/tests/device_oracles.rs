//! Device correctness against native arithmetic on randomized inputs.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snp::devices::{add_numbers, decode_train_lsb, encode_number_lsb, numbers_equal, sort_numbers};

#[test]
fn adder_matches_native_addition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let a = rng.random_range(0..1u64 << 12);
        let b = rng.random_range(0..1u64 << 12);
        assert_eq!(add_numbers(a, b), a + b, "{a} + {b}");
    }
}

#[test]
fn equality_matches_native_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let a = rng.random_range(0..1u64 << 10);
        let b = if rng.random_bool(0.5) {
            a
        } else {
            rng.random_range(0..1u64 << 10)
        };
        assert_eq!(numbers_equal(a, b), a == b, "{a} vs {b}");
    }
}

#[test]
fn sorter_matches_native_descending_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..60 {
        let n = rng.random_range(1..=6usize);
        let values: Vec<u64> = (0..n).map(|_| rng.random_range(0..=32u64)).collect();
        let mut expected = values.clone();
        expected.sort_unstable_by(|x, y| y.cmp(x));
        assert_eq!(sort_numbers(&values).unwrap(), expected, "input {values:?}");
    }
}

proptest! {
    #[test]
    fn encode_decode_inverse(n in 0u64..(1 << 16), extra in 0usize..4) {
        let width = (64 - n.leading_zeros()) as usize + extra;
        let train = encode_number_lsb(n, width).unwrap();
        prop_assert_eq!(decode_train_lsb(&train, 0).unwrap(), n);
    }

    #[test]
    fn sorter_preserves_multisets(values in proptest::collection::vec(0u64..=20, 1..=6)) {
        let sorted = sort_numbers(&values).unwrap();
        let mut a = values.clone();
        let mut b = sorted.clone();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
        prop_assert!(sorted.windows(2).all(|w| w[0] >= w[1]));
    }
}
