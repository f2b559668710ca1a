use aisbound::power::{band_radices, layout_capacity};
use aisbound::{compose, decompose, part_low, part_window, pfloor, Level, LevelVector, PowerContext};
use num_bigint::BigUint;
use proptest::prelude::*;

/// Largest `b` with `b^d ≤ pbar^n`.
fn band_oracle(pbar: u64, level: Level) -> u64 {
    let (n, d) = (level.numer() as u32, level.denom() as u32);
    let target = BigUint::from(pbar).pow(n);
    let (mut lo, mut hi) = (1u64, 1u64 << 40);
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if BigUint::from(mid).pow(d) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn level() -> impl Strategy<Value = Level> {
    (1i64..=12).prop_flat_map(|d| (0..=3 * d).prop_map(move |n| Level::new(n, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn band_matches_integer_root(pbar in 2u64..2000, l in level()) {
        let ctx = PowerContext::from_pbar(pbar).unwrap();
        prop_assume!(band_oracle(pbar, l) < 1 << 39);
        prop_assert_eq!(ctx.band(l).unwrap(), band_oracle(pbar, l));
    }

    #[test]
    fn reconstruction_exhaustive(pbar in 2u64..300, a in level(), b in level()) {
        let (l1, l) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(l1 < l);
        let ctx = PowerContext::from_pbar(pbar).unwrap();
        let top = ctx.band(l).unwrap();
        prop_assume!(top <= 1 << 14);
        let lo = ctx.band(l1).unwrap() as i64;
        for x in 0..top as i64 {
            let low = part_low(x, &ctx, l1).unwrap();
            let mid = part_window(x, &ctx, l1, l).unwrap();
            prop_assert_eq!(x, lo * mid + low);
        }
    }

    #[test]
    fn ranges_and_degenerate_window(pbar in 2u64..300, a in level(), b in level(), x in 0i64..1_000_000) {
        let (l1, l2) = if a <= b { (a, b) } else { (b, a) };
        let ctx = PowerContext::from_pbar(pbar).unwrap();
        let (b1, b2) = (ctx.band(l1).unwrap(), ctx.band(l2).unwrap());
        let low = part_low(x, &ctx, l1).unwrap();
        prop_assert!(low >= 0 && (low as u64) < b1);
        let w = part_window(x, &ctx, l1, l2).unwrap();
        prop_assert!(w >= 0 && (w as u64) < b2.div_ceil(b1));
        prop_assert_eq!(part_window(x, &ctx, l1, l1).unwrap(), 0);
    }

    #[test]
    fn decompose_round_trip(pbar in 2u64..64, v in prop::collection::vec(level(), 1..4), seed in any::<u64>()) {
        let levels = LevelVector::new(v).unwrap();
        let ctx = PowerContext::from_pbar(pbar).unwrap();
        let cap = layout_capacity(&ctx, &levels).unwrap();
        prop_assume!(cap < 1 << 40);
        let radices = band_radices(&ctx, &levels).unwrap();
        let x = (seed % cap) as i64;
        let bands = decompose(x, &ctx, &levels).unwrap();
        for (b, r) in bands.iter().zip(&radices) {
            prop_assert!(*b >= 0 && (*b as u64) < *r);
        }
        prop_assert_eq!(compose(&bands, &ctx, &levels).unwrap(), x);
        prop_assert!(decompose(cap as i64, &ctx, &levels).is_err());
    }

    #[test]
    fn pfloor_is_truncation(x in -1.0e12f64..1.0e12) {
        let f = pfloor(x).unwrap();
        prop_assert_eq!(f, x.trunc() as i64);
        prop_assert_eq!(pfloor(-x).unwrap(), -f);
        if x >= 0.0 {
            prop_assert_eq!(f, x.floor() as i64);
        }
    }
}

#[test]
fn negative_signals_rejected() {
    let ctx = PowerContext::from_pbar(8).unwrap();
    assert!(part_low(-1, &ctx, Level::ONE).is_err());
    assert!(part_window(3, &ctx, Level::ONE, Level::new(1, 2)).is_err());
}
