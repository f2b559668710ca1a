use std::collections::BTreeMap;

use aisbound::entropy::{
    conditional_entropy, exact_entropy, han_check, han_check_given, pushforward_entropy, JointTable, SeparableOutput, StateSpace,
};
use aisbound::{Level, PowerContext};
use proptest::prelude::*;

const NAMES: [&str; 4] = ["a", "b", "c", "d"];

fn table() -> impl Strategy<Value = JointTable> {
    prop::collection::vec((prop::collection::vec(0i64..3, 4), 0.01f64..1.0), 1..40).prop_map(|rows| {
        JointTable::from_weights(NAMES.iter().map(|s| s.to_string()).collect(), rows).unwrap()
    })
}

fn oracle(t: &JointTable, vars: &[&str]) -> f64 {
    let cols: Vec<usize> = vars.iter().map(|v| NAMES.iter().position(|n| n == v).unwrap()).collect();
    let mut m: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (row, &p) in t.support().iter().zip(t.mass()) {
        *m.entry(cols.iter().map(|&c| row[c]).collect()).or_default() += p;
    }
    m.values().map(|&p| -p * p.log2()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn shannon_identities(t in table()) {
        let h = |v: &[&str]| exact_entropy(&t, v).unwrap().value;
        prop_assert!((h(&["a", "b"]) - oracle(&t, &["a", "b"])).abs() <= 1e-10);
        prop_assert!((h(&["a", "b"]) - h(&["a"]) - conditional_entropy(&t, &["b"], &["a"]).unwrap()).abs() <= 1e-10);
        let abcd = h(&["a", "b", "c", "d"]);
        let chained = h(&["a"]) + conditional_entropy(&t, &["b"], &["a"]).unwrap()
            + conditional_entropy(&t, &["c"], &["a", "b"]).unwrap()
            + conditional_entropy(&t, &["d"], &["a", "b", "c"]).unwrap();
        prop_assert!((abcd - chained).abs() <= 1e-10);
        prop_assert!(conditional_entropy(&t, &["a"], &["b"]).unwrap() <= h(&["a"]) + 1e-10);
        prop_assert!(conditional_entropy(&t, &["a"], &["b", "c"]).unwrap() <= conditional_entropy(&t, &["a"], &["b"]).unwrap() + 1e-10);
        prop_assert!(han_check(&t, &["a"], &["b"], &["c"]).unwrap().holds);
        prop_assert!(han_check_given(&t, &["a"], &["b"], &["c"], &["d"]).unwrap().holds);
        prop_assert!(h(&[]) == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pushforward_matches_brute_force(
        alphabet in 2u64..7,
        cols in 1usize..4,
        tables in prop::collection::vec(prop::collection::vec(prop::option::of(prop::collection::vec(-3i64..4, 6)), 3), 1..3),
        diagonal in any::<bool>(),
    ) {
        let outputs: Vec<SeparableOutput> = tables
            .iter()
            .map(|per| SeparableOutput::new(per[..cols].iter().map(|c| c.as_ref().map(|v| v[..alphabet as usize].to_vec())).collect()))
            .collect();
        let space = if diagonal { StateSpace::Diagonal { columns: cols, alphabet } } else { StateSpace::Product { columns: cols, alphabet } };
        let fast = pushforward_entropy(&space, &outputs, 1 << 20).unwrap();
        let mut states: Vec<Vec<u64>> = vec![vec![]];
        for _ in 0..cols {
            states = states.into_iter().flat_map(|s| (0..alphabet).map(move |v| { let mut s = s.clone(); s.push(v); s })).collect();
        }
        if diagonal {
            states.retain(|s| s.iter().all(|&v| v == s[0]));
        }
        let names: Vec<String> = (0..outputs.len()).map(|i| format!("z{i}")).collect();
        let rows = states.iter().map(|s| outputs.iter().map(|o| o.eval(s)).collect::<Vec<i64>>());
        let t = JointTable::uniform(names.clone(), rows).unwrap();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        prop_assert!((fast - exact_entropy(&t, &refs).unwrap().value).abs() <= 1e-10);
    }

    #[test]
    fn uniform_signal_entropy_within_its_level(pbar in 2u64..200, n in 1i64..8, d in 1i64..5) {
        let l = Level::new(n, d);
        let ctx = PowerContext::from_pbar(pbar).unwrap();
        let b = ctx.band(l).unwrap();
        prop_assume!(b <= 1 << 16);
        let t = JointTable::uniform(vec!["x".into()], (0..b as i64).map(|x| vec![x])).unwrap();
        let h = exact_entropy(&t, &["x"]).unwrap().value;
        prop_assert!(h >= 0.0);
        prop_assert!(h / ctx.log2_pbar() <= l.as_f64() + 1e-12);
    }
}

#[test]
fn weighted_space_respects_weights() {
    let tuples = vec![vec![0u64, 1], vec![1, 1], vec![2, 0]];
    let weights = vec![0.5, 0.25, 0.25];
    let space = StateSpace::Weighted { tuples: &tuples, weights: &weights };
    let sum = SeparableOutput::new(vec![Some(vec![0, 1, 2]), Some(vec![0, 1, 2])]);
    // Sums 1, 2, 2 with masses 1/2, 1/4, 1/4.
    assert!((pushforward_entropy(&space, &[sum], 1 << 10).unwrap() - 1.0).abs() < 1e-12);
}
