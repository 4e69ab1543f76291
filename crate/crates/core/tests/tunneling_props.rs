use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aqo_core::tunneling::{
    amplitude_bruteforce, amplitude_by_components, amplitude_dp, barrier_profile, format_agree, parse_agree,
    random_connected, random_tree, AgreeInstance,
};
use aqo_core::Scalar;

type Q = BigRational;

fn connected(max_n: usize) -> impl Strategy<Value = AgreeInstance> {
    (2..=max_n, 0usize..=10, any::<u64>()).prop_map(|(n, extra, seed)| {
        random_connected(n, extra, &mut ChaCha8Rng::seed_from_u64(seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trees_give_power_of_two(n in 2usize..=11, seed in any::<u64>()) {
        let t = random_tree(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let a = amplitude_dp::<Q>(&t).unwrap();
        prop_assert_eq!(a.coefficient, Q::from_i64(1 << (n - 1)));
    }

    #[test]
    fn dp_matches_bruteforce(g in connected(7)) {
        prop_assert_eq!(
            amplitude_dp::<Q>(&g).unwrap().coefficient,
            amplitude_bruteforce::<Q>(&g).unwrap().coefficient
        );
    }

    #[test]
    fn coefficient_bounded_by_tree_value(g in connected(11)) {
        let n = g.n_bits();
        prop_assert!(amplitude_dp::<Q>(&g).unwrap().coefficient <= Q::from_i64(1 << (n - 1)));
    }

    #[test]
    fn adding_an_edge_never_increases(g in connected(10), i in 0usize..10, j in 0usize..10) {
        let n = g.n_bits();
        let (i, j) = (i % n, j % n);
        prop_assume!(i != j);
        let mut edges = g.edges().to_vec();
        edges.push((i.min(j), i.max(j)));
        let bigger = AgreeInstance::new(n, edges).unwrap();
        prop_assert!(amplitude_dp::<Q>(&bigger).unwrap().coefficient <= amplitude_dp::<Q>(&g).unwrap().coefficient);
    }

    #[test]
    fn float_tracks_exact(g in connected(12)) {
        let q = amplitude_dp::<Q>(&g).unwrap().coefficient.to_f64();
        let f = amplitude_dp::<f64>(&g).unwrap().coefficient;
        prop_assert!((q - f).abs() <= 1e-12 * q.abs());
    }

    #[test]
    fn text_format_round_trips(g in connected(12)) {
        let back = parse_agree(&format_agree(&g)).unwrap();
        prop_assert_eq!(back.n_bits(), g.n_bits());
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn barrier_is_symmetric(g in connected(12)) {
        let p = barrier_profile(&g).unwrap();
        let k = p.mean_e.len();
        for j in 0..k {
            prop_assert!((p.mean_e[j] - p.mean_e[k - 1 - j]).abs() < 1e-9);
        }
    }
}

#[test]
fn components_multiply() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_connected(4, 2, &mut rng);
    let b = random_connected(3, 1, &mut rng);
    let mut edges = a.edges().to_vec();
    edges.extend(b.edges().iter().map(|&(i, j)| (i + 4, j + 4)));
    let joined = AgreeInstance::new(7, edges).unwrap();
    let prod = amplitude_dp::<Q>(&a).unwrap().coefficient * amplitude_dp::<Q>(&b).unwrap().coefficient;
    assert_eq!(amplitude_by_components::<Q>(&joined).unwrap().coefficient, prod);
}
