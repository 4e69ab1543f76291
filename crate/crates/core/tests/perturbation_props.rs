use num_rational::BigRational;
use proptest::prelude::*;

use aqo_core::dpll::solve_all;
use aqo_core::ec3::{clean, generate_random, BitString, Instance};
use aqo_core::perturbation::{
    correction_series, order2_solution, order4_solution, order_q_generic, order_q_generic_with, self_energy_table,
    Pruning,
};
use aqo_core::{Error, Scalar};

type Q = BigRational;

/// Cleaned random instance and one of its solutions, if any.
fn solved(seed: u64, n: usize) -> Option<(Instance, BitString)> {
    let inst = clean(&generate_random(n, (0.62 * n as f64) as usize, seed).ok()?).instance;
    if inst.n_bits() < 3 || inst.n_bits() > 12 {
        return None;
    }
    let x = solve_all(&inst, 1 << 12).ok()?.bits().next()?.clone();
    Some((inst, x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_forms_agree_with_generic(seed in any::<u64>(), n in 6usize..=14) {
        let Some((inst, x)) = solved(seed, n) else { return Ok(()) };
        let Ok(e2) = order2_solution::<Q>(&inst, &x) else { return Ok(()) };
        prop_assert_eq!(e2, order_q_generic::<Q>(&inst, &x, 2).unwrap());
        match order_q_generic::<Q>(&inst, &x, 4) {
            Ok(e4) => prop_assert_eq!(order4_solution::<Q>(&inst, &x).unwrap(), e4),
            Err(Error::DegenerateNeighbor { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn pruning_does_not_change_sums(seed in any::<u64>(), n in 6usize..=12) {
        let Some((inst, x)) = solved(seed, n) else { return Ok(()) };
        for q in [2, 4] {
            let pruned = order_q_generic_with::<Q>(&inst, &x, q, Pruning::Connected);
            let full = order_q_generic_with::<Q>(&inst, &x, q, Pruning::Exhaustive);
            if let (Ok(a), Ok(b)) = (pruned, full) {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn self_energy_table_matches_engine(seed in any::<u64>(), n in 6usize..=12) {
        let Some((inst, x)) = solved(seed, n) else { return Ok(()) };
        let Ok(series) = correction_series::<Q>(&inst, &x, 6) else { return Ok(()) };
        let [e2, e4, e6] = self_energy_table::<Q>(&inst, &x).unwrap().corrections();
        prop_assert_eq!(series.e2, e2);
        prop_assert_eq!(series.e4, e4);
        prop_assert_eq!(series.e6.unwrap(), e6);
    }

    #[test]
    fn second_order_is_negative_at_a_solution(seed in any::<u64>(), n in 6usize..=14) {
        let Some((inst, x)) = solved(seed, n) else { return Ok(()) };
        if let Ok(e2) = order2_solution::<f64>(&inst, &x) {
            prop_assert!(e2 < 0.0);
            prop_assert!(e2 >= -(inst.n_bits() as f64));
        }
    }

    #[test]
    fn float_tracks_exact(seed in any::<u64>(), n in 6usize..=12) {
        let Some((inst, x)) = solved(seed, n) else { return Ok(()) };
        let (Ok(q), Ok(f)) = (correction_series::<Q>(&inst, &x, 6), correction_series::<f64>(&inst, &x, 6)) else {
            return Ok(());
        };
        for (a, b) in [(q.e4.to_f64(), f.e4), (q.e6.unwrap().to_f64(), f.e6.unwrap())] {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
