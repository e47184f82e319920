use l2dens::grid::BandwidthGrid;
use l2dens::io::{parse_csv, write_csv, Observations};
use l2dens::kernel::KernelSet;
use l2dens::rate::{rate_case_flags, rate_exponent, Index, Smoothness};
use l2dens::selector::{r_hat_values, select, ucal_hat_values};
use l2dens::ustat::{pair_sums, pair_sums_naive, SplitSample, StatTable};
use proptest::prelude::*;
use std::sync::OnceLock;

fn kernel(d: usize) -> &'static KernelSet {
    static K: OnceLock<Vec<KernelSet>> = OnceLock::new();
    &K.get_or_init(|| (1..=2).map(|d| KernelSet::new(2, d).unwrap()).collect())[d - 1]
}

fn sample_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=2, 21usize..80).prop_flat_map(|(d, m)| (Just(d), prop::collection::vec(-3.0f64..3.0, 2 * m * d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grid_is_a_join_semilattice(m in 21usize..3000, d in 1usize..=3) {
        let g = BandwidthGrid::new(m, d).unwrap();
        let lnm = (m as f64).ln();
        for (i, a) in g.members().iter().enumerate() {
            prop_assert!((m as f64).powi(2) * a.volume >= lnm);
            for j in 0..g.len() {
                let k = g.join(i, j);
                prop_assert_eq!(k, g.join(j, i));
                let b = &g.members()[j];
                let c = &g.members()[k];
                for axis in 0..d {
                    prop_assert_eq!(c.exponents[axis], a.exponents[axis].min(b.exponents[axis]));
                }
            }
        }
    }

    #[test]
    fn fast_sums_match_naive((d, data) in sample_strategy(), e in 0.0f64..4.0) {
        let s = SplitSample::from_rows(&data, d).unwrap();
        let h = vec![(-e).exp(); d];
        let fast = pair_sums(&s, &h, kernel(d)).unwrap();
        let slow = pair_sums_naive(&s, &h, kernel(d)).unwrap();
        let scale = slow.j_hat.max(1e-300);
        prop_assert!((fast.n_hat - slow.n_hat).abs() <= 1e-12 * scale);
        prop_assert!((fast.j_hat - slow.j_hat).abs() <= 1e-12 * scale);
        prop_assert!(fast.j_hat >= fast.n_hat.abs() * (1.0 - 1e-12));
        let swapped = pair_sums(&s.swapped(), &h, kernel(d)).unwrap();
        prop_assert!((swapped.n_hat - fast.n_hat).abs() <= 1e-12 * scale);
    }

    #[test]
    fn selection_invariants((d, data) in sample_strategy()) {
        let s = SplitSample::from_rows(&data, d).unwrap();
        let g = BandwidthGrid::new(s.m(), d).unwrap();
        let t = StatTable::build(&s, &g, kernel(d), 2.0).unwrap();
        let join = |a: usize, b: usize| g.join(a, b);
        let ucal: Vec<f64> = t.rows.iter().map(|r| r.ucal).collect();
        let n: Vec<f64> = t.rows.iter().map(|r| r.n_hat).collect();
        let uh = ucal_hat_values(&ucal, &join);
        for (a, b) in uh.iter().zip(&ucal) {
            prop_assert!(a >= b);
        }
        let r = r_hat_values(&n, &uh, &join);
        prop_assert!(r.iter().all(|v| *v >= 0.0));
        let sel = select(&t, &g).unwrap();
        let best = sel.diagnostics[sel.index].objective;
        prop_assert!(sel.diagnostics.iter().all(|dg| dg.objective >= best));
        prop_assert_eq!(sel.estimate, sel.n_hat.abs().sqrt());
    }

    #[test]
    fn exactly_one_rate_case(beta in prop::collection::vec(0.1f64..8.0, 1..5), r in 1.0f64..20.0, inf in any::<bool>()) {
        let idx = if inf { Index::Infinite } else { Index::new(r).unwrap() };
        let p = Smoothness::new(beta.clone(), vec![idx; beta.len()]).unwrap();
        prop_assert_eq!(rate_case_flags(&p).iter().filter(|f| **f).count(), 1);
        let z = rate_exponent(&p).0;
        prop_assert!(z > 0.0 && z <= 0.5);
    }

    #[test]
    fn csv_round_trip(rows in 1usize..20, dim in 1usize..4, seed in any::<u64>()) {
        let data: Vec<f64> = (0..rows * dim)
            .map(|i| f64::from_bits((seed ^ (i as u64).wrapping_mul(0x9E37_79B9)) >> 2) * 1e-300)
            .filter(|v| v.is_finite())
            .collect();
        prop_assume!(data.len() == rows * dim);
        let o = Observations { rows, dim, data };
        prop_assert_eq!(parse_csv(write_csv(&o).as_bytes(), false).unwrap(), o);
    }
}
