use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use momap::adhm::{adhm_residuals, ADHMData};
use momap::cyclic::{xi_elementary, BElement};
use momap::fock::algebra::gaussian;
use momap::fock::{build_truncation, normal_order, Letter, ModuleKind, Word};
use momap::moment::{king_residual, HermitianMetricFamily, KahlerData};
use momap::numerics::{random_complex, random_hermitian};
use momap::quiver::{random_representation, DimensionVector, Quiver, StabilityParams};

fn word_strategy(n: usize) -> impl Strategy<Value = Word> {
    (
        prop::collection::vec((0..n, any::<bool>()), 0..=8),
        -3i64..=3,
        -3i64..=3,
    )
        .prop_map(move |(letters, re, im)| {
            let letters = letters.into_iter().map(|(index, star)| Letter { index, star }).collect();
            Word::new(n, letters, gaussian(re, im)).unwrap()
        })
}

fn two_loop_quiver() -> Arc<Quiver> {
    Arc::new(
        Quiver::new(
            ["x", "y"],
            vec![
                ("p".into(), "x".into(), "y".into()),
                ("q".into(), "y".into(), "x".into()),
                ("l".into(), "x".into(), "x".into()),
            ],
        )
        .unwrap(),
    )
}

proptest! {
    #[test]
    fn normal_order_is_multiplicative(w1 in word_strategy(2), w2 in word_strategy(2)) {
        let lhs = normal_order(&[w1.concat(&w2)]).unwrap();
        let rhs = normal_order(std::slice::from_ref(&w1)).unwrap().mul(&normal_order(&[w2]).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn normal_order_commutes_with_star(w in word_strategy(3)) {
        let lhs = normal_order(&[w.star()]).unwrap();
        let rhs = normal_order(&[w]).unwrap().star();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn king_trace_is_fixed_by_the_parameters(
        dx in 0usize..=3, dy in 1usize..=3, seed in any::<u64>(), e in -2.0f64..2.0
    ) {
        let q = two_loop_quiver();
        let d = DimensionVector::new(&q, vec![dx, dy]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = HermitianMetricFamily::from_log(&[random_hermitian(dx, &mut rng), random_hermitian(dy, &mut rng)]).unwrap();
        let eta = StabilityParams::new(vec![e, 0.5]).unwrap();
        let res = king_residual(&random_representation(&q, &d, seed), &h, &eta, &KahlerData::uniform(&q)).unwrap();
        let expected = -(e * dx as f64 + 0.5 * dy as f64);
        prop_assert!((res.trace_sum - expected).abs() < 1e-9 * (1.0 + res.sup_norm));
    }

    #[test]
    fn adhm_trace_identity(n in 1usize..=4, k in 1usize..=3, seed in any::<u64>(), eta in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = ADHMData::new(
            random_complex(n, n, &mut rng),
            random_complex(n, n, &mut rng),
            random_complex(n, k, &mut rng),
            random_complex(k, n, &mut rng),
        ).unwrap();
        let res = adhm_residuals(&d, eta).unwrap();
        prop_assert!(res.trace_deviation < 1e-12);
        let (rep, params) = d.to_representation(eta).unwrap();
        let king = king_residual(&rep, &HermitianMetricFamily::identity(rep.dims()), &params, &KahlerData::uniform(rep.quiver())).unwrap();
        prop_assert!(king.trace_sum.abs() < 1e-10);
    }

    #[test]
    fn xi_is_cyclic(seed in any::<u64>(), w0 in 0.1f64..3.0) {
        let q = two_loop_quiver();
        let eta = StabilityParams::new(vec![0.3, -0.7]).unwrap();
        let w = KahlerData::new(&q, vec![w0, 1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<BElement> = (0..3).map(|_| BElement::random(&q, &mut rng)).collect();
        let x = xi_elementary(&q, [&b[0], &b[1], &b[2]], &eta, &w);
        let y = xi_elementary(&q, [&b[2], &b[0], &b[1]], &eta, &w);
        prop_assert!((x - y).norm() < 1e-12 * (1.0 + x.norm()));
    }

    #[test]
    fn truncation_basis_is_closed_in_the_module(
        gens in prop::collection::vec(prop::collection::vec(0u32..=2, 2), 1..=3), cap in 4u32..=7
    ) {
        let t = build_truncation(2, ModuleKind::Ideal(gens.clone()), cap).unwrap();
        for (s, m) in t.basis().iter().enumerate() {
            prop_assert!(gens.iter().any(|g| g[0] <= m[0] && g[1] <= m[1]));
            for i in 0..2 {
                if let Some(u) = t.up(s, i) {
                    prop_assert_eq!(t.down(u, i), Some(s));
                }
            }
        }
    }
}
