use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use malab::functions::FieldSpec;
use malab::harness::exponents::{alpha0, conjugate, sobolev_limit, validate_p, validate_q};
use malab::harness::spread;
use malab::io::{field_from_str, field_to_string};
use malab::potential::Sym2;
use malab::section::section;
use malab::{AnalyticPotential, ConvexDomain, ConvexPotential, Point};

fn skewed() -> &'static ConvexPotential {
    static P: OnceLock<ConvexPotential> = OnceLock::new();
    P.get_or_init(|| {
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 96, 32).unwrap());
        ConvexPotential::analytic(AnalyticPotential::quadratic(Sym2::new(1.5, 0.3, 0.8)), d, None).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sections_nest_in_height(r in 0.0..0.5f64, a in 0.0..6.28f64, t1 in 0.005..0.3f64, dt in 0.0..0.3f64) {
        let p = skewed();
        let x = Point::new(r * a.cos(), r * a.sin());
        let lo = section(p, x, t1).unwrap();
        let hi = section(p, x, t1 + dt).unwrap();
        prop_assert!(lo.mask.iter().zip(&hi.mask).all(|(&l, &h)| !l || h));
        prop_assert!(lo.count <= hi.count);
        prop_assert!(lo.volume <= hi.volume + 1e-12);
    }

    #[test]
    fn field_text_round_trip(seed in 0u64..1000, mesh in 4usize..24) {
        let d = ConvexDomain::disk(Point::zeros(), 1.0, 32, mesh).unwrap();
        let f = FieldSpec::fourier(seed, 3, 0.7, 0.1).sample(d.grid(), d.mask());
        let back = field_from_str(&field_to_string(&f)).unwrap();
        prop_assert_eq!(&back.grid, &f.grid);
        for (a, b) in f.values.iter().zip(&back.values) {
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn integrability_gate_is_the_sobolev_limit(q in 1.0001..2.0f64, s in 0.0..1.0f64) {
        prop_assert!(validate_q(q, 2.0).is_ok());
        let lim = 2.0 * q / (2.0 - q);
        prop_assert_eq!(sobolev_limit(q, 2.0), lim);
        let p = 1.0 + s * (lim - 1.0);
        prop_assert_eq!(validate_p(p, q, 2.0).is_ok(), p < lim);
        prop_assert!(validate_p(lim, q, 2.0).is_err());
        prop_assert!(validate_p(lim * (1.0 + s), q, 2.0).is_err());
    }

    #[test]
    fn conjugate_and_alpha0_relations(q in 1.0001..2.0f64, alpha in 0.001..0.999f64) {
        let qp = conjugate(q, 2.0).unwrap();
        prop_assert!((1.0 / q + 1.0 / qp - 1.0).abs() < 1e-12);
        let a0 = alpha0(alpha, q, 2.0);
        prop_assert!(a0 <= alpha && a0 <= 0.375 * (2.0 - 2.0 / q));
        prop_assert!(a0 == alpha || a0 == 0.375 * (2.0 - 2.0 / q));
    }

    #[test]
    fn spread_is_scale_free(v in prop::collection::vec(0.1..10.0f64, 1..8), c in 0.01..100.0f64) {
        let s = spread(&v);
        prop_assert!(s >= 0.0);
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        prop_assert!((spread(&scaled) - s).abs() <= 1e-12 * (1.0 + s));
    }
}
