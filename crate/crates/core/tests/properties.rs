use dpnls::nonlinearity::{beta_star, mu_star, roots, Order};
use dpnls::variational::theta;
use dpnls::ProblemParams;
use proptest::prelude::*;

fn exponents() -> impl Strategy<Value = (f64, f64, u32)> {
    (1.05f64..6.0, 0.1f64..5.0, 2u32..8).prop_map(|(q, gap, d)| (q + gap, q, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn double_root_at_mu_star((p, q, d) in exponents()) {
        let prm = ProblemParams::double_power_relaxed(p, q, d, mu_star(p, q)).unwrap();
        let b = beta_star(p, q);
        let scale = b.powf(q + 1.0);
        prop_assert!(prm.eval(b, Order::Value).unwrap().abs() <= 1e-13 * b.powf(q));
        prop_assert!(prm.eval(b, Order::Primitive).unwrap().abs() <= 1e-13 * scale);
    }

    #[test]
    fn roots_are_ordered_zeros((p, q, d) in exponents(), frac in 0.01f64..0.99) {
        let prm = ProblemParams::double_power(p, q, d, frac * mu_star(p, q)).unwrap();
        let r = roots(&prm).unwrap();
        prop_assert!(0.0 < r.alpha_mu && r.alpha_mu < r.beta_mu);
        for x in [r.alpha_mu, r.beta_mu] {
            prop_assert!(prm.g(x).abs() <= 1e-12 * prm.mu * x);
        }
        let eta = r.eta_mu.unwrap();
        prop_assert!(r.alpha_mu < eta && eta < r.beta_mu);
        prop_assert!(prm.big_g(eta).abs() <= 1e-12 * prm.mu * eta * eta);
    }

    #[test]
    fn interpolation_exponent_in_unit_interval((p, q, d) in exponents()) {
        let crit = 1.0 + 4.0 / d as f64;
        prop_assume!(q >= crit);
        let th = theta(p, q, d);
        prop_assert!((0.0..1.0).contains(&th));
    }
}
