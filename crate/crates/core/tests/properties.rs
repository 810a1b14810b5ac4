use fracbec::asymptotics::{asymmetry, fit_power_law, random_state};
use fracbec::minimizer::{
    energy_breakdown, euler_lagrange_defect, minimize, CoupledParams, CoupledState, SolverOptions,
};
use fracbec::potentials::PotentialSpec;
use fracbec::spectral::{Field, SpectralGrid};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_layout(length in 0.5f64..500.0, log_n in 1u32..14) {
        let n = 1usize << log_n;
        let g = SpectralGrid::new(length, n).unwrap();
        prop_assert!((g.spacing() * n as f64 - length).abs() <= 1e-12 * length);
        prop_assert_eq!(g.frequencies().iter().filter(|xi| **xi == 0.0).count(), 1);
        let h = g.spacing();
        for w in g.nodes().windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!(((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
        }
    }

    #[test]
    fn field_rejects_non_finite(idx in 0usize..16, bad in prop_oneof![Just(f64::NAN), Just(f64::INFINITY)]) {
        let g = SpectralGrid::new(4.0, 16).unwrap();
        let mut values = vec![1.0; 16];
        values[idx] = bad;
        prop_assert!(Field::new(g.clone(), values).is_err());
        prop_assert!(Field::new(g, vec![1.0; 15]).is_err());
    }

    #[test]
    fn r_squared_in_unit_interval(ys in proptest::collection::vec(0.01f64..100.0, 6)) {
        let xs: Vec<f64> = (1..=6).map(|k| k as f64).collect();
        let f = fit_power_law(&xs, &ys, 0..6).unwrap();
        prop_assert!((0.0..=1.0).contains(&f.r_squared));
    }

    #[test]
    fn theorem_regime_iff_exponents_below_one(p in 0.01f64..2.99, q in 0.01f64..2.99) {
        let v = PotentialSpec::product(&[(-1.0, p), (1.0, q)]).unwrap();
        prop_assert_eq!(v.theorem_regime(), p.max(q) < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Feasibility, monotone energy and a small Euler–Lagrange defect from
    /// random starting points.
    #[test]
    fn minimizer_invariants(seed in 0u64..1000, a1 in 0.0f64..1.5, a2 in 0.0f64..1.5, beta in 0.0f64..0.5) {
        let g = SpectralGrid::new(16.0, 512).unwrap();
        let v1 = PotentialSpec::power(0.0, 0.5).unwrap();
        let v2 = PotentialSpec::product(&[(-1.0, 0.5), (1.0, 0.75)]).unwrap();
        let params = CoupledParams::new(a1, a2, beta).unwrap();
        let init = random_state(&g, seed, false).unwrap();
        let opts = SolverOptions::default();
        let r = minimize(&params, &v1, &v2, &init, &opts, 2.4693).unwrap();
        for u in [&r.state.u1, &r.state.u2] {
            prop_assert!((g.integrate_power(u.values(), 2) - 1.0).abs() <= 1e-12);
            prop_assert!(u.values().iter().all(|v| *v >= 0.0));
        }
        for w in r.energy_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-14 * w[0].abs().max(1.0));
        }
        prop_assert!(r.converged && r.residual <= opts.tolerance, "residual {}", r.residual);
        let defect = euler_lagrange_defect(&r.state, &params, &v1, &v2, (r.mu[0], r.mu[1])).unwrap();
        prop_assert!(defect[0].max(defect[1]) < 1e-5, "defect {:?}", defect);
        let b = energy_breakdown(&r.state, &params, &v1, &v2).unwrap();
        prop_assert!((b.original - b.rewritten).abs() <= 1e-12 * b.rewritten.abs().max(1.0));
    }

    /// Reflecting the initial data through the origin reflects the minimizer
    /// when the potentials are even.
    #[test]
    fn mirrored_start_gives_mirrored_minimizer(seed in 0u64..1000) {
        let g = SpectralGrid::new(8.0, 512).unwrap();
        let v = PotentialSpec::product(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let params = CoupledParams::new(1.0, 1.0, 0.3).unwrap();
        let opts = SolverOptions { tolerance: 1e-9, ..SolverOptions::default() };
        let plain = minimize(&params, &v, &v, &random_state(&g, seed, false).unwrap(), &opts, 2.4693).unwrap();
        let mirror = minimize(&params, &v, &v, &random_state(&g, seed, true).unwrap(), &opts, 2.4693).unwrap();
        prop_assert!((asymmetry(&plain.state.u1) - asymmetry(&mirror.state.u1)).abs() <= 1e-6);
        prop_assert!((plain.energy - mirror.energy).abs() <= 1e-9);
        let n = g.n_points();
        let (a, b) = (plain.state.u1.values(), mirror.state.u1.values());
        let worst = (1..n).map(|j| (a[j] - b[n - j]).abs()).fold(0.0f64, f64::max);
        prop_assert!(worst <= 1e-4, "worst {}", worst);
    }
}

#[test]
fn coupled_state_rejects_bad_mass() {
    let g = SpectralGrid::new(8.0, 256).unwrap();
    let good = CoupledState::gaussian(&g, 0.0, 1.0).unwrap();
    let doubled = good.u1.map(|v| 2.0 * v).unwrap();
    assert!(CoupledState::new(doubled, good.u2.clone()).is_err());
}
