use proptest::prelude::*;

use urtlab_core::cogrowth::{cogrowth_rho, invert_cogrowth, lazy_from_simple, simple_from_lazy};
use urtlab_core::generators::{
    bernoulli_cluster, line_profile, line_with_decorations, singleton_profile, spine_is_line, subtree_profile,
    DecorationLaw, PercolationParams, ProfileSpec, Rooting,
};
use urtlab_core::logspace::log_sum_exp;
use urtlab_core::oracle::brute_force_distance;
use urtlab_core::rate::RateFunction;
use urtlab_core::tree::{ln_ambient_sphere, normalize, parse_tree, sphere_sizes, write_tree};
use urtlab_core::two_three::{audit_vertex, SLACK_TOL};
use urtlab_core::walk::{build_kernel, return_series};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_sum_exp_matches_direct_sum(v in prop::collection::vec(-30.0f64..30.0, 1..40)) {
        let direct: f64 = v.iter().map(|x| x.exp()).sum();
        prop_assert!((log_sum_exp(&v) - direct.ln()).abs() < 1e-12);
    }

    #[test]
    fn kernel_matches_enumeration(d in 3usize..6, n in 1usize..7) {
        let k = build_kernel(d, n).unwrap();
        let exact = brute_force_distance(d, n).unwrap();
        for (r, q) in exact.iter().enumerate() {
            prop_assert!((k.log_q(n, r).exp() - q).abs() < 1e-13);
        }
    }

    #[test]
    fn kernel_rows_are_distributions(d in 3usize..12, n in 1usize..300) {
        let k = build_kernel(d, n).unwrap();
        let row = k.row(n);
        prop_assert!((log_sum_exp(row)).abs() < 1e-12);
        prop_assert!(row.iter().all(|&v| v <= 1e-15));
        // drift (d-2)/(2d) away from the root, 1/2 at it
        let speed = (d - 2) as f64 / (2 * d) as f64;
        let at_root: f64 = (0..n).map(|j| k.log_q(j, 0).exp()).sum();
        let expected = speed * n as f64 + at_root / d as f64;
        prop_assert!((k.mean_distance(n) - expected).abs() < 1e-10 * n as f64);
    }

    #[test]
    fn rate_function_shape(d in 3usize..20, t in 0.001f64..0.999) {
        let f = RateFunction::new(d).unwrap();
        prop_assert!(f.rate_i(t).unwrap() <= 1e-12);
        prop_assert!(f.phi_second(t).unwrap() < 0.0);
        prop_assert!((f.phi(t).unwrap() - f.phi_grid(t).unwrap().value).abs() < 1e-8);
        let step = 1e-3f64.min(t / 2.0).min((1.0 - t) / 2.0);
        let mid = f.phi(t).unwrap();
        let chord = 0.5 * (f.phi(t - step).unwrap() + f.phi(t + step).unwrap());
        prop_assert!(chord <= mid + 1e-12);
    }

    #[test]
    fn cogrowth_monotone_and_invertible(d in 3usize..12, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let top = ((d - 1) as f64).ln();
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let a = cogrowth_rho(lo * top, d).unwrap();
        let b = cogrowth_rho(hi * top, d).unwrap();
        prop_assert!(a.rho_simple <= b.rho_simple + 1e-15);
        prop_assert!(a.rho_lazy >= 0.5 && b.rho_lazy <= 1.0);
        prop_assert!((simple_from_lazy(lazy_from_simple(a.rho_simple).unwrap()).unwrap() - a.rho_simple).abs() < 1e-15);
        let g = (0.5 + 0.5 * hi) * top;
        if g > 0.5 * top + 1e-6 {
            let back = invert_cogrowth(cogrowth_rho(g, d).unwrap().rho_simple, d).unwrap();
            prop_assert!((back - g).abs() < 1e-9);
        }
    }

    #[test]
    fn clusters_are_valid_windows(d in 3usize..6, p in 0.0f64..0.6, r in 1usize..8, seed in any::<u64>()) {
        let params = PercolationParams::new(d, p, r, seed);
        let w = bernoulli_cluster(&params).unwrap();
        prop_assert_eq!(&w, &bernoulli_cluster(&params).unwrap());
        for v in 0..w.len() {
            prop_assert!(w.degree(v) <= d);
        }
        let profile = sphere_sizes(&w);
        profile.validate().unwrap();
        for (k, s) in profile.ln_spheres().iter().enumerate() {
            prop_assert!(*s <= ln_ambient_sphere(d, k) + 1e-12);
        }
        prop_assert_eq!(&parse_tree(&write_tree(&w)).unwrap(), &w);
    }

    #[test]
    fn two_three_slacks_nonnegative(p in 0.05f64..0.5, l in 1usize..3, seed in any::<u64>()) {
        let kernel = build_kernel(4, 6 * l).unwrap();
        let w = bernoulli_cluster(&PercolationParams::new(4, p, 6 * l, seed)).unwrap();
        let rec = audit_vertex(&w, w.root(), l, &kernel).unwrap();
        prop_assert!(rec.slack1 >= SLACK_TOL && rec.slack2 >= SLACK_TOL);
        prop_assert!(rec.f1 > 0.0 && rec.f2 > 0.0);
    }

    #[test]
    fn return_probability_monotone_in_cluster(d in 3usize..7, n in 16usize..200) {
        let k = build_kernel(d, n).unwrap();
        let series = |p| return_series(&normalize(&p).unwrap(), &k).unwrap().log_p;
        let single = series(singleton_profile(d).unwrap());
        let line = series(line_profile(d, n).unwrap());
        let sub = series(subtree_profile(d - 1, d, n).unwrap());
        for i in 0..=n {
            prop_assert!(single[i] <= line[i] + 1e-12);
            prop_assert!(line[i] <= sub[i] + 1e-12);
            prop_assert!(sub[i] <= 1e-12);
        }
    }

    #[test]
    fn decorated_spine_is_the_line(seed in any::<u64>(), stream in 0u64..1000, half in 2usize..20) {
        let law = DecorationLaw::pendant_leaf(4, 0.6).unwrap();
        let w = line_with_decorations(&law, half, seed, stream, Rooting::Center).unwrap();
        prop_assert!(spine_is_line(&w, half));
    }

    #[test]
    fn profile_specs_round_trip(d in 3usize..10, k in 0usize..5, p in 0.0f64..1.0, r in 0usize..50, seed in any::<u64>()) {
        let specs = [
            ProfileSpec::Regular { d },
            ProfileSpec::Subtree { d, dp: 2 + k.min(d - 2) },
            ProfileSpec::Line { d },
            ProfileSpec::Single { d },
            ProfileSpec::Canopy { d, level: k },
            ProfileSpec::Bernoulli { d, p, r, seed },
        ];
        for spec in specs {
            let text = spec.to_string();
            prop_assert_eq!(text.parse::<ProfileSpec>().unwrap(), spec);
        }
    }
}
