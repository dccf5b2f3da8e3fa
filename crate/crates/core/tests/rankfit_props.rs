use proptest::prelude::*;

use spendlens::rankfit::{davies_test, fit_power, segmented_path, select_segments, SegmentOptions};
use spendlens::synth::{generate_points, Family, SynthSpec};

fn noisy_series() -> impl Strategy<Value = Vec<f64>> {
    (
        30usize..200,
        -2.0f64..-0.2,
        -2.0f64..-0.2,
        0.2f64..0.8,
        0.02f64..0.3,
        any::<u64>(),
    )
        .prop_map(|(n, s1, s2, frac, sigma, seed)| {
            let spec = SynthSpec {
                family: Family::Segmented {
                    y0: 1000.0,
                    slopes: vec![s1, s2],
                    breakpoints: vec![(n as f64 * frac).round().max(2.0)],
                },
                n,
                noise_sigma: sigma,
                seed,
            };
            generate_points::<f64>(&spec).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn scaling_values_shifts_intercepts_only(v in noisy_series(), log_s in -3.0f64..3.0) {
        let s = 10f64.powf(log_s);
        let scaled: Vec<f64> = v.iter().map(|x| x * s).collect();
        let opts = SegmentOptions::default();
        let a = select_segments(&v, 2, opts).unwrap();
        let b = select_segments(&scaled, 2, opts).unwrap();
        prop_assert_eq!(a.k, b.k);
        prop_assert_eq!(&a.split_indices, &b.split_indices);
        for (x, y) in a.breakpoints.iter().zip(&b.breakpoints) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let shift = s.log10();
        for (x, y) in a.segments.iter().zip(&b.segments) {
            prop_assert!((x.slope - y.slope).abs() < 1e-8);
            prop_assert!((x.intercept + shift - y.intercept).abs() < 1e-8);
        }
        let pa = fit_power(&v).unwrap();
        let pb = fit_power(&scaled).unwrap();
        prop_assert!((pa.beta - pb.beta).abs() < 1e-9);
    }

    #[test]
    fn davies_bounded_and_scale_free(v in noisy_series(), log_s in -3.0f64..3.0, k in 3usize..12) {
        let s = 10f64.powf(log_s);
        let scaled: Vec<f64> = v.iter().map(|x| x * s).collect();
        let a = davies_test(&v, k).unwrap();
        let b = davies_test(&scaled, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.p_bound));
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-6 * a.statistic.abs().max(1.0));
    }

    #[test]
    fn sse_nested_and_breaks_continuous(v in noisy_series()) {
        let path = segmented_path(&v, 2, SegmentOptions::default()).unwrap();
        for w in path.windows(2) {
            prop_assert!(w[1].sse <= w[0].sse * (1.0 + 1e-12) + 1e-12);
        }
        for fit in &path {
            for (i, bp) in fit.breakpoints.iter().enumerate() {
                let gap = fit.segments[i].at(*bp) - fit.segments[i + 1].at(*bp);
                prop_assert!(gap.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn power_recovery_exact(n in 3usize..500, log_y0 in -2.0f64..6.0, beta in -3.0f64..-0.05) {
        let v: Vec<f64> = (1..=n).map(|r| 10f64.powf(log_y0) * (r as f64).powf(beta)).collect();
        let fit = fit_power(&v).unwrap();
        prop_assert!((fit.beta - beta).abs() < 1e-9);
        prop_assert!((fit.log_y0 - log_y0).abs() < 1e-9);
    }
}
