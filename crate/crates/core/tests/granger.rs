mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};
use trendcause_core::influence::{granger_test, granger_values, screen_all_pairs, Correction, GrangerConfig};
use trendcause_core::stats::f_critical;
use trendcause_core::{TrendKind, TrendSeries};

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

#[test]
fn planted_lag_one_cause_is_detected() {
    let cfg = GrangerConfig::default();
    let mut hits = 0;
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = noise(&mut rng, 100);
        let e = noise(&mut rng, 100);
        let mut x = vec![0.0; 100];
        for t in 1..100 {
            x[t] = 0.9 * y[t - 1] + 0.01 * e[t];
        }
        hits += usize::from(granger_values(&x, &y, &cfg).unwrap().significant);
    }
    assert!(hits >= 190, "{hits}/200 detected");
}

#[test]
fn white_noise_rejection_rate_is_near_alpha() {
    let cfg = GrangerConfig::default();
    let mut rejections = 0;
    for seed in 0..1000 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let x = noise(&mut rng, 100);
        let y = noise(&mut rng, 100);
        rejections += usize::from(granger_values(&x, &y, &cfg).unwrap().significant);
    }
    let rate = rejections as f64 / 1000.0;
    assert!((0.03..=0.08).contains(&rate), "rate {rate}");
}

#[test]
fn zero_lag_copy_of_a_noiseless_ar_series_adds_nothing() {
    let mut x = vec![1.0, 0.5];
    for t in 2..100 {
        x.push(0.5 * x[t - 1] + 0.3 * x[t - 2]);
    }
    let fit = granger_values(&x, &x.clone(), &GrangerConfig::default()).unwrap();
    assert!(!fit.significant);
    assert!((fit.rss_restricted - fit.rss_unrestricted).abs() < 1e-12);
}

#[test]
fn f_critical_for_one_numerator_df_is_a_squared_t_quantile() {
    for d2 in [5u64, 10, 50, 100] {
        let t = StudentsT::new(0.0, 1.0, d2 as f64).unwrap();
        for alpha in [0.01, 0.05] {
            let q = t.inverse_cdf(1.0 - alpha / 2.0);
            let f = f_critical(1, d2 as usize, alpha).unwrap();
            assert!((f - q * q).abs() / (q * q) < 1e-6, "d2={d2} alpha={alpha}: {f} vs {}", q * q);
        }
    }
    assert!((f_critical(1, 10, 0.05).unwrap() - 4.9646).abs() < 1e-4);
}

#[test]
fn f_critical_with_two_numerator_df_has_a_closed_form() {
    // P(F(2, d) > v) = (1 + 2v/d)^(-d/2)
    for d2 in [2usize, 5, 10, 50, 100] {
        for alpha in [0.01f64, 0.05, 0.1] {
            let d = d2 as f64;
            let exact = d / 2.0 * (alpha.powf(-2.0 / d) - 1.0);
            let f = f_critical(2, d2, alpha).unwrap();
            assert!((f - exact).abs() / exact < 1e-6, "d2={d2} alpha={alpha}");
        }
    }
    assert!((f_critical(2, 2, 0.05).unwrap() - 19.0).abs() < 1e-8);
}

#[test]
fn f_critical_agrees_with_integrated_density() {
    for (d1, d2) in [(3usize, 7usize), (26, 70)] {
        let oracle = support::f_oracle::critical_value(d1 as f64, d2 as f64, 0.05);
        let f = f_critical(d1, d2, 0.05).unwrap();
        assert!((f - oracle).abs() / oracle < 1e-6, "{d1},{d2}: {f} vs {oracle}");
    }
}

#[test]
fn f_critical_grows_as_alpha_shrinks() {
    for d1 in [1, 2, 4, 26] {
        for d2 in [5, 10, 50, 100] {
            assert!(f_critical(d1, d2, 0.01).unwrap() > f_critical(d1, d2, 0.05).unwrap());
        }
    }
}

#[test]
fn screen_matches_pairwise_tests() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let series = |prefix: &str, kind, n: usize, rng: &mut ChaCha8Rng| -> Vec<TrendSeries> {
        (0..n)
            .map(|i| TrendSeries::new(format!("{prefix}_{i}"), kind, noise(rng, 60).iter().map(|v| v.abs()).collect()).unwrap())
            .collect()
    };
    let styles = series("style", TrendKind::Style, 6, &mut rng);
    let topics = series("topic", TrendKind::Topic, 5, &mut rng);
    let cfg = GrangerConfig::default();
    let screen = screen_all_pairs(&styles, &topics, &cfg, Correction::None).unwrap();
    let sequential: Vec<_> = styles
        .iter()
        .flat_map(|s| topics.iter().map(move |t| (s, t)))
        .map(|(s, t)| granger_test(s, t, &cfg).unwrap())
        .collect();
    assert_eq!(screen.results, sequential);
    for s in &styles {
        let listed = screen.influences_of(&s.id);
        let f: Vec<f64> = listed
            .iter()
            .map(|t| sequential.iter().find(|r| r.style_id == s.id && &r.topic_id == t).unwrap().f_value)
            .collect();
        assert!(f.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn no_topics_means_no_influences() {
    let styles = vec![TrendSeries::new("s", TrendKind::Style, vec![0.5; 20]).unwrap()];
    let screen = screen_all_pairs(&styles, &[], &GrangerConfig::default(), Correction::None).unwrap();
    assert!(screen.influences_of("s").is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unrestricted_fit_never_loses(seed in any::<u64>(), q1 in 1usize..4, q2 in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = noise(&mut rng, 50);
        let y = noise(&mut rng, 50);
        let cfg = GrangerConfig { q1, q2, ..GrangerConfig::default() };
        let fit = granger_values(&x, &y, &cfg).unwrap();
        prop_assert!(fit.rss_unrestricted <= fit.rss_restricted + 1e-9);
        prop_assert!(fit.f_value >= 0.0);
        prop_assert_eq!(fit.significant, fit.f_value > fit.f_critical);
    }

    #[test]
    fn f_value_is_invariant_to_rescaling_the_cause(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = noise(&mut rng, 80);
        let y = noise(&mut rng, 80);
        let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
        let cfg = GrangerConfig::default();
        let a = granger_values(&x, &y, &cfg).unwrap().f_value;
        let b = granger_values(&x, &scaled, &cfg).unwrap().f_value;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }
}
