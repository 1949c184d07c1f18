use balancing_weights::balance::smd;
use balancing_weights::estimators::{hajek_estimate, weighted_arm_mean};
use balancing_weights::inference::{attach, sandwich_variance};
use balancing_weights::simulation::{
    generate, run_monte_carlo, Analysis, DgpConfig, HarnessOptions, VarianceChoice,
};
use balancing_weights::weights::{self, kish_ess};
use balancing_weights::{propensity, Dataset, FitOptions, WeightScheme};
use proptest::prelude::*;

const SCHEMES: [WeightScheme; 6] = [
    WeightScheme::Iptw,
    WeightScheme::Treated,
    WeightScheme::Overlap,
    WeightScheme::Matching,
    WeightScheme::Entropy,
    WeightScheme::Stabilized,
];

fn sample(seed: u64, n: usize, overlap: f64, het: f64) -> Dataset {
    generate(&DgpConfig::new(n, 3, overlap, het), seed).unwrap()
}

/// Same data with covariate `col` mapped to `a * x + b`.
fn rescaled(data: &Dataset, col: usize, a: f64, b: f64) -> Dataset {
    let d = data.design();
    let mut x = d.covariates().clone();
    for i in 0..x.nrows() {
        x[(i, col)] = a * x[(i, col)] + b;
    }
    Dataset::from_parts(
        x,
        d.covariate_names().to_vec(),
        d.treatment().to_vec(),
        d.arms(),
        data.outcome().to_vec(),
        data.family(),
    )
    .unwrap()
}

fn data_strategy() -> impl Strategy<Value = Dataset> {
    (any::<u64>(), 80usize..300, 0.0f64..2.5, 0.0f64..1.5)
        .prop_map(|(seed, n, overlap, het)| sample(seed, n, overlap, het))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn score_equations_hold_at_convergence(data in data_strategy()) {
        let fit = propensity::fit(data.design(), &FitOptions::default()).unwrap();
        prop_assert!(fit.converged);
        let x = fit.model_matrix(data.design());
        for j in 0..x.ncols() {
            let s: f64 = (0..data.n())
                .map(|i| (f64::from(u8::from(data.treatment()[i] == 1)) - fit.score(i, 1)) * x[(i, j)])
                .sum();
            prop_assert!(s.abs() < 1e-8, "column {} residual {}", j, s);
        }
    }

    #[test]
    fn fitted_coefficients_maximize_the_likelihood(data in data_strategy(), k in 0usize..4, h in -0.05f64..0.05) {
        prop_assume!(h.abs() > 1e-4);
        let fit = propensity::fit(data.design(), &FitOptions::default()).unwrap();
        let x = fit.model_matrix(data.design());
        let loglik = |beta: &[f64]| -> f64 {
            let e = propensity::binary_scores(&x, beta);
            data.treatment().iter().zip(&e)
                .map(|(&z, &e)| if z == 1 { e.ln() } else { (1.0 - e).ln() })
                .sum()
        };
        let beta = fit.coefficients[0].clone();
        prop_assert!((loglik(&beta) - fit.log_likelihood).abs() < 1e-8);
        let mut moved = beta.clone();
        moved[k] += h;
        prop_assert!(loglik(&moved) <= fit.log_likelihood + 1e-10);
    }

    #[test]
    fn scores_smd_and_sandwich_invariant_to_affine_rescaling(
        data in data_strategy(),
        col in 0usize..3,
        a in prop_oneof![0.01f64..100.0, -100.0f64..-0.01],
        b in -50.0f64..50.0,
    ) {
        let other = rescaled(&data, col, a, b);
        let f1 = propensity::fit(data.design(), &FitOptions::default()).unwrap();
        let f2 = propensity::fit(other.design(), &FitOptions::default()).unwrap();
        for i in 0..data.n() {
            prop_assert!((f1.score(i, 1) - f2.score(i, 1)).abs() < 1e-10);
        }
        let w1 = weights::compute_weights(&f1, data.design(), WeightScheme::Overlap).unwrap();
        let w2 = weights::compute_weights(&f2, other.design(), WeightScheme::Overlap).unwrap();
        let s1 = smd(data.design(), (1, 0), Some(&w1)).unwrap();
        let s2 = smd(other.design(), (1, 0), Some(&w2)).unwrap();
        let r1 = smd(data.design(), (1, 0), None).unwrap();
        let r2 = smd(other.design(), (1, 0), None).unwrap();
        let sign = a.signum();
        for c in 0..3 {
            let flip = if c == col { sign } else { 1.0 };
            prop_assert!((s1[c] * flip - s2[c]).abs() < 1e-8);
            prop_assert!((r1[c] * flip - r2[c]).abs() < 1e-10);
        }
        let e1 = hajek_estimate(&data, &w1, (1, 0)).unwrap();
        let e2 = hajek_estimate(&other, &w2, (1, 0)).unwrap();
        let v1 = sandwich_variance(&data, &f1, WeightScheme::Overlap, &e1).unwrap();
        let v2 = sandwich_variance(&other, &f2, WeightScheme::Overlap, &e2).unwrap();
        prop_assert!((v1.se - v2.se).abs() <= 1e-8 * v1.se.max(1.0));
    }

    #[test]
    fn arm_rescaling_leaves_estimates_and_smd_unchanged(
        data in data_strategy(),
        arm in 0usize..2,
        factor in 1e-3f64..1e3,
        scheme_idx in 0usize..6,
    ) {
        let scheme = SCHEMES[scheme_idx];
        let fit = propensity::fit(data.design(), &FitOptions::default()).unwrap();
        let w = weights::compute_weights(&fit, data.design(), scheme).unwrap();
        let scaled = w.rescaled_arm(data.design(), arm, factor);
        let a = hajek_estimate(&data, &w, (1, 0)).unwrap().point;
        let b = hajek_estimate(&data, &scaled, (1, 0)).unwrap().point;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        let s1 = smd(data.design(), (1, 0), Some(&w)).unwrap();
        let s2 = smd(data.design(), (1, 0), Some(&scaled)).unwrap();
        for (x, y) in s1.iter().zip(&s2) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn contrasts_antisymmetric_and_location_equivariant(
        data in data_strategy(),
        shift in -1e3f64..1e3,
        scheme_idx in 0usize..6,
    ) {
        let scheme = SCHEMES[scheme_idx];
        let fit = propensity::fit(data.design(), &FitOptions::default()).unwrap();
        let w = weights::compute_weights(&fit, data.design(), scheme).unwrap();
        let fwd = hajek_estimate(&data, &w, (1, 0)).unwrap().point;
        let back = hajek_estimate(&data, &w, (0, 1)).unwrap().point;
        prop_assert_eq!(fwd, -back);

        let moved = data
            .with_outcome(data.outcome().iter().map(|y| y + shift).collect())
            .unwrap();
        for arm in 0..2 {
            let m0 = weighted_arm_mean(&data, &w, arm).unwrap();
            let m1 = weighted_arm_mean(&moved, &w, arm).unwrap();
            prop_assert!((m1 - m0 - shift).abs() < 1e-12 * shift.abs().max(1.0) * 10.0);
        }
        let shifted = hajek_estimate(&moved, &w, (1, 0)).unwrap().point;
        prop_assert!((shifted - fwd).abs() < 1e-12 * shift.abs().max(1.0) * 10.0);
    }

    #[test]
    fn weight_vectors_satisfy_their_invariants(data in data_strategy(), scheme_idx in 0usize..6, alpha in 0.01f64..0.2) {
        let fit = propensity::fit(data.design(), &FitOptions::default()).unwrap();
        let mut vectors = vec![weights::compute_weights(&fit, data.design(), SCHEMES[scheme_idx]).unwrap()];
        if let Ok(t) = weights::trim(&fit, data.design(), alpha) {
            vectors.push(t);
        }
        for w in &vectors {
            for arm in 0..2 {
                let arm_w: Vec<f64> = (0..data.n())
                    .filter(|&i| data.treatment()[i] == arm && w.kept[i])
                    .map(|i| w.weights[i])
                    .collect();
                prop_assert!(arm_w.iter().sum::<f64>() > 0.0);
                let ess = kish_ess(&arm_w).unwrap();
                prop_assert!((ess - w.ess_per_arm[arm]).abs() <= 1e-9 * ess);
            }
            for i in 0..data.n() {
                prop_assert!(w.weights[i] >= 0.0 && w.weights[i].is_finite());
                if !w.kept[i] {
                    prop_assert_eq!(w.weights[i], 0.0);
                }
                if w.scheme == WeightScheme::Overlap {
                    prop_assert!(w.weights[i] <= 1.0);
                }
            }
        }
    }

    #[test]
    fn intervals_bracket_the_point(data in data_strategy(), level in 0.5f64..0.999) {
        let fit = propensity::fit(data.design(), &FitOptions::default()).unwrap();
        let w = weights::compute_weights(&fit, data.design(), WeightScheme::Overlap).unwrap();
        let mut est = hajek_estimate(&data, &w, (1, 0)).unwrap();
        let v = sandwich_variance(&data, &fit, WeightScheme::Overlap, &est).unwrap();
        attach(&mut est, &v, level).unwrap();
        let ci = est.ci.unwrap();
        prop_assert!(est.se.unwrap() >= 0.0);
        prop_assert!(ci.lower <= est.point && est.point <= ci.upper);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn harness_summary_bookkeeping(seed in any::<u64>(), overlap in 0.0f64..2.0) {
        let analyses = [
            Analysis::hajek(WeightScheme::Overlap, VarianceChoice::Sandwich),
            Analysis::hajek(WeightScheme::Iptw, VarianceChoice::None),
        ];
        let config = DgpConfig::new(150, 3, overlap, 1.0);
        let r = run_monte_carlo(&config, &analyses, &HarnessOptions::default(), 100, seed).unwrap();
        let again = run_monte_carlo(&config, &analyses, &HarnessOptions::default(), 100, seed).unwrap();
        prop_assert_eq!(&r, &again);
        for a in &r.analyses {
            prop_assert!((a.rmse.powi(2) - (a.bias.powi(2) + a.empirical_sd.powi(2))).abs() < 1e-10);
            if let Some(c) = a.coverage {
                prop_assert!((0.0..=1.0).contains(&c));
            }
        }
    }
}
