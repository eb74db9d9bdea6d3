use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use knockoff_core::baselines::{bhq_select, two_sided_p, BhqCorrection, ZScores, ZSource};
use knockoff_core::construction::{
    construct_knockoffs, equicorrelated_s, feasibility_margin, normalize_design, row_augment, sdp_s, DesignMatrix,
    GapKind, GapVector, DEFAULT_SDP_TOL,
};
use knockoff_core::filter::GapChoice;
use knockoff_core::lasso::{lasso_path_gram, lasso_solve_gram, lasso_solve_traced, GridSpec, LambdaGrid};
use knockoff_core::linalg::{gram, max_abs_diff};
use knockoff_core::rng::{gaussian_matrix, seeded, standard_normal};
use knockoff_core::selection::threshold;
use knockoff_core::sequential::{
    binomial_ratio_expectation, fstp, one_bit_reduction, sstp, PValueSequence, SequentialResult,
};
use knockoff_core::sim::{run_experiment, write_results_csv, DesignKind, ExperimentSpec, Method, SignalLayout};
use knockoff_core::statistics::{compute_w, StatisticKind, SufficientStats, WVector};

fn w_vector() -> impl Strategy<Value = WVector> {
    let entry = prop_oneof![Just(0.0), (-4i32..=4).prop_map(f64::from), -5.0..5.0f64,];
    prop::collection::vec(entry, 1..60).prop_map(|w| WVector {
        w,
        kind: StatisticKind::LassoSignedMax,
    })
}

fn design(seed: u64, n: usize, p: usize, mix: f64) -> DesignMatrix {
    let mut rng = seeded(seed);
    let g = gaussian_matrix(&mut rng, n, p);
    let mut m = DMatrix::identity(p, p);
    for i in 0..p {
        for j in i + 1..p {
            m[(i, j)] = mix * standard_normal(&mut rng) / (p as f64).sqrt();
        }
    }
    normalize_design(&(g * m)).unwrap()
}

fn response(seed: u64, x: &DMatrix<f64>, k: usize) -> DVector<f64> {
    let mut rng = seeded(seed);
    let mut beta = DVector::zeros(x.ncols());
    for j in 0..k.min(x.ncols()) {
        beta[j] = 3.0;
    }
    x * beta + DVector::from_fn(x.nrows(), |_, _| standard_normal(&mut rng))
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|j| b.contains(j))
}

/// Classical step-up on sorted p-values, written without the library's helpers.
fn step_up_oracle(z: &[f64], q: f64) -> Vec<usize> {
    let m = z.len();
    let p: Vec<f64> = z.iter().map(|&v| two_sided_p(v)).collect();
    let mut sorted = p.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cut = None;
    for i in 1..=m {
        if sorted[i - 1] <= i as f64 * q / m as f64 {
            cut = Some(sorted[i - 1]);
        }
    }
    match cut {
        Some(c) => (0..m).filter(|&j| p[j] <= c).collect(),
        None => Vec::new(),
    }
}

fn zscores(z: Vec<f64>) -> ZScores {
    ZScores {
        z,
        sigma: 1.0,
        source: ZSource::LeastSquares,
    }
}

proptest! {
    #[test]
    fn selection_grows_with_q(w in w_vector(), q1 in 0.0..1.0f64, q2 in 0.0..1.0f64, plus: bool) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let small = threshold(&w, lo, plus).unwrap();
        let large = threshold(&w, hi, plus).unwrap();
        prop_assert!(subset(&small.selected, &large.selected));
    }

    #[test]
    fn knockoff_plus_is_more_conservative(w in w_vector(), q in 0.0..1.0f64) {
        let plain = threshold(&w, q, false).unwrap();
        let plus = threshold(&w, q, true).unwrap();
        prop_assert!(plus.threshold >= plain.threshold);
        prop_assert!(subset(&plus.selected, &plain.selected));
    }

    #[test]
    fn selection_ignores_positive_scaling(w in w_vector(), q in 0.0..1.0f64, scale in 1e-3..1e3f64, plus: bool) {
        let scaled = WVector { w: w.w.iter().map(|v| v * scale).collect(), kind: w.kind };
        prop_assert_eq!(threshold(&w, q, plus).unwrap().selected, threshold(&scaled, q, plus).unwrap().selected);
    }

    #[test]
    fn selection_matches_its_definition(w in w_vector(), q in 0.0..1.0f64, plus: bool) {
        let sel = threshold(&w, q, plus).unwrap();
        if sel.threshold.is_infinite() {
            prop_assert!(sel.selected.is_empty());
        } else {
            prop_assert!(w.w.iter().any(|v| v.abs() == sel.threshold));
            let expected: Vec<usize> = (0..w.len()).filter(|&j| w.w[j] >= sel.threshold).collect();
            prop_assert_eq!(&sel.selected, &expected);
        }
    }

    #[test]
    fn one_bit_reduction_reproduces_selection(w in w_vector(), q in 0.0..1.0f64, plus: bool) {
        let red = one_bit_reduction(&w);
        let via = red.features(&sstp(&red.seq, q, plus).unwrap());
        prop_assert_eq!(threshold(&w, q, plus).unwrap().selected, via);
    }

    #[test]
    fn log_factor_bhq_rejects_a_subset(z in prop::collection::vec(-6.0..6.0f64, 1..80), q in 0.0..1.0f64) {
        let z = zscores(z);
        let plain = bhq_select(&z, q, BhqCorrection::None).unwrap();
        let log = bhq_select(&z, q, BhqCorrection::LogFactor).unwrap();
        prop_assert!(subset(&log, &plain));
    }

    #[test]
    fn stopping_decisions_ignore_later_p_values(
        p in prop::collection::vec(0.001..1.0f64, 2..40),
        cut in any::<prop::sample::Index>(),
        seed: u64,
        c in 0.1..0.9f64,
        q in 0.05..0.95f64,
        plus: bool,
    ) {
        let m = p.len();
        let k0 = 1 + cut.index(m - 1);
        let stops: Vec<usize> = (1..=k0).collect();
        let mut shuffled = p.clone();
        let mut rng = seeded(seed);
        for i in (k0 + 1..m).rev() {
            let j = rng.random_range(k0..=i);
            shuffled.swap(i, j);
        }
        let a = PValueSequence::new(p, stops.clone(), c).unwrap();
        let b = PValueSequence::new(shuffled, stops, c).unwrap();
        let same = |x: SequentialResult, y: SequentialResult| x.k_hat == y.k_hat && x.rejected == y.rejected;
        prop_assert!(same(fstp(&a, q, plus).unwrap(), fstp(&b, q, plus).unwrap()));
        prop_assert!(same(sstp(&a, q, plus).unwrap(), sstp(&b, q, plus).unwrap()));
    }
}

#[test]
fn bhq_matches_step_up_oracle() {
    let mut rng = seeded(11);
    for _ in 0..1000 {
        let m = rng.random_range(1..=60);
        let z: Vec<f64> = (0..m)
            .map(|j| {
                if j % 3 == 0 {
                    3.0 * standard_normal(&mut rng)
                } else {
                    standard_normal(&mut rng)
                }
            })
            .collect();
        let q = rng.random_range(0.01..0.5);
        assert_eq!(
            bhq_select(&zscores(z.clone()), q, BhqCorrection::None).unwrap(),
            step_up_oracle(&z, q)
        );
    }
}

#[test]
fn binomial_expectation_matches_closed_form() {
    // i C(N,i) / (N-i+1) = C(N,i-1), so the sum telescopes to c/(1-c) (1 - c^N).
    for c in [0.1f64, 0.25, 0.5, 0.75] {
        for n in 0..=60 {
            let closed = c / (1.0 - c) * (1.0 - c.powi(n as i32));
            let e = binomial_ratio_expectation(n, c).unwrap();
            assert!(
                (e - closed).abs() <= 4.0 * f64::EPSILON * closed.max(f64::MIN_POSITIVE),
                "N = {n}, c = {c}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn warm_path_matches_cold_solves(seed: u64, mix in 0.0..2.0f64) {
        let d = design(seed, 40, 12, mix);
        let y = response(seed ^ 1, d.values(), 3);
        let g = d.gram().clone();
        let aty = d.xty(&y);
        let grid = LambdaGrid::geometric(aty.amax(), GridSpec { count: 30, ratio: 1e-2 }).unwrap();
        let path = lasso_path_gram(&g, &aty, &grid).unwrap();
        for (lambda, warm) in grid.values().iter().zip(&path) {
            let cold = lasso_solve_gram(&g, &aty, *lambda, &DVector::zeros(12)).unwrap();
            prop_assert!((warm - cold).amax() <= 1e-7, "lambda {lambda}");
        }
    }

    #[test]
    fn sweeps_never_increase_the_objective(seed: u64, mix in 0.0..2.0f64, frac in 0.01..0.9f64) {
        let d = design(seed, 40, 12, mix);
        let y = response(seed ^ 2, d.values(), 4);
        let aty = d.xty(&y);
        let start = DVector::from_fn(12, |j, _| if j % 2 == 0 { 0.5 } else { -0.3 });
        let (_, trace) = lasso_solve_traced(d.gram(), &aty, frac * aty.amax(), &start).unwrap();
        for pair in trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0));
        }
    }

    #[test]
    fn equicorrelated_gap_is_feasible(seed: u64, mix in 0.0..3.0f64) {
        let d = design(seed, 30, 10, mix);
        let gap = equicorrelated_s(d.gram()).unwrap();
        prop_assert!(feasibility_margin(d.gram(), &gap.s) >= -1e-8);
    }

    #[test]
    fn sdp_gap_dominates_equicorrelated(seed: u64, mix in 0.0..3.0f64) {
        let d = design(seed, 30, 10, mix);
        let equi = equicorrelated_s(d.gram()).unwrap();
        let sdp = sdp_s(d.gram(), DEFAULT_SDP_TOL).unwrap();
        prop_assert!(sdp.sum() >= equi.sum() - 1e-6);
        prop_assert!(feasibility_margin(d.gram(), &sdp.s) >= -1e-8);
    }

    #[test]
    fn construction_is_deterministic(seed: u64, kseed: u64) {
        let d = design(seed, 30, 10, 1.0);
        let gap = GapChoice::Sdp.solve(d.gram()).unwrap();
        let a = construct_knockoffs(&d, &gap, kseed).unwrap();
        let b = construct_knockoffs(&d, &gap, kseed).unwrap();
        prop_assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn row_augmentation_keeps_the_gram(seed: u64, n in 11usize..20) {
        let d = design(seed, n, 10, 1.0);
        let y = response(seed ^ 3, d.values(), 2);
        let (padded, yy) = row_augment(&d, &y, seed).unwrap();
        prop_assert_eq!(padded.gram(), d.gram());
        prop_assert_eq!(padded.nrows(), 20);
        prop_assert_eq!(yy.len(), 20);
        prop_assert_eq!(yy.rows(0, n), y.rows(0, n));
    }

    #[test]
    fn statistics_depend_only_on_sufficient_statistics(seed: u64) {
        let d = design(seed, 50, 8, 1.0);
        let y = response(seed ^ 4, d.values(), 3);
        let equi = equicorrelated_s(d.gram()).unwrap();
        // interior gap keeps the augmented Gram invertible for least squares
        let gap = GapVector { s: equi.s.iter().map(|v| 0.9 * v).collect(), kind: GapKind::PartialDuplicate };
        let a = construct_knockoffs(&d, &gap, seed).unwrap().matrix();
        let mut rng = seeded(seed ^ 5);
        let rotation = gaussian_matrix(&mut rng, 50, 50).qr().q();
        let base = SufficientStats::from_matrix(&a, &y).unwrap();
        let rotated = SufficientStats::from_matrix(&(&rotation * &a), &(&rotation * &y)).unwrap();
        for kind in [
            StatisticKind::InnerProductDiff,
            StatisticKind::AbsInnerProductDiff,
            StatisticKind::LeastSquaresAbsDiff,
            StatisticKind::LeastSquaresSquaredDiff,
            StatisticKind::LassoFixedLambda(1.0),
            StatisticKind::LassoSignedMax,
            StatisticKind::LassoDifference,
        ] {
            let w0 = compute_w(kind, &base, GridSpec::default()).unwrap();
            let w1 = compute_w(kind, &rotated, GridSpec::default()).unwrap();
            let dev = w0.w.iter().zip(&w1.w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(dev <= 1e-8, "{kind}: {dev}");
        }
        prop_assert!(max_abs_diff(&gram(&a), &base.gram) == 0.0);
    }
}

fn small_spec(k: usize, amplitude: f64, trials: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        n: 60,
        p: 15,
        k,
        amplitude,
        design: DesignKind::GaussianIid,
        layout: SignalLayout::RandomSigned,
        trials,
        methods: vec![
            Method::Knockoff,
            Method::KnockoffPlus,
            Method::Bhq,
            Method::BhqLog,
            Method::Permutation,
        ],
        grid: GridSpec { count: 50, ratio: 1e-2 },
        seed,
        ..ExperimentSpec::default()
    }
}

#[test]
fn trial_rates_recover_counts() {
    let run = run_experiment(&small_spec(4, 4.0, 20, 3)).unwrap();
    assert_eq!(run.rows.len(), 100);
    for r in &run.rows {
        let power = r.power.unwrap();
        let recovered = r.fdp * r.n_selected.max(1) as f64 + power * r.k as f64;
        assert!((recovered - r.n_selected as f64).abs() < 1e-9, "{r:?}");
        assert!(r.false_selected <= r.n_selected);
    }
}

#[test]
fn identical_specs_give_identical_csv() {
    let spec = small_spec(3, 3.5, 8, 17);
    let render = || {
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &[(None, run_experiment(&spec).unwrap())], None).unwrap();
        buf
    };
    assert_eq!(render(), render());
}

#[test]
fn null_experiment_has_no_power() {
    let run = run_experiment(&small_spec(0, 3.5, 5, 5)).unwrap();
    assert!(run.rows.iter().all(|r| r.power.is_none() && r.k == 0));
    assert!(run.methods.iter().all(|m| m.power.is_none()));
    let mut buf = Vec::new();
    write_results_csv(&mut buf, &[(None, run)], None).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    let power_col = header.split(',').position(|c| c == "power").unwrap();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        assert_eq!(line.split(',').nth(power_col), Some(""));
    }
}

#[test]
fn knockoff_plus_rarely_selects_under_the_global_null() {
    let spec = ExperimentSpec {
        n: 80,
        p: 20,
        methods: vec![Method::KnockoffPlus],
        ..small_spec(0, 0.0, 200, 9)
    };
    let run = run_experiment(&spec).unwrap();
    let nonempty = run.rows.iter().filter(|r| r.n_selected > 0).count() as f64 / 200.0;
    // Every selection is false here, so FDR = P(selection nonempty) <= q.
    let se = (spec.q * (1.0 - spec.q) / 200.0).sqrt();
    assert!(nonempty <= spec.q + 3.0 * se, "nonempty share {nonempty}");
}
