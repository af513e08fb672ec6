use nalgebra::DMatrix;
use proptest::prelude::*;
use rauzy_spectra::cocycle::{
    log_operator_norm, lyapunov_spectrum, oseledets_frames_unchecked, rauzy_stream, return_time_stats, CocycleStep,
    WStats, MIN_OCCURRENCES,
};
use rauzy_spectra::iet::{kinds_to_string, rauzy_path, sample_iet, Permutation, RauzyWalk, StepKind};
use rauzy_spectra::matrix::IntMatrix;

fn small_matrix(m: usize, lo: i64, hi: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(lo..=hi, m * m)
}

/// Top `k` of `w` by repeatedly removing the maximum.
fn top_sum(w: &[f64], k: usize) -> f64 {
    let mut rest = w.to_vec();
    let mut total = 0.0;
    for _ in 0..k.min(w.len()) {
        let (i, &x) = rest.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        total += x;
        rest.swap_remove(i);
    }
    total
}

proptest! {
    #[test]
    fn conjugated_diagonal_exponents(p in small_matrix(3, -3, 3), d in prop::collection::vec(0.3f64..3.0, 3)) {
        let p = DMatrix::from_row_slice(3, 3, &p.iter().map(|&x| x as f64).collect::<Vec<_>>());
        let det = p.determinant();
        prop_assume!(det.abs() >= 1.0);
        let mut sorted = d.iter().map(|x| x.ln()).collect::<Vec<_>>();
        sorted.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(sorted[0] - sorted[1] > 0.1 && sorted[1] - sorted[2] > 0.1);
        let a = &p * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone())) * p.clone().try_inverse().unwrap();
        // A start flag inside an invariant subspace escapes only through rounding,
        // costing up to log(1e-16)/n per exponent.
        let n = 40_000;
        let est = lyapunov_spectrum(3, std::iter::repeat_n(Ok(CocycleStep::Dense(a)), n), n, 8).unwrap();
        for (t, s) in est.theta.iter().zip(&sorted) {
            prop_assert!((t - s).abs() < 3e-3, "theta {:?} expected {:?}", est.theta, sorted);
        }
        prop_assert!((est.sum() - d.iter().map(|x| x.ln()).sum::<f64>()).abs() < 1e-6);
    }

    #[test]
    fn rauzy_steps_have_dense_form(seed in 0u64..1000) {
        let t = sample_iet(&Permutation::reversal(4), seed).unwrap();
        let path = rauzy_path(&t, 20).unwrap();
        for s in &path.steps {
            prop_assert_eq!(CocycleStep::from_rauzy(s).to_dense(4), s.matrix(4).to_nalgebra());
        }
    }

    #[test]
    fn frames_are_equivariant(raw in prop::collection::vec(small_matrix(3, 0, 4), 6..20)) {
        let mats: Vec<DMatrix<f64>> = raw
            .iter()
            .map(|v| DMatrix::from_row_slice(3, 3, &v.iter().map(|&x| x as f64 + 1.0).collect::<Vec<_>>()))
            .collect();
        prop_assume!(mats.iter().all(|a| a.determinant().abs() > 0.5));
        let n = mats.len() / 2;
        let f = oseledets_frames_unchecked(&mats, n).unwrap();
        prop_assert!(f.e1.iter().all(|v| v.iter().all(|&x| x >= -1e-12)));
        for k in 1..=n {
            for j in 0..3 {
                let pushed = &mats[k - 1] * f.covariant[k - 1].column(j);
                let scale = (f.log_growth[k][j] - f.log_growth[k - 1][j]).exp();
                let target = f.covariant[k].column(j);
                prop_assert!((pushed.norm() - scale).abs() <= 1e-8 * scale);
                prop_assert!((pushed / scale - target).norm() < 1e-8, "level {} dir {}", k, j);
            }
        }
    }

    #[test]
    fn operator_norm_matches_svd(v in small_matrix(4, 0, 50)) {
        prop_assume!(v.iter().any(|&x| x > 0));
        let rows: Vec<Vec<i64>> = v.chunks(4).map(|c| c.to_vec()).collect();
        let a = IntMatrix::from_rows(&rows);
        let sigma = a.to_nalgebra().singular_values().max();
        prop_assert!((log_operator_norm(&a) - sigma.ln()).abs() < 1e-9);
    }

    #[test]
    fn ld_stat_uses_the_largest_values(w in prop::collection::vec(0.0f64..100.0, 1..200), delta in 0.01f64..0.5) {
        let stats = WStats { w: w.clone() };
        let n = w.len() as f64;
        let k = (delta * n).ceil() as usize;
        let expected = top_sum(&w, k) / (delta * n * (1.0 / delta).ln());
        prop_assert!((stats.ld_stat(delta) - expected).abs() <= 1e-9 * expected.max(1.0));
        prop_assert!((stats.top_mean(k) - top_sum(&w, k) / k as f64).abs() < 1e-9);
    }

    #[test]
    fn return_samples_match_naive_search(seed in 0u64..200) {
        let t = sample_iet(&Permutation::reversal(4), seed).unwrap();
        let path = rauzy_path(&t, 20_000).unwrap();
        let q = StepKind::parse_word("aab").unwrap();
        let kinds = path.kinds();
        let text = kinds_to_string(&kinds);
        let naive: Vec<usize> = (0..text.len()).filter(|&i| text[i..].starts_with("aabaab")).collect();
        match return_time_stats(&kinds, &path.lambda_log, &q) {
            Ok(stats) => {
                prop_assert_eq!(&stats.occurrences, &naive);
                let total: f64 = stats.l_samples.iter().sum();
                let span = path.lambda_log[naive[naive.len() - 1]] - path.lambda_log[naive[0]];
                prop_assert!((total - span).abs() < 1e-6 * span.max(1.0));
                prop_assert!(stats.l_samples.iter().all(|&l| l > 0.0));
            }
            Err(_) => prop_assert!(naive.len() < MIN_OCCURRENCES),
        }
    }
}

#[test]
fn rauzy_cocycle_is_symplectic_on_average() {
    let t = sample_iet(&Permutation::reversal(4), 42).unwrap();
    let n = 1_000_000;
    let est = lyapunov_spectrum(4, rauzy_stream(RauzyWalk::new(&t), n), n, 8).unwrap();
    assert!(est.sum().abs() < 1e-8, "sum {}", est.sum());
    for i in 0..2 {
        let tol = 5.0 * (est.stderr[i] + est.stderr[3 - i]) + 1e-3;
        assert!((est.theta[i] + est.theta[3 - i]).abs() < tol, "{:?}", est.theta);
    }
    assert!(est.theta[0] > est.theta[1] && est.theta[1] > 0.0);
    assert!(est.gap_ok(), "{:?} ± {:?}", est.theta, est.stderr);
}

#[test]
fn short_streams_are_rejected() {
    let a = DMatrix::<f64>::identity(2, 2);
    assert!(lyapunov_spectrum(2, std::iter::repeat_n(Ok(CocycleStep::Dense(a)), 50), 50, 8).is_err());
}

#[test]
fn w_csv_header() {
    let mut buf = Vec::new();
    WStats { w: vec![0.5, 1.5] }.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "n,W\n1,0.5\n2,1.5\n");
}
