use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use proptest::prelude::*;
use rauzy_spectra::iet::{
    block_substitution, find_positive_simple_loop, kinds_to_string, rauzy_class, rauzy_path, rauzy_path_partial,
    sample_iet, sample_iet_stream, word_data, Iet, Permutation, StepKind,
};
use rauzy_spectra::matrix::IntMatrix;
use rauzy_spectra::substitution::is_simple;
use rauzy_spectra::Error;

/// Class size of (4,3,2,1) from exhaustive closure.
const CLASS_SIZE_4321: usize = 7;

fn reversal4() -> Permutation {
    Permutation::reversal(4)
}

/// Step string predicted by the continued fraction of `p/q` for the
/// two-interval exchange with lengths `(p, q)`.
fn continued_fraction_steps(mut p: u64, mut q: u64) -> String {
    let mut out = String::new();
    let mut kind = 'b';
    loop {
        let (a, r) = (p / q, p % q);
        if r == 0 {
            out.extend(std::iter::repeat_n(kind, a as usize - 1));
            return out;
        }
        out.extend(std::iter::repeat_n(kind, a as usize));
        (p, q) = (q, r);
        kind = if kind == 'a' { 'b' } else { 'a' };
    }
}

#[test]
fn two_interval_paths_follow_continued_fractions() {
    let pi = Permutation::new(vec![2, 1]).unwrap();
    let mut rng = rauzy_spectra::rng::stream(11, 0);
    use rand::Rng;
    for _ in 0..50 {
        let (p, q): (u64, u64) = (rng.random_range(1..500), rng.random_range(1..500));
        let lam = vec![BigRational::from_integer(p.into()), BigRational::from_integer(q.into())];
        let t = Iet::new(&pi, lam).unwrap();
        let (path, err) = rauzy_path_partial(&t, 10_000);
        assert!(matches!(err, Some(Error::Tie { .. })), "p/q = {p}/{q} must end in a tie");
        assert_eq!(path.kinds_string(), continued_fraction_steps(p, q), "p/q = {p}/{q}");
    }
}

#[test]
fn golden_two_interval_path_is_periodic() {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let pi = Permutation::new(vec![2, 1]).unwrap();
    let t = Iet::new(&pi, vec![1.0, phi]).unwrap();
    let path = rauzy_path(&t, 20).unwrap();
    assert_eq!(path.kinds_string(), "ab".repeat(10));
}

#[test]
fn sampling_is_deterministic_and_normalized() {
    let a = sample_iet(&reversal4(), 5).unwrap();
    let b = sample_iet(&reversal4(), 5).unwrap();
    assert_eq!(a, b);
    let sum: f64 = a.lambda_by_label().iter().sum();
    assert!((sum - 1.0).abs() <= 1e-15);
    assert!(a.lambda_by_label().iter().all(|&x| x > 0.0));
    assert!(sample_iet(&Permutation::new(vec![3, 1, 2]).unwrap(), 1).is_ok());
}

#[test]
fn sampled_lengths_have_uniform_simplex_mean() {
    let n = 100_000;
    let m = 4;
    let mut mean = vec![0.0; m];
    for seed in 0..n {
        let t = sample_iet_stream(&reversal4(), seed, 9).unwrap();
        for (acc, x) in mean.iter_mut().zip(t.lambda_domain_order()) {
            *acc += x / n as f64;
        }
    }
    // Dirichlet(1,…,1): variance (m−1)/(m²(m+1)).
    let sigma = ((m - 1) as f64 / (m * m * (m + 1)) as f64 / n as f64).sqrt();
    for x in mean {
        assert!((x - 0.25).abs() < 3.0 * sigma + 1e-12, "mean {x}");
    }
}

#[test]
fn class_of_reversal() {
    let class = rauzy_class(&reversal4()).unwrap();
    assert_eq!(class.len(), CLASS_SIZE_4321);
    assert!(class.contains(&reversal4()));
    assert!(class.is_strongly_connected());
    for v in 0..class.len() {
        assert!(class.cycle_length(v, StepKind::A).is_some());
        assert!(class.cycle_length(v, StepKind::B).is_some());
    }
    let two = rauzy_class(&Permutation::new(vec![2, 1]).unwrap()).unwrap();
    assert_eq!(two.len(), 1);
    assert_eq!(two.edges[0], [0, 0]);
}

#[test]
fn positive_loop_properties() {
    let class = rauzy_class(&reversal4()).unwrap();
    let lp = find_positive_simple_loop(&class, 30).unwrap();
    assert!(is_simple(&lp.word), "{}", kinds_to_string(&lp.word));
    let (sub, prod, end) = word_data(class.start(), &lp.word).unwrap();
    assert_eq!(&end, class.start());
    assert!(prod.is_positive());
    assert_eq!(sub, lp.substitution);
    let first = sub.image(0)[0];
    assert!(sub.images().iter().all(|w| w[0] == first));
    assert_eq!(first, lp.first_letter);
}

fn arbitrary_path() -> impl Strategy<Value = (u64, usize)> {
    (0u64..10_000, 1usize..=12)
}

proptest! {
    #[test]
    fn steps_keep_a_normalized_exchange((seed, n) in arbitrary_path()) {
        let t = sample_iet(&reversal4(), seed).unwrap();
        let path = rauzy_path(&t, n).unwrap();
        for (lam, step) in path.lambdas.iter().zip(&path.steps) {
            let sum: f64 = lam.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12 && lam.iter().all(|&x| x > 0.0));
            let a = step.matrix(4);
            prop_assert_eq!(a.determinant().abs(), BigInt::one());
            let off = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|&(i, j)| i != j && a.entry_i64(i, j) != 0).count();
            prop_assert_eq!(off, 1);
        }
    }

    #[test]
    fn induced_map_is_the_first_return((seed, n) in arbitrary_path()) {
        let t = sample_iet(&reversal4(), seed).unwrap();
        let path = rauzy_path(&t, n).unwrap();
        let j = (-path.lambda_log[n]).exp();
        let mut rng = rauzy_spectra::rng::stream(seed, 77);
        use rand::Rng;
        for _ in 0..1000 {
            let x: f64 = rng.random::<f64>() * j;
            let mut y = t.apply(&x);
            let mut guard = 0;
            while y >= j {
                y = t.apply(&y);
                guard += 1;
                prop_assert!(guard < 1_000_000);
            }
            let induced = path.end.apply(&(x / j)) * j;
            prop_assert!((y - induced).abs() < 1e-10, "x {} direct {} induced {}", x, y, induced);
        }
    }

    #[test]
    fn teichmuller_time_matches_matrix_product((seed, n) in (0u64..10_000, 1usize..=40)) {
        let t = sample_iet(&reversal4(), seed).unwrap();
        let path = rauzy_path(&t, n).unwrap();
        let lengths = path.steps.iter().fold(IntMatrix::identity(4), |acc, s| acc.mul(&s.length_matrix(4)));
        let v = lengths.mul_vec_f64(path.end.lambda_by_label());
        let norm: f64 = v.iter().sum();
        prop_assert!((norm.ln() - path.lambda_log[n]).abs() <= 1e-9 * path.lambda_log[n].abs().max(1.0));
        let start = path.start.lambda_by_label();
        for (x, y) in v.iter().zip(start) {
            prop_assert!((x / norm - y).abs() < 1e-12);
        }
    }

    #[test]
    fn block_substitution_matches_steps((seed, n) in (0u64..10_000, 1usize..=30)) {
        // Exact lengths: float towers straddle once heights reach ~1e5.
        let t = sample_iet(&reversal4(), seed).unwrap().to_exact();
        let path = rauzy_path(&t, n).unwrap();
        let zeta = block_substitution(&path).unwrap();
        prop_assert_eq!(zeta.matrix().transpose(), path.matrix_product());
        prop_assert_eq!(&zeta, &path.substitution().unwrap());
        let heights = path.matrix_product().transpose().column_sums();
        for (b, h) in heights.iter().enumerate() {
            prop_assert_eq!(BigInt::from(zeta.image(b as u8).len()), h.clone());
        }
    }

    #[test]
    fn heights_link_across_concatenated_paths((seed, n1, n2) in (0u64..10_000, 1usize..=15, 1usize..=15)) {
        let t = sample_iet(&reversal4(), seed).unwrap().to_exact();
        let first = rauzy_path(&t, n1).unwrap();
        let second = rauzy_path(&first.end, n2).unwrap();
        let whole = rauzy_path(&t, n1 + n2).unwrap();
        let h1: Vec<BigInt> = block_substitution(&first).unwrap().images().iter().map(|w| BigInt::from(w.len())).collect();
        let h = block_substitution(&whole).unwrap().images().iter().map(|w| BigInt::from(w.len())).collect::<Vec<_>>();
        prop_assert_eq!(h, second.matrix_product().mul_vec(&h1));
    }
}

#[test]
fn exact_and_float_paths_agree() {
    let t = sample_iet(&reversal4(), 3).unwrap();
    let exact = rauzy_path(&t.to_exact(), 200).unwrap();
    let float = rauzy_path(&t, 200).unwrap();
    assert_eq!(exact.kinds(), float.kinds());
    // Float lengths lose relative accuracy as the renormalization expands errors.
    let x = exact.lambdas[20][0].to_f64().unwrap();
    assert!((x - float.lambdas[20][0]).abs() < 1e-6);
}

#[test]
fn ties_are_reported() {
    let pi = Permutation::new(vec![2, 1]).unwrap();
    let t = Iet::new(&pi, vec![0.5, 0.5]).unwrap();
    assert_eq!(rauzy_path(&t, 3).unwrap_err(), Error::Tie { step: 0 });
}

#[test]
fn iet_json_shape() {
    let t = Iet::new(&Permutation::new(vec![2, 1]).unwrap(), vec![0.75, 0.25]).unwrap();
    assert_eq!(serde_json::to_string(&t).unwrap(), r#"{"pi":[2,1],"lambda":[0.75,0.25]}"#);
}
