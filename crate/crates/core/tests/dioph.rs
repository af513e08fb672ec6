use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use rauzy_spectra::bv::SubstitutionSequence;
use rauzy_spectra::dioph::{
    covering_estimate, ek_matches, ek_predict, kn_sequence, large_eps_indices, log_binomial, salem_demo, write_ek_csv,
    EKState, QuadraticReal,
};
use rauzy_spectra::substitution::{Letter, Substitution, Word};
use rauzy_spectra::twisted::ModularOrbit;
use rauzy_spectra::Error;

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn nearest(x: &BigRational) -> BigInt {
    (x + BigRational::new(1.into(), 2.into())).floor().to_integer()
}

/// `[Θ_{n+1}]_2 Θ_n^{-1}` by Gaussian elimination on `x Θ_n = row`.
fn solve_row(theta: &[[f64; 2]; 2], row: &[f64; 2]) -> [BigRational; 2] {
    // Columns of Θ give the equations x0 Θ[0][j] + x1 Θ[1][j] = row[j].
    let mut a = [[q(theta[0][0]), q(theta[1][0]), q(row[0])], [q(theta[0][1]), q(theta[1][1]), q(row[1])]];
    if a[0][0].is_zero() {
        a.swap(0, 1);
    }
    let f = &a[1][0] / &a[0][0];
    for j in 0..3 {
        let t = &a[0][j] * &f;
        a[1][j] -= t;
    }
    let x1 = &a[1][2] / &a[1][1];
    let x0 = (&a[0][2] - &a[0][1] * &x1) / &a[0][0];
    [x0, x1]
}

fn dyadic() -> impl Strategy<Value = f64> {
    (-4096i64..4096).prop_map(|x| x as f64 / 64.0)
}

fn theta() -> impl Strategy<Value = [[f64; 2]; 2]> {
    [[dyadic(), dyadic()], [dyadic(), dyadic()]]
}

proptest! {
    #[test]
    fn prediction_reproduces_constructed_sequences(
        t0 in theta(), t1 in theta(), k0 in -1000i64..1000, k1 in -1000i64..1000, m in 1.0f64..50.0,
    ) {
        let det = t0[0][0] * t0[1][1] - t0[0][1] * t0[1][0];
        prop_assume!(det.abs() > 1e-3);
        let x = solve_row(&t0, &t1[1]);
        let exact = &x[0] * BigRational::from_integer(k0.into()) + &x[1] * BigRational::from_integer(k1.into());
        let k2 = nearest(&exact);
        let frac = (&exact - BigRational::from_integer(k2.clone())).abs();
        prop_assume!(frac < BigRational::new(49.into(), 100.into()));
        let ks = vec![BigInt::from(k0), BigInt::from(k1), k2.clone()];
        let state = EKState::from_parts(ks, vec![0.0; 3], vec![t0, t1], vec![m]).unwrap();
        let (pred, branches) = ek_predict(&state, 0).unwrap();
        prop_assert_eq!(&pred, &k2);
        prop_assert_eq!(branches, BigInt::from(2 * m.ceil() as i64 + 1));
        prop_assert!(ek_matches(&state, 0).unwrap());
        let mut off = state.clone();
        off.k[2] += 1;
        prop_assert!(!ek_matches(&off, 0).unwrap());
    }

    #[test]
    fn nearest_integers_rebuild_lengths(
        raw in prop::collection::vec(prop::collection::vec(prop::collection::vec(0u8..2, 1..=3), 2), 1..=5),
        s in prop::collection::vec(0.1f64..2.0, 2), omega in 0.01f64..3.0, v in prop::collection::vec(0u8..2, 1..4),
    ) {
        let steps: Vec<Substitution> = raw.into_iter().map(|imgs| Substitution::new(imgs.into_iter().map(Word::new).collect()).unwrap()).collect();
        let seq = SubstitutionSequence::new(steps).unwrap();
        let orbit = ModularOrbit::new(&seq, &s, omega, seq.len(), 4096).unwrap();
        let w = Word::new(v);
        let words: Vec<&Word> = vec![&w; seq.len() + 1];
        let (k, eps) = kn_sequence(&orbit, &words).unwrap();
        for n in 0..=seq.len() {
            let image = seq.apply_range(1, n, &w).unwrap();
            let len: f64 = image.iter().map(|&a: &Letter| s[a as usize]).sum();
            let total = k[n].to_f64().unwrap() + eps[n];
            prop_assert!((total - omega * len).abs() < 1e-9 * (1.0 + omega * len));
            prop_assert!(eps[n].abs() <= 0.5);
        }
        prop_assert!(kn_sequence(&orbit, &vec![&w; seq.len() + 2]).is_err());
    }

    #[test]
    fn binomial_sums_obey_the_entropy_bound(n in 10usize..2000, delta in 0.001f64..0.36) {
        let w = vec![0.0; n + 1];
        let c = covering_estimate(&w, n, delta, 1.0, 1.0, None).unwrap();
        prop_assert!(c.log_binomial <= c.stirling_bound + 1e-9);
        prop_assert!(c.log_count >= c.log_binomial);
    }

    #[test]
    fn rational_salem_sequences_match_exact_arithmetic(p in 2i64..7, d in 1i64..4, a_num in 1i64..20, a_den in 1i64..9) {
        prop_assume!(p > d);
        let lambda = BigRational::new(p.into(), d.into());
        let alpha = BigRational::new(a_num.into(), a_den.into());
        let res = salem_demo(&QuadraticReal::rational(lambda.clone()), &QuadraticReal::rational(alpha.clone()), 40, 4096).unwrap();
        let mut x = alpha;
        for n in 0..=40 {
            let exact_k = nearest(&x);
            let diff = &res.k[n] - &exact_k;
            prop_assert!(diff.abs() <= BigInt::one(), "n {}", n);
            if diff.is_zero() {
                let e = (&x - BigRational::from_integer(exact_k)).to_f64().unwrap();
                prop_assert!((res.eps[n] - e).abs() < 1e-12);
            }
            x *= &lambda;
        }
    }
}

#[test]
fn ek_state_lengths_are_checked() {
    let k = vec![BigInt::zero(); 3];
    let t = [[1.0, 0.0], [0.0, 1.0]];
    assert!(EKState::from_parts(k.clone(), vec![0.0; 3], vec![t], vec![1.0]).is_err());
    assert!(EKState::from_parts(k.clone(), vec![0.0; 3], vec![t, t], vec![]).is_err());
    let state = EKState::from_parts(k, vec![0.0; 3], vec![t, t], vec![2.0]).unwrap();
    assert_eq!(state.rho_n, vec![0.125]);
    assert!(matches!(ek_predict(&state, 1), Err(Error::OutOfRange(_))));
    let mut buf = Vec::new();
    write_ek_csv(&state, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,K_n,eps_n,rho_n,M_n,predicted_K,match_flag");
    assert_eq!(text.lines().nth(3).unwrap(), "2,0,0,,,0,1");
}

#[test]
fn hypothesis_needs_small_errors_on_three_levels() {
    let t = [[1.0, 0.0], [0.0, 1.0]];
    let k = vec![BigInt::zero(); 4];
    let mut state = EKState::from_parts(k, vec![0.01; 4], vec![t; 3], vec![2.0, 2.0]).unwrap();
    assert!(state.hypothesis_holds(0, 4.0));
    assert!(!state.hypothesis_holds(2, 4.0));
    state.eps[2] = 0.2;
    assert!(!state.hypothesis_holds(0, 4.0));
    assert!(state.hypothesis_holds(1, 4.0) == (state.eps[1..=3].iter().all(|e| e.abs() < 0.125)));
}

#[test]
fn pisot_errors_decay_and_rationals_do_not() {
    let silver: QuadraticReal = "1+sqrt2".parse().unwrap();
    let r = salem_demo(&silver, &"1".parse().unwrap(), 60, 4096).unwrap();
    assert!(r.eps[60].abs() < 1e-20);
    assert!(large_eps_indices(&r, 0.1).iter().all(|&n| n < 5));
    let half = salem_demo(&"3/2".parse().unwrap(), &"1".parse().unwrap(), 60, 4096).unwrap();
    assert!(large_eps_indices(&half, 0.1).len() > 20);
    assert!(matches!(salem_demo(&silver, &"1".parse().unwrap(), 2000, 512), Err(Error::Precision(_))));
    assert!("1,2".parse::<QuadraticReal>().is_err());
    assert!("1/0".parse::<QuadraticReal>().is_err());
    assert_eq!("2,1/3,7".parse::<QuadraticReal>().unwrap().d, 7);
}

#[test]
fn log_binomial_matches_exact_values() {
    for (n, k) in [(10usize, 3usize), (50, 25), (200, 7), (1000, 999)] {
        let mut exact = BigInt::one();
        for i in 0..k {
            exact = exact * BigInt::from(n - i) / BigInt::from(i + 1);
        }
        let ln = exact.to_f64().unwrap().ln();
        assert!((log_binomial(n, k) - ln).abs() < 1e-9 * ln.max(1.0), "C({n},{k})");
    }
    assert!(covering_estimate(&[0.0; 5], 4, 0.5, 1.0, 1.0, None).is_err());
    assert!(covering_estimate(&[0.0; 3], 4, 0.1, 1.0, 1.0, None).is_err());
}
