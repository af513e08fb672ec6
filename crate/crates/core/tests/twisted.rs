use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;
use rauzy_spectra::bv::{horizontal_word, CylFunction, PathPrefix, PiecewisePoly, Profile, SubstitutionSequence};
use rauzy_spectra::substitution::{Letter, Substitution, Word};
use rauzy_spectra::twisted::{
    dioph_factors, growth_fit, is_integer_close, phi_direct, pi_product, twist_matrix, twisted_birkhoff_grid,
    BirkhoffMode, ModularOrbit,
};
use rauzy_spectra::Error;

fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * x)
}

fn word(m: usize, max: usize) -> impl Strategy<Value = Vec<Letter>> {
    prop::collection::vec(0..m as Letter, 0..max)
}

fn substitution(m: usize) -> impl Strategy<Value = Substitution> {
    prop::collection::vec(prop::collection::vec(0..m as Letter, 1..=3), m).prop_map(move |mut imgs| {
        for img in imgs.iter_mut() {
            img.extend(0..m as Letter);
        }
        Substitution::new(imgs.into_iter().map(Word::new).collect()).unwrap()
    })
}

fn tiling(v: &[Letter], s: &[f64]) -> f64 {
    v.iter().map(|&a| s[a as usize]).sum()
}

proptest! {
    #[test]
    fn phi_splits_over_concatenation(
        u in word(3, 30), v in word(3, 30), a in 0u8..3,
        s in prop::collection::vec(0.1f64..2.0, 3), omega in -3.0f64..3.0,
    ) {
        let uv: Vec<Letter> = u.iter().chain(&v).copied().collect();
        let lhs = phi_direct(&uv, a, &s, omega);
        let rhs = phi_direct(&u, a, &s, omega) + e(omega * tiling(&u, &s)) * phi_direct(&v, a, &s, omega);
        prop_assert!((lhs - rhs).norm() < 1e-10);
        let count = uv.iter().filter(|&&x| x == a).count() as f64;
        prop_assert!(lhs.norm() <= count + 1e-10);
        prop_assert!((phi_direct(&uv, a, &s, 0.0) - Complex64::new(count, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn twist_at_zero_counts_letters(x1 in substitution(3), x2 in substitution(3), s in prop::collection::vec(0.1f64..2.0, 3)) {
        let t = twist_matrix(&x1, &x2, &s, 0.0).unwrap();
        prop_assert!(is_integer_close(&t.entries, &x2.matrix().transpose(), 1e-12));
    }

    #[test]
    fn twist_matrices_compose(x1 in substitution(3), x2 in substitution(3), s in prop::collection::vec(0.1f64..2.0, 3), omega in -2.0f64..2.0) {
        let composed = Substitution::new((0..3u8).map(|b| x1.apply(x2.image(b)).unwrap()).collect()).unwrap();
        let id = Substitution::identity(3);
        let lhs = twist_matrix(&id, &composed, &s, omega).unwrap().entries;
        let rhs = twist_matrix(&x1, &x2, &s, omega).unwrap().entries * twist_matrix(&id, &x1, &s, omega).unwrap().entries;
        prop_assert!((lhs - rhs).norm() < 1e-8);
    }

    #[test]
    fn products_match_direct_sums(
        steps in prop::collection::vec(substitution(2), 1..=4),
        s in prop::collection::vec(0.1f64..2.0, 2), omega in 0.01f64..3.0,
    ) {
        let seq = SubstitutionSequence::new(steps).unwrap();
        let m = seq.arity();
        let p0 = pi_product(&seq, 0, &s, omega).unwrap();
        prop_assert!(is_integer_close(&p0, &rauzy_spectra::matrix::IntMatrix::identity(m), 0.0));
        for n in 1..=seq.len() {
            let pi = pi_product(&seq, n, &s, omega).unwrap();
            for b in 0..m {
                let w = horizontal_word(&seq, b as Letter, n, None).unwrap();
                for a in 0..m {
                    let direct = phi_direct(&w, a as Letter, &s, omega);
                    let tol = 1e-9 * w.len() as f64 * (1.0 + omega * tiling(&w, &s));
                    prop_assert!((pi[(b, a)] - direct).norm() < tol, "n {} b {} a {}", n, b, a);
                }
            }
        }
        let zero = pi_product(&seq, seq.len(), &s, 0.0).unwrap();
        prop_assert!(is_integer_close(&zero, &seq.prefix_product(seq.len()).transpose(), 1e-9));
    }

    #[test]
    fn orbit_matches_rational_arithmetic(
        steps in prop::collection::vec(substitution(3), 1..=8),
        s in prop::collection::vec(0.1f64..2.0, 3), omega in 0.01f64..3.0,
        ell in prop::collection::vec(0u64..20, 3),
    ) {
        let seq = SubstitutionSequence::new(steps).unwrap();
        let orbit = ModularOrbit::new(&seq, &s, omega, seq.len(), 4096).unwrap();
        let q = |x: f64| BigRational::from_float(x).unwrap();
        let base: Vec<BigRational> = s.iter().map(|&x| q(x) * q(omega)).collect();
        for n in 0..=seq.len() {
            let a = seq.prefix_product(n);
            let value: BigRational = (0..3)
                .map(|i| {
                    let row: BigRational = (0..3).map(|j| BigRational::from_integer(a.get(j, i).clone()) * &base[j]).sum();
                    row * BigRational::from_integer(BigInt::from(ell[i]))
                })
                .sum();
            let frac = &value - value.floor();
            prop_assert!((orbit.frac_of(n, &ell) - frac.to_f64().unwrap()).abs() < 1e-15);
            let dist = frac.to_f64().unwrap().min(1.0 - frac.to_f64().unwrap());
            prop_assert!((orbit.dist_z(n, &ell) - dist).abs() < 1e-15);
            let (k, eps) = orbit.nearest(n, &ell);
            prop_assert!(eps.abs() <= 0.5);
            let rebuilt = BigRational::from_integer(k) - &value;
            prop_assert!((rebuilt.to_f64().unwrap() + eps).abs() < 1e-12);
            for (i, f) in orbit.frac[n].iter().enumerate() {
                let mut unit = vec![0u64; 3];
                unit[i] = 1;
                prop_assert!(*f >= 0.0 && *f < 1.0);
                prop_assert!((f - orbit.frac_of(n, &unit)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn factors_stay_in_range(
        steps in prop::collection::vec(substitution(3), 1..=6),
        s in prop::collection::vec(0.1f64..2.0, 3), omega in 0.01f64..3.0, c1 in 0.01f64..0.25,
    ) {
        let seq = SubstitutionSequence::new(steps).unwrap();
        let orbit = ModularOrbit::new(&seq, &s, omega, seq.len(), 4096).unwrap();
        let returns = vec![Word::new(vec![0, 1]), Word::new(vec![2]), Word::new(vec![1, 1, 2])];
        let f = dioph_factors(&orbit, &returns, c1);
        prop_assert_eq!(f.factors.len(), seq.len() + 1);
        for x in &f.factors {
            prop_assert!(*x >= 1.0 - c1 / 4.0 - 1e-15 && *x <= 1.0);
        }
        let total = f.product(0, seq.len());
        prop_assert!((total - f.factors[..seq.len()].iter().product::<f64>()).abs() < 1e-15);
        prop_assert_eq!(f.product(2.min(seq.len()), 2.min(seq.len())), 1.0);
    }

    #[test]
    fn growth_fit_recovers_power_laws(alpha in 0.05f64..1.0, c in 0.01f64..100.0) {
        let samples: Vec<(f64, f64)> = (0..12).map(|i| {
            let r = 100.0 * 10f64.powf(i as f64 * 3.0 / 11.0);
            (r, c * r.powf(alpha))
        }).collect();
        let fit = growth_fit(&samples).unwrap();
        prop_assert!((fit.alpha - alpha).abs() < 1e-10);
        prop_assert!((fit.c1 / c - 1.0).abs() < 1e-8);
        prop_assert!(fit.residual < 1e-10);
    }
}

#[test]
fn growth_fit_rejects_thin_samples() {
    let few: Vec<(f64, f64)> = (1..=7).map(|i| (i as f64 * 100.0, 1.0)).collect();
    assert!(matches!(growth_fit(&few), Err(Error::InsufficientData(_))));
    let narrow: Vec<(f64, f64)> = (0..10).map(|i| (100.0 + i as f64, 1.0)).collect();
    assert!(matches!(growth_fit(&narrow), Err(Error::InsufficientData(_))));
    let bad: Vec<(f64, f64)> = (0..10).map(|i| (10f64.powi(i), if i == 3 { 0.0 } else { 1.0 })).collect();
    assert!(growth_fit(&bad).is_err());
}

#[test]
fn precision_budget_is_enforced() {
    let seq = SubstitutionSequence::constant(&Substitution::parse(&["12", "1"]).unwrap(), 3).unwrap();
    let err = ModularOrbit::new(&seq, &[1.0, 0.1], 1.0 / 3.0, 3, 16).unwrap_err();
    assert!(matches!(err, Error::Precision(_)));
    assert!(ModularOrbit::new(&seq, &[1.0, 0.5], 0.25, 3, 16).is_ok());
}

fn simpson(g: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
    if b <= a {
        return Complex64::zero();
    }
    let n = 2000;
    let h = (b - a) / n as f64;
    let mut acc = g(a) + g(b);
    for k in 1..n {
        acc += g(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Brute-force integral of `e^{-2πiωτ} f(h_τ y)` over `[0, r]`, Simpson on
/// each half tile so the profile kink at `u = 1/2` sits on a node.
fn brute_integral(w: &[Letter], s: &[f64], f: &CylFunction, omega: f64, r: f64) -> Complex64 {
    let mut total = Complex64::zero();
    let mut start = 0.0;
    for &a in w {
        if start >= r {
            break;
        }
        let len = s[a as usize];
        let g = |t: f64| e(omega * t) * f.coefficients[a as usize] * f.profiles[a as usize].eval((t - start) / len);
        let mid = start + len / 2.0;
        total += simpson(&g, start, mid.min(r)) + simpson(&g, mid, (start + len).min(r));
        start += len;
    }
    total
}

#[test]
fn birkhoff_integrals_agree_with_brute_force() {
    let seq = SubstitutionSequence::constant(&Substitution::parse(&["12", "1"]).unwrap(), 12).unwrap();
    let p = PathPrefix::minimal(&seq, 0, 12);
    let ramp = PiecewisePoly::new(vec![0.0, 0.5, 1.0], vec![vec![0.2, 1.0], vec![0.7, -2.0, 1.0]]).unwrap();
    let f = CylFunction::new(0, vec![1.0, -0.5], vec![Profile::Poly(ramp), Profile::Poly(PiecewisePoly::constant(1.0))])
        .unwrap();
    let s = [1.0, 0.618];
    let omega = 0.37;
    let grid = [5.0, 13.3, 40.0, 3.0];
    let vals = twisted_birkhoff_grid(&seq, &p, &f, &s, omega, &grid, BirkhoffMode::Both).unwrap();
    let w = horizontal_word(&seq, 0, 12, Some(200)).unwrap();
    for v in &vals {
        let brute = brute_integral(&w, &s, &f, omega, v.r);
        assert!((v.quadrature.unwrap() - brute).norm() < 1e-9, "R = {}", v.r);
        let snapped = brute_integral(&w, &s, &f, omega, v.r_snapped);
        assert!((v.formula.unwrap() - snapped).norm() < 1e-9);
        assert!((v.quadrature_snapped.unwrap() - snapped).norm() < 1e-9);
        assert!(v.snap_gap >= 0.0 && v.snap_gap < 1.0 + 1e-12);
    }
}

#[test]
fn higher_level_functions_use_the_level_roof() {
    let seq = SubstitutionSequence::constant(&Substitution::parse(&["12", "1"]).unwrap(), 12).unwrap();
    let p = PathPrefix::minimal(&seq, 0, 12);
    let f = CylFunction::new(2, vec![0.3, 1.0], vec![Profile::Poly(PiecewisePoly::constant(1.0)); 2]).unwrap();
    let s = [1.0, 0.618];
    let vals = twisted_birkhoff_grid(&seq, &p, &f, &s, 0.21, &[30.0, 90.0], BirkhoffMode::Both).unwrap();
    for v in &vals {
        assert!((v.formula.unwrap() - v.quadrature_snapped.unwrap()).norm() < 1e-9);
    }
    let shifted = PathPrefix::from_edges(&seq, 0, [vec![1], vec![0; 11]].concat()).unwrap();
    assert!(twisted_birkhoff_grid(&seq, &shifted, &f, &s, 0.21, &[30.0], BirkhoffMode::Both).is_err());
}
