use std::f64::consts::PI;

use proptest::prelude::*;
use rauzy_spectra::bv::{CylFunction, PathPrefix, SubstitutionSequence};
use rauzy_spectra::spectral::{autocorr_spectrum, default_r_grid, geometric_grid, local_bound, BOUND_RADII};
use rauzy_spectra::substitution::Substitution;
use rauzy_spectra::Error;

proptest! {
    #[test]
    fn local_bound_scales_as_a_power(c1 in 0.01f64..10.0, alpha in 0.01f64..0.99, r0 in 1.0f64..1e4, t in 0.01f64..1.0) {
        let r_max = 1.0 / (2.0 * r0);
        let r = t * r_max;
        let v = local_bound(c1, alpha, r0, r).unwrap();
        let expected = PI * PI * 2f64.powf(-2.0 * alpha) * c1 * c1 * r.powf(2.0 - 2.0 * alpha);
        prop_assert!((v - expected).abs() <= 1e-12 * expected);
        let half = local_bound(c1, alpha, r0, r / 2.0).unwrap();
        prop_assert!((v / half - 2f64.powf(2.0 - 2.0 * alpha)).abs() < 1e-9);
        prop_assert!(local_bound(c1, alpha, r0, r_max * 1.01).is_err());
    }

    #[test]
    fn geometric_grids_have_constant_ratio(lo in 0.01f64..1.0, span in 1.5f64..1e3, count in 2usize..100) {
        let g = geometric_grid(lo, lo * span, count);
        prop_assert_eq!(g.len(), count);
        let ratio = g[1] / g[0];
        for w in g.windows(2) {
            prop_assert!((w[1] / w[0] - ratio).abs() < 1e-9 * ratio);
        }
        prop_assert!((g[count - 1] / (lo * span) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bound_arguments_are_validated() {
    for alpha in [0.0, 1.0, -0.5, f64::NAN] {
        assert!(matches!(local_bound(1.0, alpha, 1.0, 0.1), Err(Error::OutOfRange(_))));
    }
    assert!(local_bound(1.0, 0.5, 1.0, 0.0).is_err());
    assert_eq!(BOUND_RADII.len(), 4);
    let r = default_r_grid();
    assert_eq!(r.len(), 12);
    assert!((r[0] - 1e2).abs() < 1e-9 && (r[11] - 1e5).abs() < 1e-6);
}

fn fibonacci(n: usize) -> SubstitutionSequence {
    SubstitutionSequence::constant(&Substitution::parse(&["12", "1"]).unwrap(), n).unwrap()
}

#[test]
fn constant_function_has_an_atom_at_zero() {
    let seq = fibonacci(25);
    let p = PathPrefix::minimal(&seq, 0, 25);
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let s = [1.0, 1.0 / golden];
    let f = CylFunction::constant(0, 2);
    let spectrum = autocorr_spectrum(&seq, &p, &f, &s, 4000.0, 100.0, 400).unwrap();
    assert!(spectrum.corr.iter().all(|&c| (c - 1.0).abs() < 1e-12));
    assert!((spectrum.total_mass() - 1.0).abs() < 1e-12);
    let delta = 0.2;
    let near = spectrum.mass(-delta, delta);
    assert!((near - 1.0).abs() <= spectrum.leakage(delta) + 1e-9, "mass near zero {near}");
    let far = spectrum.mass(0.5, 1.0);
    assert!(far.abs() <= spectrum.leakage(0.5) + 1e-9);
    assert!((spectrum.resolution() - 0.01).abs() < 1e-12);
}

#[test]
fn mean_zero_function_loses_the_atom() {
    let seq = fibonacci(25);
    let p = PathPrefix::minimal(&seq, 0, 25);
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let s = [1.0, 1.0 / golden];
    // Frequencies of the two letters are 1/φ and 1/φ², so this has zero mean.
    let f = CylFunction::new(0, vec![1.0 / golden, -1.0], CylFunction::constant(0, 2).profiles).unwrap();
    let spectrum = autocorr_spectrum(&seq, &p, &f, &s, 20_000.0, 200.0, 800).unwrap();
    // Eigenvalues accumulate at zero, so some mass remains near it; the
    // constant function puts all of it there.
    let atom = spectrum.mass(-0.01, 0.01);
    assert!(atom.abs() < 0.1 * spectrum.total_mass(), "mass near zero {atom} of {}", spectrum.total_mass());
    for omega in [0.0, 0.3, 0.7] {
        let d = spectrum.density(omega);
        assert!((spectrum.density(omega + 1.0 / spectrum.dt) - d).abs() < 1e-9 * (1.0 + d.abs()));
    }
}

#[test]
fn autocorrelation_needs_enough_time() {
    let seq = fibonacci(20);
    let p = PathPrefix::minimal(&seq, 0, 20);
    let f = CylFunction::constant(0, 2);
    let err = autocorr_spectrum(&seq, &p, &f, &[1.0, 0.6], 100.0, 50.0, 10).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)));
    assert!(autocorr_spectrum(&seq, &p, &CylFunction::constant(1, 2), &[1.0, 0.6], 400.0, 50.0, 10).is_err());
}
