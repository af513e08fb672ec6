use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dioph_bound_prefix, dioph_factors, ModularOrbit};
use crate::bv::{forward_word, level_roof, CylFunction, PathPrefix, Profile, SubstitutionSequence};
use crate::error::{Error, Result};
use crate::substitution::{Letter, Word, MATERIALIZE_LIMIT};

/// Which evaluations of the twisted integral to perform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BirkhoffMode {
    Formula,
    Quadrature,
    Both,
}

/// `S_R = ∫_0^R e^{-2πiωτ} f(h_τ y) dτ` evaluated two ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BirkhoffValue {
    pub r: f64,
    /// Largest level-ℓ tile boundary not exceeding `r`.
    pub r_snapped: f64,
    pub snap_gap: f64,
    /// Level-ℓ tiles in `[0, r_snapped]`.
    pub tiles: u64,
    /// Sum of `c_a ψ̂_a` against `Φ` over the level-ℓ word, at `r_snapped`.
    pub formula: Option<Complex64>,
    /// Tile-by-tile integral over `[0, r]`.
    pub quadrature: Option<Complex64>,
    /// Tile-by-tile integral over `[0, r_snapped]`.
    pub quadrature_snapped: Option<Complex64>,
}

fn phase(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * x)
}

/// Level-ℓ word read from the origin of `p`.
fn level_word(seq: &SubstitutionSequence, p: &PathPrefix, ell: usize, limit: usize) -> Result<Word> {
    if ell == p.level() {
        return Ok(Word::new(vec![p.top()]));
    }
    let tail = seq.shifted(ell)?;
    let tp = PathPrefix::from_edges(&tail, p.top(), p.edges[ell..].to_vec())?;
    forward_word(&tail, &tp, limit)
}

fn sub_integral(profile: &Profile, u0: f64, u1: f64, omega: f64, len: f64) -> Complex64 {
    match profile {
        Profile::Poly(_) => profile.integral(u0, u1, omega, len).expect("closed form"),
        Profile::Custom(_) => profile.integral_quadrature(u0, u1, omega, len),
    }
}

/// Single-`R` evaluation.
pub fn twisted_birkhoff(
    seq: &SubstitutionSequence,
    p: &PathPrefix,
    f: &CylFunction,
    s: &[f64],
    omega: f64,
    r: f64,
    mode: BirkhoffMode,
) -> Result<BirkhoffValue> {
    Ok(twisted_birkhoff_grid(seq, p, f, s, omega, &[r], mode)?[0])
}

/// Evaluations at every `R` of a grid in one pass along the itinerary.
///
/// The path must be minimal in its first `ℓ` edges so that its origin sits at
/// the bottom of a level-ℓ tower.
pub fn twisted_birkhoff_grid(
    seq: &SubstitutionSequence,
    p: &PathPrefix,
    f: &CylFunction,
    s: &[f64],
    omega: f64,
    r_grid: &[f64],
    mode: BirkhoffMode,
) -> Result<Vec<BirkhoffValue>> {
    let m = seq.arity();
    let ell = f.level;
    if f.arity() != m || s.len() != m {
        return Err(Error::ArityMismatch(m, f.arity()));
    }
    if ell > p.level() || p.edges[..ell].iter().any(|&e| e != 0) {
        return Err(Error::Invalid("path must be minimal below the function level".into()));
    }
    if r_grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::Invalid("R must be finite and nonnegative".into()));
    }
    let want_formula = mode != BirkhoffMode::Quadrature;
    let want_quad = mode != BirkhoffMode::Formula;
    let weights = if want_formula {
        if !f.has_closed_form() {
            return Err(Error::Invalid("profile has no closed-form transform".into()));
        }
        Some(f.weighted_transforms(omega, &level_roof(seq, s, ell))?)
    } else {
        None
    };
    let s_l = level_roof(seq, s, ell);
    let expansions: Vec<Word> = if want_quad {
        (0..m as Letter).map(|a| seq.apply_range(1, ell, &[a])).collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut order: Vec<usize> = (0..r_grid.len()).collect();
    order.sort_by(|&i, &j| r_grid[i].total_cmp(&r_grid[j]));
    let r_max = order.last().map_or(0.0, |&i| r_grid[i]);
    let smin = s_l.iter().copied().fold(f64::INFINITY, f64::min);
    let limit = ((r_max / smin).ceil() + 2.0).min(MATERIALIZE_LIMIT as f64) as usize;
    let word = level_word(seq, p, ell, limit)?;

    let mut out = vec![None; r_grid.len()];
    let mut gi = 0;
    let mut counts = vec![0u64; m];
    let mut formula = Complex64::new(0.0, 0.0);
    let mut quad = Complex64::new(0.0, 0.0);
    let mut start = 0.0;
    for (idx, &a) in word.iter().enumerate() {
        let ai = a as usize;
        counts[ai] += 1;
        let end: f64 = counts.iter().zip(&s_l).map(|(&c, x)| c as f64 * x).sum();
        let len = s_l[ai];
        let tile_phase = phase((omega * start).fract());
        let c = f.coefficients[ai];
        let profile = &f.profiles[ai];
        // pending grid points inside this tile
        while gi < order.len() && r_grid[order[gi]] < end {
            let r = r_grid[order[gi]];
            let partial = if want_quad {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut sub = vec![0u64; m];
                for &b in expansions[ai].iter() {
                    let o: f64 = sub.iter().zip(s).map(|(&k, x)| k as f64 * x).sum();
                    if start + o >= r {
                        break;
                    }
                    let hi = (o + s[b as usize]).min(r - start);
                    acc += sub_integral(profile, o / len, hi / len, omega, len);
                    sub[b as usize] += 1;
                }
                Some(quad + c * tile_phase * acc)
            } else {
                None
            };
            out[order[gi]] = Some(BirkhoffValue {
                r,
                r_snapped: start,
                snap_gap: r - start,
                tiles: idx as u64,
                formula: weights.as_ref().map(|_| formula),
                quadrature: partial,
                quadrature_snapped: want_quad.then_some(quad),
            });
            gi += 1;
        }
        if gi == order.len() {
            break;
        }
        if let Some(w) = &weights {
            formula += w[ai] * tile_phase;
        }
        if want_quad {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut sub = vec![0u64; m];
            for &b in expansions[ai].iter() {
                let o: f64 = sub.iter().zip(s).map(|(&k, x)| k as f64 * x).sum();
                let hi = o + s[b as usize];
                acc += sub_integral(profile, o / len, hi / len, omega, len);
                sub[b as usize] += 1;
            }
            quad += c * tile_phase * acc;
        }
        start = end;
    }
    // grid points at or beyond the end of the word
    while gi < order.len() {
        let r = r_grid[order[gi]];
        if r > start {
            return Err(Error::Budget(word.len() as u128));
        }
        out[order[gi]] = Some(BirkhoffValue {
            r,
            r_snapped: start,
            snap_gap: 0.0,
            tiles: word.len() as u64,
            formula: weights.as_ref().map(|_| formula),
            quadrature: want_quad.then_some(quad),
            quadrature_snapped: want_quad.then_some(quad),
        });
        gi += 1;
    }
    Ok(out.into_iter().map(|v| v.expect("every grid point visited")).collect())
}

/// Inputs shared by every frequency of a scan.
#[derive(Clone, Debug)]
pub struct ScanSetup {
    /// Canonical sequence carrying the Diophantine bounds.
    pub canonical: SubstitutionSequence,
    /// The same system with small steps, used to generate the itinerary.
    pub itinerary: SubstitutionSequence,
    pub path: PathPrefix,
    /// Level-0 cylindrical function.
    pub f: CylFunction,
    pub s: Vec<f64>,
    pub returns: Vec<Word>,
    pub c1: f64,
    pub precision_bits: u64,
}

/// One CSV row of a twisted-integral scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub omega: f64,
    pub r: f64,
    pub abs_s_formula: f64,
    pub abs_s_quadrature: f64,
    pub bound_block: f64,
    pub bound_prefix: f64,
    pub product_only: f64,
}

impl ScanRow {
    /// True when either evaluation exceeds the rigorous prefix bound.
    pub fn violates(&self) -> bool {
        let slack = 1e-9 * (1.0 + self.bound_prefix);
        self.abs_s_formula > self.bound_prefix + slack || self.abs_s_quadrature > self.bound_prefix + slack
    }
}

/// `|S_R|` in both modes next to the Diophantine bounds, per `(ω, R)`.
pub fn twisted_scan(setup: &ScanSetup, omegas: &[f64], r_grid: &[f64]) -> Result<Vec<ScanRow>> {
    if setup.f.level != 0 {
        return Err(Error::Invalid("scans use level-0 functions".into()));
    }
    let levels = setup.canonical.len();
    let sup = setup.f.sup_norm();
    let rows: Vec<Result<Vec<ScanRow>>> = omegas
        .par_iter()
        .map(|&omega| {
            let values =
                twisted_birkhoff_grid(&setup.itinerary, &setup.path, &setup.f, &setup.s, omega, r_grid, BirkhoffMode::Both)?;
            let orbit = ModularOrbit::new(&setup.canonical, &setup.s, omega, levels, setup.precision_bits)?;
            let factors = dioph_factors(&orbit, &setup.returns, setup.c1);
            let weight: f64 = setup.f.weighted_transforms(omega, &setup.s)?.iter().map(|w| w.norm()).sum();
            values
                .iter()
                .map(|v| {
                    let pb = dioph_bound_prefix(&setup.canonical, &factors, 0, v.tiles as u128)?;
                    Ok(ScanRow {
                        omega,
                        r: v.r,
                        abs_s_formula: v.formula.map_or(f64::NAN, |z| z.norm()),
                        abs_s_quadrature: v.quadrature.map_or(f64::NAN, |z| z.norm()),
                        bound_block: weight * pb.block_bound,
                        bound_prefix: weight * pb.bound + sup * v.snap_gap,
                        product_only: pb.product,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// CSV with columns `omega,R,abs_S_formula,abs_S_quadrature,bound_block,bound_prefix,product_only`.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "omega,R,abs_S_formula,abs_S_quadrature,bound_block,bound_prefix,product_only")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.omega, r.r, r.abs_s_formula, r.abs_s_quadrature, r.bound_block, r.bound_prefix, r.product_only
        )?;
    }
    Ok(())
}
