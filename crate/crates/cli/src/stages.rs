//! Pipeline stages. Each stage recomputes what it needs from the config and
//! writes its artifacts; random streams are fixed per purpose so that stages
//! run alone reproduce the files of a full run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rauzy_spectra::bv::{
    canonical_cut_points, canonical_matrices, sample_canonical, sample_middles, suspension_itinerary,
    write_itinerary_csv, CanonicalSample, CylFunction, PathPrefix, PiecewisePoly, Profile,
};
use rauzy_spectra::cocycle::{
    lyapunov_spectrum, oseledets_frames, rauzy_stream, return_time_stats, write_return_csv, LyapunovEstimate, WStats,
};
use rauzy_spectra::dioph::{covering_estimate, ek_matches, large_eps_indices, salem_demo, write_ek_csv, EKState};
use rauzy_spectra::iet::{
    find_positive_simple_loop, rauzy_class, rauzy_path_partial, sample_iet_stream, Iet, PositiveLoop, RauzyClass,
    RauzyWalk,
};
use rauzy_spectra::rng::random_simplex;
use rauzy_spectra::spectral::{geometric_grid, spectral_scan, write_spectral_csv};
use rauzy_spectra::twisted::{dioph_setup, write_scan_csv, ScanSetup};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, SCHEMA};
use crate::error::{CliError, StageContext};

/// Stream ids by purpose.
pub mod streams {
    pub const IET: u64 = 0;
    pub const LYAPUNOV: u64 = 1;
    pub const CANONICAL: u64 = 1000;
    pub const ROOF: u64 = 2000;
    pub const EK: u64 = 3000;
    pub const EK_ROOF: u64 = 3001;
    pub const W: u64 = 4000;
}

/// Longest positive loop searched at the class start vertex.
pub const LOOP_SEARCH_LEN: usize = 30;

/// Time span of the exported itinerary.
pub const ITINERARY_SPAN: f64 = 1000.0;

/// Threshold for "large" errors in the Salem demo summary.
pub const LARGE_EPS: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Iet,
    Rauzy,
    Lyapunov,
    Cocycle,
    Twisted,
    Spectral,
    /// `Twisted` and `Spectral` sharing one scan.
    Scan,
    Ek,
    Salem,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Iet => "iet",
            Stage::Rauzy => "rauzy",
            Stage::Lyapunov => "lyapunov",
            Stage::Cocycle => "cocycle",
            Stage::Twisted => "twisted",
            Stage::Spectral => "spectral-scan",
            Stage::Scan => "scan",
            Stage::Ek => "ek",
            Stage::Salem => "salem",
        }
    }

    /// Stages of a named pipeline, in execution order.
    pub fn pipeline(name: &str) -> Vec<Stage> {
        match name {
            "salem" => vec![Stage::Salem],
            _ => vec![
                Stage::Iet,
                Stage::Rauzy,
                Stage::Lyapunov,
                Stage::Cocycle,
                Stage::Scan,
                Stage::Ek,
                Stage::Salem,
            ],
        }
    }
}

/// Output directory plus the relative paths written so far, in order.
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write_with<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let io = |source| CliError::Io { path: path.display().to_string(), source };
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}

/// Shared setup: the Rauzy class of the configured permutation and its loop.
pub struct Setting {
    pub cfg: ExperimentConfig,
    pub class: RauzyClass,
    pub lp: PositiveLoop,
}

impl Setting {
    pub fn new(cfg: &ExperimentConfig, stage: &'static str) -> Result<Self, CliError> {
        let class = rauzy_class(&cfg.permutation()?).stage(stage)?;
        let lp = find_positive_simple_loop(&class, LOOP_SEARCH_LEN).stage(stage)?;
        Ok(Setting { cfg: cfg.clone(), class, lp })
    }

    fn m(&self) -> usize {
        self.cfg.permutation.len()
    }

    fn iet(&self, stream: u64, stage: &'static str) -> Result<Iet<f64>, CliError> {
        sample_iet_stream(&self.cfg.permutation()?, self.cfg.seed, stream).stage(stage)
    }

    fn canonical(&self, stream: u64, levels: usize, stage: &'static str) -> Result<CanonicalSample, CliError> {
        sample_canonical(&self.class, &self.lp, self.cfg.seed, stream, levels, 1).stage(stage)
    }
}

pub fn run_stage(stage: Stage, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<(), CliError> {
    match stage {
        Stage::Iet => stage_iet(cfg, out),
        Stage::Salem => stage_salem(cfg, out),
        _ => {
            let setting = Setting::new(cfg, stage.name())?;
            match stage {
                Stage::Rauzy => stage_rauzy(&setting, out),
                Stage::Lyapunov => stage_lyapunov(&setting, out),
                Stage::Cocycle => stage_cocycle(&setting, out),
                Stage::Twisted => stage_scan(&setting, out, true, false),
                Stage::Spectral => stage_scan(&setting, out, false, true),
                Stage::Scan => stage_scan(&setting, out, true, true),
                Stage::Ek => stage_ek(&setting, out),
                Stage::Iet | Stage::Salem => unreachable!(),
            }
        }
    }
}

fn stage_iet(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let t = sample_iet_stream(&cfg.permutation()?, cfg.seed, streams::IET).stage("iet")?;
    out.write_json(
        "iet.json",
        &json!({ "schema": SCHEMA, "pi": cfg.permutation, "lambda": t.lambda_domain_order(), "seed": cfg.seed }),
    )
}

fn stage_rauzy(st: &Setting, out: &mut Artifacts) -> Result<(), CliError> {
    let cfg = &st.cfg;
    let t = st.iet(streams::IET, "rauzy")?;
    let (kinds_string, kinds, stop) = if cfg.exact {
        let (path, err) = rauzy_path_partial(&t.to_exact(), cfg.n_steps);
        (path.kinds_string(), path.kinds(), err.map(|e| e.to_string()))
    } else {
        let (path, err) = rauzy_path_partial(&t, cfg.n_steps);
        if let Some(e) = err {
            return Err(CliError::Stage { stage: "rauzy", source: e });
        }
        (path.kinds_string(), path.kinds(), None)
    };
    let (ends, first_cut) = canonical_cut_points(&st.class, &kinds, &st.lp.word);
    out.write_json(
        "rauzy.json",
        &json!({
            "schema": SCHEMA,
            "exact": cfg.exact,
            "start": t,
            "steps": kinds_string,
            "stopped": stop,
            "class_size": st.class.len(),
            "strongly_connected": st.class.is_strongly_connected(),
            "loop": rauzy_spectra::iet::kinds_to_string(&st.lp.word),
            "canonical_steps": ends.len(),
            "first_cut": first_cut,
        }),
    )
}

#[derive(Serialize)]
struct LyapunovRun {
    theta: Vec<f64>,
    stderr: Vec<f64>,
    n: usize,
    seed: u64,
    stream: u64,
}

fn stage_lyapunov(st: &Setting, out: &mut Artifacts) -> Result<(), CliError> {
    let cfg = &st.cfg;
    let m = st.m();
    let runs: Vec<Result<LyapunovRun, CliError>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let stream = streams::LYAPUNOV + i;
            let walk = RauzyWalk::new(&st.iet(stream, "lyapunov")?);
            let est: LyapunovEstimate =
                lyapunov_spectrum(m, rauzy_stream(walk, cfg.n_steps), cfg.n_steps, cfg.checkpoint_every)
                    .stage("lyapunov")?;
            Ok(LyapunovRun { theta: est.theta, stderr: est.stderr, n: est.n_steps, seed: cfg.seed, stream })
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    out.write_json("lyapunov.json", &json!({ "schema": SCHEMA, "runs": runs }))
}

fn stage_cocycle(st: &Setting, out: &mut Artifacts) -> Result<(), CliError> {
    let cfg = &st.cfg;
    let (_, middles) = sample_middles(&st.class, cfg.seed, streams::W, cfg.w_levels, 1).stage("cocycle")?;
    let w = WStats::from_matrices(&canonical_matrices(&st.lp, &middles));
    out.write_with("w.csv", |f| w.write_csv(f))?;

    let mut walk = RauzyWalk::new(&st.iet(streams::IET, "cocycle")?);
    let mut kinds = Vec::with_capacity(cfg.n_steps);
    let mut logs = Vec::with_capacity(cfg.n_steps + 1);
    logs.push(walk.log_lambda());
    for _ in 0..cfg.n_steps {
        kinds.push(walk.next_step().stage("cocycle")?.kind);
        logs.push(walk.log_lambda());
    }
    let returns = return_time_stats(&kinds, &logs, &cfg.return_word()?).stage("cocycle")?;
    out.write_with("returns.csv", |f| write_return_csv(&returns, f))?;

    let levels = cfg.ek_levels + 1;
    let smp = st.canonical(streams::EK, levels, "cocycle")?;
    let frames = oseledets_frames(&smp.seq, levels).stage("cocycle")?;
    let k = (cfg.delta * w.w.len() as f64).ceil() as usize;
    out.write_json(
        "cocycle.json",
        &json!({
            "schema": SCHEMA,
            "w": { "levels": w.w.len(), "delta": cfg.delta, "ld_stat": w.ld_stat(cfg.delta), "top_mean": w.top_mean(k) },
            "returns": {
                "word": cfg.return_word,
                "occurrences": returns.occurrences.len(),
                "eps_fit": returns.eps_fit,
                "tail_rate": returns.tail_rate,
            },
            "frames": {
                "levels": frames.levels,
                "min_angle": frames.min_angle,
                "theta": frames.theta,
                "stderr": frames.stderr,
            },
        }),
    )
}

/// Level-0 observable with constant profiles.
pub fn observable(cfg: &ExperimentConfig, m: usize) -> Result<CylFunction, CliError> {
    CylFunction::new(0, cfg.observable(m), vec![Profile::Poly(PiecewisePoly::constant(1.0)); m])
        .map_err(|e| CliError::Config(format!("observable: {e}")))
}

fn scan_setup(st: &Setting, i: u64, stage: &'static str) -> Result<ScanSetup, CliError> {
    let cfg = &st.cfg;
    let m = st.m();
    let smp = st.canonical(streams::CANONICAL + i, cfg.levels, stage)?;
    let itinerary = smp.seq.unpacked().stage(stage)?;
    let path = PathPrefix::minimal(&itinerary, 0, itinerary.len());
    let (returns, c1) = dioph_setup(&smp.seq, Some(st.lp.returns.clone())).stage(stage)?;
    Ok(ScanSetup {
        canonical: smp.seq,
        itinerary,
        path,
        f: observable(cfg, m)?,
        s: random_simplex(cfg.seed, streams::ROOF + i, m),
        returns,
        c1,
        precision_bits: cfg.precision_bits,
    })
}

/// `twisted` writes the per-(ω, R) rows and an itinerary sample, `spectral`
/// the per-ω summaries.
fn stage_scan(st: &Setting, out: &mut Artifacts, twisted: bool, spectral: bool) -> Result<(), CliError> {
    let cfg = &st.cfg;
    let stage = if spectral { "spectral-scan" } else { "twisted" };
    let g = &cfg.grids;
    let r_grid = geometric_grid(g.r_min, g.r_max, g.r_count);
    let mut summaries = Vec::new();
    for i in 0..cfg.samples as u64 {
        let setup = scan_setup(st, i, stage)?;
        let res = spectral_scan(&setup, cfg.b, &r_grid, g.omega_count).stage(stage)?;
        if twisted {
            out.write_with(&format!("scan_{i}.csv"), |f| write_scan_csv(&res.rows, f))?;
            if i == 0 {
                let span = ITINERARY_SPAN.min(g.r_max);
                let tiles = suspension_itinerary(&setup.itinerary, &setup.path, &setup.s, span).stage(stage)?;
                out.write_with("itinerary.csv", |f| write_itinerary_csv(&tiles, f))?;
            }
        }
        if spectral {
            out.write_with(&format!("spectral_{i}.csv"), |f| write_spectral_csv(&res, f))?;
            let worst_product = res.summaries.iter().map(|s| s.dioph_product).fold(f64::NEG_INFINITY, f64::max);
            summaries.push(json!({
                "index": i,
                "s": setup.s,
                "omegas": res.omegas.len(),
                "gamma_hat": res.gamma_hat,
                "max_alpha": res.max_alpha(),
                "violations": res.violations(),
                "max_dioph_product": worst_product,
            }));
        }
    }
    if !spectral {
        return Ok(());
    }
    let gamma = summaries.iter().filter_map(|s| s["gamma_hat"].as_f64()).fold(2.0, f64::min);
    let violations: u64 = summaries.iter().filter_map(|s| s["violations"].as_u64()).sum();
    out.write_json(
        "spectral.json",
        &json!({ "schema": SCHEMA, "B": cfg.b, "gamma_hat": gamma, "violations": violations, "samples": summaries }),
    )
}

fn stage_ek(st: &Setting, out: &mut Artifacts) -> Result<(), CliError> {
    let cfg = &st.cfg;
    let m = st.m();
    let levels = cfg.ek_levels;
    let smp = st.canonical(streams::EK, levels + 1, "ek")?;
    let frames = oseledets_frames(&smp.seq, levels + 1).stage("ek")?;
    let s = random_simplex(cfg.seed, streams::EK_ROOF, m);
    let (returns, _) = dioph_setup(&smp.seq, Some(st.lp.returns.clone())).stage("ek")?;
    let state =
        EKState::build(&smp.seq, &frames, &returns, &s, cfg.ek_omega, levels, cfg.precision_bits).stage("ek")?;
    out.write_with("ek.csv", |f| write_ek_csv(&state, f))?;

    let predictions = levels - 1;
    let mut matches = 0;
    for n in 0..predictions {
        if ek_matches(&state, n).stage("ek")? {
            matches += 1;
        }
    }
    let hypothesis: Vec<usize> = (0..predictions).filter(|&n| state.hypothesis_holds(n, cfg.b)).collect();
    let w: Vec<f64> = (1..=smp.seq.len()).map(|k| rauzy_spectra::cocycle::log_operator_norm(smp.seq.matrix(k))).collect();
    let covering = covering_estimate(&w, levels, cfg.delta, state.c_zeta, frames.theta[1], None).stage("ek")?;
    out.write_json(
        "ek.json",
        &json!({
            "schema": SCHEMA,
            "omega": cfg.ek_omega,
            "s": s,
            "levels": levels,
            "c_zeta": state.c_zeta,
            "predictions": predictions,
            "matches": matches,
            "match_rate": matches as f64 / predictions as f64,
            "hypothesis_levels": hypothesis,
            "normalized_det": state.normalized_det,
            "theta": frames.theta,
            "covering": covering,
        }),
    )
}

fn stage_salem(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let (lambda, alpha) = cfg.salem_params()?;
    let res = salem_demo(&lambda, &alpha, cfg.salem.n, cfg.precision_bits).stage("salem")?;
    out.write_with("salem.csv", |f| {
        writeln!(f, "n,K_n,eps_n,ratio")?;
        for n in 0..res.k.len() {
            let ratio = res.ratio.get(n).map(|r| r.to_string()).unwrap_or_default();
            writeln!(f, "{n},{},{},{ratio}", res.k[n], res.eps[n])?;
        }
        Ok(())
    })?;
    let large = large_eps_indices(&res, LARGE_EPS);
    out.write_json(
        "salem.json",
        &json!({
            "schema": SCHEMA,
            "lambda": cfg.salem.lambda,
            "alpha": cfg.salem.alpha,
            "n": cfg.salem.n,
            "working_bits": res.working_bits,
            "large_eps_threshold": LARGE_EPS,
            "large_eps_indices": large,
            "max_abs_eps": res.eps.iter().map(|e| e.abs()).fold(0.0, f64::max),
        }),
    )
}
