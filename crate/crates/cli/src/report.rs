//! Human-readable summary of a finished run.

use std::fmt::Write as _;
use std::path::Path;

use rauzy_spectra::twisted::ScanRow;
use serde_json::Value;

use crate::error::CliError;
use crate::run::{file_entry, RunRecord, REPORT};

fn read_json(dir: &Path, name: &str) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(dir.join(name)).map_err(|e| CliError::Artifact(format!("{name}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::Artifact(format!("{name}: {e}")))
}

/// Bound violations in a scan CSV, recomputed row by row.
pub fn count_violations(csv: &str) -> Result<usize, CliError> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or_else(|| CliError::Artifact("empty scan CSV".into()))?;
    if header.split(',').count() != 7 {
        return Err(CliError::Artifact(format!("unexpected scan header {header:?}")));
    }
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Artifact(format!("scan row {}: {e}", i + 1)))?;
        if v.len() != 7 {
            return Err(CliError::Artifact(format!("scan row {} has {} fields", i + 1, v.len())));
        }
        let row = ScanRow {
            omega: v[0],
            r: v[1],
            abs_s_formula: v[2],
            abs_s_quadrature: v[3],
            bound_block: v[4],
            bound_prefix: v[5],
            product_only: v[6],
        };
        if row.violates() {
            count += 1;
        }
    }
    Ok(count)
}

/// Summary of the artifacts listed in `record`, read from `dir`. Every listed
/// file must exist with its recorded hash.
pub fn emit_report(dir: &Path, record: &RunRecord) -> Result<String, CliError> {
    for f in record.files.iter().filter(|f| f.path != REPORT) {
        let actual = file_entry(dir, &f.path).map_err(|_| CliError::Artifact(format!("missing artifact {}", f.path)))?;
        if actual.sha256 != f.sha256 {
            return Err(CliError::Artifact(format!("{} does not match its recorded hash", f.path)));
        }
    }
    let mut r = String::new();
    let _ = writeln!(r, "rauzy-spectra run report");
    let _ = writeln!(r, "version      {}", record.version);
    let _ = writeln!(r, "config hash  {}", record.config_hash);
    let _ = writeln!(r, "status       {}", record.status);

    if record.has("lyapunov.json") {
        let v = read_json(dir, "lyapunov.json")?;
        let _ = writeln!(r, "\nLyapunov exponents per induction step");
        for run in v["runs"].as_array().into_iter().flatten() {
            let theta: Vec<String> =
                run["theta"].as_array().into_iter().flatten().map(|x| format!("{:+.5}", x.as_f64().unwrap_or(f64::NAN))).collect();
            let se = run["stderr"].as_array().and_then(|a| a.first()).and_then(Value::as_f64).unwrap_or(f64::NAN);
            let _ = writeln!(r, "  stream {:>4}  {}  (stderr {:.1e})", run["stream"], theta.join(" "), se);
        }
    }

    let scans: Vec<&str> = record
        .files
        .iter()
        .map(|f| f.path.as_str())
        .filter(|p| p.starts_with("scan_") && p.ends_with(".csv"))
        .collect();
    let mut rows = 0usize;
    let mut violations = 0usize;
    for name in &scans {
        let text = std::fs::read_to_string(dir.join(name)).map_err(|e| CliError::Artifact(format!("{name}: {e}")))?;
        rows += text.lines().count().saturating_sub(1);
        violations += count_violations(&text)?;
    }
    let _ = writeln!(r);
    let omegas = if record.has("spectral.json") {
        let v = read_json(dir, "spectral.json")?;
        v["samples"].as_array().map_or(0, |a| a.iter().filter_map(|s| s["omegas"].as_u64()).sum::<u64>())
    } else {
        0
    };
    if omegas == 0 && rows == 0 {
        let _ = writeln!(r, "no omegas scanned");
    } else {
        if omegas > 0 {
            let v = read_json(dir, "spectral.json")?;
            let _ = writeln!(r, "gamma_hat    {}", v["gamma_hat"]);
            for s in v["samples"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    r,
                    "  sample {}  max alpha {:.4}  max product {:.8}",
                    s["index"],
                    s["max_alpha"].as_f64().unwrap_or(f64::NAN),
                    s["max_dioph_product"].as_f64().unwrap_or(f64::NAN)
                );
            }
        }
        let _ = writeln!(r, "bound violations {violations} over {rows} scan rows");
    }

    if record.has("ek.json") {
        let v = read_json(dir, "ek.json")?;
        let _ = writeln!(
            r,
            "\nEK predictions {}/{} matched (rate {}), hypothesis at {} levels, C_zeta {}",
            v["matches"],
            v["predictions"],
            v["match_rate"],
            v["hypothesis_levels"].as_array().map_or(0, |a| a.len()),
            v["c_zeta"]
        );
    }
    if record.has("salem.json") {
        let v = read_json(dir, "salem.json")?;
        let _ = writeln!(
            r,
            "\nSalem demo lambda={} alpha={}: {} indices with |eps| > {}",
            v["lambda"],
            v["alpha"],
            v["large_eps_indices"].as_array().map_or(0, |a| a.len()),
            v["large_eps_threshold"]
        );
    }
    Ok(r)
}
