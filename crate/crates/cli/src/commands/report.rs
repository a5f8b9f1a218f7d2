use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mtf_core::io::{manifest_path, read_json};
use mtf_core::simgen::{SimSpec, SimTruth};
use mtf_core::{Error, Result};

use crate::archive::Archive;
use crate::args::ReportArgs;
use crate::pipeline::tensor_specific_correlations;

/// Archive directories under `path`, sorted.
fn expand(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.join("run.toml").is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    if !path.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no archive at {}", path.display()),
        )));
    }
    let mut subs: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subs.sort();
    for s in subs {
        let before = out.len();
        if expand(&s, out).is_err() {
            out.truncate(before);
        }
    }
    Ok(())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v.sqrt())
}

/// Directory holding the collection an archive was fitted on.
fn input_dir(a: &Archive) -> Option<PathBuf> {
    manifest_path(Path::new(&a.info.input)).parent().map(Path::to_path_buf)
}

fn read_rmse(path: &Path) -> Option<f64> {
    let text = fs::read_to_string(path).ok()?;
    text.lines()
        .find_map(|l| l.strip_prefix("# rmse="))
        .and_then(|v| v.trim().parse().ok())
}

pub(crate) fn run(a: ReportArgs) -> Result<i32> {
    if a.archives.is_empty() {
        return Err(Error::InvalidParameter("at least one archive is required".into()));
    }
    let mut dirs = Vec::new();
    for p in &a.archives {
        expand(p, &mut dirs)?;
    }
    if dirs.is_empty() {
        return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "no archives found")));
    }
    let archives: Vec<Archive> = dirs.iter().map(|d| Archive::read(d)).collect::<Result<_>>()?;
    let models: Vec<String> = archives.iter().map(|x| x.info.model.to_string()).collect();
    if !a.allow_mixed && models.iter().any(|m| *m != models[0]) {
        return Err(Error::InvalidParameter(
            "archives of different models; pass --allow-mixed to combine them".into(),
        ));
    }

    let mut out = String::from("# structure\narchive,model,shared,matrix,tensor,empty\n");
    let mut by_model: BTreeMap<String, Vec<[f64; 4]>> = BTreeMap::new();
    for ((dir, x), m) in dirs.iter().zip(&archives).zip(&models) {
        let s = x.structure();
        let (mut mat, mut ten) = (0, 0);
        for (v, n) in x.info.views.iter().zip(&s.specific) {
            if v.l > 1 || v.group.is_some() {
                ten += n;
            } else {
                mat += n;
            }
        }
        let _ = writeln!(out, "{},{m},{},{mat},{ten},{}", dir.display(), s.shared, s.empty);
        by_model
            .entry(m.clone())
            .or_default()
            .push([s.shared as f64, mat as f64, ten as f64, s.empty as f64]);
    }
    out.push_str("\n# structure summary\nmodel,n,shared_mean,shared_sd,matrix_mean,matrix_sd,tensor_mean,tensor_sd,empty_mean,empty_sd\n");
    for (m, rows) in &by_model {
        let _ = write!(out, "{m},{}", rows.len());
        for c in 0..4 {
            let (mu, sd) = mean_sd(&rows.iter().map(|r| r[c]).collect::<Vec<_>>());
            let _ = write!(out, ",{mu:.4},{sd:.4}");
        }
        out.push('\n');
    }

    let mut corr_rows = String::new();
    let mut corr_by_model: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((dir, x), m) in dirs.iter().zip(&archives).zip(&models) {
        let Some(truth_path) = input_dir(x).map(|d| d.join("truth.json")).filter(|p| p.is_file()) else {
            continue;
        };
        let truth: SimTruth<f64> = read_json(&truth_path)?;
        let cs = tensor_specific_correlations(x, &truth)?;
        if cs.is_empty() {
            continue;
        }
        let mean = cs.iter().sum::<f64>() / cs.len() as f64;
        let _ = writeln!(corr_rows, "{},{m},{},{mean:.6}", dir.display(), cs.len());
        corr_by_model.entry(m.clone()).or_default().push(mean);
    }
    if !corr_rows.is_empty() {
        out.push_str("\n# tensor-specific loading correlation\narchive,model,n_components,mean_abs_correlation\n");
        out.push_str(&corr_rows);
        out.push_str("\n# correlation summary\nmodel,n,mean,sd\n");
        for (m, v) in &corr_by_model {
            let (mu, sd) = mean_sd(v);
            let _ = writeln!(out, "{m},{},{mu:.6},{sd:.6}", v.len());
        }
    }

    let mut rmse: BTreeMap<(u64, String), Vec<f64>> = BTreeMap::new();
    for ((dir, x), m) in dirs.iter().zip(&archives).zip(&models) {
        let Some(r) = read_rmse(&dir.join("prediction.csv")) else {
            continue;
        };
        let rho = input_dir(x)
            .and_then(|d| fs::read_to_string(d.join("spec.toml")).ok())
            .and_then(|t| toml::from_str::<SimSpec>(&t).ok())
            .map_or(f64::NAN, |s| s.rho);
        rmse.entry((rho.to_bits(), m.clone())).or_default().push(r);
    }
    if !rmse.is_empty() {
        let mut keys: Vec<_> = rmse.keys().cloned().collect();
        keys.sort_by(|a, b| f64::from_bits(a.0).total_cmp(&f64::from_bits(b.0)).then(a.1.cmp(&b.1)));
        out.push_str("\n# rmse by rho\nrho,model,n,rmse_mean,rmse_sd\n");
        for k in keys {
            let v = &rmse[&k];
            let (mu, sd) = mean_sd(v);
            let _ = writeln!(out, "{},{},{},{mu:.6},{sd:.6}", f64::from_bits(k.0), k.1, v.len());
        }
    }

    match &a.out {
        Some(p) => fs::write(p, out)?,
        None => print!("{out}"),
    }
    Ok(0)
}
