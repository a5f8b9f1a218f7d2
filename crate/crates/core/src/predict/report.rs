use std::io::Write;

use crate::data::Collection;
use crate::error::Result;
use crate::predict::Prediction;
use crate::scalar::Scalar;

/// Error summary written after the per-entry rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportSummary {
    pub rmse: Option<f64>,
    pub mse: Option<f64>,
    pub n_targets: usize,
}

impl ReportSummary {
    /// Errors of `pred` against `truth`; `None` fields without truth.
    pub fn compute<F: Scalar>(pred: &Prediction<F>, truth: Option<&Collection<F>>) -> Result<Self> {
        let mse = match truth {
            Some(c) => Some(pred.mse(c)?.to_f64_lossy()),
            None => None,
        };
        Ok(Self {
            rmse: mse.map(f64::sqrt),
            mse,
            n_targets: pred.targets.len(),
        })
    }
}

/// Writes one CSV row per target, then a `#`-prefixed summary block. View
/// names are taken from `names`. Without `truth` the truth column and the
/// error lines are omitted.
/// The summary is passed in so it can be computed on a different scale than
/// the rows.
pub fn write_report<F: Scalar, W: Write>(
    out: &mut W,
    pred: &Prediction<F>,
    names: &[String],
    truth: Option<&Collection<F>>,
    summary: &ReportSummary,
) -> Result<()> {
    let y = truth.map(|c| pred.truth(c)).transpose()?;
    let header = "view,sample,feature,slab,predicted,posterior_std";
    if y.is_some() {
        writeln!(out, "{header},truth")?;
    } else {
        writeln!(out, "{header}")?;
    }
    for (i, t) in pred.targets.iter().enumerate() {
        let name = names.get(t.view).cloned().unwrap_or_else(|| t.view.to_string());
        let yv = y.as_ref().map(|y| format!(",{:e}", y[i].to_f64_lossy())).unwrap_or_default();
        writeln!(
            out,
            "{name},{},{},{},{:e},{:e}{yv}",
            t.sample,
            t.feature,
            t.slab,
            pred.mean[i].to_f64_lossy(),
            pred.std[i].to_f64_lossy()
        )?;
    }
    if let (Some(rmse), Some(mse)) = (summary.rmse, summary.mse) {
        writeln!(out, "# rmse={rmse:e}")?;
        writeln!(out, "# mse={mse:e}")?;
    }
    writeln!(out, "# n_targets={}", summary.n_targets)?;
    Ok(())
}
