use mtf_core::io::read_collection;
use mtf_core::{Error, HyperParams, LambdaMode, NoisePrior, Result, Schedule};

use super::required;
use crate::args::FitArgs;
use crate::pipeline::{fit, FitOptions};

fn jobs(flag: Option<usize>) -> Result<usize> {
    if let Some(j) = flag {
        return Ok(j.max(1));
    }
    match std::env::var("MTF_JOBS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map(|j| j.max(1))
            .map_err(|_| Error::InvalidParameter(format!("MTF_JOBS must be a count, got '{s}'"))),
        Err(_) => Ok(1),
    }
}

pub(crate) fn options(a: &FitArgs) -> Result<FitOptions> {
    let input = required(a.input.clone(), "input")?;
    let k = a.k.unwrap_or(15);
    let preset = a.preset.clone().unwrap_or_else(|| "default".into());
    let mut hyper = match preset.as_str() {
        "default" => HyperParams::new(k),
        "strong-reg" => HyperParams::strong_regularization(k),
        o => return Err(Error::InvalidParameter(format!("unknown preset '{o}' (default or strong-reg)"))),
    };
    if let Some(conf) = a.noise_conf {
        hyper.noise = NoisePrior::SnrScaled { conf, snr: 1.0 };
    }
    hyper.lambda_mode = match a.lambda_mode.as_deref().unwrap_or("global") {
        "global" => LambdaMode::Global,
        "per-component" => LambdaMode::PerComponent,
        "per-slab" => LambdaMode::PerSlab,
        o => return Err(Error::InvalidParameter(format!("unknown lambda mode '{o}'"))),
    };
    hyper.validate()?;
    let chains = a.chains.unwrap_or(7);
    if chains == 0 {
        return Err(Error::InvalidParameter("--chains must be >= 1".into()));
    }
    Ok(FitOptions {
        model: a.model.as_deref().unwrap_or("mtf").parse()?,
        chains,
        schedule: Schedule::new(a.burnin.unwrap_or(3000), a.samples.unwrap_or(40), a.thin.unwrap_or(10))?,
        seed: a.seed.unwrap_or(0),
        jobs: jobs(a.jobs)?,
        preset,
        scaling: a.scale.as_deref().unwrap_or("feature").parse()?,
        hyper,
        input: input.display().to_string(),
    })
}

pub(crate) fn run(a: FitArgs) -> Result<i32> {
    let opts = options(&a)?;
    let output = required(a.output.clone(), "output")?;
    let input = required(a.input.clone(), "input")?;
    let data = read_collection::<f64>(&input)?;
    let archive = fit(&data, &opts)?;
    archive.write(&output)?;
    let s = archive.structure();
    println!(
        "{} K={} chains={} snapshots={}: shared {} specific {:?} empty {} -> {}",
        opts.model,
        opts.hyper.k,
        opts.chains,
        archive.n_snapshots(),
        s.shared,
        s.specific,
        s.empty,
        output.display()
    );
    Ok(0)
}
