use std::fs;
use std::path::Path;

use mtf_core::io::{write_collection, write_json};
use mtf_core::simgen::{generate, Scenario, SimSpec};
use mtf_core::{Error, Result};

use super::required;
use crate::args::SimulateArgs;

fn spec_from(a: &SimulateArgs) -> Result<SimSpec> {
    let scenario: Scenario = a.scenario.as_deref().unwrap_or("cp").parse()?;
    let base = SimSpec::for_scenario(scenario);
    let spec = SimSpec {
        seed: a.seed.unwrap_or(0),
        rho: a.rho.unwrap_or(base.rho),
        n: a.n.unwrap_or(base.n),
        n_test: a.n_test.unwrap_or(base.n_test),
        d1: a.d1.unwrap_or(base.d1),
        d2: a.d2.unwrap_or(base.d2),
        l: a.l.unwrap_or(base.l),
        noise_var: a.noise_var.unwrap_or(base.noise_var),
        signal_var: a.signal_var.unwrap_or(base.signal_var),
        ..base
    };
    spec.validate()?;
    Ok(spec)
}

/// Writes the training collection, `truth.json`, `spec.toml` and, for the
/// continuum, `test/` and `test_truth/` into `dir`.
pub(crate) fn write_simulation(dir: &Path, spec: &SimSpec) -> Result<String> {
    let data = generate::<f64>(spec)?;
    write_collection(dir, &data.train)?;
    write_json(&dir.join("truth.json"), &data.truth)?;
    let text = toml::to_string(spec).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    fs::write(dir.join("spec.toml"), text)?;
    if let Some(test) = &data.test {
        write_collection(&dir.join("test"), test)?;
    }
    if let Some(t) = &data.test_truth {
        write_collection(&dir.join("test_truth"), t)?;
    }
    let dims: Vec<String> = data
        .train
        .views()
        .iter()
        .map(|v| {
            let (n, d, l) = v.data.dims();
            format!("{}({n},{d},{l})", v.name)
        })
        .collect();
    Ok(format!(
        "{:?} seed {}: {} views {} -> {}",
        spec.scenario,
        spec.seed,
        dims.len(),
        dims.join(" "),
        dir.display()
    ))
}

pub(crate) fn run(a: SimulateArgs) -> Result<i32> {
    let spec = spec_from(&a)?;
    let out = required(a.out.clone(), "--out")?;
    match a.reps {
        None | Some(1) => println!("{}", write_simulation(&out, &spec)?),
        Some(0) => return Err(Error::InvalidParameter("--reps must be >= 1".into())),
        Some(r) => {
            for i in 0..r {
                let s = SimSpec {
                    seed: spec.seed + i as u64,
                    ..spec.clone()
                };
                println!("{}", write_simulation(&out.join(format!("rep_{i:03}")), &s)?);
            }
        }
    }
    Ok(0)
}
