mod diagnose;
mod fit;
mod predict;
mod report;
mod simulate;

use std::fs;

use mtf_core::{Error, Result};

use crate::args::{Cli, Command, ConfigFile};

fn load_config(cli: &Cli) -> Result<ConfigFile> {
    let Some(path) = &cli.config else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Missing required flag.
pub(crate) fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParameter(format!("{flag} is required")))
}

pub(crate) fn dispatch(cli: Cli) -> Result<i32> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Simulate(a) => simulate::run(a.merge(cfg.simulate)),
        Command::Fit(a) => fit::run(a.merge(cfg.fit)),
        Command::Predict(a) => predict::run(a.merge(cfg.predict)),
        Command::Report(a) => report::run(a.merge(cfg.report)),
        Command::Diagnose(a) => diagnose::run(a.merge(cfg.diagnose)),
    }
}
