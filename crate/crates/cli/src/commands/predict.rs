use std::fs::File;
use std::io::{BufWriter, Write};

use mtf_core::io::read_collection;
use mtf_core::predict::write_report;
use mtf_core::{Error, Result};

use super::required;
use crate::archive::Archive;
use crate::args::PredictArgs;
use crate::pipeline::{check_test_views, predict};

pub(crate) fn run(a: PredictArgs) -> Result<i32> {
    let dir = required(a.archive.clone(), "--archive")?;
    let test_path = required(a.test.clone(), "--test")?;
    let archive = Archive::read(&dir)?;
    let test = read_collection::<f64>(&test_path)?;
    check_test_views(&archive, &test)?;
    let truth = a.truth.as_deref().map(read_collection::<f64>).transpose()?;
    if let Some(t) = &truth {
        check_test_views(&archive, t)?;
        if t.n_samples() != test.n_samples() {
            return Err(Error::Shape("truth and test differ in sample count".into()));
        }
    }
    let samples = a.stage2_samples.unwrap_or(10);
    let out = predict(&archive, &test, truth.as_ref(), samples, a.seed.unwrap_or(0))?;
    let names: Vec<String> = test.views().iter().map(|v| v.name.clone()).collect();
    let path = a.out.clone().unwrap_or_else(|| dir.join("prediction.csv"));
    let mut w = BufWriter::new(File::create(&path)?);
    write_report(&mut w, &out.prediction, &names, truth.as_ref(), &out.summary)?;
    w.flush()?;
    match out.summary.rmse {
        Some(r) => println!("rmse {r:.6} over {} targets -> {}", out.summary.n_targets, path.display()),
        None => println!("{} targets predicted -> {}", out.summary.n_targets, path.display()),
    }
    Ok(0)
}
