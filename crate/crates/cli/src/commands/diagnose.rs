use mtf_core::Result;

use super::required;
use crate::archive::Archive;
use crate::args::DiagnoseArgs;

pub(crate) fn run(a: DiagnoseArgs) -> Result<i32> {
    let archive = Archive::read(&required(a.archive, "archive")?)?;
    let summaries = archive.summaries();
    for s in &summaries {
        println!("{s}");
    }
    let flagged = summaries.iter().filter(|s| s.flagged()).count();
    println!("flagged_chains = {flagged}");
    Ok(if flagged > 0 { 1 } else { 0 })
}
