pub mod analysis;
pub mod audit;
pub mod cloze;

use std::fs;
use std::path::PathBuf;

use crate::settings::CliResult;
use crate::Common;

/// Creates the output directory and returns the path of `name` inside it.
pub fn out_file(common: &Common, name: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(&common.out)?;
    Ok(common.out.join(name))
}
