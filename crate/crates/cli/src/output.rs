//! Writing a finished scenario to disk.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::scenario::ScenarioOutput;

/// Write every file of `output` into `dir`, creating it if needed.
///
/// Files are first written under temporary names and renamed only once all
/// of them exist, so a failure leaves no partial results behind.
pub fn write_output(dir: &Path, output: &ScenarioOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let result = (|| -> Result<()> {
        for file in &output.files {
            let tmp = dir.join(format!(".{}.partial", file.name));
            let path = dir.join(&file.name);
            fs::write(&tmp, &file.contents).with_context(|| format!("cannot write {}", tmp.display()))?;
            staged.push((tmp, path));
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        fs::rename(&tmp, &path).with_context(|| format!("cannot move {} into place", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
