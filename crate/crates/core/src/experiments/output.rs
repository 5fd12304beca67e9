//! Writing a report to disk.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::walk::write_snapshot;

use super::config::ScenarioConfig;
use super::report::RunReport;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `config.json`, `report.json`, one CSV per table and, for walks, the lattice
/// snapshot `lattice.lrml`. Returns the files written, in order.
pub fn emit_outputs(cfg: &ScenarioConfig, report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("config.json");
    let mut w = create(&path)?;
    writeln!(w, "{}", cfg.canonical_json()).map_err(|e| Error::io(&path, e))?;
    finish(&path, w)?;
    written.push(path);

    let path = dir.join("report.json");
    let mut w = create(&path)?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::InconsistentState(e.to_string()))?;
    writeln!(w, "{json}").map_err(|e| Error::io(&path, e))?;
    finish(&path, w)?;
    written.push(path);

    for table in &report.tables {
        let path = dir.join(format!("{}.csv", table.name));
        let mut w = create(&path)?;
        table.write_csv(&mut w).map_err(|e| Error::io(&path, e))?;
        finish(&path, w)?;
        written.push(path);
    }

    if let Some(lat) = &report.lattice {
        let path = dir.join("lattice.lrml");
        let mut w = create(&path)?;
        write_snapshot(lat, &mut w)?;
        finish(&path, w)?;
        written.push(path);
    }
    Ok(written)
}
