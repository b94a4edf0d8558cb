//! CSV and JSON file formats.
//!
//! Outcomes: `id,y0,y1`. Covariates: `id,x1,...,xp`. Edges: `target,source`,
//! where a row means the period-0 outcome of `source` may influence the
//! period-1 outcome of `target`. Floats are written in shortest round-trip
//! form, so reading a file back reproduces every value bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use netdiff_core::dgp::Panel;
use netdiff_core::linalg::Matrix;
use netdiff_core::DirectedGraph;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes(
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> std::io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let bytes = csv_bytes(header, rows).map_err(|e| Error::io(path, e))?;
    write_atomic(path, |w| w.write_all(&bytes))
}

/// Edge list with endpoints mapped through `ids`.
pub fn write_edges(path: &Path, g: &DirectedGraph, ids: &[u64]) -> Result<()> {
    let header = ["target".to_string(), "source".to_string()];
    write_csv(
        path,
        &header,
        g.edges()
            .map(|(t, s)| vec![ids[t].to_string(), ids[s].to_string()]),
    )
}

pub fn write_outcomes(path: &Path, ids: &[u64], y0: &[u8], y1: &[u8]) -> Result<()> {
    let header = ["id", "y0", "y1"].map(String::from);
    write_csv(
        path,
        &header,
        (0..ids.len()).map(|i| vec![ids[i].to_string(), y0[i].to_string(), y1[i].to_string()]),
    )
}

pub fn write_covariates(path: &Path, ids: &[u64], x: &Matrix) -> Result<()> {
    let mut header = vec!["id".to_string()];
    header.extend((1..=x.cols()).map(|k| format!("x{k}")));
    write_csv(
        path,
        &header,
        (0..x.rows()).map(|i| {
            let mut row = vec![ids[i].to_string()];
            row.extend(x.row(i).iter().map(f64::to_string));
            row
        }),
    )
}

/// Paths of the three panel files inside a directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelFiles {
    pub edges: PathBuf,
    pub outcomes: PathBuf,
    pub covariates: PathBuf,
}

impl PanelFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            edges: dir.join("edges.csv"),
            outcomes: dir.join("outcomes.csv"),
            covariates: dir.join("covariates.csv"),
        }
    }
}

pub fn write_panel(dir: &Path, panel: &Panel, g: &DirectedGraph) -> Result<PanelFiles> {
    let files = PanelFiles::in_dir(dir);
    write_edges(&files.edges, g, &panel.ids)?;
    write_outcomes(&files.outcomes, &panel.ids, &panel.y0, &panel.y1)?;
    write_covariates(&files.covariates, &panel.ids, &panel.x)?;
    Ok(files)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reads TOML when the extension is `.toml`, JSON otherwise.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if path.extension().is_some_and(|e| e == "toml") {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Toml {
            path: path.to_path_buf(),
            source: e,
        })
    } else {
        read_json(path)
    }
}
