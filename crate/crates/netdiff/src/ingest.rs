//! Validated loading of an observed panel and its graph from CSV files.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use netdiff_core::dgp::Panel;
use netdiff_core::linalg::Matrix;
use netdiff_core::DirectedGraph;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How edge rows are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `target,source` as written.
    #[default]
    AsIs,
    /// Every edge is transposed.
    Reversed,
}

/// What to do with a node that has an empty or `NA` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop the node and every edge touching it.
    #[default]
    Drop,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Columns {
    pub id: String,
    pub y0: String,
    pub y1: String,
    pub target: String,
    pub source: String,
    /// Covariate columns in order; all non-id columns when unset.
    pub covariates: Option<Vec<String>>,
}

impl Default for Columns {
    fn default() -> Self {
        Self {
            id: "id".into(),
            y0: "y0".into(),
            y1: "y1".into(),
            target: "target".into(),
            source: "source".into(),
            covariates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub edges: PathBuf,
    pub outcomes: PathBuf,
    pub covariates: PathBuf,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default)]
    pub columns: Columns,
    #[serde(default)]
    pub missing: MissingPolicy,
}

impl IngestManifest {
    pub fn new(
        edges: impl Into<PathBuf>,
        outcomes: impl Into<PathBuf>,
        covariates: impl Into<PathBuf>,
    ) -> Self {
        Self {
            edges: edges.into(),
            outcomes: outcomes.into(),
            covariates: covariates.into(),
            direction: Direction::AsIs,
            columns: Columns::default(),
            missing: MissingPolicy::Drop,
        }
    }

    /// Loads a TOML or JSON manifest; relative paths are taken from the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m: Self = crate::io::read_config(path)?;
        if let Some(base) = path.parent() {
            for p in [&mut m.edges, &mut m.outcomes, &mut m.covariates] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub panel: Panel,
    pub graph: DirectedGraph,
    pub covariate_names: Vec<String>,
    /// Ids dropped for missing fields, in outcomes-file order.
    pub dropped_nodes: Vec<u64>,
    /// Edges removed because an endpoint was dropped.
    pub dropped_edges: usize,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan")
}

struct Table {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let csv_err = |e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                kind => Error::schema(path, format!("{kind:?}")),
            })?;
        let headers = rdr
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(csv_err)?;
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(&self.path, format!("missing column `{name}`")))
    }

    fn id(&self, row: usize, field: &str) -> Result<u64> {
        field.trim().parse().map_err(|_| {
            Error::schema(
                &self.path,
                format!("row {}: `{field}` is not a node id", row + 2),
            )
        })
    }
}

fn binary(t: &Table, row: usize, field: &str) -> Result<Option<u8>> {
    match field.trim() {
        f if is_missing(f) => Ok(None),
        "0" => Ok(Some(0)),
        "1" => Ok(Some(1)),
        other => Err(Error::schema(
            &t.path,
            format!("row {}: outcome `{other}` is not 0 or 1", row + 2),
        )),
    }
}

fn real(t: &Table, row: usize, field: &str) -> Result<Option<f64>> {
    if is_missing(field) {
        return Ok(None);
    }
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::schema(
            &t.path,
            format!("row {}: `{field}` is not a finite number", row + 2),
        )),
    }
}

/// Reads and cross-validates the three files. Node order follows the
/// outcomes file and node ids are kept as panel ids.
pub fn ingest_panel(m: &IngestManifest) -> Result<Ingested> {
    let cols = &m.columns;

    let out = Table::read(&m.outcomes)?;
    let (c_id, c_y0, c_y1) = (
        out.column(&cols.id)?,
        out.column(&cols.y0)?,
        out.column(&cols.y1)?,
    );
    let mut outcomes = Vec::with_capacity(out.rows.len());
    let mut seen = HashSet::new();
    for (r, rec) in out.rows.iter().enumerate() {
        let id = out.id(r, &rec[c_id])?;
        if !seen.insert(id) {
            return Err(Error::schema(&out.path, format!("duplicate node id {id}")));
        }
        outcomes.push((
            id,
            binary(&out, r, &rec[c_y0])?,
            binary(&out, r, &rec[c_y1])?,
        ));
    }

    let cov = Table::read(&m.covariates)?;
    let k_id = cov.column(&cols.id)?;
    let (names, k_cols): (Vec<String>, Vec<usize>) = match &cols.covariates {
        Some(list) => {
            let idx = list
                .iter()
                .map(|c| cov.column(c))
                .collect::<Result<Vec<_>>>()?;
            (list.clone(), idx)
        }
        None => cov
            .headers
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != k_id)
            .map(|(k, h)| (h.clone(), k))
            .unzip(),
    };
    if names.is_empty() {
        return Err(Error::schema(&cov.path, "no covariate columns"));
    }
    let mut covariates: HashMap<u64, Vec<Option<f64>>> = HashMap::with_capacity(cov.rows.len());
    for (r, rec) in cov.rows.iter().enumerate() {
        let id = cov.id(r, &rec[k_id])?;
        let values = k_cols
            .iter()
            .map(|&k| real(&cov, r, &rec[k]))
            .collect::<Result<Vec<_>>>()?;
        if covariates.insert(id, values).is_some() {
            return Err(Error::schema(&cov.path, format!("duplicate node id {id}")));
        }
    }
    for &(id, ..) in &outcomes {
        if !covariates.contains_key(&id) {
            return Err(Error::OrphanNode {
                id,
                found_in: out.path.clone(),
                missing_from: cov.path.clone(),
            });
        }
    }
    for rec in &cov.rows {
        let id: u64 = rec[k_id].trim().parse().expect("validated above");
        if !seen.contains(&id) {
            return Err(Error::OrphanNode {
                id,
                found_in: cov.path.clone(),
                missing_from: out.path.clone(),
            });
        }
    }

    let p = names.len();
    let mut ids = Vec::new();
    let mut y0 = Vec::new();
    let mut y1 = Vec::new();
    let mut data = Vec::new();
    let mut dropped_nodes = Vec::new();
    for &(id, a, b) in &outcomes {
        let x = &covariates[&id];
        match (a, b, x.iter().all(Option::is_some)) {
            (Some(a), Some(b), true) => {
                ids.push(id);
                y0.push(a);
                y1.push(b);
                data.extend(x.iter().map(|v| v.unwrap()));
            }
            _ => match m.missing {
                MissingPolicy::Drop => dropped_nodes.push(id),
                MissingPolicy::Error => {
                    return Err(Error::schema(
                        &out.path,
                        format!("node {id} has a missing field"),
                    ));
                }
            },
        }
    }
    if !dropped_nodes.is_empty() {
        log::warn!(
            "dropped {} node(s) with missing fields",
            dropped_nodes.len()
        );
    }

    let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let ed = Table::read(&m.edges)?;
    let (e_t, e_s) = (ed.column(&cols.target)?, ed.column(&cols.source)?);
    let mut edges = Vec::with_capacity(ed.rows.len());
    let mut dropped_edges = 0;
    for (r, rec) in ed.rows.iter().enumerate() {
        let t = ed.id(r, &rec[e_t])?;
        let s = ed.id(r, &rec[e_s])?;
        for id in [t, s] {
            if !seen.contains(&id) {
                return Err(Error::OrphanNode {
                    id,
                    found_in: ed.path.clone(),
                    missing_from: out.path.clone(),
                });
            }
        }
        if t == s {
            return Err(Error::schema(
                &ed.path,
                format!("row {}: self-loop on node {t}", r + 2),
            ));
        }
        match (index.get(&t), index.get(&s)) {
            (Some(&ti), Some(&si)) => edges.push(match m.direction {
                Direction::AsIs => (ti, si),
                Direction::Reversed => (si, ti),
            }),
            _ => dropped_edges += 1,
        }
    }
    if dropped_edges > 0 {
        log::warn!("dropped {dropped_edges} edge(s) touching dropped nodes");
    }

    if ids.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let n = ids.len();
    let graph = DirectedGraph::from_edge_list(&edges, n)?;
    let x = Matrix::from_vec(n, p, data)?;
    let panel = Panel::with_ids(y0, y1, x, ids)?;
    Ok(Ingested {
        panel,
        graph,
        covariate_names: names,
        dropped_nodes,
        dropped_edges,
    })
}

/// Reads an edge list alone; nodes are `0..n` with `n` one past the largest id
/// unless given.
pub fn read_edge_list(path: &Path, n: Option<usize>, columns: &Columns) -> Result<DirectedGraph> {
    let ed = Table::read(path)?;
    let (e_t, e_s) = (ed.column(&columns.target)?, ed.column(&columns.source)?);
    let mut edges = Vec::with_capacity(ed.rows.len());
    for (r, rec) in ed.rows.iter().enumerate() {
        edges.push((ed.id(r, &rec[e_t])? as usize, ed.id(r, &rec[e_s])? as usize));
    }
    let n = n.unwrap_or_else(|| edges.iter().map(|&(t, s)| t.max(s) + 1).max().unwrap_or(0));
    Ok(DirectedGraph::from_edge_list(&edges, n)?)
}
