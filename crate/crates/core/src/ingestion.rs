//! Loading dynamic networks from delimited edge lists.
//!
//! # File formats
//!
//! Edge file: UTF-8 with header `source,target,time[,weight]`, comma or tab
//! separated (detected from the header line). `time` is any real timestamp;
//! `weight` defaults to 1 and must be positive.
//!
//! Label file: header `node,label` (the label holds at every time point) or
//! `node,time,label`, where `time` is the window index.
//!
//! Node file (optional): header `node`, one name per line. It fixes the node
//! order; without it nodes are numbered by first appearance in the edge file.
//!
//! Manifest: a TOML document, paths relative to the manifest:
//!
//! ```toml
//! name = "school"
//! edges = "edges.csv"
//! labels = "labels.csv"      # omitted for derived_top_partner
//! nodes = "nodes.csv"        # optional
//! label_mode = "static_node" # or "node_time", "derived_top_partner"
//! directed = false
//! weighted = false
//! windows = 18               # or window_width = 3600.0
//! time_start = 0.0           # optional, defaults to the smallest timestamp
//! time_end = 1.0e5           # optional, defaults to the largest timestamp
//! expected_nodes = 232       # optional; a mismatch only warns
//! ```
//!
//! Timestamps are binned into equal-width windows over
//! `[time_start, time_end]`; the last window is closed so `time_end` itself
//! lands in window `T − 1`. Repeated edges within a window add their
//! weights. Undirected records add their weight in both orientations (once
//! for self-loops). Unweighted graphs keep a binary pattern.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, LabelTable, NodeTimeIndex, NodeTimePair};
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub time: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    StaticNode,
    NodeTime,
    DerivedTopPartner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub preset: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default)]
    pub name: String,
    pub edges: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<PathBuf>,
    pub label_mode: LabelMode,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorRecord>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            reason: e.message().to_string(),
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if m.name.is_empty() {
            m.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.windows, self.window_width) {
            (Some(0), _) => return Err(Error::config("dataset.windows", "must be at least 1")),
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::config("dataset.windows", "give exactly one of windows and window_width"))
            }
            (None, Some(w)) if !(w.is_finite() && w > 0.0) => {
                return Err(Error::config("dataset.window_width", "must be positive"))
            }
            _ => {}
        }
        if self.label_mode != LabelMode::DerivedTopPartner && self.labels.is_none() {
            return Err(Error::config("dataset.labels", "a label file is required for this label mode"));
        }
        Ok(())
    }
}

/// A loaded dataset and its node names.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub name: String,
    pub graph: DynamicGraph,
    pub labels: LabelTable,
    pub node_names: Vec<String>,
    pub node_index: HashMap<String, usize>,
    /// Window edges `[start, end]` actually used.
    pub time_range: (f64, f64),
}

fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

/// `(line number, fields)` per data row.
type Rows = Vec<(usize, Vec<String>)>;

/// Rows of a delimited file whose header must equal one of `headers`.
/// Returns the matched header index and the rows.
fn read_table(path: &Path, headers: &[&[&str]]) -> Result<(usize, Rows)> {
    let text = read_text(path)?;
    let first = text.lines().next().unwrap_or("");
    let delimiter = if first.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    let which = headers
        .iter()
        .position(|h| h.len() == header.len() && h.iter().zip(&header).all(|(a, b)| a == b))
        .ok_or_else(|| {
            let expected: Vec<String> = headers.iter().map(|h| h.join(",")).collect();
            parse_err(1, format!("header '{}' is not one of {}", header.join(","), expected.join(" | ")))
        })?;
    let width = header.len();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((which, rows))
}

/// Parses an edge file.
pub fn read_edges(path: &Path) -> Result<Vec<EdgeRecord>> {
    let (_, rows) = read_table(path, &[&["source", "target", "time"], &["source", "target", "time", "weight"]])?;
    let err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    rows.into_iter()
        .map(|(line, f)| {
            if f[0].is_empty() || f[1].is_empty() {
                return Err(err(line, "empty node name".into()));
            }
            let time: f64 = f[2]
                .parse()
                .map_err(|_| err(line, format!("time '{}' is not a number", f[2])))?;
            if !time.is_finite() {
                return Err(err(line, "time is not finite".into()));
            }
            let weight: f64 = match f.get(3) {
                Some(w) => w.parse().map_err(|_| err(line, format!("weight '{w}' is not a number")))?,
                None => 1.0,
            };
            if !(weight.is_finite() && weight > 0.0) {
                return Err(err(line, format!("weight {weight} must be positive")));
            }
            Ok(EdgeRecord {
                source: f[0].clone(),
                target: f[1].clone(),
                time,
                weight,
            })
        })
        .collect()
}

/// Equal-width binning of timestamps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Windowing {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Windowing {
    pub fn from_count(start: f64, end: f64, count: usize) -> Self {
        Self { start, end, count }
    }

    pub fn from_width(start: f64, end: f64, width: f64) -> Self {
        let count = (((end - start) / width) - 1e-9).ceil().max(1.0) as usize;
        Self {
            start,
            end: start + width * count as f64,
            count,
        }
    }

    pub fn window_of(&self, t: f64) -> Option<usize> {
        if t < self.start || t > self.end {
            return None;
        }
        if self.end == self.start {
            return Some(0);
        }
        let w = ((t - self.start) / (self.end - self.start) * self.count as f64).floor() as usize;
        Some(w.min(self.count - 1))
    }
}

fn windowing(manifest: &DatasetManifest, edges: &[EdgeRecord]) -> Result<Windowing> {
    let lo = edges.iter().map(|e| e.time).fold(f64::INFINITY, f64::min);
    let hi = edges.iter().map(|e| e.time).fold(f64::NEG_INFINITY, f64::max);
    let start = manifest.time_start.unwrap_or(lo);
    let end = manifest.time_end.unwrap_or(hi);
    if end < start {
        return Err(Error::config("dataset.time_end", "must not precede time_start"));
    }
    Ok(match (manifest.windows, manifest.window_width) {
        (Some(count), _) => Windowing::from_count(start, end, count),
        (None, Some(width)) => Windowing::from_width(start, end, width),
        (None, None) => unreachable!("validated"),
    })
}

fn read_nodes(path: &Path) -> Result<Vec<String>> {
    let (_, rows) = read_table(path, &[&["node"]])?;
    Ok(rows.into_iter().map(|(_, mut f)| f.remove(0)).collect())
}

/// Loads the graph and labels a manifest describes.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<LoadedDataset> {
    manifest.validate()?;
    let edge_path = manifest.resolve(&manifest.edges);
    let edges = read_edges(&edge_path)?;
    if edges.is_empty() {
        return Err(Error::Empty("edge file"));
    }
    let win = windowing(manifest, &edges)?;

    let mut node_names: Vec<String> = match &manifest.nodes {
        Some(p) => read_nodes(&manifest.resolve(p))?,
        None => Vec::new(),
    };
    let fixed_nodes = manifest.nodes.is_some();
    let mut node_index: HashMap<String, usize> = HashMap::new();
    for (i, name) in node_names.iter().enumerate() {
        if node_index.insert(name.clone(), i).is_some() {
            return Err(Error::InvalidGraph(format!("node '{name}' listed twice")));
        }
    }
    let mut intern = |name: &str| -> Result<usize> {
        if let Some(&i) = node_index.get(name) {
            return Ok(i);
        }
        if fixed_nodes {
            return Err(Error::InvalidGraph(format!("edge endpoint '{name}' missing from the node file")));
        }
        let i = node_names.len();
        node_names.push(name.to_string());
        node_index.insert(name.to_string(), i);
        Ok(i)
    };

    let mut cells: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); win.count];
    for e in &edges {
        let s = intern(&e.source)?;
        let t = intern(&e.target)?;
        let w = win.window_of(e.time).ok_or_else(|| {
            Error::InvalidGraph(format!(
                "timestamp {} outside the window range [{}, {}]",
                e.time, win.start, win.end
            ))
        })?;
        let weight = if manifest.weighted { e.weight } else { 1.0 };
        // Entry (row, column) = (source, target).
        *cells[w].entry((s, t)).or_insert(0.0) += weight;
        if !manifest.directed && s != t {
            *cells[w].entry((t, s)).or_insert(0.0) += weight;
        }
    }
    let n = node_names.len();
    if let Some(expected) = manifest.expected_nodes {
        if expected != n {
            log::warn!("dataset '{}' has {n} nodes, expected {expected}", manifest.name);
        }
    }
    let snapshots = cells
        .into_iter()
        .map(|c| {
            CscMatrix::from_triplets(
                n,
                n,
                c.into_iter()
                    .map(|((r, col), v)| (r, col, if manifest.weighted { v } else { 1.0 })),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = DynamicGraph::new(snapshots, manifest.directed, manifest.weighted)?;

    let labels = match manifest.label_mode {
        LabelMode::DerivedTopPartner => {
            let mut table = derive_top_partner_labels(&graph)?;
            let names = table
                .class_names()
                .iter()
                .map(|c| node_names[c.parse::<usize>().expect("partner index")].clone())
                .collect();
            table.rename_classes(names)?;
            table
        }
        mode => {
            let path = manifest.resolve(manifest.labels.as_ref().expect("validated"));
            read_labels(&path, mode, &node_index, win.count)?
        }
    };
    Ok(LoadedDataset {
        name: manifest.name.clone(),
        graph,
        labels,
        node_names,
        node_index,
        time_range: (win.start, win.end),
    })
}

fn read_labels(path: &Path, mode: LabelMode, nodes: &HashMap<String, usize>, num_times: usize) -> Result<LabelTable> {
    let header: &[&str] = match mode {
        LabelMode::StaticNode => &["node", "label"],
        _ => &["node", "time", "label"],
    };
    let (_, rows) = read_table(path, &[header])?;
    let err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let classes: BTreeSet<&str> = rows.iter().map(|(_, f)| f[f.len() - 1].as_str()).collect();
    let class_of: HashMap<&str, usize> = classes.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut table = LabelTable::new(nodes.len(), num_times, classes.iter().map(|c| c.to_string()).collect());
    for (line, f) in &rows {
        let node = *nodes
            .get(&f[0])
            .ok_or_else(|| err(*line, format!("label for unknown node '{}'", f[0])))?;
        let class = class_of[f[f.len() - 1].as_str()];
        match mode {
            LabelMode::StaticNode => {
                for t in 0..num_times {
                    table.set(NodeTimePair::new(node, t), class)?;
                }
            }
            _ => {
                let t: usize = f[1]
                    .parse()
                    .map_err(|_| err(*line, format!("time '{}' is not a window index", f[1])))?;
                if t >= num_times {
                    return Err(err(*line, format!("window {t} out of range for T = {num_times}")));
                }
                table.set(NodeTimePair::new(node, t), class)?;
            }
        }
    }
    Ok(table)
}

/// Labels `(i, t)` with the node `i` sends the most weight to at `t + 1`.
///
/// Ties go to the smallest node index. Pairs at the last time point, and
/// nodes with no outgoing edges at `t + 1`, stay unlabeled. Classes are the
/// partners that actually occur, named by node index.
pub fn derive_top_partner_labels(graph: &DynamicGraph) -> Result<LabelTable> {
    let t_max = graph.num_times();
    if t_max < 2 {
        return Err(Error::config("dataset.windows", "top-partner labels need at least two time points"));
    }
    let n = graph.n();
    let mut raw: Vec<Option<usize>> = vec![None; n * t_max];
    let mut ties = 0usize;
    for t in 0..t_max - 1 {
        // Column i of the transpose lists the out-edges of i.
        let out = graph.snapshot(t + 1).transpose();
        for i in 0..n {
            let col = out.column(i);
            let mut best: Option<(usize, f64)> = None;
            for (j, w) in col.iter() {
                match best {
                    Some((_, bw)) if w < bw => {}
                    Some((_, bw)) if w == bw => ties += 1,
                    _ => best = Some((j, w)),
                }
            }
            raw[t * n + i] = best.map(|(j, _)| j);
        }
    }
    if ties > 0 {
        log::info!("top-partner labels: {ties} ties broken towards the smallest node index");
    }
    let partners: BTreeSet<usize> = raw.iter().flatten().copied().collect();
    let class_of: HashMap<usize, usize> = partners.iter().enumerate().map(|(k, &j)| (j, k)).collect();
    let mut table = LabelTable::new(n, t_max, partners.iter().map(|j| j.to_string()).collect());
    for (s, y) in raw.iter().enumerate() {
        if let Some(j) = y {
            table.set(NodeTimePair::new(s % n, s / n), class_of[j])?;
        }
    }
    Ok(table)
}

/// Labeled pairs whose column has a non-zero entry, in time-major order,
/// all unassigned.
pub fn build_index(graph: &DynamicGraph, labels: &LabelTable) -> NodeTimeIndex {
    let mut pairs = Vec::new();
    let mut dropped = 0usize;
    for t in 0..graph.num_times().min(labels.num_times()) {
        let snap = graph.snapshot(t);
        for i in 0..graph.n().min(labels.n()) {
            let pair = NodeTimePair::new(i, t);
            if labels.get(pair).is_none() {
                continue;
            }
            if snap.column(i).is_zero() {
                dropped += 1;
            } else {
                pairs.push(pair);
            }
        }
    }
    if dropped > 0 {
        log::info!("{dropped} labeled pairs have empty columns and were left out of the index");
    }
    NodeTimeIndex::unassigned(pairs).expect("pairs are unique by construction")
}

/// Writes `graph` and `labels` in the canonical layout (`edges.csv`,
/// `nodes.csv`, `labels.csv`, `dataset.toml`) and returns the manifest path.
///
/// Times are written as window indices with windows `[k, k + 1)`, so loading
/// the manifest gives back the same graph. Undirected graphs write each
/// edge once (`source ≤ target`).
pub fn write_canonical(
    dir: &Path,
    name: &str,
    graph: &DynamicGraph,
    labels: &LabelTable,
    node_names: &[String],
    generator: Option<GeneratorRecord>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_err = |path: &Path, e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let edge_path = dir.join("edges.csv");
    let mut w = csv::Writer::from_path(&edge_path).map_err(|e| csv_err(&edge_path, e))?;
    let write = |w: &mut csv::Writer<std::fs::File>, rec: &[String]| w.write_record(rec).map_err(|e| csv_err(&edge_path, e));
    write(&mut w, &["source", "target", "time", "weight"].map(String::from))?;
    for (t, snap) in graph.snapshots().iter().enumerate() {
        for (r, c, v) in snap.triplets() {
            if !graph.is_directed() && r > c {
                continue;
            }
            write(
                &mut w,
                &[node_names[r].clone(), node_names[c].clone(), t.to_string(), format!("{v:?}")],
            )?;
        }
    }
    w.flush().map_err(|e| Error::io(&edge_path, e))?;

    let node_path = dir.join("nodes.csv");
    let mut w = csv::Writer::from_path(&node_path).map_err(|e| csv_err(&node_path, e))?;
    w.write_record(["node"]).map_err(|e| csv_err(&node_path, e))?;
    for n in node_names {
        w.write_record([n]).map_err(|e| csv_err(&node_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&node_path, e))?;

    let label_path = dir.join("labels.csv");
    let mut w = csv::Writer::from_path(&label_path).map_err(|e| csv_err(&label_path, e))?;
    w.write_record(["node", "time", "label"]).map_err(|e| csv_err(&label_path, e))?;
    for (pair, y) in labels.labeled_pairs() {
        w.write_record([node_names[pair.node].as_str(), &pair.time.to_string(), &labels.class_names()[y]])
            .map_err(|e| csv_err(&label_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&label_path, e))?;

    let manifest = DatasetManifest {
        name: name.to_string(),
        edges: "edges.csv".into(),
        labels: Some("labels.csv".into()),
        nodes: Some("nodes.csv".into()),
        label_mode: LabelMode::NodeTime,
        directed: graph.is_directed(),
        weighted: graph.is_weighted(),
        windows: Some(graph.num_times()),
        window_width: None,
        time_start: Some(0.0),
        time_end: Some(graph.num_times() as f64),
        expected_nodes: Some(graph.n()),
        generator,
        base_dir: PathBuf::new(),
    };
    let path = dir.join("dataset.toml");
    std::fs::write(&path, manifest.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn manifest(dir: &Path, extra: &str) -> DatasetManifest {
        let p = write(dir, "m.toml", &format!("edges = \"edges.csv\"\nlabels = \"labels.csv\"\n{extra}"));
        DatasetManifest::from_file(&p).unwrap()
    }

    #[test]
    fn three_edges_one_window() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "edges.csv", "source,target,time\na,b,0\nb,c,1\na,b,2\n");
        write(dir.path(), "labels.csv", "node,label\na,x\nb,y\nc,x\n");
        let m = manifest(dir.path(), "label_mode = \"static_node\"\nwindows = 1\n");
        let d = load_dataset(&m).unwrap();
        assert_eq!(d.graph.num_times(), 1);
        assert_eq!(d.graph.n(), 3);
        // a-b (twice, binary) and b-c, both orientations.
        assert_eq!(d.graph.snapshot(0).nnz(), 4);
        assert_eq!(d.labels.d(), 2);
        assert!(d.graph.snapshot(0).is_symmetric());
    }

    #[test]
    fn closed_last_window_and_tabs() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "edges.csv", "source\ttarget\ttime\tweight\na\tb\t0\t2.0\nb\tc\t5\t1.5\nc\ta\t10\t1\n");
        write(dir.path(), "labels.csv", "node,time,label\na,0,p\nc,1,q\n");
        let m = manifest(dir.path(), "label_mode = \"node_time\"\nwindows = 2\nweighted = true\ndirected = true\n");
        let d = load_dataset(&m).unwrap();
        assert_eq!(d.graph.num_times(), 2);
        // t = 10 is the range maximum and lands in the last window.
        assert_eq!(d.graph.snapshot(1).get(2, 0), 1.0);
        assert_eq!(d.graph.snapshot(1).get(1, 2), 1.5);
        assert_eq!(d.graph.snapshot(0).get(0, 1), 2.0);
        assert_eq!(d.labels.get(NodeTimePair::new(2, 1)), Some(1));
    }

    #[test]
    fn malformed_rows_report_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "edges.csv", "source,target,time\na,b,0\na,b,soon\n");
        match read_edges(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(dir.path(), "e2.csv", "from,to,time\na,b,0\n");
        assert!(matches!(read_edges(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn unknown_label_node_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "edges.csv", "source,target,time\na,b,0\n");
        write(dir.path(), "labels.csv", "node,label\nz,x\n");
        let m = manifest(dir.path(), "label_mode = \"static_node\"\nwindows = 1\n");
        assert!(matches!(load_dataset(&m), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn top_partner_examples() {
        // node 0 sends {1: 5.0, 2: 7.5} at t = 1 and ties {1: 3, 2: 3} at t = 2.
        let edges = vec![
            (1, 0, 1, 5.0),
            (1, 0, 2, 7.5),
            (2, 0, 1, 3.0),
            (2, 0, 2, 3.0),
            (0, 1, 0, 1.0),
        ];
        let g = DynamicGraph::from_edges(3, 3, edges, true, true).unwrap();
        let labels = derive_top_partner_labels(&g).unwrap();
        let name = |p| labels.get(p).map(|k| labels.class_names()[k].clone());
        assert_eq!(name(NodeTimePair::new(0, 0)).as_deref(), Some("2"));
        assert_eq!(name(NodeTimePair::new(0, 1)).as_deref(), Some("1"));
        assert_eq!(name(NodeTimePair::new(0, 2)), None);
        assert_eq!(name(NodeTimePair::new(1, 0)), None);
    }

    #[test]
    fn build_index_filters() {
        let g = DynamicGraph::from_edges(3, 2, vec![(0, 0, 1, 1.0), (0, 1, 0, 1.0), (1, 0, 1, 1.0), (1, 1, 0, 1.0)], false, false)
            .unwrap();
        let mut labels = LabelTable::new(3, 2, vec!["a".into()]);
        for t in 0..2 {
            for i in 0..3 {
                labels.set(NodeTimePair::new(i, t), 0).unwrap();
            }
        }
        labels.clear(NodeTimePair::new(1, 1));
        let idx = build_index(&g, &labels);
        assert_eq!(
            idx.pairs(),
            &[NodeTimePair::new(0, 0), NodeTimePair::new(1, 0), NodeTimePair::new(0, 1)]
        );
    }
}
