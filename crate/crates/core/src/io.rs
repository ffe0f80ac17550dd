//! Delimited-text ingestion and result files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim};
use serde::Serialize;

use crate::engine::{RoundStats, RunConfig, RunResult, SkipCounts, StopReason};
use crate::error::{Error, Result};
use crate::model::{Dataset, MergeLog};
use crate::oracle::OracleResult;
use crate::scheduler::UtilizationStats;

/// How the first line of an input file is treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum HeaderMode {
    /// A header is present when any feature field of the first line is not a number.
    #[default]
    Auto,
    Present,
    Absent,
}

/// Column holding point identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdColumn {
    Index(usize),
    Name(String),
}

impl IdColumn {
    /// A 0-based column number, or otherwise a header name.
    pub fn parse(spec: &str) -> Self {
        match spec.trim().parse::<usize>() {
            Ok(i) => IdColumn::Index(i),
            Err(_) => IdColumn::Name(spec.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub header: HeaderMode,
    pub id_column: Option<IdColumn>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { delimiter: b',', header: HeaderMode::Auto, id_column: None }
    }
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Reads and validates a point table. Row order is preserved; errors cite
/// 1-based line numbers.
pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .delimiter(options.delimiter)
        .from_reader(file);
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };

    let mut records = reader.records();
    let Some(first) = records.next().transpose().map_err(csv_err)? else {
        return Err(Error::EmptyFile(path.to_path_buf()));
    };
    let width = first.len();
    let id_index = |header: Option<&StringRecord>| -> Result<Option<usize>> {
        match &options.id_column {
            None => Ok(None),
            Some(IdColumn::Index(i)) if *i < width => Ok(Some(*i)),
            Some(IdColumn::Index(i)) => Err(Error::UnknownIdColumn(i.to_string())),
            Some(IdColumn::Name(name)) => header
                .and_then(|h| h.iter().position(|f| f == name))
                .map(Some)
                .ok_or_else(|| Error::UnknownIdColumn(name.clone())),
        }
    };
    let has_header = match options.header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => {
            let named = matches!(options.id_column, Some(IdColumn::Name(_)));
            let skip = match &options.id_column {
                Some(IdColumn::Index(i)) => Some(*i),
                _ => None,
            };
            named
                || first
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| Some(*k) != skip)
                    .any(|(_, f)| f.parse::<f64>().is_err())
        }
    };
    let id_col = id_index(has_header.then_some(&first))?;
    let d = width - usize::from(id_col.is_some());
    if d == 0 {
        return Err(Error::NoFeatures);
    }

    let mut values = Vec::new();
    let mut ids = id_col.map(|_| Vec::new());
    let mut seen = std::collections::HashMap::new();
    let data_rows = std::iter::once(Ok(first))
        .skip(usize::from(has_header))
        .chain(records);
    for record in data_rows {
        let record = record.map_err(csv_err)?;
        let line = line_of(&record);
        if record.len() != width {
            return Err(Error::RaggedRow { line, expected: width, found: record.len() });
        }
        for (column, field) in record.iter().enumerate() {
            if Some(column) == id_col {
                if seen.insert(field.to_string(), line).is_some() {
                    return Err(Error::DuplicateId { line, id: field.to_string() });
                }
                ids.as_mut().expect("id column").push(field.to_string());
                continue;
            }
            let value: f64 = field.parse().map_err(|_| Error::NonNumericField {
                line,
                column: column + 1,
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteField { line, column: column + 1, value: field.to_string() });
            }
            values.push(value);
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let dataset = Dataset::new(values.len() / d, d, values)?;
    match ids {
        Some(ids) => dataset.with_ids(ids),
        None => Ok(dataset),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes the point table with a header (`id` column first when the dataset
/// carries explicit ids). Values use the shortest exact decimal form, so
/// loading the file back yields identical numbers.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    let mut header: Vec<String> = (0..dataset.dim()).map(|k| format!("x{k}")).collect();
    if dataset.has_explicit_ids() {
        header.insert(0, "id".into());
    }
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let mut line = String::new();
    for i in 0..dataset.len() {
        line.clear();
        if dataset.has_explicit_ids() {
            line.push_str(&dataset.id(i));
            line.push(',');
        }
        for (k, v) in dataset.point(i).iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes `id,label` rows.
pub fn write_labels(dataset: &Dataset, labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "id,label").map_err(io)?;
    for (i, label) in labels.iter().enumerate() {
        writeln!(out, "{},{label}", dataset.id(i)).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Debug, Serialize)]
struct StatsFile<'a> {
    config: &'a RunConfig,
    points: usize,
    features: usize,
    rounds: usize,
    merges: usize,
    clusters: usize,
    pairs_selected: usize,
    skips: SkipCounts,
    stop_reason: StopReason,
    wall_secs: f64,
    pipeline_passes: usize,
    utilization_percent: f64,
    utilization: &'a UtilizationStats,
    per_round: &'a [RoundStats],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub assignments: PathBuf,
    pub merges: PathBuf,
    pub stats: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            assignments: dir.join("assignments.csv"),
            merges: dir.join("merges.csv"),
            stats: dir.join("stats.json"),
        }
    }
}

/// Writes `assignments.csv`, `merges.csv` and `stats.json` into `dir`.
///
/// Cluster labels and merge roots are written as point ids; merge distances
/// are in metric units.
pub fn write_outputs(
    result: &RunResult,
    dataset: &Dataset,
    config: &RunConfig,
    dir: impl AsRef<Path>,
) -> Result<OutputPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths::in_dir(dir);

    let mut out = create(&paths.assignments)?;
    let io = |e| Error::io(&paths.assignments, e);
    writeln!(out, "id,cluster").map_err(io)?;
    for (i, &root) in result.assignments.iter().enumerate() {
        writeln!(out, "{},{}", dataset.id(i), dataset.id(root)).map_err(io)?;
    }
    out.flush().map_err(io)?;

    let mut out = create(&paths.merges)?;
    let io = |e| Error::io(&paths.merges, e);
    writeln!(out, "step,round,root_a,root_b,distance,new_size").map_err(io)?;
    for e in result.merges.iter() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.step,
            e.round,
            dataset.id(e.root_a),
            dataset.id(e.root_b),
            e.dist,
            e.new_size
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)?;

    let stats = StatsFile {
        config,
        points: dataset.len(),
        features: dataset.dim(),
        rounds: result.rounds,
        merges: result.merges.len(),
        clusters: result.clusters,
        pairs_selected: result.round_stats.iter().map(|r| r.pairs_selected).sum(),
        skips: result.skips,
        stop_reason: result.stop,
        wall_secs: result.wall_secs,
        pipeline_passes: result.scans,
        utilization_percent: result.utilization.aggregate_utilization(),
        utilization: &result.utilization,
        per_round: &result.round_stats,
    };
    let file = create(&paths.stats)?;
    serde_json::to_writer_pretty(file, &stats)?;
    Ok(paths)
}

/// Packages an oracle run in the engine's result shape so it can be written
/// with [`write_outputs`].
pub fn oracle_run_result(oracle: OracleResult, config: &RunConfig, wall_secs: f64) -> RunResult {
    let merges = oracle.merge_log();
    let clusters = oracle.assignments.len() - merges.len();
    let stop = if config.constraints.kl1.is_some_and(|k| clusters < k) {
        StopReason::Kl1Reached
    } else if clusters == 1 {
        StopReason::SingleCluster
    } else {
        StopReason::NoEligiblePairs
    };
    let rounds = merges.iter().map(|e| e.round).max().unwrap_or(0);
    RunResult {
        merges,
        assignments: oracle.assignments,
        rounds,
        stop,
        clusters,
        skips: SkipCounts::default(),
        scans: 0,
        wall_secs,
        round_stats: Vec::new(),
        utilization: UtilizationStats::default(),
    }
}

/// Reads a `merges.csv` back into a merge log, mapping ids to indices.
pub fn read_merges(path: impl AsRef<Path>, dataset: &Dataset) -> Result<MergeLog> {
    let path = path.as_ref();
    let mut reader = ReaderBuilder::new()
        .trim(Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        let line = line_of(&record);
        let num = |k: usize| -> Result<f64> {
            record[k].parse().map_err(|_| Error::NonNumericField {
                line,
                column: k + 1,
                value: record[k].to_string(),
            })
        };
        let index = |k: usize| -> Result<usize> {
            dataset
                .index_of(&record[k])
                .ok_or_else(|| Error::UnknownIdColumn(record[k].to_string()))
        };
        if record.len() != 6 {
            return Err(Error::RaggedRow { line, expected: 6, found: record.len() });
        }
        events.push(crate::model::MergeEvent {
            step: num(0)? as usize,
            round: num(1)? as usize,
            root_a: index(2)?,
            root_b: index(3)?,
            dist: num(4)?,
            new_size: num(5)? as usize,
        });
    }
    Ok(MergeLog { events })
}

/// Reads an `assignments.csv` into point -> root index labels.
pub fn read_assignments(path: impl AsRef<Path>, dataset: &Dataset) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let mut reader = ReaderBuilder::new()
        .trim(Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    let mut labels = vec![usize::MAX; dataset.len()];
    for record in reader.records() {
        let record = record.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        let lookup = |k: usize| {
            dataset
                .index_of(&record[k])
                .ok_or_else(|| Error::UnknownIdColumn(record[k].to_string()))
        };
        labels[lookup(0)?] = lookup(1)?;
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_simple_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(&dir, "a.csv", "0,0\n3,4\n0,4\n");
        let ds = load_dataset(&path, &LoadOptions::default()).unwrap();
        assert_eq!((ds.len(), ds.dim()), (3, 2));
        assert_eq!(ds.point(1), &[3.0, 4.0]);
    }

    #[test]
    fn header_and_id_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(&dir, "b.csv", "name,x,y\np,1,2\nq,3,4\n");
        let opts = LoadOptions { id_column: Some(IdColumn::parse("name")), ..Default::default() };
        let ds = load_dataset(&path, &opts).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.id(1), "q");
        assert_eq!(ds.index_of("p"), Some(0));
        let opts = LoadOptions { id_column: Some(IdColumn::Index(0)), ..Default::default() };
        assert_eq!(load_dataset(&path, &opts).unwrap().dim(), 2);
        let opts = LoadOptions { id_column: Some(IdColumn::parse("missing")), ..Default::default() };
        assert!(matches!(load_dataset(&path, &opts), Err(Error::UnknownIdColumn(_))));
    }

    #[test]
    fn diagnostics_cite_lines() {
        let dir = tempfile::tempdir().unwrap();
        let nan = write_tmp(&dir, "nan.csv", "1,NaN\n");
        assert!(matches!(load_dataset(&nan, &LoadOptions::default()), Err(Error::NonFiniteField { line: 1, .. })));
        let inf = write_tmp(&dir, "inf.csv", "x,y\n1,2\n3,inf\n");
        assert!(matches!(load_dataset(&inf, &LoadOptions::default()), Err(Error::NonFiniteField { line: 3, .. })));
        let ragged = write_tmp(&dir, "r.csv", "1,2\n3\n");
        assert!(matches!(
            load_dataset(&ragged, &LoadOptions::default()),
            Err(Error::RaggedRow { line: 2, expected: 2, found: 1 })
        ));
        let text = write_tmp(&dir, "t.csv", "1,2\n3,abc\n");
        let err = load_dataset(&text, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonNumericField { line: 2, column: 2, .. }));
        assert!(err.to_string().contains("line 2"));
        let empty = write_tmp(&dir, "e.csv", "");
        assert!(matches!(load_dataset(&empty, &LoadOptions::default()), Err(Error::EmptyFile(_))));
        let header_only = write_tmp(&dir, "h.csv", "x,y\n");
        assert!(matches!(load_dataset(&header_only, &LoadOptions::default()), Err(Error::EmptyFile(_))));
        let dup = write_tmp(&dir, "d.csv", "a,1\nb,2\na,3\n");
        let opts = LoadOptions { id_column: Some(IdColumn::Index(0)), ..Default::default() };
        assert!(matches!(load_dataset(&dup, &opts), Err(Error::DuplicateId { line: 3, .. })));
        let missing = dir.path().join("nope.csv");
        assert!(matches!(load_dataset(&missing, &LoadOptions::default()), Err(Error::Io { .. })));
    }

    #[test]
    fn semicolon_delimiter() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(&dir, "s.csv", "1.5;2\n-3;4e2\n");
        let opts = LoadOptions { delimiter: b';', header: HeaderMode::Absent, ..Default::default() };
        let ds = load_dataset(&path, &opts).unwrap();
        assert_eq!(ds.point(1), &[-3.0, 400.0]);
    }

    #[test]
    fn export_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::from_rows(&[[0.1, 1e-300], [1.0 / 3.0, -2.5e17]])
            .unwrap()
            .with_ids(vec!["a".into(), "b".into()])
            .unwrap();
        let path = dir.path().join("x.csv");
        write_dataset(&ds, &path).unwrap();
        let opts = LoadOptions { id_column: Some(IdColumn::parse("id")), ..Default::default() };
        let back = load_dataset(&path, &opts).unwrap();
        assert_eq!(back.values(), ds.values());
        assert_eq!(back.id(1), "b");
    }
}
