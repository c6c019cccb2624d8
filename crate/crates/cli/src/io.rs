//! CSV ingestion and atomic output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use wtx_core::analysis::{Dendrogram, Embedding};
use wtx_core::{DistanceMatrix, FiniteMetricMeasureSpace, PointCloud};

use crate::CliError;

/// How to read an input table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum InputKind {
    /// Square numeric tables are distance matrices, anything else a cloud.
    #[default]
    Auto,
    Distance,
    Points,
}

#[derive(Debug, Clone)]
pub enum Input {
    Distance(DistanceMatrix),
    Points(PointCloud),
}

impl Input {
    pub fn len(&self) -> usize {
        match self {
            Input::Distance(d) => d.len(),
            Input::Points(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The metric-measure space with uniform weights unless `weights` is set.
    pub fn space(&self, weights: Option<Vec<f64>>) -> Result<FiniteMetricMeasureSpace, CliError> {
        let weights = weights.unwrap_or_else(|| wtx_core::metric::uniform_weights(self.len()));
        Ok(match self {
            Input::Distance(d) => FiniteMetricMeasureSpace::new(d.clone(), weights)?,
            Input::Points(c) => wtx_core::metric::from_point_cloud(&c.clone().with_weights(weights)?),
        })
    }
}

/// Non-empty records of a CSV file with their 1-based line numbers.
/// Lines starting with `#` are comments.
pub struct Table {
    pub path: PathBuf,
    pub rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut rows = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k as u64 + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let record = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .from_reader(trimmed.as_bytes())
                .records()
                .next()
                .transpose()
                .map_err(|e| CliError::csv(path, line, e.to_string()))?
                .unwrap_or_default();
            rows.push((line, record.iter().map(str::to_string).collect()));
        }
        if rows.is_empty() {
            return Err(CliError::csv(path, 0, "no data rows"));
        }
        Ok(Table {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn error(&self, line: u64, msg: impl Into<String>) -> CliError {
        CliError::csv(&self.path, line, msg)
    }

    fn number(&self, line: u64, col: usize, field: &str) -> Result<f64, CliError> {
        let v: f64 = field
            .parse()
            .map_err(|_| self.error(line, format!("column {}: `{field}` is not a number", col + 1)))?;
        if !v.is_finite() {
            return Err(self.error(line, format!("column {}: non-finite value", col + 1)));
        }
        Ok(v)
    }

    /// Drops a leading row none of whose fields parse as numbers.
    fn skip_header(&mut self) {
        if self.rows.len() > 1 && self.rows[0].1.iter().all(|f| f.parse::<f64>().is_err()) {
            self.rows.remove(0);
        }
    }

    /// All rows numeric with the width of the first.
    fn numeric(&self, skip_last: bool) -> Result<Vec<Vec<f64>>, CliError> {
        let width = self.rows[0].1.len();
        self.rows
            .iter()
            .map(|(line, fields)| {
                if fields.len() != width {
                    return Err(self.error(
                        *line,
                        format!("expected {width} columns, found {}", fields.len()),
                    ));
                }
                let take = if skip_last { width - 1 } else { width };
                fields[..take]
                    .iter()
                    .enumerate()
                    .map(|(c, f)| self.number(*line, c, f))
                    .collect()
            })
            .collect()
    }

    fn has_label_column(&self) -> bool {
        self.rows[0].1.last().is_some_and(|f| f.parse::<f64>().is_err())
    }
}

pub fn read_distance(path: &Path) -> Result<DistanceMatrix, CliError> {
    let t = Table::read(path)?;
    distance_from(&t)
}

fn distance_from(t: &Table) -> Result<DistanceMatrix, CliError> {
    let rows = t.numeric(false)?;
    let n = rows.len();
    if rows[0].len() != n {
        return Err(t.error(
            t.rows[0].0,
            format!("distance matrix must be square: {n} rows of {} columns", rows[0].len()),
        ));
    }
    Ok(DistanceMatrix::from_rows(&rows)?)
}

pub fn read_cloud(path: &Path) -> Result<PointCloud, CliError> {
    let mut t = Table::read(path)?;
    t.skip_header();
    cloud_from(&t)
}

fn cloud_from(t: &Table) -> Result<PointCloud, CliError> {
    let labelled = t.has_label_column();
    if labelled && t.rows[0].1.len() < 2 {
        return Err(t.error(t.rows[0].0, "point cloud rows need at least one coordinate"));
    }
    let rows = t.numeric(labelled)?;
    let cloud = PointCloud::from_rows(&rows)?;
    if labelled {
        let labels = t.rows.iter().map(|(_, f)| f.last().cloned().unwrap_or_default()).collect();
        Ok(cloud.with_labels(labels)?)
    } else {
        Ok(cloud)
    }
}

pub fn read_input(path: &Path, kind: InputKind) -> Result<Input, CliError> {
    let mut t = Table::read(path)?;
    match kind {
        InputKind::Distance => distance_from(&t).map(Input::Distance),
        InputKind::Points => {
            t.skip_header();
            cloud_from(&t).map(Input::Points)
        }
        InputKind::Auto => {
            let width = t.rows[0].1.len();
            if !t.has_label_column() && width == t.rows.len() {
                distance_from(&t).map(Input::Distance)
            } else {
                t.skip_header();
                cloud_from(&t).map(Input::Points)
            }
        }
    }
}

/// One value per line.
pub fn read_weights(path: &Path) -> Result<Vec<f64>, CliError> {
    let t = Table::read(path)?;
    t.rows
        .iter()
        .map(|(line, fields)| {
            if fields.len() != 1 {
                return Err(t.error(*line, format!("expected 1 column, found {}", fields.len())));
            }
            t.number(*line, 0, &fields[0])
        })
        .collect()
}

/// A measure over `n` ground points: one mass per line (zeros leave a point
/// out of the support), or `index,mass` pairs.
pub fn read_measure(path: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let t = Table::read(path)?;
    let width = t.rows[0].1.len();
    let mut mass = vec![0.0; n];
    match width {
        1 => {
            if t.rows.len() != n {
                return Err(t.error(
                    t.rows.last().map_or(0, |r| r.0),
                    format!("{} masses for {n} ground points", t.rows.len()),
                ));
            }
            for (k, (line, f)) in t.rows.iter().enumerate() {
                if f.len() != 1 {
                    return Err(t.error(*line, format!("expected 1 column, found {}", f.len())));
                }
                mass[k] = t.number(*line, 0, &f[0])?;
            }
        }
        2 => {
            for (line, f) in &t.rows {
                if f.len() != 2 {
                    return Err(t.error(*line, format!("expected 2 columns, found {}", f.len())));
                }
                let idx: usize = f[0]
                    .parse()
                    .map_err(|_| t.error(*line, format!("column 1: `{}` is not an index", f[0])))?;
                if idx >= n {
                    return Err(t.error(*line, format!("index {idx} outside {n} ground points")));
                }
                mass[idx] += t.number(*line, 1, &f[1])?;
            }
        }
        _ => return Err(t.error(t.rows[0].0, format!("expected 1 or 2 columns, found {width}"))),
    }
    Ok(mass)
}

/// Merge rows `left,right,height,size` after a header line.
pub fn read_dendrogram(path: &Path) -> Result<Vec<[f64; 4]>, CliError> {
    let mut t = Table::read(path)?;
    t.skip_header();
    let rows = t.numeric(false)?;
    if rows[0].len() != 4 {
        return Err(t.error(t.rows[0].0, format!("expected 4 columns, found {}", rows[0].len())));
    }
    Ok(rows.into_iter().map(|r| [r[0], r[1], r[2], r[3]]).collect())
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(&num(v));
    }
    out.push('\n');
}

pub fn distance_csv(d: &DistanceMatrix) -> String {
    let mut out = String::new();
    for row in d.rows() {
        push_row(&mut out, row.iter().copied());
    }
    out
}

pub fn cloud_csv(c: &PointCloud) -> String {
    let mut out = String::new();
    for (i, p) in c.points().enumerate() {
        push_row(&mut out, p.iter().copied());
        if let Some(labels) = c.labels() {
            out.pop();
            out.push(',');
            out.push_str(&labels[i]);
            out.push('\n');
        }
    }
    out
}

pub fn dendrogram_csv(d: &Dendrogram) -> String {
    let mut out = String::from("left,right,height,size\n");
    for m in &d.merges {
        let _ = writeln!(out, "{},{},{},{}", m.left, m.right, num(m.height), m.size);
    }
    out
}

pub fn embedding_csv(e: &Embedding) -> String {
    let eig: Vec<String> = e.eigenvalues.iter().map(|&v| num(v)).collect();
    let mut out = format!("# eigenvalues: {}\n", eig.join(","));
    for i in 0..e.n {
        push_row(&mut out, e.point(i).iter().copied());
    }
    out
}

pub fn labels_csv(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

pub fn distance_json(d: &DistanceMatrix) -> String {
    let rows: Vec<&[f64]> = d.rows().collect();
    serde_json::to_string(&serde_json::json!({ "n": d.len(), "rows": rows })).expect("finite values")
}

pub fn cloud_json(c: &PointCloud) -> String {
    let points: Vec<&[f64]> = c.points().collect();
    serde_json::to_string(&serde_json::json!({
        "dim": c.dim(),
        "points": points,
        "labels": c.labels(),
    }))
    .expect("finite values")
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn num_round_trips() {
        for x in [0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn auto_detection() {
        let dir = tempfile::tempdir().unwrap();
        let sq = file(&dir, "d.csv", "0,1\n1,0\n");
        assert!(matches!(read_input(&sq, InputKind::Auto).unwrap(), Input::Distance(_)));
        assert!(matches!(read_input(&sq, InputKind::Points).unwrap(), Input::Points(_)));
        let pts = file(&dir, "p.csv", "0,1\n1,0\n2,2\n");
        assert!(matches!(read_input(&pts, InputKind::Auto).unwrap(), Input::Points(_)));
        let lab = file(&dir, "l.csv", "0,a\n1,b\n");
        match read_input(&lab, InputKind::Auto).unwrap() {
            Input::Points(c) => {
                assert_eq!(c.dim(), 1);
                assert_eq!(c.labels().unwrap(), ["a", "b"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_rows_report_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(&dir, "bad.csv", "0,1,2\n1,0,1\n\n2,1\n");
        let err = read_input(&p, InputKind::Auto).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        assert!(err.contains("expected 3 columns, found 2"), "{err}");
        let p = file(&dir, "nan.csv", "0,1\n1,x\n");
        let err = read_input(&p, InputKind::Distance).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("column 2"), "{err}");
    }

    #[test]
    fn measures_dense_and_sparse() {
        let dir = tempfile::tempdir().unwrap();
        let dense = file(&dir, "a.csv", "0.5\n0\n0.5\n");
        assert_eq!(read_measure(&dense, 3).unwrap(), vec![0.5, 0.0, 0.5]);
        let sparse = file(&dir, "b.csv", "2,1.0\n");
        assert_eq!(read_measure(&sparse, 3).unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(read_measure(&sparse, 2).is_err());
    }

    #[test]
    fn written_tables_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let c = PointCloud::from_rows(&[vec![0.1, -3.0], vec![1.0 / 3.0, 2e-17]])
            .unwrap()
            .with_labels(vec!["u".into(), "v".into()])
            .unwrap();
        let p = dir.path().join("c.csv");
        write_atomic(&p, &cloud_csv(&c)).unwrap();
        assert_eq!(read_cloud(&p).unwrap(), c);
        let d = c.distance_matrix();
        let p = dir.path().join("d.csv");
        write_atomic(&p, &distance_csv(&d)).unwrap();
        assert_eq!(read_distance(&p).unwrap(), d);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
