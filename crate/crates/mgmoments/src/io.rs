//! File formats.
//!
//! * Edge lists: one interaction per line, `u v [t]`, separated by
//!   whitespace or commas. Blank lines and lines starting with `#` are
//!   skipped.
//! * Degree files: one integer per line, or a CSV with a `degree` column and
//!   an optional `node_id` column.
//! * Dense matrices: CSV whose header is `node_id` followed by the node ids,
//!   then one row per node.
//! * Sparse matrices: JSON `{"n", "ids", "entries": [[i, j, value], ...]}`
//!   listing every nonzero entry.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use mgmoments_core::nalgebra::DMatrix;
use mgmoments_core::{DegreeSequence, EdgeRecord, LabelledGraph};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::parse(path, line, format!("{kind:?}")),
    }
}

pub fn read_edge_list(path: &Path) -> Result<Vec<EdgeRecord<String>>> {
    parse_edge_list(open(path)?, path)
}

/// Parses edge-list records; `path` only labels errors.
pub fn parse_edge_list<R: BufRead>(reader: R, path: &Path) -> Result<Vec<EdgeRecord<String>>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let t = match fields.len() {
            2 => None,
            3 => Some(
                fields[2]
                    .parse::<i64>()
                    .map_err(|_| Error::parse(path, line_no, format!("timestamp {:?} is not an integer", fields[2])))?,
            ),
            k => return Err(Error::parse(path, line_no, format!("expected `u v [t]`, found {k} fields"))),
        };
        records.push(EdgeRecord::new(fields[0].to_owned(), fields[1].to_owned(), t));
    }
    Ok(records)
}

/// Writes one `u v` line per parallel edge, using the original ids.
pub fn write_edge_list(path: &Path, g: &LabelledGraph<String>) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    for (i, j) in g.graph.edge_list() {
        writeln!(out, "{} {}", g.ids[i], g.ids[j]).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// A degree sequence with node identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeFile {
    pub ids: Vec<String>,
    pub degrees: DegreeSequence,
}

impl DegreeFile {
    /// Ids `0..n`.
    pub fn anonymous(degrees: DegreeSequence) -> Self {
        Self { ids: (0..degrees.len()).map(|i| i.to_string()).collect(), degrees }
    }
}

pub fn read_degrees(path: &Path) -> Result<DegreeFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_degrees(&text, path)
}

pub fn parse_degrees(text: &str, path: &Path) -> Result<DegreeFile> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    let Some(first) = first else {
        return Err(Error::data(path, "no degrees found"));
    };
    let (ids, degrees) = if first.parse::<u32>().is_ok() {
        let mut degrees = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let d = line
                .parse::<u32>()
                .map_err(|_| Error::parse(path, idx + 1, format!("{line:?} is not a nonnegative integer")))?;
            degrees.push(d);
        }
        ((0..degrees.len()).map(|i| i.to_string()).collect(), degrees)
    } else {
        parse_degree_csv(text, path)?
    };
    let degrees = DegreeSequence::new(degrees).map_err(|e| Error::data(path, e.to_string()))?;
    Ok(DegreeFile { ids, degrees })
}

fn parse_degree_csv(text: &str, path: &Path) -> Result<(Vec<String>, Vec<u32>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let degree_col = column("degree").ok_or_else(|| Error::parse(path, 1, "no `degree` column in header"))?;
    let id_col = column("node_id").or_else(|| column("node")).or_else(|| column("id"));
    let (mut ids, mut degrees) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw = record.get(degree_col).unwrap_or("");
        let d = raw
            .parse::<u32>()
            .map_err(|_| Error::parse(path, line, format!("degree {raw:?} is not a nonnegative integer")))?;
        ids.push(match id_col {
            Some(c) => record.get(c).unwrap_or("").to_owned(),
            None => degrees.len().to_string(),
        });
        degrees.push(d);
    }
    Ok((ids, degrees))
}

/// Writes `node_id,degree` rows, readable by [`read_degrees`].
pub fn write_degrees(path: &Path, ids: &[String], d: &DegreeSequence) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| csv_error(path, e);
    w.write_record(["node_id", "degree"]).map_err(err)?;
    for (id, deg) in ids.iter().zip(d.as_slice()) {
        w.write_record([id.as_str(), &deg.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix_csv(path: &Path, ids: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| csv_error(path, e);
    w.write_record(std::iter::once("node_id").chain(ids.iter().map(String::as_str))).map_err(err)?;
    for (i, id) in ids.iter().enumerate() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        w.write_record(std::iter::once(id.as_str()).chain(row.iter().map(String::as_str))).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let ids: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let n = ids.len();
    let mut m = DMatrix::zeros(n, n);
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if rows == n {
            return Err(Error::parse(path, line, format!("more than {n} rows")));
        }
        if record.len() != n + 1 {
            return Err(Error::parse(path, line, format!("expected {} fields, found {}", n + 1, record.len())));
        }
        if record[0] != ids[rows] {
            return Err(Error::parse(path, line, format!("row id {:?} does not match column id {:?}", &record[0], ids[rows])));
        }
        for (j, raw) in record.iter().skip(1).enumerate() {
            m[(rows, j)] = raw.parse().map_err(|_| Error::parse(path, line, format!("{raw:?} is not a number")))?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::data(path, format!("expected {n} rows, found {rows}")));
    }
    Ok((ids, m))
}

/// Sparse JSON form of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub n: usize,
    pub ids: Vec<String>,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn from_dense(ids: &[String], m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self { n, ids: ids.to_vec(), entries }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }
}

pub fn write_matrix_json(path: &Path, ids: &[String], m: &DMatrix<f64>) -> Result<()> {
    write_json(path, &SparseMatrix::from_dense(ids, m))
}

pub fn read_matrix_json(path: &Path) -> Result<SparseMatrix> {
    let sparse: SparseMatrix = serde_json::from_reader(open(path)?).map_err(|e| Error::data(path, e.to_string()))?;
    if sparse.ids.len() != sparse.n || sparse.entries.iter().any(|&(i, j, _)| i >= sparse.n || j >= sparse.n) {
        return Err(Error::data(path, "ids or entries inconsistent with n"));
    }
    Ok(sparse)
}

/// Reads a matrix from CSV or, for `.json` paths, the sparse form.
pub fn read_matrix(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    if path.extension().is_some_and(|e| e == "json") {
        let s = read_matrix_json(path)?;
        let m = s.to_dense();
        Ok((s.ids, m))
    } else {
        read_matrix_csv(path)
    }
}

/// Writes `node_id,degree,beta` rows.
pub fn write_beta_csv(path: &Path, ids: &[String], d: &DegreeSequence, beta: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| csv_error(path, e);
    w.write_record(["node_id", "degree", "beta"]).map_err(err)?;
    for ((id, deg), b) in ids.iter().zip(d.as_slice()).zip(beta) {
        w.write_record([id.as_str(), &deg.to_string(), &b.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `node_id,<name>` rows.
pub fn write_column_csv(path: &Path, ids: &[String], name: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| csv_error(path, e);
    w.write_record(["node_id", name]).map_err(err)?;
    for (id, v) in ids.iter().zip(values) {
        w.write_record([id.as_str(), &v.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_partition_csv(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| csv_error(path, e);
    w.write_record(["node_id", "label"]).map_err(err)?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &l.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `node_id,label` rows and returns labels in the order of `ids`,
/// relabelled to `0..k` in node order, together with `k`.
pub fn read_partition(path: &Path, ids: &[String]) -> Result<(Vec<usize>, usize)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let index: std::collections::HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut raw: Vec<Option<String>> = vec![None; ids.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(Error::parse(path, line, "expected `node_id,label`"));
        }
        let i = *index
            .get(&record[0])
            .ok_or_else(|| Error::parse(path, line, format!("unknown node id {:?}", &record[0])))?;
        if raw[i].replace(record[1].to_owned()).is_some() {
            return Err(Error::parse(path, line, format!("node id {:?} listed twice", &record[0])));
        }
    }
    let mut seen: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(ids.len());
    for (i, r) in raw.into_iter().enumerate() {
        let r = r.ok_or_else(|| Error::data(path, format!("node id {:?} has no label", ids[i])))?;
        let l = match seen.iter().position(|s| *s == r) {
            Some(l) => l,
            None => {
                seen.push(r);
                seen.len() - 1
            }
        };
        labels.push(l);
    }
    Ok((labels, seen.len()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// Writes `sweep,mse,residual` rows.
pub fn write_trace_csv(path: &Path, mse: &[f64], residual: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| csv_error(path, e);
    w.write_record(["sweep", "mse", "residual"]).map_err(err)?;
    for (k, (a, b)) in mse.iter().zip(residual).enumerate() {
        w.write_record([(k + 1).to_string(), a.to_string(), b.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("input.txt")
    }

    #[test]
    fn edge_list_separators_and_comments() {
        let text = "# header\n a b 3\nb,c\n\nc\tA,-7\n";
        let recs = parse_edge_list(text.as_bytes(), p()).unwrap();
        assert_eq!(
            recs,
            vec![
                EdgeRecord::new("a".into(), "b".into(), Some(3)),
                EdgeRecord::new("b".into(), "c".into(), None),
                EdgeRecord::new("c".into(), "A".into(), Some(-7)),
            ]
        );
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        let err = parse_edge_list("a b\n\nx y 1.5\n".as_bytes(), p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().starts_with("input.txt:3:"));
        let err = parse_edge_list("a\n".as_bytes(), p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_edge_list("a b 1 2\n".as_bytes(), p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn degree_formats() {
        let plain = parse_degrees("# d\n4\n4\n\n2\n", p()).unwrap();
        assert_eq!(plain.degrees.as_slice(), &[4, 4, 2]);
        assert_eq!(plain.ids, ["0", "1", "2"]);

        let csv = parse_degrees("node_id,degree,extra\nx, 3 ,1\ny,1,0\n", p()).unwrap();
        assert_eq!(csv.degrees.as_slice(), &[3, 1]);
        assert_eq!(csv.ids, ["x", "y"]);

        let no_ids = parse_degrees("degree\n2\n2\n", p()).unwrap();
        assert_eq!(no_ids.ids, ["0", "1"]);

        assert!(matches!(parse_degrees("4\n-1\n", p()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_degrees("deg\n4\n", p()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_degrees("degree\n4\nx\n", p()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_degrees("# nothing\n", p()), Err(Error::Data { .. })));
    }

    #[test]
    fn matrix_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<String> = ["u", "v", "w"].map(String::from).to_vec();
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 1.0 / 3.0, 0.1, 0.0, 2.5e-17, 1.0 / 3.0, 2.5e-17, 0.0]);

        let csv_path = dir.path().join("m.csv");
        write_matrix_csv(&csv_path, &ids, &m).unwrap();
        let header = fs::read_to_string(&csv_path).unwrap();
        assert!(header.starts_with("node_id,u,v,w\n"));
        let (ids2, m2) = read_matrix(&csv_path).unwrap();
        assert_eq!((ids2, m2), (ids.clone(), m.clone()));

        let json_path = dir.path().join("m.json");
        write_matrix_json(&json_path, &ids, &m).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(v["n"], 3);
        assert_eq!(v["entries"].as_array().unwrap().len(), 6);
        assert_eq!(v["entries"][0], serde_json::json!([0, 1, 0.1]));
        let (ids3, m3) = read_matrix(&json_path).unwrap();
        assert_eq!((ids3, m3), (ids, m));
    }

    #[test]
    fn malformed_matrix_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "node_id,a,b\na,0,1\nc,1,0\n").unwrap();
        assert!(matches!(read_matrix_csv(&path), Err(Error::Parse { line: 3, .. })));
        fs::write(&path, "node_id,a,b\na,0,1\n").unwrap();
        assert!(matches!(read_matrix_csv(&path), Err(Error::Data { .. })));
    }

    #[test]
    fn partition_relabels_by_first_appearance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(&path, "node_id,label\nc,9\na,4\nb,9\n").unwrap();
        let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        assert_eq!(read_partition(&path, &ids).unwrap(), (vec![0, 1, 1], 2));
        fs::write(&path, "node_id,label\na,1\n").unwrap();
        assert!(matches!(read_partition(&path, &ids), Err(Error::Data { .. })));
        fs::write(&path, "node_id,label\nzz,1\n").unwrap();
        assert!(matches!(read_partition(&path, &ids), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_edge_list(Path::new("/nonexistent/edges.txt")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/edges.txt"));
        assert_eq!(err.exit_code(), 2);
    }
}
