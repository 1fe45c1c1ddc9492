//! File formats: point clouds (CSV/JSON), distance matrices (CSV with a label
//! header, or the `MMSP` binary layout), and space/measure descriptors (JSON).
//!
//! Binary matrices are the 4 magic bytes `MMSP`, `n` as little-endian `u64`,
//! then `n²` little-endian `f64` in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cloud::PointCloud;
use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;
use crate::mm_space::FiniteMetricMeasureSpace;

pub const MAGIC: &[u8; 4] = b"MMSP";

pub fn matrix_to_bytes(m: &DistanceMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.len() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn matrix_from_bytes(bytes: &[u8]) -> Result<DistanceMatrix> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(MmError::Parse("missing MMSP header".into()));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let body = &bytes[12..];
    let expected = n
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| MmError::Parse(format!("matrix size {n} overflows")))?;
    if body.len() != expected {
        return Err(MmError::Parse(format!(
            "expected {expected} payload bytes for n = {n}, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DistanceMatrix::from_row_major(n, data)
}

pub fn write_matrix_csv(path: &Path, m: &DistanceMatrix, labels: &[String]) -> Result<()> {
    if labels.len() != m.len() {
        return Err(MmError::invalid("one label per row required"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(labels)?;
    for i in 0..m.len() {
        w.write_record(m.row(i).iter().map(|v| format_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, DistanceMatrix)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let labels: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(parse_row(&rec?)?);
    }
    let m = DistanceMatrix::from_rows(&rows)?;
    if m.len() != labels.len() {
        return Err(MmError::Parse(format!("{} labels for {} rows", labels.len(), m.len())));
    }
    Ok((labels, m))
}

/// Writes CSV for `.csv` paths and the binary layout otherwise.
pub fn write_matrix(path: &Path, m: &DistanceMatrix, labels: &[String]) -> Result<()> {
    if is_csv(path) {
        write_matrix_csv(path, m, labels)
    } else {
        fs::write(path, matrix_to_bytes(m))?;
        Ok(())
    }
}

/// Reads either format, recognizing binary files by their magic bytes.
/// Binary files carry no labels, so indices are used.
pub fn read_matrix(path: &Path) -> Result<(Vec<String>, DistanceMatrix)> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        let m = matrix_from_bytes(&bytes)?;
        let labels = (0..m.len()).map(|i| i.to_string()).collect();
        Ok((labels, m))
    } else {
        read_matrix_csv(path)
    }
}

/// Shortest round-trip decimal form.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn parse_row(rec: &csv::StringRecord) -> Result<Vec<f64>> {
    rec.iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| MmError::Parse(format!("bad number '{f}': {e}")))
        })
        .collect()
}

/// One point per row; a first row that does not parse as numbers is a header.
pub fn read_points_csv(path: &Path) -> Result<PointCloud> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        match parse_row(&rec) {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    PointCloud::from_points(rows)
}

/// A JSON array of points.
pub fn read_points_json(path: &Path) -> Result<PointCloud> {
    let rows: Vec<Vec<f64>> = serde_json::from_slice(&fs::read(path)?)?;
    PointCloud::from_points(rows)
}

pub fn read_points(path: &Path) -> Result<PointCloud> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        read_points_json(path)
    } else {
        read_points_csv(path)
    }
}

pub fn write_points_csv(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for x in cloud.points() {
        w.write_record(x.iter().map(|v| format_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    /// Matrix path, relative to the descriptor's directory unless absolute.
    pub dist_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub ground_ref: String,
    pub indices: Vec<usize>,
    pub masses: Vec<f64>,
}

fn resolve(base: &Path, reference: &str) -> PathBuf {
    let r = Path::new(reference);
    if r.is_absolute() {
        r.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(r)
    }
}

/// Writes the descriptor at `json_path` and the matrix at `dist_path`.
pub fn save_space(space: &FiniteMetricMeasureSpace, json_path: &Path, dist_path: &Path) -> Result<()> {
    write_matrix(dist_path, space.dist(), space.labels())?;
    let dist_ref = match (dist_path.parent(), json_path.parent()) {
        (Some(a), Some(b)) if a == b => dist_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        _ => dist_path.to_string_lossy().into_owned(),
    };
    let file = SpaceFile {
        labels: space.labels().to_vec(),
        weights: space.weights().to_vec(),
        dist_ref,
    };
    fs::write(json_path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Loads a JSON descriptor, or a bare matrix file with uniform weights.
pub fn load_space(path: &Path) -> Result<FiniteMetricMeasureSpace> {
    let bytes = fs::read(path)?;
    if !bytes.starts_with(MAGIC) && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let file: SpaceFile = serde_json::from_slice(&bytes)?;
        let (_, m) = read_matrix(&resolve(path, &file.dist_ref))?;
        return FiniteMetricMeasureSpace::new(file.labels, m, file.weights);
    }
    let (labels, m) = read_matrix(path)?;
    FiniteMetricMeasureSpace::uniform(m)?.with_labels(labels)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DistanceMatrix {
        DistanceMatrix::from_rows(&[vec![0.0, 1.5, 0.1], vec![1.5, 0.0, 2.0], vec![0.1, 2.0, 0.0]]).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let m = sample();
        let bytes = matrix_to_bytes(&m);
        assert_eq!(&bytes[..4], b"MMSP");
        assert_eq!(bytes.len(), 12 + 9 * 8);
        assert_eq!(matrix_from_bytes(&bytes).unwrap(), m);
        assert!(matrix_from_bytes(&bytes[..20]).is_err());
    }

    #[test]
    fn space_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let space = FiniteMetricMeasureSpace::new(
            vec!["a".into(), "b".into(), "c".into()],
            sample(),
            vec![0.5, 0.25, 0.25],
        )
        .unwrap();
        for ext in ["bin", "csv"] {
            let json = dir.path().join(format!("s-{ext}.json"));
            let dist = dir.path().join(format!("d.{ext}"));
            save_space(&space, &json, &dist).unwrap();
            let back = load_space(&json).unwrap();
            assert_eq!(back.dist(), space.dist());
            assert_eq!(back.weights(), space.weights());
            assert_eq!(back.labels(), space.labels());
        }
    }

    #[test]
    fn points_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(&path, "x,y\n0,1\n2.5,-3\n").unwrap();
        let c = read_points(&path).unwrap();
        assert_eq!(c.to_rows(), vec![vec![0.0, 1.0], vec![2.5, -3.0]]);
        fs::write(&path, "0,1\n2.5,x\n").unwrap();
        assert!(read_points(&path).is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
