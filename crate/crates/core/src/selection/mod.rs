//! Feature matrices, feature-level fusion and the three feature selection
//! procedures: significance filtering of audio features, the lyric feature
//! combination search and recursive feature elimination.

pub mod combos;
pub mod rfe;
pub mod significance;

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use combos::{search_lyric_combination, CombinationRow, CombinationTable, LyricBlocks};
pub use rfe::{rfe, RfeResult};
pub use significance::{select_significant_audio, SignificanceResult, SignificanceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Sentiment,
    Tfidf,
    Xanew,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Sentiment => "sentiment",
            Modality::Tfidf => "tfidf",
            Modality::Xanew => "xanew",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "audio" => Ok(Modality::Audio),
            "sentiment" => Ok(Modality::Sentiment),
            "tfidf" => Ok(Modality::Tfidf),
            "xanew" => Ok(Modality::Xanew),
            _ => Err(Error::Parse(format!("unknown modality `{s}`"))),
        }
    }
}

/// An `N × d` matrix with named, modality-tagged columns and song-id rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    column_names: Vec<String>,
    modalities: Vec<Modality>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        values: DMatrix<f64>,
        column_names: Vec<String>,
        modalities: Vec<Modality>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        let d = values.ncols();
        if column_names.len() != d || modalities.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: column_names.len().max(modalities.len()),
            });
        }
        if row_ids.len() != values.nrows() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                got: row_ids.len(),
            });
        }
        if let Some(j) = (0..d).find(|&j| values.column(j).iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("feature column `{}`", column_names[j])));
        }
        let mut seen = BTreeSet::new();
        for name in &column_names {
            if name.is_empty() || !seen.insert(name.as_str()) {
                return Err(Error::InvalidArgument(format!("feature column name `{name}` is empty or repeated")));
            }
        }
        Ok(FeatureMatrix {
            values,
            column_names,
            modalities,
            row_ids,
        })
    }

    /// All columns share one modality.
    pub fn uniform(values: DMatrix<f64>, column_names: Vec<String>, modality: Modality, row_ids: Vec<String>) -> Result<Self> {
        let tags = vec![modality; column_names.len()];
        Self::new(values, column_names, tags, row_ids)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn modalities(&self) -> &[Modality] {
        &self.modalities
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|j| self.values.column(j).iter().copied().collect())
    }

    /// Columns by name, in the order given.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::InvalidArgument(format!("no feature column `{}`", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_column_indices(&idx))
    }

    pub fn select_column_indices(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select_columns(idx),
            column_names: idx.iter().map(|&j| self.column_names[j].clone()).collect(),
            modalities: idx.iter().map(|&j| self.modalities[j]).collect(),
            row_ids: self.row_ids.clone(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select_rows(idx),
            column_names: self.column_names.clone(),
            modalities: self.modalities.clone(),
            row_ids: idx.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }

    /// CSV with a `song_id` column followed by one `modality:name` column per
    /// feature. Values use the shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Format(format!("feature csv: {e}"));
        let mut header = vec!["song_id".to_string()];
        header.extend(
            self.column_names
                .iter()
                .zip(&self.modalities)
                .map(|(n, m)| format!("{m}:{n}")),
        );
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.nrows() {
            let mut rec = vec![self.row_ids[i].clone()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Format(format!("feature csv: {e}")))?;
        Ok(())
    }

    pub fn parse_csv<R: Read>(reader: R, source_name: &str) -> Result<FeatureMatrix> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut rows = rdr.records();
        let header = match rows.next() {
            None => return Err(Error::ingest(source_name, 1, "missing header")),
            Some(h) => h.map_err(|e| Error::ingest(source_name, 1, e.to_string()))?,
        };
        if header.get(0) != Some("song_id") {
            return Err(Error::ingest(source_name, 1, "first column must be `song_id`"));
        }
        let mut names = Vec::new();
        let mut tags = Vec::new();
        for cell in header.iter().skip(1) {
            let (m, n) = cell
                .split_once(':')
                .ok_or_else(|| Error::ingest(source_name, 1, format!("column `{cell}` is not modality:name")))?;
            tags.push(m.parse::<Modality>().map_err(|e| Error::ingest(source_name, 1, e.to_string()))?);
            names.push(n.to_string());
        }
        let d = names.len();
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (k, row) in rows.enumerate() {
            let line = k + 2;
            let row = row.map_err(|e| Error::ingest(source_name, line, e.to_string()))?;
            if row.len() != d + 1 {
                return Err(Error::ingest(source_name, line, format!("expected {} fields, got {}", d + 1, row.len())));
            }
            ids.push(row[0].to_string());
            for cell in row.iter().skip(1) {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::ingest(source_name, line, format!("not a number: {cell:?}")))?;
                if !v.is_finite() {
                    return Err(Error::ingest(source_name, line, format!("non-finite value {cell:?}")));
                }
                data.push(v);
            }
        }
        let values = DMatrix::from_row_slice(ids.len(), d, &data);
        FeatureMatrix::new(values, names, tags, ids).map_err(|e| Error::ingest(source_name, 1, e.to_string()))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::fsio::write_atomic(path, &buf)
    }

    pub fn read_csv_file(path: &Path) -> Result<FeatureMatrix> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        FeatureMatrix::parse_csv(f, &path.display().to_string())
    }
}

/// Retained column names with a record of how they were chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub columns: Vec<String>,
    pub procedure: String,
    /// Threshold or score that produced the subset, e.g. `alpha=0.05`.
    pub criterion: String,
}

/// Column-wise concatenation. Parts must list identical row ids in
/// identical order and column names must stay unique.
pub fn fuse(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Empty("fuse needs at least one part".into()))?;
    for p in &parts[1..] {
        if p.row_ids != first.row_ids {
            return Err(Error::InvalidArgument("fused parts must share row ids in the same order".into()));
        }
    }
    let n = first.nrows();
    let d: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut values = DMatrix::zeros(n, d);
    let mut names = Vec::with_capacity(d);
    let mut tags = Vec::with_capacity(d);
    let mut offset = 0;
    for p in parts {
        values.columns_mut(offset, p.ncols()).copy_from(&p.values);
        names.extend(p.column_names.iter().cloned());
        tags.extend(p.modalities.iter().copied());
        offset += p.ncols();
    }
    FeatureMatrix::new(values, names, tags, first.row_ids.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(prefix: &str, d: usize, m: Modality, ids: &[&str]) -> FeatureMatrix {
        let n = ids.len();
        let values = DMatrix::from_fn(n, d, |i, j| (i * 10 + j) as f64 + 0.25);
        let names = (0..d).map(|j| format!("{prefix}{j}")).collect();
        FeatureMatrix::uniform(values, names, m, ids.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn fuse_dimensions_add_up() {
        let ids = ["a", "b", "c"];
        let audio = part("au", 23, Modality::Audio, &ids);
        let sent = part("s", 4, Modality::Sentiment, &ids);
        let tfidf = part("t", 100, Modality::Tfidf, &ids);
        let m = fuse(&[&audio, &sent, &tfidf]).unwrap();
        assert_eq!(m.ncols(), 127);
        assert_eq!(m.modalities()[23], Modality::Sentiment);
        assert_eq!(fuse(&[&audio]).unwrap(), audio);
    }

    #[test]
    fn fuse_is_associative() {
        let ids = ["a", "b"];
        let (x, y, z) = (
            part("x", 2, Modality::Audio, &ids),
            part("y", 3, Modality::Tfidf, &ids),
            part("z", 1, Modality::Xanew, &ids),
        );
        let left = fuse(&[&fuse(&[&x, &y]).unwrap(), &z]).unwrap();
        let right = fuse(&[&x, &fuse(&[&y, &z]).unwrap()]).unwrap();
        assert_eq!(left, right);
        assert_eq!(left, fuse(&[&x, &y, &z]).unwrap());
    }

    #[test]
    fn fuse_rejects_misaligned_rows_and_name_clashes() {
        let a = part("x", 2, Modality::Audio, &["a", "b"]);
        let b = part("y", 2, Modality::Audio, &["b", "a"]);
        assert!(fuse(&[&a, &b]).is_err());
        assert!(fuse(&[&a, &a]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut m = part("f", 3, Modality::Tfidf, &["s1", "s2"]);
        m.values[(0, 1)] = 0.1 + 0.2;
        m.values[(1, 2)] = -1e-300;
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::parse_csv(buf.as_slice(), "test").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_matrices() {
        let v = DMatrix::from_element(1, 2, f64::NAN);
        assert!(FeatureMatrix::uniform(v, vec!["a".into(), "b".into()], Modality::Audio, vec!["r".into()]).is_err());
        let v = DMatrix::zeros(1, 2);
        assert!(FeatureMatrix::uniform(v, vec!["a".into(), "a".into()], Modality::Audio, vec!["r".into()]).is_err());
        assert!(FeatureMatrix::parse_csv("song_id,audio:a\nr,inf\n".as_bytes(), "t").is_err());
        assert!(FeatureMatrix::parse_csv("song_id,a\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn select_columns_by_name() {
        let m = part("f", 4, Modality::Audio, &["a", "b"]);
        let s = m.select_columns(&["f3", "f0"]).unwrap();
        assert_eq!(s.column_names(), ["f3", "f0"]);
        assert_eq!(s.values()[(1, 0)], m.values()[(1, 3)]);
        assert!(m.select_columns(&["nope"]).is_err());
    }
}
