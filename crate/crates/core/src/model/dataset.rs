use std::path::Path;

use crate::error::{Error, Result};

use super::Network;

/// A multiset of input points with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    labels: Option<Vec<u32>>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Option<Vec<u32>>) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != points.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} labels for {} points",
                    labels.len(),
                    points.len()
                )));
            }
        }
        if let Some(first) = points.first() {
            let dim = first.len();
            if let Some(bad) = points.iter().find(|p| p.len() != dim) {
                return Err(Error::InputShape {
                    expected: dim,
                    actual: bad.len(),
                });
            }
        }
        Ok(Self { points, labels })
    }

    pub fn labeled(points: Vec<Vec<f64>>, labels: Vec<u32>) -> Result<Self> {
        Self::new(points, Some(labels))
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[u32]> {
        self.labels().ok_or(Error::MissingLabels)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinate count, or `None` for an empty dataset.
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    /// Points (and labels) at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let n = self.len();
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Index { index, len: n });
        }
        Ok(Dataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        })
    }

    /// Union of two multisets; labels are kept only if both sides have them.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Dataset::new(points, labels)
    }

    /// Checks every point against the network's input shape and range.
    pub fn check_against(&self, net: &Network) -> Result<()> {
        self.points.iter().try_for_each(|p| net.check_input(p))
    }

    /// Reads a CSV file with header `x0,…,x{d-1}[,label]`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    pub fn read_csv(reader: impl std::io::Read) -> Result<Self> {
        let bad = |m: String| Error::parse("<csv>", m);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        let has_label = headers.iter().last() == Some("label");
        let dim = headers.len() - usize::from(has_label);
        for (k, h) in headers.iter().take(dim).enumerate() {
            if h != format!("x{k}") {
                return Err(bad(format!("header column {k} is `{h}`, expected `x{k}`")));
            }
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let point = record
                .iter()
                .take(dim)
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", row + 1)))?;
            if point.iter().any(|v| !v.is_finite()) {
                return Err(bad(format!("row {}: non-finite coordinate", row + 1)));
            }
            points.push(point);
            if has_label {
                let label = record[dim]
                    .parse::<u32>()
                    .map_err(|e| bad(format!("row {}: label: {e}", row + 1)))?;
                labels.push(label);
            }
        }
        Dataset::new(points, has_label.then_some(labels))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, dim_if_empty: usize) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file, dim_if_empty).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn write_csv(&self, writer: impl std::io::Write, dim_if_empty: usize) -> Result<()> {
        let io = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(err) => Error::io("<csv>", err),
            other => Error::parse("<csv>", format!("{other:?}")),
        };
        let dim = self.dim().unwrap_or(dim_if_empty);
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header).map_err(io)?;
        for (k, p) in self.points.iter().enumerate() {
            let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            if let Some(labels) = &self.labels {
                row.push(labels[k].to_string());
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_labels() {
        let data = Dataset::labeled(vec![vec![0.5, -1.0], vec![0.1, 0.2]], vec![3, 0]).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf, 0).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,label\n"));
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn csv_without_labels() {
        let data = Dataset::read_csv("x0,x1,x2\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(data.len(), 2);
        assert!(data.labels().is_none());
        assert!(matches!(data.require_labels(), Err(Error::MissingLabels)));
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(Dataset::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn label_count_must_match() {
        assert!(Dataset::labeled(vec![vec![0.0]], vec![]).is_err());
    }

    #[test]
    fn select_keeps_labels_aligned() {
        let data = Dataset::labeled(vec![vec![0.0], vec![1.0], vec![2.0]], vec![7, 8, 9]).unwrap();
        let sub = data.select(&[2, 0]).unwrap();
        assert_eq!(sub.points(), &[vec![2.0], vec![0.0]]);
        assert_eq!(sub.labels().unwrap(), &[9, 7]);
        assert!(matches!(data.select(&[3]), Err(Error::Index { index: 3, len: 3 })));
    }
}
