//! Row-major feature/target tables and their CSV form.
//!
//! CSV layout: a header row with `f0..f{n-1}` and `t0..t{m-1}` (any column
//! order), plus an optional `split` column holding `train` or `val`.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::DomainPolicy;
use crate::error::DataError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    targets: Vec<T>,
    n_features: usize,
    n_targets: usize,
    split: Vec<Split>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Vec<T>,
        targets: Vec<T>,
        n_features: usize,
        n_targets: usize,
    ) -> Result<Self, DataError> {
        if n_features == 0 || n_targets == 0 {
            return Err(DataError::Invalid("need at least one feature and one target".into()));
        }
        if features.len() % n_features != 0 || targets.len() % n_targets != 0 {
            return Err(DataError::Invalid("ragged feature or target matrix".into()));
        }
        let rows = features.len() / n_features;
        if targets.len() / n_targets != rows {
            return Err(DataError::Invalid(format!(
                "{rows} feature rows but {} target rows",
                targets.len() / n_targets
            )));
        }
        if let Some(pos) = features.iter().chain(&targets).position(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!("non-finite entry at flat index {pos}")));
        }
        Ok(Self {
            features,
            targets,
            n_features,
            n_targets,
            split: vec![Split::Train; rows],
        })
    }

    pub fn from_rows(rows: &[(Vec<T>, Vec<T>)]) -> Result<Self, DataError> {
        let nf = rows.first().map_or(0, |r| r.0.len());
        let nt = rows.first().map_or(0, |r| r.1.len());
        if rows.iter().any(|r| r.0.len() != nf || r.1.len() != nt) {
            return Err(DataError::Invalid("rows have differing widths".into()));
        }
        let features = rows.iter().flat_map(|r| r.0.iter().copied()).collect();
        let targets = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
        Self::new(features, targets, nf, nt)
    }

    pub fn len(&self) -> usize {
        self.split.len()
    }

    pub fn is_empty(&self) -> bool {
        self.split.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn features(&self, row: usize) -> &[T] {
        &self.features[row * self.n_features..(row + 1) * self.n_features]
    }

    pub fn targets(&self, row: usize) -> &[T] {
        &self.targets[row * self.n_targets..(row + 1) * self.n_targets]
    }

    pub fn split_of(&self, row: usize) -> Split {
        self.split[row]
    }

    pub fn set_splits(&mut self, split: Vec<Split>) -> Result<(), DataError> {
        if split.len() != self.len() {
            return Err(DataError::Invalid("split tag count differs from row count".into()));
        }
        self.split = split;
        Ok(())
    }

    /// Tag a seeded random `val_fraction` of rows as validation.
    pub fn assign_random_split(&mut self, val_fraction: f64, seed: u64) {
        let n = self.len();
        let n_val = ((n as f64) * val_fraction.clamp(0.0, 1.0)).round() as usize;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.split = vec![Split::Train; n];
        for &i in &idx[..n_val] {
            self.split[i] = Split::Val;
        }
    }

    /// Rows tagged with `which`, as a new dataset.
    pub fn subset(&self, which: Split) -> Self {
        let rows: Vec<usize> = (0..self.len()).filter(|&r| self.split[r] == which).collect();
        self.select(&rows)
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        let mut targets = Vec::with_capacity(rows.len() * self.n_targets);
        for &r in rows {
            features.extend_from_slice(self.features(r));
            targets.extend_from_slice(self.targets(r));
        }
        Self {
            features,
            targets,
            n_features: self.n_features,
            n_targets: self.n_targets,
            split: rows.iter().map(|&r| self.split[r]).collect(),
        }
    }

    /// Clip features into `[lo, hi]` or reject the first offending row.
    pub fn enforce_domain(&mut self, lo: T, hi: T, policy: DomainPolicy) -> Result<(), DataError> {
        for (pos, v) in self.features.iter_mut().enumerate() {
            if *v < lo || *v > hi {
                match policy {
                    DomainPolicy::Clamp => *v = v.max(lo).min(hi),
                    DomainPolicy::Strict => {
                        return Err(DataError::Invalid(format!(
                            "row {} feature {} = {} outside [{lo}, {hi}]",
                            pos / self.n_features,
                            pos % self.n_features,
                            v
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut fcols: Vec<(usize, usize)> = Vec::new();
        let mut tcols: Vec<(usize, usize)> = Vec::new();
        let mut split_col = None;
        for (c, name) in headers.iter().enumerate() {
            let parsed = |prefix: char| -> Option<usize> {
                name.strip_prefix(prefix).and_then(|s| s.parse().ok())
            };
            if name == "split" {
                split_col = Some(c);
            } else if let Some(i) = parsed('f') {
                fcols.push((i, c));
            } else if let Some(i) = parsed('t') {
                tcols.push((i, c));
            } else {
                return Err(DataError::Parse {
                    line: 1,
                    msg: format!("unexpected column `{name}`"),
                });
            }
        }
        fcols.sort_unstable();
        tcols.sort_unstable();
        for (cols, what) in [(&fcols, 'f'), (&tcols, 't')] {
            if cols.is_empty() || cols.iter().enumerate().any(|(k, &(i, _))| k != i) {
                return Err(DataError::Parse {
                    line: 1,
                    msg: format!("columns {what}0..{what}N must be present and contiguous"),
                });
            }
        }
        let mut features = Vec::new();
        let mut targets = Vec::new();
        let mut split = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |c: usize| -> Result<T, DataError> {
                let s = rec.get(c).unwrap_or("");
                let v: f64 = s.parse().map_err(|_| DataError::Parse {
                    line,
                    msg: format!("cannot parse `{s}` in column `{}`", &headers[c]),
                })?;
                if !v.is_finite() {
                    return Err(DataError::Parse {
                        line,
                        msg: format!("non-finite value in column `{}`", &headers[c]),
                    });
                }
                Ok(T::lit(v))
            };
            for &(_, c) in &fcols {
                features.push(field(c)?);
            }
            for &(_, c) in &tcols {
                targets.push(field(c)?);
            }
            split.push(match split_col.map(|c| rec.get(c).unwrap_or("")) {
                None | Some("train") | Some("") => Split::Train,
                Some("val") => Split::Val,
                Some(other) => {
                    return Err(DataError::Parse {
                        line,
                        msg: format!("split must be `train` or `val`, got `{other}`"),
                    })
                }
            });
        }
        if split.is_empty() {
            return Err(DataError::Invalid("dataset has no rows".into()));
        }
        let mut ds = Self::new(features, targets, fcols.len(), tcols.len())?;
        ds.split = split;
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W, with_split: bool) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.n_features).map(|i| format!("f{i}")).collect();
        header.extend((0..self.n_targets).map(|i| format!("t{i}")));
        if with_split {
            header.push("split".into());
        }
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec: Vec<String> = self
                .features(r)
                .iter()
                .chain(self.targets(r))
                .map(|v| format!("{}", v.as_f64()))
                .collect();
            if with_split {
                rec.push(match self.split[r] {
                    Split::Train => "train".into(),
                    Split::Val => "val".into(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_keeps_values_and_splits() {
        let mut ds =
            Dataset::<f64>::from_rows(&[(vec![0.1, 0.2], vec![1.0]), (vec![0.3, 0.4], vec![2.0])])
                .unwrap();
        ds.set_splits(vec![Split::Train, Split::Val]).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf, true).unwrap();
        let back = Dataset::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "f0,t0\n0.5,1\n0.2,abc\n";
        match Dataset::<f64>::read_csv(text.as_bytes()) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Dataset::<f64>::read_csv("f0,f2,t0\n1,2,3\n".as_bytes()).is_err());
        assert!(Dataset::<f64>::read_csv("f0,t0\n".as_bytes()).is_err());
        assert!(Dataset::<f64>::read_csv("f0,t0,x\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn domain_policy() {
        let mut ds = Dataset::<f64>::from_rows(&[(vec![1.5], vec![0.0])]).unwrap();
        assert!(ds.clone().enforce_domain(0.0, 1.0, DomainPolicy::Strict).is_err());
        ds.enforce_domain(0.0, 1.0, DomainPolicy::Clamp).unwrap();
        assert_eq!(ds.features(0), &[1.0]);
    }

    #[test]
    fn random_split_is_seeded() {
        let rows: Vec<_> = (0..20).map(|i| (vec![i as f64], vec![0.0])).collect();
        let mut a = Dataset::<f64>::from_rows(&rows).unwrap();
        let mut b = a.clone();
        a.assign_random_split(0.25, 9);
        b.assign_random_split(0.25, 9);
        assert_eq!(a, b);
        assert_eq!(a.subset(Split::Val).len(), 5);
    }
}
