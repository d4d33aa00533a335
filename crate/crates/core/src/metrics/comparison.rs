use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Scores of several methods over a set of datasets (rows), with a mask of
/// entries that are method failures rather than genuine scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub methods: Vec<String>,
    pub rows: Vec<String>,
    /// `scores[row][method]`
    pub scores: Vec<Vec<f64>>,
    /// `failed[row][method]`
    pub failed: Vec<Vec<bool>>,
}

impl ComparisonTable {
    pub fn new(methods: Vec<String>, rows: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if scores.len() != rows.len() {
            return Err(Error::LengthMismatch(scores.len(), rows.len()));
        }
        if let Some(r) = scores.iter().find(|r| r.len() != methods.len()) {
            return Err(Error::DimensionMismatch {
                expected: methods.len(),
                got: r.len(),
            });
        }
        let failed = vec![vec![false; methods.len()]; rows.len()];
        Ok(Self {
            methods,
            rows,
            scores,
            failed,
        })
    }

    /// Reads a method-per-column CSV; `id_column` names the row labels.
    pub fn from_csv<R: Read>(reader: R, id_column: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let id = header
            .iter()
            .position(|h| h == id_column)
            .ok_or_else(|| Error::Schema(format!("id column `{id_column}` absent")))?;
        let methods: Vec<String> = header.iter().enumerate().filter(|&(i, _)| i != id).map(|(_, h)| h.clone()).collect();
        let mut rows = Vec::new();
        let mut scores = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push(rec[id].trim().to_string());
            let mut vals = Vec::with_capacity(methods.len());
            for (i, cell) in rec.iter().enumerate().filter(|&(i, _)| i != id) {
                vals.push(cell.trim().parse::<f64>().map_err(|_| {
                    Error::Schema(format!("non-numeric score `{cell}` in column `{}`", header[i]))
                })?);
            }
            scores.push(vals);
        }
        Self::new(methods, rows, scores)
    }

    /// Applies a boolean CSV with the same header and row order as the scores.
    pub fn with_failure_mask_csv<R: Read>(mut self, reader: R, id_column: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let id = header
            .iter()
            .position(|h| h == id_column)
            .ok_or_else(|| Error::Schema(format!("id column `{id_column}` absent from mask")))?;
        let mut seen = 0;
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let name = rec[id].trim();
            if self.rows.get(r).map(String::as_str) != Some(name) {
                return Err(Error::Schema(format!("mask row {r} (`{name}`) does not match scores")));
            }
            for (i, cell) in rec.iter().enumerate().filter(|&(i, _)| i != id) {
                let m = self
                    .methods
                    .iter()
                    .position(|m| *m == header[i])
                    .ok_or_else(|| Error::Schema(format!("mask column `{}` has no scores", header[i])))?;
                self.failed[r][m] = match cell.trim().to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" | "" => false,
                    other => return Err(Error::Schema(format!("bad mask value `{other}`"))),
                };
            }
            seen += 1;
        }
        if seen != self.rows.len() {
            return Err(Error::Schema(format!("mask has {seen} rows, scores have {}", self.rows.len())));
        }
        Ok(self)
    }

    /// Columns whose name ends in `suffix`, renamed without it.
    pub fn select_suffix(&self, suffix: &str) -> Self {
        let keep: Vec<usize> = (0..self.methods.len()).filter(|&m| self.methods[m].ends_with(suffix)).collect();
        Self {
            methods: keep
                .iter()
                .map(|&m| self.methods[m].trim_end_matches(suffix).to_string())
                .collect(),
            rows: self.rows.clone(),
            scores: self.scores.iter().map(|r| keep.iter().map(|&m| r[m]).collect()).collect(),
            failed: self.failed.iter().map(|r| keep.iter().map(|&m| r[m]).collect()).collect(),
        }
    }

    pub fn column(&self, method: &str) -> Option<Vec<f64>> {
        let m = self.methods.iter().position(|x| x == method)?;
        Some(self.scores.iter().map(|r| r[m]).collect())
    }

    pub fn without_mask(&self) -> Self {
        Self {
            failed: vec![vec![false; self.methods.len()]; self.rows.len()],
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    /// Tied scores share the best rank of their group (1, 2, 2, 4).
    #[default]
    Competition,
    /// Tied scores share the mean rank of their group (1, 2.5, 2.5, 4).
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub methods: Vec<String>,
    /// Mean score per method over its non-failed rows.
    pub means: Vec<f64>,
    /// `ranks[row][method]`; `None` for failed entries. Rank 1 is best.
    pub ranks: Vec<Vec<Option<f64>>>,
    pub mean_ranks: Vec<f64>,
    /// Non-failed rows per method.
    pub counts: Vec<usize>,
}

impl ComparisonSummary {
    pub fn method_index(&self, name: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == name)
    }
}

/// Per-method means and per-row ranks (higher score is better). Failed
/// entries are left out of both the mean and the row ranking.
pub fn aggregate_comparison(table: &ComparisonTable, method: RankMethod) -> Result<ComparisonSummary> {
    let m = table.methods.len();
    if table.rows.is_empty() || m == 0 {
        return Err(Error::InsufficientData("empty comparison table".into()));
    }
    if m < 2 || table.rows.len() < 2 {
        return Err(invalid("need at least two methods and two rows"));
    }
    let mut sums = vec![0.0; m];
    let mut rank_sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    let mut ranks = Vec::with_capacity(table.rows.len());
    for (scores, failed) in table.scores.iter().zip(&table.failed) {
        let valid: Vec<usize> = (0..m).filter(|&j| !failed[j]).collect();
        let mut row = vec![None; m];
        for &j in &valid {
            let better = valid.iter().filter(|&&o| scores[o] > scores[j]).count();
            let equal = valid.iter().filter(|&&o| scores[o] == scores[j]).count();
            let r = match method {
                RankMethod::Competition => (better + 1) as f64,
                RankMethod::Average => better as f64 + (equal as f64 + 1.0) / 2.0,
            };
            row[j] = Some(r);
            sums[j] += scores[j];
            rank_sums[j] += r;
            counts[j] += 1;
        }
        ranks.push(row);
    }
    let per = |s: &[f64]| -> Vec<f64> {
        s.iter()
            .zip(&counts)
            .map(|(&v, &c)| if c == 0 { f64::NAN } else { v / c as f64 })
            .collect()
    };
    Ok(ComparisonSummary {
        methods: table.methods.clone(),
        means: per(&sums),
        mean_ranks: per(&rank_sums),
        ranks,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_methods_constant_gap() {
        let t = ComparisonTable::new(
            vec!["a".into(), "b".into()],
            vec!["r1".into(), "r2".into(), "r3".into()],
            vec![vec![0.9, 0.8]; 3],
        )
        .unwrap();
        let s = aggregate_comparison(&t, RankMethod::Competition).unwrap();
        assert!((s.means[0] - 0.9).abs() < 1e-12 && (s.means[1] - 0.8).abs() < 1e-12);
        assert_eq!(s.mean_ranks, vec![1.0, 2.0]);
    }

    #[test]
    fn tie_conventions() {
        let t = ComparisonTable::new(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec!["r1".into(), "r2".into()],
            vec![vec![0.9, 0.5, 0.5, 0.1]; 2],
        )
        .unwrap();
        let c = aggregate_comparison(&t, RankMethod::Competition).unwrap();
        assert_eq!(c.ranks[0], vec![Some(1.0), Some(2.0), Some(2.0), Some(4.0)]);
        let a = aggregate_comparison(&t, RankMethod::Average).unwrap();
        assert_eq!(a.ranks[0], vec![Some(1.0), Some(2.5), Some(2.5), Some(4.0)]);
    }

    #[test]
    fn failures_excluded() {
        let mut t = ComparisonTable::new(
            vec!["a".into(), "b".into()],
            vec!["r1".into(), "r2".into()],
            vec![vec![0.0, 0.5], vec![0.8, 0.6]],
        )
        .unwrap();
        t.failed[0][0] = true;
        let s = aggregate_comparison(&t, RankMethod::Competition).unwrap();
        assert_eq!(s.means[0], 0.8);
        assert_eq!(s.counts, vec![1, 2]);
        assert_eq!(s.ranks[0], vec![None, Some(1.0)]);
    }

    #[test]
    fn empty_table_rejected() {
        let t = ComparisonTable::new(vec!["a".into(), "b".into()], vec![], vec![]).unwrap();
        assert!(aggregate_comparison(&t, RankMethod::Average).is_err());
    }

    #[test]
    fn csv_round_trip_with_mask() {
        let scores = "name,x_acc,y_acc,x_f1\nd1,0.5,0.7,0.4\nd2,0,0.6,0\n";
        let mask = "name,x_acc,y_acc,x_f1\nd1,false,false,false\nd2,true,false,true\n";
        let t = ComparisonTable::from_csv(scores.as_bytes(), "name")
            .unwrap()
            .with_failure_mask_csv(mask.as_bytes(), "name")
            .unwrap();
        let acc = t.select_suffix("_acc");
        assert_eq!(acc.methods, vec!["x", "y"]);
        assert_eq!(acc.failed[1], vec![true, false]);
        let bad_mask = "name,x_acc\nd2,true\nd1,false\n";
        assert!(ComparisonTable::from_csv(scores.as_bytes(), "name")
            .unwrap()
            .with_failure_mask_csv(bad_mask.as_bytes(), "name")
            .is_err());
    }

    proptest! {
        #[test]
        fn average_ranks_sum(rows in prop::collection::vec(prop::collection::vec(0u8..5, 4), 2..10)) {
            let scores: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let names = (0..scores.len()).map(|i| i.to_string()).collect();
            let t = ComparisonTable::new(vec!["a".into(), "b".into(), "c".into(), "d".into()], names, scores).unwrap();
            let s = aggregate_comparison(&t, RankMethod::Average).unwrap();
            for r in &s.ranks {
                let total: f64 = r.iter().flatten().sum();
                prop_assert!((total - 10.0).abs() < 1e-12);
            }
        }
    }
}
