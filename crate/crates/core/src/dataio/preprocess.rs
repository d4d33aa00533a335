use serde::{Deserialize, Serialize};

use super::table::{ColumnKind, RawTable};
use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

const MISSING_LEVEL: &str = "<missing>";

/// Learned encoding of one input column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureColumn {
    Numeric { name: String, mean: f64 },
    /// One indicator per level; a missing cell is its own level.
    Categorical { name: String, levels: Vec<String> },
}

impl FeatureColumn {
    fn width(&self) -> usize {
        match self {
            FeatureColumn::Numeric { .. } => 1,
            FeatureColumn::Categorical { levels, .. } => levels.len(),
        }
    }
}

/// Frozen preprocessing schema: imputation means, category levels and
/// label encoding. Re-applying it to new tables yields the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub label_column: String,
    /// Raw label for each encoded class index.
    pub label_names: Vec<String>,
    pub features: Vec<FeatureColumn>,
}

/// Mean-imputes numeric columns, one-hot encodes categoricals and encodes
/// labels by sorted distinct value.
pub fn preprocess<F: Real>(t: &RawTable, label_column: &str) -> Result<Dataset<F>> {
    Preprocessor::fit(t, label_column).map(|(_, d)| d)
}

impl Preprocessor {
    pub fn fit<F: Real>(t: &RawTable, label_column: &str) -> Result<(Self, Dataset<F>)> {
        let label = t
            .column(label_column)
            .ok_or_else(|| Error::MissingLabel(label_column.to_string()))?;
        if label.cells.iter().any(Option::is_none) {
            return Err(Error::MissingLabelValue(label_column.to_string()));
        }
        let mut names: Vec<String> = label.cells.iter().flatten().cloned().collect();
        if label.kind == ColumnKind::Numeric {
            names.sort_by(|a, b| {
                let (x, y) = (a.parse::<f64>().unwrap_or(0.0), b.parse::<f64>().unwrap_or(0.0));
                x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.cmp(b))
            });
        } else {
            names.sort();
        }
        names.dedup();
        if names.len() < 2 {
            return Err(Error::SingleClass(names.len()));
        }

        let mut features = Vec::new();
        for col in t.columns.iter().filter(|c| c.name != label_column) {
            if col.cells.iter().all(Option::is_none) {
                return Err(Error::EmptyColumn(col.name.clone()));
            }
            match col.kind {
                ColumnKind::Numeric => {
                    let vals: Vec<f64> = col.numeric_values().into_iter().flatten().collect();
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    features.push(FeatureColumn::Numeric {
                        name: col.name.clone(),
                        mean,
                    });
                }
                ColumnKind::Categorical => {
                    let mut levels: Vec<String> = col.cells.iter().flatten().cloned().collect();
                    levels.sort();
                    levels.dedup();
                    if col.cells.iter().any(Option::is_none) {
                        levels.push(MISSING_LEVEL.to_string());
                    }
                    features.push(FeatureColumn::Categorical {
                        name: col.name.clone(),
                        levels,
                    });
                }
            }
        }
        let pre = Preprocessor {
            label_column: label_column.to_string(),
            label_names: names,
            features,
        };
        let data = pre.apply(t)?;
        Ok((pre, data))
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.features {
            match f {
                FeatureColumn::Numeric { name, .. } => out.push(name.clone()),
                FeatureColumn::Categorical { name, levels } => {
                    out.extend(levels.iter().map(|l| format!("{name}={l}")))
                }
            }
        }
        out
    }

    /// Encodes a table with this schema. Unseen category levels encode as
    /// all-zero indicators; unseen labels and absent columns are schema errors.
    pub fn apply<F: Real>(&self, t: &RawTable) -> Result<Dataset<F>> {
        let label = t
            .column(&self.label_column)
            .ok_or_else(|| Error::MissingLabel(self.label_column.clone()))?;
        let mut y = Vec::with_capacity(t.n_rows);
        for cell in &label.cells {
            let raw = cell
                .as_deref()
                .ok_or_else(|| Error::MissingLabelValue(self.label_column.clone()))?;
            let idx = self
                .label_names
                .iter()
                .position(|n| n == raw)
                .ok_or_else(|| Error::Schema(format!("unknown label `{raw}`")))?;
            y.push(idx);
        }

        let width: usize = self.features.iter().map(FeatureColumn::width).sum();
        let mut x = Matrix::zeros(t.n_rows, width);
        let mut offset = 0;
        for f in &self.features {
            match f {
                FeatureColumn::Numeric { name, mean } => {
                    let col = t
                        .column(name)
                        .ok_or_else(|| Error::Schema(format!("column `{name}` absent")))?;
                    for (i, c) in col.cells.iter().enumerate() {
                        let v = match c {
                            None => *mean,
                            Some(s) => s.parse::<f64>().map_err(|_| {
                                Error::Schema(format!("column `{name}` has non-numeric cell `{s}`"))
                            })?,
                        };
                        x[(i, offset)] = F::lit(v);
                    }
                }
                FeatureColumn::Categorical { name, levels } => {
                    let col = t
                        .column(name)
                        .ok_or_else(|| Error::Schema(format!("column `{name}` absent")))?;
                    for (i, c) in col.cells.iter().enumerate() {
                        let key = c.as_deref().unwrap_or(MISSING_LEVEL);
                        if let Some(l) = levels.iter().position(|v| v == key) {
                            x[(i, offset + l)] = F::one();
                        }
                    }
                }
            }
            offset += f.width();
        }
        Dataset::unchecked(x, y, self.label_names.len(), self.feature_names())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::table::{parse_table, LoadOptions};

    fn table(s: &str) -> RawTable {
        parse_table(s.as_bytes(), &LoadOptions::new("y")).unwrap()
    }

    #[test]
    fn mean_imputation() {
        let d: Dataset<f64> = preprocess(&table("a,y\n1,0\n?,1\n3,0\n"), "y").unwrap();
        assert_eq!(d.x.column(0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn one_hot_two_levels() {
        let d: Dataset<f64> = preprocess(&table("c,y\nred,0\nblue,1\nred,0\nblue,1\n"), "y").unwrap();
        assert_eq!(d.n_features(), 2);
        for r in d.x.iter_rows() {
            assert_eq!(r.iter().sum::<f64>(), 1.0);
        }
        assert_eq!(d.feature_names, vec!["c=blue", "c=red"]);
    }

    #[test]
    fn mixed_table_against_hand_expansion() {
        let t = table("n,c,y\n1,u,b\n2,v,a\n?,u,b\n4,v,a\n5,u,c\n");
        let d: Dataset<f64> = preprocess(&t, "y").unwrap();
        // mean of {1,2,4,5} = 3; levels sorted u, v; labels a=0, b=1, c=2
        let expected = [
            [1.0, 1.0, 0.0],
            [2.0, 0.0, 1.0],
            [3.0, 1.0, 0.0],
            [4.0, 0.0, 1.0],
            [5.0, 1.0, 0.0],
        ];
        assert_eq!(d.n_features(), 3);
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(d.x.row(i), row);
        }
        assert_eq!(d.y, vec![1, 0, 1, 0, 2]);
        assert_eq!(d.n_classes, 3);
    }

    #[test]
    fn missing_category_is_its_own_level() {
        let d: Dataset<f64> = preprocess(&table("c,y\nred,0\n?,1\nred,1\n"), "y").unwrap();
        assert_eq!(d.feature_names, vec!["c=red", "c=<missing>"]);
        assert_eq!(d.x.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let (pre, d) = Preprocessor::fit::<f64>(&table("a,y\n1,10\n2,2\n3,1\n"), "y").unwrap();
        assert_eq!(pre.label_names, vec!["1", "2", "10"]);
        assert_eq!(d.y, vec![2, 1, 0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            preprocess::<f64>(&table("a,y\n?,0\n?,1\n"), "y"),
            Err(Error::EmptyColumn(_))
        ));
        assert!(matches!(
            preprocess::<f64>(&table("a,y\n1,0\n2,0\n"), "y"),
            Err(Error::SingleClass(1))
        ));
        assert!(matches!(
            preprocess::<f64>(&table("a,y\n1,0\n2,?\n"), "y"),
            Err(Error::MissingLabelValue(_))
        ));
    }

    #[test]
    fn schema_reapplied_to_new_rows() {
        let (pre, _) = Preprocessor::fit::<f64>(&table("a,c,y\n1,p,0\n3,q,1\n"), "y").unwrap();
        let d: Dataset<f64> = pre.apply(&table("a,c,y\n?,r,1\n")).unwrap();
        assert_eq!(d.x.row(0), &[2.0, 0.0, 0.0]);
        assert!(pre.apply::<f64>(&table("a,c,y\n1,p,7\n")).is_err());
        assert!(pre.apply::<f64>(&table("a,y\n1,0\n")).is_err());
    }
}
