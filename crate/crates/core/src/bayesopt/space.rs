use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One coordinate of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Cat(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Real(v) => Some(v),
            Value::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Cat(v) => f.write_str(v),
        }
    }
}

/// A configuration: one value per dimension, in space order.
pub type Config = Vec<Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Dimension {
    Real { name: String, lo: f64, hi: f64, log: bool },
    Integer { name: String, lo: i64, hi: i64 },
    Categorical { name: String, levels: Vec<String> },
    Boolean { name: String },
}

impl Dimension {
    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        Dimension::Real { name: name.into(), lo, hi, log: false }
    }

    pub fn log_real(name: &str, lo: f64, hi: f64) -> Self {
        Dimension::Real { name: name.into(), lo, hi, log: true }
    }

    pub fn integer(name: &str, lo: i64, hi: i64) -> Self {
        Dimension::Integer { name: name.into(), lo, hi }
    }

    pub fn categorical<S: AsRef<str>>(name: &str, levels: &[S]) -> Self {
        Dimension::Categorical {
            name: name.into(),
            levels: levels.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    pub fn boolean(name: &str) -> Self {
        Dimension::Boolean { name: name.into() }
    }

    pub fn name(&self) -> &str {
        match self {
            Dimension::Real { name, .. }
            | Dimension::Integer { name, .. }
            | Dimension::Categorical { name, .. }
            | Dimension::Boolean { name } => name,
        }
    }

    /// Number of encoded coordinates.
    pub fn width(&self) -> usize {
        match self {
            Dimension::Categorical { levels, .. } => levels.len(),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Dimension::Real { name, lo, hi, log } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(invalid(format!("dimension {name}: need lo < hi")));
                }
                if *log && *lo <= 0.0 {
                    return Err(invalid(format!("dimension {name}: log scale needs lo > 0")));
                }
            }
            Dimension::Integer { name, lo, hi } => {
                if lo >= hi {
                    return Err(invalid(format!("dimension {name}: need lo < hi")));
                }
            }
            Dimension::Categorical { name, levels } => {
                if levels.len() < 2 {
                    return Err(invalid(format!("dimension {name}: need at least 2 levels")));
                }
                let mut sorted = levels.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != levels.len() {
                    return Err(invalid(format!("dimension {name}: duplicate levels")));
                }
            }
            Dimension::Boolean { .. } => {}
        }
        Ok(())
    }

    fn encode_into(&self, v: &Value, out: &mut Vec<f64>) -> Result<()> {
        let bad = || invalid(format!("value {v} does not fit dimension {}", self.name()));
        match self {
            Dimension::Real { lo, hi, log, .. } => {
                let x = v.as_f64().ok_or_else(bad)?;
                if !(x >= *lo && x <= *hi) {
                    return Err(bad());
                }
                out.push(if *log {
                    (x.ln() - lo.ln()) / (hi.ln() - lo.ln())
                } else {
                    (x - lo) / (hi - lo)
                });
            }
            Dimension::Integer { lo, hi, .. } => {
                let x = v.as_i64().ok_or_else(bad)?;
                if x < *lo || x > *hi {
                    return Err(bad());
                }
                out.push((x - lo) as f64 / (hi - lo) as f64);
            }
            Dimension::Categorical { levels, .. } => {
                let s = v.as_str().ok_or_else(bad)?;
                let at = levels.iter().position(|l| l == s).ok_or_else(bad)?;
                out.extend((0..levels.len()).map(|i| if i == at { 1.0 } else { 0.0 }));
            }
            Dimension::Boolean { .. } => {
                out.push(if v.as_bool().ok_or_else(bad)? { 1.0 } else { 0.0 });
            }
        }
        Ok(())
    }

    /// Inverse of the encoding; coordinates are clamped into `[0, 1]`.
    fn decode(&self, u: &[f64]) -> Value {
        let c = |x: f64| x.clamp(0.0, 1.0);
        match self {
            Dimension::Real { lo, hi, log, .. } => {
                let t = c(u[0]);
                let x = if *log {
                    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + t * (hi - lo)
                };
                Value::Real(x.clamp(*lo, *hi))
            }
            Dimension::Integer { lo, hi, .. } => {
                let x = *lo as f64 + c(u[0]) * (hi - lo) as f64;
                Value::Int((x.round() as i64).clamp(*lo, *hi))
            }
            Dimension::Categorical { levels, .. } => Value::Cat(levels[crate::scalar::argmax(u)].clone()),
            Dimension::Boolean { .. } => Value::Bool(u[0] >= 0.5),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match self {
            Dimension::Real { .. } => self.decode(&[rng.gen::<f64>()]),
            Dimension::Integer { lo, hi, .. } => Value::Int(rng.gen_range(*lo..=*hi)),
            Dimension::Categorical { levels, .. } => Value::Cat(levels[rng.gen_range(0..levels.len())].clone()),
            Dimension::Boolean { .. } => Value::Bool(rng.gen()),
        }
    }
}

/// Ordered list of dimensions a configuration ranges over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationSpace {
    dims: Vec<Dimension>,
}

impl ConfigurationSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("configuration space has no dimensions"));
        }
        for d in &dims {
            d.validate()?;
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name() == name)
    }

    /// Width of the encoded vector.
    pub fn encoded_width(&self) -> usize {
        self.dims.iter().map(Dimension::width).sum()
    }

    pub fn encode(&self, cfg: &[Value]) -> Result<Vec<f64>> {
        if cfg.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: cfg.len(),
            });
        }
        let mut out = Vec::with_capacity(self.encoded_width());
        for (d, v) in self.dims.iter().zip(cfg) {
            d.encode_into(v, &mut out)?;
        }
        Ok(out)
    }

    /// Maps any encoded vector (not necessarily a valid encoding) back to the
    /// nearest configuration.
    pub fn decode(&self, u: &[f64]) -> Result<Config> {
        if u.len() != self.encoded_width() {
            return Err(Error::DimensionMismatch {
                expected: self.encoded_width(),
                got: u.len(),
            });
        }
        let mut at = 0;
        Ok(self
            .dims
            .iter()
            .map(|d| {
                let w = d.width();
                let v = d.decode(&u[at..at + w]);
                at += w;
                v
            })
            .collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Config {
        self.dims.iter().map(|d| d.sample(rng)).collect()
    }

    pub fn contains(&self, cfg: &[Value]) -> bool {
        self.encode(cfg).is_ok()
    }
}
