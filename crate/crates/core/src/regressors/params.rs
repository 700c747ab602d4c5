use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    /// Parse a textual value: integer, then float, then boolean, else string.
    pub fn parse(text: &str) -> ParamValue {
        let t = text.trim();
        if let Ok(i) = t.parse::<i64>() {
            ParamValue::Int(i)
        } else if let Ok(f) = t.parse::<f64>() {
            ParamValue::Float(f)
        } else if let Ok(b) = t.parse::<bool>() {
            ParamValue::Bool(b)
        } else {
            ParamValue::Str(t.to_string())
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match *self {
            ParamValue::Int(i) if i >= 0 => Some(i as usize),
            ParamValue::Float(f) if f >= 0.0 && f.fract() == 0.0 && f < 1e15 => Some(f as usize),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            ParamValue::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

pub type Params = BTreeMap<String, ParamValue>;

/// Typed reader over a hyperparameter map that rejects unknown names.
pub(crate) struct Reader<'a> {
    family: &'a str,
    params: &'a Params,
    known: &'a [&'a str],
}

impl<'a> Reader<'a> {
    pub(crate) fn new(family: &'a str, params: &'a Params, known: &'a [&'a str]) -> Result<Self> {
        if let Some(bad) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::InvalidArgument(format!(
                "unknown {family} hyperparameter `{bad}` (known: {})",
                known.join(", ")
            )));
        }
        Ok(Reader { family, params, known })
    }

    fn invalid(&self, name: &str, want: &str) -> Error {
        Error::InvalidArgument(format!(
            "{} hyperparameter `{name}` must be {want}, got {}",
            self.family, self.params[name]
        ))
    }

    pub(crate) fn f64(&self, name: &str, default: f64) -> Result<f64> {
        debug_assert!(self.known.contains(&name));
        match self.params.get(name) {
            None => Ok(default),
            Some(v) => v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| self.invalid(name, "a finite number")),
        }
    }

    pub(crate) fn positive_f64(&self, name: &str, default: f64) -> Result<f64> {
        let v = self.f64(name, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.invalid(name, "> 0"))
        }
    }

    pub(crate) fn usize(&self, name: &str, default: usize) -> Result<usize> {
        match self.params.get(name) {
            None => Ok(default),
            Some(v) => v.as_usize().ok_or_else(|| self.invalid(name, "a non-negative integer")),
        }
    }

    pub(crate) fn bool(&self, name: &str, default: bool) -> Result<bool> {
        match self.params.get(name) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| self.invalid(name, "true or false")),
        }
    }

    pub(crate) fn raw(&self, name: &str) -> Option<&ParamValue> {
        self.params.get(name)
    }
}
