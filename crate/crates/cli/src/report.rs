use std::fmt;

use mesp::MespError;
use serde_json::{Map, Value};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input, or arguments the instance cannot satisfy.
    Input(String),
    /// An enumeration cap was hit.
    Cap(String),
    /// A computed bound or certificate contradicts another.
    Invariant(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Cap(m) => write!(f, "{m}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<MespError> for CliError {
    fn from(e: MespError) -> Self {
        use MespError::*;
        match e {
            TooLarge { .. } => CliError::Cap(e.to_string()),
            Parse { .. }
            | NotSymmetric { .. }
            | NotPsd { .. }
            | ZeroMatrix
            | DimensionMismatch { .. }
            | BadCardinality { .. }
            | RankDeficient { .. }
            | InsufficientSupport { .. }
            | InvalidArgument(_) => CliError::Input(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

/// Direction of the optimization a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// Maximize `log det`.
    LogDet,
    /// Minimize `tr(C⁻¹)`.
    Trace,
}

/// A report: sections of key/value pairs, plus timing kept apart so the
/// rest is reproducible byte for byte.
#[derive(Debug, Default)]
pub struct Report {
    pub sections: Map<String, Value>,
    pub timing: Map<String, Value>,
    lower: Vec<(String, Sense, f64)>,
    upper: Vec<(String, Sense, f64)>,
}

impl Report {
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<Value>) {
        let entry = self
            .sections
            .entry(section.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        if let Value::Object(m) = entry {
            m.insert(key.to_string(), value.into());
        }
    }

    pub fn time(&mut self, stage: &str, seconds: f64) {
        self.timing.insert(format!("{stage}_seconds"), Value::from(seconds));
    }

    pub fn lower_bound(&mut self, name: &str, sense: Sense, value: f64) {
        self.lower.push((name.to_string(), sense, value));
    }

    pub fn upper_bound(&mut self, name: &str, sense: Sense, value: f64) {
        self.upper.push((name.to_string(), sense, value));
    }

    /// Every reported lower bound must sit below every upper bound of the
    /// same problem.
    pub fn check_bounds(&self) -> Result<(), CliError> {
        for (ln, ls, lv) in &self.lower {
            for (un, us, uv) in &self.upper {
                if ls == us && lv.is_finite() && uv.is_finite() && *lv > uv + 1e-9 * (1.0 + uv.abs()) {
                    return Err(CliError::Invariant(format!("{ln} = {lv} exceeds {un} = {uv}")));
                }
            }
        }
        Ok(())
    }

    fn document(&self) -> Value {
        let mut doc = self.sections.clone();
        doc.insert("timing".into(), Value::Object(self.timing.clone()));
        Value::Object(doc)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.document()).expect("report serializes");
        s.push('\n');
        s
    }

    /// `section,key,value` rows; arrays are space-separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,value\n");
        if let Value::Object(doc) = self.document() {
            for (section, body) in doc {
                let Value::Object(body) = body else { continue };
                for (key, value) in body {
                    out.push_str(&format!("{section},{key},{}\n", csv_cell(&value)));
                }
            }
        }
        out
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains(',') || s.contains('"') => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(csv_cell).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}

/// `100·(upper − lower)/|reference|`, or null when the reference is zero.
pub fn percent_gap(upper: f64, lower: f64, reference: f64) -> Value {
    if reference == 0.0 || !upper.is_finite() || !lower.is_finite() {
        Value::Null
    } else {
        Value::from(100.0 * (upper - lower) / reference.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_check_and_csv() {
        let mut r = Report::default();
        r.set("results", "z", 1.5);
        r.set("results", "subset", vec![1, 2]);
        r.lower_bound("lb", Sense::LogDet, 1.0);
        r.upper_bound("ub", Sense::LogDet, 2.0);
        r.lower_bound("other", Sense::Trace, 5.0);
        assert!(r.check_bounds().is_ok());
        r.lower_bound("bad", Sense::LogDet, 2.5);
        assert!(matches!(r.check_bounds(), Err(CliError::Invariant(_))));
        let csv = r.to_csv();
        assert!(csv.contains("results,subset,1 2\n"));
        assert!(csv.contains("results,z,1.5\n"));
        assert_eq!(percent_gap(2.0, 1.0, 0.0), Value::Null);
    }
}
