//! Predicates over provider datasets: a precomputed boolean label, a
//! single comparison, or a conjunction of comparisons.

use std::fmt;
use std::str::FromStr;

use super::{AttrValue, ProviderDataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        };
        f.write_str(s)
    }
}

/// `attribute op constant`. Ordering operators require numeric
/// operands; equality on categorical values is exact string match.
/// Comparisons against a missing value are false.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub attr: String,
    pub op: CmpOp,
    pub value: AttrValue,
}

impl Comparison {
    pub fn new(attr: impl Into<String>, op: CmpOp, value: AttrValue) -> Self {
        Comparison {
            attr: attr.into(),
            op,
            value,
        }
    }

    fn eval(&self, actual: &AttrValue) -> bool {
        match self.op {
            CmpOp::Eq => match (actual, &self.value) {
                (AttrValue::Cat(a), AttrValue::Cat(b)) => a == b,
                (AttrValue::Bool(a), AttrValue::Bool(b)) => a == b,
                _ => match (actual.as_f64(), self.value.as_f64()) {
                    (Some(a), Some(b)) => a == b,
                    _ => false,
                },
            },
            op => match (actual.as_f64(), self.value.as_f64()) {
                (Some(a), Some(b)) => match op {
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Eq => unreachable!(),
                },
                _ => false,
            },
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match &self.value {
            AttrValue::Int(v) => v.to_string(),
            AttrValue::Real(v) => v.to_string(),
            AttrValue::Bool(v) => v.to_string(),
            AttrValue::Cat(v) => v.clone(),
            AttrValue::Missing => "?".to_string(),
        };
        write!(f, "{}{}{}", self.attr, self.op, v)
    }
}

/// A provider-side selection predicate. Evaluation is deterministic
/// and side-effect free.
#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    /// A precomputed boolean attribute; true where the stored value is
    /// `Bool(true)`.
    Label(String),
    Comparison(Comparison),
    And(Vec<Comparison>),
}

impl Predicate {
    pub fn label(attr: impl Into<String>) -> Self {
        Predicate::Label(attr.into())
    }

    fn attrs(&self) -> Vec<&str> {
        match self {
            Predicate::Label(a) => vec![a.as_str()],
            Predicate::Comparison(c) => vec![c.attr.as_str()],
            Predicate::And(cs) => cs.iter().map(|c| c.attr.as_str()).collect(),
        }
    }

    /// Checks every referenced attribute exists in the dataset schema.
    pub fn validate(&self, dataset: &ProviderDataset) -> Result<()> {
        for attr in self.attrs() {
            if !dataset.has_attribute(attr) {
                return Err(Error::Schema(format!(
                    "attribute {attr:?} not in provider {} schema",
                    dataset.provider_id()
                )));
            }
        }
        Ok(())
    }

    /// Evaluates on one row. Callers must have validated the schema;
    /// a missing column evaluates false rather than panicking.
    pub(crate) fn eval_row(&self, dataset: &ProviderDataset, row: usize) -> bool {
        match self {
            Predicate::Label(attr) => matches!(
                dataset.value_at(row, attr),
                Some(AttrValue::Bool(true))
            ),
            Predicate::Comparison(c) => dataset
                .value_at(row, &c.attr)
                .is_some_and(|v| c.eval(v)),
            Predicate::And(cs) => cs.iter().all(|c| {
                dataset.value_at(row, &c.attr).is_some_and(|v| c.eval(v))
            }),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Label(a) => write!(f, "label:{a}"),
            Predicate::Comparison(c) => write!(f, "{c}"),
            Predicate::And(cs) => {
                let parts: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                f.write_str(&parts.join("&&"))
            }
        }
    }
}

const OPS: [(&str, CmpOp); 5] = [
    ("<=", CmpOp::Le),
    (">=", CmpOp::Ge),
    ("==", CmpOp::Eq),
    ("<", CmpOp::Lt),
    (">", CmpOp::Gt),
];

fn parse_comparison(text: &str) -> Result<Comparison> {
    let err = || Error::Config(format!("cannot parse comparison {text:?}"));
    // find the first operator character, trying two-character forms
    // before single-character ones so `>=` is not read as `>`, `=`.
    let pos = text
        .find(|c| c == '<' || c == '>' || c == '=')
        .ok_or_else(err)?;
    let attr = text[..pos].trim();
    if attr.is_empty() {
        return Err(err());
    }
    let rest = &text[pos..];
    let (op, value_text) = OPS
        .iter()
        .find_map(|(sym, op)| rest.strip_prefix(sym).map(|v| (*op, v)))
        .or_else(|| rest.strip_prefix('=').map(|v| (CmpOp::Eq, v)))
        .ok_or_else(err)?;
    let value_text = value_text.trim();
    if value_text.is_empty() {
        return Err(err());
    }
    let unquoted = value_text
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .unwrap_or(value_text);
    let value = if let Ok(i) = unquoted.parse::<i64>() {
        AttrValue::Int(i)
    } else if let Ok(r) = unquoted.parse::<f64>() {
        AttrValue::Real(r)
    } else {
        AttrValue::Cat(unquoted.to_string())
    };
    Ok(Comparison::new(attr, op, value))
}

impl FromStr for Predicate {
    type Err = Error;

    /// Parses predicate expressions of the form used on the command
    /// line: `label:<attr>`, a single comparison such as `age>=30` or
    /// `income=>50K`, or a `&&`-joined conjunction. Values may be
    /// double-quoted; comparison scanning takes the first operator
    /// occurrence, so categorical values containing `<`, `>` or `=`
    /// (e.g. `>50K`) parse without quoting when they follow `=`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Config("empty predicate expression".into()));
        }
        if let Some(attr) = s.strip_prefix("label:") {
            let attr = attr.trim();
            if attr.is_empty() {
                return Err(Error::Config("label predicate needs an attribute".into()));
            }
            return Ok(Predicate::Label(attr.to_string()));
        }
        if s == "label" {
            return Ok(Predicate::Label("label".to_string()));
        }
        let parts: Vec<&str> = s.split("&&").collect();
        if parts.len() == 1 {
            Ok(Predicate::Comparison(parse_comparison(parts[0])?))
        } else {
            let comparisons = parts
                .into_iter()
                .map(parse_comparison)
                .collect::<Result<Vec<_>>>()?;
            Ok(Predicate::And(comparisons))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_numeric_comparison() {
        let p: Predicate = "age>=30".parse().unwrap();
        assert_eq!(
            p,
            Predicate::Comparison(Comparison::new("age", CmpOp::Ge, AttrValue::Int(30)))
        );
    }

    #[test]
    fn parse_categorical_with_leading_gt() {
        // adult income values are "<=50K" / ">50K"; `=` binds first
        let p: Predicate = "income=>50K".parse().unwrap();
        assert_eq!(
            p,
            Predicate::Comparison(Comparison::new(
                "income",
                CmpOp::Eq,
                AttrValue::Cat(">50K".into())
            ))
        );
    }

    #[test]
    fn parse_quoted_value() {
        let p: Predicate = r#"income="<=50K""#.parse().unwrap();
        assert_eq!(
            p,
            Predicate::Comparison(Comparison::new(
                "income",
                CmpOp::Eq,
                AttrValue::Cat("<=50K".into())
            ))
        );
    }

    #[test]
    fn parse_conjunction() {
        let p: Predicate = "age>=30 && hours-per-week<40".parse().unwrap();
        assert_eq!(
            p,
            Predicate::And(vec![
                Comparison::new("age", CmpOp::Ge, AttrValue::Int(30)),
                Comparison::new("hours-per-week", CmpOp::Lt, AttrValue::Int(40)),
            ])
        );
    }

    #[test]
    fn parse_label_forms() {
        assert_eq!(
            "label".parse::<Predicate>().unwrap(),
            Predicate::Label("label".into())
        );
        assert_eq!(
            "label:flag".parse::<Predicate>().unwrap(),
            Predicate::Label("flag".into())
        );
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("".parse::<Predicate>().is_err());
        assert!("age".parse::<Predicate>().is_err());
        assert!("=30".parse::<Predicate>().is_err());
        assert!("age>".parse::<Predicate>().is_err());
    }

    #[test]
    fn missing_value_compares_false() {
        let c = Comparison::new("x", CmpOp::Ge, AttrValue::Int(0));
        assert!(!c.eval(&AttrValue::Missing));
        let eq = Comparison::new("x", CmpOp::Eq, AttrValue::Cat("a".into()));
        assert!(!eq.eval(&AttrValue::Missing));
    }

    #[test]
    fn ordering_on_categoricals_is_false() {
        let c = Comparison::new("x", CmpOp::Lt, AttrValue::Cat("b".into()));
        assert!(!c.eval(&AttrValue::Cat("a".into())));
    }

    #[test]
    fn mixed_numeric_comparison() {
        let c = Comparison::new("x", CmpOp::Gt, AttrValue::Real(1.5));
        assert!(c.eval(&AttrValue::Int(2)));
        assert!(!c.eval(&AttrValue::Int(1)));
    }
}
