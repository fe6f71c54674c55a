//! Runtime values of the MiniC target language.

use std::fmt;

/// A MiniC value. Also the payload of recorded probes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
    Unit,
}

impl Value {
    /// C-style truthiness: zero, `false`, the empty string and unit are false.
    pub fn truthy(&self) -> bool {
        match self {
            Value::Int(n) => *n != 0,
            Value::Bool(b) => *b,
            Value::Str(s) => !s.is_empty(),
            Value::Unit => false,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Str(_) => "str",
            Value::Unit => "unit",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => f.write_str(s),
            Value::Unit => Ok(()),
        }
    }
}

/// Target type of a `VALUE(t)` conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cast {
    Int,
    Bool,
    Str,
}

impl Cast {
    pub fn keyword(self) -> &'static str {
        match self {
            Cast::Int => "int",
            Cast::Bool => "bool",
            Cast::Str => "str",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Cast> {
        match s {
            "int" => Some(Cast::Int),
            "bool" => Some(Cast::Bool),
            "str" => Some(Cast::Str),
            _ => None,
        }
    }

    /// `int` accepts integers and booleans (as 0/1); `bool` takes the
    /// truthiness of anything; `str` stringifies anything.
    pub fn apply(self, v: &Value) -> Result<Value, String> {
        match (self, v) {
            (Cast::Int, Value::Int(n)) => Ok(Value::Int(*n)),
            (Cast::Int, Value::Bool(b)) => Ok(Value::Int(i64::from(*b))),
            (Cast::Int, other) => Err(format!("cannot convert {} value to int", other.type_name())),
            (Cast::Bool, v) => Ok(Value::Bool(v.truthy())),
            (Cast::Str, v) => Ok(Value::Str(v.to_string())),
        }
    }
}

/// Outcome of evaluating a probe at the end of an event. Failed probes keep
/// the error text so post-mortem evaluation can report it.
pub type ProbeResult = Result<Value, String>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truthiness_is_c_like() {
        assert!(!Value::Int(0).truthy());
        assert!(Value::Int(-3).truthy());
        assert!(Value::Bool(true).truthy());
        assert!(!Value::Str(String::new()).truthy());
        assert!(!Value::Unit.truthy());
    }

    #[test]
    fn casts() {
        assert_eq!(Cast::Int.apply(&Value::Bool(true)), Ok(Value::Int(1)));
        assert!(Cast::Int.apply(&Value::Str("7".into())).is_err());
        assert_eq!(Cast::Str.apply(&Value::Int(0)), Ok(Value::Str("0".into())));
        assert_eq!(Cast::Bool.apply(&Value::Int(5)), Ok(Value::Bool(true)));
    }
}
