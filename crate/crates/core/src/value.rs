//! Universal local-state values.
//!
//! Agent programs describe their local states as [`Value`] trees: symbols for
//! finite protocol states, arbitrary-precision integers for ID counters, lists
//! for fixed-size arrays, and records for named variables. Values are immutable
//! once emitted into a trace and are cheap to hash, order, and compare, which
//! the verifiers and attack searches rely on.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A structured, immutable local-state value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    /// The out-of-band null (written `⊥` in protocol descriptions where it
    /// denotes "unset" rather than a protocol state named "bot").
    Null,
    Bool(bool),
    /// Arbitrary-precision integer (ID counters may grow without bound).
    Int(BigInt),
    /// A symbolic state name.
    Sym(String),
    List(Vec<Value>),
    Record(BTreeMap<String, Value>),
}

impl Value {
    pub fn int(n: impl Into<BigInt>) -> Value {
        Value::Int(n.into())
    }

    pub fn sym(s: impl Into<String>) -> Value {
        Value::Sym(s.into())
    }

    pub fn list(items: impl IntoIterator<Item = Value>) -> Value {
        Value::List(items.into_iter().collect())
    }

    pub fn record<K: Into<String>>(fields: impl IntoIterator<Item = (K, Value)>) -> Value {
        Value::Record(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Value::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    /// Looks up a record field; `None` for non-records and missing fields.
    pub fn get(&self, field: &str) -> Option<&Value> {
        match self {
            Value::Record(map) => map.get(field),
            _ => None,
        }
    }

    /// Returns a copy of this record with one field replaced.
    ///
    /// Panics if `self` is not a record; programs only call this on their own
    /// well-formed states.
    pub fn with_field(&self, field: &str, value: Value) -> Value {
        match self {
            Value::Record(map) => {
                let mut map = map.clone();
                map.insert(field.to_string(), value);
                Value::Record(map)
            }
            other => panic!("with_field on non-record value {other}"),
        }
    }

    /// Converts to the JSON encoding used by trace and script files:
    /// null/bool/array/object map directly, symbols are strings, and integers
    /// are JSON numbers when they fit in an `i64` and `{"$big": "<decimal>"}`
    /// otherwise.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Int(n) => match i64::try_from(n.clone()) {
                Ok(small) => serde_json::Value::from(small),
                Err(_) => serde_json::json!({ "$big": n.to_string() }),
            },
            Value::Sym(s) => serde_json::Value::String(s.clone()),
            Value::List(items) => {
                serde_json::Value::Array(items.iter().map(Value::to_json).collect())
            }
            Value::Record(map) => serde_json::Value::Object(
                map.iter().map(|(k, v)| (k.clone(), v.to_json())).collect(),
            ),
        }
    }

    /// Inverse of [`Value::to_json`]. Rejects floats and reserved `$`-keys.
    pub fn from_json(json: &serde_json::Value) -> Result<Value> {
        match json {
            serde_json::Value::Null => Ok(Value::Null),
            serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Value::int)
                .ok_or_else(|| Error::Config(format!("non-integer number {n} in state value"))),
            serde_json::Value::String(s) => Ok(Value::sym(s.clone())),
            serde_json::Value::Array(items) => Ok(Value::List(
                items.iter().map(Value::from_json).collect::<Result<_>>()?,
            )),
            serde_json::Value::Object(map) => {
                if map.len() == 1 {
                    if let Some(serde_json::Value::String(digits)) = map.get("$big") {
                        let n = digits.parse::<BigInt>().map_err(|e| {
                            Error::Config(format!("bad $big integer {digits:?}: {e}"))
                        })?;
                        return Ok(Value::Int(n));
                    }
                }
                let mut out = BTreeMap::new();
                for (k, v) in map {
                    if k.starts_with('$') {
                        return Err(Error::Config(format!(
                            "record key {k:?} uses the reserved '$' prefix"
                        )));
                    }
                    out.insert(k.clone(), Value::from_json(v)?);
                }
                Ok(Value::Record(out))
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => write!(f, "null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Sym(s) => write!(f, "{s}"),
            Value::List(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
            Value::Record(map) => {
                write!(f, "{{")?;
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}={v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = serde_json::Value::deserialize(deserializer)?;
        Value::from_json(&json).map_err(D::Error::custom)
    }
}

/// Interns structurally equal states so traces over small state spaces share
/// one allocation per distinct state.
#[derive(Debug, Default)]
pub struct StateCache {
    seen: std::collections::HashMap<Value, Arc<Value>>,
}

impl StateCache {
    pub fn new() -> StateCache {
        StateCache::default()
    }

    pub fn intern(&mut self, value: Value) -> Arc<Value> {
        if let Some(existing) = self.seen.get(&value) {
            return Arc::clone(existing);
        }
        let arc = Arc::new(value.clone());
        self.seen.insert(value, Arc::clone(&arc));
        arc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_preserves_structure() {
        let v = Value::record([
            ("my_ID", Value::Null),
            ("next_ID", Value::list([Value::int(1), Value::int(2)])),
            ("locked", Value::list([Value::Bool(false), Value::Bool(true)])),
            ("name", Value::sym("leader")),
        ]);
        let json = v.to_json();
        assert_eq!(Value::from_json(&json).unwrap(), v);
    }

    #[test]
    fn big_integers_use_the_big_envelope() {
        let big: BigInt = "123456789012345678901234567890".parse().unwrap();
        let v = Value::Int(big.clone());
        let json = v.to_json();
        assert_eq!(json["$big"], big.to_string());
        assert_eq!(Value::from_json(&json).unwrap(), v);
    }

    #[test]
    fn small_integers_are_plain_numbers() {
        assert_eq!(Value::int(42).to_json(), serde_json::json!(42));
        assert_eq!(
            Value::from_json(&serde_json::json!(-7)).unwrap(),
            Value::int(-7)
        );
    }

    #[test]
    fn reserved_keys_are_rejected() {
        let json = serde_json::json!({ "$weird": 1 });
        assert!(Value::from_json(&json).is_err());
    }

    #[test]
    fn floats_are_rejected() {
        assert!(Value::from_json(&serde_json::json!(1.5)).is_err());
    }

    #[test]
    fn interner_shares_equal_states() {
        let mut cache = StateCache::new();
        let a = cache.intern(Value::sym("c"));
        let b = cache.intern(Value::sym("c"));
        assert!(Arc::ptr_eq(&a, &b));
    }
}
