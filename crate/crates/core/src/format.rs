//! Text documents describing graphs, graphs of groups and covering maps.
//!
//! Documents are JSON. Lengths are written as exact rationals, either as a
//! `"p/q"` string or as a bare integer. Serialization goes through plain
//! structs with a fixed field order and ordered maps, so identical inputs
//! always produce identical bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::Rational;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// An exact rational as it appears in documents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalText(pub Rational);

impl FromStr for RationalText {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse_int = |t: &str| BigInt::from_str(t.trim()).map_err(|_| format!("invalid rational `{s}`"));
        let value = match s.split_once('/') {
            Some((p, q)) => {
                let q = parse_int(q)?;
                if q == BigInt::from(0) {
                    return Err(format!("zero denominator in `{s}`"));
                }
                Rational::new(parse_int(p)?, q)
            }
            None => Rational::from_integer(parse_int(s)?),
        };
        Ok(RationalText(value))
    }
}

impl fmt::Display for RationalText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // BigRational prints integers without a denominator.
        write!(f, "{}", self.0)
    }
}

impl Serialize for RationalText {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RationalText {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RationalVisitor;

        impl Visitor<'_> for RationalVisitor {
            type Value = RationalText;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational as \"p/q\" or an integer")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(RationalText(Rational::from_integer(BigInt::from(v))))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(RationalText(Rational::from_integer(BigInt::from(v))))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Err(E::custom(format!("lengths must be exact; write {v} as \"p/q\"")))
            }
        }

        deserializer.deserialize_any(RationalVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub u: String,
    pub v: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<RationalText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

/// Orders of vertex and edge groups, keyed by vertex name and edge id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsSpec {
    #[serde(default)]
    pub vertex_orders: BTreeMap<String, u64>,
    #[serde(default)]
    pub edge_orders: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupsSpec>,
}

/// A covering map between two graphs of groups.
///
/// `vmap` sends source vertices to target vertices. `emap` sends each source
/// edge id, in its forward orientation, to an oriented target edge label
/// (`id` or `~id` for the reversed orientation).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverDocument {
    pub source: GraphDocument,
    pub target: GraphDocument,
    pub vmap: BTreeMap<String, String>,
    pub emap: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sheets: Option<u64>,
}

pub fn parse_graph(text: &str) -> Result<GraphDocument, FormatError> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_cover(text: &str) -> Result<CoverDocument, FormatError> {
    Ok(serde_json::from_str(text)?)
}

/// Canonical, byte-stable rendering of any document.
pub fn to_canonical_string<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents always serialize");
    s.push('\n');
    s
}
