use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Storage precision of a shaped embedding component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Precision {
    /// `{-1, +1}`
    #[serde(rename = "1bit")]
    Binary,
    /// `{-1, 0, +1}`
    #[serde(rename = "1.58bit")]
    Ternary,
    #[serde(rename = "2bit")]
    TwoBit,
    #[serde(rename = "int4")]
    Int4,
}

impl Precision {
    pub const ALL: [Precision; 4] = [Precision::Binary, Precision::Ternary, Precision::TwoBit, Precision::Int4];

    pub fn levels(self) -> usize {
        match self {
            Precision::Binary => 2,
            Precision::Ternary => 3,
            Precision::TwoBit => 4,
            Precision::Int4 => 16,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Precision::Binary => "1bit",
            Precision::Ternary => "1.58bit",
            Precision::TwoBit => "2bit",
            Precision::Int4 => "int4",
        }
    }

    pub fn from_levels(k: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.levels() == k)
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1bit" | "1" | "binary" => Ok(Precision::Binary),
            "1.58bit" | "1.58" | "ternary" => Ok(Precision::Ternary),
            "2bit" | "2" => Ok(Precision::TwoBit),
            "int4" | "4bit" => Ok(Precision::Int4),
            other => Err(Error::Parameter(format!(
                "unknown precision '{other}' (expected 1bit, 1.58bit, 2bit or int4)"
            ))),
        }
    }
}
