//! The five higher-order value dimensions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const N_DIMS: usize = 5;

/// Higher-order value dimension. The discriminant is the canonical column
/// index used by every per-dimension array in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    /// Conservation / Conservative.
    #[serde(rename = "CO")]
    Conservative = 0,
    #[serde(rename = "ST")]
    SelfTranscendence = 1,
    #[serde(rename = "OC")]
    OpennessToChange = 2,
    #[serde(rename = "HE")]
    Hedonism = 3,
    #[serde(rename = "SE")]
    SelfEnhancement = 4,
}

impl Dimension {
    pub const ALL: [Dimension; N_DIMS] = [
        Dimension::Conservative,
        Dimension::SelfTranscendence,
        Dimension::OpennessToChange,
        Dimension::Hedonism,
        Dimension::SelfEnhancement,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Dimension> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Dimension::Conservative => "CO",
            Dimension::SelfTranscendence => "ST",
            Dimension::OpennessToChange => "OC",
            Dimension::Hedonism => "HE",
            Dimension::SelfEnhancement => "SE",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            Dimension::Conservative => "Conservative",
            Dimension::SelfTranscendence => "Self-Transcendence",
            Dimension::OpennessToChange => "Openness to Change",
            Dimension::Hedonism => "Hedonism",
            Dimension::SelfEnhancement => "Self-Enhancement",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CO" | "CONSERVATIVE" | "CONSERVATION" => Ok(Dimension::Conservative),
            "ST" | "SELF-TRANSCENDENCE" => Ok(Dimension::SelfTranscendence),
            "OC" | "OPENNESS-TO-CHANGE" | "OPENNESS" => Ok(Dimension::OpennessToChange),
            "HE" | "HEDONISM" => Ok(Dimension::Hedonism),
            "SE" | "SELF-ENHANCEMENT" => Ok(Dimension::SelfEnhancement),
            other => Err(Error::invalid(format!("unknown value dimension `{other}`"))),
        }
    }
}
