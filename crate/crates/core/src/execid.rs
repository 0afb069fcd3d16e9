use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Server-minted identifier of one execution, e.g. `EI65231`.
///
/// Freshly generated ids carry 96 random bits rendered as uppercase hex.
/// Parsing accepts any `EI` followed by ASCII letters or digits so that ids
/// appearing in tool output can be carried around before they are resolved.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ExecId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid execution id {0:?}: expected \"EI\" followed by letters or digits")]
pub struct InvalidExecId(pub String);

impl ExecId {
    const PREFIX: &'static str = "EI";

    pub fn generate() -> Self {
        let bits: u128 = rand::thread_rng().gen::<u128>() >> 32;
        ExecId(format!("{}{:024X}", Self::PREFIX, bits))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for ExecId {
    type Err = InvalidExecId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix(Self::PREFIX) {
            Some(rest) if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_alphanumeric()) => {
                Ok(ExecId(s.to_owned()))
            }
            _ => Err(InvalidExecId(s.to_owned())),
        }
    }
}

impl TryFrom<String> for ExecId {
    type Error = InvalidExecId;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ExecId> for String {
    fn from(id: ExecId) -> Self {
        id.0
    }
}

impl fmt::Display for ExecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ExecId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}
