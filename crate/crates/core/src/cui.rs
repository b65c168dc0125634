use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A UMLS concept unique identifier: `C` followed by seven digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Cui(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid CUI {0:?}: expected C followed by 7 digits")]
pub struct InvalidCui(pub String);

impl Cui {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_valid(s: &str) -> bool {
        let b = s.as_bytes();
        b.len() == 8 && b[0] == b'C' && b[1..].iter().all(u8::is_ascii_digit)
    }
}

impl FromStr for Cui {
    type Err = InvalidCui;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if Cui::is_valid(s) {
            Ok(Cui(s.to_owned()))
        } else {
            Err(InvalidCui(s.to_owned()))
        }
    }
}

impl TryFrom<String> for Cui {
    type Error = InvalidCui;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if Cui::is_valid(&s) {
            Ok(Cui(s))
        } else {
            Err(InvalidCui(s))
        }
    }
}

impl From<Cui> for String {
    fn from(c: Cui) -> String {
        c.0
    }
}

impl fmt::Display for Cui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Cui {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern() {
        assert!("C0206073".parse::<Cui>().is_ok());
        for bad in ["X123", "C123", "c0206073", "C02060731", "C020607a", ""] {
            assert!(bad.parse::<Cui>().is_err(), "{bad}");
        }
    }

    #[test]
    fn serde_validates() {
        assert!(serde_json::from_str::<Cui>("\"C0000001\"").is_ok());
        assert!(serde_json::from_str::<Cui>("\"X123\"").is_err());
    }
}
