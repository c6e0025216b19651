//! The fixed table of the 22 Arab League member states.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One row of the country table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountryEntry {
    pub name: &'static str,
    pub code: &'static str,
    aliases: &'static [&'static str],
}

const fn entry(
    name: &'static str,
    code: &'static str,
    aliases: &'static [&'static str],
) -> CountryEntry {
    CountryEntry {
        name,
        code,
        aliases,
    }
}

pub static ARAB_COUNTRIES: [CountryEntry; 22] = [
    entry("Algeria", "DZ", &[]),
    entry("Bahrain", "BH", &["kingdom of bahrain"]),
    entry("Comoros", "KM", &["union of the comoros"]),
    entry("Djibouti", "DJ", &[]),
    entry("Egypt", "EG", &["arab republic of egypt"]),
    entry("Iraq", "IQ", &[]),
    entry("Jordan", "JO", &["hashemite kingdom of jordan"]),
    entry("Kuwait", "KW", &["state of kuwait"]),
    entry("Lebanon", "LB", &[]),
    entry("Libya", "LY", &[]),
    entry("Mauritania", "MR", &[]),
    entry("Morocco", "MA", &["kingdom of morocco"]),
    entry("Oman", "OM", &["sultanate of oman"]),
    entry("Palestine", "PS", &["state of palestine"]),
    entry("Qatar", "QA", &["state of qatar"]),
    entry("Saudi Arabia", "SA", &["ksa", "kingdom of saudi arabia"]),
    entry("Somalia", "SO", &[]),
    entry("Sudan", "SD", &[]),
    entry("Syria", "SY", &["syrian arab republic"]),
    entry("Tunisia", "TN", &[]),
    entry(
        "United Arab Emirates",
        "AE",
        &["uae", "u.a.e.", "u.a.e", "emirates", "the emirates"],
    ),
    entry("Yemen", "YE", &[]),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown country {0:?}: not one of the 22 Arab League states")]
pub struct UnknownCountry(pub String);

/// A country name resolved against [`ARAB_COUNTRIES`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountryTag {
    pub name: String,
    pub code: String,
}

impl CountryTag {
    /// Resolves an English name (or a known alias) case-insensitively.
    pub fn from_name(raw: &str) -> Result<Self, UnknownCountry> {
        let key = raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let key = key.strip_prefix("the ").unwrap_or(&key);
        ARAB_COUNTRIES
            .iter()
            .find(|c| c.name.to_lowercase() == key || c.aliases.contains(&key))
            .map(|c| Self {
                name: c.name.to_string(),
                code: c.code.to_string(),
            })
            .ok_or_else(|| UnknownCountry(raw.to_string()))
    }

    pub fn from_code(code: &str) -> Option<Self> {
        ARAB_COUNTRIES
            .iter()
            .find(|c| c.code.eq_ignore_ascii_case(code.trim()))
            .map(|c| Self {
                name: c.name.to_string(),
                code: c.code.to_string(),
            })
    }
}
