//! Country-stratified two-way splitting.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::model::{DatasetSplit, McqItem, QaPair, StratumKey};
use crate::seeding;

/// Stratum used for items without a country.
pub const UNKNOWN_STRATUM: &str = "unknown";

pub trait Stratified {
    fn id(&self) -> &str;
    fn country(&self) -> Option<&str>;
}

impl Stratified for QaPair {
    fn id(&self) -> &str {
        &self.id
    }
    fn country(&self) -> Option<&str> {
        self.country.as_deref()
    }
}

impl Stratified for McqItem {
    fn id(&self) -> &str {
        &self.id
    }
    fn country(&self) -> Option<&str> {
        self.country.as_deref()
    }
}

impl Stratified for (String, Option<String>) {
    fn id(&self) -> &str {
        &self.0
    }
    fn country(&self) -> Option<&str> {
        self.1.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
}

/// Number of stratum items assigned to the first half.
pub fn first_half_size(n: usize, ratio: f64) -> usize {
    // Tolerance keeps e.g. 0.3 * 10 = 3.0000000000000004 from rounding up.
    ((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Items of each stratum that go to the first half: `floor(ratio * n)`, plus
/// one for the strata with the largest fractional parts until the overall
/// first half reaches `first_half_size(total, ratio)`. Ties are broken by a
/// seeded order over stratum names.
fn allocate(strata: &BTreeMap<&str, Vec<&str>>, ratio: f64, seed: u64) -> BTreeMap<String, usize> {
    let total: usize = strata.values().map(Vec::len).sum();
    let mut cuts: BTreeMap<String, usize> = BTreeMap::new();
    let mut order = Vec::new();
    for (name, ids) in strata {
        let exact = ratio * ids.len() as f64;
        let base = ((exact + 1e-9).floor() as usize).min(ids.len());
        cuts.insert(name.to_string(), base);
        let tie = seeding::derive_seed(seed, "split-order", name);
        order.push((exact - base as f64, tie, name.to_string(), ids.len()));
    }
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let assigned: usize = cuts.values().sum();
    let mut extra = first_half_size(total, ratio).saturating_sub(assigned);
    for (_, _, name, n) in order {
        if extra == 0 {
            break;
        }
        let cut = cuts.get_mut(&name).expect("stratum present");
        if *cut < n {
            *cut += 1;
            extra -= 1;
        }
    }
    cuts
}

/// Splits within each country stratum so every stratum is divided as evenly
/// as `ratio` allows and the first half holds `ceil(ratio * total)` items.
/// Strata are shuffled with a seed derived from `(seed, country)`. Both
/// halves are returned sorted by id.
pub fn stratified_split<T: Stratified>(
    items: &[T],
    ratio: f64,
    seed: u64,
) -> Result<DatasetSplit, SplitError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SplitError::InvalidRatio(ratio));
    }
    let mut seen = BTreeSet::new();
    let mut strata: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for item in items {
        if !seen.insert(item.id()) {
            return Err(SplitError::DuplicateId(item.id().to_string()));
        }
        let key = item.country().unwrap_or(UNKNOWN_STRATUM);
        strata.entry(key).or_default().push(item.id());
    }

    let cuts = allocate(&strata, ratio, seed);
    let mut half_a = Vec::new();
    let mut half_b = Vec::new();
    for (country, mut ids) in strata {
        ids.sort_unstable();
        ids.shuffle(&mut seeding::rng_for(seed, "split", country));
        let cut = cuts[country];
        half_a.extend(ids[..cut].iter().map(|s| s.to_string()));
        half_b.extend(ids[cut..].iter().map(|s| s.to_string()));
    }
    half_a.sort();
    half_b.sort();
    Ok(DatasetSplit {
        half_a,
        half_b,
        stratum_key: StratumKey::Country,
        seed,
    })
}
