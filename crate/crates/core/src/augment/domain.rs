use std::collections::BTreeSet;

use crate::model::QaPair;

fn clean_host(host: &str) -> String {
    host.trim().trim_end_matches('.').to_ascii_lowercase()
}

/// Exact or parent-domain match: `visit.gov.qa` is allowed by `gov.qa`.
pub fn host_allowed(host: &str, allowlist: &BTreeSet<String>) -> bool {
    let host = clean_host(host);
    allowlist.iter().any(|entry| {
        let entry = clean_host(entry.trim_start_matches("*."));
        !entry.is_empty()
            && (host == entry
                || host
                    .strip_suffix(entry.as_str())
                    .is_some_and(|prefix| prefix.ends_with('.')))
    })
}

/// Keeps an item only if its source host is allowlisted. Without an
/// allowlist everything passes; with one, items lacking a usable source URL
/// are dropped.
pub fn filter_by_domain(qa: &QaPair, allowlist: Option<&BTreeSet<String>>) -> bool {
    let Some(allowlist) = allowlist else {
        return true;
    };
    qa.source_url
        .as_deref()
        .and_then(|u| url::Url::parse(u).ok())
        .and_then(|u| u.host_str().map(str::to_string))
        .is_some_and(|host| host_allowed(&host, allowlist))
}
