//! Text normalization shared by option-distinctness checks.

use unicode_normalization::UnicodeNormalization;

/// NFC-normalizes, trims, and collapses internal whitespace runs to a single
/// ASCII space.
pub fn normalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True when the two strings are equal after [`normalize`].
pub fn same_text(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}

/// True when `text` is empty after trimming.
pub fn is_blank(text: &str) -> bool {
    text.trim().is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace() {
        assert_eq!(normalize("  الدوحة \t  قطر\n"), "الدوحة قطر");
    }

    #[test]
    fn composes_to_nfc() {
        // "é" as e + combining acute vs precomposed
        assert!(same_text("e\u{301}", "\u{e9}"));
    }

    #[test]
    fn blank_detection() {
        assert!(is_blank(" \n\t"));
        assert!(!is_blank(" س "));
    }
}
