//! Token counting for the prompt-length guard.

use unicode_segmentation::UnicodeSegmentation;

/// Counts tokens in a fully rendered prompt. Implement this to plug in an
/// exact tokenizer.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;

    fn name(&self) -> &str;
}

/// Approximation: Unicode word count times 1.3, rounded up.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxTokenCounter;

impl TokenCounter for ApproxTokenCounter {
    fn count(&self, text: &str) -> usize {
        let words = text.unicode_words().count();
        // ceil(words * 13 / 10) in integers
        (words * 13).div_ceil(10)
    }

    fn name(&self) -> &str {
        "approx-words-x1.3"
    }
}
