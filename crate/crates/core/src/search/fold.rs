//! The character key used for trigrams.
//!
//! Text is lower-cased one code point at a time. Characters that the regex
//! engine treats as case-insensitively equal (for example `K`, `k` and the
//! Kelvin sign) share one key, so a case-insensitive match always shares
//! trigrams with its pattern literal. Mapping is per code point, never
//! context-sensitive, so a substring's keys are a substring of the text's keys.

use std::cell::RefCell;
use std::collections::HashMap;

use regex_syntax::hir::{ClassUnicode, ClassUnicodeRange};

thread_local! {
    static CACHE: RefCell<HashMap<char, char>> = RefCell::new(HashMap::new());
}

pub fn fold_key(c: char) -> char {
    if c.is_ascii() {
        // 'k' and 's' have non-ASCII fold partners, but those map back to
        // 'k' and 's' below, so plain ASCII lowering agrees.
        return c.to_ascii_lowercase();
    }
    CACHE.with(|cache| *cache.borrow_mut().entry(c).or_insert_with(|| compute(c)))
}

fn lower(c: char) -> char {
    let mut it = c.to_lowercase();
    match (it.next(), it.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

fn compute(c: char) -> char {
    let mut class = ClassUnicode::new([ClassUnicodeRange::new(c, c)]);
    class.case_fold_simple();
    class
        .iter()
        .flat_map(|r| r.start()..=r.end())
        .map(lower)
        .min()
        .unwrap_or(c)
}

/// Keys of every code point in `text`.
pub fn fold_keys(text: &str) -> Vec<char> {
    text.chars().map(fold_key).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_lowercases() {
        assert_eq!(fold_keys("AbC"), vec!['a', 'b', 'c']);
    }

    #[test]
    fn fold_partners_share_a_key() {
        assert_eq!(fold_key('\u{212A}'), 'k'); // Kelvin sign
        assert_eq!(fold_key('\u{017F}'), 's'); // long s
        assert_eq!(fold_key('Σ'), fold_key('σ'));
        assert_eq!(fold_key('ς'), fold_key('σ'));
        assert_eq!(fold_key('É'), 'é');
    }

    #[test]
    fn ascii_path_agrees_with_full_fold() {
        for c in (0u8..128).map(char::from) {
            assert_eq!(fold_key(c), compute(c), "{c:?}");
        }
    }
}
