//! Rule-based sentence segmentation.
//!
//! A boundary is placed after `.`, `?` or `!` when the terminator is followed by
//! whitespace and then an uppercase letter, a digit, or an opening quote or
//! bracket. A period whose preceding word(s) match [`ABBREVIATION_GUARDS`]
//! (case-insensitive) never ends a sentence.

use serde::{Deserialize, Serialize};

/// Abbreviations that suppress a boundary after their trailing period.
pub const ABBREVIATION_GUARDS: &[&str] = &["et al", "e.g", "i.e", "fig", "dr", "vs", "approx", "no"];

/// Half-open range of Unicode scalar offsets `[start_char, end_char)` into a source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start_char: usize,
    pub end_char: usize,
}

impl SentenceSpan {
    pub fn len(&self) -> usize {
        self.end_char - self.start_char
    }

    pub fn is_empty(&self) -> bool {
        self.start_char == self.end_char
    }

    /// Borrow the covered text. Offsets are in chars, not bytes.
    pub fn slice<'a>(&self, source: &'a str) -> &'a str {
        let start = char_to_byte(source, self.start_char);
        let end = char_to_byte(source, self.end_char);
        &source[start..end]
    }
}

fn char_to_byte(s: &str, char_idx: usize) -> usize {
    s.char_indices()
        .nth(char_idx)
        .map(|(b, _)| b)
        .unwrap_or(s.len())
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '{' | '\u{201C}' | '\u{2018}' | '\u{00AB}')
}

fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_numeric() || is_opener(c)
}

/// True when the words right before the period at `dot` match a guard entry.
fn guarded(chars: &[char], dot: usize) -> bool {
    // Collect up to two whitespace-separated words ending at `dot`.
    let mut words: Vec<String> = Vec::with_capacity(2);
    let mut end = dot;
    while words.len() < 2 {
        let mut start = end;
        while start > 0 && !chars[start - 1].is_whitespace() {
            start -= 1;
        }
        if start == end {
            break;
        }
        let word: String = chars[start..end]
            .iter()
            .collect::<String>()
            .trim_start_matches(is_opener)
            .to_lowercase();
        words.insert(0, word);
        end = start;
        while end > 0 && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        if end == 0 {
            break;
        }
    }
    let Some(last) = words.last() else {
        return false;
    };
    ABBREVIATION_GUARDS.iter().any(|guard| {
        let parts: Vec<&str> = guard.split(' ').collect();
        match parts.as_slice() {
            [single] => last == single,
            [first, second] => {
                words.len() == 2 && words[0] == *first && words[1] == *second
            }
            _ => false,
        }
    })
}

/// Split `text` into sorted, non-overlapping sentence spans covering all
/// non-whitespace content. Whitespace-only input yields no spans.
pub fn segment_sentences(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;

    let mut i = 0;
    while i < n {
        let c = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(i);
        }
        if matches!(c, '.' | '?' | '!') && i + 1 < n && chars[i + 1].is_whitespace() {
            let mut j = i + 1;
            while j < n && chars[j].is_whitespace() {
                j += 1;
            }
            if j < n && starts_sentence(chars[j]) && !(c == '.' && guarded(&chars, i)) {
                spans.push(SentenceSpan {
                    start_char: start.take().unwrap(),
                    end_char: i + 1,
                });
                i = j;
                continue;
            }
        }
        i += 1;
    }

    if let Some(s) = start {
        let mut end = n;
        while end > s && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        spans.push(SentenceSpan {
            start_char: s,
            end_char: end,
        });
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(s: &str) -> Vec<&str> {
        segment_sentences(s).iter().map(|sp| sp.slice(s)).collect()
    }

    #[test]
    fn two_plain_sentences() {
        assert_eq!(texts("A result. Another result."), vec!["A result.", "Another result."]);
    }

    #[test]
    fn et_al_does_not_split() {
        assert_eq!(segment_sentences("See Smith et al. 2020 for details.").len(), 1);
    }

    #[test]
    fn empty_and_blank() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences(" \n\t ").is_empty());
    }

    #[test]
    fn guards_and_lowercase_continuation() {
        assert_eq!(segment_sentences("As shown in Fig. 3 the rate rose.").len(), 1);
        assert_eq!(segment_sentences("Compare e.g. Alpha and i.e. Beta.").len(), 1);
        assert_eq!(segment_sentences("Patient no. 4 recovered.").len(), 1);
        assert_eq!(segment_sentences("It was 3.5 mg. then more.").len(), 1);
    }

    #[test]
    fn question_exclamation_and_openers() {
        assert_eq!(
            texts("Why? Because! (Really) true. \"Yes.\" 42 cases."),
            vec!["Why?", "Because!", "(Really) true.", "\"Yes.\" 42 cases."]
        );
    }

    #[test]
    fn offsets_are_chars() {
        let s = "Über alles. Ångström units.";
        let spans = segment_sentences(s);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[1].slice(s), "Ångström units.");
        assert_eq!(spans[1].start_char, 12);
    }

    #[test]
    fn newline_separated_fields() {
        assert_eq!(texts("Title here\nAbstract text. More"), vec!["Title here\nAbstract text.", "More"]);
    }

    proptest! {
        #[test]
        fn spans_reconstruct_non_whitespace(s in "[A-Za-z0-9 .?!\n\"()]{0,80}") {
            let spans = segment_sentences(&s);
            let joined: String = spans.iter().map(|sp| sp.slice(&s)).collect::<String>()
                .chars().filter(|c| !c.is_whitespace()).collect();
            let expected: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined, expected);
            let n = s.chars().count();
            for w in spans.windows(2) {
                prop_assert!(w[0].end_char <= w[1].start_char);
            }
            for sp in &spans {
                prop_assert!(sp.start_char < sp.end_char && sp.end_char <= n);
            }
        }
    }
}
