use unicode_segmentation::UnicodeSegmentation;

use super::Segmentation;

/// True when every scalar of the grapheme is whitespace (covers "\r\n").
pub fn is_whitespace_grapheme(g: &str) -> bool {
    !g.is_empty() && g.chars().all(char::is_whitespace)
}

/// Split `text` into layout tokens.
///
/// `CharLevel` yields one token per extended grapheme cluster. Leading and
/// trailing whitespace is dropped and every interior whitespace run becomes a
/// single `" "` token. `WordLevel` yields the maximal non-whitespace runs.
pub fn segment(text: &str, mode: Segmentation) -> Vec<String> {
    match mode {
        Segmentation::CharLevel => char_tokens(text),
        Segmentation::WordLevel => text.split_whitespace().map(str::to_owned).collect(),
    }
}

fn char_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut pending_space = false;
    for g in text.graphemes(true) {
        if is_whitespace_grapheme(g) {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(" ".to_owned());
            pending_space = false;
        }
        out.push(g.to_owned());
    }
    out
}

/// Number of grapheme clusters in `word`.
pub fn grapheme_count(word: &str) -> usize {
    word.graphemes(true).count()
}
