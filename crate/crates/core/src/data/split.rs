/// A sentence as a half-open character range into its paragraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Rule-based splitter: a sentence ends after `.`, `?` or `!` when followed by
/// whitespace and then an uppercase letter or a digit. Offsets count Unicode
/// scalar values, like SQuAD's `answer_start`. Abbreviations followed by a
/// capitalized word ("Dr. Who") are split too; that is a known limitation.
pub fn split_sentences(paragraph: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = paragraph.chars().collect();
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i], '.' | '?' | '!')
            && chars.get(i + 1).is_some_and(|c| c.is_whitespace())
        {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            if j < chars.len() && (chars[j].is_uppercase() || chars[j].is_ascii_digit()) {
                cuts.push(i + 1);
            }
        }
        i += 1;
    }
    cuts.push(chars.len());

    let mut spans = Vec::new();
    let mut from = 0;
    for cut in cuts {
        let mut s = from;
        let mut e = cut;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            spans.push(SentenceSpan {
                start: s,
                end: e,
                text: chars[s..e].iter().collect(),
            });
        }
        from = cut;
    }
    spans
}
