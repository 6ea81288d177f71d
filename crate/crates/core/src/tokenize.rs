//! Sentence segmentation and (1,2)-gram term extraction.

use std::collections::hash_map;
use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead};
use std::path::Path;

use crate::model::Article;

/// Multiset of normalized terms (unigrams and bigrams).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TermCounts(HashMap<String, u32>);

impl TermCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, term: &str) -> u32 {
        self.0.get(term).copied().unwrap_or(0)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains_key(term)
    }

    pub fn add(&mut self, term: impl Into<String>, count: u32) {
        if count > 0 {
            *self.0.entry(term.into()).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: &TermCounts) {
        for (term, &count) in &other.0 {
            match self.0.get_mut(term.as_str()) {
                Some(c) => *c += count,
                None => {
                    self.0.insert(term.clone(), count);
                }
            }
        }
    }

    /// Subtracts `other`, dropping terms whose count reaches zero.
    pub fn subtract(&mut self, other: &TermCounts) {
        for (term, &count) in &other.0 {
            if let Some(c) = self.0.get_mut(term.as_str()) {
                *c = c.saturating_sub(count);
                if *c == 0 {
                    self.0.remove(term.as_str());
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&c| u64::from(c)).sum()
    }

    /// Unordered iteration; use [`TermCounts::sorted`] where order matters.
    pub fn iter(&self) -> hash_map::Iter<'_, String, u32> {
        self.0.iter()
    }

    pub fn terms(&self) -> hash_map::Keys<'_, String, u32> {
        self.0.keys()
    }

    pub fn sorted(&self) -> Vec<(&str, u32)> {
        let mut out: Vec<_> = self.0.iter().map(|(t, &c)| (t.as_str(), c)).collect();
        out.sort_unstable_by(|a, b| a.0.cmp(b.0));
        out
    }
}

impl<S: Into<String>> FromIterator<(S, u32)> for TermCounts {
    fn from_iter<I: IntoIterator<Item = (S, u32)>>(iter: I) -> Self {
        let mut out = TermCounts::new();
        for (term, count) in iter {
            out.add(term, count);
        }
        out
    }
}

const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "ain", "all", "am", "an", "and", "any",
    "are", "aren", "aren't", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "couldn", "couldn't", "d", "did", "didn", "didn't",
    "do", "does", "doesn", "doesn't", "doing", "don", "don't", "down", "during", "each", "few",
    "for", "from", "further", "had", "hadn", "hadn't", "has", "hasn", "hasn't", "have", "haven",
    "haven't", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "i", "if", "in", "into", "is", "isn", "isn't", "it", "it's", "its", "itself", "just", "ll",
    "m", "ma", "me", "mightn", "mightn't", "more", "most", "mustn", "mustn't", "my", "myself",
    "needn", "needn't", "no", "nor", "not", "now", "o", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "ourselves", "out", "over", "own", "re", "s", "said", "same", "says",
    "shan", "shan't", "she", "she's", "should", "should've", "shouldn", "shouldn't", "so", "some",
    "such", "t", "than", "that", "that'll", "the", "their", "theirs", "them", "themselves",
    "then", "there", "these", "they", "this", "those", "through", "to", "too", "under", "until",
    "up", "ve", "very", "was", "wasn", "wasn't", "we", "were", "weren", "weren't", "what", "when",
    "where", "which", "while", "who", "whom", "why", "will", "with", "won", "won't", "would",
    "wouldn", "wouldn't", "y", "you", "you'd", "you'll", "you're", "you've", "your", "yours",
    "yourself", "yourselves", "also", "could", "may", "might", "must", "one", "two",
];

/// Lowercase stopword set applied to unigrams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

impl Stopwords {
    pub fn english() -> Self {
        Self(ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect())
    }

    pub fn empty() -> Self {
        Self(HashSet::new())
    }

    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            terms
                .into_iter()
                .map(|t| t.as_ref().trim().to_lowercase())
                .filter(|t| !t.is_empty())
                .collect(),
        )
    }

    /// One term per line, UTF-8. Blank lines are ignored.
    pub fn from_file(path: &Path) -> io::Result<Self> {
        let file = std::fs::File::open(path)?;
        let lines = io::BufReader::new(file).lines().collect::<io::Result<Vec<_>>>()?;
        Ok(Self::from_terms(lines))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

const ABBREVIATIONS: &[&str] = &[
    "U.S.", "U.K.", "U.N.", "E.U.", "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Sr.", "Jr.", "St.",
    "Mt.", "Gen.", "Gov.", "Sen.", "Rep.", "Lt.", "Col.", "Capt.", "Sgt.", "Inc.", "Ltd.", "Co.",
    "Corp.", "vs.", "etc.", "e.g.", "i.e.", "No.", "Jan.", "Feb.", "Mar.", "Apr.", "Aug.", "Sept.",
    "Sep.", "Oct.", "Nov.", "Dec.",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’')
}

fn is_opening(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '“' | '‘')
}

/// The whitespace-delimited word ending at byte offset `end` (exclusive).
fn word_before(text: &str, end: usize) -> &str {
    let start = text[..end]
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    &text[start..end]
}

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(is_opening);
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    // Single-letter initials such as "J." in "J. Smith".
    let mut chars = word.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_uppercase())
}

/// Splits on `.`, `!` or `?` followed by whitespace and an uppercase letter
/// or digit, except after known abbreviations and initials.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        // Extend over a run of terminals and closing quotes/brackets.
        let mut j = i + 1;
        while j < chars.len() && (is_terminal(chars[j].1) || is_closing(chars[j].1)) {
            j += 1;
        }
        let end = chars.get(j).map(|&(p, _)| p).unwrap_or(text.len());
        let mut k = j;
        let mut saw_space = false;
        while k < chars.len() && chars[k].1.is_whitespace() {
            saw_space = true;
            k += 1;
        }
        while k < chars.len() && is_opening(chars[k].1) {
            k += 1;
        }
        let next_starts_sentence = chars
            .get(k)
            .is_some_and(|&(_, n)| n.is_uppercase() || n.is_ascii_digit());
        let abbreviation = c == '.' && is_abbreviation(word_before(text, pos + c.len_utf8()));
        if saw_space && next_starts_sentence && !abbreviation {
            push_fragment(&mut sentences, &text[start..end]);
            start = end;
        }
        i = j;
    }
    push_fragment(&mut sentences, &text[start..]);
    sentences
}

fn push_fragment(out: &mut Vec<String>, fragment: &str) {
    let trimmed = fragment.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
}

/// Lowercased word tokens. Tokens are runs of alphanumerics and apostrophes;
/// a hyphen is kept only between two alphanumerics.
pub fn tokens(sentence: &str) -> Vec<String> {
    let chars: Vec<char> = sentence.chars().collect();
    let mut out = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let interior = |ch: char| {
            !current.is_empty()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
                && (ch == '-' || ch == '\'' || ch == '’')
        };
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if interior(c) {
            current.push(if c == '’' { '\'' } else { c });
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Non-stopword unigram tokens, in sentence order.
pub fn content_tokens(sentence: &str, stopwords: &Stopwords) -> Vec<String> {
    tokens(sentence)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Unigrams that survive stopword removal plus bigrams over pairs of
/// adjacent tokens that both survive. Bigrams never span a removed stopword.
pub fn extract_terms(sentence: &str, stopwords: &Stopwords) -> TermCounts {
    let toks = tokens(sentence);
    let survivors: Vec<Option<&str>> = toks
        .iter()
        .map(|t| (!stopwords.contains(t)).then_some(t.as_str()))
        .collect();
    let mut counts = TermCounts::new();
    for tok in survivors.iter().flatten() {
        counts.add(*tok, 1);
    }
    for pair in survivors.windows(2) {
        if let [Some(a), Some(b)] = pair {
            counts.add(format!("{a} {b}"), 1);
        }
    }
    counts
}

pub fn article_term_counts(article: &Article) -> TermCounts {
    let mut total = TermCounts::new();
    for sentence in &article.sentence_terms {
        total.merge(sentence);
    }
    total
}
