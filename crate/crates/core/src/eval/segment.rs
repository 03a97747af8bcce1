/// Splits free-text responses into units at sentence punctuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmenter {
    pub delimiters: Vec<char>,
}

pub const DEFAULT_DELIMITERS: [char; 9] = ['.', ';', '!', '?', '。', '；', '！', '？', '、'];

impl Default for Segmenter {
    fn default() -> Self {
        Self {
            delimiters: DEFAULT_DELIMITERS.to_vec(),
        }
    }
}

impl Segmenter {
    pub fn new(delimiters: impl IntoIterator<Item = char>) -> Self {
        Self {
            delimiters: delimiters.into_iter().collect(),
        }
    }

    pub fn segment(&self, raw: &str) -> Vec<String> {
        raw.split(|c| self.delimiters.contains(&c))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    }
}

pub fn segment(raw: &str) -> Vec<String> {
    Segmenter::default().segment(raw)
}
