//! Object-name normalization and token matching.
//!
//! Model outputs and fixtures spell the same object several ways
//! ("water_bottle", "Water Bottle", "foam rollers" vs "foam roller").
//! Everything that resolves a name against an inventory goes through here.

/// Lowercases, maps `_`/`-` to spaces and collapses whitespace.
pub fn normalize_name(raw: &str) -> String {
    normalized_chars(raw).collect()
}

fn is_separator(c: char) -> bool {
    c.is_whitespace() || c == '_' || c == '-'
}

// Streams the characters of `normalize_name(raw)`.
struct Normalized<'a> {
    chars: std::str::Chars<'a>,
    started: bool,
    gap: bool,
    pending: Option<char>,
    lower: Option<std::char::ToLowercase>,
}

impl Iterator for Normalized<'_> {
    type Item = char;

    fn next(&mut self) -> Option<char> {
        loop {
            if let Some(l) = &mut self.lower {
                if let Some(c) = l.next() {
                    return Some(c);
                }
                self.lower = None;
            }
            let c = match self.pending.take() {
                Some(c) => c,
                None => self.chars.next()?,
            };
            if is_separator(c) {
                self.gap = self.started;
                continue;
            }
            if self.gap {
                self.gap = false;
                self.pending = Some(c);
                return Some(' ');
            }
            self.started = true;
            if c.is_ascii() {
                return Some(c.to_ascii_lowercase());
            }
            self.lower = Some(c.to_lowercase());
        }
    }
}

fn normalized_chars(raw: &str) -> Normalized<'_> {
    Normalized {
        chars: raw.chars(),
        started: false,
        gap: false,
        pending: None,
        lower: None,
    }
}

/// `normalize_name(a) == normalize_name(b)` without allocating.
pub fn same_name(a: &str, b: &str) -> bool {
    a == b || normalized_chars(a).eq(normalized_chars(b))
}

/// Content tokens of a name: alphanumeric runs, possessive `'s` dropped,
/// crude plural folding so "books" and "book" compare equal.
pub fn name_tokens(raw: &str) -> Vec<String> {
    let lower = raw.to_lowercase();
    lower
        .split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '\u{2019}'))
        .filter_map(|tok| {
            let tok = tok.trim_matches(|c| c == '\'' || c == '\u{2019}');
            let tok = tok
                .strip_suffix("'s")
                .or_else(|| tok.strip_suffix("\u{2019}s"))
                .unwrap_or(tok);
            if tok.is_empty() {
                None
            } else {
                Some(singular(tok))
            }
        })
        .collect()
}

fn singular(tok: &str) -> String {
    if tok.len() > 4 {
        if let Some(stem) = tok.strip_suffix("ies") {
            return format!("{stem}y");
        }
    }
    if tok.len() > 3 && tok.ends_with('s') && !tok.ends_with("ss") {
        return tok[..tok.len() - 1].to_string();
    }
    tok.to_string()
}

/// True when every token of `needle` occurs in `haystack`.
pub fn tokens_subset(needle: &[String], haystack: &[String]) -> bool {
    !needle.is_empty() && needle.iter().all(|t| haystack.contains(t))
}

/// Two names match by token containment in either direction.
pub fn token_match(a: &str, b: &str) -> bool {
    let ta = name_tokens(a);
    let tb = name_tokens(b);
    tokens_subset(&ta, &tb) || tokens_subset(&tb, &ta)
}

/// True when all tokens of `name` appear in `text`.
pub fn mentions(text: &str, name: &str) -> bool {
    tokens_subset(&name_tokens(name), &name_tokens(text))
}
