//! Deterministic parser for the controlled route-instruction language.
//!
//! ```text
//! instruction := start-verb place link place move* "."?
//! link        := "to" | "and"? proceed-verb
//! move        := connector* turn-phrase? connector* proceed-verb place
//! turn-phrase := ("turn" | "swing" | "bear" | "guide yourself")
//!                ("left" | "right" | "around") "there"? "and"?
//! ```
//!
//! Places are `"quoted"`, ``` ``quoted'' ```, `“quoted”`, or a run of plain
//! words that stops at the first reserved word. A leading "the" is dropped.
//! Keywords are case-insensitive; punctuation between clauses is ignored.

use thiserror::Error;

use crate::action::Action;
use crate::canonical::{CanonicalPath, NodeName, ValidationError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unrecognized text at byte {offset}: {found:?}")]
    Unrecognized { offset: usize, found: String },
    #[error("instruction must begin with a departure clause (byte {offset})")]
    MissingStart { offset: usize },
    #[error("expected a place name at byte {offset}")]
    ExpectedPlace { offset: usize },
    #[error("unterminated quote starting at byte {offset}")]
    UnterminatedQuote { offset: usize },
    #[error("turn at byte {offset} is not followed by a movement")]
    DanglingTurn { offset: usize },
    #[error("turn at byte {offset} comes before the first waypoint is left")]
    TurnAtStart { offset: usize },
    #[error("instruction names {0} place(s), at least 2 are required")]
    TooFewPlaces(usize),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word { text: String, lower: String },
    Quoted(String),
    Punct,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    start: usize,
    end: usize,
}

const PUNCT: &[char] = &['.', ',', ';', ':', '!', '?'];

/// Words that end an unquoted place name.
pub(crate) const RESERVED: &[&str] = &[
    "to", "and", "then", "from", "there", "continue", "turn", "swing", "bear", "guide", "proceed",
    "advance", "go", "head", "walk", "move", "towards", "toward", "depart", "begin", "commence",
    "start",
];

const START_VERBS: &[&[&str]] = &[
    &["depart", "from"],
    &["begin", "in"],
    &["begin", "at"],
    &["commence", "on"],
    &["commence", "at"],
    &["start", "at"],
    &["start", "from"],
    &["start", "in"],
];

const PROCEED_VERBS: &[&[&str]] = &[
    &["proceed", "to"],
    &["proceed", "straight", "to"],
    &["continue", "on", "to"],
    &["continue", "straight", "to"],
    &["continue", "to"],
    &["advance", "further", "to"],
    &["advance", "to"],
    &["go", "straight", "to"],
    &["go", "to"],
    &["head", "straight", "to"],
    &["head", "to"],
    &["walk", "straight", "to"],
    &["walk", "to"],
    &["move", "through"],
    &["move", "to"],
    &["towards"],
    &["toward"],
];

const CONNECTORS: &[&[&str]] = &[
    &["from", "there"],
    &["continue", "on"],
    &["and", "then"],
    &["then"],
    &["and"],
];

const TURN_VERBS: &[&[&str]] = &[&["guide", "yourself"], &["turn"], &["swing"], &["bear"]];

fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if PUNCT.contains(&c) {
            chars.next();
            out.push(Spanned { tok: Tok::Punct, start: i, end: i + c.len_utf8() });
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            let mut closed = None;
            while let Some((j, d)) = chars.next() {
                match d {
                    '\\' => match chars.next() {
                        Some((_, e)) => s.push(e),
                        None => break,
                    },
                    '"' => {
                        closed = Some(j + 1);
                        break;
                    }
                    _ => s.push(d),
                }
            }
            let end = closed.ok_or(ParseError::UnterminatedQuote { offset: i })?;
            out.push(Spanned { tok: Tok::Quoted(s), start: i, end });
        } else if c == '\u{201c}' || text[i..].starts_with("``") {
            let (open_len, close) = if c == '`' { (2, "''") } else { (c.len_utf8(), "\u{201d}") };
            let body_start = i + open_len;
            let rel = text[body_start..]
                .find(close)
                .ok_or(ParseError::UnterminatedQuote { offset: i })?;
            let end = body_start + rel + close.len();
            out.push(Spanned {
                tok: Tok::Quoted(text[body_start..body_start + rel].to_string()),
                start: i,
                end,
            });
            while chars.peek().is_some_and(|&(j, _)| j < end) {
                chars.next();
            }
        } else {
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_whitespace() || PUNCT.contains(&d) || d == '"' || d == '\u{201c}' {
                    break;
                }
                if d == '`' && text[j..].starts_with("``") {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            let word = &text[i..end];
            out.push(Spanned {
                tok: Tok::Word { text: word.to_string(), lower: word.to_lowercase() },
                start: i,
                end,
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser<'_> {
    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.text.len(), |t| t.start)
    }

    fn word_at(&self, i: usize) -> Option<&str> {
        match &self.toks.get(i)?.tok {
            Tok::Word { lower, .. } => Some(lower),
            _ => None,
        }
    }

    /// Longest phrase from `table` starting at the cursor; consumes it.
    fn phrase(&mut self, table: &[&[&str]]) -> bool {
        let best = table
            .iter()
            .filter(|p| p.iter().enumerate().all(|(k, w)| self.word_at(self.pos + k) == Some(w)))
            .map(|p| p.len())
            .max();
        match best {
            Some(len) => {
                self.pos += len;
                true
            }
            None => false,
        }
    }

    fn word(&mut self, w: &str) -> bool {
        if self.word_at(self.pos) == Some(w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn skip_punct(&mut self) {
        while matches!(self.toks.get(self.pos), Some(Spanned { tok: Tok::Punct, .. })) {
            self.pos += 1;
        }
    }

    fn place(&mut self) -> Result<NodeName, ParseError> {
        let offset = self.offset();
        let article = self.word_at(self.pos) == Some("the")
            && self.toks.get(self.pos + 1).is_some_and(|t| match &t.tok {
                Tok::Quoted(_) => true,
                Tok::Word { lower, .. } => !RESERVED.contains(&lower.as_str()),
                Tok::Punct => false,
            });
        if article {
            self.pos += 1;
        }
        if let Some(Spanned { tok: Tok::Quoted(s), start, .. }) = self.toks.get(self.pos) {
            let start = *start;
            let name = NodeName::new(s).map_err(|_| ParseError::ExpectedPlace { offset: start })?;
            self.pos += 1;
            return Ok(name);
        }
        let mut words = Vec::new();
        while let Some(Spanned { tok: Tok::Word { text, lower }, .. }) = self.toks.get(self.pos) {
            if RESERVED.contains(&lower.as_str()) {
                break;
            }
            words.push(text.clone());
            self.pos += 1;
        }
        if words.is_empty() {
            return Err(ParseError::ExpectedPlace { offset });
        }
        NodeName::new(&words.join(" ")).map_err(|_| ParseError::ExpectedPlace { offset })
    }

    fn turn(&mut self) -> Option<Action> {
        let save = self.pos;
        if !self.phrase(TURN_VERBS) {
            return None;
        }
        let action = if self.word("left") {
            Action::TurnLeft
        } else if self.word("right") {
            Action::TurnRight
        } else if self.word("around") {
            Action::TurnAround
        } else {
            self.pos = save;
            return None;
        };
        self.word("there");
        Some(action)
    }

    fn unrecognized(&self) -> ParseError {
        let offset = self.offset();
        let rest = &self.toks[self.pos..];
        let end = rest[..rest.len().min(4)].last().map_or(offset, |t| t.end);
        ParseError::Unrecognized {
            offset,
            found: self.text[offset..end].to_string(),
        }
    }
}

/// Parses one instruction into a canonical path.
pub fn parse_instruction(text: &str) -> Result<CanonicalPath, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { text, toks, pos: 0 };
    if !p.phrase(START_VERBS) {
        return Err(ParseError::MissingStart { offset: p.offset() });
    }
    let mut waypoints = vec![p.place()?];
    let mut actions = Vec::new();
    let mut pending: Option<(Action, usize)> = None;
    loop {
        p.skip_punct();
        if p.pos >= p.toks.len() {
            break;
        }
        let offset = p.offset();
        let first_leg = waypoints.len() == 1;
        if p.phrase(PROCEED_VERBS) || (first_leg && pending.is_none() && p.word("to")) {
            let place = p.place()?;
            if !first_leg {
                actions.push(pending.take().map_or(Action::Forward, |(a, _)| a));
            }
            waypoints.push(place);
        } else if let Some(action) = p.turn() {
            if first_leg {
                return Err(ParseError::TurnAtStart { offset });
            }
            if pending.is_some() {
                return Err(p.unrecognized_at(offset));
            }
            pending = Some((action, offset));
        } else if !p.phrase(CONNECTORS) {
            return Err(p.unrecognized());
        }
    }
    if let Some((_, offset)) = pending {
        return Err(ParseError::DanglingTurn { offset });
    }
    if waypoints.len() < 2 {
        return Err(ParseError::TooFewPlaces(waypoints.len()));
    }
    Ok(CanonicalPath::new(waypoints, actions)?)
}

impl Parser<'_> {
    fn unrecognized_at(&mut self, offset: usize) -> ParseError {
        while self.pos > 0 && self.toks[self.pos - 1].start >= offset {
            self.pos -= 1;
        }
        self.unrecognized()
    }
}

/// True if `name` reads back unchanged without quotes.
pub(crate) fn is_bare_safe(name: &str) -> bool {
    let words: Vec<&str> = name.split(' ').collect();
    words.iter().all(|w| {
        !w.is_empty()
            && w.chars().all(|c| c.is_alphanumeric() || "_-'".contains(c))
            && !RESERVED.contains(&w.to_lowercase().as_str())
    }) && !words[0].eq_ignore_ascii_case("the")
}
