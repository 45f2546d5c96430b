//! The shared token inventory.
//!
//! Trajectory steps and utterance words live in one vocabulary: the four
//! command tokens double as gridworld actions, which is what makes tying the
//! encoder-input and decoder-output embeddings meaningful.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest temporal marker index (`m1`..`m5`).
pub const MAX_MARKER: u8 = 5;
/// Highest quantifier word (`1`..`3`).
pub const MAX_QUANTIFIER: u8 = 3;
/// Number of entries in the standard vocabulary.
pub const VOCAB_SIZE: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Left,
    Right,
    Up,
    Down,
}

impl Command {
    pub const ALL: [Command; 4] = [Command::Left, Command::Right, Command::Up, Command::Down];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Left => "left",
            Command::Right => "right",
            Command::Up => "up",
            Command::Down => "down",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One vocabulary entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Pad,
    Bos,
    Eos,
    Command(Command),
    /// Quantifier word, 1..=3.
    Quantity(u8),
    /// Temporal marker m_j, 1..=5.
    Marker(u8),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenError {
    #[error("unknown token {0:?}")]
    Unknown(String),
    #[error("token index {0} outside the vocabulary")]
    BadIndex(usize),
}

impl Token {
    pub fn index(self) -> usize {
        match self {
            Token::Pad => 0,
            Token::Bos => 1,
            Token::Eos => 2,
            Token::Command(c) => 3 + c.index(),
            Token::Quantity(q) => 6 + q as usize,
            Token::Marker(m) => 9 + m as usize,
        }
    }

    pub fn from_index(index: usize) -> Result<Token, TokenError> {
        Ok(match index {
            0 => Token::Pad,
            1 => Token::Bos,
            2 => Token::Eos,
            3..=6 => Token::Command(Command::ALL[index - 3]),
            7..=9 => Token::Quantity((index - 6) as u8),
            10..=14 => Token::Marker((index - 9) as u8),
            _ => return Err(TokenError::BadIndex(index)),
        })
    }

    /// Control tokens only exist inside the neural layer.
    pub fn is_control(self) -> bool {
        matches!(self, Token::Pad | Token::Bos | Token::Eos)
    }

    pub fn marker_index(self) -> Option<u8> {
        match self {
            Token::Marker(m) => Some(m),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Pad => f.write_str("<pad>"),
            Token::Bos => f.write_str("<bos>"),
            Token::Eos => f.write_str("<eos>"),
            Token::Command(c) => f.write_str(c.as_str()),
            Token::Quantity(q) => write!(f, "{q}"),
            Token::Marker(m) => write!(f, "m{m}"),
        }
    }
}

impl FromStr for Token {
    type Err = TokenError;

    /// Accepts the canonical lowercase spelling; `M1`-style markers are
    /// read as their lowercase equivalents.
    fn from_str(s: &str) -> Result<Token, TokenError> {
        let tok = match s {
            "<pad>" => Token::Pad,
            "<bos>" => Token::Bos,
            "<eos>" => Token::Eos,
            "left" => Token::Command(Command::Left),
            "right" => Token::Command(Command::Right),
            "up" => Token::Command(Command::Up),
            "down" => Token::Command(Command::Down),
            "1" => Token::Quantity(1),
            "2" => Token::Quantity(2),
            "3" => Token::Quantity(3),
            _ => {
                let rest = s
                    .strip_prefix('m')
                    .or_else(|| s.strip_prefix('M'))
                    .ok_or_else(|| TokenError::Unknown(s.to_string()))?;
                match rest.parse::<u8>() {
                    Ok(m) if (1..=MAX_MARKER).contains(&m) && rest.len() == 1 => Token::Marker(m),
                    _ => return Err(TokenError::Unknown(s.to_string())),
                }
            }
        };
        Ok(tok)
    }
}

/// Parses a space-separated token string.
pub fn parse_tokens(s: &str) -> Result<Vec<Token>, TokenError> {
    s.split_whitespace().map(str::parse).collect()
}

/// Joins tokens with single spaces.
pub fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.to_string());
    }
    out
}

/// Ordered token list with index maps, as recorded in checkpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
}

impl Vocabulary {
    pub fn standard() -> Self {
        let tokens = (0..VOCAB_SIZE)
            .map(|i| Token::from_index(i).expect("standard vocabulary is contiguous"))
            .collect();
        Vocabulary { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn index_of(&self, token: Token) -> usize {
        token.index()
    }

    pub fn token(&self, index: usize) -> Result<Token, TokenError> {
        self.tokens
            .get(index)
            .copied()
            .ok_or(TokenError::BadIndex(index))
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_covers_vocabulary() {
        for i in 0..VOCAB_SIZE {
            let t = Token::from_index(i).unwrap();
            assert_eq!(t.index(), i);
            assert_eq!(t.to_string().parse::<Token>().unwrap(), t);
        }
        assert!(Token::from_index(VOCAB_SIZE).is_err());
    }

    #[test]
    fn uppercase_markers_parse() {
        assert_eq!("M4".parse::<Token>().unwrap(), Token::Marker(4));
        assert!("m6".parse::<Token>().is_err());
        assert!("m10".parse::<Token>().is_err());
        assert!("4".parse::<Token>().is_err());
    }

    #[test]
    fn commands_are_shared_between_actions_and_words() {
        let v = Vocabulary::standard();
        assert_eq!(v.len(), 15);
        let cmds: Vec<_> = v
            .tokens()
            .iter()
            .filter(|t| matches!(t, Token::Command(_)))
            .collect();
        assert_eq!(cmds.len(), 4);
    }
}
