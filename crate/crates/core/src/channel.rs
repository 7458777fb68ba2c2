use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Color plane of a behavior image and the ngram orders it carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// 4-grams.
    Red,
    /// 3-grams.
    Green,
    /// 1-grams and 2-grams pooled.
    Blue,
}

impl Channel {
    /// Stacking order of the planes in an image.
    pub const ALL: [Channel; 3] = [Channel::Red, Channel::Green, Channel::Blue];

    /// Ngram orders pooled into this channel, in tie-break precedence.
    pub fn orders(self) -> &'static [usize] {
        match self {
            Channel::Red => &[4],
            Channel::Green => &[3],
            Channel::Blue => &[1, 2],
        }
    }

    pub fn for_order(n: usize) -> Option<Channel> {
        match n {
            1 | 2 => Some(Channel::Blue),
            3 => Some(Channel::Green),
            4 => Some(Channel::Red),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Channel::Red => 0,
            Channel::Green => 1,
            Channel::Blue => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Red => "red",
            Channel::Green => "green",
            Channel::Blue => "blue",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "r" | "red" => Ok(Channel::Red),
            "g" | "green" => Ok(Channel::Green),
            "b" | "blue" => Ok(Channel::Blue),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

/// Number of words in an ngram token.
pub fn ngram_order(token: &str) -> usize {
    token.split(' ').count()
}
