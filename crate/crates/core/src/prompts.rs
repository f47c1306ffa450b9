//! Text-to-image prompts: a prefix followed immediately by the category name.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptScheme {
    None,
    A,
    One,
    A5,
    One5,
    Real,
    Adj,
}

const NONE: &[&str] = &[""];
const A: &[&str] = &["a "];
const ONE: &[&str] = &["one "];
const A5: &[&str] = &["a ", "a photo of ", "a photo of a ", "a picture of ", "a picture of a "];
const ONE5: &[&str] = &[
    "one ",
    "a photo of one ",
    "a picture of one ",
    "one photo of ",
    "one picture of ",
];
const REAL: &[&str] = &[
    "real ",
    "a real ",
    "one real ",
    "a photo of a real ",
    "a photo of one real ",
];
const ADJ: &[&str] = &[
    "a photo of a good ",
    "a photo of a large ",
    "a photo of a nice ",
    "a photo of a cool ",
    "a photo of a clean ",
];

impl PromptScheme {
    pub const ALL: [PromptScheme; 7] = [
        PromptScheme::None,
        PromptScheme::A,
        PromptScheme::One,
        PromptScheme::A5,
        PromptScheme::One5,
        PromptScheme::Real,
        PromptScheme::Adj,
    ];

    pub fn prefixes(self) -> &'static [&'static str] {
        match self {
            PromptScheme::None => NONE,
            PromptScheme::A => A,
            PromptScheme::One => ONE,
            PromptScheme::A5 => A5,
            PromptScheme::One5 => ONE5,
            PromptScheme::Real => REAL,
            PromptScheme::Adj => ADJ,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PromptScheme::None => "none",
            PromptScheme::A => "a",
            PromptScheme::One => "one",
            PromptScheme::A5 => "a5",
            PromptScheme::One5 => "one5",
            PromptScheme::Real => "real",
            PromptScheme::Adj => "adj",
        }
    }

    /// Recovers the category from a prompt of this scheme, preferring the
    /// longest matching prefix.
    pub fn parse(self, prompt: &str) -> Option<&str> {
        self.prefixes()
            .iter()
            .filter(|p| prompt.starts_with(**p))
            .max_by_key(|p| p.len())
            .map(|p| &prompt[p.len()..])
            .filter(|c| !c.is_empty())
    }
}

impl fmt::Display for PromptScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        PromptScheme::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown prompt scheme {s:?}")))
    }
}

pub fn generate_prompts(category: &str, scheme: PromptScheme) -> Result<Vec<String>> {
    if category.is_empty() {
        return Err(Error::ConfigInvalid("category name is empty".into()));
    }
    Ok(scheme.prefixes().iter().map(|p| format!("{p}{category}")).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub category: String,
    pub scheme: PromptScheme,
    pub prompt: String,
}

pub fn prompt_records(categories: &[String], scheme: PromptScheme) -> Result<Vec<PromptRecord>> {
    let mut out = Vec::new();
    for c in categories {
        for prompt in generate_prompts(c, scheme)? {
            out.push(PromptRecord {
                category: c.clone(),
                scheme,
                prompt,
            });
        }
    }
    Ok(out)
}
