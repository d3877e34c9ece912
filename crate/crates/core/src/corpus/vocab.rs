use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Sequence start.
pub const SOS: TokenId = 0;
/// Sequence end.
pub const EOS: TokenId = 1;
/// Out-of-vocabulary.
pub const UNK: TokenId = 2;

pub const SOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "$";
pub const UNK_TOKEN: &str = "<unk>";

const RESERVED: [&str; 3] = [SOS_TOKEN, EOS_TOKEN, UNK_TOKEN];

/// Bidirectional token/id mapping. Ids are dense, the first three are reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Reserved tokens followed by `tokens` in the given order, skipping duplicates.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Vocabulary { tokens: Vec::new(), index: HashMap::new() };
        for t in RESERVED {
            v.push(t);
        }
        for t in tokens {
            let t = t.as_ref();
            if !v.index.contains_key(t) {
                v.push(t);
            }
        }
        v
    }

    /// Keeps tokens with `count >= min_count`, ordered by descending count then lexicographically.
    pub fn from_counts<S: AsRef<str> + Ord>(counts: BTreeMap<S, u64>, min_count: u64) -> Self {
        let mut kept: Vec<(&str, u64)> = counts
            .iter()
            .map(|(t, &c)| (t.as_ref(), c))
            .filter(|&(t, c)| c >= min_count && !RESERVED.contains(&t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_tokens(kept.into_iter().map(|(t, _)| t))
    }

    fn push(&mut self, t: &str) {
        let id = self.tokens.len() as TokenId;
        self.tokens.push(t.to_string());
        self.index.insert(t.to_string(), id);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    /// Maps corpus text tokens to ids. Reserved strings never map to reserved ids.
    pub fn id_or_unk(&self, token: &str) -> TokenId {
        match self.index.get(token) {
            Some(&id) if id > UNK => id,
            _ => UNK,
        }
    }

    /// Panics on an id outside the vocabulary.
    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id_or_unk(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i)).collect()
    }

    /// Space-joined text of `ids`.
    pub fn detokenize(&self, ids: &[TokenId]) -> String {
        self.decode(ids).join(" ")
    }

    /// One token per line, line index = id.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_string().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 3 || lines[..3] != RESERVED {
            return Err(Error::model("vocabulary", "missing reserved header lines"));
        }
        let v = Self::from_tokens(&lines[3..]);
        if v.len() != lines.len() {
            return Err(Error::model("vocabulary", "duplicate token"));
        }
        Ok(v)
    }
}
