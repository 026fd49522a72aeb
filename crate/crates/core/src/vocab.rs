//! Character-level vocabulary shared by every model in an experiment.

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};

pub type TokenId = u32;

pub const BOS_SYMBOL: &str = "<s>";
pub const EOS_SYMBOL: &str = "</s>";

/// Symbols of the stock vocabulary, after the two reserved tokens.
pub const STOCK_CHARACTERS: &str = "abcdefghijklmnopqrstuvwxyz0123456789 ,";

/// Ordered set of distinct symbols with reserved begin/end-of-sequence ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, TokenId>,
    bos_id: TokenId,
    eos_id: TokenId,
}

impl Vocabulary {
    pub fn new(symbols: Vec<String>, bos_id: TokenId, eos_id: TokenId) -> Result<Self> {
        if bos_id == eos_id {
            return Err(invalid("bos and eos must be distinct tokens"));
        }
        let n = symbols.len();
        if bos_id as usize >= n || eos_id as usize >= n {
            return Err(invalid(format!(
                "reserved ids ({bos_id}, {eos_id}) out of range for {n} symbols"
            )));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i as TokenId).is_some() {
                return Err(invalid(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Self {
            symbols,
            index,
            bos_id,
            eos_id,
        })
    }

    /// `<s>` = 0, `</s>` = 1, then one token per character in order.
    pub fn from_characters(chars: &str) -> Result<Self> {
        let mut symbols = vec![BOS_SYMBOL.to_string(), EOS_SYMBOL.to_string()];
        symbols.extend(chars.chars().map(String::from));
        Self::new(symbols, 0, 1)
    }

    pub fn stock() -> Self {
        Self::from_characters(STOCK_CHARACTERS).expect("stock vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn bos(&self) -> TokenId {
        self.bos_id
    }

    pub fn eos(&self) -> TokenId {
        self.eos_id
    }

    pub fn id(&self, symbol: &str) -> Option<TokenId> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: TokenId) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        (id as usize) < self.symbols.len()
    }

    /// Maps each character of `text` to its token.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        let mut buf = [0u8; 4];
        text.chars()
            .map(|c| {
                let s: &str = c.encode_utf8(&mut buf);
                self.id(s)
                    .ok_or_else(|| Error::UnknownSymbol(s.to_string()))
            })
            .collect()
    }

    /// Concatenates symbols, dropping the reserved tokens.
    pub fn decode(&self, tokens: &[TokenId]) -> String {
        tokens
            .iter()
            .filter(|&&t| t != self.bos_id && t != self.eos_id)
            .filter_map(|&t| self.symbol(t))
            .collect()
    }
}
