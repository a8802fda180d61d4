use crate::textnorm::{TextProcessor, TokenizedText};

/// Per-token embedding matrix, one row per token.
pub type TokenVectors = Vec<Vec<f64>>;

/// A review prepared for the extraction stages.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub raw: String,
    pub text: TokenizedText,
    /// Filled once an embedding backend has run.
    pub embeddings: Option<TokenVectors>,
}

impl Document {
    pub fn new(id: impl Into<String>, raw: impl Into<String>, processor: &TextProcessor) -> Self {
        let raw = raw.into();
        let text = processor.process(&raw);
        Document {
            id: id.into(),
            raw,
            text,
            embeddings: None,
        }
    }

    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}
