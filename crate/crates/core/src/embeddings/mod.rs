//! Embedding providers: hashed-subword CBOW vectors, character language
//! model states, pooled contextual vectors, and their concatenation.

mod charlm;
mod mexe;
mod pooled;
mod stack;
mod subword;

pub use charlm::{contextual_embed, train_char_lm, CharLmConfig, CharLmStats, ContextualLm, Direction};
pub(crate) use charlm::CharLmNet;
pub use mexe::{decode_mexe, encode_mexe, export_text_vectors, load_mexe, save_mexe, MEXE_MAGIC, MEXE_VERSION};
pub use pooled::{pooled_embed, PoolEntry, PooledMemory, PoolingMode};
pub use stack::{stack_embeddings, EmbeddingProvider, EmbeddingStack, ProviderKind, StackState};
pub use subword::{
    average_loss, char_ngrams, cosine, extend_vocabulary, fine_tune, fnv1a, train_cbow, CbowConfig, CbowExample,
    CbowStats, ParamRef, SubwordModel, VocabEntry,
};
