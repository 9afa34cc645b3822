use std::sync::Arc;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::charlm::{contextual_embed, ContextualLm};
use super::pooled::{pooled_embed, PooledMemory, PoolingMode};
use super::subword::SubwordModel;
use crate::error::Result;

#[derive(Clone, Debug)]
pub enum EmbeddingProvider {
    Word(Arc<SubwordModel>),
    Contextual {
        forward: Arc<ContextualLm>,
        backward: Arc<ContextualLm>,
    },
    Pooled {
        forward: Arc<ContextualLm>,
        backward: Arc<ContextualLm>,
        mode: PoolingMode,
    },
}

/// Serializable description of one provider slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderKind {
    Word,
    Contextual,
    Pooled { mode: PoolingMode },
}

impl EmbeddingProvider {
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingProvider::Word(m) => m.dim(),
            EmbeddingProvider::Contextual { forward, backward } => forward.hidden_size() + backward.hidden_size(),
            EmbeddingProvider::Pooled { forward, backward, .. } => 2 * (forward.hidden_size() + backward.hidden_size()),
        }
    }

    pub fn kind(&self) -> ProviderKind {
        match self {
            EmbeddingProvider::Word(_) => ProviderKind::Word,
            EmbeddingProvider::Contextual { .. } => ProviderKind::Contextual,
            EmbeddingProvider::Pooled { mode, .. } => ProviderKind::Pooled { mode: *mode },
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EmbeddingStack {
    pub providers: Vec<EmbeddingProvider>,
}

/// Mutable per-run state: one memory per pooled provider, in provider order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StackState {
    pub memories: Vec<PooledMemory>,
}

impl EmbeddingStack {
    pub fn new(providers: Vec<EmbeddingProvider>) -> Self {
        EmbeddingStack { providers }
    }

    pub fn dim(&self) -> usize {
        self.providers.iter().map(EmbeddingProvider::dim).sum()
    }

    pub fn kinds(&self) -> Vec<ProviderKind> {
        self.providers.iter().map(EmbeddingProvider::kind).collect()
    }

    /// Fresh state with empty memories.
    pub fn new_state(&self) -> StackState {
        StackState {
            memories: self
                .providers
                .iter()
                .filter_map(|p| match p {
                    EmbeddingProvider::Pooled { mode, .. } => Some(PooledMemory::new(*mode)),
                    _ => None,
                })
                .collect(),
        }
    }

    pub fn has_pooling(&self) -> bool {
        self.providers.iter().any(|p| matches!(p, EmbeddingProvider::Pooled { .. }))
    }
}

/// Per-token concatenation of every provider's output in declared order.
pub fn stack_embeddings(stack: &EmbeddingStack, tokens: &[&str], state: &mut StackState) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((tokens.len(), stack.dim()));
    let mut col = 0;
    let mut pooled_idx = 0;
    for p in &stack.providers {
        let d = p.dim();
        let block = match p {
            EmbeddingProvider::Word(m) => {
                let mut b = Array2::zeros((tokens.len(), d));
                for (i, t) in tokens.iter().enumerate() {
                    b.row_mut(i).assign(&ndarray::Array1::from(m.embed_word(t)));
                }
                b
            }
            EmbeddingProvider::Contextual { forward, backward } => contextual_embed(forward, backward, tokens)?,
            EmbeddingProvider::Pooled { forward, backward, mode } => {
                if state.memories.len() <= pooled_idx {
                    state.memories.push(PooledMemory::new(*mode));
                }
                let ctx = contextual_embed(forward, backward, tokens)?;
                let b = pooled_embed(&mut state.memories[pooled_idx], ctx.view(), tokens)?;
                pooled_idx += 1;
                b
            }
        };
        out.slice_mut(s![.., col..col + d]).assign(&block);
        col += d;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::charlm::{train_char_lm, CharLmConfig, Direction};
    use crate::embeddings::subword::{train_cbow, CbowConfig};

    fn providers() -> (EmbeddingProvider, EmbeddingProvider) {
        let sents: Vec<Vec<String>> = (0..5)
            .map(|_| "Kein Stau im Sono".split(' ').map(str::to_owned).collect())
            .collect();
        let cfg = CbowConfig {
            dim: 4,
            buckets: 100,
            min_count: 1,
            epochs: 1,
            ..CbowConfig::default()
        };
        let word = train_cbow(&sents, &cfg).unwrap().0;
        let lm_cfg = CharLmConfig {
            hidden: 3,
            char_dim: 4,
            epochs: 1,
            ..CharLmConfig::default()
        };
        let text = "Kein Stau im Sono. ".repeat(3);
        let f = train_char_lm(&text, Direction::Forward, &lm_cfg).unwrap().0;
        let b = train_char_lm(&text, Direction::Backward, &lm_cfg).unwrap().0;
        (
            EmbeddingProvider::Word(Arc::new(word)),
            EmbeddingProvider::Contextual {
                forward: Arc::new(f),
                backward: Arc::new(b),
            },
        )
    }

    #[test]
    fn order_permutes_blocks() {
        let (w, c) = providers();
        let toks = ["Kein", "Stau", "Niere"];
        let ab = EmbeddingStack::new(vec![w.clone(), c.clone()]);
        let ba = EmbeddingStack::new(vec![c, w.clone()]);
        assert_eq!(ab.dim(), 10);
        let x = stack_embeddings(&ab, &toks, &mut ab.new_state()).unwrap();
        let y = stack_embeddings(&ba, &toks, &mut ba.new_state()).unwrap();
        assert_eq!(x.slice(s![.., ..4]), y.slice(s![.., 6..]));
        assert_eq!(x.slice(s![.., 4..]), y.slice(s![.., ..6]));
        let single = EmbeddingStack::new(vec![w]);
        let z = stack_embeddings(&single, &toks, &mut single.new_state()).unwrap();
        assert_eq!(z, x.slice(s![.., ..4]));
    }
}
