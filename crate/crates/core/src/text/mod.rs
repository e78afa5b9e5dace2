//! Text embeddings: tokenization, skip-gram word vectors and average-pooled
//! document vectors.

mod io;
mod tokenize;
mod vocab;
mod word2vec;

pub use io::{read_word2vec, write_word2vec, W2V_FORMAT_VERSION, W2V_MAGIC};
pub use tokenize::{tokenize, tokenize_flat};
pub use vocab::Vocabulary;
pub use word2vec::{
    doc_embedding, doc_embeddings, sgns_loss_grad, train_word2vec, DocEmbedding, Word2VecConfig,
    WordEmbeddingModel,
};
