//! Tokenization, vocabulary, and the two tiny transformer models: an
//! encoder with pooled first-token output and an encoder-decoder that
//! generates two-token label sequences under constrained decoding.

pub mod encoder;
pub mod seq2seq;
pub mod vocab;

pub use encoder::{EncoderDims, EncoderModel};
pub use seq2seq::{constrained_argmax, LabelTokenPair, Seq2SeqModel};
pub use vocab::{
    tokenize, words, TokenSeq, Vocab, CLS_ID, EMOTION_LABELS, EOS_ID, FIRST_ORDINARY_ID,
    LABEL_BLOCK_START, PAD_ID, UNK_ID,
};
