//! Binary container for trained word vectors.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SWWV"
//! 4       4     u32 format version (1)
//! 8       4     u32 dim
//! 12      4     u32 vocabulary size V
//! 16      4     u32 window
//! 20      4     u32 negatives
//! 24      4     u32 epochs
//! 28      8     u64 min_count
//! 36      8     f64 learning_rate
//! 44      8     f64 subsample
//! 52      8     u64 seed
//! 60      4     u32 number of recorded epoch losses E
//! 64      8*E   f64 epoch losses
//! ...           V vocabulary entries: u32 byte length, UTF-8 bytes, u64 count
//! ...           V*dim f64 vector entries, row-major in vocabulary order
//! ```

use std::io::{Read, Write};

use super::vocab::Vocabulary;
use super::word2vec::{Word2VecConfig, WordEmbeddingModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const W2V_MAGIC: [u8; 4] = *b"SWWV";
pub const W2V_FORMAT_VERSION: u32 = 1;

fn wio(e: std::io::Error) -> Error {
    Error::Format(format!("write failed: {e}"))
}

pub fn write_word2vec<W: Write>(model: &WordEmbeddingModel, mut w: W) -> Result<()> {
    let c = &model.config;
    let v = model.vocabulary.len();
    let mut buf = Vec::with_capacity(64 + v * (16 + 8 * model.dim()));
    buf.extend_from_slice(&W2V_MAGIC);
    buf.extend_from_slice(&W2V_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(v as u32).to_le_bytes());
    buf.extend_from_slice(&(c.window as u32).to_le_bytes());
    buf.extend_from_slice(&(c.negatives as u32).to_le_bytes());
    buf.extend_from_slice(&(c.epochs as u32).to_le_bytes());
    buf.extend_from_slice(&c.min_count.to_le_bytes());
    buf.extend_from_slice(&c.learning_rate.to_le_bytes());
    buf.extend_from_slice(&c.subsample.to_le_bytes());
    buf.extend_from_slice(&c.seed.to_le_bytes());
    buf.extend_from_slice(&(model.epoch_loss.len() as u32).to_le_bytes());
    for l in &model.epoch_loss {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    for i in 0..v {
        let word = model.vocabulary.word(i).as_bytes();
        buf.extend_from_slice(&(word.len() as u32).to_le_bytes());
        buf.extend_from_slice(word);
        buf.extend_from_slice(&model.vocabulary.count(i).to_le_bytes());
    }
    for x in model.vectors.as_slice() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf).map_err(wio)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_word2vec<R: Read>(mut r: R) -> Result<WordEmbeddingModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("read failed: {e}")))?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != W2V_MAGIC {
        return Err(Error::Format("bad magic, not a word vector container".into()));
    }
    let version = c.u32()?;
    if version != W2V_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let dim = c.u32()? as usize;
    let v = c.u32()? as usize;
    let window = c.u32()? as usize;
    let negatives = c.u32()? as usize;
    let epochs = c.u32()? as usize;
    let min_count = c.u64()?;
    let learning_rate = c.f64()?;
    let subsample = c.f64()?;
    let seed = c.u64()?;
    let n_loss = c.u32()? as usize;
    let epoch_loss = (0..n_loss).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let mut words = Vec::with_capacity(v);
    let mut counts = Vec::with_capacity(v);
    for _ in 0..v {
        let len = c.u32()? as usize;
        let w = std::str::from_utf8(c.take(len)?)
            .map_err(|e| Error::Format(format!("vocabulary entry is not UTF-8: {e}")))?;
        words.push(w.to_string());
        counts.push(c.u64()?);
    }
    let data = (0..v * dim).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    if c.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    let vocabulary = Vocabulary::from_parts(words, counts, min_count);
    Ok(WordEmbeddingModel {
        vocabulary,
        vectors: Matrix::from_vec(v, dim, data)?,
        config: Word2VecConfig {
            dim,
            window,
            negatives,
            epochs,
            min_count,
            learning_rate,
            subsample,
            seed,
        },
        epoch_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{tokenize, train_word2vec};

    fn model() -> WordEmbeddingModel {
        let sents: Vec<Vec<String>> = (0..30)
            .flat_map(|_| tokenize("the quick brown fox. jumps over the lazy dog. ünïcode"))
            .collect();
        let cfg = Word2VecConfig { dim: 6, min_count: 1, epochs: 2, ..Default::default() };
        train_word2vec(&sents, &cfg).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let m = model();
        let mut buf = Vec::new();
        write_word2vec(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SWWV");
        let back = read_word2vec(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.vector("fox"), m.vector("fox"));
    }

    #[test]
    fn rejects_corrupt_input() {
        let m = model();
        let mut buf = Vec::new();
        write_word2vec(&m, &mut buf).unwrap();
        assert!(read_word2vec(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_word2vec(bad.as_slice()).is_err());
        let mut ver = buf.clone();
        ver[4] = 9;
        assert!(read_word2vec(ver.as_slice()).is_err());
        buf.push(0);
        assert!(read_word2vec(buf.as_slice()).is_err());
    }
}
