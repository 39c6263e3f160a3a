//! Binary checkpoint: model config, `f32` parameters and named statistics.
//!
//! Layout, little-endian: magic, version, config, step, metadata string,
//! tensors, statistics, then a SHA-256 of everything before it.

use std::io::{Read, Write};
use std::path::Path;

use rand::rngs::mock::StepRng;
use sha2::{Digest, Sha256};

use crate::tensor::Matrix;

use super::model::{Init, ModelConfig, ModelParams};
use super::NnError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MIBC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams<f32>,
    pub step: u64,
    /// Free-form text owned by the caller, usually the serialised run config.
    pub metadata: String,
    /// Named vectors such as normaliser moments.
    pub stats: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn stat(&self, name: &str) -> Option<&[f64]> {
        self.stats
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Hex SHA-256 over the statistics only; identifies the data preparation.
    pub fn stats_hash(&self) -> String {
        stats_hash(&self.stats)
    }
}

/// Hex SHA-256 of named statistics, independent of the model.
pub fn stats_hash(stats: &[(String, Vec<f64>)]) -> String {
    let mut h = Sha256::new();
    for (name, v) in stats {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((v.len() as u64).to_le_bytes());
        for x in v {
            h.update(x.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend(v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| NnError::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize, NnError> {
        usize::try_from(self.u64()?).map_err(|_| NnError::Checkpoint("length overflow".into()))
    }
    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, NnError> {
        let n = self.usize()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| NnError::Checkpoint("string is not UTF-8".into()))
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let c = &ck.config;
    let mut w = Writer(Vec::new());
    w.0.extend(CHECKPOINT_MAGIC);
    w.0.extend(CHECKPOINT_VERSION.to_le_bytes());
    for v in [c.layers, c.heads, c.d_model, c.d_ff, c.max_rel_dist, c.d_in, c.d_out] {
        w.u64(v as u64);
    }
    w.0.extend(c.dropout.to_le_bytes());
    w.0.push(c.pre_norm as u8);
    w.0.push(c.key_pos_embedding as u8);
    w.u64(ck.step);
    w.str(&ck.metadata);
    let named = ck.params.named();
    w.u64(named.len() as u64);
    for (name, m) in named {
        w.str(&name);
        w.u64(m.rows() as u64);
        w.u64(m.cols() as u64);
        for v in m.as_slice() {
            w.0.extend(v.to_le_bytes());
        }
    }
    w.u64(ck.stats.len() as u64);
    for (name, v) in &ck.stats {
        w.str(name);
        w.u64(v.len() as u64);
        for x in v {
            w.0.extend(x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend(digest);
    w.0
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<Checkpoint, NnError> {
    if buf.len() < 8 || &buf[..4] != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "format version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    if buf.len() < 8 + 32 {
        return Err(NnError::Checkpoint("truncated file".into()));
    }
    let (body, digest) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(NnError::Checkpoint("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.usize()?;
    }
    let dropout = r.f64()?;
    let flags = r.take(2)?;
    let config = ModelConfig {
        layers: dims[0],
        heads: dims[1],
        d_model: dims[2],
        d_ff: dims[3],
        max_rel_dist: dims[4],
        d_in: dims[5],
        d_out: dims[6],
        dropout,
        pre_norm: flags[0] != 0,
        key_pos_embedding: flags[1] != 0,
    };
    config.validate()?;
    let step = r.u64()?;
    let metadata = r.str()?;

    let count = r.usize()?;
    let mut params: ModelParams<f32> =
        ModelParams::init(&config, &mut StepRng::new(0, 0), Init::Training)?;
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    if count != names.len() {
        return Err(NnError::Shape(format!(
            "{count} tensors stored, config implies {}",
            names.len()
        )));
    }
    for (slot, expect) in params.tensors_mut().into_iter().zip(&names) {
        let name = r.str()?;
        if &name != expect {
            return Err(NnError::Checkpoint(format!("tensor {name}, expected {expect}")));
        }
        let (rows, cols) = (r.usize()?, r.usize()?);
        if (rows, cols) != slot.shape() {
            return Err(NnError::Shape(format!(
                "{name} is {:?}, config implies {:?}",
                (rows, cols),
                slot.shape()
            )));
        }
        let raw = r.take(rows * cols * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        *slot = Matrix::from_vec(rows, cols, data);
    }
    let n_stats = r.usize()?;
    let mut stats = Vec::with_capacity(n_stats.min(64));
    for _ in 0..n_stats {
        let name = r.str()?;
        let n = r.usize()?;
        let v = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        stats.push((name, v));
    }
    if r.pos != body.len() {
        return Err(NnError::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint {
        config,
        params,
        step,
        metadata,
        stats,
    })
}

/// Write atomically through a sibling temporary file.
pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), NnError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&encode_checkpoint(ck))?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_checkpoint(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut cfg = ModelConfig::tiny(10, 6);
        cfg.key_pos_embedding = true;
        cfg.max_rel_dist = 4;
        let params = ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(3), Init::Dense).unwrap();
        Checkpoint {
            config: cfg,
            params,
            step: 1234,
            metadata: "seed = 3".into(),
            stats: vec![("mean".into(), vec![1.0, -2.5]), ("std".into(), vec![0.5])],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = decode_checkpoint(&encode_checkpoint(&ck)).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.stats_hash(), ck.stats_hash());
        assert_eq!(back.stat("std"), Some(&[0.5][..]));
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = encode_checkpoint(&sample());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(matches!(decode_checkpoint(&bytes), Err(NnError::Checkpoint(m)) if m.contains("checksum")));
        assert!(decode_checkpoint(b"NOPE0000").is_err());
        let good = encode_checkpoint(&sample());
        assert!(decode_checkpoint(&good[..good.len() - 40]).is_err());
    }

    #[test]
    fn stats_hash_tracks_values() {
        let a = sample();
        let mut b = sample();
        b.stats[0].1[0] = 1.0000001;
        assert_ne!(a.stats_hash(), b.stats_hash());
        assert_eq!(a.stats_hash().len(), 64);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.bin");
        write_checkpoint(&p, &sample()).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), sample());
    }
}
