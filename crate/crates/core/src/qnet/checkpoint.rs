//! Binary checkpoint: versioned header then little-endian `f64` arrays.
//!
//! ```text
//! magic "SDDQNCKP" | version u32 | n_sizes u32 | sizes u32.. | leak f64
//! affordance-order hash [u8; 8] | episode u64 | flags u32 | n_params u64
//! online params f64..
//! [flags & 1] target params f64..
//! [flags & 2] adam: step u64, lr, beta1, beta2, eps f64, m f64.., v f64..
//! [flags & 4] rng: seed [u8; 32], stream u64, word_pos u128
//! ```

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use super::{AdamState, Mlp};
use crate::affordance::ordering_hash;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SDDQNCKP";
pub const FORMAT_VERSION: u32 = 1;

const HAS_TARGET: u32 = 1;
const HAS_ADAM: u32 = 2;
const HAS_RNG: u32 = 4;

/// Position of a ChaCha stream, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub online: Mlp<T>,
    pub target: Option<Mlp<T>>,
    pub adam: Option<AdamState<T>>,
    /// Episodes completed when the checkpoint was taken.
    pub episode: u64,
    pub rng: Option<RngState>,
}

/// Header fields readable without decoding the arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub sizes: Vec<usize>,
    pub leak: f64,
    pub ordering_hash: [u8; 8],
    pub episode: u64,
    pub has_target: bool,
    pub has_adam: bool,
    pub has_rng: bool,
    pub n_params: u64,
}

fn put_f64s<T: Scalar>(out: &mut Vec<u8>, xs: &[T]) {
    for x in xs {
        out.extend_from_slice(&x.as_f64().to_le_bytes());
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(online: Mlp<T>) -> Self {
        Self { online, target: None, adam: None, episode: 0, rng: None }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let sizes = self.online.sizes();
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in sizes {
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.online.leak().as_f64().to_le_bytes());
        out.extend_from_slice(&ordering_hash());
        out.extend_from_slice(&self.episode.to_le_bytes());
        let flags = (self.target.is_some() as u32) * HAS_TARGET
            | (self.adam.is_some() as u32) * HAS_ADAM
            | (self.rng.is_some() as u32) * HAS_RNG;
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&(self.online.params().len() as u64).to_le_bytes());
        put_f64s(&mut out, self.online.params());
        if let Some(t) = &self.target {
            put_f64s(&mut out, t.params());
        }
        if let Some(a) = &self.adam {
            out.extend_from_slice(&a.step.to_le_bytes());
            put_f64s(&mut out, &[a.lr, a.beta1, a.beta2, a.eps]);
            put_f64s(&mut out, &a.m);
            put_f64s(&mut out, &a.v);
        }
        if let Some(r) = &self.rng {
            out.extend_from_slice(&r.seed);
            out.extend_from_slice(&r.stream.to_le_bytes());
            out.extend_from_slice(&r.word_pos.to_le_bytes());
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Decodes a checkpoint, rejecting an affordance layout other than the
    /// current one and, when given, any other architecture.
    pub fn from_bytes(bytes: &[u8], expected_sizes: Option<&[usize]>) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        let header = read_header(&mut r)?;
        if header.ordering_hash != ordering_hash() {
            return Err("affordance ordering hash mismatch".into());
        }
        if let Some(expected) = expected_sizes {
            if header.sizes != expected {
                return Err(format!("architecture {:?} does not match expected {:?}", header.sizes, expected));
            }
        }
        let n = header.n_params as usize;
        let leak = T::lit(header.leak);
        let online = Mlp::from_params(&header.sizes, leak, r.f64s(n)?).map_err(|e| e.to_string())?;
        let target = if header.has_target {
            Some(Mlp::from_params(&header.sizes, leak, r.f64s(n)?).map_err(|e| e.to_string())?)
        } else {
            None
        };
        let adam = if header.has_adam {
            let step = r.u64()?;
            let h: Vec<T> = r.f64s(4)?;
            let m = r.f64s(n)?;
            let v = r.f64s(n)?;
            Some(AdamState { m, v, step, lr: h[0], beta1: h[1], beta2: h[2], eps: h[3] })
        } else {
            None
        };
        let rng = if header.has_rng {
            let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
            let stream = r.u64()?;
            let word_pos = u128::from_le_bytes(r.take(16)?.try_into().unwrap());
            Some(RngState { seed, stream, word_pos })
        } else {
            None
        };
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Self { online, target, adam, episode: header.episode, rng })
    }

    pub fn load(path: &Path, expected_sizes: Option<&[usize]>) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Checkpoint { path: path.to_owned(), reason: e.to_string() })?;
        Self::from_bytes(&bytes, expected_sizes).map_err(|reason| Error::Checkpoint { path: path.to_owned(), reason })
    }
}

pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::Checkpoint { path: path.to_owned(), reason: e.to_string() })?;
    read_header(&mut Reader { bytes: &bytes, pos: 0 }).map_err(|reason| Error::Checkpoint { path: path.to_owned(), reason })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated checkpoint")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s<T: Scalar>(&mut self, n: usize) -> std::result::Result<Vec<T>, String> {
        (0..n).map(|_| self.f64().map(T::lit)).collect()
    }
}

fn read_header(r: &mut Reader<'_>) -> std::result::Result<CheckpointHeader, String> {
    if r.take(8)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let n_sizes = r.u32()? as usize;
    if n_sizes > 64 {
        return Err("implausible layer count".into());
    }
    let sizes = (0..n_sizes).map(|_| r.u32().map(|s| s as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
    let leak = r.f64()?;
    let ordering_hash: [u8; 8] = r.take(8)?.try_into().unwrap();
    let episode = r.u64()?;
    let flags = r.u32()?;
    let n_params = r.u64()?;
    let expected: u64 = sizes.windows(2).map(|w| (w[1] * (w[0] + 1)) as u64).sum();
    if n_params != expected {
        return Err(format!("parameter count {n_params} inconsistent with architecture {sizes:?}"));
    }
    Ok(CheckpointHeader {
        version,
        sizes,
        leak,
        ordering_hash,
        episode,
        has_target: flags & HAS_TARGET != 0,
        has_adam: flags & HAS_ADAM != 0,
        has_rng: flags & HAS_RNG != 0,
        n_params,
    })
}
