//! Binary checkpoint format.
//!
//! ```text
//! "KGEC1"                      5 bytes
//! n, m, d, precision           u64 little-endian each (precision is 32 or 64)
//! re_E, im_E, re_R, im_R       row-major little-endian f32 or f64
//! ```
//!
//! Names are not embedded. A sidecar `<checkpoint>.vocab` records the paths
//! of the entity and relation vocab dumps as `entities=<path>` and
//! `relations=<path>` lines.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::data::Vocab;
use crate::error::{KgError, Result};
use crate::model::{Block, ModelParams};

pub const MAGIC: &[u8; 5] = b"KGEC1";
const HEADER_LEN: usize = 5 + 4 * 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn bits(self) -> u64 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }

    pub fn from_bits(bits: u64) -> Option<Self> {
        match bits {
            32 => Some(Precision::F32),
            64 => Some(Precision::F64),
            _ => None,
        }
    }

    fn width(self) -> usize {
        self.bits() as usize / 8
    }
}

pub fn encode(params: &ModelParams, precision: Precision) -> Vec<u8> {
    let total: usize = Block::ALL.iter().map(|&b| params.block(b).len()).sum();
    let mut buf = Vec::with_capacity(HEADER_LEN + total * precision.width());
    buf.extend_from_slice(MAGIC);
    for v in [
        params.n_entities() as u64,
        params.n_relations() as u64,
        params.dim() as u64,
        precision.bits(),
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for b in Block::ALL {
        for &x in params.block(b) {
            match precision {
                Precision::F32 => buf.extend_from_slice(&(x as f32).to_le_bytes()),
                Precision::F64 => buf.extend_from_slice(&x.to_le_bytes()),
            }
        }
    }
    buf
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<(ModelParams, Precision)> {
    let bad = |message: String| KgError::Checkpoint {
        path: origin.to_owned(),
        message,
    };
    if bytes.len() < HEADER_LEN || &bytes[..5] != MAGIC {
        return Err(bad("missing KGEC1 header".into()));
    }
    let word = |i: usize| {
        let start = 5 + 8 * i;
        u64::from_le_bytes(bytes[start..start + 8].try_into().unwrap())
    };
    let (n, m, d) = (word(0) as usize, word(1) as usize, word(2) as usize);
    let precision =
        Precision::from_bits(word(3)).ok_or_else(|| bad(format!("unknown precision {}", word(3))))?;
    if d == 0 {
        return Err(bad("zero dimension".into()));
    }
    let counts = [n * d, n * d, m * d, m * d];
    let expected = HEADER_LEN + counts.iter().sum::<usize>() * precision.width();
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes for n={n}, m={m}, d={d}, found {}",
            bytes.len()
        )));
    }

    let mut cursor = HEADER_LEN;
    let mut blocks = counts.iter().map(|&count| {
        let w = precision.width();
        let block: Vec<f64> = bytes[cursor..cursor + count * w]
            .chunks_exact(w)
            .map(|c| match precision {
                Precision::F32 => f32::from_le_bytes(c.try_into().unwrap()) as f64,
                Precision::F64 => f64::from_le_bytes(c.try_into().unwrap()),
            })
            .collect();
        cursor += count * w;
        block
    });
    let (re_e, im_e, re_r, im_r) = (
        blocks.next().unwrap(),
        blocks.next().unwrap(),
        blocks.next().unwrap(),
        blocks.next().unwrap(),
    );
    let params = ModelParams::from_blocks(d, re_e, im_e, re_r, im_r)?;
    debug_assert_eq!((params.n_entities(), params.n_relations()), (n, m));
    Ok((params, precision))
}

pub fn save(path: &Path, params: &ModelParams, precision: Precision) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| KgError::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&encode(params, precision))
        .and_then(|_| out.flush())
        .map_err(|e| KgError::io(path, e))
}

pub fn load(path: &Path) -> Result<(ModelParams, Precision)> {
    let bytes = fs::read(path).map_err(|e| KgError::io(path, e))?;
    decode(&bytes, path)
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".vocab");
    PathBuf::from(s)
}

/// Writes the vocab dumps and the sidecar pointing at them. Paths under the
/// checkpoint's directory are recorded relative to it.
pub fn save_vocab(checkpoint: &Path, vocab: &Vocab, entities: &Path, relations: &Path) -> Result<()> {
    vocab.save(entities, relations)?;
    let sidecar = sidecar_path(checkpoint);
    let base = checkpoint.parent().unwrap_or(Path::new(""));
    let relative = |p: &'_ Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
    let text = format!(
        "entities={}\nrelations={}\n",
        relative(entities),
        relative(relations)
    );
    fs::write(&sidecar, text).map_err(|e| KgError::io(&sidecar, e))
}

/// Loads the vocab referenced by a checkpoint's sidecar. Relative paths are
/// resolved against the checkpoint's directory.
pub fn load_vocab(checkpoint: &Path) -> Result<Vocab> {
    let sidecar = sidecar_path(checkpoint);
    let text = fs::read_to_string(&sidecar).map_err(|e| KgError::io(&sidecar, e))?;
    let base = checkpoint.parent().unwrap_or(Path::new("."));
    let mut entities = None;
    let mut relations = None;
    for (i, line) in text.lines().enumerate() {
        let parse_err = || KgError::Parse {
            path: sidecar.clone(),
            line: i + 1,
            message: format!("expected key=value, found `{line}`"),
        };
        let (key, value) = line.split_once('=').ok_or_else(parse_err)?;
        let path = base.join(value);
        match key {
            "entities" => entities = Some(path),
            "relations" => relations = Some(path),
            _ => return Err(parse_err()),
        }
    }
    match (entities, relations) {
        (Some(e), Some(r)) => Vocab::load(&e, &r),
        _ => Err(KgError::Parse {
            path: sidecar,
            line: 0,
            message: "sidecar must name both entities and relations".into(),
        }),
    }
}
