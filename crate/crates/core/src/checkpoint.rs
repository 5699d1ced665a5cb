//! Model checkpoints (`SMCK` files).
//!
//! ```text
//! "SMCK" | version: u32 = 1
//! kind: u8 | dim_a: u32 | dim_b: u32 (0 = absent) | hidden: u32
//! has_alpha: u8 | alpha: f64 | dropout_rate: f64 | seed: u64
//! per layer, in declaration order: weights as f64, then bias as f64
//! ```
//!
//! All values little-endian. Adam moments are not stored.

use std::fs;
use std::path::Path;

use crate::data::bytes::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::model::{Model, ModelKind, ModelSpec};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn u32_field(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit in u32")))
}

fn write_spec(w: &mut ByteWriter, spec: &ModelSpec) -> Result<()> {
    w.u8(spec.kind.code());
    w.u32(u32_field(spec.dim_a, "dim_a")?);
    w.u32(u32_field(spec.dim_b.unwrap_or(0), "dim_b")?);
    w.u32(u32_field(spec.hidden, "hidden")?);
    w.u8(u8::from(spec.alpha.is_some()));
    w.f64(spec.alpha.unwrap_or(0.0));
    w.f64(spec.dropout_rate);
    w.u64(spec.seed);
    Ok(())
}

fn read_spec(r: &mut ByteReader<'_>) -> Result<ModelSpec> {
    let at = r.offset();
    let code = r.u8("model kind")?;
    let kind = ModelKind::from_code(code).ok_or_else(|| Error::Corruption {
        offset: at,
        msg: format!("unknown model kind code {code}"),
    })?;
    let dim_a = r.u32("dim_a")? as usize;
    let dim_b = match r.u32("dim_b")? {
        0 => None,
        d => Some(d as usize),
    };
    let hidden = r.u32("hidden")? as usize;
    let has_alpha = r.u8("alpha flag")?;
    let alpha_value = r.f64("alpha")?;
    let alpha = (has_alpha != 0).then_some(alpha_value);
    let dropout_rate = r.f64("dropout_rate")?;
    let seed = r.u64("seed")?;
    Ok(ModelSpec {
        kind,
        dim_a,
        dim_b,
        hidden,
        alpha,
        dropout_rate,
        seed,
    })
}

pub fn checkpoint_to_bytes(model: &Model) -> Result<Vec<u8>> {
    let mut w = ByteWriter::default();
    w.bytes(&CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    write_spec(&mut w, model.spec())?;
    for p in model.params() {
        for &v in p.weights.data().iter().chain(p.bias.data()) {
            w.f64(v);
        }
    }
    Ok(w.into_inner())
}

fn read_prefix(r: &mut ByteReader<'_>) -> Result<ModelSpec> {
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"SMCK\"")));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    read_spec(r)
}

/// Parses only the magic, version and model spec.
pub fn read_checkpoint_header(bytes: &[u8]) -> Result<ModelSpec> {
    read_prefix(&mut ByteReader::new(bytes))
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Model> {
    let mut r = ByteReader::new(bytes);
    let spec = read_prefix(&mut r)?;
    let mut model = Model::build(&spec).map_err(|e| Error::Corruption {
        offset: 8,
        msg: format!("stored model spec is invalid: {e}"),
    })?;
    for p in model.params_mut() {
        for v in p.weights.data_mut() {
            *v = r.f64("weights")?;
        }
        for v in p.bias.data_mut() {
            *v = r.f64("bias")?;
        }
    }
    if r.remaining() != 0 {
        return Err(Error::Corruption {
            offset: r.offset(),
            msg: format!("{} trailing bytes after the last layer", r.remaining()),
        });
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
