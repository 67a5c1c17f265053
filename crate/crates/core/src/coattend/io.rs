//! `DEFND1` model files: magic, mode byte, JSON config header, vocabulary,
//! then every tensor in [`Params::tensors`] order as row-major little-endian
//! f64. Lengths are u64 LE.

use std::io::{Read, Write};

use super::{CoAttendConfig, CoAttentionModel, Mode, Params};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"DEFND1";

fn put_bytes(w: &mut impl Write, b: &[u8]) -> Result<()> {
    w.write_all(&(b.len() as u64).to_le_bytes())?;
    w.write_all(b)?;
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_bytes(r: &mut impl Read) -> Result<Vec<u8>> {
    let n = get_u64(r)? as usize;
    if n > 1 << 30 {
        return Err(Error::ModelFormat(format!("implausible field length {n}")));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn write_model(w: &mut impl Write, m: &CoAttentionModel) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[m.mode.code()])?;
    put_bytes(w, serde_json::to_string(&m.config)?.as_bytes())?;
    w.write_all(&(m.vocab.len() as u64).to_le_bytes())?;
    for t in m.vocab.tokens() {
        put_bytes(w, t.as_bytes())?;
    }
    for (_, t) in m.params.tensors() {
        for v in t {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<CoAttentionModel> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat("missing DEFND1 magic".into()));
    }
    let mut code = [0u8; 1];
    r.read_exact(&mut code)?;
    let mode = Mode::from_code(code[0]).ok_or_else(|| Error::ModelFormat(format!("unknown mode {}", code[0])))?;
    let config: CoAttendConfig = serde_json::from_slice(&get_bytes(r)?)?;
    config.validate()?;
    let n = get_u64(r)? as usize;
    let tokens = (0..n)
        .map(|_| String::from_utf8(get_bytes(r)?).map_err(|e| Error::ModelFormat(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let vocab = Vocabulary::from_tokens(tokens);
    let mut params = Params::init(&config, vocab.len());
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
    }
    Ok(CoAttentionModel {
        config,
        mode,
        vocab,
        params,
    })
}
