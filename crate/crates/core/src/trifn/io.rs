//! `TRIFN1` model files: magic, dimensions (u64 LE), hyperparameters, then
//! every factor as row-major little-endian f64.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::{TriFnHyper, TriFnModel};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"TRIFN1";

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s<'a>(w: &mut impl Write, vs: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_matrix(r: &mut impl Read, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let data = (0..rows * cols).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn write_model(w: &mut impl Write, m: &TriFnModel) -> Result<()> {
    let h = &m.hyper;
    let d = m.news_factors.ncols();
    w.write_all(MAGIC)?;
    for v in [
        m.news_factors.nrows(),
        m.term_factors.nrows(),
        m.user_factors.nrows(),
        d,
    ] {
        put_u64(w, v as u64)?;
    }
    put_f64s(w, &[h.alpha, h.beta, h.gamma, h.eta, h.lambda, h.tol])?;
    put_u64(w, h.max_iters as u64)?;
    put_u64(w, h.seed)?;
    // iter() on a standard-layout array is row-major
    for m in [&m.news_factors, &m.term_factors, &m.user_factors, &m.user_core] {
        put_f64s(w, m.as_standard_layout().iter())?;
    }
    put_f64s(w, m.bias_weights.iter())?;
    put_f64s(w, m.class_weights.iter())?;
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<TriFnModel> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat("missing TRIFN1 magic".into()));
    }
    let n = get_u64(r)? as usize;
    let terms = get_u64(r)? as usize;
    let users = get_u64(r)? as usize;
    let d = get_u64(r)? as usize;
    let hyper = TriFnHyper {
        d,
        alpha: get_f64(r)?,
        beta: get_f64(r)?,
        gamma: get_f64(r)?,
        eta: get_f64(r)?,
        lambda: get_f64(r)?,
        tol: get_f64(r)?,
        max_iters: get_u64(r)? as usize,
        seed: get_u64(r)?,
    };
    let news_factors = get_matrix(r, n, d)?;
    let term_factors = get_matrix(r, terms, d)?;
    let user_factors = get_matrix(r, users, d)?;
    let user_core = get_matrix(r, d, d)?;
    let bias_weights = Array1::from((0..d).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?);
    let class_weights = Array1::from((0..d).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?);
    Ok(TriFnModel {
        news_factors,
        term_factors,
        user_factors,
        user_core,
        bias_weights,
        class_weights,
        hyper,
    })
}
