//! Binary export of dense landscapes plus a JSON sidecar.
//!
//! Layout (little endian): magic `REMLAND1`, `n: u32`, `beta: f64`,
//! `r_n: f64`, `ln r_n: f64`, `seed: u64`, then `2^n` values of `ln τ` in
//! vertex order. `r_n` may be `inf` for deep scales; `ln r_n` is the
//! authoritative value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Landscape, LandscapeParams, Scale, ScaleClass, ScaleSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"REMLAND1";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    params: LandscapeParams,
    scale: Scale,
    class: ScaleClass,
}

/// Write `path` (binary) and `path.json` (derived scale quantities).
pub fn write_landscape(landscape: &Landscape, path: &Path) -> Result<()> {
    let values = landscape.require_dense()?;
    let p = landscape.params();
    let s = landscape.scale();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&p.n.to_le_bytes())?;
    w.write_all(&p.beta.to_le_bytes())?;
    w.write_all(&s.ln_r_n.exp().to_le_bytes())?;
    w.write_all(&s.ln_r_n.to_le_bytes())?;
    w.write_all(&p.master_seed.to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let side = Sidecar { params: *p, scale: *s, class: s.classify() };
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
    Ok(())
}

/// Read a landscape written by [`write_landscape`].
pub fn read_landscape(path: &Path) -> Result<Landscape> {
    let schema = |reason: &str| Error::Schema { path: path.display().to_string(), reason: reason.into() };
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(schema("bad magic"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4);
    if n > super::DENSE_LIMIT {
        return Err(schema("dimension above dense limit"));
    }
    let mut f = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let beta = f64::from_le_bytes(f(&mut r)?);
    let _r_n = f64::from_le_bytes(f(&mut r)?);
    let ln_r_n = f64::from_le_bytes(f(&mut r)?);
    let seed = u64::from_le_bytes(f(&mut r)?);
    let params = LandscapeParams::new(n, beta, ScaleSpec::LnSpaceScale(ln_r_n), seed)?;
    let scale = Scale::from_ln_space_scale(n, beta, ln_r_n)?;
    let len = 1usize << n;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != len * 8 {
        return Err(schema("payload length does not match 2^n values"));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Landscape::from_dense(params, scale, values))
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}
