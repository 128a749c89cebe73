//! The vector-field network `v_θ(t, x)`, its optimizer and checkpoints.

mod adam;
mod mlp;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use mlp::{Activation, ForwardCache, MlpConfig, MlpVectorField, TimeEmbedding};

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"UOTRFM01";
const VERSION: u32 = 1;

/// Binary checkpoint layout (all little-endian):
///
/// ```text
/// magic "UOTRFM01" | u32 version | u32 d | u32 n_freq | u8 activation
/// | u32 n_hidden | u32 width × n_hidden | u64 n_params | f64 × n_params
/// ```
pub fn save_checkpoint(net: &MlpVectorField, path: &Path) -> Result<()> {
    let cfg = net.config();
    let mut buf = Vec::with_capacity(64 + 8 * net.num_params());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(net.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.n_freq as u32).to_le_bytes());
    buf.push(cfg.activation.code());
    buf.extend_from_slice(&(cfg.hidden.len() as u32).to_le_bytes());
    for &h in &cfg.hidden {
        buf.extend_from_slice(&(h as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<MlpVectorField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let d = r.u32()? as usize;
    let n_freq = r.u32()? as usize;
    let activation =
        Activation::from_code(r.take(1)?[0]).ok_or_else(|| Error::Checkpoint("unknown activation code".into()))?;
    let n_hidden = r.u32()? as usize;
    let hidden = (0..n_hidden)
        .map(|_| r.u32().map(|h| h as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut net = MlpVectorField::zeros(
        d,
        MlpConfig {
            hidden,
            n_freq,
            activation,
        },
    )
    .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let n_params = r.u64()? as usize;
    if n_params != net.num_params() {
        return Err(Error::Checkpoint(format!(
            "header declares {n_params} parameters, architecture has {}",
            net.num_params()
        )));
    }
    for p in net.params_mut() {
        *p = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(net)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
