//! Binary network checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic      8 bytes  "EVSACNN\0"
//! version    u32
//! count      u32      number of networks
//! per network:
//!   name_len u16, name (utf-8)
//!   layers   u32, sizes u32 * layers
//! parameters f64 * total, networks in declared order
//! ```

use std::fs;
use std::path::Path;

use super::dense::{param_count, DenseNet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"EVSACNN\0";
pub const VERSION: u32 = 1;

pub fn encode(nets: &[(&str, &DenseNet)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(nets.len() as u32).to_le_bytes());
    for (name, net) in nets {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
        for &s in net.sizes() {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
    }
    for (_, net) in nets {
        for p in net.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, DenseNet)>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("network name is not utf-8".into()))?;
        let layers = r.u32()? as usize;
        let sizes = (0..layers)
            .map(|_| r.u32().map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        manifest.push((name, sizes));
    }
    let mut nets = Vec::with_capacity(count);
    for (name, sizes) in manifest {
        if sizes.len() < 2 {
            return Err(Error::Checkpoint(format!(
                "network `{name}` has {} layers",
                sizes.len()
            )));
        }
        let params = (0..param_count(&sizes)).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        nets.push((name, DenseNet::from_params(&sizes, params)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(nets)
}

pub fn save(path: &Path, nets: &[(&str, &DenseNet)]) -> Result<()> {
    fs::write(path, encode(nets)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, DenseNet)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Looks up a network by name and checks its architecture.
pub fn take_net(nets: &mut Vec<(String, DenseNet)>, name: &str, sizes: &[usize]) -> Result<DenseNet> {
    let idx = nets
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| Error::Checkpoint(format!("missing network `{name}`")))?;
    let (_, net) = nets.remove(idx);
    if net.sizes() != sizes {
        return Err(Error::Checkpoint(format!(
            "network `{name}` has layers {:?}, config expects {sizes:?}",
            net.sizes()
        )));
    }
    Ok(net)
}
