//! Versioned binary checkpoint: flat parameters, Adam moments and the path
//! of the count-table snapshot written alongside.
//!
//! Layout (little-endian): magic `PCCK`, `u32` version, `u64` parameter
//! count `n`, `n` `f64` parameters, `n` `f64` first moments, `n` `f64`
//! second moments, `u64` Adam step, `u32` path length, UTF-8 path bytes.

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use super::adam::Adam;

const MAGIC: &[u8; 4] = b"PCCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_t: u64,
    pub counts_path: PathBuf,
}

impl Checkpoint {
    pub fn new(params: &[f64], adam: &Adam, counts_path: &Path) -> Self {
        Self {
            params: params.to_vec(),
            adam_m: adam.m.clone(),
            adam_v: adam.v.clone(),
            adam_t: adam.t,
            counts_path: counts_path.to_path_buf(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for v in [&self.params, &self.adam_m, &self.adam_v] {
            for x in v.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.write_all(&self.adam_t.to_le_bytes())?;
        let path = self.counts_path.to_string_lossy();
        w.write_all(&(path.len() as u32).to_le_bytes())?;
        w.write_all(path.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<Self> {
        let invalid = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("not a checkpoint file"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CHECKPOINT_VERSION {
            return Err(invalid(&format!("unsupported checkpoint version {version}")));
        }
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut read_vec = |r: &mut R| -> io::Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut b8)?;
                out.push(f64::from_le_bytes(b8));
            }
            Ok(out)
        };
        let params = read_vec(&mut r)?;
        let adam_m = read_vec(&mut r)?;
        let adam_v = read_vec(&mut r)?;
        r.read_exact(&mut b8)?;
        let adam_t = u64::from_le_bytes(b8);
        r.read_exact(&mut b4)?;
        let mut path = vec![0u8; u32::from_le_bytes(b4) as usize];
        r.read_exact(&mut path)?;
        let counts_path = PathBuf::from(String::from_utf8(path).map_err(|_| invalid("path is not UTF-8"))?);
        Ok(Self { params, adam_m, adam_v, adam_t, counts_path })
    }

    pub fn restore_adam(&self, lr: f64) -> Adam {
        let mut adam = Adam::new(self.params.len(), lr);
        adam.m.clone_from(&self.adam_m);
        adam.v.clone_from(&self.adam_v);
        adam.t = self.adam_t;
        adam
    }
}
