use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"IRISSEG\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A named f32 tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Model checkpoint: a kind tag, the configuration the model was built
/// with (as JSON), and its parameters.
///
/// Layout (little endian): magic `IRISSEG\0`, `u32` version, kind and
/// config as `u32`-length-prefixed UTF-8, `u32` tensor count, then per
/// tensor a length-prefixed name, `u32` rank, `u64` dims and raw `f32`s.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        write_str(out, &self.kind)?;
        write_str(out, &self.config.to_string())?;
        out.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            write_str(out, &t.name)?;
            out.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for &d in &t.shape {
                out.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in &t.data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let bad = |msg: &str| Error::Checkpoint(format!("{}: {msg}", path.display()));
        let mut magic = [0u8; 8];
        input
            .read_exact(&mut magic)
            .map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = read_u32(&mut input).map_err(|_| bad("truncated header"))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let kind = read_str(&mut input).map_err(|_| bad("truncated kind"))?;
        let config_text = read_str(&mut input).map_err(|_| bad("truncated config"))?;
        let config = serde_json::from_str(&config_text).map_err(|e| bad(&format!("config: {e}")))?;
        let count = read_u32(&mut input).map_err(|_| bad("truncated tensor table"))?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name = read_str(&mut input).map_err(|_| bad("truncated tensor name"))?;
            let rank = read_u32(&mut input).map_err(|_| bad("truncated tensor rank"))?;
            let mut shape = Vec::with_capacity(rank as usize);
            for _ in 0..rank {
                let mut b = [0u8; 8];
                input.read_exact(&mut b).map_err(|_| bad("truncated dims"))?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let len: usize = shape.iter().product();
            let mut raw = vec![0u8; len * 4];
            input
                .read_exact(&mut raw)
                .map_err(|_| bad(&format!("truncated data for `{name}`")))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        Ok(Self {
            kind,
            config,
            tensors,
        })
    }

    /// Fails unless the checkpoint was written for `kind`.
    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "expected a `{kind}` checkpoint, found `{}`",
                self.kind
            )))
        }
    }
}

fn write_str(out: &mut impl Write, s: &str) -> std::io::Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())
}

fn read_u32(input: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(input: &mut impl Read) -> std::io::Result<String> {
    let len = read_u32(input)? as usize;
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
