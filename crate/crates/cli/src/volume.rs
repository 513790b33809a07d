//! The VWT binary tensor format: magic "VWT1", a u32 format version, a u8
//! rank, u32 extents, then the payload as little-endian IEEE-754 f32 in
//! row-major order.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use vwt_core::Tensor;

use crate::error::{io_ctx, CliError, Result};

pub const MAGIC: [u8; 4] = *b"VWT1";
pub const VERSION: u32 = 1;

/// Serialize one tensor record (values quantized to f32).
pub fn write_record(w: &mut impl Write, tensor: &Tensor) -> io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let dims = tensor.dims();
    w.write_all(&[dims.len() as u8])?;
    for &d in dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in tensor.data() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Deserialize one tensor record; values widen back to f64.
pub fn read_record(r: &mut impl Read, what: &str) -> Result<Tensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| CliError::data(format!("{what}: {e}")))?;
    if magic != MAGIC {
        return Err(CliError::data(format!(
            "{what}: bad magic {magic:?}, expected \"VWT1\""
        )));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)
        .map_err(|e| CliError::data(format!("{what}: {e}")))?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(CliError::data(format!(
            "{what}: unsupported format version {version}"
        )));
    }
    let mut ndim = [0u8; 1];
    r.read_exact(&mut ndim)
        .map_err(|e| CliError::data(format!("{what}: {e}")))?;
    let mut dims = Vec::with_capacity(ndim[0] as usize);
    let mut numel: usize = 1;
    for _ in 0..ndim[0] {
        r.read_exact(&mut buf4)
            .map_err(|e| CliError::data(format!("{what}: {e}")))?;
        let d = u32::from_le_bytes(buf4) as usize;
        if d == 0 {
            return Err(CliError::data(format!("{what}: zero extent")));
        }
        numel = numel
            .checked_mul(d)
            .ok_or_else(|| CliError::data(format!("{what}: extents overflow")))?;
        dims.push(d);
    }
    let mut data = Vec::with_capacity(numel);
    for _ in 0..numel {
        r.read_exact(&mut buf4)
            .map_err(|e| CliError::data(format!("{what}: truncated payload: {e}")))?;
        data.push(f32::from_le_bytes(buf4) as f64);
    }
    Tensor::from_vec(&dims, data).map_err(|e| CliError::data(format!("{what}: {e}")))
}

pub fn write_file(path: &Path, tensor: &Tensor) -> Result<()> {
    let file = File::create(path).map_err(|e| io_ctx(path, e))?;
    let mut w = BufWriter::new(file);
    write_record(&mut w, tensor).map_err(|e| io_ctx(path, e))?;
    w.flush().map_err(|e| io_ctx(path, e))
}

/// Read a file holding exactly one tensor record.
pub fn read_file(path: &Path) -> Result<Tensor> {
    let file = File::open(path).map_err(|e| io_ctx(path, e))?;
    let mut r = BufReader::new(file);
    let tensor = read_record(&mut r, &path.display().to_string())?;
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(tensor),
        Ok(_) => Err(CliError::data(format!(
            "{}: trailing bytes after tensor record",
            path.display()
        ))),
        Err(e) => Err(io_ctx(path, e)),
    }
}
