//! WARTEM1 binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "WARTEM1"                      7-byte magic
//! u64 input_length
//! u64 code_length
//! u64 pool_size
//! u64 activation                 0 = relu, 1 = identity
//! u64 lambda                     IEEE-754 bits of the f64 coupling weight
//! u64 block_count
//! (u64 filters, u64 kernel)      repeated block_count times
//! f64 parameters                 left encoder, left decoder, right encoder,
//!                                right decoder; per layer weights then biases
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, WartemError};
use crate::twin::{Activation, AeConfig, AutoEncoder, ConvBlock, TwinAe};

pub const MAGIC: &[u8; 7] = b"WARTEM1";

/// Upper bound on header integers, to reject garbage before allocating.
const MAX_HEADER_VALUE: u64 = 1 << 24;

fn put(out: &mut impl Write, v: u64) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get(input: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    input
        .read_exact(&mut buf)
        .map_err(|_| WartemError::Checkpoint("truncated header".into()))?;
    Ok(u64::from_le_bytes(buf))
}

fn get_bounded(input: &mut impl Read, what: &str) -> Result<usize> {
    let v = get(input)?;
    if v > MAX_HEADER_VALUE {
        return Err(WartemError::Checkpoint(format!("{what} {v} is implausible")));
    }
    Ok(v as usize)
}

pub fn write_twin<W: Write>(twin: &TwinAe, out: &mut W) -> Result<()> {
    let c = &twin.config;
    out.write_all(MAGIC)?;
    put(out, c.input_length as u64)?;
    put(out, c.code_length as u64)?;
    put(out, c.pool_size as u64)?;
    put(out, c.activation.code())?;
    put(out, c.lambda.to_bits())?;
    put(out, c.conv_blocks.len() as u64)?;
    for b in &c.conv_blocks {
        put(out, b.filters as u64)?;
        put(out, b.kernel as u64)?;
    }
    for net in [
        &twin.left.encoder,
        &twin.left.decoder,
        &twin.right.encoder,
        &twin.right.decoder,
    ] {
        net.write_params(out)?;
    }
    Ok(())
}

pub fn read_twin<R: Read>(input: &mut R) -> Result<TwinAe> {
    let mut magic = [0u8; 7];
    input
        .read_exact(&mut magic)
        .map_err(|_| WartemError::Checkpoint("file too short for magic".into()))?;
    if &magic != MAGIC {
        return Err(WartemError::Checkpoint("bad magic; not a WARTEM1 file".into()));
    }
    let input_length = get_bounded(input, "input length")?;
    let code_length = get_bounded(input, "code length")?;
    let pool_size = get_bounded(input, "pool size")?;
    let activation = Activation::from_code(get(input)?)?;
    let lambda = f64::from_bits(get(input)?);
    let blocks = get_bounded(input, "block count")?;
    let conv_blocks = (0..blocks)
        .map(|_| {
            Ok(ConvBlock {
                filters: get_bounded(input, "filter count")?,
                kernel: get_bounded(input, "kernel size")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let config = AeConfig {
        input_length,
        code_length,
        conv_blocks,
        pool_size,
        activation,
        lambda,
    };
    config
        .validate()
        .map_err(|e| WartemError::Checkpoint(format!("invalid architecture: {e}")))?;

    let mut left = AutoEncoder::build(&config, 0)?;
    let mut right = AutoEncoder::build(&config, 0)?;
    for net in [
        &mut left.encoder,
        &mut left.decoder,
        &mut right.encoder,
        &mut right.decoder,
    ] {
        net.read_params(input).map_err(|e| match e {
            WartemError::Io(_) => WartemError::Checkpoint("truncated parameter block".into()),
            other => other,
        })?;
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(WartemError::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(TwinAe { left, right, config })
}

pub fn to_bytes(twin: &TwinAe) -> Vec<u8> {
    let mut out = Vec::new();
    write_twin(twin, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn save_twin(twin: &TwinAe, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(twin))?;
    Ok(())
}

pub fn load_twin(path: impl AsRef<Path>) -> Result<TwinAe> {
    let bytes = fs::read(path)?;
    read_twin(&mut bytes.as_slice())
}
