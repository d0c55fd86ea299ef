//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! magic "SGNETCKP" | u32 version | u32 c, h, w | u32 layer count
//! per layer: u8 tag, then
//!   0 conv:    u32 in, out, kh, kw, stride
//!   1 pool:    u8 kind (0 max, 1 average), u32 window, stride
//!   2 relu, 3 flatten: nothing
//!   4 dense:   u32 inputs, outputs
//! then for each conv/dense layer in order: f64 weights, f64 bias
//! ```

use super::{Conv, Dense, Layer, NetError, NetSpec, PoolKind, Shape};
use thiserror::Error;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SGNETCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("unknown layer tag {0}")]
    BadTag(u8),
    #[error("{0} trailing bytes after checkpoint")]
    TrailingBytes(usize),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub fn save_checkpoint(net: &NetSpec) -> Vec<u8> {
    let mut out = Vec::new();
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let s = net.input_shape();
    for v in [s.c, s.h, s.w, net.layers().len()] {
        u32le(&mut out, v);
    }
    for layer in net.layers() {
        match layer {
            Layer::Conv(c) => {
                out.push(0);
                for v in [c.in_channels, c.out_channels, c.kh, c.kw, c.stride] {
                    u32le(&mut out, v);
                }
            }
            Layer::Pool { kind, window, stride } => {
                out.push(1);
                out.push(match kind {
                    PoolKind::Max => 0,
                    PoolKind::Average => 1,
                });
                u32le(&mut out, *window);
                u32le(&mut out, *stride);
            }
            Layer::Relu => out.push(2),
            Layer::Flatten => out.push(3),
            Layer::Dense(d) => {
                out.push(4);
                u32le(&mut out, d.inputs);
                u32le(&mut out, d.outputs);
            }
        }
    }
    for v in net.params_flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let bytes = self.take(n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<NetSpec, CheckpointError> {
    let mut r = Reader { bytes };
    if r.take(8).map_err(|_| CheckpointError::BadMagic)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let input = Shape::new(r.u32()?, r.u32()?, r.u32()?);
    let count = r.u32()?;
    let mut layers = Vec::new();
    for _ in 0..count {
        layers.push(match r.u8()? {
            0 => Layer::Conv(Conv {
                in_channels: r.u32()?,
                out_channels: r.u32()?,
                kh: r.u32()?,
                kw: r.u32()?,
                stride: r.u32()?,
                weights: vec![],
                bias: vec![],
            }),
            1 => {
                let kind = match r.u8()? {
                    0 => PoolKind::Max,
                    1 => PoolKind::Average,
                    t => return Err(CheckpointError::BadTag(t)),
                };
                Layer::Pool { kind, window: r.u32()?, stride: r.u32()? }
            }
            2 => Layer::Relu,
            3 => Layer::Flatten,
            4 => Layer::Dense(Dense { inputs: r.u32()?, outputs: r.u32()?, weights: vec![], bias: vec![] }),
            t => return Err(CheckpointError::BadTag(t)),
        });
    }
    for layer in &mut layers {
        match layer {
            Layer::Conv(c) => {
                c.weights = r.f64s(c.out_channels * c.in_channels * c.kh * c.kw)?;
                c.bias = r.f64s(c.out_channels)?;
            }
            Layer::Dense(d) => {
                d.weights = r.f64s(d.inputs * d.outputs)?;
                d.bias = r.f64s(d.outputs)?;
            }
            _ => {}
        }
    }
    if !r.bytes.is_empty() {
        return Err(CheckpointError::TrailingBytes(r.bytes.len()));
    }
    Ok(NetSpec::new(input, layers)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let net = NetSpec::default_architecture(20, 8).unwrap();
        let bytes = save_checkpoint(&net);
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        assert_eq!(load_checkpoint(&bytes).unwrap(), net);
    }

    #[test]
    fn average_pool_round_trip() {
        let d = Dense { inputs: 4, outputs: 2, weights: vec![0.25; 8], bias: vec![-1.0, 1.0] };
        let layers = vec![Layer::Pool { kind: PoolKind::Average, window: 2, stride: 1 }, Layer::Flatten, Layer::Dense(d)];
        let net = NetSpec::new(Shape::new(1, 3, 3), layers).unwrap();
        assert_eq!(load_checkpoint(&save_checkpoint(&net)).unwrap(), net);
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = save_checkpoint(&NetSpec::default_architecture(12, 0).unwrap());
        assert_eq!(load_checkpoint(b"nope"), Err(CheckpointError::BadMagic));
        assert_eq!(load_checkpoint(&bytes[..bytes.len() - 3]), Err(CheckpointError::Truncated));
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(load_checkpoint(&extra), Err(CheckpointError::TrailingBytes(1)));
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert_eq!(load_checkpoint(&v2), Err(CheckpointError::UnsupportedVersion(2)));
        let mut tag = bytes;
        tag[28] = 9;
        assert_eq!(load_checkpoint(&tag), Err(CheckpointError::BadTag(9)));
    }
}
