//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "FDFCKPT\0"
//! version          u32
//! architecture id  u8       1, 2 or 3
//! level index      u8       0..=8
//! stride           u32
//! height, width, channels, hidden, classes   5 × u32
//! filter spec      u32 byte length + UTF-8 filter-spec text
//! parameters       f32 arrays: conv weights, conv bias, hidden weights,
//!                  hidden bias, output weights, output bias
//! ```

use std::fs;
use std::path::Path;

use super::{Architecture, Network, NetworkShape, SparseConvLayer};
use crate::kernel_geometry::parse_filter_specs;
use crate::nn::DenseLayer;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FDFCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(net: &Network<f32>, path: impl AsRef<Path>) -> Result<()> {
    let spec_text = net.filter_spec().to_text();
    let mut buf = Vec::with_capacity(64 + spec_text.len() + 4 * net.parameter_count());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(net.architecture().id());
    buf.push(net.level().index() as u8);
    let shape = net.shape();
    for v in [
        net.conv().stride(),
        shape.height,
        shape.width,
        shape.channels,
        shape.hidden,
        shape.classes,
    ] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(spec_text.len() as u32).to_le_bytes());
    buf.extend_from_slice(spec_text.as_bytes());
    for array in net.parameters() {
        for v in array {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or("truncated file")?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, dst: &mut [f32]) -> std::result::Result<(), String> {
        let raw = self.take(4 * dst.len())?;
        for (d, chunk) in dst.iter_mut().zip(raw.chunks_exact(4)) {
            *d = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<Network<f32>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err("not an FDF checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!(
            "unsupported format version {version}, expected {CHECKPOINT_VERSION}"
        ));
    }
    let arch_id = r.u8()?;
    let architecture = Architecture::from_id(arch_id).ok_or(format!("unknown architecture id {arch_id}"))?;
    let level = r.u8()? as usize;
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let [stride, height, width, channels, hidden, classes] = dims;
    let shape = NetworkShape {
        height,
        width,
        channels,
        hidden,
        classes,
    };
    let spec_len = r.u32()? as usize;
    let spec_text = std::str::from_utf8(r.take(spec_len)?).map_err(|e| format!("filter spec is not UTF-8: {e}"))?;
    let specs = parse_filter_specs(spec_text).map_err(|e| e.to_string())?;
    let spec = match specs.into_values().collect::<Vec<_>>().as_slice() {
        [only] => only.clone(),
        _ => return Err("checkpoint must embed exactly one filter spec".into()),
    };
    if spec.level().index() != level {
        return Err(format!(
            "header level {level} disagrees with embedded filter level {}",
            spec.level()
        ));
    }

    let conv =
        SparseConvLayer::zeros(spec, channels, architecture.conv_channels(), stride).map_err(|e| e.to_string())?;
    let (oh, ow) = conv.output_dims(height, width);
    let mut net = Network::from_layers(
        architecture,
        shape,
        conv,
        DenseLayer::zeros(oh * ow * architecture.conv_channels(), hidden).map_err(|e| e.to_string())?,
        DenseLayer::zeros(hidden, classes).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    for array in net.parameters_mut() {
        r.f32s(array)?;
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(net)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|reason| Error::Checkpoint {
        path: path.to_owned(),
        reason,
    })
}

/// Loads a checkpoint and rejects it unless it holds `architecture`.
pub fn load_checkpoint_expecting(path: impl AsRef<Path>, architecture: Architecture) -> Result<Network<f32>> {
    let path = path.as_ref();
    let net = load_checkpoint(path)?;
    if net.architecture() != architecture {
        return Err(Error::Checkpoint {
            path: path.to_owned(),
            reason: format!("holds {}, expected {architecture}", net.architecture()),
        });
    }
    Ok(net)
}
