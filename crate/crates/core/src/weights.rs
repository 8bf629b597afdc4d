//! `MGSTW001` weights files.
//!
//! Little-endian layout:
//!
//! ```text
//! "MGSTW001"
//! u32 layer_count
//! per layer: u8 kind (0 conv, 1 relu, 2 avgpool)
//!   conv: u32 in, u32 out, u32 kh=3, u32 kw=3,
//!         out*in*9 f32 weights [out][in][kh][kw], out f32 biases
//! u32 n_style, n_style x u32
//! u32 n_content, n_content x u32
//! optional attention section:
//!   "ATTN0001", per tap layer: u32 width, width x f32 weights, f32 bias
//! ```

use std::path::Path;

use crate::attention::{AttentionSubnet, AttentionUnit};
use crate::error::{Error, Result};
use crate::net::{ConvLayer, LayerSpec, NetworkSpec};

pub const MAGIC: &[u8; 8] = b"MGSTW001";
pub const ATTENTION_MAGIC: &[u8; 8] = b"ATTN0001";

const KIND_CONV: u8 = 0;
const KIND_RELU: u8 = 1;
const KIND_POOL: u8 = 2;

/// Sanity bound on counts read from a file before allocating.
const MAX_COUNT: u32 = 1 << 24;

pub fn load_weights(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    Ok(load_weights_with_attention(path)?.0)
}

pub fn load_weights_with_attention(path: impl AsRef<Path>) -> Result<(NetworkSpec, Option<AttentionSubnet>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_weights(
    spec: &NetworkSpec,
    attention: Option<&AttentionSubnet>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(spec, attention)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode(spec: &NetworkSpec, attention: Option<&AttentionSubnet>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, spec.layers().len());
    for layer in spec.layers() {
        match layer {
            LayerSpec::Conv(c) => {
                out.push(KIND_CONV);
                put_u32(&mut out, c.in_channels);
                put_u32(&mut out, c.out_channels);
                put_u32(&mut out, 3);
                put_u32(&mut out, 3);
                for &w in c.weights.iter().chain(&c.bias) {
                    out.extend_from_slice(&(w as f32).to_le_bytes());
                }
            }
            LayerSpec::Relu => out.push(KIND_RELU),
            LayerSpec::AvgPool => out.push(KIND_POOL),
        }
    }
    for ids in [spec.style_layers(), spec.content_layers()] {
        put_u32(&mut out, ids.len());
        for &id in ids {
            put_u32(&mut out, id);
        }
    }
    if let Some(AttentionSubnet::Learned(units)) = attention {
        if units.len() != spec.tap_layers().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} attention units for {} tap layers",
                units.len(),
                spec.tap_layers().len()
            )));
        }
        out.extend_from_slice(ATTENTION_MAGIC);
        for u in units {
            put_u32(&mut out, u.weights.len());
            for &w in &u.weights {
                out.extend_from_slice(&(w as f32).to_le_bytes());
            }
            out.extend_from_slice(&(u.bias as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "file truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let n = self.u32(what)?;
        if n > MAX_COUNT {
            return Err(Error::Format(format!("{what} count {n} is implausible")));
        }
        Ok(n as usize)
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let b = self.take(n * 4, what)?;
        b.chunks_exact(4)
            .map(|c| {
                let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                if v.is_finite() {
                    Ok(v as f64)
                } else {
                    Err(Error::Format(format!("non-finite value in {what}")))
                }
            })
            .collect()
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn decode(bytes: &[u8]) -> Result<(NetworkSpec, Option<AttentionSubnet>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, expected MGSTW001".into()));
    }
    let n_layers = r.count("layer")?;
    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        layers.push(match r.u8("layer kind")? {
            KIND_CONV => {
                let cin = r.count("in_channels")?;
                let cout = r.count("out_channels")?;
                let (kh, kw) = (r.u32("kh")?, r.u32("kw")?);
                if (kh, kw) != (3, 3) {
                    return Err(Error::Format(format!(
                        "layer {i}: only 3x3 kernels are supported, got {kh}x{kw}"
                    )));
                }
                let weights = r.f32s(cout * cin * 9, "conv weights")?;
                let bias = r.f32s(cout, "conv bias")?;
                LayerSpec::Conv(
                    ConvLayer::new(cin, cout, weights, bias)
                        .map_err(|e| Error::Format(format!("layer {i}: {e}")))?,
                )
            }
            KIND_RELU => LayerSpec::Relu,
            KIND_POOL => LayerSpec::AvgPool,
            k => return Err(Error::Format(format!("layer {i}: unknown kind {k}"))),
        });
    }
    let mut ids = [Vec::new(), Vec::new()];
    for (slot, what) in ids.iter_mut().zip(["style ids", "content ids"]) {
        let n = r.count(what)?;
        for _ in 0..n {
            slot.push(r.u32(what)? as usize);
        }
    }
    let [style, content] = ids;
    let spec = NetworkSpec::new(layers, style, content)
        .map_err(|e| Error::Format(format!("invalid network: {e}")))?;

    let attention = if r.at_end() {
        None
    } else {
        if r.take(8, "attention magic")? != ATTENTION_MAGIC {
            return Err(Error::Format("trailing bytes are not an ATTN0001 section".into()));
        }
        let mut units = Vec::with_capacity(spec.tap_layers().len());
        for _ in spec.tap_layers() {
            let width = r.count("attention width")?;
            let weights = r.f32s(width, "attention weights")?;
            let bias = r.f32s(1, "attention bias")?[0];
            units.push(AttentionUnit { weights, bias });
        }
        if !r.at_end() {
            return Err(Error::Format("trailing bytes after attention section".into()));
        }
        Some(AttentionSubnet::learned(units)?)
    };
    Ok((spec, attention))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::default_network;

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = default_network(7);
        let (back, attn) = decode(&encode(&spec, None).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(attn.is_none());
    }

    #[test]
    fn attention_section_round_trip() {
        let spec = default_network(7);
        let units: Vec<_> = [16usize, 32, 64]
            .iter()
            .map(|&n| AttentionUnit {
                weights: (0..=n).map(|k| k as f64 * 0.125 - 1.0).collect(),
                bias: -0.5,
            })
            .collect();
        let subnet = AttentionSubnet::learned(units).unwrap();
        let (back, attn) = decode(&encode(&spec, Some(&subnet)).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(attn, Some(subnet));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&default_network(1), None).unwrap();
        bytes[..8].copy_from_slice(b"XXXXXXXX");
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_and_non_finite() {
        let bytes = encode(&default_network(1), None).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));

        let mut bad = bytes.clone();
        // First conv weight starts after magic, count, kind and four u32s.
        let off = 8 + 4 + 1 + 16;
        bad[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&bad), Err(Error::Format(_))));

        let mut extra = bytes;
        extra.extend_from_slice(b"junk");
        assert!(matches!(decode(&extra), Err(Error::Format(_))));
    }

    #[test]
    fn header_shape_mismatch() {
        let mut bytes = encode(&default_network(1), None).unwrap();
        // Claim the first conv has 4 input channels instead of 3.
        bytes[13..17].copy_from_slice(&4u32.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }
}
