//! Binary checkpoint container.
//!
//! Layout: 8 magic bytes `INKPCKPT`, `u32` LE format version, `u32` LE
//! header length, a UTF-8 JSON header, then every weight blob as
//! little-endian `f32` in header order (encoder first, then decoder; within
//! each network kernel then bias per convolution).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{LayerKind, LayerSpec};
use crate::net::Sequential;

use super::losses::{LossToggles, LossWeights, SparseReduction};
use super::network::{Decoder, Encoder, StyleNet};

pub const MAGIC: &[u8; 8] = b"INKPCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub iteration: u64,
    pub seed: u64,
    pub weights: LossWeights,
    pub toggles: LossToggles,
    #[serde(default)]
    pub sparse_reduction: SparseReduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetHeader {
    layers: Vec<LayerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    taps: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BlobEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    encoder: NetHeader,
    decoder: NetHeader,
    meta: TrainMeta,
    blobs: Vec<BlobEntry>,
}

/// Network configuration, weights and training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: StyleNet,
    pub meta: TrainMeta,
}

fn blob_entries(prefix: &str, net: &Sequential) -> Vec<BlobEntry> {
    let mut out = Vec::new();
    for (i, l) in net.layers.iter().enumerate() {
        if let LayerSpec::Conv2d(c) = l {
            out.push(BlobEntry {
                name: format!("{prefix}.{i}.kernel"),
                len: c.kernel.len(),
            });
            out.push(BlobEntry {
                name: format!("{prefix}.{i}.bias"),
                len: c.bias.len(),
            });
        }
    }
    out
}

impl Checkpoint {
    /// Fails when the decoder cannot consume the encoder output.
    pub fn new(net: StyleNet, meta: TrainMeta) -> Result<Self> {
        let out_c = net.encoder.out_channels();
        if net.decoder.in_channels() != Some(out_c) {
            return Err(Error::Format(format!(
                "decoder expects {:?} channels but the encoder produces {out_c}",
                net.decoder.in_channels()
            )));
        }
        Ok(Self { net, meta })
    }

    fn header(&self) -> Header {
        let mut blobs = blob_entries("encoder", &self.net.encoder.net);
        blobs.extend(blob_entries("decoder", &self.net.decoder.net));
        Header {
            encoder: NetHeader {
                layers: self.net.encoder.net.kinds(),
                taps: Some(self.net.encoder.taps.clone()),
            },
            decoder: NetHeader {
                layers: self.net.decoder.net.kinds(),
                taps: None,
            },
            meta: self.meta,
            blobs,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let params = self
            .net
            .encoder
            .net
            .params()
            .into_iter()
            .chain(self.net.decoder.net.params());
        let mut out = Vec::with_capacity(16 + header.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in params {
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let take = |cur: &mut &[u8], n: usize, what: &str| -> Result<Vec<u8>> {
            if cur.len() < n {
                return Err(Error::Format(format!("checkpoint truncated while reading {what}")));
            }
            let (a, b) = cur.split_at(n);
            *cur = b;
            Ok(a.to_vec())
        };
        if take(&mut cur, 8, "magic")? != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic bytes)".into()));
        }
        let version = u32::from_le_bytes(take(&mut cur, 4, "version")?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let hlen = u32::from_le_bytes(take(&mut cur, 4, "header length")?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(&take(&mut cur, hlen, "header")?)
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;

        let taps = header
            .encoder
            .taps
            .clone()
            .ok_or_else(|| Error::Format("checkpoint header lacks encoder taps".into()))?;
        let mut enc_net = Sequential::from_kinds(&header.encoder.layers);
        let mut dec_net = Sequential::from_kinds(&header.decoder.layers);
        let mut expected = blob_entries("encoder", &enc_net);
        expected.extend(blob_entries("decoder", &dec_net));
        if expected != header.blobs {
            return Err(Error::Format("blob manifest does not match the layer list".into()));
        }
        let total: usize = expected.iter().map(|b| b.len).sum();
        if cur.len() != total * 4 {
            return Err(Error::Format(format!(
                "checkpoint holds {} weight bytes, layer list needs {}",
                cur.len(),
                total * 4
            )));
        }
        for p in enc_net.params_mut().into_iter().chain(dec_net.params_mut()) {
            let n = p.len();
            let (chunk, rest) = cur.split_at(n * 4);
            for (v, b) in p.data_mut().iter_mut().zip(chunk.chunks_exact(4)) {
                *v = f32::from_le_bytes(b.try_into().unwrap());
            }
            cur = rest;
        }
        let encoder = Encoder::new(enc_net, taps).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(
            StyleNet {
                encoder,
                decoder: Decoder::new(dec_net),
            },
            header.meta,
        )
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())
            .map_err(|e| Error::Data(format!("writing checkpoint: {e}")))
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Data(format!("reading checkpoint: {e}")))?;
        Self::from_bytes(&bytes)
    }
}
