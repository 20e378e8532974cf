//! Versioned binary checkpoint format.
//!
//! Layout: magic bytes `LTAE`, little-endian u32 format version, the config
//! as a canonical key-sorted JSON block, then raw parameter arrays as
//! little-endian f64: encoder layers, latent transform, decoder layers,
//! sampling statistics and the training history. Serialization is
//! deterministic, so identical bundles produce identical bytes.

use std::path::Path;

use super::{LossRecord, ModelBundle, ModelConfig, SamplingStats};
use crate::error::{Error, Result};
use crate::latent::LatentTransform;
use crate::nn::{Activation, DenseLayer, DenseMatrix, LayerSpec, Mlp};

const MAGIC: &[u8; 4] = b"LTAE";
const VERSION: u32 = 1;

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Softplus => 0,
        Activation::Sigmoid => 1,
        Activation::Tanh => 2,
        Activation::Relu => 3,
        Activation::LeakyRelu => 4,
        Activation::Linear => 5,
    }
}

fn activation_from_code(code: u8, offset: u64) -> Result<Activation> {
    Ok(match code {
        0 => Activation::Softplus,
        1 => Activation::Sigmoid,
        2 => Activation::Tanh,
        3 => Activation::Relu,
        4 => Activation::LeakyRelu,
        5 => Activation::Linear,
        other => {
            return Err(Error::Checkpoint {
                offset,
                reason: format!("unknown activation code {other}"),
            })
        }
    })
}

/// Canonical JSON: serde_json's default map is ordered, so converting
/// through `Value` sorts object keys.
fn canonical_config_json(config: &ModelConfig) -> Result<Vec<u8>> {
    let value = serde_json::to_value(config)
        .map_err(|e| Error::InvalidConfig(format!("config not serializable: {e}")))?;
    Ok(value.to_string().into_bytes())
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Writer {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, values: &[f64]) {
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn mlp(&mut self, net: &Mlp) {
        self.u32(net.layers().len() as u32);
        for layer in net.layers() {
            let spec = layer.spec();
            self.u32(spec.in_dim as u32);
            self.u32(spec.out_dim as u32);
            self.u8(activation_code(spec.activation));
            self.f64_slice(layer.weight().data());
            self.f64_slice(layer.bias());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Reader<'a> {
        Reader { buf, offset: 0 }
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Checkpoint {
            offset: self.offset as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.buf.len() {
            return Err(self.err(format!(
                "unexpected end of file (need {n} bytes, {} left)",
                self.buf.len() - self.offset
            )));
        }
        let slice = &self.buf[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn mlp(&mut self, expected: &[LayerSpec]) -> Result<Mlp> {
        let n_layers = self.u32()? as usize;
        if n_layers != expected.len() {
            return Err(self.err(format!(
                "expected {} layers, file has {n_layers}",
                expected.len()
            )));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for spec in expected {
            let in_dim = self.u32()? as usize;
            let out_dim = self.u32()? as usize;
            let activation = activation_from_code(self.u8()?, self.offset as u64 - 1)?;
            let stored = LayerSpec::new(in_dim, out_dim, activation)
                .map_err(|e| self.err(e.to_string()))?;
            if stored != *spec {
                return Err(self.err(format!(
                    "layer spec mismatch: config implies {spec:?}, file has {stored:?}"
                )));
            }
            let weight = DenseMatrix::from_vec(out_dim, in_dim, self.f64_vec(out_dim * in_dim)?)
                .map_err(|e| self.err(e.to_string()))?;
            let bias = self.f64_vec(out_dim)?;
            layers.push(DenseLayer::from_parts(stored, weight, bias).map_err(|e| self.err(e.to_string()))?);
        }
        Mlp::from_layers(layers).map_err(|e| self.err(e.to_string()))
    }
}

/// Serialize a bundle to its canonical byte representation.
pub fn bundle_to_bytes(bundle: &ModelBundle) -> Result<Vec<u8>> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    let config = canonical_config_json(&bundle.config)?;
    w.u64(config.len() as u64);
    w.buf.extend_from_slice(&config);

    w.mlp(&bundle.encoder);

    match &bundle.transform {
        Some(t) => {
            w.u8(1);
            w.u32(t.dim() as u32);
            w.f64_slice(&t.alpha);
            w.f64_slice(&t.beta);
        }
        None => w.u8(0),
    }

    w.mlp(&bundle.decoder);

    match &bundle.sampling_stats {
        None => w.u8(0),
        Some(SamplingStats::Gaussian { mean, std }) => {
            w.u8(1);
            w.u32(mean.len() as u32);
            w.f64_slice(mean);
            w.f64_slice(std);
        }
        Some(SamplingStats::Uniform { min, max }) => {
            w.u8(2);
            w.u32(min.len() as u32);
            w.f64_slice(min);
            w.f64_slice(max);
        }
        Some(SamplingStats::StandardNormal { dim }) => {
            w.u8(3);
            w.u32(*dim as u32);
        }
    }

    w.u64(bundle.training_history.len() as u64);
    for record in &bundle.training_history {
        w.f64_slice(&[record.recon, record.latent]);
    }
    Ok(w.buf)
}

/// Deserialize a bundle, validating structure against its embedded config.
pub fn bundle_from_bytes(bytes: &[u8]) -> Result<ModelBundle> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint {
            offset: 0,
            reason: format!("bad magic {magic:02x?}, expected {MAGIC:02x?}"),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported version {version}, expected {VERSION}")));
    }
    let config_len = r.u64()? as usize;
    let config_bytes = r.take(config_len)?;
    let config: ModelConfig = serde_json::from_slice(config_bytes)
        .map_err(|e| Error::Checkpoint {
            offset: 16,
            reason: format!("config block: {e}"),
        })?;
    config.validate()?;

    let encoder = r.mlp(&config.encoder_specs()?)?;

    let has_transform = r.u8()? != 0;
    if has_transform != config.variant.has_transform() {
        return Err(r.err(format!(
            "transform presence {} disagrees with variant {}",
            has_transform,
            config.variant.label()
        )));
    }
    let transform = if has_transform {
        let m = r.u32()? as usize;
        if m != config.latent_dim {
            return Err(r.err(format!(
                "transform dim {m} disagrees with latent_dim {}",
                config.latent_dim
            )));
        }
        let alpha = r.f64_vec(m)?;
        let beta = r.f64_vec(m)?;
        Some(LatentTransform {
            alpha,
            beta,
            variant: config
                .variant
                .normalization()
                .expect("transform variants have a normalization"),
        })
    } else {
        None
    };

    let decoder = r.mlp(&config.decoder_specs()?)?;

    let sampling_stats = match r.u8()? {
        0 => None,
        1 => {
            let dim = r.u32()? as usize;
            Some(SamplingStats::Gaussian {
                mean: r.f64_vec(dim)?,
                std: r.f64_vec(dim)?,
            })
        }
        2 => {
            let dim = r.u32()? as usize;
            Some(SamplingStats::Uniform {
                min: r.f64_vec(dim)?,
                max: r.f64_vec(dim)?,
            })
        }
        3 => Some(SamplingStats::StandardNormal {
            dim: r.u32()? as usize,
        }),
        other => return Err(r.err(format!("unknown sampling-stats tag {other}"))),
    };

    let history_len = r.u64()? as usize;
    let mut training_history = Vec::with_capacity(history_len.min(1 << 24));
    for _ in 0..history_len {
        let pair = r.f64_vec(2)?;
        training_history.push(LossRecord {
            recon: pair[0],
            latent: pair[1],
        });
    }
    if r.offset != bytes.len() {
        return Err(r.err(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - r.offset
        )));
    }

    Ok(ModelBundle {
        config,
        encoder,
        transform,
        decoder,
        sampling_stats,
        training_history,
    })
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, bundle_to_bytes(bundle)?)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    bundle_from_bytes(&std::fs::read(path)?)
}
