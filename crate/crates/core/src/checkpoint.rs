//! Binary checkpoint: `SFCG` magic, u16 LE version, u32 LE header length, a
//! JSON header (configuration, counters, history, tensor table) and the
//! tensor payloads as little-endian f32.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::connectome::Domain;
use crate::error::{Error, Result};
use crate::model::{Discriminator, Generator, ModelConfig, Models};
use crate::nn::{AdamState, ParamSet, Tensor};
use crate::trainer::{TrainConfig, TrainHistory};

pub const MAGIC: &[u8; 4] = b"SFCG";
pub const VERSION: u16 = 1;

/// Everything needed to translate with, or to continue training, a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub train: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub models: Models<f32>,
    /// Optimizer over (G_FC, G_SC).
    pub adam_g: AdamState<f32>,
    /// Optimizer over (D_FC, D_SC).
    pub adam_d: AdamState<f32>,
    pub replay_fc: Vec<Vec<f32>>,
    pub replay_sc: Vec<Vec<f32>>,
    pub history: TrainHistory,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    train: TrainConfig,
    epoch: usize,
    adam_g: AdamMeta,
    adam_d: AdamMeta,
    history: TrainHistory,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamMeta {
    step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

/// Offsets and lengths count f32 elements from the start of the payload.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

const NETWORKS: [&str; 4] = ["g_fc", "g_sc", "d_fc", "d_sc"];

impl ModelCheckpoint {
    pub fn model_config(&self) -> &ModelConfig {
        self.models.config()
    }

    pub fn ensure_compatible(&self, expected: &ModelConfig) -> Result<()> {
        let found = self.model_config();
        if found != expected {
            return Err(Error::Shape(format!(
                "checkpoint was built for n = {}, widths {:?}/{:?}; this run needs n = {}, widths {:?}/{:?}",
                found.n, found.gen_widths, found.disc_widths, expected.n, expected.gen_widths, expected.disc_widths
            )));
        }
        Ok(())
    }

    fn param_sets(&self) -> [&ParamSet<f32>; 4] {
        let m = &self.models;
        [m.g_fc.params(), m.g_sc.params(), m.d_fc.params(), m.d_sc.params()]
    }

    /// Tensors in payload order, with their table names.
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let mut out = Vec::new();
        let sets = self.param_sets();
        for (net, set) in NETWORKS.iter().zip(sets) {
            for p in set.iter() {
                out.push((format!("{net}/{}", p.name), p.value.shape().to_vec(), p.value.data()));
            }
        }
        for (group, adam, nets) in [("adam_g", &self.adam_g, 0..2), ("adam_d", &self.adam_d, 2..4)] {
            let names: Vec<String> = nets
                .flat_map(|k| sets[k].iter().map(move |p| format!("{}/{}", NETWORKS[k], p.name)))
                .collect();
            for (moment, tensors) in [("m", &adam.first_moment), ("v", &adam.second_moment)] {
                for (name, t) in names.iter().zip(tensors) {
                    out.push((format!("{group}.{moment}/{name}"), t.shape().to_vec(), t.data()));
                }
            }
        }
        let n = self.model_config().n;
        for (pool, items) in [("replay_fc", &self.replay_fc), ("replay_sc", &self.replay_sc)] {
            for (i, item) in items.iter().enumerate() {
                out.push((format!("{pool}/{i}"), vec![n, n], item.as_slice()));
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = self.named_tensors();
        let mut table = Vec::with_capacity(tensors.len());
        let mut offset = 0;
        for (name, shape, data) in &tensors {
            table.push(TensorEntry {
                name: name.clone(),
                shape: shape.clone(),
                offset,
                len: data.len(),
            });
            offset += data.len();
        }
        let meta = |a: &AdamState<f32>| AdamMeta {
            step: a.step,
            beta1: a.beta1,
            beta2: a.beta2,
            epsilon: a.epsilon,
        };
        let header = Header {
            model: *self.model_config(),
            train: self.train,
            epoch: self.epoch,
            adam_g: meta(&self.adam_g),
            adam_d: meta(&self.adam_d),
            history: self.history.clone(),
            tensors: table,
        };
        let json = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(json.len())
            .map_err(|_| Error::Checkpoint("header exceeds 4 GiB".into()))?;
        let mut out = Vec::with_capacity(10 + json.len() + 4 * offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&json);
        for (_, _, data) in &tensors {
            for v in *data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 || &bytes[..4] != MAGIC {
            return Err(Error::Checkpoint("not an SFCG checkpoint (bad magic bytes)".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {VERSION})"
            )));
        }
        let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
        let payload_start = 10 + header_len;
        if bytes.len() < payload_start {
            return Err(Error::Checkpoint("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&bytes[10..payload_start])
            .map_err(|e| Error::Checkpoint(format!("malformed header: {e}")))?;
        let payload = &bytes[payload_start..];
        let total: usize = header.tensors.iter().map(|t| t.len).sum();
        if payload.len() != 4 * total {
            return Err(Error::Checkpoint(format!(
                "payload holds {} bytes, tensor table needs {}{}",
                payload.len(),
                4 * total,
                if payload.len() < 4 * total { " (truncated file)" } else { "" }
            )));
        }
        let mut reader = TableReader {
            entries: &header.tensors,
            payload,
            next: 0,
        };

        let cfg = header.model;
        let mut sets = Vec::new();
        for (net, template) in NETWORKS.iter().zip(template_sets(&cfg)?) {
            let mut set = ParamSet::new();
            for p in template.iter() {
                let t = reader.take(&format!("{net}/{}", p.name), p.value.shape())?;
                set.add(p.name.clone(), t)?;
            }
            sets.push(set);
        }
        let mut read_adam = |group: &str, meta: &AdamMeta, nets: &[&str], templates: &[ParamSet<f32>]| {
            let mut moments = [Vec::new(), Vec::new()];
            for (k, moment) in ["m", "v"].iter().enumerate() {
                for (net, set) in nets.iter().zip(templates) {
                    for p in set.iter() {
                        moments[k].push(reader.take(&format!("{group}.{moment}/{net}/{}", p.name), p.value.shape())?);
                    }
                }
            }
            let [first_moment, second_moment] = moments;
            Ok::<_, Error>(AdamState {
                first_moment,
                second_moment,
                step: meta.step,
                beta1: meta.beta1,
                beta2: meta.beta2,
                epsilon: meta.epsilon,
            })
        };
        let adam_g = read_adam("adam_g", &header.adam_g, &NETWORKS[..2], &sets[..2])?;
        let adam_d = read_adam("adam_d", &header.adam_d, &NETWORKS[2..], &sets[2..])?;
        let mut replay = [Vec::new(), Vec::new()];
        for (k, pool) in ["replay_fc", "replay_sc"].iter().enumerate() {
            while reader.peek_prefix(&format!("{pool}/")) {
                let t = reader.take(&format!("{pool}/{}", replay[k].len()), &[cfg.n, cfg.n])?;
                replay[k].push(t.into_data());
            }
        }
        if let Some(extra) = header.tensors.get(reader.next) {
            return Err(Error::Checkpoint(format!("unexpected tensor {}", extra.name)));
        }

        let mut sets = sets.into_iter();
        let mut next_set = || sets.next().expect("four parameter sets");
        let models = Models {
            g_fc: Generator::from_params(Domain::Fc, cfg, next_set())?,
            g_sc: Generator::from_params(Domain::Sc, cfg, next_set())?,
            d_fc: Discriminator::from_params(Domain::Fc, cfg, next_set())?,
            d_sc: Discriminator::from_params(Domain::Sc, cfg, next_set())?,
        };
        let [replay_fc, replay_sc] = replay;
        Ok(ModelCheckpoint {
            train: header.train,
            epoch: header.epoch,
            models,
            adam_g,
            adam_d,
            replay_fc,
            replay_sc,
            history: header.history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Parameter names and shapes implied by a configuration.
fn template_sets(cfg: &ModelConfig) -> Result<Vec<ParamSet<f32>>> {
    let m = crate::model::init_models::<f32>(cfg, 0)
        .map_err(|e| Error::Checkpoint(format!("invalid model configuration in header: {e}")))?;
    Ok(vec![
        m.g_fc.params().clone(),
        m.g_sc.params().clone(),
        m.d_fc.params().clone(),
        m.d_sc.params().clone(),
    ])
}

struct TableReader<'a> {
    entries: &'a [TensorEntry],
    payload: &'a [u8],
    next: usize,
}

impl TableReader<'_> {
    fn peek_prefix(&self, prefix: &str) -> bool {
        self.entries.get(self.next).is_some_and(|e| e.name.starts_with(prefix))
    }

    fn take(&mut self, name: &str, shape: &[usize]) -> Result<Tensor<f32>> {
        let entry = self
            .entries
            .get(self.next)
            .ok_or_else(|| Error::Checkpoint(format!("tensor table ends before {name}")))?;
        if entry.name != name {
            return Err(Error::Checkpoint(format!(
                "tensor table has {} where {name} was expected",
                entry.name
            )));
        }
        if entry.shape != shape || entry.len != shape.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "tensor {name} has shape {:?} (len {}), expected {shape:?}",
                entry.shape, entry.len
            )));
        }
        let bytes = self
            .payload
            .get(4 * entry.offset..4 * (entry.offset + entry.len))
            .ok_or_else(|| Error::Checkpoint(format!("tensor {name} lies outside the payload")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        self.next += 1;
        Tensor::new(shape.to_vec(), data)
    }
}
