//! Versioned parameter checkpoints.
//!
//! Layout: the magic line `GUIDE-CKPT-v1`, one line of JSON describing
//! metadata, layer descriptors and optimizer layouts, then every parameter
//! array as little-endian `f64` in declaration order (networks first, then
//! each optimizer's first and second moments).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{LayerSpec, Network};
use super::optim::{AdamConfig, AdamState};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &str = "GUIDE-CKPT-v1";
const MAGIC_PREFIX: &str = "GUIDE-CKPT-";

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Checkpoint {
    pub metadata: serde_json::Value,
    pub networks: Vec<(String, Network)>,
    pub optimizers: Vec<(String, AdamState)>,
}

#[derive(Serialize, Deserialize)]
struct NetworkHeader {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    name: String,
    config: AdamConfig,
    step: u64,
    shapes: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    metadata: serde_json::Value,
    networks: Vec<NetworkHeader>,
    optimizers: Vec<OptimizerHeader>,
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Result<&Network> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
            .ok_or_else(|| Error::Checkpoint(format!("missing network '{name}'")))
    }

    pub fn optimizer(&self, name: &str) -> Result<&AdamState> {
        self.optimizers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Checkpoint(format!("missing optimizer '{name}'")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            metadata: self.metadata.clone(),
            networks: self
                .networks
                .iter()
                .map(|(name, net)| NetworkHeader {
                    name: name.clone(),
                    input_shape: net.input_shape().to_vec(),
                    layers: net.specs().to_vec(),
                })
                .collect(),
            optimizers: self
                .optimizers
                .iter()
                .map(|(name, s)| OptimizerHeader {
                    name: name.clone(),
                    config: s.config,
                    step: s.step,
                    shapes: s.m.iter().map(|t| t.shape().to_vec()).collect(),
                })
                .collect(),
        };
        writeln!(w, "{MAGIC}")?;
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        let tensors = self
            .networks
            .iter()
            .flat_map(|(_, n)| n.params())
            .chain(
                self.optimizers
                    .iter()
                    .flat_map(|(_, s)| s.m.iter().chain(&s.v)),
            );
        let mut buf = Vec::new();
        for t in tensors {
            buf.clear();
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)
            .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
        let magic = line.trim_end_matches('\n');
        if magic != MAGIC {
            return Err(Error::Checkpoint(if magic.starts_with(MAGIC_PREFIX) {
                format!("unsupported checkpoint version '{magic}', expected '{MAGIC}'")
            } else {
                "not a checkpoint file (bad magic header)".to_string()
            }));
        }
        line.clear();
        r.read_line(&mut line)
            .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
        let header: Header = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::Checkpoint(format!("corrupt header: {e}")))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        if body.len() % 8 != 0 {
            return Err(Error::Checkpoint("truncated parameter data".into()));
        }
        let mut take = |shape: &[usize]| -> Result<Tensor> {
            let n: usize = shape.iter().product();
            let data: Vec<f64> = values.by_ref().take(n).collect();
            if data.len() != n {
                return Err(Error::Checkpoint("truncated parameter data".into()));
            }
            Tensor::new(shape, data)
        };

        let mut networks = Vec::with_capacity(header.networks.len());
        for h in header.networks {
            let mut net = Network::zeroed(&h.input_shape, &h.layers)
                .map_err(|e| Error::Checkpoint(format!("network '{}': {e}", h.name)))?;
            let shapes: Vec<Vec<usize>> = net.params().map(|p| p.shape().to_vec()).collect();
            for (p, shape) in net.params_mut().zip(shapes) {
                *p = take(&shape)?;
            }
            networks.push((h.name, net));
        }
        let mut optimizers = Vec::with_capacity(header.optimizers.len());
        for h in header.optimizers {
            let m = h.shapes.iter().map(|s| take(s)).collect::<Result<Vec<_>>>()?;
            let v = h.shapes.iter().map(|s| take(s)).collect::<Result<Vec<_>>>()?;
            optimizers.push((
                h.name,
                AdamState {
                    config: h.config,
                    step: h.step,
                    m,
                    v,
                },
            ));
        }
        if values.next().is_some() {
            return Err(Error::Checkpoint("trailing data after parameters".into()));
        }
        Ok(Checkpoint {
            metadata: header.metadata,
            networks,
            optimizers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let f = fs::File::create(&tmp)?;
            self.write_to(std::io::BufWriter::new(f))?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::read_from(fs::File::open(path)?)
    }
}
