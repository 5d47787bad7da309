//! Dataset-trained vector network: monitor readings → one tile of the field,
//! one independent network per tile.
//!
//! Weight file layout (all little-endian):
//!
//! ```text
//! "TFRW"  u32 version  u32 grid_n  u32 tile  u32 inputs  u32 models
//! u32 activation (0 tanh, 1 relu)  f64 shift  f64 scale
//! per model:  u32 layers, then (u32 in, u32 out) per layer,
//!             then per layer out×in f64 weights (row-major) and out f64 biases
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{non_increasing_over_windows, Activation, Dense, Loss, Mlp, Optimizer, Trainer};
use super::Normalization;
use crate::error::{Result, TfrError};
use crate::field::TemperatureField;
use crate::generator::sampling::splitmix64;
use crate::observation::{tile_pois, Observation};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"TFRW";
pub const WEIGHTS_VERSION: u32 = 1;
pub const LOSS_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpVectorConfig {
    pub hidden: Vec<usize>,
    /// Tile side in cells; `None` picks N/4 when it divides N, else N.
    pub tile: Option<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_epochs: usize,
    pub seed: u64,
}

impl Default for MlpVectorConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512, 512],
            tile: None,
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 32,
            warmup_epochs: 50,
            seed: 0,
        }
    }
}

impl MlpVectorConfig {
    pub fn tile_for(&self, n: usize) -> usize {
        self.tile
            .unwrap_or(if n % 4 == 0 { n / 4 } else { n })
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(TfrError::Hyperparameter("hidden layer width must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TfrError::Hyperparameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TfrError::Hyperparameter("epochs and batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MlpVectorModel {
    grid_n: usize,
    tile: usize,
    nets: Vec<Mlp>,
    normalization: Normalization,
    /// Mean training MAE (normalized units) per epoch, averaged over tiles.
    pub loss_curve: Vec<f64>,
    pub warmup_epochs: usize,
}

/// Cosine decay of the step size to zero over the training budget.
fn lr_scale(epoch: usize, epochs: usize) -> f64 {
    0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos())
}

impl MlpVectorModel {
    pub fn train(observations: &[Observation], fields: &[TemperatureField], cfg: &MlpVectorConfig) -> Result<Self> {
        cfg.validate()?;
        if observations.is_empty() {
            return Err(TfrError::Dimension("vector network needs at least one training sample".into()));
        }
        if observations.len() != fields.len() {
            return Err(TfrError::Dimension(format!(
                "{} observations but {} fields",
                observations.len(),
                fields.len()
            )));
        }
        let m = observations[0].len();
        if m == 0 {
            return Err(TfrError::EmptyMonitors);
        }
        let n = fields[0].n();
        if let Some(bad) = observations.iter().position(|o| o.len() != m) {
            return Err(TfrError::Dimension(format!("observation {bad} has {} values, expected {m}", observations[bad].len())));
        }
        if let Some(bad) = fields.iter().position(|f| f.n() != n) {
            return Err(TfrError::Dimension(format!("field {bad} is {}x{0}, expected {n}x{n}", fields[bad].n())));
        }
        let tile = cfg.tile_for(n);
        let tiles = tile_pois(n, tile)?;
        let normalization = Normalization::default();
        let samples = observations.len();
        let x = DMatrix::from_fn(m, samples, |i, j| normalization.forward(observations[j].values()[i]));

        let mut sizes = vec![m];
        sizes.extend(&cfg.hidden);
        sizes.push(tile * tile);

        let trained: Vec<(Mlp, Vec<f64>)> = tiles
            .par_iter()
            .enumerate()
            .map(|(t, cells)| {
                let y = DMatrix::from_fn(cells.len(), samples, |i, j| {
                    normalization.forward(fields[j].values()[cells[i]])
                });
                let tile_seed = splitmix64(cfg.seed ^ splitmix64(t as u64));
                train_tile(&sizes, &x, &y, cfg, tile_seed)
            })
            .collect::<Result<_>>()?;

        let mut loss_curve = vec![0.0; cfg.epochs];
        for (_, curve) in &trained {
            for (acc, v) in loss_curve.iter_mut().zip(curve) {
                *acc += v;
            }
        }
        for v in &mut loss_curve {
            *v /= trained.len() as f64;
        }
        Ok(Self {
            grid_n: n,
            tile,
            nets: trained.into_iter().map(|(net, _)| net).collect(),
            normalization,
            loss_curve,
            warmup_epochs: cfg.warmup_epochs,
        })
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn tile(&self) -> usize {
        self.tile
    }

    pub fn inputs(&self) -> usize {
        self.nets[0].inputs()
    }

    pub fn model_count(&self) -> usize {
        self.nets.len()
    }

    pub fn loss_is_monotone(&self) -> bool {
        non_increasing_over_windows(&self.loss_curve, self.warmup_epochs, LOSS_WINDOW)
    }

    pub fn predict_field(&self, obs: &Observation) -> Result<TemperatureField> {
        Ok(self.predict_fields(std::slice::from_ref(obs))?.pop().unwrap())
    }

    pub fn predict_fields(&self, observations: &[Observation]) -> Result<Vec<TemperatureField>> {
        let m = self.inputs();
        if let Some(bad) = observations.iter().position(|o| o.len() != m) {
            return Err(TfrError::Dimension(format!(
                "observation {bad} has {} values, model expects {m}",
                observations[bad].len()
            )));
        }
        let n = self.grid_n;
        let tiles = tile_pois(n, self.tile)?;
        let x = DMatrix::from_fn(m, observations.len(), |i, j| {
            self.normalization.forward(observations[j].values()[i])
        });
        let outputs: Vec<DMatrix<f64>> = self.nets.par_iter().map(|net| net.forward(&x)).collect();
        let mut fields = vec![vec![0.0; n * n]; observations.len()];
        for (cells, out) in tiles.iter().zip(&outputs) {
            for (j, field) in fields.iter_mut().enumerate() {
                for (i, &cell) in cells.iter().enumerate() {
                    field[cell] = self.normalization.inverse(out[(i, j)]);
                }
            }
        }
        fields.into_iter().map(|v| TemperatureField::new(n, v)).collect()
    }

    pub fn write_weights<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&WEIGHTS_MAGIC)?;
        for v in [
            WEIGHTS_VERSION,
            self.grid_n as u32,
            self.tile as u32,
            self.inputs() as u32,
            self.nets.len() as u32,
            self.nets[0].activation.code(),
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.normalization.shift.to_le_bytes())?;
        w.write_all(&self.normalization.scale.to_le_bytes())?;
        for net in &self.nets {
            w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
            for layer in &net.layers {
                w.write_all(&(layer.inputs() as u32).to_le_bytes())?;
                w.write_all(&(layer.outputs() as u32).to_le_bytes())?;
            }
            for layer in &net.layers {
                for r in 0..layer.outputs() {
                    for c in 0..layer.inputs() {
                        w.write_all(&layer.weights[(r, c)].to_le_bytes())?;
                    }
                }
                for b in layer.bias.iter() {
                    w.write_all(&b.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_weights<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if magic != WEIGHTS_MAGIC {
            return Err(TfrError::Format("not a weight file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != WEIGHTS_VERSION {
            return Err(TfrError::Format(format!("unsupported weight file version {version}")));
        }
        let grid_n = read_u32(&mut r)? as usize;
        let tile = read_u32(&mut r)? as usize;
        let inputs = read_u32(&mut r)? as usize;
        let models = read_u32(&mut r)? as usize;
        let activation = Activation::from_code(read_u32(&mut r)?)
            .ok_or_else(|| TfrError::Format("unknown activation code".into()))?;
        let normalization = Normalization {
            shift: read_f64(&mut r)?,
            scale: read_f64(&mut r)?,
        };
        if tile == 0 || grid_n % tile != 0 || models != (grid_n / tile).pow(2) {
            return Err(TfrError::Format(format!(
                "inconsistent tiling: grid {grid_n}, tile {tile}, {models} models"
            )));
        }
        let mut nets = Vec::with_capacity(models);
        for _ in 0..models {
            let count = read_u32(&mut r)? as usize;
            let mut shapes = Vec::with_capacity(count);
            for _ in 0..count {
                shapes.push((read_u32(&mut r)? as usize, read_u32(&mut r)? as usize));
            }
            let chained = shapes.windows(2).all(|w| w[0].1 == w[1].0);
            if count == 0 || !chained || shapes[0].0 != inputs || shapes[count - 1].1 != tile * tile {
                return Err(TfrError::Format(format!("inconsistent layer shapes {shapes:?}")));
            }
            let mut layers = Vec::with_capacity(count);
            for &(fan_in, fan_out) in &shapes {
                let mut weights = DMatrix::zeros(fan_out, fan_in);
                for row in 0..fan_out {
                    for col in 0..fan_in {
                        weights[(row, col)] = read_f64(&mut r)?;
                    }
                }
                let mut bias = DVector::zeros(fan_out);
                for b in bias.iter_mut() {
                    *b = read_f64(&mut r)?;
                }
                layers.push(Dense { weights, bias });
            }
            nets.push(Mlp { layers, activation });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(TfrError::Format("trailing bytes after weights".into()));
        }
        Ok(Self {
            grid_n,
            tile,
            nets,
            normalization,
            loss_curve: Vec::new(),
            warmup_epochs: 0,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_weights(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_weights(BufReader::new(File::open(path)?))
    }
}

fn train_tile(
    sizes: &[usize],
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    cfg: &MlpVectorConfig,
    seed: u64,
) -> Result<(Mlp, Vec<f64>)> {
    let samples = x.ncols();
    let mut net = Mlp::new(sizes, Activation::Relu, seed);
    let mut trainer = Trainer::new(&net, Optimizer::adam(cfg.learning_rate), Loss::Mae);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let mut order: Vec<usize> = (0..samples).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let batch = cfg.batch_size.min(samples);
    for epoch in 0..cfg.epochs {
        if samples > batch {
            order.shuffle(&mut rng);
        }
        let scale = lr_scale(epoch, cfg.epochs);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let (xb, yb) = if chunk.len() == samples && batch == samples {
                (x.clone(), y.clone())
            } else {
                (x.select_columns(chunk), y.select_columns(chunk))
            };
            let loss = trainer.step(&mut net, &xb, &yb, scale);
            if !loss.is_finite() {
                return Err(TfrError::Divergence { epoch });
            }
            total += loss * chunk.len() as f64;
        }
        curve.push(total / samples as f64);
    }
    Ok((net, curve))
}

fn truncated(e: std::io::Error) -> TfrError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        TfrError::Format("weight file truncated".into())
    } else {
        TfrError::Io(e)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}
