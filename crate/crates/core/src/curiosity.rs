//! Count-based curiosity through a frozen random-network hash.
//!
//! A curiosity observation is preprocessed, pushed through a small frozen
//! network, and the sign pattern of its outputs is read as a binary number:
//! that number is the bucket. The bonus is `1 / sqrt(visits of the bucket)`.
//! [`Rnd`] provides the prediction-error alternative used as a baseline.

use std::sync::atomic::{AtomicBool, Ordering};

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Mlp};

pub const HASH_HIDDEN: usize = 32;
pub const HASH_BITS: usize = 16;

/// How raw curiosity observations are mapped before hashing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    /// Affine map of each component into [0, 1].
    Unit,
    /// Affine map into [0, pi], then (sin, cos) per component.
    SinCos,
    /// `SinCos` scaled by `n_stage + 1`.
    StageScaledSinCos,
}

impl Preprocessing {
    pub fn from_method(method: u8) -> Result<Self> {
        match method {
            1 => Ok(Preprocessing::Unit),
            2 => Ok(Preprocessing::SinCos),
            3 => Ok(Preprocessing::StageScaledSinCos),
            m => Err(Error::config(format!("unknown curiosity preprocessing method {m}"))),
        }
    }

    pub fn output_dim(self, input_dim: usize) -> usize {
        match self {
            Preprocessing::Unit => input_dim,
            _ => 2 * input_dim,
        }
    }
}

impl Default for Preprocessing {
    fn default() -> Self {
        Preprocessing::SinCos
    }
}

/// Declared min/max per curiosity-observation component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsRanges {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ObsRanges {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::config("curiosity ranges: lo and hi lengths differ"));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::config(format!("curiosity range [{l}, {h}] is not a finite interval")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }
}

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// Preprocess one observation. Components outside their declared range are
/// clamped; the first such event per process is logged.
pub fn preprocess(o: &[f64], method: Preprocessing, ranges: &ObsRanges, n_stage: usize) -> Vec<f64> {
    assert_eq!(o.len(), ranges.len(), "curiosity observation does not match its ranges");
    let unit = o.iter().zip(ranges.lo.iter().zip(&ranges.hi)).map(|(&x, (&lo, &hi))| {
        let clamped = x.clamp(lo, hi);
        if clamped != x && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("curiosity observation {x} outside [{lo}, {hi}]; clamping");
        }
        (clamped - lo) / (hi - lo)
    });
    match method {
        Preprocessing::Unit => unit.collect(),
        Preprocessing::SinCos | Preprocessing::StageScaledSinCos => {
            let scale = if method == Preprocessing::StageScaledSinCos {
                (n_stage + 1) as f64
            } else {
                1.0
            };
            let mut out = Vec::with_capacity(2 * o.len());
            for u in unit {
                let (s, c) = (u * std::f64::consts::PI).sin_cos();
                out.push(scale * s);
                out.push(scale * c);
            }
            out
        }
    }
}

/// Interpret `outputs > 0` as a binary number, first output most significant.
pub fn bin2dec(outputs: &[f64]) -> u32 {
    assert!(outputs.len() <= 32, "at most 32 hash bits");
    outputs
        .iter()
        .fold(0u32, |acc, &y| (acc << 1) | u32::from(y > 0.0))
}

/// Frozen random network mapping observations to hash bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashNetwork {
    net: Mlp,
    seed: u64,
}

impl HashNetwork {
    pub fn new(input_dim: usize, seed: u64) -> Self {
        Self::with_shape(input_dim, HASH_HIDDEN, HASH_BITS, seed)
    }

    pub fn with_shape(input_dim: usize, hidden: usize, bits: usize, seed: u64) -> Self {
        assert!(bits <= 32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::new(&[input_dim, hidden, bits], Activation::Tanh, 1.0, 1.0, &mut rng);
        Self { net, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn bits(&self) -> usize {
        self.net.out_dim()
    }

    pub fn outputs(&self, v: &[f64]) -> Vec<f64> {
        self.net.forward_one(v)
    }

    pub fn bucket_id(&self, v: &[f64]) -> u32 {
        bin2dec(&self.outputs(v))
    }

    /// Bucket ids for a `[batch, input]` array.
    pub fn bucket_ids(&self, batch: ArrayView2<f64>) -> Vec<u32> {
        let out = self.net.forward(batch);
        out.rows()
            .into_iter()
            .map(|r| bin2dec(r.as_slice().expect("standard layout")))
            .collect()
    }
}

/// Visit counts per bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct VisitTable {
    counts: Vec<u64>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct VisitTableRepr {
    bits: usize,
    /// (bucket id, count), sorted by id, zero counts omitted.
    entries: Vec<(u32, u64)>,
}

impl Serialize for VisitTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VisitTableRepr {
            bits: self.counts.len().trailing_zeros() as usize,
            entries: self.entries(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VisitTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = VisitTableRepr::deserialize(d)?;
        let mut table = VisitTable::new(repr.bits);
        for (id, count) in repr.entries {
            let slot = table
                .counts
                .get_mut(id as usize)
                .ok_or_else(|| serde::de::Error::custom(format!("bucket {id} out of range")))?;
            *slot = count;
            table.total += count;
        }
        Ok(table)
    }
}

impl VisitTable {
    pub fn new(bits: usize) -> Self {
        assert!(bits <= 24, "dense visit tables are limited to 24 bits");
        Self {
            counts: vec![0; 1 << bits],
            total: 0,
        }
    }

    pub fn count(&self, bucket: u32) -> u64 {
        self.counts[bucket as usize]
    }

    pub fn record(&mut self, bucket: u32) -> u64 {
        let c = &mut self.counts[bucket as usize];
        *c += 1;
        self.total += 1;
        *c
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn entries(&self) -> Vec<(u32, u64)> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as u32, c))
            .collect()
    }
}

impl Default for VisitTable {
    fn default() -> Self {
        Self::new(HASH_BITS)
    }
}

fn inv_sqrt_count(count: u64) -> f64 {
    1.0 / (count.max(1) as f64).sqrt()
}

/// `1/sqrt(visits)` for the bucket of `v`. With `record` the visit is counted
/// first, so a first visit pays exactly 1. Unvisited buckets queried without
/// recording also pay 1.
pub fn curiosity_reward(v: &[f64], net: &HashNetwork, table: &mut VisitTable, record: bool) -> f64 {
    let b = net.bucket_id(v);
    let count = if record { table.record(b) } else { table.count(b) };
    inv_sqrt_count(count)
}

/// Mean bonus of an observation and its mirror image. Both visits are
/// recorded before either bonus is read.
pub fn symmetric_curiosity(v: &[f64], v_mirror: &[f64], net: &HashNetwork, table: &mut VisitTable) -> f64 {
    let b1 = net.bucket_id(v);
    let b2 = net.bucket_id(v_mirror);
    symmetric_from_buckets(b1, b2, table)
}

fn symmetric_from_buckets(b1: u32, b2: u32, table: &mut VisitTable) -> f64 {
    table.record(b1);
    table.record(b2);
    0.5 * (inv_sqrt_count(table.count(b1)) + inv_sqrt_count(table.count(b2)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuriosityConfig {
    #[serde(default)]
    pub preprocessing: Preprocessing,
    #[serde(default = "default_true")]
    pub symmetric: bool,
    #[serde(default)]
    pub seed_offset: u64,
}

fn default_true() -> bool {
    true
}

impl Default for CuriosityConfig {
    fn default() -> Self {
        Self {
            preprocessing: Preprocessing::SinCos,
            symmetric: true,
            seed_offset: 0,
        }
    }
}

/// Single owner of the hash network and the visit table for a run.
///
/// Observations from parallel environments are submitted as a batch and
/// recorded in batch order, which keeps runs reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuriosityModule {
    pub net: HashNetwork,
    pub table: VisitTable,
    pub ranges: ObsRanges,
    pub config: CuriosityConfig,
}

impl CuriosityModule {
    pub fn new(ranges: ObsRanges, config: CuriosityConfig, seed: u64) -> Self {
        let dim = config.preprocessing.output_dim(ranges.len());
        Self {
            net: HashNetwork::new(dim, seed.wrapping_add(config.seed_offset)),
            table: VisitTable::new(HASH_BITS),
            ranges,
            config,
        }
    }

    pub fn preprocess(&self, o: &[f64], n_stage: usize) -> Vec<f64> {
        preprocess(o, self.config.preprocessing, &self.ranges, n_stage)
    }

    /// Record and score a batch; `mirrored[i]` is the mirror of `obs[i]`.
    pub fn rewards(&mut self, obs: &[Vec<f64>], mirrored: &[Vec<f64>], n_stage: &[usize]) -> Vec<f64> {
        let n = obs.len();
        let dim = self.net.input_dim();
        let rows = if self.config.symmetric { 2 * n } else { n };
        let mut batch = Array2::<f64>::zeros((rows, dim));
        for i in 0..n {
            let v = self.preprocess(&obs[i], n_stage[i]);
            batch.row_mut(i).assign(&ndarray::ArrayView1::from(&v));
            if self.config.symmetric {
                let m = self.preprocess(&mirrored[i], n_stage[i]);
                batch.row_mut(n + i).assign(&ndarray::ArrayView1::from(&m));
            }
        }
        let ids = self.net.bucket_ids(batch.view());
        (0..n)
            .map(|i| {
                if self.config.symmetric {
                    symmetric_from_buckets(ids[i], ids[n + i], &mut self.table)
                } else {
                    inv_sqrt_count(self.table.record(ids[i]))
                }
            })
            .collect()
    }
}

/// Random network distillation: the bonus is the squared error between a
/// frozen random target and a trained predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rnd {
    pub target: Mlp,
    pub predictor: Mlp,
    opt: Adam,
}

impl Rnd {
    pub fn new(input_dim: usize, seed: u64, lr: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_2d);
        let target = Mlp::new(&[input_dim, HASH_HIDDEN, HASH_BITS], Activation::Tanh, 1.0, 1.0, &mut rng);
        let predictor = Mlp::new(
            &[input_dim, HASH_HIDDEN, HASH_HIDDEN, HASH_BITS],
            Activation::Elu,
            2f64.sqrt(),
            1.0,
            &mut rng,
        );
        Self {
            target,
            predictor,
            opt: Adam::new(lr),
        }
    }

    pub fn bonus(&self, v: &[f64]) -> f64 {
        let t = self.target.forward_one(v);
        let p = self.predictor.forward_one(v);
        t.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum()
    }

    pub fn bonuses(&self, batch: ArrayView2<f64>) -> Vec<f64> {
        let diff = self.target.forward(batch) - self.predictor.forward(batch);
        diff.rows().into_iter().map(|r| r.iter().map(|x| x * x).sum()).collect()
    }

    /// One gradient step on the mean bonus over `batch`; returns the
    /// pre-step loss.
    pub fn update(&mut self, batch: ArrayView2<f64>) -> f64 {
        let n = batch.nrows().max(1) as f64;
        let target = self.target.forward(batch);
        let cache = self.predictor.forward_cached(batch);
        let diff = cache.output() - &target;
        let loss = diff.iter().map(|x| x * x).sum::<f64>() / n;
        let grad_out = diff * (2.0 / n);
        let grads = self.predictor.backward(&cache, grad_out.view());
        let slices = grads.slices();
        self.opt.step(&mut self.predictor.param_slices_mut(), &slices);
        loss
    }
}
