//! Model configuration and the learnable parameter set.

use super::dense::RMat;
use crate::linalg::{ComplexMatrix, C64};
use crate::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Custom,
    Learnable,
}

/// How complex assignment scores become real before the row softmax.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Modulus,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Complex phasor per bus, emitted as paired real outputs.
    Forecast,
    /// One logit per bus.
    Fdi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    SplitRelu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerConfig {
    /// Spatial filter order.
    pub k: usize,
    /// Temporal filter order.
    pub k_t: usize,
    /// Feature widths `F_0 .. F_L`; the layer count is `widths.len() - 1`.
    pub widths: Vec<usize>,
    pub n_pool: usize,
    /// Hidden width of the output head.
    pub d: usize,
    pub pooling: Pooling,
    pub score: ScoreKind,
    pub activation: Activation,
    pub task: Task,
    /// Forecast horizons `0 .. horizons` predicted jointly (forecast task only).
    pub horizons: usize,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self::forecast()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid layer config: {0}")]
    Invalid(String),
}

impl LayerConfig {
    pub fn forecast() -> Self {
        Self {
            k: 2,
            k_t: 3,
            widths: vec![10, 32, 32],
            n_pool: 8,
            d: 256,
            pooling: Pooling::Custom,
            score: ScoreKind::Modulus,
            activation: Activation::SplitRelu,
            task: Task::Forecast,
            horizons: 6,
        }
    }

    pub fn fdi() -> Self {
        Self {
            widths: vec![10, 32],
            task: Task::Fdi,
            ..Self::forecast()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.widths.len() < 2 {
            return bad("need at least one convolution layer");
        }
        if self.widths.contains(&0) {
            return bad("feature widths must be positive");
        }
        if self.task == Task::Forecast && self.horizons < 1 {
            return bad("forecast needs at least one horizon");
        }
        if self.n_pool < 1 || self.d < 1 {
            return bad("n_pool and d must be at least 1");
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn taps(&self) -> usize {
        (self.k + 1) * (self.k_t + 1)
    }

    /// Number of input feature matrices `X_t, X_{t-1}, ...` one forward pass reads.
    pub fn window_len(&self) -> usize {
        self.layers() * self.k_t + 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn pool_width(&self) -> usize {
        let f = *self.widths.last().unwrap();
        match self.pooling {
            Pooling::Custom => 2 * f,
            Pooling::Learnable => f,
        }
    }

    /// Length of the split-real pooled vector fed to the head.
    pub fn head_input(&self) -> usize {
        2 * self.n_pool * self.pool_width()
    }

    pub fn n_outputs(&self) -> usize {
        match self.task {
            Task::Forecast => 2 * self.horizons,
            Task::Fdi => 1,
        }
    }
}

/// All learnable tensors. No shape depends on the size of the system the
/// model is applied to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UgcnParams {
    /// `conv[l][k * (k_t + 1) + tau]` is the `F_l × F_{l+1}` tap `H_{k,tau}`.
    pub conv: Vec<Vec<ComplexMatrix>>,
    /// Assignment weights `N_p × F_L` (learnable pooling only).
    pub w_a: Option<ComplexMatrix>,
    pub w_enc: RMat,
    pub b_enc: Vec<f64>,
    pub w_pos: Vec<f64>,
    pub b_pos: Vec<f64>,
    pub w_t: RMat,
    pub b_t: Vec<f64>,
    /// `d × n_outputs`.
    pub w_out: RMat,
    pub b_out: Vec<f64>,
}

/// Name, shape and complexity of one parameter tensor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub complex: bool,
}

fn complex_normal(rows: usize, cols: usize, std: f64, r: &mut rand_chacha::ChaCha8Rng) -> ComplexMatrix {
    let d = Normal::new(0.0, std / std::f64::consts::SQRT_2).unwrap();
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(d.sample(r), d.sample(r)))
}

fn real_normal(rows: usize, cols: usize, std: f64, r: &mut rand_chacha::ChaCha8Rng) -> RMat {
    let d = Normal::new(0.0, std).unwrap();
    RMat::from_fn(rows, cols, |_, _| d.sample(r))
}

impl UgcnParams {
    pub fn init(cfg: &LayerConfig, seed: u64) -> Self {
        let mut r = rng::stream(seed, &[rng::tag::INIT]);
        let taps = cfg.taps();
        let conv = (0..cfg.layers())
            .map(|l| {
                let (fi, fo) = (cfg.widths[l], cfg.widths[l + 1]);
                let std = 1.0 / ((fi * taps) as f64).sqrt();
                (0..taps).map(|_| complex_normal(fi, fo, std, &mut r)).collect()
            })
            .collect();
        let f_last = *cfg.widths.last().unwrap();
        let w_a = (cfg.pooling == Pooling::Learnable)
            .then(|| complex_normal(cfg.n_pool, f_last, 1.0 / (f_last as f64).sqrt(), &mut r));
        let (d, din) = (cfg.d, cfg.head_input());
        let w_enc = real_normal(d, din, (2.0 / din as f64).sqrt(), &mut r);
        // Steps of mixed sharpness centred across [0, 1].
        let (mut w_pos, mut b_pos) = (Vec::with_capacity(d), Vec::with_capacity(d));
        for _ in 0..d {
            let slope = (Uniform::new(2f64.ln(), 64f64.ln()).sample(&mut r)).exp();
            let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
            let centre: f64 = Uniform::new(0.0, 1.0).sample(&mut r);
            w_pos.push(sign * slope);
            b_pos.push(-sign * slope * centre);
        }
        let w_t = real_normal(d, d, (2.0 / d as f64).sqrt(), &mut r);
        let w_out = real_normal(d, cfg.n_outputs(), (1.0 / d as f64).sqrt(), &mut r);
        Self {
            conv,
            w_a,
            w_enc,
            b_enc: vec![0.0; d],
            w_pos,
            b_pos,
            w_t,
            b_t: vec![0.0; d],
            w_out,
            b_out: vec![0.0; cfg.n_outputs()],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.map_inplace(|_| 0.0);
        z
    }

    pub fn tensors(&self) -> Vec<TensorInfo> {
        let mut out = Vec::new();
        let c = |name: String, m: &ComplexMatrix| TensorInfo {
            name,
            rows: m.rows(),
            cols: m.cols(),
            complex: true,
        };
        let r = |name: &str, rows: usize, cols: usize| TensorInfo {
            name: name.to_string(),
            rows,
            cols,
            complex: false,
        };
        for (l, taps) in self.conv.iter().enumerate() {
            for (i, h) in taps.iter().enumerate() {
                out.push(c(format!("conv.{l}.{i}"), h));
            }
        }
        if let Some(w) = &self.w_a {
            out.push(c("w_a".into(), w));
        }
        out.push(r("w_enc", self.w_enc.rows, self.w_enc.cols));
        out.push(r("b_enc", 1, self.b_enc.len()));
        out.push(r("w_pos", 1, self.w_pos.len()));
        out.push(r("b_pos", 1, self.b_pos.len()));
        out.push(r("w_t", self.w_t.rows, self.w_t.cols));
        out.push(r("b_t", 1, self.b_t.len()));
        out.push(r("w_out", self.w_out.rows, self.w_out.cols));
        out.push(r("b_out", 1, self.b_out.len()));
        out
    }

    /// Real slices in a fixed order; complex tensors contribute `re, im` pairs.
    fn slices(&self) -> Vec<Slice<'_>> {
        let mut v: Vec<Slice<'_>> = Vec::new();
        for taps in &self.conv {
            for h in taps {
                v.push(Slice::C(h.as_slice()));
            }
        }
        if let Some(w) = &self.w_a {
            v.push(Slice::C(w.as_slice()));
        }
        for s in [
            &self.w_enc.data,
            &self.b_enc,
            &self.w_pos,
            &self.b_pos,
            &self.w_t.data,
            &self.b_t,
            &self.w_out.data,
            &self.b_out,
        ] {
            v.push(Slice::R(s));
        }
        v
    }

    pub fn n_real(&self) -> usize {
        self.slices()
            .iter()
            .map(|s| match s {
                Slice::C(c) => 2 * c.len(),
                Slice::R(r) => r.len(),
            })
            .sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_real());
        for s in self.slices() {
            match s {
                Slice::C(c) => out.extend(c.iter().flat_map(|z| [z.re, z.im])),
                Slice::R(r) => out.extend_from_slice(r),
            }
        }
        out
    }

    /// Overwrites every entry from a flat vector produced by [`Self::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_real(), "flat parameter length");
        let mut it = flat.iter().copied();
        for taps in &mut self.conv {
            for h in taps {
                for z in h.as_mut_slice() {
                    *z = C64::new(it.next().unwrap(), it.next().unwrap());
                }
            }
        }
        if let Some(w) = &mut self.w_a {
            for z in w.as_mut_slice() {
                *z = C64::new(it.next().unwrap(), it.next().unwrap());
            }
        }
        for s in [
            &mut self.w_enc.data,
            &mut self.b_enc,
            &mut self.w_pos,
            &mut self.b_pos,
            &mut self.w_t.data,
            &mut self.b_t,
            &mut self.w_out.data,
            &mut self.b_out,
        ] {
            for x in s.iter_mut() {
                *x = it.next().unwrap();
            }
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        let flat: Vec<f64> = self.to_flat().into_iter().map(f).collect();
        self.set_flat(&flat);
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        let mut flat = self.to_flat();
        for (x, y) in flat.iter_mut().zip(other.to_flat()) {
            *x += a * y;
        }
        self.set_flat(&flat);
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }

    /// CRC32 of the little-endian parameter bytes.
    pub fn checksum(&self) -> u32 {
        let bytes: Vec<u8> = self.to_flat().iter().flat_map(|x| x.to_le_bytes()).collect();
        crc32fast::hash(&bytes)
    }
}

enum Slice<'a> {
    C(&'a [C64]),
    R(&'a [f64]),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let mut cfg = LayerConfig::forecast();
        cfg.pooling = Pooling::Learnable;
        cfg.d = 8;
        let p = UgcnParams::init(&cfg, 1);
        let mut q = p.zeros_like();
        q.set_flat(&p.to_flat());
        assert_eq!(p, q);
        assert_eq!(p.to_flat().len(), p.n_real());
        assert_eq!(p, UgcnParams::init(&cfg, 1));
    }

    #[test]
    fn shapes_follow_config() {
        let cfg = LayerConfig::forecast();
        assert_eq!(cfg.window_len(), 7);
        assert_eq!(cfg.head_input(), 2 * 8 * 64);
        let p = UgcnParams::init(&cfg, 0);
        assert_eq!(p.conv.len(), 2);
        assert_eq!(p.conv[0].len(), 12);
        assert_eq!((p.conv[0][0].rows(), p.conv[0][0].cols()), (10, 32));
        assert_eq!((p.w_out.rows, p.w_out.cols), (256, 12));
        assert!(p.w_a.is_none());
    }
}
