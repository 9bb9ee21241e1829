use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CgstaeError, Result};
use crate::numerics::Matrix;

/// Shape hyperparameters shared by every parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// number of process variables (graph nodes)
    pub n: usize,
    /// sliding-window length
    pub w: usize,
    /// hidden-state width per node
    pub d_h: usize,
}

impl ModelDims {
    pub fn new(n: usize, w: usize, d_h: usize) -> Result<Self> {
        if n == 0 || w == 0 || d_h == 0 {
            return Err(CgstaeError::Argument(format!(
                "model dims must be positive (n={n}, w={w}, d_h={d_h})"
            )));
        }
        Ok(Self { n, w, d_h })
    }
}

/// Query/key projections of the spatial self-attention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsamParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
}

/// Gate order used for every `[_; 4]` array below.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Output = 2,
    Cell = 3,
}

/// One GCLSTM unit: a graph-convolution weight `(1+d_h)×d_h` and a `1×d_h`
/// bias for each of the forget, input, output and candidate gates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GclstmParams {
    pub weights: [Matrix; 4],
    pub biases: [Matrix; 4],
}

/// Node-shared readout `x̂_i = h_i · W_FC + b_FC`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderHead {
    /// `d_h×1`
    pub w_fc: Matrix,
    /// `1×1`
    pub b_fc: Matrix,
}

/// Encoder/decoder parameters (θ_STAE).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaeParams {
    pub encoder: GclstmParams,
    pub decoder: GclstmParams,
    pub head: DecoderHead,
}

/// All trainable parameters (θ_SSAM, θ_STAE).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgstaeParams {
    pub ssam: SsamParams,
    pub stae: StaeParams,
}

/// Uniform view over the tensors of a parameter block, used by optimizers,
/// gradient checks and checkpoint validation.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&Matrix>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|m| m.as_slice().len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for m in self.tensors() {
            out.extend_from_slice(m.as_slice());
        }
        out
    }

    fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(CgstaeError::Dimension(format!(
                "flat vector of {} for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for m in self.tensors_mut() {
            let len = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    fn zero(&mut self) {
        for m in self.tensors_mut() {
            m.fill(0.0);
        }
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.is_finite())
    }

    /// `self += s · other`, tensor by tensor.
    fn accumulate(&mut self, s: f64, other: &Self) -> Result<()>
    where
        Self: Sized,
    {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.axpy(s, b)?;
        }
        Ok(())
    }
}

impl ParamSet for SsamParams {
    fn tensors(&self) -> Vec<&Matrix> {
        vec![&self.w_q, &self.w_k]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w_q, &mut self.w_k]
    }
}

impl ParamSet for GclstmParams {
    fn tensors(&self) -> Vec<&Matrix> {
        self.weights.iter().chain(self.biases.iter()).collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.weights.iter_mut().chain(self.biases.iter_mut()).collect()
    }
}

impl ParamSet for DecoderHead {
    fn tensors(&self) -> Vec<&Matrix> {
        vec![&self.w_fc, &self.b_fc]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w_fc, &mut self.b_fc]
    }
}

impl ParamSet for StaeParams {
    fn tensors(&self) -> Vec<&Matrix> {
        let mut v = self.encoder.tensors();
        v.extend(self.decoder.tensors());
        v.extend(self.head.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.decoder.tensors_mut());
        v.extend(self.head.tensors_mut());
        v
    }
}

impl ParamSet for CgstaeParams {
    fn tensors(&self) -> Vec<&Matrix> {
        let mut v = self.ssam.tensors();
        v.extend(self.stae.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.ssam.tensors_mut();
        v.extend(self.stae.tensors_mut());
        v
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Matrix {
    let s = 1.0 / (fan_in as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-s..s))
}

impl SsamParams {
    pub fn zeros(n: usize) -> Self {
        Self {
            w_q: Matrix::zeros(n, n),
            w_k: Matrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.w_q.rows()
    }
}

impl GclstmParams {
    pub fn zeros(d_h: usize) -> Self {
        Self {
            weights: std::array::from_fn(|_| Matrix::zeros(1 + d_h, d_h)),
            biases: std::array::from_fn(|_| Matrix::zeros(1, d_h)),
        }
    }

    pub fn d_h(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn weight(&self, gate: Gate) -> &Matrix {
        &self.weights[gate as usize]
    }

    pub fn bias(&self, gate: Gate) -> &Matrix {
        &self.biases[gate as usize]
    }

    fn init(rng: &mut ChaCha8Rng, d_h: usize) -> Self {
        let mut p = Self::zeros(d_h);
        for w in &mut p.weights {
            *w = uniform(rng, 1 + d_h, d_h, 1 + d_h);
        }
        p.biases[Gate::Forget as usize].fill(1.0);
        p
    }
}

impl DecoderHead {
    pub fn zeros(d_h: usize) -> Self {
        Self {
            w_fc: Matrix::zeros(d_h, 1),
            b_fc: Matrix::zeros(1, 1),
        }
    }

    pub fn bias(&self) -> f64 {
        self.b_fc[(0, 0)]
    }
}

impl StaeParams {
    pub fn zeros(d_h: usize) -> Self {
        Self {
            encoder: GclstmParams::zeros(d_h),
            decoder: GclstmParams::zeros(d_h),
            head: DecoderHead::zeros(d_h),
        }
    }

    pub fn d_h(&self) -> usize {
        self.encoder.d_h()
    }
}

impl CgstaeParams {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            ssam: SsamParams::zeros(dims.n),
            stae: StaeParams::zeros(dims.d_h),
        }
    }

    /// Uniform(−s, s) weights with s = 1/√fan_in, forget-gate bias +1, all
    /// other biases zero.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ssam = SsamParams {
            w_q: uniform(&mut rng, dims.n, dims.n, dims.n),
            w_k: uniform(&mut rng, dims.n, dims.n, dims.n),
        };
        let encoder = GclstmParams::init(&mut rng, dims.d_h);
        let decoder = GclstmParams::init(&mut rng, dims.d_h);
        let head = DecoderHead {
            w_fc: uniform(&mut rng, dims.d_h, 1, dims.d_h),
            b_fc: Matrix::zeros(1, 1),
        };
        Self {
            ssam,
            stae: StaeParams {
                encoder,
                decoder,
                head,
            },
        }
    }

    pub fn check_dims(&self, dims: ModelDims) -> Result<()> {
        let ok = self.ssam.w_q.shape() == (dims.n, dims.n)
            && self.ssam.w_k.shape() == (dims.n, dims.n)
            && self.stae.check_dims(dims.d_h);
        if ok {
            Ok(())
        } else {
            Err(CgstaeError::Dimension(format!(
                "parameters do not match dims {dims:?}"
            )))
        }
    }
}

impl StaeParams {
    pub fn check_dims(&self, d_h: usize) -> bool {
        let cell_ok = |p: &GclstmParams| {
            p.weights.iter().all(|w| w.shape() == (1 + d_h, d_h))
                && p.biases.iter().all(|b| b.shape() == (1, d_h))
        };
        cell_ok(&self.encoder)
            && cell_ok(&self.decoder)
            && self.head.w_fc.shape() == (d_h, 1)
            && self.head.b_fc.shape() == (1, 1)
    }
}
