use super::cell::{step_backward, step_forward, LstmState, StepCache};
use super::params::{CgstaeParams, DecoderHead, GclstmParams, SsamParams, StaeParams};
use crate::error::{ensure_dims, CgstaeError, Result};
use crate::numerics::{sigmoid, sym_normalize_backward, sym_normalize_cached, Matrix, SymNormalized};

/// Which adjacency feeds the encoder/decoder.
#[derive(Debug, Clone, Copy)]
pub enum GraphMode<'a> {
    /// Per-window correlation graph from the self-attention module.
    Correlation,
    /// A fixed causal adjacency (entries in [0,1]).
    Causal(&'a Matrix),
}

/// Correlation graph of one window: `σ((X W_Q)ᵀ (X W_K) / √w)`.
pub fn ssam_forward(x: &Matrix, p: &SsamParams) -> Result<Matrix> {
    Ok(ssam_forward_cached(x, p)?.2)
}

fn ssam_forward_cached(x: &Matrix, p: &SsamParams) -> Result<(Matrix, Matrix, Matrix)> {
    ensure_dims!(
        x.cols() == p.w_q.rows() && p.w_q.is_square() && p.w_k.shape() == p.w_q.shape(),
        "window {:?} against attention weights {:?}/{:?}",
        x.shape(),
        p.w_q.shape(),
        p.w_k.shape()
    );
    let scale = 1.0 / (x.rows() as f64).sqrt();
    let q = x.matmul(&p.w_q)?;
    let k = x.matmul(&p.w_k)?;
    let a = q.t_matmul(&k)?.map(|s| sigmoid(s * scale));
    Ok((q, k, a))
}

/// One encoder step with the adjacency normalized internally.
pub fn encoder_step(
    x_k: &[f64],
    prev: &LstmState,
    a_k: &Matrix,
    p: &GclstmParams,
) -> Result<LstmState> {
    let prop = sym_normalize_cached(a_k)?.propagation;
    Ok(step_forward(x_k, prev, &prop, p)?.0)
}

/// Runs the encoder over the window rows in time order from a zero state.
/// `a_per_step` holds one adjacency per row.
pub fn encode_window(x: &Matrix, a_per_step: &[Matrix], p: &GclstmParams) -> Result<LstmState> {
    ensure_dims!(
        a_per_step.len() == x.rows(),
        "{} adjacency matrices for a window of {}",
        a_per_step.len(),
        x.rows()
    );
    let mut state = LstmState::zeros(x.cols(), p.d_h());
    for (k, a) in a_per_step.iter().enumerate() {
        state = encoder_step(x.row(k), &state, a, p)?;
    }
    Ok(state)
}

fn emit(h: &Matrix, head: &DecoderHead) -> Vec<f64> {
    let b = head.bias();
    (0..h.rows())
        .map(|i| {
            h.row(i)
                .iter()
                .zip(head.w_fc.as_slice())
                .map(|(a, w)| a * w)
                .sum::<f64>()
                + b
        })
        .collect()
}

/// Reverse-order decoder. Each step first emits `x̂ = h·W_FC + b_FC` from the
/// current state and then advances the state with input `[x̂; h]`. Row `r` of
/// the result reconstructs row `r` of the input window.
pub fn decode_window(
    enc_final: &LstmState,
    a_per_step: &[Matrix],
    p: &GclstmParams,
    head: &DecoderHead,
) -> Result<Matrix> {
    let w = a_per_step.len();
    let n = enc_final.h.rows();
    ensure_dims!(
        head.w_fc.rows() == p.d_h() && enc_final.h.cols() == p.d_h(),
        "decoder head/state width mismatch"
    );
    let mut out = Matrix::zeros(w, n);
    let mut state = enc_final.clone();
    for s in 0..w {
        let row = w - 1 - s;
        let xhat = emit(&state.h, head);
        out.row_mut(row).copy_from_slice(&xhat);
        if s + 1 < w {
            let prop = sym_normalize_cached(&a_per_step[row])?.propagation;
            state = step_forward(&xhat, &state, &prop, p)?.0;
        }
    }
    Ok(out)
}

/// Result of a full forward pass over one window.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub reconstruction: Matrix,
    pub adjacency: Matrix,
    pub enc_final: LstmState,
}

/// Everything the backward pass needs from one window.
#[derive(Debug, Clone)]
pub struct WindowTrace {
    pub output: ForwardOutput,
    ssam: Option<(Matrix, Matrix)>,
    norm: SymNormalized,
    enc: Vec<StepCache>,
    dec: Vec<StepCache>,
    /// decoder hidden state at each emission, in emission order
    dec_hidden: Vec<Matrix>,
}

/// Gradients of a scalar loss for one window.
#[derive(Debug, Clone)]
pub struct WindowGrads {
    /// Present in correlation mode only.
    pub ssam: Option<SsamParams>,
    pub stae: StaeParams,
    /// Gradient w.r.t. the adjacency that was actually used.
    pub adjacency: Matrix,
}

/// Composition of self-attention (correlation mode), encoder and decoder.
pub fn model_forward(x: &Matrix, mode: GraphMode<'_>, params: &CgstaeParams) -> Result<ForwardOutput> {
    Ok(forward_traced(x, mode, params)?.output)
}

/// Forward pass that retains intermediates for [`backward`].
///
/// The same window-level adjacency is used at every encoder and decoder step.
pub fn forward_traced(x: &Matrix, mode: GraphMode<'_>, params: &CgstaeParams) -> Result<WindowTrace> {
    let n = x.cols();
    let w = x.rows();
    ensure_dims!(w >= 1, "empty window");
    let (ssam, adjacency) = match mode {
        GraphMode::Correlation => {
            let (q, k, a) = ssam_forward_cached(x, &params.ssam)?;
            (Some((q, k)), a)
        }
        GraphMode::Causal(a) => {
            ensure_dims!(a.shape() == (n, n), "causal graph {:?} for n={}", a.shape(), n);
            if a.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(CgstaeError::Argument(
                    "causal adjacency entries must lie in [0,1]".into(),
                ));
            }
            (None, a.clone())
        }
    };
    let norm = sym_normalize_cached(&adjacency)?;
    let prop = &norm.propagation;
    let stae = &params.stae;
    let d_h = stae.d_h();

    let mut state = LstmState::zeros(n, d_h);
    let mut enc = Vec::with_capacity(w);
    for k in 0..w {
        let (next, cache) = step_forward(x.row(k), &state, prop, &stae.encoder)?;
        enc.push(cache);
        state = next;
    }
    let enc_final = state.clone();

    let mut reconstruction = Matrix::zeros(w, n);
    let mut dec = Vec::with_capacity(w.saturating_sub(1));
    let mut dec_hidden = Vec::with_capacity(w);
    for s in 0..w {
        let xhat = emit(&state.h, &stae.head);
        reconstruction.row_mut(w - 1 - s).copy_from_slice(&xhat);
        dec_hidden.push(state.h.clone());
        if s + 1 < w {
            let (next, cache) = step_forward(&xhat, &state, prop, &stae.decoder)?;
            dec.push(cache);
            state = next;
        }
    }
    Ok(WindowTrace {
        output: ForwardOutput {
            reconstruction,
            adjacency,
            enc_final,
        },
        ssam,
        norm,
        enc,
        dec,
        dec_hidden,
    })
}

/// Backpropagates `d_recon = ∂L/∂X̂` (shape w×n) through a traced window.
pub fn backward(
    trace: &WindowTrace,
    x: &Matrix,
    params: &CgstaeParams,
    d_recon: &Matrix,
) -> Result<WindowGrads> {
    let (w, n) = x.shape();
    ensure_dims!(d_recon.shape() == (w, n), "reconstruction gradient shape");
    let stae = &params.stae;
    let d_h = stae.d_h();
    let prop = &trace.norm.propagation;
    let mut grads = StaeParams::zeros(d_h);
    let mut dprop = Matrix::zeros(n, n);
    let w_fc = stae.head.w_fc.as_slice();

    // decoder, last emission first
    let mut dh_next = Matrix::zeros(n, d_h);
    let mut dc_next = Matrix::zeros(n, d_h);
    for s in (0..w).rev() {
        let row = w - 1 - s;
        let mut dxhat = d_recon.row(row).to_vec();
        let (mut dh, dc) = if s + 1 < w {
            let g = step_backward(
                &trace.dec[s],
                prop,
                &stae.decoder,
                &dh_next,
                &dc_next,
                &mut grads.decoder,
                &mut dprop,
            )?;
            for (d, extra) in dxhat.iter_mut().zip(&g.dx) {
                *d += extra;
            }
            (g.dh_prev, g.dc_prev)
        } else {
            (Matrix::zeros(n, d_h), Matrix::zeros(n, d_h))
        };
        let h = &trace.dec_hidden[s];
        for i in 0..n {
            let dv = dxhat[i];
            if dv == 0.0 {
                continue;
            }
            for j in 0..d_h {
                dh[(i, j)] += dv * w_fc[j];
                grads.head.w_fc[(j, 0)] += dv * h[(i, j)];
            }
            grads.head.b_fc[(0, 0)] += dv;
        }
        dh_next = dh;
        dc_next = dc;
    }

    // encoder, dh_next/dc_next now hold gradients w.r.t. the final encoder state
    for k in (0..w).rev() {
        let g = step_backward(
            &trace.enc[k],
            prop,
            &stae.encoder,
            &dh_next,
            &dc_next,
            &mut grads.encoder,
            &mut dprop,
        )?;
        dh_next = g.dh_prev;
        dc_next = g.dc_prev;
    }

    let d_adj = sym_normalize_backward(&trace.norm, &dprop);
    let ssam = match &trace.ssam {
        Some((q, k)) => {
            let a = &trace.output.adjacency;
            let scale = 1.0 / (w as f64).sqrt();
            let ds = Matrix::from_fn(n, n, |i, j| {
                let v = a[(i, j)];
                d_adj[(i, j)] * v * (1.0 - v) * scale
            });
            // S = Qᵀ K  ⇒  dQ = K dSᵀ, dK = Q dS
            let dq = k.matmul_t(&ds)?;
            let dk = q.matmul(&ds)?;
            Some(SsamParams {
                w_q: x.t_matmul(&dq)?,
                w_k: x.t_matmul(&dk)?,
            })
        }
        None => None,
    };
    Ok(WindowGrads {
        ssam,
        stae: grads,
        adjacency: d_adj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{ModelDims, ParamSet};
    use crate::numerics::{grad_check, sym_normalize};

    fn window(w: usize, n: usize, seed: u64) -> Matrix {
        Matrix::from_fn(w, n, |i, j| (((i * 31 + j * 17) as u64 + seed) as f64 * 0.7).sin())
    }

    #[test]
    fn ssam_zero_weights_give_half() {
        let a = ssam_forward(&window(3, 4, 0), &SsamParams::zeros(4)).unwrap();
        assert!(a.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn ssam_hand_example() {
        let x = Matrix::from_rows(&[&[1.0, 0.0]]);
        let p = SsamParams {
            w_q: Matrix::identity(2),
            w_k: Matrix::identity(2),
        };
        let a = ssam_forward(&x, &p).unwrap();
        let expected = Matrix::from_rows(&[&[sigmoid(1.0), 0.5], &[0.5, 0.5]]);
        assert!(a.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn ssam_matches_dense_oracle() {
        let dims = ModelDims::new(5, 4, 2).unwrap();
        let p = CgstaeParams::init(dims, 3).ssam;
        let x = window(4, 5, 9);
        let scores = p
            .w_q
            .transpose()
            .matmul(&x.transpose())
            .unwrap()
            .matmul(&x)
            .unwrap()
            .matmul(&p.w_k)
            .unwrap();
        let oracle = scores.map(|s| 1.0 / (1.0 + (-s / 2.0).exp()));
        assert!(ssam_forward(&x, &p).unwrap().max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn ssam_shape_error() {
        assert!(ssam_forward(&Matrix::zeros(3, 4), &SsamParams::zeros(5)).is_err());
    }

    #[test]
    fn zero_stae_reconstructs_zero() {
        let dims = ModelDims::new(4, 3, 2).unwrap();
        let mut params = CgstaeParams::init(dims, 0);
        params.stae = StaeParams::zeros(2);
        let x = window(3, 4, 1);
        let a = Matrix::filled(4, 4, 0.2);
        for mode in [GraphMode::Correlation, GraphMode::Causal(&a)] {
            let out = model_forward(&x, mode, &params).unwrap();
            assert_eq!(out.reconstruction, Matrix::zeros(3, 4));
            assert_eq!(out.enc_final, LstmState::zeros(4, 2));
        }
    }

    #[test]
    fn causal_mode_with_own_correlation_graph_is_identical() {
        let dims = ModelDims::new(4, 3, 2).unwrap();
        let params = CgstaeParams::init(dims, 5);
        let x = window(3, 4, 2);
        let corr = model_forward(&x, GraphMode::Correlation, &params).unwrap();
        let causal = model_forward(&x, GraphMode::Causal(&corr.adjacency), &params).unwrap();
        assert_eq!(corr.reconstruction, causal.reconstruction);
    }

    #[test]
    fn composition_matches_sub_operations() {
        let dims = ModelDims::new(4, 3, 2).unwrap();
        let params = CgstaeParams::init(dims, 8);
        let x = window(3, 4, 4);
        let out = model_forward(&x, GraphMode::Correlation, &params).unwrap();
        let a = ssam_forward(&x, &params.ssam).unwrap();
        let per_step = vec![a.clone(); 3];
        let enc = encode_window(&x, &per_step, &params.stae.encoder).unwrap();
        let dec = decode_window(&enc, &per_step, &params.stae.decoder, &params.stae.head).unwrap();
        assert_eq!(out.adjacency, a);
        assert!(out.enc_final.h.max_abs_diff(&enc.h) < 1e-15);
        assert!(out.reconstruction.max_abs_diff(&dec) < 1e-15);
    }

    /// Loop-free unrolling of a w=2 window against the operation API.
    #[test]
    fn two_step_window_unrolled_by_hand() {
        let dims = ModelDims::new(3, 2, 2).unwrap();
        let params = CgstaeParams::init(dims, 21);
        let x = window(2, 3, 6);
        let a = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 0.4 + 0.1 * i as f64 });
        let p = &params.stae;
        let s0 = LstmState::zeros(3, 2);
        let s1 = encoder_step(x.row(0), &s0, &a, &p.encoder).unwrap();
        let s2 = encoder_step(x.row(1), &s1, &a, &p.encoder).unwrap();
        let emit_row = |h: &Matrix| -> Vec<f64> {
            (0..3)
                .map(|i| h[(i, 0)] * p.head.w_fc[(0, 0)] + h[(i, 1)] * p.head.w_fc[(1, 0)] + p.head.b_fc[(0, 0)])
                .collect()
        };
        let xhat_t = emit_row(&s2.h);
        let d1 = encoder_step(&xhat_t, &s2, &a, &p.decoder).unwrap();
        let xhat_prev = emit_row(&d1.h);
        let out = model_forward(&x, GraphMode::Causal(&a), &params).unwrap();
        let expected = Matrix::from_vec(2, 3, [xhat_prev, xhat_t].concat()).unwrap();
        assert!(out.reconstruction.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn single_step_window_emits_once() {
        let dims = ModelDims::new(3, 1, 2).unwrap();
        let params = CgstaeParams::init(dims, 2);
        let x = window(1, 3, 0);
        let a = Matrix::filled(3, 3, 0.5);
        let enc = encode_window(&x, &[a.clone()], &params.stae.encoder).unwrap();
        let s = encoder_step(x.row(0), &LstmState::zeros(3, 2), &a, &params.stae.encoder).unwrap();
        assert_eq!(enc, s);
        let dec = decode_window(&enc, &[a], &params.stae.decoder, &params.stae.head).unwrap();
        assert_eq!(dec.as_slice(), emit(&enc.h, &params.stae.head).as_slice());
    }

    fn mse_loss_and_grad(params: &CgstaeParams, x: &Matrix, mode: GraphMode<'_>) -> (f64, CgstaeParams, Matrix) {
        let trace = forward_traced(x, mode, params).unwrap();
        let diff = trace.output.reconstruction.sub(x).unwrap();
        let loss = diff.as_slice().iter().map(|v| v * v).sum();
        let g = backward(&trace, x, params, &diff.scale(2.0)).unwrap();
        let mut full = CgstaeParams::zeros(ModelDims::new(x.cols(), x.rows(), params.stae.d_h()).unwrap());
        if let Some(s) = g.ssam {
            full.ssam = s;
        }
        full.stae = g.stae;
        (loss, full, g.adjacency)
    }

    #[test]
    fn gradients_pass_finite_difference_check() {
        for seed in 0..3 {
            let dims = ModelDims::new(4, 3, 2).unwrap();
            let params = CgstaeParams::init(dims, seed);
            let x = window(3, 4, seed * 13 + 1).scale(1.5);
            let f = |flat: &[f64]| {
                let mut p = params.clone();
                p.assign_flat(flat)?;
                let (loss, g, _) = mse_loss_and_grad(&p, &x, GraphMode::Correlation);
                Ok((loss, g.flatten()))
            };
            let report = grad_check(f, &params.flatten(), 1e-5).unwrap();
            assert!(report.max_rel_error < 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn adjacency_gradient_passes_finite_difference_check() {
        let dims = ModelDims::new(5, 4, 3).unwrap();
        let params = CgstaeParams::init(dims, 4);
        let x = window(4, 5, 3);
        let a0 = Matrix::from_fn(5, 5, |i, j| 0.1 + 0.8 * (((i * 5 + j) * 7) % 11) as f64 / 11.0);
        let f = |flat: &[f64]| {
            let a = Matrix::from_vec(5, 5, flat.to_vec())?;
            let (loss, _, ga) = mse_loss_and_grad(&params, &x, GraphMode::Causal(&a));
            Ok((loss, ga.into_vec()))
        };
        let report = grad_check(f, a0.as_slice(), 1e-5).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn hidden_state_bounded() {
        let dims = ModelDims::new(4, 4, 3).unwrap();
        let params = CgstaeParams::init(dims, 9);
        let x = window(4, 4, 0).scale(1e3);
        let out = model_forward(&x, GraphMode::Correlation, &params).unwrap();
        assert!(out.enc_final.h.max_abs() <= 1.0);
        assert!(out.reconstruction.is_finite());
        let a = sym_normalize(&out.adjacency).unwrap();
        assert!(a.is_finite());
    }
}
