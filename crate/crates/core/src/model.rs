//! The prototypical classifier: a two-layer encoder producing unit-norm
//! features, a bank of unit-norm prototypes split into known and novel
//! halves, and a frequency-enhancement path that modulates toy images
//! through a learned DCT-domain mask.

use crate::numerics::{
    dct2, derive_rng, idct2, softmax, NumericsError, StreamPurpose, Tape, Tensor, Var,
};
use crate::synthdata::Mode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("frequency enhancement requires toy-image mode")]
    FfeInFeatureMode,
    #[error("numerics error: {0}")]
    Numerics(#[from] NumericsError),
}

/// Sharpening temperature applied when a prediction is requested sharpened.
pub const SHARPEN_TAU: f64 = 0.1;

/// Two-layer perceptron: input → hidden (tanh) → feature dim. Output
/// features are L2-normalized before prototype scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub feature_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl EncoderParams {
    pub fn init(input_dim: usize, hidden_dim: usize, feature_dim: usize, seed: u64) -> Self {
        let mut rng = derive_rng(seed, StreamPurpose::EncoderInit, 0, 0);
        let mut xavier = |fan_in: usize, fan_out: usize, n: usize| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.uniform(-limit, limit)).collect()
        };
        let w1 = xavier(input_dim, hidden_dim, input_dim * hidden_dim);
        let w2 = xavier(hidden_dim, feature_dim, hidden_dim * feature_dim);
        Self {
            input_dim,
            hidden_dim,
            feature_dim,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; feature_dim],
        }
    }
}

/// Per-coefficient affine mask generator over the DCT grid plus an enable
/// flag. Disabled, the attention map is identically 1 and the path is a
/// no-op.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfeParams {
    pub side: usize,
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
    pub enabled: bool,
}

impl FfeParams {
    pub fn init(side: usize, seed: u64) -> Self {
        let mut rng = derive_rng(seed, StreamPurpose::EncoderInit, 1, 0);
        let n = side * side;
        Self {
            side,
            gain: (0..n).map(|_| 0.5 * rng.normal()).collect(),
            bias: vec![0.0; n],
            enabled: true,
        }
    }

    pub fn disabled(side: usize) -> Self {
        let n = side * side;
        Self {
            side,
            gain: vec![0.0; n],
            bias: vec![0.0; n],
            enabled: false,
        }
    }
}

/// Frequency-guided spatial attention: sigmoid-mask the DCT spectrum, return
/// to the spatial domain, and modulate the input. Returns the attended image.
pub fn ffe_forward(image: &Tensor, params: &FfeParams) -> Tensor {
    if !params.enabled {
        return image.clone();
    }
    let f = dct2(image);
    let masked: Vec<f64> = f
        .data()
        .iter()
        .zip(params.gain.iter().zip(&params.bias))
        .map(|(&fv, (&g, &b))| {
            let m = 1.0 / (1.0 + (-(g * fv + b)).exp());
            m * fv
        })
        .collect();
    let attention = idct2(&Tensor::new(f.shape().to_vec(), masked));
    let out: Vec<f64> = attention
        .data()
        .iter()
        .zip(image.data())
        .map(|(&a, &x)| a * x)
        .collect();
    Tensor::new(image.shape().to_vec(), out)
}

/// K unit-norm prototypes; the first `k_known` rows belong to known classes
/// and are never retired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeBank {
    pub k_total: usize,
    pub k_known: usize,
    pub dim: usize,
    pub protos: Vec<f64>,
    pub live: Vec<bool>,
}

impl PrototypeBank {
    pub fn init(k_known: usize, k_total: usize, dim: usize, seed: u64) -> Self {
        assert!(k_known <= k_total);
        let mut rng = derive_rng(seed, StreamPurpose::PrototypeInit, 0, 0);
        let mut protos = Vec::with_capacity(k_total * dim);
        for _ in 0..k_total {
            protos.extend(rng.unit_vector(dim));
        }
        Self {
            k_total,
            k_known,
            dim,
            protos,
            live: vec![true; k_total],
        }
    }

    /// Warm-starts known prototypes from normalized per-class feature means.
    pub fn set_known_from_means(&mut self, means: &[Vec<f64>]) {
        assert_eq!(means.len(), self.k_known);
        for (k, mean) in means.iter().enumerate() {
            let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for (j, &v) in mean.iter().enumerate() {
                self.protos[k * self.dim + j] = v / norm;
            }
        }
    }

    pub fn proto(&self, k: usize) -> &[f64] {
        &self.protos[k * self.dim..(k + 1) * self.dim]
    }

    /// Global indices of live prototypes, ascending (known rows first).
    pub fn live_indices(&self) -> Vec<usize> {
        (0..self.k_total).filter(|&k| self.live[k]).collect()
    }

    pub fn live_novel_indices(&self) -> Vec<usize> {
        (self.k_known..self.k_total)
            .filter(|&k| self.live[k])
            .collect()
    }

    pub fn live_count(&self) -> usize {
        self.live.iter().filter(|&&l| l).count()
    }

    /// Estimated total class count: known plus surviving novel prototypes.
    pub fn estimated_total(&self) -> usize {
        self.k_known + self.live_novel_indices().len()
    }

    pub fn retire(&mut self, k: usize) {
        assert!(k >= self.k_known, "known prototypes are never retired");
        self.live[k] = false;
    }

    pub fn renormalize_live(&mut self) {
        for k in 0..self.k_total {
            if !self.live[k] {
                continue;
            }
            let row = &mut self.protos[k * self.dim..(k + 1) * self.dim];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }

    pub fn assert_unit_norm(&self) {
        for &k in &self.live_indices() {
            let norm: f64 = self.proto(k).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "prototype {k} norm {norm}");
        }
    }
}

/// Full trainable state minus the prototype bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mode: Mode,
    pub encoder: EncoderParams,
    pub ffe: Option<FfeParams>,
}

impl ModelParams {
    pub fn new(
        mode: Mode,
        encoder: EncoderParams,
        ffe: Option<FfeParams>,
    ) -> Result<Self, ModelError> {
        if mode == Mode::FeatureVector && ffe.is_some() {
            return Err(ModelError::FfeInFeatureMode);
        }
        Ok(Self { mode, encoder, ffe })
    }

    /// Applies the frequency path when active and flattens.
    fn preprocess(&self, sample: &[f64]) -> Vec<f64> {
        match (&self.mode, &self.ffe) {
            (Mode::ToyImage, Some(ffe)) if ffe.enabled => {
                let side = ffe.side;
                let img = Tensor::new(vec![side, side], sample.to_vec());
                ffe_forward(&img, ffe).into_data()
            }
            _ => sample.to_vec(),
        }
    }

    /// Unit-norm feature of one sample, no gradient tracking.
    pub fn features_nograd(&self, sample: &[f64]) -> Vec<f64> {
        let x = self.preprocess(sample);
        let enc = &self.encoder;
        assert_eq!(x.len(), enc.input_dim, "sample dimension mismatch");
        let mut hidden = enc.b1.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &enc.w1[i * enc.hidden_dim..(i + 1) * enc.hidden_dim];
            for (h, &w) in hidden.iter_mut().zip(row) {
                *h += xi * w;
            }
        }
        for h in hidden.iter_mut() {
            *h = h.tanh();
        }
        let mut out = enc.b2.clone();
        for (i, &hi) in hidden.iter().enumerate() {
            let row = &enc.w2[i * enc.feature_dim..(i + 1) * enc.feature_dim];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += hi * w;
            }
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in out.iter_mut() {
            *v /= norm;
        }
        out
    }
}

/// Cosine similarities of a unit feature against live prototypes, in live
/// order (each in [-1, 1]).
pub fn logits_nograd(h: &[f64], bank: &PrototypeBank) -> Vec<f64> {
    bank.live_indices()
        .iter()
        .map(|&k| bank.proto(k).iter().zip(h).map(|(c, x)| c * x).sum())
        .collect()
}

/// Probabilities over live prototypes; temperature 0.1 when sharpened,
/// 1 otherwise.
pub fn predict_nograd(
    h: &[f64],
    bank: &PrototypeBank,
    sharpened: bool,
) -> Result<Vec<f64>, NumericsError> {
    let logits = Tensor::vector(logits_nograd(h, bank));
    let tau = if sharpened { SHARPEN_TAU } else { 1.0 };
    Ok(softmax(&logits, tau)?.into_data())
}

/// Tape-bound copy of the model for one optimization step.
pub struct TapeBinding {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
    pub ffe_gain: Option<Var>,
    pub ffe_bias: Option<Var>,
    /// Leaf holding the full K×d prototype matrix.
    pub protos_full: Var,
    /// Live rows gathered out of the full matrix; retired rows never see
    /// gradient.
    pub protos_live: Var,
    pub live_map: Vec<usize>,
    input_dim: usize,
    ffe_enabled: bool,
    side: usize,
}

impl ModelParams {
    /// Registers all trainable tensors as tape leaves.
    pub fn bind(&self, tape: &mut Tape, bank: &PrototypeBank) -> TapeBinding {
        let enc = &self.encoder;
        let w1 = tape.leaf(Tensor::matrix(enc.input_dim, enc.hidden_dim, enc.w1.clone()));
        let b1 = tape.leaf(Tensor::vector(enc.b1.clone()));
        let w2 = tape.leaf(Tensor::matrix(
            enc.hidden_dim,
            enc.feature_dim,
            enc.w2.clone(),
        ));
        let b2 = tape.leaf(Tensor::vector(enc.b2.clone()));
        let (ffe_gain, ffe_bias, ffe_enabled, side) = match &self.ffe {
            Some(f) if f.enabled => (
                Some(tape.leaf(Tensor::matrix(f.side, f.side, f.gain.clone()))),
                Some(tape.leaf(Tensor::matrix(f.side, f.side, f.bias.clone()))),
                true,
                f.side,
            ),
            _ => (None, None, false, 0),
        };
        let protos_full = tape.leaf(Tensor::matrix(bank.k_total, bank.dim, bank.protos.clone()));
        let live_map = bank.live_indices();
        let protos_live = tape.gather_rows(protos_full, live_map.clone());
        TapeBinding {
            w1,
            b1,
            w2,
            b2,
            ffe_gain,
            ffe_bias,
            protos_full,
            protos_live,
            live_map,
            input_dim: enc.input_dim,
            ffe_enabled,
            side,
        }
    }
}

impl TapeBinding {
    fn attended_row(&self, tape: &mut Tape, sample: &[f64]) -> Var {
        if !self.ffe_enabled {
            return tape.constant(Tensor::matrix(1, sample.len(), sample.to_vec()));
        }
        let side = self.side;
        let img = Tensor::new(vec![side, side], sample.to_vec());
        let f = dct2(&img);
        let gain = self.ffe_gain.expect("ffe bound");
        let bias = self.ffe_bias.expect("ffe bound");
        let gained = tape.mul_const(gain, f.clone());
        let pre = tape.add(gained, bias);
        let mask = tape.sigmoid(pre);
        let masked = tape.mul_const(mask, f);
        let attention = tape.idct2(masked);
        let attended = tape.mul_const(attention, img);
        tape.reshape(attended, vec![1, side * side])
    }

    /// Unit-norm features for a batch of samples: [B, feature_dim].
    pub fn features(&self, tape: &mut Tape, batch: &[&[f64]]) -> Var {
        assert!(!batch.is_empty(), "empty batch");
        let x = if self.ffe_enabled {
            let rows: Vec<Var> = batch.iter().map(|s| self.attended_row(tape, s)).collect();
            tape.concat_rows(rows)
        } else {
            let cols = self.input_dim;
            let mut data = Vec::with_capacity(batch.len() * cols);
            for s in batch {
                assert_eq!(s.len(), cols, "sample dimension mismatch");
                data.extend_from_slice(s);
            }
            tape.constant(Tensor::matrix(batch.len(), cols, data))
        };
        let h = tape.matmul(x, self.w1);
        let h = tape.add_row_bcast(h, self.b1);
        let h = tape.tanh(h);
        let h = tape.matmul(h, self.w2);
        let h = tape.add_row_bcast(h, self.b2);
        tape.row_l2_normalize(h)
    }

    /// Cosine logits against live prototypes: [B, K_live].
    pub fn logits(&self, tape: &mut Tape, features: Var) -> Var {
        tape.matmul_nt(features, self.protos_live)
    }

    /// Probabilities over live prototypes.
    pub fn predict(
        &self,
        tape: &mut Tape,
        logits: Var,
        sharpened: bool,
    ) -> Result<Var, NumericsError> {
        let tau = if sharpened { SHARPEN_TAU } else { 1.0 };
        tape.softmax_rows(logits, tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn logits_self_similarity_is_maximal() {
        let bank = PrototypeBank::init(1, 3, 4, 7);
        let h = bank.proto(1).to_vec();
        let logits = logits_nograd(&h, &bank);
        assert!((logits[1] - 1.0).abs() < 1e-12);
        for (k, &s) in logits.iter().enumerate() {
            assert!(s <= 1.0 + 1e-12);
            if k != 1 {
                assert!(s < logits[1]);
            }
        }
    }

    #[test]
    fn logits_orthogonal_feature_gives_zeros() {
        let mut bank = PrototypeBank::init(1, 2, 4, 7);
        bank.protos = vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let h = vec![0.0, 0.0, 1.0, 0.0];
        for s in logits_nograd(&h, &bank) {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn logits_match_brute_force_dot_products() {
        let mut rng = SeededRng::new(3, 0);
        let mut bank = PrototypeBank::init(1, 3, 5, 9);
        let h = unit((0..5).map(|_| rng.normal()).collect());
        let logits = logits_nograd(&h, &bank);
        for k in 0..3 {
            let manual: f64 = bank.proto(k).iter().zip(&h).map(|(c, x)| c * x).sum();
            assert!((logits[k] - manual).abs() < 1e-12);
        }
        bank.retire(2);
        assert_eq!(logits_nograd(&h, &bank).len(), 2);
    }

    #[test]
    fn predict_uniform_on_zero_logits() {
        let mut bank = PrototypeBank::init(1, 4, 4, 7);
        bank.protos = vec![
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            -1.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, 0.0,
        ];
        let h = vec![0.0, 0.0, 1.0, 0.0];
        let p = predict_nograd(&h, &bank, false).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn sharpening_preserves_argmax_and_raises_confidence() {
        let mut rng = SeededRng::new(11, 2);
        let bank = PrototypeBank::init(2, 6, 8, 4);
        for _ in 0..200 {
            let h = unit((0..8).map(|_| rng.normal()).collect());
            let plain = predict_nograd(&h, &bank, false).unwrap();
            let sharp = predict_nograd(&h, &bank, true).unwrap();
            let argmax = |v: &[f64]| {
                v.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0
            };
            assert_eq!(argmax(&plain), argmax(&sharp));
            let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(max(&sharp) >= max(&plain) - 1e-12);
        }
    }

    #[test]
    fn sharpened_confidence_example() {
        // Prototypes engineered to give logits (0.9, 0.1, 0.0) for h = e1.
        let mut bank = PrototypeBank::init(1, 3, 4, 7);
        bank.protos = vec![
            0.9,
            (1.0f64 - 0.81).sqrt(),
            0.0,
            0.0, //
            0.1,
            0.0,
            (1.0f64 - 0.01).sqrt(),
            0.0, //
            0.0,
            0.0,
            0.0,
            1.0,
        ];
        let h = vec![1.0, 0.0, 0.0, 0.0];
        let p = predict_nograd(&h, &bank, true).unwrap();
        let argmax = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
        assert!(p[0] > 0.99, "confidence {}", p[0]);
    }

    #[test]
    fn ffe_disabled_is_identity() {
        let params = FfeParams::disabled(4);
        let img = Tensor::new(vec![4, 4], (0..16).map(|i| i as f64 * 0.1).collect());
        assert_eq!(ffe_forward(&img, &params), img);
    }

    #[test]
    fn ffe_zero_params_give_half_mask() {
        // gain = 0, bias = 0 gives mask 0.5 everywhere, so the attention map
        // is idct2(0.5 f) = 0.5 x and the output is 0.5 x ⊙ x.
        let side = 4;
        let params = FfeParams {
            side,
            gain: vec![0.0; 16],
            bias: vec![0.0; 16],
            enabled: true,
        };
        let mut rng = SeededRng::new(5, 5);
        let img = Tensor::new(vec![side, side], (0..16).map(|_| rng.normal()).collect());
        let out = ffe_forward(&img, &params);
        for (o, x) in out.data().iter().zip(img.data()) {
            assert!((o - 0.5 * x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn ffe_rejected_in_feature_mode() {
        let enc = EncoderParams::init(8, 4, 4, 0);
        let err = ModelParams::new(Mode::FeatureVector, enc, Some(FfeParams::init(4, 0)));
        assert!(matches!(err, Err(ModelError::FfeInFeatureMode)));
    }

    #[test]
    fn ffe_gradients_match_finite_differences() {
        let side = 4;
        let mut rng = SeededRng::new(8, 1);
        let img: Vec<f64> = (0..side * side).map(|_| rng.normal()).collect();
        let gain: Vec<f64> = (0..side * side).map(|_| 0.3 * rng.normal()).collect();
        let bias: Vec<f64> = (0..side * side).map(|_| 0.1 * rng.normal()).collect();

        let loss_of = |gain: &[f64], bias: &[f64]| -> f64 {
            let params = FfeParams {
                side,
                gain: gain.to_vec(),
                bias: bias.to_vec(),
                enabled: true,
            };
            let out = ffe_forward(&Tensor::new(vec![side, side], img.clone()), &params);
            out.data().iter().map(|v| v * v).sum::<f64>() / out.numel() as f64
        };

        // Same computation recorded on a tape.
        let mut tape = Tape::new();
        let g = tape.leaf(Tensor::matrix(side, side, gain.clone()));
        let b = tape.leaf(Tensor::matrix(side, side, bias.clone()));
        let img_t = Tensor::new(vec![side, side], img.clone());
        let f = dct2(&img_t);
        let gained = tape.mul_const(g, f.clone());
        let pre = tape.add(gained, b);
        let mask = tape.sigmoid(pre);
        let masked = tape.mul_const(mask, f);
        let attention = tape.idct2(masked);
        let attended = tape.mul_const(attention, img_t);
        let sq = tape.mul(attended, attended);
        let loss = tape.mean_all(sq);
        let grads = tape.backward(loss).unwrap();

        let step = 1e-5;
        for j in 0..side * side {
            let mut gp = gain.clone();
            gp[j] += step;
            let mut gm = gain.clone();
            gm[j] -= step;
            let fd = (loss_of(&gp, &bias) - loss_of(&gm, &bias)) / (2.0 * step);
            let an = grads.get(g)[j];
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1.0);
            assert!(rel < 1e-4, "gain[{j}]: {an} vs {fd}");
        }
    }

    #[test]
    fn image_path_with_ffe_disabled_equals_feature_path() {
        let side = 4;
        let enc = EncoderParams::init(side * side, 6, 5, 3);
        let image_model =
            ModelParams::new(Mode::ToyImage, enc.clone(), Some(FfeParams::disabled(side))).unwrap();
        let feature_model = ModelParams::new(Mode::FeatureVector, enc, None).unwrap();
        let bank = PrototypeBank::init(2, 5, 5, 1);
        let mut rng = SeededRng::new(1, 1);
        let pixels: Vec<f64> = (0..side * side).map(|_| rng.normal()).collect();
        let hi = image_model.features_nograd(&pixels);
        let hf = feature_model.features_nograd(&pixels);
        assert_eq!(hi, hf);
        assert_eq!(logits_nograd(&hi, &bank), logits_nograd(&hf, &bank));
    }

    #[test]
    fn tape_and_nograd_forward_agree() {
        let enc = EncoderParams::init(6, 5, 4, 2);
        let model = ModelParams::new(Mode::FeatureVector, enc, None).unwrap();
        let bank = PrototypeBank::init(2, 4, 4, 3);
        let mut rng = SeededRng::new(4, 4);
        let samples: Vec<Vec<f64>> = (0..3)
            .map(|_| unit((0..6).map(|_| rng.normal()).collect()))
            .collect();

        let mut tape = Tape::new();
        let binding = model.bind(&mut tape, &bank);
        let refs: Vec<&[f64]> = samples.iter().map(|s| s.as_slice()).collect();
        let h = binding.features(&mut tape, &refs);
        let logits = binding.logits(&mut tape, h);
        let p = binding.predict(&mut tape, logits, false).unwrap();
        let pv = tape.value(p);

        for (i, s) in samples.iter().enumerate() {
            let h = model.features_nograd(s);
            let probs = predict_nograd(&h, &bank, false).unwrap();
            for (j, &v) in probs.iter().enumerate() {
                assert!((pv.data()[i * 4 + j] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn retired_prototypes_receive_zero_gradient() {
        let enc = EncoderParams::init(6, 5, 4, 2);
        let model = ModelParams::new(Mode::FeatureVector, enc, None).unwrap();
        let mut bank = PrototypeBank::init(2, 5, 4, 3);
        bank.retire(3);
        let mut tape = Tape::new();
        let binding = model.bind(&mut tape, &bank);
        let sample = unit(vec![0.3, -0.2, 0.7, 0.1, 0.0, -0.5]);
        let h = binding.features(&mut tape, &[&sample]);
        let logits = binding.logits(&mut tape, h);
        let p = binding.predict(&mut tape, logits, false).unwrap();
        let ce = tape.ce_rows(p, Tensor::matrix(1, 4, vec![1.0, 0.0, 0.0, 0.0]));
        let loss = tape.mean_all(ce);
        let grads = tape.backward(loss).unwrap();
        let proto_grad = grads.get(binding.protos_full);
        // Row 3 is retired: its gradient block must be all zero.
        assert!(proto_grad[3 * 4..4 * 4].iter().all(|&v| v == 0.0));
        // Live rows receive gradient.
        assert!(proto_grad[0..4].iter().any(|&v| v != 0.0));
    }
}
