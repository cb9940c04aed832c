use thiserror::Error;

/// Stabilization constant added inside every logarithm.
pub const EPS_LOG: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),
    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("loss tensor must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("categorical distribution is degenerate: {0}")]
    DegenerateDistribution(&'static str),
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}

/// Dense row-major tensor of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and row-major data.
    ///
    /// Panics if the data length does not equal the product of the shape.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(
            data.len(),
            numel,
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; numel],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Number of rows when viewed as a 2-D tensor; 1 for vectors/scalars.
    pub fn rows(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[0]
        } else {
            1
        }
    }

    /// Number of columns when viewed as a 2-D tensor.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// One-hot vector of length `k`.
    pub fn one_hot(index: usize, k: usize) -> Self {
        assert!(index < k, "one-hot index {index} out of range {k}");
        let mut data = vec![0.0; k];
        data[index] = 1.0;
        Self::vector(data)
    }
}

/// Softmax of a score vector with a temperature, computed with max-shift
/// stabilization.
///
/// Errors on a non-positive temperature. The output sums to 1 within 1e-12
/// for any finite input.
pub fn softmax(scores: &Tensor, temperature: f64) -> Result<Tensor, NumericsError> {
    if temperature <= 0.0 {
        return Err(NumericsError::InvalidTemperature(temperature));
    }
    let s = scores.data();
    assert!(!s.is_empty(), "softmax of an empty vector");
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = s.iter().map(|&v| ((v - max) / temperature).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(Tensor::new(scores.shape().to_vec(), out))
}

/// Cross-entropy −Σ target_k · ln(predicted_k + ε) between two probability
/// vectors of equal length.
pub fn cross_entropy(target: &Tensor, predicted: &Tensor) -> Result<f64, NumericsError> {
    if target.numel() != predicted.numel() {
        return Err(NumericsError::DimensionMismatch {
            context: "cross_entropy",
            left: target.numel(),
            right: predicted.numel(),
        });
    }
    Ok(target
        .data()
        .iter()
        .zip(predicted.data())
        .map(|(&t, &p)| -t * (p + EPS_LOG).ln())
        .sum())
}

/// Cross-entropy against a one-hot target given as a class index.
pub fn cross_entropy_onehot(class: usize, predicted: &Tensor) -> Result<f64, NumericsError> {
    if class >= predicted.numel() {
        return Err(NumericsError::DimensionMismatch {
            context: "cross_entropy_onehot",
            left: class,
            right: predicted.numel(),
        });
    }
    Ok(-(predicted.data()[class] + EPS_LOG).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetry() {
        let p = softmax(&Tensor::vector(vec![0.0, 0.0, 0.0]), 1.0).unwrap();
        for &v in p.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_closed_form_two_way() {
        let p = softmax(&Tensor::vector(vec![1.0, 0.0]), 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((p.data()[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p.data()[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert!((p.data()[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn softmax_sharpening_increases_max() {
        let s = Tensor::vector(vec![1.0, 0.0]);
        let warm = softmax(&s, 1.0).unwrap();
        let sharp = softmax(&s, 0.1).unwrap();
        assert!(sharp.data()[0] > warm.data()[0]);
        // Closed form at tau = 0.1: 1 / (1 + e^-10).
        let expect = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((sharp.data()[0] - expect).abs() < 1e-12);
        assert!(sharp.data()[0] > 0.99995 - 1e-5);
    }

    #[test]
    fn softmax_rejects_bad_temperature() {
        assert!(softmax(&Tensor::vector(vec![1.0]), 0.0).is_err());
        assert!(softmax(&Tensor::vector(vec![1.0]), -2.0).is_err());
    }

    #[test]
    fn cross_entropy_perfect_prediction_is_near_zero() {
        let t = Tensor::one_hot(0, 3);
        let p = Tensor::vector(vec![1.0, 0.0, 0.0]);
        let ce = cross_entropy(&t, &p).unwrap();
        assert!(ce.abs() < 1e-11);
    }

    #[test]
    fn cross_entropy_half_is_ln2() {
        let t = Tensor::one_hot(0, 2);
        let p = Tensor::vector(vec![0.5, 0.5]);
        let ce = cross_entropy(&t, &p).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_rejects_mismatch() {
        let t = Tensor::one_hot(0, 2);
        let p = Tensor::vector(vec![0.2, 0.3, 0.5]);
        assert!(cross_entropy(&t, &p).is_err());
    }
}
