use super::tensor::Tensor;

/// Precomputed orthonormal type-II DCT basis for one dimension.
///
/// `basis[k * n + i] = s_k * cos(pi * (2i + 1) * k / (2n))` with
/// `s_0 = sqrt(1/n)` and `s_k = sqrt(2/n)` otherwise. The matrix is
/// orthogonal, so the type-III inverse is its transpose and Parseval holds.
#[derive(Debug, Clone)]
pub struct DctPlan {
    n: usize,
    basis: Vec<f64>,
}

impl DctPlan {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "DCT size must be at least 1");
        let mut basis = vec![0.0; n * n];
        let nf = n as f64;
        for k in 0..n {
            let scale = if k == 0 {
                (1.0 / nf).sqrt()
            } else {
                (2.0 / nf).sqrt()
            };
            for i in 0..n {
                let angle = std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf);
                basis[k * n + i] = scale * angle.cos();
            }
        }
        Self { n, basis }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// y = B x (forward transform of one length-n signal).
    fn forward_1d(&self, x: &[f64], y: &mut [f64]) {
        for k in 0..self.n {
            let row = &self.basis[k * self.n..(k + 1) * self.n];
            y[k] = row.iter().zip(x).map(|(b, v)| b * v).sum();
        }
    }

    /// x = Bᵀ y (inverse transform of one length-n spectrum).
    fn inverse_1d(&self, y: &[f64], x: &mut [f64]) {
        for v in x.iter_mut() {
            *v = 0.0;
        }
        for k in 0..self.n {
            let row = &self.basis[k * self.n..(k + 1) * self.n];
            let yk = y[k];
            for (xi, b) in x.iter_mut().zip(row) {
                *xi += b * yk;
            }
        }
    }
}

fn transform_2d(input: &Tensor, inverse: bool) -> Tensor {
    let shape = input.shape();
    assert_eq!(shape.len(), 2, "2-D DCT expects a [H, W] tensor");
    let (h, w) = (shape[0], shape[1]);
    let plan_h = DctPlan::new(h);
    let plan_w = DctPlan::new(w);
    transform_2d_with(input, &plan_h, &plan_w, inverse)
}

pub(crate) fn transform_2d_with(
    input: &Tensor,
    plan_h: &DctPlan,
    plan_w: &DctPlan,
    inverse: bool,
) -> Tensor {
    let (h, w) = (plan_h.n, plan_w.n);
    assert_eq!(input.shape(), [h, w], "plan size does not match tensor");
    let data = input.data();

    // Rows first, then columns.
    let mut rows_done = vec![0.0; h * w];
    let mut buf = vec![0.0; w];
    for r in 0..h {
        let row = &data[r * w..(r + 1) * w];
        if inverse {
            plan_w.inverse_1d(row, &mut buf);
        } else {
            plan_w.forward_1d(row, &mut buf);
        }
        rows_done[r * w..(r + 1) * w].copy_from_slice(&buf);
    }

    let mut out = vec![0.0; h * w];
    let mut col_in = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col_in[r] = rows_done[r * w + c];
        }
        if inverse {
            plan_h.inverse_1d(&col_in, &mut col_out);
        } else {
            plan_h.forward_1d(&col_in, &mut col_out);
        }
        for r in 0..h {
            out[r * w + c] = col_out[r];
        }
    }
    Tensor::new(vec![h, w], out)
}

/// Orthonormal 2-D type-II DCT of an [H, W] image.
pub fn dct2(image: &Tensor) -> Tensor {
    transform_2d(image, false)
}

/// Orthonormal 2-D type-III inverse DCT of an [H, W] coefficient grid.
pub fn idct2(coeffs: &Tensor) -> Tensor {
    transform_2d(coeffs, true)
}
