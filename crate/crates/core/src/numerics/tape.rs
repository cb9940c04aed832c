use super::dct::{transform_2d_with, DctPlan};
use super::tensor::{NumericsError, Tensor, EPS_LOG};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { requires_grad: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var, f64),
    Exp(Var),
    LnEps(Var),
    Tanh(Var),
    Sigmoid(Var),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    AddRowBcast(Var, Var),
    GatherRows(Var, Vec<usize>),
    RowL2Normalize(Var),
    SoftmaxRows(Var, f64),
    CeRows(Var, Tensor),
    MulConst(Var, Tensor),
    SumAll(Var),
    MeanAll(Var),
    MeanAxis0(Var),
    Reshape(Var),
    ConcatRows(Vec<Var>),
    Dct2(Var, DctPlan, DctPlan),
    Idct2(Var, DctPlan, DctPlan),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Define-by-run reverse-mode tape over [`Tensor`] values.
///
/// Operations are recorded in execution order; [`Tape::backward`] replays
/// them in exact reverse order, accumulating gradients per node. A tape is
/// built fresh for every optimization step and never reused across steps.
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> &[f64] {
        &self.grads[var.0]
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        debug_assert!(value.all_finite(), "non-finite tensor recorded on tape");
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf; gradients are accumulated for it.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(
            value,
            Op::Leaf {
                requires_grad: true,
            },
        )
    }

    /// Non-trainable leaf (input data, detached targets). Backward skips it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(
            value,
            Op::Leaf {
                requires_grad: false,
            },
        )
    }

    fn binary_elementwise(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.shape(), tb.shape(), "elementwise shape mismatch");
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = ta.shape().to_vec();
        self.push(Tensor::new(shape, data), op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let ta = &self.nodes[a.0].value;
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let shape = ta.shape().to_vec();
        self.push(Tensor::new(shape, data), op)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a, c))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    /// ln(x + ε) with the global log-stabilization constant.
    pub fn ln_eps(&mut self, a: Var) -> Var {
        self.unary(a, |x| (x + EPS_LOG).ln(), Op::LnEps(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    /// Elementwise product with a constant tensor of the same shape.
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Var {
        let ta = &self.nodes[a.0].value;
        assert_eq!(ta.shape(), c.shape(), "mul_const shape mismatch");
        let data = ta.data().iter().zip(c.data()).map(|(&x, &y)| x * y).collect();
        let shape = ta.shape().to_vec();
        self.push(Tensor::new(shape, data), Op::MulConst(a, c))
    }

    /// [m,k] × [k,n] → [m,n].
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (m, k) = (ta.rows(), ta.cols());
        assert_eq!(tb.rows(), k, "matmul inner dimension mismatch");
        let n = tb.cols();
        let data = matmul_raw(ta.data(), tb.data(), m, k, n);
        self.push(Tensor::matrix(m, n, data), Op::MatMul(a, b))
    }

    /// [m,k] × [n,k]ᵀ → [m,n]; the second operand is stored row-major by rows.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (m, k) = (ta.rows(), ta.cols());
        assert_eq!(tb.cols(), k, "matmul_nt inner dimension mismatch");
        let n = tb.rows();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let lhs = &ta.data()[i * k..(i + 1) * k];
            for j in 0..n {
                let rhs = &tb.data()[j * k..(j + 1) * k];
                data[i * n + j] = lhs.iter().zip(rhs).map(|(x, y)| x * y).sum();
            }
        }
        self.push(Tensor::matrix(m, n, data), Op::MatMulNt(a, b))
    }

    /// Adds a length-K row vector to every row of a [B,K] matrix.
    pub fn add_row_bcast(&mut self, x: Var, bias: Var) -> Var {
        let (tx, tb) = (&self.nodes[x.0].value, &self.nodes[bias.0].value);
        let (rows, cols) = (tx.rows(), tx.cols());
        assert_eq!(tb.numel(), cols, "bias length mismatch");
        let mut data = tx.data().to_vec();
        for r in 0..rows {
            for c in 0..cols {
                data[r * cols + c] += tb.data()[c];
            }
        }
        self.push(Tensor::matrix(rows, cols, data), Op::AddRowBcast(x, bias))
    }

    /// Selects rows of a [K,d] matrix by index; backward scatters into them.
    pub fn gather_rows(&mut self, x: Var, indices: Vec<usize>) -> Var {
        let tx = &self.nodes[x.0].value;
        let (rows, cols) = (tx.rows(), tx.cols());
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in &indices {
            assert!(i < rows, "gather index {i} out of range {rows}");
            data.extend_from_slice(&tx.data()[i * cols..(i + 1) * cols]);
        }
        let n = indices.len();
        self.push(Tensor::matrix(n, cols, data), Op::GatherRows(x, indices))
    }

    /// Normalizes each row of a [B,d] matrix to unit Euclidean norm.
    pub fn row_l2_normalize(&mut self, x: Var) -> Var {
        let tx = &self.nodes[x.0].value;
        let (rows, cols) = (tx.rows(), tx.cols());
        let mut data = tx.data().to_vec();
        for r in 0..rows {
            let row = &mut data[r * cols..(r + 1) * cols];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        self.push(Tensor::matrix(rows, cols, data), Op::RowL2Normalize(x))
    }

    /// Row-wise softmax with temperature over the last axis.
    pub fn softmax_rows(&mut self, x: Var, temperature: f64) -> Result<Var, NumericsError> {
        if temperature <= 0.0 {
            return Err(NumericsError::InvalidTemperature(temperature));
        }
        let tx = &self.nodes[x.0].value;
        let (rows, cols) = (tx.rows(), tx.cols());
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            let src = &tx.data()[r * cols..(r + 1) * cols];
            let max = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let dst = &mut data[r * cols..(r + 1) * cols];
            let mut total = 0.0;
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = ((s - max) / temperature).exp();
                total += *d;
            }
            for d in dst.iter_mut() {
                *d /= total;
            }
        }
        let shape = tx.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data), Op::SoftmaxRows(x, temperature)))
    }

    /// Per-row cross-entropy −Σ_k t_k ln(p_k + ε) against constant targets.
    ///
    /// Targets are plain data, never tape nodes, so pseudo-label paths are
    /// gradient-detached by construction.
    pub fn ce_rows(&mut self, p: Var, targets: Tensor) -> Var {
        let tp = &self.nodes[p.0].value;
        assert_eq!(tp.shape(), targets.shape(), "ce_rows shape mismatch");
        let (rows, cols) = (tp.rows(), tp.cols());
        let mut data = vec![0.0; rows];
        for r in 0..rows {
            let pr = &tp.data()[r * cols..(r + 1) * cols];
            let tr = &targets.data()[r * cols..(r + 1) * cols];
            data[r] = -pr
                .iter()
                .zip(tr)
                .map(|(&pv, &tv)| tv * (pv + EPS_LOG).ln())
                .sum::<f64>();
        }
        self.push(Tensor::vector(data), Op::CeRows(p, targets))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: f64 = self.nodes[a.0].value.data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = &self.nodes[a.0].value;
        let s: f64 = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push(Tensor::scalar(s), Op::MeanAll(a))
    }

    /// Column means of a [B,K] matrix → [K].
    pub fn mean_axis0(&mut self, a: Var) -> Var {
        let t = &self.nodes[a.0].value;
        let (rows, cols) = (t.rows(), t.cols());
        let mut data = vec![0.0; cols];
        for r in 0..rows {
            for c in 0..cols {
                data[c] += t.data()[r * cols + c];
            }
        }
        for v in &mut data {
            *v /= rows as f64;
        }
        self.push(Tensor::vector(data), Op::MeanAxis0(a))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Var {
        let t = &self.nodes[a.0].value;
        let numel: usize = shape.iter().product();
        assert_eq!(t.numel(), numel, "reshape element count mismatch");
        let data = t.data().to_vec();
        self.push(Tensor::new(shape, data), Op::Reshape(a))
    }

    /// Stacks matrices with equal column counts along the row axis.
    pub fn concat_rows(&mut self, parts: Vec<Var>) -> Var {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let cols = self.nodes[parts[0].0].value.cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in &parts {
            let t = &self.nodes[p.0].value;
            assert_eq!(t.cols(), cols, "concat_rows column mismatch");
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        self.push(Tensor::matrix(rows, cols, data), Op::ConcatRows(parts))
    }

    /// Orthonormal 2-D DCT as a tape op; the adjoint is the inverse DCT.
    pub fn dct2(&mut self, a: Var) -> Var {
        let t = &self.nodes[a.0].value;
        assert_eq!(t.shape().len(), 2, "dct2 expects [H, W]");
        let (ph, pw) = (DctPlan::new(t.shape()[0]), DctPlan::new(t.shape()[1]));
        let out = transform_2d_with(t, &ph, &pw, false);
        self.push(out, Op::Dct2(a, ph, pw))
    }

    pub fn idct2(&mut self, a: Var) -> Var {
        let t = &self.nodes[a.0].value;
        assert_eq!(t.shape().len(), 2, "idct2 expects [H, W]");
        let (ph, pw) = (DctPlan::new(t.shape()[0]), DctPlan::new(t.shape()[1]));
        let out = transform_2d_with(t, &ph, &pw, true);
        self.push(out, Op::Idct2(a, ph, pw))
    }

    fn is_const_leaf(&self, v: Var) -> bool {
        matches!(
            self.nodes[v.0].op,
            Op::Leaf {
                requires_grad: false
            }
        )
    }

    /// Reverse pass from a scalar loss. Returns one gradient buffer per node;
    /// tensors that do not influence the loss keep zero gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericsError> {
        let loss_node = &self.nodes[loss.0];
        if !loss_node.value.is_scalar() {
            return Err(NumericsError::NotScalar(loss_node.value.shape().to_vec()));
        }
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.numel()])
            .collect();
        grads[loss.0][0] = 1.0;

        for id in (0..=loss.0).rev() {
            let g = std::mem::take(&mut grads[id]);
            if g.iter().all(|&v| v == 0.0) {
                grads[id] = g;
                continue;
            }
            match &self.nodes[id].op {
                Op::Leaf { .. } => {}
                Op::Add(a, b) => {
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &g));
                    self.acc(&mut grads, *b, |dst| add_assign(dst, &g));
                }
                Op::Sub(a, b) => {
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &g));
                    self.acc(&mut grads, *b, |dst| sub_assign(dst, &g));
                }
                Op::Mul(a, b) => {
                    let (da, db): (Vec<f64>, Vec<f64>) = {
                        let ta = self.nodes[a.0].value.data();
                        let tb = self.nodes[b.0].value.data();
                        (
                            g.iter().zip(tb).map(|(&gv, &bv)| gv * bv).collect(),
                            g.iter().zip(ta).map(|(&gv, &av)| gv * av).collect(),
                        )
                    };
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                    self.acc(&mut grads, *b, |dst| add_assign(dst, &db));
                }
                Op::Scale(a, c) => {
                    let da: Vec<f64> = g.iter().map(|&gv| gv * c).collect();
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                }
                Op::AddScalar(a, _) => {
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &g));
                }
                Op::Exp(a) => {
                    let out = self.nodes[id].value.data();
                    let da: Vec<f64> = g.iter().zip(out).map(|(&gv, &y)| gv * y).collect();
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                }
                Op::LnEps(a) => {
                    let input = self.nodes[a.0].value.data();
                    let da: Vec<f64> = g
                        .iter()
                        .zip(input)
                        .map(|(&gv, &x)| gv / (x + EPS_LOG))
                        .collect();
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                }
                Op::Tanh(a) => {
                    let out = self.nodes[id].value.data();
                    let da: Vec<f64> = g
                        .iter()
                        .zip(out)
                        .map(|(&gv, &y)| gv * (1.0 - y * y))
                        .collect();
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                }
                Op::Sigmoid(a) => {
                    let out = self.nodes[id].value.data();
                    let da: Vec<f64> = g
                        .iter()
                        .zip(out)
                        .map(|(&gv, &y)| gv * y * (1.0 - y))
                        .collect();
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                }
                Op::MulConst(a, c) => {
                    let da: Vec<f64> = g.iter().zip(c.data()).map(|(&gv, &cv)| gv * cv).collect();
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                }
                Op::MatMul(a, b) => {
                    let ta = &self.nodes[a.0].value;
                    let tb = &self.nodes[b.0].value;
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    // dA = G Bᵀ, dB = Aᵀ G.
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..n {
                            let gv = g[i * n + j];
                            if gv == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                da[i * k + p] += gv * tb.data()[p * n + j];
                            }
                        }
                    }
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let av = ta.data()[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                db[p * n + j] += av * g[i * n + j];
                            }
                        }
                    }
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                    self.acc(&mut grads, *b, |dst| add_assign(dst, &db));
                }
                Op::MatMulNt(a, b) => {
                    let ta = &self.nodes[a.0].value;
                    let tb = &self.nodes[b.0].value;
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
                    // C = A Bᵀ: dA = G B, dB = Gᵀ A.
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..n {
                            let gv = g[i * n + j];
                            if gv == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                da[i * k + p] += gv * tb.data()[j * k + p];
                            }
                        }
                    }
                    let mut db = vec![0.0; n * k];
                    for i in 0..m {
                        for j in 0..n {
                            let gv = g[i * n + j];
                            if gv == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                db[j * k + p] += gv * ta.data()[i * k + p];
                            }
                        }
                    }
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                    self.acc(&mut grads, *b, |dst| add_assign(dst, &db));
                }
                Op::AddRowBcast(x, bias) => {
                    let cols = self.nodes[bias.0].value.numel();
                    let rows = g.len() / cols;
                    let mut db = vec![0.0; cols];
                    for r in 0..rows {
                        for c in 0..cols {
                            db[c] += g[r * cols + c];
                        }
                    }
                    self.acc(&mut grads, *x, |dst| add_assign(dst, &g));
                    self.acc(&mut grads, *bias, |dst| add_assign(dst, &db));
                }
                Op::GatherRows(x, indices) => {
                    let cols = self.nodes[x.0].value.cols();
                    let mut dx = vec![0.0; self.nodes[x.0].value.numel()];
                    for (r, &i) in indices.iter().enumerate() {
                        for c in 0..cols {
                            dx[i * cols + c] += g[r * cols + c];
                        }
                    }
                    self.acc(&mut grads, *x, |dst| add_assign(dst, &dx));
                }
                Op::RowL2Normalize(x) => {
                    let tx = &self.nodes[x.0].value;
                    let out = self.nodes[id].value.data();
                    let (rows, cols) = (tx.rows(), tx.cols());
                    let mut dx = vec![0.0; rows * cols];
                    for r in 0..rows {
                        let xr = &tx.data()[r * cols..(r + 1) * cols];
                        let yr = &out[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        let norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                        let dot: f64 = gr.iter().zip(yr).map(|(&gv, &yv)| gv * yv).sum();
                        for c in 0..cols {
                            dx[r * cols + c] = (gr[c] - yr[c] * dot) / norm;
                        }
                    }
                    self.acc(&mut grads, *x, |dst| add_assign(dst, &dx));
                }
                Op::SoftmaxRows(x, temperature) => {
                    let out = self.nodes[id].value.data();
                    let cols = self.nodes[id].value.cols();
                    let rows = out.len() / cols;
                    let mut dx = vec![0.0; out.len()];
                    for r in 0..rows {
                        let yr = &out[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        let dot: f64 = gr.iter().zip(yr).map(|(&gv, &yv)| gv * yv).sum();
                        for c in 0..cols {
                            dx[r * cols + c] = yr[c] * (gr[c] - dot) / temperature;
                        }
                    }
                    self.acc(&mut grads, *x, |dst| add_assign(dst, &dx));
                }
                Op::CeRows(p, targets) => {
                    let tp = &self.nodes[p.0].value;
                    let (rows, cols) = (tp.rows(), tp.cols());
                    let mut dp = vec![0.0; rows * cols];
                    for r in 0..rows {
                        let gr = g[r];
                        if gr == 0.0 {
                            continue;
                        }
                        for c in 0..cols {
                            let t = targets.data()[r * cols + c];
                            let pv = tp.data()[r * cols + c];
                            dp[r * cols + c] = -gr * t / (pv + EPS_LOG);
                        }
                    }
                    self.acc(&mut grads, *p, |dst| add_assign(dst, &dp));
                }
                Op::SumAll(a) => {
                    let gv = g[0];
                    self.acc(&mut grads, *a, |dst| {
                        for d in dst.iter_mut() {
                            *d += gv;
                        }
                    });
                }
                Op::MeanAll(a) => {
                    let n = self.nodes[a.0].value.numel() as f64;
                    let gv = g[0] / n;
                    self.acc(&mut grads, *a, |dst| {
                        for d in dst.iter_mut() {
                            *d += gv;
                        }
                    });
                }
                Op::MeanAxis0(a) => {
                    let ta = &self.nodes[a.0].value;
                    let (rows, cols) = (ta.rows(), ta.cols());
                    let mut da = vec![0.0; rows * cols];
                    for r in 0..rows {
                        for c in 0..cols {
                            da[r * cols + c] = g[c] / rows as f64;
                        }
                    }
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &da));
                }
                Op::Reshape(a) => {
                    self.acc(&mut grads, *a, |dst| add_assign(dst, &g));
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.nodes[p.0].value.numel();
                        let slice = &g[offset..offset + n];
                        self.acc(&mut grads, p, |dst| add_assign(dst, slice));
                        offset += n;
                    }
                }
                Op::Dct2(a, ph, pw) => {
                    let (h, w) = (ph.size(), pw.size());
                    let gt = Tensor::matrix(h, w, g.clone());
                    let da = transform_2d_with(&gt, ph, pw, true);
                    self.acc(&mut grads, *a, |dst| add_assign(dst, da.data()));
                }
                Op::Idct2(a, ph, pw) => {
                    let (h, w) = (ph.size(), pw.size());
                    let gt = Tensor::matrix(h, w, g.clone());
                    let da = transform_2d_with(&gt, ph, pw, false);
                    self.acc(&mut grads, *a, |dst| add_assign(dst, da.data()));
                }
            }
            grads[id] = g;
        }
        Ok(Gradients { grads })
    }

    fn acc(&self, grads: &mut [Vec<f64>], parent: Var, apply: impl FnOnce(&mut [f64])) {
        if self.is_const_leaf(parent) {
            return;
        }
        apply(&mut grads[parent.0]);
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn sub_assign(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d -= s;
    }
}
