//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! Nodes are appended in evaluation order, so walking the node list backwards
//! is a reverse topological traversal.

use crate::tensor::{gemm_into, Matrix, Scalar};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    /// Trainable leaf; `usize` is the gradient slot.
    Param(usize),
    Constant,
    /// a · b
    MatMul(Var, Var),
    /// a · bᵀ
    MatMulT(Var, Var),
    Add(Var, Var),
    /// Broadcast a 1×n row over every row of `a`.
    AddRow(Var, Var),
    Scale(Var, T),
    Relu(Var),
    /// Row-wise normalisation with affine scale/offset rows.
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normed: Matrix<T>,
        rstd: Vec<T>,
    },
    SoftmaxRows(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    /// out.flat[i] = src.flat[idx[i]]
    Gather(Var, Vec<usize>),
    /// Elementwise product with a fixed mask.
    MulConst(Var, Vec<T>),
}

#[derive(Debug)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    requires_grad: bool,
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Param(_) | Op::Constant => Vec::new(),
            Op::MatMul(a, b) | Op::MatMulT(a, b) | Op::Add(a, b) | Op::AddRow(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::SoftmaxRows(a)
            | Op::SliceCols(a, _)
            | Op::Gather(a, _)
            | Op::MulConst(a, _) => vec![*a],
            Op::LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::ConcatCols(parts) => parts.clone(),
        }
    }
}

#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    param_slots: usize,
    consumed: bool,
    visits: Vec<usize>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            param_slots: 0,
            consumed: false,
            visits: Vec::new(),
        }
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        let requires_grad = match op {
            Op::Param(_) => true,
            Op::Constant => false,
            _ => op.inputs().iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    /// Register a trainable leaf. Its gradient lands in slot `slot`.
    pub fn param(&mut self, value: Matrix<T>, slot: usize) -> Var {
        self.param_slots = self.param_slots.max(slot + 1);
        self.push(value, Op::Param(slot))
    }

    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Matrix::zeros(va.rows(), vb.cols());
        gemm_into(false, false, va, vb, &mut out, T::ONE, T::ZERO);
        self.push(out, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Matrix::zeros(va.rows(), vb.rows());
        gemm_into(false, true, va, vb, &mut out, T::ONE, T::ZERO);
        self.push(out, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows(), 1, "add_row expects a single row");
        assert_eq!(r.cols(), self.value(a).cols(), "add_row width");
        let r = r.as_slice().to_vec();
        let mut out = self.value(a).clone();
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&r) {
                *o += *b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|v| v * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self
            .value(a)
            .map(|v| if v > T::ZERO { v } else { T::ZERO });
        self.push(out, Op::Relu(a))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: T) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let g = self.value(gamma).as_slice();
        let b = self.value(beta).as_slice();
        assert_eq!(g.len(), cols, "layer norm scale width");
        let n = T::from_f64(cols as f64);
        let mut normed = Matrix::zeros(rows, cols);
        let mut out = Matrix::zeros(rows, cols);
        let mut rstd = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / n;
            let rs = T::ONE / (var + eps).sqrt();
            rstd.push(rs);
            for c in 0..cols {
                let nv = (row[c] - mean) * rs;
                normed.set(r, c, nv);
                out.set(r, c, nv * g[c] + b[c]);
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normed,
                rstd,
            },
        )
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(row[0], |m, v| m.max(v));
            let mut sum = T::ZERO;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v = *v / sum;
            }
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let va = self.value(a);
        assert!(start + width <= va.cols(), "slice_cols out of range");
        let out = Matrix::from_fn(va.rows(), width, |r, c| va.get(r, start + c));
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut out = Matrix::zeros(rows, total);
        let mut off = 0;
        for p in parts {
            let v = self.value(*p);
            assert_eq!(v.rows(), rows, "concat_cols row count");
            for r in 0..rows {
                out.row_mut(r)[off..off + v.cols()].copy_from_slice(v.row(r));
            }
            off += v.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Build a `rows × cols` matrix whose flat entry `i` is `src.flat[idx[i]]`.
    pub fn gather(&mut self, src: Var, idx: Vec<usize>, rows: usize, cols: usize) -> Var {
        assert_eq!(idx.len(), rows * cols, "gather index count");
        let s = self.value(src).as_slice();
        let data = idx.iter().map(|&i| s[i]).collect();
        self.push(Matrix::from_vec(rows, cols, data), Op::Gather(src, idx))
    }

    pub fn mul_const(&mut self, a: Var, mask: Vec<T>) -> Var {
        let va = self.value(a);
        assert_eq!(mask.len(), va.len(), "mask length");
        let data = va.as_slice().iter().zip(&mask).map(|(v, m)| *v * *m).collect();
        let out = Matrix::from_vec(va.rows(), va.cols(), data);
        self.push(out, Op::MulConst(a, mask))
    }

    /// Sign pattern of every ReLU input, in evaluation order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(a),
                _ => None,
            })
            .flat_map(|a| self.value(a).as_slice().iter().map(|v| *v > T::ZERO))
            .collect()
    }

    /// Order in which the last backward pass visited nodes.
    pub fn visit_order(&self) -> &[usize] {
        &self.visits
    }

    /// Propagate `seed` from `output` back to every parameter slot.
    ///
    /// A tape can be differentiated once; a second call returns
    /// [`NnError::TapeConsumed`].
    pub fn backward(&mut self, output: Var, seed: Matrix<T>) -> Result<Vec<Matrix<T>>, NnError> {
        if self.consumed {
            return Err(NnError::TapeConsumed);
        }
        self.consumed = true;
        if seed.shape() != self.value(output).shape() {
            return Err(NnError::Shape(format!(
                "seed gradient {:?} for output {:?}",
                seed.shape(),
                self.value(output).shape()
            )));
        }
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut params: Vec<Option<Matrix<T>>> = (0..self.param_slots).map(|_| None).collect();
        grads[output.0] = Some(seed);
        self.visits.clear();

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.visits.push(i);
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let needs = |v: &Var| self.nodes[v.0].requires_grad;
            match &node.op {
                Op::Param(slot) => accumulate(&mut params[*slot], g),
                Op::Constant => {}
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if needs(a) {
                        let mut ga = Matrix::zeros(va.rows(), va.cols());
                        gemm_into(false, true, &g, vb, &mut ga, T::ONE, T::ZERO);
                        accumulate(&mut grads[a.0], ga);
                    }
                    if needs(b) {
                        let mut gb = Matrix::zeros(vb.rows(), vb.cols());
                        gemm_into(true, false, va, &g, &mut gb, T::ONE, T::ZERO);
                        accumulate(&mut grads[b.0], gb);
                    }
                }
                Op::MatMulT(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if needs(a) {
                        let mut ga = Matrix::zeros(va.rows(), va.cols());
                        gemm_into(false, false, &g, vb, &mut ga, T::ONE, T::ZERO);
                        accumulate(&mut grads[a.0], ga);
                    }
                    if needs(b) {
                        let mut gb = Matrix::zeros(vb.rows(), vb.cols());
                        gemm_into(true, false, &g, va, &mut gb, T::ONE, T::ZERO);
                        accumulate(&mut grads[b.0], gb);
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[b.0], g.clone());
                    accumulate(&mut grads[a.0], g);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gr.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *o += *v;
                        }
                    }
                    accumulate(&mut grads[row.0], gr);
                    accumulate(&mut grads[a.0], g);
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut grads[a.0], g.map(|v| v * s));
                }
                Op::Relu(a) => {
                    let x = self.value(*a).as_slice();
                    let data = g
                        .as_slice()
                        .iter()
                        .zip(x)
                        .map(|(gv, xv)| if *xv > T::ZERO { *gv } else { T::ZERO })
                        .collect();
                    accumulate(&mut grads[a.0], Matrix::from_vec(g.rows(), g.cols(), data));
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    normed,
                    rstd,
                } => {
                    let gv = self.value(*gamma).as_slice();
                    let (rows, cols) = g.shape();
                    let n = T::from_f64(cols as f64);
                    let mut gx = Matrix::zeros(rows, cols);
                    let mut gg = Matrix::zeros(1, cols);
                    let mut gb = Matrix::zeros(1, cols);
                    let mut dn = vec![T::ZERO; cols];
                    for r in 0..rows {
                        let gr = g.row(r);
                        let nr = normed.row(r);
                        let mut mean_dn = T::ZERO;
                        let mut mean_dn_n = T::ZERO;
                        for c in 0..cols {
                            dn[c] = gr[c] * gv[c];
                            mean_dn += dn[c];
                            mean_dn_n += dn[c] * nr[c];
                            gg.as_mut_slice()[c] += gr[c] * nr[c];
                            gb.as_mut_slice()[c] += gr[c];
                        }
                        mean_dn = mean_dn / n;
                        mean_dn_n = mean_dn_n / n;
                        let out = gx.row_mut(r);
                        for c in 0..cols {
                            out[c] = rstd[r] * (dn[c] - mean_dn - nr[c] * mean_dn_n);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                    accumulate(&mut grads[gamma.0], gg);
                    accumulate(&mut grads[beta.0], gb);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = Matrix::zeros(g.rows(), g.cols());
                    for r in 0..g.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: T = yr.iter().zip(gr).map(|(a, b)| *a * *b).sum();
                        for (o, (yv, gv)) in ga.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = *yv * (*gv - dot);
                        }
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::SliceCols(a, start) => {
                    let va = self.value(*a);
                    let mut ga = Matrix::zeros(va.rows(), va.cols());
                    for r in 0..g.rows() {
                        ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let gp = Matrix::from_fn(g.rows(), w, |r, c| g.get(r, off + c));
                        accumulate(&mut grads[p.0], gp);
                        off += w;
                    }
                }
                Op::Gather(src, idx) => {
                    let vs = self.value(*src);
                    let mut gs = Matrix::zeros(vs.rows(), vs.cols());
                    let flat = gs.as_mut_slice();
                    for (gv, &i) in g.as_slice().iter().zip(idx) {
                        flat[i] += *gv;
                    }
                    accumulate(&mut grads[src.0], gs);
                }
                Op::MulConst(a, mask) => {
                    let data = g.as_slice().iter().zip(mask).map(|(gv, m)| *gv * *m).collect();
                    accumulate(&mut grads[a.0], Matrix::from_vec(g.rows(), g.cols(), data));
                }
            }
        }

        Ok(params
            .into_iter()
            .enumerate()
            .map(|(slot, g)| {
                g.unwrap_or_else(|| {
                    let v = self
                        .nodes
                        .iter()
                        .find(|n| matches!(n.op, Op::Param(s) if s == slot))
                        .map(|n| n.value.shape())
                        .unwrap_or((0, 0));
                    Matrix::zeros(v.0, v.1)
                })
            })
            .collect())
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Matrix<T>>, g: Matrix<T>) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(build: impl Fn(&mut Tape<f64>, &[Matrix<f64>]) -> Var, inputs: Vec<Matrix<f64>>) {
        let weights = |out: &Matrix<f64>| {
            Matrix::from_fn(out.rows(), out.cols(), |r, c| ((r * 7 + c * 3) % 5) as f64 - 1.7)
        };
        let eval = |xs: &[Matrix<f64>]| {
            let mut t = Tape::new();
            let out = build(&mut t, xs);
            let v = t.value(out);
            let w = weights(v);
            v.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut t = Tape::new();
        let out = build(&mut t, &inputs);
        let seed = weights(t.value(out));
        let grads = t.backward(out, seed).unwrap();
        let eps = 1e-6;
        for (slot, x) in inputs.iter().enumerate() {
            for i in 0..x.len() {
                let mut plus = inputs.clone();
                plus[slot].as_mut_slice()[i] += eps;
                let mut minus = inputs.clone();
                minus[slot].as_mut_slice()[i] -= eps;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * eps);
                let an = grads[slot].as_slice()[i];
                assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "slot {slot} [{i}]: fd {fd} vs {an}");
            }
        }
    }

    fn m(rows: usize, cols: usize, seed: usize) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |r, c| {
            (((r * 31 + c * 17 + seed * 13) % 23) as f64 / 23.0 - 0.45) * 1.3
        })
    }

    #[test]
    fn matmul_grads() {
        fd_check(
            |t, xs| {
                let a = t.param(xs[0].clone(), 0);
                let b = t.param(xs[1].clone(), 1);
                let c = t.matmul(a, b);
                let d = t.matmul_t(c, b);
                t.add(d, a)
            },
            vec![m(3, 4, 1), m(4, 4, 2)],
        );
    }

    #[test]
    fn norm_softmax_relu_grads() {
        fd_check(
            |t, xs| {
                let x = t.param(xs[0].clone(), 0);
                let g = t.param(xs[1].clone(), 1);
                let b = t.param(xs[2].clone(), 2);
                let n = t.layer_norm(x, g, b, 1e-5);
                let s = t.softmax_rows(n);
                let r = t.relu(n);
                let y = t.add(s, r);
                t.add_row(y, b)
            },
            vec![m(4, 5, 3), m(1, 5, 4), m(1, 5, 5)],
        );
    }

    #[test]
    fn slicing_gather_and_masks() {
        fd_check(
            |t, xs| {
                let x = t.param(xs[0].clone(), 0);
                let table = t.param(xs[1].clone(), 1);
                let a = t.slice_cols(x, 1, 2);
                let b = t.slice_cols(x, 0, 3);
                let c = t.concat_cols(&[a, b]);
                let gth = t.gather(table, vec![0, 1, 1, 2, 0, 0, 2, 2, 1, 0], 2, 5);
                let gth = t.matmul_t(gth, gth);
                let d = t.scale(c, 0.5);
                let d = t.mul_const(d, vec![1.0, 0.0, 2.0, 1.0, -1.0, 0.5, 0.5, 0.5, 1.0, 1.0]);
                let e = t.matmul_t(d, d);
                t.add(e, gth)
            },
            vec![m(2, 3, 6), m(1, 3, 7)],
        );
    }

    #[test]
    fn zero_seed_gives_zero_grads() {
        let mut t = Tape::<f64>::new();
        let a = t.param(m(2, 3, 1), 0);
        let b = t.param(m(3, 2, 2), 1);
        let c = t.matmul(a, b);
        let grads = t.backward(c, Matrix::zeros(2, 2)).unwrap();
        assert!(grads.iter().all(|g| g.as_slice().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn second_backward_is_rejected() {
        let mut t = Tape::<f64>::new();
        let a = t.param(m(2, 2, 1), 0);
        let b = t.relu(a);
        t.backward(b, Matrix::filled(2, 2, 1.0)).unwrap();
        assert!(matches!(t.backward(b, Matrix::filled(2, 2, 1.0)), Err(NnError::TapeConsumed)));
    }

    #[test]
    fn nodes_visited_once_in_reverse_order() {
        let mut t = Tape::<f64>::new();
        let a = t.param(m(2, 2, 1), 0);
        let b = t.relu(a);
        let c = t.add(a, b);
        let d = t.matmul(c, b);
        t.backward(d, Matrix::filled(2, 2, 1.0)).unwrap();
        let order = t.visit_order().to_vec();
        assert_eq!(order, vec![d.index(), c.index(), b.index(), a.index()]);
    }

    #[test]
    fn relu_tie_has_zero_subgradient() {
        let mut t = Tape::<f64>::new();
        let a = t.param(Matrix::from_vec(1, 2, vec![0.0, 1.0]), 0);
        let b = t.relu(a);
        let g = t.backward(b, Matrix::filled(1, 2, 1.0)).unwrap();
        assert_eq!(g[0].as_slice(), &[0.0, 1.0]);
    }
}
