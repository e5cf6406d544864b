//! Minimal reverse-mode autodiff over dense tensors. Every published loss is
//! composed from these kernels, so gradients are exact up to rounding and
//! can be checked against central differences.

use super::tensor::DenseTensor;
use super::NumError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    SubCol(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Softplus(Var),
    Exp(Var),
    Ln(Var),
    SumAll(Var),
    MeanAll(Var),
    MeanRows(Var),
    RowSums(Var),
    LogSumExpRows(Var),
    GatherRows(Var, Vec<usize>),
    ConcatCols(Var, Var),
    Dropout(Var, Vec<f64>),
    StackScalars(Vec<Var>),
}

struct Node {
    op: Op,
    value: DenseTensor,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, op: Op, value: DenseTensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &DenseTensor {
        &self.nodes[v.0].value
    }

    /// A differentiable leaf (parameter or input).
    pub fn leaf(&mut self, t: DenseTensor) -> Var {
        self.push(Op::Leaf, t)
    }

    /// Alias for leaf; constants simply never have their gradient read.
    pub fn constant(&mut self, t: DenseTensor) -> Var {
        self.push(Op::Leaf, t)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let v = self.value(a).zip(self.value(b), |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let v = self.value(a).zip(self.value(b), |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let v = self.value(a).zip(self.value(b), |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    /// (n x m) + (1 x m) with the row vector broadcast over rows.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumError> {
        let (n, m) = self.value(a).shape;
        if self.value(row).shape != (1, m) {
            return Err(NumError::Shape(format!(
                "add_row {:?} + {:?}",
                self.value(a).shape,
                self.value(row).shape
            )));
        }
        let mut v = self.value(a).clone();
        for i in 0..n {
            for j in 0..m {
                *v.at_mut(i, j) += self.value(row).at(0, j);
            }
        }
        Ok(self.push(Op::AddRow(a, row), v))
    }

    /// (n x m) - (n x 1) with the column broadcast over columns.
    pub fn sub_col(&mut self, a: Var, col: Var) -> Result<Var, NumError> {
        let (n, m) = self.value(a).shape;
        if self.value(col).shape != (n, 1) {
            return Err(NumError::Shape(format!(
                "sub_col {:?} - {:?}",
                self.value(a).shape,
                self.value(col).shape
            )));
        }
        let mut v = self.value(a).clone();
        for i in 0..n {
            for j in 0..m {
                *v.at_mut(i, j) -= self.value(col).at(i, 0);
            }
        }
        Ok(self.push(Op::SubCol(a, col), v))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        // ln(1 + e^x), stabilized
        let v = self.value(a).map(|x| {
            if x > 30.0 {
                x
            } else if x < -30.0 {
                x.exp()
            } else {
                x.exp().ln_1p()
            }
        });
        self.push(Op::Softplus(a), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        self.push(Op::Ln(a), v)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = DenseTensor::scalar(self.value(a).values.iter().sum());
        self.push(Op::SumAll(a), v)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1);
        let v = DenseTensor::scalar(self.value(a).values.iter().sum::<f64>() / n as f64);
        self.push(Op::MeanAll(a), v)
    }

    /// Column means: (n x m) -> (1 x m).
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let (n, m) = self.value(a).shape;
        let mut v = DenseTensor::zeros(1, m);
        for i in 0..n {
            for j in 0..m {
                v.values[j] += self.value(a).at(i, j);
            }
        }
        for x in &mut v.values {
            *x /= n.max(1) as f64;
        }
        self.push(Op::MeanRows(a), v)
    }

    /// Row sums: (n x m) -> (n x 1).
    pub fn row_sums(&mut self, a: Var) -> Var {
        let (n, m) = self.value(a).shape;
        let mut v = DenseTensor::zeros(n, 1);
        for i in 0..n {
            for j in 0..m {
                v.values[i] += self.value(a).at(i, j);
            }
        }
        self.push(Op::RowSums(a), v)
    }

    /// Stabilized log-sum-exp per row: (n x m) -> (n x 1).
    pub fn log_sum_exp_rows(&mut self, a: Var) -> Var {
        let (n, m) = self.value(a).shape;
        let mut v = DenseTensor::zeros(n, 1);
        for i in 0..n {
            let row = &self.value(a).values[i * m..(i + 1) * m];
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row.iter().map(|&x| (x - mx).exp()).sum();
            v.values[i] = mx + s.ln();
        }
        self.push(Op::LogSumExpRows(a), v)
    }

    /// Pick one column per row: (n x m), idx len n -> (n x 1).
    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Result<Var, NumError> {
        let (n, m) = self.value(a).shape;
        if idx.len() != n || idx.iter().any(|&j| j >= m) {
            return Err(NumError::Shape("gather_rows index out of range".into()));
        }
        let mut v = DenseTensor::zeros(n, 1);
        for i in 0..n {
            v.values[i] = self.value(a).at(i, idx[i]);
        }
        Ok(self.push(Op::GatherRows(a, idx), v))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (n, ma) = self.value(a).shape;
        let (nb, mb) = self.value(b).shape;
        if n != nb {
            return Err(NumError::Shape("concat_cols row mismatch".into()));
        }
        let mut v = DenseTensor::zeros(n, ma + mb);
        for i in 0..n {
            for j in 0..ma {
                *v.at_mut(i, j) = self.value(a).at(i, j);
            }
            for j in 0..mb {
                *v.at_mut(i, ma + j) = self.value(b).at(i, j);
            }
        }
        Ok(self.push(Op::ConcatCols(a, b), v))
    }

    /// Elementwise multiply by a fixed inverted-dropout mask.
    pub fn dropout(&mut self, a: Var, mask: Vec<f64>) -> Result<Var, NumError> {
        if mask.len() != self.value(a).len() {
            return Err(NumError::Shape("dropout mask length".into()));
        }
        let values: Vec<f64> =
            self.value(a).values.iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let v = DenseTensor { shape: self.value(a).shape, values };
        Ok(self.push(Op::Dropout(a, mask), v))
    }

    /// Collect scalar vars into one row vector (1 x k).
    pub fn stack_scalars(&mut self, vars: Vec<Var>) -> Result<Var, NumError> {
        let mut values = Vec::with_capacity(vars.len());
        for &v in &vars {
            if self.value(v).len() != 1 {
                return Err(NumError::Shape("stack_scalars needs scalars".into()));
            }
            values.push(self.value(v).item());
        }
        let t = DenseTensor::row_vector(values);
        Ok(self.push(Op::StackScalars(vars), t))
    }

    /// Reverse-mode gradients of a scalar var with respect to the given
    /// leaves. Errors when the loss or any gradient is non-finite.
    pub fn backward(&self, loss: Var, leaves: &[Var]) -> Result<Vec<DenseTensor>, NumError> {
        if self.value(loss).len() != 1 {
            return Err(NumError::Shape("backward needs a scalar loss".into()));
        }
        if !self.value(loss).is_finite() {
            return Err(NumError::NonFinite("loss".into()));
        }
        let mut grads: Vec<Option<DenseTensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(DenseTensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let value = &self.nodes[i].value;
            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.value(*b).transpose())?;
                    let db = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let da = g.zip(self.value(*b), |x, y| x * y)?;
                    let db = g.zip(self.value(*a), |x, y| x * y)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow(a, row) => {
                    let (n, m) = g.shape;
                    let mut dr = DenseTensor::zeros(1, m);
                    for r in 0..n {
                        for c in 0..m {
                            dr.values[c] += g.at(r, c);
                        }
                    }
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *row, dr);
                }
                Op::SubCol(a, col) => {
                    let (n, m) = g.shape;
                    let mut dc = DenseTensor::zeros(n, 1);
                    for r in 0..n {
                        for c in 0..m {
                            dc.values[r] -= g.at(r, c);
                        }
                    }
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *col, dc);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g.map(|x| x * c));
                }
                Op::Relu(a) => {
                    let da = g.zip(self.value(*a), |gx, x| if x > 0.0 { gx } else { 0.0 })?;
                    accumulate(&mut grads, *a, da);
                }
                Op::Softplus(a) => {
                    let da = g.zip(self.value(*a), |gx, x| gx * sigmoid(x))?;
                    accumulate(&mut grads, *a, da);
                }
                Op::Exp(a) => {
                    let da = g.zip(value, |gx, y| gx * y)?;
                    accumulate(&mut grads, *a, da);
                }
                Op::Ln(a) => {
                    let da = g.zip(self.value(*a), |gx, x| gx / x)?;
                    accumulate(&mut grads, *a, da);
                }
                Op::SumAll(a) => {
                    let s = g.item();
                    let src = self.value(*a);
                    accumulate(&mut grads, *a, src.map(|_| s));
                }
                Op::MeanAll(a) => {
                    let src = self.value(*a);
                    let s = g.item() / src.len().max(1) as f64;
                    accumulate(&mut grads, *a, src.map(|_| s));
                }
                Op::MeanRows(a) => {
                    let (n, m) = self.value(*a).shape;
                    let mut da = DenseTensor::zeros(n, m);
                    for r in 0..n {
                        for c in 0..m {
                            *da.at_mut(r, c) = g.at(0, c) / n.max(1) as f64;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::RowSums(a) => {
                    let (n, m) = self.value(*a).shape;
                    let mut da = DenseTensor::zeros(n, m);
                    for r in 0..n {
                        for c in 0..m {
                            *da.at_mut(r, c) = g.at(r, 0);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::LogSumExpRows(a) => {
                    let src = self.value(*a);
                    let (n, m) = src.shape;
                    let mut da = DenseTensor::zeros(n, m);
                    for r in 0..n {
                        let lse = value.at(r, 0);
                        for c in 0..m {
                            *da.at_mut(r, c) = g.at(r, 0) * (src.at(r, c) - lse).exp();
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::GatherRows(a, idx) => {
                    let (n, m) = self.value(*a).shape;
                    let mut da = DenseTensor::zeros(n, m);
                    for r in 0..n {
                        *da.at_mut(r, idx[r]) = g.at(r, 0);
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatCols(a, b) => {
                    let (n, ma) = self.value(*a).shape;
                    let (_, mb) = self.value(*b).shape;
                    let mut da = DenseTensor::zeros(n, ma);
                    let mut db = DenseTensor::zeros(n, mb);
                    for r in 0..n {
                        for c in 0..ma {
                            *da.at_mut(r, c) = g.at(r, c);
                        }
                        for c in 0..mb {
                            *db.at_mut(r, c) = g.at(r, ma + c);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Dropout(a, mask) => {
                    let values: Vec<f64> =
                        g.values.iter().zip(mask).map(|(&gx, &m)| gx * m).collect();
                    accumulate(&mut grads, *a, DenseTensor { shape: g.shape, values });
                }
                Op::StackScalars(vars) => {
                    for (k, &v) in vars.iter().enumerate() {
                        accumulate(&mut grads, v, DenseTensor::scalar(g.values[k]));
                    }
                }
            }
        }

        let mut out = Vec::with_capacity(leaves.len());
        for &leaf in leaves {
            let g = grads[leaf.0]
                .take()
                .unwrap_or_else(|| DenseTensor::zeros(
                    self.value(leaf).rows(),
                    self.value(leaf).cols(),
                ));
            if !g.is_finite() {
                return Err(NumError::NonFinite("gradient".into()));
            }
            out.push(g);
        }
        Ok(out)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(grads: &mut [Option<DenseTensor>], var: Var, g: DenseTensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_in_place(&g),
        slot @ None => *slot = Some(g),
    }
}
