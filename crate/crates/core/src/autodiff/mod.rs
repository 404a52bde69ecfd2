//! Define-by-run reverse-mode differentiation over small dense tensors.
//!
//! A [`Graph`] is an append-only tape. Every operation appends one node
//! holding its output value, so a node's inputs always precede it and
//! [`Graph::backward`] can walk the tape in reverse append order. Graphs are
//! built fresh for every forward pass; nothing is shared between passes.
//!
//! Leaves created from a [`Tensor`] with `requires_grad` receive gradients.
//! Those gradients accumulate across repeated `backward` calls until
//! [`Graph::zero_grad`] is called.

mod gradcheck;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, ParamCheck};
pub use tensor::{Shape, Tensor};

use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Tanh,
    Sigmoid,
    Relu,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

/// Pointwise operations, dispatched by [`Graph::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Tanh,
    Sigmoid,
    Relu,
    Exp,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Binary(Binary, Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Unary(Unary, Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    StackRows(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    MaskMul(Var, Vec<f64>),
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Binary(Binary::Add, ..) => "add",
            Op::Binary(Binary::Sub, ..) => "sub",
            Op::Binary(Binary::Mul, ..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::Unary(Unary::Tanh, _) => "tanh",
            Op::Unary(Unary::Sigmoid, _) => "sigmoid",
            Op::Unary(Unary::Relu, _) => "relu",
            Op::Unary(Unary::Exp, _) => "exp",
            Op::Softmax(_) => "softmax",
            Op::Concat(_) => "concat",
            Op::Slice(..) => "slice",
            Op::StackRows(_) => "stack_rows",
            Op::Reshape(_) => "reshape",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::MaskMul(..) => "mask_mul",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    shape: Shape,
    value: Vec<f64>,
    needs_grad: bool,
}

/// Append-only computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    // Indexed by node; only requires-grad leaves ever get `Some`.
    leaf_grads: Vec<Option<Vec<f64>>>,
}

#[cfg(test)]
thread_local! {
    /// Test-only fault injection: scales the matmul gradient of `a` by 1.5.
    pub(crate) static CORRUPT_MATMUL_GRAD: std::cell::Cell<bool> = const { std::cell::Cell::new(false) };
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of nodes appended so far.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Operation tags in append order.
    pub fn op_tags(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| n.op.tag()).collect()
    }

    fn push(&mut self, op: Op, shape: Shape, value: Vec<f64>, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.numel(), value.len());
        self.nodes.push(Node {
            op,
            shape,
            value,
            needs_grad,
        });
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Records a leaf holding a copy of `t`. The leaf receives gradients iff
    /// `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(
            Op::Leaf,
            t.shape().clone(),
            t.values().to_vec(),
            t.requires_grad(),
        )
    }

    /// Records a constant (non-differentiable) leaf.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let (shape, values) = t.into_parts();
        self.push(Op::Leaf, shape, values, false)
    }

    pub fn constant_vec(&mut self, values: Vec<f64>) -> Result<Var> {
        Ok(self.constant(Tensor::from_vec(values)?))
    }

    pub fn zeros(&mut self, n: usize) -> Result<Var> {
        self.constant_vec(vec![0.0; n])
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &Shape {
        &self.node(v).shape
    }

    /// Copies a node's value out as a tensor (without gradient tracking).
    pub fn tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node invariant")
    }

    /// Accumulated gradient of a requires-grad leaf, if backward reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.leaf_grads[v.0].as_deref()
    }

    /// Clears every accumulated leaf gradient.
    pub fn zero_grad(&mut self) {
        self.leaf_grads.iter_mut().for_each(|g| *g = None);
    }

    // ---------------------------------------------------------------- ops

    /// Matrix product. `b` may be rank 1, in which case it is a column.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).clone(), self.shape(b).clone());
        if sa.rank() != 2 {
            return Err(Error::shape("matmul", &sa, &sb));
        }
        let (r, k) = (sa.dims()[0], sa.dims()[1]);
        let (kb, c) = match sb.dims() {
            [kb] => (*kb, 1),
            [kb, c] => (*kb, *c),
            _ => return Err(Error::shape("matmul", &sa, &sb)),
        };
        if kb != k {
            return Err(Error::shape("matmul", &sa, &sb));
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let arow = &av[i * k..(i + 1) * k];
            let orow = &mut out[i * c..(i + 1) * c];
            for (kk, &aik) in arow.iter().enumerate() {
                let brow = &bv[kk * c..(kk + 1) * c];
                for (o, &bkj) in orow.iter_mut().zip(brow) {
                    *o += aik * bkj;
                }
            }
        }
        let shape = if sb.rank() == 1 {
            Shape::vector(r)
        } else {
            Shape::matrix(r, c)
        };
        let ng = self.needs(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), shape, out, ng))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a).clone();
        let (r, c) = match s.dims() {
            [r, c] => (*r, *c),
            _ => return Err(Error::Precondition(format!("transpose needs rank 2, got {s}"))),
        };
        let v = self.value(a);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = v[i * c + j];
            }
        }
        let ng = self.needs(&[a]);
        Ok(self.push(Op::Transpose(a), Shape::matrix(c, r), out, ng))
    }

    fn binary(&mut self, op: Binary, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).clone(), self.shape(b).clone());
        let shape = if sa == sb || sb.numel() == 1 {
            sa.clone()
        } else if sa.numel() == 1 {
            sb.clone()
        } else {
            return Err(Error::shape(op_name(op), &sa, &sb));
        };
        let f = match op {
            Binary::Add => |x: f64, y: f64| x + y,
            Binary::Sub => |x: f64, y: f64| x - y,
            Binary::Mul => |x: f64, y: f64| x * y,
        };
        let (av, bv) = (self.value(a), self.value(b));
        let n = shape.numel();
        let out: Vec<f64> = (0..n)
            .map(|i| f(av[if av.len() == 1 { 0 } else { i }], bv[if bv.len() == 1 { 0 } else { i }]))
            .collect();
        let ng = self.needs(&[a, b]);
        Ok(self.push(Op::Binary(op, a, b), shape, out, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    /// Adds the rank-1 `row` to every row of the rank-2 `m`.
    pub fn add_row(&mut self, m: Var, row: Var) -> Result<Var> {
        let (sm, sr) = (self.shape(m).clone(), self.shape(row).clone());
        let c = match (sm.dims(), sr.dims()) {
            ([_, c], [n]) if c == n => *c,
            _ => return Err(Error::shape("add_row", &sm, &sr)),
        };
        let rv = self.value(row).to_vec();
        let out: Vec<f64> = self
            .value(m)
            .iter()
            .enumerate()
            .map(|(i, x)| x + rv[i % c])
            .collect();
        let ng = self.needs(&[m, row]);
        Ok(self.push(Op::AddRow(m, row), sm, out, ng))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * k).collect();
        let (shape, ng) = (self.shape(a).clone(), self.needs(&[a]));
        self.push(Op::Scale(a, k), shape, out, ng)
    }

    fn unary(&mut self, op: Unary, a: Var) -> Var {
        let f = match op {
            Unary::Tanh => f64::tanh,
            Unary::Sigmoid => sigmoid,
            Unary::Relu => |x: f64| if x > 0.0 { x } else { 0.0 },
            Unary::Exp => f64::exp,
        };
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let (shape, ng) = (self.shape(a).clone(), self.needs(&[a]));
        self.push(Op::Unary(op, a), shape, out, ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }

    /// Rectifier; its derivative at exactly 0 is taken to be 0.
    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Unary::Relu, a)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(Unary::Exp, a)
    }

    /// Pointwise dispatcher: unary ops take one argument, binary ops two.
    pub fn elementwise(&mut self, op: Elementwise, args: &[Var]) -> Result<Var> {
        let arity = match op {
            Elementwise::Add | Elementwise::Sub | Elementwise::Mul => 2,
            _ => 1,
        };
        if args.len() != arity {
            return Err(Error::Precondition(format!(
                "{op:?} takes {arity} argument(s), got {}",
                args.len()
            )));
        }
        Ok(match op {
            Elementwise::Add => self.add(args[0], args[1])?,
            Elementwise::Sub => self.sub(args[0], args[1])?,
            Elementwise::Mul => self.mul(args[0], args[1])?,
            Elementwise::Tanh => self.tanh(args[0]),
            Elementwise::Sigmoid => self.sigmoid(args[0]),
            Elementwise::Relu => self.relu(args[0]),
            Elementwise::Exp => self.exp(args[0]),
        })
    }

    /// Numerically stable softmax of a rank-1 tensor (max-subtracted).
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a).clone();
        if s.rank() != 1 {
            return Err(Error::Precondition(format!("softmax needs rank 1, got {s}")));
        }
        let out = softmax_values(self.value(a));
        let ng = self.needs(&[a]);
        Ok(self.push(Op::Softmax(a), s, out, ng))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        self.concat_all(&[a, b])
    }

    /// Concatenates rank-1 tensors end to end, or rank-2 tensors row by row
    /// (all operands must then share a row count).
    pub fn concat_all(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Precondition("concat of zero tensors".into()))?;
        let s0 = self.shape(*first).clone();
        match s0.rank() {
            1 => {
                let mut out = Vec::new();
                for &p in parts {
                    let sp = self.shape(p);
                    if sp.rank() != 1 {
                        return Err(Error::shape("concat", &s0, sp));
                    }
                    out.extend_from_slice(self.value(p));
                }
                let n = out.len();
                let ng = self.needs(parts);
                Ok(self.push(Op::Concat(parts.to_vec()), Shape::vector(n), out, ng))
            }
            _ => {
                let r = s0.dims()[0];
                let mut cols = 0;
                for &p in parts {
                    let sp = self.shape(p);
                    if sp.rank() != 2 || sp.dims()[0] != r {
                        return Err(Error::shape("concat", &s0, sp));
                    }
                    cols += sp.dims()[1];
                }
                let mut out = Vec::with_capacity(r * cols);
                for i in 0..r {
                    for &p in parts {
                        let c = self.shape(p).dims()[1];
                        out.extend_from_slice(&self.value(p)[i * c..(i + 1) * c]);
                    }
                }
                let ng = self.needs(parts);
                Ok(self.push(Op::Concat(parts.to_vec()), Shape::matrix(r, cols), out, ng))
            }
        }
    }

    /// Contiguous range of the flattened (row-major) values as a rank-1 tensor.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.shape(a).numel();
        if len == 0 || start + len > n {
            return Err(Error::Precondition(format!(
                "slice [{start}, {}) out of range for {n} elements",
                start + len
            )));
        }
        let out = self.value(a)[start..start + len].to_vec();
        let ng = self.needs(&[a]);
        Ok(self.push(Op::Slice(a, start), Shape::vector(len), out, ng))
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let s = self.shape(a).clone();
        match s.dims() {
            [r, c] if i < *r => self.slice(a, i * c, *c),
            _ => Err(Error::Precondition(format!("row {i} of {s}"))),
        }
    }

    /// Stacks equal-length rank-1 tensors as the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Precondition("stack of zero rows".into()))?;
        let s0 = self.shape(*first).clone();
        let mut out = Vec::with_capacity(rows.len() * s0.numel());
        for &r in rows {
            let sr = self.shape(r);
            if sr.rank() != 1 || sr != &s0 {
                return Err(Error::shape("stack_rows", &s0, sr));
            }
            out.extend_from_slice(self.value(r));
        }
        let ng = self.needs(rows);
        Ok(self.push(
            Op::StackRows(rows.to_vec()),
            Shape::matrix(rows.len(), s0.numel()),
            out,
            ng,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: Shape) -> Result<Var> {
        let s = self.shape(a);
        if s.numel() != shape.numel() {
            return Err(Error::shape("reshape", s, &shape));
        }
        let out = self.value(a).to_vec();
        let ng = self.needs(&[a]);
        Ok(self.push(Op::Reshape(a), shape, out, ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).iter().sum();
        let ng = self.needs(&[a]);
        self.push(Op::Sum(a), Shape::scalar(), vec![s], ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let ng = self.needs(&[a]);
        self.push(Op::Mean(a), Shape::scalar(), vec![m], ng)
    }

    /// Multiplies by a constant mask (used for dropout).
    pub fn mask_mul(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        let s = self.shape(a).clone();
        if mask.len() != s.numel() {
            return Err(Error::Precondition(format!(
                "mask of {} entries for {s}",
                mask.len()
            )));
        }
        let out = self.value(a).iter().zip(&mask).map(|(x, m)| x * m).collect();
        let ng = self.needs(&[a]);
        Ok(self.push(Op::MaskMul(a, mask), s, out, ng))
    }

    // ----------------------------------------------------------- backward

    /// Propagates d(root)/d(node) to every requires-grad leaf, adding into
    /// any gradient already accumulated there.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let rs = self.shape(root);
        if rs.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got {rs}"
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(vec![1.0]);

        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    let slot = &mut self.leaf_grads[idx];
                    match slot {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, x)| *a += x),
                        None => *slot = Some(g),
                    }
                }
                op => self.propagate(op, idx, &g, &mut adj),
            }
        }
        Ok(())
    }

    fn propagate(&self, op: &Op, idx: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (r, k) = (sa.dims()[0], sa.dims()[1]);
                let c = if sb.rank() == 1 { 1 } else { sb.dims()[1] };
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.node(*a).needs_grad {
                    #[cfg(test)]
                    let fudge = if CORRUPT_MATMUL_GRAD.with(|c| c.get()) { 1.5 } else { 1.0 };
                    #[cfg(not(test))]
                    let fudge = 1.0;
                    let da = slot(adj, *a, r * k);
                    // dA = dC · Bᵀ
                    for i in 0..r {
                        let grow = &g[i * c..(i + 1) * c];
                        for kk in 0..k {
                            let brow = &bv[kk * c..(kk + 1) * c];
                            let s: f64 = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                            da[i * k + kk] += fudge * s;
                        }
                    }
                }
                if self.node(*b).needs_grad {
                    let db = slot(adj, *b, k * c);
                    // dB = Aᵀ · dC
                    for i in 0..r {
                        let grow = &g[i * c..(i + 1) * c];
                        for kk in 0..k {
                            let aik = av[i * k + kk];
                            let drow = &mut db[kk * c..(kk + 1) * c];
                            for (d, x) in drow.iter_mut().zip(grow) {
                                *d += aik * x;
                            }
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (node.shape.dims()[0], node.shape.dims()[1]);
                let da = slot(adj, *a, r * c);
                // node is r×c, input is c×r
                for i in 0..r {
                    for j in 0..c {
                        da[j * r + i] += g[i * c + j];
                    }
                }
            }
            Op::Binary(kind, a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let n = g.len();
                let ai = |i: usize| if av.len() == 1 { 0 } else { i };
                let bi = |i: usize| if bv.len() == 1 { 0 } else { i };
                if self.node(*a).needs_grad {
                    let da = slot(adj, *a, av.len());
                    for i in 0..n {
                        da[ai(i)] += match kind {
                            Binary::Add | Binary::Sub => g[i],
                            Binary::Mul => g[i] * bv[bi(i)],
                        };
                    }
                }
                if self.node(*b).needs_grad {
                    let db = slot(adj, *b, bv.len());
                    for i in 0..n {
                        db[bi(i)] += match kind {
                            Binary::Add => g[i],
                            Binary::Sub => -g[i],
                            Binary::Mul => g[i] * av[ai(i)],
                        };
                    }
                }
            }
            Op::AddRow(m, row) => {
                let c = self.shape(*row).numel();
                if self.node(*m).needs_grad {
                    let dm = slot(adj, *m, g.len());
                    dm.iter_mut().zip(g).for_each(|(d, x)| *d += x);
                }
                if self.node(*row).needs_grad {
                    let dr = slot(adj, *row, c);
                    for (i, x) in g.iter().enumerate() {
                        dr[i % c] += x;
                    }
                }
            }
            Op::Scale(a, k) => {
                let da = slot(adj, *a, g.len());
                da.iter_mut().zip(g).for_each(|(d, x)| *d += k * x);
            }
            Op::Unary(kind, a) => {
                let y = &node.value;
                let x = self.value(*a);
                let da = slot(adj, *a, g.len());
                for i in 0..g.len() {
                    let local = match kind {
                        Unary::Tanh => 1.0 - y[i] * y[i],
                        Unary::Sigmoid => y[i] * (1.0 - y[i]),
                        Unary::Relu => {
                            if x[i] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Unary::Exp => y[i],
                    };
                    da[i] += g[i] * local;
                }
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
                let da = slot(adj, *a, g.len());
                for i in 0..g.len() {
                    da[i] += y[i] * (g[i] - dot);
                }
            }
            Op::Concat(parts) => {
                if node.shape.rank() == 1 {
                    let mut off = 0;
                    for p in parts {
                        let n = self.shape(*p).numel();
                        if self.node(*p).needs_grad {
                            let dp = slot(adj, *p, n);
                            dp.iter_mut()
                                .zip(&g[off..off + n])
                                .for_each(|(d, x)| *d += x);
                        }
                        off += n;
                    }
                } else {
                    let (r, cols) = (node.shape.dims()[0], node.shape.dims()[1]);
                    let mut coff = 0;
                    for p in parts {
                        let c = self.shape(*p).dims()[1];
                        if self.node(*p).needs_grad {
                            let dp = slot(adj, *p, r * c);
                            for i in 0..r {
                                for j in 0..c {
                                    dp[i * c + j] += g[i * cols + coff + j];
                                }
                            }
                        }
                        coff += c;
                    }
                }
            }
            Op::Slice(a, start) => {
                let n = self.shape(*a).numel();
                let da = slot(adj, *a, n);
                da[*start..*start + g.len()]
                    .iter_mut()
                    .zip(g)
                    .for_each(|(d, x)| *d += x);
            }
            Op::StackRows(rows) => {
                let c = node.shape.dims()[1];
                for (i, r) in rows.iter().enumerate() {
                    if self.node(*r).needs_grad {
                        let dr = slot(adj, *r, c);
                        dr.iter_mut()
                            .zip(&g[i * c..(i + 1) * c])
                            .for_each(|(d, x)| *d += x);
                    }
                }
            }
            Op::Reshape(a) => {
                let da = slot(adj, *a, g.len());
                da.iter_mut().zip(g).for_each(|(d, x)| *d += x);
            }
            Op::Sum(a) => {
                let n = self.shape(*a).numel();
                let da = slot(adj, *a, n);
                da.iter_mut().for_each(|d| *d += g[0]);
            }
            Op::Mean(a) => {
                let n = self.shape(*a).numel();
                let da = slot(adj, *a, n);
                let s = g[0] / n as f64;
                da.iter_mut().for_each(|d| *d += s);
            }
            Op::MaskMul(a, mask) => {
                let da = slot(adj, *a, g.len());
                for i in 0..g.len() {
                    da[i] += g[i] * mask[i];
                }
            }
        }
    }
}

fn slot(adj: &mut [Option<Vec<f64>>], v: Var, n: usize) -> &mut [f64] {
    adj[v.0].get_or_insert_with(|| vec![0.0; n])
}

fn op_name(op: Binary) -> &'static str {
    match op {
        Binary::Add => "add",
        Binary::Sub => "sub",
        Binary::Mul => "mul",
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_values(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

#[cfg(test)]
mod tests;
