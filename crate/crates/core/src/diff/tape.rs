//! Reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node to the [`Tape`]. [`Tape::grad`] walks the
//! nodes backwards and emits the adjoint computation as *new tape nodes*, so
//! a gradient is itself an ordinary [`Var`] that can be fed into further
//! operations and differentiated again. The gradient penalty relies on this:
//! it differentiates a function of `∂critic/∂input` with respect to the
//! critic parameters.
//!
//! Shape mismatches inside the tape are programming errors and panic; the
//! checked entry points in [`super::nn`] return [`crate::Error::Shape`].

use std::rc::Rc;

use crate::matrix::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// `a (n×m) + b (1×m)` broadcast over rows.
    AddRow(Var, Var),
    /// `a (n×m) * c (n×1)` broadcast over columns.
    MulCol(Var, Var),
    Scale(Var, T),
    Shift(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Square(Var),
    Clamp(Var, T, T),
    Mask(Var, Rc<Matrix<T>>),
    Transpose(Var),
    SumAll(Var),
    Fill(Var),
    SumRows(Var),
    SumCols(Var),
    BroadcastRows(Var),
    BroadcastCols(Var),
    SliceCols(Var, usize),
    PadCols(Var, usize),
    ConcatCols(Rc<[Var]>),
}

#[derive(Debug)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input, parameter or constant. Whether it is differentiated depends only
    /// on whether it appears in the `wrt` list of [`Tape::grad`].
    pub fn leaf(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar_leaf(&mut self, value: T) -> Var {
        self.leaf(Matrix::filled(1, 1, value))
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn scalar(&self, v: Var) -> T {
        let m = &self.nodes[v.0].value;
        assert_eq!(m.shape(), (1, 1), "scalar() on a non-scalar node");
        m[(0, 0)]
    }

    fn val(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) {
        assert_eq!(self.shape(a), self.shape(b), "{what}: shape mismatch");
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.val(a).matmul(self.val(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "add");
        let v = self.val(a).zip_map(self.val(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "sub");
        let v = self.val(a).zip_map(self.val(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "mul");
        let v = self.val(a).zip_map(self.val(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "div");
        let v = self.val(a).zip_map(self.val(b), |x, y| x / y);
        self.push(v, Op::Div(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (n, m) = self.shape(a);
        assert_eq!(self.shape(row), (1, m), "add_row: bias must be 1x{m}");
        let mut v = self.val(a).clone();
        let b = self.val(row).as_slice().to_vec();
        for i in 0..n {
            for (x, &bj) in v.row_mut(i).iter_mut().zip(&b) {
                *x += bj;
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (n, _) = self.shape(a);
        assert_eq!(self.shape(col), (n, 1), "mul_col: factor must be {n}x1");
        let mut v = self.val(a).clone();
        let c = self.val(col).as_slice().to_vec();
        for (i, &ci) in c.iter().enumerate() {
            v.row_mut(i).iter_mut().for_each(|x| *x *= ci);
        }
        self.push(v, Op::MulCol(a, col))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let v = self.val(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    /// `a + s` elementwise.
    pub fn shift(&mut self, a: Var, s: T) -> Var {
        let v = self.val(a).map(|x| x + s);
        self.push(v, Op::Shift(a))
    }

    /// `s - a` elementwise.
    pub fn rsub(&mut self, s: T, a: Var) -> Var {
        let n = self.neg(a);
        self.shift(n, s)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.val(a).map(|x| x.max(T::zero()));
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.val(a).map(T::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.val(a).map(|x| {
            if x >= T::zero() {
                T::one() / (T::one() + (-x).exp())
            } else {
                let e = x.exp();
                e / (T::one() + e)
            }
        });
        self.push(v, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.val(a).map(T::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.val(a).map(T::ln);
        self.push(v, Op::Ln(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.val(a).map(T::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.val(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    /// Clips into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        let v = self.val(a).map(|x| x.max(lo).min(hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    /// Elementwise product with a constant matrix.
    fn mask(&mut self, a: Var, m: Rc<Matrix<T>>) -> Var {
        let v = self.val(a).zip_map(&m, |x, y| x * y);
        self.push(v, Op::Mask(a, m))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.val(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    /// Sum of all entries, as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.val(a).sum();
        self.push(Matrix::filled(1, 1, s), Op::SumAll(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let s = self.sum(a);
        self.scale(s, T::one() / T::of_usize((r * c).max(1)))
    }

    /// Broadcasts a 1×1 node to `rows×cols`.
    pub fn fill(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let x = self.scalar(a);
        self.push(Matrix::filled(rows, cols, x), Op::Fill(a))
    }

    /// Row sums, `n×m → n×1`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let m = self.val(a);
        let data: Vec<T> = m.iter_rows().map(|r| r.iter().copied().sum()).collect();
        let v = Matrix::from_vec(m.rows(), 1, data).expect("shape");
        self.push(v, Op::SumRows(a))
    }

    /// Column sums, `n×m → 1×m`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let m = self.val(a);
        let mut out = Matrix::zeros(1, m.cols());
        for r in m.iter_rows() {
            for (o, &x) in out.as_mut_slice().iter_mut().zip(r) {
                *o += x;
            }
        }
        self.push(out, Op::SumCols(a))
    }

    /// Repeats a `1×m` row `rows` times.
    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Var {
        let m = self.val(a);
        assert_eq!(m.rows(), 1, "broadcast_rows expects a single row");
        let mut data = Vec::with_capacity(rows * m.cols());
        for _ in 0..rows {
            data.extend_from_slice(m.as_slice());
        }
        let v = Matrix::from_vec(rows, m.cols(), data).expect("shape");
        self.push(v, Op::BroadcastRows(a))
    }

    /// Repeats an `n×1` column `cols` times.
    pub fn broadcast_cols(&mut self, a: Var, cols: usize) -> Var {
        let m = self.val(a);
        assert_eq!(m.cols(), 1, "broadcast_cols expects a single column");
        let mut data = Vec::with_capacity(m.rows() * cols);
        for &x in m.as_slice() {
            data.extend(std::iter::repeat(x).take(cols));
        }
        let v = Matrix::from_vec(m.rows(), cols, data).expect("shape");
        self.push(v, Op::BroadcastCols(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.val(a).slice_cols(start, len);
        self.push(v, Op::SliceCols(a, start))
    }

    /// Places `a` at columns `start..` of a zero matrix with `total` columns.
    fn pad_cols(&mut self, a: Var, start: usize, total: usize) -> Var {
        let m = self.val(a);
        assert!(start + m.cols() <= total, "pad_cols out of range");
        let mut out = Matrix::zeros(m.rows(), total);
        for i in 0..m.rows() {
            out.row_mut(i)[start..start + m.cols()].copy_from_slice(m.row(i));
        }
        self.push(out, Op::PadCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let v = {
            let mats: Vec<&Matrix<T>> = parts.iter().map(|&p| self.val(p)).collect();
            Matrix::hconcat(&mats)
        };
        self.push(v, Op::ConcatCols(parts.into()))
    }

    /// Row-wise softmax. The row maximum is subtracted as a constant, which
    /// leaves both value and gradient unchanged.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (n, m) = self.shape(a);
        let maxes: Vec<T> = self
            .val(a)
            .iter_rows()
            .map(|r| r.iter().copied().fold(T::neg_infinity(), T::max))
            .collect();
        let shift = self.leaf(Matrix::from_vec(n, 1, maxes).expect("shape"));
        let shift = self.broadcast_cols(shift, m);
        let z = self.sub(a, shift);
        let e = self.exp(z);
        let s = self.sum_rows(e);
        let s = self.broadcast_cols(s, m);
        self.div(e, s)
    }

    /// Gradients of the scalar `y` with respect to each of `wrt`, recorded on
    /// the tape. Unreachable inputs get a zero node of matching shape.
    pub fn grad(&mut self, y: Var, wrt: &[Var]) -> Vec<Var> {
        assert_eq!(self.shape(y), (1, 1), "grad() needs a scalar output");
        let end = y.0 + 1;
        let mut needs = vec![false; end];
        for &w in wrt {
            if w.0 < end {
                needs[w.0] = true;
            }
        }
        for id in 0..end {
            if needs[id] {
                continue;
            }
            needs[id] = self.parents(id).iter().any(|p| needs[p.0]);
        }

        let mut adj: Vec<Option<Var>> = vec![None; end];
        adj[y.0] = Some(self.scalar_leaf(T::one()));
        for id in (0..end).rev() {
            if !needs[id] {
                continue;
            }
            let Some(g) = adj[id] else { continue };
            let op = self.nodes[id].op.clone();
            let out = Var(id);
            let mut send = |tape: &mut Self, p: Var, f: &dyn Fn(&mut Self) -> Var| {
                if needs[p.0] {
                    let c = f(tape);
                    adj[p.0] = Some(match adj[p.0] {
                        None => c,
                        Some(prev) => tape.add(prev, c),
                    });
                }
            };
            match op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    send(self, a, &|t| {
                        let bt = t.transpose(b);
                        t.matmul(g, bt)
                    });
                    send(self, b, &|t| {
                        let at = t.transpose(a);
                        t.matmul(at, g)
                    });
                }
                Op::Add(a, b) => {
                    send(self, a, &|_| g);
                    send(self, b, &|_| g);
                }
                Op::Sub(a, b) => {
                    send(self, a, &|_| g);
                    send(self, b, &|t| t.neg(g));
                }
                Op::Mul(a, b) => {
                    send(self, a, &|t| t.mul(g, b));
                    send(self, b, &|t| t.mul(g, a));
                }
                Op::Div(a, b) => {
                    send(self, a, &|t| t.div(g, b));
                    send(self, b, &|t| {
                        let q = t.div(out, b);
                        let gq = t.mul(g, q);
                        t.neg(gq)
                    });
                }
                Op::AddRow(a, b) => {
                    send(self, a, &|_| g);
                    send(self, b, &|t| t.sum_cols(g));
                }
                Op::MulCol(a, c) => {
                    send(self, a, &|t| t.mul_col(g, c));
                    send(self, c, &|t| {
                        let ga = t.mul(g, a);
                        t.sum_rows(ga)
                    });
                }
                Op::Scale(a, s) => send(self, a, &|t| t.scale(g, s)),
                Op::Shift(a) => send(self, a, &|_| g),
                Op::Relu(a) => send(self, a, &|t| {
                    let m = t
                        .val(a)
                        .map(|x| if x > T::zero() { T::one() } else { T::zero() });
                    t.mask(g, Rc::new(m))
                }),
                Op::Clamp(a, lo, hi) => send(self, a, &|t| {
                    let m = t.val(a).map(|x| {
                        if x >= lo && x <= hi {
                            T::one()
                        } else {
                            T::zero()
                        }
                    });
                    t.mask(g, Rc::new(m))
                }),
                Op::Mask(a, m) => send(self, a, &|t| t.mask(g, m.clone())),
                Op::Tanh(a) => send(self, a, &|t| {
                    let y2 = t.square(out);
                    let d = t.rsub(T::one(), y2);
                    t.mul(g, d)
                }),
                Op::Sigmoid(a) => send(self, a, &|t| {
                    let one_minus = t.rsub(T::one(), out);
                    let d = t.mul(out, one_minus);
                    t.mul(g, d)
                }),
                Op::Exp(a) => send(self, a, &|t| t.mul(g, out)),
                Op::Ln(a) => send(self, a, &|t| t.div(g, a)),
                Op::Sqrt(a) => send(self, a, &|t| {
                    let h = t.scale(g, T::of(0.5));
                    t.div(h, out)
                }),
                Op::Square(a) => send(self, a, &|t| {
                    let two_a = t.scale(a, T::of(2.0));
                    t.mul(g, two_a)
                }),
                Op::Transpose(a) => send(self, a, &|t| t.transpose(g)),
                Op::SumAll(a) => send(self, a, &|t| {
                    let (r, c) = t.shape(a);
                    t.fill(g, r, c)
                }),
                Op::Fill(a) => send(self, a, &|t| t.sum(g)),
                Op::SumRows(a) => send(self, a, &|t| {
                    let c = t.shape(a).1;
                    t.broadcast_cols(g, c)
                }),
                Op::SumCols(a) => send(self, a, &|t| {
                    let r = t.shape(a).0;
                    t.broadcast_rows(g, r)
                }),
                Op::BroadcastRows(a) => send(self, a, &|t| t.sum_cols(g)),
                Op::BroadcastCols(a) => send(self, a, &|t| t.sum_rows(g)),
                Op::SliceCols(a, start) => send(self, a, &|t| {
                    let total = t.shape(a).1;
                    t.pad_cols(g, start, total)
                }),
                Op::PadCols(a, start) => send(self, a, &|t| {
                    let len = t.shape(a).1;
                    t.slice_cols(g, start, len)
                }),
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts.iter() {
                        let w = self.shape(p).1;
                        let o = offset;
                        send(self, p, &|t| t.slice_cols(g, o, w));
                        offset += w;
                    }
                }
            }
        }

        wrt.iter()
            .map(|&w| match adj.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let (r, c) = self.shape(w);
                    self.leaf(Matrix::zeros(r, c))
                }
            })
            .collect()
    }

    fn parents(&self, id: usize) -> Vec<Var> {
        match &self.nodes[id].op {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::AddRow(a, b)
            | Op::MulCol(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Shift(a)
            | Op::Relu(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Sqrt(a)
            | Op::Square(a)
            | Op::Clamp(a, _, _)
            | Op::Mask(a, _)
            | Op::Transpose(a)
            | Op::SumAll(a)
            | Op::Fill(a)
            | Op::SumRows(a)
            | Op::SumCols(a)
            | Op::BroadcastRows(a)
            | Op::BroadcastCols(a)
            | Op::SliceCols(a, _)
            | Op::PadCols(a, _) => vec![*a],
            Op::ConcatCols(parts) => parts.to_vec(),
        }
    }
}
