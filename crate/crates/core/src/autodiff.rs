//! A small tape-based reverse-mode differentiator over 2-D `f64` tensors.
//!
//! A [`Tape`] records one forward computation. Parameters are read from a
//! borrowed [`ParamStore`] rather than copied onto the tape, and
//! [`Tape::backward`] returns their gradients. Row vectors are `1 x d`
//! matrices and linear maps act on the right (`x . W`).

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, Axis};

use crate::error::Result;
use crate::mtt::{self, MarginalGrad, PotentialTable};
use crate::params::{axpy, Gradients, ParamGrad, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Param(ParamId),
    Constant,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    /// Adds a `1 x d` row to every row.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    ConcatCols(Var, Var),
    SliceCols(Var, usize, usize),
    SliceRows(Var, usize, usize),
    StackRows(Vec<Var>),
    /// Row `row` of every source, stacked.
    PickRow(Vec<Var>, usize),
    /// Rows of a table selected by index.
    Gather(Var, Vec<usize>),
    /// `mask * new + (1 - mask) * prev` with a `rows x 1` 0/1 mask.
    MaskBlend(Var, Var, Array2<f64>),
    /// `mask * x` with a `rows x 1` 0/1 mask.
    MaskRows(Var, Array2<f64>),
    /// Column-wise maximum over selected rows; stores the winning row per column.
    MaxPool(Var, Vec<usize>),
    /// Output rows 0..n are arc marginals, row n the root marginals.
    Marginals {
        arc: Var,
        root: Var,
        mask: Vec<bool>,
    },
    /// Negative log-likelihood of `label` under softmax(logits); caches the softmax.
    CrossEntropy(Var, usize, Array2<f64>),
    /// `max(0, margin - (pos - neg))`.
    Hinge(Var, Var, f64),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        match self.nodes[v.0].op {
            Op::Param(id) => self.params.get(id),
            _ => &self.nodes[v.0].value,
        }
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let value = self.value(v);
        debug_assert_eq!(value.dim(), (1, 1));
        value[[0, 0]]
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Array2::zeros((0, 0)), Op::Param(id))
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        self.push(value, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a) * factor;
        self.push(value, Op::Scale(a, factor))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let value = ndarray::concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("row counts agree");
        self.push(value, Op::ConcatCols(a, b))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(value, Op::SliceCols(a, start, end))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(value, Op::SliceRows(a, start, end))
    }

    pub fn stack_rows(&mut self, parts: Vec<Var>) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("column counts agree");
        self.push(value, Op::StackRows(parts))
    }

    pub fn pick_row(&mut self, sources: Vec<Var>, row: usize) -> Var {
        let cols = self.value(sources[0]).ncols();
        let mut value = Array2::zeros((sources.len(), cols));
        for (k, &src) in sources.iter().enumerate() {
            value.row_mut(k).assign(&self.value(src).row(row));
        }
        self.push(value, Op::PickRow(sources, row))
    }

    pub fn gather(&mut self, table: Var, rows: Vec<usize>) -> Var {
        let value = self.value(table).select(Axis(0), &rows);
        self.push(value, Op::Gather(table, rows))
    }

    /// Per-row selection between `new` and `prev`; `mask` holds one bool per row.
    pub fn mask_blend(&mut self, new: Var, prev: Var, mask: &[bool]) -> Var {
        let m = mask_column(mask);
        let mut value = self.value(prev).clone();
        for (r, &keep) in mask.iter().enumerate() {
            if keep {
                value.row_mut(r).assign(&self.value(new).row(r));
            }
        }
        self.push(value, Op::MaskBlend(new, prev, m))
    }

    pub fn mask_rows(&mut self, a: Var, mask: &[bool]) -> Var {
        let m = mask_column(mask);
        let value = self.value(a) * &m;
        self.push(value, Op::MaskRows(a, m))
    }

    /// Column-wise max over the rows where `valid` is true.
    pub fn max_pool(&mut self, a: Var, valid: &[bool]) -> Var {
        let x = self.value(a);
        let cols = x.ncols();
        let mut winners = vec![usize::MAX; cols];
        let mut value = Array2::from_elem((1, cols), f64::NEG_INFINITY);
        for (r, row) in x.rows().into_iter().enumerate() {
            if !valid[r] {
                continue;
            }
            for c in 0..cols {
                if winners[c] == usize::MAX || row[c] > value[[0, c]] {
                    value[[0, c]] = row[c];
                    winners[c] = r;
                }
            }
        }
        assert!(
            winners.iter().all(|&w| w != usize::MAX) || cols == 0,
            "max_pool needs at least one valid row"
        );
        self.push(value, Op::MaxPool(a, winners))
    }

    /// Matrix-tree marginals of `arc` (`n x n`) and `root` (`1 x n`).
    pub fn marginals(&mut self, arc: Var, root: Var, mask: &[bool]) -> Result<Var> {
        let table = self.potential_table(arc, root, mask)?;
        let m = mtt::marginals(&table)?;
        let n = mask.len();
        let mut value = Array2::zeros((n + 1, n));
        value.slice_mut(s![0..n, ..]).assign(&m.arc);
        value.row_mut(n).assign(&m.root);
        Ok(self.push(
            value,
            Op::Marginals {
                arc,
                root,
                mask: mask.to_vec(),
            },
        ))
    }

    pub fn potential_table(&self, arc: Var, root: Var, mask: &[bool]) -> Result<PotentialTable> {
        PotentialTable::with_mask(
            self.value(arc).clone(),
            self.value(root).row(0).to_owned(),
            mask.to_vec(),
        )
    }

    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Var {
        let z = self.value(logits);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp = z.mapv(|v| (v - max).exp());
        let sum = exp.sum();
        let probs = exp / sum;
        let loss = -(z[[0, label]] - max - sum.ln());
        self.push(Array2::from_elem((1, 1), loss), Op::CrossEntropy(logits, label, probs))
    }

    pub fn hinge(&mut self, pos: Var, neg: Var, margin: f64) -> Var {
        let loss = (margin - (self.scalar(pos) - self.scalar(neg))).max(0.0);
        self.push(Array2::from_elem((1, 1), loss), Op::Hinge(pos, neg, margin))
    }

    /// Gradients of the scalar `output` with respect to every parameter.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let mut grads: Vec<Option<Array2<f64>>> = Vec::with_capacity(output.0 + 1);
        grads.resize_with(output.0 + 1, || None);
        grads[output.0] = Some(Array2::ones(self.value(output).dim()));

        let mut result = Gradients::new(self.params.len());
        let mut sparse: BTreeMap<ParamId, BTreeMap<usize, Array1<f64>>> = BTreeMap::new();

        for i in (0..=output.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Param(id) => result.add_dense(*id, g),
                Op::Constant => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.t().to_owned()),
                Op::Add(a, b) => {
                    accumulate_ref(&mut grads, *b, &g, 1.0);
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    let grow = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *row, grow);
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate_ref(&mut grads, *b, &g, -1.0);
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, factor) => accumulate(&mut grads, *a, g * *factor),
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value;
                    let ga = g * &y.mapv(|t| 1.0 - t * t);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[i].value;
                    let ga = g * &y.mapv(|s| s * (1.0 - s));
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(a, b) => {
                    let split = self.value(*a).ncols();
                    accumulate(&mut grads, *a, g.slice(s![.., ..split]).to_owned());
                    accumulate(&mut grads, *b, g.slice(s![.., split..]).to_owned());
                }
                Op::SliceCols(a, start, end) => {
                    let mut full = Array2::zeros(self.value(*a).dim());
                    full.slice_mut(s![.., *start..*end]).assign(&g);
                    accumulate(&mut grads, *a, full);
                }
                Op::SliceRows(a, start, end) => {
                    let mut full = Array2::zeros(self.value(*a).dim());
                    full.slice_mut(s![*start..*end, ..]).assign(&g);
                    accumulate(&mut grads, *a, full);
                }
                Op::StackRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).nrows();
                        accumulate(&mut grads, p, g.slice(s![offset..offset + rows, ..]).to_owned());
                        offset += rows;
                    }
                }
                Op::PickRow(sources, row) => {
                    for (k, &src) in sources.iter().enumerate() {
                        let mut full = Array2::zeros(self.value(src).dim());
                        full.row_mut(*row).assign(&g.row(k));
                        accumulate(&mut grads, src, full);
                    }
                }
                Op::Gather(table, rows) => {
                    if let Op::Param(id) = self.nodes[table.0].op {
                        let entry = sparse.entry(id).or_default();
                        for (k, &r) in rows.iter().enumerate() {
                            match entry.get_mut(&r) {
                                Some(existing) => *existing += &g.row(k),
                                None => {
                                    entry.insert(r, g.row(k).to_owned());
                                }
                            }
                        }
                    } else {
                        let mut full = Array2::zeros(self.value(*table).dim());
                        for (k, &r) in rows.iter().enumerate() {
                            let mut target = full.row_mut(r);
                            target += &g.row(k);
                        }
                        accumulate(&mut grads, *table, full);
                    }
                }
                Op::MaskBlend(new, prev, m) => {
                    let gnew = &g * m;
                    let gprev = &g * &m.mapv(|x| 1.0 - x);
                    accumulate(&mut grads, *new, gnew);
                    accumulate(&mut grads, *prev, gprev);
                }
                Op::MaskRows(a, m) => accumulate(&mut grads, *a, g * m),
                Op::MaxPool(a, winners) => {
                    let mut full = Array2::zeros(self.value(*a).dim());
                    for (c, &r) in winners.iter().enumerate() {
                        full[[r, c]] += g[[0, c]];
                    }
                    accumulate(&mut grads, *a, full);
                }
                Op::Marginals { arc, root, mask } => {
                    let n = mask.len();
                    let upstream = MarginalGrad {
                        arc: g.slice(s![0..n, ..]).to_owned(),
                        root: g.row(n).to_owned(),
                        log_z: 0.0,
                    };
                    let table = self.potential_table(*arc, *root, mask)?;
                    let pg = mtt::marginals_backward(&table, &upstream)?;
                    accumulate(&mut grads, *arc, pg.arc);
                    accumulate(&mut grads, *root, pg.root.insert_axis(Axis(0)));
                }
                Op::CrossEntropy(logits, label, probs) => {
                    let mut gl = probs.clone();
                    gl[[0, *label]] -= 1.0;
                    gl *= g[[0, 0]];
                    accumulate(&mut grads, *logits, gl);
                }
                Op::Hinge(pos, neg, margin) => {
                    let active = *margin - (self.scalar(*pos) - self.scalar(*neg)) > 0.0;
                    if active {
                        let d = g[[0, 0]];
                        accumulate(&mut grads, *pos, Array2::from_elem((1, 1), -d));
                        accumulate(&mut grads, *neg, Array2::from_elem((1, 1), d));
                    }
                }
            }
        }

        for (id, rows) in sparse {
            result.add(id, ParamGrad::Rows(rows));
        }
        Ok(result)
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

fn accumulate_ref(grads: &mut [Option<Array2<f64>>], v: Var, g: &Array2<f64>, factor: f64) {
    match &mut grads[v.0] {
        Some(existing) => axpy(existing, g, factor),
        slot @ None => *slot = Some(g * factor),
    }
}

fn mask_column(mask: &[bool]) -> Array2<f64> {
    Array2::from_shape_fn((mask.len(), 1), |(r, _)| if mask[r] { 1.0 } else { 0.0 })
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
