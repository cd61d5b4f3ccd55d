//! Named parameter tensors and their gradients.

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array1, Array2, Zip};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// An ordered collection of named 2-D parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidInput(format!("duplicate parameter '{}'", name)));
        }
        let id = self.values.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        Ok(ParamId(id))
    }

    /// Insert a tensor drawn uniformly from `[-scale, scale]`.
    pub fn insert_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: (usize, usize),
        scale: f64,
        rng: &mut R,
    ) -> Result<ParamId> {
        let value = Array2::from_shape_fn(shape, |_| rng.gen_range(-scale..=scale));
        self.insert(name, value)
    }

    pub fn insert_zeros(&mut self, name: impl Into<String>, shape: (usize, usize)) -> Result<ParamId> {
        self.insert(name, Array2::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    /// Same names in the same order with the same shapes.
    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.names == other.names
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.dim() == b.dim())
    }

    pub fn zeros_like(&self) -> ParamStore {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(|v| Array2::zeros(v.dim())).collect(),
            index: self.index.clone(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Gradient of one parameter: dense, or a sparse set of rows (embedding lookups).
#[derive(Clone, Debug, PartialEq)]
pub enum ParamGrad {
    Dense(Array2<f64>),
    Rows(BTreeMap<usize, Array1<f64>>),
}

impl ParamGrad {
    pub fn squared_norm(&self) -> f64 {
        match self {
            ParamGrad::Dense(g) => g.iter().map(|x| x * x).sum(),
            ParamGrad::Rows(rows) => rows.values().flat_map(|r| r.iter()).map(|x| x * x).sum(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        match self {
            ParamGrad::Dense(g) => g.mapv_inplace(|x| x * factor),
            ParamGrad::Rows(rows) => rows.values_mut().for_each(|r| r.mapv_inplace(|x| x * factor)),
        }
    }

    /// Dense view of the gradient for a parameter of the given shape.
    pub fn to_dense(&self, shape: (usize, usize)) -> Array2<f64> {
        match self {
            ParamGrad::Dense(g) => g.clone(),
            ParamGrad::Rows(rows) => {
                let mut dense = Array2::zeros(shape);
                for (&r, row) in rows {
                    dense.row_mut(r).assign(row);
                }
                dense
            }
        }
    }

    fn accumulate(&mut self, other: &ParamGrad) {
        match (self, other) {
            (ParamGrad::Dense(a), ParamGrad::Dense(b)) => *a += b,
            (ParamGrad::Rows(a), ParamGrad::Rows(b)) => {
                for (&r, row) in b {
                    match a.get_mut(&r) {
                        Some(existing) => *existing += row,
                        None => {
                            a.insert(r, row.clone());
                        }
                    }
                }
            }
            (ParamGrad::Dense(a), ParamGrad::Rows(b)) => {
                for (&r, row) in b {
                    let mut target = a.row_mut(r);
                    target += row;
                }
            }
            (this @ ParamGrad::Rows(_), ParamGrad::Dense(b)) => {
                let mut dense = b.clone();
                if let ParamGrad::Rows(a) = &*this {
                    for (&r, row) in a {
                        let mut target = dense.row_mut(r);
                        target += row;
                    }
                }
                *this = ParamGrad::Dense(dense);
            }
        }
    }
}

/// Gradients for every parameter of a [`ParamStore`]; absent entries are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<ParamGrad>>,
}

impl Gradients {
    pub fn new(num_params: usize) -> Self {
        Gradients {
            grads: vec![None; num_params],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&ParamGrad> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn add(&mut self, id: ParamId, grad: ParamGrad) {
        if self.grads.len() <= id.0 {
            self.grads.resize(id.0 + 1, None);
        }
        match &mut self.grads[id.0] {
            Some(existing) => existing.accumulate(&grad),
            slot @ None => *slot = Some(grad),
        }
    }

    pub fn add_dense(&mut self, id: ParamId, grad: Array2<f64>) {
        self.add(id, ParamGrad::Dense(grad));
    }

    /// Sum `other` into `self`.
    pub fn merge(&mut self, other: &Gradients) {
        for (i, g) in other.grads.iter().enumerate() {
            if let Some(g) = g {
                self.add(ParamId(i), g.clone());
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.grads.iter_mut().flatten().for_each(|g| g.scale(factor));
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .map(ParamGrad::squared_norm)
            .sum::<f64>()
            .sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamGrad)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| match g {
            ParamGrad::Dense(d) => d.iter().all(|x| x.is_finite()),
            ParamGrad::Rows(rows) => rows.values().all(|r| r.iter().all(|x| x.is_finite())),
        })
    }
}

/// `a += b * factor`, elementwise.
pub(crate) fn axpy(a: &mut Array2<f64>, b: &Array2<f64>, factor: f64) {
    Zip::from(a).and(b).for_each(|x, &y| *x += y * factor);
}
