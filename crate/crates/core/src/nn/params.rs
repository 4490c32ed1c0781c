//! Named trainable parameters and per-parameter gradient buffers.

use indexmap::IndexMap;
use rand::Rng;

use super::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Parameter { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: IndexMap<String, Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Panics on a duplicate name, which is a
    /// programming error in model construction.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(!self.params.contains_key(&name), "duplicate parameter {name}");
        let (idx, _) = self.params.insert_full(name, Parameter::new(value));
        ParamId(idx)
    }

    /// Uniform Xavier/Glorot initialisation.
    pub fn add_xavier(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut impl Rng) -> ParamId {
        let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
        let m = Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound));
        self.add(name, m)
    }

    pub fn add_uniform(&mut self, name: impl Into<String>, rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> ParamId {
        let m = Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound));
        self.add(name, m)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Matrix::zeros(rows, cols))
    }

    pub fn add_filled(&mut self, name: impl Into<String>, rows: usize, cols: usize, v: f64) -> ParamId {
        self.add(name, Matrix::filled(rows, cols, v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.get_index_of(name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.params.get_index(id.0).map(|(n, _)| n.as_str()).unwrap_or("")
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.params.iter().map(|(n, p)| (n.as_str(), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter)> {
        self.params.iter_mut().map(|(n, p)| (n.as_str(), p))
    }

    pub fn zero_grad(&mut self) {
        self.params.values_mut().for_each(Parameter::zero_grad);
    }

    pub fn accumulate(&mut self, grads: &ParamGrads) {
        for (p, g) in self.params.values_mut().zip(&grads.0) {
            if let Some(g) = g {
                p.grad.add_assign(g);
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.values().map(|p| p.value.data().len()).sum()
    }
}

/// Gradients for every parameter of a store, indexed by `ParamId`.
/// `None` means the parameter did not take part in the graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamGrads(pub(crate) Vec<Option<Matrix>>);

impl ParamGrads {
    pub fn empty(n: usize) -> Self {
        ParamGrads(vec![None; n])
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.0.get(id.0).and_then(Option::as_ref)
    }

    /// Adds `other` into `self`. Order of calls fixes the floating-point
    /// summation order, so reductions stay deterministic.
    pub fn merge(&mut self, other: ParamGrads) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), None);
        }
        for (mine, theirs) in self.0.iter_mut().zip(other.0) {
            match (mine.as_mut(), theirs) {
                (Some(a), Some(b)) => a.add_assign(&b),
                (None, Some(b)) => *mine = Some(b),
                _ => {}
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.0.iter_mut().flatten() {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_name_and_id() {
        let mut s = ParamStore::new();
        let a = s.add_zeros("a", 2, 3);
        let b = s.add_filled("b", 1, 1, 2.0);
        assert_eq!(s.id("b"), Some(b));
        assert_eq!(s.name(a), "a");
        assert_eq!(s.get(a).grad.shape(), (2, 3));
        assert_eq!(s.parameter_count(), 7);
    }

    #[test]
    fn merge_adds_in_order() {
        let mut g = ParamGrads::empty(2);
        g.merge(ParamGrads(vec![Some(Matrix::filled(1, 1, 1.0)), None]));
        g.merge(ParamGrads(vec![Some(Matrix::filled(1, 1, 2.0)), Some(Matrix::filled(1, 1, 5.0))]));
        assert_eq!(g.get(ParamId(0)).unwrap().get(0, 0), 3.0);
        assert_eq!(g.get(ParamId(1)).unwrap().get(0, 0), 5.0);
    }
}
