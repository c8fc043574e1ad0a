use std::sync::Arc;

use super::tape::{Gradients, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// One named parameter inside a flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamEntry {
    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Ordered, contiguous placement of named parameters.
///
/// MLP layouts list layers input-to-output and, within a layer, the weight
/// (`[fan_in, fan_out]`, row-major) before the bias (`[fan_out]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    entries: Vec<ParamEntry>,
    len: usize,
}

impl ParamLayout {
    pub fn new<S: Into<String>>(params: impl IntoIterator<Item = (S, Vec<usize>)>) -> Self {
        let mut offset = 0;
        let entries = params
            .into_iter()
            .map(|(name, shape)| {
                let e = ParamEntry {
                    name: name.into(),
                    shape,
                    offset,
                };
                offset += e.size();
                e
            })
            .collect();
        ParamLayout { entries, len: offset }
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Flat parameter values under a shared layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Arc<ParamLayout>,
}

impl ParamVector {
    pub fn new(layout: Arc<ParamLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::contract(format!(
                "parameter vector of length {} for a layout of length {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(ParamVector { values, layout })
    }

    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let values = vec![0.0; layout.len()];
        ParamVector { values, layout }
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, entry: &ParamEntry) -> &[f64] {
        &self.values[entry.offset..entry.offset + entry.size()]
    }

    /// The named parameter as a tensor.
    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        let e = self
            .layout
            .get(name)
            .ok_or_else(|| Error::contract(format!("no parameter named `{name}`")))?;
        Tensor::new(e.shape.clone(), self.slice(e).to_vec())
    }

    /// Splits back into one tensor per layout entry.
    pub fn unflatten(&self) -> Vec<Tensor> {
        self.layout
            .entries()
            .iter()
            .map(|e| Tensor::new(e.shape.clone(), self.slice(e).to_vec()).expect("layout shape"))
            .collect()
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout
    }
}

/// Gathers the gradients of `nodes` (one per layout entry, in layout order)
/// into a single flat vector.
pub fn flatten_grads(grads: &Gradients, nodes: &[NodeId], layout: &Arc<ParamLayout>) -> Result<ParamVector> {
    if nodes.len() != layout.entries().len() {
        return Err(Error::contract(format!(
            "{} parameter nodes for {} layout entries",
            nodes.len(),
            layout.entries().len()
        )));
    }
    let mut values = Vec::with_capacity(layout.len());
    for (entry, &id) in layout.entries().iter().zip(nodes) {
        let g = grads
            .get(id)
            .ok_or_else(|| Error::contract(format!("missing gradient for parameter `{}`", entry.name)))?;
        if g.shape() != entry.shape.as_slice() {
            return Err(Error::contract(format!(
                "gradient for `{}` has shape {:?}, layout says {:?}",
                entry.name,
                g.shape(),
                entry.shape
            )));
        }
        values.extend_from_slice(g.data());
    }
    ParamVector::new(layout.clone(), values)
}

/// Inverse of [`ParamVector::unflatten`].
pub fn flatten_tensors(tensors: &[Tensor], layout: &Arc<ParamLayout>) -> Result<ParamVector> {
    if tensors.len() != layout.entries().len() {
        return Err(Error::contract("tensor count does not match layout"));
    }
    let mut values = Vec::with_capacity(layout.len());
    for (t, e) in tensors.iter().zip(layout.entries()) {
        if t.shape() != e.shape.as_slice() {
            return Err(Error::contract(format!("shape mismatch for `{}`", e.name)));
        }
        values.extend_from_slice(t.data());
    }
    ParamVector::new(layout.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn two_param_layout() -> Arc<ParamLayout> {
        Arc::new(ParamLayout::new([("w", vec![2, 2]), ("b", vec![2])]))
    }

    #[test]
    fn offsets_are_contiguous() {
        let l = two_param_layout();
        assert_eq!(l.len(), 6);
        assert_eq!(l.entries()[0].offset, 0);
        assert_eq!(l.entries()[1].offset, 4);
    }

    #[test]
    fn flatten_orders_by_layout() {
        let layout = two_param_layout();
        let mut t = Tape::new();
        let w = t.leaf(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = t.leaf(Tensor::vector(vec![5.0, 6.0]).unwrap());
        let sw = t.sum(w).unwrap();
        let bb = t.square(b).unwrap();
        let sb = t.sum(bb).unwrap();
        let f = t.add(sw, sb).unwrap();
        let g = t.backward(f).unwrap();
        let pv = flatten_grads(&g, &[w, b], &layout).unwrap();
        assert_eq!(pv.values(), &[1.0, 1.0, 1.0, 1.0, 10.0, 12.0]);
    }

    #[test]
    fn zero_gradients_flatten_to_zero() {
        let layout = two_param_layout();
        let mut t = Tape::new();
        let w = t.leaf(Tensor::ones(&[2, 2]));
        let b = t.leaf(Tensor::ones(&[2]));
        let c = t.constant(Tensor::scalar(1.0));
        let f = t.square(c).unwrap();
        let g = t.backward(f).unwrap();
        let pv = flatten_grads(&g, &[w, b], &layout).unwrap();
        assert!(pv.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let layout = two_param_layout();
        let mut t = Tape::new();
        let w = t.leaf(Tensor::ones(&[2, 2]));
        let b = t.constant(Tensor::ones(&[2]));
        let f = t.sum(w).unwrap();
        let g = t.backward(f).unwrap();
        assert!(matches!(flatten_grads(&g, &[w, b], &layout), Err(Error::Contract(_))));
    }

    #[test]
    fn unflatten_round_trip_is_bit_exact() {
        let layout = two_param_layout();
        let vals = vec![0.1, -2.5e-300, 3.0, f64::MIN_POSITIVE, 1e300, -0.0];
        let pv = ParamVector::new(layout.clone(), vals.clone()).unwrap();
        let back = flatten_tensors(&pv.unflatten(), &layout).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.values()), bits(&vals));
    }
}
