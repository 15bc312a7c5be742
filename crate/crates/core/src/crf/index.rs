//! Feature-string index and parameter layout.

use std::collections::HashMap;

/// Maps feature strings to dense attribute ids and fixes the weight-vector
/// layout: the `L*L` transition block sits at the front, then each attribute
/// owns a block of `L` consecutive emission weights, so the total parameter
/// count is `L*L + num_attributes()*L`.
#[derive(Debug, Clone, Default)]
pub struct FeatureIndex {
    attrs: Vec<String>,
    map: HashMap<String, u32>,
    n_labels: u32,
}

impl FeatureIndex {
    pub fn new(n_labels: u32) -> Self {
        FeatureIndex {
            attrs: Vec::new(),
            map: HashMap::new(),
            n_labels,
        }
    }

    pub fn n_labels(&self) -> u32 {
        self.n_labels
    }

    /// Number of indexed feature strings.
    pub fn num_attributes(&self) -> usize {
        self.attrs.len()
    }

    /// Total weight slots spanned by the index.
    pub fn n_weights(&self) -> usize {
        let l = self.n_labels as usize;
        l * l + self.attrs.len() * l
    }

    /// Returns the attribute id, inserting on first sight.
    pub fn intern(&mut self, attr: &str) -> u32 {
        if let Some(&id) = self.map.get(attr) {
            return id;
        }
        let id = self.attrs.len() as u32;
        self.attrs.push(attr.to_string());
        self.map.insert(attr.to_string(), id);
        id
    }

    pub fn lookup(&self, attr: &str) -> Option<u32> {
        self.map.get(attr).copied()
    }

    pub fn attr(&self, id: u32) -> &str {
        &self.attrs[id as usize]
    }

    /// Attribute strings in index order.
    pub fn attrs(&self) -> impl Iterator<Item = &str> {
        self.attrs.iter().map(String::as_str)
    }

    #[inline]
    pub fn transition_slot(&self, from: u32, to: u32) -> usize {
        (from * self.n_labels + to) as usize
    }

    #[inline]
    pub fn emission_slot(&self, attr: u32, label: u32) -> usize {
        (self.n_labels * self.n_labels + attr * self.n_labels + label) as usize
    }
}
