use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sorted, duplicate-free subset of `0..p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet {
    indices: Vec<usize>,
    p: usize,
}

impl IndexSet {
    /// Sorts and deduplicates `indices`; fails if any index is `>= p`.
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= p {
                return Err(Error::invalid(format!("index {last} out of range for p = {p}")));
            }
        }
        Ok(IndexSet { indices, p })
    }

    pub fn empty(p: usize) -> Self {
        IndexSet { indices: Vec::new(), p }
    }

    pub fn single(j: usize, p: usize) -> Result<Self> {
        Self::new(vec![j], p)
    }

    /// `{0, …, s-1}`.
    pub fn prefix(s: usize, p: usize) -> Result<Self> {
        Self::new((0..s).collect(), p)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.p];
        for &j in &self.indices {
            m[j] = true;
        }
        m
    }

    pub fn complement(&self) -> IndexSet {
        let m = self.mask();
        IndexSet {
            indices: (0..self.p).filter(|&j| !m[j]).collect(),
            p: self.p,
        }
    }

    /// `β_S` as a `|S|`-vector.
    pub fn gather(&self, beta: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&j| beta[j]).collect()
    }

    /// `β_S` zero-extended to `ℝ^p`.
    pub fn restrict(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for &j in &self.indices {
            out[j] = beta[j];
        }
        out
    }

    /// Places a `|S|`-vector back into `ℝ^p` (zeros elsewhere).
    pub fn scatter(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (&j, &v) in self.indices.iter().zip(values) {
            out[j] = v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalises_and_complements() {
        let s = IndexSet::new(vec![3, 1, 3], 5).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert_eq!(s.complement().indices(), &[0, 2, 4]);
        assert!(IndexSet::new(vec![5], 5).is_err());
    }

    #[test]
    fn gather_scatter() {
        let s = IndexSet::new(vec![0, 2], 3).unwrap();
        assert_eq!(s.gather(&[1.0, 2.0, 3.0]), vec![1.0, 3.0]);
        assert_eq!(s.scatter(&[7.0, 8.0]), vec![7.0, 0.0, 8.0]);
        assert_eq!(s.restrict(&[1.0, 2.0, 3.0]), vec![1.0, 0.0, 3.0]);
    }
}
