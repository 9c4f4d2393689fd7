use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted, duplicate-free set of column indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    /// Validates that every index is below `p` and that there are no repeats.
    pub fn new(indices: impl IntoIterator<Item = usize>, p: usize) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        let len = v.len();
        v.sort_unstable();
        v.dedup();
        if v.len() != len {
            return Err(Error::InvalidSupport("duplicate column index".into()));
        }
        if let Some(&bad) = v.iter().find(|&&i| i >= p) {
            return Err(Error::InvalidSupport(format!("column {bad} out of range for p={p}")));
        }
        Ok(Self(v))
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Self(mask.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Columns of `0..p` not in the set.
    pub fn complement(&self, p: usize) -> Vec<usize> {
        (0..p).filter(|j| !self.contains(*j)).collect()
    }

    pub fn to_mask(&self, p: usize) -> Vec<bool> {
        (0..p).map(|j| self.contains(j)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_validates() {
        let s = SupportSet::new([3, 1], 4).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert_eq!(s.complement(4), vec![0, 2]);
        assert!(SupportSet::new([1, 1], 4).is_err());
        assert!(SupportSet::new([4], 4).is_err());
    }
}
