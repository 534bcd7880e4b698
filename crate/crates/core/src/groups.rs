use crate::error::{Error, Result};

/// A partition of the feature indices `0..p` into disjoint groups, each with a weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    group_of: Vec<usize>,
}

/// How default group weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// `w_g = 1`
    #[default]
    Ones,
    /// `w_g = sqrt(|g|)`
    SqrtSize,
}

impl WeightScheme {
    fn weight(self, size: usize) -> f64 {
        match self {
            WeightScheme::Ones => 1.0,
            WeightScheme::SqrtSize => (size as f64).sqrt(),
        }
    }
}

impl GroupPartition {
    /// Validates that `groups` partitions `0..p` and that weights are non-negative.
    ///
    /// Zero weights are accepted here; whether they make sense depends on the penalty.
    pub fn new(p: usize, groups: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        if groups.len() != weights.len() {
            return Err(Error::InvalidPartition(format!(
                "{} groups but {} weights",
                groups.len(),
                weights.len()
            )));
        }
        let mut group_of = vec![usize::MAX; p];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("group {g} is empty")));
            }
            for &j in members {
                if j >= p {
                    return Err(Error::InvalidPartition(format!(
                        "feature {j} out of range (p = {p})"
                    )));
                }
                if group_of[j] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "feature {j} belongs to groups {} and {g}",
                        group_of[j]
                    )));
                }
                group_of[j] = g;
            }
        }
        if let Some(j) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::InvalidPartition(format!("feature {j} is not covered")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidPartition(format!("invalid weight {w}")));
        }
        Ok(Self {
            groups,
            weights,
            group_of,
        })
    }

    pub fn with_scheme(p: usize, groups: Vec<Vec<usize>>, scheme: WeightScheme) -> Result<Self> {
        let weights = groups.iter().map(|g| scheme.weight(g.len())).collect();
        Self::new(p, groups, weights)
    }

    /// One group per feature, unit weights.
    pub fn singletons(p: usize) -> Self {
        Self {
            groups: (0..p).map(|j| vec![j]).collect(),
            weights: vec![1.0; p],
            group_of: (0..p).collect(),
        }
    }

    /// Consecutive blocks of `size` features (the last block may be shorter).
    pub fn contiguous(p: usize, size: usize, scheme: WeightScheme) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidPartition("group size must be positive".into()));
        }
        let groups: Vec<Vec<usize>> = (0..p)
            .step_by(size)
            .map(|s| (s..(s + size).min(p)).collect())
            .collect();
        Self::with_scheme(p, groups, scheme)
    }

    /// Groups features by label; groups are ordered by first appearance.
    pub fn from_labels<T: PartialEq + Clone>(labels: &[T], scheme: WeightScheme) -> Result<Self> {
        let mut keys: Vec<T> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (j, label) in labels.iter().enumerate() {
            match keys.iter().position(|k| k == label) {
                Some(g) => groups[g].push(j),
                None => {
                    keys.push(label.clone());
                    groups.push(vec![j]);
                }
            }
        }
        Self::with_scheme(labels.len(), groups, scheme)
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_features(&self) -> usize {
        self.group_of.len()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn weight(&self, g: usize) -> f64 {
        self.weights[g]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn group_of(&self, j: usize) -> usize {
        self.group_of[j]
    }

    pub fn is_singletons(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    pub fn max_group_size(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }
}
