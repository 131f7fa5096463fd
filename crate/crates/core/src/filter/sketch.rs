//! Adaptive dimension-group sketches.
//!
//! A sketch assigns every dimension of a reference action feature to the
//! value group its entry falls in, then keeps only the per-group minimum,
//! maximum and member count. The groups with the fewest members (the
//! "sparse" groups) additionally keep their exact values. A reconstruction
//! is sketched over the *same* dimension assignment, so the two sketches
//! describe corresponding dimensions group by group.

use std::sync::Arc;

use super::partition::DimensionPartition;
use crate::stream::ActionFeature;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Dimension-to-group assignment shared by a sketch and its aligned partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub n_groups: usize,
    /// Member dimensions of each group, in increasing order.
    pub members: Vec<Vec<u32>>,
    /// Occupied groups stored exactly, fewest members first.
    pub sparse: Vec<usize>,
}

impl Grouping {
    pub fn is_sparse(&self, g: usize) -> bool {
        self.sparse.contains(&g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdgSketch {
    pub grouping: Arc<Grouping>,
    /// Per-group statistics; `None` for empty groups.
    pub groups: Vec<Option<GroupStats>>,
    /// Exact `(dimension, value)` pairs of each sparse group, aligned with `grouping.sparse`.
    pub sparse_exact: Vec<Vec<(u32, f64)>>,
    /// Per-group `(min, max)` of the midpoint `(f + f̂)/2`; only on aligned sketches.
    pub midpoint: Option<Vec<(f64, f64)>>,
}

fn stats(values: &[f64], members: &[u32]) -> Option<GroupStats> {
    if members.is_empty() {
        return None;
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &d in members {
        let v = values[d as usize];
        min = min.min(v);
        max = max.max(v);
    }
    Some(GroupStats {
        min,
        max,
        count: members.len(),
    })
}

fn exact(values: &[f64], grouping: &Grouping) -> Vec<Vec<(u32, f64)>> {
    grouping
        .sparse
        .iter()
        .map(|&g| {
            grouping.members[g]
                .iter()
                .map(|&d| (d, values[d as usize]))
                .collect()
        })
        .collect()
}

/// Sketches `f` over its own dimension assignment, keeping `n_sparse` groups exactly.
pub fn adg_sketch(f: &ActionFeature, partition: &DimensionPartition, n_sparse: usize) -> AdgSketch {
    let n = partition.groups();
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (d, &v) in f.as_slice().iter().enumerate() {
        members[partition.group_of(v.clamp(0.0, 1.0))].push(d as u32);
    }
    let mut occupied: Vec<usize> = (0..n).filter(|&g| !members[g].is_empty()).collect();
    occupied.sort_by_key(|&g| (members[g].len(), g));
    occupied.truncate(n_sparse);
    let grouping = Arc::new(Grouping {
        n_groups: n,
        members,
        sparse: occupied,
    });
    let values = f.as_slice();
    AdgSketch {
        groups: grouping.members.iter().map(|m| stats(values, m)).collect(),
        sparse_exact: exact(values, &grouping),
        grouping,
        midpoint: None,
    }
}

/// Sketches a reconstruction `fhat` over the dimension assignment of `reference`.
///
/// `reference_values` must be the feature `reference` was built from; it is
/// used only for the midpoint statistics some bound variants need.
pub fn adg_sketch_aligned(
    fhat: &ActionFeature,
    reference: &AdgSketch,
    reference_values: &ActionFeature,
) -> AdgSketch {
    let grouping = Arc::clone(&reference.grouping);
    let values = fhat.as_slice();
    let f = reference_values.as_slice();
    let midpoint = grouping
        .members
        .iter()
        .map(|m| {
            m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
                let mid = 0.5 * (f[d as usize] + values[d as usize]);
                (lo.min(mid), hi.max(mid))
            })
        })
        .collect();
    AdgSketch {
        groups: grouping.members.iter().map(|m| stats(values, m)).collect(),
        sparse_exact: exact(values, &grouping),
        grouping,
        midpoint: Some(midpoint),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_feature_occupies_one_group() {
        let f = ActionFeature::new(vec![0.25; 4]).unwrap();
        let p = DimensionPartition::new(3).unwrap();
        let sk = adg_sketch(&f, &p, 0);
        let occupied: Vec<_> = sk.groups.iter().flatten().collect();
        assert_eq!(occupied.len(), 1);
        assert_eq!(*occupied[0], GroupStats { min: 0.25, max: 0.25, count: 4 });
        assert!(sk.sparse_exact.is_empty());
    }

    #[test]
    fn placement_matches_interval_scan() {
        let f = ActionFeature::new(vec![0.7, 0.2, 0.05, 0.05]).unwrap();
        let p = DimensionPartition::new(3).unwrap();
        let sk = adg_sketch(&f, &p, 0);
        // n = 3: [0.5,1] -> 0, [0.25,0.5) -> 1, [0,0.25) -> 2.
        assert_eq!(sk.groups[0], Some(GroupStats { min: 0.7, max: 0.7, count: 1 }));
        assert_eq!(sk.groups[1], None);
        assert_eq!(sk.groups[2], Some(GroupStats { min: 0.05, max: 0.2, count: 3 }));
        let total: usize = sk.groups.iter().flatten().map(|g| g.count).sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn sparse_groups_are_the_smallest() {
        let f = ActionFeature::new(vec![0.6, 0.3, 0.03, 0.03, 0.02, 0.02]).unwrap();
        let p = DimensionPartition::new(8).unwrap();
        let sk = adg_sketch(&f, &p, 2);
        assert_eq!(sk.grouping.sparse, vec![0, 1]);
        assert_eq!(sk.sparse_exact[0], vec![(0, 0.6)]);
    }

    #[test]
    fn aligned_sketch_reuses_assignment() {
        let f = ActionFeature::new(vec![0.7, 0.2, 0.05, 0.05]).unwrap();
        let g = ActionFeature::new(vec![0.1, 0.1, 0.4, 0.4]).unwrap();
        let p = DimensionPartition::new(3).unwrap();
        let sf = adg_sketch(&f, &p, 1);
        let sg = adg_sketch_aligned(&g, &sf, &f);
        assert!(Arc::ptr_eq(&sf.grouping, &sg.grouping));
        assert_eq!(sg.groups[0], Some(GroupStats { min: 0.1, max: 0.1, count: 1 }));
        assert_eq!(sg.groups[2], Some(GroupStats { min: 0.1, max: 0.4, count: 3 }));
        let (lo, hi) = sg.midpoint.as_ref().unwrap()[2];
        assert!((lo - 0.15).abs() < 1e-15 && (hi - 0.225).abs() < 1e-15);
    }
}
