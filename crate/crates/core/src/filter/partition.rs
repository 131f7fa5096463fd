//! Recursive-halving partition of `[0, 1]` into value groups.
//!
//! Group 0 is `[0.5, 1]`, group `j` is `[2^-(j+1), 2^-j)` for
//! `1 ≤ j ≤ n-2`, and the last group `n-1` is `[0, 2^-(n-1))`. A value is
//! hashed to `floor(v · 2^(n-1))`; the group is then determined by the
//! position of the leading binary digit of that key.

use crate::error::{Error, Result};

/// Default number of groups.
pub const DEFAULT_GROUPS: usize = 20;
const MAX_GROUPS: usize = 52;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionPartition {
    n: usize,
    table: Option<Vec<u8>>,
}

impl DimensionPartition {
    pub fn new(n: usize) -> Result<Self> {
        if !(2..=MAX_GROUPS).contains(&n) {
            return Err(Error::Config(format!(
                "number of groups must be in 2..={MAX_GROUPS}, got {n}"
            )));
        }
        Ok(DimensionPartition { n, table: None })
    }

    /// Also materializes the `2^(n-1) + 1`-entry lookup table.
    pub fn with_table(n: usize) -> Result<Self> {
        let mut p = Self::new(n)?;
        if n > 27 {
            return Err(Error::Config(format!("lookup table for n = {n} is too large")));
        }
        let keys = 1usize << (n - 1);
        let table = (0..=keys)
            .map(|key| p.scan(key as f64 / keys as f64) as u8)
            .collect();
        p.table = Some(table);
        Ok(p)
    }

    pub fn groups(&self) -> usize {
        self.n
    }

    pub fn has_table(&self) -> bool {
        self.table.is_some()
    }

    /// Half-open bounds `[lo, hi)` of group `j` (group 0 also contains 1).
    pub fn interval(&self, j: usize) -> (f64, f64) {
        let n = self.n;
        if j == 0 {
            (0.5, 1.0)
        } else if j == n - 1 {
            (0.0, 0.5f64.powi((n - 1) as i32))
        } else {
            (0.5f64.powi(j as i32 + 1), 0.5f64.powi(j as i32))
        }
    }

    fn scan(&self, v: f64) -> usize {
        (0..self.n)
            .find(|&j| {
                let (lo, hi) = self.interval(j);
                v >= lo && (v < hi || j == 0)
            })
            .unwrap_or(self.n - 1)
    }

    #[inline]
    fn key(&self, v: f64) -> u64 {
        (v * (1u64 << (self.n - 1)) as f64).floor() as u64
    }

    /// Group of `v` via the leading binary digit of its hash key.
    #[inline]
    pub fn group_of(&self, v: f64) -> usize {
        let key = self.key(v);
        let bits = (64 - key.leading_zeros()) as usize;
        (self.n - 1).saturating_sub(bits)
    }

    /// Group of `v` via the lookup table, when one was built.
    pub fn group_of_table(&self, v: f64) -> Option<usize> {
        self.table
            .as_ref()
            .map(|t| t[self.key(v) as usize] as usize)
    }

    /// Checked group lookup.
    pub fn group_id(&self, v: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Range(format!("value {v} outside [0, 1]")));
        }
        Ok(match self.group_of_table(v) {
            Some(g) => g,
            None => self.group_of(v),
        })
    }
}

impl Default for DimensionPartition {
    fn default() -> Self {
        DimensionPartition::new(DEFAULT_GROUPS).expect("default group count is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let p = DimensionPartition::default();
        assert_eq!(p.group_id(0.75).unwrap(), 0);
        assert_eq!(p.group_id(0.3).unwrap(), 1);
        assert_eq!(p.group_id(0.0).unwrap(), 19);
        assert_eq!(p.group_id(1.0).unwrap(), 0);
        assert_eq!(p.group_id(0.5).unwrap(), 0);
        assert_eq!(p.group_id(0.25).unwrap(), 1);
        assert!(p.group_id(1.5).is_err());
        assert!(p.group_id(-0.1).is_err());
    }

    #[test]
    fn intervals_cover_unit_interval() {
        let p = DimensionPartition::new(6).unwrap();
        let mut edges: Vec<(f64, f64)> = (0..6).map(|j| p.interval(j)).collect();
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(edges[0].0, 0.0);
        for w in edges.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        assert_eq!(edges.last().unwrap().1, 1.0);
    }

    #[test]
    fn table_agrees_with_closed_form() {
        let p = DimensionPartition::with_table(12).unwrap();
        for i in 0..=100_000u32 {
            let v = i as f64 / 100_000.0;
            assert_eq!(p.group_of_table(v), Some(p.group_of(v)), "{v}");
        }
    }

    #[test]
    fn rejects_bad_group_counts() {
        assert!(DimensionPartition::new(1).is_err());
        assert!(DimensionPartition::new(60).is_err());
    }
}
