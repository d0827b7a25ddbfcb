//! Compact working intervals and sampling grids.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Closed compact interval `[start, end]` with `start < end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::InvalidArgument(format!(
                "interval [{start}, {end}] must be finite and nonempty"
            )));
        }
        Ok(Interval { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.contains(other.start) && self.contains(other.end)
    }

    pub fn is_interior(&self, t: f64) -> bool {
        t > self.start && t < self.end
    }

    pub fn intersect(&self, other: &Interval) -> Result<Interval> {
        Interval::new(self.start.max(other.start), self.end.min(other.end))
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                t,
                start: self.start,
                end: self.end,
            })
        }
    }
}

/// Strictly increasing list of sample times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn from_nodes(mut nodes: Vec<f64>) -> Result<Self> {
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("grid nodes must be finite".into()));
        }
        nodes.sort_by(|a, b| a.total_cmp(b));
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument(
                "a grid needs at least two distinct nodes".into(),
            ));
        }
        Ok(TimeGrid { nodes })
    }

    /// `cells` uniform cells on `interval`.
    pub fn uniform(interval: Interval, cells: usize) -> Self {
        let cells = cells.max(1);
        let h = interval.length() / cells as f64;
        let mut nodes: Vec<f64> = (0..cells).map(|k| interval.start + k as f64 * h).collect();
        nodes.push(interval.end);
        TimeGrid { nodes }
    }

    /// Uniform grid with every point of `extra` lying inside `interval` inserted.
    pub fn uniform_with(interval: Interval, cells: usize, extra: &[f64]) -> Self {
        let nodes = Self::uniform(interval, cells).nodes;
        Self::from_nodes(snap(nodes, extra, interval)).expect("uniform grid is valid")
    }

    pub fn with_points(&self, extra: &[f64]) -> Self {
        Self::from_nodes(snap(self.nodes.clone(), extra, self.span())).expect("refined grid is valid")
    }

    /// Inserts the midpoint of every cell.
    pub fn refine(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len());
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(*self.nodes.last().unwrap());
        TimeGrid { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn span(&self) -> Interval {
        Interval {
            start: self.nodes[0],
            end: *self.nodes.last().unwrap(),
        }
    }

    /// Largest cell width.
    pub fn max_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn contains_node(&self, t: f64) -> bool {
        self.nodes
            .iter()
            .any(|s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }
}

/// Replaces nodes that nearly coincide with a point of `extra` by that point.
fn snap(mut nodes: Vec<f64>, extra: &[f64], interval: Interval) -> Vec<f64> {
    let extra: Vec<f64> = extra.iter().copied().filter(|t| interval.contains(*t)).collect();
    nodes.retain(|t| !matches_point(&extra, *t));
    nodes.extend(extra);
    nodes
}

/// Tests whether `t` coincides with one of `points` (relative tolerance).
pub(crate) fn matches_point(points: &[f64], t: f64) -> bool {
    points
        .iter()
        .any(|p| (p - t).abs() <= 1e-12 * (1.0 + t.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_hits_endpoints() {
        let g = TimeGrid::uniform(Interval::new(-1.0, 3.0).unwrap(), 4);
        assert_eq!(g.nodes(), &[-1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(g.max_spacing(), 1.0);
    }

    #[test]
    fn inserted_points_are_sorted_and_deduplicated() {
        let g = TimeGrid::uniform_with(Interval::new(0.0, 2.0).unwrap(), 2, &[1.0, 0.5, 7.0]);
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 2.0]);
    }

    #[test]
    fn empty_interval_is_rejected() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0]).is_err());
    }
}
