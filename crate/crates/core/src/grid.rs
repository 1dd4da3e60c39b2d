//! Fixed computational grid on x in [-1, 1].
//!
//! The flow keeps the grid fixed and evolves the arclength Jacobian, so the
//! pole nodes stay exactly at x = -1 and x = +1 for the whole run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform node set on [-1, 1]. Endpoints are exactly -1 and +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    node_count: usize,
    h: f64,
}

impl SpatialGrid {
    /// Minimum resolution for which the pole stencils make sense.
    pub const MIN_NODES: usize = 33;

    pub fn new(node_count: usize) -> Result<Self> {
        if node_count < Self::MIN_NODES {
            return Err(Error::Parameter(format!(
                "node_count = {node_count} < {}",
                Self::MIN_NODES
            )));
        }
        Ok(SpatialGrid {
            node_count,
            h: 2.0 / (node_count - 1) as f64,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Uniform spacing h = 2/(node_count - 1).
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        debug_assert!(i < self.node_count);
        if i == self.node_count - 1 {
            1.0
        } else {
            -1.0 + i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.node_count).map(|i| self.x(i)).collect()
    }

    /// Index of the node at x = 0 if the node count is odd.
    pub fn center_node(&self) -> Option<usize> {
        if self.node_count % 2 == 1 {
            Some((self.node_count - 1) / 2)
        } else {
            None
        }
    }
}
