//! Uniform time grid on [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform discretization of [0,1] with `n` steps and nodes k/n, k = 0..n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("grid needs at least one step".into()));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    /// All n+1 node times, 0 to 1 inclusive.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.t(k)).collect()
    }

    /// Index of a node time if it lies on the grid (within 1e-12).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t * self.n as f64).round() as usize;
        if k <= self.n && (self.t(k) - t).abs() < 1e-12 {
            Some(k)
        } else {
            None
        }
    }
}
