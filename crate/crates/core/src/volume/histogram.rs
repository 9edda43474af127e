use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform-width intensity histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<T> {
    bin_edges: Vec<T>,
    counts: Vec<T>,
    total: T,
}

impl<T: Real> Histogram<T> {
    pub fn new(bin_edges: Vec<T>, counts: Vec<T>) -> Result<Self> {
        if bin_edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(Error::Parameter(format!(
                "histogram needs len(edges) = len(counts) + 1 > 1, got {} edges / {} counts",
                bin_edges.len(),
                counts.len()
            )));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("histogram edges must increase strictly".into()));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= T::zero())) {
            return Err(Error::Parameter("histogram counts must be finite and nonnegative".into()));
        }
        let total = counts.iter().copied().sum();
        Ok(Histogram {
            bin_edges,
            counts,
            total,
        })
    }

    pub fn bin_edges(&self) -> &[T] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[T] {
        &self.counts
    }

    pub fn total(&self) -> T {
        self.total
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> impl Iterator<Item = T> + '_ {
        let two = T::c(2.0);
        self.bin_edges.windows(2).map(move |w| (w[0] + w[1]) / two)
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|c| **c > T::zero()).count()
    }

    /// CSV dump (`lo,hi,count`) for plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lo,hi,count\n");
        for (w, c) in self.bin_edges.windows(2).zip(&self.counts) {
            s.push_str(&format!("{},{},{}\n", w[0], w[1], c));
        }
        s
    }
}
