use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const OVERLAP_BINS: usize = 50;
pub const LOW_PROPENSITY_THRESHOLD: f64 = 0.02;

/// Histogram of estimated treatment propensities over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub threshold: f64,
    pub below_threshold: usize,
    pub fraction_below: f64,
}

pub fn overlap_diagnostic(pi: &[f64]) -> OverlapReport {
    let edges: Vec<f64> = (0..=OVERLAP_BINS).map(|b| b as f64 / OVERLAP_BINS as f64).collect();
    let mut counts = vec![0; OVERLAP_BINS];
    for &p in pi {
        let b = ((p.clamp(0.0, 1.0) * OVERLAP_BINS as f64) as usize).min(OVERLAP_BINS - 1);
        counts[b] += 1;
    }
    let below_threshold = pi.iter().filter(|&&p| p < LOW_PROPENSITY_THRESHOLD).count();
    OverlapReport {
        edges,
        counts,
        threshold: LOW_PROPENSITY_THRESHOLD,
        below_threshold,
        fraction_below: if pi.is_empty() { 0.0 } else { below_threshold as f64 / pi.len() as f64 },
    }
}

impl OverlapReport {
    /// `bin_lo,bin_hi,count`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for (b, c) in self.counts.iter().enumerate() {
            w.write_record([self.edges[b].to_string(), self.edges[b + 1].to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
