use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{estimate_att, AttEstimate, InfluenceRecord};
use crate::data::SubgroupPartition;
use crate::error::{Error, Result};
use crate::stats::chi2_sf;

pub const DEFAULT_MIN_GROUP_SIZE: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEstimate {
    pub label: String,
    pub estimate: AttEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub groups: Vec<GroupEstimate>,
    /// Groups below the size floor, with their sizes.
    pub dropped: Vec<(String, usize)>,
}

/// ATT within each group of `partition`, computed from that group's records only.
pub fn subgroup_estimates(
    records: &[InfluenceRecord],
    partition: &SubgroupPartition,
    min_size: usize,
    eps: f64,
) -> Result<SubgroupReport> {
    if partition.assignment.len() != records.len() {
        return Err(Error::Data("partition and influence records differ in length".into()));
    }
    let mut groups = Vec::new();
    let mut dropped = Vec::new();
    for (g, label) in partition.labels.iter().enumerate() {
        let members = partition.members(g);
        if members.len() < min_size {
            log::warn!("group `{label}` has {} rows, below the floor of {min_size}; dropped", members.len());
            dropped.push((label.clone(), members.len()));
            continue;
        }
        let recs: Vec<InfluenceRecord> = members.iter().map(|&i| records[i]).collect();
        let estimate = estimate_att(&recs, eps).map_err(|e| match e {
            Error::Numeric(m) => Error::Numeric(format!("group `{label}`: {m}")),
            other => other,
        })?;
        groups.push(GroupEstimate { label: label.clone(), estimate });
    }
    if groups.is_empty() {
        return Err(Error::Data(format!("no group reaches the minimum size of {min_size}")));
    }
    Ok(SubgroupReport { groups, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityTest {
    pub t_n: f64,
    pub df: usize,
    pub p_value: f64,
    pub groups: Vec<GroupEstimate>,
}

/// `n (Cψ)ᵀ (C Σ Cᵀ)⁻¹ (Cψ)` with `C` the successive-difference matrix
/// (`+1` at `(i, i)`, `-1` at `(i, i+1)`).
pub fn successive_difference_statistic(psi: &[f64], sigma: &DMatrix<f64>, n: f64) -> Result<f64> {
    let k = psi.len();
    if k < 2 {
        return Err(Error::Data("homogeneity test needs at least 2 groups".into()));
    }
    if sigma.nrows() != k || sigma.ncols() != k {
        return Err(Error::Data(format!("covariance is {}x{}, expected {k}x{k}", sigma.nrows(), sigma.ncols())));
    }
    let c = DMatrix::from_fn(k - 1, k, |i, j| {
        if j == i {
            1.0
        } else if j == i + 1 {
            -1.0
        } else {
            0.0
        }
    });
    let cpsi = &c * DVector::from_column_slice(psi);
    let m = &c * sigma * c.transpose();
    let chol = m.cholesky().ok_or_else(|| {
        Error::Numeric("difference covariance is singular; merge groups with zero or tiny variance".into())
    })?;
    let t = n * cpsi.dot(&chol.solve(&cpsi));
    Ok(t.max(0.0))
}

/// Test that all group ATTs are equal. Groups are disjoint samples, so the
/// covariance of the group estimates is diagonal.
pub fn homogeneity_test(groups: &[GroupEstimate]) -> Result<HomogeneityTest> {
    if groups.len() < 2 {
        return Err(Error::Data(format!("homogeneity test needs at least 2 retained groups, got {}", groups.len())));
    }
    let n: usize = groups.iter().map(|g| g.estimate.n).sum();
    let psi: Vec<f64> = groups.iter().map(|g| g.estimate.estimate).collect();
    let sigma = DMatrix::from_diagonal(&DVector::from_iterator(
        groups.len(),
        groups.iter().map(|g| n as f64 * g.estimate.sigma2 / g.estimate.n as f64),
    ));
    let t_n = successive_difference_statistic(&psi, &sigma, n as f64)?;
    let df = groups.len() - 1;
    Ok(HomogeneityTest { t_n, df, p_value: chi2_sf(t_n, df)?, groups: groups.to_vec() })
}
