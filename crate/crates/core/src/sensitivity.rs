//! Bounds on the ATT and OTR when covariates may miss a confounder.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::crossfit::{cross_fit_predict, FoldAssignment, NuisanceSurface, Nuisance};
use crate::data::{strata, CausalDataset, OutcomeKind};
use crate::error::{Error, Result};
use crate::estimators::{Components, InfluenceRecord, OtrEstimate, OtrRecord, ScalarEstimate};
use crate::learners::{LearnerSpec, TargetKind};
use crate::stats::mean;

/// `(L̂, Û)` for a ratio bound `δ` on the untreated-outcome means of treated vs untreated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBounds {
    pub delta: f64,
    pub lower: ScalarEstimate,
    pub upper: ScalarEstimate,
}

impl RatioBounds {
    pub fn contains(&self, value: f64) -> bool {
        self.lower.estimate <= value && value <= self.upper.estimate
    }
}

pub fn ratio_bounds(records: &[InfluenceRecord], delta: f64) -> Result<RatioBounds> {
    if !(delta >= 1.0) || !delta.is_finite() {
        return Err(Error::Config(format!("sensitivity parameter must be >= 1, got {delta}")));
    }
    if records.is_empty() {
        return Err(Error::Data("no observations".into()));
    }
    let c = Components::from_records(records);
    if !(c.psi_a > 0.0) {
        return Err(Error::Numeric(format!("treated fraction degenerate: estimated {}", c.psi_a)));
    }
    if c.psi_ay0 < 0.0 {
        return Err(Error::Numeric(format!("ratio bounds need a nonnegative untreated outcome mass, estimated {}", c.psi_ay0)));
    }
    let bound = |scale: f64| {
        let b = (c.psi_ay1 - scale * c.psi_ay0) / c.psi_a;
        let inf: Vec<f64> = records.iter().map(|r| (r.phi_ay1 - scale * r.phi_ay0 - r.phi_a * b) / c.psi_a).collect();
        ScalarEstimate::from_influence(b, &inf)
    };
    Ok(RatioBounds { delta, lower: bound(delta), upper: bound(1.0 / delta) })
}

/// `1.00, 1.01, ..., 2.00`
pub fn default_delta_grid() -> Vec<f64> {
    (0..=100).map(|i| (100 + i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub points: Vec<RatioBounds>,
}

pub fn sensitivity_curve(records: &[InfluenceRecord], grid: &[f64]) -> Result<SensitivityCurve> {
    if grid.is_empty() {
        return Err(Error::Config("empty delta grid".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("delta grid must be sorted ascending".into()));
    }
    let points = grid.iter().map(|&d| ratio_bounds(records, d)).collect::<Result<Vec<_>>>()?;
    for w in points.windows(2) {
        assert!(w[1].lower.estimate <= w[0].lower.estimate + 1e-12, "lower bound increased in delta");
        assert!(w[1].upper.estimate >= w[0].upper.estimate - 1e-12, "upper bound decreased in delta");
    }
    Ok(SensitivityCurve { points })
}

impl SensitivityCurve {
    /// Smallest grid value at which the lower bound is at or below zero.
    pub fn lower_crosses_zero(&self) -> Option<f64> {
        self.points.iter().find(|p| p.lower.estimate <= 0.0).map(|p| p.delta)
    }

    /// `delta,lower,lower_ci_lo,lower_ci_hi,upper,upper_ci_lo,upper_ci_hi`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["delta", "lower", "lower_ci_lo", "lower_ci_hi", "upper", "upper_ci_lo", "upper_ci_hi"])?;
        for p in &self.points {
            w.write_record(
                [p.delta, p.lower.estimate, p.lower.ci[0], p.lower.ci[1], p.upper.estimate, p.upper.ci[0], p.upper.ci[1]]
                    .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How the conditional ratio over `V` is reduced to one number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Ratio of means over treated observed rows.
    #[default]
    MarginalRatio,
    /// Largest per-stratum ratio.
    StratumMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCalibration {
    pub subset: Vec<String>,
    pub size: usize,
    pub delta_hat: f64,
    pub marginal_ratio: f64,
    pub stratum_max: Option<f64>,
    pub aggregation: Aggregation,
}

/// Above this many distinct `V` combinations the strata are deciles of the
/// `V`-only regression instead.
const MAX_EXACT_STRATA: usize = 50;
const DENOMINATOR_FLOOR: f64 = 1e-6;

/// Estimates how far the untreated-outcome mean of the treated, adjusted for
/// all covariates, sits from the naive mean given only the covariates `subset`.
///
/// `surface.mu0` supplies the full-covariate regression. The `V`-only
/// regression is cross-fitted with the same folds on the design columns that
/// encode `subset`.
pub fn calibrate_delta(
    dataset: &CausalDataset,
    surface: &NuisanceSurface,
    folds: &FoldAssignment,
    subset: &[String],
    spec: &LearnerSpec,
    aggregation: Aggregation,
) -> Result<DeltaCalibration> {
    if subset.is_empty() {
        return Err(Error::Config("covariate subset is empty".into()));
    }
    let design = dataset.require_design()?;
    let all_names = dataset.schema().names().iter().map(|s| s.to_string()).collect::<Vec<_>>();
    for v in subset {
        if !all_names.contains(v) {
            return Err(Error::Config(format!("subset covariate `{v}` is not in the covariate set")));
        }
    }
    let cols = subset_design_columns(design.names(), subset);
    if cols.is_empty() {
        return Err(Error::Config(format!("no design columns encode subset {subset:?}")));
    }
    let kind = match dataset.outcome_kind() {
        OutcomeKind::Binary => TargetKind::Probability,
        OutcomeKind::Bounded => TargetKind::Real,
    };
    let naive = cross_fit_predict(
        &design.select_columns(&cols),
        &Nuisance::Mu0.targets(dataset),
        kind,
        spec,
        folds,
        folds.seed,
        "mu0_subset",
    )?;
    let treated: Vec<usize> = (0..dataset.n()).filter(|&i| dataset.a_value(i) == Some(1.0)).collect();
    if treated.is_empty() {
        return Err(Error::Data("no treated observed rows".into()));
    }
    let num = mean(&treated.iter().map(|&i| surface.mu0[i]).collect::<Vec<_>>());
    let den = mean(&treated.iter().map(|&i| naive[i]).collect::<Vec<_>>());
    if den < DENOMINATOR_FLOOR {
        return Err(Error::Numeric(format!("ratio undefined on subset {subset:?}: naive mean {den:.3e}")));
    }
    let marginal_ratio = num / den;

    let names: Vec<&str> = subset.iter().map(String::as_str).collect();
    let mut stratum = strata(dataset, &names)?;
    if stratum.iter().max().map_or(0, |m| m + 1) > MAX_EXACT_STRATA {
        stratum = deciles(&naive);
    }
    let mut sums: std::collections::BTreeMap<usize, (f64, f64)> = Default::default();
    for &i in &treated {
        let e = sums.entry(stratum[i]).or_default();
        e.0 += surface.mu0[i];
        e.1 += naive[i];
    }
    let stratum_max = sums
        .values()
        .filter(|(_, d)| *d > DENOMINATOR_FLOOR)
        .map(|(n, d)| n / d)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));

    let delta_hat = match aggregation {
        Aggregation::MarginalRatio => marginal_ratio,
        Aggregation::StratumMax => stratum_max.ok_or_else(|| Error::Numeric("no stratum with a positive naive mean".into()))?,
    };
    Ok(DeltaCalibration { subset: subset.to_vec(), size: subset.len(), delta_hat, marginal_ratio, stratum_max, aggregation })
}

/// Design columns produced by encoding the named covariates (the column
/// itself, its one-hot levels `name=level`, and its `name_missing` indicator).
/// Design columns built only from covariates in `subset`. A column name is
/// `name`, `name=level` or `name_missing`; interaction columns join such atoms
/// with `*` and qualify only when every atom does.
fn subset_design_columns(design_names: &[String], subset: &[String]) -> Vec<usize> {
    let atom_in_subset = |atom: &str| {
        subset.iter().any(|v| atom == v || atom.strip_prefix(v.as_str()).is_some_and(|rest| rest.starts_with('=') || rest == "_missing"))
    };
    design_names
        .iter()
        .enumerate()
        .filter(|(_, d)| d.split('*').all(atom_in_subset))
        .map(|(j, _)| j)
        .collect()
}

fn deciles(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..10).map(|q| sorted[(q * sorted.len()) / 10]).collect();
    values.iter().map(|v| cuts.iter().filter(|&&c| *v >= c).count()).collect()
}

/// OTR interval under an additive bound `δ` on the untreated-outcome gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditiveBounds {
    pub delta: f64,
    pub lower: ScalarEstimate,
    pub upper: ScalarEstimate,
}

pub fn otr_additive_bounds(records: &[OtrRecord], otr: &OtrEstimate, delta: f64) -> Result<AdditiveBounds> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Config(format!("additive sensitivity parameter must be >= 0, got {delta}")));
    }
    let bound = |sign: f64| {
        let inf: Vec<f64> = records.iter().map(|r| r.phi_y - r.phi_y0 + sign * delta * r.phi_a).collect();
        ScalarEstimate::from_influence(otr.estimate + sign * delta * otr.psi_a, &inf)
    };
    Ok(AdditiveBounds { delta, lower: bound(-1.0), upper: bound(1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{estimate_att, estimate_otr, OtrCorrection};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn records() -> Vec<InfluenceRecord> {
        (0..120)
            .map(|i| {
                let t = i as f64;
                InfluenceRecord {
                    phi_ay1: 0.15 + 0.1 * (t * 0.7).sin(),
                    phi_a: 0.45 + 0.2 * (t * 0.3).cos(),
                    phi_ay0: 0.06 + 0.04 * (t * 0.9).cos(),
                }
            })
            .collect()
    }

    #[test]
    fn unit_delta_recovers_att() {
        let recs = records();
        let att = estimate_att(&recs, 0.01).unwrap();
        let b = ratio_bounds(&recs, 1.0).unwrap();
        assert_eq!(b.lower.estimate, att.estimate);
        assert_eq!(b.upper.estimate, att.estimate);
        assert_relative_eq!(b.lower.sigma2, att.sigma2, max_relative = 1e-12);
    }

    #[test]
    fn bound_arithmetic() {
        let recs = vec![InfluenceRecord { phi_ay1: 0.1, phi_a: 0.5, phi_ay0: 0.05 }; 4];
        let b = ratio_bounds(&recs, 2.0).unwrap();
        assert_relative_eq!(b.lower.estimate, 0.0, epsilon = 1e-15);
        assert_relative_eq!(b.upper.estimate, 0.15, epsilon = 1e-15);
        assert!(ratio_bounds(&recs, 0.99).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 101);
        assert_eq!((g[0], g[100]), (1.0, 2.0));
    }

    #[test]
    fn curve_width_identity() {
        let recs = records();
        let c = Components::from_records(&recs);
        let curve = sensitivity_curve(&recs, &default_delta_grid()).unwrap();
        for p in &curve.points {
            let width = (p.delta - 1.0 / p.delta) * c.psi_ay0 / c.psi_a;
            assert_relative_eq!(p.upper.estimate - p.lower.estimate, width, epsilon = 1e-14);
        }
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("delta,lower,lower_ci_lo,lower_ci_hi,upper,upper_ci_lo,upper_ci_hi\n1,"));
    }

    #[test]
    fn single_point_grid_and_bad_grids() {
        let recs = records();
        let c = sensitivity_curve(&recs, &[1.0]).unwrap();
        assert_eq!(c.points.len(), 1);
        assert!(sensitivity_curve(&recs, &[1.5, 1.2]).is_err());
        assert!(sensitivity_curve(&recs, &[]).is_err());
        assert!(sensitivity_curve(&recs, &[0.5, 1.0]).is_err());
    }

    #[test]
    fn zero_crossing() {
        let recs = vec![InfluenceRecord { phi_ay1: 0.1, phi_a: 0.5, phi_ay0: 0.05 }; 4];
        let curve = sensitivity_curve(&recs, &default_delta_grid()).unwrap();
        assert_eq!(curve.lower_crosses_zero(), Some(2.0));
    }

    #[test]
    fn additive_bounds_symmetric_with_exact_width() {
        let recs: Vec<OtrRecord> = (0..80)
            .map(|i| OtrRecord { phi_y: 0.2 + 0.01 * (i % 7) as f64, phi_y0: 0.18 + 0.02 * (i % 3) as f64, phi_a: 0.3 + 0.1 * (i % 2) as f64 })
            .collect();
        let otr = estimate_otr(&recs, OtrCorrection::Efficient).unwrap();
        let zero = otr_additive_bounds(&recs, &otr, 0.0).unwrap();
        assert_eq!(zero.lower.estimate, otr.estimate);
        assert_eq!(zero.upper.estimate, otr.estimate);
        let b = otr_additive_bounds(&recs, &otr, 0.05).unwrap();
        assert_relative_eq!(b.upper.estimate - b.lower.estimate, 2.0 * 0.05 * otr.psi_a, epsilon = 1e-15);
        assert_relative_eq!(b.upper.estimate - otr.estimate, otr.estimate - b.lower.estimate, epsilon = 1e-15);
        assert!(otr_additive_bounds(&recs, &otr, -0.1).is_err());
    }

    #[test]
    fn subset_columns_match_encodings() {
        let names: Vec<String> = ["age", "age_missing", "race=b", "race=c", "racial", "sex"].iter().map(|s| s.to_string()).collect();
        assert_eq!(subset_design_columns(&names, &["race".to_string()]), vec![2, 3]);
        assert_eq!(subset_design_columns(&names, &["age".to_string(), "sex".to_string()]), vec![0, 1, 5]);
        let saturated: Vec<String> = ["x=1", "u=1", "x=1*u=1"].iter().map(|s| s.to_string()).collect();
        assert_eq!(subset_design_columns(&saturated, &["x".to_string()]), vec![0]);
        assert_eq!(subset_design_columns(&saturated, &["u".to_string(), "x".to_string()]), vec![0, 1, 2]);
    }

    #[test]
    fn decile_strata() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let d = deciles(&v);
        assert_eq!(d[0], 0);
        assert_eq!(d[99], 9);
        assert_eq!(d.iter().filter(|&&s| s == 4).count(), 10);
    }

    proptest! {
        #[test]
        fn curve_is_monotone_and_ordered(
            vals in prop::collection::vec((0.0f64..1.0, 0.05f64..1.0, 0.0f64..1.0), 2..40)
        ) {
            let recs: Vec<InfluenceRecord> = vals.iter().map(|&(y1, a, y0)| InfluenceRecord { phi_ay1: y1, phi_a: a, phi_ay0: y0 }).collect();
            let curve = sensitivity_curve(&recs, &default_delta_grid()).unwrap();
            for p in &curve.points {
                prop_assert!(p.lower.estimate <= p.upper.estimate + 1e-15);
            }
            for w in curve.points.windows(2) {
                prop_assert!(w[1].lower.estimate <= w[0].lower.estimate);
                prop_assert!(w[1].upper.estimate >= w[0].upper.estimate);
            }
        }
    }
}
