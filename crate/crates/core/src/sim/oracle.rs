use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CellLaw, CovariateLaw, DgpSpec};
use crate::error::{Error, Result};
use crate::estimators::Components;

const MONTE_CARLO_DRAWS: usize = 1_000_000;
const MONTE_CARLO_SEED: u64 = 0x5EED;

/// A population quantity; `se` is set when it was computed by Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub se: Option<f64>,
}

/// Nuisance functions as the analyst's regressions would converge to them,
/// i.e. conditional on observed features only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueNuisances {
    pub omega: f64,
    pub pi: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub mu_y: f64,
}

impl TrueNuisances {
    fn from_law(l: &CellLaw) -> Self {
        Self {
            omega: l.omega,
            pi: l.pi,
            mu0: l.m0,
            mu1: l.pi * l.m1,
            mu_y: l.pi * l.m1 + (1.0 - l.pi) * l.m0,
        }
    }
}

fn discrete(dgp: &DgpSpec) -> Option<(&Vec<Vec<f64>>, &Vec<f64>)> {
    match &dgp.law {
        CovariateLaw::Discrete { cells, probs, .. } => Some((cells, probs)),
        CovariateLaw::UniformCube { .. } => None,
    }
}

/// Cells grouped by their values on `features`.
fn observed_classes(cells: &[Vec<f64>], features: &[usize]) -> Vec<Vec<usize>> {
    let mut classes: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
    for (c, x) in cells.iter().enumerate() {
        let key = features.iter().map(|&j| x[j].to_bits()).collect();
        classes.entry(key).or_default().push(c);
    }
    classes.into_values().collect()
}

/// Observed-level nuisances for every cell of a discrete law, obtained by
/// averaging the full-cell law over hidden features.
pub(crate) fn cell_nuisances(dgp: &DgpSpec) -> Vec<TrueNuisances> {
    let (cells, probs) = discrete(dgp).expect("discrete law");
    let laws: Vec<CellLaw> = cells.iter().enumerate().map(|(c, x)| dgp.cell_law(Some(c), x)).collect();
    let mut out = vec![TrueNuisances { omega: 0.0, pi: 0.0, mu0: 0.0, mu1: 0.0, mu_y: 0.0 }; cells.len()];
    for class in observed_classes(cells, &dgp.observed) {
        let sum = |f: &dyn Fn(&CellLaw) -> f64| class.iter().map(|&c| probs[c] * f(&laws[c])).sum::<f64>();
        let mass = sum(&|_| 1.0);
        let followed = sum(&|l| l.omega);
        let untreated = sum(&|l| l.omega * (1.0 - l.pi));
        let treated_y = sum(&|l| l.omega * l.pi * l.m1);
        let agg = TrueNuisances {
            omega: followed / mass,
            pi: sum(&|l| l.omega * l.pi) / followed,
            mu0: sum(&|l| l.omega * (1.0 - l.pi) * l.m0) / untreated,
            mu1: treated_y / followed,
            mu_y: (treated_y + sum(&|l| l.omega * (1.0 - l.pi) * l.m0)) / followed,
        };
        for &c in &class {
            out[c] = agg;
        }
    }
    out
}

pub(crate) fn point_nuisances(dgp: &DgpSpec, x: &[f64]) -> TrueNuisances {
    TrueNuisances::from_law(&dgp.cell_law(None, x))
}

fn cube_draws(dim: usize) -> impl Iterator<Item = Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(MONTE_CARLO_SEED);
    (0..MONTE_CARLO_DRAWS).map(move |_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Ratio of means `E[num] / E[den]` with its delta-method standard error.
fn ratio_with_se(pairs: impl Iterator<Item = (f64, f64)>) -> OracleValue {
    let (mut n, mut sn, mut sd, mut snn, mut sdd, mut snd) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in pairs {
        n += 1.0;
        sn += a;
        sd += b;
        snn += a * a;
        sdd += b * b;
        snd += a * b;
    }
    let (mn, md) = (sn / n, sd / n);
    let (vn, vd, c) = (snn / n - mn * mn, sdd / n - md * md, snd / n - mn * md);
    let r = mn / md;
    let var = (vn - 2.0 * r * c + r * r * vd) / (md * md);
    OracleValue { value: r, se: Some((var.max(0.0) / n).sqrt()) }
}

/// True ATT from the potential outcomes, E[Y¹ - Y⁰ | A = 1], using the full
/// covariate vector including hidden features.
pub fn oracle_att(dgp: &DgpSpec) -> OracleValue {
    match &dgp.law {
        CovariateLaw::Discrete { cells, probs, .. } => {
            let (mut num, mut den) = (0.0, 0.0);
            for (c, x) in cells.iter().enumerate() {
                let l = dgp.cell_law(Some(c), x);
                num += probs[c] * l.pi * (l.m1 - l.m0);
                den += probs[c] * l.pi;
            }
            OracleValue { value: num / den, se: None }
        }
        CovariateLaw::UniformCube { dim } => ratio_with_se(cube_draws(*dim).map(|x| {
            let l = dgp.cell_law(None, &x);
            (l.pi * (l.m1 - l.m0), l.pi)
        })),
    }
}

/// Population values of the three component means, from the observed-level
/// nuisances (the identification formula). Equals the ATT from
/// [`oracle_att`] when no confounder is hidden.
pub fn oracle_components(dgp: &DgpSpec) -> Components {
    match &dgp.law {
        CovariateLaw::Discrete { probs, .. } => {
            let nu = cell_nuisances(dgp);
            let mut c = Components { psi_ay1: 0.0, psi_ay0: 0.0, psi_a: 0.0 };
            for (p, t) in probs.iter().zip(&nu) {
                c.psi_ay1 += p * t.mu1;
                c.psi_ay0 += p * t.pi * t.mu0;
                c.psi_a += p * t.pi;
            }
            c
        }
        CovariateLaw::UniformCube { dim } => {
            let mut c = Components { psi_ay1: 0.0, psi_ay0: 0.0, psi_a: 0.0 };
            for x in cube_draws(*dim) {
                let t = point_nuisances(dgp, &x);
                c.psi_ay1 += t.mu1;
                c.psi_ay0 += t.pi * t.mu0;
                c.psi_a += t.pi;
            }
            let n = MONTE_CARLO_DRAWS as f64;
            Components { psi_ay1: c.psi_ay1 / n, psi_ay0: c.psi_ay0 / n, psi_a: c.psi_a / n }
        }
    }
}

/// True overall treatment removal effect, E[Y] - E[Y⁰] = E[A(Y¹ - Y⁰)].
pub fn oracle_otr(dgp: &DgpSpec) -> OracleValue {
    match &dgp.law {
        CovariateLaw::Discrete { cells, probs, .. } => {
            let v = cells.iter().enumerate().map(|(c, x)| {
                let l = dgp.cell_law(Some(c), x);
                probs[c] * l.pi * (l.m1 - l.m0)
            });
            OracleValue { value: v.sum(), se: None }
        }
        CovariateLaw::UniformCube { dim } => {
            let vals: Vec<f64> = cube_draws(*dim)
                .map(|x| {
                    let l = dgp.cell_law(None, &x);
                    l.pi * (l.m1 - l.m0)
                })
                .collect();
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let v = vals.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
            OracleValue { value: m, se: Some((v / n).sqrt()) }
        }
    }
}

/// Largest ratio, over observed covariate values, of the untreated-outcome
/// mean among the treated to that among the untreated (followed-up rows).
pub fn true_delta(dgp: &DgpSpec) -> Result<f64> {
    let (cells, probs) = discrete(dgp).ok_or_else(|| Error::Config("true_delta needs a discrete law".into()))?;
    let laws: Vec<CellLaw> = cells.iter().enumerate().map(|(c, x)| dgp.cell_law(Some(c), x)).collect();
    let mut worst: f64 = 0.0;
    for class in observed_classes(cells, &dgp.observed) {
        let mean_given = |treated: bool| {
            let w = |l: &CellLaw| l.omega * if treated { l.pi } else { 1.0 - l.pi };
            let num: f64 = class.iter().map(|&c| probs[c] * w(&laws[c]) * laws[c].m0).sum();
            let den: f64 = class.iter().map(|&c| probs[c] * w(&laws[c])).sum();
            num / den
        };
        let (t, u) = (mean_given(true), mean_given(false));
        if u <= 0.0 {
            return Err(Error::Numeric("untreated outcome mean is zero in some stratum".into()));
        }
        worst = worst.max(t / u).max(u / t);
    }
    Ok(worst)
}

/// Population value of the calibration ratio for the observed features
/// `subset`: the treated-observed mean of the full-covariate untreated
/// regression over the treated-observed mean of the `subset`-only one.
pub fn calibration_ratio(dgp: &DgpSpec, subset: &[usize]) -> Result<f64> {
    let (cells, probs) = discrete(dgp).ok_or_else(|| Error::Config("calibration_ratio needs a discrete law".into()))?;
    if subset.iter().any(|j| !dgp.observed.contains(j)) {
        return Err(Error::Config("subset features must be observed".into()));
    }
    let nu = cell_nuisances(dgp);
    let laws: Vec<CellLaw> = cells.iter().enumerate().map(|(c, x)| dgp.cell_law(Some(c), x)).collect();
    let mut naive = vec![0.0; cells.len()];
    for class in observed_classes(cells, subset) {
        let w = |c: usize| probs[c] * laws[c].omega * (1.0 - laws[c].pi);
        let num: f64 = class.iter().map(|&c| w(c) * laws[c].m0).sum();
        let den: f64 = class.iter().map(|&c| w(c)).sum();
        for &c in &class {
            naive[c] = num / den;
        }
    }
    let weight = |c: usize| probs[c] * laws[c].omega * laws[c].pi;
    let total: f64 = (0..cells.len()).map(weight).sum();
    let num: f64 = (0..cells.len()).map(|c| weight(c) * nu[c].mu0).sum::<f64>() / total;
    let den: f64 = (0..cells.len()).map(|c| weight(c) * naive[c]).sum::<f64>() / total;
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::super::presets;
    use super::*;
    use approx::assert_relative_eq;

    fn identified_att(dgp: &DgpSpec) -> f64 {
        let c = oracle_components(dgp);
        (c.psi_ay1 - c.psi_ay0) / c.psi_a
    }

    #[test]
    fn reference_truth() {
        let d = presets::reference();
        assert_relative_eq!(oracle_att(&d).value, 0.1, epsilon = 1e-15);
        assert_relative_eq!(identified_att(&d), 0.1, epsilon = 1e-15);
        assert_relative_eq!(oracle_otr(&d).value, 0.05, epsilon = 1e-15);
        let c = oracle_components(&d);
        assert_relative_eq!(c.psi_ay0, 0.5 * (0.3 * 0.2 + 0.7 * 0.4), epsilon = 1e-15);
        assert_relative_eq!(c.psi_a, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn two_routes_agree_without_hidden_features() {
        for d in [presets::reference(), presets::strong_confounding(), presets::homogeneous_groups(), presets::low_overlap()] {
            assert_relative_eq!(oracle_att(&d).value, identified_att(&d), epsilon = 1e-14);
        }
        assert_relative_eq!(oracle_att(&presets::strong_confounding()).value, 0.155, epsilon = 1e-14);
    }

    #[test]
    fn smooth_routes_agree_within_monte_carlo_error() {
        let d = presets::smooth();
        let o = oracle_att(&d);
        let se = o.se.unwrap();
        assert!(se > 0.0 && se < 1e-3);
        // same draws, so agreement is to rounding
        assert_relative_eq!(o.value, identified_att(&d), epsilon = 1e-10);
    }

    #[test]
    fn hidden_confounder_separates_routes() {
        let d = presets::omitted_confounder();
        assert_relative_eq!(oracle_att(&d).value, 0.1, epsilon = 1e-14);
        let naive = identified_att(&d);
        assert!((naive - 0.1714).abs() < 1e-3, "{naive}");
        assert_relative_eq!(true_delta(&d).unwrap(), 1.5, epsilon = 1e-12);
        // with u observed there is no confounding left
        let seen = d.with_observed(vec![0, 1]);
        assert_relative_eq!(identified_att(&seen), 0.1, epsilon = 1e-14);
        assert_relative_eq!(true_delta(&seen).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn null_and_shifted_effects() {
        let mut d = presets::strong_confounding();
        d.treated_outcome = super::super::TreatedOutcome::Mean { response: d.control_outcome.clone() };
        assert_eq!(oracle_att(&d).value, 0.0);
        let mut d = presets::strong_confounding();
        if let super::super::Response::Table { values } = &d.control_outcome {
            d.treated_outcome = super::super::TreatedOutcome::Mean {
                response: super::super::Response::Table { values: values.iter().map(|v| v + 0.07).collect() },
            };
        }
        assert_relative_eq!(oracle_att(&d).value, 0.07, epsilon = 1e-14);
    }

    #[test]
    fn calibration_ratio_for_full_and_partial_subsets() {
        let d = presets::omitted_confounder().with_observed(vec![0, 1]);
        assert_relative_eq!(calibration_ratio(&d, &[0, 1]).unwrap(), 1.0, epsilon = 1e-14);
        // treated rows with x=1: mu0 by u over the x-only untreated mean
        let r = calibration_ratio(&d, &[0]).unwrap();
        assert!(r > 1.05 && r < 1.5, "{r}");
        assert!(calibration_ratio(&presets::omitted_confounder(), &[1]).is_err());
    }
}
