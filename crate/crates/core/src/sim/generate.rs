use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{cell_nuisances, point_nuisances};
use super::{CovariateLaw, DesignEncoding, DgpSpec};
use crate::crossfit::NuisanceSurface;
use crate::data::{CausalDataset, Column, ColumnKind, OutcomeKind};
use crate::error::{Error, Result};
use crate::matrix::DesignMatrix;

/// A generated dataset plus the quantities an analyst never sees.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub dataset: CausalDataset,
    /// Full covariate vectors, hidden features included.
    pub features: Vec<Vec<f64>>,
    pub cell: Option<Vec<usize>>,
    /// Treatment before masking by follow-up.
    pub treated: Vec<bool>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    /// For each design column, the features it is built from.
    pub column_features: Vec<Vec<usize>>,
}

impl SimSample {
    /// Design columns that do not involve any of `drop`.
    pub fn columns_without(&self, drop: &[usize]) -> Vec<usize> {
        self.column_features
            .iter()
            .enumerate()
            .filter(|(_, fs)| !fs.iter().any(|f| drop.contains(f)))
            .map(|(j, _)| j)
            .collect()
    }

    /// `id,<observed features>[,group],r,a,y` with raw feature values and
    /// empty treatment and outcome cells where follow-up is missing.
    pub fn write_csv<W: Write>(&self, dgp: &DgpSpec, writer: W) -> Result<()> {
        let ds = &self.dataset;
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(dgp.observed.iter().map(|&f| dgp.feature_names[f].clone()));
        if ds.group().is_some() {
            header.push("group".into());
        }
        header.extend(["r", "a", "y"].map(String::from));
        w.write_record(&header)?;
        for i in 0..ds.n() {
            let mut rec = vec![ds.ids()[i].clone()];
            rec.extend(dgp.observed.iter().map(|&f| self.features[i][f].to_string()));
            if let Some(g) = ds.group() {
                rec.push(g[i].clone());
            }
            rec.push((ds.r()[i] as u8).to_string());
            rec.push(ds.a()[i].map(|a| (a as u8).to_string()).unwrap_or_default());
            rec.push(ds.y()[i].map(|y| y.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct SaturatedColumn {
    name: String,
    features: Vec<usize>,
    /// (feature, level) pairs whose indicators multiply.
    atoms: Vec<(usize, f64)>,
}

fn saturated_columns(dgp: &DgpSpec, cells: &[Vec<f64>]) -> Vec<SaturatedColumn> {
    let levels: Vec<Vec<f64>> = dgp
        .observed
        .iter()
        .map(|&f| {
            let mut l: Vec<f64> = cells.iter().map(|c| c[f]).collect();
            l.sort_by(f64::total_cmp);
            l.dedup();
            l
        })
        .collect();
    let k = dgp.observed.len();
    let mut masks: Vec<usize> = (1..1usize << k).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut out = Vec::new();
    for m in masks {
        let members: Vec<usize> = (0..k).filter(|j| m >> j & 1 == 1).collect();
        // cartesian product of non-reference levels
        let mut combos: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
        for &j in &members {
            let f = dgp.observed[j];
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    levels[j][1..].iter().map(move |&lv| {
                        let mut p = prefix.clone();
                        p.push((f, lv));
                        p
                    })
                })
                .collect();
        }
        for atoms in combos {
            let name = atoms.iter().map(|(f, lv)| format!("{}={lv}", dgp.feature_names[*f])).collect::<Vec<_>>().join("*");
            let features = atoms.iter().map(|(f, _)| *f).collect();
            out.push(SaturatedColumn { name, features, atoms });
        }
    }
    out
}

/// Draws `n` rows: covariates from the law, then A, R, Y⁰, Y¹ independently
/// given the covariates; A and Y are masked where R = 0.
pub fn generate(dgp: &DgpSpec, n: usize, seed: u64) -> Result<SimSample> {
    dgp.validate()?;
    if n == 0 {
        return Err(Error::Config("sample size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cells_of, features): (Option<Vec<usize>>, Vec<Vec<f64>>) = match &dgp.law {
        CovariateLaw::Discrete { cells, probs, .. } => {
            let mut cum = Vec::with_capacity(probs.len());
            let mut acc = 0.0;
            for p in probs {
                acc += p;
                cum.push(acc);
            }
            let idx: Vec<usize> = (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    cum.iter().position(|&c| u < c).unwrap_or(cells.len() - 1)
                })
                .collect();
            let feats = idx.iter().map(|&c| cells[c].clone()).collect();
            (Some(idx), feats)
        }
        CovariateLaw::UniformCube { dim } => (None, (0..n).map(|_| (0..*dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()),
    };

    let mut treated = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for i in 0..n {
        let law = dgp.cell_law(cells_of.as_ref().map(|c| c[i]), &features[i]);
        let bern = |rng: &mut ChaCha8Rng, p: f64| rng.random::<f64>() < p;
        treated.push(bern(&mut rng, law.pi));
        r.push(bern(&mut rng, law.omega));
        y0.push(bern(&mut rng, law.m0) as u8 as f64);
        y1.push(bern(&mut rng, law.m1) as u8 as f64);
    }
    let a: Vec<Option<bool>> = (0..n).map(|i| r[i].then_some(treated[i])).collect();
    let y: Vec<Option<f64>> = (0..n).map(|i| r[i].then(|| if treated[i] { y1[i] } else { y0[i] })).collect();

    let (design, column_features) = match (dgp.encoding, &dgp.law) {
        (DesignEncoding::Saturated, CovariateLaw::Discrete { cells, .. }) => {
            let cols = saturated_columns(dgp, cells);
            let mut data = Vec::with_capacity(n * cols.len());
            for x in &features {
                for c in &cols {
                    data.push(if c.atoms.iter().all(|&(f, lv)| x[f] == lv) { 1.0 } else { 0.0 });
                }
            }
            let names = cols.iter().map(|c| c.name.clone()).collect();
            (DesignMatrix::new(n, cols.len(), data, names)?, cols.into_iter().map(|c| c.features).collect())
        }
        (DesignEncoding::Saturated, CovariateLaw::UniformCube { .. }) => {
            return Err(Error::Config("saturated encoding needs a discrete law".into()))
        }
        (DesignEncoding::Raw, _) => {
            let data = features.iter().flat_map(|x| dgp.observed.iter().map(|&f| x[f])).collect();
            let names = dgp.observed.iter().map(|&f| dgp.feature_names[f].clone()).collect();
            (DesignMatrix::new(n, dgp.observed.len(), data, names)?, dgp.observed.iter().map(|&f| vec![f]).collect())
        }
    };
    let mut dataset = CausalDataset::from_design(design, r, a, y, OutcomeKind::Binary)?;
    if dgp.encoding == DesignEncoding::Saturated {
        // raw observed features, so covariates can be looked up by name
        let raw = dgp
            .observed
            .iter()
            .map(|&f| {
                let values: Vec<Option<f64>> = features.iter().map(|x| Some(x[f])).collect();
                let binary = values.iter().all(|v| matches!(v, Some(b) if *b == 0.0 || *b == 1.0));
                let kind = if binary { ColumnKind::Binary } else { ColumnKind::Continuous };
                Column::numeric(&dgp.feature_names[f], kind, values)
            })
            .collect();
        dataset = dataset.with_covariates(raw)?;
    }
    if let (CovariateLaw::Discrete { groups: Some(g), .. }, Some(idx)) = (&dgp.law, &cells_of) {
        dataset = dataset.with_group(idx.iter().map(|&c| g[c].clone()).collect())?;
    }
    Ok(SimSample { dataset, features, cell: cells_of, treated, y0, y1, column_features })
}

/// The observed-level true nuisances at every row, as a surface.
pub fn true_surface(dgp: &DgpSpec, sample: &SimSample, clip: f64) -> Result<NuisanceSurface> {
    let rows: Vec<super::TrueNuisances> = match &sample.cell {
        Some(idx) => {
            let per_cell = cell_nuisances(dgp);
            idx.iter().map(|&c| per_cell[c]).collect()
        }
        None => sample.features.iter().map(|x| point_nuisances(dgp, x)).collect(),
    };
    NuisanceSurface::from_values(
        rows.iter().map(|t| t.omega).collect(),
        rows.iter().map(|t| t.pi).collect(),
        rows.iter().map(|t| t.mu0).collect(),
        rows.iter().map(|t| t.mu1).collect(),
        Some(rows.iter().map(|t| t.mu_y).collect()),
        clip,
    )
}
