use super::{CovariateLaw, DesignEncoding, DgpSpec, Response, TreatedOutcome};

fn table(values: Vec<f64>) -> Response {
    Response::Table { values }
}

fn names(n: &[&str]) -> Vec<String> {
    n.iter().map(|s| s.to_string()).collect()
}

/// One binary covariate, ATT 0.1, constant follow-up 0.8.
pub fn reference() -> DgpSpec {
    DgpSpec {
        name: "reference".into(),
        feature_names: names(&["x"]),
        law: CovariateLaw::Discrete { cells: vec![vec![0.0], vec![1.0]], probs: vec![0.5, 0.5], groups: None },
        observed: vec![0],
        encoding: DesignEncoding::Saturated,
        treatment: table(vec![0.3, 0.7]),
        followup: table(vec![0.8, 0.8]),
        control_outcome: table(vec![0.2, 0.4]),
        treated_outcome: TreatedOutcome::Mean { response: table(vec![0.3, 0.5]) },
        drop_for_misspec: vec![0],
    }
}

/// Two binary covariates driving treatment, follow-up and outcome in the same
/// direction, so that a wrong nuisance shows up as a large bias. ATT 0.155.
pub fn strong_confounding() -> DgpSpec {
    let cells: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let at = |f: fn(f64, f64) -> f64| table(cells.iter().map(|c| f(c[0], c[1])).collect());
    DgpSpec {
        name: "strong_confounding".into(),
        feature_names: names(&["x1", "x2"]),
        law: CovariateLaw::Discrete { cells: cells.clone(), probs: vec![0.25; 4], groups: None },
        observed: vec![0, 1],
        encoding: DesignEncoding::Saturated,
        treatment: at(|a, b| 0.15 + 0.6 * a + 0.1 * b),
        followup: at(|a, b| 0.9 - 0.5 * a - 0.1 * b),
        control_outcome: at(|a, b| 0.1 + 0.5 * a + 0.1 * b),
        treated_outcome: TreatedOutcome::Mean { response: at(|a, b| 0.2 + 0.5 * a + 0.2 * b) },
        drop_for_misspec: vec![0, 1],
    }
}

/// Observed `x` and hidden binary `u`; `u` raises both treatment and the
/// untreated outcome when `x = 1`. True ATT 0.1; the largest ratio of
/// untreated-outcome means between treated and untreated, given `x`, is 1.5.
pub fn omitted_confounder() -> DgpSpec {
    let cells: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    DgpSpec {
        name: "omitted_confounder".into(),
        feature_names: names(&["x", "u"]),
        law: CovariateLaw::Discrete { cells, probs: vec![0.25; 4], groups: None },
        observed: vec![0],
        encoding: DesignEncoding::Saturated,
        treatment: table(vec![0.3, 0.3, 0.2, 0.6]),
        followup: table(vec![0.8, 0.8, 0.6, 0.6]),
        control_outcome: table(vec![0.3, 0.3, 0.15, 0.45]),
        treated_outcome: TreatedOutcome::Mean { response: table(vec![0.4, 0.4, 0.25, 0.55]) },
        drop_for_misspec: vec![0],
    }
}

/// Three uniform covariates with every nuisance logistic-linear, so logistic
/// regression is correctly specified for all of them.
pub fn smooth() -> DgpSpec {
    let treat = (-0.3, vec![0.8, -0.5, 0.3]);
    DgpSpec {
        name: "smooth".into(),
        feature_names: names(&["x1", "x2", "x3"]),
        law: CovariateLaw::UniformCube { dim: 3 },
        observed: vec![0, 1, 2],
        encoding: DesignEncoding::Raw,
        treatment: Response::Logistic { intercept: treat.0, coef: treat.1.clone() },
        followup: Response::Logistic { intercept: 1.2, coef: vec![-0.6, 0.0, 0.4] },
        control_outcome: Response::Logistic { intercept: -1.0, coef: vec![0.7, 0.5, 0.0] },
        treated_outcome: TreatedOutcome::TreatedProduct { response: Response::Logistic { intercept: treat.0 - 0.8, coef: treat.1 } },
        drop_for_misspec: vec![0],
    }
}

/// Four groups coded by two bits plus a binary covariate; the effect is 0.1 in every group.
pub fn homogeneous_groups() -> DgpSpec {
    let mut cells = Vec::new();
    let mut groups = Vec::new();
    for g in 0..4 {
        for x in 0..2 {
            cells.push(vec![(g >> 1) as f64, (g & 1) as f64, x as f64]);
            groups.push(format!("g{g}"));
        }
    }
    let at = |f: fn(&[f64]) -> f64| table(cells.iter().map(|c| f(c)).collect());
    DgpSpec {
        name: "homogeneous_groups".into(),
        feature_names: names(&["g_hi", "g_lo", "x"]),
        law: CovariateLaw::Discrete { cells: cells.clone(), probs: vec![0.125; 8], groups: Some(groups) },
        observed: vec![0, 1, 2],
        encoding: DesignEncoding::Saturated,
        treatment: at(|c| 0.3 + 0.3 * c[2] + 0.05 * c[0]),
        followup: at(|c| 0.85 - 0.1 * c[2]),
        control_outcome: at(|c| 0.2 + 0.2 * c[2] + 0.05 * c[1]),
        treated_outcome: TreatedOutcome::Mean { response: at(|c| 0.3 + 0.2 * c[2] + 0.05 * c[1]) },
        drop_for_misspec: vec![2],
    }
}

/// Two equally sized groups with effects 0.0 and 0.1.
pub fn two_group_gap() -> DgpSpec {
    let cells: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let groups = vec!["a".to_string(), "a".into(), "b".into(), "b".into()];
    let at = |f: fn(&[f64]) -> f64| table(cells.iter().map(|c| f(c)).collect());
    DgpSpec {
        name: "two_group_gap".into(),
        feature_names: names(&["g", "x"]),
        law: CovariateLaw::Discrete { cells: cells.clone(), probs: vec![0.25; 4], groups: Some(groups) },
        observed: vec![0, 1],
        encoding: DesignEncoding::Saturated,
        treatment: at(|c| 0.3 + 0.3 * c[1]),
        followup: at(|_| 0.8),
        control_outcome: at(|c| 0.2 + 0.2 * c[1]),
        treated_outcome: TreatedOutcome::Mean { response: at(|c| 0.2 + 0.2 * c[1] + 0.1 * c[0]) },
        drop_for_misspec: vec![1],
    }
}

/// A fifth of the population is almost never treated.
pub fn low_overlap() -> DgpSpec {
    DgpSpec {
        name: "low_overlap".into(),
        feature_names: names(&["stratum"]),
        law: CovariateLaw::Discrete { cells: vec![vec![0.0], vec![1.0], vec![2.0]], probs: vec![0.2, 0.4, 0.4], groups: None },
        observed: vec![0],
        encoding: DesignEncoding::Saturated,
        treatment: table(vec![0.003, 0.3, 0.6]),
        followup: table(vec![0.8, 0.8, 0.7]),
        control_outcome: table(vec![0.1, 0.2, 0.3]),
        treated_outcome: TreatedOutcome::Mean { response: table(vec![0.15, 0.3, 0.4]) },
        drop_for_misspec: vec![0],
    }
}
