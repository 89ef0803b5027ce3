use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DesignMatrix;

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 30;
const JITTER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticSpec {
    /// Ridge penalty on the slopes of the mean log-likelihood; the intercept is unpenalized.
    pub lambda: f64,
}

impl Default for LogisticSpec {
    fn default() -> Self {
        Self { lambda: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub iterations: usize,
    /// Penalized objective after each accepted iteration (starting point first).
    pub objective_trace: Vec<f64>,
}

impl LogisticModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        expit(self.intercept + x.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = vec![self.intercept];
        v.extend_from_slice(&self.coef);
        v
    }
}

#[inline]
pub(crate) fn expit(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
fn log1pexp(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else if z < -35.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean Bernoulli log-likelihood minus `lambda/2 * |slopes|^2`.
pub(crate) fn penalized_objective(x: &DesignMatrix, t: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    let ll: f64 = (0..x.nrows())
        .map(|i| {
            let z = linear(x.row(i), beta);
            t[i] * z - log1pexp(z)
        })
        .sum();
    ll / n - 0.5 * lambda * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

#[inline]
fn linear(row: &[f64], beta: &[f64]) -> f64 {
    beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// Ridge-penalized logistic regression by iteratively reweighted least squares
/// with step-halving.
pub fn fit_logistic(x: &DesignMatrix, t: &[f64], spec: &LogisticSpec) -> Result<LogisticModel> {
    let n = x.nrows();
    let d = x.ncols();
    if n == 0 || n != t.len() {
        return Err(Error::Learner(format!("logistic fit needs matching non-empty data ({n} rows, {} targets)", t.len())));
    }
    if let Some(bad) = t.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Learner(format!("logistic regression needs binary targets, got {bad}")));
    }
    let p = d + 1;
    let nf = n as f64;
    let lambda = spec.lambda;

    // start from the intercept-only solution
    let mean_t = t.iter().sum::<f64>() / nf;
    let m = mean_t.clamp(1e-6, 1.0 - 1e-6);
    let mut beta = vec![0.0; p];
    beta[0] = (m / (1.0 - m)).ln();
    let mut obj = penalized_objective(x, t, &beta, lambda);
    let mut trace = vec![obj];
    let mut iterations = 0;
    let mut jitter_warned = false;

    for it in 0..MAX_ITER {
        iterations = it + 1;
        // gradient and Fisher information of the mean objective
        let mut grad = vec![0.0; p];
        let mut info = DMatrix::<f64>::zeros(p, p);
        for (i, &ti) in t.iter().enumerate() {
            let row = x.row(i);
            let mu = expit(linear(row, &beta));
            let w = mu * (1.0 - mu);
            let r = ti - mu;
            grad[0] += r;
            info[(0, 0)] += w;
            for j in 0..d {
                let xj = row[j];
                grad[j + 1] += r * xj;
                info[(0, j + 1)] += w * xj;
                for k in j..d {
                    info[(j + 1, k + 1)] += w * xj * row[k];
                }
            }
        }
        for j in 0..p {
            grad[j] /= nf;
            for k in j..p {
                info[(j, k)] /= nf;
                info[(k, j)] = info[(j, k)];
            }
        }
        for j in 1..p {
            grad[j] -= lambda * beta[j];
            info[(j, j)] += lambda;
        }

        let g = DVector::from_vec(grad);
        let step = solve_spd(&info, &g, &mut jitter_warned)?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let cand_obj = penalized_objective(x, t, &cand, lambda);
            if cand_obj >= obj - 1e-15 * obj.abs().max(1.0) {
                accepted = Some((cand, cand_obj));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_obj)) = accepted else {
            // no ascent direction left at machine precision
            break;
        };
        let change = cand.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = cand;
        obj = cand_obj.max(obj);
        trace.push(obj);
        if change < TOL {
            break;
        }
    }

    Ok(LogisticModel { intercept: beta[0], coef: beta[1..].to_vec(), iterations, objective_trace: trace })
}

/// Cholesky solve, escalating a diagonal jitter when the system is singular.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, warned: &mut bool) -> Result<DVector<f64>> {
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut m = a.clone();
        for j in 0..m.nrows() {
            m[(j, j)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            let s = ch.solve(b);
            if s.iter().all(|v| v.is_finite()) {
                if jitter > 0.0 && !*warned {
                    log::warn!("logistic normal equations singular; ridge escalated by {jitter:e}");
                    *warned = true;
                }
                return Ok(s);
            }
        }
        jitter = if jitter == 0.0 { JITTER } else { jitter * 10.0 };
    }
    Err(Error::Learner("logistic normal equations remain singular after ridge escalation".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: plain Newton on the penalized objective with the
    /// exact Hessian, solved by Gaussian elimination with partial pivoting.
    fn newton_oracle(rows: &[Vec<f64>], t: &[f64], lambda: f64) -> Vec<f64> {
        let n = rows.len() as f64;
        let p = rows[0].len() + 1;
        let mut beta = vec![0.0; p];
        for _ in 0..200 {
            let mut g = vec![0.0; p];
            let mut h = vec![vec![0.0; p]; p];
            for (row, &ti) in rows.iter().zip(t) {
                let z: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
                let eta: f64 = z.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let mu = 1.0 / (1.0 + (-eta).exp());
                for j in 0..p {
                    g[j] += (ti - mu) * z[j] / n;
                    for k in 0..p {
                        h[j][k] += mu * (1.0 - mu) * z[j] * z[k] / n;
                    }
                }
            }
            for j in 1..p {
                g[j] -= lambda * beta[j];
                h[j][j] += lambda;
            }
            // solve h * s = g
            let mut aug: Vec<Vec<f64>> = h.iter().zip(&g).map(|(r, gi)| r.iter().copied().chain([*gi]).collect()).collect();
            for c in 0..p {
                let piv = (c..p).max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs())).unwrap();
                aug.swap(c, piv);
                for r in 0..p {
                    if r != c {
                        let f = aug[r][c] / aug[c][c];
                        for k in c..=p {
                            aug[r][k] -= f * aug[c][k];
                        }
                    }
                }
            }
            let s: Vec<f64> = (0..p).map(|j| aug[j][p] / aug[j][j]).collect();
            for j in 0..p {
                beta[j] += s[j];
            }
            if s.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-13 {
                break;
            }
        }
        beta
    }

    fn random_instance(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let t = rows
            .iter()
            .map(|r| {
                let p = expit(0.3 + r[0] - 0.5 * r[1]);
                if rng.random::<f64>() < p { 1.0 } else { 0.0 }
            })
            .collect();
        (rows, t)
    }

    #[test]
    fn matches_dense_newton_oracle() {
        for seed in 0..5 {
            let (rows, t) = random_instance(seed, 20, 3);
            let x = DesignMatrix::from_rows(&rows).unwrap();
            let spec = LogisticSpec { lambda: 0.05 };
            let fit = fit_logistic(&x, &t, &spec).unwrap();
            let oracle = newton_oracle(&rows, &t, spec.lambda);
            for (a, b) in fit.coefficients().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-6, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn constant_design_balanced_targets_gives_half() {
        let x = DesignMatrix::from_rows(&vec![vec![1.0]; 10]).unwrap();
        let t: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let m = fit_logistic(&x, &t, &LogisticSpec::default()).unwrap();
        for i in 0..10 {
            assert!((m.predict_row(x.row(i)) - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn separable_data_monotone_and_bounded() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0]).collect();
        let t: Vec<f64> = (0..30).map(|i| if i >= 15 { 1.0 } else { 0.0 }).collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let m = fit_logistic(&x, &t, &LogisticSpec::default()).unwrap();
        let p: Vec<f64> = rows.iter().map(|r| m.predict_row(r)).collect();
        assert!(p.windows(2).all(|w| w[1] >= w[0]));
        assert!(p[0] > 0.0 && p[29] < 1.0);
        assert!(p[0] < 0.05 && p[29] > 0.95);
    }

    #[test]
    fn objective_never_decreases() {
        for seed in 0..5 {
            let (rows, t) = random_instance(100 + seed, 60, 4);
            let x = DesignMatrix::from_rows(&rows).unwrap();
            let m = fit_logistic(&x, &t, &LogisticSpec { lambda: 1e-4 }).unwrap();
            assert!(m.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
    }

    #[test]
    fn rejects_non_binary_targets() {
        let x = DesignMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(fit_logistic(&x, &[0.0, 0.5], &LogisticSpec::default()).is_err());
    }

    #[test]
    fn duplicated_column_handled() {
        // collinear design is singular without the ridge
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 5) as f64, (i % 5) as f64]).collect();
        let t: Vec<f64> = (0..40).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let m = fit_logistic(&x, &t, &LogisticSpec { lambda: 0.0 }).unwrap();
        assert!(m.coef.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn intercept_only_matches_mean() {
        let x = DesignMatrix::empty(8);
        let t = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let m = fit_logistic(&x, &t, &LogisticSpec::default()).unwrap();
        assert!((m.predict_row(&[]) - 3.0 / 8.0).abs() < 1e-10);
    }
}
