//! Cost-sensitive Bayes rule, the conditional risk of the composite loss,
//! and recovery of expected costs and class probabilities from its
//! minimizer.
//!
//! At a minimizer `f*` of the conditional risk the weights
//! `-sum_j C[j][t] P_j l'(-<w_t, f*>)` share a common value `M` for every
//! class `t`. Hence the expected cost of predicting `t` is
//! `-M / l'(-<w_t, f*>)`, and when `C` is invertible the class
//! probabilities solve `C^T p = -M l*` with `l*_t = 1 / l'(-<w_t, f*>)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::cost::CostMatrix;
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky_solve, solve};
use crate::loss::{check_classes, Margin};
use crate::simplex::{argmin, dot, SimplexCode};

/// Conditional class probabilities `P(Y = j | X = x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution(Vec<f64>);

impl ClassDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(invalid("a class distribution needs at least two classes"));
        }
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!("probabilities must be >= 0: {p:?}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("probabilities sum to {s}, not 1")));
        }
        Ok(Self(p))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `sum_j C[j][k] p_j` for every candidate prediction `k`.
pub fn expected_costs(cost: &CostMatrix, p: &ClassDistribution) -> Result<Vec<f64>> {
    if cost.k() != p.k() {
        return Err(invalid(format!(
            "cost matrix has K = {} but distribution has {} classes",
            cost.k(),
            p.k()
        )));
    }
    let k = cost.k();
    Ok((0..k)
        .map(|t| (0..k).map(|j| cost.get(j, t) * p.0[j]).sum())
        .collect())
}

/// The cost-sensitive Bayes rule `argmin_k sum_j C[j][k] p_j`; ties go to
/// the smallest class index.
pub fn bayes_rule(cost: &CostMatrix, p: &ClassDistribution) -> Result<usize> {
    Ok(argmin(expected_costs(cost, p)?))
}

/// `sum_j sum_t C[j][t] p_j l(-<w_t, f>)`.
pub fn conditional_risk<L: Margin + ?Sized>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    p: &ClassDistribution,
    f: &[f64],
) -> Result<f64> {
    check_classes(code, cost)?;
    code.check_dim(f)?;
    let weights = expected_costs(cost, p)?;
    Ok(risk_value(code, loss, &weights, f))
}

fn risk_value<L: Margin + ?Sized>(code: &SimplexCode, loss: &L, weights: &[f64], f: &[f64]) -> f64 {
    code.vertices()
        .zip(weights)
        .filter(|(_, &a)| a != 0.0)
        .map(|(w, &a)| a * loss.value(-dot(w, f)))
        .sum()
}

/// Result of [`minimize_conditional_risk`].
#[derive(Debug, Clone, PartialEq)]
pub struct RiskMinimizer {
    pub f_star: Vec<f64>,
    pub achieved_risk: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub const MAX_MINIMIZER_ITERATIONS: usize = 10_000;

/// Numerically minimizes the conditional risk over `f in R^(K-1)`.
///
/// Descent with Armijo backtracking. The search direction is the Newton
/// direction when the Hessian is positive definite and the negative
/// gradient otherwise. Stops once the gradient norm is at most `tol`;
/// running out of iterations is reported through `converged = false`.
pub fn minimize_conditional_risk<L: Margin + ?Sized>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    p: &ClassDistribution,
    tol: f64,
) -> Result<RiskMinimizer> {
    check_classes(code, cost)?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let weights = expected_costs(cost, p)?;
    let k = code.k();
    let dim = code.dim();

    let mut f = vec![0.0; dim];
    let mut value = risk_value(code, loss, &weights, &f);
    let mut grad = vec![0.0; dim];
    let mut hess = vec![0.0; dim * dim];
    let mut trial = vec![0.0; dim];
    let mut iterations = 0;

    loop {
        grad.fill(0.0);
        hess.fill(0.0);
        for t in 0..k {
            let a = weights[t];
            if a == 0.0 {
                continue;
            }
            let w = code.vertex(t);
            let z = -dot(w, &f);
            let d1 = a * loss.derivative(z);
            let d2 = a * loss.second_derivative(z);
            for r in 0..dim {
                grad[r] -= d1 * w[r];
                for c in 0..dim {
                    hess[r * dim + c] += d2 * w[r] * w[c];
                }
            }
        }
        let gnorm = dot(&grad, &grad).sqrt();
        if gnorm <= tol {
            return Ok(RiskMinimizer {
                f_star: f,
                achieved_risk: value,
                gradient_norm: gnorm,
                converged: true,
                iterations,
            });
        }
        if iterations >= MAX_MINIMIZER_ITERATIONS {
            break;
        }
        iterations += 1;

        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let newton = cholesky_solve(&hess, &neg).filter(|d| dot(d, &grad) < 0.0);
        let mut moved = false;
        for dir in newton.iter().chain(std::iter::once(&neg)) {
            let slope = dot(dir, &grad);
            let mut step = 1.0;
            while step > 1e-20 {
                for r in 0..dim {
                    trial[r] = f[r] + step * dir[r];
                }
                let v = risk_value(code, loss, &weights, &trial);
                if v <= value + 1e-4 * step * slope {
                    f.copy_from_slice(&trial);
                    value = v;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            // No representable decrease left along either direction.
            break;
        }
    }

    let gnorm = dot(&grad, &grad).sqrt();
    Ok(RiskMinimizer {
        f_star: f,
        achieved_risk: value,
        gradient_norm: gnorm,
        converged: false,
        iterations,
    })
}

fn inverse_derivatives<L: Margin + ?Sized>(
    code: &SimplexCode,
    loss: &L,
    f: &[f64],
) -> Result<Vec<f64>> {
    code.vertices()
        .enumerate()
        .map(|(t, w)| {
            let d = loss.derivative(-dot(w, f));
            if d == 0.0 || !d.is_finite() {
                Err(Error::Degenerate(format!(
                    "loss derivative at class {} is {d}",
                    t + 1
                )))
            } else {
                Ok(1.0 / d)
            }
        })
        .collect()
}

/// Expected costs recovered from a decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedCosts {
    pub values: Vec<f64>,
    /// `false` when `C` is singular: `values` are then only proportional to
    /// the expected costs (the normalizer is left at one).
    pub normalized: bool,
}

/// Expected cost of each predicted class, `-M / l'(-<w_t, f>)`.
///
/// `M` is chosen so that the implied class probabilities sum to one.
pub fn expected_costs_from_f<L: Margin + ?Sized>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    f: &[f64],
) -> Result<ExpectedCosts> {
    check_classes(code, cost)?;
    code.check_dim(f)?;
    let inv = inverse_derivatives(code, loss, f)?;
    let k = code.k();
    let m = if cost.is_zero_one() {
        (1.0 - k as f64) / inv.iter().sum::<f64>()
    } else {
        match solve(&transpose(cost), &inv, "C^T") {
            Ok(q) => -1.0 / q.iter().sum::<f64>(),
            Err(Error::SingularMatrix { .. }) => {
                return Ok(ExpectedCosts {
                    values: inv.iter().map(|v| -v).collect(),
                    normalized: false,
                })
            }
            Err(e) => return Err(e),
        }
    };
    Ok(ExpectedCosts {
        values: inv.iter().map(|v| -m * v).collect(),
        normalized: true,
    })
}

/// Class probabilities recovered from a decision vector.
///
/// Uses the closed form `P_t = 1 + (1-K) l*_t / sum_k l*_k` for 0/1 costs
/// and `p = (C^T)^{-1} l* / 1^T (C^T)^{-1} l*` otherwise.
pub fn recover_probabilities<L: Margin + ?Sized>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    f: &[f64],
) -> Result<ClassDistribution> {
    let mut p = raw_probabilities(code, cost, loss, f)?;
    if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < -1e-9) {
        return Err(Error::Degenerate(format!(
            "recovered probability {bad} is negative; f is not a risk minimizer for this cost matrix"
        )));
    }
    for v in &mut p {
        *v = v.max(0.0);
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    ClassDistribution::new(p)
}

/// Plug-in probability estimate for an arbitrary `f`, such as a fitted
/// ensemble: the recovery formulas followed by clipping at zero and
/// renormalising. Agrees with [`recover_probabilities`] at a minimizer.
pub fn plug_in_probabilities<L: Margin + ?Sized>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    f: &[f64],
) -> Result<ClassDistribution> {
    let mut p = raw_probabilities(code, cost, loss, f)?;
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("recovered probabilities are not finite".into()));
    }
    for v in &mut p {
        *v = v.max(0.0);
    }
    let s: f64 = p.iter().sum();
    if s <= 0.0 {
        return Err(Error::Degenerate("every recovered probability is negative".into()));
    }
    p.iter_mut().for_each(|v| *v /= s);
    ClassDistribution::new(p)
}

/// Recovery formulas without any range check; sums to one.
fn raw_probabilities<L: Margin + ?Sized>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    f: &[f64],
) -> Result<Vec<f64>> {
    check_classes(code, cost)?;
    code.check_dim(f)?;
    let inv = inverse_derivatives(code, loss, f)?;
    let k = code.k() as f64;
    if cost.is_zero_one() {
        let total: f64 = inv.iter().sum();
        Ok(inv.iter().map(|v| 1.0 + (1.0 - k) * v / total).collect())
    } else {
        let q = solve(&transpose(cost), &inv, "C^T")?;
        let total: f64 = q.iter().sum();
        Ok(q.iter().map(|v| v / total).collect())
    }
}

fn transpose(cost: &CostMatrix) -> Vec<f64> {
    let k = cost.k();
    let mut t = vec![0.0; k * k];
    for j in 0..k {
        for c in 0..k {
            t[c * k + j] = cost.get(j, c);
        }
    }
    t
}

/// Smallest gap between the Bayes-optimal expected cost and the runner-up
/// that a sampled distribution must have to count as a trial.
pub const BAYES_MARGIN: f64 = 0.02;

/// One sampled distribution in a consistency check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyTrial {
    pub trial: usize,
    pub p: Vec<f64>,
    pub bayes_class: usize,
    pub predicted_class: usize,
    pub converged: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub trials: Vec<ConsistencyTrial>,
    pub pass_rate: f64,
}

impl ConsistencyReport {
    pub fn failures(&self) -> impl Iterator<Item = &ConsistencyTrial> {
        self.trials.iter().filter(|t| !t.pass)
    }
}

/// A draw from the flat Dirichlet distribution on `k` classes, adjusted
/// so the entries sum to one exactly enough for [`ClassDistribution`].
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = g.iter().sum();
    let mut p: Vec<f64> = g.iter().map(|v| v / s).collect();
    let rest: f64 = p[1..].iter().sum();
    p[0] = (1.0 - rest).max(0.0);
    p
}

/// Samples `p ~ Dirichlet(1, ..., 1)` until the Bayes argmin is unique by
/// at least [`BAYES_MARGIN`].
fn sample_separated(rng: &mut ChaCha8Rng, cost: &CostMatrix) -> ClassDistribution {
    loop {
        let Ok(dist) = ClassDistribution::new(sample_dirichlet(rng, cost.k())) else {
            continue;
        };
        let mut ec = expected_costs(cost, &dist).expect("dimensions checked");
        ec.sort_by(f64::total_cmp);
        if ec[1] - ec[0] > BAYES_MARGIN {
            return dist;
        }
    }
}

/// Checks numerically that the risk minimizer reproduces the Bayes rule.
///
/// Trial `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so the
/// report does not depend on how trials are scheduled across threads.
pub fn check_fisher_consistency<L: Margin + Sync + ?Sized>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    trials: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    check_classes(code, cost)?;
    if trials == 0 {
        return Err(invalid("consistency check needs at least one trial"));
    }
    let outcomes: Result<Vec<ConsistencyTrial>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let p = sample_separated(&mut rng, cost);
            let bayes_class = bayes_rule(cost, &p)?;
            let min = minimize_conditional_risk(code, cost, loss, &p, 1e-9)?;
            let predicted_class = code.predict(&min.f_star)?;
            Ok(ConsistencyTrial {
                trial,
                p: p.into_inner(),
                bayes_class,
                predicted_class,
                converged: min.converged,
                pass: bayes_class == predicted_class,
            })
        })
        .collect();
    let trials_out = outcomes?;
    let passed = trials_out.iter().filter(|t| t.pass).count();
    Ok(ConsistencyReport {
        pass_rate: passed as f64 / trials_out.len() as f64,
        trials: trials_out,
    })
}
