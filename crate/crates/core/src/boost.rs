//! Angle-based cost-sensitive AdaBoost and LogitBoost.
//!
//! Both algorithms build `f(x) = sum_m beta_m w_{Phi_m(x)}`, where each
//! `Phi_m` is a tree fitted to a weight table `alpha` and `w_k` is the
//! simplex vertex of class `k`. Training keeps the margins
//! `s[i][k] = <f(x_i), w_k>` so that each round only needs the Gram
//! entries `<w_a, w_b>`.
//!
//! AdaBoost uses the exponential loss. Its weights are
//! `alpha[i][k] ∝ C[y_i][k] exp(s[i][k])`, and the step for a tree with
//! weighted error `eps` has the closed form
//! `beta = (K-1)/K * (log((1-eps)/eps) - log(K-1))`.
//!
//! LogitBoost uses the logit loss. Its weights are
//! `alpha[i][k] ∝ C[y_i][k] sigmoid(s[i][k])`, and `beta` minimizes
//! `sum_i sum_k C[y_i][k] log(1 + exp(s[i][k] + beta <w_Phi(x_i), w_k>))`
//! by a scalar line search.

use std::fmt;
use std::str::FromStr;

use log::debug;

use crate::cost::CostMatrix;
use crate::data::{Dataset, Matrix};
use crate::error::{invalid, Error, Result};
use crate::loss::{sigmoid, softplus, MarginLoss};
use crate::simplex::{argmax, SimplexCode};
use crate::tree::{Node, Tree, TreeLearner, WeightTable};

/// Floor on the weighted error when computing the AdaBoost step.
pub const EPSILON_FLOOR: f64 = 1e-10;

/// Rounds whose weighted error reaches this value abort training.
pub const EPSILON_ABORT: f64 = 1.0 - 1e-12;

/// Bracket expansion limit for [`line_search_beta`].
pub const MAX_BETA: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    AdaBoost,
    LogitBoost,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AdaBoost => "adaboost",
            Algorithm::LogitBoost => "logitboost",
        }
    }

    /// The margin loss the algorithm minimizes.
    pub fn loss(self) -> MarginLoss {
        match self {
            Algorithm::AdaBoost => MarginLoss::Exponential,
            Algorithm::LogitBoost => MarginLoss::Logit,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaboost" | "exponential" => Ok(Algorithm::AdaBoost),
            "logitboost" | "logit" => Ok(Algorithm::LogitBoost),
            other => Err(invalid(format!(
                "unknown algorithm `{other}` (expected adaboost or logitboost)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub rounds: usize,
    pub max_leaves: usize,
    /// Bracket width at which the LogitBoost line search stops.
    pub line_search_tol: f64,
    /// Recorded for provenance. Fitting itself draws no random numbers.
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            rounds: 200,
            max_leaves: 4,
            line_search_tol: 1e-8,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(invalid("rounds must be >= 1"));
        }
        if self.max_leaves < 2 {
            return Err(invalid(format!(
                "max_leaves must be >= 2, got {}",
                self.max_leaves
            )));
        }
        if !(self.line_search_tol > 0.0 && self.line_search_tol.is_finite()) {
            return Err(invalid("line search tolerance must be positive"));
        }
        Ok(())
    }
}

/// The closed-form AdaBoost step for weighted error `eps`.
pub fn lemma1_beta(k: usize, eps: f64) -> f64 {
    let km1 = (k - 1) as f64;
    let eps = eps.max(EPSILON_FLOOR);
    km1 / k as f64 * (((1.0 - eps) / eps).ln() - km1.ln())
}

/// Minimizes a convex scalar function.
///
/// A bracket is grown geometrically from `[0, 1]` (or `[-1, 0]` when the
/// function increases to the right), then shrunk by golden-section search
/// until its width is at most `tol`. The best point evaluated is returned.
pub fn line_search_beta<F: Fn(f64) -> f64>(objective: F, tol: f64) -> Result<f64> {
    const GROW: f64 = 1.618_033_988_749_895;
    const INV_PHI: f64 = 0.618_033_988_749_895;
    let eval = |b: f64| -> Result<f64> {
        let v = objective(b);
        if v.is_nan() {
            return Err(Error::NonConvergence(format!("objective is NaN at beta = {b}")));
        }
        Ok(v)
    };

    let mut best = (0.0, eval(0.0)?);
    let consider = |b: f64, v: f64, best: &mut (f64, f64)| {
        if v < best.1 {
            *best = (b, v);
        }
    };

    let f1 = eval(1.0)?;
    let (mut lo, mut hi);
    if f1 < best.1 {
        consider(1.0, f1, &mut best);
        let (mut a, mut b, mut fb) = (0.0, 1.0, f1);
        loop {
            let c = b + GROW * (b - a);
            if c > MAX_BETA {
                return Err(Error::NonConvergence(format!(
                    "no minimum found in [0, {MAX_BETA}]"
                )));
            }
            let fc = eval(c)?;
            consider(c, fc, &mut best);
            if fc >= fb {
                (lo, hi) = (a, c);
                break;
            }
            (a, b, fb) = (b, c, fc);
        }
    } else {
        let fm = eval(-1.0)?;
        if fm < best.1 {
            consider(-1.0, fm, &mut best);
            let (mut a, mut b, mut fb) = (0.0, -1.0, fm);
            loop {
                let c = b + GROW * (b - a);
                if c < -MAX_BETA {
                    return Err(Error::NonConvergence(format!(
                        "no minimum found in [-{MAX_BETA}, 0]"
                    )));
                }
                let fc = eval(c)?;
                consider(c, fc, &mut best);
                if fc >= fb {
                    (lo, hi) = (c, a);
                    break;
                }
                (a, b, fb) = (b, c, fc);
            }
        } else {
            (lo, hi) = (-1.0, 1.0);
        }
    }

    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    consider(x1, f1, &mut best);
    consider(x2, f2, &mut best);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1)?;
            consider(x1, f1, &mut best);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2)?;
            consider(x2, f2, &mut best);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub beta: f64,
    pub tree: Tree,
}

/// `f(x) = sum_m beta_m w_{tree_m(x)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    code: SimplexCode,
    algorithm: Algorithm,
    n_features: usize,
    members: Vec<Member>,
}

const FORMAT_TAG: &str = "anglecs-ensemble 1";

impl Ensemble {
    pub fn new(k: usize, algorithm: Algorithm, n_features: usize) -> Result<Self> {
        Ok(Self {
            code: SimplexCode::new(k)?,
            algorithm,
            n_features,
            members: Vec::new(),
        })
    }

    pub fn push(&mut self, beta: f64, tree: Tree) -> Result<()> {
        if !beta.is_finite() {
            return Err(invalid("member weight must be finite"));
        }
        if tree.n_features() != self.n_features || tree.n_classes() != self.k() {
            return Err(invalid("tree dimensions do not match the ensemble"));
        }
        self.members.push(Member { beta, tree });
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.code.k()
    }

    pub fn code(&self) -> &SimplexCode {
        &self.code
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    /// The first `m` members.
    pub fn truncated(&self, m: usize) -> Self {
        Self {
            members: self.members[..m.min(self.members.len())].to_vec(),
            ..self.clone()
        }
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(invalid(format!(
                "input has {} features, the model expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// The decision vector `f(x)` in `R^(K-1)`.
    pub fn f(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut f = vec![0.0; self.code.dim()];
        for m in &self.members {
            let w = self.code.vertex(m.tree.predict(x));
            f.iter_mut().zip(w).for_each(|(a, b)| *a += m.beta * b);
        }
        Ok(f)
    }

    /// Least-angle prediction from `f(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let f = self.f(x)?;
        self.code.predict(&f)
    }

    /// Predictions for every row of `x`.
    pub fn predict_all(&self, x: &Matrix) -> Result<Vec<usize>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }

    /// Parses the format written by `Display`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Format {
                    line: 0,
                    message: format!("unexpected end of input, expected {what}"),
                })
        };
        let fail = |line: usize, message: String| Error::Format { line, message };

        let (l, tag) = next("header")?;
        if tag.trim() != FORMAT_TAG {
            return Err(fail(l, format!("expected `{FORMAT_TAG}`")));
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (l, line) = next(key)?;
            let mut it = line.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(k), Some(v), None) if k == key => Ok((l, v.to_string())),
                _ => Err(fail(l, format!("expected `{key} <value>`"))),
            }
        };
        let parse_usize = |(l, v): (usize, String)| -> Result<usize> {
            v.parse().map_err(|_| fail(l, format!("bad integer `{v}`")))
        };
        let k = parse_usize(field("classes")?)?;
        let (l, alg) = field("algorithm")?;
        let algorithm: Algorithm = alg.parse().map_err(|e: Error| fail(l, e.to_string()))?;
        let n_features = parse_usize(field("features")?)?;
        let count = parse_usize(field("members")?)?;
        let mut ens = Self::new(k, algorithm, n_features).map_err(|e| fail(2, e.to_string()))?;

        for _ in 0..count {
            let (l, head) = next("member")?;
            let f: Vec<&str> = head.split_whitespace().collect();
            if f.len() != 4 || f[0] != "member" || f[2] != "nodes" {
                return Err(fail(l, "expected `member <beta> nodes <count>`".into()));
            }
            let beta: f64 = f[1]
                .parse()
                .map_err(|_| fail(l, format!("bad beta `{}`", f[1])))?;
            let n_nodes: usize = f[3]
                .parse()
                .map_err(|_| fail(l, format!("bad node count `{}`", f[3])))?;
            let mut node_lines = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                node_lines.push(next("tree node")?);
            }
            let tree = Tree::parse(node_lines, n_features, k)?;
            ens.push(beta, tree).map_err(|e| fail(l, e.to_string()))?;
        }
        Ok(ens)
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{FORMAT_TAG}")?;
        writeln!(f, "classes {}", self.k())?;
        writeln!(f, "algorithm {}", self.algorithm)?;
        writeln!(f, "features {}", self.n_features)?;
        writeln!(f, "members {}", self.members.len())?;
        for m in &self.members {
            writeln!(f, "member {:?} nodes {}", m.beta, m.tree.nodes().len())?;
            write!(f, "{}", m.tree)?;
        }
        Ok(())
    }
}

/// Diagnostics for one boosting round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundInfo {
    /// One-based round number.
    pub round: usize,
    /// Weighted error of the fitted tree.
    pub epsilon: f64,
    /// Step length; zero when the round was skipped.
    pub beta: f64,
    /// The tree was no better than guessing and was not added.
    pub skipped: bool,
    /// Training objective after the round: the mean exponential or logit
    /// cost-sensitive loss.
    pub train_risk: f64,
}

/// Round-by-round training state shared by both algorithms.
pub struct Booster<'a> {
    algorithm: Algorithm,
    cfg: BoostConfig,
    labels: &'a [usize],
    cost: CostMatrix,
    learner: TreeLearner<'a>,
    weights: WeightTable,
    /// `<f(x_i), w_k>`, row-major `n x K`.
    margins: Vec<f64>,
    ensemble: Ensemble,
    history: Vec<RoundInfo>,
    /// Leaf classes of the latest fitted tree on the training rows.
    last_classes: Vec<usize>,
}

impl<'a> Booster<'a> {
    pub fn new(
        algorithm: Algorithm,
        x: &'a Matrix,
        labels: &'a [usize],
        cost: &CostMatrix,
        cfg: BoostConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let k = cost.k();
        if labels.len() != x.rows() {
            return Err(invalid(format!(
                "{} labels for {} rows",
                labels.len(),
                x.rows()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= k) {
            return Err(invalid(format!("label {} out of range for K = {k}", y + 1)));
        }
        let n = x.rows();
        let mut b = Self {
            algorithm,
            cfg,
            labels,
            cost: cost.clone(),
            learner: TreeLearner::new(x)?,
            weights: WeightTable::zeros(n, k),
            margins: vec![0.0; n * k],
            ensemble: Ensemble::new(k, algorithm, x.cols())?,
            history: Vec::new(),
            last_classes: Vec::new(),
        };
        b.reset_weights();
        if b.weights.normalize() <= 0.0 {
            return Err(Error::Degenerate(
                "every training row has zero misclassification cost".into(),
            ));
        }
        Ok(b)
    }

    /// Recomputes `alpha` from the margins and normalizes it.
    fn reset_weights(&mut self) {
        let k = self.cost.k();
        for i in 0..self.labels.len() {
            let c = self.cost.row(self.labels[i]);
            let s = &self.margins[i * k..(i + 1) * k];
            let row = self.weights.row_mut(i);
            for t in 0..k {
                row[t] = match self.algorithm {
                    Algorithm::AdaBoost => c[t] * s[t].exp(),
                    Algorithm::LogitBoost => c[t] * sigmoid(s[t]),
                };
            }
        }
        self.weights.normalize();
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    /// Training margins `<f(x_i), w_k>` as a row-major `n x K` table.
    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn into_ensemble(self) -> Ensemble {
        self.ensemble
    }

    pub fn history(&self) -> &[RoundInfo] {
        &self.history
    }

    pub fn rounds_done(&self) -> usize {
        self.history.len()
    }

    /// Leaf classes the latest tree assigns to the training rows.
    pub fn last_classes(&self) -> &[usize] {
        &self.last_classes
    }

    /// The training objective at the current margins.
    pub fn train_risk(&self) -> f64 {
        let k = self.cost.k();
        let mut total = 0.0;
        for (i, &y) in self.labels.iter().enumerate() {
            let s = &self.margins[i * k..(i + 1) * k];
            for (t, &c) in self.cost.row(y).iter().enumerate() {
                if c != 0.0 {
                    total += c * match self.algorithm {
                        Algorithm::AdaBoost => s[t].exp(),
                        Algorithm::LogitBoost => softplus(s[t]),
                    };
                }
            }
        }
        total / self.labels.len() as f64
    }

    /// Mean logit objective after a step of length `beta` along the tree
    /// with training classes `phi`.
    fn logit_objective(&self, phi: &[usize], beta: f64) -> f64 {
        let k = self.cost.k();
        let code = self.ensemble.code();
        let mut total = 0.0;
        for (i, &y) in self.labels.iter().enumerate() {
            let s = &self.margins[i * k..(i + 1) * k];
            for (t, &c) in self.cost.row(y).iter().enumerate() {
                if c != 0.0 {
                    total += c * softplus(s[t] + beta * code.gram(phi[i], t));
                }
            }
        }
        total / self.labels.len() as f64
    }

    /// Runs one boosting round.
    pub fn step(&mut self) -> Result<RoundInfo> {
        let round = self.history.len() + 1;
        let k = self.cost.k();
        let (tree, leaves) = self.learner.fit(&self.weights, self.cfg.max_leaves)?;
        let phi: Vec<usize> = leaves
            .iter()
            .map(|&id| match tree.nodes()[id] {
                Node::Leaf { class } => class,
                Node::Split { .. } => unreachable!("rows are assigned to leaves"),
            })
            .collect();
        let total = self.weights.total();
        let epsilon = phi
            .iter()
            .enumerate()
            .map(|(i, &c)| self.weights.get(i, c))
            .sum::<f64>()
            / total;
        if !(epsilon < EPSILON_ABORT) {
            return Err(Error::RoundAborted {
                round,
                reason: format!("weighted error {epsilon} of the weak learner is too close to 1"),
            });
        }

        let beta = if epsilon >= 1.0 / k as f64 {
            0.0
        } else {
            match self.algorithm {
                Algorithm::AdaBoost => lemma1_beta(k, epsilon),
                // A perfect tree leaves the logit objective decreasing
                // without bound; take the capped AdaBoost step instead.
                Algorithm::LogitBoost if epsilon < EPSILON_FLOOR => lemma1_beta(k, epsilon),
                Algorithm::LogitBoost => {
                    line_search_beta(|b| self.logit_objective(&phi, b), self.cfg.line_search_tol)
                        .map_err(|e| Error::RoundAborted {
                            round,
                            reason: format!("line search failed: {e}"),
                        })?
                }
            }
        };
        let skipped = !(beta > 0.0);
        if !skipped {
            let code = self.ensemble.code().clone();
            for (i, &c) in phi.iter().enumerate() {
                let s = &mut self.margins[i * k..(i + 1) * k];
                for (t, st) in s.iter_mut().enumerate() {
                    *st += beta * code.gram(c, t);
                }
            }
            match self.algorithm {
                Algorithm::AdaBoost => {
                    for (i, &c) in phi.iter().enumerate() {
                        let row = self.weights.row_mut(i);
                        for (t, a) in row.iter_mut().enumerate() {
                            *a *= (beta * code.gram(c, t)).exp();
                        }
                    }
                    self.weights.normalize();
                }
                Algorithm::LogitBoost => self.reset_weights(),
            }
            self.ensemble.push(beta, tree)?;
        }
        let info = RoundInfo {
            round,
            epsilon,
            beta: if skipped { 0.0 } else { beta },
            skipped,
            train_risk: self.train_risk(),
        };
        debug!(
            "{} round {round}: eps={epsilon:.6} beta={:.6} risk={:.6}",
            self.algorithm, info.beta, info.train_risk
        );
        self.last_classes = phi;
        self.history.push(info);
        Ok(info)
    }

    /// Runs the remaining configured rounds.
    pub fn run(&mut self) -> Result<()> {
        while self.history.len() < self.cfg.rounds {
            self.step()?;
        }
        Ok(())
    }
}

/// Fits `algorithm` to `data` for `cfg.rounds` rounds.
pub fn fit(algorithm: Algorithm, data: &Dataset, cost: &CostMatrix, cfg: &BoostConfig) -> Result<Ensemble> {
    if cost.k() != data.k() {
        return Err(invalid(format!(
            "cost matrix has K = {}, data has K = {}",
            cost.k(),
            data.k()
        )));
    }
    let mut b = Booster::new(algorithm, data.x(), data.labels(), cost, *cfg)?;
    b.run()?;
    Ok(b.into_ensemble())
}

pub fn adaboost_fit(data: &Dataset, cost: &CostMatrix, cfg: &BoostConfig) -> Result<Ensemble> {
    fit(Algorithm::AdaBoost, data, cost, cfg)
}

pub fn logitboost_fit(data: &Dataset, cost: &CostMatrix, cfg: &BoostConfig) -> Result<Ensemble> {
    fit(Algorithm::LogitBoost, data, cost, cfg)
}

/// Index of the largest training margin for each row.
pub(crate) fn predict_from_margins(margins: &[f64], k: usize) -> Vec<usize> {
    margins.chunks_exact(k).map(|s| argmax(s.iter().copied())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_four_class, substream};
    use crate::simplex::dot;
    use rand::Rng;

    fn r_of_beta(k: usize, eps: f64) -> impl Fn(f64) -> f64 {
        let cos = 1.0 / (1.0 - k as f64);
        move |b: f64| (b * cos).exp() + ((b).exp() - (b * cos).exp()) * eps
    }

    fn clusters(k: usize, per: usize) -> Dataset {
        let mut rng = substream(3, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in 0..k {
            for _ in 0..per {
                x.push(10.0 * c as f64 + rng.random::<f64>());
                x.push(rng.random::<f64>());
                y.push(c);
            }
        }
        Dataset::from_parts(Matrix::new(k * per, 2, x).unwrap(), y, k).unwrap()
    }

    fn train_cost(e: &Ensemble, d: &Dataset, c: &CostMatrix) -> f64 {
        let p = e.predict_all(d.x()).unwrap();
        p.iter().zip(d.labels()).map(|(&p, &y)| c.get(y, p)).sum::<f64>() / d.n() as f64
    }

    #[test]
    fn lemma1_examples() {
        assert!(lemma1_beta(3, 1.0 / 3.0).abs() < 1e-15);
        assert!(lemma1_beta(5, 0.2).abs() < 1e-15);
        let b = lemma1_beta(3, 0.1);
        assert!((b - (2.0 / 3.0) * (9f64.ln() - 2f64.ln())).abs() < 1e-15);
        // Exact value 1.0027183, quoted elsewhere as 1.00273.
        assert!((b - 1.00273).abs() < 1.5e-5, "{b}");
        assert!(lemma1_beta(3, 0.0).is_finite());
        assert_eq!(lemma1_beta(3, 0.0), lemma1_beta(3, EPSILON_FLOOR));
    }

    #[test]
    fn line_search_examples() {
        let b = line_search_beta(|b| (b - 2.0) * (b - 2.0), 1e-8).unwrap();
        assert!((b - 2.0).abs() < 1e-7, "{b}");
        let b = line_search_beta(|b| (b + 3.5) * (b + 3.5), 1e-8).unwrap();
        assert!((b + 3.5).abs() < 1e-7, "{b}");
        let b = line_search_beta(|b| b * b, 1e-8).unwrap();
        assert!(b.abs() < 1e-7);
        let b = line_search_beta(r_of_beta(3, 0.1), 1e-10).unwrap();
        assert!((b - lemma1_beta(3, 0.1)).abs() < 1e-6, "{b}");
        assert!(matches!(
            line_search_beta(|b| -b, 1e-8),
            Err(Error::NonConvergence(_))
        ));
        assert!(line_search_beta(|b| b, 1e-8).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(BoostConfig { rounds: 0, ..Default::default() }.validate().is_err());
        assert!(BoostConfig { max_leaves: 1, ..Default::default() }.validate().is_err());
        assert!(BoostConfig::default().validate().is_ok());
    }

    #[test]
    fn empty_and_single_member_ensembles() {
        let mut e = Ensemble::new(3, Algorithm::AdaBoost, 2).unwrap();
        assert_eq!(e.f(&[0.3, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(e.predict(&[0.3, 1.0]).unwrap(), 0);
        e.push(1.0, Tree::constant(1, 2, 3).unwrap()).unwrap();
        assert_eq!(e.f(&[0.0, 0.0]).unwrap(), e.code().vertex(1));
        assert_eq!(e.predict(&[5.0, 5.0]).unwrap(), 1);
        assert!(e.f(&[0.0]).is_err());
        assert!(e.push(1.0, Tree::constant(1, 3, 3).unwrap()).is_err());
    }

    #[test]
    fn separable_clusters_reach_zero_cost() {
        let d = clusters(2, 20);
        let c = CostMatrix::zero_one(2).unwrap();
        for (alg, rounds) in [(Algorithm::AdaBoost, 10), (Algorithm::LogitBoost, 15)] {
            let cfg = BoostConfig { rounds, ..Default::default() };
            let e = fit(alg, &d, &c, &cfg).unwrap();
            assert_eq!(train_cost(&e, &d, &c), 0.0, "{alg}");
        }
    }

    #[test]
    fn first_round_trees_agree() {
        let d = gen_four_class(120, 2).unwrap();
        let c = CostMatrix::zero_one(4).unwrap();
        let cfg = BoostConfig { rounds: 1, ..Default::default() };
        let a = fit(Algorithm::AdaBoost, &d, &c, &cfg).unwrap();
        let l = fit(Algorithm::LogitBoost, &d, &c, &cfg).unwrap();
        assert_eq!(a.members()[0].tree, l.members()[0].tree);
    }

    #[test]
    fn weight_identities_hold() {
        let d = gen_four_class(150, 4).unwrap();
        let cost = CostMatrix::from_rows(&[
            [0.0, 1.0, 2.0, 2.0],
            [1.0, 0.0, 2.0, 2.0],
            [0.5, 0.5, 0.0, 1.0],
            [0.5, 0.5, 1.0, 0.0],
        ])
        .unwrap();
        for alg in [Algorithm::AdaBoost, Algorithm::LogitBoost] {
            let cfg = BoostConfig { rounds: 30, ..Default::default() };
            let mut b = Booster::new(alg, d.x(), d.labels(), &cost, cfg).unwrap();
            for _ in 0..30 {
                b.step().unwrap();
                let e = b.ensemble();
                let mut fresh = Vec::new();
                for i in 0..d.n() {
                    let f = e.f(d.x().row(i)).unwrap();
                    for t in 0..4 {
                        let s = dot(&f, e.code().vertex(t));
                        assert!((s - b.margins()[i * 4 + t]).abs() < 1e-10);
                        let c = cost.get(d.labels()[i], t);
                        fresh.push(match alg {
                            Algorithm::AdaBoost => c * s.exp(),
                            Algorithm::LogitBoost => c * s.exp() / (1.0 + s.exp()),
                        });
                    }
                }
                let z: f64 = fresh.iter().sum();
                for (a, f) in b.weights().values().iter().zip(&fresh) {
                    assert!((a - f / z).abs() < 1e-8, "{alg}");
                }
            }
        }
    }

    #[test]
    fn training_risk_is_monotone_and_steps_positive() {
        let d = gen_four_class(200, 8).unwrap();
        let cost = CostMatrix::zero_one(4).unwrap();
        for alg in [Algorithm::AdaBoost, Algorithm::LogitBoost] {
            let cfg = BoostConfig { rounds: 60, ..Default::default() };
            let mut b = Booster::new(alg, d.x(), d.labels(), &cost, cfg).unwrap();
            let mut prev = b.train_risk();
            for _ in 0..60 {
                let info = b.step().unwrap();
                assert!(info.epsilon <= 0.25 + 1e-12);
                if info.epsilon < 0.25 - 1e-9 {
                    assert!(info.beta > 0.0);
                    assert!(info.train_risk < prev, "{alg} round {}", info.round);
                }
                assert!(info.train_risk <= prev + 1e-10);
                prev = info.train_risk;
            }
        }
    }

    #[test]
    fn logit_beta_is_stationary() {
        let d = gen_four_class(20, 21).unwrap();
        let cost = CostMatrix::zero_one(4).unwrap();
        let cfg = BoostConfig { rounds: 3, ..Default::default() };
        let mut b = Booster::new(Algorithm::LogitBoost, d.x(), d.labels(), &cost, cfg).unwrap();
        b.step().unwrap();
        b.step().unwrap();
        let before = b.margins().to_vec();
        let tree = crate::tree::fit_tree(d.x(), b.weights(), 4).unwrap();
        let phi: Vec<usize> = (0..d.n()).map(|i| tree.predict(d.x().row(i))).collect();
        let beta = line_search_beta(|x| b.logit_objective(&phi, x), 1e-8).unwrap();
        let grid_best = (0..=40_000)
            .map(|i| i as f64 * 1e-4)
            .map(|x| (x, b.logit_objective(&phi, x)))
            .fold((0.0, f64::INFINITY), |a, v| if v.1 < a.1 { v } else { a });
        assert!((beta - grid_best.0).abs() < 2e-4, "{beta} vs {grid_best:?}");
        let h = 1e-5;
        let deriv = (b.logit_objective(&phi, beta + h) - b.logit_objective(&phi, beta - h)) / (2.0 * h);
        assert!(deriv.abs() < 1e-6, "{deriv}");
        assert_eq!(b.margins(), &before[..]);
    }

    #[test]
    fn permuting_classes_permutes_predictions() {
        let d = gen_four_class(150, 5).unwrap();
        let cost = CostMatrix::from_rows(&[
            [0.0, 1.0, 2.0, 2.0],
            [1.0, 0.0, 2.0, 2.0],
            [0.5, 0.5, 0.0, 1.0],
            [0.5, 0.5, 1.0, 0.0],
        ])
        .unwrap();
        // New class `a` is old class `order[a]`.
        let order = [2usize, 0, 3, 1];
        let mut inverse = [0usize; 4];
        for (a, &o) in order.iter().enumerate() {
            inverse[o] = a;
        }
        let labels: Vec<usize> = d.labels().iter().map(|&y| inverse[y]).collect();
        let pd = Dataset::from_parts(d.x().clone(), labels, 4).unwrap();
        let pc = cost.permuted(&order).unwrap();
        for alg in [Algorithm::AdaBoost, Algorithm::LogitBoost] {
            let cfg = BoostConfig { rounds: 20, ..Default::default() };
            let e = fit(alg, &d, &cost, &cfg).unwrap();
            let pe = fit(alg, &pd, &pc, &cfg).unwrap();
            let test = gen_four_class(300, 6).unwrap();
            for i in 0..test.n() {
                let x = test.x().row(i);
                assert_eq!(pe.predict(x).unwrap(), inverse[e.predict(x).unwrap()], "{alg}");
            }
        }
    }

    #[test]
    fn partial_sums_match_training_margins() {
        let d = gen_four_class(80, 9).unwrap();
        let c = CostMatrix::zero_one(4).unwrap();
        let cfg = BoostConfig { rounds: 10, ..Default::default() };
        let mut b = Booster::new(Algorithm::AdaBoost, d.x(), d.labels(), &c, cfg).unwrap();
        b.run().unwrap();
        let from_margins = predict_from_margins(b.margins(), 4);
        let e = b.ensemble();
        assert_eq!(e.predict_all(d.x()).unwrap(), from_margins);
        assert!(e.truncated(3).members().len() == 3.min(e.members().len()));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let d = gen_four_class(100, 10).unwrap();
        let c = CostMatrix::zero_one(4).unwrap();
        let cfg = BoostConfig { rounds: 15, ..Default::default() };
        let e = fit(Algorithm::LogitBoost, &d, &c, &cfg).unwrap();
        let back = Ensemble::parse(&e.to_string()).unwrap();
        assert_eq!(back, e);
        for i in 0..d.n() {
            let x = d.x().row(i);
            assert_eq!(back.f(x).unwrap(), e.f(x).unwrap());
        }
        assert!(Ensemble::parse("nonsense").is_err());
        let truncated: String = e.to_string().lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(Ensemble::parse(&truncated).is_err());
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let d = gen_four_class(30, 1).unwrap();
        let c3 = CostMatrix::zero_one(3).unwrap();
        assert!(fit(Algorithm::AdaBoost, &d, &c3, &BoostConfig::default()).is_err());
        let c4 = CostMatrix::zero_one(4).unwrap();
        let cfg = BoostConfig { rounds: 0, ..Default::default() };
        assert!(fit(Algorithm::AdaBoost, &d, &c4, &cfg).is_err());
    }
}
