//! Test cost, built-in cost matrices and the replication harness.

use std::io::Write;
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;

use crate::boost::{predict_from_margins, Algorithm, BoostConfig, Booster};
use crate::cost::CostMatrix;
use crate::data::{standardize, stratified_split, substream, Dataset, Generator};
use crate::error::{invalid, Error, Result};

/// Mean cost `C[y_i][pred_i]` over a sample.
pub fn test_cost(cost: &CostMatrix, predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(invalid(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(invalid("test cost of an empty sample"));
    }
    let k = cost.k();
    let mut total = 0.0;
    for (&p, &y) in predictions.iter().zip(labels) {
        if p >= k || y >= k {
            return Err(invalid(format!("class index out of range for K = {k}")));
        }
        total += cost.get(y, p);
    }
    Ok(total / labels.len() as f64)
}

/// Costs of the three-class waveform experiment.
pub fn sim1_cost() -> CostMatrix {
    CostMatrix::from_rows(&[[0.0, 2.0, 2.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).unwrap()
}

/// Costs of the four-class Gaussian experiment.
pub fn sim2_cost() -> CostMatrix {
    CostMatrix::from_rows(&[
        [0.0, 1.0, 2.0, 2.0],
        [1.0, 0.0, 2.0, 2.0],
        [0.5, 0.5, 0.0, 1.0],
        [0.5, 0.5, 1.0, 0.0],
    ])
    .unwrap()
}

/// `C[j][k] = |j - k|`.
pub fn linear_cost(k: usize) -> Result<CostMatrix> {
    CostMatrix::from_fn(k, |j, t| j.abs_diff(t) as f64)
}

/// `C[j][k] = k - j` for `k >= j` and `10 (j - k)` otherwise, so
/// predicting a class below the truth costs ten times more.
pub fn partitioned_linear_cost(k: usize) -> Result<CostMatrix> {
    CostMatrix::from_fn(k, |j, t| {
        if t >= j {
            (t - j) as f64
        } else {
            10.0 * (j - t) as f64
        }
    })
}

/// Names accepted by [`builtin_cost`].
pub const BUILTIN_COSTS: [&str; 5] = ["zero_one", "sim1", "sim2", "linear", "partitioned_linear"];

/// A named cost matrix for `k` classes.
pub fn builtin_cost(name: &str, k: usize) -> Result<CostMatrix> {
    let fixed = |c: CostMatrix| {
        if c.k() == k {
            Ok(c)
        } else {
            Err(invalid(format!(
                "cost matrix `{name}` has K = {}, requested K = {k}",
                c.k()
            )))
        }
    };
    match name {
        "zero_one" | "0-1" => CostMatrix::zero_one(k),
        "sim1" => fixed(sim1_cost()),
        "sim2" => fixed(sim2_cost()),
        "linear" => linear_cost(k),
        "partitioned_linear" | "partitioned-linear" => partitioned_linear_cost(k),
        other => Err(invalid(format!(
            "unknown cost matrix `{other}` (expected one of {})",
            BUILTIN_COSTS.join(", ")
        ))),
    }
}

/// Where each replication gets its data.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Fresh train and test samples per replication.
    Generator {
        generator: Generator,
        n_train: usize,
        n_test: usize,
    },
    /// A stratified train/test split of a fixed dataset per replication,
    /// standardized with training statistics.
    Split {
        data: Arc<Dataset>,
        train_fraction: f64,
    },
}

impl DataSource {
    pub fn k(&self) -> usize {
        match self {
            DataSource::Generator { generator, .. } => generator.k(),
            DataSource::Split { data, .. } => data.k(),
        }
    }

    /// Train and test sets for replication `r`.
    pub fn draw(&self, seed: u64, r: usize) -> Result<(Dataset, Dataset)> {
        let mut rng = substream(seed, r as u64);
        match self {
            DataSource::Generator {
                generator,
                n_train,
                n_test,
            } => Ok((
                generator.sample(*n_train, &mut rng)?,
                generator.sample(*n_test, &mut rng)?,
            )),
            DataSource::Split {
                data,
                train_fraction,
            } => {
                let (tr, te) = stratified_split(data.labels(), data.k(), *train_fraction, &mut rng)?;
                if tr.is_empty() || te.is_empty() {
                    return Err(invalid("split left the train or test set empty"));
                }
                let (train, mut others, _) = standardize(&data.subset(&tr), &[data.subset(&te)])?;
                Ok((train, others.remove(0)))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub algorithm: Algorithm,
    pub cost: CostMatrix,
    pub rounds: usize,
    pub replications: usize,
    pub seed: u64,
    pub max_leaves: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications must be >= 1"));
        }
        if self.cost.k() != self.source.k() {
            return Err(invalid(format!(
                "cost matrix has K = {}, data has K = {}",
                self.cost.k(),
                self.source.k()
            )));
        }
        self.boost_config().validate()
    }

    pub fn boost_config(&self) -> BoostConfig {
        BoostConfig {
            rounds: self.rounds,
            max_leaves: self.max_leaves,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub message: String,
}

/// Test cost after every round for each successful replication.
#[derive(Debug, Clone, PartialEq)]
pub struct CostCurve {
    rounds: usize,
    /// Indices of the successful replications, ascending.
    replications: Vec<usize>,
    /// `costs[r][m]` is the test cost after round `m + 1`.
    costs: Vec<Vec<f64>>,
    failures: Vec<ReplicationFailure>,
}

impl CostCurve {
    pub fn new(
        rounds: usize,
        results: Vec<(usize, Vec<f64>)>,
        failures: Vec<ReplicationFailure>,
    ) -> Result<Self> {
        if results.iter().any(|(_, c)| c.len() != rounds) {
            return Err(invalid("every replication needs one cost per round"));
        }
        let (replications, costs) = results.into_iter().unzip();
        Ok(Self {
            rounds,
            replications,
            costs,
            failures,
        })
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn replications(&self) -> &[usize] {
        &self.replications
    }

    pub fn costs(&self) -> &[Vec<f64>] {
        &self.costs
    }

    pub fn failures(&self) -> &[ReplicationFailure] {
        &self.failures
    }

    /// Mean test cost per round.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.costs.len() as f64;
        (0..self.rounds)
            .map(|m| self.costs.iter().map(|c| c[m]).sum::<f64>() / n)
            .collect()
    }

    /// Standard error per round: sample sd over replications divided by
    /// the square root of their number. Zero with a single replication.
    pub fn se(&self) -> Vec<f64> {
        let n = self.costs.len();
        let mean = self.mean();
        (0..self.rounds)
            .map(|m| {
                if n < 2 {
                    return 0.0;
                }
                let ss: f64 = self.costs.iter().map(|c| (c[m] - mean[m]).powi(2)).sum();
                (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
            })
            .collect()
    }

    pub fn final_mean(&self) -> f64 {
        self.mean().last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_se(&self) -> f64 {
        self.se().last().copied().unwrap_or(f64::NAN)
    }

    /// `replication,round,test_cost` rows, one-based replication and round.
    pub fn write_curves<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "replication,round,test_cost")?;
        for (r, costs) in self.replications.iter().zip(&self.costs) {
            for (m, c) in costs.iter().enumerate() {
                writeln!(w, "{},{},{}", r + 1, m + 1, c)?;
            }
        }
        Ok(())
    }

    /// `round,mean,se` rows. Failed replications are listed in comment
    /// lines after the optional header comment.
    pub fn write_summary<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        for f in &self.failures {
            writeln!(
                w,
                "# failed replication {}: {}",
                f.replication + 1,
                f.message.replace('\n', " ")
            )?;
        }
        writeln!(w, "round,mean,se")?;
        for (m, (mean, se)) in self.mean().iter().zip(self.se()).enumerate() {
            writeln!(w, "{},{},{}", m + 1, mean, se)?;
        }
        Ok(())
    }
}

/// Runs one replication and returns the test cost after every round.
///
/// Test-set margins are updated incrementally as members are added, so
/// each round costs one tree evaluation per test row.
pub fn run_replication(spec: &ExperimentSpec, r: usize) -> Result<Vec<f64>> {
    let (train, test) = spec.source.draw(spec.seed, r)?;
    let k = spec.cost.k();
    let mut booster = Booster::new(
        spec.algorithm,
        train.x(),
        train.labels(),
        &spec.cost,
        spec.boost_config(),
    )?;
    let code = booster.ensemble().code().clone();
    let mut margins = vec![0.0; test.n() * k];
    let mut current = test_cost(&spec.cost, &vec![0; test.n()], test.labels())?;
    let mut curve = Vec::with_capacity(spec.rounds);
    for _ in 0..spec.rounds {
        let info = booster.step()?;
        if !info.skipped {
            let member = booster.ensemble().members().last().expect("member was added");
            for i in 0..test.n() {
                let c = member.tree.predict(test.x().row(i));
                for (t, s) in margins[i * k..(i + 1) * k].iter_mut().enumerate() {
                    *s += member.beta * code.gram(c, t);
                }
            }
            let pred = predict_from_margins(&margins, k);
            current = test_cost(&spec.cost, &pred, test.labels())?;
        }
        curve.push(current);
    }
    Ok(curve)
}

/// Runs all replications in parallel on the current rayon pool.
///
/// Failed replications are excluded from the curve and listed in it.
/// Fails only when the spec is invalid or every replication failed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<CostCurve> {
    spec.validate()?;
    let outcomes: Vec<(usize, Result<Vec<f64>>)> = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let out = run_replication(spec, r);
            match &out {
                Ok(c) => info!(
                    "replication {}/{}: final test cost {:.4}",
                    r + 1,
                    spec.replications,
                    c.last().copied().unwrap_or(f64::NAN)
                ),
                Err(e) => warn!("replication {} failed: {e}", r + 1),
            }
            (r, out)
        })
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (r, out) in outcomes {
        match out {
            Ok(c) => results.push((r, c)),
            Err(e) => failures.push(ReplicationFailure {
                replication: r,
                message: e.to_string(),
            }),
        }
    }
    if results.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {} replications failed; first error: {}",
            spec.replications, failures[0].message
        )));
    }
    CostCurve::new(spec.rounds, results, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::fit;

    fn small_spec(algorithm: Algorithm, rounds: usize, reps: usize) -> ExperimentSpec {
        ExperimentSpec {
            source: DataSource::Generator {
                generator: Generator::FourClass,
                n_train: 120,
                n_test: 300,
            },
            algorithm,
            cost: sim2_cost(),
            rounds,
            replications: reps,
            seed: 17,
            max_leaves: 4,
        }
    }

    #[test]
    fn test_cost_examples() {
        let c = CostMatrix::zero_one(3).unwrap();
        assert_eq!(test_cost(&c, &[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(test_cost(&c, &[0, 1, 1, 2], &[0, 1, 2, 0]).unwrap(), 0.5);
        assert_eq!(test_cost(&sim1_cost(), &[1, 1, 0], &[0, 1, 2]).unwrap(), 1.0);
        assert!(test_cost(&c, &[0], &[0, 1]).is_err());
        assert!(test_cost(&c, &[], &[]).is_err());
    }

    #[test]
    fn builtin_matrices() {
        let l = builtin_cost("linear", 7).unwrap();
        assert_eq!(l.get(0, 6), 6.0);
        let p = builtin_cost("partitioned_linear", 7).unwrap();
        assert_eq!(p.get(6, 0), 60.0);
        assert_eq!(p.get(0, 6), 6.0);
        assert_eq!(builtin_cost("sim2", 4).unwrap().get(2, 0), 0.5);
        assert_eq!(builtin_cost("sim1", 3).unwrap(), sim1_cost());
        assert!(builtin_cost("sim1", 4).is_err());
        assert!(builtin_cost("nope", 3).is_err());
        assert!(builtin_cost("zero_one", 5).unwrap().is_zero_one());
    }

    #[test]
    fn minimal_run_has_one_value() {
        let curve = run_experiment(&small_spec(Algorithm::AdaBoost, 1, 1)).unwrap();
        assert_eq!(curve.costs().len(), 1);
        assert_eq!(curve.costs()[0].len(), 1);
        assert_eq!(curve.se(), vec![0.0]);
    }

    #[test]
    fn incremental_costs_match_refits() {
        let spec = small_spec(Algorithm::LogitBoost, 12, 1);
        let curve = run_replication(&spec, 0).unwrap();
        let (train, test) = spec.source.draw(spec.seed, 0).unwrap();
        for m in [1usize, 5, 12] {
            let cfg = BoostConfig { rounds: m, ..spec.boost_config() };
            let e = fit(spec.algorithm, &train, &spec.cost, &cfg).unwrap();
            let pred = e.predict_all(test.x()).unwrap();
            let tc = test_cost(&spec.cost, &pred, test.labels()).unwrap();
            assert_eq!(tc, curve[m - 1], "round {m}");
        }
    }

    #[test]
    fn summary_matches_independent_pass() {
        let curve = run_experiment(&small_spec(Algorithm::AdaBoost, 5, 6)).unwrap();
        assert_eq!(curve.replications(), &[0, 1, 2, 3, 4, 5]);
        let (mean, se) = (curve.mean(), curve.se());
        for m in 0..5 {
            let vals: Vec<f64> = curve.costs().iter().map(|c| c[m]).collect();
            let mu = vals.iter().sum::<f64>() / 6.0;
            let sd = (vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / 5.0).sqrt();
            assert!((mean[m] - mu).abs() < 1e-12);
            assert!((se[m] - sd / 6f64.sqrt()).abs() < 1e-12);
        }
        let mut out = Vec::new();
        curve.write_summary(&mut out, Some("flags")).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# flags\nround,mean,se\n1,"));
        let mut out = Vec::new();
        curve.write_curves(&mut out, None).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1 + 6 * 5);
    }

    #[test]
    fn runs_are_reproducible_and_order_independent() {
        let spec = small_spec(Algorithm::AdaBoost, 4, 3);
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(run_replication(&spec, 2).unwrap(), a.costs()[2]);
    }

    #[test]
    fn split_source_runs() {
        let data = crate::data::gen_four_class(200, 3).unwrap();
        let spec = ExperimentSpec {
            source: DataSource::Split {
                data: Arc::new(data),
                train_fraction: 0.5,
            },
            cost: linear_cost(4).unwrap(),
            ..small_spec(Algorithm::AdaBoost, 5, 2)
        };
        let curve = run_experiment(&spec).unwrap();
        assert_eq!(curve.costs().len(), 2);
        assert!(curve.costs().iter().flatten().all(|&c| c >= 0.0));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec(Algorithm::AdaBoost, 5, 0);
        assert!(run_experiment(&spec).is_err());
        spec.replications = 1;
        spec.cost = sim1_cost();
        assert!(run_experiment(&spec).is_err());
    }
}
