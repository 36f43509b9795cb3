use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anglecs::boost::{fit, BoostConfig};
use anglecs::data::{load_csv, standardize, Schema, Table};
use anglecs::eval::BUILTIN_COSTS;
use anglecs::{
    builtin_cost, check_fisher_consistency, expected_costs_from_f, plug_in_probabilities,
    run_experiment, test_cost, CostMatrix, DataSource, ExperimentSpec, SimplexCode,
};
use anyhow::{bail, Context, Result};
use log::info;

use crate::args::{ConsistencyArgs, CsvArgs, PredictArgs, SimulateArgs, TrainArgs};
use crate::model::{Model, Preprocessing};
use crate::UsageError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A builtin cost matrix by name, or one read from a CSV file.
fn resolve_cost(spec: &str, k: usize) -> Result<CostMatrix> {
    if BUILTIN_COSTS.contains(&spec) {
        return builtin_cost(spec, k).map_err(|e| UsageError(e.to_string()).into());
    }
    let path = Path::new(spec);
    if !path.is_file() {
        return Err(UsageError(format!(
            "--cost `{spec}` is neither a builtin ({}) nor an existing file",
            BUILTIN_COSTS.join(", ")
        ))
        .into());
    }
    let file = File::open(path).with_context(|| format!("cannot open {spec}"))?;
    let cost = CostMatrix::from_csv_reader(file).with_context(|| format!("in cost file {spec}"))?;
    if cost.k() != k {
        bail!("cost file {spec} is {0} x {0} but the data has {k} classes", cost.k());
    }
    Ok(cost)
}

fn schema(csv: &CsvArgs) -> Schema {
    Schema::categorical(&csv.categorical)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn provenance(command: &str, flags: &[(&str, String)]) -> String {
    let mut s = format!("anglecs {VERSION} {command}");
    for (name, value) in flags {
        s.push_str(&format!(" --{name} {value}"));
    }
    s
}

pub fn simulate(a: &SimulateArgs) -> Result<ExitCode> {
    let mut flags = Vec::new();
    let source = match (&a.generator, &a.data) {
        (Some(g), _) => {
            flags.push(("gen", g.to_string()));
            flags.push(("n-train", a.n_train.to_string()));
            flags.push(("n-test", a.n_test.to_string()));
            DataSource::Generator {
                generator: *g,
                n_train: a.n_train as usize,
                n_test: a.n_test as usize,
            }
        }
        (None, Some(path)) => {
            if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
                return Err(UsageError("--train-fraction must be in (0, 1)".into()).into());
            }
            let (data, _) = load_csv(path, &a.csv.label, &schema(&a.csv))
                .with_context(|| format!("cannot load {}", path.display()))?;
            flags.push(("data", path.display().to_string()));
            flags.push(("label", a.csv.label.clone()));
            flags.push(("categorical", a.csv.categorical.join(",")));
            flags.push(("train-fraction", a.train_fraction.to_string()));
            DataSource::Split {
                data: Arc::new(data),
                train_fraction: a.train_fraction,
            }
        }
        (None, None) => return Err(UsageError("one of --gen or --data is required".into()).into()),
    };
    let cost = resolve_cost(&a.cost, source.k())?;
    let spec = ExperimentSpec {
        source,
        algorithm: a.algorithm,
        cost,
        rounds: a.rounds as usize,
        replications: a.reps as usize,
        seed: a.seed,
        max_leaves: a.max_leaves as usize,
    };
    flags.extend([
        ("algo", a.algorithm.to_string()),
        ("cost", a.cost.clone()),
        ("rounds", a.rounds.to_string()),
        ("reps", a.reps.to_string()),
        ("seed", a.seed.to_string()),
        ("max-leaves", a.max_leaves.to_string()),
    ]);
    let comment = provenance("simulate", &flags);

    let curve = run_experiment(&spec)?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let mut w = create(&a.out.join("curves.csv"))?;
    curve.write_curves(&mut w, Some(&comment))?;
    w.flush()?;
    let mut w = create(&a.out.join("summary.csv"))?;
    curve.write_summary(&mut w, Some(&comment))?;
    w.flush()?;

    println!(
        "final test cost {:.4} (se {:.4}) over {} replications",
        curve.final_mean(),
        curve.final_se(),
        curve.replications().len()
    );
    for f in curve.failures() {
        eprintln!("replication {} failed: {}", f.replication + 1, f.message);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn train(a: &TrainArgs) -> Result<ExitCode> {
    let (data, encoding) = load_csv(&a.data, &a.csv.label, &schema(&a.csv))
        .with_context(|| format!("cannot load {}", a.data.display()))?;
    let (data, standardizer) = if a.no_standardize {
        (data, None)
    } else {
        let (d, _, st) = standardize(&data, &[])?;
        for &j in &st.constant {
            log::warn!("column `{}` is constant and left unscaled", d.feature_names()[j]);
        }
        (d, Some(st))
    };
    let cost = resolve_cost(&a.cost, data.k())?;
    let cfg = BoostConfig {
        rounds: a.rounds as usize,
        max_leaves: a.max_leaves as usize,
        ..Default::default()
    };
    let ensemble = fit(a.algorithm, &data, &cost, &cfg)?;
    let pred = ensemble.predict_all(data.x())?;
    info!(
        "{} members, training cost {:.4}",
        ensemble.members().len(),
        test_cost(&cost, &pred, data.labels())?
    );
    let model = Model {
        ensemble,
        prep: Preprocessing {
            encoding,
            standardizer,
            cost: (0..cost.k()).map(|j| cost.row(j).to_vec()).collect(),
        },
    };
    let mut w = create(&a.model)?;
    w.write_all(model.to_text()?.as_bytes())?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

/// Expected costs and probabilities are plug-in estimates: the recovery
/// identities for the population minimizer applied to the fitted `f`.
/// Probabilities are clipped at zero and renormalised; expected costs are
/// reported as computed.
pub fn predict(a: &PredictArgs) -> Result<ExitCode> {
    let model = Model::load(&a.model)?;
    let table = Table::open(&a.data).with_context(|| format!("cannot load {}", a.data.display()))?;
    let x = model
        .prep
        .encoding
        .features(&table)
        .with_context(|| format!("{} does not match the model", a.data.display()))?;
    let x = match &model.prep.standardizer {
        Some(st) => st.apply_matrix(&x)?,
        None => x,
    };
    let cost = model.cost()?;
    let ens = &model.ensemble;
    let loss = ens.algorithm().loss();
    let code: &SimplexCode = ens.code();
    let names = &model.prep.encoding.label_names;

    let mut w = create(&a.out)?;
    writeln!(
        w,
        "# {}",
        provenance(
            "predict",
            &[
                ("model", a.model.display().to_string()),
                ("data", a.data.display().to_string()),
            ]
        )
    )?;
    let mut header = vec!["row".to_string(), "predicted".to_string()];
    header.extend(names.iter().map(|n| format!("cost_{n}")));
    header.extend(names.iter().map(|n| format!("prob_{n}")));
    writeln!(w, "{}", header.join(","))?;
    for i in 0..x.rows() {
        let f = ens.f(x.row(i))?;
        let class = code.predict(&f)?;
        let mut row = vec![(i + 1).to_string(), names[class].clone()];
        let ec = expected_costs_from_f(code, &cost, &loss, &f)?;
        row.extend(ec.values.iter().map(|v| v.to_string()));
        match plug_in_probabilities(code, &cost, &loss, &f) {
            Ok(p) => row.extend(p.as_slice().iter().map(|v| v.to_string())),
            Err(_) => row.extend(std::iter::repeat_n(String::new(), code.k())),
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

pub fn consistency_check(a: &ConsistencyArgs) -> Result<ExitCode> {
    let k = a.k as usize;
    let loss = a.margin_loss().map_err(|e| UsageError(e.to_string()))?;
    let cost = resolve_cost(&a.cost, k)?;
    let code = SimplexCode::new(k)?;
    let report = check_fisher_consistency(&code, &cost, &loss, a.trials as usize, a.seed)?;

    let mut w = create(&a.out)?;
    let comment = provenance(
        "consistency-check",
        &[
            ("loss", loss.to_string()),
            ("k", a.k.to_string()),
            ("cost", a.cost.clone()),
            ("trials", a.trials.to_string()),
            ("seed", a.seed.to_string()),
        ],
    );
    writeln!(w, "# {comment}")?;
    let mut header = vec!["trial".to_string()];
    header.extend((1..=k).map(|j| format!("p{j}")));
    header.extend(["bayes_class", "predicted_class", "pass"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for t in &report.trials {
        let mut row = vec![(t.trial + 1).to_string()];
        row.extend(t.p.iter().map(|v| v.to_string()));
        row.push((t.bayes_class + 1).to_string());
        row.push((t.predicted_class + 1).to_string());
        row.push(u8::from(t.pass).to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;

    let failed = report.failures().count();
    println!(
        "pass rate {:.4} ({} of {} trials failed)",
        report.pass_rate,
        failed,
        report.trials.len()
    );
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
