//! Command implementations behind the `kronkge` binary.
//!
//! Exit codes: 0 success, 1 invalid flags, 2 data or I/O errors, 3 numerical
//! failure (divergence or a failed gradient check).

pub mod args;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::json;

use kronkge::eval::{self, EvalOptions};
use kronkge::gradcheck::{self, GradCheckConfig};
use kronkge::report::{self, ReportRow};
use kronkge::trainer::{prepare_store, TrainLog};
use kronkge::{
    param_count_for, Checkpoint, DatasetPaths, Error, LossSpec, Split, TrainConfig, Trainer, TripleStore, Variant,
};

use args::*;
pub use args::{Cli, Command, SQUARE_GRID};

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => 1,
            Error::Diverged { .. } | Error::NonFinite(_) => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Preprocess(a) => cmd_preprocess(&a),
        Command::Train(a) => cmd_train(&a, false),
        Command::Noise(a) => cmd_train(&a, true),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Params(a) => cmd_params(&a),
    }
}

/// Directory holding the bundled benchmark splits. `KRONKGE_DATA` overrides
/// the location baked in at build time.
pub fn data_root() -> PathBuf {
    std::env::var_os("KRONKGE_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn dataset_paths(data: &DataArgs) -> CliResult<(String, DatasetPaths)> {
    match (&data.train, &data.valid, &data.test, data.dataset) {
        (Some(train), Some(valid), Some(test), _) => {
            let name = train
                .parent()
                .and_then(|p| p.file_name())
                .map_or_else(|| "custom".to_owned(), |n| n.to_string_lossy().into_owned());
            Ok((
                name,
                DatasetPaths {
                    train: train.clone(),
                    valid: valid.clone(),
                    test: test.clone(),
                },
            ))
        }
        (_, _, _, Some(d)) => Ok((d.name().to_owned(), DatasetPaths::in_dir(data_root().join(d.name())))),
        _ => Err(CliError::usage("give --dataset or all of --train, --valid and --test")),
    }
}

fn load(data: &DataArgs) -> CliResult<(String, TripleStore)> {
    let (name, paths) = dataset_paths(data)?;
    Ok((name, TripleStore::ingest(&paths)?))
}

fn write_outputs(out: &Path, rows: &[ReportRow]) -> CliResult {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.csv"), report::to_csv(rows)?)?;
    fs::write(out.join("report.md"), report::markdown(rows))?;
    Ok(())
}

fn write_run_json(
    out: &Path,
    command: &str,
    args: &impl Serialize,
    extra: serde_json::Value,
    start: Instant,
) -> CliResult {
    let record = json!({
        "command": command,
        "args": args,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_secs": start.elapsed().as_secs_f64(),
        "details": extra,
    });
    let text = serde_json::to_string_pretty(&record).map_err(|e| CliError::usage(e.to_string()))?;
    fs::create_dir_all(out)?;
    fs::write(out.join("run.json"), text + "\n")?;
    Ok(())
}

fn eval_options(e: &EvalArgs) -> EvalOptions {
    EvalOptions {
        tie: e.tie.into(),
        filtered: true,
    }
}

fn eval_splits(eval: &EvalArgs) -> Vec<Split> {
    let mut splits = Vec::new();
    if eval.eval_train {
        splits.push(Split::Train);
    }
    splits.extend([Split::Valid, Split::Test]);
    splits
}

fn loss_spec(kind: LossFlag, alpha: f64) -> CliResult<LossSpec> {
    let kind = kind.into();
    let alpha = if kind == kronkge::LossKind::Bce { 0.0 } else { alpha };
    LossSpec::new(kind, alpha).map_err(|e| CliError::usage(e.to_string()))
}

fn checked(config: TrainConfig) -> CliResult<TrainConfig> {
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(config)
}

/// Augmented store for `config`, with the filter policy from `eval`.
pub fn training_store(base: &TripleStore, config: &TrainConfig, eval: &EvalArgs) -> CliResult<TripleStore> {
    let mut store = prepare_store(base, config)?;
    if eval.exclude_noise_from_filter {
        store.set_filter_includes_noise(false);
    }
    Ok(store)
}

/// Report rows for a finished model on the requested splits.
pub fn evaluate_rows(
    dataset: &str,
    config: &TrainConfig,
    trainer: &Trainer,
    store: &TripleStore,
    eval: &EvalArgs,
) -> CliResult<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for split in eval_splits(eval) {
        if store.split(split).is_empty() {
            continue;
        }
        let r = eval::evaluate(&trainer.state, store, split, eval_options(eval))?;
        rows.push(ReportRow::from_eval(
            dataset,
            config.variant,
            config.dim,
            &config.loss,
            config.seed,
            config.noise_fraction,
            &r,
        ));
    }
    Ok(rows)
}

fn progress(log_every: usize, epochs: usize) -> impl FnMut(&kronkge::trainer::EpochLog) {
    let mut elapsed = 0.0;
    move |e| {
        elapsed += e.wall_secs;
        if log_every > 0 && (e.epoch % log_every == 0 || e.epoch == epochs) {
            let valid = e.valid_mrr.map(|m| format!(" valid MRR {m:.4}")).unwrap_or_default();
            eprintln!(
                "epoch {}/{epochs} loss {:.6}{valid} ({elapsed:.1}s)",
                e.epoch, e.mean_loss
            );
        }
    }
}

pub fn cmd_train(a: &TrainArgs, noise: bool) -> CliResult {
    let start = Instant::now();
    if noise && !(a.fraction > 0.0 && a.fraction < 1.0) {
        return Err(CliError::usage(format!(
            "--fraction must lie in (0, 1), got {}; use `train` for runs without noise",
            a.fraction
        )));
    }
    let config = checked(TrainConfig {
        variant: a.model.into(),
        dim: a.dim,
        loss: loss_spec(a.loss, a.hyper.alpha)?,
        epochs: a.hyper.epochs,
        lr: a.hyper.lr,
        batch_size: a.hyper.batch,
        seed: a.hyper.seed,
        reciprocal: a.data.reciprocal,
        noise_fraction: a.fraction,
        eval_every: a.eval_every,
    })?;
    let (name, base) = load(&a.data)?;
    let store = training_store(&base, &config, &a.eval)?;

    let mut trainer = match &a.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            ckpt.expect_variant(config.variant)?;
            if &ckpt.vocab != store.vocab() {
                return Err(Error::VocabMismatch("checkpoint vocabulary differs from the dataset".into()).into());
            }
            let mut t = ckpt.into_trainer();
            t.config.epochs = config.epochs;
            t.config.eval_every = config.eval_every;
            t
        }
        None => Trainer::new(config.clone(), &store)?,
    };
    let log = trainer.run_with(&store, progress(a.log_every, config.epochs))?;
    let rows = evaluate_rows(&name, &trainer.config, &trainer, &store, &a.eval)?;

    write_outputs(&a.out, &rows)?;
    Checkpoint::from_trainer(&trainer, store.vocab()).save(&a.out.join("model.ckpt"))?;
    print!("{}", report::markdown(&rows));
    write_run_json(
        &a.out,
        if noise { "noise" } else { "train" },
        a,
        json!({
            "dataset": name,
            "num_entities": store.num_entities(),
            "num_relations": store.num_relations(),
            "train_triples": store.train().len(),
            "noise_triples": store.noise().len(),
            "param_count": trainer.state.param_count(),
            "epochs_completed": trainer.epoch,
            "epoch_losses": log.losses(),
            "train_secs": log.total_secs(),
        }),
        start,
    )
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> CliResult {
    let start = Instant::now();
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    if let Some(m) = a.model {
        ckpt.expect_variant(m.into())?;
    }
    let (name, base) = load(&a.data)?;
    let mut config = ckpt.config.clone();
    config.reciprocal |= a.data.reciprocal;
    let store = training_store(&base, &config, &a.eval)?;
    if &ckpt.vocab != store.vocab() {
        return Err(Error::VocabMismatch("checkpoint vocabulary differs from the dataset".into()).into());
    }
    let trainer = ckpt.into_trainer();
    let rows = evaluate_rows(&name, &config, &trainer, &store, &a.eval)?;
    write_outputs(&a.out, &rows)?;
    print!("{}", report::markdown(&rows));
    write_run_json(
        &a.out,
        "evaluate",
        a,
        json!({ "dataset": name, "epoch": trainer.epoch }),
        start,
    )
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> CliResult {
    let start = Instant::now();
    let (name, mut store) = load(&a.data)?;
    if a.data.reciprocal {
        store = store.add_reciprocals()?;
    }
    fs::create_dir_all(&a.out)?;
    store.write_cache(&a.out.join("store.kkge"))?;
    store.write_tsv(&DatasetPaths::in_dir(&a.out))?;
    println!(
        "{name}: |E|={} |R|={} train={} valid={} test={}",
        store.num_entities(),
        store.num_relations(),
        store.train().len(),
        store.valid().len(),
        store.test().len()
    );
    write_run_json(
        &a.out,
        "preprocess",
        a,
        json!({
            "dataset": name,
            "num_entities": store.num_entities(),
            "num_relations": store.num_relations(),
            "train": store.train().len(),
            "valid": store.valid().len(),
            "test": store.test().len(),
        }),
        start,
    )
}

/// One cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepJob {
    pub config: TrainConfig,
}

pub fn sweep_jobs(a: &SweepArgs) -> CliResult<Vec<SweepJob>> {
    let dims: Vec<usize> = if a.paper_grid {
        SQUARE_GRID.to_vec()
    } else {
        a.dims.clone()
    };
    if dims.is_empty() || a.models.is_empty() || a.losses.is_empty() || a.seeds.is_empty() {
        return Err(CliError::usage("sweep needs at least one model, dim, loss and seed"));
    }
    if a.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let mut jobs = Vec::new();
    for &model in &a.models {
        for &loss in &a.losses {
            for &seed in &a.seeds {
                for &dim in &dims {
                    jobs.push(SweepJob {
                        config: checked(TrainConfig {
                            variant: model.into(),
                            dim,
                            loss: loss_spec(loss, a.alpha)?,
                            epochs: a.epochs,
                            lr: a.lr,
                            batch_size: a.batch,
                            seed,
                            reciprocal: a.data.reciprocal,
                            noise_fraction: a.fraction,
                            eval_every: 0,
                        })?,
                    });
                }
            }
        }
    }
    Ok(jobs)
}

/// Runs `jobs` on up to `workers` threads; results come back in job order.
pub fn run_jobs<T: Send>(jobs: &[SweepJob], workers: usize, f: impl Fn(&SweepJob) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.unwrap()).collect()
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult {
    let start = Instant::now();
    let jobs = sweep_jobs(a)?;
    let (name, base) = load(&a.data)?;
    let total = jobs.len();
    let done = AtomicUsize::new(0);
    let outcomes = run_jobs(&jobs, a.jobs, |job| -> CliResult<(Vec<ReportRow>, TrainLog)> {
        let store = training_store(&base, &job.config, &a.eval)?;
        let mut trainer = Trainer::new(job.config.clone(), &store)?;
        let log = trainer.run(&store)?;
        let rows = evaluate_rows(&name, &job.config, &trainer, &store, &a.eval)?;
        let n = done.fetch_add(1, Ordering::SeqCst) + 1;
        let test = rows.iter().find(|r| r.split == "test").map_or(f64::NAN, |r| r.mrr);
        eprintln!(
            "[{n}/{total}] {} d={} {} seed={}: test MRR {test:.4} ({:.1}s)",
            job.config.variant,
            job.config.dim,
            job.config.loss,
            job.config.seed,
            log.total_secs()
        );
        Ok((rows, log))
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (job, outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok((r, _)) => rows.extend(r),
            Err(e) => {
                eprintln!(
                    "{} d={} {}: {}",
                    job.config.variant, job.config.dim, job.config.loss, e.message
                );
                failures.push(json!({
                    "model": job.config.variant,
                    "dim": job.config.dim,
                    "loss": job.config.loss.to_string(),
                    "seed": job.config.seed,
                    "error": e.message,
                }));
                first_error.get_or_insert(e);
            }
        }
    }
    let averages = report::group_averages(&rows);
    rows.extend(averages);
    if !rows.is_empty() {
        write_outputs(&a.out, &rows)?;
        print!("{}", report::markdown(&rows));
    }
    write_run_json(
        &a.out,
        "sweep",
        a,
        json!({ "dataset": name, "runs": total, "failures": failures }),
        start,
    )?;
    match first_error {
        Some(e) if failures.len() == total => Err(e),
        _ => Ok(()),
    }
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> CliResult {
    if a.dims.is_empty() || a.trials == 0 {
        return Err(CliError::usage("gradcheck needs at least one dim and one trial"));
    }
    let losses = gradcheck::losses(a.alpha).map_err(|e| CliError::usage(e.to_string()))?;
    let mut failed = 0;
    println!("| Model | Loss | d | Trials | Max rel. error | Result |");
    println!("|---|---|---:|---:|---:|---|");
    for variant in Variant::ALL {
        for loss in &losses {
            let mut worst: f64 = 0.0;
            for &dim in &a.dims {
                variant.stored_dims(dim).map_err(|e| CliError::usage(e.to_string()))?;
                let config = GradCheckConfig {
                    dim,
                    trials: a.trials,
                    seed: a.seed,
                    ..GradCheckConfig::default()
                };
                let r = gradcheck::check_with(variant, *loss, &config, |g| {
                    if a.flip_sign {
                        g.slices_mut().into_iter().flatten().for_each(|v| *v = -*v);
                    }
                })?;
                worst = worst.max(r.max_rel_error);
            }
            let pass = worst < gradcheck::REL_TOL;
            failed += usize::from(!pass);
            let dims: Vec<String> = a.dims.iter().map(|d| d.to_string()).collect();
            println!(
                "| {} | {loss} | {} | {} | {worst:.3e} | {} |",
                variant.display_name(),
                dims.join(","),
                a.trials,
                if pass { "pass" } else { "FAIL" }
            );
        }
    }
    if failed > 0 {
        return Err(CliError {
            code: 3,
            message: format!("{failed} of {} gradient checks failed", 3 * losses.len()),
        });
    }
    Ok(())
}

pub fn cmd_report(a: &ReportArgs) -> CliResult {
    let mut rows = Vec::new();
    for path in &a.inputs {
        let file = fs::File::open(path)?;
        rows.extend(report::read_csv(file)?.into_iter().filter(|r| !r.is_average()));
    }
    let averages = report::group_averages(&rows);
    rows.extend(averages);
    match &a.out {
        Some(out) => write_outputs(out, &rows),
        None => {
            print!("{}", report::markdown(&rows));
            Ok(())
        }
    }
}

pub fn cmd_params(a: &ParamsArgs) -> CliResult {
    let (ne, nr) = match (a.entities, a.relations, a.dataset) {
        (Some(e), Some(r), _) => (e, if a.reciprocal { 2 * r } else { r }),
        (_, _, Some(d)) => {
            let mut store = TripleStore::ingest(&DatasetPaths::in_dir(data_root().join(d.name())))?;
            if a.reciprocal {
                store = store.add_reciprocals()?;
            }
            (store.num_entities(), store.num_relations())
        }
        _ => return Err(CliError::usage("give --dataset or both --entities and --relations")),
    };
    let dims: Vec<usize> = if a.paper_grid {
        SQUARE_GRID.to_vec()
    } else {
        a.dims.clone()
    };
    println!("|E|={ne} |R|={nr}");
    println!("| Model | d | |Θ| |");
    println!("|---|---:|---:|");
    for &m in &a.models {
        let variant: Variant = m.into();
        let mut counts = Vec::new();
        for &d in &dims {
            let n = param_count_for(variant, d, ne, nr).map_err(|e| CliError::usage(e.to_string()))?;
            counts.push(n);
            println!("| {} | {d} | {} |", variant.display_name(), report::thousands(n));
        }
        if counts.len() > 1 {
            println!(
                "| {} | avg. | {} |",
                variant.display_name(),
                report::thousands(report::average_params(&counts))
            );
        }
    }
    Ok(())
}
