//! Command implementations, the run.log logger, and the report/statistics
//! plumbing shared by train and sweep.

use crate::dataset::DatasetSpec;
use crate::{EvalCmd, SplitCmd, SweepCmd, TrainCmd};
use cgcl_core::data::{split_edges, DatasetSplit, RawDataset, SplitManifest};
use cgcl_core::graph::NodeId;
use cgcl_core::metrics::MetricsReport;
use cgcl_core::model::{load_checkpoint, save_checkpoint, CheckpointData, DecoderHead};
use cgcl_core::trainer::{score_pairs, train, view_diagnostics, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub enum CliError {
    /// Bad arguments or inputs; exit code 2.
    Usage(String),
    /// Failure during a run; exit code 3, partial artifacts are kept.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Runtime(m) => f.write_str(m),
        }
    }
}

pub fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Logger writing timestamped lines to `<out>/run.log` once attached;
/// warnings and errors are mirrored to stderr. Artifact files stay free of
/// wall-clock data so identical invocations produce identical bytes.
struct RunLogger {
    file: Mutex<Option<std::fs::File>>,
}

static LOGGER: RunLogger = RunLogger {
    file: Mutex::new(None),
};

impl log::Log for RunLogger {
    fn enabled(&self, _: &log::Metadata) -> bool {
        true
    }

    fn log(&self, record: &log::Record) {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default();
        let line = format!(
            "[{}.{:03}] {} {}\n",
            now.as_secs(),
            now.subsec_millis(),
            record.level(),
            record.args()
        );
        if record.level() <= log::Level::Warn {
            eprint!("{line}");
        }
        if let Some(file) = self.file.lock().unwrap().as_mut() {
            let _ = file.write_all(line.as_bytes());
        }
    }

    fn flush(&self) {}
}

pub fn init_logger() {
    let _ = log::set_logger(&LOGGER);
    log::set_max_level(log::LevelFilter::Info);
}

fn attach_run_log(out: &Path) {
    match std::fs::File::options()
        .create(true)
        .append(true)
        .open(out.join("run.log"))
    {
        Ok(file) => *LOGGER.file.lock().unwrap() = Some(file),
        Err(e) => eprintln!("warning: cannot open run.log: {e}"),
    }
}

fn worker_threads() -> usize {
    std::env::var("CGCL_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

/// Run `f(0..count)` on up to `threads` workers, returning results in index
/// order. Each task owns its RNG, so outputs do not depend on scheduling.
fn run_pool<T: Send>(
    count: u64,
    threads: usize,
    f: impl Fn(u64) -> Result<T, CliError> + Sync,
) -> Vec<Result<T, CliError>> {
    let threads = threads.min(count.max(1) as usize);
    if threads <= 1 {
        return (0..count).map(f).collect();
    }
    let results = Mutex::new((0..count).map(|_| None).collect::<Vec<_>>());
    let next = AtomicU64::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let result = f(i);
                results.lock().unwrap()[i as usize] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker finished"))
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0.0 for fewer than two values (reports must
/// stay JSON-serializable, which NaN is not).
fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

#[derive(Debug, Serialize)]
struct ConfigEcho {
    dataset: String,
    test_frac: f64,
    val_frac: f64,
    seed: u64,
    repeat: u64,
    epochs: usize,
    lr: f64,
    hidden_dim: usize,
    head: DecoderHead,
    one_view: bool,
    raw_adjacency: bool,
    select_by_val: bool,
}

#[derive(Debug, Serialize)]
struct RepeatOutcome {
    seed: u64,
    auc: f64,
    ap: f64,
    best_epoch: usize,
}

#[derive(Debug, Serialize)]
struct RunReport {
    config: ConfigEcho,
    repeats: Vec<RepeatOutcome>,
    auc_mean: f64,
    auc_std: f64,
    ap_mean: f64,
    ap_std: f64,
}

pub fn cmd_split(cmd: SplitCmd) -> Result<(), CliError> {
    let spec = DatasetSpec::from_args(&cmd.data)?;
    let data = spec.load(cmd.split.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cmd.split.seed);
    let split =
        split_edges(&data, cmd.split.val_frac, cmd.split.test_frac, &mut rng).map_err(usage)?;
    std::fs::create_dir_all(&cmd.out).map_err(usage)?;
    attach_run_log(&cmd.out);
    let manifest = SplitManifest::new(&split, cmd.split.seed);
    let path = cmd.out.join("manifest.json");
    manifest.save(&path).map_err(usage)?;
    log::info!(
        "split {} (seed {}) -> {}",
        spec.describe(),
        cmd.split.seed,
        path.display()
    );
    println!("num_nodes {}", split.num_nodes);
    println!("train_edges {}", split.train_edges.len());
    println!("val_pos {}", split.val_pos.len());
    println!("val_neg {}", split.val_neg.len());
    println!("test_pos {}", split.test_pos.len());
    println!("test_neg {}", split.test_neg.len());
    Ok(())
}

/// Either reuses a saved manifest (regenerating a synthetic dataset with
/// the manifest's seed) or samples a fresh split at the base seed.
fn load_or_make_split(
    spec: &DatasetSpec,
    manifest_path: Option<&Path>,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
) -> Result<(RawDataset, DatasetSplit, SplitManifest), CliError> {
    match manifest_path {
        Some(path) => {
            let manifest = SplitManifest::load(path).map_err(usage)?;
            let data = spec.load(manifest.seed)?;
            let split = manifest.to_split().map_err(usage)?;
            split.validate(Some(&data.edges)).map_err(usage)?;
            Ok((data, split, manifest))
        }
        None => {
            let data = spec.load(seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let split = split_edges(&data, val_frac, test_frac, &mut rng).map_err(usage)?;
            let manifest = SplitManifest::new(&split, seed);
            Ok((data, split, manifest))
        }
    }
}

/// Test-set metrics for one trained model, including the cross-view
/// consistency diagnostics drawn from the run's seed.
fn test_metrics(
    params: &cgcl_core::model::ModelParams,
    data: &RawDataset,
    split: &DatasetSplit,
    seed: u64,
    raw_adjacency: bool,
) -> Result<MetricsReport, CliError> {
    let pos = score_pairs(
        params,
        &data.features,
        &split.train_edges,
        split.test_pos.as_slice(),
        raw_adjacency,
    )
    .map_err(runtime)?;
    let neg = score_pairs(
        params,
        &data.features,
        &split.train_edges,
        split.test_neg.as_slice(),
        raw_adjacency,
    )
    .map_err(runtime)?;
    let mut report = MetricsReport::from_scores(&pos, &neg).map_err(runtime)?;
    let pairs: Vec<(NodeId, NodeId)> = split.test_pos.iter().chain(split.test_neg.iter()).collect();
    report.consistency = Some(
        view_diagnostics(
            params,
            &data.features,
            &split.train_edges,
            &pairs,
            seed,
            raw_adjacency,
        )
        .map_err(runtime)?,
    );
    Ok(report)
}

pub fn cmd_train(cmd: TrainCmd) -> Result<(), CliError> {
    let spec = DatasetSpec::from_args(&cmd.data)?;
    if cmd.repeat < 1 {
        return Err(usage("--repeat must be at least 1"));
    }
    let template = TrainConfig {
        epochs: cmd.model.epochs,
        lr: cmd.lr,
        hidden_dim: cmd.hidden,
        head: cmd.model.head,
        one_view_ablation: cmd.model.one_view,
        raw_adjacency: cmd.model.raw_adjacency,
        seed: cmd.split.seed,
        select_by_val: !cmd.model.no_val_select,
    };
    template.validate().map_err(usage)?;
    let (data, split, manifest) = load_or_make_split(
        &spec,
        cmd.manifest.as_deref(),
        cmd.split.val_frac,
        cmd.split.test_frac,
        cmd.split.seed,
    )?;
    if split.num_nodes != data.features.rows() {
        return Err(usage(format!(
            "split is over {} nodes but the dataset has {}",
            split.num_nodes,
            data.features.rows()
        )));
    }

    std::fs::create_dir_all(&cmd.out).map_err(runtime)?;
    attach_run_log(&cmd.out);
    manifest
        .save(&cmd.out.join("manifest.json"))
        .map_err(runtime)?;
    log::info!(
        "train {} x{} (base seed {}, {} threads)",
        spec.describe(),
        cmd.repeat,
        cmd.split.seed,
        worker_threads()
    );

    let started = Instant::now();
    let results = run_pool(cmd.repeat, worker_threads(), |i| {
        let config = TrainConfig {
            seed: cmd.split.seed + i,
            ..template
        };
        let t0 = Instant::now();
        let model = train(&split, &data.features, &config).map_err(runtime)?;
        let ckpt = CheckpointData {
            params: model.params.clone(),
            adam: model.adam.clone(),
            seed: config.seed,
        };
        save_checkpoint(&ckpt, &cmd.out.join(format!("checkpoint_{i:02}.json")))
            .map_err(runtime)?;
        model
            .log
            .save_csv(&cmd.out.join(format!("loss_{i:02}.csv")))
            .map_err(runtime)?;
        let report = test_metrics(
            &model.params,
            &data,
            &split,
            config.seed,
            config.raw_adjacency,
        )?;
        report
            .save(&cmd.out.join(format!("metrics_{i:02}.json")))
            .map_err(runtime)?;
        log::info!(
            "repeat {i} (seed {}): test auc {:.6}, ap {:.6}, best epoch {}, {} ms",
            config.seed,
            report.auc,
            report.ap,
            model.best_epoch,
            t0.elapsed().as_millis()
        );
        Ok(RepeatOutcome {
            seed: config.seed,
            auc: report.auc,
            ap: report.ap,
            best_epoch: model.best_epoch,
        })
    });
    let mut outcomes = Vec::with_capacity(results.len());
    for result in results {
        outcomes.push(result?);
    }

    let aucs: Vec<f64> = outcomes.iter().map(|o| o.auc).collect();
    let aps: Vec<f64> = outcomes.iter().map(|o| o.ap).collect();
    let report = RunReport {
        config: ConfigEcho {
            dataset: spec.describe(),
            test_frac: cmd.split.test_frac,
            val_frac: cmd.split.val_frac,
            seed: cmd.split.seed,
            repeat: cmd.repeat,
            epochs: template.epochs,
            lr: template.lr,
            hidden_dim: template.hidden_dim,
            head: template.head,
            one_view: template.one_view_ablation,
            raw_adjacency: template.raw_adjacency,
            select_by_val: template.select_by_val,
        },
        auc_mean: mean(&aucs),
        auc_std: sample_std(&aucs),
        ap_mean: mean(&aps),
        ap_std: sample_std(&aps),
        repeats: outcomes,
    };
    std::fs::write(
        cmd.out.join("report.json"),
        serde_json::to_string_pretty(&report).map_err(runtime)?,
    )
    .map_err(runtime)?;
    log::info!("total wall time {} ms", started.elapsed().as_millis());
    println!(
        "test AUC {:.4} +- {:.4}, AP {:.4} +- {:.4} over {} repeat(s)",
        report.auc_mean, report.auc_std, report.ap_mean, report.ap_std, cmd.repeat
    );
    Ok(())
}

pub fn cmd_sweep(cmd: SweepCmd) -> Result<(), CliError> {
    let spec = DatasetSpec::from_args(&cmd.data)?;
    if cmd.repeat < 1 {
        return Err(usage("--repeat must be at least 1"));
    }
    if cmd.grid_dv.is_empty() || cmd.grid_lr.is_empty() {
        return Err(usage("sweep grids must be non-empty"));
    }
    let data = spec.load(cmd.split.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cmd.split.seed);
    let split =
        split_edges(&data, cmd.split.val_frac, cmd.split.test_frac, &mut rng).map_err(usage)?;
    std::fs::create_dir_all(&cmd.out).map_err(runtime)?;
    attach_run_log(&cmd.out);
    log::info!(
        "sweep {} over {}x{} cells, {} repeat(s) each",
        spec.describe(),
        cmd.grid_dv.len(),
        cmd.grid_lr.len(),
        cmd.repeat
    );

    let mut csv = String::from("d_v,lr,auc_mean,auc_std,ap_mean,ap_std\n");
    let mut any_ok = false;
    for &dv in &cmd.grid_dv {
        for &lr in &cmd.grid_lr {
            let template = TrainConfig {
                epochs: cmd.model.epochs,
                lr,
                hidden_dim: dv,
                head: cmd.model.head,
                one_view_ablation: cmd.model.one_view,
                raw_adjacency: cmd.model.raw_adjacency,
                seed: cmd.split.seed,
                select_by_val: !cmd.model.no_val_select,
            };
            match run_cell(&data, &split, &template, cmd.split.seed, cmd.repeat) {
                Ok((auc_mean, auc_std, ap_mean, ap_std)) => {
                    any_ok = true;
                    csv.push_str(&format!(
                        "{dv},{lr},{auc_mean},{auc_std},{ap_mean},{ap_std}\n"
                    ));
                    log::info!("cell d_v={dv} lr={lr}: auc {auc_mean:.6} +- {auc_std:.6}");
                }
                Err(e) => {
                    log::warn!("cell d_v={dv} lr={lr} failed: {e}");
                    csv.push_str(&format!("{dv},{lr},NaN,NaN,NaN,NaN\n"));
                }
            }
        }
    }
    let path = cmd.out.join("sweep.csv");
    std::fs::write(&path, &csv).map_err(runtime)?;
    println!(
        "wrote {} cells to {}",
        cmd.grid_dv.len() * cmd.grid_lr.len(),
        path.display()
    );
    if !any_ok {
        return Err(runtime("every sweep cell failed"));
    }
    Ok(())
}

fn run_cell(
    data: &RawDataset,
    split: &DatasetSplit,
    template: &TrainConfig,
    base_seed: u64,
    repeat: u64,
) -> Result<(f64, f64, f64, f64), CliError> {
    template.validate().map_err(usage)?;
    let results = run_pool(repeat, worker_threads(), |i| {
        let config = TrainConfig {
            seed: base_seed + i,
            ..*template
        };
        let model = train(split, &data.features, &config).map_err(runtime)?;
        cgcl_core::trainer::evaluate(
            &model.params,
            &data.features,
            &split.train_edges,
            &split.test_pos,
            &split.test_neg,
            config.raw_adjacency,
        )
        .map_err(runtime)
    });
    let mut aucs = Vec::new();
    let mut aps = Vec::new();
    for result in results {
        let (a, p) = result?;
        aucs.push(a);
        aps.push(p);
    }
    Ok((mean(&aucs), sample_std(&aucs), mean(&aps), sample_std(&aps)))
}

pub fn cmd_eval(cmd: EvalCmd) -> Result<(), CliError> {
    let spec = DatasetSpec::from_args(&cmd.data)?;
    let manifest = SplitManifest::load(&cmd.manifest).map_err(usage)?;
    let data = spec.load(manifest.seed)?;
    let split = manifest.to_split().map_err(usage)?;
    if split.num_nodes != data.features.rows() {
        return Err(usage(format!(
            "manifest is over {} nodes but the dataset has {}",
            split.num_nodes,
            data.features.rows()
        )));
    }
    let ckpt = load_checkpoint(&cmd.checkpoint).map_err(usage)?;
    if ckpt.params.dims.in_dim != data.features.cols() {
        return Err(usage(format!(
            "checkpoint expects {}-dimensional features but the dataset has {}",
            ckpt.params.dims.in_dim,
            data.features.cols()
        )));
    }
    std::fs::create_dir_all(&cmd.out).map_err(runtime)?;
    attach_run_log(&cmd.out);
    let report = test_metrics(&ckpt.params, &data, &split, ckpt.seed, cmd.raw_adjacency)?;
    let path = cmd.out.join("metrics.json");
    report.save(&path).map_err(runtime)?;
    log::info!("eval {} -> {}", cmd.checkpoint.display(), path.display());
    println!(
        "test AUC {:.6}, AP {:.6} over {}+{} pairs",
        report.auc, report.ap, report.n_pos, report.n_neg
    );
    Ok(())
}
