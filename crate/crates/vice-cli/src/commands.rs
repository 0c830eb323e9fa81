//! Implementations of the CLI subcommands.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use vice_core::checkpoint::{Checkpoint, CheckpointModel};
use vice_core::dataset::{
    aggregate_repeats, parse_dataset, split_dataset, write_dataset_to_path, TripletDataset,
};
use vice_core::eval::{
    accuracy, mean_kl, predict_mc_many, KlDirection, PredictiveDistribution,
};
use vice_core::model::{pair_probabilities, SpikeSlabPrior};
use vice_core::optim::{train, train_spose, TrainLog};
use vice_core::pac::{default_delta_grid, retrospective_bound};
use vice_core::pruning::{
    prune, prune_map, select_dimensions_by_mass, select_dimensions_with, CountRule,
};
use vice_core::synthetic::{generate_ground_truth, sample_triplets, save_ground_truth};

use crate::config::{env_fallback_seed, GridSpec, Method, RunConfig};
use crate::files;
use crate::{
    BoundArgs, CliError, EvaluateArgs, GridArgs, PruneArgs, ReportArgs, SimulateArgs, TrainArgs,
};

pub fn parse_kl_direction(text: &str) -> Result<KlDirection, String> {
    match text {
        "human-model" => Ok(KlDirection::HumanModel),
        "model-human" => Ok(KlDirection::ModelHuman),
        other => Err(format!(
            "unknown KL direction {other:?}; use human-model or model-human"
        )),
    }
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::data(format!("creating {}: {e}", path.display())))
}

/// Timestamps live here and only here; every other artifact is
/// byte-identical across reruns of the same configuration.
fn write_metadata(dir: &Path, command: &str) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Metadata<'a> {
        command: &'a str,
        version: &'a str,
        created_unix_seconds: u64,
    }
    let meta = Metadata {
        command,
        version: env!("CARGO_PKG_VERSION"),
        created_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(dir.join("metadata.json"), text + "\n")
        .map_err(|e| CliError::data(format!("writing metadata: {e}")))
}

fn load_dataset(path: &Path, num_objects: usize) -> Result<TripletDataset, CliError> {
    parse_dataset(path, num_objects).map_err(CliError::from_core)
}

/// Resolve the training and validation sets a run configuration asks for.
fn resolve_data(cfg: &RunConfig) -> Result<(TripletDataset, TripletDataset), CliError> {
    let full = load_dataset(&cfg.data, cfg.num_objects)?;
    match (&cfg.val_data, cfg.val_fraction) {
        (Some(path), None) => {
            let val = load_dataset(path, cfg.num_objects)?;
            Ok((full, val))
        }
        (None, Some(fraction)) => {
            let (train_set, val, _) =
                split_dataset(&full, (1.0 - fraction, fraction, 0.0), cfg.split_seed)
                    .map_err(CliError::from_core)?;
            Ok((train_set, val))
        }
        (None, None) => {
            let empty = TripletDataset::new(Vec::new(), cfg.num_objects)
                .expect("empty dataset over >= 3 objects");
            Ok((full, empty))
        }
        (Some(_), Some(_)) => Err(CliError::config(
            "val_data and val_fraction are mutually exclusive".into(),
        )),
    }
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    method: Method,
    epochs_run: usize,
    converged_epoch: Option<usize>,
    init_mu_std: f64,
    final_val_xent: Option<f64>,
    final_n_dims: Option<usize>,
}

fn write_seed_artifacts(
    dir: &Path,
    checkpoint: &Checkpoint,
    log: &TrainLog,
    seed: u64,
    method: Method,
) -> Result<(), CliError> {
    ensure_dir(dir)?;
    checkpoint
        .save(&dir.join("checkpoint.json"))
        .map_err(CliError::from_core)?;
    let file = fs::File::create(dir.join("trainlog.jsonl"))
        .map_err(|e| CliError::data(format!("creating trainlog: {e}")))?;
    log.write_jsonl(file).map_err(CliError::from_core)?;
    let summary = SeedSummary {
        seed,
        method,
        epochs_run: log.epochs.len(),
        converged_epoch: log.converged_epoch,
        init_mu_std: log.init_mu_std,
        final_val_xent: log.final_val_xent(),
        final_n_dims: log.epochs.last().map(|e| e.n_dims_selected),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(dir.join("summary.json"), text + "\n")
        .map_err(|e| CliError::data(format!("writing summary: {e}")))
}

/// Fit one seed; on divergence the last finite state is still written out.
fn run_one_seed(
    cfg: &RunConfig,
    data: &TripletDataset,
    val: &TripletDataset,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    let train_cfg = cfg.train_config(seed);
    let outcome = match cfg.method {
        Method::Vice => train(data, val, &train_cfg)
            .map(|(params, log)| (Checkpoint::from_variational(&params, cfg.prior, 0), log)),
        Method::Spose => train_spose(data, val, cfg.lambda, &train_cfg)
            .map(|(params, log)| (Checkpoint::from_spose(&params, 0), log)),
    };
    match outcome {
        Ok((mut checkpoint, log)) => {
            // Step count: one update per processed batch.
            checkpoint.step = log
                .epochs
                .iter()
                .map(|_| data.len().div_ceil(cfg.batch_size) as u64)
                .sum();
            write_seed_artifacts(out_dir, &checkpoint, &log, seed, cfg.method)?;
            let dims = log.epochs.last().map(|e| e.n_dims_selected).unwrap_or(0);
            println!(
                "seed {seed}: {} epochs, {} dimensions selected{}",
                log.epochs.len(),
                dims,
                match log.converged_epoch {
                    Some(e) => format!(", converged at epoch {e}"),
                    None => String::new(),
                }
            );
            Ok(())
        }
        Err(vice_core::Error::Diverged {
            epoch,
            checkpoint,
            log,
        }) => {
            ensure_dir(out_dir)?;
            checkpoint
                .save(&out_dir.join("checkpoint-diverged.json"))
                .map_err(CliError::from_core)?;
            if let Ok(file) = fs::File::create(out_dir.join("trainlog.jsonl")) {
                let _ = log.write_jsonl(file);
            }
            Err(CliError::numerical(format!(
                "seed {seed} diverged at epoch {epoch}; last finite state in {}",
                out_dir.join("checkpoint-diverged.json").display()
            )))
        }
        Err(other) => Err(CliError::from_core(other)),
    }
}

fn build_train_config(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let data = args
                .data
                .clone()
                .ok_or_else(|| CliError::config("--data is required without --config".into()))?;
            let num_objects = args.num_objects.ok_or_else(|| {
                CliError::config("--num-objects is required without --config".into())
            })?;
            let output = args
                .output
                .clone()
                .ok_or_else(|| CliError::config("--output is required without --config".into()))?;
            RunConfig::new(data, num_objects, output)
        }
    };
    if let Some(data) = &args.data {
        cfg.data = data.clone();
    }
    if let Some(m) = args.num_objects {
        cfg.num_objects = m;
    }
    if let Some(val) = &args.val_data {
        cfg.val_data = Some(val.clone());
        cfg.val_fraction = None;
    }
    if let Some(f) = args.val_fraction {
        cfg.val_fraction = Some(f);
        cfg.val_data = None;
    }
    if let Some(out) = &args.output {
        cfg.output = out.clone();
    }
    if let Some(method) = args.method {
        cfg.method = method;
    }
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    } else if args.config.is_none() {
        if let Some(seed) = env_fallback_seed()? {
            cfg.seeds = vec![seed];
        }
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(e) = args.max_epochs {
        cfg.max_epochs = e;
    }
    if let Some(d) = args.d_init {
        cfg.d_init = d;
    }
    if let Some(w) = args.stability_window {
        cfg.stability_window = w;
    }
    if args.no_stop_on_convergence {
        cfg.stop_on_convergence = false;
    }
    let prior_override = args.pi_spike.is_some()
        || args.sigma_spike.is_some()
        || args.sigma_slab.is_some();
    if prior_override {
        cfg.prior = SpikeSlabPrior::new(
            args.pi_spike.unwrap_or(cfg.prior.pi_spike),
            args.sigma_spike.unwrap_or(cfg.prior.sigma_spike),
            args.sigma_slab.unwrap_or(cfg.prior.sigma_slab),
        )
        .map_err(|e| CliError::config(e.to_string()))?;
    }
    if let Some(lambda) = args.lambda {
        cfg.lambda = lambda;
    }
    if let Some(every) = args.eval_every {
        cfg.eval_every = every;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let cfg = build_train_config(&args)?;
    let (data, val) = resolve_data(&cfg)?;
    ensure_dir(&cfg.output)?;
    cfg.save(&cfg.output.join("resolved-config.json"))?;
    write_metadata(&cfg.output, "train")?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::config(format!("building worker pool: {e}")))?;
    let results: Vec<Result<(), CliError>> = pool.install(|| {
        use rayon::prelude::*;
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let out_dir = cfg.output.join(format!("seed_{seed}"));
                run_one_seed(&cfg, &data, &val, seed, &out_dir)
            })
            .collect()
    });
    for result in results {
        result?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GridRow {
    pi_spike: f64,
    sigma_spike: f64,
    sigma_slab: f64,
    mean_val_xent: f64,
}

#[derive(Serialize)]
struct GridChoice {
    prior: SpikeSlabPrior,
    mean_val_xent: f64,
    /// Seed whose validation cross-entropy is the (lower) median across
    /// the winning combination's runs.
    median_seed: u64,
    median_val_xent: f64,
}

pub fn cmd_grid(args: GridArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(out) = &args.output {
        cfg.output = out.clone();
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    if cfg.val_data.is_none() && cfg.val_fraction.is_none() {
        return Err(CliError::config(
            "grid search needs a validation set: set val_data or val_fraction".into(),
        ));
    }
    let grid = cfg.grid.clone().unwrap_or_else(GridSpec::default);
    let combos = grid.combinations();
    if combos.is_empty() {
        return Err(CliError::config(
            "hyperparameter grid is empty after the spike < slab filter".into(),
        ));
    }
    let (data, val) = resolve_data(&cfg)?;
    ensure_dir(&cfg.output)?;
    write_metadata(&cfg.output, "grid")?;

    let jobs: Vec<(usize, u64)> = combos
        .iter()
        .enumerate()
        .flat_map(|(c, _)| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::config(format!("building worker pool: {e}")))?;
    let xents: Vec<((usize, u64), f64)> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(combo, seed)| {
                let mut train_cfg = cfg.train_config(seed);
                train_cfg.prior = combos[combo];
                let xent = match train(&data, &val, &train_cfg) {
                    Ok((_, log)) => log.final_val_xent().unwrap_or(f64::INFINITY),
                    Err(_) => f64::INFINITY,
                };
                ((combo, seed), xent)
            })
            .collect()
    });
    let by_job: HashMap<(usize, u64), f64> = xents.into_iter().collect();

    let mut rows = Vec::with_capacity(combos.len());
    for (c, prior) in combos.iter().enumerate() {
        let mean = cfg
            .seeds
            .iter()
            .map(|&s| by_job[&(c, s)])
            .sum::<f64>()
            / cfg.seeds.len() as f64;
        rows.push(GridRow {
            pi_spike: prior.pi_spike,
            sigma_spike: prior.sigma_spike,
            sigma_slab: prior.sigma_slab,
            mean_val_xent: mean,
        });
    }

    // Minimum mean cross-entropy; ties resolve to the lexicographically
    // smallest (pi, spike, slab), which is the combination order.
    let best_idx = rows
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.mean_val_xent.total_cmp(&b.mean_val_xent))
        .map(|(i, _)| i)
        .expect("grid is non-empty");

    // The representative model of the winning combination: the seed at the
    // (lower) median validation cross-entropy.
    let mut seed_xents: Vec<(u64, f64)> = cfg
        .seeds
        .iter()
        .map(|&s| (s, by_job[&(best_idx, s)]))
        .collect();
    seed_xents.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let (median_seed, median_val_xent) = seed_xents[(seed_xents.len() - 1) / 2];

    let mut csv = String::from("pi_spike,sigma_spike,sigma_slab,mean_val_xent\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.pi_spike, row.sigma_spike, row.sigma_slab, row.mean_val_xent
        ));
    }
    fs::write(cfg.output.join("grid.csv"), csv)
        .map_err(|e| CliError::data(format!("writing grid.csv: {e}")))?;

    let choice = GridChoice {
        prior: combos[best_idx],
        mean_val_xent: rows[best_idx].mean_val_xent,
        median_seed,
        median_val_xent,
    };
    let text = serde_json::to_string_pretty(&choice).expect("grid choice serializes");
    fs::write(cfg.output.join("chosen.json"), text + "\n")
        .map_err(|e| CliError::data(format!("writing chosen.json: {e}")))?;
    println!(
        "best prior: pi_spike={} sigma_spike={} sigma_slab={} (mean val xent {:.6}); \
         median model: seed {median_seed} (val xent {median_val_xent:.6})",
        choice.prior.pi_spike,
        choice.prior.sigma_spike,
        choice.prior.sigma_slab,
        choice.mean_val_xent
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    accuracy: f64,
    ceiling: f64,
    mean_kl: f64,
    n_triplets: usize,
    #[serde(rename = "R")]
    r_samples: usize,
    seed: u64,
    kl_direction: KlDirection,
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let checkpoint = Checkpoint::load(&args.checkpoint).map_err(CliError::from_core)?;
    let num_objects = match &checkpoint.model {
        CheckpointModel::Vice { num_objects, .. } => *num_objects,
        CheckpointModel::Spose { num_objects, .. } => *num_objects,
    };
    let data = load_dataset(&args.data, num_objects)?;
    let seed = match args.seed {
        Some(s) => s,
        None => env_fallback_seed()?.unwrap_or(0),
    };

    let human = aggregate_repeats(&data);
    let triplets: Vec<[u32; 3]> = human.iter().map(|d| d.triplet()).collect();
    let predictions: Vec<PredictiveDistribution> = match &checkpoint.model {
        CheckpointModel::Vice { .. } => {
            let (params, _) = checkpoint.to_variational().map_err(CliError::from_core)?;
            predict_mc_many(&params, &triplets, args.r_samples, seed)
                .map_err(CliError::from_core)?
        }
        CheckpointModel::Spose { .. } => {
            let params = checkpoint.to_spose().map_err(CliError::from_core)?;
            triplets
                .iter()
                .map(|&t| PredictiveDistribution {
                    triplet: t,
                    probabilities: pair_probabilities(&params.x, t),
                })
                .collect()
        }
    };

    // Per-record accuracy: repeats of a triplet share its prediction.
    let by_triplet: HashMap<[u32; 3], &PredictiveDistribution> =
        predictions.iter().map(|p| (p.triplet, p)).collect();
    let record_predictions: Vec<PredictiveDistribution> = data
        .records()
        .iter()
        .map(|rec| (*by_triplet[&rec.triplet()]).clone())
        .collect();
    let acc = accuracy(&record_predictions, &data).map_err(CliError::from_core)?;
    let ceiling =
        vice_core::dataset::accuracy_ceiling(&human).map_err(CliError::from_core)?;
    let kl = mean_kl(&predictions, &human, args.kl_direction).map_err(CliError::from_core)?;

    let report = EvalReport {
        accuracy: acc,
        ceiling,
        mean_kl: kl,
        n_triplets: data.len(),
        r_samples: args.r_samples,
        seed,
        kl_direction: args.kl_direction,
    };
    let out = args.output.unwrap_or_else(|| {
        args.checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join("eval.json")
    });
    let text = serde_json::to_string_pretty(&report).expect("eval report serializes");
    fs::write(&out, text + "\n")
        .map_err(|e| CliError::data(format!("writing {}: {e}", out.display())))?;
    // The aggregated response distributions the KL was computed against.
    let dist_path = out.with_file_name("distributions.csv");
    let file = fs::File::create(&dist_path)
        .map_err(|e| CliError::data(format!("creating {}: {e}", dist_path.display())))?;
    vice_core::dataset::write_distributions_csv(&human, file).map_err(CliError::from_core)?;
    println!(
        "accuracy {:.4} (ceiling {:.4}), mean KL {:.4} over {} records -> {}",
        acc,
        ceiling,
        kl,
        data.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_prune(args: PruneArgs) -> Result<(), CliError> {
    let checkpoint = Checkpoint::load(&args.checkpoint).map_err(CliError::from_core)?;
    ensure_dir(&args.output)?;
    let (kept, num_dims) = match &checkpoint.model {
        CheckpointModel::Vice { .. } => {
            let (params, _) = checkpoint.to_variational().map_err(CliError::from_core)?;
            let rule = if args.bh_only {
                CountRule::BhOnly
            } else {
                CountRule::BhAndPosterior
            };
            let selection =
                select_dimensions_with(&params, args.alpha, args.reliability_threshold, rule);
            files::write_selection_csv(&args.output.join("selection.csv"), &selection)?;
            let pruned = prune(&params, &selection);
            files::write_matrix(&args.output.join("embedding.txt"), &pruned.mu_selected)?;
            files::write_kept_dims(&args.output.join("kept_dims.json"), &pruned.kept_dims)?;
            (pruned.kept_dims.len(), params.num_dims())
        }
        CheckpointModel::Spose { .. } => {
            let params = checkpoint.to_spose().map_err(CliError::from_core)?;
            let selection = select_dimensions_by_mass(&params.x, args.mass_threshold);
            files::write_mass_selection_csv(&args.output.join("selection.csv"), &selection)?;
            let pruned = prune_map(&params.x, &selection);
            files::write_matrix(&args.output.join("embedding.txt"), &pruned.mu_selected)?;
            files::write_kept_dims(&args.output.join("kept_dims.json"), &pruned.kept_dims)?;
            (pruned.kept_dims.len(), params.x.ncols())
        }
    };
    println!(
        "kept {kept} of {num_dims} dimensions -> {}",
        args.output.display()
    );
    Ok(())
}

pub fn cmd_bound(args: BoundArgs) -> Result<(), CliError> {
    let embedding = files::read_matrix(&args.embedding)?;
    if embedding.nrows() != args.num_objects {
        return Err(CliError::data(format!(
            "embedding has {} rows but --num-objects is {}",
            embedding.nrows(),
            args.num_objects
        )));
    }
    let data = load_dataset(&args.data, args.num_objects)?;
    // The argmax predictor sees the rectified embedding, so negative mean
    // entries are clamped before quantization.
    let rectified = embedding.mapv(|v| v.max(0.0));
    let deltas = args.deltas.unwrap_or_else(default_delta_grid);
    let table = retrospective_bound(&rectified, &data, &deltas, args.alpha)
        .map_err(CliError::from_core)?;
    let out = args.output.unwrap_or_else(|| {
        args.embedding
            .parent()
            .unwrap_or(Path::new("."))
            .join("bound.csv")
    });
    let file =
        fs::File::create(&out).map_err(|e| CliError::data(format!("creating bound.csv: {e}")))?;
    table.write_csv(file).map_err(CliError::from_core)?;
    println!(
        "best: delta={} empirical_error={:.4} epsilon={:.4} upper_bound={:.4} \
         (holds with probability >= {}) -> {}",
        table.best.delta,
        table.best.empirical_error,
        table.best.epsilon,
        table.best.upper_bound,
        1.0 - args.alpha,
        out.display()
    );
    Ok(())
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_fallback_seed()?.unwrap_or(0),
    };
    let gt = generate_ground_truth(args.num_objects, args.dims, args.sparsity, seed)
        .map_err(|e| CliError::config(e.to_string()))?;
    let data = sample_triplets(&gt, args.num_triplets, seed.wrapping_add(1))
        .map_err(|e| CliError::config(e.to_string()))?;
    ensure_dir(&args.output)?;
    write_dataset_to_path(&data, &args.output.join("triplets.txt")).map_err(CliError::from_core)?;
    save_ground_truth(&gt, &args.output.join("ground_truth.json")).map_err(CliError::from_core)?;
    write_metadata(&args.output, "simulate")?;
    println!(
        "wrote {} triplets over {} objects ({} true dimensions) -> {}",
        args.num_triplets,
        args.num_objects,
        args.dims,
        args.output.display()
    );
    Ok(())
}

pub fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    if let Some(paths) = &args.reproducibility {
        return reproducibility_report(paths, args.output.as_deref());
    }
    let embedding = args
        .embedding
        .as_ref()
        .expect("clap requires --embedding without --reproducibility");
    let labels_path = args
        .labels
        .as_ref()
        .expect("clap requires --labels without --reproducibility");
    let pruned = files::read_pruned_embedding(embedding, args.kept_dims.as_deref())?;
    let labels = files::read_labels(labels_path)?;
    let report = vice_core::eval::topk_report(&pruned, &labels, args.topk)
        .map_err(CliError::from_core)?;
    let mut text = String::new();
    match args.format.as_str() {
        "csv" => {
            text.push_str("dim,rank,label\n");
            for dim in &report {
                for (rank, label) in dim.labels.iter().enumerate() {
                    text.push_str(&format!("{},{},{}\n", dim.dim, rank + 1, label));
                }
            }
        }
        _ => {
            for dim in &report {
                text.push_str(&format!("dim {:>3}: {}\n", dim.dim, dim.labels.join(", ")));
            }
        }
    }
    match args.output {
        Some(path) => fs::write(&path, text)
            .map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Cross-run dimension reproducibility over pruned embedding files. A
/// `kept_dims.json` sidecar next to each matrix is used when present.
fn reproducibility_report(paths: &[std::path::PathBuf], output: Option<&Path>) -> Result<(), CliError> {
    let runs: Vec<_> = paths
        .iter()
        .map(|path| {
            let sidecar = path.with_file_name("kept_dims.json");
            let sidecar = sidecar.exists().then_some(sidecar);
            files::read_pruned_embedding(path, sidecar.as_deref())
        })
        .collect::<Result<_, _>>()?;
    let report = vice_core::eval::reproducibility(&runs).map_err(CliError::from_core)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match output {
        Some(path) => fs::write(path, text + "\n")
            .map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    Ok(())
}
