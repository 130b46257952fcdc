use std::fs;
use std::path::{Path, PathBuf};

use mhr::dataset::{load_dataset, make_synthetic, split_labels, MultiviewDataset};
use mhr::eval::{
    format_summary, holdout_split, run_sweep, summarize, tune, write_reports_csv, MethodTag,
    SweepConfig, TuneConfig,
};
use mhr::kernels::{check_psd, PSD_TOLERANCE};
use mhr::manifold::{build_manifold, default_k, ManifoldKind, ManifoldSpec};
use mhr::solvers::{predict, train, ObjectiveConfig, TrainSpec, TrainedModel};
use nalgebra::DVector;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{parse_list, parse_range, DatasetSource, RunConfig};
use crate::Command;

type Outcome = Result<(), String>;

fn stage<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> String {
    move |e| format!("{name}: {e}")
}

/// Library errors already carry their stage name.
fn lib(e: mhr::Error) -> String {
    e.to_string()
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| format!("io: {}: {e}", dir.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Outcome {
    fs::write(path, contents).map_err(|e| format!("io: {}: {e}", path.display()))
}

struct Loaded {
    config: RunConfig,
    text: String,
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Loaded, String> {
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(out) = out {
        config.out = out;
    }
    let text = fs::read_to_string(path).map_err(|e| format!("config: {}: {e}", path.display()))?;
    Ok(Loaded { config, text })
}

fn load_data(config: &RunConfig) -> Result<MultiviewDataset, String> {
    match &config.dataset {
        DatasetSource::Path(p) => load_dataset(p).map_err(lib),
        DatasetSource::Generator { .. } => {
            make_synthetic(&config.generator_spec().expect("generator")).map_err(lib)
        }
    }
}

fn methods(config: &RunConfig, views: &[String]) -> Result<Vec<MethodTag>, String> {
    let mut out = Vec::new();
    for text in &config.methods {
        out.extend(MethodTag::parse_expanded(text, views).map_err(lib)?);
    }
    Ok(out)
}

fn sweep_config(config: &RunConfig, methods: Vec<MethodTag>) -> SweepConfig {
    SweepConfig {
        methods,
        fractions: config.fractions.clone(),
        repeats: config.repeats,
        base_seed: config.seed,
        kernels: config.kernels.clone(),
        manifold: config.manifold.clone(),
        standardize: config.standardize,
        objective: config.objective.clone(),
    }
}

/// Config text, dataset hash and the hash of every output file.
fn write_manifest(
    config: &Loaded,
    command: &str,
    dataset_hash: &str,
    outputs: &[&Path],
) -> Outcome {
    let mut files = serde_json::Map::new();
    for path in outputs {
        let bytes = fs::read(path).map_err(|e| format!("io: {}: {e}", path.display()))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        files.insert(name, json!(sha256_hex(&bytes)));
    }
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.config.seed,
        "config": config.text,
        "config_sha256": sha256_hex(config.text.as_bytes()),
        "dataset_sha256": dataset_hash,
        "outputs": files,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(stage("manifest"))?;
    write_file(&config.config.out.join("manifest.json"), text.as_bytes())
}

fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, String>
where
    T: Send,
{
    match workers {
        Some(0) => Err("config: workers must be at least 1".into()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(stage("workers"))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

pub fn run(command: Command, workers: Option<usize>) -> Outcome {
    match command {
        Command::Train { config, out, seed } => {
            let loaded = load_config(&config, seed, out)?;
            with_workers(workers.or(loaded.config.workers), || cmd_train(&loaded))?
        }
        Command::Predict { model, data, out } => {
            with_workers(workers, || cmd_predict(&model, &data, &out))?
        }
        Command::Sweep {
            config,
            fractions,
            repeats,
            out,
            seed,
        } => {
            let mut loaded = load_config(&config, seed, out)?;
            if let Some(f) = fractions {
                loaded.config.fractions = parse_list("--fractions", &f)?;
            }
            if let Some(r) = repeats {
                loaded.config.repeats = r;
            }
            with_workers(workers.or(loaded.config.workers), || cmd_sweep(&loaded))?
        }
        Command::InspectManifold { config, out, seed } => {
            let loaded = load_config(&config, seed, out)?;
            with_workers(workers.or(loaded.config.workers), || cmd_inspect(&loaded))?
        }
        Command::Tune {
            config,
            grid_exp,
            out,
            seed,
        } => {
            let mut loaded = load_config(&config, seed, out)?;
            if let Some(g) = grid_exp {
                loaded.config.grid_exp = parse_range(&g)?;
            }
            with_workers(workers.or(loaded.config.workers), || cmd_tune(&loaded))?
        }
    }
}

fn cmd_train(loaded: &Loaded) -> Outcome {
    let config = &loaded.config;
    let mut data = load_data(config)?;
    if let Some(fraction) = config.label_fraction {
        let mask = split_labels(&data, fraction, config.seed).map_err(lib)?;
        data = data.apply_mask(&mask).map_err(lib)?;
    }
    let tags = methods(config, data.view_names())?;
    let [tag] = tags.as_slice() else {
        return Err(format!(
            "train: {} methods selected; name exactly one, with @view for single-view methods",
            tags.len()
        ));
    };
    let spec = TrainSpec {
        mode: tag.mode.clone(),
        kernels: config.kernels.clone(),
        manifold: tag.regularizer.map(|kind| ManifoldSpec {
            kind,
            ..config.manifold.clone()
        }),
        standardize: config.standardize,
        objective: ObjectiveConfig {
            loss: tag.solver.loss(),
            ..config.objective.clone()
        },
    };
    let model = train(&data, &spec).map_err(lib)?;

    create_dir(&config.out)?;
    let model_path = config.out.join("model.json");
    model.save(&model_path).map_err(lib)?;
    let trace_path = config.out.join("trace.csv");
    let mut trace = csv::Writer::from_path(&trace_path).map_err(stage("io"))?;
    trace
        .write_record(["round", "step", "objective"])
        .map_err(stage("io"))?;
    for step in &model.trace {
        trace
            .write_record([
                step.round.to_string(),
                format!("{:?}", step.step).to_lowercase(),
                step.objective.to_string(),
            ])
            .map_err(stage("io"))?;
    }
    trace.flush().map_err(stage("io"))?;
    write_manifest(
        loaded,
        "train",
        &data.content_hash(),
        &[&model_path, &trace_path],
    )?;
    println!(
        "{tag}: {} rounds, converged {}, objective {:.6e}, theta {:?}, beta {:?}",
        model.rounds,
        model.converged,
        model.trace.last().map_or(f64::NAN, |s| s.objective),
        model.theta.as_slice(),
        model.beta.as_slice()
    );
    println!("wrote {}", model_path.display());
    Ok(())
}

fn cmd_predict(model: &Path, data: &Path, out: &Path) -> Outcome {
    let model = TrainedModel::load(model).map_err(lib)?;
    let data = load_dataset(data).map_err(lib)?;
    if data.view_names() != model.preprocess.input_names.as_slice() {
        return Err(format!(
            "predict: data views {:?} do not match model views {:?}",
            data.view_names(),
            model.preprocess.input_names
        ));
    }
    let scores = predict(&model, data.views()).map_err(lib)?;
    let mut writer = csv::Writer::from_path(out).map_err(stage("io"))?;
    writer
        .write_record(["index", "score", "sign"])
        .map_err(stage("io"))?;
    for (i, s) in scores.iter().enumerate() {
        let sign = if *s >= 0.0 { "1" } else { "-1" };
        writer
            .write_record([i.to_string(), s.to_string(), sign.to_string()])
            .map_err(stage("io"))?;
    }
    writer.flush().map_err(stage("io"))?;
    println!("scored {} examples into {}", scores.len(), out.display());
    Ok(())
}

fn cmd_sweep(loaded: &Loaded) -> Outcome {
    let config = &loaded.config;
    let data = load_data(config)?;
    let held = config.test_count.unwrap_or(data.n() / 2);
    let (train_set, test_set) = holdout_split(&data, held, config.seed).map_err(lib)?;
    let sweep = sweep_config(config, methods(config, data.view_names())?);
    let reports = run_sweep(&train_set, &test_set, &sweep).map_err(lib)?;

    create_dir(&config.out)?;
    let reports_path = config.out.join("reports.csv");
    let file = fs::File::create(&reports_path)
        .map_err(|e| format!("io: {}: {e}", reports_path.display()))?;
    write_reports_csv(&reports, file).map_err(lib)?;
    let summary = format_summary(&summarize(&reports));
    let summary_path = config.out.join("summary.txt");
    write_file(&summary_path, summary.as_bytes())?;
    write_manifest(
        loaded,
        "sweep",
        &data.content_hash(),
        &[&reports_path, &summary_path],
    )?;
    print!("{summary}");
    Ok(())
}

fn cmd_inspect(loaded: &Loaded) -> Outcome {
    let config = &loaded.config;
    let data = load_data(config)?;
    let n = data.n();
    let ones = DVector::from_element(n, 1.0);
    let linear = data
        .latent()
        .map(|z| DVector::from_fn(n, |i, _| z.row(i).sum()));

    create_dir(&config.out)?;
    let path = config.out.join("manifold.csv");
    let mut writer = csv::Writer::from_path(&path).map_err(stage("io"))?;
    let header = [
        "view",
        "kind",
        "k",
        "m",
        "min_eig",
        "max_eig",
        "constant_energy",
        "linear_energy",
    ];
    writer.write_record(header).map_err(stage("io"))?;
    println!("{}", header.join(","));
    for (name, view) in data.view_names().iter().zip(data.views()) {
        for kind in [ManifoldKind::Hessian, ManifoldKind::Laplacian] {
            let spec = ManifoldSpec {
                kind,
                ..config.manifold.clone()
            };
            let matrix = build_manifold(view, &spec).map_err(lib)?;
            let psd = check_psd(matrix.matrix(), PSD_TOLERANCE).map_err(lib)?;
            let record = [
                name.clone(),
                kind.to_string(),
                spec.k.unwrap_or_else(|| default_k(n)).to_string(),
                matrix
                    .intrinsic_dim()
                    .map(|m| m.to_string())
                    .unwrap_or_default(),
                format!("{:e}", psd.min_eig),
                format!("{:e}", psd.max_eig),
                format!("{:e}", matrix.energy(&ones)),
                linear
                    .as_ref()
                    .map(|f| format!("{:e}", matrix.energy(f)))
                    .unwrap_or_default(),
            ];
            println!("{}", record.join(","));
            writer.write_record(&record).map_err(stage("io"))?;
        }
    }
    writer.flush().map_err(stage("io"))?;
    write_manifest(loaded, "inspect-manifold", &data.content_hash(), &[&path])?;
    Ok(())
}

fn cmd_tune(loaded: &Loaded) -> Outcome {
    let config = &loaded.config;
    let data = load_data(config)?;
    let (lo, hi) = config.grid_exp;
    let tune_config = TuneConfig {
        sweep: sweep_config(config, methods(config, data.view_names())?),
        exponents: (lo..=hi).collect(),
        fraction: config.tune_fraction,
        validation_share: config.validation_share,
    };
    let results = tune(&data, &tune_config).map_err(lib)?;

    create_dir(&config.out)?;
    let path = config.out.join("tune.csv");
    let mut writer = csv::Writer::from_path(&path).map_err(stage("io"))?;
    writer
        .write_record(["method", "gamma_a", "gamma_i", "mean_map", "best"])
        .map_err(stage("io"))?;
    for result in &results {
        for c in &result.candidates {
            let best = c == &result.best;
            writer
                .write_record([
                    result.method.clone(),
                    format!("{:e}", c.gamma_a),
                    format!("{:e}", c.gamma_i),
                    c.mean_map.to_string(),
                    best.to_string(),
                ])
                .map_err(stage("io"))?;
        }
        println!(
            "{}: gamma_a = {:e}, gamma_i = {:e}, validation mAP {:.4}",
            result.method, result.best.gamma_a, result.best.gamma_i, result.best.mean_map
        );
    }
    writer.flush().map_err(stage("io"))?;
    write_manifest(loaded, "tune", &data.content_hash(), &[&path])?;
    Ok(())
}
