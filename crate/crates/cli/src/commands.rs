use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use graphmdl::aggregate::aggregate_detailed;
use graphmdl::canonical::build_pool;
use graphmdl::metrics::{evaluate_corpus, EvalOptions, GedMode, Task};
use graphmdl::pipeline::{rows_csv, run_pipeline, summary_csv, PipelineConfig};
use graphmdl::sample_io::{parse_completions, read_graphs, read_samples, write_graph, write_json, ScriptDialect};
use graphmdl::solver::{to_lp_format, Engine, Formulation};
use graphmdl::synth::NoiseModel;
use graphmdl::tuner::{parse_grid, score_surface_csv, tune, LabeledInstance, TuneMetric};
use graphmdl::{AggregateError, AggregationConfig, SampleSet, Variant};
use graphmdl_sampler::{sample_graphs, PromptSpec, SamplerConfig, SamplerError};

use crate::{manifest, Classify, Command, Failure};

/// What a command did, for the manifest.
pub struct Run {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: Value,
    pub seed: Option<u64>,
    pub timed_out: bool,
    pub manifest: PathBuf,
}

fn fail(kind: Failure, msg: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("{msg}").context(kind)
}

fn parse_kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unrecognized value {s:?}"))
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: AggregateError| e.to_string())
}

fn parse_metric(s: &str) -> Result<TuneMetric, String> {
    s.parse().map_err(|e: graphmdl::tuner::TuneError| e.to_string())
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: graphmdl::metrics::EvalError| e.to_string())
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).context(Failure::Config)?;
    toml::from_str(&text).map_err(|e| fail(Failure::Config, format!("{}: {e}", path.display())))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn absolute(p: &mut PathBuf) {
    if let Ok(abs) = std::path::absolute(&*p) {
        *p = abs;
    }
}

fn file_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn resolve_dialect(name: &str) -> Result<(ScriptDialect, Option<PathBuf>)> {
    let d = ScriptDialect::resolve(name).or_fail(Failure::Config)?;
    let file = ScriptDialect::builtin(name).is_err().then(|| PathBuf::from(name));
    Ok((d, file))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct AggregateArgs {
    /// Sample set JSON. With --dialect, a JSON array of raw completion texts.
    #[arg(long)]
    pub samples: PathBuf,
    /// TOML aggregation config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// full, no-node-transforms, equal-lambda or no-dag.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub no_dag: bool,
    #[arg(long)]
    pub jaccard_threshold: Option<f64>,
    /// lazy-cycles, transitive-closure or brute-force.
    #[arg(long, value_parser = parse_kebab::<Engine>)]
    pub engine: Option<Engine>,
    /// Solver budget in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub node_limit: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Builtin dialect name or dialect TOML file for parsing raw completions.
    #[arg(long)]
    pub dialect: Option<String>,
    /// Write the canonicalized node/edge pool as JSON.
    #[arg(long)]
    pub dump_pool: Option<PathBuf>,
    /// Write the selection problem in LP format.
    #[arg(long)]
    pub dump_ilp: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn aggregation_config(
    file: Option<&Path>,
    variant: Option<Variant>,
    no_dag: bool,
    jaccard: Option<f64>,
) -> Result<AggregationConfig> {
    let mut cfg: AggregationConfig = match file {
        Some(p) => read_toml(p)?,
        None => AggregationConfig::default(),
    };
    if let Some(v) = variant {
        cfg.variant = v;
    }
    if no_dag {
        cfg.dag_constraints = false;
    }
    if let Some(j) = jaccard {
        cfg.jaccard_threshold = j;
    }
    Ok(cfg)
}

fn read_sample_input(path: &Path, dialect: Option<&ScriptDialect>) -> Result<SampleSet> {
    let set = match dialect {
        None => read_samples(path).or_fail(Failure::Data)?,
        Some(d) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .context(Failure::Data)?;
            let completions: Vec<String> = serde_json::from_str(&text)
                .map_err(|e| fail(Failure::Data, format!("{}: expected a JSON array of strings: {e}", path.display())))?;
            parse_completions(&completions, d)
        }
    };
    for r in &set.rejects {
        log::warn!("sample {} rejected: {}", r.index, r.reason);
    }
    if set.is_empty() {
        return Err(fail(Failure::Data, format!("{}: no usable samples", path.display())));
    }
    Ok(set)
}

fn run_aggregate(a: &AggregateArgs) -> Result<Run> {
    let mut cfg = aggregation_config(a.config.as_deref(), a.variant, a.no_dag, a.jaccard_threshold)?;
    if let Some(l) = a.lambda1 {
        cfg.lambda1 = l;
    }
    if let Some(l) = a.lambda2 {
        cfg.lambda2 = l;
    }
    if let Some(e) = a.engine {
        cfg.solver.engine = e;
    }
    if let Some(s) = a.time_limit {
        let limit = Duration::try_from_secs_f64(s).map_err(|e| fail(Failure::Config, format!("--time-limit: {e}")))?;
        cfg.solver.time_limit = Some(limit);
    }
    if let Some(n) = a.node_limit {
        cfg.solver.node_limit = Some(n);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().or_fail(Failure::Config)?;

    let mut inputs = vec![a.samples.clone()];
    inputs.extend(a.config.clone());
    let dialect = match &a.dialect {
        Some(name) => {
            let (d, file) = resolve_dialect(name)?;
            inputs.extend(file);
            Some(d)
        }
        None => None,
    };
    let samples = read_sample_input(&a.samples, dialect.as_ref())?;
    let pool = build_pool(&samples, cfg.jaccard_threshold);
    log::info!("pooled {} samples into {} nodes and {} edges", pool.sample_count, pool.nodes.len(), pool.edges.len());

    let mut outputs = Vec::new();
    if let Some(p) = &a.dump_pool {
        ensure_parent(p)?;
        write_json(&pool, p).or_fail(Failure::Data)?;
        outputs.push(p.clone());
    }
    if let Some(p) = &a.dump_ilp {
        let problem = graphmdl::aggregate::build_problem(&pool, &cfg).or_fail(Failure::Config)?;
        let formulation = match cfg.solver.engine {
            Engine::TransitiveClosure => Formulation::TransitiveClosure,
            _ => Formulation::Relaxed,
        };
        let lp = to_lp_format(&problem, formulation).or_fail(Failure::Data)?;
        write_text(p, &lp)?;
        outputs.push(p.clone());
    }

    let (graph, timed_out) = match aggregate_detailed(&pool, &cfg) {
        Ok(o) => (o.graph, false),
        Err(AggregateError::Timeout { outcome }) => (outcome.graph, true),
        Err(e @ AggregateError::Config(_)) => return Err(anyhow::Error::new(e).context(Failure::Config)),
        Err(e) => return Err(anyhow::Error::new(e).context(Failure::Data)),
    };
    log::info!("aggregate has {} nodes and {} edges", graph.nodes.len(), graph.edges.len());
    ensure_parent(&a.out)?;
    write_graph(&graph, &a.out).or_fail(Failure::Data)?;
    outputs.insert(0, a.out.clone());
    Ok(Run {
        inputs,
        outputs,
        config: serde_json::to_value(&cfg)?,
        seed: Some(cfg.seed),
        timed_out,
        manifest: file_manifest(&a.out),
    })
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TuneArgs {
    /// Directory of instance subdirectories, each holding samples.json and
    /// gold.json (or truth.json).
    #[arg(long)]
    pub train: PathBuf,
    /// `start:end:step` or a comma list, used for both lambdas.
    #[arg(long, default_value = "0:1:0.1")]
    pub grid: String,
    /// edge_f1, c_f1 or r50_f1.
    #[arg(long, default_value = "edge_f1", value_parser = parse_metric)]
    pub metric: TuneMetric,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub no_dag: bool,
    #[arg(long)]
    pub jaccard_threshold: Option<f64>,
    /// Also write the score surface as CSV.
    #[arg(long)]
    pub surface: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Instances under `dir`, in subdirectory name order.
pub fn read_training_dir(dir: &Path) -> Result<(Vec<LabeledInstance>, Vec<PathBuf>)> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display())).context(Failure::Data)?;
    let mut subdirs: Vec<PathBuf> = entries.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    subdirs.sort();
    let mut instances = Vec::new();
    let mut files = Vec::new();
    for sub in subdirs {
        let samples_path = sub.join("samples.json");
        let gold_path = ["gold.json", "truth.json"].iter().map(|n| sub.join(n)).find(|p| p.exists());
        let Some(gold_path) = gold_path.filter(|_| samples_path.exists()) else {
            log::warn!("skipping {}: needs samples.json and gold.json", sub.display());
            continue;
        };
        let samples = read_samples(&samples_path).or_fail(Failure::Data)?;
        let gold = graphmdl::sample_io::read_graph(&gold_path).or_fail(Failure::Data)?;
        instances.push(LabeledInstance { samples, gold });
        files.push(samples_path);
        files.push(gold_path);
    }
    Ok((instances, files))
}

fn run_tune(a: &TuneArgs) -> Result<Run> {
    let base = aggregation_config(a.config.as_deref(), a.variant, a.no_dag, a.jaccard_threshold)?;
    base.validate().or_fail(Failure::Config)?;
    let grid = parse_grid(&a.grid).or_fail(Failure::Config)?;
    let (instances, mut inputs) = read_training_dir(&a.train)?;
    if instances.len() < 2 {
        return Err(fail(Failure::Data, format!("{}: need at least 2 instances, found {}", a.train.display(), instances.len())));
    }
    inputs.extend(a.config.clone());
    let result = tune(&instances, &grid, a.metric, &base).map_err(|e| {
        let kind = if matches!(e, graphmdl::tuner::TuneError::Config(_)) { Failure::Config } else { Failure::Data };
        anyhow::Error::new(e).context(kind)
    })?;
    ensure_parent(&a.out)?;
    write_json(&result, &a.out).or_fail(Failure::Data)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(p) = &a.surface {
        ensure_parent(p)?;
        score_surface_csv(&result, p)?;
        outputs.push(p.clone());
    }
    let config = serde_json::json!({ "base": base, "grid": grid, "metric": a.metric });
    Ok(Run { inputs, outputs, config, seed: Some(base.seed), timed_out: false, manifest: file_manifest(&a.out) })
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EvalArgs {
    /// A graph or a JSON array of graphs.
    #[arg(long)]
    pub pred: PathBuf,
    /// A graph or a JSON array of graphs, aligned with --pred.
    #[arg(long)]
    pub gold: PathBuf,
    /// argmine, explagraph, proscript or semgraph.
    #[arg(long, value_parser = parse_task)]
    pub task: Task,
    /// Force exact or greedy graph edit distance.
    #[arg(long, value_parser = parse_kebab::<GedMode>)]
    pub ged_mode: Option<GedMode>,
    #[arg(long)]
    pub out: PathBuf,
}

fn run_eval(a: &EvalArgs) -> Result<Run> {
    let preds = read_graphs(&a.pred).or_fail(Failure::Data)?;
    let golds = read_graphs(&a.gold).or_fail(Failure::Data)?;
    let opts = EvalOptions { ged_mode: a.ged_mode, ..Default::default() };
    let report = evaluate_corpus(&preds, &golds, a.task, &opts).or_fail(Failure::Data)?;
    ensure_parent(&a.out)?;
    write_json(&report, &a.out).or_fail(Failure::Data)?;
    Ok(Run {
        inputs: vec![a.pred.clone(), a.gold.clone()],
        outputs: vec![a.out.clone()],
        config: serde_json::json!({ "task": a.task, "options": opts }),
        seed: None,
        timed_out: false,
        manifest: file_manifest(&a.out),
    })
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub nodes: usize,
    /// Probability of each forward pair becoming an edge.
    #[arg(long, default_value_t = 0.35)]
    pub density: f64,
    /// TOML noise model. Its `seed` is ignored; --seed drives everything.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Number of samples.
    #[arg(long = "t", default_value_t = 10)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Let added edges close cycles.
    #[arg(long)]
    pub allow_cycles: bool,
    /// Output directory for truth.json and samples.json.
    #[arg(long)]
    pub out: PathBuf,
}

fn run_synth(a: &SynthArgs) -> Result<Run> {
    let mut noise: NoiseModel = match &a.noise {
        Some(p) => read_toml(p)?,
        None => NoiseModel::default(),
    };
    noise.allow_cycles |= a.allow_cycles;
    let cfg = PipelineConfig { nodes: a.nodes, density: a.density, noise, t_values: vec![a.t], ..Default::default() };
    cfg.validate().or_fail(Failure::Config)?;
    let inst = graphmdl::pipeline::instance(&cfg, a.seed, a.t).or_fail(Failure::Config)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let truth = a.out.join("truth.json");
    let samples = a.out.join("samples.json");
    write_graph(&inst.gold, &truth).or_fail(Failure::Data)?;
    write_json(&inst.samples, &samples).or_fail(Failure::Data)?;
    Ok(Run {
        inputs: a.noise.iter().cloned().collect(),
        outputs: vec![truth, samples],
        config: serde_json::json!({ "nodes": a.nodes, "density": a.density, "t": a.t, "noise": cfg.noise }),
        seed: Some(a.seed),
        timed_out: false,
        manifest: a.out.join("manifest.json"),
    })
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SampleArgs {
    /// TOML prompt spec with few-shot examples and the test input.
    #[arg(long)]
    pub prompt_spec: PathBuf,
    /// TOML sampler config. The API key is read from the variable named by
    /// `api_key_env`.
    #[arg(long)]
    pub config: PathBuf,
    /// Builtin dialect name or dialect TOML file.
    #[arg(long)]
    pub dialect: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn run_sample(a: &SampleArgs) -> Result<Run> {
    let spec: PromptSpec = read_toml(&a.prompt_spec)?;
    let cfg: SamplerConfig = read_toml(&a.config)?;
    let (dialect, dialect_file) = resolve_dialect(&a.dialect)?;
    let transport = cfg.http_transport().or_fail(Failure::Config)?;
    let outcome = sample_graphs(&spec, &cfg, &dialect, &transport).map_err(|e| {
        let kind = match e {
            SamplerError::Config(_) | SamplerError::Auth { .. } => Some(Failure::Config),
            SamplerError::Parse { .. } => Some(Failure::Data),
            _ => None,
        };
        let err = anyhow::Error::new(e);
        match kind {
            Some(k) => err.context(k),
            None => err,
        }
    })?;
    log::info!(
        "{} samples ({} rejected), {} network calls, {} cache hits, {} retries",
        outcome.samples.len(),
        outcome.samples.rejects.len(),
        outcome.report.network_calls,
        outcome.report.cache_hits,
        outcome.report.retries.len()
    );
    ensure_parent(&a.out)?;
    write_json(&outcome.samples, &a.out).or_fail(Failure::Data)?;
    let mut inputs = vec![a.prompt_spec.clone(), a.config.clone()];
    inputs.extend(dialect_file);
    Ok(Run {
        inputs,
        outputs: vec![a.out.clone()],
        config: serde_json::json!({ "sampler": cfg, "prompt": spec, "dialect": a.dialect }),
        seed: None,
        timed_out: false,
        manifest: file_manifest(&a.out),
    })
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PipelineArgs {
    /// TOML pipeline config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the number of seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Overrides the sample counts, e.g. `--t 1,5,10`.
    #[arg(long = "t", value_delimiter = ',')]
    pub t: Vec<usize>,
    /// Output directory for results.csv and summary.csv.
    #[arg(long)]
    pub out: PathBuf,
}

fn run_pipeline_cmd(a: &PipelineArgs) -> Result<Run> {
    let mut cfg: PipelineConfig = match &a.config {
        Some(p) => read_toml(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    if !a.t.is_empty() {
        cfg.t_values = a.t.clone();
    }
    cfg.validate().or_fail(Failure::Config)?;
    let started = Instant::now();
    let result = run_pipeline(&cfg).or_fail(Failure::Data)?;
    log::info!("pipeline produced {} rows in {:.1?}", result.rows.len(), started.elapsed());
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let results = a.out.join("results.csv");
    let summary = a.out.join("summary.csv");
    write_text(&results, &rows_csv(&result.rows))?;
    write_text(&summary, &summary_csv(&result.summary))?;
    let mut outputs = vec![results, summary];
    if !result.lambdas.is_empty() {
        let path = a.out.join("lambdas.csv");
        let mut text = String::from("variant,T,seed,lambda1,lambda2\n");
        for l in &result.lambdas {
            text.push_str(&format!("{},{},{},{},{}\n", l.variant, l.t, l.seed, l.lambda1, l.lambda2));
        }
        write_text(&path, &text)?;
        outputs.push(path);
    }
    if result.timeouts > 0 {
        log::warn!("{} aggregations used heuristic solutions", result.timeouts);
    }
    Ok(Run {
        inputs: a.config.iter().cloned().collect(),
        outputs,
        config: serde_json::to_value(&cfg)?,
        seed: Some(cfg.seed_start),
        timed_out: result.timeouts > 0,
        manifest: a.out.join("manifest.json"),
    })
}

impl Command {
    /// Makes every path absolute so a manifest replays from any directory.
    fn absolutize(&mut self) {
        match self {
            Command::Aggregate(a) => {
                for p in [Some(&mut a.samples), a.config.as_mut(), a.dump_pool.as_mut(), a.dump_ilp.as_mut(), Some(&mut a.out)]
                    .into_iter()
                    .flatten()
                {
                    absolute(p);
                }
                if let Some(d) = &mut a.dialect {
                    if Path::new(d).exists() {
                        let mut p = PathBuf::from(&*d);
                        absolute(&mut p);
                        *d = p.to_string_lossy().into_owned();
                    }
                }
            }
            Command::Tune(a) => {
                for p in [Some(&mut a.train), a.config.as_mut(), a.surface.as_mut(), Some(&mut a.out)].into_iter().flatten() {
                    absolute(p);
                }
            }
            Command::Eval(a) => [&mut a.pred, &mut a.gold, &mut a.out].into_iter().for_each(absolute),
            Command::Synth(a) => {
                a.noise.iter_mut().for_each(absolute);
                absolute(&mut a.out);
            }
            Command::Sample(a) => {
                [&mut a.prompt_spec, &mut a.config, &mut a.out].into_iter().for_each(absolute);
                if Path::new(&a.dialect).exists() {
                    let mut p = PathBuf::from(&a.dialect);
                    absolute(&mut p);
                    a.dialect = p.to_string_lossy().into_owned();
                }
            }
            Command::Pipeline(a) => {
                a.config.iter_mut().for_each(absolute);
                absolute(&mut a.out);
            }
        }
    }

    /// Points every output path into `root`, one subdirectory per path so
    /// equal file names cannot collide.
    pub fn redirect_outputs(&mut self, root: &Path) {
        let mut k = 0;
        let mut move_path = |p: &mut PathBuf| {
            let name = p.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "out".into());
            *p = root.join(k.to_string()).join(name);
            k += 1;
        };
        match self {
            Command::Aggregate(a) => {
                move_path(&mut a.out);
                a.dump_pool.iter_mut().for_each(&mut move_path);
                a.dump_ilp.iter_mut().for_each(&mut move_path);
            }
            Command::Tune(a) => {
                move_path(&mut a.out);
                a.surface.iter_mut().for_each(&mut move_path);
            }
            Command::Eval(a) => move_path(&mut a.out),
            Command::Synth(a) => move_path(&mut a.out),
            Command::Sample(a) => move_path(&mut a.out),
            Command::Pipeline(a) => move_path(&mut a.out),
        }
    }
}

/// Runs without writing a manifest.
pub fn run(cmd: &Command) -> Result<Run> {
    match cmd {
        Command::Aggregate(a) => run_aggregate(a),
        Command::Tune(a) => run_tune(a),
        Command::Eval(a) => run_eval(a),
        Command::Synth(a) => run_synth(a),
        Command::Sample(a) => run_sample(a),
        Command::Pipeline(a) => run_pipeline_cmd(a),
    }
}

/// Runs a command and writes its manifest next to the outputs.
pub fn execute(mut cmd: Command) -> Result<Run> {
    cmd.absolutize();
    let started = Instant::now();
    let run = run(&cmd)?;
    manifest::write(&cmd, &run, started.elapsed())?;
    Ok(run)
}
