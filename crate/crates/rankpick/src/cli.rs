//! Command-line front end: fingerprint extraction, roughness reports,
//! campaign grids, and trace summarization.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error,
//! 3 runtime failure.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use crate::analytics::{pearson_r, rogi, t_test, AucSummary};
use crate::bayesopt::{run_campaign, Acquisition, CampaignConfig, CampaignError, CampaignTrace};
use crate::data::{generate_synthetic, load_csv, CsvOptions, Dataset, Direction};
use crate::surrogate::{Mode, SurrogateConfig, SurrogateKind};

#[derive(Debug)]
enum CliFailure {
    /// Bad flags or a bad experiment config; nothing was executed.
    Usage(String),
    /// Input files exist but their content is unusable.
    Data(String),
    /// The environment failed mid-flight (io, threading).
    Runtime(String),
}

impl CliFailure {
    fn code(&self) -> i32 {
        match self {
            CliFailure::Usage(_) => 1,
            CliFailure::Data(_) => 2,
            CliFailure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliFailure::Usage(m) | CliFailure::Data(m) | CliFailure::Runtime(m) => m,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rankpick", version, about = "Screening campaigns over molecular candidate pools")]
struct Cli {
    /// Override the experiment's base_seed (run only).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Campaigns executed concurrently by `run`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output file (fingerprint) or directory (run, report).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip rows whose SMILES fail to parse instead of failing the load.
    #[arg(long, global = true, default_value_t = false)]
    permissive: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a SMILES csv and write one hex fingerprint per row.
    Fingerprint {
        input: PathBuf,
        #[arg(long, default_value = "smiles")]
        smiles_col: String,
        #[arg(long, default_value = "target")]
        target_col: String,
        #[arg(long, default_value_t = 3)]
        radius: u32,
        #[arg(long, default_value_t = 2048)]
        nbits: usize,
    },
    /// Print a dataset's roughness report as csv on standard output.
    Rogi {
        input: PathBuf,
        #[arg(long, default_value = "smiles")]
        smiles_col: String,
        #[arg(long, default_value = "target")]
        target_col: String,
        #[arg(long, default_value_t = 3)]
        radius: u32,
        #[arg(long, default_value_t = 2048)]
        nbits: usize,
        /// Threshold spacing for the dispersion curve.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Execute the campaign grid described by a key = value config file.
    Run { config: PathBuf },
    /// Summarize a directory of trace files into csv tables.
    Report { traces: PathBuf },
}

/// Entry point for the binary; returns the process exit code.
pub fn run_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version surface as clap "errors" but are successes.
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliFailure> {
    if cli.jobs == 0 {
        return Err(CliFailure::Usage("--jobs must be at least 1".into()));
    }
    match cli.command {
        Command::Fingerprint { input, smiles_col, target_col, radius, nbits } => {
            let options = CsvOptions {
                smiles_column: smiles_col,
                target_column: target_col,
                radius,
                nbits,
                permissive: cli.permissive,
                ..CsvOptions::default()
            };
            let out = cli.out.unwrap_or_else(|| PathBuf::from("fingerprints.csv"));
            cmd_fingerprint(&input, &options, &out)
        }
        Command::Rogi { input, smiles_col, target_col, radius, nbits, step } => {
            let options = CsvOptions {
                smiles_column: smiles_col,
                target_column: target_col,
                radius,
                nbits,
                permissive: cli.permissive,
                ..CsvOptions::default()
            };
            cmd_rogi(&input, &options, step)
        }
        Command::Run { config } => cmd_run(&config, cli.seed, cli.jobs, cli.out, cli.permissive),
        Command::Report { traces } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("reports"));
            cmd_report(&traces, &out)
        }
    }
}

fn load_named_csv(
    input: &Path,
    options: &CsvOptions,
    name: Option<&str>,
) -> Result<Dataset, CliFailure> {
    let outcome = load_csv(input, options)
        .map_err(|e| CliFailure::Data(format!("{}: {e}", input.display())))?;
    if !outcome.skipped.is_empty() {
        eprintln!("skipped {} unparseable row(s)", outcome.skipped.len());
    }
    let name = match name {
        Some(n) => n.to_string(),
        None => input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into()),
    };
    Ok(outcome.dataset.with_name(name))
}

fn cmd_fingerprint(input: &Path, options: &CsvOptions, out: &Path) -> Result<(), CliFailure> {
    let dataset = load_named_csv(input, options, None)?;
    let mut writer = csv::Writer::from_path(out)
        .map_err(|e| CliFailure::Runtime(format!("{}: {e}", out.display())))?;
    let io_err = |e: csv::Error| CliFailure::Runtime(format!("{}: {e}", out.display()));
    writer.write_record(["id", "fingerprint"]).map_err(io_err)?;
    for record in dataset.records() {
        writer
            .write_record([record.id.to_string(), record.features.to_hex()])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|e| CliFailure::Runtime(format!("{}: {e}", out.display())))?;
    println!("wrote {} fingerprints to {}", dataset.len(), out.display());
    Ok(())
}

fn cmd_rogi(input: &Path, options: &CsvOptions, step: f64) -> Result<(), CliFailure> {
    let dataset = load_named_csv(input, options, None)?;
    let features: Vec<_> = dataset.records().iter().map(|r| r.features.clone()).collect();
    let report = rogi(&features, &dataset.raw_targets(), step)
        .map_err(|e| CliFailure::Data(e.to_string()))?;

    let mut lines = vec![
        "dataset,n,rogi".to_string(),
        format!("{},{},{}", dataset.name(), report.n, report.rogi),
        String::new(),
        "threshold,dispersion".to_string(),
    ];
    for (t, sigma) in report.thresholds.iter().zip(&report.dispersion) {
        lines.push(format!("{t},{sigma}"));
    }
    print_lines(&lines)
}

/// Writes lines to stdout; a reader hanging up (`... | head`) ends the
/// command successfully instead of reporting a runtime failure.
fn print_lines(lines: &[String]) -> Result<(), CliFailure> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in lines {
        match writeln!(out, "{line}") {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            Err(e) => return Err(CliFailure::Runtime(e.to_string())),
        }
    }
    Ok(())
}

/// Where the records for an experiment come from.
#[derive(Debug, Clone)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        smiles_column: String,
        target_column: String,
        direction: Direction,
        radius: u32,
        nbits: usize,
    },
    Synthetic { n: usize, anchors: usize, cliffs: usize, nbits: usize, seed: u64 },
}

/// Optional backend knobs; absent keys keep library defaults.
#[derive(Debug, Clone, Default)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub mc_train: Option<usize>,
    pub mc_predict: Option<usize>,
    pub minibatch: Option<usize>,
    pub margin: Option<f64>,
    pub kl_weight: Option<f64>,
    pub resample_pairs: Option<bool>,
    pub gp_learning_rate: Option<f64>,
    pub gp_steps: Option<usize>,
}

/// One `run` invocation: a dataset, a grid of model configurations, and
/// the campaign scalars shared by every cell.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub name: Option<String>,
    pub kinds: Vec<SurrogateKind>,
    pub modes: Vec<Mode>,
    pub acquisitions: Vec<Acquisition>,
    pub beta: f64,
    pub n_init: usize,
    pub budget: usize,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub top_k: usize,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub out: Option<PathBuf>,
    pub train: TrainOverrides,
}

/// Key-by-key consumption of a parsed config; leftovers are typos.
struct KeyBag(BTreeMap<String, String>);

impl KeyBag {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| format!("key {key}: {e}")),
        }
    }

    fn parse_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, String>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>, String>
    where
        T::Err: fmt::Display,
    {
        let Some(value) = self.take(key) else {
            return Err(format!("missing required key {key:?}"));
        };
        let mut items = Vec::new();
        for part in value.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            items.push(part.parse::<T>().map_err(|e| format!("key {key}: {e}"))?);
        }
        if items.is_empty() {
            return Err(format!("key {key}: empty list"));
        }
        Ok(items)
    }
}

/// Parses the flat `key = value` experiment format. Blank lines and lines
/// starting with `#` are ignored; list values are comma-separated.
pub fn parse_experiment(text: &str) -> Result<ExperimentConfig, String> {
    let mut map = BTreeMap::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected key = value, got {line:?}", index + 1));
        };
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(format!("duplicate key {key:?}"));
        }
    }
    let mut bag = KeyBag(map);

    let csv = bag.take("csv");
    let synthetic_n = bag.parse::<usize>("synthetic_n")?;
    let source = match (csv, synthetic_n) {
        (Some(path), None) => DatasetSource::Csv {
            path: PathBuf::from(path),
            smiles_column: bag.take("smiles_column").unwrap_or_else(|| "smiles".into()),
            target_column: bag.take("target_column").unwrap_or_else(|| "target".into()),
            direction: bag.parse_or("direction", Direction::Maximize)?,
            radius: bag.parse_or("radius", 3)?,
            nbits: bag.parse_or("nbits", 2048)?,
        },
        (None, Some(n)) => DatasetSource::Synthetic {
            n,
            anchors: bag.parse_or("synthetic_anchors", 10)?,
            cliffs: bag.parse_or("synthetic_cliffs", 0)?,
            nbits: bag.parse_or("synthetic_nbits", 2048)?,
            seed: bag.parse_or("synthetic_seed", 0)?,
        },
        (Some(_), Some(_)) => {
            return Err("config names both csv and synthetic_n; pick one dataset source".into())
        }
        (None, None) => {
            return Err("config needs a dataset source: csv = <path> or synthetic_n = <n>".into())
        }
    };

    let config = ExperimentConfig {
        source,
        name: bag.take("name"),
        kinds: bag.list("kinds")?,
        modes: bag.list("modes")?,
        acquisitions: bag.list("acquisitions")?,
        beta: bag.parse_or("beta", 0.3)?,
        n_init: bag.parse_or("n_init", 10)?,
        budget: bag.parse_or("budget", 100)?,
        batch_size: bag.parse_or("batch_size", 5)?,
        test_fraction: bag.parse_or("test_fraction", 0.15)?,
        top_k: bag.parse_or("top_k", 100)?,
        n_seeds: bag.parse_or("n_seeds", 20)?,
        base_seed: bag.parse_or("base_seed", 0)?,
        out: bag.take("out").map(PathBuf::from),
        train: TrainOverrides {
            learning_rate: bag.parse("learning_rate")?,
            max_epochs: bag.parse("max_epochs")?,
            patience: bag.parse("patience")?,
            mc_train: bag.parse("mc_train")?,
            mc_predict: bag.parse("mc_predict")?,
            minibatch: bag.parse("minibatch")?,
            margin: bag.parse("margin")?,
            kl_weight: bag.parse("kl_weight")?,
            resample_pairs: bag.parse("resample_pairs")?,
            gp_learning_rate: bag.parse("gp_learning_rate")?,
            gp_steps: bag.parse("gp_steps")?,
        },
    };

    if !bag.0.is_empty() {
        let keys: Vec<&str> = bag.0.keys().map(String::as_str).collect();
        return Err(format!("unknown key(s): {}", keys.join(", ")));
    }
    if config.n_seeds == 0 {
        return Err("n_seeds must be at least 1".into());
    }
    Ok(config)
}

/// One grid cell at one seed.
#[derive(Debug, Clone, Copy)]
struct Task {
    kind: SurrogateKind,
    mode: Mode,
    acquisition: Acquisition,
    seed: u64,
}

impl ExperimentConfig {
    fn load_dataset(&self, permissive: bool) -> Result<Dataset, CliFailure> {
        match &self.source {
            DatasetSource::Csv { path, smiles_column, target_column, direction, radius, nbits } => {
                let options = CsvOptions {
                    smiles_column: smiles_column.clone(),
                    target_column: target_column.clone(),
                    direction: *direction,
                    radius: *radius,
                    nbits: *nbits,
                    permissive,
                };
                load_named_csv(path, &options, self.name.as_deref())
            }
            DatasetSource::Synthetic { n, anchors, cliffs, nbits, seed } => {
                let dataset = generate_synthetic(*n, *anchors, *cliffs, *nbits, *seed)
                    .map_err(|e| CliFailure::Usage(e.to_string()))?;
                Ok(match &self.name {
                    Some(name) => dataset.with_name(name.clone()),
                    None => dataset,
                })
            }
        }
    }

    /// Everything that can be rejected before the first campaign starts.
    fn validate(&self, dataset_len: usize) -> Result<(), CliFailure> {
        let usage = |msg: String| Err(CliFailure::Usage(msg));
        if self.kinds.contains(&SurrogateKind::Gp) && self.modes.contains(&Mode::Ranking) {
            return usage(
                "grid contains gp x ranking; gp surrogates are regression-only, run them separately"
                    .into(),
            );
        }
        // Any cell stands in for the shared scalars.
        let probe = self.campaign_config(&Task {
            kind: self.kinds[0],
            mode: self.modes[0],
            acquisition: self.acquisitions[0],
            seed: self.base_seed,
        });
        if let Err(e) = probe.validate() {
            return usage(e.to_string());
        }
        let test_size = (dataset_len as f64 * self.test_fraction).round() as usize;
        if test_size < 2 || test_size >= dataset_len {
            return usage(format!(
                "test_fraction {} of {dataset_len} records gives {test_size} test rows; need 2..{dataset_len}",
                self.test_fraction
            ));
        }
        let pool = dataset_len - test_size;
        if pool < self.n_init + self.budget {
            return usage(format!(
                "pool of {pool} cannot cover n_init {} + budget {}",
                self.n_init, self.budget
            ));
        }
        if self.top_k > pool {
            return usage(format!("top_k {} exceeds the {pool}-candidate pool", self.top_k));
        }
        Ok(())
    }

    /// Grid x seeds in declaration order, seeds innermost.
    fn tasks(&self) -> Vec<Task> {
        let mut tasks = Vec::new();
        for &kind in &self.kinds {
            for &mode in &self.modes {
                for &acquisition in &self.acquisitions {
                    for i in 0..self.n_seeds {
                        tasks.push(Task {
                            kind,
                            mode,
                            acquisition,
                            seed: self.base_seed + i as u64,
                        });
                    }
                }
            }
        }
        tasks
    }

    fn campaign_config(&self, task: &Task) -> CampaignConfig {
        let mut surrogate = SurrogateConfig::new(task.kind, task.mode);
        surrogate.seed = task.seed;
        let t = &mut surrogate.train;
        let o = &self.train;
        if let Some(v) = o.learning_rate {
            t.learning_rate = v;
        }
        if let Some(v) = o.max_epochs {
            t.max_epochs = v;
        }
        if let Some(v) = o.patience {
            t.patience = v;
        }
        if let Some(v) = o.mc_train {
            t.mc_samples_train = v;
        }
        if let Some(v) = o.mc_predict {
            t.mc_samples_predict = v;
        }
        if let Some(v) = o.minibatch {
            t.minibatch = v;
        }
        if let Some(v) = o.margin {
            t.margin = v;
        }
        if let Some(v) = o.kl_weight {
            t.kl_weight = Some(v);
        }
        if let Some(v) = o.resample_pairs {
            t.resample_pairs_each_epoch = v;
        }
        if let Some(v) = o.gp_learning_rate {
            surrogate.gp.learning_rate = v;
        }
        if let Some(v) = o.gp_steps {
            surrogate.gp.steps = v;
        }
        let mut config = CampaignConfig::new(surrogate, task.acquisition);
        config.beta = self.beta;
        config.n_init = self.n_init;
        config.budget = self.budget;
        config.batch_size = self.batch_size;
        config.test_fraction = self.test_fraction;
        config.top_k = self.top_k;
        config.seed = task.seed;
        config
    }
}

fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '-' })
        .collect()
}

fn trace_file_name(dataset: &str, task: &Task) -> String {
    format!(
        "{}_{}_{}_{}_{}.json",
        sanitize_name(dataset),
        task.kind,
        task.mode,
        task.acquisition,
        task.seed
    )
}

#[derive(Debug)]
struct ManifestRow {
    file: String,
    dataset: String,
    kind: SurrogateKind,
    mode: Mode,
    acquisition: Acquisition,
    seed: u64,
    status: String,
    io_failed: bool,
}

fn execute_task(
    dataset: &Dataset,
    experiment: &ExperimentConfig,
    task: &Task,
    out_dir: &Path,
) -> ManifestRow {
    let config = experiment.campaign_config(task);
    let file = trace_file_name(dataset.name(), task);
    let path = out_dir.join(&file);
    let write = |trace: &CampaignTrace| -> Result<(), String> {
        let mut json = serde_json::to_string_pretty(trace).map_err(|e| e.to_string())?;
        json.push('\n');
        fs::write(&path, json).map_err(|e| e.to_string())
    };
    let (status, io_failed) = match run_campaign(dataset, &config, &mut config.rng()) {
        Ok(trace) => match write(&trace) {
            Ok(()) => (trace.status, false),
            Err(e) => (format!("failed: writing {file}: {e}"), true),
        },
        // Partial traces are still written; their status says why they died.
        Err(CampaignError::Aborted { trace, .. }) => match write(&trace) {
            Ok(()) => (trace.status.clone(), false),
            Err(e) => (format!("failed: writing {file}: {e}"), true),
        },
        Err(other) => (format!("failed: {other}"), false),
    };
    ManifestRow {
        file,
        dataset: dataset.name().to_string(),
        kind: task.kind,
        mode: task.mode,
        acquisition: task.acquisition,
        seed: task.seed,
        status,
        io_failed,
    }
}

fn cmd_run(
    config_path: &Path,
    seed_override: Option<u64>,
    jobs: usize,
    out_override: Option<PathBuf>,
    permissive: bool,
) -> Result<(), CliFailure> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliFailure::Usage(format!("{}: {e}", config_path.display())))?;
    let mut experiment = parse_experiment(&text).map_err(CliFailure::Usage)?;
    if let Some(seed) = seed_override {
        experiment.base_seed = seed;
    }
    let out_dir = out_override
        .or_else(|| experiment.out.clone())
        .unwrap_or_else(|| PathBuf::from("traces"));

    let dataset = experiment.load_dataset(permissive)?;
    experiment.validate(dataset.len())?;
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliFailure::Runtime(format!("{}: {e}", out_dir.display())))?;

    let tasks = experiment.tasks();
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<ManifestRow>> = Mutex::new(Vec::with_capacity(tasks.len()));
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len()).max(1) {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= tasks.len() {
                    break;
                }
                let row = execute_task(&dataset, &experiment, &tasks[index], &out_dir);
                rows.lock().unwrap().push(row);
            });
        }
    });

    let mut rows = rows.into_inner().unwrap();
    rows.sort_by(|a, b| a.file.cmp(&b.file));
    let manifest_path = out_dir.join("manifest.csv");
    let manifest_err = |e: csv::Error| CliFailure::Runtime(format!("{}: {e}", manifest_path.display()));
    let mut manifest = csv::Writer::from_path(&manifest_path)
        .map_err(|e| CliFailure::Runtime(format!("{}: {e}", manifest_path.display())))?;
    manifest
        .write_record(["file", "dataset", "kind", "mode", "acquisition", "seed", "status"])
        .map_err(manifest_err)?;
    for row in &rows {
        manifest
            .write_record([
                row.file.clone(),
                row.dataset.clone(),
                row.kind.to_string(),
                row.mode.to_string(),
                row.acquisition.to_string(),
                row.seed.to_string(),
                row.status.clone(),
            ])
            .map_err(manifest_err)?;
    }
    manifest
        .flush()
        .map_err(|e| CliFailure::Runtime(format!("{}: {e}", manifest_path.display())))?;

    let ok = rows.iter().filter(|r| r.status == crate::bayesopt::STATUS_OK).count();
    println!(
        "{} campaigns: {} completed, {} failed or invalid; traces in {}",
        rows.len(),
        ok,
        rows.len() - ok,
        out_dir.display()
    );
    let io_failures = rows.iter().filter(|r| r.io_failed).count();
    if io_failures > 0 {
        return Err(CliFailure::Runtime(format!(
            "{io_failures} trace file(s) could not be written; see manifest"
        )));
    }
    Ok(())
}

fn read_traces(dir: &Path) -> Result<Vec<CampaignTrace>, CliFailure> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliFailure::Data(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliFailure::Data(format!("no trace files in {}", dir.display())));
    }
    let mut traces = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path)
            .map_err(|e| CliFailure::Data(format!("{}: {e}", path.display())))?;
        let trace: CampaignTrace = serde_json::from_str(&text)
            .map_err(|e| CliFailure::Data(format!("unreadable trace {}: {e}", path.display())))?;
        traces.push(trace);
    }
    Ok(traces)
}

type GroupKey = (String, String, String, String);

fn grouped<'a>(traces: &[&'a CampaignTrace]) -> BTreeMap<GroupKey, Vec<&'a CampaignTrace>> {
    let mut groups: BTreeMap<GroupKey, Vec<&CampaignTrace>> = BTreeMap::new();
    for &trace in traces {
        let key = (
            trace.dataset.clone(),
            trace.config.surrogate.kind.to_string(),
            trace.config.surrogate.mode.to_string(),
            trace.config.acquisition.to_string(),
        );
        groups.entry(key).or_default().push(trace);
    }
    groups
}

fn group_aucs(traces: &[&CampaignTrace]) -> Result<Vec<f64>, CliFailure> {
    traces
        .iter()
        .map(|t| t.bo_auc().map_err(|e| CliFailure::Data(e.to_string())))
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliFailure> {
    csv::Writer::from_path(path)
        .map_err(|e| CliFailure::Runtime(format!("{}: {e}", path.display())))
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliFailure> {
    let io_err = |e: csv::Error| CliFailure::Runtime(format!("{}: {e}", path.display()));
    let mut writer = csv_writer(path)?;
    writer.write_record(header).map_err(io_err)?;
    for row in rows {
        writer.write_record(row).map_err(io_err)?;
    }
    writer.flush().map_err(|e| CliFailure::Runtime(format!("{}: {e}", path.display())))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Better / similar / worse for ranking relative to regression.
fn verdict(p: f64, mean_ranking: f64, mean_regression: f64) -> &'static str {
    if p < 0.05 {
        if mean_ranking > mean_regression {
            "better"
        } else {
            "worse"
        }
    } else {
        "similar"
    }
}

fn cmd_report(traces_dir: &Path, out_dir: &Path) -> Result<(), CliFailure> {
    let traces = read_traces(traces_dir)?;
    let completed: Vec<&CampaignTrace> = traces.iter().filter(|t| t.completed()).collect();
    if completed.is_empty() {
        return Err(CliFailure::Data("no completed traces to report on".into()));
    }
    fs::create_dir_all(out_dir)
        .map_err(|e| CliFailure::Runtime(format!("{}: {e}", out_dir.display())))?;
    let groups = grouped(&completed);

    // (a) Mean BO-AUC with a 95% confidence half-width per configuration.
    let mut summary_rows = Vec::new();
    for ((dataset, kind, mode, acq), members) in &groups {
        let aucs = group_aucs(members)?;
        let summary =
            AucSummary::from_values(&aucs).map_err(|e| CliFailure::Data(e.to_string()))?;
        summary_rows.push(vec![
            dataset.clone(),
            kind.clone(),
            mode.clone(),
            acq.clone(),
            summary.n_seeds.to_string(),
            summary.mean.to_string(),
            summary.ci_half_width.to_string(),
        ]);
    }
    write_rows(
        &out_dir.join("bo_auc_summary.csv"),
        &["dataset", "kind", "mode", "acquisition", "n_seeds", "mean_bo_auc", "ci95_half_width"],
        &summary_rows,
    )?;

    // (b) Ranking vs regression per (dataset, kind, acquisition).
    let mut paired: BTreeMap<(String, String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((dataset, kind, mode, acq), members) in &groups {
        let aucs = group_aucs(members)?;
        let entry = paired.entry((dataset.clone(), kind.clone(), acq.clone())).or_default();
        match mode.as_str() {
            "ranking" => entry.0 = aucs,
            _ => entry.1 = aucs,
        }
    }
    let mut comparison_rows = Vec::new();
    for ((dataset, kind, acq), (ranking, regression)) in &paired {
        // A p-value needs at least two seeds on each side.
        if ranking.len() < 2 || regression.len() < 2 {
            continue;
        }
        let (t, p) = t_test(ranking, regression).map_err(|e| CliFailure::Data(e.to_string()))?;
        let mean_ranking = mean(ranking);
        let mean_regression = mean(regression);
        comparison_rows.push(vec![
            dataset.clone(),
            kind.clone(),
            acq.clone(),
            ranking.len().to_string(),
            regression.len().to_string(),
            mean_ranking.to_string(),
            mean_regression.to_string(),
            t.to_string(),
            p.to_string(),
            verdict(p, mean_ranking, mean_regression).to_string(),
        ]);
    }
    write_rows(
        &out_dir.join("mode_comparison.csv"),
        &[
            "dataset",
            "kind",
            "acquisition",
            "n_ranking",
            "n_regression",
            "mean_ranking",
            "mean_regression",
            "t_statistic",
            "p_value",
            "verdict",
        ],
        &comparison_rows,
    )?;

    // (c) Final held-out tau against final discovery fraction across traces.
    let taus: Vec<f64> = completed.iter().filter_map(|t| t.final_test_tau()).collect();
    let fracs: Vec<f64> = completed.iter().filter_map(|t| t.final_frac_top_k()).collect();
    let correlation_row = if taus.len() != fracs.len() || taus.len() < 3 {
        vec![
            taus.len().to_string(),
            String::new(),
            String::new(),
            "need at least 3 traces with rounds".into(),
        ]
    } else {
        match pearson_r(&taus, &fracs) {
            Ok((r, p)) => vec![taus.len().to_string(), r.to_string(), p.to_string(), String::new()],
            Err(e) => {
                vec![taus.len().to_string(), String::new(), String::new(), e.to_string()]
            }
        }
    };
    write_rows(
        &out_dir.join("tau_correlation.csv"),
        &["n_traces", "pearson_r", "p_value", "note"],
        &[correlation_row],
    )?;

    // (d) Plot-ready mean discovery curves.
    let mut curve_rows = Vec::new();
    for ((dataset, kind, mode, acq), members) in &groups {
        let longest = members.iter().map(|t| t.evaluations.len()).max().unwrap_or(0);
        for index in 0..longest {
            let fracs: Vec<f64> = members
                .iter()
                .filter_map(|t| t.evaluations.get(index).map(|e| e.frac_top_k))
                .collect();
            curve_rows.push(vec![
                dataset.clone(),
                kind.clone(),
                mode.clone(),
                acq.clone(),
                (index + 1).to_string(),
                mean(&fracs).to_string(),
            ]);
        }
    }
    write_rows(
        &out_dir.join("discovery_curves.csv"),
        &["dataset", "kind", "mode", "acquisition", "eval_index", "mean_frac_top_k"],
        &curve_rows,
    )?;

    println!("wrote 4 report files to {}", out_dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE_CONFIG: &str = "\
# toy grid
synthetic_n = 60
synthetic_anchors = 5
synthetic_cliffs = 0
synthetic_nbits = 32
synthetic_seed = 1
kinds = gp
modes = regression
acquisitions = greedy
n_init = 2
budget = 10
batch_size = 5
top_k = 10
n_seeds = 2
base_seed = 7
";

    #[test]
    fn experiment_parses_with_defaults() {
        let config = parse_experiment(BASE_CONFIG).unwrap();
        assert!(matches!(
            config.source,
            DatasetSource::Synthetic { n: 60, anchors: 5, cliffs: 0, nbits: 32, seed: 1 }
        ));
        assert_eq!(config.kinds, vec![SurrogateKind::Gp]);
        assert_eq!(config.modes, vec![Mode::Regression]);
        assert_eq!(config.acquisitions, vec![Acquisition::Greedy]);
        assert_eq!(config.beta, 0.3);
        assert_eq!(config.test_fraction, 0.15);
        assert_eq!(config.n_seeds, 2);
        assert_eq!(config.base_seed, 7);
        assert!(config.train.max_epochs.is_none());
    }

    #[test]
    fn experiment_rejects_malformed_text() {
        assert!(parse_experiment("kinds").unwrap_err().contains("key = value"));
        let dup = format!("{BASE_CONFIG}n_seeds = 3\n");
        assert!(parse_experiment(&dup).unwrap_err().contains("duplicate"));
        let unknown = format!("{BASE_CONFIG}spam = 1\n");
        assert!(parse_experiment(&unknown).unwrap_err().contains("unknown key"));
        let both = format!("{BASE_CONFIG}csv = x.csv\n");
        assert!(parse_experiment(&both).unwrap_err().contains("pick one"));
        let neither = BASE_CONFIG.replace("synthetic_n = 60\n", "");
        assert!(parse_experiment(&neither).unwrap_err().contains("dataset source"));
        let bad_kind = BASE_CONFIG.replace("kinds = gp", "kinds = rf");
        assert!(parse_experiment(&bad_kind).unwrap_err().contains("surrogate kind"));
        let no_seeds = format!("{}\nn_seeds = 0", BASE_CONFIG.replace("n_seeds = 2\n", ""));
        assert!(parse_experiment(&no_seeds).unwrap_err().contains("n_seeds"));
    }

    #[test]
    fn validation_rejects_gp_ranking_and_oversized_grids() {
        let mut config = parse_experiment(BASE_CONFIG).unwrap();
        config.modes = vec![Mode::Regression, Mode::Ranking];
        assert!(matches!(config.validate(60), Err(CliFailure::Usage(_))));

        let mut config = parse_experiment(BASE_CONFIG).unwrap();
        config.budget = 60;
        assert!(matches!(config.validate(60), Err(CliFailure::Usage(_))));

        let mut config = parse_experiment(BASE_CONFIG).unwrap();
        config.top_k = 52;
        assert!(matches!(config.validate(60), Err(CliFailure::Usage(_))));

        let config = parse_experiment(BASE_CONFIG).unwrap();
        assert!(config.validate(60).is_ok());
    }

    #[test]
    fn tasks_enumerate_grid_times_seeds() {
        let mut config = parse_experiment(BASE_CONFIG).unwrap();
        config.kinds = vec![SurrogateKind::Mlp, SurrogateKind::Bnn];
        config.acquisitions = vec![Acquisition::Ucb, Acquisition::Ei];
        let tasks = config.tasks();
        assert_eq!(tasks.len(), 2 * 1 * 2 * 2);
        assert_eq!(tasks[0].seed, 7);
        assert_eq!(tasks[1].seed, 8);
        let campaign = config.campaign_config(&tasks[0]);
        assert_eq!(campaign.seed, 7);
        assert_eq!(campaign.surrogate.seed, 7);
    }

    #[test]
    fn trace_file_names_are_flat_and_safe() {
        let task = Task {
            kind: SurrogateKind::Bnn,
            mode: Mode::Ranking,
            acquisition: Acquisition::Ucb,
            seed: 3,
        };
        assert_eq!(trace_file_name("zinc 10k", &task), "zinc-10k_bnn_ranking_ucb_3.json");
    }

    #[test]
    fn verdict_follows_significance_and_sign() {
        assert_eq!(verdict(0.01, 0.6, 0.4), "better");
        assert_eq!(verdict(0.01, 0.4, 0.6), "worse");
        assert_eq!(verdict(0.2, 0.6, 0.4), "similar");
        assert_eq!(verdict(1.0, 0.5, 0.5), "similar");
    }

    #[test]
    fn run_and_report_produce_deterministic_files() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("experiment.conf");
        fs::write(&config_path, BASE_CONFIG).unwrap();

        let traces_a = dir.path().join("a");
        let traces_b = dir.path().join("b");
        cmd_run(&config_path, None, 1, Some(traces_a.clone()), false).unwrap();
        cmd_run(&config_path, None, 4, Some(traces_b.clone()), false).unwrap();

        let list = |p: &Path| {
            let mut names: Vec<String> = fs::read_dir(p)
                .unwrap()
                .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                .collect();
            names.sort();
            names
        };
        let names = list(&traces_a);
        assert_eq!(names.len(), 3, "2 traces + manifest: {names:?}");
        assert_eq!(names, list(&traces_b));
        for name in &names {
            let a = fs::read(traces_a.join(name)).unwrap();
            let b = fs::read(traces_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between --jobs 1 and --jobs 4");
        }

        let reports = dir.path().join("reports");
        cmd_report(&traces_a, &reports).unwrap();
        let report_names = list(&reports);
        assert_eq!(
            report_names,
            vec![
                "bo_auc_summary.csv",
                "discovery_curves.csv",
                "mode_comparison.csv",
                "tau_correlation.csv"
            ]
        );
        let summary = fs::read_to_string(reports.join("bo_auc_summary.csv")).unwrap();
        let mut lines = summary.lines();
        assert_eq!(
            lines.next().unwrap(),
            "dataset,kind,mode,acquisition,n_seeds,mean_bo_auc,ci95_half_width"
        );
        let row = lines.next().unwrap();
        assert!(row.contains("gp,regression,greedy,2,"), "{row}");
        // Single mode: nothing to compare.
        let comparison = fs::read_to_string(reports.join("mode_comparison.csv")).unwrap();
        assert_eq!(comparison.lines().count(), 1);
    }

    #[test]
    fn report_rejects_empty_or_missing_directories() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("reports");
        assert!(matches!(
            cmd_report(&dir.path().join("nope"), &out),
            Err(CliFailure::Data(_))
        ));
        let empty = dir.path().join("empty");
        fs::create_dir(&empty).unwrap();
        assert!(matches!(cmd_report(&empty, &out), Err(CliFailure::Data(_))));
    }
}
