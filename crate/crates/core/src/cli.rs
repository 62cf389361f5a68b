//! Library side of the `rmix` binary: config resolution, the train / eval /
//! preview / gradcheck / sweep verbs, and exit-code mapping.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::data::loader::assemble;
use crate::data::{epoch_order, ppm, AugPolicy, BatchPlan};
use crate::error::{Error, Result};
use crate::gradcheck::{run_suite, GradReport, SuiteOptions};
use crate::mix::{cutmix_step, mixup_step, recursive_mix_step, recursive_mix_with_box, MixBox, MixMode, MixOutcome, MixState};
use crate::nn::checkpoint;
use crate::trainer::{build_model, evaluate, load_datasets, stream_rng, train_on, EpochMetrics, Observer, RunMetrics, Stream, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "model.rmck";
pub const CONFIG_SNAPSHOT: &str = "config.json";

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Data { .. } => EXIT_DATA,
        _ => EXIT_CONFIG,
    }
}

/// Splits `key=value`.
pub fn parse_override(raw: &str) -> Result<(String, String)> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::Config {
            field: raw.to_string(),
            message: "override must look like key=value".into(),
        }),
    }
}

/// Defaults, then the config file, then `--set` overrides; validated.
pub fn resolve_config(path: Option<&Path>, overrides: &[String]) -> Result<TrainConfig> {
    let mut config = match path {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    for raw in overrides {
        let (k, v) = parse_override(raw)?;
        config.set(&k, &v)?;
    }
    config.validate()?;
    Ok(config)
}

/// Rewrites the metrics CSV after every epoch so an interrupted run keeps its rows.
struct CsvWriter {
    path: PathBuf,
    metrics: RunMetrics,
}

impl Observer for CsvWriter {
    fn on_epoch(&mut self, row: &EpochMetrics) -> Result<()> {
        self.metrics.rows.push(*row);
        self.metrics.write_csv(&self.path)
    }
}

/// Trains and writes `metrics.csv`, `model.rmck` and `config.json` into the
/// output directory. The dataset is loaded before anything is written.
pub fn run_train(config: &TrainConfig) -> Result<RunMetrics> {
    config.validate()?;
    let (train_set, test_set) = load_datasets(config)?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    config.save(&dir.join(CONFIG_SNAPSHOT))?;
    let mut writer = CsvWriter {
        path: dir.join(METRICS_FILE),
        metrics: RunMetrics::default(),
    };
    let outcome = train_on(config, &train_set, &test_set, &mut writer)?;
    checkpoint::save(&outcome.model, &dir.join(CHECKPOINT_FILE), config.deploy_checkpoint)?;
    Ok(outcome.metrics)
}

/// Test-set (top-1, top-5) error of a saved checkpoint.
pub fn run_eval(config: &TrainConfig, checkpoint_path: &Path) -> Result<(f64, f64)> {
    let (_, test_set) = load_datasets(config)?;
    let records = checkpoint::load(checkpoint_path)?;
    let mut model = build_model(&TrainConfig { consistency: false, ..config.clone() }, test_set.class_count);
    checkpoint::restore(&mut model, &records)?;
    evaluate(&model, &test_set, config.eval_batch_size)
}

/// Preview knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct PreviewOptions {
    /// Number of successive iterations to emit (t = 0..count).
    pub count: usize,
    /// Samples written per iteration.
    pub samples: usize,
    /// Replace the sampled λ and box with a centred box of this area ratio.
    pub forced_lambda: Option<f64>,
    pub out_dir: PathBuf,
}

/// Writes `iter_<t>_sample_<j>.ppm` for the first `count` mixed training
/// batches, using the same data order and augmentation as training.
pub fn run_preview(config: &TrainConfig, opts: &PreviewOptions) -> Result<Vec<PathBuf>> {
    config.validate()?;
    if let Some(l) = opts.forced_lambda {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::Config {
                field: "lambda".into(),
                message: format!("{l} outside [0, 1]"),
            });
        }
    }
    let (train_set, _) = load_datasets(config)?;
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let (h, w) = train_set.image_size();
    let policy = if config.augment {
        AugPolicy::for_size(h.min(w))
    } else {
        AugPolicy::disabled()
    };
    let mix_config = config.mix_config();
    let mut aug_rng = stream_rng(config.seed, Stream::Augment);
    let mut mix_rng = stream_rng(config.seed, Stream::Mix);
    let mut state = MixState::new();
    let mut paths = Vec::new();
    let mut epoch = 0;
    let mut batches = Vec::new().into_iter();
    for t in 0..opts.count {
        let indices = match batches.next() {
            Some(b) => b,
            None => {
                let order = epoch_order(train_set.len(), config.seed, epoch);
                epoch += 1;
                batches = BatchPlan::new(&order, config.batch_size, config.drop_last).batches.into_iter();
                batches.next().ok_or_else(|| Error::Config {
                    field: "batch_size".into(),
                    message: "larger than the training set with drop_last".into(),
                })?
            }
        };
        let (images, labels) = assemble(&train_set, &indices, &policy, &mut aug_rng)?;
        let outcome = match (opts.forced_lambda, config.mode) {
            (Some(l), _) => {
                let b = MixBox::from_center(w as f64 / 2.0, h as f64 / 2.0, l, w, h)?;
                recursive_mix_with_box(&mut state, &images, &labels, &b, &mix_config)?
            }
            (None, MixMode::RecursiveMix) => recursive_mix_step(&mut state, &images, &labels, &mut mix_rng, &mix_config)?,
            (None, MixMode::CutMix) => cutmix_step(&images, &labels, &mut mix_rng, &mix_config)?,
            (None, MixMode::Mixup) => mixup_step(&images, &labels, &mut mix_rng, config.beta)?,
            (None, MixMode::None) => MixOutcome {
                images,
                labels,
                mix_box: None,
                lambda: 0.0,
                hist_logits: None,
            },
        };
        for j in 0..opts.samples.min(indices.len()) {
            let path = opts.out_dir.join(format!("iter_{t}_sample_{j}.ppm"));
            ppm::write_image(&path, outcome.images.item(j), h, w, &train_set.stats)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

/// Double-precision suite (gating) and single-precision suite (informational).
pub fn run_gradcheck(seed: u64, sabotage: bool) -> Result<(GradReport, GradReport)> {
    let f64_report = run_suite::<f64>(SuiteOptions {
        seed,
        sabotage,
        ..SuiteOptions::for_precision::<f64>()
    })?;
    let f32_report = run_suite::<f32>(SuiteOptions {
        seed,
        sabotage,
        ..SuiteOptions::for_precision::<f32>()
    })?;
    Ok((f64_report, f32_report))
}

fn round_decimal(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// Values of a sweep override: `a..b[:step]` (inclusive, default step 0.1),
/// `v1,v2,...`, or a single value. JSON arrays are kept whole.
pub fn expand_values(value: &str) -> Result<Vec<String>> {
    if value.starts_with('[') || value.starts_with('"') {
        return Ok(vec![value.to_string()]);
    }
    if let Some((a, rest)) = value.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (b, s),
            None => (rest, "0.1"),
        };
        let parse = |s: &str| s.trim().parse::<f64>().ok();
        if let (Some(a), Some(b), Some(step)) = (parse(a), parse(b), parse(step)) {
            if !(step > 0.0) || b < a {
                return Err(Error::Config {
                    field: value.into(),
                    message: "range needs a <= b and a positive step".into(),
                });
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            return Ok((0..=n).map(|i| round_decimal(a + i as f64 * step).to_string()).collect());
        }
    }
    Ok(value.split(',').map(|s| s.trim().to_string()).collect())
}

/// One run per point of the cartesian product of all override values. Each
/// run writes into `<output_dir>/<key>=<value>[_<key>=<value>...]`.
pub fn sweep_points(overrides: &[String]) -> Result<Vec<Vec<(String, String)>>> {
    let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for raw in overrides {
        let (k, v) = parse_override(raw)?;
        let values = expand_values(&v)?;
        points = points
            .into_iter()
            .flat_map(|p| {
                let k = &k;
                values.iter().map(move |val| {
                    let mut q = p.clone();
                    q.push((k.clone(), val.clone()));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

pub struct SweepRun {
    pub dir: PathBuf,
    pub config: TrainConfig,
    pub result: Result<RunMetrics>,
}

/// Resolves every sweep point first (config errors abort before any run),
/// then trains them on `jobs` worker threads. Overrides with a single value
/// apply to every run and do not appear in the run directory names.
pub fn run_sweep(base: &TrainConfig, overrides: &[String], jobs: usize) -> Result<Vec<SweepRun>> {
    let mut base = base.clone();
    let mut swept = Vec::new();
    for raw in overrides {
        let (k, v) = parse_override(raw)?;
        match expand_values(&v)?.as_slice() {
            [single] => base.set(&k, single)?,
            _ => swept.push(raw.clone()),
        }
    }
    let mut configs = Vec::new();
    for point in sweep_points(&swept)? {
        let mut config = base.clone();
        let mut name = Vec::new();
        for (k, v) in &point {
            config.set(k, v)?;
            name.push(format!("{k}={v}"));
        }
        config.output_dir = base.output_dir.join(if name.is_empty() { "run".into() } else { name.join("_") });
        config.validate()?;
        configs.push(config);
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunMetrics>>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, configs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(config) = configs.get(i) else { break };
                let r = run_train(config);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("no poisoned workers");
    Ok(configs
        .into_iter()
        .zip(results)
        .map(|(config, r)| SweepRun {
            dir: config.output_dir.clone(),
            config,
            result: r.expect("every run visited"),
        })
        .collect())
}
