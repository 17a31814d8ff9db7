//! Accuracy metrics, evaluation, and the ablation/benchmark harnesses.
//!
//! Timing numbers here are single-process CPU wall times measured with a
//! monotonic clock; they characterize this implementation on this machine
//! and are not comparable to accelerator benchmarks.

use std::time::Instant;

use crate::augment::AugmentationConfig;
use crate::dataset::LinearSystemSample;
use crate::dense::DenseVector;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Predictor, TrainedModel};
use crate::solvers::cg_core;
use crate::sparse::SparseSymMatrix;
use crate::train::{prepare_sample, train, LossMode, PreparedSample, TrainConfig};

pub const TIMING_DISCLAIMER: &str =
    "single-process CPU wall times; not comparable across machines or to accelerator results";

/// Mean absolute component error `|x - x_hat|_1 / n`.
pub fn metric_eps(truth: &DenseVector, predicted: &DenseVector) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            context: "metric",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    Ok(truth.sub(predicted).norm1() / truth.len() as f64)
}

/// Relative Euclidean error `|x - x_hat|_2 / |x|_2`.
pub fn metric_delta(truth: &DenseVector, predicted: &DenseVector) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            context: "metric",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let denom = truth.norm2();
    if denom == 0.0 {
        return Err(Error::ZeroVector {
            context: "relative error",
        });
    }
    Ok(truth.sub(predicted).norm2() / denom)
}

/// Maps in input order, spreading work over a thread pool when `threads > 1`.
pub(crate) fn ordered_map<T, U, F>(items: &[T], threads: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    if threads > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(&f).collect());
        }
    }
    items.iter().map(&f).collect()
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn sample_label(s: &LinearSystemSample) -> String {
    format!("{}-{}", s.meta.generator, s.meta.seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEval {
    pub label: String,
    pub eps: f64,
    pub delta: f64,
    pub seconds: f64,
}

/// Per-sample metrics plus their exact means, in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset_id: String,
    pub model_id: String,
    pub rows: Vec<SampleEval>,
    pub mean_eps: f64,
    pub mean_delta: f64,
    pub mean_seconds: f64,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,eps,delta,seconds\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.label, r.eps, r.delta, r.seconds));
        }
        out.push_str(&format!(
            "mean,{},{},{}\n",
            self.mean_eps, self.mean_delta, self.mean_seconds
        ));
        out
    }
}

/// Runs the full inference pipeline on every sample and scores it against the
/// stored ground truth. Aggregates are reduced in corpus order regardless of
/// thread count.
pub fn evaluate(
    predictor: &(dyn Predictor + Sync),
    samples: &[LinearSystemSample],
    dataset_id: impl Into<String>,
    model_id: impl Into<String>,
    threads: usize,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig(
            "cannot evaluate an empty sample set".into(),
        ));
    }
    let rows: Result<Vec<SampleEval>> = ordered_map(samples, threads, |s| {
        let t0 = Instant::now();
        let pred = predictor.predict(&s.a, &s.b)?;
        let seconds = t0.elapsed().as_secs_f64();
        Ok(SampleEval {
            label: sample_label(s),
            eps: metric_eps(&s.x, &pred.x_hat)?,
            delta: metric_delta(&s.x, &pred.x_hat)?,
            seconds,
        })
    })
    .into_iter()
    .collect();
    let rows = rows?;
    let n = rows.len() as f64;
    Ok(EvalReport {
        dataset_id: dataset_id.into(),
        model_id: model_id.into(),
        mean_eps: rows.iter().map(|r| r.eps).sum::<f64>() / n,
        mean_delta: rows.iter().map(|r| r.delta).sum::<f64>() / n,
        mean_seconds: rows.iter().map(|r| r.seconds).sum::<f64>() / n,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct AblationConfig {
    /// Augmentation preset names, one trained model per entry.
    pub presets: Vec<String>,
    /// Additionally trains the default preset with the cosine term alone.
    pub with_loss_ablation: bool,
    pub hidden: usize,
    pub num_blocks: usize,
    pub model_seed: u64,
    pub train: TrainConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            presets: AugmentationConfig::PRESETS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            with_loss_ablation: true,
            hidden: 16,
            num_blocks: 2,
            model_seed: 0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub eps: f64,
    pub delta: f64,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("preset,eps,delta\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.label, r.eps, r.delta));
    }
    out
}

fn ablation_one(
    cfg: &AblationConfig,
    preset: &str,
    mode: LossMode,
    label: String,
    train_raw: &[LinearSystemSample],
    eval_raw: &[LinearSystemSample],
) -> Result<AblationRow> {
    let augment = AugmentationConfig::preset(preset)?;
    let mcfg = ModelConfig::new(augment.d_in(), cfg.hidden, cfg.num_blocks, cfg.model_seed);
    let mut model = TrainedModel::init(mcfg, augment.clone())?;
    let prepared: Result<Vec<PreparedSample>> = train_raw
        .iter()
        .map(|s| prepare_sample(sample_label(s), &s.a, &s.b, &s.x, &augment))
        .collect();
    let mut tcfg = cfg.train.clone();
    tcfg.loss_mode = mode;
    train(&mut model, &prepared?, &[], &tcfg, |_| {})?;
    let report = evaluate(&model, eval_raw, "ablation", label.clone(), 1)?;
    Ok(AblationRow {
        label,
        eps: report.mean_eps,
        delta: report.mean_delta,
    })
}

/// Trains one model per augmentation preset under a shared seed and budget,
/// plus (optionally) a cosine-only run of the default preset, and scores each
/// on the held-out samples.
pub fn ablation_run(
    cfg: &AblationConfig,
    train_raw: &[LinearSystemSample],
    eval_raw: &[LinearSystemSample],
    progress: &mut dyn FnMut(&str),
) -> Result<Vec<AblationRow>> {
    if cfg.presets.is_empty() {
        return Err(Error::InvalidConfig("no presets to ablate".into()));
    }
    let mut rows = Vec::new();
    for preset in &cfg.presets {
        progress(preset);
        rows.push(ablation_one(
            cfg,
            preset,
            cfg.train.loss_mode,
            preset.clone(),
            train_raw,
            eval_raw,
        )?);
    }
    if cfg.with_loss_ablation {
        let label = "cg (cos only)".to_string();
        progress(&label);
        rows.push(ablation_one(
            cfg,
            "cg",
            LossMode::Cosine,
            label,
            train_raw,
            eval_raw,
        )?);
    }
    Ok(rows)
}

/// First CG iteration (0 = the initial guess itself) at which each target
/// relative error is reached; `None` where the budget ran out first.
/// Targets must be sorted descending.
fn iterations_to_deltas(
    a: &SparseSymMatrix,
    b: &DenseVector,
    x0: Option<&DenseVector>,
    truth: &DenseVector,
    targets: &[f64],
    max_iter: usize,
) -> Result<Vec<Option<usize>>> {
    let tn = truth.norm2();
    if tn == 0.0 {
        return Err(Error::ZeroVector {
            context: "benchmark ground truth",
        });
    }
    let mut hits: Vec<Option<usize>> = vec![None; targets.len()];
    let start = match x0 {
        Some(v) => v.clone(),
        None => DenseVector::zeros(a.n()),
    };
    let d0 = truth.sub(&start).norm2() / tn;
    for (slot, &t) in hits.iter_mut().zip(targets) {
        if d0 <= t {
            *slot = Some(0);
        }
    }
    if hits.iter().all(Option::is_some) {
        return Ok(hits);
    }
    cg_core(a, b, x0, 0.0, max_iter, &mut |k, x| {
        let d = truth.sub(x).norm2() / tn;
        let mut remaining = false;
        for (slot, &t) in hits.iter_mut().zip(targets) {
            if slot.is_none() {
                if d <= t {
                    *slot = Some(k);
                } else {
                    remaining = true;
                }
            }
        }
        remaining
    })?;
    Ok(hits)
}

/// One row per target: iteration counts for cold-started CG versus CG started
/// from the model's prediction. Means and medians run over the samples where
/// both runs reached the target; `unconverged` counts the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridRow {
    pub target_delta: f64,
    pub mean_cold_iters: f64,
    pub mean_warm_iters: f64,
    pub median_cold_iters: f64,
    pub median_warm_iters: f64,
    /// `100 * (1 - mean_warm / mean_cold)`.
    pub reduction_percent: f64,
    pub unconverged: usize,
}

pub fn hybrid_csv(rows: &[HybridRow]) -> String {
    let mut out = String::from(
        "target_delta,mean_cold_iters,mean_warm_iters,median_cold_iters,median_warm_iters,reduction_percent,unconverged\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.target_delta,
            r.mean_cold_iters,
            r.mean_warm_iters,
            r.median_cold_iters,
            r.median_warm_iters,
            r.reduction_percent,
            r.unconverged
        ));
    }
    out
}

pub fn hybrid_bench(
    predictor: &(dyn Predictor + Sync),
    samples: &[LinearSystemSample],
    targets: &[f64],
    max_iter_factor: usize,
    threads: usize,
) -> Result<Vec<HybridRow>> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("no samples to benchmark".into()));
    }
    if targets.is_empty() {
        return Err(Error::InvalidConfig("no target errors given".into()));
    }
    for w in targets.windows(2) {
        if !(w[0] > w[1]) {
            return Err(Error::InvalidConfig(
                "targets must be strictly descending".into(),
            ));
        }
    }
    if targets.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidConfig(
            "targets must be positive and finite".into(),
        ));
    }
    type HitCounts = Vec<Option<usize>>;
    let per_sample: Result<Vec<(HitCounts, HitCounts)>> =
        ordered_map(samples, threads, |s| {
            let max_iter = max_iter_factor.saturating_mul(s.a.n()).max(1);
            let cold = iterations_to_deltas(&s.a, &s.b, None, &s.x, targets, max_iter)?;
            let pred = predictor.predict(&s.a, &s.b)?;
            let warm =
                iterations_to_deltas(&s.a, &s.b, Some(&pred.x_hat), &s.x, targets, max_iter)?;
            Ok((cold, warm))
        })
        .into_iter()
        .collect();
    let per_sample = per_sample?;

    let mut rows = Vec::with_capacity(targets.len());
    for (ti, &target) in targets.iter().enumerate() {
        let mut cold_counts = Vec::new();
        let mut warm_counts = Vec::new();
        let mut unconverged = 0usize;
        for (cold, warm) in &per_sample {
            match (cold[ti], warm[ti]) {
                (Some(c), Some(w)) => {
                    cold_counts.push(c as f64);
                    warm_counts.push(w as f64);
                }
                _ => unconverged += 1,
            }
        }
        let n = cold_counts.len() as f64;
        let (mean_cold, mean_warm, med_cold, med_warm) = if cold_counts.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                cold_counts.iter().sum::<f64>() / n,
                warm_counts.iter().sum::<f64>() / n,
                median(&mut cold_counts.clone()),
                median(&mut warm_counts.clone()),
            )
        };
        let reduction = if !mean_cold.is_finite() {
            f64::NAN
        } else if mean_cold == 0.0 {
            0.0
        } else {
            100.0 * (1.0 - mean_warm / mean_cold)
        };
        rows.push(HybridRow {
            target_delta: target,
            mean_cold_iters: mean_cold,
            mean_warm_iters: mean_warm,
            median_cold_iters: med_cold,
            median_warm_iters: med_warm,
            reduction_percent: reduction,
            unconverged,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct TimingConfig {
    pub warmup: usize,
    pub measured: usize,
    /// Fixed target for the second CG column.
    pub delta_target: f64,
    /// CG budget as a multiple of the system size.
    pub max_iter_factor: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            warmup: 3,
            measured: 10,
            delta_target: 1e-6,
            max_iter_factor: 20,
        }
    }
}

/// Inference wall time next to the time CG needs from a zero start to match
/// the model's error (and to reach a fixed target). Medians over the measured
/// repetitions; iteration counts are exact and deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub label: String,
    pub n: usize,
    pub model_delta: f64,
    pub inference_seconds: f64,
    pub cg_match_iters: usize,
    pub cg_match_hit: bool,
    pub cg_match_seconds: f64,
    pub cg_target_iters: usize,
    pub cg_target_hit: bool,
    pub cg_target_seconds: f64,
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from(
        "sample,n,model_delta,inference_seconds,cg_match_iters,cg_match_hit,cg_match_seconds,cg_target_iters,cg_target_hit,cg_target_seconds\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.label,
            r.n,
            r.model_delta,
            r.inference_seconds,
            r.cg_match_iters,
            r.cg_match_hit,
            r.cg_match_seconds,
            r.cg_target_iters,
            r.cg_target_hit,
            r.cg_target_seconds
        ));
    }
    out
}

fn timed_median<F: FnMut() -> Result<()>>(
    warmup: usize,
    measured: usize,
    mut run: F,
) -> Result<f64> {
    for _ in 0..warmup {
        run()?;
    }
    let mut times = Vec::with_capacity(measured.max(1));
    for _ in 0..measured.max(1) {
        let t0 = Instant::now();
        run()?;
        times.push(t0.elapsed().as_secs_f64());
    }
    Ok(median(&mut times))
}

pub fn timing_bench(
    predictor: &dyn Predictor,
    samples: &[LinearSystemSample],
    cfg: &TimingConfig,
) -> Result<Vec<TimingRow>> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("no samples to benchmark".into()));
    }
    if !(cfg.delta_target > 0.0) {
        return Err(Error::InvalidConfig(
            "timing target must be positive".into(),
        ));
    }
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let max_iter = cfg.max_iter_factor.saturating_mul(s.a.n()).max(1);
        let pred = predictor.predict(&s.a, &s.b)?;
        let model_delta = metric_delta(&s.x, &pred.x_hat)?;
        let inference_seconds = timed_median(cfg.warmup, cfg.measured, || {
            predictor.predict(&s.a, &s.b).map(|_| ())
        })?;

        let column = |target: f64| -> Result<(usize, bool, f64)> {
            let hits = iterations_to_deltas(&s.a, &s.b, None, &s.x, &[target], max_iter)?;
            let (iters, hit) = match hits[0] {
                Some(k) => (k, true),
                None => (max_iter, false),
            };
            let seconds = timed_median(cfg.warmup, cfg.measured, || {
                iterations_to_deltas(&s.a, &s.b, None, &s.x, &[target], max_iter).map(|_| ())
            })?;
            Ok((iters, hit, seconds))
        };
        let (cg_match_iters, cg_match_hit, cg_match_seconds) = column(model_delta.max(1e-300))?;
        let (cg_target_iters, cg_target_hit, cg_target_seconds) = column(cfg.delta_target)?;

        rows.push(TimingRow {
            label: sample_label(s),
            n: s.a.n(),
            model_delta,
            inference_seconds,
            cg_match_iters,
            cg_match_hit,
            cg_match_seconds,
            cg_target_iters,
            cg_target_hit,
            cg_target_seconds,
        });
    }
    Ok(rows)
}
