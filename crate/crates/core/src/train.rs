//! Losses, analytic gradients, the optimizer, and the epoch loop.
//!
//! Training minimizes direction error on the scaled system: a cosine term
//! against the reference solution plus (by default) a cosine term between
//! `A x~` and the scaled right-hand side. Gradients are computed in closed
//! form, layer by layer, against the cache kept by the forward pass.

use std::ops::Range;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{build_features, AugmentationConfig, FeatureMatrix};
use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::eval::{metric_delta, metric_eps};
use crate::model::{
    forward_cached, ForwardCache, GradientSet, GraphBatch, GraphNormParams, Membership,
    ModelConfig, ModelParameters, TrainedModel,
};
use crate::scaling::{apply_magnitude, estimate_mu, normalize_system, ScaledSystem};
use crate::scaling::MU_DEGENERATE_TOL;
use crate::sparse::SparseSymMatrix;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Which terms enter the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    Cosine,
    #[default]
    CosinePlusResidual,
}

impl LossMode {
    pub fn describe(&self) -> &'static str {
        match self {
            LossMode::Cosine => "cos",
            LossMode::CosinePlusResidual => "cos+res",
        }
    }
}


#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub cos: f64,
    pub res: f64,
    /// What the optimizer actually minimizes under the active mode.
    pub total: f64,
}

/// `1 - cos(direction, truth)`; zero exactly when the direction is right.
pub fn loss_cos(direction: &DenseVector, truth: &DenseVector) -> Result<f64> {
    if direction.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "cosine loss",
            expected: truth.len(),
            found: direction.len(),
        });
    }
    let np = direction.norm2();
    let nt = truth.norm2();
    if np == 0.0 {
        return Err(Error::ZeroVector {
            context: "cosine loss prediction",
        });
    }
    if nt == 0.0 {
        return Err(Error::ZeroVector {
            context: "cosine loss reference",
        });
    }
    Ok(1.0 - direction.dot(truth) / (np * nt))
}

/// `1 - cos(A direction, rhs)`: alignment of the implied residual direction.
pub fn loss_res(a: &SparseSymMatrix, direction: &DenseVector, rhs: &DenseVector) -> Result<f64> {
    let w = a.spmv(direction)?;
    let nw = w.norm2();
    let nb = rhs.norm2();
    if nw == 0.0 {
        return Err(Error::ZeroVector {
            context: "residual loss image",
        });
    }
    if nb == 0.0 {
        return Err(Error::ZeroVector {
            context: "residual loss rhs",
        });
    }
    Ok(1.0 - w.dot(rhs) / (nw * nb))
}

pub fn total_loss(
    a: &SparseSymMatrix,
    direction: &DenseVector,
    truth: &DenseVector,
    rhs: &DenseVector,
    mode: LossMode,
) -> Result<LossBreakdown> {
    let cos = loss_cos(direction, truth)?;
    let res = loss_res(a, direction, rhs)?;
    let total = match mode {
        LossMode::Cosine => cos,
        LossMode::CosinePlusResidual => cos + res,
    };
    Ok(LossBreakdown { cos, res, total })
}

/// `d loss_cos / d direction`.
pub fn cos_gradient(direction: &DenseVector, truth: &DenseVector) -> Result<DenseVector> {
    let np = direction.norm2();
    let nt = truth.norm2();
    if np == 0.0 || nt == 0.0 {
        return Err(Error::ZeroVector {
            context: "cosine gradient",
        });
    }
    let cosv = direction.dot(truth) / (np * nt);
    let mut out = DenseVector::zeros(direction.len());
    for i in 0..direction.len() {
        out[i] = -(truth[i] / (np * nt) - cosv * direction[i] / (np * np));
    }
    Ok(out)
}

/// `d loss_res / d direction`, pulled back through the symmetric matrix.
pub fn res_gradient(
    a: &SparseSymMatrix,
    direction: &DenseVector,
    rhs: &DenseVector,
) -> Result<DenseVector> {
    let w = a.spmv(direction)?;
    let nw = w.norm2();
    let nb = rhs.norm2();
    if nw == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector {
            context: "residual gradient",
        });
    }
    let cosv = w.dot(rhs) / (nw * nb);
    let mut dw = DenseVector::zeros(w.len());
    for i in 0..w.len() {
        dw[i] = -(rhs[i] / (nw * nb) - cosv * w[i] / (nw * nw));
    }
    a.spmv(&dw)
}

pub fn total_direction_gradient(
    a: &SparseSymMatrix,
    direction: &DenseVector,
    truth: &DenseVector,
    rhs: &DenseVector,
    mode: LossMode,
) -> Result<(LossBreakdown, DenseVector)> {
    let breakdown = total_loss(a, direction, truth, rhs, mode)?;
    let mut g = cos_gradient(direction, truth)?;
    if mode == LossMode::CosinePlusResidual {
        g.axpy(1.0, &res_gradient(a, direction, rhs)?);
    }
    Ok((breakdown, g))
}

/// Everything the loop needs for one system, computed once up front.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub label: String,
    pub scaled: ScaledSystem,
    pub features: FeatureMatrix,
    /// Reference solution of the original (unscaled) system.
    pub truth: DenseVector,
}

pub fn prepare_sample(
    label: impl Into<String>,
    a: &SparseSymMatrix,
    b: &DenseVector,
    truth: &DenseVector,
    augment: &AugmentationConfig,
) -> Result<PreparedSample> {
    if truth.len() != a.n() {
        return Err(Error::DimensionMismatch {
            context: "prepared sample",
            expected: a.n(),
            found: truth.len(),
        });
    }
    if b.is_zero() {
        return Err(Error::ZeroVector {
            context: "sample right-hand side",
        });
    }
    if truth.is_zero() {
        return Err(Error::ZeroVector {
            context: "sample reference solution",
        });
    }
    let scaled = normalize_system(a, b)?;
    let features = build_features(&scaled.matrix, &scaled.rhs, augment)?;
    Ok(PreparedSample {
        label: label.into(),
        scaled,
        features,
        truth: truth.clone(),
    })
}

fn masked(upstream: &DenseMatrix, pre: &DenseMatrix, slope: f64) -> DenseMatrix {
    let mut out = upstream.clone();
    for (o, p) in out.data_mut().iter_mut().zip(pre.data()) {
        if *p < 0.0 {
            *o *= slope;
        }
    }
    out
}

fn norm_backward(
    x: &DenseMatrix,
    mean: &DenseMatrix,
    inv: &DenseMatrix,
    p: &GraphNormParams,
    upstream: &DenseMatrix,
    mem: &Membership,
    out_grads: &mut GraphNormParams,
) -> DenseMatrix {
    let d = x.cols();
    let mut dx = DenseMatrix::zeros(x.rows(), d);
    for g in 0..mem.graph_count() {
        let r = mem.range(g);
        let n = r.len();
        if n == 0 {
            continue;
        }
        let nf = n as f64;
        let mg = mean.row(g);
        let ig = inv.row(g);
        let mut sum_up = vec![0.0; d];
        let mut sum_up_s = vec![0.0; d];
        for i in r.clone() {
            let xi = x.row(i);
            let ui = upstream.row(i);
            for c in 0..d {
                let s = xi[c] - p.alpha[c] * mg[c];
                sum_up[c] += ui[c];
                sum_up_s[c] += ui[c] * s;
            }
        }
        for c in 0..d {
            out_grads.beta[c] += sum_up[c];
            out_grads.gamma[c] += sum_up_s[c] * ig[c];
            out_grads.alpha[c] -= p.gamma[c] * mg[c] * ig[c] * sum_up[c];
        }
        for i in r {
            let xi = x.row(i);
            let ui = upstream.row(i);
            let oi = dx.row_mut(i);
            for c in 0..d {
                let z = xi[c] - mg[c];
                let ginv = p.gamma[c] * ig[c];
                oi[c] = ginv * (ui[c] - p.alpha[c] * sum_up[c] / nf)
                    - ginv * ig[c] * ig[c] * z * sum_up_s[c] / nf;
            }
        }
    }
    dx
}

/// Reverse pass of `forward_cached`: per-node output gradients in, parameter
/// gradients out.
pub(crate) fn backward(
    a: &SparseSymMatrix,
    mem: &Membership,
    params: &ModelParameters,
    cfg: &ModelConfig,
    cache: &ForwardCache,
    d_direction: &DenseVector,
) -> Result<GradientSet> {
    let n = d_direction.len();
    let mut grads = params.zeros_like();
    let mut dout = DenseMatrix::zeros(n, 1);
    dout.set_column(0, d_direction.as_slice());

    grads.decoder_out.bias = dout.column_sums();
    grads.decoder_out.weight = dout.matmul_tn(&cache.act1);
    let dact1 = dout.matmul_nn(&params.decoder_out.weight);
    let dpre1 = masked(&dact1, &cache.pre1, cfg.leaky_slope);
    grads.decoder_hidden.bias = dpre1.column_sums();
    grads.decoder_hidden.weight = dpre1.matmul_tn(&cache.h_final);
    let mut dh = dpre1.matmul_nn(&params.decoder_hidden.weight);

    for ((bp, bc), bg) in params
        .blocks
        .iter()
        .rev()
        .zip(cache.blocks.iter().rev())
        .zip(grads.blocks.iter_mut().rev())
    {
        let dy = dh;
        bg.conv2.bias = dy.column_sums();
        bg.conv2.root = dy.matmul_tn(&bc.act);
        bg.conv2.agg = dy.matmul_tn(&bc.a_act);
        let mut dact = dy.matmul_nn(&bp.conv2.root);
        dact.add_in_place(&a.spmm(&dy.matmul_nn(&bp.conv2.agg))?);
        let dv = masked(&dact, &bc.v, cfg.leaky_slope);
        bg.conv1.bias = dv.column_sums();
        bg.conv1.root = dv.matmul_tn(&bc.u);
        bg.conv1.agg = dv.matmul_tn(&bc.au);
        let mut du = dv.matmul_nn(&bp.conv1.root);
        du.add_in_place(&a.spmm(&dv.matmul_nn(&bp.conv1.agg))?);
        let mut dx = norm_backward(&bc.x_in, &bc.mean, &bc.inv, &bp.norm, &du, mem, &mut bg.norm);
        dx.add_in_place(&dy);
        dh = dx;
    }

    grads.encoder.bias = dh.column_sums();
    grads.encoder.weight = dh.matmul_tn(&cache.features);
    Ok(grads)
}

/// Mean loss and summed-then-averaged gradient over a batch. Degenerate
/// samples (direction or its image numerically zero) are skipped when
/// `skip_degenerate` is set and rejected otherwise; the count of contributing
/// samples comes back alongside.
pub(crate) fn batch_loss_and_gradient(
    model: &TrainedModel,
    samples: &[&PreparedSample],
    mode: LossMode,
    skip_degenerate: bool,
) -> Result<(LossBreakdown, GradientSet, usize)> {
    let parts: Vec<(&SparseSymMatrix, &DenseMatrix)> = samples
        .iter()
        .map(|s| (&s.scaled.matrix, &s.features.data))
        .collect();
    let batch = GraphBatch::new(&parts)?;
    let (direction, cache) = forward_cached(
        &batch.matrix,
        &batch.features,
        &batch.membership,
        &model.params,
        &model.config,
    )?;

    let mut pieces: Vec<(Range<usize>, DenseVector)> = Vec::with_capacity(samples.len());
    let mut sums = LossBreakdown {
        cos: 0.0,
        res: 0.0,
        total: 0.0,
    };
    for (k, s) in samples.iter().enumerate() {
        let r = batch.membership.range(k);
        let dir = DenseVector::from_vec(direction.as_slice()[r.clone()].to_vec());
        let image = s.scaled.matrix.spmv(&dir)?;
        if dir.norm2() <= MU_DEGENERATE_TOL || image.norm2() <= MU_DEGENERATE_TOL {
            if skip_degenerate {
                warn!("skipping degenerate sample {}", s.label);
                continue;
            }
            return Err(Error::ZeroVector {
                context: "degenerate direction in batch",
            });
        }
        let (lb, g) =
            total_direction_gradient(&s.scaled.matrix, &dir, &s.truth, &s.scaled.rhs, mode)?;
        sums.cos += lb.cos;
        sums.res += lb.res;
        sums.total += lb.total;
        pieces.push((r, g));
    }
    let contributing = pieces.len();
    if contributing == 0 {
        return Err(Error::AllDegenerateBatch);
    }
    let scale = 1.0 / contributing as f64;
    let mut d_direction = DenseVector::zeros(direction.len());
    for (r, g) in pieces {
        for (dst, src) in r.zip(g.iter()) {
            d_direction[dst] = src * scale;
        }
    }
    let grads = backward(
        &batch.matrix,
        &batch.membership,
        &model.params,
        &model.config,
        &cache,
        &d_direction,
    )?;
    let mean = LossBreakdown {
        cos: sums.cos * scale,
        res: sums.res * scale,
        total: sums.total * scale,
    };
    Ok((mean, grads, contributing))
}

/// Mean total loss over a batch; errors on any degenerate sample.
pub(crate) fn batch_loss(
    model: &TrainedModel,
    samples: &[&PreparedSample],
    mode: LossMode,
) -> Result<f64> {
    let parts: Vec<(&SparseSymMatrix, &DenseMatrix)> = samples
        .iter()
        .map(|s| (&s.scaled.matrix, &s.features.data))
        .collect();
    let batch = GraphBatch::new(&parts)?;
    let (direction, _) = forward_cached(
        &batch.matrix,
        &batch.features,
        &batch.membership,
        &model.params,
        &model.config,
    )?;
    let mut sum = 0.0;
    for (k, s) in samples.iter().enumerate() {
        let r = batch.membership.range(k);
        let dir = DenseVector::from_vec(direction.as_slice()[r].to_vec());
        sum += total_loss(&s.scaled.matrix, &dir, &s.truth, &s.scaled.rhs, mode)?.total;
    }
    Ok(sum / samples.len() as f64)
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    m: ModelParameters,
    v: ModelParameters,
    steps: usize,
}

impl OptimizerState {
    pub fn new(params: &ModelParameters) -> OptimizerState {
        OptimizerState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: &mut ModelParameters, grads: &GradientSet, lr: f64) {
        self.steps += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.steps as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.steps as i32);
        let pg = params.groups_mut();
        let gg = grads.groups();
        let mg = self.m.groups_mut();
        let vg = self.v.groups_mut();
        for ((((_, p), (_, g)), (_, m)), (_, v)) in
            pg.into_iter().zip(gg).zip(mg).zip(vg)
        {
            for j in 0..p.len() {
                m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
                v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p[j] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Base rate divided by 10 after 8/10 of the epochs and again after 9/10
/// (integer division, epochs counted from zero).
pub fn learning_rate(base: f64, epoch: usize, total_epochs: usize) -> f64 {
    let first = total_epochs * 8 / 10;
    let second = total_epochs * 9 / 10;
    let mut lr = base;
    if epoch >= first {
        lr /= 10.0;
    }
    if epoch >= second {
        lr /= 10.0;
    }
    lr
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub shuffle_seed: u64,
    pub loss_mode: LossMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 16,
            base_lr: 1e-3,
            shuffle_seed: 0,
            loss_mode: LossMode::CosinePlusResidual,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub split: &'static str,
    pub loss_cos: f64,
    pub loss_res: f64,
    pub loss_total: f64,
    pub eps: f64,
    pub delta: f64,
    pub lr: f64,
}

pub const EPOCH_CSV_HEADER: &str = "epoch,split,loss_cos,loss_res,loss_total,eps,delta,lr";

impl EpochStats {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.split,
            self.loss_cos,
            self.loss_res,
            self.loss_total,
            self.eps,
            self.delta,
            self.lr
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub rows: Vec<EpochStats>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(EPOCH_CSV_HEADER);
        for r in &self.rows {
            out.push('\n');
            out.push_str(&r.csv_row());
        }
        out.push('\n');
        out
    }
}

/// Split-level means. Losses average over non-degenerate samples; the solution
/// metrics average over all of them (a degenerate prediction scores as the
/// zero vector).
#[derive(Debug, Clone, Copy)]
pub struct SplitStats {
    pub loss_cos: f64,
    pub loss_res: f64,
    pub loss_total: f64,
    pub eps: f64,
    pub delta: f64,
    pub degenerate: usize,
}

pub fn evaluate_split(
    model: &TrainedModel,
    samples: &[PreparedSample],
    batch_size: usize,
    mode: LossMode,
) -> Result<SplitStats> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("cannot evaluate an empty split".into()));
    }
    let bs = batch_size.max(1);
    let mut cos_sum = 0.0;
    let mut res_sum = 0.0;
    let mut total_sum = 0.0;
    let mut eps_sum = 0.0;
    let mut delta_sum = 0.0;
    let mut degenerate = 0usize;
    for chunk in samples.chunks(bs) {
        let parts: Vec<(&SparseSymMatrix, &DenseMatrix)> = chunk
            .iter()
            .map(|s| (&s.scaled.matrix, &s.features.data))
            .collect();
        let batch = GraphBatch::new(&parts)?;
        let (direction, _) = forward_cached(
            &batch.matrix,
            &batch.features,
            &batch.membership,
            &model.params,
            &model.config,
        )?;
        for (k, s) in chunk.iter().enumerate() {
            let r = batch.membership.range(k);
            let dir = DenseVector::from_vec(direction.as_slice()[r].to_vec());
            let mu = estimate_mu(&s.scaled, &dir)?;
            let x_hat = apply_magnitude(&s.scaled, &dir, &mu);
            eps_sum += metric_eps(&s.truth, &x_hat)?;
            delta_sum += metric_delta(&s.truth, &x_hat)?;
            if mu.degenerate || dir.norm2() <= MU_DEGENERATE_TOL {
                degenerate += 1;
                continue;
            }
            let lb = total_loss(&s.scaled.matrix, &dir, &s.truth, &s.scaled.rhs, mode)?;
            cos_sum += lb.cos;
            res_sum += lb.res;
            total_sum += lb.total;
        }
    }
    let counted = samples.len() - degenerate;
    let loss_scale = if counted == 0 { 0.0 } else { 1.0 / counted as f64 };
    let metric_scale = 1.0 / samples.len() as f64;
    Ok(SplitStats {
        loss_cos: cos_sum * loss_scale,
        loss_res: res_sum * loss_scale,
        loss_total: total_sum * loss_scale,
        eps: eps_sum * metric_scale,
        delta: delta_sum * metric_scale,
        degenerate,
    })
}

/// Runs the full loop, mutating the model in place. Every epoch shuffles with
/// its own seeded stream, then logs train (and, when present, validation)
/// statistics through `progress` and the returned log.
pub fn train(
    model: &mut TrainedModel,
    train_set: &[PreparedSample],
    val_set: &[PreparedSample],
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<TrainLog> {
    if train_set.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidConfig(
            "epochs and batch size must be positive".into(),
        ));
    }
    let mut opt = OptimizerState::new(&model.params);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let lr = learning_rate(cfg.base_lr, epoch, cfg.epochs);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let picked: Vec<&PreparedSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (_, grads, _) =
                batch_loss_and_gradient(model, &picked, cfg.loss_mode, true)?;
            opt.step(&mut model.params, &grads, lr);
        }
        let tr = evaluate_split(model, train_set, cfg.batch_size, cfg.loss_mode)?;
        let row = EpochStats {
            epoch,
            split: "train",
            loss_cos: tr.loss_cos,
            loss_res: tr.loss_res,
            loss_total: tr.loss_total,
            eps: tr.eps,
            delta: tr.delta,
            lr,
        };
        progress(&row);
        log.rows.push(row);
        if !val_set.is_empty() {
            let va = evaluate_split(model, val_set, cfg.batch_size, cfg.loss_mode)?;
            let row = EpochStats {
                epoch,
                split: "val",
                loss_cos: va.loss_cos,
                loss_res: va.loss_res,
                loss_total: va.loss_total,
                eps: va.eps,
                delta: va.delta,
                lr,
            };
            progress(&row);
            log.rows.push(row);
        }
    }
    Ok(log)
}

pub const GRAD_CHECK_TOL: f64 = 1e-4;
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckGroup {
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GradCheckGroup>,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Relative disagreement per entry, floored to ignore noise around zero.
pub fn compare_gradients(
    analytic: &GradientSet,
    numeric: &GradientSet,
    floor: f64,
    tol: f64,
) -> GradCheckReport {
    let mut groups = Vec::new();
    let mut overall = 0.0f64;
    for ((name, a), (_, n)) in analytic.groups().into_iter().zip(numeric.groups()) {
        let mut worst = 0.0f64;
        for (x, y) in a.iter().zip(n.iter()) {
            let denom = floor.max(x.abs()).max(y.abs());
            worst = worst.max((x - y).abs() / denom);
        }
        overall = overall.max(worst);
        groups.push(GradCheckGroup {
            name,
            max_rel_err: worst,
        });
    }
    GradCheckReport {
        groups,
        max_rel_err: overall,
        passed: overall < tol,
    }
}

/// Central-difference validation of the analytic gradient on a small batch.
pub fn gradient_check(
    model: &TrainedModel,
    samples: &[PreparedSample],
    step: f64,
) -> Result<GradCheckReport> {
    let refs: Vec<&PreparedSample> = samples.iter().collect();
    let mode = LossMode::CosinePlusResidual;
    let (_, analytic, _) = batch_loss_and_gradient(model, &refs, mode, false)?;
    let mut scratch = model.clone();
    let mut numeric = model.params.zeros_like();
    let group_count = analytic.groups().len();
    for gi in 0..group_count {
        let len = analytic.groups()[gi].1.len();
        for j in 0..len {
            let orig = scratch.params.groups()[gi].1[j];
            scratch.params.groups_mut()[gi].1[j] = orig + step;
            let plus = batch_loss(&scratch, &refs, mode)?;
            scratch.params.groups_mut()[gi].1[j] = orig - step;
            let minus = batch_loss(&scratch, &refs, mode)?;
            scratch.params.groups_mut()[gi].1[j] = orig;
            numeric.groups_mut()[gi].1[j] = (plus - minus) / (2.0 * step);
        }
    }
    Ok(compare_gradients(
        &analytic,
        &numeric,
        GRAD_CHECK_FLOOR,
        GRAD_CHECK_TOL,
    ))
}
