//! Residual graph network that maps a linear system to a solution direction.
//!
//! The scaled system is read as a graph: one node per unknown carrying a
//! feature row, one weighted edge per stored nonzero (diagonal entries act as
//! self loops), so message passing follows the sparsity pattern of the matrix
//! itself. The network is an encoder, a stack of residual blocks, and a
//! two-layer decoder that emits one scalar per node.

use std::ops::Range;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::augment::{build_features, AugmentationConfig};
use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::scaling::{apply_magnitude, estimate_mu, normalize_system};
use crate::sparse::SparseSymMatrix;

/// Inference output: solution direction, recovered magnitude, and the final
/// prediction.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Raw network output (the predicted direction), length `n`.
    pub direction: DenseVector,
    /// Least-squares step length for the scaled system.
    pub mu: f64,
    /// Recovered solution `x_hat`.
    pub x_hat: DenseVector,
    /// True when the direction was too close to zero to scale meaningfully.
    pub degenerate: bool,
}

/// Anything that can propose a solution for `A x = b`.
pub trait Predictor {
    fn predict(&self, a: &SparseSymMatrix, b: &DenseVector) -> Result<Prediction>;
}

/// Network shape and activation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_in: usize,
    pub hidden: usize,
    pub num_blocks: usize,
    pub leaky_slope: f64,
    pub norm_eps: f64,
    /// Seed for weight initialization.
    pub seed: u64,
}

impl ModelConfig {
    /// Slope 0.01 and normalization epsilon 1e-5.
    pub fn new(d_in: usize, hidden: usize, num_blocks: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            d_in,
            hidden,
            num_blocks,
            leaky_slope: 0.01,
            norm_eps: 1e-5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig(
                "model widths must be positive".into(),
            ));
        }
        if !self.leaky_slope.is_finite() || !(self.norm_eps > 0.0) {
            return Err(Error::InvalidConfig(
                "activation slope must be finite and norm epsilon positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    /// Shape `(out, in)`; applied as `x W^T + bias`.
    pub weight: DenseMatrix,
    pub bias: DenseVector,
}

/// Learnable normalization: `gamma * (x - alpha * mean) / sqrt(var + eps) + beta`
/// with per-graph statistics. One entry per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphNormParams {
    pub alpha: DenseVector,
    pub gamma: DenseVector,
    pub beta: DenseVector,
}

/// Convolution weights: `x W_root^T + (A x) W_agg^T + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphConvParams {
    pub root: DenseMatrix,
    pub agg: DenseMatrix,
    pub bias: DenseVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlockParams {
    pub norm: GraphNormParams,
    pub conv1: GraphConvParams,
    pub conv2: GraphConvParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub encoder: LinearLayer,
    pub blocks: Vec<ResidualBlockParams>,
    pub decoder_hidden: LinearLayer,
    pub decoder_out: LinearLayer,
}

/// Gradients share the parameter layout.
pub type GradientSet = ModelParameters;

impl ModelParameters {
    /// Zero parameters with the shapes `cfg` calls for.
    pub fn zeros(cfg: &ModelConfig) -> ModelParameters {
        let d = cfg.hidden;
        let layer = |rows: usize, cols: usize| LinearLayer {
            weight: DenseMatrix::zeros(rows, cols),
            bias: DenseVector::zeros(rows),
        };
        let conv = || GraphConvParams {
            root: DenseMatrix::zeros(d, d),
            agg: DenseMatrix::zeros(d, d),
            bias: DenseVector::zeros(d),
        };
        ModelParameters {
            encoder: layer(d, cfg.d_in),
            blocks: (0..cfg.num_blocks)
                .map(|_| ResidualBlockParams {
                    norm: GraphNormParams {
                        alpha: DenseVector::zeros(d),
                        gamma: DenseVector::zeros(d),
                        beta: DenseVector::zeros(d),
                    },
                    conv1: conv(),
                    conv2: conv(),
                })
                .collect(),
            decoder_hidden: layer(d, d),
            decoder_out: layer(1, d),
        }
    }

    pub fn zeros_like(&self) -> ModelParameters {
        let mut out = self.clone();
        for (_, g) in out.groups_mut() {
            for v in g.iter_mut() {
                *v = 0.0;
            }
        }
        out
    }

    /// Named parameter groups in a fixed order; the checkpoint layout and the
    /// optimizer both follow it.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("encoder.weight".into(), self.encoder.weight.data()),
            ("encoder.bias".into(), self.encoder.bias.as_slice()),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.norm.alpha"), b.norm.alpha.as_slice()));
            out.push((format!("block{i}.norm.gamma"), b.norm.gamma.as_slice()));
            out.push((format!("block{i}.norm.beta"), b.norm.beta.as_slice()));
            out.push((format!("block{i}.conv1.root"), b.conv1.root.data()));
            out.push((format!("block{i}.conv1.agg"), b.conv1.agg.data()));
            out.push((format!("block{i}.conv1.bias"), b.conv1.bias.as_slice()));
            out.push((format!("block{i}.conv2.root"), b.conv2.root.data()));
            out.push((format!("block{i}.conv2.agg"), b.conv2.agg.data()));
            out.push((format!("block{i}.conv2.bias"), b.conv2.bias.as_slice()));
        }
        out.push((
            "decoder.hidden.weight".into(),
            self.decoder_hidden.weight.data(),
        ));
        out.push((
            "decoder.hidden.bias".into(),
            self.decoder_hidden.bias.as_slice(),
        ));
        out.push(("decoder.out.weight".into(), self.decoder_out.weight.data()));
        out.push(("decoder.out.bias".into(), self.decoder_out.bias.as_slice()));
        out
    }

    /// Mutable twin of [`groups`](Self::groups), same order.
    pub fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("encoder.weight".into(), self.encoder.weight.data_mut()),
            ("encoder.bias".into(), self.encoder.bias.as_mut_slice()),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.push((format!("block{i}.norm.alpha"), b.norm.alpha.as_mut_slice()));
            out.push((format!("block{i}.norm.gamma"), b.norm.gamma.as_mut_slice()));
            out.push((format!("block{i}.norm.beta"), b.norm.beta.as_mut_slice()));
            out.push((format!("block{i}.conv1.root"), b.conv1.root.data_mut()));
            out.push((format!("block{i}.conv1.agg"), b.conv1.agg.data_mut()));
            out.push((format!("block{i}.conv1.bias"), b.conv1.bias.as_mut_slice()));
            out.push((format!("block{i}.conv2.root"), b.conv2.root.data_mut()));
            out.push((format!("block{i}.conv2.agg"), b.conv2.agg.data_mut()));
            out.push((format!("block{i}.conv2.bias"), b.conv2.bias.as_mut_slice()));
        }
        out.push((
            "decoder.hidden.weight".into(),
            self.decoder_hidden.weight.data_mut(),
        ));
        out.push((
            "decoder.hidden.bias".into(),
            self.decoder_hidden.bias.as_mut_slice(),
        ));
        out.push((
            "decoder.out.weight".into(),
            self.decoder_out.weight.data_mut(),
        ));
        out.push((
            "decoder.out.bias".into(),
            self.decoder_out.bias.as_mut_slice(),
        ));
        out
    }

    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let check = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "parameter shape mismatch at {what}"
                )))
            }
        };
        let d = cfg.hidden;
        check(
            self.encoder.weight.rows() == d && self.encoder.weight.cols() == cfg.d_in,
            "encoder.weight",
        )?;
        check(self.encoder.bias.len() == d, "encoder.bias")?;
        check(self.blocks.len() == cfg.num_blocks, "block count")?;
        for b in &self.blocks {
            check(
                b.norm.alpha.len() == d && b.norm.gamma.len() == d && b.norm.beta.len() == d,
                "norm channels",
            )?;
            for conv in [&b.conv1, &b.conv2] {
                check(
                    conv.root.rows() == d
                        && conv.root.cols() == d
                        && conv.agg.rows() == d
                        && conv.agg.cols() == d
                        && conv.bias.len() == d,
                    "conv shapes",
                )?;
            }
        }
        check(
            self.decoder_hidden.weight.rows() == d && self.decoder_hidden.weight.cols() == d,
            "decoder.hidden.weight",
        )?;
        check(self.decoder_hidden.bias.len() == d, "decoder.hidden.bias")?;
        check(
            self.decoder_out.weight.rows() == 1 && self.decoder_out.weight.cols() == d,
            "decoder.out.weight",
        )?;
        check(self.decoder_out.bias.len() == 1, "decoder.out.bias")?;
        Ok(())
    }
}

/// Seeded uniform initialization: every weight entry is drawn as
/// `bound * (2 u - 1)` with `bound = sqrt(1 / fan_in)` and `u` from a
/// ChaCha8 stream, consumed in group order. Biases and `beta` start at zero,
/// `alpha` and `gamma` at one; none of those draw from the stream.
pub fn init_parameters(cfg: &ModelConfig) -> ModelParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weight = |rows: usize, cols: usize| -> DenseMatrix {
        let bound = (1.0 / cols as f64).sqrt();
        let mut m = DenseMatrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = bound * (2.0 * rng.gen::<f64>() - 1.0);
        }
        m
    };
    let d = cfg.hidden;
    let encoder = LinearLayer {
        weight: weight(d, cfg.d_in),
        bias: DenseVector::zeros(d),
    };
    let blocks = (0..cfg.num_blocks)
        .map(|_| ResidualBlockParams {
            norm: GraphNormParams {
                alpha: DenseVector::from_vec(vec![1.0; d]),
                gamma: DenseVector::from_vec(vec![1.0; d]),
                beta: DenseVector::zeros(d),
            },
            conv1: GraphConvParams {
                root: weight(d, d),
                agg: weight(d, d),
                bias: DenseVector::zeros(d),
            },
            conv2: GraphConvParams {
                root: weight(d, d),
                agg: weight(d, d),
                bias: DenseVector::zeros(d),
            },
        })
        .collect();
    let decoder_hidden = LinearLayer {
        weight: weight(d, d),
        bias: DenseVector::zeros(d),
    };
    let decoder_out = LinearLayer {
        weight: weight(1, d),
        bias: DenseVector::zeros(1),
    };
    ModelParameters {
        encoder,
        blocks,
        decoder_hidden,
        decoder_out,
    }
}

/// Node-to-graph assignment for a batch laid out contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    offsets: Vec<usize>,
}

impl Membership {
    pub fn single(n: usize) -> Membership {
        Membership {
            offsets: vec![0, n],
        }
    }

    pub fn from_counts(counts: &[usize]) -> Result<Membership> {
        if counts.is_empty() {
            return Err(Error::InvalidConfig("batch is empty".into()));
        }
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        offsets.push(0usize);
        for &c in counts {
            if c == 0 {
                return Err(Error::InvalidConfig(
                    "batch contains an empty graph".into(),
                ));
            }
            offsets.push(offsets.last().unwrap() + c);
        }
        Ok(Membership { offsets })
    }

    pub fn graph_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn node_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Node index range of graph `g`.
    pub fn range(&self, g: usize) -> Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }
}

/// Disjoint union of systems: block-diagonal matrix, stacked feature rows.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub matrix: SparseSymMatrix,
    pub features: DenseMatrix,
    pub membership: Membership,
}

impl GraphBatch {
    pub fn new(parts: &[(&SparseSymMatrix, &DenseMatrix)]) -> Result<GraphBatch> {
        if parts.is_empty() {
            return Err(Error::InvalidConfig("batch is empty".into()));
        }
        let width = parts[0].1.cols();
        let mut counts = Vec::with_capacity(parts.len());
        for (a, f) in parts {
            if f.rows() != a.n() {
                return Err(Error::DimensionMismatch {
                    context: "batch feature rows",
                    expected: a.n(),
                    found: f.rows(),
                });
            }
            if f.cols() != width {
                return Err(Error::DimensionMismatch {
                    context: "batch feature width",
                    expected: width,
                    found: f.cols(),
                });
            }
            counts.push(a.n());
        }
        let membership = Membership::from_counts(&counts)?;
        let blocks: Vec<&SparseSymMatrix> = parts.iter().map(|(a, _)| *a).collect();
        let matrix = SparseSymMatrix::block_diag(&blocks);
        let mut features = DenseMatrix::zeros(membership.node_count(), width);
        let mut r = 0;
        for (_, f) in parts {
            for i in 0..f.rows() {
                features.row_mut(r).copy_from_slice(f.row(i));
                r += 1;
            }
        }
        Ok(GraphBatch {
            matrix,
            features,
            membership,
        })
    }
}

/// Normalization with statistics taken over each graph separately. `var` is
/// the population variance of the shifted values `x - alpha * mean`, which by
/// shift invariance equals the variance of `x` itself.
pub fn graph_norm(
    x: &DenseMatrix,
    p: &GraphNormParams,
    mem: &Membership,
    eps: f64,
) -> DenseMatrix {
    graph_norm_stats(x, p, mem, eps).0
}

/// Per-graph, per-channel mean and inverse standard deviation alongside the
/// output; the backward pass reuses them.
pub(crate) fn graph_norm_stats(
    x: &DenseMatrix,
    p: &GraphNormParams,
    mem: &Membership,
    eps: f64,
) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
    debug_assert_eq!(x.rows(), mem.node_count());
    debug_assert_eq!(x.cols(), p.alpha.len());
    let d = x.cols();
    let graphs = mem.graph_count();
    let mut out = DenseMatrix::zeros(x.rows(), d);
    let mut means = DenseMatrix::zeros(graphs, d);
    let mut invs = DenseMatrix::zeros(graphs, d);
    for g in 0..graphs {
        let r = mem.range(g);
        let n = r.len();
        if n == 0 {
            continue;
        }
        let scale = 1.0 / n as f64;
        let mean = means.row_mut(g);
        for i in r.clone() {
            for (c, v) in x.row(i).iter().enumerate() {
                mean[c] += v;
            }
        }
        for m in mean.iter_mut() {
            *m *= scale;
        }
        let mean = means.row(g).to_vec();
        let inv = invs.row_mut(g);
        for i in r.clone() {
            for (c, v) in x.row(i).iter().enumerate() {
                let z = v - mean[c];
                inv[c] += z * z;
            }
        }
        for v in inv.iter_mut() {
            *v = 1.0 / (*v * scale + eps).sqrt();
        }
        let inv = invs.row(g).to_vec();
        for i in r {
            let xi = x.row(i);
            let oi = out.row_mut(i);
            for c in 0..d {
                let s = xi[c] - p.alpha[c] * mean[c];
                oi[c] = p.gamma[c] * s * inv[c] + p.beta[c];
            }
        }
    }
    (out, means, invs)
}

/// Convolution over the weighted system graph (self loops included):
/// `x' = x W_root^T + (A x) W_agg^T + bias`.
pub fn graph_conv(a: &SparseSymMatrix, x: &DenseMatrix, p: &GraphConvParams) -> Result<DenseMatrix> {
    Ok(graph_conv_cached(a, x, p)?.0)
}

pub(crate) fn graph_conv_cached(
    a: &SparseSymMatrix,
    x: &DenseMatrix,
    p: &GraphConvParams,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let ax = a.spmm(x)?;
    let mut out = x.matmul_nt(&p.root);
    out.add_in_place(&ax.matmul_nt(&p.agg));
    out.add_row_bias(p.bias.as_slice());
    Ok((out, ax))
}

pub(crate) fn leaky_relu(x: &DenseMatrix, slope: f64) -> DenseMatrix {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    out
}

/// One pre-norm residual block:
/// `x + Conv2(A, LeakyReLU(Conv1(A, Norm(x))))`.
pub fn residual_block(
    a: &SparseSymMatrix,
    x: &DenseMatrix,
    p: &ResidualBlockParams,
    mem: &Membership,
    cfg: &ModelConfig,
) -> Result<DenseMatrix> {
    let u = graph_norm(x, &p.norm, mem, cfg.norm_eps);
    let v = graph_conv(a, &u, &p.conv1)?;
    let act = leaky_relu(&v, cfg.leaky_slope);
    let mut y = graph_conv(a, &act, &p.conv2)?;
    y.add_in_place(x);
    Ok(y)
}

/// Intermediate values of one block, kept for the backward pass.
pub(crate) struct BlockCache {
    pub x_in: DenseMatrix,
    pub mean: DenseMatrix,
    pub inv: DenseMatrix,
    pub u: DenseMatrix,
    pub au: DenseMatrix,
    pub v: DenseMatrix,
    pub act: DenseMatrix,
    pub a_act: DenseMatrix,
}

pub(crate) struct ForwardCache {
    pub features: DenseMatrix,
    pub blocks: Vec<BlockCache>,
    pub h_final: DenseMatrix,
    pub pre1: DenseMatrix,
    pub act1: DenseMatrix,
}

/// Full forward pass; the cache holds every intermediate the gradient needs.
pub(crate) fn forward_cached(
    a: &SparseSymMatrix,
    features: &DenseMatrix,
    mem: &Membership,
    params: &ModelParameters,
    cfg: &ModelConfig,
) -> Result<(DenseVector, ForwardCache)> {
    if features.cols() != cfg.d_in {
        return Err(Error::DimensionMismatch {
            context: "model input width",
            expected: cfg.d_in,
            found: features.cols(),
        });
    }
    if features.rows() != a.n() {
        return Err(Error::DimensionMismatch {
            context: "model input rows",
            expected: a.n(),
            found: features.rows(),
        });
    }
    if mem.node_count() != a.n() {
        return Err(Error::DimensionMismatch {
            context: "batch membership",
            expected: a.n(),
            found: mem.node_count(),
        });
    }
    params.validate(cfg)?;

    let mut h = features.matmul_nt(&params.encoder.weight);
    h.add_row_bias(params.encoder.bias.as_slice());
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for bp in &params.blocks {
        let x_in = h;
        let (u, mean, inv) = graph_norm_stats(&x_in, &bp.norm, mem, cfg.norm_eps);
        let (v, au) = graph_conv_cached(a, &u, &bp.conv1)?;
        let act = leaky_relu(&v, cfg.leaky_slope);
        let (mut y, a_act) = graph_conv_cached(a, &act, &bp.conv2)?;
        y.add_in_place(&x_in);
        h = y;
        blocks.push(BlockCache {
            x_in,
            mean,
            inv,
            u,
            au,
            v,
            act,
            a_act,
        });
    }
    let h_final = h;
    let mut pre1 = h_final.matmul_nt(&params.decoder_hidden.weight);
    pre1.add_row_bias(params.decoder_hidden.bias.as_slice());
    let act1 = leaky_relu(&pre1, cfg.leaky_slope);
    let mut out = act1.matmul_nt(&params.decoder_out.weight);
    out.add_row_bias(params.decoder_out.bias.as_slice());
    let direction = out.column(0);
    Ok((
        direction,
        ForwardCache {
            features: features.clone(),
            blocks,
            h_final,
            pre1,
            act1,
        },
    ))
}

/// Predicted direction for a (scaled) system: one scalar per node.
pub fn forward(
    a: &SparseSymMatrix,
    features: &DenseMatrix,
    mem: &Membership,
    params: &ModelParameters,
    cfg: &ModelConfig,
) -> Result<DenseVector> {
    Ok(forward_cached(a, features, mem, params, cfg)?.0)
}

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"NSLS";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A model plus everything needed to run it: shape, feature recipe, weights.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub augment: AugmentationConfig,
    pub params: ModelParameters,
}

impl TrainedModel {
    pub fn new(
        config: ModelConfig,
        augment: AugmentationConfig,
        params: ModelParameters,
    ) -> Result<TrainedModel> {
        config.validate()?;
        if config.d_in != augment.d_in() {
            return Err(Error::InvalidConfig(format!(
                "model expects input width {} but the feature recipe produces {}",
                config.d_in,
                augment.d_in()
            )));
        }
        params.validate(&config)?;
        Ok(TrainedModel {
            config,
            augment,
            params,
        })
    }

    /// Fresh model with seeded initial weights.
    pub fn init(config: ModelConfig, augment: AugmentationConfig) -> Result<TrainedModel> {
        let params = init_parameters(&config);
        TrainedModel::new(config, augment, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        TrainedModel::from_bytes(&bytes).map_err(|e| match e {
            Error::MalformedInput { reason, .. } => {
                Error::malformed(path.display().to_string(), reason)
            }
            other => other,
        })
    }

    /// Checkpoint layout (all integers little endian): magic, format version,
    /// model config, feature recipe, then each parameter group as
    /// `name length (u16), name, value count (u64), values (f64)` in
    /// [`ModelParameters::groups`] order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config.d_in as u32).to_le_bytes());
        out.extend_from_slice(&(self.config.hidden as u32).to_le_bytes());
        out.extend_from_slice(&(self.config.num_blocks as u32).to_le_bytes());
        out.extend_from_slice(&self.config.leaky_slope.to_le_bytes());
        out.extend_from_slice(&self.config.norm_eps.to_le_bytes());
        out.extend_from_slice(&self.config.seed.to_le_bytes());
        out.push(u8::from(self.augment.include_diagonal));
        out.extend_from_slice(&(self.augment.jacobi_steps as u32).to_le_bytes());
        out.extend_from_slice(&(self.augment.cg_steps as u32).to_le_bytes());
        out.extend_from_slice(&(self.augment.arnoldi_steps as u32).to_le_bytes());
        let groups = self.params.groups();
        out.extend_from_slice(&(groups.len() as u32).to_le_bytes());
        for (name, values) in groups {
            let nb = name.as_bytes();
            out.extend_from_slice(&(nb.len() as u16).to_le_bytes());
            out.extend_from_slice(nb);
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
        let mut c = ByteCursor {
            bytes,
            pos: 0,
        };
        if c.take(4)? != &CHECKPOINT_MAGIC[..] {
            return Err(bad_checkpoint("not a model checkpoint (bad magic)"));
        }
        let version = c.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(bad_checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let d_in = c.u32()? as usize;
        let hidden = c.u32()? as usize;
        let num_blocks = c.u32()? as usize;
        let leaky_slope = c.f64()?;
        let norm_eps = c.f64()?;
        let seed = c.u64()?;
        let include_diagonal = match c.u8()? {
            0 => false,
            1 => true,
            other => {
                return Err(bad_checkpoint(format!(
                    "invalid diagonal flag {other}"
                )))
            }
        };
        let jacobi_steps = c.u32()? as usize;
        let cg_steps = c.u32()? as usize;
        let arnoldi_steps = c.u32()? as usize;
        let config = ModelConfig {
            d_in,
            hidden,
            num_blocks,
            leaky_slope,
            norm_eps,
            seed,
        };
        config.validate()?;
        let augment = AugmentationConfig {
            include_diagonal,
            jacobi_steps,
            cg_steps,
            arnoldi_steps,
        };
        let mut params = ModelParameters::zeros(&config);
        let count = c.u32()? as usize;
        {
            let mut groups = params.groups_mut();
            if count != groups.len() {
                return Err(bad_checkpoint(format!(
                    "expected {} parameter groups, found {count}",
                    groups.len()
                )));
            }
            for (name, slot) in groups.iter_mut() {
                let nlen = c.u16()? as usize;
                let found = std::str::from_utf8(c.take(nlen)?)
                    .map_err(|_| bad_checkpoint("parameter name is not valid text"))?;
                if found != name {
                    return Err(bad_checkpoint(format!(
                        "parameter group out of order: expected {name}, found {found}"
                    )));
                }
                let len = c.u64()? as usize;
                if len != slot.len() {
                    return Err(bad_checkpoint(format!(
                        "group {name} has {len} values, expected {}",
                        slot.len()
                    )));
                }
                for v in slot.iter_mut() {
                    *v = c.f64()?;
                }
            }
        }
        if c.pos != bytes.len() {
            return Err(bad_checkpoint("trailing bytes after parameters"));
        }
        TrainedModel::new(config, augment, params)
    }

    /// Stage-by-stage digests of one prediction, for auditing determinism.
    pub fn trace(&self, a: &SparseSymMatrix, b: &DenseVector) -> Result<PipelineTrace> {
        let scaled = normalize_system(a, b)?;
        let feats = build_features(&scaled.matrix, &scaled.rhs, &self.augment)?;
        let mem = Membership::single(a.n());
        let direction = forward(&scaled.matrix, &feats.data, &mem, &self.params, &self.config)?;
        let mu = estimate_mu(&scaled, &direction)?;
        let x_hat = apply_magnitude(&scaled, &direction, &mu);
        Ok(PipelineTrace {
            matrix_scale: scaled.matrix_scale,
            rhs_scale: scaled.rhs_scale,
            scaled_matrix_digest: digest_matrix(&scaled.matrix),
            scaled_rhs_digest: digest_vector(&scaled.rhs),
            feature_digest: digest_dense(&feats.data),
            direction_digest: digest_vector(&direction),
            mu: mu.value,
            degenerate: mu.degenerate,
            solution_digest: digest_vector(&x_hat),
        })
    }
}

impl Predictor for TrainedModel {
    fn predict(&self, a: &SparseSymMatrix, b: &DenseVector) -> Result<Prediction> {
        let scaled = normalize_system(a, b)?;
        let feats = build_features(&scaled.matrix, &scaled.rhs, &self.augment)?;
        let mem = Membership::single(a.n());
        let direction = forward(&scaled.matrix, &feats.data, &mem, &self.params, &self.config)?;
        let mu = estimate_mu(&scaled, &direction)?;
        let x_hat = apply_magnitude(&scaled, &direction, &mu);
        Ok(Prediction {
            direction,
            mu: mu.value,
            x_hat,
            degenerate: mu.degenerate,
        })
    }
}

/// Hashes of every pipeline stage for one system.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTrace {
    pub matrix_scale: f64,
    pub rhs_scale: f64,
    pub scaled_matrix_digest: String,
    pub scaled_rhs_digest: String,
    pub feature_digest: String,
    pub direction_digest: String,
    pub mu: f64,
    pub degenerate: bool,
    pub solution_digest: String,
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(bad_checkpoint("unexpected end of data"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn bad_checkpoint(reason: impl Into<String>) -> Error {
    Error::malformed("checkpoint", reason)
}

fn digest_vector(v: &DenseVector) -> String {
    let mut h = Sha256::new();
    for x in v.iter() {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn digest_dense(m: &DenseMatrix) -> String {
    let mut h = Sha256::new();
    h.update((m.rows() as u64).to_le_bytes());
    h.update((m.cols() as u64).to_le_bytes());
    for x in m.data() {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn digest_matrix(a: &SparseSymMatrix) -> String {
    let mut h = Sha256::new();
    h.update((a.n() as u64).to_le_bytes());
    for &(r, c, v) in a.triplets() {
        h.update((r as u64).to_le_bytes());
        h.update((c as u64).to_le_bytes());
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}
