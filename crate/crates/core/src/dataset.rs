//! Synthetic SPD system generation and corpus storage.
//!
//! Generators are pure functions of their parameters and a 64-bit seed; all
//! randomness comes from ChaCha8 streams so samples are bit-reproducible on
//! any platform with IEEE-754 doubles. Ground-truth solutions are sampled
//! first and right-hand sides constructed as `b = A x`, never solved for.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::mm::{read_matrix_file, read_vector_file, write_matrix_file, write_vector_file};
use crate::sparse::SparseSymMatrix;

pub const GRID_COEFF_RANGE: (f64, f64) = (0.1, 10.0);
/// Diagonal shift, relative to the largest coefficient magnitude, that turns
/// the singular grid stiffness matrix strictly positive-definite.
pub const GRID_RELATIVE_SHIFT: f64 = 1e-8;
pub const SPD_DIAGONAL_FLOOR: f64 = 1e-6;
/// Per-sample solution scales drawn log-uniformly from this range in
/// wide-scale mode.
pub const WIDE_SCALE_RANGE: (f64, f64) = (1e-8, 1.0);
pub const SAMPLE_RESIDUAL_TOL: f64 = 1e-12;
pub const MANIFEST_MAGIC: &str = "nsls-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeta {
    pub generator: String,
    pub seed: u64,
    pub n: usize,
    /// Stored upper-triangle nonzeros.
    pub nnz: usize,
    pub condition: Option<f64>,
}

/// One system with its exact ground truth; the unit of corpus storage.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystemSample {
    pub a: SparseSymMatrix,
    pub b: DenseVector,
    pub x: DenseVector,
    pub meta: SampleMeta,
}

impl LinearSystemSample {
    /// `||A x - b|| / ||b||` of the stored triple (absolute when b is zero).
    pub fn relative_residual(&self) -> Result<f64> {
        let r = self.a.spmv(&self.x)?.sub(&self.b).norm2();
        let nb = self.b.norm2();
        Ok(if nb > 0.0 { r / nb } else { r })
    }
}

fn path_str(p: impl AsRef<Path>) -> String {
    p.as_ref().display().to_string()
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

fn uniform_signed(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * rng.gen::<f64>() - 1.0
}

/// Mixes a base seed with a sample index so bulk generation gets
/// uncorrelated per-sample seeds (SplitMix64 finalizer).
pub fn sample_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Assembles the weighted 5-point-stencil stiffness matrix on a `rows x cols`
/// grid. `horizontal[r*(cols-1)+c]` couples node (r,c) to (r,c+1);
/// `vertical[r*cols+c]` couples (r,c) to (r+1,c). Each diagonal entry is the
/// sum of incident coefficients plus `relative_shift` times the largest
/// entry magnitude.
pub fn grid_stiffness(
    rows: usize,
    cols: usize,
    horizontal: &[f64],
    vertical: &[f64],
    relative_shift: f64,
) -> Result<SparseSymMatrix> {
    let n = rows * cols;
    if n < 2 {
        return Err(Error::InvalidConfig(
            "grid needs at least two nodes".into(),
        ));
    }
    let h_expected = rows * (cols - 1);
    let v_expected = (rows - 1) * cols;
    if horizontal.len() != h_expected {
        return Err(Error::DimensionMismatch {
            context: "horizontal grid coefficients",
            expected: h_expected,
            found: horizontal.len(),
        });
    }
    if vertical.len() != v_expected {
        return Err(Error::DimensionMismatch {
            context: "vertical grid coefficients",
            expected: v_expected,
            found: vertical.len(),
        });
    }
    let node = |r: usize, c: usize| r * cols + c;
    let mut diag = vec![0.0f64; n];
    let mut off: Vec<(usize, usize, f64)> = Vec::with_capacity(h_expected + v_expected);
    let mut max_abs = 0.0f64;
    for r in 0..rows {
        for c in 0..cols - 1 {
            let w = horizontal[r * (cols - 1) + c];
            let (i, j) = (node(r, c), node(r, c + 1));
            diag[i] += w;
            diag[j] += w;
            off.push((i, j, -w));
            max_abs = max_abs.max(w.abs());
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols {
            let w = vertical[r * cols + c];
            let (i, j) = (node(r, c), node(r + 1, c));
            diag[i] += w;
            diag[j] += w;
            off.push((i, j, -w));
            max_abs = max_abs.max(w.abs());
        }
    }
    for &d in &diag {
        max_abs = max_abs.max(d.abs());
    }
    let shift = relative_shift * max_abs;
    let triplets = diag
        .iter()
        .enumerate()
        .map(|(i, &d)| (i, i, d + shift))
        .chain(off);
    SparseSymMatrix::from_triplets(n, triplets)
}

fn grid_sample(
    rows: usize,
    cols: usize,
    coeff_range: (f64, f64),
    wide_scale: bool,
    seed: u64,
) -> Result<LinearSystemSample> {
    let (lo, hi) = coeff_range;
    if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi < lo {
        return Err(Error::InvalidConfig(
            "coefficient range must be finite, positive, and ordered".into(),
        ));
    }
    let n = rows * cols;
    if n < 2 {
        return Err(Error::InvalidConfig(
            "grid needs at least two nodes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizontal: Vec<f64> = (0..rows * (cols - 1))
        .map(|_| uniform_in(&mut rng, lo, hi))
        .collect();
    let vertical: Vec<f64> = (0..(rows - 1) * cols)
        .map(|_| uniform_in(&mut rng, lo, hi))
        .collect();
    let a = grid_stiffness(rows, cols, &horizontal, &vertical, GRID_RELATIVE_SHIFT)?;
    let scale = if wide_scale {
        let (slo, shi) = WIDE_SCALE_RANGE;
        10f64.powf(uniform_in(&mut rng, slo.log10(), shi.log10()))
    } else {
        1.0
    };
    let x = DenseVector::from_vec((0..n).map(|_| scale * uniform_signed(&mut rng)).collect());
    let b = a.spmv(&x)?;
    let meta = SampleMeta {
        generator: if wide_scale { "grid-wide" } else { "grid" }.into(),
        seed,
        n,
        nnz: a.stored_nnz(),
        condition: None,
    };
    Ok(LinearSystemSample { a, b, x, meta })
}

/// Diffusion system on a 2-D grid: per-edge conductivities uniform in
/// `coeff_range`, solution components uniform in [-1, 1].
pub fn generate_grid_system(
    rows: usize,
    cols: usize,
    coeff_range: (f64, f64),
    seed: u64,
) -> Result<LinearSystemSample> {
    grid_sample(rows, cols, coeff_range, false, seed)
}

/// Same stencil, but the whole solution is additionally scaled by a
/// log-uniform factor from `WIDE_SCALE_RANGE`, imitating corpora whose
/// solution magnitudes span many decades.
pub fn generate_grid_system_wide(
    rows: usize,
    cols: usize,
    coeff_range: (f64, f64),
    seed: u64,
) -> Result<LinearSystemSample> {
    grid_sample(rows, cols, coeff_range, true, seed)
}

/// Draws grid dimensions whose node count lands in `[min_n, max_n]`.
pub fn draw_grid_dims(min_n: usize, max_n: usize, seed: u64) -> Result<(usize, usize)> {
    if min_n < 2 || max_n < min_n {
        return Err(Error::InvalidConfig(
            "grid size range must satisfy 2 <= min <= max".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row_cap = (max_n as f64).sqrt().floor() as usize;
    for _ in 0..1000 {
        let rows = rng.gen_range(2..=row_cap.max(2));
        let cols_lo = min_n.div_ceil(rows).max(1);
        let cols_hi = max_n / rows;
        if cols_lo > cols_hi {
            continue;
        }
        let cols = rng.gen_range(cols_lo..=cols_hi);
        return Ok((rows, cols));
    }
    Err(Error::InvalidConfig(
        "could not draw grid dimensions in the requested range".into(),
    ))
}

/// Random strictly positive-definite system: `A = G^T G + floor * I` with a
/// sparse random G, solution components uniform in [-1, 1].
pub fn generate_random_spd(n: usize, density: f64, seed: u64) -> Result<LinearSystemSample> {
    if n == 0 {
        return Err(Error::InvalidConfig("system size must be positive".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidConfig(
            "density must lie in (0, 1]".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DenseMatrix::zeros(n, n);
    for v in g.data_mut() {
        if rng.gen::<f64>() < density {
            *v = uniform_signed(&mut rng);
        }
    }
    let mut c = g.matmul_tn(&g);
    for i in 0..n {
        let d = c.get(i, i) + SPD_DIAGONAL_FLOOR;
        c.set(i, i, d);
    }
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in i..n {
            let v = c.get(i, j);
            if v != 0.0 {
                triplets.push((i, j, v));
            }
        }
    }
    let a = SparseSymMatrix::from_triplets(n, triplets)?;
    let x = DenseVector::from_vec((0..n).map(|_| uniform_signed(&mut rng)).collect());
    let b = a.spmv(&x)?;
    let meta = SampleMeta {
        generator: "random-spd".into(),
        seed,
        n,
        nnz: a.stored_nnz(),
        condition: None,
    };
    Ok(LinearSystemSample { a, b, x, meta })
}

fn stem_file(stem: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{}", stem.display(), suffix))
}

/// The four files a sample occupies, derived from its path stem.
pub fn sample_paths(stem: impl AsRef<Path>) -> [PathBuf; 4] {
    let stem = stem.as_ref();
    [
        stem_file(stem, ".A.mtx"),
        stem_file(stem, ".b.mtx"),
        stem_file(stem, ".x.mtx"),
        stem_file(stem, ".meta"),
    ]
}

fn meta_to_text(meta: &SampleMeta) -> String {
    let mut out = String::new();
    out.push_str(&format!("generator = {}\n", meta.generator));
    out.push_str(&format!("seed = {}\n", meta.seed));
    out.push_str(&format!("n = {}\n", meta.n));
    out.push_str(&format!("nnz = {}\n", meta.nnz));
    if let Some(c) = meta.condition {
        out.push_str(&format!("condition = {c:e}\n"));
    }
    out
}

fn meta_from_text(text: &str, origin: &Path) -> Result<SampleMeta> {
    let mut generator = None;
    let mut seed = None;
    let mut n = None;
    let mut nnz = None;
    let mut condition = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::malformed(path_str(origin), format!("metadata line without '=': {line}"))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| Error::malformed(path_str(origin), format!("bad {what}: {value}"));
        match key {
            "generator" => generator = Some(value.to_string()),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad("size"))?),
            "nnz" => nnz = Some(value.parse::<usize>().map_err(|_| bad("nnz"))?),
            "condition" => {
                condition = Some(value.parse::<f64>().map_err(|_| bad("condition"))?)
            }
            _ => {
                return Err(Error::malformed(
                    path_str(origin),
                    format!("unknown metadata key: {key}"),
                ))
            }
        }
    }
    let missing =
        |what: &str| Error::malformed(path_str(origin), format!("missing metadata key: {what}"));
    Ok(SampleMeta {
        generator: generator.ok_or_else(|| missing("generator"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        n: n.ok_or_else(|| missing("n"))?,
        nnz: nnz.ok_or_else(|| missing("nnz"))?,
        condition,
    })
}

/// Writes the sample as `<stem>.A.mtx`, `<stem>.b.mtx`, `<stem>.x.mtx`, and
/// `<stem>.meta`; returns the paths in that order.
pub fn save_sample(stem: impl AsRef<Path>, sample: &LinearSystemSample) -> Result<[PathBuf; 4]> {
    let paths = sample_paths(&stem);
    write_matrix_file(&paths[0], &sample.a)?;
    write_vector_file(&paths[1], &sample.b)?;
    write_vector_file(&paths[2], &sample.x)?;
    fs::write(&paths[3], meta_to_text(&sample.meta))
        .map_err(|e| Error::io(path_str(&paths[3]), e))?;
    Ok(paths)
}

/// Reads a sample back and cross-checks metadata and the stored residual;
/// disagreement is treated as corruption.
pub fn load_sample(stem: impl AsRef<Path>) -> Result<LinearSystemSample> {
    let stem = stem.as_ref();
    let paths = sample_paths(stem);
    let a = read_matrix_file(&paths[0])?;
    let b = read_vector_file(&paths[1])?;
    let x = read_vector_file(&paths[2])?;
    let meta_text =
        fs::read_to_string(&paths[3]).map_err(|e| Error::io(path_str(&paths[3]), e))?;
    let meta = meta_from_text(&meta_text, &paths[3])?;
    if b.len() != a.n() || x.len() != a.n() {
        return Err(Error::malformed(
            path_str(stem),
            "vector lengths disagree with the matrix",
        ));
    }
    if meta.n != a.n() || meta.nnz != a.stored_nnz() {
        return Err(Error::malformed(
            path_str(&paths[3]),
            "metadata disagrees with the stored matrix",
        ));
    }
    let sample = LinearSystemSample { a, b, x, meta };
    if sample.relative_residual()? > SAMPLE_RESIDUAL_TOL {
        return Err(Error::InconsistentSample {
            path: stem.display().to_string(),
        });
    }
    Ok(sample)
}

/// Loads a bare Matrix Market symmetric matrix and synthesizes ground truth
/// for it: solution uniform in [-1, 1] from the seed, `b = A x`.
pub fn load_matrix_only(path: impl AsRef<Path>, seed: u64) -> Result<LinearSystemSample> {
    let path = path.as_ref();
    let a = read_matrix_file(path)?;
    if a.n() == 0 {
        return Err(Error::malformed(path_str(path), "matrix is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DenseVector::from_vec((0..a.n()).map(|_| uniform_signed(&mut rng)).collect());
    let b = a.spmv(&x)?;
    let meta = SampleMeta {
        generator: "external".into(),
        seed,
        n: a.n(),
        nnz: a.stored_nnz(),
        condition: None,
    };
    Ok(LinearSystemSample { a, b, x, meta })
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Sample path stem, relative to the manifest's directory.
    pub stem: String,
    /// Checksums of the A, b, x, and meta files, in that order.
    pub checksums: [String; 4],
}

/// Line-oriented split description: which samples belong to it and what their
/// files hashed to when the split was made.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub split: String,
    /// Free-form snapshot of the generator configuration.
    pub generator: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MANIFEST_MAGIC} {MANIFEST_VERSION}\n");
        out.push_str(&format!("split {}\n", self.split));
        out.push_str(&format!("generator {}\n", self.generator));
        for e in &self.entries {
            out.push_str(&format!(
                "sample {} {} {} {} {}\n",
                e.stem, e.checksums[0], e.checksums[1], e.checksums[2], e.checksums[3]
            ));
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<DatasetManifest> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::malformed(path_str(origin), "empty manifest"))?;
        let expected = format!("{MANIFEST_MAGIC} {MANIFEST_VERSION}");
        if header.trim() != expected {
            return Err(Error::malformed(
                path_str(origin),
                format!("bad manifest header: {header}"),
            ));
        }
        let mut split = None;
        let mut generator = None;
        let mut entries = Vec::new();
        for line in lines {
            let line = line.trim();
            let (kind, rest) = line
                .split_once(' ')
                .ok_or_else(|| {
                    Error::malformed(path_str(origin), format!("bad manifest line: {line}"))
                })?;
            match kind {
                "split" => split = Some(rest.trim().to_string()),
                "generator" => generator = Some(rest.trim().to_string()),
                "sample" => {
                    let fields: Vec<&str> = rest.split_whitespace().collect();
                    if fields.len() != 5 {
                        return Err(Error::malformed(
                            path_str(origin),
                            format!("sample line needs stem plus 4 checksums: {line}"),
                        ));
                    }
                    entries.push(ManifestEntry {
                        stem: fields[0].to_string(),
                        checksums: [
                            fields[1].to_string(),
                            fields[2].to_string(),
                            fields[3].to_string(),
                            fields[4].to_string(),
                        ],
                    });
                }
                _ => {
                    return Err(Error::malformed(
                        path_str(origin),
                        format!("unknown manifest line: {line}"),
                    ))
                }
            }
        }
        Ok(DatasetManifest {
            split: split.ok_or_else(|| Error::malformed(path_str(origin), "missing split line"))?,
            generator: generator
                .ok_or_else(|| Error::malformed(path_str(origin), "missing generator line"))?,
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path_str(path), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DatasetManifest> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path_str(path), e))?;
        DatasetManifest::from_text(&text, path)
    }

    /// Loads every listed sample from `base_dir`, verifying all checksums
    /// first.
    pub fn load_samples(&self, base_dir: impl AsRef<Path>) -> Result<Vec<LinearSystemSample>> {
        let base = base_dir.as_ref();
        let mut out = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let stem = base.join(&e.stem);
            let paths = sample_paths(&stem);
            for (path, expected) in paths.iter().zip(&e.checksums) {
                let actual = file_sha256(path)?;
                if actual != *expected {
                    return Err(Error::ChecksumMismatch {
                        path: path.display().to_string(),
                    });
                }
            }
            out.push(load_sample(&stem)?);
        }
        Ok(out)
    }
}

/// Hashes the stems' files and assembles a manifest for one split.
pub fn build_manifest(
    split: impl Into<String>,
    generator: impl Into<String>,
    stems: &[String],
    base_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    let base = base_dir.as_ref();
    let mut entries = Vec::with_capacity(stems.len());
    for stem in stems {
        if stem.chars().any(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!(
                "sample stem contains whitespace: {stem}"
            )));
        }
        let paths = sample_paths(base.join(stem));
        let mut checksums = Vec::with_capacity(4);
        for p in &paths {
            checksums.push(file_sha256(p)?);
        }
        entries.push(ManifestEntry {
            stem: stem.clone(),
            checksums: checksums.try_into().expect("four files per sample"),
        });
    }
    Ok(DatasetManifest {
        split: split.into(),
        generator: generator.into(),
        entries,
    })
}

/// Deterministic shuffled partition of `0..count` into train/val/test index
/// sets with the given fractions.
pub fn make_splits(
    count: usize,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<[Vec<usize>; 3]> {
    if count == 0 {
        return Err(Error::InvalidConfig("cannot split an empty corpus".into()));
    }
    let (f0, f1, f2) = fractions;
    if !(f0 >= 0.0 && f1 >= 0.0 && f2 >= 0.0) || (f0 + f1 + f2 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(
            "split fractions must be nonnegative and sum to 1".into(),
        ));
    }
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let n0 = ((count as f64) * f0).round() as usize;
    let n1 = ((count as f64) * f1).round() as usize;
    let n0 = n0.min(count);
    let n1 = n1.min(count - n0);
    let train = order[..n0].to_vec();
    let val = order[n0..n0 + n1].to_vec();
    let test = order[n0 + n1..].to_vec();
    Ok([train, val, test])
}
