//! Online batch streams: synthetic generation, CSV ingestion, normalization
//! and fold partitioning.
//!
//! A [`BatchStream`] is immutable once built. Every stochastic operation takes
//! an explicit seed and draws from [`StreamRng`], so equal seeds give
//! bit-identical streams.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{vstack, Mat};

/// Seedable generator used for every stochastic step in the crate.
pub type StreamRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One labelled chunk `(x, y)` arriving at time `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Mat,
    pub y: Mat,
    pub index: usize,
}

impl Batch {
    pub fn new(x: Mat, y: Mat, index: usize) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::EmptyInput(format!("batch {index} has no rows")));
        }
        if x.nrows() != y.nrows() {
            return Err(Error::shape(
                format!("batch {index} rows"),
                x.nrows(),
                y.nrows(),
            ));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("batch {index} has non-finite entries")));
        }
        Ok(Batch { x, y, index })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}

/// Per-column affine map `z = (x - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineStats {
    pub method: NormMethod,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineStats {
    /// Fits column statistics of `m` under `method`.
    ///
    /// Zero-variance columns (zscore) pass through unchanged; zero-range
    /// columns (minmax01) map to 0.
    pub fn fit(m: &Mat, method: NormMethod) -> Self {
        let cols = m.ncols();
        let rows = m.nrows() as f64;
        let mut offset = vec![0.0; cols];
        let mut scale = vec![1.0; cols];
        for j in 0..cols {
            let col = m.column(j);
            match method {
                NormMethod::None => {}
                NormMethod::Zscore => {
                    let mean = col.iter().sum::<f64>() / rows;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows;
                    let std = var.sqrt();
                    if std > 0.0 {
                        offset[j] = mean;
                        scale[j] = std;
                    }
                }
                NormMethod::Minmax01 => {
                    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    offset[j] = lo;
                    if hi > lo {
                        scale[j] = hi - lo;
                    }
                }
            }
        }
        AffineStats {
            method,
            offset,
            scale,
        }
    }

    pub fn apply(&self, m: &Mat) -> Mat {
        if self.method == NormMethod::None {
            return m.clone();
        }
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
            (m[(i, j)] - self.offset[j]) / self.scale[j]
        })
    }

    pub fn invert(&self, m: &Mat) -> Mat {
        if self.method == NormMethod::None {
            return m.clone();
        }
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
            m[(i, j)] * self.scale[j] + self.offset[j]
        })
    }
}

/// Class values behind the one-hot target columns, in column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEncoding {
    pub classes: Vec<f64>,
}

impl LabelEncoding {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

/// Metadata carried along with a stream and exported next to it as JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub source: String,
    pub feature_normalization: Option<AffineStats>,
    pub target_normalization: Option<AffineStats>,
    pub encoding: Option<LabelEncoding>,
}

impl StreamMeta {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Ordered batches `t = 0..T` sharing feature width `k` and target width `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStream {
    batches: Vec<Batch>,
    feature_dim: usize,
    target_dim: usize,
    pub meta: StreamMeta,
}

impl BatchStream {
    /// Builds a stream, renumbering nothing: indices must already run 0..n.
    pub fn new(batches: Vec<Batch>, meta: StreamMeta) -> Result<Self> {
        let first = batches
            .first()
            .ok_or_else(|| Error::EmptyInput("stream has no batches".into()))?;
        let (k, m) = (first.x.ncols(), first.y.ncols());
        for (t, b) in batches.iter().enumerate() {
            if b.index != t {
                return Err(Error::Config(format!(
                    "batch indices must be contiguous from 0; position {t} holds index {}",
                    b.index
                )));
            }
            if b.x.ncols() != k {
                return Err(Error::shape(format!("batch {t} feature width"), k, b.x.ncols()));
            }
            if b.y.ncols() != m {
                return Err(Error::shape(format!("batch {t} target width"), m, b.y.ncols()));
            }
        }
        Ok(BatchStream {
            batches,
            feature_dim: k,
            target_dim: m,
            meta,
        })
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn total_rows(&self) -> usize {
        self.batches.iter().map(Batch::len).sum()
    }

    /// Largest batch size, `b_m` in the variable-batch bounds.
    pub fn max_batch_size(&self) -> usize {
        self.batches.iter().map(Batch::len).max().unwrap_or(0)
    }

    /// Stream with batches reordered by `order` (a permutation of `0..len`).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        for &i in order {
            if i >= self.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Usage("order is not a permutation of the batches".into()));
            }
        }
        if order.len() != self.len() {
            return Err(Error::Usage("order is not a permutation of the batches".into()));
        }
        let batches = order
            .iter()
            .enumerate()
            .map(|(t, &i)| Batch {
                index: t,
                ..self.batches[i].clone()
            })
            .collect();
        BatchStream::new(batches, self.meta.clone())
    }

    /// Splits every batch into consecutive sub-batches of at most `max_rows`.
    pub fn split_batches(&self, max_rows: usize) -> Result<Self> {
        if max_rows == 0 {
            return Err(Error::Config("max sub-batch size must be at least 1".into()));
        }
        let mut out = Vec::new();
        for b in &self.batches {
            let mut start = 0;
            while start < b.len() {
                let n = max_rows.min(b.len() - start);
                out.push(Batch {
                    x: b.x.rows(start, n).into_owned(),
                    y: b.y.rows(start, n).into_owned(),
                    index: out.len(),
                });
                start += n;
            }
        }
        BatchStream::new(out, self.meta.clone())
    }

    /// All rows stacked in stream order.
    pub fn stacked(&self) -> (Mat, Mat) {
        (
            vstack(self.batches.iter().map(|b| &b.x), self.feature_dim),
            vstack(self.batches.iter().map(|b| &b.y), self.target_dim),
        )
    }

    /// SHA-256 over shapes and raw float bits; equal digests mean equal streams.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.batches.len() as u64).to_le_bytes());
        for b in &self.batches {
            for m in [&b.x, &b.y] {
                h.update((m.nrows() as u64).to_le_bytes());
                h.update((m.ncols() as u64).to_le_bytes());
                for v in m.iter() {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}

/// How the noise standard deviation is derived from `noise_factor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// `eps ~ N(0, noise_factor^2)`.
    #[default]
    Absolute,
    /// `eps ~ N(0, (noise_factor * ||beta_o||_2)^2)`, i.e. relative to the
    /// standard deviation of the clean target `x . beta_o` under `x ~ N(0, I)`.
    Signal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub horizon: usize,
    pub batch_size: usize,
    pub feature_dim: usize,
    pub oracle_mean: f64,
    pub oracle_std: f64,
    pub noise_factor: f64,
    #[serde(default)]
    pub noise_scale: NoiseScale,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticConfig {
    /// Standard deviation of the target noise for oracle weights `oracle`.
    pub fn noise_std(&self, oracle: &Mat) -> f64 {
        match self.noise_scale {
            NoiseScale::Absolute => self.noise_factor,
            NoiseScale::Signal => self.noise_factor * oracle.norm(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.batch_size == 0 || self.feature_dim == 0 {
            return Err(Error::Config(
                "synthetic horizon, batch_size and feature_dim must be >= 1".into(),
            ));
        }
        if !(self.noise_factor >= 0.0) || !self.noise_factor.is_finite() {
            return Err(Error::Config("noise_factor must be finite and >= 0".into()));
        }
        if !(self.oracle_std >= 0.0) || !self.oracle_mean.is_finite() {
            return Err(Error::Config("oracle distribution parameters are invalid".into()));
        }
        Ok(())
    }
}

/// Draws `rows` extra samples `y = x beta_o + eps` from the same model,
/// e.g. a held-out test set; `seed` is independent of the stream seed.
pub fn generate_synthetic_rows(cfg: &SyntheticConfig, oracle: &Mat, rows: usize, seed: u64) -> Result<(Mat, Mat)> {
    cfg.validate()?;
    if oracle.shape() != (cfg.feature_dim, 1) {
        return Err(Error::shape("oracle weights", format!("{}x1", cfg.feature_dim), format!("{}x{}", oracle.nrows(), oracle.ncols())));
    }
    let mut rng = rng_from_seed(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let x = Mat::from_fn(rows, cfg.feature_dim, |_, _| std_normal.sample(&mut rng));
    let sigma = cfg.noise_std(oracle);
    let mut y = &x * oracle;
    if sigma > 0.0 {
        for v in y.iter_mut() {
            *v += sigma * std_normal.sample(&mut rng);
        }
    }
    Ok((x, y))
}

/// Draws `beta_o` once, then `horizon` batches with `x ~ N(0, I)` and
/// `y = x beta_o + eps`. Returns the stream and `beta_o` as a `k x 1` matrix.
pub fn generate_synthetic_stream(cfg: &SyntheticConfig) -> Result<(BatchStream, Mat)> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let k = cfg.feature_dim;
    let oracle_dist = Normal::new(cfg.oracle_mean, cfg.oracle_std)
        .map_err(|e| Error::Config(e.to_string()))?;
    let oracle = Mat::from_fn(k, 1, |_, _| oracle_dist.sample(&mut rng));
    let sigma = cfg.noise_std(&oracle);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut batches = Vec::with_capacity(cfg.horizon);
    for t in 0..cfg.horizon {
        let x = Mat::from_fn(cfg.batch_size, k, |_, _| std_normal.sample(&mut rng));
        let mut y = &x * &oracle;
        if sigma > 0.0 {
            for v in y.iter_mut() {
                *v += sigma * std_normal.sample(&mut rng);
            }
        }
        batches.push(Batch::new(x, y, t)?);
    }
    let meta = StreamMeta {
        source: format!("synthetic(seed={})", cfg.seed),
        ..Default::default()
    };
    Ok((BatchStream::new(batches, meta)?, oracle))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    #[default]
    Regression,
    Classification,
}

/// A loaded table, before it is cut into batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Mat,
    pub y: Mat,
    /// Class index per row for classification tables.
    pub labels: Option<Vec<usize>>,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub encoding: Option<LabelEncoding>,
    pub source: String,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    /// Rows picked by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let pick = |m: &Mat| Mat::from_fn(indices.len(), m.ncols(), |i, j| m[(indices[i], j)]);
        Dataset {
            x: pick(&self.x),
            y: pick(&self.y),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            encoding: self.encoding.clone(),
            source: self.source.clone(),
        }
    }

    /// Optionally shuffles rows, then cuts them into batches of
    /// `floor(rows * batch_fraction)` rows; a short final batch is kept.
    pub fn into_stream(&self, batch_fraction: f64, shuffle_seed: Option<u64>) -> Result<BatchStream> {
        if !(batch_fraction > 0.0 && batch_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "batch_fraction must lie in (0, 1], got {batch_fraction}"
            )));
        }
        let n = self.n_rows();
        if n == 0 {
            return Err(Error::EmptyInput(format!("{} has no rows", self.source)));
        }
        let mut order: Vec<usize> = (0..n).collect();
        if let Some(seed) = shuffle_seed {
            order.shuffle(&mut rng_from_seed(seed));
        }
        let size = ((n as f64 * batch_fraction).floor() as usize).max(1);
        let mut batches = Vec::new();
        for chunk in order.chunks(size) {
            let x = Mat::from_fn(chunk.len(), self.x.ncols(), |i, j| self.x[(chunk[i], j)]);
            let y = Mat::from_fn(chunk.len(), self.y.ncols(), |i, j| self.y[(chunk[i], j)]);
            batches.push(Batch::new(x, y, batches.len())?);
        }
        let meta = StreamMeta {
            source: self.source.clone(),
            encoding: self.encoding.clone(),
            ..Default::default()
        };
        BatchStream::new(batches, meta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub target_columns: Vec<String>,
    #[serde(default)]
    pub target_kind: TargetKind,
}

/// Reads a headed, comma-separated numeric table. Columns named in
/// `target_columns` become targets; every other column is a feature.
/// Classification tables take a single label column that is one-hot encoded
/// over its sorted distinct values.
pub fn load_csv_dataset(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_dataset(file, opts, &path.display().to_string())
}

pub fn read_csv_dataset(
    reader: impl std::io::Read,
    opts: &CsvOptions,
    source: &str,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            column: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyInput(format!("{source} has no header")));
    }
    if opts.target_columns.is_empty() {
        return Err(Error::Config("at least one target column is required".into()));
    }
    let mut target_idx = Vec::new();
    for name in &opts.target_columns {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("target column `{name}` not in {source}")))?;
        target_idx.push(idx);
    }
    if opts.target_kind == TargetKind::Classification && target_idx.len() != 1 {
        return Err(Error::Config(
            "classification tables take exactly one label column".into(),
        ));
    }
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|i| !target_idx.contains(i))
        .collect();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut n = 0usize;
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::Parse {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row: line,
                column: record.len() + 1,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let cell = |c: usize| -> Result<f64> {
            let raw = &record[c];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: line,
                    column: c + 1,
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        for &c in &feature_idx {
            xs.push(cell(c)?);
        }
        for &c in &target_idx {
            ys.push(cell(c)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput(format!("{source} has no data rows")));
    }
    let x = Mat::from_row_slice(n, feature_idx.len(), &xs);
    let target_names: Vec<String> = target_idx.iter().map(|&i| headers[i].clone()).collect();
    let feature_names = feature_idx.iter().map(|&i| headers[i].clone()).collect();

    let (y, labels, encoding) = match opts.target_kind {
        TargetKind::Regression => (Mat::from_row_slice(n, target_idx.len(), &ys), None, None),
        TargetKind::Classification => {
            let (labels, encoding) = encode_labels(&ys);
            (one_hot(&labels, encoding.n_classes()), Some(labels), Some(encoding))
        }
    };
    Ok(Dataset {
        x,
        y,
        labels,
        feature_names,
        target_names,
        encoding,
        source: source.to_owned(),
    })
}

/// Maps raw label values onto `0..n_classes` by sorted distinct value.
pub fn encode_labels(raw: &[f64]) -> (Vec<usize>, LabelEncoding) {
    let mut classes: Vec<f64> = raw.to_vec();
    classes.sort_by(|a, b| a.total_cmp(b));
    classes.dedup();
    let labels = raw
        .iter()
        .map(|v| {
            classes
                .binary_search_by(|c| c.total_cmp(v))
                .expect("value present")
        })
        .collect();
    (labels, LabelEncoding { classes })
}

pub fn one_hot(labels: &[usize], n_classes: usize) -> Mat {
    Mat::from_fn(labels.len(), n_classes, |i, j| {
        if labels[i] == j {
            1.0
        } else {
            0.0
        }
    })
}

/// Loads a CSV table and cuts it into an online stream.
pub fn load_csv_stream(
    path: impl AsRef<Path>,
    opts: &CsvOptions,
    batch_fraction: f64,
    shuffle_seed: Option<u64>,
) -> Result<BatchStream> {
    load_csv_dataset(path, opts)?.into_stream(batch_fraction, shuffle_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    #[default]
    Zscore,
    Minmax01,
    None,
}

/// Which batches supply the normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsSource {
    /// The first `n` batches.
    TrainPrefix(usize),
    Global,
}

fn stats_rows(
    stream: &BatchStream,
    source: StatsSource,
) -> Result<&[Batch]> {
    match source {
        StatsSource::Global => Ok(stream.batches()),
        StatsSource::TrainPrefix(n) if n >= 1 && n <= stream.len() => Ok(&stream.batches()[..n]),
        StatsSource::TrainPrefix(n) => Err(Error::Config(format!(
            "statistics prefix of {n} batches is outside 1..={}",
            stream.len()
        ))),
    }
}

/// Applies one per-feature affine map to every batch; the statistics are
/// recorded in the returned stream's metadata.
pub fn normalize(stream: &BatchStream, method: NormMethod, source: StatsSource) -> Result<BatchStream> {
    let rows = stats_rows(stream, source)?;
    let stats = AffineStats::fit(&vstack(rows.iter().map(|b| &b.x), stream.feature_dim), method);
    if method == NormMethod::None {
        let mut out = stream.clone();
        out.meta.feature_normalization = Some(stats);
        return Ok(out);
    }
    let batches = stream
        .batches()
        .iter()
        .map(|b| Batch {
            x: stats.apply(&b.x),
            ..b.clone()
        })
        .collect();
    let mut meta = stream.meta.clone();
    meta.feature_normalization = Some(stats);
    BatchStream::new(batches, meta)
}

/// Same as [`normalize`] but for the target columns.
pub fn normalize_targets(
    stream: &BatchStream,
    method: NormMethod,
    source: StatsSource,
) -> Result<BatchStream> {
    let rows = stats_rows(stream, source)?;
    let stats = AffineStats::fit(&vstack(rows.iter().map(|b| &b.y), stream.target_dim), method);
    let batches = stream
        .batches()
        .iter()
        .map(|b| Batch {
            y: stats.apply(&b.y),
            ..b.clone()
        })
        .collect();
    let mut meta = stream.meta.clone();
    meta.target_normalization = Some(stats);
    BatchStream::new(batches, meta)
}

/// Row indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n_rows`, detaches `holdout_fraction` of them as a shared
/// validation set, and splits the remainder into `n_folds` near-equal test
/// folds. Fold `i` trains on every other fold.
pub fn partition_folds(
    n_rows: usize,
    n_folds: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<Vec<FoldSplit>> {
    if n_folds < 2 {
        return Err(Error::Config("n_folds must be >= 2".into()));
    }
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::Config(format!(
            "holdout_fraction must lie in [0, 1), got {holdout_fraction}"
        )));
    }
    let n_holdout = (n_rows as f64 * holdout_fraction).round() as usize;
    let remaining = n_rows.saturating_sub(n_holdout);
    if remaining < n_folds {
        return Err(Error::Sizing(format!(
            "{n_rows} rows leave {remaining} for {n_folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let (validation, rest) = order.split_at(n_holdout);

    let base = remaining / n_folds;
    let extra = remaining % n_folds;
    let mut bounds = Vec::with_capacity(n_folds + 1);
    bounds.push(0);
    for f in 0..n_folds {
        let size = base + usize::from(f < extra);
        bounds.push(bounds[f] + size);
    }
    Ok((0..n_folds)
        .map(|f| {
            let test = rest[bounds[f]..bounds[f + 1]].to_vec();
            let train = rest[..bounds[f]]
                .iter()
                .chain(&rest[bounds[f + 1]..])
                .copied()
                .collect();
            FoldSplit {
                train,
                validation: validation.to_vec(),
                test,
            }
        })
        .collect())
}

/// Shuffled train/test split; the first `test_fraction` of the shuffled rows
/// are held out.
pub fn train_test_split(n_rows: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Config(format!(
            "test_fraction must lie in [0, 1), got {test_fraction}"
        )));
    }
    let n_test = (n_rows as f64 * test_fraction).round() as usize;
    if n_test >= n_rows {
        return Err(Error::Sizing(format!("{n_rows} rows cannot hold out {n_test}")));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let test = order[..n_test].to_vec();
    let train = order[n_test..].to_vec();
    Ok((train, test))
}
