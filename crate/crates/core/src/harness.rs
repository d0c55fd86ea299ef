//! Run configuration, the synthetic accuracy experiment and the keyframe
//! sampling policy.

use crate::features::{self, FeatureError};
use crate::gmm::GmmError;
use crate::image::{gen_scene, Image, ImageError};
use crate::linalg::{LinalgError, Matrix};
use crate::mrf::{AnnealSchedule, GameConfig, MrfError, SweepOrder};
use crate::net::{self, Dataset, LossWeights, NetError, NetSpec, TrainConfig};
use crate::par;
use crate::preprocess::{self, FilterMode, PreprocessError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Mrf(#[from] MrfError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("keyframe policy needs fps > 0 and interval > 0, got fps={fps}, interval={interval}")]
    BadKeyframePolicy { fps: f64, interval: f64 },
    #[error("no action for class {0}; classes are 0..=4")]
    UnknownClass(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classifier {
    /// The triplet/cross-entropy CNN.
    Cnn,
    /// Nearest class centroid over the block features kept by correlation
    /// clustering.
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enhancement {
    None,
    Equalize,
    Lowpass,
    Highpass,
    Haar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Icm,
    Anneal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Potts,
    Quadratic,
}

/// Every tunable of the library and CLI. Parsed from flat `key = value`
/// text; `#` starts a comment line. See [`RunConfig::KEYS`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    // experiment
    pub sizes: Vec<usize>,
    pub noise_levels: Vec<u8>,
    pub trials: usize,
    pub images_per_class: usize,
    pub test_fraction: f64,
    pub classifier: Classifier,
    pub theta: f64,
    // preprocessing
    pub enhancement: Enhancement,
    pub cutoff: f64,
    // network
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub margin: f64,
    pub triplets_per_anchor: usize,
    pub loss_weights: Vec<f64>,
    pub augment: bool,
    // mixture fit
    pub components: usize,
    pub em_epsilon: f64,
    pub em_max_iters: usize,
    // labeling game
    pub beta: f64,
    pub prior: PriorKind,
    pub solver: Solver,
    pub order: SweepOrder,
    pub max_sweeps: usize,
    pub t0: f64,
    pub decay: f64,
    pub sweeps_per_t: usize,
    pub radius: u32,
    pub ellipticity: f64,
    // keyframes
    pub fps: f64,
    pub interval_s: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let schedule = AnnealSchedule::default();
        let train = TrainConfig::default();
        Self {
            seed: 0,
            sizes: vec![20],
            noise_levels: vec![1],
            trials: 1,
            images_per_class: 200,
            test_fraction: 0.2,
            classifier: Classifier::Cnn,
            theta: 0.9,
            enhancement: Enhancement::Equalize,
            cutoff: 0.5,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            margin: train.margin,
            triplets_per_anchor: train.triplets_per_anchor,
            loss_weights: train.loss_weights.values().to_vec(),
            augment: false,
            components: 2,
            em_epsilon: 1e-6,
            em_max_iters: 200,
            beta: 1.0,
            prior: PriorKind::Potts,
            solver: Solver::Icm,
            order: SweepOrder::Raster,
            max_sweeps: GameConfig::default().max_sweeps,
            t0: schedule.t0,
            decay: schedule.decay,
            sweeps_per_t: schedule.sweeps_per_t,
            radius: 2,
            ellipticity: 0.5,
            fps: 20.0,
            interval_s: 3.0,
        }
    }
}

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), value: value.to_string(), reason: reason.to_string() }
}

fn scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| scalar(key, v.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub const KEYS: [&'static str; 32] = [
        "seed",
        "sizes",
        "noise_levels",
        "trials",
        "images_per_class",
        "test_fraction",
        "classifier",
        "theta",
        "enhancement",
        "cutoff",
        "epochs",
        "learning_rate",
        "batch_size",
        "margin",
        "triplets_per_anchor",
        "loss_weights",
        "augment",
        "components",
        "em_epsilon",
        "em_max_iters",
        "beta",
        "prior",
        "solver",
        "order",
        "max_sweeps",
        "t0",
        "decay",
        "sweeps_per_t",
        "radius",
        "ellipticity",
        "fps",
        "interval_s",
    ];

    /// Parses and validates config text over the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if !Self::KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line: i + 1, key: key.to_string() });
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::DuplicateKey { line: i + 1, key: key.to_string() });
            }
            seen.push(key.to_string());
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its textual value without validating the result.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "seed" => self.seed = scalar(key, value)?,
            "sizes" => self.sizes = list(key, value)?,
            "noise_levels" => self.noise_levels = list(key, value)?,
            "trials" => self.trials = scalar(key, value)?,
            "images_per_class" => self.images_per_class = scalar(key, value)?,
            "test_fraction" => self.test_fraction = scalar(key, value)?,
            "classifier" => {
                self.classifier = match value {
                    "cnn" => Classifier::Cnn,
                    "centroid" => Classifier::Centroid,
                    _ => return Err(bad(key, value, "expected cnn or centroid")),
                }
            }
            "theta" => self.theta = scalar(key, value)?,
            "enhancement" => {
                self.enhancement = match value {
                    "none" => Enhancement::None,
                    "equalize" => Enhancement::Equalize,
                    "lowpass" => Enhancement::Lowpass,
                    "highpass" => Enhancement::Highpass,
                    "haar" => Enhancement::Haar,
                    _ => return Err(bad(key, value, "expected none, equalize, lowpass, highpass or haar")),
                }
            }
            "cutoff" => self.cutoff = scalar(key, value)?,
            "epochs" => self.epochs = scalar(key, value)?,
            "learning_rate" => self.learning_rate = scalar(key, value)?,
            "batch_size" => self.batch_size = scalar(key, value)?,
            "margin" => self.margin = scalar(key, value)?,
            "triplets_per_anchor" => self.triplets_per_anchor = scalar(key, value)?,
            "loss_weights" => self.loss_weights = list(key, value)?,
            "augment" => self.augment = scalar(key, value)?,
            "components" => self.components = scalar(key, value)?,
            "em_epsilon" => self.em_epsilon = scalar(key, value)?,
            "em_max_iters" => self.em_max_iters = scalar(key, value)?,
            "beta" => self.beta = scalar(key, value)?,
            "prior" => {
                self.prior = match value {
                    "potts" => PriorKind::Potts,
                    "quadratic" => PriorKind::Quadratic,
                    _ => return Err(bad(key, value, "expected potts or quadratic")),
                }
            }
            "solver" => {
                self.solver = match value {
                    "icm" => Solver::Icm,
                    "anneal" => Solver::Anneal,
                    _ => return Err(bad(key, value, "expected icm or anneal")),
                }
            }
            "order" => {
                self.order = match value {
                    "raster" => SweepOrder::Raster,
                    "checkerboard" => SweepOrder::Checkerboard,
                    _ => return Err(bad(key, value, "expected raster or checkerboard")),
                }
            }
            "max_sweeps" => self.max_sweeps = scalar(key, value)?,
            "t0" => self.t0 = scalar(key, value)?,
            "decay" => self.decay = scalar(key, value)?,
            "sweeps_per_t" => self.sweeps_per_t = scalar(key, value)?,
            "radius" => self.radius = scalar(key, value)?,
            "ellipticity" => self.ellipticity = scalar(key, value)?,
            "fps" => self.fps = scalar(key, value)?,
            "interval_s" => self.interval_s = scalar(key, value)?,
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.to_string() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &'static str, reason: &str| Err(ConfigError::Invalid { key, reason: reason.to_string() });
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.sizes.is_empty() || self.sizes.iter().any(|&s| s < 12) {
            return invalid("sizes", "need at least one size, each >= 12");
        }
        if self.noise_levels.is_empty() || self.noise_levels.iter().any(|&n| !(1..=3).contains(&n)) {
            return invalid("noise_levels", "need at least one level, each in 1..=3");
        }
        if self.trials == 0 {
            return invalid("trials", "must be >= 1");
        }
        if self.images_per_class == 0 {
            return invalid("images_per_class", "must be >= 1");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return invalid("test_fraction", "must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return invalid("theta", "must be in [0, 1]");
        }
        if !(self.cutoff > 0.0 && self.cutoff <= 1.0) {
            return invalid("cutoff", "must be in (0, 1]");
        }
        if !positive(self.learning_rate) {
            return invalid("learning_rate", "must be > 0");
        }
        if self.batch_size == 0 {
            return invalid("batch_size", "must be >= 1");
        }
        if !positive(self.margin) {
            return invalid("margin", "must be > 0");
        }
        if LossWeights::new(self.loss_weights.clone()).is_err() {
            return invalid("loss_weights", "need two weights, each > 0");
        }
        if self.components == 0 {
            return invalid("components", "must be >= 1");
        }
        if !positive(self.em_epsilon) {
            return invalid("em_epsilon", "must be > 0");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return invalid("beta", "must be >= 0");
        }
        if self.max_sweeps == 0 {
            return invalid("max_sweeps", "must be >= 1");
        }
        if !positive(self.t0) {
            return invalid("t0", "must be > 0");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return invalid("decay", "must be in (0, 1)");
        }
        if self.sweeps_per_t == 0 {
            return invalid("sweeps_per_t", "must be >= 1");
        }
        if !positive(self.ellipticity) {
            return invalid("ellipticity", "must be > 0");
        }
        if !positive(self.fps) || !positive(self.interval_s) {
            return invalid("fps", "fps and interval_s must be > 0");
        }
        Ok(())
    }

    /// Config text that parses back to `self`.
    pub fn to_config_string(&self) -> String {
        let classifier = match self.classifier {
            Classifier::Cnn => "cnn",
            Classifier::Centroid => "centroid",
        };
        let enhancement = match self.enhancement {
            Enhancement::None => "none",
            Enhancement::Equalize => "equalize",
            Enhancement::Lowpass => "lowpass",
            Enhancement::Highpass => "highpass",
            Enhancement::Haar => "haar",
        };
        let prior = match self.prior {
            PriorKind::Potts => "potts",
            PriorKind::Quadratic => "quadratic",
        };
        let solver = match self.solver {
            Solver::Icm => "icm",
            Solver::Anneal => "anneal",
        };
        let order = match self.order {
            SweepOrder::Raster => "raster",
            SweepOrder::Checkerboard => "checkerboard",
        };
        let values = [
            self.seed.to_string(),
            join(&self.sizes),
            join(&self.noise_levels),
            self.trials.to_string(),
            self.images_per_class.to_string(),
            self.test_fraction.to_string(),
            classifier.to_string(),
            self.theta.to_string(),
            enhancement.to_string(),
            self.cutoff.to_string(),
            self.epochs.to_string(),
            self.learning_rate.to_string(),
            self.batch_size.to_string(),
            self.margin.to_string(),
            self.triplets_per_anchor.to_string(),
            join(&self.loss_weights),
            self.augment.to_string(),
            self.components.to_string(),
            self.em_epsilon.to_string(),
            self.em_max_iters.to_string(),
            self.beta.to_string(),
            prior.to_string(),
            solver.to_string(),
            order.to_string(),
            self.max_sweeps.to_string(),
            self.t0.to_string(),
            self.decay.to_string(),
            self.sweeps_per_t.to_string(),
            self.radius.to_string(),
            self.ellipticity.to_string(),
            self.fps.to_string(),
            self.interval_s.to_string(),
        ];
        Self::KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn game_config(&self) -> GameConfig {
        GameConfig {
            order: self.order,
            max_sweeps: self.max_sweeps,
            schedule: AnnealSchedule { t0: self.t0, decay: self.decay, sweeps_per_t: self.sweeps_per_t },
            seed: self.seed,
        }
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, HarnessError> {
        Ok(TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            margin: self.margin,
            triplets_per_anchor: self.triplets_per_anchor,
            loss_weights: LossWeights::new(self.loss_weights.clone())?,
            augment: self.augment,
            seed,
        })
    }

    /// Applies the configured enhancement to a grayscale image.
    pub fn enhance(&self, img: &Image) -> Result<Image, HarnessError> {
        Ok(match self.enhancement {
            Enhancement::None => img.clone(),
            Enhancement::Equalize => preprocess::equalize(img)?,
            Enhancement::Lowpass => preprocess::dft_enhance(img, FilterMode::Lowpass, self.cutoff)?,
            Enhancement::Highpass => preprocess::dft_enhance(img, FilterMode::Highpass, self.cutoff)?,
            Enhancement::Haar => preprocess::haar_enhance(img)?,
        })
    }
}

// ---------------------------------------------------------------------------
// experiment

pub const REPORT_HEADER: &str = "game_level,input_size,feature_complexity,noise_level,accuracy,robustness_error";
/// Bumped whenever the report columns change.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const FEATURE_COMPLEXITY: u8 = 1;
pub const FAILURE_MARKER: &str = "FAILED";

/// Five levels over input size: 20 and 30 map to 1, 40 and 50 to 2, 100 and above to 5.
pub fn game_level(size: usize) -> u8 {
    (size.saturating_sub(20) / 20 + 1).clamp(1, 5) as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub game_level: u8,
    pub input_size: usize,
    pub noise_level: u8,
    pub trial: usize,
    /// `Err` carries the message of the stage that failed.
    pub accuracy: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    /// Per game level: mean and half-range of `|accuracy − level mean|`.
    pub robustness: Vec<(u8, Option<(f64, f64)>)>,
}

impl ExperimentReport {
    fn assemble(mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by_key(|r| (r.game_level, r.input_size, r.noise_level, r.trial));
        let mut levels: Vec<u8> = rows.iter().map(|r| r.game_level).collect();
        levels.dedup();
        let robustness = levels
            .into_iter()
            .map(|level| {
                let accs: Vec<f64> =
                    rows.iter().filter(|r| r.game_level == level).filter_map(|r| r.accuracy.clone().ok()).collect();
                (level, robustness_error(&accs))
            })
            .collect();
        Self { rows, robustness }
    }

    pub fn failures(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.accuracy.is_err()).collect()
    }

    /// One line per row; accuracy and robustness use two decimals and every
    /// row carries its level's robustness cell. Failed cells read `FAILED`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for row in &self.rows {
            let acc = match &row.accuracy {
                Ok(a) => format!("{a:.2}"),
                Err(_) => FAILURE_MARKER.to_string(),
            };
            let rob = match self.robustness.iter().find(|(l, _)| *l == row.game_level).and_then(|(_, r)| *r) {
                Some((m, h)) => format!("{m:.2}±{h:.2}"),
                None => FAILURE_MARKER.to_string(),
            };
            let _ = writeln!(
                out,
                "{},{}*{},{},{},{},{}",
                row.game_level, row.input_size, row.input_size, FEATURE_COMPLEXITY, row.noise_level, acc, rob
            );
        }
        out
    }
}

/// Mean and half-range of the absolute deviations from the mean.
pub fn robustness_error(accuracies: &[f64]) -> Option<(f64, f64)> {
    if accuracies.is_empty() {
        return None;
    }
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let devs: Vec<f64> = accuracies.iter().map(|a| (a - mean).abs()).collect();
    let dmean = devs.iter().sum::<f64>() / devs.len() as f64;
    let lo = devs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = devs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((dmean, (hi - lo) / 2.0))
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded scenes of every class, `count` per class, with labels.
pub fn synthetic_dataset(size: usize, noise: u8, count: usize, seed: u64) -> Result<(Vec<Image>, Vec<usize>), HarnessError> {
    let mut images = Vec::with_capacity(5 * count);
    let mut labels = Vec::with_capacity(5 * count);
    for class in 0..5 {
        for k in 0..count {
            images.push(gen_scene(class, size, noise, mix(seed, (class * count + k) as u64))?);
            labels.push(class);
        }
    }
    Ok((images, labels))
}

/// Stratified split: per class, a seeded shuffle puts
/// `max(1, round(n · fraction))` samples in the test set, capped at `n − 1`.
/// A class with a single sample uses it for both sides.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let max_class = labels.iter().copied().max().unwrap_or(0);
    for class in 0..=max_class {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        if idx.len() == 1 {
            train.push(idx[0]);
            test.push(idx[0]);
            continue;
        }
        let k = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Accuracy of one experiment cell.
pub fn run_cell(cfg: &RunConfig, size: usize, noise: u8, trial: usize) -> Result<f64, HarnessError> {
    let seed = mix(mix(mix(cfg.seed, size as u64), noise as u64), trial as u64);
    let (raw, labels) = synthetic_dataset(size, noise, cfg.images_per_class, seed)?;
    let images: Vec<Image> = par::map_slice(&raw, |img| cfg.enhance(img)).into_iter().collect::<Result<_, _>>()?;
    let (train_idx, test_idx) = stratified_split(&labels, cfg.test_fraction, mix(seed, 1));
    let pick = |idx: &[usize]| -> (Vec<Image>, Vec<usize>) {
        (idx.iter().map(|&i| images[i].clone()).collect(), idx.iter().map(|&i| labels[i]).collect())
    };
    let (train_images, train_labels) = pick(&train_idx);
    let (test_images, test_labels) = pick(&test_idx);
    let predictions = match cfg.classifier {
        Classifier::Cnn => cnn_predictions(cfg, &train_images, &train_labels, &test_images, mix(seed, 2))?,
        Classifier::Centroid => centroid_predictions(cfg, &train_images, &train_labels, &test_images)?,
    };
    let correct = predictions.iter().zip(&test_labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / test_labels.len() as f64)
}

fn cnn_predictions(
    cfg: &RunConfig,
    train_images: &[Image],
    train_labels: &[usize],
    test_images: &[Image],
    seed: u64,
) -> Result<Vec<usize>, HarnessError> {
    let size = train_images[0].width();
    // with crops enabled the network sees the central 7/8 of each image
    let input = if cfg.augment { (size * 7 / 8).max(12) } else { size };
    let net = NetSpec::default_architecture(input, seed)?;
    let data = Dataset::new(train_images.to_vec(), train_labels.to_vec())?;
    let (trained, _) = net::train(&net, &data, &cfg.train_config(mix(seed, 3))?)?;
    test_images
        .iter()
        .map(|img| {
            let off = (size - input) / 2;
            let view = if input == size { img.clone() } else { img.crop(off, off, input, input) };
            Ok(net::predict(&trained, &view)?.0)
        })
        .collect()
}

fn feature_rows(images: &[Image]) -> Result<Vec<Vec<f64>>, HarnessError> {
    par::map_slice(images, |img| features::extract_features(img).map(|f| f.values))
        .into_iter()
        .map(|r| r.map_err(HarnessError::from))
        .collect()
}

fn centroid_predictions(
    cfg: &RunConfig,
    train_images: &[Image],
    train_labels: &[usize],
    test_images: &[Image],
) -> Result<Vec<usize>, HarnessError> {
    let train = feature_rows(train_images)?;
    let test = feature_rows(test_images)?;
    let dim = train[0].len();
    let mean: Vec<f64> = (0..dim).map(|j| train.iter().map(|r| r[j]).sum::<f64>() / train.len() as f64).collect();
    let std: Vec<f64> = (0..dim)
        .map(|j| (train.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / train.len() as f64).sqrt())
        .collect();
    // constant columns carry no information and break correlation
    let live: Vec<usize> = (0..dim).filter(|&j| std[j] > 1e-12).collect();
    let selected: Vec<usize> = if live.len() >= 2 && train.len() >= 3 {
        let samples = Matrix::from_vec(train.len(), live.len(), train.iter().flat_map(|r| live.iter().map(|&j| r[j])).collect())?;
        features::cluster_and_select(&samples, cfg.theta)?.selected.into_iter().map(|k| live[k]).collect()
    } else {
        live
    };
    let z = |row: &[f64]| -> Vec<f64> { selected.iter().map(|&j| (row[j] - mean[j]) / std[j]).collect() };
    let mut centroids = vec![vec![0.0; selected.len()]; 5];
    let mut counts = [0usize; 5];
    for (row, &label) in train.iter().zip(train_labels) {
        counts[label] += 1;
        centroids[label].iter_mut().zip(z(row)).for_each(|(c, v)| *c += v);
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    Ok(test
        .iter()
        .map(|row| {
            let zr = z(row);
            let dist = |c: &Vec<f64>| c.iter().zip(&zr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let mut best = 0;
            for k in 1..5 {
                if counts[k] > 0 && (counts[best] == 0 || dist(&centroids[k]) < dist(&centroids[best])) {
                    best = k;
                }
            }
            best
        })
        .collect())
}

/// Runs every `(size, noise, trial)` cell, in parallel when enabled, and
/// assembles the sorted report. A failing cell becomes a `FAILED` row
/// rather than aborting the run.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &size in &cfg.sizes {
        for &noise in &cfg.noise_levels {
            for trial in 0..cfg.trials {
                cells.push((size, noise, trial));
            }
        }
    }
    let rows = par::map_slice(&cells, |&(size, noise, trial)| ReportRow {
        game_level: game_level(size),
        input_size: size,
        noise_level: noise,
        trial,
        accuracy: run_cell(cfg, size, noise, trial).map_err(|e| e.to_string()),
    });
    Ok(ExperimentReport::assemble(rows))
}

// ---------------------------------------------------------------------------
// keyframes and actions

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyframePolicy {
    fps: f64,
    interval_s: f64,
}

impl KeyframePolicy {
    pub fn new(fps: f64, interval_s: f64) -> Result<Self, HarnessError> {
        if !(fps > 0.0 && fps.is_finite() && interval_s > 0.0 && interval_s.is_finite()) {
            return Err(HarnessError::BadKeyframePolicy { fps, interval: interval_s });
        }
        Ok(Self { fps, interval_s })
    }

    /// Frames between keyframes: `round(fps · interval)`, at least 1.
    pub fn stride(&self) -> usize {
        ((self.fps * self.interval_s).round() as usize).max(1)
    }
}

pub fn keyframe_indices(policy: &KeyframePolicy, total_frames: usize) -> Vec<usize> {
    (0..total_frames).step_by(policy.stride()).collect()
}

pub const ACTIONS: [&str; 5] = ["tidy_living_room", "check_bathroom", "quiet_mode", "assist_kitchen", "follow_person"];

pub fn label_to_action(class: usize) -> Result<&'static str, HarnessError> {
    ACTIONS.get(class).copied().ok_or(HarnessError::UnknownClass(class))
}
