//! Strict TOML experiment configuration.
//!
//! Unknown keys are rejected with a nearest-key suggestion; all dimensions
//! are cross-validated before any computation starts. Optional keys fall
//! back to documented defaults (identity affine map, all-ones inpaint mask,
//! synthesized measurement, the desk-scale sampler settings).

use std::path::PathBuf;

use serde::Deserialize;

use latentwalk_core::forward::ForwardOperator;
use latentwalk_core::linalg::Matrix;
use latentwalk_core::map::{random_mlp, GenerativeMap, MlpLayer};
use latentwalk_core::sampler::{SamplerConfig, Scheme};

use crate::error::CliError;

/// Default measurement noise level; phase retrieval (dft_magnitude) uses a
/// tighter default of 0.05.
const DEFAULT_SIGMA: f64 = 0.1;
const DEFAULT_SIGMA_PHASE: f64 = 0.05;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    map: RawMap,
    operator: RawOperator,
    #[serde(default)]
    measurement: RawMeasurement,
    #[serde(default)]
    sampler: RawSampler,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    metrics: RawMetrics,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    kind: String,
    dim: Option<usize>,
    matrix: Option<Vec<f64>>,
    offset: Option<Vec<f64>>,
    layers: Option<Vec<RawLayer>>,
    seed: Option<u64>,
    mix: Option<f64>,
    inner: Option<Box<RawMap>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    kind: String,
    mask: Option<Vec<u8>>,
    width: Option<usize>,
    factor: Option<usize>,
    kernel: Option<Vec<f64>>,
    kernel_size: Option<usize>,
    oversample: Option<usize>,
    hidden: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasurement {
    source: Option<String>,
    sigma: Option<f64>,
    ground_truth: Option<Vec<f64>>,
    ground_truth_seed: Option<u64>,
    noise_seed: Option<u64>,
    file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampler {
    tau: Option<f64>,
    n_steps: Option<usize>,
    warm_steps: Option<usize>,
    adam_lr: Option<f64>,
    adam_beta1: Option<f64>,
    adam_beta2: Option<f64>,
    adam_eps: Option<f64>,
    scheme: Option<String>,
    seed: Option<u64>,
    burn_in: Option<usize>,
    thinning: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    chains: Option<usize>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    psnr: Option<bool>,
    diversity: Option<bool>,
    cosine: Option<bool>,
    diversity_k: Option<usize>,
    pgm: Option<bool>,
    pgm_width: Option<usize>,
}

/// Where the measurement vector comes from.
#[derive(Debug, Clone)]
pub enum MeasurementSource {
    /// `y = 𝒜(x0*) + σ n` with the ground truth either given or generated
    /// as `Φ(z*)` from a seeded draw.
    Synthesize {
        ground_truth: GroundTruth,
        noise_seed: u64,
    },
    /// Load `y` from a text file of floats.
    File { path: PathBuf },
}

#[derive(Debug, Clone)]
pub enum GroundTruth {
    Explicit(Vec<f64>),
    FromSeed(u64),
}

/// Metric toggles for the run summary.
#[derive(Debug, Clone)]
pub struct MetricsToggles {
    pub psnr: bool,
    pub diversity: bool,
    pub cosine: bool,
    pub diversity_k: Option<usize>,
    pub pgm: bool,
    pub pgm_width: Option<usize>,
}

/// A fully validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub map: GenerativeMap,
    pub operator: ForwardOperator,
    pub sigma: f64,
    pub measurement: MeasurementSource,
    pub sampler: SamplerConfig,
    pub chains: usize,
    pub output_dir: Option<PathBuf>,
    pub metrics: MetricsToggles,
    /// Original config text, echoed into the run directory.
    pub echo: String,
}

/// Parses and validates a config file.
pub fn parse_config(path: &std::path::Path) -> Result<ExperimentPlan, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_config_str(&text)
}

/// Parses and validates config text.
pub fn parse_config_str(text: &str) -> Result<ExperimentPlan, CliError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
    validate_keys(&table)?;
    let raw: RawConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Config(format!("config error: {e}")))?;
    build_plan(raw, text.to_string())
}

// ---------------------------------------------------------------------------
// Strict key validation with suggestions.

const TOP_KEYS: &[&str] = &["map", "operator", "measurement", "sampler", "run", "metrics"];
const MAP_KEYS: &[&str] = &["kind", "dim", "matrix", "offset", "layers", "seed", "mix", "inner"];
const LAYER_KEYS: &[&str] = &["rows", "cols", "weights", "bias"];
const OPERATOR_KEYS: &[&str] = &[
    "kind", "mask", "width", "factor", "kernel", "kernel_size", "oversample", "hidden", "seed",
];
const MEASUREMENT_KEYS: &[&str] = &[
    "source", "sigma", "ground_truth", "ground_truth_seed", "noise_seed", "file",
];
const SAMPLER_KEYS: &[&str] = &[
    "tau", "n_steps", "warm_steps", "adam_lr", "adam_beta1", "adam_beta2", "adam_eps", "scheme",
    "seed", "burn_in", "thinning",
];
const RUN_KEYS: &[&str] = &["chains", "output_dir"];
const METRICS_KEYS: &[&str] = &["psnr", "diversity", "cosine", "diversity_k", "pgm", "pgm_width"];

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn suggestion(key: &str, allowed: &[&str]) -> String {
    allowed
        .iter()
        .map(|cand| (levenshtein(key, cand), *cand))
        .min()
        .filter(|(d, _)| *d <= 3)
        .map(|(_, cand)| format!("; did you mean `{cand}`?"))
        .unwrap_or_default()
}

fn check_table(table: &toml::Table, allowed: &[&str], section: &str) -> Result<(), CliError> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "unknown key `{key}` in {section}{}",
                suggestion(key, allowed)
            )));
        }
    }
    Ok(())
}

fn check_map_keys(table: &toml::Table, section: &str) -> Result<(), CliError> {
    check_table(table, MAP_KEYS, section)?;
    if let Some(toml::Value::Table(inner)) = table.get("inner") {
        check_map_keys(inner, &format!("{section}.inner"))?;
    }
    if let Some(toml::Value::Array(layers)) = table.get("layers") {
        for (i, layer) in layers.iter().enumerate() {
            if let toml::Value::Table(t) = layer {
                check_table(t, LAYER_KEYS, &format!("{section}.layers[{i}]"))?;
            }
        }
    }
    Ok(())
}

fn validate_keys(table: &toml::Table) -> Result<(), CliError> {
    check_table(table, TOP_KEYS, "the config root")?;
    for (section, keys) in [
        ("operator", OPERATOR_KEYS),
        ("measurement", MEASUREMENT_KEYS),
        ("sampler", SAMPLER_KEYS),
        ("run", RUN_KEYS),
        ("metrics", METRICS_KEYS),
    ] {
        if let Some(toml::Value::Table(t)) = table.get(section) {
            check_table(t, keys, &format!("[{section}]"))?;
        }
    }
    if let Some(toml::Value::Table(t)) = table.get("map") {
        check_map_keys(t, "[map]")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Building core objects.

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn build_map(raw: &RawMap, section: &str) -> Result<GenerativeMap, CliError> {
    match raw.kind.as_str() {
        "affine" => {
            let dim = match (&raw.matrix, &raw.offset, raw.dim) {
                (Some(m), _, Some(d)) if m.len() != d * d => {
                    return Err(cfg_err(format!(
                        "{section}.matrix has {} entries but {section}.dim is {d} (need {})",
                        m.len(),
                        d * d
                    )))
                }
                (_, _, Some(d)) => d,
                (Some(m), _, None) => {
                    let d = (m.len() as f64).sqrt() as usize;
                    if d * d != m.len() {
                        return Err(cfg_err(format!(
                            "{section}.matrix has {} entries, which is not a square count",
                            m.len()
                        )));
                    }
                    d
                }
                (None, Some(b), None) => b.len(),
                (None, None, None) => {
                    return Err(cfg_err(format!(
                        "{section}: affine map needs `dim` (or explicit `matrix`/`offset`)"
                    )))
                }
            };
            let matrix = match &raw.matrix {
                Some(m) => Matrix::new(dim, dim, m.clone())
                    .map_err(|e| cfg_err(format!("{section}.matrix: {e}")))?,
                None => Matrix::identity(dim),
            };
            let offset = raw.offset.clone().unwrap_or_else(|| vec![0.0; dim]);
            if offset.len() != dim {
                return Err(cfg_err(format!(
                    "{section}.offset has length {} but {section} dimension is {dim}",
                    offset.len()
                )));
            }
            GenerativeMap::affine(matrix, offset).map_err(|e| cfg_err(format!("{section}: {e}")))
        }
        "mlp" => {
            if let Some(layers) = &raw.layers {
                let built: Result<Vec<MlpLayer>, CliError> = layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        Ok(MlpLayer {
                            weights: Matrix::new(l.rows, l.cols, l.weights.clone()).map_err(
                                |e| cfg_err(format!("{section}.layers[{i}].weights: {e}")),
                            )?,
                            bias: l.bias.clone(),
                        })
                    })
                    .collect();
                GenerativeMap::mlp(built?).map_err(|e| cfg_err(format!("{section}: {e}")))
            } else {
                let dim = raw.dim.ok_or_else(|| {
                    cfg_err(format!("{section}: mlp without explicit layers needs `dim`"))
                })?;
                let seed = raw.seed.unwrap_or(42);
                random_mlp(dim, seed).map_err(|e| cfg_err(format!("{section}: {e}")))
            }
        }
        "two_step" => {
            let inner_raw = raw.inner.as_ref().ok_or_else(|| {
                cfg_err(format!("{section}: two_step map needs an `inner` map table"))
            })?;
            let inner = build_map(inner_raw, &format!("{section}.inner"))?;
            let mix = raw.mix.ok_or_else(|| {
                cfg_err(format!("{section}: two_step map needs `mix` in (0, 1)"))
            })?;
            let seed = raw.seed.unwrap_or(0);
            GenerativeMap::two_step(inner, seed, mix)
                .map_err(|e| cfg_err(format!("{section}: {e}")))
        }
        other => Err(cfg_err(format!(
            "{section}.kind: unknown map kind `{other}`{}",
            suggestion(other, &["affine", "mlp", "two_step"])
        ))),
    }
}

fn build_operator(raw: &RawOperator, map_dim: usize) -> Result<ForwardOperator, CliError> {
    let square_width = |given: Option<usize>| -> Result<usize, CliError> {
        match given {
            Some(w) => Ok(w),
            None => {
                let w = (map_dim as f64).sqrt() as usize;
                if w * w == map_dim {
                    Ok(w)
                } else {
                    Err(cfg_err(format!(
                        "operator.width missing and map dimension {map_dim} is not a perfect \
                         square (the operator reads the data as a square image)"
                    )))
                }
            }
        }
    };
    let op = match raw.kind.as_str() {
        "inpaint" => {
            let mask = match &raw.mask {
                Some(bits) => {
                    for (i, b) in bits.iter().enumerate() {
                        if *b > 1 {
                            return Err(cfg_err(format!(
                                "operator.mask[{i}] must be 0 or 1, got {b}"
                            )));
                        }
                    }
                    bits.iter().map(|b| *b == 1).collect()
                }
                None => vec![true; map_dim],
            };
            ForwardOperator::inpaint(mask)
        }
        "avgpool" => {
            let width = square_width(raw.width)?;
            let factor = raw.factor.unwrap_or(2);
            ForwardOperator::avg_pool(width, factor)
        }
        "conv_blur" => {
            let width = square_width(raw.width)?;
            let kernel = match (&raw.kernel, raw.kernel_size) {
                (Some(k), Some(size)) => Matrix::new(size, size, k.clone())
                    .map_err(|e| cfg_err(format!("operator.kernel: {e}"))),
                (Some(k), None) => {
                    let size = (k.len() as f64).sqrt() as usize;
                    if size * size != k.len() {
                        return Err(cfg_err(format!(
                            "operator.kernel has {} entries, which is not a square count \
                             (set operator.kernel_size)",
                            k.len()
                        )));
                    }
                    Matrix::new(size, size, k.clone())
                        .map_err(|e| cfg_err(format!("operator.kernel: {e}")))
                }
                (None, _) => latentwalk_core::forward::gaussian_kernel(3, 1.0)
                    .map_err(|e| cfg_err(format!("operator.kernel default: {e}"))),
            }?;
            ForwardOperator::conv_blur(width, kernel)
        }
        "hdr_clip" => ForwardOperator::hdr_clip(map_dim),
        "dft_magnitude" => ForwardOperator::dft_magnitude(map_dim, raw.oversample.unwrap_or(1)),
        "toy_nonlinear" => ForwardOperator::toy_nonlinear(
            map_dim,
            raw.hidden.unwrap_or(2 * map_dim),
            raw.seed.unwrap_or(7),
        ),
        other => {
            return Err(cfg_err(format!(
                "operator.kind: unknown operator kind `{other}`{}",
                suggestion(
                    other,
                    &["inpaint", "avgpool", "conv_blur", "hdr_clip", "dft_magnitude", "toy_nonlinear"],
                )
            )))
        }
    };
    op.map_err(|e| cfg_err(format!("operator: {e}")))
}

fn build_plan(raw: RawConfig, echo: String) -> Result<ExperimentPlan, CliError> {
    let map = build_map(&raw.map, "map")?;
    let map_dim = map.dim();
    let operator = build_operator(&raw.operator, map_dim)?;
    if operator.in_dim() != map_dim {
        return Err(cfg_err(format!(
            "operator input dimension {} does not match map dimension {map_dim} \
             (keys operator.*, map.dim)",
            operator.in_dim()
        )));
    }

    let sigma = raw.measurement.sigma.unwrap_or(match operator {
        ForwardOperator::DftMagnitude { .. } => DEFAULT_SIGMA_PHASE,
        _ => DEFAULT_SIGMA,
    });
    if !(sigma > 0.0) {
        return Err(cfg_err(format!(
            "measurement.sigma must be positive, got {sigma}"
        )));
    }

    let source = raw.measurement.source.as_deref().unwrap_or("synthesize");
    let measurement = match source {
        "synthesize" => {
            let ground_truth = match (&raw.measurement.ground_truth, raw.measurement.ground_truth_seed)
            {
                (Some(x0), _) => {
                    if x0.len() != map_dim {
                        return Err(cfg_err(format!(
                            "measurement.ground_truth has length {} but map dimension is \
                             {map_dim} (keys measurement.ground_truth, map.dim)",
                            x0.len()
                        )));
                    }
                    GroundTruth::Explicit(x0.clone())
                }
                (None, seed) => GroundTruth::FromSeed(seed.unwrap_or(0)),
            };
            MeasurementSource::Synthesize {
                ground_truth,
                noise_seed: raw.measurement.noise_seed.unwrap_or(1),
            }
        }
        "file" => {
            let path = raw.measurement.file.clone().ok_or_else(|| {
                cfg_err("measurement.source is \"file\" but measurement.file is missing")
            })?;
            MeasurementSource::File { path }
        }
        other => {
            return Err(cfg_err(format!(
                "measurement.source: unknown source `{other}`{}",
                suggestion(other, &["synthesize", "file"])
            )))
        }
    };

    let defaults = SamplerConfig::default();
    let scheme = match raw.sampler.scheme.as_deref() {
        None | Some("em") => Scheme::Em,
        Some("ei") => Scheme::Ei,
        Some(other) => {
            return Err(cfg_err(format!(
                "sampler.scheme: unknown scheme `{other}`{}",
                suggestion(other, &["em", "ei"])
            )))
        }
    };
    let sampler = SamplerConfig {
        tau: raw.sampler.tau.unwrap_or(defaults.tau),
        n_steps: raw.sampler.n_steps.unwrap_or(defaults.n_steps),
        warm_steps: raw.sampler.warm_steps.unwrap_or(defaults.warm_steps),
        adam_lr: raw.sampler.adam_lr.unwrap_or(defaults.adam_lr),
        adam_beta1: raw.sampler.adam_beta1.unwrap_or(defaults.adam_beta1),
        adam_beta2: raw.sampler.adam_beta2.unwrap_or(defaults.adam_beta2),
        adam_eps: raw.sampler.adam_eps.unwrap_or(defaults.adam_eps),
        scheme,
        seed: raw.sampler.seed.unwrap_or(defaults.seed),
        burn_in: raw.sampler.burn_in.unwrap_or(defaults.burn_in),
        thinning: raw.sampler.thinning.unwrap_or(defaults.thinning),
    };
    sampler
        .validate()
        .map_err(|e| cfg_err(format!("sampler: {e}")))?;

    let chains = raw.run.chains.unwrap_or(1);
    if chains == 0 {
        return Err(cfg_err("run.chains must be at least 1"));
    }

    let metrics = MetricsToggles {
        psnr: raw.metrics.psnr.unwrap_or(true),
        diversity: raw.metrics.diversity.unwrap_or(true),
        cosine: raw.metrics.cosine.unwrap_or(true),
        diversity_k: raw.metrics.diversity_k,
        pgm: raw.metrics.pgm.unwrap_or(false),
        pgm_width: raw.metrics.pgm_width,
    };
    if metrics.pgm {
        let w = metrics
            .pgm_width
            .unwrap_or((map_dim as f64).sqrt() as usize);
        if w == 0 || map_dim % w != 0 {
            return Err(cfg_err(format!(
                "metrics.pgm_width {w} does not divide the map dimension {map_dim}"
            )));
        }
    }

    Ok(ExperimentPlan {
        map,
        operator,
        sigma,
        measurement,
        sampler,
        chains,
        output_dir: raw.run.output_dir,
        metrics,
        echo,
    })
}
