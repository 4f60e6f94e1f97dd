//! Experiment orchestration: measurement synthesis, concurrent chains, metric
//! computation, and atomic persistence of the run directory.

use std::path::{Path, PathBuf};

use serde_json::json;

use latentwalk_core::forward::{LikelihoodModel, Measurement};
use latentwalk_core::metrics::{avg_pairwise_cosine, diversity_score, psnr, SampleSet};
use latentwalk_core::sampler::{run_chain, ChainError, ChainPhase, RunReport, SamplerConfig};
use latentwalk_core::vector::{DataVector, NoiseVector};
use latentwalk_core::CounterRng;

use crate::config::{ExperimentPlan, GroundTruth, MeasurementSource};
use crate::error::CliError;
use crate::io;

/// Stream ids for the seeded draws outside the chains.
const GROUND_TRUTH_STREAM: u64 = 0x6774_0000; // "gt"
const MEASUREMENT_NOISE_STREAM: u64 = 0x6d65_6173; // "meas"

/// Environment variable holding the default output root.
pub const OUTPUT_ROOT_ENV: &str = "LATENTWALK_OUT";

/// One chain's result with its divergence flag.
#[derive(Debug)]
pub struct ChainOutcome {
    pub chain: usize,
    pub seed: u64,
    pub report: RunReport,
    /// `(phase, step)` when the chain aborted on a non-finite state.
    pub diverged: Option<(&'static str, usize)>,
}

/// Everything a finished experiment produced.
#[derive(Debug)]
pub struct ExperimentResult {
    pub outcomes: Vec<ChainOutcome>,
    pub summary: serde_json::Value,
    pub out_dir: PathBuf,
    pub all_diverged: bool,
}

fn synthesize_measurement(
    plan: &ExperimentPlan,
) -> Result<(Measurement, Option<Vec<f64>>, serde_json::Value), CliError> {
    match &plan.measurement {
        MeasurementSource::Synthesize {
            ground_truth,
            noise_seed,
        } => {
            let (x0, gt_seed) = match ground_truth {
                GroundTruth::Explicit(x0) => (x0.clone(), None),
                GroundTruth::FromSeed(seed) => {
                    let mut rng = CounterRng::new(*seed, GROUND_TRUTH_STREAM);
                    let z = NoiseVector::from(rng.normal_vec(plan.map.dim()));
                    let x0 = plan
                        .map
                        .apply(&z)
                        .map_err(|e| CliError::Config(format!("ground truth synthesis: {e}")))?;
                    (x0.values, Some(*seed))
                }
            };
            let clean = plan
                .operator
                .apply(&DataVector::from(x0.clone()))
                .map_err(|e| CliError::Config(format!("measurement synthesis: {e}")))?;
            let mut rng = CounterRng::new(*noise_seed, MEASUREMENT_NOISE_STREAM);
            let y: Vec<f64> = clean
                .iter()
                .map(|v| v + plan.sigma * rng.next_normal())
                .collect();
            let meas = Measurement::new(y, plan.sigma)
                .map_err(|e| CliError::Config(format!("measurement: {e}")))?;
            let seeds = json!({
                "ground_truth_seed": gt_seed,
                "noise_seed": noise_seed,
            });
            Ok((meas, Some(x0), seeds))
        }
        MeasurementSource::File { path } => {
            let y = io::read_float_list(path)?;
            if y.len() != plan.operator.out_dim() {
                return Err(CliError::Config(format!(
                    "measurement file {} has {} values but the operator output dimension is {} \
                     (keys measurement.file, operator.*)",
                    path.display(),
                    y.len(),
                    plan.operator.out_dim()
                )));
            }
            let meas = Measurement::new(y, plan.sigma)
                .map_err(|e| CliError::Config(format!("measurement: {e}")))?;
            Ok((meas, None, json!({ "file": path.display().to_string() })))
        }
    }
}

/// Output directory: explicit config value, else `$LATENTWALK_OUT/<name>`,
/// else `runs/<name>`.
pub fn resolve_out_dir(plan: &ExperimentPlan, name: &str, cli_override: Option<PathBuf>) -> PathBuf {
    if let Some(dir) = cli_override {
        return dir;
    }
    if let Some(dir) = &plan.output_dir {
        return dir.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(name)
}

fn chain_config(base: &SamplerConfig, chain: usize) -> SamplerConfig {
    SamplerConfig {
        seed: base.seed.wrapping_add(chain as u64),
        ..base.clone()
    }
}

fn json_f64(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

/// Runs the configured chains (concurrently), computes the enabled metrics,
/// and writes `config.toml`, per-chain sample CSVs, a merged `samples.csv`,
/// optional PGMs, and `summary.json` into the run directory.
pub fn run_experiment(
    plan: &ExperimentPlan,
    out_dir: &Path,
) -> Result<ExperimentResult, CliError> {
    let started = std::time::Instant::now();
    let (measurement, ground_truth, seed_info) = synthesize_measurement(plan)?;
    let lik = LikelihoodModel::new(plan.operator.clone(), measurement)
        .map_err(|e| CliError::Config(format!("likelihood: {e}")))?;

    // Chains share the immutable map/likelihood and use disjoint seeds.
    let outcomes: Vec<ChainOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..plan.chains)
            .map(|chain| {
                let cfg = chain_config(&plan.sampler, chain);
                let map = &plan.map;
                let lik = &lik;
                scope.spawn(move || {
                    let seed = cfg.seed;
                    match run_chain(map, lik, &cfg) {
                        Ok(report) => ChainOutcome {
                            chain,
                            seed,
                            report,
                            diverged: None,
                        },
                        Err(ChainError::Diverged {
                            phase,
                            step,
                            partial,
                        }) => ChainOutcome {
                            chain,
                            seed,
                            report: *partial,
                            diverged: Some((
                                match phase {
                                    ChainPhase::WarmStart => "warm_start",
                                    ChainPhase::Chain => "chain",
                                },
                                step,
                            )),
                        },
                        Err(ChainError::Contract(e)) => {
                            // Config was validated up front; a contract error
                            // here is a programming error.
                            panic!("chain {chain}: {e}");
                        }
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    io::atomic_write(&out_dir.join("config.toml"), plan.echo.as_bytes())?;

    let dim = plan.map.dim();
    for outcome in &outcomes {
        io::write_samples(
            &outcome.report,
            outcome.chain,
            dim,
            &out_dir.join(format!("samples_chain{}.csv", outcome.chain)),
        )?;
    }
    let merged: Vec<(usize, &RunReport)> = outcomes
        .iter()
        .map(|o| (o.chain, &o.report))
        .collect();
    io::atomic_write(
        &out_dir.join("samples.csv"),
        io::samples_csv(&merged, dim).as_bytes(),
    )?;

    if plan.metrics.pgm {
        let width = plan
            .metrics
            .pgm_width
            .unwrap_or((dim as f64).sqrt() as usize);
        let height = dim / width;
        for outcome in &outcomes {
            if let Some(last) = outcome.report.samples.last() {
                io::write_pgm(
                    &last.values,
                    width,
                    height,
                    &out_dir.join(format!("sample_chain{}.pgm", outcome.chain)),
                )?;
            }
        }
    }

    // Metrics over the merged retained samples.
    let all_samples: Vec<DataVector> = outcomes
        .iter()
        .flat_map(|o| o.report.samples.iter().cloned())
        .collect();
    let n_retained = all_samples.len();
    let mut metric_values = serde_json::Map::new();
    if n_retained > 0 {
        let set = SampleSet::new(all_samples, ground_truth.clone().map(DataVector::from))
            .expect("uniform sample dimensions");
        if plan.metrics.psnr {
            if let Some(gt) = &set.reference {
                let mut acc = 0.0;
                let mut finite = true;
                for s in &set.samples {
                    let v = psnr(s, gt, 2.0).expect("dimensions checked");
                    if v.is_finite() {
                        acc += v;
                    } else {
                        finite = false;
                    }
                }
                let mean = if finite {
                    acc / set.samples.len() as f64
                } else {
                    f64::INFINITY
                };
                metric_values.insert("psnr_mean_db".into(), json_f64(mean));
            } else {
                metric_values.insert("psnr_mean_db".into(), serde_json::Value::Null);
            }
        }
        if plan.metrics.diversity {
            let k = plan.metrics.diversity_k.unwrap_or(6.min(set.len() / 2));
            let value = if k >= 2 {
                match diversity_score(&set, k) {
                    Ok(ds) => json_f64(ds),
                    Err(e) => json!({ "error": e.to_string() }),
                }
            } else {
                serde_json::Value::Null
            };
            metric_values.insert("diversity_score".into(), value);
            metric_values.insert("diversity_k".into(), json!(plan.metrics.diversity_k.unwrap_or(6.min(set.len() / 2))));
        }
        if plan.metrics.cosine {
            let value = match avg_pairwise_cosine(&set) {
                Ok(cs) => json_f64(cs),
                Err(e) => json!({ "error": e.to_string() }),
            };
            metric_values.insert("avg_pairwise_cosine".into(), value);
        }
    }

    let eta = plan.map.nfe_per_eval();
    let nfe_per_chain = eta * (plan.sampler.warm_steps as u64 + plan.sampler.n_steps as u64);
    let nfe_total = nfe_per_chain * plan.chains as u64;
    let all_diverged = outcomes.iter().all(|o| o.diverged.is_some());

    let chains_json: Vec<serde_json::Value> = outcomes
        .iter()
        .map(|o| {
            json!({
                "chain": o.chain,
                "seed": o.seed,
                "diverged": o.diverged.is_some(),
                "diverged_phase": o.diverged.map(|(p, _)| p),
                "diverged_at_step": o.diverged.map(|(_, s)| s),
                "retained_samples": o.report.samples.len(),
                "nfe_total": o.report.nfe_total,
                "nfe_per_sample": json_f64(o.report.nfe_per_sample),
                "wall_time_seconds": o.report.wall_time_seconds,
            })
        })
        .collect();

    let config_echo: toml::Table = plan
        .echo
        .parse()
        .expect("echo text already parsed once");
    let summary = json!({
        "config": config_echo,
        "seeds": {
            "sampler_base": plan.sampler.seed,
            "per_chain": outcomes.iter().map(|o| o.seed).collect::<Vec<_>>(),
            "measurement": seed_info,
        },
        "sigma": plan.sigma,
        "eta": eta,
        "nfe": {
            "per_chain": nfe_per_chain,
            "total": nfe_total,
            "per_sample": json_f64(if n_retained > 0 {
                nfe_total as f64 / n_retained as f64
            } else {
                f64::NAN
            }),
        },
        "retained_samples_total": n_retained,
        "metrics": metric_values,
        "chains": chains_json,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    io::atomic_write(
        &out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)
            .expect("summary serializes")
            .as_bytes(),
    )?;

    Ok(ExperimentResult {
        outcomes,
        summary,
        out_dir: out_dir.to_path_buf(),
        all_diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    const BASE: &str = "
[map]
kind = \"affine\"
dim = 2
matrix = [2.0, 0.4, 0.0, 2.0]
offset = [0.1, -0.2]

[operator]
kind = \"inpaint\"

[measurement]
sigma = 0.25
ground_truth = [0.8, -0.4]
noise_seed = 11

[sampler]
n_steps = 200
warm_steps = 50
burn_in = 20
thinning = 5
seed = 77
";

    #[test]
    fn single_chain_run_writes_all_artifacts() {
        let plan = parse_config_str(BASE).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let result = run_experiment(&plan, dir.path()).unwrap();
        assert_eq!(result.outcomes.len(), 1);
        assert!(!result.all_diverged);
        assert!(dir.path().join("config.toml").exists());
        assert!(dir.path().join("samples.csv").exists());
        assert!(dir.path().join("samples_chain0.csv").exists());
        let summary_text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
        let summary: serde_json::Value = serde_json::from_str(&summary_text).unwrap();
        assert_eq!(summary["nfe"]["per_chain"], 250);
        assert_eq!(summary["retained_samples_total"], 36);
        assert!(summary["metrics"]["psnr_mean_db"].is_number());
    }

    #[test]
    fn multi_chain_seeds_are_sequential_and_files_exist() {
        let text = format!("{BASE}\n[run]\nchains = 4\n");
        let plan = parse_config_str(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let result = run_experiment(&plan, dir.path()).unwrap();
        assert_eq!(result.outcomes.len(), 4);
        let seeds: Vec<u64> = result.outcomes.iter().map(|o| o.seed).collect();
        assert_eq!(seeds, vec![77, 78, 79, 80]);
        for i in 0..4 {
            assert!(dir.path().join(format!("samples_chain{i}.csv")).exists());
        }
        assert_eq!(result.summary["nfe"]["total"], 1000);
    }

    #[test]
    fn reruns_are_deterministic() {
        let plan = parse_config_str(BASE).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_experiment(&plan, dir_a.path()).unwrap();
        run_experiment(&plan, dir_b.path()).unwrap();
        let a = std::fs::read(dir_a.path().join("samples.csv")).unwrap();
        let b = std::fs::read(dir_b.path().join("samples.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergent_chain_is_flagged_and_run_completes() {
        // tau = 0.9 on a stiff instance diverges; the healthy chain still
        // completes and the summary carries both flags.
        let text = "
[map]
kind = \"affine\"
dim = 1
matrix = [40.0]

[operator]
kind = \"inpaint\"

[measurement]
sigma = 0.1
ground_truth = [0.0]

[sampler]
tau = 0.9
n_steps = 400
warm_steps = 0
burn_in = 0
thinning = 1
seed = 1

[run]
chains = 2
";
        let plan = parse_config_str(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let result = run_experiment(&plan, dir.path()).unwrap();
        assert!(result.outcomes.iter().all(|o| o.diverged.is_some()));
        assert!(result.all_diverged);
        assert!(dir.path().join("summary.json").exists());
    }
}
