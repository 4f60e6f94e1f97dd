//! The `metrics` subcommand: fidelity/diversity metrics over a samples CSV.

use std::path::Path;

use serde_json::json;

use latentwalk_core::metrics::{avg_pairwise_cosine, diversity_score, psnr, SampleSet};
use latentwalk_core::DataVector;

use crate::error::CliError;
use crate::io;

/// Computes metrics for a samples CSV, optionally against a reference vector
/// file, and returns the JSON report.
pub fn metrics_report(
    samples_path: &Path,
    reference_path: Option<&Path>,
) -> Result<serde_json::Value, CliError> {
    let file = io::read_samples(samples_path)?;
    if file.rows.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no samples",
            samples_path.display()
        )));
    }
    let reference = reference_path
        .map(|p| -> Result<Vec<f64>, CliError> {
            let r = io::read_float_list(p)?;
            if r.len() != file.dim {
                return Err(CliError::Config(format!(
                    "reference {} has {} values but samples have dimension {}",
                    p.display(),
                    r.len(),
                    file.dim
                )));
            }
            Ok(r)
        })
        .transpose()?;

    let set = SampleSet::new(
        file.values().into_iter().map(DataVector::from).collect(),
        reference.map(DataVector::from),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let n = set.len();
    let psnr_mean = set.reference.as_ref().map(|gt| {
        let mut acc = 0.0;
        let mut all_finite = true;
        for s in &set.samples {
            let v = psnr(s, gt, 2.0).expect("dimensions checked");
            if v.is_finite() {
                acc += v;
            } else {
                all_finite = false;
            }
        }
        if all_finite {
            json!(acc / n as f64)
        } else {
            serde_json::Value::Null
        }
    });

    let k = 6.min(n / 2);
    let diversity = if k >= 2 && n >= k + 1 {
        match diversity_score(&set, k) {
            Ok(ds) => json!(ds),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        serde_json::Value::Null
    };
    let cosine = if n >= 2 {
        match avg_pairwise_cosine(&set) {
            Ok(cs) => json!(cs),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        serde_json::Value::Null
    };

    Ok(json!({
        "samples": n,
        "dim": file.dim,
        "diversity_k": k,
        "diversity_score": diversity,
        "avg_pairwise_cosine": cosine,
        "psnr_mean_db": psnr_mean,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_on_written_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut text = String::from("chain,step,x0_0,x0_1\n");
        let mut rng = latentwalk_core::CounterRng::from_seed(3);
        for i in 0..30 {
            text.push_str(&format!(
                "0,{i},{},{}\n",
                0.5 + 0.1 * rng.next_normal(),
                -0.2 + 0.1 * rng.next_normal()
            ));
        }
        std::fs::write(&path, text).unwrap();
        let refpath = dir.path().join("ref.txt");
        std::fs::write(&refpath, "0.5, -0.2").unwrap();
        let report = metrics_report(&path, Some(&refpath)).unwrap();
        assert_eq!(report["samples"], 30);
        assert_eq!(report["dim"], 2);
        assert!(report["diversity_score"].is_number());
        assert!(report["avg_pairwise_cosine"].is_number());
        assert!(report["psnr_mean_db"].is_number());
    }

    #[test]
    fn reference_dimension_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "chain,step,x0_0\n0,1,0.5\n0,2,0.25\n").unwrap();
        let refpath = dir.path().join("ref.txt");
        std::fs::write(&refpath, "0.5 0.5").unwrap();
        assert!(metrics_report(&path, Some(&refpath)).is_err());
    }
}
