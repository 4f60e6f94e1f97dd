//! File formats: sample CSVs, binary PGM images, and atomic writes.
//!
//! Floats are written with Rust's shortest round-trip decimal formatting, so
//! parsing a CSV back reproduces the in-memory doubles bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use latentwalk_core::sampler::RunReport;

use crate::error::CliError;

/// Writes `bytes` to `path` via a temp file in the same directory plus an
/// atomic rename, so an interrupted run never leaves a partial file at the
/// final path.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(CliError::io(path))?;
    Ok(())
}

/// CSV text for retained samples: header `chain,step,x0_0,...,x0_{d-1}`, one
/// row per sample, shortest round-trip float formatting.
pub fn samples_csv(chains: &[(usize, &RunReport)], dim: usize) -> String {
    let mut out = String::from("chain,step");
    for j in 0..dim {
        let _ = write!(out, ",x0_{j}");
    }
    out.push('\n');
    for (chain, report) in chains {
        for (step, sample) in report.retained_steps.iter().zip(&report.samples) {
            let _ = write!(out, "{chain},{step}");
            for v in &sample.values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}

/// Writes one report's samples as CSV.
pub fn write_samples(report: &RunReport, chain: usize, dim: usize, path: &Path) -> Result<(), CliError> {
    atomic_write(path, samples_csv(&[(chain, report)], dim).as_bytes())
}

/// A parsed samples CSV.
#[derive(Debug, Clone)]
pub struct SamplesFile {
    pub dim: usize,
    /// `(chain, step, values)` per row, in file order.
    pub rows: Vec<(usize, usize, Vec<f64>)>,
}

impl SamplesFile {
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|(_, _, v)| v.clone()).collect()
    }
}

/// Parses a samples CSV written by [`samples_csv`].
pub fn read_samples(path: &Path) -> Result<SamplesFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "chain" || cols[1] != "step" {
        return Err(CliError::Config(format!(
            "{}: expected header `chain,step,x0_0,...`, got `{header}`",
            path.display()
        )));
    }
    let dim = cols.len() - 2;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(CliError::Config(format!(
                "{}: line {}: expected {} fields, got {}",
                path.display(),
                lineno + 2,
                dim + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| {
            CliError::Config(format!(
                "{}: line {}: bad {what}",
                path.display(),
                lineno + 2
            ))
        };
        let chain: usize = fields[0].parse().map_err(|_| parse_err("chain index"))?;
        let step: usize = fields[1].parse().map_err(|_| parse_err("step index"))?;
        let values: Result<Vec<f64>, _> = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err("float")))
            .collect();
        rows.push((chain, step, values?));
    }
    Ok(SamplesFile { dim, rows })
}

/// Maps a pixel in [-1, 1] to a byte, clamping out-of-range values.
pub fn pixel_to_byte(v: f64) -> u8 {
    (((v + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0)) as u8
}

/// Writes a binary 8-bit grayscale PGM ("P5").
pub fn write_pgm(image: &[f64], width: usize, height: usize, path: &Path) -> Result<(), CliError> {
    if width * height != image.len() {
        return Err(CliError::Config(format!(
            "pgm: {width}x{height} does not match {} pixels",
            image.len()
        )));
    }
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(image.iter().map(|v| pixel_to_byte(*v)));
    atomic_write(path, &bytes)
}

/// Reads a whitespace- or comma-separated list of floats.
pub fn read_float_list(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut out = Vec::new();
    for tok in text.split(|c: char| c.is_whitespace() || c == ',') {
        if tok.is_empty() {
            continue;
        }
        out.push(tok.parse::<f64>().map_err(|_| {
            CliError::Config(format!("{}: bad float `{tok}`", path.display()))
        })?);
    }
    if out.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no values found",
            path.display()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use latentwalk_core::sampler::SamplerConfig;
    use latentwalk_core::DataVector;

    fn report_with(samples: Vec<Vec<f64>>, steps: Vec<usize>) -> RunReport {
        RunReport {
            samples: samples.into_iter().map(DataVector::from).collect(),
            noise_trace: None,
            retained_steps: steps,
            nfe_total: 0,
            nfe_per_sample: f64::NAN,
            config: SamplerConfig::default(),
            wall_time_seconds: 0.0,
        }
    }

    #[test]
    fn csv_format_contract() {
        let report = report_with(vec![vec![0.5, -1.0]], vec![10]);
        let csv = samples_csv(&[(0, &report)], 2);
        assert_eq!(csv, "chain,step,x0_0,x0_1\n0,10,0.5,-1\n");
    }

    #[test]
    fn empty_retained_set_gives_header_only() {
        let report = report_with(vec![], vec![]);
        let csv = samples_csv(&[(0, &report)], 3);
        assert_eq!(csv, "chain,step,x0_0,x0_1,x0_2\n");
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        let vals = vec![
            vec![1.0 / 3.0, -2.0e-15],
            vec![std::f64::consts::PI, 7.125e300],
        ];
        let report = report_with(vals.clone(), vec![1, 2]);
        write_samples(&report, 3, 2, &path).unwrap();
        let parsed = read_samples(&path).unwrap();
        assert_eq!(parsed.dim, 2);
        for ((chain, _step, row), want) in parsed.rows.iter().zip(&vals) {
            assert_eq!(*chain, 3);
            assert_eq!(row, want, "round-trip must be exact");
        }
    }

    #[test]
    fn pgm_endpoint_mapping() {
        assert_eq!(pixel_to_byte(-1.0), 0);
        assert_eq!(pixel_to_byte(1.0), 255);
        assert_eq!(pixel_to_byte(0.0), 128);
        assert_eq!(pixel_to_byte(1.5), 255);
        assert_eq!(pixel_to_byte(-7.0), 0);
    }

    #[test]
    fn pgm_writes_header_and_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        write_pgm(&[-1.0, 0.0, 1.0, 0.5], 2, 2, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&bytes[bytes.len() - 4..], &[0u8, 128, 255, 191]);
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"hello").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"hello");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn atomic_write_failure_leaves_target_absent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("out.txt");
        assert!(atomic_write(&path, b"x").is_err());
        assert!(!path.exists());
    }
}
