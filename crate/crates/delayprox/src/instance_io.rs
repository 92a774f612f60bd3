//! Plain-text instance files and the signal loader.
//!
//! An instance file starts with a `delayprox-instance v1` magic line and a
//! key-value header (kind, dimensions, radius, generator parameters and the
//! objective value at the truth), followed by labeled sections with one
//! matrix row or vector per line. Floats are written in shortest
//! round-trip form, so saving is deterministic and loading is lossless.
//! Signal files carry one real per line.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problem::{GeneratorInfo, InitPolicy, ProblemInstance, ProblemKind};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "delayprox-instance v1";

fn write_vector(out: &mut String, v: &[f64]) {
    let mut first = true;
    for x in v {
        if !first {
            out.push(' ');
        }
        write!(out, "{x}").expect("string write");
        first = false;
    }
    out.push('\n');
}

fn write_matrix(out: &mut String, m: &Matrix) {
    for i in 0..m.rows() {
        write_vector(out, m.row(i));
    }
}

/// Serializes an instance. The header records every generator parameter
/// plus `fstar`, the objective value at the ground truth.
pub fn save_instance(instance: &ProblemInstance, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let gen = instance.generator();
    writeln!(out, "kind {}", instance.kind().as_str()).unwrap();
    writeln!(out, "m {}", instance.num_measurements()).unwrap();
    writeln!(out, "n {}", instance.signal_dim()).unwrap();
    writeln!(out, "radius {}", instance.radius()).unwrap();
    writeln!(out, "init {}", instance.init_policy().as_str()).unwrap();
    writeln!(out, "generator {}", gen.name).unwrap();
    writeln!(out, "kappa {}", gen.kappa).unwrap();
    writeln!(out, "pfail {}", gen.p_fail).unwrap();
    writeln!(out, "noise_sd {}", gen.noise_sd).unwrap();
    writeln!(out, "seed {}", gen.seed).unwrap();
    writeln!(out, "fstar {}", instance.full_objective(instance.truth())).unwrap();
    out.push_str("A\n");
    write_matrix(&mut out, instance.sensing());
    if let Some(v) = instance.sensing_v() {
        out.push_str("V\n");
        write_matrix(&mut out, v);
    }
    out.push_str("b\n");
    write_vector(&mut out, instance.measurements());
    out.push_str("truth\n");
    write_vector(&mut out, instance.truth());
    out.push_str("mask\n");
    let mask_line: Vec<&str> = instance
        .corruption_mask()
        .iter()
        .map(|&c| if c { "1" } else { "0" })
        .collect();
    out.push_str(&mask_line.join(" "));
    out.push('\n');
    std::fs::write(path, out)?;
    Ok(())
}

fn parse_floats(line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(str::parse).collect();
    let values =
        values.map_err(|_| Error::MalformedInstance(format!("bad float in {what}: '{line}'")))?;
    if values.len() != expected {
        return Err(Error::MalformedInstance(format!(
            "{what}: expected {expected} values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::MalformedInstance(format!("missing magic line '{MAGIC}'")));
    }
    let mut header: HashMap<String, String> = HashMap::new();
    let mut section_lines: Vec<&str> = Vec::new();
    for line in lines.by_ref() {
        if line == "A" {
            break;
        }
        match line.split_once(' ') {
            Some((key, value)) => {
                header.insert(key.to_string(), value.to_string());
            }
            None => return Err(Error::MalformedInstance(format!("bad header line '{line}'"))),
        }
    }
    section_lines.extend(lines);

    let get = |key: &str| -> Result<&String> {
        header
            .get(key)
            .ok_or_else(|| Error::MalformedInstance(format!("missing header key '{key}'")))
    };
    let kind = match get("kind")?.as_str() {
        "pr" => ProblemKind::PhaseRetrieval,
        "bd" => ProblemKind::BlindDeconvolution,
        other => return Err(Error::MalformedInstance(format!("unknown kind '{other}'"))),
    };
    let m: usize = get("m")?
        .parse()
        .map_err(|_| Error::MalformedInstance("bad m".to_string()))?;
    let n: usize = get("n")?
        .parse()
        .map_err(|_| Error::MalformedInstance("bad n".to_string()))?;
    let radius: f64 = get("radius")?
        .parse()
        .map_err(|_| Error::MalformedInstance("bad radius".to_string()))?;
    let init = match get("init")?.as_str() {
        "unit-gaussian" => InitPolicy::UnitGaussian,
        "truth-noise" => InitPolicy::TruthPlusNoise,
        other => return Err(Error::MalformedInstance(format!("unknown init policy '{other}'"))),
    };
    let parse_f64 = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::MalformedInstance(format!("bad {key}")))
    };
    let generator = GeneratorInfo {
        name: get("generator")?.clone(),
        kappa: parse_f64("kappa")?,
        p_fail: parse_f64("pfail")?,
        noise_sd: parse_f64("noise_sd")?,
        seed: get("seed")?
            .parse()
            .map_err(|_| Error::MalformedInstance("bad seed".to_string()))?,
    };

    let mut cursor = section_lines.into_iter();
    let read_matrix = |label: &str, cursor: &mut std::vec::IntoIter<&str>| -> Result<Matrix> {
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            let line = cursor.next().ok_or_else(|| {
                Error::MalformedInstance(format!("{label}: missing row {i}"))
            })?;
            data.extend(parse_floats(line, n, label)?);
        }
        Ok(Matrix::from_rows(m, n, data))
    };
    let sensing = read_matrix("A", &mut cursor)?;
    let sensing_v = if kind == ProblemKind::BlindDeconvolution {
        match cursor.next() {
            Some("V") => Some(read_matrix("V", &mut cursor)?),
            other => {
                return Err(Error::MalformedInstance(format!(
                    "expected section 'V', got {other:?}"
                )))
            }
        }
    } else {
        None
    };

    let expect_section = |name: &str, cursor: &mut std::vec::IntoIter<&str>| -> Result<()> {
        match cursor.next() {
            Some(line) if line == name => Ok(()),
            other => Err(Error::MalformedInstance(format!(
                "expected section '{name}', got {other:?}"
            ))),
        }
    };
    expect_section("b", &mut cursor)?;
    let measurements = parse_floats(
        cursor
            .next()
            .ok_or_else(|| Error::MalformedInstance("missing measurements".to_string()))?,
        m,
        "b",
    )?;
    expect_section("truth", &mut cursor)?;
    let truth_len = match kind {
        ProblemKind::PhaseRetrieval => n,
        ProblemKind::BlindDeconvolution => 2 * n,
    };
    let truth = parse_floats(
        cursor
            .next()
            .ok_or_else(|| Error::MalformedInstance("missing truth".to_string()))?,
        truth_len,
        "truth",
    )?;
    expect_section("mask", &mut cursor)?;
    let mask_line = cursor
        .next()
        .ok_or_else(|| Error::MalformedInstance("missing mask".to_string()))?;
    let mask: Vec<bool> = mask_line
        .split_whitespace()
        .map(|tok| tok == "1")
        .collect();
    if mask.len() != m {
        return Err(Error::MalformedInstance(format!(
            "mask: expected {m} entries, got {}",
            mask.len()
        )));
    }

    match kind {
        ProblemKind::PhaseRetrieval => ProblemInstance::phase_retrieval_from_parts(
            sensing,
            measurements,
            truth,
            mask,
            radius,
            init,
            generator,
        ),
        ProblemKind::BlindDeconvolution => ProblemInstance::blind_deconvolution_from_parts(
            sensing,
            sensing_v.unwrap(),
            measurements,
            truth,
            mask,
            radius,
            init,
            generator,
        ),
    }
}

/// Loads a signal file: one real number per line, blank lines ignored.
pub fn load_signal(path: &Path) -> Result<Vec<f64>> {
    let content = std::fs::read_to_string(path)?;
    let mut signal = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        signal.push(trimmed.parse().map_err(|_| {
            Error::MalformedInstance(format!("signal line {}: bad real '{trimmed}'", idx + 1))
        })?);
    }
    if signal.is_empty() {
        return Err(Error::MalformedInstance("signal file is empty".to_string()));
    }
    Ok(signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_blind_deconvolution, generate_phase_retrieval};
    use tempfile::tempdir;

    #[test]
    fn save_load_round_trip_pr() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("inst.txt");
        let inst = generate_phase_retrieval(12, 5, 2.0, 0.25, 5.0, 9).unwrap();
        save_instance(&inst, &path).unwrap();
        let loaded = load_instance(&path).unwrap();
        assert_eq!(inst, loaded);
    }

    #[test]
    fn save_load_round_trip_bd() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("inst.txt");
        let inst = generate_blind_deconvolution(8, 3, 1.5, 0.25, 10).unwrap();
        save_instance(&inst, &path).unwrap();
        let loaded = load_instance(&path).unwrap();
        assert_eq!(inst, loaded);
    }

    #[test]
    fn saving_is_deterministic() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        let inst = generate_phase_retrieval(10, 4, 1.0, 0.2, 5.0, 3).unwrap();
        save_instance(&inst, &a).unwrap();
        save_instance(&generate_phase_retrieval(10, 4, 1.0, 0.2, 5.0, 3).unwrap(), &b).unwrap();
        assert_eq!(
            std::fs::read_to_string(&a).unwrap(),
            std::fs::read_to_string(&b).unwrap()
        );
    }

    #[test]
    fn signal_loader() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("signal.txt");
        std::fs::write(&path, "1.5\n\n-2.25\n3e-2\n").unwrap();
        assert_eq!(load_signal(&path).unwrap(), vec![1.5, -2.25, 0.03]);
        std::fs::write(&path, "1.5\nnot-a-number\n").unwrap();
        assert!(load_signal(&path).is_err());
        std::fs::write(&path, "\n\n").unwrap();
        assert!(load_signal(&path).is_err());
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "not an instance\n").unwrap();
        assert!(load_instance(&path).is_err());
        std::fs::write(&path, "delayprox-instance v1\nkind pr\nm 2\n").unwrap();
        assert!(load_instance(&path).is_err());
    }
}
