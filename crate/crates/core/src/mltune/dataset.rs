//! Tensorial `(mu, nu)` datasets and their CSV form `mu,nu,ref_error`.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DATASET_HEADER: &str = "mu,nu,ref_error";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetKind {
    /// Tensor product of i.i.d. uniform draws.
    Training,
    /// Tensor product of the interior uniform grids `i / (n + 1)`.
    Validation,
}

/// One manufactured problem `u = t^nu sin(pi x)` at fractional order `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub mu: f64,
    pub nu: f64,
    /// Error of the `lambda = 1` solve, the denominator of the loss.
    pub ref_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

/// Interior uniform grid `i / (n + 1)`, `i = 1..=n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n as f64 + 1.0)).collect()
}

fn open_unit_draws(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let x: f64 = rng.gen();
            if x > 0.0 {
                break x;
            }
        })
        .collect()
}

/// Full-factorial dataset of `n_mu * n_nu` samples, `mu` varying slowest.
pub fn generate_dataset(kind: DatasetKind, n_mu: usize, n_nu: usize, seed: u64) -> Result<Dataset> {
    if n_mu == 0 || n_nu == 0 {
        return Err(Error::domain(format!("dataset grid counts must be at least 1, got {n_mu} x {n_nu}")));
    }
    let (mus, nus) = match kind {
        DatasetKind::Training => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mus = open_unit_draws(&mut rng, n_mu);
            let nus = open_unit_draws(&mut rng, n_nu);
            (mus, nus)
        }
        DatasetKind::Validation => (uniform_grid(n_mu), uniform_grid(n_nu)),
    };
    let samples = mus.iter().flat_map(|&mu| nus.iter().map(move |&nu| Sample { mu, nu, ref_error: None })).collect();
    Ok(Dataset { kind, seed, samples })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV text with header `mu,nu,ref_error`; a missing reference error is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(DATASET_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{:.16e},{:.16e},", s.mu, s.nu);
            if let Some(e) = s.ref_error {
                let _ = write!(out, "{e:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str, kind: DatasetKind, seed: u64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == DATASET_HEADER => {}
            other => {
                return Err(Error::Format(format!("dataset header should be `{DATASET_HEADER}`, found {other:?}")));
            }
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Format(format!("dataset row {} has {} fields, expected 3", i + 1, fields.len())));
            }
            let parse =
                |s: &str| s.parse::<f64>().map_err(|e| Error::Format(format!("dataset row {}: `{s}`: {e}", i + 1)));
            let (mu, nu) = (parse(fields[0])?, parse(fields[1])?);
            if !(mu > 0.0 && mu < 1.0 && nu > 0.0 && nu < 1.0) {
                return Err(Error::Format(format!(
                    "dataset row {}: (mu, nu) = ({mu}, {nu}) not inside (0,1)^2",
                    i + 1
                )));
            }
            let ref_error = if fields[2].is_empty() { None } else { Some(parse(fields[2])?) };
            samples.push(Sample { mu, nu, ref_error });
        }
        Ok(Self { kind, seed, samples })
    }

    pub fn read_csv(path: &Path, kind: DatasetKind, seed: u64) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?, kind, seed)
    }
}
