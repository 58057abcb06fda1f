//! Run configuration: a line-oriented `[section]` / `key = value` text format.
//!
//! ```text
//! # Example 1
//! [problem]
//! mu = 0.12
//! kappa = 1
//! rho = 1
//! dimension = 1
//! t_end = 1
//! exact = manufactured
//! nu = 1-mu
//! forcing = manufactured
//!
//! [discretization]
//! M = 20
//! N = 20
//! lambda = 0.0962
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use muntz_core::mltune::{SplineConfig, TrainingConfig};

use crate::failure::Failure;

/// Sections and the keys each accepts.
const SCHEMA: &[(&str, &[&str])] = &[
    ("problem", &["mu", "kappa", "rho", "dimension", "t_end", "exact", "nu", "forcing"]),
    ("discretization", &["M", "N", "lambda", "nhat", "error_nodes"]),
    ("reference", &["M", "N", "lambda"]),
    (
        "training",
        &[
            "n_mu",
            "n_nu",
            "batch_size",
            "epochs",
            "restarts",
            "hidden_layers",
            "hidden_width",
            "lr_base",
            "lr_min",
            "beta1",
            "beta2",
            "epsilon",
            "t0",
            "t_mult",
            "fd_step",
            "lambda_min",
            "lambda_max",
            "seed",
            "M",
            "N",
        ],
    ),
    (
        "spline",
        &[
            "n_mu",
            "n_nu",
            "iterations",
            "initial_lambda",
            "lambda_min",
            "lambda_max",
            "lr_base",
            "lr_min",
            "patience",
            "tolerance",
        ],
    ),
    ("models", &["ann", "spline"]),
    ("output", &["dir", "model", "spline"]),
];

/// Parsed but untyped configuration: section -> key -> (value, line number).
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
    /// Directory of the config file; relative paths inside it resolve here.
    pub base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, Failure> {
        let mut config = RawConfig { base_dir: base_dir.to_path_buf(), ..Default::default() };
        let mut current: Option<String> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw_line).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return Err(Failure::config(format!("line {line_no}: unknown section [{name}]")));
                }
                config.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::config(format!("line {line_no}: expected `key = value`, found `{line}`")));
            };
            let Some(section) = &current else {
                return Err(Failure::config(format!("line {line_no}: `{}` appears before any [section]", key.trim())));
            };
            let key = key.trim();
            let allowed = SCHEMA.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(Failure::config(format!("line {line_no}: unknown key `{key}` in [{section}]")));
            }
            let entries = config.sections.get_mut(section).expect("section registered");
            if entries.insert(key.to_string(), (value.trim().to_string(), line_no)).is_some() {
                return Err(Failure::config(format!("line {line_no}: duplicate key `{key}` in [{section}]")));
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|(v, _)| v.as_str())
    }

    fn describe(&self, section: &str, key: &str) -> String {
        match self.sections.get(section).and_then(|s| s.get(key)) {
            Some((_, line)) => format!("line {line}: {section}.{key}"),
            None => format!("{section}.{key}"),
        }
    }

    pub fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Failure::config(format!("{}: cannot parse `{v}`: {e}", self.describe(section, key)))),
        }
    }

    pub fn required<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(section, key)?.ok_or_else(|| Failure::config(format!("missing required key {section}.{key}")))
    }

    pub fn or<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(section, key)?.unwrap_or(default))
    }

    pub fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.get(section, key).map(|p| self.resolve(p))
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = PathBuf::from(p);
        if path.is_absolute() {
            path
        } else {
            self.base_dir.join(path)
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parse a comma-separated list of reals.
pub fn parse_real_list(text: &str) -> Result<Vec<f64>, String> {
    let values: Result<Vec<f64>, String> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("`{s}` is not a number: {e}")))
        .collect();
    let values = values?;
    if values.is_empty() {
        return Err("expected at least one number".into());
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err("numbers must be finite".into());
    }
    Ok(values)
}

/// Exponent of the manufactured solution, possibly tied to `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuSpec {
    Value(f64),
    OneMinusMu,
    OnePlusMu,
}

impl NuSpec {
    fn parse(text: &str) -> Result<Self, String> {
        match text.replace(' ', "").as_str() {
            "1-mu" => Ok(NuSpec::OneMinusMu),
            "1+mu" => Ok(NuSpec::OnePlusMu),
            other => other.parse::<f64>().map(NuSpec::Value).map_err(|e| format!("`{text}`: {e}")),
        }
    }

    pub fn at(self, mu: f64) -> f64 {
        match self {
            NuSpec::Value(v) => v,
            NuSpec::OneMinusMu => 1.0 - mu,
            NuSpec::OnePlusMu => 1.0 + mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exact {
    Manufactured(NuSpec),
    /// No closed form: errors are measured against a finer reference solve.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    Manufactured,
    /// `sin(pi x) sin(pi t)` in 1D, `sin(pi x) sin(pi y) sin(pi t)` in 2D.
    SinPiXSinPiT,
}

/// Source of `lambda` for a solve.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpec {
    Value(f64),
    One,
    Ann(PathBuf),
    Spline(PathBuf),
}

impl LambdaSpec {
    pub fn parse(text: &str, raw: &RawConfig) -> Result<Self, String> {
        if let Some(p) = text.strip_prefix("ann:") {
            return Ok(LambdaSpec::Ann(raw.resolve(p.trim())));
        }
        if let Some(p) = text.strip_prefix("spline:") {
            return Ok(LambdaSpec::Spline(raw.resolve(p.trim())));
        }
        if text == "one" {
            return Ok(LambdaSpec::One);
        }
        text.parse::<f64>()
            .map(LambdaSpec::Value)
            .map_err(|_| format!("`{text}` is not a number, `one`, `ann:<model-path>` or `spline:<model-path>`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub mu: Vec<f64>,
    pub kappa: f64,
    pub rho: f64,
    pub dimension: usize,
    pub t_end: f64,
    pub exact: Exact,
    pub forcing: ForcingKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub m: usize,
    pub n: usize,
    pub lambda: LambdaSpec,
    pub nhat: Option<usize>,
    pub error_nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSection {
    pub m: usize,
    pub n: usize,
    /// `None` = the discretization's `lambda` source.
    pub lambda: Option<LambdaSpec>,
}

/// A validated problem plus discretization, as used by solve/convergence/compare.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub discretization: Discretization,
    pub reference: ReferenceSection,
}

impl RunConfig {
    /// `mu_override` replaces the `problem.mu` list (the `--mu` flag).
    pub fn from_raw(raw: &RawConfig, mu_override: Option<&[f64]>) -> Result<Self, Failure> {
        if !raw.has_section("problem") {
            return Err(Failure::config("the config has no [problem] section"));
        }
        let mu = match mu_override {
            Some(list) => list.to_vec(),
            None => match raw.get("problem", "mu") {
                Some(text) => parse_real_list(text).map_err(|e| Failure::config(format!("problem.mu: {e}")))?,
                None => return Err(Failure::config("missing required key problem.mu")),
            },
        };
        if let Some(bad) = mu.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
            return Err(Failure::config(format!("problem.mu must lie in (0, 1), got {bad}")));
        }
        let dimension: usize = raw.or("problem", "dimension", 1)?;
        if dimension != 1 && dimension != 2 {
            return Err(Failure::config(format!("problem.dimension must be 1 or 2, got {dimension}")));
        }
        let exact = match raw.get("problem", "exact").unwrap_or("manufactured") {
            "manufactured" => {
                let nu = raw.get("problem", "nu").ok_or_else(|| {
                    Failure::config("problem.exact = manufactured needs problem.nu (a number, `1-mu` or `1+mu`)")
                })?;
                Exact::Manufactured(NuSpec::parse(nu).map_err(|e| Failure::config(format!("problem.nu: {e}")))?)
            }
            "none" => Exact::None,
            other => {
                return Err(Failure::config(format!("problem.exact must be `manufactured` or `none`, got `{other}`")))
            }
        };
        let forcing = match raw.get("problem", "forcing").unwrap_or("manufactured") {
            "manufactured" => ForcingKind::Manufactured,
            "sin_pi_x_sin_pi_t" => ForcingKind::SinPiXSinPiT,
            other => {
                return Err(Failure::config(format!(
                    "problem.forcing must be `manufactured` or `sin_pi_x_sin_pi_t`, got `{other}`"
                )))
            }
        };
        if forcing == ForcingKind::Manufactured && exact == Exact::None {
            return Err(Failure::config("a manufactured forcing needs problem.exact = manufactured"));
        }
        if forcing == ForcingKind::SinPiXSinPiT && exact != Exact::None {
            return Err(Failure::config(
                "forcing sin_pi_x_sin_pi_t has no closed-form solution; set problem.exact = none",
            ));
        }
        let problem = ProblemSection {
            mu,
            kappa: raw.or("problem", "kappa", 1.0)?,
            rho: raw.or("problem", "rho", 0.0)?,
            dimension,
            t_end: raw.or("problem", "t_end", 1.0)?,
            exact,
            forcing,
        };

        let lambda_text: String = raw.required("discretization", "lambda")?;
        let lambda =
            LambdaSpec::parse(&lambda_text, raw).map_err(|e| Failure::config(format!("discretization.lambda: {e}")))?;
        let discretization = Discretization {
            m: raw.required("discretization", "M")?,
            n: raw.required("discretization", "N")?,
            lambda,
            nhat: raw.parsed("discretization", "nhat")?,
            error_nodes: raw.parsed("discretization", "error_nodes")?,
        };
        let reference = ReferenceSection {
            m: raw.or("reference", "M", 40)?,
            n: raw.or("reference", "N", 40)?,
            lambda: match raw.get("reference", "lambda") {
                Some(t) => {
                    Some(LambdaSpec::parse(t, raw).map_err(|e| Failure::config(format!("reference.lambda: {e}")))?)
                }
                None => None,
            },
        };
        let config = RunConfig { problem, discretization, reference };
        config.check_model_files()?;
        Ok(config)
    }

    fn check_model_files(&self) -> Result<(), Failure> {
        for spec in std::iter::once(&self.discretization.lambda).chain(self.reference.lambda.as_ref()) {
            if let LambdaSpec::Ann(p) | LambdaSpec::Spline(p) = spec {
                if !p.is_file() {
                    return Err(Failure::config(format!("model file {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

/// `[training]` on top of the full-scale defaults.
pub fn training_config(raw: &RawConfig) -> Result<TrainingConfig, Failure> {
    let d = TrainingConfig::default();
    let s = "training";
    let mut c = TrainingConfig {
        n_mu: raw.or(s, "n_mu", d.n_mu)?,
        n_nu: raw.or(s, "n_nu", d.n_nu)?,
        batch_size: raw.or(s, "batch_size", d.batch_size)?,
        epochs: raw.or(s, "epochs", d.epochs)?,
        restarts: raw.or(s, "restarts", d.restarts)?,
        hidden_layers: raw.or(s, "hidden_layers", d.hidden_layers)?,
        hidden_width: raw.or(s, "hidden_width", d.hidden_width)?,
        fd_step: raw.or(s, "fd_step", d.fd_step)?,
        lambda_clamp: (raw.or(s, "lambda_min", d.lambda_clamp.0)?, raw.or(s, "lambda_max", d.lambda_clamp.1)?),
        seed: raw.or(s, "seed", d.seed)?,
        resolution: raw.or(s, "M", d.resolution)?,
        n_max: raw.or(s, "N", d.n_max)?,
        ..d
    };
    c.adam.beta1 = raw.or(s, "beta1", d.adam.beta1)?;
    c.adam.beta2 = raw.or(s, "beta2", d.adam.beta2)?;
    c.adam.epsilon = raw.or(s, "epsilon", d.adam.epsilon)?;
    c.schedule.lr_base = raw.or(s, "lr_base", d.schedule.lr_base)?;
    c.schedule.lr_min = raw.or(s, "lr_min", d.schedule.lr_min)?;
    c.schedule.t0 = raw.or(s, "t0", d.schedule.t0)?;
    c.schedule.t_mult = raw.or(s, "t_mult", d.schedule.t_mult)?;
    c.validate().map_err(|e| Failure::config(format!("[training]: {e}")))?;
    Ok(c)
}

/// `[spline]` on top of the defaults; the optimizer constants follow `[training]`.
pub fn spline_config(raw: &RawConfig) -> Result<SplineConfig, Failure> {
    let d = SplineConfig::default();
    let s = "spline";
    let mut c = SplineConfig {
        n_mu: raw.or(s, "n_mu", d.n_mu)?,
        n_nu: raw.or(s, "n_nu", d.n_nu)?,
        iterations: raw.or(s, "iterations", d.iterations)?,
        initial_lambda: raw.or(s, "initial_lambda", d.initial_lambda)?,
        lambda_bounds: (raw.or(s, "lambda_min", d.lambda_bounds.0)?, raw.or(s, "lambda_max", d.lambda_bounds.1)?),
        patience: raw.or(s, "patience", d.patience)?,
        tolerance: raw.or(s, "tolerance", d.tolerance)?,
        ..d
    };
    c.schedule.lr_base = raw.or(s, "lr_base", d.schedule.lr_base)?;
    c.schedule.lr_min = raw.or(s, "lr_min", d.schedule.lr_min)?;
    c.validate().map_err(|e| Failure::config(format!("[spline]: {e}")))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "\
# comment
[problem]
mu = 0.12 ; trailing comment
nu = 1-mu
rho = 1

[discretization]
M = 20
N = 20
lambda = 0.0962
";

    #[test]
    fn parses_sections_and_defaults() {
        let raw = RawConfig::parse(EXAMPLE, Path::new(".")).unwrap();
        let c = RunConfig::from_raw(&raw, None).unwrap();
        assert_eq!(c.problem.mu, vec![0.12]);
        assert_eq!(c.problem.exact, Exact::Manufactured(NuSpec::OneMinusMu));
        assert_eq!((c.problem.kappa, c.problem.rho, c.problem.dimension), (1.0, 1.0, 1));
        assert_eq!(c.discretization.lambda, LambdaSpec::Value(0.0962));
        assert_eq!((c.reference.m, c.reference.n), (40, 40));
        let c = RunConfig::from_raw(&raw, Some(&[0.5, 0.65])).unwrap();
        assert_eq!(c.problem.mu, vec![0.5, 0.65]);
    }

    #[test]
    fn rejects_unknown_keys_sections_and_garbage() {
        assert!(RawConfig::parse("[problem]\nmoo = 1\n", Path::new(".")).is_err());
        assert!(RawConfig::parse("[nope]\n", Path::new(".")).is_err());
        assert!(RawConfig::parse("mu = 1\n", Path::new(".")).is_err());
        assert!(RawConfig::parse("[problem]\njunk\n", Path::new(".")).is_err());
        assert!(RawConfig::parse("[problem]\nmu=1\nmu=2\n", Path::new(".")).is_err());
        let raw =
            RawConfig::parse("[problem]\nnu = 0.5\n[discretization]\nM=4\nN=4\nlambda=1\n", Path::new(".")).unwrap();
        assert!(RunConfig::from_raw(&raw, None).is_err());
    }

    #[test]
    fn lambda_sources() {
        let raw = RawConfig::parse("", Path::new("/cfg")).unwrap();
        assert_eq!(LambdaSpec::parse("one", &raw).unwrap(), LambdaSpec::One);
        assert_eq!(LambdaSpec::parse("ann:m.json", &raw).unwrap(), LambdaSpec::Ann(PathBuf::from("/cfg/m.json")));
        assert_eq!(
            LambdaSpec::parse("spline:/abs/s.json", &raw).unwrap(),
            LambdaSpec::Spline(PathBuf::from("/abs/s.json"))
        );
        assert!(LambdaSpec::parse("fast", &raw).is_err());
    }

    #[test]
    fn real_lists() {
        assert_eq!(parse_real_list("0.5, 0.65").unwrap(), vec![0.5, 0.65]);
        assert!(parse_real_list("0.5,abc").is_err());
        assert!(parse_real_list("").is_err());
    }
}
