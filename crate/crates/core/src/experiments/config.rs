//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique and
//! unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::outer::OuterConfig;
use crate::problems::TvParams;

/// Parsed key/value pairs with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {line_no}: expected key=value, got {line:?}")));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {line_no}: empty key")));
            }
            if entries.insert(k.to_string(), (line_no, v.to_string())).is_some() {
                return Err(Error::Config(format!("line {line_no}: duplicate key {k:?}")));
            }
        }
        Ok(Self { entries })
    }

    /// Removes `key` and parses it, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = {v:?}"))),
        }
    }

    /// Errors if any key was never taken.
    pub fn finish(self) -> Result<()> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::Config(format!("line {line}: unknown key {k:?}"))),
        }
    }
}

pub const SOLVER_KEYS: &str = "\
  e0               error schedule scale (default 64)
  p                error schedule exponent > 1 (default 2)
  rho              relative error weight; L_k = (1 + rho) B_k (default 1)
  r                backtracking floor ratio in (0, 1] (default 0.0625)
  s_outer          half-life of the outer backtracking (default 1024)
  s_inner          half-life of the inner step relaxation (default 4096)
  eps              stopping tolerance on |x_k - y_k| (default 1e-8)
  b0               initial smoothness estimate (default: squared norm of C)
  max_iters        outer iteration limit (default 100000)
  inner_max_iters  inner iteration limit per solve (default 1048576)
  b_cap            line-search overflow guard on B_k (default 2^1023)";

fn take_solver(kv: &mut KeyValues) -> Result<(OuterConfig, Option<f64>)> {
    let mut c = OuterConfig::default();
    macro_rules! set {
        ($key:literal, $field:ident) => {
            if let Some(v) = kv.take($key)? {
                c.$field = v;
            }
        };
    }
    set!("e0", e0);
    set!("p", p);
    set!("rho", rho);
    set!("r", r);
    set!("s_outer", s);
    set!("s_inner", s_inner);
    set!("eps", eps_stat);
    set!("max_iters", max_iters);
    set!("inner_max_iters", inner_max_iters);
    set!("b_cap", b_cap);
    let b0 = kv.take("b0")?;
    Ok((c, b0))
}

fn validate_solver(c: &OuterConfig) -> Result<()> {
    // b0 is checked once it is resolved
    let probe = OuterConfig { b0: c.b_cap.min(1.0), ..c.clone() };
    probe.validate().map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlurKind {
    Box,
    Identity,
}

impl FromStr for BlurKind {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "box" => Ok(Self::Box),
            "identity" => Ok(Self::Identity),
            _ => Err(()),
        }
    }
}

/// Configuration of the robust TV-ℓ₂ recovery run.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoverConfig {
    pub tv: TvParams,
    pub solver: OuterConfig,
    /// `None` means `B₀ = ‖C‖²`.
    pub b0: Option<f64>,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        Self { tv: TvParams::full_scale(), solver: OuterConfig::default(), b0: None }
    }
}

pub const RECOVER_KEYS: &str = "\
  n                signal length (default 2048)
  l                box blur half-width (default 128)
  blur             box | identity (default box)
  eta              TV weight (default 2)
  lam_box          half-width of the robust box (default 0.2)
  sigma            noise standard deviation (default 0.3)
  seed             noise seed (default 0)";

impl RecoverConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut tv = TvParams::full_scale();
        if let Some(v) = kv.take("n")? {
            tv.n = v;
        }
        if let Some(v) = kv.take("l")? {
            tv.l = v;
        }
        if let Some(v) = kv.take::<BlurKind>("blur")? {
            tv.identity_blur = v == BlurKind::Identity;
        }
        if let Some(v) = kv.take("eta")? {
            tv.eta = v;
        }
        if let Some(v) = kv.take("lam_box")? {
            tv.lam_box = v;
        }
        if let Some(v) = kv.take("sigma")? {
            tv.sigma = v;
        }
        if let Some(v) = kv.take("seed")? {
            tv.seed = v;
        }
        let (solver, b0) = take_solver(&mut kv)?;
        kv.finish()?;
        let cfg = Self { tv, solver, b0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let tv = &self.tv;
        if tv.n < 2 {
            return Err(Error::Config(format!("n must be >= 2, got {}", tv.n)));
        }
        if !tv.identity_blur && !(1..=tv.n).contains(&tv.l) {
            return Err(Error::Config(format!("l must lie in 1..=n, got {}", tv.l)));
        }
        if !(tv.eta > 0.0) || !(tv.lam_box >= 0.0) || !(tv.sigma >= 0.0) {
            return Err(Error::Config("need eta > 0, lam_box >= 0, sigma >= 0".into()));
        }
        if let Some(b0) = self.b0 {
            if !(b0 > 0.0 && b0 <= self.solver.b_cap) {
                return Err(Error::Config(format!("b0 must lie in (0, b_cap], got {b0}")));
            }
        }
        validate_solver(&self.solver)
    }
}

/// Operator choices for the generic `solve` command.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Identity,
    /// Box blur with the given half-width.
    Blur(usize),
    /// `(n-1) x n` forward difference.
    Diff,
    /// Random sparse `H + I` drawn from the config seed.
    Sparse,
}

impl FromStr for OperatorKind {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "identity" => Ok(Self::Identity),
            "diff" => Ok(Self::Diff),
            "sparse" => Ok(Self::Sparse),
            _ => match s.strip_prefix("blur:") {
                Some(l) => l.parse().map(Self::Blur).map_err(|_| ()),
                None => Err(()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerChoice {
    L1,
    Zero,
}

impl FromStr for RegularizerChoice {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "l1" => Ok(Self::L1),
            "zero" => Ok(Self::Zero),
            _ => Err(()),
        }
    }
}

/// `min ½dist²(Cx - b | [-λ, λ]^n) + η‖Ax‖₁` with `b` read from a file or
/// synthesized from the test signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub n: usize,
    pub c: OperatorKind,
    pub a: OperatorKind,
    pub regularizer: RegularizerChoice,
    pub eta: f64,
    pub lam_box: f64,
    /// Whitespace-separated observation vector of length `n`.
    pub data: Option<PathBuf>,
    pub sigma: f64,
    pub seed: u64,
    pub solver: OuterConfig,
    pub b0: Option<f64>,
}

pub const SOLVE_KEYS: &str = "\
  n                problem dimension (required)
  c                fidelity operator: identity | blur:<l> | sparse (default identity)
  a                regularizer operator: identity | diff | sparse (default diff)
  regularizer      l1 | zero (default l1)
  eta              l1 weight (default 1)
  lam_box          half-width of the robust box, 0 = least squares (default 0)
  data             file with n whitespace-separated observations (default: C x_bar + noise)
  sigma            noise level when synthesizing data (default 0)
  seed             seed for noise and random operators (default 0)";

impl SolveConfig {
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let n: usize = kv.take("n")?.ok_or_else(|| Error::Config("missing required key n".into()))?;
        let c = kv.take("c")?.unwrap_or(OperatorKind::Identity);
        let a = kv.take("a")?.unwrap_or(OperatorKind::Diff);
        let regularizer = kv.take("regularizer")?.unwrap_or(RegularizerChoice::L1);
        let eta = kv.take("eta")?.unwrap_or(1.0);
        let lam_box = kv.take("lam_box")?.unwrap_or(0.0);
        let data = kv.take::<PathBuf>("data")?.map(|p| match base_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p,
        });
        let sigma = kv.take("sigma")?.unwrap_or(0.0);
        let seed = kv.take("seed")?.unwrap_or(0);
        let (solver, b0) = take_solver(&mut kv)?;
        kv.finish()?;
        let cfg = Self { n, c, a, regularizer, eta, lam_box, data, sigma, seed, solver, b0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be >= 2, got {}", self.n)));
        }
        if let OperatorKind::Blur(l) = self.c {
            if !(1..=self.n).contains(&l) {
                return Err(Error::Config(format!("blur half-width must lie in 1..=n, got {l}")));
            }
        }
        if matches!(self.c, OperatorKind::Diff) {
            return Err(Error::Config("c must be square: identity, blur:<l> or sparse".into()));
        }
        if matches!(self.a, OperatorKind::Blur(_)) {
            return Err(Error::Config("a must be identity, diff or sparse".into()));
        }
        if !(self.eta > 0.0) || !(self.lam_box >= 0.0) || !(self.sigma >= 0.0) {
            return Err(Error::Config("need eta > 0, lam_box >= 0, sigma >= 0".into()));
        }
        if let Some(b0) = self.b0 {
            if !(b0 > 0.0 && b0 <= self.solver.b_cap) {
                return Err(Error::Config(format!("b0 must lie in (0, b_cap], got {b0}")));
            }
        }
        validate_solver(&self.solver)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let cfg = RecoverConfig::parse("# desk\n n = 256\n\nl=16\n eps = 1e-6 \n").unwrap();
        assert_eq!(cfg.tv.n, 256);
        assert_eq!(cfg.tv.l, 16);
        assert_eq!(cfg.solver.eps_stat, 1e-6);
        assert_eq!(cfg.tv.eta, 2.0);
        assert_eq!(cfg.b0, None);
    }

    #[test]
    fn defaults_are_full_scale() {
        let cfg = RecoverConfig::parse("").unwrap();
        assert_eq!(cfg, RecoverConfig::default());
        assert_eq!((cfg.tv.n, cfg.tv.l), (2048, 128));
        assert_eq!((cfg.solver.e0, cfg.solver.p, cfg.solver.rho), (64.0, 2.0, 1.0));
        assert_eq!((cfg.solver.r, cfg.solver.s, cfg.solver.s_inner), (1.0 / 16.0, 1024, 4096));
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = RecoverConfig::parse("n = 256\nsigmaa = 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("sigmaa") && m.contains("line 2")));
    }

    #[test]
    fn malformed_lines_are_errors() {
        assert!(RecoverConfig::parse("n 256").is_err());
        assert!(RecoverConfig::parse("n = abc").is_err());
        assert!(RecoverConfig::parse("n = 3\nn = 4").is_err());
        assert!(RecoverConfig::parse("= 4").is_err());
        assert!(RecoverConfig::parse("blur = gaussian").is_err());
        assert!(RecoverConfig::parse("p = 1").is_err());
        assert!(RecoverConfig::parse("n = 8\nl = 9").is_err());
        assert!(RecoverConfig::parse("b0 = -1").is_err());
        assert!(RecoverConfig::parse("b0 = 2\nb_cap = 1").is_err());
        assert!(RecoverConfig::parse("b_cap = 0").is_err());
        assert_eq!(RecoverConfig::parse("b0 = 0.5\nb_cap = 1").unwrap().solver.b_cap, 1.0);
    }

    #[test]
    fn solve_config() {
        let cfg = SolveConfig::parse("n = 32\nc = blur:4\na = sparse\nregularizer = zero\n", None).unwrap();
        assert_eq!(cfg.c, OperatorKind::Blur(4));
        assert_eq!(cfg.a, OperatorKind::Sparse);
        assert_eq!(cfg.regularizer, RegularizerChoice::Zero);
        assert!(SolveConfig::parse("c = identity", None).is_err());
        assert!(SolveConfig::parse("n = 4\nc = diff", None).is_err());
        assert!(SolveConfig::parse("n = 4\nfoo = 1", None).is_err());
        let rel = SolveConfig::parse("n = 4\ndata = obs.txt", Some(Path::new("/tmp/x"))).unwrap();
        assert_eq!(rel.data, Some(PathBuf::from("/tmp/x/obs.txt")));
    }
}
