//! Experiment configuration read from a TOML file.
//!
//! Every section except `[family]`, `[grandstats]` and `[maxent]` has defaults,
//! and the resolved struct (defaults filled in) is what gets echoed into each
//! JSON output. Output location and thread count are deliberately excluded
//! from the echo so reruns into different directories compare byte-for-byte.

use std::path::{Path, PathBuf};

use gcf_core::grandstats::{ScalarSequence, BOLTZMANN_SI};
use gcf_core::symbolic::{table_len, MAX_ALPHABET};
use gcf_core::transfer::SolverConfig;
use gcf_core::{CylinderFunction, PotentialFamily, Word};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Seeds the entropy optimizer restarts.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub operator: OperatorSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub admissibility: AdmissibilityOptions,
    #[serde(default)]
    pub pressure: PressureOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
    pub grandstats: Option<GrandstatsOptions>,
    pub maxent: Option<MaxentOptions>,
    #[serde(default, skip_serializing)]
    pub output: OutputOptions,
}

fn default_r() -> usize {
    2
}

fn default_depth() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKindName {
    /// `A_N ≡ c`.
    Constant,
    /// `A_N = N·E`.
    PerParticle,
    /// `A_N = E/(N+1)`.
    Shared,
    /// `A_N = aN + b + E`.
    Affine,
}

/// `energy` is a cylinder table of length `r^d`; its depth `d` is inferred.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: FamilyKindName,
    pub c: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub energy: Option<Vec<f64>>,
    /// Declared uniform Lipschitz bound `M`.
    #[serde(default)]
    pub lipschitz: f64,
    /// Declared growth constant `K'`.
    pub kprime: f64,
    /// Declared `δ`; defaults to `M/4`.
    pub delta: Option<f64>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub mus: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKindName {
    #[default]
    Grand,
    /// Single particle number `n` at inverse temperature `β`.
    Classical,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default)]
    pub kind: OperatorKindName,
    /// Particle number for the classical operator.
    #[serde(default)]
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tol: f64,
    pub max_iter: usize,
    /// Tail tolerance for particle-number truncation.
    pub eps: f64,
    pub entropy_tol: f64,
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            eps: 1e-12,
            entropy_tol: 1e-3,
            fd_step: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmissibilityOptions {
    pub n_max: usize,
    /// Allow the ratio-test fallback for H2.
    pub monotone: bool,
}

impl Default for AdmissibilityOptions {
    fn default() -> Self {
        Self {
            n_max: 40,
            monotone: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureOptions {
    /// Length of the partition sequence.
    pub n: usize,
    /// Base point `w` of `Zⁿ(w)`, zero-padded to the working depth.
    pub word: Vec<u8>,
    pub restarts: usize,
    pub optimizer_max_iter: usize,
    pub optimizer_tol: f64,
    /// Particle numbers for the classical `P_N(β)` table.
    pub classical_ns: Vec<usize>,
}

impl Default for PressureOptions {
    fn default() -> Self {
        Self {
            n: 100,
            word: Vec::new(),
            restarts: 5,
            optimizer_max_iter: 10_000,
            optimizer_tol: 1e-11,
            classical_ns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub n_max_cap: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { n_max_cap: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// `A_N = N·energy`.
    PerParticle,
    /// `A_N ≡ c`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// `k_B = 1`, `V = 1` unless overridden.
    #[default]
    Reduced,
    /// Physical Boltzmann constant, `β` in 1/J and `V` in m³.
    Si,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrandstatsOptions {
    pub sequence: SequenceKind,
    pub energy: Option<f64>,
    pub c: Option<f64>,
    #[serde(default)]
    pub units: Units,
    #[serde(default = "unit_volume")]
    pub volume: f64,
}

fn unit_volume() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxentOptions {
    pub a: Vec<f64>,
    pub alpha: f64,
    /// Canonical inverse temperature for the free-energy check.
    pub beta: Option<f64>,
    /// Step of the simplex-grid oracle; skipped when absent.
    pub grid_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    pub dir: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate_common()?;
        Ok(cfg)
    }

    fn validate_common(&self) -> Result<(), CliError> {
        if !(2..=MAX_ALPHABET).contains(&self.r) {
            return Err(invalid(format!("r must lie in 2..={MAX_ALPHABET}, got {}", self.r)));
        }
        if self.depth == 0 {
            return Err(invalid("depth must be at least 1"));
        }
        let t = &self.tolerances;
        for (name, v) in [("tol", t.tol), ("eps", t.eps), ("entropy_tol", t.entropy_tol), ("fd_step", t.fd_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("tolerances.{name} must be positive, got {v}")));
            }
        }
        if t.max_iter == 0 {
            return Err(invalid("tolerances.max_iter must be positive"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be positive"));
        }
        Ok(())
    }

    pub fn beta(&self) -> Result<f64, CliError> {
        let beta = self.params.beta.ok_or_else(|| invalid("params.beta is required"))?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("params.beta must be positive, got {beta}")));
        }
        Ok(beta)
    }

    pub fn mu(&self) -> Result<f64, CliError> {
        let mu = self.params.mu.ok_or_else(|| invalid("params.mu is required"))?;
        if !(mu < 0.0 && mu.is_finite()) {
            return Err(invalid(format!("params.mu must be negative, got {mu}")));
        }
        Ok(mu)
    }

    /// Sweep grids, falling back to the single `(β, μ)` node.
    ///
    /// Grid `μ` values are not required to be negative: the sweep flags those
    /// nodes as inadmissible and carries on.
    pub fn grids(&self) -> Result<(Vec<f64>, Vec<f64>), CliError> {
        let betas = match &self.params.betas {
            Some(b) => b.clone(),
            None => vec![self.beta()?],
        };
        let mus = match &self.params.mus {
            Some(m) => m.clone(),
            None => vec![self.mu()?],
        };
        for (name, g) in [("betas", &betas), ("mus", &mus)] {
            if g.is_empty() || !g.windows(2).all(|w| w[0] < w[1]) || g.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("params.{name} must be finite and strictly increasing")));
            }
        }
        if betas.iter().any(|&b| !(b > 0.0)) {
            return Err(invalid("params.betas must be positive"));
        }
        Ok((betas, mus))
    }

    pub fn family(&self) -> Result<PotentialFamily, CliError> {
        let spec = self.family.as_ref().ok_or_else(|| invalid("[family] section is required"))?;
        spec.build(self.r)
    }

    pub fn start_word(&self) -> Result<Word, CliError> {
        Word::new(self.pressure.word.clone(), self.r).map_err(|e| invalid(format!("pressure.word: {e}")))
    }

    pub fn grandstats(&self) -> Result<&GrandstatsOptions, CliError> {
        self.grandstats.as_ref().ok_or_else(|| invalid("[grandstats] section is required"))
    }

    pub fn maxent(&self) -> Result<&MaxentOptions, CliError> {
        self.maxent.as_ref().ok_or_else(|| invalid("[maxent] section is required"))
    }
}

impl FamilySpec {
    fn energy_table(&self, r: usize) -> Result<CylinderFunction, CliError> {
        let values = self
            .energy
            .clone()
            .ok_or_else(|| invalid(format!("family kind {:?} needs an energy table", self.kind)))?;
        let depth = (0..)
            .take_while(|&d| table_len(r, d) <= values.len())
            .find(|&d| table_len(r, d) == values.len())
            .ok_or_else(|| invalid(format!("energy table length {} is not a power of r = {r}", values.len())))?;
        CylinderFunction::new(r, depth, values).map_err(|e| invalid(format!("family.energy: {e}")))
    }

    fn require(&self, name: &str, v: Option<f64>) -> Result<f64, CliError> {
        v.ok_or_else(|| invalid(format!("family kind {:?} needs `{name}`", self.kind)))
    }

    pub fn build(&self, r: usize) -> Result<PotentialFamily, CliError> {
        let family = match self.kind {
            FamilyKindName::Constant => PotentialFamily::constant(self.require("c", self.c)?),
            FamilyKindName::PerParticle => PotentialFamily::per_particle(self.energy_table(r)?),
            FamilyKindName::Shared => PotentialFamily::shared(self.energy_table(r)?),
            FamilyKindName::Affine => PotentialFamily::affine(
                self.require("a", self.a)?,
                self.require("b", self.b)?,
                self.energy_table(r)?,
            ),
        };
        if !(self.lipschitz >= 0.0 && self.lipschitz.is_finite()) || !self.kprime.is_finite() {
            return Err(invalid("family.lipschitz must be finite and non-negative, family.kprime finite"));
        }
        let mut family = family.with_bounds(self.lipschitz, self.kprime);
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(invalid(format!("family.delta must be non-negative, got {d}")));
            }
            family = family.with_delta(d);
        }
        if let Some(label) = &self.label {
            family = family.with_label(label.clone());
        }
        Ok(family)
    }
}

impl GrandstatsOptions {
    pub fn sequence(&self) -> Result<ScalarSequence, CliError> {
        match self.sequence {
            SequenceKind::PerParticle => Ok(ScalarSequence::per_particle(
                self.energy.ok_or_else(|| invalid("grandstats.energy is required"))?,
            )),
            SequenceKind::Constant => Ok(ScalarSequence::constant(
                self.c.ok_or_else(|| invalid("grandstats.c is required"))?,
            )),
        }
    }

    pub fn boltzmann(&self) -> f64 {
        match self.units {
            Units::Reduced => 1.0,
            Units::Si => BOLTZMANN_SI,
        }
    }
}
