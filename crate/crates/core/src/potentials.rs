//! Potential families `Φ = (A_N)`, their admissibility diagnostics, the grand
//! potential `ψ(y) = Σ_N e^{-β[A_N(y) - μN]}` and the two IFS weight systems
//! whose transfer operator equals the grand-canonical Ruelle operator.
//!
//! All weights are evaluated at the truncated branch image: at depth `k`,
//! `q_j(w) = ψ(j, w_1, …, w_{k-1})`, so `q_j = ψ ∘ φ_j` holds entry by entry.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::symbolic::{branch_index, table_len, CylinderFunction, Word, DIAMETER};

/// Exponents above this trigger [`Error::Overflow`] instead of producing infinities.
pub const MAX_EXPONENT: f64 = 700.0;

/// Cap on the number of H3 violations stored in a report.
const MAX_RECORDED_VIOLATIONS: usize = 64;

type CustomEval = Arc<dyn Fn(usize, &Word) -> f64 + Send + Sync>;

/// How `A_N(x)` is computed.
#[derive(Clone)]
pub enum FamilyKind {
    /// `A_N ≡ c`.
    Constant(f64),
    /// `A_N = N·E`: every particle carries energy `E`.
    PerParticle(CylinderFunction),
    /// `A_N = E/(N+1)`: a shared energy split among the particles.
    Shared(CylinderFunction),
    /// `A_N = aN + b + E`.
    Affine {
        a: f64,
        b: f64,
        energy: CylinderFunction,
    },
    /// Arbitrary reentrant evaluator.
    Custom(CustomEval),
}

impl fmt::Debug for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Constant(c) => write!(f, "Constant({c})"),
            FamilyKind::PerParticle(e) => write!(f, "PerParticle(depth {})", e.depth()),
            FamilyKind::Shared(e) => write!(f, "Shared(depth {})", e.depth()),
            FamilyKind::Affine { a, b, energy } => {
                write!(f, "Affine(a={a}, b={b}, depth {})", energy.depth())
            }
            FamilyKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Which `δ` the H3 certificate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSource {
    /// `δ = (M/2)·diam(Ω) = M/4`.
    Lipschitz,
    Declared,
}

/// A family `(A_N)_{N≥0}` together with its declared constants `M`, `K'` and `δ`.
#[derive(Debug, Clone)]
pub struct PotentialFamily {
    kind: FamilyKind,
    lipschitz_bound: f64,
    kprime: f64,
    delta: Option<f64>,
    label: String,
}

impl PotentialFamily {
    fn with_kind(kind: FamilyKind, label: String) -> Self {
        Self {
            kind,
            lipschitz_bound: 0.0,
            kprime: f64::NEG_INFINITY,
            delta: None,
            label,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::with_kind(FamilyKind::Constant(c), format!("constant({c})"))
    }

    pub fn per_particle(energy: CylinderFunction) -> Self {
        let label = format!("per_particle(depth {})", energy.depth());
        Self::with_kind(FamilyKind::PerParticle(energy), label)
    }

    pub fn shared(energy: CylinderFunction) -> Self {
        let label = format!("shared(depth {})", energy.depth());
        Self::with_kind(FamilyKind::Shared(energy), label)
    }

    pub fn affine(a: f64, b: f64, energy: CylinderFunction) -> Self {
        let label = format!("affine({a}, {b}, depth {})", energy.depth());
        Self::with_kind(FamilyKind::Affine { a, b, energy }, label)
    }

    pub fn custom<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(usize, &Word) -> f64 + Send + Sync + 'static,
    {
        Self::with_kind(FamilyKind::Custom(Arc::new(f)), label.into())
    }

    /// Declares the uniform Lipschitz bound `M` and the growth constant `K'`.
    pub fn with_bounds(mut self, lipschitz_bound: f64, kprime: f64) -> Self {
        self.lipschitz_bound = lipschitz_bound;
        self.kprime = kprime;
        self
    }

    /// Overrides the default `δ = M/4`.
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Declared `M`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// Declared `K'`.
    pub fn kprime(&self) -> f64 {
        self.kprime
    }

    pub fn delta(&self) -> f64 {
        self.delta
            .unwrap_or(0.5 * self.lipschitz_bound * DIAMETER)
    }

    pub fn delta_source(&self) -> DeltaSource {
        if self.delta.is_some() {
            DeltaSource::Declared
        } else {
            DeltaSource::Lipschitz
        }
    }

    fn energy(&self) -> Option<&CylinderFunction> {
        match &self.kind {
            FamilyKind::PerParticle(e) | FamilyKind::Shared(e) => Some(e),
            FamilyKind::Affine { energy, .. } => Some(energy),
            FamilyKind::Constant(_) | FamilyKind::Custom(_) => None,
        }
    }

    /// Errors unless the family can be evaluated on words over `r` symbols.
    pub fn check_alphabet(&self, r: usize) -> Result<()> {
        match self.energy() {
            Some(e) if e.alphabet_size() != r => Err(Error::AlphabetMismatch {
                expected: r,
                found: e.alphabet_size(),
            }),
            _ => Ok(()),
        }
    }

    /// `A_N` at the point represented by `w` (zero tail).
    pub fn eval(&self, n: usize, w: &Word) -> Result<f64> {
        self.check_alphabet(w.alphabet_size())?;
        let energy = match self.energy() {
            Some(e) => e.eval(w)?,
            None => 0.0,
        };
        Ok(self.combine(n, energy, w))
    }

    fn combine(&self, n: usize, energy: f64, w: &Word) -> f64 {
        let nf = n as f64;
        match &self.kind {
            FamilyKind::Constant(c) => *c,
            FamilyKind::PerParticle(_) => nf * energy,
            FamilyKind::Shared(_) => energy / (nf + 1.0),
            FamilyKind::Affine { a, b, .. } => a * nf + b + energy,
            FamilyKind::Custom(f) => f(n, w),
        }
    }

    /// The sequence `N ↦ A_N(w)` at a depth-`depth` word index.
    pub(crate) fn at_index(&self, r: usize, depth: usize, idx: usize) -> PointSequence<'_> {
        let energy = self.energy().map_or(0.0, |e| e.value_at(depth, idx));
        let word = match self.kind {
            FamilyKind::Custom(_) => Some(Word::from_index(idx, depth, r)),
            _ => None,
        };
        PointSequence {
            family: self,
            energy,
            word,
        }
    }

    /// `A_N` as a depth-`depth` table.
    pub fn table(&self, n: usize, r: usize, depth: usize) -> Result<CylinderFunction> {
        self.check_alphabet(r)?;
        CylinderFunction::from_indices(r, depth, |i| self.at_index(r, depth, i).eval(n))
    }
}

/// `N ↦ A_N(x)` at a fixed point; energy lookups are done once.
pub(crate) struct PointSequence<'a> {
    family: &'a PotentialFamily,
    energy: f64,
    word: Option<Word>,
}

impl PointSequence<'_> {
    pub(crate) fn eval(&self, n: usize) -> f64 {
        match (&self.family.kind, &self.word) {
            (FamilyKind::Custom(f), Some(w)) => f(n, w),
            _ => {
                let nf = n as f64;
                match &self.family.kind {
                    FamilyKind::Constant(c) => *c,
                    FamilyKind::PerParticle(_) => nf * self.energy,
                    FamilyKind::Shared(_) => self.energy / (nf + 1.0),
                    FamilyKind::Affine { a, b, .. } => a * nf + b + self.energy,
                    FamilyKind::Custom(_) => unreachable!("custom families carry their word"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Fragment {
    pub max_observed_lip: f64,
    /// Particle number where the maximum was observed.
    pub argmax_n: usize,
    pub declared_m: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Fragment {
    /// Minimum over the checked words of the root-test margin.
    pub root_margin: f64,
    /// Minimum ratio-test margin, when the family was checked for monotonicity.
    pub ratio_margin: Option<f64>,
    /// Tail window `[lo, hi]` used for the limsup estimate.
    pub window: (usize, usize),
    /// Only depth-k words are checked, not all of Ω.
    pub words_checked: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H3Violation {
    pub n: usize,
    pub word: Vec<u8>,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H3Fragment {
    pub kprime: f64,
    pub delta: f64,
    pub delta_source: DeltaSource,
    pub violation_count: usize,
    /// The first violations found, in (N, word index) order.
    pub violations: Vec<H3Violation>,
    pub verdict: Verdict,
}

/// Results of the three admissibility checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub depth: usize,
    pub n_max_used: usize,
    pub h1: H1Fragment,
    pub h2: H2Fragment,
    pub h3: H3Fragment,
}

impl AdmissibilityReport {
    pub fn verdicts(&self) -> [Verdict; 3] {
        [self.h1.verdict, self.h2.verdict, self.h3.verdict]
    }

    /// Fail if any check fails; otherwise inconclusive if any is; otherwise pass.
    pub fn overall(&self) -> Verdict {
        let v = self.verdicts();
        if v.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if v.contains(&Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }
}

const LIP_TOL: f64 = 1e-12;

/// Largest discrete Lipschitz constant of `A_N` over `N ≤ n_max`, against the declared `M`.
pub fn check_h1(family: &PotentialFamily, r: usize, depth: usize, n_max: usize) -> Result<H1Fragment> {
    if depth == 0 {
        return Err(Error::InvalidParameter("H1 check needs depth >= 1".into()));
    }
    let mut best = (0.0f64, 0usize);
    for n in 0..=n_max {
        let lip = family.table(n, r, depth)?.discrete_lipschitz();
        if lip > best.0 {
            best = (lip, n);
        }
    }
    let m = family.lipschitz_bound;
    Ok(H1Fragment {
        max_observed_lip: best.0,
        argmax_n: best.1,
        declared_m: m,
        verdict: if best.0 <= m * (1.0 + LIP_TOL) + LIP_TOL {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    })
}

fn require_negative_mu(mu: f64) -> Result<()> {
    if mu < 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "chemical potential must be negative, got {mu}"
        )))
    }
}

fn h2_window(n_max: usize) -> (usize, usize) {
    let hi = n_max.max(1);
    ((hi / 2).max(1), hi)
}

/// Root-test margin `limsup_N A_N(jw)/N - μ`, minimized over the branches `j`.
/// The limsup is estimated by the maximum over `N ∈ [n_max/2, n_max]`.
pub fn check_h2_root(family: &PotentialFamily, mu: f64, w: &Word, n_max: usize) -> Result<f64> {
    require_negative_mu(mu)?;
    family.check_alphabet(w.alphabet_size())?;
    let (lo, hi) = h2_window(n_max);
    let mut margin = f64::INFINITY;
    for j in 0..w.alphabet_size() {
        let point = w.prepend(j)?;
        let mut sup = f64::NEG_INFINITY;
        for n in lo..=hi {
            sup = sup.max(family.eval(n, &point)? / n as f64);
        }
        margin = margin.min(sup - mu);
    }
    Ok(margin)
}

/// Ratio-test margin `min_N A_{N+1}(jw) - A_N(jw) - μ` for families increasing in `N`.
pub fn check_h2_ratio(family: &PotentialFamily, mu: f64, w: &Word, n_max: usize) -> Result<f64> {
    require_negative_mu(mu)?;
    family.check_alphabet(w.alphabet_size())?;
    let mut margin = f64::INFINITY;
    for j in 0..w.alphabet_size() {
        let point = w.prepend(j)?;
        let mut prev = family.eval(0, &point)?;
        for n in 0..n_max.max(1) {
            let next = family.eval(n + 1, &point)?;
            let inc = next - prev;
            if inc < -LIP_TOL * prev.abs().max(1.0) {
                return Err(Error::NotMonotone {
                    n,
                    word: point.symbols().to_vec(),
                });
            }
            margin = margin.min(inc - mu);
            prev = next;
        }
    }
    Ok(margin)
}

/// Runs the root test on every depth-k word (and the ratio test when `monotone`).
pub fn check_h2(
    family: &PotentialFamily,
    r: usize,
    mu: f64,
    depth: usize,
    n_max: usize,
    monotone: bool,
) -> Result<H2Fragment> {
    let words = table_len(r, depth);
    let mut root = f64::INFINITY;
    let mut ratio: Option<f64> = None;
    let mut ratio_failed = false;
    for idx in 0..words {
        let w = Word::from_index(idx, depth, r);
        root = root.min(check_h2_root(family, mu, &w, n_max)?);
        if monotone && !ratio_failed {
            match check_h2_ratio(family, mu, &w, n_max) {
                Ok(m) => ratio = Some(ratio.map_or(m, |x: f64| x.min(m))),
                Err(Error::NotMonotone { .. }) => {
                    ratio_failed = true;
                    ratio = None;
                }
                Err(e) => return Err(e),
            }
        }
    }
    // The limsup cannot be certified from a finite window; only clear margins decide.
    let scale = mu.abs().max(1.0) * 1e-9;
    let verdict = if ratio.is_some_and(|m| m > scale) || root > scale {
        Verdict::Pass
    } else if root < -scale && !ratio.is_some_and(|m| m > 0.0) {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(H2Fragment {
        root_margin: root,
        ratio_margin: ratio,
        window: h2_window(n_max),
        words_checked: words,
        verdict: if ratio_failed && verdict == Verdict::Pass && root <= scale {
            Verdict::Inconclusive
        } else {
            verdict
        },
    })
}

/// Checks `A_N(w) > K'N + δ` on every depth-k word and every `N ≤ n_max`.
pub fn check_h3(
    family: &PotentialFamily,
    r: usize,
    mu: f64,
    depth: usize,
    n_max: usize,
) -> Result<H3Fragment> {
    require_negative_mu(mu)?;
    family.check_alphabet(r)?;
    let kprime = family.kprime;
    if !(kprime > mu) {
        return Err(Error::NoCertificate { kprime, mu });
    }
    let delta = family.delta();
    let mut count = 0usize;
    let mut violations = Vec::new();
    for n in 0..=n_max {
        let bound = kprime * n as f64 + delta;
        for idx in 0..table_len(r, depth) {
            let value = family.at_index(r, depth, idx).eval(n);
            if !(value > bound) {
                count += 1;
                if violations.len() < MAX_RECORDED_VIOLATIONS {
                    violations.push(H3Violation {
                        n,
                        word: Word::from_index(idx, depth, r).symbols().to_vec(),
                        value,
                        bound,
                    });
                }
            }
        }
    }
    Ok(H3Fragment {
        kprime,
        delta,
        delta_source: family.delta_source(),
        violation_count: count,
        violations,
        verdict: if count == 0 { Verdict::Pass } else { Verdict::Fail },
    })
}

/// Runs H1, H2 and H3 at the given depth and particle-number horizon.
pub fn check_admissibility(
    family: &PotentialFamily,
    r: usize,
    mu: f64,
    depth: usize,
    n_max: usize,
    monotone: bool,
) -> Result<AdmissibilityReport> {
    Ok(AdmissibilityReport {
        depth,
        n_max_used: n_max,
        h1: check_h1(family, r, depth, n_max)?,
        h2: check_h2(family, r, mu, depth, n_max, monotone)?,
        h3: check_h3(family, r, mu, depth, n_max)?,
    })
}

/// Geometric tail bound `Σ_{N>n_max} e^{-β[(K'-μ)N + δ]}`.
pub fn tail_bound(family: &PotentialFamily, beta: f64, mu: f64, n_max: usize) -> Result<f64> {
    let decay = certificate_decay(family, beta, mu)?;
    Ok((-beta * family.delta() - decay * (n_max as f64 + 1.0)).exp() / -(-decay).exp_m1())
}

fn certificate_decay(family: &PotentialFamily, beta: f64, mu: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    require_negative_mu(mu)?;
    if !(family.kprime > mu) || !family.kprime.is_finite() {
        return Err(Error::NoCertificate {
            kprime: family.kprime,
            mu,
        });
    }
    Ok(beta * (family.kprime - mu))
}

/// Smallest `N_max` whose certified tail is at most `eps`.
pub fn truncation_bound(family: &PotentialFamily, beta: f64, mu: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let decay = certificate_decay(family, beta, mu)?;
    // tail(n) = exp(-βδ - decay(n+1)) / (1 - e^{-decay}) ≤ eps
    let log_head = -beta * family.delta() - (-(-decay).exp_m1()).ln();
    let guess = ((log_head - eps.ln()) / decay - 1.0).ceil();
    let mut n = if guess.is_finite() && guess > 0.0 {
        guess as usize
    } else {
        0
    };
    while n > 0 && tail_bound(family, beta, mu, n - 1)? <= eps {
        n -= 1;
    }
    while tail_bound(family, beta, mu, n)? > eps {
        n += 1;
    }
    Ok(n)
}

/// `ψ` at depth `k` with its truncation certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct GrandPotential {
    pub psi: CylinderFunction,
    pub n_max: usize,
    pub tail_bound: f64,
}

/// Sums `e^{-β[A_N(x) - μN]}` over `N = 0..=n_max` in ascending order.
pub(crate) fn grand_sum(
    family: &PotentialFamily,
    r: usize,
    depth: usize,
    idx: usize,
    beta: f64,
    mu: f64,
    n_max: usize,
) -> Result<f64> {
    let seq = family.at_index(r, depth, idx);
    let mut acc = CompensatedSum::new();
    for n in 0..=n_max {
        let exponent = -beta * (seq.eval(n) - mu * n as f64);
        if exponent > MAX_EXPONENT || exponent.is_nan() {
            return Err(Error::Overflow {
                n,
                word: Word::from_index(idx, depth, r).symbols().to_vec(),
                exponent,
            });
        }
        acc.add(exponent.exp());
    }
    Ok(acc.value())
}

#[cfg(feature = "parallel")]
pub(crate) fn try_fill_table<F>(len: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn try_fill_table<F>(len: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    (0..len).map(f).collect()
}

/// `ψ` with an explicit particle-number horizon and no certificate.
pub fn grand_potential_truncated(
    family: &PotentialFamily,
    r: usize,
    beta: f64,
    mu: f64,
    depth: usize,
    n_max: usize,
) -> Result<CylinderFunction> {
    family.check_alphabet(r)?;
    let values = try_fill_table(table_len(r, depth), |idx| {
        grand_sum(family, r, depth, idx, beta, mu, n_max)
    })?;
    if let Some(pos) = values.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveWeight {
            row: pos,
            branch: 0,
            value: values[pos],
        });
    }
    CylinderFunction::new(r, depth, values)
}

/// The grand-canonical potential truncated at the certified `N_max`.
pub fn grand_potential(
    family: &PotentialFamily,
    r: usize,
    beta: f64,
    mu: f64,
    depth: usize,
    eps: f64,
) -> Result<GrandPotential> {
    let n_max = truncation_bound(family, beta, mu, eps)?;
    let psi = grand_potential_truncated(family, r, beta, mu, depth, n_max)?;
    Ok(GrandPotential {
        psi,
        n_max,
        tail_bound: tail_bound(family, beta, mu, n_max)?,
    })
}

/// `ξ(j) = (j - j mod r)/r`: the particle number carried by countable branch `j`.
pub fn xi(j: usize, r: usize) -> usize {
    (j - j % r) / r
}

/// `J_max = r(N_max+1) - 1`, covering particle numbers `0..=N_max`.
pub fn countable_j_max(r: usize, n_max: usize) -> usize {
    r * (n_max + 1) - 1
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    /// `q_j` for `j ∈ {0..r-1}`, with the potential `ψ` when built from a family.
    Finite {
        q: Vec<CylinderFunction>,
        psi: Option<CylinderFunction>,
    },
    /// Log-weights `q_j` for `j ∈ {0..J_max}`; the branch map is `φ_{j mod r}`.
    Countable { log_q: Vec<CylinderFunction> },
}

/// IFS weights on depth-`k` cylinders.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSystem {
    pub r: usize,
    pub depth: usize,
    pub beta: f64,
    pub mu: f64,
    pub n_max: usize,
    /// Certified bound on the neglected part of the `N`-sum (∞ without certificate).
    pub tail_bound: f64,
    pub kind: WeightKind,
}

impl WeightSystem {
    /// Finite weights from explicit positive tables (no potential attached).
    pub fn from_tables(q: Vec<CylinderFunction>) -> Result<Self> {
        let r = q.len();
        let first = q
            .first()
            .ok_or_else(|| Error::InvalidParameter("no weight tables".into()))?;
        let depth = first.depth();
        for (j, t) in q.iter().enumerate() {
            if t.alphabet_size() != r {
                return Err(Error::AlphabetMismatch {
                    expected: r,
                    found: t.alphabet_size(),
                });
            }
            if t.depth() != depth {
                return Err(Error::DepthMismatch {
                    expected: depth,
                    found: t.depth(),
                });
            }
            if let Some(row) = t.values().iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::NonPositiveWeight {
                    row,
                    branch: j,
                    value: t.value(row),
                });
            }
        }
        Ok(Self {
            r,
            depth,
            beta: f64::NAN,
            mu: f64::NAN,
            n_max: 0,
            tail_bound: 0.0,
            kind: WeightKind::Finite { q, psi: None },
        })
    }

    /// Finite-kind weight tables.
    pub fn finite(&self) -> Option<&[CylinderFunction]> {
        match &self.kind {
            WeightKind::Finite { q, .. } => Some(q),
            WeightKind::Countable { .. } => None,
        }
    }

    pub fn psi(&self) -> Option<&CylinderFunction> {
        match &self.kind {
            WeightKind::Finite { psi, .. } => psi.as_ref(),
            WeightKind::Countable { .. } => None,
        }
    }

    /// Countable-kind log-weight tables.
    pub fn log_weights(&self) -> Option<&[CylinderFunction]> {
        match &self.kind {
            WeightKind::Countable { log_q } => Some(log_q),
            WeightKind::Finite { .. } => None,
        }
    }

    pub fn is_summable(&self) -> bool {
        self.tail_bound.is_finite()
    }

    /// Regroups countable weights by branch symbol: `Σ_N e^{q_{rN+a}(w)}` for each `a`.
    pub fn grouped(&self) -> Option<Vec<CylinderFunction>> {
        let log_q = self.log_weights()?;
        let r = self.r;
        Some(
            (0..r)
                .map(|a| {
                    let values = (0..table_len(r, self.depth))
                        .map(|idx| {
                            log_q
                                .iter()
                                .skip(a)
                                .step_by(r)
                                .map(|t| t.value(idx).exp())
                                .sum()
                        })
                        .collect();
                    CylinderFunction::new(r, self.depth, values).expect("table size matches")
                })
                .collect(),
        )
    }
}

/// `q_j = ψ ∘ φ_j` for `j ∈ {0..r-1}` at depth `k ≥ 1`.
pub fn finite_weights(
    family: &PotentialFamily,
    r: usize,
    beta: f64,
    mu: f64,
    depth: usize,
    eps: f64,
) -> Result<WeightSystem> {
    if depth == 0 {
        return Err(Error::InvalidParameter("weights need depth >= 1".into()));
    }
    let gp = grand_potential(family, r, beta, mu, depth, eps)?;
    let q = (0..r)
        .map(|j| {
            CylinderFunction::from_indices(r, depth, |idx| gp.psi.value(branch_index(r, depth, j, idx)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightSystem {
        r,
        depth,
        beta,
        mu,
        n_max: gp.n_max,
        tail_bound: gp.tail_bound,
        kind: WeightKind::Finite {
            q,
            psi: Some(gp.psi),
        },
    })
}

/// Log-weights `q_j(x) = -β(A_{ξ(j)}(φ_j x) - ξ(j)μ)` for `j ≤ J_max`.
pub fn countable_weights(
    family: &PotentialFamily,
    r: usize,
    beta: f64,
    mu: f64,
    depth: usize,
    j_max: usize,
) -> Result<WeightSystem> {
    if depth == 0 {
        return Err(Error::InvalidParameter("weights need depth >= 1".into()));
    }
    if !(j_max + 1).is_multiple_of(r) {
        return Err(Error::InvalidParameter(format!(
            "J_max + 1 = {} must be a multiple of r = {r}",
            j_max + 1
        )));
    }
    require_negative_mu(mu)?;
    family.check_alphabet(r)?;
    let n_max = (j_max + 1) / r - 1;
    let log_q = (0..=j_max)
        .map(|j| {
            let a = j % r;
            let n = xi(j, r);
            let values = try_fill_table(table_len(r, depth), |idx| {
                let image = branch_index(r, depth, a, idx);
                let exponent = -beta * (family.at_index(r, depth, image).eval(n) - n as f64 * mu);
                if exponent > MAX_EXPONENT || exponent.is_nan() {
                    return Err(Error::Overflow {
                        n,
                        word: Word::from_index(image, depth, r).symbols().to_vec(),
                        exponent,
                    });
                }
                Ok(exponent)
            })?;
            CylinderFunction::new(r, depth, values)
        })
        .collect::<Result<Vec<_>>>()?;
    let tail = tail_bound(family, beta, mu, n_max).unwrap_or(f64::INFINITY);
    Ok(WeightSystem {
        r,
        depth,
        beta,
        mu,
        n_max,
        tail_bound: tail,
        kind: WeightKind::Countable { log_q },
    })
}

/// Modulus of continuity of `log q_j` on a grid of scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiniReport {
    pub t: Vec<f64>,
    /// `max_j ρ(log q_j, t)` at each grid point.
    pub rho: Vec<f64>,
    /// `max_t ρ(t)/t`.
    pub max_ratio: f64,
    /// Trapezoid estimate of `∫ ρ(t)/t dt` over the grid.
    pub integral: f64,
}

/// Evenly spaced grid on `(0, 1]`.
pub fn default_t_grid(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (1..=points).map(|i| i as f64 / points as f64).collect()
}

/// Estimates `ρ(log q_j, t) = max_{d(x,y) ≤ t} |log q_j(x) - log q_j(y)|` on the grid.
pub fn dini_modulus_check(weights: &WeightSystem, t_grid: &[f64]) -> Result<DiniReport> {
    let tables: Vec<CylinderFunction> = match &weights.kind {
        WeightKind::Finite { q, .. } => q.iter().map(|t| t.map(f64::ln)).collect(),
        WeightKind::Countable { log_q } => log_q.clone(),
    };
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter("t grid must be positive".into()));
    }
    let profiles: Vec<Vec<f64>> = tables.iter().map(|t| t.mismatch_profile()).collect();
    let rho: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            profiles
                .iter()
                .flat_map(|p| {
                    p.iter()
                        .enumerate()
                        .filter(move |(i, _)| 0.5f64.powi(*i as i32 + 1) <= t)
                        .map(|(_, &d)| d)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let ratios: Vec<f64> = rho.iter().zip(t_grid).map(|(p, t)| p / t).collect();
    let integral = t_grid
        .windows(2)
        .zip(ratios.windows(2))
        .map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0] + g[1]))
        .sum();
    Ok(DiniReport {
        t: t_grid.to_vec(),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        rho,
        integral,
    })
}

/// Hölder variations `V_n(Q)` of a countable family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub alpha: f64,
    /// `V_n` for `n = 1..=n_max`.
    pub variations: Vec<f64>,
    pub v_alpha: f64,
    pub summable: bool,
}

/// `V_n(Q) = sup_{w ∈ I_n} sup_{x≠y} |q_{w_1}(φ_{σw} x) - q_{w_1}(φ_{σw} y)| e^{α(n-1)}`.
///
/// At depth `k` the inner sup is the oscillation of `q_{w_1}` inside the depth-`(n-1)`
/// cylinder spelled by `σw`, so every word of `I_n` is covered exactly.
pub fn holder_variation(weights: &WeightSystem, n_max: usize, alpha: f64) -> Result<HolderReport> {
    let log_q = weights
        .log_weights()
        .ok_or_else(|| Error::InvalidParameter("Hölder variation needs countable weights".into()))?;
    let profiles: Vec<Vec<f64>> = log_q.iter().map(|t| t.mismatch_profile()).collect();
    let variations: Vec<f64> = (1..=n_max)
        .map(|n| {
            let osc = profiles
                .iter()
                .map(|p| p.iter().skip(n - 1).copied().fold(0.0, f64::max))
                .fold(0.0, f64::max);
            osc * (alpha * (n as f64 - 1.0)).exp()
        })
        .collect();
    Ok(HolderReport {
        alpha,
        v_alpha: variations.iter().copied().fold(0.0, f64::max),
        variations,
        summable: weights.is_summable(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::CylinderMeasure;

    const E1: f64 = 0.36787944117144233; // e^{-1}

    fn zero_family() -> PotentialFamily {
        PotentialFamily::constant(0.0).with_bounds(0.0, 0.0)
    }

    fn energy(values: &[f64], r: usize, depth: usize) -> CylinderFunction {
        CylinderFunction::new(r, depth, values.to_vec()).unwrap()
    }

    #[test]
    fn h1_constant_and_shared() {
        let f = PotentialFamily::constant(3.0).with_bounds(0.0, 0.0);
        let h1 = check_h1(&f, 2, 3, 20).unwrap();
        assert_eq!(h1.max_observed_lip, 0.0);
        assert_eq!(h1.verdict, Verdict::Pass);

        let e = energy(&[1.0, 1.5, 2.0, 2.2], 2, 2);
        let l = e.discrete_lipschitz();
        let shared = PotentialFamily::shared(e.clone()).with_bounds(l, -1.0);
        let h1 = check_h1(&shared, 2, 3, 20).unwrap();
        assert!((h1.max_observed_lip - l).abs() < 1e-14);
        assert_eq!(h1.argmax_n, 0);
        assert_eq!(h1.verdict, Verdict::Pass);
        let tight = PotentialFamily::shared(e).with_bounds(0.9 * l, -1.0);
        assert_eq!(check_h1(&tight, 2, 3, 20).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn h1_adversarial_grows_with_horizon() {
        // A_N(w) = N·w_1
        let f = PotentialFamily::per_particle(energy(&[0.0, 1.0], 2, 1)).with_bounds(5.0, 0.0);
        let a = check_h1(&f, 2, 2, 4).unwrap();
        let b = check_h1(&f, 2, 2, 40).unwrap();
        assert!(b.max_observed_lip > a.max_observed_lip);
        assert_eq!(b.max_observed_lip, 80.0);
        assert_eq!(b.verdict, Verdict::Fail);
    }

    #[test]
    fn h2_root_examples() {
        let w = Word::new(vec![0, 1], 2).unwrap();
        let m = check_h2_root(&zero_family(), -1.0, &w, 100).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        let lin = PotentialFamily::per_particle(CylinderFunction::constant(2, 1, 1.0).unwrap());
        assert!((check_h2_root(&lin, -1.0, &w, 100).unwrap() - 2.0).abs() < 1e-12);
        let mu = -0.7;
        let bad = PotentialFamily::affine(2.0 * mu, 0.0, CylinderFunction::constant(2, 1, 0.0).unwrap());
        assert!((check_h2_root(&bad, mu, &w, 100).unwrap() - mu).abs() < 1e-12);
        assert!(check_h2_root(&zero_family(), 0.0, &w, 10).is_err());
    }

    #[test]
    fn h2_ratio_examples() {
        let w = Word::new(vec![1], 2).unwrap();
        let lin = PotentialFamily::per_particle(CylinderFunction::constant(2, 1, 1.0).unwrap());
        assert!((check_h2_ratio(&lin, -1.0, &w, 50).unwrap() - 2.0).abs() < 1e-12);
        assert!((check_h2_ratio(&zero_family(), -1.0, &w, 50).unwrap() - 1.0).abs() < 1e-12);
        let dec = PotentialFamily::per_particle(CylinderFunction::constant(2, 1, -1.0).unwrap());
        assert!(matches!(
            check_h2_ratio(&dec, -0.5, &w, 50),
            Err(Error::NotMonotone { n: 0, .. })
        ));
    }

    #[test]
    fn h3_examples() {
        let one = PotentialFamily::constant(1.0).with_bounds(0.0, -0.5).with_delta(0.5);
        let h3 = check_h3(&one, 2, -1.0, 3, 50).unwrap();
        assert_eq!(h3.verdict, Verdict::Pass);
        assert_eq!(h3.delta_source, DeltaSource::Declared);

        let lin = PotentialFamily::per_particle(CylinderFunction::constant(2, 1, 1.0).unwrap())
            .with_bounds(0.0, 0.5)
            .with_delta(0.0);
        let h3 = check_h3(&lin, 2, -1.0, 2, 10).unwrap();
        assert_eq!(h3.verdict, Verdict::Fail);
        assert_eq!(h3.violation_count, 4);
        assert!(h3.violations.iter().all(|v| v.n == 0));

        // E/(N+1) with E > δ = M/4 and K' below min_N (E_min/(N(N+1)) - δ/N)
        let e = energy(&[1.0, 1.2], 2, 1);
        let m = e.discrete_lipschitz(); // 0.4
        let delta = m / 4.0;
        let kp = (1..200)
            .map(|n| {
                let n = n as f64;
                1.0 / (n * (n + 1.0)) - delta / n
            })
            .fold(f64::INFINITY, f64::min)
            - 1e-3;
        let shared = PotentialFamily::shared(e).with_bounds(m, kp);
        let h3 = check_h3(&shared, 2, -1.0, 4, 150).unwrap();
        assert_eq!(h3.delta_source, DeltaSource::Lipschitz);
        assert_eq!(h3.verdict, Verdict::Pass, "{:?}", h3.violations.first());

        assert!(matches!(
            check_h3(&PotentialFamily::constant(1.0).with_bounds(0.0, -2.0), 2, -1.0, 1, 3),
            Err(Error::NoCertificate { .. })
        ));
    }

    #[test]
    fn truncation_geometric_example() {
        let f = zero_family();
        let n = truncation_bound(&f, 1.0, -1.0, 1e-12).unwrap();
        let denom = 1.0 - E1;
        assert!((-28.0f64).exp() / denom > 1e-12);
        assert!((-29.0f64).exp() / denom <= 1e-12);
        assert_eq!(n, 28);
        assert!(tail_bound(&f, 1.0, -1.0, n).unwrap() <= 1e-12);
        assert!(tail_bound(&f, 1.0, -1.0, n - 1).unwrap() > 1e-12);
    }

    #[test]
    fn truncation_full_sum_and_monotone_in_beta() {
        let f = zero_family();
        let full = 1.0 / (1.0 - E1);
        assert_eq!(truncation_bound(&f, 1.0, -1.0, full).unwrap(), 0);
        for &eps in &[1e-3, 1e-8, 1e-14] {
            for &beta in &[0.3, 1.0, 2.5] {
                let a = truncation_bound(&f, beta, -1.0, eps).unwrap();
                let b = truncation_bound(&f, 2.0 * beta, -1.0, eps).unwrap();
                assert!(b <= a);
            }
        }
        let nocert = PotentialFamily::constant(0.0).with_bounds(0.0, -1.0);
        assert!(matches!(
            truncation_bound(&nocert, 1.0, -1.0, 1e-6),
            Err(Error::NoCertificate { .. })
        ));
    }

    #[test]
    fn grand_potential_closed_forms() {
        let gp = grand_potential(&zero_family(), 2, 1.0, -1.0, 3, 1e-14).unwrap();
        let expect = 1.0 / (1.0 - E1);
        assert!(gp.psi.values().iter().all(|&v| (v - expect).abs() < 1e-13));
        assert!((expect - 1.5819767068693265).abs() < 1e-15);

        let lin = PotentialFamily::per_particle(CylinderFunction::constant(2, 1, 1.0).unwrap())
            .with_bounds(0.0, 1.0);
        let gp = grand_potential(&lin, 2, 1.0, -1.0, 2, 1e-14).unwrap();
        let expect = 1.0 / (1.0 - E1 * E1);
        assert!(gp.psi.values().iter().all(|&v| (v - expect).abs() < 1e-13));

        let single = PotentialFamily::custom("single", |n, _| if n == 0 { 0.7 } else { 1e6 })
            .with_bounds(0.0, 1e3);
        let gp = grand_potential(&single, 3, 2.0, -1.0, 1, 1e-12).unwrap();
        assert!(gp.psi.values().iter().all(|&v| (v - (-1.4f64).exp()).abs() < 1e-15));
    }

    #[test]
    fn grand_potential_overflow_is_reported() {
        let f = PotentialFamily::constant(-1000.0).with_bounds(0.0, -0.5);
        assert!(matches!(
            grand_potential(&f, 2, 1.0, -1.0, 1, 1e-6),
            Err(Error::Overflow { n: 0, .. })
        ));
    }

    #[test]
    fn tail_certificate_holds_on_recompute() {
        let e = energy(&[0.2, 0.9, 0.4, 0.1], 2, 2);
        let f = PotentialFamily::affine(0.5, 0.0, e).with_bounds(2.8, 0.5).with_delta(0.0);
        let eps = 1e-10;
        let gp = grand_potential(&f, 2, 1.3, -0.4, 3, eps).unwrap();
        let more = grand_potential_truncated(&f, 2, 1.3, -0.4, 3, gp.n_max + 10).unwrap();
        for (a, b) in gp.psi.values().iter().zip(more.values()) {
            assert!((a - b).abs() <= eps);
        }
    }

    #[test]
    fn finite_weights_are_psi_after_branch() {
        let e = energy(&[0.3, 0.8, 0.1, 0.5, 0.6, 0.2, 0.9, 0.4, 0.7], 3, 2);
        let f = PotentialFamily::per_particle(e).with_bounds(4.0, 0.1);
        let ws = finite_weights(&f, 3, 0.8, -0.5, 3, 1e-12).unwrap();
        let psi = ws.psi().unwrap();
        let q = ws.finite().unwrap();
        for idx in 0..27 {
            let w = Word::from_index(idx, 3, 3);
            for (j, qj) in q.iter().enumerate() {
                let image = w.prepend(j).unwrap();
                assert_eq!(qj.value(idx), psi.eval(&image).unwrap());
                assert!(qj.value(idx) > 0.0);
            }
        }
        let zero = finite_weights(&zero_family(), 2, 1.0, -1.0, 2, 1e-14).unwrap();
        for t in zero.finite().unwrap() {
            assert!(t.values().iter().all(|&v| (v - 1.5819767068693265).abs() < 1e-12));
        }
    }

    #[test]
    fn plain_weight_lipschitz_when_psi_small() {
        // ψ < 1 here, so the βM/2 bound on q_j itself holds.
        let e = energy(&[0.0, 0.3, 0.5, 0.1], 2, 2);
        let m = e.discrete_lipschitz();
        let f = PotentialFamily::affine(1.0, 2.0, e).with_bounds(m, 1.0);
        let (beta, depth) = (1.5, 5);
        let ws = finite_weights(&f, 2, beta, -1.0, depth, 1e-12).unwrap();
        assert!(ws.psi().unwrap().max() < 1.0);
        let slack = m * 0.5f64.powi(depth as i32);
        for q in ws.finite().unwrap() {
            assert!(q.discrete_lipschitz() <= beta * m / 2.0 + slack);
        }
    }

    #[test]
    fn xi_examples() {
        assert_eq!((xi(0, 2), xi(1, 2), xi(2, 2), xi(3, 2), xi(5, 2)), (0, 0, 1, 1, 2));
        assert_eq!(countable_j_max(3, 4), 14);
    }

    #[test]
    fn countable_regroups_to_finite() {
        let e = energy(&[0.2, 0.9, 0.4, 0.1], 2, 2);
        let f = PotentialFamily::per_particle(e).with_bounds(2.8, 0.05);
        let (beta, mu, depth) = (1.0, -0.6, 3);
        let finite = finite_weights(&f, 2, beta, mu, depth, 1e-12).unwrap();
        let countable =
            countable_weights(&f, 2, beta, mu, depth, countable_j_max(2, finite.n_max)).unwrap();
        assert_eq!(countable.n_max, finite.n_max);
        let grouped = countable.grouped().unwrap();
        for (g, q) in grouped.iter().zip(finite.finite().unwrap()) {
            for (a, b) in g.values().iter().zip(q.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
        assert!(countable_weights(&f, 2, beta, mu, depth, 4).is_err());
    }

    #[test]
    fn dini_constant_and_bound() {
        let zero = finite_weights(&zero_family(), 2, 1.0, -1.0, 3, 1e-12).unwrap();
        let rep = dini_modulus_check(&zero, &default_t_grid(100)).unwrap();
        assert_eq!(rep.max_ratio, 0.0);
        assert_eq!(rep.integral, 0.0);

        let e = energy(&[0.0, 0.7, 0.2, 0.4], 2, 2);
        let m = e.discrete_lipschitz();
        let f = PotentialFamily::shared(e).with_bounds(m, -0.2);
        let beta = 1.7;
        let ws = finite_weights(&f, 2, beta, -1.0, 4, 1e-12).unwrap();
        let rep = dini_modulus_check(&ws, &default_t_grid(2000)).unwrap();
        assert!(rep.max_ratio > 0.0);
        assert!(rep.max_ratio <= beta * m / 2.0 + 1e-12);
        assert!(rep.integral <= beta * m / 2.0 + 1e-6);
    }

    #[test]
    fn holder_examples() {
        let zero = countable_weights(&zero_family(), 2, 1.0, -1.0, 3, 19).unwrap();
        let rep = holder_variation(&zero, 5, 2f64.ln()).unwrap();
        assert!(rep.variations.iter().all(|&v| v == 0.0));
        assert!(rep.summable);

        let e = energy(&[0.0, 0.7, 0.2, 0.4, 0.9, 0.1, 0.3, 0.6], 2, 3);
        let m = e.discrete_lipschitz();
        let f = PotentialFamily::shared(e).with_bounds(m, -0.2);
        let beta = 1.2;
        let ws = countable_weights(&f, 2, beta, -1.0, 4, 39).unwrap();
        let rep = holder_variation(&ws, 6, 2f64.ln()).unwrap();
        let bound = beta * m / 2.0 * DIAMETER;
        assert!(rep.v_alpha > 0.0);
        assert!(rep.variations.iter().all(|&v| v <= bound + 1e-12), "{rep:?}");
        // beyond the representation depth nothing varies
        assert_eq!(rep.variations[4], 0.0);
        assert_eq!(rep.variations[5], 0.0);
    }

    #[test]
    fn integrate_psi_against_uniform() {
        let gp = grand_potential(&zero_family(), 2, 1.0, -1.0, 2, 1e-12).unwrap();
        let u = CylinderMeasure::uniform(2, 2).unwrap();
        assert!((u.integrate(&gp.psi).unwrap() - 1.5819767068693265).abs() < 1e-11);
    }
}
