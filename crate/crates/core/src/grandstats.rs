//! Scalar grand-canonical statistics and the finite canonical / MaxEnt problem.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, log_sum_exp, shannon_entropy, CompensatedSum};
use crate::potentials::{tail_bound, truncation_bound, PotentialFamily, MAX_EXPONENT};

/// Boltzmann's constant in J/K.
pub const BOLTZMANN_SI: f64 = 1.38066e-23;

/// A particle-number sequence `N ↦ A_N` with its growth certificate `A_N > K'N + δ`.
#[derive(Clone)]
pub struct ScalarSequence {
    eval: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
    kprime: f64,
    delta: f64,
    label: String,
}

impl fmt::Debug for ScalarSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarSequence")
            .field("label", &self.label)
            .field("kprime", &self.kprime)
            .field("delta", &self.delta)
            .finish()
    }
}

impl ScalarSequence {
    pub fn new<F>(label: impl Into<String>, kprime: f64, delta: f64, f: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            kprime,
            delta,
            label: label.into(),
        }
    }

    /// `A_N = N·E`, certified with `K' = E`, `δ = 0`.
    pub fn per_particle(energy: f64) -> Self {
        Self::new(format!("per_particle({energy})"), energy, 0.0, move |n| n as f64 * energy)
    }

    /// `A_N ≡ c`, certified with `K' = 0`, `δ = c`.
    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), 0.0, c, move |_| c)
    }

    pub fn eval(&self, n: usize) -> f64 {
        (self.eval)(n)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kprime(&self) -> f64 {
        self.kprime
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn as_family(&self) -> PotentialFamily {
        let f = Arc::clone(&self.eval);
        PotentialFamily::custom(self.label.clone(), move |n, _| f(n))
            .with_bounds(0.0, self.kprime)
            .with_delta(self.delta)
    }
}

#[derive(Debug, Clone)]
pub struct GrandCanonicalEnsemble {
    pub beta: f64,
    pub mu: f64,
    pub sequence: ScalarSequence,
    /// Tail tolerance for the particle-number sum.
    pub eps: f64,
    pub volume: f64,
    pub k_b: f64,
}

impl GrandCanonicalEnsemble {
    /// Dimensionless ensemble with `k_B = 1`, `V = 1`.
    pub fn new(sequence: ScalarSequence, beta: f64, mu: f64, eps: f64) -> Result<Self> {
        let e = Self {
            beta,
            mu,
            sequence,
            eps,
            volume: 1.0,
            k_b: 1.0,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn with_volume(mut self, volume: f64) -> Result<Self> {
        self.volume = volume;
        self.validate()?;
        Ok(self)
    }

    pub fn with_boltzmann(mut self, k_b: f64) -> Result<Self> {
        self.k_b = k_b;
        self.validate()?;
        Ok(self)
    }

    /// `T = 1/(k_B β)`.
    pub fn temperature(&self) -> f64 {
        1.0 / (self.k_b * self.beta)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.mu < 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be negative, got {}", self.mu)));
        }
        if !(self.volume > 0.0) || !(self.k_b > 0.0) || !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("volume, k_B and eps must be positive".into()));
        }
        Ok(())
    }

    fn with_params(&self, beta: f64, mu: f64) -> Self {
        Self {
            beta,
            mu,
            ..self.clone()
        }
    }

    /// Certified particle-number horizon.
    pub fn n_max(&self) -> Result<usize> {
        truncation_bound(&self.sequence.as_family(), self.beta, self.mu, self.eps)
    }

    fn exponents(&self, n_max: usize) -> Result<Vec<f64>> {
        (0..=n_max)
            .map(|n| {
                let x = self.beta * (n as f64 * self.mu - self.sequence.eval(n));
                if x > MAX_EXPONENT || x.is_nan() {
                    Err(Error::Overflow {
                        n,
                        word: Vec::new(),
                        exponent: x,
                    })
                } else {
                    Ok(x)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSum {
    pub z: f64,
    pub n_max: usize,
    pub tail_bound: f64,
}

/// `Z(β,μ) = Σ_{N ≤ N_max} e^{βNμ} e^{-βA_N}`.
pub fn grand_partition(e: &GrandCanonicalEnsemble) -> Result<PartitionSum> {
    let n_max = e.n_max()?;
    Ok(PartitionSum {
        z: partition_at(e, n_max)?,
        n_max,
        tail_bound: tail_bound(&e.sequence.as_family(), e.beta, e.mu, n_max)?,
    })
}

fn partition_at(e: &GrandCanonicalEnsemble, n_max: usize) -> Result<f64> {
    Ok(compensated_sum(e.exponents(n_max)?.into_iter().map(f64::exp)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleDistribution {
    /// `P_N` for `N = 0..=N_max`.
    pub p: Vec<f64>,
    /// `|Σ_N P_N - 1|` before renormalization.
    pub defect: f64,
    pub mean_n: f64,
    pub mean_a: f64,
}

fn distribution_at(e: &GrandCanonicalEnsemble, n_max: usize) -> Result<ParticleDistribution> {
    let x = e.exponents(n_max)?;
    let z = compensated_sum(x.iter().map(|v| v.exp()));
    let mut p: Vec<f64> = x.iter().map(|v| v.exp() / z).collect();
    let total = compensated_sum(p.iter().copied());
    p.iter_mut().for_each(|v| *v /= total);
    let mean_n = compensated_sum(p.iter().enumerate().map(|(n, v)| n as f64 * v));
    let mean_a = compensated_sum(p.iter().enumerate().map(|(n, v)| e.sequence.eval(n) * v));
    Ok(ParticleDistribution {
        p,
        defect: (total - 1.0).abs(),
        mean_n,
        mean_a,
    })
}

/// `P_N = e^{βNμ}e^{-βA_N}/Z` with its first moments.
pub fn particle_distribution(e: &GrandCanonicalEnsemble) -> Result<ParticleDistribution> {
    distribution_at(e, e.n_max()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPartitionDerivatives {
    pub step: f64,
    /// Central difference of `log Z` in β.
    pub fd_beta: f64,
    /// `μ⟨N⟩ - ⟨A⟩`.
    pub form_beta: f64,
    pub gap_beta: f64,
    /// Central difference of `log Z` in μ.
    pub fd_mu: f64,
    /// `β⟨N⟩`.
    pub form_mu: f64,
    pub gap_mu: f64,
    pub mean_n: f64,
    pub mean_a: f64,
}

/// Central differences of `log Z` against their expectation forms, at a fixed `N_max`.
pub fn log_partition_derivatives(e: &GrandCanonicalEnsemble, step: f64) -> Result<LogPartitionDerivatives> {
    if !(step > 0.0 && e.beta - step > 0.0 && e.mu + step < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step {step} must keep beta > 0 and mu < 0"
        )));
    }
    // the horizon of the widest evaluation covers the others
    let n_max = e.with_params(e.beta - step, e.mu + step).n_max()?;
    let log_z = |beta: f64, mu: f64| -> Result<f64> { Ok(partition_at(&e.with_params(beta, mu), n_max)?.ln()) };
    let fd_beta = (log_z(e.beta + step, e.mu)? - log_z(e.beta - step, e.mu)?) / (2.0 * step);
    let fd_mu = (log_z(e.beta, e.mu + step)? - log_z(e.beta, e.mu - step)?) / (2.0 * step);
    let d = distribution_at(e, n_max)?;
    let form_beta = e.mu * d.mean_n - d.mean_a;
    let form_mu = e.beta * d.mean_n;
    Ok(LogPartitionDerivatives {
        step,
        fd_beta,
        form_beta,
        gap_beta: (fd_beta - form_beta).abs(),
        fd_mu,
        form_mu,
        gap_mu: (fd_mu - form_mu).abs(),
        mean_n: d.mean_n,
        mean_a: d.mean_a,
    })
}

/// `p = k_B T log Z / V = log Z / (βV)`.
pub fn gas_pressure(e: &GrandCanonicalEnsemble) -> Result<f64> {
    let z = grand_partition(e)?.z;
    Ok(e.k_b * e.temperature() * z.ln() / e.volume)
}

/// `log Σ_j e^{-βA(j)}`.
pub fn log_canonical_partition(a: &[f64], beta: f64) -> f64 {
    let x: Vec<f64> = a.iter().map(|v| -beta * v).collect();
    log_sum_exp(&x)
}

fn validate_table(a: &[f64]) -> Result<()> {
    if a.len() < 2 {
        return Err(Error::InvalidParameter("canonical table needs d >= 2".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("canonical table must be finite".into()));
    }
    Ok(())
}

/// `μ^{can}(j) = e^{-βA(j)} / Σ_i e^{-βA(i)}` with a max shift.
pub fn canonical_distribution(a: &[f64], beta: f64) -> Result<Vec<f64>> {
    validate_table(a)?;
    let x: Vec<f64> = a.iter().map(|v| -beta * v).collect();
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s = compensated_sum(w.iter().copied());
    Ok(w.into_iter().map(|v| v / s).collect())
}

fn expectation(p: &[f64], a: &[f64]) -> f64 {
    compensated_sum(p.iter().zip(a).map(|(x, y)| x * y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntSolution {
    pub p: Vec<f64>,
    pub beta: f64,
    pub entropy: f64,
    /// `⟨A⟩_p - α`.
    pub constraint_residual: f64,
}

const BETA_LIMIT: f64 = 1e12;

/// Maximizes entropy subject to `⟨A⟩ = α` by bisection on the canonical β.
pub fn maxent_solve(a: &[f64], alpha: f64) -> Result<MaxEntSolution> {
    validate_table(a)?;
    let min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        if alpha != min {
            return Err(Error::Infeasible(format!(
                "A is constant {min}, no distribution has mean {alpha}"
            )));
        }
        let p = vec![1.0 / a.len() as f64; a.len()];
        return Ok(MaxEntSolution {
            entropy: shannon_entropy(&p),
            p,
            beta: 0.0,
            constraint_residual: 0.0,
        });
    }
    if !(alpha > min && alpha < max) {
        return Err(Error::MaxEntBoundary { alpha, min, max });
    }
    let mean = |beta: f64| -> f64 { expectation(&canonical_distribution(a, beta).expect("validated"), a) };
    let mut bound = 1.0;
    while !(mean(-bound) >= alpha && mean(bound) <= alpha) {
        bound *= 2.0;
        if bound > BETA_LIMIT {
            return Err(Error::MaxEntBoundary { alpha, min, max });
        }
    }
    let (mut lo, mut hi) = (-bound, bound);
    let mut beta = 0.5 * (lo + hi);
    while hi - lo > 1e-12 {
        beta = 0.5 * (lo + hi);
        let m = mean(beta);
        if m == alpha || beta == lo || beta == hi {
            break;
        }
        // the mean decreases in β
        if m > alpha {
            lo = beta;
        } else {
            hi = beta;
        }
    }
    let p = canonical_distribution(a, beta)?;
    Ok(MaxEntSolution {
        entropy: shannon_entropy(&p),
        constraint_residual: expectation(&p, a) - alpha,
        p,
        beta,
    })
}

/// Helmholtz free energy `Σ p A - h(p)/β`.
pub fn free_energy(a: &[f64], beta: f64, p: &[f64]) -> f64 {
    expectation(p, a) - shannon_entropy(p) / beta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyReport {
    pub value: f64,
    /// `-log Z(β)/β`, the value at the canonical distribution.
    pub minus_log_z_over_beta: f64,
    /// Smallest free energy on the simplex grid.
    pub grid_min: f64,
    /// `value - grid_min`; nonpositive when no grid point beats `p`.
    pub minimality_gap: f64,
}

/// Evaluates `F(p)` and compares it with the closed form and the simplex grid.
pub fn free_energy_check(a: &[f64], beta: f64, p: &[f64], grid_step: f64) -> Result<FreeEnergyReport> {
    validate_table(a)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if p.len() != a.len() {
        return Err(Error::InvalidParameter("p and A differ in length".into()));
    }
    let value = free_energy(a, beta, p);
    let grid_min = simplex_grid(a.len(), grid_step)?
        .map(|q| free_energy(a, beta, &q))
        .fold(f64::INFINITY, f64::min);
    Ok(FreeEnergyReport {
        value,
        minus_log_z_over_beta: -log_canonical_partition(a, beta) / beta,
        grid_min,
        minimality_gap: value - grid_min,
    })
}

/// Points of the probability simplex in `R^d` with coordinates on a `step` lattice.
pub fn simplex_grid(d: usize, step: f64) -> Result<impl Iterator<Item = Vec<f64>>> {
    if !(2..=4).contains(&d) {
        return Err(Error::InvalidParameter(format!("simplex grid supports 2 <= d <= 4, got {d}")));
    }
    let m = (1.0 / step).round();
    if !(m >= 1.0) || ((m * step) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("step {step} must divide 1")));
    }
    let m = m as usize;
    let mut counts = vec![0usize; d - 1];
    let mut done = false;
    Ok(std::iter::from_fn(move || {
        if done {
            return None;
        }
        let used: usize = counts.iter().sum();
        let mut point: Vec<f64> = counts.iter().map(|&c| c as f64 / m as f64).collect();
        point.push((m - used) as f64 / m as f64);
        // next composition with sum <= m
        let mut i = 0;
        loop {
            if i == counts.len() {
                done = true;
                break;
            }
            counts[i] += 1;
            if counts.iter().sum::<usize>() <= m {
                break;
            }
            counts[i] = 0;
            i += 1;
        }
        Some(point)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub p: Vec<f64>,
    pub entropy: f64,
    pub feasible_points: usize,
}

/// Highest-entropy grid point among those with `|⟨A⟩ - α| ≤ step·(max A - min A)/2`.
///
/// Moving one lattice unit between two coordinates shifts the mean by at most
/// `step·(max A - min A)`, so the half-width band always contains grid points.
pub fn maxent_grid_oracle(a: &[f64], alpha: f64, step: f64) -> Result<Option<GridOptimum>> {
    validate_table(a)?;
    let min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = 0.5 * step * (max - min);
    let mut best: Option<GridOptimum> = None;
    let mut feasible = 0;
    for q in simplex_grid(a.len(), step)? {
        if (expectation(&q, a) - alpha).abs() > slack {
            continue;
        }
        feasible += 1;
        let h = shannon_entropy(&q);
        if best.as_ref().is_none_or(|b| h > b.entropy) {
            best = Some(GridOptimum {
                p: q,
                entropy: h,
                feasible_points: 0,
            });
        }
    }
    Ok(best.map(|b| GridOptimum {
        feasible_points: feasible,
        ..b
    }))
}

/// L¹ distance between two probability vectors.
pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).collect::<CompensatedSum>().value()
}
