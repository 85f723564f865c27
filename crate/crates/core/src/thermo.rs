//! Pressures, holonomic measures, variational entropy, the derivative identity
//! and analyticity sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::perron;
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, shannon_entropy, CompensatedSum};
use crate::potentials::{finite_weights, truncation_bound, PotentialFamily};
use crate::symbolic::{branch_index, table_len, CylinderFunction, CylinderMeasure, Word};
use crate::transfer::{assemble_classical, assemble_grand, power_iterate, SolverConfig, SpectralSolution, TransferMatrix};

/// `P_N(β) = log λ_{N,β}`.
pub fn classical_pressure(
    family: &PotentialFamily,
    n: usize,
    r: usize,
    beta: f64,
    depth: usize,
    config: &SolverConfig,
) -> Result<f64> {
    let t = assemble_classical(family, n, r, beta, depth)?;
    Ok(power_iterate(&t, config)?.lambda.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRow {
    pub n: usize,
    pub beta: f64,
    pub pressure: f64,
}

/// `P_N(β)` over every pair of the two grids.
pub fn classical_table(
    family: &PotentialFamily,
    ns: &[usize],
    betas: &[f64],
    r: usize,
    depth: usize,
    config: &SolverConfig,
) -> Result<Vec<ClassicalRow>> {
    let mut rows = Vec::with_capacity(ns.len() * betas.len());
    for &n in ns {
        for &beta in betas {
            rows.push(ClassicalRow {
                n,
                beta,
                pressure: classical_pressure(family, n, r, beta, depth, config)?,
            });
        }
    }
    Ok(rows)
}

/// Markov equilibrium of a potential measurable on two symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub lambda: f64,
    /// `p(w → j)`, row-major.
    pub transitions: Vec<f64>,
    pub stationary: Vec<f64>,
    /// `h(ρ) = -Σ_w π_w Σ_j p log p`.
    pub entropy: f64,
    /// `∫ A dρ`.
    pub mean_energy: f64,
    /// `|h(ρ) - β∫A dρ - log λ|`.
    pub gap: f64,
}

/// Checks `log λ = h(ρ) - β∫A dρ` on the exact depth-1 Markov reduction.
pub fn markov_variational_check(family: &PotentialFamily, n: usize, r: usize, beta: f64) -> Result<MarkovReport> {
    if !(2..=4).contains(&r) {
        return Err(Error::InvalidParameter(format!("Markov reduction needs 2 <= r <= 4, got {r}")));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let two = family.table(n, r, 2)?;
    let three = family.table(n, r, 3)?;
    if two.refine(3)? != three {
        return Err(Error::InvalidParameter(
            "potential depends on more than the first two symbols".into(),
        ));
    }
    // M_{w j} = e^{-βA(j w)}
    let a = |w: usize, j: usize| two.value(j * r + w);
    let m = nalgebra::DMatrix::from_fn(r, r, |w, j| (-beta * a(w, j)).exp());
    let p = perron(&m)?;
    let lambda = p.lambda;
    let mut transitions = vec![0.0; r * r];
    for w in 0..r {
        for j in 0..r {
            transitions[w * r + j] = m[(w, j)] * p.right[j] / (lambda * p.right[w]);
        }
        let s: f64 = transitions[w * r..(w + 1) * r].iter().sum();
        transitions[w * r..(w + 1) * r].iter_mut().for_each(|x| *x /= s);
    }
    let raw: Vec<f64> = (0..r).map(|j| p.left[j] * p.right[j]).collect();
    let total: f64 = raw.iter().sum();
    let stationary: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let mut entropy = CompensatedSum::new();
    let mut energy = CompensatedSum::new();
    for w in 0..r {
        let row = &transitions[w * r..(w + 1) * r];
        entropy.add(stationary[w] * shannon_entropy(row));
        for (j, pj) in row.iter().enumerate() {
            energy.add(stationary[w] * pj * a(w, j));
        }
    }
    let (entropy, mean_energy) = (entropy.value(), energy.value());
    Ok(MarkovReport {
        lambda,
        transitions,
        stationary,
        entropy,
        mean_energy,
        gap: (entropy - beta * mean_energy - lambda.ln()).abs(),
    })
}

/// A holonomic probability in disintegrated form: a base measure and a branch kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct HolonomicMeasure {
    base: CylinderMeasure,
    /// `p_j(w)` at `kernel[w*r + j]`.
    kernel: Vec<f64>,
    /// Largest `|Σ_j p_j(w) - 1|` removed by renormalization.
    pub renormalization: f64,
}

const KERNEL_TOL: f64 = 1e-12;

fn normalize_rows(kernel: &mut [f64], r: usize) -> f64 {
    let mut worst = 0.0f64;
    for row in kernel.chunks_mut(r) {
        let s: f64 = row.iter().sum();
        worst = worst.max((s - 1.0).abs());
        row.iter_mut().for_each(|x| *x /= s);
    }
    worst
}

impl HolonomicMeasure {
    pub fn new(base: CylinderMeasure, kernel: Vec<f64>) -> Result<Self> {
        let r = base.alphabet_size();
        if kernel.len() != base.weights().len() * r {
            return Err(Error::InvalidParameter("kernel size does not match base".into()));
        }
        if !base.is_probability() {
            return Err(Error::InvalidParameter("base must be a probability".into()));
        }
        if kernel.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidParameter("kernel entries must be nonnegative".into()));
        }
        for (w, row) in kernel.chunks(r).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > KERNEL_TOL {
                return Err(Error::InvalidParameter(format!("kernel row {w} sums to {s}")));
            }
        }
        Ok(Self {
            base,
            kernel,
            renormalization: 0.0,
        })
    }

    /// Pairs a kernel with its stationary base, which makes the pair holonomic.
    pub fn from_kernel(r: usize, depth: usize, mut kernel: Vec<f64>) -> Result<Self> {
        let rows = table_len(r, depth);
        if depth == 0 || kernel.len() != rows * r {
            return Err(Error::InvalidParameter("kernel size does not match r^depth * r".into()));
        }
        if kernel.iter().any(|&p| !(p >= 0.0)) || kernel.chunks(r).any(|row| row.iter().sum::<f64>() <= 0.0) {
            return Err(Error::InvalidParameter("kernel rows must be nonnegative and nonzero".into()));
        }
        let renormalization = normalize_rows(&mut kernel, r);
        let mut base = vec![1.0 / rows as f64; rows];
        for _ in 0..1_000_000 {
            let pushed = push_forward(&base, &kernel, r, depth);
            // lazy step: aperiodic even when the kernel has zeros
            let next: Vec<f64> = base.iter().zip(&pushed).map(|(a, b)| 0.5 * (a + b)).collect();
            let change: f64 = next.iter().zip(&base).map(|(a, b)| (a - b).abs()).sum();
            base = next;
            if change <= 1e-15 {
                break;
            }
        }
        Ok(Self {
            base: CylinderMeasure::probability(r, depth, base)?,
            kernel,
            renormalization,
        })
    }

    pub fn base(&self) -> &CylinderMeasure {
        &self.base
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn alphabet_size(&self) -> usize {
        self.base.alphabet_size()
    }

    pub fn depth(&self) -> usize {
        self.base.depth()
    }

    /// One-step push of the base through the kernel.
    pub fn push(&self) -> Vec<f64> {
        push_forward(self.base.weights(), &self.kernel, self.alphabet_size(), self.depth())
    }
}

fn push_forward(base: &[f64], kernel: &[f64], r: usize, depth: usize) -> Vec<f64> {
    let block = table_len(r, depth - 1);
    (0..base.len())
        .map(|v| {
            let j = v / block;
            let w0 = r * (v % block);
            (0..r).map(|t| base[w0 + t] * kernel[(w0 + t) * r + j]).sum()
        })
        .collect()
}

/// Equilibrium pair `ρ ∝ hν` with kernel `p_j(w) = q_j(w) h(φ_j w)/(λ h(w))`.
pub fn equilibrium_holonomic(solution: &SpectralSolution, t: &TransferMatrix) -> Result<HolonomicMeasure> {
    let (r, depth) = (t.alphabet_size(), t.depth());
    if solution.h.depth() != depth || solution.h.alphabet_size() != r {
        return Err(Error::DepthMismatch {
            expected: depth,
            found: solution.h.depth(),
        });
    }
    let h = solution.h.values();
    let lambda = solution.lambda;
    let mut kernel = Vec::with_capacity(t.coefficients().len());
    for w in 0..t.rows() {
        for j in 0..r {
            kernel.push(t.coefficient(w, j) * h[t.source(w, j)] / (lambda * h[w]));
        }
    }
    let renormalization = normalize_rows(&mut kernel, r);
    let base = CylinderMeasure::probability(
        r,
        depth,
        solution.nu.weights().iter().zip(h).map(|(a, b)| a * b).collect(),
    )?;
    Ok(HolonomicMeasure {
        base,
        kernel,
        renormalization,
    })
}

/// `|∫ Σ_j p_j(w) g(φ_j w) dbase - ∫ g dbase|`.
pub fn holonomy_check(m: &HolonomicMeasure, g: &CylinderFunction) -> Result<f64> {
    let (r, depth) = (m.alphabet_size(), m.depth());
    if g.alphabet_size() != r {
        return Err(Error::AlphabetMismatch {
            expected: r,
            found: g.alphabet_size(),
        });
    }
    if g.depth() > depth {
        return Err(Error::DepthMismatch {
            expected: depth,
            found: g.depth(),
        });
    }
    let g = g.refine(depth)?;
    let base = m.base.weights();
    // Σ_j p_j(w) = 1, so the defect is accumulated row by row
    let mut defect = CompensatedSum::new();
    for (w, &b) in base.iter().enumerate() {
        let gw = g.value(w);
        for j in 0..r {
            defect.add(b * m.kernel[w * r + j] * (g.value(branch_index(r, depth, j, w)) - gw));
        }
    }
    Ok(defect.value().abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the L¹ norm of the gradient falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iter: 10_000,
            tol: 1e-11,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerStatus {
    Converged,
    IterationCap,
    /// No start produced a finite value; only the `log r` bound is reported.
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// `min(found, log r)`.
    pub h_v: f64,
    pub found: f64,
    pub bound: f64,
    pub status: OptimizerStatus,
    pub iterations: usize,
}

struct EntropyObjective<'a> {
    rho: &'a [f64],
    r: usize,
    depth: usize,
    precond: Vec<f64>,
}

impl EntropyObjective<'_> {
    /// `F(u) = Σ_w ρ(w) [log Σ_j e^{u(φ_j w)} - u(w)]`.
    fn value(&self, u: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        let mut buf = vec![0.0; self.r];
        for (w, &rho) in self.rho.iter().enumerate() {
            if rho == 0.0 {
                continue;
            }
            for (j, b) in buf.iter_mut().enumerate() {
                *b = u[branch_index(self.r, self.depth, j, w)];
            }
            acc.add(rho * (log_sum_exp(&buf) - u[w]));
        }
        acc.value()
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut grad: Vec<f64> = self.rho.iter().map(|x| -x).collect();
        let mut buf = vec![0.0; self.r];
        for (w, &rho) in self.rho.iter().enumerate() {
            if rho == 0.0 {
                continue;
            }
            for (j, b) in buf.iter_mut().enumerate() {
                *b = u[branch_index(self.r, self.depth, j, w)];
            }
            let lse = log_sum_exp(&buf);
            for (j, b) in buf.iter().enumerate() {
                grad[branch_index(self.r, self.depth, j, w)] += rho * (b - lse).exp();
            }
        }
        grad
    }

    /// Preconditioned descent with Armijo step halving; returns (value, iterations, converged).
    fn minimize(&self, mut u: Vec<f64>, config: &OptimizerConfig) -> (f64, usize, bool) {
        let mut f = self.value(&u);
        let mut step = 1.0;
        for it in 1..=config.max_iter {
            let grad = self.gradient(&u);
            let norm: f64 = grad.iter().map(|g| g.abs()).sum();
            if norm <= config.tol {
                return (f, it, true);
            }
            let dir: Vec<f64> = grad.iter().zip(&self.precond).map(|(g, p)| -g * p).collect();
            let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            loop {
                let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                let ft = self.value(&trial);
                if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                    u = trial;
                    f = ft;
                    step = (step * 2.0).min(1e6);
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    return (f, it, true);
                }
            }
        }
        (f, config.max_iter, false)
    }
}

/// `h_v = inf_g ∫ log(B_1 g / g) dρ` over positive depth-k `g = e^u`.
pub fn variational_entropy(m: &HolonomicMeasure, config: &OptimizerConfig) -> EntropyEstimate {
    let (r, depth) = (m.alphabet_size(), m.depth());
    let rho = m.base.weights();
    let peak = rho.iter().copied().fold(0.0, f64::max);
    let objective = EntropyObjective {
        rho,
        r,
        depth,
        precond: rho.iter().map(|&x| 1.0 / x.max(1e-12 * peak)).collect(),
    };
    let bound = (r as f64).ln();
    let mut best = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for restart in 0..=config.restarts {
        let start: Vec<f64> = if restart == 0 {
            vec![0.0; rho.len()]
        } else {
            (0..rho.len()).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let (value, its, ok) = objective.minimize(start, config);
        iterations += its;
        if value.is_finite() && value < best {
            best = value;
            converged = ok;
        }
    }
    let status = if !best.is_finite() {
        OptimizerStatus::Diverged
    } else if converged {
        OptimizerStatus::Converged
    } else {
        OptimizerStatus::IterationCap
    };
    EntropyEstimate {
        h_v: best.min(bound),
        found: best,
        bound,
        status,
        iterations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureReport {
    pub log_lambda: f64,
    pub h_v: f64,
    pub entropy_status: OptimizerStatus,
    pub int_log_psi: f64,
    /// `|h_v + ∫ log ψ dρ - log λ|`.
    pub identity_gap: f64,
    pub entropy_tol: f64,
    pub identity_holds: bool,
    pub classical: Vec<ClassicalRow>,
}

/// Compares `log λ` with `h_v + ∫ log ψ dρ` at the equilibrium pair.
pub fn grand_pressure(
    solution: &SpectralSolution,
    psi: &CylinderFunction,
    m: &HolonomicMeasure,
    optimizer: &OptimizerConfig,
    entropy_tol: f64,
) -> Result<PressureReport> {
    if psi.depth() > m.depth() {
        return Err(Error::DepthMismatch {
            expected: m.depth(),
            found: psi.depth(),
        });
    }
    let int_log_psi = m.base.integrate(&psi.map(f64::ln).refine(m.depth())?)?;
    let entropy = variational_entropy(m, optimizer);
    let log_lambda = solution.lambda.ln();
    let gap = (entropy.h_v + int_log_psi - log_lambda).abs();
    Ok(PressureReport {
        log_lambda,
        h_v: entropy.h_v,
        entropy_status: entropy.status,
        int_log_psi,
        identity_gap: gap,
        entropy_tol,
        identity_holds: gap <= entropy_tol,
        classical: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub step: f64,
}

/// `(λ(β+s) - λ(β-s))/(2sλ(β))` against `-∫ A_N dρ` at `β`.
pub fn derivative_identity(
    family: &PotentialFamily,
    n: usize,
    r: usize,
    beta0: f64,
    depth: usize,
    step: f64,
    config: &SolverConfig,
) -> Result<DerivativeReport> {
    if !(step > 0.0 && beta0 - step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < step < beta, got step {step}, beta {beta0}"
        )));
    }
    let lambda = |beta: f64| -> Result<SpectralSolution> {
        power_iterate(&assemble_classical(family, n, r, beta, depth)?, config)
    };
    let t0 = assemble_classical(family, n, r, beta0, depth)?;
    let s0 = power_iterate(&t0, config)?;
    let plus = lambda(beta0 + step)?.lambda;
    let minus = lambda(beta0 - step)?.lambda;
    let lhs = (plus - minus) / (2.0 * step * s0.lambda);
    let rho = equilibrium_holonomic(&s0, &t0)?;
    let rhs = -rho.base.integrate(&family.table(n, r, depth)?)?;
    Ok(DerivativeReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        step,
    })
}

/// Closed form `log λ = log r - βc - log(1 - e^{βμ})` for `A_N ≡ c`.
pub fn constant_log_lambda(r: usize, c: f64, beta: f64, mu: f64) -> f64 {
    (r as f64).ln() - beta * c - (-(beta * mu).exp_m1()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Ok,
    /// `μ ≥ 0` or `μ ≥ K'`.
    Inadmissible,
    /// The certified particle-number horizon exceeds the cap.
    Divergent,
    SolverFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepNode {
    pub beta: f64,
    pub mu: f64,
    pub status: NodeStatus,
    pub n_max: Option<usize>,
    pub lambda: Option<f64>,
    pub log_lambda: Option<f64>,
    /// Power-iteration contraction rate, the isolation diagnostic.
    pub gap_estimate: Option<f64>,
    pub d_beta: Option<f64>,
    pub d2_beta: Option<f64>,
    pub d_mu: Option<f64>,
    pub d2_mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub betas: Vec<f64>,
    pub mus: Vec<f64>,
    /// Row-major over `(β, μ)`.
    pub nodes: Vec<SweepNode>,
}

impl SweepResult {
    pub fn node(&self, i: usize, j: usize) -> &SweepNode {
        &self.nodes[i * self.mus.len() + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub eps: f64,
    pub n_max_cap: usize,
    pub solver: SolverConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps: 1e-12,
            n_max_cap: 100_000,
            solver: SolverConfig::default(),
        }
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    !v.is_empty() && v.windows(2).all(|w| w[0] < w[1])
}

/// First and second divided differences at the middle of three points.
fn divided_differences(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
    let s0 = (y[1] - y[0]) / h0;
    let s1 = (y[2] - y[1]) / h1;
    ((h1 * s0 + h0 * s1) / (h0 + h1), 2.0 * (s1 - s0) / (h0 + h1))
}

fn sweep_node(
    family: &PotentialFamily,
    r: usize,
    beta: f64,
    mu: f64,
    depth: usize,
    config: &SweepConfig,
) -> SweepNode {
    let mut node = SweepNode {
        beta,
        mu,
        status: NodeStatus::Ok,
        n_max: None,
        lambda: None,
        log_lambda: None,
        gap_estimate: None,
        d_beta: None,
        d2_beta: None,
        d_mu: None,
        d2_mu: None,
    };
    if mu >= 0.0 || mu >= family.kprime() {
        node.status = NodeStatus::Inadmissible;
        return node;
    }
    match truncation_bound(family, beta, mu, config.eps) {
        Ok(n) if n > config.n_max_cap => {
            node.status = NodeStatus::Divergent;
            node.n_max = Some(n);
            return node;
        }
        Ok(n) => node.n_max = Some(n),
        Err(_) => {
            node.status = NodeStatus::Inadmissible;
            return node;
        }
    }
    let solved = finite_weights(family, r, beta, mu, depth, config.eps)
        .and_then(|ws| assemble_grand(&ws))
        .and_then(|t| power_iterate(&t, &config.solver));
    match solved {
        Ok(sol) => {
            node.lambda = Some(sol.lambda);
            node.log_lambda = Some(sol.lambda.ln());
            node.gap_estimate = Some(sol.rate);
        }
        Err(_) => node.status = NodeStatus::SolverFailed,
    }
    node
}

#[cfg(feature = "parallel")]
fn map_nodes<F: Fn(usize) -> SweepNode + Sync + Send>(len: usize, f: F) -> Vec<SweepNode> {
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_nodes<F: Fn(usize) -> SweepNode>(len: usize, f: F) -> Vec<SweepNode> {
    (0..len).map(f).collect()
}

/// `log λ(β, μ)` on a grid with divided differences along each axis.
pub fn analyticity_sweep(
    family: &PotentialFamily,
    r: usize,
    betas: &[f64],
    mus: &[f64],
    depth: usize,
    config: &SweepConfig,
) -> Result<SweepResult> {
    if !strictly_increasing(betas) || !strictly_increasing(mus) {
        return Err(Error::InvalidParameter("sweep grids must be strictly increasing".into()));
    }
    if betas.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::InvalidParameter("sweep needs beta > 0 at every node".into()));
    }
    family.check_alphabet(r)?;
    let cols = mus.len();
    let mut nodes = map_nodes(betas.len() * cols, |i| {
        sweep_node(family, r, betas[i / cols], mus[i % cols], depth, config)
    });
    let log_at = |nodes: &[SweepNode], i: usize, j: usize| nodes[i * cols + j].log_lambda;
    for i in 0..betas.len() {
        for j in 0..cols {
            if i > 0 && i + 1 < betas.len() {
                if let (Some(a), Some(b), Some(c)) =
                    (log_at(&nodes, i - 1, j), log_at(&nodes, i, j), log_at(&nodes, i + 1, j))
                {
                    let (d, d2) = divided_differences([betas[i - 1], betas[i], betas[i + 1]], [a, b, c]);
                    nodes[i * cols + j].d_beta = Some(d);
                    nodes[i * cols + j].d2_beta = Some(d2);
                }
            }
            if j > 0 && j + 1 < cols {
                if let (Some(a), Some(b), Some(c)) =
                    (log_at(&nodes, i, j - 1), log_at(&nodes, i, j), log_at(&nodes, i, j + 1))
                {
                    let (d, d2) = divided_differences([mus[j - 1], mus[j], mus[j + 1]], [a, b, c]);
                    nodes[i * cols + j].d_mu = Some(d);
                    nodes[i * cols + j].d2_mu = Some(d2);
                }
            }
        }
    }
    Ok(SweepResult {
        betas: betas.to_vec(),
        mus: mus.to_vec(),
        nodes,
    })
}

/// Random holonomic measure: a random positive kernel with its stationary base.
pub fn random_holonomic<R: Rng>(r: usize, depth: usize, rng: &mut R) -> Result<HolonomicMeasure> {
    let kernel = (0..table_len(r, depth) * r)
        .map(|_| rng.random_range(0.01..1.0))
        .collect();
    HolonomicMeasure::from_kernel(r, depth, kernel)
}

/// Depth-k indicator of the cylinder spelled by `w`.
pub fn indicator(w: &Word, depth: usize) -> Result<CylinderFunction> {
    let idx = w.index();
    let len = w.len();
    let r = w.alphabet_size();
    if len > depth {
        return Err(Error::DepthMismatch {
            expected: depth,
            found: len,
        });
    }
    let block = table_len(r, depth - len);
    CylinderFunction::from_indices(r, depth, |i| if i / block == idx { 1.0 } else { 0.0 })
}
