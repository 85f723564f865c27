//! Transfer operators on depth-k cylinder functions.
//!
//! A [`TransferMatrix`] stores, for every depth-k word `w`, the `r` coefficients
//! `q_j(w)`; the source column of entry `(w, j)` is the branch image
//! `φ_j(w)` truncated to depth `k`, so the operator reads
//! `(Tf)(w) = Σ_j q_j(w) f(φ_j w)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::potentials::{try_fill_table, PotentialFamily, WeightKind, WeightSystem, MAX_EXPONENT};
use crate::symbolic::{branch_index, fill_table, table_len, CylinderFunction, CylinderMeasure, TailRule, Word};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OperatorKind {
    Classical { n: usize, beta: f64 },
    Grand { beta: f64, mu: f64 },
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    r: usize,
    depth: usize,
    coeff: Vec<f64>,
    kind: OperatorKind,
}

impl TransferMatrix {
    /// Builds an operator from row-major coefficients `coeff[w*r + j] = q_j(w)`.
    pub fn from_coefficients(r: usize, depth: usize, coeff: Vec<f64>, kind: OperatorKind) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidParameter("transfer operators need depth >= 1".into()));
        }
        let rows = table_len(r, depth);
        if coeff.len() != rows * r {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, found {}",
                rows * r,
                coeff.len()
            )));
        }
        if let Some(pos) = coeff.iter().position(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::NonPositiveWeight {
                row: pos / r,
                branch: pos % r,
                value: coeff[pos],
            });
        }
        Ok(Self { r, depth, coeff, kind })
    }

    pub fn alphabet_size(&self) -> usize {
        self.r
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn rows(&self) -> usize {
        self.coeff.len() / self.r
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeff
    }

    /// `q_j(w)` at row `w`.
    pub fn coefficient(&self, row: usize, j: usize) -> f64 {
        self.coeff[row * self.r + j]
    }

    /// Column of entry `(row, j)`.
    pub fn source(&self, row: usize, j: usize) -> usize {
        branch_index(self.r, self.depth, j, row)
    }

    /// The operator with every coefficient multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_coefficients(
            self.r,
            self.depth,
            self.coeff.iter().map(|c| c * s).collect(),
            self.kind,
        )
    }

    /// The operator with `q_j(row)` replaced by `q_j(row) + eta`.
    pub fn perturbed(&self, row: usize, j: usize, eta: f64) -> Result<Self> {
        let mut coeff = self.coeff.clone();
        coeff[row * self.r + j] += eta;
        Self::from_coefficients(self.r, self.depth, coeff, OperatorKind::Explicit)
    }

    /// Row-major dense form, `r^k × r^k`.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.rows();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for row in 0..n {
            for j in 0..self.r {
                m[(row, self.source(row, j))] += self.coefficient(row, j);
            }
        }
        m
    }

    fn apply_slice(&self, f: &[f64]) -> Vec<f64> {
        let r = self.r;
        fill_table(self.rows(), |row| {
            let c = &self.coeff[row * r..(row + 1) * r];
            c.iter()
                .enumerate()
                .map(|(j, q)| q * f[branch_index(r, self.depth, j, row)])
                .sum()
        })
    }

    /// `(T*ν)(v) = Σ_{(w,j): φ_j w = v} ν(w) q_j(w)`.
    fn dual_slice(&self, nu: &[f64]) -> Vec<f64> {
        let r = self.r;
        let block = table_len(r, self.depth - 1);
        fill_table(self.rows(), |v| {
            let j = v / block;
            let base = r * (v % block);
            (0..r).map(|t| nu[base + t] * self.coeff[(base + t) * r + j]).sum()
        })
    }

    /// One application `(Tf)(w) = Σ_j q_j(w) f(φ_j w)`.
    pub fn apply(&self, f: &CylinderFunction) -> Result<CylinderFunction> {
        self.check_function(f)?;
        CylinderFunction::new(self.r, self.depth, self.apply_slice(f.values()))
    }

    /// One application of the adjoint to a (not necessarily normalized) measure.
    pub fn apply_dual(&self, nu: &CylinderMeasure) -> Result<CylinderMeasure> {
        self.check_measure(nu)?;
        CylinderMeasure::new(self.r, self.depth, self.dual_slice(nu.weights()))
    }

    fn check_function(&self, f: &CylinderFunction) -> Result<()> {
        if f.alphabet_size() != self.r {
            return Err(Error::AlphabetMismatch {
                expected: self.r,
                found: f.alphabet_size(),
            });
        }
        if f.depth() != self.depth {
            return Err(Error::DepthMismatch {
                expected: self.depth,
                found: f.depth(),
            });
        }
        Ok(())
    }

    fn check_measure(&self, nu: &CylinderMeasure) -> Result<()> {
        if nu.alphabet_size() != self.r {
            return Err(Error::AlphabetMismatch {
                expected: self.r,
                found: nu.alphabet_size(),
            });
        }
        if nu.depth() != self.depth {
            return Err(Error::DepthMismatch {
                expected: self.depth,
                found: nu.depth(),
            });
        }
        Ok(())
    }
}

/// Classical operator `(L_{N,β} f)(w) = Σ_j e^{-βA_N(jw)} f(jw)` at depth `k`.
pub fn assemble_classical(
    family: &PotentialFamily,
    n: usize,
    r: usize,
    beta: f64,
    depth: usize,
) -> Result<TransferMatrix> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if depth == 0 {
        return Err(Error::InvalidParameter("transfer operators need depth >= 1".into()));
    }
    family.check_alphabet(r)?;
    let coeff = try_fill_table(table_len(r, depth) * r, |pos| {
        let image = branch_index(r, depth, pos % r, pos / r);
        let exponent = -beta * family.at_index(r, depth, image).eval(n);
        if exponent > MAX_EXPONENT || exponent.is_nan() {
            return Err(Error::Overflow {
                n,
                word: Word::from_index(image, depth, r).symbols().to_vec(),
                exponent,
            });
        }
        Ok(exponent.exp())
    })?;
    TransferMatrix::from_coefficients(r, depth, coeff, OperatorKind::Classical { n, beta })
}

/// Grand-canonical operator `B_q`; countable weights are regrouped by branch symbol.
pub fn assemble_grand(weights: &WeightSystem) -> Result<TransferMatrix> {
    let grouped;
    let q = match &weights.kind {
        WeightKind::Finite { q, .. } => q.as_slice(),
        WeightKind::Countable { .. } => {
            grouped = weights.grouped().expect("countable weights regroup");
            grouped.as_slice()
        }
    };
    let r = weights.r;
    let rows = table_len(r, weights.depth);
    let mut coeff = Vec::with_capacity(rows * r);
    for row in 0..rows {
        coeff.extend(q.iter().map(|t| t.value(row)));
    }
    let kind = if weights.beta.is_nan() {
        OperatorKind::Explicit
    } else {
        OperatorKind::Grand {
            beta: weights.beta,
            mu: weights.mu,
        }
    };
    TransferMatrix::from_coefficients(r, weights.depth, coeff, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution {
    pub lambda: f64,
    /// Positive eigenfunction normalized so that `ν(h) = 1`.
    pub h: CylinderFunction,
    /// Probability eigenmeasure of the adjoint.
    pub nu: CylinderMeasure,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `max/min` of the ratios `Th/h` minus one.
    pub ratio_spread: f64,
    /// Estimated modulus ratio of the second to the first eigenvalue.
    pub rate: f64,
    pub primal_iterations: usize,
    pub dual_iterations: usize,
}

impl SpectralSolution {
    pub fn iterations(&self) -> usize {
        self.primal_iterations.max(self.dual_iterations)
    }

    pub fn log_lambda(&self) -> f64 {
        self.lambda.ln()
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Geometric mean of `g/f` and the relative spread `max/min - 1`.
fn ratio_stats(g: &[f64], f: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut logs = CompensatedSum::new();
    for (a, b) in g.iter().zip(f) {
        let q = a / b;
        lo = lo.min(q);
        hi = hi.max(q);
        logs.add(q.ln());
    }
    ((logs.value() / g.len() as f64).exp(), hi / lo - 1.0)
}

fn primal_residual(g: &[f64], f: &[f64], lambda: f64) -> f64 {
    let scale = sup(f);
    g.iter()
        .zip(f)
        .map(|(a, b)| (a - lambda * b).abs())
        .fold(0.0, f64::max)
        / (lambda * scale)
}

fn dual_residual(next: &[f64], nu: &[f64], mass: f64) -> f64 {
    compensated_abs_diff(next, nu, mass) / mass
}

fn compensated_abs_diff(next: &[f64], nu: &[f64], mass: f64) -> f64 {
    next.iter()
        .zip(nu)
        .map(|(a, b)| (a - mass * b).abs())
        .collect::<CompensatedSum>()
        .value()
}

/// Asymptotic contraction from the last residuals: geometric mean of successive ratios.
fn estimate_rate(history: &[f64]) -> f64 {
    let usable: Vec<f64> = history.iter().copied().filter(|&x| x >= 1e-14).collect();
    if usable.len() < 2 {
        return 0.0;
    }
    let tail = &usable[usable.len().saturating_sub(10)..];
    let steps = tail.len() - 1;
    ((tail[steps] / tail[0]).ln() / steps as f64).exp().min(1.0)
}

/// Leading eigen-triple `(λ, h, ν)` by primal and dual power iteration from `1` and uniform.
pub fn power_iterate(t: &TransferMatrix, config: &SolverConfig) -> Result<SpectralSolution> {
    let rows = t.rows();

    let mut f = vec![1.0; rows];
    let mut history = Vec::new();
    let mut primal = None;
    for it in 1..=config.max_iter {
        let g = t.apply_slice(&f);
        let (lambda, _) = ratio_stats(&g, &f);
        let res = primal_residual(&g, &f, lambda);
        history.push(res);
        let s = sup(&g);
        f = g.into_iter().map(|x| x / s).collect();
        if res <= config.tol {
            primal = Some(it);
            break;
        }
    }
    let uniform = 1.0 / rows as f64;
    let mut nu = vec![uniform; rows];
    let mut dual_res = f64::INFINITY;
    let mut dual = None;
    for it in 1..=config.max_iter {
        let next = t.dual_slice(&nu);
        let mass: f64 = compensated_sum_slice(&next);
        dual_res = dual_residual(&next, &nu, mass);
        nu = next.into_iter().map(|x| x / mass).collect();
        if dual_res <= config.tol {
            dual = Some(it);
            break;
        }
    }

    let g = t.apply_slice(&f);
    let (lambda, spread) = ratio_stats(&g, &f);
    let primal_res = primal_residual(&g, &f, lambda);
    let (Some(primal_iterations), Some(dual_iterations)) = (primal, dual) else {
        return Err(Error::NotConverged {
            iterations: config.max_iter,
            primal_residual: primal_res,
            dual_residual: dual_res,
        });
    };

    let nu = CylinderMeasure::probability(t.r, t.depth, nu)?;
    let pairing: f64 = compensated_sum_iter(nu.weights().iter().zip(&f).map(|(a, b)| a * b));
    let h = CylinderFunction::new(t.r, t.depth, f.iter().map(|x| x / pairing).collect())?;
    Ok(SpectralSolution {
        lambda,
        h,
        nu,
        primal_residual: primal_res,
        dual_residual: dual_res,
        ratio_spread: spread,
        rate: estimate_rate(&history),
        primal_iterations,
        dual_iterations,
    })
}

fn compensated_sum_slice(v: &[f64]) -> f64 {
    compensated_sum_iter(v.iter().copied())
}

fn compensated_sum_iter(it: impl Iterator<Item = f64>) -> f64 {
    it.collect::<CompensatedSum>().value()
}

/// `B*ν(1)` for a dual fixed point `ν`, rejecting measures that are not one.
pub fn dual_eigen_lambda(t: &TransferMatrix, nu: &CylinderMeasure, tol: f64) -> Result<f64> {
    t.check_measure(nu)?;
    let mass_in = nu.total_mass();
    let p: Vec<f64> = nu.weights().iter().map(|w| w / mass_in).collect();
    let next = t.dual_slice(&p);
    let mass = compensated_sum_slice(&next);
    let residual = dual_residual(&next, &p, mass);
    if residual > tol {
        return Err(Error::DualNotConverged { residual, tol });
    }
    Ok(mass)
}

/// `log Zⁿ(w)` with the running averages `(1/m) log Zᵐ(w)` for `m = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSequence {
    pub log_z: f64,
    pub averages: Vec<f64>,
}

fn row_of(t: &TransferMatrix, w: &Word) -> Result<usize> {
    if w.alphabet_size() != t.r {
        return Err(Error::AlphabetMismatch {
            expected: t.r,
            found: w.alphabet_size(),
        });
    }
    Ok(w.at_depth(t.depth, TailRule::default()).index())
}

/// `Zⁿ(w) = (Tⁿ1)(w)` iterated in log space.
pub fn partition_iterate(t: &TransferMatrix, n: usize, w: &Word) -> Result<PartitionSequence> {
    if n == 0 {
        return Err(Error::InvalidParameter("partition iterate needs n >= 1".into()));
    }
    let row = row_of(t, w)?;
    let mut f = vec![1.0; t.rows()];
    let mut log_scale = 0.0;
    let mut averages = Vec::with_capacity(n);
    for m in 1..=n {
        let g = t.apply_slice(&f);
        let s = sup(&g);
        log_scale += s.ln();
        f = g.into_iter().map(|x| x / s).collect();
        averages.push((log_scale + f[row].ln()) / m as f64);
    }
    Ok(PartitionSequence {
        log_z: averages[n - 1] * n as f64,
        averages,
    })
}

/// `(Tⁿ A)(w) / (Tⁿ 1)(w)`, which tends to `∫ A dν`.
pub fn integral_via_ratio(t: &TransferMatrix, a: &CylinderFunction, n: usize, w: &Word) -> Result<f64> {
    if a.depth() > t.depth {
        return Err(Error::DepthMismatch {
            expected: t.depth,
            found: a.depth(),
        });
    }
    let a = a.refine(t.depth)?;
    t.check_function(&a)?;
    let row = row_of(t, w)?;
    let mut num = a.into_values();
    let mut den = vec![1.0; t.rows()];
    for _ in 0..n {
        let next_den = t.apply_slice(&den);
        let s = sup(&next_den);
        den = next_den.into_iter().map(|x| x / s).collect();
        num = t.apply_slice(&num).into_iter().map(|x| x / s).collect();
    }
    Ok(num[row] / den[row])
}

/// Default bound on the number of elementary operations for [`countable_partition`].
pub const DEFAULT_PARTITION_BUDGET: f64 = 2e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountablePartition {
    /// `log Z_m(Q)` for `m = 1..=n`.
    pub log_z: Vec<f64>,
    /// `(1/m) log Z_m(Q)`.
    pub averages: Vec<f64>,
    /// `min_m (1/m) log Z_m(Q)`, the pressure estimate.
    pub inf: f64,
}

/// `G(s) = Σ_{N_1..N_L} max_x Π_l e^{q_{rN_l+s_l}((s_{l+1}..s_L x)|_k)}` for every `s ∈ A^L`.
fn boundary_sums(log_q: &[CylinderFunction], r: usize, depth: usize, len: usize) -> Vec<f64> {
    let groups = log_q.len() / r;
    let xs = table_len(r, depth);
    (0..table_len(r, len))
        .map(|s| {
            let s_word = Word::from_index(s, len, r);
            // points[l][x]: depth-k index of (s_{l+1}..s_L x)
            let points: Vec<Vec<usize>> = (0..len)
                .map(|l| {
                    (0..xs)
                        .map(|x| {
                            let mut symbols: Vec<u8> = s_word.symbols()[l + 1..].to_vec();
                            symbols.extend_from_slice(Word::from_index(x, depth, r).symbols());
                            symbols.truncate(depth);
                            Word::new(symbols, r).expect("valid symbols").index()
                        })
                        .collect()
                })
                .collect();
            let mut total = CompensatedSum::new();
            let mut tuple = vec![0usize; len];
            let mut acc = vec![0.0f64; xs];
            loop {
                acc.iter_mut().for_each(|a| *a = 0.0);
                for (l, &n) in tuple.iter().enumerate() {
                    let table = &log_q[r * n + s_word.symbols()[l] as usize];
                    for (x, a) in acc.iter_mut().enumerate() {
                        *a += table.value(points[l][x]);
                    }
                }
                total.add(acc.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp());
                // odometer over N-tuples
                let mut pos = 0;
                loop {
                    if pos == len {
                        return total.value();
                    }
                    tuple[pos] += 1;
                    if tuple[pos] < groups {
                        break;
                    }
                    tuple[pos] = 0;
                    pos += 1;
                }
            }
        })
        .collect()
}

/// `Z_m(Q) = Σ_{w∈I^m} exp(sup_x Σ_j q_{w_j}(φ_{σ^j w} x))` for `m = 1..=n`, sup over depth-k `x`.
///
/// Only the last `min(m, k)` letters see `x`; the earlier ones are summed through the
/// grouped operator, so `Z_m = Σ_s (B^{m-L} 1)(s) G(s)` with `L = min(m, k)`.
pub fn countable_partition(weights: &WeightSystem, n: usize, budget: f64) -> Result<CountablePartition> {
    let log_q = weights
        .log_weights()
        .ok_or_else(|| Error::InvalidParameter("countable partition needs countable weights".into()))?;
    if n == 0 {
        return Err(Error::InvalidParameter("countable partition needs n >= 1".into()));
    }
    let (r, depth) = (weights.r, weights.depth);
    let groups = (log_q.len() / r) as f64;
    let xs = table_len(r, depth) as f64;
    let cost: f64 = (1..=n.min(depth))
        .map(|l| (r as f64 * groups).powi(l as i32) * xs * l as f64)
        .sum::<f64>()
        + n as f64 * xs * r as f64;
    if !(cost <= budget) {
        return Err(Error::Budget(format!(
            "countable partition up to n = {n} needs about {cost:.3e} operations, budget is {budget:.3e}"
        )));
    }
    let grouped = assemble_grand(weights)?;
    let full = boundary_sums(log_q, r, depth, depth.min(n));

    let mut log_z = Vec::with_capacity(n);
    let mut f = vec![1.0; grouped.rows()];
    let mut log_scale = 0.0;
    for m in 1..=n {
        let value = if m < depth {
            let g = boundary_sums(log_q, r, depth, m);
            compensated_sum_slice(&g).ln()
        } else {
            if m > depth {
                let next = grouped.apply_slice(&f);
                let s = sup(&next);
                log_scale += s.ln();
                f = next.into_iter().map(|x| x / s).collect();
            }
            log_scale
                + compensated_sum_iter(f.iter().zip(&full).map(|(a, b)| a * b)).ln()
        };
        log_z.push(value);
    }
    let averages: Vec<f64> = log_z.iter().enumerate().map(|(i, z)| z / (i + 1) as f64).collect();
    Ok(CountablePartition {
        inf: averages.iter().copied().fold(f64::INFINITY, f64::min),
        log_z,
        averages,
    })
}
