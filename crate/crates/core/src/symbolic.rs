//! The full shift `Ω = {0,…,r-1}^ℕ`, its words and the depth-k piecewise-constant
//! representation used by every other module.
//!
//! A word of length `k` is encoded as a base-`r` integer with the first symbol as
//! the most significant digit, so the branch map `φ_j` truncated to depth `k`
//! is `idx ↦ j·r^{k-1} + idx / r`.
//!
//! Points of `Ω` are obtained from finite words by a [`TailRule`]; the default
//! pads with symbol 0 forever. The metric is `d(x, y) = 2^{-n}` where `n ≥ 1` is
//! the first (1-based) position where `x` and `y` differ, so `diam(Ω) = 1/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Diameter of `Ω` under the metric above.
pub const DIAMETER: f64 = 0.5;

/// Largest supported alphabet; symbols are stored as `u8`.
pub const MAX_ALPHABET: usize = 256;

/// `r^k`, panicking on overflow. Depths are always small enough in practice.
pub fn table_len(r: usize, depth: usize) -> usize {
    r.checked_pow(depth as u32)
        .expect("cylinder table size overflows usize")
}

/// Index of `φ_j(w)` truncated to the same depth `k ≥ 1`.
#[inline]
pub fn branch_index(r: usize, depth: usize, j: usize, idx: usize) -> usize {
    debug_assert!(depth >= 1);
    j * table_len(r, depth - 1) + idx / r
}

/// Re-index a depth-`from` word at depth `to`: truncating, or padding with zeros.
#[inline]
pub fn reindex(r: usize, from: usize, to: usize, idx: usize) -> usize {
    if to <= from {
        idx / table_len(r, from - to)
    } else {
        idx * table_len(r, to - from)
    }
}

fn check_alphabet(r: usize) -> Result<()> {
    if (2..=MAX_ALPHABET).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alphabet size must lie in 2..={MAX_ALPHABET}, got {r}"
        )))
    }
}

/// How a finite word is extended to a point of `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailRule {
    /// Repeat the given symbol forever.
    Pad(u8),
}

impl Default for TailRule {
    fn default() -> Self {
        TailRule::Pad(0)
    }
}

impl TailRule {
    fn symbol(self) -> u8 {
        match self {
            TailRule::Pad(s) => s,
        }
    }
}

/// A finite string over the alphabet `{0,…,r-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    symbols: Vec<u8>,
    r: usize,
}

impl Word {
    pub fn new(symbols: Vec<u8>, r: usize) -> Result<Self> {
        check_alphabet(r)?;
        if let Some(&s) = symbols.iter().find(|&&s| s as usize >= r) {
            return Err(Error::SymbolOutOfRange {
                symbol: s as usize,
                r,
            });
        }
        Ok(Self { symbols, r })
    }

    pub fn empty(r: usize) -> Result<Self> {
        Self::new(Vec::new(), r)
    }

    /// The word of length `len` encoded by `idx`.
    pub fn from_index(idx: usize, len: usize, r: usize) -> Self {
        let mut symbols = vec![0u8; len];
        let mut rest = idx;
        for slot in symbols.iter_mut().rev() {
            *slot = (rest % r) as u8;
            rest /= r;
        }
        debug_assert_eq!(rest, 0, "index {idx} too large for length {len}");
        Self { symbols, r }
    }

    pub fn index(&self) -> usize {
        self.symbols
            .iter()
            .fold(0usize, |acc, &s| acc * self.r + s as usize)
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The IFS branch `φ_j`: returns `(j, w_1, …)`.
    pub fn prepend(&self, j: usize) -> Result<Word> {
        if j >= self.r {
            return Err(Error::SymbolOutOfRange { symbol: j, r: self.r });
        }
        let mut symbols = Vec::with_capacity(self.len() + 1);
        symbols.push(j as u8);
        symbols.extend_from_slice(&self.symbols);
        Ok(Word { symbols, r: self.r })
    }

    /// The shift `σ`: drops the first symbol (no-op on the empty word).
    pub fn shift(&self) -> Word {
        Word {
            symbols: self.symbols.iter().skip(1).copied().collect(),
            r: self.r,
        }
    }

    /// First `k` symbols of the point this word represents under `tail`.
    pub fn at_depth(&self, k: usize, tail: TailRule) -> Word {
        let symbols = (0..k)
            .map(|i| self.symbols.get(i).copied().unwrap_or(tail.symbol()))
            .collect();
        Word { symbols, r: self.r }
    }

    fn symbol_or(&self, i: usize, tail: TailRule) -> u8 {
        self.symbols.get(i).copied().unwrap_or(tail.symbol())
    }
}

/// `2^{-n}` with `n` the first 1-based position where the extended points differ.
pub fn distance(u: &Word, v: &Word, tail: TailRule) -> Result<f64> {
    if u.r != v.r {
        return Err(Error::AlphabetMismatch {
            expected: u.r,
            found: v.r,
        });
    }
    // Past the longer word both points equal the tail forever.
    let n = u.len().max(v.len());
    Ok((0..n)
        .find(|&i| u.symbol_or(i, tail) != v.symbol_or(i, tail))
        .map_or(0.0, |i| 0.5f64.powi(i as i32 + 1)))
}

#[cfg(feature = "parallel")]
pub(crate) fn fill_table<F>(len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn fill_table<F>(len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..len).map(f).collect()
}

/// A real function constant on depth-`k` cylinders, stored as a table of `r^k` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    r: usize,
    depth: usize,
    values: Vec<f64>,
}

impl CylinderFunction {
    pub fn new(r: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        check_alphabet(r)?;
        let expected = table_len(r, depth);
        if values.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "depth-{depth} table over {r} symbols needs {expected} entries, got {}",
                values.len()
            )));
        }
        Ok(Self { r, depth, values })
    }

    pub fn constant(r: usize, depth: usize, c: f64) -> Result<Self> {
        check_alphabet(r)?;
        Ok(Self {
            r,
            depth,
            values: vec![c; table_len(r, depth)],
        })
    }

    /// Builds the table by evaluating `f` at every word of length `depth`.
    pub fn from_words<F>(r: usize, depth: usize, f: F) -> Result<Self>
    where
        F: Fn(&Word) -> f64 + Sync + Send,
    {
        check_alphabet(r)?;
        let values = fill_table(table_len(r, depth), |i| f(&Word::from_index(i, depth, r)));
        Ok(Self { r, depth, values })
    }

    /// Builds the table from a function of the word index.
    pub fn from_indices<F>(r: usize, depth: usize, f: F) -> Result<Self>
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        check_alphabet(r)?;
        Ok(Self {
            r,
            depth,
            values: fill_table(table_len(r, depth), f),
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.r
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Value at the cylinder containing the point `w` (padded by the default tail rule).
    pub fn eval(&self, w: &Word) -> Result<f64> {
        if w.r != self.r {
            return Err(Error::AlphabetMismatch {
                expected: self.r,
                found: w.r,
            });
        }
        Ok(self.values[w.at_depth(self.depth, TailRule::default()).index()])
    }

    /// Value at a depth-`depth` word index, re-indexed to this table's depth.
    #[inline]
    pub fn value_at(&self, depth: usize, idx: usize) -> f64 {
        self.values[reindex(self.r, depth, self.depth, idx)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            r: self.r,
            depth: self.depth,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Each depth-`k'` entry copies its depth-`k` ancestor.
    pub fn refine(&self, new_depth: usize) -> Result<Self> {
        if new_depth < self.depth {
            return Err(Error::InvalidParameter(format!(
                "cannot refine depth {} down to {new_depth}",
                self.depth
            )));
        }
        let stride = table_len(self.r, new_depth - self.depth);
        Ok(Self {
            r: self.r,
            depth: new_depth,
            values: (0..table_len(self.r, new_depth))
                .map(|i| self.values[i / stride])
                .collect(),
        })
    }

    /// `D_n` for `n = 1..=k`: the largest `|f(u) - f(v)|` over word pairs whose
    /// first mismatch is at position `n`.
    pub fn mismatch_profile(&self) -> Vec<f64> {
        let r = self.r;
        let mut profile = vec![0.0; self.depth];
        let mut hi = self.values.clone();
        let mut lo = self.values.clone();
        for n in (1..=self.depth).rev() {
            let parents = hi.len() / r;
            let mut next_hi = Vec::with_capacity(parents);
            let mut next_lo = Vec::with_capacity(parents);
            let mut spread = 0.0f64;
            for p in 0..parents {
                let kids = p * r..(p + 1) * r;
                for a in kids.clone() {
                    for b in kids.clone() {
                        if a != b {
                            spread = spread.max(hi[a] - lo[b]);
                        }
                    }
                }
                next_hi.push(hi[kids.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max));
                next_lo.push(lo[kids].iter().copied().fold(f64::INFINITY, f64::min));
            }
            profile[n - 1] = spread;
            hi = next_hi;
            lo = next_lo;
        }
        profile
    }

    /// `max |f(u)-f(v)| / d(u,v)` over distinct depth-k words. A lower bound for the
    /// Lipschitz constant of any continuous extension.
    pub fn discrete_lipschitz(&self) -> f64 {
        self.mismatch_profile()
            .iter()
            .enumerate()
            .map(|(i, &d)| d * 2f64.powi(i as i32 + 1))
            .fold(0.0, f64::max)
    }

    /// Largest oscillation `max - min` of `f` inside a single depth-`d` cylinder.
    pub fn oscillation(&self, d: usize) -> f64 {
        self.mismatch_profile()
            .iter()
            .skip(d)
            .copied()
            .fold(0.0, f64::max)
    }
}

/// A finite measure on depth-`k` cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderMeasure {
    r: usize,
    depth: usize,
    weights: Vec<f64>,
    probability: bool,
}

impl CylinderMeasure {
    /// Tolerance on total mass for probability measures.
    pub const MASS_TOL: f64 = 1e-12;

    pub fn new(r: usize, depth: usize, weights: Vec<f64>) -> Result<Self> {
        check_alphabet(r)?;
        let expected = table_len(r, depth);
        if weights.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "measure table needs {expected} entries, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "measure weights must be finite and nonnegative, found {w}"
            )));
        }
        Ok(Self {
            r,
            depth,
            weights,
            probability: false,
        })
    }

    /// Normalizes nonnegative weights to total mass 1.
    pub fn probability(r: usize, depth: usize, weights: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(r, depth, weights)?;
        let total = compensated_sum(m.weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "probability measure needs positive total mass".into(),
            ));
        }
        m.weights.iter_mut().for_each(|w| *w /= total);
        m.probability = true;
        debug_assert!((m.total_mass() - 1.0).abs() <= Self::MASS_TOL);
        Ok(m)
    }

    pub fn uniform(r: usize, depth: usize) -> Result<Self> {
        check_alphabet(r)?;
        let n = table_len(r, depth);
        Self::probability(r, depth, vec![1.0; n])
    }

    pub fn alphabet_size(&self) -> usize {
        self.r
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// `∫ f dν`; `f` may live at a coarser depth and is refined first.
    pub fn integrate(&self, f: &CylinderFunction) -> Result<f64> {
        if f.r != self.r {
            return Err(Error::AlphabetMismatch {
                expected: self.r,
                found: f.r,
            });
        }
        if f.depth > self.depth {
            return Err(Error::DepthMismatch {
                expected: self.depth,
                found: f.depth,
            });
        }
        Ok(compensated_sum(
            self.weights
                .iter()
                .enumerate()
                .map(|(i, &w)| w * f.value_at(self.depth, i)),
        ))
    }
}
