//! Processor-grid decomposition.
//!
//! Chooses how to factor `d` processors into a `k`-dimensional grid
//! `(d_1, .., d_k)` for an iteration space with extents `(l_1, .., l_k)`.
//! Candidates are produced by distributing each prime power of `d` over
//! the `k` dimensions (stars and bars per prime, then the Cartesian
//! product), scored exactly, and the minimum is returned.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = BigRational;

pub fn rational(n: u64, d: u64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn integer(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("processor count must be at least 1")]
    ZeroProcessors,
    #[error("extents must be non-empty and strictly positive")]
    BadExtents,
    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("transpose dimension {dim} out of range for k = {k}")]
    DimOutOfRange { dim: usize, k: usize },
    #[error("no factorization of {procs} divides extents {extents:?}")]
    NoDivisibleFactorization { procs: u64, extents: Vec<u64> },
}

/// Sorted `(prime, exponent)` pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimePowers(pub Vec<(u64, u32)>);

impl PrimePowers {
    pub fn value(&self) -> u64 {
        self.0.iter().map(|&(p, a)| p.pow(a)).product()
    }

    /// Prime factors with multiplicity, ascending.
    pub fn expanded(&self) -> Vec<u64> {
        self.0.iter().flat_map(|&(p, a)| std::iter::repeat_n(p, a as usize)).collect()
    }
}

pub fn prime_factorize(mut d: u64) -> PrimePowers {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= d {
        if d % p == 0 {
            let mut a = 0;
            while d % p == 0 {
                d /= p;
                a += 1;
            }
            out.push((p, a));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if d > 1 {
        out.push((d, 1));
    }
    PrimePowers(out)
}

/// A k-tuple of positive factors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Factorization(pub Vec<u64>);

impl Factorization {
    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn product(&self) -> u64 {
        self.0.iter().product()
    }

    pub fn as_i64(&self) -> Vec<i64> {
        self.0.iter().map(|&f| f as i64).collect()
    }

    /// `w_m = l_m / d_m`.
    pub fn workload(&self, extents: &[u64]) -> Result<WorkloadVector, DecomposeError> {
        check_len(self.k(), extents.len())?;
        Ok(WorkloadVector(extents.iter().zip(&self.0).map(|(&l, &d)| rational(l, d)).collect()))
    }

    /// True when every factor divides its extent.
    pub fn divides(&self, extents: &[u64]) -> bool {
        self.0.iter().zip(extents).all(|(&d, &l)| l % d == 0)
    }
}

impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        write!(f, "({})", parts.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkloadVector(pub Vec<Rational>);

impl WorkloadVector {
    pub fn is_balanced(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }

    pub fn inverse_sum(&self) -> Rational {
        self.0.iter().map(|w| w.recip()).sum()
    }
}

impl fmt::Display for WorkloadVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(Rational::to_string).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Communication objective minimized by the search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// `sum_m d_m / l_m`.
    Isotropic,
    /// `sum_n d_n h_n prod_{m != n} l_m`.
    AnisotropicHalo { halo: Vec<u64> },
    /// Halo volume plus `sum_{n in T} (1 - 1/d_n) (prod_m w_m) d`.
    WithTranspose { halo: Vec<u64>, transposed: BTreeSet<usize> },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Isotropic => "isotropic",
            Objective::AnisotropicHalo { .. } => "anisotropic_halo",
            Objective::WithTranspose { .. } => "with_transpose",
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), DecomposeError> {
    if expected == got {
        Ok(())
    } else {
        Err(DecomposeError::ShapeMismatch { expected, got })
    }
}

fn check_extents(extents: &[u64]) -> Result<(), DecomposeError> {
    if extents.is_empty() || extents.contains(&0) {
        Err(DecomposeError::BadExtents)
    } else {
        Ok(())
    }
}

fn product_except(extents: &[u64], skip: usize) -> BigInt {
    extents
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != skip)
        .fold(BigInt::one(), |acc, (_, &l)| acc * l)
}

/// Exact score of a factorization under an objective.
pub fn score(factorization: &Factorization, extents: &[u64], objective: &Objective) -> Result<Rational, DecomposeError> {
    let k = factorization.k();
    check_len(k, extents.len())?;
    check_extents(extents)?;
    let f = &factorization.0;
    match objective {
        Objective::Isotropic => Ok(f.iter().zip(extents).map(|(&d, &l)| rational(d, l)).sum()),
        Objective::AnisotropicHalo { halo } => halo_score(f, extents, halo),
        Objective::WithTranspose { halo, transposed } => {
            let mut total = halo_score(f, extents, halo)?;
            let d_total = integer(factorization.product());
            let work: Rational = factorization.workload(extents)?.0.into_iter().product();
            for &n in transposed {
                if n >= k {
                    return Err(DecomposeError::DimOutOfRange { dim: n, k });
                }
                let keep = Rational::one() - rational(1, f[n]);
                total += keep * &work * &d_total;
            }
            Ok(total)
        }
    }
}

fn halo_score(f: &[u64], extents: &[u64], halo: &[u64]) -> Result<Rational, DecomposeError> {
    check_len(f.len(), halo.len())?;
    let total: BigInt = (0..f.len())
        .map(|n| BigInt::from(f[n]) * halo[n] * product_except(extents, n))
        .sum();
    Ok(Rational::from_integer(total))
}

/// Dimensions whose halo width exceeds the block width `l_n / d_n`. The
/// analytic objectives stay well defined there but no longer describe
/// nearest-neighbour exchange.
pub fn halo_width_violations(factorization: &Factorization, extents: &[u64], halo: &[u64]) -> Vec<usize> {
    (0..factorization.k().min(extents.len()).min(halo.len()))
        .filter(|&n| rational(halo[n], 1) > rational(extents[n], factorization.0[n]))
        .collect()
}

/// Binomial coefficient, exact.
fn binomial(n: u64, r: u64) -> u128 {
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Number of ordered k-tuples of positive integers with product `d`:
/// `prod_j C(a_j + k - 1, k - 1)`.
pub fn count_factorizations(d: u64, k: usize) -> u128 {
    assert!(d >= 1 && k >= 1, "count_factorizations needs d >= 1 and k >= 1");
    prime_factorize(d)
        .0
        .iter()
        .map(|&(_, a)| binomial(u64::from(a) + k as u64 - 1, k as u64 - 1))
        .product()
}

/// All ways to write `total` as an ordered sum of `parts` non-negative
/// integers (stars and bars).
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn go(remaining: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for x in 0..=remaining {
            prefix.push(x);
            go(remaining - x, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// Every ordered k-tuple with product `d`, in lexicographic order.
pub fn enumerate_factorizations(d: u64, k: usize) -> Vec<Factorization> {
    assert!(d >= 1 && k >= 1, "enumerate_factorizations needs d >= 1 and k >= 1");
    let mut acc: Vec<Vec<u64>> = vec![vec![1; k]];
    for (p, a) in prime_factorize(d).0 {
        let placements = compositions(a, k);
        let mut next = Vec::with_capacity(acc.len() * placements.len());
        for base in &acc {
            for exps in &placements {
                next.push(base.iter().zip(exps).map(|(&b, &e)| b * p.pow(e)).collect());
            }
        }
        acc = next;
    }
    acc.sort_unstable();
    acc.into_iter().map(Factorization).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchOptions {
    /// Only consider factorizations where every `d_m` divides `l_m`.
    pub strict_divisible: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    pub factorization: Factorization,
    pub score: Rational,
}

/// Minimum-score factorization of `d` over `extents.len()` dimensions.
/// Ties go to the lexicographically smallest tuple.
pub fn search_optimal(d: u64, extents: &[u64], objective: &Objective) -> Result<SearchResult, DecomposeError> {
    search_optimal_with(d, extents, objective, SearchOptions::default())
}

pub fn search_optimal_with(
    d: u64,
    extents: &[u64],
    objective: &Objective,
    options: SearchOptions,
) -> Result<SearchResult, DecomposeError> {
    if d == 0 {
        return Err(DecomposeError::ZeroProcessors);
    }
    check_extents(extents)?;
    let mut best: Option<SearchResult> = None;
    for candidate in enumerate_factorizations(d, extents.len()) {
        if options.strict_divisible && !candidate.divides(extents) {
            continue;
        }
        let s = score(&candidate, extents, objective)?;
        if best.as_ref().is_none_or(|b| s < b.score) {
            best = Some(SearchResult { factorization: candidate, score: s });
        }
    }
    best.ok_or_else(|| DecomposeError::NoDivisibleFactorization { procs: d, extents: extents.to_vec() })
}

/// Balanced greedy grid: each prime factor, ascending, goes to the
/// dimension with the smallest running product (lowest index on ties);
/// the result is sorted descending.
pub fn greedy_grid(d: u64, k: usize) -> Factorization {
    assert!(d >= 1 && k >= 1, "greedy_grid needs d >= 1 and k >= 1");
    let mut factors = vec![1u64; k];
    for p in prime_factorize(d).expanded() {
        let j = (0..k).min_by_key(|&j| (factors[j], j)).expect("k >= 1");
        factors[j] *= p;
    }
    factors.sort_unstable_by(|a, b| b.cmp(a));
    Factorization(factors)
}

/// AM-GM lower bound on `sum_m 1/w_m`: `k * (d / prod_m l_m)^(1/k)`.
pub fn amgm_lower_bound(d: u64, extents: &[u64]) -> f64 {
    let k = extents.len() as f64;
    let log_ratio = (d as f64).ln() - extents.iter().map(|&l| (l as f64).ln()).sum::<f64>();
    k * (log_ratio / k).exp()
}

/// The bound as an exact rational, when `d / prod l` is the k-th power of
/// a rational.
pub fn amgm_lower_bound_exact(d: u64, extents: &[u64]) -> Option<Rational> {
    let k = extents.len() as u32;
    let prod: BigInt = extents.iter().fold(BigInt::one(), |acc, &l| acc * l);
    let ratio = Rational::new(BigInt::from(d), prod);
    let num = exact_root(ratio.numer(), k)?;
    let den = exact_root(ratio.denom(), k)?;
    Some(Rational::new(num, den) * BigInt::from(k))
}

fn exact_root(x: &BigInt, k: u32) -> Option<BigInt> {
    if x.is_negative() {
        return None;
    }
    if x.is_zero() {
        return Some(BigInt::zero());
    }
    let r = x.nth_root(k);
    (r.pow(k) == *x).then_some(r)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
