//! Invariant density of the d-dimensional Brun algorithm and the recursive
//! volume of the polytopes `P_{I,ℓ}` it is built from.
//!
//! For weights `x` with `Σxᵢ = 1`, an index set `I` and a pivot `ℓ ∈ I`,
//! `P_{I,ℓ}` is the set of `(βᵢ)_{i∈I}` with
//!
//! * `βᵢ < 0` for `i ∈ I ∖ {ℓ}`,
//! * `Σ_{j∈I} βⱼxⱼ − βᵢ < 1` for `i ∈ I`,
//! * `Σ_{j∈I} βⱼxⱼ < 1`.
//!
//! The density on `Λ_π` is `Vol(P_{I,ℓ})` with `I = {1..d} ∖ {π(d)}` and
//! `ℓ = π(d−1)`.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use num_rational::BigRational;

use crate::error::{McfError, Result};
use crate::perm;
use crate::rng::seeded_rng;
use crate::scalar::{sum, Scalar};

pub const MAX_DIM: usize = 8;

/// Index set `I`, pivot `ℓ` and weights of a polytope `P_{I,ℓ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeSpec<T> {
    indices: Vec<usize>,
    pivot: usize,
    weights: Vec<T>,
}

impl<T: Scalar> PolytopeSpec<T> {
    /// Weights must be positive; they are rescaled to sum 1.
    pub fn new(indices: Vec<usize>, pivot: usize, weights: Vec<T>) -> Result<Self> {
        let d = weights.len();
        if !(2..=MAX_DIM).contains(&d) {
            return Err(McfError::Unsupported(format!(
                "weights of dimension {d}, expected 2..={MAX_DIM}"
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= T::zero()) {
            return Err(McfError::Domain("weights must be positive".into()));
        }
        let mut indices = indices;
        indices.sort_unstable();
        indices.dedup();
        if indices.iter().any(|&i| i >= d) || !indices.contains(&pivot) {
            return Err(McfError::Domain(format!(
                "pivot {pivot} must belong to the index set {indices:?} within 0..{d}"
            )));
        }
        if indices.len() == d {
            return Err(McfError::Domain(
                "the index set must leave out at least one coordinate".into(),
            ));
        }
        let total = sum(&weights);
        let weights = weights.into_iter().map(|w| w / &total).collect();
        Ok(PolytopeSpec {
            indices,
            pivot,
            weights,
        })
    }

    /// The polytope whose volume is the density at `x ∈ Λ_π`.
    pub fn for_point(x: &[T]) -> Result<Self> {
        let p = perm::argsort(x).ok_or_else(|| McfError::Domain("tied coordinates".into()))?;
        let d = x.len();
        let indices = p[..d - 1].to_vec();
        Self::new(indices, p[d - 2], x.to_vec())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Inequalities `c·β < r` over the coordinates `(βᵢ)_{i∈I}`, in the order
    /// of `indices`.
    pub fn halfspaces(&self) -> Vec<(Vec<T>, T)> {
        let xs: Vec<T> = self
            .indices
            .iter()
            .map(|&i| self.weights[i].clone())
            .collect();
        let n = xs.len();
        let mut out = Vec::with_capacity(2 * n);
        for (k, &i) in self.indices.iter().enumerate() {
            if i != self.pivot {
                let mut c = vec![T::zero(); n];
                c[k] = T::one();
                out.push((c, T::zero()));
            }
        }
        for k in 0..n {
            let mut c = xs.clone();
            c[k] = c[k].clone() - T::one();
            out.push((c, T::one()));
        }
        out.push((xs, T::one()));
        out
    }

    /// Axis-aligned box containing the polytope: with `L = 1/(1 − Σ_I x)`,
    /// every `βᵢ > −L`, `βᵢ < 0` off the pivot, and
    /// `β_ℓ < (1 + L Σ_{j≠ℓ} xⱼ)/x_ℓ`.
    pub fn bounding_box(&self) -> (Vec<T>, Vec<T>) {
        let big_l = T::one() / (T::one() - self.subset_sum(&self.indices));
        let rest: Vec<usize> = self
            .indices
            .iter()
            .copied()
            .filter(|&i| i != self.pivot)
            .collect();
        let top = (T::one() + big_l.clone() * self.subset_sum(&rest)) / &self.weights[self.pivot];
        let lo = vec![-big_l; self.indices.len()];
        let hi = self
            .indices
            .iter()
            .map(|&i| {
                if i == self.pivot {
                    top.clone()
                } else {
                    T::zero()
                }
            })
            .collect();
        (lo, hi)
    }

    fn subset_sum(&self, set: &[usize]) -> T {
        set.iter().fold(T::zero(), |acc, &i| acc + &self.weights[i])
    }
}

/// `Vol(P_{I,ℓ})` by the pyramid recursion
/// `Vol(P_{I,ℓ}) = 1/(|I|(1 − Σ_I x)) · Σ_{k∈I∖{ℓ}} Vol(P_{I∖{k},ℓ})`
/// down to the interval `P_{{ℓ},ℓ} = (−1/(1−x_ℓ), 1/x_ℓ)`.
pub fn polytope_volume_recursive<T: Scalar>(p: &PolytopeSpec<T>) -> T {
    let mask = p.indices.iter().fold(0u32, |m, &i| m | (1 << i));
    let mut memo = HashMap::new();
    volume_rec(p, mask, &mut memo)
}

fn volume_rec<T: Scalar>(p: &PolytopeSpec<T>, mask: u32, memo: &mut HashMap<u32, T>) -> T {
    if let Some(v) = memo.get(&mask) {
        return v.clone();
    }
    let members: Vec<usize> = (0..p.weights.len())
        .filter(|i| mask & (1 << i) != 0)
        .collect();
    let slack = T::one() - p.subset_sum(&members);
    assert!(slack > T::zero(), "index set must leave out some weight");
    let v = if members.len() == 1 {
        let x = &p.weights[p.pivot];
        T::one() / x.clone() + T::one() / slack
    } else {
        let mut total = T::zero();
        for &k in members.iter().filter(|&&k| k != p.pivot) {
            total = total + volume_rec(p, mask & !(1 << k), memo);
        }
        total / (T::from_i64(members.len() as i64) * slack)
    };
    memo.insert(mask, v.clone());
    v
}

/// `Σ_{A₁⊂…⊂A_{d−1}} Π_k 1/(1 − Σ_{A_k} x)` over chains from `A₁ = {ℓ}` to
/// `A_{d−1} = I`, each step adding one index.
pub fn nested_chain_sum<T: Scalar>(p: &PolytopeSpec<T>) -> T {
    let full = p.indices.iter().fold(0u32, |m, &i| m | (1 << i));
    let mut memo = HashMap::new();
    chain_rec(p, 1 << p.pivot, full, &mut memo)
}

fn chain_rec<T: Scalar>(
    p: &PolytopeSpec<T>,
    mask: u32,
    full: u32,
    memo: &mut HashMap<u32, T>,
) -> T {
    if let Some(v) = memo.get(&mask) {
        return v.clone();
    }
    let members: Vec<usize> = (0..p.weights.len())
        .filter(|i| mask & (1 << i) != 0)
        .collect();
    let here = T::one() / (T::one() - p.subset_sum(&members));
    let v = if mask == full {
        here
    } else {
        let mut total = T::zero();
        for k in p.indices.iter().filter(|&&k| mask & (1 << k) == 0) {
            total = total + chain_rec(p, mask | (1 << k), full, memo);
        }
        here * total
    };
    memo.insert(mask, v.clone());
    v
}

fn factorial<T: Scalar>(n: usize) -> T {
    (1..=n as i64).fold(T::one(), |acc, k| acc * T::from_i64(k))
}

/// Closed-form density at a strictly increasing interior point
/// `x₁ < … < x_d` (normalized to the simplex):
/// `1/((d−1)! x_{d−1}) · Σ_{chains} Π 1/(1 − Σ_{A_k} x)`.
pub fn brun_density_d<T: Scalar>(x: &[T]) -> Result<T> {
    if !x.windows(2).all(|w| w[0] < w[1]) {
        return Err(McfError::Domain(
            "Brun density expects strictly increasing coordinates".into(),
        ));
    }
    brun_density_unsorted(x)
}

/// The density on the piece `Λ_π` containing `x`.
pub fn brun_density_unsorted<T: Scalar>(x: &[T]) -> Result<T> {
    let d = x.len();
    if x.iter().any(|c| !c.is_finite() || *c <= T::zero()) {
        return Err(McfError::Domain("coordinates must be positive".into()));
    }
    let p = PolytopeSpec::for_point(x)?;
    let chains = nested_chain_sum(&p);
    Ok(chains / (factorial::<T>(d - 1) * p.weights[p.pivot].clone()))
}

/// Monte-Carlo estimate of the volume of `{β ∈ box : cᵢ·β < rᵢ for all i}`
/// by uniform sampling of the box: `(estimate, standard error)`.
pub fn halfspace_volume_mc(
    halfspaces: &[(Vec<f64>, f64)],
    lo: &[f64],
    hi: &[f64],
    n_samples: u64,
    seed: u64,
) -> (f64, f64) {
    let dim = lo.len();
    let box_volume: f64 = lo.iter().zip(hi).map(|(l, h)| (h - l).max(0.0)).product();
    if box_volume == 0.0 || n_samples == 0 {
        return (0.0, 0.0);
    }
    const CHUNK: u64 = 1 << 16;
    let chunks = n_samples.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seeded_rng(seed, c);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut beta = vec![0.0; dim];
            let mut hits = 0u64;
            for _ in 0..count {
                for (b, (l, h)) in beta.iter_mut().zip(lo.iter().zip(hi)) {
                    *b = l + (h - l) * rng.random::<f64>();
                }
                let inside = halfspaces
                    .iter()
                    .all(|(c, r)| c.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() < *r);
                hits += inside as u64;
            }
            hits
        })
        .sum();
    let p = hits as f64 / n_samples as f64;
    let estimate = box_volume * p;
    let stderr = box_volume * (p * (1.0 - p) / n_samples as f64).sqrt();
    (estimate, stderr)
}

/// Independent Monte-Carlo volume of `P_{I,ℓ}` from its inequality system.
pub fn polytope_volume_oracle<T: Scalar>(
    p: &PolytopeSpec<T>,
    n_samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if p.indices.len() > 6 {
        return Err(McfError::Unsupported(
            "the Monte-Carlo oracle is limited to |I| <= 6".into(),
        ));
    }
    let hs: Vec<(Vec<f64>, f64)> = p
        .halfspaces()
        .into_iter()
        .map(|(c, r)| (c.iter().map(Scalar::to_f64).collect(), r.to_f64()))
        .collect();
    let (lo, hi) = p.bounding_box();
    let lo: Vec<f64> = lo.iter().map(Scalar::to_f64).collect();
    let hi: Vec<f64> = hi.iter().map(Scalar::to_f64).collect();
    Ok(halfspace_volume_mc(&hs, &lo, &hi, n_samples, seed))
}

/// Strictly increasing point of the open simplex with denominators up to
/// `d·10⁶`.
pub fn random_sorted_point(rng: &mut impl Rng, d: usize) -> Vec<BigRational> {
    loop {
        let mut v: Vec<i64> = (0..d).map(|_| rng.random_range(1..=1_000_000)).collect();
        v.sort_unstable();
        if v.windows(2).all(|w| w[0] < w[1]) {
            let s: i64 = v.iter().sum();
            return v
                .into_iter()
                .map(|c| <BigRational as Scalar>::from_ratio(c, s))
                .collect();
        }
    }
}

/// Recursive volume against the closed-form density at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossCheck {
    pub point: Vec<BigRational>,
    pub volume: BigRational,
    pub density: BigRational,
    /// Monte-Carlo volume and standard error, when requested.
    pub oracle: Option<(f64, f64)>,
}

impl CrossCheck {
    pub fn exact_match(&self) -> bool {
        self.volume == self.density
    }

    /// `|oracle − volume|` in units of the oracle's standard error.
    pub fn oracle_sigmas(&self) -> Option<f64> {
        self.oracle
            .map(|(v, se)| (v - self.volume.to_f64()).abs() / se.max(f64::MIN_POSITIVE))
    }
}

/// Exact comparisons at `n` random sorted rational points of dimension `d`,
/// with a Monte-Carlo volume of `mc_samples` samples when nonzero.
pub fn brun_cross_check(d: usize, n: usize, seed: u64, mc_samples: u64) -> Result<Vec<CrossCheck>> {
    if !(3..=MAX_DIM).contains(&d) {
        return Err(McfError::Unsupported(format!(
            "Brun densities are implemented for 3 <= d <= {MAX_DIM}"
        )));
    }
    let mut rng = seeded_rng(seed, 0);
    let points: Vec<Vec<BigRational>> = (0..n).map(|_| random_sorted_point(&mut rng, d)).collect();
    points
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            let p = PolytopeSpec::for_point(&x)?;
            let oracle = if mc_samples > 0 {
                Some(polytope_volume_oracle(
                    &p,
                    mc_samples,
                    seed.wrapping_add(1 + k as u64),
                )?)
            } else {
                None
            };
            Ok(CrossCheck {
                volume: polytope_volume_recursive(&p),
                density: brun_density_d(&x)?,
                point: x,
                oracle,
            })
        })
        .collect()
}
