//! Multidimensional continued fraction algorithms.
//!
//! An algorithm is a piecewise linear map `F(x) = M(x)⁻¹·x` on a cone `Λ`,
//! where `M` is constant on each branch cone `Λᵢ`. Branch matrices are stored
//! exactly (rationals) and converted on demand to the working backend.
//!
//! Bundled algorithms:
//!
//! | name | branches |
//! |------|----------|
//! | `farey` | unsorted additive Euclid in dimension 2 |
//! | `farey-sorted` | the sorted Farey map on `0 < x < y` |
//! | `reverse` | Arnoux-Rauzy branches completed by the reversal of the central triangle |
//! | `cassaigne` | two branches, `x₁ > x₃` and `x₃ > x₁` |
//! | `brun`, `brun d=<n>` | unsorted Brun: subtract the second largest coordinate from the largest |
//! | `brun-sorted d=<n>` | the sorted Brun algorithm, one branch per insertion position |
//! | `selmer` | subtract the smallest coordinate from the largest |
//! | `poincare` | for `x_a < x_b < x_c`: `x_b -= x_a`, `x_c -= x_b` |
//! | `arp` | Arnoux-Rauzy when one coordinate dominates, Poincaré otherwise |
//!
//! Selmer, Poincaré and ARP use their standard textbook definitions.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_rational::BigRational;
use num_traits::Zero;

use crate::cone::{Cone, Membership};
use crate::error::{McfError, Result};
use crate::linalg::{check_finite, normalize_l1, ConeVector, SquareMatrix};
use crate::perm;
use crate::scalar::{sum, Scalar};

type Q = BigRational;

/// Index of a branch within its algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchId(pub usize);

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgorithmKind {
    Farey,
    FareySorted,
    Reverse,
    Cassaigne,
    /// Unsorted Brun in dimension `dim` (`brun` is `dim = 3`).
    Brun {
        dim: usize,
    },
    BrunSorted {
        dim: usize,
    },
    Selmer,
    Poincare,
    Arp,
}

/// A branch: its cone `Λᵢ` and matrix `Mᵢ` in the backend `T`.
#[derive(Clone, Debug)]
pub struct Branch<T> {
    pub id: BranchId,
    pub label: String,
    pub matrix: SquareMatrix<T>,
    pub cone: Cone,
}

impl<T: Scalar> Branch<T> {
    pub fn contains(&self, x: &[T]) -> bool {
        self.cone.contains(x)
    }
}

#[derive(Debug)]
struct BranchData {
    label: String,
    matrix: SquareMatrix<Q>,
    cone: Cone,
    image: OnceLock<Cone>,
}

/// Preimage of a simplex point under one projective branch.
#[derive(Clone, Debug)]
pub struct InverseBranch<T> {
    pub id: BranchId,
    pub preimage: ConeVector<T>,
    /// Jacobian of the inverse branch `x ↦ Mx/‖Mx‖₁` on the simplex,
    /// `|det M| / ‖Mx‖₁^d`.
    pub jacobian: T,
}

pub const REGISTERED: &[&str] = &[
    "farey",
    "farey-sorted",
    "reverse",
    "cassaigne",
    "brun",
    "brun d=<n>",
    "brun-sorted d=<n>",
    "selmer",
    "poincare",
    "arp",
];

/// Largest dimension accepted for the Brun families.
pub const MAX_BRUN_DIM: usize = 8;

#[derive(Clone, Debug)]
pub struct AlgorithmSpec {
    kind: AlgorithmKind,
    name: String,
    dim: usize,
    domain: Cone,
    branch_count: usize,
    cache: Arc<Vec<OnceLock<Arc<BranchData>>>>,
}

impl PartialEq for AlgorithmSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl AlgorithmSpec {
    pub fn new(kind: AlgorithmKind) -> Result<Self> {
        let (name, dim, branch_count) = match &kind {
            AlgorithmKind::Farey => ("farey".to_string(), 2, 2),
            AlgorithmKind::FareySorted => ("farey-sorted".to_string(), 2, 2),
            AlgorithmKind::Reverse => ("reverse".to_string(), 3, 4),
            AlgorithmKind::Cassaigne => ("cassaigne".to_string(), 3, 2),
            AlgorithmKind::Brun { dim } => {
                check_brun_dim(*dim)?;
                let name = if *dim == 3 {
                    "brun".to_string()
                } else {
                    format!("brun d={dim}")
                };
                (name, *dim, perm::factorial(*dim))
            }
            AlgorithmKind::BrunSorted { dim } => {
                check_brun_dim(*dim)?;
                (format!("brun-sorted d={dim}"), *dim, *dim)
            }
            AlgorithmKind::Selmer => ("selmer".to_string(), 3, 6),
            AlgorithmKind::Poincare => ("poincare".to_string(), 3, 6),
            AlgorithmKind::Arp => ("arp".to_string(), 3, 9),
        };
        let domain = match &kind {
            AlgorithmKind::FareySorted | AlgorithmKind::BrunSorted { .. } => sorted_cone(dim),
            _ => Cone::positive(dim),
        };
        Ok(AlgorithmSpec {
            kind,
            name,
            dim,
            domain,
            branch_count,
            cache: Arc::new((0..branch_count).map(|_| OnceLock::new()).collect()),
        })
    }

    /// Looks an algorithm up by its registry name.
    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim();
        let kind = match name {
            "farey" => AlgorithmKind::Farey,
            "farey-sorted" => AlgorithmKind::FareySorted,
            "reverse" => AlgorithmKind::Reverse,
            "cassaigne" => AlgorithmKind::Cassaigne,
            "brun" => AlgorithmKind::Brun { dim: 3 },
            "brun-sorted" => AlgorithmKind::BrunSorted { dim: 3 },
            "selmer" => AlgorithmKind::Selmer,
            "poincare" => AlgorithmKind::Poincare,
            "arp" => AlgorithmKind::Arp,
            other => {
                let (family, rest) = other
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| McfError::UnknownAlgorithm(other.to_string()))?;
                let dim = rest
                    .trim()
                    .strip_prefix("d=")
                    .and_then(|d| d.trim().parse::<usize>().ok())
                    .ok_or_else(|| McfError::UnknownAlgorithm(other.to_string()))?;
                match family {
                    "brun" => AlgorithmKind::Brun { dim },
                    "brun-sorted" => AlgorithmKind::BrunSorted { dim },
                    _ => return Err(McfError::UnknownAlgorithm(other.to_string())),
                }
            }
        };
        Self::new(kind)
    }

    pub fn kind(&self) -> &AlgorithmKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The cone `Λ` the algorithm acts on.
    pub fn domain(&self) -> &Cone {
        &self.domain
    }

    pub fn branch_count(&self) -> usize {
        self.branch_count
    }

    pub fn branch_ids(&self) -> impl Iterator<Item = BranchId> {
        (0..self.branch_count).map(BranchId)
    }

    fn data(&self, id: BranchId) -> &BranchData {
        self.cache[id.0].get_or_init(|| Arc::new(build_branch(&self.kind, self.dim, id.0)))
    }

    pub fn label(&self, id: BranchId) -> &str {
        &self.data(id).label
    }

    /// `"<algorithm>/<label>"`, e.g. `"reverse/4"` or `"brun/132"`.
    pub fn qualified_label(&self, id: BranchId) -> String {
        format!("{}/{}", self.name, self.label(id))
    }

    pub fn branch_by_label(&self, label: &str) -> Option<BranchId> {
        let label = label.rsplit('/').next().unwrap_or(label);
        if let AlgorithmKind::Brun { dim } = self.kind {
            return perm::parse_label(label, dim).map(|p| BranchId(perm::rank(&p)));
        }
        self.branch_ids().find(|&id| self.label(id) == label)
    }

    /// Exact branch matrix `Mᵢ`.
    pub fn matrix_exact(&self, id: BranchId) -> &SquareMatrix<Q> {
        &self.data(id).matrix
    }

    pub fn matrix<T: Scalar>(&self, id: BranchId) -> SquareMatrix<T> {
        self.matrix_exact(id).map(|q| T::from_rational(q))
    }

    /// Branch cone `Λᵢ`.
    pub fn cone(&self, id: BranchId) -> &Cone {
        &self.data(id).cone
    }

    /// Image cone `F(Λᵢ) = Mᵢ⁻¹Λᵢ`.
    pub fn image_cone(&self, id: BranchId) -> &Cone {
        let data = self.data(id);
        data.image
            .get_or_init(|| data.cone.image_under_inverse(&data.matrix))
    }

    pub fn branch<T: Scalar>(&self, id: BranchId) -> Branch<T> {
        Branch {
            id,
            label: self.label(id).to_string(),
            matrix: self.matrix(id),
            cone: self.cone(id).clone(),
        }
    }

    pub fn branches<T: Scalar>(&self) -> Vec<Branch<T>> {
        self.branch_ids().map(|id| self.branch(id)).collect()
    }

    /// Branch class used for draw-order priorities: `true` for the
    /// Arnoux-Rauzy branches of `arp`.
    pub fn is_arnoux_rauzy_branch(&self, id: BranchId) -> bool {
        self.kind == AlgorithmKind::Arp && id.0 < 3
    }

    /// The branch whose open cone contains `x`. Points on a partition
    /// boundary are reported, never resolved silently.
    pub fn classify<T: Scalar>(&self, x: &[T]) -> Result<BranchId> {
        if x.len() != self.dim {
            return Err(McfError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some(c) = x.iter().find(|c| !c.is_finite() || **c <= T::zero()) {
            return Err(McfError::Domain(format!(
                "{}: coordinate {c} is not positive",
                self.name
            )));
        }
        match self.domain.membership(x) {
            Membership::Inside => {}
            Membership::Boundary => {
                return Err(McfError::Boundary(format!(
                    "{}: point on the boundary of the domain",
                    self.name
                )))
            }
            Membership::Outside => {
                return Err(McfError::Domain(format!(
                    "{}: point outside the domain",
                    self.name
                )))
            }
        }
        if let AlgorithmKind::Brun { .. } = self.kind {
            return perm::argsort(x)
                .map(|p| BranchId(perm::rank(&p)))
                .ok_or_else(|| McfError::Boundary(format!("{}: tied coordinates", self.name)));
        }
        self.branch_ids()
            .find(|&id| self.cone(id).contains(x))
            .ok_or_else(|| {
                McfError::Boundary(format!("{}: point on a partition boundary", self.name))
            })
    }

    /// `F(x) = M(x)⁻¹·x`.
    pub fn step_linear<T: Scalar>(&self, x: &ConeVector<T>) -> Result<(BranchId, ConeVector<T>)> {
        let id = self.classify(x.coords())?;
        let y = self.matrix::<T>(id).inverse_mul_vec(x.coords())?;
        check_finite(&y, "step_linear")?;
        Ok((id, ConeVector::new(y)?))
    }

    /// `f(x) = F(x)/‖F(x)‖₁`.
    pub fn step_projective<T: Scalar>(
        &self,
        x: &ConeVector<T>,
    ) -> Result<(BranchId, ConeVector<T>)> {
        let (id, y) = self.step_linear(x)?;
        Ok((id, normalize_l1(&y)?))
    }

    /// All projective preimages of `x` (normalized to the simplex first),
    /// with the jacobians of the inverse branches. A branch contributes when
    /// `Mᵢx` lies in `Λᵢ` and `x` lies in the image cone of the branch.
    pub fn inverse_branches<T: Scalar>(&self, x: &ConeVector<T>) -> Result<Vec<InverseBranch<T>>> {
        if x.dim() != self.dim {
            return Err(McfError::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        let x = normalize_l1(x)?;
        let mut out = Vec::new();
        for id in self.branch_ids() {
            if !self.image_cone(id).contains(x.coords()) {
                continue;
            }
            let m = self.matrix::<T>(id);
            let y = m.mul_vec(x.coords());
            if !self.cone(id).contains(&y) {
                continue;
            }
            let norm = sum(&y);
            let mut denom = T::one();
            for _ in 0..self.dim {
                denom = denom * &norm;
            }
            let jacobian = m.det().abs() / denom;
            let preimage = ConeVector::new(y.into_iter().map(|v| v / &norm).collect())?;
            out.push(InverseBranch {
                id,
                preimage,
                jacobian,
            });
        }
        Ok(out)
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn check_brun_dim(dim: usize) -> Result<()> {
    if (2..=MAX_BRUN_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(McfError::Unsupported(format!(
            "Brun dimension must be in 2..={MAX_BRUN_DIM}, got {dim}"
        )))
    }
}

/// `{0 < x₁ < x₂ < … < x_d}`.
pub fn sorted_cone(dim: usize) -> Cone {
    let mut forms = vec![unit(dim, 0, 1)];
    for i in 1..dim {
        let mut f = vec![0; dim];
        f[i] = 1;
        f[i - 1] = -1;
        forms.push(f);
    }
    Cone::new(dim, forms)
}

/// `{x[p[0]] < x[p[1]] < … < x[p[d-1]]}` inside the positive cone.
pub fn chain_cone(dim: usize, p: &[usize]) -> Cone {
    let mut forms = vec![unit(dim, p[0], 1)];
    for w in p.windows(2) {
        let mut f = vec![0; dim];
        f[w[1]] = 1;
        f[w[0]] = -1;
        forms.push(f);
    }
    Cone::new(dim, forms).with_positivity()
}

fn unit(dim: usize, i: usize, v: i64) -> Vec<i64> {
    let mut f = vec![0; dim];
    f[i] = v;
    f
}

fn identity_plus(dim: usize, entries: &[(usize, usize)]) -> SquareMatrix<Q> {
    let mut m = vec![Q::zero(); dim * dim];
    for i in 0..dim {
        m[i * dim + i] = Q::from_i64(1);
    }
    for &(r, c) in entries {
        m[r * dim + c] = m[r * dim + c].clone() + Q::from_i64(1);
    }
    SquareMatrix::new(dim, m).expect("square")
}

fn rows(rows: &[&[i64]]) -> SquareMatrix<Q> {
    SquareMatrix::from_rows(rows).expect("square")
}

/// Poincaré branch for the ordering `p`: `x[p[i]] = Σ_{j ≤ i} y[p[j]]`.
fn poincare_matrix(p: &[usize]) -> SquareMatrix<Q> {
    let d = p.len();
    let mut m = vec![Q::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            m[p[i] * d + p[j]] = Q::from_i64(1);
        }
    }
    SquareMatrix::new(d, m).expect("square")
}

/// Arnoux-Rauzy branch `i`: `x[i] -= Σ_{j≠i} x[j]`.
fn arnoux_rauzy_matrix(dim: usize, i: usize) -> SquareMatrix<Q> {
    let entries: Vec<(usize, usize)> = (0..dim).filter(|&j| j != i).map(|j| (i, j)).collect();
    identity_plus(dim, &entries)
}

fn arnoux_rauzy_cone(dim: usize, i: usize) -> Cone {
    let f = (0..dim).map(|j| if j == i { 1 } else { -1 }).collect();
    Cone::new(dim, vec![f]).with_positivity()
}

fn build_branch(kind: &AlgorithmKind, dim: usize, index: usize) -> BranchData {
    let (label, matrix, cone) = match kind {
        AlgorithmKind::Farey => match index {
            0 => (
                "1".into(),
                rows(&[&[1, 0], &[1, 1]]),
                chain_cone(2, &[0, 1]),
            ),
            _ => (
                "2".into(),
                rows(&[&[1, 1], &[0, 1]]),
                chain_cone(2, &[1, 0]),
            ),
        },
        AlgorithmKind::FareySorted => match index {
            // (x, y) ↦ (x, y - x) when 2x < y.
            0 => (
                "1".into(),
                rows(&[&[1, 0], &[1, 1]]),
                Cone::new(2, vec![vec![-2, 1]]).intersect(&sorted_cone(2)),
            ),
            // (x, y) ↦ (y - x, x) when 2x > y.
            _ => (
                "2".into(),
                rows(&[&[0, 1], &[1, 1]]),
                Cone::new(2, vec![vec![2, -1]]).intersect(&sorted_cone(2)),
            ),
        },
        AlgorithmKind::Reverse => {
            if index < 3 {
                (
                    (index + 1).to_string(),
                    arnoux_rauzy_matrix(3, index),
                    arnoux_rauzy_cone(3, index),
                )
            } else {
                let h = Q::from_ratio(1, 2);
                let z = Q::zero();
                let m = SquareMatrix::new(
                    3,
                    vec![
                        z.clone(),
                        h.clone(),
                        h.clone(),
                        h.clone(),
                        z.clone(),
                        h.clone(),
                        h.clone(),
                        h,
                        z,
                    ],
                )
                .expect("square");
                let cone = Cone::new(3, vec![vec![-1, 1, 1], vec![1, -1, 1], vec![1, 1, -1]])
                    .with_positivity();
                ("4".into(), m, cone)
            }
        }
        AlgorithmKind::Cassaigne => match index {
            0 => (
                "a".into(),
                rows(&[&[1, 1, 0], &[0, 0, 1], &[0, 1, 0]]),
                Cone::new(3, vec![vec![1, 0, -1]]).with_positivity(),
            ),
            _ => (
                "b".into(),
                rows(&[&[0, 1, 0], &[1, 0, 0], &[0, 1, 1]]),
                Cone::new(3, vec![vec![-1, 0, 1]]).with_positivity(),
            ),
        },
        AlgorithmKind::Brun { dim } => {
            let p = perm::unrank(*dim, index);
            // x[p(d)] -= x[p(d-1)]
            let m = identity_plus(*dim, &[(p[dim - 1], p[dim - 2])]);
            (perm::label(&p), m, chain_cone(*dim, &p))
        }
        AlgorithmKind::BrunSorted { dim } => brun_sorted_branch(*dim, index),
        AlgorithmKind::Selmer => {
            let p = perm::unrank(3, index);
            let m = identity_plus(3, &[(p[2], p[0])]);
            (perm::label(&p), m, chain_cone(3, &p))
        }
        AlgorithmKind::Poincare => {
            let p = perm::unrank(3, index);
            (perm::label(&p), poincare_matrix(&p), chain_cone(3, &p))
        }
        AlgorithmKind::Arp => {
            if index < 3 {
                (
                    format!("AR{}", index + 1),
                    arnoux_rauzy_matrix(3, index),
                    arnoux_rauzy_cone(3, index),
                )
            } else {
                let p = perm::unrank(3, index - 3);
                let mut f = vec![0; 3];
                f[p[0]] = 1;
                f[p[1]] = 1;
                f[p[2]] = -1;
                let cone = chain_cone(3, &p).intersect(&Cone::new(3, vec![f]));
                (format!("P{}", perm::label(&p)), poincare_matrix(&p), cone)
            }
        }
    };
    let _ = dim;
    BranchData {
        label,
        matrix,
        cone,
        image: OnceLock::new(),
    }
}

/// Sorted Brun: `u = x_d - x_{d-1}` is inserted at 0-based position `k` of
/// the sorted vector `(x₁, …, x_{d-1})`.
fn brun_sorted_branch(dim: usize, k: usize) -> (String, SquareMatrix<Q>, Cone) {
    let d = dim;
    let mut u = vec![0i64; d];
    u[d - 1] = 1;
    u[d - 2] = -1;
    // y = G·x
    let mut g: Vec<Vec<i64>> = Vec::with_capacity(d);
    for i in 0..k {
        g.push(unit(d, i, 1));
    }
    g.push(u.clone());
    for i in k..d - 1 {
        g.push(unit(d, i, 1));
    }
    let g_rows: Vec<&[i64]> = g.iter().map(|r| r.as_slice()).collect();
    let m = rows(&g_rows)
        .inverse()
        .expect("permutation of an elementary matrix");
    let mut forms = Vec::new();
    if k > 0 {
        // u > x_{k-1}
        let mut f = u.clone();
        f[k - 1] -= 1;
        forms.push(f);
    }
    if k < d - 1 {
        // u < x_k
        let mut f: Vec<i64> = u.iter().map(|c| -c).collect();
        f[k] += 1;
        forms.push(f);
    }
    forms.push(u);
    let cone = Cone::new(d, forms).intersect(&sorted_cone(d));
    ((k + 1).to_string(), m, cone)
}

/// `f64` fast path for long orbits: branch matrices are converted once and
/// stepping works in place without allocation.
#[derive(Clone, Debug)]
pub struct FloatKernel {
    spec: AlgorithmSpec,
    dim: usize,
    inverse: Vec<Vec<f64>>,
    transpose: Vec<Vec<f64>>,
}

impl FloatKernel {
    pub fn new(spec: &AlgorithmSpec) -> Self {
        let (inverse, transpose) = spec
            .branch_ids()
            .map(|id| {
                let m = spec.matrix_exact(id);
                let inv = m.inverse().expect("branch matrices are invertible");
                let to_f = |e: &[Q]| e.iter().map(f64::from_rational).collect::<Vec<f64>>();
                (to_f(inv.entries()), to_f(m.transpose().entries()))
            })
            .unzip();
        FloatKernel {
            spec: spec.clone(),
            dim: spec.dim(),
            inverse,
            transpose,
        }
    }

    pub fn spec(&self) -> &AlgorithmSpec {
        &self.spec
    }

    /// `x ← M⁻¹x`, and `a ← Mᵀa` when given.
    pub fn step(&self, x: &mut [f64], a: Option<&mut [f64]>) -> Result<BranchId> {
        let id = self.spec.classify(x)?;
        let d = self.dim;
        let mut buf = [0.0f64; MAX_BRUN_DIM];
        mat_vec(&self.inverse[id.0], d, x, &mut buf);
        x.copy_from_slice(&buf[..d]);
        if let Some(a) = a {
            mat_vec(&self.transpose[id.0], d, a, &mut buf);
            a.copy_from_slice(&buf[..d]);
        }
        Ok(id)
    }
}

fn mat_vec(m: &[f64], d: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, uniform_simplex};

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn qv(v: &[i64]) -> ConeVector<Q> {
        ConeVector::from_i64(v).unwrap()
    }

    fn all_specs() -> Vec<AlgorithmSpec> {
        let mut v: Vec<AlgorithmSpec> = [
            "farey",
            "farey-sorted",
            "reverse",
            "cassaigne",
            "brun",
            "selmer",
            "poincare",
            "arp",
            "brun d=2",
            "brun d=4",
            "brun-sorted d=2",
            "brun-sorted d=3",
            "brun-sorted d=5",
        ]
        .iter()
        .map(|n| AlgorithmSpec::from_name(n).unwrap())
        .collect();
        v.push(AlgorithmSpec::new(AlgorithmKind::Brun { dim: 5 }).unwrap());
        v
    }

    #[test]
    fn registry_names_round_trip() {
        for spec in all_specs() {
            assert_eq!(AlgorithmSpec::from_name(spec.name()).unwrap(), spec);
        }
        assert!(matches!(
            AlgorithmSpec::from_name("jacobi-perron"),
            Err(McfError::UnknownAlgorithm(_))
        ));
        assert!(AlgorithmSpec::from_name("brun d=9").is_err());
        assert!(AlgorithmSpec::from_name("brun d=x").is_err());
    }

    #[test]
    fn printed_brun_matrices() {
        let spec = AlgorithmSpec::from_name("brun").unwrap();
        let printed: [(&str, [[i64; 3]; 3]); 6] = [
            ("123", [[1, 0, 0], [0, 1, 0], [0, 1, 1]]),
            ("132", [[1, 0, 0], [0, 1, 1], [0, 0, 1]]),
            ("231", [[1, 0, 1], [0, 1, 0], [0, 0, 1]]),
            ("213", [[1, 0, 0], [0, 1, 0], [1, 0, 1]]),
            ("312", [[1, 0, 0], [1, 1, 0], [0, 0, 1]]),
            ("321", [[1, 1, 0], [0, 1, 0], [0, 0, 1]]),
        ];
        for (label, m) in printed {
            let id = spec.branch_by_label(label).unwrap();
            let expected =
                SquareMatrix::<Q>::from_rows(&[&m[0][..], &m[1][..], &m[2][..]]).unwrap();
            assert_eq!(spec.matrix_exact(id), &expected, "B_{label}");
        }
    }

    #[test]
    fn reverse_and_cassaigne_matrices() {
        let spec = AlgorithmSpec::from_name("reverse").unwrap();
        let a4 = spec.matrix_exact(BranchId(3));
        assert_eq!(a4.det(), &q(1, 4));
        let ones = qv(&[1, 1, 1]);
        assert_eq!(crate::linalg::apply(a4, &ones).unwrap(), ones.coords());
        assert_eq!(
            spec.matrix_exact(BranchId(0)),
            &SquareMatrix::from_rows(&[&[1, 1, 1], &[0, 1, 0], &[0, 0, 1]]).unwrap()
        );
        let spec = AlgorithmSpec::from_name("cassaigne").unwrap();
        assert_eq!(
            spec.matrix_exact(BranchId(1)),
            &SquareMatrix::from_rows(&[&[0, 1, 0], &[1, 0, 0], &[0, 1, 1]]).unwrap()
        );
    }

    #[test]
    fn brun_inverse_apply_example() {
        let spec = AlgorithmSpec::from_name("brun").unwrap();
        let b = spec.matrix_exact(spec.branch_by_label("123").unwrap());
        let v = qv(&[1, 2, 3]);
        let out = crate::linalg::apply(&b.inverse().unwrap(), &v).unwrap();
        assert_eq!(out, qv(&[1, 2, 1]).coords());
    }

    #[test]
    fn jacobian_one_and_round_trip_for_every_branch() {
        for spec in all_specs() {
            let v = ConeVector::<Q>::from_ratios(
                &(0..spec.dim())
                    .map(|i| (3 + 2 * i as i64, 7 + i as i64))
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            for id in spec.branch_ids() {
                let m = spec.matrix_exact(id);
                assert!(m.is_nonnegative(), "{} {}", spec, spec.label(id));
                let inv = m.inverse().unwrap();
                assert_eq!(
                    inv.det().clone() * m.transpose().det(),
                    q(1, 1),
                    "{} {}",
                    spec,
                    spec.label(id)
                );
                let there = m.mul_vec(v.coords());
                assert_eq!(inv.mul_vec(&there), v.coords());
            }
        }
    }

    #[test]
    fn classify_examples() {
        let reverse = AlgorithmSpec::from_name("reverse").unwrap();
        assert_eq!(
            reverse.label(reverse.classify(qv(&[6, 2, 1]).coords()).unwrap()),
            "1"
        );
        assert_eq!(
            reverse.label(reverse.classify(qv(&[2, 3, 4]).coords()).unwrap()),
            "4"
        );
        let brun = AlgorithmSpec::from_name("brun").unwrap();
        assert_eq!(
            brun.label(brun.classify(qv(&[1, 2, 3]).coords()).unwrap()),
            "123"
        );
        let cassaigne = AlgorithmSpec::from_name("cassaigne").unwrap();
        assert_eq!(
            cassaigne.label(cassaigne.classify(qv(&[5, 1, 3]).coords()).unwrap()),
            "a"
        );
        assert_eq!(cassaigne.qualified_label(BranchId(0)), "cassaigne/a");
        let arp = AlgorithmSpec::from_name("arp").unwrap();
        assert_eq!(
            arp.label(arp.classify(qv(&[2, 3, 4]).coords()).unwrap()),
            "P123"
        );
        assert_eq!(
            arp.label(arp.classify(qv(&[9, 1, 1]).coords()).unwrap()),
            "AR1"
        );
        assert_eq!(
            arp.label(arp.classify(qv(&[2, 3, 9]).coords()).unwrap()),
            "AR3"
        );
    }

    #[test]
    fn classify_reports_ties_and_domain_errors() {
        let reverse = AlgorithmSpec::from_name("reverse").unwrap();
        assert!(matches!(
            reverse.classify(qv(&[3, 1, 2]).coords()),
            Err(McfError::Boundary(_))
        ));
        let brun = AlgorithmSpec::from_name("brun").unwrap();
        assert!(matches!(
            brun.classify(qv(&[1, 2, 2]).coords()),
            Err(McfError::Boundary(_))
        ));
        assert!(matches!(
            brun.classify(&[1.0, 0.0, 2.0]),
            Err(McfError::Domain(_))
        ));
        assert!(matches!(
            brun.classify(&[1.0, 2.0]),
            Err(McfError::DimensionMismatch { .. })
        ));
        let farey = AlgorithmSpec::from_name("farey").unwrap();
        assert!(matches!(
            farey.classify(qv(&[4, 4]).coords()),
            Err(McfError::Boundary(_))
        ));
        let sorted = AlgorithmSpec::from_name("farey-sorted").unwrap();
        assert!(matches!(
            sorted.classify(qv(&[5, 3]).coords()),
            Err(McfError::Domain(_))
        ));
        // An Arnoux-Rauzy point with a tie among the dominated coordinates
        // is interior.
        let arp = AlgorithmSpec::from_name("arp").unwrap();
        assert_eq!(
            arp.label(arp.classify(qv(&[9, 1, 1]).coords()).unwrap()),
            "AR1"
        );
    }

    #[test]
    fn step_linear_examples() {
        let farey = AlgorithmSpec::from_name("farey").unwrap();
        assert_eq!(farey.step_linear(&qv(&[2, 5])).unwrap().1, qv(&[2, 3]));
        assert_eq!(farey.step_linear(&qv(&[5, 3])).unwrap().1, qv(&[2, 3]));
        let reverse = AlgorithmSpec::from_name("reverse").unwrap();
        assert_eq!(
            reverse.step_linear(&qv(&[2, 3, 4])).unwrap().1,
            qv(&[5, 3, 1])
        );
        let brun = AlgorithmSpec::from_name("brun").unwrap();
        assert_eq!(brun.step_linear(&qv(&[1, 2, 3])).unwrap().1, qv(&[1, 2, 1]));
    }

    #[test]
    fn reversal_branch_preserves_the_norm() {
        let reverse = AlgorithmSpec::from_name("reverse").unwrap();
        let x = qv(&[2, 3, 4]);
        let (id, y) = reverse.step_linear(&x).unwrap();
        assert_eq!(reverse.label(id), "4");
        assert_eq!(y.norm_l1(), x.norm_l1());
        let (id, z) = reverse.step_linear(&y).unwrap();
        assert_eq!(reverse.label(id), "1");
        assert!(z.norm_l1() < y.norm_l1());
    }

    #[test]
    fn step_projective_examples() {
        let farey = AlgorithmSpec::from_name("farey").unwrap();
        let x = ConeVector::<Q>::from_ratios(&[(1, 3), (2, 3)]).unwrap();
        assert_eq!(
            farey.step_projective(&x).unwrap().1.coords(),
            &[q(1, 2), q(1, 2)]
        );
        let x = ConeVector::<Q>::from_ratios(&[(3, 4), (1, 4)]).unwrap();
        assert_eq!(
            farey.step_projective(&x).unwrap().1.coords(),
            &[q(2, 3), q(1, 3)]
        );
        let cassaigne = AlgorithmSpec::from_name("cassaigne").unwrap();
        let x = ConeVector::<Q>::from_ratios(&[(5, 9), (1, 9), (3, 9)]).unwrap();
        assert_eq!(
            cassaigne.step_projective(&x).unwrap().1.coords(),
            &[q(2, 6), q(3, 6), q(1, 6)]
        );
    }

    #[test]
    fn sorted_farey_matches_its_projective_formula() {
        let spec = AlgorithmSpec::from_name("farey-sorted").unwrap();
        // Section y = 1: x ↦ x/(1-x) below 1/2, 1/x - 1 above.
        for (x, expected) in [((1, 3), q(1, 2)), ((3, 4), q(1, 3)), ((2, 3), q(1, 2))] {
            let v = ConeVector::<Q>::new(vec![q(x.0, x.1), q(1, 1)]).unwrap();
            let (_, y) = spec.step_linear(&v).unwrap();
            let ratio = y.coords()[0].clone() / &y.coords()[1];
            assert_eq!(ratio, expected);
        }
    }

    #[test]
    fn sorted_brun_in_dimension_two_is_sorted_farey() {
        let a = AlgorithmSpec::from_name("brun-sorted d=2").unwrap();
        let b = AlgorithmSpec::from_name("farey-sorted").unwrap();
        let mut rng = seeded_rng(11, 0);
        for _ in 0..1000 {
            let mut p = uniform_simplex(&mut rng, 2);
            p.sort_by(|u, v| u.partial_cmp(v).unwrap());
            let v = ConeVector::new(p).unwrap();
            assert_eq!(a.step_linear(&v).unwrap().1, b.step_linear(&v).unwrap().1);
        }
    }

    #[test]
    fn sorted_brun_stays_sorted() {
        let spec = AlgorithmSpec::from_name("brun-sorted d=4").unwrap();
        let mut rng = seeded_rng(12, 0);
        for _ in 0..1000 {
            let mut p = uniform_simplex(&mut rng, 4);
            p.sort_by(|u, v| u.partial_cmp(v).unwrap());
            let v = ConeVector::new(p.clone()).unwrap();
            let (_, y) = spec.step_linear(&v).unwrap();
            assert!(y.coords().windows(2).all(|w| w[0] < w[1]));
            let mut expected = p.clone();
            let u = p[3] - p[2];
            expected[3] = u;
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in y.coords().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn partition_is_exclusive_and_norm_decreases() {
        for spec in all_specs() {
            let mut rng = seeded_rng(5, spec.dim() as u64);
            let n = if spec.branch_count() > 24 {
                2_000
            } else {
                100_000
            };
            let mut done = 0;
            while done < n {
                let mut p = uniform_simplex(&mut rng, spec.dim());
                if spec.domain() != &Cone::positive(spec.dim()) {
                    p.sort_by(|u, v| u.partial_cmp(v).unwrap());
                }
                let id = spec.classify(&p).unwrap();
                let holding = spec
                    .branch_ids()
                    .filter(|&b| spec.cone(b).contains(&p))
                    .count();
                assert_eq!(holding, 1, "{spec}");
                assert!(spec.cone(id).contains(&p));
                let v = ConeVector::new(p).unwrap();
                let (id, y) = spec.step_linear(&v).unwrap();
                if spec.qualified_label(id) == "reverse/4" {
                    assert!((y.norm_l1() - v.norm_l1()).abs() < 1e-15);
                } else {
                    assert!(y.norm_l1() < v.norm_l1(), "{spec}");
                }
                done += 1;
            }
        }
    }

    #[test]
    fn full_branches_map_extreme_rays_onto_the_cone() {
        for name in ["reverse", "cassaigne", "farey"] {
            let spec = AlgorithmSpec::from_name(name).unwrap();
            let whole = Cone::positive(spec.dim()).extreme_rays();
            for id in spec.branch_ids() {
                assert_eq!(spec.image_cone(id).extreme_rays(), whole, "{name}");
                let m = spec.matrix_exact(id);
                let mut images: Vec<_> = spec
                    .cone(id)
                    .extreme_rays()
                    .iter()
                    .map(|r| {
                        let v: Vec<Q> = r.iter().map(|n| Q::from_integer(n.clone())).collect();
                        crate::cone::primitive(&m.inverse_mul_vec(&v).unwrap())
                    })
                    .collect();
                images.sort();
                assert_eq!(images, whole, "{name}");
            }
        }
    }

    #[test]
    fn brun_images_are_theta_cones() {
        let spec = AlgorithmSpec::from_name("brun").unwrap();
        for id in spec.branch_ids() {
            let p = perm::unrank(3, id.0);
            let mut f = vec![0; 3];
            f[p[1]] = 1;
            f[p[0]] = -1;
            let theta = Cone::new(3, vec![f]).with_positivity();
            assert_eq!(spec.image_cone(id).extreme_rays(), theta.extreme_rays());
        }
    }

    #[test]
    fn inverse_branch_counts() {
        let farey = AlgorithmSpec::from_name("farey").unwrap();
        let x = ConeVector::<Q>::from_ratios(&[(1, 3), (2, 3)]).unwrap();
        let pre = farey.inverse_branches(&x).unwrap();
        let firsts: Vec<Q> = pre.iter().map(|b| b.preimage.coords()[0].clone()).collect();
        assert_eq!(firsts, vec![q(1, 4), q(3, 5)]);

        let reverse = AlgorithmSpec::from_name("reverse").unwrap();
        let brun = AlgorithmSpec::from_name("brun").unwrap();
        let mut rng = seeded_rng(9, 0);
        for _ in 0..1000 {
            let p = uniform_simplex(&mut rng, 3);
            let v = ConeVector::new(p.clone()).unwrap();
            assert_eq!(reverse.inverse_branches(&v).unwrap().len(), 4);
            assert_eq!(brun.inverse_branches(&v).unwrap().len(), 3);
        }
    }

    #[test]
    fn preimages_step_back_to_the_point() {
        for spec in all_specs() {
            let mut rng = seeded_rng(21, spec.dim() as u64);
            for _ in 0..200 {
                let mut p = uniform_simplex(&mut rng, spec.dim());
                if spec.domain() != &Cone::positive(spec.dim()) {
                    p.sort_by(|u, v| u.partial_cmp(v).unwrap());
                }
                let x = ConeVector::new(p).unwrap();
                let pre = spec.inverse_branches(&x).unwrap();
                assert!(!pre.is_empty(), "{spec}");
                for b in pre {
                    let (id, back) = spec.step_projective(&b.preimage).unwrap();
                    assert_eq!(id, b.id);
                    for (u, v) in back.coords().iter().zip(x.coords()) {
                        assert!((u - v).abs() < 1e-12, "{spec}");
                    }
                }
            }
        }
    }

    #[test]
    fn preimages_are_exact_in_rationals() {
        let spec = AlgorithmSpec::from_name("reverse").unwrap();
        let x = ConeVector::<Q>::from_ratios(&[(1, 5), (3, 10), (1, 2)]).unwrap();
        for b in spec.inverse_branches(&x).unwrap() {
            let (_, back) = spec.step_projective(&b.preimage).unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn float_kernel_matches_generic_step() {
        for spec in all_specs() {
            let kernel = FloatKernel::new(&spec);
            let mut rng = seeded_rng(2, 0);
            let mut p = uniform_simplex(&mut rng, spec.dim());
            if spec.domain() != &Cone::positive(spec.dim()) {
                p.sort_by(|u, v| u.partial_cmp(v).unwrap());
            }
            let mut a = vec![1.0; spec.dim()];
            let v = ConeVector::new(p.clone()).unwrap();
            let (id, y) = spec.step_linear(&v).unwrap();
            let kid = kernel.step(&mut p, Some(&mut a)).unwrap();
            assert_eq!(id, kid);
            assert_eq!(y.coords(), &p[..]);
            let at = spec
                .matrix::<f64>(id)
                .transpose_mul_vec(&vec![1.0; spec.dim()]);
            assert_eq!(at, a);
        }
    }
}
