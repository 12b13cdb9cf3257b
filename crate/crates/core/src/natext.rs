//! The natural extension `F̃(x, a) = (M⁻¹x, Mᵀa)`, its section coordinates,
//! dual-domain membership and the bijectivity audit.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;

use crate::algorithms::{AlgorithmKind, AlgorithmSpec, BranchId, FloatKernel};
use crate::cone::{primitive, Cone, Membership};
use crate::error::{McfError, Result};
use crate::linalg::{check_finite, dot, ConeVector};
use crate::perm;
use crate::rng::{positive_unit_vector, seeded_rng};
use crate::scalar::{sum, Scalar};

type Q = BigRational;

/// A point `(x, a)` of the natural extension with `e = ⟨x, a⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct NatExtState<T> {
    x: ConeVector<T>,
    a: ConeVector<T>,
    e: T,
}

impl<T: Scalar> NatExtState<T> {
    pub fn new(x: ConeVector<T>, a: ConeVector<T>) -> Result<Self> {
        if x.dim() != a.dim() {
            return Err(McfError::DimensionMismatch {
                expected: x.dim(),
                got: a.dim(),
            });
        }
        let e = dot(x.coords(), a.coords());
        Ok(NatExtState { x, a, e })
    }

    pub fn from_i64(x: &[i64], a: &[i64]) -> Result<Self> {
        Self::new(ConeVector::from_i64(x)?, ConeVector::from_i64(a)?)
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn x(&self) -> &ConeVector<T> {
        &self.x
    }

    pub fn a(&self) -> &ConeVector<T> {
        &self.a
    }

    /// The conserved scalar product `⟨x, a⟩`.
    pub fn e(&self) -> &T {
        &self.e
    }

    /// Rescales to `‖x‖₁ = 1` and `⟨x, a⟩ = 1`.
    pub fn renormalized(&self) -> Result<Self> {
        let n = self.x.norm_l1();
        let x: Vec<T> = self.x.coords().iter().map(|c| c.clone() / &n).collect();
        let e = dot(&x, self.a.coords());
        let a: Vec<T> = self.a.coords().iter().map(|c| c.clone() / &e).collect();
        check_finite(&x, "renormalize")?;
        check_finite(&a, "renormalize")?;
        Self::new(ConeVector::new(x)?, ConeVector::new(a)?)
    }
}

impl<T: Scalar> fmt::Display for NatExtState<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}; {})", self.x, self.a)
    }
}

/// `F̃(x, a) = (M⁻¹x, Mᵀa)` for the branch containing `x`.
pub fn natext_step<T: Scalar>(
    spec: &AlgorithmSpec,
    s: &NatExtState<T>,
) -> Result<(BranchId, NatExtState<T>)> {
    if s.dim() != spec.dim() {
        return Err(McfError::DimensionMismatch {
            expected: spec.dim(),
            got: s.dim(),
        });
    }
    let (id, x) = spec.step_linear(&s.x)?;
    let a = spec.matrix::<T>(id).transpose_mul_vec(s.a.coords());
    check_finite(&a, "natext_step")?;
    Ok((id, NatExtState::new(x, ConeVector::new(a)?)?))
}

/// `F̃⁻¹` along branch `id`: `(Mx, M⁻ᵀa)`.
pub fn natext_inverse<T: Scalar>(
    spec: &AlgorithmSpec,
    id: BranchId,
    s: &NatExtState<T>,
) -> Result<NatExtState<T>> {
    if id.0 >= spec.branch_count() {
        return Err(McfError::Domain(format!("{spec} has no branch {id}")));
    }
    let m = spec.matrix::<T>(id);
    let x = m.mul_vec(s.x.coords());
    let a = m.inverse_transpose_mul_vec(s.a.coords())?;
    check_finite(&x, "natext_inverse")?;
    check_finite(&a, "natext_inverse")?;
    if let Some(c) = a.iter().find(|c| **c <= T::zero()) {
        return Err(McfError::Domain(format!(
            "state is not in the image of {}: dual coordinate {c}",
            spec.qualified_label(id)
        )));
    }
    NatExtState::new(ConeVector::new(x)?, ConeVector::new(a)?)
}

/// Renormalized stepping: one step of `F̃` followed by rescaling to
/// `‖x‖₁ = 1`, `⟨x, a⟩ = 1`.
pub fn natext_step_renormalized<T: Scalar>(
    spec: &AlgorithmSpec,
    s: &NatExtState<T>,
) -> Result<(BranchId, NatExtState<T>)> {
    let (id, next) = natext_step(spec, s)?;
    Ok((id, next.renormalized()?))
}

/// Section coordinates `(y, b, τ, e)`: `yᵢ = xᵢ`, `bᵢ = aᵢ − a_d` for
/// `i < d`, `τ = −log ‖x‖₁`, `e = ⟨x, a⟩`. The norm is stored in place of
/// `τ` so the change of coordinates stays exact for rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionPoint<T> {
    pub y: Vec<T>,
    pub b: Vec<T>,
    pub norm: T,
    pub e: T,
}

impl<T: Scalar> SectionPoint<T> {
    pub fn tau(&self) -> f64 {
        -self.norm.to_f64().ln()
    }
}

pub fn to_section<T: Scalar>(s: &NatExtState<T>) -> SectionPoint<T> {
    let d = s.dim();
    let x = s.x.coords();
    let a = s.a.coords();
    SectionPoint {
        y: x[..d - 1].to_vec(),
        b: a[..d - 1].iter().map(|ai| ai.clone() - &a[d - 1]).collect(),
        norm: s.x.norm_l1(),
        e: s.e.clone(),
    }
}

pub fn from_section<T: Scalar>(p: &SectionPoint<T>) -> Result<NatExtState<T>> {
    if p.y.len() != p.b.len() {
        return Err(McfError::DimensionMismatch {
            expected: p.y.len(),
            got: p.b.len(),
        });
    }
    let x_last = p.norm.clone() - sum(&p.y);
    let a_last = (p.e.clone() - dot(&p.b, &p.y)) / &p.norm;
    let mut x = p.y.clone();
    x.push(x_last);
    let mut a: Vec<T> = p.b.iter().map(|bi| bi.clone() + &a_last).collect();
    a.push(a_last);
    NatExtState::new(ConeVector::new(x)?, ConeVector::new(a)?)
}

/// Declared dual domain. The natural extension is a bijection of
/// `D = ⋃ᵢ Λᵢ × sourceᵢ` onto `⋃ᵢ F(Λᵢ) × targetᵢ`, and both unions equal `D`.
/// Outside Brun every source is the whole dual cone `Λ*`
/// and the targets `Λ*ᵢ` partition it; for Brun the sources are `Θ*_π` and
/// the targets `Λ*_π`.
#[derive(Clone, Debug)]
pub struct DualDomain {
    pub global: Option<Cone>,
    pub source: Vec<Cone>,
    pub target: Vec<Cone>,
}

impl DualDomain {
    pub fn for_spec(spec: &AlgorithmSpec) -> Result<Self> {
        let d = spec.dim();
        match spec.kind() {
            AlgorithmKind::Farey => {
                let lambda = Cone::positive(2);
                Ok(DualDomain {
                    global: Some(lambda.clone()),
                    source: vec![lambda.clone(), lambda],
                    // F̃(Λ₁ × Λ) = Λ × Λ₂ and F̃(Λ₂ × Λ) = Λ × Λ₁.
                    target: vec![
                        Cone::new(2, vec![vec![1, -1]]).with_positivity(),
                        Cone::new(2, vec![vec![-1, 1]]).with_positivity(),
                    ],
                })
            }
            AlgorithmKind::Reverse => {
                let star = Cone::new(3, vec![vec![-1, 1, 1], vec![1, -1, 1], vec![1, 1, -1]])
                    .with_positivity();
                // Λ*ᵢ: αᵢ < (α+β+γ)/4 for i ≤ 3, Λ*₄: all above the quarter sum.
                let mut target: Vec<Cone> = (0..3)
                    .map(|i| {
                        let f = (0..3).map(|j| if j == i { -3 } else { 1 }).collect();
                        Cone::new(3, vec![f]).intersect(&star)
                    })
                    .collect();
                let all = (0..3)
                    .map(|i| (0..3).map(|j| if j == i { 3 } else { -1 }).collect())
                    .collect();
                target.push(Cone::new(3, all).intersect(&star));
                Ok(DualDomain {
                    global: Some(star.clone()),
                    source: vec![star; 4],
                    target,
                })
            }
            AlgorithmKind::Cassaigne => {
                // max(α, γ) < β < α + γ
                let star = Cone::new(3, vec![vec![-1, 1, 0], vec![0, 1, -1], vec![1, -1, 1]])
                    .with_positivity();
                Ok(DualDomain {
                    global: Some(star.clone()),
                    source: vec![star.clone(), star.clone()],
                    target: vec![
                        Cone::new(3, vec![vec![-1, 0, 1]]).intersect(&star),
                        Cone::new(3, vec![vec![1, 0, -1]]).intersect(&star),
                    ],
                })
            }
            AlgorithmKind::Brun { .. } => {
                let mut source = Vec::with_capacity(spec.branch_count());
                let mut target = Vec::with_capacity(spec.branch_count());
                for id in spec.branch_ids() {
                    let p = perm::unrank(d, id.0);
                    let theta = brun_theta_star(d, &p);
                    let mut f = vec![0; d];
                    f[p[d - 2]] = 1;
                    f[p[d - 1]] = -1;
                    target.push(theta.intersect(&Cone::new(d, vec![f])));
                    source.push(theta);
                }
                Ok(DualDomain {
                    global: None,
                    source,
                    target,
                })
            }
            _ => Err(McfError::Unsupported(format!(
                "{spec} has no declared dual domain"
            ))),
        }
    }
}

/// `Θ*_π = {α_{π(i)} < α_{π(d)} for i < d−1}`.
fn brun_theta_star(d: usize, p: &[usize]) -> Cone {
    let forms = p[..d - 2]
        .iter()
        .map(|&i| {
            let mut f = vec![0; d];
            f[p[d - 1]] = 1;
            f[i] = -1;
            f
        })
        .collect();
    Cone::new(d, forms).with_positivity()
}

/// Result of [`dual_membership`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualMembership {
    /// `a ∈ Λ*` (for Brun: `a` lies in some `Θ*_π`).
    pub inside: bool,
    /// Branches `i` with `a ∈ targetᵢ` (the pieces `Λ*ᵢ`).
    pub pieces: Vec<BranchId>,
    /// Branches `i` with `a ∈ sourceᵢ` (for Brun the cones `Θ*_π`).
    pub sources: Vec<BranchId>,
}

/// Dual-cone membership. A vector on the boundary of `Λ*`, or inside `Λ*`
/// but on the boundary between two pieces, is reported as an error.
pub fn dual_membership<T: Scalar>(
    spec: &AlgorithmSpec,
    a: &ConeVector<T>,
) -> Result<DualMembership> {
    let dom = DualDomain::for_spec(spec)?;
    dual_membership_in(spec, &dom, a.coords())
}

fn dual_membership_in<T: Scalar>(
    spec: &AlgorithmSpec,
    dom: &DualDomain,
    a: &[T],
) -> Result<DualMembership> {
    if a.len() != spec.dim() {
        return Err(McfError::DimensionMismatch {
            expected: spec.dim(),
            got: a.len(),
        });
    }
    let boundary = |what: &str| {
        Err(McfError::Boundary(format!(
            "{spec}: dual vector on the boundary of {what}"
        )))
    };
    let mut pieces = Vec::new();
    let mut sources = Vec::new();
    for (i, (src, tgt)) in dom.source.iter().zip(&dom.target).enumerate() {
        match src.membership(a) {
            Membership::Inside => sources.push(BranchId(i)),
            Membership::Boundary if dom.global.is_none() => return boundary("a source cone"),
            _ => {}
        }
        match tgt.membership(a) {
            Membership::Inside => pieces.push(BranchId(i)),
            Membership::Boundary if dom.global.is_none() => return boundary("a target cone"),
            _ => {}
        }
    }
    let inside = match &dom.global {
        Some(star) => match star.membership(a) {
            Membership::Inside => {
                if pieces.len() != 1 {
                    return boundary("a piece");
                }
                true
            }
            Membership::Boundary => return boundary("the dual cone"),
            Membership::Outside => false,
        },
        None => !sources.is_empty(),
    };
    Ok(DualMembership {
        inside,
        pieces,
        sources,
    })
}

/// Whether `(x, a)` lies in the domain `D`: `a` in the source cone of the
/// branch containing `x`.
pub fn state_in_domain<T: Scalar>(spec: &AlgorithmSpec, s: &NatExtState<T>) -> Result<bool> {
    let dom = DualDomain::for_spec(spec)?;
    state_in(spec, &dom, s)
}

fn state_in<T: Scalar>(spec: &AlgorithmSpec, dom: &DualDomain, s: &NatExtState<T>) -> Result<bool> {
    coords_in(spec, dom, s.x.coords(), s.a.coords())
}

fn coords_in<T: Scalar>(spec: &AlgorithmSpec, dom: &DualDomain, x: &[T], a: &[T]) -> Result<bool> {
    let id = spec.classify(x)?;
    let m = dual_membership_in(spec, dom, a)?;
    Ok(match &dom.global {
        Some(_) => m.inside,
        None => m.sources.contains(&id),
    })
}

/// Least `n ≤ max_n` such that `F̃ⁿ(s₀)` lies in the domain `D`, using
/// renormalized steps.
pub fn absorption_time<T: Scalar>(
    spec: &AlgorithmSpec,
    s0: &NatExtState<T>,
    max_n: u64,
) -> Result<Option<u64>> {
    let dom = DualDomain::for_spec(spec)?;
    let mut s = s0.clone();
    for n in 0..=max_n {
        if state_in(spec, &dom, &s)? {
            return Ok(Some(n));
        }
        if n < max_n {
            s = natext_step_renormalized(spec, &s)?.1;
        }
    }
    Ok(None)
}

/// Outcome of one absorption trial in [`absorption_statistics`].
#[derive(Clone, Debug, PartialEq)]
pub enum AbsorptionOutcome {
    /// Entered `D` at step `n` and stayed for the whole follow-up window.
    Absorbed {
        n: u64,
    },
    /// Entered `D` at step `n` and left it at step `left_at`.
    Escaped {
        n: u64,
        left_at: u64,
    },
    NotAbsorbed,
    /// The orbit hit a partition boundary or left the float range.
    Aborted(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbsorptionStats {
    pub starts: usize,
    pub absorbed: usize,
    pub escaped: usize,
    pub not_absorbed: usize,
    pub aborted: usize,
    pub max_absorption_time: u64,
}

impl AbsorptionStats {
    pub fn absorbed_fraction(&self) -> f64 {
        self.absorbed as f64 / self.starts as f64
    }
}

/// Absorption trials from `starts` random float states (`x` uniform on the
/// simplex, `a` uniform on the unit cube), each run until absorption within
/// `max_n` steps and then followed for `follow` more steps.
pub fn absorption_statistics(
    spec: &AlgorithmSpec,
    starts: usize,
    max_n: u64,
    follow: u64,
    seed: u64,
) -> Result<(AbsorptionStats, Vec<AbsorptionOutcome>)> {
    let dom = DualDomain::for_spec(spec)?;
    let kernel = FloatKernel::new(spec);
    let outcomes: Vec<AbsorptionOutcome> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded_rng(seed, k as u64);
            let x = crate::rng::uniform_simplex(&mut rng, spec.dim());
            let a = positive_unit_vector(&mut rng, spec.dim());
            absorption_trial(&kernel, &dom, x, a, max_n, follow)
                .unwrap_or_else(|e| AbsorptionOutcome::Aborted(e.to_string()))
        })
        .collect();
    let mut stats = AbsorptionStats {
        starts,
        absorbed: 0,
        escaped: 0,
        not_absorbed: 0,
        aborted: 0,
        max_absorption_time: 0,
    };
    for o in &outcomes {
        match o {
            AbsorptionOutcome::Absorbed { n } => {
                stats.absorbed += 1;
                stats.max_absorption_time = stats.max_absorption_time.max(*n);
            }
            AbsorptionOutcome::Escaped { .. } => stats.escaped += 1,
            AbsorptionOutcome::NotAbsorbed => stats.not_absorbed += 1,
            AbsorptionOutcome::Aborted(_) => stats.aborted += 1,
        }
    }
    Ok((stats, outcomes))
}

fn absorption_trial(
    kernel: &FloatKernel,
    dom: &DualDomain,
    mut x: Vec<f64>,
    mut a: Vec<f64>,
    max_n: u64,
    follow: u64,
) -> Result<AbsorptionOutcome> {
    let spec = kernel.spec();
    let step = |x: &mut [f64], a: &mut [f64]| -> Result<()> {
        kernel.step(x, Some(a))?;
        for v in [x, a] {
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|c| *c /= s);
            if !v.iter().all(|c| c.is_finite() && *c > 0.0) {
                return Err(McfError::NonFinite("absorption orbit"));
            }
        }
        Ok(())
    };
    let mut entered = None;
    for n in 0..=max_n {
        if coords_in(spec, dom, &x, &a)? {
            entered = Some(n);
            break;
        }
        step(&mut x, &mut a)?;
    }
    let Some(n) = entered else {
        return Ok(AbsorptionOutcome::NotAbsorbed);
    };
    for k in 1..=follow {
        step(&mut x, &mut a)?;
        if !coords_in(spec, dom, &x, &a)? {
            return Ok(AbsorptionOutcome::Escaped { n, left_at: n + k });
        }
    }
    Ok(AbsorptionOutcome::Absorbed { n })
}

/// One violation found by [`bijectivity_audit`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub piece: String,
    pub check: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PieceAudit {
    pub piece: String,
    pub forward_samples: usize,
    pub inverse_samples: usize,
    pub ray_checks: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditReport {
    pub algorithm: String,
    pub pieces: Vec<PieceAudit>,
    pub union_samples: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// `piece,forward_samples,inverse_samples,ray_checks,violations` rows,
    /// one per piece plus a `union` row, followed by the sorted violations.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("piece,forward_samples,inverse_samples,ray_checks,violations\n");
        for p in &self.pieces {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.piece, p.forward_samples, p.inverse_samples, p.ray_checks, p.violations
            ));
        }
        let union_violations = self
            .violations
            .iter()
            .filter(|v| v.check == "union")
            .count();
        out.push_str(&format!(
            "union,{},0,0,{}\n",
            self.union_samples, union_violations
        ));
        for v in &self.violations {
            out.push_str(&format!("# {} {}: {}\n", v.piece, v.check, v.detail));
        }
        out
    }
}

/// Largest dimension audited for the d-dimensional Brun cones.
pub const MAX_AUDIT_DIM: usize = 6;

/// Exact audit of the bijectivity of `F̃` on the declared domain.
///
/// For every branch `i`:
/// * forward: `n_samples` exact points of `Λᵢ × sourceᵢ` map into
///   `F(Λᵢ) × targetᵢ`, and into no other target product;
/// * inverse: `n_samples` exact points of `F(Λᵢ) × targetᵢ` pull back into
///   `Λᵢ × sourceᵢ` and step forward to themselves;
/// * rays: `Mᵢ⁻¹` maps the extreme rays of `Λᵢ` onto those of `F(Λᵢ)` and
///   `Mᵢᵀ` maps the extreme rays of `sourceᵢ` onto those of `targetᵢ`.
///
/// A final union check samples `n_samples` points of the whole cone and
/// verifies that membership in `⋃ Λᵢ × sourceᵢ` and in `⋃ F(Λᵢ) × targetᵢ`
/// agree, each union being disjoint.
pub fn bijectivity_audit(spec: &AlgorithmSpec, n_samples: usize, seed: u64) -> Result<AuditReport> {
    if spec.dim() > MAX_AUDIT_DIM {
        return Err(McfError::Unsupported(format!(
            "audits are limited to dimension {MAX_AUDIT_DIM}"
        )));
    }
    let dom = DualDomain::for_spec(spec)?;
    let per_branch: Vec<(PieceAudit, Vec<Violation>)> = spec
        .branch_ids()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|id| audit_branch(spec, &dom, id, n_samples, seed))
        .collect::<Result<_>>()?;
    let mut pieces = Vec::new();
    let mut violations = Vec::new();
    for (p, v) in per_branch {
        pieces.push(p);
        violations.extend(v);
    }
    violations.extend(audit_union(spec, &dom, n_samples, seed));
    violations.sort();
    Ok(AuditReport {
        algorithm: spec.name().to_string(),
        pieces,
        union_samples: n_samples,
        violations,
    })
}

const SAMPLE_MAX: i64 = 1 << 20;

/// Random integer point strictly inside a pointed cone: a combination of its
/// extreme rays with positive integer weights.
fn interior_point(rays: &[Vec<BigInt>], rng: &mut impl Rng) -> Vec<Q> {
    let d = rays[0].len();
    let mut v = vec![BigInt::from(0); d];
    for r in rays {
        let w = BigInt::from(rng.random_range(1..=SAMPLE_MAX));
        for (vi, ri) in v.iter_mut().zip(r) {
            *vi += &w * ri;
        }
    }
    v.into_iter().map(Q::from_integer).collect()
}

fn rays_as_q(rays: &[Vec<BigInt>]) -> Vec<Vec<Q>> {
    rays.iter()
        .map(|r| r.iter().cloned().map(Q::from_integer).collect())
        .collect()
}

fn audit_branch(
    spec: &AlgorithmSpec,
    dom: &DualDomain,
    id: BranchId,
    n: usize,
    seed: u64,
) -> Result<(PieceAudit, Vec<Violation>)> {
    let label = spec.qualified_label(id);
    let mut violations = Vec::new();
    let mut flag = |check: &'static str, detail: String| {
        violations.push(Violation {
            piece: label.clone(),
            check,
            detail,
        })
    };
    let m = spec.matrix_exact(id);
    let mt = m.transpose();
    let lambda = spec.cone(id);
    let image = spec.image_cone(id);
    let (source, target) = (&dom.source[id.0], &dom.target[id.0]);
    let rays_lambda = lambda.extreme_rays();
    let rays_image = image.extreme_rays();
    let rays_source = source.extreme_rays();
    let rays_target = target.extreme_rays();

    let mut ray_checks = 0;
    let mut mapped: Vec<Vec<BigInt>> = rays_as_q(&rays_lambda)
        .iter()
        .map(|r| primitive(&m.inverse_mul_vec(r).expect("invertible")))
        .collect();
    mapped.sort();
    ray_checks += 1;
    if mapped != rays_image {
        flag("rays-x", format!("{mapped:?} != {rays_image:?}"));
    }
    let mut mapped: Vec<Vec<BigInt>> = rays_as_q(&rays_source)
        .iter()
        .map(|r| primitive(&mt.mul_vec(r)))
        .collect();
    mapped.sort();
    ray_checks += 1;
    if mapped != rays_target {
        flag("rays-a", format!("{mapped:?} != {rays_target:?}"));
    }

    let mut rng = seeded_rng(seed, 2 * id.0 as u64);
    for _ in 0..n {
        let x = interior_point(&rays_lambda, &mut rng);
        let a = interior_point(&rays_source, &mut rng);
        let s = NatExtState::new(ConeVector::new(x)?, ConeVector::new(a)?)?;
        let (got, t) = natext_step(spec, &s)?;
        if got != id {
            flag(
                "forward",
                format!("{s} classified as {}", spec.qualified_label(got)),
            );
            continue;
        }
        if t.e() != s.e() {
            flag("forward", format!("{s}: scalar product changed"));
        }
        let holders: Vec<usize> = spec
            .branch_ids()
            .filter(|j| {
                spec.image_cone(*j).contains(t.x().coords())
                    && dom.target[j.0].contains(t.a().coords())
            })
            .map(|j| j.0)
            .collect();
        if holders != [id.0] {
            flag(
                "forward",
                format!("{s} -> {t} lies in target products {holders:?}"),
            );
        }
    }

    let mut rng = seeded_rng(seed, 2 * id.0 as u64 + 1);
    for _ in 0..n {
        let y = interior_point(&rays_image, &mut rng);
        let b = interior_point(&rays_target, &mut rng);
        let t = NatExtState::new(ConeVector::new(y)?, ConeVector::new(b)?)?;
        let s = match natext_inverse(spec, id, &t) {
            Ok(s) => s,
            Err(e) => {
                flag("inverse", format!("{t}: {e}"));
                continue;
            }
        };
        if !(lambda.contains(s.x().coords()) && source.contains(s.a().coords())) {
            flag(
                "inverse",
                format!("{t} pulls back to {s} outside the source product"),
            );
            continue;
        }
        match natext_step(spec, &s) {
            Ok((j, back)) if j == id && back == t => {}
            _ => flag("inverse", format!("{t} does not round-trip")),
        }
    }

    let audit = PieceAudit {
        piece: label,
        forward_samples: n,
        inverse_samples: n,
        ray_checks,
        violations: violations.len(),
    };
    Ok((audit, violations))
}

fn audit_union(spec: &AlgorithmSpec, dom: &DualDomain, n: usize, seed: u64) -> Vec<Violation> {
    let d = spec.dim();
    let whole = spec.domain().extreme_rays();
    let dual_whole = Cone::positive(d).extreme_rays();
    let mut rng = seeded_rng(seed, u64::MAX);
    let mut violations = Vec::new();
    for _ in 0..n {
        let x = interior_point(&whole, &mut rng);
        let a = interior_point(&dual_whole, &mut rng);
        let left = spec
            .branch_ids()
            .filter(|i| spec.cone(*i).contains(&x) && dom.source[i.0].contains(&a))
            .count();
        let right = spec
            .branch_ids()
            .filter(|i| spec.image_cone(*i).contains(&x) && dom.target[i.0].contains(&a))
            .count();
        if left > 1 || right > 1 || left != right {
            violations.push(Violation {
                piece: spec.name().to_string(),
                check: "union",
                detail: format!("{x:?}, {a:?}: {left} source products, {right} target products"),
            });
        }
    }
    violations
}
