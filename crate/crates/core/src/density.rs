//! Closed-form invariant densities, transfer-operator residuals, total masses
//! and orbit histograms.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;

use crate::algorithms::{AlgorithmKind, AlgorithmSpec, FloatKernel};
use crate::brun_highdim::brun_density_unsorted;
use crate::error::{McfError, Result};
use crate::linalg::ConeVector;
use crate::quad::{integrate, integrate_triangle, pairwise_sum, Tolerance};
use crate::rng::{seeded_rng, uniform_simplex};
use crate::scalar::{sum, Scalar};

/// A closed-form invariant density on the unit simplex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DensityModel {
    /// `1/(x(1−x))`, infinite mass.
    Farey,
    /// `1/((1−x)(1−y)(1−z))`.
    Reverse,
    /// `1/(2(1−x)(1−z))`.
    Cassaigne,
    /// Unsorted Brun; on `Λ_π` in dimension 3 the density is
    /// `1/(2x_{π(2)}(1−x_{π(2)})(1−x_{π(1)}−x_{π(2)}))`, and the nested chain
    /// sum in higher dimension.
    Brun { dim: usize },
    /// Brun on the sup-norm section `x₃ = 1`, coordinates `0 < x₁ < x₂ < 1`:
    /// `1/(2x₂(1+x₁))`.
    BrunSupNorm,
}

/// Total mass of a model, when known in closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mass {
    Infinite,
    Finite(f64),
    Unknown,
}

impl DensityModel {
    pub fn for_spec(spec: &AlgorithmSpec) -> Result<Self> {
        match spec.kind() {
            AlgorithmKind::Farey => Ok(DensityModel::Farey),
            AlgorithmKind::Reverse => Ok(DensityModel::Reverse),
            AlgorithmKind::Cassaigne => Ok(DensityModel::Cassaigne),
            AlgorithmKind::Brun { dim } => Ok(DensityModel::Brun { dim: *dim }),
            _ => Err(McfError::Unsupported(format!(
                "no closed-form density for {spec}"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DensityModel::Farey => "farey".into(),
            DensityModel::Reverse => "reverse".into(),
            DensityModel::Cassaigne => "cassaigne".into(),
            DensityModel::Brun { dim: 3 } => "brun".into(),
            DensityModel::Brun { dim } => format!("brun d={dim}"),
            DensityModel::BrunSupNorm => "brun-supnorm".into(),
        }
    }

    /// Number of coordinates `density` expects.
    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Farey => 2,
            DensityModel::Reverse | DensityModel::Cassaigne => 3,
            DensityModel::Brun { dim } => *dim,
            DensityModel::BrunSupNorm => 2,
        }
    }

    pub fn mass(&self) -> Mass {
        match self {
            DensityModel::Farey => Mass::Infinite,
            DensityModel::Reverse => Mass::Finite(PI * PI / 4.0),
            DensityModel::Cassaigne => Mass::Finite(PI * PI / 12.0),
            DensityModel::Brun { dim: 3 } => Mass::Finite(PI * PI / 4.0),
            DensityModel::Brun { .. } => Mass::Unknown,
            DensityModel::BrunSupNorm => Mass::Finite(PI * PI / 24.0),
        }
    }

    /// The density at a point of the open simplex (coordinates are rescaled
    /// to sum 1). For [`DensityModel::BrunSupNorm`] the point is `(x₁, x₂)`.
    pub fn density<T: Scalar>(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(McfError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|c| !c.is_finite() || *c <= T::zero()) {
            return Err(McfError::Domain(format!(
                "{}: density needs an interior point",
                self.name()
            )));
        }
        let one = T::one();
        let two = T::from_i64(2);
        if *self == DensityModel::BrunSupNorm {
            let (x1, x2) = (&x[0], &x[1]);
            if !(x1 < x2 && *x2 < one) {
                return Err(McfError::Domain(
                    "sup-norm section needs 0 < x1 < x2 < 1".into(),
                ));
            }
            return Ok(one.clone() / (two * x2 * (one + x1)));
        }
        let total = sum(x);
        let p: Vec<T> = x.iter().map(|c| c.clone() / &total).collect();
        let value = match self {
            DensityModel::Farey => one.clone() / (p[0].clone() * (one - &p[0])),
            DensityModel::Reverse => {
                one.clone() / ((one.clone() - &p[0]) * (one.clone() - &p[1]) * (one - &p[2]))
            }
            DensityModel::Cassaigne => one.clone() / (two * (one.clone() - &p[0]) * (one - &p[2])),
            DensityModel::Brun { dim: 3 } => {
                let order = crate::perm::argsort(&p)
                    .ok_or_else(|| McfError::Domain("brun: tied coordinates".into()))?;
                let (a, b) = (&p[order[0]], &p[order[1]]);
                one.clone() / (two * b * (one.clone() - b) * (one - a - b))
            }
            DensityModel::Brun { .. } => brun_density_unsorted(&p)?,
            DensityModel::BrunSupNorm => unreachable!(),
        };
        if !value.is_finite() {
            return Err(McfError::NonFinite("density"));
        }
        Ok(value)
    }
}

impl fmt::Display for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `|δ(x) − Σᵢ δ(hᵢ(x))·|det Mᵢ|/‖Mᵢx‖₁^d|` over the inverse branches whose
/// preimage lies in the open branch cone.
pub fn transfer_residual<T: Scalar>(
    spec: &AlgorithmSpec,
    model: &DensityModel,
    x: &ConeVector<T>,
) -> Result<T> {
    let lhs = model.density(x.coords())?;
    let mut rhs = T::zero();
    for b in spec.inverse_branches(x)? {
        rhs = rhs + model.density(b.preimage.coords())? * b.jacobian;
    }
    Ok((lhs - rhs).abs())
}

/// Residuals at random points of the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferSweep {
    pub rows: Vec<(Vec<f64>, f64)>,
    pub skipped: Vec<String>,
    pub max_residual: f64,
}

impl TransferSweep {
    /// `point,x1..xd,residual` rows.
    pub fn to_csv(&self) -> String {
        let d = self.rows.first().map_or(0, |r| r.0.len());
        let mut out = String::from("point");
        for i in 1..=d {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",residual\n");
        for (k, (x, r)) in self.rows.iter().enumerate() {
            out.push_str(&k.to_string());
            for c in x {
                out.push_str(&format!(",{c:e}"));
            }
            out.push_str(&format!(",{r:e}\n"));
        }
        out
    }
}

/// Transfer residuals at `n` uniform random points of the domain (sorted
/// domains receive sorted points).
pub fn transfer_sweep(
    spec: &AlgorithmSpec,
    model: &DensityModel,
    n: usize,
    seed: u64,
) -> Result<TransferSweep> {
    let sorted = spec.domain() != &crate::cone::Cone::positive(spec.dim());
    let results: Vec<std::result::Result<(Vec<f64>, f64), String>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded_rng(seed, k as u64);
            let mut p = uniform_simplex(&mut rng, spec.dim());
            if sorted {
                p.sort_by(f64::total_cmp);
            }
            let v = ConeVector::new(p.clone()).map_err(|e| e.to_string())?;
            transfer_residual(spec, model, &v)
                .map(|r| (p, r))
                .map_err(|e| format!("point {k}: {e}"))
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => skipped.push(e),
        }
    }
    let max_residual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(TransferSweep {
        rows,
        skipped,
        max_residual,
    })
}

/// Quadrature strategy for [`total_mass`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassMethod {
    /// Closed one-variable reductions of the double integrals.
    Reduced1d,
    /// Iterated adaptive quadrature over the six sorted sectors.
    Adaptive2d,
    /// Uniform sampling of the simplex; stops when the standard error falls
    /// below the tolerance or after `max_samples`.
    MonteCarlo { max_samples: u64, seed: u64 },
}

impl MassMethod {
    pub fn name(&self) -> &'static str {
        match self {
            MassMethod::Reduced1d => "reduced-1d",
            MassMethod::Adaptive2d => "adaptive-2d",
            MassMethod::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MassEstimate {
    pub model: String,
    pub method: &'static str,
    pub value: f64,
    /// Quadrature error estimate, or one standard error for Monte-Carlo.
    pub error: f64,
    pub evals: u64,
}

impl MassEstimate {
    pub fn to_csv(&self) -> String {
        format!(
            "model,method,value,error,evals\n{},{},{:.17e},{:e},{}\n",
            self.model, self.method, self.value, self.error, self.evals
        )
    }
}

fn mass_result(
    model: &DensityModel,
    method: MassMethod,
    value: f64,
    error: f64,
    evals: u64,
) -> MassEstimate {
    MassEstimate {
        model: model.name(),
        method: method.name(),
        value,
        error,
        evals,
    }
}

/// Total mass of `model` over its domain.
pub fn total_mass(model: &DensityModel, method: MassMethod, tol: f64) -> Result<MassEstimate> {
    if *model == DensityModel::Farey {
        return Err(McfError::InfiniteMass(
            "farey: the density 1/(x(1-x)) is not integrable at 0 and 1".into(),
        ));
    }
    let qtol = Tolerance::new(tol * 1e-2, 1e-12);
    match method {
        MassMethod::Reduced1d => {
            let q = match model {
                DensityModel::Reverse => {
                    integrate(|x| 2.0 * x.ln() / ((x + 1.0) * (x - 1.0)), 0.0, 1.0, qtol)?
                }
                DensityModel::Cassaigne => {
                    integrate(|x| x.ln() / (2.0 * (x - 1.0)), 0.0, 1.0, qtol)?
                }
                DensityModel::BrunSupNorm | DensityModel::Brun { dim: 3 } => {
                    let q = integrate(|x| x.ln_1p() / (2.0 * x), 0.0, 1.0, qtol)?;
                    if *model == DensityModel::BrunSupNorm {
                        q
                    } else {
                        crate::quad::Quadrature {
                            value: 6.0 * q.value,
                            error: 6.0 * q.error,
                            evals: q.evals,
                        }
                    }
                }
                _ => {
                    return Err(McfError::Unsupported(format!(
                        "no one-variable reduction for {model}"
                    )))
                }
            };
            Ok(mass_result(model, method, q.value, q.error, q.evals as u64))
        }
        MassMethod::Adaptive2d => {
            if *model == DensityModel::BrunSupNorm {
                let q = integrate_triangle(
                    |x1, x2| 1.0 / (2.0 * x2 * (1.0 + x1)),
                    [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
                    qtol,
                )?;
                return Ok(mass_result(model, method, q.value, q.error, q.evals as u64));
            }
            let sectors = sector_masses_with(model, qtol)?;
            let value = pairwise_sum(&sectors.iter().map(|s| s.0).collect::<Vec<_>>());
            let error = sectors.iter().map(|s| s.1).sum();
            let evals = sectors.iter().map(|s| s.2).sum();
            Ok(mass_result(model, method, value, error, evals))
        }
        MassMethod::MonteCarlo { max_samples, seed } => {
            let (value, error, n) = monte_carlo_mass(model, tol, max_samples, seed)?;
            Ok(mass_result(model, method, value, error, n))
        }
    }
}

/// Vertices, in `(x₁, x₂)` coordinates, of the sector
/// `x_{π(1)} < x_{π(2)} < x_{π(3)}` of the simplex: the vertex `e_{π(3)}`,
/// the midpoint of the edge `[e_{π(2)}, e_{π(3)}]` and the centroid.
pub fn sector_triangle(p: &[usize]) -> [[f64; 2]; 3] {
    let point = |w: [f64; 3]| {
        let mut full = [0.0; 3];
        for (k, &i) in p.iter().enumerate() {
            full[i] = w[k];
        }
        [full[0], full[1]]
    };
    [
        point([0.0, 0.0, 1.0]),
        point([0.0, 0.5, 0.5]),
        point([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
    ]
}

fn simplex_density_f64(model: &DensityModel) -> impl Fn(f64, f64) -> f64 + '_ {
    move |x, y| {
        let z = 1.0 - x - y;
        model.density(&[x, y, z]).unwrap_or(0.0)
    }
}

fn sector_masses_with(model: &DensityModel, tol: Tolerance) -> Result<Vec<(f64, f64, u64)>> {
    if model.dim() != 3 || *model == DensityModel::BrunSupNorm {
        return Err(McfError::Unsupported(format!(
            "sector quadrature needs a 3-dimensional simplex model, got {model}"
        )));
    }
    let per = Tolerance {
        abs: tol.abs / 6.0,
        ..tol
    };
    crate::perm::all(3)
        .par_iter()
        .map(|p| {
            let q = integrate_triangle(simplex_density_f64(model), sector_triangle(p), per)?;
            Ok((q.value, q.error, q.evals as u64))
        })
        .collect()
}

/// Mass of each sorted sector `x_{π(1)} < x_{π(2)} < x_{π(3)}`, in the
/// lexicographic order of `π`.
pub fn sector_masses(model: &DensityModel, tol: f64) -> Result<Vec<f64>> {
    Ok(
        sector_masses_with(model, Tolerance::new(tol * 1e-2, 1e-12))?
            .into_iter()
            .map(|s| s.0)
            .collect(),
    )
}

fn monte_carlo_mass(
    model: &DensityModel,
    tol: f64,
    max_samples: u64,
    seed: u64,
) -> Result<(f64, f64, u64)> {
    let d = model.dim();
    if *model == DensityModel::BrunSupNorm {
        return Err(McfError::Unsupported(
            "Monte-Carlo mass is implemented for simplex models".into(),
        ));
    }
    const CHUNK: u64 = 1 << 14;
    const ROUND: u64 = 16;
    let simplex_volume = 1.0 / (1..d).map(|k| k as f64).product::<f64>();
    let mut n = 0u64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut chunk_index = 0u64;
    loop {
        let stats: Vec<(u64, f64, f64)> = (chunk_index..chunk_index + ROUND)
            .into_par_iter()
            .map(|c| {
                let mut rng = seeded_rng(seed, c);
                let mut count = 0u64;
                let mut mean = 0.0;
                let mut m2 = 0.0;
                for _ in 0..CHUNK {
                    let p = uniform_simplex(&mut rng, d);
                    let Ok(v) = model.density(&p) else { continue };
                    count += 1;
                    let delta = v - mean;
                    mean += delta / count as f64;
                    m2 += delta * (v - mean);
                }
                (count, mean, m2)
            })
            .collect();
        chunk_index += ROUND;
        for (c, mu, s) in stats {
            if c == 0 {
                continue;
            }
            let total = n + c;
            let delta = mu - mean;
            mean += delta * c as f64 / total as f64;
            m2 += s + delta * delta * (n as f64) * (c as f64) / total as f64;
            n = total;
        }
        let stderr = (m2 / (n as f64 - 1.0) / n as f64).sqrt() * simplex_volume;
        if stderr < tol || chunk_index * CHUNK >= max_samples {
            return Ok((mean * simplex_volume, stderr, n));
        }
    }
}

/// Mass of Brun's density on the sorted piece `x₁ < x₂ < x₃` of the simplex,
/// as a single integral over `x₁ ∈ (0, 1/3)` of the closed-form inner
/// integral over `x₂ ∈ (x₁, (1−x₁)/2)`.
pub fn brun_sorted_piece_mass(tol: f64) -> Result<f64> {
    // 1/(x₂(1−x₂)(c−x₂)) = (1/c)/x₂ − (1/x₁)/(1−x₂) + (1/(c x₁))/(c−x₂), c = 1−x₁
    let inner = |x1: f64| {
        let c = 1.0 - x1;
        let g = |x2: f64| x2.ln() / c + (-x2).ln_1p() / x1 - (c - x2).ln() / (c * x1);
        0.5 * (g(0.5 * c) - g(x1))
    };
    Ok(integrate(inner, 0.0, 1.0 / 3.0, Tolerance::new(tol * 1e-2, 1e-14))?.value)
}

/// `|LHS − π²/24|` for the dilogarithm identity behind Brun's sorted mass.
pub fn dilog_identity_check() -> f64 {
    crate::dilog::dilog_identity_check()
}

/// Area of the triangle with vertices `(a, 0)`, `(0, b)` and `(c, c)`:
/// `½|ab − bc − ac|`.
pub fn triangle_area<T: Scalar>(a: &T, b: &T, c: &T) -> T {
    let v = a.clone() * b - b.clone() * c - a.clone() * c;
    v.abs() / T::from_i64(2)
}

/// Shoelace area of a triangle.
pub fn shoelace_area<T: Scalar>(p: &[[T; 2]; 3]) -> T {
    let [a, b, c] = p;
    let v = (b[0].clone() - &a[0]) * (c[1].clone() - &a[1])
        - (c[0].clone() - &a[0]) * (b[1].clone() - &a[1]);
    v.abs() / T::from_i64(2)
}

/// Barycentric subdivision of the unit simplex into `n²` congruent
/// triangles, in `(x₁, x₂)` coordinates.
#[derive(Clone, Debug)]
pub struct SimplexBins {
    n: usize,
    cells: Vec<[[f64; 2]; 3]>,
    lookup: Vec<usize>,
}

impl SimplexBins {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(McfError::Domain("at least one bin per side".into()));
        }
        let h = 1.0 / n as f64;
        let mut cells = Vec::with_capacity(n * n);
        let mut lookup = vec![usize::MAX; 2 * n * n];
        for i in 0..n {
            for j in 0..n - i {
                lookup[2 * (i * n + j)] = cells.len();
                let (x, y) = (i as f64 * h, j as f64 * h);
                cells.push([[x, y], [x + h, y], [x, y + h]]);
                if i + j + 1 < n {
                    lookup[2 * (i * n + j) + 1] = cells.len();
                    cells.push([[x + h, y], [x, y + h], [x + h, y + h]]);
                }
            }
        }
        Ok(SimplexBins { n, cells, lookup })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, id: usize) -> [[f64; 2]; 3] {
        self.cells[id]
    }

    /// Cell containing the simplex point `(x₁, x₂, x₃)`.
    pub fn cell_of(&self, p: &[f64]) -> usize {
        let n = self.n;
        let sx = p[0] * n as f64;
        let sy = p[1] * n as f64;
        let i = (sx.floor().max(0.0) as usize).min(n - 1);
        let j = (sy.floor().max(0.0) as usize).min(n - 1 - i);
        let upper = (sx - i as f64) + (sy - j as f64) >= 1.0 && i + j + 1 < n;
        self.lookup[2 * (i * n + j) + upper as usize]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellRow {
    pub id: usize,
    pub observed: f64,
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramComparison {
    pub model: String,
    pub steps: u64,
    pub cells: Vec<CellRow>,
    pub l1: f64,
    pub sup: f64,
    pub restarts: Vec<String>,
}

impl HistogramComparison {
    /// `cell_id,observed,expected,residual` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell_id,observed,expected,residual\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                c.id,
                c.observed,
                c.expected,
                c.observed - c.expected
            ));
        }
        out
    }
}

/// Expected probability of each cell under the normalized model.
pub fn cell_probabilities(model: &DensityModel, bins: &SimplexBins) -> Result<Vec<f64>> {
    let raw: Vec<f64> = (0..bins.len())
        .into_par_iter()
        .map(|id| {
            integrate_triangle(
                simplex_density_f64(model),
                bins.cell(id),
                Tolerance::new(1e-11, 1e-9),
            )
            .map(|q| q.value)
        })
        .collect::<Result<_>>()?;
    let total = pairwise_sum(&raw);
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Number of independent orbits the histogram splits its steps across.
pub const HISTOGRAM_ORBITS: u64 = 16;

/// Histogram of projective orbits (`HISTOGRAM_ORBITS` independent random
/// starts sharing `n_steps`) against the model integrated over `bins²`
/// equal-area cells.
pub fn empirical_density(
    spec: &AlgorithmSpec,
    model: &DensityModel,
    n_steps: u64,
    bins: usize,
    seed: u64,
) -> Result<HistogramComparison> {
    if spec.dim() != 3 || model.dim() != 3 {
        return Err(McfError::Unsupported(
            "histograms are implemented on the 2-simplex".into(),
        ));
    }
    if model.mass() == Mass::Infinite {
        return Err(McfError::InfiniteMass(model.name()));
    }
    let grid = SimplexBins::new(bins)?;
    let expected = cell_probabilities(model, &grid)?;
    let kernel = FloatKernel::new(spec);
    let per = n_steps / HISTOGRAM_ORBITS;
    let extra = n_steps % HISTOGRAM_ORBITS;
    let shards: Vec<(Vec<u64>, Vec<String>)> = (0..HISTOGRAM_ORBITS)
        .into_par_iter()
        .map(|k| {
            let steps = per + u64::from(k < extra);
            histogram_orbit(&kernel, &grid, steps, seed, k)
        })
        .collect();
    let mut counts = vec![0u64; grid.len()];
    let mut restarts = Vec::new();
    for (c, r) in shards {
        for (t, v) in counts.iter_mut().zip(c) {
            *t += v;
        }
        restarts.extend(r);
    }
    let total = n_steps.max(1) as f64;
    let cells: Vec<CellRow> = counts
        .iter()
        .zip(&expected)
        .enumerate()
        .map(|(id, (&c, &e))| CellRow {
            id,
            observed: c as f64 / total,
            expected: e,
        })
        .collect();
    let l1 = pairwise_sum(
        &cells
            .iter()
            .map(|c| (c.observed - c.expected).abs())
            .collect::<Vec<_>>(),
    );
    let sup = cells
        .iter()
        .map(|c| (c.observed - c.expected).abs())
        .fold(0.0, f64::max);
    Ok(HistogramComparison {
        model: model.name(),
        steps: n_steps,
        cells,
        l1,
        sup,
        restarts,
    })
}

fn histogram_orbit(
    kernel: &FloatKernel,
    grid: &SimplexBins,
    steps: u64,
    seed: u64,
    stream: u64,
) -> (Vec<u64>, Vec<String>) {
    let mut rng = seeded_rng(seed, stream);
    let mut counts = vec![0u64; grid.len()];
    let mut restarts = Vec::new();
    let mut x = uniform_simplex(&mut rng, 3);
    let mut done = 0;
    while done < steps {
        match kernel.step(&mut x, None) {
            Ok(_) => {
                let s: f64 = x.iter().sum();
                x.iter_mut().for_each(|c| *c /= s);
                counts[grid.cell_of(&x)] += 1;
                done += 1;
            }
            Err(e) => {
                restarts.push(format!("orbit {stream} step {done}: {e}"));
                x = uniform_simplex(&mut rng, 3);
            }
        }
    }
    (counts, restarts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        <Q as Scalar>::from_ratio(n, d)
    }

    fn spec(name: &str) -> AlgorithmSpec {
        AlgorithmSpec::from_name(name).unwrap()
    }

    #[test]
    fn density_examples() {
        assert_eq!(
            DensityModel::Farey.density(&[q(1, 2), q(1, 2)]).unwrap(),
            q(4, 1)
        );
        assert_eq!(
            DensityModel::Reverse
                .density(&[q(1, 3), q(1, 3), q(1, 3)])
                .unwrap(),
            q(27, 8)
        );
        assert_eq!(
            DensityModel::Brun { dim: 3 }
                .density(&[q(2, 10), q(3, 10), q(5, 10)])
                .unwrap(),
            q(100, 21)
        );
        assert!(DensityModel::Reverse.density(&[1.0, 0.0, 0.0]).is_err());
        assert!(DensityModel::Brun { dim: 3 }
            .density(&[0.25, 0.25, 0.5])
            .is_err());
        assert!(DensityModel::BrunSupNorm.density(&[0.5, 0.25]).is_err());
    }

    #[test]
    fn brun_closed_form_matches_chain_sum() {
        let mut rng = seeded_rng(1, 1);
        for _ in 0..1000 {
            let p = uniform_simplex(&mut rng, 3);
            let a = DensityModel::Brun { dim: 3 }.density(&p).unwrap();
            let b = brun_density_unsorted(&p).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn farey_transfer_identity() {
        let farey = spec("farey");
        let x = ConeVector::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert!(transfer_residual(&farey, &DensityModel::Farey, &x).unwrap() < 1e-12);
    }

    #[test]
    fn transfer_identity_is_exact_in_rationals() {
        let x = ConeVector::<Q>::from_ratios(&[(2, 11), (4, 11), (5, 11)]).unwrap();
        for name in ["reverse", "cassaigne", "brun"] {
            let s = spec(name);
            let model = DensityModel::for_spec(&s).unwrap();
            assert_eq!(
                transfer_residual(&s, &model, &x).unwrap(),
                q(0, 1),
                "{name}"
            );
        }
        let x = ConeVector::<Q>::from_ratios(&[(1, 13), (3, 13), (4, 13), (5, 13)]).unwrap();
        let s = spec("brun d=4");
        assert_eq!(
            transfer_residual(&s, &DensityModel::Brun { dim: 4 }, &x).unwrap(),
            q(0, 1)
        );
    }

    #[test]
    fn wrong_density_has_a_residual() {
        let x = ConeVector::<Q>::from_ratios(&[(2, 11), (4, 11), (5, 11)]).unwrap();
        let r = transfer_residual(&spec("cassaigne"), &DensityModel::Reverse, &x).unwrap();
        assert!(r > q(1, 100));
    }

    #[test]
    fn transfer_sweeps_are_small() {
        for name in ["farey", "reverse", "cassaigne", "brun", "brun d=4"] {
            let s = spec(name);
            let model = DensityModel::for_spec(&s).unwrap();
            let sweep = transfer_sweep(&s, &model, 300, 4).unwrap();
            assert!(sweep.skipped.is_empty());
            assert!(sweep.max_residual < 1e-10, "{name}: {}", sweep.max_residual);
        }
    }

    #[test]
    fn reduced_masses() {
        let pi2 = PI * PI;
        let m = total_mass(&DensityModel::Reverse, MassMethod::Reduced1d, 1e-9).unwrap();
        assert!((m.value - pi2 / 4.0).abs() < 1e-9);
        let m = total_mass(&DensityModel::Cassaigne, MassMethod::Reduced1d, 1e-9).unwrap();
        assert!((m.value - pi2 / 12.0).abs() < 1e-9);
        let m = total_mass(&DensityModel::BrunSupNorm, MassMethod::Reduced1d, 1e-9).unwrap();
        assert!((m.value - pi2 / 24.0).abs() < 1e-9);
        assert!(matches!(
            total_mass(&DensityModel::Farey, MassMethod::Reduced1d, 1e-6),
            Err(McfError::InfiniteMass(_))
        ));
    }

    #[test]
    fn adaptive_masses() {
        let pi2 = PI * PI;
        for (model, expected) in [
            (DensityModel::Reverse, pi2 / 4.0),
            (DensityModel::Cassaigne, pi2 / 12.0),
            (DensityModel::Brun { dim: 3 }, pi2 / 4.0),
            (DensityModel::BrunSupNorm, pi2 / 24.0),
        ] {
            let m = total_mass(&model, MassMethod::Adaptive2d, 1e-7).unwrap();
            assert!((m.value - expected).abs() < 1e-6, "{model}: {}", m.value);
        }
    }

    #[test]
    fn sectors_of_symmetric_models() {
        let pi2 = PI * PI;
        for model in [DensityModel::Reverse, DensityModel::Brun { dim: 3 }] {
            for s in sector_masses(&model, 1e-7).unwrap() {
                assert!((s - pi2 / 24.0).abs() < 1e-6, "{model}: {s}");
            }
        }
    }

    #[test]
    fn sorted_piece_matches_the_dilogarithm_expression() {
        let v = brun_sorted_piece_mass(1e-10).unwrap();
        assert!((v - crate::dilog::brun_dilog_expression()).abs() < 1e-9);
        assert!((v - PI * PI / 24.0).abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_mass_is_in_range() {
        let m = total_mass(
            &DensityModel::Cassaigne,
            MassMethod::MonteCarlo {
                max_samples: 1 << 20,
                seed: 3,
            },
            1e-4,
        )
        .unwrap();
        assert!((m.value - PI * PI / 12.0).abs() < 5.0 * m.error, "{m:?}");
        let again = total_mass(
            &DensityModel::Cassaigne,
            MassMethod::MonteCarlo {
                max_samples: 1 << 20,
                seed: 3,
            },
            1e-4,
        )
        .unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn triangle_areas() {
        assert_eq!(triangle_area(&q(1, 1), &q(1, 1), &q(0, 1)), q(1, 2));
        assert_eq!(triangle_area(&q(2, 1), &q(3, 1), &q(1, 1)), q(1, 2));
        // (2,0), (0,2), (1,1) are collinear
        assert_eq!(triangle_area(&q(2, 1), &q(2, 1), &q(1, 1)), q(0, 1));
    }

    #[test]
    fn reverse_triangle_reproduces_density() {
        let mut rng = seeded_rng(2, 2);
        for _ in 0..1000 {
            let p = uniform_simplex(&mut rng, 3);
            let (x, y) = (p[0], p[1]);
            let area = triangle_area(&(1.0 / (x - 1.0)), &(1.0 / (y - 1.0)), &(1.0 / (x + y)));
            let expected = 1.0 / ((x + y) * (1.0 - x) * (1.0 - y));
            assert!((area - expected).abs() <= 1e-12 * expected);
            let shoelace = shoelace_area(&[
                [1.0 / (x - 1.0), 0.0],
                [0.0, 1.0 / (y - 1.0)],
                [1.0 / (x + y), 1.0 / (x + y)],
            ]);
            assert!((shoelace - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn brun_triangle_reproduces_density() {
        let mut rng = seeded_rng(2, 3);
        for _ in 0..1000 {
            let mut p = uniform_simplex(&mut rng, 3);
            p.sort_by(f64::total_cmp);
            let (x1, x2) = (p[0], p[1]);
            let s = 1.0 / (x1 + x2 - 1.0);
            let area = shoelace_area(&[[0.0, 1.0 / (x2 - 1.0)], [0.0, 1.0 / x2], [s, s]]);
            let expected = DensityModel::Brun { dim: 3 }.density(&p).unwrap();
            assert!((area - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn bins_cover_the_simplex() {
        let bins = SimplexBins::new(8).unwrap();
        assert_eq!(bins.len(), 64);
        let total: f64 = (0..bins.len()).map(|i| shoelace_area(&bins.cell(i))).sum();
        assert!((total - 0.5).abs() < 1e-14);
        let mut rng = seeded_rng(4, 4);
        for _ in 0..10_000 {
            let p = uniform_simplex(&mut rng, 3);
            let c = bins.cell(bins.cell_of(&p));
            // barycentric containment
            let [a, b, d] = c;
            let det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((p[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (p[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
            assert!(l1 >= -1e-12 && l2 >= -1e-12 && l1 + l2 <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn cell_probabilities_sum_to_one_and_match_mass() {
        let bins = SimplexBins::new(8).unwrap();
        let p = cell_probabilities(&DensityModel::Cassaigne, &bins).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn histogram_converges() {
        let s = spec("cassaigne");
        let model = DensityModel::Cassaigne;
        let small = empirical_density(&s, &model, 100_000, 8, 1).unwrap();
        let large = empirical_density(&s, &model, 1_000_000, 8, 1).unwrap();
        assert!(large.l1 < small.l1, "{} vs {}", large.l1, small.l1);
        assert!(large.l1 < 0.05, "{}", large.l1);
        let again = empirical_density(&s, &model, 100_000, 8, 1).unwrap();
        assert_eq!(small, again);
    }
}
