//! Adaptive Gauss-Kronrod quadrature on intervals and triangles.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{McfError, Result};

/// Kronrod abscissae of the 21-point rule (the 10-point Gauss nodes are the
/// odd-indexed entries).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Stopping rule: stop when `error ≤ max(abs_tol, rel_tol·|value|)` or the
/// evaluation budget is exhausted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_evals: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_evals: 2_000_000,
        }
    }

    fn reached(&self, value: f64, error: f64) -> bool {
        error <= self.abs.max(self.rel * value.abs())
    }
}

/// One 21-point Gauss-Kronrod panel on `[a, b]`: `(value, error)`.
pub fn gauss_kronrod_21(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for i in 0..10 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    (value, error)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`: the panel with the
/// largest error estimate is bisected until the tolerance is met. Integrable
/// endpoint singularities are fine since nodes never touch the endpoints.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(McfError::NonFinite("integration bounds"));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let (value, error) = gauss_kronrod_21(&mut f, a, b);
    let mut evals = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    while !tol.reached(total, total_err) && evals < tol.max_evals {
        let worst = heap.pop().expect("nonempty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod_21(&mut f, worst.a, m);
        let (v2, e2) = gauss_kronrod_21(&mut f, m, worst.b);
        evals += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: m,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum from the panels to shed accumulated rounding in the running totals.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = pairwise_sum(&panels.iter().map(|p| p.value).collect::<Vec<_>>());
    let error = panels.iter().map(|p| p.error).sum();
    if !value.is_finite() {
        return Err(McfError::NonFinite("integral"));
    }
    Ok(Quadrature {
        value,
        error,
        evals,
    })
}

/// Integral of `f(x, y)` over the triangle with the given vertices, as an
/// iterated integral in collapsed coordinates centred on the first vertex:
/// `p = v₀ + s((v₁ − v₀) + t(v₂ − v₁))`, `s, t ∈ (0, 1)`, with jacobian
/// `s·|det|`. An integrable point singularity of order `1/r` at `v₀` becomes
/// bounded in these coordinates.
pub fn integrate_triangle(
    f: impl Fn(f64, f64) -> f64,
    vertices: [[f64; 2]; 3],
    tol: Tolerance,
) -> Result<Quadrature> {
    let [v0, v1, v2] = vertices;
    let e1 = [v1[0] - v0[0], v1[1] - v0[1]];
    let e12 = [v2[0] - v1[0], v2[1] - v1[1]];
    let jac = (e1[0] * e12[1] - e1[1] * e12[0]).abs();
    if jac == 0.0 {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let inner_tol = Tolerance {
        abs: tol.abs / (10.0 * jac),
        rel: tol.rel / 10.0,
        max_evals: tol.max_evals / 20,
    };
    let outer_tol = Tolerance {
        abs: tol.abs / jac,
        ..tol
    };
    let mut evals = 0;
    let mut inner_err = 0.0f64;
    let mut failure = None;
    let outer = integrate(
        |s| {
            let r = integrate(
                |t| {
                    s * f(
                        v0[0] + s * (e1[0] + t * e12[0]),
                        v0[1] + s * (e1[1] + t * e12[1]),
                    )
                },
                0.0,
                1.0,
                inner_tol,
            );
            match r {
                Ok(q) => {
                    evals += q.evals;
                    inner_err = inner_err.max(q.error);
                    q.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        outer_tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Quadrature {
        value: outer.value * jac,
        error: (outer.error + inner_err) * jac,
        evals,
    })
}

/// Pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (l, r) = values.split_at(values.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}
