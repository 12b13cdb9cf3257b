//! Open polyhedral cones `{x : c·x > 0 for every form c}` with integer forms.
//!
//! Every partition piece in this crate (branch cones, image cones, dual
//! cones and their pieces) is one of these, which lets membership tests,
//! linear images and extreme rays be computed uniformly.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    /// Some form vanishes and none is negative.
    Boundary,
    Outside,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cone {
    dim: usize,
    forms: Vec<Vec<i64>>,
}

impl Cone {
    pub fn new(dim: usize, forms: Vec<Vec<i64>>) -> Self {
        assert!(forms.iter().all(|f| f.len() == dim), "form dimension");
        Cone { dim, forms }
    }

    /// The open positive cone.
    pub fn positive(dim: usize) -> Self {
        Cone::new(dim, (0..dim).map(|i| unit(dim, i, 1)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn forms(&self) -> &[Vec<i64>] {
        &self.forms
    }

    /// Adds the positivity forms `xᵢ > 0`.
    pub fn with_positivity(mut self) -> Self {
        for i in 0..self.dim {
            let f = unit(self.dim, i, 1);
            if !self.forms.contains(&f) {
                self.forms.push(f);
            }
        }
        self
    }

    pub fn intersect(&self, other: &Cone) -> Cone {
        let mut forms = self.forms.clone();
        for f in &other.forms {
            if !forms.contains(f) {
                forms.push(f.clone());
            }
        }
        Cone::new(self.dim, forms)
    }

    pub fn membership<T: Scalar>(&self, x: &[T]) -> Membership {
        let mut on_boundary = false;
        for f in &self.forms {
            let v = eval_form(f, x);
            if v < T::zero() {
                return Membership::Outside;
            }
            if v.is_zero() {
                on_boundary = true;
            }
        }
        if on_boundary {
            Membership::Boundary
        } else {
            Membership::Inside
        }
    }

    pub fn contains<T: Scalar>(&self, x: &[T]) -> bool {
        self.membership(x) == Membership::Inside
    }

    /// Image of the cone under `x ↦ M⁻¹x`: the forms become `Mᵀc`.
    pub fn image_under_inverse(&self, m: &SquareMatrix<BigRational>) -> Cone {
        let forms = self
            .forms
            .iter()
            .map(|f| integer_form(&m.transpose_mul_vec(&to_q(f))))
            .collect();
        Cone::new(self.dim, forms)
    }

    /// Image of the cone under `a ↦ Mᵀa`: the forms become `M⁻¹c`.
    pub fn image_under_transpose(&self, m: &SquareMatrix<BigRational>) -> Cone {
        let forms = self
            .forms
            .iter()
            .map(|f| integer_form(&m.inverse_mul_vec(&to_q(f)).expect("invertible")))
            .collect();
        Cone::new(self.dim, forms)
    }

    /// Extreme rays of the closed cone, each scaled to a primitive integer
    /// vector and sorted. Assumes the cone is pointed and full-dimensional.
    pub fn extreme_rays(&self) -> Vec<Vec<BigInt>> {
        let d = self.dim;
        let forms: Vec<Vec<BigRational>> = self.forms.iter().map(|f| to_q(f)).collect();
        let mut rays: Vec<Vec<BigInt>> = Vec::new();
        for subset in combinations(forms.len(), d - 1) {
            let rows: Vec<&Vec<BigRational>> = subset.iter().map(|&i| &forms[i]).collect();
            let Some(ray) = nullspace_line(d, &rows) else {
                continue;
            };
            for candidate in [ray.clone(), ray.iter().map(|v| -v).collect()] {
                let ok = forms.iter().all(|f| !dot_q(f, &candidate).is_negative());
                if ok {
                    let r = primitive(&candidate);
                    if !rays.contains(&r) {
                        rays.push(r);
                    }
                }
            }
        }
        rays.sort();
        rays
    }
}

fn unit(dim: usize, i: usize, v: i64) -> Vec<i64> {
    let mut f = vec![0; dim];
    f[i] = v;
    f
}

fn eval_form<T: Scalar>(f: &[i64], x: &[T]) -> T {
    f.iter().zip(x).fold(T::zero(), |acc, (&c, v)| match c {
        0 => acc,
        1 => acc + v,
        -1 => acc - v,
        c => acc + T::from_i64(c) * v,
    })
}

fn to_q(f: &[i64]) -> Vec<BigRational> {
    f.iter().map(|&c| BigRational::from_i64(c)).collect()
}

fn dot_q(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Scales a rational vector to the primitive integer vector with the same
/// direction.
pub fn primitive(v: &[BigRational]) -> Vec<BigInt> {
    let lcm = v.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let ints: Vec<BigInt> = v.iter().map(|q| (q * &lcm).to_integer()).collect();
    let gcd = ints.iter().fold(BigInt::zero(), |acc, n| acc.gcd(n));
    if gcd.is_zero() {
        return ints;
    }
    ints.into_iter().map(|n| n / &gcd).collect()
}

fn integer_form(v: &[BigRational]) -> Vec<i64> {
    primitive(v)
        .iter()
        .map(|n| n.to_i64().expect("form coefficients fit in i64"))
        .collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Spanning vector of the null space of `rows` when it is one-dimensional.
fn nullspace_line(d: usize, rows: &[&Vec<BigRational>]) -> Option<Vec<BigRational>> {
    let mut a: Vec<Vec<BigRational>> = rows.iter().map(|r| r.to_vec()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..d {
        let Some(p) = (r..a.len()).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let pv = a[r][c].clone();
        for v in a[r].iter_mut() {
            *v = &*v / &pv;
        }
        for i in 0..a.len() {
            if i != r && !a[i][c].is_zero() {
                let factor = a[i][c].clone();
                let pivot_row = a[r].clone();
                for (v, p) in a[i].iter_mut().zip(&pivot_row) {
                    *v = &*v - p * &factor;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == a.len() {
            break;
        }
    }
    if pivots.len() != d - 1 {
        return None;
    }
    let free = (0..d).find(|c| !pivots.contains(c))?;
    let mut v = vec![BigRational::zero(); d];
    v[free] = BigRational::one();
    for (row, &pc) in pivots.iter().enumerate() {
        v[pc] = -a[row][free].clone();
    }
    Some(v)
}
