//! Small dense linear algebra over [`Scalar`]: positive cone vectors,
//! square matrices with cached determinant and inverse, and the 1-norm
//! projection onto the unit simplex.

use std::fmt;

use crate::error::{McfError, Result};
use crate::scalar::{sum, Scalar};

/// A point of the open positive cone of dimension `d >= 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeVector<T> {
    coords: Vec<T>,
}

impl<T: Scalar> ConeVector<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(McfError::Domain(format!(
                "cone vectors need dimension >= 2, got {}",
                coords.len()
            )));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(McfError::Domain(format!("non-finite coordinate {c}")));
        }
        if let Some(c) = coords.iter().find(|c| **c <= T::zero()) {
            return Err(McfError::Domain(format!("nonpositive coordinate {c}")));
        }
        Ok(ConeVector { coords })
    }

    pub fn from_i64(coords: &[i64]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| T::from_i64(c)).collect())
    }

    /// Every coordinate `num/den`.
    pub fn from_ratios(coords: &[(i64, i64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&(n, d)| T::from_ratio(n, d)).collect())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn norm_l1(&self) -> T {
        sum(&self.coords)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(Scalar::to_f64).collect()
    }
}

impl<T: Scalar> fmt::Display for ConeVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Rescales `v` to coordinate sum 1.
pub fn normalize_l1<T: Scalar>(v: &ConeVector<T>) -> Result<ConeVector<T>> {
    let norm = v.norm_l1();
    let coords: Vec<T> = v.coords.iter().map(|c| c.clone() / &norm).collect();
    check_finite(&coords, "normalize_l1")?;
    ConeVector::new(coords)
}

/// `⟨x, a⟩ = Σ xᵢ aᵢ`.
pub fn scalar_product<T: Scalar>(x: &[T], a: &[T]) -> Result<T> {
    if x.len() != a.len() {
        return Err(McfError::DimensionMismatch {
            expected: x.len(),
            got: a.len(),
        });
    }
    Ok(dot(x, a))
}

pub(crate) fn dot<T: Scalar>(x: &[T], a: &[T]) -> T {
    x.iter()
        .zip(a)
        .fold(T::zero(), |acc, (u, v)| acc + u.clone() * v)
}

pub(crate) fn check_finite<T: Scalar>(values: &[T], op: &'static str) -> Result<()> {
    if values.iter().all(Scalar::is_finite) {
        Ok(())
    } else {
        Err(McfError::NonFinite(op))
    }
}

/// Dense `d×d` matrix, row-major, with the determinant and (when it exists)
/// the inverse computed once at construction.
#[derive(Clone, Debug)]
pub struct SquareMatrix<T> {
    dim: usize,
    entries: Vec<T>,
    det: T,
    inverse: Option<Vec<T>>,
}

impl<T: Scalar> PartialEq for SquareMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries == other.entries
    }
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn new(dim: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(McfError::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        check_finite(&entries, "SquareMatrix::new")?;
        let (det, inverse) = invert(dim, &entries);
        Ok(SquareMatrix {
            dim,
            entries,
            det,
            inverse,
        })
    }

    pub fn from_rows(rows: &[&[i64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(McfError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            entries.extend(row.iter().map(|&e| T::from_i64(e)));
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![T::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = T::one();
        }
        SquareMatrix {
            dim,
            inverse: Some(entries.clone()),
            entries,
            det: T::one(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> &T {
        &self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn det(&self) -> &T {
        &self.det
    }

    pub fn is_invertible(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn inverse(&self) -> Result<SquareMatrix<T>> {
        let inv = self.inverse.clone().ok_or(McfError::Singular)?;
        Ok(SquareMatrix {
            dim: self.dim,
            inverse: Some(self.entries.clone()),
            det: T::one() / &self.det,
            entries: inv,
        })
    }

    pub fn transpose(&self) -> SquareMatrix<T> {
        let d = self.dim;
        let t = |e: &[T]| {
            (0..d * d)
                .map(|k| e[(k % d) * d + k / d].clone())
                .collect::<Vec<_>>()
        };
        SquareMatrix {
            dim: d,
            entries: t(&self.entries),
            det: self.det.clone(),
            inverse: self.inverse.as_deref().map(t),
        }
    }

    /// `M·v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        mul_vec(self.dim, &self.entries, v)
    }

    /// `M⁻¹·v`.
    pub fn inverse_mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        let inv = self.inverse.as_ref().ok_or(McfError::Singular)?;
        Ok(mul_vec(self.dim, inv, v))
    }

    /// `Mᵀ·v`.
    pub fn transpose_mul_vec(&self, v: &[T]) -> Vec<T> {
        let d = self.dim;
        (0..d)
            .map(|j| {
                (0..d).fold(T::zero(), |acc, i| {
                    acc + self.entries[i * d + j].clone() * &v[i]
                })
            })
            .collect()
    }

    /// `M⁻ᵀ·v`.
    pub fn inverse_transpose_mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        let inv = self.inverse.as_ref().ok_or(McfError::Singular)?;
        let d = self.dim;
        Ok((0..d)
            .map(|j| (0..d).fold(T::zero(), |acc, i| acc + inv[i * d + j].clone() * &v[i]))
            .collect())
    }

    pub fn mul(&self, other: &SquareMatrix<T>) -> Result<SquareMatrix<T>> {
        if self.dim != other.dim {
            return Err(McfError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let d = self.dim;
        let mut out = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).fold(T::zero(), |acc, k| {
                    acc + self.entries[i * d + k].clone() * &other.entries[k * d + j]
                });
            }
        }
        SquareMatrix::new(d, out)
    }

    /// Entrywise conversion; the determinant and inverse are converted
    /// alongside rather than recomputed.
    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> SquareMatrix<U> {
        SquareMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(&f).collect(),
            det: f(&self.det),
            inverse: self
                .inverse
                .as_ref()
                .map(|inv| inv.iter().map(&f).collect()),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|e| *e >= T::zero())
    }
}

/// Matrix-vector product on a cone vector. The result may leave the positive
/// cone; callers decide whether that is an error.
pub fn apply<T: Scalar>(m: &SquareMatrix<T>, v: &ConeVector<T>) -> Result<Vec<T>> {
    if m.dim() != v.dim() {
        return Err(McfError::DimensionMismatch {
            expected: m.dim(),
            got: v.dim(),
        });
    }
    let out = m.mul_vec(v.coords());
    check_finite(&out, "apply")?;
    Ok(out)
}

fn mul_vec<T: Scalar>(d: usize, entries: &[T], v: &[T]) -> Vec<T> {
    (0..d)
        .map(|i| dot(&entries[i * d..(i + 1) * d], v))
        .collect()
}

/// Gauss-Jordan elimination. Exact backends pivot on the first nonzero
/// entry, floats on the largest magnitude.
fn invert<T: Scalar>(d: usize, entries: &[T]) -> (T, Option<Vec<T>>) {
    let mut a = entries.to_vec();
    let mut inv = vec![T::zero(); d * d];
    for i in 0..d {
        inv[i * d + i] = T::one();
    }
    let mut det = T::one();
    for col in 0..d {
        let candidates = (col..d).filter(|&r| !a[r * d + col].is_zero());
        let pivot = if T::EXACT {
            candidates.into_iter().next()
        } else {
            candidates.max_by(|&r, &s| {
                a[r * d + col]
                    .abs()
                    .partial_cmp(&a[s * d + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        };
        let Some(p) = pivot else {
            return (T::zero(), None);
        };
        if p != col {
            for k in 0..d {
                a.swap(p * d + k, col * d + k);
                inv.swap(p * d + k, col * d + k);
            }
            det = -det;
        }
        let pv = a[col * d + col].clone();
        det = det * &pv;
        for k in 0..d {
            a[col * d + k] = a[col * d + k].clone() / &pv;
            inv[col * d + k] = inv[col * d + k].clone() / &pv;
        }
        for r in 0..d {
            if r == col || a[r * d + col].is_zero() {
                continue;
            }
            let factor = a[r * d + col].clone();
            for k in 0..d {
                let t = a[col * d + k].clone() * &factor;
                a[r * d + k] = a[r * d + k].clone() - t;
                let t = inv[col * d + k].clone() * &factor;
                inv[r * d + k] = inv[r * d + k].clone() - t;
            }
        }
    }
    (det, Some(inv))
}
