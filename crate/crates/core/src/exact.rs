//! Exact rational linear algebra: rank, kernels, column spaces, subspace
//! intersections and sums. Rank is discontinuous, so every predicate that
//! depends on it runs over `BigRational` entries; floating inputs are
//! rationalized first via continued fractions.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Rat = BigRational;

/// Dense rational matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatMat {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

pub fn rat_i(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Best rational approximation of `x` with `|x - p/q| <= tol`, by
/// continued-fraction convergents.
pub fn rationalize(x: f64, tol: f64) -> Rat {
    assert!(x.is_finite(), "cannot rationalize a non-finite value");
    if x == 0.0 {
        return Rat::zero();
    }
    let negative = x < 0.0;
    let mut target = x.abs();
    // convergents p_k/q_k of the continued fraction of |x|
    let (mut p0, mut q0) = (BigInt::one(), BigInt::zero());
    let (mut p1, mut q1) = (BigInt::from(target.floor() as i64), BigInt::one());
    target -= target.floor();
    for _ in 0..64 {
        let approx = Rat::new(p1.clone(), q1.clone());
        let val = rat_to_f64(&approx);
        if (val - x.abs()).abs() <= tol || target == 0.0 {
            break;
        }
        let recip = 1.0 / target;
        let a = recip.floor();
        target = recip - a;
        let a = BigInt::from(a as i64);
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
    }
    let r = Rat::new(p1, q1);
    if negative {
        -r
    } else {
        r
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    // good enough for display / diagnostics; exact paths never round-trip
    let num = r.numer();
    let den = r.denom();
    match (num.to_string().parse::<f64>(), den.to_string().parse::<f64>()) {
        (Ok(n), Ok(d)) => n / d,
        _ => f64::NAN,
    }
}

impl RatMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMat {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = RatMat::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = Rat::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c));
        RatMat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        RatMat::from_rows(
            rows.iter()
                .map(|row| row.iter().map(|&v| rat_i(v)).collect())
                .collect(),
        )
    }

    /// Rationalize a row-major f64 matrix at the given tolerance.
    pub fn from_f64_rows(rows: &[Vec<f64>], tol: f64) -> Self {
        RatMat::from_rows(
            rows.iter()
                .map(|row| row.iter().map(|&v| rationalize(v, tol)).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> &Rat {
        &self.data[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut Rat {
        &mut self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> RatMat {
        let mut t = RatMat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *t.at_mut(c, r) = self.at(r, c).clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &RatMat) -> RatMat {
        assert_eq!(self.cols, other.rows);
        let mut out = RatMat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.at(r, k).is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let add = self.at(r, k) * other.at(k, c);
                    *out.at_mut(r, c) += add;
                }
            }
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &RatMat) -> RatMat {
        assert_eq!(self.rows, other.rows);
        let mut out = RatMat::zeros(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *out.at_mut(r, c) = self.at(r, c).clone();
            }
            for c in 0..other.cols {
                *out.at_mut(r, self.cols + c) = other.at(r, c).clone();
            }
        }
        out
    }

    pub fn column(&self, c: usize) -> Vec<Rat> {
        (0..self.rows).map(|r| self.at(r, c).clone()).collect()
    }

    pub fn from_columns(rows: usize, cols: Vec<Vec<Rat>>) -> RatMat {
        let mut m = RatMat::zeros(rows, cols.len());
        for (c, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (r, v) in col.iter().enumerate() {
                *m.at_mut(r, c) = v.clone();
            }
        }
        m
    }

    /// Reduced row echelon form in place; returns pivot column indices.
    pub fn rref_in_place(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row >= self.rows {
                break;
            }
            let pivot_row = (row..self.rows).find(|&r| !self.at(r, col).is_zero());
            let Some(pr) = pivot_row else { continue };
            if pr != row {
                for c in 0..self.cols {
                    let tmp = self.at(pr, c).clone();
                    *self.at_mut(pr, c) = self.at(row, c).clone();
                    *self.at_mut(row, c) = tmp;
                }
            }
            let inv = self.at(row, col).clone();
            for c in 0..self.cols {
                let v = self.at(row, c).clone() / inv.clone();
                *self.at_mut(row, c) = v;
            }
            for r in 0..self.rows {
                if r != row && !self.at(r, col).is_zero() {
                    let factor = self.at(r, col).clone();
                    for c in 0..self.cols {
                        let sub = &factor * self.at(row, c);
                        *self.at_mut(r, c) -= sub;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref_in_place().len()
    }

    /// Basis of the kernel (null space), one column per basis vector.
    pub fn kernel(&self) -> RatMat {
        let mut m = self.clone();
        let pivots = m.rref_in_place();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut cols = Vec::new();
        for &f in &free {
            let mut v = vec![Rat::zero(); self.cols];
            v[f] = Rat::one();
            for (pr, &pc) in pivots.iter().enumerate() {
                v[pc] = -m.at(pr, f).clone();
            }
            cols.push(v);
        }
        RatMat::from_columns(self.cols, cols)
    }
}

/// A subspace of Q^n carried by a full-column-rank basis matrix (n x dim).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    basis: RatMat,
}

impl Subspace {
    /// Span of the columns of `m`; reduces to a full-rank basis.
    pub fn span(m: &RatMat) -> Subspace {
        // RREF of the transpose gives a canonical row basis of the column space.
        let mut t = m.transpose();
        let pivots = t.rref_in_place();
        let dim = pivots.len();
        let mut basis = RatMat::zeros(m.rows(), dim);
        for r in 0..dim {
            for c in 0..m.rows() {
                *basis.at_mut(c, r) = t.at(r, c).clone();
            }
        }
        Subspace { basis }
    }

    pub fn zero(ambient: usize) -> Subspace {
        Subspace {
            basis: RatMat::zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Subspace {
        Subspace {
            basis: RatMat::identity(ambient),
        }
    }

    pub fn ambient(&self) -> usize {
        self.basis.rows()
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn basis(&self) -> &RatMat {
        &self.basis
    }

    /// Canonical (RREF-of-transpose) basis makes equality a plain compare.
    pub fn eq_space(&self, other: &Subspace) -> bool {
        self.basis == other.basis
    }

    /// Image under a linear map (matrix acting on the left).
    pub fn image(&self, map: &RatMat) -> Subspace {
        Subspace::span(&map.mul(&self.basis))
    }

    /// Sum of subspaces.
    pub fn sum(&self, other: &Subspace) -> Subspace {
        Subspace::span(&self.basis.hcat(&other.basis))
    }

    /// Intersection via the kernel of `[A | -B]`.
    pub fn intersect(&self, other: &Subspace) -> Subspace {
        assert_eq!(self.ambient(), other.ambient());
        if self.dim() == 0 || other.dim() == 0 {
            return Subspace::zero(self.ambient());
        }
        let mut neg = other.basis.clone();
        for r in 0..neg.rows() {
            for c in 0..neg.cols() {
                let v = -neg.at(r, c).clone();
                *neg.at_mut(r, c) = v;
            }
        }
        let stacked = self.basis.hcat(&neg);
        let ker = stacked.kernel();
        // first dim(self) kernel coordinates parametrize the intersection
        let mut cols = Vec::new();
        for c in 0..ker.cols() {
            let coeffs: Vec<Rat> = (0..self.dim()).map(|r| ker.at(r, c).clone()).collect();
            let mut v = vec![Rat::zero(); self.ambient()];
            for (bc, coeff) in coeffs.iter().enumerate() {
                if coeff.is_zero() {
                    continue;
                }
                for r in 0..self.ambient() {
                    v[r] += coeff * self.basis.at(r, bc);
                }
            }
            cols.push(v);
        }
        Subspace::span(&RatMat::from_columns(self.ambient(), cols))
    }

    /// Orthogonal complement with respect to the standard inner product.
    pub fn orthogonal_complement(&self) -> Subspace {
        // kernel of B^T
        Subspace::span(&self.basis.transpose().kernel())
    }

    /// Orthogonal projection matrix onto this subspace: B (B^T B)^-1 B^T.
    pub fn projector(&self) -> RatMat {
        let n = self.ambient();
        if self.dim() == 0 {
            return RatMat::zeros(n, n);
        }
        let bt = self.basis.transpose();
        let gram = bt.mul(&self.basis);
        let gram_inv = invert(&gram).expect("basis has full column rank, Gram matrix invertible");
        self.basis.mul(&gram_inv).mul(&bt)
    }

    pub fn contains(&self, v: &[Rat]) -> bool {
        let m = RatMat::from_columns(self.ambient(), vec![v.to_vec()]);
        self.sum(&Subspace::span(&m)).dim() == self.dim()
    }
}

/// Inverse of a square rational matrix, if it exists.
pub fn invert(m: &RatMat) -> Option<RatMat> {
    assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    let mut aug = m.hcat(&RatMat::identity(n));
    let pivots = aug.rref_in_place();
    if pivots.len() != n || pivots.iter().enumerate().any(|(i, &p)| p != i) {
        return None;
    }
    let mut inv = RatMat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            *inv.at_mut(r, c) = aug.at(r, n + c).clone();
        }
    }
    Some(inv)
}

/// Express each column of `vectors` in the given basis (columns of
/// `basis`); `None` unless all columns lie in the span.
pub fn coordinates_in_basis(basis: &RatMat, vectors: &RatMat) -> Option<RatMat> {
    assert_eq!(basis.rows(), vectors.rows());
    // solve basis * X = vectors by RREF of [basis | vectors]
    let mut aug = basis.hcat(vectors);
    let pivots = aug.rref_in_place();
    if pivots.iter().any(|&p| p >= basis.cols()) {
        return None; // inconsistent: some vector leaves the span
    }
    let mut x = RatMat::zeros(basis.cols(), vectors.cols());
    for (pr, &pc) in pivots.iter().enumerate() {
        for c in 0..vectors.cols() {
            *x.at_mut(pc, c) = aug.at(pr, basis.cols() + c).clone();
        }
    }
    Some(x)
}

/// Signed value rendered as "num/den" (or plain integer).
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse "num/den" or a plain integer.
pub fn rat_from_string(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n.trim().parse().ok()?;
        let den: BigInt = d.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        Some(Rat::new(num, den))
    } else {
        let num: BigInt = s.parse().ok()?;
        Some(Rat::from_integer(num))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationalize_recovers_simple_fractions() {
        assert_eq!(rationalize(0.5, 1e-12), rat(1, 2));
        assert_eq!(rationalize(-0.75, 1e-12), rat(-3, 4));
        assert_eq!(rationalize(1.0 / 3.0, 1e-12), rat(1, 3));
        assert_eq!(rationalize(0.0, 1e-12), Rat::zero());
    }

    #[test]
    fn rank_and_kernel() {
        let m = RatMat::from_i64_rows(&[&[1, 2, 3], &[2, 4, 6], &[0, 1, 1]]);
        assert_eq!(m.rank(), 2);
        let k = m.kernel();
        assert_eq!(k.cols(), 1);
        // check M k = 0
        let prod = m.mul(&k);
        for r in 0..prod.rows() {
            assert!(prod.at(r, 0).is_zero());
        }
    }

    #[test]
    fn subspace_intersection_of_planes() {
        // two planes in Q^3 intersect in a line
        let a = Subspace::span(&RatMat::from_i64_rows(&[&[1, 0], &[0, 1], &[0, 0]]));
        let b = Subspace::span(&RatMat::from_i64_rows(&[&[1, 0], &[0, 0], &[0, 1]]));
        let cap = a.intersect(&b);
        assert_eq!(cap.dim(), 1);
        assert!(cap.contains(&[rat_i(1), rat_i(0), rat_i(0)]));
    }

    #[test]
    fn sum_and_complement_dimensions() {
        let a = Subspace::span(&RatMat::from_i64_rows(&[&[1], &[1], &[0]]));
        let b = Subspace::span(&RatMat::from_i64_rows(&[&[0], &[1], &[1]]));
        assert_eq!(a.sum(&b).dim(), 2);
        assert_eq!(a.orthogonal_complement().dim(), 2);
        let p = a.projector();
        // projector is idempotent
        assert_eq!(p.mul(&p), p);
    }

    #[test]
    fn canonical_equality() {
        let a = Subspace::span(&RatMat::from_i64_rows(&[&[1, 1], &[0, 2], &[0, 0]]));
        let b = Subspace::span(&RatMat::from_i64_rows(&[&[2, 1], &[2, 3], &[0, 0]]));
        assert!(a.eq_space(&b));
    }

    #[test]
    fn invert_and_coordinates() {
        let m = RatMat::from_i64_rows(&[&[2, 1], &[1, 1]]);
        let inv = invert(&m).unwrap();
        assert_eq!(m.mul(&inv), RatMat::identity(2));

        let basis = RatMat::from_i64_rows(&[&[1, 0], &[1, 1], &[0, 2]]);
        let v = RatMat::from_i64_rows(&[&[2], &[3], &[2]]);
        let x = coordinates_in_basis(&basis, &v).unwrap();
        assert_eq!(basis.mul(&x), v);

        let outside = RatMat::from_i64_rows(&[&[1], &[0], &[0]]);
        assert!(coordinates_in_basis(&basis, &outside).is_none());
    }

    #[test]
    fn rational_string_roundtrip() {
        for s in ["3", "-7/2", "0", "22/7"] {
            let r = rat_from_string(s).unwrap();
            assert_eq!(rat_to_string(&r), s);
        }
        assert!(rat_from_string("1/0").is_none());
        assert!(rat_from_string("abc").is_none());
    }
}
