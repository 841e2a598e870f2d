//! Exact truncated power series in `z` (edges), `u` (root face valency) and a
//! vector of marking variables.
//!
//! Coefficients live in a sparse map keyed by `(n, j, k)` where `n` is the
//! `z`-degree, `j` the `u`-degree and `k` the multidegree in the marking
//! variables. The marking variables are whatever the caller decides; the
//! enumeration module uses the shifted variables `y = x - 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeriesError {
    #[error("marking arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("coefficient z^{n} with x-degree {k} lies outside the truncation")]
    OutOfTruncation { n: u32, k: u32 },
    #[error("dividing by u^{shift} leaves a negative u-power at z^{n}")]
    NotDivisible { n: u32, shift: u32 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Ring of series coefficients.
pub trait Coefficient:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
{
    fn from_i64(v: i64) -> Self;
    fn to_rational(&self) -> Rational;
    /// `None` when the value is not representable in this ring.
    fn from_rational(r: &Rational) -> Option<Self>;
    fn is_negative(&self) -> bool;
}

impl Coefficient for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn to_rational(&self) -> Rational {
        Rational::from_integer(self.clone())
    }
    fn from_rational(r: &Rational) -> Option<Self> {
        r.is_integer().then(|| r.to_integer())
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
}

impl Coefficient for Rational {
    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn to_rational(&self) -> Rational {
        self.clone()
    }
    fn from_rational(r: &Rational) -> Option<Self> {
        Some(r.clone())
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
}

/// Index of one coefficient: `z^n u^j x^k`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub n: u32,
    pub j: u32,
    pub k: Vec<u32>,
}

impl Monomial {
    pub fn new(n: u32, j: u32, k: Vec<u32>) -> Self {
        Monomial { n, j, k }
    }

    pub fn x_degree(&self) -> u32 {
        self.k.iter().sum()
    }
}

/// Linear bound `j <= per_z * n + offset` on the `u`-degree at `z^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UBound {
    pub per_z: u32,
    pub offset: u32,
}

impl UBound {
    /// Root face valency of an `n`-edge map is at most `2n`.
    pub const MAPS: UBound = UBound { per_z: 2, offset: 0 };

    pub fn max_u(&self, n: u32) -> u32 {
        self.per_z * n + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries<C: Coefficient = Rational> {
    z_order: u32,
    x_arity: usize,
    x_degree_bound: u32,
    u_bound: Option<UBound>,
    coeffs: BTreeMap<Monomial, C>,
}

impl<C: Coefficient> TruncatedSeries<C> {
    /// Zero series retaining `z^0..=z^z_order` and total marking degree `<= x_degree_bound`.
    pub fn zero(z_order: u32, x_arity: usize, x_degree_bound: u32) -> Self {
        TruncatedSeries {
            z_order,
            x_arity,
            x_degree_bound,
            u_bound: None,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(z_order: u32, x_arity: usize, x_degree_bound: u32, c: C) -> Self {
        let mut s = Self::zero(z_order, x_arity, x_degree_bound);
        s.set(Monomial::new(0, 0, vec![0; x_arity]), c);
        s
    }

    pub fn one(z_order: u32, x_arity: usize, x_degree_bound: u32) -> Self {
        Self::constant(z_order, x_arity, x_degree_bound, C::one())
    }

    /// Single term `c z^n u^j x^k`, dropped if outside the truncation.
    pub fn monomial(
        z_order: u32,
        x_arity: usize,
        x_degree_bound: u32,
        mono: Monomial,
        c: C,
    ) -> Self {
        let mut s = Self::zero(z_order, x_arity, x_degree_bound);
        s.set(mono, c);
        s
    }

    pub fn with_u_bound(mut self, bound: UBound) -> Self {
        self.u_bound = Some(bound);
        let keep: Vec<_> = self
            .coeffs
            .keys()
            .filter(|m| m.j > bound.max_u(m.n))
            .cloned()
            .collect();
        for m in keep {
            self.coeffs.remove(&m);
        }
        self
    }

    pub fn z_order(&self) -> u32 {
        self.z_order
    }

    pub fn x_arity(&self) -> usize {
        self.x_arity
    }

    pub fn x_degree_bound(&self) -> u32 {
        self.x_degree_bound
    }

    pub fn u_bound(&self) -> Option<UBound> {
        self.u_bound
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.coeffs.iter()
    }

    fn retains(&self, m: &Monomial) -> bool {
        m.n <= self.z_order
            && m.x_degree() <= self.x_degree_bound
            && self.u_bound.map_or(true, |b| m.j <= b.max_u(m.n))
    }

    /// Sets a coefficient; zero values and monomials outside the truncation are dropped.
    pub fn set(&mut self, m: Monomial, c: C) {
        assert_eq!(m.k.len(), self.x_arity, "marking arity mismatch");
        if !self.retains(&m) || c.is_zero() {
            self.coeffs.remove(&m);
        } else {
            self.coeffs.insert(m, c);
        }
    }

    pub fn add_to(&mut self, m: Monomial, c: &C) {
        if c.is_zero() || !self.retains(&m) {
            return;
        }
        assert_eq!(m.k.len(), self.x_arity, "marking arity mismatch");
        match self.coeffs.get_mut(&m) {
            Some(v) => {
                let nv = v.clone() + c;
                if nv.is_zero() {
                    self.coeffs.remove(&m);
                } else {
                    *v = nv;
                }
            }
            None => {
                self.coeffs.insert(m, c.clone());
            }
        }
    }

    /// Exact coefficient of `z^n u^j x^k`; absent entries are zero.
    pub fn coeff(&self, n: u32, j: u32, k: &[u32]) -> Result<C, SeriesError> {
        if k.len() != self.x_arity {
            return Err(SeriesError::ArityMismatch(k.len(), self.x_arity));
        }
        let deg: u32 = k.iter().sum();
        if n > self.z_order || deg > self.x_degree_bound {
            return Err(SeriesError::OutOfTruncation { n, k: deg });
        }
        Ok(self
            .coeffs
            .get(&Monomial::new(n, j, k.to_vec()))
            .cloned()
            .unwrap_or_else(C::zero))
    }

    fn check_arity(&self, other: &Self) -> Result<(), SeriesError> {
        if self.x_arity != other.x_arity {
            Err(SeriesError::ArityMismatch(self.x_arity, other.x_arity))
        } else {
            Ok(())
        }
    }

    fn joint_shape(&self, other: &Self) -> Self {
        // Keep a shared bound only; mixed bounds give an unbounded result.
        let u_bound = if self.u_bound == other.u_bound {
            self.u_bound
        } else {
            None
        };
        TruncatedSeries {
            z_order: self.z_order.min(other.z_order),
            x_arity: self.x_arity,
            x_degree_bound: self.x_degree_bound.min(other.x_degree_bound),
            u_bound,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_arity(other)?;
        let mut out = self.joint_shape(other);
        for (m, c) in self.coeffs.iter().chain(other.coeffs.iter()) {
            out.add_to(m.clone(), c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.try_add(&other.neg_ref())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_arity(other)?;
        let mut out = self.joint_shape(other);
        let mut k = vec![0u32; self.x_arity];
        for (ma, ca) in &self.coeffs {
            if ma.n > out.z_order {
                break;
            }
            for (mb, cb) in &other.coeffs {
                let n = ma.n + mb.n;
                if n > out.z_order {
                    break;
                }
                let mut deg = 0;
                for i in 0..k.len() {
                    k[i] = ma.k[i] + mb.k[i];
                    deg += k[i];
                }
                if deg > out.x_degree_bound {
                    continue;
                }
                let prod = ca.clone() * cb;
                out.add_to(Monomial::new(n, ma.j + mb.j, k.clone()), &prod);
            }
        }
        Ok(out)
    }

    fn neg_ref(&self) -> Self {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = -v.clone();
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = self.clone();
        out.coeffs.clear();
        for (m, v) in &self.coeffs {
            out.set(m.clone(), v.clone() * c);
        }
        out
    }

    /// `(F(z,u) - F(z,1)) / (u - 1)`, computed per `(n, k)` as the exact polynomial quotient.
    pub fn divided_difference_u(&self) -> Self {
        let mut out = self.clone();
        out.coeffs.clear();
        // Quotient coefficient at u^i is the sum of F's coefficients at u^{j}, j > i.
        for (m, c) in &self.coeffs {
            for i in 0..m.j {
                out.add_to(Monomial::new(m.n, i, m.k.clone()), c);
            }
        }
        out
    }

    /// `F(z, 1)` as a series with only `u^0` terms.
    pub fn eval_u_one(&self) -> Self {
        let mut out = self.clone();
        out.coeffs.clear();
        for (m, c) in &self.coeffs {
            out.add_to(Monomial::new(m.n, 0, m.k.clone()), c);
        }
        out
    }

    /// `[u^j] F` as a series with only `u^0` terms.
    pub fn u_coefficient(&self, j: u32) -> Self {
        let mut out = self.clone();
        out.coeffs.clear();
        for (m, c) in &self.coeffs {
            if m.j == j {
                out.set(Monomial::new(m.n, 0, m.k.clone()), c.clone());
            }
        }
        out
    }

    /// Multiplies by `z^dz u^du x^dk`; a negative `du` must divide exactly.
    pub fn shift(&self, dz: u32, du: i32, dk: &[u32]) -> Result<Self, SeriesError> {
        if dk.len() != self.x_arity {
            return Err(SeriesError::ArityMismatch(dk.len(), self.x_arity));
        }
        let mut out = self.clone();
        out.coeffs.clear();
        for (m, c) in &self.coeffs {
            let j = m.j as i64 + du as i64;
            if j < 0 {
                return Err(SeriesError::NotDivisible {
                    n: m.n,
                    shift: du.unsigned_abs(),
                });
            }
            let k: Vec<u32> = m.k.iter().zip(dk).map(|(a, b)| a + b).collect();
            out.set(Monomial::new(m.n + dz, j as u32, k), c.clone());
        }
        Ok(out)
    }

    /// Drops all terms with `z`-degree above `z_order`.
    /// Drops coefficients above z-degree `n` but keeps the declared order.
    pub fn clipped(&self, n: u32) -> Self {
        let mut out = self.clone();
        out.coeffs.retain(|m, _| m.n <= n);
        out
    }

    pub fn truncate_z(&self, z_order: u32) -> Self {
        let mut out = self.clone();
        out.z_order = self.z_order.min(z_order);
        out.coeffs.retain(|m, _| m.n <= z_order);
        out
    }

    /// Terms of `z`-degree exactly `n`.
    pub fn z_slice(&self, n: u32) -> impl Iterator<Item = (&Monomial, &C)> {
        let lo = Monomial::new(n, 0, vec![0; self.x_arity]);
        self.coeffs.range(lo..).take_while(move |(m, _)| m.n == n)
    }

    pub fn min_coefficient_nonnegative(&self) -> bool {
        self.coeffs.values().all(|c| !c.is_negative())
    }

    pub fn map_coefficients<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> TruncatedSeries<D> {
        let mut out = TruncatedSeries::<D> {
            z_order: self.z_order,
            x_arity: self.x_arity,
            x_degree_bound: self.x_degree_bound,
            u_bound: self.u_bound,
            coeffs: BTreeMap::new(),
        };
        for (m, c) in &self.coeffs {
            out.set(m.clone(), f(c));
        }
        out
    }

    pub fn to_rational_series(&self) -> TruncatedSeries<Rational> {
        self.map_coefficients(|c| c.to_rational())
    }

    /// Line format `n j k1,...,kr num/den`, one line per nonzero coefficient.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (m, c) in &self.coeffs {
            let r = c.to_rational();
            let ks: Vec<String> = m.k.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!(
                "{} {} {} {}/{}\n",
                m.n,
                m.j,
                ks.join(","),
                r.numer(),
                r.denom()
            ));
        }
        s
    }

    /// Parses the dump format into a series with the given truncation.
    pub fn load(
        text: &str,
        z_order: u32,
        x_arity: usize,
        x_degree_bound: u32,
    ) -> Result<Self, SeriesError> {
        let mut out = Self::zero(z_order, x_arity, x_degree_bound);
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| SeriesError::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            let (n, j, ks, val) = match parts.as_slice() {
                [n, j, val] if x_arity == 0 => (*n, *j, "", *val),
                [n, j, ks, val] => (*n, *j, *ks, *val),
                _ => return Err(err("expected `n j k1,...,kr num/den`")),
            };
            let n: u32 = n.parse().map_err(|_| err("bad z-degree"))?;
            let j: u32 = j.parse().map_err(|_| err("bad u-degree"))?;
            let k: Vec<u32> = if ks.is_empty() {
                Vec::new()
            } else {
                ks.split(',')
                    .map(|t| t.parse::<u32>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| err("bad x-multidegree"))?
            };
            if k.len() != x_arity {
                return Err(err("x-multidegree has the wrong arity"));
            }
            let r = parse_rational(val).ok_or_else(|| err("bad rational"))?;
            let c = C::from_rational(&r).ok_or_else(|| err("value not in coefficient ring"))?;
            out.set(Monomial::new(n, j, k), c);
        }
        Ok(out)
    }
}

pub fn parse_rational(s: &str) -> Option<Rational> {
    match s.split_once('/') {
        Some((a, b)) => {
            let d = BigInt::from_str(b).ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(BigInt::from_str(a).ok()?, d))
        }
        None => Some(Rational::from_integer(BigInt::from_str(s).ok()?)),
    }
}

impl<C: Coefficient> Add for &TruncatedSeries<C> {
    type Output = TruncatedSeries<C>;
    /// Panics on arity mismatch; use `try_add` to get an error instead.
    fn add(self, rhs: Self) -> TruncatedSeries<C> {
        self.try_add(rhs).expect("series_add")
    }
}

impl<C: Coefficient> Sub for &TruncatedSeries<C> {
    type Output = TruncatedSeries<C>;
    fn sub(self, rhs: Self) -> TruncatedSeries<C> {
        self.try_sub(rhs).expect("series_sub")
    }
}

impl<C: Coefficient> Mul for &TruncatedSeries<C> {
    type Output = TruncatedSeries<C>;
    fn mul(self, rhs: Self) -> TruncatedSeries<C> {
        self.try_mul(rhs).expect("series_mul")
    }
}

impl<C: Coefficient> Neg for &TruncatedSeries<C> {
    type Output = TruncatedSeries<C>;
    fn neg(self) -> TruncatedSeries<C> {
        self.neg_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64) -> Rational {
        Rational::from_i64(a)
    }

    fn poly_u(z_order: u32, n: u32, cs: &[(u32, i64)]) -> TruncatedSeries {
        let mut s = TruncatedSeries::zero(z_order, 0, 0);
        for &(j, c) in cs {
            s.set(Monomial::new(n, j, vec![]), q(c));
        }
        s
    }

    #[test]
    fn add_examples() {
        let f = poly_u(3, 1, &[(2, 1), (1, 1)]);
        let zero = TruncatedSeries::zero(3, 0, 0);
        assert_eq!(&zero + &f, f);
        assert!((&f + &(-&f)).is_zero());
        let g = poly_u(3, 1, &[(1, 1)]);
        assert_eq!(&f + &g, poly_u(3, 1, &[(2, 1), (1, 2)]));
    }

    #[test]
    fn mul_examples() {
        let f = poly_u(3, 0, &[(2, 1), (1, 1)]);
        let one = TruncatedSeries::one(3, 0, 0);
        assert_eq!(&one * &f, f);
        assert_eq!(&f * &f, poly_u(3, 0, &[(4, 1), (3, 2), (2, 1)]));
        // M = 1 + z(u^2 + u): [z^1] M^2 = 2u^2 + 2u
        let m = &TruncatedSeries::one(1, 0, 0) + &poly_u(1, 1, &[(2, 1), (1, 1)]);
        let sq = &m * &m;
        assert_eq!(sq.coeff(1, 2, &[]).unwrap(), q(2));
        assert_eq!(sq.coeff(1, 1, &[]).unwrap(), q(2));
    }

    #[test]
    fn divided_difference_examples() {
        assert!(TruncatedSeries::<Rational>::one(2, 0, 0)
            .divided_difference_u()
            .is_zero());
        assert_eq!(
            poly_u(2, 0, &[(2, 1)]).divided_difference_u(),
            poly_u(2, 0, &[(1, 1), (0, 1)])
        );
        assert_eq!(
            poly_u(2, 1, &[(2, 1), (1, 1)]).divided_difference_u(),
            poly_u(2, 1, &[(1, 1), (0, 2)])
        );
    }

    #[test]
    fn coeff_out_of_truncation() {
        let s = TruncatedSeries::<Rational>::one(2, 1, 1);
        assert!(s.coeff(3, 0, &[0]).is_err());
        assert!(s.coeff(0, 0, &[2]).is_err());
        assert!(s.coeff(0, 0, &[0, 0]).is_err());
        assert_eq!(s.coeff(0, 0, &[0]).unwrap(), q(1));
    }

    #[test]
    fn arity_mismatch_is_error() {
        let a = TruncatedSeries::<Rational>::one(2, 1, 1);
        let b = TruncatedSeries::<Rational>::one(2, 2, 1);
        assert_eq!(a.try_add(&b), Err(SeriesError::ArityMismatch(1, 2)));
        assert!(a.try_mul(&b).is_err());
    }

    #[test]
    fn dump_load_roundtrip() {
        let mut s = TruncatedSeries::<Rational>::zero(4, 2, 3);
        s.set(Monomial::new(1, 2, vec![1, 0]), Rational::new(3.into(), 7.into()));
        s.set(Monomial::new(3, 0, vec![0, 2]), q(-5));
        let text = s.dump();
        assert!(text.contains("1 2 1,0 3/7"));
        let back = TruncatedSeries::<Rational>::load(&text, 4, 2, 3).unwrap();
        assert_eq!(back, s);
        assert!(TruncatedSeries::<Rational>::load("1 2 x 1/2", 4, 2, 3).is_err());
    }

    #[test]
    fn u_bound_drops_terms() {
        let s = poly_u(3, 1, &[(3, 1), (2, 1)]).with_u_bound(UBound::MAPS);
        assert_eq!(s.coeff(1, 3, &[]).unwrap(), q(0));
        assert_eq!(s.coeff(1, 2, &[]).unwrap(), q(1));
    }
}
