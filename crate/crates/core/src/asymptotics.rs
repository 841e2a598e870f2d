//! Singular expansion of the marked map equation near `x = 1`.
//!
//! The unknowns are `v = U - 1`, `g = M(z, U)`, `w = (g - M(z, 1)) / v` and `z`.
//! For fixed `(z, M(z, 1), y)` the coefficients `m_j = [u^j] M` follow from the
//! equation itself, so the system closes in these four unknowns. The critical
//! point is located with the fold system `E = 0`, `J phi = 0`, `<e_l, phi> = 1`.
//! Derivatives in the marking variables come from jets in `eps` along
//! directions `y = eps d`.

use std::fmt::Debug;
use std::str::FromStr;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::IBig;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumeration::{tutte_count, MarkedSystem};
use crate::intersections::IntersectionCatalog;
use crate::series::Rational;

type F = FBig<HalfEven, 2>;

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error("Newton iteration did not converge (residual 2^{0:.1})")]
    NoConvergence(f64),
    #[error("singular linear system")]
    Singular,
    #[error("exact seed does not solve the unmarked system")]
    InexactSeed,
    #[error("precision {0} bits is below the minimum of 64")]
    LowPrecision(usize),
}

/// Field operations shared by the high-precision and exact routes.
pub trait Scalar: Clone + Debug + Send + Sync {
    type Ctx: Clone + Debug + Send + Sync;
    fn from_rational(q: &Rational, ctx: &Self::Ctx) -> Self;
    fn nil() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn vanishes(&self) -> bool;
    /// `log2 |x|`, `-inf` at zero.
    fn log2_abs(&self) -> f64;
    fn to_rational(&self) -> Rational;
    fn is_exact() -> bool;
    /// Residual level accepted as converged.
    fn tolerance_log2(ctx: &Self::Ctx) -> f64;

    fn from_int(i: i64, ctx: &Self::Ctx) -> Self {
        Self::from_rational(&Rational::from_integer(i.into()), ctx)
    }
}

/// Binary floating point number with a fixed working precision.
#[derive(Clone, Debug)]
pub struct Hp(pub F);

fn bigint_to_ibig(b: &BigInt) -> IBig {
    IBig::from_str_radix(&b.to_str_radix(16), 16).expect("hex digits")
}

fn ibig_to_bigint(b: &IBig) -> BigInt {
    BigInt::from_str(&b.to_string()).expect("decimal digits")
}

impl Scalar for Hp {
    type Ctx = usize;

    fn from_rational(q: &Rational, prec: &usize) -> Self {
        let n = F::from(bigint_to_ibig(q.numer())).with_precision(*prec).value();
        let d = F::from(bigint_to_ibig(q.denom())).with_precision(*prec).value();
        Hp(n / d)
    }
    fn nil() -> Self {
        Hp(F::ZERO)
    }
    fn add(&self, o: &Self) -> Self {
        Hp(&self.0 + &o.0)
    }
    fn sub(&self, o: &Self) -> Self {
        Hp(&self.0 - &o.0)
    }
    fn mul(&self, o: &Self) -> Self {
        Hp(&self.0 * &o.0)
    }
    fn div(&self, o: &Self) -> Self {
        Hp(&self.0 / &o.0)
    }
    fn neg(&self) -> Self {
        Hp(-self.0.clone())
    }
    fn vanishes(&self) -> bool {
        *self.0.repr().significand() == IBig::ZERO
    }
    fn log2_abs(&self) -> f64 {
        if self.vanishes() {
            return f64::NEG_INFINITY;
        }
        let sig = self.0.repr().significand();
        let bits = ibig_to_bigint(sig).bits() as usize;
        let exp = self.0.repr().exponent() as f64;
        if bits <= 53 {
            let v: f64 = ibig_to_bigint(sig).to_string().parse().unwrap();
            v.abs().log2() + exp
        } else {
            let top: IBig = sig >> (bits - 53);
            let v: f64 = ibig_to_bigint(&top).to_string().parse().unwrap();
            v.abs().log2() + exp + (bits - 53) as f64
        }
    }
    fn to_rational(&self) -> Rational {
        let sig = ibig_to_bigint(self.0.repr().significand());
        let exp = self.0.repr().exponent();
        if exp >= 0 {
            Rational::from_integer(sig << exp as usize)
        } else {
            Rational::new(sig, BigInt::one() << (-exp) as usize)
        }
    }
    fn is_exact() -> bool {
        false
    }
    fn tolerance_log2(prec: &usize) -> f64 {
        -(*prec as f64 - 24.0)
    }
}

impl Scalar for Rational {
    type Ctx = ();

    fn from_rational(q: &Rational, _: &()) -> Self {
        q.clone()
    }
    fn nil() -> Self {
        <Rational as Zero>::zero()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn vanishes(&self) -> bool {
        Zero::is_zero(self)
    }
    fn log2_abs(&self) -> f64 {
        if Zero::is_zero(self) {
            return f64::NEG_INFINITY;
        }
        rational_log2(&self.abs())
    }
    fn to_rational(&self) -> Rational {
        self.clone()
    }
    fn is_exact() -> bool {
        true
    }
    fn tolerance_log2(_: &()) -> f64 {
        f64::NEG_INFINITY
    }
}

fn rational_log2(q: &Rational) -> f64 {
    let top = |b: &BigInt| -> f64 {
        let bits = b.bits();
        if bits <= 60 {
            (b.to_string().parse::<f64>().unwrap()).log2()
        } else {
            let t: BigInt = b >> (bits - 60);
            t.to_string().parse::<f64>().unwrap().log2() + (bits - 60) as f64
        }
    };
    top(&q.numer().abs()) - top(q.denom())
}

/// Truncated polynomial in `eps` (degree `<= k`) with two dual units `t` and `s`.
#[derive(Clone, Debug)]
pub struct Jet<S> {
    k: usize,
    c: Vec<S>,
}

#[inline]
fn slot(k: usize, a: usize, b: usize) -> usize {
    (k * 2 + a) * 2 + b
}

impl<S: Scalar> Jet<S> {
    pub fn zero(k: usize) -> Self {
        Jet {
            k,
            c: vec![S::nil(); (k + 1) * 4],
        }
    }

    pub fn constant(x: S, k: usize) -> Self {
        let mut j = Self::zero(k);
        j.c[0] = x;
        j
    }

    fn unit(k: usize, ctx: &S::Ctx, e: usize, a: usize, b: usize) -> Self {
        let mut j = Self::zero(k);
        j.c[slot(e, a, b)] = S::from_int(1, ctx);
        j
    }

    pub fn coeff(&self, e: usize, a: usize, b: usize) -> &S {
        &self.c[slot(e, a, b)]
    }

    pub fn add(&self, o: &Self) -> Self {
        Jet {
            k: self.k,
            c: self.c.iter().zip(&o.c).map(|(x, y)| x.add(y)).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Jet {
            k: self.k,
            c: self.c.iter().zip(&o.c).map(|(x, y)| x.sub(y)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        Jet {
            k: self.k,
            c: self.c.iter().map(|x| x.neg()).collect(),
        }
    }

    pub fn scale(&self, f: &S) -> Self {
        Jet {
            k: self.k,
            c: self.c.iter().map(|x| x.mul(f)).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.k);
        for e1 in 0..=self.k {
            for a1 in 0..2 {
                for b1 in 0..2 {
                    let x = &self.c[slot(e1, a1, b1)];
                    if x.vanishes() {
                        continue;
                    }
                    for e2 in 0..=self.k - e1 {
                        for a2 in 0..2 - a1 {
                            for b2 in 0..2 - b1 {
                                let y = &o.c[slot(e2, a2, b2)];
                                if y.vanishes() {
                                    continue;
                                }
                                let i = slot(e1 + e2, a1 + a2, b1 + b2);
                                out.c[i] = out.c[i].add(&x.mul(y));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn inv(&self, ctx: &S::Ctx) -> Self {
        let one = S::from_int(1, ctx);
        let inv0 = one.div(&self.c[0]);
        let mut r = self.clone();
        r.c[0] = S::nil();
        let q = r.scale(&inv0.neg());
        let mut sum = Self::constant(one, self.k);
        let mut p = sum.clone();
        for _ in 0..self.k + 2 {
            p = p.mul(&q);
            sum = sum.add(&p);
        }
        sum.scale(&inv0)
    }

    pub fn pow(&self, e: u32, ctx: &S::Ctx) -> Self {
        let mut out = Self::constant(S::from_int(1, ctx), self.k);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Coefficient of `t`, as a jet without `t`.
    fn t_part(&self) -> Self {
        let mut out = Self::zero(self.k);
        for e in 0..=self.k {
            for b in 0..2 {
                out.c[slot(e, 0, b)] = self.c[slot(e, 1, b)].clone();
            }
        }
        out
    }

    fn without_t(&self) -> Self {
        let mut out = self.clone();
        for e in 0..=self.k {
            for b in 0..2 {
                out.c[slot(e, 1, b)] = S::nil();
            }
        }
        out
    }

    fn max_log2(&self) -> f64 {
        self.c.iter().map(|x| x.log2_abs()).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates the reduced system for one marked map equation.
struct Evaluator<'a, S: Scalar> {
    sys: &'a MarkedSystem,
    ctx: S::Ctx,
    k: usize,
    jm: usize,
    hmax: usize,
    smax: usize,
    /// Number of fixed-point sweeps for the `m_j`; `None` iterates to convergence.
    sweeps: Option<usize>,
}

struct Aux<S> {
    /// Per term: `y c z^(e+1) prod S`.
    coef: Vec<Jet<S>>,
    /// `a_l`, `b_l` with `P_l(u) = a_l(u) M(u) + b_l(u)`.
    a: Vec<Vec<Jet<S>>>,
    b: Vec<Vec<Jet<S>>>,
}

impl<'a, S: Scalar> Evaluator<'a, S> {
    fn new(sys: &'a MarkedSystem, ctx: S::Ctx, k: usize, sweeps: Option<usize>) -> Self {
        let hmax = sys.terms.iter().map(|t| t.h as usize).max().unwrap_or(1);
        let smax = sys.terms.iter().map(|t| t.max_s()).max().unwrap_or(0);
        let shift = sys
            .terms
            .iter()
            .map(|t| (-t.u_exp).max(0) as usize)
            .max()
            .unwrap_or(0);
        let low = (hmax - 1).max(smax).max(2);
        let reps = sweeps.map_or(40, |n| n + 1);
        let jm = low + reps * shift + 2;
        Evaluator {
            sys,
            ctx,
            k,
            jm,
            hmax,
            smax,
            sweeps,
        }
    }

    fn int(&self, i: i64) -> S {
        S::from_int(i, &self.ctx)
    }

    fn one(&self) -> Jet<S> {
        Jet::constant(self.int(1), self.k)
    }

    fn aux(&self, m: &[Jet<S>], z: &Jet<S>, y: &[Jet<S>]) -> Aux<S> {
        let k = self.k;
        let pmax = (self.hmax.max(self.smax)).max(2);
        let qmax = (self.hmax - 1).max(self.smax).max(1);
        // pw[p][q] = [u^q] M^p
        let mut pw: Vec<Vec<Jet<S>>> = Vec::with_capacity(pmax + 1);
        let mut first = vec![Jet::zero(k); qmax + 1];
        first[0] = self.one();
        pw.push(first);
        for p in 1..=pmax {
            let prev = &pw[p - 1];
            let mut row = vec![Jet::zero(k); qmax + 1];
            for q in 0..=qmax {
                let mut acc = Jet::zero(k);
                for i in 0..=q {
                    acc = acc.add(&prev[i].mul(&m[q - i]));
                }
                row[q] = acc;
            }
            pw.push(row);
        }
        let mut s: Vec<Jet<S>> = vec![Jet::zero(k)];
        for l in 1..=self.smax {
            let mut v = m[l].clone();
            for kk in 1..l {
                v = v.sub(&s[kk].mul(&pw[kk][l - kk]));
            }
            if l >= 2 {
                v = v.sub(&z.mul(&pw[2][l - 2]));
            }
            s.push(v);
        }
        let mut a: Vec<Vec<Jet<S>>> = Vec::new();
        let mut b: Vec<Vec<Jet<S>>> = Vec::new();
        for l in 0..self.hmax {
            let mut al = vec![Jet::zero(k); l + 1];
            let mut bl = vec![Jet::zero(k); l + 1];
            al[0] = self.one();
            for kk in 0..l {
                bl[kk] = bl[kk].sub(&m[kk]);
                let c = &pw[kk + 1][l - kk];
                let sh = l - kk;
                for (i, x) in a[kk].iter().enumerate() {
                    al[i + sh] = al[i + sh].sub(&c.mul(x));
                }
                for (i, x) in b[kk].iter().enumerate() {
                    if i + sh <= l {
                        bl[i + sh] = bl[i + sh].sub(&c.mul(x));
                    }
                }
            }
            a.push(al);
            b.push(bl);
        }
        let coef = self
            .sys
            .terms
            .iter()
            .map(|t| {
                let mut c = y[t.var].scale(&self.int(t.c as i64)).mul(&z.pow(t.e + 1, &self.ctx));
                for (i, &e) in t.s.iter().enumerate() {
                    for _ in 0..e {
                        c = c.mul(&s[i + 1]);
                    }
                }
                c
            })
            .collect();
        Aux { coef, a, b }
    }

    /// `[u^q] P_(h-1)` from the polynomial form.
    fn p_coeff(&self, aux: &Aux<S>, h: usize, m: &[Jet<S>], q: usize) -> Jet<S> {
        let (a, b) = (&aux.a[h - 1], &aux.b[h - 1]);
        let mut acc = if q < b.len() { b[q].clone() } else { Jet::zero(self.k) };
        for (i, x) in a.iter().enumerate() {
            if i <= q && q - i < m.len() {
                acc = acc.add(&x.mul(&m[q - i]));
            }
        }
        acc
    }

    fn m_coeffs(&self, z: &Jet<S>, m1: &Jet<S>, y: &[Jet<S>]) -> Vec<Jet<S>> {
        let k = self.k;
        let mut m = vec![Jet::zero(k); self.jm + 1];
        m[0] = self.one();
        let max_sweeps = self.sweeps.unwrap_or(400);
        for _ in 0..max_sweeps {
            let aux = self.aux(&m, z, y);
            let mut next: Vec<Jet<S>> = Vec::with_capacity(self.jm + 1);
            for j in 0..=self.jm {
                let mut val = if j == 0 {
                    self.one()
                } else {
                    let mut lin = m1.clone();
                    let mut quad = Jet::zero(k);
                    for i in 0..j.saturating_sub(1) {
                        lin = lin.sub(&next[i]);
                        quad = quad.add(&next[i].mul(&next[j - 2 - i]));
                    }
                    z.mul(&lin.add(&quad))
                };
                for (t, c) in self.sys.terms.iter().zip(&aux.coef) {
                    let q = j as i64 - t.u_exp as i64;
                    if q >= 0 {
                        val = val.add(&c.mul(&self.p_coeff(&aux, t.h as usize, &m, q as usize)));
                    }
                }
                next.push(val);
            }
            if self.sweeps.is_none() {
                let change = next
                    .iter()
                    .zip(&m)
                    .map(|(a, b)| a.sub(b).max_log2())
                    .fold(f64::NEG_INFINITY, f64::max);
                m = next;
                if change < S::tolerance_log2(&self.ctx) - 8.0 {
                    break;
                }
            } else {
                m = next;
            }
        }
        m
    }

    fn upow(&self, u: &Jet<S>, uinv: &Jet<S>, e: i32) -> Jet<S> {
        if e >= 0 {
            u.pow(e as u32, &self.ctx)
        } else {
            uinv.pow((-e) as u32, &self.ctx)
        }
    }

    /// `(E1, E2, E3)` at `(v, g, w, z)`.
    fn residual(&self, v: &Jet<S>, g: &Jet<S>, w: &Jet<S>, z: &Jet<S>, y: &[Jet<S>]) -> [Jet<S>; 3] {
        let one = self.one();
        let m1 = g.sub(&v.mul(w));
        let m = self.m_coeffs(z, &m1, y);
        let aux = self.aux(&m, z, y);
        let u = one.add(v);
        let uinv = u.inv(&self.ctx);
        let gw = g.add(w);
        let two = self.int(2);
        let mut f = one.add(&z.mul(&u.mul(&u)).mul(&g.mul(g))).add(&z.mul(&u).mul(&gw));
        let mut fg = z.mul(&u).mul(&u).mul(g).scale(&two).add(&z.mul(&u));
        let fw = z.mul(&u);
        let mut fv = z.mul(&u).mul(&g.mul(g)).scale(&two).add(&z.mul(&gw));
        for (t, c) in self.sys.terms.iter().zip(&aux.coef) {
            let (a, b) = (&aux.a[t.h as usize - 1], &aux.b[t.h as usize - 1]);
            let (mut au, mut bu, mut dau, mut dbu) = (Jet::zero(self.k), Jet::zero(self.k), Jet::zero(self.k), Jet::zero(self.k));
            let mut up = one.clone();
            let mut up_prev = Jet::zero(self.k);
            for i in 0..a.len() {
                au = au.add(&a[i].mul(&up));
                bu = bu.add(&b[i].mul(&up));
                if i > 0 {
                    let ii = self.int(i as i64);
                    dau = dau.add(&a[i].mul(&up_prev).scale(&ii));
                    dbu = dbu.add(&b[i].mul(&up_prev).scale(&ii));
                }
                up_prev = up.clone();
                up = up.mul(&u);
            }
            let ue = self.upow(&u, &uinv, t.u_exp);
            let ue1 = self.upow(&u, &uinv, t.u_exp - 1);
            let pv = au.mul(g).add(&bu);
            let dpv = dau.mul(g).add(&dbu);
            f = f.add(&c.mul(&ue).mul(&pv));
            fg = fg.add(&c.mul(&ue).mul(&au));
            let du = ue1.mul(&pv).scale(&self.int(t.u_exp as i64)).add(&ue.mul(&dpv));
            fv = fv.add(&c.mul(&du));
        }
        let e1 = g.sub(&f);
        let e2 = v.sub(&v.mul(&fg)).sub(&fw);
        let e3 = w.sub(&fv).sub(&w.mul(&fg));
        [e1, e2, e3]
    }

    /// Fold system in `(v, g, w, z, phi)`.
    fn extended(&self, x: &[Jet<S>], y: &[Jet<S>], ell: usize) -> Vec<Jet<S>> {
        let t = Jet::unit(self.k, &self.ctx, 0, 1, 0);
        let v = x[0].add(&x[4].mul(&t));
        let g = x[1].add(&x[5].mul(&t));
        let w = x[2].add(&x[6].mul(&t));
        let e = self.residual(&v, &g, &w, &x[3], y);
        let mut out: Vec<Jet<S>> = e.iter().map(|j| j.without_t()).collect();
        out.extend(e.iter().map(|j| j.t_part()));
        out.push(x[4 + ell].sub(&self.one()));
        out
    }

    /// Jacobian of the fold system at the constant parts of `x`.
    fn jacobian(&self, x: &[Jet<S>], y: &[Jet<S>], ell: usize) -> Vec<Vec<S>> {
        let n = x.len();
        let s = Jet::unit(self.k, &self.ctx, 0, 0, 1);
        let cols: Vec<Vec<S>> = (0..n)
            .map(|col| {
                let mut xp = x.to_vec();
                xp[col] = xp[col].add(&s);
                self.extended(&xp, y, ell).iter().map(|r| r.coeff(0, 0, 1).clone()).collect()
            })
            .collect();
        (0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect()
    }
}

/// Solves `a x = b` by elimination with pivoting on magnitude.
fn solve_linear<S: Scalar>(a: &[Vec<S>], b: &[S]) -> Result<Vec<S>, AsymptoticsError> {
    let n = b.len();
    let mut m: Vec<Vec<S>> = a.iter().zip(b).map(|(r, x)| {
        let mut r = r.clone();
        r.push(x.clone());
        r
    }).collect();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| m[i][col].log2_abs().partial_cmp(&m[j][col].log2_abs()).unwrap())
            .unwrap();
        if m[p][col].vanishes() {
            return Err(AsymptoticsError::Singular);
        }
        m.swap(col, p);
        for i in col + 1..n {
            if m[i][col].vanishes() {
                continue;
            }
            let f = m[i][col].div(&m[col][col]);
            for j in col..=n {
                let v = m[i][j].sub(&f.mul(&m[col][j]));
                m[i][j] = v;
            }
        }
    }
    let mut x = vec![S::nil(); n];
    for i in (0..n).rev() {
        let mut acc = m[i][n].clone();
        for j in i + 1..n {
            acc = acc.sub(&m[i][j].mul(&x[j]));
        }
        x[i] = acc.div(&m[i][i]);
    }
    Ok(x)
}

/// Critical point of the unmarked equation, `U = 6/5`, `M(U) = 5/3`, `z = 1/12`.
fn unmarked_seed() -> [Rational; 4] {
    let q = |a: i64, b: i64| Rational::new(a.into(), b.into());
    [q(1, 5), q(5, 3), q(5, 3), q(1, 12)]
}

/// First and second derivatives of the dominant singularity at `x = 1`.
#[derive(Debug, Clone)]
pub struct Expansion<S> {
    pub rho: S,
    pub rho1: Vec<S>,
    pub rho2: Vec<Vec<S>>,
    pub f1: Vec<S>,
    pub f2: Vec<Vec<S>>,
    /// Largest residual over all solves, as `log2`.
    pub residual_log2: f64,
}

/// Computes the singular expansion of a marked system with scalar type `S`.
pub fn singular_expansion<S: Scalar>(sys: &MarkedSystem, ctx: S::Ctx) -> Result<Expansion<S>, AsymptoticsError> {
    let k = 2;
    let ev: Evaluator<S> = Evaluator::new(sys, ctx.clone(), k, Some(k + 1));
    let r = sys.arity;
    let y0: Vec<Jet<S>> = vec![Jet::zero(k); r];
    let seed = unmarked_seed();
    let mut x: Vec<Jet<S>> = seed
        .iter()
        .map(|q| Jet::constant(S::from_rational(q, &ctx), k))
        .collect();
    let (phi, ell) = kernel(&ev, &x, &y0)?;
    x.extend(phi.into_iter().map(|p| Jet::constant(p, k)));
    let tol = S::tolerance_log2(&ctx);
    let res_of = |x: &[Jet<S>], y: &[Jet<S>]| -> (Vec<Jet<S>>, f64) {
        let res = ev.extended(x, y, ell);
        let worst = res.iter().map(|j| j.max_log2()).fold(f64::NEG_INFINITY, f64::max);
        (res, worst)
    };
    let (mut res, mut worst) = res_of(&x, &y0);
    if S::is_exact() {
        if worst > f64::NEG_INFINITY {
            return Err(AsymptoticsError::InexactSeed);
        }
    } else {
        let mut iter = 0;
        while worst > tol {
            let jac = ev.jacobian(&x, &y0, ell);
            let rhs: Vec<S> = res.iter().map(|j| j.coeff(0, 0, 0).clone()).collect();
            let dx = solve_linear(&jac, &rhs)?;
            for (xi, d) in x.iter_mut().zip(&dx) {
                xi.c[0] = xi.c[0].sub(d);
            }
            (res, worst) = res_of(&x, &y0);
            iter += 1;
            if iter > 60 {
                return Err(AsymptoticsError::NoConvergence(worst));
            }
        }
    }
    let base_residual = worst;
    let jac = ev.jacobian(&x, &y0, ell);
    let rho = x[3].coeff(0, 0, 0).clone();

    // Directions: unit vectors, then pairwise sums for mixed terms.
    let mut dirs: Vec<Vec<i64>> = (0..r)
        .map(|i| (0..r).map(|j| (i == j) as i64).collect())
        .collect();
    for i in 0..r {
        for j in i + 1..r {
            dirs.push((0..r).map(|l| (l == i || l == j) as i64).collect());
        }
    }
    let solved: Vec<Result<(S, S, f64), AsymptoticsError>> = dirs
        .par_iter()
        .map(|d| {
            let eps = Jet::unit(k, &ctx, 1, 0, 0);
            let y: Vec<Jet<S>> = d.iter().map(|&di| eps.scale(&S::from_int(di, &ctx))).collect();
            let mut xd = x.clone();
            let (mut res, mut worst) = res_of(&xd, &y);
            let mut iter = 0;
            while worst > tol {
                for e in 0..=k {
                    let rhs: Vec<S> = res.iter().map(|j| j.coeff(e, 0, 0).clone()).collect();
                    if rhs.iter().all(|v| v.vanishes()) {
                        continue;
                    }
                    let dx = solve_linear(&jac, &rhs)?;
                    for (xi, dv) in xd.iter_mut().zip(&dx) {
                        let i = slot(e, 0, 0);
                        xi.c[i] = xi.c[i].sub(dv);
                    }
                }
                (res, worst) = res_of(&xd, &y);
                iter += 1;
                if iter > 40 {
                    return Err(AsymptoticsError::NoConvergence(worst));
                }
            }
            let z1 = xd[3].coeff(1, 0, 0).clone();
            let z2 = xd[3].coeff(2, 0, 0).clone().mul(&S::from_int(2, &ctx));
            Ok((z1, z2, worst))
        })
        .collect();
    let solved: Vec<(S, S, f64)> = solved.into_iter().collect::<Result<_, _>>()?;
    let mut residual_log2 = base_residual;
    let mut rho1 = Vec::with_capacity(r);
    let mut quad = Vec::with_capacity(r);
    for (z1, z2, w) in &solved[..r] {
        rho1.push(z1.clone());
        quad.push(z2.clone());
        residual_log2 = residual_log2.max(*w);
    }
    let half = S::from_rational(&Rational::new(1.into(), 2.into()), &ctx);
    let mut rho2 = vec![vec![S::nil(); r]; r];
    let mut p = r;
    for i in 0..r {
        rho2[i][i] = quad[i].clone();
        for j in i + 1..r {
            let (_, zz, w) = &solved[p];
            residual_log2 = residual_log2.max(*w);
            let h = zz.sub(&quad[i]).sub(&quad[j]).mul(&half);
            rho2[i][j] = h.clone();
            rho2[j][i] = h;
            p += 1;
        }
    }
    let f1: Vec<S> = rho1.iter().map(|a| a.div(&rho).neg()).collect();
    let rho_sq = rho.mul(&rho);
    let f2: Vec<Vec<S>> = (0..r)
        .map(|i| {
            (0..r)
                .map(|j| rho2[i][j].div(&rho).neg().add(&rho1[i].mul(&rho1[j]).div(&rho_sq)))
                .collect()
        })
        .collect();
    Ok(Expansion {
        rho,
        rho1,
        rho2,
        f1,
        f2,
        residual_log2,
    })
}

/// Solves the fold system at a numeric marking point `y`, for finite differences.
pub fn singularity_at<S: Scalar>(sys: &MarkedSystem, ctx: S::Ctx, y: &[Rational]) -> Result<S, AsymptoticsError> {
    let ev: Evaluator<S> = Evaluator::new(sys, ctx.clone(), 0, None);
    let yj: Vec<Jet<S>> = y.iter().map(|q| Jet::constant(S::from_rational(q, &ctx), 0)).collect();
    let mut x: Vec<Jet<S>> = unmarked_seed()
        .iter()
        .map(|q| Jet::constant(S::from_rational(q, &ctx), 0))
        .collect();
    let zeros: Vec<Jet<S>> = vec![Jet::zero(0); sys.arity];
    let (phi, ell) = kernel(&ev, &x, &zeros)?;
    x.extend(phi.into_iter().map(|p| Jet::constant(p, 0)));
    let tol = S::tolerance_log2(&ctx);
    for _ in 0..80 {
        let res = ev.extended(&x, &yj, ell);
        let worst = res.iter().map(|j| j.max_log2()).fold(f64::NEG_INFINITY, f64::max);
        if worst <= tol {
            return Ok(x[3].coeff(0, 0, 0).clone());
        }
        let jac = ev.jacobian(&x, &yj, ell);
        let rhs: Vec<S> = res.iter().map(|j| j.coeff(0, 0, 0).clone()).collect();
        let dx = solve_linear(&jac, &rhs)?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            xi.c[0] = xi.c[0].sub(d);
        }
    }
    Err(AsymptoticsError::NoConvergence(f64::NAN))
}

/// Normalised kernel vector of the `(v, g, w)` Jacobian and the normalising index.
fn kernel<S: Scalar>(ev: &Evaluator<S>, x: &[Jet<S>], y: &[Jet<S>]) -> Result<(Vec<S>, usize), AsymptoticsError> {
    let s = Jet::unit(ev.k, &ev.ctx, 0, 0, 1);
    let cols: Vec<Vec<S>> = (0..3)
        .map(|c| {
            let mut xp = x.to_vec();
            xp[c] = xp[c].add(&s);
            ev.residual(&xp[0], &xp[1], &xp[2], &xp[3], y)
                .iter()
                .map(|j| j.coeff(0, 0, 1).clone())
                .collect()
        })
        .collect();
    let row = |i: usize| -> Vec<S> { (0..3).map(|c| cols[c][i].clone()).collect() };
    let cross = |a: &[S], b: &[S]| -> Vec<S> {
        vec![
            a[1].mul(&b[2]).sub(&a[2].mul(&b[1])),
            a[2].mul(&b[0]).sub(&a[0].mul(&b[2])),
            a[0].mul(&b[1]).sub(&a[1].mul(&b[0])),
        ]
    };
    let mut phi = cross(&row(0), &row(1));
    if phi.iter().all(|p| p.vanishes()) {
        phi = cross(&row(0), &row(2));
    }
    let ell = (0..3)
        .max_by(|&i, &j| phi[i].log2_abs().partial_cmp(&phi[j].log2_abs()).unwrap())
        .unwrap();
    let norm = phi[ell].clone();
    if norm.vanishes() {
        return Err(AsymptoticsError::Singular);
    }
    Ok((phi.iter().map(|p| p.div(&norm)).collect(), ell))
}

/// Decimal expansion of `q` with `digits` fractional digits, rounded half up.
pub fn to_decimal(q: &Rational, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = q.abs() * Rational::from_integer(scale.clone());
    let rounded = (scaled + Rational::new(1.into(), 2.into())).floor().to_integer();
    let (int, frac) = (&rounded / &scale, &rounded % &scale);
    let sign = if q.is_negative() && !rounded.is_zero() { "-" } else { "" };
    if digits == 0 {
        return format!("{sign}{int}");
    }
    format!("{sign}{int}.{:0>width$}", frac.to_string(), width = digits)
}

/// Continued-fraction rounding of `x`: the first convergent within `2^tol_log2`
/// of `x` whose denominator stays below `max_den`.
pub fn reconstruct_rational(x: &Rational, tol_log2: f64, max_den: &BigInt) -> Option<Rational> {
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rest = x.clone();
    for _ in 0..200 {
        let a = rest.floor().to_integer();
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if &k2 > max_den {
            return None;
        }
        let cand = Rational::new(h2.clone(), k2.clone());
        let err = (&cand - x).abs();
        if err.is_zero() || rational_log2(&err) < tol_log2 {
            return Some(cand);
        }
        let frac = &rest - Rational::from_integer(a);
        if frac.is_zero() {
            return None;
        }
        rest = frac.recip();
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
    }
    None
}

/// One reported constant.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Constant {
    /// Decimal digits of the high-precision value.
    pub decimal: String,
    /// Continued-fraction reconstruction, when one exists below the bound.
    pub rational: Option<String>,
    /// Exact value from the rational route, when computed.
    pub exact: Option<String>,
    /// Reconstruction agrees with the exact route.
    pub verified: bool,
    /// `log2` of the gap between the high-precision and exact values.
    pub error_log2: Option<f64>,
}

impl Constant {
    fn build(hp: &Hp, exact: Option<&Rational>, prec: usize) -> Self {
        let approx = hp.to_rational();
        let digits = ((prec as f64 - 16.0) * std::f64::consts::LOG10_2).max(10.0) as usize;
        let bound = num_traits::pow(BigInt::from(10), 18);
        let rational = reconstruct_rational(&approx, -(prec as f64) * 0.75, &bound);
        let (verified, error_log2) = match exact {
            Some(e) => (
                rational.as_ref() == Some(e),
                Some(Scalar::log2_abs(&(&approx - e))),
            ),
            None => (false, None),
        };
        Constant {
            decimal: to_decimal(&approx, digits),
            rational: rational.map(|r| r.to_string()),
            exact: exact.map(|e| e.to_string()),
            verified,
            error_log2,
        }
    }

    /// Value as `f64`.
    pub fn value(&self) -> f64 {
        self.decimal.parse().unwrap_or(f64::NAN)
    }

    /// Exact value, or the reconstruction when no exact route ran.
    pub fn best_rational(&self) -> Option<Rational> {
        self.exact.as_ref().or(self.rational.as_ref()).and_then(|s| parse_rational(s))
    }
}

fn parse_rational(s: &str) -> Option<Rational> {
    match s.split_once('/') {
        Some((a, b)) => Some(Rational::new(a.parse().ok()?, b.parse().ok()?)),
        None => Some(Rational::from_integer(s.parse().ok()?)),
    }
}

/// Constants of a marked system at `x = 1`, plus pattern slopes when known.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub precision_bits: usize,
    pub arity: usize,
    pub residual_log2: f64,
    pub rho: Constant,
    pub rho1: Vec<Constant>,
    pub rho2: Vec<Vec<Constant>>,
    pub f1: Vec<Constant>,
    pub f2: Vec<Vec<Constant>>,
    /// Constant terms of the expectations, when fitted from exact moments.
    pub g1: Option<Vec<Constant>>,
    pub mu: Option<Constant>,
    pub sigma2: Option<Constant>,
    #[serde(skip)]
    pub hp: Option<Expansion<Hp>>,
    #[serde(skip)]
    pub exact: Option<Expansion<Rational>>,
}

impl ConstantsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Solves the system at `precision` bits and, if asked, along the exact route too.
pub fn solve_and_differentiate(
    sys: &MarkedSystem,
    precision: usize,
    exact: bool,
) -> Result<ConstantsReport, AsymptoticsError> {
    if precision < 64 {
        return Err(AsymptoticsError::LowPrecision(precision));
    }
    let hp = singular_expansion::<Hp>(sys, precision)?;
    let ex = if exact {
        Some(singular_expansion::<Rational>(sys, ())?)
    } else {
        None
    };
    let c = |h: &Hp, e: Option<&Rational>| Constant::build(h, e, precision);
    let r = sys.arity;
    let vec_of = |h: &[Hp], e: Option<&Vec<Rational>>| -> Vec<Constant> {
        (0..r).map(|i| c(&h[i], e.map(|v| &v[i]))).collect()
    };
    let mat_of = |h: &[Vec<Hp>], e: Option<&Vec<Vec<Rational>>>| -> Vec<Vec<Constant>> {
        (0..r).map(|i| vec_of(&h[i], e.map(|m| &m[i]))).collect()
    };
    Ok(ConstantsReport {
        precision_bits: precision,
        arity: r,
        residual_log2: hp.residual_log2,
        rho: c(&hp.rho, ex.as_ref().map(|e| &e.rho)),
        rho1: vec_of(&hp.rho1, ex.as_ref().map(|e| &e.rho1)),
        rho2: mat_of(&hp.rho2, ex.as_ref().map(|e| &e.rho2)),
        f1: vec_of(&hp.f1, ex.as_ref().map(|e| &e.f1)),
        f2: mat_of(&hp.f2, ex.as_ref().map(|e| &e.f2)),
        g1: None,
        mu: None,
        sigma2: None,
        hp: Some(hp),
        exact: ex,
    })
}

/// `mu` and `sigma^2` slopes of a pattern count from its face-class expansion.
pub fn pattern_slopes<S: Scalar>(cat: &IntersectionCatalog, e: &Expansion<S>, ctx: &S::Ctx) -> Result<(S, S), PatternConstantsError> {
    let var = |class: usize| -> Result<usize, PatternConstantsError> {
        if class == 0 || class > e.f1.len() {
            Err(PatternConstantsError::MissingClass(class))
        } else {
            Ok(class - 1)
        }
    };
    let int = |i: i64| S::from_int(i, ctx);
    let pow12 = |d: usize| S::from_rational(&Rational::from_integer(num_traits::pow(BigInt::from(12), d)), ctx);
    let t0 = var(cat.t[0])?;
    let (r0, d0) = (int(cat.r0 as i64), cat.d0);
    let f0 = &e.f1[t0];
    let f00 = &e.f2[t0][t0];
    let mu = r0.mul(f0).div(&pow12(d0));
    let r0sq = r0.mul(&r0);
    let mut sigma2 = r0sq
        .mul(f00)
        .sub(&int(2 * d0 as i64).mul(&r0sq).mul(&f0.mul(f0)))
        .add(&pow12(d0).mul(&r0).mul(f0))
        .div(&pow12(2 * d0));
    for ty in &cat.types {
        let ti = var(cat.t[ty.index])?;
        let c = int(cat.classes[ty.face_class - 1].c as i64);
        let term = int(2 * ty.r as i64).mul(&e.f1[ti]).div(&pow12(ty.d).mul(&c));
        sigma2 = sigma2.add(&term);
    }
    Ok((mu, sigma2))
}

#[derive(Debug, Error)]
pub enum PatternConstantsError {
    #[error("no derivative for face class {0}")]
    MissingClass(usize),
}

/// Fills `mu` and `sigma2` of a report computed for `cat.marking_terms()`.
pub fn pattern_constants(cat: &IntersectionCatalog, report: &ConstantsReport) -> Result<(Constant, Constant), PatternConstantsError> {
    let hp = report.hp.as_ref().ok_or(PatternConstantsError::MissingClass(0))?;
    let (mu, s2) = pattern_slopes(cat, hp, &report.precision_bits)?;
    let (emu, es2) = match &report.exact {
        Some(e) => {
            let (a, b) = pattern_slopes(cat, e, &())?;
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    Ok((
        Constant::build(&mu, emu.as_ref(), report.precision_bits),
        Constant::build(&s2, es2.as_ref(), report.precision_bits),
    ))
}

/// Exact `[z^(n-k)] M / [z^n] M` for the unmarked series.
pub fn tutte_ratio(n: u32, k: u32) -> Rational {
    Rational::new(
        BigInt::from(tutte_count(n - k)),
        BigInt::from(tutte_count(n)),
    )
}

/// `|ratio * 12^k - 1 - 5k/(2n)|`, exactly.
pub fn ratio_asymptotic_check(n: u32, k: u32) -> Rational {
    let scaled = tutte_ratio(n, k) * Rational::from_integer(num_traits::pow(BigInt::from(12), k as usize));
    (scaled - Rational::one() - Rational::new((5 * k).into(), (2 * n).into())).abs()
}

/// Least-squares `C` in `residual = C (k/n)^2` over `1 <= k <= k_max`.
pub fn fit_ratio_constant(n: u32, k_max: u32) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..=k_max {
        let x = (k as f64 / n as f64).powi(2);
        let r = ratio_log(&ratio_asymptotic_check(n, k));
        num += x * r;
        den += x * x;
    }
    num / den
}

fn ratio_log(q: &Rational) -> f64 {
    if q.is_zero() {
        0.0
    } else {
        rational_log2(&q.abs()).exp2()
    }
}

/// Right side of the multivariate factorial-moment asymptotics.
pub fn factorial_moment_formula(n: u32, k: &[u32], f1: &[f64], f2: &[Vec<f64>]) -> f64 {
    let nf = n as f64;
    let mut log = 0.0;
    for (i, &ki) in k.iter().enumerate() {
        log += ki as f64 * (nf * f1[i]).ln();
    }
    let mut quad = 0.0;
    for i in 0..k.len() {
        for j in 0..k.len() {
            quad += k[i] as f64 * k[j] as f64 * f2[i][j] / (f1[i] * f1[j]);
        }
    }
    (log + quad / (2.0 * nf)).exp()
}

/// Relative deviation `exact / formula - 1`.
pub fn factorial_moment_deviation(exact: &Rational, n: u32, k: &[u32], f1: &[f64], f2: &[Vec<f64>]) -> f64 {
    let formula = factorial_moment_formula(n, k, f1, f2);
    let e = if exact.is_zero() { 0.0 } else { rational_log2(exact).exp2() };
    e / formula - 1.0
}

/// Per-`k` comparison against `mu^k exp(k^2 (sigma^2 - mu) / (2 mu^2))`.
#[derive(Debug, Clone, Serialize)]
pub struct GwProfile {
    /// `(k, log(moment) - log(target))`.
    pub residuals: Vec<(u32, f64)>,
    pub mu_large: bool,
    /// `sigma log^2 sigma / mu`, expected small.
    pub log_condition: f64,
    /// `mu / sigma^3`, expected small.
    pub cube_condition: f64,
}

#[derive(Debug, Error)]
pub enum GwError {
    #[error("empty k range")]
    EmptyRange,
}

pub fn gw_condition_check(mu: f64, sigma: f64, moments: &[(u32, f64)]) -> Result<GwProfile, GwError> {
    if moments.is_empty() {
        return Err(GwError::EmptyRange);
    }
    let residuals = moments
        .iter()
        .map(|&(k, m)| {
            let kf = k as f64;
            let target = kf * mu.ln() + kf * kf * (sigma * sigma - mu) / (2.0 * mu * mu);
            (k, m.ln() - target)
        })
        .collect();
    let l = sigma.ln();
    Ok(GwProfile {
        residuals,
        mu_large: mu > 1.0,
        log_condition: sigma * l * l / mu,
        cube_condition: mu / sigma.powi(3),
    })
}

/// Central finite differences of `rho` in variable `var`, Richardson-extrapolated
/// from steps `h` and `2h`: returns `(rho_x, rho_xx)`.
pub fn finite_difference_rho(
    sys: &MarkedSystem,
    precision: usize,
    var: usize,
    h: &Rational,
) -> Result<(Rational, Rational), AsymptoticsError> {
    let at = |m: i64| -> Result<Rational, AsymptoticsError> {
        let mut y = vec![Rational::zero(); sys.arity];
        y[var] = h * Rational::from_integer(m.into());
        Ok(singularity_at::<Hp>(sys, precision, &y)?.to_rational())
    };
    let (p1, m1, p2, m2, c0) = (at(1)?, at(-1)?, at(2)?, at(-2)?, at(0)?);
    let i = |v: i64| Rational::from_integer(v.into());
    let d1 = (i(8) * (&p1 - &m1) - (&p2 - &m2)) / (i(12) * h);
    let d2 = (-&p2 + i(16) * &p1 - i(30) * &c0 + i(16) * &m1 - &m2) / (i(12) * h * h);
    Ok((d1, d2))
}

/// Constant term of `E[X_n] - f n` by polynomial extrapolation in `1/n`.
pub fn extrapolate_constant(points: &[(u32, Rational)], f1: &Rational) -> Rational {
    let xs: Vec<Rational> = points.iter().map(|(n, _)| Rational::new(1.into(), (*n).into())).collect();
    let ys: Vec<Rational> = points
        .iter()
        .map(|(n, e)| e - f1 * Rational::from_integer((*n).into()))
        .collect();
    // Lagrange interpolation evaluated at 0.
    let mut acc = Rational::zero();
    for i in 0..xs.len() {
        let mut w = Rational::one();
        for j in 0..xs.len() {
            if i != j {
                w = w * (-&xs[j]) / (&xs[i] - &xs[j]);
            }
        }
        acc += w * &ys[i];
    }
    acc
}
