//! Direct fixed-point solution of the marked map equation with exact series.

use num_traits::One;

use super::{EnumerationError, MarkedSystem, SeriesFamily};
use crate::series::{Monomial, Rational, TruncatedSeries};

type Ts = TruncatedSeries<Rational>;

fn z_times(s: &Ts, du: i32) -> Result<Ts, EnumerationError> {
    Ok(s.shift(1, du, &vec![0; s.x_arity()])?)
}

/// `[u^q] M^p` for `M` given as a series; returned without `u`.
fn u_coeff_of_power(m: &Ts, p: u32, q: u32) -> Result<Ts, EnumerationError> {
    // Only u-degrees <= q matter.
    let mut low = m.clone();
    low = keep_u_at_most(&low, q);
    let mut acc = Ts::one(m.z_order(), m.x_arity(), m.x_degree_bound());
    for _ in 0..p {
        acc = keep_u_at_most(&acc.try_mul(&low)?, q);
    }
    Ok(acc.u_coefficient(q))
}

fn keep_u_at_most(s: &Ts, q: u32) -> Ts {
    let mut out = Ts::zero(s.z_order(), s.x_arity(), s.x_degree_bound());
    for (m, c) in s.iter() {
        if m.j <= q {
            out.set(m.clone(), c.clone());
        }
    }
    out
}

/// `S_l` (index `l - 1`) for `1 <= l <= l_max` and `P_l` for `0 <= l <= l_max`,
/// computed from `M` with the recursive identities for simple and partially
/// simple boundaries.
pub fn boundary_series(m: &Ts, l_max: usize) -> Result<(Vec<Ts>, Vec<Ts>), EnumerationError> {
    let (zo, r, k) = (m.z_order(), m.x_arity(), m.x_degree_bound());
    let zero_k = vec![0u32; r];
    let mk: Vec<Ts> = (0..=l_max as u32).map(|j| m.u_coefficient(j)).collect();
    let mut s: Vec<Ts> = Vec::new();
    for l in 1..=l_max as u32 {
        let mut v = mk[l as usize].clone();
        for kk in 1..l {
            let c = u_coeff_of_power(m, kk, l - kk)?;
            v = v.try_sub(&s[kk as usize - 1].try_mul(&c)?)?;
        }
        if l >= 2 {
            let c = u_coeff_of_power(m, 2, l - 2)?;
            v = v.try_sub(&z_times(&c, 0)?)?;
        }
        s.push(v);
    }
    let mut p: Vec<Ts> = vec![m.clone()];
    for l in 1..=l_max as u32 {
        let mut v = m.clone();
        for kk in 0..l {
            let mono = Ts::monomial(zo, r, k, Monomial::new(0, kk, zero_k.clone()), Rational::one());
            v = v.try_sub(&mk[kk as usize].try_mul(&mono)?)?;
            let c = u_coeff_of_power(m, kk + 1, l - kk)?;
            let term = p[kk as usize].try_mul(&c)?.shift(0, (l - kk) as i32, &zero_k)?;
            v = v.try_sub(&term)?;
        }
        p.push(v);
    }
    Ok((s, p))
}

/// Solves the marked equation order by order with exact series operations.
/// Quadratic in the number of orders; intended as an independent check.
pub fn solve_naive(system: &MarkedSystem, n_max: u32, k_bound: u32) -> Result<SeriesFamily, EnumerationError> {
    let r = system.arity;
    let zero_k = vec![0u32; r];
    let low = system.low_index();
    let one = Ts::one(n_max, r, k_bound);
    let mut m = one.clone();
    for it in 0..n_max {
        let mc = m.clipped(it);
        let sq = mc.try_mul(&mc)?;
        let mut next = one.try_add(&sq.shift(1, 2, &zero_k)?)?;
        let dd = mc.shift(0, 1, &zero_k)?.divided_difference_u();
        next = next.try_add(&dd.shift(1, 1, &zero_k)?)?;
        if !system.terms.is_empty() {
            let (s, p) = boundary_series(&mc, low)?;
            for t in &system.terms {
                let mut body = p[t.h as usize - 1].clipped(it);
                for (i, &e) in t.s.iter().enumerate() {
                    for _ in 0..e {
                        body = body.try_mul(&s[i].clipped(it))?;
                    }
                }
                let mut dk = zero_k.clone();
                dk[t.var] = 1;
                let term = body
                    .clipped(it)
                    .scale(&Rational::from_integer(t.c.into()))
                    .shift(t.e + 1, t.u_exp, &dk)?;
                next = next.try_add(&term)?;
            }
        }
        m = next.clipped(it + 1);
    }
    let m1 = m.eval_u_one();
    Ok(SeriesFamily {
        system: system.clone(),
        n_max,
        k_bound,
        m,
        m1,
        s: Vec::new(),
        p: Vec::new(),
    })
}
