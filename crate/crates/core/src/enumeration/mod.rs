//! Exact counting of rooted planar maps, plain and with marked faces.

mod brute;
mod engine;
mod naive;

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::series::{Monomial, Rational, SeriesError, TruncatedSeries};

pub use brute::{brute_force_maps, for_each_map, join_bridge, split_root_face, MapStore, BRUTE_FORCE_LIMIT};
pub use engine::{run_engine, EngineOutput, EngineRequest};
pub use naive::{boundary_series, solve_naive};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnumerationError {
    #[error("marking term has simple-cycle length {0} (must be >= 1)")]
    BadTermShape(u32),
    #[error("marking term refers to variable {var} but arity is {arity}")]
    BadVariable { var: usize, arity: usize },
    #[error("edge count {n} exceeds the brute-force limit {limit}")]
    LimitExceeded { n: usize, limit: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `m_n = 2 * 3^n * (2n)! / ((n+2)! n!)`, the number of rooted planar maps with `n` edges.
pub fn tutte_count(n: u32) -> BigUint {
    // 2 * 3^n * binom(2n, n) / ((n+1)(n+2))
    let mut binom = BigUint::one();
    for i in 0..n {
        binom = binom * BigUint::from(2 * n - i) / BigUint::from(i + 1);
    }
    let num = BigUint::from(2u32) * BigUint::from(3u32).pow(n) * binom;
    num / BigUint::from((n as u64 + 1) * (n as u64 + 2))
}

/// One marking term `y_var * c * z^(e+1) * u^u_exp * P_(h-1) * prod S_i^(s_i)`,
/// where `y_var = x_var - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarkingTerm {
    pub var: usize,
    pub c: u32,
    pub e: u32,
    pub h: u32,
    /// `s[i-1]` is the exponent of `S_i`.
    pub s: Vec<u32>,
    pub u_exp: i32,
}

impl MarkingTerm {
    /// Term with the usual `u^(2-h)` factor.
    pub fn new(var: usize, c: u32, e: u32, h: u32, s: Vec<u32>) -> Self {
        MarkingTerm {
            var,
            c,
            e,
            h,
            s,
            u_exp: 2 - h as i32,
        }
    }

    pub fn with_u_exp(mut self, u_exp: i32) -> Self {
        self.u_exp = u_exp;
        self
    }

    /// Largest `S` index used.
    pub fn max_s(&self) -> usize {
        self.s.iter().rposition(|&v| v > 0).map_or(0, |i| i + 1)
    }

    fn check(&self, arity: usize) -> Result<(), EnumerationError> {
        if self.h < 1 {
            return Err(EnumerationError::BadTermShape(self.h));
        }
        if self.var >= arity {
            return Err(EnumerationError::BadVariable {
                var: self.var,
                arity,
            });
        }
        Ok(())
    }
}

/// Marked map equation: arity of the marking vector and its terms.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MarkedSystem {
    pub arity: usize,
    pub terms: Vec<MarkingTerm>,
}

impl MarkedSystem {
    pub fn unmarked() -> Self {
        MarkedSystem {
            arity: 0,
            terms: Vec::new(),
        }
    }

    pub fn new(arity: usize, terms: Vec<MarkingTerm>) -> Result<Self, EnumerationError> {
        for t in &terms {
            t.check(arity)?;
        }
        Ok(MarkedSystem { arity, terms })
    }

    /// Largest index `l` such that `m_l` enters the auxiliary series.
    pub fn low_index(&self) -> usize {
        self.terms
            .iter()
            .map(|t| (t.h as usize - 1).max(t.max_s()))
            .max()
            .unwrap_or(0)
    }
}

/// Exponent vectors of total degree at most `k`, ordered by degree then lexicographically.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    pub arity: usize,
    pub k: u32,
    pub monos: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    /// `(a, b, c)` with `monos[a] + monos[b] = monos[c]`.
    pub triples: Vec<(u32, u32, u32)>,
    /// Per variable: `(from, to)` with `monos[from] + e_var = monos[to]`.
    pub var_shift: Vec<Vec<(u32, u32)>>,
}

impl MonomialBasis {
    pub fn new(arity: usize, k: u32) -> Self {
        let mut monos: Vec<Vec<u32>> = Vec::new();
        for deg in 0..=k {
            let mut cur = vec![0u32; arity];
            compositions(arity, deg, 0, &mut cur, &mut monos);
            if arity == 0 {
                break;
            }
        }
        let index: HashMap<Vec<u32>, usize> =
            monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let mut triples = Vec::new();
        for (a, ma) in monos.iter().enumerate() {
            for (b, mb) in monos.iter().enumerate() {
                let sum: Vec<u32> = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
                if let Some(&c) = index.get(&sum) {
                    triples.push((a as u32, b as u32, c as u32));
                }
            }
        }
        let var_shift = (0..arity)
            .map(|v| {
                monos
                    .iter()
                    .enumerate()
                    .filter_map(|(i, m)| {
                        let mut m2 = m.clone();
                        m2[v] += 1;
                        index.get(&m2).map(|&j| (i as u32, j as u32))
                    })
                    .collect()
            })
            .collect();
        MonomialBasis {
            arity,
            k,
            monos,
            index,
            triples,
            var_shift,
        }
    }

    pub fn dim(&self) -> usize {
        self.monos.len()
    }

    pub fn index_of(&self, m: &[u32]) -> Option<usize> {
        self.index.get(m).copied()
    }
}

fn compositions(arity: usize, left: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 >= arity {
        if arity > 0 {
            cur[pos] = left;
        }
        out.push(cur.clone());
        return;
    }
    for v in (0..=left).rev() {
        cur[pos] = v;
        compositions(arity, left - v, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Generating series of one marked family, with marks in the shifted variables `y = x - 1`.
#[derive(Debug, Clone)]
pub struct SeriesFamily {
    pub system: MarkedSystem,
    pub n_max: u32,
    pub k_bound: u32,
    /// `M(z, u, 1 + y)`.
    pub m: TruncatedSeries,
    /// `M(z, 1, 1 + y)`.
    pub m1: TruncatedSeries,
    /// `S_l` for `l = 1, 2, ...` (index `l - 1`).
    pub s: Vec<TruncatedSeries>,
    /// `P_l` for `l = 0, 1, ...`.
    pub p: Vec<TruncatedSeries>,
}

impl SeriesFamily {
    /// Fills `s` and `p` up to index `l_max` from `m`.
    pub fn with_boundary_series(mut self, l_max: usize) -> Result<Self, EnumerationError> {
        let (s, p) = boundary_series(&self.m, l_max)?;
        self.s = s;
        self.p = p;
        Ok(self)
    }

    pub fn map_count(&self, n: u32) -> Result<BigInt, EnumerationError> {
        let zero = vec![0; self.system.arity];
        Ok(self.m1.coeff(n, 0, &zero)?.to_integer())
    }
}

/// Unmarked map series to z-order `n_max`.
pub fn solve_map_dde(n_max: u32) -> SeriesFamily {
    solve_marked_dde(&MarkedSystem::unmarked(), n_max, 0).expect("unmarked system is valid")
}

/// Marked map series to z-order `n_max` and total mark degree `k_bound`.
pub fn solve_marked_dde(
    system: &MarkedSystem,
    n_max: u32,
    k_bound: u32,
) -> Result<SeriesFamily, EnumerationError> {
    let out = run_engine(&EngineRequest {
        system: system.clone(),
        n_max,
        k_bound,
        valency: true,
    })?;
    let basis = MonomialBasis::new(system.arity, k_bound);
    let mut m = TruncatedSeries::zero(n_max, system.arity, k_bound);
    let mut m1 = TruncatedSeries::zero(n_max, system.arity, k_bound);
    let val = out.valency.as_ref().expect("valency requested");
    for n in 0..=n_max as usize {
        for (mi, mono) in basis.monos.iter().enumerate() {
            let c = &out.m1[n][mi];
            if !c.is_zero() {
                m1.set(Monomial::new(n as u32, 0, mono.clone()), Rational::from(c.clone()));
            }
            for (j, row) in val[n].iter().enumerate() {
                let c = &row[mi];
                if !c.is_zero() {
                    m.set(Monomial::new(n as u32, j as u32, mono.clone()), Rational::from(c.clone()));
                }
            }
        }
    }
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

/// `(prod k_i!) [z^n y^k] M(z, 1, 1 + y) / m_n`.
pub fn factorial_moment_exact(
    family: &SeriesFamily,
    n: u32,
    k: &[u32],
) -> Result<Rational, EnumerationError> {
    let c = family.m1.coeff(n, 0, k)?;
    let total = family.map_count(n)?;
    Ok(c * Rational::from(factorial_product(k)) / Rational::from(total))
}

pub(crate) fn factorial_product(k: &[u32]) -> BigInt {
    let mut f = BigInt::one();
    for &ki in k {
        for i in 2..=ki {
            f *= BigInt::from(i);
        }
    }
    f
}

/// Factorial moments for every order from an engine run (`[n][monomial]`).
pub fn factorial_moments(out: &EngineOutput) -> Vec<Vec<Rational>> {
    let basis = MonomialBasis::new(out.arity, out.k_bound);
    out.m1
        .iter()
        .map(|row| {
            let total = &row[0];
            basis
                .monos
                .iter()
                .enumerate()
                .map(|(i, mono)| {
                    Rational::new(row[i].clone() * factorial_product(mono), total.clone())
                })
                .collect()
        })
        .collect()
}

/// Exact counts by root-face valency and by mark vectors.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CountTable {
    /// `by_valency[n][j]`.
    pub by_valency: Vec<Vec<BigInt>>,
    /// `(n, marks) -> count`, present when the mark truncation covers every map.
    pub by_marks: BTreeMap<(u32, Vec<u32>), BigInt>,
}

impl CountTable {
    /// Builds the table from a family; mark counts are converted from the `y` basis.
    pub fn from_family(family: &SeriesFamily) -> Self {
        let mut by_valency = vec![Vec::new(); family.n_max as usize + 1];
        let zero = vec![0u32; family.system.arity];
        for (m, c) in family.m.iter() {
            if m.k == zero {
                let row = &mut by_valency[m.n as usize];
                if row.len() <= m.j as usize {
                    row.resize(m.j as usize + 1, BigInt::zero());
                }
                row[m.j as usize] = c.to_integer();
            }
        }
        let mut by_marks = BTreeMap::new();
        if family.system.arity > 0 {
            for n in 0..=family.n_max {
                let ycoef: BTreeMap<Vec<u32>, BigInt> = family
                    .m1
                    .z_slice(n)
                    .map(|(m, c)| (m.k.clone(), c.to_integer()))
                    .collect();
                for (k, v) in y_to_x(&ycoef) {
                    if !v.is_zero() {
                        by_marks.insert((n, k), v);
                    }
                }
            }
        }
        CountTable {
            by_valency,
            by_marks,
        }
    }

    pub fn total(&self, n: usize) -> BigInt {
        self.by_valency[n].iter().sum()
    }

    pub fn valency_csv(&self) -> String {
        let mut s = String::from("n,j,count\n");
        for (n, row) in self.by_valency.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    s.push_str(&format!("{n},{j},{c}\n"));
                }
            }
        }
        s
    }

    pub fn marks_csv(&self) -> String {
        let mut s = String::from("n,k,count\n");
        for ((n, k), c) in &self.by_marks {
            let ks: Vec<String> = k.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{n},{},{c}\n", ks.join(",")));
        }
        s
    }
}

/// Converts coefficients in `y = x - 1` to coefficients in `x`.
pub fn y_to_x(ycoef: &BTreeMap<Vec<u32>, BigInt>) -> BTreeMap<Vec<u32>, BigInt> {
    let mut out: BTreeMap<Vec<u32>, BigInt> = BTreeMap::new();
    for (k, c) in ycoef {
        // prod_i (x_i - 1)^{k_i} = sum_j prod_i binom(k_i, j_i) (-1)^{k_i - j_i} x^j
        let mut partial: Vec<(Vec<u32>, BigInt)> = vec![(Vec::new(), c.clone())];
        for &ki in k {
            let mut next = Vec::new();
            for (j, v) in &partial {
                for ji in 0..=ki {
                    let mut b = binomial(ki, ji) * v;
                    if (ki - ji) % 2 == 1 {
                        b = -b;
                    }
                    let mut jj = j.clone();
                    jj.push(ji);
                    next.push((jj, b));
                }
            }
            partial = next;
        }
        for (j, v) in partial {
            *out.entry(j).or_insert_with(BigInt::zero) += v;
        }
    }
    out
}

pub(crate) fn binomial(n: u32, k: u32) -> BigInt {
    let mut b = BigInt::one();
    for i in 0..k {
        b = b * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    b
}

/// Exact `E[X_n]` for double glued triangles from the rerooting identity
/// `E[X_n] = (n - 3) [z^(n-2)] S_2 / m_n`, where `S_2 = z M1 - z^2 M1^2 - z` at `x = 1`.
pub fn dgt_mean_exact(n: u32) -> Rational {
    if n < 4 {
        return Rational::zero();
    }
    let k = n - 2;
    // [z^k] S_2 = m_(k-1) - sum_(a+b=k-2) m_a m_b
    let counts: Vec<BigInt> = (0..k).map(|i| BigInt::from(tutte_count(i))).collect();
    let mut s = counts[(k - 1) as usize].clone();
    for a in 0..=(k - 2) {
        s -= &counts[a as usize] * &counts[(k - 2 - a) as usize];
    }
    Rational::new(
        BigInt::from(n - 3) * s,
        BigInt::from(tutte_count(n)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn tutte_small() {
        let v: Vec<u64> = (0..8).map(|n| tutte_count(n).to_u64().unwrap()).collect();
        assert_eq!(v, vec![1, 2, 9, 54, 378, 2916, 24057, 208494]);
    }

    #[test]
    fn basis_order() {
        let b = MonomialBasis::new(2, 2);
        assert_eq!(
            b.monos,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        assert_eq!(MonomialBasis::new(0, 3).dim(), 1);
        assert_eq!(MonomialBasis::new(1, 4).dim(), 5);
    }

    #[test]
    fn y_to_x_single() {
        // 1 + 3y + y^2 = 1 + 3(x-1) + (x-1)^2 = -1 + x + x^2
        let mut y = BTreeMap::new();
        y.insert(vec![0], BigInt::from(1));
        y.insert(vec![1], BigInt::from(3));
        y.insert(vec![2], BigInt::from(1));
        let x = y_to_x(&y);
        assert_eq!(x[&vec![0]], BigInt::from(-1));
        assert_eq!(x[&vec![1]], BigInt::from(1));
        assert_eq!(x[&vec![2]], BigInt::from(1));
    }
}
