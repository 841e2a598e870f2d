//! Uniform random rooted planar maps by the recursive method, and pattern-count statistics.
//!
//! A map with `n >= 1` edges and root face valency `j` arises either by joining two
//! maps with a root bridge (`j = j1 + j2 + 2`) or by adding a root edge inside the
//! root face of a map with `n - 1` edges and valency `j' >= j - 1`. Each case is
//! chosen with probability proportional to its count.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::enumeration::tutte_count;
use crate::map_core::{find_occurrences_indexed, Dart, HostIndex, Pattern, RootedMap};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("size {n} outside the table range (n_max = {n_max})")]
    OutOfRange { n: usize, n_max: usize },
    #[error("at least one trial is required")]
    ZeroTrials,
}

/// Number representation of the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableMode {
    /// Exact integers for every valency.
    Exact,
    /// `m_{n,j} / 12^n` in `f64`, valencies capped where the remaining mass is negligible.
    Scaled,
}

#[derive(Debug, Clone)]
enum Weights {
    Exact {
        m: Vec<Vec<BigUint>>,
        bridge: Vec<Vec<BigUint>>,
    },
    Scaled {
        m: Vec<Vec<f64>>,
        bridge: Vec<Vec<f64>>,
    },
}

/// Counts `m_{n,j}` and the bridge part of each `(n, j)` entry; the rest of
/// the entry is the suffix sum of row `n - 1` from `j - 1`.
#[derive(Debug, Clone)]
pub struct SamplerTables {
    pub n_max: usize,
    pub mode: TableMode,
    /// Largest stored valency.
    pub j_cap: usize,
    weights: Weights,
}

/// Largest size for which [`build_sampler_tables`] keeps exact integer tables.
pub const EXACT_TABLE_LIMIT: usize = 300;

/// Valency cap of scaled tables up to `n_max`; the maps it leaves out are a
/// fraction below `1e-12` of all maps for `n_max <= 2000`.
pub fn scaled_cap(n_max: usize) -> usize {
    (n_max * 9 / 20 + 150).min(2 * n_max)
}

/// Exact tables up to [`EXACT_TABLE_LIMIT`], scaled tables with [`scaled_cap`] beyond.
pub fn build_sampler_tables(n_max: usize) -> SamplerTables {
    if n_max <= EXACT_TABLE_LIMIT {
        SamplerTables::new(n_max, TableMode::Exact)
    } else {
        SamplerTables::new(n_max, TableMode::Scaled)
    }
}

impl SamplerTables {
    pub fn new(n_max: usize, mode: TableMode) -> Self {
        match mode {
            TableMode::Exact => Self::exact(n_max),
            TableMode::Scaled => Self::scaled(n_max, scaled_cap(n_max)),
        }
    }

    fn exact(n_max: usize) -> Self {
        let mut m: Vec<Vec<BigUint>> = vec![vec![BigUint::from(1u32)]];
        let mut bridge: Vec<Vec<BigUint>> = vec![vec![BigUint::zero()]];
        for n in 1..=n_max {
            let width = 2 * n + 1;
            let mut b = vec![BigUint::zero(); width];
            for a in 0..n {
                let c = n - 1 - a;
                for (j1, x) in m[a].iter().enumerate() {
                    if x.is_zero() {
                        continue;
                    }
                    for (j2, y) in m[c].iter().enumerate() {
                        b[j1 + j2 + 2] += x * y;
                    }
                }
            }
            let prev = &m[n - 1];
            let mut row = b.clone();
            let mut suffix = BigUint::zero();
            for j in (1..width).rev() {
                if j - 1 < prev.len() {
                    suffix += &prev[j - 1];
                }
                row[j] += &suffix;
            }
            m.push(row);
            bridge.push(b);
        }
        SamplerTables {
            n_max,
            mode: TableMode::Exact,
            j_cap: 2 * n_max,
            weights: Weights::Exact { m, bridge },
        }
    }

    pub fn scaled(n_max: usize, cap: usize) -> Self {
        let twelfth = 1.0 / 12.0;
        let mut m: Vec<Vec<f64>> = vec![vec![1.0]];
        let mut bridge: Vec<Vec<f64>> = vec![vec![0.0]];
        for n in 1..=n_max {
            let width = (2 * n).min(cap) + 1;
            let mut b = vec![0.0f64; width];
            for a in 0..n {
                let c = n - 1 - a;
                if a > c {
                    break;
                }
                let twice = if a == c { 1.0 } else { 2.0 };
                for (j1, &x) in m[a].iter().enumerate() {
                    if x == 0.0 || j1 + 2 >= width {
                        continue;
                    }
                    let x = x * twice * twelfth;
                    let top = (width - 3 - j1).min(m[c].len() - 1);
                    let (src, dst) = (&m[c][..=top], &mut b[j1 + 2..=j1 + 2 + top]);
                    for (d, &y) in dst.iter_mut().zip(src) {
                        *d += x * y;
                    }
                }
            }
            let prev = &m[n - 1];
            let mut row = b.clone();
            let mut suffix: f64 = prev.iter().skip(width - 1).sum::<f64>() * twelfth;
            for j in (1..width).rev() {
                if j - 1 < prev.len() {
                    suffix += prev[j - 1] * twelfth;
                }
                row[j] += suffix;
            }
            m.push(row);
            bridge.push(b);
        }
        SamplerTables {
            n_max,
            mode: TableMode::Scaled,
            j_cap: cap,
            weights: Weights::Scaled { m, bridge },
        }
    }

    /// Exact `m_{n,j}`, or the scaled value times `12^n` rounded, as a float.
    pub fn weight_f64(&self, n: usize, j: usize) -> f64 {
        match &self.weights {
            Weights::Exact { m, .. } => m[n].get(j).and_then(|x| x.to_f64()).unwrap_or(0.0),
            Weights::Scaled { m, .. } => m[n].get(j).copied().unwrap_or(0.0),
        }
    }

    /// Exact row of `m_{n,j}`; `None` for scaled tables.
    pub fn exact_row(&self, n: usize) -> Option<&[BigUint]> {
        match &self.weights {
            Weights::Exact { m, .. } => m.get(n).map(|r| r.as_slice()),
            Weights::Scaled { .. } => None,
        }
    }

    /// Sum of the stored entries of row `n`; exactly `tutte_count(n)` for exact tables.
    pub fn row_total(&self, n: usize) -> f64 {
        match &self.weights {
            Weights::Exact { m, .. } => m[n].iter().sum::<BigUint>().to_f64().unwrap_or(f64::INFINITY),
            Weights::Scaled { m, .. } => m[n].iter().sum(),
        }
    }

    /// Share of maps with `n` edges outside the capped tables (zero for exact tables).
    pub fn missing_fraction(&self, n: usize) -> f64 {
        match &self.weights {
            Weights::Exact { .. } => 0.0,
            Weights::Scaled { m, .. } => (1.0 - m[n].iter().sum::<f64>() / scaled_tutte(n as u32)).max(0.0),
        }
    }

    /// Draws a uniform rooted map with `n` edges.
    pub fn sample(&self, n: usize, rng: &mut impl RngCore) -> Result<RootedMap, SamplerError> {
        if n > self.n_max {
            return Err(SamplerError::OutOfRange { n, n_max: self.n_max });
        }
        let plan = match &self.weights {
            Weights::Exact { m, bridge } => plan(n, &ExactW { m, bridge }, rng),
            Weights::Scaled { m, bridge } => plan(n, &ScaledW { m, bridge }, rng),
        };
        Ok(build(n, &plan))
    }
}

/// One step of the decomposition, in post-order.
#[derive(Debug, Clone, Copy)]
enum Step {
    Empty,
    Bridge,
    /// Split the root face of valency `old` so that the new root face has valency `k + 1`.
    Split { k: usize, old: usize },
}

trait Table {
    type W: Clone;
    fn m(&self, n: usize, j: usize) -> Self::W;
    fn bridge(&self, n: usize, j: usize) -> Self::W;
    fn width(&self, n: usize) -> usize;
    fn pair(&self, a: usize, b: usize, j: usize) -> Self::W;
    fn suffix_term(&self, n: usize, j: usize) -> Self::W;
    /// `m_{a,j1} m_{b,j2}` in the bridge scale.
    fn entry(&self, a: usize, j1: usize, b: usize, j2: usize) -> Self::W;
    fn add(&self, x: &Self::W, y: &Self::W) -> Self::W;
    fn draw(&self, total: &Self::W, rng: &mut dyn RngCore) -> Self::W;
    /// `r < w`; otherwise replaces `r` with `r - w`.
    fn take(&self, r: &mut Self::W, w: &Self::W) -> bool;
}

struct ExactW<'a> {
    m: &'a [Vec<BigUint>],
    bridge: &'a [Vec<BigUint>],
}

impl Table for ExactW<'_> {
    type W = BigUint;
    fn m(&self, n: usize, j: usize) -> BigUint {
        self.m[n].get(j).cloned().unwrap_or_default()
    }
    fn bridge(&self, n: usize, j: usize) -> BigUint {
        self.bridge[n].get(j).cloned().unwrap_or_default()
    }
    fn width(&self, n: usize) -> usize {
        self.m[n].len()
    }
    fn pair(&self, a: usize, b: usize, j: usize) -> BigUint {
        let mut s = BigUint::zero();
        for j1 in 0..=j.min(2 * a) {
            if let Some(y) = self.m[b].get(j - j1) {
                s += &self.m[a][j1] * y;
            }
        }
        s
    }
    fn suffix_term(&self, n: usize, j: usize) -> BigUint {
        self.m(n, j)
    }
    fn entry(&self, a: usize, j1: usize, b: usize, j2: usize) -> BigUint {
        self.m(a, j1) * self.m(b, j2)
    }
    fn add(&self, x: &BigUint, y: &BigUint) -> BigUint {
        x + y
    }
    fn draw(&self, total: &BigUint, rng: &mut dyn RngCore) -> BigUint {
        let bits = total.bits();
        loop {
            let words = bits.div_ceil(32) as usize;
            let digits: Vec<u32> = (0..words).map(|_| rng.next_u32()).collect();
            let mut x = BigUint::new(digits);
            let extra = words as u64 * 32 - bits;
            x >>= extra;
            if &x < total {
                return x;
            }
        }
    }
    fn take(&self, r: &mut BigUint, w: &BigUint) -> bool {
        if &*r < w {
            true
        } else {
            *r -= w;
            false
        }
    }
}

struct ScaledW<'a> {
    m: &'a [Vec<f64>],
    bridge: &'a [Vec<f64>],
}

impl Table for ScaledW<'_> {
    type W = f64;
    fn m(&self, n: usize, j: usize) -> f64 {
        self.m[n].get(j).copied().unwrap_or(0.0)
    }
    fn bridge(&self, n: usize, j: usize) -> f64 {
        self.bridge[n].get(j).copied().unwrap_or(0.0)
    }
    fn width(&self, n: usize) -> usize {
        self.m[n].len()
    }
    fn pair(&self, a: usize, b: usize, j: usize) -> f64 {
        let mut s = 0.0;
        let top = j.min(self.m[a].len() - 1);
        for j1 in 0..=top {
            if let Some(y) = self.m[b].get(j - j1) {
                s += self.m[a][j1] * y;
            }
        }
        s / 12.0
    }
    fn suffix_term(&self, n: usize, j: usize) -> f64 {
        self.m(n, j) / 12.0
    }
    fn entry(&self, a: usize, j1: usize, b: usize, j2: usize) -> f64 {
        self.m(a, j1) * self.m(b, j2) / 12.0
    }
    fn add(&self, x: &f64, y: &f64) -> f64 {
        x + y
    }
    fn draw(&self, total: &f64, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.gen();
        u * total
    }
    fn take(&self, r: &mut f64, w: &f64) -> bool {
        if *r < *w {
            true
        } else {
            *r -= w;
            false
        }
    }
}

fn plan<T: Table>(n: usize, t: &T, rng: &mut dyn RngCore) -> Vec<Step> {
    // Root face valency at the top.
    let mut total = t.m(n, 0);
    for j in 1..t.width(n) {
        total = t.add(&total, &t.m(n, j));
    }
    let mut r = t.draw(&total, rng);
    let mut j0 = t.width(n) - 1;
    for j in 0..t.width(n) {
        if t.take(&mut r, &t.m(n, j)) {
            j0 = j;
            break;
        }
    }
    // Pre-order list of (n, j) tasks, reversed into post-order steps.
    let mut out = Vec::with_capacity(2 * n + 1);
    let mut stack = vec![(n, j0)];
    while let Some((n, j)) = stack.pop() {
        if n == 0 {
            out.push(Step::Empty);
            continue;
        }
        let node = t.m(n, j);
        let mut r = t.draw(&node, rng);
        let b = t.bridge(n, j);
        if j >= 2 && t.take(&mut r, &b) {
            // Sizes from both ends first; most of the mass sits there.
            let mut chosen = None;
            let mut last = None;
            for i in 0..n {
                let a = if i % 2 == 0 { i / 2 } else { n - 1 - i / 2 };
                let c = n - 1 - a;
                let w = t.pair(a, c, j - 2);
                last = Some(a);
                if t.take(&mut r, &w) {
                    chosen = Some(a);
                    break;
                }
            }
            let a = chosen.or(last).unwrap();
            let c = n - 1 - a;
            let mut r2 = t.draw(&t.pair(a, c, j - 2), rng);
            let mut j1 = 0;
            for cand in 0..=(j - 2).min(t.width(a) - 1) {
                let w = t.entry(a, cand, c, j - 2 - cand);
                j1 = cand;
                if t.take(&mut r2, &w) {
                    break;
                }
            }
            out.push(Step::Bridge);
            // Left part is built first, so it is pushed last.
            stack.push((c, j - 2 - j1));
            stack.push((a, j1));
        } else {
            let mut old = t.width(n - 1) - 1;
            for jp in j.saturating_sub(1)..t.width(n - 1) {
                if t.take(&mut r, &t.suffix_term(n - 1, jp)) {
                    old = jp;
                    break;
                }
            }
            out.push(Step::Split { k: j - 1, old });
            stack.push((n - 1, old));
        }
    }
    out.reverse();
    out
}

#[inline]
fn alpha(d: Dart) -> Dart {
    d ^ 1
}

/// Replays the post-order steps in a dart arena; edge `e` owns darts `2e` and `2e + 1`.
fn build(n: usize, steps: &[Step]) -> RootedMap {
    if n == 0 {
        return RootedMap::vertex_map();
    }
    let mut sigma: Vec<Dart> = vec![0; 2 * n];
    let mut next: Dart = 0;
    let mut roots: Vec<Option<Dart>> = Vec::with_capacity(n + 1);
    for step in steps {
        match *step {
            Step::Empty => roots.push(None),
            Step::Bridge => {
                let right = roots.pop().unwrap();
                let left = roots.pop().unwrap();
                let (r, rp) = (next, next + 1);
                next += 2;
                sigma[r as usize] = r;
                sigma[rp as usize] = rp;
                if let Some(r1) = left {
                    sigma[r as usize] = sigma[r1 as usize];
                    sigma[r1 as usize] = r;
                }
                if let Some(r2) = right {
                    sigma[rp as usize] = sigma[r2 as usize];
                    sigma[r2 as usize] = rp;
                }
                roots.push(Some(r));
            }
            Step::Split { k, old } => {
                let inner = roots.pop().unwrap();
                let (r, rp) = (next, next + 1);
                next += 2;
                match inner {
                    None => {
                        sigma[r as usize] = rp;
                        sigma[rp as usize] = r;
                    }
                    Some(root) => {
                        let prev = sigma[root as usize];
                        if k == 0 {
                            sigma[root as usize] = r;
                            sigma[r as usize] = rp;
                            sigma[rp as usize] = prev;
                        } else if k == old {
                            sigma[root as usize] = rp;
                            sigma[rp as usize] = r;
                            sigma[r as usize] = prev;
                        } else {
                            let mut x = alpha(root);
                            for _ in 0..k {
                                x = sigma[alpha(x) as usize];
                            }
                            let a = alpha(x);
                            sigma[root as usize] = r;
                            sigma[r as usize] = prev;
                            let olda = sigma[a as usize];
                            sigma[a as usize] = rp;
                            sigma[rp as usize] = olda;
                        }
                    }
                }
                roots.push(Some(r));
            }
        }
    }
    let root = roots.pop().unwrap().expect("nonempty map");
    let alpha_arr = (0..2 * n as Dart).map(alpha).collect();
    RootedMap::from_parts_unchecked(sigma, alpha_arr, root)
}

/// Generator for trial `i` under `seed`: one ChaCha stream per trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform map with `n` edges, deterministic in `seed`.
pub fn sample_uniform_map(tables: &SamplerTables, n: usize, seed: u64) -> Result<RootedMap, SamplerError> {
    tables.sample(n, &mut trial_rng(seed, 0))
}

/// Moments and a normality statistic of pattern counts in sampled maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsReport {
    pub n: usize,
    pub trials: usize,
    pub pattern: String,
    pub seed: u64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Jarque-Bera statistic and its chi-square(2) p-value.
    pub jarque_bera: f64,
    pub normality_p: f64,
    pub level: f64,
    pub mean_radius: f64,
    pub variance_radius: f64,
    pub counts: Vec<u64>,
}

impl StatsReport {
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.trials as f64).sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,n,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{i},{},{c}\n", self.n));
        }
        s
    }
}

/// Moments, Jarque-Bera statistic and confidence radii of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
    pub normality_p: f64,
    pub mean_radius: f64,
    pub variance_radius: f64,
}

/// Summary statistics of integer samples at a two-sided confidence `level`.
pub fn summarize(counts: &[u64], level: f64) -> Summary {
    let t = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / t;
    let central = |p: i32| counts.iter().map(|&c| (c as f64 - mean).powi(p)).sum::<f64>() / t;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let variance = if t > 1.0 { m2 * t / (t - 1.0) } else { 0.0 };
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let jarque_bera = t / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0);
    let normality_p = if m2 > 0.0 {
        1.0 - ChiSquared::new(2.0).unwrap().cdf(jarque_bera)
    } else {
        1.0
    };
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.5 + level / 2.0);
    Summary {
        mean,
        variance,
        skewness,
        excess_kurtosis,
        jarque_bera,
        normality_p,
        mean_radius: z * (variance / t).sqrt(),
        variance_radius: z * ((m4 - m2 * m2).max(0.0) / t).sqrt(),
    }
}

impl StatsReport {
    pub fn from_counts(n: usize, pattern: &str, seed: u64, counts: Vec<u64>, level: f64) -> Self {
        let s = summarize(&counts, level);
        StatsReport {
            n,
            trials: counts.len(),
            pattern: pattern.to_string(),
            seed,
            mean: s.mean,
            variance: s.variance,
            skewness: s.skewness,
            excess_kurtosis: s.excess_kurtosis,
            jarque_bera: s.jarque_bera,
            normality_p: s.normality_p,
            level,
            mean_radius: s.mean_radius,
            variance_radius: s.variance_radius,
            counts,
        }
    }

    /// Same sample with radii at another confidence level.
    pub fn at_level(self, level: f64) -> Self {
        Self::from_counts(self.n, &self.pattern, self.seed, self.counts, level)
    }
}

/// Samples `trials` maps with `n` edges and counts occurrences of `pattern`; radii at 99%.
pub fn empirical_stats(
    tables: &SamplerTables,
    pattern: &Pattern,
    pattern_name: &str,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<StatsReport, SamplerError> {
    if trials == 0 {
        return Err(SamplerError::ZeroTrials);
    }
    if n > tables.n_max {
        return Err(SamplerError::OutOfRange { n, n_max: tables.n_max });
    }
    let counts: Vec<u64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let map = tables.sample(n, &mut trial_rng(seed, i)).expect("n in range");
            let host = HostIndex::new(&map);
            find_occurrences_indexed(&host, pattern).len() as u64
        })
        .collect();
    Ok(StatsReport::from_counts(n, pattern_name, seed, counts, 0.99))
}

/// `tutte_count(n) / 12^n` as a float.
pub fn scaled_tutte(n: u32) -> f64 {
    let num = BigUint::from(tutte_count(n)) << 128u32;
    let q = num / BigUint::from(12u32).pow(n);
    let bits = q.bits();
    let shift = bits.saturating_sub(62);
    let top = (&q >> shift).to_f64().unwrap();
    top * (shift as f64 - 128.0).exp2()
}
