//! Multi-modular solver for the (marked) map equation.
//!
//! Each prime run keeps `M_n(u)` as values at the points `u = 2, 3, ..., 2N + 2`
//! and recovers low `u`-coefficients and `M_n(1)` by Lagrange interpolation.
//! The series `S_l` and `P_l = alpha_l M + beta_l` are carried as z-series of
//! polynomials in `u`. Results are combined by the Chinese remainder theorem.

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;

use super::{EnumerationError, MarkedSystem, MonomialBasis};

/// Input of one engine run.
#[derive(Debug, Clone)]
pub struct EngineRequest {
    pub system: MarkedSystem,
    pub n_max: u32,
    pub k_bound: u32,
    /// Also recover every `[z^n u^j]` coefficient.
    pub valency: bool,
}

/// Exact outputs, in the `y = x - 1` monomial basis of `MonomialBasis::new(arity, k_bound)`.
#[derive(Debug, Clone)]
pub struct EngineOutput {
    pub arity: usize,
    pub k_bound: u32,
    /// `m1[n][mono] = [z^n y^mono] M(z, 1, 1 + y)`.
    pub m1: Vec<Vec<BigInt>>,
    /// `valency[n][j][mono] = [z^n u^j y^mono] M(z, u, 1 + y)`.
    pub valency: Option<Vec<Vec<Vec<BigInt>>>>,
}

#[derive(Clone, Copy)]
struct Fp {
    p: u64,
}

impl Fp {
    #[inline]
    fn mul(self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.p as u128) as u64
    }
    #[inline]
    fn add(self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }
    #[inline]
    fn sub(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }
    #[inline]
    fn red(self, x: u128) -> u64 {
        (x % self.p as u128) as u64
    }
    fn pow(self, mut a: u64, mut e: u64) -> u64 {
        let mut r = 1;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        r
    }
    fn inv(self, a: u64) -> u64 {
        self.pow(a, self.p - 2)
    }
    fn from_i64(self, v: i64) -> u64 {
        let m = v.rem_euclid(self.p as i64);
        m as u64
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % q == 0 {
            return n == q;
        }
    }
    let f = Fp { p: n };
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = f.pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = f.mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Largest primes below `2^50`; products fit in `u128` with ample room for lazy sums.
fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = (1u64 << 50) - 1;
    while out.len() < count {
        if is_prime(c) {
            out.push(c);
        }
        c -= 2;
    }
    out
}

/// Per-prime arithmetic on coefficient vectors over the monomial basis.
struct YOps<'a> {
    f: Fp,
    d: usize,
    triples: &'a [(u32, u32, u32)],
}

impl YOps<'_> {
    #[inline]
    fn mul_acc(&self, acc: &mut [u128], a: &[u64], b: &[u64]) {
        if self.d == 1 {
            acc[0] += a[0] as u128 * b[0] as u128;
            return;
        }
        for &(i, j, k) in self.triples {
            acc[k as usize] += a[i as usize] as u128 * b[j as usize] as u128;
        }
    }

    fn reduce(&self, acc: &[u128]) -> Vec<u64> {
        acc.iter().map(|&x| self.f.red(x)).collect()
    }
}

/// A z-series whose coefficients are polynomials in `u` of bounded degree with
/// vector coefficients: `data[n][q * d + i]`.
struct USeries {
    deg: usize,
    data: Vec<Vec<u64>>,
}

impl USeries {
    fn new(deg: usize) -> Self {
        USeries {
            deg,
            data: Vec::new(),
        }
    }
}

/// `[z^n]` of `a * b`, truncated at u-degree `dmax`.
fn conv_at(y: &YOps, a: &USeries, b: &USeries, n: usize, dmax: usize) -> Vec<u64> {
    let d = y.d;
    let mut acc = vec![0u128; (dmax + 1) * d];
    for i in 0..=n {
        let (Some(ai), Some(bi)) = (a.data.get(i), b.data.get(n - i)) else {
            continue;
        };
        for qa in 0..=a.deg {
            let va = &ai[qa * d..(qa + 1) * d];
            if va.iter().all(|&v| v == 0) {
                continue;
            }
            for qb in 0..=b.deg.min(dmax.saturating_sub(qa)) {
                if qa + qb > dmax {
                    break;
                }
                let vb = &bi[qb * d..(qb + 1) * d];
                y.mul_acc(&mut acc[(qa + qb) * d..(qa + qb + 1) * d], va, vb);
            }
        }
    }
    y.reduce(&acc)
}

struct TermState {
    var: usize,
    c: u64,
    e: usize,
    l: usize,
    factors: Vec<usize>,
    /// Partial products of the S factors.
    partial: Vec<USeries>,
    r: USeries,
    /// Values at points of `R * alpha_l` and `R * beta_l`.
    g_vals: Vec<Vec<u64>>,
    h_vals: Vec<Vec<u64>>,
    upow: Vec<u64>,
}

fn run_prime(req: &EngineRequest, basis: &MonomialBasis, p: u64) -> (Vec<Vec<u64>>, Vec<Vec<Vec<u64>>>) {
    let f = Fp { p };
    let y = YOps {
        f,
        d: basis.dim(),
        triples: &basis.triples,
    };
    let d = y.d;
    let nmax = req.n_max as usize;
    let npts = 2 * nmax + 1;
    let sys = &req.system;
    let low = sys.low_index();
    let kmax = if req.valency { 2 * nmax } else { low };

    // Interpolation data.
    let pts: Vec<u64> = (0..npts).map(|i| i as u64 + 2).collect();
    let mut fact = vec![1u64; npts + 1];
    for i in 1..=npts {
        fact[i] = f.mul(fact[i - 1], i as u64);
    }
    let weights: Vec<u64> = (0..npts)
        .map(|i| {
            let den = f.mul(fact[i], fact[npts - 1 - i]);
            let w = f.inv(den);
            if (npts - 1 - i) % 2 == 1 {
                f.sub(0, w)
            } else {
                w
            }
        })
        .collect();
    // ell(u) = prod (u - pts[j]), low to high.
    let mut ell = vec![1u64];
    for &a in &pts {
        let mut next = vec![0u64; ell.len() + 1];
        for (k, &c) in ell.iter().enumerate() {
            next[k + 1] = f.add(next[k + 1], c);
            next[k] = f.sub(next[k], f.mul(a, c));
        }
        ell = next;
    }
    // coef[k][i] = [u^k] of the Lagrange basis polynomial at point i.
    let mut coef = vec![vec![0u64; npts]; kmax + 1];
    for i in 0..npts {
        let ainv = f.inv(pts[i]);
        let mut q = f.mul(f.sub(0, ell[0]), ainv);
        coef[0][i] = f.mul(weights[i], q);
        for k in 1..=kmax {
            q = f.mul(f.sub(q, ell[k]), ainv);
            coef[k][i] = f.mul(weights[i], q);
        }
    }
    // Evaluation at u = 1: ell(1) w_i / (1 - u_i).
    let ell1 = {
        let mut v = 1u64;
        for &a in &pts {
            v = f.mul(v, f.sub(1, a));
        }
        v
    };
    let lam: Vec<u64> = (0..npts)
        .map(|i| f.mul(f.mul(ell1, weights[i]), f.inv(f.sub(1, pts[i]))))
        .collect();
    let inv_um1: Vec<u64> = pts.iter().map(|&a| f.inv(a - 1)).collect();
    let pw_deg = low + 1;
    let pw: Vec<Vec<u64>> = pts
        .iter()
        .map(|&a| {
            let mut v = vec![1u64; pw_deg + 1];
            for q in 1..=pw_deg {
                v[q] = f.mul(v[q - 1], a);
            }
            v
        })
        .collect();

    let mut terms: Vec<TermState> = sys
        .terms
        .iter()
        .map(|t| {
            let mut factors = Vec::new();
            for (i, &c) in t.s.iter().enumerate() {
                for _ in 0..c {
                    factors.push(i + 1);
                }
            }
            let upow = pts
                .iter()
                .map(|&a| {
                    if t.u_exp >= 0 {
                        f.pow(a, t.u_exp as u64)
                    } else {
                        f.inv(f.pow(a, (-t.u_exp) as u64))
                    }
                })
                .collect();
            TermState {
                var: t.var,
                c: f.from_i64(t.c as i64),
                e: t.e as usize,
                l: t.h as usize - 1,
                partial: (0..factors.len()).map(|_| USeries::new(0)).collect(),
                factors,
                r: USeries::new(0),
                g_vals: Vec::new(),
                h_vals: Vec::new(),
                upow,
            }
        })
        .collect();

    let unit = {
        let mut v = vec![0u64; d];
        v[0] = 1;
        v
    };
    // State.
    let mut mv: Vec<Vec<u64>> = Vec::with_capacity(nmax + 1);
    let mut m1: Vec<Vec<u64>> = Vec::with_capacity(nmax + 1);
    let mut mlow = USeries::new(low);
    let mut pows: Vec<USeries> = (0..=low).map(|_| USeries::new(low)).collect(); // pows[p] = M_low^p, p >= 1
    let mut alpha: Vec<USeries> = (0..=low).map(USeries::new).collect();
    let mut beta: Vec<USeries> = (0..=low).map(USeries::new).collect();
    let mut s_ser: Vec<USeries> = (0..=low).map(|_| USeries::new(0)).collect(); // index l >= 1
    let mut valency: Vec<Vec<Vec<u64>>> = Vec::new();

    for n in 0..=nmax {
        // Values of M_n at the points.
        let mut vals = vec![0u64; npts * d];
        if n == 0 {
            for i in 0..npts {
                vals[i * d] = 1;
            }
            for t in terms.iter_mut() {
                t.r.data.push(vec![0u64; d]);
                t.g_vals.push(vec![0u64; npts * d]);
                t.h_vals.push(vec![0u64; npts * d]);
            }
        } else {
            for t in terms.iter_mut() {
                // R_n = c * y_var * Q[n - e - 1].
                let mut rn = vec![0u64; d];
                if n > t.e {
                    let src = if t.factors.is_empty() {
                        if n - t.e - 1 == 0 {
                            Some(unit.clone())
                        } else {
                            None
                        }
                    } else {
                        t.partial.last().unwrap().data.get(n - t.e - 1).cloned()
                    };
                    if let Some(q) = src {
                        for &(from, to) in &basis.var_shift[t.var] {
                            rn[to as usize] = f.mul(t.c, q[from as usize]);
                        }
                    }
                }
                t.r.data.push(rn);
                let g = conv_at(&y, &t.r, &alpha[t.l], n, t.l);
                let h = conv_at(&y, &t.r, &beta[t.l], n, t.l);
                let mut gv = vec![0u64; npts * d];
                let mut hv = vec![0u64; npts * d];
                for i in 0..npts {
                    for q in 0..=t.l {
                        let w = pw[i][q];
                        for k in 0..d {
                            gv[i * d + k] = f.add(gv[i * d + k], f.mul(w, g[q * d + k]));
                            hv[i * d + k] = f.add(hv[i * d + k], f.mul(w, h[q * d + k]));
                        }
                    }
                }
                t.g_vals.push(gv);
                t.h_vals.push(hv);
            }
            // Sum over a + b = n - 1 of M_a M_b.
            let mut acc_pair = vec![0u128; npts * d];
            let mut acc_sq = vec![0u128; npts * d];
            for a in 0..n {
                let b = n - 1 - a;
                if a > b {
                    break;
                }
                let (va, vb) = (&mv[a], &mv[b]);
                let acc = if a == b { &mut acc_sq } else { &mut acc_pair };
                for i in 0..npts {
                    y.mul_acc(&mut acc[i * d..(i + 1) * d], &va[i * d..(i + 1) * d], &vb[i * d..(i + 1) * d]);
                }
            }
            let prev = &mv[n - 1];
            let prev1 = &m1[n - 1];
            for i in 0..npts {
                let u = pts[i];
                let u2 = f.mul(u, u);
                for k in 0..d {
                    let idx = i * d + k;
                    let sq = f.add(f.add(f.red(acc_pair[idx]), f.red(acc_pair[idx])), f.red(acc_sq[idx]));
                    let mut v = f.mul(u2, sq);
                    let dd = f.mul(f.sub(f.mul(u, prev[idx]), prev1[k]), inv_um1[i]);
                    v = f.add(v, f.mul(u, dd));
                    vals[idx] = v;
                }
            }
            for t in &terms {
                let mut acc = vec![0u128; npts * d];
                for a in 1..=n {
                    let (ga, mb) = (&t.g_vals[a], &mv[n - a]);
                    for i in 0..npts {
                        y.mul_acc(&mut acc[i * d..(i + 1) * d], &ga[i * d..(i + 1) * d], &mb[i * d..(i + 1) * d]);
                    }
                }
                let hv = &t.h_vals[n];
                for i in 0..npts {
                    for k in 0..d {
                        let idx = i * d + k;
                        let v = f.add(f.red(acc[idx]), hv[idx]);
                        vals[idx] = f.add(vals[idx], f.mul(t.upow[i], v));
                    }
                }
            }
        }
        // Recover M_n(1) and the low coefficients.
        let mut at1 = vec![0u128; d];
        for i in 0..npts {
            for k in 0..d {
                at1[k] += lam[i] as u128 * vals[i * d + k] as u128;
            }
        }
        m1.push(y.reduce(&at1));
        let top = if req.valency { 2 * n } else { low.min(2 * n) };
        let mut coeffs = vec![vec![0u64; d]; kmax.max(low) + 1];
        for (j, row) in coeffs.iter_mut().enumerate().take(top + 1) {
            let mut acc = vec![0u128; d];
            for i in 0..npts {
                let c = coef[j][i] as u128;
                for k in 0..d {
                    acc[k] += c * vals[i * d + k] as u128;
                }
            }
            *row = y.reduce(&acc);
        }
        if req.valency {
            valency.push(coeffs[..=2 * n].to_vec());
        }
        let mut lowvec = vec![0u64; (low + 1) * d];
        for q in 0..=low {
            lowvec[q * d..(q + 1) * d].copy_from_slice(&coeffs[q]);
        }
        mlow.data.push(lowvec);
        mv.push(vals);

        if low == 0 && terms.is_empty() {
            continue;
        }
        // Powers of the low part of M.
        for pidx in 1..=low {
            let v = if pidx == 1 {
                mlow.data[n].clone()
            } else {
                conv_at(&y, &pows[pidx - 1], &mlow, n, low)
            };
            pows[pidx].data.push(v);
        }
        let cq = |pows: &Vec<USeries>, q: usize, pp: usize, order: usize| -> Vec<u64> {
            if pp == 0 {
                let mut v = vec![0u64; d];
                if q == 0 && order == 0 {
                    v[0] = 1;
                }
                return v;
            }
            pows[pp].data[order][q * d..(q + 1) * d].to_vec()
        };
        // alpha_l and beta_l at order n.
        for l in 0..=low {
            let mut a = vec![0u64; (l + 1) * d];
            let mut b = vec![0u64; (l + 1) * d];
            if l == 0 {
                if n == 0 {
                    a[0] = 1;
                }
            } else {
                if n == 0 {
                    a[0] = 1;
                }
                for k in 0..l {
                    // -m_k u^k
                    for c in 0..d {
                        b[k * d + c] = f.sub(b[k * d + c], mlow.data[n][k * d + c]);
                    }
                    // -(alpha_k C) u^(l-k), -(beta_k C) u^(l-k), C = [u^(l-k)] M^(k+1)
                    let q = l - k;
                    let mut acc_a = vec![0u128; (k + 1) * d];
                    let mut acc_b = vec![0u128; (k + 1) * d];
                    for i in 0..=n {
                        let cv = cq(&pows, q, k + 1, n - i);
                        if cv.iter().all(|&v| v == 0) {
                            continue;
                        }
                        for r in 0..=k {
                            let ai = &alpha[k].data[i][r * d..(r + 1) * d];
                            let bi = &beta[k].data[i][r * d..(r + 1) * d];
                            y.mul_acc(&mut acc_a[r * d..(r + 1) * d], ai, &cv);
                            y.mul_acc(&mut acc_b[r * d..(r + 1) * d], bi, &cv);
                        }
                    }
                    let ra = y.reduce(&acc_a);
                    let rb = y.reduce(&acc_b);
                    for r in 0..=k {
                        for c in 0..d {
                            let idx = (r + q) * d + c;
                            a[idx] = f.sub(a[idx], ra[r * d + c]);
                            b[idx] = f.sub(b[idx], rb[r * d + c]);
                        }
                    }
                }
            }
            alpha[l].data.push(a);
            beta[l].data.push(b);
        }
        // S_l at order n.
        for l in 1..=low {
            let mut v = mlow.data[n][l * d..(l + 1) * d].to_vec();
            let mut acc = vec![0u128; d];
            for k in 1..l {
                for i in 0..=n {
                    let cv = cq(&pows, l - k, k, n - i);
                    y.mul_acc(&mut acc, &s_ser[k].data[i], &cv);
                }
            }
            let red = y.reduce(&acc);
            for c in 0..d {
                v[c] = f.sub(v[c], red[c]);
            }
            if l >= 2 && n >= 1 {
                let c2 = square_low_coeff(&y, &mlow, l - 2, n - 1);
                for c in 0..d {
                    v[c] = f.sub(v[c], c2[c]);
                }
            }
            s_ser[l].data.push(v);
        }
        // Partial products of S factors.
        for t in terms.iter_mut() {
            for j in 0..t.factors.len() {
                let v = if j == 0 {
                    s_ser[t.factors[0]].data[n].clone()
                } else {
                    conv_at(&y, &t.partial[j - 1], &s_ser[t.factors[j]], n, 0)
                };
                t.partial[j].data.push(v);
            }
        }
    }
    (m1, valency)
}

/// `[z^n u^q] M_low^2`.
fn square_low_coeff(y: &YOps, mlow: &USeries, q: usize, n: usize) -> Vec<u64> {
    let d = y.d;
    let mut acc = vec![0u128; d];
    for i in 0..=n {
        for qa in 0..=q {
            let a = &mlow.data[i][qa * d..(qa + 1) * d];
            let b = &mlow.data[n - i][(q - qa) * d..(q - qa + 1) * d];
            y.mul_acc(&mut acc, a, b);
        }
    }
    y.reduce(&acc)
}

/// Garner reconstruction of a nonnegative integer from residues.
struct Crt {
    primes: Vec<u64>,
    /// inv[i][j] = p_j^{-1} mod p_i for j < i.
    inv: Vec<Vec<u64>>,
}

impl Crt {
    fn new(primes: Vec<u64>) -> Self {
        let inv = (0..primes.len())
            .map(|i| {
                let f = Fp { p: primes[i] };
                (0..i).map(|j| f.inv(primes[j] % primes[i])).collect()
            })
            .collect();
        Crt { primes, inv }
    }

    fn combine(&self, r: &[u64]) -> BigInt {
        let k = self.primes.len();
        let mut digits = vec![0u64; k];
        for i in 0..k {
            let f = Fp { p: self.primes[i] };
            let mut x = r[i];
            for j in 0..i {
                x = f.mul(f.sub(x, digits[j] % self.primes[i]), self.inv[i][j]);
            }
            digits[i] = x;
        }
        let mut v = BigInt::zero();
        for i in (0..k).rev() {
            v = v * BigInt::from(self.primes[i]) + BigInt::from(digits[i]);
        }
        v
    }
}

/// Runs the engine over enough primes to determine every output exactly.
pub fn run_engine(req: &EngineRequest) -> Result<EngineOutput, EnumerationError> {
    for t in &req.system.terms {
        t.check(req.system.arity)?;
    }
    let basis = MonomialBasis::new(req.system.arity, req.k_bound);
    let n = req.n_max as f64;
    // Coefficients are at most 12^n (n + 1)^K.
    let bits = n * 12f64.log2() + req.k_bound as f64 * (n + 2.0).log2() + 16.0;
    let count = (bits / 49.0).ceil() as usize + 1;
    let ps = primes(count);
    let runs: Vec<(Vec<Vec<u64>>, Vec<Vec<Vec<u64>>>)> =
        ps.par_iter().map(|&p| run_prime(req, &basis, p)).collect();
    let crt = Crt::new(ps.clone());
    let d = basis.dim();
    let nmax = req.n_max as usize;
    let mut residues = vec![0u64; ps.len()];
    let mut m1 = Vec::with_capacity(nmax + 1);
    for n in 0..=nmax {
        let mut row = Vec::with_capacity(d);
        for k in 0..d {
            for (pi, run) in runs.iter().enumerate() {
                residues[pi] = run.0[n][k];
            }
            row.push(crt.combine(&residues));
        }
        m1.push(row);
    }
    let valency = if req.valency {
        let mut out = Vec::with_capacity(nmax + 1);
        for n in 0..=nmax {
            let mut rows = Vec::with_capacity(2 * n + 1);
            for j in 0..=2 * n {
                let mut row = Vec::with_capacity(d);
                for k in 0..d {
                    for (pi, run) in runs.iter().enumerate() {
                        residues[pi] = run.1[n][j][k];
                    }
                    row.push(crt.combine(&residues));
                }
                rows.push(row);
            }
            out.push(rows);
        }
        Some(out)
    } else {
        None
    };
    Ok(EngineOutput {
        arity: req.system.arity,
        k_bound: req.k_bound,
        m1,
        valency,
    })
}
