//! Exhaustive generation by inverting root-edge deletion.
//!
//! Generated maps use `alpha(d) = d ^ 1` and the newest edge's first dart
//! `2n - 2` as root.

use super::EnumerationError;
use crate::map_core::{Dart, RootedMap};

/// Default largest edge count for exhaustive generation.
pub const BRUTE_FORCE_LIMIT: usize = 9;

#[inline]
fn alpha(d: Dart) -> Dart {
    d ^ 1
}

/// Joins two maps by a new root bridge placed in both root corners.
pub fn join_bridge(s1: &[Dart], s2: &[Dart]) -> Vec<Dart> {
    let (a2, b2) = (s1.len() as Dart, s2.len() as Dart);
    let mut sigma = Vec::with_capacity((a2 + b2 + 2) as usize);
    sigma.extend_from_slice(s1);
    sigma.extend(s2.iter().map(|&d| d + a2));
    let r = a2 + b2;
    sigma.push(r);
    sigma.push(r + 1);
    if a2 > 0 {
        let r1 = a2 - 2;
        sigma[r as usize] = sigma[r1 as usize];
        sigma[r1 as usize] = r;
    }
    if b2 > 0 {
        let r2 = a2 + b2 - 2;
        sigma[(r + 1) as usize] = sigma[r2 as usize];
        sigma[r2 as usize] = r + 1;
    }
    sigma
}

/// Root face walk length of a generated map (0 for the vertex map).
pub fn root_face_len(s: &[Dart]) -> usize {
    if s.is_empty() {
        return 0;
    }
    let x0 = alpha(s.len() as Dart - 2);
    let mut x = s[alpha(x0) as usize];
    let mut len = 1;
    while x != x0 {
        x = s[alpha(x) as usize];
        len += 1;
    }
    len
}

/// Adds a new root edge inside the root face so that the new root face has
/// valency `k + 1`, for `0 <= k <= j` where `j` is the old root face valency.
pub fn split_root_face(s: &[Dart], k: usize) -> Vec<Dart> {
    let m2 = s.len() as Dart;
    let mut sigma = Vec::with_capacity(s.len() + 2);
    sigma.extend_from_slice(s);
    let (r, rp) = (m2, m2 + 1);
    sigma.push(0);
    sigma.push(0);
    if m2 == 0 {
        sigma[r as usize] = rp;
        sigma[rp as usize] = r;
        return sigma;
    }
    let root = m2 - 2;
    let j = root_face_len(s);
    debug_assert!(k <= j);
    let old = sigma[root as usize];
    if k == 0 {
        sigma[root as usize] = r;
        sigma[r as usize] = rp;
        sigma[rp as usize] = old;
    } else if k == j {
        sigma[root as usize] = rp;
        sigma[rp as usize] = r;
        sigma[r as usize] = old;
    } else {
        let mut x = alpha(root);
        for _ in 0..k {
            x = s[alpha(x) as usize];
        }
        let a = alpha(x);
        sigma[root as usize] = r;
        sigma[r as usize] = old;
        let olda = sigma[a as usize];
        sigma[a as usize] = rp;
        sigma[rp as usize] = olda;
    }
    sigma
}

fn to_map(sigma: Vec<Dart>) -> RootedMap {
    let n = sigma.len();
    if n == 0 {
        return RootedMap::vertex_map();
    }
    let alpha = (0..n as Dart).map(alpha).collect();
    RootedMap::from_parts_unchecked(sigma, alpha, n as Dart - 2)
}

/// All generated maps of each size up to `max_n`, stored compactly.
pub struct MapStore {
    /// Per size: concatenated sigma arrays of length `2n`.
    sizes: Vec<Vec<u8>>,
}

impl MapStore {
    pub fn new(max_n: usize) -> Result<Self, EnumerationError> {
        if max_n > 126 {
            return Err(EnumerationError::LimitExceeded { n: max_n, limit: 126 });
        }
        let mut store = MapStore {
            sizes: vec![Vec::new()],
        };
        for n in 1..=max_n {
            let mut flat = Vec::new();
            store.generate(n, |s| flat.extend(s.iter().map(|&d| d as u8)));
            store.sizes.push(flat);
        }
        Ok(store)
    }

    pub fn max_n(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn count(&self, n: usize) -> usize {
        if n == 0 {
            1
        } else {
            self.sizes[n].len() / (2 * n)
        }
    }

    pub fn sigma(&self, n: usize, i: usize) -> Vec<Dart> {
        if n == 0 {
            return Vec::new();
        }
        self.sizes[n][i * 2 * n..(i + 1) * 2 * n]
            .iter()
            .map(|&d| d as Dart)
            .collect()
    }

    pub fn map(&self, n: usize, i: usize) -> RootedMap {
        to_map(self.sigma(n, i))
    }

    /// Calls `f` with the sigma array of every map with `n` edges; needs sizes below `n`.
    fn generate(&self, n: usize, mut f: impl FnMut(&[Dart])) {
        for a in 0..n {
            let b = n - 1 - a;
            for i in 0..self.count(a) {
                let s1 = self.sigma(a, i);
                for jdx in 0..self.count(b) {
                    let s2 = self.sigma(b, jdx);
                    f(&join_bridge(&s1, &s2));
                }
            }
        }
        for i in 0..self.count(n - 1) {
            let s = self.sigma(n - 1, i);
            let j = root_face_len(&s);
            for k in 0..=j {
                f(&split_root_face(&s, k));
            }
        }
    }
}

/// Streams every rooted map with `n` edges; `store` must hold all sizes below `n`.
pub fn for_each_map(n: usize, store: &MapStore, mut f: impl FnMut(&RootedMap)) -> Result<(), EnumerationError> {
    if n == 0 {
        f(&RootedMap::vertex_map());
        return Ok(());
    }
    if store.max_n() + 1 < n {
        return Err(EnumerationError::LimitExceeded {
            n,
            limit: store.max_n() + 1,
        });
    }
    store.generate(n, |s| f(&to_map(s.to_vec())));
    Ok(())
}

/// Every rooted map with `n <= BRUTE_FORCE_LIMIT` edges.
pub fn brute_force_maps(n: usize) -> Result<Vec<RootedMap>, EnumerationError> {
    if n > BRUTE_FORCE_LIMIT {
        return Err(EnumerationError::LimitExceeded {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let store = MapStore::new(n.saturating_sub(1))?;
    let mut out = Vec::new();
    for_each_map(n, &store, |m| out.push(m.clone()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        let one = brute_force_maps(1).unwrap();
        assert_eq!(one.len(), 2);
        let mut vals: Vec<usize> = one.iter().map(|m| m.root_face_valency()).collect();
        vals.sort();
        assert_eq!(vals, vec![1, 2]);
        assert_eq!(brute_force_maps(2).unwrap().len(), 9);
        assert!(brute_force_maps(BRUTE_FORCE_LIMIT + 1).is_err());
    }

    #[test]
    fn generated_maps_are_valid() {
        for m in brute_force_maps(4).unwrap() {
            m.validate().unwrap();
        }
    }
}
