use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use planar_patterns::enumeration::*;
use planar_patterns::map_core::{find_occurrences, Pattern, RootedMap};
use planar_patterns::series::Rational;

fn fixture(name: &str) -> Pattern {
    let path = format!("{}/fixtures/{name}.map", env!("CARGO_MANIFEST_DIR"));
    Pattern::from_text(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn dgt_system() -> MarkedSystem {
    MarkedSystem::new(1, vec![MarkingTerm::new(0, 1, 2, 2, vec![])]).unwrap()
}

fn polygon_system(k: u32) -> MarkedSystem {
    MarkedSystem::new(1, vec![MarkingTerm::new(0, 1, 0, k, vec![])]).unwrap()
}

#[test]
fn engine_matches_closed_form() {
    let out = run_engine(&EngineRequest {
        system: MarkedSystem::unmarked(),
        n_max: 60,
        k_bound: 0,
        valency: false,
    })
    .unwrap();
    for n in 0..=60u32 {
        assert_eq!(out.m1[n as usize][0], BigInt::from(tutte_count(n)), "n={n}");
    }
}

#[test]
fn first_orders_by_valency() {
    let fam = solve_map_dde(2);
    let c = |n, j| fam.m.coeff(n, j, &[]).unwrap();
    assert_eq!(c(0, 0), Rational::from_integer(1.into()));
    assert_eq!(c(1, 2), Rational::from_integer(1.into()));
    assert_eq!(c(1, 1), Rational::from_integer(1.into()));
    let z2: Vec<i64> = (0..=4).map(|j| c(2, j).to_integer().to_i64().unwrap()).collect();
    assert_eq!(z2, vec![0, 2, 2, 3, 2]);
}

fn assert_same_series(a: &SeriesFamily, b: &SeriesFamily) {
    let ma: BTreeMap<_, _> = a.m.iter().map(|(m, c)| (m.clone(), c.clone())).collect();
    let mb: BTreeMap<_, _> = b.m.iter().map(|(m, c)| (m.clone(), c.clone())).collect();
    assert_eq!(ma, mb);
}

#[test]
fn engine_matches_naive_unmarked() {
    assert_same_series(&solve_map_dde(7), &solve_naive(&MarkedSystem::unmarked(), 7, 0).unwrap());
}

#[test]
fn engine_matches_naive_marked() {
    let systems = vec![
        (dgt_system(), 2),
        (polygon_system(4), 3),
        (polygon_system(1), 2),
        // Triple glued pentagons with the corrected u-power.
        (
            MarkedSystem::new(1, vec![MarkingTerm::new(0, 2, 3, 4, vec![])]).unwrap(),
            2,
        ),
        // Terms with S factors, bridges and two variables.
        (
            MarkedSystem::new(
                2,
                vec![
                    MarkingTerm::new(0, 3, 0, 3, vec![0, 0, 1]),
                    MarkingTerm::new(1, 2, 1, 2, vec![0, 2]),
                    MarkingTerm::new(1, 1, 0, 1, vec![1]),
                ],
            )
            .unwrap(),
            2,
        ),
    ];
    for (sys, k) in systems {
        let a = solve_marked_dde(&sys, 7, k).unwrap();
        let b = solve_naive(&sys, 7, k).unwrap();
        assert_same_series(&a, &b);
    }
}

#[test]
fn marked_slice_at_zero_is_unmarked() {
    let fam = solve_marked_dde(&dgt_system(), 12, 2).unwrap();
    for n in 0..=12 {
        assert_eq!(fam.map_count(n).unwrap(), BigInt::from(tutte_count(n)));
    }
}

#[test]
fn brute_force_by_valency_matches_series() {
    let fam = solve_map_dde(6);
    let table = CountTable::from_family(&fam);
    for n in 0..=6usize {
        let maps = brute_force_maps(n).unwrap();
        assert_eq!(BigInt::from(maps.len()), table.total(n));
        let mut by_j: BTreeMap<usize, i64> = BTreeMap::new();
        let mut codes = HashSet::new();
        for m in &maps {
            *by_j.entry(m.root_face_valency()).or_default() += 1;
            codes.insert(m.canonical_form());
        }
        assert_eq!(codes.len(), maps.len());
        for (j, c) in by_j {
            assert_eq!(table.by_valency[n][j], BigInt::from(c), "n={n} j={j}");
        }
    }
}

fn occurrence_histogram(n: usize, pattern: &Pattern) -> BTreeMap<u32, i64> {
    let mut h = BTreeMap::new();
    for m in brute_force_maps(n).unwrap() {
        *h.entry(find_occurrences(&m, pattern).len() as u32).or_default() += 1;
    }
    h
}

#[test]
fn marked_counts_match_brute_force() {
    for (sys, pat, k) in [
        (dgt_system(), fixture("dgt"), 3u32),
        (polygon_system(4), fixture("polygon4"), 4),
        (polygon_system(2), fixture("polygon2"), 7),
    ] {
        let fam = solve_marked_dde(&sys, 6, k).unwrap();
        let table = CountTable::from_family(&fam);
        for n in 0..=6usize {
            let hist = occurrence_histogram(n, &pat);
            for (&marks, &count) in &hist {
                let got = table
                    .by_marks
                    .get(&(n as u32, vec![marks]))
                    .cloned()
                    .unwrap_or_else(BigInt::zero);
                assert_eq!(got, BigInt::from(count), "n={n} marks={marks}");
            }
            let listed: i64 = hist.values().sum();
            assert_eq!(BigInt::from(listed), table.total(n));
        }
    }
}

#[test]
fn factorial_moments_match_brute_force() {
    let fam = solve_marked_dde(&polygon_system(2), 5, 2).unwrap();
    for n in 0..=5u32 {
        let maps = brute_force_maps(n as usize).unwrap();
        let pat = fixture("polygon2");
        let counts: Vec<i64> = maps.iter().map(|m| find_occurrences(m, &pat).len() as i64).collect();
        let total = counts.len() as i64;
        let first: i64 = counts.iter().sum();
        let second: i64 = counts.iter().map(|c| c * (c - 1)).sum();
        assert_eq!(
            factorial_moment_exact(&fam, n, &[1]).unwrap(),
            Rational::new(first.into(), total.into())
        );
        assert_eq!(
            factorial_moment_exact(&fam, n, &[2]).unwrap(),
            Rational::new(second.into(), total.into())
        );
        assert_eq!(factorial_moment_exact(&fam, n, &[0]).unwrap(), Rational::from_integer(1.into()));
    }
    assert!(factorial_moment_exact(&fam, 9, &[1]).is_err());
}

/// Simple boundary of length l, and partial simple boundary of length l.
fn boundary_profile(m: &RootedMap) -> (Option<usize>, usize) {
    if m.is_vertex_map() {
        return (None, 0);
    }
    let walk = m.root_face();
    let vid = m.vertices().id;
    // Walk from the root vertex along the root edge: darts r = alpha(walk[0]), then onward.
    let simple = if m.has_simple_boundary() { Some(walk.len()) } else { None };
    // Path in root-edge direction: the darts alpha(x) for x in walk, reversed order.
    let mut steps = Vec::new();
    let mut x = m.root();
    for _ in 0..walk.len() {
        steps.push(x);
        // Previous dart of the root face walk, mirrored.
        let prev = walk[(walk.iter().position(|&w| w == m.alpha(x)).unwrap() + walk.len() - 1) % walk.len()];
        x = m.alpha(prev);
    }
    let mut seen_v = HashSet::new();
    let mut seen_e = HashSet::new();
    seen_v.insert(vid[steps[0] as usize]);
    let mut partial = 0;
    for &d in &steps {
        let e = m.edge_of(d);
        let w = vid[m.alpha(d) as usize];
        if !seen_e.insert(e) || !seen_v.insert(w) {
            break;
        }
        partial += 1;
    }
    (simple, partial.min(walk.len()))
}

#[test]
fn boundary_series_match_brute_force() {
    let fam = solve_map_dde(6).with_boundary_series(4).unwrap();
    for n in 1..=6usize {
        let maps = brute_force_maps(n).unwrap();
        for l in 1..=4usize {
            let simple = maps
                .iter()
                .filter(|m| boundary_profile(m).0 == Some(l))
                .count();
            let s = fam.s[l - 1].coeff(n as u32, 0, &[]).unwrap();
            assert_eq!(s, Rational::from_integer(simple.into()), "S_{l} n={n}");
            for j in 0..=2 * n {
                let partial = maps
                    .iter()
                    .filter(|m| m.root_face_valency() == j && j > l && boundary_profile(m).1 >= l)
                    .count();
                let p = fam.p[l].coeff(n as u32, j as u32, &[]).unwrap();
                assert_eq!(p, Rational::from_integer(partial.into()), "P_{l} n={n} j={j}");
            }
        }
    }
}

#[test]
fn dgt_mean_identity_matches_series() {
    let fam = solve_marked_dde(&dgt_system(), 40, 1).unwrap();
    for n in 0..=40 {
        assert_eq!(factorial_moment_exact(&fam, n, &[1]).unwrap(), dgt_mean_exact(n), "n={n}");
    }
}
