use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;

use planar_patterns::asymptotics::{reconstruct_rational, to_decimal};
use planar_patterns::enumeration::tutte_count;
use planar_patterns::map_core::{find_occurrences, Dart, Pattern, RootedMap};
use planar_patterns::sampler::{summarize, trial_rng, SamplerTables, TableMode};
use planar_patterns::series::{Monomial, Rational, TruncatedSeries};

const N: u32 = 3;
const K: u32 = 2;

fn series_strategy() -> impl Strategy<Value = TruncatedSeries> {
    prop::collection::vec((0..=N, 0..=4u32, 0..=K, -5i64..=5, 1i64..=3), 0..8).prop_map(|terms| {
        let mut s = TruncatedSeries::zero(N, 1, K);
        for (n, j, k, a, b) in terms {
            s.add_to(Monomial::new(n, j, vec![k]), &Rational::new(a.into(), b.into()));
        }
        s
    })
}

fn same(a: &TruncatedSeries, b: &TruncatedSeries) -> bool {
    a.try_sub(b).unwrap().is_zero()
}

fn fixture(name: &str) -> Pattern {
    let path = format!("{}/fixtures/{name}.map", env!("CARGO_MANIFEST_DIR"));
    Pattern::from_text(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn tables() -> &'static SamplerTables {
    use std::sync::OnceLock;
    static T: OnceLock<SamplerTables> = OnceLock::new();
    T.get_or_init(|| SamplerTables::new(40, TableMode::Exact))
}

fn random_map(n: usize, seed: u64) -> RootedMap {
    tables().sample(n, &mut trial_rng(seed, 0)).unwrap()
}

/// Conjugates the map by a dart permutation.
fn relabel(m: &RootedMap, perm: &[Dart]) -> RootedMap {
    let d = m.dart_count();
    let mut sigma = vec![0; d];
    let mut alpha = vec![0; d];
    for x in 0..d {
        sigma[perm[x] as usize] = perm[m.sigma(x as Dart) as usize];
        alpha[perm[x] as usize] = perm[m.alpha(x as Dart) as usize];
    }
    RootedMap::new(sigma, alpha, perm[m.root() as usize]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_laws(a in series_strategy(), b in series_strategy(), c in series_strategy()) {
        prop_assert!(same(&a.try_add(&b).unwrap(), &b.try_add(&a).unwrap()));
        prop_assert!(same(&a.try_mul(&b).unwrap(), &b.try_mul(&a).unwrap()));
        let ab_c = a.try_mul(&b).unwrap().try_mul(&c).unwrap();
        let a_bc = a.try_mul(&b.try_mul(&c).unwrap()).unwrap();
        prop_assert!(same(&ab_c, &a_bc));
        let left = a.try_mul(&b.try_add(&c).unwrap()).unwrap();
        let right = a.try_mul(&b).unwrap().try_add(&a.try_mul(&c).unwrap()).unwrap();
        prop_assert!(same(&left, &right));
    }

    #[test]
    fn divided_difference_inverts(f in series_strategy()) {
        let one = TruncatedSeries::one(N, 1, K);
        let u = TruncatedSeries::monomial(N, 1, K, Monomial::new(0, 1, vec![0]), Rational::from_integer(1.into()));
        let u_minus_one = u.try_sub(&one).unwrap();
        let back = f.divided_difference_u().try_mul(&u_minus_one).unwrap().try_add(&f.eval_u_one()).unwrap();
        prop_assert!(same(&back, &f));
    }

    #[test]
    fn sampled_maps_are_planar(n in 0usize..=40, seed in any::<u64>()) {
        let m = random_map(n, seed);
        let stats = m.validate().unwrap();
        prop_assert_eq!(m.edge_count(), n);
        prop_assert_eq!(stats.vertices + stats.faces, n + 2);
    }

    #[test]
    fn boundary_shape_matches_face_length(n in 1usize..=25, seed in any::<u64>()) {
        let m = random_map(n, seed);
        let faces = m.faces();
        let mut seen = vec![false; faces.len()];
        for d in 0..m.dart_count() as Dart {
            let f = faces.id[d as usize];
            if !seen[f] {
                seen[f] = true;
                let shape = m.boundary_shape(d);
                prop_assert_eq!(shape.valency() as usize, m.face_walk(d).len());
            }
        }
    }

    #[test]
    fn canonical_form_ignores_labels(n in 1usize..=30, seed in any::<u64>(), shuffle in any::<u64>()) {
        use rand::seq::SliceRandom;
        let m = random_map(n, seed);
        let mut perm: Vec<Dart> = (0..m.dart_count() as Dart).collect();
        perm.shuffle(&mut trial_rng(shuffle, 1));
        prop_assert_eq!(relabel(&m, &perm).canonical_form(), m.canonical_form());
    }

    #[test]
    fn occurrences_ignore_root_within_root_face(n in 1usize..=14, seed in any::<u64>(), pick in any::<usize>()) {
        let m = random_map(n, seed);
        let walk = m.root_face();
        let new_root = m.alpha(walk[pick % walk.len()]);
        let moved = m.rerooted(new_root);
        prop_assert_eq!(moved.root_face().len(), walk.len());
        for name in ["dgt", "polygon2", "polygon3"] {
            let p = fixture(name);
            prop_assert_eq!(find_occurrences(&moved, &p).len(), find_occurrences(&m, &p).len());
        }
    }

    #[test]
    fn table_rows_sum_to_tutte_numbers(n in 0usize..=40) {
        let row: BigUint = tables().exact_row(n).unwrap().iter().sum();
        prop_assert_eq!(row, tutte_count(n as u32));
    }

    #[test]
    fn reconstruction_recovers_small_fractions(a in -10_000i64..10_000, b in 1i64..100_000, noise in -1000i64..1000) {
        let x = Rational::new(a.into(), b.into());
        let perturbed = &x + Rational::new(noise.into(), BigInt::from(1) << 200usize);
        let back = reconstruct_rational(&perturbed, -150.0, &BigInt::from(1_000_000));
        prop_assert_eq!(back, Some(x.clone()));
        let dec: f64 = to_decimal(&x, 20).parse().unwrap();
        prop_assert!((dec - a as f64 / b as f64).abs() < 1e-12);
    }

    #[test]
    fn constant_samples_have_no_spread(c in 0u64..50, len in 1usize..40) {
        let s = summarize(&vec![c; len], 0.99);
        prop_assert_eq!(s.mean, c as f64);
        prop_assert_eq!(s.variance, 0.0);
        prop_assert_eq!(s.mean_radius, 0.0);
    }
}
