use std::collections::BTreeMap;

use planar_patterns::intersections::*;
use planar_patterns::map_core::{BoundaryShape, Pattern};

fn fixture(name: &str) -> Pattern {
    let path = format!("{}/fixtures/{name}.map", env!("CARGO_MANIFEST_DIR"));
    Pattern::from_text(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn shape(h: u32, e: u32, s: &[u32]) -> BoundaryShape {
    BoundaryShape { h, e, s: s.to_vec() }
}

#[test]
fn non_self_intersecting_patterns_have_empty_catalogs() {
    for name in ["dgt", "tgp", "polygon1", "polygon2", "polygon3", "polygon4"] {
        let cat = enumerate_intersection_types(&fixture(name)).unwrap();
        assert!(cat.is_empty(), "{name}");
        assert_eq!(cat.class_count(), 1);
        assert_eq!(cat.t, vec![1]);
        let terms = cat.marking_terms();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].h as usize, cat.l0);
        assert_eq!((terms[0].c, terms[0].e), (1, 0));
    }
}

#[test]
fn koala_types_match_marking_equation() {
    let cat = enumerate_intersection_types(&fixture("koala")).unwrap();
    assert_eq!(cat.len(), 16);
    assert_eq!(cat.class_count(), 13);
    assert_eq!((cat.l0, cat.d0, cat.r0), (4, 2, 2));
    // (c, e, h, s) of every class term.
    let mut got: Vec<_> = cat
        .marking_terms()
        .into_iter()
        .map(|t| (t.c, t.e, t.h, t.s))
        .collect();
    let mut want = vec![
        (1, 0, 4, vec![]),
        (1, 0, 6, vec![]),
        (3, 0, 3, vec![0, 0, 1]),
        (4, 0, 4, vec![0, 1]),
        (4, 1, 4, vec![]),
        (2, 0, 2, vec![0, 0, 0, 1]),
        (2, 1, 2, vec![0, 1]),
        (2, 2, 2, vec![]),
        (2, 1, 2, vec![0, 1]),
        (2, 0, 2, vec![0, 2]),
        (1, 0, 2, vec![0, 2]),
        (1, 2, 2, vec![]),
        (2, 1, 2, vec![0, 1]),
    ];
    got.sort();
    want.sort();
    assert_eq!(got, want);
    for ty in &cat.types {
        assert_eq!(ty.shape.valency() as usize, ty.post_deletion.face_walk(ty.deletion_face).len());
        assert_eq!(ty.c, cat.classes[ty.face_class - 1].c);
    }
    let halves: Vec<usize> = (1..=16)
        .filter(|&i| cat.overcount_factor(i) == planar_patterns::series::Rational::new(1.into(), 2.into()))
        .collect();
    assert_eq!(halves.len(), 2);
    for i in halves {
        assert_eq!(cat.types[i - 1].d, 3);
        assert_eq!(cat.types[i - 1].shape.h, 2);
    }
}

#[test]
fn koala_class_partition() {
    let cat = enumerate_intersection_types(&fixture("koala")).unwrap();
    let mut groups: BTreeMap<usize, Vec<(BoundaryShape, usize, usize)>> = BTreeMap::new();
    for ty in &cat.types {
        groups.entry(ty.face_class).or_default().push((ty.shape.clone(), ty.r, ty.d));
    }
    let mut sizes: Vec<usize> = groups.values().map(|g| g.len()).collect();
    sizes.sort();
    assert_eq!(sizes, vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 2]);
    assert!(groups
        .values()
        .any(|g| g.len() == 2 && g.iter().all(|(s, _, _)| *s == shape(2, 2, &[]))));
    assert_eq!(cat.t[0], cat.types.iter().find(|t| t.shape == shape(4, 0, &[])).unwrap().face_class);
}

#[test]
fn catalog_json_round_trip() {
    let cat = enumerate_intersection_types(&fixture("koala")).unwrap();
    let rec: CatalogRecord = serde_json::from_str(&cat.to_json()).unwrap();
    assert_eq!(rec.types.len(), 16);
    assert_eq!(rec.face_classes, 13);
}

#[test]
fn double_triangle_oracle_small_hosts() {
    let cat = enumerate_intersection_types(&fixture("double_triangle")).unwrap();
    assert!(!cat.is_empty());
    let report = brute_force_oracle(&cat, 7).unwrap();
    assert_eq!(report.unknown_pairs, 0);
    assert!(report.unwitnessed_small_types(&cat).is_empty());
    let checks = report.overcount_checks(&cat);
    assert!(!checks.is_empty());
    for c in &checks {
        assert!(c.holds, "{c:?}");
    }
    let p = cat.pattern.map();
    let (v, f) = (p.vertices().len(), p.faces().len());
    assert!(report.max_intersection_degree <= v * f * f);
}

#[test]
fn koala_oracle_small_hosts() {
    let cat = enumerate_intersection_types(&fixture("koala")).unwrap();
    let report = brute_force_oracle(&cat, 8).unwrap();
    assert_eq!(report.unknown_pairs, 0);
    assert!(report.unwitnessed_small_types(&cat).is_empty());
    for c in report.overcount_checks(&cat) {
        assert!(c.holds, "{c:?}");
    }
}
