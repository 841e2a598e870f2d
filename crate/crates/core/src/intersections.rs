//! Intersection types of a pattern with itself, the deletion procedure and the
//! face classes it produces.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumeration::MarkingTerm;
use crate::map_core::{
    class_code_in_submap, shape_in_boundary_submap, simple_polygon, BoundaryShape, CanonicalForm, Dart, HostIndex,
    MapError, Occurrence, Pattern, RootedMap,
};
use crate::series::Rational;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IntersectionError {
    #[error("pattern boundary is not simple")]
    NonSimpleBoundary,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("deletion face is not a single face (type key {0:?})")]
    SplitDeletionFace(Vec<u32>),
}

/// One intersection type with its canonical rooted representative.
#[derive(Debug, Clone)]
pub struct IntersectionType {
    /// 1-based index.
    pub index: usize,
    /// Canonical rooted intersection type, relabelled in breadth-first order.
    pub map: RootedMap,
    /// Per dart: 1 for the first occurrence, 2 for the second, 3 for both.
    pub tags: Vec<u32>,
    pub key: CanonicalForm,
    pub r: usize,
    /// Deleted edges, each given by its smaller dart in `map`.
    pub deletion_set: Vec<Dart>,
    pub d: usize,
    /// Post-deletion map, rooted as `map`.
    pub post_deletion: RootedMap,
    /// A dart of `post_deletion` on the deletion face.
    pub deletion_face: Dart,
    pub c: usize,
    pub shape: BoundaryShape,
    /// 1-based face class index `t(i)`.
    pub face_class: usize,
}

/// A distinct post-deletion face boundary structure.
#[derive(Debug, Clone)]
pub struct FaceClass {
    /// 1-based index.
    pub index: usize,
    pub code: CanonicalForm,
    pub shape: BoundaryShape,
    pub c: usize,
    pub representative: RootedMap,
    pub deletion_face: Dart,
}

#[derive(Debug, Clone)]
pub struct IntersectionCatalog {
    pub pattern: Pattern,
    pub l0: usize,
    pub d0: usize,
    pub r0: usize,
    pub types: Vec<IntersectionType>,
    /// `t[0]` is the class of the simple `l0`-gon, `t[i]` the class of type `i`.
    pub t: Vec<usize>,
    pub classes: Vec<FaceClass>,
}

/// Pattern data with inverse rotation and interior flags.
struct Side {
    sigma: Vec<Dart>,
    sigma_inv: Vec<Dart>,
    alpha: Vec<Dart>,
    interior: Vec<bool>,
    vid: Vec<usize>,
    nv: usize,
    interior_faces: Vec<Vec<Dart>>,
    boundary_vertex: Vec<bool>,
    /// Darts on the interior side of a boundary edge.
    boundary_darts: Vec<Dart>,
}

impl Side {
    fn new(p: &Pattern) -> Self {
        let m = p.map();
        let n = m.dart_count();
        let sigma: Vec<Dart> = m.sigma_slice().to_vec();
        let alpha: Vec<Dart> = m.alpha_slice().to_vec();
        let mut sigma_inv = vec![0; n];
        for d in 0..n {
            sigma_inv[sigma[d] as usize] = d as Dart;
        }
        let interior: Vec<bool> = (0..n as Dart).map(|d| p.is_interior(d)).collect();
        let verts = m.vertices();
        let faces = m.faces();
        let interior_faces = faces
            .orbits
            .iter()
            .filter(|o| interior[o[0] as usize])
            .cloned()
            .collect();
        let mut boundary_vertex = vec![false; verts.len()];
        let mut boundary_darts = Vec::new();
        for d in 0..n {
            // The corner after d lies in face(alpha d).
            if !interior[alpha[d] as usize] {
                boundary_vertex[verts.id[d]] = true;
            }
            if interior[d] && !interior[alpha[d] as usize] {
                boundary_darts.push(d as Dart);
            }
        }
        Side {
            sigma,
            sigma_inv,
            alpha,
            interior,
            nv: verts.len(),
            vid: verts.id,
            interior_faces,
            boundary_vertex,
            boundary_darts,
        }
    }

    fn corner_after_interior(&self, d: Dart) -> bool {
        self.interior[self.alpha[d as usize] as usize]
    }

    fn corner_before_interior(&self, d: Dart) -> bool {
        self.corner_after_interior(self.sigma_inv[d as usize])
    }
}

/// Partial identification of the second copy with the first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Glue {
    /// Second-copy dart to first-copy dart.
    pi: Vec<u32>,
    pi_inv: Vec<u32>,
    /// Second-copy vertex to first-copy vertex.
    vmap: Vec<u32>,
    vinv: Vec<u32>,
}

impl Glue {
    fn new(s: &Side) -> Self {
        let n = s.sigma.len();
        Glue {
            pi: vec![NONE; n],
            pi_inv: vec![NONE; n],
            vmap: vec![NONE; s.nv],
            vinv: vec![NONE; s.nv],
        }
    }

    fn merge_vertex(&mut self, v: usize, w: usize) -> bool {
        if self.vmap[w] == v as u32 {
            return true;
        }
        if self.vmap[w] != NONE || self.vinv[v] != NONE {
            return false;
        }
        self.vmap[w] = v as u32;
        self.vinv[v] = w as u32;
        true
    }

    /// Identifies first-copy dart `a` with second-copy dart `b` and closes
    /// under `alpha` and the rotations forced by interior corners.
    fn merge(&mut self, s: &Side, a: Dart, b: Dart) -> bool {
        let mut queue = vec![(a, b)];
        while let Some((a, b)) = queue.pop() {
            if self.pi[b as usize] == a {
                continue;
            }
            if self.pi[b as usize] != NONE || self.pi_inv[a as usize] != NONE {
                return false;
            }
            self.pi[b as usize] = a;
            self.pi_inv[a as usize] = b;
            if !self.merge_vertex(s.vid[a as usize], s.vid[b as usize]) {
                return false;
            }
            queue.push((s.alpha[a as usize], s.alpha[b as usize]));
            if s.corner_after_interior(a) && s.corner_after_interior(b) {
                queue.push((s.sigma[a as usize], s.sigma[b as usize]));
            }
            if s.corner_before_interior(a) && s.corner_before_interior(b) {
                queue.push((s.sigma_inv[a as usize], s.sigma_inv[b as usize]));
            }
        }
        true
    }

    fn shares_face(&self, s: &Side) -> bool {
        s.interior_faces
            .iter()
            .any(|f| f.iter().all(|&d| self.pi[d as usize] != NONE && s.interior[self.pi[d as usize] as usize]))
    }
}

/// Stage one: every choice of shared faces (each second-copy interior face is
/// either unshared or glued to a first-copy face of equal length at some offset).
fn face_stage(s: &Side, idx: usize, g: Glue, any_shared: bool, out: &mut HashSet<Glue>) {
    if idx == s.interior_faces.len() {
        if any_shared {
            out.insert(g);
        }
        return;
    }
    let f2 = &s.interior_faces[idx];
    if g.pi[f2[0] as usize] != NONE && s.interior[g.pi[f2[0] as usize] as usize] {
        face_stage(s, idx + 1, g, true, out);
        return;
    }
    face_stage(s, idx + 1, g.clone(), any_shared, out);
    for f1 in &s.interior_faces {
        if f1.len() != f2.len() {
            continue;
        }
        for off in 0..f1.len() {
            let mut h = g.clone();
            if h.merge(s, f1[off], f2[0]) {
                face_stage(s, idx + 1, h, true, out);
            }
        }
    }
}

/// Stage two: boundary edges shared with the interiors on opposite sides.
fn touch_edge_stage(s: &Side, idx: usize, g: Glue, out: &mut HashSet<Glue>) {
    if idx == s.boundary_darts.len() {
        out.insert(g);
        return;
    }
    let b = s.boundary_darts[idx];
    if g.pi[b as usize] != NONE {
        touch_edge_stage(s, idx + 1, g, out);
        return;
    }
    for &a in &s.boundary_darts {
        let ea = s.alpha[a as usize];
        if g.pi_inv[ea as usize] != NONE {
            continue;
        }
        let mut h = g.clone();
        if h.merge(s, ea, b) {
            touch_edge_stage(s, idx + 1, h, out);
        }
    }
    touch_edge_stage(s, idx + 1, g, out);
}

/// Stage three: boundary vertices shared without a common dart.
fn touch_vertex_stage(s: &Side, w: usize, g: Glue, out: &mut HashSet<Glue>) {
    if w == s.nv {
        out.insert(g);
        return;
    }
    if !s.boundary_vertex[w] || g.vmap[w] != NONE {
        touch_vertex_stage(s, w + 1, g, out);
        return;
    }
    for v in 0..s.nv {
        if s.boundary_vertex[v] && g.vinv[v] == NONE {
            let mut h = g.clone();
            h.merge_vertex(v, w);
            touch_vertex_stage(s, w + 1, h, out);
        }
    }
    touch_vertex_stage(s, w + 1, g, out);
}

/// A glued union with both copies' dart images.
struct Union {
    map: RootedMap,
    /// Union dart of each first-copy and second-copy dart.
    img1: Vec<Dart>,
    img2: Vec<Dart>,
}

/// Builds all embeddings of the union described by `g` that keep both copies
/// genuine occurrences and have genus 0.
fn build_unions(s: &Side, g: &Glue) -> Vec<Union> {
    let n = s.sigma.len();
    let img1: Vec<Dart> = (0..n as Dart).collect();
    let mut img2 = vec![0; n];
    let mut next = n as Dart;
    for b in 0..n {
        if g.pi[b] != NONE {
            img2[b] = g.pi[b];
        } else {
            img2[b] = next;
            next += 1;
        }
    }
    let total = next as usize;
    let mut alpha = vec![NONE; total];
    for d in 0..n {
        alpha[img1[d] as usize] = img1[s.alpha[d] as usize];
        alpha[img2[d] as usize] = img2[s.alpha[d] as usize];
    }
    // Vertex groups: first-copy vertices (with their partners) then unmatched second-copy vertices.
    let mut group_of1 = vec![0usize; s.nv];
    let mut group_of2 = vec![usize::MAX; s.nv];
    let mut groups = 0;
    for v in 0..s.nv {
        group_of1[v] = groups;
        if g.vinv[v] != NONE {
            group_of2[g.vinv[v] as usize] = groups;
        }
        groups += 1;
    }
    for w in 0..s.nv {
        if group_of2[w] == usize::MAX {
            group_of2[w] = groups;
            groups += 1;
        }
    }
    let mut members: Vec<Vec<Dart>> = vec![Vec::new(); groups];
    let mut in_group = vec![false; total];
    let mut succ = vec![NONE; total];
    let mut pred = vec![NONE; total];
    for (copy_img, group_of) in [(&img1, &group_of1), (&img2, &group_of2)] {
        for d in 0..n {
            let x = copy_img[d];
            let gi = group_of[s.vid[d]];
            if !in_group[x as usize] {
                in_group[x as usize] = true;
                members[gi].push(x);
            }
            if s.corner_after_interior(d as Dart) {
                let y = copy_img[s.sigma[d] as usize];
                if succ[x as usize] == NONE && pred[y as usize] == NONE {
                    succ[x as usize] = y;
                    pred[y as usize] = x;
                } else if succ[x as usize] != y || pred[y as usize] != x {
                    return Vec::new();
                }
            }
        }
    }
    // Chains per vertex group.
    let mut group_chains: Vec<Vec<Vec<Dart>>> = Vec::with_capacity(groups);
    for mem in &members {
        let mut chains = Vec::new();
        let mut covered = 0;
        for &x in mem {
            if pred[x as usize] == NONE {
                let mut chain = vec![x];
                let mut y = x;
                while succ[y as usize] != NONE {
                    y = succ[y as usize];
                    chain.push(y);
                }
                covered += chain.len();
                chains.push(chain);
            }
        }
        if chains.is_empty() {
            // A closed cycle; it must cover the whole group.
            let mut chain = vec![mem[0]];
            let mut y = succ[mem[0] as usize];
            while y != mem[0] {
                chain.push(y);
                y = succ[y as usize];
            }
            if chain.len() != mem.len() {
                return Vec::new();
            }
            group_chains.push(vec![chain]);
            continue;
        }
        if covered != mem.len() {
            return Vec::new();
        }
        group_chains.push(chains);
    }
    let mut out = Vec::new();
    let mut choice: Vec<Vec<usize>> = group_chains.iter().map(|c| (0..c.len()).collect()).collect();
    loop {
        let mut sigma = vec![NONE; total];
        for (gi, chains) in group_chains.iter().enumerate() {
            let order: Vec<Dart> = choice[gi].iter().flat_map(|&c| chains[c].iter().copied()).collect();
            for k in 0..order.len() {
                sigma[order[k] as usize] = order[(k + 1) % order.len()];
            }
        }
        let map = RootedMap::from_parts_unchecked(sigma, alpha.clone(), 0);
        if map.validate().is_ok() && faces_preserved(s, &map, &img1) && faces_preserved(s, &map, &img2) {
            out.push(Union {
                map,
                img1: img1.clone(),
                img2: img2.clone(),
            });
        }
        if !next_arrangement(&mut choice) {
            break;
        }
    }
    out
}

/// Advances the chain orders (first chain of each group fixed) to the next combination.
fn next_arrangement(choice: &mut [Vec<usize>]) -> bool {
    for c in choice.iter_mut() {
        if c.len() > 2 && next_permutation(&mut c[1..]) {
            return true;
        }
        if c.len() > 2 {
            c[1..].sort_unstable();
        }
    }
    false
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn faces_preserved(s: &Side, map: &RootedMap, img: &[Dart]) -> bool {
    s.interior_faces.iter().all(|f| {
        (0..f.len()).all(|k| map.phi(img[f[k] as usize]) == img[f[(k + 1) % f.len()] as usize])
    })
}

/// Membership tags (bit 0: first copy, bit 1: second copy) and their swap.
fn membership_tags(len: usize, img1: &[Dart], img2: &[Dart]) -> (Vec<u32>, Vec<u32>) {
    let mut t = vec![0u32; len];
    for &x in img1 {
        t[x as usize] |= 1;
    }
    for &x in img2 {
        t[x as usize] |= 2;
    }
    let swapped = t.iter().map(|&v| ((v & 1) << 1) | (v >> 1)).collect();
    (t, swapped)
}

/// Canonical key of a map with an unordered pair of tagged occurrences, rooted
/// on the face of `face_dart`: the least code over rerootings on that face and
/// over swapping the pair. Returns `(key, rotation count, best root, swapped)`.
pub fn pair_key(map: &RootedMap, tags: &[u32], swapped: &[u32], face_dart: Dart) -> (CanonicalForm, usize, Dart, bool) {
    let mut distinct = HashSet::new();
    let mut best: Option<(CanonicalForm, Dart, bool)> = None;
    for x in map.face_walk(face_dart) {
        let root = map.alpha(x);
        let a = map.code_from(root, Some(tags));
        let b = map.code_from(root, Some(swapped));
        let (m, sw) = if b < a { (b, true) } else { (a, false) };
        if best.as_ref().map_or(true, |(c, _, _)| m < *c) {
            best = Some((m.clone(), root, sw));
        }
        distinct.insert(m);
    }
    let (key, root, sw) = best.expect("nonempty face");
    (key, distinct.len(), root, sw)
}

/// Face class code, rotation count and shape of the face of `f` in a map whose
/// edges all bound that face, seen from the root face.
fn class_of(map: &RootedMap, f: Dart) -> (CanonicalForm, usize, BoundaryShape) {
    let outer = map.alpha(map.root());
    let (code, c) = class_code_in_submap(map, f, outer);
    let shape = shape_in_boundary_submap(map, f, Some(outer));
    (code, c, shape)
}

struct RawType {
    key: CanonicalForm,
    r: usize,
    map: RootedMap,
    tags: Vec<u32>,
    interior_edge: Vec<bool>,
    interior_face_dart: Vec<bool>,
}

fn raw_types_of_union(s: &Side, u: &Union) -> Vec<RawType> {
    let map = &u.map;
    let len = map.dart_count();
    let (tags, swapped) = membership_tags(len, &u.img1, &u.img2);
    let mut interior_face_dart = vec![false; len];
    let mut interior_edge = vec![false; len];
    for d in 0..s.sigma.len() {
        if s.interior[d] {
            interior_face_dart[u.img1[d] as usize] = true;
            interior_face_dart[u.img2[d] as usize] = true;
            if s.interior[s.alpha[d] as usize] {
                interior_edge[u.img1[d] as usize] = true;
                interior_edge[u.img2[d] as usize] = true;
            }
        }
    }
    let faces = map.faces();
    let mut out = Vec::new();
    for orb in &faces.orbits {
        if orb.iter().any(|&x| interior_face_dart[x as usize]) {
            continue;
        }
        let (key, r, root, sw) = pair_key(map, &tags, &swapped, orb[0]);
        let (order, label) = map.bfs_labels(root);
        let relabel = |v: &[u32]| -> Vec<u32> { order.iter().map(|&d| v[d as usize]).collect() };
        let sigma = order.iter().map(|&d| label[map.sigma(d) as usize]).collect();
        let alpha = order.iter().map(|&d| label[map.alpha(d) as usize]).collect();
        let canon = RootedMap::from_parts_unchecked(sigma, alpha, 0);
        let t = if sw { relabel(&swapped) } else { relabel(&tags) };
        out.push(RawType {
            key,
            r,
            map: canon,
            tags: t,
            interior_edge: order.iter().map(|&d| interior_edge[d as usize]).collect(),
            interior_face_dart: order.iter().map(|&d| interior_face_dart[d as usize]).collect(),
        });
    }
    out
}

/// Greedy deletion of interior edges in canonical (label) order, keeping the map connected.
fn deletion(raw: &RawType) -> Result<(Vec<Dart>, RootedMap, Dart), IntersectionError> {
    let map = &raw.map;
    let len = map.dart_count();
    let verts = map.vertices();
    let mut deleted = vec![false; len];
    let mut dset = Vec::new();
    for d in 0..len as Dart {
        let a = map.alpha(d);
        if d > a || !raw.interior_edge[d as usize] {
            continue;
        }
        deleted[d as usize] = true;
        deleted[a as usize] = true;
        if connected_without(map, &verts.id, verts.len(), &deleted) {
            dset.push(d);
        } else {
            deleted[d as usize] = false;
            deleted[a as usize] = false;
        }
    }
    let keep: Vec<bool> = deleted.iter().map(|&x| !x).collect();
    let (post, new_id) = map.submap(&keep, map.root());
    let post_faces = post.faces();
    let mut face = None;
    for d in 0..len {
        if keep[d] && raw.interior_face_dart[d] {
            let f = post_faces.id[new_id[d] as usize];
            match face {
                None => face = Some((f, new_id[d])),
                Some((g, _)) if g != f => return Err(IntersectionError::SplitDeletionFace(raw.key.0.clone())),
                _ => {}
            }
        }
    }
    let (_, fdart) = face.expect("deletion face");
    Ok((dset, post, fdart))
}

fn connected_without(map: &RootedMap, vid: &[usize], nv: usize, deleted: &[bool]) -> bool {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut comps = nv;
    for d in 0..map.dart_count() as Dart {
        if deleted[d as usize] || d > map.alpha(d) {
            continue;
        }
        let a = find(&mut parent, vid[d as usize]);
        let b = find(&mut parent, vid[map.alpha(d) as usize]);
        if a != b {
            parent[a] = b;
            comps -= 1;
        }
    }
    comps == 1
}

/// Enumerates all intersection types of `pattern`.
pub fn enumerate_intersection_types(pattern: &Pattern) -> Result<IntersectionCatalog, IntersectionError> {
    if !pattern.map().has_simple_boundary() {
        return Err(IntersectionError::NonSimpleBoundary);
    }
    let s = Side::new(pattern);
    let mut seeds = HashSet::new();
    face_stage(&s, 0, Glue::new(&s), false, &mut seeds);
    let seeds: Vec<Glue> = seeds.into_iter().collect();
    let raw: Vec<RawType> = seeds
        .par_iter()
        .map(|seed| {
            let mut touched = HashSet::new();
            touch_edge_stage(&s, 0, seed.clone(), &mut touched);
            let mut full = HashSet::new();
            for g in touched {
                touch_vertex_stage(&s, 0, g, &mut full);
            }
            let mut found: BTreeMap<CanonicalForm, RawType> = BTreeMap::new();
            for g in full {
                if !g.shares_face(&s) {
                    continue;
                }
                for u in build_unions(&s, &g) {
                    if distinct_occurrences(&u) {
                        for t in raw_types_of_union(&s, &u) {
                            found.entry(t.key.clone()).or_insert(t);
                        }
                    }
                }
            }
            found.into_values().collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    let mut unique: BTreeMap<CanonicalForm, RawType> = BTreeMap::new();
    for t in raw {
        unique.entry(t.key.clone()).or_insert(t);
    }
    let mut raw: Vec<RawType> = unique.into_values().collect();
    raw.sort_by(|a, b| (a.map.edge_count(), &a.key).cmp(&(b.map.edge_count(), &b.key)));

    let l0 = pattern.boundary_len();
    let poly = simple_polygon(l0);
    let (code0, c0, shape0) = class_of(&poly, poly.root());
    let mut classes = vec![FaceClass {
        index: 1,
        code: code0,
        shape: shape0,
        c: c0,
        representative: poly.clone(),
        deletion_face: poly.root(),
    }];
    let mut class_index: HashMap<CanonicalForm, usize> = HashMap::new();
    class_index.insert(classes[0].code.clone(), 1);
    let mut t = vec![1];
    let mut types = Vec::with_capacity(raw.len());
    for (i, rt) in raw.into_iter().enumerate() {
        let (dset, post, fdart) = deletion(&rt)?;
        let (code, c, shape) = class_of(&post, fdart);
        let j = *class_index.entry(code.clone()).or_insert_with(|| {
            classes.push(FaceClass {
                index: classes.len() + 1,
                code,
                shape: shape.clone(),
                c,
                representative: post.clone(),
                deletion_face: fdart,
            });
            classes.len()
        });
        t.push(j);
        types.push(IntersectionType {
            index: i + 1,
            map: rt.map,
            tags: rt.tags,
            key: rt.key,
            r: rt.r,
            d: dset.len(),
            deletion_set: dset,
            post_deletion: post,
            deletion_face: fdart,
            c,
            shape,
            face_class: j,
        });
    }
    Ok(IntersectionCatalog {
        pattern: pattern.clone(),
        l0,
        d0: pattern.interior_edge_count(),
        r0: pattern.rotation_count(),
        types,
        t,
        classes,
    })
}

fn distinct_occurrences(u: &Union) -> bool {
    let mut a = u.img1.clone();
    let mut b = u.img2.clone();
    a.sort_unstable();
    b.sort_unstable();
    a != b
}

/// JSON row of one intersection type.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeRecord {
    pub i: usize,
    pub r: usize,
    pub d: usize,
    pub c: usize,
    pub shape: BoundaryShape,
    pub t: usize,
    pub map: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogRecord {
    pub l0: usize,
    pub d0: usize,
    pub r0: usize,
    pub face_classes: usize,
    pub t: Vec<usize>,
    pub types: Vec<TypeRecord>,
}

impl IntersectionCatalog {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Number of face classes `J`.
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// `r_i / c_{t(i)}` for 1-based `i`.
    pub fn overcount_factor(&self, i: usize) -> Rational {
        let ty = &self.types[i - 1];
        Rational::new(BigInt::from(ty.r), BigInt::from(self.classes[ty.face_class - 1].c))
    }

    /// One marking term per face class; variable `j - 1` marks class `j`.
    pub fn marking_terms(&self) -> Vec<MarkingTerm> {
        self.classes
            .iter()
            .map(|cl| MarkingTerm::new(cl.index - 1, cl.c as u32, cl.shape.e, cl.shape.h, cl.shape.s.clone()))
            .collect()
    }

    /// Index of the type with the given key.
    pub fn type_of_key(&self, key: &CanonicalForm) -> Option<usize> {
        self.types.iter().find(|t| &t.key == key).map(|t| t.index)
    }

    /// Index of the face class with the given code.
    pub fn class_of_code(&self, code: &CanonicalForm) -> Option<usize> {
        self.classes.iter().find(|c| &c.code == code).map(|c| c.index)
    }

    pub fn to_record(&self) -> CatalogRecord {
        CatalogRecord {
            l0: self.l0,
            d0: self.d0,
            r0: self.r0,
            face_classes: self.classes.len(),
            t: self.t.clone(),
            types: self
                .types
                .iter()
                .map(|ty| TypeRecord {
                    i: ty.index,
                    r: ty.r,
                    d: ty.d,
                    c: ty.c,
                    shape: ty.shape.clone(),
                    t: ty.face_class,
                    map: ty.map.to_text(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("serializable")
    }
}

/// Key of the intersection type formed by two occurrences in a host, or
/// `None` when they share no face.
pub fn pair_type_key(host: &RootedMap, a: &Occurrence, b: &Occurrence) -> Option<CanonicalForm> {
    if !a.face_image.iter().any(|f| b.face_image.contains(f)) {
        return None;
    }
    let mut keep = vec![false; host.dart_count()];
    for &x in a.dart_image.iter().chain(&b.dart_image) {
        keep[x as usize] = true;
    }
    let (sub, new_id) = host.submap(&keep, a.dart_image[0]);
    let img1: Vec<Dart> = a.dart_image.iter().map(|&x| new_id[x as usize]).collect();
    let img2: Vec<Dart> = b.dart_image.iter().map(|&x| new_id[x as usize]).collect();
    let (tags, swapped) = membership_tags(sub.dart_count(), &img1, &img2);
    let outer = host.containing_sub_face(host.alpha(host.root()), &new_id)?;
    Some(pair_key(&sub, &tags, &swapped, outer).0)
}

/// Keys of all intersecting unordered occurrence pairs in a host.
pub fn intersecting_pairs(host: &RootedMap, occurrences: &[Occurrence]) -> Vec<(usize, usize, CanonicalForm)> {
    let mut out = Vec::new();
    for i in 0..occurrences.len() {
        for j in i + 1..occurrences.len() {
            if let Some(k) = pair_type_key(host, &occurrences[i], &occurrences[j]) {
                out.push((i, j, k));
            }
        }
    }
    out
}

/// Class codes of all non-root faces of the host with the given valencies.
pub fn face_class_codes(host: &HostIndex, valencies: &[usize]) -> Vec<CanonicalForm> {
    let mut out = Vec::new();
    for (i, orb) in host.faces.orbits.iter().enumerate() {
        if i == host.root_face || !valencies.contains(&orb.len()) {
            continue;
        }
        if let Some(code) = host.map.face_class_code(orb[0]) {
            out.push(code);
        }
    }
    out
}

/// Brute-force counts behind the overcount identity, per type and host size.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_max: usize,
    /// `pairs[i][n]`: hosts with `n` edges and a distinguished intersecting pair of type `i` (1-based `i`).
    pub pairs: Vec<Vec<u64>>,
    /// `faces[j][n]`: hosts with `n` edges and a distinguished non-root face of class `j`.
    pub faces: Vec<Vec<u64>>,
    /// Intersecting pairs whose type is not in the catalog.
    pub unknown_pairs: u64,
    /// Largest number of occurrences intersecting a single occurrence.
    pub max_intersection_degree: usize,
}

/// Outcome of checking one witnessed type.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleCheck {
    pub i: usize,
    pub n: usize,
    pub m: u64,
    pub m_tilde: u64,
    pub holds: bool,
}

impl OracleReport {
    pub fn witnessed(&self, i: usize) -> bool {
        self.pairs[i].iter().any(|&c| c > 0)
    }

    /// `m_i(n) * c = r_i * m~(n - d_i)` for each witnessed type and each `n`.
    pub fn overcount_checks(&self, cat: &IntersectionCatalog) -> Vec<OracleCheck> {
        let mut out = Vec::new();
        for ty in &cat.types {
            if !self.witnessed(ty.index) {
                continue;
            }
            let c = cat.classes[ty.face_class - 1].c as u64;
            for n in ty.d..=self.n_max {
                let m = self.pairs[ty.index][n];
                let mt = self.faces[ty.face_class][n - ty.d];
                out.push(OracleCheck {
                    i: ty.index,
                    n,
                    m,
                    m_tilde: mt,
                    holds: m * c == ty.r as u64 * mt,
                });
            }
        }
        out
    }

    /// Catalog types small enough to appear but never seen in a host.
    pub fn unwitnessed_small_types(&self, cat: &IntersectionCatalog) -> Vec<usize> {
        cat.types
            .iter()
            .filter(|t| t.map.edge_count() <= self.n_max && !self.witnessed(t.index))
            .map(|t| t.index)
            .collect()
    }
}

/// Scans every map with at most `n_max` edges for intersecting occurrence
/// pairs and for faces of each catalog class.
pub fn brute_force_oracle(
    cat: &IntersectionCatalog,
    n_max: usize,
) -> Result<OracleReport, crate::enumeration::EnumerationError> {
    use crate::enumeration::{for_each_map, MapStore};
    let store = MapStore::new(n_max.saturating_sub(1))?;
    let mut report = OracleReport {
        n_max,
        pairs: vec![vec![0; n_max + 1]; cat.types.len() + 1],
        faces: vec![vec![0; n_max + 1]; cat.classes.len() + 1],
        ..Default::default()
    };
    let valencies: Vec<usize> = cat.classes.iter().map(|c| c.shape.valency() as usize).collect();
    let codes: HashMap<CanonicalForm, usize> = cat.classes.iter().map(|c| (c.code.clone(), c.index)).collect();
    let keys: HashMap<CanonicalForm, usize> = cat.types.iter().map(|t| (t.key.clone(), t.index)).collect();
    let pattern_edges = cat.pattern.map().edge_count();
    for n in 0..=n_max {
        for_each_map(n, &store, |host| {
            let idx = HostIndex::new(host);
            for code in face_class_codes(&idx, &valencies) {
                if let Some(&j) = codes.get(&code) {
                    report.faces[j][n] += 1;
                }
            }
            if n < pattern_edges || cat.types.is_empty() {
                return;
            }
            let occ = crate::map_core::find_occurrences_indexed(&idx, &cat.pattern);
            let mut degree = vec![0usize; occ.len()];
            for (a, b, key) in intersecting_pairs(host, &occ) {
                degree[a] += 1;
                degree[b] += 1;
                match keys.get(&key) {
                    Some(&i) => report.pairs[i][n] += 1,
                    None => report.unknown_pairs += 1,
                }
            }
            let md = degree.into_iter().max().unwrap_or(0);
            report.max_intersection_degree = report.max_intersection_degree.max(md);
        })?;
    }
    Ok(report)
}
