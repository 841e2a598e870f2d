//! Rooted planar maps as rotation systems.
//!
//! Conventions: `alpha` pairs the two darts of an edge, `sigma` is the
//! counterclockwise successor around a vertex, and `phi = sigma . alpha`
//! walks a face. The face of a dart `d` is its `phi`-orbit; the root face is
//! the face of `alpha(root)`, i.e. the face to the left of the root edge.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

pub type Dart = u32;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("sigma and alpha have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("odd dart count {0}")]
    OddDartCount(usize),
    #[error("{0} is not a permutation")]
    NotPermutation(&'static str),
    #[error("alpha is not an involution at dart {0}")]
    NonInvolution(Dart),
    #[error("alpha has a fixed point at dart {0}")]
    AlphaFixedPoint(Dart),
    #[error("root dart {0} out of range")]
    BadRoot(Dart),
    #[error("map is disconnected")]
    Disconnected,
    #[error("positive genus {genus} (V={v}, E={e}, F={f})")]
    PositiveGenus { genus: i64, v: usize, e: usize, f: usize },
    #[error("root face boundary is not simple")]
    NonSimpleBoundary,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Vertex, edge and face counts of a validated map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapStats {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RootedMap {
    sigma: Vec<Dart>,
    alpha: Vec<Dart>,
    root: Dart,
}

/// Canonical relabeling code: for each dart in breadth-first order from the
/// root, its `sigma` and `alpha` images, followed by optional dart tags.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalForm(pub Vec<u32>);

impl CanonicalForm {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Orbit labelling of darts: `id[d]` is the orbit index, `orbits[i]` lists darts in cyclic order.
#[derive(Debug, Clone)]
pub struct Orbits {
    pub id: Vec<usize>,
    pub orbits: Vec<Vec<Dart>>,
}

impl Orbits {
    fn of(len: usize, step: impl Fn(Dart) -> Dart) -> Orbits {
        let mut id = vec![usize::MAX; len];
        let mut orbits = Vec::new();
        for start in 0..len as Dart {
            if id[start as usize] != usize::MAX {
                continue;
            }
            let k = orbits.len();
            let mut cyc = Vec::new();
            let mut d = start;
            loop {
                id[d as usize] = k;
                cyc.push(d);
                d = step(d);
                if d == start {
                    break;
                }
            }
            orbits.push(cyc);
        }
        Orbits { id, orbits }
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }
}

/// Boundary shape `(h, e, s)` of a face: a simple `h`-gon, `e` bridges and
/// `s[i-1]` simple-boundary pieces of valency `i`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BoundaryShape {
    pub h: u32,
    pub e: u32,
    pub s: Vec<u32>,
}

impl BoundaryShape {
    pub fn valency(&self) -> u32 {
        self.h
            + 2 * self.e
            + self
                .s
                .iter()
                .enumerate()
                .map(|(i, c)| (i as u32 + 1) * c)
                .sum::<u32>()
    }

    fn normalized(mut self) -> Self {
        while self.s.last() == Some(&0) {
            self.s.pop();
        }
        self
    }
}

impl fmt::Display for BoundaryShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{}", self.h, self.e)?;
        for v in &self.s {
            write!(f, ",{v}")?;
        }
        write!(f, ")")
    }
}

impl RootedMap {
    /// Validating constructor.
    pub fn new(sigma: Vec<Dart>, alpha: Vec<Dart>, root: Dart) -> Result<Self, MapError> {
        let m = RootedMap { sigma, alpha, root };
        m.validate()?;
        Ok(m)
    }

    /// Constructor without validation; callers guarantee the invariants.
    pub fn from_parts_unchecked(sigma: Vec<Dart>, alpha: Vec<Dart>, root: Dart) -> Self {
        RootedMap { sigma, alpha, root }
    }

    /// The map with one vertex and no edges.
    pub fn vertex_map() -> Self {
        RootedMap {
            sigma: Vec::new(),
            alpha: Vec::new(),
            root: 0,
        }
    }

    /// Builds a map from per-vertex counterclockwise dart lists, with edge `i`
    /// made of darts `2i` and `2i+1`.
    pub fn from_rotations(rotations: &[Vec<Dart>], root: Dart) -> Result<Self, MapError> {
        let darts: usize = rotations.iter().map(|r| r.len()).sum();
        let mut sigma = vec![NONE; darts];
        for rot in rotations {
            for (i, &d) in rot.iter().enumerate() {
                if d as usize >= darts || sigma[d as usize] != NONE {
                    return Err(MapError::NotPermutation("sigma"));
                }
                sigma[d as usize] = rot[(i + 1) % rot.len()];
            }
        }
        let alpha = (0..darts as Dart).map(|d| d ^ 1).collect();
        RootedMap::new(sigma, alpha, root)
    }

    pub fn dart_count(&self) -> usize {
        self.sigma.len()
    }

    pub fn edge_count(&self) -> usize {
        self.sigma.len() / 2
    }

    pub fn is_vertex_map(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn root(&self) -> Dart {
        self.root
    }

    #[inline]
    pub fn sigma(&self, d: Dart) -> Dart {
        self.sigma[d as usize]
    }

    #[inline]
    pub fn alpha(&self, d: Dart) -> Dart {
        self.alpha[d as usize]
    }

    #[inline]
    pub fn phi(&self, d: Dart) -> Dart {
        self.sigma[self.alpha[d as usize] as usize]
    }

    pub fn sigma_slice(&self) -> &[Dart] {
        &self.sigma
    }

    pub fn alpha_slice(&self) -> &[Dart] {
        &self.alpha
    }

    /// Edge identifier of a dart: the smaller dart of its edge.
    #[inline]
    pub fn edge_of(&self, d: Dart) -> Dart {
        d.min(self.alpha(d))
    }

    pub fn vertices(&self) -> Orbits {
        Orbits::of(self.dart_count(), |d| self.sigma(d))
    }

    pub fn faces(&self) -> Orbits {
        Orbits::of(self.dart_count(), |d| self.phi(d))
    }

    /// Darts of the root face in `phi` order, starting at `alpha(root)`.
    pub fn root_face(&self) -> Vec<Dart> {
        if self.is_vertex_map() {
            return Vec::new();
        }
        self.face_walk(self.alpha(self.root))
    }

    pub fn face_walk(&self, start: Dart) -> Vec<Dart> {
        let mut out = vec![start];
        let mut d = self.phi(start);
        while d != start {
            out.push(d);
            d = self.phi(d);
        }
        out
    }

    pub fn root_face_valency(&self) -> usize {
        self.root_face().len()
    }

    /// Checks the permutation, involution, connectivity and genus-0 invariants.
    pub fn validate(&self) -> Result<MapStats, MapError> {
        let n = self.sigma.len();
        if self.alpha.len() != n {
            return Err(MapError::LengthMismatch(n, self.alpha.len()));
        }
        if n == 0 {
            return Ok(MapStats {
                vertices: 1,
                edges: 0,
                faces: 1,
            });
        }
        if n % 2 == 1 {
            return Err(MapError::OddDartCount(n));
        }
        for (name, p) in [("sigma", &self.sigma), ("alpha", &self.alpha)] {
            let mut seen = vec![false; n];
            for &d in p.iter() {
                if d as usize >= n || seen[d as usize] {
                    return Err(MapError::NotPermutation(name));
                }
                seen[d as usize] = true;
            }
        }
        for d in 0..n as Dart {
            let a = self.alpha(d);
            if a == d {
                return Err(MapError::AlphaFixedPoint(d));
            }
            if self.alpha(a) != d {
                return Err(MapError::NonInvolution(d));
            }
        }
        if self.root as usize >= n {
            return Err(MapError::BadRoot(self.root));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        seen[self.root as usize] = true;
        let mut count = 1;
        while let Some(d) = stack.pop() {
            for nb in [self.sigma(d), self.alpha(d)] {
                if !seen[nb as usize] {
                    seen[nb as usize] = true;
                    count += 1;
                    stack.push(nb);
                }
            }
        }
        if count != n {
            return Err(MapError::Disconnected);
        }
        let v = self.vertices().len();
        let f = self.faces().len();
        let e = n / 2;
        let chi = v as i64 - e as i64 + f as i64;
        if chi != 2 {
            return Err(MapError::PositiveGenus {
                genus: (2 - chi) / 2,
                v,
                e,
                f,
            });
        }
        Ok(MapStats {
            vertices: v,
            edges: e,
            faces: f,
        })
    }

    /// Breadth-first labelling from `start`; returns `(order, label)`.
    pub fn bfs_labels(&self, start: Dart) -> (Vec<Dart>, Vec<u32>) {
        let n = self.dart_count();
        let mut label = vec![NONE; n];
        let mut order = Vec::with_capacity(n);
        label[start as usize] = 0;
        order.push(start);
        let mut i = 0;
        while i < order.len() {
            let d = order[i];
            for nb in [self.sigma(d), self.alpha(d)] {
                if label[nb as usize] == NONE {
                    label[nb as usize] = order.len() as u32;
                    order.push(nb);
                }
            }
            i += 1;
        }
        (order, label)
    }

    /// Canonical code of the map rerooted at `start`, with optional per-dart tags appended.
    pub fn code_from(&self, start: Dart, tags: Option<&[u32]>) -> CanonicalForm {
        if self.is_vertex_map() {
            return CanonicalForm(Vec::new());
        }
        let (order, label) = self.bfs_labels(start);
        let mut code = Vec::with_capacity(order.len() * 3);
        for &d in &order {
            code.push(label[self.sigma(d) as usize]);
            code.push(label[self.alpha(d) as usize]);
        }
        if let Some(t) = tags {
            code.extend(order.iter().map(|&d| t[d as usize]));
        }
        CanonicalForm(code)
    }

    /// Complete invariant under root-preserving isomorphism.
    pub fn canonical_form(&self) -> CanonicalForm {
        self.code_from(self.root, None)
    }

    /// The map relabelled in breadth-first order with the root as dart 0.
    pub fn canonical_relabel(&self) -> RootedMap {
        if self.is_vertex_map() {
            return self.clone();
        }
        let (order, label) = self.bfs_labels(self.root);
        let sigma = order.iter().map(|&d| label[self.sigma(d) as usize]).collect();
        let alpha = order.iter().map(|&d| label[self.alpha(d) as usize]).collect();
        RootedMap {
            sigma,
            alpha,
            root: 0,
        }
    }

    pub fn rerooted(&self, root: Dart) -> RootedMap {
        RootedMap {
            sigma: self.sigma.clone(),
            alpha: self.alpha.clone(),
            root,
        }
    }

    /// Roots that keep the root face: `alpha(x)` for `x` on the root face.
    pub fn rotation_roots(&self) -> Vec<Dart> {
        self.root_face().iter().map(|&x| self.alpha(x)).collect()
    }

    /// Pairwise non-isomorphic rerootings along the root face.
    pub fn rotations(&self) -> Rotations {
        self.rotations_tagged(None)
    }

    /// Rotations where isomorphisms must also preserve the dart tags.
    pub fn rotations_tagged(&self, tags: Option<&[u32]>) -> Rotations {
        if self.is_vertex_map() {
            return Rotations {
                count: 1,
                representatives: vec![self.clone()],
                min_code: CanonicalForm(Vec::new()),
            };
        }
        let mut seen: BTreeSet<CanonicalForm> = BTreeSet::new();
        let mut reps = Vec::new();
        for r in self.rotation_roots() {
            let code = self.code_from(r, tags);
            if seen.insert(code) {
                reps.push(self.rerooted(r));
            }
        }
        Rotations {
            count: seen.len(),
            min_code: seen.iter().next().cloned().unwrap(),
            representatives: reps,
        }
    }

    /// Whether the root face boundary is a simple cycle.
    pub fn has_simple_boundary(&self) -> bool {
        if self.is_vertex_map() {
            return false;
        }
        let vid = self.vertices().id;
        let walk = self.root_face();
        let mut vs = BTreeSet::new();
        let mut es = BTreeSet::new();
        for &d in &walk {
            vs.insert(vid[d as usize]);
            es.insert(self.edge_of(d));
        }
        vs.len() == walk.len() && es.len() == walk.len()
    }

    /// Submap on the edges containing the given darts (closed under `alpha`),
    /// with the induced rotation. Returns the submap rooted at the image of
    /// `root` and the old-to-new dart map.
    pub fn submap(&self, darts: &[bool], root: Dart) -> (RootedMap, Vec<Dart>) {
        let n = self.dart_count();
        let mut new_id = vec![NONE; n];
        let mut old = Vec::new();
        for d in 0..n {
            if darts[d] {
                new_id[d] = old.len() as u32;
                old.push(d as Dart);
            }
        }
        let mut sigma = Vec::with_capacity(old.len());
        let mut alpha = Vec::with_capacity(old.len());
        for &d in &old {
            let mut s = self.sigma(d);
            while !darts[s as usize] {
                s = self.sigma(s);
            }
            sigma.push(new_id[s as usize]);
            alpha.push(new_id[self.alpha(d) as usize]);
        }
        let m = RootedMap {
            sigma,
            alpha,
            root: new_id[root as usize],
        };
        (m, new_id)
    }

    /// Boundary submap of the face containing `f`: all edges incident with the face.
    /// Returns the submap (rooted at `f`), the old-to-new dart map.
    pub fn face_boundary_submap(&self, f: Dart) -> (RootedMap, Vec<Dart>) {
        let mut keep = vec![false; self.dart_count()];
        for d in self.face_walk(f) {
            keep[d as usize] = true;
            keep[self.alpha(d) as usize] = true;
        }
        self.submap(&keep, f)
    }

    /// Dart of `sub` lying on the submap face that contains the host face of
    /// `host_dart`; `in_sub` maps host darts to submap darts.
    pub fn containing_sub_face(&self, host_dart: Dart, in_sub: &[Dart]) -> Option<Dart> {
        let faces = self.faces();
        let mut seen = vec![false; faces.len()];
        let start = faces.id[host_dart as usize];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(fc) = queue.pop_front() {
            for &d in &faces.orbits[fc] {
                if in_sub[d as usize] != NONE {
                    return Some(in_sub[d as usize]);
                }
            }
            for &d in &faces.orbits[fc] {
                let g = faces.id[self.alpha(d) as usize];
                if !seen[g] {
                    seen[g] = true;
                    queue.push_back(g);
                }
            }
        }
        None
    }

    /// Boundary shape of the face containing dart `f`. The simple cycle is the
    /// boundary block facing the root face (or containing the root edge when
    /// `f` lies on the root face).
    pub fn boundary_shape(&self, f: Dart) -> BoundaryShape {
        if self.is_vertex_map() {
            return BoundaryShape {
                h: 0,
                e: 0,
                s: Vec::new(),
            };
        }
        let (sub, new_id) = self.face_boundary_submap(f);
        let fs = new_id[f as usize];
        let outer = self.outer_dart(f, &sub, &new_id);
        shape_in_boundary_submap(&sub, fs, outer)
    }

    /// A dart of the boundary submap on the face playing the role of the outside.
    fn outer_dart(&self, f: Dart, sub: &RootedMap, new_id: &[Dart]) -> Option<Dart> {
        let faces = self.faces();
        let root_face = faces.id[self.alpha(self.root) as usize];
        let fs = new_id[f as usize];
        let sub_faces = sub.faces();
        let f_sub = sub_faces.id[fs as usize];
        if faces.id[f as usize] != root_face {
            return self.containing_sub_face(self.alpha(self.root), new_id);
        }
        // f is the root face: take the first non-bridge dart from the root corner.
        let walk = self.face_walk(self.alpha(self.root));
        for &d in &walk {
            let a = new_id[self.alpha(d) as usize];
            if sub_faces.id[a as usize] != f_sub {
                return Some(a);
            }
        }
        None
    }

    /// Canonical code of a face class: the boundary submap of the face rooted
    /// on its outside face, minimised over rotations, with the face's darts tagged.
    pub fn face_class_code(&self, f: Dart) -> Option<CanonicalForm> {
        let (sub, new_id) = self.face_boundary_submap(f);
        let outer = self.outer_dart(f, &sub, &new_id)?;
        Some(class_code_in_submap(&sub, new_id[f as usize], outer).0)
    }

    /// Face identifier (orbit index) of the root face.
    pub fn root_face_id(&self, faces: &Orbits) -> usize {
        faces.id[self.alpha(self.root) as usize]
    }

    /// Text format: `darts=2E root=r`, then sigma images, then alpha images.
    pub fn to_text(&self) -> String {
        let join = |v: &[Dart]| {
            v.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "darts={} root={}\n{}\n{}\n",
            self.dart_count(),
            self.root,
            join(&self.sigma),
            join(&self.alpha)
        )
    }

    pub fn from_text(text: &str) -> Result<Self, MapError> {
        Ok(parse_map_text(text)?.0)
    }
}

/// Rotation data of a rooted map.
#[derive(Debug, Clone)]
pub struct Rotations {
    pub count: usize,
    pub representatives: Vec<RootedMap>,
    pub min_code: CanonicalForm,
}

/// Shape of face `fs` of a boundary submap whose outside face contains `outer`.
pub(crate) fn shape_in_boundary_submap(
    sub: &RootedMap,
    fs: Dart,
    outer: Option<Dart>,
) -> BoundaryShape {
    let faces = sub.faces();
    let f_id = faces.id[fs as usize];
    let o_id = outer.map(|o| faces.id[o as usize]);
    let mut e = 0;
    for &d in &faces.orbits[f_id] {
        if faces.id[sub.alpha(d) as usize] == f_id && d < sub.alpha(d) {
            e += 1;
        }
    }
    let mut h = 0;
    let mut s: Vec<u32> = Vec::new();
    for (i, orb) in faces.orbits.iter().enumerate() {
        if i == f_id {
            continue;
        }
        if Some(i) == o_id {
            h = orb.len() as u32;
        } else {
            let len = orb.len();
            if s.len() < len {
                s.resize(len, 0);
            }
            s[len - 1] += 1;
        }
    }
    BoundaryShape { h, e, s }.normalized()
}

/// Minimal tagged code over rerootings on the face of `outer`, with the darts of
/// face `fs` tagged; also returns the number of distinct codes.
pub(crate) fn class_code_in_submap(
    sub: &RootedMap,
    fs: Dart,
    outer: Dart,
) -> (CanonicalForm, usize) {
    let faces = sub.faces();
    let f_id = faces.id[fs as usize];
    let tags: Vec<u32> = (0..sub.dart_count())
        .map(|d| (faces.id[d] == f_id) as u32)
        .collect();
    let rooted = sub.rerooted(sub.alpha(outer));
    let rot = rooted.rotations_tagged(Some(&tags));
    (rot.min_code, rot.count)
}

/// Parses the map text format; returns the map and the optional exterior dart.
pub fn parse_map_text(text: &str) -> Result<(RootedMap, Option<Dart>), MapError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| MapError::Parse("empty input".into()))?;
    let mut darts = None;
    let mut root = None;
    for tok in header.split_whitespace() {
        match tok.split_once('=') {
            Some(("darts", v)) => {
                darts = Some(
                    v.parse::<usize>()
                        .map_err(|_| MapError::Parse(format!("bad dart count `{v}`")))?,
                )
            }
            Some(("root", v)) => {
                root = Some(
                    v.parse::<Dart>()
                        .map_err(|_| MapError::Parse(format!("bad root `{v}`")))?,
                )
            }
            _ => return Err(MapError::Parse(format!("unexpected header token `{tok}`"))),
        }
    }
    let darts = darts.ok_or_else(|| MapError::Parse("missing darts=".into()))?;
    let root = root.ok_or_else(|| MapError::Parse("missing root=".into()))?;
    let mut perm = |name: &str| -> Result<Vec<Dart>, MapError> {
        let line = lines
            .next()
            .ok_or_else(|| MapError::Parse(format!("missing {name} line")))?;
        let v: Vec<Dart> = line
            .split_whitespace()
            .map(|t| t.parse::<Dart>())
            .collect::<Result<_, _>>()
            .map_err(|_| MapError::Parse(format!("bad {name} entry")))?;
        if v.len() != darts {
            return Err(MapError::Parse(format!(
                "{name} has {} entries, expected {darts}",
                v.len()
            )));
        }
        Ok(v)
    };
    let sigma = perm("sigma")?;
    let alpha = perm("alpha")?;
    let mut exterior = None;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some(("exterior", v)) => {
                exterior = Some(
                    v.trim()
                        .parse::<Dart>()
                        .map_err(|_| MapError::Parse(format!("bad exterior `{v}`")))?,
                )
            }
            _ => return Err(MapError::Parse(format!("unexpected line `{line}`"))),
        }
    }
    let map = if darts == 0 {
        RootedMap::vertex_map()
    } else {
        RootedMap::new(sigma, alpha, root)?
    };
    Ok((map, exterior))
}

/// A map with simple boundary whose root face is the exterior face.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    map: RootedMap,
    /// Per dart: whether its face is interior.
    interior: Vec<bool>,
    min_code: CanonicalForm,
}

impl Pattern {
    pub fn new(map: RootedMap) -> Result<Self, MapError> {
        map.validate()?;
        if !map.has_simple_boundary() {
            return Err(MapError::NonSimpleBoundary);
        }
        let faces = map.faces();
        let ext = map.root_face_id(&faces);
        let interior = (0..map.dart_count()).map(|d| faces.id[d] != ext).collect();
        let min_code = map.rotations().min_code;
        Ok(Pattern {
            map,
            interior,
            min_code,
        })
    }

    /// Parses a pattern file; `exterior=<dart>` reroots so that face is the root face.
    pub fn from_text(text: &str) -> Result<Self, MapError> {
        let (map, ext) = parse_map_text(text)?;
        let map = match ext {
            Some(x) if (x as usize) < map.dart_count() => map.rerooted(map.alpha(x)),
            Some(x) => return Err(MapError::BadRoot(x)),
            None => map,
        };
        Pattern::new(map)
    }

    pub fn to_text(&self) -> String {
        let mut s = self.map.to_text();
        s.push_str(&format!("exterior={}\n", self.map.alpha(self.map.root())));
        s
    }

    pub fn map(&self) -> &RootedMap {
        &self.map
    }

    pub fn is_interior(&self, d: Dart) -> bool {
        self.interior[d as usize]
    }

    /// Valency of the exterior face.
    pub fn boundary_len(&self) -> usize {
        self.map.root_face_valency()
    }

    /// Edges not on the boundary.
    pub fn interior_edge_count(&self) -> usize {
        (0..self.map.dart_count() as Dart)
            .filter(|&d| {
                d < self.map.alpha(d) && self.interior[d as usize] && self.interior[self.map.alpha(d) as usize]
            })
            .count()
    }

    pub fn rotation_count(&self) -> usize {
        self.map.rotations().count
    }

    /// Minimal code over rotations; equal for isomorphic patterns.
    pub fn min_code(&self) -> &CanonicalForm {
        &self.min_code
    }
}

/// One pattern occurrence: images of pattern darts, vertices, edges and interior faces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub dart_image: Vec<Dart>,
    pub vertex_image: Vec<usize>,
    pub edge_image: Vec<Dart>,
    pub face_image: Vec<usize>,
}

impl Occurrence {
    /// Sorted image sets identifying the occurrence.
    pub fn key(&self) -> (Vec<Dart>, Vec<usize>) {
        let mut e = self.edge_image.clone();
        e.sort_unstable();
        let mut f = self.face_image.clone();
        f.sort_unstable();
        (e, f)
    }
}

/// Precomputed orbit data of a host map for repeated occurrence searches.
pub struct HostIndex<'a> {
    pub map: &'a RootedMap,
    pub vertices: Orbits,
    pub faces: Orbits,
    pub root_face: usize,
}

impl<'a> HostIndex<'a> {
    pub fn new(map: &'a RootedMap) -> Self {
        let vertices = map.vertices();
        let faces = map.faces();
        let root_face = if map.is_vertex_map() {
            usize::MAX
        } else {
            map.root_face_id(&faces)
        };
        HostIndex {
            map,
            vertices,
            faces,
            root_face,
        }
    }
}

/// Extends the anchor `pattern.root -> y` to a full dart map, or `None`.
fn extend_anchor(host: &HostIndex, pattern: &Pattern, y: Dart, used: &mut [u32], stamp: u32) -> Option<Vec<Dart>> {
    let p = &pattern.map;
    let h = host.map;
    let mut f = vec![NONE; p.dart_count()];
    let mut stack = Vec::with_capacity(p.dart_count());
    let root = p.root();
    f[root as usize] = y;
    used[y as usize] = stamp;
    stack.push(root);
    while let Some(x) = stack.pop() {
        let fx = f[x as usize];
        let mut pairs = [(p.alpha(x), h.alpha(fx)), (NONE, NONE)];
        if pattern.interior[x as usize] {
            pairs[1] = (p.phi(x), h.phi(fx));
        }
        for &(a, b) in &pairs {
            if a == NONE {
                continue;
            }
            let cur = f[a as usize];
            if cur == NONE {
                if used[b as usize] == stamp {
                    return None;
                }
                used[b as usize] = stamp;
                f[a as usize] = b;
                stack.push(a);
            } else if cur != b {
                return None;
            }
        }
    }
    Some(f)
}

/// All pattern occurrences of `pattern` in `host`, deduplicated by image sets.
pub fn find_occurrences(host: &RootedMap, pattern: &Pattern) -> Vec<Occurrence> {
    let idx = HostIndex::new(host);
    find_occurrences_indexed(&idx, pattern)
}

pub fn find_occurrences_indexed(host: &HostIndex, pattern: &Pattern) -> Vec<Occurrence> {
    let p = &pattern.map;
    if host.map.dart_count() < p.dart_count() || host.map.is_vertex_map() {
        return Vec::new();
    }
    let pv = p.vertices();
    let pf = p.faces();
    let p_ext = p.root_face_id(&pf);
    let root_face_len = pf.orbits[pf.id[p.root() as usize]].len();
    let mut used = vec![0u32; host.map.dart_count()];
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (stamp, y) in (0..host.map.dart_count() as Dart).enumerate() {
        if host.faces.orbits[host.faces.id[y as usize]].len() != root_face_len {
            continue;
        }
        let Some(f) = extend_anchor(host, pattern, y, &mut used, stamp as u32 + 1) else {
            continue;
        };
        let vertex_image: Vec<usize> = pv
            .orbits
            .iter()
            .map(|o| host.vertices.id[f[o[0] as usize] as usize])
            .collect();
        let distinct: BTreeSet<_> = vertex_image.iter().collect();
        if distinct.len() != vertex_image.len() {
            continue;
        }
        let consistent = (0..p.dart_count()).all(|x| {
            host.vertices.id[f[x] as usize] == vertex_image[pv.id[x]]
        });
        if !consistent {
            continue;
        }
        let face_image: Vec<usize> = pf
            .orbits
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != p_ext)
            .map(|(_, o)| host.faces.id[f[o[0] as usize] as usize])
            .collect();
        if face_image.contains(&host.root_face) {
            continue;
        }
        let edge_image: Vec<Dart> = (0..p.dart_count() as Dart)
            .filter(|&x| x < p.alpha(x))
            .map(|x| host.map.edge_of(f[x as usize]))
            .collect();
        let occ = Occurrence {
            dart_image: f,
            vertex_image,
            edge_image,
            face_image,
        };
        if seen.insert(occ.key()) {
            out.push(occ);
        }
    }
    out
}

/// Counts submap occurrences, in the sense of cutting cycles: simple
/// cycles whose side away from the root face carries a copy of the pattern.
pub fn count_submap_occurrences(host: &RootedMap, pattern: &Pattern) -> usize {
    if host.is_vertex_map() {
        return 0;
    }
    let verts = host.vertices();
    let faces = host.faces();
    let root_face = host.root_face_id(&faces);
    let target = pattern.boundary_len();
    let mut count = 0;
    for cycle in simple_cycles(host, &verts, target) {
        let mut on_cycle = vec![false; host.dart_count()];
        for &e in &cycle {
            on_cycle[e as usize] = true;
            on_cycle[host.alpha(e) as usize] = true;
        }
        // Faces reachable from the root face without crossing the cycle are outside.
        let mut outside = vec![false; faces.len()];
        outside[root_face] = true;
        let mut stack = vec![root_face];
        while let Some(fc) = stack.pop() {
            for &d in &faces.orbits[fc] {
                if on_cycle[d as usize] {
                    continue;
                }
                let g = faces.id[host.alpha(d) as usize];
                if !outside[g] {
                    outside[g] = true;
                    stack.push(g);
                }
            }
        }
        let mut keep = vec![false; host.dart_count()];
        let mut ext_dart = NONE;
        for d in 0..host.dart_count() {
            if !outside[faces.id[d]] {
                keep[d] = true;
                keep[host.alpha(d as Dart) as usize] = true;
            } else if on_cycle[d] {
                ext_dart = d as Dart;
            }
        }
        if ext_dart == NONE {
            continue;
        }
        let (sub, new_id) = host.submap(&keep, host.alpha(ext_dart));
        if sub.rotations().min_code == pattern.min_code {
            count += 1;
        }
        let _ = new_id;
    }
    count
}

/// Edge sets (as sorted lists of edge ids) of all simple cycles of length `len`.
fn simple_cycles(host: &RootedMap, verts: &Orbits, len: usize) -> Vec<Vec<Dart>> {
    let mut found = BTreeSet::new();
    let nv = verts.len();
    for v0 in 0..nv {
        let mut on_path = vec![false; nv];
        let mut edges = Vec::new();
        on_path[v0] = true;
        cycle_dfs(host, verts, v0, v0, len, &mut on_path, &mut edges, &mut found);
    }
    found.into_iter().collect()
}

#[allow(clippy::too_many_arguments)]
fn cycle_dfs(
    host: &RootedMap,
    verts: &Orbits,
    v0: usize,
    v: usize,
    len: usize,
    on_path: &mut [bool],
    edges: &mut Vec<Dart>,
    found: &mut BTreeSet<Vec<Dart>>,
) {
    for &d in &verts.orbits[v] {
        let e = host.edge_of(d);
        if edges.contains(&e) {
            continue;
        }
        let w = verts.id[host.alpha(d) as usize];
        if w == v0 {
            if edges.len() + 1 == len {
                let mut c = edges.clone();
                c.push(e);
                c.sort_unstable();
                found.insert(c);
            }
            continue;
        }
        if w < v0 || on_path[w] || edges.len() + 1 >= len {
            continue;
        }
        on_path[w] = true;
        edges.push(e);
        cycle_dfs(host, verts, v0, w, len, on_path, edges, found);
        edges.pop();
        on_path[w] = false;
    }
}

/// Map with a simple `k`-gon as its only edges (root face outside).
pub fn simple_polygon(k: usize) -> RootedMap {
    assert!(k >= 1);
    if k == 1 {
        return RootedMap::from_parts_unchecked(vec![1, 0], vec![1, 0], 0);
    }
    // Edge i joins vertex i to vertex i+1; dart 2i leaves vertex i.
    let rotations: Vec<Vec<Dart>> = (0..k)
        .map(|v| {
            let out = 2 * v as Dart;
            let inc = (2 * ((v + k - 1) % k) + 1) as Dart;
            vec![out, inc]
        })
        .collect();
    let m = RootedMap::from_rotations(&rotations, 0).expect("polygon");
    // Root so that the root face is the outside of the cycle.
    let faces = m.faces();
    let inside = faces.id[0];
    let ext = (0..m.dart_count() as Dart)
        .find(|&d| faces.id[d as usize] != inside)
        .unwrap();
    m.rerooted(m.alpha(ext))
}

/// Index of root-face-preserving rotations, used for sanity checks in tests.
pub fn rotation_histogram(maps: &[RootedMap]) -> HashMap<usize, usize> {
    let mut h = HashMap::new();
    for m in maps {
        *h.entry(m.rotations().count).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loop_map() -> RootedMap {
        RootedMap::new(vec![1, 0], vec![1, 0], 0).unwrap()
    }

    fn bridge_map() -> RootedMap {
        RootedMap::new(vec![0, 1], vec![1, 0], 0).unwrap()
    }

    /// Two parallel edges between two vertices.
    fn double_edge() -> RootedMap {
        RootedMap::from_rotations(&[vec![0, 2], vec![1, 3]], 0).unwrap()
    }

    #[test]
    fn validate_examples() {
        let s = loop_map().validate().unwrap();
        assert_eq!((s.vertices, s.edges, s.faces), (1, 1, 2));
        let s = bridge_map().validate().unwrap();
        assert_eq!((s.vertices, s.edges, s.faces), (2, 1, 1));
        // Two loops at one vertex interleaved: a torus.
        let torus = RootedMap::from_parts_unchecked(vec![2, 3, 1, 0], vec![1, 0, 3, 2], 0);
        assert!(matches!(torus.validate(), Err(MapError::PositiveGenus { .. })));
        let bad = RootedMap::from_parts_unchecked(vec![0, 1], vec![0, 1], 0);
        assert!(matches!(bad.validate(), Err(MapError::AlphaFixedPoint(0))));
        let disc = RootedMap::from_parts_unchecked(vec![0, 1, 2, 3], vec![1, 0, 3, 2], 0);
        assert_eq!(disc.validate(), Err(MapError::Disconnected));
    }

    #[test]
    fn canonical_form_examples() {
        let l = loop_map();
        assert_eq!(l.canonical_form(), l.rerooted(1).canonical_form());
        let relab = l.canonical_relabel();
        assert_eq!(relab.canonical_form(), l.canonical_form());
        assert_ne!(l.canonical_form(), bridge_map().canonical_form());
    }

    #[test]
    fn boundary_shape_examples() {
        let l = loop_map();
        for d in 0..2 {
            assert_eq!(
                l.boundary_shape(d),
                BoundaryShape {
                    h: 1,
                    e: 0,
                    s: vec![]
                }
            );
        }
        let sq = simple_polygon(4);
        let faces = sq.faces();
        let inner = (0..8).find(|&d| faces.id[d as usize] != sq.root_face_id(&faces)).unwrap();
        let sh = sq.boundary_shape(inner);
        assert_eq!(sh, BoundaryShape { h: 4, e: 0, s: vec![] });
        assert_eq!(sh.valency(), 4);
    }

    #[test]
    fn occurrence_examples() {
        let two_gon = Pattern::new(simple_polygon(2)).unwrap();
        assert_eq!(find_occurrences(&loop_map(), &two_gon).len(), 0);
        let de = double_edge();
        assert_eq!(find_occurrences(&de, &two_gon).len(), 1);
        assert_eq!(count_submap_occurrences(&de, &two_gon), 1);
        let host = two_gon.map().clone();
        assert_eq!(find_occurrences(&host, &two_gon).len(), 1);
    }

    #[test]
    fn rotations_of_two_gon() {
        assert_eq!(simple_polygon(2).rotations().count, 1);
        assert_eq!(simple_polygon(5).rotations().count, 1);
    }

    #[test]
    fn text_roundtrip() {
        let m = double_edge();
        let back = RootedMap::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(RootedMap::from_text("darts=2 root=0\n1 0\n").is_err());
        assert!(RootedMap::from_text("darts=x root=0\n\n\n").is_err());
        let p = Pattern::new(simple_polygon(3)).unwrap();
        let q = Pattern::from_text(&p.to_text()).unwrap();
        assert_eq!(q.min_code(), p.min_code());
    }
}
