//! Dyadic cubes on [0,1]^d, proper subtrees and their outer-leaf partitions.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Default exploration cap on the scale, by dimension.
pub fn default_j_max(d: usize) -> u32 {
    match d {
        1 => 16,
        2 => 10,
        _ => 7,
    }
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDim(d))
    }
}

/// Index (j, k) of the cube prod_l [k_l 2^-j, (k_l + 1) 2^-j].
///
/// Ordering is lexicographic by (j, k), which is also the serialization order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeIndex {
    j: u32,
    d: u8,
    k: [u32; MAX_DIM],
}

impl CubeIndex {
    pub fn root(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "dimension {d} unsupported");
        CubeIndex { j: 0, d: d as u8, k: [0; MAX_DIM] }
    }

    pub fn new(j: u32, k: &[u32]) -> Result<Self> {
        check_dim(k.len())?;
        if j > 31 {
            return Err(Error::InvalidCube(format!("scale {j} too large")));
        }
        let n = 1u64 << j;
        if let Some(bad) = k.iter().find(|&&v| v as u64 >= n) {
            return Err(Error::InvalidCube(format!("coordinate {bad} out of range at scale {j}")));
        }
        let mut kk = [0; MAX_DIM];
        kk[..k.len()].copy_from_slice(k);
        Ok(CubeIndex { j, d: k.len() as u8, k: kk })
    }

    #[inline]
    pub fn j(&self) -> u32 {
        self.j
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d as usize
    }

    #[inline]
    pub fn k(&self) -> &[u32] {
        &self.k[..self.d as usize]
    }

    pub fn is_root(&self) -> bool {
        self.j == 0
    }

    #[inline]
    pub fn side(&self) -> f64 {
        (-(self.j as f64)).exp2()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.d as i32)
    }

    /// Lower corner k 2^-j.
    pub fn anchor(&self) -> [f64; MAX_DIM] {
        let h = self.side();
        let mut r = [0.0; MAX_DIM];
        for (l, v) in r.iter_mut().enumerate().take(self.dim()) {
            *v = self.k[l] as f64 * h;
        }
        r
    }

    /// Child number `i` in 0..2^d; bit l of `i` selects the upper half along axis l.
    pub fn child(&self, i: usize) -> CubeIndex {
        let mut k = [0; MAX_DIM];
        for (l, v) in k.iter_mut().enumerate().take(self.dim()) {
            *v = 2 * self.k[l] + ((i >> l) & 1) as u32;
        }
        CubeIndex { j: self.j + 1, d: self.d, k }
    }

    /// All 2^d children, ordered by child number.
    pub fn children(&self) -> Vec<CubeIndex> {
        (0..1usize << self.dim()).map(|i| self.child(i)).collect()
    }

    /// Children, refusing to go beyond scale `cap`.
    pub fn children_capped(&self, cap: u32) -> Result<Vec<CubeIndex>> {
        if self.j + 1 > cap {
            return Err(Error::ScaleCap { scale: self.j + 1, cap });
        }
        Ok(self.children())
    }

    pub fn parent(&self) -> Result<CubeIndex> {
        if self.j == 0 {
            return Err(Error::RootHasNoParent);
        }
        let mut k = [0; MAX_DIM];
        for (l, v) in k.iter_mut().enumerate().take(self.dim()) {
            *v = self.k[l] / 2;
        }
        Ok(CubeIndex { j: self.j - 1, d: self.d, k })
    }

    /// Ancestor at scale `j` (which must not exceed the own scale).
    pub fn ancestor(&self, j: u32) -> CubeIndex {
        assert!(j <= self.j);
        let shift = self.j - j;
        let mut k = [0; MAX_DIM];
        for (l, v) in k.iter_mut().enumerate().take(self.dim()) {
            *v = self.k[l] >> shift;
        }
        CubeIndex { j, d: self.d, k }
    }

    /// The scale-`j` cube containing x under the half-open convention, with the
    /// outer face 1 assigned to the last cube.
    pub fn locate(x: &[f64], j: u32) -> CubeIndex {
        let n = 1u64 << j;
        let mut k = [0; MAX_DIM];
        for (l, &xl) in x.iter().enumerate() {
            let v = (xl * n as f64).floor();
            k[l] = if v < 0.0 { 0 } else { (v as u64).min(n - 1) as u32 };
        }
        CubeIndex { j, d: x.len() as u8, k }
    }

    /// Half-open membership test, closed at the outer face 1.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && CubeIndex::locate(x, self.j) == *self
    }

    /// Position of the cube among the 2^{jd} cubes of its scale, first axis fastest.
    #[inline]
    pub fn linear(&self) -> usize {
        let mut idx = 0usize;
        for l in (0..self.dim()).rev() {
            idx = (idx << self.j) | self.k[l] as usize;
        }
        idx
    }

    pub fn from_linear(j: u32, mut idx: usize, d: usize) -> CubeIndex {
        let mask = (1usize << j) - 1;
        let mut k = [0; MAX_DIM];
        for v in k.iter_mut().take(d) {
            *v = (idx & mask) as u32;
            idx >>= j;
        }
        CubeIndex { j, d: d as u8, k }
    }

    /// Whether `self` is `other` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, other: &CubeIndex) -> bool {
        self.d == other.d && self.j <= other.j && other.ancestor(self.j) == *self
    }
}

impl fmt::Debug for CubeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {:?})", self.j, self.k())
    }
}

impl fmt::Display for CubeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for CubeIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut v = Vec::with_capacity(1 + self.dim());
        v.push(self.j);
        v.extend_from_slice(self.k());
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CubeIndex {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<u32>::deserialize(de)?;
        if v.len() < 2 {
            return Err(D::Error::custom("cube tuple needs [j, k...]"));
        }
        CubeIndex::new(v[0], &v[1..]).map_err(D::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub has_root: bool,
    pub mixed_dims: bool,
    /// (node, its missing parent)
    pub missing_parents: Vec<(CubeIndex, CubeIndex)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.has_root && !self.mixed_dims && self.missing_parents.is_empty()
    }

    fn describe(&self) -> String {
        if !self.has_root {
            return "missing root".into();
        }
        if self.mixed_dims {
            return "nodes of different dimension".into();
        }
        match self.missing_parents.first() {
            Some((c, p)) => format!("parent {p} of {c} missing"),
            None => "valid".into(),
        }
    }
}

/// Report root membership and parent-closure violations of a node set.
pub fn validate_proper_subtree<'a>(nodes: impl IntoIterator<Item = &'a CubeIndex>) -> ValidationReport {
    let set: BTreeSet<CubeIndex> = nodes.into_iter().copied().collect();
    let mut rep = ValidationReport::default();
    let Some(first) = set.iter().next() else {
        return rep;
    };
    let d = first.dim();
    rep.mixed_dims = set.iter().any(|c| c.dim() != d);
    rep.has_root = set.contains(&CubeIndex::root(d));
    for c in &set {
        if let Ok(p) = c.parent() {
            if !set.contains(&p) {
                rep.missing_parents.push((*c, p));
            }
        }
    }
    rep
}

/// A proper subtree of the master dyadic tree, possibly empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedTree {
    dim: usize,
    nodes: BTreeSet<CubeIndex>,
}

impl TruncatedTree {
    pub fn empty(d: usize) -> Self {
        TruncatedTree { dim: d, nodes: BTreeSet::new() }
    }

    pub fn root_only(d: usize) -> Self {
        let mut t = Self::empty(d);
        t.nodes.insert(CubeIndex::root(d));
        t
    }

    /// Build from a node set, rejecting anything that is not empty or a proper subtree.
    pub fn from_nodes(d: usize, nodes: impl IntoIterator<Item = CubeIndex>) -> Result<Self> {
        check_dim(d)?;
        let nodes: BTreeSet<CubeIndex> = nodes.into_iter().collect();
        if let Some(c) = nodes.iter().find(|c| c.dim() != d) {
            return Err(Error::DimMismatch { expected: d, got: c.dim() });
        }
        if !nodes.is_empty() {
            let rep = validate_proper_subtree(&nodes);
            if !rep.is_valid() {
                return Err(Error::MalformedTree(rep.describe()));
            }
        }
        Ok(TruncatedTree { dim: d, nodes })
    }

    /// Smallest proper subtree containing every given node (empty input gives the empty tree).
    pub fn parent_closure(d: usize, seeds: impl IntoIterator<Item = CubeIndex>) -> Self {
        let mut nodes = BTreeSet::new();
        for mut c in seeds {
            while nodes.insert(c) {
                match c.parent() {
                    Ok(p) => c = p,
                    Err(_) => break,
                }
            }
        }
        TruncatedTree { dim: d, nodes }
    }

    /// All cubes of scale below `depth`; its outer leaves are the uniform scale-`depth` grid.
    pub fn uniform(d: usize, depth: u32) -> Self {
        let mut nodes = BTreeSet::new();
        for j in 0..depth {
            for i in 0..1usize << (j as usize * d) {
                nodes.insert(CubeIndex::from_linear(j, i, d));
            }
        }
        TruncatedTree { dim: d, nodes }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, c: &CubeIndex) -> bool {
        self.nodes.contains(c)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CubeIndex> {
        self.nodes.iter()
    }

    pub fn insert_leaf(&mut self, c: CubeIndex) -> Result<()> {
        if c.dim() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, got: c.dim() });
        }
        let ok = if c.is_root() { true } else { self.nodes.contains(&c.parent()?) };
        if !ok {
            return Err(Error::MalformedTree(format!("parent of {c} missing")));
        }
        self.nodes.insert(c);
        Ok(())
    }

    pub fn is_subset(&self, other: &TruncatedTree) -> bool {
        self.nodes.is_subset(&other.nodes)
    }

    /// Deepest node scale, or None for the empty tree.
    pub fn max_scale(&self) -> Option<u32> {
        self.nodes.iter().map(|c| c.j()).max()
    }

    /// Cubes outside the tree whose parent is in it; the empty tree gives {root}.
    pub fn outer_leaves(&self) -> AdaptivePartition {
        if self.nodes.is_empty() {
            return AdaptivePartition { dim: self.dim, cells: vec![CubeIndex::root(self.dim)] };
        }
        let mut cells: Vec<CubeIndex> = self
            .nodes
            .iter()
            .flat_map(|c| c.children())
            .filter(|c| !self.nodes.contains(c))
            .collect();
        cells.sort();
        AdaptivePartition { dim: self.dim, cells }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.nodes.iter().collect::<Vec<_>>())?)
    }

    pub fn from_json(d: usize, s: &str) -> Result<Self> {
        let v: Vec<CubeIndex> = serde_json::from_str(s)?;
        Self::from_nodes(d, v)
    }
}

/// Grow a random proper subtree with `size` nodes by attaching random outer leaves
/// up to scale `cap`.
pub fn random_subtree<R: Rng + ?Sized>(d: usize, size: usize, cap: u32, rng: &mut R) -> TruncatedTree {
    let mut tree = TruncatedTree::root_only(d);
    let mut frontier: Vec<CubeIndex> = CubeIndex::root(d).children();
    while tree.len() < size && !frontier.is_empty() {
        let i = rng.random_range(0..frontier.len());
        let c = frontier.swap_remove(i);
        tree.nodes.insert(c);
        if c.j() < cap {
            frontier.extend(c.children());
        }
    }
    tree
}

/// A finite set of dyadic cubes meant to tile [0,1]^d.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdaptivePartition {
    dim: usize,
    cells: Vec<CubeIndex>,
}

impl AdaptivePartition {
    /// Build from cells and check the tiling invariant.
    pub fn new(d: usize, mut cells: Vec<CubeIndex>) -> Result<Self> {
        check_dim(d)?;
        cells.sort();
        let p = AdaptivePartition { dim: d, cells };
        p.check_tiling()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[CubeIndex] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn finest_scale(&self) -> u32 {
        self.cells.iter().map(|c| c.j()).max().unwrap_or(0)
    }

    /// Volumes sum to one and no cell contains another.
    pub fn check_tiling(&self) -> Result<()> {
        if let Some(c) = self.cells.iter().find(|c| c.dim() != self.dim) {
            return Err(Error::DimMismatch { expected: self.dim, got: c.dim() });
        }
        let vol: f64 = self.cells.iter().map(|c| c.volume()).sum();
        if (vol - 1.0).abs() > 1e-12 {
            return Err(Error::BadPartition(format!("volumes sum to {vol}")));
        }
        let set: BTreeSet<CubeIndex> = self.cells.iter().copied().collect();
        if set.len() != self.cells.len() {
            return Err(Error::BadPartition("duplicate cells".into()));
        }
        for c in &self.cells {
            for j in 0..c.j() {
                let a = c.ancestor(j);
                if set.contains(&a) {
                    return Err(Error::BadPartition(format!("{a} overlaps {c}")));
                }
            }
        }
        Ok(())
    }

    /// Lookup table used by [`AdaptivePartition::locate_with`].
    pub fn index_map(&self) -> HashMap<CubeIndex, usize> {
        self.cells.iter().enumerate().map(|(i, c)| (*c, i)).collect()
    }

    pub fn locate_with(&self, map: &HashMap<CubeIndex, usize>, x: &[f64]) -> Option<usize> {
        let top = self.finest_scale();
        let deepest = CubeIndex::locate(x, top);
        (0..=top).find_map(|j| map.get(&deepest.ancestor(j)).copied())
    }

    /// Position of the cell containing x (half-open convention).
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.locate_with(&self.index_map(), x)
    }

    /// (d-1)-dimensional measure of the union of shared cell faces; for d = 1 the
    /// number of interior breakpoints.
    pub fn boundary_area(&self) -> f64 {
        let d = self.dim;
        let mut twice = 0.0;
        for c in &self.cells {
            let face = c.side().powi(d as i32 - 1);
            let last = (1u32 << c.j()) - 1;
            for &kl in c.k() {
                if kl > 0 {
                    twice += face;
                }
                if kl < last {
                    twice += face;
                }
            }
        }
        twice / 2.0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.cells)?)
    }

    pub fn from_json(d: usize, s: &str) -> Result<Self> {
        let v: Vec<CubeIndex> = serde_json::from_str(s)?;
        Self::new(d, v)
    }
}

/// Upper bound 2^{d+1} d (#T)^{1/d} on the boundary area of an outer-leaf partition.
pub fn boundary_area_bound(d: usize, tree_size: usize) -> f64 {
    (1u64 << (d + 1)) as f64 * d as f64 * (tree_size as f64).powf(1.0 / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(j: u32, k: &[u32]) -> CubeIndex {
        CubeIndex::new(j, k).unwrap()
    }

    #[test]
    fn children_examples() {
        assert_eq!(CubeIndex::root(1).children(), vec![c(1, &[0]), c(1, &[1])]);
        let got: BTreeSet<_> = c(1, &[1, 0]).children().into_iter().collect();
        let want: BTreeSet<_> = [c(2, &[2, 0]), c(2, &[3, 0]), c(2, &[2, 1]), c(2, &[3, 1])].into();
        assert_eq!(got, want);
        let p = c(2, &[1, 3, 2]);
        let vol: f64 = p.children().iter().map(|x| x.volume()).sum();
        assert_eq!(vol, p.volume());
        assert_eq!(p.children().len(), 8);
    }

    #[test]
    fn children_cap_is_an_error() {
        let e = c(4, &[3]).children_capped(4).unwrap_err();
        assert_eq!(e, Error::ScaleCap { scale: 5, cap: 4 });
        assert!(e.to_string().contains("J_max = 4"));
    }

    #[test]
    fn parent_examples() {
        assert_eq!(c(2, &[3]).parent().unwrap(), c(1, &[1]));
        assert_eq!(c(2, &[3, 0]).parent().unwrap(), c(1, &[1, 0]));
        assert_eq!(CubeIndex::root(2).parent(), Err(Error::RootHasNoParent));
    }

    #[test]
    fn parent_child_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let d = rng.random_range(1..=3);
            let j = rng.random_range(0..12);
            let k: Vec<u32> = (0..d).map(|_| rng.random_range(0..1u32 << j)).collect();
            let node = c(j, &k);
            for ch in node.children() {
                assert_eq!(ch.parent().unwrap(), node);
            }
        }
    }

    #[test]
    fn invalid_index_rejected() {
        assert!(CubeIndex::new(1, &[2]).is_err());
        assert!(CubeIndex::new(0, &[]).is_err());
        assert!(CubeIndex::new(0, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn outer_leaf_examples() {
        let t = TruncatedTree::root_only(1);
        assert_eq!(t.outer_leaves().cells(), &[c(1, &[0]), c(1, &[1])]);
        assert_eq!(TruncatedTree::empty(2).outer_leaves().cells(), &[CubeIndex::root(2)]);
        let t = TruncatedTree::from_nodes(1, [CubeIndex::root(1), c(1, &[0])]).unwrap();
        let got: BTreeSet<_> = t.outer_leaves().cells().iter().copied().collect();
        assert_eq!(got, [c(1, &[1]), c(2, &[0]), c(2, &[1])].into());
        assert!(t.len() <= got.len() && got.len() <= 2 * t.len());
    }

    #[test]
    fn validation_examples() {
        let root = CubeIndex::root(1);
        assert!(validate_proper_subtree(&[root]).is_valid());
        let r = validate_proper_subtree(&[c(1, &[0])]);
        assert!(!r.has_root);
        let r = validate_proper_subtree(&[root, c(2, &[0])]);
        assert!(r.has_root);
        assert_eq!(r.missing_parents, vec![(c(2, &[0]), c(1, &[0]))]);
        assert!(TruncatedTree::from_nodes(1, [root, c(2, &[0])]).is_err());
    }

    #[test]
    fn boundary_area_examples() {
        let p = TruncatedTree::root_only(2).outer_leaves();
        assert_eq!(p.boundary_area(), 2.0);
        assert_eq!(boundary_area_bound(2, 1), 16.0);
        assert_eq!(TruncatedTree::root_only(1).outer_leaves().boundary_area(), 1.0);
        assert_eq!(TruncatedTree::empty(3).outer_leaves().boundary_area(), 0.0);
    }

    #[test]
    fn linear_round_trip() {
        let node = c(3, &[5, 2, 7]);
        assert_eq!(CubeIndex::from_linear(3, node.linear(), 3), node);
        assert_eq!(c(2, &[1, 2]).linear(), 1 + 2 * 4);
    }

    #[test]
    fn locate_half_open() {
        assert_eq!(CubeIndex::locate(&[0.5], 1), c(1, &[1]));
        assert_eq!(CubeIndex::locate(&[1.0], 1), c(1, &[1]));
        assert_eq!(CubeIndex::locate(&[0.0, 0.25], 2), c(2, &[0, 1]));
        let p = TruncatedTree::root_only(1).outer_leaves();
        assert_eq!(p.locate(&[0.5]), Some(1));
        assert_eq!(p.locate(&[0.49]), Some(0));
    }

    #[test]
    fn json_round_trip_and_order() {
        let t = TruncatedTree::from_nodes(2, [c(1, &[1, 0]), CubeIndex::root(2), c(1, &[0, 1])]).unwrap();
        let s = t.to_json().unwrap();
        assert_eq!(s, "[[0,0,0],[1,0,1],[1,1,0]]");
        assert_eq!(TruncatedTree::from_json(2, &s).unwrap(), t);
        let p = t.outer_leaves();
        assert_eq!(AdaptivePartition::from_json(2, &p.to_json().unwrap()).unwrap(), p);
    }

    #[test]
    fn tiling_check_catches_overlap() {
        let cells = vec![CubeIndex::root(1), c(1, &[0])];
        assert!(AdaptivePartition::new(1, cells).is_err());
        let cells = vec![c(1, &[0])];
        assert!(AdaptivePartition::new(1, cells).is_err());
    }
}
