//! Finite covers of sampled spaces, their nerves, and cover classification.
//!
//! An open set of a continuum is modelled by the finite set of sample points
//! it contains. Where the sample space knows which samples are adjacent
//! ("links"), a cover is called open when every link lies inside a single
//! member; this is the finite trace of a positive Lebesgue number and keeps
//! touching-but-disjoint members from faking a cut.

use crate::graph::{Graph, GraphError, GraphMetric, MetricBall, Point, VertexId};
use crate::rational::Q;
use fixedbitset::FixedBitSet;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverError {
    #[error("invalid cover: {0}")]
    InvalidCover(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A finite sample space. Samples are numbered `0..len`.
#[derive(Debug, Clone)]
pub struct FiniteSpace {
    len: usize,
    realization: Option<Realization>,
    links: Vec<(usize, usize)>,
}

/// Geometric positions of the samples of a space built on a graph.
#[derive(Debug, Clone)]
pub struct Realization {
    metric: GraphMetric,
    points: Vec<Point>,
    index: HashMap<Point, usize>,
    per_edge: u32,
}

impl Realization {
    pub fn metric(&self) -> &GraphMetric {
        &self.metric
    }

    pub fn graph(&self) -> &Graph {
        self.metric.graph()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn per_edge(&self) -> u32 {
        self.per_edge
    }
}

impl FiniteSpace {
    /// `len` abstract points with no geometry and no links.
    pub fn discrete(len: usize) -> Self {
        assert!(len > 0, "a space needs at least one point");
        FiniteSpace { len, realization: None, links: Vec::new() }
    }

    /// Samples a graph realization: every vertex, plus the points `j/per_edge`
    /// inside each edge. Consecutive samples along an edge are linked.
    ///
    /// Vertices come first in ascending id, then interior samples edge by edge.
    pub fn sampled(graph: &Graph, per_edge: u32) -> Self {
        assert!(per_edge >= 1, "per_edge must be positive");
        assert!(graph.vertex_count() > 0, "a space needs at least one point");
        let mut points: Vec<Point> = graph.vertices().map(Point::Vertex).collect();
        let mut index: HashMap<Point, usize> =
            points.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let mut links = Vec::new();
        for e in graph.edges() {
            let mut prev = index[&Point::Vertex(e.lo())];
            for j in 1..per_edge {
                let p = Point::on_edge(e.lo(), e.hi(), Q::new(j as i64, per_edge as i64)).unwrap();
                let id = points.len();
                index.insert(p.clone(), id);
                points.push(p);
                links.push((prev, id));
                prev = id;
            }
            links.push((prev, index[&Point::Vertex(e.hi())]));
        }
        FiniteSpace {
            len: points.len(),
            realization: Some(Realization {
                metric: GraphMetric::new(graph),
                points,
                index,
                per_edge,
            }),
            links,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn realization(&self) -> Option<&Realization> {
        self.realization.as_ref()
    }

    pub fn graph(&self) -> Option<&Graph> {
        self.realization.as_ref().map(Realization::graph)
    }

    pub fn point(&self, i: usize) -> Option<&Point> {
        self.realization.as_ref().and_then(|r| r.points.get(i))
    }

    pub fn index_of(&self, p: &Point) -> Option<usize> {
        self.realization.as_ref().and_then(|r| r.index.get(p).copied())
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn distance(&self, i: usize, j: usize) -> Option<Q> {
        let r = self.realization.as_ref()?;
        r.metric.distance(r.points.get(i)?, r.points.get(j)?)
    }

    /// Samples inside a metric ball. Empty for a space without geometry.
    pub fn ball(&self, ball: &MetricBall) -> FixedBitSet {
        let mut set = FixedBitSet::with_capacity(self.len);
        if let Some(r) = &self.realization {
            for (i, p) in r.points.iter().enumerate() {
                if ball.contains(&r.metric, p) {
                    set.insert(i);
                }
            }
        }
        set
    }

    /// Samples whose position satisfies `pred`.
    pub fn select(&self, mut pred: impl FnMut(&Point) -> bool) -> FixedBitSet {
        let mut set = FixedBitSet::with_capacity(self.len);
        if let Some(r) = &self.realization {
            for (i, p) in r.points.iter().enumerate() {
                if pred(p) {
                    set.insert(i);
                }
            }
        }
        set
    }

    pub fn full(&self) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(self.len);
        s.insert_range(..);
        s
    }
}

/// One named member of a cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub name: String,
    pub points: FixedBitSet,
}

impl Member {
    pub fn new(name: impl Into<String>, points: impl IntoIterator<Item = usize>) -> Self {
        let pts: Vec<usize> = points.into_iter().collect();
        let cap = pts.iter().max().map_or(0, |m| m + 1);
        let mut set = FixedBitSet::with_capacity(cap);
        for p in pts {
            set.insert(p);
        }
        Member { name: name.into(), points: set }
    }

    pub fn from_set(name: impl Into<String>, points: FixedBitSet) -> Self {
        Member { name: name.into(), points }
    }

    pub fn meets(&self, other: &Member) -> bool {
        !self.points.is_disjoint(&other.points)
    }
}

/// JSON description of a [`FiniteSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSpec {
    Sampled { graph: Graph, per_edge: u32 },
    Discrete { points: usize },
}

impl SpaceSpec {
    pub fn build(&self) -> Result<FiniteSpace, CoverError> {
        match self {
            SpaceSpec::Sampled { graph, per_edge } => {
                if *per_edge == 0 || graph.vertex_count() == 0 {
                    return Err(CoverError::InvalidCover("need a nonempty graph and per_edge ≥ 1".into()));
                }
                Ok(FiniteSpace::sampled(graph, *per_edge))
            }
            SpaceSpec::Discrete { points } => {
                if *points == 0 {
                    return Err(CoverError::InvalidCover("a space needs at least one point".into()));
                }
                Ok(FiniteSpace::discrete(*points))
            }
        }
    }
}

/// An ordered family of named point sets.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "CoverJson", into = "CoverJson")]
pub struct Cover {
    pub members: Vec<Member>,
}

#[derive(Serialize, Deserialize)]
struct CoverJson {
    members: Vec<MemberJson>,
}

#[derive(Serialize, Deserialize)]
struct MemberJson {
    name: String,
    points: Vec<usize>,
}

impl From<CoverJson> for Cover {
    fn from(j: CoverJson) -> Self {
        Cover {
            members: j.members.into_iter().map(|m| Member::new(m.name, m.points)).collect(),
        }
    }
}

impl From<Cover> for CoverJson {
    fn from(c: Cover) -> Self {
        CoverJson {
            members: c
                .members
                .into_iter()
                .map(|m| MemberJson { name: m.name, points: m.points.ones().collect() })
                .collect(),
        }
    }
}

impl Cover {
    pub fn new(members: Vec<Member>) -> Self {
        Cover { members }
    }

    /// Members named `"0"`, `"1"`, ... from plain sets.
    pub fn from_sets(sets: impl IntoIterator<Item = FixedBitSet>) -> Self {
        Cover {
            members: sets
                .into_iter()
                .enumerate()
                .map(|(i, s)| Member::from_set(i.to_string(), s))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Checks the cover invariants against `space`: members nonempty, every
    /// referenced sample exists, every sample covered.
    pub fn validate(&self, space: &FiniteSpace) -> Result<(), CoverError> {
        if self.members.is_empty() {
            return Err(CoverError::InvalidCover("cover has no members".into()));
        }
        let mut union = FixedBitSet::with_capacity(space.len());
        for (i, m) in self.members.iter().enumerate() {
            if m.points.is_clear() {
                return Err(CoverError::InvalidCover(format!("member {i} ({}) is empty", m.name)));
            }
            if let Some(bad) = m.points.ones().find(|&p| p >= space.len()) {
                return Err(CoverError::InvalidCover(format!(
                    "member {i} ({}) references unknown point {bad}",
                    m.name
                )));
            }
            union.union_with(&m.points);
        }
        if union.count_ones(..) != space.len() {
            let missing = (0..space.len()).find(|p| !union.contains(*p)).unwrap();
            return Err(CoverError::InvalidCover(format!("point {missing} is not covered")));
        }
        Ok(())
    }

    /// True iff every link of the space lies inside some member.
    pub fn links_inside_members(&self, space: &FiniteSpace) -> bool {
        space.links().iter().all(|&(p, q)| {
            self.members.iter().any(|m| m.points.contains(p) && m.points.contains(q))
        })
    }

    /// A valid cover whose members also swallow every link.
    pub fn is_open_in(&self, space: &FiniteSpace) -> bool {
        self.validate(space).is_ok() && self.links_inside_members(space)
    }
}

/// The 1-skeleton of the nerve: member indices, adjacent iff they meet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Nerve {
    pub graph: Graph,
}

impl Nerve {
    pub fn edges(&self) -> Vec<[VertexId; 2]> {
        self.graph.edges().map(Into::into).collect()
    }
}

pub fn nerve_of_sets(members: &[Member]) -> Nerve {
    let mut graph = Graph::new();
    for i in 0..members.len() {
        graph.add_vertex(i as VertexId);
    }
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            if members[i].meets(&members[j]) {
                graph.add_edge(i as VertexId, j as VertexId).unwrap();
            }
        }
    }
    Nerve { graph }
}

pub fn nerve(space: &FiniteSpace, cover: &Cover) -> Result<Nerve, CoverError> {
    cover.validate(space)?;
    Ok(nerve_of_sets(&cover.members))
}

/// Largest number of members sharing a common point.
pub fn cover_order(space: &FiniteSpace, cover: &Cover) -> Result<usize, CoverError> {
    cover.validate(space)?;
    Ok((0..space.len())
        .map(|p| cover.members.iter().filter(|m| m.points.contains(p)).count())
        .max()
        .unwrap_or(0))
}

/// The class labels, without witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoverKind {
    ChainLike,
    CircleLike,
    TreeLike,
    Unstructured,
}

impl fmt::Display for CoverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CoverKind::ChainLike => "ChainLike",
            CoverKind::CircleLike => "CircleLike",
            CoverKind::TreeLike => "TreeLike",
            CoverKind::Unstructured => "Unstructured",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for CoverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "chain" | "chainlike" | "chain-like" => Ok(CoverKind::ChainLike),
            "circle" | "circlelike" | "circle-like" => Ok(CoverKind::CircleLike),
            "tree" | "treelike" | "tree-like" => Ok(CoverKind::TreeLike),
            "unstructured" => Ok(CoverKind::Unstructured),
            other => Err(format!("unknown cover class {other:?} (expected chain, circle or tree)")),
        }
    }
}

/// Exclusive classification. Chain and circle carry the enumeration that
/// realizes the pattern, as member indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "class", content = "witness")]
pub enum CoverClass {
    ChainLike(Vec<usize>),
    CircleLike(Vec<usize>),
    TreeLike,
    Unstructured,
}

impl CoverClass {
    pub fn kind(&self) -> CoverKind {
        match self {
            CoverClass::ChainLike(_) => CoverKind::ChainLike,
            CoverClass::CircleLike(_) => CoverKind::CircleLike,
            CoverClass::TreeLike => CoverKind::TreeLike,
            CoverClass::Unstructured => CoverKind::Unstructured,
        }
    }

    pub fn witness(&self) -> Option<&[usize]> {
        match self {
            CoverClass::ChainLike(w) | CoverClass::CircleLike(w) => Some(w),
            _ => None,
        }
    }

    /// Whether a family of this class satisfies the defining property of
    /// `target`. Labels are exclusive, but a chain is still tree-like.
    pub fn satisfies(&self, target: CoverKind) -> bool {
        match target {
            CoverKind::TreeLike => {
                matches!(self, CoverClass::ChainLike(_) | CoverClass::TreeLike)
            }
            k => self.kind() == k,
        }
    }
}

/// Classifies a nerve graph on vertices `0..m`. Checked in the order chain,
/// circle, tree. A nerve with no chordless cycle is a forest.
pub fn classify_nerve(nerve: &Graph) -> CoverClass {
    let to_idx = |v: Vec<VertexId>| v.into_iter().map(|x| x as usize).collect();
    if let Some(order) = nerve.path_order() {
        CoverClass::ChainLike(to_idx(order))
    } else if let Some(order) = nerve.cycle_order() {
        CoverClass::CircleLike(to_idx(order))
    } else if nerve.betti1() == 0 {
        CoverClass::TreeLike
    } else {
        CoverClass::Unstructured
    }
}

pub fn classify_cover(space: &FiniteSpace, cover: &Cover) -> Result<CoverClass, CoverError> {
    Ok(classify_nerve(&nerve(space, cover)?.graph))
}

/// For each fine member, the smallest index of a coarse member containing
/// it; `None` if some fine member fits in no coarse member.
pub fn is_refinement(
    space: &FiniteSpace,
    fine: &Cover,
    coarse: &Cover,
) -> Result<Option<Vec<usize>>, CoverError> {
    fine.validate(space)?;
    coarse.validate(space)?;
    Ok(refinement_witness(&fine.members, &coarse.members))
}

pub(crate) fn refinement_witness(fine: &[Member], coarse: &[Member]) -> Option<Vec<usize>> {
    fine.iter()
        .map(|f| coarse.iter().position(|c| f.points.is_subset(&c.points)))
        .collect()
}

/// Classification report as emitted by the command line.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    #[serde(flatten)]
    pub class: CoverClass,
    pub order: usize,
    pub nerve_edges: Vec<[VertexId; 2]>,
}

pub fn classification_report(
    space: &FiniteSpace,
    cover: &Cover,
) -> Result<ClassificationReport, CoverError> {
    let n = nerve(space, cover)?;
    Ok(ClassificationReport {
        class: classify_nerve(&n.graph),
        order: cover_order(space, cover)?,
        nerve_edges: n.edges(),
    })
}

/// Open balls of every radius in `radii` around every sample, deduplicated,
/// in (radius, centre) order. The default candidate pool for refinements.
pub fn ball_pool(space: &FiniteSpace, radii: &[Q]) -> Vec<FixedBitSet> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let Some(r) = space.realization() else {
        return out;
    };
    for radius in radii {
        assert!(*radius > Q::zero(), "pool radii must be positive");
        for p in r.points() {
            let set = space.ball(&MetricBall::open(p.clone(), *radius));
            let key: Vec<usize> = set.ones().collect();
            if !key.is_empty() && seen.insert(key) {
                out.push(set);
            }
        }
    }
    out
}

/// Radii `2^-levels, .., 1/2, 1`.
pub fn dyadic_radii(levels: u32) -> Vec<Q> {
    (0..=levels).rev().map(|j| Q::new(1, 1i64 << j)).collect()
}

/// Every set of samples along a simple path of links with between
/// `min_points` and `max_points` samples: the connected pieces of the
/// sampled space. Deduplicated, in discovery order.
pub fn path_pool(space: &FiniteSpace, min_points: usize, max_points: usize) -> Vec<FixedBitSet> {
    let mut adj = vec![Vec::new(); space.len()];
    for &(p, q) in space.links() {
        adj[p].push(q);
        adj[q].push(p);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    fn walk(
        adj: &[Vec<usize>],
        path: &mut Vec<usize>,
        min: usize,
        max: usize,
        len: usize,
        seen: &mut BTreeSet<Vec<usize>>,
        out: &mut Vec<FixedBitSet>,
    ) {
        if path.len() >= min {
            let mut key = path.clone();
            key.sort_unstable();
            if seen.insert(key) {
                let mut s = FixedBitSet::with_capacity(len);
                s.extend(path.iter().copied());
                out.push(s);
            }
        }
        if path.len() == max {
            return;
        }
        let last = *path.last().unwrap();
        for &n in &adj[last] {
            if !path.contains(&n) {
                path.push(n);
                walk(adj, path, min, max, len, seen, out);
                path.pop();
            }
        }
    }
    for start in 0..space.len() {
        let mut path = vec![start];
        walk(&adj, &mut path, min_points.max(1), max_points, space.len(), &mut seen, &mut out);
    }
    out
}

/// Every set of samples that is connected through links, smallest first.
/// `None` once more than `cap` sets turn up.
pub fn connected_pool(space: &FiniteSpace, cap: usize) -> Option<Vec<FixedBitSet>> {
    let n = space.len();
    let mut adj = vec![Vec::new(); n];
    for &(p, q) in space.links() {
        adj[p].push(q);
        adj[q].push(p);
    }
    let mut seen: std::collections::HashSet<FixedBitSet> = std::collections::HashSet::new();
    let mut layer: Vec<FixedBitSet> = (0..n)
        .map(|p| {
            let mut s = FixedBitSet::with_capacity(n);
            s.insert(p);
            s
        })
        .collect();
    let mut out = Vec::new();
    while !layer.is_empty() {
        let mut next = Vec::new();
        for s in &layer {
            for p in s.ones() {
                for &q in &adj[p] {
                    if !s.contains(q) {
                        let mut t = s.clone();
                        t.insert(q);
                        if seen.insert(t.clone()) {
                            next.push(t);
                        }
                    }
                }
            }
        }
        out.append(&mut layer);
        if out.len() + next.len() > cap {
            return None;
        }
        next.sort_by(|a, b| a.ones().cmp(b.ones()));
        layer = next;
    }
    Some(out)
}
