//! Finite simple graphs and their geometric realizations.
//!
//! Every edge of a realization is isometric to the unit interval, so the path
//! metric between vertices is the usual hop count and points in the interior
//! of an edge carry an exact rational parameter.

use crate::rational::{format_q, is_unit_interval, serde_q, Q};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use thiserror::Error;

pub type VertexId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph is disconnected: no path between {0} and {1}")]
    DisconnectedInput(String, String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
}

/// An undirected edge, stored with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[VertexId; 2]", into = "[VertexId; 2]")]
pub struct Edge {
    lo: VertexId,
    hi: VertexId,
}

impl Edge {
    /// Panics on a loop; use [`Edge::try_new`] for untrusted input.
    pub fn new(a: VertexId, b: VertexId) -> Self {
        Self::try_new(a, b).expect("edge endpoints must differ")
    }

    pub fn try_new(a: VertexId, b: VertexId) -> Result<Self, GraphError> {
        if a == b {
            return Err(GraphError::InvalidGraph(format!("loop at vertex {a}")));
        }
        Ok(Edge { lo: a.min(b), hi: a.max(b) })
    }

    pub fn lo(&self) -> VertexId {
        self.lo
    }

    pub fn hi(&self) -> VertexId {
        self.hi
    }

    pub fn has(&self, v: VertexId) -> bool {
        self.lo == v || self.hi == v
    }

    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.lo {
            self.hi
        } else {
            self.lo
        }
    }
}

impl TryFrom<[VertexId; 2]> for Edge {
    type Error = GraphError;
    fn try_from(v: [VertexId; 2]) -> Result<Self, Self::Error> {
        Edge::try_new(v[0], v[1])
    }
}

impl From<Edge> for [VertexId; 2] {
    fn from(e: Edge) -> Self {
        [e.lo, e.hi]
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.lo, self.hi)
    }
}

/// A finite simple graph: no loops, no parallel edges.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct Graph {
    adj: BTreeMap<VertexId, BTreeSet<VertexId>>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<VertexId>,
    edges: Vec<[VertexId; 2]>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = GraphError;
    fn try_from(j: GraphJson) -> Result<Self, Self::Error> {
        Graph::from_parts(j.vertices, j.edges.into_iter().map(|[a, b]| (a, b)))
    }
}

impl From<Graph> for GraphJson {
    fn from(g: Graph) -> Self {
        GraphJson {
            vertices: g.vertices().collect(),
            edges: g.edges().map(Into::into).collect(),
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from an explicit vertex list and edge list. Edges must
    /// reference listed vertices; loops and repeated edges are rejected.
    pub fn from_parts(
        vertices: impl IntoIterator<Item = VertexId>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Self, GraphError> {
        let mut g = Graph::new();
        for v in vertices {
            if !g.add_vertex(v) {
                return Err(GraphError::InvalidGraph(format!("duplicate vertex {v}")));
            }
        }
        for (a, b) in edges {
            if !g.contains_vertex(a) || !g.contains_vertex(b) {
                return Err(GraphError::InvalidGraph(format!(
                    "edge {{{a},{b}}} references an unknown vertex"
                )));
            }
            if !g.add_edge(a, b)? {
                return Err(GraphError::InvalidGraph(format!("parallel edge {{{a},{b}}}")));
            }
        }
        Ok(g)
    }

    /// Builds a graph from edges alone, creating endpoints on demand.
    pub fn from_edges(edges: impl IntoIterator<Item = (VertexId, VertexId)>) -> Self {
        let mut g = Graph::new();
        for (a, b) in edges {
            g.add_edge(a, b).expect("loop in edge list");
        }
        g
    }

    /// Path with `n` edges on vertices `0..=n`.
    pub fn path(n: u32) -> Self {
        let mut g = Graph::new();
        g.add_vertex(0);
        for i in 0..n {
            g.add_edge(i, i + 1).unwrap();
        }
        g
    }

    /// Cycle on vertices `0..n`, `n >= 3`.
    pub fn cycle(n: u32) -> Self {
        assert!(n >= 3, "a simple cycle needs at least 3 vertices");
        let mut g = Graph::path(n - 1);
        g.add_edge(n - 1, 0).unwrap();
        g
    }

    /// Star with hub `0` and leaves `1..=k`.
    pub fn star(k: u32) -> Self {
        let mut g = Graph::new();
        g.add_vertex(0);
        for i in 1..=k {
            g.add_edge(0, i).unwrap();
        }
        g
    }

    pub fn complete(n: u32) -> Self {
        let mut g = Graph::new();
        for i in 0..n {
            g.add_vertex(i);
            for j in 0..i {
                g.add_edge(j, i).unwrap();
            }
        }
        g
    }

    /// Hub `0` with `k` arms, each a path of `len` edges.
    pub fn spider(k: u32, len: u32) -> Self {
        let mut g = Graph::new();
        g.add_vertex(0);
        let mut next = 1;
        for _ in 0..k {
            let mut prev = 0;
            for _ in 0..len {
                g.add_edge(prev, next).unwrap();
                prev = next;
                next += 1;
            }
        }
        g
    }

    /// Two cycles of lengths `a` and `b` glued at vertex `0`.
    pub fn figure_eight(a: u32, b: u32) -> Self {
        assert!(a >= 3 && b >= 3);
        let mut g = Graph::new();
        let mut next = 1;
        for len in [a, b] {
            let mut prev = 0;
            for _ in 0..len - 1 {
                g.add_edge(prev, next).unwrap();
                prev = next;
                next += 1;
            }
            g.add_edge(prev, 0).unwrap();
        }
        g
    }

    /// Returns `false` if the vertex already existed.
    pub fn add_vertex(&mut self, v: VertexId) -> bool {
        if self.adj.contains_key(&v) {
            return false;
        }
        self.adj.insert(v, BTreeSet::new());
        true
    }

    /// Adds the edge (creating endpoints as needed). Returns `false` if it
    /// was already present.
    pub fn add_edge(&mut self, a: VertexId, b: VertexId) -> Result<bool, GraphError> {
        let e = Edge::try_new(a, b)?;
        self.add_vertex(a);
        self.add_vertex(b);
        let fresh = self.adj.get_mut(&e.lo).unwrap().insert(e.hi);
        self.adj.get_mut(&e.hi).unwrap().insert(e.lo);
        Ok(fresh)
    }

    pub fn remove_edge(&mut self, a: VertexId, b: VertexId) -> bool {
        let removed = self.adj.get_mut(&a).map(|s| s.remove(&b)).unwrap_or(false);
        if let Some(s) = self.adj.get_mut(&b) {
            s.remove(&a);
        }
        removed
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn has_edge_e(&self, e: Edge) -> bool {
        self.has_edge(e.lo, e.hi)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.adj.keys().copied()
    }

    /// Edges in ascending `(lo, hi)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adj
            .iter()
            .flat_map(|(&a, ns)| ns.range(a + 1..).map(move |&b| Edge { lo: a, hi: b }))
    }

    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.adj.get(&v).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adj.get(&v).map_or(0, BTreeSet::len)
    }

    pub fn max_degree(&self) -> usize {
        self.adj.values().map(BTreeSet::len).max().unwrap_or(0)
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn max_vertex_id(&self) -> Option<VertexId> {
        self.adj.keys().next_back().copied()
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<VertexId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in self.vertices() {
            if seen.contains(&v) {
                continue;
            }
            let mut comp: Vec<VertexId> = self.bfs(v).into_keys().collect();
            comp.sort_unstable();
            seen.extend(comp.iter().copied());
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// First Betti number `|E| - |V| + #components`.
    pub fn betti1(&self) -> usize {
        self.edge_count() + self.components().len() - self.vertex_count()
    }

    /// Hop distances from `src` to every reachable vertex.
    pub fn bfs(&self, src: VertexId) -> HashMap<VertexId, u32> {
        let mut dist = HashMap::new();
        if !self.contains_vertex(src) {
            return dist;
        }
        dist.insert(src, 0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            for w in self.neighbors(u) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Vertices within hop distance `radius` of `src`, in BFS order.
    pub fn ball(&self, src: VertexId, radius: u32) -> Vec<VertexId> {
        let mut dist = HashMap::from([(src, 0u32)]);
        let mut order = vec![src];
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if du == radius {
                continue;
            }
            for w in self.neighbors(u) {
                if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(w) {
                    slot.insert(du + 1);
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        order
    }

    /// Like [`Graph::ball`] but with hop distances.
    pub fn bfs_within(&self, src: VertexId, radius: u32) -> Vec<(VertexId, u32)> {
        let mut dist = HashMap::from([(src, 0u32)]);
        let mut order = vec![(src, 0)];
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if du == radius {
                continue;
            }
            for w in self.neighbors(u) {
                if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(w) {
                    slot.insert(du + 1);
                    order.push((w, du + 1));
                    queue.push_back(w);
                }
            }
        }
        order
    }

    /// A shortest cycle, as its vertex sequence, or `None` for a forest.
    pub fn shortest_cycle(&self) -> Option<Vec<VertexId>> {
        let mut best: Option<Vec<VertexId>> = None;
        for root in self.vertices() {
            let mut dist: HashMap<VertexId, u32> = HashMap::from([(root, 0)]);
            let mut parent: HashMap<VertexId, VertexId> = HashMap::new();
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                if let Some(b) = &best {
                    if 2 * dist[&u] + 1 >= b.len() as u32 {
                        break;
                    }
                }
                for w in self.neighbors(u) {
                    match dist.get(&w) {
                        None => {
                            dist.insert(w, dist[&u] + 1);
                            parent.insert(w, u);
                            queue.push_back(w);
                        }
                        Some(_) if parent.get(&u) == Some(&w) => {}
                        Some(&dw) => {
                            let len = (dist[&u] + dw + 1) as usize;
                            if best.as_ref().is_none_or(|b| len < b.len()) {
                                let climb = |mut x: VertexId| {
                                    let mut p = vec![x];
                                    while let Some(&y) = parent.get(&x) {
                                        p.push(y);
                                        x = y;
                                    }
                                    p
                                };
                                let pu = climb(u);
                                let pw = climb(w);
                                // both end at root; drop the shared tail
                                let mut i = pu.len();
                                let mut j = pw.len();
                                while i > 1 && j > 1 && pu[i - 2] == pw[j - 2] {
                                    i -= 1;
                                    j -= 1;
                                }
                                let mut cycle: Vec<VertexId> = pu[..i].to_vec();
                                cycle.extend(pw[..j - 1].iter().rev());
                                if best.as_ref().is_none_or(|b| cycle.len() < b.len()) {
                                    best = Some(cycle);
                                }
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// Length of a shortest cycle, `None` for a forest.
    pub fn girth(&self) -> Option<usize> {
        self.shortest_cycle().map(|c| c.len())
    }

    /// True iff the graph is a single cycle on at least three vertices.
    pub fn is_cycle_graph(&self) -> bool {
        self.vertex_count() >= 3 && self.is_connected() && self.adj.values().all(|s| s.len() == 2)
    }

    /// True iff the graph is a single path (a lone vertex counts).
    pub fn is_path_graph(&self) -> bool {
        self.vertex_count() >= 1
            && self.is_connected()
            && self.edge_count() + 1 == self.vertex_count()
            && self.max_degree() <= 2
    }

    /// Vertex order along a cycle graph: starts at the smallest id and steps to
    /// its smaller neighbour. This fixes the orientation of circle codomains.
    pub fn cycle_order(&self) -> Option<Vec<VertexId>> {
        if !self.is_cycle_graph() {
            return None;
        }
        let start = self.vertices().next()?;
        let mut order = vec![start];
        let mut prev = start;
        let mut cur = self.neighbors(start).next()?;
        while cur != start {
            order.push(cur);
            let next = self.neighbors(cur).find(|&w| w != prev)?;
            prev = cur;
            cur = next;
        }
        Some(order)
    }

    /// Vertex order along a path graph, starting at the smaller endpoint.
    pub fn path_order(&self) -> Option<Vec<VertexId>> {
        if !self.is_path_graph() {
            return None;
        }
        let start = self.vertices().find(|&v| self.degree(v) <= 1)?;
        let mut order = vec![start];
        let mut prev = None;
        let mut cur = start;
        while let Some(next) = self.neighbors(cur).find(|&w| Some(w) != prev) {
            order.push(next);
            prev = Some(cur);
            cur = next;
        }
        Some(order)
    }

    /// Induced subgraph on `keep`.
    pub fn induced(&self, keep: &BTreeSet<VertexId>) -> Graph {
        let mut g = Graph::new();
        for &v in keep {
            if self.contains_vertex(v) {
                g.add_vertex(v);
            }
        }
        for e in self.edges() {
            if keep.contains(&e.lo) && keep.contains(&e.hi) {
                g.add_edge(e.lo, e.hi).unwrap();
            }
        }
        g
    }

    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for s in self.adj.values() {
            *h.entry(s.len()).or_insert(0) += 1;
        }
        h
    }
}

/// A point of the geometric realization `|G|`.
///
/// Vertex points are always stored as [`Point::Vertex`]; interior points carry
/// the parameter `t` in the open interval `(0,1)` measured from `edge.lo()`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "PointJson", into = "PointJson")]
pub enum Point {
    Vertex(VertexId),
    Interior { edge: Edge, t: Q },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PointJson {
    Vertex { vertex: VertexId },
    Edge {
        edge: [VertexId; 2],
        #[serde(with = "serde_q")]
        t: Q,
    },
}

impl TryFrom<PointJson> for Point {
    type Error = GraphError;
    fn try_from(j: PointJson) -> Result<Self, Self::Error> {
        match j {
            PointJson::Vertex { vertex } => Ok(Point::Vertex(vertex)),
            PointJson::Edge { edge: [a, b], t } => Point::on_edge(a, b, t),
        }
    }
}

impl From<Point> for PointJson {
    fn from(p: Point) -> Self {
        match p {
            Point::Vertex(v) => PointJson::Vertex { vertex: v },
            Point::Interior { edge, t } => PointJson::Edge { edge: edge.into(), t },
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Vertex(v) => write!(f, "v{v}"),
            Point::Interior { edge, t } => write!(f, "{edge}@{}", format_q(t)),
        }
    }
}

impl Point {
    /// The point at parameter `t` travelling from `from` towards `to`.
    /// Endpoints collapse to vertex form.
    pub fn on_edge(from: VertexId, to: VertexId, t: Q) -> Result<Point, GraphError> {
        if !is_unit_interval(&t) {
            return Err(GraphError::InvalidPoint(format!(
                "parameter {} outside [0,1]",
                format_q(&t)
            )));
        }
        let edge = Edge::try_new(from, to).map_err(|e| GraphError::InvalidPoint(e.to_string()))?;
        let t = if from == edge.lo { t } else { Q::one() - t };
        Ok(Self::canonical(edge, t))
    }

    fn canonical(edge: Edge, t: Q) -> Point {
        if t.is_zero() {
            Point::Vertex(edge.lo)
        } else if t.is_one() {
            Point::Vertex(edge.hi)
        } else {
            Point::Interior { edge, t }
        }
    }

    pub fn as_vertex(&self) -> Option<VertexId> {
        match self {
            Point::Vertex(v) => Some(*v),
            Point::Interior { .. } => None,
        }
    }

    pub fn validate(&self, g: &Graph) -> Result<(), GraphError> {
        match self {
            Point::Vertex(v) if g.contains_vertex(*v) => Ok(()),
            Point::Vertex(v) => Err(GraphError::InvalidPoint(format!("unknown vertex {v}"))),
            Point::Interior { edge, .. } if g.has_edge_e(*edge) => Ok(()),
            Point::Interior { edge, .. } => {
                Err(GraphError::InvalidPoint(format!("unknown edge {edge}")))
            }
        }
    }

    /// Coordinate of this point along `edge` (0 at `lo`, 1 at `hi`), if it
    /// lies on that closed edge.
    pub fn coord_on(&self, edge: Edge) -> Option<Q> {
        match self {
            Point::Vertex(v) if *v == edge.lo => Some(Q::zero()),
            Point::Vertex(v) if *v == edge.hi => Some(Q::one()),
            Point::Vertex(_) => None,
            Point::Interior { edge: e, t } if *e == edge => Some(*t),
            Point::Interior { .. } => None,
        }
    }

    /// Graph vertices at the ends of the cell containing this point, each with
    /// the distance from the point.
    pub fn anchors(&self) -> Vec<(VertexId, Q)> {
        match self {
            Point::Vertex(v) => vec![(*v, Q::zero())],
            Point::Interior { edge, t } => vec![(edge.lo, *t), (edge.hi, Q::one() - *t)],
        }
    }
}

/// Closed edge shared by two points, if any. Two equal vertex points share no
/// distinguished edge.
pub fn common_edge(g: &Graph, a: &Point, b: &Point) -> Option<Edge> {
    match (a, b) {
        (Point::Interior { edge, .. }, other) | (other, Point::Interior { edge, .. }) => {
            other.coord_on(*edge).map(|_| *edge)
        }
        (Point::Vertex(u), Point::Vertex(w)) if u != w && g.has_edge(*u, *w) => {
            Some(Edge::new(*u, *w))
        }
        _ => None,
    }
}

/// A metric ball in a realization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricBall {
    pub center: Point,
    #[serde(with = "serde_q")]
    pub radius: Q,
    pub open: bool,
}

impl MetricBall {
    pub fn open(center: Point, radius: Q) -> Self {
        assert!(radius >= Q::zero(), "radius must be non-negative");
        MetricBall { center, radius, open: true }
    }

    pub fn closed(center: Point, radius: Q) -> Self {
        assert!(radius >= Q::zero(), "radius must be non-negative");
        MetricBall { center, radius, open: false }
    }

    pub fn contains(&self, metric: &GraphMetric, p: &Point) -> bool {
        match metric.distance(&self.center, p) {
            Some(d) if self.open => d < self.radius,
            Some(d) => d <= self.radius,
            None => false,
        }
    }
}

/// All-pairs vertex distances of a possibly disconnected graph, with point
/// distance queries on top.
#[derive(Debug, Clone)]
pub struct GraphMetric {
    graph: Graph,
    index: HashMap<VertexId, usize>,
    ids: Vec<VertexId>,
    dist: Vec<Vec<Option<u32>>>,
}

impl GraphMetric {
    pub fn new(graph: &Graph) -> Self {
        let ids: Vec<VertexId> = graph.vertices().collect();
        let index: HashMap<VertexId, usize> =
            ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let dist = ids
            .iter()
            .map(|&v| {
                let bfs = graph.bfs(v);
                ids.iter().map(|w| bfs.get(w).copied()).collect()
            })
            .collect();
        GraphMetric { graph: graph.clone(), index, ids, dist }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn vertex_distance(&self, a: VertexId, b: VertexId) -> Option<u32> {
        self.dist[*self.index.get(&a)?][*self.index.get(&b)?]
    }

    /// Path distance between two points; `None` if they lie in different
    /// components or are not on the graph.
    pub fn distance(&self, a: &Point, b: &Point) -> Option<Q> {
        if a.validate(&self.graph).is_err() || b.validate(&self.graph).is_err() {
            return None;
        }
        let mut best: Option<Q> = None;
        if let (Point::Interior { edge: ea, t: ta }, Point::Interior { edge: eb, t: tb }) = (a, b) {
            if ea == eb {
                best = Some((*ta - *tb).abs());
            }
        }
        for (u, du) in a.anchors() {
            for (w, dw) in b.anchors() {
                if let Some(d) = self.vertex_distance(u, w) {
                    let cand = du + dw + Q::from_integer(d as i64);
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
        }
        best
    }

    pub fn vertex_ids(&self) -> &[VertexId] {
        &self.ids
    }
}

/// Exact path distance in `|G|`.
pub fn path_distance(g: &Graph, a: &Point, b: &Point) -> Result<Q, GraphError> {
    a.validate(g)?;
    b.validate(g)?;
    let mut best: Option<Q> = None;
    if let (Point::Interior { edge: ea, t: ta }, Point::Interior { edge: eb, t: tb }) = (a, b) {
        if ea == eb {
            best = Some((*ta - *tb).abs());
        }
    }
    for (u, du) in a.anchors() {
        let bfs = g.bfs(u);
        for (w, dw) in b.anchors() {
            if let Some(&d) = bfs.get(&w) {
                let cand = du + dw + Q::from_integer(d as i64);
                if best.is_none_or(|b| cand < b) {
                    best = Some(cand);
                }
            }
        }
    }
    best.ok_or_else(|| GraphError::DisconnectedInput(a.to_string(), b.to_string()))
}

/// All-pairs shortest path lengths between vertices, indexed by `ids`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistanceMatrix {
    pub ids: Vec<VertexId>,
    pub d: Vec<Vec<u32>>,
}

impl DistanceMatrix {
    pub fn get(&self, a: VertexId, b: VertexId) -> Option<u32> {
        let i = self.ids.binary_search(&a).ok()?;
        let j = self.ids.binary_search(&b).ok()?;
        Some(self.d[i][j])
    }

    pub fn max_entry(&self) -> u32 {
        self.d.iter().flatten().copied().max().unwrap_or(0)
    }
}

pub fn vertex_distance_matrix(g: &Graph) -> Result<DistanceMatrix, GraphError> {
    let ids: Vec<VertexId> = g.vertices().collect();
    let mut d = Vec::with_capacity(ids.len());
    for &v in &ids {
        let bfs = g.bfs(v);
        let mut row = Vec::with_capacity(ids.len());
        for &w in &ids {
            match bfs.get(&w) {
                Some(&x) => row.push(x),
                None => return Err(GraphError::DisconnectedInput(v.to_string(), w.to_string())),
            }
        }
        d.push(row);
    }
    Ok(DistanceMatrix { ids, d })
}

pub fn betti1(g: &Graph) -> usize {
    g.betti1()
}

/// Translation between a graph and its uniform subdivision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subdivision {
    parts: u32,
    /// Each coarse edge's chain `lo = w0, w1, .., wk = hi`.
    chains: BTreeMap<Edge, Vec<VertexId>>,
    /// New vertex → (coarse edge, index along its chain).
    inserted: HashMap<VertexId, (Edge, u32)>,
    /// Fine edge → (coarse edge, index of its `lo`-side chain vertex).
    fine_edges: HashMap<Edge, (Edge, u32)>,
}

impl Subdivision {
    pub fn parts(&self) -> u32 {
        self.parts
    }

    pub fn chain(&self, coarse: Edge) -> Option<&[VertexId]> {
        self.chains.get(&coarse).map(Vec::as_slice)
    }

    /// Coarse point → the same point of the fine realization.
    pub fn to_fine(&self, p: &Point) -> Point {
        match p {
            Point::Vertex(v) => Point::Vertex(*v),
            Point::Interior { edge, t } => {
                let chain = &self.chains[edge];
                let k = Q::from_integer(self.parts as i64);
                let s = *t * k;
                let j = s.floor();
                let frac = s - j;
                let j = j.to_integer() as usize;
                if frac.is_zero() {
                    Point::Vertex(chain[j])
                } else {
                    Point::on_edge(chain[j], chain[j + 1], frac).unwrap()
                }
            }
        }
    }

    /// Fine point → the same point of the coarse realization.
    pub fn to_coarse(&self, p: &Point) -> Point {
        let k = Q::from_integer(self.parts as i64);
        match p {
            Point::Vertex(v) => match self.inserted.get(v) {
                None => Point::Vertex(*v),
                Some(&(edge, j)) => Point::on_edge(edge.lo, edge.hi, Q::from_integer(j as i64) / k)
                    .unwrap(),
            },
            Point::Interior { edge, t } => {
                let (coarse, j) = self.fine_edges[edge];
                let chain = &self.chains[&coarse];
                let s = if edge.lo == chain[j as usize] { *t } else { Q::one() - *t };
                Point::on_edge(coarse.lo, coarse.hi, (Q::from_integer(j as i64) + s) / k).unwrap()
            }
        }
    }
}

/// Replaces every edge by a path of `parts` edges. New vertices get ids above
/// the current maximum, allocated edge by edge in ascending edge order.
pub fn subdivide(g: &Graph, parts: u32) -> (Graph, Subdivision) {
    assert!(parts >= 1, "parts_per_edge must be positive");
    let mut fine = Graph::new();
    for v in g.vertices() {
        fine.add_vertex(v);
    }
    let mut next = g.max_vertex_id().map_or(0, |m| m + 1);
    let mut chains = BTreeMap::new();
    let mut inserted = HashMap::new();
    let mut fine_edges = HashMap::new();
    for e in g.edges() {
        let mut chain = vec![e.lo];
        for j in 1..parts {
            inserted.insert(next, (e, j));
            chain.push(next);
            next += 1;
        }
        chain.push(e.hi);
        for (j, w) in chain.windows(2).enumerate() {
            fine.add_edge(w[0], w[1]).unwrap();
            fine_edges.insert(Edge::new(w[0], w[1]), (e, j as u32));
        }
        chains.insert(e, chain);
    }
    (fine, Subdivision { parts, chains, inserted, fine_edges })
}
