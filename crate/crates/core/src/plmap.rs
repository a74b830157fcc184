//! Piecewise-linear maps between graph realizations.
//!
//! A map is stored as the image of every domain vertex plus, for every domain
//! edge, a track of breakpoints `(t, image)` with `t` running from 0 at the
//! edge's `lo` end to 1 at its `hi` end. Between two breakpoints the map is
//! affine onto a single codomain edge (or constant).

use crate::cover::{Cover, CoverError, FiniteSpace};
use crate::graph::{common_edge, Edge, Graph, GraphError, GraphMetric, Point, VertexId};
use crate::rational::{format_q, serde_q, Q};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlMapError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("breakpoint t={t} on edge {edge} is off the sample grid with {per_edge} parts per edge")]
    ResolutionTooCoarse { edge: Edge, t: String, per_edge: u32 },
    #[error("not a cycle: {0}")]
    NotACycle(String),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakpoint {
    #[serde(with = "serde_q")]
    pub t: Q,
    pub image: Point,
}

impl Breakpoint {
    pub fn new(t: Q, image: Point) -> Self {
        Breakpoint { t, image }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PlMapJson", into = "PlMapJson")]
pub struct PLMap {
    domain: Graph,
    codomain: Graph,
    vertex_images: BTreeMap<VertexId, Point>,
    tracks: BTreeMap<Edge, Vec<Breakpoint>>,
}

#[derive(Serialize, Deserialize)]
struct PlMapJson {
    domain: Graph,
    codomain: Graph,
    vertex_images: Vec<VertexImage>,
    edge_tracks: Vec<EdgeTrack>,
}

#[derive(Serialize, Deserialize)]
struct VertexImage {
    vertex: VertexId,
    image: Point,
}

#[derive(Serialize, Deserialize)]
struct EdgeTrack {
    edge: Edge,
    breakpoints: Vec<Breakpoint>,
}

impl TryFrom<PlMapJson> for PLMap {
    type Error = PlMapError;
    fn try_from(j: PlMapJson) -> Result<Self, Self::Error> {
        PLMap::new(
            j.domain,
            j.codomain,
            j.vertex_images.into_iter().map(|v| (v.vertex, v.image)).collect(),
            j.edge_tracks.into_iter().map(|e| (e.edge, e.breakpoints)).collect(),
        )
    }
}

impl From<PLMap> for PlMapJson {
    fn from(m: PLMap) -> Self {
        PlMapJson {
            domain: m.domain,
            codomain: m.codomain,
            vertex_images: m
                .vertex_images
                .into_iter()
                .map(|(vertex, image)| VertexImage { vertex, image })
                .collect(),
            edge_tracks: m
                .tracks
                .into_iter()
                .map(|(edge, breakpoints)| EdgeTrack { edge, breakpoints })
                .collect(),
        }
    }
}

/// Point at fraction `s` of the straight segment from `a` to `b`, which must
/// share a codomain edge unless equal.
fn interpolate(g: &Graph, a: &Point, b: &Point, s: Q) -> Point {
    if a == b || s.is_zero() {
        return a.clone();
    }
    if s.is_one() {
        return b.clone();
    }
    let e = common_edge(g, a, b).expect("segment endpoints share an edge");
    let ca = a.coord_on(e).unwrap();
    let cb = b.coord_on(e).unwrap();
    Point::on_edge(e.lo(), e.hi(), ca + s * (cb - ca)).unwrap()
}

/// Germ of the segment leaving `a` towards `b`: the codomain edge and whether
/// the coordinate along it increases.
fn germ(g: &Graph, a: &Point, b: &Point) -> Option<(Edge, bool)> {
    let e = common_edge(g, a, b)?;
    Some((e, b.coord_on(e)? > a.coord_on(e)?))
}

impl PLMap {
    pub fn new(
        domain: Graph,
        codomain: Graph,
        vertex_images: BTreeMap<VertexId, Point>,
        tracks: BTreeMap<Edge, Vec<Breakpoint>>,
    ) -> Result<Self, PlMapError> {
        for v in domain.vertices() {
            let img = vertex_images
                .get(&v)
                .ok_or_else(|| PlMapError::InvalidMap(format!("vertex {v} has no image")))?;
            img.validate(&codomain)?;
        }
        if let Some(v) = vertex_images.keys().find(|v| !domain.contains_vertex(**v)) {
            return Err(PlMapError::InvalidMap(format!("image given for unknown vertex {v}")));
        }
        if let Some(e) = tracks.keys().find(|e| !domain.has_edge_e(**e)) {
            return Err(PlMapError::InvalidMap(format!("track given for unknown edge {e}")));
        }
        for e in domain.edges() {
            let track = tracks
                .get(&e)
                .ok_or_else(|| PlMapError::InvalidMap(format!("edge {e} has no track")))?;
            let bad = |msg: &str| PlMapError::InvalidMap(format!("track of {e}: {msg}"));
            if track.len() < 2 || !track[0].t.is_zero() || !track[track.len() - 1].t.is_one() {
                return Err(bad("must run from t=0 to t=1"));
            }
            if track[0].image != vertex_images[&e.lo()] || track[track.len() - 1].image != vertex_images[&e.hi()] {
                return Err(bad("endpoint images disagree with vertex images"));
            }
            for w in track.windows(2) {
                if w[0].t >= w[1].t {
                    return Err(bad("parameters must strictly increase"));
                }
                w[1].image.validate(&codomain)?;
                if w[0].image != w[1].image && common_edge(&codomain, &w[0].image, &w[1].image).is_none() {
                    return Err(bad(&format!("{} and {} share no edge", w[0].image, w[1].image)));
                }
            }
        }
        Ok(PLMap { domain, codomain, vertex_images, tracks })
    }

    pub fn identity(g: &Graph) -> Self {
        let images = g.vertices().map(|v| (v, Point::Vertex(v))).collect();
        PLMap::linear(g.clone(), g.clone(), images).unwrap()
    }

    pub fn constant(domain: &Graph, codomain: &Graph, p: Point) -> Result<Self, PlMapError> {
        let images = domain.vertices().map(|v| (v, p.clone())).collect();
        PLMap::linear(domain.clone(), codomain.clone(), images)
    }

    /// Each domain edge maps affinely onto the segment between its endpoint
    /// images, which must be equal or share a codomain edge.
    pub fn linear(
        domain: Graph,
        codomain: Graph,
        vertex_images: BTreeMap<VertexId, Point>,
    ) -> Result<Self, PlMapError> {
        let mut tracks = BTreeMap::new();
        for e in domain.edges() {
            let (a, b) = match (vertex_images.get(&e.lo()), vertex_images.get(&e.hi())) {
                (Some(a), Some(b)) => (a.clone(), b.clone()),
                _ => return Err(PlMapError::InvalidMap(format!("edge {e} has an endpoint without image"))),
            };
            tracks.insert(e, vec![Breakpoint::new(Q::zero(), a), Breakpoint::new(Q::one(), b)]);
        }
        PLMap::new(domain, codomain, vertex_images, tracks)
    }

    /// Each domain edge runs at constant speed along a shortest path between
    /// its endpoint images. Ties go to the smallest vertex ids.
    pub fn routed(
        domain: Graph,
        codomain: Graph,
        vertex_images: BTreeMap<VertexId, Point>,
    ) -> Result<Self, PlMapError> {
        let mut tracks = BTreeMap::new();
        for e in domain.edges() {
            let (a, b) = match (vertex_images.get(&e.lo()), vertex_images.get(&e.hi())) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(PlMapError::InvalidMap(format!("edge {e} has an endpoint without image"))),
            };
            a.validate(&codomain)?;
            b.validate(&codomain)?;
            let route = geodesic(&codomain, a, b)
                .ok_or_else(|| GraphError::DisconnectedInput(a.to_string(), b.to_string()))?;
            tracks.insert(e, route);
        }
        PLMap::new(domain, codomain, vertex_images, tracks)
    }

    /// Covering map of cycles `C_{p·m} → C_m`, vertex `j ↦ j mod m`.
    pub fn cyclic_cover(m: u32, p: u32) -> Self {
        let dom = Graph::cycle(m * p);
        let cod = Graph::cycle(m);
        let images = dom.vertices().map(|j| (j, Point::Vertex(j % m))).collect();
        PLMap::linear(dom, cod, images).unwrap()
    }

    pub fn domain(&self) -> &Graph {
        &self.domain
    }

    pub fn codomain(&self) -> &Graph {
        &self.codomain
    }

    pub fn vertex_image(&self, v: VertexId) -> Option<&Point> {
        self.vertex_images.get(&v)
    }

    pub fn vertex_images(&self) -> &BTreeMap<VertexId, Point> {
        &self.vertex_images
    }

    pub fn track(&self, e: Edge) -> Option<&[Breakpoint]> {
        self.tracks.get(&e).map(Vec::as_slice)
    }

    pub fn tracks(&self) -> &BTreeMap<Edge, Vec<Breakpoint>> {
        &self.tracks
    }

    pub fn evaluate(&self, p: &Point) -> Result<Point, PlMapError> {
        p.validate(&self.domain)?;
        Ok(match p {
            Point::Vertex(v) => self.vertex_images[v].clone(),
            Point::Interior { edge, t } => self.eval_track(*edge, *t),
        })
    }

    fn eval_track(&self, e: Edge, t: Q) -> Point {
        let track = &self.tracks[&e];
        let i = track.partition_point(|b| b.t <= t);
        if i == 0 {
            return track[0].image.clone();
        }
        let lo = &track[i - 1];
        if lo.t == t || i == track.len() {
            return lo.image.clone();
        }
        let hi = &track[i];
        interpolate(&self.codomain, &lo.image, &hi.image, (t - lo.t) / (hi.t - lo.t))
    }

    /// `outer ∘ inner`, with extra breakpoints wherever `inner` crosses a
    /// breakpoint of `outer`.
    pub fn compose(outer: &PLMap, inner: &PLMap) -> Result<PLMap, PlMapError> {
        if inner.codomain != outer.domain {
            return Err(PlMapError::DomainMismatch("inner codomain differs from outer domain".into()));
        }
        let images = inner
            .vertex_images
            .iter()
            .map(|(&v, y)| Ok((v, outer.evaluate(y)?)))
            .collect::<Result<BTreeMap<_, _>, PlMapError>>()?;
        let mut tracks = BTreeMap::new();
        for (&e, track) in &inner.tracks {
            let mut out = vec![Breakpoint::new(Q::zero(), outer.evaluate(&track[0].image)?)];
            for w in track.windows(2) {
                let (a, b) = (&w[0].image, &w[1].image);
                if a != b {
                    let ye = common_edge(&inner.codomain, a, b).unwrap();
                    let (ca, cb) = (a.coord_on(ye).unwrap(), b.coord_on(ye).unwrap());
                    let mut cross: Vec<&Breakpoint> = outer.tracks[&ye]
                        .iter()
                        .filter(|bp| (bp.t > ca && bp.t < cb) || (bp.t < ca && bp.t > cb))
                        .collect();
                    if cb < ca {
                        cross.reverse();
                    }
                    for bp in cross {
                        let t = w[0].t + (bp.t - ca) / (cb - ca) * (w[1].t - w[0].t);
                        out.push(Breakpoint::new(t, bp.image.clone()));
                    }
                }
                out.push(Breakpoint::new(w[1].t, outer.evaluate(b)?));
            }
            tracks.insert(e, out);
        }
        PLMap::new(inner.domain.clone(), outer.codomain.clone(), images, tracks)
    }

    /// Same map with breakpoints added at the given parameters.
    pub fn refine(&self, extra: &BTreeMap<Edge, BTreeSet<Q>>) -> PLMap {
        let mut tracks = self.tracks.clone();
        for (e, ts) in extra {
            let Some(track) = tracks.get_mut(e) else { continue };
            let mut all: BTreeSet<Q> = track.iter().map(|b| b.t).collect();
            all.extend(ts.iter().copied().filter(|t| *t > Q::zero() && *t < Q::one()));
            *track = all.into_iter().map(|t| Breakpoint::new(t, self.eval_track(*e, t))).collect();
        }
        PLMap { tracks, ..self.clone() }
    }

    /// Breakpoint parameters of every track.
    pub fn grid(&self) -> BTreeMap<Edge, BTreeSet<Q>> {
        self.tracks.iter().map(|(e, tr)| (*e, tr.iter().map(|b| b.t).collect())).collect()
    }

    /// Exact preimage of `target`. Flat segments mapping onto it contribute
    /// their endpoints and set `contains_segment`.
    pub fn fiber_exact(&self, target: &Point) -> Result<FiberReport, PlMapError> {
        target.validate(&self.codomain)?;
        let mut pre = BTreeSet::new();
        let mut contains_segment = false;
        for (&v, img) in &self.vertex_images {
            if img == target {
                pre.insert(Point::Vertex(v));
            }
        }
        for (&e, track) in &self.tracks {
            let at = |t: Q| Point::on_edge(e.lo(), e.hi(), t).unwrap();
            for w in track.windows(2) {
                let (a, b) = (&w[0].image, &w[1].image);
                if a == b {
                    if a == target {
                        contains_segment = true;
                        pre.insert(at(w[0].t));
                        pre.insert(at(w[1].t));
                    }
                    continue;
                }
                let ye = common_edge(&self.codomain, a, b).unwrap();
                let Some(c) = target.coord_on(ye) else { continue };
                let (ca, cb) = (a.coord_on(ye).unwrap(), b.coord_on(ye).unwrap());
                if (c - ca) * (c - cb) <= Q::zero() {
                    pre.insert(at(w[0].t + (c - ca) / (cb - ca) * (w[1].t - w[0].t)));
                }
            }
        }
        let preimage: Vec<Point> = pre.into_iter().collect();
        let metric = GraphMetric::new(&self.domain);
        Ok(FiberReport {
            target: target.clone(),
            diameter: diameter(&preimage, |a, b| metric.distance(a, b)),
            preimage,
            contains_segment,
        })
    }

    /// Checks that every fiber over the images of the sample points of
    /// `space` lies in one member of `cover`.
    pub fn is_u_map(&self, cover: &Cover, space: &FiniteSpace) -> Result<UMapReport, PlMapError> {
        let per_edge = self.check_grid(space)?;
        cover.validate(space)?;
        let mut fibers: BTreeMap<Point, Vec<usize>> = BTreeMap::new();
        for i in 0..space.len() {
            let img = self.evaluate(space.point(i).unwrap())?;
            fibers.entry(img).or_default().push(i);
        }
        let mut worst: Option<FiberReport> = None;
        let mut failing: Option<FiberReport> = None;
        let mut fibers_checked = 0;
        for (target, idx) in fibers {
            fibers_checked += 1;
            let preimage: Vec<Point> = idx.iter().map(|&i| space.point(i).unwrap().clone()).collect();
            let d = diameter(&idx, |&a, &b| space.distance(a, b));
            let inside = cover.members.iter().any(|m| idx.iter().all(|&i| m.points.contains(i)));
            let report = FiberReport { target, preimage, diameter: d, contains_segment: false };
            if !inside && failing.is_none() {
                failing = Some(report.clone());
            }
            if worst.as_ref().is_none_or(|w| report.diameter > w.diameter) {
                worst = Some(report);
            }
        }
        Ok(UMapReport {
            is_u_map: failing.is_none(),
            worst_fiber: worst,
            failing_fiber: failing,
            fibers_checked,
            samples_per_edge: per_edge,
        })
    }

    fn check_grid(&self, space: &FiniteSpace) -> Result<u32, PlMapError> {
        let real = space
            .realization()
            .ok_or_else(|| PlMapError::DomainMismatch("sample space has no graph realization".into()))?;
        if real.graph() != &self.domain {
            return Err(PlMapError::DomainMismatch("samples are not taken on the map's domain".into()));
        }
        let k = real.per_edge();
        let kq = Q::from_integer(k as i64);
        for (&e, track) in &self.tracks {
            if let Some(b) = track.iter().find(|b| !(b.t * kq).is_integer()) {
                return Err(PlMapError::ResolutionTooCoarse { edge: e, t: format_q(&b.t), per_edge: k });
            }
        }
        Ok(k)
    }

    /// No flat segments, no folds at interior breakpoints, and the incident
    /// edges at every domain vertex leave its image in distinct directions.
    pub fn is_locally_injective(&self) -> LocalInjectivity {
        let fail = |w| LocalInjectivity { locally_injective: false, witness: Some(w) };
        let cod = &self.codomain;
        for (&e, track) in &self.tracks {
            for w in track.windows(2) {
                if w[0].image == w[1].image {
                    return fail(InjectivityWitness::FlatSegment { edge: e, from: w[0].t, to: w[1].t });
                }
            }
            for w in track.windows(3) {
                if germ(cod, &w[1].image, &w[0].image) == germ(cod, &w[1].image, &w[2].image) {
                    return fail(InjectivityWitness::Fold { edge: e, t: w[1].t });
                }
            }
        }
        for v in self.domain.vertices() {
            let mut seen = BTreeSet::new();
            for n in self.domain.neighbors(v) {
                let e = Edge::new(v, n);
                let track = &self.tracks[&e];
                let (a, b) = if v == e.lo() {
                    (&track[0].image, &track[1].image)
                } else {
                    (&track[track.len() - 1].image, &track[track.len() - 2].image)
                };
                if !seen.insert(germ(cod, a, b)) {
                    return fail(InjectivityWitness::Vertex { vertex: v });
                }
            }
        }
        LocalInjectivity { locally_injective: true, witness: None }
    }

    /// Degree of the map on a cycle domain into a cycle codomain.
    pub fn winding_number(&self) -> Result<i64, PlMapError> {
        let cycle = self
            .domain
            .cycle_order()
            .ok_or_else(|| PlMapError::NotACycle("domain is not a cycle graph".into()))?;
        self.winding_along(&cycle)
    }

    /// Degree of the map restricted to the closed walk `cycle` of domain
    /// vertices. The codomain is oriented by [`Graph::cycle_order`].
    pub fn winding_along(&self, cycle: &[VertexId]) -> Result<i64, PlMapError> {
        let order = self
            .codomain
            .cycle_order()
            .ok_or_else(|| PlMapError::NotACycle("codomain is not a cycle graph".into()))?;
        let n = order.len();
        let pos: BTreeMap<VertexId, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        if cycle.len() < 3 {
            return Err(PlMapError::NotACycle("a cycle needs at least three vertices".into()));
        }
        let mut total = Q::zero();
        for i in 0..cycle.len() {
            let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
            let e = Edge::try_new(a, b)?;
            let track = self
                .tracks
                .get(&e)
                .ok_or_else(|| PlMapError::NotACycle(format!("{a}-{b} is not a domain edge")))?;
            let mut pts: Vec<&Point> = track.iter().map(|b| &b.image).collect();
            if a != e.lo() {
                pts.reverse();
            }
            for w in pts.windows(2) {
                if w[0] == w[1] {
                    continue;
                }
                let ce = common_edge(&self.codomain, w[0], w[1]).unwrap();
                let forward = pos[&ce.hi()] == (pos[&ce.lo()] + 1) % n;
                let inc = w[1].coord_on(ce).unwrap() - w[0].coord_on(ce).unwrap();
                total += if forward { inc } else { -inc };
            }
        }
        let w = total / Q::from_integer(n as i64);
        if !w.is_integer() {
            return Err(PlMapError::NotACycle(format!("walk {cycle:?} does not close up")));
        }
        Ok(w.to_integer())
    }

    /// Maps `|fine| → |coarse|` and back for a uniform subdivision.
    pub fn subdivision_maps(coarse: &Graph, parts: u32) -> (Graph, PLMap, PLMap) {
        let (fine, sub) = crate::graph::subdivide(coarse, parts);
        let down_images = fine.vertices().map(|v| (v, sub.to_coarse(&Point::Vertex(v)))).collect();
        let down = PLMap::linear(fine.clone(), coarse.clone(), down_images).unwrap();
        let up_images = coarse.vertices().map(|v| (v, Point::Vertex(v))).collect();
        let k = Q::from_integer(parts as i64);
        let tracks = coarse
            .edges()
            .map(|e| {
                let chain = sub.chain(e).unwrap();
                let bps = chain
                    .iter()
                    .enumerate()
                    .map(|(j, &w)| Breakpoint::new(Q::from_integer(j as i64) / k, Point::Vertex(w)))
                    .collect();
                (e, bps)
            })
            .collect();
        let up = PLMap::new(coarse.clone(), fine.clone(), up_images, tracks).unwrap();
        (fine, down, up)
    }
}

/// Shortest route from `a` to `b` as a unit-speed track.
fn geodesic(g: &Graph, a: &Point, b: &Point) -> Option<Vec<Breakpoint>> {
    if a == b {
        return Some(vec![Breakpoint::new(Q::zero(), a.clone()), Breakpoint::new(Q::one(), b.clone())]);
    }
    let mut best: Option<(Q, Vec<Point>)> = None;
    if let Some(e) = common_edge(g, a, b) {
        let d = (b.coord_on(e).unwrap() - a.coord_on(e).unwrap()).abs();
        best = Some((d, vec![a.clone(), b.clone()]));
    }
    for (u, du) in a.anchors() {
        let (dist, parent) = bfs_tree(g, u);
        for (w, dw) in b.anchors() {
            let Some(&k) = dist.get(&w) else { continue };
            let len = du + dw + Q::from_integer(k as i64);
            if best.as_ref().is_some_and(|(l, _)| *l <= len) {
                continue;
            }
            let mut verts = vec![w];
            while let Some(&p) = parent.get(verts.last().unwrap()) {
                verts.push(p);
            }
            verts.reverse();
            let mut pts = vec![a.clone()];
            pts.extend(verts.into_iter().map(Point::Vertex));
            pts.push(b.clone());
            pts.dedup();
            best = Some((len, pts));
        }
    }
    let (total, pts) = best?;
    let mut out = Vec::with_capacity(pts.len());
    let mut run = Q::zero();
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            let e = common_edge(g, &pts[i - 1], p).unwrap();
            run += (p.coord_on(e).unwrap() - pts[i - 1].coord_on(e).unwrap()).abs();
        }
        out.push(Breakpoint::new(run / total, p.clone()));
    }
    Some(out)
}

fn bfs_tree(g: &Graph, src: VertexId) -> (BTreeMap<VertexId, u32>, BTreeMap<VertexId, VertexId>) {
    let mut dist = BTreeMap::from([(src, 0)]);
    let mut parent = BTreeMap::new();
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for w in g.neighbors(u) {
            if !dist.contains_key(&w) {
                dist.insert(w, dist[&u] + 1);
                parent.insert(w, u);
                queue.push_back(w);
            }
        }
    }
    (dist, parent)
}

fn diameter<T>(items: &[T], d: impl Fn(&T, &T) -> Option<Q>) -> Q {
    let mut best = Q::zero();
    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            if let Some(x) = d(a, b) {
                best = best.max(x);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiberReport {
    pub target: Point,
    pub preimage: Vec<Point>,
    #[serde(with = "serde_q")]
    pub diameter: Q,
    pub contains_segment: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UMapReport {
    pub is_u_map: bool,
    /// Largest-diameter sampled fiber; ties go to the smallest target.
    pub worst_fiber: Option<FiberReport>,
    /// Smallest target whose sampled fiber fits in no member.
    pub failing_fiber: Option<FiberReport>,
    pub fibers_checked: usize,
    pub samples_per_edge: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InjectivityWitness {
    FlatSegment {
        edge: Edge,
        #[serde(with = "serde_q")]
        from: Q,
        #[serde(with = "serde_q")]
        to: Q,
    },
    Fold {
        edge: Edge,
        #[serde(with = "serde_q")]
        t: Q,
    },
    Vertex { vertex: VertexId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalInjectivity {
    pub locally_injective: bool,
    pub witness: Option<InjectivityWitness>,
}

/// `x ↦ (first(x), second(x))`, both factors refined to one breakpoint grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProductMap {
    pub first: PLMap,
    pub second: PLMap,
}

impl ProductMap {
    pub fn evaluate(&self, p: &Point) -> Result<(Point, Point), PlMapError> {
        Ok((self.first.evaluate(p)?, self.second.evaluate(p)?))
    }
}

/// The diagonal product `f △ g`.
pub fn diagonal_product(f: &PLMap, g: &PLMap) -> Result<ProductMap, PlMapError> {
    if f.domain != g.domain {
        return Err(PlMapError::DomainMismatch("factors have different domains".into()));
    }
    let mut grid = f.grid();
    for (e, ts) in g.grid() {
        grid.entry(e).or_default().extend(ts);
    }
    Ok(ProductMap { first: f.refine(&grid), second: g.refine(&grid) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::Member;
    use crate::graph::MetricBall;
    use crate::rational::{q, qi};

    fn pt(a: VertexId, b: VertexId, t: Q) -> Point {
        Point::on_edge(a, b, t).unwrap()
    }

    #[test]
    fn evaluate_basics() {
        let c6 = Graph::cycle(6);
        let p = pt(1, 2, q(1, 3));
        assert_eq!(PLMap::identity(&c6).evaluate(&p).unwrap(), p);
        let k = PLMap::constant(&c6, &c6, Point::Vertex(4)).unwrap();
        assert_eq!(k.evaluate(&p).unwrap(), Point::Vertex(4));
        // a quarter of the way round C12 is vertex 3; doubled it is half of C6
        let dbl = PLMap::cyclic_cover(6, 2);
        assert_eq!(dbl.evaluate(&Point::Vertex(3)).unwrap(), Point::Vertex(3));
        assert_eq!(dbl.evaluate(&pt(7, 8, q(1, 2))).unwrap(), pt(1, 2, q(1, 2)));
        assert!(dbl.evaluate(&pt(0, 5, q(1, 2))).is_err());
    }

    #[test]
    fn winding_examples() {
        let c6 = Graph::cycle(6);
        assert_eq!(PLMap::identity(&c6).winding_number().unwrap(), 1);
        assert_eq!(PLMap::constant(&c6, &c6, Point::Vertex(0)).unwrap().winding_number().unwrap(), 0);
        let dbl = PLMap::cyclic_cover(6, 2);
        assert_eq!(dbl.winding_number().unwrap(), 2);
        let quad = PLMap::compose(&dbl, &PLMap::cyclic_cover(12, 2)).unwrap();
        assert_eq!(quad.winding_number().unwrap(), 4);
        assert!(matches!(PLMap::identity(&Graph::path(3)).winding_number(), Err(PlMapError::NotACycle(_))));
    }

    #[test]
    fn reflection_winds_backwards() {
        let c5 = Graph::cycle(5);
        let images = c5.vertices().map(|v| (v, Point::Vertex((5 - v) % 5))).collect();
        let r = PLMap::linear(c5.clone(), c5, images).unwrap();
        assert_eq!(r.winding_number().unwrap(), -1);
    }

    #[test]
    fn compose_inserts_crossings() {
        // a single edge mapped across a path of three edges, then folded back
        let arc = Graph::path(1);
        let p3 = Graph::path(3);
        let f = PLMap::routed(arc.clone(), p3.clone(), [(0, Point::Vertex(0)), (1, Point::Vertex(3))].into()).unwrap();
        assert_eq!(f.track(Edge::new(0, 1)).unwrap().len(), 4);
        let tent_images = [(0, Point::Vertex(0)), (1, Point::Vertex(1)), (2, Point::Vertex(1)), (3, Point::Vertex(0))];
        let tent = PLMap::linear(p3.clone(), Graph::path(1), tent_images.into()).unwrap();
        let h = PLMap::compose(&tent, &f).unwrap();
        for k in 0..=12 {
            let x = pt(0, 1, q(k, 12));
            assert_eq!(h.evaluate(&x).unwrap(), tent.evaluate(&f.evaluate(&x).unwrap()).unwrap());
        }
        let fib = h.fiber_exact(&Point::Vertex(1)).unwrap();
        assert!(fib.contains_segment);
        assert_eq!(fib.preimage, vec![pt(0, 1, q(1, 3)), pt(0, 1, q(2, 3))]);
        assert_eq!(fib.diameter, q(1, 3));
    }

    #[test]
    fn routed_takes_short_way_round() {
        let c6 = Graph::cycle(6);
        let arc = Graph::path(1);
        let m = PLMap::routed(arc, c6, [(0, pt(0, 1, q(1, 2))), (1, pt(4, 5, q(1, 2)))].into()).unwrap();
        assert_eq!(m.evaluate(&pt(0, 1, q(1, 2))).unwrap(), pt(0, 5, q(1, 2)));
        assert_eq!(m.evaluate(&pt(0, 1, q(1, 4))).unwrap(), Point::Vertex(0));
    }

    #[test]
    fn local_injectivity() {
        let c6 = Graph::cycle(6);
        assert!(PLMap::identity(&c6).is_locally_injective().locally_injective);
        assert!(PLMap::cyclic_cover(6, 2).is_locally_injective().locally_injective);
        let k = PLMap::constant(&Graph::path(1), &c6, Point::Vertex(0)).unwrap();
        assert!(matches!(k.is_locally_injective().witness, Some(InjectivityWitness::FlatSegment { .. })));
        let tent = PLMap::linear(Graph::path(2), Graph::path(1), [(0, Point::Vertex(0)), (1, Point::Vertex(1)), (2, Point::Vertex(0))].into()).unwrap();
        assert_eq!(tent.is_locally_injective().witness, Some(InjectivityWitness::Vertex { vertex: 1 }));
        let folded = PLMap::new(
            Graph::path(1),
            Graph::path(1),
            [(0, Point::Vertex(0)), (1, Point::Vertex(0))].into(),
            [(Edge::new(0, 1), vec![
                Breakpoint::new(qi(0), Point::Vertex(0)),
                Breakpoint::new(q(1, 2), Point::Vertex(1)),
                Breakpoint::new(qi(1), Point::Vertex(0)),
            ])].into(),
        )
        .unwrap();
        assert!(matches!(folded.is_locally_injective().witness, Some(InjectivityWitness::Fold { .. })));
    }

    #[test]
    fn u_map_checks() {
        let c6 = Graph::cycle(6);
        let space = FiniteSpace::sampled(&c6, 2);
        let balls = Cover::from_sets(c6.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), qi(1)))));
        let id = PLMap::identity(&c6);
        assert!(id.is_u_map(&balls, &space).unwrap().is_u_map);
        let k = PLMap::constant(&c6, &c6, Point::Vertex(0)).unwrap();
        let r = k.is_u_map(&balls, &space).unwrap();
        assert!(!r.is_u_map);
        assert_eq!(r.failing_fiber.unwrap().preimage.len(), 12);
        let whole = Cover::new(vec![Member::from_set("X", space.full())]);
        assert!(k.is_u_map(&whole, &space).unwrap().is_u_map);
        // a breakpoint at a quarter cannot be resolved at two samples per edge
        let extra = [(Edge::new(0, 1), BTreeSet::from([q(1, 4)]))].into();
        let refined = id.refine(&extra);
        assert!(matches!(refined.is_u_map(&balls, &space), Err(PlMapError::ResolutionTooCoarse { .. })));
        let finer = FiniteSpace::sampled(&c6, 4);
        let balls4 = Cover::from_sets(c6.vertices().map(|v| finer.ball(&MetricBall::open(Point::Vertex(v), qi(1)))));
        assert!(refined.is_u_map(&balls4, &finer).unwrap().is_u_map);
    }

    #[test]
    fn subdivision_round_trip() {
        let g = Graph::figure_eight(3, 4);
        let (_, down, up) = PLMap::subdivision_maps(&g, 3);
        let both = PLMap::compose(&down, &up).unwrap();
        for e in g.edges() {
            for k in 0..=6 {
                let p = Point::on_edge(e.lo(), e.hi(), q(k, 6)).unwrap();
                assert_eq!(both.evaluate(&p).unwrap(), p);
            }
        }
    }

    #[test]
    fn diagonal_of_identity_and_doubling() {
        let dbl = PLMap::cyclic_cover(6, 2);
        let id = PLMap::identity(dbl.domain());
        let prod = diagonal_product(&dbl, &id).unwrap();
        assert_eq!(prod.first.winding_number().unwrap(), 2);
        assert_eq!(prod.second.winding_number().unwrap(), 1);
        let x = pt(3, 4, q(1, 2));
        assert_eq!(prod.evaluate(&x).unwrap(), (pt(3, 4, q(1, 2)), x.clone()));
        assert!(diagonal_product(&dbl, &PLMap::identity(&Graph::cycle(6))).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = PLMap::compose(&PLMap::cyclic_cover(6, 2), &PLMap::cyclic_cover(12, 2)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: PLMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let broken = s.replacen("\"t\":\"1\"", "\"t\":\"1/2\"", 1);
        assert!(serde_json::from_str::<PLMap>(&broken).is_err());
    }
}
