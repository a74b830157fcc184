//! Degree reduction by splitting vertices into short paths.
//!
//! A vertex `v` of degree `d ≥ 4` with neighbours `n1 < .. < nd` becomes the
//! path `r1 - r2 - .. - r(d-2)` where `r1 = v` keeps its id. `r1` takes `n1,n2`,
//! each middle vertex one neighbour, and the last one `n(d-1), nd`.

use crate::cover::{Cover, CoverError, FiniteSpace};
use crate::graph::{Graph, GraphError, MetricBall, Point, VertexId};
use crate::plmap::PLMap;
use crate::rational::{serde_q, Q};
use num_traits::One;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SurgeryError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    InvalidCover(#[from] CoverError),
    #[error("link length must be positive")]
    BadLinkLength,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitRecord {
    pub original: VertexId,
    pub degree: usize,
    /// Replacement path, starting with the original id.
    pub path: Vec<VertexId>,
    /// Which neighbours each replacement vertex received.
    pub attached: Vec<(VertexId, Vec<VertexId>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurgeryResult {
    pub graph: Graph,
    /// Maps the reduced graph onto the input, flattening each replacement
    /// path to its original vertex.
    pub collapse: PLMap,
    pub split_log: Vec<SplitRecord>,
    /// Length given to each edge of a replacement path when the result is
    /// compared with the input metrically.
    #[serde(with = "serde_q")]
    pub link_length: Q,
}

pub fn reduce_degree(g: &Graph) -> Result<SurgeryResult, SurgeryError> {
    let comps = g.components();
    if comps.len() > 1 {
        return Err(GraphError::DisconnectedInput(comps[0][0].to_string(), comps[1][0].to_string()).into());
    }
    let mut out = g.clone();
    let mut origin: BTreeMap<VertexId, VertexId> = g.vertices().map(|v| (v, v)).collect();
    let mut next = g.max_vertex_id().map_or(0, |m| m + 1);
    let mut log = Vec::new();
    let heavy: Vec<VertexId> = g.vertices().filter(|&v| g.degree(v) >= 4).collect();
    for v in heavy {
        let nbrs: Vec<VertexId> = out.neighbors(v).collect();
        let d = nbrs.len();
        let mut path = vec![v];
        for _ in 0..d - 3 {
            path.push(next);
            origin.insert(next, v);
            next += 1;
        }
        let mut attached: Vec<(VertexId, Vec<VertexId>)> = path.iter().map(|&r| (r, Vec::new())).collect();
        attached[0].1.extend(&nbrs[..2]);
        for i in 1..d - 3 {
            attached[i].1.push(nbrs[i + 1]);
        }
        attached[d - 3].1.extend(&nbrs[d - 2..]);
        for &n in &nbrs[2..] {
            out.remove_edge(v, n);
        }
        for w in path.windows(2) {
            out.add_edge(w[0], w[1])?;
        }
        for (r, ns) in &attached {
            for &n in ns {
                out.add_edge(*r, n)?;
            }
        }
        log.push(SplitRecord { original: v, degree: d, path, attached });
    }
    let images = out.vertices().map(|w| (w, Point::Vertex(origin[&w]))).collect();
    let collapse = PLMap::linear(out.clone(), g.clone(), images).expect("moved edges keep their ends");
    Ok(SurgeryResult { graph: out, collapse, split_log: log, link_length: Q::one() })
}

impl SurgeryResult {
    pub fn with_link_length(mut self, link_length: Q) -> Result<Self, SurgeryError> {
        if link_length <= Q::from_integer(0) {
            return Err(SurgeryError::BadLinkLength);
        }
        self.link_length = link_length;
        Ok(self)
    }

    /// Metric diameter of the replacement path of `rec`.
    pub fn path_diameter(&self, rec: &SplitRecord) -> Q {
        self.link_length * Q::from_integer(rec.path.len() as i64 - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollapseCheck {
    pub is_u_map: bool,
    /// First split vertex whose fiber fits in no member.
    pub failing_vertex: Option<VertexId>,
    pub fibers: Vec<CollapseFiber>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollapseFiber {
    pub original: VertexId,
    #[serde(with = "serde_q")]
    pub radius: Q,
    pub samples: usize,
    pub inside: Option<usize>,
}

/// Checks the collapse against a cover of the input graph.
///
/// With replacement edges of length `ℓ` the blown-up neighbourhood of a
/// split vertex `v` sits inside the closed ball of radius `(d-3)·ℓ` around
/// `v`, so that ball's samples stand for the nontrivial fiber over `v`. Every
/// other fiber is a single point and always fits.
pub fn collapse_is_u_map(
    result: &SurgeryResult,
    cover: &Cover,
    space: &FiniteSpace,
) -> Result<CollapseCheck, SurgeryError> {
    cover.validate(space)?;
    if space.graph() != Some(result.collapse.codomain()) {
        return Err(CoverError::InvalidCover("samples are not taken on the original graph".into()).into());
    }
    let mut fibers = Vec::new();
    let mut failing = None;
    for rec in &result.split_log {
        let radius = result.path_diameter(rec);
        let pts = space.ball(&MetricBall::closed(Point::Vertex(rec.original), radius));
        let inside = cover.members.iter().position(|m| pts.is_subset(&m.points));
        if inside.is_none() && failing.is_none() {
            failing = Some(rec.original);
        }
        fibers.push(CollapseFiber { original: rec.original, radius, samples: pts.count_ones(..), inside });
    }
    Ok(CollapseCheck { is_u_map: failing.is_none(), failing_vertex: failing, fibers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::Member;
    use crate::rational::{q, qi};

    #[test]
    fn degree_five_star() {
        let r = reduce_degree(&Graph::star(5)).unwrap();
        assert_eq!(r.split_log.len(), 1);
        let rec = &r.split_log[0];
        assert_eq!(rec.path, vec![0, 6, 7]);
        assert_eq!(rec.attached, vec![(0, vec![1, 2]), (6, vec![3]), (7, vec![4, 5])]);
        assert!(r.graph.max_degree() <= 3);
        assert_eq!(r.graph.vertex_count(), 8);
        assert_eq!(r.collapse.evaluate(&Point::Vertex(7)).unwrap(), Point::Vertex(0));
        let mid = Point::on_edge(6, 7, q(1, 2)).unwrap();
        assert_eq!(r.collapse.evaluate(&mid).unwrap(), Point::Vertex(0));
    }

    #[test]
    fn subcubic_is_untouched() {
        let g = Graph::spider(3, 2);
        let r = reduce_degree(&g).unwrap();
        assert!(r.split_log.is_empty());
        assert_eq!(r.graph, g);
    }

    #[test]
    fn k5_keeps_betti() {
        let g = Graph::complete(5);
        let r = reduce_degree(&g).unwrap();
        assert_eq!(r.split_log.len(), 5);
        assert_eq!(g.betti1(), 6);
        assert_eq!(r.graph.betti1(), 6);
        assert!(r.graph.max_degree() <= 3);
        assert_eq!(r.graph.vertex_count(), 10);
        assert_eq!(r.graph.edge_count(), 15);
    }

    #[test]
    fn collapse_against_covers() {
        let g = Graph::star(6);
        let space = FiniteSpace::sampled(&g, 4);
        let r = reduce_degree(&g).unwrap();
        let whole = Cover::new(vec![Member::from_set("all", space.full())]);
        assert!(collapse_is_u_map(&r, &whole, &space).unwrap().is_u_map);
        let unit = Cover::from_sets(g.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), qi(1)))));
        assert!(!collapse_is_u_map(&r, &unit, &space).unwrap().is_u_map);
        let small = r.clone().with_link_length(q(1, 4)).unwrap();
        assert!(collapse_is_u_map(&small, &unit, &space).unwrap().is_u_map);
        let tiny = Cover::from_sets(g.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), q(1, 4)))).chain(
            g.edges().map(|e| space.ball(&MetricBall::open(Point::on_edge(e.lo(), e.hi(), q(1, 2)).unwrap(), q(1, 2)))),
        ));
        let check = collapse_is_u_map(&r, &tiny, &space).unwrap();
        assert_eq!(check.failing_vertex, Some(0));
    }

    #[test]
    fn disconnected_input_is_rejected() {
        assert!(reduce_degree(&Graph::from_edges([(0, 1), (2, 3)])).is_err());
    }
}
