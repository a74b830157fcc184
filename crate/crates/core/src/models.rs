//! Finite stages of classical continua and an empirical sweep over covers.
//!
//! A continuum is only ever represented by a finite prefix of an inverse
//! sequence of graphs; every verdict here is relative to the stages, sample
//! resolution and candidate pool used.

use crate::cover::{
    classify_cover, connected_pool, Cover, CoverClass, CoverError, CoverKind, FiniteSpace, Member,
};
use crate::graph::{Graph, GraphError, GraphMetric, MetricBall, Point, VertexId};
use crate::plmap::{PLMap, PlMapError};
use crate::rational::{q, Q};
use crate::search::{find_refinement, SearchLimits, SearchOutcome};
use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use thiserror::Error;

pub const KNASTER_MAX_STAGE: u32 = 8;
pub const SOLENOID_MAX_FOLD: u64 = 512;
pub const BASE_VERTEX_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{what} exceeds the cap {cap}")]
    CapExceeded { what: String, cap: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("radius {0} does not let the balls cover every edge")]
    RadiusTooSmall(String),
    #[error("bonds do not chain: {0}")]
    BrokenSystem(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Map(#[from] PlMapError),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

/// `stages[0] ← stages[1] ← ...`, with `bonds[i]: stages[i+1] → stages[i]`.
#[derive(Debug, Clone, Serialize)]
pub struct InverseSystem {
    pub name: String,
    pub stages: Vec<Graph>,
    pub bonds: Vec<PLMap>,
    /// Class every canonical cover of every stage is expected to have.
    pub expected: CoverKind,
}

impl InverseSystem {
    pub fn new(
        name: impl Into<String>,
        stages: Vec<Graph>,
        bonds: Vec<PLMap>,
        expected: CoverKind,
    ) -> Result<Self, ModelError> {
        if stages.is_empty() || bonds.len() + 1 != stages.len() {
            return Err(ModelError::BrokenSystem(format!(
                "{} stages need {} bonds, got {}",
                stages.len(),
                stages.len().saturating_sub(1),
                bonds.len()
            )));
        }
        for (i, b) in bonds.iter().enumerate() {
            if b.domain() != &stages[i + 1] || b.codomain() != &stages[i] {
                return Err(ModelError::BrokenSystem(format!("bond {i} is not a map stage {} → stage {i}", i + 1)));
            }
            if let Some(e) = stages[i].edges().find(|e| {
                let mid = Point::on_edge(e.lo(), e.hi(), q(1, 2)).unwrap();
                b.fiber_exact(&mid).map_or(true, |f| f.preimage.is_empty())
            }) {
                return Err(ModelError::BrokenSystem(format!("bond {i} misses the edge {e}")));
            }
            if let Some(v) = stages[i].vertices().find(|&v| {
                b.fiber_exact(&Point::Vertex(v)).map_or(true, |f| f.preimage.is_empty())
            }) {
                return Err(ModelError::BrokenSystem(format!("bond {i} misses the vertex {v}")));
            }
        }
        Ok(InverseSystem { name: name.into(), stages, bonds, expected })
    }

    /// A system with a single stage.
    pub fn single(name: impl Into<String>, g: Graph, expected: CoverKind) -> Self {
        InverseSystem { name: name.into(), stages: vec![g], bonds: Vec::new(), expected }
    }

    pub fn top(&self) -> usize {
        self.stages.len() - 1
    }

    /// The composed bond `stages[to] → stages[from]`; the identity when equal.
    pub fn projection(&self, to: usize, from: usize) -> Result<PLMap, ModelError> {
        if from > to || to >= self.stages.len() {
            return Err(ModelError::InvalidParameter(format!("no projection from stage {to} to stage {from}")));
        }
        let mut map = PLMap::identity(&self.stages[to]);
        for i in (from..to).rev() {
            map = PLMap::compose(&self.bonds[i], &map)?;
        }
        Ok(map)
    }
}

/// Tent-map stages of the Knaster continuum: paths with `1, 2, 4, ..` edges,
/// each folded onto the previous one.
pub fn knaster_stage(n: u32) -> Result<InverseSystem, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidParameter("stage count must be at least 1".into()));
    }
    if n > KNASTER_MAX_STAGE {
        return Err(ModelError::CapExceeded { what: format!("knaster stage {n}"), cap: KNASTER_MAX_STAGE as u64 });
    }
    let stages: Vec<Graph> = (0..n).map(|i| Graph::path(1 << i)).collect();
    let bonds = (1..n as usize).map(|i| tent(1 << (i - 1))).collect::<Result<_, _>>()?;
    InverseSystem::new(format!("knaster-{n}"), stages, bonds, CoverKind::ChainLike)
}

/// Folds the path with `2m` edges onto the path with `m` edges.
pub fn tent(m: u32) -> Result<PLMap, PlMapError> {
    let images = (0..=2 * m).map(|j| (j, Point::Vertex(if j <= m { j } else { 2 * m - j }))).collect();
    PLMap::linear(Graph::path(2 * m), Graph::path(m), images)
}

/// Stages `C6 ← C6p ← .. ← C6pⁿ` of the `p`-adic solenoid, bonded by
/// `p`-fold coverings.
pub fn solenoid_stage(n: u32, p: u32) -> Result<InverseSystem, ModelError> {
    if n == 0 || p < 2 {
        return Err(ModelError::InvalidParameter(format!("need n ≥ 1 and p ≥ 2, got n = {n}, p = {p}")));
    }
    let fold = (p as u64).checked_pow(n).filter(|&f| f <= SOLENOID_MAX_FOLD);
    if fold.is_none() {
        return Err(ModelError::CapExceeded { what: format!("{p}^{n}"), cap: SOLENOID_MAX_FOLD });
    }
    let sizes: Vec<u32> = (0..=n).map(|k| 6 * p.pow(k)).collect();
    let stages = sizes.iter().map(|&s| Graph::cycle(s)).collect();
    let bonds = sizes[..n as usize].iter().map(|&s| PLMap::cyclic_cover(s, p)).collect();
    InverseSystem::new(format!("solenoid-{p}-{n}"), stages, bonds, CoverKind::CircleLike)
}

/// Open balls of `radius` around every vertex, on samples of `space`.
pub fn canonical_cover(space: &FiniteSpace, radius: Q) -> Result<Cover, ModelError> {
    let g = space
        .graph()
        .ok_or_else(|| ModelError::InvalidParameter("canonical covers need a sampled graph".into()))?;
    if radius <= q(1, 2) {
        return Err(ModelError::RadiusTooSmall(crate::rational::format_q(&radius)));
    }
    Ok(Cover::new(
        g.vertices()
            .map(|v| Member::from_set(format!("B{v}"), space.ball(&MetricBall::open(Point::Vertex(v), radius))))
            .collect(),
    ))
}

/// Named parameterized models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Model {
    Knaster { stage: u32 },
    Solenoid { stage: u32, p: u32 },
    Arc { edges: u32 },
    Circle { edges: u32 },
    FigureEight { a: u32, b: u32 },
    Spider { legs: u32, len: u32 },
}

impl Model {
    pub fn build(&self) -> Result<InverseSystem, ModelError> {
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(ModelError::InvalidParameter(msg.into())) };
        Ok(match *self {
            Model::Knaster { stage } => knaster_stage(stage)?,
            Model::Solenoid { stage, p } => solenoid_stage(stage, p)?,
            Model::Arc { edges } => {
                need(edges >= 1, "an arc needs an edge")?;
                InverseSystem::single(format!("arc-{edges}"), Graph::path(edges), CoverKind::ChainLike)
            }
            Model::Circle { edges } => {
                need(edges >= 3, "a circle needs 3 edges")?;
                InverseSystem::single(format!("circle-{edges}"), Graph::cycle(edges), CoverKind::CircleLike)
            }
            Model::FigureEight { a, b } => {
                need(a >= 3 && b >= 3, "each loop needs 3 edges")?;
                InverseSystem::single(format!("figure-eight-{a}-{b}"), Graph::figure_eight(a, b), CoverKind::Unstructured)
            }
            Model::Spider { legs, len } => {
                need(legs >= 1 && len >= 1, "a spider needs a leg")?;
                let expected = if legs <= 2 { CoverKind::ChainLike } else { CoverKind::TreeLike };
                InverseSystem::single(format!("spider-{legs}-{len}"), Graph::spider(legs, len), expected)
            }
        })
    }
}

/// Three arcs of `arc_len` samples starting at `0`, `samples/3`, `2·samples/3`
/// on a circle sampled at `samples` points.
pub fn three_arc_cover(samples: u32, arc_len: u32) -> Result<(FiniteSpace, Cover), ModelError> {
    if samples < 6 || !samples.is_multiple_of(3) {
        return Err(ModelError::InvalidParameter("sample count must be a multiple of 3, at least 6".into()));
    }
    if arc_len <= samples / 3 || arc_len > samples {
        return Err(ModelError::InvalidParameter(format!("arcs of {arc_len} samples do not overlap")));
    }
    let space = FiniteSpace::sampled(&Graph::cycle(samples), 1);
    let step = samples / 3;
    let cover = Cover::new(
        (0..3)
            .map(|i| Member::new(format!("A{i}"), (0..arc_len).map(|j| ((i * step + j) % samples) as usize)))
            .collect(),
    );
    Ok((space, cover))
}

// ---- the sweep -------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub n_members: usize,
    pub target: CoverKind,
    /// Stage the covers are generated on; defaults to the deepest stage with
    /// at most [`BASE_VERTEX_CAP`] vertices.
    pub base_stage: Option<usize>,
    pub base_per_edge: u32,
    /// Sample resolution of the top stage. By default equal to
    /// `base_per_edge`, doubled when the top stage branches so that a
    /// refinement can fit a whole star around a branch point inside a member.
    pub top_per_edge: Option<u32>,
    #[serde(serialize_with = "crate::rational::serialize_q_vec")]
    pub radii: Vec<Q>,
    /// Balls per member.
    pub max_balls: usize,
    /// Stop generating after this many covers.
    pub max_covers: usize,
    /// Largest admissible pool of connected candidate sets.
    pub pool_cap: usize,
    pub limits: SearchLimits,
}

impl SweepConfig {
    pub fn new(n_members: usize, target: CoverKind) -> Self {
        SweepConfig {
            n_members,
            target,
            base_stage: None,
            base_per_edge: 2,
            top_per_edge: None,
            radii: vec![q(1, 1), q(3, 2), q(2, 1)],
            max_balls: 2,
            max_covers: 20_000,
            pool_cap: 100_000,
            limits: SearchLimits { max_nodes: 200_000 },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BallUnion {
    pub balls: Vec<MetricBall>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailedCover {
    pub index: usize,
    pub members: Vec<BallUnion>,
    pub outcome: SearchOutcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub system: String,
    pub base_stage: usize,
    pub top_stage: usize,
    pub top_per_edge: u32,
    pub pool_size: usize,
    pub n_members: usize,
    pub target: CoverKind,
    pub generated: usize,
    /// The generator stopped at `max_covers`.
    pub truncated: bool,
    /// Pulled-back covers that do not swallow every link at the top resolution.
    pub skipped_not_open: usize,
    pub passed: usize,
    pub not_found: usize,
    pub budget_exceeded: usize,
    pub failures: Vec<FailedCover>,
    pub all_pass: bool,
}

/// Generates every minimal cover of the base stage by at most `n_members`
/// unions of at most `max_balls` open vertex balls, pulls each back to the
/// top stage and searches for a refinement of class `target` among the
/// connected pieces of the top stage.
pub fn empirical_k_likeness(system: &InverseSystem, cfg: &SweepConfig) -> Result<SweepReport, ModelError> {
    if !(1..=4).contains(&cfg.n_members) {
        return Err(ModelError::InvalidParameter(format!("{} members; at most 4 are supported", cfg.n_members)));
    }
    if cfg.target == CoverKind::Unstructured {
        return Err(ModelError::InvalidParameter("target must be chain, circle or tree".into()));
    }
    if cfg.radii.iter().any(|r| *r <= Q::from_integer(0)) || cfg.radii.is_empty() || cfg.max_balls == 0 {
        return Err(ModelError::InvalidParameter("need positive radii and at least one ball per member".into()));
    }
    let top = system.top();
    let base = cfg.base_stage.unwrap_or_else(|| {
        (0..=top).rev().find(|&i| system.stages[i].vertex_count() <= BASE_VERTEX_CAP).unwrap_or(0)
    });
    let proj = system.projection(top, base)?;
    let base_graph = &system.stages[base];
    let base_space = FiniteSpace::sampled(base_graph, cfg.base_per_edge);
    let top_graph = &system.stages[top];
    let top_per_edge = cfg
        .top_per_edge
        .unwrap_or(if top_graph.max_degree() > 2 { 2 * cfg.base_per_edge } else { cfg.base_per_edge });
    let top_space = FiniteSpace::sampled(top_graph, top_per_edge);

    let (unions, covers, truncated) = generate_covers(&base_space, base_graph, cfg);
    let base_metric = GraphMetric::new(base_graph);
    let top_images: Vec<Point> = top_space
        .realization()
        .unwrap()
        .points()
        .iter()
        .map(|p| proj.evaluate(p))
        .collect::<Result<_, _>>()?;
    let pulled: Vec<FixedBitSet> = unions
        .iter()
        .map(|u| {
            let mut s = FixedBitSet::with_capacity(top_space.len());
            for (i, y) in top_images.iter().enumerate() {
                if u.balls.iter().any(|b| b.contains(&base_metric, y)) {
                    s.insert(i);
                }
            }
            s
        })
        .collect();
    let pool = connected_pool(&top_space, cfg.pool_cap)
        .ok_or_else(|| ModelError::CapExceeded { what: "connected candidate pool".into(), cap: cfg.pool_cap as u64 })?;

    let verdicts: Vec<Option<SearchOutcome>> = covers
        .par_iter()
        .map(|c| {
            let cover = Cover::new(c.iter().map(|&m| Member::from_set(format!("M{m}"), pulled[m].clone())).collect());
            if !cover.is_open_in(&top_space) {
                return Ok(None);
            }
            find_refinement(&top_space, &cover, cfg.target, &pool, cfg.limits).map(Some)
        })
        .collect::<Result<_, CoverError>>()?;

    let mut report = SweepReport {
        system: system.name.clone(),
        base_stage: base,
        top_stage: top,
        top_per_edge,
        pool_size: pool.len(),
        n_members: cfg.n_members,
        target: cfg.target,
        generated: covers.len(),
        truncated,
        skipped_not_open: 0,
        passed: 0,
        not_found: 0,
        budget_exceeded: 0,
        failures: Vec::new(),
        all_pass: false,
    };
    for (i, v) in verdicts.into_iter().enumerate() {
        match v {
            None => report.skipped_not_open += 1,
            Some(o) if o.is_found() => report.passed += 1,
            Some(o) => {
                if matches!(o, SearchOutcome::BudgetExceeded { .. }) {
                    report.budget_exceeded += 1;
                } else {
                    report.not_found += 1;
                }
                report.failures.push(FailedCover {
                    index: i,
                    members: covers[i].iter().map(|&m| unions[m].clone()).collect(),
                    outcome: o,
                });
            }
        }
    }
    report.all_pass = report.failures.is_empty() && report.passed > 0;
    Ok(report)
}

/// Candidate members and the minimal covers built from them, in a
/// deterministic order.
fn generate_covers(space: &FiniteSpace, g: &Graph, cfg: &SweepConfig) -> (Vec<BallUnion>, Vec<Vec<usize>>, bool) {
    let mut balls: Vec<(MetricBall, FixedBitSet)> = Vec::new();
    for r in &cfg.radii {
        for v in g.vertices() {
            let b = MetricBall::open(Point::Vertex(v), *r);
            let s = space.ball(&b);
            balls.push((b, s));
        }
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut unions = Vec::new();
    let mut sets = Vec::new();
    let mut push = |bs: Vec<MetricBall>, s: FixedBitSet| {
        if seen.insert(s.ones().collect()) {
            unions.push(BallUnion { balls: bs });
            sets.push(s);
        }
    };
    for (b, s) in &balls {
        push(vec![b.clone()], s.clone());
    }
    if cfg.max_balls >= 2 {
        for i in 0..balls.len() {
            for j in i + 1..balls.len() {
                let mut s = balls[i].1.clone();
                s.union_with(&balls[j].1);
                push(vec![balls[i].0.clone(), balls[j].0.clone()], s);
            }
        }
    }

    // units to swallow: links, plus isolated samples
    let mut units: Vec<(usize, usize)> = space.links().to_vec();
    let mut touched = vec![false; space.len()];
    for &(a, b) in &units {
        touched[a] = true;
        touched[b] = true;
    }
    units.extend((0..space.len()).filter(|&p| !touched[p]).map(|p| (p, p)));
    let holds: Vec<FixedBitSet> = sets
        .iter()
        .map(|s| {
            let mut h = FixedBitSet::with_capacity(units.len());
            h.extend(units.iter().enumerate().filter(|(_, &(a, b))| s.contains(a) && s.contains(b)).map(|(i, _)| i));
            h
        })
        .collect();
    let by_unit: Vec<Vec<usize>> = (0..units.len())
        .map(|u| (0..sets.len()).filter(|&m| holds[m].contains(u)).collect())
        .collect();

    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut chosen = Vec::new();
    let mut truncated = false;
    expand(&holds, &by_unit, units.len(), cfg.n_members, cfg.max_covers, &mut chosen, &mut found, &mut truncated);
    (unions, found.into_iter().collect(), truncated)
}

#[allow(clippy::too_many_arguments)]
fn expand(
    holds: &[FixedBitSet],
    by_unit: &[Vec<usize>],
    n_units: usize,
    max_members: usize,
    max_covers: usize,
    chosen: &mut Vec<usize>,
    found: &mut BTreeSet<Vec<usize>>,
    truncated: &mut bool,
) {
    if *truncated {
        return;
    }
    let mut covered = FixedBitSet::with_capacity(n_units);
    for &m in chosen.iter() {
        covered.union_with(&holds[m]);
    }
    let Some(u) = (0..n_units).find(|&u| !covered.contains(u)) else {
        let minimal = chosen.iter().all(|&m| {
            let mut rest = FixedBitSet::with_capacity(n_units);
            for &o in chosen.iter().filter(|&&o| o != m) {
                rest.union_with(&holds[o]);
            }
            rest.count_ones(..) < n_units
        });
        if minimal {
            let mut key = chosen.clone();
            key.sort_unstable();
            if found.len() >= max_covers && !found.contains(&key) {
                *truncated = true;
                return;
            }
            found.insert(key);
        }
        return;
    };
    if chosen.len() == max_members {
        return;
    }
    for &m in &by_unit[u] {
        chosen.push(m);
        expand(holds, by_unit, n_units, max_members, max_covers, chosen, found, truncated);
        chosen.pop();
    }
}

/// Class of the canonical radius-1 cover of every stage.
pub fn stage_classes(system: &InverseSystem, per_edge: u32) -> Result<Vec<CoverClass>, ModelError> {
    system
        .stages
        .iter()
        .map(|g| {
            let space = FiniteSpace::sampled(g, per_edge);
            Ok(classify_cover(&space, &canonical_cover(&space, q(1, 1))?)?)
        })
        .collect()
}

/// Vertex images of the composed projection, for inspection.
pub fn projection_table(system: &InverseSystem, to: usize, from: usize) -> Result<BTreeMap<VertexId, Point>, ModelError> {
    Ok(system.projection(to, from)?.vertex_images().clone())
}
