//! Distance-2 colorings of subcubic graphs.
//!
//! Two distinct vertices at hop distance at most 2 must receive different
//! colors. [`color_distance2`] builds a 4-coloring in two phases: the closed
//! ball around every degree-3 vertex is colored injectively (the hub always
//! gets color 0), then the remaining vertices are colored greedily.

use crate::graph::{Graph, VertexId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub const PALETTE: u8 = 4;
pub const ORACLE_CAP: usize = 15;
/// Below this many assignments the oracle enumerates them all literally.
const LITERAL_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub assignment: BTreeMap<VertexId, u8>,
}

impl Coloring {
    pub fn new(assignment: BTreeMap<VertexId, u8>) -> Self {
        Coloring { assignment }
    }

    pub fn get(&self, v: VertexId) -> Option<u8> {
        self.assignment.get(&v).copied()
    }

    pub fn colors_used(&self) -> BTreeSet<u8> {
        self.assignment.values().copied().collect()
    }

    /// The color class `χ⁻¹(i)`.
    pub fn class(&self, color: u8) -> Vec<VertexId> {
        self.assignment.iter().filter(|(_, &c)| c == color).map(|(&v, _)| v).collect()
    }
}

impl FromIterator<(VertexId, u8)> for Coloring {
    fn from_iter<I: IntoIterator<Item = (VertexId, u8)>>(iter: I) -> Self {
        Coloring { assignment: iter.into_iter().collect() }
    }
}

/// Why a graph was rejected before coloring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Precondition {
    Disconnected { components: usize },
    DegreeTooHigh { vertex: VertexId, degree: usize },
    ShortCycle { cycle: Vec<VertexId> },
    HubsTooClose { u: VertexId, v: VertexId, distance: u32 },
}

impl fmt::Display for Precondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precondition::Disconnected { components } => {
                write!(f, "graph has {components} components, expected one")
            }
            Precondition::DegreeTooHigh { vertex, degree } => {
                write!(f, "vertex {vertex} has degree {degree} > 3")
            }
            Precondition::ShortCycle { cycle } => write!(
                f,
                "cycle {:?} has length {} < 6 (on C5 every pair of vertices is within distance 2, so 4 colors cannot suffice)",
                cycle,
                cycle.len()
            ),
            Precondition::HubsTooClose { u, v, distance } => {
                write!(f, "degree-3 vertices {u} and {v} are at distance {distance} < 6")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ColoringError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(Precondition),
    #[error("no distance-2 coloring with {colors} colors exists")]
    Infeasible { colors: u8 },
    #[error("graph has {vertices} vertices, oracle cap is {cap}")]
    CapExceeded { vertices: usize, cap: usize },
    #[error("number of colors must be positive")]
    NoColors,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Uncolored { vertex: VertexId },
    OutOfRange { vertex: VertexId, color: u8 },
    SameColor { u: VertexId, v: VertexId, distance: u32, color: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColoringCheck {
    pub valid: bool,
    pub violation: Option<Violation>,
}

/// Checks the distance-2 condition. The first violation in ascending
/// `(u, v)` order is reported.
pub fn verify_coloring(g: &Graph, c: &Coloring) -> ColoringCheck {
    verify_with_palette(g, c, PALETTE)
}

pub fn verify_with_palette(g: &Graph, c: &Coloring, palette: u8) -> ColoringCheck {
    let fail = |v| ColoringCheck { valid: false, violation: Some(v) };
    for v in g.vertices() {
        match c.get(v) {
            None => return fail(Violation::Uncolored { vertex: v }),
            Some(col) if col >= palette => return fail(Violation::OutOfRange { vertex: v, color: col }),
            _ => {}
        }
    }
    for u in g.vertices() {
        let near = second_neighbourhood(g, u);
        for (&v, &d) in near.range(u + 1..) {
            if c.get(u) == c.get(v) {
                return fail(Violation::SameColor { u, v, distance: d, color: c.get(u).unwrap() });
            }
        }
    }
    ColoringCheck { valid: true, violation: None }
}

/// Vertices at hop distance 1 or 2 from `v`, with their distance.
fn second_neighbourhood(g: &Graph, v: VertexId) -> BTreeMap<VertexId, u32> {
    let mut out = BTreeMap::new();
    for a in g.neighbors(v) {
        out.insert(a, 1);
    }
    for a in g.neighbors(v) {
        for b in g.neighbors(a) {
            if b != v {
                out.entry(b).or_insert(2);
            }
        }
    }
    out
}

pub fn check_preconditions(g: &Graph) -> Result<(), Precondition> {
    let comps = g.components().len();
    if comps > 1 {
        return Err(Precondition::Disconnected { components: comps });
    }
    if let Some(v) = g.vertices().find(|&v| g.degree(v) > 3) {
        return Err(Precondition::DegreeTooHigh { vertex: v, degree: g.degree(v) });
    }
    if let Some(cycle) = g.shortest_cycle().filter(|c| c.len() < 6) {
        return Err(Precondition::ShortCycle { cycle });
    }
    let hubs: Vec<VertexId> = g.vertices().filter(|&v| g.degree(v) == 3).collect();
    for (i, &u) in hubs.iter().enumerate() {
        let dist = g.bfs(u);
        for &v in &hubs[i + 1..] {
            let d = dist[&v];
            if d < 6 {
                return Err(Precondition::HubsTooClose { u, v, distance: d });
            }
        }
    }
    Ok(())
}

/// Deterministic distance-2 coloring with at most four colors.
pub fn color_distance2(g: &Graph) -> Result<Coloring, ColoringError> {
    check_preconditions(g).map_err(ColoringError::PreconditionViolated)?;
    let hubs: Vec<VertexId> = g.vertices().filter(|&v| g.degree(v) == 3).collect();

    let mut fixed = BTreeMap::new();
    for &h in &hubs {
        assert!(!fixed.contains_key(&h), "closed balls of degree-3 vertices overlap at {h}");
        fixed.insert(h, 0u8);
        for (i, n) in g.neighbors(h).enumerate() {
            assert!(!fixed.contains_key(&n), "closed balls of degree-3 vertices overlap at {n}");
            fixed.insert(n, i as u8 + 1);
        }
    }

    if let Some(c) = greedy(g, &fixed) {
        return Ok(c);
    }
    if let Some(c) = backtrack(g, &fixed, PALETTE) {
        return Ok(c);
    }
    // keep only the shared hub color
    let hubs_only: BTreeMap<VertexId, u8> = hubs.iter().map(|&h| (h, 0)).collect();
    backtrack(g, &hubs_only, PALETTE).ok_or(ColoringError::Infeasible { colors: PALETTE })
}

fn greedy(g: &Graph, fixed: &BTreeMap<VertexId, u8>) -> Option<Coloring> {
    let mut c = Coloring::new(fixed.clone());
    for v in g.vertices() {
        if c.get(v).is_some() {
            continue;
        }
        let taken: BTreeSet<u8> = second_neighbourhood(g, v).keys().filter_map(|&u| c.get(u)).collect();
        let col = (0..PALETTE).find(|x| !taken.contains(x))?;
        c.assignment.insert(v, col);
    }
    Some(c)
}

/// Exact search extending `fixed`; vertices are visited in BFS order from
/// the smallest id and colors tried smallest first.
fn backtrack(g: &Graph, fixed: &BTreeMap<VertexId, u8>, colors: u8) -> Option<Coloring> {
    let mut order = Vec::new();
    let mut seen = BTreeSet::new();
    for comp in g.components() {
        for v in g.ball(comp[0], u32::MAX) {
            if seen.insert(v) && !fixed.contains_key(&v) {
                order.push(v);
            }
        }
    }
    let near: BTreeMap<VertexId, Vec<VertexId>> =
        g.vertices().map(|v| (v, second_neighbourhood(g, v).into_keys().collect())).collect();
    for (&v, &col) in fixed {
        if near[&v].iter().any(|u| fixed.get(u) == Some(&col)) {
            return None;
        }
    }
    let mut c = Coloring::new(fixed.clone());
    fn go(i: usize, order: &[VertexId], near: &BTreeMap<VertexId, Vec<VertexId>>, colors: u8, c: &mut Coloring) -> bool {
        let Some(&v) = order.get(i) else { return true };
        for col in 0..colors {
            if near[&v].iter().all(|&u| c.get(u) != Some(col)) {
                c.assignment.insert(v, col);
                if go(i + 1, order, near, colors, c) {
                    return true;
                }
                c.assignment.remove(&v);
            }
        }
        false
    }
    go(0, &order, &near, colors, &mut c).then_some(c)
}

/// Exact feasibility of a distance-2 coloring with `colors` colors.
pub fn coloring_feasible_oracle(g: &Graph, colors: u8) -> Result<bool, ColoringError> {
    coloring_feasible_oracle_with_cap(g, colors, ORACLE_CAP)
}

pub fn coloring_feasible_oracle_with_cap(g: &Graph, colors: u8, cap: usize) -> Result<bool, ColoringError> {
    if colors == 0 {
        return Err(ColoringError::NoColors);
    }
    let n = g.vertex_count();
    if n > cap {
        return Err(ColoringError::CapExceeded { vertices: n, cap });
    }
    let literal = (colors as u64).checked_pow(n as u32).is_some_and(|t| t <= LITERAL_LIMIT);
    if !literal {
        return Ok(backtrack(g, &BTreeMap::new(), colors).is_some());
    }
    // plain enumeration of every assignment, as an independent check
    let vs: Vec<VertexId> = g.vertices().collect();
    let idx: BTreeMap<VertexId, usize> = vs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let pairs: Vec<(usize, usize)> = vs
        .iter()
        .flat_map(|&u| {
            let idx = &idx;
            second_neighbourhood(g, u)
                .into_keys()
                .filter(move |&v| v > u)
                .map(move |v| (idx[&u], idx[&v]))
        })
        .collect();
    let mut digits = vec![0u8; n];
    loop {
        if pairs.iter().all(|&(a, b)| digits[a] != digits[b]) {
            return Ok(true);
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(false);
            }
            digits[i] += 1;
            if digits[i] < colors {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}
