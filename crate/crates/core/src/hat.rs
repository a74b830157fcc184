//! The hat construction.
//!
//! Given a cover `𝒰` of `X`, a map `f: X → Γ` onto a graph of degree ≤ 3 and
//! a map `g: X → Y`, this builds the rectangle family over `Y × Γ'` (with `Γ'`
//! a fine subdivision of `Γ`), the retraction `π` onto the graphs of the
//! functions `λ_R`, and samples `h = π ∘ (g △ f)`. Every step that the
//! construction relies on is audited on finite grids and reported.

use crate::coloring::{color_distance2, verify_coloring, Coloring, ColoringError};
use crate::cover::{classify_cover, Cover, CoverClass, CoverError, FiniteSpace, Member};
use crate::graph::{Graph, GraphError, GraphMetric, MetricBall, Point, VertexId};
use crate::plmap::{InjectivityWitness, PLMap, PlMapError, UMapReport};
use crate::rational::Q;
use fixedbitset::FixedBitSet;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

pub const FINENESS_CAP: u32 = 1024;
pub const W_CAP: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HatError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Map(#[from] PlMapError),
    #[error(transparent)]
    Coloring(#[from] ColoringError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("graph has a vertex of degree {0} > 3; reduce degrees first")]
    DegreeTooHigh(usize),
    #[error("no subdivision with at most {cap} parts per edge satisfies the fineness conditions")]
    NoFinenessAtCap { cap: u32 },
    #[error("invalid coloring: {0}")]
    InvalidColoring(String),
    #[error("no ball cover of Y with density up to {cap} admits colors for every member")]
    NoCoarseCoverAtCap { cap: u32 },
    #[error("member {w} of the cover of Y has no color i with g⁻¹(W) ⊆ f⁻¹(U_i)")]
    NoXi { w: usize },
    #[error("cover of Y has order {order} > 2 at {at}")]
    OrderViolation { order: usize, at: Point },
    #[error("cover of Y misses {0}")]
    YNotCovered(Point),
    #[error("rectangle {rect} meets {count} rectangles over {y}")]
    Claim1Violation { rect: usize, y: Point, count: usize },
    #[error("{y} is not in the base of rectangle {rect}")]
    NotInW { rect: usize, y: Point },
    #[error("({y}, {t}) lies in no rectangle")]
    OutsideRectangles { y: Point, t: Point },
    #[error("weights at {y} sum to {sum}")]
    WeightDefect { y: Point, sum: String },
    #[error("rectangles {a} and {b} project ({y}, {t}) differently")]
    PiDisagreement { a: usize, b: usize, y: Point, t: Point },
}

// ---- fine triangulation -------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FineTriangulation {
    pub parts: u32,
    pub graph: Graph,
    /// `f` followed by the identification `|Γ| = |Γ'|`.
    pub f: PLMap,
}

/// Smallest `k ≥ 1` such that the `k`-fold subdivision `Γ'` has degree-3
/// vertices pairwise at distance ≥ 6, girth ≥ 6, and for every vertex `v` the
/// samples `x` with `d(f(x), v) < 2` fit in one member of `u_cover`.
pub fn fine_triangulation(
    f: &PLMap,
    u_cover: &Cover,
    x_space: &FiniteSpace,
    cap: u32,
) -> Result<FineTriangulation, HatError> {
    let gamma = f.codomain();
    if gamma.max_degree() > 3 {
        return Err(HatError::DegreeTooHigh(gamma.max_degree()));
    }
    if x_space.graph() != Some(f.domain()) {
        return Err(HatError::InvalidInput("cover samples are not taken on the domain of f".into()));
    }
    u_cover.validate(x_space)?;

    let mut k_min = 1u32;
    let hubs: Vec<VertexId> = gamma.vertices().filter(|&v| gamma.degree(v) == 3).collect();
    for (i, &u) in hubs.iter().enumerate() {
        let d = gamma.bfs(u);
        for v in &hubs[i + 1..] {
            if let Some(&duv) = d.get(v) {
                k_min = k_min.max(6u32.div_ceil(duv));
            }
        }
    }
    if let Some(girth) = gamma.girth() {
        k_min = k_min.max(6u32.div_ceil(girth as u32));
    }

    let images: Vec<Point> = (0..x_space.len())
        .map(|i| f.evaluate(x_space.point(i).unwrap()))
        .collect::<Result<_, _>>()?;
    for k in k_min..=cap {
        let (fine, sub) = crate::graph::subdivide(gamma, k);
        let mut near: HashMap<VertexId, FixedBitSet> = HashMap::new();
        for (i, p) in images.iter().enumerate() {
            let p = sub.to_fine(p);
            let mut best: BTreeMap<VertexId, Q> = BTreeMap::new();
            for (u, du) in p.anchors() {
                for (w, hops) in fine.bfs_within(u, 2) {
                    let d = du + Q::from_integer(hops as i64);
                    let e = best.entry(w).or_insert(d);
                    if d < *e {
                        *e = d;
                    }
                }
            }
            for (w, d) in best {
                if d < Q::from_integer(2) {
                    near.entry(w).or_insert_with(|| FixedBitSet::with_capacity(x_space.len())).insert(i);
                }
            }
        }
        let fits = near
            .values()
            .all(|s| u_cover.members.iter().any(|m| s.is_subset(&m.points)));
        if fits {
            let (_, _, up) = PLMap::subdivision_maps(gamma, k);
            let f_fine = PLMap::compose(&up, f)?;
            return Ok(FineTriangulation { parts: k, graph: fine, f: f_fine });
        }
    }
    Err(HatError::NoFinenessAtCap { cap })
}

// ---- monochrome cover ---------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MonochromeMember {
    pub color: u8,
    pub centers: Vec<VertexId>,
}

/// Colors `i` with `p ∈ U_i`, the open unit star around the color class.
pub fn colors_at(chi: &Coloring, p: &Point) -> BTreeSet<u8> {
    p.anchors()
        .into_iter()
        .filter(|(_, d)| *d < Q::one())
        .filter_map(|(v, _)| chi.get(v))
        .collect()
}

/// The nonempty members `U_i`, tagged by color.
pub fn monochrome_cover(gamma: &Graph, chi: &Coloring) -> Result<Vec<MonochromeMember>, HatError> {
    let check = verify_coloring(gamma, chi);
    if let Some(v) = check.violation {
        return Err(HatError::InvalidColoring(format!("{v:?}")));
    }
    let mut out = Vec::new();
    for color in 0..crate::coloring::PALETTE {
        let centers = chi.class(color);
        if !centers.is_empty() {
            out.push(MonochromeMember { color, centers });
        }
    }
    Ok(out)
}

/// Samples of `space` lying in each `U_i`, as a cover.
pub fn monochrome_cover_on(space: &FiniteSpace, chi: &Coloring) -> Cover {
    let mut sets: BTreeMap<u8, FixedBitSet> = BTreeMap::new();
    for i in 0..space.len() {
        for c in colors_at(chi, space.point(i).unwrap()) {
            sets.entry(c).or_insert_with(|| FixedBitSet::with_capacity(space.len())).insert(i);
        }
    }
    Cover::new(sets.into_iter().map(|(c, s)| Member::from_set(format!("U{c}"), s)).collect())
}

// ---- rectangles ---------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Rectangle {
    pub w_index: usize,
    pub vertex: VertexId,
}

/// All `W × B(v)` with `χ(v) = ξ(W)`, grouped by `W` in index order.
pub fn build_rectangles(xi: &[u8], chi: &Coloring) -> Vec<Rectangle> {
    xi.iter()
        .enumerate()
        .flat_map(|(w, &c)| chi.class(c).into_iter().map(move |v| Rectangle { w_index: w, vertex: v }))
        .collect()
}

/// Balls `B(j/m, 3/(4m))` around the points `j/m` of every edge of `y`.
pub fn synthesize_w(y: &Graph, m: u32) -> Vec<MetricBall> {
    let r = Q::new(3, 4 * m as i64);
    let mut out: Vec<MetricBall> = y.vertices().map(|v| MetricBall::open(Point::Vertex(v), r)).collect();
    for e in y.edges() {
        for j in 1..m {
            let c = Point::on_edge(e.lo(), e.hi(), Q::new(j as i64, m as i64)).unwrap();
            out.push(MetricBall::open(c, r));
        }
    }
    out
}

fn ball_denominator(b: &MetricBall) -> i64 {
    let mut d = *b.radius.denom();
    if let Point::Interior { t, .. } = &b.center {
        d = d.lcm(t.denom());
    }
    d
}

// ---- partition of unity -------------------------------------------------

/// Piecewise-linear partition of unity: values at the Y grid, linear in
/// between. At grid points `λ_W ∝ max(0, r_W − d(y, c_W))`.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    per_edge: u32,
    /// Per grid sample, the nonzero weights by member index.
    values: Vec<BTreeMap<usize, Q>>,
}

impl PartitionOfUnity {
    pub fn build(space: &FiniteSpace, w: &[MetricBall]) -> Result<Self, HatError> {
        let real = space.realization().ok_or_else(|| HatError::InvalidInput("Y grid has no geometry".into()))?;
        let mut values = Vec::with_capacity(space.len());
        for p in real.points() {
            let mut bumps = BTreeMap::new();
            let mut total = Q::zero();
            for (i, b) in w.iter().enumerate() {
                let d = real.metric().distance(&b.center, p).unwrap_or(b.radius);
                if d < b.radius {
                    bumps.insert(i, b.radius - d);
                    total += b.radius - d;
                }
            }
            if total.is_zero() {
                return Err(HatError::YNotCovered(p.clone()));
            }
            values.push(bumps.into_iter().map(|(i, v)| (i, v / total)).collect());
        }
        Ok(PartitionOfUnity { per_edge: real.per_edge(), values })
    }

    pub fn per_edge(&self) -> u32 {
        self.per_edge
    }

    /// All nonzero `λ_W(y)`.
    pub fn at(&self, space: &FiniteSpace, y: &Point) -> BTreeMap<usize, Q> {
        if let Some(i) = space.index_of(y) {
            return self.values[i].clone();
        }
        let Point::Interior { edge, t } = y else { unreachable!("vertices are grid points") };
        let n = Q::from_integer(self.per_edge as i64);
        let s = *t * n;
        let j = s.floor();
        let frac = s - j;
        let at = |k: Q| space.index_of(&Point::on_edge(edge.lo(), edge.hi(), k / n).unwrap()).unwrap();
        let (a, b) = (&self.values[at(j)], &self.values[at(j + Q::one())]);
        let mut out = BTreeMap::new();
        for (&i, &v) in a {
            *out.entry(i).or_insert(Q::zero()) += (Q::one() - frac) * v;
        }
        for (&i, &v) in b {
            *out.entry(i).or_insert(Q::zero()) += frac * v;
        }
        out.retain(|_, v| !v.is_zero());
        out
    }

    pub fn weight(&self, space: &FiniteSpace, w: usize, y: &Point) -> Q {
        self.at(space, y).get(&w).copied().unwrap_or_else(Q::zero)
    }
}

// ---- the machine --------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HatConfig {
    /// Samples per edge of `X`.
    pub x_per_edge: u32,
    /// Minimum samples per edge of `Y`; raised to resolve every ball boundary.
    pub y_per_edge: u32,
    /// Samples per edge of `Γ'` for the `π` audits.
    pub gamma_per_edge: u32,
    pub fineness_cap: u32,
    pub w_cap: u32,
}

impl Default for HatConfig {
    fn default() -> Self {
        HatConfig { x_per_edge: 16, y_per_edge: 1, gamma_per_edge: 4, fineness_cap: FINENESS_CAP, w_cap: W_CAP }
    }
}

/// Everything needed to evaluate `λ_R` and `π`.
pub struct Hat {
    pub fine: FineTriangulation,
    pub chi: Coloring,
    pub w: Vec<MetricBall>,
    pub xi: Vec<u8>,
    pub rects: Vec<Rectangle>,
    y_space: FiniteSpace,
    pou: PartitionOfUnity,
    by_w: Vec<Vec<usize>>,
    by_wv: HashMap<(usize, VertexId), usize>,
    y_members: Vec<Vec<usize>>,
    gamma_metric: GraphMetric,
}

impl Hat {
    /// Runs every step up to the rectangles. `w` defaults to the coarsest
    /// [`synthesize_w`] cover for which every member gets a color.
    pub fn new(
        f: &PLMap,
        g: &PLMap,
        u_cover: &Cover,
        w: Option<Vec<MetricBall>>,
        cfg: &HatConfig,
    ) -> Result<Hat, HatError> {
        if f.domain() != g.domain() {
            return Err(PlMapError::DomainMismatch("f and g have different domains".into()).into());
        }
        let x_space = FiniteSpace::sampled(f.domain(), cfg.x_per_edge);
        let fine = fine_triangulation(f, u_cover, &x_space, cfg.fineness_cap)?;
        let chi = color_distance2(&fine.graph)?;
        let y = g.codomain();

        let x_colors: Vec<BTreeSet<u8>> = (0..x_space.len())
            .map(|i| Ok(colors_at(&chi, &fine.f.evaluate(x_space.point(i).unwrap())?)))
            .collect::<Result<_, HatError>>()?;
        let gx: Vec<Point> = (0..x_space.len())
            .map(|i| g.evaluate(x_space.point(i).unwrap()))
            .collect::<Result<_, _>>()?;
        let y_metric = GraphMetric::new(y);
        let xi_for = |balls: &[MetricBall]| -> Result<Vec<u8>, usize> {
            balls
                .iter()
                .enumerate()
                .map(|(wi, b)| {
                    let mut common: BTreeSet<u8> = (0..crate::coloring::PALETTE).collect();
                    for (i, p) in gx.iter().enumerate() {
                        if b.contains(&y_metric, p) {
                            common.retain(|c| x_colors[i].contains(c));
                        }
                    }
                    common.first().copied().ok_or(wi)
                })
                .collect()
        };
        let (w, xi) = match w {
            Some(w) => {
                if let Some(b) = w.iter().find(|b| !b.open || b.center.validate(y).is_err()) {
                    return Err(HatError::InvalidInput(format!("cover of Y needs open balls on Y, got {b:?}")));
                }
                let xi = xi_for(&w).map_err(|w| HatError::NoXi { w })?;
                (w, xi)
            }
            None => (1..=cfg.w_cap)
                .find_map(|m| {
                    let w = synthesize_w(y, m);
                    xi_for(&w).ok().map(|xi| (w, xi))
                })
                .ok_or(HatError::NoCoarseCoverAtCap { cap: cfg.w_cap })?,
        };

        let mut n_y = cfg.y_per_edge.max(1) as i64;
        for b in &w {
            n_y = n_y.lcm(&ball_denominator(b));
        }
        let y_space = FiniteSpace::sampled(y, n_y as u32);
        let y_members: Vec<Vec<usize>> = y_space
            .realization()
            .unwrap()
            .points()
            .iter()
            .map(|p| (0..w.len()).filter(|&i| w[i].contains(&y_metric, p)).collect())
            .collect();
        for (i, ms) in y_members.iter().enumerate() {
            if ms.len() > 2 {
                return Err(HatError::OrderViolation { order: ms.len(), at: y_space.point(i).unwrap().clone() });
            }
        }
        // between grid points membership is constant, so midpoints settle the rest
        for e in y.edges() {
            for j in 0..n_y {
                let mid = Point::on_edge(e.lo(), e.hi(), Q::new(2 * j + 1, 2 * n_y)).unwrap();
                let order = w.iter().filter(|b| b.contains(&y_metric, &mid)).count();
                if order > 2 {
                    return Err(HatError::OrderViolation { order, at: mid });
                }
                if order == 0 {
                    return Err(HatError::YNotCovered(mid));
                }
            }
        }
        let pou = PartitionOfUnity::build(&y_space, &w)?;

        let rects = build_rectangles(&xi, &chi);
        let mut by_w = vec![Vec::new(); w.len()];
        let mut by_wv = HashMap::new();
        for (i, r) in rects.iter().enumerate() {
            by_w[r.w_index].push(i);
            by_wv.insert((r.w_index, r.vertex), i);
        }
        let gamma_metric = GraphMetric::new(&fine.graph);
        Ok(Hat { fine, chi, w, xi, rects, y_space, pou, by_w, by_wv, y_members, gamma_metric })
    }

    pub fn y_space(&self) -> &FiniteSpace {
        &self.y_space
    }

    pub fn pou(&self) -> &PartitionOfUnity {
        &self.pou
    }

    /// Indices of the members of `𝒲` containing `y`.
    pub fn w_containing(&self, y: &Point) -> Vec<usize> {
        if let Some(i) = self.y_space.index_of(y) {
            return self.y_members[i].clone();
        }
        let metric = self.y_space.realization().unwrap().metric();
        (0..self.w.len()).filter(|&i| self.w[i].contains(metric, y)).collect()
    }

    /// `ℛ_{R,y}`: the rectangles meeting `R` whose base contains `y`.
    pub fn rectangles_at(&self, r: usize, y: &Point) -> Result<Vec<usize>, HatError> {
        let ws = self.w_containing(y);
        let rect = self.rects[r];
        if !ws.contains(&rect.w_index) {
            return Err(HatError::NotInW { rect: r, y: y.clone() });
        }
        let g = &self.fine.graph;
        let mut out = Vec::new();
        for w in ws {
            for &s in &self.by_w[w] {
                let v = self.rects[s].vertex;
                if v == rect.vertex || g.has_edge(v, rect.vertex) {
                    out.push(s);
                }
            }
        }
        out.sort_unstable();
        if out.len() > 2 {
            return Err(HatError::Claim1Violation { rect: r, y: y.clone(), count: out.len() });
        }
        Ok(out)
    }

    /// `λ_R(y)`, a point of the closed star of `v_R`.
    pub fn lambda(&self, r: usize, y: &Point) -> Result<Point, HatError> {
        let set = self.rectangles_at(r, y)?;
        let rect = self.rects[r];
        let Some(&s) = set.iter().find(|&&s| s != r) else {
            return Ok(Point::Vertex(rect.vertex));
        };
        let weights = self.pou.at(&self.y_space, y);
        let wr = weights.get(&rect.w_index).copied().unwrap_or_else(Q::zero);
        let ws = weights.get(&self.rects[s].w_index).copied().unwrap_or_else(Q::zero);
        if wr + ws != Q::one() {
            return Err(HatError::WeightDefect { y: y.clone(), sum: crate::rational::format_q(&(wr + ws)) });
        }
        Ok(Point::on_edge(rect.vertex, self.rects[s].vertex, ws)?)
    }

    /// Rectangles containing `(y, t)`.
    pub fn containing(&self, y: &Point, t: &Point) -> Vec<usize> {
        let mut out = Vec::new();
        for w in self.w_containing(y) {
            for (v, d) in t.anchors() {
                if d < Q::one() {
                    if let Some(&r) = self.by_wv.get(&(w, v)) {
                        out.push(r);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `π(y, t) = (y, λ_R(y))` for any rectangle `R ∋ (y, t)`; all such
    /// rectangles are required to agree.
    pub fn project(&self, y: &Point, t: &Point) -> Result<Point, HatError> {
        let rs = self.containing(y, t);
        let Some(&first) = rs.first() else {
            return Err(HatError::OutsideRectangles { y: y.clone(), t: t.clone() });
        };
        let p = self.lambda(first, y)?;
        for &r in &rs[1..] {
            if self.lambda(r, y)? != p {
                return Err(HatError::PiDisagreement { a: first, b: r, y: y.clone(), t: t.clone() });
            }
        }
        Ok(p)
    }
}

// ---- the run --------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Claim1Audit {
    pub pairs_checked: usize,
    pub max_size: usize,
    pub two_rectangle_cases: usize,
    pub weight_sums_exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PiAudit {
    pub points_checked: usize,
    pub overlap_points: usize,
    pub agreement: bool,
    pub preimage_in_b2: bool,
    pub preimage_violation: Option<(Point, Point, VertexId)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityAudit {
    pub steps_checked: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageGraph {
    pub graph: Graph,
    /// `h`-value of each vertex of `L`.
    pub points: Vec<(Point, Point)>,
    pub betti1: usize,
    pub class: CoverClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionAudit {
    pub locally_injective: bool,
    pub witness: Option<InjectivityWitness>,
    /// Fewest and most vertices of `L` over a point of `g(X)`.
    pub min_sheets: usize,
    pub max_sheets: usize,
    /// Y grid points with no vertex of `L` over them.
    pub missed_grid_points: usize,
    /// The projection is a bijection onto its samples, hitting the Y grid.
    pub bijective: bool,
    /// Vertices of `L` inside one rectangle have distinct `Y` coordinates.
    pub injective_on_rectangles: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HatOutput {
    pub parts_per_edge: u32,
    pub gamma_vertices: usize,
    pub coloring: Coloring,
    pub w: Vec<MetricBall>,
    pub xi: Vec<u8>,
    pub rectangles: Vec<Rectangle>,
    pub x_per_edge: u32,
    pub y_per_edge: u32,
    pub gamma_per_edge: u32,
    /// `h` on every sample of `X`, as `(y, t) ∈ Y × Γ'`.
    pub h: Vec<(Point, Point)>,
    pub claim1: Claim1Audit,
    pub pi: PiAudit,
    pub continuity: ContinuityAudit,
    pub rect_preimages_in_u: bool,
    pub u_map: UMapReport,
    pub image: ImageGraph,
    pub projection: ProjectionAudit,
    pub ok: bool,
}

/// Builds the machinery and runs every audit.
pub fn build_hat_map(
    f: &PLMap,
    g: &PLMap,
    u_cover: &Cover,
    w: Option<Vec<MetricBall>>,
    cfg: &HatConfig,
) -> Result<HatOutput, HatError> {
    let hat = Hat::new(f, g, u_cover, w, cfg)?;
    let x_space = FiniteSpace::sampled(f.domain(), cfg.x_per_edge);
    let y_space = hat.y_space();
    let y_points = y_space.realization().unwrap().points();

    // Claim 1 and weight completeness over every grid point of every base
    let mut claim1 = Claim1Audit { pairs_checked: 0, max_size: 0, two_rectangle_cases: 0, weight_sums_exact: true };
    for (r, rect) in hat.rects.iter().enumerate() {
        for (i, y) in y_points.iter().enumerate() {
            if !hat.y_members[i].contains(&rect.w_index) {
                continue;
            }
            let set = hat.rectangles_at(r, y)?;
            claim1.pairs_checked += 1;
            claim1.max_size = claim1.max_size.max(set.len());
            if set.len() == 2 {
                claim1.two_rectangle_cases += 1;
                match hat.lambda(r, y) {
                    Err(HatError::WeightDefect { .. }) => claim1.weight_sums_exact = false,
                    other => {
                        other?;
                    }
                }
            }
        }
    }

    // π on the product grid
    let g_space = FiniteSpace::sampled(&hat.fine.graph, cfg.gamma_per_edge);
    let g_points = g_space.realization().unwrap().points();
    let mut pi = PiAudit { points_checked: 0, overlap_points: 0, agreement: true, preimage_in_b2: true, preimage_violation: None };
    for y in y_points {
        for t in g_points {
            let rs = hat.containing(y, t);
            if rs.is_empty() {
                continue;
            }
            pi.points_checked += 1;
            if rs.len() > 1 {
                pi.overlap_points += 1;
            }
            let p = match hat.project(y, t) {
                Ok(p) => p,
                Err(HatError::PiDisagreement { .. }) => {
                    pi.agreement = false;
                    continue;
                }
                Err(e) => return Err(e),
            };
            for r in hat.containing(y, &p) {
                let v = hat.rects[r].vertex;
                let d = hat.gamma_metric.distance(t, &Point::Vertex(v)).unwrap();
                if d >= Q::from_integer(2) && pi.preimage_in_b2 {
                    pi.preimage_in_b2 = false;
                    pi.preimage_violation = Some((y.clone(), t.clone(), v));
                }
            }
        }
    }

    // λ_R moves by at most the total variation of the weights between
    // neighbouring grid points
    let mut continuity = ContinuityAudit { steps_checked: 0, violations: 0 };
    for (r, rect) in hat.rects.iter().enumerate() {
        for &(a, b) in y_space.links() {
            if !hat.y_members[a].contains(&rect.w_index) || !hat.y_members[b].contains(&rect.w_index) {
                continue;
            }
            let (ya, yb) = (&y_points[a], &y_points[b]);
            let step = hat.gamma_metric.distance(&hat.lambda(r, ya)?, &hat.lambda(r, yb)?).unwrap();
            let (la, lb) = (hat.pou.at(y_space, ya), hat.pou.at(y_space, yb));
            let keys: BTreeSet<usize> = la.keys().chain(lb.keys()).copied().collect();
            let tv: Q = keys
                .iter()
                .map(|k| (la.get(k).copied().unwrap_or_else(Q::zero) - lb.get(k).copied().unwrap_or_else(Q::zero)).abs())
                .sum();
            continuity.steps_checked += 1;
            if step > tv {
                continuity.violations += 1;
            }
        }
    }

    // h on the samples of X
    let mut h = Vec::with_capacity(x_space.len());
    for i in 0..x_space.len() {
        let x = x_space.point(i).unwrap();
        let y = g.evaluate(x)?;
        let t = hat.fine.f.evaluate(x)?;
        let p = hat.project(&y, &t)?;
        h.push((y, p));
    }

    // h⁻¹(R) ⊆ U for every rectangle
    let mut pre: Vec<FixedBitSet> = vec![FixedBitSet::with_capacity(x_space.len()); hat.rects.len()];
    for (i, (y, p)) in h.iter().enumerate() {
        for r in hat.containing(y, p) {
            pre[r].insert(i);
        }
    }
    let rect_preimages_in_u = pre
        .iter()
        .all(|s| s.is_clear() || u_cover.members.iter().any(|m| s.is_subset(&m.points)));

    let u_map = sampled_u_map(&x_space, u_cover, &h, cfg.x_per_edge);

    // L and the projection to Y
    let mut index: BTreeMap<&(Point, Point), u32> = BTreeMap::new();
    for v in &h {
        let n = index.len() as u32;
        index.entry(v).or_insert(n);
    }
    let mut points = vec![(Point::Vertex(0), Point::Vertex(0)); index.len()];
    for (v, &i) in &index {
        points[i as usize] = (*v).clone();
    }
    let mut l = Graph::new();
    for i in 0..points.len() as u32 {
        l.add_vertex(i);
    }
    for &(a, b) in x_space.links() {
        let (ia, ib) = (index[&h[a]], index[&h[b]]);
        if ia != ib {
            l.add_edge(ia, ib)?;
        }
    }
    let images = points.iter().enumerate().map(|(i, (y, _))| (i as VertexId, y.clone())).collect();
    let pr_y = PLMap::linear(l.clone(), g.codomain().clone(), images)
        .map_err(|e| HatError::InvalidInput(format!("X grid too coarse to follow g: {e}")))?;
    let li = pr_y.is_locally_injective();
    let mut sheets: BTreeMap<&Point, usize> = BTreeMap::new();
    for (y, _) in &points {
        *sheets.entry(y).or_insert(0) += 1;
    }
    let missed_grid_points = y_points.iter().filter(|y| !sheets.contains_key(y)).count();
    let min_sheets = sheets.values().copied().min().unwrap_or(0);
    let max_sheets = sheets.values().copied().max().unwrap_or(0);
    let mut injective_on_rectangles = true;
    let mut seen_in: BTreeSet<(usize, &Point)> = BTreeSet::new();
    for (y, p) in &points {
        for r in hat.containing(y, p) {
            injective_on_rectangles &= seen_in.insert((r, y));
        }
    }
    let projection = ProjectionAudit {
        locally_injective: li.locally_injective,
        witness: li.witness,
        min_sheets,
        max_sheets,
        missed_grid_points,
        bijective: min_sheets == 1 && max_sheets == 1 && missed_grid_points == 0,
        injective_on_rectangles,
    };
    let class = canonical_class(&l)?;
    let image = ImageGraph { betti1: l.betti1(), graph: l, points, class };

    let ok = claim1.max_size <= 2
        && claim1.weight_sums_exact
        && pi.agreement
        && pi.preimage_in_b2
        && continuity.violations == 0
        && rect_preimages_in_u
        && u_map.is_u_map
        && projection.locally_injective
        && projection.injective_on_rectangles;
    Ok(HatOutput {
        parts_per_edge: hat.fine.parts,
        gamma_vertices: hat.fine.graph.vertex_count(),
        coloring: hat.chi.clone(),
        w: hat.w.clone(),
        xi: hat.xi.clone(),
        rectangles: hat.rects.clone(),
        x_per_edge: cfg.x_per_edge,
        y_per_edge: hat.pou.per_edge(),
        gamma_per_edge: cfg.gamma_per_edge,
        h,
        claim1,
        pi,
        continuity,
        rect_preimages_in_u,
        u_map,
        image,
        projection,
        ok,
    })
}

/// Class of the cover of a graph by the open unit balls around its vertices.
fn canonical_class(l: &Graph) -> Result<CoverClass, HatError> {
    if l.edge_count() == 0 {
        return Ok(CoverClass::ChainLike((0..l.vertex_count()).collect()));
    }
    let space = FiniteSpace::sampled(l, 2);
    let cover = Cover::from_sets(l.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), Q::one()))));
    Ok(classify_cover(&space, &cover)?)
}

fn sampled_u_map<K: Ord + Clone + Into<(Point, Point)>>(
    space: &FiniteSpace,
    cover: &Cover,
    keys: &[K],
    per_edge: u32,
) -> UMapReport {
    let mut fibers: BTreeMap<&K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        fibers.entry(k).or_default().push(i);
    }
    let mut worst: Option<crate::plmap::FiberReport> = None;
    let mut failing = None;
    let n = fibers.len();
    for (k, idx) in fibers {
        let mut diam = Q::zero();
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                diam = diam.max(space.distance(i, j).unwrap_or_else(Q::zero));
            }
        }
        let (y, _) = k.clone().into();
        let rep = crate::plmap::FiberReport {
            target: y,
            preimage: idx.iter().map(|&i| space.point(i).unwrap().clone()).collect(),
            diameter: diam,
            contains_segment: false,
        };
        if failing.is_none() && !cover.members.iter().any(|m| idx.iter().all(|&i| m.points.contains(i))) {
            failing = Some(rep.clone());
        }
        if worst.as_ref().is_none_or(|w| rep.diameter > w.diameter) {
            worst = Some(rep);
        }
    }
    UMapReport {
        is_u_map: failing.is_none(),
        worst_fiber: worst,
        failing_fiber: failing,
        fibers_checked: n,
        samples_per_edge: per_edge,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn balls(space: &FiniteSpace, g: &Graph, r: Q) -> Cover {
        Cover::from_sets(g.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), r))))
    }

    #[test]
    fn whole_space_needs_no_subdivision() {
        let g = Graph::path(4);
        let f = PLMap::identity(&g);
        let space = FiniteSpace::sampled(&g, 2);
        let whole = Cover::new(vec![Member::from_set("X", space.full())]);
        assert_eq!(fine_triangulation(&f, &whole, &space, 8).unwrap().parts, 1);
    }

    #[test]
    fn half_circles_need_four_parts() {
        let c4 = Graph::cycle(4);
        let f = PLMap::identity(&c4);
        let space = FiniteSpace::sampled(&c4, 12);
        let arcs = Cover::from_sets([1, 3].map(|v| space.ball(&MetricBall::open(Point::Vertex(v), q(3, 2)))));
        let fine = fine_triangulation(&f, &arcs, &space, 64).unwrap();
        assert_eq!(fine.parts, 4);
        assert_eq!(fine.graph.vertex_count(), 16);
    }

    #[test]
    fn adjacent_hubs_are_pulled_apart() {
        let g = Graph::from_edges([(0, 1), (0, 2), (0, 3), (1, 4), (1, 5)]);
        let f = PLMap::identity(&g);
        let space = FiniteSpace::sampled(&g, 1);
        let whole = Cover::new(vec![Member::from_set("X", space.full())]);
        assert_eq!(fine_triangulation(&f, &whole, &space, 64).unwrap().parts, 6);
    }

    #[test]
    fn unreachable_fineness_hits_the_cap() {
        let g = Graph::path(2);
        let k = PLMap::constant(&g, &g, Point::Vertex(1)).unwrap();
        let space = FiniteSpace::sampled(&g, 1);
        let cover = balls(&space, &g, q(1, 2));
        assert_eq!(fine_triangulation(&k, &cover, &space, 5).unwrap_err(), HatError::NoFinenessAtCap { cap: 5 });
    }

    #[test]
    fn monochrome_members() {
        let c6 = Graph::cycle(6);
        let chi = color_distance2(&c6).unwrap();
        let members = monochrome_cover(&c6, &chi).unwrap();
        assert_eq!(members.len(), 3);
        assert!(members.iter().all(|m| m.centers.len() == 2));
        let p3 = Graph::path(2);
        let chi = color_distance2(&p3).unwrap();
        assert_eq!(monochrome_cover(&p3, &chi).unwrap().len(), 3);
        let bad: Coloring = [(0, 0), (1, 1), (2, 0)].into_iter().collect();
        assert!(matches!(monochrome_cover(&p3, &bad), Err(HatError::InvalidColoring(_))));
        let space = FiniteSpace::sampled(&c6, 2);
        let cover = monochrome_cover_on(&space, &color_distance2(&c6).unwrap());
        cover.validate(&space).unwrap();
    }

    #[test]
    fn rectangle_counts() {
        let chi: Coloring = [(0, 0), (1, 1), (2, 2), (3, 0), (4, 1), (5, 2)].into_iter().collect();
        assert_eq!(build_rectangles(&[0], &chi).len(), 2);
        let chi3: Coloring = (0..9).map(|v| (v, (v % 3) as u8)).collect();
        assert_eq!(build_rectangles(&[1, 1], &chi3).len(), 6);
    }

    #[test]
    fn pou_sums_to_one() {
        let c6 = Graph::cycle(6);
        let w = synthesize_w(&c6, 2);
        let space = FiniteSpace::sampled(&c6, 8);
        let pou = PartitionOfUnity::build(&space, &w).unwrap();
        for i in 0..space.len() {
            let y = space.point(i).unwrap();
            let vals = pou.at(&space, y);
            assert_eq!(vals.values().copied().sum::<Q>(), qi(1));
            assert!(vals.len() <= 2);
        }
        let off = Point::on_edge(0, 1, q(1, 16)).unwrap();
        assert_eq!(pou.at(&space, &off).values().copied().sum::<Q>(), qi(1));
    }

    #[test]
    fn circle_over_itself() {
        let c6 = Graph::cycle(6);
        let id = PLMap::identity(&c6);
        let space = FiniteSpace::sampled(&c6, 4);
        let whole = Cover::new(vec![Member::from_set("X", space.full())]);
        let cfg = HatConfig { x_per_edge: 4, ..HatConfig::default() };
        let out = build_hat_map(&id, &id, &whole, None, &cfg).unwrap();
        assert!(out.ok, "{:?}", out.claim1);
        assert!(out.projection.bijective);
        assert_eq!(out.image.class.kind(), crate::cover::CoverKind::CircleLike);
    }

    #[test]
    fn lambda_cases() {
        let c6 = Graph::cycle(6);
        let id = PLMap::identity(&c6);
        let space = FiniteSpace::sampled(&c6, 4);
        let cover = balls(&space, &c6, q(3, 2));
        let cfg = HatConfig { x_per_edge: 4, ..HatConfig::default() };
        let hat = Hat::new(&id, &id, &cover, None, &cfg).unwrap();
        let ys = hat.y_space().realization().unwrap().points().to_vec();
        let mut saw_single = false;
        let mut saw_pair = false;
        for (r, rect) in hat.rects.iter().enumerate() {
            for y in &ys {
                if !hat.w_containing(y).contains(&rect.w_index) {
                    assert!(matches!(hat.rectangles_at(r, y), Err(HatError::NotInW { .. })));
                    continue;
                }
                let set = hat.rectangles_at(r, y).unwrap();
                let lam = hat.lambda(r, y).unwrap();
                if set.len() == 1 {
                    saw_single = true;
                    assert_eq!(lam, Point::Vertex(rect.vertex));
                } else {
                    saw_pair = true;
                    let d = hat.gamma_metric.distance(&lam, &Point::Vertex(rect.vertex)).unwrap();
                    assert!(d <= qi(1));
                }
                // π fixes the graph of λ_R
                assert_eq!(hat.project(y, &lam).unwrap(), lam);
            }
        }
        assert!(saw_single && saw_pair);
    }
}
