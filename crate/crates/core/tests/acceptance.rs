use std::time::{Duration, Instant};

use continua_core::coloring::{
    check_preconditions, color_distance2, coloring_feasible_oracle, verify_coloring, ColoringError, Precondition,
};
use continua_core::cover::{
    classify_cover, connected_pool, cover_order, CoverClass, CoverKind, Cover, FiniteSpace, Member,
};
use continua_core::graph::{Graph, MetricBall, Point, VertexId};
use continua_core::hat::{build_hat_map, HatConfig};
use continua_core::models::{empirical_k_likeness, knaster_stage, solenoid_stage, three_arc_cover, SweepConfig};
use continua_core::plmap::PLMap;
use continua_core::rational::{q, qi};
use continua_core::search::{find_refinement, SearchLimits, SearchOutcome};
use continua_core::surgery::{collapse_is_u_map, reduce_degree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, what: &str, ok: bool, detail: String, took: Duration) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n} {verdict}: {what} ({detail}) [{:.1}s]", took.as_secs_f64());
    assert!(ok, "criterion {n} failed: {what}: {detail}");
}

// ---- 1: nerve classification against brute force ----------------------------

/// Tries every enumeration of `members`, pruned as soon as a placed member has
/// the wrong adjacency to an earlier one.
fn pattern(adj: &[u8], members: &[usize], closing: bool) -> bool {
    fn go(adj: &[u8], members: &[usize], closing: bool, order: &mut Vec<usize>, used: u8) -> bool {
        let (k, n) = (order.len(), members.len());
        if k == n {
            return true;
        }
        for &x in members {
            if used & (1 << x) != 0 {
                continue;
            }
            let fits = (0..k).all(|j| {
                let required = k - j == 1 || (closing && j == 0 && k == n - 1);
                (adj[x] >> order[j] & 1 == 1) == required
            });
            if fits {
                order.push(x);
                if go(adj, members, closing, order, used | 1 << x) {
                    return true;
                }
                order.pop();
            }
        }
        false
    }
    go(adj, members, closing, &mut Vec::new(), 0)
}

fn oracle_kind(adj: &[u8]) -> CoverKind {
    let n = adj.len();
    let all: Vec<usize> = (0..n).collect();
    if pattern(adj, &all, false) {
        return CoverKind::ChainLike;
    }
    if n >= 3 && pattern(adj, &all, true) {
        return CoverKind::CircleLike;
    }
    let mut subsets: Vec<u32> = (0u32..1 << n).filter(|s| s.count_ones() >= 3).collect();
    subsets.sort_by_key(|s| s.count_ones());
    for s in subsets {
        let members: Vec<usize> = (0..n).filter(|&i| s >> i & 1 == 1).collect();
        if pattern(adj, &members, true) {
            return CoverKind::Unstructured;
        }
    }
    CoverKind::TreeLike
}

fn witness_realizes(adj: &[u8], w: &[usize], closing: bool) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    for &x in w {
        if x >= n || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    w.len() == n
        && (0..n).all(|i| {
            (0..i).all(|j| {
                let required = i - j == 1 || (closing && n >= 3 && j == 0 && i == n - 1);
                (adj[w[i]] >> w[j] & 1 == 1) == required
            })
        })
}

#[test]
fn criterion_1_classification_matches_brute_force() {
    let start = Instant::now();
    let mut checked = 0u64;
    let mut mismatches = Vec::new();
    for n in 1..=7usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        for mask in 0u32..1 << pairs.len() {
            let mut adj = vec![0u8; n];
            let mut points: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
            let mut next = n;
            for (e, &(a, b)) in pairs.iter().enumerate() {
                if mask >> e & 1 == 1 {
                    adj[a] |= 1 << b;
                    adj[b] |= 1 << a;
                    points[a].push(next);
                    points[b].push(next);
                    next += 1;
                }
            }
            let space = FiniteSpace::discrete(next);
            let cover = Cover::new(points.into_iter().enumerate().map(|(i, p)| Member::new(format!("M{i}"), p)).collect());
            let class = classify_cover(&space, &cover).unwrap();
            let expected = oracle_kind(&adj);
            let witness_ok = match &class {
                CoverClass::ChainLike(w) => witness_realizes(&adj, w, false),
                CoverClass::CircleLike(w) => witness_realizes(&adj, w, true),
                _ => true,
            };
            if class.kind() != expected || !witness_ok {
                mismatches.push((n, mask, class.kind(), expected));
            }
            checked += 1;
        }
    }
    let took = start.elapsed();
    let ok = mismatches.is_empty() && took < Duration::from_secs(60);
    report(
        1,
        "classify_cover agrees with the enumeration oracle on every nerve with at most 7 members",
        ok,
        format!("{checked} nerves, {} mismatches, first {:?}", mismatches.len(), mismatches.first()),
        took,
    );
}

// ---- 2: three arcs ---------------------------------------------------------

#[test]
fn criterion_2_three_arcs_have_order_two() {
    let start = Instant::now();
    let (space, cover) = three_arc_cover(360, 121).unwrap();
    let order = cover_order(&space, &cover).unwrap();
    report(2, "three overlapping arcs on a 360-point circle", order == 2, format!("order {order}"), start.elapsed());
}

// ---- 3: distance-2 coloring ------------------------------------------------

fn subdivided_skeleton(rng: &mut ChaCha8Rng) -> Graph {
    let s = rng.gen_range(2..=6u32);
    let mut skel = Graph::new();
    skel.add_vertex(0);
    for i in 1..s {
        let open: Vec<VertexId> = (0..i).filter(|&v| skel.degree(v) < 3).collect();
        let parent = open[rng.gen_range(0..open.len())];
        skel.add_edge(parent, i).unwrap();
    }
    for _ in 0..rng.gen_range(0..3) {
        let (a, b) = (rng.gen_range(0..s), rng.gen_range(0..s));
        if a != b && !skel.has_edge(a, b) && skel.degree(a) < 3 && skel.degree(b) < 3 {
            skel.add_edge(a, b).unwrap();
        }
    }
    let mut g = Graph::new();
    for v in skel.vertices() {
        g.add_vertex(v);
    }
    let mut next = s;
    for e in skel.edges().collect::<Vec<_>>() {
        let len = rng.gen_range(1..=9u32);
        let mut prev = e.lo();
        for _ in 1..len {
            g.add_edge(prev, next).unwrap();
            prev = next;
            next += 1;
        }
        g.add_edge(prev, e.hi()).unwrap();
    }
    g
}

fn coloring_instance(rng: &mut ChaCha8Rng) -> Graph {
    match rng.gen_range(0..8) {
        0 | 1 => Graph::cycle(rng.gen_range(6..=40)),
        2 => Graph::path(rng.gen_range(0..=20)),
        3 => Graph::spider(3, rng.gen_range(1..=15)),
        _ => subdivided_skeleton(rng),
    }
}

#[test]
fn criterion_3_distance2_coloring() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0105);
    let mut graphs = Vec::new();
    while graphs.len() < 200 {
        let g = coloring_instance(&mut rng);
        if g.vertex_count() <= 60 && check_preconditions(&g).is_ok() {
            graphs.push(g);
        }
    }
    let mut failures = Vec::new();
    let mut small = 0;
    for (i, g) in graphs.iter().enumerate() {
        let colored = color_distance2(g);
        let valid = colored.as_ref().is_ok_and(|c| verify_coloring(g, c).valid);
        if !valid {
            failures.push(format!("graph {i}: {colored:?}"));
        }
        if g.vertex_count() <= 15 {
            small += 1;
            if coloring_feasible_oracle(g, 4).unwrap() != colored.is_ok() {
                failures.push(format!("graph {i}: oracle disagrees"));
            }
        }
    }
    let c5 = Graph::cycle(5);
    let c5_rejected = matches!(
        color_distance2(&c5),
        Err(ColoringError::PreconditionViolated(Precondition::ShortCycle { .. }))
    );
    let c5_oracle = !coloring_feasible_oracle(&c5, 4).unwrap() && coloring_feasible_oracle(&c5, 5).unwrap();
    let ok = failures.is_empty() && c5_rejected && c5_oracle && small > 0;
    report(
        3,
        "four-color distance-2 coloring on admissible graphs, C5 rejected",
        ok,
        format!(
            "{} graphs, {small} checked against the oracle, C5 rejected {c5_rejected}, C5 oracle {c5_oracle}, failures {failures:?}",
            graphs.len()
        ),
        start.elapsed(),
    );
}

// ---- 4: degree reduction ---------------------------------------------------

fn random_connected(rng: &mut ChaCha8Rng) -> Graph {
    let n = rng.gen_range(2..=30u32);
    let mut g = Graph::new();
    g.add_vertex(0);
    for i in 1..n {
        let open: Vec<VertexId> = (0..i).filter(|&v| g.degree(v) < 6).collect();
        let parent = open[rng.gen_range(0..open.len())];
        g.add_edge(parent, i).unwrap();
    }
    for _ in 0..rng.gen_range(0..=2 * n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !g.has_edge(a, b) && g.degree(a) < 6 && g.degree(b) < 6 {
            g.add_edge(a, b).unwrap();
        }
    }
    g
}

#[test]
fn criterion_4_degree_reduction() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e7);
    let mut failures = Vec::new();
    let mut split = 0;
    for i in 0..100 {
        let g = random_connected(&mut rng);
        let excess: usize = g.vertices().map(|v| g.degree(v).saturating_sub(3)).sum();
        let maxd = g.max_degree();
        let mut res = reduce_degree(&g).unwrap();
        let h = &res.graph;
        let counts_ok = h.vertex_count() - g.vertex_count() == excess && h.edge_count() - g.edge_count() == excess;
        if h.max_degree() > 3 || h.betti1() != g.betti1() || !counts_ok {
            failures.push(format!("graph {i}: max degree {}, counts {counts_ok}", h.max_degree()));
            continue;
        }
        let per_edge = if maxd >= 4 { 2 * (maxd as u32 - 2) } else { 2 };
        if maxd >= 4 {
            res = res.with_link_length(q(1, maxd as i64 - 2)).unwrap();
            split += 1;
        }
        let space = FiniteSpace::sampled(&g, per_edge);
        let cover = Cover::from_sets(g.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), qi(1)))));
        let check = collapse_is_u_map(&res, &cover, &space).unwrap();
        if !check.is_u_map {
            failures.push(format!("graph {i}: collapse fails at {:?}", check.failing_vertex));
        }
    }
    report(
        4,
        "reduce_degree caps degree at 3 with the expected counts and a unit-cover collapse",
        failures.is_empty(),
        format!("100 graphs, {split} with splits, failures {failures:?}"),
        start.elapsed(),
    );
}

// ---- 5: the hat map over a double cover -------------------------------------

#[test]
fn criterion_5_hat_map_on_a_solenoid_stage() {
    let start = Instant::now();
    let system = solenoid_stage(1, 2).unwrap();
    let g = system.projection(1, 0).unwrap();
    let x = g.domain().clone();
    let f = PLMap::identity(&x);
    let space = FiniteSpace::sampled(&x, 16);
    let u = Cover::from_sets(x.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), q(3, 2)))));
    let out = build_hat_map(&f, &g, &u, None, &HatConfig { x_per_edge: 16, ..HatConfig::default() }).unwrap();
    let p = &out.projection;
    let checks = [
        ("claim 1 bound", out.claim1.max_size <= 2),
        ("weights exact", out.claim1.weight_sums_exact),
        ("pi agreement", out.pi.agreement),
        ("preimages in B2", out.pi.preimage_in_b2),
        ("u-map", out.u_map.is_u_map),
        ("locally injective", p.locally_injective),
        ("injective on rectangles", p.injective_on_rectangles),
        ("two sheets", (p.min_sheets, p.max_sheets) == (2, 2)),
        ("circle-like image", out.image.class.kind() == CoverKind::CircleLike),
        ("fineness", out.parts_per_edge <= 16),
        ("all audits", out.ok),
    ];
    let took = start.elapsed();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    report(
        5,
        "hat construction for the degree-2 circle cover",
        failed.is_empty() && took < Duration::from_secs(300),
        format!("parts {}, sheets {}..{}, failed {failed:?}", out.parts_per_edge, p.min_sheets, p.max_sheets),
        took,
    );
}

// ---- 6: tree codomains -----------------------------------------------------

#[test]
fn criterion_6_tree_codomains_project_bijectively() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for (name, y) in [("arc", Graph::path(6)), ("spider", Graph::spider(3, 2))] {
        let id = PLMap::identity(&y);
        let space = FiniteSpace::sampled(&y, 8);
        let u = Cover::from_sets(y.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), q(3, 2)))));
        let cfg = HatConfig { x_per_edge: 8, y_per_edge: 8, ..HatConfig::default() };
        let out = build_hat_map(&id, &id, &u, None, &cfg).unwrap();
        let good = out.ok && out.projection.bijective;
        ok &= good;
        details.push(format!("{name}: ok {} bijective {}", out.ok, out.projection.bijective));
    }
    report(6, "projection of L onto a tree is a bijection", ok, details.join(", "), start.elapsed());
}

// ---- 7: winding numbers ----------------------------------------------------

fn subdivided_windings(f: &PLMap, parts: u32) -> [i64; 3] {
    let (_, down, _) = PLMap::subdivision_maps(f.domain(), parts);
    let (_, _, up) = PLMap::subdivision_maps(f.codomain(), parts);
    let fine_domain = PLMap::compose(f, &down).unwrap();
    let fine_codomain = PLMap::compose(&up, f).unwrap();
    let both = PLMap::compose(&up, &fine_domain).unwrap();
    [
        fine_domain.winding_number().unwrap(),
        fine_codomain.winding_number().unwrap(),
        both.winding_number().unwrap(),
    ]
}

#[test]
fn criterion_7_winding_numbers() {
    let start = Instant::now();
    let c6 = Graph::cycle(6);
    let mut cases: Vec<(String, PLMap, i64)> = vec![
        ("identity".into(), PLMap::identity(&c6), 1),
        ("constant".into(), PLMap::constant(&c6, &c6, Point::Vertex(2)).unwrap(), 0),
        ("double cover".into(), PLMap::cyclic_cover(6, 2), 2),
        ("triple cover".into(), PLMap::cyclic_cover(6, 3), 3),
    ];
    for (n, p) in [(2u32, 2u32), (3, 2), (2, 3)] {
        let s = solenoid_stage(n, p).unwrap();
        cases.push((format!("solenoid({n},{p})"), s.projection(s.top(), 0).unwrap(), (p as i64).pow(n)));
    }
    let mut failures = Vec::new();
    for (name, f, want) in &cases {
        let w = f.winding_number().unwrap();
        if w != *want {
            failures.push(format!("{name}: {w} != {want}"));
        }
        for parts in [1, 2, 4] {
            let ws = subdivided_windings(f, parts);
            if ws.iter().any(|x| x != want) {
                failures.push(format!("{name} at {parts} parts: {ws:?}"));
            }
        }
    }
    report(
        7,
        "winding numbers of circle maps, stable under subdivision",
        failures.is_empty(),
        format!("{} maps, failures {failures:?}", cases.len()),
        start.elapsed(),
    );
}

// ---- 8: cover sweeps -------------------------------------------------------

#[test]
fn criterion_8_cover_sweeps() {
    let start = Instant::now();
    let knaster = empirical_k_likeness(&knaster_stage(3).unwrap(), &SweepConfig::new(4, CoverKind::ChainLike)).unwrap();
    // the full family has about 42k minimal covers
    let solenoid_cfg = SweepConfig { max_covers: 100_000, ..SweepConfig::new(4, CoverKind::CircleLike) };
    let solenoid = empirical_k_likeness(&solenoid_stage(2, 2).unwrap(), &solenoid_cfg).unwrap();
    let (space, arcs) = three_arc_cover(36, 13).unwrap();
    let pool = connected_pool(&space, 100_000).unwrap();
    let arc_outcome =
        find_refinement(&space, &arcs, CoverKind::ChainLike, &pool, SearchLimits { max_nodes: 2_000_000 }).unwrap();
    let arcs_refuse = matches!(arc_outcome, SearchOutcome::NotFoundAtResolution { .. });
    let took = start.elapsed();
    let ok = knaster.all_pass
        && !knaster.truncated
        && solenoid.all_pass
        && !solenoid.truncated
        && arcs_refuse
        && took < Duration::from_secs(600);
    report(
        8,
        "every sampled cover of the Knaster and solenoid stages refines as expected, three arcs do not chain",
        ok,
        format!(
            "knaster {}/{} pass, solenoid {}/{} pass, three arcs chain-refinable {}",
            knaster.passed,
            knaster.generated,
            solenoid.passed,
            solenoid.generated,
            !arcs_refuse
        ),
        took,
    );
}
