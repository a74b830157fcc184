//! Pool-bounded search for structured refinements of a cover.
//!
//! The search only ever combines sets from a finite candidate pool, so a
//! negative verdict means "no refinement of the requested shape exists inside
//! this pool", never that none exists at all.

use crate::cover::{classify_nerve, nerve_of_sets, Cover, CoverClass, CoverError, CoverKind, FiniteSpace, Member};
use fixedbitset::FixedBitSet;
use serde::Serialize;
use std::collections::{BTreeSet, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchLimits {
    /// Maximum number of search states expanded.
    pub max_nodes: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_nodes: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum SearchOutcome {
    Found {
        refinement: Cover,
        /// Indices into the caller's pool, in enumeration order.
        pool_indices: Vec<usize>,
        class: CoverClass,
        nodes: u64,
    },
    /// The usable pool was exhausted without a solution.
    NotFoundAtResolution { nodes: u64, usable_pool: usize },
    BudgetExceeded { nodes: u64 },
}

impl SearchOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, SearchOutcome::Found { .. })
    }
}

/// Looks for a family of pool sets that refines `cover`, covers the space
/// with every link inside one of its members, and has the nerve pattern of
/// `target`.
pub fn find_refinement(
    space: &FiniteSpace,
    cover: &Cover,
    target: CoverKind,
    pool: &[FixedBitSet],
    limits: SearchLimits,
) -> Result<SearchOutcome, CoverError> {
    cover.validate(space)?;
    if limits.max_nodes == 0 {
        return Err(CoverError::InvalidCover("search budget must be positive".into()));
    }
    if target == CoverKind::Unstructured {
        return Err(CoverError::InvalidCover("cannot search for an unstructured refinement".into()));
    }
    for (i, s) in pool.iter().enumerate() {
        if let Some(bad) = s.ones().find(|&p| p >= space.len()) {
            return Err(CoverError::InvalidCover(format!(
                "pool set {i} references unknown point {bad}"
            )));
        }
    }

    // usable candidates: nonempty, inside some member, first copy only
    let mut seen = BTreeSet::new();
    let mut ids = Vec::new();
    let mut sets = Vec::new();
    for (i, s) in pool.iter().enumerate() {
        let mut s = s.clone();
        s.grow(space.len());
        if s.is_clear() || !cover.members.iter().any(|m| s.is_subset(&m.points)) {
            continue;
        }
        if seen.insert(s.ones().collect::<Vec<_>>()) {
            ids.push(i);
            sets.push(s);
        }
    }

    let mut search = Search::new(space, sets, limits.max_nodes);
    let result = match target {
        CoverKind::ChainLike => search.chains(),
        CoverKind::CircleLike => search.circles(),
        CoverKind::TreeLike => search.trees(),
        CoverKind::Unstructured => unreachable!(),
    };
    let nodes = search.nodes;
    Ok(match result {
        Step::Found(chosen) => {
            let members: Vec<Member> = chosen
                .iter()
                .map(|&c| Member::from_set(format!("P{}", ids[c]), search.sets[c].clone()))
                .collect();
            let class = classify_nerve(&nerve_of_sets(&members).graph);
            debug_assert!(class.satisfies(target));
            SearchOutcome::Found {
                refinement: Cover::new(members),
                pool_indices: chosen.iter().map(|&c| ids[c]).collect(),
                class,
                nodes,
            }
        }
        Step::Dead => SearchOutcome::NotFoundAtResolution { nodes, usable_pool: ids.len() },
        Step::Budget => SearchOutcome::BudgetExceeded { nodes },
    })
}

enum Step {
    Found(Vec<usize>),
    Dead,
    Budget,
}

struct Search {
    sets: Vec<FixedBitSet>,
    all: FixedBitSet,
    links_at: Vec<Vec<usize>>,
    links: Vec<(usize, usize)>,
    meets: Vec<Vec<usize>>,
    meets_bits: Vec<FixedBitSet>,
    containing: Vec<Vec<usize>>,
    dead_trees: HashSet<FixedBitSet>,
    nodes: u64,
    max_nodes: u64,
}

impl Search {
    fn new(space: &FiniteSpace, sets: Vec<FixedBitSet>, max_nodes: u64) -> Self {
        let n = space.len();
        let mut links_at = vec![Vec::new(); n];
        for &(p, q) in space.links() {
            links_at[p].push(q);
            links_at[q].push(p);
        }
        let m = sets.len();
        let mut meets = vec![Vec::new(); m];
        let mut meets_bits = vec![FixedBitSet::with_capacity(m); m];
        for i in 0..m {
            for j in 0..m {
                if i != j && !sets[i].is_disjoint(&sets[j]) {
                    meets[i].push(j);
                    meets_bits[i].insert(j);
                }
            }
        }
        let mut containing = vec![Vec::new(); n];
        for (i, s) in sets.iter().enumerate() {
            for p in s.ones() {
                containing[p].push(i);
            }
        }
        let mut all = FixedBitSet::with_capacity(n);
        all.insert_range(..);
        Search {
            sets,
            all,
            links_at,
            links: space.links().to_vec(),
            meets,
            meets_bits,
            containing,
            dead_trees: HashSet::new(),
            nodes: 0,
            max_nodes,
        }
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        self.nodes > self.max_nodes
    }

    /// Candidates in preference order: most newly covered points first.
    fn ordered(&self, cands: impl Iterator<Item = usize>, covered: &FixedBitSet) -> Vec<usize> {
        let mut v: Vec<(usize, usize)> = cands
            .map(|c| (self.sets[c].difference(covered).count(), c))
            .collect();
        v.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        v.into_iter().map(|(_, c)| c).collect()
    }

    /// Retiring `last` is allowed only if every link leaving a newly retired
    /// point is already swallowed, either by `last` itself or by `next`.
    /// Nothing after `next` can reach a retired point.
    fn retire_ok(&self, retired: &FixedBitSet, last: usize, next: usize, keep: Option<usize>) -> bool {
        let l = &self.sets[last];
        let nx = &self.sets[next];
        l.difference(retired).all(|p| {
            self.links_at[p].iter().all(|&q| {
                l.contains(q)
                    || (nx.contains(p) && nx.contains(q))
                    || keep.is_some_and(|k| self.sets[k].contains(p) && self.sets[k].contains(q))
            })
        })
    }

    fn family_ok(&self, family: &[usize]) -> bool {
        let mut union = FixedBitSet::with_capacity(self.all.len());
        for &f in family {
            union.union_with(&self.sets[f]);
        }
        union == self.all
            && self.links.iter().all(|&(p, q)| {
                family.iter().any(|&f| self.sets[f].contains(p) && self.sets[f].contains(q))
            })
    }

    // ---- chains ---------------------------------------------------------

    fn chains(&mut self) -> Step {
        let mut memo = HashSet::new();
        let empty = FixedBitSet::with_capacity(self.all.len());
        let mut starts: Vec<usize> = (0..self.sets.len()).collect();
        // sets holding sample 0 first: on arcs they sit at an end
        starts.sort_by_key(|&c| (!self.sets[c].contains(0), std::cmp::Reverse(self.sets[c].count_ones(..)), c));
        for s in starts {
            let mut path = vec![s];
            match self.chain_from(&empty, s, &mut path, &mut memo) {
                Step::Dead => {}
                other => return other,
            }
        }
        Step::Dead
    }

    fn chain_from(
        &mut self,
        retired: &FixedBitSet,
        last: usize,
        path: &mut Vec<usize>,
        memo: &mut HashSet<(FixedBitSet, usize)>,
    ) -> Step {
        if self.tick() {
            return Step::Budget;
        }
        let mut covered = retired.clone();
        covered.union_with(&self.sets[last]);
        if covered == self.all {
            return Step::Found(path.clone());
        }
        let key = (retired.clone(), last);
        if memo.contains(&key) {
            return Step::Dead;
        }
        let cands: Vec<usize> = self.meets[last]
            .iter()
            .copied()
            .filter(|&c| {
                self.sets[c].is_disjoint(retired)
                    && !self.sets[c].is_subset(&self.sets[last])
                    && self.retire_ok(retired, last, c, None)
            })
            .collect();
        for c in self.ordered(cands.into_iter(), &covered) {
            path.push(c);
            match self.chain_from(&covered, c, path, memo) {
                Step::Dead => {
                    path.pop();
                }
                other => return other,
            }
        }
        memo.insert(key);
        Step::Dead
    }

    // ---- circles --------------------------------------------------------

    fn circles(&mut self) -> Step {
        // rotate so that the first set holds sample 0
        let mut firsts = self.containing.first().cloned().unwrap_or_default();
        firsts.sort_by_key(|&c| (std::cmp::Reverse(self.sets[c].count_ones(..)), c));
        let mut memo = HashSet::new();
        let empty = FixedBitSet::with_capacity(self.all.len());
        for first in firsts {
            let seconds = self.ordered(self.meets[first].clone().into_iter(), &self.sets[first].clone());
            for second in seconds {
                let mut path = vec![first, second];
                match self.circle_from(first, &empty, second, &mut path, &mut memo) {
                    Step::Dead => {}
                    other => return other,
                }
            }
        }
        Step::Dead
    }

    fn circle_from(
        &mut self,
        first: usize,
        mid: &FixedBitSet,
        last: usize,
        path: &mut Vec<usize>,
        memo: &mut HashSet<(usize, FixedBitSet, usize)>,
    ) -> Step {
        if self.tick() {
            return Step::Budget;
        }
        let key = (first, mid.clone(), last);
        if memo.contains(&key) {
            return Step::Dead;
        }
        let mut covered = mid.clone();
        covered.union_with(&self.sets[first]);
        covered.union_with(&self.sets[last]);
        let mut new_mid = mid.clone();
        new_mid.union_with(&self.sets[last]);
        let cands: Vec<usize> = self.meets[last]
            .iter()
            .copied()
            .filter(|&c| c != first && self.sets[c].is_disjoint(mid))
            .collect();
        for c in self.ordered(cands.into_iter(), &covered) {
            if !self.retire_ok(mid, last, c, Some(first)) {
                continue;
            }
            let closing = self.meets_bits[first].contains(c);
            path.push(c);
            if closing {
                // a closing set may not touch anything retired before `last`
                if path.len() >= 3 && self.family_ok(path) {
                    return Step::Found(path.clone());
                }
                path.pop();
                continue;
            }
            if self.sets[c].is_subset(&self.sets[last]) {
                path.pop();
                continue;
            }
            match self.circle_from(first, &new_mid, c, path, memo) {
                Step::Dead => {
                    path.pop();
                }
                other => return other,
            }
        }
        memo.insert(key);
        Step::Dead
    }

    // ---- trees ----------------------------------------------------------

    fn trees(&mut self) -> Step {
        let mut chosen = Vec::new();
        self.tree_from(&mut chosen)
    }

    fn first_unmet(&self, chosen: &[usize]) -> Option<(usize, Option<usize>)> {
        let mut covered = FixedBitSet::with_capacity(self.all.len());
        for &c in chosen {
            covered.union_with(&self.sets[c]);
        }
        if let Some(p) = (0..self.all.len()).find(|&p| !covered.contains(p)) {
            return Some((p, None));
        }
        self.links
            .iter()
            .find(|&&(p, q)| {
                !chosen.iter().any(|&c| self.sets[c].contains(p) && self.sets[c].contains(q))
            })
            .map(|&(p, q)| (p, Some(q)))
    }

    /// Adding `c` keeps the nerve a forest iff its chosen neighbours lie in
    /// pairwise distinct components.
    fn keeps_forest(&self, chosen: &[usize], c: usize) -> bool {
        let k = chosen.len();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut y = x;
            while parent[y] != r {
                let nx = parent[y];
                parent[y] = r;
                y = nx;
            }
            r
        }
        for i in 0..k {
            for j in i + 1..k {
                if self.meets_bits[chosen[i]].contains(chosen[j]) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut roots = BTreeSet::new();
        for (i, &m) in chosen.iter().enumerate().take(k) {
            if self.meets_bits[c].contains(m) && !roots.insert(find(&mut parent, i)) {
                return false;
            }
        }
        true
    }

    fn tree_from(&mut self, chosen: &mut Vec<usize>) -> Step {
        if self.tick() {
            return Step::Budget;
        }
        let Some((p, q)) = self.first_unmet(chosen) else {
            return Step::Found(chosen.clone());
        };
        // the state only depends on which sets are chosen
        let mut key = FixedBitSet::with_capacity(self.sets.len());
        key.extend(chosen.iter().copied());
        if self.dead_trees.contains(&key) {
            return Step::Dead;
        }
        let mut covered = FixedBitSet::with_capacity(self.all.len());
        for &c in chosen.iter() {
            covered.union_with(&self.sets[c]);
        }
        let cands: Vec<usize> = self.containing[p]
            .iter()
            .copied()
            .filter(|&c| {
                !chosen.contains(&c)
                    && q.is_none_or(|q| self.sets[c].contains(q))
                    && self.keeps_forest(chosen, c)
            })
            .collect();
        for c in self.ordered(cands.into_iter(), &covered) {
            chosen.push(c);
            match self.tree_from(chosen) {
                Step::Dead => {
                    chosen.pop();
                }
                other => return other,
            }
        }
        self.dead_trees.insert(key);
        Step::Dead
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{path_pool, Member};
    use crate::graph::Graph;

    fn arc(n: usize, start: usize, len: usize) -> Vec<usize> {
        (0..len).map(|i| (start + i) % n).collect()
    }

    fn arcs_of(space_len: usize, len: usize) -> Vec<FixedBitSet> {
        (0..space_len)
            .map(|s| {
                let mut b = FixedBitSet::with_capacity(space_len);
                b.extend(arc(space_len, s, len));
                b
            })
            .collect()
    }

    #[test]
    fn quarter_arcs_of_a_circle_refine_to_a_circle() {
        let space = FiniteSpace::sampled(&Graph::cycle(72), 1);
        let cover = Cover::new((0..4).map(|i| Member::new(format!("Q{i}"), arc(72, 18 * i, 22))).collect());
        let out = find_refinement(&space, &cover, CoverKind::CircleLike, &arcs_of(72, 13), SearchLimits::default()).unwrap();
        let SearchOutcome::Found { refinement, class, .. } = out else { panic!("{out:?}") };
        assert_eq!(class.kind(), CoverKind::CircleLike);
        assert!(crate::cover::is_refinement(&space, &refinement, &cover).unwrap().is_some());
        assert!(refinement.links_inside_members(&space));
    }

    #[test]
    fn arc_refines_to_a_chain() {
        let space = FiniteSpace::sampled(&Graph::path(16), 1);
        let cover = Cover::new(vec![
            Member::new("a", 0..6),
            Member::new("b", 4..11),
            Member::new("c", 9..14),
            Member::new("d", 12..17),
        ]);
        // dyadic subintervals of [0,16]
        let mut pool = Vec::new();
        for len in [2usize, 4, 8, 16] {
            for s in (0..=16 - len).step_by(len / 2) {
                let mut b = FixedBitSet::with_capacity(17);
                b.insert_range(s..s + len + 1);
                pool.push(b);
            }
        }
        let out = find_refinement(&space, &cover, CoverKind::ChainLike, &pool, SearchLimits::default()).unwrap();
        assert!(matches!(out, SearchOutcome::Found { class: CoverClass::ChainLike(_), .. }), "{out:?}");
    }

    #[test]
    fn figure_eight_has_no_fine_chain_refinement() {
        use crate::graph::{MetricBall, Point};
        use crate::rational::q;
        let g = Graph::figure_eight(4, 4);
        let space = FiniteSpace::sampled(&g, 2);
        // stars of the vertices: each vertex with its adjacent midpoints
        let cover = Cover::from_sets(
            g.vertices().map(|v| space.ball(&MetricBall::open(Point::Vertex(v), q(3, 4)))),
        );
        assert!(cover.is_open_in(&space));
        let pool = path_pool(&space, 1, 3);
        let out = find_refinement(&space, &cover, CoverKind::ChainLike, &pool, SearchLimits::default()).unwrap();
        assert!(matches!(out, SearchOutcome::NotFoundAtResolution { .. }), "{out:?}");
        // the two loops on their own do form a chain
        let loops = Cover::from_sets([
            space.select(|p| p.anchors().iter().all(|&(v, _)| v <= 3)),
            space.select(|p| p.anchors().iter().all(|&(v, _)| v == 0 || v >= 4)),
        ]);
        let whole = path_pool(&space, 1, 9);
        let out = find_refinement(&space, &loops, CoverKind::ChainLike, &whole, SearchLimits::default()).unwrap();
        assert!(out.is_found());
    }

    #[test]
    fn budget_is_reported_separately() {
        let space = FiniteSpace::sampled(&Graph::cycle(24), 1);
        let cover = Cover::new((0..3).map(|i| Member::new(i.to_string(), arc(24, 8 * i, 10))).collect());
        let out = find_refinement(&space, &cover, CoverKind::ChainLike, &arcs_of(24, 3), SearchLimits { max_nodes: 5 }).unwrap();
        assert!(matches!(out, SearchOutcome::BudgetExceeded { .. }));
    }

    #[test]
    fn trees_on_a_spider() {
        let g = Graph::spider(3, 2);
        let space = FiniteSpace::sampled(&g, 2);
        let whole = Cover::new(vec![Member::from_set("all", space.full())]);
        let pool = path_pool(&space, 2, 4);
        let out = find_refinement(&space, &whole, CoverKind::TreeLike, &pool, SearchLimits::default()).unwrap();
        let SearchOutcome::Found { class, refinement, .. } = out else { panic!() };
        assert!(class.satisfies(CoverKind::TreeLike));
        assert!(refinement.links_inside_members(&space));
    }
}
