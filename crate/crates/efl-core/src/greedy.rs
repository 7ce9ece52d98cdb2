//! Greedy colorers: list greedy, α-bounded splitting, medium-edge coloring,
//! DSATUR on line graphs, and the large/medium coloring stage.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extremal::extremal_color;
use crate::hypercore::{
    is_fpp_extremal_size, is_huge_size, line_graph, volume, EdgeColoring, Hierarchy, LinearHypergraph,
};
use crate::ordering::{default_iter_cap, reorder, size_order, EdgeOrdering, ReorderOutcome};

/// Per-edge allowed colors over a shared palette.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListAssignment {
    palette: Vec<usize>,
    lists: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ListError {
    #[error("list of edge {0} leaves the palette")]
    NotInPalette(usize),
}

impl ListAssignment {
    /// Lists are sorted and deduplicated; each must be a subset of `palette`.
    pub fn new(palette: Vec<usize>, lists: Vec<Vec<usize>>) -> Result<Self, ListError> {
        let mut palette = palette;
        palette.sort_unstable();
        palette.dedup();
        let mut out = Vec::with_capacity(lists.len());
        for (e, mut l) in lists.into_iter().enumerate() {
            l.sort_unstable();
            l.dedup();
            if l.iter().any(|c| palette.binary_search(c).is_err()) {
                return Err(ListError::NotInPalette(e));
            }
            out.push(l);
        }
        Ok(Self { palette, lists: out })
    }

    /// Every edge may use every color of `palette`.
    pub fn uniform(m: usize, palette: Vec<usize>) -> Self {
        let mut palette = palette;
        palette.sort_unstable();
        palette.dedup();
        Self { lists: vec![palette.clone(); m], palette }
    }

    pub fn palette(&self) -> &[usize] {
        &self.palette
    }

    pub fn list(&self, e: usize) -> &[usize] {
        &self.lists[e]
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GreedyError {
    #[error("no admissible color left for edge {0}")]
    ListExhausted(usize),
    #[error("ordering covers {ordering} edges but the hypergraph has {edges}")]
    OrderingMismatch { ordering: usize, edges: usize },
    #[error("list assignment covers {lists} edges but the hypergraph has {edges}")]
    ListsMismatch { lists: usize, edges: usize },
}

/// Vertex cover of every color class, keyed by color.
pub fn class_covers(h: &LinearHypergraph, col: &EdgeColoring) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for e in 0..h.m() {
        if let Some(c) = col.get(e) {
            *out.entry(c).or_insert(0) += h.edge(e).len();
        }
    }
    out
}

/// Every color is used once or covers at most `alpha n` vertices.
pub fn is_alpha_bounded(h: &LinearHypergraph, col: &EdgeColoring, alpha: f64) -> bool {
    let limit = alpha * h.n() as f64 + 1e-9;
    col.classes()
        .values()
        .all(|cls| cls.len() <= 1 || cls.iter().map(|&e| h.edge(e).len()).sum::<usize>() as f64 <= limit)
}

/// Whether `|lists(e)| ≥ fwddeg(e) + alpha1 n` for every edge.
pub fn list_slack_holds(h: &LinearHypergraph, ord: &EdgeOrdering, lists: &ListAssignment, alpha1: f64) -> bool {
    let need = alpha1 * h.n() as f64;
    (0..h.m()).all(|e| {
        let fd = h.neighbors(e).into_iter().filter(|&f| ord.precedes(f, e)).count();
        lists.list(e).len() as f64 + 1e-9 >= fd as f64 + need
    })
}

/// Running state shared by the greedy phases: the coloring so far and the
/// vertex cover of each color.
struct GreedyState<'a> {
    h: &'a LinearHypergraph,
    col: EdgeColoring,
    cover: HashMap<usize, usize>,
    relaxed: usize,
}

enum Pick {
    Strict,
    Fresh(usize),
}

impl<'a> GreedyState<'a> {
    fn new(h: &'a LinearHypergraph) -> Self {
        Self { h, col: EdgeColoring::uncolored(h.m()), cover: HashMap::new(), relaxed: 0 }
    }

    fn assign(&mut self, e: usize, c: usize) {
        self.col.set(e, c);
        *self.cover.entry(c).or_insert(0) += self.h.edge(e).len();
    }

    fn used(&self, c: usize) -> bool {
        self.cover.get(&c).is_some_and(|&k| k > 0)
    }

    fn neighbour_colors(&self, e: usize) -> BTreeSet<usize> {
        self.h.neighbors(e).into_iter().filter_map(|f| self.col.get(f)).collect()
    }

    /// Colors `e` from `list` with a color free at `e` whose class stays
    /// within `alpha2 n` vertices (an unused color always qualifies). Under
    /// [`Pick::Fresh`] falls back to any listed color free at `e`, then to an
    /// unused color `>= base`.
    fn color_edge(&mut self, e: usize, list: &[usize], alpha2: f64, pick: &Pick) -> Option<usize> {
        let limit = alpha2 * self.h.n() as f64 + 1e-9;
        let size = self.h.edge(e).len();
        let nbr = self.neighbour_colors(e);
        let strict = list.iter().copied().find(|&c| {
            let cov = self.cover.get(&c).copied().unwrap_or(0);
            !nbr.contains(&c) && (cov == 0 || (cov + size) as f64 <= limit)
        });
        let c = match (strict, pick) {
            (Some(c), _) => c,
            (None, Pick::Strict) => return None,
            (None, _) => {
                self.relaxed += 1;
                let loose = list.iter().copied().find(|c| !nbr.contains(c));
                match (loose, pick) {
                    (Some(c), _) => c,
                    (None, Pick::Fresh(base)) => (*base..).find(|&c| !self.used(c)).expect("unbounded range"),
                    (None, _) => return None,
                }
            }
        };
        self.assign(e, c);
        Some(c)
    }

    /// Colors `seq` in order with list `lists(e)`, big edges first.
    fn run(
        &mut self,
        seq: &[usize],
        lists: &dyn Fn(usize) -> Vec<usize>,
        alpha2: f64,
        pick: &Pick,
    ) -> Result<(), usize> {
        let half = alpha2 * self.h.n() as f64 / 2.0;
        let (big, rest): (Vec<usize>, Vec<usize>) =
            seq.iter().copied().partition(|&e| self.h.edge(e).len() as f64 >= half - 1e-9);
        for e in big.into_iter().chain(rest) {
            let l = lists(e);
            if self.color_edge(e, &l, alpha2, pick).is_none() {
                return Err(e);
            }
        }
        Ok(())
    }
}

/// Greedy list coloring along `ord`, with edges of size at least `alpha2 n / 2`
/// moved to the front. Each edge takes the smallest listed color that no
/// earlier neighbour has and that is unused or still covers at most
/// `alpha2 n` vertices after adding the edge. The result is proper,
/// respects the lists and is `alpha2`-bounded. `alpha1` is the slack the
/// caller promises; it is not needed to run the procedure.
pub fn list_greedy(
    h: &LinearHypergraph,
    ord: &EdgeOrdering,
    lists: &ListAssignment,
    _alpha1: f64,
    alpha2: f64,
) -> Result<EdgeColoring, GreedyError> {
    if ord.len() != h.m() {
        return Err(GreedyError::OrderingMismatch { ordering: ord.len(), edges: h.m() });
    }
    if lists.len() != h.m() {
        return Err(GreedyError::ListsMismatch { lists: lists.len(), edges: h.m() });
    }
    let mut st = GreedyState::new(h);
    st.run(ord.perm(), &|e| lists.list(e).to_vec(), alpha2, &Pick::Strict).map_err(GreedyError::ListExhausted)?;
    let mut col = st.col;
    col.palette_size = col.palette_size.max(lists.palette().last().map_or(0, |&c| c + 1));
    Ok(col)
}

/// First-fit along `ord`: each edge takes the smallest color no earlier
/// neighbour has. Uses at most `max fwddeg + 1` colors.
pub fn first_fit(h: &LinearHypergraph, ord: &EdgeOrdering) -> EdgeColoring {
    let mut col = EdgeColoring::uncolored(h.m());
    let mut used: Vec<usize> = Vec::new();
    for &e in ord.perm() {
        used.clear();
        used.extend(h.edge(e).iter().flat_map(|&v| h.incident(v)).filter_map(|&f| col.get(f)));
        used.sort_unstable();
        used.dedup();
        let c = used.iter().enumerate().find(|(i, &c)| *i != c).map_or(used.len(), |(i, _)| i);
        col.set(e, c);
    }
    col.palette_size = col.colors.iter().flatten().max().map_or(0, |&c| c + 1);
    col
}

/// Splits every class covering more than `alpha n` vertices into
/// sub-matchings of cover at most `alpha n` (or single edges). Edges are
/// packed largest first, so each closed sub-matching covers more than
/// `alpha n / 2` vertices. The first part keeps the old color; the others get
/// new colors numbered from the old palette size.
pub fn split_bounded(h: &LinearHypergraph, col: &EdgeColoring, alpha: f64, _r: usize) -> EdgeColoring {
    let limit = alpha * h.n() as f64 + 1e-9;
    let mut out = col.clone();
    let mut next = col.palette_size.max(col.colors.iter().flatten().max().map_or(0, |&c| c + 1));
    for (c, mut cls) in col.classes() {
        let cov: usize = cls.iter().map(|&e| h.edge(e).len()).sum();
        if cls.len() <= 1 || cov as f64 <= limit {
            continue;
        }
        cls.sort_by_key(|&e| (std::cmp::Reverse(h.edge(e).len()), e));
        let mut parts: Vec<Vec<usize>> = Vec::new();
        let mut cur: Vec<usize> = Vec::new();
        let mut cur_cov = 0usize;
        for e in cls {
            let k = h.edge(e).len();
            if k as f64 > limit {
                parts.push(vec![e]);
                continue;
            }
            if (cur_cov + k) as f64 > limit {
                parts.push(std::mem::take(&mut cur));
                cur_cov = 0;
            }
            cur.push(e);
            cur_cov += k;
        }
        if !cur.is_empty() {
            parts.push(cur);
        }
        for (i, part) in parts.into_iter().enumerate() {
            let color = if i == 0 {
                c
            } else {
                next += 1;
                next - 1
            };
            for e in part {
                out.set(e, color);
            }
        }
    }
    out.palette_size = out.palette_size.max(next);
    out
}

/// DSATUR vertex coloring of a graph given by adjacency lists. Colors are
/// `0..k`; ties on saturation go to larger degree, then lower index.
pub fn dsatur_vertices(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut color = vec![usize::MAX; n];
    let mut seen: Vec<Vec<bool>> = vec![Vec::new(); n];
    let mut sat = vec![0usize; n];
    let mut heap = BTreeSet::new();
    for v in 0..n {
        heap.insert((0usize, adj[v].len(), std::cmp::Reverse(v)));
    }
    while let Some(&top) = heap.iter().next_back() {
        heap.remove(&top);
        let v = top.2 .0;
        let used = &seen[v];
        let c = (0..).find(|&c| c >= used.len() || !used[c]).unwrap();
        color[v] = c;
        for &w in &adj[v] {
            if color[w] != usize::MAX {
                continue;
            }
            let s = &mut seen[w];
            if s.len() <= c {
                s.resize(c + 1, false);
            }
            if !s[c] {
                s[c] = true;
                heap.remove(&(sat[w], adj[w].len(), std::cmp::Reverse(w)));
                sat[w] += 1;
                heap.insert((sat[w], adj[w].len(), std::cmp::Reverse(w)));
            }
        }
    }
    color
}

/// DSATUR on the line graph. Returns the coloring and its number of colors.
pub fn dsatur_line(h: &LinearHypergraph) -> (EdgeColoring, usize) {
    let colors = dsatur_vertices(&line_graph(h));
    let k = colors.iter().max().map_or(0, |&c| c + 1);
    (EdgeColoring::from_colors(colors), k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumColoring {
    pub coloring: EdgeColoring,
    pub colors: usize,
    /// Whether `Δ ≤ n/(r1−1)` and the base coloring used at most `2n/r1`
    /// colors, the conditions under which `colors ≤ γn` is asserted.
    pub bound_applies: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MediumError {
    #[error("medium coloring used {achieved} colors, above the budget {budget}")]
    BudgetExceeded { achieved: usize, budget: f64, coloring: Box<MediumColoring> },
}

/// γ-bounded coloring of medium edges: DSATUR on the line graph, then
/// [`split_bounded`] with `alpha = gamma`.
pub fn color_medium(
    h_med: &LinearHypergraph,
    gamma: f64,
    _r0: usize,
    r1: usize,
) -> Result<MediumColoring, MediumError> {
    let n = h_med.n() as f64;
    let (base, k) = dsatur_line(h_med);
    let coloring = split_bounded(h_med, &base, gamma, r1.saturating_sub(1));
    let colors = coloring.num_colors_used();
    let deg_ok = r1 >= 2 && h_med.max_degree() as f64 <= n / (r1 as f64 - 1.0) + 1e-9;
    let base_ok = k as f64 <= 2.0 * n / r1.max(1) as f64 + 1e-9;
    let bound_applies = deg_ok && base_ok;
    let out = MediumColoring { coloring, colors, bound_applies };
    let budget = gamma * n;
    if bound_applies && colors as f64 > budget + 1e-9 {
        return Err(MediumError::BudgetExceeded { achieved: colors, budget, coloring: Box::new(out) });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LargeType {
    A,
    B,
}

/// Which branch produced the coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LargeCase {
    /// The second reordering (or the first) left no window.
    Case1,
    /// Both reorderings left windows and the second window's edges are
    /// below FPP-extremal size.
    Case21,
    /// Both reorderings left windows of FPP-extremal size.
    Case22,
    /// The type A route missed its color budget; edges of FPP-extremal size
    /// or larger were recolored by the extremal colorer.
    ExtremalFallback,
}

/// Per-clause outcome of the type conditions, found by scanning the coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeClauses {
    /// At most `(1−σ)n` colors for type A, at most `n` for type B.
    pub budget: bool,
    /// Type A: huge colors are used once. Type B: huge colors cover at most `δn`.
    pub huge: bool,
    /// Medium edges use `C_med`, which is small and whose colors cover at most `γ1 n`.
    pub medium: bool,
    /// Other colors cover at most `βn`.
    pub class_bound: bool,
    /// Type B only: FPP-extremal volume at least `1−δ`.
    pub volume: Option<bool>,
}

impl TypeClauses {
    pub fn all(&self) -> bool {
        self.budget && self.huge && self.medium && self.class_bound && self.volume.unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeEdgeResult {
    pub coloring: EdgeColoring,
    pub kind: LargeType,
    pub case: LargeCase,
    pub c_med: Vec<usize>,
    pub covers: BTreeMap<usize, usize>,
    pub huge_colors: Vec<usize>,
    pub fpp_volume: Option<f64>,
    pub clauses: TypeClauses,
    /// Edges for which the greedy phases had to drop the boundedness rule or
    /// leave their palette.
    pub relaxations: usize,
    pub notes: Vec<String>,
}

/// Medium edges of the stage: size at most `r0`.
fn is_medium(h: &LinearHypergraph, e: usize, hier: &Hierarchy) -> bool {
    h.edge(e).len() <= hier.r0
}

/// Huge edges of the stage: larger than `r0` and of size at least `βn/4`.
fn is_huge(h: &LinearHypergraph, e: usize, hier: &Hierarchy) -> bool {
    !is_medium(h, e, hier) && is_huge_size(h.edge(e).len(), h.n(), hier.beta)
}

/// Scans a coloring for the conditions of the given type.
pub fn check_type_clauses(
    h: &LinearHypergraph,
    hier: &Hierarchy,
    col: &EdgeColoring,
    kind: LargeType,
    c_med: &[usize],
    fpp_volume: Option<f64>,
) -> TypeClauses {
    let n = h.n() as f64;
    let covers = class_covers(h, col);
    let classes = col.classes();
    let used = covers.len() as f64;
    let huge_colors: BTreeSet<usize> = (0..h.m()).filter(|&e| is_huge(h, e, hier)).filter_map(|e| col.get(e)).collect();
    let in_med: BTreeSet<usize> = c_med.iter().copied().collect();
    let (budget, med_size, huge) = match kind {
        LargeType::A => {
            (used <= (1.0 - hier.sigma) * n + 1e-9, hier.gamma1, huge_colors.iter().all(|c| classes[c].len() == 1))
        }
        LargeType::B => {
            (used <= n + 1e-9, hier.gamma2, huge_colors.iter().all(|c| covers[c] as f64 <= hier.delta * n + 1e-9))
        }
    };
    let medium = in_med.len() as f64 <= med_size * n + 1e-9
        && (0..h.m()).filter(|&e| is_medium(h, e, hier)).all(|e| col.get(e).is_some_and(|c| in_med.contains(&c)))
        && in_med.iter().all(|c| covers.get(c).map_or(0, |&k| k) as f64 <= hier.gamma1 * n + 1e-9);
    let class_bound = covers
        .iter()
        .filter(|(c, _)| !in_med.contains(c) && !huge_colors.contains(c))
        .all(|(_, &k)| k as f64 <= hier.beta * n + 1e-9);
    let volume = match kind {
        LargeType::A => None,
        LargeType::B => Some(fpp_volume.is_some_and(|v| v >= 1.0 - hier.delta - 1e-9)),
    };
    TypeClauses { budget, huge, medium, class_bound, volume }
}

/// Runs the reordering on a subset of edges. Returns the ordering of the
/// subset (as original ids) and, for a window outcome, the window and `e*`.
struct SubOrder {
    seq: Vec<usize>,
    window: Option<(Vec<usize>, usize)>,
}

fn reorder_subset(h: &LinearHypergraph, ids: &[usize], tau: f64, k: f64, notes: &mut Vec<String>) -> SubOrder {
    let (ok, tiny): (Vec<usize>, Vec<usize>) = ids.iter().copied().partition(|&e| h.edge(e).len() >= 2);
    let sub = h.restrict(&ok);
    let out = match reorder(&sub, tau, k, default_iter_cap(&sub)) {
        Ok(o) => o,
        Err(err) => {
            notes.push(format!("reorder(tau={tau:.4}) failed: {err}; using size order"));
            ReorderOutcome::Good(size_order(&sub))
        }
    };
    let mut seq: Vec<usize> = tiny;
    seq.extend(out.ordering().perm().iter().map(|&i| ok[i]));
    let window = match out {
        ReorderOutcome::Good(_) => None,
        ReorderOutcome::Window { w, e_star, stats, .. } => {
            notes.push(format!(
                "reorder(tau={tau:.4}): window of {} edges, volume {:.4} (target {:.4})",
                w.len(),
                stats.volume,
                stats.volume_target
            ));
            Some((w.into_iter().map(|i| ok[i]).collect(), ok[e_star]))
        }
    };
    SubOrder { seq, window }
}

fn sub_coloring_into(st: &mut GreedyState, ids: &[usize], sub: &EdgeColoring, offset: usize) {
    for (i, &e) in ids.iter().enumerate() {
        let c = sub.get(i).expect("sub-coloring is complete");
        st.assign(e, c + offset);
    }
}

fn next_free(st: &GreedyState) -> usize {
    st.cover.keys().max().map_or(0, |&c| c + 1)
}

/// γ1-bounded coloring of the listed medium edges, colors from 0.
fn color_medium_subset(h: &LinearHypergraph, ids: &[usize], hier: &Hierarchy) -> EdgeColoring {
    let sub = h.restrict(ids);
    match color_medium(&sub, hier.gamma1, hier.r0, hier.r1) {
        Ok(m) => m.coloring,
        Err(MediumError::BudgetExceeded { coloring, .. }) => coloring.coloring,
    }
}

/// Colors `left` with at most two edges per color (DSATUR if the extremal
/// colorer fails), then `good2` from `[0,n)` minus the huge colors, then
/// `good1` (which holds the medium edges) from a set `C_med` of `γ2 n`
/// non-huge colors.
fn extremal_route_run<'a>(
    h: &'a LinearHypergraph,
    hier: &Hierarchy,
    left: &[usize],
    good2: &[usize],
    good1: &[usize],
    notes: &mut Vec<String>,
) -> (GreedyState<'a>, Vec<usize>) {
    let n = h.n();
    let mut st = GreedyState::new(h);
    let sub = h.restrict(left);
    let sub_col = match extremal_color(&sub, hier.delta) {
        Ok(c) => c,
        Err(err) => {
            notes.push(format!("extremal colorer failed ({err}); DSATUR used on the leftover"));
            dsatur_line(&sub).0
        }
    };
    sub_coloring_into(&mut st, left, &sub_col, 0);
    let c_huge: BTreeSet<usize> =
        left.iter().filter(|&&e| is_huge(h, e, hier)).filter_map(|&e| st.col.get(e)).collect();
    let top = n.max(next_free(&st));
    let list2: Vec<usize> = (0..n).filter(|c| !c_huge.contains(c)).collect();
    st.run(good2, &|_| list2.clone(), hier.beta / 5.0, &Pick::Fresh(top)).expect("fresh colors never run out");
    let k = ((hier.gamma2 * n as f64).floor() as usize).max(1);
    let c_med: Vec<usize> = (0..n).filter(|c| !c_huge.contains(c)).take(k).collect();
    let top = next_free(&st).max(n);
    st.run(good1, &|_| c_med.clone(), hier.gamma1 / 2.0, &Pick::Fresh(top)).expect("fresh colors never run out");
    (st, c_med)
}

/// Colors the large and medium edges of `h` in the type A / type B format.
/// Edges of size at most `r0` count as medium; huge edges are the non-medium
/// edges of size at least `βn/4`.
pub fn color_large_medium(h: &LinearHypergraph, hier: &Hierarchy, seed: u64) -> LargeEdgeResult {
    let _ = seed;
    let n = h.n();
    let nf = n as f64;
    let mut notes = Vec::new();
    let med: Vec<usize> = (0..h.m()).filter(|&e| is_medium(h, e, hier)).collect();
    let huge: Vec<usize> = (0..h.m()).filter(|&e| is_huge(h, e, hier)).collect();
    let is_med: Vec<bool> = (0..h.m()).map(|e| is_medium(h, e, hier)).collect();
    let is_hg: Vec<bool> = (0..h.m()).map(|e| is_huge(h, e, hier)).collect();
    let h_prime: Vec<usize> = (0..h.m()).filter(|&e| !is_hg[e]).collect();

    let ord1 = reorder_subset(h, &h_prime, 1.0 - hier.gamma2 / 3.0, hier.gamma2.powi(-2), &mut notes);
    let (good1, left1): (Vec<usize>, Vec<usize>) = match &ord1.window {
        None => (ord1.seq.clone(), Vec::new()),
        Some((_, e1)) => {
            let p = ord1.seq.iter().position(|f| f == e1).expect("e* in ordering");
            (ord1.seq[p + 1..].to_vec(), ord1.seq[..=p].to_vec())
        }
    };
    let ord2 = if left1.is_empty() { None } else { Some(reorder_subset(h, &left1, 3.0 * hier.sigma, 1.0, &mut notes)) };

    let a_budget = (1.0 - hier.sigma) * nf;
    let mut case;
    let mut kind = LargeType::A;
    let mut fpp_volume = None;
    let mut st = GreedyState::new(h);
    let mut c_med: Vec<usize>;

    match ord2.as_ref().and_then(|o| o.window.clone().map(|w| (o.seq.clone(), w))) {
        None => {
            case = LargeCase::Case1;
            let med_col = color_medium_subset(h, &med, hier);
            sub_coloring_into(&mut st, &med, &med_col, 0);
            c_med = st.cover.keys().copied().collect();
            let base = next_free(&st);
            let p = ((1.0 - 1.5 * hier.sigma) * nf).floor().max(1.0) as usize;
            let palette: Vec<usize> = (base..base + p).collect();
            let mut seq: Vec<usize> = huge.clone();
            if let Some(o2) = &ord2 {
                seq.extend(o2.seq.iter().copied().filter(|&e| !is_med[e]));
            }
            seq.extend(good1.iter().copied().filter(|&e| !is_med[e]));
            st.run(&seq, &|_| palette.clone(), hier.beta / 5.0, &Pick::Fresh(base + p))
                .expect("fresh colors never run out");
        }
        Some((seq2, (w2, e2))) => {
            let p2 = seq2.iter().position(|&f| f == e2).expect("e* in ordering");
            let good2: Vec<usize> = seq2[p2 + 1..].to_vec();
            let in_good2: BTreeSet<usize> = good2.iter().copied().collect();
            let left2: Vec<usize> =
                left1.iter().copied().chain(huge.iter().copied()).filter(|e| !in_good2.contains(e)).collect();
            let r3 = h.edge(e2).len() as f64;
            let in_w2: BTreeSet<usize> = w2.iter().copied().collect();
            let h3: Vec<usize> = left2.iter().copied().filter(|e| !in_w2.contains(e)).collect();
            let ord3 = reorder_subset(h, &h3, 1.0 - 1.0 / 2000.0, 2000.0f64.powi(2), &mut notes);
            if ord3.window.is_some() {
                notes.push("third reordering left a window".into());
            }
            if r3 < (1.0 - hier.delta) * nf.sqrt() {
                case = LargeCase::Case21;
                let med_col = color_medium_subset(h, &med, hier);
                sub_coloring_into(&mut st, &med, &med_col, 0);
                c_med = st.cover.keys().copied().collect();
                // Sparse window: DSATUR, then split to β/5-bounded classes.
                let w_big: Vec<usize> = w2.iter().copied().filter(|&e| !is_med[e]).collect();
                let sub = h.restrict(&w_big);
                let (base_col, _) = dsatur_line(&sub);
                let split = split_bounded(&sub, &base_col, hier.beta / 5.0, hier.r0);
                let off = next_free(&st);
                sub_coloring_into(&mut st, &w_big, &split, off);
                let h3_big: Vec<usize> = ord3.seq.iter().copied().filter(|&e| !is_med[e]).collect();
                let off = next_free(&st);
                let pal3: Vec<usize> = (off..off + h3_big.len()).collect();
                st.run(&h3_big, &|_| pal3.clone(), hier.beta / 5.0, &Pick::Fresh(off + h3_big.len()))
                    .expect("fresh colors never run out");
                let c1: BTreeSet<usize> = st.cover.keys().copied().filter(|c| !c_med.contains(c)).collect();
                let c_huge: BTreeSet<usize> = huge.iter().filter_map(|&e| st.col.get(e)).collect();
                let p = ((1.0 - 1.5 * hier.sigma) * nf).floor() as usize;
                let top = next_free(&st);
                let c2: Vec<usize> = (top..top + p.saturating_sub(c1.len())).collect();
                let list: Vec<usize> =
                    c1.iter().copied().chain(c2.iter().copied()).filter(|c| !c_huge.contains(c)).collect();
                let fresh = top + c2.len();
                let seq: Vec<usize> = good2.iter().chain(good1.iter()).copied().filter(|&e| !is_med[e]).collect();
                st.run(&seq, &|_| list.clone(), hier.beta / 5.0, &Pick::Fresh(fresh))
                    .expect("fresh colors never run out");
            } else {
                case = LargeCase::Case22;
                kind = LargeType::B;
                let left: Vec<usize> = left2.iter().copied().filter(|&e| !is_med[e]).collect();
                let g2: Vec<usize> = good2.iter().copied().filter(|&e| !is_med[e]).collect();
                let g1: Vec<usize> = good2
                    .iter()
                    .chain(left2.iter())
                    .copied()
                    .filter(|&e| is_med[e])
                    .chain(good1.iter().copied())
                    .collect();
                let fpp: Vec<usize> =
                    w2.iter().copied().filter(|&e| is_fpp_extremal_size(h.edge(e).len(), n, hier.delta)).collect();
                fpp_volume = Some(volume(h, &fpp));
                let (s, cm) = extremal_route_run(h, hier, &left, &g2, &g1, &mut notes);
                st = s;
                c_med = cm;
            }
        }
    }

    if kind == LargeType::A && st.cover.len() as f64 > a_budget + 1e-9 {
        let root = nf.sqrt();
        let left: Vec<usize> =
            (0..h.m()).filter(|&e| !is_med[e] && h.edge(e).len() as f64 >= (1.0 - hier.delta) * root - 1e-9).collect();
        if !left.is_empty() {
            let in_left: BTreeSet<usize> = left.iter().copied().collect();
            let g2: Vec<usize> = (0..h.m()).filter(|&e| !is_med[e] && !in_left.contains(&e)).collect();
            let mut fb_notes = Vec::new();
            let (s, cm) = extremal_route_run(h, hier, &left, &g2, &med, &mut fb_notes);
            if s.cover.len() <= n && s.cover.len() <= st.cover.len() {
                notes.push(format!(
                    "type A route used {} colors > (1-sigma)n = {:.1}; extremal route used {}",
                    st.cover.len(),
                    a_budget,
                    s.cover.len()
                ));
                notes.extend(fb_notes);
                let fpp: Vec<usize> =
                    left.iter().copied().filter(|&e| is_fpp_extremal_size(h.edge(e).len(), n, hier.delta)).collect();
                fpp_volume = Some(volume(h, &fpp));
                st = s;
                c_med = cm;
                kind = LargeType::B;
                case = LargeCase::ExtremalFallback;
            }
        }
    }

    let mut coloring = st.col;
    coloring.palette_size = coloring.colors.iter().flatten().max().map_or(0, |&c| c + 1);
    let covers = class_covers(h, &coloring);
    let huge_colors: Vec<usize> =
        huge.iter().filter_map(|&e| coloring.get(e)).collect::<BTreeSet<_>>().into_iter().collect();
    c_med.sort_unstable();
    c_med.dedup();
    let clauses = check_type_clauses(h, hier, &coloring, kind, &c_med, fpp_volume);
    LargeEdgeResult {
        coloring,
        kind,
        case,
        c_med,
        covers,
        huge_colors,
        fpp_volume,
        clauses,
        relaxations: st.relaxed,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::projective_plane;
    use crate::hypercore::verify_coloring;

    fn desk_hier(r1: usize, r0: usize) -> Hierarchy {
        Hierarchy { r1, r0, ..Hierarchy::default() }
    }

    #[test]
    fn disjoint_edges_share_one_listed_color() {
        let h = LinearHypergraph::build(9, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]], false).unwrap();
        let lists = ListAssignment::uniform(3, vec![1]);
        let col = list_greedy(&h, &EdgeOrdering::identity(3), &lists, 0.0, 1.0).unwrap();
        assert!((0..3).all(|e| col.get(e) == Some(1)));
    }

    #[test]
    fn fano_takes_seven_colors() {
        let h = projective_plane(2).unwrap();
        let lists = ListAssignment::uniform(7, (0..7).collect());
        let col = list_greedy(&h, &EdgeOrdering::identity(7), &lists, 0.0, 0.5).unwrap();
        verify_coloring(&h, &col).unwrap();
        assert_eq!(col.num_colors_used(), 7);
        let (d, k) = dsatur_line(&h);
        verify_coloring(&h, &d).unwrap();
        assert_eq!(k, 7);
    }

    #[test]
    fn triangle_lists() {
        let h = LinearHypergraph::build(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]], false).unwrap();
        let lists = ListAssignment::new(vec![1, 2, 3], vec![vec![1, 2], vec![2, 3], vec![1, 3]]).unwrap();
        let col = list_greedy(&h, &EdgeOrdering::identity(3), &lists, 0.0, 1.0).unwrap();
        verify_coloring(&h, &col).unwrap();
        for e in 0..3 {
            assert!(lists.list(e).contains(&col.get(e).unwrap()));
        }
    }

    #[test]
    fn exhausted_list_is_reported() {
        let h = LinearHypergraph::build(3, vec![vec![0, 1], vec![1, 2]], false).unwrap();
        let lists = ListAssignment::uniform(2, vec![0]);
        assert_eq!(list_greedy(&h, &EdgeOrdering::identity(2), &lists, 0.0, 1.0), Err(GreedyError::ListExhausted(1)));
    }

    #[test]
    fn split_leaves_bounded_input_alone() {
        let h = LinearHypergraph::build(8, vec![vec![0, 1], vec![2, 3], vec![4, 5]], false).unwrap();
        let col = EdgeColoring::from_colors(vec![0, 0, 1]);
        assert_eq!(split_bounded(&h, &col, 0.5, 1), col);
    }

    #[test]
    fn split_breaks_a_spanning_class() {
        let edges: Vec<Vec<usize>> = (0..10).map(|i| vec![2 * i, 2 * i + 1]).collect();
        let h = LinearHypergraph::build(20, edges, false).unwrap();
        let col = EdgeColoring::from_colors(vec![0; 10]);
        let out = split_bounded(&h, &col, 0.5, 1);
        assert!(out.num_colors_used() >= 2);
        assert!(is_alpha_bounded(&h, &out, 0.5));
        assert!(class_covers(&h, &out).values().all(|&c| c <= 10));
    }

    #[test]
    fn medium_examples() {
        let empty = LinearHypergraph::empty(50);
        assert_eq!(color_medium(&empty, 0.2, 40, 10).unwrap().colors, 0);
        let edges: Vec<Vec<usize>> = (0..20).map(|i| (20 * i..20 * i + 20).collect()).collect();
        let h = LinearHypergraph::build(2000, edges, false).unwrap();
        assert_eq!(color_medium(&h, 0.2, 40, 10).unwrap().colors, 1);
    }

    #[test]
    fn plane_of_order_five_is_type_b() {
        let h = projective_plane(5).unwrap();
        let r = color_large_medium(&h, &desk_hier(4, 5), 1);
        verify_coloring(&h, &r.coloring).unwrap();
        assert_eq!(r.kind, LargeType::B);
        assert!(r.coloring.num_colors_used() <= 31);
        assert!(r.coloring.classes().values().all(|c| c.len() <= 2));
    }

    #[test]
    fn medium_only_instance_is_type_a_case1() {
        let edges: Vec<Vec<usize>> = (0..20).map(|i| (6 * i..6 * i + 6).collect()).collect();
        let h = LinearHypergraph::build(200, edges, false).unwrap();
        let r = color_large_medium(&h, &desk_hier(4, 8), 3);
        verify_coloring(&h, &r.coloring).unwrap();
        assert_eq!(r.kind, LargeType::A);
        assert_eq!(r.case, LargeCase::Case1);
        assert_eq!(r.clauses, check_type_clauses(&h, &desk_hier(4, 8), &r.coloring, r.kind, &r.c_med, r.fpp_volume));
    }

    #[test]
    fn huge_edge_color_is_exclusive() {
        let mut edges = vec![(0..60).collect::<Vec<usize>>()];
        for i in 0..12 {
            let mut e = vec![i];
            e.extend(60 + 9 * i..69 + 9 * i);
            edges.push(e);
        }
        let h = LinearHypergraph::build(200, edges, false).unwrap();
        let r = color_large_medium(&h, &desk_hier(4, 8), 5);
        verify_coloring(&h, &r.coloring).unwrap();
        let c = r.coloring.get(0).unwrap();
        assert_eq!(r.coloring.classes()[&c], vec![0]);
        assert!(r.huge_colors.contains(&c));
        assert!(r.clauses.huge || r.kind == LargeType::B);
    }

    #[test]
    fn first_fit_plane_uses_every_color_once() {
        let h = projective_plane(3).unwrap();
        let col = first_fit(&h, &size_order(&h));
        assert!(verify_coloring(&h, &col).is_ok());
        assert_eq!(col.num_colors_used(), 13);
    }
}
