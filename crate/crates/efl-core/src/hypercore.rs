//! Linear hypergraphs, colorings, derived graph views and the `.lhg` format.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("edges {0} and {1} share more than one vertex")]
    LinearityViolation(usize, usize),
    #[error("edges {0} and {1} are identical")]
    DuplicateEdge(usize, usize),
    #[error("edge {edge} uses vertex {vertex} outside 0..n")]
    BadVertexId { edge: usize, vertex: usize },
    #[error("edge {0} is empty")]
    EmptyEdge(usize),
    #[error("edge {edge} repeats vertex {vertex}")]
    RepeatedVertex { edge: usize, vertex: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("missing `n <N>` header")]
    MissingHeader,
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// A linear hypergraph on vertices `0..n`. Edges are sorted vertex lists and
/// are identified by their index in `edges()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearHypergraph {
    n: usize,
    edges: Vec<Vec<usize>>,
    multi: bool,
    incidence: Vec<Vec<usize>>,
}

impl LinearHypergraph {
    pub fn build(n: usize, edges: Vec<Vec<usize>>, multi: bool) -> Result<Self, BuildError> {
        let mut canon = Vec::with_capacity(edges.len());
        for (i, mut e) in edges.into_iter().enumerate() {
            if e.is_empty() {
                return Err(BuildError::EmptyEdge(i));
            }
            e.sort_unstable();
            for w in e.windows(2) {
                if w[0] == w[1] {
                    return Err(BuildError::RepeatedVertex { edge: i, vertex: w[0] });
                }
            }
            if let Some(&v) = e.iter().find(|&&v| v >= n) {
                return Err(BuildError::BadVertexId { edge: i, vertex: v });
            }
            canon.push(e);
        }

        let mut seen: HashMap<&[usize], usize> = HashMap::new();
        for (i, e) in canon.iter().enumerate() {
            if e.len() == 1 && multi {
                continue;
            }
            if let Some(&j) = seen.get(e.as_slice()) {
                return Err(BuildError::DuplicateEdge(j, i));
            }
            seen.insert(e.as_slice(), i);
        }

        let mut pair_owner: HashMap<u64, usize> = HashMap::new();
        for (i, e) in canon.iter().enumerate() {
            if e.len() < 2 {
                continue;
            }
            for a in 0..e.len() {
                for b in a + 1..e.len() {
                    let key = (e[a] as u64) * (n as u64) + e[b] as u64;
                    if let Some(&j) = pair_owner.get(&key) {
                        return Err(BuildError::LinearityViolation(j, i));
                    }
                    pair_owner.insert(key, i);
                }
            }
        }

        let mut incidence = vec![Vec::new(); n];
        for (i, e) in canon.iter().enumerate() {
            for &v in e {
                incidence[v].push(i);
            }
        }
        Ok(Self { n, edges: canon, multi, incidence })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, edges: Vec::new(), multi: false, incidence: vec![Vec::new(); n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn is_multi(&self) -> bool {
        self.multi
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &[usize] {
        &self.edges[i]
    }

    /// Edges containing `v`, in increasing index order.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.incidence.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_edge_size(&self) -> usize {
        self.edges.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn intersects(&self, e: usize, f: usize) -> bool {
        let (a, b) = (&self.edges[e], &self.edges[f]);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Edges other than `e` that meet `e`, sorted and without repeats.
    pub fn neighbors(&self, e: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &v in &self.edges[e] {
            out.extend(self.incidence[v].iter().copied().filter(|&f| f != e));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Sub-hypergraph on the same vertex set keeping the listed edges, in the
    /// listed order. Returns the new hypergraph; edge `i` of it is `keep[i]`.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let edges: Vec<Vec<usize>> = keep.iter().map(|&i| self.edges[i].clone()).collect();
        let mut incidence = vec![Vec::new(); self.n];
        for (i, e) in edges.iter().enumerate() {
            for &v in e {
                incidence[v].push(i);
            }
        }
        Self { n: self.n, edges, multi: self.multi, incidence }
    }

    pub fn is_graph(&self) -> bool {
        self.edges.iter().all(|e| e.len() == 2)
    }

    pub fn to_lhg(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n {}", self.n);
        for e in &self.edges {
            s.push('e');
            for v in e {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_lhg(text: &str, multi: bool) -> Result<Self, ParseError> {
        let mut n = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap_or("");
            let nums: Result<Vec<usize>, _> = parts.map(str::parse::<usize>).collect();
            let nums = nums.map_err(|e| ParseError::Syntax(lineno + 1, e.to_string()))?;
            match (tag, n) {
                ("n", None) if nums.len() == 1 => n = Some(nums[0]),
                ("n", _) => return Err(ParseError::Syntax(lineno + 1, "bad `n` line".into())),
                ("e", Some(_)) => edges.push(nums),
                ("e", None) => return Err(ParseError::MissingHeader),
                _ => return Err(ParseError::Syntax(lineno + 1, format!("unknown tag `{tag}`"))),
            }
        }
        let n = n.ok_or(ParseError::MissingHeader)?;
        Ok(Self::build(n, edges, multi)?)
    }
}

/// Per-edge color assignment. Colors are ids in `0..palette_size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeColoring {
    pub palette_size: usize,
    pub colors: Vec<Option<usize>>,
}

impl EdgeColoring {
    pub fn uncolored(m: usize) -> Self {
        Self { palette_size: 0, colors: vec![None; m] }
    }

    /// Builds a coloring from complete assignments; the palette is
    /// `0..=max color`.
    pub fn from_colors(colors: Vec<usize>) -> Self {
        let palette_size = colors.iter().map(|&c| c + 1).max().unwrap_or(0);
        Self { palette_size, colors: colors.into_iter().map(Some).collect() }
    }

    pub fn set(&mut self, e: usize, c: usize) {
        self.colors[e] = Some(c);
        self.palette_size = self.palette_size.max(c + 1);
    }

    pub fn get(&self, e: usize) -> Option<usize> {
        self.colors[e]
    }

    pub fn is_complete(&self) -> bool {
        self.colors.iter().all(Option::is_some)
    }

    pub fn num_colors_used(&self) -> usize {
        self.colors.iter().flatten().collect::<HashSet<_>>().len()
    }

    /// Color classes keyed by color id.
    pub fn classes(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (e, c) in self.colors.iter().enumerate() {
            if let Some(c) = c {
                out.entry(*c).or_default().push(e);
            }
        }
        out
    }

    /// Relabels used colors to `0..k` in order of first appearance.
    pub fn compacted(&self) -> Self {
        let mut map = HashMap::new();
        let colors: Vec<Option<usize>> = self
            .colors
            .iter()
            .map(|c| {
                c.map(|c| {
                    let next = map.len();
                    *map.entry(c).or_insert(next)
                })
            })
            .collect();
        Self { palette_size: map.len(), colors }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("coloring serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ColoringViolation {
    #[error("coloring has {got} entries, hypergraph has {expected} edges")]
    LengthMismatch { expected: usize, got: usize },
    #[error("edge {0} is uncolored")]
    Uncolored(usize),
    #[error("edge {edge} has color {color} outside the palette")]
    OutOfPalette { edge: usize, color: usize },
    #[error("edges {0} and {1} intersect and share color {2}")]
    Conflict(usize, usize, usize),
}

/// Checks properness. The reported conflict is the pair (f, e) with the
/// smallest `e`, then the smallest `f < e`.
pub fn verify_coloring(h: &LinearHypergraph, col: &EdgeColoring) -> Result<(), ColoringViolation> {
    if col.colors.len() != h.m() {
        return Err(ColoringViolation::LengthMismatch { expected: h.m(), got: col.colors.len() });
    }
    for (e, c) in col.colors.iter().enumerate() {
        match c {
            None => return Err(ColoringViolation::Uncolored(e)),
            Some(c) if *c >= col.palette_size => return Err(ColoringViolation::OutOfPalette { edge: e, color: *c }),
            _ => {}
        }
    }
    let mut at: Vec<HashMap<usize, usize>> = vec![HashMap::new(); h.n()];
    for e in 0..h.m() {
        let c = col.colors[e].unwrap();
        let clash = h.edge(e).iter().filter_map(|&v| at[v].get(&c).copied()).min();
        if let Some(f) = clash {
            return Err(ColoringViolation::Conflict(f, e, c));
        }
        for &v in h.edge(e) {
            at[v].insert(c, e);
        }
    }
    Ok(())
}

/// Line graph adjacency over edge indices.
pub fn line_graph(h: &LinearHypergraph) -> Vec<Vec<usize>> {
    (0..h.m()).map(|e| h.neighbors(e)).collect()
}

/// Normalized volume of an edge subset.
pub fn volume(h: &LinearHypergraph, w: &[usize]) -> f64 {
    if h.n() < 2 {
        return 0.0;
    }
    let pairs: u64 = w.iter().map(|&e| choose2(h.edge(e).len())).sum();
    pairs as f64 / choose2(h.n()) as f64
}

pub(crate) fn choose2(k: usize) -> u64 {
    let k = k as u64;
    k * k.saturating_sub(1) / 2
}

/// The constant ladder. Field order follows increasing magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    pub xi: f64,
    pub r1: usize,
    pub r0: usize,
    pub beta: f64,
    pub kappa: f64,
    pub gamma1: f64,
    pub eps1: f64,
    pub rho1: f64,
    pub sigma: f64,
    pub delta: f64,
    pub gamma2: f64,
    pub rho2: f64,
    pub eps2: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HierarchyError {
    #[error("{0} must lie in (0,1), got {1}")]
    OutOfRange(&'static str, f64),
    #[error("chain broken: {0} = {1} is not below {2} = {3}")]
    NotIncreasing(&'static str, f64, &'static str, f64),
    #[error("r1 = {0} must be at least 2 and below r0 = {1}")]
    BadRadii(usize, usize),
}

impl Default for Hierarchy {
    fn default() -> Self {
        Self {
            xi: 0.005,
            r1: 16,
            r0: 256,
            beta: 0.008,
            kappa: 0.012,
            gamma1: 0.02,
            eps1: 0.04,
            rho1: 0.08,
            sigma: 0.12,
            delta: 0.16,
            gamma2: 0.22,
            rho2: 0.3,
            eps2: 0.4,
        }
    }
}

impl Hierarchy {
    pub fn inv_r1(&self) -> f64 {
        1.0 / self.r1 as f64
    }

    pub fn inv_r0(&self) -> f64 {
        1.0 / self.r0 as f64
    }

    fn chain(&self) -> [(&'static str, f64); 13] {
        [
            ("1/r0", self.inv_r0()),
            ("xi", self.xi),
            ("1/r1", self.inv_r1()),
            ("beta", self.beta),
            ("kappa", self.kappa),
            ("gamma1", self.gamma1),
            ("eps1", self.eps1),
            ("rho1", self.rho1),
            ("sigma", self.sigma),
            ("delta", self.delta),
            ("gamma2", self.gamma2),
            ("rho2", self.rho2),
            ("eps2", self.eps2),
        ]
    }

    /// Checks ranges and the ordering of the real constants. The position of
    /// 1/r1 is only checked by [`Hierarchy::strict_violations`], because
    /// desk-scale profiles keep r1 small enough to leave room for medium edges.
    pub fn validate(&self) -> Result<(), HierarchyError> {
        if self.r1 < 2 || self.r1 >= self.r0 {
            return Err(HierarchyError::BadRadii(self.r1, self.r0));
        }
        let chain: Vec<_> = self.chain().into_iter().filter(|(name, _)| *name != "1/r1").collect();
        for &(name, x) in &chain[1..] {
            if !(x > 0.0 && x < 1.0) {
                return Err(HierarchyError::OutOfRange(name, x));
            }
        }
        for w in chain.windows(2) {
            if w[0].1 >= w[1].1 {
                return Err(HierarchyError::NotIncreasing(w[0].0, w[0].1, w[1].0, w[1].1));
            }
        }
        Ok(())
    }

    /// Every broken link of the full chain including 1/r1.
    pub fn strict_violations(&self) -> Vec<HierarchyError> {
        self.chain()
            .windows(2)
            .filter(|w| w[0].1 >= w[1].1)
            .map(|w| HierarchyError::NotIncreasing(w[0].0, w[0].1, w[1].0, w[1].1))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeClass {
    pub size: SizeClass,
    pub fpp_extremal: bool,
    pub huge: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub classes: Vec<EdgeClass>,
    pub huge_count: usize,
    /// Whether the count of edges of size at least `alpha n` is at most
    /// `2 / alpha` for `alpha = beta / 4`.
    pub huge_bound_holds: bool,
}

impl Classification {
    pub fn of_size(&self, s: SizeClass) -> Vec<usize> {
        (0..self.classes.len()).filter(|&e| self.classes[e].size == s).collect()
    }

    pub fn huge(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&e| self.classes[e].huge).collect()
    }

    pub fn fpp_extremal(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&e| self.classes[e].fpp_extremal).collect()
    }
}

pub fn is_fpp_extremal_size(size: usize, n: usize, delta: f64) -> bool {
    let root = (n as f64).sqrt();
    let s = size as f64;
    s >= (1.0 - delta) * root - 1e-9 && s <= (1.0 + delta) * root + 1e-9
}

pub fn is_huge_size(size: usize, n: usize, beta: f64) -> bool {
    size as f64 >= beta * n as f64 / 4.0 - 1e-9
}

pub fn classify(h: &LinearHypergraph, hier: &Hierarchy) -> Classification {
    let n = h.n();
    let classes: Vec<EdgeClass> = h
        .edges()
        .iter()
        .map(|e| {
            let k = e.len();
            let size = if k <= hier.r1 {
                SizeClass::Small
            } else if k <= hier.r0 {
                SizeClass::Medium
            } else {
                SizeClass::Large
            };
            EdgeClass {
                size,
                fpp_extremal: is_fpp_extremal_size(k, n, hier.delta),
                huge: is_huge_size(k, n, hier.beta),
            }
        })
        .collect();
    let huge_count = classes.iter().filter(|c| c.huge).count();
    let alpha = hier.beta / 4.0;
    Classification { classes, huge_count, huge_bound_holds: large_edge_count_ok(h, alpha) }
}

/// Checks `|{e : |e| >= alpha n}| <= 2 / alpha`.
pub fn large_edge_count_ok(h: &LinearHypergraph, alpha: f64) -> bool {
    let thr = alpha * h.n() as f64;
    let count = h.edges().iter().filter(|e| e.len() as f64 >= thr - 1e-9 && e.len() >= 2).count();
    count as f64 <= 2.0 / alpha + 1e-9
}

/// A simple graph with edge ids; adjacency lists hold `(neighbor, edge id)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub adj: Vec<Vec<(usize, usize)>>,
}

impl SimpleGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (i, &(u, v)) in edges.iter().enumerate() {
            adj[u].push((v, i));
            adj[v].push((u, i));
        }
        Self { n, edges, adj }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Edge-induced copy keeping the listed edge ids (renumbered in order).
    pub fn with_edges(&self, ids: &[usize]) -> Self {
        Self::new(self.n, ids.iter().map(|&i| self.edges[i]).collect())
    }

    pub fn as_hypergraph(&self) -> LinearHypergraph {
        let edges = self.edges.iter().map(|&(u, v)| vec![u, v]).collect();
        LinearHypergraph::build(self.n, edges, false).expect("simple graph is linear")
    }
}

/// The size-2 graph `G`, the high-degree set `U` and the crossing graph `G'`.
#[derive(Debug, Clone)]
pub struct DerivedViews {
    /// Edge indices of `H` with exactly two vertices.
    pub g_edges: Vec<usize>,
    pub g: SimpleGraph,
    pub in_u: Vec<bool>,
    pub u: Vec<usize>,
    /// Positions in `g_edges` (equivalently edge ids of `g`) meeting `U`.
    pub g_prime: Vec<usize>,
}

impl DerivedViews {
    pub fn g_degree(&self, v: usize) -> usize {
        self.g.degree(v)
    }
}

pub fn derived_views(h: &LinearHypergraph, eps: f64) -> DerivedViews {
    let g_edges: Vec<usize> = (0..h.m()).filter(|&e| h.edge(e).len() == 2).collect();
    let g = SimpleGraph::new(h.n(), g_edges.iter().map(|&e| (h.edge(e)[0], h.edge(e)[1])).collect());
    let thr = (1.0 - eps) * h.n() as f64;
    let in_u: Vec<bool> = (0..h.n()).map(|v| g.degree(v) as f64 >= thr - 1e-9).collect();
    let u = (0..h.n()).filter(|&v| in_u[v]).collect();
    let g_prime = (0..g.m()).filter(|&i| in_u[g.edges[i].0] || in_u[g.edges[i].1]).collect();
    DerivedViews { g_edges, g, in_u, u, g_prime }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoverageStatus {
    Perfect,
    NearlyPerfect,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub status: CoverageStatus,
    /// Matching index to the `U`-vertex it misses (nearly-perfect case).
    pub defects: BTreeMap<usize, usize>,
    /// Number of matchings missing each `U`-vertex, for vertices missed at least once.
    pub miss_counts: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("family member {0} is not a matching")]
    NotAMatching(usize),
}

pub fn coverage<E: AsRef<[usize]>>(
    n: usize,
    matchings: &[Vec<E>],
    u: &[usize],
    s: &[usize],
) -> Result<CoverageReport, CoverageError> {
    let in_s: HashSet<usize> = s.iter().copied().collect();
    let mut miss_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut per_matching: Vec<Vec<usize>> = Vec::with_capacity(matchings.len());
    let mut covered = vec![false; n];
    for (i, m) in matchings.iter().enumerate() {
        covered.iter_mut().for_each(|x| *x = false);
        for e in m {
            for &v in e.as_ref() {
                if covered[v] {
                    return Err(CoverageError::NotAMatching(i));
                }
                covered[v] = true;
            }
        }
        let missed: Vec<usize> = u.iter().copied().filter(|&v| !covered[v]).collect();
        for &v in &missed {
            *miss_counts.entry(v).or_default() += 1;
        }
        per_matching.push(missed);
    }
    let status = if per_matching.iter().all(Vec::is_empty) {
        CoverageStatus::Perfect
    } else if per_matching.iter().all(|m| m.len() <= 1)
        && miss_counts.values().all(|&c| c <= 1)
        && miss_counts.keys().all(|v| in_s.contains(v))
    {
        CoverageStatus::NearlyPerfect
    } else {
        CoverageStatus::Neither
    };
    let defects = if status == CoverageStatus::NearlyPerfect {
        per_matching.iter().enumerate().filter_map(|(i, m)| m.first().map(|&v| (i, v))).collect()
    } else {
        BTreeMap::new()
    };
    Ok(CoverageReport { status, defects, miss_counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fullness {
    pub full: bool,
    pub high_degree: usize,
    pub full_degree: usize,
}

pub fn is_full(h: &LinearHypergraph, rho: f64, eps: f64) -> Fullness {
    let views = derived_views(h, eps);
    let n = h.n();
    let high_degree = views.u.len();
    let full_degree = (0..n).filter(|&v| views.g.degree(v) + 1 == n).count();
    let full = high_degree as f64 >= (1.0 - 10.0 * eps) * n as f64 - 1e-9
        && full_degree as f64 >= (rho - 15.0 * eps) * n as f64 - 1e-9;
    Fullness { full, high_degree, full_degree }
}

/// Vertices whose degree in `H` is exactly `d`.
pub fn vertices_of_degree(h: &LinearHypergraph, d: usize) -> Vec<usize> {
    (0..h.n()).filter(|&v| h.degree(v) == d).collect()
}
