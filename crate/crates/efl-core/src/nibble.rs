//! Semi-random matchings: sparsified random-greedy matchings with coverage
//! windows, the multi-color nibble, and the main and leftover coloring rounds
//! that combine it with reservoir absorption.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::absorb::{absorb_batch, absorb_small_typical, AbsorbBranch, AbsorbError, AbsorbParams, AbsorbTag};
use crate::greedy::{list_greedy, ListAssignment};
use crate::hypercore::{coverage, derived_views, CoverageReport, CoverageStatus, LinearHypergraph};
use crate::ordering::size_order;
use crate::rng::{self, Rng};

/// One checked window: `value` should lie in `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    pub property: String,
    pub family: usize,
    /// Matching index, when the window is per matching.
    pub matching: Option<usize>,
    pub size: usize,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl WindowStat {
    pub fn ok(&self) -> bool {
        self.value >= self.lo - 1e-9 && self.value <= self.hi + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NibbleError {
    #[error("{} statistical windows missed, first: {:?}", .0.len(), .0.first())]
    StatMiss(Vec<WindowStat>),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("round {round} failed at {stage}")]
    RoundFailed { round: usize, stage: String },
    #[error("no admissible color for leftover edge {0}")]
    ListExhausted(usize),
    #[error("absorption failed: {0}")]
    AbsorptionFailed(AbsorbError),
    #[error("invariant broken: {0}")]
    Invariant(String),
}

/// Settings for [`pseudorandom_matching`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrConfig {
    pub gamma: f64,
    pub kappa: f64,
    /// Fresh-seed attempts before reporting a miss.
    pub retries: usize,
    /// Smallest admissible degree scale `D`.
    pub degree_floor: usize,
}

impl PrConfig {
    pub fn new(gamma: f64, kappa: f64) -> Self {
        Self { gamma, kappa, retries: 5, degree_floor: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrMatching {
    pub matching: Vec<usize>,
    /// Maximal matching before sparsification.
    pub greedy_size: usize,
    pub stats: Vec<WindowStat>,
    pub attempts: usize,
}

fn check_unif(h: &LinearHypergraph, kappa: f64, floor: usize) -> Result<usize, NibbleError> {
    let r = h.edges().first().map_or(0, Vec::len);
    if h.edges().iter().any(|e| e.len() != r) {
        return Err(NibbleError::BadInput("hypergraph is not uniform".into()));
    }
    let lo = (0..h.n()).map(|v| h.degree(v)).min().unwrap_or(0);
    let hi = h.max_degree();
    let d = (lo + hi) as f64 / 2.0;
    if d.round() < floor as f64 {
        return Err(NibbleError::BadInput(format!("degree scale {d} below floor {floor}")));
    }
    if (hi as f64 - d) > kappa * d + 1e-9 {
        return Err(NibbleError::BadInput(format!("degrees {lo}..{hi} not within (1±{kappa})D")));
    }
    Ok(d.round() as usize)
}

/// A maximal matching of `H` built by random greedy, then sparsified by
/// dropping each edge with probability `γ`. For every `S` in `fv` with
/// `|S| >= D^{1/20}`, `|S \ V(M)|` is checked against `(γ ± 4κ)|S|`; on a miss
/// the whole construction is retried with a derived seed.
pub fn pseudorandom_matching(
    h: &LinearHypergraph,
    cfg: &PrConfig,
    fv: &[Vec<usize>],
    seed: u64,
) -> Result<PrMatching, NibbleError> {
    let d = check_unif(h, cfg.kappa, cfg.degree_floor)?;
    let min_size = (d as f64).powf(0.05);
    let mut last = Vec::new();
    for attempt in 0..cfg.retries.max(1) {
        let mut rng = rng::derive(seed, attempt as u64);
        let mut order: Vec<usize> = (0..h.m()).collect();
        order.shuffle(&mut rng);
        let mut hit = vec![false; h.n()];
        let mut m0 = Vec::new();
        for e in order {
            if h.edge(e).iter().all(|&v| !hit[v]) {
                h.edge(e).iter().for_each(|&v| hit[v] = true);
                m0.push(e);
            }
        }
        let greedy_size = m0.len();
        let mut matching: Vec<usize> = m0.into_iter().filter(|_| !rng.gen_bool(cfg.gamma)).collect();
        matching.sort_unstable();
        let mut cov = vec![false; h.n()];
        matching.iter().flat_map(|&e| h.edge(e)).for_each(|&v| cov[v] = true);
        let stats: Vec<WindowStat> = fv
            .iter()
            .enumerate()
            .filter(|(_, s)| s.len() as f64 >= min_size)
            .map(|(i, s)| {
                let miss = s.iter().filter(|&&v| !cov[v]).count();
                let sz = s.len() as f64;
                WindowStat {
                    property: "uncovered".into(),
                    family: i,
                    matching: None,
                    size: s.len(),
                    value: miss as f64,
                    lo: (cfg.gamma - 4.0 * cfg.kappa) * sz,
                    hi: (cfg.gamma + 4.0 * cfg.kappa) * sz,
                }
            })
            .collect();
        if stats.iter().all(WindowStat::ok) {
            return Ok(PrMatching { matching, greedy_size, stats, attempts: attempt + 1 });
        }
        last = stats.into_iter().filter(|s| !s.ok()).collect();
    }
    Err(NibbleError::StatMiss(last))
}

/// Settings for [`nibble_color`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NibbleParams {
    pub gamma: f64,
    pub kappa: f64,
    /// Per-edge activation probability in each mini-round.
    pub theta: f64,
    pub max_mini_rounds: usize,
    /// Return `StatMiss` instead of reporting misses in the output.
    pub strict: bool,
}

impl NibbleParams {
    pub fn new(gamma: f64, kappa: f64) -> Self {
        Self { gamma, kappa, theta: 0.3, max_mini_rounds: 400, strict: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NibbleOutput {
    /// `N_i`, each sorted, containing the input `M_i`.
    pub matchings: Vec<Vec<usize>>,
    /// `H′` edges left in no matching.
    pub uncolored: Vec<usize>,
    pub mini_rounds: usize,
    /// Probability with which each nibbled edge was given back.
    pub drop_prob: f64,
    pub checked: usize,
    pub misses: Vec<WindowStat>,
}

/// Flat per-color vertex bitsets.
struct Occupancy {
    words: usize,
    bits: Vec<u64>,
}

impl Occupancy {
    fn new(n: usize, colors: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Self { words, bits: vec![0; words * colors] }
    }

    fn get(&self, c: usize, v: usize) -> bool {
        self.bits[c * self.words + v / 64] >> (v % 64) & 1 == 1
    }

    fn set(&mut self, c: usize, v: usize) {
        self.bits[c * self.words + v / 64] |= 1 << (v % 64);
    }

    fn clear(&mut self, c: usize, v: usize) {
        self.bits[c * self.words + v / 64] &= !(1 << (v % 64));
    }

    fn free(&self, c: usize, e: &[usize]) -> bool {
        e.iter().all(|&v| !self.get(c, v))
    }
}

/// Extends `M_1..M_D` by edges of `H′` (given as edge ids of `H`) with a
/// semi-random process: each mini-round activates every remaining edge with
/// probability `θ`, and an active edge joins a uniformly random matching it
/// is still free in, lowest edge id first. Edges free in no matching are
/// retired. Afterwards nibbled edges are given back independently so that the
/// matchings miss on average a `γ`-fraction of `V`.
///
/// `N_i ⊇ M_i` and `N_i \ M_i ⊆ H′` always hold. For every vertex family in
/// `fv` and matching, `|S \ V(N_i)| = γ|S| ± κn` is checked, and for every
/// edge family `F ⊆ H′` in `fe`, `|F \ ∪N_j| <= γ|F| + κ max(|F|, D)`.
pub fn nibble_color(
    h: &LinearHypergraph,
    h_prime: &[usize],
    pre: &[Vec<usize>],
    fv: &[Vec<usize>],
    fe: &[Vec<usize>],
    params: &NibbleParams,
    seed: u64,
) -> Result<NibbleOutput, NibbleError> {
    let n = h.n();
    let d = pre.len();
    let mut in_pre = vec![false; h.m()];
    let mut occ = Occupancy::new(n, d);
    for (i, m) in pre.iter().enumerate() {
        for &e in m {
            if e >= h.m() || std::mem::replace(&mut in_pre[e], true) {
                return Err(NibbleError::BadInput(format!("edge {e} of M_{i} is invalid or shared")));
            }
            for &v in h.edge(e) {
                if occ.get(i, v) {
                    return Err(NibbleError::BadInput(format!("M_{i} is not a matching")));
                }
                occ.set(i, v);
            }
        }
    }
    let mut in_hp = vec![false; h.m()];
    for &e in h_prime {
        if e >= h.m() {
            return Err(NibbleError::BadInput(format!("H′ edge {e} out of range")));
        }
        in_hp[e] = true;
    }
    if d == 0 {
        let uncolored: Vec<usize> = (0..h.m()).filter(|&e| in_hp[e]).collect();
        return Ok(NibbleOutput {
            matchings: Vec::new(),
            uncolored,
            mini_rounds: 0,
            drop_prob: 0.0,
            checked: 0,
            misses: Vec::new(),
        });
    }
    let mut rng = rng::seeded(seed);
    let mut color = vec![usize::MAX; h.m()];
    let mut pool: Vec<usize> = (0..h.m()).filter(|&e| in_hp[e] && !in_pre[e]).collect();
    let mut rounds = 0;
    let mut free = Vec::with_capacity(d);
    while !pool.is_empty() && rounds < params.max_mini_rounds {
        rounds += 1;
        let mut next = Vec::with_capacity(pool.len());
        for &e in &pool {
            let edge = h.edge(e);
            free.clear();
            free.extend((0..d).filter(|&c| occ.free(c, edge)));
            if free.is_empty() {
                continue;
            }
            if !rng.gen_bool(params.theta) {
                next.push(e);
                continue;
            }
            let c = free[rng.gen_range(0..free.len())];
            edge.iter().for_each(|&v| occ.set(c, v));
            color[e] = c;
        }
        pool = next;
    }

    // Give nibbled edges back so the average miss over V is γn per matching.
    let nibbled: Vec<usize> = (0..h.m()).filter(|&e| color[e] != usize::MAX).collect();
    let mut covered_slots = 0usize;
    for c in 0..d {
        covered_slots += (0..n).filter(|&v| occ.get(c, v)).count();
    }
    let nibbled_slots: usize = nibbled.iter().map(|&e| h.edge(e).len()).sum();
    let target_miss = params.gamma * (n * d) as f64;
    let miss = (n * d - covered_slots) as f64;
    let drop_prob =
        if nibbled_slots == 0 { 0.0 } else { ((target_miss - miss) / nibbled_slots as f64).clamp(0.0, 1.0) };
    for &e in &nibbled {
        if rng.gen_bool(drop_prob) {
            let c = color[e];
            h.edge(e).iter().for_each(|&v| occ.clear(c, v));
            color[e] = usize::MAX;
        }
    }

    let mut matchings: Vec<Vec<usize>> = pre.to_vec();
    for e in 0..h.m() {
        if color[e] != usize::MAX {
            matchings[color[e]].push(e);
        }
    }
    matchings.iter_mut().for_each(|m| m.sort_unstable());
    let uncolored: Vec<usize> = (0..h.m()).filter(|&e| in_hp[e] && !in_pre[e] && color[e] == usize::MAX).collect();

    let kn = params.kappa * n as f64;
    let mut stats = Vec::new();
    for (fi, s) in fv.iter().enumerate() {
        let sz = s.len() as f64;
        for c in 0..d {
            let miss = s.iter().filter(|&&v| !occ.get(c, v)).count();
            stats.push(WindowStat {
                property: "NB2".into(),
                family: fi,
                matching: Some(c),
                size: s.len(),
                value: miss as f64,
                lo: params.gamma * sz - kn,
                hi: params.gamma * sz + kn,
            });
        }
    }
    for (fi, f) in fe.iter().enumerate() {
        let left = f.iter().filter(|&&e| e < h.m() && in_hp[e] && !in_pre[e] && color[e] == usize::MAX).count();
        let sz = f.len() as f64;
        stats.push(WindowStat {
            property: "NB3".into(),
            family: fi,
            matching: None,
            size: f.len(),
            value: left as f64,
            lo: 0.0,
            hi: params.gamma * sz + params.kappa * sz.max(d as f64),
        });
    }
    let checked = stats.len();
    let misses: Vec<WindowStat> = stats.into_iter().filter(|s| !s.ok()).collect();
    if params.strict && !misses.is_empty() {
        return Err(NibbleError::StatMiss(misses));
    }
    Ok(NibbleOutput { matchings, uncolored, mini_rounds: rounds, drop_prob, checked, misses })
}

/// Settings for [`main_color`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainParams {
    pub absorb: AbsorbParams,
    pub theta: f64,
    pub max_mini_rounds: usize,
    /// Attempts at a partition of `H′` within its degree windows.
    pub partition_retries: usize,
}

impl MainParams {
    pub fn new(absorb: AbsorbParams) -> Self {
        Self { absorb, theta: 0.3, max_mini_rounds: 400, partition_retries: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub colors: usize,
    pub part_edges: usize,
    pub nibble_misses: usize,
    pub branch: AbsorbBranch,
    pub status: CoverageStatus,
    pub defects: usize,
    pub reservoir_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainOutput {
    pub matchings: Vec<Vec<usize>>,
    pub rounds: Vec<RoundReport>,
    /// Vertices with the partition outside its degree window in some part.
    pub partition_misses: usize,
    /// Vertices `w` with `|E_R(w) ∩ ∪N| > γD` or `|E_{H′}(w) \ ∪N| > γD`.
    pub n2_violations: Vec<usize>,
    pub coverage: CoverageReport,
    /// `H′` edges in no matching.
    pub leftover: Vec<usize>,
}

/// Splits `H′` uniformly at random into `k` parts, retrying while some vertex
/// misses its Chernoff window `d/k ± (3√(d/k) + 1)` in some part. Returns the
/// best partition found and its number of offending vertices.
fn partition_edges(
    h: &LinearHypergraph,
    h_prime: &[usize],
    k: usize,
    retries: usize,
    rng: &mut Rng,
) -> (Vec<Vec<usize>>, usize) {
    let n = h.n();
    let mut deg = vec![0usize; n];
    h_prime.iter().flat_map(|&e| h.edge(e)).for_each(|&v| deg[v] += 1);
    let mut best: Option<(Vec<Vec<usize>>, usize)> = None;
    for _ in 0..retries.max(1) {
        let mut parts = vec![Vec::new(); k];
        for &e in h_prime {
            parts[rng.gen_range(0..k)].push(e);
        }
        let mut bad = vec![false; n];
        let mut pd = vec![0usize; n];
        for p in &parts {
            pd.iter_mut().for_each(|x| *x = 0);
            p.iter().flat_map(|&e| h.edge(e)).for_each(|&v| pd[v] += 1);
            for v in 0..n {
                let mean = deg[v] as f64 / k as f64;
                if (pd[v] as f64 - mean).abs() > 3.0 * mean.sqrt() + 1.0 {
                    bad[v] = true;
                }
            }
        }
        let misses = bad.iter().filter(|&&b| b).count();
        if best.as_ref().map_or(true, |b| misses < b.1) {
            best = Some((parts, misses));
        }
        if misses == 0 {
            break;
        }
    }
    best.expect("at least one attempt")
}

/// Colors `H′` into the `D` matchings `M_1..M_D` over `K = ⌈1/κ⌉` rounds
/// (at most `D`). Each round takes one part of a random partition of `H′`
/// and one slice of the colors, runs [`nibble_color`] with `γ/4`, then
/// [`absorb_batch`] with the reservoir edges and defect vertices not used by
/// earlier rounds. `N_i ⊇ M_i`, `N_i \ M_i ⊆ H′ ∪ R` and disjointness are
/// asserted; the per-vertex counters and the coverage are reported.
pub fn main_color(
    h: &LinearHypergraph,
    h_prime: &[usize],
    pre: &[Vec<usize>],
    r: &[usize],
    s: &[usize],
    params: &MainParams,
    seed: u64,
) -> Result<MainOutput, NibbleError> {
    let n = h.n();
    let d = pre.len();
    let ap = params.absorb;
    let views = derived_views(h, ap.eps);
    if d == 0 {
        let coverage = coverage::<Vec<usize>>(n, &[], &views.u, s).expect("empty family");
        return Ok(MainOutput {
            matchings: Vec::new(),
            rounds: Vec::new(),
            partition_misses: 0,
            n2_violations: Vec::new(),
            coverage,
            leftover: h_prime.to_vec(),
        });
    }
    let k = ((1.0 / ap.kappa).ceil() as usize).clamp(1, d);
    let mut rng = rng::seeded(seed);
    let (parts, partition_misses) = partition_edges(h, h_prime, k, params.partition_retries, &mut rng);
    let mut in_r = vec![false; h.m()];
    r.iter().for_each(|&e| in_r[e] = true);
    let mut r_used = vec![false; h.m()];
    let mut s_left: Vec<usize> = s.to_vec();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); d];
    let mut rounds = Vec::with_capacity(k);
    let np = NibbleParams {
        gamma: ap.gamma / 4.0,
        kappa: ap.kappa,
        theta: params.theta,
        max_mini_rounds: params.max_mini_rounds,
        strict: false,
    };
    let round_ap = AbsorbParams { gamma: ap.gamma / 4.0, ..ap };
    let all: Vec<usize> = (0..n).collect();
    for (round, part) in parts.iter().enumerate() {
        let lo = round * d / k;
        let hi = (round + 1) * d / k;
        let slice = &pre[lo..hi];
        let fv = vec![all.clone(), views.u.clone(), s_left.clone()];
        let nib = nibble_color(h, part, slice, &fv, std::slice::from_ref(part), &np, rng.gen())
            .map_err(|e| NibbleError::RoundFailed { round, stage: format!("nibble: {e}") })?;
        let r_round: Vec<usize> = r.iter().copied().filter(|&e| !r_used[e]).collect();
        let ab = absorb_batch(h, &nib.matchings, &r_round, &s_left, &round_ap, rng.gen())
            .map_err(|e| NibbleError::RoundFailed { round, stage: format!("absorb: {e}") })?;
        let mut used_here = 0;
        for m in &ab.matchings {
            for &e in m {
                if in_r[e] {
                    r_used[e] = true;
                    used_here += 1;
                }
            }
        }
        let taken: Vec<usize> = ab.coverage.defects.values().copied().collect();
        s_left.retain(|v| !taken.contains(v));
        rounds.push(RoundReport {
            colors: hi - lo,
            part_edges: part.len(),
            nibble_misses: nib.misses.len(),
            branch: ab.branch,
            status: ab.coverage.status,
            defects: taken.len(),
            reservoir_used: used_here,
        });
        for (j, m) in ab.matchings.into_iter().enumerate() {
            out[lo + j] = m;
        }
    }

    let mut in_hp = vec![false; h.m()];
    h_prime.iter().for_each(|&e| in_hp[e] = true);
    let mut owner = vec![usize::MAX; h.m()];
    for (i, m) in out.iter().enumerate() {
        for &e in m {
            if owner[e] != usize::MAX {
                return Err(NibbleError::Invariant(format!("edge {e} in N_{} and N_{i}", owner[e])));
            }
            owner[e] = i;
        }
        let orig: std::collections::HashSet<usize> = pre[i].iter().copied().collect();
        if pre[i].iter().any(|e| m.binary_search(e).is_err()) {
            return Err(NibbleError::Invariant(format!("N_{i} lost an edge of M_{i}")));
        }
        if let Some(&e) = m.iter().find(|e| !orig.contains(e) && !in_hp[**e] && !in_r[**e]) {
            return Err(NibbleError::Invariant(format!("N_{i} gained edge {e} outside H′ ∪ R")));
        }
    }
    let cap = ap.gamma * d as f64;
    let mut r_hits = vec![0usize; n];
    let mut hp_miss = vec![0usize; n];
    for e in 0..h.m() {
        if in_r[e] && owner[e] != usize::MAX {
            h.edge(e).iter().for_each(|&v| r_hits[v] += 1);
        }
        if in_hp[e] && owner[e] == usize::MAX {
            h.edge(e).iter().for_each(|&v| hp_miss[v] += 1);
        }
    }
    let n2_violations = (0..n).filter(|&v| r_hits[v] as f64 > cap || hp_miss[v] as f64 > cap).collect();
    let coverage = coverage(
        n,
        &out.iter().map(|m| m.iter().map(|&e| h.edge(e)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        &views.u,
        s,
    )
    .map_err(|e| NibbleError::Invariant(e.to_string()))?;
    let leftover = h_prime.iter().copied().filter(|&e| owner[e] == usize::MAX).collect();
    Ok(MainOutput { matchings: out, rounds, partition_misses, n2_violations, coverage, leftover })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeftoverOutput {
    /// `N_c` in the order of the color set.
    pub matchings: Vec<Vec<usize>>,
    pub coverage: CoverageReport,
    pub branch: AbsorbBranch,
    /// Colors whose extended matching was absorbed by typicality rather than smallness.
    pub typical: Vec<usize>,
}

/// Colors `H_rem` with the colors `C`, where color `C[j]` already holds the
/// matching `pre[j]`. Each edge gets a color whose matching it avoids (list
/// greedy over conflict lists, classes kept to `γn/2` vertices when possible),
/// then every extended matching is absorbed. Asserts
/// `H_rem ⊆ ∪(N_c \ M_c) ⊆ H_rem ∪ R`.
pub fn leftover_color(
    h: &LinearHypergraph,
    colors: &[usize],
    pre: &[Vec<usize>],
    r: &[usize],
    h_rem: &[usize],
    s: &[usize],
    params: &AbsorbParams,
    seed: u64,
) -> Result<LeftoverOutput, NibbleError> {
    let n = h.n();
    if colors.len() != pre.len() {
        return Err(NibbleError::BadInput(format!("{} colors but {} matchings", colors.len(), pre.len())));
    }
    let k = colors.len();
    let mut occ = Occupancy::new(n, k);
    for (j, m) in pre.iter().enumerate() {
        for &e in m {
            h.edge(e).iter().for_each(|&v| occ.set(j, v));
        }
    }
    let sub = h.restrict(h_rem);
    let lists: Vec<Vec<usize>> = h_rem.iter().map(|&e| (0..k).filter(|&j| occ.free(j, h.edge(e))).collect()).collect();
    let la = ListAssignment::new((0..k).collect(), lists).expect("lists drawn from the palette");
    let ord = size_order(&sub);
    let psi = match list_greedy(&sub, &ord, &la, 0.0, params.gamma / 2.0) {
        Ok(c) => c,
        Err(_) => list_greedy(&sub, &ord, &la, 0.0, 1.0).map_err(|e| match e {
            crate::greedy::GreedyError::ListExhausted(i) => NibbleError::ListExhausted(h_rem[i]),
            other => NibbleError::BadInput(other.to_string()),
        })?,
    };
    let mut ext: Vec<Vec<usize>> = pre.to_vec();
    for (i, &e) in h_rem.iter().enumerate() {
        let j = psi.get(i).ok_or(NibbleError::ListExhausted(e))?;
        ext[j].push(e);
    }
    let limit = params.gamma * n as f64;
    let mut typical = Vec::new();
    let tagged: Vec<(Vec<usize>, AbsorbTag)> = ext
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let cover: usize = m.iter().map(|&e| h.edge(e).len()).sum();
            let tag = if cover as f64 <= limit {
                AbsorbTag::Smallness
            } else {
                typical.push(colors[j]);
                AbsorbTag::Typicality
            };
            (m.clone(), tag)
        })
        .collect();
    let ab = absorb_small_typical(h, &tagged, r, s, params, seed).map_err(NibbleError::AbsorptionFailed)?;

    let mut in_rem = vec![false; h.m()];
    h_rem.iter().for_each(|&e| in_rem[e] = true);
    let mut in_r = vec![false; h.m()];
    r.iter().for_each(|&e| in_r[e] = true);
    let mut got = vec![false; h.m()];
    for (j, m) in ab.matchings.iter().enumerate() {
        for &e in m {
            if pre[j].contains(&e) {
                continue;
            }
            if !in_rem[e] && !in_r[e] {
                return Err(NibbleError::Invariant(format!("color {} gained edge {e} outside H_rem ∪ R", colors[j])));
            }
            got[e] = true;
        }
    }
    if let Some(&e) = h_rem.iter().find(|&&e| !got[e]) {
        return Err(NibbleError::Invariant(format!("leftover edge {e} not colored")));
    }
    Ok(LeftoverOutput { matchings: ab.matchings, coverage: ab.coverage, branch: ab.branch, typical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::absorb::{synthetic_batch, synthetic_host};
    use crate::generators::uniform_near_regular;

    #[test]
    fn gamma_one_drops_everything() {
        let h = uniform_near_regular(300, 3, 10, 0.2, 1).unwrap();
        let cfg = PrConfig { retries: 1, ..PrConfig::new(1.0, 0.2) };
        let all: Vec<usize> = (0..300).collect();
        let out = pseudorandom_matching(&h, &cfg, &[all], 3).unwrap();
        assert!(out.matching.is_empty());
        assert_eq!(out.stats[0].value, 300.0);
    }

    #[test]
    fn disjoint_edges_binomial() {
        // 500 disjoint triples; greedy takes them all, each dropped with prob γ.
        let edges: Vec<Vec<usize>> = (0..500).map(|i| vec![3 * i, 3 * i + 1, 3 * i + 2]).collect();
        let h = LinearHypergraph::build(1500, edges, false).unwrap();
        let cfg = PrConfig { retries: 1, degree_floor: 1, ..PrConfig::new(0.3, 0.05) };
        let all: Vec<usize> = (0..1500).collect();
        let mut total = 0.0;
        for seed in 0..20 {
            let out = pseudorandom_matching(&h, &cfg, &[all.clone()], seed).unwrap();
            assert_eq!(out.greedy_size, 500);
            total += out.stats[0].value / 1500.0;
        }
        // Mean of 20 Binomial(500, .3)/500 has sd ≈ .0046.
        assert!((total / 20.0 - 0.3).abs() < 0.02, "{}", total / 20.0);
    }

    #[test]
    fn uniform_window_holds() {
        let h = uniform_near_regular(2000, 3, 60, 0.05, 7).unwrap();
        let cfg = PrConfig::new(0.2, 0.05);
        let all: Vec<usize> = (0..2000).collect();
        let mut ok = 0;
        for seed in 0..20 {
            if pseudorandom_matching(&h, &PrConfig { retries: 1, ..cfg }, &[all.clone()], seed).is_ok() {
                ok += 1;
            }
        }
        assert!(ok >= 18, "{ok}/20");
    }

    #[test]
    fn non_uniform_rejected() {
        let h = LinearHypergraph::build(5, vec![vec![0, 1], vec![2, 3, 4]], false).unwrap();
        assert!(matches!(pseudorandom_matching(&h, &PrConfig::new(0.2, 0.05), &[], 0), Err(NibbleError::BadInput(_))));
    }

    #[test]
    fn single_color_on_disjoint_edges() {
        let edges: Vec<Vec<usize>> = (0..10).map(|i| vec![2 * i, 2 * i + 1]).collect();
        let h = LinearHypergraph::build(20, edges, false).unwrap();
        let hp: Vec<usize> = (0..10).collect();
        let out = nibble_color(&h, &hp, &[Vec::new()], &[], &[hp.clone()], &NibbleParams::new(0.0, 0.05), 1).unwrap();
        assert_eq!(out.matchings[0], hp);
        assert!(out.uncolored.is_empty());
        assert!(out.misses.is_empty());
    }

    #[test]
    fn keeps_precolored() {
        let h = uniform_near_regular(300, 3, 12, 0.2, 2).unwrap();
        let pre = vec![vec![0], Vec::new(), vec![5]];
        let hp: Vec<usize> = (0..h.m()).collect();
        let out = nibble_color(&h, &hp, &pre, &[], &[], &NibbleParams::new(0.1, 0.05), 4).unwrap();
        assert!(out.matchings[0].contains(&0));
        assert!(out.matchings[2].contains(&5));
        let mut seen = vec![false; h.m()];
        for m in &out.matchings {
            let mut hit = vec![false; 300];
            for &e in m {
                assert!(!std::mem::replace(&mut seen[e], true));
                for &v in h.edge(e) {
                    assert!(!std::mem::replace(&mut hit[v], true));
                }
            }
        }
        for &e in &out.uncolored {
            assert!(!seen[e]);
        }
    }

    #[test]
    fn nibble_statistics_mostly_pass() {
        let d = 80;
        let h = uniform_near_regular(1500, 3, d, 0.05, 11).unwrap();
        let hp: Vec<usize> = (0..h.m()).collect();
        let all: Vec<usize> = (0..1500).collect();
        let half: Vec<usize> = (0..750).collect();
        let params = NibbleParams::new(0.2, 0.05);
        let mut ok = 0;
        for seed in 0..10 {
            let out =
                nibble_color(&h, &hp, &vec![Vec::new(); d], &[all.clone(), half.clone()], &[hp.clone()], &params, seed)
                    .unwrap();
            ok += usize::from(out.misses.is_empty());
        }
        assert!(ok >= 9, "{ok}/10");
    }

    #[test]
    fn main_zero_colors() {
        let h = uniform_near_regular(60, 3, 5, 0.5, 1).unwrap();
        let hp: Vec<usize> = (0..h.m()).collect();
        let out = main_color(&h, &hp, &[], &[], &[], &MainParams::new(AbsorbParams::default()), 0).unwrap();
        assert!(out.matchings.is_empty());
        assert_eq!(out.leftover, hp);
    }

    #[test]
    fn main_on_graph_with_reservoir() {
        let h = synthetic_host(400, 4, 0.2, 5);
        let ap = AbsorbParams::default();
        let batch = synthetic_batch(&h, &ap, 0, 6);
        let d = 20;
        let pre = vec![Vec::new(); d];
        let out = main_color(&h, &[], &pre, &batch.reservoir, &batch.defects, &MainParams::new(ap), 9).unwrap();
        assert_eq!(out.coverage.status, CoverageStatus::Perfect);
        for m in &out.matchings {
            assert!(m.iter().all(|e| batch.reservoir.binary_search(e).is_ok()));
        }
    }

    #[test]
    fn leftover_single_edge_avoids_conflicts() {
        let h = LinearHypergraph::build(6, vec![vec![0, 1], vec![1, 2], vec![3, 4, 5]], false).unwrap();
        let out = leftover_color(&h, &[7, 8], &[vec![0], vec![]], &[], &[1], &[], &AbsorbParams::default(), 0).unwrap();
        assert_eq!(out.matchings[0], vec![0]);
        assert_eq!(out.matchings[1], vec![1]);
    }

    #[test]
    fn leftover_empty_rem() {
        let h = LinearHypergraph::build(4, vec![vec![0, 1], vec![2, 3]], false).unwrap();
        let out = leftover_color(&h, &[0], &[vec![0]], &[], &[], &[], &AbsorbParams::default(), 0).unwrap();
        assert_eq!(out.matchings, vec![vec![0]]);
    }
}
