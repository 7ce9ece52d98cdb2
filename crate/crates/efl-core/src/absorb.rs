//! Reservoirs of size-2 edges, absorber certificates, the regularized
//! small-edge hypergraph and the matching extensions that cover `U`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finish::vizing;
use crate::hypercore::{
    coverage, derived_views, is_full, verify_coloring, vertices_of_degree, CoverageReport, CoverageStatus,
    DerivedViews, EdgeColoring, Hierarchy, LinearHypergraph, SimpleGraph,
};
use crate::matching::{crossing_match, dense_perfect_match, gf_factor, max_matching_general, NONE};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReservoirKind {
    /// Pseudorandom sample of all of `G`.
    A1,
    /// Absorber plus regularising edges.
    A2,
    /// Absorber only.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    pub rho: f64,
    pub xi: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AbsorberCert {
    /// Largest `| |N_R(v) ∩ X| − ρ|N_G'(v) ∩ X| |` (and the same for `\X`).
    pub typicality_residual: f64,
    /// Smallest `ρ e_G(S,T) + ξ|S||T| − |E_G(S,T) ∩ R|` over sampled pairs.
    pub upper_margin: f64,
    /// Smallest `|E_G'(S,T) ∩ R| − ρ e_G'(S,T) + ξ|S||T|` over sampled pairs.
    pub lower_margin: f64,
    pub pairs_sampled: usize,
    /// Every reservoir edge meets `U`.
    pub within_g_prime: bool,
}

impl AbsorberCert {
    pub fn certifies(&self, gamma: f64, n: usize) -> bool {
        self.within_g_prime && self.typicality_residual <= gamma * n as f64 + 1e-9 && self.upper_margin >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    /// Sorted edge ids of `H`, all of size 2.
    pub edges: Vec<usize>,
    pub kind: ReservoirKind,
    pub params: ReservoirParams,
    /// Largest `|d_R(v) − ρ d_G(v)|` over the vertices the kind constrains.
    pub degree_residual: f64,
    /// Vertices outside the kind's degree window.
    pub window_misses: Vec<usize>,
    pub absorber: AbsorberCert,
    /// Attempt index that produced the sample (0 for deterministic kinds).
    pub attempt: usize,
}

impl Reservoir {
    pub fn contains(&self, e: usize) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn degrees(&self, h: &LinearHypergraph) -> Vec<usize> {
        edge_degrees(h, &self.edges)
    }

    /// Reservoir edges meeting `U`.
    pub fn absorber_part(&self, h: &LinearHypergraph, views: &DerivedViews) -> Vec<usize> {
        self.edges.iter().copied().filter(|&e| h.edge(e).iter().any(|&v| views.in_u[v])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReservoirError {
    #[error(
        "certification failed after {attempts} attempts: degree residual {degree_residual:.2}, \
         typicality residual {typicality_residual:.2}, tolerance {tolerance:.2}"
    )]
    CertFailed { attempts: usize, degree_residual: f64, typicality_residual: f64, tolerance: f64 },
    #[error("instance is not (rho, eps)-full: {0}")]
    NotFull(String),
    #[error("regularising step failed: {0}")]
    FactorInfeasible(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
}

fn edge_degrees(h: &LinearHypergraph, edges: &[usize]) -> Vec<usize> {
    let mut d = vec![0; h.n()];
    for &e in edges {
        for &v in h.edge(e) {
            d[v] += 1;
        }
    }
    d
}

/// `{V, U}`, the smallest family every certificate is checked against.
pub fn base_family(h: &LinearHypergraph, views: &DerivedViews) -> Vec<Vec<usize>> {
    vec![(0..h.n()).collect(), views.u.clone()]
}

fn typicality_residual(
    h: &LinearHypergraph,
    views: &DerivedViews,
    r: &[usize],
    family: &[Vec<usize>],
    rho: f64,
) -> f64 {
    let n = h.n();
    let mut r_adj = vec![Vec::new(); n];
    for &e in r {
        let (a, b) = (h.edge(e)[0], h.edge(e)[1]);
        r_adj[a].push(b);
        r_adj[b].push(a);
    }
    let mut gp_adj = vec![Vec::new(); n];
    for &i in &views.g_prime {
        let (a, b) = views.g.edges[i];
        gp_adj[a].push(b);
        gp_adj[b].push(a);
    }
    let mut inside = vec![false; n];
    let mut worst: f64 = 0.0;
    for x in family {
        x.iter().for_each(|&v| inside[v] = true);
        for v in 0..n {
            let r_in = r_adj[v].iter().filter(|&&w| inside[w]).count() as f64;
            let g_in = gp_adj[v].iter().filter(|&&w| inside[w]).count() as f64;
            let r_out = r_adj[v].len() as f64 - r_in;
            let g_out = gp_adj[v].len() as f64 - g_in;
            worst = worst.max((r_in - rho * g_in).abs()).max((r_out - rho * g_out).abs());
        }
        x.iter().for_each(|&v| inside[v] = false);
    }
    worst
}

/// Typicality is checked exactly over `family`; regularity on `trials`
/// random disjoint pairs `S, T` with sizes in `[ξn, 2ξn]`.
#[allow(clippy::too_many_arguments)]
pub fn certify_absorber(
    h: &LinearHypergraph,
    r: &[usize],
    family: &[Vec<usize>],
    rho: f64,
    xi: f64,
    eps: f64,
    trials: usize,
    seed: u64,
) -> AbsorberCert {
    let n = h.n();
    let views = derived_views(h, eps);
    let within_g_prime = r.iter().all(|&e| h.edge(e).len() == 2 && h.edge(e).iter().any(|&v| views.in_u[v]));
    let typicality_residual = typicality_residual(h, &views, r, family, rho);
    let mut in_r = vec![false; h.m()];
    r.iter().for_each(|&e| in_r[e] = true);
    let mut rng = rng::seeded(seed);
    let base = ((xi * n as f64).ceil() as usize).max(1);
    let (mut upper_margin, mut lower_margin) = (f64::INFINITY, f64::INFINITY);
    let mut pairs_sampled = 0;
    let mut side = vec![0u8; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..trials {
        let size = rng.gen_range(base..=2 * base);
        if 2 * size > n {
            break;
        }
        perm.shuffle(&mut rng);
        let (s, t) = (&perm[..size], &perm[size..2 * size]);
        s.iter().for_each(|&v| side[v] = 1);
        t.iter().for_each(|&v| side[v] = 2);
        let (mut e_g, mut e_gp, mut e_r) = (0.0, 0.0, 0.0);
        for &v in s {
            for &(w, id) in &views.g.adj[v] {
                if side[w] == 2 {
                    e_g += 1.0;
                    if views.in_u[v] || views.in_u[w] {
                        e_gp += 1.0;
                    }
                    if in_r[views.g_edges[id]] {
                        e_r += 1.0;
                    }
                }
            }
        }
        s.iter().chain(t).for_each(|&v| side[v] = 0);
        let slack = xi * (size * size) as f64;
        upper_margin = upper_margin.min(rho * e_g + slack - e_r);
        lower_margin = lower_margin.min(e_r - rho * e_gp + slack);
        pairs_sampled += 1;
    }
    if pairs_sampled == 0 {
        upper_margin = 0.0;
        lower_margin = 0.0;
    }
    AbsorberCert { typicality_residual, upper_margin, lower_margin, pairs_sampled, within_g_prime }
}

/// Samples each edge of `G` (type A1) or of `G'` (type B) with probability
/// ρ and validates the degree and typicality windows with tolerance ξn,
/// retrying with derived seeds up to 10 times.
pub fn sample_reservoir(
    h: &LinearHypergraph,
    kind: ReservoirKind,
    params: ReservoirParams,
    family: &[Vec<usize>],
    seed: u64,
) -> Result<Reservoir, ReservoirError> {
    let (res, passed) = sample_reservoir_best(h, kind, params, family, seed)?;
    if passed {
        return Ok(res);
    }
    Err(ReservoirError::CertFailed {
        attempts: 10,
        degree_residual: res.degree_residual,
        typicality_residual: res.absorber.typicality_residual,
        tolerance: params.xi * h.n() as f64,
    })
}

/// Like [`sample_reservoir`], but returns the best attempt when none passes,
/// with a flag telling whether it passed.
pub fn sample_reservoir_best(
    h: &LinearHypergraph,
    kind: ReservoirKind,
    params: ReservoirParams,
    family: &[Vec<usize>],
    seed: u64,
) -> Result<(Reservoir, bool), ReservoirError> {
    let ReservoirParams { rho, xi, eps } = params;
    if !(0.0..1.0).contains(&rho) {
        return Err(ReservoirError::BadParams(format!("rho = {rho} outside [0,1)")));
    }
    if kind == ReservoirKind::A2 {
        return Err(ReservoirError::BadParams("type A2 reservoirs come from regularising_reservoir".into()));
    }
    let n = h.n();
    let views = derived_views(h, eps);
    let pool: Vec<usize> = match kind {
        ReservoirKind::A1 => views.g_edges.clone(),
        _ => views.g_prime.iter().map(|&i| views.g_edges[i]).collect(),
    };
    let tolerance = xi * n as f64;
    let constrained = |v: usize| kind == ReservoirKind::A1 || views.in_u[v];
    let mut best: Option<(f64, usize, Vec<usize>, f64, f64)> = None;
    for attempt in 0..10 {
        let mut rng = rng::derive(seed, attempt as u64);
        let edges: Vec<usize> = pool.iter().copied().filter(|_| rng.gen_bool(rho)).collect();
        let deg = edge_degrees(h, &edges);
        let degree_residual = (0..n)
            .filter(|&v| constrained(v))
            .map(|v| (deg[v] as f64 - rho * views.g.degree(v) as f64).abs())
            .fold(0.0, f64::max);
        let in_gp: Vec<usize> = edges.iter().copied().filter(|&e| h.edge(e).iter().any(|&v| views.in_u[v])).collect();
        let typ = typicality_residual(h, &views, &in_gp, family, rho);
        let score = degree_residual.max(typ);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, attempt, edges, degree_residual, typ));
        }
        if score <= tolerance {
            break;
        }
    }
    let (score, attempt, edges, degree_residual, _) = best.expect("at least one attempt");
    let deg = edge_degrees(h, &edges);
    let in_gp: Vec<usize> = edges.iter().copied().filter(|&e| h.edge(e).iter().any(|&v| views.in_u[v])).collect();
    let absorber = certify_absorber(h, &in_gp, family, rho, xi, eps, 200, seed ^ 0x5eed);
    let window_misses = (0..n)
        .filter(|&v| constrained(v))
        .filter(|&v| (deg[v] as f64 - rho * views.g.degree(v) as f64).abs() > tolerance)
        .collect();
    let res = Reservoir { edges, kind, params, degree_residual, window_misses, absorber, attempt };
    Ok((res, score <= tolerance))
}

/// `R_abs` plus edges from full-degree vertices to low-degree vertices, plus a
/// `(g, f)`-factor with `g = f − 1` on the high-degree side.
pub fn regularising_reservoir(
    h: &LinearHypergraph,
    r_abs: &Reservoir,
    params: ReservoirParams,
) -> Result<Reservoir, ReservoirError> {
    let ReservoirParams { rho, xi, eps } = params;
    let n = h.n();
    let nf = n as f64;
    let full = is_full(h, rho, eps);
    if !full.full {
        return Err(ReservoirError::NotFull(format!(
            "|U| = {}, {} vertices of graph degree n-1",
            full.high_degree, full.full_degree
        )));
    }
    let views = derived_views(h, eps);
    let g = &views.g;
    let mut in_res = vec![false; h.m()];
    r_abs.edges.iter().for_each(|&e| in_res[e] = true);
    let d_abs = r_abs.degrees(h);
    let in_u2: Vec<bool> =
        (0..n).map(|w| !views.in_u[w] && g.degree(w) as f64 >= (1.0 - 20.0 * eps / rho) * nf - 1e-9).collect();
    let s_size = ((rho - 20.0 * eps) * nf).ceil().max(0.0) as usize;
    let hubs: Vec<usize> = (0..n).filter(|&v| g.degree(v) + 1 == n).take(s_size).collect();
    if hubs.len() < s_size {
        return Err(ReservoirError::NotFull(format!("only {} vertices of degree n-1, need {s_size}", hubs.len())));
    }
    let mut is_hub = vec![false; n];
    hubs.iter().for_each(|&v| is_hub[v] = true);

    let mut extra = Vec::new();
    for w in (0..n).filter(|&w| !views.in_u[w] && !in_u2[w]) {
        let need = ((rho - 20.0 * eps) * nf - d_abs[w] as f64).ceil();
        if need <= 0.0 {
            continue;
        }
        let mut got = 0usize;
        for &(x, id) in &g.adj[w] {
            if got as f64 >= need {
                break;
            }
            let e = views.g_edges[id];
            if is_hub[x] && !in_res[e] {
                in_res[e] = true;
                extra.push(e);
                got += 1;
            }
        }
        if (got as f64) < need {
            return Err(ReservoirError::FactorInfeasible(format!("vertex {w} has {got} of {need} hub edges")));
        }
    }

    let inner = |v: usize| views.in_u[v] || in_u2[v];
    let d_now = edge_degrees(h, &extra);
    let mut hi = vec![0usize; n];
    let mut lo = vec![0usize; n];
    for w in (0..n).filter(|&w| inner(w)) {
        let f = (rho * g.degree(w) as f64 + xi * nf - d_abs[w] as f64 - d_now[w] as f64).floor();
        if f < 1.0 {
            return Err(ReservoirError::FactorInfeasible(format!("f({w}) = {f} leaves no room for g = f - 1")));
        }
        hi[w] = f as usize;
        lo[w] = hi[w] - 1;
    }
    let cand: Vec<usize> = (0..g.m())
        .filter(|&i| {
            let (a, b) = g.edges[i];
            inner(a) && inner(b) && !in_res[views.g_edges[i]]
        })
        .collect();
    let sub = g.with_edges(&cand);
    let factor = gf_factor(&sub, &lo, &hi).map_err(|e| ReservoirError::FactorInfeasible(e.to_string()))?;
    let mut edges = r_abs.edges.clone();
    edges.extend(extra);
    edges.extend(factor.iter().map(|&i| views.g_edges[cand[i]]));
    edges.sort_unstable();

    let deg = edge_degrees(h, &edges);
    let mut window_misses = Vec::new();
    let mut degree_residual: f64 = 0.0;
    for w in 0..n {
        let d = deg[w] as f64;
        let target = rho * g.degree(w) as f64;
        let ok = if views.in_u[w] {
            degree_residual = degree_residual.max((d - target).abs());
            (d - target).abs() <= xi * nf + 1e-9
        } else {
            d >= target.max((rho - 20.0 * eps) * nf) - 1e-9 && d <= rho * (1.0 - eps) * nf + xi * nf + 1e-9
        };
        if !ok {
            window_misses.push(w);
        }
    }
    Ok(Reservoir {
        edges,
        kind: ReservoirKind::A2,
        params,
        degree_residual,
        window_misses,
        absorber: r_abs.absorber.clone(),
        attempt: 0,
    })
}

/// `H_small \ R` padded with singleton edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularized {
    pub hypergraph: LinearHypergraph,
    /// Source edge in `H` per edge of `hypergraph`; `None` for padding.
    pub source: Vec<Option<usize>>,
    /// Singletons added at each vertex.
    pub padding: Vec<usize>,
    /// The degree padded up to.
    pub target: usize,
    /// Degree window `(1−ρ)(n−1 ± βn)`.
    pub window: (f64, f64),
    pub misses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegularizeError {
    #[error("vertex {vertex} has degree {degree}, outside [{lo:.2}, {hi:.2}]")]
    WindowMiss { vertex: usize, degree: usize, lo: f64, hi: f64 },
    #[error("type B reservoir needs 3 rho <= eps, got rho = {rho}, eps = {eps}")]
    Precondition { rho: f64, eps: f64 },
}

/// Builds the padded hypergraph and records window misses without failing.
/// Padding at `w` never exceeds `max(0, n − 3 − d_H(w))`.
pub fn regularize_small_report(h: &LinearHypergraph, r_res: &Reservoir, hier: &Hierarchy) -> Regularized {
    let n = h.n();
    let nf = n as f64;
    let rho = r_res.params.rho;
    let mut source: Vec<Option<usize>> =
        (0..h.m()).filter(|&e| h.edge(e).len() <= hier.r1 && !r_res.contains(e)).map(Some).collect();
    let mut edges: Vec<Vec<usize>> = source.iter().map(|e| h.edge(e.unwrap()).to_vec()).collect();
    let mut deg = vec![0usize; n];
    edges.iter().flatten().for_each(|&v| deg[v] += 1);
    let target = ((1.0 - rho) * (nf - 1.0) - hier.beta * nf / 2.0).floor().max(0.0) as usize;
    let mut padding = vec![0usize; n];
    for w in 0..n {
        let cap = (n.saturating_sub(3)).saturating_sub(h.degree(w));
        padding[w] = target.saturating_sub(deg[w]).min(cap);
        for _ in 0..padding[w] {
            edges.push(vec![w]);
            source.push(None);
        }
        deg[w] += padding[w];
    }
    let hypergraph = LinearHypergraph::build(n, edges, true).expect("sub-hypergraph plus singletons is linear");
    let window = ((1.0 - rho) * (nf - 1.0 - hier.beta * nf), (1.0 - rho) * (nf - 1.0 + hier.beta * nf));
    let misses = (0..n).filter(|&w| (deg[w] as f64) < window.0 - 1e-9 || deg[w] as f64 > window.1 + 1e-9).collect();
    Regularized { hypergraph, source, padding, target, window, misses }
}

pub fn regularize_small(
    h: &LinearHypergraph,
    r_res: &Reservoir,
    hier: &Hierarchy,
) -> Result<Regularized, RegularizeError> {
    let ReservoirParams { rho, eps, .. } = r_res.params;
    if r_res.kind == ReservoirKind::B && 3.0 * rho > eps {
        return Err(RegularizeError::Precondition { rho, eps });
    }
    let reg = regularize_small_report(h, r_res, hier);
    if let Some(&vertex) = reg.misses.first() {
        return Err(RegularizeError::WindowMiss {
            vertex,
            degree: reg.hypergraph.degree(vertex),
            lo: reg.window.0,
            hi: reg.window.1,
        });
    }
    Ok(reg)
}

/// Covers at least `3|V \ U|/4` vertices of `V \ U`, and `|V \ U| >= 2`.
pub fn is_difficult(h: &LinearHypergraph, m: &[usize], eps: f64) -> bool {
    let views = derived_views(h, eps);
    difficult_in(h, &views, m)
}

fn difficult_in(h: &LinearHypergraph, views: &DerivedViews, m: &[usize]) -> bool {
    let outside = h.n() - views.u.len();
    let covered = m.iter().flat_map(|&e| h.edge(e)).filter(|&&v| !views.in_u[v]).count();
    outside >= 2 && 4 * covered >= 3 * outside
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorbParams {
    pub rho: f64,
    pub eps: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub xi: f64,
}

impl Default for AbsorbParams {
    fn default() -> Self {
        Self { rho: 0.3, eps: 0.02, gamma: 0.05, kappa: 0.01, xi: 0.005 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbsorbBranch {
    /// `U` is empty.
    Trivial,
    /// Every matching extended by a bipartite matching from `U` to `V \ U`.
    Crossing,
    /// Every matching extended by a perfect matching inside `U`.
    Internal,
    /// Per-matching choice (small/typical absorption).
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbsorbTag {
    /// `v(M) <= γn`.
    Smallness,
    /// `|V(M) ∩ U| <= εn` with `R` typical for `U ± V(M)`.
    Typicality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Absorbed {
    /// Extended matchings, as edge ids of `H`.
    pub matchings: Vec<Vec<usize>>,
    pub branch: AbsorbBranch,
    pub coverage: CoverageReport,
    /// True when the branch promises perfect coverage.
    pub perfect_required: bool,
    /// Matchings outside the `γ|X| ± κn` window for some tracked set.
    pub pseudorandom_misses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AbsorbError {
    #[error("matching {0} is not a matching")]
    NotAMatching(usize),
    #[error("edge {0} cannot be a reservoir edge")]
    BadReservoirEdge(usize),
    #[error("edge {edge} of matching {index} is shared or lies in the reservoir")]
    Overlap { index: usize, edge: usize },
    #[error("matching {0} is difficult")]
    DifficultRejected(usize),
    #[error("absorption failed for matching {index}: {step}")]
    AbsorptionFailed { index: usize, step: String },
    #[error("precondition unmet: {0}")]
    Precondition(String),
}

/// Shared bookkeeping for the extension routines.
struct Extender<'a> {
    h: &'a LinearHypergraph,
    views: DerivedViews,
    /// Graph of reservoir edges; its edge `i` is `H`-edge `r_ids[i]`.
    rg: SimpleGraph,
    r_ids: Vec<usize>,
    used: Vec<bool>,
    in_s: Vec<bool>,
    defect_taken: Vec<bool>,
    rng: Rng,
}

impl<'a> Extender<'a> {
    fn new(
        h: &'a LinearHypergraph,
        matchings: &[Vec<usize>],
        r: &[usize],
        s: &[usize],
        eps: f64,
        seed: u64,
    ) -> Result<Self, AbsorbError> {
        let n = h.n();
        let views = derived_views(h, eps);
        let mut owner = vec![NONE; h.m()];
        let mut r_ids = Vec::with_capacity(r.len());
        for &e in r {
            if e >= h.m() || h.edge(e).len() != 2 || owner[e] != NONE {
                return Err(AbsorbError::BadReservoirEdge(e));
            }
            owner[e] = usize::MAX - 1;
            r_ids.push(e);
        }
        let mut hit = vec![false; n];
        for (i, m) in matchings.iter().enumerate() {
            hit.iter_mut().for_each(|x| *x = false);
            for &e in m {
                if e >= h.m() || owner[e] != NONE {
                    return Err(AbsorbError::Overlap { index: i, edge: e });
                }
                owner[e] = i;
                for &v in h.edge(e) {
                    if std::mem::replace(&mut hit[v], true) {
                        return Err(AbsorbError::NotAMatching(i));
                    }
                }
            }
        }
        let rg = SimpleGraph::new(n, r_ids.iter().map(|&e| (h.edge(e)[0], h.edge(e)[1])).collect());
        let mut in_s = vec![false; n];
        s.iter().for_each(|&v| in_s[v] = true);
        Ok(Self {
            h,
            views,
            used: vec![false; r_ids.len()],
            rg,
            r_ids,
            in_s,
            defect_taken: vec![false; n],
            rng: rng::seeded(seed),
        })
    }

    fn covered(&self, m: &[usize]) -> Vec<bool> {
        let mut c = vec![false; self.h.n()];
        m.iter().flat_map(|&e| self.h.edge(e)).for_each(|&v| c[v] = true);
        c
    }

    /// Matches every uncovered `U`-vertex to an uncovered vertex outside `U`.
    fn crossing(&mut self, m: &[usize], rho: f64, xi: f64) -> Result<Vec<usize>, String> {
        let cov = self.covered(m);
        let in_u = &self.views.in_u;
        let a: Vec<usize> = self.views.u.iter().copied().filter(|&v| !cov[v]).collect();
        let mut b_pos = vec![NONE; self.h.n()];
        let mut nb = 0;
        for v in (0..self.h.n()).filter(|&v| !in_u[v] && !cov[v]) {
            b_pos[v] = nb;
            nb += 1;
        }
        let mut adj = Vec::with_capacity(a.len());
        let mut ids = Vec::with_capacity(a.len());
        for &u in &a {
            let (mut row, mut row_ids) = (Vec::new(), Vec::new());
            for &(w, id) in &self.rg.adj[u] {
                if b_pos[w] != NONE && !self.used[id] {
                    row.push(b_pos[w]);
                    row_ids.push(id);
                }
            }
            adj.push(row);
            ids.push(row_ids);
        }
        let out = crossing_match(a.len(), nb, &adj, rho, xi, self.h.n()).map_err(|e| format!("crossing: {e}"))?;
        let mut added = Vec::with_capacity(out.matching.len());
        for (ai, bi) in out.matching {
            let k = adj[ai].iter().position(|&x| x == bi).expect("matched pair is an edge");
            let id = ids[ai][k];
            self.used[id] = true;
            added.push(self.r_ids[id]);
        }
        Ok(added)
    }

    /// Covers `U \ V(M)` inside `U`. With an odd count one vertex is handled
    /// separately: matched to an outside neighbour when `perfect`, otherwise
    /// left as a defect in `S`.
    fn internal(&mut self, m: &[usize], perfect: bool) -> Result<Vec<usize>, String> {
        let cov = self.covered(m);
        let ui: Vec<usize> = self.views.u.iter().copied().filter(|&v| !cov[v]).collect();
        let mut candidates: Vec<(usize, Option<usize>)> = Vec::new();
        if ui.len() % 2 == 1 {
            for &u in &ui {
                if perfect {
                    let out = self.rg.adj[u]
                        .iter()
                        .find(|&&(w, id)| !self.views.in_u[w] && !cov[w] && !self.used[id])
                        .map(|&(_, id)| id);
                    if let Some(id) = out {
                        candidates.push((u, Some(id)));
                    }
                } else if self.in_s[u] && !self.defect_taken[u] {
                    candidates.push((u, None));
                }
                if candidates.len() == 3 {
                    break;
                }
            }
            if candidates.is_empty() {
                return Err(if perfect {
                    "no uncovered U-vertex has a free reservoir edge leaving U".into()
                } else {
                    "no free defect vertex in S".into()
                });
            }
        } else {
            candidates.push((NONE, None));
        }
        for (u, link) in candidates {
            let verts: Vec<usize> = ui.iter().copied().filter(|&v| v != u).collect();
            let used = &self.used;
            let allowed = |id: usize| !used[id];
            if let Some(found) = perfect_on(&self.rg, &verts, &allowed, &mut self.rng) {
                let mut added: Vec<usize> = found.iter().map(|&id| self.r_ids[id]).collect();
                found.iter().for_each(|&id| self.used[id] = true);
                if let Some(id) = link {
                    self.used[id] = true;
                    added.push(self.r_ids[id]);
                } else if u != NONE {
                    self.defect_taken[u] = true;
                }
                return Ok(added);
            }
        }
        Err(format!("no perfect matching on {} uncovered U-vertices", ui.len()))
    }

    fn finish(
        &self,
        matchings: &[Vec<usize>],
        added: Vec<Vec<usize>>,
        s: &[usize],
        perfect_required: bool,
    ) -> Result<(Vec<Vec<usize>>, CoverageReport), AbsorbError> {
        let extended: Vec<Vec<usize>> = matchings
            .iter()
            .zip(added)
            .map(|(m, a)| {
                let mut x = m.clone();
                x.extend(a);
                x
            })
            .collect();
        let as_sets: Vec<Vec<&[usize]>> =
            extended.iter().map(|m| m.iter().map(|&e| self.h.edge(e)).collect()).collect();
        let report = coverage(self.h.n(), &as_sets, &self.views.u, s).map_err(|e| match e {
            crate::hypercore::CoverageError::NotAMatching(i) => AbsorbError::NotAMatching(i),
        })?;
        let ok = match report.status {
            CoverageStatus::Perfect => true,
            CoverageStatus::NearlyPerfect => !perfect_required,
            CoverageStatus::Neither => false,
        };
        if !ok {
            let index = report
                .miss_counts
                .keys()
                .next()
                .map_or(0, |&v| as_sets.iter().position(|m| !m.iter().any(|e| e.contains(&v))).unwrap_or(0));
            return Err(AbsorbError::AbsorptionFailed { index, step: format!("coverage {:?}", report.status) });
        }
        Ok((extended, report))
    }
}

/// Perfect matching of `g[verts]` over allowed edges: randomized bipartite
/// attempts first, then an exact blossom computation.
fn perfect_on(g: &SimpleGraph, verts: &[usize], allowed: &dyn Fn(usize) -> bool, rng: &mut Rng) -> Option<Vec<usize>> {
    if verts.len() % 2 == 1 {
        return None;
    }
    if let Ok(m) = dense_perfect_match(g, verts, allowed, 3, rng) {
        return Some(m);
    }
    let m = max_matching_on(g, verts, allowed);
    (2 * m.len() == verts.len()).then_some(m)
}

/// Maximum matching of `g[verts]`, as edge ids. Vertices earlier in `verts`
/// are offered augmenting paths first, and matched vertices stay matched.
fn max_matching_on(g: &SimpleGraph, verts: &[usize], allowed: &dyn Fn(usize) -> bool) -> Vec<usize> {
    let mut pos = HashMap::with_capacity(verts.len());
    for (i, &v) in verts.iter().enumerate() {
        pos.insert(v, i);
    }
    let adj: Vec<Vec<usize>> = verts
        .iter()
        .map(|&v| g.adj[v].iter().filter(|&&(_, id)| allowed(id)).filter_map(|(w, _)| pos.get(w).copied()).collect())
        .collect();
    let mate = max_matching_general(verts.len(), &adj);
    let mut out = Vec::new();
    for (i, &j) in mate.iter().enumerate() {
        if j != NONE && i < j {
            let (a, b) = (verts[i], verts[j]);
            let id = g.adj[a].iter().find(|&&(w, id)| w == b && allowed(id)).expect("matched pair is an edge").1;
            out.push(id);
        }
    }
    out
}

/// Uncovered count of each set must lie in `γ|X| ± κn`; returns the first
/// failing set's description.
fn pseudorandom_miss(
    h: &LinearHypergraph,
    views: &DerivedViews,
    rg: &SimpleGraph,
    cov: &[bool],
    s: &[usize],
    gamma: f64,
    kappa: f64,
) -> Option<String> {
    let slack = kappa * h.n() as f64;
    let check = |total: usize, uncovered: usize| (uncovered as f64 - gamma * total as f64).abs() <= slack + 1e-9;
    let count = |xs: &[usize]| xs.iter().filter(|&&v| !cov[v]).count();
    if !check(views.u.len(), count(&views.u)) {
        return Some("U".into());
    }
    if !check(s.len(), count(s)) {
        return Some("S".into());
    }
    for &u in &views.u {
        let (mut tin, mut uin, mut tout, mut uout) = (0, 0, 0, 0);
        for &(w, _) in &rg.adj[u] {
            if views.in_u[w] {
                tin += 1;
                uin += usize::from(!cov[w]);
            } else {
                tout += 1;
                uout += usize::from(!cov[w]);
            }
        }
        if !check(tin, uin) || !check(tout, uout) {
            return Some(format!("N_R({u})"));
        }
    }
    None
}

/// Extends each `N_i` by reservoir edges so that every `U`-vertex is covered:
/// by bipartite matchings into `V \ U` when `|U| <= n/100`, otherwise by
/// perfect matchings inside `U` (one defect in `S` per matching when
/// `|U| > (1−2ε)n`). Pseudorandomness of the inputs is re-checked and reported.
pub fn absorb_batch(
    h: &LinearHypergraph,
    matchings: &[Vec<usize>],
    r: &[usize],
    s: &[usize],
    params: &AbsorbParams,
    seed: u64,
) -> Result<Absorbed, AbsorbError> {
    let n = h.n();
    let mut ex = Extender::new(h, matchings, r, s, params.eps, seed)?;
    let misses = (0..matchings.len())
        .filter(|&i| {
            let cov = ex.covered(&matchings[i]);
            pseudorandom_miss(h, &ex.views, &ex.rg, &cov, s, params.gamma, params.kappa).is_some()
        })
        .collect();
    let u = ex.views.u.len();
    let perfect_required = u as f64 <= (1.0 - 2.0 * params.eps) * n as f64;
    let branch = if u == 0 {
        AbsorbBranch::Trivial
    } else if 100 * u <= n {
        AbsorbBranch::Crossing
    } else {
        AbsorbBranch::Internal
    };
    let mut added = Vec::with_capacity(matchings.len());
    for (i, m) in matchings.iter().enumerate() {
        let step = match branch {
            AbsorbBranch::Trivial => Ok(Vec::new()),
            AbsorbBranch::Crossing => ex.crossing(m, params.rho, params.xi),
            _ => ex.internal(m, perfect_required),
        };
        added.push(step.map_err(|step| AbsorbError::AbsorptionFailed { index: i, step })?);
    }
    let (matchings, coverage) = ex.finish(matchings, added, s, perfect_required || branch == AbsorbBranch::Crossing)?;
    Ok(Absorbed { matchings, branch, coverage, perfect_required, pseudorandom_misses: misses })
}

/// Extension for matchings that are small (`v(M) <= γn`) or meet `U` in at
/// most `εn` vertices. Matchings leaving at most `n/100` vertices of `U`
/// uncovered are extended across to `V \ U` first; the rest inside `U`,
/// perfectly when `|U| <= (1−10ε)n`, otherwise with one defect in `S` each.
pub fn absorb_small_typical(
    h: &LinearHypergraph,
    tagged: &[(Vec<usize>, AbsorbTag)],
    r: &[usize],
    s: &[usize],
    params: &AbsorbParams,
    seed: u64,
) -> Result<Absorbed, AbsorbError> {
    let n = h.n();
    let matchings: Vec<Vec<usize>> = tagged.iter().map(|(m, _)| m.clone()).collect();
    let mut ex = Extender::new(h, &matchings, r, s, params.eps, seed)?;
    for (i, (m, tag)) in tagged.iter().enumerate() {
        if *tag == AbsorbTag::Typicality && difficult_in(h, &ex.views, m) {
            return Err(AbsorbError::DifficultRejected(i));
        }
    }
    let u = ex.views.u.len();
    let perfect_required = u as f64 <= (1.0 - 10.0 * params.eps) * n as f64;
    let mut added = vec![Vec::new(); matchings.len()];
    let mut crossing = Vec::new();
    let mut inner = Vec::new();
    for (i, m) in matchings.iter().enumerate() {
        let cov = ex.covered(m);
        let missing = ex.views.u.iter().filter(|&&v| !cov[v]).count();
        if missing == 0 {
            continue;
        }
        if 100 * missing <= n {
            crossing.push(i);
        } else {
            inner.push(i);
        }
    }
    for &i in &crossing {
        added[i] = ex
            .crossing(&matchings[i], params.rho, params.xi)
            .map_err(|step| AbsorbError::AbsorptionFailed { index: i, step })?;
    }
    for &i in &inner {
        added[i] = ex
            .internal(&matchings[i], perfect_required)
            .map_err(|step| AbsorbError::AbsorptionFailed { index: i, step })?;
    }
    let branch = match (crossing.is_empty(), inner.is_empty()) {
        (true, true) => AbsorbBranch::Trivial,
        (false, true) => AbsorbBranch::Crossing,
        (true, false) => AbsorbBranch::Internal,
        (false, false) => AbsorbBranch::Mixed,
    };
    let (matchings, coverage) = ex.finish(&matchings, added, s, perfect_required)?;
    Ok(Absorbed { matchings, branch, coverage, perfect_required, pseudorandom_misses: Vec::new() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DifficultOutcome {
    /// Matching containing `e` plus size-2 edges, covering every vertex of
    /// degree `n−1` and all but at most five of degree `n−2`.
    Matching(Vec<usize>),
    /// A proper coloring of all of `H` with at most `n` colors.
    Coloring(EdgeColoring),
}

/// Extends a difficult huge edge `e`, or colors `H` outright when the only
/// non-graph edge is `e` and the full-degree vertices are odd in number with
/// nothing else left to pair them with.
pub fn absorb_difficult(h: &LinearHypergraph, e: usize) -> Result<DifficultOutcome, AbsorbError> {
    let n = h.n();
    if h.edges().iter().any(|x| x.len() == 1) {
        return Err(AbsorbError::Precondition("singleton edges present".into()));
    }
    let g_ids: Vec<usize> = (0..h.m()).filter(|&x| h.edge(x).len() == 2).collect();
    let g = SimpleGraph::new(n, g_ids.iter().map(|&x| (h.edge(x)[0], h.edge(x)[1])).collect());
    let in_e = |v: usize| h.edge(e).contains(&v);
    let u1: Vec<usize> = vertices_of_degree(h, n - 1).into_iter().filter(|&v| !in_e(v)).collect();
    let u2: Vec<usize> =
        if n >= 2 { vertices_of_degree(h, n - 2).into_iter().filter(|&v| !in_e(v)).collect() } else { Vec::new() };
    let mut in_u12 = vec![false; n];
    u1.iter().chain(&u2).for_each(|&v| in_u12[v] = true);
    let x_set: Vec<usize> = (0..n).filter(|&v| !in_e(v) && !in_u12[v]).collect();
    let all = |_: usize| true;
    let mut rng = rng::seeded(0);
    let with_e = |extra: Vec<usize>| {
        let mut m = vec![e];
        m.extend(extra.into_iter().map(|i| g_ids[i]));
        m
    };

    if u2.is_empty() {
        if u1.len() % 2 == 0 {
            if let Some(m) = perfect_on(&g, &u1, &all, &mut rng) {
                return Ok(DifficultOutcome::Matching(with_e(m)));
            }
        } else {
            for &u in &u1 {
                let Some(&(_, link)) = g.adj[u].iter().find(|&&(w, _)| x_set.contains(&w)) else {
                    continue;
                };
                let rest: Vec<usize> = u1.iter().copied().filter(|&v| v != u).collect();
                if let Some(mut m) = perfect_on(&g, &rest, &all, &mut rng) {
                    m.push(link);
                    return Ok(DifficultOutcome::Matching(with_e(m)));
                }
            }
            if x_set.is_empty() {
                if let Some(col) = color_around_full_vertex(h, e, &g, &g_ids, &u1, &mut rng) {
                    return Ok(DifficultOutcome::Coloring(col));
                }
            }
        }
    } else {
        let mut verts: Vec<usize> = u1.iter().chain(&u2).copied().collect();
        if verts.len() % 2 == 1 {
            let u = u2[0];
            verts.retain(|&v| v != u);
        }
        if let Some(m) = perfect_on(&g, &verts, &all, &mut rng) {
            return Ok(DifficultOutcome::Matching(with_e(m)));
        }
        let order: Vec<usize> = u1.iter().chain(&u2).copied().collect();
        let m = max_matching_on(&g, &order, &all);
        let mut hit = vec![false; n];
        m.iter().for_each(|&i| {
            hit[g.edges[i].0] = true;
            hit[g.edges[i].1] = true;
        });
        if u1.iter().all(|&v| hit[v]) && u2.iter().filter(|&&v| !hit[v]).count() <= 5 {
            return Ok(DifficultOutcome::Matching(with_e(m)));
        }
    }
    Err(AbsorbError::AbsorptionFailed { index: 0, step: "difficult edge: neither branch applies".into() })
}

/// `e` plus a perfect matching of the other full-degree vertices forms one
/// color class; the remaining graph has a single vertex of maximum degree
/// `n−1`, so Vizing's algorithm colors it with `n−1` colors.
fn color_around_full_vertex(
    h: &LinearHypergraph,
    e: usize,
    g: &SimpleGraph,
    g_ids: &[usize],
    u1: &[usize],
    rng: &mut Rng,
) -> Option<EdgeColoring> {
    let others = (0..h.m()).filter(|&x| x != e && h.edge(x).len() != 2).count();
    if others > 0 {
        return None;
    }
    let n = h.n();
    for &w in u1 {
        let rest: Vec<usize> = u1.iter().copied().filter(|&v| v != w).collect();
        let Some(m1) = perfect_on(g, &rest, &|_| true, rng) else {
            continue;
        };
        let mut in_m1 = vec![false; g.m()];
        m1.iter().for_each(|&i| in_m1[i] = true);
        let keep: Vec<usize> = (0..g.m()).filter(|&i| !in_m1[i]).collect();
        let rest_graph = g.with_edges(&keep);
        let viz = vizing(&rest_graph);
        if viz.palette + 1 > n {
            continue;
        }
        let mut col = EdgeColoring::uncolored(h.m());
        for (k, &i) in keep.iter().enumerate() {
            col.set(g_ids[i], viz.colors[k]);
        }
        col.set(e, viz.palette);
        m1.iter().for_each(|&i| col.set(g_ids[i], viz.palette));
        col.palette_size = viz.palette + 1;
        if verify_coloring(h, &col).is_ok() {
            return Some(col);
        }
    }
    None
}

/// A reservoir and edge-disjoint matchings built for absorption experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch {
    pub reservoir: Vec<usize>,
    pub defects: Vec<usize>,
    pub matchings: Vec<Vec<usize>>,
}

/// Graph host: vertices `0..universal` are joined to everything, the rest
/// to each other with probability `p`.
pub fn synthetic_host(n: usize, universal: usize, p: f64, seed: u64) -> LinearHypergraph {
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if a < universal || rng.gen_bool(p) {
                edges.push(vec![a, b]);
            }
        }
    }
    LinearHypergraph::build(n, edges, false).expect("simple graph is linear")
}

/// Samples `R` as a ρ-subset of the edges meeting `U`, then `k` edge-disjoint
/// matchings avoiding `R`, each a greedy near-perfect matching on a random
/// `(1−γ)`-fraction of the vertices. `S` is a random half of `U`.
pub fn synthetic_batch(h: &LinearHypergraph, params: &AbsorbParams, k: usize, seed: u64) -> SyntheticBatch {
    let n = h.n();
    let mut rng = rng::seeded(seed);
    let views = derived_views(h, params.eps);
    let mut taken = vec![false; h.m()];
    let mut reservoir = Vec::new();
    for &i in &views.g_prime {
        if rng.gen_bool(params.rho) {
            let e = views.g_edges[i];
            taken[e] = true;
            reservoir.push(e);
        }
    }
    reservoir.sort_unstable();
    let mut pair_id: HashMap<(usize, usize), usize> = HashMap::with_capacity(views.g_edges.len());
    for &e in &views.g_edges {
        pair_id.insert((h.edge(e)[0], h.edge(e)[1]), e);
    }
    let mut matchings = Vec::with_capacity(k);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..k {
        perm.shuffle(&mut rng);
        let active = (((1.0 - params.gamma) * n as f64).round() as usize).min(n);
        let pool = &perm[..active];
        let mut done = vec![false; active];
        let mut m = Vec::new();
        for i in 0..active {
            if done[i] {
                continue;
            }
            for j in i + 1..active.min(i + 64) {
                if done[j] {
                    continue;
                }
                let key = (pool[i].min(pool[j]), pool[i].max(pool[j]));
                if let Some(&e) = pair_id.get(&key) {
                    if !taken[e] {
                        taken[e] = true;
                        done[i] = true;
                        done[j] = true;
                        m.push(e);
                        break;
                    }
                }
            }
        }
        matchings.push(m);
    }
    let mut defects = views.u.clone();
    defects.shuffle(&mut rng);
    defects.truncate(views.u.len().div_ceil(2));
    defects.sort_unstable();
    SyntheticBatch { reservoir, defects, matchings }
}
