//! Dissection of a basic cell `S` into translated pieces that reassemble into a target `A`.
//!
//! Translations `z_1, …, z_k` are chosen greedily. With `S̃_i` the part of `S` not yet
//! covered and `Ã_i` the part of `A` not yet used, piece `i` is
//! `T_i = (Ã_i + z_i) ∩ S̃_i`. Only the translations are stored: membership of a point in
//! `T_i` is decided by an exact mutual recursion over earlier pieces, so the resulting map
//! `u ↦ u − z_{i(u)}` sends `S` into `A` without any discretization error.
//!
//! Piece volumes are tracked with two Monte Carlo point clouds (one uniform on `S`, one on
//! `A`) whose piece assignment is updated exactly after each step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::region::{
    minkowski_difference_volume_bound, Region, VolumeEstimate, VolumeMethod, DEFAULT_VOLUME_BUDGET,
};
use crate::rng::{derive_seed, substream};

/// Candidate grid used by the translation search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    /// Nodes per axis of the coarse grid over the bounding box of `S − A`.
    pub coarse_points: usize,
    /// Nodes per axis of each local refinement grid (odd).
    pub refine_points: usize,
    pub refine_rounds: usize,
    /// Spacing shrinks by this factor in every refinement round.
    pub refine_factor: f64,
    /// Coarse maxima that get refined; 0 picks 4 in dimension ≤ 2 and 3 above.
    pub seeds: usize,
    /// Points per side used for the coarse difference vote.
    pub pair_sample: usize,
    /// Source points used to score each candidate.
    pub score_sample: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid {
            coarse_points: 33,
            refine_points: 5,
            refine_rounds: 2,
            refine_factor: 4.0,
            seeds: 0,
            pair_sample: 3000,
            score_sample: 20_000,
        }
    }
}

impl SearchGrid {
    fn validate(&self) -> Result<()> {
        if self.coarse_points < 2 || self.refine_points == 0 || self.refine_points % 2 == 0 {
            return Err(Error::Config(format!("invalid search grid {self:?}")));
        }
        if !(self.refine_factor > 1.0) || self.pair_sample == 0 || self.score_sample == 0 {
            return Err(Error::Config(format!("invalid search grid {self:?}")));
        }
        Ok(())
    }

    fn seed_count(&self, n: usize) -> usize {
        match self.seeds {
            0 if n <= 2 => 4,
            0 => 3,
            s => s,
        }
    }
}

/// Parameters of [`dissect`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissectConfig {
    /// Maximum number of pieces `k`.
    pub max_pieces: usize,
    /// Points per cloud used to track piece volumes.
    pub budget: usize,
    /// Monte Carlo budget for the volumes of `A` and `S`.
    pub volume_budget: usize,
    /// Stop once the unmatched mass falls below this fraction of `μ(A)`.
    pub stop_fraction: f64,
    pub search: SearchGrid,
    /// Caller-supplied bound on `μ(S − A)`; defaults to the containing-ball bound.
    pub eta: Option<f64>,
    pub seed: u64,
}

impl Default for DissectConfig {
    fn default() -> Self {
        DissectConfig {
            max_pieces: 64,
            budget: 200_000,
            volume_budget: DEFAULT_VOLUME_BUDGET,
            stop_fraction: 1e-4,
            search: SearchGrid::default(),
            eta: None,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

/// Result of [`Dissection::assign`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assignment {
    /// 1-based piece index.
    Piece(usize),
    /// Not covered by any piece; treated as piece `k`.
    Residual,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Source,
    Target,
}

/// Per-query cache of "first piece" lookups, keyed by the exact point bits.
#[derive(Default)]
struct Memo {
    entries: Vec<(Side, Vector, usize, Option<usize>)>,
}

impl Memo {
    fn clear(&mut self) {
        self.entries.clear();
    }

    fn get(&self, side: Side, p: &Vector) -> Option<(usize, Option<usize>)> {
        self.entries
            .iter()
            .find(|(s, q, _, _)| *s == side && q == p)
            .map(|&(_, _, scanned, found)| (scanned, found))
    }

    fn put(&mut self, side: Side, p: Vector, scanned: usize, found: Option<usize>) {
        if let Some(e) = self
            .entries
            .iter_mut()
            .find(|(s, q, _, _)| *s == side && *q == p)
        {
            e.2 = scanned;
            e.3 = found;
        } else {
            self.entries.push((side, p, scanned, found));
        }
    }
}

/// Exact piece membership for a translation list.
struct Pieces<'a> {
    source: &'a Region,
    target: &'a Region,
    z: &'a [Vector],
}

impl Pieces<'_> {
    /// Smallest 0-based `i < bound` whose piece claims `p`.
    ///
    /// On the source side `p ∈ S` is claimed by `i` when `p − z_i ∈ A` and that target
    /// point is not used by an earlier piece. On the target side `p ∈ A` is used by `i`
    /// when `p + z_i ∈ S` and that source point is not claimed by an earlier piece.
    fn owner(&self, memo: &mut Memo, side: Side, p: Vector, bound: usize) -> Option<usize> {
        let start = match memo.get(side, &p) {
            Some((_, Some(i))) => return (i < bound).then_some(i),
            Some((scanned, None)) if scanned >= bound => return None,
            Some((scanned, None)) => scanned,
            None => 0,
        };
        let mut found = None;
        for i in start..bound {
            let (q, other, other_side) = match side {
                Side::Source => (p - self.z[i], self.target, Side::Target),
                Side::Target => (p + self.z[i], self.source, Side::Source),
            };
            if other.contains(&q) && self.owner(memo, other_side, q, i).is_none() {
                found = Some(i);
                break;
            }
        }
        memo.put(side, p, found.map_or(bound, |i| i + 1), found);
        found
    }
}

/// A finished dissection: translations plus volume bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DissectionSpec", into = "DissectionSpec")]
pub struct Dissection {
    source: Region,
    target: Region,
    translations: Vec<Vector>,
    piece_volumes: Vec<VolumeEstimate>,
    residual: Vec<f64>,
    residual_std_errors: Vec<f64>,
    mass: VolumeEstimate,
    eta: f64,
    kappa: f64,
    truncated: bool,
    seed: u64,
}

impl Dissection {
    pub fn source(&self) -> &Region {
        &self.source
    }

    pub fn target(&self) -> &Region {
        &self.target
    }

    /// `z_1, …, z_k` (stored 0-based).
    pub fn translations(&self) -> &[Vector] {
        &self.translations
    }

    pub fn piece_count(&self) -> usize {
        self.translations.len()
    }

    /// Estimated `μ(T_1), …, μ(T_k)`.
    pub fn piece_volumes(&self) -> &[VolumeEstimate] {
        &self.piece_volumes
    }

    /// Unmatched masses `γ_0 = μ(A), γ_1, …, γ_k`.
    pub fn residual_masses(&self) -> &[f64] {
        &self.residual
    }

    /// Standard errors of [`Self::residual_masses`].
    pub fn residual_std_errors(&self) -> &[f64] {
        &self.residual_std_errors
    }

    /// Common volume `μ(A) = μ(S)` used for bookkeeping.
    pub fn mass(&self) -> VolumeEstimate {
        self.mass
    }

    /// Upper bound on `μ(S − A)` used for the guarantees.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `η / μ(A)`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// True when the construction stopped at the piece limit with mass left unmatched.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Worst-case unmatched mass after `i` greedy steps: `η / (κ + i)`.
    pub fn residual_bound(&self, i: usize) -> f64 {
        self.eta / (self.kappa + i as f64)
    }

    fn pieces(&self) -> Pieces<'_> {
        Pieces {
            source: &self.source,
            target: &self.target,
            z: &self.translations,
        }
    }

    /// Whether `y` lies in piece `T_i` (1-based `i`).
    pub fn piece_membership(&self, i: usize, y: &Vector) -> bool {
        if i == 0 || i > self.piece_count() || !self.source.contains(y) {
            return false;
        }
        let mut memo = Memo::default();
        self.pieces().owner(&mut memo, Side::Source, *y, i) == Some(i - 1)
    }

    /// Piece containing `u ∈ S`, or `Residual` when no piece covers it.
    pub fn assign(&self, u: &Vector) -> Result<Assignment> {
        check_dim(self.source.dim(), u.len())?;
        if !self.source.contains(u) {
            return Err(Error::Precondition(format!(
                "{u:?} is not in the source region"
            )));
        }
        Ok(self.assign_unchecked(u))
    }

    /// [`Self::assign`] without the dimension and membership checks.
    pub fn assign_unchecked(&self, u: &Vector) -> Assignment {
        let mut memo = Memo::default();
        match self
            .pieces()
            .owner(&mut memo, Side::Source, *u, self.piece_count())
        {
            Some(i) => Assignment::Piece(i + 1),
            None => Assignment::Residual,
        }
    }

    /// 1-based piece index and translation applied to `u`; the residual maps to the last piece.
    pub fn translation_for(&self, u: &Vector) -> (usize, Vector) {
        let k = self.piece_count();
        let i = match self.assign_unchecked(u) {
            Assignment::Piece(i) => i,
            Assignment::Residual => k,
        };
        (i, self.translations[i - 1])
    }

    /// Piece masses with the residual folded into the last piece (the truncation rule).
    pub fn merged_piece_masses(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self
            .piece_volumes
            .iter()
            .map(|v| v.value.max(0.0))
            .collect();
        if let (Some(last), Some(res)) = (m.last_mut(), self.residual.last()) {
            *last += res.max(0.0);
        }
        m
    }

    /// Entropy in bits of the piece index of a uniform point of `S`.
    pub fn entropy(&self) -> f64 {
        dissection_entropy(self)
    }
}

/// `−Σ p_i log₂ p_i` with `p_i = μ(T_i)/μ(S)`, residual mass folded into the last piece.
pub fn dissection_entropy(d: &Dissection) -> f64 {
    let masses = d.merged_piece_masses();
    let total: f64 = masses.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    masses
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| {
            let p = m / total;
            -p * libm::log2(p)
        })
        .sum()
}

/// Total-variation bound for `k` greedy pieces: `η / (η + k μ(A))`.
pub fn tv_truncation_bound(eta: f64, k: usize, mu_a: f64) -> f64 {
    eta / (eta + k as f64 * mu_a)
}

const UNASSIGNED: u32 = u32::MAX;

/// Uniform samples of the source and target with their current piece owners.
struct Clouds {
    source: Vec<Vector>,
    source_owner: Vec<u32>,
    target: Vec<Vector>,
    target_owner: Vec<u32>,
}

impl Clouds {
    fn sample(source: &Region, target: &Region, budget: usize, seed: u64) -> Result<Self> {
        let mut rs = substream(seed, 0);
        let mut rt = substream(seed, 1);
        let source: Vec<Vector> = (0..budget)
            .map(|_| source.sample_uniform(&mut rs))
            .collect::<Result<_>>()?;
        let target: Vec<Vector> = (0..budget)
            .map(|_| target.sample_uniform(&mut rt))
            .collect::<Result<_>>()?;
        Ok(Clouds {
            source_owner: vec![UNASSIGNED; source.len()],
            target_owner: vec![UNASSIGNED; target.len()],
            source,
            target,
        })
    }

    fn free_source(&self) -> impl Iterator<Item = &Vector> {
        self.source
            .iter()
            .zip(&self.source_owner)
            .filter(|(_, &o)| o == UNASSIGNED)
            .map(|(p, _)| p)
    }

    fn free_target(&self) -> impl Iterator<Item = &Vector> {
        self.target
            .iter()
            .zip(&self.target_owner)
            .filter(|(_, &o)| o == UNASSIGNED)
            .map(|(p, _)| p)
    }

    /// Assign every free point to the newest piece where it belongs; returns the counts.
    fn absorb(&mut self, pieces: &Pieces<'_>) -> (usize, usize) {
        let p = pieces.z.len() - 1;
        let z = pieces.z[p];
        let mut memo = Memo::default();
        let mut cs = 0;
        for (x, owner) in self.source.iter().zip(self.source_owner.iter_mut()) {
            if *owner != UNASSIGNED {
                continue;
            }
            let a = *x - z;
            if pieces.target.contains(&a) {
                memo.clear();
                if pieces.owner(&mut memo, Side::Target, a, p).is_none() {
                    *owner = p as u32;
                    cs += 1;
                }
            }
        }
        let mut ct = 0;
        for (a, owner) in self.target.iter().zip(self.target_owner.iter_mut()) {
            if *owner != UNASSIGNED {
                continue;
            }
            let y = *a + z;
            if pieces.source.contains(&y) {
                memo.clear();
                if pieces.owner(&mut memo, Side::Source, y, p).is_none() {
                    *owner = p as u32;
                    ct += 1;
                }
            }
        }
        (cs, ct)
    }
}

fn cloud_box<'a>(points: impl Iterator<Item = &'a Vector>, n: usize) -> Option<(Vector, Vector)> {
    let mut lo = Vector::splat(n, f64::INFINITY);
    let mut hi = Vector::splat(n, f64::NEG_INFINITY);
    let mut any = false;
    for p in points {
        any = true;
        for i in 0..n {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    any.then_some((lo, hi))
}

/// State shared by all candidate evaluations of one greedy step.
struct Search<'a> {
    pieces: Pieces<'a>,
    /// Free source points used for scoring.
    scoring: Vec<Vector>,
}

impl Search<'_> {
    /// Number of scoring points `x` with `x − z` in the free part of the target.
    fn score(&self, z: &Vector, memo: &mut Memo) -> usize {
        let bound = self.pieces.z.len();
        self.scoring
            .iter()
            .filter(|x| {
                let a = **x - *z;
                if !self.pieces.target.contains(&a) {
                    return false;
                }
                memo.clear();
                self.pieces.owner(memo, Side::Target, a, bound).is_none()
            })
            .count()
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    z: Vector,
    hits: usize,
    structural: bool,
}

/// Greedy search for the next translation given the current free clouds.
///
/// Coarse pass: a histogram of pairwise differences `x − a` between free source and free
/// target points over a `coarse_points`ⁿ grid (its expected count at `z` is proportional to
/// the overlap `φ(z)` averaged over the grid cell). The best coarse cells are refined by
/// exact scoring on local `refine_points`ⁿ grids. Box-alignment candidates and `0` are
/// always scored. Returns `None` when every candidate scores zero.
fn search_translation(
    clouds: &Clouds,
    pieces: Pieces<'_>,
    source: &Region,
    target: &Region,
    grid: &SearchGrid,
) -> Option<Candidate> {
    let n = source.dim();
    let pair_s: Vec<Vector> = clouds
        .free_source()
        .take(grid.pair_sample)
        .copied()
        .collect();
    let pair_t: Vec<Vector> = clouds
        .free_target()
        .take(grid.pair_sample)
        .copied()
        .collect();
    if pair_s.is_empty() || pair_t.is_empty() {
        return None;
    }
    let search = Search {
        pieces,
        scoring: clouds
            .free_source()
            .take(grid.score_sample)
            .copied()
            .collect(),
    };
    let mut memo = Memo::default();
    let mut scored: Vec<Candidate> = Vec::new();
    let consider =
        |z: Vector, structural: bool, memo: &mut Memo, scored: &mut Vec<Candidate>| -> usize {
            let hits = search.score(&z, memo);
            scored.push(Candidate {
                z,
                hits,
                structural,
            });
            hits
        };

    // Structural candidates: identity and alignments of region and cloud boxes.
    let (slo, shi) = source.bounding_box();
    let (tlo, thi) = target.bounding_box();
    let (cslo, cshi) = cloud_box(clouds.free_source(), n).expect("non-empty");
    let (ctlo, cthi) = cloud_box(clouds.free_target(), n).expect("non-empty");
    let structural = [
        Vector::zeros(n),
        slo - tlo,
        shi - thi,
        (slo + shi - tlo - thi).scale(0.5),
        cslo - ctlo,
        cshi - cthi,
        (cslo + cshi - ctlo - cthi).scale(0.5),
    ];
    for z in structural {
        consider(z, true, &mut memo, &mut scored);
    }

    // Coarse vote over pairwise differences.
    let g = grid.coarse_points;
    let lo = cslo - cthi;
    let hi = cshi - ctlo;
    let h = (hi - lo).scale(1.0 / (g - 1) as f64);
    let mut votes = vec![0u32; g.pow(n as u32)];
    for x in &pair_s {
        for a in &pair_t {
            let d = *x - *a;
            let mut idx = 0usize;
            for i in 0..n {
                let c = if h[i] > 0.0 {
                    libm::round((d[i] - lo[i]) / h[i]) as usize
                } else {
                    0
                };
                idx = idx * g + c.min(g - 1);
            }
            votes[idx] += 1;
        }
    }
    let unflatten = |mut idx: usize| -> [usize; crate::MAX_DIM] {
        let mut c = [0usize; crate::MAX_DIM];
        for i in (0..n).rev() {
            c[i] = idx % g;
            idx /= g;
        }
        c
    };
    let mut order: Vec<usize> = (0..votes.len()).filter(|&i| votes[i] > 0).collect();
    order.sort_by(|&a, &b| votes[b].cmp(&votes[a]).then(a.cmp(&b)));
    let mut seeds: Vec<[usize; crate::MAX_DIM]> = Vec::new();
    for idx in order {
        if seeds.len() >= grid.seed_count(n) {
            break;
        }
        let c = unflatten(idx);
        // Skip cells adjacent to an already selected maximum.
        let near = seeds
            .iter()
            .any(|s| (0..n).all(|i| s[i].abs_diff(c[i]) <= 1));
        if !near {
            seeds.push(c);
        }
    }

    // Local refinement around each coarse maximum.
    let r = grid.refine_points;
    let half = (r / 2) as i64;
    for s in seeds {
        let mut center = Vector::from_fn(n, |i| lo[i] + s[i] as f64 * h[i]);
        let mut local_best = consider(center, false, &mut memo, &mut scored);
        let mut step = h;
        for _ in 0..grid.refine_rounds {
            step = step.scale(1.0 / grid.refine_factor);
            let mut round_best = (local_best, center);
            for k in 0..r.pow(n as u32) {
                let mut kk = k;
                let mut off = Vector::zeros(n);
                for i in (0..n).rev() {
                    off[i] = ((kk % r) as i64 - half) as f64 * step[i];
                    kk /= r;
                }
                if off.norm_sq() == 0.0 {
                    continue;
                }
                let z = center + off;
                let hits = consider(z, false, &mut memo, &mut scored);
                if hits > round_best.0 || (hits == round_best.0 && z.lex_cmp(&round_best.1).is_lt())
                {
                    round_best = (hits, z);
                }
            }
            local_best = round_best.0;
            center = round_best.1;
        }
    }
    select(&scored).filter(|b| b.hits > 0)
}

/// Pick the translation among scored candidates.
///
/// Structural candidates (identity, then box alignments) come first in `scored`, in
/// priority order. The first of them within three binomial standard deviations of the
/// best count wins: flat maxima of the overlap are common when region boundaries align,
/// and aligned translations give cleaner pieces than a noisy grid maximum. Otherwise the
/// highest count wins, exact ties going to the lexicographically smaller translation.
fn select(scored: &[Candidate]) -> Option<Candidate> {
    let max = scored.iter().map(|c| c.hits).max()?;
    let slack = 3.0 * libm::sqrt(max as f64);
    if let Some(c) = scored
        .iter()
        .find(|c| c.structural && (max - c.hits) as f64 <= slack)
    {
        return Some(*c);
    }
    scored
        .iter()
        .filter(|c| c.hits == max)
        .min_by(|a, b| a.z.lex_cmp(&b.z))
        .copied()
}

fn combined_mass(a: VolumeEstimate, s: VolumeEstimate) -> Result<VolumeEstimate> {
    if !a.agrees_with(&s, 3.0) {
        return Err(Error::VolumeMismatch(format!(
            "target volume {} ± {} differs from source volume {} ± {}",
            a.value, a.std_error, s.value, s.std_error
        )));
    }
    Ok(match (a.method, s.method) {
        (_, VolumeMethod::ClosedForm) => s,
        (VolumeMethod::ClosedForm, _) => a,
        // A region filling its bounding box gives an error-free Monte Carlo estimate.
        _ if s.std_error == 0.0 => s,
        _ if a.std_error == 0.0 => a,
        _ => {
            let (wa, ws) = (
                1.0 / (a.std_error * a.std_error),
                1.0 / (s.std_error * s.std_error),
            );
            let value = (wa * a.value + ws * s.value) / (wa + ws);
            VolumeEstimate {
                value,
                std_error: libm::sqrt(1.0 / (wa + ws)),
                samples: a.samples + s.samples,
                ..s
            }
        }
    })
}

fn check_regions(target: &Region, source: &Region) -> Result<()> {
    check_dim(source.dim(), target.dim())
}

/// Best single translation of `a_cur` into `s_cur` and the estimated overlap `μ((A+z) ∩ S)`.
pub fn choose_translation(
    a_cur: &Region,
    s_cur: &Region,
    grid: &SearchGrid,
    budget: usize,
    seed: u64,
) -> Result<(Vector, VolumeEstimate)> {
    check_regions(a_cur, s_cur)?;
    grid.validate()?;
    let vol_s = s_cur.volume(DEFAULT_VOLUME_BUDGET, derive_seed(seed, 2))?;
    if vol_s.value <= 0.0 {
        return Err(Error::Precondition("source region is empty".into()));
    }
    let clouds = Clouds::sample(s_cur, a_cur, budget, derive_seed(seed, 3))?;
    let z = Vec::new();
    let pieces = Pieces {
        source: s_cur,
        target: a_cur,
        z: &z,
    };
    let best = search_translation(&clouds, pieces, s_cur, a_cur, grid)
        .ok_or_else(|| Error::SearchFailure(format!("no candidate overlaps; grid {grid:?}")))?;
    let hits = clouds
        .source
        .iter()
        .filter(|x| a_cur.contains(&(**x - best.z)))
        .count() as u64;
    let n = clouds.source.len() as u64;
    let p = hits as f64 / n as f64;
    let overlap = VolumeEstimate {
        value: vol_s.value * p,
        std_error: vol_s.value * libm::sqrt(p * (1.0 - p) / n as f64),
        method: VolumeMethod::MonteCarlo,
        samples: n,
        seed,
    };
    Ok((best.z, overlap))
}

/// Greedily dissect `source` (`S`) into at most `cfg.max_pieces` pieces reassembling into `target` (`A`).
pub fn dissect(target: &Region, source: &Region, cfg: &DissectConfig) -> Result<Dissection> {
    check_regions(target, source)?;
    cfg.search.validate()?;
    if cfg.max_pieces == 0 {
        return Err(Error::Config("at least one piece is required".into()));
    }
    if cfg.budget == 0 {
        return Err(Error::Config("cloud budget must be positive".into()));
    }
    let seed = cfg.seed;
    let vol_a = target.volume(cfg.volume_budget, derive_seed(seed, 1))?;
    let vol_s = source.volume(cfg.volume_budget, derive_seed(seed, 2))?;
    let mass = combined_mass(vol_a, vol_s)?;
    if mass.value <= 0.0 {
        return Err(Error::Precondition("regions have zero volume".into()));
    }
    let eta = cfg
        .eta
        .unwrap_or_else(|| minkowski_difference_volume_bound(source, target));
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!(
            "invalid bound on the difference-body volume: {eta}"
        )));
    }
    let kappa = eta / mass.value;

    let mut clouds = Clouds::sample(source, target, cfg.budget, derive_seed(seed, 3))?;
    let (ns, nt) = (clouds.source.len() as f64, clouds.target.len() as f64);
    let (mut free_s, mut free_t) = (ns, nt);
    let remaining = |fs: f64, ft: f64| -> (f64, f64) {
        let (qs, qt) = (fs / ns, ft / nt);
        let g = mass.value * (qs + qt) / 2.0;
        let se = mass.value / 2.0 * libm::sqrt(qs * (1.0 - qs) / ns + qt * (1.0 - qt) / nt);
        (g, se + (g / mass.value) * mass.std_error)
    };

    let mut translations: Vec<Vector> = Vec::new();
    let mut piece_volumes = Vec::new();
    let mut residual = vec![mass.value];
    let mut residual_std_errors = vec![mass.std_error];
    let threshold = cfg.stop_fraction * mass.value;
    while translations.len() < cfg.max_pieces && *residual.last().expect("γ_0") >= threshold {
        let pieces = Pieces {
            source,
            target,
            z: &translations,
        };
        let Some(best) = search_translation(&clouds, pieces, source, target, &cfg.search) else {
            if translations.is_empty() {
                return Err(Error::SearchFailure(format!(
                    "no candidate overlaps; grid {:?}",
                    cfg.search
                )));
            }
            break;
        };
        translations.push(best.z);
        let pieces = Pieces {
            source,
            target,
            z: &translations,
        };
        let (cs, ct) = clouds.absorb(&pieces);
        let (ps, pt) = (cs as f64 / ns, ct as f64 / nt);
        piece_volumes.push(VolumeEstimate {
            value: mass.value * (ps + pt) / 2.0,
            std_error: mass.value / 2.0 * libm::sqrt(ps * (1.0 - ps) / ns + pt * (1.0 - pt) / nt),
            method: VolumeMethod::MonteCarlo,
            samples: (ns + nt) as u64,
            seed,
        });
        free_s -= cs as f64;
        free_t -= ct as f64;
        let (g, se) = remaining(free_s, free_t);
        residual.push(g);
        residual_std_errors.push(se);
    }
    let truncated = *residual.last().expect("γ") >= threshold;
    Ok(Dissection {
        source: source.clone(),
        target: target.clone(),
        translations,
        piece_volumes,
        residual,
        residual_std_errors,
        mass,
        eta,
        kappa,
        truncated,
        seed,
    })
}

#[derive(Serialize, Deserialize)]
struct DissectionSpec {
    #[serde(rename = "S")]
    source: Region,
    #[serde(rename = "A")]
    target: Region,
    z: Vec<Vector>,
    piece_volumes: Vec<VolumeEstimate>,
    gamma: Vec<f64>,
    gamma_std_errors: Vec<f64>,
    mass: VolumeEstimate,
    eta: f64,
    kappa: f64,
    truncated: bool,
    seed: u64,
}

impl TryFrom<DissectionSpec> for Dissection {
    type Error = Error;

    fn try_from(d: DissectionSpec) -> Result<Self> {
        check_regions(&d.target, &d.source)?;
        let k = d.z.len();
        if k == 0 {
            return Err(Error::Config("dissection has no translations".into()));
        }
        for z in &d.z {
            check_dim(d.source.dim(), z.len())?;
        }
        if d.piece_volumes.len() != k || d.gamma.len() != k + 1 || d.gamma_std_errors.len() != k + 1
        {
            return Err(Error::Config(format!(
                "dissection has {k} translations, {} piece volumes and {} residual masses",
                d.piece_volumes.len(),
                d.gamma.len()
            )));
        }
        Ok(Dissection {
            source: d.source,
            target: d.target,
            translations: d.z,
            piece_volumes: d.piece_volumes,
            residual: d.gamma,
            residual_std_errors: d.gamma_std_errors,
            mass: d.mass,
            eta: d.eta,
            kappa: d.kappa,
            truncated: d.truncated,
            seed: d.seed,
        })
    }
}

impl From<Dissection> for DissectionSpec {
    fn from(d: Dissection) -> Self {
        DissectionSpec {
            source: d.source,
            target: d.target,
            z: d.translations,
            piece_volumes: d.piece_volumes,
            gamma: d.residual,
            gamma_std_errors: d.residual_std_errors,
            mass: d.mass,
            eta: d.eta,
            kappa: d.kappa,
            truncated: d.truncated,
            seed: d.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{hexagonal_unit_disk_scale, Lattice, NamedLattice};
    use crate::rng::substream;
    use core::f64::consts::PI;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x)
    }

    fn unit_square() -> Region {
        Region::cuboid(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).unwrap()
    }

    fn hexagon() -> Region {
        Region::voronoi(
            Lattice::named(NamedLattice::Hexagonal, 2, hexagonal_unit_disk_scale()).unwrap(),
        )
    }

    fn quick() -> DissectConfig {
        DissectConfig {
            budget: 50_000,
            volume_budget: 200_000,
            ..DissectConfig::default()
        }
    }

    #[test]
    fn identity_translation() {
        let (z, overlap) = choose_translation(
            &unit_square(),
            &unit_square(),
            &SearchGrid::default(),
            20_000,
            1,
        )
        .unwrap();
        assert_eq!(z, v(&[0.0, 0.0]));
        assert!((overlap.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_square_aligns_exactly() {
        let t = v(&[0.37, -1.25]);
        let a = unit_square().translate(t).unwrap();
        let (z, overlap) =
            choose_translation(&a, &unit_square(), &SearchGrid::default(), 20_000, 2).unwrap();
        assert!((z + t).norm() < 1e-12, "{z:?}");
        assert!((overlap.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disk_into_hexagon_prefers_identity() {
        let (z, overlap) = choose_translation(
            &Region::unit_ball(2),
            &hexagon(),
            &SearchGrid::default(),
            100_000,
            3,
        )
        .unwrap();
        assert_eq!(z, v(&[0.0, 0.0]));
        let a = hexagonal_unit_disk_scale();
        let theta = 2.0 * a.acos();
        let expected = PI - 3.0 * (theta - theta.sin());
        assert!(
            (overlap.value - expected).abs() <= 3.0 * overlap.std_error + 1e-12,
            "{overlap:?}"
        );
    }

    #[test]
    fn empty_source_rejected() {
        let far = unit_square();
        let err = choose_translation(
            &far,
            &Region::difference(unit_square(), unit_square()).unwrap(),
            &SearchGrid::default(),
            1000,
            1,
        );
        assert!(err.is_err());
    }

    #[test]
    fn identity_dissection() {
        let d = dissect(&hexagon(), &hexagon(), &quick()).unwrap();
        assert_eq!(d.piece_count(), 1);
        assert_eq!(d.translations()[0], v(&[0.0, 0.0]));
        assert!(!d.truncated());
        assert_eq!(*d.residual_masses().last().unwrap(), 0.0);
        assert_eq!(dissection_entropy(&d), 0.0);
        let mut rng = substream(4, 0);
        for _ in 0..1000 {
            let u = hexagon().sample_uniform(&mut rng).unwrap();
            assert!(d.piece_membership(1, &u));
            assert_eq!(d.assign(&u).unwrap(), Assignment::Piece(1));
        }
        assert!(!d.piece_membership(1, &v(&[5.0, 5.0])));
        assert!(matches!(
            d.assign(&v(&[5.0, 5.0])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn split_square_reassembles_in_two_pieces() {
        let left = Region::cuboid(&v(&[0.0, 0.0]), &v(&[0.5, 1.0])).unwrap();
        let right = Region::cuboid(&v(&[1.0, 0.0]), &v(&[1.5, 1.0])).unwrap();
        let s = Region::union(vec![left, right]).unwrap();
        let d = dissect(&unit_square(), &s, &quick()).unwrap();
        assert_eq!(d.piece_count(), 2, "{:?}", d.translations());
        // Brute-force oracle: the only two-piece dissections translate one half by 0 and
        // the other by ±1/2 along x.
        let mut zs: Vec<f64> = d.translations().iter().map(|z| z[0]).collect();
        zs.sort_by(f64::total_cmp);
        assert!(
            d.translations().iter().all(|z| z[1] == 0.0),
            "{:?}",
            d.translations()
        );
        assert!(zs == [0.0, 0.5] || zs == [-0.5, 1.0], "{zs:?}");
        let mut rng = substream(5, 0);
        for _ in 0..2000 {
            let u = s.sample_uniform(&mut rng).unwrap();
            let (_, z) = d.translation_for(&u);
            assert!(unit_square().contains(&(u - z)));
        }
    }

    #[test]
    fn tv_bound_examples() {
        assert_eq!(tv_truncation_bound(1.0, 1, 1.0), 0.5);
        assert!(tv_truncation_bound(1.0, 1_000_000_000, 1.0) < 1e-8);
    }

    #[test]
    fn volume_mismatch_rejected() {
        let big = Region::unit_ball(2).scale(2.0).unwrap();
        assert!(matches!(
            dissect(&big, &hexagon(), &quick()),
            Err(Error::VolumeMismatch(_))
        ));
    }

    #[test]
    fn hexagon_caps_dissection_invariants() {
        let cap_s = Region::difference(hexagon(), Region::unit_ball(2)).unwrap();
        let cap_a = Region::difference(Region::unit_ball(2), hexagon()).unwrap();
        let cfg = DissectConfig {
            max_pieces: 20,
            ..quick()
        };
        let d = dissect(&cap_a, &cap_s, &cfg).unwrap();
        assert!(d.piece_count() >= 2);
        for (i, (g, se)) in d
            .residual_masses()
            .iter()
            .zip(d.residual_std_errors())
            .enumerate()
        {
            assert!(*g <= d.residual_bound(i) + 3.0 * se, "γ_{i} = {g}");
            if i > 0 {
                assert!(*g <= d.residual_masses()[i - 1]);
            }
        }
        let total: f64 = d.piece_volumes().iter().map(|p| p.value).sum::<f64>()
            + d.residual_masses().last().unwrap();
        assert!((total - d.mass().value).abs() < 1e-12);
        assert!(dissection_entropy(&d) <= (d.eta() / d.mass().value).log2() + 4.0 + 0.05);

        let mut rng = substream(6, 0);
        let k = d.piece_count();
        for _ in 0..2000 {
            let u = cap_s.sample_uniform(&mut rng).unwrap();
            let claims = (1..=k).filter(|&i| d.piece_membership(i, &u)).count();
            assert!(claims <= 1);
            if let Assignment::Piece(i) = d.assign(&u).unwrap() {
                assert!(cap_a.contains(&(u - d.translations()[i - 1])));
                assert!(d.piece_membership(i, &u));
            } else {
                assert_eq!(claims, 0);
            }
            let a = cap_a.sample_uniform(&mut rng).unwrap();
            let uses = (1..=k)
                .filter(|&i| d.piece_membership(i, &(a + d.translations()[i - 1])))
                .count();
            assert!(uses <= 1);
        }
    }

    #[test]
    fn serde_round_trip_preserves_assignment() {
        let d = dissect(&hexagon(), &hexagon(), &quick()).unwrap();
        let spec = DissectionSpec::from(d.clone());
        assert_eq!(Dissection::try_from(spec).unwrap(), d);
    }
}
