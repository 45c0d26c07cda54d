//! Terminal-timeslot assignment: grouping heuristics, per-beam assignment
//! re-optimization, the assignment-updating outer loop and the OMA baseline.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noma::{AccessScheme, LinkGains};
use crate::precoder::{slot_precoders, PrecodingMatrix};
use crate::scenario::{ChannelVector, Scenario};
use crate::solver::{
    fixed_point, jopd, jopd_problem, solve_slot_t, OuterRecord, PowerProblem, SlotGroup, SolveResult,
    SolverOptions,
};

/// `beams[b][c]` lists the candidate indices beam `b` serves in slot `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub beams: Vec<Vec<Vec<usize>>>,
}

impl Assignment {
    pub fn new(beams: Vec<Vec<Vec<usize>>>) -> Self {
        Self { beams }
    }

    pub fn num_beams(&self) -> usize {
        self.beams.len()
    }

    pub fn slot(&self, beam: usize, slot: usize) -> &[usize] {
        &self.beams[beam][slot]
    }

    /// Scheduled terminals of a beam, sorted.
    pub fn selected(&self, beam: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.beams[beam].iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    /// Slot capacity and schedule-once constraints against a scenario.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleAssignment(m));
        if self.beams.len() != scenario.num_beams {
            return bad(format!("{} beams, scenario has {}", self.beams.len(), scenario.num_beams));
        }
        for (b, slots) in self.beams.iter().enumerate() {
            if slots.len() != scenario.num_slots {
                return bad(format!("beam {b} has {} slots, expected {}", slots.len(), scenario.num_slots));
            }
            let mut seen = vec![false; scenario.candidates[b].len()];
            for (c, members) in slots.iter().enumerate() {
                if members.len() > scenario.max_per_slot {
                    return bad(format!(
                        "beam {b} slot {c} holds {} terminals, at most {} allowed",
                        members.len(),
                        scenario.max_per_slot
                    ));
                }
                for &k in members {
                    if k >= seen.len() {
                        return bad(format!("beam {b} has no candidate {k}"));
                    }
                    if std::mem::replace(&mut seen[k], true) {
                        return bad(format!("terminal {k} of beam {b} is scheduled twice"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `|h1ᴴ h2| / (‖h1‖ ‖h2‖)`.
pub fn correlation(h1: &ChannelVector, h2: &ChannelVector) -> Result<f64> {
    let (n1, n2) = (h1.norm(), h2.norm());
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok((h1.inner(&h2.0).norm() / (n1 * n2)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupingKind {
    MaxCC,
    MaxPi,
    MinPi,
    Random,
}

impl GroupingKind {
    pub const ALL: [GroupingKind; 4] = [Self::MaxCC, Self::MaxPi, Self::MinPi, Self::Random];

    pub fn name(self) -> &'static str {
        match self {
            Self::MaxCC => "maxcc",
            Self::MaxPi => "maxpi",
            Self::MinPi => "minpi",
            Self::Random => "random",
        }
    }
}

impl std::str::FromStr for GroupingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown grouping strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupingStrategy {
    pub kind: GroupingKind,
    pub correlation_threshold: f64,
}

impl GroupingStrategy {
    pub fn new(kind: GroupingKind) -> Self {
        Self {
            kind,
            correlation_threshold: 0.9,
        }
    }

    pub fn with_threshold(kind: GroupingKind, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Config(format!("correlation threshold {threshold} outside (0, 1]")));
        }
        Ok(Self {
            kind,
            correlation_threshold: threshold,
        })
    }
}

/// Seed-and-grow grouping shared by the correlation-based strategies.
/// `pick` chooses the next member given the seed and the remaining pool.
fn grow_groups<R, F>(channels: &[ChannelVector], slots: usize, per_slot: usize, rng: &mut R, mut pick: F) -> Result<Vec<Vec<usize>>>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &[usize]) -> Result<usize>,
{
    if channels.is_empty() || slots == 0 {
        return Err(Error::PoolExhausted);
    }
    let mut pool: Vec<usize> = (0..channels.len()).collect();
    let mut out = vec![Vec::new(); slots];
    for group in out.iter_mut() {
        if pool.is_empty() {
            break;
        }
        let seed = pool.remove(rng.random_range(0..pool.len()));
        group.push(seed);
        while group.len() < per_slot && !pool.is_empty() {
            let k = pick(seed, &pool)?;
            pool.retain(|&x| x != k);
            group.push(k);
        }
    }
    Ok(out)
}

/// Candidate with the largest correlation to `seed`; ties go to the lower id.
fn most_correlated(channels: &[ChannelVector], seed: usize, pool: &[usize]) -> Result<usize> {
    let mut best = (pool[0], f64::NEG_INFINITY);
    for &k in pool {
        let theta = correlation(&channels[seed], &channels[k])?;
        if theta > best.1 || (theta == best.1 && k < best.0) {
            best = (k, theta);
        }
    }
    Ok(best.0)
}

/// Each slot: a uniformly drawn seed plus its most correlated partners.
pub fn group_maxcc<R: Rng + ?Sized>(
    channels: &[ChannelVector],
    slots: usize,
    per_slot: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    grow_groups(channels, slots, per_slot, rng, |seed, pool| most_correlated(channels, seed, pool))
}

fn norm_gap_pick(
    channels: &[ChannelVector],
    seed: usize,
    pool: &[usize],
    threshold: f64,
    largest: bool,
) -> Result<usize> {
    let seed_norm = channels[seed].norm();
    let mut best: Option<(usize, f64)> = None;
    for &k in pool {
        if correlation(&channels[seed], &channels[k])? <= threshold {
            continue;
        }
        let gap = (channels[k].norm() - seed_norm).abs();
        let better = match best {
            None => true,
            Some((_, g)) => (largest && gap > g) || (!largest && gap < g),
        };
        if better {
            best = Some((k, gap));
        }
    }
    match best {
        Some((k, _)) => Ok(k),
        None => most_correlated(channels, seed, pool),
    }
}

/// Among partners correlated above `threshold`, the largest channel-norm gap.
pub fn group_maxpi<R: Rng + ?Sized>(
    channels: &[ChannelVector],
    slots: usize,
    per_slot: usize,
    threshold: f64,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    grow_groups(channels, slots, per_slot, rng, |s, p| norm_gap_pick(channels, s, p, threshold, true))
}

/// Among partners correlated above `threshold`, the smallest channel-norm gap.
pub fn group_minpi<R: Rng + ?Sized>(
    channels: &[ChannelVector],
    slots: usize,
    per_slot: usize,
    threshold: f64,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    grow_groups(channels, slots, per_slot, rng, |s, p| norm_gap_pick(channels, s, p, threshold, false))
}

/// Uniform sampling without replacement.
pub fn group_random<R: Rng + ?Sized>(
    num_candidates: usize,
    slots: usize,
    per_slot: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if num_candidates == 0 || slots == 0 {
        return Err(Error::PoolExhausted);
    }
    let mut pool: Vec<usize> = (0..num_candidates).collect();
    pool.shuffle(rng);
    let take = pool.len().min(slots * per_slot);
    let mut out = vec![Vec::new(); slots];
    for (i, k) in pool[..take].iter().enumerate() {
        out[i / per_slot].push(*k);
    }
    Ok(out)
}

/// Groups every beam of a scenario with one strategy.
pub fn group_terminals<R: Rng + ?Sized>(scenario: &Scenario, strategy: &GroupingStrategy, rng: &mut R) -> Result<Assignment> {
    let (c, k) = (scenario.num_slots, scenario.max_per_slot);
    let beams = scenario
        .candidates
        .iter()
        .map(|pool| {
            let channels: Vec<ChannelVector> = pool.iter().map(|t| t.channel.clone()).collect();
            let th = strategy.correlation_threshold;
            match strategy.kind {
                GroupingKind::MaxCC => group_maxcc(&channels, c, k, rng),
                GroupingKind::MaxPi => group_maxpi(&channels, c, k, th, rng),
                GroupingKind::MinPi => group_minpi(&channels, c, k, th, rng),
                GroupingKind::Random => group_random(channels.len(), c, k, rng),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let a = Assignment::new(beams);
    a.validate(scenario)?;
    Ok(a)
}

/// Default size cap for exhaustive assignment enumeration.
pub const ENUMERATION_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum P5Method {
    Enumerate,
    LocalSearch,
    /// Enumerate up to the cap, local search beyond.
    Auto,
}

/// One beam's assignment subproblem: beam power and per-slot gains fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct P5Context {
    pub scheme: AccessScheme,
    pub bandwidth: f64,
    pub beam_power: f64,
    pub max_per_slot: usize,
    /// Per slot.
    pub rho: Vec<f64>,
    /// Terminals open to re-assignment.
    pub terminals: Vec<usize>,
    /// nat/s, aligned with `terminals`.
    pub demands: Vec<f64>,
    /// `gains[i][c]`: effective gain of `terminals[i]` if served in slot `c`.
    pub gains: Vec<Vec<f64>>,
    pub t_tolerance: f64,
}

impl P5Context {
    /// Context of `beam` over its currently selected terminals, precoders fixed.
    pub fn new(
        scenario: &Scenario,
        assignment: &Assignment,
        precoders: &[PrecodingMatrix],
        beam: usize,
        power: &[f64],
        t_tolerance: f64,
    ) -> Self {
        let terminals = assignment.selected(beam);
        let gains = terminals
            .iter()
            .map(|&k| {
                let t = scenario.terminal(beam, k);
                precoders
                    .iter()
                    .map(|p| {
                        LinkGains::new(&t.channel, beam, p, &scenario.reuse).effective_gain(
                            power,
                            &p.rho,
                            scenario.noise_power,
                        )
                    })
                    .collect()
            })
            .collect();
        Self {
            scheme: AccessScheme::Noma,
            bandwidth: scenario.effective_bandwidth(),
            beam_power: power[beam],
            max_per_slot: scenario.max_per_slot,
            rho: precoders.iter().map(|p| p.rho[beam]).collect(),
            demands: terminals.iter().map(|&k| scenario.terminal(beam, k).demand()).collect(),
            terminals,
            gains,
            t_tolerance,
        }
    }

    pub fn num_slots(&self) -> usize {
        self.rho.len()
    }

    fn index_of(&self, id: usize) -> Result<usize> {
        self.terminals
            .iter()
            .position(|&k| k == id)
            .ok_or_else(|| Error::InfeasibleAssignment(format!("terminal {id} is not in the beam's selected set")))
    }

    /// Root of one slot holding the terminals at positions `members`.
    pub fn slot_t(&self, slot: usize, members: &[usize]) -> Result<f64> {
        if members.is_empty() {
            return Ok(f64::INFINITY);
        }
        let ids: Vec<usize> = members.iter().map(|&i| self.terminals[i]).collect();
        let demands: Vec<f64> = members.iter().map(|&i| self.demands[i]).collect();
        let gains: Vec<f64> = members.iter().map(|&i| self.gains[i][slot]).collect();
        if let Some(&g) = gains.iter().find(|&&g| !(g > 0.0)) {
            return Err(Error::NonPositiveGain(g));
        }
        let group = SlotGroup::new(&ids, &demands, &gains);
        solve_slot_t(self.scheme, &group, self.rho[slot], self.beam_power, self.bandwidth, self.t_tolerance)
    }

    /// `t̄_b` of a slot layout given as terminal ids.
    pub fn evaluate(&self, slots: &[Vec<usize>]) -> Result<f64> {
        Ok(self.slot_values(&self.to_positions(slots)?)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    fn to_positions(&self, slots: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
        if slots.len() != self.num_slots() {
            return Err(Error::InfeasibleAssignment(format!(
                "{} slots given, {} expected",
                slots.len(),
                self.num_slots()
            )));
        }
        let pos = slots
            .iter()
            .map(|s| s.iter().map(|&k| self.index_of(k)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut seen = vec![false; self.terminals.len()];
        for s in &pos {
            if s.is_empty() || s.len() > self.max_per_slot {
                return Err(Error::InfeasibleAssignment(format!(
                    "slot sizes must lie in 1..={}",
                    self.max_per_slot
                )));
            }
            for &i in s {
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InfeasibleAssignment("terminal scheduled twice".into()));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InfeasibleAssignment("a selected terminal is unscheduled".into()));
        }
        Ok(pos)
    }

    fn slot_values(&self, pos: &[Vec<usize>]) -> Result<Vec<f64>> {
        pos.iter().enumerate().map(|(c, s)| self.slot_t(c, s)).collect()
    }

    fn to_ids(&self, pos: &[Vec<usize>]) -> Vec<Vec<usize>> {
        pos.iter()
            .map(|s| {
                let mut v: Vec<usize> = s.iter().map(|&i| self.terminals[i]).collect();
                v.sort_unstable();
                v
            })
            .collect()
    }
}

/// Best slot layout found for one beam.
#[derive(Debug, Clone, PartialEq)]
pub struct P5Solution {
    /// Terminal ids per slot.
    pub slots: Vec<Vec<usize>>,
    pub t: f64,
    /// Value of the incumbent layout.
    pub incumbent_t: f64,
    /// Layouts evaluated (enumeration) or improving moves applied (local search).
    pub visited: usize,
}

fn check_size(ctx: &P5Context) -> Result<()> {
    let n = ctx.terminals.len();
    let c = ctx.num_slots();
    if n < c || n > c * ctx.max_per_slot {
        return Err(Error::InfeasibleAssignment(format!(
            "{n} terminals cannot fill {c} slots of at most {}",
            ctx.max_per_slot
        )));
    }
    Ok(())
}

/// Every layout of the selected terminals into non-empty slots of at most
/// `K̄` terminals, visited in a fixed order.
///
/// Slot roots are tabulated per (slot, member set) so each layout costs
/// `C` lookups.
pub fn enumerate_layouts<F>(ctx: &P5Context, mut visit: F) -> Result<usize>
where
    F: FnMut(&[u32], &[f64]),
{
    check_size(ctx)?;
    let n = ctx.terminals.len();
    let c = ctx.num_slots();
    let k = ctx.max_per_slot;
    let full = 1usize << n;
    let table = slot_table(ctx)?;

    let mut masks = vec![0u32; c];
    let mut values = vec![0.0; c];
    let mut count = 0;
    #[allow(clippy::too_many_arguments)]
    fn place<F: FnMut(&[u32], &[f64])>(
        i: usize,
        n: usize,
        k: usize,
        full: usize,
        table: &[f64],
        masks: &mut [u32],
        values: &mut [f64],
        count: &mut usize,
        visit: &mut F,
    ) {
        let c = masks.len();
        if i == n {
            if masks.iter().all(|&m| m != 0) {
                for s in 0..c {
                    values[s] = table[s * full + masks[s] as usize];
                }
                *count += 1;
                visit(masks, values);
            }
            return;
        }
        // Slots still empty must be reachable with the terminals left.
        let empty = masks.iter().filter(|&&m| m == 0).count();
        if empty > n - i {
            return;
        }
        for s in 0..c {
            if (masks[s].count_ones() as usize) < k {
                masks[s] |= 1 << i;
                place(i + 1, n, k, full, table, masks, values, count, visit);
                masks[s] &= !(1 << i);
            }
        }
    }
    place(0, n, k, full, &table, &mut masks, &mut values, &mut count, &mut visit);
    Ok(count)
}

fn masks_to_positions(masks: &[u32], n: usize) -> Vec<Vec<usize>> {
    masks.iter().map(|&m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

/// Ascending slot values, compared lexicographically.
fn leximin_key(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn leximin_better(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return true;
        }
        if x < y {
            return false;
        }
    }
    false
}

/// Root of every (slot, member set) with at most `K̄` members, indexed by
/// `slot · 2ⁿ + mask`.
fn slot_table(ctx: &P5Context) -> Result<Vec<f64>> {
    let n = ctx.terminals.len();
    let full = 1usize << n;
    let mut table = vec![f64::NAN; ctx.num_slots() * full];
    for mask in 1..full {
        if (mask.count_ones() as usize) > ctx.max_per_slot {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        for slot in 0..ctx.num_slots() {
            table[slot * full + mask] = ctx.slot_t(slot, &members)?;
        }
    }
    Ok(table)
}

struct Search<'a> {
    table: &'a [f64],
    full: usize,
    k: u32,
    masks: Vec<u32>,
    values: Vec<f64>,
    best_masks: Vec<u32>,
    best_key: Vec<f64>,
    visited: usize,
}

impl Search<'_> {
    /// Fills slots in order; a slot whose root is already below the best
    /// bottleneck cannot lead to a better layout.
    fn branch(&mut self, slot: usize, remaining: u32) {
        let c = self.masks.len();
        if slot == c {
            if remaining == 0 {
                self.visited += 1;
                let key = leximin_key(&self.values);
                if leximin_better(&key, &self.best_key) {
                    self.best_key = key;
                    self.best_masks = self.masks.clone();
                }
            }
            return;
        }
        let left = (c - slot) as u32;
        let r = remaining.count_ones();
        if r < left || r > left * self.k {
            return;
        }
        let mut sub = remaining;
        while sub > 0 {
            if sub.count_ones() <= self.k {
                let v = self.table[slot * self.full + sub as usize];
                if v >= self.best_key[0] {
                    self.masks[slot] = sub;
                    self.values[slot] = v;
                    self.branch(slot + 1, remaining & !sub);
                }
            }
            sub = (sub - 1) & remaining;
        }
    }
}

fn solve_enumerate(ctx: &P5Context, incumbent: &[Vec<usize>], incumbent_t: f64) -> Result<P5Solution> {
    check_size(ctx)?;
    let n = ctx.terminals.len();
    let table = slot_table(ctx)?;
    let inc_masks: Vec<u32> = ctx
        .to_positions(incumbent)?
        .iter()
        .map(|s| s.iter().fold(0u32, |m, &i| m | 1 << i))
        .collect();
    let full = 1usize << n;
    let inc_values: Vec<f64> = inc_masks
        .iter()
        .enumerate()
        .map(|(c, &m)| table[c * full + m as usize])
        .collect();
    let mut search = Search {
        table: &table,
        full,
        k: ctx.max_per_slot as u32,
        masks: vec![0; ctx.num_slots()],
        values: vec![0.0; ctx.num_slots()],
        best_key: leximin_key(&inc_values),
        best_masks: inc_masks.clone(),
        visited: 0,
    };
    search.branch(0, (full - 1) as u32);
    let t = search.best_key[0];
    let slots = if search.best_masks == inc_masks || t <= incumbent_t {
        incumbent.to_vec()
    } else {
        ctx.to_ids(&masks_to_positions(&search.best_masks, n))
    };
    Ok(P5Solution {
        slots,
        t: t.max(incumbent_t),
        incumbent_t,
        visited: search.visited,
    })
}

/// Terminal positions per slot.
type Layout = Vec<Vec<usize>>;

/// Layouts one step away: single swaps, moves into a slot with room, whole
/// slot exchanges and three-slot rotations of single terminals. Each comes
/// with the slots it touches.
fn neighbours(pos: &[Vec<usize>], max_per_slot: usize) -> Vec<(Layout, Vec<usize>)> {
    let c = pos.len();
    let mut out = Vec::new();
    for a in 0..c {
        for b in (a + 1)..c {
            for i in 0..pos[a].len() {
                for j in 0..pos[b].len() {
                    let mut cand = pos.to_vec();
                    let tmp = cand[a][i];
                    cand[a][i] = cand[b][j];
                    cand[b][j] = tmp;
                    out.push((cand, vec![a, b]));
                }
            }
            let mut cand = pos.to_vec();
            cand.swap(a, b);
            out.push((cand, vec![a, b]));
        }
        for b in 0..c {
            if a == b || pos[a].len() <= 1 || pos[b].len() >= max_per_slot {
                continue;
            }
            for i in 0..pos[a].len() {
                let mut cand = pos.to_vec();
                let k = cand[a].remove(i);
                cand[b].push(k);
                out.push((cand, vec![a, b]));
            }
        }
    }
    for a in 0..c {
        for b in 0..c {
            for d in 0..c {
                if a == b || b == d || a == d || a > b.min(d) {
                    continue;
                }
                // a → b → d → a, one terminal each.
                for i in 0..pos[a].len() {
                    for j in 0..pos[b].len() {
                        for l in 0..pos[d].len() {
                            let mut cand = pos.to_vec();
                            let (x, y, z) = (pos[a][i], pos[b][j], pos[d][l]);
                            cand[b][j] = x;
                            cand[d][l] = y;
                            cand[a][i] = z;
                            out.push((cand, vec![a, b, d]));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Perturbation rounds of the local search, per selected terminal.
const KICKS_PER_TERMINAL: usize = 8;

struct Descent<'a> {
    ctx: &'a P5Context,
    cache: HashMap<(usize, Vec<usize>), f64>,
    moves: usize,
}

impl Descent<'_> {
    fn slot_t(&mut self, c: usize, members: &[usize]) -> Result<f64> {
        let mut key = members.to_vec();
        key.sort_unstable();
        if let Some(v) = self.cache.get(&(c, key.clone())) {
            return Ok(*v);
        }
        let v = self.ctx.slot_t(c, &key)?;
        self.cache.insert((c, key), v);
        Ok(v)
    }

    fn values(&mut self, pos: &[Vec<usize>]) -> Result<Vec<f64>> {
        pos.iter().enumerate().map(|(c, s)| self.slot_t(c, s)).collect()
    }

    /// Best-improving descent to a leximin local optimum.
    fn run(&mut self, mut pos: Vec<Vec<usize>>) -> Result<(Vec<Vec<usize>>, Vec<f64>)> {
        let mut values = self.values(&pos)?;
        loop {
            let current = leximin_key(&values);
            // (leximin key, layout, slot values) of the best neighbour.
            let mut best: Option<(Vec<f64>, Layout, Vec<f64>)> = None;
            for (cand, changed) in neighbours(&pos, self.ctx.max_per_slot) {
                let mut vals = values.clone();
                for &s in &changed {
                    vals[s] = self.slot_t(s, &cand[s])?;
                }
                let key = leximin_key(&vals);
                let reference = best.as_ref().map(|b| &b.0).unwrap_or(&current);
                if leximin_better(&key, reference) {
                    best = Some((key, cand, vals));
                }
            }
            match best {
                Some((_, cand, vals)) => {
                    pos = cand;
                    values = vals;
                    self.moves += 1;
                }
                None => return Ok((pos, values)),
            }
        }
    }
}

/// Iterated local search: descend from the incumbent, then repeatedly kick
/// the best layout with a few random swaps and descend again. The kick
/// sequence is seeded, so results are reproducible.
fn solve_local(ctx: &P5Context, incumbent: &[Vec<usize>], incumbent_t: f64) -> Result<P5Solution> {
    let mut d = Descent {
        ctx,
        cache: HashMap::new(),
        moves: 0,
    };
    let (mut best_pos, mut best_vals) = d.run(ctx.to_positions(incumbent)?)?;
    let mut best_key = leximin_key(&best_vals);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let c = best_pos.len();
    if c > 1 {
        for _ in 0..KICKS_PER_TERMINAL * ctx.terminals.len() {
            let mut kicked = best_pos.clone();
            for _ in 0..2 {
                let a = rng.random_range(0..c);
                let b = (a + rng.random_range(1..c)) % c;
                let i = rng.random_range(0..kicked[a].len());
                let j = rng.random_range(0..kicked[b].len());
                let tmp = kicked[a][i];
                kicked[a][i] = kicked[b][j];
                kicked[b][j] = tmp;
            }
            let (pos, vals) = d.run(kicked)?;
            let key = leximin_key(&vals);
            if leximin_better(&key, &best_key) {
                best_pos = pos;
                best_vals = vals;
                best_key = key;
            }
        }
    }
    let t = best_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let (slots, t) = if t <= incumbent_t {
        (incumbent.to_vec(), incumbent_t)
    } else {
        (ctx.to_ids(&best_pos), t)
    };
    Ok(P5Solution {
        slots,
        t,
        incumbent_t,
        visited: d.moves,
    })
}

/// Re-optimizes one beam's terminal-timeslot layout for fixed power and gains.
///
/// The returned value is never below the incumbent's.
pub fn solve_p5(ctx: &P5Context, incumbent: &[Vec<usize>], method: P5Method, cap: usize) -> Result<P5Solution> {
    check_size(ctx)?;
    let incumbent_t = ctx.evaluate(incumbent)?;
    let n = ctx.terminals.len();
    let sol = match method {
        P5Method::Enumerate if n > cap => return Err(Error::EnumerationTooLarge { terminals: n, cap }),
        P5Method::Enumerate => solve_enumerate(ctx, incumbent, incumbent_t)?,
        P5Method::Auto if n <= cap => solve_enumerate(ctx, incumbent, incumbent_t)?,
        _ => solve_local(ctx, incumbent, incumbent_t)?,
    };
    assert!(sol.t >= incumbent_t, "assignment update lowered the beam OCTR");
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JopdtOptions {
    pub solver: SolverOptions,
    pub outer_iterations: usize,
    pub method: P5Method,
    pub enumeration_cap: usize,
}

impl Default for JopdtOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            outer_iterations: 5,
            method: P5Method::Auto,
            enumeration_cap: ENUMERATION_CAP,
        }
    }
}

/// Alternates beam-power balancing with per-beam layout re-optimization,
/// refreshing precoders between outer passes.
///
/// Returns the best fixed-assignment solution among the initial layout and
/// every adopted one, with one outer record per pass.
pub fn jopdt(scenario: &Scenario, initial: &Assignment, options: &JopdtOptions) -> Result<SolveResult> {
    let precoders = slot_precoders(scenario, initial)?;
    let mut best = jopd(scenario, initial, &precoders, &options.solver)?;
    let mut alpha = initial.clone();
    let mut outer_trace = Vec::with_capacity(options.outer_iterations);
    let tol = options.solver.t_tolerance;

    for n in 1..=options.outer_iterations {
        let precoders = slot_precoders(scenario, &alpha)?;
        let problem = PowerProblem::new(scenario, &alpha, &precoders, AccessScheme::Noma)?;
        let mut current = alpha.clone();
        let mut layouts: Vec<Assignment> = Vec::new();
        let (trace, selected, converged) = fixed_point(&problem, &options.solver, |p| {
            let sols = (0..scenario.num_beams)
                .into_par_iter()
                .map(|b| {
                    let ctx = P5Context::new(scenario, &current, &precoders, b, p, tol);
                    solve_p5(&ctx, &current.beams[b], options.method, options.enumeration_cap)
                })
                .collect::<Result<Vec<_>>>()?;
            for (b, s) in sols.iter().enumerate() {
                current.beams[b] = s.slots.clone();
            }
            layouts.push(current.clone());
            Ok(sols.iter().map(|s| s.t).collect())
        })?;
        alpha = layouts[selected].clone();
        let candidate = jopd(scenario, &alpha, &slot_precoders(scenario, &alpha)?, &options.solver)?;
        outer_trace.push(OuterRecord {
            outer_iteration: n,
            inner_iterations: trace.len(),
            inner_converged: converged,
            inner_trace: trace,
            min_octr: candidate.min_octr,
        });
        if !converged {
            log::warn!("inner loop of outer pass {n} stopped without converging");
        }
        if candidate.min_octr > best.min_octr {
            best = candidate;
        }
    }
    best.outer_trace = outer_trace;
    Ok(best)
}

/// Orthogonal baseline: each pair splits the band in halves, no SIC.
pub fn oma_baseline(scenario: &Scenario, assignment: &Assignment, options: &SolverOptions) -> Result<SolveResult> {
    if scenario.max_per_slot != 2 {
        return Err(Error::OmaPairing(scenario.max_per_slot));
    }
    let precoders = slot_precoders(scenario, assignment)?;
    let problem = PowerProblem::new(scenario, assignment, &precoders, AccessScheme::Oma)?;
    jopd_problem(&problem, assignment, options)
}

/// Fixed-assignment solve under a given access scheme.
pub fn solve_fixed(
    scenario: &Scenario,
    assignment: &Assignment,
    scheme: AccessScheme,
    options: &SolverOptions,
) -> Result<SolveResult> {
    match scheme {
        AccessScheme::Noma => jopd(scenario, assignment, &slot_precoders(scenario, assignment)?, options),
        AccessScheme::Oma => oma_baseline(scenario, assignment, options),
    }
}
