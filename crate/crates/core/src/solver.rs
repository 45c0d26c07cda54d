//! Max-min OCTR for a fixed terminal-timeslot assignment.
//!
//! For fixed beam powers each beam decouples: in every slot the group needs
//! `required_power(t)` to give all its terminals OCTR `t`, and the beam's
//! optimum `f_b(P)` is the smallest per-slot root of `required_power(t) = P_b`.
//! `f_b` is a competitive utility function of the beam-power vector, so the
//! normalized fixed-point update `P_b ← P_b / f_b(P)` converges to the
//! balanced max-min point (JOPD).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noma::{
    power_weights, required_power, required_power_slope, scheme_powers, AccessScheme, DecodingOrder, LinkGains,
};
use crate::precoder::PrecodingMatrix;
use crate::scenario::Scenario;
use crate::scheduler::Assignment;

/// Finds the root of a continuous non-decreasing `f` on `[lo, hi]`.
///
/// Requires `f(lo) ≤ 0 ≤ f(hi)`. Stops when the bracket is narrower than
/// `tol · |root|` or cannot be split any further, so `tol = 0` runs to
/// machine precision.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if !(lo <= hi) || !(f(lo) <= 0.0) || !(f(hi) >= 0.0) {
        return Err(Error::InvalidBracket { lo, hi });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * mid.abs() || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialPower {
    /// `P_b = min(P_b,max, P_tot / B)`.
    Uniform,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative bracket width at which root searches stop.
    pub t_tolerance: f64,
    pub convergence_tolerance: f64,
    pub max_iterations: usize,
    pub initial_power: InitialPower,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            t_tolerance: 1e-10,
            convergence_tolerance: 1e-8,
            max_iterations: 200,
            initial_power: InitialPower::Uniform,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_tolerance > 0.0 && self.convergence_tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(
                "solver tolerances must be positive and max_iterations at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Co-scheduled terminals of one (beam, slot), strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotGroup {
    pub ids: Vec<usize>,
    pub demands: Vec<f64>,
    pub gains: Vec<f64>,
}

impl SlotGroup {
    /// Sorts terminals into decoding order.
    pub fn new(ids: &[usize], demands: &[f64], gains: &[f64]) -> Self {
        let order = DecodingOrder::from_gains(ids, gains);
        let pos = |id: usize| ids.iter().position(|&x| x == id).unwrap();
        Self {
            demands: order.order.iter().map(|&k| demands[pos(k)]).collect(),
            gains: order.order.iter().map(|&k| gains[pos(k)]).collect(),
            ids: order.order,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn order(&self) -> DecodingOrder {
        DecodingOrder {
            order: self.ids.clone(),
        }
    }
}

/// Largest OCTR a slot group reaches with beam power `beam_power`.
pub fn solve_slot_t(
    scheme: AccessScheme,
    group: &SlotGroup,
    rho: f64,
    beam_power: f64,
    bandwidth: f64,
    tol: f64,
) -> Result<f64> {
    let f = |t: f64| required_power(scheme, t, &group.demands, &group.gains, rho, bandwidth) - beam_power;
    let d_min = group.demands.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = group.gains.iter().cloned().fold(0.0, f64::max);
    let mut hi = scheme.terminal_bandwidth(bandwidth) / d_min * (g_max * beam_power / rho).ln_1p();
    if !(hi > 0.0 && hi.is_finite()) {
        hi = 1.0;
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    bisect_root(f, 0.0, hi, tol)
}

/// Optimum of one beam for fixed beam powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamOctr {
    pub t_star: f64,
    pub binding_slot: usize,
    /// Root of each slot on its own.
    pub slot_t: Vec<f64>,
}

/// `t* = min_c t_c` where `t_c` solves the slot's power equation; the
/// binding slot is the lowest-indexed minimizer.
pub fn solve_t_star(
    scheme: AccessScheme,
    groups: &[SlotGroup],
    rho: &[f64],
    beam_power: f64,
    bandwidth: f64,
    tol: f64,
) -> Result<BeamOctr> {
    if !(beam_power > 0.0) {
        return Err(Error::NonPositivePower(beam_power));
    }
    let slot_t = groups
        .iter()
        .zip(rho)
        .enumerate()
        .map(|(c, (g, &r))| {
            if g.is_empty() {
                // The beam index is filled in by the caller.
                return Err(Error::EmptySlot { beam: usize::MAX, slot: c });
            }
            if let Some(&bad) = g.gains.iter().find(|&&x| !(x > 0.0)) {
                return Err(Error::NonPositiveGain(bad));
            }
            solve_slot_t(scheme, g, r, beam_power, bandwidth, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let (binding_slot, t_star) = slot_t
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (c, t)| if t < best.1 { (c, t) } else { best });
    Ok(BeamOctr {
        t_star,
        binding_slot,
        slot_t,
    })
}

/// A scheduled terminal with its precoded link gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub terminal: usize,
    pub demand: f64,
    pub link: LinkGains,
}

/// Everything the beam-power optimization needs for a fixed assignment and
/// fixed precoders.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    pub scheme: AccessScheme,
    /// Band available to one beam after frequency reuse.
    pub bandwidth: f64,
    pub noise_power: f64,
    pub total_power: f64,
    pub per_beam_power: f64,
    /// `rho[slot][beam]`.
    pub rho: Vec<Vec<f64>>,
    /// `groups[beam][slot]`.
    pub groups: Vec<Vec<Vec<Member>>>,
}

impl PowerProblem {
    pub fn new(
        scenario: &Scenario,
        assignment: &Assignment,
        precoders: &[PrecodingMatrix],
        scheme: AccessScheme,
    ) -> Result<Self> {
        if scheme == AccessScheme::Oma && scenario.max_per_slot != 2 {
            return Err(Error::OmaPairing(scenario.max_per_slot));
        }
        assignment.validate(scenario)?;
        for p in precoders {
            if let Some(&r) = p.rho.iter().find(|&&r| !(r > 0.0)) {
                return Err(Error::InvalidScenario(format!("feed radiation factor {r} is not positive")));
            }
        }
        let groups = (0..scenario.num_beams)
            .map(|b| {
                (0..scenario.num_slots)
                    .map(|c| {
                        let members = assignment.slot(b, c);
                        if members.is_empty() {
                            return Err(Error::EmptySlot { beam: b, slot: c });
                        }
                        Ok(members
                            .iter()
                            .map(|&k| {
                                let t = scenario.terminal(b, k);
                                Member {
                                    terminal: k,
                                    demand: t.demand(),
                                    link: LinkGains::new(&t.channel, b, &precoders[c], &scenario.reuse),
                                }
                            })
                            .collect())
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scheme,
            bandwidth: scenario.effective_bandwidth(),
            noise_power: scenario.noise_power,
            total_power: scenario.total_power,
            per_beam_power: scenario.per_beam_power,
            rho: precoders.iter().map(|p| p.rho.clone()).collect(),
            groups,
        })
    }

    pub fn num_beams(&self) -> usize {
        self.groups.len()
    }

    pub fn num_slots(&self) -> usize {
        self.rho.len()
    }

    /// Feed factors of one beam across slots.
    pub fn beam_rho(&self, beam: usize) -> Vec<f64> {
        self.rho.iter().map(|r| r[beam]).collect()
    }

    /// Groups of `beam` sorted into decoding order under `power`.
    pub fn slot_groups(&self, beam: usize, power: &[f64]) -> Vec<SlotGroup> {
        self.groups[beam]
            .iter()
            .enumerate()
            .map(|(c, members)| {
                let ids: Vec<usize> = members.iter().map(|m| m.terminal).collect();
                let demands: Vec<f64> = members.iter().map(|m| m.demand).collect();
                let gains: Vec<f64> = members
                    .iter()
                    .map(|m| m.link.effective_gain(power, &self.rho[c], self.noise_power))
                    .collect();
                SlotGroup::new(&ids, &demands, &gains)
            })
            .collect()
    }

    /// `f_b(P)`.
    pub fn beam_octr(&self, beam: usize, power: &[f64], tol: f64) -> Result<BeamOctr> {
        let groups = self.slot_groups(beam, power);
        solve_t_star(self.scheme, &groups, &self.beam_rho(beam), power[beam], self.bandwidth, tol).map_err(
            |e| match e {
                Error::EmptySlot { slot, .. } => Error::EmptySlot { beam, slot },
                e => e,
            },
        )
    }

    /// Whether `f_b(P) > t`, decided from the required power at `t` in
    /// every slot without solving for the root.
    pub fn beam_exceeds(&self, beam: usize, power: &[f64], t: f64) -> bool {
        self.slot_groups(beam, power).iter().enumerate().all(|(c, g)| {
            required_power(self.scheme, t, &g.demands, &g.gains, self.rho[c][beam], self.bandwidth) < power[beam]
        })
    }

    pub fn evaluate(&self, power: &[f64], tol: f64) -> Result<Vec<BeamOctr>> {
        (0..self.num_beams()).map(|b| self.beam_octr(b, power, tol)).collect()
    }

    pub fn min_octr(&self, power: &[f64], tol: f64) -> Result<f64> {
        Ok(self
            .evaluate(power, tol)?
            .iter()
            .map(|o| o.t_star)
            .fold(f64::INFINITY, f64::min))
    }

    pub fn uniform_power(&self) -> Vec<f64> {
        let b = self.num_beams();
        vec![self.per_beam_power.min(self.total_power / b as f64); b]
    }

    /// Scales `raw` down (or up) so the tightest power constraint is active.
    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        let eps = raw
            .iter()
            .map(|p| p / self.per_beam_power)
            .fold(raw.iter().sum::<f64>() / self.total_power, f64::max);
        raw.iter().map(|p| p / eps).collect()
    }

    /// Terminal-level allocation for fixed beam powers: every slot spends
    /// the whole beam power, its terminals all at the slot's own root.
    pub fn allocate(&self, power: &[f64], tol: f64) -> Result<Vec<BeamSolution>> {
        (0..self.num_beams())
            .map(|b| {
                let octr = self.beam_octr(b, power, tol)?;
                let slots = self
                    .slot_groups(b, power)
                    .into_iter()
                    .enumerate()
                    .map(|(c, g)| {
                        let t = octr.slot_t[c];
                        let rates: Vec<f64> = g.demands.iter().map(|d| t * d).collect();
                        let powers = scheme_powers(self.scheme, &rates, &g.gains, self.bandwidth)?;
                        Ok(SlotAllocation {
                            slot: c,
                            phi: if self.scheme == AccessScheme::Noma {
                                g.order().phi_pairs()
                            } else {
                                Vec::new()
                            },
                            order: g.ids,
                            gains: g.gains,
                            demands: g.demands,
                            t,
                            rates,
                            powers,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(BeamSolution {
                    t_star: octr.t_star,
                    binding_slot: octr.binding_slot,
                    slots,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAllocation {
    pub slot: usize,
    /// Terminal ids in decoding order.
    pub order: Vec<usize>,
    pub gains: Vec<f64>,
    /// nat/s, same order.
    pub demands: Vec<f64>,
    pub t: f64,
    pub rates: Vec<f64>,
    pub powers: Vec<f64>,
    /// `(k, l)` pairs with `φ_kl = 1`.
    pub phi: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSolution {
    pub t_star: f64,
    pub binding_slot: usize,
    pub slots: Vec<SlotAllocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub power: Vec<f64>,
    pub t: Vec<f64>,
}

/// One outer pass of the assignment-updating heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub outer_iteration: usize,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub inner_trace: Vec<IterationRecord>,
    /// Max-min OCTR of the adopted assignment with its own precoders.
    pub min_octr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub scheme: AccessScheme,
    pub beam_power: Vec<f64>,
    pub t_star: Vec<f64>,
    pub min_octr: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
    pub beams: Vec<BeamSolution>,
    pub assignment: Assignment,
    pub kkt: KktReport,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outer_trace: Vec<OuterRecord>,
}

impl SolveResult {
    /// OCTR of every scheduled terminal as `(beam, terminal, octr)`.
    pub fn terminal_octrs(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (b, beam) in self.beams.iter().enumerate() {
            for slot in &beam.slots {
                for (i, &k) in slot.order.iter().enumerate() {
                    out.push((b, k, slot.rates[i] / slot.demands[i]));
                }
            }
        }
        out.sort_by_key(|&(b, k, _)| (b, k));
        out
    }

    pub fn mean_octr(&self) -> f64 {
        let v = self.terminal_octrs();
        v.iter().map(|x| x.2).sum::<f64>() / v.len() as f64
    }

    /// Beam powers and OCTRs as CSV: `iteration, P_1..P_B, t_1..t_B`.
    pub fn trace_csv(&self) -> Result<String> {
        let b = self.beam_power.len();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["iteration".to_string()];
        header.extend((1..=b).map(|i| format!("P_{i}")));
        header.extend((1..=b).map(|i| format!("t_{i}")));
        w.write_record(&header)?;
        for (n, rec) in self.trace.iter().enumerate() {
            let mut row = vec![n.to_string()];
            row.extend(rec.power.iter().map(|x| format!("{x:.17e}")));
            row.extend(rec.t.iter().map(|x| format!("{x:.17e}")));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

fn spread(t: &[f64]) -> f64 {
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    t.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max) / mean
}

fn initial_power(problem: &PowerProblem, options: &SolverOptions) -> Result<Vec<f64>> {
    match &options.initial_power {
        InitialPower::Uniform => Ok(problem.uniform_power()),
        InitialPower::Custom(p) => {
            if p.len() != problem.num_beams() || p.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Config("custom initial power must be positive per beam".into()));
            }
            if p.iter().sum::<f64>() > problem.total_power * (1.0 + 1e-12)
                || p.iter().any(|x| *x > problem.per_beam_power * (1.0 + 1e-12))
            {
                return Err(Error::Config("custom initial power violates the power budget".into()));
            }
            Ok(p.clone())
        }
    }
}

/// Fixed-point beam-power iteration driven by an arbitrary per-beam utility.
///
/// Returns the trace, the index of the selected iterate and whether the
/// t-spread criterion was met.
pub(crate) fn fixed_point<F>(
    problem: &PowerProblem,
    options: &SolverOptions,
    mut utility: F,
) -> Result<(Vec<IterationRecord>, usize, bool)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    options.validate()?;
    let mut power = initial_power(problem, options)?;
    let mut trace: Vec<IterationRecord> = Vec::new();
    for _ in 0..options.max_iterations {
        let t = utility(&power)?;
        let s = spread(&t);
        trace.push(IterationRecord {
            power: power.clone(),
            t: t.clone(),
        });
        if s < options.convergence_tolerance {
            return Ok((trace.clone(), trace.len() - 1, true));
        }
        let raw: Vec<f64> = power.iter().zip(&t).map(|(p, t)| p / t).collect();
        let next = problem.normalize(&raw);
        let change = next
            .iter()
            .zip(&power)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        power = next;
        if change == 0.0 {
            break;
        }
    }
    let best = trace
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.t.iter().cloned().fold(f64::INFINITY, f64::min)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
        .0;
    Ok((trace, best, false))
}

pub(crate) fn finish(
    problem: &PowerProblem,
    assignment: &Assignment,
    options: &SolverOptions,
    trace: Vec<IterationRecord>,
    selected: usize,
    converged: bool,
) -> Result<SolveResult> {
    if !converged {
        log::warn!(
            "beam-power iteration did not reach t-spread {} within {} iterations",
            options.convergence_tolerance,
            options.max_iterations
        );
    }
    let power = trace[selected].power.clone();
    // Reported powers come from roots at full precision so every slot
    // spends its beam power exactly.
    let beams = problem.allocate(&power, 0.0)?;
    let t_star: Vec<f64> = beams.iter().map(|b| b.t_star).collect();
    let mut result = SolveResult {
        scheme: problem.scheme,
        min_octr: t_star.iter().cloned().fold(f64::INFINITY, f64::min),
        beam_power: power,
        t_star,
        iterations: trace.len(),
        converged,
        trace,
        beams,
        assignment: assignment.clone(),
        kkt: KktReport::default(),
        outer_trace: Vec::new(),
    };
    result.kkt = kkt_certificate(&result, problem, &KktThresholds::default())?;
    Ok(result)
}

/// Joint power and decoding-order optimization for a fixed assignment.
pub fn jopd_problem(problem: &PowerProblem, assignment: &Assignment, options: &SolverOptions) -> Result<SolveResult> {
    let (trace, selected, converged) = fixed_point(problem, options, |p| {
        Ok(problem
            .evaluate(p, options.t_tolerance)?
            .into_iter()
            .map(|o| o.t_star)
            .collect())
    })?;
    finish(problem, assignment, options, trace, selected, converged)
}

pub fn jopd(
    scenario: &Scenario,
    assignment: &Assignment,
    precoders: &[PrecodingMatrix],
    options: &SolverOptions,
) -> Result<SolveResult> {
    let problem = PowerProblem::new(scenario, assignment, precoders, AccessScheme::Noma)?;
    jopd_problem(&problem, assignment, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktThresholds {
    pub binding: f64,
    pub spread: f64,
    pub balance: f64,
    pub activity: f64,
}

impl Default for KktThresholds {
    fn default() -> Self {
        Self {
            binding: 1e-8,
            spread: 1e-6,
            balance: 1e-8,
            activity: 1e-9,
        }
    }
}

/// Primal optimality certificate of a solved instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `|required_{c*}(t_b) − P_b| / P_b` for the reported `t_b`.
    pub binding_residual: Vec<f64>,
    /// Relative spread of `f_b(P)` recomputed from the reported powers.
    pub t_spread: f64,
    pub total_power_active: bool,
    pub beam_cap_active: Vec<bool>,
    /// Worst `|ρ_bc Σ_k p_bkc − P_b| / P_b`.
    pub balance_residual: f64,
    pub pass: bool,
}

pub fn kkt_certificate(result: &SolveResult, problem: &PowerProblem, th: &KktThresholds) -> Result<KktReport> {
    let p = &result.beam_power;
    let fresh = problem.evaluate(p, 0.0)?;
    let t_fresh: Vec<f64> = fresh.iter().map(|o| o.t_star).collect();

    let binding_residual = (0..problem.num_beams())
        .map(|b| {
            let c = fresh[b].binding_slot;
            let g = &problem.slot_groups(b, p)[c];
            let req = required_power(
                problem.scheme,
                result.t_star[b],
                &g.demands,
                &g.gains,
                problem.rho[c][b],
                problem.bandwidth,
            );
            (req - p[b]).abs() / p[b]
        })
        .collect::<Vec<_>>();

    let mut balance_residual: f64 = 0.0;
    for (b, beam) in result.beams.iter().enumerate() {
        for s in &beam.slots {
            let spent = problem.rho[s.slot][b] * s.powers.iter().sum::<f64>();
            balance_residual = balance_residual.max((spent - p[b]).abs() / p[b]);
        }
    }

    let total_power_active = p.iter().sum::<f64>() >= problem.total_power * (1.0 - th.activity);
    let beam_cap_active: Vec<bool> = p
        .iter()
        .map(|x| *x >= problem.per_beam_power * (1.0 - th.activity))
        .collect();
    let t_spread = spread(&t_fresh);
    let pass = binding_residual.iter().all(|r| *r < th.binding)
        && t_spread < th.spread
        && balance_residual < th.balance
        && (total_power_active || beam_cap_active.iter().any(|x| *x));
    Ok(KktReport {
        binding_residual,
        t_spread,
        total_power_active,
        beam_cap_active,
        balance_residual,
        pass,
    })
}

/// Sensitivities of `f_b` at its binding slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OctrGradient {
    /// `∂f_b/∂P_b`.
    pub own: f64,
    /// `∂f_b/∂P_b'`; entry `b` is zero.
    pub cross: Vec<f64>,
}

/// Analytic partial derivatives of `f_b` by implicit differentiation of the
/// binding slot's power equation, decoding order held fixed.
pub fn partial_derivatives(problem: &PowerProblem, power: &[f64], beam: usize, tol: f64) -> Result<OctrGradient> {
    let octr = problem.beam_octr(beam, power, tol)?;
    let c = octr.binding_slot;
    let t = octr.t_star;
    let rho = &problem.rho[c];
    let members = &problem.groups[beam][c];
    let group = &problem.slot_groups(beam, power)[c];
    let weights = power_weights(problem.scheme, t, &group.demands, problem.bandwidth);

    // dReq/dt without the ρ_b factor; it cancels against ∂Req/∂P_b'.
    let slope = required_power_slope(problem.scheme, t, &group.demands, &group.gains, 1.0, problem.bandwidth);
    let own = 1.0 / (rho[beam] * slope);

    let cross = (0..problem.num_beams())
        .map(|other| {
            if other == beam {
                return 0.0;
            }
            let num: f64 = group
                .ids
                .iter()
                .zip(&weights)
                .map(|(id, (w, _))| {
                    let link = &members.iter().find(|m| m.terminal == *id).unwrap().link;
                    // ∂(1/g_k)/∂P_b' = |hᴴ w_b'|² / (|hᴴ w_b|² ρ_b').
                    w * link.cross[other] / (link.own * rho[other])
                })
                .sum();
            -num / slope
        })
        .collect();
    Ok(OctrGradient { own, cross })
}
