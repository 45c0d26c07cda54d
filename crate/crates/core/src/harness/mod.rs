//! Brute-force oracles, the Monte-Carlo experiment runner and result export.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::noma::AccessScheme;
use crate::scenario::{Scenario, ScenarioConfig};
use crate::scheduler::{group_terminals, jopdt, solve_fixed, Assignment, GroupingKind, GroupingStrategy, JopdtOptions, P5Context};
use crate::solver::{PowerProblem, SolveResult, SolverOptions};

pub mod suite;

/// Best grid point of the beam-power feasible region.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub power: Vec<f64>,
    pub t: f64,
    /// Grid points visited over both passes.
    pub visited: usize,
    /// Points whose objective had to be solved exactly.
    pub evaluated: usize,
}

/// Exhaustive search of `min_b f_b(P)` over a grid of the feasible region
/// `{P : Σ P_b ≤ P_tot, P_b ≤ P_max}`.
///
/// A first pass puts `resolution` evenly spaced powers on each axis up to
/// the axis cap. A second pass lays a grid of the same size over the four
/// coarse cells around the best point, which resolves optima sitting at
/// small beam powers. In both passes the last beam also tries the largest
/// power the others leave room for, so the boundary of the region is always
/// sampled. A point is solved exactly only if every beam clears the current
/// best OCTR, which is checked from the slot power equations directly.
pub fn oracle_grid_search(problem: &PowerProblem, resolution: usize, tol: f64) -> Result<GridOptimum> {
    let b = problem.num_beams();
    if b > 3 {
        return Err(Error::DimensionTooLarge(b));
    }
    if resolution < 100 {
        return Err(Error::Config(format!("grid resolution {resolution} is below 100 points per axis")));
    }
    let cap = problem.per_beam_power.min(problem.total_power);
    let step = cap / resolution as f64;
    let mut best = GridOptimum {
        power: Vec::new(),
        t: f64::NEG_INFINITY,
        visited: 0,
        evaluated: 0,
    };
    let coarse: Vec<Vec<f64>> = vec![(1..=resolution).map(|i| i as f64 * step).collect(); b];
    grid_pass(problem, &coarse, tol, &mut Vec::with_capacity(b), &mut best)?;

    let fine: Vec<Vec<f64>> = best
        .power
        .iter()
        .map(|&p| {
            let lo = (p - 2.0 * step).max(0.0);
            let hi = (p + 2.0 * step).min(cap);
            (1..=resolution)
                .map(|i| lo + (hi - lo) * i as f64 / resolution as f64)
                .collect()
        })
        .collect();
    grid_pass(problem, &fine, tol, &mut Vec::with_capacity(b), &mut best)?;
    Ok(best)
}

fn grid_pass(
    problem: &PowerProblem,
    axes: &[Vec<f64>],
    tol: f64,
    prefix: &mut Vec<f64>,
    best: &mut GridOptimum,
) -> Result<()> {
    let b = problem.num_beams();
    let axis = &axes[prefix.len()];
    let room = problem.total_power - prefix.iter().sum::<f64>();
    let limit = problem.per_beam_power.min(room);
    if limit <= 0.0 {
        return Ok(());
    }
    let mut values: Vec<f64> = axis.iter().copied().filter(|&p| p <= limit).collect();
    let inside = axis.first().is_some_and(|&lo| lo <= limit) && axis.last().is_some_and(|&hi| hi >= limit);
    if prefix.len() + 1 == b && inside && values.last() != Some(&limit) {
        values.push(limit);
    }
    for p in values {
        prefix.push(p);
        if prefix.len() == b {
            best.visited += 1;
            if (0..b).all(|j| problem.beam_exceeds(j, prefix, best.t.max(0.0))) {
                let t = problem.min_octr(prefix, tol)?;
                best.evaluated += 1;
                if t > best.t {
                    best.t = t;
                    best.power = prefix.clone();
                }
            }
        } else {
            grid_pass(problem, axes, tol, prefix, best)?;
        }
        prefix.pop();
    }
    Ok(())
}

/// Largest beam size the assignment oracle accepts.
pub const ORACLE_TERMINAL_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentOptimum {
    /// Terminal ids per slot.
    pub slots: Vec<Vec<usize>>,
    pub t: f64,
    pub visited: usize,
}

/// Exact optimum of one beam's layout problem by plain enumeration: every
/// layout is solved from scratch, nothing is cached or pruned.
pub fn oracle_enumerate_assignments(ctx: &P5Context) -> Result<AssignmentOptimum> {
    let n = ctx.terminals.len();
    if n > ORACLE_TERMINAL_CAP {
        return Err(Error::EnumerationTooLarge {
            terminals: n,
            cap: ORACLE_TERMINAL_CAP,
        });
    }
    let c = ctx.num_slots();
    if n < c || n > c * ctx.max_per_slot {
        return Err(Error::InfeasibleAssignment(format!("{n} terminals cannot fill {c} slots")));
    }
    let mut layout = vec![Vec::new(); c];
    let mut best = AssignmentOptimum {
        slots: Vec::new(),
        t: f64::NEG_INFINITY,
        visited: 0,
    };
    enumerate_plain(ctx, 0, &mut layout, &mut best)?;
    Ok(best)
}

fn enumerate_plain(ctx: &P5Context, i: usize, layout: &mut Vec<Vec<usize>>, best: &mut AssignmentOptimum) -> Result<()> {
    if i == ctx.terminals.len() {
        if layout.iter().all(|s| !s.is_empty()) {
            best.visited += 1;
            let t = layout
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    let pos: Vec<usize> = s.iter().map(|id| ctx.terminals.iter().position(|k| k == id).unwrap()).collect();
                    ctx.slot_t(c, &pos)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if t > best.t {
                best.t = t;
                best.slots = layout.clone();
            }
        }
        return Ok(());
    }
    for c in 0..layout.len() {
        if layout[c].len() < ctx.max_per_slot {
            layout[c].push(ctx.terminals[i]);
            enumerate_plain(ctx, i + 1, layout, best)?;
            layout[c].pop();
        }
    }
    Ok(())
}

/// Scheme and assignment algorithm of one experiment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    NomaJopd,
    NomaJopdt,
    Oma,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::NomaJopd => "noma-jopd",
            Self::NomaJopdt => "noma-jopdt",
            Self::Oma => "oma",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::NomaJopd, Self::NomaJopdt, Self::Oma]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunSpec {
    pub scheme: SchemeKind,
    pub strategy: GroupingKind,
    pub colors: usize,
}

impl RunSpec {
    pub fn new(scheme: SchemeKind, strategy: GroupingKind, colors: usize) -> Self {
        Self { scheme, strategy, colors }
    }

    pub fn label(&self) -> String {
        format!("{}+{}/{}c", self.scheme.name(), self.strategy.name(), self.colors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub template: ScenarioConfig,
    pub instances: usize,
    pub base_seed: u64,
    pub runs: Vec<RunSpec>,
    pub solver: SolverOptions,
    pub outer_iterations: usize,
}

impl ExperimentConfig {
    /// The arms needed for the scheme and grouping comparisons at one reuse factor.
    pub fn comparison_runs(colors: usize) -> Vec<RunSpec> {
        let mut runs = vec![
            RunSpec::new(SchemeKind::NomaJopd, GroupingKind::MaxCC, colors),
            RunSpec::new(SchemeKind::NomaJopdt, GroupingKind::MaxCC, colors),
            RunSpec::new(SchemeKind::Oma, GroupingKind::MaxCC, colors),
        ];
        for g in [GroupingKind::MaxPi, GroupingKind::MinPi, GroupingKind::Random] {
            runs.push(RunSpec::new(SchemeKind::NomaJopd, g, colors));
        }
        runs
    }

    pub fn new(template: ScenarioConfig, instances: usize, runs: Vec<RunSpec>) -> Self {
        Self {
            base_seed: template.rng_seed,
            template,
            instances,
            runs,
            solver: SolverOptions::default(),
            outer_iterations: 5,
        }
    }

    pub fn instance_seed(&self, instance: usize) -> u64 {
        self.base_seed.wrapping_add(instance as u64)
    }
}

/// SHA-256 of every candidate channel and demand of a scenario.
pub fn channel_hash(scenario: &Scenario) -> String {
    let mut h = Sha256::new();
    for pool in &scenario.candidates {
        for t in pool {
            for c in &t.channel.0 {
                h.update(c.re.to_le_bytes());
                h.update(c.im.to_le_bytes());
            }
            h.update(t.demand_bps.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// One solved arm of one instance.
#[derive(Debug, Clone)]
pub struct InstanceRun {
    pub run: RunSpec,
    pub scenario: Scenario,
    pub assignment: Assignment,
    pub result: SolveResult,
    pub wall_time_s: f64,
}

fn grouping_seed(seed: u64, kind: GroupingKind) -> u64 {
    let tag = match kind {
        GroupingKind::MaxCC => 1,
        GroupingKind::MaxPi => 2,
        GroupingKind::MinPi => 3,
        GroupingKind::Random => 4,
    };
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
}

/// Generates instance `instance` and solves every arm on the same channels.
pub fn run_instance(config: &ExperimentConfig, instance: usize) -> Result<Vec<InstanceRun>> {
    let wrap = |e: Error| Error::Instance {
        instance,
        source: Box::new(e),
    };
    let mut template = config.template.clone();
    template.rng_seed = config.instance_seed(instance);
    let base = Scenario::generate(&template).map_err(wrap)?;
    let mut groupings: BTreeMap<GroupingKind, Assignment> = BTreeMap::new();
    config
        .runs
        .iter()
        .map(|run| {
            let scenario = base.with_colors(run.colors)?;
            let assignment = match groupings.get(&run.strategy) {
                Some(a) => a.clone(),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(grouping_seed(template.rng_seed, run.strategy));
                    let a = group_terminals(&scenario, &GroupingStrategy::new(run.strategy), &mut rng)?;
                    groupings.insert(run.strategy, a.clone());
                    a
                }
            };
            let start = Instant::now();
            let result = match run.scheme {
                SchemeKind::NomaJopd => solve_fixed(&scenario, &assignment, AccessScheme::Noma, &config.solver)?,
                SchemeKind::Oma => solve_fixed(&scenario, &assignment, AccessScheme::Oma, &config.solver)?,
                SchemeKind::NomaJopdt => jopdt(
                    &scenario,
                    &assignment,
                    &JopdtOptions {
                        solver: config.solver.clone(),
                        outer_iterations: config.outer_iterations,
                        ..Default::default()
                    },
                )?,
            };
            Ok(InstanceRun {
                run: *run,
                scenario,
                assignment,
                result,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(wrap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: usize,
    pub seed: u64,
    pub run: RunSpec,
    pub min_octr: f64,
    pub mean_octr: f64,
    /// Ordered by (beam, terminal).
    pub octrs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_pass: bool,
    pub wall_time_s: f64,
    pub channel_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub label: String,
    pub run: RunSpec,
    pub count: usize,
    pub mean_min_octr: f64,
    pub std_min_octr: f64,
    pub mean_mean_octr: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseGain {
    pub better: String,
    pub baseline: String,
    /// `100 (mean_a / mean_b − 1)` over the mean min-OCTR.
    pub mean_gain_pct: f64,
    /// Share of instances on which the first arm has the larger min-OCTR.
    pub win_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<InstanceRecord>,
    pub aggregates: Vec<Aggregate>,
    pub gains: Vec<PairwiseGain>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl ExperimentReport {
    /// Builds aggregates and pairwise gains from per-instance records.
    pub fn from_records(config: ExperimentConfig, records: Vec<InstanceRecord>) -> Self {
        let aggregates: Vec<Aggregate> = config
            .runs
            .iter()
            .map(|run| {
                let rs: Vec<&InstanceRecord> = records.iter().filter(|r| r.run == *run).collect();
                let mins: Vec<f64> = rs.iter().map(|r| r.min_octr).collect();
                let (mean_min_octr, std_min_octr) = mean_std(&mins);
                let means: Vec<f64> = rs.iter().map(|r| r.mean_octr).collect();
                let its: Vec<f64> = rs.iter().map(|r| r.iterations as f64).collect();
                Aggregate {
                    label: run.label(),
                    run: *run,
                    count: rs.len(),
                    mean_min_octr,
                    std_min_octr,
                    mean_mean_octr: mean_std(&means).0,
                    mean_iterations: mean_std(&its).0,
                }
            })
            .collect();

        let mut gains = Vec::new();
        let mut colors: Vec<usize> = config.runs.iter().map(|r| r.colors).collect();
        colors.sort_unstable();
        colors.dedup();
        for c in colors {
            let base = RunSpec::new(SchemeKind::NomaJopd, GroupingKind::MaxCC, c);
            let mut pairs = vec![
                (base, RunSpec::new(SchemeKind::Oma, GroupingKind::MaxCC, c)),
                (RunSpec::new(SchemeKind::NomaJopdt, GroupingKind::MaxCC, c), base),
            ];
            for g in [GroupingKind::MaxPi, GroupingKind::MinPi, GroupingKind::Random] {
                pairs.push((base, RunSpec::new(SchemeKind::NomaJopd, g, c)));
            }
            for (a, b) in pairs {
                if let Some(g) = pairwise_gain(&records, a, b) {
                    gains.push(g);
                }
            }
        }
        Self {
            config,
            records,
            aggregates,
            gains,
        }
    }

    pub fn aggregate(&self, run: RunSpec) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.run == run)
    }

    pub fn gain(&self, better: RunSpec, baseline: RunSpec) -> Option<&PairwiseGain> {
        let (a, b) = (better.label(), baseline.label());
        self.gains.iter().find(|g| g.better == a && g.baseline == b)
    }

    /// SHA-256 of the records with wall times removed; stable for a fixed seed.
    pub fn digest(&self) -> String {
        let mut records = self.records.clone();
        for r in &mut records {
            r.wall_time_s = 0.0;
        }
        let doc = serde_json::to_vec(&records).expect("records serialize");
        hex::encode(Sha256::digest(&doc))
    }
}

fn pairwise_gain(records: &[InstanceRecord], a: RunSpec, b: RunSpec) -> Option<PairwiseGain> {
    let by_instance = |run: RunSpec| -> BTreeMap<usize, f64> {
        records.iter().filter(|r| r.run == run).map(|r| (r.instance, r.min_octr)).collect()
    };
    let (ma, mb) = (by_instance(a), by_instance(b));
    let common: Vec<(f64, f64)> = ma.iter().filter_map(|(i, x)| mb.get(i).map(|y| (*x, *y))).collect();
    if common.is_empty() {
        return None;
    }
    let n = common.len() as f64;
    let mean_a = common.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = common.iter().map(|p| p.1).sum::<f64>() / n;
    Some(PairwiseGain {
        better: a.label(),
        baseline: b.label(),
        mean_gain_pct: 100.0 * (mean_a / mean_b - 1.0),
        win_fraction: common.iter().filter(|p| p.0 > p.1).count() as f64 / n,
    })
}

pub(crate) fn record(instance: usize, seed: u64, r: &InstanceRun) -> InstanceRecord {
    InstanceRecord {
        instance,
        seed,
        run: r.run,
        min_octr: r.result.min_octr,
        mean_octr: r.result.mean_octr(),
        octrs: r.result.terminal_octrs().into_iter().map(|x| x.2).collect(),
        iterations: r.result.iterations,
        converged: r.result.converged,
        kkt_pass: r.result.kkt.pass,
        wall_time_s: r.wall_time_s,
        channel_hash: channel_hash(&r.scenario),
    }
}

/// Runs every arm on every instance; instances run in parallel.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let per_instance = (0..config.instances)
        .into_par_iter()
        .map(|i| {
            let runs = run_instance(config, i)?;
            let records: Vec<InstanceRecord> = runs.iter().map(|r| record(i, config.instance_seed(i), r)).collect();
            if records.windows(2).any(|w| w[0].channel_hash != w[1].channel_hash) {
                return Err(Error::Instance {
                    instance: i,
                    source: Box::new(Error::InvalidScenario("arms saw different channel realizations".into())),
                });
            }
            Ok(records)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::from_records(
        config.clone(),
        per_instance.into_iter().flatten().collect(),
    ))
}

/// Mean demands of the sweep, Gbps.
pub const SWEEP_MEANS_GBPS: [f64; 7] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5];

/// Template with demands drawn uniformly in `[0.5 m, 1.5 m]` for mean `m`.
pub fn with_mean_demand(template: &ScenarioConfig, mean_bps: f64) -> ScenarioConfig {
    let mut t = template.clone();
    t.traffic.demand_min_bps = 0.5 * mean_bps;
    t.traffic.demand_max_bps = 1.5 * mean_bps;
    t
}

/// Max-min OCTR against mean traffic demand.
pub fn demand_sweep(config: &ExperimentConfig, means_gbps: &[f64]) -> Result<Vec<(f64, ExperimentReport)>> {
    means_gbps
        .iter()
        .map(|&m| {
            let mut c = config.clone();
            c.template = with_mean_demand(&config.template, m * 1e9);
            Ok((m, run_experiment(&c)?))
        })
        .collect()
}

pub fn sweep_csv(sweep: &[(f64, ExperimentReport)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mean_demand_gbps", "label", "scheme", "strategy", "colors", "mean_min_octr", "std_min_octr", "mean_mean_octr"])?;
    for (m, report) in sweep {
        for a in &report.aggregates {
            w.write_record([
                m.to_string(),
                a.label.clone(),
                a.run.scheme.name().into(),
                a.run.strategy.name().into(),
                a.run.colors.to_string(),
                a.mean_min_octr.to_string(),
                a.std_min_octr.to_string(),
                a.mean_mean_octr.to_string(),
            ])?;
        }
    }
    into_string(w)
}

/// Per-arm means and pairwise gains as plot data.
pub fn comparison_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "label", "baseline", "value", "std", "win_fraction"])?;
    for a in &report.aggregates {
        w.write_record([
            "mean_min_octr",
            &a.label,
            "",
            &a.mean_min_octr.to_string(),
            &a.std_min_octr.to_string(),
            "",
        ])?;
    }
    for g in &report.gains {
        w.write_record([
            "gain_pct",
            &g.better,
            &g.baseline,
            &g.mean_gain_pct.to_string(),
            "",
            &g.win_fraction.to_string(),
        ])?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Stable column order of the record CSV.
pub const RECORD_COLUMNS: [&str; 12] = [
    "instance",
    "seed",
    "scheme",
    "strategy",
    "colors",
    "min_octr",
    "mean_octr",
    "iterations",
    "converged",
    "kkt_pass",
    "wall_time_s",
    "channel_hash",
];

pub fn records_csv(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_COLUMNS)?;
    for r in &report.records {
        w.write_record([
            r.instance.to_string(),
            r.seed.to_string(),
            r.run.scheme.name().into(),
            r.run.strategy.name().into(),
            r.run.colors.to_string(),
            format!("{:.17e}", r.min_octr),
            format!("{:.17e}", r.mean_octr),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.kkt_pass.to_string(),
            r.wall_time_s.to_string(),
            r.channel_hash.clone(),
        ])?;
    }
    into_string(w)
}

pub fn export_results(report: &ExperimentReport, format: ExportFormat, path: &Path) -> Result<()> {
    let doc = match format {
        ExportFormat::Json => serde_json::to_string_pretty(report)?,
        ExportFormat::Csv => records_csv(report)?,
    };
    std::fs::write(path, doc)?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_template() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.system.num_beams = 2;
        c.system.num_slots = 2;
        c.system.terminals_per_beam = 8;
        c
    }

    fn tiny_config(instances: usize) -> ExperimentConfig {
        ExperimentConfig::new(
            tiny_template(),
            instances,
            vec![
                RunSpec::new(SchemeKind::NomaJopd, GroupingKind::MaxCC, 1),
                RunSpec::new(SchemeKind::Oma, GroupingKind::MaxCC, 1),
            ],
        )
    }

    #[test]
    fn records_and_aggregates() {
        let report = run_experiment(&tiny_config(2)).unwrap();
        assert_eq!(report.records.len(), 4);
        for run in &report.config.runs {
            let mins: Vec<f64> = report.records.iter().filter(|r| r.run == *run).map(|r| r.min_octr).collect();
            let agg = report.aggregate(*run).unwrap();
            assert_eq!(agg.count, 2);
            assert_relative_eq!(agg.mean_min_octr, (mins[0] + mins[1]) / 2.0, max_relative = 1e-15);
            assert_relative_eq!(agg.std_min_octr, (mins[0] - mins[1]).abs() / 2f64.sqrt(), max_relative = 1e-12);
        }
        for i in 0..2 {
            let hashes: Vec<&String> = report.records.iter().filter(|r| r.instance == i).map(|r| &r.channel_hash).collect();
            assert!(hashes.windows(2).all(|w| w[0] == w[1]));
        }
        assert_eq!(report.gains.len(), 1);
    }

    #[test]
    fn same_seed_same_report() {
        let a = run_experiment(&tiny_config(2)).unwrap();
        let b = run_experiment(&tiny_config(2)).unwrap();
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn instance_errors_carry_the_index() {
        let mut cfg = tiny_config(1);
        cfg.template.system.max_per_slot = 3;
        cfg.template.system.terminals_per_beam = 9;
        match run_experiment(&cfg) {
            Err(Error::Instance { instance: 0, source }) => assert!(matches!(*source, Error::OmaPairing(3))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&tiny_config(1)).unwrap();
        let json = dir.path().join("r.json");
        export_results(&report, ExportFormat::Json, &json).unwrap();
        assert_eq!(load_report(&json).unwrap(), report);
        let csv = dir.path().join("r.csv");
        export_results(&report, ExportFormat::Csv, &csv).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), report.records.len() + 1);
        assert_eq!(text.lines().next().unwrap(), RECORD_COLUMNS.join(","));
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let report = ExperimentReport::from_records(tiny_config(0), Vec::new());
        let csv = dir.path().join("e.csv");
        export_results(&report, ExportFormat::Csv, &csv).unwrap();
        assert_eq!(std::fs::read_to_string(&csv).unwrap(), RECORD_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn unwritable_path_fails() {
        let report = ExperimentReport::from_records(tiny_config(0), Vec::new());
        let bad = Path::new("/nonexistent-dir/for/sure/report.json");
        assert!(matches!(export_results(&report, ExportFormat::Json, bad), Err(Error::Io(_))));
    }

    #[test]
    fn sweep_demand_range() {
        let t = with_mean_demand(&ScenarioConfig::default(), 2e9);
        assert_eq!(t.traffic.demand_min_bps, 1e9);
        assert_eq!(t.traffic.demand_max_bps, 3e9);
    }
}
