mod common;

use approx::assert_relative_eq;
use noma_octr::noma::AccessScheme;
use noma_octr::precoder::slot_precoders;
use noma_octr::scheduler::{jopdt, oma_baseline, Assignment, JopdtOptions};
use noma_octr::solver::{jopd, partial_derivatives, PowerProblem, SolverOptions};
use proptest::prelude::*;

fn problem(seed: u64, colors: usize) -> (PowerProblem, f64) {
    let (s, a) = common::default_instance(seed);
    let s = s.with_colors(colors).unwrap();
    let p = slot_precoders(&s, &a).unwrap();
    (PowerProblem::new(&s, &a, &p, AccessScheme::Noma).unwrap(), s.per_beam_power)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eta_is_monotone(seed in 0u64..20, raw in prop::collection::vec(0.02f64..1.0, 4), j in 0usize..4, step in 1.01f64..5.0) {
        let (pr, cap) = problem(seed, 1);
        let p: Vec<f64> = raw.iter().map(|x| x * cap).collect();
        let mut q = p.clone();
        q[j] *= step;
        for b in 0..4 {
            let eta_p = p[b] / pr.beam_octr(b, &p, 0.0).unwrap().t_star;
            let eta_q = q[b] / pr.beam_octr(b, &q, 0.0).unwrap().t_star;
            prop_assert!(eta_q >= eta_p * (1.0 - 1e-12));
        }
    }

    #[test]
    fn scaling_down_the_optimum_loses(seed in 0u64..30, zeta in 0.5f64..0.999) {
        let (s, a) = common::default_instance(seed);
        let r = jopd(&s, &a, &slot_precoders(&s, &a).unwrap(), &SolverOptions::default()).unwrap();
        let pr = PowerProblem::new(&s, &a, &slot_precoders(&s, &a).unwrap(), AccessScheme::Noma).unwrap();
        let scaled: Vec<f64> = r.beam_power.iter().map(|p| p * zeta).collect();
        prop_assert!(pr.min_octr(&scaled, 0.0).unwrap() < r.min_octr);
    }

    #[test]
    fn converged_power_is_feasible_and_tight(seed in 0u64..30) {
        let (s, a) = common::default_instance(seed);
        let r = jopd(&s, &a, &slot_precoders(&s, &a).unwrap(), &SolverOptions::default()).unwrap();
        let total: f64 = r.beam_power.iter().sum();
        let peak = r.beam_power.iter().cloned().fold(0.0, f64::max);
        prop_assert!(total <= s.total_power * (1.0 + 1e-12));
        prop_assert!(peak <= s.per_beam_power * (1.0 + 1e-12));
        prop_assert!(r.kkt.total_power_active || r.kkt.beam_cap_active.iter().any(|a| *a));
        prop_assert!(r.kkt.pass);
    }
}

#[test]
fn four_colors_decouple_the_beams() {
    let (pr, cap) = problem(3, 4);
    let p = vec![0.3 * cap, 0.5 * cap, 0.8 * cap, cap];
    for b in 0..4 {
        let d = partial_derivatives(&pr, &p, b, 0.0).unwrap();
        assert!(d.own > 0.0);
        for (j, c) in d.cross.iter().enumerate() {
            if j != b {
                assert_eq!(*c, 0.0);
            }
        }
    }
}

#[test]
fn no_outer_pass_reduces_to_jopd() {
    let (s, a) = common::default_instance(5);
    let options = JopdtOptions {
        outer_iterations: 0,
        ..Default::default()
    };
    let t = jopdt(&s, &a, &options).unwrap();
    let j = jopd(&s, &a, &slot_precoders(&s, &a).unwrap(), &options.solver).unwrap();
    assert_eq!(t.beam_power, j.beam_power);
    assert_eq!(t.min_octr, j.min_octr);
    assert!(t.outer_trace.is_empty());
}

#[test]
fn jopdt_never_loses_to_its_start() {
    let s = noma_octr::Scenario::generate(&common::config(2, 2, 2, 4)).unwrap();
    let a = common::maxcc(&s, 0);
    let j = jopd(&s, &a, &slot_precoders(&s, &a).unwrap(), &SolverOptions::default()).unwrap();
    let t = jopdt(&s, &a, &JopdtOptions::default()).unwrap();
    assert!(t.min_octr >= j.min_octr);
    assert_eq!(t.outer_trace.len(), 5);
    t.assignment.validate(&s).unwrap();
}

#[test]
fn oma_splits_identical_terminals_evenly() {
    let s = common::custom(1, 2, vec![vec![(vec![2e-5], 2e8), (vec![2e-5], 2e8)]]);
    let a = Assignment::new(vec![vec![vec![0, 1]]]);
    let r = oma_baseline(&s, &a, &SolverOptions::default()).unwrap();
    let slot = &r.beams[0].slots[0];
    assert_relative_eq!(slot.powers[0], slot.powers[1], max_relative = 1e-12);
    let octr: Vec<f64> = r.terminal_octrs().iter().map(|x| x.2).collect();
    assert_relative_eq!(octr[0], octr[1], max_relative = 1e-12);
    assert_relative_eq!(r.beam_power[0], s.per_beam_power.min(s.total_power), max_relative = 1e-12);
}

#[test]
fn noma_beats_oma_with_a_weak_partner() {
    let s = common::custom(1, 2, vec![vec![(vec![4e-5], 1e8), (vec![4e-6], 1e8)]]);
    let a = Assignment::new(vec![vec![vec![0, 1]]]);
    let noma = jopd(&s, &a, &slot_precoders(&s, &a).unwrap(), &SolverOptions::default()).unwrap();
    let oma = oma_baseline(&s, &a, &SolverOptions::default()).unwrap();
    assert!(noma.min_octr >= oma.min_octr);
}
