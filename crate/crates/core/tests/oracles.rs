mod common;

use approx::assert_relative_eq;
use noma_octr::harness::{oracle_enumerate_assignments, oracle_grid_search};
use noma_octr::noma::AccessScheme;
use noma_octr::precoder::slot_precoders;
use noma_octr::scheduler::{solve_p5, Assignment, P5Context, P5Method, ENUMERATION_CAP};
use noma_octr::solver::{jopd, PowerProblem, SolverOptions};
use noma_octr::{Error, Scenario};

fn solved(s: &Scenario, a: &Assignment) -> (PowerProblem, f64, Vec<f64>) {
    let p = slot_precoders(s, a).unwrap();
    let r = jopd(s, a, &p, &SolverOptions::default()).unwrap();
    (PowerProblem::new(s, a, &p, AccessScheme::Noma).unwrap(), r.min_octr, r.beam_power)
}

#[test]
fn single_beam_optimum_uses_all_power() {
    let s = common::custom(1, 2, vec![vec![(vec![2e-5], 3e8), (vec![6e-6], 1e8)]]);
    let a = Assignment::new(vec![vec![vec![0, 1]]]);
    let (pr, t, _) = solved(&s, &a);
    let g = oracle_grid_search(&pr, 100, 0.0).unwrap();
    assert_eq!(g.power, vec![s.per_beam_power.min(s.total_power)]);
    assert_relative_eq!(g.t, t, max_relative = 1e-12);
}

#[test]
fn symmetric_optimum_sits_on_the_diagonal() {
    let s = common::custom(
        1,
        2,
        vec![
            vec![(vec![1.0e-5, 2e-6], 2e8), (vec![5e-6, 1e-6], 1e8)],
            vec![(vec![2e-6, 1.0e-5], 2e8), (vec![1e-6, 5e-6], 1e8)],
        ],
    );
    let a = Assignment::new(vec![vec![vec![0, 1]], vec![vec![0, 1]]]);
    let (pr, t, p) = solved(&s, &a);
    let g = oracle_grid_search(&pr, 200, 0.0).unwrap();
    assert_eq!(g.power[0], g.power[1]);
    assert_relative_eq!(p[0], p[1], max_relative = 1e-9);
    assert!(g.t <= t * (1.0 + 1e-12));
    assert_relative_eq!(g.t, t, max_relative = 1e-4);
}

#[test]
fn pruned_grid_matches_plain_scan() {
    let mut c = common::config(2, 1, 2, 2);
    c.system.p_tot_watts = 180.0;
    for seed in 0..3 {
        c.rng_seed = seed;
        let s = Scenario::generate(&c).unwrap();
        let a = common::maxcc(&s, seed);
        let (pr, _, _) = solved(&s, &a);
        let res = 100;
        let cap = s.per_beam_power.min(s.total_power);
        let axis: Vec<f64> = (1..=res).map(|i| cap * i as f64 / res as f64).collect();
        let mut best = f64::NEG_INFINITY;
        for &x in &axis {
            let mut ys: Vec<f64> = axis.iter().copied().filter(|&y| x + y <= s.total_power).collect();
            let limit = (s.total_power - x).min(s.per_beam_power);
            if ys.last() != Some(&limit) {
                ys.push(limit);
            }
            for y in ys {
                best = best.max(pr.min_octr(&[x, y], 0.0).unwrap());
            }
        }
        let g = oracle_grid_search(&pr, res, 0.0).unwrap();
        // The second pass can only improve on the coarse grid.
        assert!(g.t >= best);
        assert!(g.evaluated < g.visited / 10);
    }
}

#[test]
fn grid_rejects_large_or_coarse_problems() {
    let (s, a) = common::default_instance(1);
    let s5 = Scenario::generate(&common::config(5, 1, 2, 2)).unwrap();
    let a5 = common::maxcc(&s5, 0);
    let (pr5, _, _) = solved(&s5, &a5);
    assert!(matches!(oracle_grid_search(&pr5, 100, 0.0), Err(Error::DimensionTooLarge(5))));
    let (pr, _, _) = solved(&s, &a);
    assert!(oracle_grid_search(&pr, 99, 0.0).is_err());
}

#[test]
fn assignment_oracle_visits_every_labeled_layout() {
    let s = Scenario::generate(&common::config(2, 3, 2, 8)).unwrap();
    let a = common::maxcc(&s, 4);
    let (_, _, p) = solved(&s, &a);
    for b in 0..2 {
        let ctx = P5Context::new(&s, &a, &slot_precoders(&s, &a).unwrap(), b, &p, 0.0);
        let o = oracle_enumerate_assignments(&ctx).unwrap();
        assert_eq!(o.visited, 90);
        let ex = solve_p5(&ctx, &a.beams[b], P5Method::Enumerate, ENUMERATION_CAP).unwrap();
        assert_eq!(ex.t, o.t);
        assert!(o.slots.iter().all(|slot| !slot.is_empty() && slot.len() <= 2));
    }
}
