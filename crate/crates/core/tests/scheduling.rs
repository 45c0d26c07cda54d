mod common;

use noma_octr::precoder::slot_precoders;
use noma_octr::scheduler::{group_terminals, solve_p5, GroupingKind, GroupingStrategy, P5Context, P5Method, ENUMERATION_CAP};
use noma_octr::solver::{jopd, SolverOptions};
use noma_octr::Scenario;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kind() -> impl Strategy<Value = GroupingKind> {
    prop::sample::select(GroupingKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn groupings_are_valid(seed in 0u64..1000, k in kind(), per_slot in 1usize..4) {
        let mut c = common::config(4, 3, per_slot, 3 * per_slot + 2);
        c.rng_seed = seed;
        let s = Scenario::generate(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = group_terminals(&s, &GroupingStrategy::new(k), &mut rng).unwrap();
        a.validate(&s).unwrap();
        for slots in &a.beams {
            prop_assert!(slots.iter().all(|slot| slot.len() == per_slot));
        }
    }

    #[test]
    fn layout_search_keeps_invariants_and_never_worsens(seed in 0u64..1000, local in any::<bool>()) {
        let mut c = common::config(3, 3, 2, 8);
        c.rng_seed = seed;
        let s = Scenario::generate(&c).unwrap();
        let a = common::maxcc(&s, seed);
        let p = slot_precoders(&s, &a).unwrap();
        let r = jopd(&s, &a, &p, &SolverOptions::default()).unwrap();
        let method = if local { P5Method::LocalSearch } else { P5Method::Enumerate };
        let mut next = a.clone();
        for b in 0..3 {
            let ctx = P5Context::new(&s, &a, &p, b, &r.beam_power, 0.0);
            let sol = solve_p5(&ctx, &a.beams[b], method, ENUMERATION_CAP).unwrap();
            prop_assert!(sol.t >= sol.incumbent_t);
            next.beams[b] = sol.slots;
        }
        next.validate(&s).unwrap();
        for b in 0..3 {
            prop_assert_eq!(next.selected(b), a.selected(b));
        }
    }

    #[test]
    fn layout_optimum_grows_with_scaled_power(seed in 0u64..1000, zeta in 1.05f64..10.0) {
        let mut c = common::config(2, 2, 2, 6);
        c.rng_seed = seed;
        let s = Scenario::generate(&c).unwrap();
        let a = common::maxcc(&s, seed);
        let p = slot_precoders(&s, &a).unwrap();
        let power = vec![0.3 * s.per_beam_power, 0.6 * s.per_beam_power];
        let scaled: Vec<f64> = power.iter().map(|x| x * zeta).collect();
        for b in 0..2 {
            let lo = solve_p5(&P5Context::new(&s, &a, &p, b, &power, 0.0), &a.beams[b], P5Method::Enumerate, ENUMERATION_CAP).unwrap();
            let hi = solve_p5(&P5Context::new(&s, &a, &p, b, &scaled, 0.0), &a.beams[b], P5Method::Enumerate, ENUMERATION_CAP).unwrap();
            prop_assert!(hi.t > lo.t);
        }
    }
}
