#![allow(dead_code)]

use noma_octr::scenario::ChannelVector;
use noma_octr::scheduler::{group_terminals, Assignment, GroupingKind, GroupingStrategy};
use noma_octr::{Scenario, ScenarioConfig};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn config(beams: usize, slots: usize, per_slot: usize, terminals: usize) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.system.num_beams = beams;
    c.system.num_slots = slots;
    c.system.max_per_slot = per_slot;
    c.system.terminals_per_beam = terminals;
    c
}

/// A generated scenario whose candidate channels and demands are replaced.
/// `terminals[b]` lists `(channel, demand_bps)` for beam `b`.
pub fn custom(slots: usize, per_slot: usize, terminals: Vec<Vec<(Vec<f64>, f64)>>) -> Scenario {
    let beams = terminals.len();
    let n = terminals[0].len();
    let mut s = Scenario::generate(&config(beams, slots, per_slot, n)).unwrap();
    for (b, list) in terminals.into_iter().enumerate() {
        for (k, (h, d)) in list.into_iter().enumerate() {
            let t = &mut s.candidates[b][k];
            t.channel = ChannelVector(h.into_iter().map(|x| Complex64::new(x, 0.0)).collect());
            t.demand_bps = d;
        }
    }
    s
}

pub fn maxcc(s: &Scenario, seed: u64) -> Assignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    group_terminals(s, &GroupingStrategy::new(GroupingKind::MaxCC), &mut rng).unwrap()
}

pub fn default_instance(seed: u64) -> (Scenario, Assignment) {
    let s = Scenario::generate(&ScenarioConfig {
        rng_seed: seed,
        ..Default::default()
    })
    .unwrap();
    let a = maxcc(&s, seed);
    (s, a)
}
