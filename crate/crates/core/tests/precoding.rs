mod common;

use noma_octr::precoder::{build_channel_matrix, slot_precoders};
use noma_octr::scheduler::Assignment;
use noma_octr::Error;

#[test]
fn single_beam_matrix_is_the_terminal_channel() {
    let s = common::custom(1, 1, vec![vec![(vec![3e-5], 1e8)]]);
    let a = Assignment::new(vec![vec![vec![0]]]);
    let h = build_channel_matrix(0, &a, &s).unwrap();
    assert_eq!(h.shape(), (1, 1));
    assert_eq!(h[(0, 0)].re, 3e-5);
}

#[test]
fn rows_follow_the_strongest_member() {
    let s = common::custom(
        1,
        2,
        vec![
            vec![(vec![1.0, 0.1], 1e8), (vec![2.0, 0.3], 1e8)],
            vec![(vec![0.2, 1.5], 1e8), (vec![0.1, 1.5], 1e8)],
        ],
    );
    let a = Assignment::new(vec![vec![vec![0, 1]], vec![vec![1, 0]]]);
    let h = build_channel_matrix(0, &a, &s).unwrap();
    assert_eq!((h[(0, 0)].re, h[(0, 1)].re), (2.0, 0.3));
    // Equal norms: the lower terminal index represents the beam.
    assert_eq!((h[(1, 0)].re, h[(1, 1)].re), (0.2, 1.5));
}

#[test]
fn empty_slot_has_no_representative() {
    let s = common::custom(2, 1, vec![vec![(vec![1.0], 1e8), (vec![1.0], 1e8)]]);
    let a = Assignment::new(vec![vec![vec![0], vec![]]]);
    assert!(matches!(build_channel_matrix(1, &a, &s), Err(Error::EmptySlot { beam: 0, slot: 1 })));
}

#[test]
fn feed_factors_never_exceed_one() {
    let (s, a) = common::default_instance(11);
    for p in slot_precoders(&s, &a).unwrap() {
        let peak = p.rho.iter().cloned().fold(0.0, f64::max);
        assert!(p.rho.iter().all(|r| *r > 0.0));
        assert!(peak <= 1.0 + 1e-10);
    }
}
