//! Per-slot NOMA physics.
//!
//! Terminals sharing a (beam, slot) are superposed in power. Each terminal's
//! effective gain `g` is its precoded channel gain over inter-beam
//! interference plus noise; SIC decodes in descending `g`, so terminal `k`
//! only suffers intra-beam interference from the terminals ahead of it.
//!
//! Rates are `B ln(1 + γ)` in nat/s throughout; demands are converted to the
//! same unit when a scenario is built.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precoder::PrecodingMatrix;
use crate::scenario::{ChannelVector, ReusePattern};

/// Multiple-access scheme inside a beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessScheme {
    /// Power-domain superposition with SIC over the full band.
    Noma,
    /// Each terminal of a pair on its own half of the band.
    Oma,
}

impl AccessScheme {
    /// Bandwidth occupied by one terminal of a group.
    pub fn terminal_bandwidth(self, bandwidth: f64) -> f64 {
        match self {
            AccessScheme::Noma => bandwidth,
            AccessScheme::Oma => bandwidth / 2.0,
        }
    }
}

/// Precoded gains `|hᴴ w_b'|²` seen by one terminal in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGains {
    /// Gain through its own beam's precoder.
    pub own: f64,
    /// Leakage from every other beam; zero for itself and for beams of
    /// another color.
    pub cross: Vec<f64>,
}

impl LinkGains {
    pub fn new(channel: &ChannelVector, beam: usize, precoder: &PrecodingMatrix, reuse: &ReusePattern) -> Self {
        let n = precoder.num_beams();
        let gain = |b: usize| channel.inner(&precoder.column(b)).norm_sqr();
        Self {
            own: gain(beam),
            cross: (0..n)
                .map(|b| if reuse.interferes(b, beam) { gain(b) } else { 0.0 })
                .collect(),
        }
    }

    /// Inter-beam interference for beam powers `p` and feed factors `rho`.
    pub fn interference(&self, beam_power: &[f64], rho: &[f64]) -> f64 {
        self.cross
            .iter()
            .zip(beam_power.iter().zip(rho))
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, (p, r))| a * p / r)
            .sum()
    }

    /// Effective gain `own / (Σ_b' cross_b' P_b'/ρ_b' + σ²)`.
    pub fn effective_gain(&self, beam_power: &[f64], rho: &[f64], noise_power: f64) -> f64 {
        self.own / (self.interference(beam_power, rho) + noise_power)
    }
}

/// Effective gain of a terminal in `beam` under precoder `precoder`.
pub fn effective_gain(
    channel: &ChannelVector,
    beam: usize,
    precoder: &PrecodingMatrix,
    beam_power: &[f64],
    noise_power: f64,
    reuse: &ReusePattern,
) -> f64 {
    LinkGains::new(channel, beam, precoder, reuse).effective_gain(beam_power, &precoder.rho, noise_power)
}

/// SIC decoding order of one (beam, slot) group.
///
/// `order` lists terminal ids strongest first. Equal gains put the lower id
/// first. `φ(k, l) = 1` means `k` cannot remove `l` before decoding itself,
/// i.e. `l` precedes `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingOrder {
    pub order: Vec<usize>,
}

impl DecodingOrder {
    pub fn from_gains(ids: &[usize], gains: &[f64]) -> Self {
        assert_eq!(ids.len(), gains.len());
        let mut idx: Vec<usize> = (0..ids.len()).collect();
        idx.sort_by(|&a, &b| {
            gains[b]
                .partial_cmp(&gains[a])
                .expect("finite gains")
                .then(ids[a].cmp(&ids[b]))
        });
        Self {
            order: idx.into_iter().map(|i| ids[i]).collect(),
        }
    }

    pub fn position(&self, id: usize) -> Option<usize> {
        self.order.iter().position(|&x| x == id)
    }

    pub fn phi(&self, k: usize, l: usize) -> bool {
        match (self.position(k), self.position(l)) {
            (Some(pk), Some(pl)) => pl < pk,
            _ => false,
        }
    }

    /// All `(k, l)` with `φ(k, l) = 1`.
    pub fn phi_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (pk, &k) in self.order.iter().enumerate() {
            for &l in &self.order[..pk] {
                out.push((k, l));
            }
        }
        out
    }
}

/// SINR of one terminal, evaluated term by term.
///
/// `group` holds `(id, power)` for every terminal of the same beam and slot;
/// `other_beam_power[b']` is `Σ_j p_b'jc`, the terminal-power sum of beam b'
/// in this slot.
pub fn sinr(
    id: usize,
    link: &LinkGains,
    group: &[(usize, f64)],
    order: &DecodingOrder,
    other_beam_power: &[f64],
    noise_power: f64,
) -> f64 {
    let own_power = group
        .iter()
        .find(|(k, _)| *k == id)
        .map(|&(_, p)| p)
        .expect("terminal belongs to the group");
    let intra: f64 = group
        .iter()
        .filter(|(l, _)| *l != id && order.phi(id, *l))
        .map(|&(_, p)| link.own * p)
        .sum();
    let inter: f64 = link
        .cross
        .iter()
        .zip(other_beam_power)
        .map(|(a, p)| a * p)
        .sum();
    link.own * own_power / (intra + inter + noise_power)
}

pub fn rate(sinr: f64, bandwidth: f64) -> f64 {
    bandwidth * sinr.ln_1p()
}

pub fn offered_capacity(slot_rates: &[f64]) -> f64 {
    slot_rates.iter().sum()
}

pub fn octr(capacity: f64, demand: f64) -> Result<f64> {
    if !(demand > 0.0) {
        return Err(Error::ZeroDemand(demand));
    }
    Ok(capacity / demand)
}

fn check_gains(gains: &[f64]) -> Result<()> {
    match gains.iter().find(|&&g| !(g > 0.0)) {
        Some(&g) => Err(Error::NonPositiveGain(g)),
        None => Ok(()),
    }
}

fn assert_descending(gains: &[f64]) {
    assert!(
        gains.windows(2).all(|w| w[0] >= w[1]),
        "gains must be sorted in decoding order: {gains:?}"
    );
}

/// Terminal powers that deliver `rates` under SIC, terminals strongest first.
///
/// `p_1 = (e^{R_1/B} − 1)/g_1`, `p_k = (e^{R_k/B} − 1)/g_k · (g_k Σ_{j<k} p_j + 1)`.
pub fn rates_to_powers(rates: &[f64], gains: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    check_gains(gains)?;
    let mut acc = 0.0;
    Ok(rates
        .iter()
        .zip(gains)
        .map(|(&r, &g)| {
            let p = (r / bandwidth).exp_m1() / g * (g * acc + 1.0);
            acc += p;
            p
        })
        .collect())
}

/// Per-terminal weights `E_k(t)` and `E_k'(t)` such that the power a group
/// needs at OCTR `t` is `ρ Σ_k E_k(t) / g_k`.
///
/// For NOMA `E_k = e^{t Σ_{j>k} D_j/B} (e^{t D_k/B} − 1)`, the telescoped
/// form of `Σ_k (1/g_k − 1/g_{k−1}) e^{t Σ_{j≥k} D_j/B} − 1/g_K`. For OMA each
/// terminal is alone on its sub-band: `E_k = e^{t D_k/B'} − 1`.
pub fn power_weights(scheme: AccessScheme, t: f64, demands: &[f64], bandwidth: f64) -> Vec<(f64, f64)> {
    match scheme {
        AccessScheme::Noma => {
            let n = demands.len();
            let mut out = vec![(0.0, 0.0); n];
            let mut tail = 0.0; // Σ_{j>k} D_j / B
            for k in (0..n).rev() {
                let a = demands[k] / bandwidth;
                let outer = (t * tail).exp();
                let inner = (t * a).exp_m1();
                let weight = outer * inner;
                let derivative = tail * weight + a * outer * (t * a).exp();
                out[k] = (weight, derivative);
                tail += a;
            }
            out
        }
        AccessScheme::Oma => {
            let b = scheme.terminal_bandwidth(bandwidth);
            demands
                .iter()
                .map(|&d| {
                    let a = d / b;
                    ((t * a).exp_m1(), a * (t * a).exp())
                })
                .collect()
        }
    }
}

/// Power a beam needs in one slot so that every terminal reaches OCTR `t`.
///
/// Terminals must be in decoding order (gains descending). The value is 0 at
/// `t = 0` and strictly increasing in `t`.
pub fn beam_power_required(t: f64, demands: &[f64], gains: &[f64], rho: f64, bandwidth: f64) -> f64 {
    required_power(AccessScheme::Noma, t, demands, gains, rho, bandwidth)
}

pub fn required_power(
    scheme: AccessScheme,
    t: f64,
    demands: &[f64],
    gains: &[f64],
    rho: f64,
    bandwidth: f64,
) -> f64 {
    if scheme == AccessScheme::Noma {
        assert_descending(gains);
    }
    rho * power_weights(scheme, t, demands, bandwidth)
        .iter()
        .zip(gains)
        .map(|((w, _), g)| w / g)
        .sum::<f64>()
}

/// `d required_power / dt`.
pub fn required_power_slope(
    scheme: AccessScheme,
    t: f64,
    demands: &[f64],
    gains: &[f64],
    rho: f64,
    bandwidth: f64,
) -> f64 {
    rho * power_weights(scheme, t, demands, bandwidth)
        .iter()
        .zip(gains)
        .map(|((_, d), g)| d / g)
        .sum::<f64>()
}

/// Terminal powers for a group at rates `rates` under either scheme.
pub fn scheme_powers(scheme: AccessScheme, rates: &[f64], gains: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    match scheme {
        AccessScheme::Noma => rates_to_powers(rates, gains, bandwidth),
        AccessScheme::Oma => {
            check_gains(gains)?;
            let b = scheme.terminal_bandwidth(bandwidth);
            Ok(rates
                .iter()
                .zip(gains)
                .map(|(&r, &g)| (r / b).exp_m1() / g)
                .collect())
        }
    }
}

/// Rates achieved by a group at given powers (inverse of [`scheme_powers`]).
pub fn scheme_rates(scheme: AccessScheme, powers: &[f64], gains: &[f64], bandwidth: f64) -> Vec<f64> {
    match scheme {
        AccessScheme::Noma => {
            let mut acc = 0.0;
            powers
                .iter()
                .zip(gains)
                .map(|(&p, &g)| {
                    let r = rate(g * p / (g * acc + 1.0), bandwidth);
                    acc += p;
                    r
                })
                .collect()
        }
        AccessScheme::Oma => powers
            .iter()
            .zip(gains)
            .map(|(&p, &g)| rate(g * p, scheme.terminal_bandwidth(bandwidth)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    fn link(own: f64, cross: Vec<f64>) -> LinkGains {
        LinkGains { own, cross }
    }

    #[test]
    fn effective_gain_single_beam() {
        let l = link(1.0, vec![0.0]);
        assert_eq!(l.effective_gain(&[5.0], &[1.0], 1.0), 1.0);
    }

    #[test]
    fn more_interference_lowers_gain() {
        let l = link(2.0, vec![0.0, 0.3, 0.1]);
        let g1 = l.effective_gain(&[1.0, 1.0, 2.0], &[0.5, 0.8, 0.9], 0.2);
        let g2 = l.effective_gain(&[1.0, 2.0, 4.0], &[0.5, 0.8, 0.9], 0.2);
        assert!(g2 < g1);
    }

    #[test]
    fn masked_terms_do_not_interfere() {
        use crate::precoder::mmse_precoder;
        use nalgebra::DMatrix;
        use num_complex::Complex64;
        let h = DMatrix::from_fn(4, 4, |i, j| Complex64::new(if i == j { 1.0 } else { 0.3 }, 0.1 * j as f64));
        let reuse = ReusePattern::grid(4, 4, 2).unwrap();
        let p = crate::precoder::reuse_precoder(&h, 0.5, &reuse).unwrap();
        let ch = ChannelVector(h.row(2).iter().map(|c| c.conj()).collect());
        let g_low = effective_gain(&ch, 2, &p, &[1.0; 4], 0.5, &reuse);
        let g_high = effective_gain(&ch, 2, &p, &[1e6, 1e6, 1.0, 1e6], 0.5, &reuse);
        let own = ch.inner(&p.column(2)).norm_sqr();
        assert_eq!(g_low, g_high);
        assert_relative_eq!(g_low, own / 0.5, max_relative = 1e-15);
        // Full reuse with the same channel does see the other beams.
        let full = ReusePattern::full_reuse(4);
        let pf = mmse_precoder(&h, 0.5).unwrap();
        let a = effective_gain(&ch, 2, &pf, &[1.0; 4], 0.5, &full);
        let b = effective_gain(&ch, 2, &pf, &[1e3, 1e3, 1.0, 1e3], 0.5, &full);
        assert!(b < a);
    }

    #[test]
    fn decoding_order_sorts_descending() {
        let o = DecodingOrder::from_gains(&[1, 2, 3], &[3.0, 1.0, 2.0]);
        assert_eq!(o.order, vec![1, 3, 2]);
        assert!(o.phi(2, 1) && o.phi(2, 3) && o.phi(3, 1));
        assert!(!o.phi(1, 2) && !o.phi(3, 2) && !o.phi(1, 3));
        let mut pairs = o.phi_pairs();
        pairs.sort();
        assert_eq!(pairs, vec![(2, 1), (2, 3), (3, 1)]);
    }

    #[test]
    fn decoding_order_ties_favor_lower_id() {
        let o = DecodingOrder::from_gains(&[7, 4], &[1.5, 1.5]);
        assert_eq!(o.order, vec![4, 7]);
        assert!(o.phi(7, 4));
        assert!(!o.phi(4, 7));
    }

    #[test]
    fn single_terminal_has_no_phi() {
        let o = DecodingOrder::from_gains(&[0], &[2.0]);
        assert!(o.phi_pairs().is_empty());
    }

    #[test]
    fn strongest_terminal_sees_no_intra_interference() {
        let l0 = link(4.0, vec![0.0, 0.0]);
        let o = DecodingOrder::from_gains(&[0, 1], &[4.0, 1.0]);
        let group = [(0, 2.0), (1, 5.0)];
        let g = sinr(0, &l0, &group, &o, &[0.0, 0.0], 0.5);
        assert_relative_eq!(g, 4.0 * 2.0 / 0.5, max_relative = 1e-15);
        // Zero-power interferer: interference-free ratio for the weak one too.
        let l1 = link(1.0, vec![0.0, 0.0]);
        let g = sinr(1, &l1, &[(0, 0.0), (1, 5.0)], &o, &[0.0, 0.0], 0.5);
        assert_relative_eq!(g, 10.0, max_relative = 1e-15);
    }

    #[test]
    fn rate_and_octr() {
        assert_relative_eq!(rate(E - 1.0, 1.0), 1.0, epsilon = 1e-15);
        assert_eq!(rate(0.0, 5e8), 0.0);
        assert_eq!(offered_capacity(&[0.5, 1.0]), 1.5);
        assert_eq!(octr(1.5, 3.0).unwrap(), 0.5);
        assert!(matches!(octr(1.0, 0.0), Err(Error::ZeroDemand(_))));
    }

    #[test]
    fn rates_to_powers_examples() {
        assert_eq!(rates_to_powers(&[0.0, 0.0], &[2.0, 1.0], 1.0).unwrap(), vec![0.0, 0.0]);
        let p = rates_to_powers(&[LN_2], &[1.0], 1.0).unwrap();
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-15);
        assert!(matches!(
            rates_to_powers(&[1.0, 1.0], &[1.0, 0.0], 1.0),
            Err(Error::NonPositiveGain(_))
        ));
    }

    #[test]
    fn required_power_examples() {
        assert_eq!(beam_power_required(0.0, &[1.0, 2.0], &[2.0, 1.0], 0.7, 1.0), 0.0);
        assert_relative_eq!(beam_power_required(LN_2, &[1.0], &[1.0], 1.0, 1.0), 1.0, epsilon = 1e-15);
        // x² + x − 8 = 0 with x = e^t, solved by hand: x = (√33 − 1)/2.
        let t = ((33f64.sqrt() - 1.0) / 2.0).ln();
        assert_relative_eq!(t, 0.8640, epsilon = 2e-4);
        assert_relative_eq!(
            beam_power_required(t, &[1.0, 1.0], &[2.0, 1.0], 1.0, 1.0),
            3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    #[should_panic(expected = "sorted")]
    fn required_power_rejects_unsorted_gains() {
        beam_power_required(1.0, &[1.0, 1.0], &[1.0, 2.0], 1.0, 1.0);
    }

    #[test]
    fn slope_matches_finite_difference() {
        for scheme in [AccessScheme::Noma, AccessScheme::Oma] {
            let (d, g) = ([0.8, 1.3, 0.4], [5.0, 2.0, 0.7]);
            let t = 0.9;
            let h = 1e-6;
            let fd = (required_power(scheme, t + h, &d, &g, 0.6, 2.0)
                - required_power(scheme, t - h, &d, &g, 0.6, 2.0))
                / (2.0 * h);
            let s = required_power_slope(scheme, t, &d, &g, 0.6, 2.0);
            assert_relative_eq!(s, fd, max_relative = 1e-8);
        }
    }

    #[test]
    fn oma_single_pair_closed_form() {
        // Each terminal on half the band: p_k = (e^{2 t D_k / B} − 1)/g_k.
        let p = required_power(AccessScheme::Oma, 0.5, &[1.0, 2.0], &[1.0, 4.0], 1.0, 2.0);
        assert_relative_eq!(p, 0.5f64.exp_m1() + 1f64.exp_m1() / 4.0, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn powers_rates_round_trip(
            k in 1usize..4,
            raw_g in proptest::collection::vec(0.01f64..100.0, 3),
            raw_r in proptest::collection::vec(0.0f64..5.0, 3),
        ) {
            let mut g = raw_g[..k].to_vec();
            g.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let r = &raw_r[..k];
            for scheme in [AccessScheme::Noma, AccessScheme::Oma] {
                let p = scheme_powers(scheme, r, &g, 1.5).unwrap();
                let back = scheme_rates(scheme, &p, &g, 1.5);
                for (a, b) in r.iter().zip(&back) {
                    prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
                }
                // And powers -> rates -> powers.
                let again = scheme_powers(scheme, &back, &g, 1.5).unwrap();
                for (a, b) in p.iter().zip(&again) {
                    prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
                }
            }
        }

        #[test]
        fn required_power_is_increasing(
            d in proptest::collection::vec(0.1f64..3.0, 1..4),
            raw_g in proptest::collection::vec(0.05f64..50.0, 3),
            t in 0.0f64..3.0,
        ) {
            let mut g = raw_g[..d.len()].to_vec();
            g.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let p0 = beam_power_required(t, &d, &g, 0.9, 1.0);
            let p1 = beam_power_required(t + 1e-3, &d, &g, 0.9, 1.0);
            prop_assert!(p1 > p0);
            prop_assert!(required_power_slope(AccessScheme::Noma, t, &d, &g, 0.9, 1.0) > 0.0);
        }

        #[test]
        fn decoding_order_is_a_total_order(g in proptest::collection::vec(0.0f64..10.0, 1..6)) {
            let ids: Vec<usize> = (0..g.len()).collect();
            let o = DecodingOrder::from_gains(&ids, &g);
            for &k in &ids {
                for &l in &ids {
                    if k != l {
                        prop_assert!(o.phi(k, l) ^ o.phi(l, k));
                        for &m in &ids {
                            if m != k && m != l && o.phi(k, l) && o.phi(l, m) {
                                prop_assert!(o.phi(k, m));
                            }
                        }
                        if g[l] > g[k] {
                            prop_assert!(o.phi(k, l));
                        }
                    }
                }
            }
        }
    }
}
