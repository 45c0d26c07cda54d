//! Regularized channel inversion (MMSE) precoding per timeslot.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{ReusePattern, Scenario};
use crate::scheduler::Assignment;

pub type CMatrix = DMatrix<Complex64>;

/// Condition number above which a channel matrix is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Column `b` of `w` is the precoding vector of beam `b`; row `i` is feed `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    pub w: CMatrix,
    /// Normalization factor of the color group serving each beam.
    pub beta: Vec<f64>,
    /// Power radiated by each feed per unit of beam power.
    pub rho: Vec<f64>,
}

impl PrecodingMatrix {
    pub fn num_beams(&self) -> usize {
        self.w.ncols()
    }

    pub fn column(&self, beam: usize) -> Vec<Complex64> {
        self.w.column(beam).iter().copied().collect()
    }
}

/// Channel matrix of one slot: row `b` is `hᴴ` of the strongest terminal
/// that beam `b` serves in `slot`. Equal norms resolve to the lowest index.
pub fn build_channel_matrix(slot: usize, assignment: &Assignment, scenario: &Scenario) -> Result<CMatrix> {
    let b = scenario.num_beams;
    let mut h = CMatrix::zeros(b, b);
    for beam in 0..b {
        let members = assignment.slot(beam, slot);
        let mut best: Option<(usize, f64)> = None;
        for &k in members {
            let n = scenario.terminal(beam, k).channel.norm();
            match best {
                Some((kb, nb)) if n < nb || (n == nb && k > kb) => {}
                _ => best = Some((k, n)),
            }
        }
        let (k, _) = best.ok_or(Error::EmptySlot { beam, slot })?;
        for (i, c) in scenario.terminal(beam, k).channel.0.iter().enumerate() {
            h[(beam, i)] = c.conj();
        }
    }
    Ok(h)
}

pub fn condition_number(h: &CMatrix) -> f64 {
    let sv = h.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// `W = β Hᴴ (H Hᴴ + σ² I)⁻¹` with `β² = 1 / max diag((Hᴴ H)⁻¹)`.
pub fn mmse_precoder(h: &CMatrix, noise_power: f64) -> Result<PrecodingMatrix> {
    let n = h.nrows();
    let condition = condition_number(h);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }

    // diag((Hᴴ H)⁻¹) = squared row norms of H⁻¹.
    let h_inv = h
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned { condition })?;
    let max_diag = h_inv
        .row_iter()
        .map(|r| r.iter().map(|x| x.norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    let beta = 1.0 / max_diag.sqrt();

    let gram = h * h.adjoint() + CMatrix::identity(n, n) * Complex64::from(noise_power);
    let chol = gram
        .cholesky()
        .ok_or(Error::IllConditioned { condition })?;
    // (H Hᴴ + σ² I)⁻¹ H, then adjoint, since the Gram matrix is Hermitian.
    let w = chol.solve(h).adjoint() * Complex64::from(beta);
    let rho = feed_radiation_factor(&w);
    Ok(PrecodingMatrix {
        w,
        beta: vec![beta; n],
        rho,
    })
}

/// `rho[b] = Σ_i |W[b, i]|²`, the diagonal of `W Wᴴ`.
pub fn feed_radiation_factor(w: &CMatrix) -> Vec<f64> {
    w.row_iter()
        .map(|r| r.iter().map(|x| x.norm_sqr()).sum())
        .collect()
}

/// Block-diagonal precoder: beams of one color share a band and are
/// precoded jointly over their own feeds; different colors never mix.
pub fn reuse_precoder(h: &CMatrix, noise_power: f64, reuse: &ReusePattern) -> Result<PrecodingMatrix> {
    let n = h.nrows();
    if reuse.num_colors == 1 {
        return mmse_precoder(h, noise_power);
    }
    let mut w = CMatrix::zeros(n, n);
    let mut beta = vec![0.0; n];
    for color in 0..reuse.num_colors {
        let group: Vec<usize> = (0..n).filter(|&b| reuse.color_of_beam[b] == color).collect();
        if group.is_empty() {
            continue;
        }
        let sub = h.select_rows(&group).select_columns(&group);
        let p = mmse_precoder(&sub, noise_power)?;
        for (gi, &i) in group.iter().enumerate() {
            beta[i] = p.beta[gi];
            for (gj, &j) in group.iter().enumerate() {
                w[(i, j)] = p.w[(gi, gj)];
            }
        }
    }
    let rho = feed_radiation_factor(&w);
    Ok(PrecodingMatrix { w, beta, rho })
}

/// Builds the precoder of every slot for an assignment.
pub fn slot_precoders(scenario: &Scenario, assignment: &Assignment) -> Result<Vec<PrecodingMatrix>> {
    (0..scenario.num_slots)
        .map(|c| {
            let h = build_channel_matrix(c, assignment, scenario)?;
            reuse_precoder(&h, scenario.noise_power, &scenario.reuse)
        })
        .collect()
}

/// JSON-friendly view of a precoder.
#[derive(Debug, Clone, Serialize)]
pub struct PrecoderDump {
    pub slot: usize,
    pub w_re: Vec<Vec<f64>>,
    pub w_im: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
}

impl PrecoderDump {
    pub fn new(slot: usize, p: &PrecodingMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| {
            p.w.row_iter()
                .map(|r| r.iter().map(f).collect())
                .collect()
        };
        Self {
            slot,
            w_re: rows(|c| c.re),
            w_im: rows(|c| c.im),
            beta: p.beta.clone(),
            rho: p.rho.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn max_diag_wwh(p: &PrecodingMatrix) -> f64 {
        (&p.w * p.w.adjoint())
            .diagonal()
            .iter()
            .map(|x| x.re)
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_channel() {
        // W = β/(1 + σ²) I with β = 1.
        let p = mmse_precoder(&CMatrix::identity(3, 3), 0.25).unwrap();
        assert_relative_eq!(p.beta[0], 1.0, epsilon = 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.8 } else { 0.0 };
                assert_relative_eq!(p.w[(i, j)].re, expect, epsilon = 1e-15);
                assert_relative_eq!(p.w[(i, j)].im, 0.0, epsilon = 1e-15);
            }
        }
        for r in &p.rho {
            assert_relative_eq!(*r, 0.64, epsilon = 1e-14);
        }
    }

    #[test]
    fn diagonal_channel_has_no_leakage() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0), c(1.0)]));
        let p = mmse_precoder(&h, 0.1).unwrap();
        assert_eq!(p.w[(0, 1)].norm(), 0.0);
        assert_eq!(p.w[(1, 0)].norm(), 0.0);
        let leak = (h.row(0) * p.w.column(1))[(0, 0)].norm();
        assert_eq!(leak, 0.0);
    }

    #[test]
    fn normalization_holds_and_saturates_without_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let h = random_matrix(4, &mut rng);
            let p = mmse_precoder(&h, 0.3).unwrap();
            assert!(max_diag_wwh(&p) <= 1.0 + 1e-12);
            // In the zero-forcing regime the tightest feed sits exactly at 1.
            let zf = mmse_precoder(&h, 1e-14).unwrap();
            assert_relative_eq!(max_diag_wwh(&zf), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn hermitian_solve_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let h = random_matrix(4, &mut rng);
            let s2 = 0.7;
            let p = mmse_precoder(&h, s2).unwrap();
            let lhs = &p.w * (&h * h.adjoint() + CMatrix::identity(4, 4) * c(s2));
            let rhs = h.adjoint() * c(p.beta[0]);
            assert!((lhs - &rhs).norm() <= 1e-9 * rhs.norm());
        }
    }

    #[test]
    fn large_noise_approaches_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_matrix(3, &mut rng);
        let s2 = 1e6 * h.norm_squared();
        let p = mmse_precoder(&h, s2).unwrap();
        let mf = h.adjoint();
        let cos = p.w.dotc(&mf).norm() / (p.w.norm() * mf.norm());
        assert!(cos > 1.0 - 1e-9, "direction cosine {cos}");
    }

    #[test]
    fn singular_channel_is_rejected() {
        let h = CMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(4.0)]);
        assert!(matches!(mmse_precoder(&h, 0.1), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn feed_factor_cross_check() {
        let w = CMatrix::identity(3, 3) * c(0.5);
        assert_eq!(feed_radiation_factor(&w), vec![0.25; 3]);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_matrix(4, &mut rng);
        let gram = &w * w.adjoint();
        for (b, r) in feed_radiation_factor(&w).iter().enumerate() {
            assert_relative_eq!(*r, gram[(b, b)].re, max_relative = 1e-13);
        }

        let mut z = random_matrix(3, &mut rng);
        z.row_mut(1).fill(c(0.0));
        assert_eq!(feed_radiation_factor(&z)[1], 0.0);
    }

    #[test]
    fn four_color_precoder_is_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_matrix(4, &mut rng);
        let reuse = ReusePattern::grid(4, 4, 2).unwrap();
        let p = reuse_precoder(&h, 0.2, &reuse).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(p.w[(i, j)].norm(), 0.0);
                }
            }
            let single = mmse_precoder(&CMatrix::from_element(1, 1, h[(i, i)]), 0.2).unwrap();
            assert_relative_eq!(p.w[(i, i)].re, single.w[(0, 0)].re, max_relative = 1e-14);
            assert_relative_eq!(p.w[(i, i)].im, single.w[(0, 0)].im, max_relative = 1e-14);
        }
    }
}
