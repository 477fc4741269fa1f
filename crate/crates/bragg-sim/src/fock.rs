//! Truncated two-mode Fock-space states and passive linear mode maps.
//!
//! States are stored as complex amplitude grids over photon numbers
//! `(n1, n2)` with each index running to a truncation `n_max`. The linear
//! map applied by the frequency translator is photon-number conserving, so
//! it acts block-diagonally on subspaces of fixed `n1 + n2`. That makes the
//! transform exact (no truncation loss) as long as the input state has no
//! weight at total photon number above `n_max`.
//!
//! Phase convention: the mode operators evolve as
//! `a1(z) = mu a1(0) + nu a2(0)` and `a2(z) = -nu* a1(0) + mu* a2(0)`,
//! which on states sends `|1,0>` to `mu |1,0> - nu* |0,1>`. Global phases
//! are irrelevant to every counting observable derived from these states.

use num_complex::Complex64;

use crate::detector::DetectorSpec;
use crate::error::{Result, SimError};

const UNITARITY_TOL: f64 = 1e-12;

/// The (mu, nu) pair describing a two-mode passive linear transformation
/// with `|mu|^2 + |nu|^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub mu: Complex64,
    pub nu: Complex64,
}

impl TransferMatrix {
    pub fn new(mu: Complex64, nu: Complex64) -> Result<Self> {
        let norm = mu.norm_sqr() + nu.norm_sqr();
        if (norm - 1.0).abs() > UNITARITY_TOL {
            return Err(SimError::NonUnitaryMap(norm));
        }
        Ok(TransferMatrix { mu, nu })
    }

    pub fn identity() -> Self {
        TransferMatrix {
            mu: Complex64::new(1.0, 0.0),
            nu: Complex64::new(0.0, 0.0),
        }
    }

    /// The inverse transformation: applying `self` then `self.inverse()`
    /// restores any state.
    pub fn inverse(&self) -> Self {
        TransferMatrix {
            mu: self.mu.conj(),
            nu: -self.nu,
        }
    }

    /// Fraction of mode-1 input converted into mode 2, `|nu|^2`.
    pub fn conversion(&self) -> f64 {
        self.nu.norm_sqr()
    }

    pub fn unitarity_defect(&self) -> f64 {
        (self.mu.norm_sqr() + self.nu.norm_sqr() - 1.0).abs()
    }
}

/// The 2x2 matrix acting on the mode-operator vector (a1, a2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOperatorMap {
    pub m: [[Complex64; 2]; 2],
}

impl ModeOperatorMap {
    /// Builds the operator map `[[mu, nu], [-nu*, mu*]]` and checks
    /// unitarity to 1e-12.
    pub fn new(m: [[Complex64; 2]; 2]) -> Result<Self> {
        // columns orthonormal
        let c0 = m[0][0].norm_sqr() + m[1][0].norm_sqr();
        let c1 = m[0][1].norm_sqr() + m[1][1].norm_sqr();
        let cross = m[0][0].conj() * m[0][1] + m[1][0].conj() * m[1][1];
        let defect = (c0 - 1.0).abs().max((c1 - 1.0).abs()).max(cross.norm());
        if defect > UNITARITY_TOL {
            return Err(SimError::NonUnitaryMap(defect + 1.0));
        }
        Ok(ModeOperatorMap { m })
    }
}

impl From<&TransferMatrix> for ModeOperatorMap {
    fn from(t: &TransferMatrix) -> Self {
        ModeOperatorMap {
            m: [[t.mu, t.nu], [-t.nu.conj(), t.mu.conj()]],
        }
    }
}

/// A pure two-mode state on the truncated grid `0..=n_max` per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeFockState {
    amps: Vec<Complex64>,
    n_max: usize,
}

impl TwoModeFockState {
    /// Vacuum state |0,0>.
    pub fn vacuum(n_max: usize) -> Self {
        let dim = n_max + 1;
        let mut amps = vec![Complex64::default(); dim * dim];
        amps[0] = Complex64::new(1.0, 0.0);
        TwoModeFockState { amps, n_max }
    }

    /// Product Fock state |n1, n2>.
    pub fn product_fock(n1: usize, n2: usize, n_max: usize) -> Result<Self> {
        if n1 > n_max || n2 > n_max {
            return Err(SimError::InvalidParameter(format!(
                "Fock occupation ({n1},{n2}) exceeds truncation {n_max}"
            )));
        }
        let mut s = TwoModeFockState::vacuum(n_max);
        s.amps[0] = Complex64::default();
        let idx = s.index(n1, n2);
        s.amps[idx] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Builds a state from raw amplitudes (row-major over (n1, n2)),
    /// normalizing to unit total probability.
    pub fn from_amplitudes(amps: Vec<Complex64>, n_max: usize) -> Result<Self> {
        let dim = n_max + 1;
        if amps.len() != dim * dim {
            return Err(SimError::BadAmplitudeShape {
                got: amps.len(),
                expected: dim * dim,
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(SimError::ZeroNorm);
        }
        let scale = norm.sqrt();
        let amps = amps.into_iter().map(|a| a / scale).collect();
        Ok(TwoModeFockState { amps, n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn index(&self, n1: usize, n2: usize) -> usize {
        n1 * (self.n_max + 1) + n2
    }

    pub fn amplitude(&self, n1: usize, n2: usize) -> Complex64 {
        self.amps[self.index(n1, n2)]
    }

    pub fn probability(&self, n1: usize, n2: usize) -> f64 {
        self.amplitude(n1, n2).norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Distribution of the total photon number n1 + n2.
    pub fn total_number_distribution(&self) -> Vec<f64> {
        let mut dist = vec![0.0; 2 * self.n_max + 1];
        for n1 in 0..=self.n_max {
            for n2 in 0..=self.n_max {
                dist[n1 + n2] += self.probability(n1, n2);
            }
        }
        dist
    }

    /// Marginal photon-number distribution of mode 1 (signal).
    pub fn signal_marginal(&self) -> Vec<f64> {
        let mut dist = vec![0.0; self.n_max + 1];
        for n1 in 0..=self.n_max {
            for n2 in 0..=self.n_max {
                dist[n1] += self.probability(n1, n2);
            }
        }
        dist
    }

    /// Mean photon number in each mode.
    pub fn mean_photon_numbers(&self) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for n1 in 0..=self.n_max {
            for n2 in 0..=self.n_max {
                let p = self.probability(n1, n2);
                m1 += n1 as f64 * p;
                m2 += n2 as f64 * p;
            }
        }
        (m1, m2)
    }

    /// Probability mass sitting on the outermost layer max(n1, n2) = n_max.
    ///
    /// Constructors report this as the truncation-error proxy; validated
    /// regimes keep it below 1e-6.
    pub fn top_layer_probability(&self) -> f64 {
        let mut p = 0.0;
        for n in 0..=self.n_max {
            p += self.probability(self.n_max, n);
            if n != self.n_max {
                p += self.probability(n, self.n_max);
            }
        }
        p
    }

    /// Probability mass at total photon number above `n_max`, the region a
    /// number-conserving map cannot represent on this grid.
    fn overflow_weight(&self) -> f64 {
        let mut w = 0.0;
        for n1 in 0..=self.n_max {
            for n2 in 0..=self.n_max {
                if n1 + n2 > self.n_max {
                    w += self.probability(n1, n2);
                }
            }
        }
        w
    }
}

/// The pair-production state `sum_n eps^n |n, n>`, normalized on the
/// truncated grid.
///
/// The exact (untruncated) state leaks `eps^(2(n_max+1))` of its probability
/// beyond the grid; callers can bound that directly or query
/// [`TwoModeFockState::top_layer_probability`].
pub fn two_mode_squeezed_state(epsilon: f64, n_max: usize) -> Result<TwoModeFockState> {
    if !(0.0..1.0).contains(&epsilon) || !epsilon.is_finite() {
        return Err(SimError::InvalidEpsilon(epsilon));
    }
    let dim = n_max + 1;
    let mut amps = vec![Complex64::default(); dim * dim];
    let mut coeff = 1.0;
    for n in 0..=n_max {
        amps[n * dim + n] = Complex64::new(coeff, 0.0);
        coeff *= epsilon;
    }
    TwoModeFockState::from_amplitudes(amps, n_max)
}

/// Applies the number-conserving two-mode map induced by `map` to `state`.
///
/// Exact on each fixed total-photon block. Errors if the map is not unitary
/// or if the input has non-negligible weight at total photon number above
/// the truncation (where the conserved block would leave the grid).
pub fn apply_mode_map(state: &TwoModeFockState, map: &TransferMatrix) -> Result<TwoModeFockState> {
    let norm = map.mu.norm_sqr() + map.nu.norm_sqr();
    if (norm - 1.0).abs() > UNITARITY_TOL {
        return Err(SimError::NonUnitaryMap(norm));
    }
    let overflow = state.overflow_weight();
    if overflow > 1e-12 {
        return Err(SimError::TruncationOverflow { weight: overflow });
    }

    let n_max = state.n_max;
    let dim = n_max + 1;
    // sqrt-factorial table for amplitude weights
    let mut sqrt_fact = vec![1.0f64; dim];
    for k in 1..dim {
        sqrt_fact[k] = sqrt_fact[k - 1] * (k as f64).sqrt();
    }
    let binom = binomial_table(n_max);

    let mu = map.mu;
    let nu = map.nu;
    let mnu_conj = -nu.conj();
    let mu_conj = mu.conj();

    let mut out = vec![Complex64::default(); dim * dim];
    for n1 in 0..=n_max {
        for n2 in 0..=n_max.min(n_max.saturating_sub(n1)) {
            let c_in = state.amps[n1 * dim + n2];
            if c_in.norm_sqr() == 0.0 {
                continue;
            }
            let n = n1 + n2;
            // powers of the four matrix entries
            let mu_pow = powers(mu, n1);
            let mnu_pow = powers(mnu_conj, n1);
            let nu_pow = powers(nu, n2);
            let muc_pow = powers(mu_conj, n2);
            for m1 in 0..=n {
                let m2 = n - m1;
                let mut sum = Complex64::default();
                // a1_out^m1 collects j creations from the first factor and
                // k = m1 - j from the second
                let j_lo = m1.saturating_sub(n2);
                let j_hi = m1.min(n1);
                for j in j_lo..=j_hi {
                    let k = m1 - j;
                    sum += binom[n1][j] * binom[n2][k] * mu_pow[j] * mnu_pow[n1 - j] * nu_pow[k]
                        * muc_pow[n2 - k];
                }
                let weight = sqrt_fact[m1] * sqrt_fact[m2] / (sqrt_fact[n1] * sqrt_fact[n2]);
                out[m1 * dim + m2] += c_in * sum * weight;
            }
        }
    }
    Ok(TwoModeFockState {
        amps: out,
        n_max,
    })
}

fn powers(z: Complex64, up_to: usize) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(up_to + 1);
    v.push(Complex64::new(1.0, 0.0));
    for k in 1..=up_to {
        let prev = v[k - 1];
        v.push(prev * z);
    }
    v
}

fn binomial_table(n_max: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; n_max + 1]; n_max + 1];
    for n in 0..=n_max {
        t[n][0] = 1.0;
        for k in 1..=n {
            t[n][k] = t[n - 1][k - 1] + if k <= n - 1 { t[n - 1][k] } else { 0.0 };
        }
    }
    t
}

/// Conditional signal-mode distribution after a herald click on the idler.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedSignal {
    /// Normalized photon-number distribution of the signal mode given a click.
    pub distribution: Vec<f64>,
    /// Unconditional per-pulse herald click probability.
    pub click_probability: f64,
}

/// Conditions the signal mode (mode 1) on a click of a threshold detector
/// watching the idler mode (mode 2).
///
/// Click model: `P(click | n idler photons) = 1 - (1 - dark)(1 - eta)^n`.
/// All counting observables downstream are diagonal in photon number, so
/// conditioning the joint number distribution is exact here.
pub fn heralded_reduce(state: &TwoModeFockState, herald: &DetectorSpec) -> Result<HeraldedSignal> {
    herald.validate()?;
    let n_max = state.n_max;
    let mut joint_click = vec![0.0; n_max + 1];
    let mut click_probability = 0.0;
    for n1 in 0..=n_max {
        for n2 in 0..=n_max {
            let p = state.probability(n1, n2);
            if p == 0.0 {
                continue;
            }
            let pc = p * herald.click_probability(n2 as u32);
            joint_click[n1] += pc;
            click_probability += pc;
        }
    }
    if click_probability <= 0.0 {
        return Err(SimError::ZeroClickProbability);
    }
    for v in &mut joint_click {
        *v /= click_probability;
    }
    Ok(HeraldedSignal {
        distribution: joint_click,
        click_probability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tm(mu: Complex64, nu: Complex64) -> TransferMatrix {
        TransferMatrix::new(mu, nu).unwrap()
    }

    fn half_map() -> TransferMatrix {
        // delta = 0, |kappa| z = pi/4 gives the 50/50 map (1/sqrt2, i/sqrt2)
        let r = std::f64::consts::FRAC_1_SQRT_2;
        tm(Complex64::new(r, 0.0), Complex64::new(0.0, r))
    }

    /// Deterministic superposition spread over the triangle n1 + n2 <= n_max,
    /// where the conserved-block transform is exact.
    fn triangle_state(n_max: usize) -> TwoModeFockState {
        let dim = n_max + 1;
        let mut amps = vec![Complex64::default(); dim * dim];
        let mut phase = 0.3f64;
        for n1 in 0..=n_max {
            for n2 in 0..=(n_max - n1) {
                phase = (phase * 7.13 + 0.17) % std::f64::consts::TAU;
                let mag = 1.0 / (1.0 + (n1 + 2 * n2) as f64);
                amps[n1 * dim + n2] = Complex64::from_polar(mag, phase);
            }
        }
        TwoModeFockState::from_amplitudes(amps, n_max).unwrap()
    }

    #[test]
    fn one_photon_follows_transfer_phases() {
        // |1,0> -> mu |1,0> - nu* |0,1>
        let mu = Complex64::new(0.6, 0.3);
        let nu_mag = (1.0 - mu.norm_sqr()).sqrt();
        let nu = Complex64::from_polar(nu_mag, 0.7);
        let map = tm(mu, nu);
        let s = TwoModeFockState::product_fock(1, 0, 4).unwrap();
        let out = apply_mode_map(&s, &map).unwrap();
        assert_abs_diff_eq!((out.amplitude(1, 0) - mu).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((out.amplitude(0, 1) + nu.conj()).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.probability(1, 0), mu.norm_sqr(), epsilon = 1e-14);
        assert_abs_diff_eq!(out.probability(0, 1), nu.norm_sqr(), epsilon = 1e-14);
    }

    #[test]
    fn identity_map_is_identity() {
        let s = triangle_state(6);
        let out = apply_mode_map(&s, &TransferMatrix::identity()).unwrap();
        for n1 in 0..=6 {
            for n2 in 0..=6 {
                assert_abs_diff_eq!(
                    (out.amplitude(n1, n2) - s.amplitude(n1, n2)).norm(),
                    0.0,
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn hong_ou_mandel_dip() {
        // |1,1> through a 50/50 map never exits as (1,1)
        let s = TwoModeFockState::product_fock(1, 1, 4).unwrap();
        let out = apply_mode_map(&s, &half_map()).unwrap();
        assert_abs_diff_eq!(out.probability(1, 1), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.probability(2, 0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.probability(0, 2), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn map_then_inverse_restores_state() {
        let s = triangle_state(8);
        let mu = Complex64::new(0.4, -0.5);
        let nu_mag = (1.0 - mu.norm_sqr()).sqrt();
        let map = tm(mu, Complex64::from_polar(nu_mag, -1.2));
        let fwd = apply_mode_map(&s, &map).unwrap();
        let back = apply_mode_map(&fwd, &map.inverse()).unwrap();
        let mut max_err: f64 = 0.0;
        for n1 in 0..=8 {
            for n2 in 0..=8 {
                max_err = max_err.max((back.amplitude(n1, n2) - s.amplitude(n1, n2)).norm());
            }
        }
        assert!(max_err < 1e-10, "round trip error {max_err}");
    }

    #[test]
    fn total_photon_number_conserved() {
        let s = triangle_state(8);
        let out = apply_mode_map(&s, &half_map()).unwrap();
        let before = s.total_number_distribution();
        let after = out.total_number_distribution();
        for (b, a) in before.iter().zip(after.iter()) {
            assert_abs_diff_eq!(b, a, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(out.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn squeezed_state_amplitude_ratio() {
        let s = two_mode_squeezed_state(0.1, 10).unwrap();
        assert_abs_diff_eq!(
            s.probability(1, 1) / s.probability(0, 0),
            0.01,
            epsilon = 1e-14
        );
        for n1 in 0..=10 {
            for n2 in 0..=10 {
                if n1 != n2 {
                    assert_eq!(s.probability(n1, n2), 0.0);
                }
            }
        }
    }

    #[test]
    fn squeezed_state_mean_matches_geometric() {
        // mean photons per mode = eps^2 / (1 - eps^2) up to truncation leak
        let eps: f64 = 0.3;
        let s = two_mode_squeezed_state(eps, 12).unwrap();
        let (m1, m2) = s.mean_photon_numbers();
        let expected = eps * eps / (1.0 - eps * eps);
        assert_abs_diff_eq!(m1, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(m2, expected, epsilon = 1e-9);
        assert!(s.top_layer_probability() < 1e-6);
    }

    #[test]
    fn squeezed_state_rejects_bad_epsilon() {
        assert!(matches!(
            two_mode_squeezed_state(1.0, 5),
            Err(SimError::InvalidEpsilon(_))
        ));
        assert!(two_mode_squeezed_state(-0.1, 5).is_err());
        let vac = two_mode_squeezed_state(0.0, 5).unwrap();
        assert_eq!(vac.probability(0, 0), 1.0);
    }

    #[test]
    fn herald_ideal_removes_vacuum() {
        let s = two_mode_squeezed_state(0.2, 10).unwrap();
        let h = heralded_reduce(&s, &DetectorSpec::ideal()).unwrap();
        assert_eq!(h.distribution[0], 0.0);
        assert!(h.distribution[1] > 0.9);
    }

    #[test]
    fn herald_low_epsilon_approaches_single_photon() {
        let det = DetectorSpec::new(0.12, 0.0).unwrap();
        let s = two_mode_squeezed_state(1e-4, 6).unwrap();
        let h = heralded_reduce(&s, &det).unwrap();
        assert!(h.distribution[1] > 1.0 - 1e-6);
    }

    #[test]
    fn herald_conditional_matches_direct_summation() {
        // independent oracle: direct summation over the untruncated geometric
        // series with the same click model
        let eps: f64 = 0.3;
        let det = DetectorSpec::new(0.12, 1e-5).unwrap();
        let q = eps * eps;
        let mut click = 0.0;
        let mut cond = vec![0.0; 13];
        for n in 0..200u32 {
            let p = (1.0 - q) * q.powi(n as i32);
            let pc = p * (1.0 - (1.0 - det.dark_prob) * (1.0 - det.efficiency).powi(n as i32));
            click += pc;
            if (n as usize) < cond.len() {
                cond[n as usize] = pc;
            }
        }
        for v in &mut cond {
            *v /= click;
        }

        let s = two_mode_squeezed_state(eps, 12).unwrap();
        let h = heralded_reduce(&s, &det).unwrap();
        assert_abs_diff_eq!(h.click_probability, click, epsilon = 1e-9);
        for (a, b) in h.distribution.iter().zip(cond.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn herald_zero_click_errors() {
        let vac = TwoModeFockState::vacuum(4);
        let det = DetectorSpec::new(1.0, 0.0).unwrap();
        assert!(matches!(
            heralded_reduce(&vac, &det),
            Err(SimError::ZeroClickProbability)
        ));
    }

    #[test]
    fn non_unitary_map_rejected() {
        let bad = TransferMatrix {
            mu: Complex64::new(0.9, 0.0),
            nu: Complex64::new(0.5, 0.0),
        };
        let s = TwoModeFockState::vacuum(2);
        assert!(matches!(
            apply_mode_map(&s, &bad),
            Err(SimError::NonUnitaryMap(_))
        ));
        assert!(TransferMatrix::new(bad.mu, bad.nu).is_err());
    }

    #[test]
    fn overflow_weight_guard() {
        // |2,2> has total 4 > n_max = 3: the conserved block leaves the grid
        let s = TwoModeFockState::product_fock(2, 2, 3).unwrap();
        assert!(matches!(
            apply_mode_map(&s, &half_map()),
            Err(SimError::TruncationOverflow { .. })
        ));
    }

    #[test]
    fn binomial_routing_of_fock_inputs() {
        // |n, 0> exits with Binomial(n, |nu|^2) photons in mode 2; this is
        // the fact the Monte Carlo engine relies on
        let map = half_map();
        let q = map.conversion();
        for n in 1..=4usize {
            let s = TwoModeFockState::product_fock(n, 0, 6).unwrap();
            let out = apply_mode_map(&s, &map).unwrap();
            for k in 0..=n {
                let binom = (1..=n).product::<usize>() as f64
                    / ((1..=k).product::<usize>() as f64 * (1..=n - k).product::<usize>() as f64);
                let expect = binom * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32);
                assert_abs_diff_eq!(out.probability(n - k, k), expect, epsilon = 1e-12);
            }
        }
    }
}
