//! Shared oracles for the integration suites.
//!
//! Everything here is deliberately independent of the library's own
//! computation paths: the coupled-mode equations are integrated by RK4
//! instead of using the closed-form transfer functions, and Fock-space
//! blocks are propagated by dense matrix exponentiation instead of the
//! binomial-expansion transform.

#![allow(dead_code)]

use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// RK4 integration of the coupled-mode system
/// `d/dz (a1, a2) = i [[delta, kappa], [kappa*, -delta]] (a1, a2)`,
/// returning the transfer pair (mu, nu) at z.
pub fn rk4_transfer(delta: f64, kappa: Complex64, z: f64, steps: usize) -> (Complex64, Complex64) {
    let a = [
        [c(delta, 0.0), kappa],
        [kappa.conj(), c(-delta, 0.0)],
    ];
    let deriv = |v: [Complex64; 2]| -> [Complex64; 2] {
        [
            c(0.0, 1.0) * (a[0][0] * v[0] + a[0][1] * v[1]),
            c(0.0, 1.0) * (a[1][0] * v[0] + a[1][1] * v[1]),
        ]
    };
    let h = z / steps as f64;
    // first basis column gives (mu, -nu*); integrating both columns and
    // reading row 0 gives (mu, nu)
    let mut col0 = [c(1.0, 0.0), c(0.0, 0.0)];
    let mut col1 = [c(0.0, 0.0), c(1.0, 0.0)];
    for _ in 0..steps {
        for v in [&mut col0, &mut col1] {
            let k1 = deriv(*v);
            let k2 = deriv([v[0] + k1[0] * (h / 2.0), v[1] + k1[1] * (h / 2.0)]);
            let k3 = deriv([v[0] + k2[0] * (h / 2.0), v[1] + k2[1] * (h / 2.0)]);
            let k4 = deriv([v[0] + k3[0] * h, v[1] + k3[1] * h]);
            v[0] += (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (h / 6.0);
            v[1] += (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (h / 6.0);
        }
    }
    (col0[0], col1[0])
}

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug)]
pub struct CMat {
    pub n: usize,
    pub a: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            a: vec![Complex64::default(); n * n],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = c(1.0, 0.0);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i * self.n + j] = v;
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        CMat {
            n: self.n,
            a: self.a.iter().map(|v| v * s).collect(),
        }
    }

    fn one_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.a[i * n + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Matrix exponential by scaling-and-squaring with a Taylor series.
    pub fn expm(&self) -> CMat {
        let norm = self.one_norm();
        let s = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let scaled = self.scale(c(1.0 / 2f64.powi(s as i32), 0.0));
        let mut result = CMat::eye(self.n);
        let mut term = CMat::eye(self.n);
        for k in 1..=30 {
            term = term.matmul(&scaled).scale(c(1.0 / k as f64, 0.0));
            for (r, t) in result.a.iter_mut().zip(term.a.iter()) {
                *r += t;
            }
        }
        for _ in 0..s {
            result = result.matmul(&result);
        }
        result
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.a[i * n + j] * v[j]).sum())
            .collect()
    }
}

/// The fixed-total-photon block of the two-mode Hamiltonian
/// `delta (n1 - n2) + kappa a1† a2 + kappa* a2† a1`, in the basis
/// |m, n-m> for m = 0..=n. The z-propagator on states is exp(i z H).
pub fn block_hamiltonian(n: usize, delta: f64, kappa: Complex64) -> CMat {
    let dim = n + 1;
    let mut h = CMat::zeros(dim);
    for m in 0..=n {
        h.set(m, m, c(delta * (2.0 * m as f64 - n as f64), 0.0));
        if m + 1 <= n {
            // <m+1, n-m-1| kappa a1† a2 |m, n-m>
            let amp = kappa * (((m + 1) * (n - m)) as f64).sqrt();
            h.set(m + 1, m, amp);
            h.set(m, m + 1, amp.conj());
        }
    }
    h
}

/// Propagates the block-n basis state |n1, n2> (n1 + n2 = n) with the
/// exponentiated block Hamiltonian; returns amplitudes over m = photons in
/// mode 1.
pub fn block_propagate(
    n1: usize,
    n2: usize,
    delta: f64,
    kappa: Complex64,
    z: f64,
) -> Vec<Complex64> {
    let n = n1 + n2;
    let h = block_hamiltonian(n, delta, kappa);
    let u = h.scale(c(0.0, z)).expm();
    let mut v = vec![Complex64::default(); n + 1];
    v[n1] = c(1.0, 0.0);
    u.apply(&v)
}

/// Upper-tail p-value of a chi-square statistic.
pub fn chi_square_p(stat: f64, dof: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let d = ChiSquared::new(dof).expect("dof > 0");
    1.0 - d.cdf(stat)
}

/// Chi-square statistic between observed counts and expected probabilities
/// (bins with expected counts below `min_expected` are pooled into the
/// last bin). Returns (statistic, degrees of freedom).
pub fn chi_square_counts(observed: &[u64], expected_probs: &[f64], total: u64) -> (f64, f64) {
    assert_eq!(observed.len(), expected_probs.len());
    let min_expected = 5.0;
    let mut stat = 0.0;
    let mut bins = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * total as f64;
        if e >= min_expected {
            stat += (o as f64 - e).powi(2) / e;
            bins += 1;
        } else {
            pooled_obs += o as f64;
            pooled_exp += e;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    }
    (stat, (bins.max(2) - 1) as f64)
}

/// Path to a file in the workspace-level presets directory.
pub fn preset_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .join(name)
}

/// Prints the one-line verdict for an acceptance criterion and asserts it.
pub fn criterion(id: &str, pass: bool, detail: String) {
    println!(
        "ACCEPTANCE {id}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion {id} failed: {detail}");
}
