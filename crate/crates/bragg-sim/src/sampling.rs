//! Small exact samplers for the per-pulse photon statistics.
//!
//! Counts here are tiny (a few photons per pulse), so per-trial Bernoulli
//! loops and inverse-CDF draws beat general-purpose samplers and keep the
//! draw sequence simple and stable.

use rand::Rng;

/// Geometric pair number for one spectral mode:
/// `P(n) = (1 - q) q^n` with `q = epsilon^2`.
fn geometric<R: Rng>(q: f64, rng: &mut R) -> u32 {
    if q <= 0.0 {
        return 0;
    }
    // P(n >= m) = q^m, so n = floor(ln(v) / ln(q)) for v ~ U(0,1]
    let v: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let n = (v.ln() / q.ln()).floor();
    if n < 0.0 {
        0
    } else {
        n as u32
    }
}

/// Total pair number across `modes` independent spectral modes.
pub fn pair_number<R: Rng>(q: f64, modes: u32, rng: &mut R) -> u32 {
    let mut total = 0;
    for _ in 0..modes {
        total += geometric(q, rng);
    }
    total
}

/// Binomial thinning by per-trial Bernoulli draws.
pub fn binomial<R: Rng>(n: u32, p: f64, rng: &mut R) -> u32 {
    if p >= 1.0 {
        return n;
    }
    if p <= 0.0 {
        return 0;
    }
    let mut k = 0;
    for _ in 0..n {
        if rng.gen::<f64>() < p {
            k += 1;
        }
    }
    k
}

/// Poisson draw by Knuth's product-of-uniforms method (means here are
/// well below 1).
pub fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let limit = (-mean).exp();
    let mut k = 0u32;
    let mut prod: f64 = rng.gen();
    while prod > limit {
        k += 1;
        prod *= rng.gen::<f64>();
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn geometric_mean_and_tail() {
        let q: f64 = 0.09;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 500_000;
        let mut sum = 0u64;
        let mut ge1 = 0u64;
        for _ in 0..n {
            let v = geometric(q, &mut rng);
            sum += v as u64;
            if v >= 1 {
                ge1 += 1;
            }
        }
        let mean = sum as f64 / n as f64;
        let expect = q / (1.0 - q);
        assert!((mean - expect).abs() < 0.003, "mean {mean} vs {expect}");
        let p1 = ge1 as f64 / n as f64;
        assert!((p1 - q).abs() < 0.002, "P(n>=1) {p1} vs {q}");
    }

    #[test]
    fn poisson_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = 0.2;
        let n = 400_000;
        let total: u64 = (0..n).map(|_| poisson(m, &mut rng) as u64).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - m).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn binomial_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(binomial(5, 1.0, &mut rng), 5);
        assert_eq!(binomial(5, 0.0, &mut rng), 0);
        assert_eq!(binomial(0, 0.5, &mut rng), 0);
    }
}
