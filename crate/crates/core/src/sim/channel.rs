use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BinVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    Bsc,
}

/// A binary-input channel: BPSK over AWGN with noise deviation `sigma`, or a
/// BSC with crossover `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub sigma: f64,
    pub p: f64,
}

impl ChannelConfig {
    pub fn awgn(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
        }
        Ok(ChannelConfig {
            kind: ChannelKind::Awgn,
            sigma,
            p: 0.0,
        })
    }

    pub fn awgn_snr_db(snr_db: f64) -> Result<Self> {
        ChannelConfig::awgn(sigma_from_snr_db(snr_db))
    }

    pub fn awgn_ebn0_db(ebn0_db: f64, n: usize, k: f64) -> Result<Self> {
        ChannelConfig::awgn(sigma_from_ebn0_db(ebn0_db, n, k))
    }

    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::InvalidConfig(format!("crossover must lie in [0, 1/2], got {p}")));
        }
        Ok(ChannelConfig {
            kind: ChannelKind::Bsc,
            sigma: 0.0,
            p,
        })
    }

    pub fn snr_db(&self) -> f64 {
        snr_db_from_sigma(self.sigma)
    }

    /// `k` may be fractional (time sharing).
    pub fn ebn0_db(&self, n: usize, k: f64) -> f64 {
        ebn0_db_from_sigma(self.sigma, n, k)
    }
}

/// `SNR = 1 / (2σ²)`.
pub fn sigma_from_snr_db(snr_db: f64) -> f64 {
    (0.5 / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// `Eb/N0 = n / (2kσ²)`.
pub fn sigma_from_ebn0_db(ebn0_db: f64, n: usize, k: f64) -> f64 {
    (n as f64 / (2.0 * k * 10f64.powf(ebn0_db / 10.0))).sqrt()
}

pub fn snr_db_from_sigma(sigma: f64) -> f64 {
    10.0 * (1.0 / (2.0 * sigma * sigma)).log10()
}

pub fn ebn0_db_from_sigma(sigma: f64, n: usize, k: f64) -> f64 {
    10.0 * (n as f64 / (2.0 * k * sigma * sigma)).log10()
}

/// `y = (1 - 2c) + N(0, σ²)`, returned as `l = 2y / σ²`.
pub fn awgn_llr<R: Rng + ?Sized>(c: &BinVector, sigma: f64, rng: &mut R) -> Vec<f64> {
    let scale = 2.0 / (sigma * sigma);
    (0..c.len())
        .map(|z| {
            let s = if c.get(z) { -1.0 } else { 1.0 };
            let noise: f64 = StandardNormal.sample(rng);
            scale * (s + sigma * noise)
        })
        .collect()
}

/// Output of a BSC with crossover `p`.
pub fn bsc_output<R: Rng + ?Sized>(c: &BinVector, p: f64, rng: &mut R) -> BinVector {
    let mut y = c.clone();
    for z in 0..c.len() {
        if rng.random::<f64>() < p {
            y.set(z, !c.get(z));
        }
    }
    y
}

/// Uniform message `u` and its codeword `u G`.
pub fn random_codeword<R: Rng + ?Sized>(gen: &BinMatrix, rng: &mut R) -> (BinVector, BinVector) {
    let mut u = BinVector::zeros(gen.rows());
    for i in 0..gen.rows() {
        u.set(i, rng.random::<bool>());
    }
    let c = gen.vec_mul(&u).expect("message length matches the generator");
    (u, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conversions_are_consistent() {
        for db in [-3.0, 0.0, 2.5, 6.0] {
            assert!((snr_db_from_sigma(sigma_from_snr_db(db)) - db).abs() < 1e-12);
            let s = sigma_from_ebn0_db(db, 64, 14.0);
            assert!((ebn0_db_from_sigma(s, 64, 14.0) - db).abs() < 1e-12);
            let gap = ebn0_db_from_sigma(s, 64, 14.0) - snr_db_from_sigma(s);
            assert!((gap - 10.0 * (64.0f64 / 14.0).log10()).abs() < 1e-12);
        }
        assert!(ChannelConfig::awgn(0.0).is_err());
        assert!(ChannelConfig::bsc(0.6).is_err());
    }

    #[test]
    fn llr_mean_and_noiseless_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let sigma = 0.8;
        let c = BinVector::zeros(100);
        let draws = 1000;
        let mut sum = 0.0;
        for _ in 0..draws {
            sum += awgn_llr(&c, sigma, &mut rng).iter().sum::<f64>();
        }
        let mean = sum / (100 * draws) as f64;
        let want = 2.0 / (sigma * sigma);
        let se = 2.0 / sigma / (1e5f64).sqrt();
        assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want}");
        let mut c = BinVector::zeros(16);
        c.set(3, true);
        c.set(9, true);
        let l = awgn_llr(&c, 1e-4, &mut rng);
        assert_eq!(crate::llr::hard_decision(&l), c);
        let again = awgn_llr(&c, 0.5, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(again, awgn_llr(&c, 0.5, &mut ChaCha8Rng::seed_from_u64(1)));
    }

    #[test]
    fn bsc_flip_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let c = BinVector::zeros(10_000);
        let y = bsc_output(&c, 0.1, &mut rng);
        assert!((y.weight() as f64 - 1000.0).abs() < 100.0);
        assert!(bsc_output(&c, 0.0, &mut rng).is_zero());
    }
}
