//! Monte-Carlo block-error-rate simulation.
//!
//! Trial `t` draws its message and noise from a ChaCha stream keyed by
//! `(seed, t)` alone. Every decoder of a run, every grid point and every
//! later run with the same seed therefore sees the same message and the same
//! unit-variance noise, and counts are reduced by integer addition.

pub mod channel;
pub mod report;
pub mod stats;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rand_distr::{Distribution, StandardNormal};

use crate::code::GeneratorSpec;
use crate::decoders::{BlockDecoder, MlDecoder};
use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BinVector};
pub use channel::{ChannelConfig, ChannelKind};
pub use report::{parse_grid, PointStats, SimReport, SimRow, CSV_HEADER};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "RMSUB_THREADS";

/// SplitMix64 finalizer over `(seed, a, b)`.
pub fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Worker pool sized by `RMSUB_THREADS` when set, else rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV}={v} is not a count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Which axis a grid of dB values lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAxis {
    EbN0,
    Snr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub trials: u64,
    pub seed: u64,
    /// Writes zero wall-time so reports are byte-identical across runs.
    pub deterministic: bool,
    pub channel: ChannelKind,
}

impl SimOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimOptions {
            trials,
            seed,
            deterministic: false,
            channel: ChannelKind::Awgn,
        }
    }
}

/// A decoder under test with its report labels.
pub struct DecoderEntry<'a> {
    pub decoder: &'a dyn BlockDecoder,
    pub label: String,
    pub pruning: String,
    pub q0: Option<usize>,
}

/// Recovers the message of a word over kernel rows `rows`: since
/// `F^{⊗m}` is its own inverse over GF(2), `u_j = ⊕_{z ⊇ i_j} c(z)`.
fn message_of(rows: &[usize], c: &BinVector) -> BinVector {
    let mut u = BinVector::zeros(rows.len());
    for (j, &i) in rows.iter().enumerate() {
        let mut bit = false;
        for z in 0..c.len() {
            if z & i == i {
                bit ^= c.get(z);
            }
        }
        u.set(j, bit);
    }
    u
}

struct Trial {
    u: BinVector,
    c: BinVector,
    noise: Vec<f64>,
}

fn draw(gen: &BinMatrix, seed: u64, stream: u64, t: u64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, stream, t));
    let (u, c) = channel::random_codeword(gen, &mut rng);
    let noise = (0..gen.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
    Trial { u, c, noise }
}

fn llr_of(trial: &Trial, sigma: f64) -> Vec<f64> {
    let scale = 2.0 / (sigma * sigma);
    trial
        .noise
        .iter()
        .enumerate()
        .map(|(z, e)| {
            let s = if trial.c.get(z) { -1.0 } else { 1.0 };
            scale * (s + sigma * e)
        })
        .collect()
}

#[derive(Clone)]
struct Acc {
    block: Vec<u64>,
    bits: Vec<u64>,
    discord: Vec<u64>,
    nanos: Vec<u64>,
}

impl Acc {
    fn new(d: usize) -> Self {
        Acc {
            block: vec![0; d],
            bits: vec![0; d],
            discord: vec![0; d * d],
            nanos: vec![0; d],
        }
    }

    fn merge(mut self, o: Acc) -> Acc {
        for (a, b) in self
            .block
            .iter_mut()
            .chain(self.bits.iter_mut())
            .chain(self.discord.iter_mut())
            .chain(self.nanos.iter_mut())
            .zip(o.block.iter().chain(&o.bits).chain(&o.discord).chain(&o.nanos))
        {
            *a += b;
        }
        self
    }
}

fn check_channel(opts: &SimOptions) -> Result<()> {
    if opts.channel != ChannelKind::Awgn {
        return Err(Error::Unsupported(
            "decoders take AWGN LLR input; BSC decoding is not supported".into(),
        ));
    }
    Ok(())
}

/// Paired BLER/BER simulation of several decoders of one code over a grid.
pub fn run_bler(
    spec: &GeneratorSpec,
    decoders: &[DecoderEntry<'_>],
    axis: GridAxis,
    grid: &[f64],
    opts: &SimOptions,
) -> Result<SimReport> {
    check_channel(opts)?;
    spec.validate()?;
    let gen = crate::code::subcode_generator(spec)?;
    let rows_idx = spec.generator_rows();
    let (n, k) = (spec.n(), spec.k as f64);
    let d = decoders.len();
    let mut report = SimReport {
        seed: opts.seed,
        rows: Vec::new(),
        points: Vec::new(),
    };
    if opts.trials == 0 {
        return Ok(report);
    }
    for &x in grid {
        let ch = match axis {
            GridAxis::EbN0 => ChannelConfig::awgn_ebn0_db(x, n, k)?,
            GridAxis::Snr => ChannelConfig::awgn_snr_db(x)?,
        };
        let (ebn0, snr) = match axis {
            GridAxis::EbN0 => (x, ch.snr_db()),
            GridAxis::Snr => (ch.ebn0_db(n, k), x),
        };
        let acc = (0..opts.trials)
            .into_par_iter()
            .try_fold(
                || Acc::new(d),
                |mut acc, t| -> Result<Acc> {
                    let trial = draw(&gen, opts.seed, 0, t);
                    let l = llr_of(&trial, ch.sigma);
                    let mut errs = vec![false; d];
                    for (i, e) in decoders.iter().enumerate() {
                        let start = Instant::now();
                        let out = e.decoder.decode(&l)?;
                        acc.nanos[i] += start.elapsed().as_nanos() as u64;
                        if out.codeword != trial.c {
                            errs[i] = true;
                            acc.block[i] += 1;
                            acc.bits[i] += message_of(&rows_idx, &out.codeword).distance(&trial.u) as u64;
                        }
                    }
                    for i in 0..d {
                        for j in 0..d {
                            if errs[i] && !errs[j] {
                                acc.discord[i * d + j] += 1;
                            }
                        }
                    }
                    Ok(acc)
                },
            )
            .try_reduce(|| Acc::new(d), |a, b| Ok(a.merge(b)))?;
        let trials = opts.trials;
        for (i, e) in decoders.iter().enumerate() {
            report.rows.push(SimRow {
                ebn0_db: ebn0,
                snr_db: snr,
                sigma: ch.sigma,
                decoder: e.label.clone(),
                pruning: e.pruning.clone(),
                q0: e.q0,
                trials,
                block_errors: acc.block[i],
                bler: acc.block[i] as f64 / trials as f64,
                bit_errors: acc.bits[i],
                ber: acc.bits[i] as f64 / (trials as f64 * k),
                seconds: if opts.deterministic { 0.0 } else { acc.nanos[i] as f64 * 1e-9 },
            });
        }
        report.points.push(PointStats {
            sigma: ch.sigma,
            trials,
            block_errors: acc.block.clone(),
            discord: acc.discord.chunks(d).map(|c| c.to_vec()).collect(),
        });
    }
    Ok(report)
}

/// Time sharing between `RM(m, 2)` for a fraction `alpha` of the time and
/// `RM(m, 1)` for the rest.
#[derive(Debug, Clone)]
pub struct TimeSharing {
    pub m: usize,
    pub alpha: f64,
    high: GeneratorSpec,
    low: GeneratorSpec,
}

impl TimeSharing {
    pub fn new(m: usize, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!("alpha = {alpha} outside [0, 1]")));
        }
        Ok(TimeSharing {
            m,
            alpha,
            high: GeneratorSpec::full_rm(m, 2)?,
            low: GeneratorSpec::full_rm(m, 1)?,
        })
    }

    /// Fraction reaching a target rate.
    pub fn for_rate(m: usize, rate: f64) -> Result<Self> {
        let n = (1usize << m) as f64;
        let (hi, lo) = (
            crate::code::rm_dimension(m, 2) as f64 / n,
            crate::code::rm_dimension(m, 1) as f64 / n,
        );
        let alpha = (rate - lo) / (hi - lo);
        if !(-1e-12..=1.0 + 1e-12).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "rate {rate} is outside [{lo}, {hi}] reachable by time sharing"
            )));
        }
        TimeSharing::new(m, alpha.clamp(0.0, 1.0))
    }

    pub fn rate(&self) -> f64 {
        self.alpha * self.high.rate() + (1.0 - self.alpha) * self.low.rate()
    }

    /// ML-decoded time sharing. A time-shared block pairs one block of each
    /// constituent and errs if either does. Both constituents see the noise
    /// level of the effective rate; their own rows are reported alongside.
    pub fn run(&self, grid_ebn0_db: &[f64], opts: &SimOptions) -> Result<SimReport> {
        check_channel(opts)?;
        let n = 1usize << self.m;
        let k_eff = self.rate() * n as f64;
        let parts = [&self.high, &self.low];
        let gens: Vec<BinMatrix> = parts
            .iter()
            .map(|s| crate::code::subcode_generator(s))
            .collect::<Result<_>>()?;
        let decs: Vec<MlDecoder> = parts.iter().map(|s| MlDecoder::new(s)).collect::<Result<_>>()?;
        let rows: Vec<Vec<usize>> = parts.iter().map(|s| s.generator_rows()).collect();
        let use_part = [self.alpha > 0.0, self.alpha < 1.0];
        let labels = [
            format!("map-rm{}-2", self.m),
            format!("map-rm{}-1", self.m),
            "ts-map".to_string(),
        ];
        let mut report = SimReport {
            seed: opts.seed,
            rows: Vec::new(),
            points: Vec::new(),
        };
        if opts.trials == 0 {
            return Ok(report);
        }
        let k_bits = [rows[0].len() as f64, rows[1].len() as f64];
        for &x in grid_ebn0_db {
            let ch = ChannelConfig::awgn_ebn0_db(x, n, k_eff)?;
            let acc = (0..opts.trials)
                .into_par_iter()
                .try_fold(
                    || Acc::new(3),
                    |mut acc, t| -> Result<Acc> {
                        let mut any = false;
                        for p in 0..2 {
                            if !use_part[p] {
                                continue;
                            }
                            let trial = draw(&gens[p], opts.seed, p as u64 + 1, t);
                            let start = Instant::now();
                            let out = decs[p].decode(&llr_of(&trial, ch.sigma))?;
                            let dt = start.elapsed().as_nanos() as u64;
                            acc.nanos[p] += dt;
                            acc.nanos[2] += dt;
                            if out.codeword != trial.c {
                                let bits = message_of(&rows[p], &out.codeword).distance(&trial.u) as u64;
                                acc.block[p] += 1;
                                acc.bits[p] += bits;
                                acc.bits[2] += bits;
                                any = true;
                            }
                        }
                        acc.block[2] += any as u64;
                        Ok(acc)
                    },
                )
                .try_reduce(|| Acc::new(3), |a, b| Ok(a.merge(b)))?;
            let trials = opts.trials;
            let k_of = [
                k_bits[0],
                k_bits[1],
                if use_part[0] { k_bits[0] } else { 0.0 } + if use_part[1] { k_bits[1] } else { 0.0 },
            ];
            for i in 0..3 {
                if i < 2 && !use_part[i] {
                    continue;
                }
                report.rows.push(SimRow {
                    ebn0_db: x,
                    snr_db: ch.snr_db(),
                    sigma: ch.sigma,
                    decoder: labels[i].clone(),
                    pruning: format!("alpha={}", self.alpha),
                    q0: None,
                    trials,
                    block_errors: acc.block[i],
                    bler: acc.block[i] as f64 / trials as f64,
                    bit_errors: acc.bits[i],
                    ber: acc.bits[i] as f64 / (trials as f64 * k_of[i]),
                    seconds: if opts.deterministic { 0.0 } else { acc.nanos[i] as f64 * 1e-9 },
                });
            }
            report.points.push(PointStats {
                sigma: ch.sigma,
                trials,
                block_errors: acc.block.clone(),
                discord: Vec::new(),
            });
        }
        Ok(report)
    }
}

/// Time-sharing BLER for a target rate or an explicit fraction.
pub fn time_sharing_bler(
    m: usize,
    rate_target: Option<f64>,
    alpha: Option<f64>,
    grid_ebn0_db: &[f64],
    opts: &SimOptions,
) -> Result<SimReport> {
    let ts = match (rate_target, alpha) {
        (_, Some(a)) => TimeSharing::new(m, a)?,
        (Some(r), None) => TimeSharing::for_rate(m, r)?,
        (None, None) => return Err(Error::InvalidConfig("need a rate target or alpha".into())),
    };
    ts.run(grid_ebn0_db, opts)
}
