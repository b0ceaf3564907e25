//! Monte Carlo harness: sample true values, randomize them, estimate, and
//! aggregate across replicates.
//!
//! Sampling with replacement from a finite population is modelled as
//! i.i.d. draws from `pi`. Replicate `r` uses the sub-stream `(seed, r)`,
//! and replicate results are reduced in index order, so the summary does
//! not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::device::draw_response;
use crate::error::{check_dim, Error, Result};
use crate::estimation::{estimate_proportions, variance_mean_theoretical};
use crate::model::{dot, Device, PopulationModel, ResponseSample, SupportSpec};
use crate::stream::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    support: SupportSpec,
    population: PopulationModel,
    device: Device,
    n: u64,
    replicates: u64,
    seed: u64,
}

impl SimulationConfig {
    pub fn new(
        support: SupportSpec,
        population: PopulationModel,
        device: Device,
        n: u64,
        replicates: u64,
        seed: u64,
    ) -> Result<Self> {
        check_dim(support.len(), population.len())?;
        check_dim(support.len(), device.m())?;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if replicates == 0 {
            return Err(Error::NoReplicates);
        }
        Ok(Self {
            support,
            population,
            device,
            n,
            replicates,
            seed,
        })
    }

    pub fn support(&self) -> &SupportSpec {
        &self.support
    }

    pub fn population(&self) -> &PopulationModel {
        &self.population
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn replicates(&self) -> u64 {
        self.replicates
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Inverse-CDF sampler for the true value.
struct TrueValueSampler {
    cdf: Vec<f64>,
    last_positive: usize,
}

impl TrueValueSampler {
    fn new(population: &PopulationModel) -> Self {
        let cdf = population
            .probs()
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let last_positive = population
            .probs()
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0);
        Self { cdf, last_positive }
    }

    fn sample(&self, u: f64) -> usize {
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.last_positive)
    }
}

/// Response counts of one simulated survey; a pure function of
/// `(config, replicate_index)`.
pub fn simulate_survey(config: &SimulationConfig, replicate_index: u64) -> ResponseSample {
    let sampler = TrueValueSampler::new(&config.population);
    let mut stream = Stream::substream(config.seed, replicate_index);
    let mut counts = vec![0u64; config.support.len()];
    for _ in 0..config.n {
        let truth = sampler.sample(stream.uniform());
        let response = draw_response(&config.device, truth, &mut stream)
            .expect("sampler returns indices inside the support");
        counts[response] += 1;
    }
    ResponseSample::new(counts).expect("n >= 1 is enforced by the config")
}

/// Estimates produced by one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub mu_hat: f64,
    pub pi_hat_raw: Vec<f64>,
}

fn run_one(config: &SimulationConfig, replicate: u64) -> ReplicateRecord {
    let sample = simulate_survey(config, replicate);
    let props = estimate_proportions(&sample, &config.device).expect("dimensions checked");
    ReplicateRecord {
        replicate,
        mu_hat: dot(config.support.values(), &props.raw),
        pi_hat_raw: props.raw,
    }
}

/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; `None` with fewer than two observations.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub replicates: u64,
    pub n: u64,
    pub seed: u64,
    pub p: f64,
    pub mu_true: f64,
    pub mean_mu_hat: f64,
    /// Absent when only one replicate ran.
    pub empirical_var_mu_hat: Option<f64>,
    pub theoretical_var_mu_hat: f64,
    pub variance_ratio: Option<f64>,
    /// Monte Carlo standard error of `mean_mu_hat` from the empirical variance.
    pub mc_standard_error: Option<f64>,
    /// Standard error of `mean_mu_hat` implied by the theoretical variance.
    pub theory_standard_error: f64,
    pub mean_pi_hat_raw: Vec<f64>,
    #[serde(skip)]
    pub records: Option<Vec<ReplicateRecord>>,
}

/// Runs every replicate on `threads` workers (all available when `None`).
/// The output is identical for every thread count.
pub fn run_replicates(
    config: &SimulationConfig,
    threads: Option<usize>,
    keep_records: bool,
) -> Result<SimulationSummary> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().expect("thread pool construction");
    let records: Vec<ReplicateRecord> = pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| run_one(config, r))
            .collect()
    });
    summarize(config, records, keep_records)
}

fn summarize(
    config: &SimulationConfig,
    records: Vec<ReplicateRecord>,
    keep_records: bool,
) -> Result<SimulationSummary> {
    let m = config.support.len();
    let mut mu = Moments::default();
    let mut pis = vec![Moments::default(); m];
    for rec in &records {
        mu.push(rec.mu_hat);
        for (acc, &v) in pis.iter_mut().zip(&rec.pi_hat_raw) {
            acc.push(v);
        }
    }
    let theory = variance_mean_theoretical(
        &config.device,
        &config.support,
        &config.population,
        config.n,
    )?;
    let r = config.replicates as f64;
    let empirical = mu.variance();
    Ok(SimulationSummary {
        replicates: config.replicates,
        n: config.n,
        seed: config.seed,
        p: config.device.p(),
        mu_true: config.population.mean(&config.support)?,
        mean_mu_hat: mu.mean(),
        empirical_var_mu_hat: empirical,
        theoretical_var_mu_hat: theory,
        variance_ratio: empirical.map(|v| v / theory),
        mc_standard_error: empirical.map(|v| (v / r).sqrt()),
        theory_standard_error: (theory / r).sqrt(),
        mean_pi_hat_raw: pis.iter().map(Moments::mean).collect(),
        records: keep_records.then_some(records),
    })
}

/// Per-replicate CSV: `replicate,mu_hat,pi_hat_raw_1,..,pi_hat_raw_m`.
/// Floats use the shortest representation that round-trips.
pub fn records_to_csv(records: &[ReplicateRecord], m: usize) -> String {
    let mut out = String::from("replicate,mu_hat");
    for i in 1..=m {
        out.push_str(&format!(",pi_hat_raw_{i}"));
    }
    out.push('\n');
    for rec in records {
        out.push_str(&format!("{},{:?}", rec.replicate, rec.mu_hat));
        for v in &rec.pi_hat_raw {
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::response_distribution;

    fn config(pi: &[f64], p: f64, n: u64, replicates: u64, seed: u64) -> SimulationConfig {
        let m = pi.len();
        SimulationConfig::new(
            SupportSpec::integers(m).unwrap(),
            PopulationModel::new(pi.to_vec()).unwrap(),
            Device::new(p, m).unwrap(),
            n,
            replicates,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let s = SupportSpec::integers(2).unwrap();
        let pi = PopulationModel::new(vec![0.3, 0.7]).unwrap();
        let d = Device::new(0.5, 2).unwrap();
        assert_eq!(
            SimulationConfig::new(s.clone(), pi.clone(), d, 0, 1, 0),
            Err(Error::EmptySample)
        );
        assert_eq!(
            SimulationConfig::new(s.clone(), pi.clone(), d, 1, 0, 0),
            Err(Error::NoReplicates)
        );
        let d3 = Device::new(0.5, 3).unwrap();
        assert!(SimulationConfig::new(s, pi, d3, 1, 1, 0).is_err());
    }

    #[test]
    fn sampler_skips_zero_mass() {
        let sampler =
            TrueValueSampler::new(&PopulationModel::new(vec![0.0, 0.4, 0.6, 0.0]).unwrap());
        assert_eq!(sampler.sample(0.0), 1);
        assert_eq!(sampler.sample(0.39), 1);
        assert_eq!(sampler.sample(0.4), 2);
        assert_eq!(sampler.sample(1.0 - 1e-16), 2);
    }

    #[test]
    fn counts_conserve_n() {
        let cfg = config(&[0.2, 0.3, 0.5], 0.4, 137, 5, 11);
        for r in 0..5 {
            assert_eq!(simulate_survey(&cfg, r).n(), 137);
        }
    }

    #[test]
    fn near_truthful_device_reports_truth() {
        let cfg = config(&[0.0, 0.0, 1.0], 0.999_999, 1000, 1, 3);
        assert!(simulate_survey(&cfg, 0).counts()[2] >= 995);
    }

    #[test]
    fn survey_is_deterministic() {
        let cfg = config(&[0.2, 0.3, 0.5], 0.4, 500, 2, 99);
        assert_eq!(simulate_survey(&cfg, 1), simulate_survey(&cfg, 1));
        assert_ne!(simulate_survey(&cfg, 0), simulate_survey(&cfg, 1));
    }

    #[test]
    fn large_survey_matches_response_distribution() {
        let cfg = config(&[0.3, 0.7], 0.5, 1_000_000, 1, 5);
        let w = simulate_survey(&cfg, 0).proportions();
        let lambda = response_distribution(cfg.device(), cfg.population()).unwrap();
        let se = (lambda[0] * lambda[1] / 1e6).sqrt();
        for (wi, li) in w.iter().zip(&lambda) {
            assert!((wi - li).abs() <= 3.0 * se, "{wi} vs {li}");
        }
    }

    #[test]
    fn single_replicate_has_no_variance() {
        let cfg = config(&[0.5, 0.3, 0.2], 0.5, 50, 1, 7);
        let summary = run_replicates(&cfg, Some(1), true).unwrap();
        let records = summary.records.as_ref().unwrap();
        assert_eq!(summary.mean_mu_hat, records[0].mu_hat);
        assert_eq!(summary.empirical_var_mu_hat, None);
        assert_eq!(summary.variance_ratio, None);
    }

    #[test]
    fn thread_count_does_not_change_summary() {
        let cfg = config(&[0.5, 0.3, 0.2], 0.5, 100, 300, 42);
        let a = run_replicates(&cfg, Some(1), true).unwrap();
        let b = run_replicates(&cfg, Some(4), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn moments_match_two_pass() {
        let xs = [1.0e9 + 4.0, 1.0e9 + 7.0, 1.0e9 + 13.0, 1.0e9 + 16.0];
        let mut acc = Moments::default();
        xs.iter().for_each(|&x| acc.push(x));
        assert_eq!(acc.mean(), 1.0e9 + 10.0);
        assert_eq!(acc.variance(), Some(30.0));
    }

    #[test]
    fn csv_layout() {
        let rec = ReplicateRecord {
            replicate: 0,
            mu_hat: 0.5,
            pi_hat_raw: vec![0.25, 0.75],
        };
        assert_eq!(
            records_to_csv(&[rec], 2),
            "replicate,mu_hat,pi_hat_raw_1,pi_hat_raw_2\n0,0.5,0.25,0.75\n"
        );
    }
}
