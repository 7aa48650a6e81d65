//! Fairness and benchmark runners.
//!
//! Reports print as `key=value` lines (stable keys, see the README) plus a
//! human-readable table.

use std::io::{self, Write};
use std::time::Instant;

use anyhow::{bail, Context};
use fann_core::oracle::{
    compare_distributions, pair_independence, uniform_over, BallKind, DistributionReport, NeighborhoodOracle, Tally,
};
use fann_core::stats::ChiSquare;
use fann_core::{Dataset, Metric, SeededRng};
use rayon::prelude::*;

use crate::config::Config;
use crate::sampler::{build_sampler, Counters, Sampler};

/// Seed stream used for query randomness; build streams are the trial indices.
const QUERY_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone)]
pub struct FairnessReport {
    pub sampler: String,
    pub protocol: &'static str,
    pub trials: usize,
    /// The exact near ball.
    pub ball: Vec<u32>,
    pub outcomes: Vec<Option<u32>>,
    pub tally: Tally,
    pub distribution: DistributionReport,
    pub independence: ChiSquare,
    /// Largest `|frequency − 1/|B||` over the ball.
    pub max_deviation: f64,
    /// Outcomes outside the near ball.
    pub violations: u64,
    /// Structure digest equal before and after all queries, if the sampler has one.
    pub state_unchanged: Option<bool>,
}

impl FairnessReport {
    fn new(
        sampler: String,
        protocol: &'static str,
        ball: Vec<u32>,
        outcomes: Vec<Option<u32>>,
    ) -> anyhow::Result<Self> {
        if ball.is_empty() {
            bail!("the query has no near neighbors; nothing to compare against");
        }
        let mut tally = Tally::default();
        let mut violations = 0;
        for &o in &outcomes {
            match o {
                Some(id) if ball.binary_search(&id).is_err() => violations += 1,
                o => tally.record(o),
            }
        }
        let distribution = compare_distributions(&tally, &uniform_over(&ball))?;
        let target = 1.0 / ball.len() as f64;
        let max_deviation = ball.iter().map(|&id| (tally.frequency(id) - target).abs()).fold(0.0, f64::max);
        Ok(FairnessReport {
            sampler,
            protocol,
            trials: outcomes.len(),
            independence: pair_independence(&outcomes),
            ball,
            outcomes,
            tally,
            distribution,
            max_deviation,
            violations,
            state_unchanged: None,
        })
    }

    pub fn write_kv(&self, w: &mut impl Write) -> io::Result<()> {
        let d = &self.distribution;
        writeln!(w, "sampler={}", self.sampler)?;
        writeln!(w, "protocol={}", self.protocol)?;
        writeln!(w, "trials={}", self.trials)?;
        writeln!(w, "ball_size={}", self.ball.len())?;
        writeln!(w, "samples={}", d.n_samples)?;
        writeln!(w, "bottoms={}", d.bottoms)?;
        writeln!(w, "bottom_rate={}", d.bottom_rate())?;
        writeln!(w, "violations={}", self.violations)?;
        writeln!(w, "tvd={}", d.tvd)?;
        writeln!(w, "max_deviation={}", self.max_deviation)?;
        writeln!(w, "chi2={}", d.chi2_stat)?;
        writeln!(w, "chi2_dof={}", d.chi2_dof)?;
        writeln!(w, "chi2_p={}", d.chi2_pvalue)?;
        writeln!(w, "indep_chi2={}", self.independence.stat)?;
        writeln!(w, "indep_dof={}", self.independence.dof)?;
        writeln!(w, "indep_p={}", self.independence.p_value)?;
        if let Some(u) = self.state_unchanged {
            writeln!(w, "state_unchanged={u}")?;
        }
        for &id in &self.ball {
            writeln!(w, "freq.{id}={}", self.tally.frequency(id))?;
        }
        Ok(())
    }

    pub fn write_table(&self, w: &mut impl Write) -> io::Result<()> {
        let d = &self.distribution;
        writeln!(w, "{} ({}), {} trials, |B| = {}", self.sampler, self.protocol, self.trials, self.ball.len())?;
        writeln!(w, "  {:>8}  {:>10}  {:>9}", "id", "count", "freq")?;
        for &id in &self.ball {
            let c = self.tally.counts.get(&id).copied().unwrap_or(0);
            writeln!(w, "  {:>8}  {:>10}  {:>9.5}", id, c, self.tally.frequency(id))?;
        }
        writeln!(
            w,
            "  target {:.5}, max deviation {:.5}, tvd {:.5}",
            1.0 / self.ball.len() as f64,
            self.max_deviation,
            d.tvd
        )?;
        writeln!(w, "  GoF chi2 {:.3} (dof {}) p = {:.4}", d.chi2_stat, d.chi2_dof, d.chi2_pvalue)?;
        writeln!(
            w,
            "  pairs chi2 {:.3} (dof {}) p = {:.4}",
            self.independence.stat, self.independence.dof, self.independence.p_value
        )?;
        writeln!(w, "  bottom rate {:.5}, violations {}", d.bottom_rate(), self.violations)
    }
}

fn near_ball(data: &Dataset, metric: Metric, q: &[f32]) -> anyhow::Result<Vec<u32>> {
    Ok(NeighborhoodOracle::new(data, metric).exact_ball(q, BallKind::Near)?)
}

/// Runs the trial protocol of `config.sampler` for query `q`.
pub fn run_fairness_test(config: &Config, data: &Dataset, q: &[f32]) -> anyhow::Result<FairnessReport> {
    config.validate()?;
    if config.sampler.rebuilds_per_trial() {
        let outcomes = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = SeededRng::stream(config.seed, t as u64);
                let mut s = build_sampler(config, data, &mut rng)?;
                Ok(s.sample(q, &mut rng)?.outcome)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        FairnessReport::new(config.sampler.to_string(), "rebuild", near_ball(data, config.metric, q)?, outcomes)
    } else {
        let mut rng = SeededRng::stream(config.seed, 0);
        let mut s = build_sampler(config, data, &mut rng).context("building the sampler")?;
        let mut qrng = SeededRng::stream(config.seed, QUERY_STREAM);
        run_repeated(s.as_mut(), data, config.metric, q, config.trials, &mut qrng)
    }
}

/// Queries one structure `trials` times with the same point.
pub fn run_repeated(
    s: &mut dyn Sampler,
    data: &Dataset,
    metric: Metric,
    q: &[f32],
    trials: usize,
    rng: &mut SeededRng,
) -> anyhow::Result<FairnessReport> {
    let before = s.state_digest();
    let outcomes = (0..trials).map(|_| Ok(s.sample(q, rng)?.outcome)).collect::<anyhow::Result<Vec<_>>>()?;
    let mut report = FairnessReport::new(s.name().to_string(), "repeat", near_ball(data, metric, q)?, outcomes)?;
    report.state_unchanged = before.map(|b| Some(b) == s.state_digest());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub sampler: String,
    pub build_ms: f64,
    pub mean_query_us: f64,
    pub median_query_us: f64,
    pub counters: Counters,
    pub memory_bytes: usize,
}

impl BenchReport {
    pub fn mean_inspected(&self) -> f64 {
        if self.counters.queries == 0 {
            0.0
        } else {
            self.counters.inspected as f64 / self.counters.queries as f64
        }
    }

    pub fn write_kv(&self, w: &mut impl Write) -> io::Result<()> {
        let c = &self.counters;
        writeln!(w, "sampler={}", self.sampler)?;
        writeln!(w, "build_ms={}", self.build_ms)?;
        writeln!(w, "queries={}", c.queries)?;
        writeln!(w, "mean_query_us={}", self.mean_query_us)?;
        writeln!(w, "median_query_us={}", self.median_query_us)?;
        writeln!(w, "mean_inspected={}", self.mean_inspected())?;
        writeln!(w, "inspected={}", c.inspected)?;
        writeln!(w, "bottoms={}", c.bottoms)?;
        writeln!(w, "sketch_merges={}", c.sketch_merges)?;
        writeln!(w, "iterations={}", c.iterations)?;
        writeln!(w, "memory_bytes={}", self.memory_bytes)
    }

    pub fn write_table(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "{}: build {:.2} ms, {} queries", self.sampler, self.build_ms, self.counters.queries)?;
        writeln!(w, "  query time mean {:.2} us, median {:.2} us", self.mean_query_us, self.median_query_us)?;
        writeln!(w, "  inspected {:.2} per query, memory {} bytes", self.mean_inspected(), self.memory_bytes)
    }
}

/// Builds once and runs every query in order. Counters depend only on the seed.
pub fn run_bench(config: &Config, data: &Dataset, queries: &[Vec<f32>]) -> anyhow::Result<BenchReport> {
    config.validate()?;
    let mut rng = SeededRng::stream(config.seed, 0);
    let start = Instant::now();
    let mut s = build_sampler(config, data, &mut rng)?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut qrng = SeededRng::stream(config.seed, QUERY_STREAM);
    let mut counters = Counters::default();
    let mut times = Vec::with_capacity(queries.len());
    for q in queries {
        let t = Instant::now();
        s.sample_counted(q, &mut qrng, &mut counters)?;
        times.push(t.elapsed().as_secs_f64() * 1e6);
    }
    times.sort_by(f64::total_cmp);
    let mean = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
    let median = match times.len() {
        0 => 0.0,
        n if n % 2 == 1 => times[n / 2],
        n => (times[n / 2 - 1] + times[n / 2]) / 2.0,
    };
    Ok(BenchReport {
        sampler: s.name().to_string(),
        build_ms,
        mean_query_us: mean,
        median_query_us: median,
        counters,
        memory_bytes: s.memory_bytes(),
    })
}
