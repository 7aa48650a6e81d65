//! A common face over every structure, for the runners and the CLI.

use fann_core::fair_sampler::{NnsSampler, SamplerMode};
use fann_core::filter::{FilterIndex, FilterParams, NnisFilterIndex};
use fann_core::nnis::SegmentSampler;
use fann_core::oracle::NeighborhoodOracle;
use fann_core::{Dataset, Metric, SampleResult, SeededRng};

use crate::config::{Config, SamplerKind};

/// Deterministic work counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub queries: u64,
    pub inspected: u64,
    pub bottoms: u64,
    pub sketch_merges: u64,
    pub iterations: u64,
}

pub trait Sampler {
    fn name(&self) -> &'static str;

    fn sample(&mut self, q: &[f32], rng: &mut SeededRng) -> fann_core::Result<SampleResult>;

    fn sample_counted(&mut self, q: &[f32], rng: &mut SeededRng, c: &mut Counters) -> fann_core::Result<SampleResult> {
        let r = self.sample(q, rng)?;
        c.queries += 1;
        c.inspected += r.inspected;
        c.bottoms += r.outcome.is_none() as u64;
        Ok(r)
    }

    /// Digest of the structure, when it has one worth checking.
    fn state_digest(&self) -> Option<u64> {
        None
    }

    fn memory_bytes(&self) -> usize {
        0
    }
}

pub struct StaticNns<'a>(pub NnsSampler<'a>);
pub struct RankSwap<'a>(pub NnsSampler<'a>);
pub struct Filter<'a>(pub FilterIndex<'a>);
pub struct OracleSampler<'a>(pub NeighborhoodOracle<'a>);

impl Sampler for StaticNns<'_> {
    fn name(&self) -> &'static str {
        "nns"
    }

    fn sample(&mut self, q: &[f32], _: &mut SeededRng) -> fann_core::Result<SampleResult> {
        self.0.query(q)
    }

    fn state_digest(&self) -> Option<u64> {
        Some(self.0.state_digest())
    }

    fn memory_bytes(&self) -> usize {
        self.0.memory_bytes()
    }
}

impl Sampler for RankSwap<'_> {
    fn name(&self) -> &'static str {
        "nns_rank_swap"
    }

    fn sample(&mut self, q: &[f32], rng: &mut SeededRng) -> fann_core::Result<SampleResult> {
        self.0.query_rank_swap(q, rng)
    }

    fn memory_bytes(&self) -> usize {
        self.0.memory_bytes()
    }
}

impl Sampler for SegmentSampler<'_> {
    fn name(&self) -> &'static str {
        "nnis"
    }

    fn sample(&mut self, q: &[f32], rng: &mut SeededRng) -> fann_core::Result<SampleResult> {
        self.query(q, rng)
    }

    fn sample_counted(&mut self, q: &[f32], rng: &mut SeededRng, c: &mut Counters) -> fann_core::Result<SampleResult> {
        let (r, stats) = self.query_with_stats(q, rng)?;
        c.queries += 1;
        c.inspected += r.inspected;
        c.bottoms += r.outcome.is_none() as u64;
        c.sketch_merges += stats.sketch_merges;
        c.iterations += stats.iterations;
        Ok(r)
    }

    fn state_digest(&self) -> Option<u64> {
        Some(SegmentSampler::state_digest(self))
    }

    fn memory_bytes(&self) -> usize {
        SegmentSampler::memory_bytes(self)
    }
}

impl Sampler for Filter<'_> {
    fn name(&self) -> &'static str {
        "filter"
    }

    fn sample(&mut self, q: &[f32], _: &mut SeededRng) -> fann_core::Result<SampleResult> {
        self.0.query(q)
    }

    fn state_digest(&self) -> Option<u64> {
        Some(self.0.state_digest())
    }

    fn memory_bytes(&self) -> usize {
        self.0.memory_bytes()
    }
}

impl Sampler for NnisFilterIndex<'_> {
    fn name(&self) -> &'static str {
        "filter_nnis"
    }

    fn sample(&mut self, q: &[f32], rng: &mut SeededRng) -> fann_core::Result<SampleResult> {
        self.query(q, rng)
    }

    fn sample_counted(&mut self, q: &[f32], rng: &mut SeededRng, c: &mut Counters) -> fann_core::Result<SampleResult> {
        let (r, trace) = self.query_traced(q, rng)?;
        c.queries += 1;
        c.inspected += r.inspected;
        c.bottoms += r.outcome.is_none() as u64;
        c.iterations += trace.rounds;
        Ok(r)
    }

    fn state_digest(&self) -> Option<u64> {
        Some(NnisFilterIndex::state_digest(self))
    }

    fn memory_bytes(&self) -> usize {
        NnisFilterIndex::memory_bytes(self)
    }
}

impl Sampler for OracleSampler<'_> {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn sample(&mut self, q: &[f32], rng: &mut SeededRng) -> fann_core::Result<SampleResult> {
        let outcome = self.0.exact_uniform_sample(q, rng)?;
        Ok(SampleResult { outcome, inspected: 0 })
    }
}

fn inner_product(metric: &Metric) -> fann_core::Result<(f64, f64)> {
    match *metric {
        Metric::InnerProduct { alpha, beta } => Ok((alpha, beta)),
        _ => Err(fann_core::Error::InvalidParameter("filter structures need the inner-product metric".into())),
    }
}

/// Builds the configured structure over `data`, drawing all randomness from `rng`.
pub fn build_sampler<'a>(
    config: &Config,
    data: &'a Dataset,
    rng: &mut SeededRng,
) -> fann_core::Result<Box<dyn Sampler + 'a>> {
    let c = &config.constants;
    Ok(match config.sampler {
        SamplerKind::Nns | SamplerKind::NnsRankSwap => {
            let mode = if config.sampler == SamplerKind::Nns { SamplerMode::Static } else { SamplerMode::RankSwap };
            let s = NnsSampler::build(data, config.metric, config.family(), &c.lsh(), mode, rng)?;
            if mode == SamplerMode::Static {
                Box::new(StaticNns(s))
            } else {
                Box::new(RankSwap(s))
            }
        }
        SamplerKind::Nnis => Box::new(SegmentSampler::build(data, config.metric, config.family(), &c.nnis(), rng)?),
        SamplerKind::Filter => {
            let (alpha, beta) = inner_product(&config.metric)?;
            let copies = c.filter_copies.ceil() as usize;
            let params =
                FilterParams::new(data.len(), alpha, beta, c.eps_filter, copies, rand::RngCore::next_u64(rng))?;
            Box::new(Filter(FilterIndex::build(data, params)?))
        }
        SamplerKind::FilterNnis => {
            let (alpha, beta) = inner_product(&config.metric)?;
            Box::new(NnisFilterIndex::build(data, alpha, beta, &c.filter_nnis(), rand::RngCore::next_u64(rng))?)
        }
        SamplerKind::Oracle => Box::new(OracleSampler(NeighborhoodOracle::new(data, config.metric))),
    })
}
