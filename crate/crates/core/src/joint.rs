//! Sklar composition of two maxent marginals and a copula density, with
//! exact rejection sampling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::copula::{copula_pdf, CopulaDensity};
use crate::error::{Error, Result};
use crate::margin::MaxEntMarginal;
use crate::ranks::BivariateSample;

/// Reproducible random source: identical (seed, stream_id) pairs yield
/// identical draw sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RandomStream { seed, stream_id }
    }

    pub fn with_stream(&self, stream_id: u64) -> Self {
        RandomStream {
            seed: self.seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut r = ChaCha12Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }
}

/// Joint density `f(x,y) = c(F_X(x), F_Y(y)) f_X(x) f_Y(y)`.
#[derive(Debug, Clone)]
pub struct JointModel {
    pub margin_x: MaxEntMarginal,
    pub margin_y: MaxEntMarginal,
    pub copula: CopulaDensity,
}

impl JointModel {
    pub fn joint_pdf(&self, x: f64, y: f64) -> f64 {
        if !self.margin_x.support.contains(x) || !self.margin_y.support.contains(y) {
            return 0.0;
        }
        let u = self.margin_x.cdf(x);
        let v = self.margin_y.cdf(y);
        copula_pdf(&self.copula, u, v) * self.margin_x.pdf(x) * self.margin_y.pdf(y)
    }
}

/// Grid search for the copula density maximum (uniform grid including the
/// boundary, where the polynomial exponent often peaks).
fn copula_max(c: &CopulaDensity, grid: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..=grid {
        let u = i as f64 / grid as f64;
        for j in 0..=grid {
            let v = j as f64 / grid as f64;
            let lp = c.log_pdf(u, v);
            if lp > best {
                best = lp;
            }
        }
    }
    best.exp()
}

pub(crate) struct RejectionSampler<'a> {
    model: &'a JointModel,
    envelope: f64,
}

impl<'a> RejectionSampler<'a> {
    pub(crate) fn new(model: &'a JointModel) -> Self {
        let grid = model.copula.fit_order.max(64) * 4;
        RejectionSampler {
            model,
            envelope: 1.1 * copula_max(&model.copula, grid),
        }
    }

    fn envelope_doubled(&self) -> Self {
        RejectionSampler {
            model: self.model,
            envelope: 2.0 * self.envelope,
        }
    }

    /// One exact draw; `Err` when a proposal's density exceeds the envelope.
    pub(crate) fn draw(&self, rng: &mut ChaCha12Rng) -> Result<(f64, f64)> {
        loop {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            let w: f64 = rng.gen();
            let c = copula_pdf(&self.model.copula, u, v);
            if c > self.envelope {
                return Err(Error::EnvelopeExceeded { doublings: 0 });
            }
            if w * self.envelope <= c {
                return Ok((
                    self.model.margin_x.quantile(u),
                    self.model.margin_y.quantile(v),
                ));
            }
        }
    }
}

const SAMPLE_CHUNK: usize = 8192;

/// Draws `n` i.i.d. points by copula rejection sampling followed by the
/// marginal inverse-CDF transforms.
///
/// Work is partitioned across workers by distinct stream ids and the
/// chunks are concatenated in stream order, so the output depends only on
/// the `RandomStream`, not on scheduling. A proposal exceeding the
/// envelope restarts sampling with the envelope doubled (up to 3 times,
/// reported as a warning).
pub fn sample_joint(m: &JointModel, n: usize, rng: &RandomStream) -> Result<BivariateSample> {
    assert!(n >= 1);
    let mut sampler = RejectionSampler::new(m);
    for doubling in 0..=3u32 {
        let chunks: Vec<Result<Vec<(f64, f64)>>> = (0..n.div_ceil(SAMPLE_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let count = SAMPLE_CHUNK.min(n - chunk * SAMPLE_CHUNK);
                let mut r = rng
                    .with_stream(rng.stream_id.wrapping_add(1 + chunk as u64))
                    .rng();
                let mut out = Vec::with_capacity(count);
                for _ in 0..count {
                    out.push(sampler.draw(&mut r)?);
                }
                Ok(out)
            })
            .collect();
        if chunks.iter().any(|c| c.is_err()) {
            log::warn!(
                "copula proposal exceeded the rejection envelope; doubling it (attempt {})",
                doubling + 1
            );
            sampler = sampler.envelope_doubled();
            continue;
        }
        let mut rows = Vec::with_capacity(n);
        for c in chunks {
            rows.extend(c.unwrap());
        }
        return BivariateSample::new(rows);
    }
    Err(Error::EnvelopeExceeded { doublings: 3 })
}
