//! Seedable toy experiments: a normal signal peak on a truncated
//! exponential background, with data and templates drawn bin by bin from
//! Poisson distributions around the analytic bin expectations.

use alloc::string::ToString;
use alloc::vec::Vec;

use libm::{exp, floor, lgamma, log, sqrt};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::data::{BinnedSample, TemplateModel};
use crate::error::{Error, Result};
use crate::math::normal_interval;

/// Shape and size parameters of a toy experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ToyConfig {
    pub signal_yield: f64,
    pub background_yield: f64,
    pub signal_mean: f64,
    pub signal_sigma: f64,
    /// Decay constant of the background density `∝ exp(-slope · x)`.
    pub background_slope: f64,
    pub range: [f64; 2],
    pub nbins: usize,
    /// Expected entries per template component.
    pub n_mc: u64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            signal_yield: 250.0,
            background_yield: 750.0,
            signal_mean: 1.0,
            signal_sigma: 0.1,
            background_slope: 1.0,
            range: [0.0, 2.0],
            nbins: 15,
            n_mc: 100,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.signal_yield,
            self.background_yield,
            self.signal_mean,
            self.signal_sigma,
            self.background_slope,
            self.range[0],
            self.range[1],
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("parameters must be finite"));
        }
        if self.nbins == 0 {
            return Err(Error::InvalidConfig("nbins must be at least 1"));
        }
        if !(self.range[0] < self.range[1]) {
            return Err(Error::InvalidConfig(
                "range lower edge must be below upper edge",
            ));
        }
        if !(self.signal_sigma > 0.0) {
            return Err(Error::InvalidConfig("signal_sigma must be positive"));
        }
        if self.signal_yield < 0.0 || self.background_yield < 0.0 {
            return Err(Error::InvalidConfig("yields must be nonnegative"));
        }
        Ok(())
    }

    pub fn edges(&self) -> Vec<f64> {
        TemplateModel::uniform_edges(self.nbins, self.range[0], self.range[1])
    }
}

/// Bin probabilities of the signal and background densities, each
/// truncated to the configured range.
pub fn bin_probabilities(config: &ToyConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    config.validate()?;
    let edges = config.edges();
    let [lo, hi] = config.range;

    let z = |x: f64| (x - config.signal_mean) / config.signal_sigma;
    let sig_norm = normal_interval(z(lo), z(hi));
    if !(sig_norm > 0.0) {
        return Err(Error::InvalidConfig(
            "signal has no probability inside the range",
        ));
    }
    let signal = edges
        .windows(2)
        .map(|e| normal_interval(z(e[0]), z(e[1])) / sig_norm)
        .collect();

    let slope = config.background_slope;
    let background = if slope == 0.0 {
        edges
            .windows(2)
            .map(|e| (e[1] - e[0]) / (hi - lo))
            .collect()
    } else {
        // shift the exponent so the larger end of the range sits at exp(0)
        let anchor = if slope > 0.0 { lo } else { hi };
        let cdf = |x: f64| -exp(-slope * (x - anchor));
        let norm = cdf(hi) - cdf(lo);
        edges
            .windows(2)
            .map(|e| (cdf(e[1]) - cdf(e[0])) / norm)
            .collect()
    };
    Ok((signal, background))
}

/// Independent random stream for one toy experiment.
#[derive(Debug, Clone)]
pub struct ToyStream {
    rng: ChaCha8Rng,
}

/// Stream for `(seed, toy_index)`. ChaCha's 64-bit stream id selects
/// non-overlapping sequences, so every toy index gets its own stream no
/// matter which worker draws it.
pub fn rng_stream(seed: u64, toy_index: u64) -> ToyStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(toy_index);
    ToyStream { rng }
}

impl ToyStream {
    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Poisson variate with the given mean: sequential inversion below 30,
    /// transformed rejection (PTRS) above.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if !(mean > 0.0) {
            return 0;
        }
        if mean < 30.0 {
            self.poisson_inversion(mean)
        } else {
            self.poisson_ptrs(mean)
        }
    }

    fn poisson_inversion(&mut self, mean: f64) -> u64 {
        let mut u = self.uniform();
        let mut p = exp(-mean);
        let mut k = 0u64;
        while u > p {
            u -= p;
            k += 1;
            p *= mean / k as f64;
            if p == 0.0 {
                // u lost to rounding in the far tail; redraw
                u = self.uniform();
                p = exp(-mean);
                k = 0;
            }
        }
        k
    }

    // W. Hörmann, "The transformed rejection method for generating Poisson
    // random variables", Insurance: Mathematics and Economics 12 (1993).
    fn poisson_ptrs(&mut self, mean: f64) -> u64 {
        let slam = sqrt(mean);
        let loglam = log(mean);
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = floor((2.0 * a / us + b) * u + mean + 0.43);
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            if log(v) + log(inv_alpha) - log(a / (us * us) + b)
                <= -mean + k * loglam - lgamma(k + 1.0)
            {
                return k as u64;
            }
        }
    }
}

/// One generated data sample with its two templates.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDraw {
    pub edges: Vec<f64>,
    pub data: BinnedSample,
    /// Signal template, then background template.
    pub templates: [BinnedSample; 2],
    /// True (signal, background) yields.
    pub truth: (f64, f64),
}

impl ToyDraw {
    /// Template model of this draw; fails if a template came out empty.
    pub fn model(&self) -> Result<TemplateModel> {
        TemplateModel::new(
            self.edges.clone(),
            self.data.clone(),
            alloc::vec![
                ("signal".to_string(), self.templates[0].clone()),
                ("background".to_string(), self.templates[1].clone()),
            ],
        )
    }
}

/// Draws data (signal and background separately, then summed) followed by
/// the signal and background templates, in that order, from `stream`.
pub fn draw(config: &ToyConfig, stream: &mut ToyStream) -> Result<ToyDraw> {
    let (sig, bkg) = bin_probabilities(config)?;
    let data: Vec<f64> = sig
        .iter()
        .zip(&bkg)
        .map(|(ps, pb)| {
            let s = stream.poisson(config.signal_yield * ps);
            let b = stream.poisson(config.background_yield * pb);
            (s + b) as f64
        })
        .collect();
    let n_mc = config.n_mc as f64;
    let mut template = |p: &[f64]| -> Result<BinnedSample> {
        let counts: Vec<f64> = p
            .iter()
            .map(|pk| stream.poisson(n_mc * pk) as f64)
            .collect();
        BinnedSample::from_counts(&counts)
    };
    let templates = [template(&sig)?, template(&bkg)?];
    Ok(ToyDraw {
        edges: config.edges(),
        data: BinnedSample::from_counts(&data)?,
        templates,
        truth: (config.signal_yield, config.background_yield),
    })
}
