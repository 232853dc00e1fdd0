//! Histogram-shaped containers for data and templates.
//!
//! Every sample stores the per-bin sum of weights and sum of squared
//! weights. Unweighted samples have both equal. Validation happens at
//! construction; everything downstream relies on the invariants.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Per-bin sums of weights and squared weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSample {
    sumw: Vec<f64>,
    sumw2: Vec<f64>,
}

impl BinnedSample {
    /// Unweighted sample from per-bin counts.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        Self::from_sums(counts.to_vec(), counts.to_vec())
    }

    pub fn from_sums(sumw: Vec<f64>, sumw2: Vec<f64>) -> Result<Self> {
        if sumw.is_empty() {
            return Err(Error::NoBins);
        }
        if sumw.len() != sumw2.len() {
            return Err(Error::LengthMismatch {
                expected: sumw.len(),
                found: sumw2.len(),
            });
        }
        check_nonnegative("sumw", &sumw)?;
        check_nonnegative("sumw2", &sumw2)?;
        if let Some(index) = sumw
            .iter()
            .zip(&sumw2)
            .position(|(&w, &w2)| w == 0.0 && w2 != 0.0)
        {
            return Err(Error::InconsistentBin { index });
        }
        Ok(BinnedSample { sumw, sumw2 })
    }

    /// Weighted sample from the individual weights falling into each bin.
    /// Weights must be nonnegative.
    pub fn from_weights<B, W>(bins: B) -> Result<Self>
    where
        B: IntoIterator<Item = W>,
        W: IntoIterator<Item = f64>,
    {
        let (sumw, sumw2) = bins
            .into_iter()
            .map(|ws| {
                ws.into_iter()
                    .fold((0.0, 0.0), |(s, s2), w| (s + w, s2 + w * w))
            })
            .unzip();
        Self::from_sums(sumw, sumw2)
    }

    pub fn nbins(&self) -> usize {
        self.sumw.len()
    }

    pub fn sumw(&self) -> &[f64] {
        &self.sumw
    }

    pub fn sumw2(&self) -> &[f64] {
        &self.sumw2
    }

    pub fn total(&self) -> f64 {
        self.sumw.iter().sum()
    }

    /// True when every bin has `sumw2 == sumw`, i.e. unit weights.
    pub fn is_unweighted(&self) -> bool {
        self.sumw == self.sumw2
    }

    /// Effective count and scale factor of one bin. Panics if out of range.
    pub fn effective(&self, bin: usize) -> EffectiveCount {
        EffectiveCount::from_sums(self.sumw[bin], self.sumw2[bin])
    }
}

fn check_nonnegative(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        Some(index) => Err(Error::InvalidValue {
            what,
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Equivalent unweighted count `(Σw)²/Σw²` and the factor `Σw/Σw²` that maps
/// a sum of weights onto it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCount {
    pub n_eff: f64,
    pub scale: f64,
}

impl EffectiveCount {
    /// Empty bins map to `n_eff = 0, scale = 1`.
    pub fn from_sums(sumw: f64, sumw2: f64) -> Self {
        if sumw2 == 0.0 {
            return EffectiveCount {
                n_eff: 0.0,
                scale: 1.0,
            };
        }
        if sumw == sumw2 {
            return EffectiveCount {
                n_eff: sumw,
                scale: 1.0,
            };
        }
        let scale = sumw / sumw2;
        EffectiveCount {
            n_eff: sumw * scale,
            scale,
        }
    }
}

/// One named template component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub sample: BinnedSample,
    norm: f64,
}

impl Component {
    /// Total template content `M_k`.
    pub fn norm(&self) -> f64 {
        self.norm
    }
}

/// Data plus `K` template components sharing one binning.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateModel {
    edges: Vec<f64>,
    data: BinnedSample,
    components: Vec<Component>,
}

impl TemplateModel {
    pub fn new(
        edges: Vec<f64>,
        data: BinnedSample,
        components: Vec<(String, BinnedSample)>,
    ) -> Result<Self> {
        let nbins = data.nbins();
        if edges.len() != nbins + 1 {
            return Err(Error::LengthMismatch {
                expected: nbins + 1,
                found: edges.len(),
            });
        }
        if let Some(i) = edges.iter().position(|e| !e.is_finite()) {
            return Err(Error::EdgesNotIncreasing { index: i });
        }
        if let Some(i) = edges.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::EdgesNotIncreasing { index: i + 1 });
        }
        if components.is_empty() {
            return Err(Error::NoComponents);
        }
        let mut out = Vec::with_capacity(components.len());
        for (k, (name, sample)) in components.into_iter().enumerate() {
            if sample.nbins() != nbins {
                return Err(Error::LengthMismatch {
                    expected: nbins,
                    found: sample.nbins(),
                });
            }
            let norm = sample.total();
            if !(norm > 0.0) {
                return Err(Error::EmptyTemplate { component: k });
            }
            out.push(Component { name, sample, norm });
        }
        Ok(TemplateModel {
            edges,
            data,
            components: out,
        })
    }

    /// Uniform binning over `[lo, hi]`.
    pub fn uniform_edges(nbins: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..=nbins)
            .map(|i| lo + (hi - lo) * i as f64 / nbins as f64)
            .collect()
    }

    pub fn nbins(&self) -> usize {
        self.data.nbins()
    }

    pub fn ncomponents(&self) -> usize {
        self.components.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn data(&self) -> &BinnedSample {
        &self.data
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &Component {
        &self.components[k]
    }

    /// True if data or any template carries non-unit weights.
    pub fn is_weighted(&self) -> bool {
        !self.data.is_unweighted() || self.components.iter().any(|c| !c.sample.is_unweighted())
    }

    /// Template sum of weights over all components in one bin.
    pub fn pooled_template(&self, bin: usize) -> (f64, f64) {
        self.components.iter().fold((0.0, 0.0), |(s, s2), c| {
            (s + c.sample.sumw()[bin], s2 + c.sample.sumw2()[bin])
        })
    }

    /// Number of bins in which at least one template is nonzero.
    pub fn active_bins(&self) -> usize {
        (0..self.nbins())
            .filter(|&b| self.pooled_template(b).0 > 0.0)
            .count()
    }

    /// Expectation `Σ_k y_k a_k / M_k` in one bin before template scaling.
    pub fn mu0(&self, yields: &[f64], bin: usize) -> f64 {
        debug_assert_eq!(yields.len(), self.ncomponents());
        self.components
            .iter()
            .zip(yields)
            .map(|(c, y)| y * c.sample.sumw()[bin] / c.norm)
            .sum()
    }

    /// Same model with components reordered: new component `i` is old
    /// component `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> TemplateModel {
        TemplateModel {
            edges: self.edges.clone(),
            data: self.data.clone(),
            components: order.iter().map(|&k| self.components[k].clone()).collect(),
        }
    }
}
