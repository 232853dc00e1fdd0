//! Transformed likelihoods `Q = -2 ln(L / L_saturated)` for template fits.
//!
//! The two approximate methods replace the per-component template
//! amplitudes of a bin by one common scale factor `β` and solve for it in
//! closed form, so only the yields remain as fit parameters. The exact
//! method keeps one amplitude factor per (bin, component) as an explicit
//! parameter.
//!
//! Bins in which every template is empty carry no information about the
//! yields and are left out of every method, including the degrees of
//! freedom.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use libm::{fabs, log, log1p, sqrt};

use crate::data::{EffectiveCount, TemplateModel};
use crate::error::{Error, Result};

/// Lower bound for the per-(bin, component) factors of the exact method.
pub const EXACT_BETA_LOWER: f64 = 1e-10;

/// Which likelihood to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    /// Poisson-constrained common scale factor per bin.
    Approx,
    /// Gaussian-constrained common scale factor per bin.
    Conway,
    /// Full Barlow-Beeston likelihood with one factor per bin and component.
    Exact,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Approx, Method::Conway, Method::Exact];

    pub fn name(self) -> &'static str {
        match self {
            Method::Approx => "approx",
            Method::Conway => "conway",
            Method::Exact => "exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "approx" => Ok(Method::Approx),
            "conway" => Ok(Method::Conway),
            "exact" => Ok(Method::Exact),
            _ => Err(UnknownMethod),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownMethod;

impl fmt::Display for UnknownMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unknown method (expected one of: approx, conway, exact)")
    }
}

impl core::error::Error for UnknownMethod {}

/// Poisson deviance `2(μ - n - n ln(μ/n))` of one bin, with `n ln n -> 0`
/// at `n = 0`. Negative or NaN input is rejected.
pub fn q_poisson(n: f64, mu: f64) -> Result<f64> {
    if !(n >= 0.0) || n.is_infinite() {
        return Err(Error::InvalidValue {
            what: "n",
            index: 0,
            value: n,
        });
    }
    if !(mu >= 0.0) {
        return Err(Error::InvalidValue {
            what: "mu",
            index: 0,
            value: mu,
        });
    }
    Ok(qp(n, mu))
}

/// Unchecked [`q_poisson`]. Near the saturated point the relative
/// difference form is used so the result stays accurate to a few ulp of
/// `n (μ/n - 1)²`, which keeps finite-difference gradients clean.
#[inline]
pub(crate) fn qp(n: f64, mu: f64) -> f64 {
    if n == 0.0 {
        return 2.0 * mu;
    }
    if !(mu > 0.0) {
        return f64::INFINITY;
    }
    let d = (mu - n) / n;
    if fabs(d) < 0.5 {
        2.0 * n * (d - log1p(d))
    } else {
        2.0 * (mu - n - n * log(mu / n))
    }
}

/// Scale factor minimizing `Q_p(n; β μ0) + Q_p(a; β a)`.
#[inline]
pub fn beta_new(n: f64, a: f64, mu0: f64) -> f64 {
    (n + a) / (mu0 + a)
}

/// Positive root of `β² + (V μ0 - 1) β - V n = 0`, the stationary point of
/// `Q_p(n; β μ0) + (β - 1)² / V`.
#[inline]
pub fn beta_conway(n: f64, mu0: f64, var_beta: f64) -> f64 {
    let b = var_beta * mu0 - 1.0;
    let c = var_beta * n;
    let root = sqrt(b * b + 4.0 * c);
    if b <= 0.0 {
        0.5 * (root - b)
    } else {
        // avoids cancellation when b dominates
        2.0 * c / (b + root)
    }
}

/// Variance of the common scale factor propagated from the template
/// counts: `Σ_k (y_k/M_k)² v_k / (Σ_k y_k a_k / M_k)²` with `v_k = a_k`, or
/// the per-bin sum of squared weights when `weighted`. `None` if the
/// denominator vanishes.
pub fn var_beta(model: &TemplateModel, yields: &[f64], bin: usize, weighted: bool) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (c, &y) in model.components().iter().zip(yields) {
        let r = y / c.norm();
        let v = if weighted {
            c.sample.sumw2()[bin]
        } else {
            c.sample.sumw()[bin]
        };
        num += r * r * v;
        den += r * c.sample.sumw()[bin];
    }
    (den > 0.0).then(|| num / (den * den))
}

/// Per-bin scale factors and Q contributions at one parameter point.
///
/// Bins without template content are reported with `beta = NaN` and a
/// contribution of zero. For the exact method `beta` holds the effective
/// factor `μ/μ0` of the bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaDiagnostics {
    pub beta: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct ActiveBin {
    bin: usize,
    /// data count, or effective count when weighted
    n: f64,
    /// Σw/Σw² of the data, 1 when unweighted
    scale: f64,
    /// pooled template count, or its effective count when weighted
    a: f64,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    k: usize,
    a: f64,
    inv_norm: f64,
}

/// A likelihood bound to a model, mapping a parameter vector to `Q`.
///
/// The parameter vector starts with the `K` yields. The exact method
/// appends one factor per (active bin, component with nonzero template),
/// bin-major.
#[derive(Debug, Clone)]
pub struct CostFunction<'m> {
    model: &'m TemplateModel,
    method: Method,
    weighted: bool,
    ncomp: usize,
    bins: Vec<ActiveBin>,
    // a_k/M_k per active bin, K entries each
    shape: Vec<f64>,
    // v_k/M_k² per active bin (Conway only)
    var_shape: Vec<f64>,
    slots: Vec<Slot>,
    // slot range per active bin (exact only)
    slot_bounds: Vec<usize>,
}

impl<'m> CostFunction<'m> {
    /// Fails with [`Error::WeightedExact`] for a weighted exact likelihood.
    pub fn new(model: &'m TemplateModel, method: Method, weighted: bool) -> Result<Self> {
        if weighted && method == Method::Exact {
            return Err(Error::WeightedExact);
        }
        let ncomp = model.ncomponents();
        let data = model.data();
        let mut bins = Vec::new();
        let mut shape = Vec::new();
        let mut var_shape = Vec::new();
        let mut slots = Vec::new();
        let mut slot_bounds = vec![0];
        for bin in 0..model.nbins() {
            let (a, a2) = model.pooled_template(bin);
            if a == 0.0 {
                continue;
            }
            let (n, scale, a) = if weighted {
                let d = data.effective(bin);
                (d.n_eff, d.scale, EffectiveCount::from_sums(a, a2).n_eff)
            } else {
                (data.sumw()[bin], 1.0, a)
            };
            bins.push(ActiveBin { bin, n, scale, a });
            for (k, c) in model.components().iter().enumerate() {
                let ak = c.sample.sumw()[bin];
                let inv_norm = 1.0 / c.norm();
                shape.push(ak * inv_norm);
                if method == Method::Conway {
                    let vk = if weighted { c.sample.sumw2()[bin] } else { ak };
                    var_shape.push(vk * inv_norm * inv_norm);
                }
                if method == Method::Exact && ak > 0.0 {
                    slots.push(Slot { k, a: ak, inv_norm });
                }
            }
            slot_bounds.push(slots.len());
        }
        Ok(CostFunction {
            model,
            method,
            weighted,
            ncomp,
            bins,
            shape,
            var_shape,
            slots,
            slot_bounds,
        })
    }

    pub fn model(&self) -> &'m TemplateModel {
        self.model
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn weighted(&self) -> bool {
        self.weighted
    }

    pub fn nyields(&self) -> usize {
        self.ncomp
    }

    pub fn nparams(&self) -> usize {
        self.ncomp + self.slots.len()
    }

    /// Bins entering `Q`.
    pub fn active_bins(&self) -> usize {
        self.bins.len()
    }

    /// Active bins minus number of yields.
    pub fn ndof(&self) -> i64 {
        self.bins.len() as i64 - self.ncomp as i64
    }

    /// Zero for yields, [`EXACT_BETA_LOWER`] for nuisance factors.
    pub fn lower_bounds(&self) -> Vec<f64> {
        let mut lo = vec![0.0; self.ncomp];
        lo.resize(self.nparams(), EXACT_BETA_LOWER);
        lo
    }

    /// Equal split of the data total over the yields, factors at 1.
    pub fn default_start(&self) -> Vec<f64> {
        let total = self.model.data().total();
        let mut start = vec![total / self.ncomp as f64; self.ncomp];
        start.resize(self.nparams(), 1.0);
        start
    }

    /// Expands a dense bin-major `nbins x K` array of factors into the
    /// parameter vector of the exact method.
    pub fn exact_params(&self, yields: &[f64], betas: &[f64]) -> Result<Vec<f64>> {
        let expected = self.model.nbins() * self.ncomp;
        if betas.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: betas.len(),
            });
        }
        let mut params = yields.to_vec();
        for (i, ab) in self.bins.iter().enumerate() {
            for slot in &self.slots[self.slot_bounds[i]..self.slot_bounds[i + 1]] {
                let idx = ab.bin * self.ncomp + slot.k;
                let beta = betas[idx];
                if !(beta > 0.0) || !beta.is_finite() {
                    return Err(Error::InvalidValue {
                        what: "beta",
                        index: idx,
                        value: beta,
                    });
                }
                params.push(beta);
            }
        }
        Ok(params)
    }

    /// `Q` at `params`. Returns `+inf` where the model predicts zero for a
    /// nonzero observation.
    pub fn value(&self, params: &[f64]) -> f64 {
        debug_assert_eq!(params.len(), self.nparams());
        let mut total = 0.0;
        for i in 0..self.bins.len() {
            total += self.bin_term(params, i).1;
        }
        total
    }

    /// Per-bin factors and contributions at `params`.
    pub fn diagnostics(&self, params: &[f64]) -> BetaDiagnostics {
        let nbins = self.model.nbins();
        let mut diag = BetaDiagnostics {
            beta: vec![f64::NAN; nbins],
            q: vec![0.0; nbins],
        };
        for i in 0..self.bins.len() {
            let (beta, q) = self.bin_term(params, i);
            let bin = self.bins[i].bin;
            diag.beta[bin] = beta;
            diag.q[bin] = q;
        }
        diag
    }

    #[inline]
    fn mu0(&self, yields: &[f64], i: usize) -> f64 {
        let shape = &self.shape[i * self.ncomp..(i + 1) * self.ncomp];
        shape.iter().zip(yields).map(|(t, y)| t * y).sum()
    }

    #[inline]
    fn bin_term(&self, params: &[f64], i: usize) -> (f64, f64) {
        let yields = &params[..self.ncomp];
        let ActiveBin { n, scale, a, .. } = self.bins[i];
        match self.method {
            Method::Approx => {
                let mu = scale * self.mu0(yields, i);
                let beta = beta_new(n, a, mu);
                (beta, qp(n, beta * mu) + qp(a, beta * a))
            }
            Method::Conway => {
                let mu0 = self.mu0(yields, i);
                if !(mu0 > 0.0) {
                    return (1.0, qp(n, 0.0));
                }
                let vs = &self.var_shape[i * self.ncomp..(i + 1) * self.ncomp];
                let num: f64 = vs.iter().zip(yields).map(|(v, y)| v * y * y).sum();
                let var = num / (mu0 * mu0);
                let mu = scale * mu0;
                let beta = beta_conway(n, mu, var);
                let dev = beta - 1.0;
                (beta, qp(n, beta * mu) + dev * dev / var)
            }
            Method::Exact => {
                let lo = self.slot_bounds[i];
                let betas = &params[self.ncomp + lo..self.ncomp + self.slot_bounds[i + 1]];
                let slots = &self.slots[lo..self.slot_bounds[i + 1]];
                let mut mu = 0.0;
                let mut q = 0.0;
                for (slot, &beta) in slots.iter().zip(betas) {
                    let xi = slot.a * beta;
                    mu += yields[slot.k] * xi * slot.inv_norm;
                    q += qp(slot.a, xi);
                }
                let mu0 = self.mu0(yields, i);
                let beta = if mu0 > 0.0 { mu / mu0 } else { 1.0 };
                (beta, q + qp(n, mu))
            }
        }
    }
}

fn check_yields(model: &TemplateModel, yields: &[f64]) -> Result<()> {
    if yields.len() != model.ncomponents() {
        return Err(Error::DimensionMismatch {
            expected: model.ncomponents(),
            found: yields.len(),
        });
    }
    match yields.iter().position(|y| !(y.is_finite() && *y >= 0.0)) {
        Some(index) => Err(Error::InvalidValue {
            what: "yields",
            index,
            value: yields[index],
        }),
        None => Ok(()),
    }
}

fn profiled(
    model: &TemplateModel,
    yields: &[f64],
    method: Method,
    weighted: bool,
) -> Result<(f64, BetaDiagnostics)> {
    check_yields(model, yields)?;
    let cost = CostFunction::new(model, method, weighted)?;
    Ok((cost.value(yields), cost.diagnostics(yields)))
}

/// Approximate likelihood with Poisson-constrained scale factors.
pub fn q_new(model: &TemplateModel, yields: &[f64]) -> Result<(f64, BetaDiagnostics)> {
    profiled(model, yields, Method::Approx, false)
}

/// Conway's approximate likelihood with Gaussian-constrained scale factors.
pub fn q_conway(model: &TemplateModel, yields: &[f64]) -> Result<(f64, BetaDiagnostics)> {
    profiled(model, yields, Method::Conway, false)
}

/// [`q_new`] with data and templates replaced by effective counts.
pub fn q_new_weighted(model: &TemplateModel, yields: &[f64]) -> Result<(f64, BetaDiagnostics)> {
    profiled(model, yields, Method::Approx, true)
}

/// [`q_conway`] for weighted samples: effective data counts, and the
/// scale-factor variance computed from the templates' sums of squared
/// weights.
pub fn q_conway_weighted(model: &TemplateModel, yields: &[f64]) -> Result<(f64, BetaDiagnostics)> {
    profiled(model, yields, Method::Conway, true)
}

/// Exact likelihood at given yields and a dense bin-major `nbins x K`
/// array of amplitude factors. Entries where the template is empty are
/// ignored.
pub fn q_exact(model: &TemplateModel, yields: &[f64], betas: &[f64]) -> Result<f64> {
    check_yields(model, yields)?;
    let cost = CostFunction::new(model, Method::Exact, false)?;
    let params = cost.exact_params(yields, betas)?;
    Ok(cost.value(&params))
}
