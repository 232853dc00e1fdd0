//! Bounded quasi-Newton minimization, covariance from the finite-difference
//! Hessian, and goodness-of-fit reporting.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::error::{Error, Result};
use crate::likelihood::{BetaDiagnostics, CostFunction};
use crate::linalg::Matrix;
use crate::math::chi2_sf;

/// A scalar function of a parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

impl Objective for CostFunction<'_> {
    fn dim(&self) -> usize {
        self.nparams()
    }

    fn value(&self, x: &[f64]) -> f64 {
        CostFunction::value(self, x)
    }
}

/// Adapter turning a closure into an [`Objective`].
pub struct FnObjective<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Counts evaluations and computes finite-difference derivatives.
struct Probe<'a, O: ?Sized> {
    f: &'a O,
    count: usize,
    buf: Vec<f64>,
}

impl<'a, O: Objective + ?Sized> Probe<'a, O> {
    fn new(f: &'a O) -> Self {
        Probe {
            f,
            count: 0,
            buf: vec![0.0; f.dim()],
        }
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        self.count += 1;
        self.f.value(x)
    }

    fn value_at_offsets(&mut self, x: &[f64], offsets: &[(usize, f64)]) -> f64 {
        self.buf.copy_from_slice(x);
        for &(i, dx) in offsets {
            self.buf[i] += dx;
        }
        self.count += 1;
        self.f.value(&self.buf)
    }

    /// Central differences with step `∛ε·max(1, |x|)`; forward differences
    /// with step `√ε·max(1, |x|)` where the central stencil would cross a
    /// lower bound.
    fn gradient(&mut self, x: &[f64], fx: f64, lower: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() {
            let scale = fabs(x[i]).max(1.0);
            let h = CBRT_EPS * scale;
            if x[i] - h >= lower[i] {
                let fp = self.value_at_offsets(x, &[(i, h)]);
                let fm = self.value_at_offsets(x, &[(i, -h)]);
                g[i] = (fp - fm) / (2.0 * h);
            } else {
                let h = SQRT_EPS * scale;
                let fp = self.value_at_offsets(x, &[(i, h)]);
                g[i] = (fp - fx) / h;
            }
        }
        g
    }

    /// Diagonal of the inverse Hessian from second differences, falling back
    /// to 1 where the curvature is not positive.
    fn inverse_diagonal(&mut self, x: &[f64], fx: f64, lower: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let (h, o) = hessian_step(x, lower, i);
                let (fm, fc, fp) = if o == 0.0 {
                    (
                        self.value_at_offsets(x, &[(i, -h)]),
                        fx,
                        self.value_at_offsets(x, &[(i, h)]),
                    )
                } else {
                    (
                        fx,
                        self.value_at_offsets(x, &[(i, h)]),
                        self.value_at_offsets(x, &[(i, 2.0 * h)]),
                    )
                };
                let d2 = (fp - 2.0 * fc + fm) / (h * h);
                if d2 > 0.0 && d2.is_finite() {
                    1.0 / d2
                } else {
                    1.0
                }
            })
            .collect()
    }
}

const SQRT_EPS: f64 = 1.4901161193847656e-8;
// ∛ε for f64
const CBRT_EPS: f64 = 6.0554544523933395e-6;

/// Step and stencil shift for second differences in coordinate `i`: the
/// stencil `{-h, 0, +h}` is moved to `{0, h, 2h}` next to a lower bound.
fn hessian_step(x: &[f64], lower: &[f64], i: usize) -> (f64, f64) {
    let h = CBRT_EPS * fabs(x[i]).max(1.0);
    let shift = if x[i] - h < lower[i] { h } else { 0.0 };
    (h, shift)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn is_blocked(x: f64, lower: f64, g: f64) -> bool {
    x <= lower && g > 0.0
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64]) -> f64 {
    let s: f64 = (0..x.len())
        .filter(|&i| !is_blocked(x[i], lower[i], g[i]))
        .map(|i| g[i] * g[i])
        .sum();
    sqrt(s)
}

/// Result of [`Minimizer::minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fval: f64,
    pub converged: bool,
    pub n_evaluations: usize,
    /// Norm of the gradient projected onto the free coordinates.
    pub gradient_norm: f64,
}

/// BFGS with lower bounds, finite-difference gradients and a projected
/// backtracking line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimizer {
    pub max_evaluations: usize,
    /// Converged once the last accepted step changed the objective by
    /// less than this...
    pub ftol: f64,
    /// ...and the projected gradient norm is below this.
    pub gtol: f64,
}

impl Default for Minimizer {
    fn default() -> Self {
        Minimizer {
            max_evaluations: 100_000,
            ftol: 1e-6,
            gtol: 1e-4,
        }
    }
}

enum Outcome {
    Converged,
    Stalled,
    Budget,
}

impl Minimizer {
    pub fn minimize<O: Objective + ?Sized>(
        &self,
        f: &O,
        start: &[f64],
        lower: &[f64],
    ) -> Result<Minimum> {
        let n = f.dim();
        for len in [start.len(), lower.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if let Some(index) = (0..n).find(|&i| !(start[i] >= lower[i])) {
            return Err(Error::StartOutOfBounds { index });
        }
        let mut probe = Probe::new(f);
        let mut x = start.to_vec();
        let mut fx = probe.value(&x);
        if !fx.is_finite() {
            return Err(Error::NonFiniteStart);
        }

        let mut restarted = false;
        let (outcome, gnorm) = loop {
            let (outcome, gnorm) = self.descend(&mut probe, &mut x, &mut fx, lower);
            match outcome {
                Outcome::Stalled if !restarted => {
                    // one restart from a slightly perturbed point
                    restarted = true;
                    let mut y = x.clone();
                    for (yi, lo) in y.iter_mut().zip(lower) {
                        *yi = (*yi + 1e-4 * fabs(*yi).max(1.0)).max(*lo);
                    }
                    let fy = probe.value(&y);
                    if fy.is_finite() {
                        x = y;
                        fx = fy;
                    }
                }
                _ => break (outcome, gnorm),
            }
        };
        Ok(Minimum {
            x,
            fval: fx,
            converged: matches!(outcome, Outcome::Converged),
            n_evaluations: probe.count,
            gradient_norm: gnorm,
        })
    }

    fn descend<O: Objective + ?Sized>(
        &self,
        probe: &mut Probe<'_, O>,
        x: &mut Vec<f64>,
        fx: &mut f64,
        lower: &[f64],
    ) -> (Outcome, f64) {
        let n = x.len();
        let mut g = probe.gradient(x, *fx, lower);
        let mut hinv = Matrix::from_diagonal(&probe.inverse_diagonal(x, *fx, lower));
        let mut fresh = true;
        let mut last_change = 0.0;
        loop {
            let gnorm = projected_gradient_norm(x, &g, lower);
            if gnorm < self.gtol && last_change < self.ftol {
                return (Outcome::Converged, gnorm);
            }
            if probe.count >= self.max_evaluations {
                return (Outcome::Budget, gnorm);
            }

            let free: Vec<bool> = (0..n).map(|i| !is_blocked(x[i], lower[i], g[i])).collect();
            let mut d = vec![0.0; n];
            for i in (0..n).filter(|&i| free[i]) {
                let row = hinv.row(i);
                d[i] = -(0..n)
                    .filter(|&j| free[j])
                    .map(|j| row[j] * g[j])
                    .sum::<f64>();
            }
            let slope = dot(&g, &d);
            if !(slope < 0.0) {
                if fresh {
                    return (Outcome::Stalled, gnorm);
                }
                hinv = Matrix::from_diagonal(&probe.inverse_diagonal(x, *fx, lower));
                fresh = true;
                continue;
            }

            let Some((x_new, f_new)) = line_search(probe, x, *fx, &g, &d, lower) else {
                if gnorm < self.gtol {
                    return (Outcome::Converged, gnorm);
                }
                if fresh {
                    return (Outcome::Stalled, gnorm);
                }
                hinv = Matrix::from_diagonal(&probe.inverse_diagonal(x, *fx, lower));
                fresh = true;
                continue;
            };

            let g_new = probe.gradient(&x_new, f_new, lower);
            let s: Vec<f64> = x_new.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * sqrt(dot(&s, &s) * dot(&y, &y)) {
                bfgs_update(&mut hinv, &s, &y, sy);
                fresh = false;
            }
            last_change = *fx - f_new;
            *x = x_new;
            *fx = f_new;
            g = g_new;
        }
    }
}

/// Inverse-Hessian BFGS update
/// `H += (sᵀy + yᵀHy) ssᵀ/(sᵀy)² - (Hy sᵀ + s yᵀH)/sᵀy`.
fn bfgs_update(h: &mut Matrix, s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let hy = h.mul_vec(y);
    let yhy = dot(y, &hy);
    let a = (sy + yhy) / (sy * sy);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] += a * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
    }
}

/// Armijo backtracking along the path `max(lower, x + t d)`.
fn line_search<O: Objective + ?Sized>(
    probe: &mut Probe<'_, O>,
    x: &[f64],
    fx: f64,
    g: &[f64],
    d: &[f64],
    lower: &[f64],
) -> Option<(Vec<f64>, f64)> {
    const ARMIJO: f64 = 1e-4;
    let mut t = 1.0;
    for _ in 0..60 {
        let xt: Vec<f64> = (0..x.len())
            .map(|i| (x[i] + t * d[i]).max(lower[i]))
            .collect();
        let moved: Vec<f64> = xt.iter().zip(x).map(|(a, b)| a - b).collect();
        if moved.iter().all(|m| *m == 0.0) {
            return None;
        }
        let decrease = dot(g, &moved);
        let ft = probe.value(&xt);
        if ft.is_finite() && ft <= fx + ARMIJO * decrease && decrease < 0.0 {
            return Some((xt, ft));
        }
        // quadratic interpolation along the unprojected ray, safeguarded
        let slope = dot(g, d);
        let mut next = 0.5 * t;
        if ft.is_finite() {
            let denom = 2.0 * (ft - fx - slope * t);
            if denom > 0.0 {
                next = (-slope * t * t / denom).clamp(0.1 * t, 0.5 * t);
            }
        } else {
            next = 0.1 * t;
        }
        t = next;
    }
    None
}

/// Covariance `2 H⁻¹` from the central finite-difference Hessian of `f` at
/// `at`, restricted to the leading `block` parameters. The inverse is taken
/// over all parameters, so nuisance parameters are profiled. `None` if the
/// Hessian is not positive definite.
pub fn hesse<O: Objective + ?Sized>(
    f: &O,
    at: &[f64],
    lower: &[f64],
    block: usize,
) -> Option<Matrix> {
    hesse_counted(f, at, lower, block).0
}

fn hesse_counted<O: Objective + ?Sized>(
    f: &O,
    at: &[f64],
    lower: &[f64],
    block: usize,
) -> (Option<Matrix>, usize) {
    let n = at.len();
    let mut probe = Probe::new(f);
    let f0 = probe.value(at);
    let steps: Vec<(f64, f64)> = (0..n).map(|i| hessian_step(at, lower, i)).collect();
    let mut hess = Matrix::zeros(n);
    for i in 0..n {
        let (h, o) = steps[i];
        let fc = if o == 0.0 {
            f0
        } else {
            probe.value_at_offsets(at, &[(i, o)])
        };
        let fp = probe.value_at_offsets(at, &[(i, o + h)]);
        let fm = probe.value_at_offsets(at, &[(i, o - h)]);
        hess[(i, i)] = (fp - 2.0 * fc + fm) / (h * h);
        for j in 0..i {
            let (hj, oj) = steps[j];
            let mut corner = |si: f64, sj: f64| {
                probe.value_at_offsets(at, &[(i, o + si * h), (j, oj + sj * hj)])
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess.symmetrize();
    let cov = hess.inverse_spd().map(|mut inv| {
        inv.scale(2.0);
        let mut block = inv.leading_block(block);
        block.symmetrize();
        block
    });
    (cov, probe.count)
}

/// Outcome of a template fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub yields: Vec<f64>,
    /// Square roots of the covariance diagonal; NaN without covariance.
    pub yield_errors: Vec<f64>,
    pub covariance: Option<Matrix>,
    pub qmin: f64,
    pub ndof: i64,
    /// Minimizer converged and the Hessian is positive definite.
    pub converged: bool,
    pub n_evaluations: usize,
    pub betas: BetaDiagnostics,
    /// Fitted per-(bin, component) factors of the exact method, empty
    /// otherwise.
    pub nuisance: Vec<f64>,
}

/// Fits from [`CostFunction::default_start`].
pub fn fit(cost: &CostFunction<'_>) -> Result<FitResult> {
    fit_from(cost, &cost.default_start(), &Minimizer::default())
}

pub fn fit_from(
    cost: &CostFunction<'_>,
    start: &[f64],
    minimizer: &Minimizer,
) -> Result<FitResult> {
    let lower = cost.lower_bounds();
    let min = minimizer.minimize(cost, start, &lower)?;
    let k = cost.nyields();
    let (covariance, hesse_evals) = hesse_counted(cost, &min.x, &lower, k);
    let yield_errors = match &covariance {
        Some(c) => c.diagonal().into_iter().map(sqrt).collect(),
        None => vec![f64::NAN; k],
    };
    Ok(FitResult {
        yields: min.x[..k].to_vec(),
        yield_errors,
        converged: min.converged && covariance.is_some(),
        covariance,
        qmin: min.fval,
        ndof: cost.ndof(),
        n_evaluations: min.n_evaluations + hesse_evals,
        betas: cost.diagnostics(&min.x),
        nuisance: min.x[k..].to_vec(),
    })
}

/// Upper-tail chi-square probability of `qmin` at `ndof` degrees of freedom.
pub fn gof(result: &FitResult) -> Result<f64> {
    if result.ndof <= 0 {
        return Err(Error::NoDegreesOfFreedom { ndof: result.ndof });
    }
    chi2_sf(result.qmin, result.ndof as f64).ok_or(Error::NoDegreesOfFreedom { ndof: result.ndof })
}
