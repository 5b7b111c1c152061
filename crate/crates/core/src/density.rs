//! Smoothed one-dimensional densities with pdf, cdf and sampling.
//!
//! The estimator is a Gaussian-kernel KDE with Silverman's rule bandwidth
//! and boundary reflection at both support edges, renormalized so that the
//! cdf runs exactly from 0 at the lower edge to 1 at the upper edge.
//! Degenerate data (fewer than two points, or zero spread) is represented
//! as an exact point mass instead of a forced KDE.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Gaussian-kernel density estimate over a bounded support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub support_lo: f64,
    pub support_hi: f64,
    pub bandwidth: f64,
    pub kernel: Kernel,
    /// Retained data points.
    pub points: Vec<f64>,
    /// Mass captured by the single-reflection construction; pdf and cdf are
    /// divided by it so the cdf reaches exactly 1 at the upper edge.
    norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
}

/// Silverman's rule of thumb: h = 0.9 min(sigma, IQR/1.34) n^(-1/5).
/// Falls back to sigma when the IQR is zero. Returns zero for zero-spread
/// data, which [`Kde::fit`] treats as degenerate.
pub fn silverman_bandwidth(data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt();

    let mut sorted = data.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);

    let scale = if iqr > 0.0 {
        sigma.min(iqr / 1.34)
    } else {
        sigma
    };
    0.9 * scale * n.powf(-0.2)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = p * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

impl Kde {
    /// Fits a KDE on `data` over `[support_lo, support_hi]`.
    ///
    /// Requires at least two data points with nonzero spread, all inside
    /// the support; otherwise the data is degenerate and the caller should
    /// fall back to a point mass ([`Density::fit`] does).
    pub fn fit(data: &[f64], support_lo: f64, support_hi: f64) -> Result<Kde> {
        if data.len() < 2 {
            return Err(Error::DegenerateData);
        }
        if !support_lo.is_finite() || !support_hi.is_finite() || support_lo >= support_hi {
            return Err(Error::DegenerateData);
        }
        if data.iter().any(|&x| x < support_lo || x > support_hi) {
            return Err(Error::DataOutsideSupport {
                lo: support_lo,
                hi: support_hi,
            });
        }
        // Zero spread cannot be smoothed; detect it on the raw values, not
        // on the variance, which picks up rounding noise from the mean.
        let min = data.iter().copied().fold(f64::INFINITY, f64::min);
        let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            return Err(Error::DegenerateData);
        }
        let bandwidth = silverman_bandwidth(data);
        if bandwidth.is_nan() || bandwidth <= 0.0 {
            return Err(Error::DegenerateData);
        }
        let mut kde = Kde {
            support_lo,
            support_hi,
            bandwidth,
            kernel: Kernel::Gaussian,
            points: data.to_vec(),
            norm: 1.0,
        };
        kde.norm = kde.raw_cdf(support_hi);
        Ok(kde)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Unreflected kernel-sum cdf over the whole real line.
    fn base_cdf(&self, y: f64) -> f64 {
        let h = self.bandwidth;
        self.points
            .iter()
            .map(|&p| normal_cdf((y - p) / h))
            .sum::<f64>()
            / self.points.len() as f64
    }

    fn base_pdf(&self, y: f64) -> f64 {
        let h = self.bandwidth;
        self.points
            .iter()
            .map(|&p| normal_pdf((y - p) / h))
            .sum::<f64>()
            / (h * self.points.len() as f64)
    }

    /// Reflected cdf before renormalization:
    /// F(x) - F(2 lo - x) + F(2 hi - lo) - F(2 hi - x).
    fn raw_cdf(&self, x: f64) -> f64 {
        let (lo, hi) = (self.support_lo, self.support_hi);
        self.base_cdf(x) - self.base_cdf(2.0 * lo - x) + self.base_cdf(2.0 * hi - lo)
            - self.base_cdf(2.0 * hi - x)
    }

    /// Density at `x`; zero outside the support.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.support_lo || x > self.support_hi {
            return 0.0;
        }
        let (lo, hi) = (self.support_lo, self.support_hi);
        (self.base_pdf(x) + self.base_pdf(2.0 * lo - x) + self.base_pdf(2.0 * hi - x)) / self.norm
    }

    /// Cumulative distribution at `x`; 0 below the support, 1 above it,
    /// monotone non-decreasing in between.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.support_lo {
            return 0.0;
        }
        if x >= self.support_hi {
            return 1.0;
        }
        (self.raw_cdf(x) / self.norm).clamp(0.0, 1.0)
    }

    /// Draws one value: a random retained point plus kernel-scaled Gaussian
    /// noise, reflected once at the support edges. Draws landing outside
    /// even after reflection (the mass removed by renormalization) are
    /// rejected, so the sample distribution matches the cdf exactly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let p = self.points[rng.random_range(0..self.points.len())];
            let noise: f64 = rng.sample(StandardNormal);
            let y = p + self.bandwidth * noise;
            let x = if y < self.support_lo {
                2.0 * self.support_lo - y
            } else if y > self.support_hi {
                2.0 * self.support_hi - y
            } else {
                y
            };
            if x >= self.support_lo && x <= self.support_hi {
                return x;
            }
        }
    }

    /// Model-file invariants checked when loading.
    pub fn check(&self) -> Result<()> {
        if self.bandwidth.is_nan() || self.bandwidth <= 0.0 {
            return Err(Error::ModelFormat("bandwidth must be positive".into()));
        }
        if !self.support_lo.is_finite()
            || !self.support_hi.is_finite()
            || self.support_lo >= self.support_hi
        {
            return Err(Error::ModelFormat("empty support interval".into()));
        }
        if self.points.len() < 2 {
            return Err(Error::ModelFormat("KDE with fewer than 2 points".into()));
        }
        if self
            .points
            .iter()
            .any(|&p| !p.is_finite() || p < self.support_lo || p > self.support_hi)
        {
            return Err(Error::ModelFormat("KDE point outside support".into()));
        }
        Ok(())
    }
}

// The stored `norm` is reconstructible, so it is serialized for exactness
// but re-derived defensively on deserialization via `check_and_rebuild`.
impl Kde {
    fn rebuild_norm(&mut self) {
        self.norm = 1.0;
        self.norm = self.raw_cdf(self.support_hi);
    }
}

/// Minimum fraction of the sample one exact value must hold to be modeled
/// as an atom next to the smoothed remainder.
const ATOM_MIN_WEIGHT: f64 = 0.05;

/// A fitted one-dimensional distribution: a smoothed KDE, an exact point
/// mass for degenerate data, or an atom-plus-KDE mixture for zero-inflated
/// data (night and twilight currents hold much of their mass at exactly
/// zero while the rest spreads continuously).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Density {
    Kde(Kde),
    PointMass { value: f64 },
    Mixture { atom: f64, weight: f64, kde: Kde },
}

impl Density {
    /// Fits data over the given support.
    ///
    /// A single exact value holding at least [`ATOM_MIN_WEIGHT`] of the
    /// sample becomes an atom: with a smoothable remainder the fit is an
    /// atom-plus-KDE mixture, without one an exact point mass (a smoothed
    /// density cannot represent an atom, and night currents are mostly an
    /// atom at zero). Degenerate data (fewer than two points, zero spread)
    /// also falls back to a point mass. Returns the density and whether a
    /// point-mass fallback was taken.
    pub fn fit(data: &[f64], support_lo: f64, support_hi: f64) -> Result<(Density, bool)> {
        if data.is_empty() {
            return Err(Error::DegenerateData);
        }
        let (atom, count) = modal_value(data);
        if count == data.len() {
            return Ok((Density::PointMass { value: atom }, true));
        }
        if count as f64 >= ATOM_MIN_WEIGHT * data.len() as f64 {
            let rest: Vec<f64> = data.iter().copied().filter(|&x| x != atom).collect();
            return match Kde::fit(&rest, support_lo, support_hi) {
                Ok(kde) => Ok((
                    Density::Mixture {
                        atom,
                        weight: count as f64 / data.len() as f64,
                        kde,
                    },
                    false,
                )),
                Err(Error::DegenerateData) => Ok((Density::PointMass { value: atom }, true)),
                Err(e) => Err(e),
            };
        }
        match Kde::fit(data, support_lo, support_hi) {
            Ok(kde) => Ok((Density::Kde(kde), false)),
            Err(Error::DegenerateData) => Ok((Density::PointMass { value: data[0] }, true)),
            Err(e) => Err(e),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Density::Kde(k) => k.pdf(x),
            Density::PointMass { value } => {
                if x == *value {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Density::Mixture { atom, weight, kde } => {
                if x == *atom {
                    f64::INFINITY
                } else {
                    (1.0 - weight) * kde.pdf(x)
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Density::Kde(k) => k.cdf(x),
            Density::PointMass { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            Density::Mixture { atom, weight, kde } => {
                let jump = if x >= *atom { *weight } else { 0.0 };
                jump + (1.0 - weight) * kde.cdf(x)
            }
        }
    }

    /// Left limit of the cdf, differing from [`Density::cdf`] only at atoms.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Density::Kde(k) => k.cdf(x),
            Density::PointMass { value } => {
                if x > *value {
                    1.0
                } else {
                    0.0
                }
            }
            Density::Mixture { atom, weight, kde } => {
                let jump = if x > *atom { *weight } else { 0.0 };
                jump + (1.0 - weight) * kde.cdf(x)
            }
        }
    }

    /// Locations where the cdf jumps.
    pub fn atoms(&self) -> Vec<f64> {
        match self {
            Density::Kde(_) => Vec::new(),
            Density::PointMass { value } => vec![*value],
            Density::Mixture { atom, .. } => vec![*atom],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Density::Kde(k) => k.sample(rng),
            Density::PointMass { value } => *value,
            Density::Mixture { atom, weight, kde } => {
                if rng.random::<f64>() < *weight {
                    *atom
                } else {
                    kde.sample(rng)
                }
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Density::Kde(k) => (k.support_lo, k.support_hi),
            Density::PointMass { value } => (*value, *value),
            Density::Mixture { atom, kde, .. } => {
                (kde.support_lo.min(*atom), kde.support_hi.max(*atom))
            }
        }
    }

    pub fn check_and_rebuild(&mut self) -> Result<()> {
        match self {
            Density::Kde(k) => {
                k.check()?;
                k.rebuild_norm();
            }
            Density::PointMass { .. } => {}
            Density::Mixture { weight, kde, .. } => {
                if !(*weight > 0.0 && *weight < 1.0) {
                    return Err(Error::ModelFormat("mixture weight outside (0, 1)".into()));
                }
                kde.check()?;
                kde.rebuild_norm();
            }
        }
        Ok(())
    }
}

/// Most frequent exact value and its count.
fn modal_value(data: &[f64]) -> (f64, usize) {
    let mut sorted = data.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = (sorted[0], 1usize);
    let mut run = (sorted[0], 1usize);
    for &x in &sorted[1..] {
        if x == run.0 {
            run.1 += 1;
        } else {
            run = (x, 1);
        }
        if run.1 > best.1 {
            best = run;
        }
    }
    best
}
