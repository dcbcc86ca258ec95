//! Reductions and small statistical tests used by the Monte-Carlo checks.
//!
//! Every reduction runs serially over values already collected in path
//! order, so results do not depend on how the paths were scheduled.

use num_complex::Complex64;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Neumaier-compensated sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    neumaier_sum(values.iter().copied()) / values.len() as f64
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub se: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub second_moment: Option<f64>,
}

impl MCEstimate {
    pub fn from_samples(samples: &[f64], dt: f64) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InsufficientSamples { required: 2, got: n });
        }
        let m = mean(samples);
        let ss = neumaier_sum(samples.iter().map(|x| (x - m) * (x - m)));
        let var = ss / (n - 1) as f64;
        Ok(Self {
            mean: m,
            se: (var / n as f64).sqrt(),
            n_paths: n,
            dt,
            second_moment: Some(neumaier_sum(samples.iter().map(|x| x * x)) / n as f64),
        })
    }

    /// Sample variance (unbiased).
    pub fn sample_variance(&self) -> f64 {
        self.se * self.se * self.n_paths as f64
    }

    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if self.se > 0.0 {
            diff / self.se
        } else if diff.abs() <= 1e-12 * target.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY * diff.signum()
        }
    }

    /// `|mean - target| <= k SE`; a zero-SE estimate must match to rounding.
    pub fn within(&self, target: f64, k: f64) -> bool {
        self.z_score(target).abs() <= k
    }
}

/// Complex mean, reported component-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexEstimate {
    pub re: MCEstimate,
    pub im: MCEstimate,
}

impl ComplexEstimate {
    pub fn from_samples(samples: &[Complex64], dt: f64) -> Result<Self> {
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        Ok(Self {
            re: MCEstimate::from_samples(&re, dt)?,
            im: MCEstimate::from_samples(&im, dt)?,
        })
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.re.mean, self.im.mean)
    }

    pub fn z_score(&self, target: Complex64) -> f64 {
        let a = self.re.z_score(target.re);
        let b = self.im.z_score(target.im);
        if a.abs() >= b.abs() {
            a
        } else {
            b
        }
    }

    pub fn within(&self, target: Complex64, k: f64) -> bool {
        self.re.within(target.re, k) && self.im.within(target.im, k)
    }
}

/// Covariance `E[AB] - E[A]E[B]` (no conjugation) with a delta-method SE:
/// the estimate is the mean of `(A - mean A)(B - mean B)`.
pub fn covariance_estimate(a: &[Complex64], b: &[Complex64], dt: f64) -> Result<ComplexEstimate> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "covariance of {} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: n });
    }
    let ma = complex_mean(a);
    let mb = complex_mean(b);
    let scale = n as f64 / (n - 1) as f64;
    let prods: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb) * scale)
        .collect();
    ComplexEstimate::from_samples(&prods, dt)
}

pub fn complex_mean(values: &[Complex64]) -> Complex64 {
    let n = values.len() as f64;
    Complex64::new(
        neumaier_sum(values.iter().map(|z| z.re)) / n,
        neumaier_sum(values.iter().map(|z| z.im)) / n,
    )
}

/// Kolmogorov limiting survival function `Q(x) = 2 sum (-1)^(k-1) exp(-2 k^2 x^2)`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsResult {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

fn stephens(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS test against an arbitrary CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: n });
    }
    let v = sorted(samples);
    let nf = n as f64;
    let mut d = 0.0_f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: stephens(d, nf),
        n,
    })
}

/// One-sample KS test against `N(mean, sd^2)`.
pub fn ks_normal(samples: &[f64], mean: f64, sd: f64) -> Result<KsResult> {
    if sd <= 0.0 {
        // point mass: pass iff every sample sits on it
        let d = if samples.iter().all(|&x| (x - mean).abs() <= 1e-12 * mean.abs().max(1.0)) {
            0.0
        } else {
            1.0
        };
        return Ok(KsResult {
            statistic: d,
            p_value: if d == 0.0 { 1.0 } else { 0.0 },
            n: samples.len(),
        });
    }
    let dist = Normal::new(mean, sd).map_err(|e| Error::Degenerate(e.to_string()))?;
    ks_one_sample(samples, |x| dist.cdf(x))
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (n, m) = (a.len(), b.len());
    if n < 2 || m < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            got: n.min(m),
        });
    }
    let (x, y) = (sorted(a), sorted(b));
    let (nf, mf) = (n as f64, m as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0_f64;
    while i < n && j < m {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nf - j as f64 / mf).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: stephens(d, nf * mf / (nf + mf)),
        n: n.min(m),
    })
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::GridMismatch(format!("{n} abscissae vs {} ordinates", y.len())));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: n });
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx = neumaier_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae equal".into()));
    }
    let sxy = neumaier_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss = neumaier_sum(
            x.iter()
                .zip(y)
                .map(|(a, b)| (b - intercept - slope * a).powi(2)),
        );
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
    })
}
