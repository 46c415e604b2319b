//! Estimators and goodness-of-fit tests used by the Monte Carlo checks.
//! All reductions run in slice order, so results are reproducible bit for bit.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::special_fn::{regularized_gamma_p, regularized_gamma_q};

/// Sample mean with its standard error `s/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Empty("mean of an empty sample"));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Ok(Self { mean, std_error: (var / n).sqrt(), count: xs.len() })
    }

    /// `|self − other| / √(se₁² + se₂²)`.
    pub fn z_score(&self, other: &Self) -> f64 {
        let se = (self.std_error * self.std_error + other.std_error * other.std_error).sqrt();
        (self.mean - other.mean).abs() / se
    }

    /// `|mean − target| / se`.
    pub fn z_against(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_error
    }
}

/// Linear-interpolated quantile of already sorted data, `p ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF, with
/// Stephens' small-sample correction of the asymptotic p-value.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if data.is_empty() {
        return Err(Error::Empty("KS test needs data"));
    }
    let mut v: Vec<f64> = data.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d) })
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS test needs two non-empty samples"));
    }
    let mut x: Vec<f64> = a.to_vec();
    let mut y: Vec<f64> = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let se = ne.sqrt();
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival((se + 0.12 + 0.11 / se) * d) })
}

/// Asymptotic two-sample critical value `√(−ln(α/2)/2) · √((n+m)/(nm))`.
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit. Adjacent bins are pooled until each
/// pooled expectation reaches `min_expected`; `ddof` extra degrees of freedom
/// are subtracted for fitted parameters.
pub fn chi_square_gof(observed: &[f64], expected: &[f64], min_expected: f64, ddof: usize) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::InvalidParameter("chi-square needs matching non-empty bins"));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &ex) in observed.iter().zip(expected.iter()) {
        o += ob;
        e += ex;
        if e >= min_expected {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    if pooled.len() < 2 + ddof {
        return Err(Error::InvalidParameter("too few pooled bins for a chi-square test"));
    }
    let statistic: f64 = pooled.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1 - ddof;
    Ok(ChiSquareResult { statistic, dof, p_value: regularized_gamma_q(dof as f64 / 2.0, statistic / 2.0) })
}

/// Sample Pearson correlation and its null standard error `1/√(n−1)`.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidParameter("correlation needs two equal samples of length >= 3"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    Ok((sxy / (sxx * syy).sqrt(), 1.0 / (n - 1.0).sqrt()))
}

/// CDF of `Gamma(shape, rate)`.
pub fn gamma_cdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        regularized_gamma_p(shape, rate * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    extern crate std;
    use rand::{Rng, SeedableRng};

    #[test]
    fn mean_and_quantiles() {
        let m = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(MeanEstimate::from_samples(&[]).is_err());
    }

    #[test]
    fn kolmogorov_distribution_reference_points() {
        // Q(1.3581) ≈ 0.05 and Q(1.6276) ≈ 0.01 are the classical critical values.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((ks_two_sample_critical(1000, 1000, 0.01) - 1.6276 * (2.0f64 / 1000.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn ks_accepts_matching_and_rejects_shifted() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u: std::vec::Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let r = ks_one_sample(&u, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value > 0.01);
        let shifted: std::vec::Vec<f64> = u.iter().map(|x| x * 0.9).collect();
        assert!(ks_one_sample(&shifted, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 1e-6);
        let v: std::vec::Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&u, &v).unwrap().p_value > 0.01);
        assert!(ks_two_sample(&shifted, &v).unwrap().p_value < 1e-6);
    }

    #[test]
    fn chi_square_pools_and_scores() {
        let obs = [18.0, 22.0, 20.0, 19.0, 21.0];
        let exp = [20.0; 5];
        let r = chi_square_gof(&obs, &exp, 5.0, 0).unwrap();
        assert_eq!(r.dof, 4);
        assert!((r.statistic - 0.5).abs() < 1e-12);
        // Reference: survival of chi-square(4) at 0.5 is 0.97350…
        assert!((r.p_value - 0.973_500_978_8).abs() < 1e-8);
        let r = chi_square_gof(&[1.0, 2.0, 30.0, 3.0], &[2.0, 3.0, 25.0, 3.0], 5.0, 0).unwrap();
        assert_eq!(r.dof, 1);
    }

    #[test]
    fn correlation_of_independent_draws_is_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: std::vec::Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let y: std::vec::Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let (r, se) = correlation(&x, &y).unwrap();
        assert!(r.abs() < 3.0 * se);
        let (r, _) = correlation(&x, &x).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }
}
