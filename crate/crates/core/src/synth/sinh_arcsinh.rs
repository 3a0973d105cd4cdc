//! Sinh-arcsinh distributions and the Example 2 settings.
//!
//! Parametrization: `Y = μ + σ·sinh((asinh(W) + skew)/tail)` with `W ~ N(0, 1)`,
//! so `F(y) = Φ(sinh(tail·asinh((y − μ)/σ) − skew))`. At `skew = 0, tail = 1`
//! this is `N(μ, σ²)`; positive `skew` gives right skew and `tail < 1` heavier
//! tails.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{OracleDistribution, SynthError};
use crate::calibrate::CalibrationSet;
use crate::grid::{GaussianModel, GridError, YGrid};
use crate::rng;
use crate::stats::{normal_cdf, normal_pdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinhArcsinhParams {
    pub mu: f64,
    pub sigma: f64,
    pub skew: f64,
    pub tail: f64,
}

impl SinhArcsinhParams {
    pub fn new(mu: f64, sigma: f64, skew: f64, tail: f64) -> Result<Self, SynthError> {
        if !(sigma > 0.0) || !(tail > 0.0) || !mu.is_finite() || !skew.is_finite() {
            return Err(SynthError::InvalidConfig(format!(
                "sinh-arcsinh needs sigma > 0 and tail > 0, got sigma={sigma}, tail={tail}"
            )));
        }
        Ok(Self { mu, sigma, skew, tail })
    }

    fn to_normal(&self, y: f64) -> f64 {
        (self.tail * ((y - self.mu) / self.sigma).asinh() - self.skew).sinh()
    }

    fn from_normal(&self, w: f64) -> f64 {
        self.mu + self.sigma * ((w.asinh() + self.skew) / self.tail).sinh()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        normal_cdf(self.to_normal(y))
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let u = (y - self.mu) / self.sigma;
        let s = self.tail * u.asinh() - self.skew;
        normal_pdf(s.sinh()) * s.cosh() * self.tail / (self.sigma * (1.0 + u * u).sqrt())
    }

    pub fn quantile(&self, q: f64) -> f64 {
        self.from_normal(normal_quantile(q))
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let w: f64 = StandardNormal.sample(rng);
        self.from_normal(w)
    }
}

/// The two misspecification settings of Example 2, each compared with the
/// initial model `N(x, 2²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Example2Setting {
    /// `μ = x, σ = 2 − |x|, skew = x, tail = 1`.
    Skewed,
    /// `μ = x, σ = 2, skew = 0, tail = 1 − x/4`.
    Kurtotic,
}

impl std::str::FromStr for Example2Setting {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skewed" => Ok(Self::Skewed),
            "kurtotic" => Ok(Self::Kurtotic),
            other => Err(SynthError::InvalidInput(format!("unknown Example 2 setting '{other}'"))),
        }
    }
}

/// Feature range of Example 2.
pub const EXAMPLE2_X_RANGE: (f64, f64) = (-1.0, 1.0);
/// Standard deviation of the Example 2 initial model.
pub const EXAMPLE2_INITIAL_SD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example2Oracle {
    pub setting: Example2Setting,
}

impl Example2Oracle {
    pub fn new(setting: Example2Setting) -> Self {
        Self { setting }
    }

    pub fn params_at(&self, x: f64) -> SinhArcsinhParams {
        match self.setting {
            Example2Setting::Skewed => SinhArcsinhParams {
                mu: x,
                sigma: 2.0 - x.abs(),
                skew: x,
                tail: 1.0,
            },
            Example2Setting::Kurtotic => SinhArcsinhParams {
                mu: x,
                sigma: 2.0,
                skew: 0.0,
                tail: 1.0 - x / 4.0,
            },
        }
    }

    /// The misspecified initial model `N(x, 2²)` on `grid`.
    pub fn initial_model(grid: YGrid) -> Result<GaussianModel, GridError> {
        GaussianModel::new(grid, 0.0, vec![1.0], EXAMPLE2_INITIAL_SD)
    }
}

impl OracleDistribution for Example2Oracle {
    fn dim(&self) -> usize {
        1
    }

    fn cdf(&self, y: f64, x: &[f64]) -> f64 {
        self.params_at(x[0]).cdf(y)
    }

    fn pdf(&self, y: f64, x: &[f64]) -> f64 {
        self.params_at(x[0]).pdf(y)
    }

    fn quantile(&self, p: f64, x: &[f64]) -> f64 {
        self.params_at(x[0]).quantile(p)
    }

    fn sample(&self, x: &[f64], rng: &mut dyn RngCore) -> f64 {
        self.params_at(x[0]).sample(rng)
    }
}

/// Draws `n` rows of Example 2 with `X ~ U(−1, 1)`.
pub fn sample_example2(
    setting: Example2Setting,
    n: usize,
    seed: u64,
) -> Result<(CalibrationSet, Example2Oracle), SynthError> {
    if n == 0 {
        return Err(SynthError::InvalidInput("n must be at least 1".into()));
    }
    let oracle = Example2Oracle::new(setting);
    let features = Uniform::new_inclusive(EXAMPLE2_X_RANGE.0, EXAMPLE2_X_RANGE.1)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let mut cal = CalibrationSet::with_capacity(1, n);
    for i in 0..n {
        let mut r = rng::stream(rng::child(seed, i as u64));
        let x = features.sample(&mut r);
        let y = oracle.sample(&[x], &mut r);
        cal.push(&[x], y)?;
    }
    Ok((cal, oracle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_p_value, ks_uniform_statistic};

    #[test]
    fn reduces_to_normal() {
        let p = SinhArcsinhParams::new(0.0, 2.0, 0.0, 1.0).unwrap();
        assert!((p.cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((p.quantile(0.975) - 3.919_927_969).abs() < 1e-6);
        assert!((p.pdf(1.0) - normal_pdf(0.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn skewed_cdf_at_location() {
        let p = SinhArcsinhParams::new(0.0, 1.0, 1.0, 1.0).unwrap();
        let expected = normal_cdf(-(1.0f64).sinh());
        assert!((p.cdf(0.0) - expected).abs() < 1e-15);
        assert!((expected - 0.1199).abs() < 1e-4);
        // Monte Carlo cross-check.
        let mut r = rng::stream(5);
        let n = 1_000_000;
        let below = (0..n).filter(|_| p.sample(&mut r) <= 0.0).count();
        assert!((below as f64 / n as f64 - expected).abs() < 0.001);
    }

    #[test]
    fn quantile_cdf_round_trip() {
        let p = SinhArcsinhParams::new(0.3, 1.4, 0.7, 0.8).unwrap();
        for i in -50..=50 {
            let y = 0.3 + 0.1 * i as f64;
            assert!((p.quantile(p.cdf(y)) - y).abs() < 1e-8, "y={y}");
        }
        for i in 1..100 {
            let q = i as f64 / 100.0;
            assert!((p.cdf(p.quantile(q)) - q).abs() < 1e-9);
        }
    }

    #[test]
    fn pdf_integrates_to_cdf() {
        let p = SinhArcsinhParams::new(-0.5, 1.5, -0.8, 0.75).unwrap();
        // Simpson rule between two points, compared with the CDF difference.
        let (a, b) = (-3.0, 2.0);
        let m = 4000;
        let h = (b - a) / m as f64;
        let mut s = p.pdf(a) + p.pdf(b);
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * p.pdf(a + k as f64 * h);
        }
        assert!((s * h / 3.0 - (p.cdf(b) - p.cdf(a))).abs() < 1e-10);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SinhArcsinhParams::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(SinhArcsinhParams::new(0.0, 1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn example2_reference_points() {
        let skewed = Example2Oracle::new(Example2Setting::Skewed);
        assert!((skewed.quantile(0.5, &[1.0]) - (1.0 + 1.0f64.sinh())).abs() < 1e-9);
        assert!((skewed.quantile(0.5, &[1.0]) - 2.1752).abs() < 1e-4);
        let kurtotic = Example2Oracle::new(Example2Setting::Kurtotic);
        for y in [-3.0, 0.5, 2.0] {
            let normal = normal_cdf(y / 2.0);
            assert!((skewed.cdf(y, &[0.0]) - normal).abs() < 1e-15);
            assert!((kurtotic.cdf(y, &[0.0]) - normal).abs() < 1e-15);
        }
    }

    #[test]
    fn skewed_setting_is_antisymmetric() {
        let o = Example2Oracle::new(Example2Setting::Skewed);
        for x in [-1.0, -0.4, 0.2, 0.9] {
            for y in [-4.0, -1.0, 0.3, 2.5] {
                assert!((o.cdf(y, &[x]) - (1.0 - o.cdf(-y, &[-x]))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn oracle_round_trip_sweep() {
        for setting in [Example2Setting::Skewed, Example2Setting::Kurtotic] {
            let o = Example2Oracle::new(setting);
            for xi in -10..=10 {
                let x = [xi as f64 / 10.0];
                for pi in 1..=99 {
                    let p = pi as f64 / 100.0;
                    assert!((o.cdf(o.quantile(p, &x), &x) - p).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn samples_are_deterministic_and_pit_uniform() {
        for setting in [Example2Setting::Skewed, Example2Setting::Kurtotic] {
            let (a, oracle) = sample_example2(setting, 10_000, 3).unwrap();
            let (b, _) = sample_example2(setting, 10_000, 3).unwrap();
            assert_eq!(a.ys(), b.ys());
            assert!(a.features().iter().all(|x| (-1.0..=1.0).contains(x)));
            let pits: Vec<f64> = a.iter().map(|(x, y)| oracle.cdf(y, x)).collect();
            assert!(ks_p_value(ks_uniform_statistic(&pits), pits.len()) > 0.01);
        }
    }

    #[test]
    fn setting_parses() {
        assert_eq!("skewed".parse::<Example2Setting>().unwrap(), Example2Setting::Skewed);
        assert!("other".parse::<Example2Setting>().is_err());
    }
}
