//! Example 1: two unobserved groups with different spreads.
//!
//! `X₀ ~ Bernoulli(minority_fraction)` marks the minority group and is not
//! part of the features; `X₁, X₂ ~ U(lo, hi)` independently. With `ε ~ N(0, 1)`,
//!
//! `Y = branch(X₀)·gap·X₁·1{X₁ > 0} + scale(X₀)·ε`,
//!
//! where the majority takes `branch = +1` and the minority `branch = −1`. For
//! `X₁ > 0` the two branches separate and `Y | X` is bimodal; for `X₁ ≤ 0` it is a
//! unimodal scale mixture. `X₀` is independent of the features, so the group
//! posterior equals the prior.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{bisect_quantile, OracleDistribution, SynthError};
use crate::calibrate::CalibrationSet;
use crate::rng;
use crate::stats::{normal_cdf, normal_pdf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoGroupConfig {
    pub minority_fraction: f64,
    pub majority_scale: f64,
    pub minority_scale: f64,
    pub branch_gap: f64,
    pub x_range: (f64, f64),
}

impl Default for TwoGroupConfig {
    fn default() -> Self {
        Self {
            minority_fraction: 0.2,
            majority_scale: 1.0,
            minority_scale: 3.0,
            branch_gap: 1.0,
            x_range: (-5.0, 5.0),
        }
    }
}

impl TwoGroupConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(self.minority_fraction > 0.0 && self.minority_fraction < 1.0) {
            return bad(format!("minority_fraction must lie in (0, 1), got {}", self.minority_fraction));
        }
        if !(self.majority_scale > 0.0) || !(self.minority_scale > self.majority_scale) {
            return bad("scales must satisfy 0 < majority_scale < minority_scale".into());
        }
        if !self.branch_gap.is_finite() {
            return bad("branch_gap must be finite".into());
        }
        if !(self.x_range.0 < self.x_range.1) {
            return bad(format!("empty x_range {:?}", self.x_range));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoGroupOracle {
    pub config: TwoGroupConfig,
}

impl TwoGroupOracle {
    pub fn new(config: TwoGroupConfig) -> Result<Self, SynthError> {
        config.validate()?;
        Ok(Self { config })
    }

    /// `(weight, mean, sd)` of the majority and minority components at `x`.
    pub fn components(&self, x: &[f64]) -> [(f64, f64, f64); 2] {
        let c = &self.config;
        let shift = if x[0] > 0.0 { c.branch_gap * x[0] } else { 0.0 };
        [
            (1.0 - c.minority_fraction, shift, c.majority_scale),
            (c.minority_fraction, -shift, c.minority_scale),
        ]
    }
}

impl OracleDistribution for TwoGroupOracle {
    fn dim(&self) -> usize {
        2
    }

    fn cdf(&self, y: f64, x: &[f64]) -> f64 {
        self.components(x)
            .iter()
            .map(|&(w, m, s)| w * normal_cdf((y - m) / s))
            .sum()
    }

    fn pdf(&self, y: f64, x: &[f64]) -> f64 {
        self.components(x)
            .iter()
            .map(|&(w, m, s)| w * normal_pdf((y - m) / s) / s)
            .sum()
    }

    fn quantile(&self, p: f64, x: &[f64]) -> f64 {
        let p = p.clamp(1e-300, 1.0 - 1e-16);
        bisect_quantile(|y| self.cdf(y, x), p, 0.0, self.config.minority_scale)
    }

    fn sample(&self, x: &[f64], rng: &mut dyn RngCore) -> f64 {
        let minority = rng.random::<f64>() < self.config.minority_fraction;
        let [maj, min] = self.components(x);
        let (_, m, s) = if minority { min } else { maj };
        let e: f64 = StandardNormal.sample(rng);
        m + s * e
    }
}

/// Draws `n` rows of Example 1.
pub fn sample_example1(
    config: &TwoGroupConfig,
    n: usize,
    seed: u64,
) -> Result<(CalibrationSet, TwoGroupOracle), SynthError> {
    if n == 0 {
        return Err(SynthError::InvalidInput("n must be at least 1".into()));
    }
    let oracle = TwoGroupOracle::new(config.clone())?;
    let (lo, hi) = config.x_range;
    let mut cal = CalibrationSet::with_capacity(2, n);
    for i in 0..n {
        let mut r = rng::stream(rng::child(seed, i as u64));
        let x = [lo + (hi - lo) * r.random::<f64>(), lo + (hi - lo) * r.random::<f64>()];
        let y = oracle.sample(&x, &mut r);
        cal.push(&x, y)?;
    }
    Ok((cal, oracle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{calpit_interval, hpd_set, recalibrate_cdf, IdentityMap};
    use crate::grid::{cdf_from_density, GridDensity, YGrid};
    use crate::stats::{ks_p_value, ks_uniform_statistic};

    fn oracle() -> TwoGroupOracle {
        TwoGroupOracle::new(TwoGroupConfig::default()).unwrap()
    }

    fn oracle_density(o: &TwoGroupOracle, x: &[f64], grid: &YGrid) -> GridDensity {
        let v = grid.points().iter().map(|&y| o.pdf(y, x)).collect();
        GridDensity::new(grid.clone(), v).unwrap().renormalized().unwrap()
    }

    #[test]
    fn weights_sum_to_one() {
        let o = oracle();
        for x in [[-3.0, 1.0], [0.0, 0.0], [4.5, -2.0]] {
            let w: f64 = o.components(&x).iter().map(|c| c.0).sum();
            assert!((w - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn round_trip() {
        let o = oracle();
        for x in [[-2.0, 0.0], [0.5, 1.0], [5.0, 3.0]] {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                assert!((o.cdf(o.quantile(p, &x), &x) - p).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TwoGroupConfig::default();
        c.minority_scale = 0.5;
        assert!(c.validate().is_err());
        let c = TwoGroupConfig {
            minority_fraction: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hpd_shape_follows_the_branch_regime() {
        let o = oracle();
        let grid = YGrid::uniform(-20.0, 20.0, 2001).unwrap();
        let flat = hpd_set(&oracle_density(&o, &[-2.0, 0.0], &grid), 0.1).unwrap();
        assert_eq!(flat.intervals.len(), 1);

        let x = [5.0, 0.0];
        let d = oracle_density(&o, &x, &grid);
        let hpd = hpd_set(&d, 0.1).unwrap();
        assert_eq!(hpd.intervals.len(), 2, "{:?}", hpd.intervals);
        let rd = recalibrate_cdf(&cdf_from_density(&d).unwrap(), &IdentityMap, &x).unwrap();
        let central = calpit_interval(&rd, 0.1).unwrap();
        assert!(hpd.size() < central.size(), "{} vs {}", hpd.size(), central.size());
    }

    #[test]
    fn samples_are_pit_uniform() {
        let (cal, o) = sample_example1(&TwoGroupConfig::default(), 10_000, 12).unwrap();
        assert_eq!(cal.dim(), 2);
        assert!(cal.features().iter().all(|v| (-5.0..=5.0).contains(v)));
        let pits: Vec<f64> = cal.iter().map(|(x, y)| o.cdf(y, x)).collect();
        assert!(ks_p_value(ks_uniform_statistic(&pits), pits.len()) > 0.01);
        let (again, _) = sample_example1(&TwoGroupConfig::default(), 10_000, 12).unwrap();
        assert_eq!(cal.ys(), again.ys());
    }
}
