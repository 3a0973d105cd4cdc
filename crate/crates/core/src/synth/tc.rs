//! Toy tropical-cyclone model.
//!
//! Structure: three principal-component coefficients whose 30-minute
//! increments `ΔPC_t` follow a VAR(3),
//!
//! `ΔPC_t = c + A₁ΔPC_{t−1} + A₂ΔPC_{t−2} + A₃ΔPC_{t−3} + e_t`,  `e_t ~ N(0, Σ)`,
//!
//! and a radial profile `mean + Σ_k PC_k,t · EOF_k` of length 80 per step.
//!
//! Intensity: `Z = logit(Y/200)` with `ΔZ_t = Z_t − Z_{t−6h}` regressed on
//!
//! `1, Z_{t−6h}, ΔZ_{t−6h}, PC1_t, PC2_t, PC3_t, PC1_{t−6h}, PC2_{t−6h},
//! PC3_{t−6h}, PC1_{t−12h}, PC2_{t−12h}, PC3_{t−18h}, PC2_{t−24h}`
//!
//! with coefficients `β₀ … β₁₂` and Gaussian noise of sd `noise_sd`. Every
//! storm starts from a constant 24-hour history at the genesis intensity and
//! its initial PCs; step 0 of the output is the genesis state.

use std::io::Write;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::calibrate::CalibrationSet;
use crate::rng;
use crate::stats::normal_cdf;

/// Radial bins per profile.
pub const PROFILE_LEN: usize = 80;
/// Profiles in a 24-hour history window at 30-minute resolution.
pub const WINDOW_STEPS: usize = 49;
/// Steps per 6 hours.
const LAG: usize = 12;
/// Constant history preceding step 0, long enough for every lag.
const HISTORY: usize = 4 * LAG;
/// Logit-scale bound keeping `Y = 200·logistic(Z)` strictly inside `(0, 200)`.
const Z_BOUND: f64 = 30.0;
/// Lags, in steps, of the profiles summarized by [`tc_summary_features`].
const SUMMARY_LAGS: [usize; 5] = [0, 12, 24, 36, 48];

pub fn intensity_to_logit(y: f64) -> f64 {
    let p = y / 200.0;
    (p / (1.0 - p)).ln()
}

pub fn logit_to_intensity(z: f64) -> f64 {
    200.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TcModelConfig {
    pub var_intercept: [f64; 3],
    /// `A₁, A₂, A₃`, each row-major.
    pub var_coefficients: [[[f64; 3]; 3]; 3],
    pub var_noise_cov: [[f64; 3]; 3],
    /// Standard deviations of the independent normal initial PCs.
    pub initial_pc_sd: [f64; 3],
    pub intensity_betas: [f64; 13],
    pub noise_sd: f64,
    /// Intensity of the constant pre-genesis history.
    pub genesis_intensity: f64,
    /// Three orthonormal profile basis vectors of length 80.
    pub pca_eofs: Vec<Vec<f64>>,
    pub profile_mean: Vec<f64>,
    pub step_minutes: u32,
    /// Inclusive range of storm lengths in steps.
    pub storm_steps: (usize, usize),
}

/// Cosine basis `√(2/80)·cos(πk(r + ½)/80)`, `k = 1, 2, 3`.
fn default_eofs() -> Vec<Vec<f64>> {
    let n = PROFILE_LEN as f64;
    (1..=3)
        .map(|k| {
            (0..PROFILE_LEN)
                .map(|r| (2.0 / n).sqrt() * (std::f64::consts::PI * k as f64 * (r as f64 + 0.5) / n).cos())
                .collect()
        })
        .collect()
}

impl Default for TcModelConfig {
    /// The ΔPC components have AR roots `(0.9, 0.5, −0.3)`, `(0.85, 0.4, −0.2)`
    /// and `(0.8, 0.3, −0.25)` and load on earlier components only, so the
    /// companion spectral radius is 0.9.
    fn default() -> Self {
        let diag = |a: [f64; 3]| [[a[0], 0.0, 0.0], [0.0, a[1], 0.0], [0.0, 0.0, a[2]]];
        let mut first = diag([1.1, 1.05, 0.85]);
        first[1][0] = 0.1;
        first[2][0] = -0.05;
        first[2][1] = 0.08;
        let (s1, s2, s3) = (0.2, 0.15, 0.1);
        let rho = 0.3 * s1 * s2;
        Self {
            var_intercept: [0.0; 3],
            var_coefficients: [first, diag([-0.03, -0.09, 0.035]), diag([-0.135, -0.068, -0.06])],
            var_noise_cov: [[s1 * s1, rho, 0.0], [rho, s2 * s2, 0.0], [0.0, 0.0, s3 * s3]],
            initial_pc_sd: [20.0, 10.0, 5.0],
            intensity_betas: [
                -0.08, -0.1, 0.3, 0.006, -0.004, 0.003, -0.002, 0.002, -0.001, -0.001, 0.001, 0.001, -0.001,
            ],
            noise_sd: 0.15,
            genesis_intensity: 35.0,
            pca_eofs: default_eofs(),
            profile_mean: (0..PROFILE_LEN)
                .map(|r| -70.0 + 90.0 * (1.0 - (-(r as f64) / 12.0).exp()))
                .collect(),
            step_minutes: 30,
            storm_steps: (72, 168),
        }
    }
}

impl TcModelConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.step_minutes != 30 {
            return bad(format!("step_minutes must be 30, got {}", self.step_minutes));
        }
        if self.pca_eofs.len() != 3 || self.pca_eofs.iter().any(|e| e.len() != PROFILE_LEN) {
            return bad("pca_eofs must be 3 vectors of length 80".into());
        }
        if self.profile_mean.len() != PROFILE_LEN {
            return bad("profile_mean must have length 80".into());
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = self.pca_eofs[i].iter().zip(&self.pca_eofs[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-8 {
                    return bad("pca_eofs must be orthonormal".into());
                }
            }
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return bad(format!("noise_sd must be nonnegative, got {}", self.noise_sd));
        }
        if self.initial_pc_sd.iter().any(|s| !(*s >= 0.0)) {
            return bad("initial_pc_sd must be nonnegative".into());
        }
        if !(self.genesis_intensity > 0.0 && self.genesis_intensity < 200.0) {
            return bad("genesis_intensity must lie in (0, 200)".into());
        }
        let (lo, hi) = self.storm_steps;
        if lo == 0 || lo > hi {
            return bad(format!("invalid storm_steps ({lo}, {hi})"));
        }
        self.noise_factor()?;
        Ok(())
    }

    /// Largest modulus among the eigenvalues of the VAR companion matrix.
    pub fn spectral_radius(&self) -> f64 {
        let mut companion = DMatrix::<f64>::zeros(9, 9);
        for (k, a) in self.var_coefficients.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    companion[(i, 3 * k + j)] = a[i][j];
                }
            }
        }
        for i in 3..9 {
            companion[(i, i - 3)] = 1.0;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn check_stationary(&self) -> Result<(), SynthError> {
        let spectral_radius = self.spectral_radius();
        if spectral_radius < 1.0 {
            Ok(())
        } else {
            Err(SynthError::NonStationaryVar { spectral_radius })
        }
    }

    /// A square root `L` of the noise covariance, `L Lᵀ = Σ`.
    fn noise_factor(&self) -> Result<Matrix3<f64>, SynthError> {
        let c = &self.var_noise_cov;
        let m = Matrix3::from_fn(|i, j| c[i][j]);
        if (m - m.transpose()).abs().max() > 1e-12 {
            return Err(SynthError::InvalidConfig("var_noise_cov must be symmetric".into()));
        }
        let eig = SymmetricEigen::new(m);
        let scale = m.abs().max().max(1e-300);
        if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
            return Err(SynthError::InvalidConfig(
                "var_noise_cov must be positive semi-definite".into(),
            ));
        }
        let root = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        Ok(eig.eigenvectors * root)
    }

    pub fn profile(&self, pc: &[f64; 3]) -> Vec<f64> {
        (0..PROFILE_LEN)
            .map(|r| self.profile_mean[r] + (0..3).map(|k| pc[k] * self.pca_eofs[k][r]).sum::<f64>())
            .collect()
    }

    /// PC coefficients of a profile, by projection on the EOFs.
    pub fn project(&self, profile: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (0..PROFILE_LEN)
                .map(|r| (profile[r] - self.profile_mean[r]) * self.pca_eofs[k][r])
                .sum();
        }
        out
    }
}

/// One simulated storm at 30-minute resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Storm {
    pub id: usize,
    pub pcs: Vec<[f64; 3]>,
    pub profiles: Vec<Vec<f64>>,
    pub intensities: Vec<f64>,
    /// Conditional mean of `Z_t` given the storm's past; step 0 is the fixed genesis value.
    pub z_mean: Vec<f64>,
    pub noise_sd: f64,
}

impl Storm {
    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    /// `P(Y_t ≤ y)` given the full simulated past (unbounded logit-normal law).
    pub fn state_cdf(&self, t: usize, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 200.0 {
            return 1.0;
        }
        let z = intensity_to_logit(y);
        if t == 0 || self.noise_sd == 0.0 {
            return if z >= self.z_mean[t] { 1.0 } else { 0.0 };
        }
        normal_cdf((z - self.z_mean[t]) / self.noise_sd)
    }
}

fn simulate_storm(cfg: &TcModelConfig, noise: &Matrix3<f64>, id: usize, rng: &mut dyn RngCore) -> Storm {
    let len = rng.random_range(cfg.storm_steps.0..=cfg.storm_steps.1);
    let total = HISTORY + len;
    let mut normal = || -> f64 { StandardNormal.sample(&mut *rng) };

    let pc0: [f64; 3] = std::array::from_fn(|k| cfg.initial_pc_sd[k] * normal());
    let z0 = intensity_to_logit(cfg.genesis_intensity);
    let mut pc = vec![pc0; total];
    let mut dpc = vec![[0.0; 3]; total];
    let mut z = vec![z0; total];
    let mut z_mean = vec![z0; total];
    let b = &cfg.intensity_betas;

    for t in HISTORY + 1..total {
        let mut d = Vector3::from(cfg.var_intercept);
        for (k, a) in cfg.var_coefficients.iter().enumerate() {
            let prev = dpc[t - k - 1];
            for i in 0..3 {
                d[i] += (0..3).map(|j| a[i][j] * prev[j]).sum::<f64>();
            }
        }
        let e = Vector3::new(normal(), normal(), normal());
        d += noise * e;
        dpc[t] = [d[0], d[1], d[2]];
        pc[t] = std::array::from_fn(|i| pc[t - 1][i] + d[i]);

        let z6 = z[t - LAG];
        let dz6 = z6 - z[t - 2 * LAG];
        let (p0, p6, p12, p18, p24) = (pc[t], pc[t - LAG], pc[t - 2 * LAG], pc[t - 3 * LAG], pc[t - 4 * LAG]);
        let delta = b[0]
            + b[1] * z6
            + b[2] * dz6
            + b[3] * p0[0]
            + b[4] * p0[1]
            + b[5] * p0[2]
            + b[6] * p6[0]
            + b[7] * p6[1]
            + b[8] * p6[2]
            + b[9] * p12[0]
            + b[10] * p12[1]
            + b[11] * p18[2]
            + b[12] * p24[1];
        z_mean[t] = z6 + delta;
        z[t] = (z_mean[t] + cfg.noise_sd * normal()).clamp(-Z_BOUND, Z_BOUND);
    }

    let out = HISTORY..total;
    Storm {
        id,
        profiles: pc[out.clone()].iter().map(|p| cfg.profile(p)).collect(),
        pcs: pc[out.clone()].to_vec(),
        intensities: z[out.clone()].iter().map(|&v| logit_to_intensity(v)).collect(),
        z_mean: z_mean[out].to_vec(),
        noise_sd: cfg.noise_sd,
    }
}

/// Simulates `n_storms` independent storms; storm `i` uses a stream derived from `(seed, i)`.
pub fn simulate_tc(cfg: &TcModelConfig, n_storms: usize, seed: u64) -> Result<Vec<Storm>, SynthError> {
    cfg.validate()?;
    cfg.check_stationary()?;
    let noise = cfg.noise_factor()?;
    Ok((0..n_storms)
        .map(|i| {
            let mut r = rng::stream(rng::child(seed, i as u64));
            simulate_storm(cfg, &noise, i, &mut r)
        })
        .collect())
}

/// How windows are laid out within a storm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChunkMode {
    /// Every window end, shifted by 30 minutes.
    Overlapping,
    /// Disjoint windows with a rejected 24-hour stretch between consecutive ones.
    Separated,
}

/// Feature representation of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChunkFeatures {
    /// The flattened `49 × 80` profile trajectory.
    Full,
    /// PC coefficients of the profiles at lags 0, 6, 12, 18 and 24 hours.
    Summary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChunkReport {
    pub windows: usize,
    pub skipped_storms: usize,
    /// `(storm id, step)` of each row's target.
    pub origins: Vec<(usize, usize)>,
}

/// Summary features of a flattened `49 × 80` window.
pub fn tc_summary_features(cfg: &TcModelConfig, window: &[f64]) -> Vec<f64> {
    let last = WINDOW_STEPS - 1;
    SUMMARY_LAGS
        .iter()
        .flat_map(|&lag| {
            let s = (last - lag) * PROFILE_LEN;
            cfg.project(&window[s..s + PROFILE_LEN])
        })
        .collect()
}

/// Cuts storms into `(S_{<t}, Y_t)` rows, `S_{<t}` being the 49 profiles ending at `t`.
pub fn chunk_tc(
    storms: &[Storm],
    cfg: &TcModelConfig,
    mode: ChunkMode,
    features: ChunkFeatures,
) -> Result<(CalibrationSet, ChunkReport), SynthError> {
    let dim = match features {
        ChunkFeatures::Full => WINDOW_STEPS * PROFILE_LEN,
        ChunkFeatures::Summary => 3 * SUMMARY_LAGS.len(),
    };
    let stride = match mode {
        ChunkMode::Overlapping => 1,
        ChunkMode::Separated => WINDOW_STEPS + 2 * 24,
    };
    let mut cal = CalibrationSet::new(dim);
    let mut report = ChunkReport::default();
    let mut flat = Vec::with_capacity(WINDOW_STEPS * PROFILE_LEN);
    for storm in storms {
        if storm.len() < WINDOW_STEPS {
            report.skipped_storms += 1;
            continue;
        }
        let mut end = WINDOW_STEPS - 1;
        while end < storm.len() {
            flat.clear();
            for p in &storm.profiles[end + 1 - WINDOW_STEPS..=end] {
                flat.extend_from_slice(p);
            }
            match features {
                ChunkFeatures::Full => cal.push(&flat, storm.intensities[end])?,
                ChunkFeatures::Summary => cal.push(&tc_summary_features(cfg, &flat), storm.intensities[end])?,
            }
            report.origins.push((storm.id, end));
            end += stride;
        }
    }
    report.windows = cal.len();
    Ok((cal, report))
}

#[derive(Serialize)]
struct StepRecord<'a> {
    storm_id: usize,
    t_minutes: u64,
    profile: &'a [f64],
    intensity: f64,
}

/// JSON lines, one `{storm_id, t_minutes, profile, intensity}` object per step.
pub fn write_tc_jsonl<W: Write>(storms: &[Storm], step_minutes: u32, mut out: W) -> Result<(), SynthError> {
    for storm in storms {
        for (t, profile) in storm.profiles.iter().enumerate() {
            let rec = StepRecord {
                storm_id: storm.id,
                t_minutes: t as u64 * u64::from(step_minutes),
                profile,
                intensity: storm.intensities[t],
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_p_value, ks_uniform_statistic};

    fn storm_of_len(n: usize) -> Storm {
        let cfg = TcModelConfig::default();
        Storm {
            id: 0,
            pcs: vec![[0.0; 3]; n],
            profiles: (0..n).map(|t| vec![t as f64; PROFILE_LEN]).collect(),
            intensities: (0..n).map(|t| 10.0 + t as f64).collect(),
            z_mean: vec![0.0; n],
            noise_sd: cfg.noise_sd,
        }
    }

    #[test]
    fn logit_transform() {
        assert_eq!(intensity_to_logit(100.0), 0.0);
        assert!((logit_to_intensity(intensity_to_logit(37.5)) - 37.5).abs() < 1e-12);
    }

    #[test]
    fn default_config_is_stationary_at_radius_point_nine() {
        let cfg = TcModelConfig::default();
        cfg.validate().unwrap();
        assert!((cfg.spectral_radius() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn explosive_var_is_rejected() {
        let mut cfg = TcModelConfig::default();
        cfg.var_coefficients[0][0][0] = 2.0;
        assert!(matches!(
            simulate_tc(&cfg, 1, 0),
            Err(SynthError::NonStationaryVar { .. })
        ));
    }

    #[test]
    fn invalid_noise_is_rejected() {
        let mut cfg = TcModelConfig::default();
        cfg.var_noise_cov[0][0] = -1.0;
        assert!(cfg.validate().is_err());
        let cfg = TcModelConfig {
            noise_sd: -0.1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn intensities_stay_strictly_inside_range() {
        let cfg = TcModelConfig {
            storm_steps: (200, 200),
            ..Default::default()
        };
        let storms = simulate_tc(&cfg, 500, 1).unwrap();
        let all: Vec<f64> = storms.iter().flat_map(|s| s.intensities.iter().copied()).collect();
        assert_eq!(all.len(), 100_000);
        assert!(all.iter().all(|&y| y > 0.0 && y < 200.0));
        // Wild noise drives Z into the clipping bound; still strictly inside.
        let wild = TcModelConfig {
            noise_sd: 50.0,
            ..cfg
        };
        for s in simulate_tc(&wild, 20, 2).unwrap() {
            assert!(s.intensities.iter().all(|&y| y > 0.0 && y < 200.0));
        }
    }

    #[test]
    fn degenerate_recursion_is_arithmetic() {
        let mut betas = [0.0; 13];
        betas[0] = 0.05;
        let cfg = TcModelConfig {
            var_noise_cov: [[0.0; 3]; 3],
            initial_pc_sd: [0.0; 3],
            intensity_betas: betas,
            noise_sd: 0.0,
            storm_steps: (97, 97),
            ..Default::default()
        };
        let storm = &simulate_tc(&cfg, 1, 9).unwrap()[0];
        let z0 = intensity_to_logit(cfg.genesis_intensity);
        for k in 0..=8 {
            let z = intensity_to_logit(storm.intensities[k * LAG]);
            assert!((z - (z0 + k as f64 * 0.05)).abs() < 1e-9, "k={k}");
        }
        assert!(storm.pcs.iter().all(|p| *p == [0.0; 3]));
    }

    #[test]
    fn simulation_is_reproducible() {
        let cfg = TcModelConfig::default();
        assert_eq!(simulate_tc(&cfg, 5, 42).unwrap(), simulate_tc(&cfg, 5, 42).unwrap());
        assert_ne!(simulate_tc(&cfg, 1, 42).unwrap(), simulate_tc(&cfg, 1, 43).unwrap());
    }

    #[test]
    fn state_pits_are_uniform() {
        let cfg = TcModelConfig::default();
        let storms = simulate_tc(&cfg, 200, 5).unwrap();
        let pits: Vec<f64> = storms
            .iter()
            .flat_map(|s| (1..s.len()).step_by(7).map(move |t| s.state_cdf(t, s.intensities[t])))
            .collect();
        assert!(pits.len() > 2000);
        assert!(ks_p_value(ks_uniform_statistic(&pits), pits.len()) > 0.01);
    }

    #[test]
    fn default_intensities_span_a_plausible_range() {
        let storms = simulate_tc(&TcModelConfig::default(), 300, 8).unwrap();
        let mut all: Vec<f64> = storms.iter().flat_map(|s| s.intensities[48..].iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        let q = |p: f64| all[(p * (all.len() - 1) as f64) as usize];
        assert!(q(0.05) > 10.0 && q(0.05) < 60.0, "{}", q(0.05));
        assert!(q(0.95) > 60.0 && q(0.95) < 190.0, "{}", q(0.95));
    }

    #[test]
    fn window_counts() {
        let cfg = TcModelConfig::default();
        let (one, r1) = chunk_tc(&[storm_of_len(49)], &cfg, ChunkMode::Overlapping, ChunkFeatures::Full).unwrap();
        assert_eq!((one.len(), r1.windows), (1, 1));
        assert_eq!(one.dim(), 3920);
        let (two, _) = chunk_tc(&[storm_of_len(50)], &cfg, ChunkMode::Overlapping, ChunkFeatures::Full).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two.row(0)[PROFILE_LEN..], two.row(1)[..48 * PROFILE_LEN]);
        assert_eq!(two.ys(), &[58.0, 59.0]);
        let (_, r) = chunk_tc(&[storm_of_len(48)], &cfg, ChunkMode::Overlapping, ChunkFeatures::Full).unwrap();
        assert_eq!((r.windows, r.skipped_storms), (0, 1));
    }

    #[test]
    fn separated_windows_skip_a_day() {
        let cfg = TcModelConfig::default();
        let (set, report) =
            chunk_tc(&[storm_of_len(49 + 48 + 49)], &cfg, ChunkMode::Separated, ChunkFeatures::Full).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(report.origins, vec![(0, 48), (0, 48 + 97)]);
    }

    #[test]
    fn summary_features_recover_pcs() {
        let cfg = TcModelConfig::default();
        let storms = simulate_tc(&cfg, 1, 3).unwrap();
        let (set, report) = chunk_tc(&storms, &cfg, ChunkMode::Overlapping, ChunkFeatures::Summary).unwrap();
        assert_eq!(set.dim(), 15);
        let (_, end) = report.origins[5];
        let row = set.row(5);
        for (i, lag) in SUMMARY_LAGS.iter().enumerate() {
            let pc = storms[0].pcs[end - lag];
            for k in 0..3 {
                assert!((row[3 * i + k] - pc[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jsonl_has_one_line_per_step() {
        let cfg = TcModelConfig {
            storm_steps: (60, 60),
            ..Default::default()
        };
        let storms = simulate_tc(&cfg, 2, 0).unwrap();
        let mut buf = Vec::new();
        write_tc_jsonl(&storms, 30, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 120);
        let v: serde_json::Value = serde_json::from_str(lines[61]).unwrap();
        assert_eq!(v["storm_id"], 1);
        assert_eq!(v["t_minutes"], 30);
        assert_eq!(v["profile"].as_array().unwrap().len(), 80);
    }
}
