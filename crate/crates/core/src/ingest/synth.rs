use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::profile::{GridGeometry, TrafficProfile, DEFAULT_CELL_SIZE_M, SLOTS_PER_DAY};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parameters of the synthetic traffic corpus.
///
/// Each cell's load is the shared diurnal curve plus a spatially smooth
/// Gaussian field: a static component (persistent hot and cold spots) and a
/// dynamic component following an AR(1) process across slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub grid_side: u32,
    pub cell_size_m: f64,
    /// Standard deviation of the Gaussian smoothing kernel, meters.
    pub spatial_correlation_length: f64,
    pub temporal_profile: Vec<f64>,
    pub noise_std: f64,
    /// Slot-to-slot AR(1) coefficient of the dynamic field, in `[0, 1)`.
    pub temporal_persistence: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            grid_side: 40,
            cell_size_m: DEFAULT_CELL_SIZE_M,
            spatial_correlation_length: 2.0 * DEFAULT_CELL_SIZE_M,
            temporal_profile: default_diurnal_profile(),
            noise_std: 0.1,
            temporal_persistence: 0.9,
            seed: 7,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(format!("synth.{key}"), msg));
        if self.grid_side < 2 {
            return bad("grid_side", format!("must be >= 2, got {}", self.grid_side));
        }
        if !(self.cell_size_m > 0.0) {
            return bad("cell_size_m", "must be positive".into());
        }
        if !(self.spatial_correlation_length > 0.0) {
            return bad("spatial_correlation_length", "must be positive".into());
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std", "must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.temporal_persistence) {
            return bad("temporal_persistence", "must lie in [0, 1)".into());
        }
        if self.temporal_profile.len() != SLOTS_PER_DAY {
            return bad(
                "temporal_profile",
                format!(
                    "needs {SLOTS_PER_DAY} values, got {}",
                    self.temporal_profile.len()
                ),
            );
        }
        if self
            .temporal_profile
            .iter()
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return bad("temporal_profile", "values must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Low overnight, rising through the morning, peak in the late afternoon.
pub fn default_diurnal_profile() -> Vec<f64> {
    (0..SLOTS_PER_DAY)
        .map(|s| {
            let hour = s as f64 / 6.0;
            let phase = 2.0 * std::f64::consts::PI * (hour - 4.0) / 24.0;
            0.1 + 0.45 * 0.5 * (1.0 - phase.cos())
        })
        .collect()
}

/// Separable Gaussian smoother producing unit-variance fields on a square grid.
struct FieldSmoother {
    side: usize,
    radius: usize,
    taps: Vec<f64>,
}

impl FieldSmoother {
    fn new(side: usize, sigma_cells: f64) -> Self {
        let radius = (3.0 * sigma_cells).ceil().max(1.0) as usize;
        let raw: Vec<f64> = (0..=2 * radius)
            .map(|k| {
                let d = k as f64 - radius as f64;
                (-d * d / (2.0 * sigma_cells * sigma_cells)).exp()
            })
            .collect();
        // Var = (sum g^2)^2 for the 2-D product kernel.
        let norm = raw.iter().map(|g| g * g).sum::<f64>().sqrt();
        let taps = raw.into_iter().map(|g| g / norm).collect();
        Self { side, radius, taps }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let padded = self.side + 2 * self.radius;
        let white: Vec<f64> = (0..padded * padded)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        // rows: padded x side
        let mut rows = vec![0.0; padded * self.side];
        for r in 0..padded {
            for c in 0..self.side {
                rows[r * self.side + c] = self
                    .taps
                    .iter()
                    .enumerate()
                    .map(|(k, g)| g * white[r * padded + c + k])
                    .sum();
            }
        }
        let mut out = vec![0.0; self.side * self.side];
        for r in 0..self.side {
            for c in 0..self.side {
                out[r * self.side + c] = self
                    .taps
                    .iter()
                    .enumerate()
                    .map(|(k, g)| g * rows[(r + k) * self.side + c])
                    .sum();
            }
        }
        out
    }
}

/// Generates one profile per grid square, ids `1..=grid_side^2`.
pub fn synth_traffic<T: Scalar>(params: &SynthParams) -> Result<Vec<TrafficProfile<T>>> {
    params.validate()?;
    let side = params.grid_side as usize;
    let cells = side * side;
    let geometry = GridGeometry::new(params.grid_side, T::lit(params.cell_size_m))?;

    let mut series = vec![vec![0.0f64; SLOTS_PER_DAY]; cells];
    if params.noise_std == 0.0 {
        for s in series.iter_mut() {
            s.copy_from_slice(&params.temporal_profile);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let smoother =
            FieldSmoother::new(side, params.spatial_correlation_length / params.cell_size_m);
        let persistent = smoother.sample(&mut rng);
        let mut dynamic = smoother.sample(&mut rng);
        let rho = params.temporal_persistence;
        let innovation = (1.0 - rho * rho).sqrt();
        for slot in 0..SLOTS_PER_DAY {
            if slot > 0 {
                let fresh = smoother.sample(&mut rng);
                for (d, f) in dynamic.iter_mut().zip(&fresh) {
                    *d = rho * *d + innovation * f;
                }
            }
            let base = params.temporal_profile[slot];
            for c in 0..cells {
                let field = (persistent[c] + dynamic[c]) / std::f64::consts::SQRT_2;
                series[c][slot] = (base + params.noise_std * field).clamp(0.0, 1.0);
            }
        }
    }

    series
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let id = i as u32 + 1;
            TrafficProfile::new(
                id,
                geometry.centroid(id)?,
                s.into_iter().map(T::lit).collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn zero_noise_reproduces_base_curve() {
        let params = SynthParams {
            grid_side: 3,
            noise_std: 0.0,
            ..Default::default()
        };
        let out: Vec<TrafficProfile<f64>> = synth_traffic(&params).unwrap();
        assert_eq!(out.len(), 9);
        assert!(out
            .iter()
            .all(|p| p.slots() == params.temporal_profile.as_slice()));
    }

    #[test]
    fn deterministic_per_seed() {
        let params = SynthParams {
            grid_side: 8,
            ..Default::default()
        };
        let a: Vec<TrafficProfile<f64>> = synth_traffic(&params).unwrap();
        let b: Vec<TrafficProfile<f64>> = synth_traffic(&params).unwrap();
        assert_eq!(a, b);
        let c: Vec<TrafficProfile<f64>> =
            synth_traffic(&SynthParams { seed: 8, ..params }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_params() {
        for p in [
            SynthParams {
                grid_side: 1,
                ..Default::default()
            },
            SynthParams {
                noise_std: -0.1,
                ..Default::default()
            },
            SynthParams {
                spatial_correlation_length: 0.0,
                ..Default::default()
            },
            SynthParams {
                temporal_profile: vec![0.5; 3],
                ..Default::default()
            },
        ] {
            assert!(synth_traffic::<f64>(&p).is_err());
        }
    }

    /// Adjacent cells are more correlated than cells five correlation
    /// lengths apart; Welch t-test on the two samples of Pearson
    /// coefficients at the 0.01 level (one-sided critical value 2.33).
    #[test]
    fn nearby_cells_correlate_more() {
        let params = SynthParams {
            grid_side: 30,
            spatial_correlation_length: 235.0,
            ..Default::default()
        };
        let out: Vec<TrafficProfile<f64>> = synth_traffic(&params).unwrap();
        let side = 30usize;
        let at = |r: usize, c: usize| out[r * side + c].slots();
        let (mut near, mut far) = (Vec::new(), Vec::new());
        for r in 0..side {
            for c in 0..side - 5 {
                near.push(pearson(at(r, c), at(r, c + 1)));
                far.push(pearson(at(r, c), at(r, c + 5)));
            }
        }
        assert!(near.len() >= 100);
        let stats = |xs: &[f64]| {
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            (
                m,
                xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0),
                n,
            )
        };
        let (mn, vn, nn) = stats(&near);
        let (mf, vf, nf) = stats(&far);
        let t = (mn - mf) / (vn / nn + vf / nf).sqrt();
        assert!(mn > mf, "near {mn} far {mf}");
        assert!(t > 2.33, "t = {t}");
    }
}
