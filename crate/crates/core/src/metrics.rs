//! Estimation error, decision change and empirical wrong-transition rates.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::switching::SwitchVector;

pub const DEFAULT_LAMBDA_TH: f64 = 0.1;

/// Relative error `|lambda - lambda_hat| / lambda`; `None` when the true load is zero.
pub fn estimation_error<T: Scalar>(lambda_true: T, lambda_hat: T) -> Option<T> {
    if lambda_true > T::zero() {
        Some((lambda_true - lambda_hat).abs() / lambda_true)
    } else {
        None
    }
}

/// Fraction of SBSs whose on/off bit differs. Offload targets are ignored.
pub fn decision_change_rate<T: Scalar>(
    truth: &SwitchVector,
    estimated: &SwitchVector,
) -> Result<T> {
    if truth.len() != estimated.len() {
        return Err(Error::InvalidArgument(format!(
            "switch vectors of length {} and {}",
            truth.len(),
            estimated.len()
        )));
    }
    if truth.is_empty() {
        return Ok(T::zero());
    }
    let differing = truth
        .delta()
        .iter()
        .zip(estimated.delta())
        .filter(|(a, b)| a != b)
        .count();
    Ok(T::from_usize_lossy(differing) / T::from_usize_lossy(truth.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdPolicy<T> {
    lambda_th: T,
}

impl<T: Scalar> ThresholdPolicy<T> {
    pub fn new(lambda_th: T) -> Result<Self> {
        if lambda_th > T::zero() && lambda_th < T::one() {
            Ok(Self { lambda_th })
        } else {
            Err(Error::Domain(format!(
                "threshold {lambda_th} outside (0, 1)"
            )))
        }
    }

    pub fn lambda_th(&self) -> T {
        self.lambda_th
    }
}

impl<T: Scalar> Default for ThresholdPolicy<T> {
    fn default() -> Self {
        Self {
            lambda_th: T::lit(DEFAULT_LAMBDA_TH),
        }
    }
}

/// `true` (wake) iff the estimate is strictly above the threshold.
pub fn threshold_policy<T: Scalar>(lambda_hat: T, policy: &ThresholdPolicy<T>) -> bool {
    lambda_hat > policy.lambda_th
}

/// Empirical wrong-transition probabilities; `None` when the conditioning
/// event never occurred.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TransitionErrors<T> {
    /// `P(lambda_hat > th | lambda <= th)`
    pub off_to_on: Option<T>,
    /// `P(lambda_hat < th | lambda >= th)`
    pub on_to_off: Option<T>,
}

pub fn empirical_p_err<T: Scalar>(
    samples: impl IntoIterator<Item = (T, T)>,
    policy: &ThresholdPolicy<T>,
) -> TransitionErrors<T> {
    let th = policy.lambda_th;
    let (mut low, mut low_err, mut high, mut high_err) = (0usize, 0usize, 0usize, 0usize);
    for (truth, est) in samples {
        if truth <= th {
            low += 1;
            low_err += usize::from(est > th);
        }
        if truth >= th {
            high += 1;
            high_err += usize::from(est < th);
        }
    }
    let ratio = |num: usize, den: usize| {
        (den > 0).then(|| T::from_usize_lossy(num) / T::from_usize_lossy(den))
    };
    TransitionErrors {
        off_to_on: ratio(low_err, low),
        on_to_off: ratio(high_err, high),
    }
}

/// Running mean of relative errors; zero-load samples are counted apart.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorAccumulator<T> {
    sum: T,
    count: usize,
    skipped: usize,
}

impl<T: Scalar> ErrorAccumulator<T> {
    pub fn push(&mut self, lambda_true: T, lambda_hat: T) {
        match estimation_error(lambda_true, lambda_hat) {
            Some(e) => {
                self.sum += e;
                self.count += 1;
            }
            None => self.skipped += 1,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.sum += other.sum;
        self.count += other.count;
        self.skipped += other.skipped;
    }

    pub fn mean(&self) -> Option<T> {
        (self.count > 0).then(|| self.sum / T::from_usize_lossy(self.count))
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

/// Everything recorded for one (iteration, slot).
#[derive(Clone, Debug, PartialEq)]
pub struct SlotMetrics<T> {
    /// Mean relative error over sleeping SBSs with non-zero true load.
    pub estimation_error: Option<T>,
    pub zero_load_skipped: usize,
    pub sleeping: usize,
    pub power_true: T,
    pub power_est: T,
    pub decision_change_rate: T,
    pub p_err: TransitionErrors<T>,
}

impl<T: Scalar> SlotMetrics<T> {
    /// `|P_est - P_T| / P_T`.
    pub fn power_gap(&self) -> T {
        (self.power_est - self.power_true).abs() / self.power_true
    }
}
