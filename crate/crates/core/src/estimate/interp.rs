use super::{clamp_convex, EstimatedLoad, Method, NeighborSet, Selection};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn load_range<T: Scalar>(set: &NeighborSet<T>) -> (T, T) {
    set.members()
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), m| {
            (lo.min(m.load), hi.max(m.load))
        })
}

fn method_for(selection: Selection, weighted: bool) -> Method {
    match (selection, weighted) {
        (Selection::Nearest, false) => Method::DistanceUnweighted,
        (Selection::Nearest, true) => Method::DistanceWeighted,
        (Selection::Random, false) => Method::RandomUnweighted,
        (Selection::Random, true) => Method::RandomWeighted,
    }
}

/// Plain average of the neighbor loads.
pub fn estimate_mean<T: Scalar>(neighbors: &NeighborSet<T>) -> Result<EstimatedLoad<T>> {
    if neighbors.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot estimate from an empty neighbor set".into(),
        ));
    }
    let sum: T = neighbors.members().iter().map(|m| m.load).sum();
    let (lo, hi) = load_range(neighbors);
    Ok(EstimatedLoad {
        cell_id: neighbors.target,
        lambda_hat: clamp_convex(sum / T::from_usize_lossy(neighbors.len()), lo, hi),
        method: method_for(neighbors.selection, false),
    })
}

/// Inverse-distance weight `d_max / d^n`.
pub fn weight_factor<T: Scalar>(distance: T, d_max: T, exponent: T) -> Result<T> {
    if !(distance > T::zero()) {
        return Err(Error::DegenerateDistance(format!(
            "distance {distance} must be positive"
        )));
    }
    if !(exponent > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "exponent {exponent} must be positive"
        )));
    }
    Ok(d_max / distance.powf(exponent))
}

/// Weighted average `sum(load * w) / sum(w)` with `w = d_max / d^n`.
///
/// When the raw weights under- or overflow (large `n` with distances in
/// meters), the weights are rescaled by `(d_min)^n / d_max`, which leaves the
/// normalized weights unchanged.
pub fn estimate_weighted<T: Scalar>(
    neighbors: &NeighborSet<T>,
    exponent: T,
) -> Result<EstimatedLoad<T>> {
    if neighbors.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot estimate from an empty neighbor set".into(),
        ));
    }
    let d_max = neighbors.d_max();
    let weights = neighbors
        .members()
        .iter()
        .map(|m| weight_factor(m.distance, d_max, exponent))
        .collect::<Result<Vec<T>>>()?;
    let total: T = weights.iter().copied().sum();

    let weighted = if total.is_finite() && total > T::zero() && total.is_normal() {
        let num: T = neighbors
            .members()
            .iter()
            .zip(&weights)
            .map(|(m, w)| m.load * *w)
            .sum();
        num / total
    } else {
        let d_min = neighbors.members()[0].distance;
        let (num, den) =
            neighbors
                .members()
                .iter()
                .fold((T::zero(), T::zero()), |(num, den), m| {
                    let w = (d_min / m.distance).powf(exponent);
                    (num + m.load * w, den + w)
                });
        num / den
    };
    let (lo, hi) = load_range(neighbors);
    Ok(EstimatedLoad {
        cell_id: neighbors.target,
        lambda_hat: clamp_convex(weighted, lo, hi),
        method: method_for(neighbors.selection, true),
    })
}
