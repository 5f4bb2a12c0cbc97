//! Traffic-load estimators for sleeping SBSs: nearest or random neighbor
//! sets with plain or inverse-distance averaging, and multi-level k-means
//! clustering.

mod interp;
mod kmeans;
mod mlc;
mod neighbors;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use interp::{estimate_mean, estimate_weighted, weight_factor};
pub use kmeans::{elbow_g, kmeans_cluster, kmeans_cluster_traced, sse, ClusterModel};
pub use mlc::{mlc_estimate, MlcInput, MlcOutcome};
pub use neighbors::{
    rank_neighbors, select_random, Cell, Neighbor, NeighborSet, Selection, SortedNeighbors,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DistanceUnweighted,
    DistanceWeighted,
    RandomUnweighted,
    RandomWeighted,
    Mlc,
    /// Perfect knowledge: every estimate equals the true load. Baseline only.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::DistanceUnweighted,
        Method::DistanceWeighted,
        Method::RandomUnweighted,
        Method::RandomWeighted,
        Method::Mlc,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::DistanceUnweighted => "distance_unweighted",
            Method::DistanceWeighted => "distance_weighted",
            Method::RandomUnweighted => "random_unweighted",
            Method::RandomWeighted => "random_weighted",
            Method::Mlc => "mlc",
            Method::Oracle => "oracle",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, Method::DistanceWeighted | Method::RandomWeighted)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of k-means clusters: fixed, or picked by the elbow rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClusterCount {
    #[default]
    Elbow,
    Fixed(usize),
}

impl Serialize for ClusterCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ClusterCount::Elbow => s.serialize_str("elbow"),
            ClusterCount::Fixed(g) => s.serialize_u64(*g as u64),
        }
    }
}

impl<'de> Deserialize<'de> for ClusterCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(g) => Ok(ClusterCount::Fixed(g as usize)),
            Raw::Name(n) if n == "elbow" => Ok(ClusterCount::Elbow),
            Raw::Name(n) => Err(serde::de::Error::custom(format!(
                "expected a cluster count or \"elbow\", got {n:?}"
            ))),
        }
    }
}

/// Feature space for clustering SBSs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterFeatures {
    /// Current-slot load only.
    #[default]
    Scalar,
    /// Whole daily profile, with the current-slot entry replaced by the
    /// current (observed or estimated) load.
    Profile,
}

/// Estimation scheme and its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSpec {
    pub method: Method,
    /// Number of active cells `N` used by the neighbor-based methods.
    pub neighbor_count: usize,
    /// Inverse-distance exponent `n`.
    pub distance_exponent: f64,
    pub clusters: ClusterCount,
    /// Upper end of the elbow search range `1..=elbow_max_g`.
    pub elbow_max_g: usize,
    pub layers: usize,
    pub features: ClusterFeatures,
    /// Cluster means also average the current estimates of sleeping members.
    pub mlc_mean_includes_estimates: bool,
    pub seed: u64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            method: Method::Mlc,
            neighbor_count: 20,
            distance_exponent: 3.0,
            clusters: ClusterCount::Elbow,
            elbow_max_g: 10,
            layers: 7,
            features: ClusterFeatures::Scalar,
            mlc_mean_includes_estimates: false,
            seed: 0,
        }
    }
}

impl EstimatorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("estimator.{key}"), msg));
        if self.neighbor_count == 0 {
            return bad("neighbor_count", "must be at least 1");
        }
        if !(self.distance_exponent > 0.0 && self.distance_exponent.is_finite()) {
            return bad("distance_exponent", "must be a positive real");
        }
        if self.layers == 0 {
            return bad("layers", "must be at least 1");
        }
        if self.clusters == ClusterCount::Fixed(0) {
            return bad("clusters", "must be at least 1");
        }
        if self.elbow_max_g == 0 {
            return bad("elbow_max_g", "must be at least 1");
        }
        Ok(())
    }
}

/// Estimated load of one sleeping cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatedLoad<T> {
    pub cell_id: u32,
    pub lambda_hat: T,
    pub method: Method,
}

/// Clamps an estimate into `[lo, hi]`, the range of the loads it was built from.
pub(crate) fn clamp_convex<T: Scalar>(v: T, lo: T, hi: T) -> T {
    v.max(lo).min(hi)
}
