use super::kmeans::{elbow_g, kmeans_cluster, ClusterModel};
use super::{ClusterCount, EstimatedLoad, EstimatorSpec, Method};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// SBS features for multi-level clustering. Entry `load_index` of each
/// feature vector is the SBS's current load: observed for active SBSs, an
/// initial guess for sleeping ones.
#[derive(Clone, Debug, PartialEq)]
pub struct MlcInput<T> {
    pub ids: Vec<u32>,
    pub features: Vec<Vec<T>>,
    pub load_index: usize,
    pub active: Vec<bool>,
}

impl<T: Scalar> MlcInput<T> {
    /// One-dimensional features: the current load.
    pub fn scalar(ids: Vec<u32>, loads: &[T], active: Vec<bool>) -> Self {
        Self {
            ids,
            features: loads.iter().map(|&l| vec![l]).collect(),
            load_index: 0,
            active,
        }
    }

    /// Daily profiles with the entry at `slot` overwritten by `loads`.
    pub fn profile(
        ids: Vec<u32>,
        profiles: Vec<Vec<T>>,
        slot: usize,
        loads: &[T],
        active: Vec<bool>,
    ) -> Self {
        let features = profiles
            .into_iter()
            .zip(loads)
            .map(|(mut p, &l)| {
                p[slot] = l;
                p
            })
            .collect();
        Self {
            ids,
            features,
            load_index: slot,
            active,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.features.len();
        if self.ids.len() != n || self.active.len() != n {
            return Err(Error::InvalidArgument(
                "ids, features and activity mask differ in length".into(),
            ));
        }
        if self.features.iter().any(|f| f.len() <= self.load_index) {
            return Err(Error::InvalidArgument(
                "load index outside feature vector".into(),
            ));
        }
        if !self.active.iter().any(|&a| a) {
            return Err(Error::InsufficientNeighbors {
                needed: 1,
                available: 0,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlcOutcome<T> {
    /// Cluster count used on every layer.
    pub g: usize,
    /// Final estimates, one per sleeping SBS in input order.
    pub estimates: Vec<EstimatedLoad<T>>,
    /// Sleeping-SBS estimates after each layer.
    pub per_layer: Vec<Vec<T>>,
    pub model: ClusterModel<T>,
}

/// Multi-level clustering: pick `G` (elbow or fixed), then for each layer
/// cluster the SBSs, estimate every sleeping SBS as the mean load of the
/// active members of its cluster, and feed the estimates into the next layer.
/// A cluster without active members falls back to the mean over all active SBSs.
pub fn mlc_estimate<T: Scalar>(input: &MlcInput<T>, spec: &EstimatorSpec) -> Result<MlcOutcome<T>> {
    input.validate()?;
    if spec.layers == 0 {
        return Err(Error::InvalidArgument(
            "layer count must be at least 1".into(),
        ));
    }
    let n = input.features.len();
    let g = match spec.clusters {
        ClusterCount::Fixed(0) => {
            return Err(Error::InvalidArgument(
                "cluster count must be positive".into(),
            ))
        }
        ClusterCount::Fixed(g) => g.min(n),
        ClusterCount::Elbow => elbow_g(&input.features, 1..=spec.elbow_max_g.min(n), spec.seed)?,
    };

    let k = input.load_index;
    let mut features = input.features.clone();
    let active_loads: Vec<T> = (0..n)
        .filter(|&i| input.active[i])
        .map(|i| features[i][k])
        .collect();
    let global_mean =
        active_loads.iter().copied().sum::<T>() / T::from_usize_lossy(active_loads.len());
    let sleepers: Vec<usize> = (0..n).filter(|&i| !input.active[i]).collect();

    let mut per_layer = Vec::with_capacity(spec.layers);
    let mut model = None;
    for _ in 0..spec.layers {
        let m = kmeans_cluster(&features, g, spec.seed)?;
        let means: Vec<T> = (0..g)
            .map(|c| {
                let contributors: Vec<T> = m
                    .members(c)
                    .filter(|&i| input.active[i] || spec.mlc_mean_includes_estimates)
                    .map(|i| features[i][k])
                    .collect();
                let has_active = m.members(c).any(|i| input.active[i]);
                if has_active {
                    contributors.iter().copied().sum::<T>()
                        / T::from_usize_lossy(contributors.len())
                } else {
                    global_mean
                }
            })
            .collect();
        let layer: Vec<T> = sleepers
            .iter()
            .map(|&i| means[m.assignment[i]].max(T::zero()).min(T::one()))
            .collect();
        for (&i, &est) in sleepers.iter().zip(&layer) {
            features[i][k] = est;
        }
        per_layer.push(layer);
        model = Some(m);
    }

    let last = per_layer.last().expect("at least one layer");
    let estimates = sleepers
        .iter()
        .zip(last)
        .map(|(&i, &lambda_hat)| EstimatedLoad {
            cell_id: input.ids[i],
            lambda_hat,
            method: Method::Mlc,
        })
        .collect();
    Ok(MlcOutcome {
        g,
        estimates,
        per_layer,
        model: model.expect("at least one layer"),
    })
}
