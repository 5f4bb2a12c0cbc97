use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, OptimizerKind};
use crate::error::{Error, Result};
use crate::estimate::{
    estimate_mean, estimate_weighted, mlc_estimate, select_random, Cell, ClusterFeatures,
    EstimatorSpec, Method, MlcInput, NeighborSet, SortedNeighbors,
};
use crate::ingest::{
    profiles_from_cdr_dir, read_profiles_csv, synth_traffic, GridGeometry, TrafficProfile,
};
use crate::metrics::{
    decision_change_rate, empirical_p_err, ErrorAccumulator, SlotMetrics, ThresholdPolicy,
};
use crate::power::{BaseStation, Network, NetworkLoadState, PowerParams, Tier};
use crate::scalar::{Point, Scalar};
use crate::switching::{optimize_exhaustive, optimize_greedy, SwitchPlan};

/// Traffic profiles the SBSs are drawn from, with ids and positions laid out
/// for neighbor queries.
#[derive(Clone, Debug)]
pub struct Corpus<T> {
    profiles: Vec<TrafficProfile<T>>,
    ids: Vec<u32>,
    positions: Vec<Point<T>>,
}

impl<T: Scalar> Corpus<T> {
    pub fn new(profiles: Vec<TrafficProfile<T>>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::InvalidArgument("empty traffic corpus".into()));
        }
        let ids = profiles.iter().map(|p| p.cell_id).collect();
        let positions = profiles.iter().map(|p| p.position).collect();
        Ok(Self {
            profiles,
            ids,
            positions,
        })
    }

    /// Generates or reads the corpus named by the config.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let profiles = match (&cfg.dataset, &cfg.synth) {
            (Some(d), _) if d.path.is_dir() => {
                let geometry = GridGeometry::new(d.grid_side, T::lit(d.cell_size_m))?;
                profiles_from_cdr_dir(&d.path, &geometry, d.day_count)?
            }
            (Some(d), _) => read_profiles_csv(&d.path)?,
            (None, Some(s)) => synth_traffic(s)?,
            (None, None) => {
                return Err(Error::config(
                    "dataset",
                    "missing: give [dataset] or [synth]",
                ))
            }
        };
        Self::new(profiles)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[TrafficProfile<T>] {
        &self.profiles
    }

    fn load_at(&self, i: usize, slot: usize) -> T {
        self.profiles[i].load(slot)
    }

    fn centroid(&self) -> Point<T> {
        let n = T::from_usize_lossy(self.len());
        Point::new(
            self.positions.iter().map(|p| p.x).sum::<T>() / n,
            self.positions.iter().map(|p| p.y).sum::<T>() / n,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow<T> {
    pub iteration: usize,
    pub slot: usize,
    pub metrics: SlotMetrics<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport<T> {
    /// Ordered by iteration, then slot.
    pub rows: Vec<ReportRow<T>>,
    pub seed: u64,
    pub version: String,
    pub solver: OptimizerKind,
    pub estimator: Method,
    pub iterations: usize,
    pub slots: usize,
    /// The resolved configuration, serialized.
    pub config_echo: String,
    /// Slots where every SBS slept and MLC fell back to the mean of all
    /// observable cells.
    pub mlc_fallbacks: usize,
    /// MLC relative error after each layer, over every estimated sleeper.
    pub layer_errors: Vec<ErrorAccumulator<T>>,
}

impl<T> ExperimentReport<T> {
    pub fn zero_load_skipped(&self) -> usize {
        self.rows.iter().map(|r| r.metrics.zero_load_skipped).sum()
    }
}

struct Context<'a, T> {
    cfg: &'a ExperimentConfig,
    corpus: &'a Corpus<T>,
    solver: OptimizerKind,
    policy: ThresholdPolicy<T>,
    sbs_power: PowerParams<T>,
    mbs: BaseStation<T>,
    haps: BaseStation<T>,
}

#[derive(Default)]
struct IterationOutcome<T> {
    rows: Vec<ReportRow<T>>,
    mlc_fallbacks: usize,
    layer_errors: Vec<ErrorAccumulator<T>>,
}

/// Solver actually used for `cfg`: exhaustive search only up to its limit.
pub fn effective_solver(cfg: &ExperimentConfig) -> OptimizerKind {
    match cfg.optimizer {
        OptimizerKind::Exhaustive if cfg.sbs_count <= cfg.exhaustive_limit => {
            OptimizerKind::Exhaustive
        }
        _ => OptimizerKind::Greedy,
    }
}

pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig) -> Result<ExperimentReport<T>> {
    cfg.validate()?;
    let corpus = Corpus::load(cfg)?;
    run_on_corpus(cfg, &corpus)
}

/// Runs every iteration on an already loaded corpus. Iterations run in
/// parallel; each draws from its own ChaCha stream so results do not depend
/// on scheduling.
pub fn run_on_corpus<T: Scalar>(
    cfg: &ExperimentConfig,
    corpus: &Corpus<T>,
) -> Result<ExperimentReport<T>> {
    cfg.validate()?;
    if cfg.sbs_count > corpus.len() {
        return Err(Error::config(
            "sbs_count",
            format!(
                "{} SBSs requested from a corpus of {} cells",
                cfg.sbs_count,
                corpus.len()
            ),
        ));
    }
    let center = corpus.centroid();
    let ctx = Context {
        cfg,
        corpus,
        solver: effective_solver(cfg),
        policy: ThresholdPolicy::new(T::lit(cfg.lambda_th))?,
        sbs_power: cfg.power.sbs.to_params()?,
        mbs: BaseStation::new(
            0,
            Tier::Mbs,
            center,
            T::lit(cfg.capacity.mbs),
            cfg.power.mbs.to_params()?,
        )?,
        haps: BaseStation::new(
            0,
            Tier::Haps,
            center,
            T::lit(cfg.capacity.haps),
            cfg.power.haps.to_params()?,
        )?,
    };
    let outcomes: Vec<IterationOutcome<T>> = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| run_iteration(&ctx, it))
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport {
        rows: Vec::with_capacity(cfg.iterations * cfg.slots),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        solver: ctx.solver,
        estimator: cfg.estimator.method,
        iterations: cfg.iterations,
        slots: cfg.slots,
        config_echo: cfg.to_toml(),
        mlc_fallbacks: 0,
        layer_errors: Vec::new(),
    };
    for outcome in outcomes {
        report.rows.extend(outcome.rows);
        report.mlc_fallbacks += outcome.mlc_fallbacks;
        if report.layer_errors.len() < outcome.layer_errors.len() {
            report
                .layer_errors
                .resize(outcome.layer_errors.len(), ErrorAccumulator::default());
        }
        for (acc, layer) in report.layer_errors.iter_mut().zip(&outcome.layer_errors) {
            acc.merge(layer);
        }
    }
    Ok(report)
}

/// Mutable per-iteration state carried across slots.
struct Iteration<'a, T> {
    ctx: &'a Context<'a, T>,
    picks: Vec<usize>,
    network: Network<T>,
    sorted: Vec<SortedNeighbors<T>>,
    /// Corpus cells currently hosting a sleeping SBS.
    asleep: Vec<bool>,
    /// Load of each SBS at the last slot it was awake.
    last_seen: Vec<Option<T>>,
    outcome: IterationOutcome<T>,
}

fn run_iteration<T: Scalar>(ctx: &Context<'_, T>, iteration: usize) -> Result<IterationOutcome<T>> {
    let cfg = ctx.cfg;
    let corpus = ctx.corpus;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(iteration as u64);
    let mut picks = sample(&mut rng, corpus.len(), cfg.sbs_count).into_vec();
    picks.sort_unstable();

    let sbs = picks
        .iter()
        .map(|&c| {
            BaseStation::new(
                corpus.ids[c],
                Tier::Sbs,
                corpus.positions[c],
                T::lit(cfg.capacity.sbs),
                ctx.sbs_power,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let network = Network::new(ctx.haps.clone(), ctx.mbs.clone(), sbs)?;
    let sorted = if matches!(
        cfg.estimator.method,
        Method::DistanceUnweighted | Method::DistanceWeighted
    ) {
        picks
            .iter()
            .map(|&c| {
                SortedNeighbors::new(
                    corpus.ids[c],
                    &corpus.positions[c],
                    &corpus.ids,
                    &corpus.positions,
                )
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut state = Iteration {
        ctx,
        picks,
        network,
        sorted,
        asleep: vec![false; corpus.len()],
        last_seen: vec![None; cfg.sbs_count],
        outcome: IterationOutcome::default(),
    };
    for slot in 0..cfg.slots {
        let slot_seed = rng.next_u64();
        let metrics = state.run_slot(slot, slot_seed).map_err(|e| Error::AtSlot {
            iteration,
            slot,
            source: Box::new(e),
        })?;
        state.outcome.rows.push(ReportRow {
            iteration,
            slot,
            metrics,
        });
    }
    Ok(state.outcome)
}

impl<T: Scalar> Iteration<'_, T> {
    fn optimize(&self, loads: &NetworkLoadState<T>) -> Result<SwitchPlan<T>> {
        let cfg = self.ctx.cfg;
        match self.ctx.solver {
            OptimizerKind::Exhaustive => optimize_exhaustive(
                &self.network,
                loads,
                cfg.offload_sinks,
                cfg.exhaustive_limit,
            ),
            OptimizerKind::Greedy => optimize_greedy(&self.network, loads, cfg.offload_sinks),
        }
    }

    fn loads(&self, sbs: Vec<T>) -> Result<NetworkLoadState<T>> {
        let base = &self.ctx.cfg.base_load;
        NetworkLoadState::new(T::lit(base.haps), T::lit(base.mbs), sbs)
    }

    fn run_slot(&mut self, slot: usize, slot_seed: u64) -> Result<SlotMetrics<T>> {
        let corpus = self.ctx.corpus;
        let truth: Vec<T> = self
            .picks
            .iter()
            .map(|&c| corpus.load_at(c, slot))
            .collect();
        let plan_true = self.optimize(&self.loads(truth.clone())?)?;
        let sleepers: Vec<usize> = plan_true.switch.sleeping().collect();

        for &j in &sleepers {
            self.asleep[self.picks[j]] = true;
        }
        let estimates = self.estimate(slot, slot_seed, &truth, &plan_true, &sleepers);
        for &j in &sleepers {
            self.asleep[self.picks[j]] = false;
        }
        let estimates = estimates?;

        let mut observed = truth.clone();
        for (&j, &e) in sleepers.iter().zip(&estimates) {
            observed[j] = e;
        }
        let plan_est = self.optimize(&self.loads(observed)?)?;

        let mut errors = ErrorAccumulator::default();
        let samples: Vec<(T, T)> = sleepers
            .iter()
            .zip(&estimates)
            .map(|(&j, &e)| (truth[j], e))
            .collect();
        for &(t, e) in &samples {
            errors.push(t, e);
        }
        for (j, &load) in truth.iter().enumerate() {
            if plan_true.switch.is_on(j) {
                self.last_seen[j] = Some(load);
            }
        }
        Ok(SlotMetrics {
            estimation_error: errors.mean(),
            zero_load_skipped: errors.skipped(),
            sleeping: sleepers.len(),
            power_true: plan_true.power,
            power_est: plan_est.power,
            decision_change_rate: decision_change_rate(&plan_true.switch, &plan_est.switch)?,
            p_err: empirical_p_err(samples, &self.ctx.policy),
        })
    }

    /// Estimates for `sleepers`, in order.
    fn estimate(
        &mut self,
        slot: usize,
        slot_seed: u64,
        truth: &[T],
        plan: &SwitchPlan<T>,
        sleepers: &[usize],
    ) -> Result<Vec<T>> {
        if sleepers.is_empty() {
            return Ok(Vec::new());
        }
        let spec = &self.ctx.cfg.estimator;
        let corpus = self.ctx.corpus;
        let n = spec.neighbor_count;
        let exponent = T::lit(spec.distance_exponent);
        let finish = |set: NeighborSet<T>| -> Result<T> {
            let est = if spec.method.is_weighted() {
                estimate_weighted(&set, exponent)?
            } else {
                estimate_mean(&set)?
            };
            Ok(est.lambda_hat)
        };
        match spec.method {
            Method::Oracle => Ok(sleepers.iter().map(|&j| truth[j]).collect()),
            Method::DistanceUnweighted | Method::DistanceWeighted => sleepers
                .iter()
                .map(|&j| {
                    let asleep = &self.asleep;
                    let set = self.sorted[j].nearest(
                        n,
                        &corpus.ids,
                        |i| !asleep[i],
                        |i| corpus.load_at(i, slot),
                    )?;
                    finish(set)
                })
                .collect(),
            Method::RandomUnweighted | Method::RandomWeighted => {
                let pool = self.observable_cells(slot);
                sleepers
                    .iter()
                    .map(|&j| {
                        let c = self.picks[j];
                        let seed =
                            slot_seed ^ spec.seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                        finish(select_random(
                            corpus.ids[c],
                            &corpus.positions[c],
                            &pool,
                            n,
                            seed,
                        )?)
                    })
                    .collect()
            }
            Method::Mlc => self.estimate_mlc(slot, truth, plan, sleepers, spec),
        }
    }

    fn observable_cells(&self, slot: usize) -> Vec<Cell<T>> {
        let corpus = self.ctx.corpus;
        (0..corpus.len())
            .filter(|&i| !self.asleep[i])
            .map(|i| Cell {
                id: corpus.ids[i],
                position: corpus.positions[i],
                load: corpus.load_at(i, slot),
            })
            .collect()
    }

    fn estimate_mlc(
        &mut self,
        slot: usize,
        truth: &[T],
        plan: &SwitchPlan<T>,
        sleepers: &[usize],
        spec: &EstimatorSpec,
    ) -> Result<Vec<T>> {
        let s = truth.len();
        let active: Vec<bool> = (0..s).map(|j| plan.switch.is_on(j)).collect();
        let awake: Vec<T> = (0..s).filter(|&j| active[j]).map(|j| truth[j]).collect();
        if awake.is_empty() {
            let pool = self.observable_cells(slot);
            if pool.is_empty() {
                return Err(Error::InsufficientNeighbors {
                    needed: 1,
                    available: 0,
                });
            }
            let mean = pool.iter().map(|c| c.load).sum::<T>() / T::from_usize_lossy(pool.len());
            self.outcome.mlc_fallbacks += 1;
            return Ok(vec![mean; sleepers.len()]);
        }
        let awake_mean = awake.iter().copied().sum::<T>() / T::from_usize_lossy(awake.len());
        let initial: Vec<T> = (0..s)
            .map(|j| {
                if active[j] {
                    truth[j]
                } else {
                    self.last_seen[j].unwrap_or(awake_mean)
                }
            })
            .collect();
        let corpus = self.ctx.corpus;
        let ids: Vec<u32> = self.picks.iter().map(|&c| corpus.ids[c]).collect();
        let input = match spec.features {
            ClusterFeatures::Scalar => MlcInput::scalar(ids, &initial, active),
            ClusterFeatures::Profile => {
                let profiles = self
                    .picks
                    .iter()
                    .map(|&c| corpus.profiles[c].slots().to_vec())
                    .collect();
                MlcInput::profile(ids, profiles, slot, &initial, active)
            }
        };
        let outcome = mlc_estimate(&input, spec)?;

        let layers = &mut self.outcome.layer_errors;
        if layers.len() < outcome.per_layer.len() {
            layers.resize(outcome.per_layer.len(), ErrorAccumulator::default());
        }
        for (acc, layer) in layers.iter_mut().zip(&outcome.per_layer) {
            for (&j, &e) in sleepers.iter().zip(layer) {
                acc.push(truth[j], e);
            }
        }
        Ok(outcome.estimates.iter().map(|e| e.lambda_hat).collect())
    }
}
