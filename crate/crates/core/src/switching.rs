//! Switch states, load transfer on sleep/wake transitions, and solvers for
//! the minimum-power switching problem.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::{total_power, BaseStation, Network, NetworkLoadState, Sink};
use crate::scalar::Scalar;

pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 14;

/// On/off state of every SBS, with the sink chosen for each sleeping one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SwitchVector {
    delta: Vec<bool>,
    offload: Vec<Option<Sink>>,
}

impl SwitchVector {
    pub fn all_on(s: usize) -> Self {
        Self {
            delta: vec![true; s],
            offload: vec![None; s],
        }
    }

    pub fn from_parts(delta: Vec<bool>, offload: Vec<Option<Sink>>) -> Result<Self> {
        if delta.len() != offload.len() {
            return Err(Error::InvalidArgument(
                "delta and offload lengths differ".into(),
            ));
        }
        if let Some(j) = delta
            .iter()
            .zip(&offload)
            .position(|(&on, t)| on == t.is_some())
        {
            return Err(Error::Inconsistent(format!(
                "SBS {j}: offload target must be set exactly when asleep"
            )));
        }
        Ok(Self { delta, offload })
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn is_on(&self, j: usize) -> bool {
        self.delta[j]
    }

    pub fn offload_target(&self, j: usize) -> Option<Sink> {
        self.offload[j]
    }

    pub fn on_count(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    pub fn sleeping(&self) -> impl Iterator<Item = usize> + '_ {
        self.delta
            .iter()
            .enumerate()
            .filter(|(_, &on)| !on)
            .map(|(j, _)| j)
    }

    pub fn sleep(&mut self, j: usize, sink: Sink) {
        self.delta[j] = false;
        self.offload[j] = Some(sink);
    }

    pub fn wake(&mut self, j: usize) {
        self.delta[j] = true;
        self.offload[j] = None;
    }

    /// Optimizer tie-break: more SBSs on first, then the lexicographically
    /// smallest `delta` (off < on), then the smallest target vector
    /// (HAPS < MBS). `Less` means `self` is preferred.
    pub fn tie_break(&self, other: &Self) -> Ordering {
        other
            .on_count()
            .cmp(&self.on_count())
            .then_with(|| self.delta.cmp(&other.delta))
            .then_with(|| self.offload.cmp(&other.offload))
    }
}

/// Capacity of an SBS relative to an offload sink, `C_j / C_k`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct RelativeCapacity<T>(T);

impl<T: Scalar> RelativeCapacity<T> {
    pub fn new(phi: T) -> Result<Self> {
        if phi > T::zero() && phi.is_finite() {
            Ok(Self(phi))
        } else {
            Err(Error::Domain(format!(
                "relative capacity {phi} must be positive"
            )))
        }
    }

    pub fn value(self) -> T {
        self.0
    }
}

pub fn relative_capacity<T: Scalar>(
    sbs: &BaseStation<T>,
    sink: &BaseStation<T>,
) -> Result<RelativeCapacity<T>> {
    if !(sbs.capacity > T::zero()) || !(sink.capacity > T::zero()) {
        return Err(Error::Domain(format!(
            "capacities must be positive, got {} and {}",
            sbs.capacity, sink.capacity
        )));
    }
    RelativeCapacity::new(sbs.capacity / sink.capacity)
}

/// Which stations may absorb traffic from sleeping SBSs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkSet {
    HapsOnly,
    #[default]
    MbsAndHaps,
}

impl SinkSet {
    pub fn sinks(self) -> &'static [Sink] {
        match self {
            SinkSet::HapsOnly => &[Sink::Haps],
            SinkSet::MbsAndHaps => &Sink::ALL,
        }
    }
}

fn check_index<T: Scalar>(loads: &NetworkLoadState<T>, j: usize) -> Result<()> {
    if j < loads.lambda_sbs().len() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "SBS index {j} out of range 0..{}",
            loads.lambda_sbs().len()
        )))
    }
}

fn switch_off_in_place<T: Scalar>(
    loads: &mut NetworkLoadState<T>,
    j: usize,
    target: Sink,
    phi: RelativeCapacity<T>,
) -> Result<()> {
    check_index(loads, j)?;
    let lambda_j = loads.lambda_sbs()[j];
    let moved = phi.value() * lambda_j;
    let sink_after = loads.lambda_sink(target) + moved;
    if sink_after > T::one() {
        return Err(Error::Infeasible(format!(
            "{target:?} load would reach {sink_after} when SBS {j} sleeps"
        )));
    }
    loads.sink_load_mut(target).add_offload(j, moved);
    loads.sbs_mut()[j] = T::zero();
    Ok(())
}

fn switch_on_in_place<T: Scalar>(
    loads: &mut NetworkLoadState<T>,
    j: usize,
    new_lambda_j: T,
    target: Sink,
    phi: RelativeCapacity<T>,
) -> Result<()> {
    check_index(loads, j)?;
    if !(new_lambda_j >= T::zero() && new_lambda_j <= T::one()) {
        return Err(Error::Domain(format!(
            "SBS load {new_lambda_j} outside [0, 1]"
        )));
    }
    let moved = phi.value() * new_lambda_j;
    let mut next = loads.sink_load(target).clone();
    next.remove_offload(j, moved);
    let after = next.value();
    if after < T::zero() {
        return Err(Error::Inconsistent(format!(
            "{target:?} load would drop to {after} when SBS {j} wakes"
        )));
    }
    *loads.sink_load_mut(target) = next;
    loads.sbs_mut()[j] = new_lambda_j;
    Ok(())
}

/// Puts SBS `j` to sleep and moves `phi * lambda_j` onto `target`.
pub fn apply_switch_off<T: Scalar>(
    loads: &NetworkLoadState<T>,
    j: usize,
    target: Sink,
    phi: RelativeCapacity<T>,
) -> Result<NetworkLoadState<T>> {
    let mut next = loads.clone();
    switch_off_in_place(&mut next, j, target, phi)?;
    Ok(next)
}

/// Wakes SBS `j` with load `new_lambda_j`, taking `phi * new_lambda_j` back from `target`.
pub fn apply_switch_on<T: Scalar>(
    loads: &NetworkLoadState<T>,
    j: usize,
    new_lambda_j: T,
    target: Sink,
    phi: RelativeCapacity<T>,
) -> Result<NetworkLoadState<T>> {
    let mut next = loads.clone();
    switch_on_in_place(&mut next, j, new_lambda_j, target, phi)?;
    Ok(next)
}

/// Result of a switching optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchPlan<T> {
    pub switch: SwitchVector,
    /// Loads after the sleeping SBSs were offloaded.
    pub loads: NetworkLoadState<T>,
    pub power: T,
}

/// Powers within a few ulps are ties, resolved by [`SwitchVector::tie_break`].
pub(crate) fn power_cmp<T: Scalar>(a: T, b: T) -> Ordering {
    let tol = T::epsilon() * T::lit(64.0) * a.abs().max(b.abs()).max(T::one());
    if (a - b).abs() <= tol {
        Ordering::Equal
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

fn phi_table<T: Scalar>(network: &Network<T>) -> Result<Vec<[RelativeCapacity<T>; 2]>> {
    network
        .sbs()
        .iter()
        .map(|b| {
            Ok([
                relative_capacity(b, network.sink(Sink::Haps))?,
                relative_capacity(b, network.sink(Sink::Mbs))?,
            ])
        })
        .collect()
}

fn phi_for<T: Copy>(table: &[[T; 2]], j: usize, sink: Sink) -> T {
    table[j][match sink {
        Sink::Haps => 0,
        Sink::Mbs => 1,
    }]
}

fn check_shape<T: Scalar>(network: &Network<T>, loads: &NetworkLoadState<T>) -> Result<()> {
    if loads.lambda_sbs().len() != network.sbs_count() {
        return Err(Error::Inconsistent(format!(
            "{} SBS loads for {} SBSs",
            loads.lambda_sbs().len(),
            network.sbs_count()
        )));
    }
    Ok(())
}

struct Search<'a, T> {
    network: &'a Network<T>,
    sinks: &'static [Sink],
    phi: Vec<[RelativeCapacity<T>; 2]>,
    best: Option<SwitchPlan<T>>,
}

impl<T: Scalar> Search<'_, T> {
    fn visit(
        &mut self,
        j: usize,
        loads: &mut NetworkLoadState<T>,
        switch: &mut SwitchVector,
    ) -> Result<()> {
        if j == self.network.sbs_count() {
            let power = total_power(self.network, switch, loads)?;
            let better = match &self.best {
                None => true,
                Some(best) => match power_cmp(power, best.power) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => switch.tie_break(&best.switch) == Ordering::Less,
                },
            };
            if better {
                self.best = Some(SwitchPlan {
                    switch: switch.clone(),
                    loads: loads.clone(),
                    power,
                });
            }
            return Ok(());
        }
        self.visit(j + 1, loads, switch)?;
        let lambda_j = loads.lambda_sbs()[j];
        for &sink in self.sinks {
            let phi = phi_for(&self.phi, j, sink);
            match switch_off_in_place(loads, j, sink, phi) {
                Ok(()) => {}
                Err(Error::Infeasible(_)) => continue,
                Err(e) => return Err(e),
            }
            switch.sleep(j, sink);
            self.visit(j + 1, loads, switch)?;
            switch.wake(j);
            switch_on_in_place(loads, j, lambda_j, sink, phi)?;
        }
        Ok(())
    }
}

/// Enumerates every on/off vector and every sink assignment of the sleeping
/// SBSs that keeps both sinks at or below full load, and returns the
/// minimum-power configuration. `loads` gives each SBS's load as if active.
pub fn optimize_exhaustive<T: Scalar>(
    network: &Network<T>,
    loads: &NetworkLoadState<T>,
    sinks: SinkSet,
    limit: usize,
) -> Result<SwitchPlan<T>> {
    check_shape(network, loads)?;
    let s = network.sbs_count();
    if s > limit {
        return Err(Error::Size(format!(
            "{s} SBSs exceed the exhaustive limit {limit}"
        )));
    }
    let mut search = Search {
        network,
        sinks: sinks.sinks(),
        phi: phi_table(network)?,
        best: None,
    };
    let mut work = loads.clone();
    let mut switch = SwitchVector::all_on(s);
    search.visit(0, &mut work, &mut switch)?;
    debug_assert_eq!(&work, loads);
    Ok(search
        .best
        .expect("the all-on configuration is always feasible"))
}

/// Visits SBSs in ascending load order and sleeps each one onto the cheaper
/// feasible sink whenever that strictly lowers total power.
pub fn optimize_greedy<T: Scalar>(
    network: &Network<T>,
    loads: &NetworkLoadState<T>,
    sinks: SinkSet,
) -> Result<SwitchPlan<T>> {
    check_shape(network, loads)?;
    let s = network.sbs_count();
    let phi = phi_table(network)?;
    let mut state = loads.clone();
    let mut switch = SwitchVector::all_on(s);
    let mut power = total_power(network, &switch, &state)?;

    let mut order: Vec<usize> = (0..s).collect();
    let lambda = loads.lambda_sbs();
    order.sort_by(|&a, &b| {
        lambda[a]
            .partial_cmp(&lambda[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    for j in order {
        let mut best: Option<(Sink, NetworkLoadState<T>, T)> = None;
        for &sink in sinks.sinks() {
            let next = match apply_switch_off(&state, j, sink, phi_for(&phi, j, sink)) {
                Ok(next) => next,
                Err(Error::Infeasible(_)) => continue,
                Err(e) => return Err(e),
            };
            switch.sleep(j, sink);
            let p = total_power(network, &switch, &next)?;
            switch.wake(j);
            if best.as_ref().is_none_or(|(_, _, bp)| p < *bp) {
                best = Some((sink, next, p));
            }
        }
        if let Some((sink, next, p)) = best {
            if p < power {
                switch.sleep(j, sink);
                state = next;
                power = p;
            }
        }
    }
    Ok(SwitchPlan {
        switch,
        loads: state,
        power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::{PowerParams, Tier};
    use crate::scalar::Point;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn station(tier: Tier, capacity: f64, p: (f64, f64, f64, f64)) -> BaseStation<f64> {
        BaseStation::new(
            0,
            tier,
            Point::default(),
            capacity,
            PowerParams::new(p.0, p.1, p.2, p.3).unwrap(),
        )
        .unwrap()
    }

    fn net(s: usize) -> Network<f64> {
        Network::new(
            station(Tier::Haps, 20.0, (1000.0, 4.7, 380.0, 500.0)),
            station(Tier::Mbs, 10.0, (130.0, 4.7, 170.0, 75.0)),
            (0..s)
                .map(|_| station(Tier::Sbs, 1.0, (56.0, 2.6, 6.3, 39.0)))
                .collect(),
        )
        .unwrap()
    }

    fn phi(x: f64) -> RelativeCapacity<f64> {
        RelativeCapacity::new(x).unwrap()
    }

    #[test]
    fn relative_capacity_cases() {
        let a = station(Tier::Sbs, 10.0, (2.0, 1.0, 1.0, 1.0));
        let b = station(Tier::Haps, 200.0, (2.0, 1.0, 1.0, 1.0));
        assert_eq!(relative_capacity(&a, &a).unwrap().value(), 1.0);
        assert_relative_eq!(relative_capacity(&a, &b).unwrap().value(), 0.05);
        let mut zero = b.clone();
        zero.capacity = 0.0;
        assert!(relative_capacity(&a, &zero).is_err());
    }

    #[test]
    fn switch_off_moves_load() {
        let loads = NetworkLoadState::new(0.3, 0.0, vec![0.4]).unwrap();
        let off = apply_switch_off(&loads, 0, Sink::Haps, phi(0.05)).unwrap();
        assert_relative_eq!(off.lambda_haps(), 0.32, epsilon = 1e-15);
        assert_eq!(off.lambda_sbs()[0], 0.0);
        assert_eq!(off.lambda_mbs(), 0.0);

        let idle = NetworkLoadState::new(0.3, 0.2, vec![0.0]).unwrap();
        assert_eq!(
            apply_switch_off(&idle, 0, Sink::Mbs, phi(0.05)).unwrap(),
            idle
        );

        let full = NetworkLoadState::new(0.99, 0.0, vec![0.4]).unwrap();
        assert!(matches!(
            apply_switch_off(&full, 0, Sink::Haps, phi(0.05)),
            Err(Error::Infeasible(_))
        ));
        assert!(apply_switch_off(&full, 3, Sink::Haps, phi(0.05)).is_err());
    }

    #[test]
    fn switch_on_returns_load() {
        let loads = NetworkLoadState::new(0.32, 0.0, vec![0.0]).unwrap();
        let on = apply_switch_on(&loads, 0, 0.4, Sink::Haps, phi(0.05)).unwrap();
        assert_relative_eq!(on.lambda_haps(), 0.30, epsilon = 1e-15);
        assert_eq!(on.lambda_sbs()[0], 0.4);
        assert_eq!(
            apply_switch_on(&loads, 0, 0.0, Sink::Haps, phi(0.05)).unwrap(),
            loads
        );
        let low = NetworkLoadState::new(0.01, 0.0, vec![0.0]).unwrap();
        assert!(matches!(
            apply_switch_on(&low, 0, 0.4, Sink::Haps, phi(0.05)),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn switch_vector_invariants() {
        assert!(SwitchVector::from_parts(vec![true], vec![Some(Sink::Haps)]).is_err());
        assert!(SwitchVector::from_parts(vec![false], vec![None]).is_err());
        assert!(SwitchVector::from_parts(vec![false], vec![]).is_err());
        let v = SwitchVector::from_parts(vec![false, true], vec![Some(Sink::Mbs), None]).unwrap();
        assert_eq!(v.sleeping().collect::<Vec<_>>(), vec![0]);
        assert_eq!(v.on_count(), 1);
    }

    #[test]
    fn high_loads_keep_everything_on() {
        let n = net(3);
        let loads = NetworkLoadState::new(0.2, 0.2, vec![0.9, 0.95, 1.0]).unwrap();
        let plan = optimize_exhaustive(&n, &loads, SinkSet::MbsAndHaps, 14).unwrap();
        assert_eq!(plan.switch, SwitchVector::all_on(3));
        assert_eq!(plan.loads, loads);
    }

    #[test]
    fn zero_load_sbs_sleeps() {
        let n = net(2);
        let loads = NetworkLoadState::new(0.2, 0.2, vec![0.9, 0.0]).unwrap();
        let plan = optimize_exhaustive(&n, &loads, SinkSet::MbsAndHaps, 14).unwrap();
        assert!(plan.switch.is_on(0));
        assert!(!plan.switch.is_on(1));
        // zero offload is a power tie between sinks; HAPS wins the tie-break
        assert_eq!(plan.switch.offload_target(1), Some(Sink::Haps));

        let greedy = optimize_greedy(
            &n,
            &NetworkLoadState::new(0.2, 0.2, vec![0.0, 0.0]).unwrap(),
            SinkSet::MbsAndHaps,
        )
        .unwrap();
        assert_eq!(greedy.switch.on_count(), 0);
    }

    #[test]
    fn full_sinks_block_sleeping() {
        let n = net(4);
        let loads = NetworkLoadState::new(1.0, 1.0, vec![0.1, 0.2, 0.05, 0.3]).unwrap();
        assert_eq!(
            optimize_greedy(&n, &loads, SinkSet::MbsAndHaps)
                .unwrap()
                .switch,
            SwitchVector::all_on(4)
        );
        assert_eq!(
            optimize_exhaustive(&n, &loads, SinkSet::MbsAndHaps, 14)
                .unwrap()
                .switch,
            SwitchVector::all_on(4)
        );
    }

    #[test]
    fn haps_only_never_uses_mbs() {
        let n = net(5);
        let loads = NetworkLoadState::new(0.1, 0.1, vec![0.05, 0.1, 0.15, 0.2, 0.6]).unwrap();
        for plan in [
            optimize_exhaustive(&n, &loads, SinkSet::HapsOnly, 14).unwrap(),
            optimize_greedy(&n, &loads, SinkSet::HapsOnly).unwrap(),
        ] {
            assert!(plan
                .switch
                .sleeping()
                .all(|j| plan.switch.offload_target(j) == Some(Sink::Haps)));
            assert_eq!(plan.loads.lambda_mbs(), 0.1);
        }
    }

    #[test]
    fn exhaustive_refuses_large_instances() {
        let n = net(15);
        let loads = NetworkLoadState::new(0.1, 0.1, vec![0.1; 15]).unwrap();
        assert!(matches!(
            optimize_exhaustive(&n, &loads, SinkSet::MbsAndHaps, 14),
            Err(Error::Size(_))
        ));
    }

    fn instance() -> impl Strategy<Value = (usize, f64, f64, Vec<f64>)> {
        (1usize..=6).prop_flat_map(|s| {
            (
                Just(s),
                0.0f64..1.0,
                0.0f64..1.0,
                proptest::collection::vec(0.0f64..=1.0, s),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exhaustive_never_worse_than_greedy((s, h, m, l) in instance()) {
            let n = net(s);
            let loads = NetworkLoadState::new(h, m, l).unwrap();
            let ex = optimize_exhaustive(&n, &loads, SinkSet::MbsAndHaps, 14).unwrap();
            let gr = optimize_greedy(&n, &loads, SinkSet::MbsAndHaps).unwrap();
            let all_on = total_power(&n, &SwitchVector::all_on(s), &loads).unwrap();
            prop_assert!(ex.power <= gr.power + 1e-9);
            prop_assert!(gr.power <= all_on);
            prop_assert!(gr.loads.lambda_haps() <= 1.0 && gr.loads.lambda_mbs() <= 1.0);
            prop_assert!(ex.loads.lambda_haps() <= 1.0 && ex.loads.lambda_mbs() <= 1.0);
            let again = optimize_exhaustive(&n, &loads, SinkSet::MbsAndHaps, 14).unwrap();
            prop_assert_eq!(again.switch, ex.switch);
        }

        #[test]
        fn off_then_on_is_identity(h in 0.0f64..0.9, m in 0.0f64..0.9, l in proptest::collection::vec(0.0f64..=1.0, 1..8), pick in 0usize..8, to_mbs: bool) {
            let j = pick % l.len();
            let loads = NetworkLoadState::new(h, m, l).unwrap();
            let sink = if to_mbs { Sink::Mbs } else { Sink::Haps };
            let p = phi(0.1);
            if let Ok(off) = apply_switch_off(&loads, j, sink, p) {
                let back = apply_switch_on(&off, j, loads.lambda_sbs()[j], sink, p).unwrap();
                prop_assert_eq!(back, loads);
            }
        }
    }
}
