//! EARTH-style base-station power model and whole-network power.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Point, Scalar};
use crate::switching::SwitchVector;

/// Per-station EARTH parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerParams<T> {
    /// Operational circuit power, watts.
    pub operational: T,
    pub amplifier_efficiency: T,
    /// Transmit power, watts.
    pub transmit: T,
    /// Sleep-mode power, watts.
    pub sleep: T,
}

impl<T: Scalar> PowerParams<T> {
    pub fn new(operational: T, amplifier_efficiency: T, transmit: T, sleep: T) -> Result<Self> {
        let p = Self {
            operational,
            amplifier_efficiency,
            transmit,
            sleep,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sleep >= T::zero() && self.operational > self.sleep) {
            return Err(Error::Domain(format!(
                "need operational > sleep >= 0, got {} and {}",
                self.operational, self.sleep
            )));
        }
        if !(self.transmit > T::zero()) || !(self.amplifier_efficiency > T::zero()) {
            return Err(Error::Domain(
                "transmit power and amplifier efficiency must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Power drawn per unit of load factor while active.
    pub fn load_slope(&self) -> T {
        self.amplifier_efficiency * self.transmit
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Sbs,
    Mbs,
    Haps,
}

/// Always-on station that can absorb traffic from a sleeping SBS.
/// `Haps` orders first, which is the tie-break preference of the optimizers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sink {
    Haps,
    Mbs,
}

impl Sink {
    pub const ALL: [Sink; 2] = [Sink::Haps, Sink::Mbs];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseStation<T> {
    pub id: u32,
    pub tier: Tier,
    pub position: Point<T>,
    pub capacity: T,
    pub power: PowerParams<T>,
}

impl<T: Scalar> BaseStation<T> {
    pub fn new(
        id: u32,
        tier: Tier,
        position: Point<T>,
        capacity: T,
        power: PowerParams<T>,
    ) -> Result<Self> {
        if !(capacity > T::zero()) {
            return Err(Error::Domain(format!(
                "station {id}: capacity must be positive"
            )));
        }
        power.validate()?;
        Ok(Self {
            id,
            tier,
            position,
            capacity,
            power,
        })
    }
}

/// One macro cell: exactly one HAPS, one MBS and `s` SBSs.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    haps: BaseStation<T>,
    mbs: BaseStation<T>,
    sbs: Vec<BaseStation<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(
        haps: BaseStation<T>,
        mbs: BaseStation<T>,
        sbs: Vec<BaseStation<T>>,
    ) -> Result<Self> {
        if haps.tier != Tier::Haps || mbs.tier != Tier::Mbs {
            return Err(Error::InvalidArgument(
                "network needs exactly one HAPS and one MBS".into(),
            ));
        }
        if let Some(b) = sbs.iter().find(|b| b.tier != Tier::Sbs) {
            return Err(Error::InvalidArgument(format!(
                "station {} is not an SBS",
                b.id
            )));
        }
        Ok(Self { haps, mbs, sbs })
    }

    pub fn haps(&self) -> &BaseStation<T> {
        &self.haps
    }

    pub fn mbs(&self) -> &BaseStation<T> {
        &self.mbs
    }

    pub fn sink(&self, sink: Sink) -> &BaseStation<T> {
        match sink {
            Sink::Haps => &self.haps,
            Sink::Mbs => &self.mbs,
        }
    }

    pub fn sbs(&self) -> &[BaseStation<T>] {
        &self.sbs
    }

    pub fn sbs_count(&self) -> usize {
        self.sbs.len()
    }
}

/// Load factor of an offload sink, kept as its own base load plus the
/// contribution of every SBS currently offloaded onto it. Contributions are
/// summed in SBS-index order, so removing one restores the previous value
/// bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SinkLoad<T> {
    base: T,
    offloads: BTreeMap<usize, T>,
}

impl<T: Scalar> SinkLoad<T> {
    fn new(base: T) -> Self {
        Self {
            base,
            offloads: BTreeMap::new(),
        }
    }

    pub fn value(&self) -> T {
        self.offloads.values().fold(self.base, |acc, &c| acc + c)
    }

    pub fn offloaded_from(&self, sbs: usize) -> Option<T> {
        self.offloads.get(&sbs).copied()
    }

    pub(crate) fn add_offload(&mut self, sbs: usize, amount: T) {
        if amount != T::zero() {
            *self.offloads.entry(sbs).or_insert_with(T::zero) += amount;
        }
    }

    /// Removes `amount` from the sink, first from `sbs`'s recorded contribution.
    pub(crate) fn remove_offload(&mut self, sbs: usize, amount: T) {
        match self.offloads.remove(&sbs) {
            Some(recorded) => {
                let residual = recorded - amount;
                if residual != T::zero() {
                    self.base += residual;
                }
            }
            None => {
                if amount != T::zero() {
                    self.base -= amount;
                }
            }
        }
    }
}

/// Load factors of every station in the network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkLoadState<T> {
    haps: SinkLoad<T>,
    mbs: SinkLoad<T>,
    sbs: Vec<T>,
}

fn check_load<T: Scalar>(what: &str, v: T) -> Result<()> {
    if v >= T::zero() && v <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} load {v} outside [0, 1]")))
    }
}

impl<T: Scalar> NetworkLoadState<T> {
    pub fn new(lambda_haps: T, lambda_mbs: T, lambda_sbs: Vec<T>) -> Result<Self> {
        check_load("HAPS", lambda_haps)?;
        check_load("MBS", lambda_mbs)?;
        for (j, &l) in lambda_sbs.iter().enumerate() {
            check_load(&format!("SBS {j}"), l)?;
        }
        Ok(Self {
            haps: SinkLoad::new(lambda_haps),
            mbs: SinkLoad::new(lambda_mbs),
            sbs: lambda_sbs,
        })
    }

    pub fn lambda_haps(&self) -> T {
        self.haps.value()
    }

    pub fn lambda_mbs(&self) -> T {
        self.mbs.value()
    }

    pub fn lambda_sink(&self, sink: Sink) -> T {
        self.sink_load(sink).value()
    }

    pub fn sink_load(&self, sink: Sink) -> &SinkLoad<T> {
        match sink {
            Sink::Haps => &self.haps,
            Sink::Mbs => &self.mbs,
        }
    }

    pub(crate) fn sink_load_mut(&mut self, sink: Sink) -> &mut SinkLoad<T> {
        match sink {
            Sink::Haps => &mut self.haps,
            Sink::Mbs => &mut self.mbs,
        }
    }

    pub fn lambda_sbs(&self) -> &[T] {
        &self.sbs
    }

    pub(crate) fn sbs_mut(&mut self) -> &mut [T] {
        &mut self.sbs
    }

    /// Total carried traffic `sum C_k * lambda_k` over all stations.
    pub fn carried_traffic(&self, network: &Network<T>) -> T {
        let sbs: T = self
            .sbs
            .iter()
            .zip(network.sbs())
            .map(|(&l, b)| l * b.capacity)
            .sum();
        self.lambda_haps() * network.haps().capacity
            + self.lambda_mbs() * network.mbs().capacity
            + sbs
    }
}

/// Single-station power: active branch `P_o + eta * load * P_t`, sleep branch `P_s`.
pub fn bs_power<T: Scalar>(params: &PowerParams<T>, load: T, active: bool) -> Result<T> {
    check_load("station", load)?;
    if active {
        Ok(params.operational + params.amplifier_efficiency * load * params.transmit)
    } else if load > T::zero() {
        Err(Error::Inconsistent(format!(
            "sleeping station carries load {load}"
        )))
    } else {
        Ok(params.sleep)
    }
}

fn network_power<T: Scalar>(
    network: &Network<T>,
    switch: &SwitchVector,
    loads: &NetworkLoadState<T>,
    sleepers_must_be_idle: bool,
) -> Result<T> {
    let s = network.sbs_count();
    if switch.len() != s || loads.lambda_sbs().len() != s {
        return Err(Error::Inconsistent(format!(
            "network has {s} SBSs, switch vector {} and load vector {}",
            switch.len(),
            loads.lambda_sbs().len()
        )));
    }
    let mut total = bs_power(&network.haps().power, loads.lambda_haps(), true)?
        + bs_power(&network.mbs().power, loads.lambda_mbs(), true)?;
    for ((station, &load), &on) in network
        .sbs()
        .iter()
        .zip(loads.lambda_sbs())
        .zip(switch.delta())
    {
        total += if on || sleepers_must_be_idle {
            bs_power(&station.power, load, on)?
        } else {
            station.power.sleep
        };
    }
    Ok(total)
}

/// Total instantaneous power of the network; HAPS and MBS always use the
/// active branch. A sleeping SBS with non-zero load is an error.
pub fn total_power<T: Scalar>(
    network: &Network<T>,
    switch: &SwitchVector,
    loads: &NetworkLoadState<T>,
) -> Result<T> {
    network_power(network, switch, loads, true)
}

/// Same closed form evaluated on estimated loads. Sleeping SBSs contribute
/// their sleep power whatever their estimate is.
pub fn estimated_power<T: Scalar>(
    network: &Network<T>,
    switch: &SwitchVector,
    estimated: &NetworkLoadState<T>,
) -> Result<T> {
    network_power(network, switch, estimated, false)
}

fn check_probability<T: Scalar>(p: T) -> Result<()> {
    if p >= T::zero() && p <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {p} outside [0, 1]")))
    }
}

/// `P_est * p_err + P_T * (1 - p_err)`.
pub fn expected_power<T: Scalar>(power_est: T, power_true: T, p_err: T) -> Result<T> {
    check_probability(p_err)?;
    Ok(power_est * p_err + power_true * (T::one() - p_err))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchErrorDirection {
    /// Overestimation wakes an SBS that should stay asleep.
    OffToOn,
    /// Underestimation keeps an SBS asleep that should be active.
    OnToOff,
}

/// Expected power error of one wrong transition, offloading against the HAPS.
#[allow(clippy::too_many_arguments)]
pub fn expected_switch_error<T: Scalar>(
    direction: SwitchErrorDirection,
    sbs: &BaseStation<T>,
    haps: &BaseStation<T>,
    lambda_true: T,
    lambda_est: T,
    p_err: T,
    phi_haps: T,
) -> Result<T> {
    check_load("true", lambda_true)?;
    check_load("estimated", lambda_est)?;
    check_probability(p_err)?;
    if !(phi_haps > T::zero()) {
        return Err(Error::Domain(format!(
            "relative capacity {phi_haps} must be positive"
        )));
    }
    let (s, h) = (&sbs.power, &haps.power);
    let offloaded = |load: T| h.amplifier_efficiency * phi_haps * load * h.transmit + s.sleep;
    let active = |load: T| s.operational + s.amplifier_efficiency * load * s.transmit;
    let gap = match direction {
        SwitchErrorDirection::OffToOn => offloaded(lambda_true) - active(lambda_est),
        SwitchErrorDirection::OnToOff => active(lambda_true) - offloaded(lambda_est),
    };
    Ok(gap.abs() * p_err)
}
