//! Exact continuous-time simulation of `L_N = L_G + N^2 L_K`.
//!
//! Flip rates are cached per site in a sum tree, and the set of bonds whose
//! endpoints differ is kept explicitly. Exchanges across equal endpoints do not
//! change the state and are never scheduled.

mod coupling;
mod tree;

pub use coupling::{coalescence_times, tv_mixing_upper_estimate, CoupledPair, CouplingEstimate};

use crate::hydro::DensitySlice;
use crate::model::{exchange_rate, Configuration, Dynamics, LocalRate};
use crate::rng::{self, SimRng};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use tree::{IndexSet, SumTree};

/// One jump of the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    /// Site `site` flipped; `to` is its new occupation.
    Flip { site: usize, to: u8 },
    /// Occupations at `bond` and `bond + 1` were exchanged (they differed).
    Exchange { bond: usize },
}

impl Event {
    /// Occupation changes `(site, +1 or -1)` caused by the event, read off the
    /// configuration right after it. A flip fills only the first slot.
    pub fn deltas(&self, after: &Configuration) -> [(usize, f64); 2] {
        let sign = |x: usize| if after.bits()[x] == 1 { 1.0 } else { -1.0 };
        match *self {
            Event::Flip { site, .. } => [(site, sign(site)), (site, 0.0)],
            Event::Exchange { bond } => {
                let y = (bond + 1) % after.n();
                [(bond, sign(bond)), (y, sign(y))]
            }
        }
    }
}

/// A logged event: the waiting time since the previous event, then the event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedEvent {
    pub dt: f64,
    pub event: Event,
}

const LOG_RECORD: usize = 13;

/// Decodes the binary event log (little-endian `f64` delta, `u8` kind with
/// 0 = flip to empty, 1 = flip to occupied, 2 = exchange, `u32` site).
pub fn parse_event_log(bytes: &[u8]) -> Result<Vec<LoggedEvent>> {
    if bytes.len() % LOG_RECORD != 0 {
        return Err(Error::InvalidArgument(format!(
            "event log length {} is not a multiple of {LOG_RECORD}",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(LOG_RECORD)
        .map(|rec| {
            let dt = f64::from_le_bytes(rec[0..8].try_into().unwrap());
            let site = u32::from_le_bytes(rec[9..13].try_into().unwrap()) as usize;
            let event = match rec[8] {
                0 | 1 => Event::Flip { site, to: rec[8] },
                2 => Event::Exchange { bond: site },
                k => {
                    return Err(Error::InvalidArgument(format!("unknown event kind {k}")));
                }
            };
            Ok(LoggedEvent { dt, event })
        })
        .collect()
}

/// State of one trajectory with incremental rate caches.
#[derive(Debug, Clone)]
pub struct SimState {
    config: Configuration,
    rate: LocalRate,
    dynamics: Dynamics,
    time: f64,
    rng: SimRng,
    windows: Vec<usize>,
    flips: SumTree,
    active: IndexSet,
    bond_rate: f64,
    flip_events: u64,
    exchange_events: u64,
    log: Option<Vec<u8>>,
    last_event_time: f64,
}

impl SimState {
    /// Starts at time 0 with the random stream `(seed, stream)`.
    pub fn new(
        config: Configuration,
        rate: LocalRate,
        dynamics: Dynamics,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        Self::with_rng(config, rate, dynamics, rng::stream(seed, stream))
    }

    pub fn with_rng(
        config: Configuration,
        rate: LocalRate,
        dynamics: Dynamics,
        rng: SimRng,
    ) -> Result<Self> {
        let n = config.n();
        rate.check_fits(n)?;
        let windows: Vec<usize> = (0..n).map(|x| rate.window_index(&config, x)).collect();
        let weights: Vec<f64> = if dynamics.flips() {
            windows.iter().map(|&w| rate.at(w)).collect()
        } else {
            vec![0.0; n]
        };
        let mut active = IndexSet::new(n);
        for b in 0..n {
            if config.bits()[b] != config.bits()[(b + 1) % n] {
                active.insert(b);
            }
        }
        Ok(Self {
            bond_rate: exchange_rate(n),
            flips: SumTree::new(&weights),
            config,
            rate,
            dynamics,
            time: 0.0,
            rng,
            windows,
            active,
            flip_events: 0,
            exchange_events: 0,
            log: None,
            last_event_time: 0.0,
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn rate(&self) -> &LocalRate {
        &self.rate
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Number of flip and exchange events so far.
    pub fn event_counts(&self) -> (u64, u64) {
        (self.flip_events, self.exchange_events)
    }

    /// Bonds `b` with `eta(b) != eta(b + 1)`, ascending.
    pub fn active_bonds(&self) -> Vec<usize> {
        self.active.sorted()
    }

    /// Cached flip rate at `x` (zero when flips are disabled).
    pub fn cached_flip_rate(&self, x: usize) -> f64 {
        self.flips.get(x)
    }

    /// Total jump rate `(n^2/2) |active bonds| + sum_x c(x, eta)`.
    pub fn total_rate(&self) -> f64 {
        self.bond_rate * self.active.len() as f64 + self.flips.total()
    }

    pub fn enable_event_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
        self.last_event_time = self.time;
    }

    /// Returns the log collected so far and clears it; logging stays on.
    pub fn take_event_log(&mut self) -> Vec<u8> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Samples the next event if it happens no later than `t_limit`.
    /// Otherwise the clock moves to `t_limit` and `None` is returned, which
    /// is exact by memorylessness.
    pub fn step(&mut self, t_limit: f64) -> Option<Event> {
        let total = self.total_rate();
        if total <= 0.0 {
            self.time = self.time.max(t_limit);
            return None;
        }
        let e: f64 = self.rng.sample(Exp1);
        let t_next = self.time + e / total;
        if t_next > t_limit {
            self.time = t_limit;
            return None;
        }
        self.time = t_next;
        let flip_total = self.flips.total();
        let u = self.rng.random::<f64>() * total;
        let event = if u < flip_total {
            let x = self.flips.find(u);
            self.toggle_site(x);
            for b in [(x + self.n() - 1) % self.n(), x] {
                self.refresh_bond(b);
            }
            self.flip_events += 1;
            Event::Flip {
                site: x,
                to: self.config.bits()[x],
            }
        } else {
            let k = self.rng.random_range(0..self.active.len());
            let b = self.active.nth(k);
            let n = self.n();
            self.toggle_site(b);
            self.toggle_site((b + 1) % n);
            self.refresh_bond((b + n - 1) % n);
            self.refresh_bond((b + 1) % n);
            self.exchange_events += 1;
            Event::Exchange { bond: b }
        };
        if self.log.is_some() {
            self.write_log(event);
        }
        #[cfg(debug_assertions)]
        if (self.flip_events + self.exchange_events) % (1 << 20) == 0 {
            if let Err(msg) = self.check_caches() {
                panic!("cache incoherent: {msg}");
            }
        }
        Some(event)
    }

    /// Runs until `t_end`.
    pub fn advance(&mut self, t_end: f64) {
        assert!(t_end >= self.time, "cannot advance backwards");
        while self.step(t_end).is_some() {}
    }

    /// Runs until `t_end`, passing every event to `observe`.
    pub fn advance_with(&mut self, t_end: f64, mut observe: impl FnMut(&Self, Event)) {
        assert!(t_end >= self.time, "cannot advance backwards");
        while let Some(ev) = self.step(t_end) {
            observe(self, ev);
        }
    }

    /// Compares every cache with a recomputation from the configuration.
    pub fn check_caches(&self) -> std::result::Result<(), String> {
        let n = self.n();
        for x in 0..n {
            let w = self.rate.window_index(&self.config, x);
            if w != self.windows[x] {
                return Err(format!("window at {x}: cached {} vs {w}", self.windows[x]));
            }
            let c = if self.dynamics.flips() { self.rate.at(w) } else { 0.0 };
            if c != self.flips.get(x) {
                return Err(format!("flip rate at {x}"));
            }
            let differs = self.config.bits()[x] != self.config.bits()[(x + 1) % n];
            if differs != self.active.contains(x) {
                return Err(format!("bond {x}"));
            }
        }
        Ok(())
    }

    fn toggle_site(&mut self, x: usize) {
        self.config.toggle(x);
        let n = self.n();
        let r = self.rate.radius();
        for o in 0..=2 * r {
            // site y = x + o - r sees x at bit o
            let y = (x + n + o - r) % n;
            self.windows[y] ^= 1 << o;
            if self.dynamics.flips() {
                self.flips.set(y, self.rate.at(self.windows[y]));
            }
        }
    }

    fn refresh_bond(&mut self, b: usize) {
        let bits = self.config.bits();
        let differs = bits[b] != bits[(b + 1) % bits.len()];
        self.active.assign(b, differs);
    }

    fn write_log(&mut self, event: Event) {
        let dt = self.time - self.last_event_time;
        self.last_event_time = self.time;
        let (kind, site) = match event {
            Event::Flip { site, to } => (to, site),
            Event::Exchange { bond } => (2u8, bond),
        };
        let log = self.log.as_mut().unwrap();
        log.extend_from_slice(&dt.to_le_bytes());
        log.push(kind);
        log.extend_from_slice(&(site as u32).to_le_bytes());
    }
}

/// Block averages of the occupation variables at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalProfile {
    pub bins: Vec<f64>,
    pub n: usize,
    pub time: f64,
}

impl EmpiricalProfile {
    /// `sum_j bins[j] / M`, equal to the particle density.
    pub fn mass(&self) -> f64 {
        self.bins.iter().sum::<f64>() / self.bins.len() as f64
    }
}

/// Bin `j` averages `eta` over the sites `x` with `x / n` in `[j/M, (j+1)/M)`.
pub fn configuration_profile(config: &Configuration, bins: usize) -> Result<Vec<f64>> {
    let n = config.n();
    if bins == 0 || n % bins != 0 {
        return Err(Error::BinMismatch { n, bins });
    }
    let width = n / bins;
    Ok(config
        .bits()
        .chunks_exact(width)
        .map(|c| c.iter().map(|&b| b as f64).sum::<f64>() / width as f64)
        .collect())
}

pub fn empirical_profile(state: &SimState, bins: usize) -> Result<EmpiricalProfile> {
    Ok(EmpiricalProfile {
        bins: configuration_profile(state.config(), bins)?,
        n: state.n(),
        time: state.time(),
    })
}

/// Independent Bernoulli occupations with mean `rho(x / n)`.
pub fn sample_profile_configuration(
    rho: &DensitySlice,
    n: usize,
    rng: &mut impl Rng,
) -> Configuration {
    let bits = (0..n)
        .map(|x| {
            let p = rho.at(x as f64 / n as f64).clamp(0.0, 1.0);
            rng.random_bool(p) as u8
        })
        .collect();
    Configuration::from_bits(bits)
}
