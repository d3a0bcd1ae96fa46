//! Slotted Monte Carlo simulation of the network on a torus.
//!
//! Each slot every node takes one step of length `v` in a fresh uniform
//! direction, each station charges up to `u` of the nodes in its range, and
//! every node flips into transmitter mode with probability `q`. An active
//! transmitter with a receiver within `r` sends one packet and spends one
//! unit. Odd slots carry source packets to relays, even slots carry relayed
//! packets (or the source's own packet) to destinations.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::math::{cos, sin, sqrt, wrap, PI};
use crate::model::{charge_units, distance_state, ChargingProfile, NetworkConfig};
use crate::Result;

/// Run length and bookkeeping switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub slots: u64,
    pub warmup: u64,
    /// Batches used for batch-means standard errors.
    pub batches: usize,
    /// Keep the per-slot active fraction.
    pub record_series: bool,
}

impl SimOptions {
    pub fn new(slots: u64, warmup: u64) -> Self {
        SimOptions {
            slots,
            warmup,
            batches: 20,
            record_series: false,
        }
    }
}

/// Totals over a block of measured slots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Tally {
    pub slots: u64,
    pub node_slots: u64,
    /// Nodes holding energy at the start of the slot.
    pub active: u64,
    /// Nodes holding energy when the transmit decision is made, after charging.
    pub active_at_decision: u64,
    /// Transmitter-mode nodes with a receiver in range, regardless of energy.
    pub opportunities: u64,
    pub transmissions: u64,
    pub covered: u64,
    pub charged: u64,
    pub raw_inflow: u64,
    pub accepted_inflow: u64,
    pub delivered: u64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.slots += o.slots;
        self.node_slots += o.node_slots;
        self.active += o.active;
        self.active_at_decision += o.active_at_decision;
        self.opportunities += o.opportunities;
        self.transmissions += o.transmissions;
        self.covered += o.covered;
        self.charged += o.charged;
        self.raw_inflow += o.raw_inflow;
        self.accepted_inflow += o.accepted_inflow;
        self.delivered += o.delivered;
    }
}

/// Everything measured after warmup.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub nodes: usize,
    pub totals: Tally,
    /// Per-batch totals, for standard errors.
    pub batches: Vec<Tally>,
    /// Distance-state transition counts, row-major `(M+1)×(M+1)`; empty when `v = 0`.
    pub transitions: Vec<u64>,
    pub states: usize,
    /// Inter-meeting times in slots.
    pub intermeeting: Vec<u32>,
    /// Packets delivered per source node.
    pub delivered_per_node: Vec<u64>,
    /// Fraction of active nodes in each measured slot.
    pub active_series: Vec<f64>,
    pub max_energy_seen: usize,
}

/// Point estimate with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    /// Fraction of node-slots starting with energy.
    pub p_on: Measured,
    /// Same, sampled after charging at the transmit decision.
    pub p_on_at_decision: Measured,
    /// Transmissions per node-slot with energy at the decision.
    pub p_t: Measured,
    /// Transmitter-mode nodes with a receiver in range per node-slot.
    pub transmit_opportunity: Measured,
    pub p_c: Measured,
    /// Energy units offered per node per slot, before the battery cap.
    pub inflow: Measured,
    pub accepted_inflow: Measured,
    /// Delivered packets per node per slot.
    pub throughput: Measured,
    pub mean_intermeeting: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

impl SimStats {
    fn measure(&self, f: impl Fn(&Tally) -> f64) -> Measured {
        let value = f(&self.totals);
        let xs: Vec<f64> = self.batches.iter().map(&f).filter(|x| x.is_finite()).collect();
        let std_error = if xs.len() < 2 {
            f64::NAN
        } else {
            let k = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / k;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
            sqrt(var / k)
        };
        Measured { value, std_error }
    }

    pub fn estimates(&self) -> Estimates {
        let mean_intermeeting = if self.intermeeting.is_empty() {
            f64::NAN
        } else {
            self.intermeeting.iter().map(|&t| t as f64).sum::<f64>() / self.intermeeting.len() as f64
        };
        Estimates {
            p_on: self.measure(|t| ratio(t.active, t.node_slots)),
            p_on_at_decision: self.measure(|t| ratio(t.active_at_decision, t.node_slots)),
            p_t: self.measure(|t| ratio(t.transmissions, t.active_at_decision)),
            transmit_opportunity: self.measure(|t| ratio(t.opportunities, t.node_slots)),
            p_c: self.measure(|t| ratio(t.charged, t.covered)),
            inflow: self.measure(|t| ratio(t.raw_inflow, t.node_slots)),
            accepted_inflow: self.measure(|t| ratio(t.accepted_inflow, t.node_slots)),
            throughput: self.measure(|t| ratio(t.delivered, t.node_slots)),
            mean_intermeeting,
        }
    }

    /// Visits to each distance state that were followed by a transition.
    pub fn row_visits(&self) -> Vec<u64> {
        self.transitions
            .chunks(self.states.max(1))
            .map(|r| r.iter().sum())
            .collect()
    }

    /// Pools two runs. Counts add, batches and samples are kept as sorted
    /// multisets, and the per-slot series (meaningful for one run only) is dropped.
    pub fn merge(&self, other: &SimStats) -> SimStats {
        assert_eq!(self.nodes, other.nodes);
        assert_eq!(self.states, other.states);
        let mut totals = self.totals;
        totals.add(&other.totals);
        let mut batches: Vec<Tally> = self.batches.iter().chain(&other.batches).copied().collect();
        batches.sort();
        let transitions = self
            .transitions
            .iter()
            .zip(&other.transitions)
            .map(|(a, b)| a + b)
            .collect();
        let mut intermeeting: Vec<u32> =
            self.intermeeting.iter().chain(&other.intermeeting).copied().collect();
        intermeeting.sort_unstable();
        SimStats {
            nodes: self.nodes,
            totals,
            batches,
            transitions,
            states: self.states,
            intermeeting,
            delivered_per_node: self
                .delivered_per_node
                .iter()
                .zip(&other.delivered_per_node)
                .map(|(a, b)| a + b)
                .collect(),
            active_series: Vec::new(),
            max_energy_seen: self.max_energy_seen.max(other.max_energy_seen),
        }
    }
}

/// Row-normalized transition frequencies; rows with too few visits are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalKernel {
    pub rows: Vec<Option<Vec<f64>>>,
    pub visits: Vec<u64>,
    pub p_t: Measured,
    pub p_c: Measured,
}

impl EmpiricalKernel {
    /// Total-variation distance of each completed row from `p`.
    pub fn total_variation(&self, p: &Matrix) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.as_ref()
                    .map(|r| 0.5 * r.iter().zip(p.row(i)).map(|(a, b)| (a - b).abs()).sum::<f64>())
            })
            .collect()
    }
}

pub const MIN_ROW_VISITS: u64 = 1000;

pub fn empirical_kernel(stats: &SimStats, min_visits: u64) -> EmpiricalKernel {
    let n = stats.states;
    let visits = stats.row_visits();
    let rows = (0..n)
        .map(|i| {
            let v = visits[i];
            (v >= min_visits && v > 0).then(|| {
                stats.transitions[i * n..(i + 1) * n]
                    .iter()
                    .map(|&c| c as f64 / v as f64)
                    .collect()
            })
        })
        .collect();
    let est = stats.estimates();
    EmpiricalKernel {
        rows,
        visits,
        p_t: est.p_t,
        p_c: est.p_c,
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    x: f64,
    y: f64,
}

/// Mutable state of one simulated network.
#[derive(Debug, Clone)]
pub struct World {
    pub side: f64,
    nodes: Vec<Point>,
    stations: Vec<Point>,
    energy: Vec<usize>,
    destination: Vec<usize>,
    /// Relay buffers: `relay[k][dest]` holds sources whose packets node `k` carries.
    relay: Vec<BTreeMap<usize, VecDeque<usize>>>,
    slot: u64,
    rng: ChaCha8Rng,
    profile: ChargingProfile,
    speed: f64,
    q: f64,
    capacity: usize,
    battery: usize,
    range: f64,
}

/// What happened in one slot, as seen by the measurement harness.
#[derive(Debug, Clone, Default)]
pub struct SlotReport {
    /// Nearest-station distance of each node after moving.
    pub distance: Vec<f64>,
    pub covered: Vec<bool>,
    pub charged: Vec<bool>,
    pub raw_inflow: u64,
    pub accepted_inflow: u64,
    /// Energy at the start of the slot.
    pub active_at_start: Vec<bool>,
    /// Energy at transmit decision time, after charging.
    pub active: Vec<bool>,
    /// In transmitter mode with a receiver in range.
    pub opportunity: Vec<bool>,
    pub transmitted: Vec<bool>,
    /// Source of each packet delivered to its destination.
    pub delivered: Vec<usize>,
}

impl World {
    pub fn new(cfg: &NetworkConfig) -> Result<World> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let side = cfg.side();
        let point = |rng: &mut ChaCha8Rng| Point {
            x: rng.gen_range(0.0..side),
            y: rng.gen_range(0.0..side),
        };
        let stations = (0..cfg.stations).map(|_| point(&mut rng)).collect();
        let nodes = (0..cfg.nodes).map(|_| point(&mut rng)).collect();
        let energy = (0..cfg.nodes).map(|_| rng.gen_range(0..=cfg.battery)).collect();
        let destination = (0..cfg.nodes)
            .map(|i| {
                if cfg.nodes == 1 {
                    return i;
                }
                let d = rng.gen_range(0..cfg.nodes - 1);
                if d >= i {
                    d + 1
                } else {
                    d
                }
            })
            .collect();
        Ok(World {
            side,
            nodes,
            stations,
            energy,
            destination,
            relay: vec![BTreeMap::new(); cfg.nodes],
            slot: 0,
            rng,
            profile: cfg.charging_profile()?,
            speed: cfg.speed,
            q: cfg.transmit_prob,
            capacity: cfg.station_capacity,
            battery: cfg.battery,
            range: cfg.transmission_range().exact,
        })
    }

    pub fn energy(&self) -> &[usize] {
        &self.energy
    }

    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().map(|p| (p.x, p.y)).collect()
    }

    fn torus_gap(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        d.min(self.side - d)
    }

    fn distance(&self, a: Point, b: Point) -> f64 {
        let dx = self.torus_gap(a.x, b.x);
        let dy = self.torus_gap(a.y, b.y);
        sqrt(dx * dx + dy * dy)
    }

    /// Advances one slot.
    pub fn step(&mut self) -> SlotReport {
        self.slot += 1;
        let n = self.nodes.len();
        let r1 = self.profile.radii[0];
        let active_at_start = self.energy.iter().map(|&e| e >= 1).collect();

        if self.speed > 0.0 {
            for i in 0..n {
                let theta = self.rng.gen_range(0.0..2.0 * PI);
                let p = &mut self.nodes[i];
                p.x = wrap(p.x + self.speed * cos(theta), self.side);
                p.y = wrap(p.y + self.speed * sin(theta), self.side);
            }
        }

        let mut report = SlotReport {
            distance: vec![f64::INFINITY; n],
            covered: vec![false; n],
            charged: vec![false; n],
            active_at_start,
            active: vec![false; n],
            opportunity: vec![false; n],
            transmitted: vec![false; n],
            ..SlotReport::default()
        };
        // charging: each station draws up to u of its in-range nodes
        let mut best: Vec<Option<f64>> = vec![None; n];
        let mut in_range: Vec<usize> = Vec::new();
        for s in 0..self.stations.len() {
            in_range.clear();
            for i in 0..n {
                let d = self.distance(self.nodes[i], self.stations[s]);
                if d < report.distance[i] {
                    report.distance[i] = d;
                }
                if d <= r1 {
                    in_range.push(i);
                }
            }
            let k = in_range.len().min(self.capacity);
            for j in 0..k {
                let pick = self.rng.gen_range(j..in_range.len());
                in_range.swap(j, pick);
                let i = in_range[j];
                let d = self.distance(self.nodes[i], self.stations[s]);
                if best[i].map_or(true, |b| d < b) {
                    best[i] = Some(d);
                }
            }
        }
        for i in 0..n {
            report.covered[i] = report.distance[i] <= r1;
            if let Some(d) = best[i] {
                let units = charge_units(d, &self.profile);
                let room = self.battery - self.energy[i];
                let got = units.min(room);
                self.energy[i] += got;
                report.charged[i] = true;
                report.raw_inflow += units as u64;
                report.accepted_inflow += got as u64;
            }
        }

        // routing
        let transmitter: Vec<bool> = (0..n).map(|_| self.rng.gen_bool(self.q)).collect();
        let odd = self.slot % 2 == 1;
        for i in 0..n {
            report.active[i] = self.energy[i] >= 1;
            if !transmitter[i] {
                continue;
            }
            let receivers: Vec<usize> = (0..n)
                .filter(|&k| {
                    k != i && !transmitter[k] && self.distance(self.nodes[i], self.nodes[k]) <= self.range
                })
                .collect();
            if receivers.is_empty() {
                continue;
            }
            report.opportunity[i] = true;
            if !report.active[i] {
                continue;
            }
            report.transmitted[i] = true;
            self.energy[i] -= 1;
            if odd {
                let k = receivers[self.rng.gen_range(0..receivers.len())];
                if k == self.destination[i] {
                    report.delivered.push(i);
                } else {
                    self.relay[k].entry(self.destination[i]).or_default().push_back(i);
                }
            } else {
                let mut sent = false;
                for &k in &receivers {
                    if let Some(queue) = self.relay[i].get_mut(&k) {
                        if let Some(src) = queue.pop_front() {
                            if queue.is_empty() {
                                self.relay[i].remove(&k);
                            }
                            report.delivered.push(src);
                            sent = true;
                            break;
                        }
                    }
                }
                if !sent && receivers.contains(&self.destination[i]) {
                    report.delivered.push(i);
                }
            }
        }
        report
    }
}

/// Runs `options.slots` slots and measures everything after the warmup.
pub fn run(cfg: &NetworkConfig, options: &SimOptions) -> Result<SimStats> {
    assert!(options.slots > options.warmup, "need measured slots after warmup");
    let mut world = World::new(cfg)?;
    let n = cfg.nodes;
    let geometry = if cfg.speed > 0.0 && cfg.stations > 0 {
        Some((cfg.charging_range(), cfg.speed, cfg.resolution()?))
    } else {
        None
    };
    let states = geometry.map_or(0, |g| g.2 + 1);
    let measured = options.slots - options.warmup;
    let batches = options.batches.max(1) as u64;
    let batch_len = (measured / batches).max(1);

    let mut stats = SimStats {
        nodes: n,
        totals: Tally::default(),
        batches: Vec::new(),
        transitions: vec![0; states * states],
        states,
        intermeeting: Vec::new(),
        delivered_per_node: vec![0; n],
        active_series: Vec::new(),
        max_energy_seen: 0,
    };
    let mut batch = Tally::default();
    let mut prev_state: Vec<Option<usize>> = vec![None; n];
    // slot of the last covered visit, and whether the node has left since
    let mut last_in: Vec<Option<u64>> = vec![None; n];
    let mut away: Vec<bool> = vec![false; n];

    for t in 1..=options.slots {
        let report = world.step();
        let measuring = t > options.warmup;
        for i in 0..n {
            stats.max_energy_seen = stats.max_energy_seen.max(world.energy[i]);
            let state = geometry.map(|(r1, v, m)| distance_state(report.distance[i], r1, v, m));
            if measuring {
                if let (Some(a), Some(b)) = (prev_state[i], state) {
                    stats.transitions[a * states + b] += 1;
                }
            }
            prev_state[i] = state;
            if report.covered[i] {
                if let (Some(s), true) = (last_in[i], away[i]) {
                    if measuring {
                        stats.intermeeting.push((t - s) as u32);
                    }
                }
                last_in[i] = Some(t);
                away[i] = false;
            } else {
                away[i] = true;
            }
        }
        if !measuring {
            continue;
        }
        let count = |v: &[bool]| v.iter().filter(|&&a| a).count() as u64;
        let active = count(&report.active_at_start);
        let tally = Tally {
            slots: 1,
            node_slots: n as u64,
            active,
            active_at_decision: count(&report.active),
            opportunities: count(&report.opportunity),
            transmissions: count(&report.transmitted),
            covered: report.covered.iter().filter(|&&a| a).count() as u64,
            charged: report
                .covered
                .iter()
                .zip(&report.charged)
                .filter(|(c, h)| **c && **h)
                .count() as u64,
            raw_inflow: report.raw_inflow,
            accepted_inflow: report.accepted_inflow,
            delivered: report.delivered.len() as u64,
        };
        for &src in &report.delivered {
            stats.delivered_per_node[src] += 1;
        }
        if options.record_series {
            stats.active_series.push(active as f64 / n as f64);
        }
        batch.add(&tally);
        stats.totals.add(&tally);
        if batch.slots == batch_len && (stats.batches.len() as u64) < batches - 1 {
            stats.batches.push(batch);
            batch = Tally::default();
        }
    }
    if batch.slots > 0 {
        stats.batches.push(batch);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> NetworkConfig {
        NetworkConfig {
            seed,
            ..NetworkConfig::default_scenario()
        }
    }

    #[test]
    fn same_seed_same_stats() {
        let opts = SimOptions::new(3000, 100);
        let a = run(&small(5), &opts).unwrap();
        let b = run(&small(5), &opts).unwrap();
        assert_eq!(a, b);
        let c = run(&small(6), &opts).unwrap();
        assert_ne!(a.totals, c.totals);
    }

    #[test]
    fn steps_have_length_v() {
        let cfg = NetworkConfig {
            speed: 0.7,
            ..small(3)
        };
        let mut w = World::new(&cfg).unwrap();
        for _ in 0..200 {
            let before = w.nodes.clone();
            w.step();
            for (a, b) in before.iter().zip(&w.nodes) {
                assert!((w.distance(*a, *b) - 0.7).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stationary_nodes_stay_put() {
        let cfg = NetworkConfig {
            speed: 0.0,
            resolution: Some(1),
            ..small(2)
        };
        let mut w = World::new(&cfg).unwrap();
        let before = w.positions();
        for _ in 0..20 {
            w.step();
        }
        assert_eq!(before, w.positions());
    }

    #[test]
    fn unlimited_capacity_charges_everyone_in_range() {
        let cfg = NetworkConfig {
            station_capacity: 10,
            stations: 3,
            ..small(9)
        };
        let mut w = World::new(&cfg).unwrap();
        for _ in 0..500 {
            let r = w.step();
            for i in 0..cfg.nodes {
                assert_eq!(r.covered[i], r.charged[i]);
            }
        }
    }

    #[test]
    fn energy_stays_in_bounds() {
        for seed in 0..4 {
            let cfg = NetworkConfig {
                battery: 2,
                stations: 4,
                ..small(seed)
            };
            let mut w = World::new(&cfg).unwrap();
            for _ in 0..5000 {
                w.step();
                assert!(w.energy().iter().all(|&e| e <= 2));
            }
        }
    }

    #[test]
    fn merge_is_associative() {
        let opts = SimOptions::new(800, 50);
        let a = run(&small(1), &opts).unwrap();
        let b = run(&small(2), &opts).unwrap();
        let c = run(&small(3), &opts).unwrap();
        assert_eq!(a.merge(&b).merge(&c), a.merge(&b.merge(&c)));
        assert_eq!(a.merge(&b), b.merge(&a));
    }

    #[test]
    fn empirical_rows_normalize() {
        let stats = run(&small(4), &SimOptions::new(20_000, 100)).unwrap();
        let k = empirical_kernel(&stats, MIN_ROW_VISITS);
        for row in k.rows.iter().flatten() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(stats.intermeeting.iter().all(|&t| t >= 2));
    }
}
