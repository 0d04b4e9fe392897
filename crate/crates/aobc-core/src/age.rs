//! Age recursions and delay measurement.
//!
//! Each node carries an age counter: how many slots ago the information the
//! relevant receiver holds about it was fresh. A slot that delivers a packet
//! resets the counter to 1 (the packet is one slot old once the slot ends);
//! every other slot increments it. The age of broadcast (AoB) and the age of
//! collection (AoC) are both the worst age over the node set, 0 for an empty
//! set.

use std::io::Write;

use rand::Rng;

use crate::channel::{Mode, NetworkParams, SlotOutcome, SlotSimulator};
use crate::geometry::Realization;
use crate::{Error, Real, Result};

/// Default cap on forward delay measurements, in slots.
pub const DEFAULT_DELAY_CAP: u64 = 100_000_000;

/// Per-node age counters for one direction of traffic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeLedger {
    ages: Vec<u64>,
    mode: Mode,
}

impl AgeLedger {
    /// Fresh ledger with every age at 1 (the stationary floor: an age of 0
    /// never occurs because even a slot-one packet is one slot old).
    pub fn new(node_count: usize, mode: Mode) -> Self {
        AgeLedger {
            ages: vec![1; node_count],
            mode,
        }
    }

    pub fn ages(&self) -> &[u64] {
        &self.ages
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn node_count(&self) -> usize {
        self.ages.len()
    }

    /// Advances all counters by one slot: reset to 1 on reception, else +1.
    pub fn step(&mut self, outcome: &SlotOutcome) -> Result<()> {
        if outcome.received.len() != self.ages.len() {
            return Err(Error::SizeMismatch {
                ledger: self.ages.len(),
                outcome: outcome.received.len(),
            });
        }
        for (age, &got) in self.ages.iter_mut().zip(&outcome.received) {
            *age = if got { 1 } else { *age + 1 };
        }
        Ok(())
    }

    /// Worst age over the node set; 0 when there are no nodes.
    pub fn peak_age(&self) -> u64 {
        self.ages.iter().copied().max().unwrap_or(0)
    }
}

/// Functional form of [`AgeLedger::step`]: returns the advanced ledger.
pub fn step_age(ledger: &AgeLedger, outcome: &SlotOutcome) -> Result<AgeLedger> {
    let mut next = ledger.clone();
    next.step(outcome)?;
    Ok(next)
}

/// Age of broadcast of a broadcast-mode ledger.
pub fn aob(ledger: &AgeLedger) -> u64 {
    debug_assert_eq!(ledger.mode(), Mode::Broadcast);
    ledger.peak_age()
}

/// Age of collection of a collection-mode ledger.
pub fn aoc(ledger: &AgeLedger) -> u64 {
    debug_assert_eq!(ledger.mode(), Mode::Collection);
    ledger.peak_age()
}

/// One measured delivery cycle: the slots it took until every node had
/// received (broadcast) or been heard from (collection) at least once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayRecord {
    pub start_slot: u64,
    /// Slot at which the last outstanding node was served. For a timed-out
    /// measurement this is the last simulated slot instead.
    pub completion_slot: u64,
    /// Absolute slot of each node's first reception; 0 if it never happened
    /// (only possible in the partial record of a timeout).
    pub per_node_first_reception: Vec<u64>,
}

impl DelayRecord {
    /// The delay sample itself.
    pub fn delay(&self) -> u64 {
        self.completion_slot - self.start_slot
    }
}

/// Measures one forward delay: simulates slots `start_slot + 1, ...` until
/// every node has been served once, or fails with [`Error::DelayTimeout`]
/// (carrying the partial record) after `cap` slots.
pub fn measure_delay<F: Real, R: Rng + ?Sized>(
    realization: &Realization<F>,
    mode: Mode,
    params: &NetworkParams<F>,
    rng: &mut R,
    start_slot: u64,
    cap: u64,
) -> Result<DelayRecord> {
    let mut sim = SlotSimulator::new(realization, mode, params)?;
    let n = sim.node_count();
    if n == 0 {
        return Err(Error::invalid(
            "node set",
            "a delay measurement needs at least one node",
        ));
    }
    let mut first = vec![0u64; n];
    let mut served = 0usize;
    for k in 1..=cap {
        let out = sim.step(rng);
        for (i, &got) in out.received.iter().enumerate() {
            if got && first[i] == 0 {
                first[i] = start_slot + k;
                served += 1;
            }
        }
        if served == n {
            return Ok(DelayRecord {
                start_slot,
                completion_slot: start_slot + k,
                per_node_first_reception: first,
            });
        }
    }
    Err(Error::DelayTimeout {
        cap,
        served,
        total: n,
        partial: DelayRecord {
            start_slot,
            completion_slot: start_slot + cap,
            per_node_first_reception: first,
        },
    })
}

/// Streams a per-slot age trace as CSV rows `slot,node_index,age`, starting
/// from a fresh ledger at slot 1.
pub fn write_age_trace<F: Real, R: Rng + ?Sized, W: Write>(
    realization: &Realization<F>,
    mode: Mode,
    params: &NetworkParams<F>,
    rng: &mut R,
    slots: u64,
    out: &mut W,
) -> Result<()> {
    let mut sim = SlotSimulator::new(realization, mode, params)?;
    let mut ledger = AgeLedger::new(sim.node_count(), mode);
    writeln!(out, "slot,node_index,age")?;
    for slot in 1..=slots {
        let outcome = sim.step(rng);
        ledger.step(outcome)?;
        for (i, age) in ledger.ages().iter().enumerate() {
            writeln!(out, "{slot},{i},{age}")?;
        }
    }
    Ok(())
}
