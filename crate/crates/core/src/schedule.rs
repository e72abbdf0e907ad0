//! Half-duplex group successive relaying schedule and its per-slot log.
//!
//! Relay `(i, k, j)` transmits at slot `t` iff `t + k + i` is even. A message
//! injected at slot `t` travels on path 1 when `t` is odd and path 2 when it is
//! even, is forwarded by stage `k` at slot `t + k` and reaches the destination
//! at slot `t + K`. All indices in this module are one-based.

use crate::error::{param, Error, Result};
use crate::network::Path;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

/// Relay at `stage` on route `layer` of `path`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelayId {
    pub path: Path,
    pub stage: usize,
    pub layer: usize,
}

impl RelayId {
    pub fn new(path: Path, stage: usize, layer: usize) -> Self {
        RelayId { path, stage, layer }
    }
}

impl fmt::Display for RelayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R({},{},{})", self.path.number(), self.stage, self.layer)
    }
}

/// A source message, named by its source and injection slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId {
    pub source: usize,
    pub injected: usize,
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m({},{})", self.source, self.injected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Transmit,
    Receive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    /// Transmitting relays and the message each one forwards; `None` during warm-up.
    pub transmitting: BTreeMap<RelayId, Option<MessageId>>,
    pub receiving: BTreeSet<RelayId>,
    pub source_mode: Mode,
    pub destination_mode: Mode,
    pub delivered: Vec<MessageId>,
}

impl SlotRecord {
    pub fn mode(&self, relay: &RelayId) -> Option<Mode> {
        match (self.transmitting.contains_key(relay), self.receiving.contains(relay)) {
            (true, false) => Some(Mode::Transmit),
            (false, true) => Some(Mode::Receive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleLog {
    pub sources: usize,
    pub stages: usize,
    pub slots: Vec<SlotRecord>,
}

impl ScheduleLog {
    pub fn slot(&self, t: usize) -> Option<&SlotRecord> {
        t.checked_sub(1).and_then(|i| self.slots.get(i))
    }

    /// `(slot, message)` for every delivery, in slot order.
    pub fn deliveries(&self) -> Vec<(usize, MessageId)> {
        self.slots
            .iter()
            .flat_map(|s| s.delivered.iter().map(move |m| (s.slot, *m)))
            .collect()
    }

    pub fn relays(&self) -> impl Iterator<Item = RelayId> + '_ {
        Path::BOTH.into_iter().flat_map(move |path| {
            (1..=self.stages).flat_map(move |stage| (1..=self.sources).map(move |layer| RelayId::new(path, stage, layer)))
        })
    }

    /// One line per slot: `t | TX: ... | RX: ... | delivered: ...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for s in &self.slots {
            let tx: Vec<String> = s.transmitting.keys().map(|r| r.to_string()).collect();
            let rx: Vec<String> = s.receiving.iter().map(|r| r.to_string()).collect();
            let dl: Vec<String> = s.delivered.iter().map(|m| m.to_string()).collect();
            let _ = writeln!(
                out,
                "{} | TX: {} | RX: {} | delivered: {}",
                s.slot,
                tx.join(" "),
                rx.join(" "),
                dl.join(" ")
            );
        }
        out
    }
}

/// Path whose relays forward the message injected at slot `t`.
pub fn injection_path(t: usize) -> Path {
    if t % 2 == 1 {
        Path::First
    } else {
        Path::Second
    }
}

pub fn relay_mode(relay: &RelayId, t: usize) -> Mode {
    if (t + relay.stage + relay.path.number() as usize) % 2 == 0 {
        Mode::Transmit
    } else {
        Mode::Receive
    }
}

pub fn build_schedule(sources: usize, stages: usize, slots: usize) -> Result<ScheduleLog> {
    if sources == 0 {
        return Err(param("L", "at least one source is required"));
    }
    if slots == 0 {
        return Err(param("T", "at least one slot is required"));
    }
    let mut log = ScheduleLog {
        sources,
        stages,
        slots: Vec::with_capacity(slots),
    };
    let relays: Vec<RelayId> = log.relays().collect();
    for t in 1..=slots {
        let mut transmitting = BTreeMap::new();
        let mut receiving = BTreeSet::new();
        for relay in &relays {
            match relay_mode(relay, t) {
                Mode::Transmit => {
                    // the parity rule makes stage k carry the slot t-k message on its own path
                    let msg = t.checked_sub(relay.stage).filter(|&t0| t0 >= 1).map(|injected| MessageId {
                        source: relay.layer,
                        injected,
                    });
                    transmitting.insert(*relay, msg);
                }
                Mode::Receive => {
                    receiving.insert(*relay);
                }
            }
        }
        let delivered = match t.checked_sub(stages) {
            Some(t0) if t0 >= 1 => (1..=sources)
                .map(|source| MessageId { source, injected: t0 })
                .collect(),
            _ => Vec::new(),
        };
        log.slots.push(SlotRecord {
            slot: t,
            transmitting,
            receiving,
            source_mode: Mode::Transmit,
            destination_mode: Mode::Receive,
            delivered,
        });
    }
    Ok(log)
}

/// True iff every relay has exactly one mode per slot and alternates between
/// slots, sources always transmit and the destination always receives.
pub fn validate_half_duplex(log: &ScheduleLog) -> bool {
    let relays: Vec<RelayId> = log.relays().collect();
    let mut previous: Option<&SlotRecord> = None;
    for s in &log.slots {
        if s.source_mode != Mode::Transmit || s.destination_mode != Mode::Receive {
            return false;
        }
        if s.transmitting.keys().any(|r| s.receiving.contains(r)) {
            return false;
        }
        for relay in &relays {
            let Some(mode) = s.mode(relay) else {
                return false;
            };
            if let Some(prev) = previous {
                if prev.mode(relay) == Some(mode) {
                    return false;
                }
            }
        }
        previous = Some(s);
    }
    true
}

/// Relays whose slot-`t` transmissions interfere at the receiving relays of
/// `path`, all of which carry messages the destination decoded in earlier slots.
///
/// A receiving relay `(i, k)` hears the next stage of its own path and the same
/// stage of the other path.
pub fn known_interference_set(log: &ScheduleLog, t: usize, path: Path) -> Result<BTreeSet<RelayId>> {
    if t <= log.stages {
        return Err(Error::WarmUp {
            slot: t,
            stages: log.stages,
        });
    }
    let record = log.slot(t).ok_or(Error::Index {
        what: "slot",
        index: t,
        limit: log.slots.len(),
    })?;
    let mut set = BTreeSet::new();
    for rx in record.receiving.iter().filter(|r| r.path == path) {
        for tx in record.transmitting.keys() {
            let next_stage = tx.path == path && tx.stage == rx.stage + 1;
            let cross = tx.path != path && tx.stage == rx.stage;
            if next_stage || cross {
                set.insert(*tx);
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delivery_counts() {
        assert_eq!(build_schedule(2, 3, 10).unwrap().deliveries().len(), 14);
        let direct = build_schedule(1, 0, 5).unwrap();
        let d = direct.deliveries();
        assert_eq!(d.len(), 5);
        for (slot, m) in d {
            assert_eq!(slot, m.injected);
        }
    }

    #[test]
    fn two_stage_alternation() {
        let log = build_schedule(2, 2, 4).unwrap();
        for s in &log.slots {
            for layer in 1..=2 {
                let r = RelayId::new(Path::First, 1, layer);
                let expect = if s.slot % 2 == 1 { Mode::Receive } else { Mode::Transmit };
                assert_eq!(s.mode(&r), Some(expect));
                // path 2 stage 1 is in the opposite mode
                let other = RelayId::new(Path::Second, 1, layer);
                assert_ne!(s.mode(&other), Some(expect));
            }
        }
    }

    #[test]
    fn forwarded_message_matches_path() {
        let log = build_schedule(2, 3, 8).unwrap();
        for s in &log.slots {
            for (relay, msg) in &s.transmitting {
                if let Some(m) = msg {
                    assert_eq!(injection_path(m.injected), relay.path);
                    assert_eq!(m.injected + relay.stage, s.slot);
                    assert_eq!(m.source, relay.layer);
                }
            }
        }
    }

    #[test]
    fn built_schedule_is_half_duplex() {
        assert!(validate_half_duplex(&build_schedule(3, 4, 12).unwrap()));
    }

    #[test]
    fn repeated_transmit_is_rejected() {
        let mut log = build_schedule(2, 2, 6).unwrap();
        let r = RelayId::new(Path::First, 1, 1);
        // slot 2 transmits, force slot 3 to transmit as well
        assert_eq!(log.slots[1].mode(&r), Some(Mode::Transmit));
        log.slots[2].receiving.remove(&r);
        log.slots[2].transmitting.insert(r, None);
        assert!(!validate_half_duplex(&log));
    }

    #[test]
    fn both_modes_rejected() {
        let mut log = build_schedule(2, 2, 6).unwrap();
        let r = RelayId::new(Path::Second, 2, 2);
        log.slots[2].transmitting.insert(r, None);
        log.slots[2].receiving.insert(r);
        assert!(!validate_half_duplex(&log));
    }

    #[test]
    fn endpoint_modes_checked() {
        let mut log = build_schedule(1, 1, 3).unwrap();
        log.slots[1].destination_mode = Mode::Transmit;
        assert!(!validate_half_duplex(&log));
    }

    #[test]
    fn interference_set_two_stage_example() {
        let log = build_schedule(2, 2, 6).unwrap();
        let set = known_interference_set(&log, 3, Path::First).unwrap();
        let expect: BTreeSet<RelayId> = [
            RelayId::new(Path::First, 2, 1),
            RelayId::new(Path::First, 2, 2),
            RelayId::new(Path::Second, 1, 1),
            RelayId::new(Path::Second, 1, 2),
        ]
        .into_iter()
        .collect();
        assert_eq!(set, expect);
        // their messages were injected at slots 1 and 2
        let record = log.slot(3).unwrap();
        let injected: BTreeSet<usize> = set.iter().map(|r| record.transmitting[r].unwrap().injected).collect();
        assert_eq!(injected, [1, 2].into_iter().collect());
    }

    #[test]
    fn interference_set_warm_up_and_direct() {
        let log = build_schedule(2, 2, 6).unwrap();
        assert_eq!(
            known_interference_set(&log, 2, Path::First),
            Err(Error::WarmUp { slot: 2, stages: 2 })
        );
        let direct = build_schedule(3, 0, 4).unwrap();
        for t in 1..=4 {
            assert!(known_interference_set(&direct, t, Path::Second).unwrap().is_empty());
        }
    }

    #[test]
    fn dump_format() {
        let log = build_schedule(1, 1, 2).unwrap();
        let dump = log.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines[0], "1 | TX: R(2,1,1) | RX: R(1,1,1) | delivered: ");
        assert_eq!(lines[1], "2 | TX: R(1,1,1) | RX: R(2,1,1) | delivered: m(1,1)");
    }

    proptest! {
        #[test]
        fn steady_state_throughput_and_latency(l in 1usize..5, k in 0usize..6, extra in 1usize..10) {
            let t_total = k + extra;
            let log = build_schedule(l, k, t_total).unwrap();
            prop_assert!(validate_half_duplex(&log));
            for s in &log.slots {
                let expect = if s.slot > k { l } else { 0 };
                prop_assert_eq!(s.delivered.len(), expect);
                for m in &s.delivered {
                    prop_assert_eq!(m.injected + k, s.slot);
                }
            }
            prop_assert_eq!(log.deliveries().len(), l * extra);
        }

        #[test]
        fn consecutive_transmit_sets_are_complementary(l in 1usize..4, k in 1usize..6, t_total in 2usize..12) {
            let log = build_schedule(l, k, t_total).unwrap();
            let all: BTreeSet<RelayId> = log.relays().collect();
            for w in log.slots.windows(2) {
                let a: BTreeSet<RelayId> = w[0].transmitting.keys().copied().collect();
                let b: BTreeSet<RelayId> = w[1].transmitting.keys().copied().collect();
                prop_assert!(a.is_disjoint(&b));
                let union: BTreeSet<RelayId> = a.union(&b).copied().collect();
                prop_assert_eq!(&union, &all);
            }
        }

        #[test]
        fn interferers_cover_every_receiver(l in 1usize..4, k in 1usize..6, dt in 1usize..6, second in any::<bool>()) {
            let t = k + dt;
            let log = build_schedule(l, k, t).unwrap();
            let path = if second { Path::Second } else { Path::First };
            let set = known_interference_set(&log, t, path).unwrap();
            let record = log.slot(t).unwrap();
            for tx in &set {
                prop_assert_eq!(record.mode(tx), Some(Mode::Transmit));
                // every interferer forwards a message injected before slot t
                let m = record.transmitting[tx].unwrap();
                prop_assert!(m.injected < t);
            }
            for rx in record.receiving.iter().filter(|r| r.path == path) {
                if rx.stage < k {
                    prop_assert!(set.contains(&RelayId::new(path, rx.stage + 1, rx.layer)));
                }
                prop_assert!(set.contains(&RelayId::new(path.other(), rx.stage, rx.layer)));
            }
        }
    }
}
