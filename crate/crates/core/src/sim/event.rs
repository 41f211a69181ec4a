use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    ContactStart(usize),
    ContactEnd(usize),
    BundleGenerated(usize),
    /// A transfer finished; the payload identifies the transfer slot.
    HopComplete(usize),
    MeasurementTick,
    RateUpdateTick,
    Move(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops.
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Pops events in `(time, seq)` order; `seq` follows insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
    now: SimTime,
    popped: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if `time` precedes the event being processed.
    pub fn schedule(&mut self, time: SimTime, kind: EventKind) {
        assert!(
            time >= self.now,
            "event at {time} scheduled from {}",
            self.now
        );
        self.heap.push(Event {
            time,
            seq: self.next_seq,
            kind,
        });
        self.next_seq += 1;
    }

    /// Next event no later than `horizon`.
    pub fn pop_until(&mut self, horizon: SimTime) -> Option<Event> {
        if self.heap.peek()?.time > horizon {
            return None;
        }
        let ev = self.heap.pop()?;
        self.now = ev.time;
        self.popped += 1;
        Some(ev)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn processed(&self) -> u64 {
        self.popped
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
