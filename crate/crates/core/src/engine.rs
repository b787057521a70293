//! Discrete-event engine: virtual clock, ordered event queue and labeled
//! random substreams.
//!
//! Events are ordered lexicographically by `(fire_at, seq)` where `seq` is
//! assigned at scheduling time, so replay never depends on container
//! iteration order.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Simulation time in integer microseconds.
pub type SimTime = u64;

pub const US_PER_S: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    BackoffExpiry,
    TxEnd,
    AckEnd,
    EpochBoundary,
    SimEnd,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::BackoffExpiry => "backoff-expiry",
            EventKind::TxEnd => "tx-end",
            EventKind::AckEnd => "ack-end",
            EventKind::EpochBoundary => "epoch-boundary",
            EventKind::SimEnd => "sim-end",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subject {
    Node(usize),
    Agents,
    Engine,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Node(i) => write!(f, "node{i}"),
            Subject::Agents => f.write_str("agents"),
            Subject::Engine => f.write_str("engine"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub fire_at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
    pub subject: Subject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    fire_at: SimTime,
    seq: u64,
}

/// Priority queue of pending events plus the virtual clock.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<(Key, EventKind, Subject)>>,
    cancelled: HashSet<u64>,
    clock: SimTime,
    next_seq: u64,
    trace: Option<Box<dyn Write + Send>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes one tab-separated line per popped event to `sink`.
    pub fn with_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.trace = Some(sink);
        self
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Schedules an event and returns the sequence number assigned to it.
    pub fn schedule(&mut self, fire_at: SimTime, kind: EventKind, subject: Subject) -> Result<u64> {
        if fire_at < self.clock {
            return Err(Error::ScheduleInPast {
                fire_at,
                clock: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap
            .push(Reverse((Key { fire_at, seq }, kind, subject)));
        Ok(seq)
    }

    /// Removes a pending event. Cancelled events are never popped.
    pub fn cancel(&mut self, seq: u64) {
        self.cancelled.insert(seq);
    }

    /// Pops the minimal event under `(fire_at, seq)` and advances the
    /// clock. `None` signals run completion.
    pub fn pop_next(&mut self) -> Option<Event> {
        while let Some(Reverse((key, kind, subject))) = self.heap.pop() {
            if self.cancelled.remove(&key.seq) {
                continue;
            }
            debug_assert!(key.fire_at >= self.clock);
            self.clock = key.fire_at;
            let event = Event {
                fire_at: key.fire_at,
                seq: key.seq,
                kind,
                subject,
            };
            if let Some(sink) = self.trace.as_mut() {
                // trace output is best effort; a broken sink must not abort the run
                let _ = writeln!(
                    sink,
                    "{}\t{}\t{}\t{}",
                    event.fire_at, event.seq, kind, subject
                );
            }
            return Some(event);
        }
        None
    }

    pub fn flush_trace(&mut self) -> std::io::Result<()> {
        match self.trace.as_mut() {
            Some(sink) => sink.flush(),
            None => Ok(()),
        }
    }
}

/// Deterministic random stream identified by `(root_seed, label)`.
pub type RngStream = ChaCha12Rng;

/// Derives an independent generator from a root seed and a component label.
///
/// The 256-bit ChaCha key is the SHA-256 digest of the little-endian seed
/// followed by the label bytes.
pub fn substream(root_seed: u64, label: &str) -> RngStream {
    let mut hasher = Sha256::new();
    hasher.update(root_seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    fn draws(mut rng: RngStream) -> Vec<u64> {
        (0..16).map(|_| rng.random()).collect()
    }

    #[test]
    fn schedule_future_accepted_past_rejected() {
        let mut q = EventQueue::new();
        q.schedule(3, EventKind::TxEnd, Subject::Node(0)).unwrap();
        q.pop_next().unwrap();
        assert_eq!(q.now(), 3);
        assert!(q.schedule(5, EventKind::TxEnd, Subject::Node(0)).is_ok());
        assert!(matches!(
            q.schedule(2, EventKind::TxEnd, Subject::Node(0)),
            Err(Error::ScheduleInPast {
                fire_at: 2,
                clock: 3
            })
        ));
    }

    #[test]
    fn time_order_dominates_seq() {
        let mut q = EventQueue::new();
        // burn sequence numbers so the later event gets seq 9
        for _ in 0..2 {
            q.schedule(100, EventKind::SimEnd, Subject::Engine).unwrap();
        }
        let s2 = q.schedule(7, EventKind::TxEnd, Subject::Node(0)).unwrap();
        for _ in 3..9 {
            q.schedule(100, EventKind::SimEnd, Subject::Engine).unwrap();
        }
        let s9 = q.schedule(5, EventKind::TxEnd, Subject::Node(1)).unwrap();
        assert_eq!((s2, s9), (2, 9));
        let e = q.pop_next().unwrap();
        assert_eq!((e.fire_at, e.seq), (5, 9));
        assert_eq!(q.pop_next().unwrap().seq, 2);
    }

    #[test]
    fn equal_times_pop_in_seq_order() {
        let mut q = EventQueue::new();
        let a = q.schedule(5, EventKind::TxEnd, Subject::Node(1)).unwrap();
        let b = q.schedule(5, EventKind::TxEnd, Subject::Node(0)).unwrap();
        assert_eq!(q.pop_next().unwrap().seq, a);
        assert_eq!(q.pop_next().unwrap().seq, b);
        assert!(q.pop_next().is_none());
    }

    #[test]
    fn cancelled_events_are_skipped() {
        let mut q = EventQueue::new();
        let a = q
            .schedule(1, EventKind::BackoffExpiry, Subject::Node(0))
            .unwrap();
        q.schedule(2, EventKind::TxEnd, Subject::Node(0)).unwrap();
        q.cancel(a);
        assert_eq!(q.len(), 1);
        assert_eq!(q.pop_next().unwrap().fire_at, 2);
        assert!(q.is_empty());
    }

    #[test]
    fn substreams_are_deterministic_and_separated() {
        assert_eq!(
            draws(substream(42, "backoff/node0")),
            draws(substream(42, "backoff/node0"))
        );
        assert_ne!(
            draws(substream(42, "backoff/node0")),
            draws(substream(42, "backoff/node1"))
        );
        assert_ne!(draws(substream(42, "x")), draws(substream(43, "x")));
    }

    #[test]
    fn trace_lines_are_tab_separated() {
        use std::sync::{Arc, Mutex};

        #[derive(Clone, Default)]
        struct Shared(Arc<Mutex<Vec<u8>>>);
        impl Write for Shared {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(buf);
                Ok(buf.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }

        let sink = Shared::default();
        let mut q = EventQueue::new().with_trace(Box::new(sink.clone()));
        q.schedule(10, EventKind::EpochBoundary, Subject::Agents)
            .unwrap();
        q.schedule(4, EventKind::BackoffExpiry, Subject::Node(2))
            .unwrap();
        while q.pop_next().is_some() {}
        let text = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
        assert_eq!(
            text,
            "4\t1\tbackoff-expiry\tnode2\n10\t0\tepoch-boundary\tagents\n"
        );
    }
}
