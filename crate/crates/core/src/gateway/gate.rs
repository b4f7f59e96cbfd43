use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};

/// Counting gate that admits at most `capacity` holders at a time.
#[derive(Debug)]
pub struct Gate {
    capacity: usize,
    held: Mutex<usize>,
    freed: Condvar,
    peak: AtomicUsize,
}

pub struct GatePermit<'a> {
    gate: &'a Gate,
}

impl Gate {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "gate capacity must be positive");
        Self {
            capacity,
            held: Mutex::new(0),
            freed: Condvar::new(),
            peak: AtomicUsize::new(0),
        }
    }

    pub fn acquire(&self) -> GatePermit<'_> {
        let mut held = self.held.lock().expect("gate lock");
        while *held >= self.capacity {
            held = self.freed.wait(held).expect("gate lock");
        }
        *held += 1;
        self.peak.fetch_max(*held, Ordering::SeqCst);
        GatePermit { gate: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.held.lock().expect("gate lock")
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        let mut held = self.gate.held.lock().expect("gate lock");
        *held -= 1;
        self.gate.freed.notify_one();
    }
}
