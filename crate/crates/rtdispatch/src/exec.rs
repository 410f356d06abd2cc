//! Executors backed by OS threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rtdispatch_core::benders::Executor;

/// Runs jobs on up to `workers` scoped threads. Results come back in index
/// order, so the outcome does not depend on the worker count.
#[derive(Debug, Clone)]
pub struct Threads {
    workers: usize,
    clock: Option<Instant>,
}

impl Threads {
    pub fn new(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
            clock: None,
        }
    }

    /// Reports elapsed wall time through `now_ms`.
    pub fn timed(mut self) -> Self {
        self.clock = Some(Instant::now());
        self
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

impl Executor for Threads {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        if self.workers == 1 || n <= 1 {
            return (0..n).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..self.workers.min(n) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let r = f(i);
                    *slots[i].lock().expect("result slot") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("result slot").expect("every job ran"))
            .collect()
    }

    fn now_ms(&self) -> f64 {
        self.clock.map_or(0.0, |c| c.elapsed().as_secs_f64() * 1e3)
    }
}
