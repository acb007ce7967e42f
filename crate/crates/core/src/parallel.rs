//! Deterministic fan-out over indexed work slots.
//!
//! Each slot is a pure function of its index and results are placed back in
//! slot order, so the output is bit-identical for any worker count. The
//! `ESTIMAND_LAB_THREADS` environment variable caps the number of worker
//! threads; unset or unparsable values fall back to the machine parallelism.

use std::sync::atomic::{AtomicUsize, Ordering};

/// Parses a thread cap from the raw environment value.
fn thread_cap(raw: Option<&str>) -> Option<usize> {
    raw.and_then(|v| v.trim().parse().ok()).filter(|&n| n >= 1)
}

/// The effective worker cap for this process.
pub(crate) fn max_threads() -> usize {
    thread_cap(std::env::var("ESTIMAND_LAB_THREADS").ok().as_deref()).unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(usize::from)
            .unwrap_or(1)
    })
}

/// Evaluates `f` on every slot index and returns the results in slot order.
pub(crate) fn map_slots<T, F>(slots: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    map_slots_with_workers(max_threads(), slots, f)
}

/// [`map_slots`] with an explicit worker count, shared by tests so the
/// equal-output guarantee can be checked without touching the environment.
pub(crate) fn map_slots_with_workers<T, F>(workers: usize, slots: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.min(slots);
    if workers <= 1 {
        return (0..slots).map(f).collect();
    }

    let next = AtomicUsize::new(0);
    let f = &f;
    let batches: Vec<Vec<(usize, T)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= slots {
                            break;
                        }
                        mine.push((i, f(i)));
                    }
                    mine
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });

    let mut out: Vec<Option<T>> = Vec::with_capacity(slots);
    out.resize_with(slots, || None);
    for batch in batches {
        for (i, value) in batch {
            out[i] = Some(value);
        }
    }
    out.into_iter()
        .map(|v| v.expect("every slot is visited exactly once"))
        .collect()
}
