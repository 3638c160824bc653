//! Deterministic sharded parallelism.
//!
//! Work is cut into a fixed number of shards that does not depend on the thread
//! count. Shard `s` draws from stream `s` of the run seed and results come back
//! in shard order, so output is identical for any `VQ_THREADS`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use spq_core::rng::{shard_sizes, substream, StreamRng};

/// Shards used by the sampling drivers.
pub const SHARDS: usize = 64;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "VQ_THREADS";

/// Worker count: `VQ_THREADS` if set to a positive integer, else the available parallelism.
pub fn threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Evaluate `f(i)` for `i in 0..count` on up to [`threads`] workers; results in index order.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = threads().min(count.max(1));
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let value = f(i);
                slots.lock().expect("worker panicked")[i] = Some(value);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|v| v.expect("every index is filled"))
        .collect()
}

/// Split `total` trials into [`SHARDS`] shards; shard `s` gets its size and stream `s` of `seed`.
pub fn map_shards<T, F>(total: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    let sizes: Vec<usize> = shard_sizes(total, SHARDS).collect();
    map_indexed(SHARDS, |s| f(sizes[s], &mut substream(seed, s as u64)))
}

/// Draw `total` values with `draw`, sharded as in [`map_shards`], concatenated in shard order.
pub fn collect_shards<T, F>(total: usize, seed: u64, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync,
{
    map_shards(total, seed, |count, rng| {
        (0..count).map(|_| draw(rng)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}
