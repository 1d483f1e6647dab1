//! Sharded Monte-Carlo evaluation.
//!
//! Work is split into a fixed number of shards, each with its own derived
//! random stream. Shards may run on several threads but results are always
//! reduced in shard order, so the output never depends on the thread count.

use std::num::NonZeroUsize;

/// Environment variable capping evaluation threads.
pub const THREADS_ENV: &str = "AIRGAP_AE_THREADS";

/// Samples handled by one shard.
pub const SHARD_SIZE: usize = 1 << 14;

/// Number of worker threads: `AIRGAP_AE_THREADS` if set, else the available
/// parallelism.
pub fn thread_cap() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, NonZeroUsize::get))
}

/// Splits `total` samples into shards of at most [`SHARD_SIZE`].
pub fn shard_sizes(total: usize) -> Vec<usize> {
    let mut sizes = vec![SHARD_SIZE; total / SHARD_SIZE];
    if total % SHARD_SIZE != 0 {
        sizes.push(total % SHARD_SIZE);
    }
    sizes
}

/// Runs `job(shard_index, shard_size)` for every shard and returns the
/// results in shard order.
pub fn run_shards<T, F>(total: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync,
{
    let sizes = shard_sizes(total);
    par_map(sizes.len(), |i| job(i, sizes[i]))
}

/// Evaluates `job(0..count)` on up to [`thread_cap`] threads and returns the
/// results in index order.
pub fn par_map<T, F>(count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = thread_cap().min(count).max(1);
    if threads == 1 {
        return (0..count).map(job).collect();
    }
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let job = &job;
        let handles: Vec<_> = (0..threads)
            .map(|t| scope.spawn(move || (t..count).step_by(threads).map(|i| (i, job(i))).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("Monte-Carlo worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every index ran")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shard_sizes_cover_total() {
        assert_eq!(shard_sizes(0), Vec::<usize>::new());
        assert_eq!(shard_sizes(5), vec![5]);
        let s = shard_sizes(3 * SHARD_SIZE + 7);
        assert_eq!(s.len(), 4);
        assert_eq!(s.iter().sum::<usize>(), 3 * SHARD_SIZE + 7);
    }

    #[test]
    fn results_in_shard_order() {
        let out = run_shards(5 * SHARD_SIZE, |i, n| (i, n));
        assert_eq!(out, (0..5).map(|i| (i, SHARD_SIZE)).collect::<Vec<_>>());
    }
}
