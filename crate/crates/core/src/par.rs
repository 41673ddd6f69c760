//! Replication-level parallelism.
//!
//! With the `parallel` feature (default) replications run on a rayon pool;
//! without it they run in order on the calling thread. Either way results come
//! back indexed by replication, so aggregation never depends on scheduling.

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "DRG_WORKERS";

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `f(rep)` for every `rep` in `0..reps`, sequentially.
pub fn replicate_seq<T, F>(reps: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..reps).map(f).collect()
}

/// Runs `f(rep)` for every `rep` in `0..reps` on the current rayon pool.
#[cfg(feature = "parallel")]
pub fn replicate_par<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

/// Maps `f` over an explicit list of replication indices, keeping order.
pub fn map_indices<T, F>(indices: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        indices.par_iter().map(|&i| f(i)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        indices.iter().map(|&i| f(i)).collect()
    }
}

/// Parallel when the feature is on, sequential otherwise.
pub fn replicate<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        replicate_par(reps, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        replicate_seq(reps, f)
    }
}

/// Runs `op` with `workers` threads (`None`: the environment or the default pool).
pub fn with_workers<R, OP>(workers: Option<usize>, op: OP) -> R
where
    R: Send,
    OP: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match workers.or_else(workers_from_env) {
            Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(op),
                Err(_) => op(),
            },
            None => op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        op()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_by_index() {
        let v = with_workers(Some(3), || replicate(100, |i| i * i));
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(replicate_seq(5, |i| i), vec![0, 1, 2, 3, 4]);
        assert_eq!(map_indices(&[4, 2, 9], |i| i + 1), vec![5, 3, 10]);
    }
}
