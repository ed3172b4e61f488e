//! Trial-level parallelism.
//!
//! Each trial receives its own stream `master.split(index)`, so results are identical whether
//! trials run on the rayon pool (feature `parallel`) or one after another.

use crate::rng::Randomness;

/// Runs `trials` independent trials sequentially.
pub fn map_trials_sequential<T, F>(trials: u64, master: &Randomness, f: F) -> Vec<T>
where
    F: Fn(u64, &mut Randomness) -> T,
{
    (0..trials).map(|i| f(i, &mut master.split(i))).collect()
}

/// Runs `trials` independent trials on the rayon thread pool, returned in trial order.
#[cfg(feature = "parallel")]
pub fn map_trials_parallel<T, F>(trials: u64, master: &Randomness, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut Randomness) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..trials)
        .into_par_iter()
        .map(|i| f(i, &mut master.split(i)))
        .collect()
}

/// Parallel when the `parallel` feature is enabled, sequential otherwise.
pub fn map_trials<T, F>(trials: u64, master: &Randomness, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut Randomness) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_trials_parallel(trials, master, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_trials_sequential(trials, master, f)
    }
}

/// Whether trial loops use the thread pool in this build.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn scheduling_does_not_change_results() {
        let master = Randomness::from_seed(17);
        let seq = map_trials_sequential(500, &master, |i, r| (i, r.next_u64()));
        let any = map_trials(500, &master, |i, r| (i, r.next_u64()));
        assert_eq!(seq, any);
    }
}
