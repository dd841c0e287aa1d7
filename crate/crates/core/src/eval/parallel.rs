//! Ordered fan-out over a fixed-size worker pool.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Maps `f` over `items` on `jobs` threads. Results come back in input order
/// and the first failing item (in input order) determines the error, so the
/// outcome does not depend on `jobs`.
pub fn par_map<T, U, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    let results: Vec<Result<U>> = if jobs <= 1 {
        items.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| items.par_iter().map(&f).collect())
    };
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_first_error_are_stable() {
        let items: Vec<u32> = (0..200).collect();
        for jobs in [1, 3, 8] {
            let out = par_map(jobs, &items, |&i| Ok(i * 2)).unwrap();
            assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
            let err = par_map(jobs, &items, |&i| {
                if i % 50 == 17 {
                    Err(Error::Data(format!("bad {i}")))
                } else {
                    Ok(i)
                }
            })
            .unwrap_err();
            assert_eq!(err.to_string(), Error::Data("bad 17".into()).to_string());
        }
    }
}
