//! Parallel sums whose result does not depend on the number of threads.

use rayon::prelude::*;

use crate::error::Result;

/// Work items per chunk. Chunk boundaries are fixed, each chunk is summed
/// sequentially and chunk totals are combined in index order.
pub const CHUNK: usize = 256;

/// Sums `width` accumulators over `items`. `visit` adds item `i`'s
/// contribution into the accumulator slice; `scratch` is per-chunk storage.
pub fn ordered_sum<T, S, F>(items: &[T], width: usize, init: impl Fn() -> S + Sync, visit: F) -> Result<Vec<f64>>
where
    T: Sync,
    F: Fn(&T, &mut S, &mut [f64]) -> Result<()> + Sync,
{
    let partials: Vec<Vec<f64>> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; width];
            let mut scratch = init();
            for item in chunk {
                visit(item, &mut scratch, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; width];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_of_thread_count() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i as f64) * 0.731).sin() * 1e3).collect();
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                ordered_sum(&xs, 2, || (), |x, _, acc| {
                    acc[0] += x;
                    acc[1] += x * x;
                    Ok(())
                })
                .unwrap()
            })
        };
        let one = run(1);
        assert_eq!(one, run(2));
        assert_eq!(one, run(8));
    }
}
