//! Order-preserving parallel map over a slice, used by the batch prediction
//! paths. Inputs are split into contiguous chunks, one scoped thread per
//! chunk, and the outputs are stitched back together in input order, so the
//! result is identical to the serial map for any worker count.

use crate::error::{Error, Result};

/// Applies `f` to every element and returns the outputs in input order.
///
/// `workers` is the maximum number of threads; it is capped at the input
/// length, and `workers == 1` runs everything on the calling thread. The
/// first error (in input order) wins and the remaining outputs are dropped.
pub fn ordered_map<T, U, F>(inputs: &[T], workers: usize, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync,
{
    if workers == 0 {
        return Err(Error::Argument("worker count must be at least 1".into()));
    }
    let workers = workers.min(inputs.len()).max(1);
    if workers == 1 {
        return inputs.iter().map(&f).collect();
    }

    let chunk_len = inputs.len().div_ceil(workers);
    let mut chunks: Vec<Result<Vec<U>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = inputs
            .chunks(chunk_len)
            .map(|chunk| {
                let f = &f;
                scope.spawn(move || chunk.iter().map(f).collect::<Result<Vec<U>>>())
            })
            .collect();
        for handle in handles {
            let joined = handle.join().unwrap_or_else(|panic| {
                std::panic::resume_unwind(panic);
            });
            chunks.push(joined);
        }
    });

    let mut out = Vec::with_capacity(inputs.len());
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_input_order_across_worker_counts() {
        let inputs: Vec<u64> = (0..23).collect();
        let serial = ordered_map(&inputs, 1, |&x| Ok(x * x)).unwrap();
        for workers in [2, 3, 4, 8, 64] {
            let parallel = ordered_map(&inputs, workers, |&x| Ok(x * x)).unwrap();
            assert_eq!(parallel, serial, "workers={workers}");
        }
    }

    #[test]
    fn zero_workers_is_rejected() {
        let err = ordered_map(&[1], 0, |&x: &i32| Ok(x)).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn empty_input_yields_empty_output() {
        let out: Vec<i32> = ordered_map(&[] as &[i32], 4, |&x| Ok(x)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn first_error_in_input_order_wins() {
        let inputs: Vec<i32> = (0..20).collect();
        let err = ordered_map(&inputs, 4, |&x| {
            if x >= 7 {
                Err(Error::Data(format!("bad element {x}")))
            } else {
                Ok(x)
            }
        })
        .unwrap_err();
        assert_eq!(err.to_string(), "data error: bad element 7");
    }
}
