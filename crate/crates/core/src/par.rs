//! Data-parallel helpers with a sequential fallback.
//!
//! Reductions always split the index range into fixed-size chunks and add the
//! partial sums in chunk order, so the result does not depend on whether the
//! `parallel` feature is enabled or on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const CHUNK: usize = 2048;

pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sum of `f(i)` over `0..n`, chunked deterministically.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(chunks, |c| {
        let end = ((c + 1) * CHUNK).min(n);
        let mut acc = 0.0;
        for i in c * CHUNK..end {
            acc += f(i);
        }
        acc
    });
    partial.into_iter().sum()
}

/// Fills `out[i] = f(i)` in parallel chunks.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v = f(c * CHUNK + k);
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, v) in out.iter_mut().enumerate() {
            *v = f(i);
        }
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_is_order_stable() {
        let n = 10 * CHUNK + 17;
        let f = |i: usize| 1.0 / (1.0 + i as f64);
        let a = sum_range(n, f);
        let mut b = 0.0;
        for c in 0..n.div_ceil(CHUNK) {
            let mut acc = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                acc += f(i);
            }
            b += acc;
        }
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn fill_and_map_agree() {
        let mut v = vec![0usize; 5000];
        fill(&mut v, |i| i * i);
        assert_eq!(v, map_range(5000, |i| i * i));
        assert_eq!(map(&[1, 2, 3], |x| x + 1), vec![2, 3, 4]);
    }
}
