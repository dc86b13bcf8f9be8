//! Data-parallel map helpers. With the default `parallel` feature these fan
//! out over rayon; without it they run sequentially with the same signatures.

#[cfg(feature = "parallel")]
pub fn map_range<U: Send>(n: usize, f: impl Fn(usize) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U: Send>(n: usize, f: impl Fn(usize) -> U + Sync + Send) -> Vec<U> {
    (0..n).map(f).collect()
}

/// Fill `out[i] = f(i)` in place.
#[cfg(feature = "parallel")]
pub fn fill_slice<T: Send>(out: &mut [T], f: impl Fn(usize) -> T + Sync + Send) {
    use rayon::prelude::*;
    out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
}

#[cfg(not(feature = "parallel"))]
pub fn fill_slice<T: Send>(out: &mut [T], f: impl Fn(usize) -> T + Sync) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Bound the worker pool. No-op in sequential builds or if a pool already exists.
pub fn set_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_matches_sequential() {
        let v = map_range(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn fill_slice_writes_all() {
        let mut v = vec![0usize; 64];
        fill_slice(&mut v, |i| i + 1);
        assert_eq!(v[63], 64);
    }
}
