//! Order-preserving parallel map over scoped threads.

/// Applies `f` to every item on up to `jobs` threads. Results come back in
/// input order, so they do not depend on `jobs`.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                let f = &f;
                s.spawn(move || part.iter().enumerate().map(|(i, x)| f(c * chunk + i, x)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Available cores, or 1.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    #[test]
    fn order_is_independent_of_jobs() {
        let v: Vec<u64> = (0..37).collect();
        let a = super::par_map(&v, 1, |i, x| x * x + i as u64);
        let b = super::par_map(&v, 4, |i, x| x * x + i as u64);
        assert_eq!(a, b);
    }
}
