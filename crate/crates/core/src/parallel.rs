//! Fan-out over contiguous index ranges with results returned in range order.

use std::ops::Range;

/// Splits `0..len` into at most `workers` contiguous, ascending ranges.
pub(crate) fn split(len: usize, workers: usize) -> Vec<Range<usize>> {
    let workers = workers.clamp(1, len.max(1));
    let base = len / workers;
    let extra = len % workers;
    let mut start = 0;
    (0..workers)
        .map(|w| {
            let size = base + usize::from(w < extra);
            let r = start..start + size;
            start += size;
            r
        })
        .collect()
}

/// Runs `f` over each range of `split(len, workers)`, one thread per range,
/// and returns the results in ascending range order. A single worker runs
/// inline on the calling thread.
pub(crate) fn map_ranges<T, F>(len: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    let ranges = split(len, workers);
    if ranges.len() == 1 {
        return ranges.into_iter().map(&f).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| {
                let f = &f;
                scope.spawn(move || f(r))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
