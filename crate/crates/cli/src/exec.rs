use coqe_core::bvp::ShotExecutor;

/// Runs shots on scoped OS threads, one contiguous chunk per thread.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    threads: usize,
}

impl Threaded {
    pub fn new(threads: usize) -> Self {
        Threaded {
            threads: threads.max(1),
        }
    }
}

impl ShotExecutor for Threaded {
    fn map(&self, inputs: &[f64], f: &(dyn Fn(f64) -> Option<f64> + Sync)) -> Vec<Option<f64>> {
        if self.threads == 1 || inputs.len() < 2 {
            return inputs.iter().map(|&k| f(k)).collect();
        }
        let chunk = inputs.len().div_ceil(self.threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = inputs
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|&k| f(k)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("shot worker panicked"))
                .collect()
        })
    }
}

/// `--threads`, then `COQE_THREADS` (both handled by clap), then the core count.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
