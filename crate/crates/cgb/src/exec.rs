use cgb_core::quadrature::Executor;
use rayon::prelude::*;
use rayon::ThreadPool;

/// Evaluates reduction blocks on a rayon pool. Blocks are collected in index order, so the
/// summation tree and the result are identical to `Sequential` for any thread count.
pub struct Rayon {
    pool: Option<ThreadPool>,
}

impl Rayon {
    /// `threads = None` uses rayon's global pool.
    pub fn new(threads: Option<usize>) -> Result<Self, String> {
        let pool = match threads {
            None => None,
            Some(0) => return Err("--threads must be at least 1".into()),
            Some(n) => Some(rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| e.to_string())?),
        };
        Ok(Self { pool })
    }
}

impl Executor for Rayon {
    fn map_blocks(&self, blocks: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
        let run = || (0..blocks).into_par_iter().map(f).collect();
        match &self.pool {
            Some(p) => p.install(run),
            None => run(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cgb_core::quadrature::{reduce, Sequential, BLOCK};

    #[test]
    fn bitwise_equal_to_sequential() {
        let n = 7 * BLOCK + 5;
        let term = |i: usize| (i as f64 * 0.37).cos() / (1.0 + i as f64);
        let s = reduce(n, &Sequential, &term);
        for t in [1, 2, 3, 8] {
            assert_eq!(reduce(n, &Rayon::new(Some(t)).unwrap(), &term).to_bits(), s.to_bits());
        }
    }
}
