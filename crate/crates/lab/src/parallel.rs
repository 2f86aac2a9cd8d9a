use erlang_core::simulate::Replicator;
use rayon::prelude::*;

/// Runs ensemble chunks on the rayon pool. `collect` keeps chunk order,
/// so results match [`erlang_core::simulate::Sequential`] bit for bit.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Replicator for Rayon {
    fn run_chunks<T, F>(&self, chunks: usize, work: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..chunks).into_par_iter().map(work).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use erlang_core::simulate::{ensemble_with, EnsembleConfig, Sequential};
    use erlang_core::{FourierRate, QueueModel};

    #[test]
    fn matches_sequential_bitwise() {
        let m = QueueModel::erlang_a(FourierRate::sinusoid(10.0, 2.0).unwrap(), 10, 1.0, 0.5).unwrap();
        let cfg = EnsembleConfig::new(1000, 9);
        let grid = [1.0, 5.0, 10.0];
        let a = ensemble_with(&m, 0, &grid, 2, &[0.2], &cfg, &Sequential).unwrap();
        let b = ensemble_with(&m, 0, &grid, 2, &[0.2], &cfg, &Rayon).unwrap();
        assert_eq!(a, b);
    }
}
