// temporary probe: iteration statistics over the acceptance regime
use ndarray::Array2;
use proto_fg3d::transport::{sinkhorn_assign, SimilarityMatrix, SolverConfig, SolverKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let kappas = [0.05, 0.1, 0.5];
    let mut iter_counts = Vec::new();
    let t0 = Instant::now();
    let mut fails = 0;
    for i in 0..100 {
        let k = rng.random_range(2..=8usize);
        let v = rng.random_range(2..=32usize);
        let kappa = kappas[i % 3];
        let mut values = Array2::zeros((k, v));
        for x in values.iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        let s = SimilarityMatrix::new(values).unwrap();
        let c = SolverConfig { kappa, max_iters: 2_000_000, marginal_tolerance: 1e-6, solver_kind: SolverKind::Sinkhorn };
        match sinkhorn_assign(&s, &c) {
            Ok(o) => iter_counts.push(o.iterations),
            Err(_) => fails += 1,
        }
    }
    iter_counts.sort_unstable();
    let total: usize = iter_counts.iter().sum();
    println!("elapsed {:?}  fails {fails}", t0.elapsed());
    println!("iters: median {} p90 {} max {} total {}",
        iter_counts[iter_counts.len()/2], iter_counts[iter_counts.len()*9/10],
        iter_counts.last().unwrap(), total);
}
