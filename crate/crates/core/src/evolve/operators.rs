//! Selection and variation operators.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::EvolutionConfig;
use crate::neuralnet::SolutionVector;
use crate::pareto::RankedPopulation;
use crate::{Error, Result};

/// Binary tournament: two distinct candidates drawn uniformly, the
/// preferred one (lower rank, larger crowding, lower index) wins.
pub fn tournament_select<R: Rng + ?Sized>(ranked: &RankedPopulation, rng: &mut R) -> Result<usize> {
    let n = ranked.len();
    if n < 2 {
        return Err(Error::domain("tournament needs at least two individuals"));
    }
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    Ok(if ranked.prefer(a, b).is_le() { a } else { b })
}

/// Per-gene fair coin; the second child takes the complement.
pub fn uniform_crossover<R: Rng + ?Sized>(
    a: &SolutionVector,
    b: &SolutionVector,
    rng: &mut R,
) -> Result<(SolutionVector, SolutionVector)> {
    Error::check_len("crossover parents", a.len(), b.len())?;
    let mut c1 = a.weights().to_vec();
    let mut c2 = b.weights().to_vec();
    for i in 0..c1.len() {
        if rng.random_bool(0.5) {
            std::mem::swap(&mut c1[i], &mut c2[i]);
        }
    }
    Ok((
        SolutionVector::clamped(c1, a.bounds()),
        SolutionVector::clamped(c2, a.bounds()),
    ))
}

/// Adds clipped Gaussian noise to each gene with probability `p_mut`, then
/// clamps to the genome bounds.
pub fn mutate<R: Rng + ?Sized>(
    theta: &SolutionVector,
    rng: &mut R,
    config: &EvolutionConfig,
) -> Result<SolutionVector> {
    let bounds = theta.bounds();
    let mut w = theta.weights().to_vec();
    if config.p_mut <= 0.0 || config.noise_std == 0.0 {
        return Ok(theta.clone());
    }
    let normal = Normal::new(0.0, config.noise_std)
        .map_err(|e| Error::domain(format!("noise_std: {e}")))?;
    let clip = config.noise_clip;
    for g in w.iter_mut() {
        if rng.random_bool(config.p_mut) {
            let delta: f64 = normal.sample(rng);
            *g = bounds.clamp((*g as f64 + delta.clamp(-clip, clip)) as f32);
        }
    }
    Ok(SolutionVector::clamped(w, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::Bounds;
    use crate::pareto::{non_dominated_sort, ObjectivePoint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sv(w: Vec<f32>) -> SolutionVector {
        SolutionVector::new(w, Bounds::default()).unwrap()
    }

    #[test]
    fn tournament_prefers_rank_then_crowding() {
        let pts: Vec<_> = [[0.0, 0.0], [1.0, 1.0]]
            .iter()
            .map(|v| ObjectivePoint::new(v.to_vec()).unwrap())
            .collect();
        let ranked = non_dominated_sort(&pts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(tournament_select(&ranked, &mut rng).unwrap(), 0);
        }
        let mut ranked = ranked;
        ranked.rank = vec![0, 0];
        ranked.crowding = vec![0.2, f64::INFINITY];
        for _ in 0..20 {
            assert_eq!(tournament_select(&ranked, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn crossover_genes_come_from_parents() {
        let a = sv((0..100).map(|i| i as f32 / 100.0).collect());
        let b = sv((0..100).map(|i| -(i as f32) / 100.0).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (c1, c2) = uniform_crossover(&a, &b, &mut rng).unwrap();
        for i in 0..100 {
            let (x, y) = (c1.weights()[i], c2.weights()[i]);
            assert!(x == a.weights()[i] || x == b.weights()[i]);
            assert_eq!(x == a.weights()[i], y == b.weights()[i]);
        }
        let (d1, d2) = uniform_crossover(&a, &a, &mut rng).unwrap();
        assert!(d1.bit_eq(&a) && d2.bit_eq(&a));
        assert!(uniform_crossover(&a, &sv(vec![0.0]), &mut rng).is_err());
    }

    #[test]
    fn zero_rate_mutation_is_identity() {
        let a = sv(vec![0.25; 50]);
        let cfg = EvolutionConfig {
            p_mut: 0.0,
            ..EvolutionConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(mutate(&a, &mut rng, &cfg).unwrap().bit_eq(&a));
    }
}
