#![allow(dead_code)]

use holonomy::{StateVector, C64};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized state with amplitudes drawn from the unit square in each part.
pub fn random_state<R: Rng>(rng: &mut R, dim: usize) -> StateVector {
    loop {
        let amps: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        if let Ok(s) = StateVector::normalized(amps) {
            return s;
        }
    }
}

/// `b` with `|⟨a|b⟩| >= min_overlap`.
pub fn random_partner<R: Rng>(rng: &mut R, a: &StateVector, min_overlap: f64) -> StateVector {
    loop {
        let b = random_state(rng, a.dim());
        if a.inner(&b).unwrap().norm() >= min_overlap {
            return b;
        }
    }
}

/// Closed list `s_0, …, s_{n-1}, s_0` whose consecutive overlaps exceed `min_overlap`.
pub fn random_loop<R: Rng>(rng: &mut R, dim: usize, n: usize, min_overlap: f64) -> Vec<StateVector> {
    'retry: loop {
        let mut states = vec![random_state(rng, dim)];
        for _ in 1..n {
            let prev = states.last().unwrap().clone();
            states.push(random_partner(rng, &prev, min_overlap));
        }
        if states.last().unwrap().inner(&states[0]).unwrap().norm() < min_overlap {
            continue 'retry;
        }
        states.push(states[0].clone());
        return states;
    }
}

pub fn random_phases<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}
