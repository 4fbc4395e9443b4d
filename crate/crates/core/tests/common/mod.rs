#![allow(dead_code)]

pub mod oracle;

use nhcouple::{FullState, SystemId, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every catalog system, perturbed systems at ε = 0 and ε = 0.1.
pub fn catalog_specs() -> Vec<SystemSpec> {
    let mut out = Vec::new();
    for id in SystemId::ALL {
        out.push(SystemSpec::new(id, 0.0).unwrap());
        if id.uses_epsilon() {
            out.push(SystemSpec::new(id, 0.1).unwrap());
        }
    }
    out
}

/// `count` admissible states drawn from a fixed seed.
pub fn random_states(spec: &SystemSpec, count: usize, seed: u64) -> Vec<FullState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..spec.n_x()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z = rng.random_range(-3.0..3.0);
            let v = rng.random_range(-1.0..1.0);
            let zdot = rng.random_range(-1.5..1.5);
            FullState::admissible(spec, &x, z, v, zdot).unwrap()
        })
        .collect()
}
