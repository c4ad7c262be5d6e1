#![allow(dead_code)]

use hazardlab_core::{Dataset, Observation};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub struct TestRng(Xoshiro256PlusPlus);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let (u, v) = (self.unit(), self.unit());
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }
}

/// Random right-censored dataset; durations on a coarse grid so ties occur.
pub fn random_dataset(rng: &mut TestRng, n: usize, p: usize) -> Dataset<f64> {
    loop {
        let obs: Vec<_> = (0..n)
            .map(|_| {
                let t = (1 + rng.below(12)) as f64 * 0.5;
                let event = rng.unit() < 0.7;
                let z = (0..p).map(|_| rng.normal()).collect();
                Observation::new(t, event, z)
            })
            .collect();
        let names = (0..p).map(|k| format!("x{k}")).collect();
        let d = Dataset::new(obs, names).unwrap();
        if d.event_count() > 0 {
            return d;
        }
    }
}
