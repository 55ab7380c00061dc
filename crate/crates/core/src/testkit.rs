//! Random instance pools shared by unit tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::ToleranceDistribution;
use crate::dynamics::{BurnPolicy, MarketInstance};

pub fn random_law(rng: &mut ChaCha8Rng) -> ToleranceDistribution {
    match rng.gen_range(0..3) {
        0 => ToleranceDistribution::beta(rng.gen_range(1.5..6.0), rng.gen_range(1.5..6.0)).unwrap(),
        1 => {
            let lo = rng.gen_range(0.0..0.6);
            ToleranceDistribution::uniform(lo, rng.gen_range(lo + 0.1..1.0)).unwrap()
        }
        _ => {
            let sigma: f64 = rng.gen_range(0.05..0.3);
            ToleranceDistribution::truncated_normal(rng.gen_range(0.1..0.9), sigma * sigma).unwrap()
        }
    }
}

pub fn random_beta(rng: &mut ChaCha8Rng) -> ToleranceDistribution {
    ToleranceDistribution::beta(rng.gen_range(1.5..6.0), rng.gen_range(1.5..6.0)).unwrap()
}

pub fn random_market(rng: &mut ChaCha8Rng, burn: BurnPolicy) -> MarketInstance {
    loop {
        let f = random_law(rng);
        let g = random_law(rng);
        let w = rng.gen_range(0.5..2.0);
        if let Ok(m) = MarketInstance::with_burn(f, g, w, burn.clone()) {
            return m;
        }
    }
}

pub fn random_beta_market(rng: &mut ChaCha8Rng) -> MarketInstance {
    let (f, g) = (random_beta(rng), random_beta(rng));
    MarketInstance::new(f, g, rng.gen_range(0.5..2.0)).unwrap()
}
