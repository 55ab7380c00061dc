#![allow(dead_code)]

use mevrate::{BurnPolicy, MarketInstance, ToleranceDistribution};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn normal_market() -> MarketInstance {
    MarketInstance::new(
        ToleranceDistribution::truncated_normal(0.4, 0.01).unwrap(),
        ToleranceDistribution::truncated_normal(0.5, 0.01).unwrap(),
        1.6,
    )
    .unwrap()
}

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

pub fn random_market(rng: &mut ChaCha8Rng, burn: BurnPolicy) -> MarketInstance {
    loop {
        let (f, g) = (random_law(rng), random_law(rng));
        if let Ok(m) = MarketInstance::with_burn(f, g, rng.gen_range(0.5..2.0), burn.clone()) {
            return m;
        }
    }
}
