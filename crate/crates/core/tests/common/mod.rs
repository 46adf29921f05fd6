//! Data generators shared by integration tests.

use ccm_core::random::packet;
use ccm_core::{Grid, HardyField};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Packets with `k0 w >= 9`, so their negative-frequency content is far below rounding.
pub fn clean_packets(g: &Grid, rng: &mut ChaCha8Rng, count: usize, spread: f64) -> HardyField {
    let one = Complex64::new(1.0, 0.0);
    let mut acc = HardyField::zero(g);
    for _ in 0..count {
        let w = rng.gen_range(1.5..2.2);
        let k0 = rng.gen_range(6.0..8.0);
        let x0 = rng.gen_range(-spread..spread);
        let amp = Complex64::from_polar(rng.gen_range(0.3..0.8), rng.gen_range(0.0..6.2));
        acc = acc.combine(one, &packet(g, x0, k0, w, 1.0), amp).unwrap();
    }
    acc
}
