//! Seeded initial data.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::grid::{szego_project, Grid, HardyField};
use crate::observables::mass;

/// Hardy spectrum `f^(xi_k) = sigma_k (g1 + i g2)/sqrt(2)`, `sigma_k = a (1 + xi_k)^{-p}`.
pub fn random_spectral(grid: &Grid, seed: u64, amplitude: f64, decay: f64) -> HardyField {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let spec: Vec<Complex64> = (0..grid.ladder_len())
        .map(|k| {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let sigma = amplitude * (1.0 + grid.xi(k)).powf(-decay);
            Complex64::new(g1, g2) * (sigma / 2f64.sqrt())
        })
        .collect();
    HardyField::from_spectrum(grid, &spec).expect("finite spectrum on the grid ladder")
}

/// Projection of `amp exp(-(x - x0)^2/(2 w^2) + i k0 x)`.
pub fn packet(grid: &Grid, x0: f64, k0: f64, width: f64, amp: f64) -> HardyField {
    let s: Vec<Complex64> = grid
        .xs()
        .iter()
        .map(|x| {
            let d = (x - x0) / width;
            Complex64::from_polar(amp * (-0.5 * d * d).exp(), k0 * x)
        })
        .collect();
    szego_project(grid, &s).expect("finite packet samples")
}

/// Sum of `count` random Gaussian packets with carriers large against the
/// inverse width, so almost all of their mass is already Hardy.
pub fn random_packets(grid: &Grid, seed: u64, count: usize, spread: f64) -> HardyField {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut acc = HardyField::zero(grid);
    for _ in 0..count {
        let x0 = rng.gen_range(-spread..spread);
        let width = rng.gen_range(1.2..2.5);
        let k0 = rng.gen_range(4.0..7.0);
        let amp = rng.gen_range(0.3..0.7);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let p = packet(grid, x0, k0, width, amp).scale(Complex64::from_polar(1.0, phase));
        acc = acc.combine(Complex64::new(1.0, 0.0), &p, Complex64::new(1.0, 0.0)).expect("same grid");
    }
    acc
}

/// Rescales `q` to the given mass; the zero field is returned unchanged.
pub fn with_mass(q: &HardyField, target: f64) -> HardyField {
    let m = mass(q);
    if m == 0.0 {
        q.clone()
    } else {
        q.scale(Complex64::new((target / m).sqrt(), 0.0))
    }
}
