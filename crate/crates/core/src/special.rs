//! Trigamma and tetragamma for positive real arguments.
//!
//! Used to sum `1/(xi_k + kappa)^m` over the tail of a frequency ladder in
//! closed form.

const SHIFT: f64 = 20.0;

/// `psi_1(x) = sum_{m>=0} 1/(x+m)^2`.
pub fn trigamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < SHIFT {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    let series = r
        + 0.5 * r2
        + r * r2 * (1.0 / 6.0 + r2 * (-1.0 / 30.0 + r2 * (1.0 / 42.0 + r2 * (-1.0 / 30.0 + r2 * 5.0 / 66.0))));
    acc + series
}

/// `psi_2(x) = -2 sum_{m>=0} 1/(x+m)^3`.
pub fn tetragamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < SHIFT {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    let series = r2 + r2 * r + r2 * r2 * (0.5 + r2 * (-1.0 / 6.0 + r2 * (1.0 / 6.0 + r2 * (-0.3 + r2 * 5.0 / 6.0))));
    acc - series
}

/// `sum_{k>=k0} 1/(a k + kappa)^2`.
pub fn ladder_tail_sq(k0: usize, a: f64, kappa: f64) -> f64 {
    trigamma(k0 as f64 + kappa / a) / (a * a)
}

/// `sum_{k>=k0} 1/(a k + kappa)^3`.
pub fn ladder_tail_cube(k0: usize, a: f64, kappa: f64) -> f64 {
    -tetragamma(k0 as f64 + kappa / a) / (2.0 * a * a * a)
}
