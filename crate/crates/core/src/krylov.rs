//! Restarted GMRES for complex linear systems given by a matrix-free operator.

use num_complex::Complex64;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresSettings {
    /// Absolute residual target in the Euclidean norm of the unknowns.
    pub abs_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `op(x) = b` starting from `x0`.
pub fn gmres<F>(op: F, b: &[Complex64], x0: Option<&[Complex64]>, s: &GmresSettings) -> GmresOutcome
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let mut x: Vec<Complex64> = x0.map_or_else(|| vec![Complex64::default(); n], |v| v.to_vec());
    let mut iterations = 0;
    let residual_of = |x: &[Complex64]| -> Vec<Complex64> {
        let ax = op(x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    };
    let mut r = residual_of(&x);
    let mut beta = norm(&r);
    while beta > s.abs_tol && iterations < s.max_iter {
        let m = s.restart.min(s.max_iter - iterations).max(1);
        let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        // Hessenberg columns after Givens rotations
        let mut h: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, Complex64)> = Vec::with_capacity(m);
        let mut g = vec![Complex64::default(); m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut used = 0;
        for j in 0..m {
            let mut w = op(&v[j]);
            let mut col = vec![Complex64::default(); j + 2];
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(vi, &w);
                    col[i] += hij;
                    for (wk, vk) in w.iter_mut().zip(vi) {
                        *wk -= hij * vk;
                    }
                }
            }
            let hn = norm(&w);
            col[j + 1] = Complex64::new(hn, 0.0);
            for (i, &(c, sn)) in cs.iter().enumerate() {
                let a = col[i];
                let bb = col[i + 1];
                col[i] = c * a + sn * bb;
                col[i + 1] = -sn.conj() * a + c * bb;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, sn) = if den == 0.0 {
                (1.0, Complex64::default())
            } else if a.norm() == 0.0 {
                (0.0, Complex64::new(1.0, 0.0) * (bb.conj() / bb.norm()))
            } else {
                let c = a.norm() / den;
                let sn = (a / a.norm()) * bb.conj() / den;
                (c, sn)
            };
            col[j] = c * a + sn * bb;
            col[j + 1] = Complex64::default();
            let gj = g[j];
            g[j] = c * gj;
            g[j + 1] = -sn.conj() * gj;
            cs.push((c, sn));
            h.push(col);
            used = j + 1;
            iterations += 1;
            if g[j + 1].norm() <= s.abs_tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![Complex64::default(); used];
        for i in (0..used).rev() {
            let mut acc = g[i];
            for k in i + 1..used {
                acc -= h[k][i] * y[k];
            }
            y[i] = acc / h[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[k]) {
                *xi += yk * vi;
            }
        }
        r = residual_of(&x);
        beta = norm(&r);
    }
    GmresOutcome { converged: beta <= s.abs_tol, x, residual: beta, iterations }
}
