//! Independent reference computations shared by the integration tests.
//!
//! Nothing here goes through the crate's operator builders or its
//! eigensolver wrapper: Hamiltonians are assembled from the difference
//! equation, eigenvalue counts come from Hermitian Gaussian elimination
//! (Sylvester inertia), and bound states from the Birman-Schwinger
//! determinant with the Bloch-sum resolvent.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use overcrit::model::{Boundary, ModelConfig};

pub type C = Complex<f64>;

pub fn c(re: f64, im: f64) -> C {
    Complex::new(re, im)
}

/// `H0 + lambda V` from
/// `(H psi)_n = sz [m psi_n + r (2 psi_n - psi_{n+1} - psi_{n-1})] - i kappa sx (psi_{n+1} - psi_{n-1}) / 2
///              - lambda v chi_well(n) psi_n`.
pub fn hamiltonian(cfg: &ModelConfig, lambda: f64) -> DMatrix<C> {
    let n = cfg.n_sites;
    let (m, r, k) = (cfg.mass, cfg.wilson, cfg.hopping);
    let mut h = DMatrix::<C>::zeros(2 * n, 2 * n);
    let well = well_sites(cfg);
    for x in 0..n {
        let shift = if well.contains(&x) { -lambda * cfg.well_depth } else { 0.0 };
        h[(2 * x, 2 * x)] = c(m + 2.0 * r + shift, 0.0);
        h[(2 * x + 1, 2 * x + 1)] = c(-(m + 2.0 * r) + shift, 0.0);
        // psi_{n+1} coefficient: -r sz - i (kappa/2) sx.
        let forward = match cfg.boundary {
            Boundary::Periodic => Some((x + 1) % n),
            Boundary::Box => (x + 1 < n).then_some(x + 1),
        };
        if let Some(y) = forward {
            h[(2 * x, 2 * y)] += c(-r, 0.0);
            h[(2 * x + 1, 2 * y + 1)] += c(r, 0.0);
            h[(2 * x, 2 * y + 1)] += c(0.0, -k / 2.0);
            h[(2 * x + 1, 2 * y)] += c(0.0, -k / 2.0);
        }
        // psi_{n-1} coefficient: -r sz + i (kappa/2) sx.
        let backward = match cfg.boundary {
            Boundary::Periodic => Some((x + n - 1) % n),
            Boundary::Box => x.checked_sub(1),
        };
        if let Some(y) = backward {
            h[(2 * x, 2 * y)] += c(-r, 0.0);
            h[(2 * x + 1, 2 * y + 1)] += c(r, 0.0);
            h[(2 * x, 2 * y + 1)] += c(0.0, k / 2.0);
            h[(2 * x + 1, 2 * y)] += c(0.0, k / 2.0);
        }
    }
    h
}

pub fn well_sites(cfg: &ModelConfig) -> Vec<usize> {
    let n = cfg.n_sites as i64;
    let centre = cfg.well_center.unwrap_or(cfg.n_sites / 2) as i64;
    let w = cfg.well_halfwidth as i64;
    (centre - w..=centre + w).map(|s| s.rem_euclid(n) as usize).collect()
}

/// Number of eigenvalues of the Hermitian `h` strictly below `theta`, as the
/// count of negative pivots of `h - theta` under Gaussian elimination.
pub fn count_below(h: &DMatrix<C>, theta: f64) -> usize {
    let n = h.nrows();
    let mut a = h.clone();
    for i in 0..n {
        a[(i, i)] -= c(theta, 0.0);
    }
    let mut negative = 0;
    for p in 0..n {
        let mut pivot = a[(p, p)].re;
        if pivot == 0.0 {
            pivot = -f64::EPSILON;
        }
        if pivot < 0.0 {
            negative += 1;
        }
        for i in p + 1..n {
            let f = a[(i, p)] / pivot;
            if f == c(0.0, 0.0) {
                continue;
            }
            for j in p + 1..n {
                let t = a[(p, j)];
                a[(i, j)] -= f * t;
            }
        }
    }
    negative
}

/// Eigenvalue with 0-based `ordinal` by bisection on [`count_below`].
pub fn ordinal_eigenvalue(h: &DMatrix<C>, ordinal: usize, lo: f64, hi: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if count_below(h, mid) > ordinal {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(b-, a+)`: top of the lower band and bottom of the upper band of `H0`.
pub fn band_edges(cfg: &ModelConfig) -> (f64, f64) {
    let h = hamiltonian(cfg, 0.0);
    let n = cfg.n_sites;
    let bound = 2.0 * (cfg.mass.abs() + 4.0 * cfg.wilson.abs() + cfg.hopping.abs());
    let b_minus = ordinal_eigenvalue(&h, n - 1, -bound, bound, 1e-13);
    let a_plus = ordinal_eigenvalue(&h, n, -bound, bound, 1e-13);
    (b_minus, a_plus)
}

/// `true` once the ordinal-`n` eigenvalue has reached `b- + 1e-3 * gap`.
fn dived(cfg: &ModelConfig, lambda: f64, threshold: f64) -> bool {
    count_below(&hamiltonian(cfg, lambda), threshold) > cfg.n_sites
}

/// Critical coupling from a uniform scan: a coarse pass of width `coarse`
/// brackets the first dived coupling, then a pass at `resolution` inside
/// that cell. Returns the midpoint of the first dived fine cell.
pub fn scan_lambda_c(cfg: &ModelConfig, coarse: f64, resolution: f64) -> f64 {
    let (b_minus, a_plus) = band_edges(cfg);
    let threshold = b_minus + 1e-3 * (a_plus - b_minus);
    let mut lo = 0.0;
    while !dived(cfg, lo + coarse, threshold) {
        lo += coarse;
        assert!(lo < 100.0, "no dive below lambda = 100");
    }
    let steps = (coarse / resolution).round() as usize;
    for j in 1..=steps {
        let lambda = lo + j as f64 * resolution;
        if dived(cfg, lambda, threshold) {
            return lambda - 0.5 * resolution;
        }
    }
    lo + coarse - 0.5 * resolution
}

/// `E+(k) = sqrt((m + 2r(1 - cos k))^2 + kappa^2 sin^2 k)`.
pub fn dispersion(cfg: &ModelConfig, k: f64) -> f64 {
    let a = cfg.mass + 2.0 * cfg.wilson * (1.0 - k.cos());
    let b = cfg.hopping * k.sin();
    (a * a + b * b).sqrt()
}

/// Periodic-chain spectrum `{-E+(k), E+(k)}` on `k = 2 pi j / n`,
/// ascending.
pub fn periodic_spectrum(cfg: &ModelConfig) -> Vec<f64> {
    let n = cfg.n_sites;
    let mut out: Vec<f64> = (0..n)
        .flat_map(|j| {
            let e = dispersion(cfg, std::f64::consts::TAU * j as f64 / n as f64);
            [-e, e]
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Bloch matrix `h(k) = sz (m + 2r - 2r cos k) + kappa sin k sx`.
fn bloch(cfg: &ModelConfig, k: f64) -> [[C; 2]; 2] {
    let d = cfg.mass + 2.0 * cfg.wilson - 2.0 * cfg.wilson * k.cos();
    let s = cfg.hopping * k.sin();
    [[c(d, 0.0), c(s, 0.0)], [c(s, 0.0), c(-d, 0.0)]]
}

/// `P_well (E - H0)^{-1} P_well` on a periodic chain from the Bloch sum
/// `(1/n) sum_k e^{ik(x-y)} (E - h(k))^{-1}`.
pub fn well_resolvent(cfg: &ModelConfig, energy: f64) -> DMatrix<C> {
    let n = cfg.n_sites;
    let sites = well_sites(cfg);
    let r = 2 * sites.len();
    let mut g = DMatrix::<C>::zeros(r, r);
    for j in 0..n {
        let k = std::f64::consts::TAU * j as f64 / n as f64;
        let h = bloch(cfg, k);
        // (E - h)^{-1} for a traceless real-symmetric 2x2 block.
        let det = energy * energy - (h[0][0].re * h[0][0].re + h[0][1].re * h[0][1].re);
        let inv = [
            [(c(energy, 0.0) + h[0][0]) / det, h[0][1] / det],
            [h[1][0] / det, (c(energy, 0.0) + h[1][1]) / det],
        ];
        for (p, &x) in sites.iter().enumerate() {
            for (q, &y) in sites.iter().enumerate() {
                let ph = Complex::from_polar(1.0 / n as f64, k * (x as f64 - y as f64));
                for a in 0..2 {
                    for b in 0..2 {
                        g[(2 * p + a, 2 * q + b)] += ph * inv[a][b];
                    }
                }
            }
        }
    }
    g
}

/// Number of negative eigenvalues of `I + lambda v K(E)`.
fn bs_count(cfg: &ModelConfig, lambda: f64, energy: f64) -> usize {
    let k = well_resolvent(cfg, energy);
    let r = k.nrows();
    let m = DMatrix::<C>::identity(r, r) + k * c(lambda * cfg.well_depth, 0.0);
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    count_below(&m, 0.0)
}

/// Gap eigenvalues of `H0 + lambda V` on a periodic chain: the energies in
/// `(b-, a+)` where an eigenvalue of `I + lambda v P (E - H0)^{-1} P`
/// crosses zero. These eigenvalues decrease with `E`, so the negative count
/// steps up by one at every bound state.
pub fn birman_schwinger_levels(cfg: &ModelConfig, lambda: f64, tol: f64) -> Vec<f64> {
    let (b_minus, a_plus) = band_edges(cfg);
    let margin = 1e-7;
    let (lo, hi) = (b_minus + margin, a_plus - margin);
    let base = bs_count(cfg, lambda, lo);
    let top = bs_count(cfg, lambda, hi);
    (1..=top.saturating_sub(base))
        .map(|i| {
            let (mut a, mut b) = (lo, hi);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if bs_count(cfg, lambda, mid) >= base + i {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Reference model on a shorter chain.
pub fn small_config(n_sites: usize, halfwidth: usize) -> ModelConfig {
    ModelConfig { n_sites, well_halfwidth: halfwidth, ..ModelConfig::reference() }
}

/// `exp(-i t h)` by scaling and squaring of a 20-term Taylor series.
pub fn expm_i(h: &DMatrix<C>, t: f64) -> DMatrix<C> {
    let n = h.nrows();
    let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() * t.abs();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = h * c(0.0, -t / 2f64.powi(squarings as i32));
    let mut sum = DMatrix::<C>::identity(n, n);
    let mut term = DMatrix::<C>::identity(n, n);
    for k in 1..=20 {
        term = &term * &a * c(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `phi(s)` from the exponential smooth step `e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})`.
pub fn bump(s: f64) -> f64 {
    let x = 2.0 - s.abs();
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// `phi_eps(t)` with rates `eps1` before and `eps2` after `t = 0`.
pub fn switching(eps1: f64, eps2: f64, t: f64) -> f64 {
    bump(if t < 0.0 { eps1 * t } else { eps2 * t })
}

/// Position-basis propagator `U(t_to, t_from)` of
/// `H0 + lambda phi_eps(t) V` by the exponential midpoint rule with
/// `steps` uniform steps.
pub fn midpoint_propagator(
    cfg: &ModelConfig,
    lambda: f64,
    eps: (f64, f64),
    t_from: f64,
    t_to: f64,
    steps: usize,
) -> DMatrix<C> {
    let h0 = hamiltonian(cfg, 0.0);
    let v = hamiltonian(cfg, 1.0) - &h0;
    let dt = (t_to - t_from) / steps as f64;
    let mut u = DMatrix::<C>::identity(h0.nrows(), h0.nrows());
    for i in 0..steps {
        let mid = t_from + (i as f64 + 0.5) * dt;
        let h = &h0 + &v * c(lambda * switching(eps.0, eps.1, mid), 0.0);
        u = expm_i(&h, dt) * u;
    }
    u
}
