//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (b - a) / 12.0 * (fa + 4.0 * flm + fm);
        let right = (b - a) / 12.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Γ(d/2) from factorials and double factorials.
pub fn gamma_half(d: u32) -> f64 {
    if d % 2 == 0 {
        (1..d / 2).map(f64::from).product()
    } else {
        // Γ(d/2) = √π (d−2)!! / 2^((d−1)/2)
        let double_fact: f64 = (1..=d.saturating_sub(2)).rev().step_by(2).map(f64::from).product();
        std::f64::consts::PI.sqrt() * double_fact / 2f64.powi(((d - 1) / 2) as i32)
    }
}

/// P(χ²_d > x) by integrating the density after substituting t = u², which
/// removes the singularity at 0 for d = 1.
pub fn chi2_sf_quadrature(x: f64, d: u32) -> f64 {
    let norm = 2f64.powf(d as f64 / 2.0) * gamma_half(d);
    let f = |u: f64| 2.0 * u.powi(d as i32 - 1) * (-u * u / 2.0).exp() / norm;
    let lo = x.sqrt();
    // Fixed panels first, so no peak hides between the initial Simpson nodes.
    (0..80).map(|i| simpson(&f, lo + 0.5 * i as f64, lo + 0.5 * (i + 1) as f64, 1e-15)).sum()
}

/// Monte Carlo estimate of P(D) = E_p[Π p_ij^n_ij] where each row is drawn
/// from a symmetric Dirichlet(α) over `n_states` via normalized Gamma
/// variates. `rows` lists the (target, count) cells of each observed row.
/// Returns (mean, standard error).
pub fn mc_evidence<R: Rng>(rows: &[Vec<(usize, i32)>], n_states: usize, alpha: f64, samples: usize, rng: &mut R) -> (f64, f64) {
    let gamma = Gamma::new(alpha, 1.0).unwrap();
    let mut draw = vec![0.0; n_states];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let mut lik = 1.0;
        for row in rows {
            let mut total = 0.0;
            for d in draw.iter_mut() {
                *d = gamma.sample(rng);
                total += *d;
            }
            for &(s, c) in row {
                lik *= (draw[s] / total).powi(c);
            }
        }
        sum += lik;
        sum_sq += lik * lik;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0) * m / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Rank of `target` by explicit tie classes: sort descending, group equal
/// values, and return the position of the last member of the target's class.
pub fn brute_force_rank(row: &[f64], target: usize) -> usize {
    let mut sorted = row.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if sorted[i] == row[target] {
            return j;
        }
        i = j;
    }
    sorted.len()
}

/// Order-k MLE log-likelihood recomputed from raw label paths with a hash
/// map, padding each path with k RESETs in front and one at the end.
pub fn brute_force_log_likelihood(paths: &[Vec<u32>], k: usize) -> f64 {
    use std::collections::HashMap;
    let mut cells: HashMap<(Vec<u32>, u32), f64> = HashMap::new();
    let mut rows: HashMap<Vec<u32>, f64> = HashMap::new();
    for p in paths {
        let mut seq = vec![0u32; k];
        seq.extend(p);
        seq.push(0);
        for w in seq.windows(k + 1) {
            *cells.entry((w[..k].to_vec(), w[k])).or_default() += 1.0;
            *rows.entry(w[..k].to_vec()).or_default() += 1.0;
        }
    }
    cells.iter().map(|((ctx, _), &n)| n * (n / rows[ctx]).ln()).sum()
}
