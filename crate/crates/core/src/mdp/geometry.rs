use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{evaluate_rows, FiniteMdp, Policy, ValueVector};
use crate::error::{Error, Result};
use crate::rng::dirichlet_flat;

/// Draws `n` policies whose rows are uniform on the simplex and returns each
/// with its exact value. Deterministic for a given `(seed, n)`.
pub fn sample_policy_values(mdp: &FiniteMdp, n: usize, seed: u64) -> Result<Vec<(Policy, ValueVector)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..mdp.num_states).map(|_| dirichlet_flat(&mut rng, mdp.num_actions)).collect();
            let v = evaluate_rows(mdp, &rows)?;
            Ok((Policy::new(rows)?, v))
        })
        .collect()
}

/// ℓ∞ distance from `p` to the segment `[a, b]`.
///
/// The distance is convex in the segment parameter, so a golden-section
/// search over `[0, 1]` converges to the minimum.
pub fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let dist = |t: f64| {
        p.iter().zip(a.iter().zip(b)).fold(0.0_f64, |m, (x, (y0, y1))| m.max((x - (y0 + t * (y1 - y0))).abs()))
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (dist(c), dist(d));
    for _ in 0..200 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = dist(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = dist(d);
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    [dist(0.0), dist(1.0), fc, fd, dist(0.5 * (lo + hi))].into_iter().fold(f64::INFINITY, f64::min)
}

fn differing_states(pi0: &Policy, pi1: &Policy) -> Vec<usize> {
    (0..pi0.num_states()).filter(|&s| pi0.row(s) != pi1.row(s)).collect()
}

/// Largest ℓ∞ distance of `V^{π_α}` from the segment `[V^{π0}, V^{π1}]` over
/// `k` evenly spaced interpolants `π_α = α π1 + (1-α) π0`.
///
/// The policies must agree everywhere except at exactly one state; identical
/// policies are accepted and give a zero residual.
pub fn line_segment_residual(mdp: &FiniteMdp, pi0: &Policy, pi1: &Policy, k: usize) -> Result<f64> {
    pi0.check_against(mdp)?;
    pi1.check_against(mdp)?;
    let diff = differing_states(pi0, pi1);
    if diff.is_empty() {
        return Ok(0.0);
    }
    if diff.len() != 1 {
        return Err(Error::NotSingleStateDifference(diff.len()));
    }
    let v0 = evaluate_rows(mdp, pi0.rows())?;
    let v1 = evaluate_rows(mdp, pi1.rows())?;
    let mut worst = 0.0_f64;
    for i in 0..k {
        let alpha = if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
        let rows: Vec<Vec<f64>> = pi0
            .rows()
            .iter()
            .zip(pi1.rows())
            .map(|(r0, r1)| r0.iter().zip(r1).map(|(a, b)| alpha * b + (1.0 - alpha) * a).collect())
            .collect();
        let va = evaluate_rows(mdp, &rows)?;
        worst = worst.max(segment_distance(&va.0, &v0.0, &v1.0));
    }
    Ok(worst)
}

/// True when `a ⪰ b` or `b ⪰ a` element-wise within `tol`.
pub fn monotone_ordered(a: &ValueVector, b: &ValueVector, tol: f64) -> bool {
    a.dominated_by(b, tol) || b.dominated_by(a, tol)
}
