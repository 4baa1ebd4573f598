//! Geometry of `Δ(A) ∩ {x : ‖x - p‖₂ ≤ r}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{l2, unit_zero_sum};

const DIRECTION_SUM_TOL: f64 = 1e-9;

fn check_direction(direction: &[f64]) -> Result<()> {
    let sum: f64 = direction.iter().sum();
    if !(sum.abs() <= DIRECTION_SUM_TOL) {
        return Err(Error::InvalidDirection(format!("coordinates sum to {sum}, expected 0")));
    }
    Ok(())
}

/// Largest `t ∈ [0, radius]` with `p + t·u` in the simplex, for a unit
/// zero-sum `u`.
pub fn ray_extent(p: &[f64], u: &[f64], radius: f64) -> f64 {
    p.iter().zip(u).filter(|(_, &ui)| ui < 0.0).map(|(&pi, &ui)| pi.max(0.0) / -ui).fold(radius, f64::min).max(0.0)
}

fn step(p: &[f64], u: &[f64], t: f64) -> Vec<f64> {
    p.iter().zip(u).map(|(a, b)| (a + t * b).max(0.0)).collect()
}

/// The point of the ball-simplex intersection farthest from `pi_row` along
/// `direction`. A zero direction returns `pi_row`.
pub fn policy_ball_extreme(pi_row: &[f64], direction: &[f64], radius: f64) -> Result<Vec<f64>> {
    if direction.len() != pi_row.len() {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} coordinates, row has {}",
            direction.len(),
            pi_row.len()
        )));
    }
    check_direction(direction)?;
    let norm = l2(direction);
    if norm <= 1e-15 || radius <= 0.0 {
        return Ok(pi_row.to_vec());
    }
    let u: Vec<f64> = direction.iter().map(|x| x / norm).collect();
    Ok(step(pi_row, &u, ray_extent(pi_row, &u, radius)))
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Minimizes `⟨c, x⟩` over the ball-simplex intersection around `p`.
///
/// The minimizer is `proj(p - λc)` for the multiplier `λ` at which the ball
/// constraint becomes active, found by bisection.
pub fn minimize_linear_in_ball(p: &[f64], c: &[f64], radius: f64) -> Vec<f64> {
    let mean = c.iter().sum::<f64>() / c.len() as f64;
    let c: Vec<f64> = c.iter().map(|x| x - mean).collect();
    let scale = c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if radius <= 0.0 || scale <= 1e-14 {
        return p.to_vec();
    }
    let at = |lambda: f64| project_simplex(&p.iter().zip(&c).map(|(a, b)| a - lambda * b).collect::<Vec<_>>());
    let dist = |x: &[f64]| l2(&x.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>());
    let floor = c.iter().copied().fold(f64::INFINITY, f64::min);
    let face: Vec<usize> = (0..c.len()).filter(|&a| c[a] <= floor + 1e-12 * scale).collect();
    let mut limit = vec![0.0; c.len()];
    let on_face = project_simplex(&face.iter().map(|&a| p[a]).collect::<Vec<_>>());
    face.iter().zip(on_face).for_each(|(&a, x)| limit[a] = x);
    if dist(&limit) <= radius {
        return limit;
    }
    let mut hi = 1.0 / scale;
    while dist(&at(hi)) < radius {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist(&at(mid)) < radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    at(lo)
}

/// Orthonormal basis of the zero-sum hyperplane in `R^n` (Helmert rows).
pub fn zero_sum_basis(n: usize) -> Vec<Vec<f64>> {
    (1..n)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            (0..n)
                .map(|i| match i.cmp(&k) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(k as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Unit direction at angle `theta` in the zero-sum plane of `R^3`.
pub fn planar_direction(theta: f64) -> Vec<f64> {
    let basis = zero_sum_basis(3);
    (0..3).map(|i| theta.cos() * basis[0][i] + theta.sin() * basis[1][i]).collect()
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximizes `objective` over the boundary of the ball-simplex intersection
/// by searching over ray directions from `p`.
///
/// Two actions have two candidate rays. Three actions use a 3600-point
/// angular grid refined by golden-section search. Larger action sets use a
/// seeded random net refined by shrinking random perturbations.
pub fn maximize_on_boundary(p: &[f64], radius: f64, objective: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let n = p.len();
    if radius <= 0.0 || n < 2 {
        return p.to_vec();
    }
    let at = |u: &[f64]| step(p, u, ray_extent(p, u, radius));
    let mut best = p.to_vec();
    let mut best_val = objective(p);
    let consider = |x: Vec<f64>, best: &mut Vec<f64>, best_val: &mut f64| {
        let v = objective(&x);
        if v > *best_val {
            *best_val = v;
            *best = x;
        }
    };
    match n {
        2 => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            consider(at(&[s, -s]), &mut best, &mut best_val);
            consider(at(&[-s, s]), &mut best, &mut best_val);
        }
        3 => {
            let grid = 3600;
            let h = std::f64::consts::TAU / grid as f64;
            let f = |theta: f64| objective(&at(&planar_direction(theta)));
            let mut top = (0.0, f64::NEG_INFINITY);
            for i in 0..grid {
                let theta = i as f64 * h;
                let v = f(theta);
                if v > top.1 {
                    top = (theta, v);
                }
            }
            let (theta, _) = golden_max(&f, top.0 - h, top.0 + h, 1e-10);
            consider(at(&planar_direction(top.0)), &mut best, &mut best_val);
            consider(at(&planar_direction(theta)), &mut best, &mut best_val);
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ba11);
            let mut dir = vec![0.0; n];
            let mut top = f64::NEG_INFINITY;
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        let mut u = vec![0.0; n];
                        u[a] = std::f64::consts::FRAC_1_SQRT_2;
                        u[b] = -std::f64::consts::FRAC_1_SQRT_2;
                        let v = objective(&at(&u));
                        if v > top {
                            top = v;
                            dir = u;
                        }
                    }
                }
            }
            for _ in 0..4000 {
                let u = unit_zero_sum(&mut rng, n);
                let v = objective(&at(&u));
                if v > top {
                    top = v;
                    dir = u;
                }
            }
            let mut scale = 0.2;
            while scale > 1e-10 {
                let mut improved = false;
                for _ in 0..40 {
                    let noise = unit_zero_sum(&mut rng, n);
                    let mut u: Vec<f64> = dir.iter().zip(&noise).map(|(a, b)| a + scale * b).collect();
                    let norm = l2(&u);
                    u.iter_mut().for_each(|x| *x /= norm);
                    let v = objective(&at(&u));
                    if v > top {
                        top = v;
                        dir = u;
                        improved = true;
                    }
                }
                if !improved {
                    scale *= 0.5;
                }
            }
            consider(at(&dir), &mut best, &mut best_val);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_radius_and_zero_direction_return_the_row() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(policy_ball_extreme(&p, &[1.0, -1.0, 0.0], 0.0).unwrap(), p.to_vec());
        assert_eq!(policy_ball_extreme(&p, &[0.0, 0.0, 0.0], 0.3).unwrap(), p.to_vec());
    }

    #[test]
    fn interior_case_moves_the_full_radius() {
        let p = [1.0 / 3.0; 3];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let out = policy_ball_extreme(&p, &[s, -s, 0.0], 0.2).unwrap();
        let expect = [1.0 / 3.0 + 0.2 * s, 1.0 / 3.0 - 0.2 * s, 1.0 / 3.0];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn simplex_boundary_caps_the_step() {
        let p = [0.9, 0.1, 0.0];
        let out = policy_ball_extreme(&p, &[-1.0, 1.0, 0.0], 10.0).unwrap();
        // bisection oracle over t on the unnormalized ray
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let feasible = |t: f64| p[0] - t * s >= 0.0 && p[1] + t * s <= 1.0;
        let (mut lo, mut hi) = (0.0, 10.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((out[0] - (p[0] - lo * s)).abs() < 1e-11);
        assert!(out[0].abs() < 1e-15 && (out[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonzero_direction_sum_is_rejected() {
        assert!(matches!(policy_ball_extreme(&[0.5, 0.5], &[1.0, 0.0], 0.1), Err(Error::InvalidDirection(_))));
    }

    #[test]
    fn projection_is_a_distribution() {
        for y in [vec![0.5, 0.5], vec![2.0, -1.0, 0.3], vec![-0.2, -0.3, -0.1, 0.0]] {
            let x = project_simplex(&y);
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(x.iter().all(|&v| v >= 0.0));
        }
        assert_eq!(project_simplex(&[0.25, 0.75]), vec![0.25, 0.75]);
    }

    #[test]
    fn linear_minimizer_beats_a_ray_scan() {
        let p = [0.215, 0.429, 0.356];
        let c = [0.3, -1.0, 0.7];
        let x = minimize_linear_in_ball(&p, &c, 0.2);
        let val = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        let dist = l2(&x.iter().zip(&p).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(dist <= 0.2 + 1e-9);
        for i in 0..3600 {
            let y = policy_ball_extreme(&p, &planar_direction(i as f64 * std::f64::consts::TAU / 3600.0), 0.2).unwrap();
            assert!(val(&x) <= val(&y) + 1e-12);
        }
    }

    #[test]
    fn constant_cost_returns_the_row() {
        let p = [0.2, 0.8];
        assert_eq!(minimize_linear_in_ball(&p, &[1.0, 1.0], 0.3), p.to_vec());
    }

    #[test]
    fn basis_is_orthonormal_and_zero_sum() {
        let b = zero_sum_basis(4);
        for (i, u) in b.iter().enumerate() {
            assert!(u.iter().sum::<f64>().abs() < 1e-12);
            for (j, w) in b.iter().enumerate() {
                let dot: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn slack_ball_returns_the_projected_face_point() {
        let x = minimize_linear_in_ball(&[0.5, 0.3, 0.2], &[0.0, 1.0, 1.0].map(|v: f64| -v), 5.0);
        let expected = [0.0, 0.55, 0.45];
        assert!(x.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
