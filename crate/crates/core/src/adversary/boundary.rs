use super::{ball::ray_extent, AdversaryModel, PerturbedPolicy};
use crate::error::Result;
use crate::mdp::Policy;
use crate::rng::l2;

const DIRECTION_TOL: f64 = 1e-9;
const EXTREME_TOL: f64 = 1e-9;

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// True when no state's row can be pushed further from the victim's row along
/// its own perturbing direction while remaining admissible.
///
/// An unperturbed row counts as outermost only when the admissible set at that
/// state is a single point.
pub fn outermost_boundary_member(model: &AdversaryModel, pi: &Policy, candidate: &PerturbedPolicy) -> Result<bool> {
    candidate.check_admissible(model, pi)?;
    for s in 0..pi.num_states() {
        let p = pi.row(s);
        let c = candidate.row(s);
        let u = diff(c, p);
        let norm = l2(&u);
        let outermost = match model {
            AdversaryModel::PolicyBall(m) => {
                let r = m.radius(s);
                if norm <= 1e-12 {
                    r <= 0.0 || p.len() < 2
                } else {
                    let unit: Vec<f64> = u.iter().map(|x| x / norm).collect();
                    ray_extent(p, &unit, r) - norm <= EXTREME_TOL
                }
            }
            AdversaryModel::StateNeighborhood(m) => {
                let rows: Vec<&[f64]> = m.neighbors(s).iter().map(|&t| pi.row(t)).collect();
                if norm <= 1e-12 {
                    rows.iter().all(|q| l2(&diff(q, p)) <= 1e-12)
                } else {
                    !rows.iter().any(|q| {
                        let w = diff(q, p);
                        let wn = l2(&w);
                        wn > norm * (1.0 + 1e-12)
                            && w.iter().zip(&u).all(|(a, b)| (a / wn - b / norm).abs() <= DIRECTION_TOL)
                    })
                }
            }
        };
        if !outermost {
            return Ok(false);
        }
    }
    Ok(true)
}
