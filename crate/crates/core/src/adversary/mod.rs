//! Admissible perturbation sets.
//!
//! Two flavors are supported. A [`NeighborhoodModel`] lets the adversary
//! replace the observed state by any state whose feature vector lies within
//! an ε-ball, so the victim plays `π(·|h(s))`. A [`PolicyBallModel`] lets the
//! adversary move the victim's action distribution directly inside an ℓ2 ball
//! intersected with the simplex.

pub mod ball;
mod boundary;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{check_distribution, FiniteMdp, Policy};
use crate::rng::{l2, unit_zero_sum};

pub use ball::{policy_ball_extreme, ray_extent};
pub use boundary::outermost_boundary_member;

/// Default limit on `∏_s |N(s)|` for exhaustive enumeration.
pub const DEFAULT_ENUM_CAP: u128 = 10_000_000;

/// Slack allowed on the ball constraint.
pub const BALL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Linf,
    L2,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::Linf => a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())),
            Norm::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodModel {
    /// Budget and norm, when the sets were derived from features.
    pub epsilon: Option<f64>,
    pub norm: Option<Norm>,
    neighbor_sets: Vec<Vec<usize>>,
}

impl NeighborhoodModel {
    /// Uses explicit neighbor sets. Each set is sorted and deduplicated and
    /// must contain its own state.
    pub fn from_sets(mut neighbor_sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbor_sets.len();
        for (s, set) in neighbor_sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.binary_search(&s).is_err() {
                return Err(Error::InvalidModel(format!("neighbor set of state {s} does not contain {s}")));
            }
            if let Some(&bad) = set.iter().find(|&&t| t >= n) {
                return Err(Error::InvalidModel(format!("state {s} lists unknown neighbor {bad}")));
            }
        }
        Ok(NeighborhoodModel { epsilon: None, norm: None, neighbor_sets })
    }

    /// The zero-budget model: every neighbor set is `{s}`.
    pub fn identity(num_states: usize) -> Self {
        NeighborhoodModel { epsilon: Some(0.0), norm: None, neighbor_sets: (0..num_states).map(|s| vec![s]).collect() }
    }

    pub fn num_states(&self) -> usize {
        self.neighbor_sets.len()
    }

    pub fn neighbors(&self, s: usize) -> &[usize] {
        &self.neighbor_sets[s]
    }

    pub fn neighbor_sets(&self) -> &[Vec<usize>] {
        &self.neighbor_sets
    }

    pub fn max_neighbors(&self) -> usize {
        self.neighbor_sets.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `∏_s |N(s)|`, saturating.
    pub fn adversary_count(&self) -> u128 {
        self.neighbor_sets.iter().fold(1u128, |acc, set| acc.saturating_mul(set.len() as u128))
    }

    pub fn is_admissible(&self, h: &StateAdversary) -> bool {
        h.map.len() == self.num_states() && h.map.iter().enumerate().all(|(s, t)| self.neighbor_sets[s].contains(t))
    }

    pub fn check(&self, h: &StateAdversary) -> Result<()> {
        if h.map.len() != self.num_states() {
            return Err(Error::DimensionMismatch(format!(
                "adversary covers {} states, model has {}",
                h.map.len(),
                self.num_states()
            )));
        }
        for (s, &t) in h.map.iter().enumerate() {
            if !self.neighbor_sets[s].contains(&t) {
                return Err(Error::Inadmissible { state: s, target: t });
            }
        }
        Ok(())
    }
}

/// Per-state ℓ2 balls around the victim's rows. A state with radius zero is
/// not perturbable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyBallModel {
    radii: Vec<f64>,
}

impl PolicyBallModel {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if let Some((s, r)) = radii.iter().enumerate().find(|(_, r)| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidModel(format!("radius {r} at state {s} must be finite and non-negative")));
        }
        Ok(PolicyBallModel { radii })
    }

    /// Radius `radius` at the listed states, zero elsewhere.
    pub fn at_states(num_states: usize, states: &[usize], radius: f64) -> Result<Self> {
        let mut radii = vec![0.0; num_states];
        for &s in states {
            if s >= num_states {
                return Err(Error::InvalidModel(format!("perturbable state {s} out of range")));
            }
            radii[s] = radius;
        }
        PolicyBallModel::new(radii)
    }

    pub fn num_states(&self) -> usize {
        self.radii.len()
    }

    pub fn radius(&self, s: usize) -> f64 {
        self.radii[s]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn is_perturbable(&self, s: usize) -> bool {
        self.radii[s] > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "snake_case")]
pub enum AdversaryModel {
    StateNeighborhood(NeighborhoodModel),
    PolicyBall(PolicyBallModel),
}

impl AdversaryModel {
    pub fn num_states(&self) -> usize {
        match self {
            AdversaryModel::StateNeighborhood(m) => m.num_states(),
            AdversaryModel::PolicyBall(m) => m.num_states(),
        }
    }

    pub fn as_neighborhood(&self) -> Result<&NeighborhoodModel> {
        match self {
            AdversaryModel::StateNeighborhood(m) => Ok(m),
            AdversaryModel::PolicyBall(_) => Err(Error::WrongFlavor { expected: "state-neighborhood" }),
        }
    }

    pub fn as_policy_ball(&self) -> Result<&PolicyBallModel> {
        match self {
            AdversaryModel::PolicyBall(m) => Ok(m),
            AdversaryModel::StateNeighborhood(_) => Err(Error::WrongFlavor { expected: "policy-ball" }),
        }
    }
}

/// Deterministic state adversary `h`; `map[s] = h(s)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateAdversary {
    pub map: Vec<usize>,
}

impl StateAdversary {
    pub fn identity(num_states: usize) -> Self {
        StateAdversary { map: (0..num_states).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(s, &t)| s == t)
    }
}

/// The victim's policy after perturbation, row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedPolicy {
    rows: Vec<Vec<f64>>,
}

impl PerturbedPolicy {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (s, row) in rows.iter().enumerate() {
            check_distribution(row).map_err(|reason| Error::InadmissibleRow { state: s, reason })?;
        }
        Ok(PerturbedPolicy { rows })
    }

    pub fn unperturbed(pi: &Policy) -> Self {
        PerturbedPolicy { rows: pi.rows().to_vec() }
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn to_policy(&self) -> Policy {
        Policy::new(self.rows.clone()).expect("perturbed rows are validated distributions")
    }

    /// Verifies the rows are reachable from `base` under `model`.
    pub fn check_admissible(&self, model: &AdversaryModel, base: &Policy) -> Result<()> {
        if self.rows.len() != base.num_states() {
            return Err(Error::DimensionMismatch("perturbed policy size differs from base".into()));
        }
        match model {
            AdversaryModel::StateNeighborhood(m) => {
                for (s, row) in self.rows.iter().enumerate() {
                    if !m.neighbors(s).iter().any(|&t| base.row(t) == row.as_slice()) {
                        return Err(Error::InadmissibleRow {
                            state: s,
                            reason: "row is not the victim's row at any neighbor".into(),
                        });
                    }
                }
            }
            AdversaryModel::PolicyBall(m) => {
                for (s, row) in self.rows.iter().enumerate() {
                    let diff: Vec<f64> = row.iter().zip(base.row(s)).map(|(a, b)| a - b).collect();
                    let dist = l2(&diff);
                    if dist > m.radius(s) + BALL_TOL {
                        return Err(Error::InadmissibleRow {
                            state: s,
                            reason: format!("distance {dist} exceeds radius {}", m.radius(s)),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Neighbor sets `{s' : ‖φ(s') - φ(s)‖ ≤ ε}` over the MDP's state features,
/// ordered by state index.
pub fn build_neighborhoods(mdp: &FiniteMdp, epsilon: f64, norm: Norm) -> Result<NeighborhoodModel> {
    let features = mdp.features.as_ref().ok_or(Error::MissingFeatures)?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidModel(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let neighbor_sets = (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_states).filter(|&t| t == s || norm.distance(&features[s], &features[t]) <= epsilon).collect()
        })
        .collect();
    Ok(NeighborhoodModel { epsilon: Some(epsilon), norm: Some(norm), neighbor_sets })
}

/// `n` seeded draws from the admissible perturbed-policy set: a uniform
/// neighbor per state, or a uniform direction and extent fraction per
/// perturbable ball state.
pub fn sample_admissible(model: &AdversaryModel, pi: &Policy, n: usize, seed: u64) -> Result<Vec<PerturbedPolicy>> {
    if model.num_states() != pi.num_states() {
        return Err(Error::DimensionMismatch(format!(
            "model covers {} states, policy has {}",
            model.num_states(),
            pi.num_states()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rows = (0..pi.num_states())
                .map(|s| match model {
                    AdversaryModel::StateNeighborhood(m) => {
                        let set = m.neighbors(s);
                        pi.row(set[rng.random_range(0..set.len())]).to_vec()
                    }
                    AdversaryModel::PolicyBall(m) if m.is_perturbable(s) && pi.num_actions() > 1 => {
                        let u = unit_zero_sum(&mut rng, pi.num_actions());
                        let frac: f64 = rng.random();
                        let t = frac * ray_extent(pi.row(s), &u, m.radius(s));
                        pi.row(s).iter().zip(&u).map(|(a, b)| (a + t * b).max(0.0)).collect()
                    }
                    AdversaryModel::PolicyBall(_) => pi.row(s).to_vec(),
                })
                .collect();
            PerturbedPolicy::from_rows(rows)
        })
        .collect()
}

/// `π_h(·|s) = π(·|h(s))`.
pub fn perturbed_policy(pi: &Policy, h: &StateAdversary, model: &NeighborhoodModel) -> Result<PerturbedPolicy> {
    model.check(h)?;
    if pi.num_states() != h.map.len() {
        return Err(Error::DimensionMismatch("adversary and policy sizes differ".into()));
    }
    Ok(PerturbedPolicy { rows: h.map.iter().map(|&t| pi.row(t).to_vec()).collect() })
}

/// Every admissible deterministic adversary exactly once, in lexicographic
/// order of `(h(0), h(1), ...)` by neighbor position.
pub fn enumerate_adversaries(model: &NeighborhoodModel, cap: u128) -> Result<AdversaryIter<'_>> {
    let count = model.adversary_count();
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    Ok(AdversaryIter { model, cursor: Some(vec![0; model.num_states()]) })
}

pub struct AdversaryIter<'a> {
    model: &'a NeighborhoodModel,
    cursor: Option<Vec<usize>>,
}

impl Iterator for AdversaryIter<'_> {
    type Item = StateAdversary;

    fn next(&mut self) -> Option<StateAdversary> {
        let cursor = self.cursor.as_mut()?;
        let item =
            StateAdversary { map: cursor.iter().enumerate().map(|(s, &i)| self.model.neighbors(s)[i]).collect() };
        // odometer increment, last state fastest
        let mut s = cursor.len();
        loop {
            if s == 0 {
                self.cursor = None;
                break;
            }
            s -= 1;
            cursor[s] += 1;
            if cursor[s] < self.model.neighbors(s).len() {
                break;
            }
            cursor[s] = 0;
        }
        Some(item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::fixtures;

    fn line_mdp() -> FiniteMdp {
        let p = vec![vec![vec![1.0, 0.0, 0.0]]; 3];
        FiniteMdp::new(0.5, vec![vec![0.0]; 3], p)
            .unwrap()
            .with_features(vec![vec![0.0], vec![1.0], vec![2.0]])
            .unwrap()
    }

    #[test]
    fn zero_budget_gives_singletons() {
        let m = build_neighborhoods(&line_mdp(), 0.0, Norm::Linf).unwrap();
        assert_eq!(m.neighbor_sets(), &[vec![0], vec![1], vec![2]]);
        assert_eq!(enumerate_adversaries(&m, DEFAULT_ENUM_CAP).unwrap().count(), 1);
    }

    #[test]
    fn unit_budget_on_a_line() {
        let m = build_neighborhoods(&line_mdp(), 1.0, Norm::Linf).unwrap();
        assert_eq!(m.neighbor_sets(), &[vec![0, 1], vec![0, 1, 2], vec![1, 2]]);
        let m2 = build_neighborhoods(&line_mdp(), 1.0, Norm::L2).unwrap();
        assert_eq!(m.neighbor_sets(), m2.neighbor_sets());
    }

    #[test]
    fn budget_above_diameter_gives_everything() {
        let m = build_neighborhoods(&line_mdp(), 5.0, Norm::L2).unwrap();
        assert!(m.neighbor_sets().iter().all(|set| set == &vec![0, 1, 2]));
    }

    #[test]
    fn missing_features_is_an_error() {
        let mdp = FiniteMdp::new(0.5, vec![vec![0.0]], vec![vec![vec![1.0]]]).unwrap();
        assert!(matches!(build_neighborhoods(&mdp, 1.0, Norm::Linf), Err(Error::MissingFeatures)));
    }

    #[test]
    fn enumeration_counts_and_order() {
        let m = NeighborhoodModel::from_sets(vec![vec![0, 1], vec![0, 1, 2], vec![2]]).unwrap();
        let all: Vec<_> = enumerate_adversaries(&m, DEFAULT_ENUM_CAP).unwrap().collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0].map, vec![0, 0, 2]);
        assert_eq!(all[1].map, vec![0, 1, 2]);
        assert_eq!(all[5].map, vec![1, 2, 2]);
        let unique: std::collections::HashSet<_> = all.iter().cloned().collect();
        assert_eq!(unique.len(), 6);
        assert!(all.iter().all(|h| m.is_admissible(h)));
    }

    #[test]
    fn m_ex_full_neighborhoods_have_four_adversaries() {
        let mdp = fixtures::m_ex_mdp();
        let m = build_neighborhoods(&mdp, 1.0, Norm::Linf).unwrap();
        assert_eq!(enumerate_adversaries(&m, DEFAULT_ENUM_CAP).unwrap().count(), 4);
    }

    #[test]
    fn cap_is_enforced() {
        let m = NeighborhoodModel::from_sets(vec![vec![0, 1, 2]; 3]).unwrap();
        match enumerate_adversaries(&m, 26) {
            Err(Error::CapExceeded { count, cap }) => assert_eq!((count, cap), (27, 26)),
            _ => panic!("expected cap error"),
        }
    }

    #[test]
    fn identity_perturbation_keeps_rows() {
        let pi = fixtures::m_ex_policy();
        let m = NeighborhoodModel::from_sets(vec![vec![0, 1], vec![0, 1]]).unwrap();
        let out = perturbed_policy(&pi, &StateAdversary::identity(2), &m).unwrap();
        assert_eq!(out.rows(), pi.rows());
    }

    #[test]
    fn swap_adversary_exchanges_rows() {
        let pi = fixtures::m_ex_policy();
        let m = NeighborhoodModel::from_sets(vec![vec![0, 1], vec![0, 1]]).unwrap();
        let out = perturbed_policy(&pi, &StateAdversary { map: vec![1, 0] }, &m).unwrap();
        assert_eq!(out.row(0), pi.row(1));
        assert_eq!(out.row(1), pi.row(0));
        out.check_admissible(&AdversaryModel::StateNeighborhood(m), &pi).unwrap();
    }

    #[test]
    fn inadmissible_adversary_is_rejected() {
        let pi = fixtures::m_ex_policy();
        let m = NeighborhoodModel::identity(2);
        assert!(matches!(
            perturbed_policy(&pi, &StateAdversary { map: vec![1, 1] }, &m),
            Err(Error::Inadmissible { state: 0, target: 1 })
        ));
    }

    #[test]
    fn neighbor_sets_must_contain_self() {
        assert!(NeighborhoodModel::from_sets(vec![vec![1], vec![1]]).is_err());
        assert!(NeighborhoodModel::from_sets(vec![vec![0, 5]]).is_err());
    }

    #[test]
    fn negative_radius_is_rejected() {
        assert!(PolicyBallModel::new(vec![0.1, -0.2]).is_err());
        assert!(PolicyBallModel::at_states(2, &[3], 0.1).is_err());
    }
}
