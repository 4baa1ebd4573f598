//! Frozen instances used as oracles and counterexamples.
//!
//! Counterexample MDPs realize a perturbed row as an unreachable absorbing
//! "decoy" state whose victim row is that perturbation and whose feature
//! vector sits within the budget of its parent state. Decoys carry zero
//! reward, so they never affect values at reachable states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::{build_neighborhoods, NeighborhoodModel, Norm, PolicyBallModel};
use crate::heuristic::HeuristicKind;
use crate::mdp::{one_hot, value_iteration, FiniteMdp, Mode, Policy};

/// Victim values of the base policy on the two-state example, from an
/// exact rational solve.
pub const M_EX_BASE_VALUES: [f64; 2] = [1.560664745982795, 3.4881115890277554];

/// Ball radius at the first state in the small-MDP comparison.
pub const M_EX_DISK_RADIUS: f64 = 0.2;

/// Constraints must hold with at least this margin.
pub const CONSTRAINT_MARGIN: f64 = 1e-6;

pub fn m_ex_mdp() -> FiniteMdp {
    FiniteMdp::new(
        0.8,
        vec![vec![-0.1, -1.0, 0.1], vec![0.4, 1.5, 0.1]],
        vec![
            vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.7, 0.3]],
            vec![vec![0.05, 0.95], vec![0.25, 0.75], vec![0.3, 0.7]],
        ],
    )
    .and_then(|m| m.with_features(vec![vec![1.0, 0.0], vec![0.0, 1.0]]))
    .and_then(|m| m.with_labels(vec!["s1".into(), "s2".into()]))
    .and_then(|m| m.with_start_state(0))
    .expect("two-state example is valid")
}

pub fn m_ex_policy() -> Policy {
    Policy::new(vec![vec![0.215, 0.429, 0.356], vec![0.271, 0.592, 0.137]]).expect("rows are distributions")
}

pub fn m_ex_disk_model() -> PolicyBallModel {
    PolicyBallModel::at_states(2, &[0], M_EX_DISK_RADIUS).expect("valid radius")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    /// Positive when the inequality holds.
    pub margin: f64,
}

impl Constraint {
    fn new(name: &str, margin: f64) -> Self {
        Constraint { name: name.to_string(), margin }
    }

    pub fn holds(&self) -> bool {
        self.margin > CONSTRAINT_MARGIN
    }
}

/// A counterexample instance for one heuristic.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub mdp: FiniteMdp,
    pub pi: Policy,
    pub model: NeighborhoodModel,
    pub attack: HeuristicKind,
    pub start_state: usize,
    pub claim: &'static str,
    pub constants: Vec<(&'static str, f64)>,
    pub constraints: Vec<Constraint>,
}

impl Fixture {
    pub fn violated(&self) -> Vec<&Constraint> {
        self.constraints.iter().filter(|c| !c.holds()).collect()
    }
}

struct Node {
    label: String,
    rewards: Vec<f64>,
    /// Deterministic successor per action; `None` makes the node absorbing.
    next: Option<Vec<usize>>,
    row: Vec<f64>,
}

fn node(label: &str, rewards: Vec<f64>, next: Vec<usize>, row: Vec<f64>) -> Node {
    Node { label: label.into(), rewards, next: Some(next), row }
}

fn terminal(label: &str, num_actions: usize) -> Node {
    Node {
        label: label.into(),
        rewards: vec![0.0; num_actions],
        next: None,
        row: vec![1.0 / num_actions as f64; num_actions],
    }
}

/// Lays the core nodes out on a line ten units apart, places up to two decoys
/// one unit on either side of their parent, and uses a unit ℓ∞ budget.
fn assemble(
    gamma: f64,
    mut nodes: Vec<Node>,
    decoys: Vec<(usize, Vec<f64>)>,
) -> (FiniteMdp, Policy, NeighborhoodModel) {
    let num_actions = nodes[0].rewards.len();
    let core = nodes.len();
    let mut features: Vec<Vec<f64>> = (0..core).map(|i| vec![10.0 * i as f64]).collect();
    let mut per_parent = vec![0usize; core];
    for (parent, row) in decoys {
        let offset = [-1.0, 1.0][per_parent[parent]];
        per_parent[parent] += 1;
        features.push(vec![10.0 * parent as f64 + offset]);
        let mut decoy = terminal(&format!("{}~{}", nodes[parent].label, per_parent[parent]), num_actions);
        decoy.row = row;
        nodes.push(decoy);
    }
    let n = nodes.len();
    let transitions = nodes
        .iter()
        .enumerate()
        .map(|(s, nd)| match &nd.next {
            Some(next) => next.iter().map(|&t| one_hot(t, n)).collect(),
            None => vec![one_hot(s, n); num_actions],
        })
        .collect();
    let rewards = nodes.iter().map(|nd| nd.rewards.clone()).collect();
    let mdp = FiniteMdp::new(gamma, rewards, transitions)
        .and_then(|m| m.with_features(features))
        .and_then(|m| m.with_labels(nodes.iter().map(|nd| nd.label.clone()).collect()))
        .and_then(|m| m.with_start_state(0))
        .expect("fixture MDP is valid");
    let pi = Policy::new(nodes.into_iter().map(|nd| nd.row).collect()).expect("fixture rows are distributions");
    let model = build_neighborhoods(&mdp, 1.0, Norm::Linf).expect("fixture has features");
    (mdp, pi, model)
}

/// Two-step instance: the first state either continues to a second state or
/// stops with a fixed reward; the second state chooses between two rewards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoStepParams {
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

pub const TWO_STEP: TwoStepParams =
    TwoStepParams { gamma: 0.9, beta1: 0.3, beta2: 0.6, eps1: 0.2, eps2: 0.2, r1: 1.0, r2: 0.0, r3: 0.45 };

fn kl2(p: f64, q: f64) -> f64 {
    crate::heuristic::divergence(crate::heuristic::Divergence::Kl, &[p, 1.0 - p], &[q, 1.0 - q])
}

impl TwoStepParams {
    pub fn constraints(&self) -> Vec<Constraint> {
        let TwoStepParams { gamma, beta1, beta2, eps1, eps2, r1, r2, r3 } = *self;
        vec![
            Constraint::new("continue reward beats the alternative: r1 - r2", r1 - r2),
            Constraint::new(
                "continuing is the best first action: gamma*(beta2*r1 + (1-beta2)*r2) - r3",
                gamma * (beta2 * r1 + (1.0 - beta2) * r2) - r3,
            ),
            Constraint::new(
                "stopping beats a suppressed second step: r3 - gamma*((beta2-eps2)*r1 + (1-beta2+eps2)*r2)",
                r3 - gamma * ((beta2 - eps2) * r1 + (1.0 - beta2 + eps2) * r2),
            ),
            Constraint::new("first row stays inside the simplex: beta1 - eps1", beta1 - eps1),
            Constraint::new("first row stays inside the simplex: 1 - beta1 - eps1", 1.0 - beta1 - eps1),
            Constraint::new("second row stays inside the simplex: beta2 - eps2", beta2 - eps2),
            Constraint::new("second row stays inside the simplex: 1 - beta2 - eps2", 1.0 - beta2 - eps2),
        ]
    }

    /// Extra condition under which the KL maximizer at the first state lowers
    /// the continue probability.
    pub fn divergence_constraint(&self) -> Constraint {
        Constraint::new(
            "KL prefers lowering the continue probability at the first state",
            kl2(self.beta1 - self.eps1, self.beta1) - kl2(self.beta1 + self.eps1, self.beta1),
        )
    }

    fn build(&self) -> (FiniteMdp, Policy, NeighborhoodModel) {
        let p = self;
        let nodes = vec![
            node("s1", vec![0.0, p.r3], vec![1, 2], vec![p.beta1, 1.0 - p.beta1]),
            node("s2", vec![p.r1, p.r2], vec![2, 2], vec![p.beta2, 1.0 - p.beta2]),
            terminal("end", 2),
        ];
        let decoys = vec![
            (0, vec![p.beta1 + p.eps1, 1.0 - p.beta1 - p.eps1]),
            (0, vec![p.beta1 - p.eps1, 1.0 - p.beta1 + p.eps1]),
            (1, vec![p.beta2 + p.eps2, 1.0 - p.beta2 - p.eps2]),
            (1, vec![p.beta2 - p.eps2, 1.0 - p.beta2 + p.eps2]),
        ];
        assemble(p.gamma, nodes, decoys)
    }

    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("gamma", self.gamma),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("r3", self.r3),
        ]
    }

    /// Closed-form gap between the suppress-everything adversary and the
    /// optimum at the first state.
    pub fn minbest_gap(&self) -> f64 {
        let p = self;
        2.0 * p.eps1 * (p.r3 - p.gamma * ((p.beta2 - p.eps2) * p.r1 + (1.0 - p.beta2 + p.eps2) * p.r2))
    }
}

/// Branching instance: a root chooses between two subtrees, each ending in
/// two rewarded leaves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchParams {
    pub gamma: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
}

pub const BRANCH: BranchParams = BranchParams {
    gamma: 0.9,
    beta0: 0.5,
    beta1: 0.5,
    beta2: 0.5,
    eps0: 0.2,
    eps1: 0.2,
    eps2: 0.2,
    r1: 1.0,
    r2: -1.0,
    r3: -0.1,
    r4: -0.3,
};

impl BranchParams {
    pub fn constraints(&self) -> Vec<Constraint> {
        let p = *self;
        let mut out = vec![
            Constraint::new(
                "left subtree is better for the victim: beta1*r1 + (1-beta1)*r2 - beta2*r3 - (1-beta2)*r4",
                p.beta1 * p.r1 + (1.0 - p.beta1) * p.r2 - p.beta2 * p.r3 - (1.0 - p.beta2) * p.r4,
            ),
            Constraint::new("left leaves are ordered: r1 - r2", p.r1 - p.r2),
            Constraint::new("right leaves are ordered: r3 - r4", p.r3 - p.r4),
            Constraint::new(
                "attacked left subtree is worse than attacked right subtree: \
                 (beta2-eps2)*r3 + (1-beta2+eps2)*r4 - (beta1-eps1)*r1 - (1-beta1+eps1)*r2",
                (p.beta2 - p.eps2) * p.r3 + (1.0 - p.beta2 + p.eps2) * p.r4
                    - (p.beta1 - p.eps1) * p.r1
                    - (1.0 - p.beta1 + p.eps1) * p.r2,
            ),
        ];
        for (name, beta, eps) in [("root", p.beta0, p.eps0), ("left", p.beta1, p.eps1), ("right", p.beta2, p.eps2)] {
            out.push(Constraint::new(&format!("{name} row stays inside the simplex: beta - eps"), beta - eps));
            out.push(Constraint::new(
                &format!("{name} row stays inside the simplex: 1 - beta - eps"),
                1.0 - beta - eps,
            ));
        }
        out
    }

    fn build(&self) -> (FiniteMdp, Policy, NeighborhoodModel) {
        let p = self;
        let row = |b: f64| vec![b, 1.0 - b];
        let nodes = vec![
            node("s0", vec![0.0, 0.0], vec![1, 2], row(p.beta0)),
            node("s1", vec![p.r1, p.r2], vec![3, 4], row(p.beta1)),
            node("s2", vec![p.r3, p.r4], vec![5, 6], row(p.beta2)),
            terminal("s11", 2),
            terminal("s12", 2),
            terminal("s21", 2),
            terminal("s22", 2),
        ];
        let decoys = vec![
            (0, row(p.beta0 + p.eps0)),
            (0, row(p.beta0 - p.eps0)),
            (1, row(p.beta1 + p.eps1)),
            (1, row(p.beta1 - p.eps1)),
            (2, row(p.beta2 + p.eps2)),
            (2, row(p.beta2 - p.eps2)),
        ];
        assemble(p.gamma, nodes, decoys)
    }

    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("gamma", self.gamma),
            ("beta0", self.beta0),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps0", self.eps0),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("r3", self.r3),
            ("r4", self.r4),
        ]
    }

    /// Closed-form gap at the root between the attack that shifts the root
    /// toward the right subtree and the optimum.
    pub fn root_gap(&self) -> f64 {
        let p = self;
        let left = (p.beta1 - p.eps1) * p.r1 + (1.0 - p.beta1 + p.eps1) * p.r2;
        let right = (p.beta2 - p.eps2) * p.r3 + (1.0 - p.beta2 + p.eps2) * p.r4;
        p.gamma * 2.0 * p.eps0 * (right - left)
    }
}

/// One state with three terminal actions of decreasing reward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThreeArmParams {
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

pub const THREE_ARM: ThreeArmParams =
    ThreeArmParams { gamma: 0.9, beta1: 0.3, beta2: 0.3, eps: 0.1, r1: 1.0, r2: 0.2, r3: -0.5 };

impl ThreeArmParams {
    pub fn constraints(&self) -> Vec<Constraint> {
        let p = *self;
        vec![
            Constraint::new("r1 - r2", p.r1 - p.r2),
            Constraint::new("r2 - r3", p.r2 - p.r3),
            Constraint::new("beta1 - eps", p.beta1 - p.eps),
            Constraint::new("beta2 - eps", p.beta2 - p.eps),
            Constraint::new("1 - beta1 - beta2", 1.0 - p.beta1 - p.beta2),
        ]
    }

    fn build(&self) -> (FiniteMdp, Policy, NeighborhoodModel) {
        let p = self;
        let rest = 1.0 - p.beta1 - p.beta2;
        let nodes = vec![
            node("s0", vec![p.r1, p.r2, p.r3], vec![1, 2, 3], vec![p.beta1, p.beta2, rest]),
            terminal("t1", 3),
            terminal("t2", 3),
            terminal("t3", 3),
        ];
        let decoys =
            vec![(0, vec![p.beta1, p.beta2 - p.eps, rest + p.eps]), (0, vec![p.beta1 - p.eps, p.beta2, rest + p.eps])];
        assemble(p.gamma, nodes, decoys)
    }

    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("gamma", self.gamma),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps", self.eps),
            ("r1", self.r1),
            ("r2", self.r2),
            ("r3", self.r3),
        ]
    }

    /// Value difference between the two tied solutions.
    pub fn tie_gap(&self) -> f64 {
        self.eps * (self.r1 - self.r2)
    }
}

pub fn minbest_fixture_from(p: &TwoStepParams) -> Fixture {
    let (mdp, pi, model) = p.build();
    Fixture {
        name: "minbest",
        mdp,
        pi,
        model,
        attack: HeuristicKind::MIN_BEST,
        start_state: 0,
        claim: "suppressing the best action everywhere is not an optimal adversary",
        constants: p.constants(),
        constraints: p.constraints(),
    }
}

pub fn minbest_fixture() -> Fixture {
    minbest_fixture_from(&TWO_STEP)
}

pub fn maxdiff_fixture() -> Fixture {
    let mut f = minbest_fixture();
    f.name = "maxdiff";
    f.attack = HeuristicKind::MAX_DIFF;
    f.claim = "maximizing the policy divergence is not an optimal adversary";
    f.constraints.push(TWO_STEP.divergence_constraint());
    f
}

pub fn maxworst_fixture_from(p: &BranchParams) -> Fixture {
    let (mdp, pi, model) = p.build();
    Fixture {
        name: "maxworst",
        mdp,
        pi,
        model,
        attack: HeuristicKind::MAX_WORST,
        start_state: 0,
        claim: "promoting the worst action under the victim's Q is not an optimal adversary",
        constants: p.constants(),
        constraints: p.constraints(),
    }
}

pub fn maxworst_fixture() -> Fixture {
    maxworst_fixture_from(&BRANCH)
}

pub fn minq_fixture() -> Fixture {
    let mut f = maxworst_fixture();
    f.name = "minq";
    f.attack = HeuristicKind::MinQ;
    f.claim = "minimizing the expected victim Q of a stochastic victim is not an optimal adversary";
    f
}

pub fn maxworst_tie_fixture_from(p: &ThreeArmParams) -> Fixture {
    let (mdp, pi, model) = p.build();
    Fixture {
        name: "maxworst_worst",
        mdp,
        pi,
        model,
        attack: HeuristicKind::MaxWorst { target: crate::heuristic::WorstTarget::WorstPolicyQ },
        start_state: 0,
        claim: "promoting the worst action under the worst policy's Q admits a non-optimal solution",
        constants: p.constants(),
        constraints: p.constraints(),
    }
}

pub fn maxworst_tie_fixture() -> Fixture {
    maxworst_tie_fixture_from(&THREE_ARM)
}

/// The four strict-gap counterexamples.
pub fn gap_fixtures() -> Vec<Fixture> {
    vec![minbest_fixture(), maxworst_fixture(), minq_fixture(), maxdiff_fixture()]
}

pub const CHAIN_STATES: usize = 20;
pub const CHAIN_RADIUS: f64 = 4.0;
pub const CHAIN_SEED: u64 = 2024;
pub const CHAIN_GAMMA: f64 = 0.9;

/// A line of states with left, stay and right moves, seeded rewards in
/// `[0, 1]`, and unit-spaced one-dimensional features.
pub fn chain_mdp() -> FiniteMdp {
    let n = CHAIN_STATES;
    let mut rng = ChaCha8Rng::seed_from_u64(CHAIN_SEED);
    let rewards = (0..n).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
    let transitions =
        (0..n).map(|s| [s.saturating_sub(1), s, (s + 1).min(n - 1)].iter().map(|&t| one_hot(t, n)).collect()).collect();
    FiniteMdp::new(CHAIN_GAMMA, rewards, transitions)
        .and_then(|m| m.with_features((0..n).map(|s| vec![s as f64]).collect()))
        .and_then(|m| m.with_labels((0..n).map(|s| format!("c{s}")).collect()))
        .expect("chain is valid")
}

/// The chain's deterministic optimal policy and its neighborhood model.
pub fn chain_instance() -> (FiniteMdp, Policy, NeighborhoodModel) {
    let mdp = chain_mdp();
    let pi = value_iteration(&mdp, Mode::Max).expect("solvable").0;
    let model = build_neighborhoods(&mdp, CHAIN_RADIUS, Norm::Linf).expect("chain has features");
    (mdp, pi, model)
}

/// Named MDPs shipped with the tools.
pub const NAMES: [&str; 7] = ["m_ex", "minbest", "maxdiff", "maxworst", "minq", "maxworst_worst", "chain"];

/// The MDP and victim policy registered under `name`.
pub fn by_name(name: &str) -> Option<(FiniteMdp, Policy)> {
    let fixture = |f: Fixture| Some((f.mdp, f.pi));
    match name {
        "m_ex" => Some((m_ex_mdp(), m_ex_policy())),
        "minbest" => fixture(minbest_fixture()),
        "maxdiff" => fixture(maxdiff_fixture()),
        "maxworst" => fixture(maxworst_fixture()),
        "minq" => fixture(minq_fixture()),
        "maxworst_worst" => fixture(maxworst_tie_fixture()),
        "chain" => {
            let (mdp, pi, _) = chain_instance();
            Some((mdp, pi))
        }
        _ => None,
    }
}
