//! Multi-agent tabular Q-learning on a gridworld with one broken agent:
//! fakeness voting, majority vote, and lambda-reweighting.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::CombinationWeights;

pub const N_ACTIONS: usize = 4;

#[derive(Debug, Error)]
pub enum MarlError {
    #[error("invalid grid layout: {0}")]
    InvalidLayout(String),
    #[error("cannot step a terminal state ({0})")]
    TerminalState(usize),
    #[error("invalid learning parameters: {0}")]
    InvalidParams(String),
    #[error("Q-table shape mismatch: {0} vs {1} states")]
    ShapeMismatch(usize, usize),
    #[error("detected agent {0} is not in the neighborhood")]
    DetectedOutsideNeighborhood(usize),
    #[error("cannot redistribute weight with fewer than 2 neighbors")]
    NeighborhoodTooSmall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Left,
    Down,
    Right,
    Up,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [Action::Left, Action::Down, Action::Right, Action::Up];

    pub fn index(self) -> usize {
        match self {
            Action::Left => 0,
            Action::Down => 1,
            Action::Right => 2,
            Action::Up => 3,
        }
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Start,
    Frozen,
    Hole,
    Goal,
}

impl Cell {
    pub fn is_terminal(self) -> bool {
        matches!(self, Cell::Hole | Cell::Goal)
    }
}

/// Frozen-lake style gridworld. Deterministic transitions by default, with a
/// slippery flag for the stochastic variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWorld {
    pub width: usize,
    pub height: usize,
    cells: Vec<Cell>,
    starts: Vec<usize>,
    pub slippery: bool,
}

pub const STANDARD_8X8: &str = "\
SFFFFFFF
FFFFFFFF
FFFHFFFF
FFFFFHFF
FFFHFFFF
FHHFFFHF
FHFFHFHF
FFFHFFFG";

/// The standard layout with two extra safe start cells so three agents can
/// begin in different places.
pub const MULTI_START_8X8: &str = "\
SFFFSFFF
FFFFFFFF
FFFHFFFF
FFFFFHFF
SFFHFFFF
FHHFFFHF
FHFFHFHF
FFFHFFFG";

impl GridWorld {
    /// Parses a layout: one line per row, `S` start, `F` frozen, `H` hole,
    /// `G` goal. Exactly one goal; at least one start.
    pub fn from_text(text: &str) -> Result<Self, MarlError> {
        let mut cells = Vec::new();
        let mut starts = Vec::new();
        let mut width = None;
        let mut height = 0;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match width {
                None => width = Some(line.len()),
                Some(w) if w != line.len() => {
                    return Err(MarlError::InvalidLayout(format!(
                        "row {height} has {} cells, expected {w}",
                        line.len()
                    )))
                }
                _ => {}
            }
            for ch in line.chars() {
                let cell = match ch {
                    'S' => {
                        starts.push(cells.len());
                        Cell::Start
                    }
                    'F' => Cell::Frozen,
                    'H' => Cell::Hole,
                    'G' => Cell::Goal,
                    other => {
                        return Err(MarlError::InvalidLayout(format!(
                            "unknown cell character '{other}'"
                        )))
                    }
                };
                cells.push(cell);
            }
            height += 1;
        }
        let width = width.ok_or_else(|| MarlError::InvalidLayout("empty layout".into()))?;
        let goals = cells.iter().filter(|c| **c == Cell::Goal).count();
        if goals != 1 {
            return Err(MarlError::InvalidLayout(format!(
                "expected exactly one goal cell, found {goals}"
            )));
        }
        if starts.is_empty() {
            return Err(MarlError::InvalidLayout("no start cell".into()));
        }
        Ok(Self {
            width,
            height,
            cells,
            starts,
            slippery: false,
        })
    }

    pub fn standard_8x8() -> Self {
        Self::from_text(STANDARD_8X8).expect("builtin layout")
    }

    pub fn multi_start_8x8() -> Self {
        Self::from_text(MULTI_START_8X8).expect("builtin layout")
    }

    pub fn n_states(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, state: usize) -> Cell {
        self.cells[state]
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Start cell for agent `i`; agents cycle through the listed start cells.
    pub fn start_for(&self, agent: usize) -> usize {
        self.starts[agent % self.starts.len()]
    }

    fn shifted(&self, state: usize, action: Action) -> usize {
        let (row, col) = (state / self.width, state % self.width);
        let (row, col) = match action {
            Action::Left => (row, col.saturating_sub(1)),
            Action::Down => ((row + 1).min(self.height - 1), col),
            Action::Right => (row, (col + 1).min(self.width - 1)),
            Action::Up => (row.saturating_sub(1), col),
        };
        row * self.width + col
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: usize,
    pub reward: f64,
    pub done: bool,
}

/// Deterministic transition: move clipped at walls, reward 1 on entering the
/// goal, done on goal or hole.
pub fn env_step(world: &GridWorld, state: usize, action: Action) -> Result<Step, MarlError> {
    if world.cell(state).is_terminal() {
        return Err(MarlError::TerminalState(state));
    }
    let next = world.shifted(state, action);
    let cell = world.cell(next);
    Ok(Step {
        next,
        reward: if cell == Cell::Goal { 1.0 } else { 0.0 },
        done: cell.is_terminal(),
    })
}

/// Slippery transition: the intended action is taken with probability 1/3,
/// otherwise one of the two perpendicular moves.
pub fn env_step_slippery<R: Rng + ?Sized>(
    world: &GridWorld,
    state: usize,
    action: Action,
    rng: &mut R,
) -> Result<Step, MarlError> {
    let idx = action.index();
    let actual = match rng.random_range(0..3u8) {
        0 => Action::from_index((idx + 3) % 4),
        1 => action,
        _ => Action::from_index((idx + 1) % 4),
    };
    env_step(world, state, actual)
}

/// State-by-action value table with a derived greedy policy.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize) -> Self {
        Self {
            n_states,
            values: vec![0.0; n_states * N_ACTIONS],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn get(&self, state: usize, action: Action) -> f64 {
        self.values[state * N_ACTIONS + action.index()]
    }

    pub fn set(&mut self, state: usize, action: Action, value: f64) {
        self.values[state * N_ACTIONS + action.index()] = value;
    }

    pub fn max_q(&self, state: usize) -> f64 {
        let row = &self.values[state * N_ACTIONS..(state + 1) * N_ACTIONS];
        row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Per-state argmax with lowest-index tie-breaking.
    pub fn greedy(&self, state: usize) -> Action {
        let row = &self.values[state * N_ACTIONS..(state + 1) * N_ACTIONS];
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        Action::from_index(best)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub decay_rate: f64,
    pub max_steps: usize,
    pub n_episodes: usize,
}

impl LearningParams {
    pub fn validate(&self) -> Result<(), MarlError> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(MarlError::InvalidParams(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(MarlError::InvalidParams(format!(
                "discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        if !(0.0..=1.0).contains(&self.eps_min)
            || !(0.0..=1.0).contains(&self.eps_max)
            || self.eps_min > self.eps_max
        {
            return Err(MarlError::InvalidParams(format!(
                "need 0 <= eps_min <= eps_max <= 1, got {} and {}",
                self.eps_min, self.eps_max
            )));
        }
        if !(self.decay_rate > 0.0) {
            return Err(MarlError::InvalidParams(format!(
                "decay_rate must be > 0, got {}",
                self.decay_rate
            )));
        }
        if self.max_steps < 1 || self.n_episodes < 1 {
            return Err(MarlError::InvalidParams(
                "max_steps and n_episodes must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Exploration rate: `eps_min + (eps_max - eps_min) * exp(-step * decay)`.
pub fn epsilon(step: u64, params: &LearningParams) -> f64 {
    params.eps_min
        + (params.eps_max - params.eps_min) * (-(step as f64) * params.decay_rate).exp()
}

/// One tabular Q-learning update. A terminal successor contributes 0 to the
/// bootstrap term.
pub fn q_update(
    q: &mut QTable,
    state: usize,
    action: Action,
    reward: f64,
    next: Option<usize>,
    params: &LearningParams,
) {
    let bootstrap = next.map_or(0.0, |s| q.max_q(s));
    let alpha = params.learning_rate;
    let target = reward + params.discount * bootstrap;
    let old = q.get(state, action);
    q.set(state, action, (1.0 - alpha) * old + alpha * target);
}

/// How a broken agent's neighbors aggregate Q-table differences when
/// nominating a fake candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceMode {
    /// Sum entry differences over the (state, action) pairs the evaluating
    /// agent visited in the current window.
    VisitedSum,
    /// Sum entry differences over the whole table.
    FullTableSum,
}

/// Which entries the periodic combination rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinationScope {
    /// Only the entries the combining agent visited in the closing window.
    VisitedEntries,
    /// Every table entry.
    FullTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VotingConfig {
    pub window: usize,
    pub lambda: f64,
    pub corruption_kappa: f64,
    pub divergence: DivergenceMode,
    pub scope: CombinationScope,
}

impl Default for VotingConfig {
    fn default() -> Self {
        Self {
            window: 10,
            lambda: 0.7,
            corruption_kappa: 10.0,
            divergence: DivergenceMode::VisitedSum,
            scope: CombinationScope::VisitedEntries,
        }
    }
}

impl VotingConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        if self.window < 1 {
            return Err(MarlError::InvalidParams("window must be >= 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(MarlError::InvalidParams(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.corruption_kappa >= 0.0) {
            return Err(MarlError::InvalidParams(format!(
                "corruption kappa must be >= 0, got {}",
                self.corruption_kappa
            )));
        }
        Ok(())
    }
}

/// The table a broken agent shares: the true table plus independent uniform
/// bias on `[0, kappa]` per entry. Its own learning is unaffected.
pub fn corrupt_shared_q<R: Rng + ?Sized>(q: &QTable, kappa: f64, rng: &mut R) -> QTable {
    let mut shared = q.clone();
    for v in shared.values_mut() {
        *v += kappa * rng.random::<f64>();
    }
    shared
}

/// Agent `i`'s local nomination: the neighbor whose shared table diverges
/// most upward from `own`, or `None` when no divergence is positive.
pub fn local_fake_candidate(
    own: &QTable,
    shared: &[(usize, &QTable)],
    visited: &[(usize, Action)],
    mode: DivergenceMode,
) -> Option<usize> {
    let mut pairs: Vec<(usize, Action)> = visited.to_vec();
    pairs.sort_unstable_by_key(|&(s, a)| (s, a.index()));
    pairs.dedup();

    let mut best: Option<(usize, f64)> = None;
    for &(id, table) in shared {
        let d = match mode {
            DivergenceMode::VisitedSum => pairs
                .iter()
                .map(|&(s, a)| table.get(s, a) - own.get(s, a))
                .sum::<f64>(),
            DivergenceMode::FullTableSum => table
                .values()
                .iter()
                .zip(own.values())
                .map(|(t, o)| t - o)
                .sum::<f64>(),
        };
        let better = match best {
            None => true,
            Some((_, bd)) => d > bd,
        };
        if better {
            best = Some((id, d));
        }
    }
    best.and_then(|(id, d)| (d > 0.0).then_some(id))
}

/// Majority vote over nominations. The most-named agent is returned only if
/// its count strictly exceeds half the number of votes cast; ties yield
/// `None`.
pub fn tally_votes(votes: &[Option<usize>]) -> Option<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for id in votes.iter().flatten() {
        *counts.entry(*id).or_insert(0usize) += 1;
    }
    let max = counts.values().cloned().max()?;
    let mut leaders = counts.iter().filter(|(_, &c)| c == max);
    let leader = *leaders.next().expect("max exists").0;
    if leaders.next().is_some() {
        return None;
    }
    (2 * max > votes.len()).then_some(leader)
}

/// Weight vector over `neighbor_ids`: the detected agent gets `(1-lambda)/n`,
/// everyone else `(1 + lambda/(n-1))/n`; uniform when nothing was detected.
pub fn adjust_weights(
    neighbor_ids: &[usize],
    detected: Option<usize>,
    lambda: f64,
) -> Result<CombinationWeights, MarlError> {
    let n = neighbor_ids.len();
    match detected {
        None => {
            let w = vec![1.0 / n as f64; n];
            Ok(CombinationWeights::new(w).expect("uniform weights are valid"))
        }
        Some(f) => {
            if !neighbor_ids.contains(&f) {
                return Err(MarlError::DetectedOutsideNeighborhood(f));
            }
            if n < 2 {
                return Err(MarlError::NeighborhoodTooSmall);
            }
            let nf = n as f64;
            let reduced = (1.0 - lambda) / nf;
            let boosted = (1.0 + lambda / (nf - 1.0)) / nf;
            let w = neighbor_ids
                .iter()
                .map(|&j| if j == f { reduced } else { boosted })
                .collect();
            Ok(CombinationWeights::new(w).expect("weights sum to 1"))
        }
    }
}

/// Entrywise convex combination of aligned Q-tables.
pub fn combine_q(tables: &[&QTable], weights: &CombinationWeights) -> Result<QTable, MarlError> {
    assert_eq!(tables.len(), weights.len());
    let n_states = tables[0].n_states();
    for t in tables {
        if t.n_states() != n_states {
            return Err(MarlError::ShapeMismatch(n_states, t.n_states()));
        }
    }
    let mut out = QTable::zeros(n_states);
    for (w, table) in weights.as_slice().iter().zip(tables) {
        for (o, &v) in out.values_mut().iter_mut().zip(table.values()) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Convex combination applied only at `entries`; all other entries keep the
/// values of `base`.
pub fn combine_q_at(
    base: &QTable,
    tables: &[&QTable],
    weights: &CombinationWeights,
    entries: &[(usize, Action)],
) -> Result<QTable, MarlError> {
    assert_eq!(tables.len(), weights.len());
    for t in tables {
        if t.n_states() != base.n_states() {
            return Err(MarlError::ShapeMismatch(base.n_states(), t.n_states()));
        }
    }
    let mut out = base.clone();
    for &(s, a) in entries {
        let mixed: f64 = weights
            .as_slice()
            .iter()
            .zip(tables)
            .map(|(w, t)| w * t.get(s, a))
            .sum();
        out.set(s, a, mixed);
    }
    Ok(out)
}

/// One voting round's outcome during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteRecord {
    /// Minimum per-agent episode count when the vote closed.
    pub min_episode: usize,
    pub detected: Option<usize>,
    pub correct: bool,
}

/// Result of one multi-agent training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// Fraction of evaluation episodes in which any intact agent's greedy
    /// rollout reached the goal.
    pub success_rate: f64,
    pub votes: Vec<VoteRecord>,
}

impl RunStats {
    /// Fraction of voting rounds closing after `warmup_episodes` that named
    /// the broken agent. `None` when no such round exists.
    pub fn detection_accuracy(&self, warmup_episodes: usize) -> Option<f64> {
        let post: Vec<&VoteRecord> = self
            .votes
            .iter()
            .filter(|v| v.min_episode > warmup_episodes)
            .collect();
        if post.is_empty() {
            return None;
        }
        Some(post.iter().filter(|v| v.correct).count() as f64 / post.len() as f64)
    }
}

struct AgentState {
    q: QTable,
    state: usize,
    episode: usize,
    steps_in_episode: usize,
    window_visits: Vec<(usize, Action)>,
}

fn pick_action<R: Rng + ?Sized>(
    q: &QTable,
    state: usize,
    eps: f64,
    rng: &mut R,
) -> Action {
    if rng.random::<f64>() < eps {
        Action::from_index(rng.random_range(0..N_ACTIONS))
    } else {
        q.greedy(state)
    }
}

fn greedy_rollout(world: &GridWorld, q: &QTable, start: usize, max_steps: usize) -> bool {
    let mut state = start;
    let mut seen = vec![false; world.n_states()];
    for _ in 0..max_steps {
        if seen[state] {
            // Deterministic policy in a deterministic world: a revisited
            // state means a cycle that never reaches the goal.
            return false;
        }
        seen[state] = true;
        let step = env_step(world, state, q.greedy(state)).expect("non-terminal");
        if step.done {
            return world.cell(step.next) == Cell::Goal;
        }
        state = step.next;
    }
    false
}

fn greedy_rollout_slippery<R: Rng + ?Sized>(
    world: &GridWorld,
    q: &QTable,
    start: usize,
    max_steps: usize,
    rng: &mut R,
) -> bool {
    let mut state = start;
    for _ in 0..max_steps {
        let step = env_step_slippery(world, state, q.greedy(state), rng).expect("non-terminal");
        if step.done {
            return world.cell(step.next) == Cell::Goal;
        }
        state = step.next;
    }
    false
}

/// Plain single-agent tabular Q-learning; baseline without any sharing.
pub fn train_single(
    world: &GridWorld,
    params: &LearningParams,
    seed: u64,
) -> Result<QTable, MarlError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QTable::zeros(world.n_states());
    let start = world.start_for(0);
    for _episode in 0..params.n_episodes {
        let mut state = start;
        for t in 0..params.max_steps {
            // Exploration is keyed on the step index inside the episode, so
            // every episode starts exploratory and settles toward greedy.
            let eps = epsilon(t as u64, params);
            let action = pick_action(&q, state, eps, &mut rng);
            let step = if world.slippery {
                env_step_slippery(world, state, action, &mut rng)?
            } else {
                env_step(world, state, action)?
            };
            q_update(
                &mut q,
                state,
                action,
                step.reward,
                (!step.done).then_some(step.next),
                params,
            );
            if step.done {
                break;
            }
            state = step.next;
        }
    }
    Ok(q)
}

/// Trains `n_agents` cooperating Q-learners with one broken agent, running
/// the voting and combination pipeline every `window` global steps, then
/// evaluates the final greedy policies.
///
/// Success counts an evaluation episode in which any intact agent reaches the
/// goal within `max_steps`.
#[allow(clippy::too_many_arguments)]
pub fn run_marl(
    world: &GridWorld,
    params: &LearningParams,
    voting: &VotingConfig,
    n_agents: usize,
    broken: usize,
    detection: bool,
    eval_episodes: usize,
    seed: u64,
) -> Result<RunStats, MarlError> {
    params.validate()?;
    voting.validate()?;
    if n_agents < 2 {
        return Err(MarlError::InvalidParams("n_agents must be >= 2".into()));
    }
    if broken >= n_agents {
        return Err(MarlError::InvalidParams(format!(
            "broken agent id {broken} out of range for {n_agents} agents"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents: Vec<AgentState> = (0..n_agents)
        .map(|i| AgentState {
            q: QTable::zeros(world.n_states()),
            state: world.start_for(i),
            episode: 0,
            steps_in_episode: 0,
            window_visits: Vec::new(),
        })
        .collect();
    let neighbor_ids: Vec<usize> = (0..n_agents).collect();
    // Persistent trust over the fully connected neighborhood. Every detection
    // scales the detected agent's weight by (1 - lambda) and redistributes
    // the freed mass, so repeated detections drive it toward zero; the first
    // detection from uniform reproduces the one-shot adjust_weights vector.
    let mut trust = vec![1.0 / n_agents as f64; n_agents];
    let mut votes_log = Vec::new();
    let mut global_step = 0usize;

    while agents.iter().map(|a| a.episode).min().unwrap() < params.n_episodes {
        // One synchronous step for every agent, in index order.
        for (i, agent) in agents.iter_mut().enumerate() {
            let eps = epsilon(agent.steps_in_episode as u64, params);
            let action = pick_action(&agent.q, agent.state, eps, &mut rng);
            let step = if world.slippery {
                env_step_slippery(world, agent.state, action, &mut rng)?
            } else {
                env_step(world, agent.state, action)?
            };
            q_update(
                &mut agent.q,
                agent.state,
                action,
                step.reward,
                (!step.done).then_some(step.next),
                params,
            );
            agent.window_visits.push((agent.state, action));
            agent.steps_in_episode += 1;
            if step.done || agent.steps_in_episode >= params.max_steps {
                agent.state = world.start_for(i);
                agent.steps_in_episode = 0;
                agent.episode += 1;
            } else {
                agent.state = step.next;
            }
        }
        global_step += 1;

        if global_step % voting.window != 0 {
            continue;
        }

        // Window closed: build shared tables. The broken agent broadcasts one
        // corrupted copy; honest agents share their true tables.
        let corrupted = corrupt_shared_q(&agents[broken].q, voting.corruption_kappa, &mut rng);
        let shared_of = |j: usize| -> &QTable {
            if j == broken {
                &corrupted
            } else {
                &agents[j].q
            }
        };

        let detected = if detection {
            let votes: Vec<Option<usize>> = (0..n_agents)
                .map(|i| {
                    let others: Vec<(usize, &QTable)> = (0..n_agents)
                        .filter(|&j| j != i)
                        .map(|j| (j, shared_of(j)))
                        .collect();
                    local_fake_candidate(
                        &agents[i].q,
                        &others,
                        &agents[i].window_visits,
                        voting.divergence,
                    )
                })
                .collect();
            // Fully connected network: every agent sees the same vote
            // multiset, so the majority outcome is shared.
            let outcome = tally_votes(&votes);
            votes_log.push(VoteRecord {
                min_episode: agents.iter().map(|a| a.episode).min().unwrap(),
                detected: outcome,
                correct: outcome == Some(broken),
            });
            outcome
        } else {
            None
        };

        if let Some(d) = detected {
            if !neighbor_ids.contains(&d) {
                return Err(MarlError::DetectedOutsideNeighborhood(d));
            }
            let freed = voting.lambda * trust[d];
            trust[d] -= freed;
            let share = freed / (n_agents - 1) as f64;
            for (j, w) in trust.iter_mut().enumerate() {
                if j != d {
                    *w += share;
                }
            }
        }
        let weights = CombinationWeights::new(trust.clone())
            .map_err(|e| MarlError::InvalidParams(e.to_string()))?;
        // Synchronous barrier: all combinations read the pre-round tables.
        let mut new_tables = Vec::with_capacity(n_agents);
        for i in 0..n_agents {
            let tables: Vec<&QTable> = (0..n_agents)
                .map(|j| if j == i { &agents[i].q } else { shared_of(j) })
                .collect();
            let combined = match voting.scope {
                CombinationScope::VisitedEntries => {
                    combine_q_at(&agents[i].q, &tables, &weights, &agents[i].window_visits)?
                }
                CombinationScope::FullTable => combine_q(&tables, &weights)?,
            };
            new_tables.push(combined);
        }
        for (agent, q) in agents.iter_mut().zip(new_tables) {
            agent.q = q;
            agent.window_visits.clear();
        }
    }

    // Evaluation: greedy rollouts of the final policies.
    let mut successes = 0usize;
    for _ in 0..eval_episodes {
        let mut any = false;
        for (i, agent) in agents.iter().enumerate() {
            if i == broken {
                continue;
            }
            let ok = if world.slippery {
                greedy_rollout_slippery(
                    world,
                    &agent.q,
                    world.start_for(i),
                    params.max_steps,
                    &mut rng,
                )
            } else {
                greedy_rollout(world, &agent.q, world.start_for(i), params.max_steps)
            };
            if ok {
                any = true;
            }
        }
        if any {
            successes += 1;
        }
    }

    Ok(RunStats {
        success_rate: successes as f64 / eval_episodes as f64,
        votes: votes_log,
    })
}
