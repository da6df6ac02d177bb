// SPDX-License-Identifier: Apache-2.0

//! Constructs an execution in which no process ever decides.
//!
//! The construction starts from a bivalent initialization found on the input
//! ladder, then cycles through the processes. On `P_i`'s turn the current
//! state is extended to one that is bivalent without `P_i`'s help (a full
//! i-fork), `P_i` takes one step, and the fork is carried across that step by
//! commutativity. Two interchangeable extension procedures are provided: a
//! backward walk along the opposite-valued branch, and repeated fork
//! modification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    apply_action, first_decision, is_undecided, replay, run_schedule, Action, Bit, Exec,
    Execution, InitVector, ModelError, ProcessId, ProcessSet, Schedule, State, StateDigest,
};
use crate::oracle::{
    certify_bivalent, wt_excluding, Fork, ForkOf, SearchBudget, SearchError, Valence, Witness,
};
use crate::protocols::{make_initial, Protocol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Search(#[from] SearchError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("not responsive: uniform {value} input excluding {excluded} decided {got}")]
    NotResponsive {
        value: Bit,
        excluded: ProcessId,
        got: Bit,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("state reached at step {step} is not bivalent")]
    NotBivalent { step: usize },

    #[error("a process decided during step {step}")]
    Decided { step: usize },

    #[error("internal invariant broken: {0}")]
    Invariant(String),
}

pub type Result<T, E = AdversaryError> = std::result::Result<T, E>;

/// A bivalent initialization on the ladder `s_0 .. s_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BivalentInit<L, M> {
    pub state: crate::model::GlobalState<L, M>,
    pub init: InitVector,
    /// Least ladder index with a 1-deciding witness.
    pub k: usize,
    pub fork: Fork<L, M>,
    /// The 0-witness of `wt(s_{k-1}, Q_k)` replayed from `s_k`.
    pub zero_replay: Execution<L, M>,
    /// `ladder_values[j][i - 1]` is the value of `wt(s_j, Q_i)`, for `j <= k`.
    pub ladder_values: Vec<Vec<Bit>>,
}

pub type BivalentInitOf<P> = BivalentInit<<P as Protocol>::Local, <P as Protocol>::Payload>;

fn witness_row<P: Protocol>(
    p: &P,
    s: &State<P>,
    budget: SearchBudget,
) -> Result<Vec<Witness<P>>> {
    ProcessId::all(p.n())
        .map(|i| wt_excluding(p, s, i, budget).map_err(AdversaryError::from))
        .collect()
}

fn decision_value<P: Protocol>(p: &P, s: &State<P>) -> Option<Bit> {
    first_decision(p, s).map(|(_, v)| v)
}

/// Walks the ladder, evaluating every `wt(s_j, Q_i)` for one `j` before moving
/// to the next, and stops at the first initialization with a 1-deciding
/// witness.
pub fn find_bivalent_init<P: Protocol>(
    p: &P,
    budget: SearchBudget,
) -> Result<BivalentInitOf<P>> {
    let n = p.n();
    if n < 2 {
        return Err(AdversaryError::PreconditionViolated(format!(
            "need n > 1, got {n}"
        )));
    }
    let top = make_initial(p, &InitVector::ladder(n, n))?;
    let top_row = witness_row(p, &top, budget)?;
    if let Some((i, w)) = top_row.iter().enumerate().find(|(_, w)| w.value != Bit::One) {
        return Err(AdversaryError::NotResponsive {
            value: Bit::One,
            excluded: ProcessId::new(i + 1),
            got: w.value,
        });
    }

    let mut rows: Vec<Vec<Witness<P>>> = Vec::new();
    let mut states = Vec::new();
    let mut k = None;
    for j in 0..=n {
        let s = make_initial(p, &InitVector::ladder(n, j))?;
        let row = if j == n {
            top_row.clone()
        } else {
            witness_row(p, &s, budget)?
        };
        if j == 0 {
            if let Some((i, w)) = row.iter().enumerate().find(|(_, w)| w.value != Bit::Zero) {
                return Err(AdversaryError::NotResponsive {
                    value: Bit::Zero,
                    excluded: ProcessId::new(i + 1),
                    got: w.value,
                });
            }
        }
        let has_one = row.iter().any(|w| w.value == Bit::One);
        rows.push(row);
        states.push(s);
        if has_one {
            k = Some(j);
            break;
        }
    }
    let k = k.ok_or_else(|| AdversaryError::Invariant("ladder top never decided 1".into()))?;
    let s_k = states[k].clone();

    let zero = &rows[k - 1][k - 1];
    if zero.value != Bit::Zero {
        return Err(AdversaryError::Invariant(format!(
            "wt(s_{}, Q_{k}) decided {} below the first 1-deciding rung",
            k - 1,
            zero.value
        )));
    }
    let zero_replay = replay(p, zero.schedule(), &s_k)?;
    if decision_value(p, zero_replay.end()) != Some(Bit::Zero) {
        // Only possible when P_k's input alone fixes a decision, as in a
        // protocol that decides at initialization.
        return Err(AdversaryError::Invariant(format!(
            "replayed 0-witness did not decide 0 from s_{k}; process {k} is decided before taking a step"
        )));
    }

    let row_k = &rows[k];
    let one_branch = row_k
        .iter()
        .find(|w| w.value == Bit::One)
        .expect("row k has a 1-witness")
        .execution
        .clone();
    let zero_branch = row_k
        .iter()
        .find(|w| w.value == Bit::Zero)
        .map(|w| w.execution.clone())
        .unwrap_or_else(|| zero_replay.clone());

    Ok(BivalentInit {
        state: s_k,
        init: InitVector::ladder(n, k),
        k,
        fork: Fork::new(zero_branch, Bit::Zero, one_branch),
        zero_replay,
        ladder_values: rows
            .iter()
            .map(|r| r.iter().map(|w| w.value).collect())
            .collect(),
    })
}

/// One position visited by the backward walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkEntry {
    /// Index into `ProgramLog::alpha_one` states (the walk's `S'`).
    pub position: usize,
    /// `Q_i`-only schedule from that state to a state deciding `target`.
    pub path: Schedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkOutcome {
    /// `alpha_one` already avoided `P_i`; no walk was needed.
    AlreadyFull,
    /// Stopped before a step of another process; `b'` is the state at `position`.
    BeforeOtherStep { position: usize },
    /// Stopped across a step of `P_i`; the opposite witness was commuted past
    /// it and `b'` is the state at `position`.
    AfterExcludedStep { position: usize },
}

/// Record of one backward-walk run, auditable by
/// [`crate::verify::check_program_invariants`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramLog<L, M> {
    pub excluded: ProcessId,
    /// Value decided along `alpha_one`.
    pub target: Bit,
    pub alpha_one: Execution<L, M>,
    /// `wt(b, Q_i)`, which decides the opposite of `target`.
    pub opposite_witness: Schedule,
    pub walk: Vec<WalkEntry>,
    pub outcome: WalkOutcome,
}

pub type ProgramLogOf<P> = ProgramLog<<P as Protocol>::Local, <P as Protocol>::Payload>;

/// Result of a one-step extension: the path from `b` to `b'` and a full
/// i-fork at `b'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension<L, M> {
    pub excluded: ProcessId,
    pub path: Execution<L, M>,
    pub fork: Fork<L, M>,
    /// Fork modifications applied (fork variant only).
    pub modifications: usize,
    pub log: Option<ProgramLog<L, M>>,
    /// States inserted by all searches made.
    pub visited: usize,
}

pub type ExtensionOf<P> = Extension<<P as Protocol>::Local, <P as Protocol>::Payload>;

impl<L: Clone, M: Clone> Extension<L, M> {
    pub fn state(&self) -> &crate::model::GlobalState<L, M> {
        self.path.end()
    }
}

fn check_fork<P: Protocol>(b: &State<P>, fork: &ForkOf<P>) -> Result<()> {
    if fork.alpha.start() != b || fork.beta.start() != b {
        return Err(AdversaryError::PreconditionViolated(
            "fork does not start at the given state".into(),
        ));
    }
    Ok(())
}

/// The backward walk along the branch that opposes `wt(b, Q_i)`.
///
/// Let `w` be the value of that branch and `S_0 = b, ..., S_L` its states. The
/// walk keeps a `Q_i` path from the current position to a `w` decision and
/// tests `wt(S_{j-1}, Q_i)` one step back at a time. A `w` result moves the
/// walk back: across a step of another process the stored path is extended by
/// that step, across a step of `P_i` it is replaced by the witness. The first
/// opposite result stops the walk. Since `wt(S_0, Q_i)` opposes `w` by
/// construction, the walk stops by `j = 1` at the latest.
pub fn one_step_extend_program<P: Protocol>(
    p: &P,
    b: &State<P>,
    fork: &ForkOf<P>,
    i: ProcessId,
    budget: SearchBudget,
) -> Result<ExtensionOf<P>> {
    check_fork::<P>(b, fork)?;
    let gamma = wt_excluding(p, b, i, budget)?;
    let mut visited = gamma.visited;
    let target = gamma.value.flip();
    let alpha_one = fork.branch(target).clone();

    let mut log = ProgramLog {
        excluded: i,
        target,
        alpha_one: alpha_one.clone(),
        opposite_witness: gamma.schedule().clone(),
        walk: Vec::new(),
        outcome: WalkOutcome::AlreadyFull,
    };

    if alpha_one.actions().avoids(i) {
        return Ok(Extension {
            excluded: i,
            path: Execution::empty(b.clone()),
            fork: Fork::new(alpha_one, target, gamma.execution),
            modifications: 0,
            log: Some(log),
            visited,
        });
    }

    let len = alpha_one.len();
    let mut path = Schedule::default();
    log.walk.push(WalkEntry {
        position: len,
        path: path.clone(),
    });
    for j in (1..=len).rev() {
        let step = alpha_one.actions().actions()[j - 1];
        let before = &alpha_one.states()[j - 1];
        let delta = wt_excluding(p, before, i, budget)?;
        visited += delta.visited;
        if delta.value == target {
            path = if step.process() == i {
                delta.schedule().clone()
            } else {
                Schedule::new(vec![step]).then(&path)
            };
            log.walk.push(WalkEntry {
                position: j - 1,
                path: path.clone(),
            });
            continue;
        }

        let (position, opposite, towards) = if step.process() != i {
            // b' = S_{j-1}: the witness itself, and the step followed by the path.
            let towards = run_schedule(p, before, &Schedule::new(vec![step]).then(&path))?;
            log.outcome = WalkOutcome::BeforeOtherStep { position: j - 1 };
            (j - 1, delta.execution, towards)
        } else {
            // b' = S_j: carry the witness across P_i's step.
            let after = &alpha_one.states()[j];
            let carried = replay(p, delta.schedule(), after)?;
            if decision_value(p, carried.end()) != Some(delta.value) {
                return Err(ModelError::CommutationFailure(format!(
                    "witness {} changed its decision across {step}",
                    delta.schedule()
                ))
                .into());
            }
            let towards = run_schedule(p, after, &path)?;
            log.outcome = WalkOutcome::AfterExcludedStep { position: j };
            (j, carried, towards)
        };
        if decision_value(p, towards.end()) != Some(target) {
            return Err(AdversaryError::Invariant(format!(
                "stored path no longer decides {target}"
            )));
        }
        return Ok(Extension {
            excluded: i,
            path: alpha_one.prefix(position),
            fork: Fork::new(opposite, target.flip(), towards),
            modifications: 0,
            log: Some(log),
            visited,
        });
    }
    Err(AdversaryError::Invariant(
        "walk reached b without meeting wt(b, Q_i)".into(),
    ))
}

/// Outcome of one fork modification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForkModification<L, M> {
    /// A full i-fork at `s_m`, reached from the fork's origin by `prefix`.
    Full {
        prefix: Execution<L, M>,
        fork: Fork<L, M>,
    },
    /// An i-fork at the same origin with smaller `i_len`.
    Reduced(Fork<L, M>),
}

pub type ForkModificationOf<P> = ForkModification<<P as Protocol>::Local, <P as Protocol>::Payload>;

/// One fork modification step on an i-fork with `i_len > 0`.
///
/// With `alpha = delta . a_m . epsilon` where `a_m` is the last step of `P_i`,
/// compute `gamma = wt(s_{m-1}, Q_i)`. If `gamma` decides like `beta`, the pair
/// `(epsilon, gamma carried past a_m)` is a full i-fork at `s_m`. Otherwise
/// `(delta . gamma, beta)` is an i-fork at the origin with one fewer `P_i` step.
pub fn fork_modify<P: Protocol>(
    p: &P,
    fork: &ForkOf<P>,
    i: ProcessId,
    budget: SearchBudget,
) -> Result<(ForkModificationOf<P>, usize)> {
    if !fork.is_i_fork(i) {
        return Err(AdversaryError::PreconditionViolated(format!(
            "beta branch takes steps of {i}"
        )));
    }
    let actions = fork.alpha.actions().actions();
    let last = actions
        .iter()
        .rposition(|a| a.process() == i)
        .ok_or_else(|| {
            AdversaryError::PreconditionViolated(format!("fork is already a full {i}-fork"))
        })?;
    let before = &fork.alpha.states()[last];
    let gamma = wt_excluding(p, before, i, budget)?;

    if gamma.value == fork.beta_value() {
        let s_m = &fork.alpha.states()[last + 1];
        let carried = replay(p, gamma.schedule(), s_m)?;
        if decision_value(p, carried.end()) != Some(gamma.value) {
            return Err(ModelError::CommutationFailure(format!(
                "witness {} changed its decision across {}",
                gamma.schedule(),
                actions[last]
            ))
            .into());
        }
        let epsilon = fork.alpha.suffix(last + 1);
        Ok((
            ForkModification::Full {
                prefix: fork.alpha.prefix(last + 1),
                fork: Fork::new(epsilon, fork.alpha_value, carried),
            },
            gamma.visited,
        ))
    } else {
        let alpha = fork.alpha.prefix(last).concat(&gamma.execution);
        Ok((
            ForkModification::Reduced(Fork::new(alpha, fork.alpha_value, fork.beta.clone())),
            gamma.visited,
        ))
    }
}

/// Builds an i-fork from `wt(b, Q_i)` and the fork branch it opposes, then
/// applies [`fork_modify`] until the fork is full.
pub fn one_step_extend_fork<P: Protocol>(
    p: &P,
    b: &State<P>,
    fork: &ForkOf<P>,
    i: ProcessId,
    budget: SearchBudget,
) -> Result<ExtensionOf<P>> {
    check_fork::<P>(b, fork)?;
    let gamma = wt_excluding(p, b, i, budget)?;
    let mut visited = gamma.visited;
    let alpha_value = gamma.value.flip();
    let mut current = Fork::new(fork.branch(alpha_value).clone(), alpha_value, gamma.execution);
    let mut path = Execution::empty(b.clone());
    let mut modifications = 0;
    while current.i_len(i) > 0 {
        let (step, cost) = fork_modify(p, &current, i, budget)?;
        visited += cost;
        modifications += 1;
        match step {
            ForkModification::Full { prefix, fork } => {
                path = path.concat(&prefix);
                current = fork;
                break;
            }
            ForkModification::Reduced(fork) => current = fork,
        }
    }
    Ok(Extension {
        excluded: i,
        path,
        fork: current,
        modifications,
        log: None,
        visited,
    })
}

/// Which One Step construction the generator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Program,
    Fork,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Program => "program",
            Variant::Fork => "fork",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "program" => Ok(Variant::Program),
            "fork" => Ok(Variant::Fork),
            other => Err(format!("unknown variant {other:?}; expected program or fork")),
        }
    }
}

/// One generic extension call, dispatched on the variant.
pub fn one_step_extend<P: Protocol>(
    p: &P,
    variant: Variant,
    b: &State<P>,
    fork: &ForkOf<P>,
    i: ProcessId,
    budget: SearchBudget,
) -> Result<ExtensionOf<P>> {
    match variant {
        Variant::Program => one_step_extend_program(p, b, fork, i, budget),
        Variant::Fork => one_step_extend_fork(p, b, fork, i, budget),
    }
}

/// How the fork at the successor state was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForkMode {
    /// Both branches of the full i-fork replayed after `P_i`'s step.
    Commute,
    /// Two `wt(s, Q_j)` calls with opposite values.
    Witness,
    /// Unrestricted bivalence search.
    Search,
}

/// One round-robin turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step<L, M> {
    pub index: usize,
    pub process: ProcessId,
    /// `Q_i` path from the previous state to `b'`.
    pub extension: Schedule,
    /// The step `P_i` takes at `b'`.
    pub action: Action,
    pub state: crate::model::GlobalState<L, M>,
    pub digest: StateDigest,
    pub fork_mode: ForkMode,
}

pub type StepOf<P> = Step<<P as Protocol>::Local, <P as Protocol>::Payload>;

/// Snapshot of the generator between turns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversaryState<L, M> {
    pub round: usize,
    pub current: crate::model::GlobalState<L, M>,
    pub fork: Fork<L, M>,
    pub next_process: ProcessId,
    pub history: Vec<(Action, StateDigest)>,
}

/// Lazily generates the indecisive execution, one turn per call.
///
/// Owns its protocol; pass `&protocol` to borrow instead.
pub struct Adversary<P: Protocol> {
    p: P,
    budget: SearchBudget,
    variant: Variant,
    init: BivalentInitOf<P>,
    snapshot: AdversaryState<P::Local, P::Payload>,
    steps: Vec<StepOf<P>>,
    visited: usize,
}

impl<P: Protocol> Adversary<P> {
    pub fn new(p: P, budget: SearchBudget, variant: Variant) -> Result<Self> {
        let init = find_bivalent_init(&p, budget)?;
        Ok(Self::from_init(p, budget, variant, init))
    }

    pub fn from_init(
        p: P,
        budget: SearchBudget,
        variant: Variant,
        init: BivalentInitOf<P>,
    ) -> Self {
        let snapshot = AdversaryState {
            round: 0,
            current: init.state.clone(),
            fork: init.fork.clone(),
            next_process: ProcessId::new(1),
            history: Vec::new(),
        };
        Adversary {
            p,
            budget,
            variant,
            init,
            snapshot,
            steps: Vec::new(),
            visited: 0,
        }
    }

    pub fn protocol(&self) -> &P {
        &self.p
    }

    pub fn budget(&self) -> SearchBudget {
        self.budget
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn bivalent_init(&self) -> &BivalentInitOf<P> {
        &self.init
    }

    /// The state before step 0: `b_0`.
    pub fn initial_state(&self) -> &State<P> {
        &self.init.state
    }

    pub fn snapshot(&self) -> &AdversaryState<P::Local, P::Payload> {
        &self.snapshot
    }

    pub fn steps(&self) -> &[StepOf<P>] {
        &self.steps
    }

    /// States inserted by all searches so far.
    pub fn states_visited(&self) -> usize {
        self.visited
    }

    /// Generates turns until step `k` exists and returns it.
    pub fn nth_step(&mut self, k: usize) -> Result<&StepOf<P>> {
        while self.steps.len() <= k {
            self.next_step()?;
        }
        Ok(&self.steps[k])
    }

    pub fn next_step(&mut self) -> Result<&StepOf<P>> {
        let p = &self.p;
        let index = self.steps.len();
        let i = self.snapshot.next_process;
        let ext = one_step_extend(
            p,
            self.variant,
            &self.snapshot.current,
            &self.snapshot.fork,
            i,
            self.budget,
        )?;
        self.visited += ext.visited;
        if !ext.fork.is_full(i) {
            return Err(AdversaryError::Invariant(format!(
                "extension did not produce a full {i}-fork"
            )));
        }
        if ext.path.states().iter().any(|s| !is_undecided(p, s)) {
            return Err(AdversaryError::Decided { step: index });
        }

        let b_prime = ext.state();
        let mut only_i = ProcessSet::empty();
        only_i.insert(i);
        let action = b_prime.enabled_actions_in(only_i)[0];
        let next = apply_action(p, b_prime, action)?;
        if !is_undecided(p, &next) {
            return Err(AdversaryError::Decided { step: index });
        }
        let (fork, fork_mode, cost) = self.refork(&ext.fork, &next, index)?;
        self.visited += cost;

        let digest = next.digest();
        let n = p.n();
        self.snapshot.history.push((action, digest));
        self.snapshot.current = next.clone();
        self.snapshot.fork = fork;
        self.snapshot.next_process = ProcessId::new(i.index() % n + 1);
        if i.index() == n {
            self.snapshot.round += 1;
        }
        self.steps.push(Step {
            index,
            process: i,
            extension: ext.path.actions().clone(),
            action,
            state: next,
            digest,
            fork_mode,
        });
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Carries a full i-fork at `b'` across `P_i`'s step to `next`, falling
    /// back to witness calls and then to an unrestricted search.
    fn refork(
        &self,
        fork: &ForkOf<P>,
        next: &State<P>,
        index: usize,
    ) -> Result<(ForkOf<P>, ForkMode, usize)> {
        let p = &self.p;
        let carry = |branch: &Exec<P>, value: Bit| -> Option<Exec<P>> {
            let run = replay(p, branch.actions(), next).ok()?;
            (decision_value(p, run.end()) == Some(value)).then_some(run)
        };
        if let (Some(alpha), Some(beta)) = (
            carry(&fork.alpha, fork.alpha_value),
            carry(&fork.beta, fork.beta_value()),
        ) {
            return Ok((Fork::new(alpha, fork.alpha_value, beta), ForkMode::Commute, 0));
        }

        let mut cost = 0;
        let mut seen: [Option<Exec<P>>; 2] = [None, None];
        for j in ProcessId::all(p.n()) {
            if let Ok(w) = wt_excluding(p, next, j, self.budget) {
                cost += w.visited;
                seen[w.value.as_u8() as usize].get_or_insert(w.execution);
            }
        }
        if let [Some(zero), Some(one)] = seen {
            return Ok((Fork::new(zero, Bit::Zero, one), ForkMode::Witness, cost));
        }
        match certify_bivalent(p, next, self.budget)? {
            Valence::Bivalent(f) => Ok((f, ForkMode::Search, cost)),
            _ => Err(AdversaryError::NotBivalent { step: index }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::certify_bivalent_via;
    use crate::protocols::Builtin;

    fn uv3() -> Builtin {
        Builtin::from_name("uniform-vote", 3).unwrap()
    }

    #[test]
    fn bivalent_init_for_uniform_vote() {
        let p = uv3();
        let bi = find_bivalent_init(&p, SearchBudget::default()).unwrap();
        assert!(bi.k >= 1 && bi.k <= 3);
        assert_eq!(bi.state, make_initial(&p, &InitVector::ladder(3, bi.k)).unwrap());
        for row in &bi.ladder_values[..bi.k] {
            assert!(row.iter().all(|v| *v == Bit::Zero));
        }
        assert!(bi.ladder_values[bi.k].contains(&Bit::One));
        assert_eq!(decision_value(&p, bi.fork.alpha.end()), Some(Bit::Zero));
        assert_eq!(decision_value(&p, bi.fork.beta.end()), Some(Bit::One));
        assert!(bi.zero_replay.actions().avoids(ProcessId::new(bi.k)));
    }

    #[test]
    fn constant_protocol_is_refused() {
        // s_1 already has process 1 decided on 1, so the replayed 0-witness
        // of s_0 cannot decide 0 from it.
        let p = Builtin::from_name("constant", 3).unwrap();
        let err = find_bivalent_init(&p, SearchBudget::default()).unwrap_err();
        assert!(matches!(err, AdversaryError::Invariant(_)), "{err}");
    }

    #[test]
    fn fork_modify_rejects_full_forks() {
        let p = uv3();
        let b = SearchBudget::default();
        let bi = find_bivalent_init(&p, b).unwrap();
        let i = ProcessId::new(1);
        let gamma = wt_excluding(&p, &bi.state, i, b).unwrap();
        let full = Fork::new(gamma.execution.clone(), gamma.value, gamma.execution.clone());
        assert!(matches!(
            fork_modify(&p, &full, i, b),
            Err(AdversaryError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn both_variants_certify_for_every_process() {
        let p = uv3();
        let b = SearchBudget::default();
        let bi = find_bivalent_init(&p, b).unwrap();
        for variant in [Variant::Program, Variant::Fork] {
            for i in ProcessId::all(3) {
                let ext = one_step_extend(&p, variant, &bi.state, &bi.fork, i, b).unwrap();
                assert!(ext.fork.is_full(i));
                assert_eq!(ext.fork.origin, *ext.state());
                let v = certify_bivalent_via(&p, ext.state(), i, b.with_depth(16)).unwrap();
                assert!(v.fork().is_some(), "{variant} / {i}");
            }
        }
    }

    #[test]
    fn generator_is_round_robin_and_undecided() {
        let p = uv3();
        let mut adv = Adversary::new(&p, SearchBudget::default(), Variant::Program).unwrap();
        for k in 0..12 {
            let step = adv.nth_step(k).unwrap();
            assert_eq!(step.process.index(), k % 3 + 1);
            assert_eq!(step.action.process(), step.process);
            assert!(is_undecided(&p, &step.state));
        }
        assert_eq!(adv.snapshot().round, 4);
        assert_eq!(adv.snapshot().history.len(), 12);
    }

    #[test]
    fn variant_parses() {
        assert_eq!("fork".parse::<Variant>().unwrap(), Variant::Fork);
        assert!("magic".parse::<Variant>().is_err());
        assert_eq!(Variant::Program.to_string(), "program");
    }
}
