// SPDX-License-Identifier: Apache-2.0

//! Budgeted breadth-first searches over executions.
//!
//! The nonblocking witness `wt(s, Q)` is realized as a BFS restricted to the
//! actions of `Q`, expanding actions in canonical order and deduplicating
//! states structurally. The first deciding state inserted is therefore the
//! end of a shortest, canonically least witness. Every search answers in three
//! values: found, certified-absent (the reachable region was exhausted), or
//! unknown (the budget cut the search off).

use indexmap::IndexSet;
use thiserror::Error;

use crate::model::{
    apply_action, decided_map, first_decision, Action, Bit, Exec, Execution, GlobalState,
    InitVector, ModelError, ProcessId, ProcessSet, Schedule, State, StateDigest,
};
use crate::protocols::{make_initial, Protocol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("search exhausted after {visited} states ({})", if *frontier_empty { "closure explored, no decision" } else { "budget cut off" })]
    SearchExhausted { frontier_empty: bool, visited: usize },

    #[error("no verdict within budget after {visited} states (found: {found:?})")]
    Unknown { found: Option<Bit>, visited: usize },

    #[error("excluding process {excluded} blocks: the remaining processes can never decide")]
    Blocked { excluded: ProcessId },

    #[error("witness set {set} must have exactly {expected} members")]
    InvalidQuorum { set: ProcessSet, expected: usize },

    #[error("budget limits must be positive")]
    InvalidBudget,

    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SearchBudget {
    pub max_depth: usize,
    pub max_states: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_depth: 12,
            max_states: 2_000_000,
        }
    }
}

impl SearchBudget {
    pub fn new(max_depth: usize, max_states: usize) -> Result<SearchBudget, SearchError> {
        if max_depth == 0 || max_states == 0 {
            return Err(SearchError::InvalidBudget);
        }
        Ok(SearchBudget {
            max_depth,
            max_states,
        })
    }

    pub fn with_depth(self, max_depth: usize) -> SearchBudget {
        SearchBudget { max_depth, ..self }
    }
}

/// Output of `wt(s, Q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessResult<L, M> {
    pub execution: Execution<L, M>,
    pub decider: ProcessId,
    pub value: Bit,
    pub end_digest: StateDigest,
    /// Distinct states the search inserted.
    pub visited: usize,
}

pub type Witness<P> = WitnessResult<<P as Protocol>::Local, <P as Protocol>::Payload>;

impl<L: Clone, M: Clone> WitnessResult<L, M> {
    pub fn schedule(&self) -> &Schedule {
        self.execution.actions()
    }
}

/// Two executions from one state that decide opposite bits.
///
/// As an i-fork, `beta` is the branch without steps of `P_i`; `alpha` may
/// contain them and `i_len` counts how many.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fork<L, M> {
    pub origin: GlobalState<L, M>,
    pub alpha: Execution<L, M>,
    pub beta: Execution<L, M>,
    pub alpha_value: Bit,
}

pub type ForkOf<P> = Fork<<P as Protocol>::Local, <P as Protocol>::Payload>;

impl<L: Clone + PartialEq, M: Clone + PartialEq> Fork<L, M> {
    pub fn new(alpha: Execution<L, M>, alpha_value: Bit, beta: Execution<L, M>) -> Self {
        debug_assert!(alpha.start() == beta.start());
        Fork {
            origin: alpha.start().clone(),
            alpha,
            beta,
            alpha_value,
        }
    }

    pub fn beta_value(&self) -> Bit {
        self.alpha_value.flip()
    }

    /// The branch deciding `v`.
    pub fn branch(&self, v: Bit) -> &Execution<L, M> {
        if v == self.alpha_value {
            &self.alpha
        } else {
            &self.beta
        }
    }

    pub fn i_len(&self, i: ProcessId) -> usize {
        self.alpha.actions().count_of(i)
    }

    pub fn is_i_fork(&self, i: ProcessId) -> bool {
        self.beta.actions().avoids(i)
    }

    pub fn is_full(&self, i: ProcessId) -> bool {
        self.is_i_fork(i) && self.i_len(i) == 0
    }
}

/// Verdict of a bivalence certification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Valence<L, M> {
    Bivalent(Fork<L, M>),
    /// Only this value is reachable; the region was fully explored.
    Univalent(Bit),
    /// No decision is reachable; the region was fully explored.
    NoDecision,
}

pub type ValenceOf<P> = Valence<<P as Protocol>::Local, <P as Protocol>::Payload>;

impl<L, M> Valence<L, M> {
    pub fn fork(&self) -> Option<&Fork<L, M>> {
        match self {
            Valence::Bivalent(f) => Some(f),
            _ => None,
        }
    }

    pub fn into_fork(self) -> Option<Fork<L, M>> {
        match self {
            Valence::Bivalent(f) => Some(f),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VPossible<L, M> {
    Possible(WitnessResult<L, M>),
    /// Every `wt(s, Q_i)` completed and none decided the value.
    Impossible,
}

pub type VPossibleOf<P> = VPossible<<P as Protocol>::Local, <P as Protocol>::Payload>;

impl<L, M> VPossible<L, M> {
    pub fn is_possible(&self) -> bool {
        matches!(self, VPossible::Possible(_))
    }
}

/// A certified blocking scenario: from `state`, the processes other than
/// `excluded` can never reach a decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingScenario<L, M> {
    pub init: InitVector,
    pub path: Execution<L, M>,
    pub excluded: ProcessId,
    /// Size of the explored closure of `Q_excluded`.
    pub closure_states: usize,
}

pub type BlockingOf<P> = BlockingScenario<<P as Protocol>::Local, <P as Protocol>::Payload>;

impl<L: Clone, M: Clone> BlockingScenario<L, M> {
    pub fn state(&self) -> &GlobalState<L, M> {
        self.path.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementViolation<L, M> {
    pub init: InitVector,
    pub execution: Execution<L, M>,
    pub zero: ProcessId,
    pub one: ProcessId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgreementOutcome<L, M> {
    Violation(AgreementViolation<L, M>),
    /// No violation among all states within `depth` steps. `exhaustive` is
    /// set when the reachable space ended before the depth bound.
    Clean {
        depth: usize,
        exhaustive: bool,
        states: usize,
    },
}

pub type AgreementOf<P> = AgreementOutcome<<P as Protocol>::Local, <P as Protocol>::Payload>;

enum Visit {
    Continue,
    /// Keep the state but do not expand it.
    Prune,
    Stop,
}

struct Graph<P: Protocol> {
    states: IndexSet<State<P>>,
    parent: Vec<Option<(usize, Action)>>,
    depth_cut: bool,
    state_cut: bool,
    stopped_at: Option<usize>,
}

impl<P: Protocol> Graph<P> {
    fn frontier_empty(&self) -> bool {
        !self.depth_cut && !self.state_cut
    }

    fn visited(&self) -> usize {
        self.states.len()
    }

    fn state(&self, idx: usize) -> &State<P> {
        &self.states[idx]
    }

    /// The root index and the execution from it to `idx`.
    fn execution(&self, idx: usize) -> (usize, Exec<P>) {
        let mut actions = Vec::new();
        let mut states = vec![self.state(idx).clone()];
        let mut cur = idx;
        while let Some((prev, a)) = self.parent[cur] {
            actions.push(a);
            states.push(self.state(prev).clone());
            cur = prev;
        }
        actions.reverse();
        states.reverse();
        (cur, Execution::from_parts(actions.into(), states))
    }
}

fn explore<P, E, F>(
    p: &P,
    roots: impl IntoIterator<Item = State<P>>,
    allowed: ProcessSet,
    budget: SearchBudget,
    mut visit: F,
) -> Result<Graph<P>, E>
where
    P: Protocol,
    E: From<ModelError>,
    F: FnMut(usize, &State<P>) -> Result<Visit, E>,
{
    let mut g = Graph::<P> {
        states: IndexSet::new(),
        parent: Vec::new(),
        depth_cut: false,
        state_cut: false,
        stopped_at: None,
    };
    let mut depth: Vec<usize> = Vec::new();
    let mut pruned: Vec<bool> = Vec::new();

    for root in roots {
        let (idx, fresh) = g.states.insert_full(root);
        if !fresh {
            continue;
        }
        g.parent.push(None);
        depth.push(0);
        match visit(idx, g.state(idx))? {
            Visit::Stop => {
                g.stopped_at = Some(idx);
                return Ok(g);
            }
            v => pruned.push(matches!(v, Visit::Prune)),
        }
    }

    let mut cursor = 0;
    while cursor < g.states.len() {
        let node = cursor;
        cursor += 1;
        if pruned[node] {
            continue;
        }
        let actions = g.state(node).enabled_actions_in(allowed);
        if depth[node] >= budget.max_depth {
            if !g.depth_cut {
                for a in actions {
                    let next = apply_action(p, g.state(node), a)?;
                    if !g.states.contains(&next) {
                        g.depth_cut = true;
                        break;
                    }
                }
            }
            continue;
        }
        for a in actions {
            let next = apply_action(p, g.state(node), a)?;
            if g.states.contains(&next) {
                continue;
            }
            if g.states.len() >= budget.max_states {
                g.state_cut = true;
                break;
            }
            let (idx, _) = g.states.insert_full(next);
            g.parent.push(Some((node, a)));
            depth.push(depth[node] + 1);
            match visit(idx, g.state(idx))? {
                Visit::Stop => {
                    g.stopped_at = Some(idx);
                    return Ok(g);
                }
                v => pruned.push(matches!(v, Visit::Prune)),
            }
        }
        if g.state_cut {
            break;
        }
    }
    Ok(g)
}

fn check_quorum(n: usize, q: ProcessSet) -> Result<(), SearchError> {
    if q.len() != n - 1 || !q.is_subset(ProcessSet::all(n)) {
        return Err(SearchError::InvalidQuorum {
            set: q,
            expected: n - 1,
        });
    }
    Ok(())
}

/// The nonblocking witness `wt(s, Q)`: a shortest execution using only `Q`
/// that reaches a state where some process has decided.
pub fn wt<P: Protocol>(
    p: &P,
    s: &State<P>,
    q: ProcessSet,
    budget: SearchBudget,
) -> Result<Witness<P>, SearchError> {
    check_quorum(p.n(), q)?;
    let g = explore::<P, SearchError, _>(p, [s.clone()], q, budget, |_, st| {
        Ok(if first_decision(p, st).is_some() {
            Visit::Stop
        } else {
            Visit::Continue
        })
    })?;
    match g.stopped_at {
        Some(idx) => {
            let (_, execution) = g.execution(idx);
            let (decider, value) = first_decision(p, execution.end()).expect("stopped on a decision");
            Ok(WitnessResult {
                end_digest: execution.end().digest(),
                execution,
                decider,
                value,
                visited: g.visited(),
            })
        }
        None => Err(SearchError::SearchExhausted {
            frontier_empty: g.frontier_empty(),
            visited: g.visited(),
        }),
    }
}

/// `wt(s, Q_i)`.
pub fn wt_excluding<P: Protocol>(
    p: &P,
    s: &State<P>,
    excluded: ProcessId,
    budget: SearchBudget,
) -> Result<Witness<P>, SearchError> {
    wt(p, s, ProcessSet::q_without(p.n(), excluded), budget)
}

/// Decides v-possibility by computing `wt(s, Q_1) ... wt(s, Q_n)`.
///
/// A certified-blocked `Q_i` means the protocol is not effectively
/// nonblocking at `s`; that is reported as [`SearchError::Blocked`] unless
/// another witness already decides `v`.
pub fn v_possible<P: Protocol>(
    p: &P,
    s: &State<P>,
    v: Bit,
    budget: SearchBudget,
) -> Result<VPossibleOf<P>, SearchError> {
    let mut blocked = None;
    let mut unknown = None;
    for i in ProcessId::all(p.n()) {
        match wt_excluding(p, s, i, budget) {
            Ok(w) if w.value == v => return Ok(VPossible::Possible(w)),
            Ok(_) => {}
            Err(SearchError::SearchExhausted {
                frontier_empty: true,
                ..
            }) => {
                blocked.get_or_insert(i);
            }
            Err(SearchError::SearchExhausted { visited, .. }) => {
                unknown.get_or_insert(visited);
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(visited) = unknown {
        return Err(SearchError::Unknown {
            found: None,
            visited,
        });
    }
    if let Some(excluded) = blocked {
        return Err(SearchError::Blocked { excluded });
    }
    Ok(VPossible::Impossible)
}

fn certify<P: Protocol>(
    p: &P,
    s: &State<P>,
    allowed: ProcessSet,
    budget: SearchBudget,
) -> Result<ValenceOf<P>, SearchError> {
    let mut found: [Option<usize>; 2] = [None, None];
    let g = explore::<P, SearchError, _>(p, [s.clone()], allowed, budget, |idx, st| {
        Ok(match first_decision(p, st) {
            Some((_, v)) => {
                found[v.as_u8() as usize].get_or_insert(idx);
                if found.iter().all(Option::is_some) {
                    Visit::Stop
                } else {
                    Visit::Prune
                }
            }
            None => Visit::Continue,
        })
    })?;
    match found {
        [Some(z), Some(o)] => {
            let (_, zero) = g.execution(z);
            let (_, one) = g.execution(o);
            Ok(Valence::Bivalent(Fork::new(zero, Bit::Zero, one)))
        }
        _ if !g.frontier_empty() => Err(SearchError::Unknown {
            found: found
                .iter()
                .position(Option::is_some)
                .map(|b| Bit::from_u8(b as u8).expect("0 or 1")),
            visited: g.visited(),
        }),
        [Some(_), None] => Ok(Valence::Univalent(Bit::Zero)),
        [None, Some(_)] => Ok(Valence::Univalent(Bit::One)),
        [None, None] => Ok(Valence::NoDecision),
    }
}

/// Searches all processes for a 0-deciding and a 1-deciding execution.
/// The fork's `alpha` branch decides 0.
pub fn certify_bivalent<P: Protocol>(
    p: &P,
    s: &State<P>,
    budget: SearchBudget,
) -> Result<ValenceOf<P>, SearchError> {
    certify(p, s, ProcessSet::all(p.n()), budget)
}

/// Like [`certify_bivalent`] with both searches restricted to `Q_i`; a fork,
/// when found, is a full i-fork.
pub fn certify_bivalent_via<P: Protocol>(
    p: &P,
    s: &State<P>,
    i: ProcessId,
    budget: SearchBudget,
) -> Result<ValenceOf<P>, SearchError> {
    certify(p, s, ProcessSet::q_without(p.n(), i), budget)
}

/// Ladder initializations first, then the remaining vectors in numeric order.
fn initializations(n: usize) -> Vec<InitVector> {
    let mut out: Vec<InitVector> = (0..=n).map(|j| InitVector::ladder(n, j)).collect();
    for v in InitVector::all(n) {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Breadth-first over reachable states from every initialization, looking for
/// the first `(s, i)` whose `Q_i`-closure provably contains no decision.
///
/// `Ok(None)` means the whole reachable space was explored with no blocking
/// pair; a budget cutoff anywhere yields [`SearchError::Unknown`].
pub fn find_blocking<P: Protocol>(
    p: &P,
    budget: SearchBudget,
) -> Result<Option<BlockingOf<P>>, SearchError> {
    let inits = initializations(p.n());
    let roots = inits
        .iter()
        .map(|iv| make_initial(p, iv))
        .collect::<Result<Vec<_>, _>>()?;
    let mut hit: Option<(ProcessId, usize)> = None;
    let mut inner_unknown = false;
    let g = explore::<P, SearchError, _>(p, roots, ProcessSet::all(p.n()), budget, |_, st| {
        if first_decision(p, st).is_some() {
            return Ok(Visit::Prune);
        }
        for i in ProcessId::all(p.n()) {
            match wt_excluding(p, st, i, budget) {
                Ok(_) => {}
                Err(SearchError::SearchExhausted {
                    frontier_empty: true,
                    visited,
                }) => {
                    hit = Some((i, visited));
                    return Ok(Visit::Stop);
                }
                Err(SearchError::SearchExhausted { .. }) => inner_unknown = true,
                Err(e) => return Err(e),
            }
        }
        Ok(Visit::Continue)
    })?;
    if let (Some(idx), Some((excluded, closure_states))) = (g.stopped_at, hit) {
        let (root, path) = g.execution(idx);
        return Ok(Some(BlockingScenario {
            init: inits[root].clone(),
            path,
            excluded,
            closure_states,
        }));
    }
    if !g.frontier_empty() || inner_unknown {
        return Err(SearchError::Unknown {
            found: None,
            visited: g.visited(),
        });
    }
    Ok(None)
}

fn agreement_search<P: Protocol>(
    p: &P,
    inits: Vec<InitVector>,
    budget: SearchBudget,
) -> Result<AgreementOf<P>, SearchError> {
    let roots = inits
        .iter()
        .map(|iv| make_initial(p, iv))
        .collect::<Result<Vec<_>, _>>()?;
    let mut clash = None;
    let g = explore::<P, SearchError, _>(p, roots, ProcessSet::all(p.n()), budget, |_, st| {
        Ok(match decided_map(p, st) {
            Err(ModelError::AgreementViolation { zero, one }) => {
                clash = Some((zero, one));
                Visit::Stop
            }
            Err(e) => return Err(e.into()),
            Ok(_) => Visit::Continue,
        })
    })?;
    if let (Some(idx), Some((zero, one))) = (g.stopped_at, clash) {
        let (root, execution) = g.execution(idx);
        return Ok(AgreementOutcome::Violation(AgreementViolation {
            init: inits[root].clone(),
            execution,
            zero,
            one,
        }));
    }
    if g.state_cut {
        return Err(SearchError::Unknown {
            found: None,
            visited: g.visited(),
        });
    }
    Ok(AgreementOutcome::Clean {
        depth: budget.max_depth,
        exhaustive: !g.depth_cut,
        states: g.visited(),
    })
}

/// Explores every state within `budget.max_depth` steps of every
/// initialization (the ladder alone when `2^n` exceeds the state budget) and
/// returns the first state where two processes disagree.
pub fn check_agreement<P: Protocol>(
    p: &P,
    budget: SearchBudget,
) -> Result<AgreementOf<P>, SearchError> {
    let n = p.n();
    let inits = if n < usize::BITS as usize && (1usize << n) <= budget.max_states {
        initializations(n)
    } else {
        (0..=n).map(|j| InitVector::ladder(n, j)).collect()
    };
    agreement_search(p, inits, budget)
}

/// [`check_agreement`] from a single initialization.
pub fn check_agreement_from<P: Protocol>(
    p: &P,
    init: &InitVector,
    budget: SearchBudget,
) -> Result<AgreementOf<P>, SearchError> {
    agreement_search(p, vec![init.clone()], budget)
}
