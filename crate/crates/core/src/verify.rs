// SPDX-License-Identifier: Apache-2.0

//! Independent checks of adversary output: trace replay, audit of the
//! backward-walk log, and the commutativity property suite.

use std::fmt;

use indexmap::IndexSet;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{ProgramLogOf, WalkOutcome};
use crate::model::{
    apply_action, commute_join, decided_map, first_decision, run_schedule, Action, InitVector,
    ProcessId, ProcessSet, Schedule, State, StateDigest,
};
use crate::oracle::{certify_bivalent, wt_excluding, SearchBudget, Valence};
use crate::protocols::{make_initial, Protocol};
use crate::trace::TraceFile;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    InitialDigest,
    IndexGap,
    Fairness,
    Disabled,
    DigestMismatch,
    Decided,
    Bivalence,
    Footer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Step index, or `None` for header and footer problems.
    pub step: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(k) => write!(f, "step {k}: {}", self.detail),
            None => f.write_str(&self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceCertificate {
    pub steps_checked: usize,
    /// States, counting the initial one, certified bivalent.
    pub bivalence_certified_prefix: usize,
    pub fairness_ok: bool,
    pub indecision_ok: bool,
    pub violations: Vec<Violation>,
}

impl TraceCertificate {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-executes a trace from its initial state.
///
/// Checks every recorded digest, indecision at every state, the round-robin
/// turn order, and bivalence of the first `certify_prefix` states (the initial
/// state included). Replay stops at the first divergence, since every later
/// digest would mismatch as a consequence; an altered field thus yields one
/// violation at its own step.
pub fn verify_trace<P: Protocol>(
    trace: &TraceFile,
    p: &P,
    budget: SearchBudget,
    certify_prefix: usize,
) -> Result<TraceCertificate, VerifyError> {
    let h = &trace.header;
    if h.protocol != p.name() || h.n != p.n() {
        return Err(VerifyError::MalformedTrace(format!(
            "trace is for {} n={}, checking against {} n={}",
            h.protocol,
            h.n,
            p.name(),
            p.n()
        )));
    }
    let init: InitVector = h
        .init_vector
        .parse()
        .map_err(|e| VerifyError::MalformedTrace(format!("{e}")))?;
    let mut state =
        make_initial(p, &init).map_err(|e| VerifyError::MalformedTrace(e.to_string()))?;

    let mut cert = TraceCertificate {
        steps_checked: 0,
        bivalence_certified_prefix: 0,
        fairness_ok: true,
        indecision_ok: true,
        violations: Vec::new(),
    };
    if state.digest() != h.initial_digest {
        push(
            &mut cert,
            None,
            ViolationKind::InitialDigest,
            format!("initial state digest is {}", state.digest()),
        );
        return Ok(cert);
    }
    check_state(p, &state, None, &mut cert);
    if certify_prefix > 0 {
        certify(p, &state, None, budget, &mut cert);
    }

    let n = p.n();
    for (k, rec) in trace.steps.iter().enumerate() {
        if rec.index != k {
            push(
                &mut cert,
                Some(k),
                ViolationKind::IndexGap,
                format!("record carries index {}", rec.index),
            );
        }
        let turn = ProcessId::new(k % n + 1);
        if rec.turn_process != turn || rec.applied_action.process() != turn {
            push(
                &mut cert,
                Some(k),
                ViolationKind::Fairness,
                format!(
                    "turn of {turn}, recorded {} applying {}",
                    rec.turn_process, rec.applied_action
                ),
            );
        }
        let mut actions: Vec<Action> = rec.extension_actions.clone();
        actions.push(rec.applied_action);
        let next = match run_schedule(p, &state, &Schedule::new(actions)) {
            Ok(run) => run.end().clone(),
            Err(e) => {
                push(&mut cert, Some(k), ViolationKind::Disabled, e.to_string());
                return finish(trace, cert);
            }
        };
        state = next;
        cert.steps_checked += 1;
        let digest = state.digest();
        if digest != rec.state_digest {
            push(
                &mut cert,
                Some(k),
                ViolationKind::DigestMismatch,
                format!("recomputed {digest}, recorded {}", rec.state_digest),
            );
            return finish(trace, cert);
        }
        if !rec.decided.is_empty() {
            push(
                &mut cert,
                Some(k),
                ViolationKind::Decided,
                format!("record lists decided processes {:?}", rec.decided),
            );
        }
        check_state(p, &state, Some(k), &mut cert);
        if k + 1 < certify_prefix {
            certify(p, &state, Some(k), budget, &mut cert);
        }
    }
    finish(trace, cert)
}

fn push(cert: &mut TraceCertificate, step: Option<usize>, kind: ViolationKind, detail: String) {
    match kind {
        ViolationKind::Fairness => cert.fairness_ok = false,
        ViolationKind::Decided => cert.indecision_ok = false,
        _ => {}
    }
    cert.violations.push(Violation { step, kind, detail });
}

fn certify<P: Protocol>(
    p: &P,
    s: &State<P>,
    step: Option<usize>,
    budget: SearchBudget,
    cert: &mut TraceCertificate,
) {
    match certify_bivalent(p, s, budget) {
        Ok(Valence::Bivalent(_)) => cert.bivalence_certified_prefix += 1,
        Ok(_) => push(cert, step, ViolationKind::Bivalence, "state is not bivalent".into()),
        Err(e) => push(cert, step, ViolationKind::Bivalence, e.to_string()),
    }
}

fn check_state<P: Protocol>(
    p: &P,
    s: &State<P>,
    step: Option<usize>,
    cert: &mut TraceCertificate,
) {
    match decided_map(p, s) {
        Ok(map) => {
            let decided: Vec<String> = map
                .iter()
                .enumerate()
                .filter_map(|(k, d)| d.map(|v| format!("{} decided {v}", k + 1)))
                .collect();
            if !decided.is_empty() {
                push(cert, step, ViolationKind::Decided, decided.join(", "));
            }
        }
        Err(e) => push(cert, step, ViolationKind::Decided, e.to_string()),
    }
}

fn finish(trace: &TraceFile, mut cert: TraceCertificate) -> Result<TraceCertificate, VerifyError> {
    let f = &trace.footer;
    let n = trace.header.n;
    let steps = trace.steps.len();
    if f.steps != steps {
        push(
            &mut cert,
            None,
            ViolationKind::Footer,
            format!("footer counts {} steps, trace has {steps}", f.steps),
        );
    }
    if f.rounds_completed != steps / n {
        push(
            &mut cert,
            None,
            ViolationKind::Footer,
            format!("footer counts {} rounds, expected {}", f.rounds_completed, steps / n),
        );
    }
    if f.fork_modes.len() != steps {
        push(
            &mut cert,
            None,
            ViolationKind::Footer,
            format!("{} fork modes for {steps} steps", f.fork_modes.len()),
        );
    }
    Ok(cert)
}

/// Properties of a logged backward walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProgramInvariant {
    /// Walk positions step back one predecessor at a time along a valid
    /// `alpha_one`.
    PredecessorChain,
    /// Each stored path avoids `P_i` and decides the target from its position.
    PathDecidesTarget,
    /// Every position the walk moved past had no opposite `Q_i` witness.
    NoOppositeWitness,
    /// The walk starts at the end of `alpha_one`, which decides the target.
    StartsAtDecision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgramVerdict {
    pub failed: Vec<(ProgramInvariant, String)>,
}

impl ProgramVerdict {
    pub fn holds(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn fails(&self, inv: ProgramInvariant) -> bool {
        self.failed.iter().any(|(k, _)| *k == inv)
    }
}

/// Audits a [`ProgramLogOf`] by recomputation; the log's own memo is not
/// trusted.
pub fn check_program_invariants<P: Protocol>(
    p: &P,
    log: &ProgramLogOf<P>,
    budget: SearchBudget,
) -> ProgramVerdict {
    let mut failed = Vec::new();
    let i = log.excluded;
    let alpha = &log.alpha_one;
    let len = alpha.len();
    let states = alpha.states();

    match run_schedule(p, alpha.start(), alpha.actions()) {
        Ok(run) if run.states() == states => {}
        Ok(_) => failed.push((
            ProgramInvariant::PredecessorChain,
            "alpha_one states do not follow from its actions".into(),
        )),
        Err(e) => failed.push((ProgramInvariant::PredecessorChain, e.to_string())),
    }
    for pair in log.walk.windows(2) {
        if pair[1].position + 1 != pair[0].position {
            failed.push((
                ProgramInvariant::PredecessorChain,
                format!("walk jumps from {} to {}", pair[0].position, pair[1].position),
            ));
        }
    }

    for e in &log.walk {
        if !e.path.avoids(i) {
            failed.push((
                ProgramInvariant::PathDecidesTarget,
                format!("path at {} uses {i}", e.position),
            ));
            continue;
        }
        let Some(from) = states.get(e.position) else {
            failed.push((
                ProgramInvariant::PathDecidesTarget,
                format!("position {} outside alpha_one", e.position),
            ));
            continue;
        };
        let decided = run_schedule(p, from, &e.path)
            .ok()
            .and_then(|run| first_decision(p, run.end()).map(|(_, v)| v));
        if decided != Some(log.target) {
            failed.push((
                ProgramInvariant::PathDecidesTarget,
                format!("path at {} decides {decided:?}", e.position),
            ));
        }
    }

    for e in log.walk.iter().filter(|e| e.position < len) {
        if let Some(s) = states.get(e.position) {
            match wt_excluding(p, s, i, budget) {
                Ok(w) if w.value == log.target => {}
                Ok(w) => failed.push((
                    ProgramInvariant::NoOppositeWitness,
                    format!("wt at {} decides {}", e.position, w.value),
                )),
                Err(err) => failed.push((ProgramInvariant::NoOppositeWitness, err.to_string())),
            }
        }
    }

    if log.outcome != WalkOutcome::AlreadyFull {
        match log.walk.first() {
            Some(e) if e.position == len && e.path.is_empty() => {}
            Some(e) => failed.push((
                ProgramInvariant::StartsAtDecision,
                format!("walk starts at {} of {len}", e.position),
            )),
            None => failed.push((ProgramInvariant::StartsAtDecision, "empty walk".into())),
        }
        if first_decision(p, alpha.end()).map(|(_, v)| v) != Some(log.target) {
            failed.push((
                ProgramInvariant::StartsAtDecision,
                "alpha_one does not decide the target".into(),
            ));
        }
    }
    ProgramVerdict { failed }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// Trial index, or `None` for the exhaustive sweep.
    pub trial: Option<usize>,
    pub state: StateDigest,
    pub first: Schedule,
    pub second: Schedule,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommutativityVerdict {
    pub pairs_checked: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl CommutativityVerdict {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

fn complement(n: usize, set: ProcessSet) -> ProcessSet {
    ProcessId::all(n).filter(|q| !set.contains(*q)).collect()
}

fn random_walk<P: Protocol, R: Rng>(
    p: &P,
    s: &State<P>,
    allowed: ProcessSet,
    len: usize,
    rng: &mut R,
) -> (Schedule, State<P>) {
    let mut cur = s.clone();
    let mut sched = Schedule::default();
    for _ in 0..len {
        let Some(&a) = cur.enabled_actions_in(allowed).choose(rng) else {
            break;
        };
        cur = apply_action(p, &cur, a).expect("enabled action applies");
        sched.push(a);
    }
    (sched, cur)
}

fn check_pair<P: Protocol>(
    p: &P,
    s: &State<P>,
    first: &Schedule,
    second: &Schedule,
    trial: Option<usize>,
    out: &mut CommutativityVerdict,
) {
    out.pairs_checked += 1;
    let verdict = commute_join(p, s, first, second).and_then(|joined| {
        let a = run_schedule(p, s, &first.then(second))?;
        let b = run_schedule(p, s, &second.then(first))?;
        if a.end().digest() == joined.digest() && b.end().digest() == joined.digest() {
            Ok(())
        } else {
            Err(crate::model::ModelError::CommutationFailure(
                "end digests differ".into(),
            ))
        }
    });
    if let Err(e) = verdict {
        out.counterexamples.push(Counterexample {
            trial,
            state: s.digest(),
            first: first.clone(),
            second: second.clone(),
            reason: e.to_string(),
        });
    }
}

/// Seeded random trials: walk up to `depth` steps from a random
/// initialization, split the processes into two random sides, draw one
/// schedule of up to `depth` steps per side, and check both orders agree.
/// Deliveries across the split are allowed on both sides.
pub fn commutativity_suite<P: Protocol>(
    p: &P,
    trials: usize,
    seed: u64,
    depth: usize,
) -> CommutativityVerdict {
    let n = p.n();
    let inits: Vec<InitVector> = InitVector::all(n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CommutativityVerdict {
        pairs_checked: 0,
        counterexamples: Vec::new(),
    };
    for trial in 0..trials {
        let init = inits.choose(&mut rng).expect("n > 0");
        let start = make_initial(p, init).expect("arity matches");
        let walk = rng.random_range(0..=depth);
        let (_, s) = random_walk(p, &start, ProcessSet::all(n), walk, &mut rng);
        let mut left = ProcessSet::empty();
        for q in ProcessId::all(n) {
            if rng.random_bool(0.5) {
                left.insert(q);
            }
        }
        let right = complement(n, left);
        let l1 = rng.random_range(0..=depth);
        let l2 = rng.random_range(0..=depth);
        let (first, _) = random_walk(p, &s, left, l1, &mut rng);
        let (second, _) = random_walk(p, &s, right, l2, &mut rng);
        check_pair(p, &s, &first, &second, Some(trial), &mut out);
    }
    out
}

fn schedules_within<P: Protocol>(
    p: &P,
    s: &State<P>,
    allowed: ProcessSet,
    depth: usize,
) -> Vec<Schedule> {
    let mut out = vec![Schedule::default()];
    let mut layer = vec![(Schedule::default(), s.clone())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (sched, st) in &layer {
            for a in st.enabled_actions_in(allowed) {
                let mut longer = sched.clone();
                longer.push(a);
                let after = apply_action(p, st, a).expect("enabled action applies");
                out.push(longer.clone());
                next.push((longer, after));
            }
        }
        layer = next;
    }
    out
}

/// Every state within `depth` steps of every initialization, every split of
/// the processes into two sides, and every pair of side-restricted schedules
/// of length at most `depth`.
pub fn commutativity_sweep<P: Protocol>(p: &P, depth: usize) -> CommutativityVerdict {
    let n = p.n();
    let mut out = CommutativityVerdict {
        pairs_checked: 0,
        counterexamples: Vec::new(),
    };
    let all = ProcessSet::all(n);
    let mut states: IndexSet<State<P>> = IndexSet::new();
    for init in InitVector::all(n) {
        let start = make_initial(p, &init).expect("arity matches");
        for sched in schedules_within(p, &start, all, depth) {
            let run = run_schedule(p, &start, &sched).expect("generated schedule runs");
            states.insert(run.end().clone());
        }
    }
    for s in &states {
        for mask in 0..(1u64 << n) {
            let left: ProcessSet = ProcessId::all(n)
                .filter(|q| mask >> q.slot() & 1 == 1)
                .collect();
            let right = complement(n, left);
            let firsts = schedules_within(p, s, left, depth);
            let seconds = schedules_within(p, s, right, depth);
            for a in &firsts {
                for b in &seconds {
                    check_pair(p, s, a, b, None, &mut out);
                }
            }
        }
    }
    out
}
