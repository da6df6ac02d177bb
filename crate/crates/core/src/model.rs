// SPDX-License-Identifier: Apache-2.0

//! Asynchronous message-passing system model.
//!
//! A [`GlobalState`] is the local state of every process plus the contents of
//! every directed FIFO channel. Steps are single [`Action`]s: either a process
//! reads the head of one of its input channels, or it takes a null step. All
//! operations here are pure; states are immutable values.

use std::collections::VecDeque;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::protocols::Protocol;

/// Largest process count a [`ProcessSet`] can represent.
pub const MAX_PROCESSES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("action {action} is not enabled (step {index})")]
    DisabledAction { index: usize, action: Action },

    #[error("replay inapplicable: action {action} at index {index} is not enabled")]
    ReplayInapplicable { index: usize, action: Action },

    #[error("schedules share participants {shared}")]
    NotDisjoint { shared: ProcessSet },

    #[error("interleavings disagree: {0}")]
    CommutationFailure(String),

    #[error("processes disagree: {zero} decided 0 while {one} decided 1")]
    AgreementViolation { zero: ProcessId, one: ProcessId },

    #[error("process {process} revoked its decision {was}")]
    DecisionRevoked { process: ProcessId, was: Bit },

    #[error("expected {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("ladder index {index} outside 0..={n}")]
    OutOfRange { index: usize, n: usize },

    #[error("process {process} does not exist in a system of {n}")]
    UnknownProcess { process: ProcessId, n: usize },

    #[error("process {sender} tried to send to {receiver}")]
    InvalidSend { sender: ProcessId, receiver: ProcessId },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// A binary decision value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub const BOTH: [Bit; 2] = [Bit::Zero, Bit::One];

    pub fn flip(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Bit> {
        match v {
            0 => Some(Bit::Zero),
            1 => Some(Bit::One),
            _ => None,
        }
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Bit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Bit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Bit::from_u8(v).ok_or_else(|| serde::de::Error::custom(format!("bit out of range: {v}")))
    }
}

/// 1-based process index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(u8);

impl ProcessId {
    /// Panics if `index` is 0 or exceeds [`MAX_PROCESSES`].
    pub fn new(index: usize) -> ProcessId {
        assert!(
            (1..=MAX_PROCESSES).contains(&index),
            "process index {index} out of range"
        );
        ProcessId(index as u8)
    }

    pub fn try_new(index: usize, n: usize) -> Option<ProcessId> {
        (1..=n.min(MAX_PROCESSES))
            .contains(&index)
            .then_some(ProcessId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// 0-based position, for indexing local-state vectors.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all(n: usize) -> impl Iterator<Item = ProcessId> + Clone {
        (1..=n).map(ProcessId::new)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A set of processes, stored as a bitmask over 1-based ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ProcessSet(u64);

impl ProcessSet {
    pub fn empty() -> ProcessSet {
        ProcessSet(0)
    }

    pub fn all(n: usize) -> ProcessSet {
        ProcessId::all(n).collect()
    }

    /// `Q_i`: every process except `i`.
    pub fn q_without(n: usize, i: ProcessId) -> ProcessSet {
        let mut set = ProcessSet::all(n);
        set.remove(i);
        set
    }

    pub fn contains(self, p: ProcessId) -> bool {
        self.0 & (1 << p.slot()) != 0
    }

    pub fn insert(&mut self, p: ProcessId) {
        self.0 |= 1 << p.slot();
    }

    pub fn remove(&mut self, p: ProcessId) {
        self.0 &= !(1 << p.slot());
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersection(self, other: ProcessSet) -> ProcessSet {
        ProcessSet(self.0 & other.0)
    }

    pub fn is_disjoint(self, other: ProcessSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: ProcessSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = ProcessId> {
        (0..MAX_PROCESSES)
            .filter(move |b| self.0 & (1 << b) != 0)
            .map(|b| ProcessId::new(b + 1))
    }
}

impl FromIterator<ProcessId> for ProcessSet {
    fn from_iter<T: IntoIterator<Item = ProcessId>>(iter: T) -> Self {
        let mut set = ProcessSet::empty();
        for p in iter {
            set.insert(p);
        }
        set
    }
}

impl fmt::Display for ProcessSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.iter().map(|p| p.to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

/// One step of one process.
///
/// Actions are identified by channel or process, never by message identity, so
/// replaying an action in another state re-reads whatever heads that channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// `receiver` reads the head of channel `sender -> receiver`.
    Deliver {
        receiver: ProcessId,
        sender: ProcessId,
    },
    /// `process` steps without reading a message.
    Null { process: ProcessId },
}

impl Action {
    pub fn deliver(receiver: usize, sender: usize) -> Action {
        Action::Deliver {
            receiver: ProcessId::new(receiver),
            sender: ProcessId::new(sender),
        }
    }

    pub fn null(process: usize) -> Action {
        Action::Null {
            process: ProcessId::new(process),
        }
    }

    /// The process that takes the step.
    pub fn process(self) -> ProcessId {
        match self {
            Action::Deliver { receiver, .. } => receiver,
            Action::Null { process } => process,
        }
    }

    fn order_key(self) -> (ProcessId, u8, u8) {
        match self {
            Action::Deliver { receiver, sender } => (receiver, 0, sender.0),
            Action::Null { process } => (process, 1, 0),
        }
    }
}

// Canonical order: receiver ascending, Deliver before Null, sender ascending.
impl Ord for Action {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for Action {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Deliver { receiver, sender } => write!(f, "deliver {sender}->{receiver}"),
            Action::Null { process } => write!(f, "null {process}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse action {0:?}")]
pub struct ParseActionError(String);

impl FromStr for Action {
    type Err = ParseActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseActionError(s.to_string());
        let pid = |t: &str| -> Result<ProcessId, ParseActionError> {
            let v: usize = t.trim().parse().map_err(|_| err())?;
            ProcessId::try_new(v, MAX_PROCESSES).ok_or_else(err)
        };
        if let Some(rest) = s.strip_prefix("deliver ") {
            let (from, to) = rest.split_once("->").ok_or_else(err)?;
            Ok(Action::Deliver {
                receiver: pid(to)?,
                sender: pid(from)?,
            })
        } else if let Some(rest) = s.strip_prefix("null ") {
            Ok(Action::Null { process: pid(rest)? })
        } else {
            Err(err())
        }
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An ordered list of actions, replayable from any state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(Vec<Action>);

impl Schedule {
    pub fn new(actions: Vec<Action>) -> Schedule {
        Schedule(actions)
    }

    pub fn participants(&self) -> ProcessSet {
        self.0.iter().map(|a| a.process()).collect()
    }

    /// True when no action belongs to `p`.
    pub fn avoids(&self, p: ProcessId) -> bool {
        !self.0.iter().any(|a| a.process() == p)
    }

    pub fn count_of(&self, p: ProcessId) -> usize {
        self.0.iter().filter(|a| a.process() == p).count()
    }

    pub fn actions(&self) -> &[Action] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, a: Action) {
        self.0.push(a);
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Schedule) -> Schedule {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Schedule(v)
    }

    pub fn into_vec(self) -> Vec<Action> {
        self.0
    }
}

impl From<Vec<Action>> for Schedule {
    fn from(v: Vec<Action>) -> Self {
        Schedule(v)
    }
}

impl FromIterator<Action> for Schedule {
    fn from_iter<T: IntoIterator<Item = Action>>(iter: T) -> Self {
        Schedule(iter.into_iter().collect())
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Deterministic, injective byte encoding used for state digests.
pub trait Canonical {
    fn encode(&self, out: &mut Vec<u8>);
}

impl Canonical for Bit {
    fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.as_u8());
    }
}

impl Canonical for Option<Bit> {
    fn encode(&self, out: &mut Vec<u8>) {
        out.push(match self {
            None => 2,
            Some(b) => b.as_u8(),
        });
    }
}

/// SHA-256 over the canonical encoding of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateDigest(pub [u8; 32]);

impl StateDigest {
    pub const ALGORITHM: &'static str = "sha256";
}

impl fmt::Display for StateDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for StateDigest {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(StateDigest(out))
    }
}

impl Serialize for StateDigest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StateDigest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Snapshot of all process-local states and all channel queues.
///
/// Equality and hashing are structural; [`GlobalState::digest`] agrees with
/// equality as long as the local and payload encodings are injective.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlobalState<L, M> {
    locals: Vec<L>,
    // n * (n - 1) queues, grouped by sender.
    channels: Vec<VecDeque<M>>,
}

fn channel_slot(n: usize, sender: ProcessId, receiver: ProcessId) -> usize {
    let (s, r) = (sender.slot(), receiver.slot());
    debug_assert!(s != r && s < n && r < n);
    s * (n - 1) + if r < s { r } else { r - 1 }
}

impl<L, M> GlobalState<L, M> {
    /// A state with the given locals and every channel empty.
    pub fn with_locals(locals: Vec<L>) -> Self {
        let n = locals.len();
        GlobalState {
            locals,
            channels: (0..n * n.saturating_sub(1)).map(|_| VecDeque::new()).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.locals.len()
    }

    pub fn local(&self, p: ProcessId) -> &L {
        &self.locals[p.slot()]
    }

    pub fn locals(&self) -> &[L] {
        &self.locals
    }

    pub fn channel(&self, sender: ProcessId, receiver: ProcessId) -> &VecDeque<M> {
        &self.channels[channel_slot(self.n(), sender, receiver)]
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Total number of in-flight messages.
    pub fn in_flight(&self) -> usize {
        self.channels.iter().map(VecDeque::len).sum()
    }

    pub fn enqueue(&mut self, sender: ProcessId, receiver: ProcessId, msg: M) {
        let slot = channel_slot(self.n(), sender, receiver);
        self.channels[slot].push_back(msg);
    }

    pub fn set_local(&mut self, p: ProcessId, local: L) {
        self.locals[p.slot()] = local;
    }

    fn check_process(&self, p: ProcessId) -> Result<(), ModelError> {
        if p.index() > self.n() {
            return Err(ModelError::UnknownProcess {
                process: p,
                n: self.n(),
            });
        }
        Ok(())
    }

    /// Every enabled action, in canonical order.
    pub fn enabled_actions(&self) -> Vec<Action> {
        self.enabled_actions_in(ProcessSet::all(self.n()))
    }

    /// Enabled actions of the processes in `allowed`, in canonical order.
    pub fn enabled_actions_in(&self, allowed: ProcessSet) -> Vec<Action> {
        let n = self.n();
        let mut out = Vec::new();
        for receiver in ProcessId::all(n).filter(|p| allowed.contains(*p)) {
            for sender in ProcessId::all(n).filter(|s| *s != receiver) {
                if !self.channel(sender, receiver).is_empty() {
                    out.push(Action::Deliver { receiver, sender });
                }
            }
            out.push(Action::Null { process: receiver });
        }
        out
    }

    pub fn is_enabled(&self, a: Action) -> bool {
        match a {
            Action::Deliver { receiver, sender } => {
                receiver != sender
                    && receiver.index() <= self.n()
                    && sender.index() <= self.n()
                    && !self.channel(sender, receiver).is_empty()
            }
            Action::Null { process } => process.index() <= self.n(),
        }
    }
}

impl<L: Canonical, M: Canonical> GlobalState<L, M> {
    pub fn digest(&self) -> StateDigest {
        let mut buf = Vec::with_capacity(128);
        buf.extend_from_slice(&(self.n() as u32).to_le_bytes());
        for l in &self.locals {
            l.encode(&mut buf);
        }
        for q in &self.channels {
            buf.extend_from_slice(&(q.len() as u32).to_le_bytes());
            for m in q {
                m.encode(&mut buf);
            }
        }
        StateDigest(Sha256::digest(&buf).into())
    }
}

/// Global state type for a protocol.
pub type State<P> = GlobalState<<P as Protocol>::Local, <P as Protocol>::Payload>;

/// A start state, the schedule run from it, and every state it passes through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution<L, M> {
    actions: Schedule,
    // states[0] is the start; states.len() == actions.len() + 1.
    states: Vec<GlobalState<L, M>>,
}

/// Execution type for a protocol.
pub type Exec<P> = Execution<<P as Protocol>::Local, <P as Protocol>::Payload>;

impl<L: Clone, M: Clone> Execution<L, M> {
    pub fn empty(start: GlobalState<L, M>) -> Self {
        Execution {
            actions: Schedule::default(),
            states: vec![start],
        }
    }

    /// Assembles an execution from parts already known to be consistent.
    pub(crate) fn from_parts(actions: Schedule, states: Vec<GlobalState<L, M>>) -> Self {
        debug_assert_eq!(states.len(), actions.len() + 1);
        Execution { actions, states }
    }

    pub fn start(&self) -> &GlobalState<L, M> {
        &self.states[0]
    }

    pub fn end(&self) -> &GlobalState<L, M> {
        self.states.last().expect("execution has a start state")
    }

    pub fn actions(&self) -> &Schedule {
        &self.actions
    }

    pub fn states(&self) -> &[GlobalState<L, M>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn participants(&self) -> ProcessSet {
        self.actions.participants()
    }

    /// The first `k` steps.
    pub fn prefix(&self, k: usize) -> Self {
        Execution {
            actions: self.actions.actions()[..k].to_vec().into(),
            states: self.states[..=k].to_vec(),
        }
    }

    /// The steps from position `k` onward, starting at `states[k]`.
    pub fn suffix(&self, k: usize) -> Self {
        Execution {
            actions: self.actions.actions()[k..].to_vec().into(),
            states: self.states[k..].to_vec(),
        }
    }

    /// Appends `next`, which must start where `self` ends.
    pub fn concat(&self, next: &Self) -> Self
    where
        L: PartialEq,
        M: PartialEq,
    {
        debug_assert!(self.end() == next.start());
        let mut states = self.states.clone();
        states.extend_from_slice(&next.states[1..]);
        Execution {
            actions: self.actions.then(&next.actions),
            states,
        }
    }
}

/// Applies one action. Sends are appended to channel tails in ascending
/// receiver order.
pub fn apply_action<P: Protocol>(p: &P, s: &State<P>, a: Action) -> Result<State<P>, ModelError> {
    let actor = a.process();
    s.check_process(actor)?;
    let mut next = s.clone();
    let (local, sends) = match a {
        Action::Deliver { receiver, sender } => {
            s.check_process(sender)?;
            if sender == receiver {
                return Err(ModelError::DisabledAction { index: 0, action: a });
            }
            let slot = channel_slot(s.n(), sender, receiver);
            let msg = next.channels[slot]
                .pop_front()
                .ok_or(ModelError::DisabledAction { index: 0, action: a })?;
            p.on_deliver(receiver, s.local(receiver), sender, &msg)
        }
        Action::Null { process } => p.on_null(process, s.local(process)),
    };
    if let Some(was) = p.decided(s.local(actor)) {
        if p.decided(&local) != Some(was) {
            return Err(ModelError::DecisionRevoked {
                process: actor,
                was,
            });
        }
    }
    next.set_local(actor, local);
    let mut sends = sends;
    sends.sort_by_key(|(to, _)| *to);
    for (to, msg) in sends {
        if to == actor || to.index() > s.n() {
            return Err(ModelError::InvalidSend {
                sender: actor,
                receiver: to,
            });
        }
        next.enqueue(actor, to, msg);
    }
    Ok(next)
}

/// Runs `schedule` from `s`, failing with the index of the first disabled action.
pub fn run_schedule<P: Protocol>(
    p: &P,
    s: &State<P>,
    schedule: &Schedule,
) -> Result<Exec<P>, ModelError> {
    let mut states = Vec::with_capacity(schedule.len() + 1);
    states.push(s.clone());
    for (index, &action) in schedule.actions().iter().enumerate() {
        let cur = states.last().expect("nonempty");
        let next = match apply_action(p, cur, action) {
            Ok(next) => next,
            Err(ModelError::DisabledAction { .. }) => {
                return Err(ModelError::DisabledAction { index, action })
            }
            Err(e) => return Err(e),
        };
        states.push(next);
    }
    Ok(Execution::from_parts(schedule.clone(), states))
}

/// Runs a schedule recorded elsewhere from a different start state.
pub fn replay<P: Protocol>(
    p: &P,
    schedule: &Schedule,
    start: &State<P>,
) -> Result<Exec<P>, ModelError> {
    run_schedule(p, start, schedule).map_err(|e| match e {
        ModelError::DisabledAction { index, action } => {
            ModelError::ReplayInapplicable { index, action }
        }
        other => other,
    })
}

/// Runs two schedules over disjoint process sets in both orders and returns
/// the common end state.
///
/// Both schedules must be enabled from `s`. Since each channel is written by
/// one sender and read by one receiver, and sends go to the tail, a schedule
/// enabled from `s` only ever reads messages that were already queued in `s`
/// or that its own participants sent; cross-partition reads of fresh messages
/// are impossible by construction.
pub fn commute_join<P: Protocol>(
    p: &P,
    s: &State<P>,
    first: &Schedule,
    second: &Schedule,
) -> Result<State<P>, ModelError> {
    let shared = first.participants().intersection(second.participants());
    if !shared.is_empty() {
        return Err(ModelError::NotDisjoint { shared });
    }
    let one = replay(p, first, s)?;
    let two = replay(p, second, s)?;
    let one_two = replay(p, second, one.end())?;
    let two_one = replay(p, first, two.end())?;
    if one_two.end() != two_one.end() {
        return Err(ModelError::CommutationFailure(format!(
            "{first} then {second} differs from the reverse order"
        )));
    }
    Ok(one_two.end().clone())
}

/// Each process's decision, or an error if two processes disagree.
pub fn decided_map<P: Protocol>(p: &P, s: &State<P>) -> Result<Vec<Option<Bit>>, ModelError> {
    let map: Vec<Option<Bit>> = s.locals().iter().map(|l| p.decided(l)).collect();
    let zero = map.iter().position(|d| *d == Some(Bit::Zero));
    let one = map.iter().position(|d| *d == Some(Bit::One));
    if let (Some(z), Some(o)) = (zero, one) {
        return Err(ModelError::AgreementViolation {
            zero: ProcessId::new(z + 1),
            one: ProcessId::new(o + 1),
        });
    }
    Ok(map)
}

/// The lowest-numbered decided process and its value.
pub fn first_decision<P: Protocol>(p: &P, s: &State<P>) -> Option<(ProcessId, Bit)> {
    s.locals()
        .iter()
        .enumerate()
        .find_map(|(i, l)| p.decided(l).map(|b| (ProcessId::new(i + 1), b)))
}

pub fn is_undecided<P: Protocol>(p: &P, s: &State<P>) -> bool {
    s.locals().iter().all(|l| p.decided(l).is_none())
}

/// Per-process input bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InitVector(Vec<Bit>);

impl InitVector {
    pub fn new(inputs: Vec<Bit>) -> InitVector {
        InitVector(inputs)
    }

    pub fn uniform(n: usize, v: Bit) -> InitVector {
        InitVector(vec![v; n])
    }

    /// `s_j`: processes `1..=j` get 1, the rest 0.
    pub fn ladder(n: usize, j: usize) -> InitVector {
        InitVector((1..=n).map(|i| if i <= j { Bit::One } else { Bit::Zero }).collect())
    }

    /// All `2^n` vectors, process 1 as the most significant bit.
    pub fn all(n: usize) -> impl Iterator<Item = InitVector> {
        (0..1u64 << n).map(move |code| {
            InitVector(
                (0..n)
                    .map(|i| {
                        if code >> (n - 1 - i) & 1 == 1 {
                            Bit::One
                        } else {
                            Bit::Zero
                        }
                    })
                    .collect(),
            )
        })
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn input(&self, p: ProcessId) -> Bit {
        self.0[p.slot()]
    }

    pub fn bits(&self) -> &[Bit] {
        &self.0
    }

    pub fn is_uniform(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }
}

impl fmt::Display for InitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("init vector must be a string of 0s and 1s, got {0:?}")]
pub struct ParseInitError(String);

impl FromStr for InitVector {
    type Err = ParseInitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(Bit::Zero),
                '1' => Ok(Bit::One),
                _ => Err(ParseInitError(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(InitVector)
    }
}

/// Process count, failure tolerance and protocol name of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub protocol: String,
    pub n: usize,
    pub t: usize,
}

impl SystemConfig {
    pub fn new(protocol: impl Into<String>, n: usize) -> Result<SystemConfig, ModelError> {
        if n < 2 || n > MAX_PROCESSES {
            return Err(ModelError::InvalidConfig(format!(
                "need 2 <= n <= {MAX_PROCESSES}, got {n}"
            )));
        }
        Ok(SystemConfig {
            protocol: protocol.into(),
            n,
            t: 1,
        })
    }
}
