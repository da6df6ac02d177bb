// SPDX-License-Identifier: Apache-2.0

//! Deterministic protocol interface and the built-in protocols.
//!
//! All three built-ins defer their first broadcast to the process's first
//! step. A process that is never scheduled therefore never leaks its input,
//! which is what lets a schedule recorded from one initialization be replayed
//! from another that differs only in that process's input.

use std::fmt::Debug;
use std::hash::Hash;

use crate::model::{Bit, Canonical, GlobalState, InitVector, ModelError, ProcessId, State};

/// Messages produced by one step: `(receiver, payload)`.
pub type Outbox<M> = Vec<(ProcessId, M)>;

/// Bounds shared by local states and payloads.
pub trait Value: Clone + Eq + Ord + Hash + Debug + Send + Sync + Canonical {}
impl<T: Clone + Eq + Ord + Hash + Debug + Send + Sync + Canonical> Value for T {}

/// A deterministic consensus procedure over `n` processes.
///
/// Every method must be a pure function of its arguments, and `decided` must be
/// stable: once a local state reports a bit, every successor reports the same
/// bit. [`crate::model::apply_action`] enforces the latter.
pub trait Protocol: Send + Sync {
    type Local: Value;
    type Payload: Value;

    fn name(&self) -> &str;
    fn n(&self) -> usize;
    fn init(&self, id: ProcessId, input: Bit) -> (Self::Local, Outbox<Self::Payload>);
    fn on_deliver(
        &self,
        id: ProcessId,
        local: &Self::Local,
        sender: ProcessId,
        payload: &Self::Payload,
    ) -> (Self::Local, Outbox<Self::Payload>);
    fn on_null(&self, id: ProcessId, local: &Self::Local) -> (Self::Local, Outbox<Self::Payload>);
    fn decided(&self, local: &Self::Local) -> Option<Bit>;
}

impl<T: Protocol + ?Sized> Protocol for &T {
    type Local = T::Local;
    type Payload = T::Payload;

    fn name(&self) -> &str {
        (**self).name()
    }

    fn n(&self) -> usize {
        (**self).n()
    }

    fn init(&self, id: ProcessId, input: Bit) -> (Self::Local, Outbox<Self::Payload>) {
        (**self).init(id, input)
    }

    fn on_deliver(
        &self,
        id: ProcessId,
        local: &Self::Local,
        sender: ProcessId,
        payload: &Self::Payload,
    ) -> (Self::Local, Outbox<Self::Payload>) {
        (**self).on_deliver(id, local, sender, payload)
    }

    fn on_null(&self, id: ProcessId, local: &Self::Local) -> (Self::Local, Outbox<Self::Payload>) {
        (**self).on_null(id, local)
    }

    fn decided(&self, local: &Self::Local) -> Option<Bit> {
        (**self).decided(local)
    }
}

fn broadcast<M: Clone>(n: usize, from: ProcessId, msg: M, out: &mut Outbox<M>) {
    out.extend(
        ProcessId::all(n)
            .filter(|p| *p != from)
            .map(|p| (p, msg.clone())),
    );
}

/// Builds the initial global state for `inputs`.
pub fn make_initial<P: Protocol>(p: &P, inputs: &InitVector) -> Result<State<P>, ModelError> {
    if inputs.n() != p.n() {
        return Err(ModelError::ArityMismatch {
            expected: p.n(),
            got: inputs.n(),
        });
    }
    let mut locals = Vec::with_capacity(p.n());
    let mut sends = Vec::new();
    for id in ProcessId::all(p.n()) {
        let (local, out) = p.init(id, inputs.input(id));
        locals.push(local);
        sends.extend(out.into_iter().map(|(to, m)| (id, to, m)));
    }
    let mut s = GlobalState::with_locals(locals);
    sends.sort_by_key(|(from, to, _)| (*from, *to));
    for (from, to, m) in sends {
        if from == to || to.index() > p.n() {
            return Err(ModelError::InvalidSend {
                sender: from,
                receiver: to,
            });
        }
        s.enqueue(from, to, m);
    }
    Ok(s)
}

/// The ladder initialization `s_j`.
pub fn ladder_init<P: Protocol>(p: &P, j: usize) -> Result<State<P>, ModelError> {
    if j > p.n() {
        return Err(ModelError::OutOfRange { index: j, n: p.n() });
    }
    make_initial(p, &InitVector::ladder(p.n(), j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VotePhase {
    Report,
    Propose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VoteMsg {
    Report { round: u32, value: Bit },
    /// `None` proposes nothing (no majority seen).
    Propose { round: u32, value: Option<Bit> },
    Decided(Bit),
}

impl Canonical for VoteMsg {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            VoteMsg::Report { round, value } => {
                out.push(0);
                out.extend_from_slice(&round.to_le_bytes());
                value.encode(out);
            }
            VoteMsg::Propose { round, value } => {
                out.push(1);
                out.extend_from_slice(&round.to_le_bytes());
                value.encode(out);
            }
            VoteMsg::Decided(v) => {
                out.push(2);
                v.encode(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoteLocal {
    pub input: Bit,
    pub started: bool,
    pub estimate: Bit,
    pub round: u32,
    pub phase: VotePhase,
    /// Own proposal, meaningful in the propose phase.
    pub proposal: Option<Bit>,
    /// Values received for the current (round, phase), sorted.
    pub collected: Vec<Option<Bit>>,
    /// Values received for later phases, sorted.
    pub pending: Vec<(u32, VotePhase, Option<Bit>)>,
    pub decided: Option<Bit>,
}

impl Canonical for VoteLocal {
    fn encode(&self, out: &mut Vec<u8>) {
        self.input.encode(out);
        out.push(self.started as u8);
        self.estimate.encode(out);
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.phase as u8);
        self.proposal.encode(out);
        out.extend_from_slice(&(self.collected.len() as u32).to_le_bytes());
        for v in &self.collected {
            v.encode(out);
        }
        out.extend_from_slice(&(self.pending.len() as u32).to_le_bytes());
        for (r, ph, v) in &self.pending {
            out.extend_from_slice(&r.to_le_bytes());
            out.push(*ph as u8);
            v.encode(out);
        }
        self.decided.encode(out);
    }
}

/// Round-based quorum voting for a single crash failure.
///
/// Each round has two phases. In the report phase a process broadcasts its
/// estimate and waits for `n - 1` reports (its own included); it proposes a
/// value only if more than half of them agree, otherwise it proposes nothing.
/// In the propose phase it waits for `n - 1` proposals: two or more for the
/// same value decide it, one adopts it, and none falls back to 0. A decided
/// process broadcasts its decision once and ignores everything after; a
/// process receiving a decision adopts it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformVote {
    n: usize,
}

impl UniformVote {
    /// Needs `n >= 3`: with two processes a quorum of `n - 1` is the process
    /// itself and no two quorums intersect.
    pub fn new(n: usize) -> Result<UniformVote, ModelError> {
        if !(3..=crate::model::MAX_PROCESSES).contains(&n) {
            return Err(ModelError::InvalidConfig(format!(
                "uniform-vote needs 3 <= n, got {n}"
            )));
        }
        Ok(UniformVote { n })
    }

    fn start(&self, id: ProcessId, l: &mut VoteLocal, out: &mut Outbox<VoteMsg>) {
        if !l.started {
            l.started = true;
            broadcast(
                self.n,
                id,
                VoteMsg::Report {
                    round: l.round,
                    value: l.estimate,
                },
                out,
            );
        }
    }

    fn accept(l: &mut VoteLocal, round: u32, phase: VotePhase, value: Option<Bit>) {
        match (round, phase).cmp(&(l.round, l.phase)) {
            std::cmp::Ordering::Less => {}
            std::cmp::Ordering::Equal => {
                let at = l.collected.partition_point(|v| *v <= value);
                l.collected.insert(at, value);
            }
            std::cmp::Ordering::Greater => {
                let entry = (round, phase, value);
                let at = l.pending.partition_point(|e| *e <= entry);
                l.pending.insert(at, entry);
            }
        }
    }

    fn pull_pending(l: &mut VoteLocal) {
        let key = (l.round, l.phase);
        let (now, later): (Vec<_>, Vec<_>) = l
            .pending
            .drain(..)
            .partition(|(r, ph, _)| (*r, *ph) == key);
        l.pending = later;
        l.collected.extend(now.into_iter().map(|(_, _, v)| v));
        l.collected.sort();
    }

    fn advance(&self, id: ProcessId, l: &mut VoteLocal, out: &mut Outbox<VoteMsg>) {
        while l.decided.is_none() && l.collected.len() + 1 >= self.n - 1 {
            match l.phase {
                VotePhase::Report => {
                    let ones = l.collected.iter().filter(|v| **v == Some(Bit::One)).count()
                        + (l.estimate == Bit::One) as usize;
                    let total = l.collected.len() + 1;
                    let proposal = if 2 * ones > self.n {
                        Some(Bit::One)
                    } else if 2 * (total - ones) > self.n {
                        Some(Bit::Zero)
                    } else {
                        None
                    };
                    l.proposal = proposal;
                    l.phase = VotePhase::Propose;
                    l.collected.clear();
                    broadcast(
                        self.n,
                        id,
                        VoteMsg::Propose {
                            round: l.round,
                            value: proposal,
                        },
                        out,
                    );
                }
                VotePhase::Propose => {
                    let mut votes = l.collected.clone();
                    votes.push(l.proposal);
                    let count = |b: Bit| votes.iter().filter(|v| **v == Some(b)).count();
                    let (zeros, ones) = (count(Bit::Zero), count(Bit::One));
                    if let Some(v) = [(Bit::Zero, zeros), (Bit::One, ones)]
                        .into_iter()
                        .find(|(_, c)| *c >= 2)
                        .map(|(b, _)| b)
                    {
                        l.decided = Some(v);
                        l.collected.clear();
                        l.pending.clear();
                        broadcast(self.n, id, VoteMsg::Decided(v), out);
                        return;
                    }
                    l.estimate = if zeros > 0 {
                        Bit::Zero
                    } else if ones > 0 {
                        Bit::One
                    } else {
                        Bit::Zero
                    };
                    l.round += 1;
                    l.phase = VotePhase::Report;
                    l.proposal = None;
                    l.collected.clear();
                    broadcast(
                        self.n,
                        id,
                        VoteMsg::Report {
                            round: l.round,
                            value: l.estimate,
                        },
                        out,
                    );
                }
            }
            Self::pull_pending(l);
        }
    }
}

impl Protocol for UniformVote {
    type Local = VoteLocal;
    type Payload = VoteMsg;

    fn name(&self) -> &str {
        "uniform-vote"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn init(&self, _id: ProcessId, input: Bit) -> (VoteLocal, Outbox<VoteMsg>) {
        let local = VoteLocal {
            input,
            started: false,
            estimate: input,
            round: 1,
            phase: VotePhase::Report,
            proposal: None,
            collected: Vec::new(),
            pending: Vec::new(),
            decided: None,
        };
        (local, Vec::new())
    }

    fn on_deliver(
        &self,
        id: ProcessId,
        local: &VoteLocal,
        _sender: ProcessId,
        payload: &VoteMsg,
    ) -> (VoteLocal, Outbox<VoteMsg>) {
        let mut l = local.clone();
        let mut out = Vec::new();
        if l.decided.is_some() {
            return (l, out);
        }
        self.start(id, &mut l, &mut out);
        match *payload {
            VoteMsg::Decided(v) => {
                l.decided = Some(v);
                l.collected.clear();
                l.pending.clear();
                return (l, out);
            }
            VoteMsg::Report { round, value } => {
                Self::accept(&mut l, round, VotePhase::Report, Some(value))
            }
            VoteMsg::Propose { round, value } => {
                Self::accept(&mut l, round, VotePhase::Propose, value)
            }
        }
        self.advance(id, &mut l, &mut out);
        (l, out)
    }

    fn on_null(&self, id: ProcessId, local: &VoteLocal) -> (VoteLocal, Outbox<VoteMsg>) {
        let mut l = local.clone();
        let mut out = Vec::new();
        if l.decided.is_none() {
            self.start(id, &mut l, &mut out);
            self.advance(id, &mut l, &mut out);
        }
        (l, out)
    }

    fn decided(&self, local: &VoteLocal) -> Option<Bit> {
        local.decided
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FloodMsg(pub Bit);

impl Canonical for FloodMsg {
    fn encode(&self, out: &mut Vec<u8>) {
        self.0.encode(out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FloodLocal {
    pub input: Bit,
    pub started: bool,
    /// Bitmask of senders heard from.
    pub heard: u64,
    pub min: Bit,
    pub decided: Option<Bit>,
}

impl Canonical for FloodLocal {
    fn encode(&self, out: &mut Vec<u8>) {
        self.input.encode(out);
        out.push(self.started as u8);
        out.extend_from_slice(&self.heard.to_le_bytes());
        self.min.encode(out);
        self.decided.encode(out);
    }
}

/// Broadcast the input, then decide the minimum once every other input is in.
/// Terminates without failures and blocks if any process never starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FloodAll {
    n: usize,
}

impl FloodAll {
    pub fn new(n: usize) -> Result<FloodAll, ModelError> {
        if !(2..=crate::model::MAX_PROCESSES).contains(&n) {
            return Err(ModelError::InvalidConfig(format!(
                "flood-all needs 2 <= n, got {n}"
            )));
        }
        Ok(FloodAll { n })
    }

    fn start(&self, id: ProcessId, l: &mut FloodLocal, out: &mut Outbox<FloodMsg>) {
        if !l.started {
            l.started = true;
            broadcast(self.n, id, FloodMsg(l.input), out);
        }
    }
}

impl Protocol for FloodAll {
    type Local = FloodLocal;
    type Payload = FloodMsg;

    fn name(&self) -> &str {
        "flood-all"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn init(&self, _id: ProcessId, input: Bit) -> (FloodLocal, Outbox<FloodMsg>) {
        let local = FloodLocal {
            input,
            started: false,
            heard: 0,
            min: input,
            decided: None,
        };
        (local, Vec::new())
    }

    fn on_deliver(
        &self,
        id: ProcessId,
        local: &FloodLocal,
        sender: ProcessId,
        payload: &FloodMsg,
    ) -> (FloodLocal, Outbox<FloodMsg>) {
        let mut l = local.clone();
        let mut out = Vec::new();
        self.start(id, &mut l, &mut out);
        if l.decided.is_none() {
            l.heard |= 1 << sender.slot();
            l.min = l.min.min(payload.0);
            if l.heard.count_ones() as usize == self.n - 1 {
                l.decided = Some(l.min);
            }
        }
        (l, out)
    }

    fn on_null(&self, id: ProcessId, local: &FloodLocal) -> (FloodLocal, Outbox<FloodMsg>) {
        let mut l = local.clone();
        let mut out = Vec::new();
        self.start(id, &mut l, &mut out);
        (l, out)
    }

    fn decided(&self, local: &FloodLocal) -> Option<Bit> {
        local.decided
    }
}

/// Uninhabited: constant-decide never sends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoMsg {}

impl Canonical for NoMsg {
    fn encode(&self, _out: &mut Vec<u8>) {
        match *self {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstantLocal {
    pub input: Bit,
}

impl Canonical for ConstantLocal {
    fn encode(&self, out: &mut Vec<u8>) {
        self.input.encode(out);
    }
}

/// Every process decides its own input at initialization. Inconsistent on
/// any mixed input; used as the agreement checker's negative control.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantDecide {
    n: usize,
}

impl ConstantDecide {
    pub fn new(n: usize) -> Result<ConstantDecide, ModelError> {
        if !(2..=crate::model::MAX_PROCESSES).contains(&n) {
            return Err(ModelError::InvalidConfig(format!(
                "constant needs 2 <= n, got {n}"
            )));
        }
        Ok(ConstantDecide { n })
    }
}

impl Protocol for ConstantDecide {
    type Local = ConstantLocal;
    type Payload = NoMsg;

    fn name(&self) -> &str {
        "constant"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn init(&self, _id: ProcessId, input: Bit) -> (ConstantLocal, Outbox<NoMsg>) {
        (ConstantLocal { input }, Vec::new())
    }

    fn on_deliver(
        &self,
        _id: ProcessId,
        _local: &ConstantLocal,
        _sender: ProcessId,
        payload: &NoMsg,
    ) -> (ConstantLocal, Outbox<NoMsg>) {
        match *payload {}
    }

    fn on_null(&self, _id: ProcessId, local: &ConstantLocal) -> (ConstantLocal, Outbox<NoMsg>) {
        (*local, Vec::new())
    }

    fn decided(&self, local: &ConstantLocal) -> Option<Bit> {
        Some(local.input)
    }
}

/// Any built-in protocol, selectable by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Builtin {
    UniformVote(UniformVote),
    FloodAll(FloodAll),
    Constant(ConstantDecide),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiltinLocal {
    Vote(VoteLocal),
    Flood(FloodLocal),
    Constant(ConstantLocal),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiltinMsg {
    Vote(VoteMsg),
    Flood(FloodMsg),
}

impl Canonical for BuiltinLocal {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            BuiltinLocal::Vote(l) => l.encode(out),
            BuiltinLocal::Flood(l) => l.encode(out),
            BuiltinLocal::Constant(l) => l.encode(out),
        }
    }
}

impl Canonical for BuiltinMsg {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            BuiltinMsg::Vote(m) => m.encode(out),
            BuiltinMsg::Flood(m) => m.encode(out),
        }
    }
}

impl Builtin {
    pub const NAMES: [&'static str; 3] = ["uniform-vote", "flood-all", "constant"];

    pub fn from_name(name: &str, n: usize) -> Result<Builtin, ModelError> {
        match name {
            "uniform-vote" => Ok(Builtin::UniformVote(UniformVote::new(n)?)),
            "flood-all" => Ok(Builtin::FloodAll(FloodAll::new(n)?)),
            "constant" => Ok(Builtin::Constant(ConstantDecide::new(n)?)),
            other => Err(ModelError::InvalidConfig(format!(
                "unknown protocol {other:?}; expected one of {}",
                Builtin::NAMES.join(", ")
            ))),
        }
    }
}

fn wrap<L, M>(
    (l, out): (L, Outbox<M>),
    fl: impl Fn(L) -> BuiltinLocal,
    fm: impl Fn(M) -> BuiltinMsg,
) -> (BuiltinLocal, Outbox<BuiltinMsg>) {
    (fl(l), out.into_iter().map(|(to, m)| (to, fm(m))).collect())
}

const MISMATCH: &str = "local state belongs to a different protocol";

impl Protocol for Builtin {
    type Local = BuiltinLocal;
    type Payload = BuiltinMsg;

    fn name(&self) -> &str {
        match self {
            Builtin::UniformVote(p) => p.name(),
            Builtin::FloodAll(p) => p.name(),
            Builtin::Constant(p) => p.name(),
        }
    }

    fn n(&self) -> usize {
        match self {
            Builtin::UniformVote(p) => p.n(),
            Builtin::FloodAll(p) => p.n(),
            Builtin::Constant(p) => p.n(),
        }
    }

    fn init(&self, id: ProcessId, input: Bit) -> (BuiltinLocal, Outbox<BuiltinMsg>) {
        match self {
            Builtin::UniformVote(p) => wrap(p.init(id, input), BuiltinLocal::Vote, BuiltinMsg::Vote),
            Builtin::FloodAll(p) => wrap(p.init(id, input), BuiltinLocal::Flood, BuiltinMsg::Flood),
            Builtin::Constant(p) => {
                let (l, _) = p.init(id, input);
                (BuiltinLocal::Constant(l), Vec::new())
            }
        }
    }

    fn on_deliver(
        &self,
        id: ProcessId,
        local: &BuiltinLocal,
        sender: ProcessId,
        payload: &BuiltinMsg,
    ) -> (BuiltinLocal, Outbox<BuiltinMsg>) {
        match (self, local, payload) {
            (Builtin::UniformVote(p), BuiltinLocal::Vote(l), BuiltinMsg::Vote(m)) => wrap(
                p.on_deliver(id, l, sender, m),
                BuiltinLocal::Vote,
                BuiltinMsg::Vote,
            ),
            (Builtin::FloodAll(p), BuiltinLocal::Flood(l), BuiltinMsg::Flood(m)) => wrap(
                p.on_deliver(id, l, sender, m),
                BuiltinLocal::Flood,
                BuiltinMsg::Flood,
            ),
            _ => panic!("{MISMATCH}"),
        }
    }

    fn on_null(&self, id: ProcessId, local: &BuiltinLocal) -> (BuiltinLocal, Outbox<BuiltinMsg>) {
        match (self, local) {
            (Builtin::UniformVote(p), BuiltinLocal::Vote(l)) => {
                wrap(p.on_null(id, l), BuiltinLocal::Vote, BuiltinMsg::Vote)
            }
            (Builtin::FloodAll(p), BuiltinLocal::Flood(l)) => {
                wrap(p.on_null(id, l), BuiltinLocal::Flood, BuiltinMsg::Flood)
            }
            (Builtin::Constant(p), BuiltinLocal::Constant(l)) => {
                (BuiltinLocal::Constant(p.on_null(id, l).0), Vec::new())
            }
            _ => panic!("{MISMATCH}"),
        }
    }

    fn decided(&self, local: &BuiltinLocal) -> Option<Bit> {
        match local {
            BuiltinLocal::Vote(l) => l.decided,
            BuiltinLocal::Flood(l) => l.decided,
            BuiltinLocal::Constant(l) => Some(l.input),
        }
    }
}
