// SPDX-License-Identifier: Apache-2.0

use flp_adversary::model::{
    apply_action, commute_join, first_decision, replay, run_schedule, Action, InitVector,
    ProcessId, ProcessSet, Schedule, State,
};
use flp_adversary::oracle::{wt_excluding, SearchBudget};
use flp_adversary::protocols::{make_initial, Builtin};
use proptest::prelude::*;

fn protocols() -> impl Strategy<Value = Builtin> {
    prop_oneof![
        Just(Builtin::from_name("uniform-vote", 3).unwrap()),
        Just(Builtin::from_name("uniform-vote", 4).unwrap()),
        Just(Builtin::from_name("flood-all", 2).unwrap()),
        Just(Builtin::from_name("flood-all", 3).unwrap()),
        Just(Builtin::from_name("constant", 3).unwrap()),
    ]
}

/// Follows `choices` through enabled actions restricted to `allowed`.
fn walk(p: &Builtin, s: &State<Builtin>, allowed: ProcessSet, choices: &[u16]) -> Schedule {
    let mut cur = s.clone();
    let mut sched = Schedule::default();
    for c in choices {
        let enabled = cur.enabled_actions_in(allowed);
        if enabled.is_empty() {
            break;
        }
        let a = enabled[*c as usize % enabled.len()];
        cur = apply_action(p, &cur, a).unwrap();
        sched.push(a);
    }
    sched
}

fn start(p: &Builtin, bits: u64) -> State<Builtin> {
    let n = flp_adversary::protocols::Protocol::n(p);
    let iv: InitVector = InitVector::all(n).nth((bits % (1 << n)) as usize).unwrap();
    make_initial(p, &iv).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn steps_are_deterministic(p in protocols(), bits: u64, choices in prop::collection::vec(any::<u16>(), 0..30)) {
        let s = start(&p, bits);
        let sched = walk(&p, &s, ProcessSet::all(s.n()), &choices);
        let a = run_schedule(&p, &s, &sched).unwrap();
        let b = run_schedule(&p, &s, &sched).unwrap();
        prop_assert_eq!(a.end().digest(), b.end().digest());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn replay_splits_at_any_point(p in protocols(), bits: u64, choices in prop::collection::vec(any::<u16>(), 0..30), cut: prop::sample::Index) {
        let s = start(&p, bits);
        let sched = walk(&p, &s, ProcessSet::all(s.n()), &choices);
        let run = run_schedule(&p, &s, &sched).unwrap();
        let k = cut.index(run.len() + 1);
        let joined = run.prefix(k).concat(&run.suffix(k));
        prop_assert_eq!(&joined, &run);
        let tail = replay(&p, run.suffix(k).actions(), &run.states()[k]).unwrap();
        prop_assert_eq!(tail.end(), run.end());
    }

    #[test]
    fn enabled_actions_are_sorted_and_enabled(p in protocols(), bits: u64, choices in prop::collection::vec(any::<u16>(), 0..20)) {
        let s = start(&p, bits);
        let sched = walk(&p, &s, ProcessSet::all(s.n()), &choices);
        let end = run_schedule(&p, &s, &sched).unwrap().end().clone();
        let enabled = end.enabled_actions();
        prop_assert!(enabled.windows(2).all(|w| w[0] < w[1]));
        for a in &enabled {
            prop_assert!(end.is_enabled(*a));
            prop_assert_eq!(a.to_string().parse::<Action>().unwrap(), *a);
        }
        // Every process can always take a null step.
        for q in ProcessId::all(end.n()) {
            let null = Action::Null { process: q };
            prop_assert!(enabled.contains(&null));
        }
    }

    #[test]
    fn disjoint_schedules_commute(
        p in protocols(),
        bits: u64,
        prefix in prop::collection::vec(any::<u16>(), 0..12),
        mask: u64,
        left in prop::collection::vec(any::<u16>(), 0..8),
        right in prop::collection::vec(any::<u16>(), 0..8),
    ) {
        let s0 = start(&p, bits);
        let n = s0.n();
        let pre = walk(&p, &s0, ProcessSet::all(n), &prefix);
        let s = run_schedule(&p, &s0, &pre).unwrap().end().clone();
        let l: ProcessSet = ProcessId::all(n).filter(|q| mask >> q.slot() & 1 == 1).collect();
        let r: ProcessSet = ProcessId::all(n).filter(|q| !l.contains(*q)).collect();
        let a = walk(&p, &s, l, &left);
        let b = walk(&p, &s, r, &right);
        let joined = commute_join(&p, &s, &a, &b).unwrap();
        let ab = run_schedule(&p, &s, &a.then(&b)).unwrap();
        prop_assert_eq!(ab.end(), &joined);
    }

    #[test]
    fn digest_agrees_with_equality(p in protocols(), bits: u64, x in prop::collection::vec(any::<u16>(), 0..10), y in prop::collection::vec(any::<u16>(), 0..10)) {
        let s = start(&p, bits);
        let all = ProcessSet::all(s.n());
        let a = run_schedule(&p, &s, &walk(&p, &s, all, &x)).unwrap().end().clone();
        let b = run_schedule(&p, &s, &walk(&p, &s, all, &y)).unwrap().end().clone();
        prop_assert_eq!(a == b, a.digest() == b.digest());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn witnesses_are_restricted_and_replayable(bits: u64, choices in prop::collection::vec(any::<u16>(), 0..10), i in 1usize..=3) {
        let p = Builtin::from_name("uniform-vote", 3).unwrap();
        let s0 = start(&p, bits);
        let sched = walk(&p, &s0, ProcessSet::all(3), &choices);
        let s = run_schedule(&p, &s0, &sched).unwrap().end().clone();
        let excluded = ProcessId::new(i);
        let w = wt_excluding(&p, &s, excluded, SearchBudget::default()).unwrap();
        prop_assert!(w.schedule().avoids(excluded));
        let run = replay(&p, w.schedule(), &s).unwrap();
        prop_assert_eq!(run.end().digest(), w.end_digest);
        prop_assert_eq!(first_decision(&p, run.end()), Some((w.decider, w.value)));
        // No strict prefix decides.
        for st in &run.states()[..run.len()] {
            prop_assert!(first_decision(&p, st).is_none());
        }
    }
}
