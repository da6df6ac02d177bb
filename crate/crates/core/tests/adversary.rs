// SPDX-License-Identifier: Apache-2.0

use flp_adversary::adversary::{
    find_bivalent_init, fork_modify, one_step_extend_fork, Adversary, ForkModification, Variant,
};
use flp_adversary::model::{first_decision, is_undecided, Bit, InitVector, ProcessId};
use flp_adversary::oracle::{certify_bivalent, wt_excluding, Fork, SearchBudget, Valence};
use flp_adversary::protocols::{make_initial, Builtin};

fn uv(n: usize) -> Builtin {
    Builtin::from_name("uniform-vote", n).unwrap()
}

#[test]
fn ladder_top_decides_one_for_every_quorum() {
    for n in 3..=4 {
        let p = uv(n);
        let s = make_initial(&p, &InitVector::ladder(n, n)).unwrap();
        for i in ProcessId::all(n) {
            let w = wt_excluding(&p, &s, i, SearchBudget::default()).unwrap();
            assert_eq!(w.value, Bit::One);
        }
    }
}

#[test]
fn fork_modification_shrinks_or_completes() {
    let p = uv(3);
    let b = SearchBudget::default();
    let bi = find_bivalent_init(&p, b).unwrap();
    let mut exercised = 0;
    for i in ProcessId::all(3) {
        let gamma = wt_excluding(&p, &bi.state, i, b).unwrap();
        let v = gamma.value.flip();
        let mut fork = Fork::new(bi.fork.branch(v).clone(), v, gamma.execution);
        let start_len = fork.i_len(i);
        let mut rounds = 0;
        while fork.i_len(i) > 0 {
            rounds += 1;
            exercised += 1;
            let before = fork.i_len(i);
            match fork_modify(&p, &fork, i, b).unwrap().0 {
                ForkModification::Reduced(next) => {
                    assert!(next.i_len(i) < before);
                    assert_eq!(next.beta, fork.beta);
                    fork = next;
                }
                ForkModification::Full { prefix, fork: full } => {
                    assert!(full.is_full(i));
                    assert_eq!(prefix.end(), &full.origin);
                    let dz = first_decision(&p, full.branch(Bit::Zero).end()).unwrap().1;
                    let d1 = first_decision(&p, full.branch(Bit::One).end()).unwrap().1;
                    assert_eq!((dz, d1), (Bit::Zero, Bit::One));
                    break;
                }
            }
        }
        assert!(rounds <= start_len.max(1));
        let ext = one_step_extend_fork(&p, &bi.state, &bi.fork, i, b).unwrap();
        assert!(ext.modifications <= start_len);
    }
    assert!(exercised > 0, "no fork needed modification");
}

#[test]
fn both_variants_keep_a_full_fork_and_bivalence() {
    let p = uv(3);
    let b = SearchBudget::default();
    let bi = find_bivalent_init(&p, b).unwrap();
    for variant in [Variant::Program, Variant::Fork] {
        let mut adv = Adversary::from_init(&p, b, variant, bi.clone());
        for k in 0..9 {
            let step = adv.nth_step(k).unwrap().clone();
            let fork = &adv.snapshot().fork;
            assert_eq!(fork.origin, step.state);
            assert!(fork.is_full(step.process), "{variant} step {k}");
            let v = certify_bivalent(&p, &step.state, b).unwrap();
            assert!(matches!(v, Valence::Bivalent(_)), "{variant} step {k}");
        }
    }
}

#[test]
fn four_processes_stay_undecided() {
    // At n = 4 the witness depth grows with the channel backlog.
    let p = uv(4);
    let mut adv = Adversary::new(&p, SearchBudget::default().with_depth(45), Variant::Program).unwrap();
    adv.nth_step(19).unwrap();
    assert_eq!(adv.snapshot().round, 5);
    for (k, s) in adv.steps().iter().enumerate() {
        assert_eq!(s.process.index(), k % 4 + 1);
        assert!(is_undecided(&p, &s.state));
    }
}

#[test]
fn snapshot_history_matches_steps() {
    let p = uv(3);
    let mut adv = Adversary::new(&p, SearchBudget::default(), Variant::Fork).unwrap();
    adv.nth_step(14).unwrap();
    let snap = adv.snapshot().clone();
    assert_eq!(snap.history.len(), 15);
    assert_eq!(snap.next_process, ProcessId::new(1));
    for (h, s) in snap.history.iter().zip(adv.steps()) {
        assert_eq!(h.0, s.action);
        assert_eq!(h.1, s.state.digest());
    }
    assert_eq!(snap.current, adv.steps()[14].state);
    assert_eq!(snap.fork.origin, snap.current);
}

#[test]
fn nth_step_is_reproducible() {
    let p = uv(3);
    let b = SearchBudget::default();
    let mut a = Adversary::new(&p, b, Variant::Program).unwrap();
    let mut c = Adversary::new(&p, b, Variant::Program).unwrap();
    let late = a.nth_step(20).unwrap().clone();
    for _ in 0..=20 {
        c.next_step().unwrap();
    }
    assert_eq!(c.steps()[20], late);
    assert_eq!(a.initial_state(), &find_bivalent_init(&p, b).unwrap().state);
}
