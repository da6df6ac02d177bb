// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints exactly one PASS or FAIL line, then exits nonzero if any failed.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use flp_adversary::adversary::{find_bivalent_init, one_step_extend, Variant};
use flp_adversary::model::{
    apply_action, first_decision, replay, run_schedule, Action, Bit, InitVector, ProcessId,
    ProcessSet, Schedule, State,
};
use flp_adversary::oracle::{
    certify_bivalent, certify_bivalent_via, check_agreement, check_agreement_from,
    find_blocking, v_possible, wt_excluding, AgreementOutcome, SearchBudget, SearchError,
    VPossible, Valence,
};
use flp_adversary::protocols::{make_initial, Builtin, Protocol};
use flp_adversary::trace::TraceFile;
use flp_adversary::verify::{commutativity_suite, commutativity_sweep, verify_trace};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:.1?}, limit {limit:?}")
    })
}

fn proto(name: &str, n: usize) -> Builtin {
    Builtin::from_name(name, n).expect("valid protocol")
}

/// Decision values reachable from `s` using only `allowed`, by plain
/// breadth-first enumeration. The flag is set when the bound cut the
/// enumeration short.
fn reachable_decisions(
    p: &Builtin,
    s: &State<Builtin>,
    allowed: ProcessSet,
    depth: Option<usize>,
) -> (BTreeSet<Bit>, bool) {
    let mut seen: HashSet<State<Builtin>> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut values = BTreeSet::new();
    let mut cut = false;
    seen.insert(s.clone());
    queue.push_back((s.clone(), 0usize));
    while let Some((st, d)) = queue.pop_front() {
        for l in st.locals() {
            if let Some(v) = p.decided(l) {
                values.insert(v);
            }
        }
        let succ = st.enabled_actions_in(allowed);
        if depth.is_some_and(|limit| d >= limit) {
            if succ
                .iter()
                .any(|a| !seen.contains(&apply_action(p, &st, *a).unwrap()))
            {
                cut = true;
            }
            continue;
        }
        for a in succ {
            let next = apply_action(p, &st, a).unwrap();
            if seen.insert(next.clone()) {
                queue.push_back((next, d + 1));
            }
        }
        assert!(seen.len() < 5_000_000, "enumeration too large");
    }
    (values, cut)
}

fn random_state(p: &Builtin, rng: &mut ChaCha8Rng, max_len: usize) -> State<Builtin> {
    let inits: Vec<InitVector> = InitVector::all(p.n()).collect();
    let mut s = make_initial(p, inits.choose(rng).unwrap()).unwrap();
    for _ in 0..rng.random_range(0..=max_len) {
        let Some(&a) = s.enabled_actions().choose(rng) else {
            break;
        };
        s = apply_action(p, &s, a).unwrap();
    }
    s
}

fn responsiveness() -> Verdict {
    let start = Instant::now();
    let p = proto("uniform-vote", 3);
    let mut ok = 0;
    for v in Bit::BOTH {
        let s = make_initial(&p, &InitVector::uniform(3, v)).unwrap();
        for i in ProcessId::all(3) {
            let w = wt_excluding(&p, &s, i, SearchBudget::default()).map_err(|e| e.to_string())?;
            ensure(w.value == v, || format!("uniform {v} excluding {i} decided {}", w.value))?;
            ok += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{ok}/6 witnesses decide their uniform input ({:.2?})", start.elapsed()))
}

fn bivalent_initialization() -> Verdict {
    let start = Instant::now();
    let p = proto("uniform-vote", 3);
    let budget = SearchBudget::default();
    let bi = find_bivalent_init(&p, budget).map_err(|e| e.to_string())?;
    ensure(bi.k >= 1, || "k = 0".into())?;
    for v in Bit::BOTH {
        let r = v_possible(&p, &bi.state, v, budget).map_err(|e| e.to_string())?;
        ensure(matches!(r, VPossible::Possible(_)), || {
            format!("{v} is not possible from b_0")
        })?;
    }
    let brute = (0..=3)
        .find(|&j| {
            let s = make_initial(&p, &InitVector::ladder(3, j)).unwrap();
            reachable_decisions(&p, &s, ProcessSet::all(3), Some(12))
                .0
                .contains(&Bit::One)
        })
        .ok_or("no rung admits a 1 decision")?;
    ensure(bi.k == brute, || format!("k = {}, enumeration gives {brute}", bi.k))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "k = {} ({}), both values possible, matches enumeration ({:.2?})",
        bi.k,
        bi.init,
        start.elapsed()
    ))
}

fn one_step_extension() -> Verdict {
    let p = proto("uniform-vote", 3);
    let budget = SearchBudget::default();
    let bi = find_bivalent_init(&p, budget).map_err(|e| e.to_string())?;
    let mut certified = 0;
    for variant in [Variant::Program, Variant::Fork] {
        for i in ProcessId::all(3) {
            let ext = one_step_extend(&p, variant, &bi.state, &bi.fork, i, budget)
                .map_err(|e| format!("{variant} / {i}: {e}"))?;
            let v = certify_bivalent_via(&p, ext.state(), i, budget)
                .map_err(|e| format!("{variant} / {i}: {e}"))?;
            ensure(matches!(v, Valence::Bivalent(_)), || {
                format!("{variant} / {i}: extension is not bivalent via Q_{i}")
            })?;
            certified += 1;
        }
    }
    Ok(format!("{certified}/6 extensions certified bivalent via Q_i"))
}

fn run_attack(out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_flp-adversary"))
        .args([
            "attack",
            "--protocol",
            "uniform-vote",
            "--n",
            "3",
            "--steps",
            "10000",
            "--out",
        ])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.code() == Some(0), || {
        format!(
            "attack exited {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        )
    })?;
    Ok(start.elapsed())
}

fn indecisive_run(trace_path: &Path) -> Verdict {
    let elapsed = run_attack(trace_path)?;
    within(elapsed, Duration::from_secs(300))?;
    let text = std::fs::read_to_string(trace_path).map_err(|e| e.to_string())?;
    let trace = TraceFile::parse(&text).map_err(|e| e.to_string())?;
    ensure(trace.steps.len() == 10_000, || format!("{} steps", trace.steps.len()))?;
    let p = proto("uniform-vote", 3);
    let mut s = make_initial(&p, &trace.init_vector().unwrap()).unwrap();
    let mut states = vec![s.clone()];
    for r in &trace.steps {
        let mut acts = r.extension_actions.clone();
        acts.push(r.applied_action);
        s = run_schedule(&p, &s, &Schedule::new(acts))
            .map_err(|e| format!("step {}: {e}", r.index))?
            .end()
            .clone();
        ensure(first_decision(&p, &s).is_none() && r.decided.is_empty(), || {
            format!("decision at step {}", r.index)
        })?;
        if states.len() < 20 {
            states.push(s.clone());
        }
    }
    for (w, window) in trace.steps.chunks(3).enumerate() {
        let turns: BTreeSet<usize> = window
            .iter()
            .filter(|r| r.applied_action.process() == r.turn_process)
            .map(|r| r.turn_process.index())
            .collect();
        ensure(turns.len() == window.len(), || format!("window {w} is unfair"))?;
    }
    for (k, st) in states.iter().enumerate() {
        let v = certify_bivalent(&p, st, SearchBudget::default()).map_err(|e| e.to_string())?;
        ensure(matches!(v, Valence::Bivalent(_)), || format!("state {k} not bivalent"))?;
    }
    Ok(format!(
        "10000 undecided states, fair windows, first {} states bivalent ({:.1?})",
        states.len(),
        elapsed
    ))
}

fn determinism(first: &Path, second: &Path) -> Verdict {
    run_attack(second)?;
    let a = std::fs::read(first).map_err(|e| e.to_string())?;
    let b = std::fs::read(second).map_err(|e| e.to_string())?;
    ensure(a == b, || "trace files differ".into())?;
    Ok(format!("two runs produced identical {}-byte traces", a.len()))
}

fn commutativity() -> Verdict {
    let start = Instant::now();
    let mut pairs = 0;
    for name in ["flood-all", "constant"] {
        let v = commutativity_sweep(&proto(name, 2), 3);
        ensure(v.holds(), || format!("{name}: {:?}", v.counterexamples.first()))?;
        pairs += v.pairs_checked;
    }
    let v = commutativity_suite(&proto("uniform-vote", 3), 100, 0x5eed, 6);
    ensure(v.holds(), || format!("uniform-vote: {:?}", v.counterexamples.first()))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{pairs} exhaustive pairs at n=2 and {} seeded trials at n=3, no counterexample ({:.2?})",
        v.pairs_checked,
        start.elapsed()
    ))
}

fn blocking() -> Verdict {
    let budget = SearchBudget::default();
    let flood = proto("flood-all", 3);
    let b = find_blocking(&flood, budget)
        .map_err(|e| e.to_string())?
        .ok_or("flood-all: no blocking pair")?;
    let start = make_initial(&flood, &b.init).unwrap();
    let path = replay(&flood, b.path.actions(), &start).map_err(|e| e.to_string())?;
    ensure(path.end() == b.state(), || "path does not reach the state".into())?;
    let q = ProcessSet::q_without(3, b.excluded);
    let (values, cut) = reachable_decisions(&flood, b.state(), q, None);
    ensure(!cut && values.is_empty(), || {
        format!("closure without {} decides {values:?}", b.excluded)
    })?;

    let uv = proto("uniform-vote", 3);
    let verdict = match find_blocking(&uv, budget) {
        Ok(None) => "none exists".to_string(),
        Err(SearchError::Unknown { visited, .. }) => format!("none within {visited} states"),
        Ok(Some(b)) => return Err(format!("uniform-vote blocks at {} excluding {}", b.init, b.excluded)),
        Err(e) => return Err(e.to_string()),
    };
    Ok(format!(
        "flood-all blocks at {} excluding {} (closure {} states re-enumerated); uniform-vote: {verdict}",
        b.init, b.excluded, b.closure_states
    ))
}

fn agreement() -> Verdict {
    let mut mixed = 0;
    for n in 2..=3 {
        let p = proto("constant", n);
        for iv in InitVector::all(n).filter(|iv| !iv.is_uniform()) {
            let out = check_agreement_from(&p, &iv, SearchBudget::default().with_depth(1))
                .map_err(|e| e.to_string())?;
            match out {
                AgreementOutcome::Violation(v) if v.execution.len() <= 1 => mixed += 1,
                AgreementOutcome::Violation(v) => {
                    return Err(format!("{iv}: violation at depth {}", v.execution.len()))
                }
                AgreementOutcome::Clean { .. } => return Err(format!("{iv}: no violation")),
            }
        }
    }
    let out = check_agreement(&proto("uniform-vote", 3), SearchBudget::default())
        .map_err(|e| e.to_string())?;
    match out {
        AgreementOutcome::Clean { depth, states, .. } if depth >= 12 => Ok(format!(
            "constant violates on {mixed}/{mixed} mixed inputs; uniform-vote clean to depth {depth} ({states} states)"
        )),
        other => Err(format!("uniform-vote: {other:?}")),
    }
}

fn witness_soundness() -> Verdict {
    let budget = SearchBudget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let p = proto("uniform-vote", 3);
    let mut replayed = 0;
    for _ in 0..50 {
        let s = random_state(&p, &mut rng, 10);
        for i in ProcessId::all(3) {
            let w = match wt_excluding(&p, &s, i, budget) {
                Ok(w) => w,
                Err(e) => return Err(e.to_string()),
            };
            let run = replay(&p, w.schedule(), &s).map_err(|e| e.to_string())?;
            ensure(run.end().digest() == w.end_digest, || "end digest differs".into())?;
            ensure(first_decision(&p, run.end()) == Some((w.decider, w.value)), || {
                "replayed decision differs".into()
            })?;
            replayed += 1;
        }
    }

    // Every decision value of flood-all is the minimum input, so an
    // unrestricted enumeration answers v-possibility wherever no witness
    // set is blocked; blocked answers are checked by enumerating the closure.
    let q = proto("flood-all", 2);
    let (mut definite, mut blocked) = (0, 0);
    for _ in 0..50 {
        let s = random_state(&q, &mut rng, 6);
        let (values, _) = reachable_decisions(&q, &s, ProcessSet::all(2), Some(6));
        for v in Bit::BOTH {
            match v_possible(&q, &s, v, budget) {
                Ok(r) => {
                    ensure(r.is_possible() == values.contains(&v), || {
                        format!("v_possible({v}) = {} but enumeration found {values:?}", r.is_possible())
                    })?;
                    definite += 1;
                }
                Err(SearchError::Blocked { excluded }) => {
                    let (inner, cut) =
                        reachable_decisions(&q, &s, ProcessSet::q_without(2, excluded), None);
                    ensure(!cut && inner.is_empty(), || {
                        format!("reported blocked without {excluded}, closure decides {inner:?}")
                    })?;
                    blocked += 1;
                }
                Err(e) => return Err(e.to_string()),
            }
        }
    }
    Ok(format!(
        "{replayed} witnesses replayed; v_possible agrees with enumeration on {definite} queries, {blocked} blocked queries confirmed"
    ))
}

fn trace_verification(trace_path: &Path) -> Verdict {
    let p = proto("uniform-vote", 3);
    let text = std::fs::read_to_string(trace_path).map_err(|e| e.to_string())?;
    let trace = TraceFile::parse(&text).map_err(|e| e.to_string())?;
    let cert = verify_trace(&trace, &p, SearchBudget::default(), 20).map_err(|e| e.to_string())?;
    ensure(cert.is_clean() && cert.steps_checked == 10_000, || {
        format!("clean trace rejected: {:?}", cert.violations.first())
    })?;

    // Change the sender of one applied delivery.
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let (line, index) = lines
        .iter()
        .enumerate()
        .skip(1000)
        .find_map(|(k, l)| {
            let r: serde_json::Value = serde_json::from_str(l).ok()?;
            let a: Action = r["applied_action"].as_str()?.parse().ok()?;
            matches!(a, Action::Deliver { .. }).then_some((k, r["index"].as_u64()? as usize))
        })
        .ok_or("no applied delivery to mutate")?;
    let mut record: serde_json::Value = serde_json::from_str(&lines[line]).unwrap();
    let Action::Deliver { receiver, sender } =
        record["applied_action"].as_str().unwrap().parse::<Action>().unwrap()
    else {
        unreachable!()
    };
    let other = ProcessId::all(3)
        .find(|q| *q != receiver && *q != sender)
        .unwrap();
    record["applied_action"] = Action::Deliver {
        receiver,
        sender: other,
    }
    .to_string()
    .into();
    lines[line] = record.to_string();
    let mutated = TraceFile::parse(&(lines.join("\n") + "\n")).map_err(|e| e.to_string())?;
    let bad = verify_trace(&mutated, &p, SearchBudget::default(), 20).map_err(|e| e.to_string())?;
    ensure(bad.violations.len() == 1, || {
        format!("{} violations for one mutation", bad.violations.len())
    })?;
    ensure(bad.violations[0].step == Some(index), || {
        format!("violation at {:?}, mutated step {index}", bad.violations[0].step)
    })?;
    Ok(format!(
        "clean trace accepted; mutated step {index} rejected with one violation ({})",
        bad.violations[0].detail
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let first = dir.path().join("run1.jsonl");
    let second = dir.path().join("run2.jsonl");

    let criteria: Vec<(&str, Box<dyn FnOnce() -> Verdict + '_>)> = vec![
        ("responsiveness", Box::new(responsiveness)),
        ("bivalent initialization", Box::new(bivalent_initialization)),
        ("one-step extension, both variants", Box::new(one_step_extension)),
        ("indecisive 10000-step run", Box::new(|| indecisive_run(&first))),
        ("determinism", Box::new(|| determinism(&first, &second))),
        ("commutativity", Box::new(commutativity)),
        ("blocking", Box::new(blocking)),
        ("agreement checking", Box::new(agreement)),
        ("witness soundness", Box::new(witness_soundness)),
        ("trace verification", Box::new(|| trace_verification(&first))),
    ];

    let mut failed = 0;
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
