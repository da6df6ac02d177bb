// SPDX-License-Identifier: Apache-2.0

//! Command-line driver.
//!
//! Exit codes: 0 definitive result, 1 usage error, 2 no verdict within the
//! budget, 3 certified negative (blocked witness, failed verification).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::adversary::{find_bivalent_init, Adversary, AdversaryError, ForkMode, Variant};
use crate::model::{first_decision, InitVector, ProcessId, State};
use crate::oracle::{
    certify_bivalent, check_agreement, find_blocking, wt_excluding, AgreementOutcome,
    SearchBudget, SearchError, Valence,
};
use crate::protocols::{make_initial, Builtin, Protocol};
use crate::trace::TraceFile;
use crate::verify::{commutativity_suite, commutativity_sweep, verify_trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "flp-adversary", version, about = "Adversarial scheduler for asynchronous consensus protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    /// uniform-vote, flood-all or constant.
    #[arg(long)]
    protocol: String,
    #[arg(long)]
    n: usize,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    #[arg(long, default_value_t = 12)]
    budget_depth: usize,
    #[arg(long, default_value_t = 2_000_000)]
    budget_states: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an execution in which no process decides.
    Attack {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value = "program")]
        variant: Variant,
        #[command(flatten)]
        budget: BudgetArgs,
        /// States, counting the initial one, to certify bivalent.
        #[arg(long, default_value_t = 20)]
        certify_prefix: usize,
        /// Trace file to write.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Compute wt(s, Q_i) from an initialization.
    Witness {
        #[command(flatten)]
        proto: ProtocolArgs,
        /// Input bits, process 1 first.
        #[arg(long)]
        init: String,
        #[arg(long)]
        exclude: usize,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        json: bool,
    },
    /// Search for a reachable state on which some n-1 processes cannot decide.
    Blocking {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        json: bool,
    },
    /// Search for two processes deciding different values.
    Agreement {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        json: bool,
    },
    /// Find a bivalent initialization on the input ladder.
    InitSearch {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        json: bool,
    },
    /// Replay and certify a trace file.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 20)]
        certify_prefix: usize,
        /// Overrides the budget recorded in the trace header.
        #[arg(long)]
        budget_depth: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Check that disjoint schedules commute.
    Commute {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// Enumerate every pair instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        json: bool,
    },
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn unknown(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_UNKNOWN,
        message: message.into(),
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let mut io = Io { out, err };
    match dispatch(cli.command, &mut io) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(io.err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, io: &mut Io<'_>) -> Outcome {
    match cmd {
        Command::Attack {
            proto,
            steps,
            variant,
            budget,
            certify_prefix,
            out,
            json,
        } => attack(
            &protocol(&proto)?,
            steps,
            variant,
            budget_of(&budget)?,
            certify_prefix,
            out,
            json,
            io,
        ),
        Command::Witness {
            proto,
            init,
            exclude,
            budget,
            json,
        } => witness(&protocol(&proto)?, &init, exclude, budget_of(&budget)?, json, io),
        Command::Blocking {
            proto,
            budget,
            json,
        } => blocking(&protocol(&proto)?, budget_of(&budget)?, json, io),
        Command::Agreement {
            proto,
            budget,
            json,
        } => agreement(&protocol(&proto)?, budget_of(&budget)?, json, io),
        Command::InitSearch {
            proto,
            budget,
            json,
        } => init_search(&protocol(&proto)?, budget_of(&budget)?, json, io),
        Command::Verify {
            trace,
            certify_prefix,
            budget_depth,
            json,
        } => verify(trace, certify_prefix, budget_depth, json, io),
        Command::Commute {
            proto,
            trials,
            seed,
            depth,
            exhaustive,
            json,
        } => commute(&protocol(&proto)?, trials, seed, depth, exhaustive, json, io),
    }
}

fn protocol(args: &ProtocolArgs) -> Result<Builtin, Failure> {
    Builtin::from_name(&args.protocol, args.n).map_err(|e| usage(e.to_string()))
}

fn budget_of(args: &BudgetArgs) -> Result<SearchBudget, Failure> {
    SearchBudget::new(args.budget_depth, args.budget_states).map_err(|e| usage(e.to_string()))
}

fn emit(io: &mut Io<'_>, json: bool, value: Value, text: String) -> Result<(), Failure> {
    let res = if json {
        writeln!(io.out, "{value}")
    } else {
        write!(io.out, "{text}")
    };
    res.map_err(|e| unknown(format!("writing output: {e}")))
}

fn search_failure(e: SearchError) -> Failure {
    match e {
        SearchError::InvalidBudget | SearchError::InvalidQuorum { .. } => usage(e.to_string()),
        _ => unknown(e.to_string()),
    }
}

fn adversary_failure(e: AdversaryError) -> Failure {
    match e {
        AdversaryError::PreconditionViolated(_) => usage(e.to_string()),
        AdversaryError::Search(s) => search_failure(s),
        other => unknown(other.to_string()),
    }
}

#[allow(clippy::too_many_arguments)]
fn attack(
    p: &Builtin,
    steps: usize,
    variant: Variant,
    budget: SearchBudget,
    certify_prefix: usize,
    out: Option<PathBuf>,
    json: bool,
    io: &mut Io<'_>,
) -> Outcome {
    // A protocol that cannot be certified consistent within budget still runs;
    // the summary says how far consistency was checked.
    let consistency = match check_agreement(p, budget) {
        Ok(AgreementOutcome::Violation(v)) => {
            return Err(unknown(format!(
                "agreement check failed: from {} processes {} and {} decide differently after {}",
                v.init,
                v.zero,
                v.one,
                v.execution.actions()
            )));
        }
        Ok(AgreementOutcome::Clean {
            depth, exhaustive, ..
        }) => json!({ "certified": true, "depth": depth, "exhaustive": exhaustive }),
        Err(SearchError::InvalidBudget) => return Err(usage(SearchError::InvalidBudget.to_string())),
        Err(e) => {
            let _ = writeln!(io.err, "warning: agreement not certified: {e}");
            json!({ "certified": false, "depth": null, "exhaustive": false })
        }
    };
    let consistency_text = match (consistency["certified"].as_bool(), consistency["depth"].as_u64()) {
        (Some(true), Some(d)) if consistency["exhaustive"] == true => {
            format!("agreement certified exhaustively (depth {d})")
        }
        (Some(true), Some(d)) => format!("agreement certified to depth {d}"),
        _ => "agreement not certified within budget".to_string(),
    };
    let mut adv = Adversary::new(p, budget, variant).map_err(adversary_failure)?;
    for k in 0..steps {
        adv.nth_step(k).map_err(|e| {
            let round = k / p.n();
            let f = adversary_failure(e);
            Failure {
                message: format!("step {k} (round {round}): {}", f.message),
                ..f
            }
        })?;
    }

    let mut certified = 0;
    let prefix: Vec<&State<Builtin>> = std::iter::once(adv.initial_state())
        .chain(adv.steps().iter().map(|s| &s.state))
        .take(certify_prefix)
        .collect();
    for (k, s) in prefix.iter().enumerate() {
        match certify_bivalent(p, s, budget).map_err(search_failure)? {
            Valence::Bivalent(_) => certified += 1,
            _ => return Err(unknown(format!("state {k} of the prefix is not bivalent"))),
        }
    }

    let trace = TraceFile::from_adversary(&adv);
    if let Some(path) = &out {
        let file = File::create(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        trace
            .write_to(BufWriter::new(file))
            .map_err(|e| unknown(e.to_string()))?;
    }

    let count = |m: ForkMode| trace.footer.fork_modes.iter().filter(|x| **x == m).count();
    let bi = adv.bivalent_init();
    let value = json!({
        "protocol": p.name(),
        "n": p.n(),
        "variant": variant,
        "init_vector": bi.init.to_string(),
        "k": bi.k,
        "steps": trace.footer.steps,
        "rounds_completed": trace.footer.rounds_completed,
        "states_visited": adv.states_visited(),
        "fork_modes": {
            "commute": count(ForkMode::Commute),
            "witness": count(ForkMode::Witness),
            "search": count(ForkMode::Search),
        },
        "certified_prefix": certified,
        "agreement": consistency,
        "trace": out.as_ref().map(|p| p.display().to_string()),
    });
    let mut text = format!(
        "protocol {} n={} variant={}\n\
         bivalent initialization {} (k={})\n\
         steps {}, rounds {}, states visited {}\n\
         fork re-derivation: commute {}, witness {}, search {}\n\
         certified bivalent: {certified}/{} states\n\
         {consistency_text}\n",
        p.name(),
        p.n(),
        variant,
        bi.init,
        bi.k,
        trace.footer.steps,
        trace.footer.rounds_completed,
        adv.states_visited(),
        count(ForkMode::Commute),
        count(ForkMode::Witness),
        count(ForkMode::Search),
        prefix.len(),
    );
    if let Some(path) = &out {
        text.push_str(&format!("trace written to {}\n", path.display()));
    }
    emit(io, json, value, text)?;
    Ok(EXIT_OK)
}

fn witness(
    p: &Builtin,
    init: &str,
    exclude: usize,
    budget: SearchBudget,
    json: bool,
    io: &mut Io<'_>,
) -> Outcome {
    let iv: InitVector = init.parse().map_err(|e| usage(format!("--init: {e}")))?;
    let s = make_initial(p, &iv).map_err(|e| usage(format!("--init: {e}")))?;
    let i = ProcessId::try_new(exclude, p.n())
        .ok_or_else(|| usage(format!("--exclude must be in 1..={}", p.n())))?;
    match wt_excluding(p, &s, i, budget) {
        Ok(w) => {
            let value = json!({
                "schedule": w.schedule(),
                "decider": w.decider,
                "value": w.value,
                "end_digest": w.end_digest,
                "visited": w.visited,
            });
            let text = format!(
                "schedule: {}\ndecider: {}\nvalue: {}\nend digest: {}\n",
                w.schedule(),
                w.decider,
                w.value,
                w.end_digest
            );
            emit(io, json, value, text)?;
            Ok(EXIT_OK)
        }
        Err(SearchError::SearchExhausted {
            frontier_empty: true,
            visited,
        }) => {
            let value = json!({ "blocked": true, "excluded": i, "closure_states": visited });
            let text = format!(
                "blocked: without {i} no decision is reachable ({visited} states explored)\n"
            );
            emit(io, json, value, text)?;
            Ok(EXIT_NEGATIVE)
        }
        Err(e) => Err(search_failure(e)),
    }
}

fn blocking(p: &Builtin, budget: SearchBudget, json: bool, io: &mut Io<'_>) -> Outcome {
    match find_blocking(p, budget).map_err(search_failure)? {
        Some(b) => {
            let value = json!({
                "blocking": true,
                "init_vector": b.init.to_string(),
                "path": b.path.actions(),
                "excluded": b.excluded,
                "state_digest": b.state().digest(),
                "closure_states": b.closure_states,
            });
            let text = format!(
                "blocking state: from {} after {}\nexcluded: {}\nclosure: {} states, none deciding\n",
                b.init,
                b.path.actions(),
                b.excluded,
                b.closure_states
            );
            emit(io, json, value, text)?;
        }
        None => {
            let value = json!({ "blocking": false });
            emit(
                io,
                json,
                value,
                "no blocking state: every reachable state was explored\n".into(),
            )?;
        }
    }
    Ok(EXIT_OK)
}

fn agreement(p: &Builtin, budget: SearchBudget, json: bool, io: &mut Io<'_>) -> Outcome {
    match check_agreement(p, budget).map_err(search_failure)? {
        AgreementOutcome::Violation(v) => {
            let value = json!({
                "violation": true,
                "init_vector": v.init.to_string(),
                "schedule": v.execution.actions(),
                "zero": v.zero,
                "one": v.one,
            });
            let text = format!(
                "agreement violated: from {} after {} process {} decides 0 and process {} decides 1\n",
                v.init,
                v.execution.actions(),
                v.zero,
                v.one
            );
            emit(io, json, value, text)?;
        }
        AgreementOutcome::Clean {
            depth,
            exhaustive,
            states,
        } => {
            let value = json!({
                "violation": false,
                "depth": depth,
                "exhaustive": exhaustive,
                "states": states,
            });
            let scope = if exhaustive {
                "the whole reachable space".to_string()
            } else {
                format!("depth {depth}")
            };
            let text = format!("no agreement violation within {scope} ({states} states)\n");
            emit(io, json, value, text)?;
        }
    }
    Ok(EXIT_OK)
}

fn init_search(p: &Builtin, budget: SearchBudget, json: bool, io: &mut Io<'_>) -> Outcome {
    let bi = match find_bivalent_init(p, budget) {
        Ok(bi) => bi,
        Err(e @ AdversaryError::NotResponsive { .. }) => {
            let _ = writeln!(io.err, "{e}");
            return Ok(EXIT_NEGATIVE);
        }
        Err(e) => return Err(adversary_failure(e)),
    };
    let decider = |s: &State<Builtin>| first_decision(p, s).map(|(q, _)| q);
    let value = json!({
        "k": bi.k,
        "init_vector": bi.init.to_string(),
        "state_digest": bi.state.digest(),
        "fork": {
            "zero": bi.fork.branch(crate::model::Bit::Zero).actions(),
            "one": bi.fork.branch(crate::model::Bit::One).actions(),
        },
        "ladder": bi.ladder_values,
    });
    let text = format!(
        "k = {}, initialization {}\n0 branch: {} (decided by {})\n1 branch: {} (decided by {})\n",
        bi.k,
        bi.init,
        bi.fork.branch(crate::model::Bit::Zero).actions(),
        decider(bi.fork.branch(crate::model::Bit::Zero).end())
            .map_or("-".into(), |q| q.to_string()),
        bi.fork.branch(crate::model::Bit::One).actions(),
        decider(bi.fork.branch(crate::model::Bit::One).end())
            .map_or("-".into(), |q| q.to_string()),
    );
    emit(io, json, value, text)?;
    Ok(EXIT_OK)
}

fn verify(
    path: PathBuf,
    certify_prefix: usize,
    budget_depth: Option<usize>,
    json: bool,
    io: &mut Io<'_>,
) -> Outcome {
    let file = File::open(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let trace = TraceFile::read_from(BufReader::new(file)).map_err(|e| usage(e.to_string()))?;
    let p = Builtin::from_name(&trace.header.protocol, trace.header.n)
        .map_err(|e| usage(e.to_string()))?;
    let mut budget = trace.header.budget;
    if let Some(d) = budget_depth {
        budget = SearchBudget::new(d, budget.max_states).map_err(|e| usage(e.to_string()))?;
    }
    let cert =
        verify_trace(&trace, &p, budget, certify_prefix).map_err(|e| usage(e.to_string()))?;
    let value = serde_json::to_value(&cert).expect("certificate serializes");
    let mut text = format!(
        "steps checked: {}\ncertified bivalent prefix: {}\nfairness: {}\nindecision: {}\n",
        cert.steps_checked,
        cert.bivalence_certified_prefix,
        if cert.fairness_ok { "ok" } else { "violated" },
        if cert.indecision_ok { "ok" } else { "violated" },
    );
    for v in &cert.violations {
        text.push_str(&format!("violation: {v}\n"));
    }
    if cert.is_clean() {
        text.push_str("trace verified\n");
    }
    emit(io, json, value, text)?;
    Ok(if cert.is_clean() {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

#[allow(clippy::too_many_arguments)]
fn commute(
    p: &Builtin,
    trials: usize,
    seed: u64,
    depth: usize,
    exhaustive: bool,
    json: bool,
    io: &mut Io<'_>,
) -> Outcome {
    let verdict = if exhaustive {
        commutativity_sweep(p, depth)
    } else {
        commutativity_suite(p, trials, seed, depth)
    };
    let value = serde_json::to_value(&verdict).expect("verdict serializes");
    let mut text = format!(
        "pairs checked: {}\ncounterexamples: {}\n",
        verdict.pairs_checked,
        verdict.counterexamples.len()
    );
    for c in &verdict.counterexamples {
        text.push_str(&format!(
            "  {} | {} from {}: {}\n",
            c.first, c.second, c.state, c.reason
        ));
    }
    emit(io, json, value, text)?;
    Ok(if verdict.holds() {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}
