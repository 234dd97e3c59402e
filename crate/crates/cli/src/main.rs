use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use smart_tgpn::analysis::{check_formula, explore, Branching};
use smart_tgpn::kernel::{KernelError, PolicyKind};
use smart_tgpn::monitor::{Timeline, Trace};
use smart_tgpn::net::{validate_net, Net};
use smart_tgpn::sim::{
    builtin, builtin_names, exploration_config, parse_scenario, render_text, simulate, stats,
    stats_table, suite_line, verify, RunError, RunReport, Scenario,
};
use smart_tgpn::smart::{
    build_multi_agent, build_single_agent, validate_smart, AgentSpec, SmartConfig,
};
use smart_tgpn::verdict::Outcome;

const INPUT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(
    name = "smart-tgpn",
    version,
    about = "Timed guarded Petri nets for failure-managed autonomous agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a net file's structure and, for SMART nets, its mode machine.
    Validate {
        net: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a scenario and write its trace and report.
    Simulate {
        /// Scenario file, or the name of a shipped scenario.
        scenario: String,
        #[command(flatten)]
        run: RunArgs,
        /// Directory for `<name>.trace.jsonl`, `<name>.report.json` and `<name>.report.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario's checks on a stored trace, or on a fresh run.
    Verify {
        /// Scenario file, or the name of a shipped scenario.
        scenario: String,
        /// Check this JSONL trace instead of simulating.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Explore a scenario's net exhaustively and check its formulas.
    Explore {
        /// Scenario file, or the name of a shipped scenario.
        scenario: String,
        #[arg(long)]
        horizon: Option<u64>,
        /// Maximum number of states.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long, value_parser = ["all", "earliest"])]
        branching: Option<String>,
        /// Write the graph as text.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Summarize a trace file.
    Report { trace: PathBuf },
    /// Write a SMART net produced by the builder.
    Build {
        /// Agent ids; two or more build a multi-agent net.
        #[arg(long, value_delimiter = ',')]
        agents: Vec<String>,
        /// Builder configuration (JSON) applied to every agent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run shipped scenarios and print one line each.
    Suite {
        /// Run every shipped scenario instead of the reference six.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        list: bool,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Firing policy: earliest, latest or random.
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Seed for the random policy (falls back to the scenario, then SMART_TGPN_SEED).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Keep running to the horizon after absorbing quiescence.
    #[arg(long)]
    no_quiescence: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INPUT_ERROR } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}

fn status(o: Outcome) -> u8 {
    o.exit_code() as u8
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Validate { net, json } => validate(&net, json),
        Command::Simulate { scenario, run, out } => simulate_cmd(&scenario, &run, out.as_deref()),
        Command::Verify {
            scenario,
            trace,
            run,
            json,
        } => verify_cmd(&scenario, trace.as_deref(), &run, json),
        Command::Explore {
            scenario,
            horizon,
            cap,
            branching,
            export,
            json,
        } => explore_cmd(
            &scenario,
            horizon,
            cap,
            branching.as_deref(),
            export.as_deref(),
            json,
        ),
        Command::Report { trace } => report_cmd(&trace),
        Command::Build {
            agents,
            config,
            out,
        } => build_cmd(&agents, config.as_deref(), out.as_deref()),
        Command::Suite { all, list } => suite_cmd(all, list),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// A scenario file, or the name of a shipped scenario.
fn load_scenario(arg: &str, run: &RunArgs) -> Result<Scenario> {
    let path = Path::new(arg);
    let mut sc = if path.exists() {
        parse_scenario(&read(path)?, path.parent())
    } else {
        let name = arg.trim_end_matches(".json").trim_end_matches(".scenario");
        let text = builtin(name)
            .ok_or_else(|| anyhow!("no scenario file or shipped scenario named `{arg}`"))?;
        parse_scenario(text, None)
    }
    .with_context(|| format!("scenario {arg}"))?;
    for w in &sc.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(p) = run.policy {
        sc.doc.policy = p;
    }
    if let Some(s) = run.seed {
        sc.seed = s;
    }
    if let Some(h) = run.horizon {
        if let Some(e) = sc.script.iter().find(|e| e.time > h) {
            bail!("script entry at t={} is beyond the horizon {h}", e.time);
        }
        sc.doc.horizon = h;
    }
    if run.no_quiescence {
        sc.doc.stop_on_quiescence = false;
    }
    Ok(sc)
}

/// Zeno behaviour is a finding about the net, not an input error.
fn run_failure(e: RunError) -> Result<u8> {
    match e {
        RunError::Kernel(k @ KernelError::Zeno { .. }) => {
            println!("violation     {k}");
            Ok(status(Outcome::Violation))
        }
        other => Err(other.into()),
    }
}

fn validate(path: &Path, json: bool) -> Result<u8> {
    let net = Net::from_json(&read(path)?)?;
    let structure = validate_net(&net);
    let smart = if net.smart.is_some() && structure.is_ok() {
        Some(validate_smart(&net)?)
    } else {
        None
    };
    if json {
        let v = serde_json::json!({"structure": structure, "smart": smart});
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        for e in &structure.errors {
            println!("error: {e}");
        }
        for w in &structure.warnings {
            println!("warning: {w}");
        }
        for i in &structure.info {
            println!("info: {i}");
        }
        if let Some(r) = &smart {
            for c in &r.checks {
                println!("{:<4} {}", if c.passed { "ok" } else { "FAIL" }, c.name);
                for v in &c.violations {
                    println!("       {v}");
                }
            }
        }
    }
    Ok(if !structure.is_ok() {
        INPUT_ERROR
    } else if smart.is_some_and(|r| !r.all_passed()) {
        1
    } else {
        0
    })
}

fn simulate_cmd(arg: &str, run: &RunArgs, out: Option<&Path>) -> Result<u8> {
    let sc = load_scenario(arg, run)?;
    let trace = match simulate(&sc) {
        Ok(t) => t,
        Err(e) => return run_failure(e),
    };
    let mut report = verify(&sc, &trace)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let trace_path = dir.join(format!("{}.trace.jsonl", sc.name()));
        fs::write(&trace_path, trace.to_jsonl())?;
        report.trace = Some(trace_path.display().to_string());
        fs::write(
            dir.join(format!("{}.report.json", sc.name())),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
        fs::write(
            dir.join(format!("{}.report.txt", sc.name())),
            render_text(&report),
        )?;
    }
    print!("{}", render_text(&report));
    Ok(status(report.outcome))
}

fn verify_cmd(arg: &str, trace: Option<&Path>, run: &RunArgs, json: bool) -> Result<u8> {
    let sc = load_scenario(arg, run)?;
    let (trace, source) = match trace {
        Some(p) => (Trace::from_jsonl(&read(p)?)?, Some(p.display().to_string())),
        None => match simulate(&sc) {
            Ok(t) => (t, None),
            Err(e) => return run_failure(e),
        },
    };
    let mut report: RunReport = verify(&sc, &trace)?;
    report.trace = source;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", render_text(&report));
    }
    Ok(status(report.outcome))
}

fn explore_cmd(
    arg: &str,
    horizon: Option<u64>,
    cap: Option<usize>,
    branching: Option<&str>,
    export: Option<&Path>,
    json: bool,
) -> Result<u8> {
    let sc = load_scenario(arg, &RunArgs::default())?;
    let mut cfg = exploration_config(&sc);
    if let Some(h) = horizon {
        cfg.horizon = h;
    }
    if let Some(c) = cap {
        cfg.state_cap = c;
    }
    match branching {
        Some("all") => cfg.branching = Branching::All,
        Some("earliest") => cfg.branching = Branching::Earliest,
        _ => {}
    }
    let net = sc.compiled()?;
    let graph = explore(&net, &cfg)?;
    if let Some(p) = export {
        let mut f = std::io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        );
        graph.export(&mut f)?;
    }
    let verdicts = sc
        .doc
        .formulas
        .iter()
        .map(|f| check_formula(&graph, &f.formula))
        .collect::<Result<Vec<_>, _>>()?;
    let mut outcomes: Vec<Outcome> = verdicts.iter().map(|v| v.outcome).collect();
    if !graph.invariant_violations.is_empty() {
        outcomes.push(Outcome::Violation);
    }
    if json {
        let v = serde_json::json!({
            "states": graph.len(),
            "edges": graph.edges.len(),
            "complete": graph.complete,
            "capped": graph.capped,
            "invariant_violations": graph.invariant_violations.iter().map(|v| &v.invariant).collect::<Vec<_>>(),
            "formulas": verdicts,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!(
            "{} states, {} edges, max depth {}, {}{}",
            graph.len(),
            graph.edges.len(),
            graph.max_depth(),
            if graph.complete {
                "complete"
            } else {
                "truncated at the horizon"
            },
            if graph.capped { ", state cap hit" } else { "" }
        );
        let names: Vec<&str> = graph
            .alphabet
            .iter()
            .map(|&s| net.signals.name(s))
            .collect();
        println!("alphabet: {}", names.join(", "));
        for v in &graph.invariant_violations {
            println!("invariant violated: {} (state {})", v.invariant, v.state);
        }
        for (f, v) in sc.doc.formulas.iter().zip(&verdicts) {
            let name = f
                .name
                .as_deref()
                .map(|n| format!("{n}: "))
                .unwrap_or_default();
            println!("{:<13} {name}{}", v.outcome, v.formula);
            if let Some(n) = &v.note {
                println!("    note {n}");
            }
            if let Some(c) = &v.counterexample {
                for step in &c.steps {
                    println!("    {}", serde_json::to_string(step)?);
                }
            }
        }
    }
    Ok(status(Outcome::worst(outcomes)))
}

fn report_cmd(path: &Path) -> Result<u8> {
    let trace = Trace::from_jsonl(&read(path)?)?;
    let tl = Timeline::new(&trace)?;
    let h = &trace.header;
    println!(
        "scenario {}  policy={} seed={}",
        h.scenario, h.policy, h.seed
    );
    println!(
        "ended at t={} ({}) of horizon {}",
        tl.end, tl.end_reason, h.horizon
    );
    println!("{} events\n", trace.events.len());
    print!("{}", stats_table(&stats(&tl)));
    Ok(0)
}

fn build_cmd(agents: &[String], config: Option<&Path>, out: Option<&Path>) -> Result<u8> {
    let cfg: SmartConfig = match config {
        Some(p) => {
            serde_json::from_str(&read(p)?).with_context(|| format!("config {}", p.display()))?
        }
        None => SmartConfig::default(),
    };
    let net = if agents.len() >= 2 {
        let specs: Vec<AgentSpec> = agents
            .iter()
            .map(|id| AgentSpec {
                id: id.clone(),
                config: cfg,
            })
            .collect();
        build_multi_agent(&specs)?
    } else {
        build_single_agent(&cfg)?
    };
    let text = net.to_json() + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn suite_cmd(all: bool, list: bool) -> Result<u8> {
    let names: Vec<&str> = if all {
        builtin_names().collect()
    } else {
        smart_tgpn::sim::REFERENCE_SUITE.to_vec()
    };
    if list {
        for n in names {
            println!("{n}");
        }
        return Ok(0);
    }
    let mut outcomes = Vec::new();
    for n in names {
        let sc = parse_scenario(builtin(n).expect("shipped scenario"), None)?;
        let trace = match simulate(&sc) {
            Ok(t) => t,
            Err(e) => {
                run_failure(e)?;
                outcomes.push(Outcome::Violation);
                continue;
            }
        };
        let report = verify(&sc, &trace)?;
        println!("{}", suite_line(&report));
        outcomes.push(report.outcome);
    }
    Ok(status(Outcome::worst(outcomes)))
}
