use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use switchcert::bounds::DecayCheck;
use switchcert::certificate::{evaluate, search_budget, BudgetSearch, CertificateReport, FrequencyBudget};
use switchcert::config::{GammaConfig, ProjectConfig};
use switchcert::experiment::{decay_checks, gains, generate_signals, simulate_batch, RunSummary};
use switchcert::model::SwitchingSignal;
use switchcert::signals::{validate_class, MembershipReport};
use switchcert::sim::{dissipation_audit, AuditReport};
use switchcert::Error;

/// 2 for unreadable or invalid input, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Config(_)
            | Error::Csv(_)
            | Error::Io(_)
            | Error::MalformedSignal(_)
            | Error::BudgetMismatch(_)
            | Error::BudgetInvariant(_)
            | Error::InvalidSubsystem { .. }
            | Error::InvalidTransition { .. },
        ) => 2,
        _ => 1,
    }
}

fn load(path: &Path) -> Result<ProjectConfig> {
    Ok(ProjectConfig::load(path)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(BufWriter<fs::File>) -> switchcert::Result<()>,
{
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

/// Writes to stdout, treating a closed pipe as success.
fn print_stdout(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn print_report(report: &CertificateReport) -> Result<()> {
    print_stdout(&serde_json::to_string_pretty(report)?)
}

pub fn check(config: &Path, out: Option<&Path>) -> Result<bool> {
    let cfg = load(config)?;
    let report = evaluate(&cfg.model, &cfg.budget)?;
    print_report(&report)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("certificate.json"), &report)?;
    }
    if !report.feasible {
        eprintln!("certificate infeasible: lhs = {}", report.lhs);
    }
    Ok(report.feasible)
}

pub fn find_rho(config: &Path, floors: Option<&Path>, out: Option<&Path>) -> Result<bool> {
    let mut cfg = load(config)?;
    let floors: FrequencyBudget = match floors {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => FrequencyBudget::default(),
    };
    let found = search_budget(&cfg.model, &floors, 0.0)?;
    match &found {
        BudgetSearch::Feasible { budget, report } => {
            cfg.budget = budget.clone();
            print_stdout(&cfg.to_json())?;
            eprintln!("feasible budget found: lhs = {}", report.lhs);
            if let Some(dir) = out {
                create_dir(dir)?;
                fs::write(dir.join("config.json"), cfg.to_json() + "\n")?;
            }
            Ok(true)
        }
        BudgetSearch::Infeasible { vertex, report } => {
            eprintln!(
                "no feasible budget above these floors; smallest lhs = {} at budget {}",
                report.lhs,
                serde_json::to_string(vertex)?
            );
            Ok(false)
        }
    }
}

pub fn gen(config: &Path, n: usize, out: &Path, seed: Option<u64>) -> Result<bool> {
    let cfg = load(config)?;
    create_dir(out)?;
    let seed = seed.unwrap_or(cfg.generator.seed);
    let signals = generate_signals(&cfg, n, seed)?;
    for (i, s) in signals.iter().enumerate() {
        let report = validate_class(&cfg.model, &cfg.budget, s)?;
        if !report.in_class {
            bail!("generated signal {i} failed the class check: {:?}", report.violations);
        }
        write_with(&out.join(format!("signal_{i:03}.csv")), |w| s.write_csv(w))?;
        write_json(&out.join(format!("signal_{i:03}.json")), &report)?;
    }
    eprintln!("wrote {n} signals to {}", out.display());
    Ok(true)
}

fn read_signals(dir: &Path) -> Result<Vec<SwitchingSignal>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            SwitchingSignal::read_csv(f)
                .map_err(|e| Error::Csv(format!("{}: {e}", p.display())))
                .map_err(Into::into)
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SignalSummary {
    signal: usize,
    switches: usize,
    in_class: bool,
    decay: DecayCheck,
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    gamma: GammaConfig,
    audit: AuditReport,
    signals: Vec<SignalSummary>,
    runs: Vec<RunSummary>,
    all_dominated: bool,
    max_norm: f64,
}

pub fn simulate(
    config: &Path,
    signals: Option<&Path>,
    out: &Path,
    n: Option<usize>,
    seed: Option<u64>,
) -> Result<bool> {
    let cfg = load(config)?;
    let Some(sim) = cfg.simulation.clone() else {
        return Err(Error::Config(format!("{}: no simulation block", config.display())).into());
    };
    let seed = seed.unwrap_or(sim.seed);
    let signals = match signals {
        Some(dir) => read_signals(dir)?,
        None => generate_signals(&cfg, sim.signals, cfg.generator.seed)?,
    };
    create_dir(out)?;

    let gamma = gains(&cfg)?;
    let family = sim.family.build()?;
    let audit = dissipation_audit(
        &family,
        &sim.lyapunov,
        &cfg.model,
        gamma.k1,
        gamma.k2,
        &sim.audit_sampler(seed.wrapping_add(1)),
    )?;
    write_json(&out.join("audit.json"), &audit)?;
    if !audit.passed {
        eprintln!(
            "dissipation audit found a positive margin with k1 = {}, k2 = {}",
            gamma.k1, gamma.k2
        );
        return Ok(false);
    }

    let decay = decay_checks(&cfg, &signals)?;
    let mut signal_rows = Vec::new();
    for (i, (s, d)) in signals.iter().zip(decay).enumerate() {
        let membership: MembershipReport = validate_class(&cfg.model, &cfg.budget, s)?;
        if !membership.in_class {
            eprintln!("warning: signal {i} is not a class member; its bounds are not guaranteed");
        }
        signal_rows.push(SignalSummary {
            signal: i,
            switches: s.switch_count(),
            in_class: membership.in_class,
            decay: d,
        });
    }

    let runs = simulate_batch(&cfg, &signals, n.unwrap_or(sim.initial_states), seed, gamma)?;
    let mut norms = csv_writer(&out.join("norms.csv"))?;
    norms.write_record(["signal", "state", "t", "norm"])?;
    for r in &runs {
        let tag = format!("{:03}_{:02}", r.signal, r.state);
        write_with(&out.join(format!("trajectory_{tag}.csv")), |w| {
            r.trajectory.write_csv(w)
        })?;
        write_with(&out.join(format!("envelope_{tag}.csv")), |w| r.envelope.write_csv(w))?;
        for (t, x) in r.trajectory.times.iter().zip(r.trajectory.state_norms()) {
            norms.write_record([r.signal.to_string(), r.state.to_string(), t.to_string(), x.to_string()])?;
        }
    }
    norms.flush()?;

    let summary = SimulationSummary {
        gamma,
        audit,
        all_dominated: runs.iter().all(|r| r.envelope.dominated),
        max_norm: runs.iter().map(|r| r.max_norm).fold(0.0, f64::max),
        signals: signal_rows,
        runs: runs.iter().map(|r| r.summary()).collect(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    let decay_ok = summary.signals.iter().all(|s| s.decay.holds || !s.in_class);
    eprintln!(
        "{} runs, max |x| = {:.4}, envelope dominated: {}, decay bound holds: {}",
        summary.runs.len(),
        summary.max_norm,
        summary.all_dominated,
        decay_ok
    );
    Ok(summary.all_dominated && decay_ok)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Reference certificate value for the coupled-sine configuration and the allowed
/// deviation.
const FOUR_MODE_LHS: f64 = -0.0069;
const FOUR_MODE_TOL: f64 = 5e-4;

#[derive(Debug, Serialize)]
struct ReproduceRow {
    config: &'static str,
    subsystems: usize,
    edges: usize,
    lhs: f64,
    expectation: String,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct ReproduceSummary {
    rows: Vec<ReproduceRow>,
    simulation_runs: usize,
    simulation_max_norm: f64,
    simulation_dominated: bool,
    simulation_pass: bool,
}

pub fn reproduce(out: Option<&Path>, seed: u64) -> Result<bool> {
    let mut rows = Vec::new();
    for name in ["coupled-sine", "two-mode", "three-mode", "ten-mode"] {
        let cfg = ProjectConfig::bundled(name)?;
        let report = evaluate(&cfg.model, &cfg.budget)?;
        let (expectation, pass) = if name == "coupled-sine" {
            (
                format!("within {FOUR_MODE_TOL} of {FOUR_MODE_LHS}"),
                (report.lhs - FOUR_MODE_LHS).abs() <= FOUR_MODE_TOL,
            )
        } else {
            ("< 0".to_string(), report.lhs < 0.0)
        };
        rows.push(ReproduceRow {
            config: name,
            subsystems: cfg.model.len(),
            edges: cfg.model.edge_count(),
            lhs: report.lhs,
            expectation,
            pass,
        });
    }
    println!(
        "{:<14} {:>10} {:>6} {:>14}  {:<26} result",
        "config", "subsystems", "edges", "lhs", "expected"
    );
    for r in &rows {
        println!(
            "{:<14} {:>10} {:>6} {:>14.9}  {:<26} {}",
            r.config,
            r.subsystems,
            r.edges,
            r.lhs,
            r.expectation,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }

    let mut cfg = ProjectConfig::bundled("coupled-sine")?;
    if let Some(sim) = cfg.simulation.as_mut() {
        sim.audit_samples = 20_000;
    }
    let gamma = gains(&cfg)?;
    let signals = generate_signals(&cfg, 3, cfg.generator.seed.wrapping_add(seed))?;
    let sim_seed = cfg.simulation.as_ref().map_or(0, |s| s.seed).wrapping_add(seed);
    let runs = simulate_batch(&cfg, &signals, 3, sim_seed, gamma)?;
    let max_norm = runs.iter().map(|r| r.max_norm).fold(0.0, f64::max);
    let dominated = runs.iter().all(|r| r.envelope.dominated);
    let sim_pass = dominated && max_norm < 50.0;
    println!(
        "simulation: {} runs, max |x| = {:.4}, envelope dominated: {} -> {}",
        runs.len(),
        max_norm,
        dominated,
        if sim_pass { "PASS" } else { "FAIL" }
    );

    let all = rows.iter().all(|r| r.pass) && sim_pass;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(
            &dir.join("reproduce.json"),
            &ReproduceSummary {
                rows,
                simulation_runs: runs.len(),
                simulation_max_norm: max_norm,
                simulation_dominated: dominated,
                simulation_pass: sim_pass,
            },
        )?;
    }
    Ok(all)
}
