use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use conjspace_core::function_space::{bases_document, ConjectureRecord, FeatureBasis};
use conjspace_core::number_theory_data::PrimePiTable;
use conjspace_core::oracle::{run_oracle_on, write_trajectory_csv, Emission, OracleRun};
use conjspace_core::verifier::{Domain, Status, VerificationReport};
use serde::Serialize;

use crate::config::{self, check_arity};
use crate::error::{io_error, CliError, CliResult, Outcome};

pub struct GenerateArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// One line of `conjectures.jsonl`.
#[derive(Serialize)]
struct ConjectureLine<'a> {
    #[serde(flatten)]
    record: ConjectureRecord,
    restart: usize,
    status: Status,
    denominator: u32,
    domain: &'a str,
}

/// One line of `reports.jsonl`.
#[derive(Serialize)]
struct ReportLine<'a> {
    restart: usize,
    verified: bool,
    #[serde(flatten)]
    report: &'a VerificationReport,
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    config_path: String,
    seed: u64,
    threads: Option<usize>,
    basis: String,
    outputs: Vec<String>,
    started_unix: f64,
    finished_unix: f64,
    versions: Versions,
}

#[derive(Serialize)]
struct Versions {
    conjspace: &'static str,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Prime table covering both the training and the verification points.
pub fn table_for_domains(
    basis: &FeatureBasis,
    domains: &[&Domain],
) -> CliResult<Option<PrimePiTable>> {
    if !basis.uses_pi() {
        return Ok(None);
    }
    let mut limit = 2;
    for d in domains {
        limit = limit.max(basis.required_pi_limit(&d.upper_corner())?);
    }
    Ok(Some(PrimePiTable::build(limit)?))
}

pub fn run(args: &GenerateArgs) -> CliResult<Outcome> {
    let started = now();
    let mut cfg = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.oracle.seed = seed;
    }
    let basis = cfg.basis.resolve()?;
    let train = cfg.dataset.domain()?;
    let verify_on = match &cfg.verify_domain {
        Some(spec) => config::parse_domain(spec)?,
        None => train.clone(),
    };
    check_arity(&basis, &train)?;
    check_arity(&basis, &verify_on)?;
    let rows = train.materialize();
    if rows.is_empty() {
        return Err(CliError::Usage(format!("dataset `{train}` has no points")));
    }
    let table = table_for_domains(&basis, &[&train, &verify_on])?;
    let run = run_oracle_on(&cfg.oracle, &basis, &rows, &verify_on, table.as_ref())?;

    let written = write_outputs(&args.out, &run, &basis, &verify_on)?;
    let manifest = Manifest {
        command: "generate",
        config_path: args.config.display().to_string(),
        seed: cfg.oracle.seed,
        threads: args.threads,
        basis: basis.id.clone(),
        outputs: written,
        started_unix: started,
        finished_unix: now(),
        versions: Versions {
            conjspace: env!("CARGO_PKG_VERSION"),
        },
    };
    let path = args.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;

    for e in &run.candidates {
        println!("{}\t{}", e.candidate, status_word(e.report.status));
    }
    let converged = run.restarts.iter().filter(|r| r.converged).count();
    eprintln!(
        "{} restarts, {converged} converged, {} verified conjectures",
        run.restarts.len(),
        run.candidates.len()
    );
    Ok(if run.candidates.is_empty() {
        Outcome::Negative
    } else {
        Outcome::Success
    })
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Holds => "holds",
        Status::NonStrict => "holds-non-strict",
        Status::Falsified => "falsified",
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

/// Writes every artifact and returns their paths relative to `out`.
fn write_outputs(
    out: &Path,
    run: &OracleRun,
    basis: &FeatureBasis,
    domain: &Domain,
) -> CliResult<Vec<String>> {
    let traj_dir = out.join("trajectories");
    fs::create_dir_all(&traj_dir).map_err(|e| io_error(&traj_dir, e))?;
    let mut written = Vec::new();
    let domain_text = domain.to_string();

    let path = out.join("conjectures.jsonl");
    let mut w = create(&path)?;
    for e in &run.candidates {
        let line = conjecture_line(e, &domain_text)?;
        writeln!(
            w,
            "{}",
            serde_json::to_string(&line).expect("record serializes")
        )
        .map_err(|e| io_error(&path, e))?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;
    written.push("conjectures.jsonl".to_string());

    let path = out.join("reports.jsonl");
    let mut w = create(&path)?;
    for e in run.restarts.iter().filter_map(|r| r.emission.as_ref()) {
        let line = ReportLine {
            restart: e.restart,
            verified: e.verified(),
            report: &e.report,
        };
        writeln!(
            w,
            "{}",
            serde_json::to_string(&line).expect("report serializes")
        )
        .map_err(|e| io_error(&path, e))?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;
    written.push("reports.jsonl".to_string());

    let path = out.join("bases.json");
    let doc = serde_json::to_string_pretty(&bases_document([basis])).expect("basis serializes");
    fs::write(&path, doc + "\n").map_err(|e| io_error(&path, e))?;
    written.push("bases.json".to_string());

    for r in &run.restarts {
        let name = format!("trajectories/restart_{:03}.csv", r.restart);
        let path = out.join(&name);
        let mut w = create(&path)?;
        write_trajectory_csv(&mut w, &r.trajectory).map_err(|e| io_error(&path, e))?;
        w.flush().map_err(|e| io_error(&path, e))?;
        written.push(name);
    }
    written.push("manifest.json".to_string());
    Ok(written)
}

fn conjecture_line<'a>(e: &Emission, domain: &'a str) -> CliResult<ConjectureLine<'a>> {
    Ok(ConjectureLine {
        record: e.candidate.record()?,
        restart: e.restart,
        status: e.report.status,
        denominator: e.denominator,
        domain,
    })
}
