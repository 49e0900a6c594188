use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use conjspace_core::function_space::{
    builtin_basis, parse, CandidateConjecture, ConjectureRecord, FeatureBasis, BUILTIN_BASES,
};
use conjspace_core::number_theory_data::PrimePiTable;
use conjspace_core::verifier::{verify, Domain, Status};

use crate::config::{check_arity, parse_domain};
use crate::error::{io_error, CliError, CliResult, Outcome};

pub struct VerifyArgs {
    pub file: PathBuf,
    pub domain: Option<String>,
    pub basis: Option<String>,
    pub bases: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

struct Line {
    number: usize,
    candidate: CandidateConjecture,
}

fn load_bases(args: &VerifyArgs) -> CliResult<BTreeMap<String, FeatureBasis>> {
    let mut bases = BTreeMap::new();
    for id in BUILTIN_BASES {
        bases.insert(id.to_string(), builtin_basis(id)?);
    }
    if let Some(path) = &args.bases {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let extra: BTreeMap<String, FeatureBasis> = serde_json::from_str(&text).map_err(|e| {
            CliError::Usage(format!(
                "{}:{}:{}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        for (id, b) in extra {
            b.validate()
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            bases.insert(id, b);
        }
    }
    Ok(bases)
}

/// JSON records name their basis; text lines use `--basis` or the first
/// basis that parses them.
fn parse_line(
    text: &str,
    bases: &BTreeMap<String, FeatureBasis>,
    basis: Option<&str>,
    arity: Option<usize>,
) -> Result<CandidateConjecture, String> {
    if text.starts_with('{') {
        let record: ConjectureRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let b = bases
            .get(&record.basis_id)
            .ok_or_else(|| format!("unknown basis `{}`", record.basis_id))?;
        return record.candidate(b).map_err(|e| e.to_string());
    }
    if let Some(id) = basis {
        let b = bases
            .get(id)
            .ok_or_else(|| format!("unknown basis `{id}`"))?;
        return parse(text, b).map_err(|e| e.to_string());
    }
    let mut first_err = None;
    let ids = BUILTIN_BASES
        .iter()
        .copied()
        .chain(bases.keys().map(String::as_str));
    for id in ids.filter(|id| arity.is_none_or(|k| bases[*id].arity() == k)) {
        match parse(text, &bases[id]) {
            Ok(c) => return Ok(c),
            Err(e) => {
                first_err.get_or_insert(e.to_string());
            }
        }
    }
    Err(first_err.unwrap_or_else(|| "no basis available".into()))
}

pub fn run(args: &VerifyArgs) -> CliResult<Outcome> {
    let bases = load_bases(args)?;
    if let Some(id) = &args.basis {
        if !bases.contains_key(id) {
            return Err(CliError::Usage(format!("unknown basis `{id}`")));
        }
    }
    let given = args.domain.as_deref().map(parse_domain).transpose()?;
    let arity = given.as_ref().and_then(Domain::arity);
    let text = fs::read_to_string(&args.file)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.file.display())))?;
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let candidate = parse_line(t, &bases, args.basis.as_deref(), arity).map_err(|e| {
            CliError::Usage(format!("{}: line {}: {e}", args.file.display(), i + 1))
        })?;
        lines.push(Line {
            number: i + 1,
            candidate,
        });
    }

    let mut sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    };
    if lines.is_empty() {
        return Ok(Outcome::Success);
    }
    let domain = match given {
        Some(d) => d,
        None if lines.iter().all(|l| l.candidate.basis.id == "groups") => parse_domain("groups")?,
        None => {
            return Err(CliError::Usage(
                "--domain is required for these conjectures".into(),
            ))
        }
    };
    for l in &lines {
        check_arity(&l.candidate.basis, &domain).map_err(|e| {
            CliError::Usage(format!("{}: line {}: {e}", args.file.display(), l.number))
        })?;
    }
    let mut falsified = false;
    // one table serves every line
    let mut limit = None;
    for l in lines.iter().filter(|l| l.candidate.basis.uses_pi()) {
        let need = l
            .candidate
            .basis
            .required_pi_limit(&domain.upper_corner())?;
        limit = Some(limit.unwrap_or(2).max(need));
    }
    let table = limit.map(PrimePiTable::build).transpose()?;
    for l in &lines {
        let report = verify(&l.candidate, &domain, table.as_ref())?;
        falsified |= report.status == Status::Falsified;
        let json = serde_json::to_string(&report).expect("report serializes");
        writeln!(sink, "{json}").map_err(|e| CliError::Resource(e.to_string()))?;
        eprintln!("line {}: {:?} {}", l.number, report.status, report.text);
    }
    sink.flush()
        .map_err(|e| CliError::Resource(e.to_string()))?;
    Ok(if falsified {
        Outcome::Negative
    } else {
        Outcome::Success
    })
}
