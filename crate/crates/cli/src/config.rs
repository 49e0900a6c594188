use std::path::Path;

use conjspace_core::function_space::{builtin_basis, FeatureBasis};
use conjspace_core::oracle::OracleConfig;
use conjspace_core::simple_group_data::{build_catalog, dataset_rows};
use conjspace_core::verifier::Domain;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Input of `generate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub dataset: DatasetSpec,
    pub basis: BasisSpec,
    /// Verification domain; the training points when absent.
    #[serde(default)]
    pub verify_domain: Option<String>,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Integer grid such as `a=2..200,b=2..200`.
    Primes { domain: String },
    /// The simple-group catalog.
    Groups,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    Builtin(String),
    Inline(FeatureBasis),
}

impl BasisSpec {
    pub fn resolve(&self) -> CliResult<FeatureBasis> {
        let basis = match self {
            BasisSpec::Builtin(id) => builtin_basis(id)?,
            BasisSpec::Inline(b) => b.clone(),
        };
        basis
            .validate()
            .map_err(|e| CliError::Usage(format!("basis: {e}")))?;
        Ok(basis)
    }
}

pub fn load(path: &Path) -> CliResult<GenerateConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let config: GenerateConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    config
        .oracle
        .validate()
        .map_err(|e| CliError::Usage(format!("{}: oracle: {e}", path.display())))?;
    Ok(config)
}

/// The group catalog as a row domain.
pub fn group_domain() -> CliResult<Domain> {
    let catalog = build_catalog()?;
    Ok(Domain::rows("groups", dataset_rows(&catalog).collect()))
}

impl DatasetSpec {
    pub fn domain(&self) -> CliResult<Domain> {
        match self {
            DatasetSpec::Primes { domain } => Ok(Domain::parse(domain)?),
            DatasetSpec::Groups => group_domain(),
        }
    }
}

/// `groups` names the catalog; anything else is a grid spec.
pub fn parse_domain(spec: &str) -> CliResult<Domain> {
    if spec.trim() == "groups" {
        group_domain()
    } else {
        Ok(Domain::parse(spec)?)
    }
}

/// Rejects bases whose arity does not match the domain.
pub fn check_arity(basis: &FeatureBasis, domain: &Domain) -> CliResult<()> {
    match domain.arity() {
        Some(k) if k != basis.arity() => Err(CliError::Usage(format!(
            "basis `{}` takes {} variables but the domain `{domain}` has {k}",
            basis.id,
            basis.arity()
        ))),
        None => Err(CliError::Usage(format!("domain `{domain}` is empty"))),
        _ => Ok(()),
    }
}
