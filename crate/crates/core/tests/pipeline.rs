use conjspace_core::function_space::{builtin_basis, canonical_difference, parse};
use conjspace_core::oracle::{run_oracle_on, OracleConfig};
use conjspace_core::simple_group_data::{build_catalog, catalog_dataset};
use conjspace_core::{run_oracle, verify, Domain, PrimePiTable, Relation, Status};

#[test]
fn grid_run_emits_only_verified_unique_candidates() {
    let basis = builtin_basis("pi-ab").unwrap();
    let domain = Domain::parse("a=2..120,b=2..120").unwrap();
    let rows = domain.materialize();
    let table = PrimePiTable::build(120 * 120).unwrap();
    let config = OracleConfig {
        restarts: 10,
        seed: 5,
        ..OracleConfig::default()
    };
    let run = run_oracle_on(&config, &basis, &rows, &domain, Some(&table)).unwrap();
    assert_eq!(run.restarts.len(), 10);
    assert!(!run.candidates.is_empty());
    let mut keys = Vec::new();
    for e in &run.candidates {
        // independent re-check on the same domain
        let again = verify(&e.candidate, &domain, Some(&table)).unwrap();
        assert!(again.holds_as_declared, "{}", e.candidate);
        if e.candidate.relation == Relation::Strict {
            assert_eq!(again.status, Status::Holds);
        }
        let record = e.candidate.record().unwrap();
        assert_eq!(parse(&record.text, &basis).unwrap().difference(), e.candidate.difference());
        keys.push(canonical_difference(&e.candidate).unwrap().key());
    }
    let n = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), n);
}

#[test]
fn group_catalog_run_holds_on_every_record() {
    let catalog = build_catalog().unwrap();
    let dataset = catalog_dataset(&catalog);
    let basis = builtin_basis("groups").unwrap();
    let config = OracleConfig {
        batch_size: 8,
        restarts: 12,
        ..OracleConfig::default()
    };
    let run = run_oracle(&config, &dataset, &basis, None).unwrap();
    let domain = Domain::rows("catalog", dataset.rows.clone());
    for e in &run.candidates {
        let r = verify(&e.candidate, &domain, None).unwrap();
        assert_ne!(r.status, Status::Falsified, "{}", e.candidate);
    }
}

#[test]
fn empty_dataset_is_rejected() {
    let basis = builtin_basis("pi-ab").unwrap();
    let domain = Domain::parse("a=2..3,b=2..3").unwrap();
    let config = OracleConfig::default();
    assert!(run_oracle_on(&config, &basis, &[], &domain, None).is_err());
}
