pub mod dataset;
pub mod function_space;
pub mod group_algebra;
pub mod number_theory_data;
pub mod oracle;
pub mod simple_group_data;
pub mod verifier;

pub use dataset::{Dataset, DatasetRow, Scalar};
pub use function_space::{
    builtin_basis, CandidateConjecture, ConjectureRecord, FeatureBasis, Relation,
};
pub use number_theory_data::PrimePiTable;
pub use oracle::{run_oracle, run_oracle_on, OracleConfig, OracleRun};
pub use simple_group_data::GroupRecord;
pub use verifier::{verify, Domain, Status, VerificationReport};
