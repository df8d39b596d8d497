//! Elliptic special functions, analytic difference operators of Sklyanin and
//! van Diejen type, and a seeded numerical harness that verifies their
//! identities, residue conditions, dimension counts, and kernel identities.

pub mod adops;
pub mod coeffspace;
pub mod error;
pub mod linalg;
pub mod params;
pub mod report;
pub mod repn;
pub mod specfun;
pub mod value;
pub mod verify;

pub use error::{Error, Result};
pub use params::{c64, EllipticParams, Sign, TruncationPolicy};
pub use report::VerificationReport;
pub use value::CVal;
