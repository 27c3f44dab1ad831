//! Subset selection for maximum-entropy (log-determinant) and A-optimal
//! (trace-of-inverse) principal submatrices, with continuous relaxations,
//! randomized and derandomized rounding, local search, and dual certificates.

pub mod amesp;
pub mod error;
pub mod esp;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod local_search;
pub mod oracle;
mod par;
pub mod relaxation;
pub mod sampling;
pub mod spectral;
pub mod subset;

pub use error::{MespError, Result};
pub use linalg::{factorize, CovarianceInstance, Matrix, SymMatrix, Vector};
