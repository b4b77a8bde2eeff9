//! Wold-type decompositions for tuples of contractions that commute up to a
//! family of unitary twists.
//!
//! Two backends live side by side:
//!
//! * a dense numeric backend ([`subspace`], [`operator`], [`canonical`],
//!   [`twisted`], [`multi`]) working on complex matrices, and
//! * an exact backend ([`lattice`]) for monomial operators on multi-index
//!   lattices (weighted shifts, diagonal phases and their products), with a
//!   bridge that densifies lattice tuples on a finite window so the two can be
//!   checked against each other.
//!
//! [`zoo`] builds the standard instances, [`io`] and [`report`] cover the file
//! formats used by the `twold` command-line tool.

pub mod canonical;
mod dense;
pub mod error;
pub mod io;
pub mod lattice;
pub mod multi;
pub mod operator;
pub mod report;
pub mod subspace;
pub mod tolerance;
pub mod twisted;
pub mod zoo;

pub use error::{Error, Result};
pub use faer::c64;
pub use operator::DenseOperator;
pub use subspace::SubspaceBasis;
pub use tolerance::ToleranceProfile;
