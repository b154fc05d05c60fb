//! Factorisation of polynomial sequences on nilmanifolds, at desk scale.
//!
//! A polynomial sequence `g` into a filtered nilpotent Lie group `G` (given in
//! Mal'cev coordinates of the second kind, with integer lattice `Γ = ℤ^m`) is
//! factorised as a pointwise-exact product
//!
//! ```text
//!     g(n) = ε(n) · g'(n) · γ(n)
//! ```
//!
//! where `ε` is slowly varying (small steps in the coordinate quasi-metric),
//! `γ` is rational (every value has a power in the lattice, with small
//! smooth period mod `Γ`), and `g'` takes values in a rational subgroup on
//! which it passes a quantitative equidistribution test.  A stronger recursive
//! form splits the range `{1..T}` into residue classes along smooth dilations
//! until every leaf restriction passes the test; the tree has height at most
//! the group dimension, and each leaf's assembled factors satisfy the same
//! exact reconstruction identity.
//!
//! Everything claimed by a factorisation is checkable by independent numeric
//! oracles: direct defect measurement over progressions, obstruction searches
//! over character lattices, rationality/period scans by brute force.  Exact
//! rational arithmetic is used wherever periodicity or rationality logic
//! depends on it; irrational constants are tracked as high-precision balls
//! with explicit error radii.
//!
//! Module map:
//! * [`scalar`] — exact rationals and radius-tracked constants
//! * [`group`] — filtered groups, presets, coordinate arithmetic
//! * [`subgroup`] — rational subgroups, charts, integer lattice utilities
//! * [`polyseq`] — polynomial sequences, reindexing, products, phases
//! * [`smooth`] — smooth-number utilities and period scans
//! * [`equidist`] — defect oracles, verdicts, obstruction search
//! * [`factor`] — single factorisation step, certification, recursion tree
//! * [`io`] — JSON run specifications and reports

pub mod equidist;
pub mod factor;
pub mod io;
pub mod group;
pub mod lll;
pub mod polyseq;
pub mod scalar;
pub mod smooth;
pub mod subgroup;

pub use group::{FilteredGroup, GroupElement};
pub use polyseq::{HorizontalCharacter, PolyPhase, PolySequence};
pub use scalar::Scalar;
