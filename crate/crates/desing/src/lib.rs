//! Exact resolution of singularities for binomial-class hypersurfaces and
//! ideals over the rationals.
//!
//! The engine computes the desingularization invariant `inv` at coordinate
//! strata of a chart atlas, selects centres as maximum loci of the extended
//! invariant, and blows up until a mode-dependent stop condition holds.

pub mod invariant;
pub mod polyring;
pub mod presentations;
pub mod tower;
