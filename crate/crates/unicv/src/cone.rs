//! Constraint sets for the projection problems: products of per-coordinate
//! intervals of the form `{0}`, `[l, +inf)`, or the whole line.

use crate::error::{Error, Result};

/// Constraint on a single coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// Coordinate pinned to exactly zero.
    FixedZero,
    /// Coordinate restricted to `[value, +inf)`. The bound may be negative
    /// or zero; `-inf` is normalized to [`Constraint::Free`] on construction.
    LowerBound(f64),
    /// Unconstrained coordinate.
    Free,
}

/// A product of per-coordinate constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    constraints: Vec<Constraint>,
}

impl ConeSpec {
    /// Builds a cone, normalizing `LowerBound(-inf)` to `Free` and rejecting
    /// NaN or `+inf` bounds (the latter would describe an empty set).
    pub fn new(constraints: Vec<Constraint>) -> Result<Self> {
        let mut normalized = constraints;
        for c in &mut normalized {
            if let Constraint::LowerBound(v) = *c {
                if v == f64::NEG_INFINITY {
                    *c = Constraint::Free;
                } else if !v.is_finite() {
                    return Err(Error::InvalidBound { value: v });
                }
            }
        }
        Ok(ConeSpec { constraints: normalized })
    }

    /// The nonnegative orthant in `dim` coordinates.
    pub fn nonnegative(dim: usize) -> Self {
        ConeSpec { constraints: vec![Constraint::LowerBound(0.0); dim] }
    }

    /// The whole space in `dim` coordinates.
    pub fn free(dim: usize) -> Self {
        ConeSpec { constraints: vec![Constraint::Free; dim] }
    }

    /// Number of coordinates.
    pub fn dim(&self) -> usize {
        self.constraints.len()
    }

    /// The per-coordinate constraints.
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Constraint on coordinate `i`.
    pub fn constraint(&self, i: usize) -> Constraint {
        self.constraints[i]
    }

    /// Whether `x` satisfies every constraint within `tol` (absolute, per
    /// coordinate).
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && self.constraints.iter().zip(x).all(|(c, &xi)| match *c {
                Constraint::FixedZero => xi.abs() <= tol,
                Constraint::LowerBound(l) => xi >= l - tol,
                Constraint::Free => true,
            })
    }

    /// Whether every point of `self` lies in `other` (exact set inclusion,
    /// coordinate by coordinate).
    pub fn is_subset_of(&self, other: &ConeSpec) -> bool {
        self.dim() == other.dim()
            && self
                .constraints
                .iter()
                .zip(&other.constraints)
                .all(|(a, b)| match (*a, *b) {
                    (_, Constraint::Free) => true,
                    (Constraint::FixedZero, Constraint::FixedZero) => true,
                    (Constraint::FixedZero, Constraint::LowerBound(l)) => l <= 0.0,
                    (Constraint::LowerBound(la), Constraint::LowerBound(lb)) => la >= lb,
                    _ => false,
                })
    }
}
