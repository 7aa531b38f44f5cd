//! Shared helpers for the integration tests: random problem generators and
//! a brute-force projection oracle that is independent of the production
//! active-set solver.
//!
//! Each test binary compiles this module independently and uses a subset of
//! the helpers, so unused-code lints are suppressed.
#![allow(dead_code)]

use rand::Rng;
use unicv::cone::{ConeSpec, Constraint};
use unicv::linalg::{lu_solve, Mat};

/// Random symmetric positive-definite matrix with eigenvalues bounded away
/// from zero: `G'G / d + I/2` for a square `G` with standard-normal-ish
/// entries.
pub fn random_spd(rng: &mut impl Rng, d: usize) -> Mat {
    let g = Mat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let mut out = g.transpose().matmul(&g);
    out.scale(1.0 / d.max(1) as f64);
    for i in 0..d {
        out[(i, i)] += 0.5;
    }
    out
}

/// Random cone mixing all three constraint kinds.
pub fn random_cone(rng: &mut impl Rng, d: usize) -> ConeSpec {
    let constraints = (0..d)
        .map(|_| {
            let u: f64 = rng.random();
            if u < 0.2 {
                Constraint::FixedZero
            } else if u < 0.7 {
                Constraint::LowerBound(rng.random_range(-2.0..2.0))
            } else {
                Constraint::Free
            }
        })
        .collect();
    ConeSpec::new(constraints).expect("finite bounds")
}

/// Brute-force cone projection: enumerate every candidate active set (each
/// subset of the bounded coordinates, with pinned-to-zero coordinates
/// always fixed), solve the equality-restricted stationarity system by
/// dense LU, keep the feasible candidates, and return the best.
///
/// This is exponential in the number of bounded coordinates and exists only
/// to cross-check the production solver on small problems.
pub fn brute_force_project(weight: &Mat, center: &[f64], cone: &ConeSpec) -> (Vec<f64>, f64) {
    let d = center.len();
    let mut always_pinned: Vec<(usize, f64)> = Vec::new();
    let mut bounded: Vec<(usize, f64)> = Vec::new();
    for i in 0..d {
        match cone.constraint(i) {
            Constraint::FixedZero => always_pinned.push((i, 0.0)),
            Constraint::LowerBound(l) => bounded.push((i, l)),
            Constraint::Free => {}
        }
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1 << bounded.len()) {
        let mut pinned = always_pinned.clone();
        for (bit, &(i, l)) in bounded.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                pinned.push((i, l));
            }
        }
        let pinned_idx: Vec<usize> = pinned.iter().map(|&(i, _)| i).collect();
        let free: Vec<usize> = (0..d).filter(|i| !pinned_idx.contains(i)).collect();

        // Stationarity on the free block: W_FF (x_F - z_F) = -W_FP (x_P - z_P).
        let mut x = vec![0.0; d];
        for &(i, v) in &pinned {
            x[i] = v;
        }
        if !free.is_empty() {
            let w_ff = weight.submatrix(&free, &free);
            let rhs: Vec<f64> = free
                .iter()
                .map(|&f| {
                    -pinned.iter().map(|&(i, v)| weight[(f, i)] * (v - center[i])).sum::<f64>()
                })
                .collect();
            let sol = match lu_solve(&w_ff, &rhs, "oracle free block") {
                Ok(s) => s,
                Err(_) => continue,
            };
            for (k, &f) in free.iter().enumerate() {
                x[f] = center[f] + sol[k];
            }
        }

        // Feasibility of the free coordinates that carry bounds.
        let feasible = bounded
            .iter()
            .all(|&(i, l)| pinned_idx.contains(&i) || x[i] >= l - 1e-9 * (1.0 + l.abs()));
        if !feasible {
            continue;
        }
        let diff: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
        let obj = weight.quad_form(&diff);
        if best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((x, obj));
        }
    }
    best.expect("the true active set always yields a feasible candidate")
}
