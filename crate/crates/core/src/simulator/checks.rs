//! Overlap bounds in terms of Schmidt rank and largest Schmidt coefficients.

use super::comm::{apply_comm_unitary, CommUnitary};
use super::state::{schmidt_values, BipartiteState, RANK_TOL};
use crate::error::{Error, Result};

const HOLD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommBoundCheck {
    pub q: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub rank_before: usize,
    pub rank_after: usize,
    /// `SR(𝒰ν) ≤ 2^Q · SR(ν)`.
    pub rank_growth_holds: bool,
    pub max_before: f64,
    pub max_after: f64,
    /// `λ_max(𝒰ν) ≤ 2^Q · λ_max(ν)`.
    pub max_growth_holds: bool,
}

impl CommBoundCheck {
    pub fn all_hold(&self) -> bool {
        self.holds && self.rank_growth_holds && self.max_growth_holds
    }
}

fn rank_and_max(state: &BipartiteState) -> (usize, f64) {
    let values = schmidt_values(state);
    let rank = values.iter().filter(|v| v.sqrt() > RANK_TOL).count();
    (rank, values.first().copied().unwrap_or(0.0))
}

/// `|⟨ψ|ν⟩| ≤ SR(ψ) · √(λ_max(ψ) · λ_max(ν))`.
pub fn check_innerprod_bound(psi: &BipartiteState, nu: &BipartiteState) -> Result<BoundCheck> {
    if !psi.same_shape(nu) {
        return Err(Error::ShapeMismatch("states have different registers".into()));
    }
    let lhs = psi.inner_product(nu)?.norm();
    let (sr, lam) = rank_and_max(psi);
    let (_, nu_max) = rank_and_max(nu);
    let rhs = sr as f64 * (lam * nu_max).sqrt();
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs + HOLD_TOL })
}

/// `|⟨ψ|𝒰|ν⟩| ≤ 2^{3Q/2} · SR(ψ) · √(λ_max(ψ) · λ_max(ν))`, plus the rank and
/// largest-coefficient growth of `𝒰|ν⟩`.
///
/// `ψ` is extended by the workspace in `|0⟩` and its Schmidt data are taken
/// across the cut in which `𝒰|ν⟩` ends.
pub fn check_comm_innerprod_bound(
    psi: &BipartiteState,
    nu: &BipartiteState,
    u: &CommUnitary,
) -> Result<CommBoundCheck> {
    if !psi.same_shape(nu) {
        return Err(Error::ShapeMismatch("states have different registers".into()));
    }
    let q = u.comm_cost();
    let start = u.prepare(nu)?;
    let out = apply_comm_unitary(nu, u)?;
    let psi_out = u.prepare(psi)?.with_owners_of(&out);

    let lhs = psi_out.inner_product(&out)?.norm();
    let (sr_psi, lam_psi) = rank_and_max(&psi_out);
    let (rank_before, max_before) = rank_and_max(&start);
    let (rank_after, max_after) = rank_and_max(&out);
    let growth = 2f64.powi(q as i32);
    let rhs = 2f64.powf(1.5 * q as f64) * sr_psi as f64 * (lam_psi * max_before).sqrt();
    Ok(CommBoundCheck {
        q,
        lhs,
        rhs,
        holds: lhs <= rhs + HOLD_TOL,
        rank_before,
        rank_after,
        rank_growth_holds: rank_after as f64 <= growth * rank_before as f64,
        max_before,
        max_after,
        max_growth_holds: max_after <= growth * max_before + HOLD_TOL,
    })
}
