//! Closed-form fidelity bounds and their empirical counterparts.

use super::grouping::BinComponent;
use crate::error::{Error, Result};
use crate::simulator::{apply_comm_unitary, make_canonical_state_in, BipartiteState, BoundCheck, CommUnitary};
use crate::spectra::SchmidtSpectrum;
use crate::transport::smoothed_emd;

const HOLD_TOL: f64 = 1e-9;

/// Human-readable forms of the evaluated expressions.
pub const H_FORMULA: &str = "h = 4 * 2^((3Q - d) / 2)";
pub const BOUND_FORMULA: &str = "bound = 1 - eps^2/4 + 6h";
pub const BOUND_FORMULA_EIGHTH: &str = "bound_eighth = 1 - eps^2/8 + 6h";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBoundReport {
    pub epsilon: f64,
    pub q: f64,
    pub d: f64,
    pub h: f64,
    /// `1 − ε²/4 + 6h`.
    pub bound: f64,
    /// The same expression with `ε²/8`.
    pub bound_eighth: f64,
}

pub fn evaluate_lower_bound(eps: f64, q: f64, d: f64) -> Result<LowerBoundReport> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if !(q >= 0.0 && q.is_finite()) || !(d >= 0.0 && d.is_finite()) {
        return Err(Error::OutOfDomain(format!("Q = {q}, d = {d} must be finite and nonnegative")));
    }
    let h = 4.0 * 2f64.powf((3.0 * q - d) / 2.0);
    Ok(LowerBoundReport {
        epsilon: eps,
        q,
        d,
        h,
        bound: 1.0 - eps * eps / 4.0 + 6.0 * h,
        bound_eighth: 1.0 - eps * eps / 8.0 + 6.0 * h,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmpiricalBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub report: LowerBoundReport,
}

/// Runs `u` on the canonical `ψ` and compares `|⟨φ|𝒰|ψ⟩|` with the bound at
/// the smoothed distance. Both states are embedded in registers of the larger
/// rank.
pub fn check_lower_bound_empirically(
    psi: &SchmidtSpectrum,
    phi: &SchmidtSpectrum,
    eps: f64,
    u: &CommUnitary,
) -> Result<EmpiricalBound> {
    let dim = psi.len().max(phi.len());
    let start = make_canonical_state_in(psi, dim)?;
    let target = u.prepare(&make_canonical_state_in(phi, dim)?)?;
    let out = apply_comm_unitary(&start, u)?;
    let lhs = target.inner_product(&out)?.norm();
    let d = smoothed_emd(psi, phi, eps)?;
    let report = evaluate_lower_bound(eps, f64::from(u.comm_cost()), d)?;
    Ok(EmpiricalBound { lhs, rhs: report.bound, holds: lhs <= report.bound + HOLD_TOL, report })
}

/// A bin component as a (subnormalized) state together with its bin index.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentState {
    pub bin: i64,
    pub norm_sq: f64,
    pub state: BipartiteState,
}

impl ComponentState {
    pub fn new(bin: &BinComponent, state: BipartiteState) -> Self {
        ComponentState { bin: bin.j, norm_sq: bin.norm_sq, state }
    }
}

/// `|⟨φ_k|𝒰|φ_j⟩| ≤ 2^{3M/2} · 2^{−N|j−k|/2 + 2} · ‖φ_{min(j,k)}‖²`.
pub fn check_offdiag_bound(
    phi_j: &ComponentState,
    phi_k: &ComponentState,
    u: &CommUnitary,
    n: u32,
) -> Result<BoundCheck> {
    let out = apply_comm_unitary(&phi_j.state, u)?;
    let bra = u.prepare(&phi_k.state)?;
    let lhs = bra.inner_product(&out)?.norm();
    let m = f64::from(u.comm_cost());
    let gap = (phi_j.bin - phi_k.bin).abs() as f64;
    let heavier = if phi_j.bin <= phi_k.bin { phi_j.norm_sq } else { phi_k.norm_sq };
    let rhs = 2f64.powf(1.5 * m) * 2f64.powf(-(n as f64) * gap / 2.0 + 2.0) * heavier;
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs + HOLD_TOL })
}

/// `√(p−ε)√p + √(1−p)√(1−p+ε) ≤ 1 − ε²/8` for `0 ≤ ε ≤ p ≤ 1`.
pub fn fact_calculus_check(p: f64, eps: f64) -> Result<BoundCheck> {
    let slack = 1e-12;
    if !(eps >= 0.0 && eps <= p + slack && p <= 1.0 + slack) {
        return Err(Error::OutOfDomain(format!("need 0 ≤ ε ≤ p ≤ 1, got p = {p}, ε = {eps}")));
    }
    let lhs = (p - eps).max(0.0).sqrt() * p.sqrt() + (1.0 - p).max(0.0).sqrt() * (1.0 - p + eps).max(0.0).sqrt();
    let rhs = 1.0 - eps * eps / 8.0;
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}
