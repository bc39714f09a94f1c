//! Bottleneck (ℓ∞) transport between spectra on the log-mass line.
//!
//! On the line the monotone coupling is optimal for every cost that is a
//! non-decreasing function of the move length, so the plain distance reduces
//! to the largest gap between the two quantile functions.

mod oracle;

pub use oracle::{brute_force_emd, ORACLE_MAX_PAIRS};

use crate::error::{Error, Result};
use crate::spectra::{log_positions, position, quantile_function, QuantileFunction, SchmidtSpectrum};

/// Mass intervals shorter than this are rounding artifacts of prefix sums.
pub const SLIVER: f64 = 1e-12;

/// Absolute tolerance on distance comparisons.
pub const DISTANCE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanEdge {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

/// A coupling between the atoms of two spectra.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub source: SchmidtSpectrum,
    pub target: SchmidtSpectrum,
    pub edges: Vec<PlanEdge>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.source.len()];
        for e in &self.edges {
            rows[e.i] += e.mass;
        }
        rows
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.target.len()];
        for e in &self.edges {
            cols[e.j] += e.mass;
        }
        cols
    }

    /// Longest distance any edge moves mass.
    pub fn max_move(&self) -> f64 {
        let ps = self.source.positions();
        let pt = self.target.positions();
        self.edges.iter().map(|e| (ps[e.i] - pt[e.j]).abs()).fold(0.0, f64::max)
    }

    /// Marginals reproduce both spectra within `tol` and every mass is positive.
    pub fn is_valid(&self, tol: f64) -> bool {
        let within = |sums: Vec<f64>, sp: &SchmidtSpectrum| {
            sums.iter().zip(sp.coefficients()).all(|(s, c)| (s - c).abs() <= tol)
        };
        self.edges.iter().all(|e| e.mass > 0.0 && e.i < self.source.len() && e.j < self.target.len())
            && within(self.row_sums(), &self.source)
            && within(self.col_sums(), &self.target)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmdResult {
    pub distance: f64,
    pub witness: TransportPlan,
    pub max_move: f64,
}

pub fn emd_linf(chi: &SchmidtSpectrum, ups: &SchmidtSpectrum) -> EmdResult {
    let distance = emd_linf_quantile(chi, ups);
    let witness = monotone_coupling(chi, ups);
    let max_move = witness.max_move();
    EmdResult { distance, witness, max_move }
}

pub fn emd_linf_quantile(chi: &SchmidtSpectrum, ups: &SchmidtSpectrum) -> f64 {
    let fc = quantile_function(&log_positions(chi));
    let fu = quantile_function(&log_positions(ups));
    let mut cuts: Vec<f64> = fc.breakpoints().iter().chain(fu.breakpoints()).copied().collect();
    sort_dedup(&mut cuts);
    cuts.windows(2)
        .filter(|w| w[1] - w[0] > SLIVER)
        .map(|w| {
            let q = 0.5 * (w[0] + w[1]);
            (fc.eval(q) - fu.eval(q)).abs()
        })
        .fold(0.0, f64::max)
}

/// Quantile distance where each `q` may be matched to any `r` within `ε`.
///
/// The quantity maximized over `q` is `min_{r ∈ [q-ε, q+ε] ∩ [0,1]} |F_χ(q) − F_υ(r)|`.
/// It is piecewise constant between the breakpoints of `F_χ` and the
/// breakpoints of `F_υ` shifted by `±ε`, and at a cut point it equals its
/// value just to the left, so one midpoint per piece suffices.
pub fn smoothed_emd(chi: &SchmidtSpectrum, ups: &SchmidtSpectrum, eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::EpsOutOfRange(eps));
    }
    let fc = quantile_function(&log_positions(chi));
    let fu = quantile_function(&log_positions(ups));
    let mut cuts: Vec<f64> = fc.breakpoints().to_vec();
    for &b in fu.breakpoints() {
        cuts.extend([b, b - eps, b + eps].into_iter().filter(|x| (0.0..=1.0).contains(x)));
    }
    sort_dedup(&mut cuts);
    let best = cuts
        .windows(2)
        .filter(|w| w[1] - w[0] > SLIVER)
        .map(|w| window_gap(&fc, &fu, 0.5 * (w[0] + w[1]), eps))
        .fold(0.0, f64::max);
    Ok(best)
}

fn window_gap(fc: &QuantileFunction, fu: &QuantileFunction, q: f64, eps: f64) -> f64 {
    let a = fc.eval(q);
    let lo = fu.segment((q - eps).max(0.0));
    let hi = fu.segment((q + eps).min(1.0));
    fu.values()[lo..=hi].iter().map(|v| (a - v).abs()).fold(f64::INFINITY, f64::min)
}

/// A coupling whose moves are all within `μ`, if one exists.
///
/// The monotone coupling minimizes the longest move, so it is feasible
/// exactly when any coupling is.
pub fn feasible_coupling(chi: &SchmidtSpectrum, ups: &SchmidtSpectrum, mu: f64) -> Option<TransportPlan> {
    let plan = monotone_coupling(chi, ups);
    (plan.max_move() <= mu + DISTANCE_TOL).then_some(plan)
}

/// North-west-corner coupling over atoms in ascending position.
pub fn monotone_coupling(chi: &SchmidtSpectrum, ups: &SchmidtSpectrum) -> TransportPlan {
    let pc = prefix_sums(chi.coefficients());
    let pu = prefix_sums(ups.coefficients());
    let mut edges = Vec::with_capacity(chi.len() + ups.len());
    let (mut i, mut j) = (0, 0);
    while i < chi.len() && j < ups.len() {
        let (end_c, end_u) = (pc[i + 1], pu[j + 1]);
        let overlap = end_c.min(end_u) - pc[i].max(pu[j]);
        if overlap > SLIVER {
            edges.push(PlanEdge { i, j, mass: overlap });
        }
        if end_c <= end_u {
            i += 1;
        }
        if end_u <= end_c {
            j += 1;
        }
    }
    TransportPlan { source: chi.clone(), target: ups.clone(), edges }
}

fn prefix_sums(masses: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(masses.len() + 1);
    out.push(0.0);
    let (mut acc, mut comp) = (0.0f64, 0.0f64);
    for &m in masses {
        let y = m - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        out.push(acc);
    }
    *out.last_mut().expect("non-empty") = 1.0;
    out
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

/// `|log₂ χ_i − log₂ υ_j|` for one pair of atoms.
pub fn pair_distance(a: f64, b: f64) -> f64 {
    (position(a) - position(b)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(v: &[f64]) -> SchmidtSpectrum {
        SchmidtSpectrum::new(v).unwrap()
    }

    fn worked_pair() -> (SchmidtSpectrum, SchmidtSpectrum) {
        (sp(&[1.0]), sp(&[0.9, 0.025, 0.025, 0.025, 0.025]))
    }

    #[test]
    fn plain_distance_examples() {
        let s = sp(&[0.4, 0.35, 0.25]);
        assert_eq!(emd_linf(&s, &s).distance, 0.0);
        assert_eq!(emd_linf(&sp(&[0.5, 0.5]), &sp(&[0.25; 4])).distance, 1.0);
        assert_eq!(emd_linf(&sp(&[0.75, 0.25]), &sp(&[0.5, 0.5])).distance, 1.0);
        assert_eq!(emd_linf_quantile(&sp(&[1.0]), &sp(&[0.5, 0.5])), 1.0);
        let (c, u) = worked_pair();
        assert!((emd_linf_quantile(&c, &u) - 40f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn smoothed_examples() {
        let (c, u) = worked_pair();
        let d = smoothed_emd(&c, &u, 0.1).unwrap();
        assert!((d - (10.0f64 / 9.0).log2()).abs() < 1e-12);
        assert_eq!(smoothed_emd(&sp(&[1.0]), &sp(&[0.5, 0.5]), 0.1).unwrap(), 1.0);
        assert_eq!(smoothed_emd(&c, &u, 0.0).unwrap(), emd_linf_quantile(&c, &u));
        assert!(matches!(smoothed_emd(&c, &u, 1.5), Err(Error::EpsOutOfRange(_))));
        assert!(matches!(smoothed_emd(&c, &u, -0.1), Err(Error::EpsOutOfRange(_))));
        assert!(smoothed_emd(&c, &u, f64::NAN).is_err());
    }

    #[test]
    fn feasible_coupling_examples() {
        let (h, q) = (sp(&[0.5, 0.5]), sp(&[0.25; 4]));
        let plan = feasible_coupling(&h, &q, 1.0).unwrap();
        assert_eq!(plan.edges.len(), 4);
        assert!(plan.edges.iter().all(|e| (e.mass - 0.25).abs() < 1e-15));
        assert!(plan.is_valid(1e-9));
        assert!(feasible_coupling(&h, &q, 0.5).is_none());

        let s = sp(&[0.5, 0.3, 0.2]);
        let id = feasible_coupling(&s, &s, 0.0).unwrap();
        let pairs: Vec<_> = id.edges.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    /// Dense grid evaluation of the smoothed objective, independent of the
    /// breakpoint sweep.
    fn grid_smoothed(c: &SchmidtSpectrum, u: &SchmidtSpectrum, eps: f64, n: usize) -> f64 {
        let fc = quantile_function(&log_positions(c));
        let fu = quantile_function(&log_positions(u));
        let pts: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
        pts.iter()
            .map(|&q| {
                pts.iter()
                    .filter(|&&r| (r - q).abs() <= eps + 1e-15)
                    .map(|&r| (fc.eval(q) - fu.eval(r)).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn smoothed_matches_grid_on_dyadic_inputs() {
        // masses on a 1/16 grid so the 1/64 grid sees every piece
        let c = sp(&[0.5, 0.25, 0.125, 0.0625, 0.0625]);
        let u = sp(&[0.375, 0.375, 0.1875, 0.0625]);
        for eps in [0.0, 0.0625, 0.125, 0.25, 0.5] {
            let exact = smoothed_emd(&c, &u, eps).unwrap();
            let grid = grid_smoothed(&c, &u, eps, 64);
            assert!((exact - grid).abs() < 1e-12, "eps {eps}: {exact} vs {grid}");
        }
    }

    fn spectrum() -> impl Strategy<Value = SchmidtSpectrum> {
        prop::collection::vec(1e-3f64..1.0, 1..8)
            .prop_map(|v| crate::spectra::normalize_spectrum(&v, 1e-9, true).unwrap())
    }

    proptest! {
        #[test]
        fn oracle_agrees(c in spectrum(), u in spectrum()) {
            let r = emd_linf(&c, &u);
            prop_assert!(r.witness.is_valid(1e-9));
            prop_assert!(r.max_move <= r.distance + 1e-9);
            prop_assert!((r.distance - brute_force_emd(&c, &u).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn symmetric_and_triangle(a in spectrum(), b in spectrum(), c in spectrum()) {
            prop_assert_eq!(emd_linf(&a, &b).distance, emd_linf(&b, &a).distance);
            let ac = emd_linf(&a, &c).distance;
            prop_assert!(ac <= emd_linf(&a, &b).distance + emd_linf(&b, &c).distance + 1e-9);
        }

        #[test]
        fn feasibility_threshold(c in spectrum(), u in spectrum(), slack in -1.0f64..1.0) {
            let d = emd_linf(&c, &u).distance;
            let mu = (d + slack).max(0.0);
            prop_assert_eq!(feasible_coupling(&c, &u, mu).is_some(), mu >= d - 1e-9);
        }

        #[test]
        fn smoothing_is_monotone(c in spectrum(), u in spectrum()) {
            let plain = emd_linf(&c, &u).distance;
            let mut prev = smoothed_emd(&c, &u, 0.0).unwrap();
            prop_assert_eq!(prev, plain);
            for k in 1..=10 {
                let cur = smoothed_emd(&c, &u, k as f64 * 0.05).unwrap();
                prop_assert!(cur <= prev);
                prev = cur;
            }
        }
    }
}
