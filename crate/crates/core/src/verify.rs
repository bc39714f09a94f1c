//! Seeded property suites over every module.
//!
//! Each suite draws its cases from `case_seed(seed, suite, idx)`, so reports
//! are identical for identical configurations regardless of `jobs`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flows::{build_three_stage_flows, flow_degree, verify_flow};
use crate::io::{spectrum_from_json, spectrum_to_json};
use crate::protocols::{conversion_budget, conversion_protocol, protocol_cost, reverse_protocol};
use crate::sampling::{
    case_seed, random_binned_spectrum, random_close_pair, random_comm_unitary, random_kind, random_spectrum,
    random_state,
};
use crate::simulator::{
    check_comm_innerprod_bound, check_innerprod_bound, fidelity, make_canonical_state, run_protocol,
};
use crate::spectra::{normalize_spectrum, SchmidtSpectrum};
use crate::transport::{brute_force_emd, emd_linf, emd_linf_quantile, smoothed_emd};
use crate::universality::{
    bin_components, block_decompose, build_grouped_state, check_lower_bound_empirically, check_offdiag_bound,
    component_state, fact_calculus_check, ComponentState,
};

pub const SUITES: [&str; 11] = [
    "spectra",
    "transport",
    "smoothing",
    "flows",
    "protocols",
    "simulator",
    "grouping",
    "blocks",
    "calculus",
    "lowerbound",
    "offdiag",
];

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Overrides each suite's default case count.
    pub cases: Option<usize>,
    /// Fixes ε where a suite would otherwise draw it.
    pub eps: Option<f64>,
    pub jobs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: DEFAULT_SEED, cases: None, eps: None, jobs: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyReport {
    pub family: String,
    pub checked: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub passed: bool,
    pub families: Vec<FamilyReport>,
}

/// Outcome of one invariant on one case.
type Outcome = (&'static str, bool, String);

fn outcome(family: &'static str, ok: bool, detail: impl FnOnce() -> String) -> Outcome {
    (family, ok, if ok { String::new() } else { detail() })
}

pub fn default_cases(suite: &str) -> usize {
    match suite {
        "spectra" => 500,
        "transport" => 1000,
        "smoothing" => 500,
        "flows" => 500,
        "protocols" => 100,
        "simulator" => 1000,
        "grouping" => 500,
        "blocks" => 200,
        "calculus" => 1,
        "lowerbound" => 200,
        "offdiag" => 200,
        _ => 0,
    }
}

pub fn run_suite(suite: &str, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let case: fn(&mut ChaCha8Rng, &VerifyConfig, usize) -> Result<Vec<Outcome>> = match suite {
        "spectra" => spectra_case,
        "transport" => transport_case,
        "smoothing" => smoothing_case,
        "flows" => flows_case,
        "protocols" => protocols_case,
        "simulator" => simulator_case,
        "grouping" => grouping_case,
        "blocks" => blocks_case,
        "calculus" => calculus_case,
        "lowerbound" => lowerbound_case,
        "offdiag" => offdiag_case,
        other => return Err(Error::OutOfDomain(format!("unknown suite {other:?}"))),
    };
    if let Some(eps) = cfg.eps {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::EpsOutOfRange(eps));
        }
    }
    let cases = cfg.cases.unwrap_or_else(|| default_cases(suite));
    let run = |idx: usize| -> Vec<Outcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed(cfg.seed, suite, idx as u64));
        match case(&mut rng, cfg, idx) {
            Ok(o) => o,
            Err(e) => vec![("errors", false, format!("case {idx}: {e}"))],
        }
    };
    let results: Vec<Vec<Outcome>> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::OutOfDomain(format!("thread pool: {e}")))?;
        pool.install(|| (0..cases).into_par_iter().map(run).collect())
    } else {
        (0..cases).map(run).collect()
    };

    let mut families: Vec<FamilyReport> = Vec::new();
    for (idx, outcomes) in results.into_iter().enumerate() {
        for (family, ok, detail) in outcomes {
            let pos = match families.iter().position(|f| f.family == family) {
                Some(p) => p,
                None => {
                    families.push(FamilyReport { family: family.into(), checked: 0, failed: 0, first_failure: None });
                    families.len() - 1
                }
            };
            let f = &mut families[pos];
            f.checked += 1;
            if !ok {
                f.failed += 1;
                f.first_failure.get_or_insert_with(|| format!("case {idx}: {detail}"));
            }
        }
    }
    let passed = families.iter().all(|f| f.failed == 0);
    Ok(SuiteReport { suite: suite.into(), seed: cfg.seed, cases, passed, families })
}

pub fn run_all(cfg: &VerifyConfig) -> Result<Vec<SuiteReport>> {
    SUITES.iter().map(|s| run_suite(s, cfg)).collect()
}

fn eps_or<R: Rng>(rng: &mut R, cfg: &VerifyConfig, lo: f64, hi: f64) -> f64 {
    cfg.eps.unwrap_or_else(|| rng.random_range(lo..=hi))
}

fn spectra_case(rng: &mut ChaCha8Rng, _: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let kind = random_kind(rng);
    let s = random_spectrum(rng, kind, 12);
    let c = s.coefficients();
    let sum: f64 = c.iter().sum();
    let again = normalize_spectrum(c, 1e-9, true)?;
    let back = spectrum_from_json(&spectrum_to_json(&s)?)?;
    Ok(vec![
        outcome("sorted", c.windows(2).all(|w| w[0] >= w[1]), || format!("{c:?}")),
        outcome("normalized", (sum - 1.0).abs() <= 1e-12, || format!("sum {sum}")),
        outcome("positive", c.iter().all(|&x| x > 0.0), || format!("{c:?}")),
        outcome("idempotent", again.coefficients() == c, || format!("{c:?}")),
        outcome("json_round_trip", back == s, || format!("{c:?}")),
    ])
}

fn transport_case(rng: &mut ChaCha8Rng, _: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let (ka, kb) = (random_kind(rng), random_kind(rng));
    let a = random_spectrum(rng, ka, 8);
    let b = random_spectrum(rng, kb, 8);
    let r = emd_linf(&a, &b);
    let q = emd_linf_quantile(&a, &b);
    let o = brute_force_emd(&a, &b)?;
    let back = emd_linf(&b, &a).distance;
    Ok(vec![
        outcome("quantile_equivalence", (r.distance - q).abs() <= 1e-9, || format!("{} vs {q}", r.distance)),
        outcome("oracle_equivalence", (r.distance - o).abs() <= 1e-9, || format!("{} vs {o}", r.distance)),
        outcome("witness_valid", r.witness.is_valid(1e-9), || "witness marginals".into()),
        outcome("witness_tight", (r.max_move - r.distance).abs() <= 1e-9, || {
            format!("{} vs {}", r.max_move, r.distance)
        }),
        outcome("symmetric", (back - r.distance).abs() <= 1e-12, || format!("{} vs {back}", r.distance)),
    ])
}

/// Plain and smoothed distances of the worked example.
pub fn smoothing_example() -> Result<(f64, f64)> {
    let chi = SchmidtSpectrum::new(&[1.0])?;
    let ups = SchmidtSpectrum::new(&[0.9, 0.025, 0.025, 0.025, 0.025])?;
    Ok((smoothed_emd(&chi, &ups, 0.0)?, smoothed_emd(&chi, &ups, 0.1)?))
}

fn smoothing_case(rng: &mut ChaCha8Rng, _: &VerifyConfig, idx: usize) -> Result<Vec<Outcome>> {
    let (ka, kb) = (random_kind(rng), random_kind(rng));
    let a = random_spectrum(rng, ka, 8);
    let b = random_spectrum(rng, kb, 8);
    let plain = emd_linf(&a, &b).distance;
    let zero = smoothed_emd(&a, &b, 0.0)?;
    let grid = (0..=10).map(|k| smoothed_emd(&a, &b, k as f64 * 0.05)).collect::<Result<Vec<_>>>()?;
    let mut out = vec![
        outcome("zero_eps_equals_plain", (zero - plain).abs() <= 1e-12, || format!("{zero} vs {plain}")),
        outcome("monotone", grid.windows(2).all(|w| w[1] <= w[0] + 1e-12), || format!("{grid:?}")),
        outcome("bounded_by_plain", grid.iter().all(|&d| d <= plain + 1e-12), || format!("{grid:?}")),
    ];
    if idx == 0 {
        let (p, s) = smoothing_example()?;
        let (ep, es) = (40f64.log2(), (1.0f64 / 0.9).log2());
        out.push(outcome("worked_example", (p - ep).abs() <= 1e-6 && (s - es).abs() <= 1e-6, || format!("{p}, {s}")));
    }
    Ok(out)
}

fn flows_case(rng: &mut ChaCha8Rng, _: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let (ka, kb) = (random_kind(rng), random_kind(rng));
    let a = random_spectrum(rng, ka, 8);
    let b = random_spectrum(rng, kb, 8);
    let f = build_three_stage_flows(&a, &b)?;
    let c = f.ceil_distance();
    let (d1, d2, d3) = (flow_degree(&f.f1), flow_degree(&f.f2), flow_degree(&f.f3));
    Ok(vec![
        outcome("stage1_valid", verify_flow(&f.chi, &f.gamma, &f.f1)?, || "chi -> gamma".into()),
        outcome("stage2_valid", verify_flow(&f.gamma, &f.rho, &f.f2)?, || "gamma -> rho".into()),
        outcome("stage3_valid", verify_flow(&f.rho, &f.upsilon, &f.f3)?, || "rho -> upsilon".into()),
        outcome("stage1_degree", d1 <= 1 << (2 * c + 4), || format!("{d1} at c = {c}")),
        outcome("stage2_degree", d2 <= 1 << (c + 2), || format!("{d2} at c = {c}")),
        outcome("stage3_degree", d3 == 1 << (c + 2), || format!("{d3} at c = {c}")),
    ])
}

/// Checks shared by the protocol suite and the acceptance tests.
pub fn protocol_replay_outcomes(a: &SchmidtSpectrum, b: &SchmidtSpectrum) -> Result<Vec<(&'static str, bool, String)>> {
    let d = emd_linf(a, b).distance;
    let p = conversion_protocol(a, b)?;
    let cost = protocol_cost(&p);
    let budget = conversion_budget(d);
    let start = make_canonical_state(a)?;
    let out = run_protocol(&start, &p)?;
    let fwd = fidelity(&out, &make_canonical_state(b)?)?;
    let r = reverse_protocol(&p);
    let back = run_protocol(&out, &r)?;
    let rev = fidelity(&back, &start)?;
    Ok(vec![
        outcome("cost_within_budget", cost <= budget, || format!("cost {cost}, budget {budget}, d = {d}")),
        outcome("declared_cost", cost == p.declared_cost && out.comm_cost() == u64::from(cost), || {
            format!("steps {cost}, declared {}, replay {}", p.declared_cost, out.comm_cost())
        }),
        outcome("replay_fidelity", fwd >= 1.0 - 1e-9, || format!("{fwd}")),
        outcome("reverse_fidelity", rev >= 1.0 - 1e-9, || format!("{rev}")),
        outcome("reverse_involution", reverse_protocol(&r) == p, || "structure differs".into()),
    ])
}

fn protocols_case(rng: &mut ChaCha8Rng, _: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let (a, b) = random_close_pair(rng, 6, 2.0);
    protocol_replay_outcomes(&a, &b)
}

fn simulator_case(rng: &mut ChaCha8Rng, _: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let (da, db) = (rng.random_range(1..=4), rng.random_range(1..=4));
    let psi = random_state(rng, da, db)?;
    let nu = random_state(rng, da, db)?;
    let plain = check_innerprod_bound(&psi, &nu)?;
    let q = rng.random_range(0..=3);
    let u = random_comm_unitary(rng, q, (da, db));
    let c = check_comm_innerprod_bound(&psi, &nu, &u)?;
    Ok(vec![
        outcome("overlap_bound", plain.holds, || format!("{plain:?}")),
        outcome("comm_overlap_bound", c.holds, || format!("{c:?}")),
        outcome("rank_growth", c.rank_growth_holds, || format!("{c:?}")),
        outcome("max_growth", c.max_growth_holds, || format!("{c:?}")),
    ])
}

fn grouping_case(rng: &mut ChaCha8Rng, _: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let kind = random_kind(rng);
    let s = random_spectrum(rng, kind, 10);
    let mut out = Vec::new();
    for n in 2..=4 {
        let g = build_grouped_state(&s, n)?;
        let sum: f64 = g.spectrum.coefficients().iter().sum();
        let worst = g.offsets().into_iter().fold(0.0, f64::max);
        let d = emd_linf(&s, &g.spectrum).distance;
        let bins = bin_components(&g)?;
        let spread = bins.iter().map(|b| b.spread()).fold(0.0, f64::max);
        out.push(outcome("normalized", (sum - 1.0).abs() <= 1e-9, || format!("N = {n}: sum {sum}")));
        out.push(outcome("offset_at_most_one", worst <= 1.0 + 1e-12, || format!("N = {n}: {worst}")));
        out.push(outcome("distance_at_most_n", d <= f64::from(n) + 1e-9, || format!("N = {n}: {d}")));
        out.push(outcome("bin_spread_at_most_two", spread <= 2.0 + 1e-12, || format!("N = {n}: {spread}")));
    }
    Ok(out)
}

fn blocks_case(rng: &mut ChaCha8Rng, _: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let n = rng.random_range(2..=4);
    let s = random_binned_spectrum(rng, n, 20);
    let g = build_grouped_state(&s, n)?;
    let mut out = Vec::new();
    for b in 1..=3 {
        for eps in [0.25, 0.5] {
            let d = block_decompose(&g, eps, Some(b))?;
            let c = d.checks();
            let tag = move || format!("N = {n}, B = {b}, eps = {eps}");
            out.push(outcome("trace_gap", c.trace_gap_ok, || format!("{}: {}", tag(), d.trace_gap)));
            out.push(outcome("far_gap", c.far_gap_ok, || format!("{}: {:?}", tag(), c.far_min_gap)));
            out.push(outcome("lightest_class", c.s_trace_ok, || format!("{}: {:?}", tag(), d.s_traces)));
            out.push(outcome("block_spread", c.spread_ok, || format!("{}: {}", tag(), c.max_block_spread)));
            out.push(outcome("decomposition_sum", c.sum_ok, tag));
        }
    }
    Ok(out)
}

fn calculus_case(_: &mut ChaCha8Rng, _: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let mut out = Vec::new();
    for k in 1..=100 {
        for m in 1..=k {
            let (p, e) = (k as f64 / 100.0, m as f64 / 100.0);
            let c = fact_calculus_check(p, e)?;
            out.push(outcome("grid", c.holds, || format!("p = {p}, eps = {e}: {} > {}", c.lhs, c.rhs)));
        }
    }
    Ok(out)
}

fn lowerbound_case(rng: &mut ChaCha8Rng, cfg: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let (ka, kb) = (random_kind(rng), random_kind(rng));
    let psi = random_spectrum(rng, ka, 6);
    let phi = random_spectrum(rng, kb, 6);
    let eps = eps_or(rng, cfg, 0.01, 0.5);
    let q = rng.random_range(0..=3);
    let dim = psi.len().max(phi.len());
    let u = random_comm_unitary(rng, q, (dim, dim));
    let c = check_lower_bound_empirically(&psi, &phi, eps, &u)?;
    Ok(vec![outcome("fidelity_bound", c.holds, || format!("{c:?}"))])
}

fn offdiag_case(rng: &mut ChaCha8Rng, _: &VerifyConfig, _: usize) -> Result<Vec<Outcome>> {
    let n = rng.random_range(2..=4);
    let s = random_binned_spectrum(rng, n, 3);
    let g = build_grouped_state(&s, n)?;
    let bins = bin_components(&g)?;
    let dim = g.spectrum.len();
    let q = rng.random_range(0..=2);
    let u = random_comm_unitary(rng, q, (dim, dim));
    let comps = bins.iter().map(|b| Ok(ComponentState::new(b, component_state(&g, b)?))).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for a in &comps {
        for b in &comps {
            let c = check_offdiag_bound(a, b, &u, n)?;
            out.push(outcome("component_overlap", c.holds, || format!("bins {} {}: {c:?}", a.bin, b.bin)));
        }
    }
    Ok(out)
}
