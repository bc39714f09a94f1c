//! Acceptance criteria. Each test prints one line, then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schflow::flows::{build_three_stage_flows, flow_degree, verify_flow};
use schflow::protocols::{conversion_protocol, protocol_cost, reverse_protocol, ConversionProtocol};
use schflow::sampling::{
    random_binned_spectrum, random_close_pair, random_comm_unitary, random_kind, random_spectrum, random_state,
};
use schflow::simulator::{
    check_comm_innerprod_bound, check_innerprod_bound, fidelity, make_canonical_state, run_protocol,
};
use schflow::transport::{brute_force_emd, emd_linf, emd_linf_quantile, smoothed_emd};
use schflow::universality::{
    block_decompose, build_grouped_state, check_lower_bound_empirically, evaluate_lower_bound, fact_calculus_check,
};
use schflow::SchmidtSpectrum;

// Written past the harness capture so every line shows up in the test log.
#[allow(clippy::explicit_write)]
fn report(id: u32, name: &str, ok: bool, detail: String, elapsed: Duration, budget_s: f64) {
    let in_time = elapsed.as_secs_f64() < budget_s;
    let status = if ok && in_time { "PASS" } else { "FAIL" };
    writeln!(
        std::io::stdout(),
        "acceptance {id:>2} {status} {name}: {detail} [{:.3}s of {budget_s}s]",
        elapsed.as_secs_f64()
    )
    .unwrap();
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
    assert!(in_time, "criterion {id} ({name}) took {:.3}s, budget {budget_s}s", elapsed.as_secs_f64());
}

fn random_pair(rng: &mut ChaCha8Rng, max_atoms: usize) -> (SchmidtSpectrum, SchmidtSpectrum) {
    let (ka, kb) = (random_kind(rng), random_kind(rng));
    (random_spectrum(rng, ka, max_atoms), random_spectrum(rng, kb, max_atoms))
}

#[test]
fn c01_oracle_equivalence() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst, mut bad) = (0.0f64, 0);
    for _ in 0..1000 {
        let (a, b) = random_pair(&mut rng, 8);
        let d = emd_linf(&a, &b).distance;
        let q = emd_linf_quantile(&a, &b);
        let o = brute_force_emd(&a, &b).unwrap();
        let err = (d - q).abs().max((d - o).abs());
        worst = worst.max(err);
        if err > 1e-9 {
            bad += 1;
        }
    }
    report(
        1,
        "oracle equivalence",
        bad == 0,
        format!("1000 pairs, {bad} mismatches, worst {worst:.2e}"),
        t.elapsed(),
        10.0,
    );
}

/// The criterion-2 instances, regenerated identically for criterion 10.
fn close_conversion_instances() -> Vec<(SchmidtSpectrum, SchmidtSpectrum, ConversionProtocol)> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    (0..100)
        .map(|_| {
            let (a, b) = random_close_pair(&mut rng, 8, 2.0);
            let p = conversion_protocol(&a, &b).unwrap();
            (a, b, p)
        })
        .collect()
}

#[test]
fn c02_conversion_cost_and_fidelity() {
    let t = Instant::now();
    let (mut bad_cost, mut bad_fid, mut min_fid) = (0, 0, 1.0f64);
    let mut by_ceil = [0usize; 3];
    for (a, b, p) in close_conversion_instances() {
        let d = emd_linf(&a, &b).distance;
        assert!(d <= 2.0);
        by_ceil[d.ceil() as usize] += 1;
        let budget = 4 * d.ceil() as u32 + 8;
        if protocol_cost(&p) > budget {
            bad_cost += 1;
        }
        let out = run_protocol(&make_canonical_state(&a).unwrap(), &p).unwrap();
        let f = fidelity(&out, &make_canonical_state(&b).unwrap()).unwrap();
        min_fid = min_fid.min(f);
        if f < 1.0 - 1e-9 || out.comm_cost() != u64::from(protocol_cost(&p)) {
            bad_fid += 1;
        }
    }
    report(
        2,
        "conversion cost within 4*ceil(d)+8 and replay fidelity",
        bad_cost == 0 && bad_fid == 0,
        format!(
            "100 pairs (ceil d = 0/1/2: {}/{}/{}), {bad_cost} over budget, {bad_fid} low fidelity, min fidelity {min_fid:.12}",
            by_ceil[0], by_ceil[1], by_ceil[2]
        ),
        t.elapsed(),
        60.0,
    );
}

#[test]
fn c03_three_stage_flow_bounds() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut bad = 0;
    for _ in 0..500 {
        let (a, b) = random_pair(&mut rng, 8);
        let f = build_three_stage_flows(&a, &b).unwrap();
        let c = f.ceil_distance();
        let ok = verify_flow(&f.chi, &f.gamma, &f.f1).unwrap()
            && verify_flow(&f.gamma, &f.rho, &f.f2).unwrap()
            && verify_flow(&f.rho, &f.upsilon, &f.f3).unwrap()
            && flow_degree(&f.f1) <= 1 << (2 * c + 4)
            && flow_degree(&f.f2) <= 1 << (c + 2)
            && flow_degree(&f.f3) == 1 << (c + 2);
        if !ok {
            bad += 1;
        }
    }
    report(
        3,
        "three-stage flow validity and degrees",
        bad == 0,
        format!("500 pairs, {bad} failures"),
        t.elapsed(),
        30.0,
    );
}

#[test]
fn c04_overlap_checkers() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut bad_pairs, mut bad_triples) = (0, 0);
    for _ in 0..1000 {
        let (da, db) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let psi = random_state(&mut rng, da, db).unwrap();
        let nu = random_state(&mut rng, da, db).unwrap();
        if !check_innerprod_bound(&psi, &nu).unwrap().holds {
            bad_pairs += 1;
        }
    }
    let mut per_q = [0usize; 4];
    for _ in 0..1000 {
        let (da, db) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let psi = random_state(&mut rng, da, db).unwrap();
        let nu = random_state(&mut rng, da, db).unwrap();
        let q = rng.random_range(0..=3u32);
        per_q[q as usize] += 1;
        let u = random_comm_unitary(&mut rng, q, (da, db));
        assert_eq!(u.comm_cost(), q);
        if !check_comm_innerprod_bound(&psi, &nu, &u).unwrap().all_hold() {
            bad_triples += 1;
        }
    }
    report(
        4,
        "overlap bounds with rank and largest-coefficient growth",
        bad_pairs == 0 && bad_triples == 0,
        format!("1000 pairs ({bad_pairs} bad), 1000 triples with Q = 0..3 counts {per_q:?} ({bad_triples} bad)"),
        t.elapsed(),
        120.0,
    );
}

#[test]
fn c05_grouping() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut bad = 0;
    for _ in 0..500 {
        let kind = random_kind(&mut rng);
        let s = random_spectrum(&mut rng, kind, 10);
        for n in 2..=4u32 {
            let g = build_grouped_state(&s, n).unwrap();
            let sum: f64 = g.spectrum.coefficients().iter().sum();
            // Offset of every atom from its target power 2^{-jN}, computed here directly.
            let offsets_ok = g.atoms.iter().all(|a| {
                let lambda = s.coefficients()[a.parent];
                let j = ((1.0 / lambda).log2() / n as f64 - 1e-12).ceil();
                (a.coefficient.log2() + j * n as f64).abs() <= 1.0 + 1e-9
            });
            let close = emd_linf(&s, &g.spectrum).distance <= n as f64 + 1e-9;
            if (sum - 1.0).abs() > 1e-9 || !offsets_ok || !close {
                bad += 1;
            }
        }
    }
    report(5, "grouping", bad == 0, format!("500 spectra x N = 2, 3, 4, {bad} failures"), t.elapsed(), 10.0);
}

#[test]
fn c06_block_structure() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut bad, mut runs, mut multi_block) = (0, 0, 0);
    for _ in 0..200 {
        let n = rng.random_range(2..=4u32);
        let s = random_binned_spectrum(&mut rng, n, 20);
        let g = build_grouped_state(&s, n).unwrap();
        for b in 1..=3u64 {
            for eps in [0.25, 0.5] {
                let d = block_decompose(&g, eps, Some(b)).unwrap();
                runs += 1;
                if d.blocks.len() > 1 {
                    multi_block += 1;
                }
                let far_ok = (0..d.bins.len()).all(|r| {
                    (0..d.bins.len()).all(|c| d.vfar[(r, c)] == 0.0 || (d.bins[r].j - d.bins[c].j).abs() > b as i64)
                });
                let limit = 2.0 * (1.0 / eps).ceil() * (b * n as u64) as f64 + 4.0;
                let ok = d.trace_gap <= 2.0 * eps + 1e-9
                    && far_ok
                    && d.s_traces[(d.k_star - 1) as usize] <= eps + 1e-9
                    && d.blocks.iter().all(|q| q.spread <= limit + 1e-9);
                if !ok {
                    bad += 1;
                }
            }
        }
    }
    report(
        6,
        "block decomposition structure",
        bad == 0,
        format!("200 spectra, {runs} decompositions ({multi_block} with several blocks), {bad} failures"),
        t.elapsed(),
        60.0,
    );
}

#[test]
fn c07_calculus_grid() {
    let t = Instant::now();
    let (mut bad, mut points, mut slack) = (0, 0, f64::INFINITY);
    for k in 1..=100 {
        for m in 1..=k {
            let (p, e) = (k as f64 / 100.0, m as f64 / 100.0);
            let c = fact_calculus_check(p, e).unwrap();
            let lhs = (p - e).max(0.0).sqrt() * p.sqrt() + (1.0 - p).sqrt() * (1.0 - p + e).sqrt();
            assert!((lhs - c.lhs).abs() < 1e-15);
            points += 1;
            slack = slack.min(1.0 - e * e / 8.0 - lhs);
            if lhs > 1.0 - e * e / 8.0 + 1e-12 {
                bad += 1;
            }
        }
    }
    report(
        7,
        "calculus inequality grid",
        bad == 0,
        format!("{points} grid points, {bad} violations, min slack {slack:.3e}"),
        t.elapsed(),
        1.0,
    );
}

#[test]
fn c08_smoothed_distance() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (mut bad_zero, mut bad_mono) = (0, 0);
    for _ in 0..500 {
        let (a, b) = random_pair(&mut rng, 8);
        if smoothed_emd(&a, &b, 0.0).unwrap() != emd_linf(&a, &b).distance {
            bad_zero += 1;
        }
        let grid: Vec<f64> = (0..=10).map(|k| smoothed_emd(&a, &b, k as f64 * 0.05).unwrap()).collect();
        if grid.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            bad_mono += 1;
        }
    }
    let chi = SchmidtSpectrum::new(&[1.0]).unwrap();
    let ups = SchmidtSpectrum::new(&[0.9, 0.025, 0.025, 0.025, 0.025]).unwrap();
    let plain = smoothed_emd(&chi, &ups, 0.0).unwrap();
    let smooth = smoothed_emd(&chi, &ups, 0.1).unwrap();
    let example_ok = (plain - 40f64.log2()).abs() < 1e-6
        && (smooth - (1.0f64 / 0.9).log2()).abs() < 1e-6
        && (plain - 5.3219).abs() < 5e-5
        && (smooth - 0.152).abs() < 5e-4;
    report(
        8,
        "smoothed distance",
        bad_zero == 0 && bad_mono == 0 && example_ok,
        format!("500 pairs ({bad_zero} eps=0 mismatches, {bad_mono} non-monotone), example {plain:.6} / {smooth:.6}"),
        t.elapsed(),
        5.0,
    );
}

#[test]
fn c09_empirical_fidelity_bound() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (mut bad, mut max_lhs, mut min_margin) = (0, 0.0f64, f64::INFINITY);
    for _ in 0..200 {
        let (psi, phi) = random_pair(&mut rng, 6);
        let eps = rng.random_range(0.01..=0.5);
        let q = rng.random_range(0..=3u32);
        let dim = psi.len().max(phi.len());
        let u = random_comm_unitary(&mut rng, q, (dim, dim));
        let c = check_lower_bound_empirically(&psi, &phi, eps, &u).unwrap();
        let d = smoothed_emd(&psi, &phi, eps).unwrap();
        let bound = evaluate_lower_bound(eps, q as f64, d).unwrap().bound;
        assert_eq!(bound, c.rhs);
        max_lhs = max_lhs.max(c.lhs);
        min_margin = min_margin.min(bound - c.lhs);
        if c.lhs > bound + 1e-9 {
            bad += 1;
        }
    }
    report(
        9,
        "empirical fidelity bound",
        bad == 0,
        format!("200 instances, {bad} violations, max overlap {max_lhs:.6}, min margin {min_margin:.3e}"),
        t.elapsed(),
        120.0,
    );
}

#[test]
fn c10_reversibility() {
    let t = Instant::now();
    let (mut bad_fid, mut bad_struct, mut min_fid) = (0, 0, 1.0f64);
    for (a, _, p) in close_conversion_instances() {
        let start = make_canonical_state(&a).unwrap();
        let out = run_protocol(&start, &p).unwrap();
        let r = reverse_protocol(&p);
        let back = run_protocol(&out, &r).unwrap();
        let f = fidelity(&back, &start).unwrap();
        min_fid = min_fid.min(f);
        if f < 1.0 - 1e-9 {
            bad_fid += 1;
        }
        if reverse_protocol(&r) != p {
            bad_struct += 1;
        }
    }
    report(
        10,
        "reversibility",
        bad_fid == 0 && bad_struct == 0,
        format!(
            "100 protocols, {bad_fid} low fidelity, {bad_struct} structural mismatches, min fidelity {min_fid:.12}"
        ),
        t.elapsed(),
        60.0,
    );
}
