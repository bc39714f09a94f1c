//! Seeded random instances for the property suites.

use crate::error::Result;
use crate::protocols::Party;
use crate::simulator::{haar_unitary, BipartiteState, CommOp, CommUnitary, Register};
use crate::spectra::{normalize_spectrum, SchmidtSpectrum};
use crate::transport::emd_linf;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumKind {
    /// Independent log-uniform weights.
    Generic,
    /// Powers of two obtained by repeated halving.
    Dyadic,
    /// Generic weights with repeated values.
    Mixed,
}

/// Seed of case `idx` of suite `suite` under a master seed.
pub fn case_seed(seed: u64, suite: &str, idx: u64) -> u64 {
    let mut h = seed;
    for b in suite.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ splitmix64(idx))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A spectrum with between 1 and `max_atoms` atoms.
pub fn random_spectrum<R: Rng + ?Sized>(rng: &mut R, kind: SpectrumKind, max_atoms: usize) -> SchmidtSpectrum {
    let n = rng.random_range(1..=max_atoms.max(1));
    let raw: Vec<f64> = match kind {
        SpectrumKind::Generic => (0..n).map(|_| 2f64.powf(-rng.random_range(0.0..8.0))).collect(),
        SpectrumKind::Dyadic => {
            let mut v = vec![1.0];
            while v.len() < n {
                let i = rng.random_range(0..v.len());
                v[i] /= 2.0;
                let half = v[i];
                v.push(half);
            }
            v
        }
        SpectrumKind::Mixed => {
            let distinct = rng.random_range(1..=n);
            let values: Vec<f64> = (0..distinct).map(|_| 2f64.powf(-rng.random_range(0.0..6.0))).collect();
            (0..n).map(|_| values[rng.random_range(0..distinct)]).collect()
        }
    };
    normalize_spectrum(&raw, 1.0, true).expect("positive weights")
}

pub fn random_kind<R: Rng + ?Sized>(rng: &mut R) -> SpectrumKind {
    [SpectrumKind::Generic, SpectrumKind::Dyadic, SpectrumKind::Mixed][rng.random_range(0..3)]
}

/// A pair at transport distance at most `max_distance`, drawn by rescaling
/// each atom of a random spectrum by a factor in `[1/2, 2]` and rejecting
/// pairs that land too far apart.
pub fn random_close_pair<R: Rng + ?Sized>(
    rng: &mut R,
    max_atoms: usize,
    max_distance: f64,
) -> (SchmidtSpectrum, SchmidtSpectrum) {
    loop {
        let kind = random_kind(rng);
        let chi = random_spectrum(rng, kind, max_atoms);
        let raw: Vec<f64> = chi.coefficients().iter().map(|&c| c * 2f64.powf(rng.random_range(-1.0..=1.0))).collect();
        let ups = normalize_spectrum(&raw, 1.0, true).expect("positive weights");
        if emd_linf(&chi, &ups).distance > max_distance {
            continue;
        }
        return if rng.random_bool(0.5) { (chi, ups) } else { (ups, chi) };
    }
}

/// A normalized state with complex Gaussian amplitudes on registers `A`, `B`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim_a: usize, dim_b: usize) -> Result<BipartiteState> {
    let mut amps: Vec<Complex64> =
        (0..dim_a * dim_b).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    BipartiteState::from_parts(vec![Register::new("A", dim_a, Party::A), Register::new("B", dim_b, Party::B)], amps)
}

/// A communication unitary sending `q` qubits in total.
///
/// The qubits are split into messages `M0, M1, …` of random sizes. Each
/// message is preceded by a Haar unitary on everything the sender holds and
/// followed by one on everything the receiver holds. `dims` gives the sizes of
/// `A` and `B`.
pub fn random_comm_unitary<R: Rng + ?Sized>(rng: &mut R, q: u32, dims: (usize, usize)) -> CommUnitary {
    let mut sizes = Vec::new();
    let mut left = q;
    while left > 0 {
        let s = rng.random_range(1..=left);
        sizes.push(s);
        left -= s;
    }
    let senders: Vec<Party> = sizes.iter().map(|_| if rng.random_bool(0.5) { Party::A } else { Party::B }).collect();
    let workspace: Vec<Register> =
        sizes.iter().zip(&senders).enumerate().map(|(t, (&s, &p))| Register::new(format!("M{t}"), 1 << s, p)).collect();

    let mut held = [dims.0, dims.1];
    for r in &workspace {
        held[side(r.owner)] *= r.dim;
    }
    let mut ops = Vec::new();
    if sizes.is_empty() {
        for p in [Party::A, Party::B] {
            ops.push(local(p, held[side(p)], rng));
        }
    }
    for r in &workspace {
        let (from, to) = (r.owner, r.owner.other());
        ops.push(local(from, held[side(from)], rng));
        ops.push(CommOp::MoveRegister { name: r.name.clone(), from, to, dim: r.dim });
        held[side(from)] /= r.dim;
        held[side(to)] *= r.dim;
        ops.push(local(to, held[side(to)], rng));
    }
    CommUnitary { workspace, ops }
}

fn side(p: Party) -> usize {
    match p {
        Party::A => 0,
        Party::B => 1,
    }
}

fn local<R: Rng + ?Sized>(owner: Party, dim: usize, rng: &mut R) -> CommOp {
    CommOp::LocalUnitary { owner, registers: None, matrix: haar_unitary(dim, rng) }
}

/// A spectrum whose atoms sit near `2^{-jN}` for up to `max_bins` distinct
/// bins `j`, then grouped with parameter `N` by the caller.
pub fn random_binned_spectrum<R: Rng + ?Sized>(rng: &mut R, n: u32, max_bins: usize) -> SchmidtSpectrum {
    let bins = rng.random_range(1..=max_bins.max(1));
    let span = (bins as u32 + rng.random_range(0..6)).max(1);
    let mut js: Vec<u32> = (0..span).collect();
    js.shuffle(rng);
    js.truncate(bins);
    let mut raw = Vec::new();
    for &j in &js {
        for _ in 0..rng.random_range(1..=3) {
            let p = f64::from(j * n) + rng.random_range(-0.9..0.9);
            raw.push(2f64.powf(-p));
        }
    }
    normalize_spectrum(&raw, 1.0, true).expect("positive weights")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{apply_comm_unitary, make_canonical_state};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(case_seed(1, "transport", 0), case_seed(1, "transport", 0));
        assert_ne!(case_seed(1, "transport", 0), case_seed(1, "transport", 1));
        assert_ne!(case_seed(1, "transport", 0), case_seed(1, "flows", 0));
        assert_ne!(case_seed(1, "transport", 0), case_seed(2, "transport", 0));
    }

    #[test]
    fn dyadic_are_powers_of_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let s = random_spectrum(&mut rng, SpectrumKind::Dyadic, 8);
            assert!(s.coefficients().iter().all(|c| c.log2().fract() == 0.0));
        }
    }

    #[test]
    fn close_pairs_are_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (a, b) = random_close_pair(&mut rng, 6, 2.0);
            assert!(emd_linf(&a, &b).distance <= 2.0);
        }
    }

    #[test]
    fn comm_unitary_cost_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = make_canonical_state(&SchmidtSpectrum::new(&[0.5, 0.3, 0.2]).unwrap()).unwrap();
        for q in 0..=3 {
            let u = random_comm_unitary(&mut rng, q, (3, 3));
            assert_eq!(u.comm_cost(), q);
            let out = apply_comm_unitary(&s, &u).unwrap();
            assert!((out.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn binned_spectra_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 2..=4 {
            let s = random_binned_spectrum(&mut rng, n, 20);
            assert!((s.coefficients().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
