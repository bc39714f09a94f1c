//! Splitting coefficients so each lands near a power `2^{-jN}`.

use crate::error::{Error, Result};
use crate::protocols::Party;
use crate::simulator::{BipartiteState, Register};
use crate::spectra::{position, spread, SchmidtSpectrum, NORMALIZATION_TOL};
use num_complex::Complex64;

/// Largest grouping parameter accepted (multiplicities are `u64`).
pub const MAX_GROUPING: u32 = 40;

/// Largest number of atoms a grouped spectrum may have.
pub const MAX_GROUPED_ATOMS: usize = 1 << 20;

const SNAP: f64 = 1e-12;

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r
    } else {
        x
    }
}

/// `⌈log₂(1/λ) / N⌉`, the bin a coefficient is grouped into.
pub fn grouping_bin(lambda: f64, n: u32) -> i64 {
    snap(snap(position(lambda)) / n as f64).ceil() as i64
}

/// `2^{⌈⌈L/N⌉N − L⌉}` with `L = log₂(1/λ)`.
pub fn grouping_multiplicity(lambda: f64, n: u32) -> Result<u64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::OutOfDomain(format!("coefficient {lambda} is not in (0, 1]")));
    }
    if !(2..=MAX_GROUPING).contains(&n) {
        return Err(Error::OutOfDomain(format!("grouping parameter {n} is not in [2, {MAX_GROUPING}]")));
    }
    let l = snap(position(lambda));
    let gap = snap(grouping_bin(lambda, n) as f64 * n as f64 - l);
    let e = gap.ceil().clamp(0.0, n as f64) as u32;
    Ok(1u64 << e)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupedAtom {
    pub parent: usize,
    pub copy: usize,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupedSpectrum {
    pub base: SchmidtSpectrum,
    pub n: u32,
    /// `f(λ_i)` per base atom.
    pub multiplicities: Vec<u64>,
    /// In spectrum order.
    pub atoms: Vec<GroupedAtom>,
    /// The grouped coefficients as a spectrum, labels `parent:copy`.
    pub spectrum: SchmidtSpectrum,
}

impl GroupedSpectrum {
    /// `|log₂ ν + ⌈log₂(1/λ_i)/N⌉·N|` for every atom.
    pub fn offsets(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .map(|a| {
                let j = grouping_bin(self.base.coefficients()[a.parent], self.n);
                (a.coefficient.log2() + (j * self.n as i64) as f64).abs()
            })
            .collect()
    }
}

pub fn build_grouped_state(sp: &SchmidtSpectrum, n: u32) -> Result<GroupedSpectrum> {
    let multiplicities = sp.coefficients().iter().map(|&l| grouping_multiplicity(l, n)).collect::<Result<Vec<_>>>()?;
    let total: u64 = multiplicities.iter().sum();
    if total > MAX_GROUPED_ATOMS as u64 {
        return Err(Error::TooLarge { what: "grouped atom count", size: total as usize, limit: MAX_GROUPED_ATOMS });
    }
    let mut coefficients = Vec::with_capacity(total as usize);
    let mut labels = Vec::with_capacity(total as usize);
    for (i, (&l, &f)) in sp.coefficients().iter().zip(&multiplicities).enumerate() {
        for copy in 0..f {
            coefficients.push(l / f as f64);
            labels.push(format!("{i}:{copy}"));
        }
    }
    let spectrum = SchmidtSpectrum::with_labels(&coefficients, labels, NORMALIZATION_TOL, false)?;
    let atoms = spectrum
        .labels()
        .iter()
        .zip(spectrum.coefficients())
        .map(|(label, &coefficient)| {
            let (p, c) = label.split_once(':').expect("grouped label");
            GroupedAtom { parent: p.parse().expect("parent"), copy: c.parse().expect("copy"), coefficient }
        })
        .collect();
    Ok(GroupedSpectrum { base: sp.clone(), n, multiplicities, atoms, spectrum })
}

/// Atoms of one bin `I_j = {ν : 2^{-jN+1} ≥ ν > 2^{-jN-1}}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinComponent {
    pub j: i64,
    /// Indices into the grouped spectrum.
    pub atoms: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// `‖φ_j‖² = Σ ν`.
    pub norm_sq: f64,
}

impl BinComponent {
    /// `log₂(max/min)` over the bin's coefficients.
    pub fn spread(&self) -> f64 {
        let max = self.coefficients.iter().copied().fold(0.0, f64::max);
        let min = self.coefficients.iter().copied().fold(f64::INFINITY, f64::min);
        position(min) - position(max)
    }

    /// The bin as a normalized spectrum.
    pub fn normalized(&self) -> Result<SchmidtSpectrum> {
        crate::spectra::normalize_spectrum(&self.coefficients, NORMALIZATION_TOL, true)
    }
}

/// Non-empty bins in ascending `j`.
pub fn bin_components(g: &GroupedSpectrum) -> Result<Vec<BinComponent>> {
    let mut bins: std::collections::BTreeMap<i64, BinComponent> = std::collections::BTreeMap::new();
    let n = g.n as f64;
    for (idx, a) in g.atoms.iter().enumerate() {
        let j = grouping_bin(g.base.coefficients()[a.parent], g.n);
        let p = snap(position(a.coefficient));
        let lo = j as f64 * n - 1.0;
        if !(p >= lo && p < lo + 2.0) {
            return Err(Error::OutOfDomain(format!("atom {idx} at position {p} falls outside bin {j}")));
        }
        let bin = bins.entry(j).or_insert_with(|| BinComponent {
            j,
            atoms: Vec::new(),
            coefficients: Vec::new(),
            norm_sq: 0.0,
        });
        bin.atoms.push(idx);
        bin.coefficients.push(a.coefficient);
    }
    let mut out: Vec<BinComponent> = bins.into_values().collect();
    for b in &mut out {
        b.norm_sq = crate::spectra::neumaier_sum(b.coefficients.iter().copied());
    }
    Ok(out)
}

/// `Σ_{i∈I_j} √ν_i |i⟩|i⟩` inside the grouped state's registers.
pub fn component_state(g: &GroupedSpectrum, bin: &BinComponent) -> Result<BipartiteState> {
    let dim = g.spectrum.len();
    if dim > crate::simulator::MAX_CANONICAL_DIM {
        return Err(Error::TooLarge {
            what: "canonical state rank",
            size: dim,
            limit: crate::simulator::MAX_CANONICAL_DIM,
        });
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (&i, &c) in bin.atoms.iter().zip(&bin.coefficients) {
        amplitudes[i * dim + i] = Complex64::new(c.sqrt(), 0.0);
    }
    let registers = vec![Register::new("A", dim, Party::A), Register::new("B", dim, Party::B)];
    BipartiteState::subnormalized(registers, amplitudes)
}

/// Largest spread over the bins (each should be at most 2).
pub fn max_bin_spread(bins: &[BinComponent]) -> f64 {
    bins.iter().map(BinComponent::spread).fold(0.0, f64::max)
}

/// Spread of the grouped spectrum itself.
pub fn grouped_spread(g: &GroupedSpectrum) -> f64 {
    spread(&g.spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::emd_linf;
    use proptest::prelude::*;

    fn sp(v: &[f64]) -> SchmidtSpectrum {
        SchmidtSpectrum::new(v).unwrap()
    }

    /// Multiplicity from the defining formula without snapping.
    fn oracle_multiplicity(lambda: f64, n: u32) -> u64 {
        let l = (1.0 / lambda).log2();
        let e = ((l / n as f64).ceil() * n as f64 - l).ceil();
        2u64.pow(e as u32)
    }

    #[test]
    fn multiplicity_examples() {
        assert_eq!(grouping_multiplicity(0.25, 2).unwrap(), 1);
        assert_eq!(grouping_multiplicity(0.6, 2).unwrap(), 4);
        assert_eq!(grouping_multiplicity(0.4, 2).unwrap(), 2);
        assert_eq!(grouping_multiplicity(0.5, 2).unwrap(), 2);
        assert_eq!(grouping_multiplicity(1.0, 3).unwrap(), 1);
        for (l, n) in [(0.6, 2), (0.4, 2), (0.3, 3), (0.07, 4), (0.011, 3)] {
            assert_eq!(grouping_multiplicity(l, n).unwrap(), oracle_multiplicity(l, n));
        }
        assert!(matches!(grouping_multiplicity(0.0, 2), Err(Error::OutOfDomain(_))));
        assert!(matches!(grouping_multiplicity(1.5, 2), Err(Error::OutOfDomain(_))));
        assert!(matches!(grouping_multiplicity(0.5, 1), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn grouped_examples() {
        let g = build_grouped_state(&sp(&[0.5, 0.5]), 2).unwrap();
        assert_eq!(g.spectrum.coefficients(), &[0.25; 4]);

        let g = build_grouped_state(&sp(&[0.6, 0.4]), 2).unwrap();
        assert_eq!(g.multiplicities, vec![4, 2]);
        let c = g.spectrum.coefficients();
        assert!((c[0] - 0.2).abs() < 1e-15 && (c[1] - 0.2).abs() < 1e-15);
        assert!(c[2..].iter().all(|x| (x - 0.15).abs() < 1e-15));

        let dyadic = sp(&[0.25, 0.25, 0.25, 0.0625, 0.0625, 0.0625, 0.0625]);
        let g = build_grouped_state(&dyadic, 2).unwrap();
        assert_eq!(g.spectrum.coefficients(), dyadic.coefficients());
    }

    #[test]
    fn bin_examples() {
        let g = build_grouped_state(&sp(&[0.25; 4]), 2).unwrap();
        let bins = bin_components(&g).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].j, 1);
        assert!((bins[0].norm_sq - 1.0).abs() < 1e-15);

        let g = build_grouped_state(&sp(&[0.6, 0.4]), 2).unwrap();
        let bins = bin_components(&g).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].j, 1);
        assert_eq!(bins[0].atoms.len(), 6);
    }

    fn spectrum() -> impl Strategy<Value = SchmidtSpectrum> {
        prop::collection::vec(1e-4f64..1.0, 1..10)
            .prop_map(|v| crate::spectra::normalize_spectrum(&v, 1e-9, true).unwrap())
    }

    proptest! {
        #[test]
        fn grouping_invariants(s in spectrum(), n in 2u32..5) {
            let g = build_grouped_state(&s, n).unwrap();
            prop_assert!((g.spectrum.coefficients().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(g.offsets().iter().all(|&o| o <= 1.0 + 1e-12));
            prop_assert!(emd_linf(&s, &g.spectrum).distance <= n as f64 + 1e-9);
            for (&l, &f) in s.coefficients().iter().zip(&g.multiplicities) {
                prop_assert!(f.is_power_of_two() && f <= 1 << n);
                prop_assert_eq!(f, oracle_multiplicity(l, n));
            }
            let bins = bin_components(&g).unwrap();
            prop_assert!(max_bin_spread(&bins) <= 2.0 + 1e-12);
            let total: f64 = bins.iter().map(|b| b.norm_sq).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert_eq!(bins.iter().map(|b| b.atoms.len()).sum::<usize>(), g.atoms.len());
        }
    }
}
