//! Schmidt spectra and the distributions they induce on the line.
//!
//! A spectrum places mass `λ_i` at position `log₂(1/λ_i) ≥ 0`. Distances between
//! spectra are computed on these positions, so two spectra that differ by a
//! uniform rescaling of every coefficient by `2^t` sit exactly `|t|` apart.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ λ_i = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Probability vector of Schmidt coefficients, sorted descending.
///
/// Zero entries are stripped at construction. Ties are ordered by label,
/// comparing embedded digit runs numerically so `"2" < "10"`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    coefficients: Vec<f64>,
    labels: Vec<String>,
}

impl SchmidtSpectrum {
    /// Strict constructor: the input must already sum to one within
    /// [`NORMALIZATION_TOL`].
    pub fn new(raw: &[f64]) -> Result<Self> {
        normalize_spectrum(raw, NORMALIZATION_TOL, false)
    }

    pub fn with_labels(raw: &[f64], labels: Vec<String>, tol: f64, renormalize: bool) -> Result<Self> {
        if labels.len() != raw.len() {
            return Err(Error::LabelCount { labels: labels.len(), coefficients: raw.len() });
        }
        build(raw, labels, tol, renormalize)
    }

    /// Uniform spectrum over `n` atoms (a maximally entangled state).
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySpectrum);
        }
        Self::new(&vec![1.0 / n as f64; n])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn min(&self) -> f64 {
        self.coefficients[self.coefficients.len() - 1]
    }

    /// Position `log₂(1/λ_i)` of every atom, in atom order (ascending).
    pub fn positions(&self) -> Vec<f64> {
        self.coefficients.iter().map(|&c| position(c)).collect()
    }

    /// Index of the atom carrying `label`.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// `log₂(1/λ)`, clamped at zero for coefficients that round above one.
pub fn position(coefficient: f64) -> f64 {
    (-coefficient.log2()).max(0.0)
}

/// Validates `raw`, strips zeros, sorts descending and rescales so the sum is 1.
///
/// When `renormalize` is false the raw sum must already be within `tol` of 1.
pub fn normalize_spectrum(raw: &[f64], tol: f64, renormalize: bool) -> Result<SchmidtSpectrum> {
    let labels = (0..raw.len()).map(|i| i.to_string()).collect();
    build(raw, labels, tol, renormalize)
}

fn build(raw: &[f64], labels: Vec<String>, tol: f64, renormalize: bool) -> Result<SchmidtSpectrum> {
    if raw.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    for (index, &value) in raw.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < 0.0 {
            return Err(Error::NegativeEntry { index, value });
        }
    }
    let sum = neumaier_sum(raw.iter().copied());
    if sum == 0.0 {
        return Err(Error::AllZero);
    }
    if !renormalize && (sum - 1.0).abs() > tol {
        return Err(Error::NotNormalized { sum, tol });
    }

    let mut atoms: Vec<(f64, String)> = raw.iter().copied().zip(labels).filter(|(c, _)| *c > 0.0).collect();
    // Skip the division when the sum is already one up to rounding so that
    // normalizing a normalized spectrum is bit-for-bit the identity.
    let slack = 4.0 * f64::EPSILON * atoms.len() as f64;
    if (sum - 1.0).abs() > slack {
        for atom in &mut atoms {
            atom.0 /= sum;
        }
    }
    atoms.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| natural_cmp(&a.1, &b.1)));
    let mut seen: Vec<&str> = atoms.iter().map(|a| a.1.as_str()).collect();
    seen.sort_unstable();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateLabel(w[0].to_string()));
    }

    let (coefficients, labels) = atoms.into_iter().unzip();
    Ok(SchmidtSpectrum { coefficients, labels })
}

/// Compensated summation.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Orders strings with embedded integers compared by value.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let da = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let db = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let na = trim_zeros(&a[..da]);
                let nb = trim_zeros(&b[..db]);
                let ord = na.len().cmp(&nb.len()).then_with(|| na.cmp(nb)).then_with(|| da.cmp(&db));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[da..];
                b = &b[db..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(digits: &[u8]) -> &[u8] {
    let start = digits.iter().position(|&d| d != b'0').unwrap_or(digits.len());
    &digits[start..]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

/// Point masses on the half line, positions strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMassDistribution {
    atoms: Vec<Atom>,
}

impl LogMassDistribution {
    /// Sorts by position and merges atoms at identical positions.
    pub fn consolidated(mut atoms: Vec<Atom>) -> Self {
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if last.position == atom.position => last.mass += atom.mass,
                _ => merged.push(atom),
            }
        }
        LogMassDistribution { atoms: merged }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        neumaier_sum(self.atoms.iter().map(|a| a.mass))
    }
}

pub fn log_positions(sp: &SchmidtSpectrum) -> LogMassDistribution {
    let atoms = sp.coefficients().iter().map(|&c| Atom { position: position(c), mass: c }).collect();
    LogMassDistribution::consolidated(atoms)
}

/// Piecewise-constant inverse CDF.
///
/// `breakpoints` has one more entry than `values`; `values[k]` is returned on
/// the half-open mass interval `(breakpoints[k], breakpoints[k + 1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl QuantileFunction {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the segment containing `q`. Arguments at or below zero map to
    /// the first segment, arguments above one to the last.
    pub fn segment(&self, q: f64) -> usize {
        // first k with breakpoints[k + 1] >= q
        let upper = &self.breakpoints[1..];
        let k = upper.partition_point(|&b| b < q);
        k.min(self.values.len() - 1)
    }

    pub fn eval(&self, q: f64) -> f64 {
        self.values[self.segment(q)]
    }
}

pub fn quantile_function(dist: &LogMassDistribution) -> QuantileFunction {
    let atoms = dist.atoms();
    let mut breakpoints = Vec::with_capacity(atoms.len() + 1);
    breakpoints.push(0.0);
    let mut acc = 0.0;
    let mut comp = 0.0;
    for atom in atoms {
        // Kahan-style running prefix sum
        let y = atom.mass - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        breakpoints.push(acc);
    }
    *breakpoints.last_mut().expect("non-empty") = 1.0;
    let values = atoms.iter().map(|a| a.position).collect();
    QuantileFunction { breakpoints, values }
}

/// `log₂(λ_max / λ_min)`, computed as the width of the position support.
pub fn spread(sp: &SchmidtSpectrum) -> f64 {
    position(sp.min()) - position(sp.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_are_stripped() {
        let s = SchmidtSpectrum::new(&[0.5, 0.5, 0.0]).unwrap();
        assert_eq!(s.coefficients(), &[0.5, 0.5]);
        assert_eq!(s.labels(), &["0", "1"]);
    }

    #[test]
    fn already_normalized_is_kept() {
        let s = SchmidtSpectrum::new(&[0.25; 4]).unwrap();
        assert_eq!(s.coefficients(), &[0.25; 4]);
    }

    #[test]
    fn renormalization_divides_by_sum() {
        let s = normalize_spectrum(&[0.3, 0.2], NORMALIZATION_TOL, true).unwrap();
        assert!((s.coefficients()[0] - 0.6).abs() < 1e-15);
        assert!((s.coefficients()[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(normalize_spectrum(&[0.0, 0.0], 1e-9, true), Err(Error::AllZero)));
        assert!(matches!(normalize_spectrum(&[0.3, 0.2], 1e-9, false), Err(Error::NotNormalized { .. })));
        assert!(matches!(normalize_spectrum(&[1.2, -0.2], 1e-9, false), Err(Error::NegativeEntry { index: 1, .. })));
        assert!(matches!(normalize_spectrum(&[], 1e-9, true), Err(Error::EmptySpectrum)));
        assert!(matches!(normalize_spectrum(&[f64::NAN, 1.0], 1e-9, true), Err(Error::NonFinite { index: 0 })));
        assert!(matches!(
            SchmidtSpectrum::with_labels(&[0.5, 0.5], vec!["a".into(), "a".into()], 1e-9, false),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn sorting_and_tie_break() {
        let labels = vec!["10".to_string(), "2".to_string(), "x".to_string()];
        let s = SchmidtSpectrum::with_labels(&[0.25, 0.25, 0.5], labels, 1e-9, false).unwrap();
        assert_eq!(s.coefficients(), &[0.5, 0.25, 0.25]);
        assert_eq!(s.labels(), &["x", "2", "10"]);
    }

    #[test]
    fn natural_order() {
        assert_eq!(natural_cmp("2", "10"), Ordering::Less);
        assert_eq!(natural_cmp("1:10:0", "1:9:3"), Ordering::Greater);
        assert_eq!(natural_cmp("a", "b"), Ordering::Less);
        assert_eq!(natural_cmp("a1", "a01"), Ordering::Less);
        assert_eq!(natural_cmp("x", "x"), Ordering::Equal);
    }

    #[test]
    fn positions_and_consolidation() {
        let d = log_positions(&SchmidtSpectrum::new(&[1.0]).unwrap());
        assert_eq!(d.atoms(), &[Atom { position: 0.0, mass: 1.0 }]);

        let d = log_positions(&SchmidtSpectrum::new(&[0.5, 0.5]).unwrap());
        assert_eq!(d.atoms(), &[Atom { position: 1.0, mass: 1.0 }]);

        let d = log_positions(&SchmidtSpectrum::new(&[0.75, 0.25]).unwrap());
        assert_eq!(d.atoms().len(), 2);
        assert!((d.atoms()[0].position - (4.0f64 / 3.0).log2()).abs() < 1e-15);
        assert!((d.atoms()[0].position - 0.415).abs() < 1e-3);
        assert_eq!(d.atoms()[1], Atom { position: 2.0, mass: 0.25 });
    }

    #[test]
    fn quantile_staircases() {
        let single = quantile_function(&log_positions(&SchmidtSpectrum::new(&[1.0]).unwrap()));
        for q in [1e-9, 0.3, 1.0] {
            assert_eq!(single.eval(q), 0.0);
        }

        let two = LogMassDistribution::consolidated(vec![
            Atom { position: 1.0, mass: 0.5 },
            Atom { position: 2.0, mass: 0.5 },
        ]);
        let f = quantile_function(&two);
        assert_eq!(f.eval(0.25), 1.0);
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(0.5000001), 2.0);
        assert_eq!(f.eval(1.0), 2.0);

        let f = quantile_function(&log_positions(&SchmidtSpectrum::new(&[0.9, 0.1]).unwrap()));
        assert_eq!(f.breakpoints(), &[0.0, 0.9, 1.0]);
        assert!((f.eval(0.5) - 0.152).abs() < 1e-3);
        assert!((f.eval(0.95) - 10f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn spread_examples() {
        assert_eq!(spread(&SchmidtSpectrum::new(&[0.25; 4]).unwrap()), 0.0);
        assert_eq!(spread(&SchmidtSpectrum::new(&[0.5, 0.25, 0.25]).unwrap()), 1.0);
        let s = spread(&SchmidtSpectrum::new(&[0.9, 0.1]).unwrap());
        assert!((s - 9f64.log2()).abs() < 1e-12);
    }

    fn raw_vector() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), 1e-6f64..1.0], 1..12)
            .prop_filter("not all zero", |v| v.iter().any(|&x| x > 0.0))
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in raw_vector()) {
            let once = normalize_spectrum(&raw, NORMALIZATION_TOL, true).unwrap();
            let twice = SchmidtSpectrum::with_labels(
                once.coefficients(), once.labels().to_vec(), NORMALIZATION_TOL, false).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn distribution_invariants(raw in raw_vector()) {
            let s = normalize_spectrum(&raw, NORMALIZATION_TOL, true).unwrap();
            let d = log_positions(&s);
            prop_assert!((d.total_mass() - 1.0).abs() < 1e-9);
            prop_assert!(d.atoms().windows(2).all(|w| w[0].position < w[1].position));
            prop_assert!(d.atoms().iter().all(|a| a.position >= 0.0 && a.mass > 0.0));

            let f = quantile_function(&d);
            prop_assert!(f.values().windows(2).all(|w| w[0] <= w[1]));
            let grid: Vec<f64> = (1..=200).map(|k| k as f64 / 200.0).collect();
            prop_assert!(grid.windows(2).all(|w| f.eval(w[0]) <= f.eval(w[1])));

            let first = d.atoms()[0].position;
            let last = d.atoms()[d.atoms().len() - 1].position;
            prop_assert_eq!(spread(&s), last - first);
        }
    }
}
