use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::protocols::{Party, PrepareEntry};
use crate::spectra::{normalize_spectrum, SchmidtSpectrum};

/// Cap on the product of all register dimensions.
pub const MAX_TOTAL_DIM: usize = 1 << 24;

/// Cap on the Schmidt rank of a canonical state.
pub const MAX_CANONICAL_DIM: usize = 1 << 12;

/// Amplitude norm a discarded or unmapped subspace may carry.
pub const LEAK_TOL: f64 = 1e-6;

pub const NORM_TOL: f64 = 1e-9;

/// Default singular-value cutoff for Schmidt rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub dim: usize,
    pub owner: Party,
}

impl Register {
    pub fn new(name: impl Into<String>, dim: usize, owner: Party) -> Self {
        Register { name: name.into(), dim, owner }
    }
}

/// Dense pure state over named registers, first register most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    registers: Vec<Register>,
    amplitudes: Vec<Complex64>,
    comm_cost: u64,
    subnormalized: bool,
}

fn total_dim(registers: &[Register]) -> Result<usize> {
    let mut total = 1usize;
    for r in registers {
        if r.dim == 0 {
            return Err(Error::ShapeMismatch(format!("register {} has dimension 0", r.name)));
        }
        total = total.checked_mul(r.dim).filter(|&t| t <= MAX_TOTAL_DIM).ok_or(Error::TooLarge {
            what: "state dimension",
            size: usize::MAX,
            limit: MAX_TOTAL_DIM,
        })?;
    }
    Ok(total)
}

impl BipartiteState {
    /// Builds a normalized state.
    pub fn from_parts(registers: Vec<Register>, amplitudes: Vec<Complex64>) -> Result<Self> {
        let s = Self::unchecked_norm(registers, amplitudes)?;
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::ShapeMismatch(format!("state norm is {norm}")));
        }
        Ok(s)
    }

    /// Builds a vector of norm at most one, flagged as subnormalized.
    pub fn subnormalized(registers: Vec<Register>, amplitudes: Vec<Complex64>) -> Result<Self> {
        let mut s = Self::unchecked_norm(registers, amplitudes)?;
        if s.norm() > 1.0 + NORM_TOL {
            return Err(Error::ShapeMismatch(format!("vector norm {} exceeds one", s.norm())));
        }
        s.subnormalized = true;
        Ok(s)
    }

    fn unchecked_norm(registers: Vec<Register>, amplitudes: Vec<Complex64>) -> Result<Self> {
        let total = total_dim(&registers)?;
        if amplitudes.len() != total {
            return Err(Error::ShapeMismatch(format!("{} amplitudes for total dimension {total}", amplitudes.len())));
        }
        let mut names: Vec<&str> = registers.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::ShapeMismatch(format!("register {} appears twice", w[0])));
        }
        Ok(BipartiteState { registers, amplitudes, comm_cost: 0, subnormalized: false })
    }

    /// All registers in `|0…0⟩`.
    pub fn zero(registers: Vec<Register>) -> Result<Self> {
        let total = total_dim(&registers)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); total];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self::from_parts(registers, amplitudes)
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Qubits communicated so far in producing this state.
    pub fn comm_cost(&self) -> u64 {
        self.comm_cost
    }

    pub fn is_subnormalized(&self) -> bool {
        self.subnormalized
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn add_comm_cost(&mut self, qubits: u64) {
        self.comm_cost += qubits;
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::ShapeMismatch(format!("no register named {name}")))
    }

    /// Reorders registers so that `order[k]` becomes register `k`.
    pub fn permuted(&self, order: &[usize]) -> BipartiteState {
        debug_assert_eq!(order.len(), self.registers.len());
        let n = self.registers.len();
        let mut old_strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            old_strides[k] = old_strides[k + 1] * self.registers[k + 1].dim;
        }
        let dims: Vec<usize> = order.iter().map(|&o| self.registers[o].dim).collect();
        let strides: Vec<usize> = order.iter().map(|&o| old_strides[o]).collect();
        let mut out = Vec::with_capacity(self.amplitudes.len());
        let mut digits = vec![0usize; n];
        let mut offset = 0usize;
        for _ in 0..self.amplitudes.len() {
            out.push(self.amplitudes[offset]);
            for k in (0..n).rev() {
                digits[k] += 1;
                offset += strides[k];
                if digits[k] < dims[k] {
                    break;
                }
                offset -= strides[k] * dims[k];
                digits[k] = 0;
            }
        }
        BipartiteState {
            registers: order.iter().map(|&o| self.registers[o].clone()).collect(),
            amplitudes: out,
            comm_cost: self.comm_cost,
            subnormalized: self.subnormalized,
        }
    }

    /// Moves the named registers to the end, in the given order. Returns the
    /// permuted state and the product of the moved dimensions.
    fn with_last(&self, names: &[&str]) -> Result<(BipartiteState, usize)> {
        let mut picked = Vec::with_capacity(names.len());
        for name in names {
            picked.push(self.index_of(name)?);
        }
        let mut order: Vec<usize> = (0..self.registers.len()).filter(|k| !picked.contains(k)).collect();
        order.extend(&picked);
        let block = picked.iter().map(|&k| self.registers[k].dim).product();
        Ok((self.permuted(&order), block))
    }

    /// Reorders registers to match the name order of `names`, which must be a
    /// permutation of the current names.
    fn reordered_as(&self, names: &[String]) -> Result<BipartiteState> {
        let order = names.iter().map(|n| self.index_of(n)).collect::<Result<Vec<_>>>()?;
        Ok(self.permuted(&order))
    }

    fn names(&self) -> Vec<String> {
        self.registers.iter().map(|r| r.name.clone()).collect()
    }

    /// Puts `A` then `B` first, keeping the relative order of the rest.
    pub fn canonical_order(&self) -> BipartiteState {
        let rank = |r: &Register| match r.name.as_str() {
            "A" => 0,
            "B" => 1,
            _ => 2,
        };
        let mut order: Vec<usize> = (0..self.registers.len()).collect();
        order.sort_by_key(|&k| rank(&self.registers[k]));
        self.permuted(&order)
    }

    /// Tensors in a fresh register in `|0⟩`, placed last.
    pub fn append_register(&self, name: &str, dim: usize, owner: Party) -> Result<BipartiteState> {
        if self.register(name).is_some() {
            return Err(Error::ShapeMismatch(format!("register {name} already exists")));
        }
        let mut registers = self.registers.clone();
        registers.push(Register::new(name, dim, owner));
        total_dim(&registers)?;
        let zero = Complex64::new(0.0, 0.0);
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * dim);
        for &a in &self.amplitudes {
            amplitudes.push(a);
            amplitudes.extend(std::iter::repeat_n(zero, dim - 1));
        }
        Ok(BipartiteState { registers, amplitudes, ..self.clone() })
    }

    /// Removes a register that is in `|0⟩`.
    pub fn discard_register(&self, name: &str) -> Result<BipartiteState> {
        let (s, dim) = self.with_last(&[name])?;
        let leak: f64 = s.amplitudes.chunks(dim).flat_map(|c| c[1..].iter()).map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if leak > LEAK_TOL {
            return Err(Error::DiscardNonZero { register: name.to_string(), norm: leak });
        }
        let amplitudes = s.amplitudes.chunks(dim).map(|c| c[0]).collect();
        let mut registers = s.registers;
        registers.pop();
        let kept: Vec<String> = self.names().into_iter().filter(|n| n != name).collect();
        let out =
            BipartiteState { registers, amplitudes, comm_cost: self.comm_cost, subnormalized: self.subnormalized };
        out.reordered_as(&kept)
    }

    /// Hands a register to `to`. Amplitudes are untouched.
    pub fn move_register(&self, name: &str, from: Party, to: Party) -> Result<BipartiteState> {
        let k = self.index_of(name)?;
        if self.registers[k].owner != from {
            return Err(Error::ShapeMismatch(format!("register {name} is not held by {from}")));
        }
        let mut out = self.clone();
        out.registers[k].owner = to;
        Ok(out)
    }

    /// Applies `matrix` to the joint space of `names`, taken in that order.
    pub fn apply_local(&self, names: &[&str], matrix: &DMatrix<Complex64>) -> Result<BipartiteState> {
        let (mut s, dim) = self.with_last(names)?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix on a {dim}-dimensional subsystem",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); dim];
        for chunk in s.amplitudes.chunks_mut(dim) {
            for (r, out) in buf.iter_mut().enumerate() {
                *out = (0..dim).map(|c| matrix[(r, c)] * chunk[c]).sum();
            }
            chunk.copy_from_slice(&buf);
        }
        s.reordered_as(&self.names())
    }

    /// For each control value `i`, applies the Householder reflection that
    /// swaps `|0,0⟩` with the column `columns[i]` on the two targets. Control
    /// values without a column are left alone. The reflection is its own
    /// inverse, so the same call implements the adjoint.
    pub fn apply_controlled_prepare(
        &self,
        control: &str,
        targets: [&str; 2],
        columns: &[Vec<PrepareEntry>],
        tol: f64,
    ) -> Result<BipartiteState> {
        for (i, col) in columns.iter().enumerate() {
            let norm_sq: f64 = col.iter().map(|e| e.weight).sum();
            if (norm_sq - 1.0).abs() > tol || col.iter().any(|e| e.weight < 0.0) {
                return Err(Error::NonUnitaryStep { control: i, norm_sq });
            }
        }
        let d2 = self
            .register(targets[1])
            .ok_or_else(|| Error::ShapeMismatch(format!("no register named {}", targets[1])))?
            .dim;
        let d1 = self
            .register(targets[0])
            .ok_or_else(|| Error::ShapeMismatch(format!("no register named {}", targets[0])))?
            .dim;
        let (mut s, block) = self.with_last(&[control, targets[0], targets[1]])?;
        let d = d1 * d2;
        let dc = block / d;
        let sparse: Vec<Vec<(usize, f64)>> = columns
            .iter()
            .map(|col| {
                col.iter()
                    .map(|e| {
                        if e.c1 >= d1 || e.c2 >= d2 {
                            Err(Error::ShapeMismatch(format!("entry ({}, {}) outside target registers", e.c1, e.c2)))
                        } else {
                            Ok((e.c1 * d2 + e.c2, e.weight.sqrt()))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for outer in s.amplitudes.chunks_mut(block) {
            for (i, v) in sparse.iter().enumerate().take(dc) {
                householder_from_zero(&mut outer[i * d..(i + 1) * d], v);
            }
        }
        s.reordered_as(&self.names())
    }

    /// Replaces `first ⊗ second` by `result` via `(a, b) ↦ map[(a, b)]`.
    pub fn merge_registers(
        &self,
        first: &str,
        second: &str,
        result: &str,
        owner: Party,
        target_dim: usize,
        map: &HashMap<(usize, usize), usize>,
    ) -> Result<BipartiteState> {
        let d2 = self.register(second).ok_or_else(|| Error::ShapeMismatch(format!("no register named {second}")))?.dim;
        let (s, block) = self.with_last(&[first, second])?;
        let mut registers: Vec<Register> = s.registers[..s.registers.len() - 2].to_vec();
        if registers.iter().any(|r| r.name == result) {
            return Err(Error::ShapeMismatch(format!("register {result} already exists")));
        }
        registers.push(Register::new(result, target_dim, owner));
        let total = total_dim(&registers)?;
        let mut out = vec![Complex64::new(0.0, 0.0); total];
        let mut leak = 0.0;
        for (o, chunk) in s.amplitudes.chunks(block).enumerate() {
            for (idx, &a) in chunk.iter().enumerate() {
                match map.get(&(idx / d2, idx % d2)) {
                    Some(&j) if j < target_dim => out[o * target_dim + j] += a,
                    _ => leak += a.norm_sqr(),
                }
            }
        }
        if leak.sqrt() > LEAK_TOL {
            return Err(Error::RelabelLeak { norm: leak.sqrt() });
        }
        Ok(BipartiteState { registers, amplitudes: out, comm_cost: self.comm_cost, subnormalized: self.subnormalized }
            .canonical_order())
    }

    /// Splits `register` into `first ⊗ second` via `j ↦ split[j]`.
    pub fn split_register(
        &self,
        register: &str,
        first: (&str, usize),
        second: (&str, usize),
        owner: Party,
        split: &[Option<(usize, usize)>],
    ) -> Result<BipartiteState> {
        let (s, dim) = self.with_last(&[register])?;
        let mut registers: Vec<Register> = s.registers[..s.registers.len() - 1].to_vec();
        for (name, _) in [first, second] {
            if registers.iter().any(|r| r.name == name) {
                return Err(Error::ShapeMismatch(format!("register {name} already exists")));
            }
        }
        registers.push(Register::new(first.0, first.1, owner));
        registers.push(Register::new(second.0, second.1, owner));
        let total = total_dim(&registers)?;
        let block = first.1 * second.1;
        let mut out = vec![Complex64::new(0.0, 0.0); total];
        let mut leak = 0.0;
        for (o, chunk) in s.amplitudes.chunks(dim).enumerate() {
            for (j, &a) in chunk.iter().enumerate() {
                match split.get(j).copied().flatten() {
                    Some((x, y)) if x < first.1 && y < second.1 => out[o * block + x * second.1 + y] += a,
                    _ => leak += a.norm_sqr(),
                }
            }
        }
        if leak.sqrt() > LEAK_TOL {
            return Err(Error::RelabelLeak { norm: leak.sqrt() });
        }
        Ok(BipartiteState { registers, amplitudes: out, comm_cost: self.comm_cost, subnormalized: self.subnormalized }
            .canonical_order())
    }

    /// `⟨self|other⟩` with registers matched by name. Ownership is ignored.
    pub fn inner_product(&self, other: &BipartiteState) -> Result<Complex64> {
        if self.registers.len() != other.registers.len() {
            return Err(Error::ShapeMismatch("different register sets".into()));
        }
        for r in &self.registers {
            match other.register(&r.name) {
                Some(o) if o.dim == r.dim => {}
                _ => return Err(Error::ShapeMismatch(format!("register {} does not match", r.name))),
            }
        }
        let aligned = other.reordered_as(&self.names())?;
        Ok(self.amplitudes.iter().zip(&aligned.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Same registers with the same dimensions and owners.
    pub fn same_shape(&self, other: &BipartiteState) -> bool {
        self.registers.len() == other.registers.len()
            && self.registers.iter().all(|r| other.register(&r.name) == Some(r))
    }

    /// Copy with every register's owner taken from `other` where present.
    pub fn with_owners_of(&self, other: &BipartiteState) -> BipartiteState {
        let mut out = self.clone();
        for r in &mut out.registers {
            if let Some(o) = other.register(&r.name) {
                r.owner = o.owner;
            }
        }
        out
    }

    /// Coefficient matrix with Alice's registers as rows.
    pub fn coefficient_matrix(&self) -> DMatrix<Complex64> {
        let mut order: Vec<usize> =
            (0..self.registers.len()).filter(|&k| self.registers[k].owner == Party::A).collect();
        let rows: usize = order.iter().map(|&k| self.registers[k].dim).product();
        order.extend((0..self.registers.len()).filter(|&k| self.registers[k].owner == Party::B));
        let s = self.permuted(&order);
        let cols = s.amplitudes.len() / rows;
        DMatrix::from_row_slice(rows, cols, &s.amplitudes)
    }
}

/// `x ↦ x − w·2(w†x)/(w†w)` with `w = e₀ − v`, for real sparse unit `v`.
fn householder_from_zero(x: &mut [Complex64], v: &[(usize, f64)]) {
    let v0 = v.iter().find(|e| e.0 == 0).map_or(0.0, |e| e.1);
    let denom = 2.0 - 2.0 * v0;
    if denom < 1e-14 {
        return;
    }
    let mut wx = x[0] * (1.0 - v0);
    for &(idx, amp) in v {
        if idx != 0 {
            wx -= x[idx] * amp;
        }
    }
    let factor = wx * (2.0 / denom);
    x[0] -= factor * (1.0 - v0);
    for &(idx, amp) in v {
        if idx != 0 {
            x[idx] += factor * amp;
        }
    }
}

/// `Σ_i √λ_i |i⟩_A |i⟩_B`.
pub fn make_canonical_state(sp: &SchmidtSpectrum) -> Result<BipartiteState> {
    make_canonical_state_in(sp, sp.len())
}

/// Canonical state embedded in registers of dimension `dim ≥ |sp|`.
pub fn make_canonical_state_in(sp: &SchmidtSpectrum, dim: usize) -> Result<BipartiteState> {
    if dim > MAX_CANONICAL_DIM {
        return Err(Error::TooLarge { what: "canonical state rank", size: dim, limit: MAX_CANONICAL_DIM });
    }
    if dim < sp.len() {
        return Err(Error::ShapeMismatch(format!("{} atoms do not fit in dimension {dim}", sp.len())));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (i, &c) in sp.coefficients().iter().enumerate() {
        amplitudes[i * dim + i] = Complex64::new(c.sqrt(), 0.0);
    }
    let registers = vec![Register::new("A", dim, Party::A), Register::new("B", dim, Party::B)];
    BipartiteState::from_parts(registers, amplitudes)
}

/// Squared singular values of the A×B coefficient matrix, descending.
pub fn schmidt_values(state: &BipartiteState) -> Vec<f64> {
    let m = state.coefficient_matrix();
    let mut values: Vec<f64> = if m.nrows() == 1 || m.ncols() == 1 {
        vec![m.iter().map(|a| a.norm_sqr()).sum()]
    } else {
        m.svd(false, false).singular_values.iter().map(|s| s * s).collect()
    };
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Schmidt spectrum and rank (singular values above `rank_tol`).
pub fn schmidt_coefficients(state: &BipartiteState, rank_tol: f64) -> Result<(SchmidtSpectrum, usize)> {
    let values = schmidt_values(state);
    let kept: Vec<f64> = values.into_iter().filter(|v| v.sqrt() > rank_tol).collect();
    let rank = kept.len();
    let sp = normalize_spectrum(&kept, NORM_TOL, true)?;
    Ok((sp, rank))
}

/// `|⟨a|b⟩|` for states with identical register shapes.
pub fn fidelity(a: &BipartiteState, b: &BipartiteState) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch("states have different registers".into()));
    }
    Ok(a.inner_product(b)?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn sp(v: &[f64]) -> SchmidtSpectrum {
        SchmidtSpectrum::new(v).unwrap()
    }

    #[test]
    fn canonical_states() {
        let s = make_canonical_state(&sp(&[1.0])).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0)]);
        let s = make_canonical_state(&sp(&[0.5, 0.5])).unwrap();
        let h = 0.5f64.sqrt();
        assert_eq!(s.amplitudes(), &[c(h), c(0.0), c(0.0), c(h)]);
        let s = make_canonical_state(&sp(&[0.6, 0.4])).unwrap();
        assert_eq!(s.amplitudes(), &[c(0.6f64.sqrt()), c(0.0), c(0.0), c(0.4f64.sqrt())]);
        let big = SchmidtSpectrum::uniform(MAX_CANONICAL_DIM + 1).unwrap();
        assert!(matches!(make_canonical_state(&big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn schmidt_round_trip() {
        let product = make_canonical_state(&sp(&[1.0])).unwrap();
        let (s, r) = schmidt_coefficients(&product, RANK_TOL).unwrap();
        assert_eq!((s.coefficients(), r), (&[1.0][..], 1));
        let epr = make_canonical_state(&sp(&[0.5, 0.5])).unwrap();
        let (s, r) = schmidt_coefficients(&epr, RANK_TOL).unwrap();
        assert_eq!(r, 2);
        assert!(s.coefficients().iter().all(|x| (x - 0.5).abs() < 1e-12));
        let src = sp(&[0.6, 0.4]);
        let (s, _) = schmidt_coefficients(&make_canonical_state(&src).unwrap(), RANK_TOL).unwrap();
        for (a, b) in s.coefficients().iter().zip(src.coefficients()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_examples() {
        let a = make_canonical_state(&sp(&[0.6, 0.4])).unwrap();
        let b = make_canonical_state(&sp(&[0.5, 0.5])).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let expected = 0.3f64.sqrt() + 0.2f64.sqrt();
        assert!((fidelity(&a, &b).unwrap() - expected).abs() < 1e-12);

        let regs = vec![Register::new("A", 2, Party::A), Register::new("B", 2, Party::B)];
        let zero = BipartiteState::zero(regs.clone()).unwrap();
        let ones = BipartiteState::from_parts(regs, vec![c(0.0), c(0.0), c(0.0), c(1.0)]).unwrap();
        assert_eq!(fidelity(&zero, &ones).unwrap(), 0.0);
        let one = make_canonical_state(&sp(&[1.0])).unwrap();
        assert!(matches!(fidelity(&zero, &one), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn permutation_round_trip() {
        let regs =
            vec![Register::new("x", 2, Party::A), Register::new("y", 3, Party::B), Register::new("z", 4, Party::A)];
        let amps: Vec<Complex64> = (0..24).map(|k| c(k as f64)).collect();
        let s = BipartiteState::unchecked_norm(regs, amps).unwrap();
        let p = s.permuted(&[2, 0, 1]);
        // new index (z, x, y) reads old index x*12 + y*4 + z
        assert_eq!(p.amplitudes()[6 + 3 + 2], c((12 + 2 * 4 + 1) as f64));
        assert_eq!(p.permuted(&[1, 2, 0]), s);
    }

    #[test]
    fn append_discard_and_move() {
        let s = make_canonical_state(&sp(&[0.6, 0.4])).unwrap();
        let t = s.append_register("C", 4, Party::A).unwrap();
        assert_eq!(t.amplitudes().len(), 16);
        assert_eq!(t.discard_register("C").unwrap(), s);
        let moved = t.move_register("C", Party::A, Party::B).unwrap();
        assert_eq!(moved.amplitudes(), t.amplitudes());
        assert!(moved.move_register("C", Party::A, Party::B).is_err());

        let x = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let flipped = s.append_register("C", 2, Party::A).unwrap().apply_local(&["C"], &x).unwrap();
        assert!(matches!(flipped.discard_register("C"), Err(Error::DiscardNonZero { .. })));
    }

    #[test]
    fn householder_prepares_and_undoes() {
        let s = make_canonical_state(&sp(&[0.6, 0.4])).unwrap();
        let t = s.append_register("C1", 2, Party::A).unwrap().append_register("C2", 2, Party::A).unwrap();
        let cols = vec![
            vec![PrepareEntry { c1: 0, c2: 0, weight: 0.25 }, PrepareEntry { c1: 1, c2: 1, weight: 0.75 }],
            vec![PrepareEntry { c1: 1, c2: 1, weight: 1.0 }],
        ];
        let p = t.apply_controlled_prepare("A", ["C1", "C2"], &cols, 1e-12).unwrap();
        assert!((p.norm() - 1.0).abs() < 1e-12);
        let back = p.apply_controlled_prepare("A", ["C1", "C2"], &cols, 1e-12).unwrap();
        assert!((fidelity(&back, &t).unwrap() - 1.0).abs() < 1e-12);

        let bad = vec![vec![PrepareEntry { c1: 0, c2: 0, weight: 0.5 }]];
        assert!(matches!(
            t.apply_controlled_prepare("A", ["C1", "C2"], &bad, 1e-12),
            Err(Error::NonUnitaryStep { control: 0, .. })
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let regs = vec![Register::new("A", 1 << 13, Party::A), Register::new("B", 1 << 12, Party::B)];
        assert!(matches!(BipartiteState::zero(regs), Err(Error::TooLarge { .. })));
    }
}
