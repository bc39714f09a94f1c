use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::state::{BipartiteState, Register};
use crate::error::{Error, Result};
use crate::protocols::{ceil_log2, Party};

/// Entrywise tolerance on `U†U = I`.
pub const UNITARY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum CommOp {
    /// Unitary on registers held by `owner`: the listed ones in that order,
    /// or all of them in state order when `registers` is `None`.
    LocalUnitary { owner: Party, registers: Option<Vec<String>>, matrix: DMatrix<Complex64> },
    /// Sends a whole register across, costing `⌈log₂ dim⌉` qubits.
    MoveRegister { name: String, from: Party, to: Party, dim: usize },
}

/// Interleaved local unitaries and register transfers.
///
/// `workspace` registers are tensored in, in `|0⟩`, before the first op.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommUnitary {
    pub workspace: Vec<Register>,
    pub ops: Vec<CommOp>,
}

impl CommUnitary {
    pub fn comm_cost(&self) -> u32 {
        self.ops
            .iter()
            .map(|op| match op {
                CommOp::MoveRegister { dim, .. } => ceil_log2(*dim),
                CommOp::LocalUnitary { .. } => 0,
            })
            .sum()
    }

    /// Appends the workspace registers to `state`.
    pub fn prepare(&self, state: &BipartiteState) -> Result<BipartiteState> {
        self.workspace.iter().try_fold(state.clone(), |s, r| s.append_register(&r.name, r.dim, r.owner))
    }
}

pub fn is_unitary(m: &DMatrix<Complex64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let g = m.adjoint() * m;
    g.iter().enumerate().all(|(k, v)| {
        let expected = if k % (m.nrows() + 1) == 0 { 1.0 } else { 0.0 };
        (v - Complex64::new(expected, 0.0)).norm() <= tol
    })
}

pub fn apply_comm_unitary(state: &BipartiteState, u: &CommUnitary) -> Result<BipartiteState> {
    let mut s = u.prepare(state)?;
    for op in &u.ops {
        s = match op {
            CommOp::LocalUnitary { owner, registers, matrix } => {
                if !is_unitary(matrix, UNITARY_TOL) {
                    return Err(Error::NonUnitary(format!(
                        "{}x{} local matrix for {owner}",
                        matrix.nrows(),
                        matrix.ncols()
                    )));
                }
                let names: Vec<String> = match registers {
                    Some(list) => {
                        for name in list {
                            match s.register(name) {
                                Some(r) if r.owner == *owner => {}
                                _ => {
                                    return Err(Error::ShapeMismatch(format!("{owner} does not hold register {name}")))
                                }
                            }
                        }
                        list.clone()
                    }
                    None => s.registers().iter().filter(|r| r.owner == *owner).map(|r| r.name.clone()).collect(),
                };
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                s.apply_local(&refs, matrix)?
            }
            CommOp::MoveRegister { name, from, to, dim } => {
                match s.register(name) {
                    Some(r) if r.dim == *dim => {}
                    _ => return Err(Error::ShapeMismatch(format!("no register {name} of dimension {dim}"))),
                }
                let mut out = s.move_register(name, *from, *to)?;
                out.add_comm_cost(u64::from(ceil_log2(*dim)));
                out
            }
        };
    }
    Ok(s)
}

/// Haar-distributed `n × n` unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal folded into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for row in 0..n {
            q[(row, k)] *= phase;
        }
    }
    q
}
