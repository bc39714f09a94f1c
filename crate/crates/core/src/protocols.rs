//! Register-level conversion protocols compiled from index-one flows.
//!
//! A right flow `τ → κ` of degree at most `2^Q` becomes four steps: append two
//! `Q`-qubit registers at Alice, prepare `Σ_j √(κ_j/τ_i) |s_ij⟩|s_ij⟩`
//! controlled on her index `i`, send the second register to Bob, and let both
//! parties relabel `(i, s_ij) ↦ j`. Running the steps backwards with the
//! transmission reversed converts `κ` back into `τ`.

use crate::error::{Error, Result};
use crate::flows::{build_three_stage_flows, verify_flow, FlowDirection, FlowGraph, ThreeStageFlows};
use crate::spectra::SchmidtSpectrum;
use serde::{Deserialize, Serialize};

/// Unit-norm tolerance for prepared columns.
pub const COLUMN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Party::A => "A",
            Party::B => "B",
        })
    }
}

/// One amplitude of a prepared column: `√weight` on `|c1⟩|c2⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepareEntry {
    pub c1: usize,
    pub c2: usize,
    pub weight: f64,
}

/// Merges `register ⊗ aux` into `result` on one side of a relabel step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelabelPair {
    pub owner: Party,
    pub register: String,
    pub aux: String,
    pub result: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProtocolStep {
    /// Registers of `qubits` qubits each, initialized to `|0…0⟩`.
    AppendRegisters {
        owner: Party,
        names: Vec<String>,
        qubits: u32,
    },
    /// Removes registers after checking they are back in `|0…0⟩`.
    DiscardRegisters {
        owner: Party,
        names: Vec<String>,
        qubits: u32,
    },
    /// For each control value `i`, a unitary on the targets whose first
    /// column is `columns[i]`. `adjoint` marks the inverse step.
    ControlledPrepare {
        owner: Party,
        control: String,
        targets: Vec<String>,
        columns: Vec<Vec<PrepareEntry>>,
        adjoint: bool,
    },
    Transmit {
        register: String,
        from: Party,
        to: Party,
        qubits: u32,
    },
    /// `mapping` lists `(i, s, j)`: `|i⟩|s⟩ ↦ |j⟩` on each side. With
    /// `inverse` set the step splits `result` back into its two registers.
    RelabelBijection {
        pairs: Vec<RelabelPair>,
        primary_dim: usize,
        aux_dim: usize,
        target_dim: usize,
        mapping: Vec<[usize; 3]>,
        inverse: bool,
    },
}

impl ProtocolStep {
    /// Inverse step of a reversed protocol.
    pub fn inverted(&self) -> ProtocolStep {
        match self.clone() {
            ProtocolStep::AppendRegisters { owner, names, qubits } => {
                ProtocolStep::DiscardRegisters { owner, names, qubits }
            }
            ProtocolStep::DiscardRegisters { owner, names, qubits } => {
                ProtocolStep::AppendRegisters { owner, names, qubits }
            }
            ProtocolStep::ControlledPrepare { owner, control, targets, columns, adjoint } => {
                ProtocolStep::ControlledPrepare { owner, control, targets, columns, adjoint: !adjoint }
            }
            ProtocolStep::Transmit { register, from, to, qubits } => {
                ProtocolStep::Transmit { register, from: to, to: from, qubits }
            }
            ProtocolStep::RelabelBijection { pairs, primary_dim, aux_dim, target_dim, mapping, inverse } => {
                ProtocolStep::RelabelBijection { pairs, primary_dim, aux_dim, target_dim, mapping, inverse: !inverse }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConversionProtocol {
    pub source: SchmidtSpectrum,
    pub target: SchmidtSpectrum,
    pub steps: Vec<ProtocolStep>,
    pub declared_cost: u32,
}

impl ConversionProtocol {
    /// A protocol with no steps on `sp`.
    pub fn empty(sp: &SchmidtSpectrum) -> Self {
        ConversionProtocol { source: sp.clone(), target: sp.clone(), steps: Vec::new(), declared_cost: 0 }
    }
}

/// Total qubits sent by the protocol's transmit steps.
pub fn protocol_cost(p: &ConversionProtocol) -> u32 {
    p.steps
        .iter()
        .map(|s| match s {
            ProtocolStep::Transmit { qubits, .. } => *qubits,
            _ => 0,
        })
        .sum()
}

/// `⌈log₂ n⌉`, zero for `n ≤ 1`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

pub fn right_flow_to_protocol(
    tau: &SchmidtSpectrum,
    kappa: &SchmidtSpectrum,
    g: &FlowGraph,
) -> Result<ConversionProtocol> {
    if g.direction != FlowDirection::Right {
        return Err(Error::InvalidFlow("expected a right flow".into()));
    }
    if !verify_flow(tau, kappa, g)? {
        return Err(Error::InvalidFlow("index or mass condition fails".into()));
    }
    let mut fan: Vec<Vec<usize>> = vec![Vec::new(); tau.len()];
    for &(i, j) in &g.edges {
        fan[i].push(j);
    }
    let degree = fan.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let q = ceil_log2(degree);
    let aux_dim = 1usize << q;

    let mut columns = Vec::with_capacity(tau.len());
    let mut mapping = Vec::with_capacity(kappa.len());
    for (i, targets) in fan.iter_mut().enumerate() {
        targets.sort_unstable();
        let total: f64 = targets.iter().map(|&j| kappa.coefficients()[j]).sum();
        let column = targets
            .iter()
            .enumerate()
            .map(|(s, &j)| PrepareEntry { c1: s, c2: s, weight: kappa.coefficients()[j] / total })
            .collect();
        columns.push(column);
        mapping.extend(targets.iter().enumerate().map(|(s, &j)| [i, s, j]));
    }

    let steps = vec![
        ProtocolStep::AppendRegisters { owner: Party::A, names: vec!["C1".into(), "C2".into()], qubits: q },
        ProtocolStep::ControlledPrepare {
            owner: Party::A,
            control: "A".into(),
            targets: vec!["C1".into(), "C2".into()],
            columns,
            adjoint: false,
        },
        ProtocolStep::Transmit { register: "C2".into(), from: Party::A, to: Party::B, qubits: q },
        ProtocolStep::RelabelBijection {
            pairs: vec![
                RelabelPair { owner: Party::A, register: "A".into(), aux: "C1".into(), result: "A".into() },
                RelabelPair { owner: Party::B, register: "B".into(), aux: "C2".into(), result: "B".into() },
            ],
            primary_dim: tau.len(),
            aux_dim,
            target_dim: kappa.len(),
            mapping,
            inverse: false,
        },
    ];
    Ok(ConversionProtocol { source: tau.clone(), target: kappa.clone(), steps, declared_cost: q })
}

pub fn reverse_protocol(p: &ConversionProtocol) -> ConversionProtocol {
    ConversionProtocol {
        source: p.target.clone(),
        target: p.source.clone(),
        steps: p.steps.iter().rev().map(ProtocolStep::inverted).collect(),
        declared_cost: p.declared_cost,
    }
}

/// Concatenates protocols whose targets and sources line up.
pub fn compose(parts: &[ConversionProtocol]) -> ConversionProtocol {
    let first = parts.first().expect("at least one protocol");
    let last = parts.last().expect("at least one protocol");
    ConversionProtocol {
        source: first.source.clone(),
        target: last.target.clone(),
        steps: parts.iter().flat_map(|p| p.steps.iter().cloned()).collect(),
        declared_cost: parts.iter().map(|p| p.declared_cost).sum(),
    }
}

/// Converts `χ` into `υ` through the intermediate spectra of the three-stage
/// flow construction.
pub fn conversion_protocol(chi: &SchmidtSpectrum, ups: &SchmidtSpectrum) -> Result<ConversionProtocol> {
    let flows = build_three_stage_flows(chi, ups)?;
    protocol_from_flows(&flows)
}

pub fn protocol_from_flows(flows: &ThreeStageFlows) -> Result<ConversionProtocol> {
    let p1 = right_flow_to_protocol(&flows.chi, &flows.gamma, &flows.f1)?;
    let p2 = right_flow_to_protocol(&flows.rho, &flows.gamma, &flows.f2.mirrored())?;
    let p3 = right_flow_to_protocol(&flows.upsilon, &flows.rho, &flows.f3.mirrored())?;
    Ok(compose(&[p1, reverse_protocol(&p2), reverse_protocol(&p3)]))
}

/// `4⌈d⌉ + 8`.
pub fn conversion_budget(d: f64) -> u32 {
    4 * crate::flows::ceil_snapped(d) + 8
}
