//! JSON file formats.
//!
//! Reals are written with 17 significant digits so every value read back is
//! bit-identical. Non-finite values are rejected in both directions.

use crate::error::{Error, Result};
use crate::flows::{FlowDirection, FlowGraph, ThreeStageFlows};
use crate::protocols::{ConversionProtocol, Party, PrepareEntry, ProtocolStep, RelabelPair};
use crate::simulator::{BipartiteState, Register};
use crate::spectra::{SchmidtSpectrum, NORMALIZATION_TOL};
use crate::transport::{EmdResult, PlanEdge, TransportPlan};
use crate::universality::{BlockDecomposition, LowerBoundReport, BOUND_FORMULA, BOUND_FORMULA_EIGHTH, H_FORMULA};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

/// Version tag of the protocol format.
pub const PROTOCOL_FORMAT: u32 = 1;

/// A real written as `d.dddddddddddddddde±x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for F17 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        if x.is_finite() {
            Ok(F17(x))
        } else {
            Err(serde::de::Error::custom("non-finite value"))
        }
    }
}

fn f17s(v: &[f64]) -> Vec<F17> {
    v.iter().copied().map(F17).collect()
}

fn raw(v: &[F17]) -> Vec<f64> {
    v.iter().map(|x| x.0).collect()
}

fn f17_matrix(m: &DMatrix<f64>) -> Vec<Vec<F17>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| F17(m[(r, c)])).collect()).collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Serialize, Deserialize)]
pub struct SpectrumFile {
    pub coefficients: Vec<F17>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl SpectrumFile {
    pub fn new(sp: &SchmidtSpectrum) -> Self {
        SpectrumFile { coefficients: f17s(sp.coefficients()), labels: Some(sp.labels().to_vec()) }
    }

    pub fn into_spectrum(self) -> Result<SchmidtSpectrum> {
        let c = raw(&self.coefficients);
        match self.labels {
            Some(labels) => SchmidtSpectrum::with_labels(&c, labels, NORMALIZATION_TOL, false),
            None => SchmidtSpectrum::new(&c),
        }
    }
}

pub fn spectrum_to_json(sp: &SchmidtSpectrum) -> Result<String> {
    to_json(&SpectrumFile::new(sp))
}

pub fn spectrum_from_json(text: &str) -> Result<SchmidtSpectrum> {
    parse::<SpectrumFile>(text)?.into_spectrum()
}

#[derive(Serialize, Deserialize)]
struct EdgeWire {
    i: usize,
    j: usize,
    mass: F17,
}

#[derive(Serialize, Deserialize)]
struct PlanWire {
    edges: Vec<EdgeWire>,
    distance: F17,
}

pub fn plan_to_json(result: &EmdResult) -> Result<String> {
    to_json(&PlanWire {
        edges: result.witness.edges.iter().map(|e| EdgeWire { i: e.i, j: e.j, mass: F17(e.mass) }).collect(),
        distance: F17(result.distance),
    })
}

/// Reads a plan between known spectra; returns it with its stored distance.
pub fn plan_from_json(text: &str, source: &SchmidtSpectrum, target: &SchmidtSpectrum) -> Result<(TransportPlan, f64)> {
    let w: PlanWire = parse(text)?;
    let mut edges = Vec::with_capacity(w.edges.len());
    for e in w.edges {
        if e.i >= source.len() {
            return Err(Error::IndexOutOfRange { index: e.i, len: source.len() });
        }
        if e.j >= target.len() {
            return Err(Error::IndexOutOfRange { index: e.j, len: target.len() });
        }
        edges.push(PlanEdge { i: e.i, j: e.j, mass: e.mass.0 });
    }
    Ok((TransportPlan { source: source.clone(), target: target.clone(), edges }, w.distance.0))
}

#[derive(Serialize, Deserialize)]
pub struct FlowFile {
    pub direction: FlowDirection,
    pub edges: Vec<[usize; 2]>,
}

impl FlowFile {
    pub fn new(g: &FlowGraph) -> Self {
        FlowFile { direction: g.direction, edges: g.edges.iter().map(|&(i, j)| [i, j]).collect() }
    }

    pub fn into_graph(self, left: &SchmidtSpectrum, right: &SchmidtSpectrum) -> Result<FlowGraph> {
        for &[i, j] in &self.edges {
            if i >= left.len() {
                return Err(Error::IndexOutOfRange { index: i, len: left.len() });
            }
            if j >= right.len() {
                return Err(Error::IndexOutOfRange { index: j, len: right.len() });
            }
        }
        Ok(FlowGraph {
            left: left.clone(),
            right: right.clone(),
            edges: self.edges.into_iter().map(|[i, j]| (i, j)).collect(),
            direction: self.direction,
        })
    }
}

pub fn flow_to_json(g: &FlowGraph) -> Result<String> {
    to_json(&FlowFile::new(g))
}

pub fn flow_from_json(text: &str, left: &SchmidtSpectrum, right: &SchmidtSpectrum) -> Result<FlowGraph> {
    parse::<FlowFile>(text)?.into_graph(left, right)
}

#[derive(Serialize, Deserialize)]
struct FlowsWire {
    distance: F17,
    slots: usize,
    chi: SpectrumFile,
    gamma: SpectrumFile,
    rho: SpectrumFile,
    upsilon: SpectrumFile,
    f1: FlowFile,
    f2: FlowFile,
    f3: FlowFile,
}

pub fn flows_to_json(f: &ThreeStageFlows) -> Result<String> {
    to_json(&FlowsWire {
        distance: F17(f.distance),
        slots: f.slots,
        chi: SpectrumFile::new(&f.chi),
        gamma: SpectrumFile::new(&f.gamma),
        rho: SpectrumFile::new(&f.rho),
        upsilon: SpectrumFile::new(&f.upsilon),
        f1: FlowFile::new(&f.f1),
        f2: FlowFile::new(&f.f2),
        f3: FlowFile::new(&f.f3),
    })
}

pub fn flows_from_json(text: &str) -> Result<ThreeStageFlows> {
    let w: FlowsWire = parse(text)?;
    let chi = w.chi.into_spectrum()?;
    let gamma = w.gamma.into_spectrum()?;
    let rho = w.rho.into_spectrum()?;
    let upsilon = w.upsilon.into_spectrum()?;
    Ok(ThreeStageFlows {
        distance: w.distance.0,
        slots: w.slots,
        f1: w.f1.into_graph(&chi, &gamma)?,
        f2: w.f2.into_graph(&gamma, &rho)?,
        f3: w.f3.into_graph(&rho, &upsilon)?,
        chi,
        gamma,
        rho,
        upsilon,
    })
}

/// `"p/q"` when a rational with denominator at most `2^24` reproduces the
/// value exactly, else the decimal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum WeightWire {
    Rational(String),
    Decimal(F17),
}

const MAX_DENOMINATOR: u64 = 1 << 24;

fn exact_rational(x: f64) -> Option<(u64, u64)> {
    if !(0.0..=1.0).contains(&x) {
        return None;
    }
    // Continued-fraction convergents.
    let (mut h0, mut h1, mut k0, mut k1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > MAX_DENOMINATOR as f64 {
            break;
        }
        let a = a as u64;
        let (h2, k2) = (a.checked_mul(h1)?.checked_add(h0)?, a.checked_mul(k1)?.checked_add(k0)?);
        if k2 > MAX_DENOMINATOR {
            break;
        }
        if h2 as f64 / k2 as f64 == x {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

impl WeightWire {
    fn new(w: f64) -> Self {
        match exact_rational(w) {
            Some((p, q)) => WeightWire::Rational(format!("{p}/{q}")),
            None => WeightWire::Decimal(F17(w)),
        }
    }

    fn value(&self) -> Result<f64> {
        match self {
            WeightWire::Decimal(x) => Ok(x.0),
            WeightWire::Rational(s) => {
                let bad = || Error::Format(format!("weight {s:?} is not of the form p/q"));
                let (p, q) = s.split_once('/').ok_or_else(bad)?;
                let p: u64 = p.trim().parse().map_err(|_| bad())?;
                let q: u64 = q.trim().parse().map_err(|_| bad())?;
                if q == 0 {
                    return Err(bad());
                }
                Ok(p as f64 / q as f64)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EntryWire {
    c1: usize,
    c2: usize,
    weight: WeightWire,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum StepWire {
    AppendRegisters {
        owner: Party,
        names: Vec<String>,
        qubits: u32,
    },
    DiscardRegisters {
        owner: Party,
        names: Vec<String>,
        qubits: u32,
    },
    ControlledPrepare {
        owner: Party,
        control: String,
        targets: Vec<String>,
        columns: Vec<Vec<EntryWire>>,
        adjoint: bool,
    },
    Transmit {
        register: String,
        from: Party,
        to: Party,
        qubits: u32,
    },
    RelabelBijection {
        pairs: Vec<PairWire>,
        primary_dim: usize,
        aux_dim: usize,
        target_dim: usize,
        mapping: Vec<[usize; 3]>,
        inverse: bool,
    },
}

#[derive(Serialize, Deserialize)]
struct PairWire {
    owner: Party,
    register: String,
    aux: String,
    result: String,
}

impl StepWire {
    fn new(step: &ProtocolStep) -> Self {
        match step.clone() {
            ProtocolStep::AppendRegisters { owner, names, qubits } => {
                StepWire::AppendRegisters { owner, names, qubits }
            }
            ProtocolStep::DiscardRegisters { owner, names, qubits } => {
                StepWire::DiscardRegisters { owner, names, qubits }
            }
            ProtocolStep::ControlledPrepare { owner, control, targets, columns, adjoint } => {
                StepWire::ControlledPrepare {
                    owner,
                    control,
                    targets,
                    columns: columns
                        .iter()
                        .map(|col| {
                            col.iter()
                                .map(|e| EntryWire { c1: e.c1, c2: e.c2, weight: WeightWire::new(e.weight) })
                                .collect()
                        })
                        .collect(),
                    adjoint,
                }
            }
            ProtocolStep::Transmit { register, from, to, qubits } => StepWire::Transmit { register, from, to, qubits },
            ProtocolStep::RelabelBijection { pairs, primary_dim, aux_dim, target_dim, mapping, inverse } => {
                StepWire::RelabelBijection {
                    pairs: pairs
                        .into_iter()
                        .map(|p| PairWire { owner: p.owner, register: p.register, aux: p.aux, result: p.result })
                        .collect(),
                    primary_dim,
                    aux_dim,
                    target_dim,
                    mapping,
                    inverse,
                }
            }
        }
    }

    fn into_step(self) -> Result<ProtocolStep> {
        Ok(match self {
            StepWire::AppendRegisters { owner, names, qubits } => {
                ProtocolStep::AppendRegisters { owner, names, qubits }
            }
            StepWire::DiscardRegisters { owner, names, qubits } => {
                ProtocolStep::DiscardRegisters { owner, names, qubits }
            }
            StepWire::ControlledPrepare { owner, control, targets, columns, adjoint } => {
                let columns = columns
                    .into_iter()
                    .map(|col| {
                        col.into_iter()
                            .map(|e| Ok(PrepareEntry { c1: e.c1, c2: e.c2, weight: e.weight.value()? }))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                ProtocolStep::ControlledPrepare { owner, control, targets, columns, adjoint }
            }
            StepWire::Transmit { register, from, to, qubits } => ProtocolStep::Transmit { register, from, to, qubits },
            StepWire::RelabelBijection { pairs, primary_dim, aux_dim, target_dim, mapping, inverse } => {
                ProtocolStep::RelabelBijection {
                    pairs: pairs
                        .into_iter()
                        .map(|p| RelabelPair { owner: p.owner, register: p.register, aux: p.aux, result: p.result })
                        .collect(),
                    primary_dim,
                    aux_dim,
                    target_dim,
                    mapping,
                    inverse,
                }
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ProtocolWire {
    format: u32,
    source: SpectrumFile,
    target: SpectrumFile,
    declared_cost: u32,
    steps: Vec<StepWire>,
}

pub fn protocol_to_json(p: &ConversionProtocol) -> Result<String> {
    to_json(&ProtocolWire {
        format: PROTOCOL_FORMAT,
        source: SpectrumFile::new(&p.source),
        target: SpectrumFile::new(&p.target),
        declared_cost: p.declared_cost,
        steps: p.steps.iter().map(StepWire::new).collect(),
    })
}

pub fn protocol_from_json(text: &str) -> Result<ConversionProtocol> {
    let w: ProtocolWire = parse(text)?;
    if w.format != PROTOCOL_FORMAT {
        return Err(Error::Format(format!("unsupported protocol format {}", w.format)));
    }
    Ok(ConversionProtocol {
        source: w.source.into_spectrum()?,
        target: w.target.into_spectrum()?,
        declared_cost: w.declared_cost,
        steps: w.steps.into_iter().map(StepWire::into_step).collect::<Result<_>>()?,
    })
}

#[derive(Serialize, Deserialize)]
struct RegisterWire {
    name: String,
    dim: usize,
    owner: Party,
}

#[derive(Serialize, Deserialize)]
struct Provenance {
    comm_cost: u64,
    subnormalized: bool,
}

#[derive(Serialize, Deserialize)]
struct StateWire {
    registers: Vec<RegisterWire>,
    amplitudes: Vec<[F17; 2]>,
    provenance: Provenance,
}

pub fn state_to_json(state: &BipartiteState) -> Result<String> {
    to_json(&StateWire {
        registers: state
            .registers()
            .iter()
            .map(|r| RegisterWire { name: r.name.clone(), dim: r.dim, owner: r.owner })
            .collect(),
        amplitudes: state.amplitudes().iter().map(|a| [F17(a.re), F17(a.im)]).collect(),
        provenance: Provenance { comm_cost: state.comm_cost(), subnormalized: state.is_subnormalized() },
    })
}

pub fn state_from_json(text: &str) -> Result<BipartiteState> {
    let w: StateWire = parse(text)?;
    let registers = w.registers.into_iter().map(|r| Register::new(r.name, r.dim, r.owner)).collect();
    let amplitudes = w.amplitudes.iter().map(|[re, im]| Complex64::new(re.0, im.0)).collect();
    let mut s = if w.provenance.subnormalized {
        BipartiteState::subnormalized(registers, amplitudes)?
    } else {
        BipartiteState::from_parts(registers, amplitudes)?
    };
    s.add_comm_cost(w.provenance.comm_cost);
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    pub index: i64,
    pub bins: Vec<i64>,
    pub atoms: usize,
    pub spread: F17,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChecksReport {
    pub trace_gap_ok: bool,
    pub far_min_gap: Option<i64>,
    pub far_gap_ok: bool,
    pub s_trace_ok: bool,
    pub max_block_spread: F17,
    pub spread_limit: F17,
    pub spread_ok: bool,
    pub sum_ok: bool,
    pub all: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Matrices {
    pub phi: Vec<Vec<F17>>,
    pub vblock: Vec<Vec<F17>>,
    pub vfar: Vec<Vec<F17>>,
    pub k: Vec<Vec<F17>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub n: u32,
    pub b: u64,
    pub epsilon: F17,
    pub classes: u64,
    pub k_star: u64,
    pub bins: Vec<i64>,
    pub bin_weights: Vec<F17>,
    pub s_traces: Vec<F17>,
    pub trace_gap: F17,
    pub blocks: Vec<BlockReport>,
    pub checks: ChecksReport,
    pub matrices: Matrices,
}

impl DecompositionReport {
    pub fn new(d: &BlockDecomposition) -> Self {
        let c = d.checks();
        DecompositionReport {
            n: d.n,
            b: d.b,
            epsilon: F17(d.epsilon),
            classes: d.classes,
            k_star: d.k_star,
            bins: d.bins.iter().map(|b| b.j).collect(),
            bin_weights: d.bins.iter().map(|b| F17(b.norm_sq)).collect(),
            s_traces: f17s(&d.s_traces),
            trace_gap: F17(d.trace_gap),
            blocks: d
                .blocks
                .iter()
                .map(|q| BlockReport {
                    index: q.index,
                    bins: q.members.iter().map(|&m| d.bins[m].j).collect(),
                    atoms: q.spectrum.len(),
                    spread: F17(q.spread),
                })
                .collect(),
            checks: ChecksReport {
                trace_gap_ok: c.trace_gap_ok,
                far_min_gap: c.far_min_gap,
                far_gap_ok: c.far_gap_ok,
                s_trace_ok: c.s_trace_ok,
                max_block_spread: F17(c.max_block_spread),
                spread_limit: F17(c.spread_limit),
                spread_ok: c.spread_ok,
                sum_ok: c.sum_ok,
                all: c.all(),
            },
            matrices: Matrices {
                phi: f17_matrix(&d.phi),
                vblock: f17_matrix(&d.vblock),
                vfar: f17_matrix(&d.vfar),
                k: f17_matrix(&d.k_matrix),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub epsilon: F17,
    pub q: F17,
    pub d: F17,
    pub h: F17,
    pub bound: F17,
    pub bound_eighth: F17,
    pub formulas: [&'static str; 3],
}

impl BoundReport {
    pub fn new(r: &LowerBoundReport) -> Self {
        BoundReport {
            epsilon: F17(r.epsilon),
            q: F17(r.q),
            d: F17(r.d),
            h: F17(r.h),
            bound: F17(r.bound),
            bound_eighth: F17(r.bound_eighth),
            formulas: [H_FORMULA, BOUND_FORMULA, BOUND_FORMULA_EIGHTH],
        }
    }
}
