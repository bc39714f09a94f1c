//! Dense simulation of bipartite pure states, protocol replay, and the
//! communication-unitary model.

mod checks;
mod comm;
mod state;

use std::collections::HashMap;

pub use checks::{check_comm_innerprod_bound, check_innerprod_bound, BoundCheck, CommBoundCheck};
pub use comm::{apply_comm_unitary, haar_unitary, is_unitary, CommOp, CommUnitary, UNITARY_TOL};
pub use state::{
    fidelity, make_canonical_state, make_canonical_state_in, schmidt_coefficients, schmidt_values, BipartiteState,
    Register, LEAK_TOL, MAX_CANONICAL_DIM, MAX_TOTAL_DIM, NORM_TOL, RANK_TOL,
};

use crate::error::{Error, Result};
use crate::protocols::{ceil_log2, ConversionProtocol, ProtocolStep, COLUMN_TOL};

/// Replays `p` on `state`, which must carry registers `A` and `B` sized for
/// the protocol's source spectrum.
pub fn run_protocol(state: &BipartiteState, p: &ConversionProtocol) -> Result<BipartiteState> {
    for name in ["A", "B"] {
        match state.register(name) {
            Some(r) if r.dim == p.source.len() => {}
            Some(r) => {
                return Err(Error::ShapeMismatch(format!(
                    "register {name} has dimension {}, protocol expects {}",
                    r.dim,
                    p.source.len()
                )))
            }
            None => return Err(Error::ShapeMismatch(format!("no register named {name}"))),
        }
    }
    p.steps.iter().try_fold(state.clone(), |s, step| apply_step(&s, step))
}

pub fn apply_step(s: &BipartiteState, step: &ProtocolStep) -> Result<BipartiteState> {
    match step {
        ProtocolStep::AppendRegisters { owner, names, qubits } => {
            let mut out = s.clone();
            for name in names {
                out = out.append_register(name, 1usize << qubits, *owner)?;
            }
            Ok(out)
        }
        ProtocolStep::DiscardRegisters { names, .. } => {
            let mut out = s.clone();
            for name in names.iter().rev() {
                out = out.discard_register(name)?;
            }
            Ok(out)
        }
        ProtocolStep::ControlledPrepare { control, targets, columns, .. } => {
            let [t1, t2] = targets.as_slice() else {
                return Err(Error::ShapeMismatch(format!("prepare step has {} targets, expected 2", targets.len())));
            };
            s.apply_controlled_prepare(control, [t1, t2], columns, COLUMN_TOL)
        }
        ProtocolStep::Transmit { register, from, to, qubits } => {
            let dim = s.register(register).map(|r| r.dim).unwrap_or(0);
            if s.register(register).is_some() && ceil_log2(dim) != *qubits {
                return Err(Error::ShapeMismatch(format!(
                    "register {register} of dimension {dim} sent as {qubits} qubits"
                )));
            }
            let mut out = s.move_register(register, *from, *to)?;
            out.add_comm_cost(u64::from(*qubits));
            Ok(out)
        }
        ProtocolStep::RelabelBijection { pairs, primary_dim, aux_dim, target_dim, mapping, inverse } => {
            let mut out = s.clone();
            if *inverse {
                let mut split = vec![None; *target_dim];
                for &[i, a, j] in mapping {
                    if j < *target_dim {
                        split[j] = Some((i, a));
                    }
                }
                for pair in pairs {
                    out = out.split_register(
                        &pair.result,
                        (&pair.register, *primary_dim),
                        (&pair.aux, *aux_dim),
                        pair.owner,
                        &split,
                    )?;
                }
            } else {
                let map: HashMap<(usize, usize), usize> = mapping.iter().map(|&[i, a, j]| ((i, a), j)).collect();
                for pair in pairs {
                    out =
                        out.merge_registers(&pair.register, &pair.aux, &pair.result, pair.owner, *target_dim, &map)?;
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{FlowDirection, FlowGraph};
    use crate::protocols::{conversion_protocol, reverse_protocol, right_flow_to_protocol};
    use crate::spectra::SchmidtSpectrum;

    fn sp(v: &[f64]) -> SchmidtSpectrum {
        SchmidtSpectrum::new(v).unwrap()
    }

    #[test]
    fn empty_protocol_is_identity() {
        let s = sp(&[0.6, 0.4]);
        let st = make_canonical_state(&s).unwrap();
        assert_eq!(run_protocol(&st, &ConversionProtocol::empty(&s)).unwrap(), st);
    }

    #[test]
    fn fan_out_replay() {
        let one = sp(&[1.0]);
        let epr = sp(&[0.5, 0.5]);
        let g = FlowGraph {
            left: one.clone(),
            right: epr.clone(),
            edges: vec![(0, 0), (0, 1)],
            direction: FlowDirection::Right,
        };
        let p = right_flow_to_protocol(&one, &epr, &g).unwrap();
        let out = run_protocol(&make_canonical_state(&one).unwrap(), &p).unwrap();
        assert!(fidelity(&out, &make_canonical_state(&epr).unwrap()).unwrap() >= 1.0 - 1e-12);
        assert_eq!(out.comm_cost(), 1);

        let back = run_protocol(&out, &reverse_protocol(&p)).unwrap();
        assert!(fidelity(&back, &make_canonical_state(&one).unwrap()).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn composite_replay() {
        let (a, b) = (sp(&[1.0]), sp(&[0.5, 0.5]));
        let p = conversion_protocol(&a, &b).unwrap();
        let out = run_protocol(&make_canonical_state(&a).unwrap(), &p).unwrap();
        assert!(fidelity(&out, &make_canonical_state(&b).unwrap()).unwrap() >= 1.0 - 1e-9);
        assert!((out.norm() - 1.0).abs() < 1e-9);
        assert_eq!(out.comm_cost(), u64::from(p.declared_cost));
    }

    #[test]
    fn shape_is_checked() {
        let p = conversion_protocol(&sp(&[0.5, 0.5]), &sp(&[1.0])).unwrap();
        let wrong = make_canonical_state(&sp(&[1.0])).unwrap();
        assert!(matches!(run_protocol(&wrong, &p), Err(Error::ShapeMismatch(_))));
    }
}
