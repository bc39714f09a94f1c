//! Index-one flow graphs and the three-stage greedy construction.
//!
//! A right flow from `τ` to `κ` assigns every atom of `κ` to exactly one atom
//! of `τ` so that each `τ_i` is the sum of the `κ_j` assigned to it. A left
//! flow is the mirror image.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::spectra::SchmidtSpectrum;
use crate::transport::emd_linf;
use serde::{Deserialize, Serialize};

/// Tolerance on flow mass conservation.
pub const FLOW_TOL: f64 = 1e-9;

/// Mass comparisons inside the greedy split.
const SPLIT_TOL: f64 = 1e-12;

/// Largest number of intermediate slots the construction will allocate.
pub const MAX_SLOTS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    /// Every right vertex has exactly one edge.
    Right,
    /// Every left vertex has exactly one edge.
    Left,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowGraph {
    pub left: SchmidtSpectrum,
    pub right: SchmidtSpectrum,
    /// `(left index, right index)` pairs.
    pub edges: Vec<(usize, usize)>,
    pub direction: FlowDirection,
}

impl FlowGraph {
    /// The same graph read from the other side, with the direction flipped.
    pub fn mirrored(&self) -> FlowGraph {
        FlowGraph {
            left: self.right.clone(),
            right: self.left.clone(),
            edges: self.edges.iter().map(|&(i, j)| (j, i)).collect(),
            direction: match self.direction {
                FlowDirection::Right => FlowDirection::Left,
                FlowDirection::Left => FlowDirection::Right,
            },
        }
    }

    /// Identity flow on a single spectrum.
    pub fn identity(sp: &SchmidtSpectrum) -> FlowGraph {
        FlowGraph {
            left: sp.clone(),
            right: sp.clone(),
            edges: (0..sp.len()).map(|i| (i, i)).collect(),
            direction: FlowDirection::Right,
        }
    }
}

/// Checks the index-one and mass-conservation conditions of `g` against the
/// given endpoint spectra.
pub fn verify_flow(src: &SchmidtSpectrum, dst: &SchmidtSpectrum, g: &FlowGraph) -> Result<bool> {
    for &(i, j) in &g.edges {
        if i >= src.len() {
            return Err(Error::IndexOutOfRange { index: i, len: src.len() });
        }
        if j >= dst.len() {
            return Err(Error::IndexOutOfRange { index: j, len: dst.len() });
        }
    }
    let (hub, leaf) = match g.direction {
        FlowDirection::Right => (src, dst),
        FlowDirection::Left => (dst, src),
    };
    let mut leaf_count = vec![0usize; leaf.len()];
    let mut hub_mass = vec![0.0; hub.len()];
    for &(i, j) in &g.edges {
        let (h, l) = match g.direction {
            FlowDirection::Right => (i, j),
            FlowDirection::Left => (j, i),
        };
        leaf_count[l] += 1;
        hub_mass[h] += leaf.coefficients()[l];
    }
    let index_one = leaf_count.iter().all(|&c| c == 1);
    let conserved = hub_mass.iter().zip(hub.coefficients()).all(|(m, c)| (m - c).abs() <= FLOW_TOL);
    Ok(index_one && conserved)
}

/// Largest number of edges incident to any vertex.
pub fn flow_degree(g: &FlowGraph) -> usize {
    let mut left = vec![0usize; g.left.len()];
    let mut right = vec![0usize; g.right.len()];
    for &(i, j) in &g.edges {
        left[i] += 1;
        right[j] += 1;
    }
    left.into_iter().chain(right).max().unwrap_or(0)
}

/// Intermediate spectra and the three flows `χ → γ → ρ → υ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeStageFlows {
    pub distance: f64,
    /// Slots per target atom, `2^(⌈d⌉+2)`.
    pub slots: usize,
    pub chi: SchmidtSpectrum,
    /// Atoms labeled `j:k:r`.
    pub gamma: SchmidtSpectrum,
    /// Atoms labeled `j:k`, each `υ_j / slots`.
    pub rho: SchmidtSpectrum,
    pub upsilon: SchmidtSpectrum,
    /// Right flow `χ → γ`.
    pub f1: FlowGraph,
    /// Left flow `γ → ρ`.
    pub f2: FlowGraph,
    /// Left flow `ρ → υ`.
    pub f3: FlowGraph,
}

impl ThreeStageFlows {
    /// `⌈d⌉` as used for the slot count.
    pub fn ceil_distance(&self) -> u32 {
        self.slots.trailing_zeros() - 2
    }
}

/// Dyadic bin `m` with `2^-m ≥ x > 2^-(m+1)`.
pub fn dyadic_bin(x: f64) -> i32 {
    let mut m = (-x.log2()).floor() as i32;
    while 2f64.powi(-m) < x {
        m -= 1;
    }
    while x <= 2f64.powi(-(m + 1)) {
        m += 1;
    }
    m
}

/// `⌈d⌉`, treating values within rounding of an integer as that integer.
pub fn ceil_snapped(d: f64) -> u32 {
    let r = d.round();
    let c = if (d - r).abs() < FLOW_TOL { r } else { d.ceil() };
    c.max(0.0) as u32
}

struct Piece {
    atom: usize,
    j: usize,
    k: usize,
    r: usize,
    mass: f64,
}

pub fn build_three_stage_flows(chi: &SchmidtSpectrum, ups: &SchmidtSpectrum) -> Result<ThreeStageFlows> {
    let emd = emd_linf(chi, ups);
    let c = ceil_snapped(emd.distance);
    if c + 2 >= usize::BITS - 1 {
        return Err(Error::TooLarge { what: "slot count", size: usize::MAX, limit: MAX_SLOTS });
    }
    let slots = 1usize << (c + 2);
    let total_slots = ups.len().saturating_mul(slots);
    if total_slots > MAX_SLOTS {
        return Err(Error::TooLarge { what: "slot count", size: total_slots, limit: MAX_SLOTS });
    }
    let slot_mass: Vec<f64> = ups.coefficients().iter().map(|&u| u / slots as f64).collect();

    let mut chi_bins: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &x) in chi.coefficients().iter().enumerate() {
        chi_bins.entry(dyadic_bin(x)).or_default().push(i);
    }
    let mut ups_bins: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (j, &y) in ups.coefficients().iter().enumerate() {
        ups_bins.entry(dyadic_bin(y)).or_default().push(j);
    }
    let chi_bin_of: Vec<i32> = chi.coefficients().iter().map(|&x| dyadic_bin(x)).collect();
    let ups_bin_of: Vec<i32> = ups.coefficients().iter().map(|&y| dyadic_bin(y)).collect();
    // bin-pair mass keyed by (l, m) so iteration runs l-major, m ascending
    let mut omega: BTreeMap<(i32, i32), f64> = BTreeMap::new();
    for e in &emd.witness.edges {
        *omega.entry((ups_bin_of[e.j], chi_bin_of[e.i])).or_default() += e.mass;
    }

    let mut temp: Vec<f64> = chi.coefficients().to_vec();
    let mut cursor: HashMap<i32, usize> = chi_bins.keys().map(|&m| (m, 0)).collect();
    let mut pieces: Vec<Piece> = Vec::new();

    for (&l, members) in &ups_bins {
        let (mut jpos, mut k, mut overflow, mut filled) = (0usize, 0usize, 0usize, 0.0f64);
        for (&(_, m), &w) in omega.range((l, i32::MIN)..=(l, i32::MAX)) {
            if w <= 0.0 {
                continue;
            }
            let bin = &chi_bins[&m];
            let at = cursor.get_mut(&m).expect("bin cursor");
            let mut temp_w = w;
            while temp_w > SPLIT_TOL {
                if k == slots {
                    jpos += 1;
                    k = 0;
                    overflow = 0;
                    filled = 0.0;
                }
                if jpos >= members.len() || *at >= bin.len() {
                    break;
                }
                let j = members[jpos];
                let need = slot_mass[j] - filled;
                if need <= SPLIT_TOL {
                    k += 1;
                    overflow = 0;
                    filled = 0.0;
                    continue;
                }
                let i = bin[*at];
                let piece;
                if temp_w >= need - SPLIT_TOL {
                    if temp[i] < need - SPLIT_TOL {
                        piece = temp[i];
                        temp[i] = 0.0;
                        *at += 1;
                        pieces.push(Piece { atom: i, j, k, r: overflow, mass: piece });
                        overflow += 1;
                        filled += piece;
                    } else {
                        piece = need;
                        temp[i] -= piece;
                        let mut mass = piece;
                        if temp[i] <= SPLIT_TOL {
                            mass += temp[i];
                            temp[i] = 0.0;
                            *at += 1;
                        }
                        pieces.push(Piece { atom: i, j, k, r: overflow, mass });
                        k += 1;
                        overflow = 0;
                        filled = 0.0;
                    }
                } else if temp[i] <= temp_w {
                    piece = temp[i];
                    temp[i] = 0.0;
                    *at += 1;
                    pieces.push(Piece { atom: i, j, k, r: overflow, mass: piece });
                    overflow += 1;
                    filled += piece;
                } else {
                    piece = temp_w;
                    temp[i] -= piece;
                    let mut mass = piece;
                    if temp[i] <= SPLIT_TOL {
                        mass += temp[i];
                        temp[i] = 0.0;
                        *at += 1;
                    }
                    pieces.push(Piece { atom: i, j, k, r: overflow, mass });
                    overflow += 1;
                    filled += piece;
                }
                temp_w -= piece;
            }
        }
    }

    settle_leftovers(&mut pieces, &temp);

    let gamma_labels: Vec<String> = pieces.iter().map(|p| format!("{}:{}:{}", p.j, p.k, p.r)).collect();
    let gamma_mass: Vec<f64> = pieces.iter().map(|p| p.mass).collect();
    let gamma = SchmidtSpectrum::with_labels(&gamma_mass, gamma_labels.clone(), FLOW_TOL, false)?;
    let gamma_index = label_index(&gamma);

    let mut rho_labels = Vec::with_capacity(total_slots);
    let mut rho_mass = Vec::with_capacity(total_slots);
    for (j, &m) in slot_mass.iter().enumerate() {
        for k in 0..slots {
            rho_labels.push(format!("{j}:{k}"));
            rho_mass.push(m);
        }
    }
    let rho = SchmidtSpectrum::with_labels(&rho_mass, rho_labels, FLOW_TOL, false)?;
    let rho_index = label_index(&rho);

    let mut f1_edges: Vec<(usize, usize)> =
        pieces.iter().zip(&gamma_labels).map(|(p, label)| (p.atom, gamma_index[label.as_str()])).collect();
    f1_edges.sort_unstable();
    let mut f2_edges: Vec<(usize, usize)> = pieces
        .iter()
        .zip(&gamma_labels)
        .map(|(p, label)| (gamma_index[label.as_str()], rho_index[format!("{}:{}", p.j, p.k).as_str()]))
        .collect();
    f2_edges.sort_unstable();
    let mut f3_edges: Vec<(usize, usize)> = rho
        .labels()
        .iter()
        .enumerate()
        .map(|(idx, label)| {
            let j: usize = label.split(':').next().and_then(|s| s.parse().ok()).expect("rho label");
            (idx, j)
        })
        .collect();
    f3_edges.sort_unstable();

    Ok(ThreeStageFlows {
        distance: emd.distance,
        slots,
        f1: FlowGraph { left: chi.clone(), right: gamma.clone(), edges: f1_edges, direction: FlowDirection::Right },
        f2: FlowGraph { left: gamma.clone(), right: rho.clone(), edges: f2_edges, direction: FlowDirection::Left },
        f3: FlowGraph { left: rho.clone(), right: ups.clone(), edges: f3_edges, direction: FlowDirection::Left },
        chi: chi.clone(),
        gamma,
        rho,
        upsilon: ups.clone(),
    })
}

/// Folds rounding residue back into the last piece of each atom. An atom too
/// light to have survived the coupling joins the slot of the piece preceding
/// it in emission order.
fn settle_leftovers(pieces: &mut Vec<Piece>, temp: &[f64]) {
    let mut last: Vec<Option<usize>> = vec![None; temp.len()];
    for (idx, p) in pieces.iter().enumerate() {
        last[p.atom] = Some(idx);
    }
    for (i, &rest) in temp.iter().enumerate() {
        if rest <= 0.0 {
            continue;
        }
        match last[i] {
            Some(idx) => pieces[idx].mass += rest,
            None => {
                let host = (0..i).rev().find_map(|a| last[a]).or_else(|| (i + 1..temp.len()).find_map(|a| last[a]));
                let Some(host) = host else { continue };
                let (j, k) = (pieces[host].j, pieces[host].k);
                let r = pieces.iter().filter(|p| p.j == j && p.k == k).map(|p| p.r + 1).max().unwrap_or(0);
                pieces.push(Piece { atom: i, j, k, r, mass: rest });
                last[i] = Some(pieces.len() - 1);
            }
        }
    }
}

fn label_index(sp: &SchmidtSpectrum) -> HashMap<&str, usize> {
    sp.labels().iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect()
}
