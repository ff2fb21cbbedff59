//! The full heralding protocol: circuit assembly, herald runs with
//! per-emission-sector breakdown, the tapped-source variant, and the
//! qubit-level oracle used to verify the optical simulation.
//!
//! Wiring conventions (fixed here, verified against the oracle by tests):
//! - the upper PBS is computational on inputs {2, 5} with outputs {o2, d5}
//!   (port 2 transmits to o2, port 5 transmits to d5);
//! - the lower PBS is diagonal on inputs {4, 6} with outputs {o4, d6}
//!   (|+⟩ from port 4 transmits to o4, from port 6 to d6);
//! - detectors: d5 diagonal, d6 computational, o2 diagonal, o4 computational;
//! - control = port 2 at the computational PBS, target = port 4 at the
//!   diagonal PBS: the assignment under which the oracle reproduces the
//!   post-gate four-qubit state exactly;
//! - feed-forward: Z on the first surviving port when the effective o2
//!   reading is −, X on the second when the effective o4 reading is 1,
//!   where "effective" folds the gate detector outcomes into the output
//!   detector readings.

use std::sync::Arc;

use num_complex::Complex64;

use crate::detection::{
    herald_accept, measure, Basis, DetectionPattern, DetectorModel, HeraldBranch, HeraldMode,
    Outcome, PatternEntry,
};
use crate::elements::{self, ModeTransform};
use crate::error::{Result, SimError};
use crate::fock::{Bell, ChannelRegistry, FockState, Pauli, Polarization, TwoQubitDM};
use crate::sources::{self, SourceSpec};

/// How branch corrections are chosen for a circuit.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum CorrectionRule {
    /// Outcome-dependent table of the entanglement-swapping protocol.
    OutcomeTable,
    /// The same fixed pair for every accepted branch (tapped-source layout,
    /// where the detector photons carry fixed polarizations and outcomes are
    /// uninformative coin flips).
    Fixed(Pauli, Pauli),
}

/// An assembled optical circuit with its herald detectors.
#[derive(Clone, Debug)]
pub struct Circuit {
    registry: Arc<ChannelRegistry>,
    transforms: Vec<ModeTransform>,
    gate_pattern: DetectionPattern,
    output_pattern: DetectionPattern,
    surviving: (String, String),
    corrections: CorrectionRule,
}

impl Circuit {
    pub fn registry(&self) -> &Arc<ChannelRegistry> {
        &self.registry
    }

    pub fn surviving_ports(&self) -> (&str, &str) {
        (&self.surviving.0, &self.surviving.1)
    }

    /// Embeds the input, applies all transforms, and enumerates herald
    /// branches. Branch probabilities and ensemble weights are joint
    /// per-pulse values (scaled by the input's squared norm, so sub-unit
    /// sector inputs report their absolute contribution).
    pub fn run_branches(
        &self,
        input: &FockState,
        model: &DetectorModel,
        mode: HeraldMode,
    ) -> Result<Vec<HeraldBranch>> {
        let mut state = input.embed(&self.registry)?;
        for t in &self.transforms {
            state = state.apply_transform(t)?;
        }
        let scale = state.norm_sqr();
        let mut branches = herald_accept(
            &state,
            &self.gate_pattern,
            &self.output_pattern,
            mode,
            model,
        )?;
        for b in &mut branches {
            b.probability *= scale;
            for mb in &mut b.states {
                mb.weight *= scale;
            }
            if let CorrectionRule::Fixed(p1, p2) = self.corrections {
                b.correction = (p1, p2);
            }
        }
        Ok(branches)
    }

    /// Runs the circuit and reduces every accepted branch onto the surviving
    /// pair, accumulating corrected density-matrix contributions.
    pub fn run_summary(
        &self,
        input: &FockState,
        model: &DetectorModel,
        mode: HeraldMode,
    ) -> Result<RunSummary> {
        let mut summary = RunSummary::empty();
        for branch in self.run_branches(input, model, mode)? {
            summary.probability += branch.probability;
            for mb in &branch.states {
                if mb.weight <= 0.0 {
                    continue;
                }
                let red = mb.state.reduce_two_qubit(&self.surviving.0, &self.surviving.1)?;
                if let Some(dm) = red.dm {
                    let corrected = dm.apply_local(branch.correction.0, branch.correction.1);
                    summary.accum.add_scaled(&corrected, mb.weight * red.qubit_weight);
                }
            }
        }
        Ok(summary)
    }
}

/// Herald probability plus the accumulated (unnormalized) two-qubit state of
/// the surviving pair.
#[derive(Clone, Debug)]
pub struct RunSummary {
    /// Total herald probability per pulse.
    pub probability: f64,
    /// Σ over branches of probability × qubit_weight × corrected dm.
    pub accum: TwoQubitDM,
}

impl RunSummary {
    fn empty() -> Self {
        RunSummary { probability: 0.0, accum: TwoQubitDM::zero() }
    }

    fn merge(&mut self, other: &RunSummary) {
        self.probability += other.probability;
        self.accum.add_scaled(&other.accum, 1.0);
    }

    /// Herald-conditioned fraction inside the one-photon-per-port subspace.
    pub fn qubit_weight(&self) -> f64 {
        if self.probability > 0.0 {
            self.accum.trace() / self.probability
        } else {
            0.0
        }
    }

    /// Normalized density matrix of the qubit-subspace component.
    pub fn dm(&self) -> TwoQubitDM {
        self.accum.normalized()
    }

    /// ⟨Bell|ρ|Bell⟩ of the heralded pair, counting any component outside
    /// the one-photon-per-port subspace as zero fidelity.
    pub fn fidelity(&self, which: Bell) -> f64 {
        if self.probability > 0.0 {
            self.accum.fidelity_to_bell(which) / self.probability
        } else {
            0.0
        }
    }
}

fn main_ports() -> [&'static str; 10] {
    ["1", "2", "3", "4", "5", "6", "d5", "o2", "d6", "o4"]
}

fn strict_entry(port: &str, basis: Basis) -> PatternEntry {
    PatternEntry::new(port, basis, Outcome::Exact(1, 0))
}

/// The Fig. 1/2 heralding circuit: three pair sources on ports (1,2), (3,4),
/// (5,6), the probabilistic CNOT formed by the two PBSs, and four herald
/// detectors. Surviving ports: 1 and 3.
pub fn build_main_circuit() -> Circuit {
    build_main_circuit_with_bins(1)
}

/// Main circuit over a registry carrying `bins` temporal bins per port.
pub fn build_main_circuit_with_bins(bins: u8) -> Circuit {
    let registry = ChannelRegistry::from_ports_with_bins(&main_ports(), bins)
        .expect("fixed port list is valid");
    let transforms = vec![
        elements::pbs_computational("2", "5", "o2", "d5").expect("distinct ports"),
        elements::pbs_diagonal("4", "6", "o4", "d6").expect("distinct ports"),
    ];
    Circuit {
        registry,
        transforms,
        gate_pattern: DetectionPattern::new(vec![
            strict_entry("d5", Basis::Diagonal),
            strict_entry("d6", Basis::Computational),
        ])
        .expect("distinct ports"),
        output_pattern: DetectionPattern::new(vec![
            strict_entry("o2", Basis::Diagonal),
            strict_entry("o4", Basis::Computational),
        ])
        .expect("distinct ports"),
        surviving: ("1".into(), "3".into()),
        corrections: CorrectionRule::OutcomeTable,
    }
}

/// The tapped-source variant: a single source on ports (5,6), beamsplitters
/// diverting photons into heralded output ports 7 and 8, and the same
/// four-detector herald. `routing` is the probability of continuing to the
/// CNOT path. Photons reaching the detectors carry fixed polarizations in
/// this layout, so every branch heralds the same pair state up to the fixed
/// (Z, X) correction applied here.
pub fn build_sliwa_circuit(routing: f64) -> Result<Circuit> {
    if !(routing > 0.0 && routing < 1.0) {
        return Err(SimError::InvalidArgument(format!(
            "routing parameter {routing} outside (0, 1)"
        )));
    }
    let ports = ["2", "4", "5", "6", "7", "8", "d5", "o2", "d6", "o4"];
    let registry = ChannelRegistry::from_ports(&ports).expect("fixed port list is valid");
    let transforms = vec![
        elements::beamsplitter("5", "7", routing)?,
        elements::beamsplitter("6", "8", routing)?,
        elements::pbs_computational("2", "5", "o2", "d5").expect("distinct ports"),
        elements::pbs_diagonal("4", "6", "o4", "d6").expect("distinct ports"),
    ];
    Ok(Circuit {
        registry,
        transforms,
        gate_pattern: DetectionPattern::new(vec![
            strict_entry("d5", Basis::Diagonal),
            strict_entry("d6", Basis::Computational),
        ])
        .expect("distinct ports"),
        output_pattern: DetectionPattern::new(vec![
            strict_entry("o2", Basis::Diagonal),
            strict_entry("o4", Basis::Computational),
        ])
        .expect("distinct ports"),
        surviving: ("7".into(), "8".into()),
        corrections: CorrectionRule::Fixed(Pauli::Z, Pauli::X),
    })
}

/// One emission sector (pair counts per source) of a herald run.
#[derive(Clone, Debug)]
pub struct SectorRow {
    pub n_a: u32,
    pub n_b: u32,
    pub n_c: u32,
    /// Joint probability of this sector and the herald, per pulse.
    pub probability: f64,
    /// Fidelity to φ⁺ of this sector's conditioned contribution.
    pub fidelity: f64,
}

/// Outcome of a herald run: totals, conditioned pair state, and the
/// per-emission-sector breakdown.
#[derive(Clone, Debug)]
pub struct HeraldResult {
    /// Herald probability per pulse (all sources firing once).
    pub probability: f64,
    /// Herald-conditioned weight of the one-photon-per-port subspace.
    pub qubit_weight: f64,
    /// Normalized density matrix of the heralded pair (qubit subspace).
    pub dm: TwoQubitDM,
    /// Fidelity to φ⁺ including the weight outside the qubit subspace.
    pub fidelity: f64,
    /// Sector table sorted by (n_a, n_b, n_c).
    pub sectors: Vec<SectorRow>,
    /// Input-state weight sitting in sectors at any source's pair cutoff;
    /// bounds the error of the truncation.
    pub truncation_weight: f64,
}

fn expect_ports(spec: &SourceSpec, x: &str, y: &str, name: &str) -> Result<()> {
    if spec.port_x != x || spec.port_y != y {
        return Err(SimError::InvalidArgument(format!(
            "source {name} must emit into ports ({x}, {y})"
        )));
    }
    Ok(())
}

/// Runs the full heralding protocol with one down-conversion source per
/// input pair, accumulating the result sector by sector. Sectors are exactly
/// separable: the undetected ports 1 and 3 carry the pair counts of sources
/// A and B, so distinct sectors stay orthogonal through the herald.
pub fn run_herald(
    spec_a: &SourceSpec,
    spec_b: &SourceSpec,
    spec_c: &SourceSpec,
    model: &DetectorModel,
    mode: HeraldMode,
) -> Result<HeraldResult> {
    expect_ports(spec_a, "1", "2", "A")?;
    expect_ports(spec_b, "3", "4", "B")?;
    expect_ports(spec_c, "5", "6", "C")?;
    for spec in [spec_a, spec_b, spec_c] {
        spec.validate()?;
    }
    let bins = spec_a.bins().max(spec_b.bins()).max(spec_c.bins());
    let circuit = build_main_circuit_with_bins(bins);

    let mut total = RunSummary::empty();
    let mut sectors = Vec::new();
    for n_a in 0..=spec_a.n_max {
        for n_b in 0..=spec_b.n_max {
            for n_c in 0..=spec_c.n_max {
                let input = sources::spdc_sector(spec_a, n_a)?
                    .tensor(&sources::spdc_sector(spec_b, n_b)?)?
                    .tensor(&sources::spdc_sector(spec_c, n_c)?)?;
                let summary = circuit.run_summary(&input, model, mode)?;
                sectors.push(SectorRow {
                    n_a,
                    n_b,
                    n_c,
                    probability: summary.probability,
                    fidelity: summary.fidelity(Bell::PhiPlus),
                });
                total.merge(&summary);
            }
        }
    }

    let wa = sources::sector_weights(spec_a)?;
    let wb = sources::sector_weights(spec_b)?;
    let wc = sources::sector_weights(spec_c)?;
    let mut truncation_weight = 0.0;
    for (na, &pa) in wa.iter().enumerate() {
        for (nb, &pb) in wb.iter().enumerate() {
            for (nc, &pc) in wc.iter().enumerate() {
                if na as u32 == spec_a.n_max
                    || nb as u32 == spec_b.n_max
                    || nc as u32 == spec_c.n_max
                {
                    truncation_weight += pa * pb * pc;
                }
            }
        }
    }

    Ok(HeraldResult {
        probability: total.probability,
        qubit_weight: total.qubit_weight(),
        dm: total.dm(),
        fidelity: total.fidelity(Bell::PhiPlus),
        sectors,
        truncation_weight,
    })
}

/// Single-superposition herald run (no sector separation); the sector-based
/// [`run_herald`] must agree with this within numerical tolerance.
pub fn run_herald_unsectored(
    spec_a: &SourceSpec,
    spec_b: &SourceSpec,
    spec_c: &SourceSpec,
    model: &DetectorModel,
    mode: HeraldMode,
) -> Result<RunSummary> {
    expect_ports(spec_a, "1", "2", "A")?;
    expect_ports(spec_b, "3", "4", "B")?;
    expect_ports(spec_c, "5", "6", "C")?;
    let bins = spec_a.bins().max(spec_b.bins()).max(spec_c.bins());
    let circuit = build_main_circuit_with_bins(bins);
    let input = sources::spdc_state_distinguishable(spec_a)?
        .tensor(&sources::spdc_state_distinguishable(spec_b)?)?
        .tensor(&sources::spdc_state_distinguishable(spec_c)?)?;
    circuit.run_summary(&input, model, mode)
}

/// Herald run of one sector only; used to probe individual false-herald
/// channels.
pub fn run_herald_sector(
    spec_a: &SourceSpec,
    spec_b: &SourceSpec,
    spec_c: &SourceSpec,
    sector: (u32, u32, u32),
    model: &DetectorModel,
    mode: HeraldMode,
) -> Result<RunSummary> {
    expect_ports(spec_a, "1", "2", "A")?;
    expect_ports(spec_b, "3", "4", "B")?;
    expect_ports(spec_c, "5", "6", "C")?;
    let bins = spec_a.bins().max(spec_b.bins()).max(spec_c.bins());
    let circuit = build_main_circuit_with_bins(bins);
    let input = sources::spdc_sector(spec_a, sector.0)?
        .tensor(&sources::spdc_sector(spec_b, sector.1)?)?
        .tensor(&sources::spdc_sector(spec_c, sector.2)?)?;
    circuit.run_summary(&input, model, mode)
}

/// Runs the tapped-source variant: a single source at cutoff 3 on ports
/// (5,6), routing parameter `routing` (probability of continuing into the
/// CNOT path), heralded pair on ports 7 and 8.
pub fn run_sliwa(
    lambda_c: f64,
    routing: f64,
    model: &DetectorModel,
    mode: HeraldMode,
) -> Result<HeraldResult> {
    let spec = SourceSpec::new("5", "6", lambda_c, 3);
    spec.validate()?;
    let circuit = build_sliwa_circuit(routing)?;
    let mut total = RunSummary::empty();
    let mut sectors = Vec::new();
    for n_c in 0..=spec.n_max {
        let input = sources::spdc_sector(&spec, n_c)?;
        let summary = circuit.run_summary(&input, model, mode)?;
        sectors.push(SectorRow {
            n_a: 0,
            n_b: 0,
            n_c,
            probability: summary.probability,
            fidelity: summary.fidelity(Bell::PhiPlus),
        });
        total.merge(&summary);
    }
    let weights = sources::sector_weights(&spec)?;
    Ok(HeraldResult {
        probability: total.probability,
        qubit_weight: total.qubit_weight(),
        dm: total.dm(),
        fidelity: total.fidelity(Bell::PhiPlus),
        sectors,
        truncation_weight: *weights.last().unwrap_or(&0.0),
    })
}

/// Sector table of a herald result, sorted by (n_a, n_b, n_c).
pub fn sector_breakdown(result: &HeraldResult) -> Vec<SectorRow> {
    let mut rows = result.sectors.clone();
    rows.sort_by_key(|r| (r.n_a, r.n_b, r.n_c));
    rows
}

// ---------------------------------------------------------------------------
// Qubit-level oracle
// ---------------------------------------------------------------------------

/// Four-qubit amplitudes (index q1·8 + q2·4 + q3·2 + q4) after an ideal CNOT
/// (control = qubit 2, target = qubit 4) acts on φ⁺₁₂ ⊗ φ⁺₃₄.
pub fn qubit_oracle_eq1() -> [Complex64; 16] {
    let mut amps = [Complex64::new(0.0, 0.0); 16];
    let half = Complex64::new(0.5, 0.0);
    // φ⁺₁₂ ⊗ φ⁺₃₄: q1 = q2 and q3 = q4
    for (q1, q3) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
        amps[q1 * 8 + q1 * 4 + q3 * 2 + q3] = half;
    }
    // CNOT: control q2, target q4
    let mut out = [Complex64::new(0.0, 0.0); 16];
    for (idx, amp) in amps.into_iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let target = if idx & 0b0100 != 0 { idx ^ 0b0001 } else { idx };
        out[target] += amp;
    }
    out
}

/// Projects the post-gate state on a computational outcome for qubit 4 and
/// a diagonal outcome for qubit 2; returns the joint probability and the
/// normalized amplitudes of qubits (1, 3).
pub fn qubit_oracle_project(q4_one: bool, q2_minus: bool) -> (f64, [Complex64; 4]) {
    let amps = qubit_oracle_eq1();
    let m4 = q4_one as usize;
    let sign = if q2_minus { -1.0 } else { 1.0 };
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for q1 in 0..2 {
        for q3 in 0..2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for q2 in 0..2 {
                let coeff = if q2 == 1 { sign * r } else { r };
                acc += amps[q1 * 8 + q2 * 4 + q3 * 2 + m4] * coeff;
            }
            out[q1 * 2 + q3] = acc;
        }
    }
    let prob: f64 = out.iter().map(|a| a.norm_sqr()).sum();
    if prob > 0.0 {
        let norm = prob.sqrt();
        for a in &mut out {
            *a /= norm;
        }
    }
    (prob, out)
}

/// The herald projection of the overview protocol: qubit 4 read as 0 and
/// qubit 2 read as +. Probability 1/4, output φ⁺ on qubits (1, 3).
pub fn qubit_oracle_swap() -> (f64, [Complex64; 4]) {
    qubit_oracle_project(false, false)
}

// ---------------------------------------------------------------------------
// Gate-level runs
// ---------------------------------------------------------------------------

/// Exact Pauli mode transform on one port (no trigonometric noise).
fn pauli_transform(port: &str, p: Pauli) -> Result<ModeTransform> {
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let modes = vec![
        (port.to_string(), Polarization::H),
        (port.to_string(), Polarization::V),
    ];
    let matrix = match p {
        Pauli::I => vec![o, z, z, o],
        Pauli::X => vec![z, o, o, z],
        Pauli::Z => vec![o, z, z, -o],
    };
    ModeTransform::new(modes.clone(), modes, matrix)
}

fn gate_registry() -> Arc<ChannelRegistry> {
    ChannelRegistry::from_ports(&["2", "4", "5", "6", "d5", "o2", "d6", "o4"])
        .expect("fixed port list is valid")
}

/// Adds the entangled ancilla pair (|HH⟩+|VV⟩)/√2 on ports 5 and 6 of an
/// existing state.
fn with_ancilla(state: &FockState) -> Result<FockState> {
    let hh = state
        .create_at("5", Polarization::H, 0)?
        .create_at("6", Polarization::H, 0)?;
    let vv = state
        .create_at("5", Polarization::V, 0)?
        .create_at("6", Polarization::V, 0)?;
    Ok(hh.add(&vv)?.scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)))
}

/// One accepted gate branch after feed-forward corrections.
#[derive(Clone, Debug)]
pub struct GateBranch {
    /// (d5 read −, d6 read 1)
    pub outcome: (bool, bool),
    pub probability: f64,
    /// Corrected conditioned state on the remaining ports.
    pub state: FockState,
}

/// Runs the bare CNOT gate (detectors d5 and d6 only) on a prepared input
/// over the gate registry, applying the gate feed-forward (Z on o2 for a −
/// at d5, X on o4 for a 1 at d6).
pub fn run_gate_branches(
    input: &FockState,
    model: &DetectorModel,
    mode: HeraldMode,
) -> Result<Vec<GateBranch>> {
    let mut state = input.clone();
    state = state.apply_transform(&elements::pbs_computational("2", "5", "o2", "d5")?)?;
    state = state.apply_transform(&elements::pbs_diagonal("4", "6", "o4", "d6")?)?;
    let outcomes: Vec<(bool, bool)> = match mode {
        HeraldMode::Strict => vec![(false, false)],
        HeraldMode::PauliFrame => vec![(false, false), (false, true), (true, false), (true, true)],
    };
    let mut branches = Vec::new();
    for (d5_second, d6_second) in outcomes {
        let pattern = DetectionPattern::new(vec![
            PatternEntry::new("d5", Basis::Diagonal, Outcome::single(model.kind, d5_second)),
            PatternEntry::new("d6", Basis::Computational, Outcome::single(model.kind, d6_second)),
        ])?;
        let measured = measure(&state, &pattern, model)?;
        for mb in measured.branches {
            let mut corrected = mb.state;
            if d5_second {
                corrected = corrected.apply_transform(&pauli_transform("o2", Pauli::Z)?)?;
            }
            if d6_second {
                corrected = corrected.apply_transform(&pauli_transform("o4", Pauli::X)?)?;
            }
            branches.push(GateBranch {
                outcome: (d5_second, d6_second),
                probability: mb.weight,
                state: corrected,
            });
        }
    }
    Ok(branches)
}

/// One row of the gate truth table.
#[derive(Clone, Debug)]
pub struct GateRow {
    pub control: u8,
    pub target: u8,
    /// Total acceptance probability over the enumerated branches.
    pub success_probability: f64,
    /// The definite computational output (control', target'), present when
    /// every accepted branch collapses onto the same pair.
    pub output: Option<(u8, u8)>,
}

fn pol_of(bit: u8) -> Polarization {
    if bit == 0 {
        Polarization::H
    } else {
        Polarization::V
    }
}

/// Runs the gate on each computational input with the entangled ancilla and
/// reads the corrected outputs from ports (o2, o4).
pub fn gate_truth_table(model: &DetectorModel, mode: HeraldMode) -> Result<Vec<GateRow>> {
    let reg = gate_registry();
    let mut rows = Vec::new();
    for control in 0..2u8 {
        for target in 0..2u8 {
            let input = FockState::vacuum(&reg)
                .create_at("2", pol_of(control), 0)?
                .create_at("4", pol_of(target), 0)?;
            let input = with_ancilla(&input)?;
            let branches = run_gate_branches(&input, model, mode)?;
            let mut success = 0.0;
            let mut output: Option<(u8, u8)> = None;
            let mut consistent = true;
            for branch in &branches {
                if branch.probability <= 1e-14 {
                    continue;
                }
                success += branch.probability;
                let found = read_computational_pair(&branch.state, "o2", "o4")?;
                match (output, found) {
                    (_, None) => consistent = false,
                    (None, Some(pair)) => output = Some(pair),
                    (Some(prev), Some(pair)) if prev != pair => consistent = false,
                    _ => {}
                }
            }
            rows.push(GateRow {
                control,
                target,
                success_probability: success,
                output: if consistent { output } else { None },
            });
        }
    }
    Ok(rows)
}

/// Reads a definite computational pair off two ports, if the state collapses
/// onto a single pattern with unit probability (1e-10).
fn read_computational_pair(state: &FockState, port_a: &str, port_b: &str) -> Result<Option<(u8, u8)>> {
    let reg = state.registry().clone();
    for a in 0..2u8 {
        for b in 0..2u8 {
            let assignments = vec![
                (reg.require(port_a, pol_of(a), 0)?, 1u8),
                (reg.require(port_a, pol_of(1 - a), 0)?, 0u8),
                (reg.require(port_b, pol_of(b), 0)?, 1u8),
                (reg.require(port_b, pol_of(1 - b), 0)?, 0u8),
            ];
            let (p, _) = state.project_counts(&assignments)?;
            if (p - 1.0).abs() < 1e-10 {
                return Ok(Some((a, b)));
            }
        }
    }
    Ok(None)
}

/// One gate branch of the full protocol before the swap measurement, with
/// the four-qubit amplitudes on ports (1, o2, 3, o4).
#[derive(Clone, Debug)]
pub struct Eq1Branch {
    pub outcome: (bool, bool),
    pub probability: f64,
    /// Amplitudes indexed q1·8 + q2·4 + q3·2 + q4 in the logical encoding.
    pub amplitudes: [Complex64; 16],
}

/// Runs sources A and B as ideal Bell pairs through the gate (detectors d5
/// and d6 only) and reports the corrected four-qubit state on ports
/// (1, o2, 3, o4) for each accepted branch. Every branch must reproduce the
/// post-CNOT oracle amplitudes.
pub fn eq1_optical_branches(model: &DetectorModel, mode: HeraldMode) -> Result<Vec<Eq1Branch>> {
    let circuit_reg = ChannelRegistry::from_ports(&main_ports())?;
    let pairs = sources::bell_pair("1", "2")?.tensor(&sources::bell_pair("3", "4")?)?;
    let input = with_ancilla(&pairs.embed(&circuit_reg)?)?;
    let branches = run_gate_branches(&input, model, mode)?;
    let mut out = Vec::new();
    for branch in branches {
        let amplitudes = four_qubit_amplitudes(&branch.state, ["1", "o2", "3", "o4"])?;
        out.push(Eq1Branch {
            outcome: branch.outcome,
            probability: branch.probability,
            amplitudes,
        });
    }
    Ok(out)
}

/// Extracts the 16 logical amplitudes of a state carrying exactly one photon
/// in each of four ports (and none elsewhere).
fn four_qubit_amplitudes(state: &FockState, ports: [&str; 4]) -> Result<[Complex64; 16]> {
    let reg = state.registry().clone();
    let mut port_channels: Vec<(usize, usize)> = Vec::new(); // (H channel, V channel)
    for port in ports {
        port_channels.push((
            reg.require(port, Polarization::H, 0)?,
            reg.require(port, Polarization::V, 0)?,
        ));
    }
    let mut amps = [Complex64::new(0.0, 0.0); 16];
    for (occ, amp) in state.terms() {
        if occ.total() != 4 {
            return Err(SimError::InvalidState(
                "state is not a four-single-photon encoding".into(),
            ));
        }
        let mut idx = 0usize;
        for (q, &(ch_h, ch_v)) in port_channels.iter().enumerate() {
            let (nh, nv) = (occ.get(ch_h), occ.get(ch_v));
            match (nh, nv) {
                (1, 0) => {}
                (0, 1) => idx |= 1 << (3 - q),
                _ => {
                    return Err(SimError::InvalidState(
                        "state is not a four-single-photon encoding".into(),
                    ))
                }
            }
        }
        amps[idx] += amp;
    }
    Ok(amps)
}
