//! Detector models and the post-selection engine.
//!
//! A detector sits on one port and counts photons in a chosen polarization
//! basis. Detectors are bin-blind: required counts apply to the total over
//! temporal bins of a port/polarization channel pair. Diagonal-basis
//! requirements are realized by a polarization Hadamard followed by
//! computational-basis counting.
//!
//! Inefficiency (η < 1) routes photons through a beamsplitter of
//! transmissivity η into a per-port loss channel whose occupation is summed
//! over. Because loss and bin outcomes are unread, the conditioned output is
//! reported as an ensemble of branch states rather than a single pure state;
//! for ideal detectors on single-bin registries the ensemble has one member.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::elements;
use crate::error::{Result, SimError};
use crate::fock::{Channel, ChannelRegistry, FockState, Occupation, Pauli, Polarization};

const LOSS_PREFIX: &str = "~loss:";

/// Photon-counting behaviour of a detector.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DetectorKind {
    /// Photon-number-resolving: reports exact counts.
    Pnr,
    /// Bucket: reports only click (≥ 1) or no click.
    Bucket,
}

/// Detector model: counting behaviour plus efficiency.
#[derive(Copy, Clone, Debug)]
pub struct DetectorModel {
    pub kind: DetectorKind,
    pub efficiency: f64,
}

impl DetectorModel {
    /// Ideal photon-number-resolving detector (η = 1).
    pub fn ideal() -> Self {
        DetectorModel { kind: DetectorKind::Pnr, efficiency: 1.0 }
    }

    pub fn new(kind: DetectorKind, efficiency: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(SimError::InvalidArgument(format!(
                "efficiency {efficiency} outside [0, 1]"
            )));
        }
        Ok(DetectorModel { kind, efficiency })
    }
}

/// Measurement basis of one detector.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Basis {
    Computational,
    Diagonal,
}

/// Required outcome at one detector port, per basis state (H/V or +/−).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Exact photon counts (PNR).
    Exact(u8, u8),
    /// Click / no-click flags (bucket); click means at least one photon.
    Click(bool, bool),
}

impl Outcome {
    fn matches(&self, first: u32, second: u32) -> bool {
        match *self {
            Outcome::Exact(a, b) => first == a as u32 && second == b as u32,
            Outcome::Click(a, b) => {
                (if a { first >= 1 } else { first == 0 })
                    && (if b { second >= 1 } else { second == 0 })
            }
        }
    }

    /// Single photon in the first or second basis state, per detector kind.
    pub fn single(kind: DetectorKind, second_state: bool) -> Outcome {
        match (kind, second_state) {
            (DetectorKind::Pnr, false) => Outcome::Exact(1, 0),
            (DetectorKind::Pnr, true) => Outcome::Exact(0, 1),
            (DetectorKind::Bucket, false) => Outcome::Click(true, false),
            (DetectorKind::Bucket, true) => Outcome::Click(false, true),
        }
    }
}

/// One detector: port, basis, required outcome.
#[derive(Clone, Debug)]
pub struct PatternEntry {
    pub port: String,
    pub basis: Basis,
    pub outcome: Outcome,
}

impl PatternEntry {
    pub fn new(port: impl Into<String>, basis: Basis, outcome: Outcome) -> Self {
        PatternEntry { port: port.into(), basis, outcome }
    }
}

/// A joint detection requirement over several ports.
#[derive(Clone, Debug)]
pub struct DetectionPattern {
    pub entries: Vec<PatternEntry>,
}

impl DetectionPattern {
    pub fn new(entries: Vec<PatternEntry>) -> Result<Self> {
        for i in 0..entries.len() {
            for j in (i + 1)..entries.len() {
                if entries[i].port == entries[j].port {
                    return Err(SimError::InvalidArgument(format!(
                        "port {} listed twice in detection pattern",
                        entries[i].port
                    )));
                }
            }
        }
        Ok(DetectionPattern { entries })
    }
}

/// One member of the conditioned ensemble after a measurement.
#[derive(Clone, Debug)]
pub struct MeasureBranch {
    /// Joint probability of the acceptance and this unread microstate.
    pub weight: f64,
    /// Normalized conditioned state with the measured ports removed.
    pub state: FockState,
}

/// Result of conditioning on a detection pattern.
#[derive(Clone, Debug)]
pub struct MeasureOutcome {
    /// Total acceptance probability.
    pub probability: f64,
    /// Ensemble decomposition over unread loss/bin microstates.
    pub branches: Vec<MeasureBranch>,
}

/// Conditions a state on a detection pattern under a detector model.
pub fn measure(
    state: &FockState,
    pattern: &DetectionPattern,
    model: &DetectorModel,
) -> Result<MeasureOutcome> {
    measure_impl(state, pattern, model, false)
}

pub(crate) fn measure_impl(
    state: &FockState,
    pattern: &DetectionPattern,
    model: &DetectorModel,
    force_loss: bool,
) -> Result<MeasureOutcome> {
    if !(0.0..=1.0).contains(&model.efficiency) {
        return Err(SimError::InvalidArgument(format!(
            "efficiency {} outside [0, 1]",
            model.efficiency
        )));
    }
    let registry = state.registry();
    for entry in &pattern.entries {
        if !registry.contains_port(&entry.port) {
            return Err(SimError::InvalidState(format!(
                "port {} is not present (already measured?)",
                entry.port
            )));
        }
    }

    // Basis rotation: diagonal requirements become computational counts.
    let mut working = state.clone();
    for entry in &pattern.entries {
        if entry.basis == Basis::Diagonal {
            working = working.apply_transform(&elements::hadamard(&entry.port)?)?;
        }
    }

    // Inefficiency: tap each measured port into a dedicated loss port.
    let lossy = force_loss || model.efficiency < 1.0;
    if lossy {
        let mut channels: Vec<Channel> = working.registry().channels().to_vec();
        for entry in &pattern.entries {
            let loss_port = format!("{LOSS_PREFIX}{}", entry.port);
            if working.registry().contains_port(&loss_port) {
                return Err(SimError::InvalidArgument(format!(
                    "reserved port name {loss_port} already in use"
                )));
            }
            for bin in working.registry().port_bins(&entry.port) {
                channels.push(Channel::new(loss_port.clone(), Polarization::H, bin));
                channels.push(Channel::new(loss_port.clone(), Polarization::V, bin));
            }
        }
        let extended = ChannelRegistry::new(channels, working.registry().max_photons())?;
        working = working.embed(&extended)?;
        for entry in &pattern.entries {
            let loss_port = format!("{LOSS_PREFIX}{}", entry.port);
            let tap = elements::beamsplitter(&entry.port, &loss_port, model.efficiency)?;
            working = working.apply_transform(&tap)?;
        }
    }

    // Channels consumed by this measurement: all channels of the measured
    // ports plus their loss ports.
    let reg = working.registry().clone();
    let mut consumed: Vec<usize> = Vec::new();
    let mut port_channels: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for (i, entry) in pattern.entries.iter().enumerate() {
        let first: Vec<usize> = reg
            .port_channels(&entry.port)
            .into_iter()
            .filter(|&c| reg.channel(c).pol == Polarization::H)
            .collect();
        let second: Vec<usize> = reg
            .port_channels(&entry.port)
            .into_iter()
            .filter(|&c| reg.channel(c).pol == Polarization::V)
            .collect();
        consumed.extend(first.iter().chain(second.iter()));
        if lossy {
            consumed.extend(reg.port_channels(&format!("{LOSS_PREFIX}{}", entry.port)));
        }
        port_channels.push((i, first, second));
    }
    consumed.sort_unstable();
    let consumed_set: std::collections::BTreeSet<usize> = consumed.iter().copied().collect();
    let reduced = reg.without(&consumed_set)?;

    // Group terms by the consumed-channel microstate; accept groups whose
    // bin-blind counts satisfy every entry.
    let mut groups: BTreeMap<Vec<u8>, (f64, BTreeMap<Occupation, Complex64>)> = BTreeMap::new();
    for (occ, amp) in working.terms() {
        let key: Vec<u8> = consumed.iter().map(|&c| occ.get(c)).collect();
        let accepted = port_channels.iter().all(|(i, first, second)| {
            let n1: u32 = first.iter().map(|&c| occ.get(c) as u32).sum();
            let n2: u32 = second.iter().map(|&c| occ.get(c) as u32).sum();
            pattern.entries[*i].outcome.matches(n1, n2)
        });
        if !accepted {
            continue;
        }
        let entry = groups.entry(key).or_insert_with(|| (0.0, BTreeMap::new()));
        entry.0 += amp.norm_sqr();
        let counts: Vec<u8> = occ
            .counts()
            .iter()
            .enumerate()
            .filter(|(i, _)| !consumed_set.contains(i))
            .map(|(_, &c)| c)
            .collect();
        entry.1.insert(Occupation::new(counts), *amp);
    }

    let input_sqr = working.norm_sqr();
    let mut probability = 0.0;
    let mut branches = Vec::new();
    for (_, (weight_sqr, terms)) in groups {
        if weight_sqr <= 0.0 || input_sqr <= 0.0 {
            continue;
        }
        let weight = weight_sqr / input_sqr;
        probability += weight;
        let branch_state = FockState::from_terms(&reduced, terms)?.normalized();
        branches.push(MeasureBranch { weight, state: branch_state });
    }
    Ok(MeasureOutcome { probability, branches })
}

/// Which basis state fired at each of the four herald detectors.
/// `false` is the first basis state (+ for diagonal, H for computational).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct HeraldOutcome {
    pub d5_second: bool,
    pub d6_second: bool,
    pub out2_second: bool,
    pub out4_second: bool,
}

impl HeraldOutcome {
    /// The strict pattern: every detector sees its first basis state.
    pub fn strict() -> Self {
        HeraldOutcome {
            d5_second: false,
            d6_second: false,
            out2_second: false,
            out4_second: false,
        }
    }

    /// All 16 outcomes in a fixed order.
    pub fn all() -> Vec<HeraldOutcome> {
        let mut out = Vec::with_capacity(16);
        for bits in 0..16u8 {
            out.push(HeraldOutcome {
                d5_second: bits & 8 != 0,
                d6_second: bits & 4 != 0,
                out2_second: bits & 2 != 0,
                out4_second: bits & 1 != 0,
            });
        }
        out
    }

    /// Pauli pair restoring φ⁺ on the surviving modes: a Z on the first
    /// qubit when the effective diagonal outcome is −, an X on the second
    /// when the effective computational outcome is 1. The gate detector
    /// outcomes fold in as feed-forward reinterpretations of the output
    /// detectors.
    pub fn correction(&self) -> (Pauli, Pauli) {
        let z = self.out2_second ^ self.d5_second;
        let x = self.out4_second ^ self.d6_second;
        (
            if z { Pauli::Z } else { Pauli::I },
            if x { Pauli::X } else { Pauli::I },
        )
    }

    pub fn id(&self) -> String {
        format!(
            "d5={},d6={},o2={},o4={}",
            if self.d5_second { "-" } else { "+" },
            if self.d6_second { "1" } else { "0" },
            if self.out2_second { "-" } else { "+" },
            if self.out4_second { "1" } else { "0" },
        )
    }
}

/// Herald acceptance mode.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum HeraldMode {
    /// Only the identity-correction pattern (d5 = +, d6 = 0, o2 = +, o4 = 0).
    Strict,
    /// All 16 single-photon outcomes, each with its Pauli correction.
    PauliFrame,
}

/// One accepted herald branch.
#[derive(Clone, Debug)]
pub struct HeraldBranch {
    pub outcome: HeraldOutcome,
    /// Acceptance probability of this outcome (relative to the input norm).
    pub probability: f64,
    /// Conditioned ensemble (single member for ideal detectors and one bin).
    pub states: Vec<MeasureBranch>,
    /// Pauli correction for the surviving pair (first port, second port).
    pub correction: (Pauli, Pauli),
}

/// Enumerates accepted herald branches for the four-detector pattern.
///
/// `gate_pattern` holds the two gate detectors (diagonal then computational);
/// `output_pattern` the two output detectors (diagonal then computational).
/// Outcome fields of the supplied patterns are ignored; they are fixed by
/// the mode: strict uses the single first-basis-state pattern, pauli-frame
/// enumerates all 16 single-photon outcomes.
pub fn herald_accept(
    state: &FockState,
    gate_pattern: &DetectionPattern,
    output_pattern: &DetectionPattern,
    mode: HeraldMode,
    model: &DetectorModel,
) -> Result<Vec<HeraldBranch>> {
    if gate_pattern.entries.len() != 2 || output_pattern.entries.len() != 2 {
        return Err(SimError::InvalidArgument(
            "herald patterns must each cover two detector ports".into(),
        ));
    }
    let outcomes = match mode {
        HeraldMode::Strict => vec![HeraldOutcome::strict()],
        HeraldMode::PauliFrame => HeraldOutcome::all(),
    };
    let mut result = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let seconds = [
            outcome.d5_second,
            outcome.d6_second,
            outcome.out2_second,
            outcome.out4_second,
        ];
        let mut entries = Vec::with_capacity(4);
        for (i, entry) in gate_pattern
            .entries
            .iter()
            .chain(output_pattern.entries.iter())
            .enumerate()
        {
            entries.push(PatternEntry::new(
                entry.port.clone(),
                entry.basis,
                Outcome::single(model.kind, seconds[i]),
            ));
        }
        let pattern = DetectionPattern::new(entries)?;
        let measured = measure(state, &pattern, model)?;
        result.push(HeraldBranch {
            outcome,
            probability: measured.probability,
            states: measured.branches,
            correction: outcome.correction(),
        });
    }
    Ok(result)
}
