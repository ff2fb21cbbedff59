//! Exact sparse representation of multi-mode bosonic Fock states over
//! polarization-resolved spatial channels.
//!
//! A *channel* is one bosonic mode: a spatial port label, a polarization, and
//! a temporal bin (default 0). States are sparse maps from occupation vectors
//! to complex amplitudes, so a handful of photons over tens of channels stays
//! cheap to store and evolve exactly.
//!
//! Optical elements act through [`crate::elements::ModeTransform`] values by
//! substituting creation operators and re-expanding each basis term; this
//! preserves photon number per element and keeps the evolution unitary to
//! machine precision.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::elements::ModeTransform;
use crate::error::{Result, SimError};

/// Amplitudes with magnitude below this are dropped after each operation.
/// Small enough not to disturb 1e-12-level assertions.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Default bound on the total photon count of a registry's states
/// (three sources at pair cutoff 2).
pub const DEFAULT_MAX_PHOTONS: u32 = 12;

/// Polarization of a channel. `H` encodes logical 0, `V` logical 1.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::H => write!(f, "H"),
            Polarization::V => write!(f, "V"),
        }
    }
}

/// One bosonic mode: spatial port, polarization, temporal bin.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Channel {
    pub port: String,
    pub pol: Polarization,
    pub bin: u8,
}

impl Channel {
    pub fn new(port: impl Into<String>, pol: Polarization, bin: u8) -> Self {
        Channel { port: port.into(), pol, bin }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bin == 0 {
            write!(f, "{}:{}", self.port, self.pol)
        } else {
            write!(f, "{}:{}@{}", self.port, self.pol, self.bin)
        }
    }
}

/// Immutable ordered list of channels. States keep an `Arc` to the registry
/// that defines their occupation-vector layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelRegistry {
    channels: Vec<Channel>,
    lookup: BTreeMap<(String, Polarization, u8), usize>,
    max_photons: u32,
}

impl ChannelRegistry {
    /// Builds a registry from an explicit channel list. Labels must be unique.
    pub fn new(channels: Vec<Channel>, max_photons: u32) -> Result<Arc<Self>> {
        if channels.is_empty() {
            return Err(SimError::InvalidArgument("empty channel registry".into()));
        }
        Self::build(channels, max_photons)
    }

    // Measuring out every channel legitimately leaves an empty registry (the
    // conditioned state is then a scalar), so the internal path skips the
    // non-empty check of the public constructor.
    fn build(channels: Vec<Channel>, max_photons: u32) -> Result<Arc<Self>> {
        let mut lookup = BTreeMap::new();
        for (i, ch) in channels.iter().enumerate() {
            let key = (ch.port.clone(), ch.pol, ch.bin);
            if lookup.insert(key, i).is_some() {
                return Err(SimError::InvalidArgument(format!(
                    "duplicate channel {ch}"
                )));
            }
        }
        Ok(Arc::new(ChannelRegistry { channels, lookup, max_photons }))
    }

    /// H and V channels in temporal bin 0 for each port, in order.
    pub fn from_ports(ports: &[&str]) -> Result<Arc<Self>> {
        Self::from_ports_with_bins(ports, 1)
    }

    /// H and V channels in bins `0..bins` for each port.
    pub fn from_ports_with_bins(ports: &[&str], bins: u8) -> Result<Arc<Self>> {
        if bins == 0 {
            return Err(SimError::InvalidArgument("bins must be >= 1".into()));
        }
        let mut channels = Vec::new();
        for port in ports {
            for bin in 0..bins {
                channels.push(Channel::new(*port, Polarization::H, bin));
                channels.push(Channel::new(*port, Polarization::V, bin));
            }
        }
        Self::new(channels, DEFAULT_MAX_PHOTONS)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn max_photons(&self) -> u32 {
        self.max_photons
    }

    pub fn channel(&self, idx: usize) -> &Channel {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Index of a channel, if present.
    pub fn find(&self, port: &str, pol: Polarization, bin: u8) -> Option<usize> {
        self.lookup.get(&(port.to_string(), pol, bin)).copied()
    }

    /// Index of a channel or an invalid-argument error naming it.
    pub fn require(&self, port: &str, pol: Polarization, bin: u8) -> Result<usize> {
        self.find(port, pol, bin).ok_or_else(|| {
            SimError::InvalidArgument(format!("unknown channel {port}:{pol}@{bin}"))
        })
    }

    pub fn contains_port(&self, port: &str) -> bool {
        self.channels.iter().any(|c| c.port == port)
    }

    /// All channel indices belonging to a port, in registry order.
    pub fn port_channels(&self, port: &str) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.port == port)
            .map(|(i, _)| i)
            .collect()
    }

    /// Distinct port labels in first-appearance order.
    pub fn ports(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in &self.channels {
            if seen.insert(c.port.as_str()) {
                out.push(c.port.as_str());
            }
        }
        out
    }

    /// Temporal bins present for a port.
    pub fn port_bins(&self, port: &str) -> BTreeSet<u8> {
        self.channels
            .iter()
            .filter(|c| c.port == port)
            .map(|c| c.bin)
            .collect()
    }

    /// Concatenation of two registries with disjoint port labels.
    pub fn union(&self, other: &ChannelRegistry) -> Result<Arc<Self>> {
        for p in other.ports() {
            if self.contains_port(p) {
                return Err(SimError::InvalidArgument(format!(
                    "port {p} appears in both registries"
                )));
            }
        }
        let mut channels = self.channels.clone();
        channels.extend(other.channels.iter().cloned());
        Self::new(channels, self.max_photons.max(other.max_photons))
    }

    /// Registry with the given channel indices removed; may end up empty.
    pub fn without(&self, removed: &BTreeSet<usize>) -> Result<Arc<Self>> {
        let channels: Vec<Channel> = self
            .channels
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, c)| c.clone())
            .collect();
        Self::build(channels, self.max_photons)
    }
}

/// Photon count per channel. Length always equals the registry size.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occupation(Vec<u8>);

impl Occupation {
    pub fn new(counts: Vec<u8>) -> Self {
        Occupation(counts)
    }

    pub fn zeros(len: usize) -> Self {
        Occupation(vec![0; len])
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, idx: usize) -> u8 {
        self.0[idx]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&c| c as u32).sum()
    }
}

impl From<Vec<u8>> for Occupation {
    fn from(v: Vec<u8>) -> Self {
        Occupation(v)
    }
}

/// Sparse superposition of occupation vectors with complex amplitudes.
///
/// Terms are held in a `BTreeMap` so iteration (and therefore every
/// accumulated floating-point sum) is deterministic.
#[derive(Clone, Debug)]
pub struct FockState {
    registry: Arc<ChannelRegistry>,
    terms: BTreeMap<Occupation, Complex64>,
    norm_sqr: f64,
}

impl FockState {
    /// The vacuum: single all-zero term with amplitude 1.
    pub fn vacuum(registry: &Arc<ChannelRegistry>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Occupation::zeros(registry.len()), Complex64::new(1.0, 0.0));
        FockState { registry: Arc::clone(registry), terms, norm_sqr: 1.0 }
    }

    /// The zero vector (no terms). Useful as an accumulator.
    pub fn zero(registry: &Arc<ChannelRegistry>) -> Self {
        FockState { registry: Arc::clone(registry), terms: BTreeMap::new(), norm_sqr: 0.0 }
    }

    /// Builds a state from explicit `(occupation, amplitude)` pairs.
    pub fn from_terms(
        registry: &Arc<ChannelRegistry>,
        entries: impl IntoIterator<Item = (Occupation, Complex64)>,
    ) -> Result<Self> {
        let mut terms = BTreeMap::new();
        for (occ, amp) in entries {
            if occ.counts().len() != registry.len() {
                return Err(SimError::InvalidArgument(format!(
                    "occupation length {} does not match registry size {}",
                    occ.counts().len(),
                    registry.len()
                )));
            }
            if occ.total() > registry.max_photons() {
                return Err(SimError::Capacity(format!(
                    "occupation holds {} photons, bound is {}",
                    occ.total(),
                    registry.max_photons()
                )));
            }
            if amp.norm() >= PRUNE_THRESHOLD {
                let slot = terms.entry(occ).or_insert(Complex64::new(0.0, 0.0));
                *slot += amp;
            }
        }
        terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        let norm_sqr = terms.values().map(|a| a.norm_sqr()).sum();
        Ok(FockState { registry: Arc::clone(registry), terms, norm_sqr })
    }

    pub fn registry(&self) -> &Arc<ChannelRegistry> {
        &self.registry
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.norm_sqr
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr.sqrt()
    }

    /// Squared norm within 1e-12 of 1.
    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr - 1.0).abs() <= 1e-12
    }

    /// Amplitude of one occupation vector (zero if absent).
    pub fn amplitude(&self, occ: &Occupation) -> Complex64 {
        self.terms.get(occ).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    fn rebuild(registry: Arc<ChannelRegistry>, terms: BTreeMap<Occupation, Complex64>) -> Self {
        let mut terms = terms;
        terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        let norm_sqr = terms.values().map(|a| a.norm_sqr()).sum();
        FockState { registry, terms, norm_sqr }
    }

    /// Applies the creation operator of one channel: |…n…⟩ ↦ √(n+1)|…n+1…⟩.
    pub fn create(&self, channel: usize) -> Result<FockState> {
        if channel >= self.registry.len() {
            return Err(SimError::InvalidArgument(format!(
                "channel index {channel} out of range"
            )));
        }
        let bound = self.registry.max_photons();
        let mut terms = BTreeMap::new();
        for (occ, amp) in &self.terms {
            if occ.total() + 1 > bound {
                return Err(SimError::Capacity(format!(
                    "creation would exceed the photon bound {bound}"
                )));
            }
            let mut counts = occ.counts().to_vec();
            let n = counts[channel];
            counts[channel] = n + 1;
            let factor = ((n as f64) + 1.0).sqrt();
            let slot = terms
                .entry(Occupation::new(counts))
                .or_insert(Complex64::new(0.0, 0.0));
            *slot += amp * factor;
        }
        Ok(Self::rebuild(Arc::clone(&self.registry), terms))
    }

    /// Creation operator addressed by channel key.
    pub fn create_at(&self, port: &str, pol: Polarization, bin: u8) -> Result<FockState> {
        let idx = self.registry.require(port, pol, bin)?;
        self.create(idx)
    }

    /// Product state on the concatenated registries (disjoint port labels).
    pub fn tensor(&self, other: &FockState) -> Result<FockState> {
        let registry = self.registry.union(&other.registry)?;
        let bound = registry.max_photons();
        let mut terms = BTreeMap::new();
        for (occ_a, amp_a) in &self.terms {
            for (occ_b, amp_b) in &other.terms {
                if occ_a.total() + occ_b.total() > bound {
                    return Err(SimError::Capacity(format!(
                        "tensor product exceeds the photon bound {bound}"
                    )));
                }
                let mut counts = occ_a.counts().to_vec();
                counts.extend_from_slice(occ_b.counts());
                terms.insert(Occupation::new(counts), amp_a * amp_b);
            }
        }
        Ok(Self::rebuild(registry, terms))
    }

    /// ⟨self|other⟩, conjugating this state's amplitudes.
    pub fn inner(&self, other: &FockState) -> Result<Complex64> {
        if self.registry != other.registry {
            return Err(SimError::InvalidArgument(
                "inner product requires matching registries".into(),
            ));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (occ, amp) in &self.terms {
            if let Some(b) = other.terms.get(occ) {
                acc += amp.conj() * b;
            }
        }
        Ok(acc)
    }

    /// Scales every amplitude by `factor`.
    pub fn scaled(&self, factor: Complex64) -> FockState {
        let terms = self
            .terms
            .iter()
            .map(|(occ, amp)| (occ.clone(), amp * factor))
            .collect();
        Self::rebuild(Arc::clone(&self.registry), terms)
    }

    /// Term-wise sum of two states on the same registry.
    pub fn add(&self, other: &FockState) -> Result<FockState> {
        if self.registry != other.registry {
            return Err(SimError::InvalidArgument(
                "sum requires matching registries".into(),
            ));
        }
        let mut terms = self.terms.clone();
        for (occ, amp) in &other.terms {
            let slot = terms.entry(occ.clone()).or_insert(Complex64::new(0.0, 0.0));
            *slot += amp;
        }
        Ok(Self::rebuild(Arc::clone(&self.registry), terms))
    }

    /// Rescales to unit norm. The zero state is returned unchanged.
    pub fn normalized(&self) -> FockState {
        if self.norm_sqr <= 0.0 {
            return self.clone();
        }
        self.scaled(Complex64::new(1.0 / self.norm(), 0.0))
    }

    /// Re-expresses the state on a larger registry that contains every
    /// channel of the current one; new channels start empty.
    pub fn embed(&self, target: &Arc<ChannelRegistry>) -> Result<FockState> {
        let mut map = Vec::with_capacity(self.registry.len());
        for ch in self.registry.channels() {
            let idx = target.require(&ch.port, ch.pol, ch.bin)?;
            map.push(idx);
        }
        let mut terms = BTreeMap::new();
        for (occ, amp) in &self.terms {
            let mut counts = vec![0u8; target.len()];
            for (i, &c) in occ.counts().iter().enumerate() {
                counts[map[i]] = c;
            }
            terms.insert(Occupation::new(counts), *amp);
        }
        Ok(Self::rebuild(Arc::clone(target), terms))
    }

    /// Rewrites the state under a mode transform by substituting creation
    /// operators and re-expanding. The transform acts identically on every
    /// temporal bin of its ports.
    pub fn apply_transform(&self, t: &ModeTransform) -> Result<FockState> {
        t.check_unitary()?;
        // Bins shared by every port the transform touches.
        let mut bins: Option<BTreeSet<u8>> = None;
        for key in t.input_modes().iter().chain(t.output_modes()) {
            let port_bins = self.registry.port_bins(&key.0);
            if port_bins.is_empty() {
                return Err(SimError::InvalidArgument(format!(
                    "transform references unknown port {}",
                    key.0
                )));
            }
            match &bins {
                None => bins = Some(port_bins),
                Some(b) if *b == port_bins => {}
                Some(_) => {
                    return Err(SimError::InvalidArgument(format!(
                        "port {} has a different bin set than the rest of the transform",
                        key.0
                    )))
                }
            }
        }
        let bins = bins.expect("transform has at least one mode");
        let mut state = self.clone();
        for &bin in &bins {
            let mut in_idx = Vec::with_capacity(t.input_modes().len());
            for key in t.input_modes() {
                in_idx.push(self.registry.require(&key.0, key.1, bin)?);
            }
            let mut out_idx = Vec::with_capacity(t.output_modes().len());
            for key in t.output_modes() {
                out_idx.push(self.registry.require(&key.0, key.1, bin)?);
            }
            state = state.apply_channel_matrix(&in_idx, &out_idx, t.matrix());
        }
        Ok(state)
    }

    /// Substitutes `a†_in[i] → Σ_j U[j][i] b†_out[j]` in every term and
    /// re-expands. `matrix` is row-major with `out_idx.len()` rows.
    fn apply_channel_matrix(
        &self,
        in_idx: &[usize],
        out_idx: &[usize],
        matrix: &[Complex64],
    ) -> FockState {
        let n = in_idx.len();
        let mut terms: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (occ, amp) in &self.terms {
            let photons: Vec<u8> = in_idx.iter().map(|&i| occ.get(i)).collect();
            let total: u32 = photons.iter().map(|&c| c as u32).sum();
            if total == 0 {
                let slot = terms.entry(occ.clone()).or_insert(Complex64::new(0.0, 0.0));
                *slot += amp;
                continue;
            }
            let mut base = occ.counts().to_vec();
            for &i in in_idx {
                base[i] = 0;
            }
            // Expand ∏_i (Σ_j U[j][i] b_j†)^{n_i} as a polynomial over the
            // output modes: monomial exponents → coefficient.
            let mut poly: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
            poly.insert(vec![0u8; n], Complex64::new(1.0, 0.0));
            for (col, &ni) in photons.iter().enumerate() {
                for _ in 0..ni {
                    let mut next: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
                    for (mono, coeff) in &poly {
                        for row in 0..n {
                            let u = matrix[row * n + col];
                            if u.norm_sqr() == 0.0 {
                                continue;
                            }
                            let mut m2 = mono.clone();
                            m2[row] += 1;
                            let slot =
                                next.entry(m2).or_insert(Complex64::new(0.0, 0.0));
                            *slot += coeff * u;
                        }
                    }
                    poly = next;
                }
            }
            // |occ⟩ carried 1/√(∏ n_i!); each monomial re-creates photons on
            // the output channels, picking up √((k+m)!/k!) per channel.
            let mut denom = 1.0f64;
            for &ni in &photons {
                denom *= factorial(ni as u32);
            }
            let denom = denom.sqrt();
            for (mono, coeff) in poly {
                let mut counts = base.clone();
                let mut rise = 1.0f64;
                for (row, &m) in mono.iter().enumerate() {
                    if m == 0 {
                        continue;
                    }
                    let k = counts[out_idx[row]] as u32;
                    counts[out_idx[row]] = (k + m as u32) as u8;
                    for j in (k + 1)..=(k + m as u32) {
                        rise *= j as f64;
                    }
                }
                let contribution = amp * coeff * rise.sqrt() / denom;
                let slot = terms
                    .entry(Occupation::new(counts))
                    .or_insert(Complex64::new(0.0, 0.0));
                *slot += contribution;
            }
        }
        Self::rebuild(Arc::clone(&self.registry), terms)
    }

    /// Projects onto exact photon counts for specific channels.
    ///
    /// Returns the outcome probability (relative to the input's squared
    /// norm) and the conditioned state with the measured channels removed
    /// from the registry and the rest renormalized. Probability 0 yields an
    /// empty conditioned state.
    pub fn project_counts(&self, assignments: &[(usize, u8)]) -> Result<(f64, FockState)> {
        let mut removed = BTreeSet::new();
        for &(idx, _) in assignments {
            if idx >= self.registry.len() {
                return Err(SimError::InvalidArgument(format!(
                    "channel index {idx} out of range"
                )));
            }
            if !removed.insert(idx) {
                return Err(SimError::InvalidArgument(format!(
                    "channel index {idx} assigned twice"
                )));
            }
        }
        let reduced = self.registry.without(&removed)?;
        let mut matched: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        let mut matched_sqr = 0.0;
        for (occ, amp) in &self.terms {
            if assignments.iter().all(|&(idx, c)| occ.get(idx) == c) {
                matched_sqr += amp.norm_sqr();
                let counts: Vec<u8> = occ
                    .counts()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !removed.contains(i))
                    .map(|(_, &c)| c)
                    .collect();
                matched.insert(Occupation::new(counts), *amp);
            }
        }
        if self.norm_sqr <= 0.0 || matched_sqr <= 0.0 {
            return Ok((0.0, FockState::zero(&reduced)));
        }
        let probability = matched_sqr / self.norm_sqr;
        let conditioned = Self::rebuild(reduced, matched).normalized();
        Ok((probability, conditioned))
    }

    /// Restriction to the subspace with exactly one photon in each of two
    /// ports, reduced to a polarization density matrix (bins traced out).
    ///
    /// Every other port must already be measured out or empty; a leftover
    /// photon elsewhere is an invalid-state error. `qubit_weight` is the
    /// fraction of the squared norm inside the one-photon-per-port subspace;
    /// components outside it are excluded from the density matrix.
    pub fn reduce_two_qubit(&self, port_a: &str, port_b: &str) -> Result<QubitReduction> {
        if !self.registry.contains_port(port_a) || !self.registry.contains_port(port_b) {
            return Err(SimError::InvalidArgument(format!(
                "ports {port_a}/{port_b} not both present in the registry"
            )));
        }
        if port_a == port_b {
            return Err(SimError::InvalidArgument("ports must be distinct".into()));
        }
        let a_idx = self.registry.port_channels(port_a);
        let b_idx = self.registry.port_channels(port_b);
        let outside: Vec<usize> = (0..self.registry.len())
            .filter(|i| !a_idx.contains(i) && !b_idx.contains(i))
            .collect();
        for occ in self.terms.keys() {
            for &i in &outside {
                if occ.get(i) > 0 {
                    return Err(SimError::InvalidState(format!(
                        "unmeasured photons remain in channel {}",
                        self.registry.channel(i)
                    )));
                }
            }
        }
        if self.norm_sqr <= 0.0 {
            return Ok(QubitReduction { qubit_weight: 0.0, dm: None });
        }
        // Group one-photon-per-port amplitudes by the (bin_a, bin_b) pair and
        // sum vv† over the groups: this traces out the bin labels.
        let mut groups: BTreeMap<(u8, u8), [Complex64; 4]> = BTreeMap::new();
        let mut weight_sqr = 0.0;
        for (occ, amp) in &self.terms {
            let occupied = |indices: &[usize]| -> Option<usize> {
                let mut found = None;
                let mut total = 0u32;
                for &i in indices {
                    let c = occ.get(i) as u32;
                    total += c;
                    if c == 1 {
                        found = Some(i);
                    }
                }
                if total == 1 {
                    found
                } else {
                    None
                }
            };
            let (ca, cb) = match (occupied(&a_idx), occupied(&b_idx)) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            weight_sqr += amp.norm_sqr();
            let cha = self.registry.channel(ca);
            let chb = self.registry.channel(cb);
            let qa = if cha.pol == Polarization::V { 1 } else { 0 };
            let qb = if chb.pol == Polarization::V { 1 } else { 0 };
            let vec = groups.entry((cha.bin, chb.bin)).or_insert([Complex64::new(0.0, 0.0); 4]);
            vec[qa * 2 + qb] += amp;
        }
        let qubit_weight = weight_sqr / self.norm_sqr;
        if weight_sqr <= 0.0 {
            return Ok(QubitReduction { qubit_weight: 0.0, dm: None });
        }
        let mut dm = TwoQubitDM::zero();
        for vec in groups.values() {
            dm.add_outer(vec, 1.0 / weight_sqr);
        }
        Ok(QubitReduction { qubit_weight, dm: Some(dm) })
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Result of [`FockState::reduce_two_qubit`].
#[derive(Clone, Debug)]
pub struct QubitReduction {
    /// Fraction of the squared norm with exactly one photon in each port.
    pub qubit_weight: f64,
    /// Normalized density matrix of that component; `None` when the weight
    /// vanishes.
    pub dm: Option<TwoQubitDM>,
}

/// The four Bell states of two polarization qubits.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Bell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl Bell {
    /// Amplitudes in the computational basis {00, 01, 10, 11}.
    pub fn amplitudes(self) -> [Complex64; 4] {
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        match self {
            Bell::PhiPlus => [r, z, z, r],
            Bell::PhiMinus => [r, z, z, -r],
            Bell::PsiPlus => [z, r, r, z],
            Bell::PsiMinus => [z, r, -r, z],
        }
    }
}

/// Single-qubit Pauli correction applied in feed-forward.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Z,
}

impl Pauli {
    fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        match self {
            Pauli::I => [[o, z], [z, o]],
            Pauli::X => [[z, o], [o, z]],
            Pauli::Z => [[o, z], [z, -o]],
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pauli::I => write!(f, "I"),
            Pauli::X => write!(f, "X"),
            Pauli::Z => write!(f, "Z"),
        }
    }
}

/// 4×4 density matrix of two polarization qubits in the basis
/// {00, 01, 10, 11} with H ↦ 0 and V ↦ 1.
#[derive(Clone, Debug)]
pub struct TwoQubitDM {
    m: [[Complex64; 4]; 4],
}

impl TwoQubitDM {
    pub fn zero() -> Self {
        TwoQubitDM { m: [[Complex64::new(0.0, 0.0); 4]; 4] }
    }

    /// |ψ⟩⟨ψ| for a (normalized) pure amplitude vector.
    pub fn from_pure(amplitudes: &[Complex64; 4]) -> Self {
        let mut dm = Self::zero();
        dm.add_outer(amplitudes, 1.0);
        dm
    }

    /// Wraps a raw matrix (the caller vouches for Hermiticity).
    pub fn from_matrix(m: [[Complex64; 4]; 4]) -> Self {
        TwoQubitDM { m }
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.m[i][j]
    }

    /// Adds `w · vv†`.
    pub fn add_outer(&mut self, v: &[Complex64; 4], w: f64) {
        for i in 0..4 {
            for j in 0..4 {
                self.m[i][j] += v[i] * v[j].conj() * w;
            }
        }
    }

    /// Adds `w · other`.
    pub fn add_scaled(&mut self, other: &TwoQubitDM, w: f64) {
        for i in 0..4 {
            for j in 0..4 {
                self.m[i][j] += other.m[i][j] * w;
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.m[i][i].re).sum()
    }

    /// Rescaled to unit trace (unchanged if the trace vanishes).
    pub fn normalized(&self) -> Self {
        let t = self.trace();
        if t <= 0.0 {
            return self.clone();
        }
        let mut out = self.clone();
        for i in 0..4 {
            for j in 0..4 {
                out.m[i][j] /= t;
            }
        }
        out
    }

    /// ⟨Bell|ρ|Bell⟩.
    pub fn fidelity_to_bell(&self, which: Bell) -> f64 {
        let b = which.amplitudes();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                acc += b[i].conj() * self.m[i][j] * b[j];
            }
        }
        acc.re
    }

    /// Conjugates by a local Pauli pair: (P⊗Q) ρ (P⊗Q)†.
    pub fn apply_local(&self, first: Pauli, second: Pauli) -> Self {
        let p = first.matrix();
        let q = second.matrix();
        let mut u = [[Complex64::new(0.0, 0.0); 4]; 4];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        u[a * 2 + b][c * 2 + d] = p[a][c] * q[b][d];
                    }
                }
            }
        }
        let mut tmp = [[Complex64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    tmp[i][j] += u[i][k] * self.m[k][j];
                }
            }
        }
        let mut out = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    out.m[i][j] += tmp[i][k] * u[j][k].conj();
                }
            }
        }
        out
    }

    /// Largest absolute deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let d = (self.m[i][j] - self.m[j][i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Eigenvalues via cyclic complex Jacobi sweeps (ascending order).
    pub fn eigenvalues(&self) -> [f64; 4] {
        let mut a = self.m;
        for _ in 0..64 {
            let mut off = 0.0f64;
            for p in 0..4 {
                for q in (p + 1)..4 {
                    off += a[p][q].norm_sqr();
                }
            }
            if off < 1e-28 {
                break;
            }
            for p in 0..4 {
                for q in (p + 1)..4 {
                    let apq = a[p][q];
                    let r = apq.norm();
                    if r < 1e-300 {
                        continue;
                    }
                    let phase = apq / r;
                    let tau = (a[q][q].re - a[p][p].re) / (2.0 * r);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Columns: col_p' = c·col_p + s·conj(phase)·col_q,
                    //          col_q' = −s·phase·col_p + c·col_q.
                    for i in 0..4 {
                        let aip = a[i][p];
                        let aiq = a[i][q];
                        a[i][p] = aip * c + aiq * s * phase.conj();
                        a[i][q] = -aip * s * phase + aiq * c;
                    }
                    for j in 0..4 {
                        let apj = a[p][j];
                        let aqj = a[q][j];
                        a[p][j] = apj * c + aqj * s * phase;
                        a[q][j] = -apj * s * phase.conj() + aqj * c;
                    }
                }
            }
        }
        let mut ev = [a[0][0].re, a[1][1].re, a[2][2].re, a[3][3].re];
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    /// Checks the Hermiticity / trace / positivity invariants.
    pub fn validate(&self) -> Result<()> {
        if self.hermiticity_error() > 1e-12 {
            return Err(SimError::InvalidState("density matrix not Hermitian".into()));
        }
        if (self.trace() - 1.0).abs() > 1e-12 {
            return Err(SimError::InvalidState("density matrix trace differs from 1".into()));
        }
        if self.eigenvalues()[0] < -1e-10 {
            return Err(SimError::InvalidState("density matrix not positive".into()));
        }
        Ok(())
    }
}
