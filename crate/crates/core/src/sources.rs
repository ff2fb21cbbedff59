//! Photon-pair sources: ideal Bell pairs and truncated multi-pair
//! down-conversion states, with an optional pairwise distinguishability
//! model.
//!
//! A down-conversion source with interaction strength λ emits into two ports
//! the expansion Σₙ (λⁿ/n!)(a_H†b_H† + a_V†b_V†)ⁿ|0⟩, truncated at a pair
//! cutoff and renormalized within the kept sectors. The n-pair sector has
//! relative amplitude λⁿ√(n+1); its normalized form is
//! (1/√(n+1)) Σₖ |k_H (n−k)_V⟩|k_H (n−k)_V⟩.
//!
//! The distinguishability extension keeps the first pair in temporal bin 0
//! and emits each subsequent pair into v·(bin 0) + √(1−v²)·(own bin), both
//! photons of a pair jointly. This degrades only inter-pair interference;
//! v = 1 reproduces the ideal source exactly.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fock::{ChannelRegistry, FockState, Polarization};

/// Parameters of one down-conversion source.
#[derive(Clone, Debug)]
pub struct SourceSpec {
    pub port_x: String,
    pub port_y: String,
    /// Dimensionless interaction strength λ ≥ 0.
    pub lambda: f64,
    /// Pair-number cutoff (≥ 1).
    pub n_max: u32,
    /// Pairwise overlap v ∈ [0, 1]; 1 means fully indistinguishable.
    pub overlap: f64,
}

impl SourceSpec {
    pub fn new(port_x: impl Into<String>, port_y: impl Into<String>, lambda: f64, n_max: u32) -> Self {
        SourceSpec {
            port_x: port_x.into(),
            port_y: port_y.into(),
            lambda,
            n_max,
            overlap: 1.0,
        }
    }

    pub fn with_overlap(mut self, v: f64) -> Self {
        self.overlap = v;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.port_x == self.port_y {
            return Err(SimError::InvalidArgument("source ports must differ".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SimError::InvalidArgument(format!(
                "lambda {} must be a finite non-negative number",
                self.lambda
            )));
        }
        if self.n_max < 1 {
            return Err(SimError::InvalidArgument("n_max must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(SimError::InvalidArgument(format!(
                "overlap {} outside [0, 1]",
                self.overlap
            )));
        }
        Ok(())
    }

    /// Temporal bins the emitted state occupies.
    pub fn bins(&self) -> u8 {
        if self.overlap < 1.0 {
            self.n_max as u8
        } else {
            1
        }
    }
}

/// (|1_H⟩|1_H⟩ + |1_V⟩|1_V⟩)/√2 on two fresh ports.
pub fn bell_pair(port_x: &str, port_y: &str) -> Result<FockState> {
    if port_x == port_y {
        return Err(SimError::InvalidArgument("bell pair ports must differ".into()));
    }
    let reg = ChannelRegistry::from_ports(&[port_x, port_y])?;
    let vac = FockState::vacuum(&reg);
    let hh = vac
        .create_at(port_x, Polarization::H, 0)?
        .create_at(port_y, Polarization::H, 0)?;
    let vv = vac
        .create_at(port_x, Polarization::V, 0)?
        .create_at(port_y, Polarization::V, 0)?;
    Ok(hh.add(&vv)?.scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)))
}

/// Applies the pair-creation operator a_H†b_H† + a_V†b_V† into one bin.
fn apply_pair_operator(state: &FockState, spec: &SourceSpec, bin: u8) -> Result<FockState> {
    let hh = state
        .create_at(&spec.port_x, Polarization::H, bin)?
        .create_at(&spec.port_y, Polarization::H, bin)?;
    let vv = state
        .create_at(&spec.port_x, Polarization::V, bin)?
        .create_at(&spec.port_y, Polarization::V, bin)?;
    hh.add(&vv)
}

/// Raw sectors without the λⁿ weights: element `n` is (1/n!) ∏ⱼ Kⱼ† |0⟩,
/// where K₁ emits into bin 0 and Kⱼ (j ≥ 2) into v·(bin 0) + √(1−v²)·(bin j−1).
fn raw_sectors(spec: &SourceSpec) -> Result<(Arc<ChannelRegistry>, Vec<FockState>)> {
    spec.validate()?;
    let registry =
        ChannelRegistry::from_ports_with_bins(&[&spec.port_x, &spec.port_y], spec.bins())?;
    if 2 * spec.n_max > registry.max_photons() {
        return Err(SimError::Capacity(format!(
            "cutoff {} needs {} photons, bound is {}",
            spec.n_max,
            2 * spec.n_max,
            registry.max_photons()
        )));
    }
    let v = spec.overlap;
    let spill = (1.0 - v * v).max(0.0).sqrt();
    let mut sectors = vec![FockState::vacuum(&registry)];
    let mut factorial = 1.0f64;
    for pair in 1..=spec.n_max {
        factorial *= pair as f64;
        let prev = &sectors[(pair - 1) as usize];
        // undo the previous 1/ (pair-1)! so the operator acts on the raw product
        let prev_raw = prev.scaled(Complex64::new(factorial / (pair as f64), 0.0));
        let next_raw = if pair == 1 || v >= 1.0 {
            apply_pair_operator(&prev_raw, spec, 0)?
        } else {
            let stay = apply_pair_operator(&prev_raw, spec, 0)?
                .scaled(Complex64::new(v, 0.0));
            let moved = apply_pair_operator(&prev_raw, spec, (pair - 1) as u8)?
                .scaled(Complex64::new(spill, 0.0));
            stay.add(&moved)?
        };
        sectors.push(next_raw.scaled(Complex64::new(1.0 / factorial, 0.0)));
    }
    Ok((registry, sectors))
}

fn truncated_norm_sqr(spec: &SourceSpec, sectors: &[FockState]) -> f64 {
    sectors
        .iter()
        .enumerate()
        .map(|(n, s)| spec.lambda.powi(2 * n as i32) * s.norm_sqr())
        .sum()
}

/// Truncated two-mode down-conversion state, normalized within the kept
/// sectors. Ignores the overlap parameter (ideal, fully indistinguishable
/// emission).
pub fn spdc_state(spec: &SourceSpec) -> Result<FockState> {
    let ideal = SourceSpec { overlap: 1.0, ..spec.clone() };
    build_state(&ideal)
}

/// Down-conversion state with pairwise distinguishability `spec.overlap`.
/// At v = 1 this is `spdc_state` term for term.
pub fn spdc_state_distinguishable(spec: &SourceSpec) -> Result<FockState> {
    build_state(spec)
}

fn build_state(spec: &SourceSpec) -> Result<FockState> {
    let (registry, sectors) = raw_sectors(spec)?;
    let norm = truncated_norm_sqr(spec, &sectors).sqrt();
    let mut acc = FockState::zero(&registry);
    for (n, sector) in sectors.iter().enumerate() {
        let w = spec.lambda.powi(n as i32) / norm;
        acc = acc.add(&sector.scaled(Complex64::new(w, 0.0)))?;
    }
    Ok(acc)
}

/// The n-pair sector exactly as it appears inside the normalized truncated
/// state (sub-unit norm). Summing these over n rebuilds the full state.
pub fn spdc_sector(spec: &SourceSpec, n: u32) -> Result<FockState> {
    if n > spec.n_max {
        return Err(SimError::InvalidArgument(format!(
            "sector {n} beyond cutoff {}",
            spec.n_max
        )));
    }
    let (_, sectors) = raw_sectors(spec)?;
    let norm = truncated_norm_sqr(spec, &sectors).sqrt();
    let w = spec.lambda.powi(n as i32) / norm;
    Ok(sectors[n as usize].scaled(Complex64::new(w, 0.0)))
}

/// Probability weight of each pair-number sector in the truncated state.
/// The last entry bounds the truncation error of the cutoff.
pub fn sector_weights(spec: &SourceSpec) -> Result<Vec<f64>> {
    let (_, sectors) = raw_sectors(spec)?;
    let total = truncated_norm_sqr(spec, &sectors);
    Ok(sectors
        .iter()
        .enumerate()
        .map(|(n, s)| spec.lambda.powi(2 * n as i32) * s.norm_sqr() / total)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{Bell, Occupation};

    #[test]
    fn bell_pair_projects_and_reduces() {
        let pair = bell_pair("1", "2").unwrap();
        assert!(pair.is_normalized());
        let reg = pair.registry().clone();
        let (p, cond) = pair
            .project_counts(&[
                (reg.find("2", Polarization::H, 0).unwrap(), 1),
                (reg.find("2", Polarization::V, 0).unwrap(), 0),
            ])
            .unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(cond.num_terms(), 1);

        let red = pair.reduce_two_qubit("1", "2").unwrap();
        assert!((red.dm.unwrap().fidelity_to_bell(Bell::PhiPlus) - 1.0).abs() < 1e-12);

        assert!(bell_pair("1", "1").is_err());
    }

    #[test]
    fn one_pair_sector_matches_bell_pair() {
        let spec = SourceSpec::new("1", "2", 0.1, 2);
        let state = spdc_state(&spec).unwrap();
        let sector = spdc_sector(&spec, 1).unwrap().normalized();
        let bell = bell_pair("1", "2").unwrap();
        for (occ, amp) in bell.terms() {
            assert!((sector.amplitude(occ) - amp).norm() < 1e-12);
        }
        assert!(state.is_normalized());
    }

    #[test]
    fn bell_overlap_with_spdc_state_is_sector_amplitude() {
        // ⟨bell|spdc⟩ = λ√2 / √(Σ λ^2n (n+1))
        let spec = SourceSpec::new("1", "2", 0.1, 2);
        let bell = bell_pair("1", "2").unwrap();
        let spdc = spdc_state(&spec).unwrap();
        let ip = bell.inner(&spdc).unwrap();
        let norm = (1.0 + 2.0 * spec.lambda.powi(2) + 3.0 * spec.lambda.powi(4)).sqrt();
        let expect = spec.lambda * 2.0f64.sqrt() / norm;
        assert!((ip - Complex64::new(expect, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_pair_sector_is_symmetrized_double_pair() {
        // (|2H;2H⟩ + |1H1V;1H1V⟩ + |2V;2V⟩)/√3
        let spec = SourceSpec::new("x", "y", 0.3, 2);
        let sector = spdc_sector(&spec, 2).unwrap().normalized();
        let reg = sector.registry().clone();
        let occ = |xh: u8, xv: u8, yh: u8, yv: u8| {
            let mut counts = vec![0u8; reg.len()];
            counts[reg.find("x", Polarization::H, 0).unwrap()] = xh;
            counts[reg.find("x", Polarization::V, 0).unwrap()] = xv;
            counts[reg.find("y", Polarization::H, 0).unwrap()] = yh;
            counts[reg.find("y", Polarization::V, 0).unwrap()] = yv;
            Occupation::new(counts)
        };
        let w = 1.0 / 3.0f64.sqrt();
        for pattern in [occ(2, 0, 2, 0), occ(1, 1, 1, 1), occ(0, 2, 0, 2)] {
            assert!((sector.amplitude(&pattern).re - w).abs() < 1e-12);
        }
        assert_eq!(sector.num_terms(), 3);
    }

    #[test]
    fn closed_form_matches_operator_expansion() {
        // brute-force oracle: expand Σ (λⁿ/n!) Kⁿ |0⟩ by repeated operator
        // application without the sector bookkeeping
        let spec = SourceSpec::new("x", "y", 0.2, 3);
        let reg = ChannelRegistry::from_ports(&["x", "y"]).unwrap();
        let mut acc = FockState::vacuum(&reg);
        let mut power = FockState::vacuum(&reg);
        let mut factorial = 1.0;
        for n in 1..=3u32 {
            factorial *= n as f64;
            power = apply_pair_operator(&power, &spec, 0).unwrap();
            let coeff = Complex64::new(spec.lambda.powi(n as i32) / factorial, 0.0);
            acc = acc.add(&power.scaled(coeff)).unwrap();
        }
        let oracle = acc.normalized();
        let state = spdc_state(&spec).unwrap();
        for (occ, amp) in oracle.terms() {
            assert!((state.amplitude(occ) - amp).norm() < 1e-12);
        }
        assert_eq!(oracle.num_terms(), state.num_terms());
    }

    #[test]
    fn unnormalized_sector_weights_scale_as_lambda_powers() {
        // 1 : 2λ² : 3λ⁴ at λ = 0.1  →  1 : 0.02 : 0.0003
        let spec = SourceSpec::new("x", "y", 0.1, 2);
        let weights = sector_weights(&spec).unwrap();
        let total: f64 = weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let base = weights[0];
        assert!((weights[1] / base - 0.02).abs() < 1e-14);
        assert!((weights[2] / base - 0.0003).abs() < 1e-15);
    }

    #[test]
    fn sector_ratio_follows_bosonic_enhancement() {
        // P(n+1)/P(n) = λ²(n+2)/(n+1)
        let spec = SourceSpec::new("x", "y", 0.37, 3);
        let weights = sector_weights(&spec).unwrap();
        for n in 0..3usize {
            let expect = spec.lambda.powi(2) * (n as f64 + 2.0) / (n as f64 + 1.0);
            assert!((weights[n + 1] / weights[n] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn spdc_state_normalized_across_parameters() {
        for lambda in [0.05, 0.2, 0.5] {
            for n_max in [1u32, 2, 3] {
                let spec = SourceSpec::new("x", "y", lambda, n_max);
                assert!(spdc_state(&spec).unwrap().is_normalized());
            }
        }
    }

    #[test]
    fn port_marginal_is_uniform_within_sector() {
        let spec = SourceSpec::new("x", "y", 0.2, 3);
        let sector = spdc_sector(&spec, 3).unwrap().normalized();
        let reg = sector.registry().clone();
        let xh = reg.find("x", Polarization::H, 0).unwrap();
        // each of the 4 patterns (k H-photons, k = 0..3) carries weight 1/4
        for k in 0..=3u8 {
            let weight: f64 = sector
                .terms()
                .filter(|(occ, _)| occ.get(xh) == k)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            assert!((weight - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn distinguishable_at_unit_overlap_matches_ideal() {
        let spec = SourceSpec::new("x", "y", 0.15, 2).with_overlap(1.0);
        let ideal = spdc_state(&spec).unwrap();
        let dist = spdc_state_distinguishable(&spec).unwrap();
        assert_eq!(ideal.num_terms(), dist.num_terms());
        for (occ, amp) in ideal.terms() {
            assert!((dist.amplitude(occ) - amp).norm() < 1e-12);
        }
    }

    #[test]
    fn distinguishable_at_zero_overlap_separates_bins() {
        let spec = SourceSpec::new("x", "y", 0.15, 2).with_overlap(0.0);
        let sector = spdc_sector(&spec, 2).unwrap();
        let reg = sector.registry().clone();
        // every term has exactly one pair in bin 0 and one in bin 1
        for (occ, _) in sector.terms() {
            let bin0: u32 = reg
                .channels()
                .iter()
                .enumerate()
                .filter(|(_, c)| c.bin == 0)
                .map(|(i, _)| occ.get(i) as u32)
                .sum();
            let bin1: u32 = reg
                .channels()
                .iter()
                .enumerate()
                .filter(|(_, c)| c.bin == 1)
                .map(|(i, _)| occ.get(i) as u32)
                .sum();
            assert_eq!((bin0, bin1), (2, 2));
        }
    }

    #[test]
    fn distinguishable_double_pair_amplitudes() {
        // direct expansion: the all-bin-0 component of the 2-pair sector
        // carries the raw coefficient v, the split component √(1−v²)
        let v = 0.9f64;
        let spec = SourceSpec::new("x", "y", 0.2, 2).with_overlap(v);
        let (reg, sectors) = raw_sectors(&spec).unwrap();
        let sector2 = &sectors[2];
        let occ_all0 = {
            let mut counts = vec![0u8; reg.len()];
            counts[reg.find("x", Polarization::H, 0).unwrap()] = 2;
            counts[reg.find("y", Polarization::H, 0).unwrap()] = 2;
            Occupation::new(counts)
        };
        // (v/2)(K₀†)² contributes v·|2,2⟩ via the bosonic 2! and √2·√2
        assert!((sector2.amplitude(&occ_all0) - Complex64::new(v, 0.0)).norm() < 1e-12);
        let occ_split = {
            let mut counts = vec![0u8; reg.len()];
            counts[reg.find("x", Polarization::H, 0).unwrap()] = 1;
            counts[reg.find("x", Polarization::H, 1).unwrap()] = 1;
            counts[reg.find("y", Polarization::H, 0).unwrap()] = 1;
            counts[reg.find("y", Polarization::H, 1).unwrap()] = 1;
            Occupation::new(counts)
        };
        let spill = (1.0 - v * v).sqrt() / 2.0;
        assert!((sector2.amplitude(&occ_split) - Complex64::new(spill, 0.0)).norm() < 1e-12);
        // bin-0,0 weight fraction of the all-bin-0 amplitude relative to the
        // ideal source is v², i.e. 0.81 at v = 0.9
        let ideal = SourceSpec::new("x", "y", 0.2, 2);
        let (ireg, isectors) = raw_sectors(&ideal).unwrap();
        let iocc = {
            let mut counts = vec![0u8; ireg.len()];
            counts[ireg.find("x", Polarization::H, 0).unwrap()] = 2;
            counts[ireg.find("y", Polarization::H, 0).unwrap()] = 2;
            Occupation::new(counts)
        };
        let ratio = sector2.amplitude(&occ_all0).norm_sqr()
            / isectors[2].amplitude(&iocc).norm_sqr();
        assert!((ratio - 0.81).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(SourceSpec::new("x", "x", 0.1, 2).validate().is_err());
        assert!(SourceSpec::new("x", "y", -0.1, 2).validate().is_err());
        assert!(SourceSpec::new("x", "y", 0.1, 0).validate().is_err());
        assert!(SourceSpec::new("x", "y", 0.1, 2).with_overlap(1.5).validate().is_err());
        // capacity: 7 pairs would need 14 photons
        assert!(matches!(
            spdc_state(&SourceSpec::new("x", "y", 0.1, 7)),
            Err(SimError::Capacity(_))
        ));
    }
}
