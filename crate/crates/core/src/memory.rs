//! Cyclical storage-loop model for the heralded pair.
//!
//! Each member of the pair circulates in its own loop. Per cycle a loop
//! applies a birefringence phase diag(1, e^{iθ}), an optional bit flip, and
//! a common phase that factors out of the two-photon state (no phase locking
//! between the loops is needed). Loss is a scalar survival probability per
//! cycle: a lost photon produces no output event, so surviving events keep
//! the pure phase model.

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fock::TwoQubitDM;

/// Storage-loop parameters, shared cycle count for both loops.
#[derive(Clone, Debug)]
pub struct MemoryParams {
    /// Round trips each photon makes.
    pub cycles: u32,
    /// Per-cycle survival probability per loop.
    pub survival_per_cycle: f64,
    /// Per-cycle birefringence phase of each loop (radians).
    pub birefringence: (f64, f64),
    /// Per-cycle common phase offset of each loop; must not affect the state.
    pub common_phase: (f64, f64),
    /// Apply an X to the stored qubit every cycle.
    pub bitflip: bool,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            cycles: 0,
            survival_per_cycle: 1.0,
            birefringence: (0.0, 0.0),
            common_phase: (0.0, 0.0),
            bitflip: false,
        }
    }
}

impl MemoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.survival_per_cycle) {
            return Err(SimError::InvalidArgument(format!(
                "survival {} outside [0, 1]",
                self.survival_per_cycle
            )));
        }
        Ok(())
    }
}

type Mat2 = [[Complex64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// One cycle of one loop: common phase, then diag(1, e^{iθ}), then optional X.
fn cycle_unitary(theta: f64, common: f64, bitflip: bool) -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    let c = Complex64::from_polar(1.0, common);
    let mut u = [[c, z], [z, c * Complex64::from_polar(1.0, theta)]];
    if bitflip {
        let one = Complex64::new(1.0, 0.0);
        u = mat_mul(&[[z, one], [one, z]], &u);
    }
    u
}

fn loop_unitary(theta: f64, common: f64, bitflip: bool, cycles: u32) -> Mat2 {
    let step = cycle_unitary(theta, common, bitflip);
    let one = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let mut u = [[one, z], [z, one]];
    for _ in 0..cycles {
        u = mat_mul(&step, &u);
    }
    u
}

/// Evolves a stored pair through `p.cycles` round trips of both loops.
/// Returns the survival probability η^(2k) and the state of the surviving
/// events.
pub fn memory_evolve(dm: &TwoQubitDM, p: &MemoryParams) -> Result<(f64, TwoQubitDM)> {
    p.validate()?;
    if (dm.trace() - 1.0).abs() > 1e-12 {
        return Err(SimError::InvalidArgument(
            "memory input density matrix must be normalized".into(),
        ));
    }
    let survival = p.survival_per_cycle.powi(2 * p.cycles as i32);
    let u1 = loop_unitary(p.birefringence.0, p.common_phase.0, p.bitflip, p.cycles);
    let u2 = loop_unitary(p.birefringence.1, p.common_phase.1, p.bitflip, p.cycles);
    // U = u1 ⊗ u2 on the |q1 q2⟩ basis; dm_out = U ρ U†
    let mut u = [[Complex64::new(0.0, 0.0); 4]; 4];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    u[a * 2 + b][c * 2 + d] = u1[a][c] * u2[b][d];
                }
            }
        }
    }
    let mut tmp = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                tmp[i][j] += u[i][k] * dm.element(k, j);
            }
        }
    }
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                out[i][j] += tmp[i][k] * u[j][k].conj();
            }
        }
    }
    Ok((survival, TwoQubitDM::from_matrix(out).normalized()))
}

/// Pure-state density matrix of (|00⟩ + e^{iφ}|11⟩)/√2.
pub fn relative_phase_state(phi: f64) -> TwoQubitDM {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let amps = [
        Complex64::new(r, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(r, phi),
    ];
    TwoQubitDM::from_pure(&amps)
}

/// Fidelity of φ⁺ stored for an even number of cycles with per-cycle phase
/// `theta` on the first loop and bit-flipping enabled. The alternation
/// Z(θ)·X·Z(θ)·X is proportional to the identity, so the result must be 1.
pub fn bitflip_cancellation_check(theta: f64, cycles: u32) -> Result<f64> {
    if !cycles.is_multiple_of(2) {
        return Err(SimError::InvalidArgument(
            "bit-flip cancellation needs an even cycle count (odd counts leave a net X)".into(),
        ));
    }
    let params = MemoryParams {
        cycles,
        birefringence: (theta, 0.0),
        bitflip: true,
        ..MemoryParams::default()
    };
    let (_, out) = memory_evolve(&relative_phase_state(0.0), &params)?;
    Ok(out.fidelity_to_bell(crate::fock::Bell::PhiPlus))
}
