//! Mode transforms for the optical elements of the protocol: polarizing
//! beamsplitters in the computational and diagonal orientations, wave-plate
//! rotations, non-polarizing beamsplitters, and phase shifters.
//!
//! Conventions fixed here and used consistently everywhere:
//! - a PBS reflection carries no extra phase (H and V never interfere at a
//!   PBS itself, so any fixed convention is admissible);
//! - the non-polarizing beamsplitter is symmetric with `i` on reflection,
//!   which fixes the Hong-Ou-Mandel output sign;
//! - angles are in radians.

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fock::Polarization;

/// A port/polarization pair; a transform acts on the same matrix for every
/// temporal bin of its ports.
pub type ModeKey = (String, Polarization);

/// Unitary acting on creation operators: `a†_in[i] → Σ_j U[j][i] b†_out[j]`.
///
/// Input and output mode lists have equal length `n`; the matrix is row-major
/// `n×n`. Input and output ports may differ (routing elements) or coincide
/// (in-place wave plates and phase shifters).
#[derive(Clone, Debug)]
pub struct ModeTransform {
    inputs: Vec<ModeKey>,
    outputs: Vec<ModeKey>,
    matrix: Vec<Complex64>,
}

impl ModeTransform {
    /// Validates dimensions, mode uniqueness, and unitarity (1e-12).
    pub fn new(
        inputs: Vec<ModeKey>,
        outputs: Vec<ModeKey>,
        matrix: Vec<Complex64>,
    ) -> Result<Self> {
        let n = inputs.len();
        if n == 0 || outputs.len() != n || matrix.len() != n * n {
            return Err(SimError::InvalidArgument(
                "transform dimensions are inconsistent".into(),
            ));
        }
        for (list, what) in [(&inputs, "input"), (&outputs, "output")] {
            for i in 0..n {
                for j in (i + 1)..n {
                    if list[i] == list[j] {
                        return Err(SimError::InvalidArgument(format!(
                            "duplicate {what} mode {}:{}",
                            list[i].0, list[i].1
                        )));
                    }
                }
            }
        }
        let t = ModeTransform { inputs, outputs, matrix };
        t.check_unitary()?;
        Ok(t)
    }

    pub fn input_modes(&self) -> &[ModeKey] {
        &self.inputs
    }

    pub fn output_modes(&self) -> &[ModeKey] {
        &self.outputs
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    /// Largest deviation of `U†U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.matrix[k * n + i].conj() * self.matrix[k * n + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }

    pub fn check_unitary(&self) -> Result<()> {
        let err = self.unitarity_error();
        if err > 1e-12 {
            return Err(SimError::InvalidArgument(format!(
                "matrix is not unitary (deviation {err:.3e})"
            )));
        }
        Ok(())
    }

    /// Composition `other ∘ self`: apply `self` first. Requires the output
    /// modes of `self` to equal the input modes of `other`.
    pub fn then(&self, other: &ModeTransform) -> Result<ModeTransform> {
        if self.outputs != other.inputs {
            return Err(SimError::InvalidArgument(
                "composition requires matching intermediate modes".into(),
            ));
        }
        let n = self.dim();
        let mut matrix = vec![Complex64::new(0.0, 0.0); n * n];
        for row in 0..n {
            for col in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += other.matrix[row * n + k] * self.matrix[k * n + col];
                }
                matrix[row * n + col] = acc;
            }
        }
        ModeTransform::new(self.inputs.clone(), other.outputs.clone(), matrix)
    }
}

fn pbs_modes(in1: &str, in2: &str, out1: &str, out2: &str) -> Result<(Vec<ModeKey>, Vec<ModeKey>)> {
    let ports = [in1, in2, out1, out2];
    for i in 0..4 {
        for j in (i + 1)..4 {
            if ports[i] == ports[j] {
                return Err(SimError::InvalidArgument(format!(
                    "duplicate port {} in PBS",
                    ports[i]
                )));
            }
        }
    }
    let mk = |p: &str, pol| (p.to_string(), pol);
    use Polarization::{H, V};
    let inputs = vec![mk(in1, H), mk(in1, V), mk(in2, H), mk(in2, V)];
    let outputs = vec![mk(out1, H), mk(out1, V), mk(out2, H), mk(out2, V)];
    Ok((inputs, outputs))
}

/// Polarizing beamsplitter aligned in the computational basis:
/// H transmits (`in1 → out1`, `in2 → out2`), V reflects (`in1 → out2`,
/// `in2 → out1`), with no reflection phase.
pub fn pbs_computational(in1: &str, in2: &str, out1: &str, out2: &str) -> Result<ModeTransform> {
    let (inputs, outputs) = pbs_modes(in1, in2, out1, out2)?;
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    // rows: out1H, out1V, out2H, out2V; cols: in1H, in1V, in2H, in2V
    let matrix = vec![
        o, z, z, z, //
        z, z, z, o, //
        z, z, o, z, //
        z, o, z, z,
    ];
    ModeTransform::new(inputs, outputs, matrix)
}

/// Polarizing beamsplitter rotated by 45°: |+⟩ transmits, |−⟩ reflects.
/// Equals `rotation(π/4) ∘ pbs_computational ∘ rotation(−π/4)` on both ports.
pub fn pbs_diagonal(in1: &str, in2: &str, out1: &str, out2: &str) -> Result<ModeTransform> {
    let (inputs, outputs) = pbs_modes(in1, in2, out1, out2)?;
    let h = Complex64::new(0.5, 0.0);
    // Mapping of the ± creation operators:
    //   in1+ → out1+, in1− → out2−, in2+ → out2+, in2− → out1−,
    // written out in the H/V basis.
    let matrix = vec![
        h, h, h, -h, //  out1H
        h, h, -h, h, //  out1V
        h, -h, h, h, //  out2H
        -h, h, h, h, //  out2V
    ];
    ModeTransform::new(inputs, outputs, matrix)
}

/// Polarization Hadamard on one port: H → (H+V)/√2, V → (H−V)/√2.
/// Self-inverse; realizes a ±-basis detection when followed by a
/// computational-basis count.
pub fn hadamard(port: &str) -> Result<ModeTransform> {
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let modes = vec![
        (port.to_string(), Polarization::H),
        (port.to_string(), Polarization::V),
    ];
    ModeTransform::new(modes.clone(), modes, vec![r, r, r, -r])
}

/// Wave-plate rotation of one port's polarization by `theta`:
/// H → cosθ·H + sinθ·V, V → −sinθ·H + cosθ·V.
pub fn rotation(port: &str, theta: f64) -> Result<ModeTransform> {
    let c = Complex64::new(theta.cos(), 0.0);
    let s = Complex64::new(theta.sin(), 0.0);
    let modes = vec![
        (port.to_string(), Polarization::H),
        (port.to_string(), Polarization::V),
    ];
    ModeTransform::new(modes.clone(), modes, vec![c, -s, s, c])
}

/// Polarization-independent beamsplitter between two ports with
/// transmissivity `t`: `a₁† → √T b₁† + i√(1−T) b₂†` and symmetrically.
pub fn beamsplitter(port1: &str, port2: &str, transmissivity: f64) -> Result<ModeTransform> {
    if port1 == port2 {
        return Err(SimError::InvalidArgument("beamsplitter ports must differ".into()));
    }
    if !(0.0..=1.0).contains(&transmissivity) {
        return Err(SimError::InvalidArgument(format!(
            "transmissivity {transmissivity} outside [0, 1]"
        )));
    }
    let t = Complex64::new(transmissivity.sqrt(), 0.0);
    let r = Complex64::new(0.0, (1.0 - transmissivity).sqrt());
    let z = Complex64::new(0.0, 0.0);
    use Polarization::{H, V};
    let modes = vec![
        (port1.to_string(), H),
        (port1.to_string(), V),
        (port2.to_string(), H),
        (port2.to_string(), V),
    ];
    let matrix = vec![
        t, z, r, z, //
        z, t, z, r, //
        r, z, t, z, //
        z, r, z, t,
    ];
    ModeTransform::new(modes.clone(), modes, matrix)
}

/// Multiplies one channel's creation operator by `e^{iθ}`.
pub fn phase_shift(port: &str, pol: Polarization, theta: f64) -> Result<ModeTransform> {
    let modes = vec![(port.to_string(), pol)];
    ModeTransform::new(modes.clone(), modes, vec![Complex64::from_polar(1.0, theta)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{ChannelRegistry, FockState, Occupation};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constructors_are_unitary() {
        for t in [
            pbs_computational("1", "2", "3", "4").unwrap(),
            pbs_diagonal("1", "2", "3", "4").unwrap(),
            hadamard("1").unwrap(),
            rotation("1", 0.37).unwrap(),
            beamsplitter("1", "2", 0.25).unwrap(),
            phase_shift("1", Polarization::V, 1.1).unwrap(),
        ] {
            assert!(t.unitarity_error() <= 1e-12);
        }
    }

    #[test]
    fn pbs_rejects_duplicate_ports() {
        assert!(pbs_computational("1", "1", "3", "4").is_err());
        assert!(pbs_diagonal("1", "2", "3", "3").is_err());
    }

    #[test]
    fn beamsplitter_rejects_bad_transmissivity() {
        assert!(beamsplitter("1", "2", -0.1).is_err());
        assert!(beamsplitter("1", "2", 1.1).is_err());
    }

    #[test]
    fn diagonal_pbs_equals_rotated_computational() {
        // rotation(π/4) on both output ports ∘ PBS ∘ rotation(−π/4) on both
        // input ports, as 4×4 matrices over the PBS mode bases.
        let n = 4;
        let mul = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
            let mut m = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        m[i * n + j] += a[i * n + k] * b[k * n + j];
                    }
                }
            }
            m
        };
        // Both-ports rotation: block diagonal with the same 2×2 block, since
        // the PBS mode lists order each port's H before its V.
        let both_ports_rotation = |theta: f64| -> Vec<Complex64> {
            let rot = rotation("x", theta).unwrap();
            let mut m = vec![Complex64::new(0.0, 0.0); n * n];
            for block in 0..2 {
                for r in 0..2 {
                    for cidx in 0..2 {
                        m[(block * 2 + r) * n + (block * 2 + cidx)] = rot.matrix()[r * 2 + cidx];
                    }
                }
            }
            m
        };
        let ang = std::f64::consts::FRAC_PI_4;
        let pbs = pbs_computational("1", "2", "3", "4").unwrap();
        let conjugated = mul(
            &both_ports_rotation(ang),
            &mul(pbs.matrix(), &both_ports_rotation(-ang)),
        );
        let direct = pbs_diagonal("1", "2", "3", "4").unwrap();
        for (a, b) in conjugated.iter().zip(direct.matrix()) {
            assert!((a - b).norm() < 1e-12, "conjugation identity violated");
        }
    }

    #[test]
    fn diagonal_pbs_routes_plus_and_minus() {
        let reg = ChannelRegistry::from_ports(&["1", "2", "3", "4"]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let plus = FockState::from_terms(
            &reg,
            vec![
                (Occupation::new(vec![1, 0, 0, 0, 0, 0, 0, 0]), c(r, 0.0)),
                (Occupation::new(vec![0, 1, 0, 0, 0, 0, 0, 0]), c(r, 0.0)),
            ],
        )
        .unwrap();
        let pbs = pbs_diagonal("1", "2", "3", "4").unwrap();
        let out = plus.apply_transform(&pbs).unwrap();
        // |+⟩ at in1 appears entirely at out1 (port "3")
        for (occ, _) in out.terms() {
            let n3: u8 = occ.get(4) + occ.get(5);
            assert_eq!(n3, 1);
        }

        let minus = FockState::from_terms(
            &reg,
            vec![
                (Occupation::new(vec![1, 0, 0, 0, 0, 0, 0, 0]), c(r, 0.0)),
                (Occupation::new(vec![0, 1, 0, 0, 0, 0, 0, 0]), c(-r, 0.0)),
            ],
        )
        .unwrap();
        let out = minus.apply_transform(&pbs).unwrap();
        // |−⟩ at in1 appears entirely at out2 (port "4")
        for (occ, _) in out.terms() {
            let n4: u8 = occ.get(6) + occ.get(7);
            assert_eq!(n4, 1);
        }

        // |H⟩ at in1 splits evenly between the outputs
        let h_in = FockState::vacuum(&reg).create(0).unwrap();
        let out = h_in.apply_transform(&pbs).unwrap();
        let p3: f64 = out
            .terms()
            .filter(|(occ, _)| occ.get(4) + occ.get(5) == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!((p3 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hadamard_is_self_inverse() {
        let h = hadamard("p").unwrap();
        let hh = h.then(&h).unwrap();
        let n = hh.dim();
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((hh.matrix()[i * n + j] - target).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hadamard_splits_h_photon() {
        let reg = ChannelRegistry::from_ports(&["p"]).unwrap();
        let s = FockState::vacuum(&reg).create(0).unwrap();
        let out = s.apply_transform(&hadamard("p").unwrap()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&Occupation::new(vec![1, 0])) - c(r, 0.0)).norm() < 1e-12);
        assert!((out.amplitude(&Occupation::new(vec![0, 1])) - c(r, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn phase_shift_on_bell_pair_is_relative_phase() {
        let theta = 0.7f64;
        let bell = crate::sources::bell_pair("1", "2").unwrap();
        let shifted = bell
            .apply_transform(&phase_shift("1", Polarization::V, theta).unwrap())
            .unwrap();
        let red = shifted.reduce_two_qubit("1", "2").unwrap();
        let f = red.dm.unwrap().fidelity_to_bell(crate::fock::Bell::PhiPlus);
        assert!((f - (theta / 2.0).cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn common_phase_leaves_detection_probabilities_unchanged() {
        let theta = 1.234f64;
        let bell = crate::sources::bell_pair("1", "2").unwrap();
        let shifted = bell
            .apply_transform(&phase_shift("1", Polarization::H, theta).unwrap())
            .unwrap()
            .apply_transform(&phase_shift("1", Polarization::V, theta).unwrap())
            .unwrap();
        let reg = bell.registry();
        for pol in [Polarization::H, Polarization::V] {
            let idx = reg.find("1", pol, 0).unwrap();
            let (p0, _) = bell.project_counts(&[(idx, 1)]).unwrap();
            let (p1, _) = shifted.project_counts(&[(idx, 1)]).unwrap();
            assert!((p0 - p1).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn random_element_chains_preserve_norm(
            t in 0.0f64..=1.0,
            theta in 0.0f64..std::f64::consts::TAU,
            phi in 0.0f64..std::f64::consts::TAU,
            seed in 0u8..4,
        ) {
            let reg = ChannelRegistry::from_ports(&["a", "b"]).unwrap();
            let mut s = FockState::vacuum(&reg)
                .create_at("a", Polarization::H, 0).unwrap()
                .create_at("b", Polarization::V, 0).unwrap()
                .create_at("a", Polarization::V, 0).unwrap()
                .normalized();
            let chain = [
                beamsplitter("a", "b", t).unwrap(),
                rotation("a", theta).unwrap(),
                phase_shift("b", Polarization::V, phi).unwrap(),
                hadamard("b").unwrap(),
            ];
            // vary application order a little with the seed
            let order: Vec<usize> = match seed {
                0 => vec![0, 1, 2, 3],
                1 => vec![3, 2, 1, 0],
                2 => vec![1, 3, 0, 2],
                _ => vec![2, 0, 3, 1],
            };
            for idx in order {
                s = s.apply_transform(&chain[idx]).unwrap();
                prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-10);
            }
        }

        #[test]
        fn beamsplitter_composition_preserves_photon_number(
            t1 in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
        ) {
            let reg = ChannelRegistry::from_ports(&["a", "b"]).unwrap();
            let s = FockState::vacuum(&reg)
                .create_at("a", Polarization::H, 0).unwrap()
                .create_at("a", Polarization::H, 0).unwrap()
                .create_at("b", Polarization::H, 0).unwrap()
                .normalized();
            let total_in: u32 = 3;
            let out = s
                .apply_transform(&beamsplitter("a", "b", t1).unwrap()).unwrap()
                .apply_transform(&beamsplitter("a", "b", t2).unwrap()).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-10);
            for (occ, _) in out.terms() {
                prop_assert_eq!(occ.total(), total_in);
            }
        }
    }
}
