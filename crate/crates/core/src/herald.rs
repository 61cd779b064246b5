//! Heralded state transfer by a Bell-basis measurement of the flux qubit.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FluxQubitConfig;

/// Branches whose probability falls below this have no defined fidelity.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellOutcome {
    /// `(|e⟩ + |g⟩)/√2`
    PsiPlus,
    /// `(|e⟩ − |g⟩)/√2`
    PsiMinus,
}

impl BellOutcome {
    /// Components in the `(|g⟩, |e⟩)` basis.
    fn vector(self) -> [f64; 2] {
        match self {
            BellOutcome::PsiPlus => [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            BellOutcome::PsiMinus => [-FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BellOutcome::PsiPlus => "psi_plus",
            BellOutcome::PsiMinus => "psi_minus",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeraldOutcome {
    pub outcome: BellOutcome,
    /// Unconditional weight of the branch; both branches sum to `e_R + e_L`.
    pub probability: f64,
    /// Branch weight given that a photon left through the waveguide.
    pub normalized_probability: f64,
    /// Conditioned path qubit in the `(|1_R⟩, |1_L⟩)` basis, unit trace.
    pub photonic_state: [[C64; 2]; 2],
    /// Whether the `diag(1, −1)` path phase was applied.
    pub corrected: bool,
    /// `⟨ψ|ρ_ph|ψ⟩` with `ψ = α|1_R⟩ + β|1_L⟩`.
    pub transfer_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeraldReport {
    pub psi_plus: HeraldOutcome,
    pub psi_minus: HeraldOutcome,
}

impl HeraldReport {
    /// Probability-weighted fidelity over both branches.
    pub fn average_fidelity(&self) -> f64 {
        let (a, b) = (&self.psi_plus, &self.psi_minus);
        (a.probability * a.transfer_fidelity + b.probability * b.transfer_fidelity) / (a.probability + b.probability)
    }
}

/// Projects the flux qubit of a time-integrated path ⊗ qubit matrix (basis
/// `(R,g), (R,e), (L,g), (L,e)`) onto both Bell outcomes.
pub fn herald(integrated: &[[C64; 4]; 4], flux: &FluxQubitConfig) -> Result<HeraldReport> {
    let total: f64 = (0..4).map(|i| integrated[i][i].re).sum();
    let branch = |outcome: BellOutcome| -> Result<HeraldOutcome> {
        let v = outcome.vector();
        let mut rho = [[C64::new(0.0, 0.0); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for l in 0..2 {
                    for k in 0..2 {
                        rho[a][b] += integrated[2 * a + l][2 * b + k] * (v[l] * v[k]);
                    }
                }
            }
        }
        let probability = rho[0][0].re + rho[1][1].re;
        if !(probability >= MIN_BRANCH_PROBABILITY) {
            return Err(Error::ZeroProbabilityBranch { outcome: outcome.label(), probability });
        }
        let corrected = outcome == BellOutcome::PsiPlus;
        if corrected {
            rho[0][1] = -rho[0][1];
            rho[1][0] = -rho[1][0];
        }
        for row in rho.iter_mut() {
            for z in row.iter_mut() {
                *z /= probability;
            }
        }
        let target = flux.amplitudes();
        let mut fid = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                fid += target[a].conj() * rho[a][b] * target[b];
            }
        }
        Ok(HeraldOutcome {
            outcome,
            probability,
            normalized_probability: if total > 0.0 { probability / total } else { 0.0 },
            photonic_state: rho,
            corrected,
            transfer_fidelity: fid.re,
        })
    };
    Ok(HeraldReport { psi_plus: branch(BellOutcome::PsiPlus)?, psi_minus: branch(BellOutcome::PsiMinus)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `α|R,g⟩ − β|L,e⟩` as a 4×4 projector.
    fn ideal(flux: &FluxQubitConfig) -> [[C64; 4]; 4] {
        let [a, b] = flux.amplitudes();
        let psi = [a, C64::new(0.0, 0.0), C64::new(0.0, 0.0), -b];
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    #[test]
    fn balanced_ideal_state() {
        let flux = FluxQubitConfig::balanced();
        let r = herald(&ideal(&flux), &flux).unwrap();
        for o in [&r.psi_plus, &r.psi_minus] {
            assert!((o.probability - 0.5).abs() < 1e-12);
            assert!((o.transfer_fidelity - 1.0).abs() < 1e-12);
            let tr = o.photonic_state[0][0].re + o.photonic_state[1][1].re;
            assert!((tr - 1.0).abs() < 1e-12);
        }
        assert!(r.psi_plus.corrected && !r.psi_minus.corrected);
    }

    #[test]
    fn unbalanced_ideal_state() {
        let flux = FluxQubitConfig::superposition(0.8f64.sqrt(), 0.0);
        let r = herald(&ideal(&flux), &flux).unwrap();
        assert!((r.psi_plus.probability - 0.5).abs() < 1e-12);
        assert!((r.psi_minus.probability - 0.5).abs() < 1e-12);
        assert!((r.psi_plus.transfer_fidelity - 1.0).abs() < 1e-12);
        assert!((r.psi_minus.transfer_fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_independent_of_beta_phase() {
        for theta in [0.0, 0.7, 2.5, -1.2] {
            let flux = FluxQubitConfig::superposition(0.6, theta);
            let r = herald(&ideal(&flux), &flux).unwrap();
            assert!((r.average_fidelity() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dephased_output_gives_classical_fidelity() {
        let flux = FluxQubitConfig::superposition(0.8f64.sqrt(), 0.0);
        let mut m = ideal(&flux);
        m[0][3] = C64::new(0.0, 0.0);
        m[3][0] = C64::new(0.0, 0.0);
        let r = herald(&m, &flux).unwrap();
        let classical = 0.8f64.powi(2) + 0.2f64.powi(2);
        assert!((r.psi_plus.transfer_fidelity - classical).abs() < 1e-12);
        assert!((r.psi_minus.transfer_fidelity - classical).abs() < 1e-12);
    }

    #[test]
    fn empty_input_has_no_branches() {
        let m = [[C64::new(0.0, 0.0); 4]; 4];
        assert!(matches!(herald(&m, &FluxQubitConfig::balanced()), Err(Error::ZeroProbabilityBranch { .. })));
    }

    #[test]
    fn probabilities_sum_to_trace() {
        let flux = FluxQubitConfig::balanced();
        let mut m = ideal(&flux);
        for row in m.iter_mut() {
            for z in row.iter_mut() {
                *z *= 0.93;
            }
        }
        m[1][1] = C64::new(0.02, 0.0);
        let r = herald(&m, &flux).unwrap();
        assert!((r.psi_plus.probability + r.psi_minus.probability - 0.95).abs() < 1e-12);
    }
}
