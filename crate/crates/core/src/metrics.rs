//! Everything computed downstream of ρ(t): output fluxes, the reduced
//! photon-path ⊗ flux-qubit matrix, fidelity, coherence and concurrence.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, kron, CMatrix, NEGATIVE_REJECT};
use crate::model::{kappa_c, FluxQubitConfig, PulseSpec, SystemParams};
use crate::propagate::{
    DensityMatrix, MomentBlock, MomentOperators, TimeSeries, CH_CAVITY, CH_KAPPA, CH_P3,
};

/// `f_R` below this is treated as a bookkeeping error rather than round-off.
pub const NEGATIVE_FLUX_REJECT: f64 = -1e-8;
/// Samples with `|𝒞₁|` below this fraction of the peak are ignored by [`fit_theta`].
pub const THETA_SUPPORT_FRACTION: f64 = 1e-2;
pub const THETA_MIN_SAMPLES: usize = 10;
pub const DEFAULT_PHI_POINTS: usize = 401;
/// Relative size below which a negative eigenvalue counts as round-off.
const ROUND_OFF: f64 = 1e-12;

/// Basis index of `|1_path, flux⟩` in the reduced matrix.
pub const RG: usize = 0;
pub const RE: usize = 1;
pub const LG: usize = 2;
pub const LE: usize = 3;

type Block4 = [[C64; 4]; 4];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Trapezoid rule on a (possibly non-uniform) grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1])).sum()
}

pub fn trapezoid_c(t: &[f64], y: &[C64]) -> C64 {
    t.windows(2).zip(y.windows(2)).map(|(tw, yw)| (yw[0] + yw[1]) * (0.5 * (tw[1] - tw[0]))).sum()
}

/// Output flux densities per sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxDensities {
    pub times: Vec<f64>,
    pub f_r: Vec<f64>,
    pub f_l: Vec<f64>,
    /// Flux leaving through non-waveguide channels: `(1−ξ_c)κ⟨a†a⟩ + γ₂⟨S₃₃⟩`.
    pub f_loss: Vec<f64>,
    /// `γ₁⟨S₃₃⟩`; this scattering leaves the emitter in `|1⟩`, so it stays in
    /// the stored excitation rather than the loss ledger.
    pub f_gamma1: Vec<f64>,
    /// `⟨a†S₂₃⟩`.
    pub cross: Vec<C64>,
}

impl FluxDensities {
    pub fn e_r(&self) -> f64 {
        trapezoid(&self.times, &self.f_r)
    }

    pub fn e_l(&self) -> f64 {
        trapezoid(&self.times, &self.f_l)
    }

    pub fn loss(&self) -> f64 {
        trapezoid(&self.times, &self.f_loss)
    }

    pub fn gamma1_scattered(&self) -> f64 {
        trapezoid(&self.times, &self.f_gamma1)
    }
}

/// Right- and left-moving flux densities from the recorded moments.
pub fn output_flux(ts: &TimeSeries, p: &SystemParams) -> Result<FluxDensities> {
    let kappa = ts.channel(CH_KAPPA);
    let n_cav = ts.channel(CH_CAVITY);
    let p3 = ts.channel(CH_P3);
    let w = p.waveguide_rate();
    let emitter_loss = p.big_gamma2() - 2.0 * w;
    let n = ts.len();
    let mut out = FluxDensities {
        times: ts.times.clone(),
        f_r: Vec::with_capacity(n),
        f_l: Vec::with_capacity(n),
        f_loss: Vec::with_capacity(n),
        f_gamma1: Vec::with_capacity(n),
        cross: Vec::with_capacity(n),
    };
    for i in 0..n {
        let g = &ts.moments[i];
        let cross = g[0][2] + g[1][3];
        let kc = p.xi_c * kappa[i];
        let f_r = kc * n_cav[i] + w * p3[i] + 2.0 * (kc * w).sqrt() * cross.re;
        if f_r < NEGATIVE_FLUX_REJECT {
            return Err(Error::NegativeFlux { time: ts.times[i], value: f_r });
        }
        out.f_r.push(f_r);
        out.f_l.push(w * p3[i]);
        out.f_loss.push((1.0 - p.xi_c) * kappa[i] * n_cav[i] + emitter_loss * p3[i]);
        out.f_gamma1.push(p.gamma1 * p3[i]);
        out.cross.push(cross);
    }
    Ok(out)
}

/// Instantaneous photon-path ⊗ flux-qubit matrix in the basis
/// `(R,g), (R,e), (L,g), (L,e)`. Its trace is the total output flux density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedPathQubitMatrix {
    pub time: f64,
    pub m: Block4,
}

impl ReducedPathQubitMatrix {
    /// Builds `m[(A,l),(B,k)] = Tr[ρ C_B† |k⟩⟨l| C_A]` from a moment block.
    pub fn from_moments(g: &MomentBlock, p: &SystemParams, kappa: f64, time: f64) -> Self {
        let cav = (p.xi_c * kappa).sqrt();
        let siv = p.waveguide_rate().sqrt();
        // coefficient of emitter X in C_path, paths R then L
        let coeff = [[cav, siv], [0.0, siv]];
        let mut m = [[ZERO; 4]; 4];
        for pa in 0..2 {
            for l in 0..2 {
                for pb in 0..2 {
                    for k in 0..2 {
                        let mut acc = ZERO;
                        for y in 0..2 {
                            for x in 0..2 {
                                let c = coeff[pb][y] * coeff[pa][x];
                                if c != 0.0 {
                                    acc += g[2 * y + k][2 * x + l] * c;
                                }
                            }
                        }
                        m[2 * pa + l][2 * pb + k] = acc;
                    }
                }
            }
        }
        let mut out = ReducedPathQubitMatrix { time, m };
        out.symmetrize();
        out
    }

    /// Same matrix evaluated directly from a stored density matrix.
    pub fn from_density(
        rho: &DensityMatrix,
        moments: &MomentOperators,
        p: &SystemParams,
        pulse: &PulseSpec,
    ) -> Self {
        let g = moments.evaluate(&rho.matrix);
        Self::from_moments(&g, p, kappa_c(rho.time, pulse), rho.time)
    }

    fn symmetrize(&mut self) {
        for i in 0..4 {
            for j in i..4 {
                let v = (self.m[i][j] + self.m[j][i].conj()) * 0.5;
                self.m[i][j] = v;
                self.m[j][i] = v.conj();
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.m[i][i].re).sum()
    }

    /// `𝒞₁ = Tr[ρ C_R† |g⟩⟨e| C_L]`.
    pub fn coherence_element(&self) -> C64 {
        self.m[LE][RG]
    }

    pub fn to_cmatrix(&self) -> CMatrix {
        block_to_cmatrix(&self.m)
    }
}

fn block_to_cmatrix(m: &Block4) -> CMatrix {
    CMatrix::from_fn(4, 4, |i, j| m[i][j])
}

/// Reduced matrices at every sample of a run.
pub fn reduced_series(ts: &TimeSeries, p: &SystemParams) -> Vec<ReducedPathQubitMatrix> {
    let kappa = ts.channel(CH_KAPPA);
    ts.moments
        .iter()
        .zip(ts.times.iter())
        .zip(kappa.iter())
        .map(|((g, &t), &k)| ReducedPathQubitMatrix::from_moments(g, p, k, t))
        .collect()
}

/// Linear fit `Θ(t) ≈ slope·t + intercept` of the unwrapped phase of `𝒞₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    pub slope: f64,
    pub intercept: f64,
    pub samples: usize,
}

/// Least-squares phase slope of a complex series over its significant support.
pub fn fit_theta(times: &[f64], series: &[C64]) -> Result<ThetaFit> {
    let peak = series.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cut = THETA_SUPPORT_FRACTION * peak;
    let mut ts = Vec::new();
    let mut phases: Vec<f64> = Vec::new();
    for (&t, z) in times.iter().zip(series) {
        if peak > 0.0 && z.norm() > cut {
            let mut ph = z.arg();
            if let Some(&prev) = phases.last() {
                ph += 2.0 * PI * ((prev - ph) / (2.0 * PI)).round();
            }
            ts.push(t);
            phases.push(ph);
        }
    }
    if ts.len() < THETA_MIN_SAMPLES {
        return Err(Error::InsufficientSupport { found: ts.len(), needed: THETA_MIN_SAMPLES });
    }
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let pm = phases.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, ph) in ts.iter().zip(&phases) {
        sxy += (t - tm) * (ph - pm);
        sxx += (t - tm) * (t - tm);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(ThetaFit { slope, intercept: pm - slope * tm, samples: ts.len() })
}

/// The three time integrals that determine `F(φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityIntegrals {
    /// `∫ m[(R,g),(R,g)]`.
    pub transmitted_g: f64,
    /// `∫ m[(L,e),(L,e)]`.
    pub reflected_e: f64,
    /// `∫ e^{−iΘ(t)} 𝒞₁(t)`.
    pub cross: C64,
}

impl FidelityIntegrals {
    pub fn new(series: &[ReducedPathQubitMatrix], theta_slope: f64) -> Self {
        let t: Vec<f64> = series.iter().map(|s| s.time).collect();
        let rg: Vec<f64> = series.iter().map(|s| s.m[RG][RG].re).collect();
        let le: Vec<f64> = series.iter().map(|s| s.m[LE][LE].re).collect();
        let c: Vec<C64> = series
            .iter()
            .map(|s| C64::from_polar(1.0, -theta_slope * s.time) * s.coherence_element())
            .collect();
        FidelityIntegrals {
            transmitted_g: trapezoid(&t, &rg),
            reflected_e: trapezoid(&t, &le),
            cross: trapezoid_c(&t, &c),
        }
    }

    /// Overlap with the target `α|R,g⟩ − β e^{iΘ(t)+iφ}|L,e⟩` integrated over time.
    pub fn evaluate(&self, flux: &FluxQubitConfig, phi: f64) -> f64 {
        let [alpha, beta] = flux.amplitudes();
        let weight = alpha * beta.conj() * C64::from_polar(1.0, -phi);
        alpha.norm_sqr() * self.transmitted_g + beta.norm_sqr() * self.reflected_e
            - 2.0 * (weight * self.cross).re
    }
}

/// `F(φ)` for a reduced-matrix series.
pub fn fidelity(
    series: &[ReducedPathQubitMatrix],
    flux: &FluxQubitConfig,
    theta_slope: f64,
    phi: f64,
) -> f64 {
    FidelityIntegrals::new(series, theta_slope).evaluate(flux, phi)
}

/// Wraps a phase into `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Grid scan of `F(φ)` over `[0, 2π)` refined by a parabola through the best
/// grid point and its neighbours. Returns `(φ*, F(φ*))` with `φ*` in `(−π, π]`.
pub fn maximize_fidelity(integrals: &FidelityIntegrals, flux: &FluxQubitConfig, points: usize) -> (f64, f64) {
    let points = points.max(3);
    let h = 2.0 * PI / points as f64;
    let f = |phi: f64| integrals.evaluate(flux, phi);
    let values: Vec<f64> = (0..points).map(|i| f(i as f64 * h)).collect();
    let best = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let y0 = values[(best + points - 1) % points];
    let y1 = values[best];
    let y2 = values[(best + 1) % points];
    let curvature = y0 - 2.0 * y1 + y2;
    let mut phi = best as f64 * h;
    if curvature < 0.0 {
        let shift = 0.5 * (y0 - y2) / curvature;
        if shift.abs() <= 1.0 {
            phi += shift * h;
        }
    }
    let phi = wrap_phase(phi);
    let value = f(phi);
    if value >= y1 {
        (phi, value)
    } else {
        (wrap_phase(best as f64 * h), y1)
    }
}

/// De-rotated coherence density and its integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSeries {
    pub times: Vec<f64>,
    /// `𝒞(t) = −e^{−iΘ(t)−iφ−iθ} 𝒞₁(t)`.
    pub density: Vec<C64>,
    /// `𝒞_sys = ∫ Re 𝒞(t) dt`.
    pub total: f64,
    /// `∫|Im 𝒞| / ∫|𝒞|`, zero when there is no coherence at all.
    pub imag_fraction: f64,
}

/// Coherence density rotated into the frame of the target state. `flux_theta`
/// is the initial relative phase of the flux qubit.
pub fn coherence(
    series: &[ReducedPathQubitMatrix],
    theta_slope: f64,
    phi: f64,
    flux_theta: f64,
) -> CoherenceSeries {
    let times: Vec<f64> = series.iter().map(|s| s.time).collect();
    let density: Vec<C64> = series
        .iter()
        .map(|s| -C64::from_polar(1.0, -(theta_slope * s.time + phi + flux_theta)) * s.coherence_element())
        .collect();
    let re: Vec<f64> = density.iter().map(|z| z.re).collect();
    let im: Vec<f64> = density.iter().map(|z| z.im.abs()).collect();
    let abs: Vec<f64> = density.iter().map(|z| z.norm()).collect();
    let norm = trapezoid(&times, &abs);
    let imag_fraction = if norm > 0.0 { trapezoid(&times, &im) / norm } else { 0.0 };
    CoherenceSeries { total: trapezoid(&times, &re), times, density, imag_fraction }
}

/// `σ_y ⊗ σ_y`, the two-qubit spin flip.
fn spin_flip() -> CMatrix {
    let m = CMatrix::from_vec(2, 2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]);
    kron(&m, &m)
}

/// Per-sample Wootters quantity `max(0, λ₁−λ₂−λ₃−λ₄)` on an unnormalised
/// 4×4 matrix. The flag reports whether a negative eigenvalue beyond round-off
/// had to be clamped to zero.
pub fn concurrence_density(m: &Block4) -> Result<(f64, bool)> {
    let rho = block_to_cmatrix(m).hermitian_part();
    let eig = herm_eig(&rho)?;
    let min_eig = eig.values.last().copied().unwrap_or(0.0);
    let max_eig = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    if min_eig < -NEGATIVE_REJECT {
        return Err(Error::NegativeSpectrum { eigenvalue: min_eig });
    }
    let sqrt_rho = eig.reconstruct_with(|v| v.max(0.0).sqrt());
    let flip = spin_flip();
    let tilde = flip.matmul(&rho.conj()).matmul(&flip);
    let inner = sqrt_rho.matmul(&tilde).matmul(&sqrt_rho).hermitian_part();
    // eigenvalues of R = √(√ρ ρ̃ √ρ) are the square roots of those of the inner product
    let lambda: Vec<f64> = herm_eig(&inner)?.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let c = lambda[0] - lambda[1] - lambda[2] - lambda[3];
    Ok((c.max(0.0), min_eig < -ROUND_OFF * max_eig))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceResult {
    pub density: Vec<f64>,
    /// `C = ∫ C(t) dt`.
    pub total: f64,
    /// Samples whose reduced matrix had a significant negative eigenvalue
    /// clamped to zero.
    pub positivity_repairs: usize,
}

pub fn concurrence(series: &[ReducedPathQubitMatrix]) -> Result<ConcurrenceResult> {
    let mut density = Vec::with_capacity(series.len());
    let mut repairs = 0;
    for s in series {
        let (c, repaired) = concurrence_density(&s.m)?;
        if repaired {
            repairs += 1;
        }
        density.push(c);
    }
    let times: Vec<f64> = series.iter().map(|s| s.time).collect();
    Ok(ConcurrenceResult { total: trapezoid(&times, &density), density, positivity_repairs: repairs })
}

/// Time integral of the reduced matrix after removing the accumulated path
/// phase `Θ(t) + φ` from the left-moving components.
pub fn integrated_derotated(series: &[ReducedPathQubitMatrix], theta_slope: f64, phi: f64) -> Block4 {
    let times: Vec<f64> = series.iter().map(|s| s.time).collect();
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let vals: Vec<C64> = series
                .iter()
                .map(|s| {
                    let half = 0.5 * (theta_slope * s.time + phi);
                    let ui = if i < 2 { half } else { -half };
                    let uj = if j < 2 { half } else { -half };
                    C64::from_polar(1.0, ui - uj) * s.m[i][j]
                })
                .collect();
            out[i][j] = trapezoid_c(&times, &vals);
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    /// Excitation still stored in the system at the end of the window.
    pub truncation_tail: f64,
    pub positivity_repairs: usize,
    /// `|e_R + e_L + loss + tail − 1|`.
    pub ledger_error: f64,
    pub loss: f64,
    pub gamma1_scattered: f64,
    pub coherence_imag_fraction: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub e_r: f64,
    pub e_l: f64,
    pub contrast: Option<f64>,
    /// Raw `F(φ*)`.
    pub fidelity_max: f64,
    /// `F(φ*) / (e_R + e_L)`, the fidelity conditioned on a photon leaving
    /// through the waveguide.
    pub fidelity_renormalized: Option<f64>,
    pub phi_star: f64,
    pub coherence_total: f64,
    pub concurrence: f64,
    /// Fitted slope of Θ(t), `None` when the coherence had too little support.
    pub theta_fit: Option<f64>,
    /// Slope actually used for de-rotation.
    pub theta_slope: f64,
    pub diagnostics: ReportDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    /// Fixed Θ slope; fitted from the coherence when `None`.
    pub theta_slope: Option<f64>,
    pub phi_points: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { theta_slope: None, phi_points: DEFAULT_PHI_POINTS }
    }
}

/// Full post-processing of one run.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: EntanglementReport,
    pub flux: FluxDensities,
    pub reduced: Vec<ReducedPathQubitMatrix>,
    pub coherence: CoherenceSeries,
    pub concurrence_density: Vec<f64>,
    /// Time-integrated reduced matrix with `Θ(t) + φ*` removed.
    pub integrated: Block4,
}

pub fn analyze(
    ts: &TimeSeries,
    p: &SystemParams,
    flux_cfg: &FluxQubitConfig,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    let flux = output_flux(ts, p)?;
    let reduced = reduced_series(ts, p);
    let coh1: Vec<C64> = reduced.iter().map(|r| r.coherence_element()).collect();
    let theta_fit = fit_theta(&ts.times, &coh1).ok().map(|f| f.slope);
    let theta_slope = opts.theta_slope.or(theta_fit).unwrap_or(0.0);
    let integrals = FidelityIntegrals::new(&reduced, theta_slope);
    let (phi_star, fidelity_max) = maximize_fidelity(&integrals, flux_cfg, opts.phi_points);
    let coherence = coherence(&reduced, theta_slope, phi_star, flux_cfg.theta);
    let conc = concurrence(&reduced)?;
    let integrated = integrated_derotated(&reduced, theta_slope, phi_star);

    let (e_r, e_l) = (flux.e_r(), flux.e_l());
    let loss = flux.loss();
    let tail = ts.diagnostics.residual_excitation;
    let total = e_r + e_l;
    let report = EntanglementReport {
        e_r,
        e_l,
        contrast: crate::analytic::contrast(e_r, e_l).ok(),
        fidelity_max,
        fidelity_renormalized: (total > 0.0).then(|| fidelity_max / total),
        phi_star,
        coherence_total: coherence.total,
        concurrence: conc.total,
        theta_fit,
        theta_slope,
        diagnostics: ReportDiagnostics {
            truncation_tail: tail,
            positivity_repairs: conc.positivity_repairs,
            ledger_error: (total + loss + tail - 1.0).abs(),
            loss,
            gamma1_scattered: flux.gamma1_scattered(),
            coherence_imag_fraction: coherence.imag_fraction,
            accepted_steps: ts.diagnostics.accepted_steps,
            rejected_steps: ts.diagnostics.rejected_steps,
            max_trace_error: ts.diagnostics.max_trace_error,
            min_eigenvalue: ts.diagnostics.min_eigenvalue,
        },
    };
    Ok(Analysis { report, flux, reduced, coherence, concurrence_density: conc.density, integrated })
}

impl Analysis {
    /// Per-sample densities: fluxes, coherence and concurrence.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time", "f_R", "f_L", "f_loss", "coherence_re", "coherence_im", "concurrence"])?;
        for i in 0..self.flux.times.len() {
            wr.write_record(&[
                self.flux.times[i].to_string(),
                self.flux.f_r[i].to_string(),
                self.flux.f_l[i].to_string(),
                self.flux.f_loss[i].to_string(),
                self.coherence.density[i].re.to_string(),
                self.coherence.density[i].im.to_string(),
                self.concurrence_density[i].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn pure(psi: [C64; 4]) -> Block4 {
        let mut m = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let t = [0.0, 0.5, 2.0, 3.0];
        let y: Vec<f64> = t.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((trapezoid(&t, &y) - 10.5).abs() < 1e-14);
    }

    #[test]
    fn bell_state_concurrence_is_one() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (cd, _) = concurrence_density(&pure([c(s), ZERO, ZERO, c(-s)])).unwrap();
        assert!((cd - 1.0).abs() < 1e-10);
    }

    #[test]
    fn product_state_concurrence_is_zero() {
        let (cd, _) = concurrence_density(&pure([c(0.6), c(0.8), ZERO, ZERO])).unwrap();
        assert!(cd.abs() < 1e-10);
    }

    #[test]
    fn concurrence_scales_with_weight() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = pure([c(s), ZERO, ZERO, c(s)]);
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v *= 0.25;
            }
        }
        let (cd, _) = concurrence_density(&m).unwrap();
        assert!((cd - 0.25).abs() < 1e-12);
    }

    #[test]
    fn strongly_negative_input_is_rejected() {
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = c(1.0);
        m[1][1] = c(-0.1);
        assert!(matches!(concurrence_density(&m), Err(Error::NegativeSpectrum { .. })));
    }

    #[test]
    fn theta_fit_on_synthetic_phase() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 5.0).collect();
        let z: Vec<C64> = t.iter().map(|&x| C64::from_polar(1.0, 0.005 * x + 0.3)).collect();
        let fit = fit_theta(&t, &z).unwrap();
        assert!((fit.slope - 0.005).abs() < 1e-6);
        assert!((fit.intercept - 0.3).abs() < 1e-6);
    }

    #[test]
    fn theta_fit_needs_support() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let mut z = vec![ZERO; 100];
        z[50] = c(1.0);
        assert_eq!(fit_theta(&t, &z), Err(Error::InsufficientSupport { found: 1, needed: 10 }));
        assert!(fit_theta(&t, &vec![ZERO; 100]).is_err());
    }

    fn synthetic_series(alpha: f64, beta: C64, slope: f64, phi0: f64) -> Vec<ReducedPathQubitMatrix> {
        // α|R,g⟩ − β e^{i(slope t + φ₀)}|L,e⟩ with a unit-area envelope
        let n = 4001;
        let width = 50.0;
        (0..n)
            .map(|i| {
                let t = i as f64 * 0.25;
                let env = (-(t - 500.0).powi(2) / (2.0 * width * width)).exp() / (width * (2.0 * PI).sqrt());
                let amp = env.sqrt();
                let psi = [
                    c(alpha * amp),
                    ZERO,
                    ZERO,
                    -beta * C64::from_polar(amp, slope * t + phi0),
                ];
                ReducedPathQubitMatrix { time: t, m: pure(psi) }
            })
            .collect()
    }

    #[test]
    fn ideal_target_has_unit_fidelity_at_its_phase() {
        let flux = FluxQubitConfig::superposition(0.6, 0.4);
        let series = synthetic_series(0.6, flux.beta(), 0.002, 0.22);
        let integrals = FidelityIntegrals::new(&series, 0.002);
        let (phi, f) = maximize_fidelity(&integrals, &flux, DEFAULT_PHI_POINTS);
        assert!((phi - 0.22).abs() < 1e-4, "phi* = {phi}");
        assert!((f - 1.0).abs() < 1e-6, "F = {f}");
        let coh = coherence(&series, 0.002, phi, flux.theta);
        assert!((coh.total - 0.6 * 0.8).abs() < 1e-5);
        assert!(coh.imag_fraction < 1e-3);
    }

    #[test]
    fn fidelity_is_periodic_and_matches_closed_form_maximum() {
        let flux = FluxQubitConfig::balanced();
        let series = synthetic_series(0.7, C64::from_polar(0.5, 1.0), 0.0, -0.4);
        let integrals = FidelityIntegrals::new(&series, 0.0);
        for phi in [0.0, 0.3, 2.0] {
            assert!((integrals.evaluate(&flux, phi) - integrals.evaluate(&flux, phi + 2.0 * PI)).abs() < 1e-12);
        }
        let [a, b] = flux.amplitudes();
        let exact = a.norm_sqr() * integrals.transmitted_g
            + b.norm_sqr() * integrals.reflected_e
            + 2.0 * (a * b.conj() * integrals.cross).norm();
        let (_, f) = maximize_fidelity(&integrals, &flux, DEFAULT_PHI_POINTS);
        assert!((f - exact).abs() < 1e-6);
    }

    #[test]
    fn ground_flux_fidelity_is_transmission() {
        let flux = FluxQubitConfig::ground();
        let series = synthetic_series(0.9, c(0.3), 0.0, 0.0);
        let integrals = FidelityIntegrals::new(&series, 0.0);
        for phi in [0.0, 1.0, 3.0] {
            assert!((integrals.evaluate(&flux, phi) - integrals.transmitted_g).abs() < 1e-14);
        }
        assert!((integrals.transmitted_g - 0.81).abs() < 1e-6);
    }

    #[test]
    fn derotation_removes_linear_phase() {
        let flux = FluxQubitConfig::balanced();
        let series = synthetic_series(flux.alpha, flux.beta(), 0.003, 0.1);
        let m = integrated_derotated(&series, 0.003, 0.1);
        let s = 0.5;
        assert!((m[RG][RG].re - s).abs() < 1e-6);
        assert!((m[LE][RG] + c(s)).norm() < 1e-6, "{:?}", m[LE][RG]);
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(2.0 * PI - 0.1) + 0.1).abs() < 1e-14);
        assert!((wrap_phase(0.2) - 0.2).abs() < 1e-15);
        assert!((wrap_phase(PI) - PI).abs() < 1e-15);
    }
}
