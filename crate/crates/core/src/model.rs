//! Physical parameters, composite-space operators and the generator of the
//! cascaded master equation.
//!
//! All rates and detunings are in units of the single-channel waveguide emission
//! rate Γ_wg, so Γ_wg = 1 throughout and times are in units of 1/Γ_wg (with the
//! group velocity set to one, positions along the waveguide are times as well).
//!
//! Hilbert ordering is `cavity ⊗ SiV ⊗ flux` with bases `(|0⟩, |1⟩)`,
//! `(|1⟩, |2⟩, |3⟩)` and `(|g⟩, |e⟩)`; composite index is `6c + 2s + f`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, superop_left, superop_right, superop_sandwich, CMatrix};

pub const CAVITY_DIM: usize = 2;
pub const SIV_DIM: usize = 3;
pub const FLUX_DIM: usize = 2;
pub const DIM: usize = CAVITY_DIM * SIV_DIM * FLUX_DIM;
pub const LIOUVILLE_DIM: usize = DIM * DIM;

/// Default Γ_wg/2π anchor for unit conversion, in Hz.
pub const DEFAULT_GAMMA_WG_HZ: f64 = 3.0e8;

const CONSISTENCY_TOL: f64 = 1e-9;

/// Composite basis index of `|c, s, f⟩` with `s ∈ {1, 2, 3}` given as `0..3`.
pub fn basis_index(cavity: usize, siv: usize, flux: usize) -> usize {
    debug_assert!(cavity < CAVITY_DIM && siv < SIV_DIM && flux < FLUX_DIM);
    cavity * SIV_DIM * FLUX_DIM + siv * FLUX_DIM + flux
}

/// Flux-qubit basis label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxState {
    /// `|g⟩`, σ_z′ eigenvalue −1.
    G,
    /// `|e⟩`, σ_z′ eigenvalue +1.
    E,
}

impl FluxState {
    pub fn sigma_z(self) -> f64 {
        match self {
            FluxState::G => -1.0,
            FluxState::E => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            FluxState::G => 0,
            FluxState::E => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FluxState::G => "g",
            FluxState::E => "e",
        }
    }
}

/// Rates and detunings of the emitter, source and flux qubit, in units of Γ_wg.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystemParams")]
pub struct SystemParams {
    pub delta1: f64,
    pub delta2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub omega_c: f64,
    /// `|3⟩ → |1⟩` decay.
    pub gamma1: f64,
    /// `|3⟩ → |2⟩` decay outside the waveguide.
    pub gamma2: f64,
    /// Fraction of the source-cavity decay that enters the waveguide.
    pub xi_c: f64,
    /// Waveguide branching `Γ_wg / Γ₂`.
    pub xi_2: f64,
    pub gamma_f: f64,
    pub gamma_star: f64,
    /// Γ_wg/2π in Hz, used only for unit conversion.
    pub gamma_wg_hz: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystemParams {
    #[serde(default)]
    delta1: f64,
    #[serde(default)]
    delta2: f64,
    #[serde(default)]
    eta1: f64,
    #[serde(default)]
    eta2: f64,
    #[serde(default)]
    eta3: f64,
    #[serde(default)]
    omega_c: f64,
    #[serde(default)]
    gamma1: f64,
    gamma2: Option<f64>,
    #[serde(default = "one")]
    xi_c: f64,
    xi_2: Option<f64>,
    #[serde(default)]
    gamma_f: f64,
    #[serde(default)]
    gamma_star: f64,
    #[serde(default = "default_gamma_wg_hz")]
    gamma_wg_hz: f64,
}

fn one() -> f64 {
    1.0
}

fn default_gamma_wg_hz() -> f64 {
    DEFAULT_GAMMA_WG_HZ
}

impl TryFrom<RawSystemParams> for SystemParams {
    type Error = Error;

    fn try_from(r: RawSystemParams) -> Result<Self> {
        // Γ₂ = γ₂ + 2Γ_wg ties γ₂ and ξ₂ together; either may be omitted.
        let (gamma2, xi_2) = match (r.gamma2, r.xi_2) {
            (None, None) => (0.0, 0.5),
            (Some(g), None) => (g, 1.0 / (g + 2.0)),
            (None, Some(x)) => (1.0 / x - 2.0, x),
            (Some(g), Some(x)) => (g, x),
        };
        let p = SystemParams {
            delta1: r.delta1,
            delta2: r.delta2,
            eta1: r.eta1,
            eta2: r.eta2,
            eta3: r.eta3,
            omega_c: r.omega_c,
            gamma1: r.gamma1,
            gamma2,
            xi_c: r.xi_c,
            xi_2,
            gamma_f: r.gamma_f,
            gamma_star: r.gamma_star,
            gamma_wg_hz: r.gamma_wg_hz,
        };
        p.validate()?;
        Ok(p)
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            delta1: 0.0,
            delta2: 0.0,
            eta1: 0.0,
            eta2: 0.0,
            eta3: 0.0,
            omega_c: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            xi_c: 1.0,
            xi_2: 0.5,
            gamma_f: 0.0,
            gamma_star: 0.0,
            gamma_wg_hz: DEFAULT_GAMMA_WG_HZ,
        }
    }
}

impl SystemParams {
    /// Standard routing working point: Ω_c = 0.03, η = 10⁻³, Δ₁ = 0,
    /// Δ₂ = 2η, lossless emitter and ideal extraction.
    pub fn routing_point() -> Self {
        let eta = 1e-3;
        SystemParams { delta2: 2.0 * eta, omega_c: 0.03, ..Self::default() }.with_eta(eta)
    }

    /// Sets η₁ = η₂ = η₃ = η.
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta1 = eta;
        self.eta2 = eta;
        self.eta3 = eta;
        self
    }

    /// Sets γ₂ and the matching branching ratio ξ₂ = 1/(γ₂ + 2).
    pub fn with_gamma2(mut self, gamma2: f64) -> Self {
        self.gamma2 = gamma2;
        self.xi_2 = 1.0 / (gamma2 + 2.0);
        self
    }

    /// Total `|3⟩ → |2⟩` decay Γ₂ = Γ_wg/ξ₂.
    pub fn big_gamma2(&self) -> f64 {
        1.0 / self.xi_2
    }

    /// Emission rate into each waveguide direction, ξ₂Γ₂.
    pub fn waveguide_rate(&self) -> f64 {
        self.xi_2 * self.big_gamma2()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("eta3", self.eta3),
            ("omega_c", self.omega_c),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("xi_c", self.xi_c),
            ("xi_2", self.xi_2),
            ("gamma_f", self.gamma_f),
            ("gamma_star", self.gamma_star),
            ("gamma_wg_hz", self.gamma_wg_hz),
        ];
        for (field, v) in all {
            if !v.is_finite() {
                return Err(invalid(field, format!("{v} is not finite")));
            }
        }
        for (field, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma_f", self.gamma_f),
            ("gamma_star", self.gamma_star),
        ] {
            if v < 0.0 {
                return Err(invalid(field, format!("rate {v} is negative")));
            }
        }
        if !(0.0..=1.0).contains(&self.xi_c) {
            return Err(invalid("xi_c", format!("{} outside [0, 1]", self.xi_c)));
        }
        if !(self.xi_2 > 0.0 && self.xi_2 <= 0.5) {
            return Err(invalid("xi_2", format!("{} outside (0, 1/2]", self.xi_2)));
        }
        let implied = 1.0 / self.xi_2 - 2.0;
        if (implied - self.gamma2).abs() > CONSISTENCY_TOL * (1.0 + self.gamma2) {
            return Err(invalid(
                "gamma2",
                format!("{} inconsistent with xi_2 = {} (implies gamma2 = {implied})", self.gamma2, self.xi_2),
            ));
        }
        if self.gamma_wg_hz <= 0.0 {
            return Err(invalid("gamma_wg_hz", "must be positive".into()));
        }
        Ok(())
    }
}

fn invalid(field: &'static str, reason: String) -> Error {
    Error::InvalidParameter { field, reason }
}

/// Time-dependent decay profile of the source cavity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPulseSpec")]
pub struct PulseSpec {
    pub tau_p: f64,
    pub tau: f64,
    pub peak: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulseSpec {
    tau_p: f64,
    tau: Option<f64>,
    #[serde(default = "default_peak")]
    peak: f64,
}

fn default_peak() -> f64 {
    2.0
}

impl TryFrom<RawPulseSpec> for PulseSpec {
    type Error = Error;
    fn try_from(r: RawPulseSpec) -> Result<Self> {
        let p = PulseSpec { tau_p: r.tau_p, tau: r.tau.unwrap_or(5.5 * r.tau_p), peak: r.peak };
        p.validate()?;
        Ok(p)
    }
}

impl PulseSpec {
    /// Pulse with the default delay 5.5τ_p and peak rate 2Γ_wg.
    pub fn new(tau_p: f64) -> Self {
        PulseSpec { tau_p, tau: 5.5 * tau_p, peak: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_p.is_finite() && self.tau_p > 0.0) {
            return Err(invalid("tau_p", format!("{} must be positive", self.tau_p)));
        }
        if !(self.peak.is_finite() && self.peak >= 0.0) {
            return Err(invalid("peak", format!("{} must be non-negative", self.peak)));
        }
        if !(self.tau >= 5.0 * self.tau_p) {
            return Err(invalid("tau", format!("{} is shorter than 5 tau_p", self.tau)));
        }
        Ok(())
    }

    /// Default end of the integration window, τ + 6τ_p.
    pub fn default_t_end(&self) -> f64 {
        self.tau + 6.0 * self.tau_p
    }
}

/// Source-cavity decay rate κ_c(t), a Gaussian of width τ_p centred on τ.
pub fn kappa_c(t: f64, pulse: &PulseSpec) -> f64 {
    let x = (t - pulse.tau) / pulse.tau_p;
    pulse.peak * (-0.5 * x * x).exp()
}

/// Initial flux-qubit state `α|g⟩ + |β|e^{iθ}|e⟩` and its (inactive) drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFluxQubitConfig")]
pub struct FluxQubitConfig {
    pub alpha: f64,
    pub beta_abs: f64,
    pub theta: f64,
    pub omega_mu: f64,
    /// Bias energy ε; kept for reference, not used by the dynamics.
    pub epsilon: f64,
    /// Tunnel splitting; kept for reference, not used by the dynamics.
    pub tunnel_t: f64,
    /// Microwave drive frequency; kept for reference, not used by the dynamics.
    pub omega_drive: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFluxQubitConfig {
    alpha: f64,
    beta_abs: Option<f64>,
    #[serde(default)]
    theta: f64,
    #[serde(default)]
    omega_mu: f64,
    #[serde(default)]
    epsilon: f64,
    #[serde(default)]
    tunnel_t: f64,
    #[serde(default)]
    omega_drive: f64,
}

impl TryFrom<RawFluxQubitConfig> for FluxQubitConfig {
    type Error = Error;
    fn try_from(r: RawFluxQubitConfig) -> Result<Self> {
        let beta_abs = r.beta_abs.unwrap_or_else(|| (1.0 - r.alpha * r.alpha).max(0.0).sqrt());
        let f = FluxQubitConfig {
            alpha: r.alpha,
            beta_abs,
            theta: r.theta,
            omega_mu: r.omega_mu,
            epsilon: r.epsilon,
            tunnel_t: r.tunnel_t,
            omega_drive: r.omega_drive,
        };
        f.validate()?;
        Ok(f)
    }
}

impl FluxQubitConfig {
    /// `α|g⟩ + √(1−α²) e^{iθ}|e⟩`.
    pub fn superposition(alpha: f64, theta: f64) -> Self {
        FluxQubitConfig {
            alpha,
            beta_abs: (1.0 - alpha * alpha).max(0.0).sqrt(),
            theta,
            omega_mu: 0.0,
            epsilon: 0.0,
            tunnel_t: 0.0,
            omega_drive: 0.0,
        }
    }

    pub fn ground() -> Self {
        Self::superposition(1.0, 0.0)
    }

    pub fn excited() -> Self {
        Self::superposition(0.0, 0.0)
    }

    /// `(|g⟩ + |e⟩)/√2`.
    pub fn balanced() -> Self {
        Self::superposition(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    }

    pub fn basis(state: FluxState) -> Self {
        match state {
            FluxState::G => Self::ground(),
            FluxState::E => Self::excited(),
        }
    }

    pub fn beta(&self) -> C64 {
        C64::from_polar(self.beta_abs, self.theta)
    }

    /// Amplitudes `(α, β)` in the `(|g⟩, |e⟩)` basis.
    pub fn amplitudes(&self) -> [C64; 2] {
        [C64::new(self.alpha, 0.0), self.beta()]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(invalid("alpha", format!("{} must be a non-negative real", self.alpha)));
        }
        if !(self.beta_abs >= 0.0) {
            return Err(invalid("beta_abs", format!("{} must be non-negative", self.beta_abs)));
        }
        let norm = self.alpha * self.alpha + self.beta_abs * self.beta_abs;
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid("beta_abs", format!("|alpha|^2 + |beta|^2 = {norm}, expected 1")));
        }
        if !self.theta.is_finite() || !self.omega_mu.is_finite() {
            return Err(invalid("theta", "phase and drive must be finite".into()));
        }
        Ok(())
    }
}

/// Operators embedded in the 12-dimensional composite space.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    /// Cavity lowering operator.
    pub a: CMatrix,
    /// `s[l][j] = |l+1⟩⟨j+1|` on the SiV factor.
    pub s: [[CMatrix; 3]; 3],
    /// `σ_z′ = |e⟩⟨e| − |g⟩⟨g|`.
    pub sigma_z_f: CMatrix,
    /// `σ_ge = |g⟩⟨e|`.
    pub sigma_ge: CMatrix,
    pub p_g: CMatrix,
    pub p_e: CMatrix,
    pub identity: CMatrix,
}

impl OperatorSet {
    /// `S_lj` with 1-based SiV labels.
    pub fn siv(&self, l: usize, j: usize) -> &CMatrix {
        &self.s[l - 1][j - 1]
    }

    /// `|l⟩⟨k|` on the flux factor.
    pub fn flux_unit(&self, l: FluxState, k: FluxState) -> CMatrix {
        embed_flux(&CMatrix::unit(FLUX_DIM, l.index(), k.index()))
    }

    pub fn number(&self) -> CMatrix {
        self.a.adjoint().matmul(&self.a)
    }
}

fn embed_cavity(m: &CMatrix) -> CMatrix {
    kron(&kron(m, &CMatrix::identity(SIV_DIM)), &CMatrix::identity(FLUX_DIM))
}

fn embed_siv(m: &CMatrix) -> CMatrix {
    kron(&kron(&CMatrix::identity(CAVITY_DIM), m), &CMatrix::identity(FLUX_DIM))
}

fn embed_flux(m: &CMatrix) -> CMatrix {
    kron(&CMatrix::identity(CAVITY_DIM * SIV_DIM), m)
}

pub fn build_operators() -> OperatorSet {
    let a = embed_cavity(&CMatrix::unit(CAVITY_DIM, 0, 1));
    let s = std::array::from_fn(|l| std::array::from_fn(|j| embed_siv(&CMatrix::unit(SIV_DIM, l, j))));
    OperatorSet {
        a,
        s,
        sigma_z_f: embed_flux(&CMatrix::diag_real(&[-1.0, 1.0])),
        sigma_ge: embed_flux(&CMatrix::unit(FLUX_DIM, 0, 1)),
        p_g: embed_flux(&CMatrix::unit(FLUX_DIM, 0, 0)),
        p_e: embed_flux(&CMatrix::unit(FLUX_DIM, 1, 1)),
        identity: CMatrix::identity(DIM),
    }
}

/// Rotating-frame Hamiltonian
/// `−Δ₂S₂₂ − Δ₁S₁₁ + Ω_c(S₃₁ + S₁₃) + (η₁S₁₁ − η₂S₂₂ − η₃S₃₃)σ_z′ + (Ω_μ/2)σ_z′`.
pub fn hamiltonian(p: &SystemParams, ops: &OperatorSet, omega_mu: f64) -> CMatrix {
    let s = |l, j| ops.siv(l, j);
    let mut h = s(2, 2).scale_real(-p.delta2) - s(1, 1).scale_real(p.delta1);
    h = h + (s(3, 1) + s(1, 3)).scale_real(p.omega_c);
    let shifts = s(1, 1).scale_real(p.eta1) - s(2, 2).scale_real(p.eta2) - s(3, 3).scale_real(p.eta3);
    h = h + shifts.matmul(&ops.sigma_z_f);
    if omega_mu != 0.0 {
        h = h + ops.sigma_z_f.scale_real(0.5 * omega_mu);
    }
    h
}

/// Lindblad dissipator `γ/2 (2AρA† − A†Aρ − ρA†A)` as a Liouville-space matrix.
pub fn dissipator(rate: f64, a: &CMatrix) -> CMatrix {
    let ada = a.adjoint().matmul(a);
    let jump = superop_sandwich(a, &a.adjoint());
    let anti = superop_left(&ada) + superop_right(&ada);
    (jump - anti.scale_real(0.5)).scale_real(rate)
}

/// `−i[H, ·]` as a Liouville-space matrix.
pub fn commutator_superop(h: &CMatrix) -> CMatrix {
    (superop_left(h) - superop_right(h)).scale(C64::new(0.0, -1.0))
}

/// Generator split by its dependence on the source decay:
/// `L(t) = l0 + κ_c(t)·l_cav + √κ_c(t)·l_casc`.
#[derive(Clone, Debug)]
pub struct LiouvillianParts {
    pub l0: CMatrix,
    pub l_cav: CMatrix,
    pub l_casc: CMatrix,
}

impl LiouvillianParts {
    /// Dense generator at a given source decay rate.
    pub fn assemble(&self, kappa: f64) -> CMatrix {
        &(&self.l0 + &self.l_cav.scale_real(kappa)) + &self.l_casc.scale_real(kappa.sqrt())
    }
}

pub fn liouvillian_parts(p: &SystemParams, ops: &OperatorSet, omega_mu: f64) -> LiouvillianParts {
    let h = hamiltonian(p, ops, omega_mu);
    let flux_z = &ops.p_e - &ops.p_g;
    let l0 = commutator_superop(&h)
        + dissipator(p.gamma1, ops.siv(1, 3))
        + dissipator(p.big_gamma2(), ops.siv(2, 3))
        + dissipator(p.gamma_f, &ops.sigma_ge)
        + dissipator(p.gamma_star, &flux_z);

    let l_cav = dissipator(1.0, &ops.a);

    // Source output √(ξ_c κ_c) a drives the emitter's right-moving channel
    // √(ξ₂Γ₂) S₂₃; the emitter absorbs through S₃₂.
    let a = &ops.a;
    let ad = a.adjoint();
    let s32 = ops.siv(3, 2);
    let s23 = ops.siv(2, 3);
    let coupling = (p.xi_c * p.waveguide_rate()).sqrt();
    let l_casc = (superop_left(&s32.matmul(a)) - superop_sandwich(a, s32) + superop_right(&ad.matmul(s23))
        - superop_sandwich(s23, &ad))
    .scale_real(-coupling);

    LiouvillianParts { l0, l_cav, l_casc }
}
