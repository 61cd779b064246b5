//! Time integration of the cascaded master equation.
//!
//! The state is integrated as a column-stacked Liouville vector with an
//! embedded Dormand–Prince 5(4) pair. The generator is kept as three sparse
//! parts so that each right-hand side costs one pass over their nonzeros.

use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, unvec, vec, CMatrix};
use crate::model::{
    build_operators, kappa_c, liouvillian_parts, FluxQubitConfig, FluxState, LiouvillianParts, OperatorSet,
    PulseSpec, SystemParams, CAVITY_DIM, DIM, LIOUVILLE_DIM, SIV_DIM,
};

/// Trace drift that aborts a run.
pub const TRACE_ABORT: f64 = 1e-6;
/// Most negative eigenvalue tolerated before aborting a run.
pub const EIGEN_ABORT: f64 = -1e-5;
/// Default bound on `h·ρ(L)`. The real-axis stability limit of the
/// Dormand–Prince pair is about 3.3; staying below it keeps residual
/// populations decaying once they fall under the absolute tolerance, where the
/// error estimate no longer constrains the step.
pub const STABLE_STEP: f64 = 2.5;

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub matrix: CMatrix,
    pub time: f64,
}

impl DensityMatrix {
    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.matmul(&self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let e = herm_eig(&self.matrix.hermitian_part())?;
        Ok(e.values.last().copied().unwrap_or(0.0))
    }

    pub fn expect(&self, op: &CMatrix) -> C64 {
        expect(&self.matrix, op)
    }
}

/// `Tr[ρ O]`.
pub fn expect(rho: &CMatrix, op: &CMatrix) -> C64 {
    let n = rho.rows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let o = op[(j, i)];
            if o.re != 0.0 || o.im != 0.0 {
                acc += rho[(i, j)] * o;
            }
        }
    }
    acc
}

/// `|1⟩_cav ⊗ |2⟩_SiV ⊗ (α|g⟩ + β|e⟩)` as a pure density matrix.
pub fn initial_state(flux: &FluxQubitConfig) -> DensityMatrix {
    let mut psi = vec![C64::new(0.0, 0.0); DIM];
    let [alpha, beta] = flux.amplitudes();
    psi[crate::model::basis_index(1, 1, 0)] = alpha;
    psi[crate::model::basis_index(1, 1, 1)] = beta;
    DensityMatrix { matrix: CMatrix::outer(&psi, &psi), time: 0.0 }
}

/// Emission operators entering the output fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Emitter {
    /// Source cavity `a`.
    Cavity,
    /// Emitter lowering `S₂₃`.
    Siv,
}

/// Second moments `G[i][j] = Tr[ρ X_i† |l_i⟩⟨k_j| X_j]` with
/// `i = 2·emitter + flux` over `(a, g), (a, e), (S₂₃, g), (S₂₃, e)`.
pub type MomentBlock = [[C64; 4]; 4];

pub fn moment_index(emitter: Emitter, flux: FluxState) -> usize {
    let e = match emitter {
        Emitter::Cavity => 0,
        Emitter::Siv => 1,
    };
    2 * e + flux.index()
}

/// Precomputed operators `X_i† |l_i⟩⟨k_j| X_j` for [`MomentBlock`].
#[derive(Clone, Debug)]
pub struct MomentOperators {
    ops: Vec<CMatrix>,
}

impl MomentOperators {
    pub fn new(ops: &OperatorSet) -> Self {
        let emitters = [(Emitter::Cavity, &ops.a), (Emitter::Siv, ops.siv(2, 3))];
        let fluxes = [FluxState::G, FluxState::E];
        let mut out = Vec::with_capacity(16);
        for &(ei, xi) in &emitters {
            for &li in &fluxes {
                for &(ej, xj) in &emitters {
                    for &kj in &fluxes {
                        debug_assert_eq!(out.len(), 4 * moment_index(ei, li) + moment_index(ej, kj));
                        let op = xi.adjoint().matmul(&ops.flux_unit(li, kj)).matmul(xj);
                        out.push(op);
                    }
                }
            }
        }
        MomentOperators { ops: out }
    }

    pub fn evaluate(&self, rho: &CMatrix) -> MomentBlock {
        let mut g = [[C64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                g[i][j] = expect(rho, &self.ops[4 * i + j]);
            }
        }
        g
    }
}

/// Compressed sparse-row Liouville-space matrix.
#[derive(Clone, Debug)]
struct SparseOp {
    row_start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<C64>,
}

impl SparseOp {
    fn from_dense(m: &CMatrix) -> Self {
        let mut row_start = vec![0];
        let mut col = Vec::new();
        let mut val = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    col.push(j);
                    val.push(v);
                }
            }
            row_start.push(col.len());
        }
        SparseOp { row_start, col, val }
    }

    fn nnz(&self) -> usize {
        self.val.len()
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[C64]) -> C64 {
        let (s, e) = (self.row_start[i], self.row_start[i + 1]);
        let mut acc = C64::new(0.0, 0.0);
        for k in s..e {
            acc += self.val[k] * x[self.col[k]];
        }
        acc
    }
}

/// Sparse form of `L0 + κ·L_cav + √κ·L_casc`.
#[derive(Clone, Debug)]
pub struct Generator {
    l0: SparseOp,
    l_cav: SparseOp,
    l_casc: SparseOp,
    pulse: PulseSpec,
}

impl Generator {
    pub fn new(parts: &LiouvillianParts, pulse: &PulseSpec) -> Self {
        Generator {
            l0: SparseOp::from_dense(&parts.l0),
            l_cav: SparseOp::from_dense(&parts.l_cav),
            l_casc: SparseOp::from_dense(&parts.l_casc),
            pulse: pulse.clone(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.l0.nnz() + self.l_cav.nnz() + self.l_casc.nnz()
    }

    /// Power-iteration estimate of the spectral radius of `L` at the pulse
    /// peak, where the cavity damping is largest.
    pub fn spectral_radius(&self) -> f64 {
        const ITERATIONS: usize = 400;
        let mut x: Vec<C64> =
            (0..LIOUVILLE_DIM).map(|i| C64::new(1.0 + (i as f64 * 0.618).fract(), (i as f64 * 0.414).fract())).collect();
        let mut y = vec![C64::new(0.0, 0.0); LIOUVILLE_DIM];
        let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut log_growth = 0.0;
        let mut counted = 0;
        for it in 0..ITERATIONS {
            self.apply(self.pulse.tau, &x, &mut y);
            let n = norm(&y);
            if !(n > 0.0) {
                return 0.0;
            }
            if it >= ITERATIONS / 2 {
                log_growth += n.ln();
                counted += 1;
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / n;
            }
        }
        (log_growth / counted as f64).exp()
    }

    /// `out = L(t)·x`.
    pub fn apply(&self, t: f64, x: &[C64], out: &mut [C64]) {
        let kappa = kappa_c(t, &self.pulse);
        let root = kappa.sqrt();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.l0.row_dot(i, x) + self.l_cav.row_dot(i, x) * kappa + self.l_casc.row_dot(i, x) * root;
        }
    }
}

/// Integrator and sampling settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    /// Number of uniformly spaced samples on `[0, t_end]`, endpoints included.
    pub samples: usize,
    /// End of the integration window; `None` means τ + 6τ_p.
    pub t_end: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    /// Keep the full density matrix at every sample.
    pub store_states: bool,
    pub max_steps: usize,
    /// Upper bound on the step size; `None` derives one from the generator's
    /// spectral bound so that decaying modes stay inside the stability region.
    pub max_step: Option<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { samples: 4000, t_end: None, rtol: 1e-8, atol: 1e-10, store_states: false, max_steps: 50_000_000, max_step: None }
    }
}

/// Run statistics and the worst physicality readings over all samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolveDiagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    /// `⟨a†a⟩ + ⟨S₃₃⟩ + ⟨S₁₁⟩` left at `t_end`.
    pub residual_excitation: f64,
}

/// Sampled observables of one run.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    /// Named real channels, all sampled on `times`.
    pub channels: Vec<(String, Vec<f64>)>,
    pub moments: Vec<MomentBlock>,
    pub rho_samples: Option<Vec<CMatrix>>,
    pub diagnostics: EvolveDiagnostics,
}

pub const CH_KAPPA: &str = "kappa_c";
pub const CH_CAVITY: &str = "n_cavity";
pub const CH_P3: &str = "p_s33";
pub const CH_P1: &str = "p_s11";
pub const CH_PG: &str = "p_flux_g";
pub const CH_PE: &str = "p_flux_e";
pub const CH_TRACE: &str = "trace";

const CHANNEL_NAMES: [&str; 7] = [CH_KAPPA, CH_CAVITY, CH_P3, CH_P1, CH_PG, CH_PE, CH_TRACE];

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// *Panics* if the channel does not exist.
    pub fn channel(&self, name: &str) -> &[f64] {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .unwrap_or_else(|| panic!("unknown channel `{name}`"))
    }

    /// Total stored excitation `⟨a†a⟩ + ⟨S₃₃⟩ + ⟨S₁₁⟩` per sample.
    pub fn stored_excitation(&self) -> Vec<f64> {
        let (c, p3, p1) = (self.channel(CH_CAVITY), self.channel(CH_P3), self.channel(CH_P1));
        (0..self.len()).map(|i| c[i] + p3[i] + p1[i]).collect()
    }

    /// CSV with `time` first and one column per channel.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend(self.channels.iter().map(|(n, _)| n.clone()));
        wr.write_record(&header)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.channels.iter().map(|(_, v)| v[i].to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Dopri<'a> {
    gen: &'a Generator,
    rtol: f64,
    atol: f64,
    k: [Vec<C64>; 7],
    stage: Vec<C64>,
    y_new: Vec<C64>,
    fac_old: f64,
    accepted: usize,
    rejected: usize,
    evals: usize,
}

impl<'a> Dopri<'a> {
    fn new(gen: &'a Generator, rtol: f64, atol: f64) -> Self {
        let z = vec![C64::new(0.0, 0.0); LIOUVILLE_DIM];
        Dopri {
            gen,
            rtol,
            atol,
            k: std::array::from_fn(|_| z.clone()),
            stage: z.clone(),
            y_new: z,
            fac_old: 1e-4,
            accepted: 0,
            rejected: 0,
            evals: 0,
        }
    }

    fn combine(&mut self, y: &[C64], h: f64, coeffs: &[(usize, f64)]) {
        for (i, s) in self.stage.iter_mut().enumerate() {
            let mut acc = y[i];
            for &(j, c) in coeffs {
                acc += self.k[j][i] * (h * c);
            }
            *s = acc;
        }
    }

    fn eval(&mut self, t: f64, into: usize) {
        let (stage, k) = (&self.stage, &mut self.k);
        self.gen.apply(t, stage, &mut k[into]);
        self.evals += 1;
    }

    /// Attempts one step of size `h` from `(t, y)`; `k[0]` must hold `f(t, y)`.
    /// Returns the scaled error norm; on acceptance `y_new` and `k[6]` are valid.
    fn attempt(&mut self, t: f64, y: &[C64], h: f64) -> f64 {
        self.combine(y, h, &[(0, A21)]);
        self.eval(t + C2 * h, 1);
        self.combine(y, h, &[(0, A31), (1, A32)]);
        self.eval(t + C3 * h, 2);
        self.combine(y, h, &[(0, A41), (1, A42), (2, A43)]);
        self.eval(t + C4 * h, 3);
        self.combine(y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        self.eval(t + C5 * h, 4);
        self.combine(y, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        self.eval(t + h, 5);
        self.combine(y, h, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)]);
        self.y_new.copy_from_slice(&self.stage);
        self.eval(t + h, 6);

        let mut sum = 0.0;
        for i in 0..y.len() {
            let e = (self.k[0][i] * E1
                + self.k[2][i] * E3
                + self.k[3][i] * E4
                + self.k[4][i] * E5
                + self.k[5][i] * E6
                + self.k[6][i] * E7)
                * h;
            let sc = self.atol + self.rtol * y[i].norm().max(self.y_new[i].norm());
            sum += e.norm_sqr() / (sc * sc);
        }
        (sum / y.len() as f64).sqrt()
    }
}

/// Integrates `dρ/dt = L(t)ρ` from the pure initial state and samples the
/// observables needed downstream.
pub fn evolve(
    params: &SystemParams,
    pulse: &PulseSpec,
    flux: &FluxQubitConfig,
    opts: &EvolveOptions,
) -> Result<TimeSeries> {
    params.validate()?;
    pulse.validate()?;
    flux.validate()?;
    let t_end = opts.t_end.unwrap_or_else(|| pulse.default_t_end());
    if !(t_end >= pulse.tau + 5.0 * pulse.tau_p) {
        return Err(Error::InvalidParameter {
            field: "t_end",
            reason: format!("{t_end} does not cover the pulse (needs >= tau + 5 tau_p)"),
        });
    }
    if opts.samples < 2 {
        return Err(Error::InvalidParameter { field: "samples", reason: "need at least two samples".into() });
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidParameter { field: "rtol", reason: "tolerances must be positive".into() });
    }

    let ops = build_operators();
    let parts = liouvillian_parts(params, &ops, flux.omega_mu);
    let gen = Generator::new(&parts, pulse);
    let moment_ops = MomentOperators::new(&ops);
    let observables = [
        ops.number(),
        ops.siv(3, 3).clone(),
        ops.siv(1, 1).clone(),
        ops.p_g.clone(),
        ops.p_e.clone(),
    ];

    let n = opts.samples;
    let times: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
    let mut channels: Vec<Vec<f64>> = vec![Vec::with_capacity(n); CHANNEL_NAMES.len()];
    let mut moments = Vec::with_capacity(n);
    let mut stored = opts.store_states.then(|| Vec::with_capacity(n));
    let mut diag = EvolveDiagnostics { min_eigenvalue: f64::INFINITY, ..Default::default() };

    let mut y = vec(&initial_state(flux).matrix);
    let mut record = |t: f64, y: &mut Vec<C64>, diag: &mut EvolveDiagnostics| -> Result<()> {
        let raw = unvec(y, DIM);
        let herm_err = raw.hermiticity_error();
        let rho = raw.hermitian_part();
        *y = vec(&rho);
        let tr = rho.trace();
        let trace_err = (tr - 1.0).norm();
        let lmin = herm_eig(&rho)?.values[DIM - 1];
        diag.max_trace_error = diag.max_trace_error.max(trace_err);
        diag.max_hermiticity_error = diag.max_hermiticity_error.max(herm_err);
        diag.min_eigenvalue = diag.min_eigenvalue.min(lmin);
        if !rho.is_finite() || trace_err > TRACE_ABORT {
            return Err(Error::PhysicalityViolation { time: t, what: format!("trace drifted by {trace_err:.3e}") });
        }
        if lmin < EIGEN_ABORT {
            return Err(Error::PhysicalityViolation { time: t, what: format!("eigenvalue {lmin:.3e}") });
        }
        channels[0].push(kappa_c(t, pulse));
        for (slot, op) in channels[1..6].iter_mut().zip(&observables) {
            slot.push(expect(&rho, op).re);
        }
        channels[6].push(tr.re);
        moments.push(moment_ops.evaluate(&rho));
        if let Some(s) = stored.as_mut() {
            s.push(rho);
        }
        Ok(())
    };

    record(0.0, &mut y, &mut diag)?;

    let mut dp = Dopri::new(&gen, opts.rtol, opts.atol);
    let mut t = 0.0;
    gen.apply(t, &y, &mut dp.k[0]);
    dp.evals += 1;
    let h_max = opts.max_step.unwrap_or_else(|| STABLE_STEP / gen.spectral_radius().max(1e-300));
    let mut h = (times[1] - times[0]).min(1e-2).min(h_max);
    let mut steps = 0usize;

    for &target in &times[1..] {
        while t < target {
            let remaining = target - t;
            let landing = h >= remaining * (1.0 - 1e-12);
            let h_try = if landing { remaining } else { h };
            if h_try < 1e-12 * t.abs().max(1.0) && !landing {
                return Err(Error::NonConvergence { time: t, step: h_try });
            }
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::NonConvergence { time: t, step: h_try });
            }
            let err = dp.attempt(t, &y, h_try);
            if !err.is_finite() {
                h = h_try * 0.1;
                dp.rejected += 1;
                continue;
            }
            // PI step-size control
            const BETA: f64 = 0.04;
            const SAFE: f64 = 0.9;
            let fac11 = err.powf(0.2 - 0.75 * BETA);
            if err <= 1.0 {
                let fac = (fac11 / dp.fac_old.powf(BETA) / SAFE).clamp(0.2, 10.0);
                dp.fac_old = err.max(1e-4);
                let h_next = h_try / fac;
                t = if landing { target } else { t + h_try };
                std::mem::swap(&mut y, &mut dp.y_new);
                dp.k.swap(0, 6);
                dp.accepted += 1;
                // keep the unclamped proposal when the step was shortened to land on a sample
                h = if landing { h.max(h_next) } else { h_next }.min(h_max);
            } else {
                dp.rejected += 1;
                h = h_try / (fac11 / SAFE).min(5.0).max(1.0);
                if h < 1e-12 * t.abs().max(1.0) {
                    return Err(Error::NonConvergence { time: t, step: h });
                }
            }
        }
        record(target, &mut y, &mut diag)?;
        // resymmetrized state changes y; refresh the FSAL stage
        gen.apply(t, &y, &mut dp.k[0]);
        dp.evals += 1;
    }

    diag.accepted_steps = dp.accepted;
    diag.rejected_steps = dp.rejected;
    diag.rhs_evaluations = dp.evals;
    let channels: Vec<(String, Vec<f64>)> =
        CHANNEL_NAMES.iter().map(|s| s.to_string()).zip(channels).collect();
    let mut ts = TimeSeries { times, channels, moments, rho_samples: stored, diagnostics: diag };
    ts.diagnostics.residual_excitation = *ts.stored_excitation().last().unwrap_or(&0.0);
    Ok(ts)
}

/// Dimensions of the composite space, exported for diagnostics.
pub fn hilbert_dims() -> (usize, usize, usize) {
    (CAVITY_DIM, SIV_DIM, crate::model::FLUX_DIM)
}
