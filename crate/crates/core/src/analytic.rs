//! Closed-form steady-state scattering of a monochromatic single photon and the
//! working-window scan built on it.

use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FluxState, SystemParams};

const DEGENERATE: f64 = 1e-30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub t_amp: C64,
    pub r_amp: C64,
    pub transmission: f64,
    pub reflection: f64,
    pub flux_state: FluxState,
    /// Two-photon detuning δ = Δ₁ − Δ₂ − (2η₃ + η₁ − η₂)σ_z′.
    pub delta_eff: f64,
}

/// Two-photon detuning δ for a flux basis state.
pub fn two_photon_detuning(p: &SystemParams, flux: FluxState) -> f64 {
    p.delta1 - p.delta2 - (2.0 * p.eta3 + p.eta1 - p.eta2) * flux.sigma_z()
}

/// Transmission and reflection amplitudes `t = (t_e + 1)/2`, `r = (t_e − 1)/2`.
///
/// The upper signs of the η terms belong to `|e⟩`, the lower to `|g⟩`.
pub fn steady_scatter(p: &SystemParams, flux: FluxState) -> Result<ScatteringResult> {
    let s = flux.sigma_z();
    let raman = (p.delta2 - p.delta1) + s * (p.eta1 + p.eta2);
    let optical = p.delta2 + s * (p.eta2 - p.eta3);
    let loss = p.gamma1 + p.gamma2;
    let omega2 = p.omega_c * p.omega_c;
    let num = C64::new(raman, 0.0) * C64::new(optical, 1.0 - loss) - omega2;
    let den = C64::new(raman, 0.0) * C64::new(optical, -1.0 - loss) - omega2;
    if den.norm() < DEGENERATE {
        return Err(Error::DegenerateDenominator { magnitude: den.norm() });
    }
    let te = num / den;
    let t_amp = (te + 1.0) * 0.5;
    let r_amp = (te - 1.0) * 0.5;
    Ok(ScatteringResult {
        t_amp,
        r_amp,
        transmission: t_amp.norm_sqr(),
        reflection: r_amp.norm_sqr(),
        flux_state: flux,
        delta_eff: two_photon_detuning(p, flux),
    })
}

/// Routing contrast `|e_R − e_L| / (e_R + e_L)`.
pub fn contrast(e_r: f64, e_l: f64) -> Result<f64> {
    let total = e_r + e_l;
    if total <= 0.0 {
        return Err(Error::ZeroFlux);
    }
    Ok((e_r - e_l).abs() / total)
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Location and T ≥ 1/2 extent of one transparency window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub flux_state: FluxState,
    /// Δ₂ of maximal transmission.
    pub center: f64,
    pub peak_transmission: f64,
    /// Width of the contiguous T ≥ 1/2 span around the centre; `None` if the
    /// span touches the grid edge or the peak stays below 1/2.
    pub width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCurve {
    pub flux_state: FluxState,
    pub transmission: Vec<f64>,
    pub reflection: Vec<f64>,
    pub summary: WindowSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowScan {
    pub delta2: Vec<f64>,
    pub curves: Vec<WindowCurve>,
}

impl WindowScan {
    pub fn curve(&self, flux: FluxState) -> Option<&WindowCurve> {
        self.curves.iter().find(|c| c.flux_state == flux)
    }

    /// Columns `delta2, T_<f>, R_<f>` for each scanned flux state in order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["delta2".to_string()];
        for c in &self.curves {
            header.push(format!("T_{}", c.flux_state.label()));
            header.push(format!("R_{}", c.flux_state.label()));
        }
        wr.write_record(&header)?;
        for (i, d) in self.delta2.iter().enumerate() {
            let mut row = vec![d.to_string()];
            for c in &self.curves {
                row.push(c.transmission[i].to_string());
                row.push(c.reflection[i].to_string());
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Evaluates the steady-state response on a Δ₂ grid for each flux state.
pub fn window_scan(p: &SystemParams, delta2: &[f64], flux_states: &[FluxState]) -> Result<WindowScan> {
    if delta2.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter { field: "delta2", reason: "grid must be strictly increasing".into() });
    }
    let mut curves = Vec::with_capacity(flux_states.len());
    for &flux in flux_states {
        let mut transmission = Vec::with_capacity(delta2.len());
        let mut reflection = Vec::with_capacity(delta2.len());
        for &d in delta2 {
            let r = steady_scatter(&SystemParams { delta2: d, ..p.clone() }, flux)?;
            transmission.push(r.transmission);
            reflection.push(r.reflection);
        }
        let summary = summarize(flux, delta2, &transmission);
        curves.push(WindowCurve { flux_state: flux, transmission, reflection, summary });
    }
    Ok(WindowScan { delta2: delta2.to_vec(), curves })
}

fn summarize(flux: FluxState, x: &[f64], t: &[f64]) -> WindowSummary {
    if x.is_empty() {
        return WindowSummary { flux_state: flux, center: f64::NAN, peak_transmission: f64::NAN, width: None };
    }
    let imax = t.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let mut center = x[imax];
    if imax > 0 && imax + 1 < x.len() {
        // parabola through the three points around the maximum
        let (x0, x1, x2) = (x[imax - 1], x[imax], x[imax + 1]);
        let (y0, y1, y2) = (t[imax - 1], t[imax], t[imax + 1]);
        let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
        let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
        let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
        if a < 0.0 {
            let v = -b / (2.0 * a);
            if v > x0 && v < x2 {
                center = v;
            }
        }
    }
    let peak = t[imax];
    let width = if peak < 0.5 {
        None
    } else {
        let mut lo = imax;
        while lo > 0 && t[lo - 1] >= 0.5 {
            lo -= 1;
        }
        let mut hi = imax;
        while hi + 1 < t.len() && t[hi + 1] >= 0.5 {
            hi += 1;
        }
        if lo == 0 || hi + 1 == t.len() {
            None
        } else {
            let cross = |i: usize, j: usize| x[i] + (0.5 - t[i]) * (x[j] - x[i]) / (t[j] - t[i]);
            Some(cross(hi, hi + 1) - cross(lo - 1, lo))
        }
    };
    WindowSummary { flux_state: flux, center, peak_transmission: peak, width }
}

/// Gnuplot script plotting a two-state window scan CSV in the layout of the
/// usual transmission/reflection figure.
pub fn gnuplot_window_script(csv_path: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'Delta_2 / Gamma_wg'\n\
         set ylabel 'T, R'\n\
         set yrange [0:1.05]\n\
         plot '{csv_path}' using 1:2 with lines lc rgb 'blue' lw 2 title 'T (g)', \\\n\
         \x20    '' using 1:3 with lines lc rgb 'red' lw 2 title 'R (g)', \\\n\
         \x20    '' using 1:4 with lines lc rgb 'blue' dt 2 lw 2 title 'T (e)', \\\n\
         \x20    '' using 1:5 with lines lc rgb 'red' dt 2 lw 2 title 'R (e)'\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_params() -> SystemParams {
        SystemParams { omega_c: 0.03, ..SystemParams::default() }.with_eta(1e-3)
    }

    #[test]
    fn resonant_eit_is_transparent() {
        let p = SystemParams { omega_c: 0.03, ..SystemParams::default() };
        for flux in [FluxState::G, FluxState::E] {
            let r = steady_scatter(&p, flux).unwrap();
            assert!((r.transmission - 1.0).abs() < 1e-15);
            assert!(r.reflection < 1e-15);
        }
    }

    #[test]
    fn ground_state_window_center() {
        let p = SystemParams { delta2: 2e-3, ..window_params() };
        let r = steady_scatter(&p, FluxState::G).unwrap();
        assert!((r.transmission - 1.0).abs() < 1e-15);
        assert!(r.reflection < 1e-15);
        assert_eq!(r.delta_eff, 0.0);
    }

    #[test]
    fn excited_state_reflects_at_ground_window() {
        let p = SystemParams { delta2: 2e-3, ..window_params() };
        let r = steady_scatter(&p, FluxState::E).unwrap();
        // hand evaluation of the closed form
        let num = C64::new(4e-3, 0.0) * C64::new(2e-3, 1.0) - 9e-4;
        let den = C64::new(4e-3, 0.0) * C64::new(2e-3, -1.0) - 9e-4;
        let te = num / den;
        assert!((r.t_amp - (te + 1.0) / 2.0).norm() < 1e-15);
        assert!((r.transmission - 0.0478).abs() < 5e-4, "T = {}", r.transmission);
        assert!((r.reflection - 0.9522).abs() < 5e-4, "R = {}", r.reflection);
        assert!((r.delta_eff + 4e-3).abs() < 1e-15);
    }

    #[test]
    fn amplitudes_differ_by_one_and_conserve_probability() {
        let p = SystemParams { delta2: 7.3e-4, delta1: -2e-4, ..window_params() };
        for flux in [FluxState::G, FluxState::E] {
            let r = steady_scatter(&p, flux).unwrap();
            assert_eq!(r.t_amp - r.r_amp, C64::new(1.0, 0.0));
            assert!((r.transmission + r.reflection - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        let p = SystemParams::default();
        assert!(matches!(steady_scatter(&p, FluxState::G), Err(Error::DegenerateDenominator { .. })));
    }

    #[test]
    fn contrast_values() {
        assert!((contrast(0.95, 0.05).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(contrast(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(contrast(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(contrast(0.0, 0.0), Err(Error::ZeroFlux));
    }

    #[test]
    fn window_centers_and_width() {
        let grid = linspace(-6e-3, 6e-3, 2401);
        let scan = window_scan(&window_params(), &grid, &[FluxState::G, FluxState::E]).unwrap();
        let g = &scan.curve(FluxState::G).unwrap().summary;
        let e = &scan.curve(FluxState::E).unwrap().summary;
        assert!((g.center - 2e-3).abs() < 1e-5, "{g:?}");
        assert!((e.center + 2e-3).abs() < 1e-5, "{e:?}");
        for s in [g, e] {
            let w = s.width.unwrap();
            assert!((w - 1.8e-3).abs() < 0.2 * 1.8e-3, "width {w}");
        }
    }

    #[test]
    fn curves_coincide_without_flux_coupling() {
        let p = SystemParams { omega_c: 0.03, ..SystemParams::default() };
        let grid = linspace(-3e-3, 3e-3, 301);
        let scan = window_scan(&p, &grid, &[FluxState::G, FluxState::E]).unwrap();
        assert_eq!(scan.curves[0].transmission, scan.curves[1].transmission);
        assert!(scan.curves[0].summary.center.abs() < 1e-9);
    }

    #[test]
    fn rejects_non_monotone_grid() {
        assert!(window_scan(&window_params(), &[0.0, 1.0, 0.5], &[FluxState::G]).is_err());
    }

    #[test]
    fn csv_columns() {
        let scan = window_scan(&window_params(), &linspace(-1e-3, 1e-3, 3), &[FluxState::G, FluxState::E]).unwrap();
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "delta2,T_g,R_g,T_e,R_e");
        assert_eq!(text.lines().count(), 4);
    }
}
