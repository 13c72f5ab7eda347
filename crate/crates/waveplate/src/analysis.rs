//! Decay-law fitting on energy traces: polynomial (1/t-type) bound checks
//! and polynomial-vs-exponential model discrimination.

use crate::dynamics::EnergyTrace;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    /// Least-squares slope of log E against log t over the window.
    pub loglog_slope: f64,
    /// max over window samples of t · E(t).
    pub sup_te: f64,
    /// sup_te normalized by the squared graph norm of the initial state.
    pub c_over_danorm: f64,
    /// RMS residual of the exponential fit log E = a + b t.
    pub exp_fit_rms: f64,
    /// RMS residual of the power-law fit log E = a + s log t.
    pub poly_fit_rms: f64,
    /// Linear-fit slope of t·E(t) over the whole window.
    pub te_trend: f64,
    /// Linear-fit slope of t·E(t) over the upper half of the window.
    pub te_trend_top_half: f64,
    /// Window actually used after truncation.
    pub window: (f64, f64),
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = if denom.abs() > 0.0 {
        (n * sxy - sx * sy) / denom
    } else {
        0.0
    };
    let intercept = (sy - slope * sx) / n;
    let rms = (points
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Fits decay laws over `window = (t_min, t_max)`. The window is truncated
/// at the first sample where the energy drops below 1e-14 of the initial
/// energy (log fits become meaningless past that point).
pub fn decay_fit(trace: &EnergyTrace, da_norm: f64, window: (f64, f64)) -> Result<DecayReport> {
    if trace.rows.is_empty() {
        return Err(Error::invalid_argument("empty trace"));
    }
    let (t_min, t_max) = window;
    if !(t_max > t_min) {
        return Err(Error::invalid_argument("window must satisfy t_min < t_max"));
    }
    let e0 = trace.rows[0].e;
    let floor = 1e-14 * e0;
    let mut cut = t_max;
    for r in &trace.rows {
        if r.t >= t_min && r.e < floor {
            cut = cut.min(r.t);
            break;
        }
    }
    let rows: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .filter(|r| r.t >= t_min && r.t <= cut && r.t > 0.0 && r.e > 0.0)
        .map(|r| (r.t, r.e))
        .collect();
    if rows.len() < 2 {
        return Err(Error::invalid_argument(format!(
            "window [{t_min}, {t_max}] contains {} usable samples",
            rows.len()
        )));
    }

    let loglog: Vec<(f64, f64)> = rows.iter().map(|&(t, e)| (t.ln(), e.ln())).collect();
    let (loglog_slope, _, poly_fit_rms) = least_squares(&loglog);
    let semilog: Vec<(f64, f64)> = rows.iter().map(|&(t, e)| (t, e.ln())).collect();
    let (_, _, exp_fit_rms) = least_squares(&semilog);

    let te: Vec<(f64, f64)> = rows.iter().map(|&(t, e)| (t, t * e)).collect();
    let sup_te = te.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (te_trend, _, _) = least_squares(&te);
    let mid = 0.5 * (rows[0].0 + rows[rows.len() - 1].0);
    let top: Vec<(f64, f64)> = te.iter().copied().filter(|p| p.0 >= mid).collect();
    let te_trend_top_half = if top.len() >= 2 {
        least_squares(&top).0
    } else {
        0.0
    };

    Ok(DecayReport {
        loglog_slope,
        sup_te,
        c_over_danorm: sup_te / (da_norm * da_norm),
        exp_fit_rms,
        poly_fit_rms,
        te_trend,
        te_trend_top_half,
        window: (rows[0].0, rows[rows.len() - 1].0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TraceRow;
    use proptest::prelude::*;

    fn synthetic(f: impl Fn(f64) -> f64, t0: f64, t1: f64, n: usize) -> EnergyTrace {
        let rows = (0..n)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
                TraceRow {
                    t,
                    e: f(t),
                    d_eta: 0.0,
                    d_xi: 0.0,
                    d_zeta: 0.0,
                    mean_u: 0.0,
                    mean_w: 0.0,
                    mean_wx1: 0.0,
                    mean_wx2: 0.0,
                }
            })
            .collect();
        EnergyTrace { rows }
    }

    #[test]
    fn exact_one_over_t() {
        let trace = synthetic(|t| 1.0 / t, 1.0, 100.0, 400);
        let report = decay_fit(&trace, 1.0, (1.0, 100.0)).unwrap();
        assert!((report.loglog_slope + 1.0).abs() < 1e-10, "{}", report.loglog_slope);
        assert!((report.sup_te - 1.0).abs() < 1e-12);
        assert!(report.poly_fit_rms < 1e-12);
        assert!(report.te_trend.abs() < 1e-12);
    }

    #[test]
    fn exponential_is_identified() {
        let trace = synthetic(|t| (-t).exp(), 0.5, 20.0, 300);
        let report = decay_fit(&trace, 1.0, (0.5, 20.0)).unwrap();
        assert!(
            report.exp_fit_rms < 1e-12 && report.poly_fit_rms > 1e-3,
            "exp {} poly {}",
            report.exp_fit_rms,
            report.poly_fit_rms
        );
    }

    #[test]
    fn sup_te_attained_in_window() {
        let trace = synthetic(|t| 1.0 / (t * t), 1.0, 50.0, 200);
        let report = decay_fit(&trace, 2.0, (2.0, 50.0)).unwrap();
        // For 1/t², t·E = 1/t: max at the first sample inside the window.
        let t_first = trace
            .rows
            .iter()
            .map(|r| r.t)
            .find(|&t| t >= 2.0)
            .unwrap();
        assert!((report.sup_te - 1.0 / t_first).abs() < 1e-12);
        assert!((report.c_over_danorm - report.sup_te / 4.0).abs() < 1e-14);
        assert!(report.te_trend < 0.0);
    }

    #[test]
    fn empty_window_is_an_error() {
        let trace = synthetic(|t| 1.0 / t, 1.0, 10.0, 50);
        assert!(decay_fit(&trace, 1.0, (20.0, 30.0)).is_err());
        assert!(decay_fit(&trace, 1.0, (5.0, 5.0)).is_err());
    }

    #[test]
    fn tiny_energies_truncate_window() {
        let trace = synthetic(|t| if t < 5.0 { 1.0 / t } else { 1e-20 }, 1.0, 10.0, 100);
        let report = decay_fit(&trace, 1.0, (1.0, 10.0)).unwrap();
        assert!(report.window.1 < 5.1, "window end {}", report.window.1);
    }

    proptest! {
        #[test]
        fn scale_equivariance(scale in 1e-6f64..1e6) {
            let trace = synthetic(|t| 2.0 / t.powf(1.3), 1.0, 40.0, 120);
            let scaled_rows: Vec<TraceRow> = trace.rows.iter().map(|r| TraceRow { e: scale * r.e, ..*r }).collect();
            let scaled = EnergyTrace { rows: scaled_rows };
            let a = decay_fit(&trace, 1.0, (1.0, 40.0)).unwrap();
            let b = decay_fit(&scaled, 1.0, (1.0, 40.0)).unwrap();
            prop_assert!((a.loglog_slope - b.loglog_slope).abs() <= 1e-12);
        }
    }
}
