//! The three-step protocol on an embedded `(m, A, B)` covariance, its outer optimization
//! and Cartesian parameter sweeps.
//!
//! 1. A blue pulse of duration `τ₁` entangles the mechanics with cavity A (bandwidth
//!    `κ_c = υΓ`), cavity B idle.
//! 2. Cavity A is measured; only its pre-measurement statistics matter for `E_{αβ}`, so it
//!    is simply frozen from here on.
//! 3. A shaped red pulse of duration `τ₂` swaps the mechanical state onto cavity B.
//!
//! Durations are stored in units of `1/Γ` with `Γ = 4g_max²/κ_lc`.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{self, BellResult, MeasurementSettings};
use crate::dynamics::{build_blue_generators, build_red_generators, propagate_modes};
use crate::error::{Error, Result};
use crate::gaussian::{thermal_state, vacuum_state, GaussianState};
use crate::params::SystemParams;
use crate::pulse::{optimal_shapes, solve_m};
use crate::simplex::{self, SimplexOptions};

/// Cap on `Γ_sq τ₁`; the blue drift amplifies without bound.
pub const MAX_BLUE_AREA: f64 = 4.0;

pub const TAU1_BOUNDS: (f64, f64) = (0.05, 4.0);
pub const TAU2_BOUNDS: (f64, f64) = (0.5, 30.0);
pub const UPSILON_BOUNDS: (f64, f64) = (0.2, 10.0);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub cooperativity: Vec<f64>,
    pub lambda_t: Vec<f64>,
    pub n0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// `upsilon` inside the parameters sets the step-one cavity bandwidth.
    pub params: SystemParams,
    /// Entangling duration in units of `1/Γ`.
    pub tau1: f64,
    /// Swap duration in units of `1/Γ`.
    pub tau2: f64,
    pub sweep: SweepAxes,
}

impl ProtocolConfig {
    pub fn new(params: SystemParams, tau1: f64, tau2: f64) -> Self {
        Self {
            params,
            tau1,
            tau2,
            sweep: SweepAxes::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        for (name, v) in [
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("upsilon", self.params.upsilon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tau1 > MAX_BLUE_AREA {
            return Err(Error::invalid(format!(
                "Gamma_sq * tau1 = {} exceeds the stability cap {MAX_BLUE_AREA}",
                self.tau1
            )));
        }
        Ok(())
    }
}

/// Final three-mode state of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    /// Modes `m`, `A`, `B`.
    pub state: GaussianState,
    pub ab: GaussianState,
    /// Largest mechanics–(A,B) covariance relative to `√(max Σ_mm · max Σ_AB)`.
    pub residual_correlation: f64,
    /// Swap fidelity bound `(1 - e^{-K})²` of the red schedule.
    pub transfer_bound: f64,
}

fn initial_state(n0: f64) -> Result<GaussianState> {
    thermal_state(n0)?
        .relabel(&["m"])?
        .tensor(&vacuum_state(2)?.relabel(&["A", "B"])?)
}

fn residual_correlation(s: &GaussianState) -> f64 {
    let c = s.cov();
    let diag_max = |r: std::ops::Range<usize>| r.map(|i| c[(i, i)]).fold(0.0, f64::max);
    let cross = (0..2)
        .flat_map(|i| (2..6).map(move |j| (i, j)))
        .map(|(i, j)| c[(i, j)].abs())
        .fold(0.0, f64::max);
    cross / (diag_max(0..2) * diag_max(2..6)).sqrt()
}

/// Runs the protocol and keeps the full `(m, A, B)` state.
pub fn run_protocol_full(cfg: &ProtocolConfig) -> Result<ProtocolRun> {
    cfg.validate()?;
    let p = cfg.params;
    let s0 = initial_state(p.n0)?;
    let gamma = p.gamma_max();
    if gamma == 0.0 {
        let ab = s0.partial_trace(&["A", "B"])?;
        return Ok(ProtocolRun {
            residual_correlation: 0.0,
            state: s0,
            ab,
            transfer_bound: 0.0,
        });
    }
    let context = |stage: &str, e: Error| match e {
        Error::Divergence { t, reason } => Error::Divergence {
            t,
            reason: format!(
                "{stage} (tau1 = {}, tau2 = {}, upsilon = {}): {reason}",
                cfg.tau1, cfg.tau2, p.upsilon
            ),
        },
        other => other,
    };

    let t1 = cfg.tau1 / gamma;
    let blue = build_blue_generators(&p, gamma, p.upsilon * gamma)?;
    let s1 = propagate_modes(&s0, &blue, &["m", "A"], t1, t1 / 32.0)
        .map_err(|e| context("blue pulse", e))?;

    let t2 = cfg.tau2 / gamma;
    let schedule = optimal_shapes(t2, solve_m(gamma, t2)?)?;
    let (g_bs, k_c) = schedule.rate_fns();
    let red = build_red_generators(&p, g_bs, k_c, t2)?;
    let s2 = propagate_modes(&s1, &red, &["m", "B"], t2, t2 / 64.0)
        .map_err(|e| context("red pulse", e))?;

    let ab = s2.partial_trace(&["A", "B"])?;
    let k = schedule.k_v;
    Ok(ProtocolRun {
        residual_correlation: residual_correlation(&s2),
        transfer_bound: (1.0 - (-k).exp()).powi(2),
        state: s2,
        ab,
    })
}

/// Reduced `(A, B)` state at the end of the protocol.
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<GaussianState> {
    Ok(run_protocol_full(cfg)?.ab)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub outer_restarts: usize,
    pub settings_restarts: usize,
    /// Simplex diameter tolerance in log-parameter space.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Selects the random restart stream of the settings search.
    pub seed: u64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            outer_restarts: 6,
            settings_restarts: bell::DEFAULT_RESTARTS,
            outer_tol: 1e-3,
            outer_max_iter: 150,
            seed: 0,
        }
    }
}

/// Outer restart points `(τ₁Γ, τ₂Γ, υ)`.
const OUTER_SEEDS: [[f64; 3]; 6] = [
    [0.8, 12.0, 2.0],
    [0.5, 6.0, 1.0],
    [1.5, 20.0, 3.0],
    [0.3, 3.0, 0.6],
    [1.0, 25.0, 5.0],
    [2.0, 8.0, 1.5],
];

/// Best `S` over settings for given durations; warm-started settings searches are cheaper.
fn evaluate(
    base: &ProtocolConfig,
    x: &[f64],
    warm: Option<&MeasurementSettings>,
    restarts: usize,
    seed: u64,
) -> Result<BellResult> {
    let mut cfg = base.clone();
    cfg.tau1 = x[0].exp();
    cfg.tau2 = x[1].exp();
    cfg.params.upsilon = x[2].exp();
    let ab = run_protocol(&cfg)?;
    let mut r = bell::optimize_settings_from(&ab, restarts, warm, seed)?;
    r.tau1 = cfg.tau1;
    r.tau2 = cfg.tau2;
    r.upsilon = cfg.params.upsilon;
    Ok(r)
}

/// Maximizes `S` jointly over the settings and `(τ₁, τ₂, υ)` within the documented bounds.
pub fn optimize_protocol(cfg: &ProtocolConfig) -> Result<BellResult> {
    optimize_protocol_with(cfg, OptimizeOptions::default())
}

pub fn optimize_protocol_with(cfg: &ProtocolConfig, opts: OptimizeOptions) -> Result<BellResult> {
    cfg.params.validate()?;
    let lo = [
        TAU1_BOUNDS.0.ln(),
        TAU2_BOUNDS.0.ln(),
        UPSILON_BOUNDS.0.ln(),
    ];
    let hi = [
        TAU1_BOUNDS.1.ln(),
        TAU2_BOUNDS.1.ln(),
        UPSILON_BOUNDS.1.ln(),
    ];
    let simplex_opts = SimplexOptions {
        initial_step: 0.15,
        diameter_tol: opts.outer_tol,
        max_iter: opts.outer_max_iter,
    };

    let mut best: Option<(Vec<f64>, BellResult)> = None;
    let mut all_converged = true;
    for seed in OUTER_SEEDS.iter().cycle().take(opts.outer_restarts.max(1)) {
        let x0: Vec<f64> = seed.iter().map(|v| v.ln()).collect();
        let mut warm: Option<MeasurementSettings> = best.as_ref().map(|b| b.1.settings);
        let mut local_best: Option<(Vec<f64>, BellResult)> = None;
        let run = simplex::minimize(
            |x| {
                let restarts = if warm.is_some() {
                    1
                } else {
                    opts.settings_restarts
                };
                match evaluate(cfg, x, warm.as_ref(), restarts, opts.seed) {
                    Ok(r) => {
                        let s = r.s;
                        if local_best.as_ref().is_none_or(|b| s > b.1.s) {
                            warm = Some(r.settings);
                            local_best = Some((x.to_vec(), r));
                        }
                        -s
                    }
                    Err(e) => {
                        log::debug!("candidate {x:?} failed: {e}");
                        f64::INFINITY
                    }
                }
            },
            &x0,
            &lo,
            &hi,
            simplex_opts,
        );
        all_converged &= run.converged;
        if let Some(lb) = local_best {
            if best.as_ref().is_none_or(|b| lb.1.s > b.1.s) {
                best = Some(lb);
            }
        }
    }
    let (x, coarse) = best.ok_or_else(|| Error::Divergence {
        t: 0.0,
        reason: "every protocol candidate failed".into(),
    })?;
    // final settings search with every restart, warm-started from the running optimum
    let mut result = evaluate(
        cfg,
        &x,
        Some(&coarse.settings),
        opts.settings_restarts,
        opts.seed,
    )?;
    if coarse.s > result.s {
        result = coarse;
    }
    result.converged &= all_converged;
    Ok(result)
}

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda_t: f64,
    pub n0: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "tau1_Gamma")]
    pub tau1_gamma: f64,
    #[serde(rename = "tau2_Gamma")]
    pub tau2_gamma: f64,
    pub upsilon: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Cells of the Cartesian product of the sweep axes, in `(C, λ_t, n₀)` lexicographic order.
pub fn sweep_cells(axes: &SweepAxes) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for &c in &axes.cooperativity {
        for &l in &axes.lambda_t {
            for &n in &axes.n0 {
                out.push((c, l, n));
            }
        }
    }
    out
}

/// Parameters of one sweep cell: `γ_m` is held fixed and `g_max` follows from `C`.
pub fn cell_params(base: &SystemParams, c: f64, lambda_t: f64, n0: f64) -> Result<SystemParams> {
    SystemParams::from_cooperativity(
        base.omega_m,
        base.kappa_lc,
        base.gamma_m,
        base.nbar,
        n0,
        lambda_t,
        c,
        base.upsilon,
    )
}

fn run_cell(cfg: &ProtocolConfig, cell: (f64, f64, f64), opts: OptimizeOptions) -> SweepRow {
    let (c, lambda_t, n0) = cell;
    let outcome = cell_params(&cfg.params, c, lambda_t, n0).and_then(|params| {
        let mut local = cfg.clone();
        local.params = params;
        optimize_protocol_with(&local, opts)
    });
    match outcome {
        Ok(r) => SweepRow {
            c,
            lambda_t,
            n0,
            s: r.s,
            tau1_gamma: r.tau1,
            tau2_gamma: r.tau2,
            upsilon: r.upsilon,
            converged: r.converged,
            error: None,
        },
        Err(e) => SweepRow {
            c,
            lambda_t,
            n0,
            s: f64::NAN,
            tau1_gamma: f64::NAN,
            tau2_gamma: f64::NAN,
            upsilon: f64::NAN,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

/// Optimizes every cell concurrently. `on_row` sees each row as soon as it completes (in
/// completion order); the returned table is in cell order.
pub fn sweep<F>(cfg: &ProtocolConfig, opts: OptimizeOptions, on_row: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&SweepRow) + Sync,
{
    let cells = sweep_cells(&cfg.sweep);
    if cells.is_empty() {
        return Err(Error::invalid(
            "sweep needs nonempty cooperativity, lambda_t and n0 axes",
        ));
    }
    let sink = Mutex::new(());
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&cell| {
            let row = run_cell(cfg, cell, opts);
            let _guard = sink.lock().unwrap_or_else(|e| e.into_inner());
            on_row(&row);
            row
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline(c: f64) -> SystemParams {
        SystemParams::from_cooperativity(1.0, 0.125, 1e-7, 40.0, 0.1, 1.0, c, 1.0).unwrap()
    }

    #[test]
    fn zero_coupling_gives_vacuum() {
        let mut p = baseline(100.0);
        p.g_max = 0.0;
        let ab = run_protocol(&ProtocolConfig::new(p, 1.0, 5.0)).unwrap();
        assert_eq!(ab.cov(), vacuum_state(2).unwrap().cov());
        let r = bell::optimize_settings(&ab, 3).unwrap();
        assert!((r.s - 2.0).abs() < 1e-6);
    }

    #[test]
    fn blue_area_is_capped() {
        let cfg = ProtocolConfig::new(baseline(100.0), 4.5, 5.0);
        assert!(run_protocol(&cfg).is_err());
    }

    #[test]
    fn frozen_mode_is_bit_identical() {
        let cfg = ProtocolConfig::new(baseline(100.0), 0.8, 10.0);
        let p = cfg.params;
        let gamma = p.gamma_max();
        let s0 = initial_state(p.n0).unwrap();
        let blue = build_blue_generators(&p, gamma, gamma).unwrap();
        let s1 = propagate_modes(&s0, &blue, &["m", "A"], 0.8 / gamma, 0.1 / gamma).unwrap();
        let full = run_protocol_full(&cfg).unwrap();
        let a_before = s1.partial_trace(&["A"]).unwrap();
        let a_after = full.state.partial_trace(&["A"]).unwrap();
        assert_eq!(a_before.cov(), a_after.cov());
    }

    #[test]
    fn working_point_violates() {
        let cfg = ProtocolConfig::new(baseline(100.0), 0.8, 12.0);
        let ab = run_protocol(&cfg).unwrap();
        assert!(ab.is_physical());
        let r = bell::optimize_settings(&ab, bell::DEFAULT_RESTARTS).unwrap();
        assert!(r.s > 2.0, "{}", r.s);
    }

    #[test]
    fn sweep_cells_are_cartesian() {
        let axes = SweepAxes {
            cooperativity: vec![10.0, 100.0],
            lambda_t: vec![1.0, 0.9, 0.8],
            n0: vec![0.1],
        };
        let cells = sweep_cells(&axes);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1], (10.0, 0.9, 0.1));
    }

    #[test]
    fn empty_sweep_rejected() {
        let cfg = ProtocolConfig::new(baseline(10.0), 1.0, 5.0);
        assert!(sweep(&cfg, OptimizeOptions::default(), |_| {}).is_err());
    }
}
