//! Wiring between presets, the direct solver, the profile hierarchy and the
//! measurement layer: amplitude-scaling sweeps, residual studies and the
//! exact-versus-asymptotic comparison.

use crate::error::{CoreError, Result};
use crate::field::Grid2;
use crate::lopatinski;
use crate::presets::PresetSystem;
use crate::profiles::{
    self, boundary_frame, build_hierarchy, compare_states, interior_residual, Hierarchy,
    HierarchyInput,
};
use crate::solver::{
    fitted_slope, measure, BoundaryPulse, Discretization, Evolution, Measurement,
};
use crate::spectral::{self, Frequency, PhaseSet};
use crate::{C64, RVec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default epsilon sweep (log-spaced) keeping runtimes in minutes.
pub const DEFAULT_EPS_SWEEP: [f64; 5] = [0.1, 0.0707, 0.05, 0.0354, 0.025];

/// Resolved study context for a preset: the weak-stability direction and the
/// phase classification at it.
pub struct StudyContext {
    pub beta_l: Frequency,
    pub phases: PhaseSet,
    pub osc_index: usize,
    pub omega_n: f64,
}

/// Locate beta_l (from the preset hint or a Lopatinski scan) and classify.
pub fn study_context(ps: &PresetSystem) -> Result<StudyContext> {
    let beta_l = match ps.beta_l {
        Some(b) => b,
        None => {
            let report = lopatinski::scan_upsilon0(&ps.spec, 1440)?;
            *report
                .upsilon_plus()
                .first()
                .ok_or_else(|| CoreError::Classification("no weak-stability direction".into()))?
        }
    };
    let phases = spectral::classify_phases(&ps.spec, &beta_l)?;
    let osc_index = ps.osc_index(&phases);
    let omega_n = phases.phase_freqs[osc_index];
    Ok(StudyContext {
        beta_l,
        phases,
        osc_index,
        omega_n,
    })
}

/// Solver parameters of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepParams {
    pub eps_list: Vec<f64>,
    pub t_end: f64,
    /// Points per wavelength of the fastest resolved oscillation.
    pub ppw: f64,
    /// One-sided mode count (modes 1..=k_high) or two-sided half-width.
    pub k_modes: i64,
    pub pulse: BoundaryPulse,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            eps_list: DEFAULT_EPS_SWEEP.to_vec(),
            t_end: 0.8,
            ppw: 30.0,
            k_modes: 9,
            pulse: BoundaryPulse::default(),
        }
    }
}

/// Result of one amplitude-scaling sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub measurements: Vec<Measurement>,
    pub fitted_slope: f64,
}

fn mode_window(ps: &PresetSystem, k_modes: i64) -> (i64, i64) {
    if ps.spec.spectrum_one_sided() {
        (1, k_modes)
    } else {
        (1 - k_modes, 1 + k_modes)
    }
}

fn g_direction(ps: &PresetSystem) -> RVec {
    RVec::from_element(ps.spec.p, 1.0)
}

/// Resolution target: the largest phase frequency the grid must resolve.
fn freq_max(ctx: &StudyContext) -> f64 {
    4.0 * ctx
        .phases
        .phase_freqs
        .iter()
        .map(|w| w.abs())
        .fold(0.0, f64::max)
        .max(1.0)
}

/// Run one solver instance at a single epsilon.
pub fn run_once(
    ps: &PresetSystem,
    ctx: &StudyContext,
    eps: f64,
    params: &SweepParams,
) -> Result<Measurement> {
    let (kmin, kmax) = mode_window(ps, params.k_modes);
    let disc = Discretization::for_run(
        &ps.spec,
        eps,
        params.t_end,
        freq_max(ctx),
        params.ppw,
        kmin,
        kmax,
    )?;
    let evo = Evolution::new(&ps.spec, &ctx.beta_l, ctx.omega_n, eps, &disc)?;
    let run = evo.evolve(&params.pulse, g_direction(ps).as_slice(), 40, 1e-6)?;
    Ok(measure(&run, &params.pulse))
}

/// Amplitude-ratio sweep over epsilon, in parallel.
pub fn amplification_sweep(ps: &PresetSystem, params: &SweepParams) -> Result<SweepResult> {
    let ctx = study_context(ps)?;
    let measurements: Result<Vec<Measurement>> = params
        .eps_list
        .par_iter()
        .map(|eps| run_once(ps, &ctx, *eps, params))
        .collect();
    let measurements = measurements?;
    let pts: Vec<(f64, f64)> = measurements
        .iter()
        .map(|m| (m.eps, m.sup_ratio))
        .collect();
    Ok(SweepResult {
        fitted_slope: fitted_slope(&pts),
        measurements,
    })
}

/// Parameters of a hierarchy build.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileParams {
    /// Top order J (orders -1..J-1 complete).
    pub j_max: i32,
    pub k_max: i64,
    pub nt: usize,
    pub nx: usize,
    pub t_end: f64,
    pub x2_max: f64,
    pub pulse: BoundaryPulse,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            j_max: 4,
            k_max: 12,
            nt: 385,
            nx: 257,
            t_end: 0.8,
            x2_max: 0.0, // derived from the fastest incoming speed
            pulse: BoundaryPulse::default(),
        }
    }
}

/// Build the profile hierarchy for a preset.
pub fn build_profiles(ps: &PresetSystem, params: &ProfileParams) -> Result<Hierarchy> {
    let ctx = study_context(ps)?;
    let proj = spectral::projector_set(&ps.spec, &ctx.phases)?;
    let frame = boundary_frame(&ps.spec, &ctx.phases, &proj)?;
    let vin_max = ctx
        .phases
        .group_velocities
        .iter()
        .map(|v| v[1])
        .filter(|v| *v > 0.0)
        .fold(0.0, f64::max);
    let x2_max = if params.x2_max > 0.0 {
        params.x2_max
    } else {
        vin_max * params.t_end + 0.2
    };
    let grid = Grid2::new(params.t_end, params.nt, x2_max, params.nx)?;
    let g1: Vec<C64> = (0..grid.nt)
        .map(|i| C64::new(params.pulse.value(grid.t(i)), 0.0))
        .collect();
    let inp = HierarchyInput {
        spec: &ps.spec,
        phases: &ctx.phases,
        proj: &proj,
        frame: &frame,
        g_dir: g_direction(ps),
        g1,
        grid,
        j_max: params.j_max,
        k_max: params.k_max,
    };
    build_hierarchy(&inp)
}

/// Residual slopes of the assembled approximation over an epsilon sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSweep {
    pub eps_list: Vec<f64>,
    pub interior_l2: Vec<f64>,
    pub fitted_slope: f64,
    pub boundary_order1_sup: f64,
}

pub fn residual_sweep(
    ps: &PresetSystem,
    h: &Hierarchy,
    eps_list: &[f64],
) -> Result<ResidualSweep> {
    let mut l2 = Vec::new();
    let mut boundary1: f64 = 0.0;
    for &eps in eps_list {
        let rep = interior_residual(h, &ps.spec, eps)?;
        l2.push(rep.interior_l2);
        boundary1 = boundary1.max(rep.boundary_order1_sup);
    }
    let pts: Vec<(f64, f64)> = eps_list.iter().copied().zip(l2.iter().copied()).collect();
    Ok(ResidualSweep {
        eps_list: eps_list.to_vec(),
        interior_l2: l2,
        fitted_slope: fitted_slope(&pts),
        boundary_order1_sup: boundary1,
    })
}

/// Exact-versus-asymptotic comparison at one epsilon: runs the direct solver
/// to `t_compare` and measures sup/L2 differences in the theta_0-mode
/// representation, restricted to x2 below the sponge.
pub fn compare_once(
    ps: &PresetSystem,
    ctx: &StudyContext,
    h: &Hierarchy,
    eps: f64,
    params: &SweepParams,
    t_compare: f64,
) -> Result<(f64, f64, f64)> {
    let (kmin, kmax) = mode_window(ps, params.k_modes);
    let disc = Discretization::for_run(
        &ps.spec,
        eps,
        t_compare,
        freq_max(ctx),
        params.ppw,
        kmin,
        kmax,
    )?;
    let evo = Evolution::new(&ps.spec, &ctx.beta_l, ctx.omega_n, eps, &disc)?;
    let (state, _snaps) =
        evo.evolve_with_snapshots(&params.pulse, g_direction(ps).as_slice(), &[])?;
    let x_cmp = (disc.x2_max - disc.sponge_width - 0.1).min(h.grid.x_max());
    let (sup, l2) = compare_states(&state, h, eps, t_compare, x_cmp)?;
    // scale of the solution itself for relative context
    let sol_sup = state.sup_theta(24);
    Ok((sup, l2, sol_sup))
}

/// Comparison sweep: fitted slope of the sup difference against epsilon.
pub fn comparison_sweep(
    ps: &PresetSystem,
    h: &Hierarchy,
    eps_list: &[f64],
    params: &SweepParams,
    t_compare: f64,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let ctx = study_context(ps)?;
    let diffs: Result<Vec<(f64, f64)>> = eps_list
        .par_iter()
        .map(|eps| {
            let (sup, _l2, _s) = compare_once(ps, &ctx, h, *eps, params, t_compare)?;
            Ok((*eps, sup))
        })
        .collect();
    let diffs = diffs?;
    let slope = fitted_slope(&diffs);
    Ok((diffs, slope))
}
