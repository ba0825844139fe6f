//! Interior transport solves along the straight characteristics of
//! `X_phi_m = d_x2 + c_m d_t` (x1-independent reduction), second order via
//! trapezoidal quadrature along characteristics with cubic interpolation.

use crate::error::{CoreError, Result};
use crate::field::{interp_series, Field2, Grid2};
use crate::spectral::PhaseSet;
use crate::C64;

/// Characteristic slopes dt/dx2 = c_m = 1 / (group velocity x2-component).
#[derive(Debug, Clone)]
pub struct TransportCoeffs {
    pub c: Vec<f64>,
}

impl TransportCoeffs {
    pub fn from_phases(phases: &PhaseSet) -> Self {
        Self {
            c: phases
                .group_velocities
                .iter()
                .map(|v| 1.0 / v[1])
                .collect(),
        }
    }
}

/// Solve `(d_x2 + c d_t) sigma = f` for an incoming phase (c > 0) with the
/// trace prescribed at x2 = 0 and zero data in t < 0.
///
/// `forcing(i, j)` evaluates f at grid point (t_i, x_j); it is only consulted
/// at already-known columns, so triangular couplings may close over fields
/// produced earlier in the same sweep.
pub fn solve_incoming(
    c: f64,
    trace: &[C64],
    forcing: Option<&Field2>,
    grid: &Grid2,
) -> Result<Field2> {
    if c <= 0.0 {
        return Err(CoreError::Precondition(
            "incoming transport needs a positive characteristic slope".into(),
        ));
    }
    if trace.len() != grid.nt {
        return Err(CoreError::GridMismatch("trace length != nt".into()));
    }
    let mut out = Field2::zeros(grid);
    for i in 0..grid.nt {
        out.set(i, 0, trace[i]);
    }
    let dx = grid.dx;
    for j in 0..grid.nx - 1 {
        for i in 0..grid.nt {
            let t_here = grid.t(i);
            let t_foot = t_here - c * dx;
            let base = out.interp_t(t_foot, j);
            let add = match forcing {
                Some(f) => {
                    let f_foot = f.interp_t(t_foot, j);
                    let f_here = f.at(i, j + 1);
                    (f_foot + f_here) * (0.5 * dx)
                }
                None => C64::new(0.0, 0.0),
            };
            out.set(i, j + 1, base + add);
        }
    }
    Ok(out)
}

/// Solve `(d_x2 + c d_t) sigma = f` for an outgoing phase (c < 0) with zero
/// data at the far end and in t < 0: integrate downward in x2 along the
/// characteristics, which run backward in time toward larger x2.
pub fn solve_outgoing(c: f64, forcing: &Field2, grid: &Grid2) -> Result<Field2> {
    if c >= 0.0 {
        return Err(CoreError::Precondition(
            "outgoing transport needs a negative characteristic slope".into(),
        ));
    }
    let mut out = Field2::zeros(grid);
    let dx = grid.dx;
    for j in (1..grid.nx).rev() {
        for i in 0..grid.nt {
            let t_here = grid.t(i);
            // foot on column j along the characteristic through (t_here, x_{j-1})
            let t_foot = t_here + c * dx;
            let base = out.interp_t(t_foot, j);
            let f_foot = forcing.interp_t(t_foot, j);
            let f_here = forcing.at(i, j - 1);
            // d sigma / d x2 = f, integrated from x_j down to x_{j-1}
            out.set(i, j - 1, base - (f_foot + f_here) * (0.5 * dx));
        }
    }
    Ok(out)
}

/// Closed-form single-characteristic oracle for the homogeneous equation with
/// same-mode exponential coupling: along theta-parameterized characteristics
/// the full series solves `d sigma / d x2 = -q sigma` with solution
/// `trace * exp(-q x2)`; its k-th theta-mode is trace * (-q x2)^k / k!.
pub fn exponential_chain_oracle(trace: C64, q: C64, x2: f64, k: usize) -> C64 {
    let mut term = trace;
    for n in 1..=k {
        term *= -q * x2 / (n as f64);
    }
    term
}

/// Interpolate a boundary amplitude time series onto a grid trace.
pub fn series_to_trace(series: &[C64], dt: f64, grid: &Grid2) -> Vec<C64> {
    (0..grid.nt)
        .map(|i| interp_series(series, dt, grid.t(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(t: f64) -> f64 {
        let s = (t - 0.1) / 0.4;
        if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            (-1.0 / s).exp() * (-1.0 / (1.0 - s)).exp() * 54.6
        }
    }

    #[test]
    fn incoming_transport_propagates_trace_exactly() {
        let grid = Grid2::new(1.0, 641, 0.8, 257).unwrap();
        let trace: Vec<C64> = (0..grid.nt)
            .map(|i| C64::new(bump(grid.t(i)), 0.0))
            .collect();
        let c = 0.73;
        let sol = solve_incoming(c, &trace, None, &grid).unwrap();
        // homogeneous transport: sigma(t, x) = trace(t - c x)
        let mut max_err: f64 = 0.0;
        for i in 0..grid.nt {
            for j in 0..grid.nx {
                let exact = bump(grid.t(i) - c * grid.x(j));
                max_err = max_err.max((sol.at(i, j) - C64::new(exact, 0.0)).norm());
            }
        }
        assert!(max_err < 2e-5, "max_err = {max_err}");
    }

    #[test]
    fn outgoing_transport_is_causal_and_zero_without_forcing() {
        let grid = Grid2::new(1.0, 65, 0.8, 65).unwrap();
        let f = Field2::zeros(&grid);
        let sol = solve_outgoing(-1.3, &f, &grid).unwrap();
        assert_eq!(sol.sup(), 0.0);
    }

    #[test]
    fn outgoing_transport_matches_quadrature_oracle() {
        // forcing independent of t: sigma(t=large, x) = -int_x^{X} f dx'
        let grid = Grid2::new(4.0, 257, 1.0, 129).unwrap();
        let mut f = Field2::zeros(&grid);
        for i in 0..grid.nt {
            for j in 0..grid.nx {
                let x = grid.x(j);
                // taper to zero at the far end so the zero far-field datum is exact
                let w = if x < 0.6 {
                    (std::f64::consts::PI * x / 0.6).sin().powi(2)
                } else {
                    0.0
                };
                f.set(i, j, C64::new(w, 0.0));
            }
        }
        let c = -0.9;
        let sol = solve_outgoing(c, &f, &grid).unwrap();
        // at late times the characteristic from (t, x) stays in t > 0 all the way
        let j = 0;
        let t = 3.5;
        let i = (t / grid.dt).round() as usize;
        let exact: f64 = {
            // integral of w over [0, 0.6]
            let n = 100_000;
            let h = 0.6 / n as f64;
            (0..n)
                .map(|m| {
                    let x = (m as f64 + 0.5) * h;
                    (std::f64::consts::PI * x / 0.6).sin().powi(2) * h
                })
                .sum()
        };
        let got = -sol.at(i, j).re;
        assert!((got - exact).abs() < 1e-4, "got {got}, exact {exact}");
    }
}
