//! Uniform grids and complex scalar/vector fields on (t, x2).

use crate::error::{CoreError, Result};
use crate::C64;
use serde::{Deserialize, Serialize};

/// Uniform grid on [0, t_max] x [0, x2_max].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
}

impl Grid2 {
    pub fn new(t_max: f64, nt: usize, x2_max: f64, nx: usize) -> Result<Self> {
        if nt < 8 || nx < 8 {
            return Err(CoreError::Config("grid needs at least 8 points per axis".into()));
        }
        Ok(Self {
            nt,
            nx,
            dt: t_max / (nt - 1) as f64,
            dx: x2_max / (nx - 1) as f64,
        })
    }

    pub fn t(&self, i: usize) -> f64 {
        self.dt * i as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.dx * j as f64
    }

    pub fn t_max(&self) -> f64 {
        self.dt * (self.nt - 1) as f64
    }

    pub fn x_max(&self) -> f64 {
        self.dx * (self.nx - 1) as f64
    }
}

/// Complex scalar field on a [`Grid2`], stored row-major in t.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    pub grid: Grid2,
    pub data: Vec<C64>,
}

impl Field2 {
    pub fn zeros(grid: &Grid2) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![C64::new(0.0, 0.0); grid.nt * grid.nx],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.grid.nx + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.grid.nx + j] = v;
    }

    pub fn sup(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn l2(&self) -> f64 {
        let s: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.dt * self.grid.dx).sqrt()
    }

    pub fn scale(&mut self, c: C64) {
        for z in &mut self.data {
            *z *= c;
        }
    }

    pub fn add_scaled(&mut self, other: &Field2, c: C64) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += c * b;
        }
    }

    /// Cubic Lagrange interpolation in t at fixed column j; zero outside [0, t_max].
    pub fn interp_t(&self, t: f64, j: usize) -> C64 {
        let g = &self.grid;
        if t < 0.0 {
            return C64::new(0.0, 0.0);
        }
        if t >= g.t_max() {
            return self.at(g.nt - 1, j);
        }
        let s = t / g.dt;
        let i1 = (s.floor() as usize).min(g.nt - 2);
        // stencil i0..i0+3 clamped to the grid
        let i0 = i1.saturating_sub(1).min(g.nt.saturating_sub(4));
        let u = s - i0 as f64;
        let mut out = C64::new(0.0, 0.0);
        for (m, w) in lagrange4(u).into_iter().enumerate() {
            out += self.at(i0 + m, j) * w;
        }
        out
    }

    /// Fourth-order centered d/dt with one-sided stencils at the edges.
    pub fn ddt(&self) -> Field2 {
        let g = &self.grid;
        let mut out = Field2::zeros(g);
        let c = 1.0 / (12.0 * g.dt);
        for j in 0..g.nx {
            for i in 0..g.nt {
                let v = if i >= 2 && i + 2 < g.nt {
                    (self.at(i - 2, j) - self.at(i + 2, j)) * c
                        + (self.at(i + 1, j) - self.at(i - 1, j)) * (8.0 * c)
                } else if i + 4 < g.nt && i < 2 {
                    // one-sided 4th order forward
                    (self.at(i, j) * -25.0 + self.at(i + 1, j) * 48.0 - self.at(i + 2, j) * 36.0
                        + self.at(i + 3, j) * 16.0
                        - self.at(i + 4, j) * 3.0)
                        / (12.0 * g.dt)
                } else {
                    (self.at(i, j) * 25.0 - self.at(i - 1, j) * 48.0 + self.at(i - 2, j) * 36.0
                        - self.at(i - 3, j) * 16.0
                        + self.at(i - 4, j) * 3.0)
                        / (12.0 * g.dt)
                };
                out.set(i, j, v);
            }
        }
        out
    }

    /// Fourth-order centered d/dx2 with one-sided stencils at the edges.
    pub fn ddx(&self) -> Field2 {
        let g = &self.grid;
        let mut out = Field2::zeros(g);
        let c = 1.0 / (12.0 * g.dx);
        for i in 0..g.nt {
            for j in 0..g.nx {
                let v = if j >= 2 && j + 2 < g.nx {
                    (self.at(i, j - 2) - self.at(i, j + 2)) * c
                        + (self.at(i, j + 1) - self.at(i, j - 1)) * (8.0 * c)
                } else if j + 4 < g.nx && j < 2 {
                    (self.at(i, j) * -25.0 + self.at(i, j + 1) * 48.0 - self.at(i, j + 2) * 36.0
                        + self.at(i, j + 3) * 16.0
                        - self.at(i, j + 4) * 3.0)
                        / (12.0 * g.dx)
                } else {
                    (self.at(i, j) * 25.0 - self.at(i, j - 1) * 48.0 + self.at(i, j - 2) * 36.0
                        - self.at(i, j - 3) * 16.0
                        + self.at(i, j - 4) * 3.0)
                        / (12.0 * g.dx)
                };
                out.set(i, j, v);
            }
        }
        out
    }

    /// Trace at x2 = 0 as a time series.
    pub fn trace0(&self) -> Vec<C64> {
        (0..self.grid.nt).map(|i| self.at(i, 0)).collect()
    }
}

/// Weights of the 4-point Lagrange interpolant at offset u in [0, 3].
#[inline]
pub fn lagrange4(u: f64) -> [f64; 4] {
    let u1 = u - 1.0;
    let u2 = u - 2.0;
    let u3 = u - 3.0;
    [
        -u1 * u2 * u3 / 6.0,
        u * u2 * u3 / 2.0,
        -u * u1 * u3 / 2.0,
        u * u1 * u2 / 6.0,
    ]
}

/// Cubic interpolation of a sampled time series; zero for t < 0, clamped above.
pub fn interp_series(series: &[C64], dt: f64, t: f64) -> C64 {
    let n = series.len();
    if t < 0.0 || n == 0 {
        return C64::new(0.0, 0.0);
    }
    let s = t / dt;
    if s >= (n - 1) as f64 {
        return series[n - 1];
    }
    if n < 4 {
        let i = s.floor() as usize;
        let u = s - i as f64;
        return series[i] * (1.0 - u) + series[(i + 1).min(n - 1)] * u;
    }
    let i1 = (s.floor() as usize).min(n - 2);
    let i0 = i1.saturating_sub(1).min(n - 4);
    let u = s - i0 as f64;
    let w = lagrange4(u);
    (0..4).map(|m| series[i0 + m] * w[m]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_smooth_field_is_fourth_order() {
        let g = Grid2::new(1.0, 65, 1.0, 65).unwrap();
        let mut f = Field2::zeros(&g);
        for i in 0..g.nt {
            for j in 0..g.nx {
                let (t, x) = (g.t(i), g.x(j));
                f.set(i, j, C64::new((2.0 * t + 0.3 * x).sin(), (t * x).cos()));
            }
        }
        let dt = f.ddt();
        let mut max_err: f64 = 0.0;
        for i in 0..g.nt {
            for j in 0..g.nx {
                let (t, x) = (g.t(i), g.x(j));
                let exact = C64::new(2.0 * (2.0 * t + 0.3 * x).cos(), -x * (t * x).sin());
                max_err = max_err.max((dt.at(i, j) - exact).norm());
            }
        }
        assert!(max_err < 5e-6, "max_err = {max_err}");
    }

    #[test]
    fn interp_t_reproduces_cubics() {
        let g = Grid2::new(1.0, 33, 1.0, 9).unwrap();
        let mut f = Field2::zeros(&g);
        for i in 0..g.nt {
            let t = g.t(i);
            for j in 0..g.nx {
                f.set(i, j, C64::new(t * t * t - 0.5 * t, 1.0 + t * t));
            }
        }
        for &t in &[0.133, 0.502, 0.989] {
            let v = f.interp_t(t, 3);
            let exact = C64::new(t * t * t - 0.5 * t, 1.0 + t * t);
            assert!((v - exact).norm() < 1e-12);
        }
        assert_eq!(f.interp_t(-0.2, 0), C64::new(0.0, 0.0));
    }
}
