//! Geometric-optics construction for the 3x3 double-amplification example:
//! mode table, boundary frame, Fourier-multiplier boundary amplitude
//! equations, interior transport solves, the small-divisor partial inverse,
//! the profile hierarchy, and assembly with residual measurement.

mod assemble;
mod boundary;
mod hierarchy;
mod modes;
mod transport;

pub use assemble::{
    assemble_modes, boundary_residual_order1, compare_states, interior_residual, AssembledModes,
    ResidualReport,
};
pub use boundary::{
    boundary_frame, integrate_transport, multiplier, multiplier_for, solve_boundary_amplitude,
    Amplitude, BoundaryFrame, MultiplierSpec,
};
pub use hierarchy::{build_hierarchy, Hierarchy, HierarchyInput};
pub use modes::{mode_table, Mode, ModeTable};
pub use transport::{
    exponential_chain_oracle, series_to_trace, solve_incoming, solve_outgoing, TransportCoeffs,
};

use crate::field::{Field2, Grid2};
use crate::{C64, CMat, RVec};
use std::collections::BTreeMap;

/// A C^3-valued coefficient field on the (t, x2) grid.
#[derive(Debug, Clone)]
pub struct VecField {
    pub c: [Field2; 3],
}

impl VecField {
    pub fn zeros(grid: &Grid2) -> Self {
        Self {
            c: [
                Field2::zeros(grid),
                Field2::zeros(grid),
                Field2::zeros(grid),
            ],
        }
    }

    pub fn sup(&self) -> f64 {
        self.c.iter().map(|f| f.sup()).fold(0.0, f64::max)
    }

    pub fn l2(&self) -> f64 {
        self.c.iter().map(|f| f.l2().powi(2)).sum::<f64>().sqrt()
    }

    pub fn add_scaled(&mut self, other: &VecField, s: C64) {
        for i in 0..3 {
            self.c[i].add_scaled(&other.c[i], s);
        }
    }

    pub fn scale(&mut self, s: C64) {
        for f in self.c.iter_mut() {
            f.scale(s);
        }
    }

    /// Kernel field sigma * r from a scalar field and a real vector.
    pub fn from_kernel(sigma: &Field2, r: &RVec) -> Self {
        let grid = sigma.grid.clone();
        let mut out = VecField::zeros(&grid);
        for i in 0..3 {
            out.c[i] = sigma.clone();
            out.c[i].scale(C64::new(r[i], 0.0));
        }
        out
    }

    /// Pointwise complex matrix application.
    pub fn apply(&self, m: &CMat) -> VecField {
        let grid = self.c[0].grid.clone();
        let mut out = VecField::zeros(&grid);
        for p in 0..grid.nt * grid.nx {
            let v = [self.c[0].data[p], self.c[1].data[p], self.c[2].data[p]];
            for i in 0..3 {
                out.c[i].data[p] = m[(i, 0)] * v[0] + m[(i, 1)] * v[1] + m[(i, 2)] * v[2];
            }
        }
        out
    }

    /// row . F as a scalar field, for a real row vector.
    pub fn dot_row(&self, row: &RVec) -> Field2 {
        let grid = self.c[0].grid.clone();
        let mut out = Field2::zeros(&grid);
        for p in 0..grid.nt * grid.nx {
            out.data[p] = self.c[0].data[p] * row[0]
                + self.c[1].data[p] * row[1]
                + self.c[2].data[p] * row[2];
        }
        out
    }

    /// Boundary trace of each component.
    pub fn trace0(&self) -> [Vec<C64>; 3] {
        [self.c[0].trace0(), self.c[1].trace0(), self.c[2].trace0()]
    }

    /// `L(d)F = d_t F + B2 d_x2 F` in the x1-independent reduction.
    pub fn l_op(&self, b2: &crate::RMat) -> VecField {
        let grid = self.c[0].grid.clone();
        let dts: Vec<Field2> = self.c.iter().map(|f| f.ddt()).collect();
        let dxs: Vec<Field2> = self.c.iter().map(|f| f.ddx()).collect();
        let mut out = VecField::zeros(&grid);
        for i in 0..3 {
            out.c[i] = dts[i].clone();
            for (k, dx) in dxs.iter().enumerate() {
                out.c[i].add_scaled(dx, C64::new(b2[(i, k)], 0.0));
            }
        }
        out
    }

    /// Value at a grid node.
    pub fn at(&self, i: usize, j: usize) -> [C64; 3] {
        [self.c[0].at(i, j), self.c[1].at(i, j), self.c[2].at(i, j)]
    }
}

/// A profile U_k: sparse map from theta-modes to vector coefficient fields.
#[derive(Debug, Clone)]
pub struct Profile {
    pub order: i32,
    pub fields: BTreeMap<Mode, VecField>,
    pub grid: Grid2,
}

impl Profile {
    pub fn new(order: i32, grid: &Grid2) -> Self {
        Self {
            order,
            fields: BTreeMap::new(),
            grid: grid.clone(),
        }
    }

    pub fn sup(&self) -> f64 {
        self.fields.values().map(|f| f.sup()).fold(0.0, f64::max)
    }

    pub fn mode_sups(&self) -> BTreeMap<Mode, f64> {
        self.fields.iter().map(|(m, f)| (*m, f.sup())).collect()
    }
}
