//! Direct stiff solver for the singular system: per-theta-mode fields
//! V_k(t, x2) advanced by an exact integrating factor for the ik/eps rotation,
//! an upwinded characteristic treatment of B2 d_x2 in eigencoordinates, and
//! explicit O(1) mode coupling.

use crate::error::{CoreError, Result};
use crate::linalg::{self, SymRotation};
use crate::spectral::{Frequency, SystemSpec};
use crate::{C64, CMat, RMat};
use serde::{Deserialize, Serialize};

/// Grid and scheme parameters for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Discretization {
    pub x2_max: f64,
    pub nx2: usize,
    pub dt: f64,
    pub t_max: f64,
    /// theta-mode window [kmin, kmax].
    pub kmin: i64,
    pub kmax: i64,
    /// Sponge-layer width at the outflow end.
    pub sponge_width: f64,
    /// Strength of the high-order filter (per step).
    pub filter: f64,
}

impl Discretization {
    /// Resolution-guarded construction: at least `ppw` points per x2
    /// oscillation of the fastest resolved phase at wavelength
    /// `2 pi eps / freq_max`, CFL-limited time step.
    pub fn for_run(
        spec: &SystemSpec,
        eps: f64,
        t_max: f64,
        freq_max: f64,
        ppw: f64,
        kmin: i64,
        kmax: i64,
    ) -> Result<Self> {
        let b2_evs = linalg::eigenvalues(&linalg::complexify(&spec.b2))?;
        let speeds: Vec<f64> = b2_evs.iter().map(|z| z.re).collect();
        let smax = speeds.iter().map(|s| s.abs()).fold(0.0, f64::max);
        let vin_max = speeds.iter().copied().filter(|s| *s > 0.0).fold(0.0, f64::max);
        let sponge = 0.35;
        let x2_max = vin_max * t_max + 0.25 + sponge;
        let wavelength = 2.0 * std::f64::consts::PI * eps / freq_max;
        let dx = wavelength / ppw;
        if ppw < 8.0 {
            return Err(CoreError::Resolution(format!(
                "need >= 8 points per oscillation, got {ppw}"
            )));
        }
        let nx2 = (x2_max / dx).ceil() as usize + 1;
        let dt = 0.35 * dx / smax;
        Ok(Self {
            x2_max,
            nx2,
            dt,
            t_max,
            kmin,
            kmax,
            sponge_width: sponge,
            filter: 0.25,
        })
    }

    pub fn dx(&self) -> f64 {
        self.x2_max / (self.nx2 - 1) as f64
    }

    pub fn n_modes(&self) -> usize {
        (self.kmax - self.kmin + 1) as usize
    }
}

/// Smooth compactly supported boundary pulse g1(t): a C-infinity bump on
/// (t_on, t_on + width), scaled to unit sup.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundaryPulse {
    pub t_on: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Default for BoundaryPulse {
    fn default() -> Self {
        Self {
            t_on: 0.05,
            width: 0.5,
            amplitude: 1.0,
        }
    }
}

impl BoundaryPulse {
    /// Scalar profile value; sup over t equals `amplitude`.
    pub fn value(&self, t: f64) -> f64 {
        let s = (t - self.t_on) / self.width;
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        // exp(-1/s) exp(-1/(1-s)) has sup e^-4 at s = 1/2
        self.amplitude * (54.598_150_033_144_24) * (-1.0 / s).exp() * (-1.0 / (1.0 - s)).exp()
    }

    pub fn sup(&self) -> f64 {
        self.amplitude
    }
}

/// Per-mode state: complex N-vector fields on the x2 grid, modes
/// kmin..=kmax flattened mode-major.
pub struct SingularState {
    pub disc: Discretization,
    /// data[m][c * nx + j] for mode index m, component c, grid point j.
    pub data: Vec<Vec<C64>>,
    pub n: usize,
}

impl SingularState {
    pub fn zeros(disc: &Discretization, n: usize) -> Self {
        let modes = disc.n_modes();
        Self {
            disc: disc.clone(),
            data: vec![vec![C64::new(0.0, 0.0); n * disc.nx2]; modes],
            n,
        }
    }

    pub fn mode(&self, k: i64) -> Option<&Vec<C64>> {
        if k < self.disc.kmin || k > self.disc.kmax {
            return None;
        }
        Some(&self.data[(k - self.disc.kmin) as usize])
    }

    /// sup over the theta grid of |sum_k V_k e^{ik theta}| over all (c, j).
    pub fn sup_theta(&self, n_theta: usize) -> f64 {
        let nx = self.disc.nx2;
        let mut sup: f64 = 0.0;
        for it in 0..n_theta {
            let theta = 2.0 * std::f64::consts::PI * it as f64 / n_theta as f64;
            for j in 0..nx {
                for c in 0..self.n {
                    let mut acc = C64::new(0.0, 0.0);
                    for (m, field) in self.data.iter().enumerate() {
                        let k = self.disc.kmin + m as i64;
                        let phase = C64::from_polar(1.0, k as f64 * theta);
                        acc += field[c * nx + j] * phase;
                    }
                    sup = sup.max(acc.norm());
                }
            }
        }
        sup
    }

    /// l2 norm over (x2, theta) via Parseval in theta.
    pub fn l2(&self) -> f64 {
        let dx = self.disc.dx();
        let s: f64 = self
            .data
            .iter()
            .flat_map(|f| f.iter())
            .map(|z| z.norm_sqr())
            .sum();
        (s * dx * 2.0 * std::f64::consts::PI).sqrt()
    }
}

/// Measured amplitudes of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub eps: f64,
    /// sup_{t, x2, theta} |u|.
    pub sup_norm: f64,
    /// max over t of the l2(x2, theta) norm.
    pub l2_norm: f64,
    /// sup of the boundary trace over (t, theta).
    pub trace_sup: f64,
    /// Per-mode max amplitude over the run.
    pub mode_sups: Vec<f64>,
    /// Earliest time the leading amplified mode exceeded `threshold`.
    pub onset_time: Option<f64>,
    pub steps: usize,
}

/// Assembled constant data for the evolution.
pub struct Evolution {
    pub spec: SystemSpec,
    pub beta_l: Frequency,
    /// omega_N(beta_l): the oscillation phase root.
    pub omega_n: f64,
    pub eps: f64,
    pub disc: Discretization,
    // B2 = T diag(speeds) T^-1
    speeds: Vec<f64>,
    t_mat: RMat,
    t_inv: RMat,
    /// columns of T with positive speed (incoming), as a matrix.
    t_in: RMat,
    t_out: RMat,
    b_t_in_inv: RMat,
    b_t_out: RMat,
    rotation: SymRotation,
    incoming_idx: Vec<usize>,
    outgoing_idx: Vec<usize>,
}

impl Evolution {
    /// Assemble the singular evolution operator. Requires the rotation
    /// generator `sigma_l I + eta_l B1` to be symmetric (true for every
    /// shipped preset) so the phase rotation is exactly unitary, and the
    /// boundary closure `B T_in` to be invertible.
    pub fn new(
        spec: &SystemSpec,
        beta_l: &Frequency,
        omega_n: f64,
        eps: f64,
        disc: &Discretization,
    ) -> Result<Self> {
        let n = spec.n;
        let h = RMat::identity(n, n) * beta_l.sigma + &spec.b1 * beta_l.eta;
        if (&h - h.transpose()).norm() > 1e-12 {
            return Err(CoreError::Config(
                "rotation generator must be symmetric for the exact phase split".into(),
            ));
        }
        // B2 eigen-decomposition; shipped systems have real eigenstructure
        let pairs = linalg::eig(&linalg::complexify(&spec.b2))?;
        let mut real_pairs: Vec<(f64, Vec<f64>)> = Vec::new();
        for (l, v) in pairs {
            if l.im.abs() > 1e-10 {
                return Err(CoreError::Config("B2 must have real eigenvalues".into()));
            }
            let maxc = (0..n)
                .max_by(|a, b| v[*a].norm().partial_cmp(&v[*b].norm()).unwrap())
                .unwrap();
            let phase = v[maxc] / C64::new(v[maxc].norm(), 0.0);
            real_pairs.push((l.re, (0..n).map(|i| (v[i] / phase).re).collect()));
        }
        real_pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let speeds: Vec<f64> = real_pairs.iter().map(|(l, _)| *l).collect();
        let t_mat = RMat::from_fn(n, n, |i, j| real_pairs[j].1[i]);
        let t_inv = linalg::inverse_real(&t_mat)?;
        let incoming_idx: Vec<usize> = (0..n).filter(|j| speeds[*j] > 0.0).collect();
        let outgoing_idx: Vec<usize> = (0..n).filter(|j| speeds[*j] <= 0.0).collect();
        if incoming_idx.len() != spec.p {
            return Err(CoreError::Config(format!(
                "B2 has {} positive eigenvalues, expected p = {}",
                incoming_idx.len(),
                spec.p
            )));
        }
        let t_in = t_mat.select_columns(&incoming_idx);
        let t_out = t_mat.select_columns(&outgoing_idx);
        let b_t_in = &spec.bnd * &t_in;
        let b_t_in_inv = linalg::inverse_real(&b_t_in).map_err(|_| {
            CoreError::Config("boundary closure B T_in is singular".into())
        })?;
        let b_t_out = &spec.bnd * &t_out;
        Ok(Self {
            spec: spec.clone(),
            beta_l: *beta_l,
            omega_n,
            eps,
            disc: disc.clone(),
            speeds,
            t_mat,
            t_inv,
            t_in,
            t_out,
            b_t_in_inv,
            b_t_out,
            rotation: SymRotation::new(&h),
            incoming_idx,
            outgoing_idx,
        })
    }

    /// Determinant margin of the boundary closure.
    pub fn closure_margin(&self) -> f64 {
        let b_t_in = &self.spec.bnd * &self.t_in;
        b_t_in.determinant().abs()
    }

    fn boundary_data(&self, t: f64, k: i64, pulse: &BoundaryPulse, g_dir: &[f64]) -> Vec<C64> {
        let p = self.spec.p;
        if k != 1 {
            return vec![C64::new(0.0, 0.0); p];
        }
        let g = self.eps * pulse.value(t);
        (0..p).map(|i| C64::new(g * g_dir[i], 0.0)).collect()
    }

    /// Apply the characteristic boundary closure at x2 = 0 for every mode.
    fn apply_bc(&self, state: &mut SingularState, t: f64, pulse: &BoundaryPulse, g_dir: &[f64]) {
        let n = self.n();
        let nx = self.disc.nx2;
        let p = self.spec.p;
        for m in 0..state.data.len() {
            let k = self.disc.kmin + m as i64;
            // characteristic variables at the boundary point
            let mut w = vec![C64::new(0.0, 0.0); n];
            for (c, wc) in w.iter_mut().enumerate() {
                for cc in 0..n {
                    *wc += C64::new(self.t_inv[(c, cc)], 0.0) * state.data[m][cc * nx];
                }
            }
            let bvec: Vec<C64> = self.outgoing_idx.iter().map(|&c| w[c]).collect();
            let g = self.boundary_data(t, k, pulse, g_dir);
            // solve B T_in a = g - B T_out b
            let mut rhs = g;
            for (i, r) in rhs.iter_mut().enumerate() {
                for (jj, b) in bvec.iter().enumerate() {
                    *r -= C64::new(self.b_t_out[(i, jj)], 0.0) * b;
                }
            }
            let mut avec = vec![C64::new(0.0, 0.0); p];
            for (i, a) in avec.iter_mut().enumerate() {
                for jj in 0..p {
                    *a += C64::new(self.b_t_in_inv[(i, jj)], 0.0) * rhs[jj];
                }
            }
            for c in 0..n {
                let mut v = C64::new(0.0, 0.0);
                for (jj, a) in avec.iter().enumerate() {
                    v += C64::new(self.t_in[(c, jj)], 0.0) * a;
                }
                for (jj, b) in bvec.iter().enumerate() {
                    v += C64::new(self.t_out[(c, jj)], 0.0) * b;
                }
                state.data[m][c * nx] = v;
            }
        }
    }

    fn n(&self) -> usize {
        self.spec.n
    }

    /// Advection + coupling right-hand side into `out`.
    ///
    /// d_t U_k = -B2 d_x2 U_k - sum_r alpha_r e^{i r omega_N x2 / eps} M U_{k-r}
    fn rhs(&self, state: &SingularState, phases: &[Vec<C64>], out: &mut [Vec<C64>]) {
        let n = self.n();
        let nx = self.disc.nx2;
        let dx = self.disc.dx();
        let inv12 = 1.0 / (12.0 * dx);
        let m_mat = &self.spec.osc_matrix;
        for (m, dst) in out.iter_mut().enumerate() {
            let field = &state.data[m];
            // -B2 d_x2 in characteristic variables is equivalent to -B2 * D4(U);
            // use fourth-order centered differences with one-sided closures.
            for c in 0..n {
                let row = &field[c * nx..(c + 1) * nx];
                let d = &mut dst[c * nx..(c + 1) * nx];
                for j in 0..nx {
                    let der = if j >= 2 && j + 2 < nx {
                        (row[j - 2] - row[j + 2]) * inv12 + (row[j + 1] - row[j - 1]) * (8.0 * inv12)
                    } else if j == 0 {
                        (row[0] * -25.0 + row[1] * 48.0 - row[2] * 36.0 + row[3] * 16.0
                            - row[4] * 3.0)
                            * inv12
                    } else if j == 1 {
                        (row[0] * -3.0 - row[1] * 10.0 + row[2] * 18.0 - row[3] * 6.0 + row[4])
                            * inv12
                    } else if j == nx - 2 {
                        (row[nx - 1] * 3.0 + row[nx - 2] * 10.0 - row[nx - 3] * 18.0
                            + row[nx - 4] * 6.0
                            - row[nx - 5])
                            * inv12
                    } else {
                        (row[nx - 1] * 25.0 - row[nx - 2] * 48.0 + row[nx - 3] * 36.0
                            - row[nx - 4] * 16.0
                            + row[nx - 5] * 3.0)
                            * inv12
                    };
                    d[j] = der;
                }
            }
            // multiply by -B2 pointwise: dst := -B2 * dst
            for j in 0..nx {
                let mut v = vec![C64::new(0.0, 0.0); n];
                for (i, vi) in v.iter_mut().enumerate() {
                    for c in 0..n {
                        *vi += C64::new(self.spec.b2[(i, c)], 0.0) * dst[c * nx + j];
                    }
                }
                for (i, vi) in v.iter().enumerate() {
                    dst[i * nx + j] = -vi;
                }
            }
            // coupling terms
            let k = self.disc.kmin + m as i64;
            for (ri, (r, alpha)) in self.spec.osc_spectrum.iter().enumerate() {
                let src_k = k - r;
                if src_k < self.disc.kmin || src_k > self.disc.kmax {
                    continue;
                }
                let src = &state.data[(src_k - self.disc.kmin) as usize];
                let phase = &phases[ri];
                for j in 0..nx {
                    let mut v = vec![C64::new(0.0, 0.0); n];
                    for (i, vi) in v.iter_mut().enumerate() {
                        for c in 0..n {
                            *vi += m_mat[(i, c)] * src[c * nx + j];
                        }
                    }
                    let ph = alpha * phase[j];
                    for (i, vi) in v.iter().enumerate() {
                        dst[i * nx + j] -= ph * vi;
                    }
                }
            }
        }
    }

    /// Run the evolution, measuring norms; `g_dir` is the direction of the
    /// boundary data in C^p.
    pub fn evolve(
        &self,
        pulse: &BoundaryPulse,
        g_dir: &[f64],
        measure_every: usize,
        threshold: f64,
    ) -> Result<RunResult> {
        let n = self.n();
        let nx = self.disc.nx2;
        let dt = self.disc.dt;
        let n_steps = (self.disc.t_max / dt).ceil() as usize;
        let mut state = SingularState::zeros(&self.disc, n);
        let modes = self.disc.n_modes();

        // half-step rotations exp(-i k dt/(2 eps) H) per mode
        let rots: Vec<CMat> = (0..modes)
            .map(|m| {
                let k = self.disc.kmin + m as i64;
                self.rotation.exp(-(k as f64) * dt / (2.0 * self.eps))
            })
            .collect();
        // oscillation phases e^{i r omega_N x2 / eps} per spectrum entry
        let dx = self.disc.dx();
        let phases: Vec<Vec<C64>> = self
            .spec
            .osc_spectrum
            .iter()
            .map(|(r, _)| {
                (0..nx)
                    .map(|j| {
                        C64::from_polar(1.0, *r as f64 * self.omega_n * (j as f64 * dx) / self.eps)
                    })
                    .collect()
            })
            .collect();
        // sponge profile
        let x_on = self.disc.x2_max - self.disc.sponge_width;
        let sponge: Vec<f64> = (0..nx)
            .map(|j| {
                let x = j as f64 * dx;
                if x > x_on {
                    let s = (x - x_on) / self.disc.sponge_width;
                    1.0 - 20.0 * dt * s * s
                } else {
                    1.0
                }
            })
            .collect();

        let mut work = StepWork::new(modes, n, nx, &self.disc);

        let mut sup: f64 = 0.0;
        let mut l2: f64 = 0.0;
        let mut trace_sup: f64 = 0.0;
        let mut mode_sups = vec![0.0f64; modes];
        let mut onset: Option<f64> = None;
        let mut t = 0.0;

        for step in 0..n_steps {
            self.advance(&mut state, &mut work, &rots, &phases, &sponge, &mut t, pulse, g_dir);

            if step % measure_every == 0 || step + 1 == n_steps {
                let s = state.sup_theta(24);
                if !s.is_finite() {
                    return Err(CoreError::Resolution(format!(
                        "solution lost finiteness at t = {t:.4}"
                    )));
                }
                sup = sup.max(s);
                l2 = l2.max(state.l2());
                for (m, ms) in mode_sups.iter_mut().enumerate() {
                    let field_sup = state.data[m].iter().map(|z| z.norm()).fold(0.0, f64::max);
                    *ms = ms.max(field_sup);
                }
                // boundary trace sup over theta
                let mut tr: f64 = 0.0;
                for it in 0..24 {
                    let theta = 2.0 * std::f64::consts::PI * it as f64 / 24.0;
                    for c in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for (m, field) in state.data.iter().enumerate() {
                            let k = self.disc.kmin + m as i64;
                            acc += field[c * nx] * C64::from_polar(1.0, k as f64 * theta);
                        }
                        tr = tr.max(acc.norm());
                    }
                }
                trace_sup = trace_sup.max(tr);
                if onset.is_none() && s > threshold {
                    onset = Some(t);
                }
            }
        }
        Ok(RunResult {
            eps: self.eps,
            sup_norm: sup,
            l2_norm: l2,
            trace_sup,
            mode_sups,
            onset_time: onset,
            steps: n_steps,
        })
    }

    /// Snapshot evolution: like [`Self::evolve`] but returning the final state
    /// and recording mode traces at the requested times.
    pub fn evolve_with_snapshots(
        &self,
        pulse: &BoundaryPulse,
        g_dir: &[f64],
        snapshot_times: &[f64],
    ) -> Result<(SingularState, Vec<SingularState>)> {
        let n = self.n();
        let nx = self.disc.nx2;
        let dt = self.disc.dt;
        let n_steps = (self.disc.t_max / dt).ceil() as usize;
        let mut state = SingularState::zeros(&self.disc, n);
        let modes = self.disc.n_modes();
        let rots: Vec<CMat> = (0..modes)
            .map(|m| {
                let k = self.disc.kmin + m as i64;
                self.rotation.exp(-(k as f64) * dt / (2.0 * self.eps))
            })
            .collect();
        let dx = self.disc.dx();
        let phases: Vec<Vec<C64>> = self
            .spec
            .osc_spectrum
            .iter()
            .map(|(r, _)| {
                (0..nx)
                    .map(|j| {
                        C64::from_polar(1.0, *r as f64 * self.omega_n * (j as f64 * dx) / self.eps)
                    })
                    .collect()
            })
            .collect();
        let x_on = self.disc.x2_max - self.disc.sponge_width;
        let sponge: Vec<f64> = (0..nx)
            .map(|j| {
                let x = j as f64 * dx;
                if x > x_on {
                    let s = (x - x_on) / self.disc.sponge_width;
                    1.0 - 20.0 * dt * s * s
                } else {
                    1.0
                }
            })
            .collect();
        let mut work = StepWork::new(modes, n, nx, &self.disc);
        let mut snaps = Vec::new();
        let mut next_snap = 0usize;
        let mut t = 0.0;
        for _step in 0..n_steps {
            self.advance(&mut state, &mut work, &rots, &phases, &sponge, &mut t, pulse, g_dir);
            while next_snap < snapshot_times.len() && t >= snapshot_times[next_snap] - 0.5 * dt {
                let mut copy = SingularState::zeros(&self.disc, n);
                copy.data.clone_from(&state.data);
                snaps.push(copy);
                next_snap += 1;
            }
        }
        Ok((state, snaps))
    }
}

/// Scratch buffers of the time stepper.
struct StepWork {
    k: Vec<Vec<C64>>,
    u1: SingularState,
    u2: SingularState,
}

impl StepWork {
    fn new(modes: usize, n: usize, nx: usize, disc: &Discretization) -> Self {
        Self {
            k: vec![vec![C64::new(0.0, 0.0); n * nx]; modes],
            u1: SingularState::zeros(disc, n),
            u2: SingularState::zeros(disc, n),
        }
    }
}

impl Evolution {
    /// One full time step: exact half rotation, an SSP-RK3 advection +
    /// coupling stage (stable with centered fourth-order differences), the
    /// high-order filter and sponge, the boundary closure, and the second
    /// half rotation.
    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        state: &mut SingularState,
        work: &mut StepWork,
        rots: &[CMat],
        phases: &[Vec<C64>],
        sponge: &[f64],
        t: &mut f64,
        pulse: &BoundaryPulse,
        g_dir: &[f64],
    ) {
        let n = self.n();
        let nx = self.disc.nx2;
        let dt = self.disc.dt;
        let modes = self.disc.n_modes();
        rotate(state, rots, n, nx);
        // u1 = u + dt L(u)
        self.rhs(state, phases, &mut work.k);
        for m in 0..modes {
            for (a, (s, d)) in work.u1.data[m]
                .iter_mut()
                .zip(state.data[m].iter().zip(work.k[m].iter()))
            {
                *a = s + d * dt;
            }
        }
        self.apply_bc(&mut work.u1, *t + dt, pulse, g_dir);
        // u2 = 3/4 u + 1/4 (u1 + dt L(u1))
        self.rhs(&work.u1, phases, &mut work.k);
        for m in 0..modes {
            for (a, ((s, u1v), d)) in work.u2.data[m].iter_mut().zip(
                state.data[m]
                    .iter()
                    .zip(work.u1.data[m].iter())
                    .zip(work.k[m].iter()),
            ) {
                *a = s * 0.75 + (u1v + d * dt) * 0.25;
            }
        }
        self.apply_bc(&mut work.u2, *t + 0.5 * dt, pulse, g_dir);
        // u = 1/3 u + 2/3 (u2 + dt L(u2))
        self.rhs(&work.u2, phases, &mut work.k);
        for m in 0..modes {
            for (s, (u2v, d)) in state.data[m]
                .iter_mut()
                .zip(work.u2.data[m].iter().zip(work.k[m].iter()))
            {
                *s = *s * (1.0 / 3.0) + (u2v + d * dt) * (2.0 / 3.0);
            }
        }
        for m in 0..modes {
            filter6(&mut state.data[m], n, nx, self.disc.filter);
            for j in 0..nx {
                if sponge[j] < 1.0 {
                    for c in 0..n {
                        state.data[m][c * nx + j] *= sponge[j];
                    }
                }
            }
        }
        *t += dt;
        self.apply_bc(state, *t, pulse, g_dir);
        rotate(state, rots, n, nx);
    }
}

fn rotate(state: &mut SingularState, rots: &[CMat], n: usize, nx: usize) {
    for (m, field) in state.data.iter_mut().enumerate() {
        let rot = &rots[m];
        for j in 0..nx {
            let mut v = vec![C64::new(0.0, 0.0); n];
            for (i, vi) in v.iter_mut().enumerate() {
                for c in 0..n {
                    *vi += rot[(i, c)] * field[c * nx + j];
                }
            }
            for (i, vi) in v.iter().enumerate() {
                field[i * nx + j] = *vi;
            }
        }
    }
}

/// Sixth-difference smoothing filter, interior points only.
fn filter6(field: &mut [C64], n: usize, nx: usize, strength: f64) {
    if strength == 0.0 || nx < 7 {
        return;
    }
    let c = strength / 64.0;
    let mut row = vec![C64::new(0.0, 0.0); nx];
    for comp in 0..n {
        row.copy_from_slice(&field[comp * nx..(comp + 1) * nx]);
        for j in 3..nx - 3 {
            let d6 = row[j - 3] - row[j - 2] * 6.0 + row[j - 1] * 15.0 - row[j] * 20.0
                + row[j + 1] * 15.0
                - row[j + 2] * 6.0
                + row[j + 3];
            field[comp * nx + j] -= d6 * c;
        }
    }
}

/// Amplitude-ratio measurement of a run against the boundary-data scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measurement {
    pub eps: f64,
    /// sup |u| / (eps sup |g1|).
    pub sup_ratio: f64,
    pub l2_ratio: f64,
    pub onset_time: Option<f64>,
}

pub fn measure(run: &RunResult, pulse: &BoundaryPulse) -> Measurement {
    let scale = run.eps * pulse.sup();
    Measurement {
        eps: run.eps,
        sup_ratio: run.sup_norm / scale,
        l2_ratio: run.l2_norm / scale,
        onset_time: run.onset_time,
    }
}

/// Least-squares slope of log(ratio) against log(eps).
pub fn fitted_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (eps, ratio) in points {
        let (x, y) = (eps.ln(), ratio.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
