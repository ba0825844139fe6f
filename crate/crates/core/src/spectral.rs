//! Constant-coefficient system algebra: symbols, labeled eigenmode frames,
//! phase classification, projectors, and structural assumption checks.

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::{C64, CMat, CVec, RMat, RVec};
use serde::{Deserialize, Serialize};

/// Relative eigenvalue-gap floor below which a frame counts as degenerate.
pub const GAP_TOL: f64 = 1e-8;
/// Relative step for finite-difference group velocities.
pub const FD_STEP: f64 = 1e-6;
/// Glancing guard: |d_xi lambda| below this (relative) flags a glancing root.
pub const GLANCING_TOL: f64 = 1e-8;

/// The constant-coefficient boundary problem
/// `u_t + B1 u_x1 + B2 u_x2 + D(phi_in/eps) u = F`, `B u = G` on `x2 = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SystemSpecJson", into = "SystemSpecJson")]
pub struct SystemSpec {
    /// Matrix dimension N.
    pub n: usize,
    /// Flux matrix in x1 (N x N, row-major in serialized form).
    pub b1: RMat,
    /// Flux matrix in x2; must be invertible.
    pub b2: RMat,
    /// Boundary matrix (p x N), rank p.
    pub bnd: RMat,
    /// Number of positive eigenvalues of `b2` (= number of incoming modes).
    pub p: usize,
    /// Constant matrix multiplying the scalar oscillation.
    pub osc_matrix: CMat,
    /// Fourier spectrum of d(theta_in): pairs (r, alpha_r), r != 0.
    pub osc_spectrum: Vec<(i64, C64)>,
    /// Decay order M >= 2 governing |alpha_r| <~ |r|^-(M+2).
    pub decay_order: u32,
}

impl SystemSpec {
    pub fn new(
        b1: RMat,
        b2: RMat,
        bnd: RMat,
        p: usize,
        osc_matrix: CMat,
        osc_spectrum: Vec<(i64, C64)>,
        decay_order: u32,
    ) -> Result<Self> {
        let n = b1.nrows();
        if b1.ncols() != n || b2.nrows() != n || b2.ncols() != n {
            return Err(CoreError::Config("flux matrices must be square NxN".into()));
        }
        if b2.clone().try_inverse().is_none() {
            return Err(CoreError::Config("B2 must be invertible".into()));
        }
        if bnd.ncols() != n || bnd.nrows() != p {
            return Err(CoreError::Config(format!(
                "boundary matrix must be {p} x {n}"
            )));
        }
        if p == 0 || p >= n {
            return Err(CoreError::Config("need 1 <= p <= N-1".into()));
        }
        if linalg::rank(&bnd, 1e-10) != p {
            return Err(CoreError::Config("boundary matrix must have rank p".into()));
        }
        if osc_spectrum.iter().any(|(r, _)| *r == 0) {
            return Err(CoreError::Config(
                "oscillatory spectrum must not contain r = 0".into(),
            ));
        }
        if decay_order < 2 {
            return Err(CoreError::Config("decay order M must be >= 2".into()));
        }
        Ok(Self {
            n,
            b1,
            b2,
            bnd,
            p,
            osc_matrix,
            osc_spectrum,
            decay_order,
        })
    }

    /// True iff the oscillatory spectrum is one-sided (all r > 0 or all r < 0).
    pub fn spectrum_one_sided(&self) -> bool {
        let pos = self.osc_spectrum.iter().any(|(r, _)| *r > 0);
        let neg = self.osc_spectrum.iter().any(|(r, _)| *r < 0);
        !(pos && neg)
    }

    /// Number of support points of the spectrum.
    pub fn spectrum_support(&self) -> usize {
        self.osc_spectrum
            .iter()
            .filter(|(_, a)| a.norm() > 0.0)
            .count()
    }
}

/// JSON mirror of [`SystemSpec`] with row-major matrices and (re, im) pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpecJson {
    pub n: usize,
    pub b1: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
    pub bnd: Vec<Vec<f64>>,
    pub p: usize,
    pub osc_matrix: Vec<Vec<[f64; 2]>>,
    pub osc_spectrum: Vec<(i64, [f64; 2])>,
    pub decay_order: u32,
}

fn rows_of(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rmat_of(rows: &[Vec<f64>]) -> Result<RMat> {
    let nr = rows.len();
    if nr == 0 {
        return Err(CoreError::Config("empty matrix".into()));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(CoreError::Config("ragged matrix rows".into()));
    }
    Ok(RMat::from_fn(nr, nc, |i, j| rows[i][j]))
}

impl From<SystemSpec> for SystemSpecJson {
    fn from(s: SystemSpec) -> Self {
        SystemSpecJson {
            n: s.n,
            b1: rows_of(&s.b1),
            b2: rows_of(&s.b2),
            bnd: rows_of(&s.bnd),
            p: s.p,
            osc_matrix: (0..s.osc_matrix.nrows())
                .map(|i| {
                    (0..s.osc_matrix.ncols())
                        .map(|j| [s.osc_matrix[(i, j)].re, s.osc_matrix[(i, j)].im])
                        .collect()
                })
                .collect(),
            osc_spectrum: s
                .osc_spectrum
                .iter()
                .map(|(r, a)| (*r, [a.re, a.im]))
                .collect(),
            decay_order: s.decay_order,
        }
    }
}

impl TryFrom<SystemSpecJson> for SystemSpec {
    type Error = CoreError;
    fn try_from(j: SystemSpecJson) -> Result<Self> {
        let b1 = rmat_of(&j.b1)?;
        let b2 = rmat_of(&j.b2)?;
        let bnd = rmat_of(&j.bnd)?;
        if b1.nrows() != j.n {
            return Err(CoreError::Config("n does not match the matrices".into()));
        }
        let nr = j.osc_matrix.len();
        let osc = CMat::from_fn(nr, nr, |i, k| {
            C64::new(j.osc_matrix[i][k][0], j.osc_matrix[i][k][1])
        });
        SystemSpec::new(
            b1,
            b2,
            bnd,
            j.p,
            osc,
            j.osc_spectrum
                .into_iter()
                .map(|(r, a)| (r, C64::new(a[0], a[1])))
                .collect(),
            j.decay_order,
        )
    }
}

/// A frequency zeta = (sigma - i gamma, eta) with gamma >= 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub sigma: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl Frequency {
    pub fn new(sigma: f64, gamma: f64, eta: f64) -> Result<Self> {
        if sigma == 0.0 && gamma == 0.0 && eta == 0.0 {
            return Err(CoreError::ZeroFrequency);
        }
        if gamma < 0.0 {
            return Err(CoreError::Precondition("gamma must be >= 0".into()));
        }
        Ok(Self { sigma, gamma, eta })
    }

    pub fn real(sigma: f64, eta: f64) -> Result<Self> {
        Self::new(sigma, 0.0, eta)
    }

    pub fn tau(&self) -> C64 {
        C64::new(self.sigma, -self.gamma)
    }

    /// |zeta| in the (sigma, gamma, eta) Euclidean norm.
    pub fn norm(&self) -> f64 {
        (self.sigma * self.sigma + self.gamma * self.gamma + self.eta * self.eta).sqrt()
    }

    /// The mirror point (-sigma - i gamma, -eta) used by the conjugation rule.
    pub fn mirror(&self) -> Frequency {
        Frequency {
            sigma: -self.sigma,
            gamma: self.gamma,
            eta: -self.eta,
        }
    }

    pub fn scale(&self, s: f64) -> Frequency {
        Frequency {
            sigma: s * self.sigma,
            gamma: s * self.gamma,
            eta: s * self.eta,
        }
    }

    /// Distance between unit directions in R^3 = (sigma, gamma, eta).
    pub fn direction_distance(&self, other: &Frequency) -> f64 {
        let a = self.norm();
        let b = other.norm();
        let ds = self.sigma / a - other.sigma / b;
        let dg = self.gamma / a - other.gamma / b;
        let de = self.eta / a - other.eta / b;
        (ds * ds + dg * dg + de * de).sqrt()
    }
}

/// Which half of the cone `Gamma_delta(beta)` a frequency lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeHalf {
    Plus,
    Minus,
}

/// Membership of `zeta` in `Gamma_delta(beta) = Gamma^+ u Gamma^-`.
/// Boundary points count as inside (closed cones).
pub fn cone_half(zeta: &Frequency, beta: &Frequency, delta: f64) -> Option<ConeHalf> {
    if zeta.direction_distance(beta) <= delta {
        Some(ConeHalf::Plus)
    } else if zeta.mirror().direction_distance(beta) <= delta {
        Some(ConeHalf::Minus)
    } else {
        None
    }
}

/// The symbol `A(zeta) = -(B2^-1 tau + B2^-1 B1 eta)`.
pub fn symbol(spec: &SystemSpec, zeta: &Frequency) -> Result<CMat> {
    if zeta.sigma == 0.0 && zeta.gamma == 0.0 && zeta.eta == 0.0 {
        return Err(CoreError::ZeroFrequency);
    }
    let b2i = linalg::inverse_real(&spec.b2)
        .map_err(|_| CoreError::Config("B2 must be invertible".into()))?;
    let a0 = linalg::complexify(&b2i);
    let a1 = linalg::complexify(&(&b2i * &spec.b1));
    Ok(-(a0 * zeta.tau() + a1 * C64::new(zeta.eta, 0.0)))
}

/// Labeled root data at a hyperbolic boundary frequency `beta`.
///
/// Modes are stored in the paper's order: the N-p outgoing roots first
/// (ascending), then the p incoming roots (ascending). The oscillation phase
/// is selected separately when building an omega table.
#[derive(Debug, Clone)]
pub struct PhaseSet {
    /// Unit covector (sigma_l, eta_l).
    pub beta: Frequency,
    /// Real roots omega_m(beta), labeled as described above.
    pub phase_freqs: Vec<f64>,
    /// Real unit eigenvectors r_m(beta), columns in the same labeling.
    pub rvecs: RMat,
    /// Group velocities (v_1, v_2) per mode.
    pub group_velocities: Vec<[f64; 2]>,
    /// Incoming flag per mode (true iff the x2-component of v is positive).
    pub classification: Vec<bool>,
}

impl PhaseSet {
    pub fn n_incoming(&self) -> usize {
        self.classification.iter().filter(|c| **c).count()
    }

    pub fn n_outgoing(&self) -> usize {
        self.classification.len() - self.n_incoming()
    }

    /// Indices of incoming modes (in label order).
    pub fn incoming_indices(&self) -> Vec<usize> {
        (0..self.classification.len())
            .filter(|m| self.classification[*m])
            .collect()
    }

    pub fn outgoing_indices(&self) -> Vec<usize> {
        (0..self.classification.len())
            .filter(|m| !self.classification[*m])
            .collect()
    }
}

/// Eigenvalue of `B1 eta + B2 xi` continued from a reference eigenvector.
fn matched_space_eigenvalue(spec: &SystemSpec, eta: f64, xi: f64, refvec: &RVec) -> Result<f64> {
    let m = &spec.b1 * eta + &spec.b2 * xi;
    let pairs = linalg::eig(&linalg::complexify(&m))?;
    let mut best = (f64::MIN, 0.0);
    for (l, v) in &pairs {
        let overlap = refvec
            .iter()
            .zip(v.iter())
            .map(|(a, b)| C64::new(*a, 0.0).conj() * b)
            .sum::<C64>()
            .norm();
        if overlap > best.0 {
            best = (overlap, l.re);
        }
    }
    Ok(best.1)
}

/// Classify the characteristic phases at a hyperbolic boundary frequency.
///
/// Group velocities come from centered finite differences of the matched
/// characteristic root lambda_k through each planar frequency (eta, omega_m).
pub fn classify_phases(spec: &SystemSpec, beta: &Frequency) -> Result<PhaseSet> {
    if beta.gamma != 0.0 {
        return Err(CoreError::Precondition(
            "phase classification requires a real boundary frequency".into(),
        ));
    }
    let a = symbol(spec, beta)?;
    let pairs = linalg::eig(&a)?;
    let scale = beta.norm();
    // hyperbolic region: real, distinct roots
    for (l, _) in &pairs {
        if l.im.abs() > 1e-9 * scale.max(1.0) {
            return Err(CoreError::Classification(format!(
                "complex root {l}: beta outside the hyperbolic region"
            )));
        }
    }
    let mut roots: Vec<(f64, RVec)> = pairs
        .into_iter()
        .map(|(l, v)| (l.re, realize(&v)))
        .collect();
    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in roots.windows(2) {
        if (w[1].0 - w[0].0).abs() < GAP_TOL * scale {
            return Err(CoreError::DegenerateFrame(format!(
                "root gap {} below tolerance",
                w[1].0 - w[0].0
            )));
        }
    }

    let h = FD_STEP * scale.max(1.0);
    let mut omegas = Vec::new();
    let mut vels = Vec::new();
    let mut incoming = Vec::new();
    let mut vecs = Vec::new();
    for (omega, v) in &roots {
        // lambda surface through (eta, omega) with value -sigma
        let lp_eta = matched_space_eigenvalue(spec, beta.eta + h, *omega, v)?;
        let lm_eta = matched_space_eigenvalue(spec, beta.eta - h, *omega, v)?;
        let lp_xi = matched_space_eigenvalue(spec, beta.eta, *omega + h, v)?;
        let lm_xi = matched_space_eigenvalue(spec, beta.eta, *omega - h, v)?;
        let d_eta = (lp_eta - lm_eta) / (2.0 * h);
        let d_xi = (lp_xi - lm_xi) / (2.0 * h);
        if d_xi.abs() < GLANCING_TOL * scale.max(1.0) {
            return Err(CoreError::Classification(format!(
                "glancing root omega = {omega}: |d_xi lambda| = {d_xi:e}"
            )));
        }
        omegas.push(*omega);
        vels.push([d_eta, d_xi]);
        incoming.push(d_xi > 0.0);
        vecs.push(v.clone());
    }
    if incoming.iter().filter(|c| **c).count() != spec.p {
        return Err(CoreError::Classification(format!(
            "expected {} incoming modes, classified {}",
            spec.p,
            incoming.iter().filter(|c| **c).count()
        )));
    }

    // relabel: outgoing first (ascending), then incoming (ascending)
    let mut order: Vec<usize> = (0..omegas.len()).collect();
    order.sort_by(|&i, &j| {
        incoming[i]
            .cmp(&incoming[j])
            .then(omegas[i].partial_cmp(&omegas[j]).unwrap())
    });
    let n = omegas.len();
    let rvecs = RMat::from_fn(n, n, |i, j| vecs[order[j]][i]);
    Ok(PhaseSet {
        beta: *beta,
        phase_freqs: order.iter().map(|&i| omegas[i]).collect(),
        rvecs,
        group_velocities: order.iter().map(|&i| vels[i]).collect(),
        classification: order.iter().map(|&i| incoming[i]).collect(),
    })
}

/// Choose a real representative of a complex vector that is real up to phase.
fn realize(v: &CVec) -> RVec {
    let k = (0..v.len())
        .max_by(|a, b| v[*a].norm().partial_cmp(&v[*b].norm()).unwrap())
        .unwrap();
    let phase = v[k] / C64::new(v[k].norm(), 0.0);
    let w = v.map(|z| (z / phase).re);
    let norm = w.norm();
    let w = w / norm;
    // deterministic sign: largest-modulus entry positive
    if w[k] < 0.0 { -w } else { w }
}

/// Eigenmode frame at a frequency inside `Gamma_delta(beta)`.
#[derive(Debug, Clone)]
pub struct ModeFrame {
    pub zeta: Frequency,
    /// omega_j(zeta), labeled by continuation from the cone apex.
    pub omegas: Vec<C64>,
    /// Unit eigenvectors r_j (columns).
    pub r_cols: CMat,
    /// Unnormalized eigenvectors R_j, homogeneous of degree one, R_j(beta) = r_j(beta).
    pub big_r_cols: CMat,
    /// Rows of S^-1 for S = [r_1 .. r_N].
    pub ell_rows: CMat,
    /// Incoming flag per label (same labeling as the apex phase set).
    pub incoming: Vec<bool>,
}

impl ModeFrame {
    pub fn n_incoming(&self) -> usize {
        self.incoming.iter().filter(|c| **c).count()
    }

    /// The N x p matrix of unit incoming eigenvectors.
    pub fn r_minus(&self) -> CMat {
        let idx: Vec<usize> = (0..self.incoming.len())
            .filter(|j| self.incoming[*j])
            .collect();
        self.r_cols.select_columns(&idx)
    }

    /// The unnormalized counterpart of [`Self::r_minus`].
    pub fn big_r_minus(&self) -> CMat {
        let idx: Vec<usize> = (0..self.incoming.len())
            .filter(|j| self.incoming[*j])
            .collect();
        self.big_r_cols.select_columns(&idx)
    }
}

/// Build the labeled eigenframe at `zeta` in the cone around `phases.beta`.
///
/// On the `Gamma^-` half the frame comes from the conjugation rule applied to
/// the mirror point, so conjugate symmetry holds by construction.
pub fn mode_frame(spec: &SystemSpec, zeta: &Frequency, phases: &PhaseSet) -> Result<ModeFrame> {
    mode_frame_delta(spec, zeta, phases, 0.5)
}

/// As [`mode_frame`], enforcing cone membership at width `delta`.
pub fn mode_frame_delta(
    spec: &SystemSpec,
    zeta: &Frequency,
    phases: &PhaseSet,
    delta: f64,
) -> Result<ModeFrame> {
    match cone_half(zeta, &phases.beta, delta) {
        Some(ConeHalf::Plus) => mode_frame_plus(spec, zeta, phases),
        Some(ConeHalf::Minus) => {
            let mirror = mode_frame_plus(spec, &zeta.mirror(), phases)?;
            let n = spec.n;
            Ok(ModeFrame {
                zeta: *zeta,
                omegas: mirror.omegas.iter().map(|w| -w.conj()).collect(),
                r_cols: CMat::from_fn(n, n, |i, j| mirror.r_cols[(i, j)].conj()),
                big_r_cols: CMat::from_fn(n, n, |i, j| mirror.big_r_cols[(i, j)].conj()),
                ell_rows: CMat::from_fn(n, n, |i, j| mirror.ell_rows[(i, j)].conj()),
                incoming: mirror.incoming.clone(),
            })
        }
        None => Err(CoreError::OutsideCone(format!(
            "direction distance {:.3e} > delta = {delta}",
            zeta.direction_distance(&phases.beta)
                .min(zeta.mirror().direction_distance(&phases.beta))
        ))),
    }
}

fn mode_frame_plus(spec: &SystemSpec, zeta: &Frequency, phases: &PhaseSet) -> Result<ModeFrame> {
    let n = spec.n;
    let scale = zeta.norm();
    let a = symbol(spec, zeta)?;
    let pairs = linalg::eig(&a)?;
    // continuation labeling: match against the apex eigenvectors
    let mut used = vec![false; n];
    let mut omegas = vec![C64::new(0.0, 0.0); n];
    let mut raw = vec![CVec::zeros(n); n];
    for label in 0..n {
        let rref = phases.rvecs.column(label);
        let mut best = (f64::MIN, usize::MAX);
        for (idx, (_, v)) in pairs.iter().enumerate() {
            if used[idx] {
                continue;
            }
            let overlap = rref
                .iter()
                .zip(v.iter())
                .map(|(a, b)| C64::new(*a, 0.0).conj() * b)
                .sum::<C64>()
                .norm();
            if overlap > best.0 {
                best = (overlap, idx);
            }
        }
        let idx = best.1;
        used[idx] = true;
        omegas[label] = pairs[idx].0;
        raw[label] = pairs[idx].1.clone();
    }
    // degeneracy guard
    for i in 0..n {
        for j in (i + 1)..n {
            if (omegas[i] - omegas[j]).norm() < GAP_TOL * scale {
                return Err(CoreError::DegenerateFrame(format!(
                    "labels {i},{j} separated by {:.3e}",
                    (omegas[i] - omegas[j]).norm()
                )));
            }
        }
    }
    // smooth normalization: <r_j(beta), R_j(zeta)> = |zeta|
    let mut big_r = CMat::zeros(n, n);
    let mut r_unit = CMat::zeros(n, n);
    for j in 0..n {
        let rref = phases.rvecs.column(j);
        let inner: C64 = rref
            .iter()
            .zip(raw[j].iter())
            .map(|(a, b)| C64::new(*a, 0.0).conj() * b)
            .sum();
        if inner.norm() < 1e-8 {
            return Err(CoreError::DegenerateFrame(format!(
                "label {j} lost overlap with the apex frame"
            )));
        }
        let col = raw[j].clone() * (C64::new(scale, 0.0) / inner);
        let norm = col.norm();
        for i in 0..n {
            big_r[(i, j)] = col[i];
            r_unit[(i, j)] = col[i] / C64::new(norm, 0.0);
        }
    }
    let ell = linalg::inverse(&r_unit)?;
    Ok(ModeFrame {
        zeta: *zeta,
        omegas,
        r_cols: r_unit,
        big_r_cols: big_r,
        ell_rows: ell,
        incoming: phases.classification.clone(),
    })
}

/// Projectors, dual frames and partial inverses at the boundary frequency.
#[derive(Debug, Clone)]
pub struct ProjectorSet {
    /// Kernel projectors P_m (onto ker L(d phi_m) along the others).
    pub p_mats: Vec<RMat>,
    /// Range projectors Q_m.
    pub q_mats: Vec<RMat>,
    /// Partial inverses R_m of L(d phi_m).
    pub r_mats: Vec<RMat>,
    /// Real kernel vectors r_m (unit).
    pub r_vecs: Vec<RVec>,
    /// Dual rows with ell_m B2 r_m' = delta_mm'.
    pub ell_vecs: Vec<RVec>,
    /// The roots omega_m in the same labeling.
    pub omegas: Vec<f64>,
}

impl ProjectorSet {
    /// `L(d phi_m) = sigma_l I + B1 eta_l + B2 omega_m`.
    pub fn l_dphi(&self, spec: &SystemSpec, beta: &Frequency, m: usize) -> RMat {
        RMat::identity(spec.n, spec.n) * beta.sigma
            + &spec.b1 * beta.eta
            + &spec.b2 * self.omegas[m]
    }
}

/// Build the projector set from the phase classification at `beta`.
pub fn projector_set(spec: &SystemSpec, phases: &PhaseSet) -> Result<ProjectorSet> {
    let n = spec.n;
    let omegas = phases.phase_freqs.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            if (omegas[i] - omegas[j]).abs() < GAP_TOL * phases.beta.norm() {
                return Err(CoreError::DegenerateFrame("omega collision".into()));
            }
        }
    }
    let rvecs: Vec<RVec> = (0..n).map(|m| phases.rvecs.column(m).into_owned()).collect();
    let mut t = RMat::zeros(n, n);
    for m in 0..n {
        let col = &spec.b2 * &rvecs[m];
        for i in 0..n {
            t[(i, m)] = col[i];
        }
    }
    let l = linalg::inverse_real(&t)?;
    let ells: Vec<RVec> = (0..n).map(|m| l.row(m).transpose()).collect();

    let mut p_mats = Vec::with_capacity(n);
    let mut q_mats = Vec::with_capacity(n);
    let mut r_mats = Vec::with_capacity(n);
    for m in 0..n {
        // P_m X = (ell_m B2 X) r_m, Q_m X = (ell_m X) B2 r_m
        let ell_b2 = (ells[m].transpose() * &spec.b2).transpose();
        p_mats.push(&rvecs[m] * ell_b2.transpose());
        q_mats.push((&spec.b2 * &rvecs[m]) * ells[m].transpose());
        let mut rm = RMat::zeros(n, n);
        for mp in 0..n {
            if mp == m {
                continue;
            }
            rm += (&rvecs[mp] * ells[mp].transpose()) / (omegas[m] - omegas[mp]);
        }
        r_mats.push(rm);
    }
    Ok(ProjectorSet {
        p_mats,
        q_mats,
        r_mats,
        r_vecs: rvecs,
        ell_vecs: ells,
        omegas,
    })
}

/// Report of the structural assumption checks over sample grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// min over the direction grid of the space-symbol eigenvalue gap.
    pub min_space_gap: f64,
    /// max over the grid of imaginary parts of space-symbol eigenvalues.
    pub max_space_imag: f64,
    pub strictly_hyperbolic: bool,
    /// Declared p versus positive eigenvalues of B2.
    pub p_declared: usize,
    pub p_counted: usize,
    pub p_consistent: bool,
    pub bnd_rank: usize,
    pub bnd_rank_consistent: bool,
    /// Fraction of the boundary-frequency circle inside the hyperbolic region.
    pub hyperbolic_fraction: f64,
    /// Angles (radians) flagged as approximately glancing.
    pub glancing_angles: Vec<f64>,
}

/// Sample strict hyperbolicity, p/rank consistency, hyperbolic-region
/// membership and approximate glancing loci.
pub fn validate_assumptions(spec: &SystemSpec, n_samples: usize) -> Result<AssumptionReport> {
    let n = n_samples.max(8);
    let mut min_gap = f64::INFINITY;
    let mut max_imag: f64 = 0.0;
    for k in 0..n {
        let th = std::f64::consts::PI * (k as f64) / (n as f64);
        let m = &spec.b1 * th.cos() + &spec.b2 * th.sin();
        let evs = linalg::eigenvalues(&linalg::complexify(&m))?;
        let mut re: Vec<f64> = evs.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in re.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
        for z in &evs {
            max_imag = max_imag.max(z.im.abs());
        }
    }
    let strictly_hyperbolic = min_gap > 1e-9 && max_imag < 1e-9;

    let b2_evs = linalg::eigenvalues(&linalg::complexify(&spec.b2))?;
    let p_counted = b2_evs.iter().filter(|z| z.re > 0.0).count();
    let bnd_rank = linalg::rank(&spec.bnd, 1e-10);

    let mut hyp = 0usize;
    let mut glancing = Vec::new();
    for k in 0..n {
        let th = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
        let beta = Frequency::real(th.cos(), th.sin())?;
        match classify_phases(spec, &beta) {
            Ok(_) => hyp += 1,
            Err(CoreError::Classification(msg)) if msg.starts_with("glancing") => {
                glancing.push(th);
            }
            Err(_) => {}
        }
    }

    Ok(AssumptionReport {
        min_space_gap: min_gap,
        max_space_imag: max_imag,
        strictly_hyperbolic,
        p_declared: spec.p,
        p_counted,
        p_consistent: spec.p == p_counted,
        bnd_rank,
        bnd_rank_consistent: bnd_rank == spec.p,
        hyperbolic_fraction: hyp as f64 / n as f64,
        glancing_angles: glancing,
    })
}

/// Fit the sign-dichotomy constant c in `Im omega_j >= c gamma` (incoming) and
/// `Im omega_j <= -c gamma` (outgoing) over random samples in the cone.
///
/// Returns the largest c valid across the samples, or an error if the
/// dichotomy fails.
pub fn fit_sign_dichotomy(
    spec: &SystemSpec,
    phases: &PhaseSet,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut c_fit = f64::INFINITY;
    let mut count = 0usize;
    while count < samples {
        let gamma = rng.gen_range(0.01..0.8);
        let off = rng.gen_range(-delta..delta) * 0.5;
        let scale = rng.gen_range(0.5..2.0);
        let th = phases.beta.eta.atan2(phases.beta.sigma) + off;
        let base = (1.0_f64 - gamma * gamma).max(0.0).sqrt();
        let zeta = Frequency::new(base * th.cos() * scale, gamma * scale, base * th.sin() * scale)?;
        if cone_half(&zeta, &phases.beta, delta).is_none() {
            continue;
        }
        count += 1;
        let frame = mode_frame_delta(spec, &zeta, phases, delta)?;
        for (j, w) in frame.omegas.iter().enumerate() {
            let ratio = if frame.incoming[j] {
                w.im / (gamma * scale)
            } else {
                -w.im / (gamma * scale)
            };
            if ratio <= 0.0 {
                return Err(CoreError::Classification(format!(
                    "sign dichotomy failed at gamma = {gamma}: Im omega = {}",
                    w.im
                )));
            }
            c_fit = c_fit.min(ratio);
        }
    }
    Ok(c_fit)
}
