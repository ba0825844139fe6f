//! Lopatinski determinants, the weak-stability failure set, first-order
//! vanishing, and the local factorization carrying the boundary speed c_+.

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::spectral::{self, Frequency, ModeFrame, PhaseSet, SystemSpec};
use crate::{C64, CMat};
use serde::{Deserialize, Serialize};

/// |Delta| below this after refinement counts as a Lopatinski root.
pub const ROOT_TOL: f64 = 1e-8;
/// Default threshold for "ULC holds" on a sampled region.
pub const ULC_TOL: f64 = 1e-3;
/// Angular guard band around non-hyperbolic / glancing points.
pub const GLANCING_GUARD: f64 = 1e-3;

/// Basis of the stable subspace at a frequency.
#[derive(Debug, Clone)]
pub struct StableBasis {
    /// N x p matrix of unit incoming (stable) eigenvectors.
    pub r_minus: CMat,
    /// Unnormalized counterpart, when produced from a labeled frame.
    pub big_r_minus: Option<CMat>,
}

/// Pointwise stable basis, without continuation labeling.
///
/// For gamma > 0 this is the span of eigenvectors with Im omega > 0; at
/// gamma = 0 inside the hyperbolic region it is the incoming eigenspace, and
/// elsewhere on the boundary it is approximated from gamma = 1e-7.
pub fn stable_basis(spec: &SystemSpec, zeta: &Frequency) -> Result<StableBasis> {
    if zeta.gamma > 0.0 {
        let a = spectral::symbol(spec, zeta)?;
        let pairs = linalg::eig(&a)?;
        let mut cols: Vec<_> = pairs.into_iter().filter(|(l, _)| l.im > 0.0).collect();
        if cols.len() != spec.p {
            return Err(CoreError::DegenerateFrame(format!(
                "stable subspace dimension {} != p = {}",
                cols.len(),
                spec.p
            )));
        }
        cols.sort_by(|a, b| a.0.re.partial_cmp(&b.0.re).unwrap());
        let r = CMat::from_fn(spec.n, spec.p, |i, j| cols[j].1[i]);
        return Ok(StableBasis {
            r_minus: r,
            big_r_minus: None,
        });
    }
    match spectral::classify_phases(spec, zeta) {
        Ok(phases) => {
            let idx = phases.incoming_indices();
            let r = CMat::from_fn(spec.n, spec.p, |i, j| {
                C64::new(phases.rvecs[(i, idx[j])], 0.0)
            });
            Ok(StableBasis {
                r_minus: r,
                big_r_minus: None,
            })
        }
        Err(_) => {
            let nudged = Frequency::new(zeta.sigma, 1e-7 * zeta.norm(), zeta.eta)?;
            stable_basis(spec, &nudged)
        }
    }
}

/// Normalized Lopatinski determinant |Delta| at a point, frame-free.
pub fn delta_abs(spec: &SystemSpec, zeta: &Frequency) -> Result<f64> {
    let sb = stable_basis(spec, zeta)?;
    let b = linalg::complexify(&spec.bnd);
    Ok(linalg::det(&(&b * &sb.r_minus)).norm())
}

/// Both Lopatinski determinants from a labeled frame:
/// `Delta_a = det(B R_-)` and `Delta = det(B r_-)`.
pub fn delta(spec: &SystemSpec, frame: &ModeFrame) -> (C64, C64) {
    let b = linalg::complexify(&spec.bnd);
    let da = linalg::det(&(&b * frame.big_r_minus()));
    let d = linalg::det(&(&b * frame.r_minus()));
    (da, d)
}

/// One detected weak-stability direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpsilonRoot {
    pub beta: Frequency,
    /// |Delta| after refinement.
    pub residual: f64,
    /// Index of the paired root (-beta) in the report, if found.
    pub pair: Option<usize>,
    pub cplus: f64,
    pub simple_zero: bool,
    /// |d_tau Delta_a| at the root.
    pub dtau_abs: f64,
}

/// Result of scanning the unit boundary-frequency circle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakStabilityReport {
    pub roots: Vec<UpsilonRoot>,
    /// min |Delta| over sampled directions at angular distance > 0.15 from
    /// every detected root.
    pub ulc_elsewhere: f64,
    /// Scan resolution (number of angular samples).
    pub resolution: usize,
    /// Angles excluded by the glancing / non-hyperbolic guard.
    pub excluded_angles: usize,
}

impl WeakStabilityReport {
    /// Roots in the upper half (sigma > 0, or (0,1) convention), one per pair.
    pub fn upsilon_plus(&self) -> Vec<Frequency> {
        self.roots
            .iter()
            .map(|r| r.beta)
            .filter(|b| b.sigma > 0.0 || (b.sigma == 0.0 && b.eta > 0.0))
            .collect()
    }

    pub fn upsilon_count(&self) -> usize {
        self.roots.len()
    }
}

fn delta_at_angle(spec: &SystemSpec, th: f64) -> Option<f64> {
    let beta = Frequency::real(th.cos(), th.sin()).ok()?;
    // restrict to the hyperbolic region; guarded points are skipped
    spectral::classify_phases(spec, &beta).ok()?;
    delta_abs(spec, &beta).ok()
}

/// |Delta| normalized by |det S| of the full frame. Near-glancing directions
/// make the incoming eigenvectors nearly parallel, which sends det(B r_-) to
/// zero without any kernel intersection; the normalization removes exactly
/// that geometric factor, so zeros of the ratio are genuine Upsilon_0 points.
fn delta_ratio_at_angle(spec: &SystemSpec, th: f64) -> Option<f64> {
    let beta = Frequency::real(th.cos(), th.sin()).ok()?;
    let phases = spectral::classify_phases(spec, &beta).ok()?;
    let idx = phases.incoming_indices();
    let b = &spec.bnd;
    let rm = crate::RMat::from_fn(spec.n, spec.p, |i, j| phases.rvecs[(i, idx[j])]);
    let det_s = phases.rvecs.determinant().abs();
    if det_s < 1e-14 {
        return None;
    }
    Some((b * rm).determinant().abs() / det_s)
}

/// Scan `Sigma_0 ^ H` for Lopatinski roots, refine each by golden-section
/// minimization of |Delta|, and verify first-order vanishing.
pub fn scan_upsilon0(spec: &SystemSpec, resolution: usize) -> Result<WeakStabilityReport> {
    let n = resolution.max(360);
    let vals: Vec<Option<f64>> = (0..n)
        .map(|k| delta_ratio_at_angle(spec, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    let raw_vals: Vec<Option<f64>> = (0..n)
        .map(|k| delta_at_angle(spec, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    let step = 2.0 * std::f64::consts::PI / n as f64;

    let mut root_angles = Vec::new();
    for k in 0..n {
        let (dm, d0, dp) = (vals[(k + n - 1) % n], vals[k], vals[(k + 1) % n]);
        let (Some(dm), Some(d0), Some(dp)) = (dm, d0, dp) else {
            continue;
        };
        if d0 < dm && d0 <= dp && d0 < 0.1 {
            let th0 = step * k as f64;
            // golden-section refinement of the ratio on [th0 - step, th0 + step]
            let f = |t: f64| delta_ratio_at_angle(spec, t).unwrap_or(f64::INFINITY);
            let (mut a, mut b) = (th0 - step, th0 + step);
            const PHI: f64 = 0.381_966_011_250_105;
            for _ in 0..120 {
                let m1 = a + PHI * (b - a);
                let m2 = b - PHI * (b - a);
                if f(m1) < f(m2) {
                    b = m2;
                } else {
                    a = m1;
                }
            }
            let tr = 0.5 * (a + b);
            let res = f(tr);
            if res < ROOT_TOL {
                // glancing guard: the neighborhood must classify cleanly
                let guard_ok = [tr - GLANCING_GUARD, tr + GLANCING_GUARD]
                    .iter()
                    .all(|t| delta_at_angle(spec, *t).is_some());
                if guard_ok {
                    root_angles.push((tr, res));
                }
            }
        }
    }

    // deduplicate near-identical refinements
    root_angles.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    root_angles.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-6);

    let mut roots = Vec::new();
    for (th, res) in &root_angles {
        let beta = Frequency::real(th.cos(), th.sin())?;
        let (simple, dtau) = zero_order_check(spec, &beta)?;
        let cp = cplus(spec, &beta)?;
        roots.push(UpsilonRoot {
            beta,
            residual: *res,
            pair: None,
            cplus: cp,
            simple_zero: simple,
            dtau_abs: dtau,
        });
    }
    // pair under negation
    let m = roots.len();
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let (bi, bj) = (roots[i].beta, roots[j].beta);
            if (bi.sigma + bj.sigma).abs() < 1e-6 && (bi.eta + bj.eta).abs() < 1e-6 {
                roots[i].pair = Some(j);
            }
        }
    }

    let mut ulc_elsewhere = f64::INFINITY;
    for k in 0..n {
        let Some(d) = raw_vals[k] else { continue };
        let th = step * k as f64;
        let near_root = root_angles.iter().any(|(tr, _)| {
            let mut dd = (th - tr).abs() % (2.0 * std::f64::consts::PI);
            if dd > std::f64::consts::PI {
                dd = 2.0 * std::f64::consts::PI - dd;
            }
            dd < 0.15
        });
        if !near_root {
            ulc_elsewhere = ulc_elsewhere.min(d);
        }
    }
    let excluded = vals.iter().filter(|v| v.is_none()).count();
    Ok(WeakStabilityReport {
        roots,
        ulc_elsewhere,
        resolution: n,
        excluded_angles: excluded,
    })
}

/// Analytic Lopatinski determinant continued from the apex `phases.beta`.
fn delta_a_continued(spec: &SystemSpec, zeta: &Frequency, phases: &PhaseSet) -> Result<C64> {
    let frame = spectral::mode_frame_delta(spec, zeta, phases, 0.5)?;
    Ok(delta(spec, &frame).0)
}

/// Centered finite-difference d_tau Delta_a at `beta` with Richardson
/// extrapolation. Returns (simple-zero verdict, |d_tau Delta_a|).
pub fn zero_order_check(spec: &SystemSpec, beta: &Frequency) -> Result<(bool, f64)> {
    let phases = spectral::classify_phases(spec, beta)?;
    let d = |h: f64| -> Result<C64> {
        let zp = Frequency::new(beta.sigma + h, 0.0, beta.eta)?;
        let zm = Frequency::new(beta.sigma - h, 0.0, beta.eta)?;
        Ok((delta_a_continued(spec, &zp, &phases)? - delta_a_continued(spec, &zm, &phases)?)
            / C64::new(2.0 * h, 0.0))
    };
    let h = 1e-5 * beta.norm();
    let d1 = d(h)?;
    let d2 = d(0.5 * h)?;
    let richardson = (d2 * C64::new(4.0, 0.0) - d1) / C64::new(3.0, 0.0);
    // step-size stability: the two estimates must agree
    let diff = (d2 - d1).norm();
    let scale = richardson.norm().max(1.0);
    if diff > 0.05 * scale {
        return Err(CoreError::Classification(format!(
            "d_tau Delta_a finite difference unstable: |d(h) - d(h/2)| = {diff:.3e}"
        )));
    }
    Ok((richardson.norm() > 1e-6 * scale, richardson.norm()))
}

/// The boundary-characteristic speed c_+ from the implicit-function-theorem
/// ratio c_+ = -d_eta Delta_a / d_tau Delta_a at the root.
pub fn cplus(spec: &SystemSpec, beta: &Frequency) -> Result<f64> {
    let phases = spectral::classify_phases(spec, beta)?;
    let h = 1e-5 * beta.norm();
    let dtau = (delta_a_continued(
        spec,
        &Frequency::new(beta.sigma + h, 0.0, beta.eta)?,
        &phases,
    )? - delta_a_continued(
        spec,
        &Frequency::new(beta.sigma - h, 0.0, beta.eta)?,
        &phases,
    )?) / C64::new(2.0 * h, 0.0);
    let deta = (delta_a_continued(
        spec,
        &Frequency::new(beta.sigma, 0.0, beta.eta + h)?,
        &phases,
    )? - delta_a_continued(
        spec,
        &Frequency::new(beta.sigma, 0.0, beta.eta - h)?,
        &phases,
    )?) / C64::new(2.0 * h, 0.0);
    if dtau.norm() == 0.0 {
        return Err(CoreError::Factorization("d_tau Delta_a vanishes".into()));
    }
    Ok(-(deta / dtau).re)
}

/// Fit of `Delta_a = (tau - c_+ eta) H_+` on a cone grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalFactorization {
    pub beta: Frequency,
    pub cplus: f64,
    /// max |Delta_a - (tau - c_+ eta) H_fit| / max |Delta_a| over the grid.
    pub residual: f64,
    /// min |H_fit| over the grid (nonvanishing margin).
    pub hplus_min: f64,
    pub hplus_max: f64,
    /// Extrema of |Delta| |zeta| / |tau - c_+ eta| over the grid (s7fg ratio).
    pub ratio_min: f64,
    pub ratio_max: f64,
}

/// Build the factorization evidence on `Gamma_delta^+(beta)`.
///
/// H_+ is fitted by least squares as a degree-4 complex polynomial in the
/// local cone coordinates (angular offset, gamma); c_+ itself comes from the
/// derivative ratio, so the fit only serves as a residual check.
pub fn local_factorization(
    spec: &SystemSpec,
    beta: &Frequency,
    delta_cone: f64,
) -> Result<LocalFactorization> {
    let phases = spectral::classify_phases(spec, beta)?;
    let cp = cplus(spec, beta)?;
    let th0 = beta.eta.atan2(beta.sigma);

    let n_ang = 17;
    let n_gam = 9;
    let mut coords = Vec::new();
    let mut da_vals = Vec::new();
    let mut d_vals = Vec::new();
    for i in 0..n_ang {
        let dth = delta_cone * (2.0 * i as f64 / (n_ang - 1) as f64 - 1.0) * 0.85;
        for j in 0..n_gam {
            let g = delta_cone * 0.85 * j as f64 / (n_gam - 1) as f64;
            let planar = (1.0 - g * g).max(0.0).sqrt();
            let zeta = Frequency::new(
                planar * (th0 + dth).cos(),
                g,
                planar * (th0 + dth).sin(),
            )?;
            if spectral::cone_half(&zeta, beta, delta_cone).is_none() {
                continue;
            }
            let frame = spectral::mode_frame_delta(spec, &zeta, &phases, delta_cone)?;
            let (da, d) = delta(spec, &frame);
            coords.push((dth, g));
            da_vals.push(da);
            d_vals.push(d);
        }
    }

    // factor (tau - c_+ eta) at each grid point
    let factors: Vec<C64> = coords
        .iter()
        .map(|(dth, g)| {
            let planar = (1.0 - g * g).max(0.0).sqrt();
            let tau = C64::new(planar * (th0 + dth).cos(), -g);
            tau - C64::new(cp * planar * (th0 + dth).sin(), 0.0)
        })
        .collect();

    // least-squares polynomial fit of H = Delta_a / factor away from the zero line
    let mut basis_rows = Vec::new();
    let mut rhs = Vec::new();
    let monomials: Vec<(u32, u32)> = (0..=6u32)
        .flat_map(|i| (0..=6u32).map(move |j| (i, j)))
        .filter(|(i, j)| i + j <= 6)
        .collect();
    for (k, (dth, g)) in coords.iter().enumerate() {
        if factors[k].norm() < 0.02 * delta_cone {
            continue;
        }
        let h = da_vals[k] / factors[k];
        let (u, v) = (dth / delta_cone, g / delta_cone);
        basis_rows.push(
            monomials
                .iter()
                .map(|(i, j)| C64::new(u.powi(*i as i32) * v.powi(*j as i32), 0.0))
                .collect::<Vec<_>>(),
        );
        rhs.push(h);
    }
    let m = basis_rows.len();
    let a = CMat::from_fn(m, monomials.len(), |i, j| basis_rows[i][j]);
    let b = crate::CVec::from_fn(m, |i, _| rhs[i]);
    let svd = a.svd(true, true);
    let coef = svd
        .solve(&b, 1e-12)
        .map_err(|e| CoreError::Factorization(e.to_string()))?;

    let h_at = |dth: f64, g: f64| -> C64 {
        let (u, v) = (dth / delta_cone, g / delta_cone);
        monomials
            .iter()
            .zip(coef.iter())
            .map(|((i, j), c)| c * u.powi(*i as i32) * v.powi(*j as i32))
            .sum()
    };

    let mut max_da: f64 = 0.0;
    let mut max_res: f64 = 0.0;
    let mut hmin = f64::INFINITY;
    let mut hmax: f64 = 0.0;
    let mut rmin = f64::INFINITY;
    let mut rmax: f64 = 0.0;
    for (k, (dth, g)) in coords.iter().enumerate() {
        let hfit = h_at(*dth, *g);
        max_da = max_da.max(da_vals[k].norm());
        max_res = max_res.max((da_vals[k] - factors[k] * hfit).norm());
        hmin = hmin.min(hfit.norm());
        hmax = hmax.max(hfit.norm());
        if factors[k].norm() > 0.02 * delta_cone {
            // |zeta| = 1 on the grid slice
            let ratio = d_vals[k].norm() / factors[k].norm();
            rmin = rmin.min(ratio);
            rmax = rmax.max(ratio);
        }
    }
    let residual = max_res / max_da.max(1e-300);
    if residual > 1e-4 {
        return Err(CoreError::Factorization(format!(
            "factorization residual {residual:.3e} above tolerance"
        )));
    }
    if hmin <= 0.0 {
        return Err(CoreError::Factorization("H_+ margin vanished".into()));
    }
    Ok(LocalFactorization {
        beta: *beta,
        cplus: cp,
        residual,
        hplus_min: hmin,
        hplus_max: hmax,
        ratio_min: rmin,
        ratio_max: rmax,
    })
}

/// Minimum of |Delta| over an explicit list of sample frequencies.
pub fn ulc_region_check(spec: &SystemSpec, samples: &[Frequency]) -> Result<f64> {
    let mut min = f64::INFINITY;
    for zeta in samples {
        if let Ok(d) = delta_abs(spec, zeta) {
            min = min.min(d);
        }
    }
    if !min.is_finite() {
        return Err(CoreError::Classification(
            "no sample admitted a stable basis".into(),
        ));
    }
    Ok(min)
}

/// Samples of the unit hemisphere at the given gamma fractions and angles.
pub fn hemisphere_samples(gammas: &[f64], n_angles: usize) -> Vec<Frequency> {
    let mut out = Vec::new();
    for gf in gammas {
        let planar = (1.0 - gf * gf).max(0.0).sqrt();
        for k in 0..n_angles {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n_angles as f64;
            if let Ok(z) = Frequency::new(planar * th.cos(), *gf, planar * th.sin()) {
                out.push(z);
            }
        }
    }
    out
}
