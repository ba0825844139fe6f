//! Built-in systems: linearized Euler boundary problems (incoming and
//! outgoing subsonic velocity), a resonant 3x3 system exhibiting double
//! amplification, its oscillation-free variant, and a uniformly stable
//! comparison system.

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::spectral::{self, Frequency, PhaseSet, SystemSpec};
use crate::{C64, CMat, RMat, RVec};
use serde::{Deserialize, Serialize};

/// Names accepted by the CLI and the experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    /// Euler linearized at subsonic incoming velocity (0, u), 0 < u < c; p = 2.
    EulerIncoming,
    /// Euler linearized at subsonic outgoing velocity (0, u), -c < u < 0; p = 1,
    /// weak-stability boundary matrix, two-sided oscillatory spectrum.
    EulerOutgoing,
    /// Strictly hyperbolic 3x3 system with the single resonance
    /// omega_2 + omega_3 = 2 omega_1 at the Lopatinski root; p = 2.
    Resonant,
    /// The resonant system with the oscillatory coefficient switched off.
    ResonantM0,
    /// The outgoing Euler interior with a uniformly stable boundary matrix.
    Ulc,
}

impl std::str::FromStr for PresetName {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler-incoming" => Ok(Self::EulerIncoming),
            "euler-outgoing" => Ok(Self::EulerOutgoing),
            "resonant" => Ok(Self::Resonant),
            "resonant-m0" => Ok(Self::ResonantM0),
            "ulc" => Ok(Self::Ulc),
            other => Err(CoreError::Config(format!("unknown preset '{other}'"))),
        }
    }
}

/// A system together with the boundary frequency it is meant to be studied at
/// and the incoming phase carrying the oscillation.
#[derive(Debug, Clone)]
pub struct PresetSystem {
    pub name: PresetName,
    pub spec: SystemSpec,
    /// The weak-stability direction beta_l (unit), when one exists by design.
    pub beta_l: Option<Frequency>,
    /// Rule selecting the oscillation phase among the incoming labels.
    pub osc: OscSelector,
}

/// Selects which incoming label plays the role of omega_N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OscSelector {
    /// The last incoming label (largest root).
    LastIncoming,
    /// The incoming root that is not the vorticity root -sigma/u.
    NonVorticity { u: f64 },
}

impl PresetSystem {
    /// Label index (into the phase set) of the oscillation phase omega_N.
    pub fn osc_index(&self, phases: &PhaseSet) -> usize {
        let inc = phases.incoming_indices();
        match self.osc {
            OscSelector::LastIncoming => *inc.last().expect("incoming set nonempty"),
            OscSelector::NonVorticity { u } => {
                let vort = -phases.beta.sigma / u;
                *inc
                    .iter()
                    .max_by(|a, b| {
                        let da = (phases.phase_freqs[**a] - vort).abs();
                        let db = (phases.phase_freqs[**b] - vort).abs();
                        da.partial_cmp(&db).unwrap()
                    })
                    .expect("incoming set nonempty")
            }
        }
    }
}

/// Linearized 2D isentropic Euler matrices at specific volume `v`, normal
/// velocity `u` and sound speed `c`, in the variables (u1', u2', v').
pub fn euler_matrices(v: f64, u: f64, c: f64) -> (RMat, RMat) {
    let q = c * c / v;
    let b1 = RMat::from_row_slice(3, 3, &[0.0, 0.0, -q, 0.0, 0.0, 0.0, -v, 0.0, 0.0]);
    let b2 = RMat::from_row_slice(3, 3, &[u, 0.0, 0.0, 0.0, u, -q, 0.0, -v, u]);
    (b1, b2)
}

/// Incoming-subsonic Euler preset with the 2x3 boundary matrix [[0,v,0],[u,0,v]].
pub fn euler_incoming(v: f64, u: f64, c: f64) -> Result<PresetSystem> {
    if v <= 0.0 || c <= 0.0 {
        return Err(CoreError::Precondition("need v > 0 and c > 0".into()));
    }
    if !(0.0 < u && u < c) {
        return Err(CoreError::Precondition(format!(
            "incoming preset needs 0 < u < c, got u = {u}"
        )));
    }
    let (b1, b2) = euler_matrices(v, u, c);
    let bnd = RMat::from_row_slice(2, 3, &[0.0, v, 0.0, u, 0.0, v]);
    let spec = SystemSpec::new(
        b1,
        b2,
        bnd,
        2,
        CMat::identity(3, 3),
        vec![(1, C64::new(1.0, 0.0))],
        2,
    )?;
    Ok(PresetSystem {
        name: PresetName::EulerIncoming,
        spec,
        beta_l: None, // located by the Lopatinski scan
        osc: OscSelector::NonVorticity { u },
    })
}

/// Outgoing-subsonic Euler preset: 1x3 boundary matrix orthogonal to the
/// unique incoming eigenvector at beta_l = (-4/5, 3/5), two-sided spectrum.
pub fn euler_outgoing(v: f64, u: f64, c: f64) -> Result<PresetSystem> {
    if v <= 0.0 || c <= 0.0 {
        return Err(CoreError::Precondition("need v > 0 and c > 0".into()));
    }
    if !(-c < u && u < 0.0) {
        return Err(CoreError::Precondition(format!(
            "outgoing preset needs -c < u < 0, got u = {u}"
        )));
    }
    let (b1, b2) = euler_matrices(v, u, c);
    let beta_l = Frequency::real(-0.8, 0.6)?;
    // provisional spec for classification only
    let probe = SystemSpec::new(
        b1.clone(),
        b2.clone(),
        RMat::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
        1,
        CMat::identity(3, 3),
        vec![(1, C64::new(1.0, 0.0))],
        2,
    )?;
    let phases = spectral::classify_phases(&probe, &beta_l)?;
    let inc = phases.incoming_indices();
    if inc.len() != 1 {
        return Err(CoreError::Classification("expected exactly one incoming mode".into()));
    }
    let r3: RVec = phases.rvecs.column(inc[0]).into_owned();
    let rows = linalg::real_complement_rows(&r3);
    let bnd = RMat::from_fn(1, 3, |_, j| rows[(0, j)]);
    let m = CMat::from_element(3, 3, C64::new(0.25, 0.0));
    let spec = SystemSpec::new(
        b1,
        b2,
        bnd,
        1,
        m,
        vec![(1, C64::new(1.0, 0.0)), (-1, C64::new(1.0, 0.0))],
        2,
    )?;
    Ok(PresetSystem {
        name: PresetName::EulerOutgoing,
        spec,
        beta_l: Some(beta_l),
        osc: OscSelector::LastIncoming,
    })
}

/// Interior matrices of the resonant 3x3 system.
pub fn resonant_matrices() -> (RMat, RMat) {
    let b1 = RMat::from_row_slice(3, 3, &[0.0, 1.0, -2.0, 1.0, -4.0, 1.0, -2.0, 1.0, 0.0]);
    let b2 = RMat::from_row_slice(3, 3, &[-4.0, 0.0, 0.0, 0.0, 2.0, -2.0, 0.0, -2.0, 4.0]);
    (b1, b2)
}

/// Locate the resonance direction of the resonant system by bisecting the
/// defect omega_2 + omega_3 - 2 omega_1 over the bracket [0.5, 0.6].
pub fn resonant_beta_l() -> Result<Frequency> {
    let (b1, b2) = resonant_matrices();
    let probe = SystemSpec::new(
        b1,
        b2,
        RMat::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        2,
        CMat::identity(3, 3),
        vec![(1, C64::new(1.0, 0.0))],
        2,
    )?;
    let defect = |th: f64| -> Result<f64> {
        let beta = Frequency::real(th.cos(), th.sin())?;
        let ph = spectral::classify_phases(&probe, &beta)?;
        let inc: Vec<f64> = ph
            .incoming_indices()
            .iter()
            .map(|&m| ph.phase_freqs[m])
            .collect();
        let out: Vec<f64> = ph
            .outgoing_indices()
            .iter()
            .map(|&m| ph.phase_freqs[m])
            .collect();
        if inc.len() != 2 || out.len() != 1 {
            return Err(CoreError::Classification("unexpected split".into()));
        }
        Ok(inc[0] + inc[1] - 2.0 * out[0])
    };
    let (mut a, mut b) = (0.5_f64, 0.6_f64);
    let mut fa = defect(a)?;
    if fa * defect(b)? > 0.0 {
        return Err(CoreError::Classification(
            "resonance defect does not change sign on the bracket".into(),
        ));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = defect(m)?;
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let th = 0.5 * (a + b);
    Frequency::real(th.cos(), th.sin())
}

/// Kernel mixing weight for the resonant boundary matrix: e = r2 + MU * r3.
pub const RESONANT_KERNEL_MIX: f64 = 0.3;

fn resonant_system(with_oscillation: bool) -> Result<PresetSystem> {
    let (b1, b2) = resonant_matrices();
    let beta_l = resonant_beta_l()?;
    let probe = SystemSpec::new(
        b1.clone(),
        b2.clone(),
        RMat::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        2,
        CMat::identity(3, 3),
        vec![(1, C64::new(1.0, 0.0))],
        2,
    )?;
    let phases = spectral::classify_phases(&probe, &beta_l)?;
    let inc = phases.incoming_indices();
    if inc.len() != 2 {
        return Err(CoreError::Classification("resonant preset needs p = 2".into()));
    }
    // e = r2 + 0.7 r3 spans ker B; B rows span its orthogonal complement
    let r2: RVec = phases.rvecs.column(inc[0]).into_owned();
    let r3: RVec = phases.rvecs.column(inc[1]).into_owned();
    let mut e = r2 + r3 * RESONANT_KERNEL_MIX;
    e /= e.norm();
    let bnd = linalg::real_complement_rows(&e);
    let m = if with_oscillation {
        CMat::from_element(3, 3, C64::new(0.5, 0.0))
    } else {
        CMat::zeros(3, 3)
    };
    let spec = SystemSpec::new(b1, b2, bnd, 2, m, vec![(1, C64::new(1.0, 0.0))], 2)?;
    Ok(PresetSystem {
        name: if with_oscillation {
            PresetName::Resonant
        } else {
            PresetName::ResonantM0
        },
        spec,
        beta_l: Some(beta_l),
        osc: OscSelector::LastIncoming,
    })
}

/// The resonant double-amplification preset.
pub fn resonant() -> Result<PresetSystem> {
    resonant_system(true)
}

/// The resonant system with M = 0 (first-order amplification only).
pub fn resonant_m0() -> Result<PresetSystem> {
    resonant_system(false)
}

/// Uniformly stable comparison preset: outgoing Euler interior, B = [0, 1, 0].
pub fn ulc() -> Result<PresetSystem> {
    let (b1, b2) = euler_matrices(1.0, -0.5, 1.0);
    let bnd = RMat::from_row_slice(1, 3, &[0.0, 1.0, 0.0]);
    let m = CMat::from_element(3, 3, C64::new(0.25, 0.0));
    let spec = SystemSpec::new(
        b1,
        b2,
        bnd,
        1,
        m,
        vec![(1, C64::new(1.0, 0.0)), (-1, C64::new(1.0, 0.0))],
        2,
    )?;
    Ok(PresetSystem {
        name: PresetName::Ulc,
        spec,
        // not a Lopatinski root: the frequency at which experiments drive
        // the uniformly stable system, shared with the outgoing preset
        beta_l: Some(Frequency::real(-0.8, 0.6)?),
        osc: OscSelector::LastIncoming,
    })
}

/// Build a preset by name with its default parameters.
pub fn build(name: PresetName) -> Result<PresetSystem> {
    match name {
        PresetName::EulerIncoming => euler_incoming(1.0, 0.5, 1.0),
        PresetName::EulerOutgoing => euler_outgoing(1.0, -0.5, 1.0),
        PresetName::Resonant => resonant(),
        PresetName::ResonantM0 => resonant_m0(),
        PresetName::Ulc => ulc(),
    }
}
