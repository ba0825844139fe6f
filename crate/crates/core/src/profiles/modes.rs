//! Integer mode indices on the three-torus and the table of modes permitted
//! in each profile order.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// A theta-mode (a1, a2, a3), indexing e^{i(a1 th1 + a2 th2 + a3 th3)}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode(pub i64, pub i64, pub i64);

impl Mode {
    pub const ZERO: Mode = Mode(0, 0, 0);

    /// Characteristic: supported on a single coordinate.
    pub fn is_characteristic(&self) -> bool {
        let nz = [self.0, self.1, self.2].iter().filter(|a| **a != 0).count();
        nz <= 1
    }

    /// The phase index (0-based label m-1 in {0,1,2}) of a characteristic
    /// nonzero mode, and its integer.
    pub fn characteristic_part(&self) -> Option<(usize, i64)> {
        match (self.0 != 0, self.1 != 0, self.2 != 0) {
            (true, false, false) => Some((0, self.0)),
            (false, true, false) => Some((1, self.1)),
            (false, false, true) => Some((2, self.2)),
            _ => None,
        }
    }

    /// Total theta_0 frequency after the boundary restriction th_m = th_0.
    pub fn total(&self) -> i64 {
        self.0 + self.1 + self.2
    }

    /// Shift by the oscillation e^{i theta_3} and reduce through the
    /// resonance 2 th1 ~ th2 + th3:
    ///   * a pure th1 mode (2m,0,0) + (0,0,1) is rewritten as (0,m,m+1);
    ///   * a (0,k,k)-type result is rewritten as the characteristic (2k,0,0).
    pub fn shift_theta3(&self) -> Result<Mode> {
        let raw = Mode(self.0, self.1, self.2 + 1);
        raw.reduce()
    }

    /// Canonical form in the H-infinity class: no mixed th1 modes, no (0,k,k).
    pub fn reduce(&self) -> Result<Mode> {
        let mut m = *self;
        if m.0 != 0 && (m.1 != 0 || m.2 != 0) {
            if m.0 % 2 != 0 {
                return Err(CoreError::ModeTable {
                    order: i32::MIN,
                    mode: (m.0, m.1, m.2),
                });
            }
            let half = m.0 / 2;
            m = Mode(0, m.1 + half, m.2 + half);
        }
        if m.0 == 0 && m.1 != 0 && m.1 == m.2 {
            m = Mode(2 * m.1, 0, 0);
        }
        Ok(m)
    }
}

/// Modes permitted per profile order, truncated at `k_max` in each integer.
#[derive(Debug, Clone)]
pub struct ModeTable {
    /// Highest profile order J covered.
    pub j_max: i32,
    pub k_max: i64,
    /// allowed[(j + 1) as usize] = permitted modes of U_j.
    allowed: Vec<BTreeSet<Mode>>,
}

/// Build the table for orders -1..=J:
///
/// Characteristic modes:
///   U_{-1}: k th2, k th3 for k >= 2;
///   U_j (j >= 0): k th2, k th3 for k >= 1 and 2 th1, 4 th1, ..., 2(j+2) th1.
///
/// Noncharacteristic modes (cumulative in j):
///   group I of U_j adds (j+1) th3 + k th2 for k >= j+2;
///   group II of U_j adds the modes obtained from U_{j-1}'s group II by
///   raising the th3 coefficient by one, plus th3 + (last th1 mode of U_{j-1}).
pub fn mode_table(j_max: i32, k_max: i64) -> Result<ModeTable> {
    if j_max < -1 {
        return Err(CoreError::Precondition("need J >= -1".into()));
    }
    if j_max > 8 {
        return Err(CoreError::Precondition("mode table capped at J = 8".into()));
    }
    let mut allowed: Vec<BTreeSet<Mode>> = Vec::new();

    // U_{-1}
    let mut u_m1 = BTreeSet::new();
    for k in 2..=k_max {
        u_m1.insert(Mode(0, k, 0));
        u_m1.insert(Mode(0, 0, k));
    }
    allowed.push(u_m1);

    let mut group2_prev: Vec<Mode> = Vec::new();
    for j in 0..=j_max.max(0) {
        if j_max < 0 {
            break;
        }
        let mut set = BTreeSet::new();
        // characteristic
        for k in 1..=k_max {
            set.insert(Mode(0, k, 0));
            set.insert(Mode(0, 0, k));
        }
        for m in 1..=(j as i64 + 2) {
            if 2 * m <= k_max {
                set.insert(Mode(2 * m, 0, 0));
            }
        }
        // noncharacteristic, cumulative: everything from U_{j-1}
        if j >= 1 {
            for m in allowed[j as usize].iter() {
                if !m.is_characteristic() {
                    set.insert(*m);
                }
            }
        }
        // group I: (j+1) th3 + k th2, k >= j+2
        let l = j as i64 + 1;
        for k in (l + 1)..=k_max {
            set.insert(Mode(0, k, l));
        }
        // group II: U_1's pair corresponds to the theta_1 modes of U_0;
        // beyond that, bump the theta_3 coefficient of each previous group II
        // mode and append th3 + (last th1 mode of U_{j-1}).
        let mut group2 = Vec::new();
        if j == 1 {
            group2.push(Mode(0, 1, 2));
            group2.push(Mode(0, 2, 3));
        } else if j >= 2 {
            for m in &group2_prev {
                group2.push(Mode(0, m.1, m.2 + 1));
            }
            let half = j as i64 + 1;
            group2.push(Mode(0, half, half + 1));
        }
        for m in &group2 {
            if m.1 <= k_max && m.2 <= k_max {
                set.insert(*m);
            }
        }
        group2_prev = group2;
        allowed.push(set);
    }

    Ok(ModeTable {
        j_max,
        k_max,
        allowed,
    })
}

impl ModeTable {
    pub fn permits(&self, order: i32, mode: &Mode) -> bool {
        if *mode == Mode::ZERO {
            return false; // means vanish at every order
        }
        let idx = (order + 1) as usize;
        if idx >= self.allowed.len() {
            return false;
        }
        self.allowed[idx].contains(mode)
    }

    pub fn modes_of(&self, order: i32) -> &BTreeSet<Mode> {
        &self.allowed[(order + 1) as usize]
    }

    /// Assert every populated mode of a profile is permitted.
    pub fn check_profile(&self, profile: &super::Profile, tol: f64) -> Result<()> {
        for (mode, field) in &profile.fields {
            if field.sup() > tol && !self.permits(profile.order, mode) {
                return Err(CoreError::ModeTable {
                    order: profile.order,
                    mode: (mode.0, mode.1, mode.2),
                });
            }
        }
        Ok(())
    }

    /// Text dump, one order per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for j in -1..=self.j_max {
            let modes: Vec<String> = self
                .modes_of(j)
                .iter()
                .map(|m| format!("({},{},{})", m.0, m.1, m.2))
                .collect();
            out.push_str(&format!("U_{j}: {}\n", modes.join(" ")));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u_minus_one_is_k_ge_2() {
        let t = mode_table(2, 8).unwrap();
        assert!(!t.permits(-1, &Mode(0, 1, 0)));
        assert!(t.permits(-1, &Mode(0, 2, 0)));
        assert!(t.permits(-1, &Mode(0, 0, 5)));
        assert!(!t.permits(-1, &Mode(2, 0, 0)));
        assert!(!t.permits(-1, &Mode(0, 2, 1)));
    }

    #[test]
    fn u0_characteristic_includes_2th1_4th1() {
        let t = mode_table(2, 10).unwrap();
        assert!(t.permits(0, &Mode(0, 1, 0)));
        assert!(t.permits(0, &Mode(2, 0, 0)));
        assert!(t.permits(0, &Mode(4, 0, 0)));
        assert!(!t.permits(0, &Mode(6, 0, 0)));
        // U_1 adds 6 th1
        assert!(t.permits(1, &Mode(6, 0, 0)));
        assert!(!t.permits(1, &Mode(8, 0, 0)));
        assert!(t.permits(2, &Mode(8, 0, 0)));
    }

    #[test]
    fn u0_noncharacteristic_is_th3_plus_k_th2() {
        let t = mode_table(1, 10).unwrap();
        assert!(t.permits(0, &Mode(0, 2, 1)));
        assert!(t.permits(0, &Mode(0, 7, 1)));
        assert!(!t.permits(0, &Mode(0, 1, 2)));
        // U_1 group II additions: 2 th3 + th2 and 3 th3 + 2 th2
        assert!(t.permits(1, &Mode(0, 1, 2)));
        assert!(t.permits(1, &Mode(0, 2, 3)));
        assert!(!t.permits(1, &Mode(0, 1, 3)));
        // U_1 group I: 2 th3 + k th2, k >= 3
        assert!(t.permits(1, &Mode(0, 3, 2)));
        assert!(!t.permits(1, &Mode(0, 2, 2)));
    }

    #[test]
    fn u2_and_u3_group_two_continuation() {
        let t = mode_table(3, 12).unwrap();
        for m in [Mode(0, 1, 3), Mode(0, 2, 4), Mode(0, 3, 4)] {
            assert!(t.permits(2, &m), "{m:?}");
        }
        for m in [Mode(0, 1, 4), Mode(0, 2, 5), Mode(0, 3, 5), Mode(0, 4, 5)] {
            assert!(t.permits(3, &m), "{m:?}");
            assert!(!t.permits(2, &m), "{m:?}");
        }
    }

    #[test]
    fn resonance_reduction_matches_interaction_rule() {
        // th3 + 8 th1 = 5 th3 + 4 th2
        let m = Mode(8, 0, 0).shift_theta3().unwrap();
        assert_eq!(m, Mode(0, 4, 5));
        // (0,1,0) + th3 resonates to 2 th1
        let m = Mode(0, 1, 0).shift_theta3().unwrap();
        assert_eq!(m, Mode(2, 0, 0));
        // plain shift on th3 modes
        let m = Mode(0, 0, 3).shift_theta3().unwrap();
        assert_eq!(m, Mode(0, 0, 4));
    }
}
