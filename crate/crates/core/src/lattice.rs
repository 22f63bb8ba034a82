//! D2Q9 lattice constants and the per-cell BGK math.
//!
//! Velocity ordering:
//! ```text
//!   6   2   5
//!     \ | /
//!   3 - 0 - 1
//!     / | \
//!   7   4   8
//! ```

use crate::error::{Error, Result};
use crate::precision::Real;

pub const Q: usize = 9;

/// Lattice velocities c_i.
pub const VELOCITIES: [[i32; 2]; Q] = [
    [0, 0],
    [1, 0],
    [0, 1],
    [-1, 0],
    [0, -1],
    [1, 1],
    [-1, 1],
    [-1, -1],
    [1, -1],
];

/// Lattice weights as exact fractions (numerator, denominator).
pub const WEIGHTS_RATIONAL: [(i64, i64); Q] = [
    (4, 9),
    (1, 9),
    (1, 9),
    (1, 9),
    (1, 9),
    (1, 36),
    (1, 36),
    (1, 36),
    (1, 36),
];

pub const WEIGHTS: [f64; Q] = [
    4.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

/// i -> index of -c_i.
pub const OPPOSITE: [usize; Q] = [0, 3, 4, 1, 2, 7, 8, 5, 6];

/// c_s^2 as a fraction.
pub const SOUND_SPEED_SQ_RATIONAL: (i64, i64) = (1, 3);
pub const SOUND_SPEED_SQ: f64 = 1.0 / 3.0;

/// The D2Q9 velocity set as a value, for callers that prefer not to reach
/// for the module constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct D2Q9;

impl D2Q9 {
    pub fn velocity(self, i: usize) -> [i32; 2] {
        VELOCITIES[i]
    }

    pub fn weight(self, i: usize) -> f64 {
        WEIGHTS[i]
    }

    pub fn opposite(self, i: usize) -> usize {
        OPPOSITE[i]
    }

    pub fn sound_speed_sq(self) -> f64 {
        SOUND_SPEED_SQ
    }
}

/// BGK relaxation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationParams {
    /// Relaxation rate, 1 / timestep.
    pub omega: f64,
    /// Kinematic viscosity in lattice units.
    pub nu: f64,
    /// Optional per-direction source term added after relaxation.
    pub source: Option<[f64; Q]>,
}

impl RelaxationParams {
    pub fn from_omega(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 2.0) {
            return Err(Error::config(format!("omega = {omega} outside (0, 2)")));
        }
        Ok(Self {
            omega,
            nu: viscosity_from_omega(omega),
            source: None,
        })
    }

    pub fn from_viscosity(nu: f64) -> Result<Self> {
        let omega = 1.0 / (3.0 * nu + 0.5);
        if !(nu > 0.0) || !(omega > 0.0 && omega < 2.0) {
            return Err(Error::UnstableParameters { nu, omega });
        }
        Ok(Self {
            omega,
            nu,
            source: None,
        })
    }

    pub fn with_source(mut self, source: [f64; Q]) -> Self {
        self.source = Some(source);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::config(format!(
                "omega = {} outside (0, 2)",
                self.omega
            )));
        }
        if !(self.nu > 0.0) {
            return Err(Error::config(format!("viscosity {} must be positive", self.nu)));
        }
        Ok(())
    }
}

pub fn viscosity_from_omega(omega: f64) -> f64 {
    SOUND_SPEED_SQ * (1.0 / omega - 0.5)
}

/// Maps a Reynolds number onto BGK parameters via nu = u0 L / Re.
pub fn omega_from_reynolds(re: f64, u0: f64, length: f64) -> Result<RelaxationParams> {
    if !(re > 0.0 && re.is_finite()) {
        return Err(Error::config(format!("Reynolds number {re} must be positive")));
    }
    if !(u0 > 0.0) {
        return Err(Error::config(format!("characteristic velocity {u0} must be positive")));
    }
    if !(length > 0.0) {
        return Err(Error::config(format!("characteristic length {length} must be positive")));
    }
    RelaxationParams::from_viscosity(u0 * length / re)
}

/// Generic per-cell math shared by the fused kernel and the scalar API.
///
/// Every function here is written out explicitly (no loops over the velocity
/// table) so the operation count is fixed; see [`crate::perfport::flops_per_cell`].
pub mod cell {
    use super::Q;
    use crate::precision::Real;

    /// Density and momentum (rho, jx, jy): 18 additions.
    #[inline(always)]
    pub fn density_momentum<C: Real>(f: &[C; Q]) -> (C, C, C) {
        // Paired order: the rest weights sum to exactly 1 in f32 and f64.
        let rho = f[0] + (((f[1] + f[3]) + (f[2] + f[4])) + ((f[5] + f[7]) + (f[6] + f[8])));
        let jx = f[1] - f[3] + f[5] - f[6] - f[7] + f[8];
        let jy = f[2] - f[4] + f[5] + f[6] - f[7] - f[8];
        (rho, jx, jy)
    }

    /// (rho, ux, uy) with u = (0, 0) where rho = 0.
    #[inline(always)]
    pub fn moments<C: Real>(f: &[C; Q]) -> (C, C, C) {
        let (rho, jx, jy) = density_momentum(f);
        if rho == C::zero() {
            return (rho, C::zero(), C::zero());
        }
        let inv = C::from_f64(1.0) / rho;
        (rho, jx * inv, jy * inv)
    }

    /// w_i rho (1 + 3 cu + 9/2 cu^2 - 3/2 u^2), paired over opposite
    /// directions so each pair shares the even part.
    #[inline(always)]
    pub fn equilibrium<C: Real>(rho: C, ux: C, uy: C) -> [C; Q] {
        let one = C::from_f64(1.0);
        let three = C::from_f64(3.0);
        let four_half = C::from_f64(4.5);
        let one_half = C::from_f64(1.5);
        let wr0 = C::from_f64(4.0 / 9.0) * rho;
        let wr1 = C::from_f64(1.0 / 9.0) * rho;
        let wr2 = C::from_f64(1.0 / 36.0) * rho;
        let base = one - one_half * (ux * ux + uy * uy);

        let mut feq = [C::zero(); Q];
        feq[0] = wr0 * base;

        // (direction, opposite, c.u of direction, weight*rho)
        let mut pair = |i: usize, o: usize, cu: C, wr: C| {
            let even = base + four_half * cu * cu;
            let odd = three * cu;
            feq[i] = wr * (even + odd);
            feq[o] = wr * (even - odd);
        };
        pair(1, 3, ux, wr1);
        pair(2, 4, uy, wr1);
        pair(5, 7, ux + uy, wr2);
        pair(6, 8, uy - ux, wr2);
        feq
    }

    /// BGK relaxation f' = f - omega (f - f_eq) + S.
    #[inline(always)]
    pub fn collide<C: Real>(f: &[C; Q], omega: C, source: Option<&[C; Q]>) -> [C; Q] {
        let (rho, ux, uy) = moments(f);
        let feq = equilibrium(rho, ux, uy);
        let mut out = [C::zero(); Q];
        for i in 0..Q {
            out[i] = f[i] - omega * (f[i] - feq[i]);
        }
        if let Some(s) = source {
            for i in 0..Q {
                out[i] = out[i] + s[i];
            }
        }
        out
    }
}

/// Density and velocity of one cell's populations.
pub fn moments(f: &[f64; Q]) -> Result<(f64, f64, f64)> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinitePopulation);
    }
    Ok(cell::moments(f))
}

/// Second-order equilibrium populations in lattice units.
pub fn equilibrium(rho: f64, ux: f64, uy: f64) -> Result<[f64; Q]> {
    if !(rho.is_finite() && ux.is_finite() && uy.is_finite()) {
        return Err(Error::NonFinitePopulation);
    }
    if rho < 0.0 {
        return Err(Error::config(format!("negative density {rho}")));
    }
    Ok(cell::equilibrium(rho, ux, uy))
}

/// Single-cell BGK collision.
pub fn collide(f: &[f64; Q], params: &RelaxationParams) -> Result<[f64; Q]> {
    params.validate()?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinitePopulation);
    }
    Ok(cell::collide(f, params.omega, params.source.as_ref()))
}

/// Converts a source term into the compute format.
pub(crate) fn source_in<C: Real>(params: &RelaxationParams) -> Option<[C; Q]> {
    params.source.map(|s| s.map(C::from_f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }

    fn add(a: (i64, i64), b: (i64, i64)) -> (i64, i64) {
        let n = a.0 * b.1 + b.0 * a.1;
        let d = a.1 * b.1;
        let g = gcd(n, d).max(1);
        (n / g, d / g)
    }

    #[test]
    fn weight_table_is_isotropic_exactly() {
        let mut total = (0, 1);
        let mut first = [(0, 1), (0, 1)];
        let mut second = [[(0i64, 1i64); 2]; 2];
        for i in 0..Q {
            let w = WEIGHTS_RATIONAL[i];
            let c = VELOCITIES[i];
            total = add(total, w);
            for a in 0..2 {
                first[a] = add(first[a], (w.0 * c[a] as i64, w.1));
                for b in 0..2 {
                    second[a][b] = add(second[a][b], (w.0 * (c[a] * c[b]) as i64, w.1));
                }
            }
        }
        assert_eq!(total, (1, 1));
        assert_eq!(first, [(0, 1), (0, 1)]);
        assert_eq!(second[0][0], SOUND_SPEED_SQ_RATIONAL);
        assert_eq!(second[1][1], SOUND_SPEED_SQ_RATIONAL);
        assert_eq!(second[0][1].0, 0);
        assert_eq!(second[1][0].0, 0);
        for i in 0..Q {
            assert_eq!(WEIGHTS[i], WEIGHTS_RATIONAL[i].0 as f64 / WEIGHTS_RATIONAL[i].1 as f64);
        }
    }

    #[test]
    fn opposite_is_an_involution() {
        for i in 0..Q {
            assert_eq!(OPPOSITE[OPPOSITE[i]], i);
            let (c, o) = (VELOCITIES[i], VELOCITIES[OPPOSITE[i]]);
            assert_eq!([-c[0], -c[1]], o);
        }
    }

    #[test]
    fn moments_examples() {
        assert_eq!(moments(&WEIGHTS).unwrap().0, 1.0);
        let (_, ux, uy) = moments(&WEIGHTS).unwrap();
        assert!(ux.abs() < 1e-17 && uy.abs() < 1e-17);

        let (rho, ux, uy) = moments(&equilibrium(1.0, 0.1, 0.0).unwrap()).unwrap();
        assert!((rho - 1.0).abs() <= 1e-14);
        assert!((ux - 0.1).abs() / 0.1 <= 1e-14);
        assert!(uy.abs() <= 1e-15);

        let mut f = [0.0; Q];
        f[0] = 1.0;
        assert_eq!(moments(&f).unwrap(), (1.0, 0.0, 0.0));
    }

    #[test]
    fn moments_zero_density_is_at_rest() {
        assert_eq!(moments(&[0.0; Q]).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn moments_rejects_non_finite() {
        let mut f = WEIGHTS;
        f[4] = f64::NAN;
        assert!(matches!(moments(&f), Err(Error::NonFinitePopulation)));
        f[4] = f64::INFINITY;
        assert!(moments(&f).is_err());
    }

    #[test]
    fn equilibrium_examples() {
        let feq = equilibrium(1.0, 0.0, 0.0).unwrap();
        for i in 0..Q {
            assert!((feq[i] - WEIGHTS[i]).abs() < 1e-17);
        }
        let feq = equilibrium(1.0, 0.1, 0.0).unwrap();
        // (1/9)(1 + 0.3 + 0.045 - 0.015)
        let hand = (1.0 / 9.0) * (1.0 + 0.3 + 0.045 - 0.015);
        assert!((feq[1] - hand).abs() < 1e-16);
        assert!((feq[1] - 0.147_777_777_777_777_8).abs() < 1e-15);
        let feq = equilibrium(2.0, 0.0, 0.0).unwrap();
        for i in 0..Q {
            assert!((feq[i] - 2.0 * WEIGHTS[i]).abs() < 1e-16);
        }
        assert!(equilibrium(f64::NAN, 0.0, 0.0).is_err());
        assert!(equilibrium(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn equilibrium_matches_textbook_loop() {
        // independent loop form over the velocity table
        let (rho, ux, uy) = (1.3, 0.07, -0.12);
        let feq = equilibrium(rho, ux, uy).unwrap();
        for i in 0..Q {
            let cu = VELOCITIES[i][0] as f64 * ux + VELOCITIES[i][1] as f64 * uy;
            let usq = ux * ux + uy * uy;
            let expect = WEIGHTS[i] * rho * (1.0 + cu / SOUND_SPEED_SQ
                + cu * cu / (2.0 * SOUND_SPEED_SQ * SOUND_SPEED_SQ)
                - usq / (2.0 * SOUND_SPEED_SQ));
            assert!((feq[i] - expect).abs() < 1e-15, "{i}");
        }
    }

    #[test]
    fn collide_examples() {
        let p = RelaxationParams::from_omega(1.3).unwrap();
        let feq = equilibrium(1.1, 0.05, -0.02).unwrap();
        let out = collide(&feq, &p).unwrap();
        for i in 0..Q {
            assert!((out[i] - feq[i]).abs() < 1e-16);
        }

        let f = [0.4, 0.12, 0.1, 0.09, 0.11, 0.03, 0.025, 0.02, 0.03];
        let full = collide(&f, &RelaxationParams::from_omega(1.0).unwrap()).unwrap();
        let (rho, ux, uy) = moments(&f).unwrap();
        let feq = equilibrium(rho, ux, uy).unwrap();
        assert_eq!(full, feq);
    }

    #[test]
    fn collide_rejects_bad_omega() {
        let p = RelaxationParams {
            omega: 2.5,
            nu: 0.1,
            source: None,
        };
        assert!(matches!(collide(&WEIGHTS, &p), Err(Error::Config(_))));
        assert!(RelaxationParams::from_omega(0.0).is_err());
        assert!(RelaxationParams::from_omega(2.0).is_err());
    }

    #[test]
    fn source_term_is_added() {
        let s = [1e-3; Q];
        let p = RelaxationParams::from_omega(1.0).unwrap().with_source(s);
        let out = collide(&WEIGHTS, &p).unwrap();
        for i in 0..Q {
            assert!((out[i] - (WEIGHTS[i] + 1e-3)).abs() < 1e-16);
        }
    }

    #[test]
    fn omega_from_reynolds_examples() {
        let p = omega_from_reynolds(1000.0, 0.1, 100.0).unwrap();
        assert!((p.nu - 0.01).abs() < 1e-17);
        assert!((p.omega - 1.0 / 0.53).abs() < 1e-15);
        assert!(((viscosity_from_omega(p.omega) - 0.01) / 0.01).abs() <= 1e-14);

        let p = omega_from_reynolds(6.0, 0.1, 10.0).unwrap();
        assert!((p.nu - 1.0 / 6.0).abs() < 1e-16);
        assert!((p.omega - 1.0).abs() < 1e-15);
        assert!(((viscosity_from_omega(p.omega) - p.nu) / p.nu).abs() <= 1e-14);

        assert!(omega_from_reynolds(f64::INFINITY, 0.1, 10.0).is_err());
        assert!(omega_from_reynolds(0.0, 0.1, 10.0).is_err());
        assert!(omega_from_reynolds(100.0, 0.0, 10.0).is_err());
        assert!(omega_from_reynolds(100.0, 0.1, -1.0).is_err());
    }

    #[test]
    fn unstable_parameters_name_the_viscosity() {
        let err = RelaxationParams::from_viscosity(0.0).unwrap_err();
        assert!(err.to_string().contains("nu = 0"), "{err}");
    }

    fn kahan(values: impl IntoIterator<Item = f64>) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for v in values {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    proptest! {
        #[test]
        fn equilibrium_moments_are_exact(
            rho in prop::sample::select(vec![0.5, 1.0, 2.0]),
            speed in 0.0f64..0.2,
            angle in 0.0f64..std::f64::consts::TAU,
        ) {
            let (ux, uy) = (speed * angle.cos(), speed * angle.sin());
            let (r, vx, vy) = moments(&equilibrium(rho, ux, uy).unwrap()).unwrap();
            prop_assert!(((r - rho) / rho).abs() <= 1e-13);
            prop_assert!((vx - ux).abs() <= 1e-13 * speed.max(1e-3));
            prop_assert!((vy - uy).abs() <= 1e-13 * speed.max(1e-3));
        }

        #[test]
        fn collision_conserves_mass_and_momentum(
            raw in prop::array::uniform9(0.01f64..1.0),
            omega in 0.05f64..1.95,
        ) {
            let total: f64 = raw.iter().sum();
            let f = raw.map(|v| v / total);
            let out = collide(&f, &RelaxationParams::from_omega(omega).unwrap()).unwrap();
            let mass = |g: &[f64; Q]| kahan(g.iter().copied());
            let mom = |g: &[f64; Q], a: usize| kahan((0..Q).map(|i| g[i] * VELOCITIES[i][a] as f64));
            prop_assert!((mass(&out) - mass(&f)).abs() <= 1e-13 * mass(&f));
            for a in 0..2 {
                prop_assert!((mom(&out, a) - mom(&f, a)).abs() <= 1e-13 * mass(&f));
            }
        }
    }
}
