//! Quadrature variances, squeezing levels and optimal measurement angles.
//!
//! The two-mode quadratures are `X = cos φ̃ X_a + sin φ̃ Y_b` and
//! `Y = cos φ̃ Y_a − sin φ̃ X_b`. Because the quadratures live in the frame
//! rotated by `θ_a`, `θ_b`, the drive phases never show up here.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, SymmetricEigen, Vector4};
use serde::Serialize;

use crate::dynamics::{analytic_cm_from, AnalyticCoefficients, CovarianceState};
use crate::error::{Error, Result};
use crate::matrices::fmt_f64;
use crate::model::EffectiveParams;

/// Unit coefficient vector over `(X_a, Y_a, X_b, Y_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    pub coeffs: [f64; 4],
}

impl QuadratureSpec {
    /// Normalizes `w`; fails on a zero vector.
    pub fn from_coeffs(w: [f64; 4]) -> Result<Self> {
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("quadrature coefficients must be nonzero".into()));
        }
        Ok(Self {
            coeffs: w.map(|x| x / n),
        })
    }

    /// `(cos φ₃ cos φ₁, cos φ₃ sin φ₁, sin φ₃ cos φ₂, sin φ₃ sin φ₂)`
    pub fn from_angles(phi1: f64, phi2: f64, phi3: f64) -> Self {
        let (s3, c3) = phi3.sin_cos();
        let (s1, c1) = phi1.sin_cos();
        let (s2, c2) = phi2.sin_cos();
        Self {
            coeffs: [c3 * c1, c3 * s1, s3 * c2, s3 * s2],
        }
    }

    /// `(φ₁, φ₂, φ₃)` with `φ₃ ∈ [0, π/2]`.
    pub fn angles(&self) -> (f64, f64, f64) {
        let [w1, w2, w3, w4] = self.coeffs;
        let phi3 = w3.hypot(w4).atan2(w1.hypot(w2));
        (w2.atan2(w1), w4.atan2(w3), phi3)
    }

    /// Flips the overall sign so the first nonzero coefficient is positive.
    pub fn sign_normalized(mut self) -> Self {
        if let Some(first) = self.coeffs.iter().find(|x| x.abs() > 1e-15) {
            if *first < 0.0 {
                self.coeffs = self.coeffs.map(|x| -x);
            }
        }
        self
    }

    pub fn axis(index: usize) -> Self {
        let mut coeffs = [0.0; 4];
        coeffs[index] = 1.0;
        Self { coeffs }
    }

    /// Two-mode squeezed quadrature `cos φ X_a + sin φ Y_b`.
    pub fn two_mode_x(phi: f64) -> Self {
        Self {
            coeffs: [phi.cos(), 0.0, 0.0, phi.sin()],
        }
    }

    /// Anti-squeezed partner `cos φ Y_a − sin φ X_b`.
    pub fn two_mode_y(phi: f64) -> Self {
        Self {
            coeffs: [0.0, phi.cos(), -phi.sin(), 0.0],
        }
    }

    /// Misaligned measurement `O = cos θ X + sin θ Y`.
    pub fn misaligned(phi: f64, theta: f64) -> Self {
        let x = Self::two_mode_x(phi).coeffs;
        let y = Self::two_mode_y(phi).coeffs;
        let (s, c) = theta.sin_cos();
        Self {
            coeffs: [0, 1, 2, 3].map(|i| c * x[i] + s * y[i]),
        }
    }

    fn vector(&self) -> Vector4<f64> {
        Vector4::from(self.coeffs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezeReport {
    pub delta_x: f64,
    pub level_db: f64,
    pub spec: QuadratureSpec,
    pub t: f64,
}

impl SqueezeReport {
    pub const CSV_HEADER: &'static str = "t,delta_x,level_db,phi1,phi2,phi3";

    pub fn csv_row(&self) -> String {
        let (p1, p2, p3) = self.spec.angles();
        [self.t, self.delta_x, self.level_db, p1, p2, p3]
            .map(fmt_f64)
            .join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalAngle {
    pub phi_tilde: f64,
    /// Set when `g_eff = 0` and `κ_a = κ_b`; every angle is then equivalent
    /// and `π/4` is returned.
    pub degenerate: bool,
}

/// `φ̃ = atan2(2 g_eff, κ_a − κ_b)/2`, the angle whose quadrature has no
/// growing exponential.
pub fn optimal_angle(g_eff: f64, kappa_a: f64, kappa_b: f64) -> OptimalAngle {
    if g_eff == 0.0 && kappa_a == kappa_b {
        return OptimalAngle {
            phi_tilde: FRAC_PI_4,
            degenerate: true,
        };
    }
    OptimalAngle {
        phi_tilde: (2.0 * g_eff).atan2(kappa_a - kappa_b) / 2.0,
        degenerate: false,
    }
}

struct Branches {
    omega: f64,
    k: f64,
    cos2: f64,
    kp: f64,
    km: f64,
    np: f64,
    nm: f64,
}

fn branches(ep: &EffectiveParams) -> Branches {
    let (ka, kb) = (ep.kappa_a, ep.kappa_b);
    let phi = optimal_angle(ep.g_eff, ka, kb).phi_tilde;
    Branches {
        omega: (4.0 * ep.g_eff * ep.g_eff + (ka - kb).powi(2)).sqrt(),
        k: ka + kb,
        cos2: (2.0 * phi).cos(),
        kp: ka * (2.0 * ep.n_a + 1.0) + kb * (2.0 * ep.n_b + 1.0),
        km: ka * (2.0 * ep.n_a + 1.0) - kb * (2.0 * ep.n_b + 1.0),
        np: ep.n_a + ep.n_b,
        nm: ep.n_a - ep.n_b,
    }
}

/// `ΔX(t) = 2C₋ e^{−(Ω+κ_a+κ_b)t} + (κ₊ + cos 2φ̃ κ₋)/(2(Ω+κ_a+κ_b))`.
pub fn variance_x(ep: &EffectiveParams, t: f64) -> f64 {
    let b = branches(ep);
    let s = b.omega + b.k;
    let c_minus = -(b.kp + b.cos2 * b.km) / (4.0 * s) + (b.np + b.cos2 * b.nm + 1.0) / 4.0;
    2.0 * c_minus * (-s * t).exp() + (b.kp + b.cos2 * b.km) / (2.0 * s)
}

/// `ΔX(∞) = (Ωκ₊ + (κ_a − κ_b)κ₋)/(2Ω(Ω+κ_a+κ_b))`.
pub fn variance_x_inf(ep: &EffectiveParams) -> f64 {
    let b = branches(ep);
    (b.omega * b.kp + (ep.kappa_a - ep.kappa_b) * b.km) / (2.0 * b.omega * (b.omega + b.k))
}

fn angle_variance(v11: f64, v44: f64, v14: f64, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    c * c * v11 + s * s * v44 + (2.0 * phi).sin() * v14
}

/// `ΔX` assembled from the closed-form covariance elements at `φ̃`.
pub fn variance_x_from_elements(coeffs: &AnalyticCoefficients, t: f64) -> f64 {
    let (v11, v44, v14) = coeffs.elements(t);
    angle_variance(v11, v44, v14, coeffs.phi_tilde)
}

/// Variance of `Y = cos φ̃ Y_a − sin φ̃ X_b` from the closed-form covariance.
pub fn variance_y(ep: &EffectiveParams, t: f64) -> Result<f64> {
    let coeffs = AnalyticCoefficients::new(ep)?;
    let (v11, v44, v14) = coeffs.elements(t);
    Ok(angle_variance(v11, v44, v14, -coeffs.phi_tilde))
}

/// `ΔY(t) = 2C₊ e^{(Ω−κ_a−κ_b)t} + (N₊ + 1 + cos 2φ̃ N₋)/2 − 2C₊`, which
/// coincides with [`variance_y`] when `κ_a = κ_b`.
pub fn variance_y_closed(ep: &EffectiveParams, t: f64) -> f64 {
    let b = branches(ep);
    // sin φ = cos 2φ̃
    let sin_phi = b.cos2;
    let c_plus = (b.kp - sin_phi * b.km) / (4.0 * (b.omega - b.k))
        + (b.np - sin_phi * b.nm + 1.0) / 4.0;
    2.0 * c_plus * ((b.omega - b.k) * t).exp() + (b.np + 1.0 + b.cos2 * b.nm) / 2.0 - 2.0 * c_plus
}

/// `wᵀ V₄ w` on the photonic block.
pub fn variance_from_cm(v: &CovarianceState, spec: &QuadratureSpec) -> Result<f64> {
    variance_from_matrix(&v.v, spec)
}

pub fn variance_from_matrix(v: &DMatrix<f64>, spec: &QuadratureSpec) -> Result<f64> {
    if v.nrows() < 4 || v.ncols() < 4 || v.nrows() != v.ncols() {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: v.nrows(),
        });
    }
    let v4 = v.fixed_view::<4, 4>(0, 0);
    let w = spec.vector();
    Ok(w.dot(&(v4 * w)))
}

/// Smallest eigenvalue of `V(1:4, 1:4)` and its eigenvector.
pub fn optimize_quadrature(v: &CovarianceState) -> Result<SqueezeReport> {
    if v.v.nrows() < 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: v.v.nrows(),
        });
    }
    let v4 = v.v.fixed_view::<4, 4>(0, 0).into_owned();
    let eig = SymmetricEigen::new(v4);
    let i = eig.eigenvalues.imin();
    let w = eig.eigenvectors.column(i);
    let spec = QuadratureSpec::from_coeffs([w[0], w[1], w[2], w[3]])?.sign_normalized();
    let delta_x = eig.eigenvalues[i];
    Ok(SqueezeReport {
        delta_x,
        level_db: -10.0 * (delta_x / 0.5).log10(),
        spec,
        t: v.t,
    })
}

/// Direct minimization of `wᵀ V₄ w` over the three angles: a 2° grid followed
/// by Nelder–Mead. Slow; used to check [`optimize_quadrature`].
pub fn numeric_min_quadrature(v4: &DMatrix<f64>) -> (f64, QuadratureSpec) {
    let m = v4.fixed_view::<4, 4>(0, 0).into_owned();
    let f = |x: &[f64; 3]| {
        let w = QuadratureSpec::from_angles(x[0], x[1], x[2]).vector();
        w.dot(&(m * w))
    };
    let step = 2f64.to_radians();
    let mut best = ([0.0; 3], f64::INFINITY);
    for i in 0..90 {
        for j in 0..180 {
            for k in 0..=45 {
                let x = [i as f64 * step, j as f64 * step, (k as f64 * step).min(FRAC_PI_2)];
                let val = f(&x);
                if val < best.1 {
                    best = (x, val);
                }
            }
        }
    }
    let (x, val) = nelder_mead(f, best.0, step, 1e-15, 5000);
    (val, QuadratureSpec::from_angles(x[0], x[1], x[2]).sign_normalized())
}

fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(
    f: F,
    x0: [f64; 3],
    scale: f64,
    ftol: f64,
    max_iter: usize,
) -> ([f64; 3], f64) {
    let mut simplex: Vec<([f64; 3], f64)> = (0..4)
        .map(|i| {
            let mut x = x0;
            if i > 0 {
                x[i - 1] += scale;
            }
            (x, f(&x))
        })
        .collect();
    let lerp = |a: &[f64; 3], b: &[f64; 3], t: f64| [0, 1, 2].map(|i| a[i] + t * (b[i] - a[i]));
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[3].1 - simplex[0].1 <= ftol * simplex[0].1.abs().max(1e-300) {
            break;
        }
        let c = [0, 1, 2].map(|i| simplex[..3].iter().map(|p| p.0[i]).sum::<f64>() / 3.0);
        let worst = simplex[3];
        let xr = lerp(&c, &worst.0, -1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = lerp(&c, &worst.0, -2.0);
            let fe = f(&xe);
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let xc = if fr < worst.1 {
                lerp(&c, &worst.0, -0.5)
            } else {
                lerp(&c, &worst.0, 0.5)
            };
            let fc = f(&xc);
            if fc < worst.1.min(fr) {
                simplex[3] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for p in simplex.iter_mut().skip(1) {
                    p.0 = lerp(&best, &p.0, 0.5);
                    p.1 = f(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// `S = −10 log₁₀(Δ/½)` in dB.
pub fn squeezing_level(delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveVariance(delta));
    }
    Ok(-10.0 * (delta / 0.5).log10())
}

/// `S′ = +10 log₁₀(Δ/½)` in dB.
pub fn anti_level(delta: f64) -> Result<f64> {
    Ok(-squeezing_level(delta)?)
}

/// `(ε, ε̃)`, the relative deviations of two squeezing levels from a
/// reference level, all in dB.
pub fn relative_sl_errors(s_lin: f64, s_tilde_lin: f64, s_eff: f64) -> Result<(f64, f64)> {
    if s_eff == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((
        (s_lin - s_eff).abs() / s_eff.abs(),
        (s_tilde_lin - s_eff).abs() / s_eff.abs(),
    ))
}

/// `τ = 2π/(Ω + κ_a + κ_b)`.
pub fn tau(ep: &EffectiveParams) -> f64 {
    let b = branches(ep);
    2.0 * PI / (b.omega + b.k)
}

/// Largest `θ` keeping `ΔO = cos²θ ΔX + sin²θ ΔY` below ½. `None` when `X`
/// itself is not squeezed.
pub fn misalignment_bound(delta_x: f64, delta_y: f64) -> Option<f64> {
    if !(delta_x < 0.5) {
        return None;
    }
    if delta_y <= 0.5 {
        return Some(FRAC_PI_2);
    }
    Some(((0.5 - delta_x) / (delta_y - delta_x)).sqrt().asin())
}

/// Reports over a set of states, evaluated in parallel.
pub fn optimize_many(states: &[CovarianceState]) -> Vec<Result<SqueezeReport>> {
    use rayon::prelude::*;
    states.par_iter().map(optimize_quadrature).collect()
}

/// Effective-model state at `t` built from the closed form.
pub fn analytic_state(ep: &EffectiveParams, t: f64) -> Result<CovarianceState> {
    Ok(analytic_cm_from(&AnalyticCoefficients::new(ep)?, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemParams;
    use approx::assert_relative_eq;

    fn fig2() -> EffectiveParams {
        EffectiveParams::from_system(&SystemParams::fig2_defaults()).unwrap()
    }

    #[test]
    fn optimal_angle_examples() {
        assert_relative_eq!(optimal_angle(0.01, 1e-3, 1e-3).phi_tilde, FRAC_PI_4);
        let a = optimal_angle(1e-9, 2e-3, 1e-3);
        assert!(a.phi_tilde > 0.0 && a.phi_tilde < 1e-5);
        assert_relative_eq!(
            optimal_angle(0.02 / 3.0, 2e-3, 1e-3).phi_tilde,
            0.74796823954206488,
            max_relative = 1e-14
        );
        let d = optimal_angle(0.0, 1e-3, 1e-3);
        assert!(d.degenerate);
        assert_eq!(d.phi_tilde, FRAC_PI_4);
    }

    #[test]
    fn plateau_and_tau() {
        let ep = fig2();
        let inf = variance_x_inf(&ep);
        assert!((inf - 0.0652).abs() < 1e-4, "{inf}");
        let t = tau(&ep);
        assert!((t - 409.8).abs() < 0.1);
        assert!((0.6 * t - 246.0).abs() < 1.0);
        let coeffs = AnalyticCoefficients::new(&ep).unwrap();
        let gap = variance_x(&ep, t) - inf;
        assert_relative_eq!(gap, 2.0 * coeffs.c_minus / (2.0 * PI).exp(), max_relative = 1e-10);
        assert!((gap - 8.1e-4).abs() < 1e-5, "{gap}");
        assert!((coeffs.c_minus - 0.2174).abs() < 1e-4);
        assert_relative_eq!(variance_x(&ep, 1e6), inf, max_relative = 1e-12);
    }

    #[test]
    fn vacuum_start() {
        let ep = fig2();
        assert_relative_eq!(variance_x(&ep, 0.0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(variance_y(&ep, 0.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(variance_y_closed(&ep, 0.0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(variance_x(&ep, 0.0) * variance_y(&ep, 0.0).unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn anti_squeezing_growth_rate() {
        let ep = fig2();
        let (t1, t2) = (2000.0, 2100.0);
        let y1 = variance_y(&ep, t1).unwrap();
        let y2 = variance_y(&ep, t2).unwrap();
        let rate = (y2 / y1).ln() / (t2 - t1);
        assert!((rate - 1.1333e-2).abs() < 1e-5, "{rate}");
        assert_relative_eq!(variance_y_closed(&ep, 700.0), variance_y(&ep, 700.0).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn eq10_matches_element_form() {
        let ep = EffectiveParams {
            kappa_a: 2.5e-3,
            n_a: 0.4,
            n_b: 1.3,
            ..fig2()
        };
        let coeffs = AnalyticCoefficients::new(&ep).unwrap();
        for t in [0.0, 10.0, 300.0, 900.0] {
            assert!((variance_x(&ep, t) - variance_x_from_elements(&coeffs, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_from_cm_examples() {
        let v = CovarianceState::vacuum(crate::matrices::Basis::Effective);
        assert_relative_eq!(variance_from_cm(&v, &QuadratureSpec::axis(0)).unwrap(), 0.5);

        let s = analytic_state(&fig2(), 300.0).unwrap();
        let phi: f64 = 0.3;
        let (v11, v44, v14) = (s.v[(0, 0)], s.v[(3, 3)], s.v[(0, 3)]);
        let want = phi.cos().powi(2) * v11 + phi.sin().powi(2) * v44 + (2.0 * phi).sin() * v14;
        let got = variance_from_cm(&s, &QuadratureSpec::two_mode_x(phi)).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-13);

        let phi = fig2().g_eff.atan2(0.0) / 2.0;
        let dx = variance_from_cm(&s, &QuadratureSpec::two_mode_x(phi)).unwrap();
        let dy = variance_from_cm(&s, &QuadratureSpec::two_mode_y(phi)).unwrap();
        let theta: f64 = 0.2;
        let o = variance_from_cm(&s, &QuadratureSpec::misaligned(phi, theta)).unwrap();
        assert_relative_eq!(o, theta.cos().powi(2) * dx + theta.sin().powi(2) * dy, max_relative = 1e-12);

        let small = CovarianceState {
            v: DMatrix::identity(2, 2),
            t: 0.0,
            basis: crate::matrices::Basis::Effective,
        };
        assert!(variance_from_cm(&small, &QuadratureSpec::axis(0)).is_err());
    }

    #[test]
    fn optimize_diagonal() {
        let v = CovarianceState::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.9, 0.7, 0.3, 1.2])),
            5.0,
        )
        .unwrap();
        let r = optimize_quadrature(&v).unwrap();
        assert_relative_eq!(r.delta_x, 0.3);
        assert_eq!(r.spec.coeffs, [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(r.t, 5.0);
        assert_relative_eq!(r.level_db, -10.0 * (0.6f64).log10());
    }

    #[test]
    fn numeric_min_matches_eigen() {
        let m = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.2, -0.1, 0.3,
            0.2, 0.8, 0.05, -0.2,
            -0.1, 0.05, 0.6, 0.1,
            0.3, -0.2, 0.1, 0.9,
        ]);
        let eig = m.clone().symmetric_eigenvalues().min();
        let (val, spec) = numeric_min_quadrature(&m);
        assert!((val - eig).abs() < 1e-9, "{val} vs {eig}");
        let r = optimize_quadrature(&CovarianceState::new(m, 0.0).unwrap()).unwrap();
        let dot: f64 = (0..4).map(|i| r.spec.coeffs[i] * spec.coeffs[i]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn angle_round_trip() {
        let s = QuadratureSpec::from_coeffs([0.3, -0.5, 0.2, 0.7]).unwrap();
        let (a, b, c) = s.angles();
        let back = QuadratureSpec::from_angles(a, b, c);
        for i in 0..4 {
            assert!((back.coeffs[i] - s.coeffs[i]).abs() < 1e-12);
        }
        let n: f64 = s.coeffs.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(QuadratureSpec::from_coeffs([0.0; 4]).is_err());
    }

    #[test]
    fn levels() {
        assert_eq!(squeezing_level(0.5).unwrap(), 0.0);
        assert!((squeezing_level(0.25).unwrap() - 3.0103).abs() < 1e-4);
        assert!((squeezing_level(0.066).unwrap() - 8.794).abs() < 1e-3);
        assert!((anti_level(1.0).unwrap() - 3.0103).abs() < 1e-4);
        assert!(matches!(squeezing_level(0.0), Err(Error::NonPositiveVariance(_))));
        assert!(anti_level(-1.0).is_err());
    }

    #[test]
    fn sl_errors() {
        assert_eq!(relative_sl_errors(8.0, 8.0, 8.0).unwrap(), (0.0, 0.0));
        assert_eq!(relative_sl_errors(0.0, 7.0, 8.0).unwrap().0, 1.0);
        assert!(matches!(relative_sl_errors(1.0, 1.0, 0.0), Err(Error::ZeroReference)));
    }

    #[test]
    fn misalignment() {
        assert_eq!(misalignment_bound(0.6, 1.0), None);
        assert_eq!(misalignment_bound(0.2, 0.4), Some(FRAC_PI_2));
        let th = misalignment_bound(0.1, 2.0).unwrap();
        let o = th.cos().powi(2) * 0.1 + th.sin().powi(2) * 2.0;
        assert_relative_eq!(o, 0.5, max_relative = 1e-12);
        assert!(misalignment_bound(0.1, 4.0).unwrap() < th);
    }
}
