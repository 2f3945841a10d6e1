//! Covariance-matrix propagation, Lyapunov steady states, closed-form
//! covariance elements and stability classification.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrices::{fmt_f64, real_eigenvalues, Basis, DiffusionMatrix, DriftMatrix, Quadrature};
use crate::model::EffectiveParams;

const OVERFLOW_GUARD: f64 = 1e300;
const MAX_STEP_NORM: f64 = 0.5;
const STEADY_RESIDUAL_TOL: f64 = 1e-10;
pub const MARGINAL_BAND: f64 = 1e-12;

/// Symmetric covariance matrix in a pinned quadrature basis at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    pub v: DMatrix<f64>,
    pub t: f64,
    pub basis: Basis,
}

impl CovarianceState {
    pub fn new(v: DMatrix<f64>, t: f64) -> Result<Self> {
        let basis = Basis::from_dim(v.nrows()).ok_or(Error::DimensionMismatch {
            expected: 6,
            found: v.nrows(),
        })?;
        if v.ncols() != v.nrows() {
            return Err(Error::DimensionMismatch {
                expected: v.nrows(),
                found: v.ncols(),
            });
        }
        Ok(Self { v, t, basis })
    }

    pub fn vacuum(basis: Basis) -> Self {
        let n = basis.dim();
        Self {
            v: DMatrix::identity(n, n) * 0.5,
            t: 0.0,
            basis,
        }
    }

    /// Diagonal thermal state with per-mode occupations `(N_a, N_b[, N_m])`.
    pub fn thermal(basis: Basis, occupations: &[f64]) -> Result<Self> {
        let modes = basis.dim() / 2;
        if occupations.len() != modes {
            return Err(Error::DimensionMismatch {
                expected: modes,
                found: occupations.len(),
            });
        }
        let n = basis.dim();
        let v = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                occupations[i / 2] + 0.5
            } else {
                0.0
            }
        });
        Ok(Self { v, t: 0.0, basis })
    }

    pub fn get(&self, r: Quadrature, c: Quadrature) -> f64 {
        self.v[(r.index(), c.index())]
    }

    /// Photonic block `V(1:4, 1:4)`.
    pub fn photonic(&self) -> DMatrix<f64> {
        self.v.view((0, 0), (4, 4)).into_owned()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.v - self.v.transpose()).amax()
    }
}

fn symmetrize(v: &DMatrix<f64>) -> DMatrix<f64> {
    (v + v.transpose()) * 0.5
}

fn check_dims(a: &DriftMatrix, d: &DiffusionMatrix, v0: &CovarianceState) -> Result<()> {
    let n = a.entries.nrows();
    for found in [a.entries.ncols(), d.entries.nrows(), d.entries.ncols(), v0.v.nrows(), v0.v.ncols()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    Ok(())
}

fn guard(v: DMatrix<f64>, t: f64, basis: Basis) -> Result<CovarianceState> {
    if v.iter().any(|x| !x.is_finite() || x.abs() > OVERFLOW_GUARD) {
        return Err(Error::NonFiniteResult { t });
    }
    Ok(CovarianceState { v, t, basis })
}

/// Exact solution of `dV/dt = AV + VAᵀ + D` after a duration `t`.
///
/// The propagator `(F, Q)` with `V(t) = F V₀ Fᵀ + Q` is read off the block
/// exponential `exp([[A, D], [0, −Aᵀ]] h)` for a short step `h = t/2ᵏ` and then
/// doubled `k` times via `Q ← F Q Fᵀ + Q`, `F ← F²`. A single exponential over
/// the whole horizon would cancel `e^{κt}` against `e^{−κt}`.
pub fn evolve(
    a: &DriftMatrix,
    d: &DiffusionMatrix,
    v0: &CovarianceState,
    t: f64,
) -> Result<CovarianceState> {
    check_dims(a, d, v0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid duration {t}")));
    }
    if t == 0.0 {
        return Ok(v0.clone());
    }
    let (f, q) = propagator(a, d, t);
    let v = &f * &v0.v * f.transpose() + q;
    guard(symmetrize(&v), v0.t + t, v0.basis)
}

/// `(F, Q)` such that `V(t) = F V(0) Fᵀ + Q`.
pub fn propagator(a: &DriftMatrix, d: &DiffusionMatrix, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.entries.nrows();
    let scale = a.entries.abs().row_sum().max() * t;
    let k = if scale > MAX_STEP_NORM {
        (scale / MAX_STEP_NORM).log2().ceil() as i32
    } else {
        0
    };
    let h = t / 2f64.powi(k);
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    b.view_mut((0, 0), (n, n)).copy_from(&(&a.entries * h));
    b.view_mut((0, n), (n, n)).copy_from(&(&d.entries * h));
    b.view_mut((n, n), (n, n)).copy_from(&(-a.entries.transpose() * h));
    let e = b.exp();
    let mut f = e.view((0, 0), (n, n)).into_owned();
    let mut q = symmetrize(&(e.view((0, n), (n, n)) * f.transpose()));
    for _ in 0..k {
        q = symmetrize(&(&f * &q * f.transpose() + &q));
        f = &f * &f;
    }
    (f, q)
}

/// Fixed-step classical RK4 integration, used as an independent check of
/// [`evolve`].
pub fn evolve_rk4(
    a: &DriftMatrix,
    d: &DiffusionMatrix,
    v0: &CovarianceState,
    t: f64,
    steps: usize,
) -> Result<CovarianceState> {
    check_dims(a, d, v0)?;
    if !(t >= 0.0) || steps == 0 {
        return Err(Error::InvalidParameter("RK4 needs t ≥ 0 and steps ≥ 1".into()));
    }
    let h = t / steps as f64;
    let at = a.entries.transpose();
    let rhs = |v: &DMatrix<f64>| &a.entries * v + v * &at + &d.entries;
    let mut v = v0.v.clone();
    for _ in 0..steps {
        let k1 = rhs(&v);
        let k2 = rhs(&(&v + &k1 * (h / 2.0)));
        let k3 = rhs(&(&v + &k2 * (h / 2.0)));
        let k4 = rhs(&(&v + &k3 * h));
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        v = symmetrize(&v);
    }
    guard(v, v0.t + t, v0.basis)
}

/// [`evolve`] at every time in `times` (durations from `v0`), in parallel.
pub fn evolve_many(
    a: &DriftMatrix,
    d: &DiffusionMatrix,
    v0: &CovarianceState,
    times: &[f64],
) -> Vec<Result<CovarianceState>> {
    times.par_iter().map(|&t| evolve(a, d, v0, t)).collect()
}

fn max_real_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.relative_eq(&a.transpose(), 0.0, 0.0) {
        a.clone().symmetric_eigenvalues().max()
    } else {
        let ev = real_eigenvalues(a);
        if ev.iter().any(|z| z.re.is_nan()) {
            return f64::NAN;
        }
        ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Unique solution of `AV + VAᵀ + D = 0` for a Hurwitz drift, via the
/// Kronecker-sum linear system.
pub fn steady_state(a: &DriftMatrix, d: &DiffusionMatrix) -> Result<CovarianceState> {
    let n = a.entries.nrows();
    if d.entries.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: d.entries.nrows(),
        });
    }
    let max_re = max_real_eigenvalue(&a.entries);
    if !(max_re < -MARGINAL_BAND) {
        return Err(Error::Unstable { max_re });
    }
    let id = DMatrix::<f64>::identity(n, n);
    let k = id.kronecker(&a.entries) + a.entries.kronecker(&id);
    let rhs = -DMatrix::from_column_slice(n * n, 1, d.entries.as_slice());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or(Error::SolveFailed { residual: f64::INFINITY })?;
    let v = symmetrize(&DMatrix::from_column_slice(n, n, x.as_slice()));
    let residual = lyapunov_residual(a, d, &v);
    if !(residual < STEADY_RESIDUAL_TOL) {
        return Err(Error::SolveFailed { residual });
    }
    Ok(CovarianceState {
        v,
        t: f64::INFINITY,
        basis: a.basis,
    })
}

/// `‖AV + VAᵀ + D‖_max`.
pub fn lyapunov_residual(a: &DriftMatrix, d: &DiffusionMatrix, v: &DMatrix<f64>) -> f64 {
    (&a.entries * v + v * a.entries.transpose() + &d.entries).amax()
}

/// Closed-form constants of the effective covariance dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticCoefficients {
    pub omega: f64,
    pub varphi: f64,
    pub phi_tilde: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub c_zero: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    pub c: f64,
    pub c_a: f64,
    pub c_b: f64,
    /// `κ_a + κ_b`
    pub kappa_sum: f64,
}

impl AnalyticCoefficients {
    pub fn new(ep: &EffectiveParams) -> Result<Self> {
        let EffectiveParams {
            g_eff: ge,
            kappa_a: ka,
            kappa_b: kb,
            n_a,
            n_b,
        } = *ep;
        let pole = ge * ge - ka * kb;
        if pole.abs() <= 1e-12 * ka * kb {
            return Err(Error::StabilityPole);
        }
        let omega = (4.0 * ge * ge + (ka - kb).powi(2)).sqrt();
        let varphi = if omega == 0.0 { 0.0 } else { (ka - kb).atan2(2.0 * ge) };
        let phi_tilde = (2.0 * ge).atan2(ka - kb) / 2.0;
        let (s, co) = varphi.sin_cos();
        let kp = ka * (2.0 * n_a + 1.0) + kb * (2.0 * n_b + 1.0);
        let km = ka * (2.0 * n_a + 1.0) - kb * (2.0 * n_b + 1.0);
        let np = n_a + n_b;
        let nm = n_a - n_b;
        let k = ka + kb;
        let c_zero = co / 2.0 * (km / k - nm);
        let c_plus = (kp - s * km) / (4.0 * (omega - k)) + (np - s * nm + 1.0) / 4.0;
        let c_minus = -(kp + s * km) / (4.0 * (omega + k)) + (np + s * nm + 1.0) / 4.0;
        let c = ge * ka * kb * (np + 1.0) / (pole * k);
        Ok(Self {
            omega,
            varphi,
            phi_tilde,
            c_plus,
            c_minus,
            c_zero,
            kappa_plus: kp,
            kappa_minus: km,
            n_plus: np,
            n_minus: nm,
            c,
            c_a: n_a + 0.5 - ge / ka * c,
            c_b: n_b + 0.5 - ge / kb * c,
            kappa_sum: k,
        })
    }

    /// `C₋` written with the optimal angle instead of `φ`.
    pub fn c_minus_from_phi_tilde(&self) -> f64 {
        let c2 = (2.0 * self.phi_tilde).cos();
        -(self.kappa_plus + c2 * self.kappa_minus) / (4.0 * (self.omega + self.kappa_sum))
            + (self.n_plus + c2 * self.n_minus + 1.0) / 4.0
    }

    /// `(V₁₁, V₄₄, V₁₄)` at time `t`.
    pub fn elements(&self, t: f64) -> (f64, f64, f64) {
        let (s, co) = self.varphi.sin_cos();
        let k = self.kappa_sum;
        let ep = ((self.omega - k) * t).exp();
        let e0 = (-k * t).exp();
        let em = (-(self.omega + k) * t).exp();
        let v11 = self.c_plus * (1.0 - s) * ep - self.c_zero * co * e0
            + self.c_minus * (1.0 + s) * em
            + self.c_a;
        let v44 = self.c_plus * (1.0 + s) * ep + self.c_zero * co * e0
            + self.c_minus * (1.0 - s) * em
            + self.c_b;
        let v14 = -self.c_plus * co * ep + self.c_zero * s * e0 + self.c_minus * co * em + self.c;
        (v11, v44, v14)
    }
}

/// Closed-form effective covariance matrix from the thermal initial state
/// `diag(N_a+½, N_a+½, N_b+½, N_b+½)`.
pub fn analytic_eff_cm(ep: &EffectiveParams, t: f64) -> Result<CovarianceState> {
    let coeffs = AnalyticCoefficients::new(ep)?;
    Ok(analytic_cm_from(&coeffs, t))
}

pub fn analytic_cm_from(coeffs: &AnalyticCoefficients, t: f64) -> CovarianceState {
    let (v11, v44, v14) = coeffs.elements(t);
    #[rustfmt::skip]
    let v = DMatrix::from_row_slice(4, 4, &[
        v11, 0.0, 0.0, v14,
        0.0, v11, v14, 0.0,
        0.0, v14, v44, 0.0,
        v14, 0.0, 0.0, v44,
    ]);
    CovarianceState {
        v,
        t,
        basis: Basis::Effective,
    }
}

/// Closed-form steady covariance of the rotating-wave reservoir model with
/// `κ_b = κ_a` and vacuum baths.
pub fn reservoir_steady_elements(
    g: f64,
    big_g: f64,
    kappa_a: f64,
    kappa_m: f64,
) -> Result<CovarianceState> {
    if !(big_g < g) {
        return Err(Error::InvalidRegime { g, big_g });
    }
    let (ka, km) = (kappa_a, kappa_m);
    let (g2, gg2) = (g * g, big_g * big_g);
    let vt = (ka + km) * (gg2 - g2 - ka * km) * (gg2 - g2 - 2.0 * ka * (ka + km));
    let v11 = 0.5 + gg2 * g2 * (km + 2.0 * ka) / vt;
    let v33 = 0.5 + gg2 * (2.0 * (ka + km) * (g2 + ka * km) - gg2 * km) / vt;
    let v66 = 0.5 + gg2 * ka * (g2 - gg2 + 2.0 * ka * (ka + km)) / vt;
    let v13 = -big_g * g * (gg2 * ka + (g2 + ka * km) * (ka + km)) / vt;
    let v16 = g * gg2 * ka * (2.0 * ka + km) / vt;
    let v36 = -big_g * (2.0 * ka * (ka + km) * (g2 + ka * km) - gg2 * ka * km) / vt;

    let mut v = DMatrix::zeros(6, 6);
    let mut set = |r: Quadrature, c: Quadrature, x: f64| {
        v[(r.index(), c.index())] = x;
        v[(c.index(), r.index())] = x;
    };
    use Quadrature::*;
    set(Xa, Xa, v11);
    set(Ya, Ya, v11);
    set(Xb, Xb, v33);
    set(Yb, Yb, v33);
    set(Xm, Xm, v66);
    set(Ym, Ym, v66);
    set(Xa, Xb, v13);
    set(Ya, Yb, -v13);
    set(Xa, Ym, v16);
    set(Ya, Xm, -v16);
    set(Xb, Ym, v36);
    set(Yb, Xm, v36);
    Ok(CovarianceState {
        v,
        t: f64::INFINITY,
        basis: Basis::Full,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub class: Stability,
    pub max_re: f64,
    /// `g_eff² < κ_a κ_b`, only for effective drifts.
    pub effective_criterion: Option<bool>,
}

pub fn classify_stability(a: &DriftMatrix) -> StabilityReport {
    let max_re = max_real_eigenvalue(&a.entries);
    let class = if max_re < -MARGINAL_BAND {
        Stability::Stable
    } else if max_re <= MARGINAL_BAND {
        Stability::Marginal
    } else {
        Stability::Unstable
    };
    let effective_criterion = (a.basis == Basis::Effective).then(|| {
        use Quadrature::*;
        let ge = -a.get(Xa, Yb);
        let ka = -a.get(Xa, Xa);
        let kb = -a.get(Yb, Yb);
        ge * ge < ka * kb
    });
    StabilityReport {
        class,
        max_re,
        effective_criterion,
    }
}

/// Trajectory CSV: `t, V11, V14, V44` plus `V15, V55` for full-model states.
pub fn trajectory_csv(states: &[CovarianceState]) -> String {
    use Quadrature::*;
    let full = states.first().is_some_and(|s| s.basis == Basis::Full);
    let mut out = String::from(if full {
        "t,V11,V14,V44,V15,V55\n"
    } else {
        "t,V11,V14,V44\n"
    });
    for s in states {
        let mut row = vec![s.t, s.get(Xa, Xa), s.get(Xa, Yb), s.get(Yb, Yb)];
        if full {
            row.push(s.get(Xa, Xm));
            row.push(s.get(Xm, Xm));
        }
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{build_diffusion, build_eff_drift, build_full_drift, build_reservoir_drift};
    use crate::model::SystemParams;
    use approx::assert_relative_eq;

    fn fig2_eff() -> EffectiveParams {
        EffectiveParams::from_system(&SystemParams::fig2_defaults().with_occupations(0.0, 0.0, 0.0)).unwrap()
    }

    fn eff_system(ep: &EffectiveParams) -> (DriftMatrix, DiffusionMatrix, CovarianceState) {
        let a = build_eff_drift(ep.g_eff, ep.kappa_a, ep.kappa_b);
        let p = SystemParams {
            kappa_a: ep.kappa_a,
            kappa_b: ep.kappa_b,
            n_a: ep.n_a,
            n_b: ep.n_b,
            ..SystemParams::fig2_defaults()
        };
        let d = build_diffusion(&p, Basis::Effective);
        let v0 = CovarianceState::thermal(Basis::Effective, &[ep.n_a, ep.n_b]).unwrap();
        (a, d, v0)
    }

    #[test]
    fn evolve_zero_time_is_identity() {
        let (a, d, v0) = eff_system(&fig2_eff());
        assert_eq!(evolve(&a, &d, &v0, 0.0).unwrap(), v0);
    }

    #[test]
    fn evolve_scalar_decay() {
        let k = 0.03;
        let a = DriftMatrix {
            entries: DMatrix::identity(4, 4) * -k,
            basis: Basis::Effective,
        };
        let d = DiffusionMatrix {
            entries: DMatrix::zeros(4, 4),
            basis: Basis::Effective,
        };
        let v0 = CovarianceState::vacuum(Basis::Effective);
        let v = evolve(&a, &d, &v0, 17.0).unwrap();
        let want = DMatrix::identity(4, 4) * (0.5 * (-2.0 * k * 17.0f64).exp());
        assert!((v.v - want).amax() < 1e-15);
        assert_eq!(v.t, 17.0);
    }

    #[test]
    fn evolve_matches_closed_form_fig2() {
        let ep = fig2_eff();
        let (a, d, v0) = eff_system(&ep);
        for t in [100.0, 300.0] {
            let num = evolve(&a, &d, &v0, t).unwrap();
            let ana = analytic_eff_cm(&ep, t).unwrap();
            assert!((num.v - ana.v).amax() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn evolve_rejects_mismatch() {
        let (a, d, _) = eff_system(&fig2_eff());
        let v0 = CovarianceState::vacuum(Basis::Full);
        assert!(matches!(evolve(&a, &d, &v0, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn evolve_overflow_is_reported() {
        let (a, d, v0) = eff_system(&fig2_eff());
        assert!(matches!(evolve(&a, &d, &v0, 1e5), Err(Error::NonFiniteResult { .. })));
    }

    #[test]
    fn rk4_agrees_with_exact() {
        let ep = fig2_eff();
        let (a, d, v0) = eff_system(&ep);
        let exact = evolve(&a, &d, &v0, 400.0).unwrap();
        let rk = evolve_rk4(&a, &d, &v0, 400.0, 4000).unwrap();
        assert!((exact.v - rk.v).amax() < 1e-9);
    }

    #[test]
    fn semigroup() {
        let p = SystemParams::fig2_defaults();
        let a = build_full_drift(&p);
        let d = build_diffusion(&p, Basis::Full);
        let v0 = CovarianceState::vacuum(Basis::Full);
        let once = evolve(&a, &d, &v0, 250.0).unwrap();
        let mid = evolve(&a, &d, &v0, 100.0).unwrap();
        let twice = evolve(&a, &d, &mid, 150.0).unwrap();
        assert!((&once.v - &twice.v).amax() < 1e-10);
        assert_eq!(twice.t, 250.0);
        assert!(once.asymmetry() < 1e-12);
    }

    #[test]
    fn steady_detailed_balance() {
        let k = 2e-3;
        let n = 3.0;
        let a = DriftMatrix {
            entries: DMatrix::identity(6, 6) * -k,
            basis: Basis::Full,
        };
        let d = DiffusionMatrix {
            entries: DMatrix::identity(6, 6) * (2.0 * k * (n + 0.5)),
            basis: Basis::Full,
        };
        let v = steady_state(&a, &d).unwrap();
        assert!((v.v - DMatrix::identity(6, 6) * (n + 0.5)).amax() < 1e-12);
    }

    #[test]
    fn steady_matches_reservoir_closed_form() {
        let mut p = SystemParams::fig2_defaults().with_occupations(0.0, 0.0, 0.0);
        p.g = 0.1;
        p.big_g = 0.05;
        let a = build_reservoir_drift(&p);
        let d = build_diffusion(&p, Basis::Full);
        let num = steady_state(&a, &d).unwrap();
        let cf = reservoir_steady_elements(0.1, 0.05, 1e-3, 1e-6).unwrap();
        assert!((num.v - &cf.v).amax() < 1e-10);
        assert!(lyapunov_residual(&a, &d, &cf.v) < 1e-10);
    }

    #[test]
    fn steady_rejects_unstable_effective() {
        let ep = fig2_eff();
        let (a, d, _) = eff_system(&ep);
        assert!(matches!(steady_state(&a, &d), Err(Error::Unstable { .. })));
    }

    #[test]
    fn evolve_converges_to_steady_state() {
        let ep = EffectiveParams {
            g_eff: 5e-4,
            ..fig2_eff()
        };
        let (a, d, v0) = eff_system(&ep);
        let ss = steady_state(&a, &d).unwrap();
        let late = evolve(&a, &d, &v0, 4e4).unwrap();
        let diff = (&ss.v - &late.v).amax();
        assert!(diff < 1e-8, "{diff}\n{}\n{}", ss.v, late.v);
    }

    #[test]
    fn analytic_initial_condition() {
        let ep = EffectiveParams {
            n_a: 0.7,
            n_b: 0.2,
            kappa_a: 2e-3,
            ..fig2_eff()
        };
        let v = analytic_eff_cm(&ep, 0.0).unwrap();
        let want = CovarianceState::thermal(Basis::Effective, &[0.7, 0.2]).unwrap();
        assert!((v.v - want.v).amax() < 1e-12);
    }

    #[test]
    fn analytic_growth_exponent() {
        let c = AnalyticCoefficients::new(&fig2_eff()).unwrap();
        assert_relative_eq!(c.omega - c.kappa_sum, 0.04 / 3.0 - 2e-3, max_relative = 1e-12);
        assert!(c.c_plus > 0.0);
        assert_relative_eq!(c.c_minus, c.c_minus_from_phi_tilde(), epsilon = 1e-12);
        assert_relative_eq!((2.0 * c.phi_tilde).cos(), c.varphi.sin(), epsilon = 1e-12);
    }

    #[test]
    fn analytic_equal_decay_symmetry() {
        let ep = EffectiveParams {
            n_a: 0.3,
            n_b: 0.3,
            ..fig2_eff()
        };
        for t in [0.0, 50.0, 400.0, 800.0] {
            let v = analytic_eff_cm(&ep, t).unwrap();
            assert_eq!(v.get(Quadrature::Xa, Quadrature::Xa), v.get(Quadrature::Yb, Quadrature::Yb));
        }
    }

    #[test]
    fn analytic_pole() {
        let ep = EffectiveParams {
            g_eff: 1e-3,
            ..fig2_eff()
        };
        assert!(matches!(analytic_eff_cm(&ep, 1.0), Err(Error::StabilityPole)));
    }

    #[test]
    fn reservoir_closed_form_limits() {
        let v = reservoir_steady_elements(0.1, 0.0, 1e-3, 1e-6).unwrap();
        assert!((v.v - DMatrix::identity(6, 6) * 0.5).amax() < 1e-15);
        assert!(matches!(
            reservoir_steady_elements(0.1, 0.1, 1e-3, 1e-6),
            Err(Error::InvalidRegime { .. })
        ));
        let v = reservoir_steady_elements(0.1, 0.09, 1e-3, 1e-6).unwrap();
        let x = (v.get(Quadrature::Xa, Quadrature::Xa)
            + v.get(Quadrature::Xb, Quadrature::Xb)
            + 2.0 * v.get(Quadrature::Xa, Quadrature::Xb))
            / 2.0;
        assert!((x - (0.5 - 0.009 / 0.0361)).abs() < 5e-3, "{x}");
    }

    #[test]
    fn stability_examples() {
        let r = classify_stability(&build_eff_drift(0.02 / 3.0, 1e-3, 1e-3));
        assert_eq!(r.class, Stability::Unstable);
        assert_eq!(r.effective_criterion, Some(false));
        let r = classify_stability(&build_eff_drift(0.0, 1e-3, 1e-3));
        assert_eq!(r.class, Stability::Stable);
        assert_eq!(r.effective_criterion, Some(true));
        let r = classify_stability(&build_full_drift(&SystemParams::fig2_defaults()));
        assert_eq!(r.effective_criterion, None);
    }

    #[test]
    fn trajectory_columns() {
        let p = SystemParams::fig2_defaults();
        let a = build_full_drift(&p);
        let d = build_diffusion(&p, Basis::Full);
        let v0 = CovarianceState::vacuum(Basis::Full);
        let states: Vec<_> = evolve_many(&a, &d, &v0, &[0.0, 10.0, 20.0])
            .into_iter()
            .collect::<Result<_>>()
            .unwrap();
        let csv = trajectory_csv(&states);
        assert!(csv.starts_with("t,V11,V14,V44,V15,V55\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
