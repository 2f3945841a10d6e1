//! Physical parameters, thermal occupations, classical fixed points and the
//! closed-form effective squeezing coupling.
//!
//! All quantities in [`SystemParams`] and [`DriveParams`] are dimensionless in
//! units of `ω_m`. [`PhysicalParams`] holds SI frequencies (ordinary
//! frequencies `ω/2π`, in Hz) and a temperature in Kelvin and exists only to
//! produce bath occupations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mechanical frequency. Everything else is measured against it.
pub const OMEGA_M: f64 = 1.0;

/// Planck constant `h` in J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Boltzmann constant in J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Above this value of `hf/k_BT` the Bose occupation is reported as exactly 0.
const OCCUPATION_EXPONENT_CUTOFF: f64 = 700.0;

const FIXED_POINT_DAMPING: f64 = 0.5;
const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_ITER: usize = 10_000;

/// Normalized model constants of the linearized three-mode system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Detuning of photon mode `a`.
    pub delta_a: f64,
    /// Detuning of photon mode `b`.
    pub delta_b: f64,
    /// Driving-enhanced `a`–`m` coupling.
    pub g: f64,
    /// Driving-enhanced `b`–`m` coupling.
    #[serde(rename = "G")]
    pub big_g: f64,
    #[serde(default)]
    pub theta_a: f64,
    #[serde(default)]
    pub theta_b: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_m: f64,
    #[serde(default)]
    pub n_a: f64,
    #[serde(default)]
    pub n_b: f64,
    #[serde(default)]
    pub n_m: f64,
}

impl SystemParams {
    /// Parameters of the main dynamics figure: `g = G = 0.1`, `Δ_b = ω_m + 10g`,
    /// `Δ_a = −Δ_b + δ`, `κ_a = κ_b = 1e-3`, `κ_m = 1e-6`, `N_a = N_b = 0`,
    /// `N_m = 10`.
    pub fn fig2_defaults() -> Self {
        Self::resonant(0.1, 0.1, OMEGA_M + 1.0, 1e-3, 1e-3, 1e-6)
            .expect("default detuning is off the pole")
            .with_occupations(0.0, 0.0, 10.0)
    }

    /// Squeezing configuration with `Δ_a` placed at `−Δ_b + δ` so that the
    /// effective interaction is a pure two-mode squeezer.
    pub fn resonant(
        g: f64,
        big_g: f64,
        delta_b: f64,
        kappa_a: f64,
        kappa_b: f64,
        kappa_m: f64,
    ) -> Result<Self> {
        let mut p = Self {
            delta_a: -delta_b,
            delta_b,
            g,
            big_g,
            theta_a: 0.0,
            theta_b: 0.0,
            kappa_a,
            kappa_b,
            kappa_m,
            n_a: 0.0,
            n_b: 0.0,
            n_m: 0.0,
        };
        let (_, shift) = effective_coupling(&p)?;
        p.delta_a = -delta_b + shift;
        Ok(p)
    }

    pub fn with_occupations(mut self, n_a: f64, n_b: f64, n_m: f64) -> Self {
        self.n_a = n_a;
        self.n_b = n_b;
        self.n_m = n_m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.delta_a,
            self.delta_b,
            self.g,
            self.big_g,
            self.theta_a,
            self.theta_b,
            self.kappa_a,
            self.kappa_b,
            self.kappa_m,
            self.n_a,
            self.n_b,
            self.n_m,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite system parameter".into()));
        }
        if self.kappa_a <= 0.0 || self.kappa_b <= 0.0 || self.kappa_m <= 0.0 {
            return Err(Error::InvalidParameter("decay rates must be positive".into()));
        }
        if self.g < 0.0 || self.big_g < 0.0 {
            return Err(Error::InvalidParameter("couplings g, G must be non-negative".into()));
        }
        if self.n_a < 0.0 || self.n_b < 0.0 || self.n_m < 0.0 {
            return Err(Error::InvalidParameter("bath occupations must be non-negative".into()));
        }
        Ok(())
    }

    /// Whether the point lies in the region where the effective two-photon
    /// coupling is known to be accurate: `|Δ_b − ω_m| ≥ 8g` and
    /// `0.1 ≤ g ≤ 0.2`. Informational only.
    pub fn effective_model_valid(&self) -> bool {
        (self.delta_b - OMEGA_M).abs() >= 8.0 * self.g && (0.1..=0.2).contains(&self.g)
    }
}

/// Lab-frame frequencies (Hz, as `ω/2π`) and temperature (K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub omega_a_hz: f64,
    pub omega_b_hz: f64,
    pub omega_m_hz: f64,
    pub temp_k: f64,
}

impl Default for PhysicalParams {
    /// Microwave resonators at 10 GHz, mechanics at 10 MHz, 20 mK.
    fn default() -> Self {
        Self {
            omega_a_hz: 10e9,
            omega_b_hz: 10e9,
            omega_m_hz: 10e6,
            temp_k: 0.02,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_a_hz > 0.0 && self.omega_b_hz > 0.0 && self.omega_m_hz > 0.0) {
            return Err(Error::InvalidParameter("mode frequencies must be positive".into()));
        }
        if !(self.temp_k >= 0.0) || !self.temp_k.is_finite() {
            return Err(Error::InvalidParameter("temperature must be finite and ≥ 0".into()));
        }
        Ok(())
    }

    /// Bath occupations `(N_a, N_b, N_m)` at `temp_k`.
    pub fn occupations(&self) -> (f64, f64, f64) {
        (
            thermal_occupation(self.omega_a_hz, self.temp_k),
            thermal_occupation(self.omega_b_hz, self.temp_k),
            thermal_occupation(self.omega_m_hz, self.temp_k),
        )
    }
}

/// Drive configuration of the unlinearized model (units of `ω_m`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveParams {
    /// Single-photon optomechanical coupling of mode `a`.
    pub g_a: f64,
    pub g_b: f64,
    /// Drive Rabi frequency `Ω_a`.
    pub rabi_a: f64,
    pub rabi_b: f64,
    pub delta_a: f64,
    pub delta_b: f64,
}

/// Decay rates needed by the classical fixed-point problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Damping {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_m: f64,
}

/// Steady classical amplitudes `(α, β, M)` of the driven modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalAmplitudes {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub m: Complex64,
}

impl ClassicalAmplitudes {
    /// Shifted detuning `Δ_a − 2 g_a Re(M)` felt by mode `a`.
    pub fn shifted_delta_a(&self, dp: &DriveParams) -> f64 {
        dp.delta_a - 2.0 * dp.g_a * self.m.re
    }

    pub fn shifted_delta_b(&self, dp: &DriveParams) -> f64 {
        dp.delta_b - 2.0 * dp.g_b * self.m.re
    }
}

/// Bose–Einstein occupation `1/(exp(h f / k_B T) − 1)` for an ordinary
/// frequency `freq_hz`. Exactly zero at `T = 0` and when the exponent is so
/// large that the result underflows.
pub fn thermal_occupation(freq_hz: f64, temp_k: f64) -> f64 {
    if temp_k <= 0.0 {
        return 0.0;
    }
    let x = PLANCK * freq_hz / (BOLTZMANN * temp_k);
    if x > OCCUPATION_EXPONENT_CUTOFF {
        return 0.0;
    }
    1.0 / x.exp_m1()
}

/// Right-hand side of the stationary classical equations, evaluated at
/// `(α, β, M)`. A fixed point satisfies `rhs(x) = x`.
fn fixed_point_map(
    dp: &DriveParams,
    damp: &Damping,
    omega_m: f64,
    x: &ClassicalAmplitudes,
) -> ClassicalAmplitudes {
    let i = Complex64::i();
    let re_m = x.m.re;
    let alpha = -dp.rabi_a / (dp.delta_a - i * damp.kappa_a - 2.0 * dp.g_a * re_m);
    let beta = -dp.rabi_b / (dp.delta_b - i * damp.kappa_b - 2.0 * dp.g_b * re_m);
    let m = -(dp.g_a * x.alpha.norm_sqr() + dp.g_b * x.beta.norm_sqr())
        / (omega_m - i * damp.kappa_m);
    ClassicalAmplitudes { alpha, beta, m }
}

fn residual(a: &ClassicalAmplitudes, b: &ClassicalAmplitudes) -> f64 {
    (a.alpha - b.alpha)
        .norm()
        .max((a.beta - b.beta).norm())
        .max((a.m - b.m).norm())
}

/// Max-norm residual `|rhs(x) − x|` of the stationary classical equations.
pub fn classical_residual(
    dp: &DriveParams,
    damp: &Damping,
    omega_m: f64,
    amps: &ClassicalAmplitudes,
) -> f64 {
    residual(&fixed_point_map(dp, damp, omega_m, amps), amps)
}

/// Solves the stationary classical amplitude equations by damped fixed-point
/// iteration, starting from the weak-coupling guess `α ≈ −Ω_a/Δ_a`,
/// `β ≈ −Ω_b/Δ_b`.
pub fn classical_amplitudes(
    dp: &DriveParams,
    damp: &Damping,
    omega_m: f64,
) -> Result<ClassicalAmplitudes> {
    if (dp.rabi_a != 0.0 && dp.delta_a == 0.0) || (dp.rabi_b != 0.0 && dp.delta_b == 0.0) {
        return Err(Error::InvalidParameter(
            "a driven mode needs a nonzero detuning".into(),
        ));
    }
    if dp.g_a < 0.0 || dp.g_b < 0.0 {
        return Err(Error::InvalidParameter("single-photon couplings must be ≥ 0".into()));
    }
    let guess = |rabi: f64, delta: f64| {
        if rabi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(-rabi / delta, 0.0)
        }
    };
    let alpha = guess(dp.rabi_a, dp.delta_a);
    let beta = guess(dp.rabi_b, dp.delta_b);
    let m = -(dp.g_a * alpha.norm_sqr() + dp.g_b * beta.norm_sqr())
        / (omega_m - Complex64::i() * damp.kappa_m);
    let mut x = ClassicalAmplitudes { alpha, beta, m };

    let mut res = f64::INFINITY;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = fixed_point_map(dp, damp, omega_m, &x);
        res = residual(&next, &x);
        if res < FIXED_POINT_TOL {
            return Ok(x);
        }
        if !res.is_finite() {
            break;
        }
        let w = FIXED_POINT_DAMPING;
        x = ClassicalAmplitudes {
            alpha: x.alpha * (1.0 - w) + next.alpha * w,
            beta: x.beta * (1.0 - w) + next.beta * w,
            m: x.m * (1.0 - w) + next.m * w,
        };
    }
    Err(Error::NonConvergence {
        iterations: FIXED_POINT_MAX_ITER,
        residual: res,
    })
}

/// Driving-enhanced couplings and their phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhancedCouplings {
    pub g: f64,
    pub theta_a: f64,
    pub big_g: f64,
    pub theta_b: f64,
}

/// `g e^{iθ_a} = g_a α`, `G e^{iθ_b} = g_b β`. A zero amplitude has phase 0.
pub fn enhanced_couplings(dp: &DriveParams, amps: &ClassicalAmplitudes) -> EnhancedCouplings {
    let polar = |z: Complex64| {
        let r = z.norm();
        if r == 0.0 {
            (0.0, 0.0)
        } else {
            (r, z.arg())
        }
    };
    let (g, theta_a) = polar(amps.alpha * dp.g_a);
    let (big_g, theta_b) = polar(amps.beta * dp.g_b);
    EnhancedCouplings {
        g,
        theta_a,
        big_g,
        theta_b,
    }
}

/// Effective two-photon coupling and energy shift,
/// `g_eff = 2ω_m gG/(Δ_b² − ω_m²)` and `δ = 2ω_m(g² + G²)/(ω_m² − Δ_b²)`.
pub fn effective_coupling(p: &SystemParams) -> Result<(f64, f64)> {
    let denom = p.delta_b * p.delta_b - OMEGA_M * OMEGA_M;
    if denom.abs() < 1e-12 {
        return Err(Error::SingularDetuning { delta_b: p.delta_b });
    }
    let g_eff = 2.0 * OMEGA_M * p.g * p.big_g / denom;
    let shift = -2.0 * OMEGA_M * (p.g * p.g + p.big_g * p.big_g) / denom;
    Ok((g_eff, shift))
}

/// Parameters of the effective two-photon model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub g_eff: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub n_a: f64,
    pub n_b: f64,
}

impl EffectiveParams {
    pub fn from_system(p: &SystemParams) -> Result<Self> {
        let (g_eff, _) = effective_coupling(p)?;
        Ok(Self {
            g_eff,
            kappa_a: p.kappa_a,
            kappa_b: p.kappa_b,
            n_a: p.n_a,
            n_b: p.n_b,
        })
    }
}

/// Squeezing parameter `r = artanh(G/g)` of the Bogoliubov mode used by
/// reservoir engineering.
pub fn bogoliubov_r(g: f64, big_g: f64) -> Result<f64> {
    if !(big_g >= 0.0 && g > big_g) {
        return Err(Error::InvalidRatio { g, big_g });
    }
    Ok((big_g / g).atanh())
}
