use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{evolve_many, steady_state, CovarianceState};
use crate::error::{Error, Result};
use crate::matrices::{
    apply_systematic_error, build_diffusion, build_full_drift, build_reservoir_drift, Basis, ErrorCoeffs,
};
use crate::model::{EffectiveParams, PhysicalParams, SystemParams, OMEGA_M};
use crate::squeezing::{
    anti_level, optimal_angle, optimize_quadrature, squeezing_level, tau, variance_from_cm, QuadratureSpec,
};

use super::config::RunConfig;
use super::output::{CellRecord, Emission, Table};

/// Operating point `(g, G, Δ_b)` with `Δ_a = −Δ_b + δ`, keeping decay rates,
/// phases and occupations of `base`.
pub fn retune(base: &SystemParams, g: f64, big_g: f64, delta_b: f64) -> Result<SystemParams> {
    let r = SystemParams::resonant(g, big_g, delta_b, base.kappa_a, base.kappa_b, base.kappa_m)?;
    Ok(SystemParams {
        theta_a: base.theta_a,
        theta_b: base.theta_b,
        ..r
    }
    .with_occupations(base.n_a, base.n_b, base.n_m))
}

/// Photons thermal at their bath occupations, phonon in vacuum.
pub fn initial_state(p: &SystemParams) -> CovarianceState {
    CovarianceState::thermal(Basis::Full, &[p.n_a, p.n_b, 0.0]).expect("three modes")
}

/// Effective-model quantities fixed by the error-free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Design {
    pub effective: EffectiveParams,
    pub phi_tilde: f64,
    pub tau: f64,
}

impl Design {
    pub fn of(p: &SystemParams) -> Result<Self> {
        let effective = EffectiveParams::from_system(p)?;
        let phi_tilde = optimal_angle(effective.g_eff, effective.kappa_a, effective.kappa_b).phi_tilde;
        let tau = tau(&effective);
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("characteristic time τ = {tau}")));
        }
        Ok(Self {
            effective,
            phi_tilde,
            tau,
        })
    }
}

/// Full-model states at `times` from [`initial_state`], with optional
/// systematic errors applied to the Hamiltonian only.
pub fn full_trajectory(
    p: &SystemParams,
    errors: Option<&ErrorCoeffs>,
    times: &[f64],
) -> Vec<Result<CovarianceState>> {
    let q = errors.map_or(*p, |e| apply_systematic_error(p, e));
    let a = build_full_drift(&q);
    let d = build_diffusion(&q, Basis::Full);
    evolve_many(&a, &d, &initial_state(p), times)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelPair {
    /// Squeezing of the effective-model quadrature at `φ̃`.
    pub s_lin: f64,
    /// Squeezing of the optimal quadrature.
    pub s_tilde_lin: f64,
}

pub fn levels(v: &CovarianceState, phi_tilde: f64) -> Result<LevelPair> {
    Ok(LevelPair {
        s_lin: squeezing_level(variance_from_cm(v, &QuadratureSpec::two_mode_x(phi_tilde))?)?,
        s_tilde_lin: optimize_quadrature(v)?.level_db,
    })
}

pub fn flatten<T: Copy>(r: &Result<T>, f: impl Fn(T) -> Vec<f64>, width: usize) -> Vec<f64> {
    match r {
        Ok(x) => f(*x),
        Err(_) => vec![f64::NAN; width],
    }
}

pub(crate) fn cell_id(pairs: &[(&str, f64)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// `S_lin(τ)` and `S̃_lin(τ)` with `errors` applied to `base`; `τ` and `φ̃`
/// come from the error-free effective model.
pub fn systematic_cell(base: &SystemParams, errors: &ErrorCoeffs) -> Result<LevelPair> {
    let d = Design::of(base)?;
    let v = full_trajectory(base, Some(errors), &[d.tau])
        .pop()
        .expect("one time point")?;
    levels(&v, d.phi_tilde)
}

/// `(γ, η)` grid around `cfg.system`.
pub fn sweep_systematic(cfg: &RunConfig, gammas: &[f64], etas: &[f64]) -> Emission {
    let name = "sweep_error";
    let cells: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| etas.iter().map(move |&e| (g, e)))
        .collect();
    let results: Vec<Result<LevelPair>> = cells
        .par_iter()
        .map(|&(gamma, eta)| systematic_cell(&cfg.system, &ErrorCoeffs { gamma, eta }))
        .collect();
    let mut table = Table::new(name, &["gamma", "eta", "S_lin_tau", "S_tilde_lin_tau"]);
    let mut records = vec![];
    for (&(gamma, eta), r) in cells.iter().zip(&results) {
        let mut row = vec![gamma, eta];
        row.extend(flatten(r, |l| vec![l.s_lin, l.s_tilde_lin], 2));
        table.push(row);
        records.push(CellRecord::from_result(name, cell_id(&[("gamma", gamma), ("eta", eta)]), r));
    }
    Emission {
        tables: vec![table],
        cells: records,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalCheckpoints {
    pub occupations: (f64, f64, f64),
    /// `S_lin` at `τ/2`, `τ`, `3τ/2`.
    pub s_lin: [f64; 3],
}

/// Bath occupations from `physical` at `temp_k`; initial photons thermal,
/// phonon vacuum.
pub fn thermal_cell(
    base: &SystemParams,
    physical: &PhysicalParams,
    temp_k: f64,
    errors: Option<&ErrorCoeffs>,
) -> Result<ThermalCheckpoints> {
    let ph = PhysicalParams { temp_k, ..*physical };
    ph.validate()?;
    let occ = ph.occupations();
    let p = base.with_occupations(occ.0, occ.1, occ.2);
    let d = Design::of(&p)?;
    let times = [0.5 * d.tau, d.tau, 1.5 * d.tau];
    let mut s_lin = [0.0; 3];
    for (k, v) in full_trajectory(&p, errors, &times).into_iter().enumerate() {
        s_lin[k] = levels(&v?, d.phi_tilde)?.s_lin;
    }
    Ok(ThermalCheckpoints {
        occupations: occ,
        s_lin,
    })
}

pub fn sweep_thermal(cfg: &RunConfig, temps_k: &[f64]) -> Emission {
    let name = "thermal";
    let ph = cfg.physical_or_default();
    let results: Vec<Result<ThermalCheckpoints>> = temps_k
        .par_iter()
        .map(|&t| thermal_cell(&cfg.system, &ph, t, cfg.errors.as_ref()))
        .collect();
    let mut table = Table::new(
        name,
        &[
            "temp_k",
            "n_a",
            "n_b",
            "n_m",
            "S_lin_half_tau",
            "S_lin_tau",
            "S_lin_three_half_tau",
        ],
    );
    let mut records = vec![];
    for (&t, r) in temps_k.iter().zip(&results) {
        let mut row = vec![t];
        row.extend(flatten(
            r,
            |c| {
                vec![
                    c.occupations.0,
                    c.occupations.1,
                    c.occupations.2,
                    c.s_lin[0],
                    c.s_lin[1],
                    c.s_lin[2],
                ]
            },
            6,
        ));
        table.push(row);
        records.push(CellRecord::from_result(name, cell_id(&[("temp_k", t)]), r));
    }
    Emission {
        tables: vec![table],
        cells: records,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselinePoint {
    pub s: f64,
    pub s_prime: f64,
}

/// Steady state of the reservoir-engineering scheme at `Δ_a = ω_m`,
/// `Δ_b = −ω_m`, `G = ratio·g`; `S` from `(X_a+X_b)/√2`, `S′` from
/// `(Y_a+Y_b)/√2`.
pub fn baseline_cell(base: &SystemParams, g: f64, ratio: f64) -> Result<BaselinePoint> {
    let p = SystemParams {
        delta_a: OMEGA_M,
        delta_b: -OMEGA_M,
        g,
        big_g: ratio * g,
        ..*base
    };
    if !(p.big_g < p.g) {
        return Err(Error::InvalidRegime { g, big_g: p.big_g });
    }
    p.validate()?;
    let v = steady_state(&build_reservoir_drift(&p), &build_diffusion(&p, Basis::Full))?;
    let x = QuadratureSpec::from_coeffs([1.0, 0.0, 1.0, 0.0])?;
    let y = QuadratureSpec::from_coeffs([0.0, 1.0, 0.0, 1.0])?;
    Ok(BaselinePoint {
        s: squeezing_level(variance_from_cm(&v, &x)?)?,
        s_prime: anti_level(variance_from_cm(&v, &y)?)?,
    })
}

/// `S`, `S′` against `G/g`, for every `g` of the config's `g` axis (or
/// `cfg.system.g`).
pub fn baseline_reservoir(cfg: &RunConfig, ratios: &[f64]) -> Emission {
    let name = "baseline";
    let gs = cfg.axis_values_or("g", &[cfg.system.g]);
    let cells: Vec<(f64, f64)> = gs
        .iter()
        .flat_map(|&g| ratios.iter().map(move |&r| (g, r)))
        .collect();
    let results: Vec<Result<BaselinePoint>> = cells
        .par_iter()
        .map(|&(g, r)| baseline_cell(&cfg.system, g, r))
        .collect();
    let mut table = Table::new(name, &["g", "ratio", "S", "S_prime"]);
    let mut records = vec![];
    for (&(g, r), res) in cells.iter().zip(&results) {
        let mut row = vec![g, r];
        row.extend(flatten(res, |b| vec![b.s, b.s_prime], 2));
        table.push(row);
        records.push(CellRecord::from_result(name, cell_id(&[("g", g), ("ratio", r)]), res));
    }
    Emission {
        tables: vec![table],
        cells: records,
    }
}
