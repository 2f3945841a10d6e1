use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{classify_stability, evolve_many, steady_state, CovarianceState};
use crate::error::{Error, Result};
use crate::matrices::{
    apply_systematic_error, build_diffusion, build_eff_drift, build_full_drift, build_reservoir_drift, Basis,
    DiffusionMatrix, DriftMatrix,
};
use crate::spectral::{default_grid, eigen_scan, extract_geff_numeric};
use crate::squeezing::optimize_quadrature;

use super::config::RunConfig;
use super::output::{CellRecord, CellStatus, Emission, Table};
use super::sweeps::{flatten, full_trajectory, initial_state, Design};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Full,
    Effective,
    Reservoir,
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Model::Full),
            "effective" => Ok(Model::Effective),
            "reservoir" => Ok(Model::Reservoir),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Full => "full",
            Model::Effective => "effective",
            Model::Reservoir => "reservoir",
        })
    }
}

/// Drift, diffusion and initial state of `model` under `cfg`. Systematic
/// errors apply to the full Hamiltonian only.
pub fn model_matrices(cfg: &RunConfig, model: Model) -> Result<(DriftMatrix, DiffusionMatrix, CovarianceState)> {
    let p = cfg.system;
    Ok(match model {
        Model::Full => {
            let q = cfg.errors.map_or(p, |e| apply_systematic_error(&p, &e));
            (build_full_drift(&q), build_diffusion(&q, Basis::Full), initial_state(&p))
        }
        Model::Effective => {
            let ep = Design::of(&p)?.effective;
            (
                build_eff_drift(ep.g_eff, ep.kappa_a, ep.kappa_b),
                build_diffusion(&p, Basis::Effective),
                CovarianceState::thermal(Basis::Effective, &[p.n_a, p.n_b])?,
            )
        }
        Model::Reservoir => (
            build_reservoir_drift(&p),
            build_diffusion(&p, Basis::Full),
            CovarianceState::vacuum(Basis::Full),
        ),
    })
}

/// Branch scan of `ℒ` over the `delta_a` axis (or the default window) and
/// the numeric `g_eff` extraction.
pub fn geff_scan(cfg: &RunConfig, prefix: &str) -> Result<Emission> {
    let p = cfg.system;
    let grid = match cfg.axis("delta_a") {
        Some(ax) => ax.values(),
        None => default_grid(&p)?,
    };
    let branches = eigen_scan(&p, &grid)?;
    let mut scan = Table::new(
        &format!("{prefix}_branches"),
        &["delta_a", "branch_id", "re_lambda", "im_lambda"],
    );
    for (k, x) in grid.iter().enumerate() {
        for (b, br) in branches.iter().enumerate() {
            let z = br.eigenvalues[k];
            scan.push(vec![*x, b as f64, z.re, z.im]);
        }
    }
    let name = format!("{prefix}_extraction");
    let ex = extract_geff_numeric(&p, &default_grid(&p)?);
    let mut summary = Table::new(&name, &super::figures::EXTRACTION_COLUMNS);
    summary.push(flatten(&ex, |e| super::figures::extraction_row(&e), 5));
    Ok(Emission {
        tables: vec![scan, summary],
        cells: vec![CellRecord::from_result(&name, "scan".into(), &ex)],
    })
}

fn element_columns(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 0..n {
        for j in i..n {
            cols.push(format!("V{}{}", i + 1, j + 1));
        }
    }
    cols
}

/// Covariance trajectory on the config time grid (the `τ` of the effective
/// model sets the default span).
pub fn evolve_run(cfg: &RunConfig, model: Model) -> Result<Emission> {
    let (a, d, v0) = model_matrices(cfg, model)?;
    let tau = Design::of(&cfg.system)?.tau;
    let times = cfg.times.resolve(tau);
    let states = evolve_many(&a, &d, &v0, &times);
    let n = a.dim();
    let cols = element_columns(n);
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new("evolve", &col_refs);
    let mut cells = vec![];
    for (&t, s) in times.iter().zip(&states) {
        let mut row = vec![t];
        match s {
            Ok(v) => {
                for i in 0..n {
                    for j in i..n {
                        row.push(v.v[(i, j)]);
                    }
                }
            }
            Err(_) => row.extend(vec![f64::NAN; cols.len() - 1]),
        }
        table.push(row);
        if s.is_err() {
            cells.push(CellRecord::from_result("evolve", format!("t={t}"), s));
        }
    }
    if cells.is_empty() {
        cells.push(CellRecord::from_result::<()>("evolve", "trajectory".into(), &Ok(())));
    }
    Ok(Emission {
        tables: vec![table],
        cells,
    })
}

/// Lyapunov steady state; a non-Hurwitz drift is a hard error.
pub fn steady_run(cfg: &RunConfig, model: Model) -> Result<Emission> {
    let (a, d, _) = model_matrices(cfg, model)?;
    let report = classify_stability(&a);
    let v = steady_state(&a, &d)?;
    let labels = a.basis.labels();
    let mut table = Table::new("steady", &labels);
    for r in 0..v.v.nrows() {
        table.push(v.v.row(r).iter().copied().collect());
    }
    let mut stab = Table::new("stability", &["max_re"]);
    stab.push(vec![report.max_re]);
    Ok(Emission {
        tables: vec![table, stab],
        cells: vec![CellRecord {
            table: "steady".into(),
            cell: model.to_string(),
            status: CellStatus::Ok,
            error: None,
        }],
    })
}

/// Optimal-quadrature reports of the full model on the config time grid.
pub fn squeeze_run(cfg: &RunConfig) -> Result<Emission> {
    let d = Design::of(&cfg.system)?;
    let times = cfg.times.resolve(d.tau);
    let states = full_trajectory(&cfg.system, cfg.errors.as_ref(), &times);
    let reports: Vec<Result<_>> = states
        .par_iter()
        .map(|s| match s {
            Ok(v) => optimize_quadrature(v),
            Err(e) => Err(Error::InvalidParameter(e.to_string())),
        })
        .collect();
    let mut table = Table::new("squeeze", &["t", "delta_x", "level_db", "phi1", "phi2", "phi3"]);
    let mut cells = vec![];
    for (&t, r) in times.iter().zip(&reports) {
        let mut row = vec![t];
        row.extend(flatten(
            r,
            |rep| {
                let (p1, p2, p3) = rep.spec.angles();
                vec![rep.delta_x, rep.level_db, p1, p2, p3]
            },
            5,
        ));
        table.push(row);
        if r.is_err() {
            cells.push(CellRecord::from_result("squeeze", format!("t={t}"), r));
        }
    }
    if cells.is_empty() {
        cells.push(CellRecord::from_result::<()>("squeeze", "trajectory".into(), &Ok(())));
    }
    Ok(Emission {
        tables: vec![table],
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Times;

    #[test]
    fn squeezing_regime_has_no_steady_state() {
        let cfg = RunConfig::default();
        let err = steady_run(&cfg, Model::Effective).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn evolve_columns() {
        let mut cfg = RunConfig::default();
        cfg.times = Times::Explicit(vec![0.0, 1.0]);
        let em = evolve_run(&cfg, Model::Effective).unwrap();
        let t = &em.tables[0];
        assert_eq!(t.columns.len(), 1 + 10);
        assert_eq!(t.rows[0][1], 0.5);
    }

    #[test]
    fn model_names() {
        assert_eq!("reservoir".parse::<Model>().unwrap(), Model::Reservoir);
        assert!("x".parse::<Model>().is_err());
    }
}
