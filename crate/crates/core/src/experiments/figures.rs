use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{analytic_eff_cm, CovarianceState};
use crate::error::{Error, Result};
use crate::matrices::ErrorCoeffs;
use crate::model::{PhysicalParams, SystemParams, OMEGA_M};
use crate::spectral::{sigma_cell, GeffExtraction};
use crate::squeezing::{
    anti_level, optimize_quadrature, relative_sl_errors, squeezing_level, variance_from_cm, variance_x,
    QuadratureSpec,
};

use super::config::{RunConfig, SweepAxis};
use super::commands::geff_scan;
use super::output::{CellRecord, CellStatus, Emission, Table};
use super::sweeps::{
    baseline_reservoir, cell_id, flatten, full_trajectory, levels, retune, sweep_thermal, systematic_cell,
    Design, LevelPair,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig2a,
    Fig2b,
    Fig3,
    Fig4,
    Fig5,
    FigB,
    FigC1,
    FigC2,
}

impl FigureId {
    pub const ALL: [FigureId; 8] = [
        FigureId::Fig2a,
        FigureId::Fig2b,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::FigB,
        FigureId::FigC1,
        FigureId::FigC2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureId::Fig2a => "fig2a",
            FigureId::Fig2b => "fig2b",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::FigB => "figB",
            FigureId::FigC1 => "figC1",
            FigureId::FigC2 => "figC2",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

/// Built-in configuration carrying each figure's caption parameters.
pub fn figure_config(id: FigureId) -> RunConfig {
    let mut cfg = RunConfig::default();
    match id {
        FigureId::Fig2a | FigureId::Fig2b => {}
        FigureId::Fig3 => {
            cfg.sweep = vec![SweepAxis::new("g", 0.05, 0.25, 5)];
        }
        FigureId::Fig4 => {
            cfg.sweep = vec![
                SweepAxis::new("g", 0.1, 0.2, 3),
                SweepAxis::new("gamma", 0.0, 0.2, 11),
                SweepAxis::new("eta", 0.0, 1e-3, 11),
                SweepAxis::new("delta_b", 1.8, 3.0, 7),
            ];
        }
        FigureId::Fig5 => {
            cfg.physical = Some(PhysicalParams::default());
            cfg.sweep = vec![SweepAxis::new("temp_k", 0.0, 0.2, 11)];
        }
        FigureId::FigB => {
            cfg.system = SystemParams {
                delta_a: OMEGA_M,
                delta_b: -OMEGA_M,
                g: 0.1,
                big_g: 0.05,
                theta_a: 0.0,
                theta_b: 0.0,
                kappa_a: 1e-3,
                kappa_b: 1e-3,
                kappa_m: 1e-6,
                n_a: 0.0,
                n_b: 0.0,
                n_m: 10.0,
            };
            cfg.sweep = vec![
                SweepAxis::new("g", 0.05, 0.15, 3),
                SweepAxis::new("ratio", 0.1, 0.99, 90),
            ];
        }
        FigureId::FigC1 => {
            cfg.system = SystemParams::resonant(0.1, 0.1, 3.0, 1e-3, 1e-3, 1e-6)
                .expect("off the pole")
                .with_occupations(0.0, 0.0, 10.0);
        }
        FigureId::FigC2 => {
            cfg.sweep = vec![
                SweepAxis::new("g", 0.05, 0.2, 4),
                SweepAxis::new("delta_b", 1.5, 4.0, 11),
            ];
        }
    }
    cfg
}

pub fn run_figure(id: FigureId, cfg: &RunConfig) -> Result<Emission> {
    match id {
        FigureId::Fig2a => fig2(cfg).map(|(a, _)| a),
        FigureId::Fig2b => fig2(cfg).map(|(_, b)| b),
        FigureId::Fig3 => Ok(fig3(cfg)),
        FigureId::Fig4 => Ok(fig4(cfg)),
        FigureId::Fig5 => Ok(fig5(cfg)),
        FigureId::FigB => Ok(baseline_reservoir(cfg, &cfg.axis_values_or("ratio", &[0.5]))),
        FigureId::FigC1 => fig_c1(cfg),
        FigureId::FigC2 => Ok(fig_c2(cfg)),
    }
}

fn trajectory_record(table: &str, id: String, states: &[Result<CovarianceState>]) -> CellRecord {
    let first_err = states.iter().find(|s| s.is_err());
    match first_err {
        Some(Err(e)) => CellRecord {
            table: table.to_string(),
            cell: id,
            status: CellStatus::Missing,
            error: Some(e.to_string()),
        },
        _ => CellRecord::from_result::<()>(table, id, &Ok(())),
    }
}

fn fig2(cfg: &RunConfig) -> Result<(Emission, Emission)> {
    let d = Design::of(&cfg.system)?;
    let times = cfg.times.resolve(d.tau);
    let full = full_trajectory(&cfg.system, cfg.errors.as_ref(), &times);
    let x = QuadratureSpec::two_mode_x(d.phi_tilde);
    let mut ta = Table::new("fig2a", &["t", "V11_full", "V14_full", "V11_eff", "V14_eff"]);
    let mut tb = Table::new("fig2b", &["t", "dX_eff_analytic", "dX_full", "dXtilde_full"]);
    for (&t, s) in times.iter().zip(&full) {
        let eff = analytic_eff_cm(&d.effective, t);
        let (v11f, v14f, dxf, dxt) = match s {
            Ok(v) => (
                v.v[(0, 0)],
                v.v[(0, 3)],
                variance_from_cm(v, &x).unwrap_or(f64::NAN),
                optimize_quadrature(v).map_or(f64::NAN, |r| r.delta_x),
            ),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        let (v11e, v14e) = eff.as_ref().map_or((f64::NAN, f64::NAN), |e| (e.v[(0, 0)], e.v[(0, 3)]));
        ta.push(vec![t, v11f, v14f, v11e, v14e]);
        tb.push(vec![t, variance_x(&d.effective, t), dxf, dxt]);
    }
    let rec = |name: &str| vec![trajectory_record(name, "trajectory".into(), &full)];
    Ok((
        Emission {
            tables: vec![ta],
            cells: rec("fig2a"),
        },
        Emission {
            tables: vec![tb],
            cells: rec("fig2b"),
        },
    ))
}

/// Anti-squeezing window checkpoints, in units of `τ`.
pub const WINDOW_FRACTIONS: [f64; 3] = [0.75, 1.0, 1.25];

struct Fig3Cell {
    times: Vec<f64>,
    states: Vec<Result<CovarianceState>>,
    design: Result<Design>,
    window: Vec<Result<CovarianceState>>,
}

fn fig3(cfg: &RunConfig) -> Emission {
    let gs = cfg.axis_values_or("g", &[0.05, 0.1, 0.2, 0.25]);
    let cells: Vec<Fig3Cell> = gs
        .par_iter()
        .map(|&g| {
            let design = retune(&cfg.system, g, g, OMEGA_M + 10.0 * g).and_then(|p| Ok((p, Design::of(&p)?)));
            match design {
                Ok((p, d)) => {
                    let times = cfg.times.resolve(d.tau);
                    let mut all = times.clone();
                    all.extend(WINDOW_FRACTIONS.iter().map(|f| f * d.tau));
                    let mut states = full_trajectory(&p, cfg.errors.as_ref(), &all);
                    let window = states.split_off(times.len());
                    Fig3Cell {
                        times,
                        states,
                        design: Ok(d),
                        window,
                    }
                }
                Err(e) => Fig3Cell {
                    times: vec![],
                    states: vec![],
                    design: Err(e),
                    window: vec![],
                },
            }
        })
        .collect();

    let mut traj = Table::new("fig3_trajectories", &["g", "t", "S", "S_tilde"]);
    let mut summary = Table::new(
        "fig3_summary",
        &["g", "tau", "S_eff_tau", "S_lin_tau", "S_tilde_lin_tau", "epsilon", "epsilon_tilde"],
    );
    let mut window = Table::new("fig3_window", &["g", "tau_fraction", "S_lin", "S_prime_lin"]);
    let mut records = vec![];
    for (&g, c) in gs.iter().zip(&cells) {
        let id = cell_id(&[("g", g)]);
        let d = match &c.design {
            Ok(d) => *d,
            Err(e) => {
                summary.push(vec![g, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
                records.push(CellRecord::from_result::<()>("fig3", id, &Err(clone_err(e))));
                continue;
            }
        };
        for (&t, s) in c.times.iter().zip(&c.states) {
            let l = s.as_ref().map_err(clone_err).and_then(|v| levels(v, d.phi_tilde));
            let mut row = vec![g, t];
            row.extend(flatten(&l, |l| vec![l.s_lin, l.s_tilde_lin], 2));
            traj.push(row);
        }
        let at_tau = c.window[1].as_ref().map_err(clone_err).and_then(|v| levels(v, d.phi_tilde));
        let s_eff = squeezing_level(variance_x(&d.effective, d.tau));
        let summary_row = s_eff.and_then(|s_eff| {
            let l = at_tau?;
            let (e, et) = relative_sl_errors(l.s_lin, l.s_tilde_lin, s_eff)?;
            Ok([s_eff, l.s_lin, l.s_tilde_lin, e, et])
        });
        let mut row = vec![g, d.tau];
        row.extend(flatten(&summary_row, |r| r.to_vec(), 5));
        summary.push(row);
        let y = QuadratureSpec::two_mode_y(d.phi_tilde);
        for (&f, s) in WINDOW_FRACTIONS.iter().zip(&c.window) {
            let r = s.as_ref().map_err(clone_err).and_then(|v| {
                Ok([
                    levels(v, d.phi_tilde)?.s_lin,
                    anti_level(variance_from_cm(v, &y)?)?,
                ])
            });
            let mut row = vec![g, f];
            row.extend(flatten(&r, |r| r.to_vec(), 2));
            window.push(row);
        }
        let mut rec = trajectory_record("fig3", id.clone(), &c.states);
        if rec.status == CellStatus::Ok {
            rec = CellRecord::from_result("fig3", id, &summary_row);
        }
        records.push(rec);
    }
    Emission {
        tables: vec![traj, summary, window],
        cells: records,
    }
}

/// Borrowed error re-raised for a dependent quantity.
fn clone_err(e: &Error) -> Error {
    match e {
        Error::Unstable { max_re } => Error::Unstable { max_re: *max_re },
        other => Error::InvalidParameter(other.to_string()),
    }
}

fn systematic_table(
    name: &str,
    key: &str,
    cells: &[(f64, f64, ErrorCoeffs)],
    base: impl Fn(f64) -> Result<SystemParams> + Sync,
) -> Emission {
    let results: Vec<Result<LevelPair>> = cells
        .par_iter()
        .map(|(outer, _, e)| base(*outer).and_then(|p| systematic_cell(&p, e)))
        .collect();
    let mut table = Table::new(name, &[key, &name_of_inner(name), "S_lin_tau", "S_tilde_lin_tau"]);
    let mut records = vec![];
    for ((outer, inner, _), r) in cells.iter().zip(&results) {
        let mut row = vec![*outer, *inner];
        row.extend(flatten(r, |l| vec![l.s_lin, l.s_tilde_lin], 2));
        table.push(row);
        records.push(CellRecord::from_result(
            name,
            cell_id(&[(key, *outer), (&name_of_inner(name), *inner)]),
            r,
        ));
    }
    Emission {
        tables: vec![table],
        cells: records,
    }
}

fn name_of_inner(table: &str) -> String {
    if table.contains("coupling") { "gamma" } else { "eta" }.to_string()
}

fn fig4(cfg: &RunConfig) -> Emission {
    let gs = cfg.axis_values_or("g", &[0.1, 0.15, 0.2]);
    let gammas = cfg.axis_values_or("gamma", &[0.0, 0.1, 0.2]);
    let etas = cfg.axis_values_or("eta", &[0.0, 5e-4, 1e-3]);
    let dbs = cfg.axis_values_or("delta_b", &[2.0]);
    let grid = |outer: &[f64], inner: &[f64], coupling: bool| -> Vec<(f64, f64, ErrorCoeffs)> {
        outer
            .iter()
            .flat_map(|&o| {
                inner.iter().map(move |&i| {
                    let e = if coupling {
                        ErrorCoeffs { gamma: i, eta: 0.0 }
                    } else {
                        ErrorCoeffs { gamma: 0.0, eta: i }
                    };
                    (o, i, e)
                })
            })
            .collect()
    };
    let sys = cfg.system;
    let by_g = |g: f64| retune(&sys, g, g, OMEGA_M + 10.0 * g);
    let by_db = |db: f64| retune(&sys, sys.g, sys.g, db);
    let mut em = systematic_table("fig4_coupling", "g", &grid(&gs, &gammas, true), by_g);
    em.extend(systematic_table("fig4_detuning", "g", &grid(&gs, &etas, false), by_g));
    em.extend(systematic_table("fig4_coupling_map", "delta_b", &grid(&dbs, &gammas, true), by_db));
    em.extend(systematic_table("fig4_detuning_map", "delta_b", &grid(&dbs, &etas, false), by_db));
    em
}

fn fig5(cfg: &RunConfig) -> Emission {
    let temps = cfg.axis_values_or("temp_k", &[0.0, 0.02, 0.1, 0.2]);
    let ph = cfg.physical_or_default();
    let rows: Vec<(f64, Result<(Vec<f64>, Vec<[f64; 2]>)>)> = temps
        .par_iter()
        .map(|&temp_k| {
            let r = (|| {
                let pt = PhysicalParams { temp_k, ..ph };
                pt.validate()?;
                let (na, nb, nm) = pt.occupations();
                let p = cfg.system.with_occupations(na, nb, nm);
                let d = Design::of(&p)?;
                let ep = d.effective;
                let x = QuadratureSpec::two_mode_x(d.phi_tilde);
                let times = cfg.times.resolve(d.tau);
                let full = full_trajectory(&p, cfg.errors.as_ref(), &times);
                let vals = times
                    .iter()
                    .zip(&full)
                    .map(|(&t, s)| {
                        let f = s
                            .as_ref()
                            .ok()
                            .and_then(|v| variance_from_cm(v, &x).ok())
                            .unwrap_or(f64::NAN);
                        [variance_x(&ep, t), f]
                    })
                    .collect();
                Ok((times, vals))
            })();
            (temp_k, r)
        })
        .collect();
    let mut traj = Table::new("fig5_trajectories", &["temp_k", "t", "dX_eff", "dX_full"]);
    let mut records = vec![];
    for (temp_k, r) in &rows {
        if let Ok((times, vals)) = r {
            for (t, v) in times.iter().zip(vals) {
                traj.push(vec![*temp_k, *t, v[0], v[1]]);
            }
        }
        records.push(CellRecord::from_result("fig5_trajectories", cell_id(&[("temp_k", *temp_k)]), r));
    }
    let mut em = Emission {
        tables: vec![traj],
        cells: records,
    };
    let mut checkpoints = sweep_thermal(cfg, &temps);
    checkpoints.tables[0].name = "fig5_checkpoints".into();
    for c in &mut checkpoints.cells {
        c.table = "fig5_checkpoints".into();
    }
    em.extend(checkpoints);
    em
}

pub(crate) fn extraction_row(e: &GeffExtraction) -> Vec<f64> {
    vec![
        e.g_eff_num,
        e.g_eff_ana,
        e.delta_num,
        e.delta_ana,
        e.sigma.unwrap_or(f64::NAN),
    ]
}

pub(crate) const EXTRACTION_COLUMNS: [&str; 5] = ["g_eff_num", "g_eff_ana", "delta_num", "delta_ana", "sigma"];

fn fig_c1(cfg: &RunConfig) -> Result<Emission> {
    geff_scan(cfg, "figC1")
}

fn fig_c2(cfg: &RunConfig) -> Emission {
    let gs = cfg.axis_values_or("g", &[0.1, 0.15, 0.2]);
    let dbs = cfg.axis_values_or("delta_b", &[2.0, 2.5, 3.0]);
    let cells: Vec<(f64, f64)> = gs.iter().flat_map(|&g| dbs.iter().map(move |&d| (g, d))).collect();
    let results: Vec<Result<GeffExtraction>> =
        cells.par_iter().map(|&(g, db)| sigma_cell(&cfg.system, g, db)).collect();
    let mut cols = vec!["g", "delta_b"];
    cols.extend(EXTRACTION_COLUMNS);
    let mut table = Table::new("figC2", &cols);
    let mut records = vec![];
    for (&(g, db), r) in cells.iter().zip(&results) {
        let mut row = vec![g, db];
        row.extend(flatten(r, |e| extraction_row(&e), 5));
        table.push(row);
        records.push(CellRecord::from_result("figC2", cell_id(&[("g", g), ("delta_b", db)]), r));
    }
    Emission {
        tables: vec![table],
        cells: records,
    }
}
