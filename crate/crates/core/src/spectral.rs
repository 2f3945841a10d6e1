//! Spectrum of the transition matrix `ℒ` along a `Δ_a` scan: branch
//! tracking, level attraction and numeric extraction of the effective
//! coupling.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrices::{fmt_f64, script_l_eigenvalues};
use crate::model::{effective_coupling, SystemParams, OMEGA_M};

const TIE_TOL: f64 = 1e-12;
const MAX_REFINE_DEPTH: u32 = 12;
const GOLDEN_TOL: f64 = 1e-10;
const SPLIT_FLOOR: f64 = 1e-12;
/// Relative band around `±ω_m` that marks a branch as mechanical.
const MECHANICAL_BAND: f64 = 0.05;
/// Default half-width of an extraction grid, in units of `|δ|`.
pub const GRID_HALF_WIDTH: f64 = 6.0;
pub const GRID_POINTS: usize = 241;

/// One continuity-matched eigenvalue branch of `ℒ(Δ_a)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenBranch {
    pub scan_values: Vec<f64>,
    pub eigenvalues: Vec<Complex64>,
}

impl EigenBranch {
    pub fn max_abs_im(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Real part stays within 5% of `±ω_m` over the whole scan.
    pub fn is_mechanical(&self) -> bool {
        [OMEGA_M, -OMEGA_M].iter().any(|&w| {
            self.eigenvalues
                .iter()
                .all(|z| (z.re - w).abs() <= MECHANICAL_BAND * OMEGA_M)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeffExtraction {
    pub g_eff_num: f64,
    pub delta_num: f64,
    /// `None` when the analytic coupling vanishes.
    pub sigma: Option<f64>,
    pub g_eff_ana: f64,
    pub delta_ana: f64,
}

fn sorted_eigenvalues(p: &SystemParams, delta_a: f64) -> Vec<Complex64> {
    let mut ev = script_l_eigenvalues(&SystemParams { delta_a, ..*p });
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
    ev
}

enum Matched {
    Done(Vec<Complex64>),
    Ambiguous,
}

/// Greedy nearest-neighbour assignment of `cands` to the predicted branch
/// values.
fn assign(prev: &[Complex64], pred: &[Complex64], cands: &[Complex64]) -> Matched {
    let n = pred.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (b, p) in pred.iter().enumerate() {
        for (c, z) in cands.iter().enumerate() {
            pairs.push(((p - z).norm(), b, c));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![Complex64::new(f64::NAN, 0.0); n];
    let mut used_b = vec![false; n];
    let mut used_c = vec![false; n];
    for k in 0..pairs.len() {
        let (d, b, c) = pairs[k];
        if used_b[b] || used_c[c] {
            continue;
        }
        let duplicate = |c: usize, used_c: &[bool]| {
            (0..n).any(|c2| c2 != c && !used_c[c2] && (cands[c2] - cands[c]).norm() < TIE_TOL)
        };
        // a rival pair sharing the branch or the candidate, equally close
        let rival = pairs[k + 1..]
            .iter()
            .take_while(|q| q.0 - d < TIE_TOL)
            .filter(|q| !used_b[q.1] && !used_c[q.2] && (q.1 == b) != (q.2 == c))
            .find(|q| {
                if q.1 == b {
                    (cands[q.2] - cands[c]).norm() >= TIE_TOL
                } else {
                    !duplicate(c, &used_c)
                }
            })
            .copied();
        let picks = match rival {
            None => vec![(b, c)],
            Some((_, b2, c2)) => {
                let (b2, c2) = if b2 == b {
                    let other = (0..n)
                        .filter(|&x| x != b && !used_b[x])
                        .min_by(|&x, &y| (pred[x] - cands[c2]).norm().total_cmp(&(pred[y] - cands[c2]).norm()));
                    match other {
                        Some(o) => (o, c2),
                        None => return Matched::Ambiguous,
                    }
                } else {
                    let other = (0..n)
                        .filter(|&x| x != c && !used_c[x])
                        .min_by(|&x, &y| (pred[b2] - cands[x]).norm().total_cmp(&(pred[b2] - cands[y]).norm()));
                    match other {
                        Some(o) => (b2, o),
                        None => return Matched::Ambiguous,
                    }
                };
                match exceptional_tie(prev, cands, (b, c), (b2, c2)) {
                    Some((x, y)) => vec![x, y],
                    None => return Matched::Ambiguous,
                }
            }
        };
        for (bb, cc) in picks {
            used_b[bb] = true;
            used_c[cc] = true;
            out[bb] = cands[cc];
        }
    }
    Matched::Done(out)
}

fn conjugate_like(z1: Complex64, z2: Complex64) -> bool {
    let scale = z1.norm().max(z2.norm()).max(1.0);
    z1.im != z2.im && (z1.re - z2.re).abs() < 1e-8 * scale && (z1.im + z2.im).abs() < 1e-8 * scale
}

/// Resolves the tie of two branches meeting a conjugate-like pair at an
/// exceptional point. Entering the attraction region the branch with the
/// lower real part takes `+Im`; leaving it the `+Im` branch takes the higher
/// real part.
fn exceptional_tie(
    prev: &[Complex64],
    cands: &[Complex64],
    (b1, c1): (usize, usize),
    (b2, c2): (usize, usize),
) -> Option<((usize, usize), (usize, usize))> {
    let (z1, z2) = (cands[c1], cands[c2]);
    let (p1, p2) = (prev[b1], prev[b2]);
    if conjugate_like(z1, z2) && !conjugate_like(p1, p2) {
        let (lo, hi) = if p1.re <= p2.re { (b1, b2) } else { (b2, b1) };
        let (up, down) = if z1.im > z2.im { (c1, c2) } else { (c2, c1) };
        Some(((lo, up), (hi, down)))
    } else if conjugate_like(p1, p2) && !conjugate_like(z1, z2) {
        let (up, down) = if p1.im > p2.im { (b1, b2) } else { (b2, b1) };
        let (hi, lo) = if z1.re >= z2.re { (c1, c2) } else { (c2, c1) };
        Some(((up, hi), (down, lo)))
    } else {
        None
    }
}

fn predict(v2: &[Complex64], v1: &[Complex64], x2: f64, x1: f64, x: f64) -> Vec<Complex64> {
    let r = (x - x1) / (x1 - x2);
    v1.iter().zip(v2).map(|(a, b)| a + (a - b) * r).collect()
}

/// Branch values at `x`, continuing from the two previous points. Halves the
/// step when the nearest-neighbour assignment is ambiguous.
fn track_step(
    p: &SystemParams,
    hist: (&[Complex64], &[Complex64]),
    xs: (f64, f64),
    x: f64,
    depth: u32,
) -> Result<Vec<Complex64>> {
    let (v2, v1) = hist;
    let (x2, x1) = xs;
    let pred = predict(v2, v1, x2, x1, x);
    let cands = sorted_eigenvalues(p, x);
    match assign(v1, &pred, &cands) {
        Matched::Done(v) => Ok(v),
        Matched::Ambiguous if depth < MAX_REFINE_DEPTH => {
            let mid = 0.5 * (x1 + x);
            let vm = track_step(p, hist, xs, mid, depth + 1)?;
            track_step(p, (v1, &vm), (x1, mid), x, depth + 1)
        }
        Matched::Ambiguous => Err(Error::AmbiguousTracking { delta_a: x }),
    }
}

/// Tracks the six eigenvalues of `ℒ` across an ascending grid of `Δ_a`.
pub fn eigen_scan(p: &SystemParams, grid: &[f64]) -> Result<Vec<EigenBranch>> {
    if grid.len() < 3 {
        return Err(Error::InvalidParameter("scan grid needs at least 3 points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("scan grid must be strictly ascending".into()));
    }
    let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(grid.len());
    rows.push(sorted_eigenvalues(p, grid[0]));
    let first = rows[0].clone();
    let second = track_step(p, (&first, &first), (grid[0] - (grid[1] - grid[0]), grid[0]), grid[1], 0)?;
    rows.push(second);
    for k in 2..grid.len() {
        let next = track_step(p, (&rows[k - 2], &rows[k - 1]), (grid[k - 2], grid[k - 1]), grid[k], 0)?;
        rows.push(next);
    }
    Ok((0..6)
        .map(|b| EigenBranch {
            scan_values: grid.to_vec(),
            eigenvalues: rows.iter().map(|r| r[b]).collect(),
        })
        .collect())
}

/// The two non-mechanical branches with the largest `|Im λ|`.
pub fn attracted_pair(branches: &[EigenBranch]) -> Option<(usize, usize)> {
    let mut cands: Vec<(usize, f64)> = branches
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.is_mechanical())
        .map(|(i, b)| (i, b.max_abs_im()))
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1));
    match cands.as_slice() {
        [a, b, ..] if a.1 > SPLIT_FLOOR => Some((a.0.min(b.0), a.0.max(b.0))),
        _ => None,
    }
}

/// Largest `|Im λ|` among the non-mechanical eigenvalues of `ℒ(Δ_a)`.
fn splitting(p: &SystemParams, delta_a: f64) -> f64 {
    script_l_eigenvalues(&SystemParams { delta_a, ..*p })
        .iter()
        .filter(|z| (z.re.abs() - OMEGA_M).abs() > MECHANICAL_BAND * OMEGA_M)
        .map(|z| z.im.abs())
        .fold(0.0, f64::max)
}

/// Maximizes a unimodal `f` on `[a, b]` to an interval width of `tol`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Default extraction grid: `GRID_POINTS` points over
/// `−Δ_b ± GRID_HALF_WIDTH·|δ|`.
pub fn default_grid(p: &SystemParams) -> Result<Vec<f64>> {
    let (_, delta) = effective_coupling(p)?;
    let half = GRID_HALF_WIDTH * delta.abs().max(1e-9);
    let c = -p.delta_b;
    Ok((0..GRID_POINTS)
        .map(|i| c - half + 2.0 * half * i as f64 / (GRID_POINTS - 1) as f64)
        .collect())
}

/// Numeric `|g_eff|` as the peak imaginary splitting of `ℒ` over the grid,
/// refined by golden-section search; `δ_num` is the peak position plus `Δ_b`.
pub fn extract_geff_numeric(p: &SystemParams, grid: &[f64]) -> Result<GeffExtraction> {
    let (g_eff_ana, delta_ana) = effective_coupling(p)?;
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("grid must be ascending with ≥ 3 points".into()));
    }
    let margin = 5.0 * delta_ana.abs();
    let centre = -p.delta_b;
    if grid[0] > centre - margin || grid[grid.len() - 1] < centre + margin {
        return Err(Error::InvalidParameter(format!(
            "grid [{}, {}] does not bracket Δ_a = {centre} with margin {margin}",
            grid[0],
            grid[grid.len() - 1]
        )));
    }
    let vals: Vec<f64> = grid.iter().map(|&x| splitting(p, x)).collect();
    let (imax, &vmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if vmax < SPLIT_FLOOR {
        return Err(Error::NoSplittingFound);
    }
    let lo = grid[imax.saturating_sub(1)];
    let hi = grid[(imax + 1).min(grid.len() - 1)];
    let (x, g_num) = golden_section_max(|x| splitting(p, x), lo, hi, GOLDEN_TOL);
    let (x, g_num) = if g_num >= vmax { (x, g_num) } else { (grid[imax], vmax) };
    let sigma = (g_eff_ana != 0.0).then(|| (g_num - g_eff_ana.abs()).abs() / g_eff_ana.abs());
    Ok(GeffExtraction {
        g_eff_num: g_num,
        delta_num: x + p.delta_b,
        sigma,
        g_eff_ana,
        delta_ana,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaMap {
    pub g: Vec<f64>,
    pub delta_b: Vec<f64>,
    /// `sigma[i][j]` at `(g[i], delta_b[j])`; `None` for failed cells.
    pub sigma: Vec<Vec<Option<f64>>>,
}

impl SigmaMap {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("g,delta_b,sigma\n");
        for (i, g) in self.g.iter().enumerate() {
            for (j, db) in self.delta_b.iter().enumerate() {
                let v = self.sigma[i][j].unwrap_or(f64::NAN);
                s.push_str(&format!("{},{},{}\n", fmt_f64(*g), fmt_f64(*db), fmt_f64(v)));
            }
        }
        s
    }
}

/// `σ` for a single `g = G` cell on the default grid.
pub fn sigma_cell(base: &SystemParams, g: f64, delta_b: f64) -> Result<GeffExtraction> {
    if !(delta_b > OMEGA_M + 2.0 * g) {
        return Err(Error::InvalidParameter(format!(
            "Δ_b = {delta_b} outside the scan-safe region Δ_b > ω_m + 2g"
        )));
    }
    let mut p = SystemParams {
        g,
        big_g: g,
        delta_b,
        ..*base
    };
    let (_, delta) = effective_coupling(&p)?;
    p.delta_a = -delta_b + delta;
    extract_geff_numeric(&p, &default_grid(&p)?)
}

/// Relative error `σ` over the Cartesian grid `g × Δ_b`, one cell per task.
pub fn sigma_map(base: &SystemParams, g_values: &[f64], delta_b_values: &[f64]) -> SigmaMap {
    let cells: Vec<(usize, usize)> = (0..g_values.len())
        .flat_map(|i| (0..delta_b_values.len()).map(move |j| (i, j)))
        .collect();
    let vals: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(i, j)| {
            sigma_cell(base, g_values[i], delta_b_values[j])
                .ok()
                .and_then(|e| e.sigma)
        })
        .collect();
    let nb = delta_b_values.len();
    SigmaMap {
        g: g_values.to_vec(),
        delta_b: delta_b_values.to_vec(),
        sigma: (0..g_values.len())
            .map(|i| vals[i * nb..(i + 1) * nb].to_vec())
            .collect(),
    }
}

/// Scan CSV: `delta_a, branch_id, re_lambda, im_lambda`.
pub fn scan_csv(branches: &[EigenBranch]) -> String {
    let mut s = String::from("delta_a,branch_id,re_lambda,im_lambda\n");
    if let Some(first) = branches.first() {
        for (k, x) in first.scan_values.iter().enumerate() {
            for (b, br) in branches.iter().enumerate() {
                let z = br.eigenvalues[k];
                s.push_str(&format!("{},{b},{},{}\n", fmt_f64(*x), fmt_f64(z.re), fmt_f64(z.im)));
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scan_params(delta_b: f64) -> SystemParams {
        SystemParams::resonant(0.1, 0.1, delta_b, 1e-3, 1e-3, 1e-6).unwrap()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn uncoupled_branches_are_straight() {
        let mut p = scan_params(3.0);
        p.g = 0.0;
        p.big_g = 0.0;
        let grid = linspace(-3.5, -2.5, 101);
        let br = eigen_scan(&p, &grid).unwrap();
        assert_eq!(br.len(), 6);
        for b in &br {
            assert!(b.max_abs_im() < 1e-12);
            let slope = (b.eigenvalues[100].re - b.eigenvalues[0].re) / 1.0;
            for (k, z) in b.eigenvalues.iter().enumerate() {
                let lin = b.eigenvalues[0].re + slope * (grid[k] - grid[0]);
                assert!((z.re - lin).abs() < 1e-9, "branch not straight");
            }
        }
    }

    #[test]
    fn fig_c1_structure() {
        let p = scan_params(3.0);
        let grid = linspace(-3.05, -2.95, 401);
        let br = eigen_scan(&p, &grid).unwrap();
        let mech: Vec<&EigenBranch> = br.iter().filter(|b| b.is_mechanical()).collect();
        assert_eq!(mech.len(), 2);
        for b in &mech {
            assert!(b.max_abs_im() < 1e-10);
        }
        // one attracted pair, plus its mirror image under λ → −λ̄
        let split: Vec<&EigenBranch> = br
            .iter()
            .filter(|b| !b.is_mechanical() && b.max_abs_im() > 1e-6)
            .collect();
        assert_eq!(split.len(), 4);
        let k = (0..grid.len())
            .max_by(|&i, &j| split[0].eigenvalues[i].im.abs().total_cmp(&split[0].eigenvalues[j].im.abs()))
            .unwrap();
        let mut re: Vec<f64> = split.iter().map(|b| b.eigenvalues[k].re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] - re[1]).abs() < 1e-9 && (re[2] - re[3]).abs() < 1e-9);
        assert!((re[0] + re[3]).abs() < 1e-9);
        let (i, j) = attracted_pair(&br).unwrap();
        assert!(!br[i].is_mechanical() && !br[j].is_mechanical());
    }

    #[test]
    fn spectrum_symmetries() {
        let p = scan_params(2.0);
        for da in [-2.1, -2.0133, -1.9] {
            let ev = script_l_eigenvalues(&SystemParams { delta_a: da, ..p });
            let sum: Complex64 = ev.iter().sum();
            assert!(sum.norm() < 1e-12);
            for z in &ev {
                let mirror = Complex64::new(-z.re, z.im);
                assert!(ev.iter().any(|w| (w - mirror).norm() < 1e-9));
            }
        }
    }

    #[test]
    fn grid_validation() {
        let p = scan_params(3.0);
        assert!(eigen_scan(&p, &[-3.0, -2.9]).is_err());
        assert!(eigen_scan(&p, &[-3.0, -3.1, -2.9]).is_err());
        assert!(extract_geff_numeric(&p, &linspace(-3.001, -2.999, 11)).is_err());
    }

    #[test]
    fn extraction_delta_b_3() {
        let p = scan_params(3.0);
        let e = extract_geff_numeric(&p, &default_grid(&p).unwrap()).unwrap();
        assert_relative_eq!(e.g_eff_num, 2.5e-3, max_relative = 0.01);
        assert!(e.sigma.unwrap() <= 0.01);
        assert!(e.delta_num < 0.0 && e.delta_ana < 0.0);
    }

    #[test]
    fn extraction_needs_coupling() {
        let mut p = scan_params(3.0);
        p.g = 0.0;
        let grid = linspace(-3.1, -2.9, 41);
        assert!(matches!(extract_geff_numeric(&p, &grid), Err(Error::NoSplittingFound)));
    }

    #[test]
    fn extraction_exchange_symmetric() {
        let mut p = scan_params(2.5);
        p.g = 0.12;
        p.big_g = 0.08;
        let grid = default_grid(&p).unwrap();
        let a = extract_geff_numeric(&p, &grid).unwrap();
        std::mem::swap(&mut p.g, &mut p.big_g);
        let b = extract_geff_numeric(&p, &grid).unwrap();
        // symmetric only to the order of the effective theory
        let bound = a.sigma.unwrap().max(b.sigma.unwrap()) * a.g_eff_ana;
        assert!((a.g_eff_num - b.g_eff_num).abs() <= bound);
        assert!((a.g_eff_num - b.g_eff_num).abs() > 1e-6);
    }

    #[test]
    fn single_cell_map() {
        let base = scan_params(3.0);
        let m = sigma_map(&base, &[0.15], &[1.0 + 9.0 * 0.15]);
        let e = sigma_cell(&base, 0.15, 1.0 + 9.0 * 0.15).unwrap();
        assert_eq!(m.sigma, vec![vec![e.sigma]]);
        assert!(e.sigma.unwrap() <= 0.015);
        assert!(e.g_eff_num >= 0.0095);

        let m = sigma_map(&base, &[0.2], &[1.2]);
        assert_eq!(m.sigma, vec![vec![None]]);
        assert!(m.to_csv().ends_with(",nan\n"));
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, f) = golden_section_max(|x| -(x - 0.3).powi(2) + 2.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert_relative_eq!(f, 2.0);
    }
}
