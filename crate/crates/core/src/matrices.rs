//! Drift and diffusion matrices of the linear quadrature dynamics
//! `dV/dt = AV + VAᵀ + D`.
//!
//! The phases `θ_a`, `θ_b` never appear here: the quadratures are defined in a
//! frame rotated by those phases, so they drop out of every matrix.

use std::fmt::Write as _;
use std::io;
use std::ops::Index;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{SystemParams, OMEGA_M};

/// Quadrature labels in the pinned ordering `(X_a, Y_a, X_b, Y_b, X_m, Y_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrature {
    Xa,
    Ya,
    Xb,
    Yb,
    Xm,
    Ym,
}

impl Quadrature {
    pub const ALL: [Quadrature; 6] = [
        Quadrature::Xa,
        Quadrature::Ya,
        Quadrature::Xb,
        Quadrature::Yb,
        Quadrature::Xm,
        Quadrature::Ym,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Quadrature::Xa => "X_a",
            Quadrature::Ya => "Y_a",
            Quadrature::Xb => "X_b",
            Quadrature::Yb => "Y_b",
            Quadrature::Xm => "X_m",
            Quadrature::Ym => "Y_m",
        }
    }
}

/// Which model a matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// `(X_a, Y_a, X_b, Y_b, X_m, Y_m)`
    Full,
    /// `(X_a, Y_a, X_b, Y_b)`
    Effective,
}

impl Basis {
    pub fn quadratures(self) -> &'static [Quadrature] {
        match self {
            Basis::Full => &Quadrature::ALL,
            Basis::Effective => &Quadrature::ALL[..4],
        }
    }

    pub fn dim(self) -> usize {
        self.quadratures().len()
    }

    pub fn labels(self) -> Vec<&'static str> {
        self.quadratures().iter().map(|q| q.label()).collect()
    }

    pub fn from_dim(n: usize) -> Option<Basis> {
        match n {
            6 => Some(Basis::Full),
            4 => Some(Basis::Effective),
            _ => None,
        }
    }

    pub fn contains(self, q: Quadrature) -> bool {
        q.index() < self.dim()
    }
}

macro_rules! labelled_matrix {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            pub entries: DMatrix<f64>,
            pub basis: Basis,
        }

        impl $name {
            pub fn dim(&self) -> usize {
                self.basis.dim()
            }

            pub fn get(&self, r: Quadrature, c: Quadrature) -> f64 {
                self.entries[(r.index(), c.index())]
            }

            pub fn to_csv(&self) -> String {
                matrix_csv(&self.entries, self.basis)
            }
        }

        impl Index<(Quadrature, Quadrature)> for $name {
            type Output = f64;
            fn index(&self, (r, c): (Quadrature, Quadrature)) -> &f64 {
                &self.entries[(r.index(), c.index())]
            }
        }
    };
}

labelled_matrix!(DriftMatrix);
labelled_matrix!(DiffusionMatrix);

/// Fractional systematic errors on the couplings (`γ`) and detunings (`η`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorCoeffs {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub eta: f64,
}

/// Real generator `M` with `ℒ = iM`.
pub fn script_l_generator(p: &SystemParams) -> DMatrix<f64> {
    let (da, db, g, gg, wm) = (p.delta_a, p.delta_b, p.g, p.big_g, OMEGA_M);
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(6, 6, &[
        0.0,     -da, 0.0,      0.0,    0.0, 0.0,
        da,      0.0, 0.0,      0.0, 2.0 * g, 0.0,
        0.0,     0.0, 0.0,      -db,    0.0, 0.0,
        0.0,     0.0, db,       0.0, 2.0 * gg, 0.0,
        0.0,     0.0, 0.0,      0.0,    0.0, -wm,
        2.0 * g, 0.0, 2.0 * gg, 0.0,     wm, 0.0,
    ]);
    m
}

/// Transition matrix `ℒ` of the Heisenberg equations `d/dt q = -iℒ q`
/// for the closed three-mode system.
pub fn build_script_l(p: &SystemParams) -> DMatrix<Complex64> {
    script_l_generator(p).map(|x| Complex64::new(0.0, x))
}

/// Eigenvalues of a real square matrix from a real Schur decomposition.
///
/// The double-shift QR iteration stalls on spectra made of `±μ` pairs of
/// equal modulus, which is exactly what `ℒ` has near resonance. When it does,
/// the matrix is shifted by a real multiple of the identity and the shift is
/// removed from the result. NaN if every attempt fails.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    let n = m.nrows();
    let max_iter = 1000 * n.max(1);
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for shift in [0.0, 0.37, -0.61, 1.13, -2.3] {
        let s = shift * scale;
        let shifted = m + DMatrix::<f64>::identity(n, n) * s;
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, max_iter) {
            return schur
                .complex_eigenvalues()
                .iter()
                .map(|z| Complex64::new(z.re - s, z.im))
                .collect();
        }
    }
    vec![Complex64::new(f64::NAN, f64::NAN); n]
}

/// Eigenvalues of `ℒ`, i.e. `i` times the eigenvalues of the real generator.
pub fn script_l_eigenvalues(p: &SystemParams) -> Vec<Complex64> {
    real_eigenvalues(&script_l_generator(p))
        .iter()
        .map(|z| Complex64::i() * z)
        .collect()
}

fn damping_diag(p: &SystemParams) -> [f64; 6] {
    [p.kappa_a, p.kappa_a, p.kappa_b, p.kappa_b, p.kappa_m, p.kappa_m]
}

/// `A = iℒ − diag(κ_a, κ_a, κ_b, κ_b, κ_m, κ_m)`.
pub fn build_full_drift(p: &SystemParams) -> DriftMatrix {
    let il = build_script_l(p).map(|z| (Complex64::i() * z).re);
    let mut a = il;
    for (i, k) in damping_diag(p).iter().enumerate() {
        a[(i, i)] -= k;
    }
    DriftMatrix {
        entries: a,
        basis: Basis::Full,
    }
}

/// Drift of the effective two-photon squeezing model.
pub fn build_eff_drift(g_eff: f64, kappa_a: f64, kappa_b: f64) -> DriftMatrix {
    let (ka, kb, ge) = (kappa_a, kappa_b, g_eff);
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        -ka, 0.0, 0.0, -ge,
        0.0, -ka, -ge, 0.0,
        0.0, -ge, -kb, 0.0,
        -ge, 0.0, 0.0, -kb,
    ]);
    DriftMatrix {
        entries: a,
        basis: Basis::Effective,
    }
}

/// Rotating-wave drift of the reservoir-engineering scheme, meant for
/// `Δ_a = ω_m`, `Δ_b = −ω_m`. Detunings are not read.
pub fn build_reservoir_drift(p: &SystemParams) -> DriftMatrix {
    let (ka, kb, km, g, gg) = (p.kappa_a, p.kappa_b, p.kappa_m, p.g, p.big_g);
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(6, 6, &[
        -ka, 0.0, 0.0, 0.0, 0.0,   g,
        0.0, -ka, 0.0, 0.0,  -g, 0.0,
        0.0, 0.0, -kb, 0.0, 0.0, -gg,
        0.0, 0.0, 0.0, -kb, -gg, 0.0,
        0.0,   g, 0.0, -gg, -km, 0.0,
        -g,  0.0, -gg, 0.0, 0.0, -km,
    ]);
    DriftMatrix {
        entries: a,
        basis: Basis::Full,
    }
}

pub fn build_diffusion(p: &SystemParams, basis: Basis) -> DiffusionMatrix {
    let da = p.kappa_a * (2.0 * p.n_a + 1.0);
    let db = p.kappa_b * (2.0 * p.n_b + 1.0);
    let dm = p.kappa_m * (2.0 * p.n_m + 1.0);
    let diag = [da, da, db, db, dm, dm];
    let n = basis.dim();
    DiffusionMatrix {
        entries: DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }),
        basis,
    }
}

/// `g → g(1+γ)`, `G → G(1−γ)`, `Δ_a → Δ_a(1+η)`, `Δ_b → Δ_b(1−η)`.
pub fn apply_systematic_error(p: &SystemParams, e: &ErrorCoeffs) -> SystemParams {
    SystemParams {
        g: p.g * (1.0 + e.gamma),
        big_g: p.big_g * (1.0 - e.gamma),
        delta_a: p.delta_a * (1.0 + e.eta),
        delta_b: p.delta_b * (1.0 - e.eta),
        ..*p
    }
}

/// Row-major CSV with a header of basis labels.
pub fn matrix_csv(m: &DMatrix<f64>, basis: Basis) -> String {
    let mut s = basis.labels().join(",");
    s.push('\n');
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn write_matrix_csv(path: &std::path::Path, m: &DMatrix<f64>, basis: Basis) -> io::Result<()> {
    std::fs::write(path, matrix_csv(m, basis))
}

/// Full-precision float formatting shared by every CSV writer.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig2() -> SystemParams {
        SystemParams::fig2_defaults()
    }

    fn is_diag(m: &DMatrix<f64>) -> bool {
        (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn script_l_is_imaginary() {
        let l = build_script_l(&fig2());
        let il = l.map(|z| Complex64::i() * z);
        assert!(il.iter().all(|z| z.im.abs() < 1e-15));
        assert!(l.iter().all(|z| z.re == 0.0));
    }

    #[test]
    fn script_l_uncoupled_spectrum() {
        let mut p = fig2();
        p.g = 0.0;
        p.big_g = 0.0;
        let ev = script_l_eigenvalues(&p);
        let re = sorted(ev.iter().map(|z| z.re).collect());
        let want = sorted(vec![
            p.delta_a, -p.delta_a, p.delta_b, -p.delta_b, 1.0, -1.0,
        ]);
        for (a, b) in re.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{re:?} vs {want:?}");
        }
        assert!(ev.iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn full_drift_trace_and_undamped_limit() {
        let p = fig2();
        let a = build_full_drift(&p);
        assert_relative_eq!(a.entries.trace(), -4.002e-3, max_relative = 1e-12);

        let mut q = p;
        q.kappa_a = 0.0;
        q.kappa_b = 0.0;
        q.kappa_m = 0.0;
        let il = build_script_l(&q).map(|z| (Complex64::i() * z).re);
        assert_eq!(build_full_drift(&q).entries, il);
    }

    #[test]
    fn full_drift_uncoupled_eigenvalues() {
        let mut p = fig2();
        p.g = 0.0;
        p.big_g = 0.0;
        p.kappa_a = 2e-3;
        let ev = real_eigenvalues(&build_full_drift(&p).entries);
        let mut re = sorted(ev.iter().map(|z| z.re).collect());
        re.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(re.len(), 3);
        let im = sorted(ev.iter().map(|z| z.im.abs()).collect());
        assert_relative_eq!(im[5], p.delta_a.abs(), max_relative = 1e-12);
    }

    #[test]
    fn eff_drift_examples() {
        let a = build_eff_drift(0.0, 1e-3, 2e-3);
        assert_eq!(a.entries, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1e-3, -1e-3, -2e-3, -2e-3])));

        let ge = 0.02 / 3.0;
        let a = build_eff_drift(ge, 1e-3, 1e-3);
        assert_eq!(a.entries, a.entries.transpose());
        let ev = sorted(a.entries.symmetric_eigenvalues().iter().copied().collect());
        let want = [-1e-3 - ge, -1e-3 - ge, -1e-3 + ge, -1e-3 + ge];
        for (x, w) in ev.iter().zip(want) {
            assert!((x - w).abs() < 1e-15);
        }
        assert_eq!(a[(Quadrature::Xa, Quadrature::Yb)], -ge);
        assert_eq!(a[(Quadrature::Ya, Quadrature::Xb)], -ge);
    }

    #[test]
    fn reservoir_drift_rows() {
        let mut p = fig2();
        p.g = 0.1;
        p.big_g = 0.05;
        let a = build_reservoir_drift(&p);
        let row5: Vec<f64> = a.entries.row(4).iter().copied().collect();
        assert_eq!(row5, vec![0.0, 0.1, 0.0, -0.05, -1e-6, 0.0]);

        p.g = 0.0;
        p.big_g = 0.0;
        let a = build_reservoir_drift(&p);
        assert!(is_diag(&a.entries));
        assert_eq!(a.entries.diagonal().as_slice(), &[-1e-3, -1e-3, -1e-3, -1e-3, -1e-6, -1e-6]);
    }

    #[test]
    fn reservoir_hurwitz_iff_g_exceeds_big_g() {
        let mut p = fig2();
        p.g = 0.1;
        for (ratio, stable) in [(0.5, true), (0.9, true), (1.1, false)] {
            p.big_g = ratio * p.g;
            let max_re = real_eigenvalues(&build_reservoir_drift(&p).entries)
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(max_re < 0.0, stable, "ratio {ratio}: {max_re}");
        }
    }

    #[test]
    fn full_and_reservoir_share_damping_only() {
        let mut p = fig2();
        p.delta_a = 1.0;
        p.delta_b = -1.0;
        let full = build_full_drift(&p);
        let res = build_reservoir_drift(&p);
        assert_ne!(full.entries, res.entries);
        assert_eq!(full.entries.diagonal(), res.entries.diagonal());
    }

    #[test]
    fn diffusion_examples() {
        let mut p = fig2();
        p.n_m = 0.0;
        let d = build_diffusion(&p, Basis::Full);
        assert_eq!(d.entries.diagonal().as_slice(), &[1e-3, 1e-3, 1e-3, 1e-3, 1e-6, 1e-6]);
        p.n_m = 10.0;
        let d = build_diffusion(&p, Basis::Full);
        assert_relative_eq!(d[(Quadrature::Xm, Quadrature::Xm)], 21e-6, max_relative = 1e-15);
        let d = build_diffusion(&p, Basis::Effective);
        assert_eq!(d.dim(), 4);
        assert!(is_diag(&d.entries));
    }

    #[test]
    fn systematic_error_examples() {
        let p = fig2();
        assert_eq!(apply_systematic_error(&p, &ErrorCoeffs::default()), p);
        let q = apply_systematic_error(&p, &ErrorCoeffs { gamma: 0.1, eta: 0.0 });
        assert_relative_eq!(q.g, 0.11, max_relative = 1e-15);
        assert_relative_eq!(q.big_g, 0.09, max_relative = 1e-15);
        let q = apply_systematic_error(&p, &ErrorCoeffs { gamma: 0.0, eta: 1e-3 });
        assert_eq!(q.delta_a, p.delta_a * 1.001);
        assert_eq!(q.delta_b, p.delta_b * 0.999);
        assert_eq!(q.kappa_m, p.kappa_m);
    }

    #[test]
    fn csv_layout() {
        let d = build_diffusion(&fig2(), Basis::Effective);
        let csv = d.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "X_a,Y_a,X_b,Y_b");
        assert_eq!(lines.len(), 5);
        let first: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, 1e-3);
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }
}
