//! The engine instantiated for Sp(2n,R) acting on the Siegel space: Maslov-type
//! quasimorphisms, the rotation-number route, the U(n) restriction and the calibration ledger.

use std::fmt::Write as _;

use rand::Rng;

use crate::engine::{self, GroupPath, HamiltonianAction, Homogenized, OrbitSample, Quad};
use crate::error::{QmError, Result};
use crate::expr::Expr;
use crate::quadrature::composite;
use crate::sampling::random_symmetric;
use crate::siegel::{FormKind, SiegelSpace};
use crate::symplectic::{
    angle_step, det_complex_unchecked, j0, polar_angle_2x2, polar_unitary, transvection, unitary_residual, varangle,
    AngleTrack, CompatibleJ, Mat, SpAlgebra, SympMatrix, C64,
};

/// Sp(2n,R) acting on (S_n, sigma_kind) by conjugation, with moment map kind * (-1/2 tr(X J)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpAction {
    pub n: usize,
    pub kind: FormKind,
}

impl SpAction {
    pub fn new(n: usize, kind: FormKind) -> Self {
        SpAction { n, kind }
    }

    pub fn space(&self) -> SiegelSpace {
        SiegelSpace::new(self.n, self.kind)
    }
}

impl HamiltonianAction<SiegelSpace> for SpAction {
    type Path = GroupPath;
    type Element = SympMatrix;

    fn orbit_samples(
        &self,
        path: &GroupPath,
        x: &CompatibleJ,
        t_order: usize,
        sink: &mut dyn FnMut(OrbitSample<CompatibleJ>) -> Result<()>,
    ) -> Result<()> {
        let space = self.space();
        let scale = self.kind.scale(self.n);
        for (i, c) in path.times.windows(2).enumerate() {
            let xi = &path.generators[i];
            for (t, w) in composite(c, t_order) {
                let g = path.eval_in_cell(i, t);
                let p = g.act_j(x);
                let dj = &xi.m * &p.m - &p.m * &xi.m;
                let velocity = space.siegel_tangent(&p, &dj);
                let moment = scale * crate::siegel::moment_map_sp(&p, xi);
                sink(OrbitSample { weight: w, point: p, velocity, moment })?;
            }
        }
        Ok(())
    }

    fn act_endpoint(&self, path: &GroupPath, x: &CompatibleJ) -> Result<CompatibleJ> {
        Ok(path.end().act_j(x))
    }

    fn loop_residual(&self, path: &GroupPath) -> f64 {
        (&path.end().m - Mat::identity(2 * self.n, 2 * self.n)).norm()
    }

    fn concat(&self, p1: &GroupPath, p2: &GroupPath) -> GroupPath {
        p1.concat(p2)
    }

    fn power(&self, p: &GroupPath, k: usize) -> GroupPath {
        p.power(k)
    }

    fn inverse(&self, p: &GroupPath) -> GroupPath {
        p.inverse()
    }

    fn act(&self, h: &SympMatrix, x: &CompatibleJ) -> CompatibleJ {
        h.act_j(x)
    }

    fn inverse_element(&self, h: &SympMatrix) -> SympMatrix {
        h.inverse()
    }

    fn conjugate(&self, p: &GroupPath, h: &SympMatrix) -> GroupPath {
        p.conjugate(h)
    }
}

/// Generator description of an Sp path.
#[derive(Debug, Clone, PartialEq)]
pub enum SpGenerator {
    /// One sp(2n) element per uniform cell.
    Piecewise(Vec<Mat>),
    /// Row-major 2n x 2n matrix of expressions in t, sampled at cell midpoints.
    Expression(Vec<String>),
    /// Explicit samples g_i at times t_i, with g_0 = Id.
    Samples { times: Vec<f64>, elements: Vec<Mat> },
}

/// Description of a path in Sp(2n,R) that compiles to a [`GroupPath`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpPathSpec {
    pub n: usize,
    pub generator: SpGenerator,
    /// Number of cells for expression generators.
    pub m: usize,
}

impl SpPathSpec {
    pub fn compile(&self) -> Result<GroupPath> {
        let dim = 2 * self.n;
        match &self.generator {
            SpGenerator::Piecewise(ms) => {
                let gens = ms
                    .iter()
                    .map(|m| {
                        if m.shape() != (dim, dim) {
                            return Err(QmError::Invalid(format!("generator must be {dim}x{dim}")));
                        }
                        SpAlgebra::new(m.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                GroupPath::uniform(gens)
            }
            SpGenerator::Expression(entries) => {
                if entries.len() != dim * dim {
                    return Err(QmError::Invalid(format!("expected {} expressions", dim * dim)));
                }
                if self.m == 0 {
                    return Err(QmError::Invalid("sample count m must be positive".into()));
                }
                let exprs = entries.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
                let gens = (0..self.m)
                    .map(|i| {
                        let t = (i as f64 + 0.5) / self.m as f64;
                        let m = Mat::from_row_iterator(dim, dim, exprs.iter().map(|e| e.eval(t, 0.0, 0.0)));
                        SpAlgebra::new(m)
                    })
                    .collect::<Result<Vec<_>>>()?;
                GroupPath::uniform(gens)
            }
            SpGenerator::Samples { times, elements } => {
                let els = elements.iter().map(|m| SympMatrix::new(m.clone())).collect::<Result<Vec<_>>>()?;
                GroupPath::from_samples(times.clone(), els)
            }
        }
    }
}

/// The rotation loop t -> exp(2 pi m t J0).
pub fn rotation_loop(n: usize, winding: i64, cells: usize) -> GroupPath {
    let x = SpAlgebra::from_unchecked(j0(n) * (std::f64::consts::TAU * winding as f64));
    GroupPath::uniform(vec![x; cells.max(1)]).expect("valid rotation loop")
}

/// Spectral radius of a real matrix.
pub fn spectral_radius(m: &Mat) -> f64 {
    m.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random piecewise path whose endpoint has spectral radius at most `max_radius`,
/// so that its powers stay bounded. Generators are J0 (c I + S) with |c| <= rotation, |S| <= wiggle.
pub fn random_path<R: Rng + ?Sized>(rng: &mut R, n: usize, cells: usize, rotation: f64, wiggle: f64, max_radius: f64) -> GroupPath {
    loop {
        let c = rng.random_range(-rotation..=rotation);
        let gens = (0..cells)
            .map(|_| {
                let s = random_symmetric(rng, 2 * n, wiggle) + Mat::identity(2 * n, 2 * n) * c;
                SpAlgebra::from_symmetric(&s)
            })
            .collect();
        let p = GroupPath::uniform(gens).expect("valid grid");
        if spectral_radius(&p.end().m) <= max_radius {
            return p;
        }
    }
}

/// Angle of det_C(U)^power for the unitary polar factor U of g.
fn polar_phase(g: &SympMatrix, power: i32) -> Result<C64> {
    if g.n() == 1 {
        let m = &g.m;
        let th = polar_angle_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        return Ok(C64::from_polar(1.0, power as f64 * th));
    }
    let (u, _) = polar_unitary(g)?;
    let d = det_complex_unchecked(&u.m);
    Ok((d / d.norm()).powi(power))
}

/// Samples f along each cell, bisecting until consecutive samples differ by at most 1/8 turn.
fn adaptive_track(path: &GroupPath, f: &dyn Fn(&SympMatrix) -> Result<C64>) -> Result<AngleTrack> {
    let mut out = vec![];
    for i in 0..path.cells() {
        let (a, b) = (path.times[i], path.times[i + 1]);
        let base = 8;
        let mut prev_t = a;
        let mut prev = f(&path.eval_in_cell(i, a))?;
        if out.is_empty() {
            out.push(prev);
        }
        for k in 1..=base {
            let t = a + (b - a) * k as f64 / base as f64;
            refine(path, i, f, prev_t, prev, t, 0, &mut out)?;
            prev_t = t;
            prev = *out.last().expect("pushed");
        }
    }
    Ok(AngleTrack::new(out))
}

#[allow(clippy::too_many_arguments)]
fn refine(
    path: &GroupPath,
    cell: usize,
    f: &dyn Fn(&SympMatrix) -> Result<C64>,
    ta: f64,
    wa: C64,
    tb: f64,
    depth: usize,
    out: &mut Vec<C64>,
) -> Result<()> {
    let wb = f(&path.eval_in_cell(cell, tb))?;
    if angle_step(wa, wb).abs() <= 0.125 || depth > 40 {
        out.push(wb);
        return Ok(());
    }
    let tm = 0.5 * (ta + tb);
    refine(path, cell, f, ta, wa, tm, depth + 1, out)?;
    let wm = *out.last().expect("pushed");
    refine(path, cell, f, tm, wm, tb, depth + 1, out)
}

/// Winding in turns of det_C(U_t)^2 for the unitary polar factors U_t of the path.
pub fn maslov_turns(path: &GroupPath) -> Result<f64> {
    varangle(&adaptive_track(path, &|g| polar_phase(g, 2))?)
}

/// nu_x by the rotation-number route: with x = h J0 h^{-1} and g'_t = h^{-1} g_t h,
/// k_t = P_t^{-1} g'_t is the transvection-corrected stabilizer element and
/// nu_x = -2 pi kind * varangle(det_C(k_t)).
pub fn rotation_number_nu(path: &GroupPath, x: &CompatibleJ, kind: FormKind) -> Result<f64> {
    let h = transvection(x);
    let moved = path.conjugate(&h.inverse());
    let w = varangle(&adaptive_track(&moved, &|g| polar_phase(g, 1))?)?;
    Ok(-std::f64::consts::TAU * kind.scale(path.n()) * w)
}

/// Winding numbers of det_C on a loop in U(n) and the two reference values.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GwReport {
    /// varangle of det_C(k_t) in turns.
    pub winding: f64,
    /// -lift of v = det_C^2.
    pub reference_det2: f64,
    /// -lift of v = det_C^{-(n+1)}.
    pub reference_det_neg: f64,
}

pub fn guichardet_wigner_restriction(lp: &GroupPath) -> Result<GwReport> {
    let n = lp.n();
    let r = (&lp.end().m - Mat::identity(2 * n, 2 * n)).norm();
    if r > 1e-8 {
        return Err(QmError::NotALoop(r));
    }
    for i in 0..lp.cells() {
        for k in 0..=4 {
            let t = lp.times[i] + (lp.times[i + 1] - lp.times[i]) * k as f64 / 4.0;
            let res = unitary_residual(&lp.eval_in_cell(i, t).m);
            if res > 1e-9 {
                return Err(QmError::NotUnitary(res));
            }
        }
    }
    let w = varangle(&adaptive_track(lp, &|g| Ok(det_complex_unchecked(&g.m)))?)?;
    Ok(GwReport { winding: w, reference_det2: -2.0 * w, reference_det_neg: (n as f64 + 1.0) * w })
}

/// Homogenized Maslov turns on the doubling schedule up to k_max.
pub fn maslov_homogenized(path: &GroupPath, k_max: usize) -> Result<Homogenized> {
    let mut vals = vec![];
    for k in engine::schedule(k_max) {
        vals.push((k, maslov_turns(&path.power(k))?, 0.0));
    }
    Ok(engine::homogenize_values(vals))
}

/// One path of a calibration suite.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: String,
    pub path: GroupPath,
}

/// One fitted observation in the ledger.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LedgerRecord {
    pub name: String,
    pub kind: FormKind,
    pub nu: f64,
    pub nu_width: f64,
    pub turns: f64,
    pub turns_width: f64,
}

/// Measured proportionality constants between homogenized nu and Maslov turns.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CalibrationLedger {
    pub n: usize,
    pub kappa_trace: f64,
    pub kappa_siegel: f64,
    pub kappa_bergman: f64,
    pub k_max: usize,
    pub records: Vec<LedgerRecord>,
}

impl CalibrationLedger {
    pub fn kappa(&self, kind: FormKind) -> f64 {
        match kind {
            FormKind::Trace => self.kappa_trace,
            FormKind::Siegel => self.kappa_siegel,
            FormKind::Bergman => self.kappa_bergman,
        }
    }

    /// TOML-compatible text form.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# calibration ledger: homogenized nu = kappa * homogenized Maslov turns\n");
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "k_max = {}", self.k_max);
        let _ = writeln!(s, "kappa_trace = {:e}", self.kappa_trace);
        let _ = writeln!(s, "kappa_siegel = {:e}", self.kappa_siegel);
        let _ = writeln!(s, "kappa_bergman = {:e}", self.kappa_bergman);
        for r in &self.records {
            let _ = write!(
                s,
                "\n[[records]]\nname = \"{}\"\nkind = \"{}\"\nnu = {:e}\nnu_width = {:e}\nturns = {:e}\nturns_width = {:e}\n",
                r.name,
                r.kind.name(),
                r.nu,
                r.nu_width,
                r.turns,
                r.turns_width
            );
        }
        s
    }

    /// Reads the scalar header of `to_text` output; records are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let get = |key: &str| -> Result<f64> {
            text.lines()
                .take_while(|l| !l.starts_with('['))
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .and_then(|(_, v)| v.trim().parse::<f64>().ok())
                .ok_or_else(|| QmError::Invalid(format!("ledger is missing '{key}'")))
        };
        Ok(CalibrationLedger {
            n: get("n")? as usize,
            k_max: get("k_max")? as usize,
            kappa_trace: get("kappa_trace")?,
            kappa_siegel: get("kappa_siegel")?,
            kappa_bergman: get("kappa_bergman")?,
            records: vec![],
        })
    }
}

/// Fits kappa_kind = homogenized nu / homogenized Maslov turns over the suite at x = J0
/// and checks that the ratio is constant within interval widths.
pub fn calibrate(n: usize, suite: &[SuiteEntry], k_max: usize, q: Quad) -> Result<CalibrationLedger> {
    let x = CompatibleJ::standard(n);
    let mut turns = vec![];
    for e in suite {
        if e.path.n() != n {
            return Err(QmError::Invalid(format!("suite entry '{}' has wrong dimension", e.name)));
        }
        turns.push(maslov_homogenized(&e.path, k_max)?);
    }
    let mut records = vec![];
    let mut kappas = vec![];
    for kind in FormKind::all() {
        let act = SpAction::new(n, kind);
        let space = act.space();
        let mut nus = vec![];
        for e in suite {
            nus.push(engine::homogenize(&space, &act, &e.path, &x, k_max, q)?);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (nu, tu) in nus.iter().zip(&turns) {
            num += nu.estimate * tu.estimate;
            den += tu.estimate * tu.estimate;
        }
        if den == 0.0 {
            return Err(QmError::Invalid("calibration suite has no winding".into()));
        }
        let kappa = num / den;
        for ((e, nu), tu) in suite.iter().zip(&nus).zip(&turns) {
            let slack = nu.half_width + kappa.abs() * tu.half_width + 1e-6;
            let resid = (nu.estimate - kappa * tu.estimate).abs();
            if resid > slack {
                return Err(QmError::NonConstantRatio(format!(
                    "{} ({}): nu = {:.6}, kappa * turns = {:.6}, slack {:.3e}",
                    e.name,
                    kind.name(),
                    nu.estimate,
                    kappa * tu.estimate,
                    slack
                )));
            }
            records.push(LedgerRecord {
                name: e.name.clone(),
                kind,
                nu: nu.estimate,
                nu_width: nu.half_width,
                turns: tu.estimate,
                turns_width: tu.half_width,
            });
        }
        kappas.push(kappa);
    }
    let ledger = CalibrationLedger { n, kappa_trace: kappas[0], kappa_siegel: kappas[1], kappa_bergman: kappas[2], k_max, records };
    let kt = ledger.kappa_trace;
    if (ledger.kappa_siegel - 2.0 * kt).abs() > 1e-6 * kt.abs().max(1.0)
        || (ledger.kappa_bergman - (n as f64 + 1.0) * kt).abs() > 1e-6 * kt.abs().max(1.0)
    {
        return Err(QmError::NonConstantRatio("form scaling relations violated".into()));
    }
    Ok(ledger)
}

/// The default suite: rotation loops of winding 1..=3 and random bounded paths.
pub fn default_suite<R: Rng + ?Sized>(rng: &mut R, n: usize, random_paths: usize) -> Vec<SuiteEntry> {
    let mut suite: Vec<SuiteEntry> = (1..=3)
        .map(|m| SuiteEntry { name: format!("rotation-{m}"), path: rotation_loop(n, m, 4) })
        .collect();
    for i in 0..random_paths {
        suite.push(SuiteEntry { name: format!("random-{i}"), path: random_path(rng, n, 4, 3.0, 0.6, 1.0 + 1e-9) });
    }
    suite
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn maslov_examples() {
        assert_eq!(maslov_turns(&GroupPath::constant(1)).unwrap(), 0.0);
        assert!((maslov_turns(&rotation_loop(1, 1, 1)).unwrap() - 2.0).abs() < 1e-12);
        let hyp = GroupPath::uniform(vec![SpAlgebra::new(Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap()]).unwrap();
        assert!(maslov_turns(&hyp).unwrap().abs() < 1e-14);
        assert!((maslov_turns(&rotation_loop(2, -1, 3)).unwrap() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn gw_examples() {
        let triv = rotation_loop(1, 0, 1);
        assert_eq!(guichardet_wigner_restriction(&triv).unwrap().winding, 0.0);
        let r = guichardet_wigner_restriction(&rotation_loop(1, 1, 2)).unwrap();
        assert!((r.winding - 1.0).abs() < 1e-12);
        // rotation in the first complex factor only
        let mut s = Mat::zeros(4, 4);
        s[(0, 0)] = TAU;
        s[(2, 2)] = TAU;
        let lp = GroupPath::uniform(vec![SpAlgebra::from_symmetric(&s)]).unwrap();
        let r = guichardet_wigner_restriction(&lp).unwrap();
        assert!((r.winding - 1.0).abs() < 1e-12);
        assert_eq!(r.reference_det_neg, 3.0 * r.winding);
    }

    #[test]
    fn gw_rejects_non_unitary() {
        let hyp = GroupPath::uniform(vec![SpAlgebra::new(Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap()]).unwrap();
        let back = hyp.concat(&hyp.inverse());
        assert!(matches!(guichardet_wigner_restriction(&back), Err(QmError::NotUnitary(_))));
    }

    #[test]
    fn expression_and_sample_specs_compile() {
        let spec = SpPathSpec {
            n: 1,
            generator: SpGenerator::Expression(vec!["0".into(), "-2*pi".into(), "2*pi".into(), "0".into()]),
            m: 4,
        };
        let p = spec.compile().unwrap();
        assert!((maslov_turns(&p).unwrap() - 2.0).abs() < 1e-12);
        let s = SpPathSpec {
            n: 1,
            generator: SpGenerator::Samples { times: p.times.clone(), elements: p.elements.iter().map(|g| g.m.clone()).collect() },
            m: 0,
        };
        let q = s.compile().unwrap();
        assert!((maslov_turns(&q).unwrap() - 2.0).abs() < 1e-12);
        let bad = SpPathSpec { n: 1, generator: SpGenerator::Piecewise(vec![Mat::identity(2, 2)]), m: 1 };
        assert!(bad.compile().is_err());
    }

    #[test]
    fn rotation_route_on_rotation_loop() {
        let v = rotation_number_nu(&rotation_loop(1, 1, 4), &CompatibleJ::standard(1), FormKind::Trace).unwrap();
        assert!((v + TAU).abs() < 1e-12);
        assert_eq!(rotation_number_nu(&GroupPath::constant(2), &CompatibleJ::standard(2), FormKind::Trace).unwrap(), 0.0);
        let v = rotation_number_nu(&rotation_loop(2, 1, 4), &CompatibleJ::standard(2), FormKind::Siegel).unwrap();
        assert!((v + 8.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn ledger_text_roundtrip() {
        let l = CalibrationLedger { n: 2, kappa_trace: -PI, kappa_siegel: -TAU, kappa_bergman: -3.0 * PI, k_max: 8, records: vec![] };
        let r = CalibrationLedger::from_text(&l.to_text()).unwrap();
        assert_eq!(l, r);
    }
}
