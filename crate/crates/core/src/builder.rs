//! Forward construction: a holomorphic map `ξ` from a chart of `C^n` into
//! the Grassmannian, together with a holomorphic section `σ`, determines a
//! submersion `φ` on a Euclidean domain whose fibres are the affine planes
//! `σ(y) + ker ξ(y)`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analyzer::SubmersionSpec;
use crate::error::{Error, Result};
use crate::fstruct::FField;
use crate::linalg::{
    central_jacobian, directional_derivative, five_point_jacobian, lstsq, mul_i, spectral_projectors,
    unit, BoxDomain, CMat, CVec, Complex64, RMat, RVec,
};
use crate::ograss::{j_grass, point_residuals, OGPoint};

type PointMapFn = dyn Fn(&RVec) -> Result<OGPoint> + Send + Sync;
type SectionFn = dyn Fn(&RVec) -> RVec + Send + Sync;

/// `2 Re(P⁺ s)`: the horizontal vector representing the class of the
/// complex vector `s` in the quotient determined by `xi`.
pub fn horizontal_section(xi: &OGPoint, s: &CVec) -> RVec {
    let (pp, _, _) = spectral_projectors(xi.f());
    (pp * s).map(|z| 2.0 * z.re)
}

/// Input of the forward construction. Chart points are real vectors of
/// length `2n` holding `(re, im)` pairs.
#[derive(Clone)]
pub struct HoloFoliationSpec {
    chart: BoxDomain,
    domain_hint: BoxDomain,
    n: usize,
    xi: Arc<PointMapFn>,
    sigma: Arc<SectionFn>,
}

impl std::fmt::Debug for HoloFoliationSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HoloFoliationSpec")
            .field("chart", &self.chart)
            .field("domain_hint", &self.domain_hint)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl HoloFoliationSpec {
    pub fn new<X, S>(chart: BoxDomain, domain_hint: BoxDomain, n: usize, xi: X, sigma: S) -> Result<Self>
    where
        X: Fn(&RVec) -> Result<OGPoint> + Send + Sync + 'static,
        S: Fn(&RVec) -> RVec + Send + Sync + 'static,
    {
        if chart.dim() != 2 * n {
            return Err(Error::Shape(format!(
                "chart has real dimension {}, expected {}",
                chart.dim(),
                2 * n
            )));
        }
        let m = domain_hint.dim();
        if n == 0 || 2 * n > m {
            return Err(Error::RankOutOfRange { m, n });
        }
        Ok(HoloFoliationSpec {
            chart,
            domain_hint,
            n,
            xi: Arc::new(xi),
            sigma: Arc::new(sigma),
        })
    }

    pub fn chart(&self) -> &BoxDomain {
        &self.chart
    }

    pub fn domain_hint(&self) -> &BoxDomain {
        &self.domain_hint
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.domain_hint.dim()
    }

    pub fn xi(&self, y: &RVec) -> Result<OGPoint> {
        (self.xi)(y)
    }

    pub fn sigma(&self, y: &RVec) -> RVec {
        (self.sigma)(y)
    }

    /// `ξ(y) (v - σ(y))`; vanishes exactly when `v` lies on the leaf over `y`.
    pub fn residual(&self, y: &RVec, v: &RVec) -> Result<RVec> {
        let f = self.xi(y)?;
        Ok(f.f() * (v - self.sigma(y)))
    }

    /// Residuals of the input invariants at one chart point.
    pub fn check_at(&self, y: &RVec) -> Result<SpecResiduals> {
        let f = self.xi(y)?;
        let s = self.sigma(y);
        let vertical = &s + f.f() * (f.f() * &s);
        let xi = |p: &RVec| self.xi(p);
        let sigma = |p: &RVec| Ok(self.sigma(p));
        Ok(SpecResiduals {
            point: point_residuals(f.f(), self.n).max_residual(),
            vertical_sigma: vertical.norm(),
            xi_holomorphy: check_holomorphy(&HolomorphyTarget::Grassmann(&xi), y, None)?,
            sigma_holomorphy: check_holomorphy(
                &HolomorphyTarget::Section {
                    xi: &xi,
                    sigma: &sigma,
                },
                y,
                None,
            )?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecResiduals {
    pub point: f64,
    pub vertical_sigma: f64,
    pub xi_holomorphy: f64,
    pub sigma_holomorphy: f64,
}

type VecMap<'a> = dyn Fn(&RVec) -> Result<RVec> + 'a;
type PointMap<'a> = dyn Fn(&RVec) -> Result<OGPoint> + 'a;

/// What a chart-level map takes values in, which fixes the complex
/// structure used in the Cauchy–Riemann test.
pub enum HolomorphyTarget<'a> {
    /// Values in `C^k` stored as `(re, im)` pairs; `i` acts by [`mul_i`].
    Complex(&'a VecMap<'a>),
    /// Values in the Grassmannian; `i` acts by `J_F` at the image point.
    Grassmann(&'a PointMap<'a>),
    /// Horizontal representatives of a section of the quotient bundle
    /// of `xi`; the test is `H dσ(iY) = F dσ(Y)`.
    Section {
        xi: &'a PointMap<'a>,
        sigma: &'a VecMap<'a>,
    },
}

/// Largest Cauchy–Riemann defect `|df(i e_k) - 𝕁 df(e_k)|` over the
/// complex chart directions, by central differences.
pub fn check_holomorphy(target: &HolomorphyTarget<'_>, y: &RVec, chart: Option<&BoxDomain>) -> Result<f64> {
    let dim = y.len();
    let mut worst = 0.0f64;
    for a in 0..dim / 2 {
        let e = unit(dim, 2 * a);
        let ie = unit(dim, 2 * a + 1);
        let r = match target {
            HolomorphyTarget::Complex(f) => {
                let d1: RVec = directional_derivative(f, y, &e, chart)?;
                let d2: RVec = directional_derivative(f, y, &ie, chart)?;
                (d2 - mul_i(&d1)).norm()
            }
            HolomorphyTarget::Grassmann(f) => {
                let mat = |p: &RVec| f(p).map(OGPoint::into_matrix);
                let d1: RMat = directional_derivative(mat, y, &e, chart)?;
                let d2: RMat = directional_derivative(mat, y, &ie, chart)?;
                let base = f(y)?;
                (d2 - j_grass(base.f(), &d1)).norm()
            }
            HolomorphyTarget::Section { xi, sigma } => {
                let d1: RVec = directional_derivative(sigma, y, &e, chart)?;
                let d2: RVec = directional_derivative(sigma, y, &ie, chart)?;
                let f = xi(y)?.into_matrix();
                let h = -(&f * &f);
                (h * d2 - &f * d1).norm()
            }
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Damped Gauss–Newton settings and seed grid resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking factor of the Armijo line search.
    pub armijo: f64,
    /// Nodes per axis of the seed grid over `U`.
    pub seed_resolution: usize,
    /// Nodes per axis of the fallback search grid over the chart; 0 picks
    /// a resolution from the chart dimension.
    pub chart_resolution: usize,
    /// Size of the certification perturbations, relative to the chart.
    pub perturbation: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tol: 1e-12,
            max_iter: 50,
            armijo: 0.5,
            seed_resolution: 5,
            chart_resolution: 0,
            perturbation: 0.02,
        }
    }
}

/// A converged solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSolution {
    pub y: RVec,
    /// `|R(y; v)| / (1 + |v|)`.
    pub residual: f64,
    pub iterations: usize,
    /// Condition number of the Gauss–Newton normal matrix at `y`.
    pub condition: f64,
}

fn pinv_solve(j: &RMat, r: &RVec) -> RVec {
    if let Some(x) = lstsq(j, &RMat::from_column_slice(r.len(), 1, r.as_slice())) {
        return x.column(0).into_owned();
    }
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(r, 1e-14 * smax.max(f64::MIN_POSITIVE))
        .expect("both singular factors were requested")
}

fn normal_condition(j: &RMat) -> f64 {
    let sv = j.clone().svd(false, false).singular_values;
    let (smin, smax) = (sv.min(), sv.max());
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        (smax / smin).powi(2)
    }
}

fn clamp_into(domain: &BoxDomain, y: &RVec) -> RVec {
    RVec::from_iterator(
        y.len(),
        y.iter()
            .zip(domain.lower().iter().zip(domain.upper().iter()))
            .map(|(v, (l, u))| v.clamp(*l, *u)),
    )
}

/// Damped Gauss–Newton for a zero-residual least-squares problem on the
/// chart.
pub fn gauss_newton<R>(
    residual: R,
    y0: &RVec,
    scale: f64,
    chart: &BoxDomain,
    params: &SolverParams,
) -> Result<PhiSolution>
where
    R: Fn(&RVec) -> Result<RVec>,
{
    let target = params.tol * scale;
    let mut y = clamp_into(chart, y0);
    let mut r = residual(&y)?;
    let mut norm = r.norm();
    let mut iterations = 0;
    while norm > target {
        if iterations >= params.max_iter {
            return Err(Error::NoConvergence);
        }
        iterations += 1;
        let j = central_jacobian(&residual, &y, None)?;
        let step = -pinv_solve(&j, &r);
        let mut t = 1.0;
        loop {
            let trial = &y + &step * t;
            if chart.contains(&trial) {
                if let Ok(rt) = residual(&trial) {
                    let nt = rt.norm();
                    if nt <= (1.0 - 1e-4 * t) * norm {
                        y = trial;
                        r = rt;
                        norm = nt;
                        break;
                    }
                }
            }
            t *= params.armijo;
            if t < 1e-12 {
                return Err(Error::NoConvergence);
            }
        }
    }
    // a few undamped steps bring the residual to rounding level
    for _ in 0..2 {
        let j = central_jacobian(&residual, &y, None)?;
        let trial = &y - pinv_solve(&j, &r);
        if !chart.contains(&trial) {
            break;
        }
        let rt = residual(&trial)?;
        if rt.norm() >= norm {
            break;
        }
        y = trial;
        norm = rt.norm();
        r = rt;
    }
    let j = five_point_jacobian(&residual, &y, None)?;
    let condition = normal_condition(&j);
    if !(condition < 1e8) {
        return Err(Error::NoConvergence);
    }
    Ok(PhiSolution {
        y,
        residual: norm / scale,
        iterations,
        condition,
    })
}

/// The affine leaf through a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub y: RVec,
    /// `σ(y)`, the point of the leaf closest to the origin.
    pub base: RVec,
    /// Orthonormal basis of `ker ξ(y)` (columns).
    pub kernel: RMat,
    /// Distance of the query point from the leaf.
    pub distance: f64,
}

impl Leaf {
    /// `p + sum_j t_j k_j` for the orthogonal projection `p` of `anchor`
    /// onto the leaf.
    pub fn point(&self, anchor: &RVec, t: &RVec) -> RVec {
        let p = &self.base + &self.kernel * (self.kernel.transpose() * (anchor - &self.base));
        p + &self.kernel * t
    }
}

/// Certified solve: the grid seed and every perturbed seed converge to the
/// same chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct Certified {
    pub solution: PhiSolution,
    /// Largest chart distance between the solutions from different seeds.
    pub spread: f64,
}

/// Solver state for one spec on one domain `U`.
#[derive(Clone)]
pub struct FoliationChart {
    spec: HoloFoliationSpec,
    u: BoxDomain,
    params: SolverParams,
    seeds: Arc<Vec<Option<RVec>>>,
}

impl std::fmt::Debug for FoliationChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FoliationChart")
            .field("spec", &self.spec)
            .field("u", &self.u)
            .field("params", &self.params)
            .field("seeded", &self.seeds.iter().filter(|s| s.is_some()).count())
            .finish()
    }
}

impl FoliationChart {
    /// Solves on the seed grid of `U` by continuation in grid order,
    /// falling back to a search over the chart.
    pub fn new(spec: HoloFoliationSpec, u: BoxDomain, params: SolverParams) -> Result<Self> {
        if u.dim() != spec.m() {
            return Err(Error::Shape(format!("U has dimension {}, expected {}", u.dim(), spec.m())));
        }
        let mut chart = FoliationChart {
            spec,
            u,
            params,
            seeds: Arc::new(Vec::new()),
        };
        let res = chart.params.seed_resolution.max(2);
        let nodes = chart.u.grid(res);
        let d = chart.u.dim();
        let mut seeds: Vec<Option<RVec>> = Vec::with_capacity(nodes.len());
        for (idx, v) in nodes.iter().enumerate() {
            let mut neighbour = None;
            let mut stride = 1;
            let mut rest = idx;
            for _ in 0..d {
                if rest % res > 0 {
                    if let Some(y) = &seeds[idx - stride] {
                        neighbour = Some(y.clone());
                        break;
                    }
                }
                rest /= res;
                stride *= res;
            }
            let solved = neighbour
                .and_then(|y0| chart.solve_from(v, &y0).ok())
                .or_else(|| chart.search_seed(v).and_then(|y0| chart.solve_from(v, &y0)).ok());
            seeds.push(solved.map(|s| s.y));
        }
        if seeds.iter().all(Option::is_none) {
            return Err(Error::NoConvergence);
        }
        chart.seeds = Arc::new(seeds);
        Ok(chart)
    }

    pub fn spec(&self) -> &HoloFoliationSpec {
        &self.spec
    }

    pub fn u(&self) -> &BoxDomain {
        &self.u
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    /// Fraction of seed grid nodes with a solution.
    pub fn seeded_fraction(&self) -> f64 {
        self.seeds.iter().filter(|s| s.is_some()).count() as f64 / self.seeds.len() as f64
    }

    fn chart_resolution(&self) -> usize {
        if self.params.chart_resolution > 0 {
            return self.params.chart_resolution;
        }
        let dim = self.spec.chart().dim() as f64;
        (4096f64.powf(1.0 / dim).floor() as usize).max(3)
    }

    /// Chart grid node with the smallest residual.
    fn search_seed(&self, v: &RVec) -> Result<RVec> {
        let mut best: Option<(f64, RVec)> = None;
        for y in self.spec.chart().grid(self.chart_resolution()) {
            if let Ok(r) = self.spec.residual(&y, v) {
                let n = r.norm();
                if best.as_ref().is_none_or(|(b, _)| n < *b) {
                    best = Some((n, y));
                }
            }
        }
        best.map(|(_, y)| y).ok_or(Error::NoConvergence)
    }

    fn node_index(&self, v: &RVec) -> usize {
        let res = self.params.seed_resolution.max(2);
        let mut idx = 0;
        for k in 0..self.u.dim() {
            let (lo, hi) = (self.u.lower()[k], self.u.upper()[k]);
            let t = ((v[k] - lo) / (hi - lo) * (res - 1) as f64).round();
            idx = idx * res + t.clamp(0.0, (res - 1) as f64) as usize;
        }
        idx
    }

    /// Seed for `v`: the nearest grid node's solution, else a chart search.
    pub fn seed_for(&self, v: &RVec) -> Result<RVec> {
        match self.seeds.get(self.node_index(v)) {
            Some(Some(y)) => Ok(y.clone()),
            _ => self.search_seed(v),
        }
    }

    pub fn solve_from(&self, v: &RVec, y0: &RVec) -> Result<PhiSolution> {
        gauss_newton(
            |y: &RVec| self.spec.residual(y, v),
            y0,
            1.0 + v.norm(),
            self.spec.chart(),
            &self.params,
        )
    }

    pub fn solve_detailed(&self, v: &RVec) -> Result<PhiSolution> {
        if v.len() != self.spec.m() {
            return Err(Error::Shape(format!("point has dimension {}", v.len())));
        }
        let y0 = self.seed_for(v)?;
        self.solve_from(v, &y0)
    }

    /// `φ(v)` in real chart coordinates.
    pub fn solve_phi(&self, v: &RVec) -> Result<RVec> {
        self.solve_detailed(v).map(|s| s.y)
    }

    pub fn certify(&self, v: &RVec) -> Result<Certified> {
        let solution = self.solve_detailed(v)?;
        let chart = self.spec.chart();
        let width = chart.upper() - chart.lower();
        let mut spread = 0.0f64;
        for i in 0..4 {
            let angle = std::f64::consts::FRAC_PI_2 * i as f64;
            let offset = RVec::from_fn(width.len(), |k, _| {
                self.params.perturbation * width[k] * (angle + 0.9 * k as f64).cos()
            });
            let other = self.solve_from(v, &(&solution.y + offset))?;
            spread = spread.max((&other.y - &solution.y).norm());
        }
        if spread > 1e-8 {
            return Err(Error::NoConvergence);
        }
        Ok(Certified { solution, spread })
    }

    /// `dφ` at `v` as a `2n×m` matrix, by implicit differentiation of
    /// `R(φ(v); v) = 0`.
    pub fn phi_jacobian(&self, v: &RVec) -> Result<RMat> {
        let y = self.solve_phi(v)?;
        self.phi_jacobian_at(v, &y)
    }

    pub fn phi_jacobian_at(&self, v: &RVec, y: &RVec) -> Result<RMat> {
        let ry = five_point_jacobian(|p: &RVec| self.spec.residual(p, v), y, None)?;
        let f = self.spec.xi(y)?.into_matrix();
        lstsq(&ry, &f).map(|d| -d).ok_or(Error::NotSubmersion)
    }

    pub fn leaf_through(&self, x: &RVec) -> Result<Leaf> {
        let y = self.solve_phi(x)?;
        let f = self.spec.xi(&y)?;
        let base = self.spec.sigma(&y);
        let kernel = f.split().basis_zero;
        let distance = (f.f() * (f.f() * (x - &base))).norm();
        Ok(Leaf {
            y,
            base,
            kernel,
            distance,
        })
    }

    /// Largest chart distance `|φ(x ± t w) - φ(x)|` over random kernel
    /// directions `w`, with steps kept inside `U`.
    pub fn totally_geodesic_residual<R: Rng + ?Sized>(&self, x: &RVec, trials: usize, rng: &mut R) -> Result<f64> {
        let leaf = self.leaf_through(x)?;
        let k = leaf.kernel.ncols();
        if k == 0 {
            return Ok(0.0);
        }
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let coeffs = RVec::from_fn(k, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let w = (&leaf.kernel * coeffs).normalize();
            let reach = self.reach(x, &w);
            if reach < 1e-6 {
                return Err(Error::DomainMargin);
            }
            let t = reach * rng.random_range(0.2..0.9);
            let p = x + &w * t;
            let q = x - &w * t;
            for z in [&p, &q, &((&p + &q) * 0.5)] {
                let y = self.solve_phi(z)?;
                worst = worst.max((y - &leaf.y).norm());
            }
        }
        Ok(worst)
    }

    /// Largest `t` with `x ± t w` inside `U`.
    fn reach(&self, x: &RVec, w: &RVec) -> f64 {
        let mut t = f64::INFINITY;
        for k in 0..x.len() {
            if w[k].abs() > 1e-14 {
                let up = (self.u.upper()[k] - x[k]) / w[k].abs();
                let down = (x[k] - self.u.lower()[k]) / w[k].abs();
                t = t.min(up).min(down);
            }
        }
        t.max(0.0)
    }

    /// `x ↦ ξ(φ(x))` on `U`.
    pub fn induced_ffield(&self) -> FField {
        let chart = self.clone();
        FField::new(self.u.clone(), self.spec.n(), move |x| {
            let y = chart.solve_phi(x)?;
            chart.spec.xi(&y)
        })
    }

    /// `φ` as a submersion, with its Jacobian from implicit differentiation.
    pub fn as_submersion(&self) -> SubmersionSpec {
        let phi_chart = self.clone();
        let jac_chart = self.clone();
        SubmersionSpec::new(self.u.clone(), self.spec.n(), move |x| phi_chart.solve_phi(x))
            .with_jacobian(move |x| jac_chart.phi_jacobian(x))
    }

    /// Solves the quotient-coordinate form of the leaf equation: with a
    /// frame `μ_a(y) = P⁻(y) μ_a` of the `-i` eigenspace,
    /// `<μ_a(y), v> / <μ_a(y), σ(y)> = 1`, or `<μ_a(y), v> = 0` for the
    /// zero section.
    pub fn solve_phi_quotient_form(&self, v: &RVec) -> Result<RVec> {
        let center = self.spec.chart().center();
        let mu0: CMat = self.spec.xi(&center)?.split().basis_minus();
        let y0 = self.seed_for(v)?;
        let zero_section = self.spec.sigma(&y0).norm() <= 1e-14 && self.spec.sigma(&center).norm() <= 1e-14;
        let residual = |y: &RVec| -> Result<RVec> {
            let f = self.spec.xi(y)?;
            let (_, _, pm) = spectral_projectors(f.f());
            let mu = pm * &mu0;
            let vc = v.map(|t| Complex64::new(t, 0.0));
            let tau_v = mu.transpose() * vc;
            let g = if zero_section {
                tau_v
            } else {
                let sc = self.spec.sigma(y).map(|t| Complex64::new(t, 0.0));
                let tau_s = mu.transpose() * sc;
                let mut g = CVec::zeros(tau_v.len());
                for a in 0..tau_v.len() {
                    if tau_s[a].norm() < 1e-6 {
                        return Err(Error::VanishingSectionComponent(a));
                    }
                    g[a] = tau_v[a] / tau_s[a] - Complex64::new(1.0, 0.0);
                }
                g
            };
            Ok(crate::linalg::from_complex(&g))
        };
        if !zero_section {
            residual(&y0)?;
        }
        gauss_newton(residual, &y0, 1.0 + v.norm(), self.spec.chart(), &self.params).map(|s| s.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_structure, to_complex};
    use crate::ograss::{random_point, validate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hopf_xi(y: &RVec) -> Result<OGPoint> {
        // J0 (I - P_L) for the complex line L through (1, y)
        let line = RVec::from_column_slice(&[1.0, 0.0, y[0], y[1]]);
        let j0 = complex_structure(2);
        let jl = &j0 * &line;
        let p = (&line * line.transpose() + &jl * jl.transpose()) / line.norm_squared();
        validate(&j0 * (RMat::identity(4, 4) - p), 1)
    }

    fn hopf_spec(shift: Option<RVec>) -> HoloFoliationSpec {
        let u = BoxDomain::from_slices(&[0.6, -0.4, -0.4, -0.4], &[1.4, 0.4, 0.4, 0.4]).unwrap();
        let chart = BoxDomain::cube(2, 1.5);
        match shift {
            None => HoloFoliationSpec::new(chart, u, 1, hopf_xi, |_| RVec::zeros(4)).unwrap(),
            Some(c) => {
                let u = u.translate(&c);
                HoloFoliationSpec::new(chart, u, 1, hopf_xi, move |y| {
                    let f = hopf_xi(y).unwrap();
                    -(f.f() * (f.f() * &c))
                })
                .unwrap()
            }
        }
    }

    fn hopf_chart() -> FoliationChart {
        let spec = hopf_spec(None);
        let u = spec.domain_hint().clone();
        FoliationChart::new(spec, u, SolverParams::default()).unwrap()
    }

    fn linear_spec() -> (HoloFoliationSpec, OGPoint, RVec) {
        let f0 = random_point(5, 2, 11).unwrap();
        let s0 = RVec::from_column_slice(&[0.2, -0.1, 0.3, 0.05, -0.25]);
        let split = f0.split();
        let e = split.adapted.clone();
        let h0 = -(f0.f() * (f0.f() * &s0));
        let f1 = f0.clone();
        let spec = HoloFoliationSpec::new(
            BoxDomain::cube(4, 3.0),
            BoxDomain::cube(5, 0.5),
            2,
            move |_| Ok(f1.clone()),
            move |y| {
                let mut v = h0.clone();
                for a in 0..2 {
                    v += e.column(2 * a) * y[2 * a] + e.column(2 * a + 1) * y[2 * a + 1];
                }
                v
            },
        )
        .unwrap();
        (spec, f0, s0)
    }

    #[test]
    fn holomorphy_of_constant_map() {
        let f = |_: &RVec| Ok(RVec::from_column_slice(&[1.0, 2.0]));
        let y = RVec::from_column_slice(&[0.1, 0.2]);
        assert_eq!(check_holomorphy(&HolomorphyTarget::Complex(&f), &y, None).unwrap(), 0.0);
    }

    #[test]
    fn holomorphy_of_polynomial_and_conjugate() {
        let w = CVec::from_column_slice(&[Complex64::new(1.0, 0.5), Complex64::new(-0.3, 2.0)]);
        let w1 = w.clone();
        let poly = move |y: &RVec| {
            let z = to_complex(y)[0];
            Ok(crate::linalg::from_complex(&w1.map(|c| c * (z * z + z * 3.0))))
        };
        let y = RVec::from_column_slice(&[0.4, -0.7]);
        assert!(check_holomorphy(&HolomorphyTarget::Complex(&poly), &y, None).unwrap() <= 1e-7);
        let w2 = w.clone();
        let conj = move |y: &RVec| Ok(crate::linalg::from_complex(&w2.map(|c| c * to_complex(y)[0].conj())));
        let r = check_holomorphy(&HolomorphyTarget::Complex(&conj), &y, None).unwrap();
        assert!((r - 2.0 * w.norm()).abs() <= 1e-8, "{r}");
    }

    #[test]
    fn hopf_xi_is_holomorphic() {
        let y = RVec::from_column_slice(&[0.3, -0.6]);
        let xi = |p: &RVec| hopf_xi(p);
        assert!(check_holomorphy(&HolomorphyTarget::Grassmann(&xi), &y, None).unwrap() <= 1e-6);
    }

    #[test]
    fn horizontal_section_of_holomorphic_family() {
        let spec = hopf_spec(None);
        let c = CVec::from_column_slice(&[
            Complex64::new(0.1, 0.0),
            Complex64::new(0.0, 0.2),
            Complex64::new(0.3, -0.1),
            Complex64::new(0.0, 0.0),
        ]);
        let xi = |p: &RVec| spec.xi(p);
        let c1 = c.clone();
        let sigma = move |p: &RVec| {
            let z = to_complex(p)[0];
            Ok(horizontal_section(&hopf_xi(p)?, &c1.map(|a| a * z * z)))
        };
        let y = RVec::from_column_slice(&[0.2, 0.5]);
        let target = HolomorphyTarget::Section { xi: &xi, sigma: &sigma };
        assert!(check_holomorphy(&target, &y, None).unwrap() <= 1e-6);
        let c2 = c.clone();
        let anti = move |p: &RVec| {
            let z = to_complex(p)[0];
            Ok(horizontal_section(&hopf_xi(p)?, &c2.map(|a| a * z.conj())))
        };
        let target = HolomorphyTarget::Section { xi: &xi, sigma: &anti };
        assert!(check_holomorphy(&target, &y, None).unwrap() > 1e-2);
    }

    #[test]
    fn linear_case_matches_closed_form() {
        let (spec, f0, s0) = linear_spec();
        let u = spec.domain_hint().clone();
        let chart = FoliationChart::new(spec, u, SolverParams::default()).unwrap();
        let e = f0.split().adapted;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let v = chart.u().sample(&mut rng);
            let y = chart.solve_phi(&v).unwrap();
            let d = &v - &s0;
            let expected = RVec::from_fn(4, |k, _| e.column(k).dot(&d));
            assert!((y - expected).norm() <= 1e-12);
            assert!(chart.totally_geodesic_residual(&v, 2, &mut rng).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn hopf_solve_worked_example() {
        let chart = hopf_chart();
        let y = chart.solve_phi(&RVec::from_column_slice(&[1.0, 0.0, 0.5, 0.0])).unwrap();
        assert!((y - RVec::from_column_slice(&[0.5, 0.0])).norm() <= 1e-12);
    }

    #[test]
    fn hopf_matches_quotient_of_coordinates() {
        let chart = hopf_chart();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = chart.u().sample(&mut rng);
            let sol = chart.certify(&v).unwrap();
            let z = to_complex(&v);
            let q = z[1] / z[0];
            assert!((sol.solution.y[0] - q.re).abs() <= 1e-10);
            assert!((sol.solution.y[1] - q.im).abs() <= 1e-10);
            assert!(sol.solution.residual <= 1e-10);
            assert!(sol.spread <= 1e-8);
        }
    }

    #[test]
    fn hopf_leaf_through_base_point() {
        let chart = hopf_chart();
        let leaf = chart.leaf_through(&RVec::from_column_slice(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(leaf.base.norm(), 0.0);
        // the leaf is the plane {(a, b, 0, 0)}
        let proj = &leaf.kernel * leaf.kernel.transpose();
        let mut expected = RMat::zeros(4, 4);
        expected[(0, 0)] = 1.0;
        expected[(1, 1)] = 1.0;
        assert!((proj - expected).norm() <= 1e-10);
        assert!(leaf.distance <= 1e-9);
    }

    #[test]
    fn hopf_totally_geodesic() {
        let chart = hopf_chart();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inner = chart.u().shrink(0.2);
        for _ in 0..5 {
            let x = inner.sample(&mut rng);
            assert!(chart.totally_geodesic_residual(&x, 3, &mut rng).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn translated_hopf_leaves_pass_through_shift() {
        let c = RVec::from_column_slice(&[0.3, -0.2, 0.25, 0.1]);
        let spec = hopf_spec(Some(c.clone()));
        let u = spec.domain_hint().clone();
        let chart = FoliationChart::new(spec, u, SolverParams::default()).unwrap();
        let x = &c + RVec::from_column_slice(&[1.0, 0.1, 0.3, -0.2]);
        let y = chart.solve_phi(&x).unwrap();
        let z = to_complex(&(&x - &c));
        let q = z[1] / z[0];
        assert!((y[0] - q.re).abs() <= 1e-10 && (y[1] - q.im).abs() <= 1e-10);
    }

    #[test]
    fn implicit_jacobian_matches_closed_form() {
        let chart = hopf_chart();
        let v = RVec::from_column_slice(&[1.1, 0.2, -0.1, 0.3]);
        let jac = chart.phi_jacobian(&v).unwrap();
        let exact = central_jacobian(
            |p: &RVec| {
                let z = to_complex(p);
                Ok(crate::linalg::from_complex(&CVec::from_element(1, z[1] / z[0])))
            },
            &v,
            None,
        )
        .unwrap();
        assert!((jac - exact).norm() <= 1e-8);
    }

    #[test]
    fn induced_field_matches_hopf_structure() {
        let chart = hopf_chart();
        let ff = chart.induced_ffield();
        let x = RVec::from_column_slice(&[0.9, -0.1, 0.2, 0.3]);
        let got = ff.matrix(&x).unwrap();
        let expected = crate::fstruct::tests::hopf_closed_form(&x);
        assert!((got - expected).norm() <= 1e-8);
        let s = crate::fstruct::sphh_residual(&ff, &x).unwrap();
        assert!(s.sphh <= 1e-6, "{s:?}");
    }

    #[test]
    fn quotient_form_agrees() {
        let chart = hopf_chart();
        let v = RVec::from_column_slice(&[1.2, 0.1, -0.3, 0.2]);
        let a = chart.solve_phi(&v).unwrap();
        let b = chart.solve_phi_quotient_form(&v).unwrap();
        assert!((a - b).norm() <= 1e-9);

        let c = RVec::from_column_slice(&[0.3, -0.2, 0.25, 0.1]);
        let spec = hopf_spec(Some(c.clone()));
        let u = spec.domain_hint().clone();
        let chart = FoliationChart::new(spec, u, SolverParams::default()).unwrap();
        let v = &c + RVec::from_column_slice(&[1.0, 0.1, 0.3, -0.2]);
        let a = chart.solve_phi(&v).unwrap();
        match chart.solve_phi_quotient_form(&v) {
            Ok(b) => assert!((a - b).norm() <= 1e-9),
            Err(e) => assert!(matches!(e, Error::VanishingSectionComponent(_))),
        }
    }

    #[test]
    fn solver_fails_far_outside() {
        let chart = hopf_chart();
        // on the excluded hyperplane z1 = 0 no leaf of the chart passes
        let err = chart.solve_phi(&RVec::from_column_slice(&[0.0, 0.0, 1.0, 0.0])).unwrap_err();
        assert_eq!(err, Error::NoConvergence);
    }

    #[test]
    fn spec_rejects_wrong_chart() {
        let err = HoloFoliationSpec::new(BoxDomain::cube(3, 1.0), BoxDomain::cube(4, 1.0), 1, hopf_xi, |_| {
            RVec::zeros(4)
        })
        .unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }
}
