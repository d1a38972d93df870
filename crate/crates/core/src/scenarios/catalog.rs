use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::file::BoxSpec;
use super::{Scenario, ScenarioKind};
use crate::analyzer::SubmersionSpec;
use crate::builder::{horizontal_section, HoloFoliationSpec, SolverParams};
use crate::error::{Error, Result};
use crate::linalg::{complex_structure, from_complex, to_complex, BoxDomain, CVec, Complex64, RMat, RVec};
use crate::ograss::{random_point, validate, OGPoint};

pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub anchor: &'static str,
}

pub const CATALOG: [CatalogEntry; 6] = [
    CatalogEntry {
        name: "linear",
        description: "constant quotient on R^5 (n = 2): fibres are parallel lines",
        anchor: "constant xi, fibres s0 + ker F0",
    },
    CatalogEntry {
        name: "hopf",
        description: "complex lines through the origin of C^{k+1}, phi = z_j / z_1",
        anchor: "projective space quotient, zero section",
    },
    CatalogEntry {
        name: "hopf-translated",
        description: "complex lines through a fixed point c, constant section",
        anchor: "projective space quotient, non-trivial constant section",
    },
    CatalogEntry {
        name: "jacobi-r3",
        description: "line foliation of a domain in R^3 from a holomorphic map C -> S^2",
        anchor: "foliations by lines in R^3, n = 1",
    },
    CatalogEntry {
        name: "negative-conj",
        description: "jacobi-r3 with an anti-holomorphic section (negative control)",
        anchor: "holomorphy of the section",
    },
    CatalogEntry {
        name: "negative-twist",
        description: "conformal submersion of R^3 with helical fibres (negative control)",
        anchor: "constancy of Omega along fibres",
    },
];

pub fn builtin_names() -> Vec<&'static str> {
    CATALOG.iter().map(|e| e.name).collect()
}

/// One line per scenario: name, description and anchor.
pub fn list_scenarios() -> String {
    let width = CATALOG.iter().map(|e| e.name.len()).max().unwrap_or(0);
    CATALOG
        .iter()
        .map(|e| format!("{:width$}  {}  [{}]\n", e.name, e.description, e.anchor))
        .collect()
}

/// Parameters a scenario file may change on a builtin.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub u: Option<BoxSpec>,
    pub chart: Option<BoxSpec>,
    pub solver: Option<SolverParams>,
    /// Complex dimension of the leaf space for `hopf`.
    pub k: Option<usize>,
    /// Seed of the constant point for `linear`.
    pub point_seed: Option<u64>,
    /// Scale of the chart coordinate fed to the sphere map in `jacobi-r3`.
    pub epsilon: Option<f64>,
    /// Pitch of the helices in `negative-twist`.
    pub twist: Option<f64>,
    /// Common point of the lines in `hopf-translated`.
    pub shift: Option<Vec<f64>>,
}

fn entry(name: &str) -> Result<&'static CatalogEntry> {
    CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Scenario(format!("unknown scenario `{name}` (known: {})", builtin_names().join(", "))))
}

pub fn builtin(name: &str, ov: &Overrides) -> Result<Scenario> {
    let e = entry(name)?;
    let mut s = match name {
        "linear" => linear(ov)?,
        "hopf" => hopf(ov, None)?,
        "hopf-translated" => {
            let c = ov.shift.clone().unwrap_or_else(|| vec![0.3, -0.2, 0.25, 0.1]);
            hopf(ov, Some(RVec::from_vec(c)))?
        }
        "jacobi-r3" => jacobi(ov, false)?,
        "negative-conj" => jacobi(ov, true)?,
        "negative-twist" => twist(ov)?,
        _ => unreachable!("catalog entry without constructor"),
    };
    s.name = e.name.to_string();
    s.description = e.description.to_string();
    s.anchor = e.anchor.to_string();
    if let Some(p) = &ov.solver {
        s.solver = p.clone();
    }
    Ok(s)
}

fn boxed(spec: &Option<BoxSpec>, default: BoxDomain, field: &str) -> Result<BoxDomain> {
    match spec {
        Some(b) => b.to_domain(field),
        None => Ok(default),
    }
}

fn base(kind: ScenarioKind, m: usize, n: usize, chart: BoxDomain, u: BoxDomain) -> Scenario {
    Scenario {
        name: String::new(),
        description: String::new(),
        anchor: String::new(),
        kind,
        m,
        n,
        chart,
        u,
        solver: SolverParams::default(),
        builder: None,
        submersion: None,
        closed_form_phi: None,
        zero_section: false,
        designated_failures: Vec::new(),
    }
}

fn check_dims(chart: &BoxDomain, u: &BoxDomain, m: usize, n: usize) -> Result<()> {
    if u.dim() != m {
        return Err(Error::Scenario(format!("field `u`: expected dimension {m}, got {}", u.dim())));
    }
    if chart.dim() != 2 * n {
        return Err(Error::Scenario(format!(
            "field `chart`: expected dimension {}, got {}",
            2 * n,
            chart.dim()
        )));
    }
    Ok(())
}

fn linear(ov: &Overrides) -> Result<Scenario> {
    let (m, n) = (5, 2);
    let u = boxed(&ov.u, BoxDomain::cube(m, 0.5), "u")?;
    let chart = boxed(&ov.chart, BoxDomain::cube(2 * n, 2.5), "chart")?;
    check_dims(&chart, &u, m, n)?;
    let f0 = random_point(m, n, ov.point_seed.unwrap_or(11))?;
    let adapted = f0.split().adapted;
    let s0 = RVec::from_column_slice(&[0.2, -0.1, 0.3, 0.05, -0.25]);
    let h0 = -(f0.f() * (f0.f() * &s0));

    let f1 = f0.clone();
    let e1 = adapted.clone();
    let builder = HoloFoliationSpec::new(
        chart.clone(),
        u.clone(),
        n,
        move |_| Ok(f1.clone()),
        move |y| &h0 + &e1 * y,
    )?;
    let et = adapted.transpose();
    let et1 = et.clone();
    let s1 = s0.clone();
    let phi = move |x: &RVec| &et1 * (x - &s1);
    let phi1 = phi.clone();
    let submersion = SubmersionSpec::new(u.clone(), n, move |x| Ok(phi1(x))).with_jacobian(move |_| Ok(et.clone()));

    let mut s = base(ScenarioKind::Both, m, n, chart, u);
    s.builder = Some(builder);
    s.submersion = Some(submersion);
    s.closed_form_phi = Some(Arc::new(phi));
    Ok(s)
}

/// `J0 (I - P_L)` for the complex line `L` spanned by `(1, y)`.
pub(crate) fn hopf_xi(k: usize) -> impl Fn(&RVec) -> Result<OGPoint> + Clone + Send + Sync + 'static {
    let m = 2 * k + 2;
    let j0 = complex_structure(k + 1);
    move |y: &RVec| {
        let mut line = RVec::zeros(m);
        line[0] = 1.0;
        line.rows_mut(2, 2 * k).copy_from(y);
        let jl = &j0 * &line;
        let p = (&line * line.transpose() + &jl * jl.transpose()) / line.norm_squared();
        validate(&j0 * (RMat::identity(m, m) - p), k)
    }
}

fn hopf_phi(k: usize, shift: RVec) -> impl Fn(&RVec) -> RVec + Clone + Send + Sync + 'static {
    move |x: &RVec| {
        let z = to_complex(&(x - &shift));
        from_complex(&CVec::from_fn(k, |j, _| z[j + 1] / z[0]))
    }
}

fn hopf(ov: &Overrides, shift: Option<RVec>) -> Result<Scenario> {
    let k = if shift.is_some() { 1 } else { ov.k.unwrap_or(1) };
    if k == 0 {
        return Err(Error::Scenario("field `k`: must be at least 1".into()));
    }
    let (m, n) = (2 * k + 2, k);
    let c = shift.clone().unwrap_or_else(|| RVec::zeros(m));
    if c.len() != m {
        return Err(Error::Scenario(format!("field `shift`: expected {m} entries, got {}", c.len())));
    }
    let mut lower = vec![-0.4; m];
    let mut upper = vec![0.4; m];
    lower[0] = 0.6;
    upper[0] = 1.4;
    let default_u = BoxDomain::from_slices(&lower, &upper)?.translate(&c);
    let u = boxed(&ov.u, default_u, "u")?;
    let chart = boxed(&ov.chart, BoxDomain::cube(2 * n, 1.5), "chart")?;
    check_dims(&chart, &u, m, n)?;

    let xi = hopf_xi(k);
    let builder = if shift.is_some() {
        let xi2 = xi.clone();
        let c2 = c.clone();
        HoloFoliationSpec::new(chart.clone(), u.clone(), n, xi, move |y| match xi2(y) {
            Ok(f) => -(f.f() * (f.f() * &c2)),
            Err(_) => RVec::from_element(c2.len(), f64::NAN),
        })?
    } else {
        HoloFoliationSpec::new(chart.clone(), u.clone(), n, xi, move |_| RVec::zeros(m))?
    };
    let phi = hopf_phi(k, c);
    let phi1 = phi.clone();
    let submersion = SubmersionSpec::new(u.clone(), n, move |x| Ok(phi1(x)));

    let mut s = base(ScenarioKind::Both, m, n, chart, u);
    s.builder = Some(builder);
    s.submersion = Some(submersion);
    s.closed_form_phi = Some(Arc::new(phi));
    s.zero_section = shift.is_none();
    Ok(s)
}

/// Inverse stereographic projection from the north pole.
pub(crate) fn sphere(w: Complex64) -> RVec {
    let r2 = w.norm_sqr();
    RVec::from_column_slice(&[2.0 * w.re, 2.0 * w.im, 1.0 - r2]) / (1.0 + r2)
}

pub(crate) fn cross_matrix(u: &RVec) -> RMat {
    RMat::from_row_slice(3, 3, &[0.0, -u[2], u[1], u[2], 0.0, -u[0], -u[1], u[0], 0.0])
}

fn jacobi(ov: &Overrides, conjugate: bool) -> Result<Scenario> {
    let (m, n) = (3, 1);
    let u = boxed(
        &ov.u,
        BoxDomain::from_slices(&[-0.4, -0.4, -0.3], &[0.4, 0.4, 0.3])?,
        "u",
    )?;
    let chart = boxed(&ov.chart, BoxDomain::cube(2, 1.0), "chart")?;
    check_dims(&chart, &u, m, n)?;
    let eps = ov.epsilon.unwrap_or(0.25);
    let xi = move |y: &RVec| validate(cross_matrix(&sphere(Complex64::new(y[0], y[1]) * eps)), 1);
    let c1 = CVec::from_column_slice(&[
        Complex64::new(0.5, 0.0),
        Complex64::new(0.0, -0.5),
        Complex64::new(0.0, 0.0),
    ]);
    let c2 = CVec::from_column_slice(&[
        Complex64::new(0.05, 0.02),
        Complex64::new(0.0, -0.03),
        Complex64::new(0.04, 0.0),
    ]);
    let xi2 = xi;
    let sigma = move |y: &RVec| {
        let w = Complex64::new(y[0], y[1]);
        let s = if conjugate {
            c1.map(|c| c * w.conj())
        } else {
            c1.map(|c| c * w) + c2.map(|c| c * w * w)
        };
        match xi2(y) {
            Ok(f) => horizontal_section(&f, &s),
            Err(_) => RVec::from_element(3, f64::NAN),
        }
    };
    let builder = HoloFoliationSpec::new(chart.clone(), u.clone(), n, xi, sigma)?;
    let mut s = base(ScenarioKind::Builder, m, n, chart, u);
    s.builder = Some(builder);
    if conjugate {
        s.designated_failures = vec!["section_holomorphy".into(), "cr_sigma".into()];
    }
    Ok(s)
}

/// `ρ(r) e^{i(θ - a x3)}` with `ρ` chosen so that the map is horizontally
/// conformal; its fibres are helices of pitch `2π/a`.
pub(crate) fn screw_phi(a: f64) -> impl Fn(&RVec) -> RVec + Clone + Send + Sync + 'static {
    move |x: &RVec| {
        let r = x[0].hypot(x[1]);
        let s = (1.0 + a * a * r * r).sqrt();
        let rho = s.exp() * ((s - 1.0) / (s + 1.0)).sqrt();
        let z = Complex64::from_polar(rho, x[1].atan2(x[0]) - a * x[2]);
        RVec::from_column_slice(&[z.re, z.im])
    }
}

fn twist(ov: &Overrides) -> Result<Scenario> {
    let (m, n) = (3, 1);
    let u = boxed(
        &ov.u,
        BoxDomain::from_slices(&[0.6, -0.3, -0.3], &[1.2, 0.3, 0.3])?,
        "u",
    )?;
    let chart = boxed(&ov.chart, BoxDomain::from_slices(&[0.0, -1.5], &[2.0, 1.5])?, "chart")?;
    check_dims(&chart, &u, m, n)?;
    let a = ov.twist.unwrap_or(0.7);
    if !(a > 0.0) {
        return Err(Error::Scenario("field `twist`: must be positive".into()));
    }
    let phi = screw_phi(a);
    let phi1 = phi.clone();
    let mut s = base(ScenarioKind::Submersion, m, n, chart, u.clone());
    s.submersion = Some(SubmersionSpec::new(u, n, move |x| Ok(phi1(x))));
    s.closed_form_phi = Some(Arc::new(phi));
    s.designated_failures = vec!["omega_constancy".into(), "mixed_nijenhuis".into()];
    Ok(s)
}
