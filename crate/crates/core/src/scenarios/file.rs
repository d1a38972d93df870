//! JSON scenario documents.
//!
//! A document either refines a builtin:
//!
//! ```json
//! {"schema": "isofol-scenario/1", "name": "hopf-c3", "builtin": "hopf", "overrides": {"k": 2}}
//! ```
//!
//! or defines the data inline, with `xi` chosen from named analytic maps and
//! the section and submersion given as polynomial coefficient tables.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::catalog::{builtin, cross_matrix, hopf_xi, sphere, Overrides};
use super::{Scenario, ScenarioKind};
use crate::analyzer::SubmersionSpec;
use crate::builder::{horizontal_section, HoloFoliationSpec, SolverParams};
use crate::error::{Error, Result};
use crate::linalg::{BoxDomain, CVec, Complex64, RMat, RVec};
use crate::ograss::validate;
use crate::poly::Poly;

pub const SCENARIO_SCHEMA: &str = "isofol-scenario/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSpec {
    pub fn to_domain(&self, field: &str) -> Result<BoxDomain> {
        BoxDomain::from_slices(&self.lower, &self.upper)
            .map_err(|e| Error::Scenario(format!("field `{field}`: {e}")))
    }
}

/// Named analytic maps into the Grassmannian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum XiDef {
    /// A fixed point, given by the rows of `F`.
    Constant { rows: Vec<Vec<f64>> },
    /// `J (I - P_L)` for the complex line `L` through `(1, y)`.
    Hopf,
    /// `[u(εy)]ₓ` with `u` the inverse stereographic projection.
    Sphere { epsilon: f64 },
}

/// `coefficients · y^exponents`, a term of a vector-valued polynomial in the
/// complex chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionTerm {
    pub exponents: Vec<u32>,
    pub coefficients: Vec<[f64; 2]>,
}

/// `coefficient · x^exponents`, a term of a polynomial in the real
/// coordinates of `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub exponents: Vec<u32>,
    pub coefficient: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub overrides: Option<Overrides>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub chart: Option<BoxSpec>,
    #[serde(default)]
    pub u: Option<BoxSpec>,
    #[serde(default)]
    pub xi: Option<XiDef>,
    #[serde(default)]
    pub section: Option<Vec<SectionTerm>>,
    /// One coefficient table per complex component of `φ`.
    #[serde(default)]
    pub submersion: Option<Vec<Vec<PolyTerm>>>,
    #[serde(default)]
    pub solver: Option<SolverParams>,
    #[serde(default)]
    pub designated_failures: Option<Vec<String>>,
}

fn missing(field: &str) -> Error {
    Error::Scenario(format!("field `{field}` is required for inline scenarios"))
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let doc: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
    if doc.schema != SCENARIO_SCHEMA {
        return Err(Error::Scenario(format!(
            "field `schema`: expected \"{SCENARIO_SCHEMA}\", got \"{}\"",
            doc.schema
        )));
    }
    let mut scenario = match &doc.builtin {
        Some(name) => {
            if doc.xi.is_some() || doc.section.is_some() || doc.submersion.is_some() {
                return Err(Error::Scenario(
                    "field `builtin`: cannot be combined with inline `xi`, `section` or `submersion`".into(),
                ));
            }
            builtin(name, &doc.overrides.clone().unwrap_or_default())?
        }
        None => inline(&doc)?,
    };
    scenario.name = doc.name.clone();
    if let Some(d) = &doc.description {
        scenario.description = d.clone();
    }
    if doc.builtin.is_none() {
        scenario.anchor = "user-defined scenario".into();
    }
    if let Some(p) = &doc.solver {
        scenario.solver = p.clone();
    }
    if let Some(f) = &doc.designated_failures {
        scenario.designated_failures = f.clone();
    }
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn inline(doc: &ScenarioFile) -> Result<Scenario> {
    let m = doc.m.ok_or_else(|| missing("m"))?;
    let n = doc.n.ok_or_else(|| missing("n"))?;
    if n == 0 || 2 * n > m {
        return Err(Error::Scenario(format!("fields `m`, `n`: need 1 <= n <= m/2, got m = {m}, n = {n}")));
    }
    let chart = doc.chart.as_ref().ok_or_else(|| missing("chart"))?.to_domain("chart")?;
    let u = doc.u.as_ref().ok_or_else(|| missing("u"))?.to_domain("u")?;
    if chart.dim() != 2 * n {
        return Err(Error::Scenario(format!("field `chart`: expected dimension {}, got {}", 2 * n, chart.dim())));
    }
    if u.dim() != m {
        return Err(Error::Scenario(format!("field `u`: expected dimension {m}, got {}", u.dim())));
    }

    let builder = match &doc.xi {
        None => None,
        Some(def) => {
            let xi = xi_map(def, m, n)?;
            let terms = section_terms(doc.section.as_deref().unwrap_or(&[]), m, n)?;
            let xi2 = xi.clone();
            let sigma = move |y: &RVec| {
                let w: Vec<Complex64> = (0..n).map(|a| Complex64::new(y[2 * a], y[2 * a + 1])).collect();
                let mut s = CVec::zeros(m);
                for (e, c) in &terms {
                    let mono = e.iter().zip(&w).fold(Complex64::new(1.0, 0.0), |acc, (&p, z)| acc * z.powu(p));
                    s += c * mono;
                }
                match xi2(y) {
                    Ok(f) => horizontal_section(&f, &s),
                    Err(_) => RVec::from_element(m, f64::NAN),
                }
            };
            Some(HoloFoliationSpec::new(chart.clone(), u.clone(), n, move |y: &RVec| xi(y), sigma)?)
        }
    };
    let submersion = match &doc.submersion {
        None => None,
        Some(tables) => {
            if tables.len() != n {
                return Err(Error::Scenario(format!(
                    "field `submersion`: expected {n} components, got {}",
                    tables.len()
                )));
            }
            let polys = tables
                .iter()
                .enumerate()
                .map(|(a, t)| submersion_poly(t, m, a))
                .collect::<Result<Vec<_>>>()?;
            let polys = Arc::new(polys);
            Some(SubmersionSpec::new(u.clone(), n, move |x| {
                Ok(RVec::from_iterator(
                    2 * n,
                    polys.iter().flat_map(|p| {
                        let z = p.eval_real(x);
                        [z.re, z.im]
                    }),
                ))
            }))
        }
    };
    let kind = match (&builder, &submersion) {
        (Some(_), Some(_)) => ScenarioKind::Both,
        (Some(_), None) => ScenarioKind::Builder,
        (None, Some(_)) => ScenarioKind::Submersion,
        (None, None) => return Err(Error::Scenario("inline scenario needs `xi` or `submersion`".into())),
    };
    Ok(Scenario {
        name: String::new(),
        description: String::new(),
        anchor: String::new(),
        kind,
        m,
        n,
        chart,
        u,
        solver: SolverParams::default(),
        builder,
        submersion,
        closed_form_phi: None,
        zero_section: false,
        designated_failures: Vec::new(),
    })
}

type XiFn = Arc<dyn Fn(&RVec) -> Result<crate::ograss::OGPoint> + Send + Sync>;

fn xi_map(def: &XiDef, m: usize, n: usize) -> Result<XiFn> {
    match def {
        XiDef::Constant { rows } => {
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(Error::Scenario(format!("field `xi.rows`: expected a {m}x{m} matrix")));
            }
            let f = RMat::from_fn(m, m, |i, j| rows[i][j]);
            let point = validate(f, n).map_err(|e| Error::Scenario(format!("field `xi.rows`: {e}")))?;
            Ok(Arc::new(move |_| Ok(point.clone())))
        }
        XiDef::Hopf => {
            if m != 2 * n + 2 {
                return Err(Error::Scenario(format!("field `xi`: hopf needs m = 2n + 2, got m = {m}, n = {n}")));
            }
            Ok(Arc::new(hopf_xi(n)))
        }
        XiDef::Sphere { epsilon } => {
            if (m, n) != (3, 1) {
                return Err(Error::Scenario("field `xi`: sphere needs m = 3, n = 1".into()));
            }
            let eps = *epsilon;
            Ok(Arc::new(move |y: &RVec| {
                validate(cross_matrix(&sphere(Complex64::new(y[0], y[1]) * eps)), 1)
            }))
        }
    }
}

fn section_terms(terms: &[SectionTerm], m: usize, n: usize) -> Result<Vec<(Vec<u32>, CVec)>> {
    terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.exponents.len() != n {
                return Err(Error::Scenario(format!("field `section[{i}].exponents`: expected {n} entries")));
            }
            if t.coefficients.len() != m {
                return Err(Error::Scenario(format!("field `section[{i}].coefficients`: expected {m} entries")));
            }
            let c = CVec::from_iterator(m, t.coefficients.iter().map(|[re, im]| Complex64::new(*re, *im)));
            Ok((t.exponents.clone(), c))
        })
        .collect()
}

fn submersion_poly(terms: &[PolyTerm], m: usize, component: usize) -> Result<Poly> {
    for (i, t) in terms.iter().enumerate() {
        if t.exponents.len() != m {
            return Err(Error::Scenario(format!(
                "field `submersion[{component}][{i}].exponents`: expected {m} entries"
            )));
        }
    }
    Ok(Poly::from_terms(
        m,
        terms
            .iter()
            .map(|t| (t.exponents.clone(), Complex64::new(t.coefficient[0], t.coefficient[1]))),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_reference_with_overrides() {
        let s = parse_scenario(
            r#"{"schema": "isofol-scenario/1", "name": "hopf-c3", "builtin": "hopf", "overrides": {"k": 2}}"#,
        )
        .unwrap();
        assert_eq!(s.name, "hopf-c3");
        assert_eq!((s.m, s.n), (6, 2));
    }

    #[test]
    fn schema_is_mandatory() {
        let err = parse_scenario(r#"{"name": "x", "builtin": "hopf"}"#).unwrap_err();
        assert!(err.to_string().contains("schema"), "{err}");
        let err = parse_scenario(r#"{"schema": "other/2", "name": "x", "builtin": "hopf"}"#).unwrap_err();
        assert!(err.to_string().contains("field `schema`"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_scenario("{\n  \"schema\": \"isofol-scenario/1\",\n  \"name\": 3\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn inline_lines_in_r3() {
        let text = r#"{
            "schema": "isofol-scenario/1",
            "name": "inline-lines",
            "m": 3, "n": 1,
            "chart": {"lower": [-1, -1], "upper": [1, 1]},
            "u": {"lower": [-0.4, -0.4, -0.3], "upper": [0.4, 0.4, 0.3]},
            "xi": {"type": "sphere", "epsilon": 0.25},
            "section": [{"exponents": [1], "coefficients": [[0.5, 0], [0, -0.5], [0, 0]]}]
        }"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.kind, ScenarioKind::Builder);
        let spec = s.builder.unwrap();
        let r = spec.check_at(&RVec::from_column_slice(&[0.2, 0.1])).unwrap();
        assert!(r.sigma_holomorphy <= 1e-6 && r.vertical_sigma <= 1e-12);
    }

    #[test]
    fn inline_polynomial_submersion() {
        let text = r#"{
            "schema": "isofol-scenario/1",
            "name": "inline-projection",
            "m": 4, "n": 1,
            "chart": {"lower": [-2, -2], "upper": [2, 2]},
            "u": {"lower": [-1, -1, -1, -1], "upper": [1, 1, 1, 1]},
            "submersion": [[
                {"exponents": [1, 0, 0, 0], "coefficient": [1, 0]},
                {"exponents": [0, 1, 0, 0], "coefficient": [0, 1]}
            ]]
        }"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.kind, ScenarioKind::Submersion);
        let phi = s.submersion.unwrap().phi(&RVec::from_column_slice(&[0.3, 0.4, 0.0, 0.0])).unwrap();
        assert_eq!(phi, RVec::from_column_slice(&[0.3, 0.4]));
    }

    #[test]
    fn dimension_errors_name_the_field() {
        let text = r#"{
            "schema": "isofol-scenario/1", "name": "bad", "m": 3, "n": 1,
            "chart": {"lower": [-1], "upper": [1]},
            "u": {"lower": [0, 0, 0], "upper": [1, 1, 1]},
            "xi": {"type": "hopf"}
        }"#;
        let err = parse_scenario(text).unwrap_err();
        assert!(err.to_string().contains("field `chart`"), "{err}");
    }

    #[test]
    fn constant_xi_is_validated() {
        let text = r#"{
            "schema": "isofol-scenario/1", "name": "bad", "m": 2, "n": 1,
            "chart": {"lower": [-1, -1], "upper": [1, 1]},
            "u": {"lower": [0, 0], "upper": [1, 1]},
            "xi": {"type": "constant", "rows": [[0, -2], [2, 0]]}
        }"#;
        let err = parse_scenario(text).unwrap_err();
        assert!(err.to_string().contains("F^3 + F = 0"), "{err}");
    }
}
