use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{CheckRecord, ReportMetadata, ResidualReport, REPORT_SCHEMA};
use super::Scenario;
use crate::analyzer::{self, SubmersionSpec};
use crate::builder::{FoliationChart, SolverParams};
use crate::error::{Error, Result};
use crate::fstruct::{self, FField};
use crate::linalg::{complexify, RVec};
use crate::ograss::{
    ad_quartic_residual, check_dphi_complex_linear, point_residuals, project_t_plus, random_tangent,
    t_plus_membership_residual, OGPoint,
};

/// A named check with its default tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckDef {
    pub name: &'static str,
    pub anchor: &'static str,
    pub tol: f64,
    /// Informational checks are reported without affecting the verdict.
    pub enabled: bool,
}

const fn def(name: &'static str, anchor: &'static str, tol: f64) -> CheckDef {
    CheckDef {
        name,
        anchor,
        tol,
        enabled: true,
    }
}

const CHECKS: [CheckDef; 34] = [
    def("validate", "F + F^T = 0, F^3 + F = 0, rank 2n", 1e-10),
    def("ad_quartic", "(ad^2 + 1)(ad^2 + 4) = 0 on tangents", 1e-8),
    def("ad_quartic_printed_defect", "ad^4 + 5 ad^2 + 1 acts as 3 on tangents", 1e-8),
    def("dphi_complex_linear", "dPhi(J B) = F dPhi(B)", 1e-8),
    def("t_plus_membership", "T+ maps V- into V0 + V+ and V0 into V+", 1e-8),
    def("xi_holomorphy", "xi holomorphic into the Grassmannian", 1e-6),
    def("section_holomorphy", "class of sigma is a holomorphic section of the quotient", 1e-6),
    def("section_horizontal", "sigma lies in im xi", 1e-10),
    def("solver_residual", "xi(phi(v)) (v - sigma(phi(v))) = 0", 1e-10),
    def("certification", "perturbed seeds converge to one leaf", 1e-8),
    def("totally_geodesic", "phi constant along affine leaves", 1e-8),
    def("sphh", "H (grad_X F) Y = 0 for horizontal Y", 1e-6),
    def("phh", "H (grad_X F) Y = 0 for horizontal X, Y", 1e-6),
    def("sphh_alternate", "H grad_X (F Y) = F grad_X Y for horizontal Y", 1e-6),
    def("leaf_distance", "v lies on the leaf it solves to", 1e-9),
    def("closed_form_phi", "solved phi agrees with its closed form", 1e-8),
    def("horizontal_integrability", "H N_F vanishes on horizontal pairs", 1e-6),
    CheckDef {
        name: "partial_integrability",
        anchor: "N_F on horizontal pairs (fails for contact distributions)",
        tol: 1e-6,
        enabled: false,
    },
    def("phwc", "pullback quotient of phi is isotropic", 1e-8),
    def("horizontal_holomorphy", "dphi F = i dphi", 1e-7),
    def("omega_constancy", "F^phi constant along fibres", 1e-6),
    def("mixed_nijenhuis", "N_F(X, Z) = 0 for horizontal X, vertical Z", 1e-6),
    def("d_omega_bracket", "[dOmega(X), F] = grad_X F", 1e-6),
    def("cr_sigma", "sigma holomorphic as a section of the quotient bundle", 1e-6),
    def("z_equation", "dPhi(domega(J Y)) = F dPhi(domega(Y)) on fibre directions", 1e-6),
    def("section_independence", "-F^2 x constant along fibres", 1e-8),
    def("section_match", "recovered sigma equals the configured section", 1e-7),
    def("omega_holomorphy", "omega holomorphic into the Grassmannian", 1e-6),
    def("omega_match", "recovered omega equals the configured xi", 1e-7),
    def("roundtrip_phi", "rebuilt phi reproduces phi", 1e-6),
    def("roundtrip_omega_sigma", "rebuilt foliation reproduces (omega, sigma)", 1e-6),
    def("zero_section", "every fibre passes through the origin", 1e-8),
    CheckDef {
        name: "seed_coverage",
        anchor: "fraction of the seed grid left unsolved",
        tol: 0.0,
        enabled: false,
    },
    def("solver_condition", "Gauss-Newton normal matrix condition number", 1e8),
];

pub fn check_catalog() -> &'static [CheckDef] {
    &CHECKS
}

fn lookup(name: &str) -> &'static CheckDef {
    CHECKS.iter().find(|c| c.name == name).expect("check is catalogued")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol_overrides: BTreeMap<String, f64>,
    /// Cap on the points used for the round trip.
    pub roundtrip_samples: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            samples: 50,
            seed: 1,
            tol_overrides: BTreeMap::new(),
            roundtrip_samples: 100,
        }
    }
}

struct Context<'a> {
    scenario: &'a Scenario,
    chart: Option<FoliationChart>,
    induced: Option<FField>,
    sub: SubmersionSpec,
    provided_sub: bool,
}

type Outcome = Vec<(&'static str, Result<f64>)>;

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn applicable(ctx: &Context<'_>) -> Vec<&'static str> {
    let s = ctx.scenario;
    let mut names = vec![
        "validate",
        "ad_quartic",
        "ad_quartic_printed_defect",
        "dphi_complex_linear",
        "t_plus_membership",
    ];
    if ctx.chart.is_some() {
        names.extend([
            "xi_holomorphy",
            "section_holomorphy",
            "section_horizontal",
            "solver_residual",
            "solver_condition",
            "seed_coverage",
            "certification",
            "totally_geodesic",
            "sphh",
            "phh",
            "sphh_alternate",
            "leaf_distance",
        ]);
        if s.closed_form_phi.is_some() {
            names.push("closed_form_phi");
        }
        names.extend(["horizontal_integrability", "partial_integrability"]);
    }
    names.extend([
        "phwc",
        "horizontal_holomorphy",
        "omega_constancy",
        "mixed_nijenhuis",
        "d_omega_bracket",
        "cr_sigma",
        "z_equation",
        "section_independence",
    ]);
    if s.builder.is_some() {
        names.push("section_match");
    }
    if s.zero_section {
        names.push("zero_section");
    }
    names.push("omega_holomorphy");
    if s.builder.is_some() && ctx.provided_sub {
        names.push("omega_match");
    }
    names.extend(["roundtrip_phi", "roundtrip_omega_sigma"]);
    names
}

fn grassmann_checks(p: &OGPoint, rng: &mut ChaCha8Rng, out: &mut Outcome) {
    let t = random_tangent(p, rng);
    let b = t.matrix();
    let q = ad_quartic_residual(p, b);
    out.push(("validate", Ok(point_residuals(p.f(), p.n()).max_residual())));
    out.push(("ad_quartic", Ok(q.consistent)));
    out.push(("ad_quartic_printed_defect", Ok((q.printed - 3.0).abs())));
    out.push(("dphi_complex_linear", Ok(check_dphi_complex_linear(p, b))));
    let a = project_t_plus(p.f(), &complexify(b));
    out.push(("t_plus_membership", Ok(t_plus_membership_residual(p.f(), &a))));
}

fn builder_checks(ctx: &Context<'_>, chart: &FoliationChart, x: &RVec, rng: &mut ChaCha8Rng, out: &mut Outcome) {
    let spec = chart.spec();
    let names = [
        "xi_holomorphy",
        "section_holomorphy",
        "section_horizontal",
        "solver_residual",
        "solver_condition",
        "certification",
        "totally_geodesic",
        "sphh",
        "phh",
        "sphh_alternate",
        "leaf_distance",
        "closed_form_phi",
        "horizontal_integrability",
        "partial_integrability",
    ];
    let solution = match chart.solve_detailed(x) {
        Ok(s) => s,
        Err(e) => {
            for n in names {
                if n != "closed_form_phi" || ctx.scenario.closed_form_phi.is_some() {
                    out.push((n, Err(e.clone())));
                }
            }
            return;
        }
    };
    let y = &solution.y;
    match spec.check_at(y) {
        Ok(r) => {
            out.push(("xi_holomorphy", Ok(r.xi_holomorphy)));
            out.push(("section_holomorphy", Ok(r.sigma_holomorphy)));
            out.push(("section_horizontal", Ok(r.vertical_sigma)));
        }
        Err(e) => {
            for n in ["xi_holomorphy", "section_holomorphy", "section_horizontal"] {
                out.push((n, Err(e.clone())));
            }
        }
    }
    out.push(("solver_residual", Ok(solution.residual)));
    out.push(("solver_condition", Ok(solution.condition)));
    out.push(("certification", chart.certify(x).map(|c| c.spread)));
    out.push(("totally_geodesic", chart.totally_geodesic_residual(x, 2, rng)));
    let ff = ctx.induced.as_ref().expect("induced field exists with a chart");
    match fstruct::sphh_residual(ff, x) {
        Ok(r) => {
            out.push(("sphh", Ok(r.sphh)));
            out.push(("phh", Ok(r.phh)));
            out.push(("sphh_alternate", Ok(r.alternate)));
        }
        Err(e) => {
            for n in ["sphh", "phh", "sphh_alternate"] {
                out.push((n, Err(e.clone())));
            }
        }
    }
    out.push(("leaf_distance", chart.leaf_through(x).map(|l| l.distance)));
    if let Some(cf) = &ctx.scenario.closed_form_phi {
        out.push(("closed_form_phi", Ok((cf(x) - y).norm())));
    }
    match fstruct::partial_integrability_residual(ff, x) {
        Ok(r) => {
            out.push(("horizontal_integrability", Ok(r.horizontal)));
            out.push(("partial_integrability", Ok(r.full)));
        }
        Err(e) => {
            out.push(("horizontal_integrability", Err(e.clone())));
            out.push(("partial_integrability", Err(e)));
        }
    }
}

fn analyzer_checks(ctx: &Context<'_>, x: &RVec, out: &mut Outcome) {
    let sub = &ctx.sub;
    let s = ctx.scenario;
    out.push(("phwc", analyzer::f_structure_raw(sub, x).map(|r| r.phwc)));
    out.push(("horizontal_holomorphy", analyzer::horizontal_holomorphy_residual(sub, x)));
    out.push(("omega_constancy", analyzer::omega_constancy_residual(sub, x)));
    out.push(("mixed_nijenhuis", analyzer::mixed_nijenhuis_residual(sub, x)));
    out.push(("d_omega_bracket", analyzer::d_omega_bracket_residual(sub, x)));
    out.push(("cr_sigma", analyzer::cr_sigma_residual(sub, x)));
    out.push(("z_equation", analyzer::z_equation_residual(sub, x)));
    let section = analyzer::section_with_drift(sub, x);
    out.push(("section_independence", section.as_ref().map(|(_, d)| *d).map_err(Clone::clone)));
    let y = sub.phi(x);
    if let Some(b) = &s.builder {
        let r = section
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|(sigma, _)| Ok((sigma - b.sigma(y.as_ref().map_err(Clone::clone)?)).norm()));
        out.push(("section_match", r));
    }
    if s.zero_section {
        out.push(("zero_section", section.as_ref().map(|(sigma, _)| sigma.norm()).map_err(Clone::clone)));
    }
    out.push(("omega_holomorphy", analyzer::omega_holomorphy_residual(sub, x)));
    if let (Some(b), true) = (&s.builder, ctx.provided_sub) {
        let r = (|| {
            let (f, _) = analyzer::f_structure_of(sub, x)?;
            Ok(f.distance(&b.xi(&y.clone()?)?))
        })();
        out.push(("omega_match", r));
    }
}

fn evaluate_sample(ctx: &Context<'_>, seed: u64, index: usize) -> Outcome {
    let mut rng = sample_rng(seed, index);
    let x = ctx.scenario.u.shrink(0.2).sample(&mut rng);
    let mut out = Outcome::new();
    let point = match &ctx.chart {
        Some(chart) => chart
            .solve_phi(&x)
            .and_then(|y| chart.spec().xi(&y)),
        None => analyzer::f_structure_of(&ctx.sub, &x).map(|(p, _)| p),
    };
    match point {
        Ok(p) => grassmann_checks(&p, &mut rng, &mut out),
        Err(e) => {
            for n in ["validate", "ad_quartic", "ad_quartic_printed_defect", "dphi_complex_linear", "t_plus_membership"] {
                out.push((n, Err(e.clone())));
            }
        }
    }
    if let Some(chart) = &ctx.chart {
        builder_checks(ctx, chart, &x, &mut rng, &mut out);
    }
    analyzer_checks(ctx, &x, &mut out);
    out
}

/// Round-trip chart: a coarse seed grid keeps the rebuilt solver cheap.
fn roundtrip_params(base: &SolverParams) -> SolverParams {
    SolverParams {
        seed_resolution: 3,
        chart_resolution: 9,
        ..base.clone()
    }
}

fn roundtrip_checks(ctx: &Context<'_>, seed: u64, count: usize) -> Vec<Outcome> {
    let s = ctx.scenario;
    let points: Vec<RVec> = (0..count)
        .map(|i| s.u.shrink(0.2).sample(&mut sample_rng(seed, i)))
        .collect();
    let rebuilt = analyzer::roundtrip(&ctx.sub, s.chart.clone(), &points)
        .and_then(|spec| FoliationChart::new(spec, s.u.clone(), roundtrip_params(&s.solver)));
    let rebuilt = match rebuilt {
        Ok(c) => c,
        Err(e) => {
            return (0..count)
                .map(|_| vec![("roundtrip_phi", Err(e.clone())), ("roundtrip_omega_sigma", Err(e.clone()))])
                .collect()
        }
    };
    let rebuilt_sub = rebuilt.as_submersion();
    points
        .par_iter()
        .map(|x| {
            let phi = (|| Ok((rebuilt.solve_phi(x)? - ctx.sub.phi(x)?).norm()))();
            let omega_sigma = (|| {
                let (f0, _) = analyzer::f_structure_of(&ctx.sub, x)?;
                let (f1, _) = analyzer::f_structure_of(&rebuilt_sub, x)?;
                let s0 = -(f0.f() * (f0.f() * x));
                let s1 = -(f1.f() * (f1.f() * x));
                Ok(f0.distance(&f1).max((s1 - s0).norm()))
            })();
            vec![("roundtrip_phi", phi), ("roundtrip_omega_sigma", omega_sigma)]
        })
        .collect()
}

fn aggregate(def: &CheckDef, tol: f64, values: &[&Result<f64>]) -> CheckRecord {
    let mut max: Option<f64> = None;
    let mut sum = 0.0;
    let mut evaluated = 0usize;
    let mut failures = 0usize;
    let mut error = None;
    for v in values {
        match v {
            Ok(r) if r.is_finite() => {
                evaluated += 1;
                sum += r;
                max = Some(max.map_or(*r, |m: f64| m.max(*r)));
                if !(*r <= tol) {
                    failures += 1;
                }
            }
            Ok(r) => {
                failures += 1;
                error.get_or_insert_with(|| format!("non-finite residual {r}"));
            }
            Err(e) => {
                failures += 1;
                error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    CheckRecord {
        name: def.name.to_string(),
        anchor: def.anchor.to_string(),
        samples: values.len(),
        max,
        mean: (evaluated > 0).then(|| sum / evaluated as f64),
        tol,
        pass: failures == 0 && evaluated > 0,
        enabled: def.enabled,
        failures,
        error,
    }
}

/// Runs every check applicable to `scenario` at points drawn from `U`
/// shrunk by a fifth. Sample `i` draws from stream `i` of a ChaCha8
/// generator seeded with `seed`, so reports are independent of scheduling.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<ResidualReport> {
    for (name, tol) in &opts.tol_overrides {
        if !CHECKS.iter().any(|c| c.name == name) {
            return Err(Error::Scenario(format!("unknown check `{name}` in tolerance override")));
        }
        if !(tol.is_finite() && *tol >= 0.0) {
            return Err(Error::Scenario(format!("tolerance for `{name}` must be a finite non-negative number")));
        }
    }
    if opts.samples == 0 {
        return Err(Error::Scenario("sample count must be positive".into()));
    }
    let chart = match &scenario.builder {
        Some(spec) => Some(FoliationChart::new(spec.clone(), scenario.u.clone(), scenario.solver.clone())?),
        None => None,
    };
    let (sub, provided_sub) = match (&scenario.submersion, &chart) {
        (Some(s), _) => (s.clone(), true),
        (None, Some(c)) => (c.as_submersion(), false),
        (None, None) => return Err(Error::Scenario("scenario defines neither a builder nor a submersion".into())),
    };
    let ctx = Context {
        scenario,
        induced: chart.as_ref().map(FoliationChart::induced_ffield),
        chart,
        sub,
        provided_sub,
    };

    let mut outcomes: Vec<Outcome> = (0..opts.samples)
        .into_par_iter()
        .map(|i| evaluate_sample(&ctx, opts.seed, i))
        .collect();
    if let Some(chart) = &ctx.chart {
        let coverage = 1.0 - chart.seeded_fraction();
        outcomes.push(vec![("seed_coverage", Ok(coverage))]);
    }
    outcomes.extend(roundtrip_checks(&ctx, opts.seed, opts.samples.min(opts.roundtrip_samples)));

    let mut by_name: BTreeMap<&str, Vec<&Result<f64>>> = BTreeMap::new();
    for o in &outcomes {
        for (name, r) in o {
            by_name.entry(name).or_default().push(r);
        }
    }
    let checks: Vec<CheckRecord> = applicable(&ctx)
        .into_iter()
        .map(|name| {
            let def = lookup(name);
            let tol = opts.tol_overrides.get(name).copied().unwrap_or(def.tol);
            aggregate(def, tol, by_name.get(name).map_or(&[][..], |v| v.as_slice()))
        })
        .collect();
    let pass = checks.iter().filter(|c| c.enabled).all(|c| c.pass);
    Ok(ResidualReport {
        schema: REPORT_SCHEMA.to_string(),
        scenario: scenario.name.clone(),
        seed: opts.seed,
        samples: opts.samples,
        checks,
        pass,
        metadata: ReportMetadata {
            solver: scenario.solver.clone(),
            first_derivative: "central, h = cbrt(eps) max(1, |x|)".into(),
            nested_derivative: "five-point, h = eps^(1/5) max(1, |x|)".into(),
            sample_box: "U shrunk about its center by 20%".into(),
            tol_overrides: opts.tol_overrides.clone(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{builtin, Overrides};

    #[test]
    fn catalog_names_are_unique() {
        let mut names: Vec<_> = CHECKS.iter().map(|c| c.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
        assert!(CHECKS.iter().all(|c| !c.anchor.is_empty()));
    }

    #[test]
    fn unknown_override_is_rejected() {
        let s = builtin("linear", &Overrides::default()).unwrap();
        let mut opts = RunOptions::default();
        opts.tol_overrides.insert("nope".into(), 1.0);
        assert!(matches!(run(&s, &opts), Err(Error::Scenario(_))));
    }

    #[test]
    fn linear_passes() {
        let s = builtin("linear", &Overrides::default()).unwrap();
        let opts = RunOptions {
            samples: 4,
            roundtrip_samples: 4,
            ..RunOptions::default()
        };
        let report = run(&s, &opts).unwrap();
        assert!(report.pass, "{}", report.summary());
        assert!(report.check("closed_form_phi").unwrap().max.unwrap() <= 1e-10);
    }

    #[test]
    fn samples_are_scheduling_independent() {
        let a = sample_rng(3, 5);
        let b = sample_rng(3, 5);
        assert_eq!(a, b);
        assert_ne!(sample_rng(3, 5), sample_rng(3, 6));
    }
}
