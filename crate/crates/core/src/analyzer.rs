//! Inverse construction: from a submersion `φ` with affine fibres, recover
//! the f-structure `F^φ`, the map `Ω = F^φ` and its descent `ω` to the
//! leaf space, and the position-vector section `σ`.

use std::sync::Arc;

use crate::builder::HoloFoliationSpec;
use crate::error::{Error, Result};
use crate::fstruct::{self, vertical_frame, FField};
use crate::linalg::{
    complex_structure, directional_derivative, directional_derivative_five_point,
    five_point_jacobian, lstsq, unit, BoxDomain, RMat, RVec,
};
use crate::ograss::{
    bracket_representation_residual, d_phi_with_tol, j_grass, validate_with, OGPoint,
};

type PhiFn = dyn Fn(&RVec) -> Result<RVec> + Send + Sync;
type JacFn = dyn Fn(&RVec) -> Result<RMat> + Send + Sync;

/// Tolerance on the structure defect under which `F^φ` is accepted.
pub const PHWC_TOL: f64 = 1e-8;

/// A submersion from a box `U` onto a chart of `C^n`, with values stored as
/// `(re, im)` pairs.
#[derive(Clone)]
pub struct SubmersionSpec {
    u: BoxDomain,
    n: usize,
    phi: Arc<PhiFn>,
    jacobian: Option<Arc<JacFn>>,
}

impl std::fmt::Debug for SubmersionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubmersionSpec")
            .field("u", &self.u)
            .field("n", &self.n)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish_non_exhaustive()
    }
}

impl SubmersionSpec {
    pub fn new<P>(u: BoxDomain, n: usize, phi: P) -> Self
    where
        P: Fn(&RVec) -> Result<RVec> + Send + Sync + 'static,
    {
        SubmersionSpec {
            u,
            n,
            phi: Arc::new(phi),
            jacobian: None,
        }
    }

    /// Supplies `dφ` directly instead of by finite differences.
    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&RVec) -> Result<RMat> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn u(&self) -> &BoxDomain {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.u.dim()
    }

    pub fn phi(&self, x: &RVec) -> Result<RVec> {
        (self.phi)(x)
    }

    /// `dφ` at `x`, a `2n×m` matrix.
    pub fn jacobian(&self, x: &RVec) -> Result<RMat> {
        match &self.jacobian {
            Some(j) => j(x),
            None => five_point_jacobian(|p: &RVec| self.phi(p), x, None),
        }
    }
}

/// `F^φ` before validation, with its structure defect.
#[derive(Debug, Clone)]
pub struct RawStructure {
    pub f: RMat,
    /// `|F + F^T| + |F^3 + F|`.
    pub phwc: f64,
}

/// `F = Q_H D_H^{-1} J D_H Q_H^T`, where `Q_H` is an orthonormal basis of
/// the row space of `dφ` and `D_H = dφ Q_H`.
pub fn f_structure_raw(spec: &SubmersionSpec, x: &RVec) -> Result<RawStructure> {
    let d = spec.jacobian(x)?;
    let two_n = 2 * spec.n();
    if d.nrows() != two_n || d.ncols() != spec.m() {
        return Err(Error::Shape(format!("dφ is {}x{}", d.nrows(), d.ncols())));
    }
    let qr = d.transpose().qr();
    let r = qr.r();
    let diag = r.diagonal().map(f64::abs);
    if !(diag.min() > 1e-8 * diag.max()) {
        return Err(Error::NotSubmersion);
    }
    let q_h = qr.q();
    let d_h = &d * &q_h;
    let d_h_inv = d_h.clone().try_inverse().ok_or(Error::NotSubmersion)?;
    let j_h = d_h_inv * complex_structure(spec.n()) * d_h;
    let f = &q_h * j_h * q_h.transpose();
    let phwc = (&f + f.transpose()).norm() + (&f * &f * &f + &f).norm();
    Ok(RawStructure { f, phwc })
}

/// `F^φ(x)` and its structure defect; fails unless `φ` is pseudo
/// horizontally weakly conformal at `x` to within [`PHWC_TOL`].
pub fn f_structure_of(spec: &SubmersionSpec, x: &RVec) -> Result<(OGPoint, f64)> {
    let raw = f_structure_raw(spec, x)?;
    if !(raw.phwc <= PHWC_TOL) {
        return Err(Error::NotPhwc(raw.phwc));
    }
    let point = validate_with(raw.f, spec.n(), PHWC_TOL)?;
    Ok((point, raw.phwc))
}

/// `x ↦ F^φ(x)` as a field on `U`.
pub fn structure_field(spec: &SubmersionSpec) -> FField {
    let s = spec.clone();
    FField::new(spec.u().clone(), spec.n(), move |x| f_structure_of(&s, x).map(|(p, _)| p))
}

/// `|dφ F - i dφ|` at `x`.
pub fn horizontal_holomorphy_residual(spec: &SubmersionSpec, x: &RVec) -> Result<f64> {
    let (f, _) = f_structure_of(spec, x)?;
    let d = spec.jacobian(x)?;
    Ok((&d * f.f() - complex_structure(spec.n()) * &d).norm())
}

/// Largest derivative of `F^φ` along a vertical frame.
pub fn omega_constancy_residual(spec: &SubmersionSpec, x: &RVec) -> Result<f64> {
    let field = structure_field(spec);
    let f = field.matrix(x)?;
    let mut worst = 0.0f64;
    for z in vertical_frame(&f) {
        worst = worst.max(fstruct::nabla_along(&field, x, &z)?.norm());
    }
    Ok(worst)
}

/// `-F^φ(x)^2 x` together with its change when `x` moves along the fibre.
pub fn section_with_drift(spec: &SubmersionSpec, x: &RVec) -> Result<(RVec, f64)> {
    let (f, _) = f_structure_of(spec, x)?;
    let sigma = -(f.f() * (f.f() * x));
    let frame = vertical_frame(f.f());
    let Some(z) = frame.first() else {
        return Ok((sigma, 0.0));
    };
    let width = (spec.u().upper() - spec.u().lower()).min();
    let mut t = 0.05 * width;
    let mut other = None;
    while t > 1e-6 * width {
        for cand in [x + z * t, x - z * t] {
            if spec.u().contains(&cand) {
                other = Some(cand);
                break;
            }
        }
        if other.is_some() {
            break;
        }
        t *= 0.5;
    }
    let x2 = other.ok_or(Error::DomainMargin)?;
    let (f2, _) = f_structure_of(spec, &x2)?;
    let sigma2 = -(f2.f() * (f2.f() * &x2));
    let drift = (sigma2 - &sigma).norm();
    Ok((sigma, drift))
}

/// The position vector of the fibre through `x`.
pub fn section_of(spec: &SubmersionSpec, x: &RVec) -> Result<RVec> {
    let (sigma, drift) = section_with_drift(spec, x)?;
    if drift > 1e-8 {
        return Err(Error::FibresNotAffine(drift));
    }
    Ok(sigma)
}

/// Minimum-norm Newton iteration `s ← s - dφ⁺ (φ(s) - y)` from `start`.
pub fn retract(spec: &SubmersionSpec, start: &RVec, y: &RVec) -> Result<RVec> {
    let mut s = start.clone();
    let scale = 1.0 + y.norm();
    let mut polish = 0;
    for _ in 0..40 {
        let r = spec.phi(&s)? - y;
        let small = r.norm() <= 1e-14 * scale;
        if small {
            polish += 1;
            if polish > 1 || r.norm() == 0.0 {
                return Ok(s);
            }
        }
        let d = spec.jacobian(&s)?;
        let step = lstsq(&d, &RMat::from_column_slice(r.len(), 1, r.as_slice()))
            .ok_or(Error::RetractionFailed)?
            .column(0)
            .into_owned();
        let next = &s - step;
        if small && (spec.phi(&next)? - y).norm() >= r.norm() {
            return Ok(s);
        }
        s = next;
    }
    let r = spec.phi(&s)? - y;
    if r.norm() <= 1e-12 * scale {
        Ok(s)
    } else {
        Err(Error::RetractionFailed)
    }
}

/// The point of each fibre near `x`, as a function of the chart point.
fn local_section<'a>(spec: &'a SubmersionSpec, x: &'a RVec) -> impl Fn(&RVec) -> Result<RVec> + 'a {
    move |y: &RVec| retract(spec, x, y)
}

fn chart_directions(n: usize) -> Vec<(RVec, RVec)> {
    (0..n)
        .map(|a| (unit(2 * n, 2 * a), unit(2 * n, 2 * a + 1)))
        .collect()
}

/// `max |H dσ(iY) - F dσ(Y)|` over chart directions, differentiating the
/// position vector along a local section through `x`.
pub fn cr_sigma_residual(spec: &SubmersionSpec, x: &RVec) -> Result<f64> {
    let (f, _) = f_structure_of(spec, x)?;
    let y0 = spec.phi(x)?;
    let s = local_section(spec, x);
    let sigma = |y: &RVec| -> Result<RVec> {
        let p = s(y)?;
        let (fp, _) = f_structure_of(spec, &p)?;
        Ok(-(fp.f() * (fp.f() * &p)))
    };
    let h = -(f.f() * f.f());
    let mut worst = 0.0f64;
    for (e, ie) in chart_directions(spec.n()) {
        let d1: RVec = directional_derivative_five_point(sigma, &y0, &e, None)?;
        let d2: RVec = directional_derivative_five_point(sigma, &y0, &ie, None)?;
        worst = worst.max((&h * d2 - f.f() * d1).norm());
    }
    Ok(worst)
}

/// Derivatives `dω(Y), dω(iY)` of `ω = F^φ ∘ s` at `φ(x)` along each
/// complex chart direction.
fn omega_derivatives(spec: &SubmersionSpec, x: &RVec) -> Result<Vec<(RMat, RMat)>> {
    let y0 = spec.phi(x)?;
    let s = local_section(spec, x);
    let omega = |y: &RVec| -> Result<RMat> {
        let p = s(y)?;
        f_structure_of(spec, &p).map(|(f, _)| f.into_matrix())
    };
    chart_directions(spec.n())
        .into_iter()
        .map(|(e, ie)| {
            Ok((
                directional_derivative_five_point(omega, &y0, &e, None)?,
                directional_derivative_five_point(omega, &y0, &ie, None)?,
            ))
        })
        .collect()
}

/// `max |J_F dω(Y) - dω(iY)|`: the Cauchy–Riemann defect of `ω`.
pub fn omega_holomorphy_residual(spec: &SubmersionSpec, x: &RVec) -> Result<f64> {
    let (f, _) = f_structure_of(spec, x)?;
    let mut worst = 0.0f64;
    for (d1, d2) in omega_derivatives(spec, x)? {
        worst = worst.max((d2 - j_grass(f.f(), &d1)).norm());
    }
    Ok(worst)
}

/// `max |dΦ(dω(iY))(Z) - F dΦ(dω(Y))(Z)|` over chart directions `Y` and a
/// vertical frame `Z`.
pub fn z_equation_residual(spec: &SubmersionSpec, x: &RVec) -> Result<f64> {
    let (f, _) = f_structure_of(spec, x)?;
    let mut worst = 0.0f64;
    for (d1, d2) in omega_derivatives(spec, x)? {
        let a = d_phi_with_tol(&f, &d1, 1e-5)?;
        let b = d_phi_with_tol(&f, &d2, 1e-5)?;
        worst = worst.max((b.images - f.f() * a.images).norm());
    }
    Ok(worst)
}

/// `max_k |[A_k, F] - ∇_k F|` where `A_k` is the least-squares skew
/// representative of the coordinate derivative `∇_k F` of `Ω = F^φ`.
pub fn d_omega_bracket_residual(spec: &SubmersionSpec, x: &RVec) -> Result<f64> {
    d_omega_bracket_residual_of(&structure_field(spec), x)
}

pub fn d_omega_bracket_residual_of(field: &FField, x: &RVec) -> Result<f64> {
    let f = field.matrix(x)?;
    let mut worst = 0.0f64;
    for k in 0..field.m() {
        let b: RMat = directional_derivative(|p: &RVec| field.matrix(p), x, &unit(field.m(), k), None)?;
        worst = worst.max(bracket_representation_residual(&f, &b));
    }
    Ok(worst)
}

/// `max |N_F(X, Z)|` over horizontal `X` and vertical `Z`.
pub fn mixed_nijenhuis_residual(spec: &SubmersionSpec, x: &RVec) -> Result<f64> {
    fstruct::mixed_nijenhuis(&structure_field(spec), x)
}

/// Anchors in `U` used to reach the fibre over a chart point.
#[derive(Clone, Debug)]
pub struct LeafSpace {
    spec: SubmersionSpec,
    anchors: Arc<Vec<(RVec, RVec)>>,
}

impl LeafSpace {
    /// Anchors at the nodes of a `res`-per-axis grid of `U`.
    pub fn new(spec: SubmersionSpec, res: usize) -> Result<Self> {
        let anchors: Vec<(RVec, RVec)> = spec
            .u()
            .grid(res)
            .into_iter()
            .filter_map(|x| spec.phi(&x).ok().map(|y| (x, y)))
            .collect();
        if anchors.is_empty() {
            return Err(Error::NotSubmersion);
        }
        Ok(LeafSpace {
            spec,
            anchors: Arc::new(anchors),
        })
    }

    pub fn spec(&self) -> &SubmersionSpec {
        &self.spec
    }

    /// A point of the fibre over `y`, reached from the anchor whose image is
    /// closest to `y`.
    pub fn fibre_point(&self, y: &RVec) -> Result<RVec> {
        let (x, _) = self
            .anchors
            .iter()
            .min_by(|a, b| (&a.1 - y).norm().total_cmp(&(&b.1 - y).norm()))
            .expect("anchors are nonempty");
        retract(&self.spec, x, y)
    }

    /// `ω(y) = F^φ` at any point of the fibre over `y`.
    pub fn omega(&self, y: &RVec) -> Result<OGPoint> {
        let p = self.fibre_point(y)?;
        f_structure_of(&self.spec, &p).map(|(f, _)| f)
    }

    /// `σ(y)`, the position vector of the fibre over `y`.
    pub fn sigma(&self, y: &RVec) -> Result<RVec> {
        let p = self.fibre_point(y)?;
        let (f, _) = f_structure_of(&self.spec, &p)?;
        Ok(-(f.f() * (f.f() * p)))
    }
}

/// Default acceptance thresholds applied by [`roundtrip`].
pub const ROUNDTRIP_CHECKS: [(&str, f64); 4] = [
    ("phwc", 1e-8),
    ("omega_constancy", 1e-6),
    ("mixed_nijenhuis", 1e-6),
    ("cr_sigma", 1e-6),
];

fn run_check(name: &str, spec: &SubmersionSpec, x: &RVec) -> Result<f64> {
    match name {
        "phwc" => f_structure_raw(spec, x).map(|r| r.phwc),
        "omega_constancy" => omega_constancy_residual(spec, x),
        "mixed_nijenhuis" => mixed_nijenhuis_residual(spec, x),
        "cr_sigma" => cr_sigma_residual(spec, x),
        _ => unreachable!("unknown check {name}"),
    }
}

/// Assembles `(ω, σ)` into a forward spec over `chart` after checking the
/// analyzer identities at `samples`.
pub fn roundtrip(spec: &SubmersionSpec, chart: BoxDomain, samples: &[RVec]) -> Result<HoloFoliationSpec> {
    for (name, tol) in ROUNDTRIP_CHECKS {
        for x in samples {
            let residual = run_check(name, spec, x).unwrap_or(f64::INFINITY);
            if !(residual <= tol) {
                return Err(Error::CheckFailed {
                    check: name.to_string(),
                    residual,
                    tol,
                });
            }
        }
    }
    let leaves = LeafSpace::new(spec.clone(), 3)?;
    let leaves2 = leaves.clone();
    let m = spec.m();
    HoloFoliationSpec::new(
        chart,
        spec.u().clone(),
        spec.n(),
        move |y| leaves.omega(y),
        move |y| leaves2.sigma(y).unwrap_or_else(|_| RVec::from_element(m, f64::NAN)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fstruct::tests::{cross, hopf_closed_form};
    use crate::linalg::{from_complex, to_complex, CVec, Complex64};
    use crate::ograss::canonical_point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hopf() -> SubmersionSpec {
        let u = BoxDomain::from_slices(&[0.6, -0.4, -0.4, -0.4], &[1.4, 0.4, 0.4, 0.4]).unwrap();
        SubmersionSpec::new(u, 1, |x| {
            let z = to_complex(x);
            Ok(from_complex(&CVec::from_element(1, z[1] / z[0])))
        })
    }

    fn linear(offset: RVec) -> SubmersionSpec {
        SubmersionSpec::new(BoxDomain::cube(4, 1.0), 1, move |x| {
            Ok(RVec::from_column_slice(&[x[0] - offset[0], x[1] - offset[1]]))
        })
    }

    fn samples(spec: &SubmersionSpec, k: usize, seed: u64) -> Vec<RVec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = spec.u().shrink(0.2);
        (0..k).map(|_| inner.sample(&mut rng)).collect()
    }

    #[test]
    fn linear_projection_structure() {
        let spec = linear(RVec::zeros(4));
        let (f, r) = f_structure_of(&spec, &RVec::from_column_slice(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        assert!(r <= 1e-12);
        assert!((f.f() - canonical_point(4, 1).unwrap().f()).norm() <= 1e-10);
    }

    #[test]
    fn non_conformal_map_is_rejected() {
        let spec = SubmersionSpec::new(BoxDomain::cube(4, 1.0), 1, |x| {
            Ok(RVec::from_column_slice(&[x[0], x[1] + x[2]]))
        });
        let x = RVec::from_column_slice(&[0.1, 0.2, 0.3, 0.4]);
        assert!(f_structure_raw(&spec, &x).unwrap().phwc > 1e-3);
        assert!(matches!(f_structure_of(&spec, &x), Err(Error::NotPhwc(_))));
    }

    #[test]
    fn rank_deficient_map_is_rejected() {
        let spec = SubmersionSpec::new(BoxDomain::cube(4, 1.0), 1, |x| Ok(RVec::from_column_slice(&[x[0], x[0]])));
        let err = f_structure_of(&spec, &RVec::zeros(4)).unwrap_err();
        assert_eq!(err, Error::NotSubmersion);
    }

    #[test]
    fn hopf_structure_matches_closed_form() {
        let spec = hopf();
        for x in samples(&spec, 10, 1) {
            let (f, r) = f_structure_of(&spec, &x).unwrap();
            assert!(r <= 1e-7);
            assert!((f.f() - hopf_closed_form(&x)).norm() <= 1e-8);
            assert!(horizontal_holomorphy_residual(&spec, &x).unwrap() <= 1e-7);
        }
    }

    #[test]
    fn hopf_identities() {
        let spec = hopf();
        for x in samples(&spec, 4, 2) {
            assert!(omega_constancy_residual(&spec, &x).unwrap() <= 1e-6);
            assert!(mixed_nijenhuis_residual(&spec, &x).unwrap() <= 1e-6);
            assert!(d_omega_bracket_residual(&spec, &x).unwrap() <= 1e-6);
            assert!(section_of(&spec, &x).unwrap().norm() <= 1e-8);
            assert!(cr_sigma_residual(&spec, &x).unwrap() <= 1e-6);
            assert!(z_equation_residual(&spec, &x).unwrap() <= 1e-6);
            assert!(omega_holomorphy_residual(&spec, &x).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn linear_offset_section() {
        let offset = RVec::from_column_slice(&[0.2, -0.3, 0.5, 0.1]);
        let spec = linear(offset.clone());
        // the fibre over 0 passes through the offset
        let x = &offset + RVec::from_column_slice(&[0.0, 0.0, -0.4, 0.3]);
        let sigma = section_of(&spec, &x).unwrap();
        assert!((sigma - RVec::from_column_slice(&[0.2, -0.3, 0.0, 0.0])).norm() <= 1e-10);
        assert!(omega_constancy_residual(&spec, &x).unwrap() <= 1e-9);
        assert!(mixed_nijenhuis_residual(&spec, &x).unwrap() <= 1e-9);
    }

    /// Horizontally conformal map of R^3 whose fibres are helices.
    pub(crate) fn screw(a: f64) -> SubmersionSpec {
        let u = BoxDomain::from_slices(&[0.6, -0.3, -0.3], &[1.2, 0.3, 0.3]).unwrap();
        SubmersionSpec::new(u, 1, move |x| {
            let r = x[0].hypot(x[1]);
            let s = (1.0 + a * a * r * r).sqrt();
            let rho = s.exp() * ((s - 1.0) / (s + 1.0)).sqrt();
            let z = Complex64::from_polar(rho, x[1].atan2(x[0]) - a * x[2]);
            Ok(RVec::from_column_slice(&[z.re, z.im]))
        })
    }

    #[test]
    fn twisted_fibres_are_detected() {
        let spec = screw(0.7);
        let x = RVec::from_column_slice(&[0.9, 0.1, 0.05]);
        assert!(f_structure_raw(&spec, &x).unwrap().phwc <= 1e-8);
        assert!(omega_constancy_residual(&spec, &x).unwrap() > 1e-3);
        assert!(matches!(section_of(&spec, &x), Err(Error::FibresNotAffine(_))));
    }

    #[test]
    fn d_omega_holds_for_arbitrary_fields() {
        // not induced by any submersion
        let domain = BoxDomain::cube(3, 0.5).translate(&RVec::from_column_slice(&[1.0, 0.0, 0.0]));
        let field = FField::new(domain, 1, |x| {
            let u = RVec::from_column_slice(&[x[0] * x[0], x[1] + x[2] * x[0], 0.3 - x[2]]);
            crate::ograss::validate(cross(&(&u / u.norm())), 1)
        });
        let x = RVec::from_column_slice(&[1.1, 0.2, -0.1]);
        assert!(d_omega_bracket_residual_of(&field, &x).unwrap() <= 1e-6);
    }

    #[test]
    fn retraction_lands_on_fibre() {
        let spec = hopf();
        let x = RVec::from_column_slice(&[1.0, 0.1, 0.2, -0.1]);
        let y = RVec::from_column_slice(&[0.3, 0.05]);
        let s = retract(&spec, &x, &y).unwrap();
        assert!((spec.phi(&s).unwrap() - y).norm() <= 1e-13);
    }

    #[test]
    fn leaf_space_recovers_hopf_data() {
        let spec = hopf();
        let leaves = LeafSpace::new(spec, 3).unwrap();
        let y = RVec::from_column_slice(&[0.2, -0.1]);
        let p = leaves.fibre_point(&y).unwrap();
        assert!((leaves.omega(&y).unwrap().f() - hopf_closed_form(&p)).norm() <= 1e-8);
        assert!(leaves.sigma(&y).unwrap().norm() <= 1e-8);
    }

    #[test]
    fn isometry_invariance() {
        let spec = hopf();
        let q = crate::ograss::expm(&crate::ograss::random_skew(4, &mut ChaCha8Rng::seed_from_u64(3)));
        let qt = q.transpose();
        let center = spec.u().center();
        let s1 = spec.clone();
        let qt1 = qt.clone();
        // φ∘Q^T on the rotated domain, sampled around the rotated center
        let rotated = SubmersionSpec::new(BoxDomain::cube(4, 2.0), 1, move |x| s1.phi(&(&qt1 * x)));
        let x = &center + RVec::from_column_slice(&[0.1, -0.05, 0.02, 0.1]);
        let qx = &q * &x;
        let a = omega_constancy_residual(&spec, &x).unwrap();
        let b = omega_constancy_residual(&rotated, &qx).unwrap();
        assert!((a - b).abs() <= 1e-8);
        let a = d_omega_bracket_residual(&spec, &x).unwrap();
        let b = d_omega_bracket_residual(&rotated, &qx).unwrap();
        assert!((a - b).abs() <= 1e-8);
    }
}
