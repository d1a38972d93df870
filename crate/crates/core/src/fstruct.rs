//! f-structure fields on Euclidean domains.
//!
//! The connection is the flat one, so covariant derivatives are
//! directional derivatives of matrix fields. Tensorial quantities such as
//! the Nijenhuis tensor are evaluated on constant extensions of vectors.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{
    directional_derivative, gram_schmidt, max_abs, unit, BoxDomain, CMat, RMat, RVec,
};
use crate::ograss::{point_residuals, OGPoint};
use crate::poly::Poly;

type PointFn = dyn Fn(&RVec) -> Result<OGPoint> + Send + Sync;
type VecFn = dyn Fn(&RVec) -> RVec + Send + Sync;

/// A smooth field of points of the Grassmannian over a box.
#[derive(Clone)]
pub struct FField {
    domain: BoxDomain,
    n: usize,
    eval: Arc<PointFn>,
}

impl std::fmt::Debug for FField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FField")
            .field("domain", &self.domain)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl FField {
    pub fn new<F>(domain: BoxDomain, n: usize, eval: F) -> Self
    where
        F: Fn(&RVec) -> Result<OGPoint> + Send + Sync + 'static,
    {
        FField {
            domain,
            n,
            eval: Arc::new(eval),
        }
    }

    pub fn constant(domain: BoxDomain, point: OGPoint) -> Self {
        let n = point.n();
        FField::new(domain, n, move |_| Ok(point.clone()))
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.domain.dim()
    }

    pub fn eval(&self, x: &RVec) -> Result<OGPoint> {
        (self.eval)(x)
    }

    pub fn matrix(&self, x: &RVec) -> Result<RMat> {
        self.eval(x).map(OGPoint::into_matrix)
    }

    /// Largest ratio `|F(x) - F(x')| / |x - x'|` over consecutive pairs.
    pub fn lipschitz_estimate(&self, samples: &[RVec]) -> Result<f64> {
        let mut l = 0.0f64;
        for pair in samples.windows(2) {
            let d = (&pair[0] - &pair[1]).norm();
            if d > 0.0 {
                let df = (self.matrix(&pair[0])? - self.matrix(&pair[1])?).norm();
                l = l.max(df / d);
            }
        }
        Ok(l)
    }

    /// Largest validate residual over the samples.
    pub fn max_point_residual(&self, samples: &[RVec]) -> Result<f64> {
        let mut worst = 0.0f64;
        for x in samples {
            let p = self.eval(x)?;
            worst = worst.max(point_residuals(p.f(), self.n).max_residual());
        }
        Ok(worst)
    }
}

/// A smooth vector field.
#[derive(Clone)]
pub struct VectorField {
    eval: Arc<VecFn>,
}

impl VectorField {
    pub fn new<F>(eval: F) -> Self
    where
        F: Fn(&RVec) -> RVec + Send + Sync + 'static,
    {
        VectorField {
            eval: Arc::new(eval),
        }
    }

    pub fn constant(v: RVec) -> Self {
        VectorField::new(move |_| v.clone())
    }

    pub fn eval(&self, x: &RVec) -> RVec {
        (self.eval)(x)
    }
}

/// `(-F^2 v, (I + F^2) v)`.
pub fn hv_split(f: &RMat, v: &RVec) -> (RVec, RVec) {
    let vertical = v + f * (f * v);
    let horizontal = v - &vertical;
    (horizontal, vertical)
}

/// `∇_X F` at `x`.
pub fn nabla_f(ff: &FField, x_field: &VectorField, x: &RVec) -> Result<RMat> {
    nabla_along(ff, x, &x_field.eval(x))
}

/// `∇_v F` at `x` for a fixed direction `v`.
pub fn nabla_along(ff: &FField, x: &RVec, v: &RVec) -> Result<RMat> {
    if v.norm() == 0.0 {
        return Ok(RMat::zeros(ff.m(), ff.m()));
    }
    directional_derivative(|p: &RVec| ff.matrix(p), x, v, Some(ff.domain()))
}

fn vec_derivative(field: &VectorField, x: &RVec, v: &RVec, domain: &BoxDomain) -> Result<RVec> {
    if v.norm() == 0.0 {
        return Ok(RVec::zeros(x.len()));
    }
    directional_derivative(|p: &RVec| Ok(field.eval(p)), x, v, Some(domain))
}

/// Pointwise first-order data of a vector field `X` paired with `F`.
struct Jet<'a> {
    ff: &'a FField,
    x: &'a RVec,
    f: RMat,
}

impl Jet<'_> {
    /// Derivative of `X` along `v`.
    fn d(&self, field: &VectorField, v: &RVec) -> Result<RVec> {
        vec_derivative(field, self.x, v, self.ff.domain())
    }

    /// Derivative of `F X` along `v`: `(∇_v F) X + F (D_v X)`.
    fn d_fx(&self, field: &VectorField, v: &RVec) -> Result<RVec> {
        let df = nabla_along(self.ff, self.x, v)?;
        Ok(df * field.eval(self.x) + &self.f * self.d(field, v)?)
    }
}

/// `N_F(X,Y) = [FX,FY] - F[FX,Y] - F[X,FY] + F^2[X,Y]` with brackets
/// `[A,B] = D_A B - D_B A`.
pub fn nijenhuis(ff: &FField, xf: &VectorField, yf: &VectorField, x: &RVec) -> Result<RVec> {
    let f = ff.matrix(x)?;
    let jet = Jet { ff, x, f };
    let xv = xf.eval(x);
    let yv = yf.eval(x);
    let fx = &jet.f * &xv;
    let fy = &jet.f * &yv;

    let fx_fy = jet.d_fx(yf, &fx)? - jet.d_fx(xf, &fy)?;
    let fx_y = jet.d(yf, &fx)? - jet.d_fx(xf, &yv)?;
    let x_fy = jet.d_fx(yf, &xv)? - jet.d(xf, &fy)?;
    let x_y = jet.d(yf, &xv)? - jet.d(xf, &yv)?;

    let f = &jet.f;
    Ok(fx_fy - f * (fx_y + x_fy) + f * (f * x_y))
}

/// The Nijenhuis tensor on two vectors at `x`, through their constant
/// extensions.
pub fn nijenhuis_vectors(ff: &FField, x: &RVec, u: &RVec, v: &RVec) -> Result<RVec> {
    let f = ff.matrix(x)?;
    let fu = &f * u;
    let fv = &f * v;
    let d_fu = nabla_along(ff, x, &fu)?;
    let d_fv = nabla_along(ff, x, &fv)?;
    let d_u = nabla_along(ff, x, u)?;
    let d_v = nabla_along(ff, x, v)?;
    Ok(d_fu * v - d_fv * u + &f * (d_v * u) - &f * (d_u * v))
}

/// Orthonormal frame of `im F(x)`, from the projected coordinate vectors
/// in index order.
pub fn horizontal_frame(f: &RMat) -> Vec<RVec> {
    let m = f.nrows();
    let proj = -(f * f);
    let rank = (proj.trace().round().max(0.0)) as usize;
    gram_schmidt((0..m).map(|k| &proj * unit(m, k)), rank, 1e-6)
}

/// Orthonormal frame of `ker F(x)`.
pub fn vertical_frame(f: &RMat) -> Vec<RVec> {
    let m = f.nrows();
    let proj = RMat::identity(m, m) + f * f;
    let rank = (proj.trace().round().max(0.0)) as usize;
    gram_schmidt((0..m).map(|k| &proj * unit(m, k)), rank, 1e-6)
}

pub fn coordinate_frame(m: usize) -> Vec<RVec> {
    (0..m).map(|k| unit(m, k)).collect()
}

/// Residuals of the partial parallelism conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphhResidual {
    /// `max |H (∇_X F) Y|` over coordinate `X` and horizontal `Y`.
    pub sphh: f64,
    /// The same with `X` horizontal.
    pub phh: f64,
    /// `max |H ∇_X (F Y) - F ∇_X Y|` for the horizontal fields `Y = H Y0`.
    pub alternate: f64,
}

pub fn sphh_residual(ff: &FField, x: &RVec) -> Result<SphhResidual> {
    let f = ff.matrix(x)?;
    let h = -(&f * &f);
    let m = ff.m();
    let horizontal = horizontal_frame(&f);
    let mut out = SphhResidual {
        sphh: 0.0,
        phh: 0.0,
        alternate: 0.0,
    };
    let derivs = coordinate_frame(m)
        .iter()
        .map(|e| nabla_along(ff, x, e))
        .collect::<Result<Vec<_>>>()?;
    for df in &derivs {
        // ∇_{e_k} H = -(dF F + F dF)
        let dh = -(df * &f + &f * df);
        for y in &horizontal {
            let r = (&h * (df * y)).norm();
            out.sphh = out.sphh.max(r);
            // Y(x') = H(x') y, so F Y = F y and ∇(F Y) = dF y
            let alt = (&h * (df * y) - &f * (&dh * y)).norm();
            out.alternate = out.alternate.max(alt);
        }
    }
    for xh in &horizontal {
        let df = derivs
            .iter()
            .enumerate()
            .fold(RMat::zeros(m, m), |acc, (k, d)| acc + d * xh[k]);
        for y in &horizontal {
            out.phh = out.phh.max((&h * (&df * y)).norm());
        }
    }
    Ok(out)
}

/// Nijenhuis tensor restricted to `im F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrabilityResidual {
    /// `max |N_F(X_i, X_j)|` over a horizontal frame.
    pub full: f64,
    /// The horizontal component `max |H N_F(X_i, X_j)|`.
    pub horizontal: f64,
}

pub fn partial_integrability_residual(ff: &FField, x: &RVec) -> Result<IntegrabilityResidual> {
    let f = ff.matrix(x)?;
    let h = -(&f * &f);
    let frame = horizontal_frame(&f);
    let mut out = IntegrabilityResidual {
        full: 0.0,
        horizontal: 0.0,
    };
    for i in 0..frame.len() {
        for j in (i + 1)..frame.len() {
            let nij = nijenhuis_vectors(ff, x, &frame[i], &frame[j])?;
            out.full = out.full.max(nij.norm());
            out.horizontal = out.horizontal.max((&h * nij).norm());
        }
    }
    Ok(out)
}

/// `max |N_F(X, Z)|` over horizontal `X` and vertical `Z`.
pub fn mixed_nijenhuis(ff: &FField, x: &RVec) -> Result<f64> {
    let f = ff.matrix(x)?;
    let mut worst = 0.0f64;
    for xh in horizontal_frame(&f) {
        for z in vertical_frame(&f) {
            worst = worst.max(nijenhuis_vectors(ff, x, &xh, &z)?.norm());
        }
    }
    Ok(worst)
}

/// The Laplacian of `g ∘ τ` as an exact polynomial on `V`.
pub fn pulled_back_laplacian(tau: &CMat, g: &Poly) -> Poly {
    g.compose_linear(tau).laplacian()
}

/// `max |Δ(g ∘ τ)|` over the sample points, computed exactly.
///
/// `τ` must have full complex rank.
pub fn phwc_harmonicity(tau: &CMat, g: &Poly, samples: &[RVec]) -> Result<f64> {
    if g.vars() != tau.nrows() {
        return Err(Error::Shape(format!(
            "test function has {} variables, quotient has dimension {}",
            g.vars(),
            tau.nrows()
        )));
    }
    let sv = tau.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if sv.len() < tau.nrows() || sv.iter().any(|&s| s <= 1e-10 * smax.max(1.0)) {
        return Err(Error::NotSurjective);
    }
    let lap = pulled_back_laplacian(tau, g);
    Ok(samples
        .iter()
        .map(|x| lap.eval_real(x).norm())
        .fold(0.0, f64::max))
}

/// Largest entrywise difference of two fields over the samples.
pub fn max_field_distance(a: &FField, b: &FField, samples: &[RVec]) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in samples {
        worst = worst.max(max_abs(&(a.matrix(x)? - b.matrix(x)?)));
    }
    Ok(worst)
}
