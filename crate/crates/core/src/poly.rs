//! Sparse polynomials with complex coefficients, used for exact Laplacians
//! of holomorphic test functions pulled back by linear maps.

use std::collections::BTreeMap;

use rand::Rng;

use crate::linalg::{CMat, Complex64, RVec};

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    vars: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl Poly {
    pub fn zero(vars: usize) -> Self {
        Poly {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: usize, c: Complex64) -> Self {
        let mut p = Poly::zero(vars);
        p.add_term(vec![0; vars], c);
        p
    }

    /// The coordinate function `x_k`.
    pub fn var(vars: usize, k: usize) -> Self {
        let mut e = vec![0; vars];
        e[k] = 1;
        let mut p = Poly::zero(vars);
        p.add_term(e, Complex64::new(1.0, 0.0));
        p
    }

    pub fn from_terms(vars: usize, terms: impl IntoIterator<Item = (Vec<u32>, Complex64)>) -> Self {
        let mut p = Poly::zero(vars);
        for (e, c) in terms {
            assert_eq!(e.len(), vars, "exponent length");
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, e: Vec<u32>, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(e).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Complex64)> {
        self.terms.iter()
    }

    pub fn max_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.vars, other.vars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly::from_terms(self.vars, self.terms.iter().map(|(e, c)| (e.clone(), c * s)))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.vars, other.vars);
        let mut out = Poly::zero(self.vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::constant(self.vars, Complex64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn partial(&self, k: usize) -> Poly {
        let mut out = Poly::zero(self.vars);
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut d = e.clone();
                d[k] -= 1;
                out.add_term(d, c * e[k] as f64);
            }
        }
        out
    }

    /// `sum_k d^2/dx_k^2`, treating every variable as real.
    pub fn laplacian(&self) -> Poly {
        (0..self.vars).fold(Poly::zero(self.vars), |acc, k| {
            acc.add(&self.partial(k).partial(k))
        })
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(z.len(), self.vars);
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(z)
                    .fold(*c, |acc, (&p, zi)| acc * zi.powu(p))
            })
            .sum()
    }

    pub fn eval_real(&self, x: &RVec) -> Complex64 {
        let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.eval(&z)
    }

    /// `g(Tx)` as a polynomial in the `T.ncols()` real variables `x`.
    pub fn compose_linear(&self, t: &CMat) -> Poly {
        assert_eq!(t.nrows(), self.vars);
        let m = t.ncols();
        let linear: Vec<Poly> = (0..self.vars)
            .map(|a| {
                Poly::from_terms(
                    m,
                    (0..m).map(|j| {
                        let mut e = vec![0; m];
                        e[j] = 1;
                        (e, t[(a, j)])
                    }),
                )
            })
            .collect();
        let mut out = Poly::zero(m);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(m, *c);
            for (a, &p) in e.iter().enumerate() {
                if p > 0 {
                    term = term.mul(&linear[a].pow(p));
                }
            }
            out = out.add(&term);
        }
        out
    }
}

/// Random polynomial in `vars` variables of exact total degree `degree`,
/// with standard normal coefficients on every monomial of degree `>= 2`.
pub fn random_poly<R: Rng + ?Sized>(vars: usize, degree: u32, rng: &mut R) -> Poly {
    let mut out = Poly::zero(vars);
    for e in monomials(vars, degree) {
        let d: u32 = e.iter().sum();
        if d >= 2 {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            out.add_term(e, Complex64::new(re, im));
        }
    }
    out
}

/// All exponent vectors of total degree at most `degree`.
pub fn monomials(vars: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, vars: usize, left: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == vars {
            out.push(prefix.clone());
            return;
        }
        for p in 0..=left {
            prefix.push(p);
            rec(prefix, vars, left - p, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), vars, degree, &mut out);
    out
}
