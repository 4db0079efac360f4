use crate::error::{Error, Result};
use crate::exterior::{AltArray, Chart, FormTape, KForm, ScalarField};
use crate::numeric::{linalg, Dual, Field};
use std::sync::Arc;

/// A contact form on a (2n+1)-dimensional chart.
#[derive(Debug, Clone)]
pub struct ContactScene {
    pub chart: Arc<Chart>,
    pub alpha: KForm,
    pub dalpha: KForm,
    pub n: usize,
    alpha_tape: FormTape,
    dalpha_tape: FormTape,
}

impl ContactScene {
    pub fn new(alpha: KForm) -> Result<Self> {
        let chart = alpha.chart.clone();
        let d = chart.dim();
        if alpha.degree != 1 {
            return Err(Error::Degree(format!("contact form must be a 1-form, got degree {}", alpha.degree)));
        }
        if d % 2 == 0 || d < 3 {
            return Err(Error::InvalidChart(format!("contact manifolds have odd dimension ≥ 3, got {d}")));
        }
        let dalpha = alpha.ext_d();
        Ok(ContactScene {
            n: (d - 1) / 2,
            alpha_tape: alpha.tape(),
            dalpha_tape: dalpha.tape(),
            chart,
            alpha,
            dalpha,
        })
    }

    /// Parses one coefficient per coordinate name.
    pub fn from_coefficients(chart: Arc<Chart>, coeffs: &[&str]) -> Result<Self> {
        let fields = coeffs.iter().map(|s| chart.parse(s)).collect::<Result<Vec<_>>>()?;
        Self::new(KForm::one_form(chart, fields)?)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn alpha_at<T: Field>(&self, p: &[T]) -> AltArray<T> {
        self.alpha_tape.eval(p)
    }

    pub fn dalpha_at<T: Field>(&self, p: &[T]) -> AltArray<T> {
        self.dalpha_tape.eval(p)
    }

    /// Coefficient of α∧(dα)ⁿ on the coordinate volume.
    pub fn contact_density(&self, p: &[f64]) -> f64 {
        let a = self.alpha_at(p);
        let w = self.dalpha_at(p);
        a.wedge(&w.power(self.n)).c[0]
    }

    pub fn check_contact(&self, points: &[Vec<f64>]) -> Result<()> {
        for p in points {
            let c = self.contact_density(p);
            if !(c.abs() > 1e-12) {
                return Err(Error::ContactViolation(format!("α∧(dα)^n = {c:e} at {p:?}")));
            }
        }
        Ok(())
    }

    /// The same contact structure presented by g·α.
    pub fn conformal(&self, g: &ScalarField) -> Result<Self> {
        Self::new(self.alpha.scale(g))
    }

    /// dα as a dense antisymmetric matrix W with W[i][j] = dα(e_i, e_j).
    fn dalpha_matrix<T: Field>(&self, p: &[T]) -> Vec<T> {
        let d = self.dim();
        let w = self.dalpha_at(p);
        let mut m = vec![T::zero(); d * d];
        for (r, &mask) in w.basis().masks.iter().enumerate() {
            let i = mask.trailing_zeros() as usize;
            let j = (31 - mask.leading_zeros()) as usize;
            m[i * d + j] = w.c[r];
            m[j * d + i] = -w.c[r];
        }
        m
    }

    /// Solves α(X) = h, i_X dα = rhs through the bordered system
    /// [[Wᵀ, α], [αᵀ, 0]] (X, μ) = (rhs, h).
    fn bordered<T: Field>(&self, p: &[T], rhs: &[T], h: T) -> Result<Vec<T>> {
        let d = self.dim();
        let a = self.alpha_at(p);
        let w = self.dalpha_matrix(p);
        let n = d + 1;
        let mut m = vec![T::zero(); n * n];
        for j in 0..d {
            for i in 0..d {
                // row j: (i_X dα)_j = Σ_i X^i W_ij
                m[j * n + i] = w[i * d + j];
            }
            m[j * n + d] = a.c[j];
            m[d * n + j] = a.c[j];
        }
        let mut b = rhs.to_vec();
        b.push(h);
        let lu = linalg::Lu::new(m, n).map_err(|_| Error::ContactViolation("singular Reeb system".into()))?;
        if lu.pivot_ratio > 1e14 {
            return Err(Error::ContactViolation(format!("ill-conditioned Reeb system (pivot ratio {:e})", lu.pivot_ratio)));
        }
        let mut x = lu.solve(&b);
        x.truncate(d);
        Ok(x)
    }

    pub fn reeb_generic<T: Field>(&self, p: &[T]) -> Result<Vec<T>> {
        let rhs = vec![T::zero(); self.dim()];
        self.bordered(p, &rhs, T::one())
    }

    /// The Reeb field: α(R) = 1, i_R dα = 0.
    pub fn reeb(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.reeb_generic(p)
    }

    /// Contact Hamiltonian field: α(X_H) = H, i_{X_H} dα = dH(R) α − dH.
    pub fn hamiltonian(&self, h: &ScalarField, p: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let jet = h.eval(&Dual::seed(p));
        let dh = &jet.d[..d];
        let r = self.reeb(p)?;
        let dhr = linalg::dot(dh, &r);
        let a = self.alpha_at(p);
        let rhs: Vec<f64> = (0..d).map(|j| dhr * a.c[j] - dh[j]).collect();
        self.bordered(p, &rhs, jet.v)
    }

    /// Largest residual of the defining equations of X_H at p.
    pub fn hamiltonian_residual(&self, h: &ScalarField, p: &[f64], x: &[f64]) -> Result<f64> {
        let d = self.dim();
        let jet = h.eval(&Dual::seed(p));
        let dh = &jet.d[..d];
        let r = self.reeb(p)?;
        let dhr = linalg::dot(dh, &r);
        let a = self.alpha_at(p);
        let w = self.dalpha_matrix(p);
        let scale = 1.0 + jet.v.abs() + dh.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut res = (linalg::dot(&a.c, x) - jet.v).abs();
        for j in 0..d {
            let ix: f64 = (0..d).map(|i| x[i] * w[i * d + j]).sum();
            res = res.max((ix - (dhr * a.c[j] - dh[j])).abs());
        }
        Ok(res / scale)
    }
}
