//! Differential forms with expression coefficients ([`KForm`]) and dense
//! alternating arrays of evaluated coefficients ([`AltArray`]).
//!
//! Increasing index tuples are stored as bitmasks; bit i set means
//! coordinate i is in the tuple.

use super::chart::Chart;
use super::expr::{ScalarField, Tape};
use crate::error::{Error, Result};
use crate::numeric::{linalg, Field, MAX_DIM};
use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

/// The increasing k-subsets of {0..d} in lexicographic order, plus the
/// inverse lookup from mask to rank.
#[derive(Debug)]
pub struct Basis {
    pub d: usize,
    pub k: usize,
    pub masks: Vec<u32>,
    index: Vec<u32>,
}

impl Basis {
    pub fn rank(&self, mask: u32) -> Option<usize> {
        match self.index[mask as usize] {
            u32::MAX => None,
            r => Some(r as usize),
        }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

fn build_basis(d: usize, k: usize) -> Basis {
    let mut masks: Vec<u32> = (0u32..(1u32 << d)).filter(|m| m.count_ones() as usize == k).collect();
    // lexicographic order of the index tuples
    masks.sort_by_key(|&m| mask_to_tuple(m));
    let mut index = vec![u32::MAX; 1 << d];
    for (r, &m) in masks.iter().enumerate() {
        index[m as usize] = r as u32;
    }
    Basis { d, k, masks, index }
}

pub fn basis(d: usize, k: usize) -> &'static Basis {
    static TABLE: OnceLock<Vec<Vec<Basis>>> = OnceLock::new();
    let t = TABLE.get_or_init(|| (0..=MAX_DIM).map(|d| (0..=d).map(|k| build_basis(d, k)).collect()).collect());
    &t[d][k]
}

pub fn mask_to_tuple(m: u32) -> Vec<usize> {
    (0..32).filter(|i| m & (1 << i) != 0).collect()
}

pub fn tuple_to_mask(t: &[usize]) -> Result<u32> {
    let mut m = 0u32;
    for w in t.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::Degree(format!("index tuple {t:?} is not strictly increasing")));
        }
    }
    for &i in t {
        m |= 1 << i;
    }
    Ok(m)
}

/// Sign of e_I ∧ e_J relative to e_{I∪J} for disjoint I, J.
#[inline]
pub fn wedge_sign(i: u32, j: u32) -> f64 {
    let mut count = 0;
    let mut jj = j;
    while jj != 0 {
        let b = jj.trailing_zeros();
        count += (i >> (b + 1)).count_ones();
        jj &= jj - 1;
    }
    if count % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of moving coordinate `i` to the front of the tuple `rest ∪ {i}`.
#[inline]
pub fn insert_sign(i: usize, rest: u32) -> f64 {
    if (rest & ((1u32 << i) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

// ---------------------------------------------------------------------------

/// Coefficients of a k-form on a d-dimensional space in the basis
/// `basis(d, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AltArray<T> {
    pub d: usize,
    pub k: usize,
    pub c: Vec<T>,
}

impl<T: Field> AltArray<T> {
    pub fn zeros(d: usize, k: usize) -> Self {
        let n = if k > d { 0 } else { basis(d, k).len() };
        AltArray { d, k, c: vec![T::zero(); n] }
    }

    /// The top form with coefficient `w` on e¹∧…∧e^d.
    pub fn top(d: usize, w: T) -> Self {
        AltArray { d, k: d, c: vec![w] }
    }

    pub fn basis(&self) -> &'static Basis {
        basis(self.d, self.k)
    }

    pub fn get(&self, mask: u32) -> T {
        match self.basis().rank(mask) {
            Some(r) => self.c[r],
            None => T::zero(),
        }
    }

    pub fn set(&mut self, mask: u32, v: T) {
        let r = self.basis().rank(mask).expect("mask of wrong degree");
        self.c[r] = v;
    }

    pub fn from_f64(a: &AltArray<f64>) -> Self {
        AltArray { d: a.d, k: a.k, c: a.c.iter().map(|&x| T::cst(x)).collect() }
    }

    pub fn re(&self) -> AltArray<f64> {
        AltArray { d: self.d, k: self.k, c: self.c.iter().map(|x| x.re()).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.re().abs()))
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.d, self.k), (o.d, o.k));
        AltArray { d: self.d, k: self.k, c: self.c.iter().zip(&o.c).map(|(a, b)| *a + *b).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.d, self.k), (o.d, o.k));
        AltArray { d: self.d, k: self.k, c: self.c.iter().zip(&o.c).map(|(a, b)| *a - *b).collect() }
    }

    pub fn scale(&self, s: T) -> Self {
        AltArray { d: self.d, k: self.k, c: self.c.iter().map(|a| *a * s).collect() }
    }

    pub fn wedge(&self, o: &Self) -> Self {
        assert_eq!(self.d, o.d);
        let k = self.k + o.k;
        let mut out = AltArray::zeros(self.d, k);
        if k > self.d {
            return out;
        }
        let bo = basis(self.d, k);
        let ba = self.basis();
        let bb = o.basis();
        for (ia, &ma) in ba.masks.iter().enumerate() {
            let a = self.c[ia];
            if a.is_exact_zero() {
                continue;
            }
            for (ib, &mb) in bb.masks.iter().enumerate() {
                if ma & mb != 0 {
                    continue;
                }
                let r = bo.rank(ma | mb).unwrap();
                let t = a * o.c[ib];
                if wedge_sign(ma, mb) > 0.0 {
                    out.c[r] += t;
                } else {
                    out.c[r] -= t;
                }
            }
        }
        out
    }

    /// k-fold wedge power.
    pub fn power(&self, k: usize) -> Self {
        let mut acc = AltArray::zeros(self.d, 0);
        acc.c[0] = T::one();
        for _ in 0..k {
            acc = acc.wedge(self);
        }
        acc
    }

    /// Contraction with a vector in the first slot.
    pub fn interior(&self, v: &[T]) -> Result<Self> {
        if self.k == 0 {
            return Err(Error::Degree("interior product of a 0-form".into()));
        }
        assert_eq!(v.len(), self.d);
        let mut out = AltArray::zeros(self.d, self.k - 1);
        let bo = out.basis();
        for (r, &m) in self.basis().masks.iter().enumerate() {
            let a = self.c[r];
            let mut mm = m;
            while mm != 0 {
                let i = mm.trailing_zeros() as usize;
                mm &= mm - 1;
                let rest = m & !(1 << i);
                let s = insert_sign(i, rest);
                let ro = bo.rank(rest).unwrap();
                let t = a * v[i];
                if s > 0.0 {
                    out.c[ro] += t;
                } else {
                    out.c[ro] -= t;
                }
            }
        }
        Ok(out)
    }

    /// Multilinear evaluation a(v_1, …, v_k).
    pub fn eval_on(&self, vs: &[Vec<T>]) -> T {
        assert_eq!(vs.len(), self.k);
        let mut acc = T::zero();
        for (r, &m) in self.basis().masks.iter().enumerate() {
            let cols = mask_to_tuple(m);
            let k = self.k;
            let mut mat = Vec::with_capacity(k * k);
            for v in vs {
                for &c in &cols {
                    mat.push(v[c]);
                }
            }
            acc += self.c[r] * linalg::det(mat, k);
        }
        acc
    }

    /// Pullback along the linear map whose i-th column is `frame[i]`
    /// (each of length d). The result lives on an m-dim space.
    pub fn restrict(&self, frame: &[Vec<T>]) -> AltArray<T> {
        let m = frame.len();
        let mut out = AltArray::zeros(m, self.k);
        if self.k > m {
            return out;
        }
        match self.k {
            0 => out.c[0] = self.c[0],
            1 => {
                for (p, v) in frame.iter().enumerate() {
                    let mut s = T::zero();
                    for i in 0..self.d {
                        s += self.c[i] * v[i];
                    }
                    out.c[p] = s;
                }
            }
            2 => {
                let ba = self.basis();
                let pairs: Vec<(usize, usize)> =
                    ba.masks.iter().map(|&mk| (mk.trailing_zeros() as usize, (31 - mk.leading_zeros()) as usize)).collect();
                for (r, &mo) in out.basis().masks.iter().enumerate() {
                    let p = mo.trailing_zeros() as usize;
                    let q = (31 - mo.leading_zeros()) as usize;
                    let (vp, vq) = (&frame[p], &frame[q]);
                    let mut s = T::zero();
                    for (ia, &(i, j)) in pairs.iter().enumerate() {
                        s += self.c[ia] * (vp[i] * vq[j] - vp[j] * vq[i]);
                    }
                    out.c[r] = s;
                }
            }
            _ => {
                for (r, &mo) in out.basis().masks.iter().enumerate() {
                    let sel: Vec<Vec<T>> = mask_to_tuple(mo).into_iter().map(|p| frame[p].clone()).collect();
                    out.c[r] = self.eval_on(&sel);
                }
            }
        }
        out
    }
}

/// Solves i_X Ω = η for X, where Ω is a nonzero top array on an m-dim
/// space and η an (m−1)-array. One dense m×m solve.
pub fn solve_contraction<T: Field>(omega: &AltArray<T>, eta: &AltArray<T>, max_condition: f64) -> Result<Vec<T>> {
    let m = omega.d;
    if omega.k != m || eta.k + 1 != m || eta.d != m {
        return Err(Error::Degree(format!(
            "solve_contraction needs a top array and an (m-1)-array on the same space (got {}/{} and {}/{})",
            omega.k, omega.d, eta.k, eta.d
        )));
    }
    let w = omega.c[0];
    if w.re() == 0.0 || !w.re().is_finite() {
        return Err(Error::DegenerateVolume { ratio: f64::INFINITY });
    }
    let bo = basis(m, m - 1);
    let mut a = vec![T::zero(); m * m];
    for k in 0..m {
        let mut e = vec![T::zero(); m];
        e[k] = T::one();
        let col = omega.interior(&e)?;
        for r in 0..bo.len() {
            a[r * m + k] = col.c[r];
        }
    }
    let lu = linalg::Lu::new(a.clone(), m).map_err(|s| Error::DegenerateVolume { ratio: s.pivot_ratio })?;
    if lu.pivot_ratio > max_condition {
        return Err(Error::DegenerateVolume { ratio: lu.pivot_ratio });
    }
    let x = lu.solve(&eta.c);
    Ok(x)
}

// ---------------------------------------------------------------------------

/// A differential form with expression coefficients on a chart.
#[derive(Debug, Clone)]
pub struct KForm {
    pub chart: Arc<Chart>,
    pub degree: usize,
    coeffs: BTreeMap<u32, ScalarField>,
}

/// A vector field with one expression component per coordinate.
#[derive(Debug, Clone)]
pub struct VectorFieldExpr {
    pub chart: Arc<Chart>,
    pub components: Vec<ScalarField>,
}

impl VectorFieldExpr {
    pub fn new(chart: Arc<Chart>, components: Vec<ScalarField>) -> Result<Self> {
        if components.len() != chart.dim() {
            return Err(Error::ChartMismatch(format!(
                "vector field has {} components on a {}-dim chart",
                components.len(),
                chart.dim()
            )));
        }
        Ok(VectorFieldExpr { chart, components })
    }

    pub fn coordinate(chart: Arc<Chart>, i: usize) -> Self {
        let d = chart.dim();
        let components = (0..d).map(|j| if i == j { ScalarField::one() } else { ScalarField::zero() }).collect();
        VectorFieldExpr { chart, components }
    }

    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(p)).collect()
    }
}

impl KForm {
    pub fn zero(chart: Arc<Chart>, degree: usize) -> Self {
        KForm { chart, degree, coeffs: BTreeMap::new() }
    }

    pub fn scalar(chart: Arc<Chart>, f: ScalarField) -> Self {
        let mut k = KForm::zero(chart, 0);
        k.insert_mask(0, f);
        k
    }

    /// The coordinate 1-form dx_i.
    pub fn dx(chart: Arc<Chart>, i: usize) -> Self {
        let mut k = KForm::zero(chart, 1);
        k.insert_mask(1 << i, ScalarField::one());
        k
    }

    /// A 1-form from one coefficient per coordinate.
    pub fn one_form(chart: Arc<Chart>, coeffs: Vec<ScalarField>) -> Result<Self> {
        if coeffs.len() != chart.dim() {
            return Err(Error::ChartMismatch(format!("{} coefficients on a {}-dim chart", coeffs.len(), chart.dim())));
        }
        let mut k = KForm::zero(chart, 1);
        for (i, c) in coeffs.into_iter().enumerate() {
            k.insert_mask(1 << i, c);
        }
        Ok(k)
    }

    pub fn from_terms(chart: Arc<Chart>, degree: usize, terms: Vec<(Vec<usize>, ScalarField)>) -> Result<Self> {
        let mut k = KForm::zero(chart, degree);
        for (t, f) in terms {
            if t.len() != degree {
                return Err(Error::Degree(format!("tuple {t:?} in a {degree}-form")));
            }
            if t.iter().any(|&i| i >= k.chart.dim()) {
                return Err(Error::ChartMismatch(format!("index in {t:?} out of range")));
            }
            let m = tuple_to_mask(&t)?;
            let prev = k.coeffs.remove(&m).unwrap_or_else(ScalarField::zero);
            k.insert_mask(m, prev.add(&f));
        }
        Ok(k)
    }

    fn insert_mask(&mut self, m: u32, f: ScalarField) {
        if f.is_zero() {
            self.coeffs.remove(&m);
        } else {
            self.coeffs.insert(m, f);
        }
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Nonzero coefficients keyed by increasing index tuple.
    pub fn terms(&self) -> Vec<(Vec<usize>, ScalarField)> {
        let mut v: Vec<(Vec<usize>, ScalarField)> =
            self.coeffs.iter().map(|(m, f)| (mask_to_tuple(*m), f.clone())).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    pub fn coeff(&self, tuple: &[usize]) -> ScalarField {
        match tuple_to_mask(tuple) {
            Ok(m) => self.coeffs.get(&m).cloned().unwrap_or_else(ScalarField::zero),
            Err(_) => ScalarField::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn check_chart(&self, o: &KForm) -> Result<()> {
        if !self.chart.same_as(&o.chart) {
            return Err(Error::ChartMismatch("forms live on different charts".into()));
        }
        Ok(())
    }

    pub fn add(&self, o: &KForm) -> Result<KForm> {
        self.check_chart(o)?;
        if self.degree != o.degree {
            return Err(Error::Degree(format!("cannot add a {}-form and a {}-form", self.degree, o.degree)));
        }
        let mut out = self.clone();
        for (m, f) in &o.coeffs {
            let prev = out.coeffs.remove(m).unwrap_or_else(ScalarField::zero);
            out.insert_mask(*m, prev.add(f));
        }
        Ok(out)
    }

    pub fn scale(&self, g: &ScalarField) -> KForm {
        let mut out = KForm::zero(self.chart.clone(), self.degree);
        for (m, f) in &self.coeffs {
            out.insert_mask(*m, g.mul(f));
        }
        out
    }

    pub fn wedge(&self, o: &KForm) -> Result<KForm> {
        self.check_chart(o)?;
        let k = self.degree + o.degree;
        let mut out = KForm::zero(self.chart.clone(), k);
        if k > self.dim() {
            return Ok(out);
        }
        for (ma, fa) in &self.coeffs {
            for (mb, fb) in &o.coeffs {
                if ma & mb != 0 {
                    continue;
                }
                let t = fa.mul(fb);
                let t = if wedge_sign(*ma, *mb) > 0.0 { t } else { t.neg() };
                let m = ma | mb;
                let prev = out.coeffs.remove(&m).unwrap_or_else(ScalarField::zero);
                out.insert_mask(m, prev.add(&t));
            }
        }
        Ok(out)
    }

    pub fn ext_d(&self) -> KForm {
        let d = self.dim();
        let mut out = KForm::zero(self.chart.clone(), self.degree + 1);
        if self.degree >= d {
            return out;
        }
        for (m, f) in &self.coeffs {
            for j in 0..d {
                if m & (1 << j) != 0 {
                    continue;
                }
                let df = f.partial(j);
                if df.is_zero() {
                    continue;
                }
                let t = if insert_sign(j, *m) > 0.0 { df } else { df.neg() };
                let mm = m | (1 << j);
                let prev = out.coeffs.remove(&mm).unwrap_or_else(ScalarField::zero);
                out.insert_mask(mm, prev.add(&t));
            }
        }
        out
    }

    pub fn interior(&self, x: &VectorFieldExpr) -> Result<KForm> {
        if !self.chart.same_as(&x.chart) {
            return Err(Error::ChartMismatch("vector field on a different chart".into()));
        }
        if self.degree == 0 {
            return Err(Error::Degree("interior product of a 0-form".into()));
        }
        let mut out = KForm::zero(self.chart.clone(), self.degree - 1);
        for (m, f) in &self.coeffs {
            let mut mm = *m;
            while mm != 0 {
                let i = mm.trailing_zeros() as usize;
                mm &= mm - 1;
                let rest = m & !(1 << i);
                let t = f.mul(&x.components[i]);
                let t = if insert_sign(i, rest) > 0.0 { t } else { t.neg() };
                let prev = out.coeffs.remove(&rest).unwrap_or_else(ScalarField::zero);
                out.insert_mask(rest, prev.add(&t));
            }
        }
        Ok(out)
    }

    /// All coefficients in basis order, zeros included.
    pub fn dense_fields(&self) -> Vec<ScalarField> {
        let d = self.dim();
        if self.degree > d {
            return vec![];
        }
        basis(d, self.degree)
            .masks
            .iter()
            .map(|m| self.coeffs.get(m).cloned().unwrap_or_else(ScalarField::zero))
            .collect()
    }

    pub fn eval_at<T: Field>(&self, p: &[T]) -> AltArray<T> {
        let d = self.dim();
        let mut out = AltArray::zeros(d, self.degree);
        if self.degree > d {
            return out;
        }
        let b = basis(d, self.degree);
        for (m, f) in &self.coeffs {
            out.c[b.rank(*m).unwrap()] = f.eval(p);
        }
        out
    }

    pub fn tape(&self) -> FormTape {
        FormTape { d: self.dim(), k: self.degree, tape: Tape::new(&self.dense_fields()) }
    }
}

/// Compiled evaluation of a KForm.
#[derive(Debug, Clone)]
pub struct FormTape {
    pub d: usize,
    pub k: usize,
    tape: Tape,
}

impl FormTape {
    pub fn eval<T: Field>(&self, p: &[T]) -> AltArray<T> {
        AltArray { d: self.d, k: self.k, c: self.tape.eval(p) }
    }
}

/// Pullback of a form at a point to the span of `frame`.
pub fn restrict_at(a: &KForm, frame: &[Vec<f64>], p: &[f64]) -> Result<AltArray<f64>> {
    let d = a.dim();
    if frame.iter().any(|v| v.len() != d) || p.len() != d {
        return Err(Error::ChartMismatch("frame or point has the wrong dimension".into()));
    }
    let m = frame.len();
    if m > d {
        return Err(Error::DegenerateFrame(format!("{m} vectors in dimension {d}")));
    }
    // rank check through the Gram matrix
    let mut g = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            g[i * m + j] = linalg::dot(&frame[i], &frame[j]);
        }
    }
    let scale = (0..m).map(|i| g[i * m + i]).fold(0.0f64, f64::max);
    let det = linalg::det(g, m);
    if m > 0 && (scale == 0.0 || det.abs() <= 1e-24 * scale.powi(m as i32)) {
        return Err(Error::DegenerateFrame("frame vectors are linearly dependent".into()));
    }
    Ok(a.eval_at(p).restrict(frame))
}
