//! Sparse bivariate polynomials over Q in the generators `s` and `l`,
//! where `s` stands for p^(1/2) and `l` for the level parameter.
//!
//! Exponents of `s` count half-powers of p, so p itself is `s^2`. Keeping the
//! square root as a generator makes the half-power monomials that show up in
//! same-sign exchange functions exact instead of a special case.
//!
//! Invariant: the term map never stores a zero coefficient.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Exponent pair: (half-power of p, power of l).
pub type Exp = (u32, u32);

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Exp, BigRational>,
}

pub fn rat_i64(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((0, 0), c);
        }
        Poly { terms }
    }

    /// The monomial c * s^su * l^le.
    pub fn monomial(c: BigRational, su: u32, le: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((su, le), c);
        }
        Poly { terms }
    }

    /// p = s^2.
    pub fn p() -> Self {
        Poly::monomial(BigRational::one(), 2, 0)
    }

    pub fn sqrt_p() -> Self {
        Poly::monomial(BigRational::one(), 1, 0)
    }

    pub fn ell() -> Self {
        Poly::monomial(BigRational::one(), 0, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&(0, 0))
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.len() <= 1 && self.terms.keys().all(|k| *k == (0, 0))
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_zero() {
            Some(BigRational::zero())
        } else if self.is_constant() {
            self.terms.get(&(0, 0)).cloned()
        } else {
            None
        }
    }

    /// Single term (exponent, coefficient), if the polynomial is a monomial.
    pub fn as_monomial(&self) -> Option<(Exp, BigRational)> {
        if self.terms.len() == 1 {
            let (e, c) = self.terms.iter().next().unwrap();
            Some((*e, c.clone()))
        } else {
            None
        }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exp, &BigRational)> {
        self.terms.iter()
    }

    fn insert(&mut self, e: Exp, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(*e, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                out.insert((ea.0 + eb.0, ea.1 + eb.1), ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(e, k)| (*e, k * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Leading exponent in lex order (s first, then l).
    pub fn leading_exp(&self) -> Option<Exp> {
        self.terms.keys().next_back().copied()
    }

    pub fn leading_coeff(&self) -> Option<BigRational> {
        self.terms.values().next_back().cloned()
    }

    /// Lowest exponent pair present, componentwise over all terms.
    pub fn min_exps(&self) -> Option<Exp> {
        if self.is_zero() {
            return None;
        }
        let su = self.terms.keys().map(|e| e.0).min().unwrap();
        let le = self.terms.keys().map(|e| e.1).min().unwrap();
        Some((su, le))
    }

    /// Divide all terms by the monomial s^su * l^le (must divide exactly).
    pub fn div_monomial(&self, su: u32, le: u32) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| ((e.0 - su, e.1 - le), c.clone()))
                .collect(),
        }
    }

    /// Degree in s, viewing the polynomial as univariate in s over Q[l].
    fn s_degree(&self) -> i64 {
        self.terms.keys().map(|e| e.0 as i64).max().unwrap_or(-1)
    }

    /// Coefficient of s^k as a univariate polynomial in l (dense vector).
    fn s_coeff(&self, k: u32) -> Vec<BigRational> {
        let deg = self
            .terms
            .iter()
            .filter(|(e, _)| e.0 == k)
            .map(|(e, _)| e.1)
            .max();
        let Some(deg) = deg else { return vec![] };
        let mut v = vec![BigRational::zero(); deg as usize + 1];
        for (e, c) in &self.terms {
            if e.0 == k {
                v[e.1 as usize] = c.clone();
            }
        }
        v
    }

    fn from_s_coeffs(coeffs: &[(u32, Vec<BigRational>)]) -> Poly {
        let mut out = Poly::zero();
        for (k, v) in coeffs {
            for (j, c) in v.iter().enumerate() {
                out.insert((*k, j as u32), c.clone());
            }
        }
        out
    }

    /// Exact division; returns None if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&(BigRational::one() / c)));
        }
        let mut rem = self.clone();
        let mut quo = Poly::zero();
        let dl = d.leading_exp().unwrap();
        let dc = d.leading_coeff().unwrap();
        while !rem.is_zero() {
            let rl = rem.leading_exp().unwrap();
            if rl.0 < dl.0 || rl.1 < dl.1 {
                return None;
            }
            let e = (rl.0 - dl.0, rl.1 - dl.1);
            let c = rem.leading_coeff().unwrap() / &dc;
            let t = Poly::monomial(c, e.0, e.1);
            rem = rem.sub(&t.mul(d));
            quo = quo.add(&t);
        }
        Some(quo)
    }

    /// GCD, normalized monic in lex leading coefficient.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let g = gcd_biv(self, other);
        if g.is_zero() {
            return g;
        }
        let lc = g.leading_coeff().unwrap();
        g.scale(&(BigRational::one() / lc))
    }

    /// Substitute l := value, leaving s symbolic.
    pub fn eval_ell(&self, val: &BigRational) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            let mut pw = BigRational::one();
            for _ in 0..e.1 {
                pw *= val;
            }
            out.insert((e.0, 0), c * pw);
        }
        out
    }

    /// Substitute s := sqrt_p value and l := ell value (full numeric evaluation).
    pub fn eval(&self, sqrt_p: &BigRational, ell: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for _ in 0..e.0 {
                t *= sqrt_p;
            }
            for _ in 0..e.1 {
                t *= ell;
            }
            acc += t;
        }
        acc
    }

    /// True if every s-exponent is even, i.e. the value lies in Q(p, l).
    pub fn is_half_power_free(&self) -> bool {
        self.terms.keys().all(|e| e.0 % 2 == 0)
    }
}

/// Univariate gcd over Q (dense coefficient vectors), monic result.
fn gcd_uni(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    fn trim(mut v: Vec<BigRational>) -> Vec<BigRational> {
        while v.last().map(|c| c.is_zero()).unwrap_or(false) {
            v.pop();
        }
        v
    }
    fn rem(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
        let mut r = a.to_vec();
        let db = b.len() - 1;
        let lb = &b[db];
        while r.len() > db && !r.is_empty() {
            let dr = r.len() - 1;
            if dr < db {
                break;
            }
            let f = &r[dr] / lb;
            for k in 0..=db {
                let v = &b[k] * &f;
                r[dr - db + k] -= v;
            }
            r = trim(r);
        }
        r
    }
    let mut a = trim(a.to_vec());
    let mut b = trim(b.to_vec());
    while !b.is_empty() {
        let r = rem(&a, &b);
        a = b;
        b = r;
    }
    if a.is_empty() {
        return a;
    }
    let lc = a.last().unwrap().clone();
    a.iter().map(|c| c / &lc).collect()
}

/// Content of `a` viewed in (Q[l])[s]: gcd over Q[l] of the s-coefficients.
fn content_s(a: &Poly) -> Poly {
    let mut g: Vec<BigRational> = vec![];
    let deg = a.s_degree();
    for k in 0..=deg {
        let c = a.s_coeff(k as u32);
        if c.is_empty() {
            continue;
        }
        g = if g.is_empty() { c } else { gcd_uni(&g, &c) };
        if g.len() == 1 {
            break;
        }
    }
    Poly::from_s_coeffs(&[(0, g)])
}

/// Bivariate gcd by primitive pseudo-remainder sequence in s over Q[l].
fn gcd_biv(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    // Fast paths: constants and monomials.
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if let Some((ea, _)) = a.as_monomial() {
        if let Some((eb, _)) = b.as_monomial() {
            return Poly::monomial(BigRational::one(), ea.0.min(eb.0), ea.1.min(eb.1));
        }
        let m = b.min_exps().unwrap();
        return Poly::monomial(BigRational::one(), ea.0.min(m.0), ea.1.min(m.1));
    }
    if let Some((eb, _)) = b.as_monomial() {
        let m = a.min_exps().unwrap();
        return Poly::monomial(BigRational::one(), eb.0.min(m.0), eb.1.min(m.1));
    }
    // Pull out the monomial content first.
    let ma = a.min_exps().unwrap();
    let mb = b.min_exps().unwrap();
    let mono = (ma.0.min(mb.0), ma.1.min(mb.1));
    let a = a.div_monomial(ma.0, ma.1);
    let b = b.div_monomial(mb.0, mb.1);

    let ca = content_s(&a);
    let cb = content_s(&b);
    let cont_gcd = {
        let ga = ca.s_coeff(0);
        let gb = cb.s_coeff(0);
        Poly::from_s_coeffs(&[(0, gcd_uni(&ga, &gb))])
    };
    let mut f = a.div_exact(&ca).expect("content divides");
    let mut g = b.div_exact(&cb).expect("content divides");
    if f.s_degree() < g.s_degree() {
        std::mem::swap(&mut f, &mut g);
    }
    loop {
        if g.is_zero() {
            break;
        }
        let r = pseudo_rem_s(&f, &g);
        f = g;
        g = if r.is_zero() {
            r
        } else {
            let c = content_s(&r);
            r.div_exact(&c).expect("content divides")
        };
    }
    let prim = if f.s_degree() <= 0 {
        // Coprime in s (a nonzero element of Q[l] divides both primitives only
        // if constant, since both are s-primitive).
        Poly::one()
    } else {
        f
    };
    Poly::monomial(BigRational::one(), mono.0, mono.1)
        .mul(&cont_gcd)
        .mul(&prim)
}

/// Pseudo-remainder of f by g in the variable s.
fn pseudo_rem_s(f: &Poly, g: &Poly) -> Poly {
    let dg = g.s_degree();
    let lg = Poly::from_s_coeffs(&[(0, g.s_coeff(dg as u32))]);
    let mut r = f.clone();
    while !r.is_zero() && r.s_degree() >= dg {
        let dr = r.s_degree();
        let lr = Poly::from_s_coeffs(&[(0, r.s_coeff(dr as u32))]);
        // lg * r - lr * s^(dr-dg) * g kills the leading s-term.
        let shift = Poly::monomial(BigRational::one(), (dr - dg) as u32, 0);
        r = lg.mul(&r).sub(&lr.mul(&shift).mul(g));
    }
    r
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let ac = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let unit_coeff = ac.is_one() && *e != (0, 0);
            if !unit_coeff {
                write!(f, "{ac}")?;
            }
            let mut star = !unit_coeff;
            if e.0 > 0 {
                if star {
                    write!(f, "*")?;
                }
                if e.0 % 2 == 0 {
                    if e.0 == 2 {
                        write!(f, "p")?;
                    } else {
                        write!(f, "p^{}", e.0 / 2)?;
                    }
                } else {
                    write!(f, "p^({}/2)", e.0)?;
                }
                star = true;
            }
            if e.1 > 0 {
                if star {
                    write!(f, "*")?;
                }
                if e.1 == 1 {
                    write!(f, "l")?;
                } else {
                    write!(f, "l^{}", e.1)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_cancels_p_squared_minus_one() {
        // (p^2 - 1) and (p - 1) share the factor (p - 1).
        let p = Poly::p();
        let a = p.mul(&p).sub(&Poly::one());
        let b = p.sub(&Poly::one());
        let g = a.gcd(&b);
        assert_eq!(g, b);
        assert_eq!(a.div_exact(&g).unwrap(), p.add(&Poly::one()));
    }

    #[test]
    fn gcd_mixed_variables() {
        // (1 - l)(1 - p) vs (1 - l)(1 + p) -> (1 - l) up to sign normalization.
        let one = Poly::one();
        let f1 = one.sub(&Poly::ell());
        let a = f1.mul(&one.sub(&Poly::p()));
        let b = f1.mul(&one.add(&Poly::p()));
        let g = a.gcd(&b);
        // monic in lex order: leading term is l, so g = l - 1.
        assert_eq!(g, Poly::ell().sub(&one));
    }

    #[test]
    fn gcd_of_coprime_is_one() {
        let a = Poly::one().sub(&Poly::ell());
        let b = Poly::one().add(&Poly::ell());
        assert!(a.gcd(&b).is_one());
    }

    #[test]
    fn half_powers_multiply() {
        let s = Poly::sqrt_p();
        assert_eq!(s.mul(&s), Poly::p());
        assert!(!s.is_half_power_free());
        assert!(Poly::p().is_half_power_free());
    }

    #[test]
    fn exact_division_detects_failure() {
        let a = Poly::p().add(&Poly::one());
        let b = Poly::p().sub(&Poly::one());
        assert!(a.div_exact(&b).is_none());
    }
}
