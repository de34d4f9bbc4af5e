//! Truncated Laurent series in hbar over the rational-function field.
//!
//! A value is a list of coefficients starting at `val` (which may be
//! negative) and is only trusted modulo hbar^prec. Arithmetic propagates the
//! weakest precision of its operands instead of silently extending it, so a
//! division that costs precision is visible in the result.
//!
//! Invariants: `coeffs[0]` is nonzero for a nonzero value, `coeffs` never
//! reaches past `prec`, and the zero value stores `val == prec`.

use super::ratfunc::ParamRat;
use crate::error::{CalcError, Result};
use num_rational::BigRational;
use num_traits::One;
use std::fmt;

#[derive(Clone, PartialEq, Eq)]
pub struct HScalar {
    val: i64,
    coeffs: Vec<ParamRat>,
    prec: i64,
}

impl HScalar {
    pub fn new(val: i64, coeffs: Vec<ParamRat>, prec: i64) -> HScalar {
        let mut s = HScalar { val, coeffs, prec };
        s.normalize();
        s
    }

    pub fn zero(prec: i64) -> HScalar {
        HScalar {
            val: prec,
            coeffs: vec![],
            prec,
        }
    }

    pub fn one(prec: i64) -> HScalar {
        HScalar::constant(ParamRat::one(), prec)
    }

    pub fn constant(c: ParamRat, prec: i64) -> HScalar {
        HScalar::new(0, vec![c], prec)
    }

    pub fn from_int(n: i64, prec: i64) -> HScalar {
        HScalar::constant(ParamRat::from_int(n), prec)
    }

    /// c * hbar^k.
    pub fn monomial(c: ParamRat, k: i64, prec: i64) -> HScalar {
        HScalar::new(k, vec![c], prec)
    }

    fn normalize(&mut self) {
        let excess = (self.val + self.coeffs.len() as i64) - self.prec;
        if excess > 0 {
            let keep = (self.coeffs.len() as i64 - excess).max(0) as usize;
            self.coeffs.truncate(keep);
        }
        while self.coeffs.first().map(ParamRat::is_zero).unwrap_or(false) {
            self.coeffs.remove(0);
            self.val += 1;
        }
        while self.coeffs.last().map(ParamRat::is_zero).unwrap_or(false) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.val = self.prec;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn valuation(&self) -> i64 {
        self.val
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    /// Coefficient of hbar^k (zero below the valuation, error at or past prec).
    pub fn coeff(&self, k: i64) -> Result<ParamRat> {
        if k >= self.prec {
            return Err(CalcError::PrecisionExhausted(
                "coefficient beyond tracked precision",
            ));
        }
        let idx = k - self.val;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Ok(ParamRat::zero())
        } else {
            Ok(self.coeffs[idx as usize].clone())
        }
    }

    pub fn constant_term(&self) -> Result<ParamRat> {
        self.coeff(0)
    }

    pub fn with_prec(&self, prec: i64) -> HScalar {
        let mut s = self.clone();
        s.prec = s.prec.min(prec);
        s.normalize();
        s
    }

    pub fn add(&self, other: &HScalar) -> HScalar {
        let prec = self.prec.min(other.prec);
        if self.is_zero() {
            return other.with_prec(prec);
        }
        if other.is_zero() {
            return self.with_prec(prec);
        }
        let val = self.val.min(other.val);
        let hi = (self.val + self.coeffs.len() as i64)
            .max(other.val + other.coeffs.len() as i64)
            .min(prec);
        let mut coeffs = Vec::with_capacity((hi - val).max(0) as usize);
        for k in val..hi {
            let a = self.coeff(k).unwrap_or_else(|_| ParamRat::zero());
            let b = other.coeff(k).unwrap_or_else(|_| ParamRat::zero());
            coeffs.push(a.add(&b));
        }
        HScalar::new(val, coeffs, prec)
    }

    pub fn neg(&self) -> HScalar {
        HScalar {
            val: self.val,
            coeffs: self.coeffs.iter().map(ParamRat::neg).collect(),
            prec: self.prec,
        }
    }

    pub fn sub(&self, other: &HScalar) -> HScalar {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &HScalar) -> HScalar {
        // Error terms: O(h^pa) * O(h^vb) and O(h^pb) * O(h^va).
        let prec = (self.prec + other.val).min(other.prec + self.val);
        if self.is_zero() || other.is_zero() {
            return HScalar::zero(prec);
        }
        let val = self.val + other.val;
        let width = ((prec - val).max(0) as usize).min(self.coeffs.len() + other.coeffs.len() - 1);
        let mut coeffs = vec![ParamRat::zero(); width];
        for (i, a) in self.coeffs.iter().enumerate() {
            if i >= width || a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j >= width {
                    break;
                }
                coeffs[i + j] = coeffs[i + j].add(&a.mul(b));
            }
        }
        HScalar::new(val, coeffs, prec)
    }

    pub fn scale(&self, c: &ParamRat) -> HScalar {
        if c.is_zero() {
            return HScalar::zero(self.prec);
        }
        HScalar {
            val: self.val,
            coeffs: self.coeffs.iter().map(|a| a.mul(c)).collect(),
            prec: self.prec,
        }
    }

    pub fn scale_rat(&self, c: &BigRational) -> HScalar {
        self.scale(&ParamRat::from_rat(c.clone()))
    }

    /// Multiplicative inverse. A value that is zero to working precision is
    /// rejected as precision exhaustion, distinct from exact zero input.
    pub fn inv(&self) -> Result<HScalar> {
        if self.is_zero() {
            return Err(CalcError::PrecisionExhausted(
                "inverting a value that is zero to working precision",
            ));
        }
        // Invert the unit part u (constant term nonzero) by the standard
        // recursion: b0 = 1/u0, bk = -1/u0 * sum_{j>=1} u_j b_{k-j}.
        let unit_width = ((self.prec - self.val).max(1)) as usize;
        let u0inv = self.coeffs[0].inv()?;
        let mut out = vec![ParamRat::zero(); unit_width];
        out[0] = u0inv.clone();
        for k in 1..unit_width {
            let mut acc = ParamRat::zero();
            for j in 1..=k.min(self.coeffs.len() - 1) {
                acc = acc.add(&self.coeffs[j].mul(&out[k - j]));
            }
            out[k] = acc.mul(&u0inv).neg();
        }
        Ok(HScalar::new(-self.val, out, self.prec - 2 * self.val))
    }

    pub fn div(&self, other: &HScalar) -> Result<HScalar> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, n: i64) -> Result<HScalar> {
        if n < 0 {
            return self.inv()?.pow(-n);
        }
        let mut out = HScalar::one(self.prec + (n - 1).max(0) * self.val);
        for _ in 0..n {
            out = out.mul(self);
        }
        Ok(out)
    }

    /// q^c = exp(c * hbar) truncated at hbar^prec.
    pub fn q_power(c: &ParamRat, prec: i64) -> HScalar {
        if c.is_zero() {
            return HScalar::one(prec);
        }
        let mut coeffs = Vec::with_capacity(prec.max(0) as usize);
        let mut term = ParamRat::one();
        let mut fact = BigRational::one();
        for k in 0..prec.max(0) {
            if k > 0 {
                term = term.mul(c);
                fact *= BigRational::from_integer(k.into());
            }
            coeffs.push(
                term.mul(&ParamRat::from_rat(BigRational::one() / &fact)),
            );
        }
        HScalar::new(0, coeffs, prec)
    }

    /// Quantum integer [n] at a = q: (q^n - q^-n)/(q - q^-1).
    pub fn q_int(n: i64, prec: i64) -> HScalar {
        if n == 0 {
            return HScalar::zero(prec);
        }
        // Finite geometric form q^(n-1) + q^(n-3) + ... + q^(-n+1), which
        // avoids the precision loss of an explicit division.
        let sgn = if n > 0 { 1 } else { -1 };
        let m = n.abs();
        let mut acc = HScalar::zero(prec);
        for r in 0..m {
            let e = ParamRat::from_int(m - 1 - 2 * r);
            acc = acc.add(&HScalar::q_power(&e, prec));
        }
        if sgn < 0 {
            acc = acc.neg();
        }
        acc
    }

    /// Quantum binomial coefficient, product formula over [n-r+1]/[r].
    pub fn q_binom(n: i64, k: i64, prec: i64) -> Result<HScalar> {
        if k < 1 {
            return Err(CalcError::DegenerateInput("q-binomial needs k >= 1"));
        }
        // Guard the k extra digits a factor [0] would silently eat.
        let extra = 2 * k;
        let mut num = HScalar::one(prec + extra);
        let mut den = HScalar::one(prec + extra);
        for r in 1..=k {
            num = num.mul(&HScalar::q_int(n - r + 1, prec + extra));
            den = den.mul(&HScalar::q_int(r, prec + extra));
        }
        if num.is_zero() {
            return Ok(HScalar::zero(prec));
        }
        Ok(num.div(&den)?.with_prec(prec))
    }

    /// [n] at a = q^c for a symbolic exponent c: (q^(nc) - q^(-nc))/(q^c - q^(-c)).
    /// For n = 0 this is 0; the division is exact (both sides have valuation 1).
    pub fn q_int_at(n: i64, c: &ParamRat, prec: i64) -> Result<HScalar> {
        if n == 0 {
            return Ok(HScalar::zero(prec));
        }
        let nc = c.mul(&ParamRat::from_int(n));
        let num = HScalar::q_power(&nc, prec + 1).sub(&HScalar::q_power(&nc.neg(), prec + 1));
        let den = HScalar::q_power(c, prec + 1).sub(&HScalar::q_power(&c.neg(), prec + 1));
        Ok(num.div(&den)?.with_prec(prec))
    }

    /// Square root of a unit with constant coefficient exactly 1.
    pub fn sqrt_unit(&self) -> Result<HScalar> {
        if self.val != 0 || !self.coeff(0)?.is_one() {
            return Err(CalcError::UnsupportedRoot(
                "square root needs valuation 0 and constant term 1",
            ));
        }
        // Binomial series (1 + t)^(1/2); t has valuation >= 1 so it terminates.
        let t = self.sub(&HScalar::one(self.prec));
        let mut out = HScalar::one(self.prec);
        let mut pw = HScalar::one(self.prec);
        let mut coef = BigRational::one();
        for k in 1..self.prec.max(1) {
            pw = pw.mul(&t);
            if pw.is_zero() {
                break;
            }
            // binom(1/2, k) = binom(1/2, k-1) * (1/2 - k + 1)/k
            coef = coef * (BigRational::new(1.into(), 2.into()) - BigRational::from_integer((k - 1).into()))
                / BigRational::from_integer(k.into());
            out = out.add(&pw.scale_rat(&coef));
        }
        Ok(out)
    }

    /// Exp of a value with valuation >= 1.
    pub fn exp(&self) -> Result<HScalar> {
        if !self.is_zero() && self.val < 1 {
            return Err(CalcError::DegenerateInput(
                "exp needs positive hbar valuation",
            ));
        }
        let mut out = HScalar::one(self.prec);
        let mut pw = HScalar::one(self.prec);
        let mut fact = BigRational::one();
        for k in 1..self.prec.max(1) {
            pw = pw.mul(self);
            if pw.is_zero() {
                break;
            }
            fact *= BigRational::from_integer(k.into());
            out = out.add(&pw.scale_rat(&(BigRational::one() / &fact)));
        }
        Ok(out)
    }

    /// Log of a unit congruent to 1 mod hbar.
    pub fn log(&self) -> Result<HScalar> {
        if self.val != 0 || !self.coeff(0)?.is_one() {
            return Err(CalcError::DegenerateInput(
                "log needs constant coefficient 1",
            ));
        }
        let t = self.sub(&HScalar::one(self.prec));
        let mut out = HScalar::zero(self.prec);
        let mut pw = HScalar::one(self.prec);
        for k in 1..self.prec.max(1) {
            pw = pw.mul(&t);
            if pw.is_zero() {
                break;
            }
            let c = BigRational::new(
                if k % 2 == 1 { 1 } else { -1 }.into(),
                k.into(),
            );
            out = out.add(&pw.scale_rat(&c));
        }
        Ok(out)
    }

    /// Reduction mod hbar: the coefficient of hbar^0.
    pub fn classical_part(&self) -> Result<ParamRat> {
        if self.val < 0 {
            return Err(CalcError::DegenerateInput(
                "negative hbar valuation has no classical part",
            ));
        }
        self.coeff(0)
    }

    /// Specialize l, keeping hbar and p.
    pub fn eval_ell(&self, v: &BigRational) -> Result<HScalar> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            coeffs.push(c.eval_ell(v)?);
        }
        Ok(HScalar::new(self.val, coeffs, self.prec))
    }

    /// Evaluate every coefficient at numeric (sqrt_p, ell); returns the list of
    /// hbar-coefficients on [lo, prec).
    pub fn eval_coeffs(
        &self,
        sqrt_p: &BigRational,
        ell: &BigRational,
        lo: i64,
    ) -> Result<Vec<BigRational>> {
        let mut out = vec![];
        for k in lo..self.prec {
            out.push(self.coeff(k)?.eval(sqrt_p, ell)?);
        }
        Ok(out)
    }

    pub fn is_half_power_free(&self) -> bool {
        self.coeffs.iter().all(ParamRat::is_half_power_free)
    }
}

impl fmt::Debug for HScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for HScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "O(h^{})", self.prec);
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let k = self.val + i as i64;
            if k == 0 {
                write!(f, "{c}")?;
            } else if k == 1 {
                write!(f, "({c})*h")?;
            } else {
                write!(f, "({c})*h^{k}")?;
            }
        }
        write!(f, " + O(h^{})", self.prec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: i64 = 8;

    #[test]
    fn q_power_is_exponential() {
        // q^l at width 3: 1 + l h + l^2/2 h^2.
        let e = HScalar::q_power(&ParamRat::ell(), 3);
        assert_eq!(e.coeff(0).unwrap(), ParamRat::one());
        assert_eq!(e.coeff(1).unwrap(), ParamRat::ell());
        assert_eq!(
            e.coeff(2).unwrap(),
            ParamRat::ell().mul(&ParamRat::ell()).mul(&ParamRat::frac(1, 2))
        );
    }

    #[test]
    fn q_power_additivity() {
        let a = HScalar::q_power(&ParamRat::from_int(2), 4);
        let b = HScalar::q_power(&ParamRat::from_int(1), 4);
        assert_eq!(a.sub(&b.mul(&b)), HScalar::zero(4));
    }

    #[test]
    fn q_int_basics() {
        assert_eq!(HScalar::q_int(1, K), HScalar::one(K));
        assert!(HScalar::q_int(0, K).is_zero());
        assert_eq!(HScalar::q_int(-3, K), HScalar::q_int(3, K).neg());
        // constant term of [n] is n
        assert_eq!(
            HScalar::q_int(5, K).constant_term().unwrap(),
            ParamRat::from_int(5)
        );
    }

    #[test]
    fn q_int_two_is_twice_cosh() {
        // [2] = q + q^-1 = 2cosh(h) = 2 + h^2 + h^4/12 + ...
        let v = HScalar::q_int(2, 6);
        assert_eq!(v.coeff(0).unwrap(), ParamRat::from_int(2));
        assert_eq!(v.coeff(1).unwrap(), ParamRat::zero());
        assert_eq!(v.coeff(2).unwrap(), ParamRat::one());
        assert_eq!(v.coeff(4).unwrap(), ParamRat::frac(1, 12));
    }

    #[test]
    fn q_binom_agrees_with_q_int() {
        // binom(2,1) = [2]; binom(3,2) = [3]; binom(1,2) = 0 (factor [0]).
        assert_eq!(HScalar::q_binom(2, 1, K).unwrap(), HScalar::q_int(2, K));
        assert_eq!(HScalar::q_binom(3, 2, K).unwrap(), HScalar::q_int(3, K));
        assert!(HScalar::q_binom(1, 2, K).unwrap().is_zero());
    }

    #[test]
    fn sinh_unit_part() {
        // q - q^-1 = 2sinh(h): valuation 1, unit part 2 + h^2/3 + h^4/60.
        let v = HScalar::q_power(&ParamRat::from_int(1), K)
            .sub(&HScalar::q_power(&ParamRat::from_int(-1), K));
        assert_eq!(v.valuation(), 1);
        assert_eq!(v.coeff(1).unwrap(), ParamRat::from_int(2));
        assert_eq!(v.coeff(3).unwrap(), ParamRat::frac(1, 3));
        assert_eq!(v.coeff(5).unwrap(), ParamRat::frac(1, 60));
    }

    #[test]
    fn division_tracks_valuation() {
        let v = HScalar::q_power(&ParamRat::from_int(1), K)
            .sub(&HScalar::q_power(&ParamRat::from_int(-1), K));
        let r = HScalar::one(K).div(&v).unwrap();
        assert_eq!(r.valuation(), -1);
        // 1/(2sinh h) = h^-1 (1/2 - h^2/12 + ...)
        assert_eq!(r.coeff(-1).unwrap(), ParamRat::frac(1, 2));
        assert_eq!(r.coeff(1).unwrap(), ParamRat::frac(-1, 12));
        // a / a = 1
        assert_eq!(v.div(&v).unwrap().with_prec(5), HScalar::one(5));
    }

    #[test]
    fn div_by_zero_distinct_error() {
        let err = HScalar::one(K).div(&HScalar::zero(K)).unwrap_err();
        assert!(matches!(err, CalcError::PrecisionExhausted(_)));
    }

    #[test]
    fn sqrt_squares_back() {
        let s = HScalar::new(
            0,
            vec![ParamRat::one(), ParamRat::from_int(2)],
            5,
        );
        let r = s.sqrt_unit().unwrap();
        // 1 + h - h^2/2 + ...
        assert_eq!(r.coeff(1).unwrap(), ParamRat::one());
        assert_eq!(r.coeff(2).unwrap(), ParamRat::frac(-1, 2));
        assert_eq!(r.mul(&r), s);
    }

    #[test]
    fn exp_log_roundtrip() {
        let a = HScalar::monomial(ParamRat::ell(), 1, 6)
            .add(&HScalar::monomial(ParamRat::frac(3, 7), 2, 6));
        let e = a.exp().unwrap();
        assert_eq!(e.log().unwrap(), a);
    }

    #[test]
    fn precision_is_propagated() {
        let a = HScalar::one(4);
        let b = HScalar::one(7);
        assert_eq!(a.add(&b).prec(), 4);
        let h = HScalar::monomial(ParamRat::one(), 2, 6);
        // h^2 * O(h^4-known) -> prec 4 + 2
        assert_eq!(h.mul(&HScalar::one(4)).prec(), 6);
    }
}
