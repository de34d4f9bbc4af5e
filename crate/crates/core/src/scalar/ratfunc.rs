//! Rational functions in p^(1/2) and l over Q: the exact coefficient field.
//!
//! Invariants: the denominator is nonzero, numerator and denominator are
//! coprime, and the denominator is monic in the lex leading coefficient.
//! Equality is therefore plain structural comparison.

use super::poly::Poly;
use crate::error::{CalcError, Result};
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ParamRat {
    num: Poly,
    den: Poly,
}

impl ParamRat {
    fn reduced(num: Poly, den: Poly) -> ParamRat {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return ParamRat {
                num,
                den: Poly::one(),
            };
        }
        let (num, den) = if den.is_one() {
            (num, den)
        } else {
            let g = num.gcd(&den);
            if g.is_one() {
                (num, den)
            } else {
                (
                    num.div_exact(&g).expect("gcd divides numerator"),
                    den.div_exact(&g).expect("gcd divides denominator"),
                )
            }
        };
        let lc = den.leading_coeff().unwrap();
        if lc.is_one() {
            ParamRat { num, den }
        } else {
            let inv = BigRational::one() / lc;
            ParamRat {
                num: num.scale(&inv),
                den: den.scale(&inv),
            }
        }
    }

    pub fn from_polys(num: Poly, den: Poly) -> Result<ParamRat> {
        if den.is_zero() {
            return Err(CalcError::DivisionByZero("zero polynomial denominator"));
        }
        Ok(ParamRat::reduced(num, den))
    }

    pub fn from_poly(num: Poly) -> ParamRat {
        ParamRat {
            num,
            den: Poly::one(),
        }
    }

    pub fn zero() -> ParamRat {
        ParamRat::from_poly(Poly::zero())
    }

    pub fn one() -> ParamRat {
        ParamRat::from_poly(Poly::one())
    }

    pub fn from_int(n: i64) -> ParamRat {
        ParamRat::from_poly(Poly::constant(BigRational::from_integer(n.into())))
    }

    pub fn from_rat(r: BigRational) -> ParamRat {
        ParamRat::from_poly(Poly::constant(r))
    }

    pub fn frac(n: i64, d: i64) -> ParamRat {
        ParamRat::from_rat(BigRational::new(n.into(), d.into()))
    }

    pub fn p() -> ParamRat {
        ParamRat::from_poly(Poly::p())
    }

    pub fn ell() -> ParamRat {
        ParamRat::from_poly(Poly::ell())
    }

    /// p^(k/2) for any integer k (negative powers land in the denominator).
    pub fn p_half_pow(k: i64) -> ParamRat {
        if k >= 0 {
            ParamRat::from_poly(Poly::monomial(BigRational::one(), k as u32, 0))
        } else {
            ParamRat {
                num: Poly::one(),
                den: Poly::monomial(BigRational::one(), (-k) as u32, 0),
            }
        }
    }

    /// p^k for integer k.
    pub fn p_pow(k: i64) -> ParamRat {
        ParamRat::p_half_pow(2 * k)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn add(&self, other: &ParamRat) -> ParamRat {
        ParamRat::reduced(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &ParamRat) -> ParamRat {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> ParamRat {
        ParamRat {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &ParamRat) -> ParamRat {
        ParamRat::reduced(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn div(&self, other: &ParamRat) -> Result<ParamRat> {
        if other.is_zero() {
            return Err(CalcError::DivisionByZero("rational function division"));
        }
        Ok(ParamRat::reduced(
            self.num.mul(&other.den),
            self.den.mul(&other.num),
        ))
    }

    pub fn inv(&self) -> Result<ParamRat> {
        ParamRat::one().div(self)
    }

    pub fn scale_rat(&self, c: &BigRational) -> ParamRat {
        if c.is_zero() {
            return ParamRat::zero();
        }
        ParamRat {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn pow(&self, n: i64) -> Result<ParamRat> {
        if n < 0 {
            return self.inv()?.pow(-n);
        }
        let mut out = ParamRat::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        Ok(out)
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        match (self.num.as_constant(), self.den.as_constant()) {
            (Some(n), Some(d)) => Some(n / d),
            _ => None,
        }
    }

    /// Specialize l to a rational value, keeping p symbolic.
    pub fn eval_ell(&self, val: &BigRational) -> Result<ParamRat> {
        let den = self.den.eval_ell(val);
        if den.is_zero() {
            return Err(CalcError::DegenerateInput(
                "specialization hits a pole in l",
            ));
        }
        Ok(ParamRat::reduced(self.num.eval_ell(val), den))
    }

    /// Full numeric evaluation at p^(1/2) = sqrt_p, l = ell.
    pub fn eval(&self, sqrt_p: &BigRational, ell: &BigRational) -> Result<BigRational> {
        let den = self.den.eval(sqrt_p, ell);
        if den.is_zero() {
            return Err(CalcError::DegenerateInput("specialization hits a pole"));
        }
        Ok(self.num.eval(sqrt_p, ell) / den)
    }

    pub fn is_half_power_free(&self) -> bool {
        self.num.is_half_power_free() && self.den.is_half_power_free()
    }
}

impl fmt::Debug for ParamRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ParamRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else if self.num.num_terms() <= 1 {
            write!(f, "{}/({})", self.num, self.den)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_cancellation() {
        // (p^2 - 1)/(p - 1) = p + 1.
        let p = ParamRat::p();
        let num = p.mul(&p).sub(&ParamRat::one());
        let den = p.sub(&ParamRat::one());
        let q = num.div(&den).unwrap();
        assert_eq!(q, p.add(&ParamRat::one()));
    }

    #[test]
    fn zero_annihilates() {
        let l = ParamRat::ell();
        assert!(l.mul(&ParamRat::zero()).is_zero());
    }

    #[test]
    fn irreducible_stays_put() {
        // (1 - l)/(1 + l) has gcd 1; check num/den survive unchanged.
        let one = ParamRat::one();
        let l = ParamRat::ell();
        let r = one.sub(&l).div(&one.add(&l)).unwrap();
        assert_eq!(r.numerator(), one.sub(&l).numerator());
        assert_eq!(r.denominator(), one.add(&l).numerator());
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert!(ParamRat::one().div(&ParamRat::zero()).is_err());
    }

    #[test]
    fn negative_p_powers() {
        let r = ParamRat::p_pow(-1);
        assert_eq!(r.mul(&ParamRat::p()), ParamRat::one());
        let h = ParamRat::p_half_pow(1);
        assert_eq!(h.mul(&h), ParamRat::p());
        assert!(!h.is_half_power_free());
    }

    #[test]
    fn eval_specializes_exactly() {
        // (p + l)/(1 - l) at p = 9/4 (sqrt 3/2), l = 5/7 -> (9/4 + 5/7)/(2/7).
        let r = ParamRat::p()
            .add(&ParamRat::ell())
            .div(&ParamRat::one().sub(&ParamRat::ell()))
            .unwrap();
        let v = r
            .eval(
                &BigRational::new(3.into(), 2.into()),
                &BigRational::new(5.into(), 7.into()),
            )
            .unwrap();
        assert_eq!(v, BigRational::new(83.into(), 8.into()));
    }
}
