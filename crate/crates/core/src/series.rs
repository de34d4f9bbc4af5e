//! Multivariate truncated Laurent series over HScalar in named variables.
//!
//! A series is exact on its declared per-variable exponent box; nothing is
//! claimed outside. Operations compute and record the window on which their
//! output is trustworthy, so truncation is never silent. Series produced by a
//! directed expansion carry the expansion order as a tag, and arithmetic
//! between series with clashing tags on shared variables is rejected.
//!
//! Multiplication contract: the window bookkeeping treats each factor's floor
//! as true support vacuum. Expansions with unbounded diagonal support (the
//! two-variable iota cones) may therefore only be multiplied by series whose
//! stored support is complete, e.g. polynomials; the call sites keep to this.

use crate::error::{CalcError, Result};
use crate::scalar::{HScalar, ParamRat};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Bound large enough to act as "unbounded" without overflowing arithmetic.
pub const UNBOUNDED: i64 = i64::MAX / 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarWindow {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

impl VarWindow {
    pub fn new(name: &str, lo: i64, hi: i64) -> VarWindow {
        assert!(lo <= hi, "window lo must not exceed hi");
        VarWindow {
            name: name.to_string(),
            lo,
            hi,
        }
    }

    pub fn unbounded(name: &str) -> VarWindow {
        VarWindow {
            name: name.to_string(),
            lo: -UNBOUNDED,
            hi: UNBOUNDED,
        }
    }

    fn contains(&self, e: i64) -> bool {
        self.lo <= e && e <= self.hi
    }
}

/// An exact scale factor c * p^(ph/2) * q^qe used in variable substitutions
/// and as delta-support monomials.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub coef: BigRational,
    pub p_half: i64,
    pub q_exp: ParamRat,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial {
            coef: BigRational::one(),
            p_half: 0,
            q_exp: ParamRat::zero(),
        }
    }

    pub fn minus_one() -> Monomial {
        Monomial {
            coef: -BigRational::one(),
            p_half: 0,
            q_exp: ParamRat::zero(),
        }
    }

    pub fn p_pow(k: i64) -> Monomial {
        Monomial {
            coef: BigRational::one(),
            p_half: 2 * k,
            q_exp: ParamRat::zero(),
        }
    }

    pub fn q_pow(c: ParamRat) -> Monomial {
        Monomial {
            coef: BigRational::one(),
            p_half: 0,
            q_exp: c,
        }
    }

    pub fn is_one(&self) -> bool {
        self.coef.is_one() && self.p_half == 0 && self.q_exp.is_zero()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            coef: &self.coef * &other.coef,
            p_half: self.p_half + other.p_half,
            q_exp: self.q_exp.add(&other.q_exp),
        }
    }

    pub fn pow(&self, n: i64) -> Monomial {
        let coef = if n >= 0 {
            num_traits::pow::Pow::pow(self.coef.clone(), n as u64)
        } else {
            num_traits::pow::Pow::pow(
                BigRational::one() / self.coef.clone(),
                (-n) as u64,
            )
        };
        Monomial {
            coef,
            p_half: self.p_half * n,
            q_exp: self.q_exp.mul(&ParamRat::from_int(n)),
        }
    }

    /// Value as a truncated scalar: coef * p^(ph/2) * exp(q_exp * hbar).
    pub fn as_hscalar(&self, prec: i64) -> HScalar {
        let base = ParamRat::p_half_pow(self.p_half).scale_rat(&self.coef);
        HScalar::q_power(&self.q_exp, prec).scale(&base)
    }

    /// The q-free part as an exact rational function.
    pub fn p_part(&self) -> ParamRat {
        ParamRat::p_half_pow(self.p_half).scale_rat(&self.coef)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coef)?;
        if self.p_half != 0 {
            if self.p_half % 2 == 0 {
                write!(f, "*p^{}", self.p_half / 2)?;
            } else {
                write!(f, "*p^({}/2)", self.p_half)?;
            }
        }
        if !self.q_exp.is_zero() {
            write!(f, "*q^({})", self.q_exp)?;
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct FormalSeries {
    /// Sorted by variable name; parallel to the exponent tuples in `terms`.
    windows: Vec<VarWindow>,
    terms: BTreeMap<Vec<i64>, HScalar>,
    /// Expansion order that produced this series, earlier variables large.
    dir: Option<Vec<String>>,
    /// hbar precision guaranteed for every coefficient in the window.
    prec: i64,
}

impl FormalSeries {
    pub fn zero(windows: Vec<VarWindow>, prec: i64) -> FormalSeries {
        let mut ws = windows;
        ws.sort_by(|a, b| a.name.cmp(&b.name));
        FormalSeries {
            windows: ws,
            terms: BTreeMap::new(),
            dir: None,
            prec,
        }
    }

    pub fn constant(c: HScalar, prec: i64) -> FormalSeries {
        let mut s = FormalSeries::zero(vec![], prec.min(c.prec()));
        if !c.is_zero() {
            s.terms.insert(vec![], c);
        }
        s
    }

    pub fn one(prec: i64) -> FormalSeries {
        FormalSeries::constant(HScalar::one(prec), prec)
    }

    /// c * var^k within the given window.
    pub fn monomial(c: HScalar, var: &str, k: i64, window: &VarWindow, prec: i64) -> FormalSeries {
        let mut s = FormalSeries::zero(vec![window.clone()], prec.min(c.prec()));
        if !c.is_zero() && window.contains(k) {
            s.terms.insert(vec![k], c);
        }
        s
    }

    pub fn var(var: &str, window: &VarWindow, prec: i64) -> FormalSeries {
        FormalSeries::monomial(HScalar::one(prec), var, 1, window, prec)
    }

    /// exp(c * var) truncated to the window (non-negative powers only).
    pub fn exp_cvar(c: &HScalar, var: &str, window: &VarWindow, prec: i64) -> FormalSeries {
        let mut s = FormalSeries::zero(vec![window.clone()], prec.min(c.prec()));
        let mut pw = HScalar::one(prec);
        let mut fact = BigRational::one();
        for k in 0..=window.hi.max(0) {
            if k > 0 {
                pw = pw.mul(c);
                fact *= BigRational::from_integer(k.into());
            }
            if k < window.lo {
                continue;
            }
            let coeff = pw.scale_rat(&(BigRational::one() / &fact));
            if !coeff.is_zero() {
                s.terms.insert(vec![k], coeff);
            }
        }
        s
    }

    pub fn windows(&self) -> &[VarWindow] {
        &self.windows
    }

    pub fn window_of(&self, var: &str) -> Option<&VarWindow> {
        self.windows.iter().find(|w| w.name == var)
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    pub fn direction(&self) -> Option<&[String]> {
        self.dir.as_deref()
    }

    pub fn with_direction(mut self, order: &[String]) -> FormalSeries {
        self.dir = Some(order.to_vec());
        self
    }

    pub fn untagged(mut self) -> FormalSeries {
        self.dir = None;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i64>, &HScalar)> {
        self.terms.iter()
    }

    fn var_index(&self, var: &str) -> Result<usize> {
        self.windows
            .iter()
            .position(|w| w.name == var)
            .ok_or_else(|| CalcError::WindowViolation(format!("unknown variable `{var}`")))
    }

    /// Coefficient at an exponent tuple given in this series' variable order.
    pub fn coeff(&self, exps: &[i64]) -> HScalar {
        self.terms
            .get(exps)
            .cloned()
            .unwrap_or_else(|| HScalar::zero(self.prec))
    }

    /// Coefficient addressed by (var, exponent) pairs; absent vars get 0.
    pub fn coeff_at(&self, at: &[(&str, i64)]) -> HScalar {
        let mut key = vec![0i64; self.windows.len()];
        for (v, e) in at {
            if let Ok(i) = self.var_index(v) {
                key[i] = *e;
            } else if *e != 0 {
                return HScalar::zero(self.prec);
            }
        }
        self.coeff(&key)
    }

    fn insert(&mut self, key: Vec<i64>, c: HScalar) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get().add(&c);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    fn in_window(&self, key: &[i64]) -> bool {
        key.iter()
            .zip(&self.windows)
            .all(|(e, w)| w.contains(*e))
    }

    fn merged_direction(&self, other: &FormalSeries) -> Result<Option<Vec<String>>> {
        match (&self.dir, &other.dir) {
            (None, d) | (d, None) => Ok(d.clone()),
            (Some(a), Some(b)) => {
                let shared: Vec<&String> = a.iter().filter(|v| b.contains(v)).collect();
                let rb: Vec<&String> = b.iter().filter(|v| a.contains(v)).collect();
                if shared == rb {
                    Ok(Some(if a.len() >= b.len() { a.clone() } else { b.clone() }))
                } else {
                    Err(CalcError::DirectionClash(format!(
                        "cannot combine expansions ordered {:?} and {:?}",
                        a, b
                    )))
                }
            }
        }
    }

    /// Reindex both operands over the union of their variables.
    fn aligned(&self, other: &FormalSeries) -> (FormalSeries, FormalSeries, Vec<VarWindow>) {
        let mut names: Vec<String> = self
            .windows
            .iter()
            .chain(other.windows.iter())
            .map(|w| w.name.clone())
            .collect();
        names.sort();
        names.dedup();
        let widen = |s: &FormalSeries| -> FormalSeries {
            let ws: Vec<VarWindow> = names
                .iter()
                .map(|n| {
                    s.window_of(n)
                        .cloned()
                        .unwrap_or_else(|| VarWindow::unbounded(n))
                })
                .collect();
            let mut out = FormalSeries::zero(ws, s.prec);
            out.dir = s.dir.clone();
            for (key, c) in &s.terms {
                let mut nk = vec![0i64; names.len()];
                for (i, n) in names.iter().enumerate() {
                    if let Some(j) = s.windows.iter().position(|w| &w.name == n) {
                        nk[i] = key[j];
                    }
                }
                out.terms.insert(nk, c.clone());
            }
            out
        };
        let a = widen(self);
        let b = widen(other);
        let ws = a.windows.clone();
        (a, b, ws)
    }

    pub fn add(&self, other: &FormalSeries) -> Result<FormalSeries> {
        let dir = self.merged_direction(other)?;
        let (a, b, ws) = self.aligned(other);
        let windows: Vec<VarWindow> = ws
            .iter()
            .zip(&b.windows)
            .map(|(wa, wb)| VarWindow {
                name: wa.name.clone(),
                lo: wa.lo.min(wb.lo),
                hi: wa.hi.min(wb.hi),
            })
            .collect();
        let mut out = FormalSeries::zero(windows, a.prec.min(b.prec));
        out.dir = dir;
        for (k, c) in &a.terms {
            if out.in_window(k) {
                out.insert(k.clone(), c.clone());
            }
        }
        for (k, c) in &b.terms {
            if out.in_window(k) {
                out.insert(k.clone(), c.clone());
            }
        }
        Ok(out)
    }

    pub fn neg(&self) -> FormalSeries {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn sub(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &HScalar) -> FormalSeries {
        let mut out = FormalSeries::zero(self.windows.clone(), self.prec.min(c.prec()));
        out.dir = self.dir.clone();
        if c.is_zero() {
            return out;
        }
        for (k, a) in &self.terms {
            out.insert(k.clone(), a.mul(c));
        }
        out
    }

    pub fn scale_param(&self, c: &ParamRat) -> FormalSeries {
        self.scale(&HScalar::constant(c.clone(), self.prec))
    }

    pub fn mul(&self, other: &FormalSeries) -> Result<FormalSeries> {
        let dir = self.merged_direction(other)?;
        let (a, b, _) = self.aligned(other);
        let windows: Vec<VarWindow> = a
            .windows
            .iter()
            .zip(&b.windows)
            .map(|(wa, wb)| {
                let lo = wa.lo.saturating_add(wb.lo).clamp(-UNBOUNDED, UNBOUNDED);
                let hi = (wa.hi.saturating_add(wb.lo))
                    .min(wb.hi.saturating_add(wa.lo))
                    .clamp(-UNBOUNDED, UNBOUNDED);
                VarWindow {
                    name: wa.name.clone(),
                    lo,
                    hi: hi.max(lo - 1),
                }
            })
            .collect();
        // an empty window (hi < lo) yields an all-dropped product
        let mut out = FormalSeries::zero(
            windows
                .iter()
                .map(|w| VarWindow {
                    name: w.name.clone(),
                    lo: w.lo,
                    hi: w.hi.max(w.lo),
                })
                .collect(),
            a.prec.min(b.prec),
        );
        let degenerate = windows.iter().any(|w| w.hi < w.lo);
        out.dir = dir;
        if degenerate {
            return Ok(out);
        }
        for (ka, ca) in &a.terms {
            for (kb, cb) in &b.terms {
                let key: Vec<i64> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
                if out.in_window(&key) {
                    out.insert(key, ca.mul(cb));
                }
            }
        }
        Ok(out)
    }

    /// Multiplicative inverse. The lowest term must dominate: some stored
    /// monomial m with unit coefficient such that every term exponent is
    /// componentwise >= m.
    pub fn invert(&self) -> Result<FormalSeries> {
        if self.terms.is_empty() {
            return Err(CalcError::DivisionByZero("inverting the zero series"));
        }
        let nv = self.windows.len();
        let mut min_exps = vec![i64::MAX; nv];
        for k in self.terms.keys() {
            for (i, e) in k.iter().enumerate() {
                min_exps[i] = min_exps[i].min(*e);
            }
        }
        let lead_key = min_exps.clone();
        let lead = self.terms.get(&lead_key).ok_or_else(|| {
            CalcError::ExpansionFailure(
                "no invertible lowest term: componentwise minimum is not attained".into(),
            )
        })?;
        let lead_inv = lead.inv()?;
        // self = m * lead * (1 + r), r strictly positive in some variable.
        let mut r = FormalSeries::zero(
            self.windows
                .iter()
                .zip(&lead_key)
                .map(|(w, e)| VarWindow {
                    name: w.name.clone(),
                    lo: (w.lo - e).clamp(-UNBOUNDED, UNBOUNDED),
                    hi: (w.hi - e).clamp(-UNBOUNDED, UNBOUNDED),
                })
                .collect(),
            self.prec,
        );
        for (k, c) in &self.terms {
            if k == &lead_key {
                continue;
            }
            let key: Vec<i64> = k.iter().zip(&lead_key).map(|(e, m)| e - m).collect();
            r.insert(key, c.mul(&lead_inv));
        }
        // geometric series sum_{j} (-r)^j, truncated by the target window
        let inv_window: Vec<VarWindow> = self
            .windows
            .iter()
            .zip(&lead_key)
            .map(|(w, e)| VarWindow {
                name: w.name.clone(),
                lo: (-e - (w.hi - w.lo)).clamp(-UNBOUNDED, UNBOUNDED),
                hi: (-e).clamp(-UNBOUNDED, UNBOUNDED),
            })
            .collect();
        let span_window: Vec<VarWindow> = r
            .windows
            .iter()
            .map(|w| VarWindow {
                name: w.name.clone(),
                lo: 0.min(w.lo),
                hi: w.hi.max(0),
            })
            .collect();
        let mut geo = FormalSeries::one(self.prec);
        let mut pw = FormalSeries::one(self.prec);
        let mut guard = 0usize;
        loop {
            pw = pw.mul(&r.neg())?;
            pw = pw.clamp_to(&span_window);
            if pw.is_zero() {
                break;
            }
            geo = geo.add(&pw)?;
            guard += 1;
            if guard > 4096 {
                return Err(CalcError::ExpansionFailure(
                    "inverse expansion did not terminate within the window".into(),
                ));
            }
        }
        let mut out = FormalSeries::zero(inv_window, self.prec);
        out.dir = self.dir.clone();
        for (k, c) in &geo.terms {
            let key: Vec<i64> = k.iter().zip(&lead_key).map(|(e, m)| e - m).collect();
            if out.in_window(&key) {
                out.insert(key, c.mul(&lead_inv));
            }
        }
        Ok(out)
    }

    pub fn div(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.mul(&other.invert()?)
    }

    /// Restrict to the intersection with the given windows (dropping terms).
    pub fn clamp_to(&self, windows: &[VarWindow]) -> FormalSeries {
        let mut out = FormalSeries::zero(
            self.windows
                .iter()
                .map(|w| {
                    windows
                        .iter()
                        .find(|v| v.name == w.name)
                        .map(|v| VarWindow {
                            name: w.name.clone(),
                            lo: w.lo.max(v.lo),
                            hi: w.hi.min(v.hi).max(w.lo.max(v.lo)),
                        })
                        .unwrap_or_else(|| w.clone())
                })
                .collect(),
            self.prec,
        );
        out.dir = self.dir.clone();
        for (k, c) in &self.terms {
            if out.in_window(k) {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// var -> m * var: exponent e picks up the factor m^e.
    pub fn scale_var(&self, var: &str, m: &Monomial) -> Result<FormalSeries> {
        if m.is_one() {
            return Ok(self.clone());
        }
        let vi = self.var_index(var)?;
        let mut out = FormalSeries::zero(self.windows.clone(), self.prec);
        out.dir = self.dir.clone();
        for (k, c) in &self.terms {
            let f = m.pow(k[vi]).as_hscalar(self.prec);
            out.insert(k.clone(), c.mul(&f));
        }
        Ok(out)
    }

    /// var -> -var.
    pub fn negate_var(&self, var: &str) -> Result<FormalSeries> {
        self.scale_var(var, &Monomial::minus_one())
    }

    /// d/d var.
    pub fn derivative(&self, var: &str) -> Result<FormalSeries> {
        let vi = self.var_index(var)?;
        let w = &self.windows[vi];
        let mut windows = self.windows.clone();
        windows[vi] = VarWindow {
            name: w.name.clone(),
            lo: (w.lo - 1).clamp(-UNBOUNDED, UNBOUNDED),
            hi: (w.hi - 1).clamp(-UNBOUNDED, UNBOUNDED),
        };
        let mut out = FormalSeries::zero(windows, self.prec);
        out.dir = self.dir.clone();
        for (k, c) in &self.terms {
            let e = k[vi];
            if e == 0 {
                continue;
            }
            let mut key = k.clone();
            key[vi] = e - 1;
            out.insert(key, c.scale(&ParamRat::from_int(e)));
        }
        Ok(out)
    }

    /// var * d/d var (degree operator; window unchanged).
    pub fn euler_op(&self, var: &str) -> Result<FormalSeries> {
        let vi = self.var_index(var)?;
        let mut out = FormalSeries::zero(self.windows.clone(), self.prec);
        out.dir = self.dir.clone();
        for (k, c) in &self.terms {
            let e = k[vi];
            if e == 0 {
                continue;
            }
            out.insert(k.clone(), c.scale(&ParamRat::from_int(e)));
        }
        Ok(out)
    }

    /// Coefficient of var^-1, as a series in the remaining variables.
    pub fn residue(&self, var: &str) -> Result<FormalSeries> {
        let vi = self.var_index(var)?;
        if !self.windows[vi].contains(-1) {
            return Err(CalcError::WindowViolation(format!(
                "window of `{var}` does not contain exponent -1"
            )));
        }
        let windows: Vec<VarWindow> = self
            .windows
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != vi)
            .map(|(_, w)| w.clone())
            .collect();
        let mut out = FormalSeries::zero(windows, self.prec);
        for (k, c) in &self.terms {
            if k[vi] != -1 {
                continue;
            }
            let key: Vec<i64> = k
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != vi)
                .map(|(_, e)| *e)
                .collect();
            out.insert(key, c.clone());
        }
        Ok(out)
    }

    /// Multiply by var^k (shifting the window along).
    pub fn mul_var_pow(&self, var: &str, k: i64) -> Result<FormalSeries> {
        if k == 0 {
            return Ok(self.clone());
        }
        let vi = self.var_index(var)?;
        let mut windows = self.windows.clone();
        windows[vi].lo = (windows[vi].lo + k).clamp(-UNBOUNDED, UNBOUNDED);
        windows[vi].hi = (windows[vi].hi + k).clamp(-UNBOUNDED, UNBOUNDED);
        let mut out = FormalSeries::zero(windows, self.prec);
        out.dir = self.dir.clone();
        for (key, c) in &self.terms {
            let mut nk = key.clone();
            nk[vi] += k;
            out.insert(nk, c.clone());
        }
        Ok(out)
    }

    fn nilpotency_check(&self) -> Result<()> {
        // Terms of hbar valuation 0 must all sit strictly on one side:
        // all exponent vectors nonnegative-nonzero or nonpositive-nonzero.
        let mut pos = true;
        let mut neg = true;
        for (k, c) in &self.terms {
            if c.valuation() >= 1 {
                continue;
            }
            if k.iter().all(|e| *e == 0) {
                return Err(CalcError::DegenerateInput(
                    "constant term with hbar valuation 0",
                ));
            }
            if !(k.iter().all(|e| *e >= 0) && k.iter().any(|e| *e > 0)) {
                pos = false;
            }
            if !(k.iter().all(|e| *e <= 0) && k.iter().any(|e| *e < 0)) {
                neg = false;
            }
        }
        if pos || neg {
            Ok(())
        } else {
            Err(CalcError::DegenerateInput(
                "argument is not topologically nilpotent within truncation",
            ))
        }
    }

    /// exp of a topologically nilpotent argument.
    pub fn exp(&self) -> Result<FormalSeries> {
        self.nilpotency_check()?;
        let mut out = FormalSeries::one(self.prec);
        out.dir = self.dir.clone();
        let mut pw = FormalSeries::one(self.prec);
        let mut fact = BigRational::one();
        let mut k: i64 = 0;
        loop {
            k += 1;
            pw = pw.mul(self)?.clamp_to(&self.windows);
            if pw.is_zero() {
                break;
            }
            fact *= BigRational::from_integer(k.into());
            out = out.add(&pw.scale(&HScalar::constant(
                ParamRat::from_rat(BigRational::one() / &fact),
                self.prec,
            )))?;
            if k > 4096 {
                return Err(CalcError::ExpansionFailure(
                    "exp expansion did not terminate within the window".into(),
                ));
            }
        }
        Ok(out)
    }

    /// log of a series congruent to 1: constant coefficient 1 and the rest
    /// topologically nilpotent.
    pub fn log(&self) -> Result<FormalSeries> {
        let zero_key = vec![0i64; self.windows.len()];
        let c0 = self.coeff(&zero_key);
        if c0.is_zero() || !(c0.valuation() == 0 && c0.coeff(0)?.is_one()) {
            return Err(CalcError::DegenerateInput("log needs constant term 1"));
        }
        let t = self.sub(&FormalSeries::one(self.prec))?;
        t.nilpotency_check()?;
        let mut out = FormalSeries::zero(self.windows.clone(), self.prec);
        out.dir = self.dir.clone();
        let mut pw = FormalSeries::one(self.prec);
        let mut k: i64 = 0;
        loop {
            k += 1;
            pw = pw.mul(&t)?.clamp_to(&self.windows);
            if pw.is_zero() {
                break;
            }
            let c = BigRational::new(if k % 2 == 1 { 1 } else { -1 }.into(), k.into());
            out = out.add(&pw.scale(&HScalar::constant(ParamRat::from_rat(c), self.prec)))?;
            if k > 4096 {
                return Err(CalcError::ExpansionFailure(
                    "log expansion did not terminate within the window".into(),
                ));
            }
        }
        Ok(out)
    }

    /// Largest total degree among nonzero terms, for diagnostics.
    pub fn max_total_degree(&self) -> Option<i64> {
        self.terms.keys().map(|k| k.iter().sum()).max()
    }

    /// Render sorted by total degree, for CLI reports.
    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut keys: Vec<&Vec<i64>> = self.terms.keys().collect();
        keys.sort_by_key(|k| (k.iter().sum::<i64>(), (*k).clone()));
        let mut out = String::new();
        for (n, k) in keys.iter().enumerate() {
            if n > 0 {
                out.push_str(" + ");
            }
            out.push('(');
            out.push_str(&format!("{}", self.terms[*k]));
            out.push(')');
            for (i, e) in k.iter().enumerate() {
                if *e != 0 {
                    out.push_str(&format!("*{}^{}", self.windows[i].name, e));
                }
            }
        }
        out
    }

    /// Evaluate all coefficients at numeric parameters; returns
    /// (exponents, hbar valuation, hbar coefficient strings) per term.
    pub fn eval_terms(
        &self,
        sqrt_p: &BigRational,
        ell: &BigRational,
    ) -> Result<Vec<(Vec<i64>, i64, Vec<BigRational>)>> {
        let mut out = vec![];
        for (k, c) in &self.terms {
            out.push((k.clone(), c.valuation(), c.eval_coeffs(sqrt_p, ell, c.valuation())?));
        }
        Ok(out)
    }
}

impl fmt::Debug for FormalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: i64 = 6;

    fn zw(lo: i64, hi: i64) -> VarWindow {
        VarWindow::new("z", lo, hi)
    }

    fn geom(var: &str, w: &VarWindow) -> FormalSeries {
        // 1/(1-z) = sum z^k
        let one = FormalSeries::one(K);
        let z = FormalSeries::var(var, w, K);
        one.sub(&z).unwrap().invert().unwrap()
    }

    #[test]
    fn product_of_conjugates() {
        let w = zw(-4, 4);
        let one = FormalSeries::one(K);
        let z = FormalSeries::var("z", &w, K);
        let a = one.add(&z).unwrap();
        let b = one.sub(&z).unwrap();
        let p = a.mul(&b).unwrap();
        let z2 = p.coeff_at(&[("z", 2)]);
        assert_eq!(z2, HScalar::from_int(-1, K));
        assert!(p.coeff_at(&[("z", 1)]).is_zero());
    }

    #[test]
    fn inverse_monomial() {
        let w = zw(-4, 4);
        let z = FormalSeries::var("z", &w, K);
        let zi = z.invert().unwrap();
        assert_eq!(zi.coeff_at(&[("z", -1)]), HScalar::one(K));
        assert_eq!(zi.num_terms(), 1);
        // z^-1 * z = 1
        let p = zi.mul(&z).unwrap();
        assert_eq!(p.coeff_at(&[]), HScalar::one(K));
    }

    #[test]
    fn geometric_inverse_within_window() {
        let w = zw(-4, 4);
        let g = geom("z", &w);
        for k in 0..=4 {
            assert_eq!(g.coeff_at(&[("z", k)]), HScalar::one(K), "z^{k}");
        }
        // (sum z^k)(1-z) = 1 inside the reliable window
        let one = FormalSeries::one(K);
        let z = FormalSeries::var("z", &w, K);
        let p = g.mul(&one.sub(&z).unwrap()).unwrap();
        assert_eq!(p.coeff_at(&[]), HScalar::one(K));
        for k in 1..=3 {
            assert!(p.coeff_at(&[("z", k)]).is_zero(), "z^{k}");
        }
    }

    #[test]
    fn invert_one_minus_p_exp_z() {
        // 1/(1 - p e^z): constant (1-p)^-1, z-coefficient p (1-p)^-2.
        let w = zw(0, 5);
        let one = FormalSeries::one(K);
        let ez = FormalSeries::exp_cvar(&HScalar::one(K), "z", &w, K);
        let pez = ez.scale_param(&ParamRat::p());
        let inv = one.sub(&pez).unwrap().invert().unwrap();
        let omp = ParamRat::one().sub(&ParamRat::p());
        assert_eq!(
            inv.coeff_at(&[]).constant_term().unwrap(),
            omp.inv().unwrap()
        );
        assert_eq!(
            inv.coeff_at(&[("z", 1)]).constant_term().unwrap(),
            ParamRat::p().div(&omp.mul(&omp)).unwrap()
        );
    }

    #[test]
    fn scale_var_with_q_power() {
        // 1/(1-z) with z -> q^l z has z^k coefficient q^(lk).
        let w = zw(0, 4);
        let g = geom("z", &w);
        let s = g
            .scale_var("z", &Monomial::q_pow(ParamRat::ell()))
            .unwrap();
        for k in 0..=4 {
            let expect = HScalar::q_power(&ParamRat::ell().mul(&ParamRat::from_int(k)), K);
            assert_eq!(s.coeff_at(&[("z", k)]), expect, "z^{k}");
        }
    }

    #[test]
    fn residue_reads_minus_one() {
        let w = zw(-3, 3);
        let z = FormalSeries::var("z", &w, K);
        let zi = z.invert().unwrap();
        assert_eq!(zi.residue("z").unwrap().coeff_at(&[]), HScalar::one(K));
        // residue of z^-2 e^z is the z^1 coefficient of e^z, i.e. 1
        let ez = FormalSeries::exp_cvar(&HScalar::one(K), "z", &w, K);
        let f = ez.mul(&zi.mul(&zi).unwrap()).unwrap();
        assert_eq!(f.residue("z").unwrap().coeff_at(&[]), HScalar::one(K));
        // residue of a polynomial is zero
        assert!(z.residue("z").unwrap().is_zero());
    }

    #[test]
    fn residue_of_derivative_vanishes() {
        let w = zw(-4, 4);
        let zi = FormalSeries::var("z", &w, K).invert().unwrap();
        let ez = FormalSeries::exp_cvar(&HScalar::one(K), "z", &w, K);
        let f = ez.mul(&zi).unwrap().add(&zi.mul(&zi).unwrap()).unwrap();
        let df = f.derivative("z").unwrap();
        assert!(df.residue("z").unwrap().is_zero());
    }

    #[test]
    fn exp_log_inverse_pair() {
        let w = zw(0, 5);
        let z = FormalSeries::var("z", &w, K);
        // log(1+z) = z - z^2/2 + z^3/3 - ...
        let lg = FormalSeries::one(K).add(&z).unwrap().log().unwrap();
        assert_eq!(
            lg.coeff_at(&[("z", 2)]).constant_term().unwrap(),
            ParamRat::frac(-1, 2)
        );
        assert_eq!(
            lg.coeff_at(&[("z", 3)]).constant_term().unwrap(),
            ParamRat::frac(1, 3)
        );
        let back = lg.exp().unwrap().sub(&FormalSeries::one(K)).unwrap();
        let diff = back.sub(&z).unwrap();
        assert!(diff.is_zero(), "exp(log(1+z)) != 1+z: {diff:?}");
    }

    #[test]
    fn exp_of_hbar_z() {
        // exp(h z) at prec 3: 1 + h z + h^2 z^2 / 2.
        let w = zw(0, 5);
        let hz = FormalSeries::monomial(
            HScalar::monomial(ParamRat::one(), 1, 3),
            "z",
            1,
            &w,
            3,
        );
        let e = hz.exp().unwrap();
        assert_eq!(e.coeff_at(&[("z", 0)]), HScalar::one(3));
        assert_eq!(
            e.coeff_at(&[("z", 2)]),
            HScalar::monomial(ParamRat::frac(1, 2), 2, 3)
        );
        assert!(e.coeff_at(&[("z", 3)]).is_zero());
    }

    #[test]
    fn exp_rejects_non_nilpotent() {
        let w = zw(-3, 3);
        let zi = FormalSeries::var("z", &w, K).invert().unwrap();
        let z = FormalSeries::var("z", &w, K);
        let bad = z.add(&zi).unwrap();
        assert!(bad.exp().is_err());
    }

    #[test]
    fn direction_clash_detected() {
        let w1 = VarWindow::new("z1", -2, 2);
        let w2 = VarWindow::new("z2", -2, 2);
        let a = FormalSeries::var("z1", &w1, K)
            .with_direction(&["z1".into(), "z2".into()]);
        let b = FormalSeries::var("z2", &w2, K)
            .with_direction(&["z2".into(), "z1".into()]);
        assert!(matches!(a.add(&b), Err(CalcError::DirectionClash(_))));
        assert!(a.clone().untagged().add(&b.untagged()).is_ok());
    }

    #[test]
    fn classical_zeta_constant() {
        // e^z/(1-e^z)^2 - z^-2 has constant term -1/12 and no negative powers.
        let w = zw(-6, 6);
        let one = FormalSeries::one(K);
        let ez = FormalSeries::exp_cvar(&HScalar::one(K), "z", &zw(0, 14), K);
        let denom = one.sub(&ez).unwrap();
        let f = ez.mul(&denom.mul(&denom).unwrap().invert().unwrap())
            .unwrap()
            .clamp_to(&[w.clone()]);
        let z2 = FormalSeries::var("z", &w, K)
            .invert()
            .unwrap();
        let z2 = z2.mul(&z2).unwrap();
        let g = f.sub(&z2).unwrap();
        for k in -6..0 {
            assert!(g.coeff_at(&[("z", k)]).is_zero(), "negative power z^{k}");
        }
        assert_eq!(
            g.coeff_at(&[("z", 0)]).constant_term().unwrap(),
            ParamRat::frac(-1, 12)
        );
    }
}
