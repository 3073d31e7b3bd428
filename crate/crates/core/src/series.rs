//! Truncated Laurent series over a residue field.
//!
//! A series records the exponent of its first known coefficient and an
//! optional horizon: coefficients at exponents `>= horizon` are unknown.
//! `horizon = None` means the element is exact (all omitted coefficients are
//! zero). Arithmetic combines horizons so that no operation silently narrows
//! what is certified.

use crate::error::{Error, Result};
use crate::residue::{RatFun, ResidueField};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Series {
    start: i64,
    coeffs: Vec<RatFun>,
    horizon: Option<i64>,
}

fn min_h(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, x) => x,
        (x, None) => x,
        (Some(x), Some(y)) => Some(x.min(y)),
    }
}

impl Series {
    pub fn zero() -> Series {
        Series {
            start: 0,
            coeffs: Vec::new(),
            horizon: None,
        }
    }

    pub fn zero_mod(h: i64) -> Series {
        Series {
            start: 0,
            coeffs: Vec::new(),
            horizon: Some(h),
        }
    }

    pub fn monomial(field: &ResidueField, c: RatFun, exp: i64) -> Series {
        let s = Series {
            start: exp,
            coeffs: vec![c],
            horizon: None,
        };
        s.normalized(field)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn horizon(&self) -> Option<i64> {
        self.horizon
    }

    pub fn is_exact(&self) -> bool {
        self.horizon.is_none()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.coeffs.is_empty() && self.horizon.is_none()
    }

    /// Zero as far as is known (possibly only up to the horizon).
    pub fn is_known_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Exponent and coefficient of the first known nonzero term.
    pub fn known_leading(&self) -> Option<(i64, &RatFun)> {
        self.coeffs.first().map(|c| (self.start, c))
    }

    /// Certified valuation: `Ok(None)` means the element is exactly zero.
    pub fn valuation(&self) -> Result<Option<i64>> {
        match (self.coeffs.first(), self.horizon) {
            (Some(_), _) => Ok(Some(self.start)),
            (None, None) => Ok(None),
            (None, Some(h)) => Err(Error::PrecisionExhausted(format!(
                "series is zero modulo pi^{h}; valuation unknown"
            ))),
        }
    }

    pub fn coeff_at(&self, exp: i64) -> Option<&RatFun> {
        if exp < self.start {
            return None;
        }
        let idx = (exp - self.start) as usize;
        self.coeffs.get(idx)
    }

    /// Iterate over known (exponent, coefficient) pairs with nonzero
    /// coefficients.
    pub fn iter_terms(&self) -> impl Iterator<Item = (i64, &RatFun)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.start + i as i64, c))
    }

    fn normalized(mut self, _field: &ResidueField) -> Series {
        if let Some(h) = self.horizon {
            let keep = (h - self.start).max(0) as usize;
            self.coeffs.truncate(keep);
        }
        while self.coeffs.first().map_or(false, |c| c.is_zero()) {
            self.coeffs.remove(0);
            self.start += 1;
        }
        while self.coeffs.last().map_or(false, |c| c.is_zero()) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.start = 0;
        }
        self
    }

    pub fn from_terms(field: &ResidueField, terms: Vec<(i64, RatFun)>, horizon: Option<i64>) -> Series {
        if terms.is_empty() {
            return Series {
                start: 0,
                coeffs: Vec::new(),
                horizon,
            };
        }
        let start = terms.iter().map(|(e, _)| *e).min().unwrap();
        let end = terms.iter().map(|(e, _)| *e).max().unwrap();
        let mut coeffs = vec![field.zero(); (end - start + 1) as usize];
        for (e, c) in terms {
            let idx = (e - start) as usize;
            coeffs[idx] = field.add(&coeffs[idx], &c);
        }
        Series {
            start,
            coeffs,
            horizon,
        }
        .normalized(field)
    }

    pub fn add(field: &ResidueField, a: &Series, b: &Series) -> Series {
        let horizon = min_h(a.horizon, b.horizon);
        if a.coeffs.is_empty() && b.coeffs.is_empty() {
            return Series {
                start: 0,
                coeffs: Vec::new(),
                horizon,
            };
        }
        let start = match (a.coeffs.is_empty(), b.coeffs.is_empty()) {
            (true, false) => b.start,
            (false, true) => a.start,
            _ => a.start.min(b.start),
        };
        let end = (a.start + a.coeffs.len() as i64).max(b.start + b.coeffs.len() as i64);
        let mut coeffs = vec![field.zero(); (end - start) as usize];
        for (i, c) in a.coeffs.iter().enumerate() {
            let idx = (a.start + i as i64 - start) as usize;
            coeffs[idx] = field.add(&coeffs[idx], c);
        }
        for (i, c) in b.coeffs.iter().enumerate() {
            let idx = (b.start + i as i64 - start) as usize;
            coeffs[idx] = field.add(&coeffs[idx], c);
        }
        Series {
            start,
            coeffs,
            horizon,
        }
        .normalized(field)
    }

    pub fn neg(field: &ResidueField, a: &Series) -> Series {
        Series {
            start: a.start,
            coeffs: a.coeffs.iter().map(|c| field.neg(c)).collect(),
            horizon: a.horizon,
        }
    }

    pub fn sub(field: &ResidueField, a: &Series, b: &Series) -> Series {
        Series::add(field, a, &Series::neg(field, b))
    }

    /// Lower bound on the valuation, used for horizon bookkeeping.
    fn val_lower(&self) -> Option<i64> {
        if !self.coeffs.is_empty() {
            Some(self.start)
        } else {
            self.horizon
        }
    }

    pub fn mul(field: &ResidueField, a: &Series, b: &Series) -> Series {
        Series::mul_capped(field, a, b, None)
    }

    pub fn mul_capped(
        field: &ResidueField,
        a: &Series,
        b: &Series,
        cap: Option<i64>,
    ) -> Series {
        if a.is_exact_zero() || b.is_exact_zero() {
            return Series::zero();
        }
        // x = known_a + O(pi^ha), y = known_b + O(pi^hb):
        // xy = known_a*known_b + O(pi^(ha + v(y))) + O(pi^(hb + v(x)))
        let ha = match (a.horizon, b.val_lower()) {
            (Some(h), Some(v)) => Some(h + v),
            (Some(_), None) => None, // b exactly zero; handled above
            (None, _) => None,
        };
        let hb = match (b.horizon, a.val_lower()) {
            (Some(h), Some(v)) => Some(h + v),
            (Some(_), None) => None,
            (None, _) => None,
        };
        let horizon = min_h(min_h(ha, hb), cap);
        if a.coeffs.is_empty() || b.coeffs.is_empty() {
            return Series {
                start: 0,
                coeffs: Vec::new(),
                horizon,
            };
        }
        let start = a.start + b.start;
        let full_len = a.coeffs.len() + b.coeffs.len() - 1;
        let len = match horizon {
            Some(h) => ((h - start).max(0) as usize).min(full_len),
            None => full_len,
        };
        let mut coeffs = vec![field.zero(); len];
        for (i, ca) in a.coeffs.iter().enumerate() {
            if ca.is_zero() || i >= len {
                continue;
            }
            for (j, cb) in b.coeffs.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                if cb.is_zero() {
                    continue;
                }
                coeffs[i + j] = field.add(&coeffs[i + j], &field.mul(ca, cb));
            }
        }
        Series {
            start,
            coeffs,
            horizon,
        }
        .normalized(field)
    }

    pub fn scale(field: &ResidueField, a: &Series, c: &RatFun) -> Series {
        if c.is_zero() {
            return Series {
                start: 0,
                coeffs: Vec::new(),
                horizon: a.horizon,
            };
        }
        Series {
            start: a.start,
            coeffs: a.coeffs.iter().map(|x| field.mul(x, c)).collect(),
            horizon: a.horizon,
        }
        .normalized(field)
    }

    /// Multiply by `pi^k`.
    pub fn shift(&self, k: i64) -> Series {
        Series {
            start: self.start + k,
            coeffs: self.coeffs.clone(),
            horizon: self.horizon.map(|h| h + k),
        }
    }

    pub fn truncate(mut self, field: &ResidueField, h: i64) -> Series {
        self.horizon = min_h(self.horizon, Some(h));
        self.normalized(field)
    }

    /// Inverse as a geometric series with `nterms` known coefficients
    /// (relative to the valuation of the result).
    pub fn inv(&self, field: &ResidueField, nterms: i64) -> Result<Series> {
        let (v, c0) = match self.known_leading() {
            Some(x) => x,
            None => {
                return Err(if self.is_exact_zero() {
                    Error::DivisionByZero
                } else {
                    Error::PrecisionExhausted(
                        "cannot invert: leading term unknown at current precision".into(),
                    )
                })
            }
        };
        let c0_inv = field.inv(c0)?;
        // unit = x * c0^{-1} * pi^{-v} = 1 + eps with v(eps) >= 1
        let unit = Series::scale(field, &self.shift(-v), &c0_inv);
        let one = Series::monomial(field, field.one(), 0);
        let eps_full = Series::sub(field, &unit, &one);
        if eps_full.is_exact_zero() {
            return Ok(Series::monomial(field, c0_inv, -v));
        }
        let cap = match eps_full.horizon {
            Some(h) => h.min(nterms),
            None => nterms,
        };
        let neg_eps = Series::neg(field, &eps_full).truncate(field, cap);
        let mut acc = one.clone();
        let mut term = one;
        loop {
            term = Series::mul_capped(field, &term, &neg_eps, Some(cap));
            if term.coeffs.is_empty() {
                break;
            }
            acc = Series::add(field, &acc, &term);
        }
        // the inverse of a unit series is determined exactly to the cap
        let mut out = Series::scale(field, &acc, &c0_inv).shift(-v);
        out.horizon = Some(cap - v);
        Ok(out.normalized(field))
    }

    pub fn frobenius(&self, field: &ResidueField) -> Series {
        let p = field.p() as i64;
        let mut coeffs = vec![field.zero(); ((self.coeffs.len() as i64 - 1).max(0) * p + 1) as usize];
        if self.coeffs.is_empty() {
            return Series {
                start: 0,
                coeffs: Vec::new(),
                horizon: self.horizon.map(|h| h * p),
            };
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                coeffs[i * p as usize] = field.frobenius(c);
            }
        }
        Series {
            start: self.start * p,
            coeffs,
            horizon: self.horizon.map(|h| h * p),
        }
        .normalized(field)
    }

    /// `pi * d/d pi`: each term `c pi^n` maps to `n c pi^n`.
    pub fn pi_log_derivative(&self, field: &ResidueField) -> Series {
        Series {
            start: self.start,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| field.mul(c, &field.from_i64(self.start + i as i64)))
                .collect(),
            horizon: self.horizon,
        }
        .normalized(field)
    }

    /// Apply the partial derivative in residue variable `var` to every
    /// coefficient.
    pub fn coeff_derivative(&self, field: &ResidueField, var: usize) -> Series {
        Series {
            start: self.start,
            coeffs: self.coeffs.iter().map(|c| field.derivative(c, var)).collect(),
            horizon: self.horizon,
        }
        .normalized(field)
    }

    /// Map coefficients into an extended residue field (appended variables).
    pub fn extend_coeffs(&self, field: &ResidueField, target: &ResidueField) -> Series {
        Series {
            start: self.start,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| field.extend_to(c, target))
                .collect(),
            horizon: self.horizon,
        }
    }

    /// Reindex exponents by a positive factor (uniformizer replacement
    /// `pi = rho^e`).
    pub fn stretch(&self, field: &ResidueField, e: i64) -> Series {
        debug_assert!(e > 0);
        if self.coeffs.is_empty() {
            return Series {
                start: 0,
                coeffs: Vec::new(),
                horizon: self.horizon.map(|h| h * e),
            };
        }
        let mut coeffs = Vec::with_capacity((self.coeffs.len() - 1) * e as usize + 1);
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                for _ in 0..(e - 1) {
                    coeffs.push(field.zero());
                }
            }
            coeffs.push(c.clone());
        }
        Series {
            start: self.start * e,
            coeffs,
            horizon: self.horizon.map(|h| h * e),
        }
    }

    /// Map every coefficient through `f`, keeping exponents and horizon.
    pub fn map_coeffs(&self, f: impl Fn(&RatFun) -> RatFun) -> Series {
        Series {
            start: self.start,
            coeffs: self.coeffs.iter().map(f).collect(),
            horizon: self.horizon,
        }
    }

    pub fn renormalize(self, field: &ResidueField) -> Series {
        self.normalized(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3() -> ResidueField {
        ResidueField::new(3, 3, vec![]).unwrap()
    }

    fn mono(f: &ResidueField, c: i64, e: i64) -> Series {
        Series::monomial(f, f.from_i64(c), e)
    }

    #[test]
    fn geometric_inverse() {
        let f = f3();
        // (1+u)^{-1} = 1 - u + u^2 - u^3 + ... to the requested precision
        let one_plus_u = Series::add(&f, &mono(&f, 1, 0), &mono(&f, 1, 1));
        let inv = one_plus_u.inv(&f, 8).unwrap();
        let prod = Series::mul(&f, &one_plus_u, &inv);
        // product is 1 modulo pi^8
        assert_eq!(prod.horizon(), Some(8));
        let one = mono(&f, 1, 0);
        let diff = Series::sub(&f, &prod, &one);
        assert!(diff.is_known_zero());
        for k in 0..8 {
            let expect = if k % 2 == 0 { 1 } else { 2 };
            assert_eq!(inv.coeff_at(k).unwrap(), &f.from_i64(expect));
        }
    }

    #[test]
    fn monomial_inverse_is_exact() {
        let f = f3();
        let x = mono(&f, 2, -3);
        let inv = x.inv(&f, 8).unwrap();
        assert_eq!(inv, mono(&f, 2, 3)); // 2^{-1} = 2 in F_3
        assert!(inv.is_exact());
    }

    #[test]
    fn valuation_certification() {
        let f = f3();
        let x = mono(&f, 1, -2);
        assert_eq!(x.valuation().unwrap(), Some(-2));
        assert_eq!(Series::zero().valuation().unwrap(), None);
        let z = Series::zero_mod(5);
        assert!(z.valuation().is_err());
        // u^{-3} + u^2 has valuation -3
        let y = Series::add(&f, &mono(&f, 1, -3), &mono(&f, 1, 2));
        assert_eq!(y.valuation().unwrap(), Some(-3));
    }

    #[test]
    fn horizon_propagation() {
        let f = f3();
        let x = mono(&f, 1, 1).truncate(&f, 4); // u + O(u^4)
        let y = mono(&f, 1, -2); // exact u^{-2}
        let p = Series::mul(&f, &x, &y);
        assert_eq!(p.horizon(), Some(2)); // 4 + (-2)
        assert_eq!(p.valuation().unwrap(), Some(-1));
        let s = Series::add(&f, &x, &y);
        assert_eq!(s.horizon(), Some(4));
    }

    #[test]
    fn frobenius_and_stretch() {
        let f = f3();
        let x = Series::add(&f, &mono(&f, 2, -1), &mono(&f, 1, 2));
        let fx = x.frobenius(&f);
        assert_eq!(fx.coeff_at(-3).unwrap(), &f.from_i64(8 % 3));
        assert_eq!(fx.coeff_at(6).unwrap(), &f.from_i64(1));
        assert_eq!(fx.valuation().unwrap(), Some(-3));
        let sx = x.stretch(&f, 2);
        assert_eq!(sx.valuation().unwrap(), Some(-2));
        assert_eq!(sx.coeff_at(4).unwrap(), &f.from_i64(1));
        assert!(sx.coeff_at(3).unwrap().is_zero());
    }

    #[test]
    fn pi_log_derivative_kills_p_divisible_exponents() {
        let f = f3();
        let x = Series::add(&f, &mono(&f, 1, -3), &mono(&f, 1, 2));
        let d = x.pi_log_derivative(&f);
        // -3 coefficient dies in char 3, 2*u^2 survives
        assert_eq!(d.valuation().unwrap(), Some(2));
        assert_eq!(d.coeff_at(2).unwrap(), &f.from_i64(2));
    }
}
