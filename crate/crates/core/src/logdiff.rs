//! Log differential forms over tower levels.
//!
//! A form is stored over the level's basis `{dT_lambda, dlog pi}`. The log
//! valuation `v^log` is the minimum coefficient valuation. Differentials are
//! computed by recursion over the tower; across an Artin-Schreier step the
//! relation `d(alpha) = -df` is used to rewrite `dlog pi_below` in the new
//! basis, inverting
//!
//! `dlog pi_L = (b - a g / alpha) dlog pi_below - (a / alpha) sum h_l dT_l`
//!
//! where `df = g dlog pi_below + sum h_l dT_l` and `pi_L = alpha^a pi_below^b`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::tower::{FieldElement, LevelKind, Tower, Val};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LogForm {
    level: usize,
    pub pi_coeff: FieldElement,
    pub var_coeffs: BTreeMap<String, FieldElement>,
}

impl LogForm {
    pub fn zero(tower: &Tower, level: usize) -> LogForm {
        LogForm {
            level,
            pi_coeff: tower.zero(level),
            var_coeffs: BTreeMap::new(),
        }
    }

    pub fn dlog_pi(tower: &Tower, level: usize) -> LogForm {
        LogForm {
            level,
            pi_coeff: tower.one(level),
            var_coeffs: BTreeMap::new(),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn add(&self, tower: &Tower, other: &LogForm) -> LogForm {
        assert_eq!(self.level, other.level);
        let mut var_coeffs = self.var_coeffs.clone();
        for (k, v) in &other.var_coeffs {
            match var_coeffs.get_mut(k) {
                Some(c) => *c = tower.add(c, v),
                None => {
                    var_coeffs.insert(k.clone(), v.clone());
                }
            }
        }
        LogForm {
            level: self.level,
            pi_coeff: tower.add(&self.pi_coeff, &other.pi_coeff),
            var_coeffs,
        }
    }

    pub fn neg(&self, tower: &Tower) -> LogForm {
        LogForm {
            level: self.level,
            pi_coeff: tower.neg(&self.pi_coeff),
            var_coeffs: self
                .var_coeffs
                .iter()
                .map(|(k, v)| (k.clone(), tower.neg(v)))
                .collect(),
        }
    }

    pub fn sub(&self, tower: &Tower, other: &LogForm) -> LogForm {
        self.add(tower, &other.neg(tower))
    }

    pub fn scale(&self, tower: &Tower, x: &FieldElement) -> LogForm {
        LogForm {
            level: self.level,
            pi_coeff: tower.mul(&self.pi_coeff, x),
            var_coeffs: self
                .var_coeffs
                .iter()
                .map(|(k, v)| (k.clone(), tower.mul(v, x)))
                .collect(),
        }
    }

    pub fn var_coeff(&self, name: &str) -> Option<&FieldElement> {
        self.var_coeffs.get(name)
    }

    pub fn is_exact_zero(&self) -> bool {
        self.pi_coeff.is_exact_zero() && self.var_coeffs.values().all(|c| c.is_exact_zero())
    }
}

/// `v^log` of a form: minimum coefficient valuation, certified against the
/// precision horizons of all coefficients.
pub fn v_log(tower: &Tower, form: &LogForm) -> Result<Val> {
    let mut known: Option<i64> = None;
    let mut unknown: Option<i64> = None;
    let coeffs = std::iter::once(&form.pi_coeff).chain(form.var_coeffs.values());
    for c in coeffs {
        let (kv, hz) = tower.val_bounds(c);
        if let Some(v) = kv {
            known = Some(known.map_or(v, |k| k.min(v)));
        }
        if let Some(h) = hz {
            unknown = Some(unknown.map_or(h, |u| u.min(h)));
        }
    }
    match (known, unknown) {
        (Some(v), None) => Ok(Val::Finite(v)),
        (Some(v), Some(h)) if v < h => Ok(Val::Finite(v)),
        (None, None) => Ok(Val::Infinite),
        (kv, hz) => Err(Error::PrecisionExhausted(format!(
            "v_log not certified: known {kv:?}, horizon {hz:?}"
        ))),
    }
}

/// Two forms represent the same class modulo `F_m` when their difference has
/// `v^log >= -m`.
pub fn class_eq(tower: &Tower, a: &LogForm, b: &LogForm, m: i64) -> Result<bool> {
    let diff = a.sub(tower, b);
    Ok(match v_log(tower, &diff)? {
        Val::Infinite => true,
        Val::Finite(v) => v >= -m,
    })
}

/// Expression of `dlog pi_below` in the basis of an Artin-Schreier level.
fn dlog_pi_below(tower: &Tower, level: usize) -> Result<LogForm> {
    let LevelKind::ArtinSchreier { f, a, b, .. } = &tower.level(level).kind else {
        panic!("dlog_pi_below is only meaningful at Artin-Schreier levels");
    };
    let (a, b) = (*a, *b);
    let df = differential(tower, f)?;
    let alpha_inv = tower.inv(&tower.alpha(level)?)?;
    let g = tower.embed(&df.pi_coeff, level)?;
    let residue = tower.residue(level).clone();
    let a_scalar = tower.constant(level, residue.from_i64(a as i64));
    let b_scalar = tower.constant(level, residue.from_i64(b));
    // U = b - a g / alpha
    let u = tower.sub(
        &b_scalar,
        &tower.mul(&a_scalar, &tower.mul(&g, &alpha_inv)),
    );
    let u_inv = tower.inv(&u)?;
    let a_over_alpha = tower.mul(&a_scalar, &alpha_inv);
    let mut var_coeffs = BTreeMap::new();
    for (name, h) in &df.var_coeffs {
        let lifted = tower.embed(h, level)?;
        let c = tower.mul(&u_inv, &tower.mul(&a_over_alpha, &lifted));
        var_coeffs.insert(name.clone(), c);
    }
    Ok(LogForm {
        level,
        pi_coeff: u_inv,
        var_coeffs,
    })
}

/// Rewrite a form of level `l` over the basis of level `l + 1`.
pub fn lift_form(tower: &Tower, form: &LogForm) -> Result<LogForm> {
    let to = form.level + 1;
    assert!(to < tower.num_levels());
    match &tower.level(to).kind {
        LevelKind::Laurent => {
            let e_step = tower.level(to).e_step as i64;
            let mut var_coeffs = BTreeMap::new();
            for (name, c) in &form.var_coeffs {
                var_coeffs.insert(name.clone(), tower.embed(c, to)?);
            }
            // dlog pi_below = e dlog rho for a tame step, unchanged otherwise
            let scalar = tower.residue(to).from_i64(e_step);
            let pi_coeff = tower.mul(
                &tower.embed(&form.pi_coeff, to)?,
                &tower.constant(to, scalar),
            );
            Ok(LogForm {
                level: to,
                pi_coeff,
                var_coeffs,
            })
        }
        LevelKind::ArtinSchreier { .. } => {
            let w = dlog_pi_below(tower, to)?;
            let mut out = w.scale(tower, &tower.embed(&form.pi_coeff, to)?);
            for (name, c) in &form.var_coeffs {
                let lifted = tower.embed(c, to)?;
                let term = LogForm {
                    level: to,
                    pi_coeff: tower.zero(to),
                    var_coeffs: BTreeMap::from([(name.clone(), lifted)]),
                };
                out = out.add(tower, &term);
            }
            Ok(out)
        }
    }
}

pub fn transport_form(tower: &Tower, form: &LogForm, to: usize) -> Result<LogForm> {
    let mut cur = form.clone();
    while cur.level < to {
        cur = lift_form(tower, &cur)?;
    }
    Ok(cur)
}

/// Differential of an element as a log form at its own level.
pub fn differential(tower: &Tower, x: &FieldElement) -> Result<LogForm> {
    let level = x.level();
    match &tower.level(level).kind {
        LevelKind::Laurent => {
            let s = x.as_series().expect("laurent level");
            let field = tower.residue(level);
            let pi_coeff = tower.from_series(level, s.pi_log_derivative(field));
            let mut var_coeffs = BTreeMap::new();
            for (idx, name) in field.vars().iter().enumerate() {
                let d = s.coeff_derivative(field, idx);
                if !(d.is_known_zero() && d.is_exact()) {
                    var_coeffs.insert(name.clone(), tower.from_series(level, d));
                }
            }
            Ok(LogForm {
                level,
                pi_coeff,
                var_coeffs,
            })
        }
        LevelKind::ArtinSchreier { f, .. } => {
            let coords = x.as_vector().expect("vector representation").to_vec();
            let df = differential(tower, f)?;
            let lifted_df = lift_level_form(tower, &df, level)?;
            let alpha = tower.alpha(level)?;
            let residue = tower.residue(level).clone();
            // sum_i alpha^i d(c_i)
            let mut out = LogForm::zero(tower, level);
            let mut alpha_pow = tower.one(level);
            // sum_i i c_i alpha^{i-1}
            let mut chain = tower.zero(level);
            let mut alpha_pow_prev = tower.one(level);
            for (i, c) in coords.iter().enumerate() {
                if i > 0 {
                    alpha_pow_prev = alpha_pow.clone();
                    alpha_pow = tower.mul(&alpha_pow, &alpha);
                }
                if c.is_exact_zero() {
                    continue;
                }
                let dc = differential(tower, c)?;
                let lifted = lift_level_form(tower, &dc, level)?;
                out = out.add(tower, &lifted.scale(tower, &alpha_pow));
                if i > 0 {
                    let scalar = tower.constant(level, residue.from_i64(i as i64));
                    let coeff = tower.mul(
                        &scalar,
                        &tower.mul(&tower.embed(c, level)?, &alpha_pow_prev),
                    );
                    chain = tower.add(&chain, &coeff);
                }
            }
            let correction = lifted_df.scale(tower, &chain);
            Ok(out.sub(tower, &correction))
        }
    }
}

/// Lift a form one step into the given Artin-Schreier level (helper for the
/// recursion in `differential`).
fn lift_level_form(tower: &Tower, form: &LogForm, level: usize) -> Result<LogForm> {
    debug_assert_eq!(form.level + 1, level);
    lift_form(tower, form)
}

/// Torsion length of the relative log differential module, computed as the
/// content valuation of the image of `dlog pi_from` at the target level.
pub fn delta_tor(tower: &Tower, from: usize, to: usize) -> Result<i64> {
    if !tower.residue_is_perfect(from) {
        return Err(Error::MalformedParams(
            "delta_tor requires a perfect residue field at the lower level".into(),
        ));
    }
    tower.with_precision_retry(|t| {
        let form = LogForm::dlog_pi(t, from);
        let lifted = transport_form(t, &form, to)?;
        match v_log(t, &lifted)? {
            Val::Finite(v) => {
                debug_assert!(v >= 0, "torsion length must be non-negative");
                Ok(v)
            }
            Val::Infinite => Err(Error::ZeroDifferential),
        }
    })
}

/// `delta(a) = -v^log_from(da) + v^log_to(da) / e(to/from)` as an exact
/// rational.
pub fn delta_a(tower: &Tower, a: &FieldElement, to: usize) -> Result<BigRational> {
    let from = a.level();
    tower.with_precision_retry(|t| {
        let da = differential(t, a)?;
        let v_from = match v_log(t, &da)? {
            Val::Finite(v) => v,
            Val::Infinite => return Err(Error::ZeroDifferential),
        };
        let lifted = transport_form(t, &da, to)?;
        let v_to = match v_log(t, &lifted)? {
            Val::Finite(v) => v,
            Val::Infinite => return Err(Error::ZeroDifferential),
        };
        let e = t.e_rel(from, to);
        Ok(BigRational::new(BigInt::from(-v_from), BigInt::from(1))
            + BigRational::new(BigInt::from(v_to), BigInt::from(e)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn base3() -> Tower {
        Tower::base(3, 3).unwrap()
    }

    /// [Constant(T), ArtinSchreier(c * u^{-1})] over F_3.
    fn as_tower(with_t: bool) -> Tower {
        let t1 = base3().extended_constant("T").unwrap();
        let k = t1.residue(1).clone();
        let c = if with_t { k.var("T").unwrap() } else { k.one() };
        let f = t1.monomial(1, c, -1).unwrap();
        t1.extended_artin_schreier(f).unwrap()
    }

    #[test]
    fn differential_of_monomial() {
        let t = base3();
        let x = t.uniformizer_pow(0, -2).unwrap();
        let d = differential(&t, &x).unwrap();
        // d(u^{-2}) = -2 u^{-2} dlog u = u^{-2} dlog u
        let expected = t.monomial(0, t.residue(0).from_i64(-2), -2).unwrap();
        assert!(t.sub(&d.pi_coeff, &expected).is_exact_zero());
        assert!(d.var_coeffs.is_empty());
        assert_eq!(v_log(&t, &d).unwrap(), Val::Finite(-2));
        // d(u^{-3}) = 0 in char 3
        let x3 = t.uniformizer_pow(0, -3).unwrap();
        let d3 = differential(&t, &x3).unwrap();
        assert_eq!(v_log(&t, &d3).unwrap(), Val::Infinite);
    }

    #[test]
    fn char_p_cancellation_with_variables() {
        // d(T u^{-3}) = u^{-3} dT at F_3(T)((u))
        let t = base3().extended_constant("T").unwrap();
        let k = t.residue(1);
        let x = t.monomial(1, k.var("T").unwrap(), -3).unwrap();
        let d = differential(&t, &x).unwrap();
        assert!(d.pi_coeff.is_exact_zero());
        let dt = d.var_coeff("T").unwrap();
        let expected = t.monomial(1, k.one(), -3).unwrap();
        assert!(t.sub(dt, &expected).is_exact_zero());
        assert_eq!(v_log(&t, &d).unwrap(), Val::Finite(-3));
    }

    #[test]
    fn dlog_u_at_artin_schreier_level() {
        // f = u^{-1}: v^log(dlog u at L) = 2
        let t = as_tower(false);
        let form = LogForm::dlog_pi(&t, 0);
        let lifted = transport_form(&t, &form, 2).unwrap();
        assert_eq!(v_log(&t, &lifted).unwrap(), Val::Finite(2));
        assert!(lifted.var_coeffs.is_empty());

        // f = T u^{-1}: dT coefficient appears at valuation 0
        let tt = as_tower(true);
        let lifted = transport_form(&tt, &LogForm::dlog_pi(&tt, 0), 2).unwrap();
        let vpi = tt.valuation(&lifted.pi_coeff).unwrap();
        assert_eq!(vpi, Val::Finite(2));
        let vdt = tt.valuation(lifted.var_coeff("T").unwrap()).unwrap();
        assert_eq!(vdt, Val::Finite(0));
        assert_eq!(v_log(&tt, &lifted).unwrap(), Val::Finite(0));
    }

    #[test]
    fn delta_tor_values() {
        // tame tower: 0
        let tame = base3().extended_tame(2).unwrap();
        assert_eq!(delta_tor(&tame, 0, 1).unwrap(), 0);
        // [Constant(T), AS(u^{-1})]: (p-1) m = 2
        let t = as_tower(false);
        assert_eq!(delta_tor(&t, 0, 2).unwrap(), 2);
        // [Constant(T), AS(T u^{-1})]: 0
        let tt = as_tower(true);
        assert_eq!(delta_tor(&tt, 0, 2).unwrap(), 0);
    }

    #[test]
    fn delta_a_values() {
        // tame tower, a = u^{-N}: delta = 0
        let tame = base3().extended_tame(2).unwrap();
        let a = tame.uniformizer_pow(0, -5).unwrap();
        assert!(delta_a(&tame, &a, 1).unwrap().is_zero());

        // AS(u^{-1}) tower, a = u^{-N}, p coprime N: delta = 2/3
        let t = as_tower(false);
        for n in [1i64, 2, 4, 5] {
            let a = t.uniformizer_pow(0, -n).unwrap();
            let d = delta_a(&t, &a, 2).unwrap();
            assert_eq!(
                d,
                BigRational::new(BigInt::from(2), BigInt::from(3)),
                "n = {n}"
            );
        }

        // AS(T u^{-1}) tower: delta = 0
        let tt = as_tower(true);
        let a = tt.uniformizer_pow(0, -2).unwrap();
        assert!(delta_a(&tt, &a, 2).unwrap().is_zero());
    }

    #[test]
    fn derivation_rules() {
        let t = as_tower(true);
        let k1 = t.residue(1);
        let x = t
            .embed(&t.monomial(1, k1.var("T").unwrap(), -2).unwrap(), 2)
            .unwrap();
        let alpha = t.alpha(2).unwrap();
        let y = t.add(&alpha, &t.one(2));
        // d(xy) = x dy + y dx
        let dxy = differential(&t, &t.mul(&x, &y)).unwrap();
        let dx = differential(&t, &x).unwrap();
        let dy = differential(&t, &y).unwrap();
        let rhs = dy.scale(&t, &x).add(&t, &dx.scale(&t, &y));
        let diff = dxy.sub(&t, &rhs);
        assert!(
            diff.pi_coeff.is_known_zero() && diff.var_coeffs.values().all(|c| c.is_known_zero())
        );
        // d(x^p) = 0
        let dxp = differential(&t, &t.pow(&x, 3).unwrap()).unwrap();
        assert_eq!(v_log(&t, &dxp).unwrap(), Val::Infinite);
        let dyp = differential(&t, &t.pow(&y, 3).unwrap()).unwrap();
        match v_log(&t, &dyp) {
            Ok(Val::Infinite) => {}
            Ok(v) => panic!("expected zero differential, got v_log {v}"),
            Err(_) => {} // zero modulo the horizon is acceptable
        }
    }

    #[test]
    fn differential_commutes_with_embedding() {
        let t = as_tower(false);
        let k1 = t.residue(1);
        let a = t.monomial(1, k1.var("T").unwrap(), -4).unwrap();
        let via_transport = transport_form(&t, &differential(&t, &a).unwrap(), 2).unwrap();
        let via_embed = differential(&t, &t.embed(&a, 2).unwrap()).unwrap();
        let diff = via_transport.sub(&t, &via_embed);
        assert!(
            diff.pi_coeff.is_known_zero() && diff.var_coeffs.values().all(|c| c.is_known_zero())
        );
    }

    #[test]
    fn v_log_scaling() {
        let t = as_tower(false);
        let form = transport_form(&t, &LogForm::dlog_pi(&t, 0), 2).unwrap();
        let x = t.embed(&t.uniformizer_pow(0, -1).unwrap(), 2).unwrap();
        let scaled = form.scale(&t, &x);
        // v_log(x form) = v(x) + v_log(form) = -3 + 2
        assert_eq!(v_log(&t, &scaled).unwrap(), Val::Finite(-1));
    }
}
