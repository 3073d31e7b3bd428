//! Perfection probes and tame twists.
//!
//! A probe is a finite stand-in for the infinite residue-perfecting
//! extensions used to isolate which refined-Swan coefficient carries the
//! conductor: `pi_root(j)` adjoins a `p^j`-th root of one residue variable,
//! `shift_probe(i, j)` adjoins a `p^i`-th root `rho` of the uniformizer and
//! replaces the variable by `fresh^{p^j} + rho`. A tame twist prepends a tame
//! step of index `e` coprime to everything wild, realizing the compositum
//! with `K(pi_K^{1/e})`.

use crate::error::{Error, Result};
use crate::residue::{MPoly, RatFun, ResidueField};
use crate::series::Series;
use crate::tower::{gcd, FieldElement, LevelKind, Repr, Tower};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ProbeKind {
    /// Substitute `var = fresh^{p^j}`; unramified, residue extension only.
    PiRoot { j: u32 },
    /// Adjoin `rho^{p^i} = pi`, substitute `var = fresh^{p^j} + rho`.
    Shift { i: u32, j: u32 },
}

#[derive(Clone, Debug)]
pub struct Probe {
    pub src: Tower,
    pub dst: Tower,
    /// Ramification index of the probe field over the source top level.
    pub e_factor: u64,
    pub kind: ProbeKind,
    pub var: String,
    pub fresh: String,
    var_idx: usize,
}

#[derive(Clone, Debug)]
pub struct TameTwist {
    pub src: Tower,
    pub dst: Tower,
    pub e: u64,
}

fn fresh_name(vars: &[String], base: &str) -> String {
    let mut n = 1usize;
    loop {
        let cand = format!("{base}{n}");
        if !vars.iter().any(|v| *v == cand) {
            return cand;
        }
        n += 1;
    }
}

impl Tower {
    pub fn is_all_laurent(&self) -> bool {
        self.levels
            .iter()
            .all(|l| matches!(l.kind, LevelKind::Laurent))
    }

    pub fn probe_extend(&self, kind: ProbeKind, var: &str) -> Result<Probe> {
        let top = self.top();
        if !matches!(self.levels[top].kind, LevelKind::Laurent) || !self.is_all_laurent() {
            return Err(Error::UnsupportedProbe(
                "probes apply only below Artin-Schreier steps; probe the Laurent part and \
                 re-apply the wild step afterwards"
                    .into(),
            ));
        }
        let var_idx = self.levels[top]
            .residue
            .var_index(var)
            .ok_or_else(|| Error::UnsupportedProbe(format!("unknown residue variable {var:?}")))?;
        match kind {
            ProbeKind::PiRoot { j } => {
                if j == 0 {
                    return Err(Error::UnsupportedProbe("pi_root requires j >= 1".into()));
                }
            }
            ProbeKind::Shift { i, j } => {
                if i < 2 || j == 0 {
                    return Err(Error::UnsupportedProbe(
                        "shift_probe requires i >= 2 and j >= 1".into(),
                    ));
                }
            }
        }
        let fresh = fresh_name(self.levels[top].residue.vars(), var);
        let dst = match kind {
            ProbeKind::PiRoot { .. } => {
                let mut dst = self.clone();
                for level in dst.levels.iter_mut() {
                    if let Some(idx) = level.residue.var_index(var) {
                        let mut vars = level.residue.vars().to_vec();
                        vars[idx] = fresh.clone();
                        level.residue = level.residue.with_vars(vars);
                    }
                }
                dst
            }
            ProbeKind::Shift { i, .. } => {
                // collapse to a single Laurent level over F_q((rho)) carrying
                // the same residue variables, with `var` renamed
                let mut dst = Tower::base(self.p, self.q)?;
                for v in self.levels[top].residue.vars() {
                    let name = if v == var { &fresh } else { v };
                    dst = dst.extended_constant(name)?;
                }
                let scale = (self.p as i64).pow(i);
                dst.precision = self.precision.saturating_mul(scale).min(1 << 20);
                dst
            }
        };
        let e_factor = match kind {
            ProbeKind::PiRoot { .. } => 1,
            ProbeKind::Shift { i, .. } => self.p.pow(i),
        };
        Ok(Probe {
            src: self.clone(),
            dst,
            e_factor,
            kind,
            var: var.to_string(),
            fresh,
            var_idx,
        })
    }

    pub fn tame_twist(&self, e: u64) -> Result<TameTwist> {
        if e < 2 || gcd(e, self.p) != 1 {
            return Err(Error::MalformedParams(format!(
                "twist index e = {e} must be >= 2 and coprime to p"
            )));
        }
        if gcd(e, self.e_total(self.top())) != 1 {
            return Err(Error::MalformedParams(format!(
                "twist index e = {e} shares a factor with the tower ramification {}",
                self.e_total(self.top())
            )));
        }
        let mut dst = Tower::base(self.p, self.q)?.extended_tame(e)?;
        dst.precision = self.precision.saturating_mul(e as i64).min(1 << 20);
        for l in 1..self.levels.len() {
            let level = &self.levels[l];
            dst = match &level.kind {
                LevelKind::Laurent if level.e_step == 1 => {
                    let var = level.residue.vars().last().expect("constant step adds a var");
                    dst.extended_constant(var)?
                }
                LevelKind::Laurent => dst.extended_tame(level.e_step)?,
                LevelKind::ArtinSchreier { f, .. } => {
                    let tf = twist_transport(self, &dst, f, e);
                    dst.extended_artin_schreier(tf)?
                }
            };
        }
        Ok(TameTwist {
            src: self.clone(),
            dst,
            e,
        })
    }
}

fn twist_transport(src: &Tower, dst: &Tower, x: &FieldElement, e: u64) -> FieldElement {
    let to = x.level() + 1;
    match x.repr() {
        Repr::Series(s) => {
            let field = src.residue(x.level());
            dst.from_series(to, s.stretch(field, e as i64))
        }
        Repr::Vector(coords) => dst.from_vector(
            to,
            coords
                .iter()
                .map(|c| twist_transport(src, dst, c, e))
                .collect(),
        ),
    }
}

impl TameTwist {
    /// Image of an element of source level `l` at twisted level `l + 1`.
    pub fn transport(&self, x: &FieldElement) -> FieldElement {
        twist_transport(&self.src, &self.dst, x, self.e)
    }

    /// Ramification index of the twisted tower top over the source top,
    /// `e(LK'/L) = e` since the twist is coprime to the tower.
    pub fn e_top(&self) -> u64 {
        self.e
    }
}

impl Probe {
    /// Transport an element of any source level into the probe field (the
    /// top level of `dst`).
    pub fn transport(&self, x: &FieldElement) -> Result<FieldElement> {
        let top = self.src.top();
        let x = self.src.embed(x, top)?;
        let s = x.as_series().expect("probed towers are Laurent");
        match self.kind {
            ProbeKind::PiRoot { j } => {
                let pj = self.src.p().pow(j) as u32;
                let src_field = self.src.residue(top);
                let dst_field = self.dst.residue(self.dst.top());
                let out = s.map_coeffs(|c| {
                    let num = src_field.poly_subst_var_power(&c.num, self.var_idx, pj);
                    let den = src_field.poly_subst_var_power(&c.den, self.var_idx, pj);
                    dst_field.normalize(num, den)
                });
                Ok(self.dst.from_series(self.dst.top(), out.renormalize(dst_field)))
            }
            ProbeKind::Shift { i, j } => {
                let p = self.src.p();
                let pi = (p as i64).pow(i);
                let pj = p.pow(j);
                let dst_top = self.dst.top();
                let dst_field = self.dst.residue(dst_top);
                // extended layout: destination variables plus rho at the end
                let mut ext_vars = dst_field.vars().to_vec();
                ext_vars.push("@rho".into());
                let ext_field = ResidueField::new(p, self.src.q(), ext_vars)?;
                let rho_slot = ext_field.nvars() - 1;
                let replacement = ext_field.poly_add(
                    &ext_field.poly_pow(&ext_field.poly_var(self.var_idx), pj),
                    &ext_field.poly_var(rho_slot),
                );
                let var_map: Vec<Option<usize>> = (0..self.src.residue(top).nvars())
                    .map(|k| if k == self.var_idx { None } else { Some(k) })
                    .collect();
                let nterms = self.dst.precision();
                let mut acc = self.dst.zero(dst_top);
                for (k, c) in s.iter_terms() {
                    let conv = self.shift_subst_coeff(
                        c,
                        &replacement,
                        &ext_field,
                        rho_slot,
                        &var_map,
                        nterms,
                    )?;
                    let term = self.dst.from_series(dst_top, conv.shift(pi * k));
                    acc = self.dst.add(&acc, &term);
                }
                if let Some(h) = s.horizon() {
                    acc = self.dst.truncate_at(&acc, pi * h);
                }
                Ok(acc)
            }
        }
    }

    fn shift_subst_coeff(
        &self,
        c: &RatFun,
        replacement: &MPoly,
        ext_field: &ResidueField,
        rho_slot: usize,
        var_map: &[Option<usize>],
        nterms: i64,
    ) -> Result<Series> {
        let top = self.src.top();
        let src_field = self.src.residue(top);
        let dst_field = self.dst.residue(self.dst.top());
        let to_series = |poly: &MPoly| -> Series {
            let subst =
                src_field.poly_subst_var(poly, self.var_idx, replacement, ext_field, var_map);
            let parts = ext_field.poly_split_by_var(&subst, rho_slot);
            let terms = parts
                .into_iter()
                .map(|(d, p)| {
                    (
                        d as i64,
                        dst_field.from_poly(ext_field.poly_drop_last_var(&p)),
                    )
                })
                .collect();
            Series::from_terms(dst_field, terms, None)
        };
        let num = to_series(&c.num);
        let den = to_series(&c.den);
        if den.known_leading().map(|(v, _)| v) == Some(0) && den.iter_terms().count() == 1 {
            // denominator free of rho: exact division
            let d0 = den.coeff_at(0).unwrap();
            let inv = dst_field.inv(d0)?;
            return Ok(Series::scale(dst_field, &num, &inv));
        }
        let den_inv = den.inv(dst_field, nterms)?;
        Ok(Series::mul(dst_field, &num, &den_inv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// F_3(T)((u)).
    fn l_field() -> Tower {
        Tower::base(3, 3).unwrap().extended_constant("T").unwrap()
    }

    #[test]
    fn pi_root_substitution() {
        let t = l_field();
        let k = t.residue(1);
        // T * u^{-3}
        let x = t.monomial(1, k.var("T").unwrap(), -3).unwrap();
        let probe = t.probe_extend(ProbeKind::PiRoot { j: 1 }, "T").unwrap();
        assert_eq!(probe.e_factor, 1);
        let y = probe.transport(&x).unwrap();
        // becomes T1^3 * u^{-3}
        let dk = probe.dst.residue(probe.dst.top());
        let t1 = dk.var("T1").unwrap();
        let expected = probe
            .dst
            .monomial(probe.dst.top(), dk.pow(&t1, 3).unwrap(), -3)
            .unwrap();
        assert!(probe.dst.sub(&y, &expected).is_exact_zero());
    }

    #[test]
    fn shift_probe_substitution() {
        let t = l_field();
        let k = t.residue(1);
        let x = t.monomial(1, k.var("T").unwrap(), -1).unwrap();
        let probe = t.probe_extend(ProbeKind::Shift { i: 2, j: 1 }, "T").unwrap();
        assert_eq!(probe.e_factor, 9); // m_2 = p^2
        let y = probe.transport(&x).unwrap();
        // T u^{-1} -> (T1^3 + rho) rho^{-9} = T1^3 rho^{-9} + rho^{-8}
        let dst = &probe.dst;
        let dk = dst.residue(dst.top());
        let t1c = dk.pow(&dk.var("T1").unwrap(), 3).unwrap();
        let expected = dst.add(
            &dst.monomial(dst.top(), t1c, -9).unwrap(),
            &dst.monomial(dst.top(), dk.one(), -8).unwrap(),
        );
        assert!(dst.sub(&y, &expected).is_exact_zero());
    }

    #[test]
    fn shift_probe_with_rational_coefficient() {
        let t = l_field();
        let k = t.residue(1);
        // (1/T) * u^{-1}: transport needs a geometric expansion
        let c = k.inv(&k.var("T").unwrap()).unwrap();
        let x = t.monomial(1, c, -1).unwrap();
        let probe = t.probe_extend(ProbeKind::Shift { i: 2, j: 1 }, "T").unwrap();
        let y = probe.transport(&x).unwrap();
        let dst = &probe.dst;
        // y = rho^{-9} / (T1^3 + rho); check y * (T1^3 + rho) = rho^{-9}
        let dk = dst.residue(dst.top());
        let t1c = dk.pow(&dk.var("T1").unwrap(), 3).unwrap();
        let den = dst.add(
            &dst.constant(dst.top(), t1c),
            &dst.uniformizer_pow(dst.top(), 1).unwrap(),
        );
        let prod = dst.mul(&y, &den);
        let diff = dst.sub(&prod, &dst.monomial(dst.top(), dk.one(), -9).unwrap());
        assert!(diff.is_known_zero());
    }

    #[test]
    fn probe_rejects_artin_schreier_top() {
        let t = l_field();
        let f = t.monomial(1, t.residue(1).one(), -1).unwrap();
        let tas = t.extended_artin_schreier(f).unwrap();
        assert!(tas
            .probe_extend(ProbeKind::PiRoot { j: 1 }, "T")
            .is_err());
    }

    #[test]
    fn tame_twist_structure() {
        let t = l_field();
        let f = t.monomial(1, t.residue(1).one(), -1).unwrap();
        let tas = t.extended_artin_schreier(f).unwrap();
        let twist = tas.tame_twist(2).unwrap();
        assert_eq!(twist.dst.e_total(twist.dst.top()), 6);
        // f becomes w^{-2}: the twisted wild step has m = 2
        match &twist.dst.level(3).kind {
            LevelKind::ArtinSchreier { m, .. } => assert_eq!(*m, 2),
            _ => panic!("expected artin-schreier step on top"),
        }
        // transported element valuations scale by e
        let x = tas.uniformizer_pow(0, -1).unwrap();
        let y = twist.transport(&x);
        assert_eq!(y.level(), 1);
        assert_eq!(twist.dst.valuation(&y).unwrap(), crate::tower::Val::Finite(-2));
        // twists sharing factors with the tower are rejected
        let tame2 = Tower::base(3, 3).unwrap().extended_tame(2).unwrap();
        assert!(tame2.tame_twist(4).is_err());
        assert!(tame2.tame_twist(3).is_err());
        assert!(tame2.tame_twist(5).is_ok());
    }
}
