//! Towers of equal-characteristic complete discrete valuation fields.
//!
//! A tower starts at a base `F_q((u))` and grows by three kinds of steps:
//! constant steps (adjoin a residue transcendental), tame steps (adjoin an
//! e-th root of the uniformizer, `gcd(e, p) = 1`), and Artin-Schreier steps
//! (adjoin `alpha` with `alpha^p - alpha = f`, `v(f) = -m`, `gcd(m, p) = 1`).
//!
//! Elements of Laurent levels are truncated series; elements of
//! Artin-Schreier levels are length-p coordinate vectors over the level
//! below, `sum c_i alpha^i`. All arithmetic is exact up to the recorded
//! precision horizon.

use std::fmt;

use crate::error::{Error, Result};
use crate::residue::{RatFun, ResidueField};
use crate::series::Series;

/// Valuation value with the zero element mapped to infinity.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Val {
    Finite(i64),
    Infinite,
}

impl Val {
    pub fn finite(self) -> Option<i64> {
        match self {
            Val::Finite(v) => Some(v),
            Val::Infinite => None,
        }
    }

    pub fn min(self, other: Val) -> Val {
        match (self, other) {
            (Val::Infinite, x) | (x, Val::Infinite) => x,
            (Val::Finite(a), Val::Finite(b)) => Val::Finite(a.min(b)),
        }
    }

    pub fn is_nonnegative(self) -> bool {
        match self {
            Val::Finite(v) => v >= 0,
            Val::Infinite => true,
        }
    }
}

impl PartialOrd for Val {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Val {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Val::Infinite, Val::Infinite) => std::cmp::Ordering::Equal,
            (Val::Infinite, _) => std::cmp::Ordering::Greater,
            (_, Val::Infinite) => std::cmp::Ordering::Less,
            (Val::Finite(a), Val::Finite(b)) => a.cmp(b),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum LevelKind {
    Laurent,
    ArtinSchreier {
        /// Defining right-hand side, an element of the level below.
        f: FieldElement,
        /// Pole order of `f` below: `v(f) = -m`, `gcd(m, p) = 1`.
        m: i64,
        /// `pi_level = alpha^a * pi_below^b` with `-a m + p b = 1`, `0 <= a < p`.
        a: u32,
        b: i64,
    },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Level {
    pub kind: LevelKind,
    pub residue: ResidueField,
    /// Ramification index over the base.
    pub e_total: u64,
    /// Ramification index over the previous level.
    pub e_step: u64,
    pub unif_name: String,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Tower {
    pub(crate) p: u64,
    pub(crate) q: u64,
    pub(crate) levels: Vec<Level>,
    pub(crate) precision: i64,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FieldElement {
    level: usize,
    repr: Repr,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Repr {
    Series(Series),
    Vector(Vec<FieldElement>),
}

impl FieldElement {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn as_series(&self) -> Option<&Series> {
        match &self.repr {
            Repr::Series(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[FieldElement]> {
        match &self.repr {
            Repr::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        match &self.repr {
            Repr::Series(s) => s.is_exact_zero(),
            Repr::Vector(v) => v.iter().all(|c| c.is_exact_zero()),
        }
    }

    pub fn is_known_zero(&self) -> bool {
        match &self.repr {
            Repr::Series(s) => s.is_known_zero(),
            Repr::Vector(v) => v.iter().all(|c| c.is_known_zero()),
        }
    }

    pub fn is_exact(&self) -> bool {
        match &self.repr {
            Repr::Series(s) => s.is_exact(),
            Repr::Vector(v) => v.iter().all(|c| c.is_exact()),
        }
    }
}

impl Tower {
    // -- construction ---------------------------------------------------------

    pub fn base(p: u64, q: u64) -> Result<Tower> {
        let residue = ResidueField::new(p, q, Vec::new())?;
        Ok(Tower {
            p,
            q,
            levels: vec![Level {
                kind: LevelKind::Laurent,
                residue,
                e_total: 1,
                e_step: 1,
                unif_name: "u".into(),
            }],
            precision: 20,
        })
    }

    pub fn extended_constant(&self, var: &str) -> Result<Tower> {
        let top = self.top();
        if matches!(self.levels[top].kind, LevelKind::ArtinSchreier { .. }) {
            return Err(Error::MalformedStep {
                index: top,
                reason: "constant step above an Artin-Schreier step is not supported".into(),
            });
        }
        let mut vars = self.levels[top].residue.vars().to_vec();
        vars.push(var.to_string());
        let residue = ResidueField::new(self.p, self.q, vars).map_err(|e| Error::MalformedStep {
            index: top,
            reason: e.to_string(),
        })?;
        let mut tower = self.clone();
        tower.levels.push(Level {
            kind: LevelKind::Laurent,
            residue,
            e_total: self.levels[top].e_total,
            e_step: 1,
            unif_name: self.levels[top].unif_name.clone(),
        });
        Ok(tower)
    }

    pub fn extended_tame(&self, e: u64) -> Result<Tower> {
        let top = self.top();
        if matches!(self.levels[top].kind, LevelKind::ArtinSchreier { .. }) {
            return Err(Error::MalformedStep {
                index: top,
                reason: "tame step above an Artin-Schreier step is not supported".into(),
            });
        }
        if e < 2 || e % self.p == 0 || gcd(e, self.p) != 1 {
            return Err(Error::MalformedStep {
                index: top,
                reason: format!("tame index e = {e} must be >= 2 and coprime to p = {}", self.p),
            });
        }
        let mut tower = self.clone();
        tower.levels.push(Level {
            kind: LevelKind::Laurent,
            residue: self.levels[top].residue.clone(),
            e_total: self.levels[top].e_total * e,
            e_step: e,
            unif_name: format!("rho{}", self.levels.len()),
        });
        Ok(tower)
    }

    pub fn extended_artin_schreier(&self, f: FieldElement) -> Result<Tower> {
        let top = self.top();
        let index = self.levels.len();
        if f.level != top {
            return Err(Error::MalformedStep {
                index,
                reason: "defining element must live at the current top level".into(),
            });
        }
        let v = self.valuation(&f)?;
        let m = match v {
            Val::Finite(v) if v < 0 => -v,
            _ => {
                return Err(Error::MalformedStep {
                    index,
                    reason: "Artin-Schreier right-hand side must have a pole: v(f) = -m < 0".into(),
                })
            }
        };
        if m % self.p as i64 == 0 {
            return Err(Error::MalformedStep {
                index,
                reason: format!("pole order m = {m} must be coprime to p = {}", self.p),
            });
        }
        // unique 0 <= a < p with -a m + p b = 1
        let p = self.p as i64;
        let mut a = 0i64;
        while (-a * m).rem_euclid(p) != 1 {
            a += 1;
            assert!(a < p);
        }
        let b = (1 + a * m) / p;
        debug_assert_eq!(-a * m + p * b, 1);
        let mut tower = self.clone();
        let needed = 4 * m + 16;
        if needed > tower.precision {
            tower.precision = needed;
        }
        tower.levels.push(Level {
            kind: LevelKind::ArtinSchreier {
                f,
                m,
                a: a as u32,
                b,
            },
            residue: self.levels[top].residue.clone(),
            e_total: self.levels[top].e_total * self.p,
            e_step: self.p,
            unif_name: format!("pi{}", self.levels.len()),
        });
        Ok(tower)
    }

    // -- accessors --------------------------------------------------------------

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }

    pub fn residue(&self, l: usize) -> &ResidueField {
        &self.levels[l].residue
    }

    pub fn e_total(&self, l: usize) -> u64 {
        self.levels[l].e_total
    }

    /// Ramification index between two levels.
    pub fn e_rel(&self, from: usize, to: usize) -> u64 {
        assert!(from <= to);
        self.levels[to].e_total / self.levels[from].e_total
    }

    pub fn precision(&self) -> i64 {
        self.precision
    }

    pub fn with_precision(&self, n: i64) -> Tower {
        let mut t = self.clone();
        t.precision = n;
        t
    }

    /// Working precision for computations touching poles of the given order.
    pub fn precision_for(&self, pole: i64) -> i64 {
        self.precision.max(4 * pole.max(0) + 16)
    }

    /// Run `f`, doubling the working precision on `PrecisionExhausted` up to
    /// the hard cap of 2^12.
    pub fn with_precision_retry<T>(&self, f: impl Fn(&Tower) -> Result<T>) -> Result<T> {
        let mut prec = self.precision;
        loop {
            match f(&self.with_precision(prec)) {
                Err(Error::PrecisionExhausted(_)) if prec < (1 << 12) => prec *= 2,
                other => return other,
            }
        }
    }

    /// Whether all residue fields up to `l` are perfect (no residue
    /// transcendentals).
    pub fn residue_is_perfect(&self, l: usize) -> bool {
        self.levels[l].residue.nvars() == 0
    }

    // -- element constructors ------------------------------------------------------

    pub fn zero(&self, level: usize) -> FieldElement {
        match &self.levels[level].kind {
            LevelKind::Laurent => FieldElement {
                level,
                repr: Repr::Series(Series::zero()),
            },
            LevelKind::ArtinSchreier { .. } => FieldElement {
                level,
                repr: Repr::Vector((0..self.p).map(|_| self.zero(level - 1)).collect()),
            },
        }
    }

    pub fn one(&self, level: usize) -> FieldElement {
        self.constant(level, self.residue(level).one())
    }

    pub fn constant(&self, level: usize, c: RatFun) -> FieldElement {
        match &self.levels[level].kind {
            LevelKind::Laurent => FieldElement {
                level,
                repr: Repr::Series(Series::monomial(&self.levels[level].residue, c, 0)),
            },
            LevelKind::ArtinSchreier { .. } => {
                let mut coords: Vec<FieldElement> =
                    (0..self.p).map(|_| self.zero(level - 1)).collect();
                coords[0] = self.constant(level - 1, c);
                FieldElement {
                    level,
                    repr: Repr::Vector(coords),
                }
            }
        }
    }

    pub fn from_series(&self, level: usize, s: Series) -> FieldElement {
        assert!(matches!(self.levels[level].kind, LevelKind::Laurent));
        FieldElement {
            level,
            repr: Repr::Series(s),
        }
    }

    pub fn from_vector(&self, level: usize, coords: Vec<FieldElement>) -> FieldElement {
        assert!(matches!(
            self.levels[level].kind,
            LevelKind::ArtinSchreier { .. }
        ));
        assert_eq!(coords.len(), self.p as usize);
        debug_assert!(coords.iter().all(|c| c.level == level - 1));
        FieldElement {
            level,
            repr: Repr::Vector(coords),
        }
    }

    /// The generator adjoined at an Artin-Schreier level.
    pub fn alpha(&self, level: usize) -> Result<FieldElement> {
        match &self.levels[level].kind {
            LevelKind::ArtinSchreier { .. } => {
                let mut coords: Vec<FieldElement> =
                    (0..self.p).map(|_| self.zero(level - 1)).collect();
                coords[1] = self.one(level - 1);
                Ok(FieldElement {
                    level,
                    repr: Repr::Vector(coords),
                })
            }
            LevelKind::Laurent => Err(Error::MalformedParams(
                "alpha is only defined at Artin-Schreier levels".into(),
            )),
        }
    }

    fn alpha_inv(&self, level: usize) -> Result<FieldElement> {
        // alpha^p - alpha = f  =>  alpha^{-1} = f^{-1} (alpha^{p-1} - 1)
        let LevelKind::ArtinSchreier { f, .. } = &self.levels[level].kind else {
            return Err(Error::MalformedParams("not an Artin-Schreier level".into()));
        };
        let f_inv = self.inv(f)?;
        let alpha = self.alpha(level)?;
        let a_pm1 = self.pow(&alpha, self.p as i64 - 1)?;
        let diff = self.sub(&a_pm1, &self.one(level));
        Ok(self.mul(&self.embed(&f_inv, level)?, &diff))
    }

    /// `pi_level^k` for any sign of `k`.
    pub fn uniformizer_pow(&self, level: usize, k: i64) -> Result<FieldElement> {
        match &self.levels[level].kind {
            LevelKind::Laurent => Ok(FieldElement {
                level,
                repr: Repr::Series(Series::monomial(
                    &self.levels[level].residue,
                    self.levels[level].residue.one(),
                    k,
                )),
            }),
            LevelKind::ArtinSchreier { a, b, .. } => {
                let (a, b) = (*a, *b);
                if k == 0 {
                    return Ok(self.one(level));
                }
                let (alpha_part, exp_a, exp_b) = if k > 0 {
                    (self.alpha(level)?, a as i64 * k, b * k)
                } else {
                    (self.alpha_inv(level)?, a as i64 * (-k), b * (-k))
                };
                let ap = self.pow_nonneg(&alpha_part, exp_a as u64);
                let below = self.uniformizer_pow(level - 1, if k > 0 { exp_b } else { -exp_b })?;
                Ok(self.mul(&ap, &self.embed(&below, level)?))
            }
        }
    }

    pub fn monomial(&self, level: usize, c: RatFun, k: i64) -> Result<FieldElement> {
        match &self.levels[level].kind {
            LevelKind::Laurent => Ok(FieldElement {
                level,
                repr: Repr::Series(Series::monomial(&self.levels[level].residue, c, k)),
            }),
            LevelKind::ArtinSchreier { .. } => {
                let base = self.uniformizer_pow(level, k)?;
                Ok(self.mul(&self.constant(level, c), &base))
            }
        }
    }

    // -- arithmetic ---------------------------------------------------------------

    fn check_levels(&self, x: &FieldElement, y: &FieldElement) {
        assert_eq!(x.level, y.level, "elements at different tower levels");
    }

    pub fn add(&self, x: &FieldElement, y: &FieldElement) -> FieldElement {
        self.check_levels(x, y);
        match (&x.repr, &y.repr) {
            (Repr::Series(a), Repr::Series(b)) => FieldElement {
                level: x.level,
                repr: Repr::Series(Series::add(&self.levels[x.level].residue, a, b)),
            },
            (Repr::Vector(a), Repr::Vector(b)) => FieldElement {
                level: x.level,
                repr: Repr::Vector(a.iter().zip(b).map(|(u, v)| self.add(u, v)).collect()),
            },
            _ => unreachable!("mismatched representations at one level"),
        }
    }

    pub fn neg(&self, x: &FieldElement) -> FieldElement {
        match &x.repr {
            Repr::Series(a) => FieldElement {
                level: x.level,
                repr: Repr::Series(Series::neg(&self.levels[x.level].residue, a)),
            },
            Repr::Vector(a) => FieldElement {
                level: x.level,
                repr: Repr::Vector(a.iter().map(|c| self.neg(c)).collect()),
            },
        }
    }

    pub fn sub(&self, x: &FieldElement, y: &FieldElement) -> FieldElement {
        self.add(x, &self.neg(y))
    }

    pub fn mul(&self, x: &FieldElement, y: &FieldElement) -> FieldElement {
        self.check_levels(x, y);
        match (&x.repr, &y.repr) {
            (Repr::Series(a), Repr::Series(b)) => FieldElement {
                level: x.level,
                repr: Repr::Series(Series::mul(&self.levels[x.level].residue, a, b)),
            },
            (Repr::Vector(a), Repr::Vector(b)) => {
                let LevelKind::ArtinSchreier { f, .. } = &self.levels[x.level].kind else {
                    unreachable!()
                };
                let p = self.p as usize;
                let mut conv: Vec<FieldElement> =
                    (0..2 * p - 1).map(|_| self.zero(x.level - 1)).collect();
                for (i, ci) in a.iter().enumerate() {
                    if ci.is_exact_zero() {
                        continue;
                    }
                    for (j, cj) in b.iter().enumerate() {
                        if cj.is_exact_zero() {
                            continue;
                        }
                        conv[i + j] = self.add(&conv[i + j], &self.mul(ci, cj));
                    }
                }
                // reduce alpha^k for k >= p via alpha^p = alpha + f
                for k in (p..2 * p - 1).rev() {
                    let c = conv[k].clone();
                    if c.is_exact_zero() {
                        continue;
                    }
                    conv[k] = self.zero(x.level - 1);
                    conv[k - p + 1] = self.add(&conv[k - p + 1], &c);
                    conv[k - p] = self.add(&conv[k - p], &self.mul(&c, f));
                }
                conv.truncate(p);
                FieldElement {
                    level: x.level,
                    repr: Repr::Vector(conv),
                }
            }
            _ => unreachable!("mismatched representations at one level"),
        }
    }

    fn pow_nonneg(&self, x: &FieldElement, mut e: u64) -> FieldElement {
        let mut acc = self.one(x.level);
        let mut base = x.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn pow(&self, x: &FieldElement, e: i64) -> Result<FieldElement> {
        if e >= 0 {
            Ok(self.pow_nonneg(x, e as u64))
        } else {
            Ok(self.pow_nonneg(&self.inv(x)?, (-e) as u64))
        }
    }

    /// Ring Frobenius `x -> x^p`, computed structurally so that exact inputs
    /// stay exact.
    pub fn frobenius(&self, x: &FieldElement) -> FieldElement {
        match &x.repr {
            Repr::Series(s) => FieldElement {
                level: x.level,
                repr: Repr::Series(s.frobenius(&self.levels[x.level].residue)),
            },
            Repr::Vector(coords) => {
                let LevelKind::ArtinSchreier { f, .. } = &self.levels[x.level].kind else {
                    unreachable!()
                };
                // (sum c_i alpha^i)^p = sum c_i^p (alpha + f)^i
                let mut alpha_p = self.alpha(x.level).expect("artin-schreier level");
                alpha_p = self.add(&alpha_p, &self.embed_one_step(f, x.level));
                let mut acc = self.zero(x.level);
                let mut power = self.one(x.level);
                for (i, c) in coords.iter().enumerate() {
                    if i > 0 {
                        power = self.mul(&power, &alpha_p);
                    }
                    if c.is_exact_zero() {
                        continue;
                    }
                    let fc = self.frobenius(c);
                    acc = self.add(&acc, &self.mul(&self.lift_coord(fc, x.level), &power));
                }
                acc
            }
        }
    }

    fn lift_coord(&self, c: FieldElement, level: usize) -> FieldElement {
        debug_assert_eq!(c.level, level - 1);
        let p = self.p as usize;
        let mut coords: Vec<FieldElement> = (0..p).map(|_| self.zero(level - 1)).collect();
        coords[0] = c;
        FieldElement {
            level,
            repr: Repr::Vector(coords),
        }
    }

    pub fn inv(&self, x: &FieldElement) -> Result<FieldElement> {
        self.inv_with_precision(x, self.precision)
    }

    pub fn inv_with_precision(&self, x: &FieldElement, nterms: i64) -> Result<FieldElement> {
        match &x.repr {
            Repr::Series(s) => Ok(FieldElement {
                level: x.level,
                repr: Repr::Series(s.inv(&self.levels[x.level].residue, nterms)?),
            }),
            Repr::Vector(coords) => {
                let LevelKind::ArtinSchreier { m, .. } = &self.levels[x.level].kind else {
                    unreachable!()
                };
                let m = *m;
                let v = match self.valuation(x)? {
                    Val::Finite(v) => v,
                    Val::Infinite => return Err(Error::DivisionByZero),
                };
                // index where the valuation is attained (unique mod p)
                let p = self.p as i64;
                let mut i_star = None;
                for (i, c) in coords.iter().enumerate() {
                    if let Ok(Val::Finite(vc)) = self.valuation(c) {
                        if p * vc - (i as i64) * m == v {
                            i_star = Some(i);
                            break;
                        }
                    }
                }
                let i_star = i_star.expect("valuation attained at some coordinate");
                let c_star_inv = self.inv_with_precision(&coords[i_star], nterms)?;
                let alpha_inv = self.alpha_inv(x.level)?;
                let leading_inv = self.mul(
                    &self.lift_coord(c_star_inv, x.level),
                    &self.pow_nonneg(&alpha_inv, i_star as u64),
                );
                // x * leading_inv = 1 + eps with v(eps) >= 1
                let cap = nterms;
                let one = self.one(x.level);
                let eps = self.truncate_at(&self.sub(&self.mul(x, &leading_inv), &one), cap);
                if eps.is_exact_zero() {
                    return Ok(leading_inv);
                }
                let neg_eps = self.neg(&eps);
                let mut acc = one.clone();
                let mut term = one;
                loop {
                    term = self.truncate_at(&self.mul(&term, &neg_eps), cap);
                    if term.is_known_zero() {
                        break;
                    }
                    acc = self.add(&acc, &term);
                }
                let out = self.mul(&leading_inv, &acc);
                Ok(self.truncate_at(&out, cap - v))
            }
        }
    }

    /// Forget knowledge of all terms with valuation >= cap.
    pub fn truncate_at(&self, x: &FieldElement, cap: i64) -> FieldElement {
        match &x.repr {
            Repr::Series(s) => FieldElement {
                level: x.level,
                repr: Repr::Series(s.clone().truncate(&self.levels[x.level].residue, cap)),
            },
            Repr::Vector(coords) => {
                let LevelKind::ArtinSchreier { m, .. } = &self.levels[x.level].kind else {
                    unreachable!()
                };
                let p = self.p as i64;
                let out = coords
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        // v(c alpha^i) = p v(c) - i m >= cap  <=>  v(c) >= (cap + i m)/p
                        let bound = ceil_div(cap + i as i64 * m, p);
                        self.truncate_at(c, bound)
                    })
                    .collect();
                FieldElement {
                    level: x.level,
                    repr: Repr::Vector(out),
                }
            }
        }
    }

    // -- valuation & residues ----------------------------------------------------

    /// Known valuation of the known part, and a lower bound on where unknown
    /// terms may start (`None` = exact).
    pub fn val_bounds(&self, x: &FieldElement) -> (Option<i64>, Option<i64>) {
        match &x.repr {
            Repr::Series(s) => (s.known_leading().map(|(v, _)| v), s.horizon()),
            Repr::Vector(coords) => {
                let LevelKind::ArtinSchreier { m, .. } = &self.levels[x.level].kind else {
                    unreachable!()
                };
                let p = self.p as i64;
                let mut known: Option<i64> = None;
                let mut unknown: Option<i64> = None;
                for (i, c) in coords.iter().enumerate() {
                    let (kv, hz) = self.val_bounds(c);
                    if let Some(v) = kv {
                        let contrib = p * v - i as i64 * m;
                        known = Some(known.map_or(contrib, |k| k.min(contrib)));
                    }
                    if let Some(h) = hz {
                        let bound = p * h - i as i64 * m;
                        unknown = Some(unknown.map_or(bound, |u| u.min(bound)));
                    }
                }
                (known, unknown)
            }
        }
    }

    pub fn valuation(&self, x: &FieldElement) -> Result<Val> {
        if let Repr::Vector(coords) = &x.repr {
            // the p coordinate contributions are pairwise distinct mod p
            let LevelKind::ArtinSchreier { m, .. } = &self.levels[x.level].kind else {
                unreachable!()
            };
            let p = self.p as i64;
            let mut seen = Vec::new();
            for (i, c) in coords.iter().enumerate() {
                if self.val_bounds(c).0.is_some() {
                    let r = (-(i as i64) * m).rem_euclid(p);
                    assert!(
                        !seen.contains(&r),
                        "coordinate valuations collide mod p at an Artin-Schreier level"
                    );
                    seen.push(r);
                }
            }
        }
        match self.val_bounds(x) {
            (Some(v), None) => Ok(Val::Finite(v)),
            (Some(v), Some(h)) if v < h => Ok(Val::Finite(v)),
            (None, None) => Ok(Val::Infinite),
            (kv, hz) => Err(Error::PrecisionExhausted(format!(
                "valuation not certified: known part at {kv:?}, horizon bound {hz:?}"
            ))),
        }
    }

    /// Residue of `x * pi^{-v(x)}` in the top residue field of the element's
    /// level.
    pub fn leading_residue(&self, x: &FieldElement) -> Result<RatFun> {
        match &x.repr {
            Repr::Series(s) => {
                let v = match s.valuation()? {
                    Some(v) => v,
                    None => return Err(Error::DivisionByZero),
                };
                Ok(s.coeff_at(v).expect("leading coefficient").clone())
            }
            Repr::Vector(_) => {
                let v = match self.valuation(x)? {
                    Val::Finite(v) => v,
                    Val::Infinite => return Err(Error::DivisionByZero),
                };
                let unit = self.mul(x, &self.uniformizer_pow(x.level, -v)?);
                debug_assert_eq!(self.valuation(&unit)?, Val::Finite(0));
                let coords = unit.as_vector().expect("vector representation");
                // a valuation-zero element has its residue in coordinate zero
                self.leading_residue(&coords[0])
            }
        }
    }

    // -- embeddings -----------------------------------------------------------------

    fn embed_one_step(&self, x: &FieldElement, to: usize) -> FieldElement {
        debug_assert_eq!(x.level + 1, to);
        match &self.levels[to].kind {
            LevelKind::Laurent => {
                let s = x.as_series().expect("laurent below laurent");
                let below = &self.levels[x.level].residue;
                let here = &self.levels[to].residue;
                let e = self.levels[to].e_step as i64;
                let mut out = if e == 1 {
                    s.clone()
                } else {
                    s.stretch(below, e)
                };
                if here.nvars() != below.nvars() {
                    out = out.extend_coeffs(below, here);
                }
                FieldElement {
                    level: to,
                    repr: Repr::Series(out),
                }
            }
            LevelKind::ArtinSchreier { .. } => self.lift_coord(x.clone(), to),
        }
    }

    pub fn embed(&self, x: &FieldElement, to: usize) -> Result<FieldElement> {
        if x.level > to {
            return Err(Error::MalformedParams(
                "embed target below the element's level".into(),
            ));
        }
        let mut cur = x.clone();
        while cur.level < to {
            let next = cur.level + 1;
            cur = self.embed_one_step(&cur, next);
        }
        Ok(cur)
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    (a + b - 1).div_euclid(b)
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Tower {
    pub fn fmt_element(&self, x: &FieldElement) -> String {
        match &x.repr {
            Repr::Series(s) => {
                let field = &self.levels[x.level].residue;
                let unif = &self.levels[x.level].unif_name;
                if s.is_known_zero() {
                    return match s.horizon() {
                        None => "0".into(),
                        Some(h) => format!("O({unif}^{h})"),
                    };
                }
                let mut parts: Vec<String> = s
                    .iter_terms()
                    .map(|(e, c)| {
                        let cs = field.fmt_ratfun(c);
                        match e {
                            0 => cs,
                            1 if cs == "1" => unif.clone(),
                            1 => format!("{cs}*{unif}"),
                            _ if cs == "1" => format!("{unif}^{e}"),
                            _ => format!("{cs}*{unif}^{e}"),
                        }
                    })
                    .collect();
                if let Some(h) = s.horizon() {
                    parts.push(format!("O({unif}^{h})"));
                }
                parts.join(" + ")
            }
            Repr::Vector(coords) => {
                let mut parts = Vec::new();
                for (i, c) in coords.iter().enumerate() {
                    if c.is_known_zero() && c.is_exact() {
                        continue;
                    }
                    let inner = self.fmt_element(c);
                    match i {
                        0 => parts.push(format!("({inner})")),
                        1 => parts.push(format!("({inner})*alpha")),
                        _ => parts.push(format!("({inner})*alpha^{i}")),
                    }
                }
                if parts.is_empty() {
                    "0".into()
                } else {
                    parts.join(" + ")
                }
            }
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Finite(v) => write!(f, "{v}"),
            Val::Infinite => write!(f, "+inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_base() -> Tower {
        Tower::base(3, 3).unwrap()
    }

    /// F_3(T)((u)) with alpha^3 - alpha = u^{-1} on top.
    fn t_as(fexpr_coeff_t: bool) -> Tower {
        let t0 = t_base();
        let t1 = t0.extended_constant("T").unwrap();
        let k = t1.residue(1).clone();
        let coeff = if fexpr_coeff_t {
            k.var("T").unwrap()
        } else {
            k.one()
        };
        let f = t1.monomial(1, coeff, -1).unwrap();
        t1.extended_artin_schreier(f).unwrap()
    }

    #[test]
    fn build_examples() {
        let t = t_base();
        assert_eq!(t.e_total(t.top()), 1);

        let tame = t.extended_tame(2).unwrap();
        assert_eq!(tame.e_total(tame.top()), 2);

        let as_tower = t_as(false);
        assert_eq!(as_tower.e_total(as_tower.top()), 3);
        match &as_tower.level(2).kind {
            LevelKind::ArtinSchreier { m, a, b, .. } => {
                assert_eq!((*m, *a, *b), (1, 2, 1)); // -2*1 + 3*1 = 1
            }
            _ => panic!("expected artin-schreier level"),
        }

        // malformed steps
        assert!(t.extended_tame(3).is_err()); // p | e
        let f_bad = t.monomial(0, t.residue(0).one(), -3).unwrap(); // p | m
        assert!(t.extended_artin_schreier(f_bad).is_err());
        let f_int = t.monomial(0, t.residue(0).one(), 0).unwrap(); // v(f) >= 0
        assert!(t.extended_artin_schreier(f_int).is_err());
    }

    #[test]
    fn series_inverse_at_base() {
        let t = t_base();
        let k = t.residue(0);
        let one_plus_u = t.add(
            &t.one(0),
            &t.from_series(0, Series::monomial(k, k.one(), 1)),
        );
        let inv = t.inv(&one_plus_u).unwrap();
        let prod = t.mul(&one_plus_u, &inv);
        let diff = t.sub(&prod, &t.one(0));
        assert!(diff.is_known_zero());
    }

    #[test]
    fn artin_schreier_relation() {
        let t = t_as(false);
        let alpha = t.alpha(2).unwrap();
        let cube = t.pow(&alpha, 3).unwrap();
        // alpha^3 = alpha + u^{-1}: coordinates (u^{-1}, 1, 0)
        let coords = cube.as_vector().unwrap();
        let expected_c0 = t.monomial(1, t.residue(1).one(), -1).unwrap();
        assert_eq!(coords[0], expected_c0);
        assert_eq!(coords[1], t.one(1));
        assert!(coords[2].is_exact_zero());
    }

    #[test]
    fn valuations() {
        let t = t_as(false);
        let k = t.residue(0);
        // v(u^{-3} + u^2) = -3 at the base
        let x = t.from_series(
            0,
            Series::add(
                k,
                &Series::monomial(k, k.one(), -3),
                &Series::monomial(k, k.one(), 2),
            ),
        );
        assert_eq!(t.valuation(&x).unwrap(), Val::Finite(-3));

        let alpha = t.alpha(2).unwrap();
        assert_eq!(t.valuation(&alpha).unwrap(), Val::Finite(-1));
        let u = t.embed(&t.uniformizer_pow(0, 1).unwrap(), 2).unwrap();
        assert_eq!(t.valuation(&u).unwrap(), Val::Finite(3));

        // v(alpha^3 * u) = 0 with leading residue 1
        let x = t.mul(&t.pow(&alpha, 3).unwrap(), &u);
        assert_eq!(t.valuation(&x).unwrap(), Val::Finite(0));
        assert!(t.leading_residue(&x).unwrap().is_one());
    }

    #[test]
    fn leading_residues() {
        let t0 = t_base();
        let k = t0.residue(0);
        let x = t0.monomial(0, k.from_i64(2), -3).unwrap();
        assert_eq!(t0.leading_residue(&x).unwrap(), k.from_i64(2));

        // u^{-1} at the AS level over f = u^{-1}: residue 1
        let t = t_as(false);
        let u_inv = t.embed(&t.uniformizer_pow(0, -1).unwrap(), 2).unwrap();
        assert_eq!(t.valuation(&u_inv).unwrap(), Val::Finite(-3));
        assert!(t.leading_residue(&u_inv).unwrap().is_one());

        // with f = T*u^{-1} the same residue is T^2
        let tt = t_as(true);
        let u_inv = tt.embed(&tt.uniformizer_pow(0, -1).unwrap(), 2).unwrap();
        let rt = tt.residue(2);
        let t_var = rt.var("T").unwrap();
        let t_sq = rt.mul(&t_var, &t_var);
        assert_eq!(tt.leading_residue(&u_inv).unwrap(), t_sq);
    }

    #[test]
    fn embeddings_scale_valuation() {
        let t0 = t_base();
        let tame = t0.extended_tame(2).unwrap();
        let x = tame.uniformizer_pow(0, -1).unwrap();
        let emb = tame.embed(&x, 1).unwrap();
        assert_eq!(tame.valuation(&emb).unwrap(), Val::Finite(-2));

        let t = t_as(false);
        let x = t.uniformizer_pow(0, -1).unwrap();
        let emb = t.embed(&x, 2).unwrap();
        assert_eq!(t.valuation(&emb).unwrap(), Val::Finite(-3));

        let tt = t_as(true);
        let tv = tt.constant(1, tt.residue(1).var("T").unwrap());
        let emb = tt.embed(&tv, 2).unwrap();
        assert_eq!(tt.valuation(&emb).unwrap(), Val::Finite(0));
    }

    #[test]
    fn frobenius_commutes_with_embed() {
        let t = t_as(false);
        let k = t.residue(1);
        let x = t.from_series(
            1,
            Series::add(
                k,
                &Series::monomial(k, k.var("T").unwrap(), -2),
                &Series::monomial(k, k.from_i64(2), 1),
            ),
        );
        let a = t.embed(&t.frobenius(&x), 2).unwrap();
        let b = t.frobenius(&t.embed(&x, 2).unwrap());
        assert!(t.sub(&a, &b).is_exact_zero());
        // frobenius = pow(p) on exact elements
        let c = t.pow(&t.embed(&x, 2).unwrap(), 3).unwrap();
        assert!(t.sub(&b, &c).is_exact_zero());
    }

    #[test]
    fn vector_inverse() {
        let t = t_as(true);
        let alpha = t.alpha(2).unwrap();
        let x = t.add(
            &alpha,
            &t.embed(&t.uniformizer_pow(1, 1).unwrap(), 2).unwrap(),
        );
        let inv = t.inv(&x).unwrap();
        let prod = t.mul(&x, &inv);
        let diff = t.sub(&prod, &t.one(2));
        assert!(diff.is_known_zero());
        assert_eq!(
            t.valuation(&inv).unwrap(),
            Val::Finite(1) // v(alpha) = -1
        );
    }
}
