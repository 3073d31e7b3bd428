//! Witt vectors of finite length over a tower level.
//!
//! Components are stored indexed by filtration weight: `comps[i]` carries
//! weight `p^i` in the Brylinski valuation `min_i p^i v(a_i)` and exponent
//! `p^i - 1` in the differential `sum_i a_i^{p^i - 1} d a_i`. The standard
//! ghost-component coordinates are the reverse: `x_j = comps[s-1-j]`.
//!
//! Ring operations come from the universal addition and negation polynomials,
//! computed once over the integers by ghost recursion, reduced mod p, and
//! cached per `(p, s)`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::Result;
use crate::logdiff::{differential, LogForm};
use crate::tower::{FieldElement, Tower, Val};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WittVector {
    level: usize,
    /// `comps[i]` is the component of weight `p^i` (the paper-order tuple is
    /// `(comps[s-1], ..., comps[0])`).
    comps: Vec<FieldElement>,
}

impl WittVector {
    pub fn new(level: usize, comps: Vec<FieldElement>) -> WittVector {
        assert!(!comps.is_empty());
        debug_assert!(comps.iter().all(|c| c.level() == level));
        WittVector { level, comps }
    }

    pub fn zero(tower: &Tower, level: usize, s: usize) -> WittVector {
        WittVector {
            level,
            comps: (0..s).map(|_| tower.zero(level)).collect(),
        }
    }

    /// Vector with a single nonzero slot of weight `p^i`.
    pub fn single_slot(tower: &Tower, s: usize, i: usize, x: FieldElement) -> WittVector {
        assert!(i < s);
        let level = x.level();
        let mut comps: Vec<FieldElement> = (0..s).map(|_| tower.zero(level)).collect();
        comps[i] = x;
        WittVector { level, comps }
    }

    pub fn from_single(x: FieldElement) -> WittVector {
        WittVector {
            level: x.level(),
            comps: vec![x],
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn component(&self, i: usize) -> &FieldElement {
        &self.comps[i]
    }

    pub fn components(&self) -> &[FieldElement] {
        &self.comps
    }

    pub fn is_exact_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_exact_zero())
    }

    pub fn map(&self, f: impl Fn(&FieldElement) -> FieldElement) -> WittVector {
        let comps: Vec<FieldElement> = self.comps.iter().map(f).collect();
        WittVector {
            level: comps[0].level(),
            comps,
        }
    }

    pub fn try_map(
        &self,
        f: impl Fn(&FieldElement) -> Result<FieldElement>,
    ) -> Result<WittVector> {
        let comps = self
            .comps
            .iter()
            .map(&f)
            .collect::<Result<Vec<_>>>()?;
        Ok(WittVector {
            level: comps[0].level(),
            comps,
        })
    }
}

// ---------------------------------------------------------------------------
// integer polynomials for the ghost recursion
// ---------------------------------------------------------------------------

/// Multivariate polynomial over the integers (exponents indexed by variable).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IntPoly {
    pub terms: BTreeMap<Vec<u16>, BigInt>,
    pub nvars: usize,
}

impl IntPoly {
    pub fn zero(nvars: usize) -> IntPoly {
        IntPoly {
            terms: BTreeMap::new(),
            nvars,
        }
    }

    pub fn var(nvars: usize, i: usize) -> IntPoly {
        let mut e = vec![0u16; nvars];
        e[i] = 1;
        IntPoly {
            terms: BTreeMap::from([(e, BigInt::one())]),
            nvars,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &IntPoly) -> IntPoly {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let e = terms.entry(m.clone()).or_insert_with(BigInt::zero);
            *e += c;
            if e.is_zero() {
                terms.remove(m);
            }
        }
        IntPoly {
            terms,
            nvars: self.nvars,
        }
    }

    pub fn neg(&self) -> IntPoly {
        IntPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
            nvars: self.nvars,
        }
    }

    pub fn sub(&self, other: &IntPoly) -> IntPoly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        let mut terms: BTreeMap<Vec<u16>, BigInt> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m: Vec<u16> = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                let e = terms.entry(m.clone()).or_insert_with(BigInt::zero);
                *e += ca * cb;
                if e.is_zero() {
                    terms.remove(&m);
                }
            }
        }
        IntPoly {
            terms,
            nvars: self.nvars,
        }
    }

    pub fn pow(&self, mut e: u64) -> IntPoly {
        let mut acc = IntPoly {
            terms: BTreeMap::from([(vec![0u16; self.nvars], BigInt::one())]),
            nvars: self.nvars,
        };
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn scale(&self, c: &BigInt) -> IntPoly {
        if c.is_zero() {
            return IntPoly::zero(self.nvars);
        }
        IntPoly {
            terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect(),
            nvars: self.nvars,
        }
    }

    /// Exact division by an integer; panics on inexactness.
    pub fn div_exact(&self, c: &BigInt) -> IntPoly {
        IntPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, x)| {
                    let (q, r) = num_integer::Integer::div_rem(x, c);
                    assert!(r.is_zero(), "inexact integer division in ghost recursion");
                    (m.clone(), q)
                })
                .collect(),
            nvars: self.nvars,
        }
    }

    pub fn reduce_mod(&self, p: u64) -> ModPoly {
        let pp = BigInt::from(p);
        let mut terms = Vec::new();
        for (m, c) in &self.terms {
            let r = ((c % &pp) + &pp) % &pp;
            let r: u64 = r.try_into().expect("residue fits in u64");
            if r != 0 {
                terms.push((m.clone(), r));
            }
        }
        ModPoly {
            terms,
            nvars: self.nvars,
        }
    }
}

/// Polynomial over `F_p` ready for evaluation on field elements.
#[derive(Clone, Debug)]
pub struct ModPoly {
    pub terms: Vec<(Vec<u16>, u64)>,
    pub nvars: usize,
}

impl ModPoly {
    pub fn eval(&self, tower: &Tower, args: &[FieldElement]) -> FieldElement {
        assert_eq!(args.len(), self.nvars);
        let level = args[0].level();
        // cache powers per variable
        let max_deg: Vec<u16> = (0..self.nvars)
            .map(|i| self.terms.iter().map(|(m, _)| m[i]).max().unwrap_or(0))
            .collect();
        let mut powers: Vec<Vec<FieldElement>> = Vec::with_capacity(self.nvars);
        for (i, arg) in args.iter().enumerate() {
            let mut v = Vec::with_capacity(max_deg[i] as usize + 1);
            v.push(tower.one(level));
            for d in 1..=max_deg[i] {
                let prev = v[(d - 1) as usize].clone();
                v.push(tower.mul(&prev, arg));
            }
            powers.push(v);
        }
        let residue = tower.residue(level).clone();
        let mut acc = tower.zero(level);
        for (m, c) in &self.terms {
            let mut term = tower.constant(level, residue.from_i64(*c as i64));
            for (i, &e) in m.iter().enumerate() {
                if e > 0 {
                    term = tower.mul(&term, &powers[i][e as usize]);
                }
            }
            acc = tower.add(&acc, &term);
        }
        acc
    }
}

/// Ghost component `w_n` over the first `s` of `nvars` variables, shifted by
/// `offset`: `w_n = sum_{i<=n} p^i x_{offset+i}^{p^{n-i}}`.
pub fn ghost_poly(p: u64, nvars: usize, offset: usize, n: usize) -> IntPoly {
    let mut acc = IntPoly::zero(nvars);
    for i in 0..=n {
        let c = BigInt::from(p).pow(i as u32);
        let e = (p as u64).pow((n - i) as u32);
        acc = acc.add(&IntPoly::var(nvars, offset + i).pow(e).scale(&c));
    }
    acc
}

/// Universal addition polynomials `S_0, ..., S_{s-1}` in standard order over
/// variables `X_0..X_{s-1}, Y_0..Y_{s-1}`, as integer polynomials.
pub fn addition_polys_int(p: u64, s: usize) -> Vec<IntPoly> {
    let nv = 2 * s;
    let mut polys: Vec<IntPoly> = Vec::with_capacity(s);
    for n in 0..s {
        let mut rhs = ghost_poly(p, nv, 0, n).add(&ghost_poly(p, nv, s, n));
        for (i, si) in polys.iter().enumerate() {
            let c = BigInt::from(p).pow(i as u32);
            let e = (p as u64).pow((n - i) as u32);
            rhs = rhs.sub(&si.pow(e).scale(&c));
        }
        polys.push(rhs.div_exact(&BigInt::from(p).pow(n as u32)));
    }
    polys
}

/// Universal negation polynomials `N_0, ..., N_{s-1}` over `X_0..X_{s-1}`.
pub fn negation_polys_int(p: u64, s: usize) -> Vec<IntPoly> {
    let nv = s;
    let mut polys: Vec<IntPoly> = Vec::with_capacity(s);
    for n in 0..s {
        let mut rhs = ghost_poly(p, nv, 0, n).neg();
        for (i, ni) in polys.iter().enumerate() {
            let c = BigInt::from(p).pow(i as u32);
            let e = (p as u64).pow((n - i) as u32);
            rhs = rhs.sub(&ni.pow(e).scale(&c));
        }
        polys.push(rhs.div_exact(&BigInt::from(p).pow(n as u32)));
    }
    polys
}

/// Symbolic check of the defining ghost identities over the integers:
/// `w_n(S(X,Y)) = w_n(X) + w_n(Y)` and `w_n(N(X)) = -w_n(X)` for `n < s`.
pub fn verify_ghost_identities(p: u64, s: usize) -> bool {
    let add = addition_polys_int(p, s);
    let neg = negation_polys_int(p, s);
    for n in 0..s {
        let mut lhs = IntPoly::zero(2 * s);
        for i in 0..=n {
            let c = BigInt::from(p).pow(i as u32);
            let e = (p as u64).pow((n - i) as u32);
            lhs = lhs.add(&add[i].pow(e).scale(&c));
        }
        let rhs = ghost_poly(p, 2 * s, 0, n).add(&ghost_poly(p, 2 * s, s, n));
        if lhs != rhs {
            return false;
        }
        let mut lhs_n = IntPoly::zero(s);
        for i in 0..=n {
            let c = BigInt::from(p).pow(i as u32);
            let e = (p as u64).pow((n - i) as u32);
            lhs_n = lhs_n.add(&neg[i].pow(e).scale(&c));
        }
        if lhs_n != ghost_poly(p, s, 0, n).neg() {
            return false;
        }
    }
    true
}

struct WittTables {
    add: Vec<ModPoly>,
    neg: Vec<ModPoly>,
}

fn tables(p: u64, s: usize) -> Arc<WittTables> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<WittTables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("witt table cache poisoned");
    guard
        .entry((p, s))
        .or_insert_with(|| {
            Arc::new(WittTables {
                add: addition_polys_int(p, s)
                    .iter()
                    .map(|q| q.reduce_mod(p))
                    .collect(),
                neg: negation_polys_int(p, s)
                    .iter()
                    .map(|q| q.reduce_mod(p))
                    .collect(),
            })
        })
        .clone()
}

// ---------------------------------------------------------------------------
// ring operations
// ---------------------------------------------------------------------------

/// Standard-order view: `x_j = comps[s-1-j]`.
fn to_std(w: &WittVector) -> Vec<FieldElement> {
    w.comps.iter().rev().cloned().collect()
}

fn from_std(level: usize, std: Vec<FieldElement>) -> WittVector {
    WittVector {
        level,
        comps: std.into_iter().rev().collect(),
    }
}

pub fn witt_add(tower: &Tower, x: &WittVector, y: &WittVector) -> WittVector {
    assert_eq!(x.level, y.level);
    assert_eq!(x.len(), y.len());
    let s = x.len();
    if s == 1 {
        return WittVector::from_single(tower.add(&x.comps[0], &y.comps[0]));
    }
    let t = tables(tower.p(), s);
    let mut args = to_std(x);
    args.extend(to_std(y));
    let std: Vec<FieldElement> = t.add.iter().map(|q| q.eval(tower, &args)).collect();
    from_std(x.level, std)
}

pub fn witt_neg(tower: &Tower, x: &WittVector) -> WittVector {
    let s = x.len();
    if s == 1 || tower.p() != 2 {
        // for odd p negation is componentwise
        return x.map(|c| tower.neg(c));
    }
    let t = tables(tower.p(), s);
    let args = to_std(x);
    let std: Vec<FieldElement> = t.neg.iter().map(|q| q.eval(tower, &args)).collect();
    from_std(x.level, std)
}

pub fn witt_sub(tower: &Tower, x: &WittVector, y: &WittVector) -> WittVector {
    witt_add(tower, x, &witt_neg(tower, y))
}

/// Frobenius on Witt vectors of an F_p-algebra: componentwise p-th power.
pub fn witt_frobenius(tower: &Tower, x: &WittVector) -> WittVector {
    x.map(|c| tower.frobenius(c))
}

pub fn frobenius_minus_one(tower: &Tower, b: &WittVector) -> WittVector {
    witt_sub(tower, &witt_frobenius(tower, b), b)
}

/// Brylinski valuation `min_i p^i v(a_i)`, infinity for the zero vector.
pub fn witt_valuation(tower: &Tower, x: &WittVector) -> Result<Val> {
    let p = tower.p() as i64;
    let mut out = Val::Infinite;
    for (i, c) in x.comps.iter().enumerate() {
        let w = p.pow(i as u32);
        match tower.valuation(c)? {
            Val::Finite(v) => out = out.min(Val::Finite(w * v)),
            Val::Infinite => {}
        }
    }
    Ok(out)
}

/// `d(a) = sum_i a_i^{p^i - 1} d a_i` as a log form at the components' level.
pub fn d_map(tower: &Tower, x: &WittVector) -> Result<LogForm> {
    let p = tower.p();
    let mut out = LogForm::zero(tower, x.level);
    for (i, c) in x.comps.iter().enumerate() {
        if c.is_exact_zero() {
            continue;
        }
        let dc = differential(tower, c)?;
        let e = p.pow(i as u32) - 1;
        let scaled = if e == 0 {
            dc
        } else {
            dc.scale(tower, &tower.pow(c, e as i64)?)
        };
        out = out.add(tower, &scaled);
    }
    Ok(out)
}
