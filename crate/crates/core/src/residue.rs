//! Residue fields of tower levels: rational function fields `F_q(T_1, ..., T_r)`
//! over a perfect base `F_q`, `q = p^k`.
//!
//! Elements are kept in lowest terms with a monic denominator (graded-lex
//! leading coefficient 1), so equality is structural and the p-th-power test
//! reduces to checking exponent divisibility.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// A packed element of `F_q`, `q = p^k`: base-`p` digits of the polynomial
/// representative, least significant digit first. For `k = 1` this is just the
/// value in `[0, p)`.
pub type Fq = u64;

/// Monomial exponent vector, one entry per residue variable, ordered
/// graded-lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Mono(pub Vec<u32>);

impl Mono {
    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }

    fn mul(&self, other: &Mono) -> Mono {
        debug_assert_eq!(self.0.len(), other.0.len());
        Mono(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    fn divides(&self, other: &Mono) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    fn div(&self, other: &Mono) -> Mono {
        Mono(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial over `F_q`; zero is the empty map.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MPoly {
    pub terms: BTreeMap<Mono, Fq>,
    pub nvars: usize,
}

/// Rational function in lowest terms with monic denominator.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RatFun {
    pub num: MPoly,
    pub den: MPoly,
}

/// A residue field `F_q(T_1, ..., T_r)`. Empty `vars` means the perfect field
/// `F_q` itself.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ResidueField {
    p: u64,
    q: u64,
    ext_degree: u32,
    /// Monic irreducible modulus of degree `ext_degree` over `F_p`,
    /// coefficients low-to-high. Unused when `q = p`.
    modulus: Vec<u64>,
    vars: Vec<String>,
}

// ---------------------------------------------------------------------------
// univariate helpers over F_p, used only to set up the F_q modulus
// ---------------------------------------------------------------------------

fn upoly_trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn upoly_mul(p: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    upoly_trim(&mut out);
    out
}

fn upoly_rem(p: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut r = a.to_vec();
    upoly_trim(&mut r);
    let db = b.len() - 1;
    let lb_inv = mod_pow(p, b[db], p - 2);
    while r.len() > db {
        let dr = r.len() - 1;
        let c = r[dr] * lb_inv % p;
        for (i, &bc) in b.iter().enumerate() {
            let idx = dr - db + i;
            r[idx] = (r[idx] + p - c * bc % p) % p;
        }
        upoly_trim(&mut r);
        if r.is_empty() {
            break;
        }
    }
    r
}

fn mod_pow(p: u64, mut base: u64, mut exp: u64) -> u64 {
    base %= p;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

/// Smallest monic irreducible of degree `k` over `F_p`, by exhaustive trial
/// division (only tiny `k` occur here).
fn find_irreducible(p: u64, k: u32) -> Vec<u64> {
    let k = k as usize;
    let count = p.pow(k as u32);
    'cand: for idx in 0..count {
        let mut f = Vec::with_capacity(k + 1);
        let mut t = idx;
        for _ in 0..k {
            f.push(t % p);
            t /= p;
        }
        f.push(1);
        // trial divisors: all monic of degree 1..=k/2
        for d in 1..=(k / 2) {
            let dcount = p.pow(d as u32);
            for didx in 0..dcount {
                let mut g = Vec::with_capacity(d + 1);
                let mut s = didx;
                for _ in 0..d {
                    g.push(s % p);
                    s /= p;
                }
                g.push(1);
                if upoly_rem(p, &f, &g).is_empty() {
                    continue 'cand;
                }
            }
        }
        return f;
    }
    unreachable!("irreducible polynomials exist in every degree")
}

// ---------------------------------------------------------------------------
// ResidueField
// ---------------------------------------------------------------------------

impl ResidueField {
    pub fn new(p: u64, q: u64, vars: Vec<String>) -> Result<Self> {
        if p < 2 || !is_prime(p) {
            return Err(Error::MalformedParams(format!("p = {p} is not prime")));
        }
        let mut ext_degree = 0u32;
        let mut t = q;
        while t > 1 {
            if t % p != 0 {
                return Err(Error::MalformedParams(format!(
                    "q = {q} is not a power of p = {p}"
                )));
            }
            t /= p;
            ext_degree += 1;
        }
        if ext_degree == 0 {
            return Err(Error::MalformedParams("q must be at least p".into()));
        }
        let modulus = if ext_degree == 1 {
            vec![0, 1]
        } else {
            find_irreducible(p, ext_degree)
        };
        let mut seen = std::collections::HashSet::new();
        for v in &vars {
            if v == "u" || v == "alpha" || !seen.insert(v.clone()) {
                return Err(Error::MalformedParams(format!(
                    "invalid or duplicate residue variable {v:?}"
                )));
            }
        }
        Ok(ResidueField {
            p,
            q,
            ext_degree,
            modulus,
            vars,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Same base field with a different variable list.
    pub fn with_vars(&self, vars: Vec<String>) -> Self {
        ResidueField {
            vars,
            ..self.clone()
        }
    }

    // -- F_q scalar arithmetic on packed digits --------------------------------

    fn unpack(&self, a: Fq) -> Vec<u64> {
        let mut out = vec![0u64; self.ext_degree as usize];
        let mut t = a;
        for d in out.iter_mut() {
            *d = t % self.p;
            t /= self.p;
        }
        out
    }

    fn pack(&self, digits: &[u64]) -> Fq {
        let mut out = 0u64;
        for &d in digits.iter().rev() {
            out = out * self.p + d % self.p;
        }
        out
    }

    pub fn fq_from_i64(&self, n: i64) -> Fq {
        (n.rem_euclid(self.p as i64)) as u64
    }

    pub fn fq_add(&self, a: Fq, b: Fq) -> Fq {
        if self.ext_degree == 1 {
            return (a + b) % self.p;
        }
        let (da, db) = (self.unpack(a), self.unpack(b));
        let sum: Vec<u64> = da.iter().zip(&db).map(|(x, y)| (x + y) % self.p).collect();
        self.pack(&sum)
    }

    pub fn fq_neg(&self, a: Fq) -> Fq {
        if self.ext_degree == 1 {
            return (self.p - a % self.p) % self.p;
        }
        let da = self.unpack(a);
        let neg: Vec<u64> = da.iter().map(|x| (self.p - x % self.p) % self.p).collect();
        self.pack(&neg)
    }

    pub fn fq_sub(&self, a: Fq, b: Fq) -> Fq {
        self.fq_add(a, self.fq_neg(b))
    }

    pub fn fq_mul(&self, a: Fq, b: Fq) -> Fq {
        if self.ext_degree == 1 {
            return a * b % self.p;
        }
        let (da, db) = (self.unpack(a), self.unpack(b));
        let prod = upoly_mul(self.p, &da, &db);
        let rem = if prod.len() > self.ext_degree as usize {
            upoly_rem(self.p, &prod, &self.modulus)
        } else {
            prod
        };
        self.pack(&rem)
    }

    pub fn fq_pow(&self, a: Fq, mut e: u64) -> Fq {
        let mut base = a;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.fq_mul(acc, base);
            }
            base = self.fq_mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn fq_inv(&self, a: Fq) -> Result<Fq> {
        if a == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self.fq_pow(a, self.q - 2))
    }

    /// Unique p-th root in the perfect field `F_q`.
    pub fn fq_pth_root(&self, a: Fq) -> Fq {
        self.fq_pow(a, self.q / self.p)
    }

    // -- polynomial constructors ------------------------------------------------

    pub fn poly_zero(&self) -> MPoly {
        MPoly {
            terms: BTreeMap::new(),
            nvars: self.nvars(),
        }
    }

    pub fn poly_const(&self, c: Fq) -> MPoly {
        let mut terms = BTreeMap::new();
        if c != 0 {
            terms.insert(Mono(vec![0; self.nvars()]), c);
        }
        MPoly {
            terms,
            nvars: self.nvars(),
        }
    }

    pub fn poly_var(&self, idx: usize) -> MPoly {
        let mut exps = vec![0u32; self.nvars()];
        exps[idx] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(Mono(exps), 1);
        MPoly {
            terms,
            nvars: self.nvars(),
        }
    }

    // -- polynomial arithmetic ---------------------------------------------------

    pub fn poly_add(&self, a: &MPoly, b: &MPoly) -> MPoly {
        debug_assert_eq!(a.nvars, b.nvars);
        let mut terms = a.terms.clone();
        for (m, &c) in &b.terms {
            let entry = terms.entry(m.clone()).or_insert(0);
            *entry = self.fq_add(*entry, c);
            if *entry == 0 {
                terms.remove(m);
            }
        }
        MPoly {
            terms,
            nvars: a.nvars,
        }
    }

    pub fn poly_neg(&self, a: &MPoly) -> MPoly {
        MPoly {
            terms: a
                .terms
                .iter()
                .map(|(m, &c)| (m.clone(), self.fq_neg(c)))
                .collect(),
            nvars: a.nvars,
        }
    }

    pub fn poly_sub(&self, a: &MPoly, b: &MPoly) -> MPoly {
        self.poly_add(a, &self.poly_neg(b))
    }

    pub fn poly_mul(&self, a: &MPoly, b: &MPoly) -> MPoly {
        debug_assert_eq!(a.nvars, b.nvars);
        let mut terms: BTreeMap<Mono, Fq> = BTreeMap::new();
        for (ma, &ca) in &a.terms {
            for (mb, &cb) in &b.terms {
                let m = ma.mul(mb);
                let c = self.fq_mul(ca, cb);
                let entry = terms.entry(m.clone()).or_insert(0);
                *entry = self.fq_add(*entry, c);
                if *entry == 0 {
                    terms.remove(&m);
                }
            }
        }
        MPoly {
            terms,
            nvars: a.nvars,
        }
    }

    pub fn poly_scale(&self, a: &MPoly, c: Fq) -> MPoly {
        if c == 0 {
            return self.poly_zero();
        }
        MPoly {
            terms: a
                .terms
                .iter()
                .map(|(m, &x)| (m.clone(), self.fq_mul(x, c)))
                .collect(),
            nvars: a.nvars,
        }
    }

    pub fn poly_pow(&self, a: &MPoly, mut e: u64) -> MPoly {
        let mut base = a.clone();
        let mut acc = self.poly_const(1);
        acc.nvars = a.nvars;
        if acc.nvars != a.nvars {
            acc = MPoly {
                terms: acc.terms,
                nvars: a.nvars,
            };
        }
        while e > 0 {
            if e & 1 == 1 {
                acc = self.poly_mul(&acc, &base);
            }
            base = self.poly_mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// Exact division; panics if the division is not exact (internal use only).
    fn poly_divexact(&self, a: &MPoly, b: &MPoly) -> MPoly {
        debug_assert!(!b.is_zero());
        let mut rem = a.clone();
        let mut quo = self.poly_zero();
        let (lb_m, lb_c) = b.leading();
        let lb_c_inv = self.fq_inv(lb_c).expect("nonzero leading coefficient");
        while !rem.is_zero() {
            let (lm, lc) = rem.leading();
            assert!(lb_m.divides(&lm), "inexact polynomial division");
            let qm = lm.div(lb_m);
            let qc = self.fq_mul(lc, lb_c_inv);
            let mut qterm = BTreeMap::new();
            qterm.insert(qm, qc);
            let qpoly = MPoly {
                terms: qterm,
                nvars: a.nvars,
            };
            quo = self.poly_add(&quo, &qpoly);
            rem = self.poly_sub(&rem, &self.poly_mul(&qpoly, b));
        }
        quo
    }

    /// GCD, normalized monic in graded-lex.
    pub fn poly_gcd(&self, a: &MPoly, b: &MPoly) -> MPoly {
        let g = self.gcd_raw(a, b);
        self.poly_monic(&g)
    }

    fn poly_monic(&self, a: &MPoly) -> MPoly {
        if a.is_zero() {
            return a.clone();
        }
        let (_, lc) = a.leading();
        if lc == 1 {
            return a.clone();
        }
        self.poly_scale(a, self.fq_inv(lc).expect("nonzero"))
    }

    fn gcd_raw(&self, a: &MPoly, b: &MPoly) -> MPoly {
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        // pick the last variable appearing in either operand
        let nv = a.nvars;
        let main = (0..nv)
            .rev()
            .find(|&i| a.degree_in(i) > 0 || b.degree_in(i) > 0);
        let main = match main {
            None => return self.poly_const(1), // both nonzero constants
            Some(i) => i,
        };
        if a.degree_in(main) == 0 || b.degree_in(main) == 0 {
            // one operand is free of the main variable: gcd divides the
            // content of the other w.r.t. that variable
            let (flat, other) = if a.degree_in(main) == 0 {
                (a, b)
            } else {
                (b, a)
            };
            let cont = self.content_wrt(other, main);
            return self.gcd_raw(flat, &cont);
        }
        let ca = self.content_wrt(a, main);
        let cb = self.content_wrt(b, main);
        let cg = self.gcd_raw(&ca, &cb);
        let mut f = self.poly_divexact(a, &ca);
        let mut g = self.poly_divexact(b, &cb);
        if f.degree_in(main) < g.degree_in(main) {
            std::mem::swap(&mut f, &mut g);
        }
        loop {
            if g.is_zero() {
                break;
            }
            let r = self.pseudo_rem(&f, &g, main);
            f = g;
            g = match r {
                None => break,
                Some(r) if r.is_zero() => break,
                Some(r) => {
                    let c = self.content_wrt(&r, main);
                    self.poly_divexact(&r, &c)
                }
            };
        }
        let fc = self.content_wrt(&f, main);
        let fpp = self.poly_divexact(&f, &fc);
        self.poly_mul(&cg, &fpp)
    }

    /// Pseudo-remainder of `a` by `b` in variable `main`. Returns `None` when
    /// `deg a < deg b` already.
    fn pseudo_rem(&self, a: &MPoly, b: &MPoly, main: usize) -> Option<MPoly> {
        let db = b.degree_in(main);
        if a.degree_in(main) < db {
            return None;
        }
        let lb = self.coeff_wrt(b, main, db);
        let mut r = a.clone();
        while !r.is_zero() && r.degree_in(main) >= db {
            let dr = r.degree_in(main);
            let lr = self.coeff_wrt(&r, main, dr);
            // r <- lb*r - lr * x^(dr-db) * b
            let shift = self.shift_var(&lr, main, dr - db);
            r = self.poly_sub(&self.poly_mul(&lb, &r), &self.poly_mul(&shift, b));
        }
        Some(r)
    }

    /// Coefficient of `x_main^deg` in `a`, as a polynomial with `main` slot 0.
    fn coeff_wrt(&self, a: &MPoly, main: usize, deg: u32) -> MPoly {
        let mut terms = BTreeMap::new();
        for (m, &c) in &a.terms {
            if m.0[main] == deg {
                let mut e = m.0.clone();
                e[main] = 0;
                terms.insert(Mono(e), c);
            }
        }
        MPoly {
            terms,
            nvars: a.nvars,
        }
    }

    fn shift_var(&self, a: &MPoly, main: usize, by: u32) -> MPoly {
        let mut terms = BTreeMap::new();
        for (m, &c) in &a.terms {
            let mut e = m.0.clone();
            e[main] += by;
            terms.insert(Mono(e), c);
        }
        MPoly {
            terms,
            nvars: a.nvars,
        }
    }

    /// GCD of the coefficients of `a` viewed as univariate in `main`.
    fn content_wrt(&self, a: &MPoly, main: usize) -> MPoly {
        let mut acc = self.poly_zero();
        for d in 0..=a.degree_in(main) {
            let c = self.coeff_wrt(a, main, d);
            if !c.is_zero() {
                acc = self.gcd_raw(&acc, &c);
            }
        }
        self.poly_monic(&acc)
    }

    pub fn poly_derivative(&self, a: &MPoly, var: usize) -> MPoly {
        let mut terms = BTreeMap::new();
        for (m, &c) in &a.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let scalar = self.fq_from_i64(e as i64);
            if scalar == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[var] -= 1;
            let coeff = self.fq_mul(c, scalar);
            let mono = Mono(exps);
            let entry = terms.entry(mono.clone()).or_insert(0);
            *entry = self.fq_add(*entry, coeff);
            if *entry == 0 {
                terms.remove(&mono);
            }
        }
        MPoly {
            terms,
            nvars: a.nvars,
        }
    }

    pub fn poly_frobenius(&self, a: &MPoly) -> MPoly {
        MPoly {
            terms: a
                .terms
                .iter()
                .map(|(m, &c)| {
                    (
                        Mono(m.0.iter().map(|&e| e * self.p as u32).collect()),
                        self.fq_pow(c, self.p),
                    )
                })
                .collect(),
            nvars: a.nvars,
        }
    }

    /// All exponents divisible by p (coefficients are automatically p-th
    /// powers since `F_q` is perfect).
    pub fn poly_is_pth_power(&self, a: &MPoly) -> bool {
        a.terms
            .keys()
            .all(|m| m.0.iter().all(|&e| e % self.p as u32 == 0))
    }

    pub fn poly_pth_root(&self, a: &MPoly) -> Option<MPoly> {
        if !self.poly_is_pth_power(a) {
            return None;
        }
        Some(MPoly {
            terms: a
                .terms
                .iter()
                .map(|(m, &c)| {
                    (
                        Mono(m.0.iter().map(|&e| e / self.p as u32).collect()),
                        self.fq_pth_root(c),
                    )
                })
                .collect(),
            nvars: a.nvars,
        })
    }

    /// Reinterpret `a` over a field with extra variables appended at the end.
    pub fn poly_extend_vars(&self, a: &MPoly, new_nvars: usize) -> MPoly {
        debug_assert!(new_nvars >= a.nvars);
        MPoly {
            terms: a
                .terms
                .iter()
                .map(|(m, &c)| {
                    let mut e = m.0.clone();
                    e.resize(new_nvars, 0);
                    (Mono(e), c)
                })
                .collect(),
            nvars: new_nvars,
        }
    }

    /// Substitute `x_var -> x_var^e` (exponent rescaling).
    pub fn poly_subst_var_power(&self, a: &MPoly, var: usize, e: u32) -> MPoly {
        MPoly {
            terms: a
                .terms
                .iter()
                .map(|(m, &c)| {
                    let mut exps = m.0.clone();
                    exps[var] *= e;
                    (Mono(exps), c)
                })
                .collect(),
            nvars: a.nvars,
        }
    }

    /// Substitute `x_var -> replacement` where `replacement` lives over a
    /// layout with `new_nvars` variables and `var_map[i]` gives the new
    /// position of old variable `i` (`None` exactly for `var`).
    pub fn poly_subst_var(
        &self,
        a: &MPoly,
        var: usize,
        replacement: &MPoly,
        new_field: &ResidueField,
        var_map: &[Option<usize>],
    ) -> MPoly {
        let mut acc = new_field.poly_zero();
        for (m, &c) in &a.terms {
            let mut exps = vec![0u32; new_field.nvars()];
            for (i, &e) in m.0.iter().enumerate() {
                if i == var {
                    continue;
                }
                exps[var_map[i].expect("mapped variable")] = e;
            }
            let mut term = MPoly {
                terms: BTreeMap::from([(Mono(exps), c)]),
                nvars: new_field.nvars(),
            };
            let e_var = m.0[var];
            if e_var > 0 {
                term = new_field.poly_mul(&term, &new_field.poly_pow(replacement, e_var as u64));
            }
            acc = new_field.poly_add(&acc, &term);
        }
        acc
    }

    /// Decompose by the exponent of one variable: degree -> coefficient
    /// polynomial (with that variable's slot zeroed).
    pub fn poly_split_by_var(&self, a: &MPoly, var: usize) -> BTreeMap<u32, MPoly> {
        let mut out: BTreeMap<u32, MPoly> = BTreeMap::new();
        for (m, &c) in &a.terms {
            let d = m.0[var];
            let mut e = m.0.clone();
            e[var] = 0;
            let entry = out.entry(d).or_insert_with(|| MPoly {
                terms: BTreeMap::new(),
                nvars: a.nvars,
            });
            entry.terms.insert(Mono(e), c);
        }
        out
    }

    /// Drop the last variable slot; all its exponents must be zero.
    pub fn poly_drop_last_var(&self, a: &MPoly) -> MPoly {
        MPoly {
            terms: a
                .terms
                .iter()
                .map(|(m, &c)| {
                    debug_assert_eq!(*m.0.last().unwrap(), 0);
                    (Mono(m.0[..m.0.len() - 1].to_vec()), c)
                })
                .collect(),
            nvars: a.nvars - 1,
        }
    }

    // -- rational functions -------------------------------------------------------

    pub fn zero(&self) -> RatFun {
        RatFun {
            num: self.poly_zero(),
            den: self.poly_const(1),
        }
    }

    pub fn one(&self) -> RatFun {
        RatFun {
            num: self.poly_const(1),
            den: self.poly_const(1),
        }
    }

    pub fn from_i64(&self, n: i64) -> RatFun {
        RatFun {
            num: self.poly_const(self.fq_from_i64(n)),
            den: self.poly_const(1),
        }
    }

    pub fn from_fq(&self, c: Fq) -> RatFun {
        RatFun {
            num: self.poly_const(c),
            den: self.poly_const(1),
        }
    }

    pub fn var(&self, name: &str) -> Result<RatFun> {
        let idx = self
            .var_index(name)
            .ok_or_else(|| Error::MalformedParams(format!("unknown residue variable {name:?}")))?;
        Ok(RatFun {
            num: self.poly_var(idx),
            den: self.poly_const(1),
        })
    }

    pub fn from_poly(&self, num: MPoly) -> RatFun {
        self.normalize(num, self.poly_const(1))
    }

    pub fn normalize(&self, num: MPoly, den: MPoly) -> RatFun {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return self.zero();
        }
        let g = self.poly_gcd(&num, &den);
        let (mut num, mut den) = if g.is_const_one() {
            (num, den)
        } else {
            (self.poly_divexact(&num, &g), self.poly_divexact(&den, &g))
        };
        let (_, lc) = den.leading();
        if lc != 1 {
            let inv = self.fq_inv(lc).expect("nonzero");
            num = self.poly_scale(&num, inv);
            den = self.poly_scale(&den, inv);
        }
        RatFun { num, den }
    }

    pub fn add(&self, a: &RatFun, b: &RatFun) -> RatFun {
        let num = self.poly_add(
            &self.poly_mul(&a.num, &b.den),
            &self.poly_mul(&b.num, &a.den),
        );
        let den = self.poly_mul(&a.den, &b.den);
        self.normalize(num, den)
    }

    pub fn neg(&self, a: &RatFun) -> RatFun {
        RatFun {
            num: self.poly_neg(&a.num),
            den: a.den.clone(),
        }
    }

    pub fn sub(&self, a: &RatFun, b: &RatFun) -> RatFun {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &RatFun, b: &RatFun) -> RatFun {
        let num = self.poly_mul(&a.num, &b.num);
        let den = self.poly_mul(&a.den, &b.den);
        self.normalize(num, den)
    }

    pub fn inv(&self, a: &RatFun) -> Result<RatFun> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.normalize(a.den.clone(), a.num.clone()))
    }

    pub fn div(&self, a: &RatFun, b: &RatFun) -> Result<RatFun> {
        Ok(self.mul(a, &self.inv(b)?))
    }

    pub fn pow(&self, a: &RatFun, e: i64) -> Result<RatFun> {
        if e < 0 {
            return self.pow(&self.inv(a)?, -e);
        }
        let mut acc = self.one();
        let mut base = a.clone();
        let mut e = e as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        Ok(acc)
    }

    pub fn frobenius(&self, a: &RatFun) -> RatFun {
        RatFun {
            num: self.poly_frobenius(&a.num),
            den: self.poly_frobenius(&a.den),
        }
    }

    /// An element in lowest terms is a p-th power iff numerator and
    /// denominator both have all exponents divisible by p.
    pub fn is_pth_power(&self, a: &RatFun) -> bool {
        self.poly_is_pth_power(&a.num) && self.poly_is_pth_power(&a.den)
    }

    pub fn pth_root(&self, a: &RatFun) -> Option<RatFun> {
        Some(RatFun {
            num: self.poly_pth_root(&a.num)?,
            den: self.poly_pth_root(&a.den)?,
        })
    }

    pub fn derivative(&self, a: &RatFun, var: usize) -> RatFun {
        let n = self.poly_sub(
            &self.poly_mul(&self.poly_derivative(&a.num, var), &a.den),
            &self.poly_mul(&a.num, &self.poly_derivative(&a.den, var)),
        );
        let d = self.poly_mul(&a.den, &a.den);
        self.normalize(n, d)
    }

    /// Reinterpret over a field extending this one by appended variables.
    pub fn extend_to(&self, a: &RatFun, target: &ResidueField) -> RatFun {
        debug_assert!(target.nvars() >= self.nvars());
        RatFun {
            num: self.poly_extend_vars(&a.num, target.nvars()),
            den: self.poly_extend_vars(&a.den, target.nvars()),
        }
    }

    pub fn fmt_ratfun(&self, a: &RatFun) -> String {
        if a.is_zero() {
            return "0".into();
        }
        let num = self.fmt_poly(&a.num);
        if a.den.is_const_one() {
            num
        } else {
            format!("({})/({})", num, self.fmt_poly(&a.den))
        }
    }

    pub fn fmt_poly(&self, a: &MPoly) -> String {
        if a.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (m, &c) in a.terms.iter().rev() {
            let mut factors = Vec::new();
            let is_const_mono = m.0.iter().all(|&e| e == 0);
            if c != 1 || is_const_mono {
                factors.push(format!("{c}"));
            }
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if e == 1 {
                    factors.push(self.vars[i].clone());
                } else {
                    factors.push(format!("{}^{}", self.vars[i], e));
                }
            }
            parts.push(factors.join("*"));
        }
        parts.join(" + ")
    }
}

impl MPoly {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_const_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .all(|(m, &c)| c == 1 && m.0.iter().all(|&e| e == 0))
    }

    pub fn leading(&self) -> (&Mono, Fq) {
        let (m, &c) = self.terms.iter().next_back().expect("nonzero polynomial");
        (m, c)
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.0[var]).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u64 {
        self.terms.keys().map(|m| m.total_degree()).max().unwrap_or(0)
    }
}

impl RatFun {
    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_const_one() && self.den.is_const_one()
    }

    /// True for elements of `F_q` itself (no variables involved).
    pub fn is_constant(&self) -> bool {
        self.num.total_degree() == 0 && self.den.total_degree() == 0
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3t() -> ResidueField {
        ResidueField::new(3, 3, vec!["T".into()]).unwrap()
    }

    #[test]
    fn fq_extension_field_arithmetic() {
        let f4 = ResidueField::new(2, 4, vec![]).unwrap();
        // x^2 + x + 1 is the only irreducible quadratic over F_2
        assert_eq!(f4.modulus, vec![1, 1, 1]);
        let x = 2u64; // digits (0,1)
        let x2 = f4.fq_mul(x, x);
        assert_eq!(x2, f4.fq_add(x, 1)); // x^2 = x + 1
        for a in 1..4u64 {
            assert_eq!(f4.fq_mul(a, f4.fq_inv(a).unwrap()), 1);
            assert_eq!(f4.fq_pow(f4.fq_pth_root(a), 2), a);
        }
        let f9 = ResidueField::new(3, 9, vec![]).unwrap();
        for a in 1..9u64 {
            assert_eq!(f9.fq_mul(a, f9.fq_inv(a).unwrap()), 1);
            assert_eq!(f9.fq_pow(f9.fq_pth_root(a), 3), a);
        }
    }

    #[test]
    fn ratfun_normalization_and_gcd() {
        let k = f3t();
        let t = k.var("T").unwrap();
        // (T^2 - 1) / (T - 1) = T + 1
        let t2m1 = k.sub(&k.mul(&t, &t), &k.one());
        let tm1 = k.sub(&t, &k.one());
        let quot = k.div(&t2m1, &tm1).unwrap();
        let tp1 = k.add(&t, &k.one());
        assert_eq!(quot, tp1);
        // denominator monic: 1/(2T) should have monic denominator T
        let inv = k.inv(&k.mul(&k.from_i64(2), &t)).unwrap();
        assert_eq!(k.fmt_ratfun(&inv), "(2)/(T)");
    }

    #[test]
    fn pth_power_test_and_root() {
        let k = f3t();
        let t = k.var("T").unwrap();
        let t3 = k.pow(&t, 3).unwrap();
        assert!(k.is_pth_power(&t3));
        assert_eq!(k.pth_root(&t3).unwrap(), t);
        assert!(!k.is_pth_power(&t));
        let t2 = k.pow(&t, 2).unwrap();
        assert!(!k.is_pth_power(&t2));
        // (T+1)^3 = T^3 + 1 in char 3
        let cube = k.pow(&k.add(&t, &k.one()), 3).unwrap();
        assert!(k.is_pth_power(&cube));
        assert_eq!(k.pth_root(&cube).unwrap(), k.add(&t, &k.one()));
        // constants are always p-th powers
        assert!(k.is_pth_power(&k.from_i64(2)));
        // rational function: T^3 / (T^3+1) is a cube, T^2/(T^3+1) is not
        let r = k.div(&t3, &k.add(&t3, &k.one())).unwrap();
        assert!(k.is_pth_power(&r));
        let r2 = k.div(&t2, &k.add(&t3, &k.one())).unwrap();
        assert!(!k.is_pth_power(&r2));
    }

    #[test]
    fn derivative_quotient_rule() {
        let k = f3t();
        let t = k.var("T").unwrap();
        // d/dT (1/T) = -1/T^2
        let inv_t = k.inv(&t).unwrap();
        let d = k.derivative(&inv_t, 0);
        let expected = k
            .div(&k.from_i64(-1), &k.mul(&t, &t))
            .unwrap();
        assert_eq!(d, expected);
        // d/dT (T^3) = 0 in char 3
        let t3 = k.pow(&t, 3).unwrap();
        assert!(k.derivative(&t3, 0).is_zero());
    }

    #[test]
    fn multivariate_gcd() {
        let k = ResidueField::new(3, 3, vec!["S".into(), "T".into()]).unwrap();
        let s = k.var("S").unwrap();
        let t = k.var("T").unwrap();
        let spt = k.add(&s, &t);
        // (S+T)^2 * S and (S+T) * T have gcd S+T
        let a = k.mul(&k.mul(&spt, &spt), &s);
        let b = k.mul(&spt, &t);
        let g = k.poly_gcd(&a.num, &b.num);
        assert_eq!(g, spt.num);
        // and the quotient a/b normalizes via that gcd
        let q = k.div(&a, &b).unwrap();
        let expected = k.div(&k.mul(&spt, &s), &t).unwrap();
        assert_eq!(q, expected);
    }

    #[test]
    fn frobenius_is_field_map() {
        let k = f3t();
        let t = k.var("T").unwrap();
        let a = k.div(&k.add(&t, &k.one()), &k.sub(&t, &k.one())).unwrap();
        let b = k.add(&k.mul(&t, &t), &k.from_i64(2));
        let fab = k.frobenius(&k.mul(&a, &b));
        assert_eq!(fab, k.mul(&k.frobenius(&a), &k.frobenius(&b)));
        let fsum = k.frobenius(&k.add(&a, &b));
        assert_eq!(fsum, k.add(&k.frobenius(&a), &k.frobenius(&b)));
        assert_eq!(k.frobenius(&a), k.pow(&a, 3).unwrap());
    }
}
