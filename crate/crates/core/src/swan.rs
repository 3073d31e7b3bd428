//! Artin-Schreier-Witt characters and their Swan conductors.
//!
//! A character is a Witt-vector class in `W_s(L)/(F-1)W_s(L)`. For `s = 1`
//! the best representative is found by an exact reduction loop: a pole of
//! order divisible by p whose leading residue is a p-th power can be peeled
//! off by subtracting `(F-1)b` for a monomial `b`, and nothing else can be.
//! For `s >= 2` a greedy single-slot reduction produces an upper bound; the
//! refined Swan conductor can then certify the exact value whenever the
//! differential of the reduced representative has log valuation inside the
//! filtration window `(floor(n/p), n]`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::logdiff::{self, LogForm};
use crate::probe::{Probe, TameTwist};
use crate::tower::{Tower, Val};
use crate::witt::{self, WittVector};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Certainty {
    /// Exact reduction to a best representative.
    Exact,
    /// Exact value pinned by the refined Swan conductor of a (possibly
    /// non-best) representative.
    RswCertified,
    /// Greedy upper bound only.
    UpperBound,
}

impl Certainty {
    pub fn is_certified(self) -> bool {
        !matches!(self, Certainty::UpperBound)
    }
}

#[derive(Clone, Debug)]
pub struct BestReduction {
    pub rep: WittVector,
    pub sw: i64,
    pub certainty: Certainty,
}

#[derive(Debug)]
pub struct AswCharacter {
    rep: WittVector,
    best: OnceLock<BestReduction>,
}

impl Clone for AswCharacter {
    fn clone(&self) -> Self {
        let c = AswCharacter {
            rep: self.rep.clone(),
            best: OnceLock::new(),
        };
        if let Some(b) = self.best.get() {
            let _ = c.best.set(b.clone());
        }
        c
    }
}

impl AswCharacter {
    pub fn new(rep: WittVector) -> AswCharacter {
        AswCharacter {
            rep,
            best: OnceLock::new(),
        }
    }

    pub fn from_element(a: crate::tower::FieldElement) -> AswCharacter {
        AswCharacter::new(WittVector::from_single(a))
    }

    pub fn level(&self) -> usize {
        self.rep.level()
    }

    pub fn s(&self) -> usize {
        self.rep.len()
    }

    pub fn rep(&self) -> &WittVector {
        &self.rep
    }

    /// Cached reduction; compute-once then frozen.
    pub fn reduce(&self, tower: &Tower) -> Result<BestReduction> {
        if let Some(b) = self.best.get() {
            return Ok(b.clone());
        }
        let b = reduce_to_best(tower, &self.rep)?;
        let _ = self.best.set(b.clone());
        Ok(b)
    }

    /// Transport along an inclusion of levels in the same tower.
    pub fn embed_to(&self, tower: &Tower, to: usize) -> Result<AswCharacter> {
        Ok(AswCharacter::new(
            self.rep.try_map(|c| tower.embed(c, to))?,
        ))
    }

    /// Transport along a tame twist (level shifts down by the new bottom step).
    pub fn through_twist(&self, twist: &TameTwist) -> AswCharacter {
        AswCharacter::new(self.rep.map(|c| twist.transport(c)))
    }

    /// Transport into a probe field.
    pub fn through_probe(&self, probe: &Probe) -> Result<AswCharacter> {
        Ok(AswCharacter::new(
            self.rep.try_map(|c| probe.transport(c))?,
        ))
    }
}

/// Reduction for Witt length 1: exact best representative and conductor.
fn reduce_s1(tower: &Tower, a: &crate::tower::FieldElement) -> Result<BestReduction> {
    let p = tower.p() as i64;
    let level = a.level();
    let residue = tower.residue(level).clone();
    let mut a = a.clone();
    loop {
        let v = match tower.valuation(&a)? {
            Val::Infinite => {
                return Ok(BestReduction {
                    rep: WittVector::from_single(a),
                    sw: 0,
                    certainty: Certainty::Exact,
                })
            }
            Val::Finite(v) => v,
        };
        if v >= 0 {
            return Ok(BestReduction {
                rep: WittVector::from_single(a),
                sw: 0,
                certainty: Certainty::Exact,
            });
        }
        let n = -v;
        if n % p != 0 {
            return Ok(BestReduction {
                rep: WittVector::from_single(a),
                sw: n,
                certainty: Certainty::Exact,
            });
        }
        let r = tower.leading_residue(&a)?;
        let root = match residue.pth_root(&r) {
            None => {
                return Ok(BestReduction {
                    rep: WittVector::from_single(a),
                    sw: n,
                    certainty: Certainty::Exact,
                })
            }
            Some(root) => root,
        };
        // b = root * pi^{-n/p}; subtracting (F-1)b strictly raises v
        let b = tower.mul(
            &tower.constant(level, root),
            &tower.uniformizer_pow(level, -n / p)?,
        );
        let fb = tower.sub(&tower.frobenius(&b), &b);
        a = tower.sub(&a, &fb);
    }
}

/// Greedy reduction for `s >= 2`: repeatedly subtract `(F-1)` of a
/// single-slot monomial that strictly raises the Brylinski valuation.
pub fn greedy_reduce(tower: &Tower, w: &WittVector) -> Result<(WittVector, Val)> {
    let p = tower.p() as i64;
    let s = w.len();
    let level = w.level();
    let residue = tower.residue(level).clone();
    let mut w = w.clone();
    loop {
        let vb = witt::witt_valuation(tower, &w)?;
        let n = match vb {
            Val::Infinite => return Ok((w, vb)),
            Val::Finite(n) if n >= 0 => return Ok((w, vb)),
            Val::Finite(n) => n,
        };
        let mut improved = false;
        for i in 0..s {
            let ci = w.component(i);
            let vi = match tower.valuation(ci)? {
                Val::Finite(v) => v,
                Val::Infinite => continue,
            };
            if p.pow(i as u32) * vi != n || vi >= 0 || vi % p != 0 {
                continue;
            }
            let r = tower.leading_residue(ci)?;
            let Some(root) = residue.pth_root(&r) else {
                continue;
            };
            let b_elem = tower.mul(
                &tower.constant(level, root),
                &tower.uniformizer_pow(level, vi / p)?,
            );
            let b = WittVector::single_slot(tower, s, i, b_elem);
            let cand = witt::witt_sub(tower, &w, &witt::frobenius_minus_one(tower, &b));
            let vc = witt::witt_valuation(tower, &cand)?;
            if vc > vb {
                w = cand;
                improved = true;
                break;
            }
        }
        if !improved {
            return Ok((w, vb));
        }
    }
}

/// Best-representative reduction. Exact for `s = 1`; for `s >= 2` the result
/// is a greedy upper bound unless the refined Swan conductor certifies it.
pub fn reduce_to_best(tower: &Tower, rep: &WittVector) -> Result<BestReduction> {
    if rep.len() == 1 {
        return tower.with_precision_retry(|t| reduce_s1(t, rep.component(0)));
    }
    tower.with_precision_retry(|t| {
        let (w, vb) = greedy_reduce(t, rep)?;
        let n = match vb {
            Val::Infinite => 0,
            Val::Finite(v) => (-v).max(0),
        };
        if n == 0 {
            return Ok(BestReduction {
                rep: w,
                sw: 0,
                certainty: Certainty::Exact,
            });
        }
        // certificate: if -v_log(d(rep)) lands in (floor(n/p), n], the class
        // is nontrivial there and the conductor is pinned exactly
        let omega = witt::d_map(t, &w)?;
        if let Val::Finite(vlog) = logdiff::v_log(t, &omega)? {
            let nlog = -vlog;
            if nlog > n / t.p() as i64 && nlog <= n {
                return Ok(BestReduction {
                    rep: w,
                    sw: nlog,
                    certainty: Certainty::RswCertified,
                });
            }
        }
        Ok(BestReduction {
            rep: w,
            sw: n,
            certainty: Certainty::UpperBound,
        })
    })
}

pub fn swan_conductor(tower: &Tower, chi: &AswCharacter) -> Result<i64> {
    Ok(chi.reduce(tower)?.sw)
}

#[derive(Clone, Debug)]
pub struct RefinedSwan {
    pub form: LogForm,
    /// Filtration level of the representative: the class lives in
    /// `F_n / F_m` with `m = floor(n/p)`.
    pub n: i64,
    pub m: i64,
}

/// Refined Swan conductor `rsw(chi) = d(reduced rep)` in
/// `F_n Omega / F_{floor(n/p)} Omega`.
pub fn refined_swan(tower: &Tower, chi: &AswCharacter) -> Result<RefinedSwan> {
    let red = chi.reduce(tower)?;
    if red.sw == 0 {
        return Err(Error::ZeroConductor);
    }
    tower.with_precision_retry(|t| {
        let vb = witt::witt_valuation(t, &red.rep)?;
        let n = match vb {
            Val::Finite(v) => -v,
            Val::Infinite => return Err(Error::ZeroConductor),
        };
        let form = witt::d_map(t, &red.rep)?;
        Ok(RefinedSwan {
            form,
            n,
            m: n.div_euclid(t.p() as i64),
        })
    })
}

/// Recover the Swan conductor from a refined-Swan representative: the class
/// in `F_n / F_m` is nontrivial iff `-v_log > m`, and then pins the value.
pub fn swan_from_rsw(tower: &Tower, form: &LogForm, _n: i64, m: i64) -> Result<i64> {
    match logdiff::v_log(tower, form)? {
        Val::Finite(v) if -v > m => Ok(-v),
        _ => Err(Error::TrivialClass),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::ProbeKind;
    use rand::{Rng, SeedableRng};

    fn k_field() -> Tower {
        Tower::base(3, 3).unwrap()
    }

    fn l0_field() -> Tower {
        k_field().extended_constant("T").unwrap()
    }

    fn as_tower(with_t: bool) -> Tower {
        let t1 = l0_field();
        let k = t1.residue(1).clone();
        let c = if with_t { k.var("T").unwrap() } else { k.one() };
        let f = t1.monomial(1, c, -1).unwrap();
        t1.extended_artin_schreier(f).unwrap()
    }

    fn chi_mono(t: &Tower, level: usize, coeff: crate::residue::RatFun, e: i64) -> AswCharacter {
        AswCharacter::from_element(t.monomial(level, coeff, e).unwrap())
    }

    #[test]
    fn s1_reduction_examples() {
        let t = k_field();
        let k = t.residue(0).clone();
        // a = u^{-2}: p does not divide 2, best, Sw = 2
        let chi = chi_mono(&t, 0, k.one(), -2);
        let red = chi.reduce(&t).unwrap();
        assert_eq!((red.sw, red.certainty), (2, Certainty::Exact));
        // a = u^{-3}: reduce by b = u^{-1}, ends at u^{-1}, Sw = 1
        let chi = chi_mono(&t, 0, k.one(), -3);
        let red = chi.reduce(&t).unwrap();
        assert_eq!(red.sw, 1);
        let expected = t.uniformizer_pow(0, -1).unwrap();
        assert!(t.sub(red.rep.component(0), &expected).is_exact_zero());
        // integral a: Sw = 0
        let chi = chi_mono(&t, 0, k.one(), 4);
        assert_eq!(swan_conductor(&t, &chi).unwrap(), 0);
        // T u^{-3} over F_3(T)((u)): T is not a cube, best, Sw = 3
        let l0 = l0_field();
        let tv = l0.residue(1).var("T").unwrap();
        let chi = chi_mono(&l0, 1, tv, -3);
        let red = chi.reduce(&l0).unwrap();
        assert_eq!((red.sw, red.certainty), (3, Certainty::Exact));
    }

    #[test]
    fn reduction_is_idempotent() {
        let t = k_field();
        let chi = chi_mono(&t, 0, t.residue(0).one(), -9);
        let red = chi.reduce(&t).unwrap();
        let again = reduce_to_best(&t, &red.rep).unwrap();
        assert_eq!(again.sw, red.sw);
        assert_eq!(again.rep, red.rep);
    }

    #[test]
    fn class_invariance_randomized() {
        let t = l0_field();
        let k = t.residue(1).clone();
        let tv = k.var("T").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            // random a and small random b; Sw(a) = Sw(a + (F-1)b)
            let mut a = t.zero(1);
            for e in -4i64..=0 {
                let c0 = rng.gen_range(0..3) as i64;
                let c1 = rng.gen_range(0..3) as i64;
                let c = k.add(&k.from_i64(c0), &k.mul(&k.from_i64(c1), &tv));
                a = t.add(&a, &t.monomial(1, c, e).unwrap());
            }
            let mut b = t.zero(1);
            for e in -1i64..=0 {
                let c = k.from_i64(rng.gen_range(0..3) as i64);
                b = t.add(&b, &t.monomial(1, c, e).unwrap());
            }
            let fb = t.sub(&t.frobenius(&b), &b);
            let chi1 = AswCharacter::from_element(a.clone());
            let chi2 = AswCharacter::from_element(t.add(&a, &fb));
            assert_eq!(
                swan_conductor(&t, &chi1).unwrap(),
                swan_conductor(&t, &chi2).unwrap()
            );
        }
    }

    #[test]
    fn refined_swan_examples() {
        let l0 = l0_field();
        let k = l0.residue(1).clone();
        let tv = k.var("T").unwrap();
        // a = T u^{-3}: rsw = u^{-3} dT, Sw = -v_log = 3
        let chi = chi_mono(&l0, 1, tv.clone(), -3);
        let rsw = refined_swan(&l0, &chi).unwrap();
        assert_eq!((rsw.n, rsw.m), (3, 1));
        assert!(rsw.form.pi_coeff.is_exact_zero());
        let dt = rsw.form.var_coeff("T").unwrap();
        assert_eq!(l0.valuation(dt).unwrap(), Val::Finite(-3));
        assert_eq!(swan_from_rsw(&l0, &rsw.form, rsw.n, rsw.m).unwrap(), 3);
        // a = T u^{-1}: both coefficients at valuation -1
        let chi = chi_mono(&l0, 1, tv, -1);
        let rsw = refined_swan(&l0, &chi).unwrap();
        assert_eq!(
            l0.valuation(&rsw.form.pi_coeff).unwrap(),
            Val::Finite(-1)
        );
        assert_eq!(
            l0.valuation(rsw.form.var_coeff("T").unwrap()).unwrap(),
            Val::Finite(-1)
        );
        // a = u^{-2}: both routes agree
        let chi = chi_mono(&l0, 1, k.one(), -2);
        let rsw = refined_swan(&l0, &chi).unwrap();
        assert_eq!(
            swan_from_rsw(&l0, &rsw.form, rsw.n, rsw.m).unwrap(),
            swan_conductor(&l0, &chi).unwrap()
        );
        // the filtration cut: u^{-1} dlog u against m = 1 is trivial
        let form = LogForm::dlog_pi(&l0, 1).scale(&l0, &l0.uniformizer_pow(1, -1).unwrap());
        assert!(matches!(
            swan_from_rsw(&l0, &form, 3, 1),
            Err(Error::TrivialClass)
        ));
    }

    #[test]
    fn base_change_tame() {
        // a = u^{-1} under Tame(2): Sw 1 -> 2
        let t = k_field();
        let chi = chi_mono(&t, 0, t.residue(0).one(), -1);
        assert_eq!(swan_conductor(&t, &chi).unwrap(), 1);
        let twist = t.tame_twist(2).unwrap();
        let chi2 = chi.through_twist(&twist);
        assert_eq!(swan_conductor(&twist.dst, &chi2).unwrap(), 2);
    }

    #[test]
    fn base_change_to_artin_schreier_level() {
        // f = u^{-1} tower: u^{-1} = alpha^3 - alpha = (F-1)(alpha) upstairs,
        // so the restricted character is trivial (the boundary case of the
        // degree-p formula, which the formula itself excludes)
        let t = as_tower(false);
        let chi = chi_mono(&t, 0, t.residue(0).one(), -1);
        let up = chi.embed_to(&t, 2).unwrap();
        assert_eq!(swan_conductor(&t, &up).unwrap(), 0);
        // u^{-2}: Sw 2 -> 3(2 - 2/3) = 4
        let chi = chi_mono(&t, 0, t.residue(0).one(), -2);
        let up = chi.embed_to(&t, 2).unwrap();
        assert_eq!(swan_conductor(&t, &up).unwrap(), 4);
        // f = T u^{-1} tower: delta = 0, Sw(u^{-N}) = 3N
        let tt = as_tower(true);
        for n in [1i64, 2, 4, 5] {
            let chi = chi_mono(&tt, 0, tt.residue(0).one(), -n);
            let up = chi.embed_to(&tt, 2).unwrap();
            assert_eq!(swan_conductor(&tt, &up).unwrap(), 3 * n, "N = {n}");
        }
    }

    #[test]
    fn base_change_through_probes() {
        let l0 = l0_field();
        let k = l0.residue(1).clone();
        let tv = k.var("T").unwrap();
        // T u^{-3} under pi_root(1): becomes (T1)^3 u^{-3}, reduces to Sw 1
        let chi = chi_mono(&l0, 1, tv.clone(), -3);
        let probe = l0.probe_extend(ProbeKind::PiRoot { j: 1 }, "T").unwrap();
        let moved = chi.through_probe(&probe).unwrap();
        assert_eq!(swan_conductor(&probe.dst, &moved).unwrap(), 1);
        // T u^{-1} under shift_probe(2,1): Sw 1 -> 9*1 - 1 = 8
        let chi = chi_mono(&l0, 1, tv.clone(), -1);
        let probe = l0
            .probe_extend(ProbeKind::Shift { i: 2, j: 1 }, "T")
            .unwrap();
        let moved = chi.through_probe(&probe).unwrap();
        assert_eq!(swan_conductor(&probe.dst, &moved).unwrap(), 8);
        // T u^{-3} under shift_probe(2,1): Sw 3 -> 9*3 - 1 = 26
        let chi = chi_mono(&l0, 1, tv, -3);
        let moved = chi.through_probe(&probe).unwrap();
        assert_eq!(swan_conductor(&probe.dst, &moved).unwrap(), 26);
    }

    #[test]
    fn witt_length_two_certificates() {
        // tame tower, chi = (u^{-1}, 0) in paper order has Sw 3 at the base
        // and Sw 6 = 2*3 upstairs, pinned by the refined Swan conductor
        let t = k_field();
        let w = WittVector::new(
            0,
            vec![t.zero(0), t.uniformizer_pow(0, -1).unwrap()],
        );
        let chi = AswCharacter::new(w);
        let red = chi.reduce(&t).unwrap();
        assert_eq!(red.sw, 3);
        assert!(red.certainty.is_certified());
        let twist = t.tame_twist(2).unwrap();
        let up = chi.through_twist(&twist);
        let red = up.reduce(&twist.dst).unwrap();
        assert_eq!(red.sw, 6);
        assert!(red.certainty.is_certified());

        // degree-p tower with delta_tor = 2: Sw((u^{-1},0) over L) = 3*3 - 2 = 7
        let tas = as_tower(false);
        let w = WittVector::new(
            0,
            vec![tas.zero(0), tas.uniformizer_pow(0, -1).unwrap()],
        );
        let up = AswCharacter::new(w).embed_to(&tas, 2).unwrap();
        let red = up.reduce(&tas).unwrap();
        assert_eq!(red.sw, 7);
        assert!(red.certainty.is_certified());

        // delta_tor = 0 tower: Sw = 9
        let tt = as_tower(true);
        let w = WittVector::new(
            0,
            vec![tt.zero(0), tt.uniformizer_pow(0, -1).unwrap()],
        );
        let up = AswCharacter::new(w).embed_to(&tt, 2).unwrap();
        let red = up.reduce(&tt).unwrap();
        assert_eq!(red.sw, 9);
        assert!(red.certainty.is_certified());
    }
}
