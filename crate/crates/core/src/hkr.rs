//! Hochschild-Kostant-Rosenberg maps. A polyvector goes to the total
//! antisymmetrization of its first-order slots (no auxiliary factor, so
//! u ^ v acts as u(a)v(b) - v(a)u(b)); a chain a_0 (x) a_1 (x) ... (x) a_k
//! goes to the form a_0 da_1 ^ ... ^ da_k.

use crate::chain::HochChain;
use crate::diffop::{OpKey, PolyDiffOp};
use crate::form::{ExtForm, FormKey};
use crate::graded::{perm_parity, VarKind};
use crate::poly::{IdxSet, Mono, XPoly};
use crate::pvf::{permutations, PolyVecField, PvfKey};
use crate::ratio::factorial;
use num_bigint::BigInt;
use num_traits::One;

/// gamma |-> i_gamma(d a_0 ^ ... ^ d a_k) as a polydifferential operator:
/// every term spreads its wedge slots over the arguments in all orders with
/// the permutation sign.
pub fn hkr_v(g: &PolyVecField) -> PolyDiffOp {
    let mut out = PolyDiffOp::zero(g.var, g.d);
    for (k, c) in &g.terms {
        let dirs: Vec<usize> = k.vslots.iter().collect();
        for p in permutations(dirs.len()) {
            let oslots: Vec<Mono> = p.iter().map(|&j| Mono::unit(g.d, dirs[j])).collect();
            let cc = if perm_parity(&p) < 0 { c.neg() } else { c.clone() };
            out.insert(OpKey { ydeg: k.ydeg.clone(), dyset: k.dyset, oslots }, cc);
        }
    }
    out
}

/// Projection back onto polyvectors: keeps the terms whose slots are all of
/// first order, sorts the slot directions with the permutation sign and
/// divides by (number of slots)!. Left inverse of hkr_v.
pub fn antisymmetrize(p: &PolyDiffOp) -> PolyVecField {
    let mut out = PolyVecField::zero(p.var, p.d);
    'term: for (k, c) in &p.terms {
        let n = k.oslots.len();
        let mut vslots = IdxSet::empty();
        let mut neg = false;
        for slot in &k.oslots {
            if slot.total() != 1 {
                continue 'term;
            }
            let dir = slot.0.iter().position(|&e| e == 1).unwrap();
            let Some((next, s)) = vslots.wedge(IdxSet::from_iter([dir])) else { continue 'term };
            vslots = next;
            neg ^= s;
        }
        let mut cc = c.scale(&factorial(n as u32).recip());
        if neg {
            cc = cc.neg();
        }
        out.insert(PvfKey { ydeg: k.ydeg.clone(), dyset: k.dyset, vslots }, cc);
    }
    out
}

/// a_0 (x) a_1 (x) ... (x) a_k |-> a_0 da_1 ^ ... ^ da_k with the
/// differential acting on the group payloads; the dy block rides in front.
pub fn hkr_c(b: &HochChain) -> ExtForm {
    let d = b.d;
    let mut out = ExtForm::zero(b.var, d);
    for (k, c) in &b.terms {
        // state: accumulated dx word, its sign, payload collected so far,
        // and the integer factor from differentiating the monomials
        let mut acc: Vec<(IdxSet, bool, Mono, BigInt)> =
            vec![(IdxSet::empty(), false, k.groups[0].clone(), BigInt::one())];
        for g in &k.groups[1..] {
            let mut next = Vec::new();
            for i in 0..d {
                if g.0[i] == 0 {
                    continue;
                }
                let mut m = g.clone();
                m.0[i] -= 1;
                for (word, s, pay, f) in &acc {
                    let Some((w2, s2)) = word.wedge(IdxSet::from_iter([i])) else { continue };
                    next.push((w2, s ^ s2, pay.add(&m), f * g.0[i]));
                }
            }
            acc = next;
        }
        for (word, s, pay, f) in acc {
            let mut cc = c.scale(&crate::ratio::Rat::from_integer(f));
            if s {
                cc = cc.neg();
            }
            match b.var {
                VarKind::Fiber => {
                    out.insert(FormKey { ydeg: pay, dyset: k.dyset, dxset: word }, cc);
                }
                VarKind::Chart => {
                    let mono = XPoly::monomial(d, pay, crate::ratio::rint(1));
                    out.insert(
                        FormKey { ydeg: Mono::zero(d), dyset: IdxSet::empty(), dxset: word },
                        cc.mul(&mono),
                    );
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{chain_diff, HochChain};
    use crate::diffop::hoch_diff;
    use crate::form;
    use crate::pvf;
    use crate::ratio::{rat, rint};

    fn as_form(v: &PolyVecField) -> ExtForm {
        let mut out = ExtForm::zero(v.var, v.d);
        for (k, c) in &v.terms {
            assert!(k.vslots.is_empty());
            out.insert(
                FormKey { ydeg: k.ydeg.clone(), dyset: k.dyset, dxset: IdxSet::empty() },
                c.clone(),
            );
        }
        out
    }

    fn fun_as_form(a: &PolyVecField) -> ExtForm {
        as_form(a)
    }

    #[test]
    fn two_vector_pin() {
        let d = 2;
        let g = pvf::wedge(
            &PolyVecField::coord_vf(VarKind::Chart, d, 0),
            &PolyVecField::coord_vf(VarKind::Chart, d, 1),
        );
        let expect = PolyDiffOp::tuple_op(VarKind::Chart, d, vec![Mono::unit(d, 0), Mono::unit(d, 1)])
            .sub(&PolyDiffOp::tuple_op(VarKind::Chart, d, vec![Mono::unit(d, 1), Mono::unit(d, 0)]));
        assert_eq!(hkr_v(&g), expect);
        // on functions: V(u ^ v)(a, b) = u(a) v(b) - v(a) u(b)
        let a = PolyVecField::function(VarKind::Chart, d, Mono::zero(d), XPoly::monomial(d, Mono(vec![2, 0]), rint(1)));
        let b = PolyVecField::function(VarKind::Chart, d, Mono::zero(d), XPoly::monomial(d, Mono(vec![0, 3]), rint(1)));
        let r = hkr_v(&g).eval(&[a.clone(), b.clone()]);
        let expect = PolyVecField::function(
            VarKind::Chart,
            d,
            Mono::zero(d),
            XPoly::monomial(d, Mono(vec![1, 2]), rint(6)),
        );
        assert_eq!(r, expect);
        assert!(hkr_v(&g).eval(&[b, a]).add(&r).is_zero());
    }

    #[test]
    fn matches_contraction_of_differentials() {
        // chart mode, mixed 2-vector with polynomial coefficients
        let d = 3;
        let mut g = PolyVecField::term(
            VarKind::Chart,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            IdxSet::from_iter([0, 1]),
            XPoly::var(d, 2),
        );
        g.add_assign(&PolyVecField::term(
            VarKind::Chart,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            IdxSet::from_iter([1, 2]),
            XPoly::monomial(d, Mono(vec![1, 1, 0]), rat(1, 2)),
        ));
        let args = [
            PolyVecField::function(VarKind::Chart, d, Mono::zero(d), XPoly::monomial(d, Mono(vec![2, 1, 0]), rint(1))),
            PolyVecField::function(VarKind::Chart, d, Mono::zero(d), XPoly::monomial(d, Mono(vec![0, 1, 1]), rint(3))),
        ];
        let mut w = form::d(&fun_as_form(&args[0]));
        w = form::wedge(&w, &form::d(&fun_as_form(&args[1])));
        assert_eq!(as_form(&hkr_v(&g).eval(&args)), form::contract(&g, &w));

        // fiber mode with a dy letter riding in front
        let g = PolyVecField::term(
            VarKind::Fiber,
            d,
            Mono::unit(d, 2),
            IdxSet::from_iter([0]),
            IdxSet::from_iter([1, 2]),
            XPoly::var(d, 0),
        );
        let args = [
            PolyVecField::function(VarKind::Fiber, d, Mono(vec![0, 2, 1]), XPoly::one(d)),
            PolyVecField::function(VarKind::Fiber, d, Mono(vec![1, 0, 1]), XPoly::var(d, 1)),
        ];
        let mut w = form::d(&fun_as_form(&args[0]));
        w = form::wedge(&w, &form::d(&fun_as_form(&args[1])));
        assert_eq!(as_form(&hkr_v(&g).eval(&args)), form::contract(&g, &w));
    }

    #[test]
    fn lands_in_hochschild_cocycles() {
        let d = 2;
        let g = PolyVecField::term(
            VarKind::Fiber,
            d,
            Mono(vec![1, 1]),
            IdxSet::from_iter([1]),
            IdxSet::from_iter([0, 1]),
            XPoly::var(d, 0),
        );
        assert!(hoch_diff(&hkr_v(&g)).is_zero());
        let g = pvf::wedge(
            &PolyVecField::coord_vf(VarKind::Chart, d, 0),
            &PolyVecField::coord_vf(VarKind::Chart, d, 1),
        );
        assert!(hoch_diff(&hkr_v(&g)).is_zero());
        // degree -1: the algebra is commutative, every function is a cocycle
        let f = PolyVecField::function(VarKind::Chart, d, Mono::zero(d), XPoly::var(d, 0));
        assert!(hoch_diff(&hkr_v(&f)).is_zero());
    }

    #[test]
    fn kills_boundaries() {
        let d = 2;
        let b = HochChain::term(
            VarKind::Fiber,
            d,
            IdxSet::from_iter([0]),
            vec![Mono(vec![1, 0]), Mono(vec![1, 1]), Mono(vec![0, 2])],
            XPoly::var(d, 1),
        );
        assert!(hkr_c(&chain_diff(&b)).is_zero());
        let b = HochChain::term(
            VarKind::Chart,
            d,
            IdxSet::empty(),
            vec![Mono(vec![2, 0]), Mono(vec![1, 1]), Mono(vec![0, 1]), Mono(vec![1, 0])],
            XPoly::constant(d, rat(2, 3)),
        );
        assert!(hkr_c(&chain_diff(&b)).is_zero());
    }

    #[test]
    fn chain_map_pin() {
        // c(a_0 (x) a_1) = a_0 d a_1
        let d = 2;
        let b = HochChain::term(
            VarKind::Chart,
            d,
            IdxSet::empty(),
            vec![Mono(vec![2, 0]), Mono(vec![1, 1])],
            XPoly::one(d),
        );
        let r = hkr_c(&b);
        let mut expect = ExtForm::term(
            VarKind::Chart,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            IdxSet::from_iter([0]),
            XPoly::monomial(d, Mono(vec![2, 1]), rint(1)),
        );
        expect.add_assign(&ExtForm::term(
            VarKind::Chart,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            IdxSet::from_iter([1]),
            XPoly::monomial(d, Mono(vec![3, 0]), rint(1)),
        ));
        assert_eq!(r, expect);
    }

    #[test]
    fn antisymmetrize_is_left_inverse() {
        let d = 3;
        let mut g = PolyVecField::function(VarKind::Fiber, d, Mono::unit(d, 0), XPoly::var(d, 1));
        g.add_assign(&PolyVecField::term(
            VarKind::Fiber,
            d,
            Mono::unit(d, 1),
            IdxSet::from_iter([2]),
            IdxSet::from_iter([0]),
            XPoly::one(d),
        ));
        g.add_assign(&PolyVecField::term(
            VarKind::Fiber,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            IdxSet::from_iter([0, 1, 2]),
            XPoly::constant(d, rat(-3, 7)),
        ));
        assert_eq!(antisymmetrize(&hkr_v(&g)), g);
    }
}
