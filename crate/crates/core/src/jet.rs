//! Polyjets: O-linear functionals on tuples of differential operators on the
//! chart. A jet of degree l eats l+1 operator slots. Jets are kept as lazy
//! expression trees evaluated on basis tuples of partial derivatives, with
//! memoization; a chain embeds as the flat jet whose values are read off the
//! group monomials, and chi recovers the chain from those values.

use crate::chain::{ChainKey, HochChain};
use crate::diffop::{bullet, PolyDiffOp};
use crate::graded::VarKind;
use crate::poly::{monomials_up_to, IdxSet, Mono, XPoly};
use crate::ratio::Rat;
use num_bigint::BigInt;
use num_traits::One;
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

pub struct PolyJet(Rc<JetInner>);

struct JetInner {
    d: usize,
    degree: usize,
    node: Node,
    cache: RefCell<BTreeMap<Vec<Mono>, XPoly>>,
}

enum Node {
    Flat(HochChain),
    Sum(Vec<(Rat, PolyJet)>),
    Cyclic(PolyJet, usize),
    HatR(PolyDiffOp, usize, PolyJet),
    Groth(usize, PolyJet),
    External(Box<dyn Fn(&[Mono]) -> XPoly>),
}

impl Clone for PolyJet {
    fn clone(&self) -> Self {
        PolyJet(Rc::clone(&self.0))
    }
}

impl std::fmt::Debug for PolyJet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PolyJet(degree {})", self.0.degree)
    }
}

/// Number of argument slots shared by all terms of the operator.
pub fn op_arity(p: &PolyDiffOp) -> Option<usize> {
    let mut it = p.terms.keys().map(|k| k.oslots.len());
    let first = it.next()?;
    it.all(|n| n == first).then_some(first)
}

/// Value of the flat jet of a chain on a basis tuple: each group monomial is
/// hit by the matching slot derivative, the leftovers multiply up.
fn flat_eval(b: &HochChain, tuple: &[Mono]) -> XPoly {
    let d = b.d;
    let mut out = XPoly::zero(d);
    for (k, c) in &b.terms {
        assert_eq!(k.groups.len(), tuple.len(), "tuple length must match the chain degree");
        let mut pay = Mono::zero(d);
        let mut factor = BigInt::one();
        let mut ok = true;
        for (g, t) in k.groups.iter().zip(tuple) {
            match g.falling(t) {
                Some((m, f)) => {
                    pay = pay.add(&m);
                    factor *= f;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let cval = c.eval(&vec![Rat::from_integer(0.into()); d]);
        out.add_assign(&XPoly::monomial(d, pay, cval * Rat::from_integer(factor)));
    }
    out
}

impl PolyJet {
    fn build(d: usize, degree: usize, node: Node) -> PolyJet {
        PolyJet(Rc::new(JetInner { d, degree, node, cache: RefCell::new(BTreeMap::new()) }))
    }

    pub fn d(&self) -> usize {
        self.0.d
    }

    pub fn degree(&self) -> usize {
        self.0.degree
    }

    pub fn zero(d: usize, degree: usize) -> PolyJet {
        PolyJet::build(d, degree, Node::Sum(Vec::new()))
    }

    /// The flat jet of a chart chain; inverse of chi.
    pub fn flat(b: &HochChain) -> PolyJet {
        assert_eq!(b.var, VarKind::Chart);
        let degree = b.degree().expect("flat jet needs a chain of a single degree");
        PolyJet::build(b.d, degree, Node::Flat(b.clone()))
    }

    pub fn sum(parts: Vec<(Rat, PolyJet)>) -> PolyJet {
        let (d, degree) = {
            let first = parts.first().expect("sum of no jets has no degree");
            (first.1.d(), first.1.degree())
        };
        assert!(parts.iter().all(|(_, a)| a.d() == d && a.degree() == degree));
        PolyJet::build(d, degree, Node::Sum(parts))
    }

    /// Cyclic rotation t^r: slots move r places to the left.
    pub fn cyclic(a: &PolyJet, r: usize) -> PolyJet {
        PolyJet::build(a.d(), a.degree(), Node::Cyclic(a.clone(), r % (a.degree() + 1)))
    }

    /// Lie action of a chart operator with k+1 slots, lowering the jet
    /// degree by k: the tuple swallows the operator slotwise, plus the
    /// cyclic boundary terms weighted by (-1)^{lj}.
    pub fn hat_r(p: &PolyDiffOp, a: &PolyJet) -> PolyJet {
        assert_eq!(p.var, VarKind::Chart);
        assert!(p.terms.keys().all(|k| k.ydeg.is_zero() && k.dyset.is_empty()));
        let arity = op_arity(p).expect("operator must have terms of a single arity");
        assert!(a.degree() + 2 >= arity + 1, "action would land in negative degree");
        let degree = a.degree() + 1 - arity;
        PolyJet::build(a.d(), degree, Node::HatR(p.clone(), arity, a.clone()))
    }

    /// Hochschild differential on jets: the action of the multiplication.
    pub fn hat_b(a: &PolyJet) -> PolyJet {
        PolyJet::hat_r(&PolyDiffOp::mult_op(VarKind::Chart, a.d()), a)
    }

    /// Grothendieck covariant derivative along d/dx^i.
    pub fn groth(i: usize, a: &PolyJet) -> PolyJet {
        PolyJet::build(a.d(), a.degree(), Node::Groth(i, a.clone()))
    }

    pub fn external(d: usize, degree: usize, f: impl Fn(&[Mono]) -> XPoly + 'static) -> PolyJet {
        PolyJet::build(d, degree, Node::External(Box::new(f)))
    }

    /// Value on the basis tuple of partial derivatives.
    pub fn eval(&self, tuple: &[Mono]) -> XPoly {
        assert_eq!(tuple.len(), self.0.degree + 1, "tuple length must be degree + 1");
        if let Some(v) = self.0.cache.borrow().get(tuple) {
            return v.clone();
        }
        let d = self.0.d;
        let v = match &self.0.node {
            Node::Flat(b) => flat_eval(b, tuple),
            Node::Sum(parts) => {
                let mut acc = XPoly::zero(d);
                for (r, a) in parts {
                    acc.add_assign(&a.eval(tuple).scale(r));
                }
                acc
            }
            Node::Cyclic(a, r) => {
                let mut t = tuple.to_vec();
                t.rotate_left(*r);
                a.eval(&t)
            }
            Node::HatR(p, arity, a) => {
                let l = a.degree();
                let k = *arity as i64 - 1;
                let q = PolyDiffOp::tuple_op(VarKind::Chart, d, tuple.to_vec());
                let mut acc = a.eval_op(&bullet(&q, p));
                for j in 1..=k {
                    let q0 = PolyDiffOp::tuple_op(VarKind::Chart, d, vec![tuple[0].clone()]);
                    let front = bullet(&q0, p);
                    let neg = (l as i64 * j) % 2 != 0;
                    for (key2, c2) in &front.terms {
                        let mut full = key2.oslots.clone();
                        full.extend_from_slice(&tuple[1..]);
                        full.rotate_left(j as usize);
                        let piece = a.eval(&full).mul(c2);
                        acc.add_assign(&if neg { piece.neg() } else { piece });
                    }
                }
                acc
            }
            Node::Groth(i, a) => {
                let u = PolyDiffOp::tuple_op(VarKind::Chart, d, vec![Mono::unit(d, *i)]);
                let q = PolyDiffOp::tuple_op(VarKind::Chart, d, tuple.to_vec());
                a.eval(tuple).deriv(*i).sub(&a.eval_op(&bullet(&u, &q)))
            }
            Node::External(f) => f(tuple),
        };
        self.0.cache.borrow_mut().insert(tuple.to_vec(), v.clone());
        v
    }

    /// O-linear extension to a whole operator: x-coefficients multiply the
    /// values on the basis tuples.
    pub fn eval_op(&self, p: &PolyDiffOp) -> XPoly {
        assert_eq!(p.var, VarKind::Chart);
        let mut out = XPoly::zero(self.0.d);
        for (k, c) in &p.terms {
            assert!(k.ydeg.is_zero() && k.dyset.is_empty());
            out.add_assign(&c.mul(&self.eval(&k.oslots)));
        }
        out
    }
}

/// chi: read the chain back off a flat jet by evaluating on 1 (x) basis
/// tuples with slot orders up to the bound and sweeping from the top order
/// down. Exact when the jet is flat with group degrees within the bound.
pub fn chi(a: &PolyJet, bound: u32) -> HochChain {
    let d = a.d();
    let k = a.degree();
    let monos = monomials_up_to(d, bound);
    let mut tuples: Vec<Vec<Mono>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for t in &tuples {
            for m in &monos {
                let mut t2 = t.clone();
                t2.push(m.clone());
                next.push(t2);
            }
        }
        tuples = next;
    }
    let mut vals: BTreeMap<Vec<Mono>, XPoly> = tuples
        .iter()
        .map(|t| {
            let mut full = vec![Mono::zero(d)];
            full.extend_from_slice(t);
            (t.clone(), a.eval(&full))
        })
        .collect();
    let mut order = tuples;
    order.sort_by_key(|t| std::cmp::Reverse(t.iter().map(|m| m.total()).sum::<u32>()));
    let mut out = HochChain::zero(VarKind::Chart, d);
    for t in &order {
        let w = vals[t].clone();
        if w.is_zero() {
            continue;
        }
        let mut scale = BigInt::one();
        for m in t {
            let (_, f) = m.falling(m).unwrap();
            scale *= f;
        }
        let cpoly = w.scale(&Rat::new(BigInt::one(), scale));
        let mut rec = HochChain::zero(VarKind::Chart, d);
        for (g0, c) in &cpoly.terms {
            let mut groups = vec![g0.clone()];
            groups.extend_from_slice(t);
            rec.insert(ChainKey { dyset: IdxSet::empty(), groups }, XPoly::constant(d, c.clone()));
        }
        out.add_assign(&rec);
        for (t2, v) in vals.iter_mut() {
            let mut full = vec![Mono::zero(d)];
            full.extend_from_slice(t2);
            let contrib = flat_eval(&rec, &full);
            v.add_assign(&contrib.neg());
        }
    }
    out
}

pub fn chi_inverse(b: &HochChain) -> PolyJet {
    PolyJet::flat(b)
}

/// Probe equality on every basis tuple with slot orders up to the bound.
pub fn jets_agree(a: &PolyJet, b: &PolyJet, bound: u32) -> bool {
    assert_eq!(a.degree(), b.degree());
    assert_eq!(a.d(), b.d());
    let monos = monomials_up_to(a.d(), bound);
    let mut tuples: Vec<Vec<Mono>> = vec![Vec::new()];
    for _ in 0..=a.degree() {
        let mut next = Vec::new();
        for t in &tuples {
            for m in &monos {
                let mut t2 = t.clone();
                t2.push(m.clone());
                next.push(t2);
            }
        }
        tuples = next;
    }
    tuples.iter().all(|t| a.eval(t) == b.eval(t))
}

pub fn jet_is_zero(a: &PolyJet, bound: u32) -> bool {
    jets_agree(a, &PolyJet::zero(a.d(), a.degree()), bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{chain_action, chain_diff};
    use crate::diffop::gerstenhaber;
    use crate::ratio::{rat, rint};

    fn sample_chain(d: usize) -> HochChain {
        let mut b = HochChain::term(
            VarKind::Chart,
            d,
            IdxSet::empty(),
            vec![Mono(vec![1, 0]), Mono(vec![2, 0]), Mono(vec![0, 1])],
            XPoly::constant(d, rint(1)),
        );
        b.add_assign(&HochChain::term(
            VarKind::Chart,
            d,
            IdxSet::empty(),
            vec![Mono(vec![0, 0]), Mono(vec![1, 1]), Mono(vec![2, 0])],
            XPoly::constant(d, rat(-1, 2)),
        ));
        b
    }

    #[test]
    fn flat_jets_are_flat() {
        let d = 2;
        let a = PolyJet::flat(&sample_chain(d));
        for i in 0..d {
            assert!(jet_is_zero(&PolyJet::groth(i, &a), 3));
        }
    }

    #[test]
    fn chi_inverts_the_flat_embedding() {
        let d = 2;
        let b = sample_chain(d);
        assert_eq!(chi(&PolyJet::flat(&b), 3), b);
        let single = HochChain::term(
            VarKind::Chart,
            d,
            IdxSet::empty(),
            vec![Mono(vec![2, 1])],
            XPoly::constant(d, rat(5, 3)),
        );
        assert_eq!(chi(&PolyJet::flat(&single), 2), single);
    }

    #[test]
    fn cyclic_rotation_has_the_right_order() {
        let d = 2;
        let a = PolyJet::flat(&sample_chain(d));
        let t3 = PolyJet::cyclic(&a, 3);
        assert!(jets_agree(&a, &t3, 2));
        let t1 = PolyJet::cyclic(&a, 1);
        assert!(!jets_agree(&a, &t1, 2));
    }

    #[test]
    fn action_matches_the_chain_action_through_chi() {
        let d = 2;
        let b = sample_chain(d);
        let a = PolyJet::flat(&b);
        // the multiplication gives the Hochschild differential; the boundary
        // of b carries the degree-4 group x^3 y, so chi must probe that far
        assert_eq!(chi(&PolyJet::hat_b(&a), 4), chain_diff(&b));
        // a first-order 2-slot operator with coefficients
        let mut p = PolyDiffOp::tuple_op(VarKind::Chart, d, vec![Mono::unit(d, 0), Mono::zero(d)]);
        p = p.scale(&rat(1, 3));
        p.add_assign(&PolyDiffOp::term(
            VarKind::Chart,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            vec![Mono::zero(d), Mono::unit(d, 1)],
            XPoly::var(d, 0),
        ));
        assert_eq!(chi(&PolyJet::hat_r(&p, &a), 3), chain_action(&p, &b));
        // a single-slot operator of order two
        let q = PolyDiffOp::term(
            VarKind::Chart,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            vec![Mono(vec![2, 0])],
            XPoly::var(d, 1),
        );
        assert_eq!(chi(&PolyJet::hat_r(&q, &a), 3), chain_action(&q, &b));
        // a 0-slot operator raises the degree
        let f = PolyDiffOp::term(
            VarKind::Chart,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            Vec::new(),
            XPoly::var(d, 0),
        );
        assert_eq!(chi(&PolyJet::hat_r(&f, &a), 3), chain_action(&f, &b));
    }

    #[test]
    fn action_respects_the_gerstenhaber_bracket() {
        let d = 2;
        let a = PolyJet::flat(&sample_chain(d));
        let p1 = PolyDiffOp::mult_op(VarKind::Chart, d);
        let p2 = PolyDiffOp::term(
            VarKind::Chart,
            d,
            Mono::zero(d),
            IdxSet::empty(),
            vec![Mono(vec![1, 1])],
            XPoly::var(d, 1),
        );
        // |p1| = 1, |p2| = 0: hat_R_{[p1,p2]} = hat_R_{p1} hat_R_{p2} - hat_R_{p2} hat_R_{p1}
        let lhs = PolyJet::hat_r(&gerstenhaber(&p1, &p2), &a);
        let rhs = PolyJet::sum(vec![
            (rint(1), PolyJet::hat_r(&p1, &PolyJet::hat_r(&p2, &a))),
            (rint(-1), PolyJet::hat_r(&p2, &PolyJet::hat_r(&p1, &a))),
        ]);
        assert!(jets_agree(&lhs, &rhs, 2));
    }

    #[test]
    fn action_preserves_flat_jets() {
        let d = 2;
        let b = sample_chain(d);
        let a = PolyJet::flat(&b);
        let g01 = PolyJet::groth(0, &PolyJet::groth(1, &a));
        let g10 = PolyJet::groth(1, &PolyJet::groth(0, &a));
        assert!(jets_agree(&g01, &g10, 2));
        // the differential of a flat jet is the flat jet of the boundary
        assert!(jets_agree(&PolyJet::hat_b(&a), &PolyJet::flat(&chain_diff(&b)), 3));
        for i in 0..d {
            assert!(jet_is_zero(&PolyJet::groth(i, &PolyJet::hat_b(&a)), 2));
        }
        // an external wrapper is transparent
        let w = PolyJet::external(d, a.degree(), {
            let a = a.clone();
            move |t| a.eval(t)
        });
        assert!(jets_agree(&w, &a, 2));
    }
}
