//! Exterior forms: fiberwise dx-forms with dy-form coefficients (fiber mode)
//! or chart forms (chart mode). A term is c(x) * y^ydeg * dy^dyset * dx^dxset
//! with both odd blocks ascending, dy before dx.

use crate::graded::VarKind;
use crate::poly::{IdxSet, Mono, XPoly};
use crate::pvf::PolyVecField;
use crate::ratio::Rat;
use num_traits::Zero;
use std::collections::BTreeMap;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct FormKey {
    pub ydeg: Mono,
    pub dyset: IdxSet,
    pub dxset: IdxSet,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExtForm {
    pub var: VarKind,
    pub d: usize,
    pub terms: BTreeMap<FormKey, XPoly>,
}

impl ExtForm {
    pub fn zero(var: VarKind, d: usize) -> Self {
        ExtForm { var, d, terms: BTreeMap::new() }
    }

    pub fn term(var: VarKind, d: usize, ydeg: Mono, dyset: IdxSet, dxset: IdxSet, c: XPoly) -> Self {
        let mut f = ExtForm::zero(var, d);
        f.insert(FormKey { ydeg, dyset, dxset }, c);
        f
    }

    pub fn function(var: VarKind, d: usize, ydeg: Mono, c: XPoly) -> Self {
        ExtForm::term(var, d, ydeg, IdxSet::empty(), IdxSet::empty(), c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn insert(&mut self, key: FormKey, c: XPoly) {
        if c.is_zero() {
            return;
        }
        debug_assert!(self.var == VarKind::Fiber || (key.ydeg.is_zero() && key.dyset.is_empty()));
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                e.get_mut().add_assign(&c);
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &ExtForm) {
        for (k, c) in &other.terms {
            self.insert(k.clone(), c.clone());
        }
    }

    pub fn add(&self, other: &ExtForm) -> Self {
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn sub(&self, other: &ExtForm) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return ExtForm::zero(self.var, self.d);
        }
        ExtForm {
            var: self.var,
            d: self.d,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v.scale(c))).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rat::from_integer(1.into()))
    }

    pub fn max_y_stratum(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.ydeg.total()).max()
    }

    pub fn truncate_y(&self, cap: u32) -> Self {
        ExtForm {
            var: self.var,
            d: self.d,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.ydeg.total() <= cap)
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn y_stratum(&self, p: u32) -> Self {
        ExtForm {
            var: self.var,
            d: self.d,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.ydeg.total() == p)
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect(),
        }
    }
}

/// Wedge product: dy and dx letters all anticommute, blocks merge with the
/// cross sign for the second dy block passing the first dx block.
pub fn wedge(a: &ExtForm, b: &ExtForm) -> ExtForm {
    assert_eq!(a.var, b.var);
    let mut out = ExtForm::zero(a.var, a.d);
    for (ka, ca) in &a.terms {
        for (kb, cb) in &b.terms {
            let Some((dyset, s1)) = ka.dyset.wedge(kb.dyset) else { continue };
            let Some((dxset, s2)) = ka.dxset.wedge(kb.dxset) else { continue };
            let cross = (kb.dyset.len() * ka.dxset.len()) % 2 == 1;
            let mut c = ca.mul(cb);
            if s1 ^ s2 ^ cross {
                c = c.neg();
            }
            out.insert(FormKey { ydeg: ka.ydeg.add(&kb.ydeg), dyset, dxset }, c);
        }
    }
    out
}

/// Exterior differential in dx: fiber mode dx^i d/dy^i, chart mode dx^i d/dx^i.
pub fn d(a: &ExtForm) -> ExtForm {
    let dim = a.d;
    let mut out = ExtForm::zero(a.var, dim);
    for (k, c) in &a.terms {
        for i in 0..dim {
            let piece = match a.var {
                VarKind::Fiber => {
                    if k.ydeg.0[i] == 0 {
                        continue;
                    }
                    let mut m = k.ydeg.clone();
                    m.0[i] -= 1;
                    (m, c.scale(&Rat::from_integer((k.ydeg.0[i] as i64).into())))
                }
                VarKind::Chart => {
                    let dc = c.deriv(i);
                    if dc.is_zero() {
                        continue;
                    }
                    (k.ydeg.clone(), dc)
                }
            };
            let Some((dxset, s)) = k.dxset.wedge_var(i) else { continue };
            // the new dx^i walks in from the left, past the dy block
            let neg = s ^ (k.dyset.len() % 2 == 1);
            out.insert(
                FormKey { ydeg: piece.0, dyset: k.dyset, dxset },
                if neg { piece.1.neg() } else { piece.1 },
            );
        }
    }
    out
}

// i_{d/dv^j}: odd left contraction of one dx letter, passing the dy block.
fn contract_one(a: &ExtForm, j: usize) -> ExtForm {
    let mut out = ExtForm::zero(a.var, a.d);
    for (k, c) in &a.terms {
        let Some((dxset, s)) = k.dxset.remove_with_sign(j) else { continue };
        let neg = s ^ (k.dyset.len() % 2 == 1);
        out.insert(
            FormKey { ydeg: k.ydeg.clone(), dyset: k.dyset, dxset },
            if neg { c.neg() } else { c.clone() },
        );
    }
    out
}

/// Contraction i_g of a polyvector into a form: wedge factors are peeled
/// first factor innermost, so i_{u ^ v} = i_v i_u. The polyvector's dy block
/// multiplies from the left; its payload multiplies into the coefficient.
pub fn contract(g: &PolyVecField, a: &ExtForm) -> ExtForm {
    assert_eq!(g.var, a.var);
    let dim = a.d;
    let mut out = ExtForm::zero(a.var, dim);
    for (kg, cg) in &g.terms {
        let mut cur = a.clone();
        for j in kg.vslots.iter() {
            cur = contract_one(&cur, j);
            if cur.is_zero() {
                break;
            }
        }
        for (k, c) in &cur.terms {
            let Some((dyset, s)) = kg.dyset.wedge(k.dyset) else { continue };
            let mut cc = c.mul(cg);
            if s {
                cc = cc.neg();
            }
            out.insert(
                FormKey { ydeg: k.ydeg.add(&kg.ydeg), dyset, dxset: k.dxset },
                cc,
            );
        }
    }
    out
}

/// Lie derivative of a dy-free polyvector on forms:
/// L_g = d i_g + (-1)^k i_g d with k the shifted degree of g.
pub fn lie_derivative(g: &PolyVecField, a: &ExtForm) -> ExtForm {
    assert!(g.terms.keys().all(|k| k.dyset.is_empty()), "Lie derivative takes dy-free polyvectors");
    let mut out = ExtForm::zero(a.var, a.d);
    for (kg, cg) in &g.terms {
        let k = kg.vslots.len() as i64 - 1;
        let mut gterm = PolyVecField::zero(g.var, g.d);
        gterm.insert(kg.clone(), cg.clone());
        let t1 = d(&contract(&gterm, a));
        let t2 = contract(&gterm, &d(a));
        out.add_assign(&t1);
        out.add_assign(&if k % 2 != 0 { t2.neg() } else { t2 });
    }
    out
}

/// Transport along the linear chart map x~ = L x; dx transforms like dy.
/// Only the inverse matrix enters: coefficients, y and both form blocks all
/// pull back through it.
pub fn linear_transport(a: &ExtForm, _l: &[Vec<Rat>], linv: &[Vec<Rat>]) -> ExtForm {
    let dim = a.d;
    let mut out = ExtForm::zero(a.var, dim);
    for (k, c) in &a.terms {
        let c2 = c.linear_subst(linv);
        for (my, cy) in crate::pvf::expand_even(&k.ydeg, linv, dim) {
            for (sdy, cdy) in crate::pvf::expand_odd(k.dyset, linv, dim, true) {
                for (sdx, cdx) in crate::pvf::expand_odd(k.dxset, linv, dim, true) {
                    out.insert(
                        FormKey { ydeg: my.clone(), dyset: sdy, dxset: sdx },
                        c2.scale(&(cy.clone() * &cdy * &cdx)),
                    );
                }
            }
        }
    }
    out
}
