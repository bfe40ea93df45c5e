//! Polyvector fields with odd-form coefficients: wedge algebra and the
//! Schouten bracket, in fiber mode (slots on y, polynomial coefficients in x
//! passive) or chart mode (slots on x).
//!
//! A term is coeff(x) * y^ydeg * dy^dyset * (d/dv)^vslots where v = y or x
//! according to the mode. Odd letters are stored ascending, dy block first,
//! wedge block second; signs from reordering are absorbed into coefficients.

use crate::graded::VarKind;
use crate::poly::{IdxSet, Mono, XPoly};
use crate::ratio::Rat;
use num_traits::Zero;
use std::collections::BTreeMap;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PvfKey {
    pub ydeg: Mono,
    pub dyset: IdxSet,
    pub vslots: IdxSet,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PolyVecField {
    pub var: VarKind,
    pub d: usize,
    pub terms: BTreeMap<PvfKey, XPoly>,
}

impl PolyVecField {
    pub fn zero(var: VarKind, d: usize) -> Self {
        PolyVecField { var, d, terms: BTreeMap::new() }
    }

    /// A single term; chart mode forbids y and dy payloads.
    pub fn term(var: VarKind, d: usize, ydeg: Mono, dyset: IdxSet, vslots: IdxSet, c: XPoly) -> Self {
        let mut v = PolyVecField::zero(var, d);
        v.insert(PvfKey { ydeg, dyset, vslots }, c);
        v
    }

    /// Coordinate vector field d/dv^i.
    pub fn coord_vf(var: VarKind, d: usize, i: usize) -> Self {
        PolyVecField::term(var, d, Mono::zero(d), IdxSet::empty(), IdxSet::from_iter([i]), XPoly::one(d))
    }

    /// A function viewed as a polyvector of degree -1 (fiber mode: h(x) * y^m).
    pub fn function(var: VarKind, d: usize, ydeg: Mono, c: XPoly) -> Self {
        PolyVecField::term(var, d, ydeg, IdxSet::empty(), IdxSet::empty(), c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn insert(&mut self, key: PvfKey, c: XPoly) {
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

    pub fn add_assign(&mut self, other: &PolyVecField) {
        for (k, c) in &other.terms {
            self.insert(k.clone(), c.clone());
        }
    }

    pub fn add(&self, other: &PolyVecField) -> Self {
        let mut r = self.clone();
        r.add_assign(other);
        r
    }

    pub fn sub(&self, other: &PolyVecField) -> Self {
        self.add(&other.scale(&-Rat::from_integer(1.into())))
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return PolyVecField::zero(self.var, self.d);
        }
        PolyVecField {
            var: self.var,
            d: self.d,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v.scale(c))).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rat::from_integer(1.into()))
    }

    /// Fiber stratum of a term: total y-degree (dy not counted).
    pub fn max_y_stratum(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.ydeg.total()).max()
    }

    pub fn truncate_y(&self, cap: u32) -> Self {
        PolyVecField {
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

    /// Keep only terms of exact y-stratum p.
    pub fn y_stratum(&self, p: u32) -> Self {
        PolyVecField {
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

    /// Internal (shifted) degree if homogeneous: #wedge factors - 1.
    pub fn internal_degree(&self) -> Option<i64> {
        let mut it = self.terms.keys().map(|k| k.vslots.len() as i64 - 1);
        let first = it.next()?;
        it.all(|x| x == first).then_some(first)
    }
}

/// Wedge product. All odd letters (dy and wedge slots) anticommute; the sign
/// for moving the second factor's dy block past the first factor's slots uses
/// the unshifted slot count, which keeps the product associative.
pub fn wedge(a: &PolyVecField, b: &PolyVecField) -> PolyVecField {
    assert_eq!(a.var, b.var);
    let mut out = PolyVecField::zero(a.var, a.d);
    for (ka, ca) in &a.terms {
        for (kb, cb) in &b.terms {
            let Some((dyset, s1)) = ka.dyset.wedge(kb.dyset) else { continue };
            let Some((vslots, s2)) = ka.vslots.wedge(kb.vslots) else { continue };
            let cross = (kb.dyset.len() * ka.vslots.len()) % 2 == 1;
            let mut c = ca.mul(cb);
            if s1 ^ s2 ^ cross {
                c = c.neg();
            }
            out.insert(PvfKey { ydeg: ka.ydeg.add(&kb.ydeg), dyset, vslots }, c);
        }
    }
    out
}

// Right derivative by the odd slot i: sign counts letters to its right.
fn right_theta_deriv(slots: IdxSet, i: usize) -> Option<(IdxSet, bool)> {
    if !slots.contains(i) {
        return None;
    }
    let above = (slots.0 >> (i + 1)).count_ones();
    Some((IdxSet(slots.0 & !(1 << i)), above % 2 == 1))
}

// d/dv_i of the even payload: fiber mode differentiates y^m, chart mode the
// x-polynomial. Returns the resulting (ydeg, coeff) pieces.
fn even_deriv(var: VarKind, ydeg: &Mono, c: &XPoly, i: usize) -> Option<(Mono, XPoly)> {
    match var {
        VarKind::Fiber => {
            if ydeg.0[i] == 0 {
                return None;
            }
            let mut m = ydeg.clone();
            m.0[i] -= 1;
            Some((m, c.scale(&Rat::from_integer((ydeg.0[i] as i64).into()))))
        }
        VarKind::Chart => {
            let dc = c.deriv(i);
            if dc.is_zero() {
                None
            } else {
                Some((ydeg.clone(), dc))
            }
        }
    }
}

/// Schouten bracket extended to dy-form coefficients: for terms w1*F, w2*G
/// with dy-free parts F, G the result is (-1)^{|w2| k1} w1 w2 [F, G] where
/// k1 is the shifted degree of F, matching antisymmetry and Jacobi in the
/// total (form + shifted) grading.
pub fn schouten(a: &PolyVecField, b: &PolyVecField) -> PolyVecField {
    assert_eq!(a.var, b.var);
    let d = a.d;
    let mut out = PolyVecField::zero(a.var, d);
    for (ka, ca) in &a.terms {
        for (kb, cb) in &b.terms {
            let p1 = ka.vslots.len() as i64;
            let p2 = kb.vslots.len() as i64;
            let k1 = p1 - 1;
            let k2 = p2 - 1;
            let Some((dyset, sdy)) = ka.dyset.wedge(kb.dyset) else { continue };
            // (-1)^{|w2| k1} from moving the second dy block past F
            let ext = (kb.dyset.len() as i64 * k1) % 2 != 0;
            let base_neg = sdy ^ ext;

            // sum_i (F d/dtheta_i from the right) * (d/dv_i G)
            for i in 0..d {
                if let Some((ta, sa)) = right_theta_deriv(ka.vslots, i) {
                    if let Some((mg, cg)) = even_deriv(b.var, &kb.ydeg, cb, i) {
                        if let Some((vslots, sw)) = ta.wedge(kb.vslots) {
                            let mut c = ca.mul(&cg);
                            if sa ^ sw ^ base_neg {
                                c = c.neg();
                            }
                            out.insert(
                                PvfKey { ydeg: ka.ydeg.add(&mg), dyset, vslots },
                                c,
                            );
                        }
                    }
                }
                // - (-1)^{k1 k2} sum_i (G d/dtheta_i) * (d/dv_i F)
                if let Some((tb, sb)) = right_theta_deriv(kb.vslots, i) {
                    if let Some((mf, cf)) = even_deriv(a.var, &ka.ydeg, ca, i) {
                        if let Some((vslots, sw)) = tb.wedge(ka.vslots) {
                            let flip = (k1 * k2) % 2 != 0;
                            let mut c = cb.mul(&cf);
                            if !(sb ^ sw ^ base_neg ^ flip) {
                                c = c.neg();
                            }
                            out.insert(
                                PvfKey { ydeg: kb.ydeg.add(&mf), dyset, vslots },
                                c,
                            );
                        }
                    }
                }
            }
        }
    }
    out
}

/// Transport along the linear chart map x~ = L x (fiber coordinates move the
/// same way): substitutes coefficients, expands dy and wedge blocks by the
/// appropriate minors. `l` is L, `linv` its inverse.
pub fn linear_transport(v: &PolyVecField, l: &[Vec<Rat>], linv: &[Vec<Rat>]) -> PolyVecField {
    let d = v.d;
    let mut out = PolyVecField::zero(v.var, d);
    for (k, c) in &v.terms {
        // coefficient: f(x) = f(L^{-1} x~)
        let c2 = c.linear_subst(linv);
        // y^m = prod (L^{-1} y~)^{m_i}
        for (my, cy) in expand_even(&k.ydeg, linv, d) {
            // dy^S = sum minors(L^{-1}) dy~^S'
            for (sdy, cdy) in expand_odd(k.dyset, linv, d, true) {
                // d/dv^T = sum minors(L^T) d/dv~^T'
                for (svs, cvs) in expand_odd(k.vslots, l, d, false) {
                    let coeff = c2.scale(&(cy.clone() * &cdy * &cvs));
                    out.insert(PvfKey { ydeg: my.clone(), dyset: sdy, vslots: svs }, coeff);
                }
            }
        }
    }
    out
}

/// y^m rewritten in transported coordinates: list of (monomial, coeff).
pub fn expand_even(m: &Mono, linv: &[Vec<Rat>], d: usize) -> Vec<(Mono, Rat)> {
    let as_poly = XPoly::monomial(d, m.clone(), Rat::from_integer(1.into()));
    as_poly.linear_subst(linv).terms.into_iter().collect()
}

/// Odd block rewritten in transported coordinates: minors of the matrix.
/// For a covariant block (dy, row = old index) use m = L^{-1} and
/// `cov = true`; for wedge slots (d/dv transforms with L^T) pass L.
pub fn expand_odd(s: IdxSet, mat: &[Vec<Rat>], d: usize, cov: bool) -> Vec<(IdxSet, Rat)> {
    let old: Vec<usize> = s.iter().collect();
    let q = old.len();
    if q == 0 {
        return vec![(IdxSet::empty(), Rat::from_integer(1.into()))];
    }
    let mut out = Vec::new();
    let mut pick: Vec<usize> = (0..q).collect();
    loop {
        // minor determinant over rows = old indices, cols = pick
        let mut det = Rat::zero();
        for perm in permutations(q) {
            let mut t = Rat::from_integer(1.into());
            for (r, &pc) in perm.iter().enumerate() {
                let (i, j) = if cov { (old[r], pick[pc]) } else { (pick[pc], old[r]) };
                t *= &mat[i][j];
            }
            if crate::graded::perm_parity(&perm) < 0 {
                t = -t;
            }
            det += t;
        }
        if !det.is_zero() {
            out.push((IdxSet::from_iter(pick.iter().copied()), det));
        }
        // next ascending q-subset of 0..d
        let mut i = q;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if pick[i] != i + d - q {
                break;
            }
        }
        if pick[i] == i + d - q {
            return out;
        }
        pick[i] += 1;
        for j in (i + 1)..q {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for tail in permutations(n - 1) {
        for pos in 0..n {
            let mut p: Vec<usize> = tail.iter().map(|&x| if x >= pos { x + 1 } else { x }).collect();
            p.insert(0, pos);
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::rint;

    fn vf(d: usize, i: usize) -> PolyVecField {
        PolyVecField::coord_vf(VarKind::Fiber, d, i)
    }

    fn yvf(d: usize, m: Mono, i: usize) -> PolyVecField {
        PolyVecField::term(VarKind::Fiber, d, m, IdxSet::empty(), IdxSet::from_iter([i]), XPoly::one(d))
    }

    #[test]
    fn bracket_of_coordinate_fields() {
        // [d/dy1, y1 d/dy2] = d/dy2
        let d = 2;
        let u = vf(d, 0);
        let v = yvf(d, Mono::unit(d, 0), 1);
        assert_eq!(schouten(&u, &v), vf(d, 1));
        // and with a function: [u, f] = u(f)
        let f = PolyVecField::function(VarKind::Fiber, d, Mono(vec![2, 0]), XPoly::one(d));
        let uf = schouten(&u, &f);
        let expect = PolyVecField::function(VarKind::Fiber, d, Mono::unit(d, 0), XPoly::constant(d, rint(2)));
        assert_eq!(uf, expect);
        // [f, u] = -u(f)
        assert_eq!(schouten(&f, &u), expect.neg());
    }

    #[test]
    fn wedge_is_associative_and_supercommutative() {
        let d = 3;
        let a = yvf(d, Mono::unit(d, 2), 0);
        let b = vf(d, 1);
        let c = PolyVecField::term(
            VarKind::Fiber,
            d,
            Mono::zero(d),
            IdxSet::from_iter([0]),
            IdxSet::from_iter([2]),
            XPoly::one(d),
        );
        let ab_c = wedge(&wedge(&a, &b), &c);
        let a_bc = wedge(&a, &wedge(&b, &c));
        assert_eq!(ab_c, a_bc);
        // two odd elements (vf with no dy): anticommute
        let ab = wedge(&a, &b);
        let ba = wedge(&b, &a);
        assert_eq!(ab, ba.neg());
    }

    #[test]
    fn leibniz_rule() {
        // [g1, g2 ^ g3] = [g1,g2] ^ g3 + (-1)^{k1(k2-1)} g2 ^ [g1,g3]
        let d = 3;
        let cases: Vec<(PolyVecField, PolyVecField, PolyVecField)> = vec![
            (
                yvf(d, Mono::unit(d, 1), 0),
                yvf(d, Mono::unit(d, 0), 1),
                yvf(d, Mono(vec![1, 1, 0]), 2),
            ),
            (
                wedge(&vf(d, 0), &yvf(d, Mono::unit(d, 2), 1)),
                yvf(d, Mono::unit(d, 0), 2),
                yvf(d, Mono::unit(d, 1), 0),
            ),
            (
                PolyVecField::function(VarKind::Fiber, d, Mono(vec![0, 2, 0]), XPoly::one(d)),
                wedge(&vf(d, 1), &vf(d, 2)),
                yvf(d, Mono::unit(d, 0), 0),
            ),
        ];
        for (g1, g2, g3) in cases {
            let k1 = g1.internal_degree().unwrap();
            let k2 = g2.internal_degree().unwrap();
            let lhs = schouten(&g1, &wedge(&g2, &g3));
            let mut rhs = wedge(&schouten(&g1, &g2), &g3);
            let t = wedge(&g2, &schouten(&g1, &g3));
            rhs.add_assign(&if (k1 * (k2 - 1)) % 2 != 0 { t.neg() } else { t });
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn graded_antisymmetry_and_jacobi() {
        let d = 2;
        let g1 = wedge(&yvf(d, Mono::unit(d, 0), 0), &vf(d, 1)); // bivector, k=1
        let g2 = yvf(d, Mono(vec![1, 1]), 1); // vector, k=0
        let g3 = PolyVecField::function(VarKind::Fiber, d, Mono(vec![2, 0]), XPoly::one(d)); // k=-1
        let triples = [(&g1, &g2), (&g1, &g3), (&g2, &g3), (&g1, &g1)];
        for (a, b) in triples {
            let k1 = a.internal_degree().unwrap();
            let k2 = b.internal_degree().unwrap();
            let ab = schouten(a, b);
            let ba = schouten(b, a);
            let flip = if (k1 * k2) % 2 != 0 { ba } else { ba.neg() };
            assert_eq!(ab, flip, "antisymmetry failed");
        }
        // graded Jacobi: [g1,[g2,g3]] = [[g1,g2],g3] + (-1)^{k1 k2}[g2,[g1,g3]]
        let k1 = g1.internal_degree().unwrap();
        let k2 = g2.internal_degree().unwrap();
        let lhs = schouten(&g1, &schouten(&g2, &g3));
        let mut rhs = schouten(&schouten(&g1, &g2), &g3);
        let t = schouten(&g2, &schouten(&g1, &g3));
        rhs.add_assign(&if (k1 * k2) % 2 != 0 { t.neg() } else { t });
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn transport_respects_bracket() {
        // linear map L, check f_*[a,b] = [f_*a, f_*b]
        let d = 2;
        let l = vec![vec![rint(1), rint(2)], vec![rint(0), rint(1)]];
        let linv = vec![vec![rint(1), rint(-2)], vec![rint(0), rint(1)]];
        let a = wedge(&yvf(d, Mono::unit(d, 0), 0), &vf(d, 1));
        let mut b = yvf(d, Mono(vec![0, 2]), 0);
        b.insert(
            PvfKey { ydeg: Mono::zero(d), dyset: IdxSet::from_iter([1]), vslots: IdxSet::from_iter([0]) },
            XPoly::var(d, 0),
        );
        let lhs = linear_transport(&schouten(&a, &b), &l, &linv);
        let rhs = schouten(&linear_transport(&a, &l, &linv), &linear_transport(&b, &l, &linv));
        assert_eq!(lhs, rhs);
    }
}
