//! Morphisms from a truncated structured space into the operator-valued
//! forms of a built resolution, and the contraction of such a morphism back
//! to fiberwise flat data.
//!
//! The target is a differential graded Lie algebra: an operator term of
//! exterior degree e with k slots has suspended degree e + k - 2, the
//! differential is the resolution differential plus the Hochschild action of
//! the flat multiplication, and the bracket is the insertion bracket with
//! the suspension sign on the left factor. A morphism into it is flat when
//! its tables carry no exterior degree; `contract_to_flat` reaches that
//! state one arity at a time by peeling top exterior strata with the
//! resolution homotopy.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::diffop::{self, OpKey, PolyDiffOp};
use crate::fedosov::{fedosov_d, lambda_d, phi, Carrier, FedosovData};
use crate::graded::VarKind;
use crate::linfty::{mask_split, perm_sign, word_name, word_sigma, word_sort, LinftySpace, Word};
use crate::ratio::Rat;

fn term_sigma(k: &OpKey) -> i64 {
    k.dyset.len() as i64 + k.oslots.len() as i64 - 2
}

/// Insertion bracket with the suspension sign on the left factor, applied
/// term by term: left terms of odd suspended degree flip.
fn suspended_bracket(a: &PolyDiffOp, b: &PolyDiffOp) -> PolyDiffOp {
    let mut even = PolyDiffOp::zero(a.var, a.d);
    let mut odd = PolyDiffOp::zero(a.var, a.d);
    for (k, c) in &a.terms {
        if term_sigma(k).rem_euclid(2) == 1 {
            odd.insert(k.clone(), c.clone());
        } else {
            even.insert(k.clone(), c.clone());
        }
    }
    let mut out = diffop::gerstenhaber(&even, b);
    out = out.sub(&diffop::gerstenhaber(&odd, b));
    out
}

/// Arity tables of a morphism into the operator-valued forms, keyed by
/// sorted source words. The flat multiplication is resolved once at
/// construction and drives the Hochschild half of the target differential.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaMorphism {
    pub source: LinftySpace,
    pub fd: FedosovData,
    mu: PolyDiffOp,
    maps: Vec<BTreeMap<Word, PolyDiffOp>>,
}

impl OmegaMorphism {
    /// Empty tables over a built resolution; the flat multiplication is the
    /// flat lift of the chart product.
    pub fn new(source: LinftySpace, fd: FedosovData) -> OmegaMorphism {
        let d = fd.ctx.d;
        let mu = lambda_d(&fd, &PolyDiffOp::mult_op(VarKind::Chart, d));
        let maps = vec![BTreeMap::new(); source.n_ar];
        OmegaMorphism { source, fd, mu, maps }
    }

    pub fn mu(&self) -> &PolyDiffOp {
        &self.mu
    }

    pub fn arity(&self) -> usize {
        self.maps.len()
    }

    /// The target differential: resolution differential plus the bracket
    /// with the flat multiplication.
    pub fn differential(&self, p: &PolyDiffOp) -> PolyDiffOp {
        let de = match fedosov_d(&self.fd, &Carrier::Op(p.clone())) {
            Carrier::Op(q) => q,
            _ => unreachable!(),
        };
        de.add(&diffop::gerstenhaber(&self.mu, p))
    }

    pub fn set_map(&mut self, word: &[usize], value: &PolyDiffOp) -> Result<(), String> {
        let n = word.len();
        if n == 0 || n > self.maps.len() {
            return Err(format!("arity {n} outside 1..={}", self.maps.len()));
        }
        if value.var != VarKind::Fiber || value.d != self.fd.ctx.d {
            return Err("value lives on the wrong chart".into());
        }
        let odd = self.source.odd();
        let (sw, neg) = match word_sort(&odd, word) {
            Some(x) => x,
            None => {
                if value.is_zero() {
                    return Ok(());
                }
                return Err("word with a repeated odd letter vanishes".into());
            }
        };
        let want = word_sigma(&self.source.basis, &sw);
        for k in value.terms.keys() {
            if term_sigma(k) != want {
                return Err(format!(
                    "degree mismatch: every term of the value on {} must have exterior degree plus slot count {}",
                    word_name(&self.source.basis, &sw),
                    want + 2
                ));
            }
        }
        let val = if neg { value.neg() } else { value.clone() };
        if val.is_zero() {
            self.maps[n - 1].remove(&sw);
        } else {
            self.maps[n - 1].insert(sw, val);
        }
        Ok(())
    }

    pub fn eval_map(&self, word: &[usize]) -> PolyDiffOp {
        let zero = PolyDiffOp::zero(VarKind::Fiber, self.fd.ctx.d);
        let n = word.len();
        if n == 0 || n > self.maps.len() {
            return zero;
        }
        let odd = self.source.odd();
        match word_sort(&odd, word) {
            None => zero,
            Some((sw, neg)) => match self.maps[n - 1].get(&sw) {
                None => zero,
                Some(p) => {
                    if neg {
                        p.neg()
                    } else {
                        p.clone()
                    }
                }
            },
        }
    }
}

/// Defect of the morphism relation at one source word: the source tables
/// fed through the maps, minus the target differential of the image and the
/// bracket over the two-block splittings.
fn relation_defect(om: &OmegaMorphism, w: &Word) -> PolyDiffOp {
    let d = om.fd.ctx.d;
    let odd = om.source.odd();
    let n = w.len();
    let half = Rat::new(BigInt::from(1), BigInt::from(2));
    let mut r = PolyDiffOp::zero(VarKind::Fiber, d);
    for mask in 1..(1usize << n) {
        let (i_pos, j_pos) = mask_split(n, mask);
        let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
        let neg = perm_sign(&odd, w, &perm);
        let wi: Word = i_pos.iter().map(|&p| w[p]).collect();
        let inner = om.source.eval_q(&wi);
        if inner.iter().any(|c| !c.is_zero()) {
            for (b, vb) in inner.iter().enumerate() {
                if vb.is_zero() {
                    continue;
                }
                let mut ww = vec![b];
                ww.extend(j_pos.iter().map(|&p| w[p]));
                let img = om.eval_map(&ww);
                if img.is_zero() {
                    continue;
                }
                let c = if neg { -vb.clone() } else { vb.clone() };
                r = r.add(&img.scale(&c));
            }
        }
        if !j_pos.is_empty() {
            let wj: Word = j_pos.iter().map(|&p| w[p]).collect();
            let pi = om.eval_map(&wi);
            let pj = om.eval_map(&wj);
            if !pi.is_zero() && !pj.is_zero() {
                let br = suspended_bracket(&pi, &pj);
                let c = if neg { -half.clone() } else { half.clone() };
                r = r.sub(&br.scale(&c));
            }
        }
    }
    r.sub(&om.differential(&om.eval_map(w)))
}

/// Source words at which the morphism relations fail, as (arity, word)
/// labels; empty means the tables form a morphism up to the arity cap.
pub fn omega_residuals(om: &OmegaMorphism) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for n in 1..=om.source.n_ar {
        for w in om.source.words(n) {
            if !relation_defect(om, &w).is_zero() {
                out.push((n, word_name(&om.source.basis, &w)));
            }
        }
    }
    out
}

/// Deforms a morphism along a homotopy prescribed at one arity, mirroring
/// the coalgebra recursion of the finite-dimensional case: the table at
/// that arity shifts by the target differential of the homotopy plus the
/// homotopy composed with the source tables, and the next table picks up
/// the induced two-letter corrections. Reconstruction is implemented
/// through arity two, which the contraction below needs.
pub fn omega_partial_homotopy(
    om: &OmegaMorphism,
    h: &BTreeMap<Word, PolyDiffOp>,
    m: usize,
) -> Result<OmegaMorphism, String> {
    let nar = om.source.n_ar;
    if m == 0 || m > nar {
        return Err(format!("homotopy arity {m} outside 1..={nar}"));
    }
    if nar > 2 {
        return Err("homotopy reconstruction implemented through arity two".into());
    }
    let d = om.fd.ctx.d;
    let odd = om.source.odd();

    let mut htab: BTreeMap<Word, PolyDiffOp> = BTreeMap::new();
    for (w, p) in h {
        if w.len() != m {
            return Err(format!("homotopy word {:?} does not have arity {m}", w));
        }
        if p.var != VarKind::Fiber || p.d != d {
            return Err("homotopy value lives on the wrong chart".into());
        }
        let (sw, neg) = match word_sort(&odd, w) {
            Some(x) => x,
            None => {
                if p.is_zero() {
                    continue;
                }
                return Err("homotopy word with a repeated odd letter vanishes".into());
            }
        };
        let want = word_sigma(&om.source.basis, &sw) - 1;
        for k in p.terms.keys() {
            if term_sigma(k) != want {
                return Err(format!(
                    "degree mismatch: homotopy value on {} must have suspended degree {want}",
                    word_name(&om.source.basis, &sw)
                ));
            }
        }
        let val = if neg { p.neg() } else { p.clone() };
        let e = htab.entry(sw).or_insert_with(|| PolyDiffOp::zero(VarKind::Fiber, d));
        *e = e.add(&val);
    }

    let h_of = |w: &[usize]| -> PolyDiffOp {
        let zero = PolyDiffOp::zero(VarKind::Fiber, d);
        match word_sort(&odd, w) {
            None => zero,
            Some((sw, neg)) => match htab.get(&sw) {
                None => zero,
                Some(p) => {
                    if neg {
                        p.neg()
                    } else {
                        p.clone()
                    }
                }
            },
        }
    };
    // the homotopy riding on the one-letter source table
    let h_q1 = |b: usize| -> PolyDiffOp {
        let mut out = PolyDiffOp::zero(VarKind::Fiber, d);
        for (c, vc) in om.source.eval_q(&[b]).iter().enumerate() {
            if !vc.is_zero() {
                out = out.add(&h_of(&[c]).scale(vc));
            }
        }
        out
    };
    let put = |tab: &mut BTreeMap<Word, PolyDiffOp>, w: Word, p: PolyDiffOp| {
        if p.is_zero() {
            tab.remove(&w);
        } else {
            tab.insert(w, p);
        }
    };

    let mut out = om.clone();
    if m == 1 {
        for b in 0..om.source.basis.dim() {
            let hb = h_of(&[b]);
            let mut val = om.eval_map(&[b]);
            val = val.add(&om.differential(&hb));
            val = val.add(&h_q1(b));
            put(&mut out.maps[0], vec![b], val);
        }
        if nar == 2 {
            let half = Rat::new(BigInt::from(1), BigInt::from(2));
            let quarter = &half * &half;
            for w in om.source.words(2) {
                let mut val = om.eval_map(&w);
                // two-letter corrections: every split of the word feeds six
                // left/right pairs into the target bracket, each carrying
                // the Koszul sign of the split, the crossing sign of the
                // odd homotopy, and the halving from the length-two merge
                for mask in 1..3usize {
                    let (i_pos, j_pos) = mask_split(2, mask);
                    let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
                    let neg = perm_sign(&odd, &w, &perm);
                    let wi = [w[i_pos[0]]];
                    let wj = [w[j_pos[0]]];
                    let s = if neg { -Rat::from(BigInt::from(1)) } else { Rat::from(BigInt::from(1)) };
                    let si = if word_sigma(&om.source.basis, &wi).rem_euclid(2) == 1 {
                        -s.clone()
                    } else {
                        s.clone()
                    };
                    let f_i = om.eval_map(&wi);
                    let f_j = om.eval_map(&wj);
                    let h_i = h_of(&wi);
                    let h_j = h_of(&wj);
                    let qh_i = om.differential(&h_i);
                    let qh_j = om.differential(&h_j);
                    let hq_i = h_q1(wi[0]);
                    let hq_j = h_q1(wj[0]);
                    let pairs: [(Rat, &PolyDiffOp, &PolyDiffOp); 6] = [
                        (&si * &half, &f_i, &h_j),
                        (&s * &half, &h_i, &f_j),
                        (&s * &quarter, &h_i, &qh_j),
                        (&si * &quarter, &qh_i, &h_j),
                        (&si * &quarter, &hq_i, &h_j),
                        (&s * &quarter, &h_i, &hq_j),
                    ];
                    for (c, left, right) in pairs {
                        if c.is_zero() || left.is_zero() || right.is_zero() {
                            continue;
                        }
                        val = val.add(&suspended_bracket(left, right).scale(&c));
                    }
                }
                for (c, vc) in om.source.eval_q(&w).iter().enumerate() {
                    if !vc.is_zero() {
                        val = val.add(&h_of(&[c]).scale(vc));
                    }
                }
                put(&mut out.maps[1], w, val);
            }
        }
    } else {
        for w in om.source.words(2) {
            let mut val = om.eval_map(&w);
            val = val.add(&om.differential(&h_of(&w)));
            for mask in 1..3usize {
                let (i_pos, j_pos) = mask_split(2, mask);
                let perm: Vec<usize> = i_pos.iter().chain(&j_pos).copied().collect();
                let neg = perm_sign(&odd, &w, &perm);
                for (c, vc) in om.source.eval_q(&[w[i_pos[0]]]).iter().enumerate() {
                    if vc.is_zero() {
                        continue;
                    }
                    let hv = h_of(&[c, w[j_pos[0]]]);
                    if hv.is_zero() {
                        continue;
                    }
                    let coeff = if neg { -vc.clone() } else { vc.clone() };
                    val = val.add(&hv.scale(&coeff));
                }
            }
            put(&mut out.maps[1], w, val);
        }
    }
    Ok(out)
}

/// Contracts the arity-n table to exterior degree zero. The relations must
/// hold and every lower arity must already be flat; each pass peels the top
/// exterior stratum with the resolution homotopy, so the loop ends after at
/// most the chart dimension many passes.
pub fn contract_to_flat(om: &OmegaMorphism, n: usize) -> Result<OmegaMorphism, String> {
    let nar = om.source.n_ar;
    if n == 0 || n > nar {
        return Err(format!("contraction arity {n} outside 1..={nar}"));
    }
    if nar > 2 {
        return Err("contraction implemented through arity two".into());
    }
    let res = omega_residuals(om);
    if let Some((a, w)) = res.first() {
        return Err(format!("morphism relations fail at arity {a} on {w}"));
    }
    for k in 1..n {
        let stuck = om.maps[k - 1]
            .values()
            .any(|p| p.terms.keys().any(|key| !key.dyset.is_empty()));
        if stuck {
            return Err(format!("the arity-{k} table is not flat yet"));
        }
    }
    let mut cur = om.clone();
    for _ in 0..=om.fd.ctx.d {
        let top = cur.maps[n - 1]
            .values()
            .flat_map(|p| p.terms.keys().map(|k| k.dyset.len()))
            .max()
            .unwrap_or(0);
        if top == 0 {
            return Ok(cur);
        }
        let mut h: BTreeMap<Word, PolyDiffOp> = BTreeMap::new();
        for (w, p) in &cur.maps[n - 1] {
            let mut proj = PolyDiffOp::zero(p.var, p.d);
            for (k, c) in &p.terms {
                if k.dyset.len() == top {
                    proj.insert(k.clone(), c.clone());
                }
            }
            if proj.is_zero() {
                continue;
            }
            let lifted = match phi(&cur.fd, &Carrier::Op(proj)) {
                Carrier::Op(q) => q,
                _ => unreachable!(),
            };
            h.insert(w.clone(), lifted.neg());
        }
        cur = omega_partial_homotopy(&cur, &h, n)?;
    }
    Err("the exterior degree did not drop during contraction".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedosov::build_a;
    use crate::fedosov::ConnectionData;
    use crate::graded::TruncationContext;
    use crate::linfty::GradedBasis;
    use crate::poly::{IdxSet, Mono, XPoly};
    use crate::ratio::rint;

    fn flat_resolution() -> FedosovData {
        let ctx = TruncationContext::new(2, 4, 2, 4).unwrap();
        build_a(&ConnectionData::zero(2), &ctx)
    }

    fn deriv_op(i: usize) -> PolyDiffOp {
        PolyDiffOp::tuple_op(VarKind::Fiber, 2, vec![Mono::unit(2, i)])
    }

    fn coord_op(i: usize) -> PolyDiffOp {
        PolyDiffOp::term(VarKind::Fiber, 2, Mono::unit(2, i), IdxSet::empty(), vec![], XPoly::one(2))
    }

    fn dy_op(i: usize) -> PolyDiffOp {
        PolyDiffOp::term(
            VarKind::Fiber,
            2,
            Mono::zero(2),
            IdxSet::from_iter([i]),
            vec![],
            XPoly::one(2),
        )
    }

    /// Two degree-zero letters mapped to the coordinate derivations.
    fn strict_vectors() -> OmegaMorphism {
        let basis = GradedBasis::new(&[("g0", 0, 1), ("g1", 0, 1)]).unwrap();
        let mut om = OmegaMorphism::new(LinftySpace::zero(basis, 2), flat_resolution());
        om.set_map(&[0], &deriv_op(0)).unwrap();
        om.set_map(&[1], &deriv_op(1)).unwrap();
        om
    }

    fn bivector_op() -> PolyDiffOp {
        let e0 = Mono::unit(2, 0);
        let e1 = Mono::unit(2, 1);
        PolyDiffOp::tuple_op(VarKind::Fiber, 2, vec![e0.clone(), e1.clone()])
            .sub(&PolyDiffOp::tuple_op(VarKind::Fiber, 2, vec![e1, e0]))
    }

    fn weight_two_op() -> PolyDiffOp {
        let e0 = Mono::unit(2, 0);
        let e1 = Mono::unit(2, 1);
        let ee0 = e0.add(&e0);
        let ee1 = e1.add(&e1);
        let mixed = e0.add(&e1);
        PolyDiffOp::tuple_op(VarKind::Fiber, 2, vec![ee0.clone(), ee1.clone()])
            .add(&PolyDiffOp::tuple_op(VarKind::Fiber, 2, vec![ee1, ee0]))
            .sub(&PolyDiffOp::tuple_op(VarKind::Fiber, 2, vec![mixed.clone(), mixed]).scale(&rint(2)))
    }

    /// One degree-one letter mapped to the constant symplectic bivector,
    /// with the two-letter word mapped to the weight-two product term that
    /// bounds its bracket square.
    fn bivector_pair() -> OmegaMorphism {
        let basis = GradedBasis::new(&[("b", 1, 1)]).unwrap();
        let mut om = OmegaMorphism::new(LinftySpace::zero(basis, 2), flat_resolution());
        om.set_map(&[0], &bivector_op()).unwrap();
        om.set_map(&[0, 0], &weight_two_op()).unwrap();
        om
    }

    #[test]
    fn the_flat_multiplication_over_a_flat_connection_is_the_fiber_product() {
        let om = strict_vectors();
        assert_eq!(om.mu(), &PolyDiffOp::mult_op(VarKind::Fiber, 2));
    }

    #[test]
    fn the_target_differential_squares_to_zero() {
        let om = strict_vectors();
        let samples = [
            deriv_op(0),
            coord_op(1),
            PolyDiffOp::term(
                VarKind::Fiber,
                2,
                Mono::unit(2, 0).add(&Mono::unit(2, 1)),
                IdxSet::empty(),
                vec![Mono::unit(2, 0)],
                XPoly::one(2),
            ),
            weight_two_op(),
        ];
        for p in samples {
            assert!(om.differential(&om.differential(&p)).is_zero());
        }
    }

    #[test]
    fn coordinate_derivations_form_a_morphism_and_unflattening_keeps_it_one() {
        let om = strict_vectors();
        assert!(omega_residuals(&om).is_empty());

        let mut h = BTreeMap::new();
        h.insert(vec![0], coord_op(0));
        h.insert(vec![1], coord_op(1));
        let moved = omega_partial_homotopy(&om, &h, 1).unwrap();
        assert!(omega_residuals(&moved).is_empty());
        // the one-letter maps pick up minus the exterior coordinate frame
        assert_eq!(moved.eval_map(&[0]), deriv_op(0).sub(&dy_op(0)));
        assert_eq!(moved.eval_map(&[1]), deriv_op(1).sub(&dy_op(1)));
        // the two-letter corrections cancel: every bracket of the pieces
        // against the coordinate sections vanishes
        assert!(moved.eval_map(&[0, 1]).is_zero());
        assert_ne!(moved, om);
    }

    #[test]
    fn contraction_recovers_the_flat_morphism_and_leaves_flat_input_alone() {
        let om = strict_vectors();
        let mut h = BTreeMap::new();
        h.insert(vec![0], coord_op(0));
        h.insert(vec![1], coord_op(1));
        let moved = omega_partial_homotopy(&om, &h, 1).unwrap();

        let back = contract_to_flat(&moved, 1).unwrap();
        assert_eq!(back, om);
        let again = contract_to_flat(&back, 2).unwrap();
        assert_eq!(again, om);
    }

    #[test]
    fn the_weight_two_product_term_bounds_the_bivector_square() {
        let om = bivector_pair();
        assert!(omega_residuals(&om).is_empty());

        // without the weight-two table the relation at the two-letter word
        // is exactly the unbounded bracket square
        let basis = GradedBasis::new(&[("b", 1, 1)]).unwrap();
        let mut bare = OmegaMorphism::new(LinftySpace::zero(basis, 2), flat_resolution());
        bare.set_map(&[0], &bivector_op()).unwrap();
        assert_eq!(omega_residuals(&bare), vec![(2, "b^b".to_string())]);
    }

    #[test]
    fn peeling_the_top_exterior_stratum_undoes_an_arity_two_homotopy() {
        let om = bivector_pair();
        let mut h = BTreeMap::new();
        h.insert(
            vec![0, 0],
            PolyDiffOp::term(
                VarKind::Fiber,
                2,
                Mono::unit(2, 0),
                IdxSet::empty(),
                vec![Mono::unit(2, 1)],
                XPoly::one(2),
            ),
        );
        let moved = omega_partial_homotopy(&om, &h, 2).unwrap();
        assert!(omega_residuals(&moved).is_empty());
        let dy0_d1 = PolyDiffOp::term(
            VarKind::Fiber,
            2,
            Mono::zero(2),
            IdxSet::from_iter([0]),
            vec![Mono::unit(2, 1)],
            XPoly::one(2),
        );
        assert_eq!(moved.eval_map(&[0, 0]), weight_two_op().sub(&dy0_d1));

        let back = contract_to_flat(&moved, 2).unwrap();
        assert_eq!(back, om);
    }

    #[test]
    fn rejects_broken_relations_unflat_lower_tables_and_degree_mismatches() {
        let basis = GradedBasis::new(&[("b", 1, 1)]).unwrap();
        let mut broken = OmegaMorphism::new(LinftySpace::zero(basis, 2), flat_resolution());
        broken.set_map(&[0], &bivector_op()).unwrap();
        let err = contract_to_flat(&broken, 2).unwrap_err();
        assert!(err.contains("arity 2"), "{err}");

        let om = strict_vectors();
        let mut h = BTreeMap::new();
        h.insert(vec![0], coord_op(0));
        let moved = omega_partial_homotopy(&om, &h, 1).unwrap();
        let err = contract_to_flat(&moved, 2).unwrap_err();
        assert!(err.contains("not flat"), "{err}");

        let mut om = strict_vectors();
        let err = om.set_map(&[0], &weight_two_op()).unwrap_err();
        assert!(err.contains("degree mismatch"), "{err}");

        let om = strict_vectors();
        let mut h = BTreeMap::new();
        h.insert(vec![0], dy_op(0));
        let err = omega_partial_homotopy(&om, &h, 1).unwrap_err();
        assert!(err.contains("degree mismatch"), "{err}");
    }
}
