//! Deformation quantization on the chart: star products as Maurer-Cartan
//! elements of the polydifferential operators, the gauge action of formal
//! series of differential operators, and finite truncations of the twisted
//! chain complex compared against the form complex with the Poisson Lie
//! derivative. Everything is graded by the deformation order, so a product
//! through order N is a list of N bidifferential operators.

use crate::chain::{chain_action, chain_diff, HochChain};
use crate::diffop::{bullet, compose_slot, gerstenhaber, hoch_diff, OpKey, PolyDiffOp};
use crate::form::{lie_derivative, ExtForm};
use crate::graded::VarKind;
use crate::hkr::{antisymmetrize, hkr_v};
use crate::matrixq;
use crate::poly::{monomials_up_to, IdxSet, Mono, XPoly};
use crate::pvf::{schouten, PolyVecField};
use crate::ratio::{factorial, Rat};
use num_traits::{One, Zero};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Chart bivector series alpha_1 hbar + alpha_2 hbar^2 + ...; `alpha[k]` is
/// the order k+1 coefficient. The Poisson condition is the vanishing of the
/// Schouten square order by order.
#[derive(Clone, PartialEq, Debug)]
pub struct PoissonStructure {
    pub d: usize,
    pub alpha: Vec<PolyVecField>,
}

impl PoissonStructure {
    pub fn new(d: usize, alpha: Vec<PolyVecField>) -> Result<Self, String> {
        for a in &alpha {
            if a.var != VarKind::Chart || a.d != d {
                return Err("Poisson coefficients must be chart bivectors".into());
            }
            for k in a.terms.keys() {
                if !k.dyset.is_empty() || !k.ydeg.is_zero() || k.vslots.len() != 2 {
                    return Err("Poisson coefficients must be dy-free bivectors".into());
                }
            }
        }
        Ok(PoissonStructure { d, alpha })
    }

    /// The constant symplectic bivector d/dx^1 ^ d/dx^2 at order one.
    pub fn symplectic_plane() -> Self {
        let v = PolyVecField::term(
            VarKind::Chart,
            2,
            Mono::zero(2),
            IdxSet::empty(),
            IdxSet::from_iter([0, 1]),
            XPoly::one(2),
        );
        PoissonStructure { d: 2, alpha: vec![v] }
    }

    fn order(&self, k: usize) -> PolyVecField {
        if k >= 1 && k <= self.alpha.len() {
            self.alpha[k - 1].clone()
        } else {
            PolyVecField::zero(VarKind::Chart, self.d)
        }
    }

    /// Schouten squares [alpha, alpha] per order 2..=2N; all must vanish.
    pub fn jacobi_residuals(&self) -> Vec<PolyVecField> {
        let n = self.alpha.len();
        (2..=2 * n)
            .map(|m| {
                let mut acc = PolyVecField::zero(VarKind::Chart, self.d);
                for i in 1..m {
                    acc.add_assign(&schouten(&self.order(i), &self.order(m - i)));
                }
                acc
            })
            .collect()
    }

    pub fn is_poisson(&self) -> bool {
        self.jacobi_residuals().iter().all(|r| r.is_zero())
    }

    /// The bracket {a, b} per deformation order 1..=N.
    pub fn bracket(&self, a: &XPoly, b: &XPoly) -> Vec<XPoly> {
        self.alpha.iter().map(|al| op_on_functions(&hkr_v(al), &[a, b])).collect()
    }
}

/// Star product a * b = a b + sum_k hbar^k Pi_k(a, b); `pi[k]` is the order
/// k+1 term, a dy-free two-slot chart operator.
#[derive(Clone, PartialEq, Debug)]
pub struct StarProduct {
    pub d: usize,
    pub pi: Vec<PolyDiffOp>,
}

impl StarProduct {
    pub fn new(d: usize, pi: Vec<PolyDiffOp>) -> Result<Self, String> {
        for p in &pi {
            if p.var != VarKind::Chart || p.d != d {
                return Err("star product terms must be chart operators".into());
            }
            for k in p.terms.keys() {
                if !k.dyset.is_empty() || !k.ydeg.is_zero() || k.oslots.len() != 2 {
                    return Err("star product terms must be dy-free bidifferential operators".into());
                }
            }
        }
        Ok(StarProduct { d, pi })
    }

    pub fn n_hbar(&self) -> usize {
        self.pi.len()
    }

    fn order(&self, k: usize) -> PolyDiffOp {
        if k == 0 {
            PolyDiffOp::mult_op(VarKind::Chart, self.d)
        } else if k <= self.pi.len() {
            self.pi[k - 1].clone()
        } else {
            PolyDiffOp::zero(VarKind::Chart, self.d)
        }
    }
}

/// Formal series U = I + hbar U_1 + ...; `u[k]` is the order k+1 term, a
/// one-slot chart operator.
#[derive(Clone, PartialEq, Debug)]
pub struct GaugeElement {
    pub d: usize,
    pub u: Vec<PolyDiffOp>,
}

impl GaugeElement {
    pub fn new(d: usize, u: Vec<PolyDiffOp>) -> Result<Self, String> {
        for p in &u {
            if p.var != VarKind::Chart || p.d != d {
                return Err("gauge terms must be chart operators".into());
            }
            for k in p.terms.keys() {
                if !k.dyset.is_empty() || !k.ydeg.is_zero() || k.oslots.len() != 1 {
                    return Err("gauge terms must be dy-free differential operators".into());
                }
            }
        }
        Ok(GaugeElement { d, u })
    }

    fn order(&self, k: usize) -> PolyDiffOp {
        if k == 0 {
            PolyDiffOp::identity_op(VarKind::Chart, self.d)
        } else if k <= self.u.len() {
            self.u[k - 1].clone()
        } else {
            PolyDiffOp::zero(VarKind::Chart, self.d)
        }
    }
}

/// Apply a chart operator to polynomial function arguments.
pub fn op_on_functions(p: &PolyDiffOp, args: &[&XPoly]) -> XPoly {
    let d = p.d;
    let wrapped: Vec<PolyVecField> = args
        .iter()
        .map(|c| PolyVecField::function(p.var, d, Mono::zero(d), (*c).clone()))
        .collect();
    let mut out = XPoly::zero(d);
    for (k, c) in &p.eval(&wrapped).terms {
        assert!(k.ydeg.is_zero() && k.dyset.is_empty() && k.vslots.is_empty());
        out.add_assign(c);
    }
    out
}

/// The Moyal product of a constant-coefficient bivector:
/// Pi_n = (1/n!) alpha^{i_1 j_1} ... alpha^{i_n j_n} d_{i...} (x) d_{j...}.
/// Exponentiating the full antisymmetric matrix (no extra 1/2) keeps the
/// Maurer-Cartan normalization dPi + [Pi,Pi]/2 = 0 on the nose; the physics
/// convention is recovered by alpha -> alpha/2.
pub fn moyal_star(alpha: &PoissonStructure, n_hbar: usize) -> Result<StarProduct, String> {
    let d = alpha.d;
    if alpha.alpha.len() > 1 && alpha.alpha[1..].iter().any(|a| !a.is_zero()) {
        return Err("the Moyal generator takes a single-order bivector".into());
    }
    let mut amat = vec![vec![Rat::zero(); d]; d];
    if let Some(a1) = alpha.alpha.first() {
        for (k, c) in &a1.terms {
            if !c.is_constant() {
                return Err("the Moyal generator needs constant coefficients".into());
            }
            let dirs: Vec<usize> = k.vslots.iter().collect();
            let cc = c.terms.values().next().cloned().unwrap_or_else(Rat::zero);
            let up = &amat[dirs[0]][dirs[1]] + &cc;
            amat[dirs[0]][dirs[1]] = up;
            let dn = &amat[dirs[1]][dirs[0]] - &cc;
            amat[dirs[1]][dirs[0]] = dn;
        }
    }
    let mut pi = Vec::with_capacity(n_hbar);
    for n in 1..=n_hbar {
        let mut acc: Vec<(Mono, Mono, Rat)> = vec![(Mono::zero(d), Mono::zero(d), Rat::one())];
        for _ in 0..n {
            let mut next = Vec::new();
            for (mi, mj, c) in &acc {
                for i in 0..d {
                    for j in 0..d {
                        if amat[i][j].is_zero() {
                            continue;
                        }
                        next.push((
                            mi.add(&Mono::unit(d, i)),
                            mj.add(&Mono::unit(d, j)),
                            c * &amat[i][j],
                        ));
                    }
                }
            }
            acc = next;
        }
        let inv = factorial(n as u32).recip();
        let mut p = PolyDiffOp::zero(VarKind::Chart, d);
        for (mi, mj, c) in acc {
            p.insert(
                OpKey { ydeg: Mono::zero(d), dyset: IdxSet::empty(), oslots: vec![mi, mj] },
                XPoly::constant(d, &c * &inv),
            );
        }
        pi.push(p);
    }
    Ok(StarProduct { d, pi })
}

/// Maurer-Cartan residuals dPi_n + (1/2) sum_{k+l=n} [Pi_k, Pi_l] per order
/// 1..=N; all zero exactly when the product is associative to that order.
pub fn mc_residual(s: &StarProduct) -> Vec<PolyDiffOp> {
    let half = Rat::new(1.into(), 2.into());
    (1..=s.n_hbar())
        .map(|n| {
            let mut acc = hoch_diff(&s.order(n));
            for k in 1..n {
                acc.add_assign(&gerstenhaber(&s.order(k), &s.order(n - k)).scale(&half));
            }
            acc
        })
        .collect()
}

/// The product of two function series, both and the result truncated at the
/// star's order.
pub fn star_eval(s: &StarProduct, a: &[XPoly], b: &[XPoly]) -> Vec<XPoly> {
    let n = s.n_hbar();
    let d = s.d;
    let mut out = vec![XPoly::zero(d); n + 1];
    for (i, ai) in a.iter().enumerate().take(n + 1) {
        for (j, bj) in b.iter().enumerate().take(n + 1 - i) {
            for k in 0..=(n - i - j) {
                let term = if k == 0 {
                    ai.mul(bj)
                } else {
                    op_on_functions(&s.pi[k - 1], &[ai, bj])
                };
                out[i + j + k].add_assign(&term);
            }
        }
    }
    out
}

/// Associator (a*b)*c - a*(b*c) per order 0..=N on plain functions.
pub fn assoc_residual(s: &StarProduct, a: &XPoly, b: &XPoly, c: &XPoly) -> Vec<XPoly> {
    let series = |f: &XPoly| {
        let mut v = vec![XPoly::zero(s.d); s.n_hbar() + 1];
        v[0] = f.clone();
        v
    };
    let left = star_eval(s, &star_eval(s, &series(a), &series(b)), &series(c));
    let right = star_eval(s, &series(a), &star_eval(s, &series(b), &series(c)));
    left.iter().zip(&right).map(|(l, r)| l.sub(r)).collect()
}

/// Order-by-order inverse: U V = I.
pub fn gauge_inverse(g: &GaugeElement) -> GaugeElement {
    let n = g.u.len();
    let mut v: Vec<PolyDiffOp> = Vec::with_capacity(n);
    for m in 1..=n {
        let mut acc = g.order(m).neg();
        for k in 1..m {
            acc.add_assign(&bullet(&g.order(k), &v[m - k - 1]).neg());
        }
        v.push(acc);
    }
    GaugeElement { d: g.d, u: v }
}

/// Composition (g h)(a) = g(h(a)), truncated at the longer order list.
pub fn gauge_compose(g: &GaugeElement, h: &GaugeElement) -> GaugeElement {
    let n = g.u.len().max(h.u.len());
    let u = (1..=n)
        .map(|m| {
            let mut acc = PolyDiffOp::zero(VarKind::Chart, g.d);
            for i in 0..=m {
                let (a, b) = (g.order(i), h.order(m - i));
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                acc.add_assign(&bullet(&a, &b));
            }
            acc
        })
        .collect();
    GaugeElement { d: g.d, u }
}

/// The transformed product solving U(a * b) = U(a) *~ U(b): conjugation of
/// mu + Pi by U order by order.
pub fn gauge_transform(s: &StarProduct, g: &GaugeElement) -> StarProduct {
    let n = s.n_hbar();
    // pad to the product's order so the inverse carries all the terms the
    // conjugation below can reach
    let v = gauge_inverse(&GaugeElement { d: g.d, u: (1..=n).map(|k| g.order(k)).collect() });
    let pi = (1..=n)
        .map(|m| {
            let mut acc = PolyDiffOp::zero(VarKind::Chart, s.d);
            for i in 0..=m {
                for j in 0..=(m - i) {
                    for k in 0..=(m - i - j) {
                        let l = m - i - j - k;
                        let mut t = s.order(j);
                        if t.is_zero() {
                            continue;
                        }
                        if k > 0 {
                            t = compose_slot(&t, 0, &v.order(k));
                        }
                        if l > 0 {
                            t = compose_slot(&t, 1, &v.order(l));
                        }
                        if i > 0 {
                            t = bullet(&g.order(i), &t);
                        }
                        acc.add_assign(&t);
                    }
                }
            }
            acc
        })
        .collect();
    StarProduct { d: s.d, pi }
}

/// The order-one antisymmetric part of the product, the representative
/// direction of its class; invariant under every gauge transformation.
pub fn class_direction(s: &StarProduct) -> PolyVecField {
    match s.pi.first() {
        Some(p) => antisymmetrize(p),
        None => PolyVecField::zero(VarKind::Chart, s.d),
    }
}

/// One truncated complex: space dimensions and homology dimensions per
/// degree 0..=degree_cap, terms dropped by the polynomial cap, and whether
/// consecutive differentials compose to zero on the retained basis.
#[derive(Clone, PartialEq, Debug)]
pub struct ComplexSummary {
    pub dims: Vec<usize>,
    pub homology: Vec<usize>,
    pub leaks: usize,
    pub nilpotent: bool,
}

// Rank bookkeeping shared by the two complexes: spaces per degree
// 0..=degree_cap+1 given as column counts, the differential degree n ->
// n-1 given as columns of the matrix.
fn homology_dims(
    dims: &[usize],
    mats: &[Vec<Vec<Rat>>],
    degree_cap: usize,
) -> (Vec<usize>, Vec<usize>, bool) {
    let ranks: Vec<usize> = mats
        .iter()
        .map(|cols| {
            if cols.is_empty() || cols[0].is_empty() {
                return 0;
            }
            let rows = cols[0].len();
            let m: Vec<Vec<Rat>> =
                (0..rows).map(|r| cols.iter().map(|c| c[r].clone()).collect()).collect();
            matrixq::rank(&m)
        })
        .collect();
    let mut nil = true;
    for n in 1..mats.len().saturating_sub(1) {
        // push every column of d_{n+1} through d_n; all must land on zero
        let dn = &mats[n];
        if dn.is_empty() {
            continue;
        }
        let rows_out = dn[0].len();
        for col in &mats[n + 1] {
            let mut acc = vec![Rat::zero(); rows_out];
            for (r, v) in col.iter().enumerate() {
                if v.is_zero() {
                    continue;
                }
                for (t, w) in dn[r].iter().enumerate() {
                    if !w.is_zero() {
                        acc[t] = &acc[t] + &(v * w);
                    }
                }
            }
            if acc.iter().any(|x| !x.is_zero()) {
                nil = false;
            }
        }
    }
    let homology = (0..=degree_cap)
        .map(|n| dims[n].saturating_sub(ranks[n] + ranks[n + 1]))
        .collect();
    (dims[..=degree_cap].to_vec(), homology, nil)
}

fn tuples_up_to(d: usize, parts: usize, cap: u32) -> Vec<Vec<Mono>> {
    if parts == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for m in monomials_up_to(d, cap) {
        for mut rest in tuples_up_to(d, parts - 1, cap - m.total()) {
            let mut t = vec![m.clone()];
            t.append(&mut rest);
            out.push(t);
        }
    }
    out
}

/// The Hochschild chain complex twisted by the product, truncated to chain
/// degree <= degree_cap (assembled one degree higher so the top homology is
/// honest), total polynomial degree across the groups <= poly_cap, and
/// deformation order <= n_hbar.
pub fn twisted_chain_complex(
    s: &StarProduct,
    degree_cap: usize,
    poly_cap: u32,
    n_hbar: usize,
) -> ComplexSummary {
    let d = s.d;
    let nh = n_hbar + 1;
    let bases: Vec<Vec<Vec<Mono>>> =
        (0..=degree_cap + 1).map(|n| tuples_up_to(d, n + 1, poly_cap)).collect();
    let dims: Vec<usize> = bases.iter().map(|b| b.len() * nh).collect();
    let index: Vec<BTreeMap<Vec<Mono>, usize>> = bases
        .iter()
        .map(|b| b.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect())
        .collect();
    let ops: Vec<PolyDiffOp> = (1..=n_hbar).map(|k| s.order(k)).collect();
    let mut mats: Vec<Vec<Vec<Rat>>> = vec![Vec::new()];
    let mut leaks = 0usize;
    for n in 1..=degree_cap + 1 {
        let rows = dims[n - 1];
        let cols: Vec<(Vec<Rat>, usize)> = bases[n]
            .par_iter()
            .flat_map(|groups| {
                let e = HochChain::term(
                    VarKind::Chart,
                    d,
                    IdxSet::empty(),
                    groups.clone(),
                    XPoly::one(d),
                );
                let images: Vec<HochChain> = std::iter::once(chain_diff(&e))
                    .chain(ops.iter().map(|p| chain_action(p, &e)))
                    .collect();
                (0..nh)
                    .map(|h| {
                        let mut col = vec![Rat::zero(); rows];
                        let mut dropped = 0usize;
                        for (k, img) in images.iter().enumerate() {
                            if h + k >= nh {
                                break;
                            }
                            for (key, c) in &img.terms {
                                assert!(key.dyset.is_empty());
                                for (m, cc) in &c.terms {
                                    assert!(m.is_zero(), "chain image must have constant coefficients");
                                    match index[n - 1].get(&key.groups) {
                                        Some(&r) => {
                                            let slot = &mut col[r * nh + h + k];
                                            *slot = &*slot + cc;
                                        }
                                        None => dropped += 1,
                                    }
                                }
                            }
                        }
                        (col, dropped)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut flat = Vec::with_capacity(cols.len());
        for (col, dropped) in cols {
            leaks += dropped;
            flat.push(col);
        }
        mats.push(flat);
    }
    let (dims, homology, nilpotent) = homology_dims(&dims, &mats, degree_cap);
    ComplexSummary { dims, homology, leaks, nilpotent }
}

/// The form complex with the Lie derivative along the Poisson series,
/// truncated to form degree <= degree_cap (assembled one higher), coefficient
/// degree + form degree <= poly_cap, and deformation order <= n_hbar. The
/// degree cap on coefficient plus form degree is what corresponds to the
/// total group degree on the chain side.
pub fn forms_complex(
    alpha: &PoissonStructure,
    degree_cap: usize,
    poly_cap: u32,
    n_hbar: usize,
) -> Result<ComplexSummary, String> {
    if !alpha.is_poisson() {
        return Err("the bivector series does not square to zero".into());
    }
    let d = alpha.d;
    let nh = n_hbar + 1;
    let subsets = |n: usize| -> Vec<IdxSet> {
        (0..(1u32 << d))
            .map(IdxSet)
            .filter(|s| s.len() as usize == n)
            .collect()
    };
    let mut bases: Vec<Vec<(IdxSet, Mono)>> = Vec::new();
    for n in 0..=degree_cap + 1 {
        let mut b = Vec::new();
        if n <= d && (n as u32) <= poly_cap {
            for s in subsets(n) {
                for m in monomials_up_to(d, poly_cap - n as u32) {
                    b.push((s, m));
                }
            }
        }
        bases.push(b);
    }
    let dims: Vec<usize> = bases.iter().map(|b| b.len() * nh).collect();
    let index: Vec<BTreeMap<(IdxSet, Mono), usize>> = bases
        .iter()
        .map(|b| b.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect())
        .collect();
    let mut mats: Vec<Vec<Vec<Rat>>> = vec![Vec::new()];
    let mut leaks = 0usize;
    for n in 1..=degree_cap + 1 {
        let rows = dims[n - 1];
        let cols: Vec<(Vec<Rat>, usize)> = bases[n]
            .par_iter()
            .flat_map(|(s, m)| {
                let f = ExtForm::term(
                    VarKind::Chart,
                    d,
                    Mono::zero(d),
                    IdxSet::empty(),
                    *s,
                    XPoly::monomial(d, m.clone(), Rat::one()),
                );
                let images: Vec<ExtForm> =
                    alpha.alpha.iter().map(|a| lie_derivative(a, &f)).collect();
                (0..nh)
                    .map(|h| {
                        let mut col = vec![Rat::zero(); rows];
                        let mut dropped = 0usize;
                        for (k, img) in images.iter().enumerate() {
                            if h + k + 1 >= nh {
                                break;
                            }
                            for (key, c) in &img.terms {
                                for (mm, cc) in &c.terms {
                                    match index[n - 1].get(&(key.dxset, mm.clone())) {
                                        Some(&r) => {
                                            let slot = &mut col[r * nh + h + k + 1];
                                            *slot = &*slot + cc;
                                        }
                                        None => dropped += 1,
                                    }
                                }
                            }
                        }
                        (col, dropped)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut flat = Vec::with_capacity(cols.len());
        for (col, dropped) in cols {
            leaks += dropped;
            flat.push(col);
        }
        mats.push(flat);
    }
    let (dims, homology, nilpotent) = homology_dims(&dims, &mats, degree_cap);
    Ok(ComplexSummary { dims, homology, leaks, nilpotent })
}

/// Side-by-side dimension tables of the two complexes.
#[derive(Clone, PartialEq, Debug)]
pub struct HomologyReport {
    pub rows: Vec<HomologyRow>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct HomologyRow {
    pub degree: usize,
    pub chain_dim: usize,
    pub chain_homology: usize,
    pub form_dim: usize,
    pub form_homology: usize,
}

impl HomologyReport {
    pub fn compare(chains: &ComplexSummary, forms: &ComplexSummary) -> HomologyReport {
        let rows = chains
            .dims
            .iter()
            .enumerate()
            .map(|(n, &cd)| HomologyRow {
                degree: n,
                chain_dim: cd,
                chain_homology: chains.homology[n],
                form_dim: forms.dims[n],
                form_homology: forms.homology[n],
            })
            .collect();
        HomologyReport { rows }
    }

    pub fn tables_agree(&self) -> bool {
        self.rows.iter().all(|r| r.chain_homology == r.form_homology)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("degree,chain_dim,chain_homology,form_dim,form_homology\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.degree, r.chain_dim, r.chain_homology, r.form_dim, r.form_homology
            ));
        }
        out
    }
}

/// Star commutators against a linear functional on monomials. A trace kills
/// every commutator; the classical criterion is killing every Poisson
/// bracket, and at order one the two sides differ by the fixed factor 2.
#[derive(Clone, PartialEq, Debug)]
pub struct TraceReport {
    /// (a, b, order, value) for each nonzero functional value on a commutator
    pub residuals: Vec<(Mono, Mono, usize, Rat)>,
    /// functional on the order-one commutator equals twice the functional on
    /// the bracket, for every pair
    pub criterion_ok: bool,
    pub pairs: usize,
}

pub fn trace_check(
    s: &StarProduct,
    alpha: &PoissonStructure,
    functional: &BTreeMap<Mono, Rat>,
    poly_cap: u32,
) -> TraceReport {
    let d = s.d;
    let eval = |p: &XPoly| -> Rat {
        p.terms
            .iter()
            .filter_map(|(m, c)| functional.get(m).map(|f| f * c))
            .fold(Rat::zero(), |a, b| a + b)
    };
    let monos = monomials_up_to(d, poly_cap);
    let mut residuals = Vec::new();
    let mut criterion_ok = true;
    let mut pairs = 0usize;
    for (i, a) in monos.iter().enumerate() {
        for b in monos.iter().skip(i + 1) {
            if a.total() + b.total() > poly_cap {
                continue;
            }
            pairs += 1;
            let pa = XPoly::monomial(d, a.clone(), Rat::one());
            let pb = XPoly::monomial(d, b.clone(), Rat::one());
            let mut comm = Vec::new();
            for k in 1..=s.n_hbar() {
                let c = op_on_functions(&s.pi[k - 1], &[&pa, &pb])
                    .sub(&op_on_functions(&s.pi[k - 1], &[&pb, &pa]));
                comm.push(c);
            }
            for (k, c) in comm.iter().enumerate() {
                let v = eval(c);
                if !v.is_zero() {
                    residuals.push((a.clone(), b.clone(), k + 1, v));
                }
            }
            let bracket = alpha.bracket(&pa, &pb);
            let lhs = comm.first().map(&eval).unwrap_or_else(Rat::zero);
            let rhs = bracket.first().map(&eval).unwrap_or_else(Rat::zero);
            if lhs != &rhs * &Rat::from_integer(2.into()) {
                criterion_ok = false;
            }
        }
    }
    TraceReport { residuals, criterion_ok, pairs }
}
