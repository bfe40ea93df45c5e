//! Scene files: one JSON document (`schema: 1`) holding the truncation
//! context and whichever payloads a command run needs. All structural
//! invariants are checked at load so a scene that parses is safe to run.
//! Rationals are "p/q" strings, chart indices are 1-based, polynomials are
//! lists of exponent/coefficient terms.

use crate::fedosov::ConnectionData;
use crate::graded::TruncationContext;
use crate::linfty::{GradedBasis, LinftySpace, MCElement};
use crate::poly::{Mono, XPoly};
use crate::quantize::{GaugeElement, PoissonStructure, StarProduct};
use crate::ratio::{rat_from_string, Rat};
use crate::{diffop::OpKey, diffop::PolyDiffOp, graded::VarKind, poly::IdxSet, pvf::PolyVecField};
use num_traits::Zero;
use serde::Deserialize;
use std::collections::BTreeMap;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDto {
    schema: u32,
    #[serde(default)]
    seed: Option<u64>,
    context: Option<ContextDto>,
    connection: Option<ConnectionDto>,
    poisson: Option<PoissonDto>,
    star: Option<StarDto>,
    gauge: Option<GaugeDto>,
    linfty: Option<LinftyDto>,
    caps: Option<CapsDto>,
    functional: Option<Vec<TermDto>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextDto {
    d: usize,
    #[serde(default = "four")]
    n_y: u32,
    #[serde(default = "two")]
    n_hbar: u32,
    #[serde(default = "four")]
    n_ar: u32,
}

fn four() -> u32 {
    4
}

fn two() -> u32 {
    2
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDto {
    exponents: Vec<u16>,
    coeff: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConnectionDto {
    christoffel: Vec<ChristoffelDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChristoffelDto {
    k: usize,
    i: usize,
    j: usize,
    value: Vec<TermDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonDto {
    bivectors: Vec<BivectorDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BivectorDto {
    order: usize,
    terms: Vec<BivTermDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BivTermDto {
    i: usize,
    j: usize,
    value: Vec<TermDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StarDto {
    orders: Vec<Vec<OpTermDto>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaugeDto {
    orders: Vec<Vec<OpTermDto>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpTermDto {
    slots: Vec<Vec<u16>>,
    value: Vec<TermDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinftyDto {
    basis: Vec<BasisDto>,
    #[serde(default = "four_usize")]
    n_ar: usize,
    #[serde(default)]
    differential: Vec<MapEntryDto>,
    #[serde(default)]
    bracket: Vec<BracketDto>,
    mc: Option<Vec<CoeffDto>>,
}

fn four_usize() -> usize {
    4
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisDto {
    name: String,
    degree: i64,
    #[serde(default)]
    filtration: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapEntryDto {
    on: String,
    value: Vec<CoeffDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BracketDto {
    left: String,
    right: String,
    value: Vec<CoeffDto>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffDto {
    to: String,
    coeff: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CapsDto {
    #[serde(default = "two_usize")]
    degree_cap: usize,
    #[serde(default = "three")]
    poly_cap: u32,
}

fn two_usize() -> usize {
    2
}

fn three() -> u32 {
    3
}

#[derive(Debug)]
pub struct LinftyPayload {
    pub space: LinftySpace,
    pub mc: Option<MCElement>,
}

/// A validated scene. Optional payloads stay `None` when the file omits
/// them; each command asks for what it needs through the `require_*`
/// accessors, which name the missing payload.
#[derive(Debug)]
pub struct Scene {
    pub seed: u64,
    pub ctx: Option<TruncationContext>,
    pub connection: Option<ConnectionData>,
    pub poisson: Option<PoissonStructure>,
    pub star: Option<StarProduct>,
    pub gauge: Option<GaugeElement>,
    pub linfty: Option<LinftyPayload>,
    pub degree_cap: usize,
    pub poly_cap: u32,
    pub functional: Option<BTreeMap<Mono, Rat>>,
}

fn poly_from(d: usize, terms: &[TermDto], what: &str) -> Result<XPoly, String> {
    let mut p = XPoly::zero(d);
    for t in terms {
        if t.exponents.len() != d {
            return Err(format!(
                "{what}: exponent list {:?} does not match chart dimension {d}",
                t.exponents
            ));
        }
        let c = rat_from_string(&t.coeff).map_err(|e| format!("{what}: {e}"))?;
        p.add_assign(&XPoly::monomial(d, Mono(t.exponents.clone()), c));
    }
    Ok(p)
}

fn chart_index(x: usize, d: usize, what: &str) -> Result<usize, String> {
    if x < 1 || x > d {
        return Err(format!("{what}: index {x} out of range 1..={d}"));
    }
    Ok(x - 1)
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Scene, String> {
        let dto: SceneDto =
            serde_json::from_str(text).map_err(|e| format!("scene parse error: {e}"))?;
        if dto.schema != 1 {
            return Err(format!("unsupported scene schema {} (expected 1)", dto.schema));
        }
        let ctx = match &dto.context {
            Some(c) => Some(TruncationContext::new(c.d, c.n_y, c.n_hbar, c.n_ar)?),
            None => None,
        };
        let need_ctx = |what: &str| -> Result<usize, String> {
            ctx.as_ref()
                .map(|c| c.d)
                .ok_or_else(|| format!("the `{what}` payload needs a `context` block"))
        };

        let connection = match &dto.connection {
            Some(cd) => {
                let d = need_ctx("connection")?;
                let mut gamma = vec![vec![vec![XPoly::zero(d); d]; d]; d];
                for e in &cd.christoffel {
                    let k = chart_index(e.k, d, "christoffel k")?;
                    let i = chart_index(e.i, d, "christoffel i")?;
                    let j = chart_index(e.j, d, "christoffel j")?;
                    gamma[k][i][j] = poly_from(d, &e.value, "christoffel value")?;
                }
                Some(
                    ConnectionData::new(d, gamma)
                        .map_err(|e| format!("torsion-free violation: {e}"))?,
                )
            }
            None => None,
        };

        let poisson = match &dto.poisson {
            Some(pd) => {
                let d = need_ctx("poisson")?;
                let max = pd.bivectors.iter().map(|b| b.order).max().unwrap_or(0);
                let mut alpha = vec![PolyVecField::zero(VarKind::Chart, d); max];
                for b in &pd.bivectors {
                    if b.order < 1 {
                        return Err("bivector orders count from 1".into());
                    }
                    for t in &b.terms {
                        let i = chart_index(t.i, d, "bivector i")?;
                        let j = chart_index(t.j, d, "bivector j")?;
                        if i >= j {
                            return Err(format!(
                                "bivector term must have i < j, got i={} j={}",
                                t.i, t.j
                            ));
                        }
                        alpha[b.order - 1].add_assign(&PolyVecField::term(
                            VarKind::Chart,
                            d,
                            Mono::zero(d),
                            IdxSet::empty(),
                            IdxSet::from_iter([i, j]),
                            poly_from(d, &t.value, "bivector value")?,
                        ));
                    }
                }
                let p = PoissonStructure::new(d, alpha)?;
                if !p.is_poisson() {
                    return Err("bivector series is not Poisson: its Schouten square is nonzero".into());
                }
                Some(p)
            }
            None => None,
        };

        let parse_ops = |orders: &[Vec<OpTermDto>],
                         slots: usize,
                         what: &str|
         -> Result<Vec<PolyDiffOp>, String> {
            let d = need_ctx(what)?;
            orders
                .iter()
                .map(|terms| {
                    let mut p = PolyDiffOp::zero(VarKind::Chart, d);
                    for t in terms {
                        if t.slots.len() != slots {
                            return Err(format!("{what} terms take exactly {slots} slot(s)"));
                        }
                        let mut oslots = Vec::with_capacity(slots);
                        for s in &t.slots {
                            if s.len() != d {
                                return Err(format!(
                                    "{what}: slot {s:?} does not match chart dimension {d}"
                                ));
                            }
                            oslots.push(Mono(s.clone()));
                        }
                        let mut q = PolyDiffOp::zero(VarKind::Chart, d);
                        q.insert(
                            OpKey { ydeg: Mono::zero(d), dyset: IdxSet::empty(), oslots },
                            poly_from(d, &t.value, what)?,
                        );
                        p.add_assign(&q);
                    }
                    Ok(p)
                })
                .collect()
        };

        let star = match &dto.star {
            Some(sd) => {
                let d = need_ctx("star")?;
                Some(StarProduct::new(d, parse_ops(&sd.orders, 2, "star")?)?)
            }
            None => None,
        };

        let gauge = match &dto.gauge {
            Some(gd) => {
                let d = need_ctx("gauge")?;
                Some(GaugeElement::new(d, parse_ops(&gd.orders, 1, "gauge")?)?)
            }
            None => None,
        };

        let linfty = match &dto.linfty {
            Some(ld) => {
                let items: Vec<(&str, i64, u32)> =
                    ld.basis.iter().map(|b| (b.name.as_str(), b.degree, b.filtration)).collect();
                let basis = GradedBasis::new(&items)?;
                let dim = ld.basis.len();
                let by_name = |name: &str| -> Result<usize, String> {
                    ld.basis
                        .iter()
                        .position(|b| b.name == name)
                        .ok_or_else(|| format!("unknown basis element {name:?}"))
                };
                let vector = |entries: &[CoeffDto]| -> Result<Vec<Rat>, String> {
                    let mut v = vec![Rat::zero(); dim];
                    for e in entries {
                        v[by_name(&e.to)?] = rat_from_string(&e.coeff)?;
                    }
                    Ok(v)
                };
                let mut diff = vec![vec![Rat::zero(); dim]; dim];
                for e in &ld.differential {
                    diff[by_name(&e.on)?] = vector(&e.value)?;
                }
                let mut bracket = BTreeMap::new();
                for e in &ld.bracket {
                    let i = by_name(&e.left)?;
                    let j = by_name(&e.right)?;
                    if i > j {
                        return Err(format!(
                            "bracket entry ({}, {}) must list the earlier basis element first",
                            e.left, e.right
                        ));
                    }
                    bracket.insert((i, j), vector(&e.value)?);
                }
                let space = LinftySpace::dgla(basis, ld.n_ar, &diff, &bracket)?;
                let mc = match &ld.mc {
                    Some(entries) => Some(MCElement::new(&space, vector(entries)?)?),
                    None => None,
                };
                Some(LinftyPayload { space, mc })
            }
            None => None,
        };

        let functional = match &dto.functional {
            Some(terms) => {
                let d = need_ctx("functional")?;
                let mut f = BTreeMap::new();
                for t in terms {
                    if t.exponents.len() != d {
                        return Err(format!(
                            "functional: exponent list {:?} does not match chart dimension {d}",
                            t.exponents
                        ));
                    }
                    f.insert(Mono(t.exponents.clone()), rat_from_string(&t.coeff)?);
                }
                Some(f)
            }
            None => None,
        };

        let caps = dto.caps.as_ref();
        Ok(Scene {
            seed: dto.seed.unwrap_or(0),
            ctx,
            connection,
            poisson,
            star,
            gauge,
            linfty,
            degree_cap: caps.map(|c| c.degree_cap).unwrap_or(2),
            poly_cap: caps.map(|c| c.poly_cap).unwrap_or(3),
            functional,
        })
    }

    pub fn require_ctx(&self) -> Result<&TruncationContext, String> {
        self.ctx.as_ref().ok_or_else(|| missing("context"))
    }

    pub fn require_connection(&self) -> Result<&ConnectionData, String> {
        self.connection.as_ref().ok_or_else(|| missing("connection"))
    }

    pub fn require_poisson(&self) -> Result<&PoissonStructure, String> {
        self.poisson.as_ref().ok_or_else(|| missing("poisson"))
    }

    pub fn require_star(&self) -> Result<&StarProduct, String> {
        self.star.as_ref().ok_or_else(|| missing("star"))
    }

    pub fn require_linfty(&self) -> Result<&LinftyPayload, String> {
        self.linfty.as_ref().ok_or_else(|| missing("linfty"))
    }

    pub fn require_functional(&self) -> Result<&BTreeMap<Mono, Rat>, String> {
        self.functional.as_ref().ok_or_else(|| missing("functional"))
    }
}

fn missing(what: &str) -> String {
    format!("scene is missing the `{what}` payload")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linfty::check_linfty;
    use crate::ratio::rint;

    #[test]
    fn minimal_scene_loads() {
        let s = Scene::from_json(
            r#"{"schema": 1, "context": {"d": 1, "n_y": 3}, "connection": {"christoffel": []}}"#,
        )
        .unwrap();
        assert_eq!(s.seed, 0);
        let ctx = s.require_ctx().unwrap();
        assert_eq!((ctx.d, ctx.n_y), (1, 3));
        assert!(s.require_connection().unwrap().is_zero());
        assert!(s.require_star().is_err());
    }

    #[test]
    fn asymmetric_christoffel_is_a_torsion_violation() {
        let err = Scene::from_json(
            r#"{"schema": 1, "context": {"d": 2},
                "connection": {"christoffel": [
                  {"k": 1, "i": 1, "j": 2, "value": [{"exponents": [1, 0], "coeff": "1"}]}
                ]}}"#,
        )
        .unwrap_err();
        assert!(err.contains("torsion-free violation"), "{err}");
    }

    #[test]
    fn schema_and_shape_errors_are_reported() {
        assert!(Scene::from_json(r#"{"schema": 2}"#).unwrap_err().contains("schema"));
        assert!(Scene::from_json(r#"{"schema": 1, "bogus": 3}"#)
            .unwrap_err()
            .contains("parse error"));
        // a payload that needs the chart dimension without a context block
        let err = Scene::from_json(
            r#"{"schema": 1, "star": {"orders": []}}"#,
        )
        .unwrap_err();
        assert!(err.contains("context"), "{err}");
        // bad rational
        let err = Scene::from_json(
            r#"{"schema": 1, "context": {"d": 1},
                "functional": [{"exponents": [0], "coeff": "1/0"}]}"#,
        )
        .unwrap_err();
        assert!(err.contains("denominator"), "{err}");
    }

    #[test]
    fn poisson_and_star_payloads_build_the_real_structures() {
        let s = Scene::from_json(
            r#"{"schema": 1, "seed": 5,
                "context": {"d": 2, "n_hbar": 3},
                "poisson": {"bivectors": [
                  {"order": 1, "terms": [{"i": 1, "j": 2, "value": [{"exponents": [0, 0], "coeff": "1"}]}]}
                ]},
                "star": {"orders": [
                  [{"slots": [[1, 0], [0, 1]], "value": [{"exponents": [0, 0], "coeff": "1"}]},
                   {"slots": [[0, 1], [1, 0]], "value": [{"exponents": [0, 0], "coeff": "-1"}]}]
                ]},
                "caps": {"degree_cap": 1, "poly_cap": 2}}"#,
        )
        .unwrap();
        assert_eq!(s.seed, 5);
        let al = s.require_poisson().unwrap();
        assert_eq!(al.alpha.len(), 1);
        let st = s.require_star().unwrap();
        assert_eq!(st.pi.len(), 1);
        assert_eq!(crate::quantize::class_direction(st), al.alpha[0]);
        assert_eq!((s.degree_cap, s.poly_cap), (1, 2));
        // the non-Poisson guard
        let err = Scene::from_json(
            r#"{"schema": 1, "context": {"d": 3},
                "poisson": {"bivectors": [
                  {"order": 1, "terms": [
                    {"i": 1, "j": 2, "value": [{"exponents": [0, 0, 1], "coeff": "1"}]},
                    {"i": 1, "j": 3, "value": [{"exponents": [0, 1, 0], "coeff": "1"}]}
                  ]}]}}"#,
        )
        .unwrap_err();
        assert!(err.contains("not Poisson"), "{err}");
    }

    #[test]
    fn linfty_payload_builds_a_dgla_with_an_mc_direction() {
        let s = Scene::from_json(
            r#"{"schema": 1, "linfty": {
                "basis": [
                  {"name": "a0", "degree": 0},
                  {"name": "a1", "degree": 0, "filtration": 1},
                  {"name": "u", "degree": 1, "filtration": 1}
                ],
                "n_ar": 4,
                "differential": [{"on": "a1", "value": [{"to": "u", "coeff": "1"}]}],
                "bracket": [
                  {"left": "a0", "right": "a1", "value": [{"to": "a1", "coeff": "2"}]},
                  {"left": "a0", "right": "u", "value": [{"to": "u", "coeff": "2"}]}
                ],
                "mc": [{"to": "u", "coeff": "1"}]}}"#,
        )
        .unwrap();
        let lp = s.require_linfty().unwrap();
        assert!(check_linfty(&lp.space).is_empty());
        let mc = lp.mc.as_ref().unwrap();
        assert_eq!(mc.vector[2], rint(1));
        // wrong bracket order is rejected
        let err = Scene::from_json(
            r#"{"schema": 1, "linfty": {
                "basis": [{"name": "x", "degree": 0}, {"name": "y", "degree": 0}],
                "bracket": [{"left": "y", "right": "x", "value": []}]}}"#,
        )
        .unwrap_err();
        assert!(err.contains("earlier basis element"), "{err}");
    }
}
