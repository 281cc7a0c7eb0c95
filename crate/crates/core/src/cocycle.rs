//! The abelian dictionary between extensions of a finite groupoid over a
//! transversal and relative degree-2 cocycles on its embedding category:
//! extracting a cocycle from liftings, normalization, rebuilding the
//! extension `G(ξ)`, cohomology classes, and round trips.

use crate::bundle::EquivariantBundle;
use crate::category::{sections_presheaf, EmbeddingCategory, SectionsPresheaf};
use crate::cohomology::{category_complex, CategoryComplex, DegreeCohomology};
use crate::error::Error;
use crate::extension::{extensions_isomorphic, Extension};
use crate::groupoid::{FiniteGroupoid, GroupoidHom};
use std::collections::BTreeMap;

/// A relative 2-cochain: a section of `K` over `dom(second)` for every
/// composable pair of embedding arrows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelativeCocycle {
    pub values: BTreeMap<(usize, usize), BTreeMap<String, String>>,
}

/// A 1-cochain: a section of `K` over the domain of every arrow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneCochain {
    pub values: BTreeMap<usize, BTreeMap<String, String>>,
}

/// A choice of lifting `σ̃` through `π` for every embedding arrow:
/// per arrow, a map from domain points to arrows of the total groupoid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftingScheme {
    pub lifts: BTreeMap<usize, BTreeMap<String, String>>,
}

/// Everything needed to talk about classes: the embedding category, the
/// coefficient bundle with its action, the relative complex and its `H²`.
pub struct ClassificationContext {
    pub emb: EmbeddingCategory,
    pub coeff: EquivariantBundle,
    pub sections: SectionsPresheaf,
    pub complex: CategoryComplex,
    pub h2: DegreeCohomology,
}

/// Builds the context for a coefficient system over the groupoid `E` of the
/// embedding category.
pub fn classification_context(
    emb: &EmbeddingCategory,
    coeff: &EquivariantBundle,
) -> Result<ClassificationContext, Error> {
    if coeff.groupoid != emb.groupoid {
        return Err(Error::precondition("coefficient action must live on the embedded groupoid"));
    }
    let sections = sections_presheaf(coeff, emb)?;
    let complex =
        category_complex(&emb.cat, &sections.presheaf, Some(&emb.unit_subcategory()), 3)?;
    let h2 = complex.complex.cohomology(2);
    Ok(ClassificationContext {
        emb: emb.clone(),
        coeff: coeff.clone(),
        sections,
        complex,
        h2,
    })
}

impl ClassificationContext {
    fn fiber_mul(&self, x: &str, a: &str, b: &str) -> String {
        self.coeff.bundle.fiber(x).mul_elem(a, b).expect("fiber elements").to_string()
    }

    fn fiber_inv(&self, x: &str, a: &str) -> String {
        let k = self.coeff.bundle.fiber(x);
        k.element(k.inv_idx(k.index_of(a).expect("fiber element"))).to_string()
    }

    fn fiber_unit(&self, x: &str) -> String {
        self.coeff.bundle.fiber(x).identity().to_string()
    }

    /// `(a·σ)(x) = a(tσ(x))·σ(x)` — restriction of a section along an arrow.
    fn restrict_section(
        &self,
        a: &BTreeMap<String, String>,
        sigma: usize,
    ) -> BTreeMap<String, String> {
        let sec = &self.emb.sections[sigma];
        sec.section
            .iter()
            .map(|(x, arrow)| {
                let y = self.emb.target_at(sigma, x);
                let moved = self.coeff.action.act(&a[y], arrow).expect("action entry");
                (x.clone(), moved.to_string())
            })
            .collect()
    }

    /// All composable pairs of the embedding category.
    pub fn composable_pairs(&self) -> Vec<(usize, usize)> {
        let cat = &self.emb.cat;
        let mut out = Vec::new();
        for a in 0..cat.arrows.len() {
            for b in 0..cat.arrows.len() {
                if cat.compose_idx(a, b).is_some() {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Cocycle identity and relativity on the unit subcategory.
    pub fn validate_cocycle(&self, xi: &RelativeCocycle) -> Result<(), Error> {
        let cat = &self.emb.cat;
        for (a, b) in self.composable_pairs() {
            let v = xi
                .values
                .get(&(a, b))
                .ok_or_else(|| Error::invalid(format!("cocycle misses pair ({a},{b})")))?;
            let dom = cat.arrows[b].dom;
            for x in &self.emb.basis[dom] {
                if !v.contains_key(x) {
                    return Err(Error::invalid(format!("cocycle value misses point {x}")));
                }
            }
            if self.emb.unit_arrows.contains(&a) && self.emb.unit_arrows.contains(&b) {
                for (x, val) in v {
                    if *val != self.fiber_unit(x) {
                        return Err(Error::invalid(format!(
                            "relativity fails at unit pair ({a},{b}) over {x}"
                        )));
                    }
                }
            }
        }
        // ξ(ρ,στ)·ξ(σ,τ) = ξ(ρσ,τ)·(ξ(ρ,σ)·τ)
        for rho in 0..cat.arrows.len() {
            for sig in 0..cat.arrows.len() {
                let Some(rs) = cat.compose_idx(rho, sig) else { continue };
                for tau in 0..cat.arrows.len() {
                    let Some(st) = cat.compose_idx(sig, tau) else { continue };
                    let dom = cat.arrows[tau].dom;
                    for x in self.emb.basis[dom].clone() {
                        let lhs = self.fiber_mul(
                            &x,
                            &xi.values[&(rho, st)][&x],
                            &xi.values[&(sig, tau)][&x],
                        );
                        let moved = self.restrict_section(&xi.values[&(rho, sig)], tau);
                        let rhs = self.fiber_mul(&x, &xi.values[&(rs, tau)][&x], &moved[&x]);
                        if lhs != rhs {
                            return Err(Error::invalid(format!(
                                "cocycle identity fails at triple ({rho},{sig},{tau}) over {x}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Does the cocycle vanish whenever the first argument is a unit section?
    pub fn is_normal(&self, xi: &RelativeCocycle) -> bool {
        self.composable_pairs().iter().all(|&(a, b)| {
            !self.emb.unit_arrows.contains(&a)
                || xi.values[&(a, b)].iter().all(|(x, v)| *v == self.fiber_unit(x))
        })
    }

    /// ξ as a coordinate vector of the relative complex.
    pub fn cocycle_vector(&self, xi: &RelativeCocycle) -> Vec<i128> {
        let mut c = crate::cohomology::Cochain { degree: 2, values: BTreeMap::new() };
        for (&(a, b), v) in &xi.values {
            let dom = self.emb.cat.arrows[b].dom;
            c.values.insert(vec![a, b], self.sections.layouts[dom].coords(v));
        }
        self.complex.to_vector(&c)
    }

    pub fn cocycle_from_vector(&self, v: &[i128]) -> RelativeCocycle {
        let c = self.complex.from_vector(2, v);
        let mut values = BTreeMap::new();
        for (a, b) in self.composable_pairs() {
            let dom = self.emb.cat.arrows[b].dom;
            let coords = c
                .values
                .get(&vec![a, b])
                .cloned()
                .unwrap_or_else(|| vec![0; self.sections.layouts[dom].rank]);
            values.insert((a, b), self.sections.layouts[dom].section(&coords));
        }
        RelativeCocycle { values }
    }

    pub fn one_cochain_vector(&self, g: &OneCochain) -> Vec<i128> {
        let mut c = crate::cohomology::Cochain { degree: 1, values: BTreeMap::new() };
        for (&a, v) in &g.values {
            let dom = self.emb.cat.arrows[a].dom;
            c.values.insert(vec![a], self.sections.layouts[dom].coords(v));
        }
        self.complex.to_vector(&c)
    }

    pub fn one_cochain_from_vector(&self, v: &[i128]) -> OneCochain {
        let c = self.complex.from_vector(1, v);
        let mut values = BTreeMap::new();
        for a in 0..self.emb.cat.arrows.len() {
            let dom = self.emb.cat.arrows[a].dom;
            let coords = c
                .values
                .get(&vec![a])
                .cloned()
                .unwrap_or_else(|| vec![0; self.sections.layouts[dom].rank]);
            values.insert(a, self.sections.layouts[dom].section(&coords));
        }
        OneCochain { values }
    }

    /// The class of a cocycle in `Ȟ²(𝓔, 𝓔_u; K̲)`.
    pub fn class_of(&self, xi: &RelativeCocycle) -> Result<Vec<i128>, Error> {
        self.h2
            .project(&self.cocycle_vector(xi))
            .ok_or_else(|| Error::invalid("not a relative cocycle"))
    }

    /// A coboundary witness `g` with `ζ(τ,σ) = g(τσ)⁻¹ ξ(τ,σ) (g(τ)·σ) g(σ)`,
    /// when the two cocycles are cohomologous.
    pub fn cocycles_cohomologous(
        &self,
        xi: &RelativeCocycle,
        zeta: &RelativeCocycle,
    ) -> Option<OneCochain> {
        let vx = self.cocycle_vector(xi);
        let vz = self.cocycle_vector(zeta);
        let diff: Vec<i128> = vz.iter().zip(&vx).map(|(a, b)| a - b).collect();
        let w = self.complex.complex.coboundary_witness(2, &diff)?;
        Some(self.one_cochain_from_vector(&w))
    }

    /// Applies the coboundary of `g` to ξ: `ξ'(τ,σ) = g(τσ)⁻¹ξ(τ,σ)(g(τ)·σ)g(σ)`.
    pub fn perturb_by_coboundary(&self, xi: &RelativeCocycle, g: &OneCochain) -> RelativeCocycle {
        let cat = &self.emb.cat;
        let mut values = BTreeMap::new();
        for (&(a, b), v) in &xi.values {
            let ab = cat.compose_arrows(a, b);
            let moved = self.restrict_section(&g.values[&a], b);
            let out: BTreeMap<String, String> = v
                .iter()
                .map(|(x, val)| {
                    let mut acc = self.fiber_inv(x, &g.values[&ab][x]);
                    acc = self.fiber_mul(x, &acc, val);
                    acc = self.fiber_mul(x, &acc, &moved[x]);
                    acc = self.fiber_mul(x, &acc, &g.values[&b][x]);
                    (x.clone(), acc)
                })
                .collect();
            values.insert((a, b), out);
        }
        RelativeCocycle { values }
    }
}

/// The normalized lifting scheme for an extension: factor every arrow as a
/// unit inclusion after an isomorphism, lift each isomorphism once by taking
/// the least-id arrow in each fiber, and lift unit sections to units.
pub fn default_liftings(ext: &Extension, emb: &EmbeddingCategory) -> Result<LiftingScheme, Error> {
    if ext.base != emb.groupoid {
        return Err(Error::precondition("embedding category must approximate the base"));
    }
    let g = &ext.total;
    // lift of each isomorphism arrow, chosen pointwise by least arrow id
    let mut iso_lift: BTreeMap<usize, BTreeMap<String, String>> = BTreeMap::new();
    let mut lifts = BTreeMap::new();
    for a in 0..emb.cat.arrows.len() {
        let (_, iso) = emb.iso_part(a)?;
        let lift0 = iso_lift.entry(iso).or_insert_with(|| {
            emb.sections[iso]
                .section
                .iter()
                .map(|(x, earr)| {
                    if Some(earr.as_str()) == emb.groupoid.unit_of(x) {
                        // unit sections lift to unit arrows
                        return (x.clone(), g.unit_of(x).unwrap().to_string());
                    }
                    let e = emb.groupoid.arrow_index(earr).unwrap();
                    let lifted = ext.fiber(e)[0];
                    (x.clone(), g.arrow(lifted).id.clone())
                })
                .collect()
        });
        lifts.insert(a, lift0.clone());
    }
    Ok(LiftingScheme { lifts })
}

/// Validates a lifting scheme: `π ∘ σ̃ = σ` pointwise.
pub fn validate_liftings(
    ext: &Extension,
    emb: &EmbeddingCategory,
    scheme: &LiftingScheme,
) -> Result<(), Error> {
    for a in 0..emb.cat.arrows.len() {
        let sec = &emb.sections[a];
        let lift = scheme
            .lifts
            .get(&a)
            .ok_or_else(|| Error::invalid(format!("no lift for arrow {a}")))?;
        for (x, earr) in &sec.section {
            let lifted = lift
                .get(x)
                .ok_or_else(|| Error::invalid(format!("lift of arrow {a} misses {x}")))?;
            if &ext.proj.arr_map[lifted] != earr {
                return Err(Error::precondition(format!(
                    "lift of arrow {a} at {x} does not cover π"
                )));
            }
        }
    }
    Ok(())
}

/// `c(σ₁,σ₂)(x) = (σ₁σ₂)~(x)⁻¹ · σ̃₁(tσ₂x) · σ̃₂(x)`, pulled back through `j`.
pub fn extension_to_cocycle(
    ctx: &ClassificationContext,
    ext: &Extension,
    scheme: &LiftingScheme,
) -> Result<RelativeCocycle, Error> {
    validate_liftings(ext, &ctx.emb, scheme)?;
    let g = &ext.total;
    let cat = &ctx.emb.cat;
    let mut values = BTreeMap::new();
    for (a, b) in ctx.composable_pairs() {
        let ab = cat.compose_arrows(a, b);
        let mut v = BTreeMap::new();
        for x in ctx.emb.basis[cat.arrows[b].dom].clone() {
            let y = ctx.emb.target_at(b, &x).to_string();
            let l_ab = g.arrow_index(&scheme.lifts[&ab][&x]).unwrap();
            let l_a = g.arrow_index(&scheme.lifts[&a][&y]).unwrap();
            let l_b = g.arrow_index(&scheme.lifts[&b][&x]).unwrap();
            let prod = g.compose_arrows(g.compose_arrows(g.inverse_arrow(l_ab), l_a), l_b);
            let prod_id = &g.arrow(prod).id;
            let k = ext.embed[&x]
                .iter()
                .find(|(_, arr)| *arr == prod_id)
                .map(|(el, _)| el.clone())
                .ok_or_else(|| Error::invalid("cocycle value left the kernel"))?;
            v.insert(x, k);
        }
        values.insert((a, b), v);
    }
    let xi = RelativeCocycle { values };
    ctx.validate_cocycle(&xi)?;
    Ok(xi)
}

/// Normalizes a relative cocycle via `g(σ) = ξ(i, σ₀)`; the result vanishes
/// whenever the first argument is a unit section and is cohomologous to the
/// input by construction.
pub fn normalize_cocycle(
    ctx: &ClassificationContext,
    xi: &RelativeCocycle,
) -> Result<(RelativeCocycle, OneCochain), Error> {
    ctx.validate_cocycle(xi)?;
    let mut g_values = BTreeMap::new();
    for a in 0..ctx.emb.cat.arrows.len() {
        let (incl, iso) = ctx.emb.iso_part(a)?;
        g_values.insert(a, xi.values[&(incl, iso)].clone());
    }
    let g = OneCochain { values: g_values };
    // ξ̂ = ξ twisted by the coboundary of g⁻¹: ξ̂(τ,σ) = g(τσ)⁻¹ξ(τ,σ)(g(τ)·σ)g(σ)
    let hat = ctx.perturb_by_coboundary(xi, &g);
    if !ctx.is_normal(&hat) {
        return Err(Error::invalid("normalization did not produce a normal cocycle"));
    }
    ctx.validate_cocycle(&hat)?;
    Ok((hat, g))
}

/// The extension `G(ξ)` of a normal relative cocycle, together with the
/// canonical liftings `σ̃(x) = [σ₀, 1ₓ]` that reproduce ξ on the nose.
pub fn cocycle_to_extension(
    ctx: &ClassificationContext,
    xi: &RelativeCocycle,
) -> Result<(Extension, LiftingScheme), Error> {
    ctx.validate_cocycle(xi)?;
    if !ctx.is_normal(xi) {
        return Err(Error::precondition("G(ξ) needs a normal cocycle"));
    }
    let e = &ctx.emb.groupoid;
    let k = &ctx.coeff.bundle;
    // singleton isomorphisms of the category correspond to arrows of E
    let sing_iso = |earr: usize| -> usize {
        let x = e.object(e.src_idx(earr)).to_string();
        let y = e.object(e.tgt_idx(earr)).to_string();
        let dom = ctx.emb.basis.iter().position(|b| b.len() == 1 && b.contains(&x)).unwrap();
        let cod = ctx.emb.basis.iter().position(|b| b.len() == 1 && b.contains(&y)).unwrap();
        let section: BTreeMap<String, String> = [(x, e.arrow(earr).id.clone())].into();
        ctx.emb.find_arrow(dom, cod, &section).expect("basis contains singletons")
    };
    let aid =
        |earr: usize, kel: &str| format!("[{}|{}]", e.arrow(earr).id, kel);
    let mut arrows = Vec::new();
    for earr in 0..e.arrow_count() {
        let x = e.object(e.src_idx(earr));
        let y = e.object(e.tgt_idx(earr));
        for kel in k.fiber(x).elements() {
            arrows.push((aid(earr, kel), x.to_string(), y.to_string()));
        }
    }
    let mut compose = Vec::new();
    for e2 in 0..e.arrow_count() {
        for e1 in 0..e.arrow_count() {
            let Some(e21) = e.compose_idx(e2, e1) else { continue };
            let x = e.object(e.src_idx(e1)).to_string();
            let tau = sing_iso(e2);
            let sigma = sing_iso(e1);
            let xi_val = &xi.values[&(tau, sigma)][&x];
            let kx = k.fiber(&x);
            for l in k.fiber(e.object(e.src_idx(e2))).elements() {
                // [τ,l]∘[σ,k] = [τσ, ξ(τ,σ)(x)·(l·σ(x))·k]
                let l_moved = ctx.coeff.action.act(l, &e.arrow(e1).id).expect("action entry");
                for kel in kx.elements() {
                    let mut acc = xi_val.clone();
                    acc = kx.mul_elem(&acc, l_moved).unwrap().to_string();
                    acc = kx.mul_elem(&acc, kel).unwrap().to_string();
                    compose.push((aid(e2, l), aid(e1, kel), aid(e21, &acc)));
                }
            }
        }
    }
    let units: BTreeMap<String, String> = e
        .objects()
        .iter()
        .map(|x| {
            let u = e.arrow_index(e.unit_of(x).unwrap()).unwrap();
            (x.clone(), aid(u, &ctx.fiber_unit(x)))
        })
        .collect();
    let total = FiniteGroupoid::from_tables(e.objects().to_vec(), arrows, &compose, &units)?;
    let embed: BTreeMap<String, BTreeMap<String, String>> = e
        .objects()
        .iter()
        .map(|x| {
            let u = e.arrow_index(e.unit_of(x).unwrap()).unwrap();
            (
                x.clone(),
                k.fiber(x).elements().iter().map(|kel| (kel.clone(), aid(u, kel))).collect(),
            )
        })
        .collect();
    let proj = GroupoidHom {
        obj_map: e.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
        arr_map: (0..e.arrow_count())
            .flat_map(|earr| {
                let x = e.object(e.src_idx(earr)).to_string();
                let eid = e.arrow(earr).id.clone();
                k.fiber(&x)
                    .elements()
                    .iter()
                    .map(move |kel| (aid(earr, kel), eid.clone()))
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    let ext = Extension { bundle: k.clone(), total, base: e.clone(), embed, proj };
    // canonical liftings: σ̃(x) = [σ₀, 1ₓ], expressed on the singleton
    // restriction: [σ₀|ₓ, ξ(σ₀, i_x)(x)]
    let mut lifts = BTreeMap::new();
    for a in 0..ctx.emb.cat.arrows.len() {
        let (_, iso) = ctx.emb.iso_part(a)?;
        let mut per_point = BTreeMap::new();
        for x in ctx.emb.basis[ctx.emb.cat.arrows[a].dom].clone() {
            let incl_x = ctx.emb.singleton_inclusion(ctx.emb.cat.arrows[iso].dom, &x);
            let iso_x = ctx.emb.singleton_restriction(iso, &x);
            let _ = iso_x;
            let kval = xi.values[&(iso, incl_x)][&x].clone();
            let earr = ctx.emb.value_at(iso, &x);
            per_point.insert(x, aid(earr, &kval));
        }
        lifts.insert(a, per_point);
    }
    Ok((ext, LiftingScheme { lifts }))
}

/// Round-trip report for one extension: extension → cocycle → extension up
/// to isomorphism, and cocycle → extension → cocycle on the nose.
#[derive(Debug)]
pub struct RoundtripReport {
    pub extension_recovered: bool,
    pub cocycle_identical: bool,
}

impl RoundtripReport {
    pub fn ok(&self) -> bool {
        self.extension_recovered && self.cocycle_identical
    }
}

pub fn roundtrip_check(ctx: &ClassificationContext, ext: &Extension) -> Result<RoundtripReport, Error> {
    let scheme = default_liftings(ext, &ctx.emb)?;
    let xi = extension_to_cocycle(ctx, ext, &scheme)?;
    if !ctx.is_normal(&xi) {
        return Err(Error::invalid("normalized lifting scheme must produce a normal cocycle"));
    }
    let (rebuilt, canonical) = cocycle_to_extension(ctx, &xi)?;
    let extension_recovered = extensions_isomorphic(&rebuilt, ext).is_some();
    let zeta = extension_to_cocycle(ctx, &rebuilt, &canonical)?;
    let cocycle_identical = zeta == xi;
    Ok(RoundtripReport { extension_recovered, cocycle_identical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{ActionData, GroupBundle};
    use crate::category::{build_embedding_category, default_basis};
    use crate::extension::{baer_sum, enumerate_extension_classes, semidirect_unit};
    use crate::group::FiniteGroup;

    fn trivial_ctx(n: usize, m: usize) -> ClassificationContext {
        let e = FiniteGroupoid::delooping(&FiniteGroup::cyclic(n));
        let k = GroupBundle::constant(vec!["*".into()], FiniteGroup::cyclic(m));
        let mu = ActionData::trivial(&e, &k).unwrap();
        let coeff = EquivariantBundle::new(e.clone(), k, mu).unwrap();
        let emb = build_embedding_category(&e, &default_basis(&e)).unwrap();
        classification_context(&emb, &coeff).unwrap()
    }

    fn cyclic_ext(n: usize, m: usize) -> Extension {
        // reuse the extension-module fixture through its public pieces
        let g = FiniteGroupoid::delooping(&FiniteGroup::cyclic(n * m));
        let e = FiniteGroupoid::delooping(&FiniteGroup::cyclic(n));
        let k = GroupBundle::constant(vec!["*".into()], FiniteGroup::cyclic(m));
        let embed: BTreeMap<String, BTreeMap<String, String>> = [(
            "*".to_string(),
            (0..m).map(|i| (i.to_string(), (i * n).to_string())).collect(),
        )]
        .into();
        let proj = GroupoidHom {
            obj_map: [("*".to_string(), "*".to_string())].into(),
            arr_map: (0..n * m).map(|i| (i.to_string(), (i % n).to_string())).collect(),
        };
        Extension { bundle: k, total: g, base: e, embed, proj }
    }

    #[test]
    fn semidirect_has_trivial_cocycle_and_class() {
        let ctx = trivial_ctx(2, 2);
        let ext = semidirect_unit(&ctx.coeff);
        let scheme = default_liftings(&ext, &ctx.emb).unwrap();
        let xi = extension_to_cocycle(&ctx, &ext, &scheme).unwrap();
        // canonical liftings of the split extension multiply on the nose
        assert!(xi
            .values
            .values()
            .all(|v| v.iter().all(|(x, k)| *k == ctx.fiber_unit(x))));
        assert!(ctx.h2.h.is_zero(&ctx.class_of(&xi).unwrap()));
    }

    #[test]
    fn z4_fixture_has_nontrivial_class() {
        let ctx = trivial_ctx(2, 2);
        let ext = cyclic_ext(2, 2);
        let scheme = default_liftings(&ext, &ctx.emb).unwrap();
        let xi = extension_to_cocycle(&ctx, &ext, &scheme).unwrap();
        let class = ctx.class_of(&xi).unwrap();
        assert!(!ctx.h2.h.is_zero(&class));
        assert_eq!(ctx.h2.h.order(), 2);
    }

    #[test]
    fn lifting_independence_up_to_coboundary() {
        // over Z/3 coefficients the perturbation is not 2-torsion, so the
        // two lifting choices give visibly different cocycles
        let ctx = trivial_ctx(3, 3);
        let ext = cyclic_ext(3, 3);
        let scheme = default_liftings(&ext, &ctx.emb).unwrap();
        let xi = extension_to_cocycle(&ctx, &ext, &scheme).unwrap();
        let mut other = scheme.clone();
        let gen = ctx
            .emb
            .sections
            .iter()
            .position(|s| s.section.values().any(|a| a == "1"))
            .unwrap();
        let lifted = other.lifts.get_mut(&gen).unwrap();
        let old = ext.total.arrow_index(&lifted["*"]).unwrap();
        let j1 = ext.embed_arrow("*", "1");
        let new = ext.total.compose_arrows(j1, old);
        lifted.insert("*".to_string(), ext.total.arrow(new).id.clone());
        let zeta = extension_to_cocycle(&ctx, &ext, &other).unwrap();
        assert_ne!(xi, zeta);
        let witness = ctx.cocycles_cohomologous(&xi, &zeta).expect("same class");
        // applying the witness to ξ reproduces ζ
        let perturbed = ctx.perturb_by_coboundary(&xi, &witness);
        assert_eq!(perturbed, zeta);
        assert_eq!(ctx.class_of(&xi).unwrap(), ctx.class_of(&zeta).unwrap());
    }

    #[test]
    fn normalization_identities_hold() {
        // build a non-normal cocycle by perturbing a normal one, normalize,
        // and check (17) ζ(jσ,τ)=ζ(σ,τ), (18) ζ(σ,1)=1, (19)
        // ζ(σ,σ⁻¹)·σ = ζ(σ⁻¹,σ)
        let ctx = trivial_ctx(2, 2);
        let ext = cyclic_ext(2, 2);
        let scheme = default_liftings(&ext, &ctx.emb).unwrap();
        let xi = extension_to_cocycle(&ctx, &ext, &scheme).unwrap();
        // a 1-cochain supported on the flip perturbs ξ off normal form;
        // with a one-object basis normality is preserved, so also test the
        // already-normal path
        let (hat, _g) = normalize_cocycle(&ctx, &xi).unwrap();
        assert!(ctx.is_normal(&hat));
        assert_eq!(ctx.class_of(&hat).unwrap(), ctx.class_of(&xi).unwrap());
        let cat = &ctx.emb.cat;
        for (a, b) in ctx.composable_pairs() {
            // (18): ζ(σ, 1) = 1
            if (0..cat.objects.len()).any(|o| cat.identity_of(o) == b) {
                assert!(hat.values[&(a, b)].iter().all(|(x, v)| *v == ctx.fiber_unit(x)));
            }
            // (17): ζ(jσ, τ) = ζ(σ, τ) for unit j
            for &j in &ctx.emb.unit_arrows {
                if let Some(ja) = cat.compose_idx(j, a) {
                    assert_eq!(hat.values[&(ja, b)], hat.values[&(a, b)]);
                }
            }
            // (19): ζ(σ,σ⁻¹)·σ = ζ(σ⁻¹,σ)
            if let Some(ainv) = cat.inverse_of(a) {
                let moved = ctx.restrict_section(&hat.values[&(a, ainv)], a);
                assert_eq!(moved, hat.values[&(ainv, a)]);
            }
        }
    }

    #[test]
    fn g_xi_of_trivial_cocycle_is_semidirect() {
        let ctx = trivial_ctx(2, 2);
        let split = semidirect_unit(&ctx.coeff);
        let scheme = default_liftings(&split, &ctx.emb).unwrap();
        let xi = extension_to_cocycle(&ctx, &split, &scheme).unwrap();
        let (rebuilt, _) = cocycle_to_extension(&ctx, &xi).unwrap();
        assert!(rebuilt.validate().is_empty(), "{:?}", rebuilt.validate());
        assert!(extensions_isomorphic(&rebuilt, &split).is_some());
    }

    #[test]
    fn g_xi_of_nontrivial_class_is_z4() {
        let ctx = trivial_ctx(2, 2);
        let z4 = cyclic_ext(2, 2);
        let scheme = default_liftings(&z4, &ctx.emb).unwrap();
        let xi = extension_to_cocycle(&ctx, &z4, &scheme).unwrap();
        let (rebuilt, _) = cocycle_to_extension(&ctx, &xi).unwrap();
        assert!(rebuilt.validate().is_empty());
        assert!(extensions_isomorphic(&rebuilt, &z4).is_some());
        // the rebuilt total groupoid contains an order-4 arrow
        let (iso, _) = rebuilt.total.isotropy("*").unwrap();
        assert!((0..iso.order()).any(|a| iso.element_order(a) == 4));
    }

    #[test]
    fn cohomologous_cocycles_give_isomorphic_extensions() {
        let ctx = trivial_ctx(3, 3);
        let reps = ctx.h2.h.elements();
        for coords in reps {
            let vec = ctx.h2.representative(&coords);
            let xi = ctx.cocycle_from_vector(&vec);
            let (norm, _) = normalize_cocycle(&ctx, &xi).unwrap();
            // perturb by the coboundary of a nonzero 1-cochain
            let mut g_values = BTreeMap::new();
            for a in 0..ctx.emb.cat.arrows.len() {
                let dom = ctx.emb.cat.arrows[a].dom;
                let val = if ctx.emb.unit_arrows.contains(&a) { "0" } else { "1" };
                g_values.insert(
                    a,
                    ctx.emb.basis[dom].iter().map(|x| (x.clone(), val.to_string())).collect(),
                );
            }
            let g = OneCochain { values: g_values };
            let zeta = ctx.perturb_by_coboundary(&norm, &g);
            ctx.validate_cocycle(&zeta).unwrap();
            let (norm_zeta, _) = normalize_cocycle(&ctx, &zeta).unwrap();
            let (e1, _) = cocycle_to_extension(&ctx, &norm).unwrap();
            let (e2, _) = cocycle_to_extension(&ctx, &norm_zeta).unwrap();
            assert!(extensions_isomorphic(&e1, &e2).is_some());
        }
    }

    #[test]
    fn roundtrip_on_all_z2_and_z3_classes() {
        for (n, m) in [(2usize, 2usize), (3, 3)] {
            let ctx = trivial_ctx(n, m);
            for ext in enumerate_extension_classes(&ctx.coeff, 1 << 20).unwrap() {
                let report = roundtrip_check(&ctx, &ext).unwrap();
                assert!(report.ok(), "roundtrip failed for ({n},{m})");
            }
        }
    }

    #[test]
    fn class_map_is_additive_under_baer_sum() {
        let ctx = trivial_ctx(3, 3);
        let classes = enumerate_extension_classes(&ctx.coeff, 1 << 20).unwrap();
        let class_of_ext = |ext: &Extension| -> Vec<i128> {
            let scheme = default_liftings(ext, &ctx.emb).unwrap();
            let xi = extension_to_cocycle(&ctx, ext, &scheme).unwrap();
            ctx.class_of(&xi).unwrap()
        };
        for a in &classes {
            for b in &classes {
                let sum = baer_sum(a, b).unwrap();
                let expected = ctx.h2.h.add(&class_of_ext(a), &class_of_ext(b));
                assert_eq!(class_of_ext(&sum), expected);
            }
        }
    }

    #[test]
    fn counts_match_between_h2_and_enumeration() {
        for (n, m) in [(2usize, 2usize), (2, 3), (3, 2), (2, 4), (3, 3)] {
            let ctx = trivial_ctx(n, m);
            let count = enumerate_extension_classes(&ctx.coeff, 1 << 22).unwrap().len();
            assert_eq!(count as u128, ctx.h2.h.order(), "counts differ for ({n},{m})");
            let gcd = {
                let (mut a, mut b) = (n, m);
                while b != 0 {
                    (a, b) = (b, a % b);
                }
                a
            };
            assert_eq!(count, gcd);
        }
    }

    #[test]
    fn multi_object_roundtrip() {
        // transitive two-object base with isotropy Z/2, constant Z/2 kernel
        let e = FiniteGroupoid::transitive_with_isotropy(&["a", "b"], &FiniteGroup::cyclic(2));
        let k = GroupBundle::constant(e.objects().to_vec(), FiniteGroup::cyclic(2));
        let mu = ActionData::trivial(&e, &k).unwrap();
        let coeff = EquivariantBundle::new(e.clone(), k, mu).unwrap();
        let emb = build_embedding_category(&e, &crate::category::singleton_basis(&e)).unwrap();
        let ctx = classification_context(&emb, &coeff).unwrap();
        let split = semidirect_unit(&coeff);
        let report = roundtrip_check(&ctx, &split).unwrap();
        assert!(report.ok());
        // a Z/4-flavoured extension over the same base
        let g4 = FiniteGroupoid::transitive_with_isotropy(&["a", "b"], &FiniteGroup::cyclic(4));
        let embed: BTreeMap<String, BTreeMap<String, String>> = ["a", "b"]
            .iter()
            .map(|x| {
                (
                    x.to_string(),
                    [("0", "0"), ("1", "2")]
                        .iter()
                        .map(|(kel, g)| (kel.to_string(), format!("{x}<{x}:{g}")))
                        .collect(),
                )
            })
            .collect();
        let proj = GroupoidHom {
            obj_map: [("a", "a"), ("b", "b")]
                .iter()
                .map(|(x, y)| (x.to_string(), y.to_string()))
                .collect(),
            arr_map: g4
                .arrow_ids()
                .map(|id| {
                    // id looks like "y<x:k": project k mod 2
                    let (pre, kk) = id.rsplit_once(':').unwrap();
                    let k4: usize = kk.parse().unwrap();
                    (id.to_string(), format!("{pre}:{}", k4 % 2))
                })
                .collect(),
        };
        let ext4 = Extension { bundle: coeff.bundle.clone(), total: g4, base: e, embed, proj };
        assert!(ext4.validate().is_empty(), "{:?}", ext4.validate());
        let report = roundtrip_check(&ctx, &ext4).unwrap();
        assert!(report.ok());
        assert!(extensions_isomorphic(&ext4, &split).is_none());
    }
}
