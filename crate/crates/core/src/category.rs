//! Small categories, embedding categories of finite groupoids, and abelian
//! presheaves of sections.
//!
//! An embedding category has basis subsets of the object set as objects and
//! source-sections with injective target as arrows; its unit subcategory
//! consists of the unit sections between nested subsets. Over a finite
//! discrete object set every finite groupoid counts as étale, so these
//! categories are plain finite categories.

use crate::bundle::EquivariantBundle;
use crate::cohomology::FiniteAbelianGroup;
use crate::error::Error;
use crate::group::{abelian_structure, hom_matrix, AbelianStructure};
use crate::groupoid::FiniteGroupoid;
use crate::linalg::IntMat;
use itertools::Itertools;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatArrow {
    pub id: String,
    pub dom: usize,
    pub cod: usize,
}

/// A finite category given by a total composition table on composable pairs.
#[derive(Clone, PartialEq, Eq)]
pub struct SmallCategory {
    pub objects: Vec<String>,
    pub arrows: Vec<CatArrow>,
    compose: Vec<Option<usize>>,
    identity: Vec<usize>,
    arr_index: BTreeMap<String, usize>,
}

impl fmt::Debug for SmallCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmallCategory({} objects, {} arrows)", self.objects.len(), self.arrows.len())
    }
}

impl SmallCategory {
    pub fn new(
        objects: Vec<String>,
        arrows: Vec<CatArrow>,
        compose_entries: &[(usize, usize, usize)],
        identity: Vec<usize>,
    ) -> Result<SmallCategory, Error> {
        let n = arrows.len();
        let mut compose = vec![None; n * n];
        for &(g, h, gh) in compose_entries {
            compose[g * n + h] = Some(gh);
        }
        let arr_index = arrows.iter().enumerate().map(|(i, a)| (a.id.clone(), i)).collect();
        let cat = SmallCategory { objects, arrows, compose, identity, arr_index };
        cat.validate()?;
        Ok(cat)
    }

    /// `g ∘ h`, defined when `dom(g) = cod(h)`.
    pub fn compose_idx(&self, g: usize, h: usize) -> Option<usize> {
        self.compose[g * self.arrows.len() + h]
    }

    pub fn compose_arrows(&self, g: usize, h: usize) -> usize {
        self.compose_idx(g, h).expect("missing composition entry")
    }

    pub fn identity_of(&self, obj: usize) -> usize {
        self.identity[obj]
    }

    pub fn arrow_index(&self, id: &str) -> Option<usize> {
        self.arr_index.get(id).copied()
    }

    pub fn validate(&self) -> Result<(), Error> {
        let n = self.arrows.len();
        for (o, &i) in self.identity.iter().enumerate() {
            if self.arrows[i].dom != o || self.arrows[i].cod != o {
                return Err(Error::invalid(format!("identity of object {o} has wrong endpoints")));
            }
        }
        for g in 0..n {
            for h in 0..n {
                let composable = self.arrows[g].dom == self.arrows[h].cod;
                match self.compose_idx(g, h) {
                    Some(gh) => {
                        if !composable {
                            return Err(Error::invalid(format!(
                                "composition defined on non-composable ({},{})",
                                self.arrows[g].id, self.arrows[h].id
                            )));
                        }
                        if self.arrows[gh].dom != self.arrows[h].dom
                            || self.arrows[gh].cod != self.arrows[g].cod
                        {
                            return Err(Error::invalid("composite has wrong endpoints".to_string()));
                        }
                    }
                    None if composable => {
                        return Err(Error::invalid(format!(
                            "missing composition for ({},{})",
                            self.arrows[g].id, self.arrows[h].id
                        )))
                    }
                    None => {}
                }
            }
        }
        for g in 0..n {
            let (d, c) = (self.arrows[g].dom, self.arrows[g].cod);
            if self.compose_idx(g, self.identity[d]) != Some(g)
                || self.compose_idx(self.identity[c], g) != Some(g)
            {
                return Err(Error::invalid(format!("identity law fails at {}", self.arrows[g].id)));
            }
        }
        for g in 0..n {
            for h in 0..n {
                for k in 0..n {
                    if self.arrows[g].dom == self.arrows[h].cod
                        && self.arrows[h].dom == self.arrows[k].cod
                    {
                        let a = self.compose_idx(self.compose_arrows(g, h), k);
                        let b = self.compose_idx(g, self.compose_arrows(h, k));
                        if a != b {
                            return Err(Error::invalid(format!(
                                "associativity fails at ({},{},{})",
                                self.arrows[g].id, self.arrows[h].id, self.arrows[k].id
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// All composable strings `(σ1,…,σn)` with `dom σ_i = cod σ_{i+1}`;
    /// a degree-0 string is an object.
    pub fn strings(&self, n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return (0..self.objects.len()).map(|o| vec![o]).collect();
        }
        let mut out: Vec<Vec<usize>> = (0..self.arrows.len()).map(|a| vec![a]).collect();
        for _ in 1..n {
            let mut next = Vec::new();
            for s in out {
                let last = *s.last().unwrap();
                for a in 0..self.arrows.len() {
                    if self.arrows[last].dom == self.arrows[a].cod {
                        let mut t = s.clone();
                        t.push(a);
                        next.push(t);
                    }
                }
            }
            out = next;
        }
        out
    }

    /// Is the arrow an isomorphism, and if so what is its inverse?
    pub fn inverse_of(&self, a: usize) -> Option<usize> {
        let (d, c) = (self.arrows[a].dom, self.arrows[a].cod);
        (0..self.arrows.len()).find(|&b| {
            self.arrows[b].dom == c
                && self.arrows[b].cod == d
                && self.compose_idx(a, b) == Some(self.identity[c])
                && self.compose_idx(b, a) == Some(self.identity[d])
        })
    }
}

/// A subcategory, selected by object and arrow indices, validated closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubCategory {
    pub objects: BTreeSet<usize>,
    pub arrows: BTreeSet<usize>,
}

impl SubCategory {
    pub fn validate(&self, cat: &SmallCategory) -> Result<(), Error> {
        for &a in &self.arrows {
            if !self.objects.contains(&cat.arrows[a].dom) || !self.objects.contains(&cat.arrows[a].cod) {
                return Err(Error::invalid("subcategory arrow endpoints outside object set"));
            }
        }
        for &o in &self.objects {
            if !self.arrows.contains(&cat.identity_of(o)) {
                return Err(Error::invalid("subcategory misses an identity"));
            }
        }
        for &a in &self.arrows {
            for &b in &self.arrows {
                if let Some(ab) = cat.compose_idx(a, b) {
                    if !self.arrows.contains(&ab) {
                        return Err(Error::invalid("subcategory not closed under composition"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains_string(&self, string: &[usize], degree_zero: bool) -> bool {
        if degree_zero {
            return string.iter().all(|o| self.objects.contains(o));
        }
        string.iter().all(|a| self.arrows.contains(a))
    }
}

/// One embedding arrow: a source-section of `E` over `dom` with injective
/// target landing in `cod`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddingArrow {
    pub dom: usize,
    pub cod: usize,
    /// object of `dom` → arrow id of `E`.
    pub section: BTreeMap<String, String>,
}

/// The embedding category of a groupoid `E` over a basis of subsets of its
/// object set, with the unit subcategory marked.
#[derive(Clone, Debug)]
pub struct EmbeddingCategory {
    pub groupoid: FiniteGroupoid,
    pub basis: Vec<BTreeSet<String>>,
    pub cat: SmallCategory,
    pub sections: Vec<EmbeddingArrow>,
    pub unit_arrows: BTreeSet<usize>,
}

/// The default basis: all nonempty subsets when the object set is small,
/// singletons otherwise.
pub fn default_basis(e: &FiniteGroupoid) -> Vec<BTreeSet<String>> {
    let objs = e.objects();
    if objs.len() <= 4 {
        let mut out = Vec::new();
        for mask in 1u32..(1 << objs.len()) {
            let set: BTreeSet<String> = objs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, o)| o.clone())
                .collect();
            out.push(set);
        }
        out.sort_by_key(|s| (s.len(), s.iter().cloned().collect::<Vec<_>>()));
        out
    } else {
        objs.iter().map(|o| BTreeSet::from([o.clone()])).collect()
    }
}

pub fn singleton_basis(e: &FiniteGroupoid) -> Vec<BTreeSet<String>> {
    e.objects().iter().map(|o| BTreeSet::from([o.clone()])).collect()
}

fn basis_label(set: &BTreeSet<String>) -> String {
    format!("{{{}}}", set.iter().cloned().collect::<Vec<_>>().join(","))
}

fn section_label(dom: &BTreeSet<String>, cod: &BTreeSet<String>, sec: &BTreeMap<String, String>) -> String {
    let body: Vec<String> = sec.iter().map(|(x, a)| format!("{x}:{a}")).collect();
    format!("{}->{}[{}]", basis_label(dom), basis_label(cod), body.join(","))
}

/// Builds the full embedding category over the given basis. The basis must
/// cover the objects and contain every singleton.
pub fn build_embedding_category(
    e: &FiniteGroupoid,
    basis: &[BTreeSet<String>],
) -> Result<EmbeddingCategory, Error> {
    let mut covered: BTreeSet<&String> = BTreeSet::new();
    for set in basis {
        for o in set {
            if e.object_index(o).is_none() {
                return Err(Error::invalid(format!("basis element contains unknown object {o}")));
            }
            covered.insert(o);
        }
    }
    if covered.len() != e.objects().len() {
        return Err(Error::precondition("basis does not cover the object set"));
    }
    for o in e.objects() {
        if !basis.iter().any(|s| s.len() == 1 && s.contains(o)) {
            return Err(Error::precondition(format!("basis misses the singleton at {o}")));
        }
    }
    let mut basis: Vec<BTreeSet<String>> = basis.to_vec();
    basis.sort_by_key(|s| (s.len(), s.iter().cloned().collect::<Vec<_>>()));
    basis.dedup();

    let mut sections: Vec<EmbeddingArrow> = Vec::new();
    for (d, dset) in basis.iter().enumerate() {
        for (c, cset) in basis.iter().enumerate() {
            // all sections x ∈ dset ↦ arrow out of x with target in cset,
            // targets pairwise distinct
            let per_point: Vec<Vec<(String, usize)>> = dset
                .iter()
                .map(|x| {
                    let ix = e.object_index(x).unwrap();
                    (0..e.arrow_count())
                        .filter(|&a| e.src_idx(a) == ix && cset.contains(e.object(e.tgt_idx(a))))
                        .map(|a| (x.clone(), a))
                        .collect()
                })
                .collect();
            if per_point.iter().any(Vec::is_empty) {
                continue;
            }
            for combo in per_point.iter().multi_cartesian_product() {
                let targets: BTreeSet<usize> = combo.iter().map(|(_, a)| e.tgt_idx(*a)).collect();
                if targets.len() != combo.len() {
                    continue;
                }
                let section: BTreeMap<String, String> =
                    combo.iter().map(|(x, a)| (x.clone(), e.arrow(*a).id.clone())).collect();
                sections.push(EmbeddingArrow { dom: d, cod: c, section });
            }
        }
    }
    sections.sort_by_key(|s| section_label(&basis[s.dom], &basis[s.cod], &s.section));

    let objects: Vec<String> = basis.iter().map(basis_label).collect();
    let arrows: Vec<CatArrow> = sections
        .iter()
        .map(|s| CatArrow {
            id: section_label(&basis[s.dom], &basis[s.cod], &s.section),
            dom: s.dom,
            cod: s.cod,
        })
        .collect();
    let lookup: BTreeMap<(usize, usize, Vec<(String, String)>), usize> = sections
        .iter()
        .enumerate()
        .map(|(i, s)| ((s.dom, s.cod, s.section.clone().into_iter().collect()), i))
        .collect();

    let mut compose_entries = Vec::new();
    for (gt, tau) in sections.iter().enumerate() {
        for (gs, sigma) in sections.iter().enumerate() {
            if tau.dom != sigma.cod {
                continue;
            }
            // (τ∘σ)(x) = τ(tσ(x)) ∘ σ(x)
            let mut section = BTreeMap::new();
            for (x, aid) in &sigma.section {
                let a = e.arrow_index(aid).unwrap();
                let mid = e.object(e.tgt_idx(a)).to_string();
                let b = e.arrow_index(&tau.section[&mid]).unwrap();
                let comp = e.compose_arrows(b, a);
                section.insert(x.clone(), e.arrow(comp).id.clone());
            }
            let key = (sigma.dom, tau.cod, section.into_iter().collect::<Vec<_>>());
            let composite = *lookup.get(&key).expect("embedding category closed under composition");
            compose_entries.push((gt, gs, composite));
        }
    }
    let identity: Vec<usize> = basis
        .iter()
        .enumerate()
        .map(|(i, set)| {
            let section: Vec<(String, String)> =
                set.iter().map(|x| (x.clone(), e.unit_of(x).unwrap().to_string())).collect();
            lookup[&(i, i, section)]
        })
        .collect();
    let cat = SmallCategory::new(objects, arrows, &compose_entries, identity)?;

    let unit_arrows: BTreeSet<usize> = sections
        .iter()
        .enumerate()
        .filter(|(_, s)| s.section.iter().all(|(x, a)| e.unit_of(x) == Some(a.as_str())))
        .map(|(i, _)| i)
        .collect();
    Ok(EmbeddingCategory { groupoid: e.clone(), basis, cat, sections, unit_arrows })
}

impl EmbeddingCategory {
    /// The unit subcategory `𝓔_u`.
    pub fn unit_subcategory(&self) -> SubCategory {
        SubCategory {
            objects: (0..self.basis.len()).collect(),
            arrows: self.unit_arrows.clone(),
        }
    }

    /// Target point of the section `arrow` at `x`.
    pub fn target_at(&self, arrow: usize, x: &str) -> &str {
        let e = &self.groupoid;
        let a = e.arrow_index(&self.sections[arrow].section[x]).unwrap();
        e.object(e.tgt_idx(a))
    }

    /// The groupoid arrow `σ(x)` of the section, as an index into `E`.
    pub fn value_at(&self, arrow: usize, x: &str) -> usize {
        self.groupoid.arrow_index(&self.sections[arrow].section[x]).unwrap()
    }

    /// Looks up an arrow by its data.
    pub fn find_arrow(&self, dom: usize, cod: usize, section: &BTreeMap<String, String>) -> Option<usize> {
        self.sections
            .iter()
            .position(|s| s.dom == dom && s.cod == cod && s.section == *section)
    }

    /// The image `tσ(dom)` of an embedding arrow as a set of objects.
    pub fn image_set(&self, arrow: usize) -> BTreeSet<String> {
        self.sections[arrow]
            .section
            .keys()
            .map(|x| self.target_at(arrow, x).to_string())
            .collect()
    }

    /// Factors σ as `i ∘ σ₀` with `σ₀` an isomorphism onto the image and `i`
    /// the unit inclusion; both must exist in the category.
    pub fn iso_part(&self, arrow: usize) -> Result<(usize, usize), Error> {
        let img = self.image_set(arrow);
        let img_idx = self
            .basis
            .iter()
            .position(|b| *b == img)
            .ok_or_else(|| Error::precondition("image of section is not a basis set"))?;
        let sec = &self.sections[arrow];
        let iso = self
            .find_arrow(sec.dom, img_idx, &sec.section)
            .ok_or_else(|| Error::precondition("corestricted isomorphism missing from category"))?;
        let incl_section: BTreeMap<String, String> = img
            .iter()
            .map(|y| (y.clone(), self.groupoid.unit_of(y).unwrap().to_string()))
            .collect();
        let incl = self
            .find_arrow(img_idx, sec.cod, &incl_section)
            .ok_or_else(|| Error::precondition("unit inclusion missing from category"))?;
        Ok((incl, iso))
    }

    /// Is the arrow an isomorphism in the categorical sense?
    pub fn is_iso(&self, arrow: usize) -> bool {
        self.cat.inverse_of(arrow).is_some()
    }

    /// The restriction of an arrow to a singleton domain `{x}`, corestricted
    /// to the singleton image; always exists since bases carry singletons.
    pub fn singleton_restriction(&self, arrow: usize, x: &str) -> usize {
        let y = self.target_at(arrow, x).to_string();
        let dom = self.basis.iter().position(|b| b.len() == 1 && b.contains(x)).unwrap();
        let cod = self.basis.iter().position(|b| b.len() == 1 && b.contains(&y)).unwrap();
        let section: BTreeMap<String, String> =
            [(x.to_string(), self.sections[arrow].section[x].clone())].into();
        self.find_arrow(dom, cod, &section).expect("basis contains singleton restrictions")
    }

    /// The unit inclusion `{x} ↪ dom(arrow)` for `x` in the domain.
    pub fn singleton_inclusion(&self, into: usize, x: &str) -> usize {
        let dom = self.basis.iter().position(|b| b.len() == 1 && b.contains(x)).unwrap();
        let section: BTreeMap<String, String> =
            [(x.to_string(), self.groupoid.unit_of(x).unwrap().to_string())].into();
        self.find_arrow(dom, into, &section).expect("basis contains singleton inclusions")
    }
}

/// The three approximation conditions for a subcategory of the full
/// embedding category.
pub fn check_approximating(full: &EmbeddingCategory, sub: &SubCategory) -> Result<bool, Error> {
    sub.validate(&full.cat)?;
    // (i) every unit section between basic opens in the subcategory is present
    for (i, s) in full.sections.iter().enumerate() {
        if full.unit_arrows.contains(&i)
            && !sub.arrows.contains(&i)
            && sub.objects.contains(&s.dom)
            && sub.objects.contains(&s.cod)
        {
            return Ok(false);
        }
    }
    // (ii) closed under restriction
    for &a in &sub.arrows {
        let sec = &full.sections[a];
        for (d, dset) in full.basis.iter().enumerate() {
            if !sub.objects.contains(&d) || !dset.is_subset(&full.basis[sec.dom]) {
                continue;
            }
            let image: BTreeSet<String> =
                dset.iter().map(|x| full.target_at(a, x).to_string()).collect();
            for (c, cset) in full.basis.iter().enumerate() {
                if !sub.objects.contains(&c)
                    || !image.is_subset(cset)
                    || !cset.is_subset(&full.basis[sec.cod])
                {
                    continue;
                }
                let restricted: BTreeMap<String, String> =
                    dset.iter().map(|x| (x.clone(), sec.section[x].clone())).collect();
                let r = full
                    .find_arrow(d, c, &restricted)
                    .expect("full category contains all restrictions");
                if !sub.arrows.contains(&r) {
                    return Ok(false);
                }
            }
        }
    }
    // (iii) every arrow of E with target in a basic open is hit
    let e = &full.groupoid;
    for (c, cset) in full.basis.iter().enumerate() {
        if !sub.objects.contains(&c) {
            continue;
        }
        for a in 0..e.arrow_count() {
            if !cset.contains(e.object(e.tgt_idx(a))) {
                continue;
            }
            let x = e.object(e.src_idx(a));
            let hit = sub.arrows.iter().any(|&s| {
                let sec = &full.sections[s];
                sec.cod == c && sec.section.get(x).map(String::as_str) == Some(&e.arrow(a).id)
            });
            if !hit {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// An abelian presheaf on a small category with coordinates per object and
/// an integer restriction matrix per arrow (`A(cod) → A(dom)`).
#[derive(Clone, Debug)]
pub struct AbelianPresheaf {
    pub at: Vec<FiniteAbelianGroup>,
    pub restriction: Vec<IntMat>,
}

impl AbelianPresheaf {
    pub fn validate(&self, cat: &SmallCategory) -> Result<(), Error> {
        if self.at.len() != cat.objects.len() || self.restriction.len() != cat.arrows.len() {
            return Err(Error::invalid("presheaf shape mismatch"));
        }
        for (a, m) in self.restriction.iter().enumerate() {
            let dom_g = &self.at[cat.arrows[a].dom];
            let cod_g = &self.at[cat.arrows[a].cod];
            if m.rows() != dom_g.rank() || m.cols() != cod_g.rank() {
                return Err(Error::invalid(format!("restriction matrix shape wrong at arrow {a}")));
            }
            if !cod_g.maps_into(m, dom_g) {
                return Err(Error::invalid(format!("restriction at arrow {a} ill-defined mod moduli")));
            }
        }
        for o in 0..cat.objects.len() {
            let idm = &self.restriction[cat.identity_of(o)];
            if !self.at[o].matrices_equal(idm, &IntMat::identity(self.at[o].rank())) {
                return Err(Error::invalid(format!("identity restriction at object {o} not identity")));
            }
        }
        for g in 0..cat.arrows.len() {
            for h in 0..cat.arrows.len() {
                if let Some(gh) = cat.compose_idx(g, h) {
                    // contravariance: (g∘h)* = h* ∘ g*
                    let lhs = &self.restriction[gh];
                    let rhs = self.restriction[h].mul(&self.restriction[g]);
                    let dom_g = &self.at[cat.arrows[h].dom];
                    if !dom_g.matrices_equal(lhs, &rhs) {
                        return Err(Error::invalid(format!(
                            "presheaf not functorial at ({},{})",
                            cat.arrows[g].id, cat.arrows[h].id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Coordinate layout of `Γ(U, K)`: which points contribute which coordinate
/// block, with the per-fiber abelian structure and element names.
#[derive(Clone, Debug)]
pub struct SectionLayout {
    /// `(point, fiber element names, structure, coordinate offset)`.
    pub blocks: Vec<(String, Vec<String>, AbelianStructure, usize)>,
    pub rank: usize,
}

impl SectionLayout {
    /// Converts a section (point → fiber element id) to coordinates.
    pub fn coords(&self, section: &BTreeMap<String, String>) -> Vec<i128> {
        let mut out = vec![0; self.rank];
        for (pt, names, st, off) in &self.blocks {
            let idx = names.iter().position(|n| n == &section[pt]).expect("element in fiber");
            for (i, &c) in st.coords(idx).iter().enumerate() {
                out[off + i] = c;
            }
        }
        out
    }

    /// Converts coordinates back to a section.
    pub fn section(&self, coords: &[i128]) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for (pt, names, st, off) in &self.blocks {
            let slice = &coords[*off..*off + st.factors.len()];
            let idx = st.element_of(slice);
            out.insert(pt.clone(), names[idx].clone());
        }
        out
    }
}

/// The presheaf of sections `Γ(−, K)` on an embedding category, for an
/// equivariant bundle over the groupoid's objects:
/// `(a·σ)(x) = a(tσ(x))·σ(x)`.
pub struct SectionsPresheaf {
    pub presheaf: AbelianPresheaf,
    pub layouts: Vec<SectionLayout>,
}

pub fn sections_presheaf(
    coeff: &EquivariantBundle,
    emb: &EmbeddingCategory,
) -> Result<SectionsPresheaf, Error> {
    if !coeff.bundle.is_abelian() {
        return Err(Error::precondition("sections presheaf needs abelian fibers"));
    }
    let mut fiber_structs: BTreeMap<String, AbelianStructure> = BTreeMap::new();
    for x in &coeff.bundle.base {
        let st = abelian_structure(coeff.bundle.fiber(x))
            .ok_or_else(|| Error::precondition("non-abelian fiber"))?;
        fiber_structs.insert(x.clone(), st);
    }
    let mut layouts = Vec::new();
    let mut at = Vec::new();
    for set in &emb.basis {
        let mut blocks = Vec::new();
        let mut off = 0;
        for pt in set {
            let st = fiber_structs[pt].clone();
            let rank = st.factors.len();
            let names = coeff.bundle.fiber(pt).elements().to_vec();
            blocks.push((pt.clone(), names, st, off));
            off += rank;
        }
        let factors: Vec<i128> =
            blocks.iter().flat_map(|(_, _, st, _)| st.factors.iter().copied()).collect();
        at.push(FiniteAbelianGroup::new(factors));
        layouts.push(SectionLayout { blocks, rank: off });
    }
    let mut restriction = Vec::new();
    for (a, sec) in emb.sections.iter().enumerate() {
        let dom_layout = &layouts[sec.dom];
        let cod_layout = &layouts[sec.cod];
        let mut m = IntMat::zero(dom_layout.rank, cod_layout.rank);
        for (x, _, st_x, off_x) in &dom_layout.blocks {
            let y = emb.target_at(a, x).to_string();
            let (_, _, st_y, off_y) =
                cod_layout.blocks.iter().find(|(pt, _, _, _)| *pt == y).expect("target in codomain");
            // block: K_y → K_x, k ↦ k·σ(x)
            let ky = coeff.bundle.fiber(&y);
            let arrow_id = &emb.sections[a].section[x];
            let block = hom_matrix(st_y, st_x, |elem_idx| {
                let name = ky.element(elem_idx);
                let image = coeff.action.act(name, arrow_id).expect("action entry");
                coeff.bundle.fiber(x).index_of(image).unwrap()
            });
            for r in 0..block.rows() {
                for c in 0..block.cols() {
                    m.set(off_x + r, off_y + c, block.get(r, c));
                }
            }
        }
        restriction.push(m);
    }
    let presheaf = AbelianPresheaf { at, restriction };
    presheaf.validate(&emb.cat)?;
    Ok(SectionsPresheaf { presheaf, layouts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{ActionData, GroupBundle};
    use crate::group::FiniteGroup;

    fn bz2() -> FiniteGroupoid {
        FiniteGroupoid::delooping(&FiniteGroup::cyclic(2))
    }

    #[test]
    fn embedding_category_of_bz2_has_two_arrows() {
        let e = bz2();
        let emb = build_embedding_category(&e, &default_basis(&e)).unwrap();
        assert_eq!(emb.cat.objects.len(), 1);
        assert_eq!(emb.cat.arrows.len(), 2);
        assert_eq!(emb.unit_arrows.len(), 1);
        emb.cat.validate().unwrap();
    }

    #[test]
    fn singleton_basis_recovers_the_groupoid() {
        let e = FiniteGroupoid::pair_groupoid(&["a", "b"]);
        let emb = build_embedding_category(&e, &singleton_basis(&e)).unwrap();
        assert_eq!(emb.cat.objects.len(), 2);
        assert_eq!(emb.cat.arrows.len(), e.arrow_count());
    }

    #[test]
    fn pair_groupoid_full_basis_bijective_families() {
        let e = FiniteGroupoid::pair_groupoid(&["a", "b"]);
        let emb = build_embedding_category(&e, &default_basis(&e)).unwrap();
        let top = emb.basis.iter().position(|s| s.len() == 2).unwrap();
        let top_endos = emb.sections.iter().filter(|s| s.dom == top && s.cod == top).count();
        assert_eq!(top_endos, 2);
    }

    #[test]
    fn full_embedding_category_is_approximating() {
        let e = bz2();
        let emb = build_embedding_category(&e, &default_basis(&e)).unwrap();
        let all = SubCategory {
            objects: (0..emb.basis.len()).collect(),
            arrows: (0..emb.cat.arrows.len()).collect(),
        };
        assert!(check_approximating(&emb, &all).unwrap());
    }

    #[test]
    fn identities_only_subcategory_is_not_approximating() {
        let e = bz2();
        let emb = build_embedding_category(&e, &default_basis(&e)).unwrap();
        let idents = SubCategory {
            objects: (0..emb.basis.len()).collect(),
            arrows: (0..emb.basis.len()).map(|o| emb.cat.identity_of(o)).collect(),
        };
        assert!(!check_approximating(&emb, &idents).unwrap());
    }

    #[test]
    fn singleton_full_subcategory_is_approximating() {
        let e = FiniteGroupoid::pair_groupoid(&["a", "b"]);
        let emb = build_embedding_category(&e, &singleton_basis(&e)).unwrap();
        let all = SubCategory {
            objects: (0..emb.basis.len()).collect(),
            arrows: (0..emb.cat.arrows.len()).collect(),
        };
        assert!(check_approximating(&emb, &all).unwrap());
    }

    #[test]
    fn sections_presheaf_with_inversion_action() {
        let e = bz2();
        let k = GroupBundle::constant(vec!["*".into()], FiniteGroup::cyclic(3));
        let z3 = FiniteGroup::cyclic(3);
        let mu = ActionData::from_maps(&e, &k, |arrow| {
            z3.elements()
                .iter()
                .map(|el| {
                    let i = z3.index_of(el).unwrap();
                    let img = if arrow == "1" { z3.inv_idx(i) } else { i };
                    (el.clone(), z3.element(img).to_string())
                })
                .collect()
        });
        let coeff = EquivariantBundle::new(e.clone(), k, mu).unwrap();
        let emb = build_embedding_category(&e, &default_basis(&e)).unwrap();
        let sp = sections_presheaf(&coeff, &emb).unwrap();
        // the flip section restricts by negation
        let flip = emb.sections.iter().position(|s| s.section.values().any(|a| a == "1")).unwrap();
        let m = &sp.presheaf.restriction[flip];
        assert_eq!(m.get(0, 0).rem_euclid(3), 2);
    }

    #[test]
    fn sections_over_singletons_are_fibers() {
        let e = FiniteGroupoid::pair_groupoid(&["a", "b"]);
        let k = GroupBundle::constant(e.objects().to_vec(), FiniteGroup::cyclic(2));
        let mu = ActionData::trivial(&e, &k).unwrap();
        let coeff = EquivariantBundle::new(e.clone(), k, mu).unwrap();
        let emb = build_embedding_category(&e, &singleton_basis(&e)).unwrap();
        let sp = sections_presheaf(&coeff, &emb).unwrap();
        assert!(sp.presheaf.at.iter().all(|g| g.order() == 2));
    }

    #[test]
    fn iso_part_factors_into_unit_after_iso() {
        let e = FiniteGroupoid::pair_groupoid(&["a", "b"]);
        let emb = build_embedding_category(&e, &default_basis(&e)).unwrap();
        for a in 0..emb.cat.arrows.len() {
            let (incl, iso) = emb.iso_part(a).unwrap();
            assert!(emb.is_iso(iso));
            assert!(emb.unit_arrows.contains(&incl));
            assert_eq!(emb.cat.compose_idx(incl, iso), Some(a));
        }
    }
}
