//! Finite groupoids as explicit partial composition tables, with the basic
//! structure theory: orbits, isotropy, restriction to a transversal, weak
//! equivalences, and quotients by normal isotropy subbundles.
//!
//! Conventions. `compose(g, h) = g∘h` is defined exactly when
//! `src(g) = tgt(h)`; then `src(g∘h) = src(h)` and `tgt(g∘h) = tgt(g)`.
//! Object and arrow identifiers are opaque strings and equality is
//! identifier equality.

use crate::error::Error;
use crate::group::FiniteGroup;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrowData {
    pub id: String,
    pub src: usize,
    pub tgt: usize,
}

/// A finite groupoid. Construction does not enforce the axioms — use
/// [`FiniteGroupoid::validate`] to obtain a violation report — but it does
/// enforce well-formedness (known identifiers, declared partiality).
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteGroupoid {
    objects: Vec<String>,
    obj_index: BTreeMap<String, usize>,
    arrows: Vec<ArrowData>,
    arr_index: BTreeMap<String, usize>,
    compose: Vec<Option<usize>>,
    unit: Vec<Option<usize>>,
    inv: Vec<Option<usize>>,
}

impl fmt::Debug for FiniteGroupoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteGroupoid({} objects, {} arrows)", self.objects.len(), self.arrows.len())
    }
}

/// A subset of objects, possibly a complete transversal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transversal {
    pub subset: BTreeSet<String>,
}

impl Transversal {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(objs: I) -> Transversal {
        Transversal { subset: objs.into_iter().map(Into::into).collect() }
    }
}

/// A homomorphism of groupoids, given on objects and arrows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupoidHom {
    pub obj_map: BTreeMap<String, String>,
    pub arr_map: BTreeMap<String, String>,
}

impl GroupoidHom {
    pub fn identity(g: &FiniteGroupoid) -> GroupoidHom {
        GroupoidHom {
            obj_map: g.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
            arr_map: g.arrow_ids().map(|a| (a.to_string(), a.to_string())).collect(),
        }
    }

    /// Checks that the maps preserve src, tgt, composition and units.
    pub fn validate(&self, dom: &FiniteGroupoid, cod: &FiniteGroupoid) -> Result<(), Error> {
        for o in dom.objects() {
            let img = self.obj_map.get(o).ok_or_else(|| Error::invalid(format!("object {o} unmapped")))?;
            if cod.object_index(img).is_none() {
                return Err(Error::invalid(format!("object image {img} unknown")));
            }
        }
        for a in dom.arrow_ids() {
            let img = self.arr_map.get(a).ok_or_else(|| Error::invalid(format!("arrow {a} unmapped")))?;
            if cod.arrow_index(img).is_none() {
                return Err(Error::invalid(format!("arrow image {img} unknown")));
            }
        }
        for a in dom.arrow_ids() {
            let ia = dom.arrow_index(a).unwrap();
            let img = cod.arrow_index(&self.arr_map[a]).unwrap();
            let src_img = &self.obj_map[dom.object(dom.src_idx(ia))];
            let tgt_img = &self.obj_map[dom.object(dom.tgt_idx(ia))];
            if cod.object(cod.src_idx(img)) != src_img || cod.object(cod.tgt_idx(img)) != tgt_img {
                return Err(Error::invalid(format!("arrow {a} breaks src/tgt")));
            }
        }
        for x in dom.objects() {
            let ux = dom.unit_of(x).ok_or_else(|| Error::invalid(format!("missing unit at {x}")))?;
            let img = &self.arr_map[ux];
            let ux_img = cod
                .unit_of(&self.obj_map[x])
                .ok_or_else(|| Error::invalid(format!("missing unit at image of {x}")))?;
            if img != ux_img {
                return Err(Error::invalid(format!("unit at {x} not preserved")));
            }
        }
        for g in 0..dom.arrow_count() {
            for h in 0..dom.arrow_count() {
                if let Some(gh) = dom.compose_idx(g, h) {
                    let ig = cod.arrow_index(&self.arr_map[&dom.arrow(g).id]).unwrap();
                    let ih = cod.arrow_index(&self.arr_map[&dom.arrow(h).id]).unwrap();
                    let igh = cod.arrow_index(&self.arr_map[&dom.arrow(gh).id]).unwrap();
                    if cod.compose_idx(ig, ih) != Some(igh) {
                        return Err(Error::invalid(format!(
                            "composition of {} and {} not preserved",
                            dom.arrow(g).id,
                            dom.arrow(h).id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn compose(&self, other: &GroupoidHom) -> GroupoidHom {
        // self ∘ other
        GroupoidHom {
            obj_map: other.obj_map.iter().map(|(k, v)| (k.clone(), self.obj_map[v].clone())).collect(),
            arr_map: other.arr_map.iter().map(|(k, v)| (k.clone(), self.arr_map[v].clone())).collect(),
        }
    }
}

/// One violated groupoid axiom, in human-readable form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FiniteGroupoid {
    /// Builds a groupoid from raw tables. Inverses are derived by search.
    /// Shape errors (unknown ids, compositions declared on non-composable
    /// pairs) fail here; axiom violations are left for [`validate`].
    ///
    /// [`validate`]: FiniteGroupoid::validate
    pub fn from_tables(
        objects: Vec<String>,
        arrows: Vec<(String, String, String)>,
        compose: &[(String, String, String)],
        units: &BTreeMap<String, String>,
    ) -> Result<FiniteGroupoid, Error> {
        let obj_index: BTreeMap<String, usize> =
            objects.iter().enumerate().map(|(i, o)| (o.clone(), i)).collect();
        if obj_index.len() != objects.len() {
            return Err(Error::invalid("duplicate object identifier"));
        }
        let mut arrow_data = Vec::with_capacity(arrows.len());
        for (id, src, tgt) in arrows {
            let s = *obj_index.get(&src).ok_or_else(|| Error::invalid(format!("unknown src {src}")))?;
            let t = *obj_index.get(&tgt).ok_or_else(|| Error::invalid(format!("unknown tgt {tgt}")))?;
            arrow_data.push(ArrowData { id, src: s, tgt: t });
        }
        let arr_index: BTreeMap<String, usize> =
            arrow_data.iter().enumerate().map(|(i, a)| (a.id.clone(), i)).collect();
        if arr_index.len() != arrow_data.len() {
            return Err(Error::invalid("duplicate arrow identifier"));
        }
        let n = arrow_data.len();
        let mut table = vec![None; n * n];
        for (g, h, gh) in compose {
            let (&ig, &ih, &igh) = match (arr_index.get(g), arr_index.get(h), arr_index.get(gh)) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::invalid(format!("unknown arrow in composition ({g},{h})"))),
            };
            if arrow_data[ig].src != arrow_data[ih].tgt {
                return Err(Error::invalid(format!("({g},{h}) is not a composable pair")));
            }
            table[ig * n + ih] = Some(igh);
        }
        let mut unit = vec![None; objects.len()];
        for (x, u) in units {
            let ix = *obj_index.get(x).ok_or_else(|| Error::invalid(format!("unknown object {x}")))?;
            let iu = *arr_index.get(u).ok_or_else(|| Error::invalid(format!("unknown unit arrow {u}")))?;
            unit[ix] = Some(iu);
        }
        let mut g = FiniteGroupoid {
            objects,
            obj_index,
            arrows: arrow_data,
            arr_index,
            compose: table,
            unit,
            inv: vec![None; n],
        };
        g.derive_inverses();
        Ok(g)
    }

    fn derive_inverses(&mut self) {
        let n = self.arrows.len();
        for g in 0..n {
            self.inv[g] = (0..n).find(|&h| {
                let gs = self.arrows[g].src;
                let gt = self.arrows[g].tgt;
                self.compose[g * n + h] == self.unit[gt]
                    && self.compose[h * n + g] == self.unit[gs]
                    && self.unit[gt].is_some()
                    && self.unit[gs].is_some()
            });
        }
    }

    /// Test-and-fixture hook: overwrite one composition entry.
    pub fn set_composition_entry(&mut self, g: &str, h: &str, gh: &str) -> Result<(), Error> {
        let n = self.arrows.len();
        let (ig, ih, igh) = (
            self.arrow_index(g).ok_or_else(|| Error::invalid("unknown arrow"))?,
            self.arrow_index(h).ok_or_else(|| Error::invalid("unknown arrow"))?,
            self.arrow_index(gh).ok_or_else(|| Error::invalid("unknown arrow"))?,
        );
        self.compose[ig * n + ih] = Some(igh);
        self.derive_inverses();
        Ok(())
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn object(&self, i: usize) -> &str {
        &self.objects[i]
    }

    pub fn object_index(&self, o: &str) -> Option<usize> {
        self.obj_index.get(o).copied()
    }

    pub fn arrow_count(&self) -> usize {
        self.arrows.len()
    }

    pub fn arrow(&self, i: usize) -> &ArrowData {
        &self.arrows[i]
    }

    pub fn arrow_ids(&self) -> impl Iterator<Item = &str> {
        self.arrows.iter().map(|a| a.id.as_str())
    }

    pub fn arrow_index(&self, id: &str) -> Option<usize> {
        self.arr_index.get(id).copied()
    }

    pub fn src_idx(&self, a: usize) -> usize {
        self.arrows[a].src
    }

    pub fn tgt_idx(&self, a: usize) -> usize {
        self.arrows[a].tgt
    }

    #[inline]
    pub fn compose_idx(&self, g: usize, h: usize) -> Option<usize> {
        self.compose[g * self.arrows.len() + h]
    }

    /// `g ∘ h`, defined when `src(g) = tgt(h)`. Panics on non-composable
    /// pairs of a validated groupoid only if the table is incomplete.
    pub fn compose_arrows(&self, g: usize, h: usize) -> usize {
        self.compose_idx(g, h).expect("composition entry missing")
    }

    pub fn unit_idx(&self, x: usize) -> Option<usize> {
        self.unit[x]
    }

    pub fn unit_of(&self, x: &str) -> Option<&str> {
        let ix = self.object_index(x)?;
        self.unit[ix].map(|u| self.arrows[u].id.as_str())
    }

    pub fn inv_idx(&self, a: usize) -> Option<usize> {
        self.inv[a]
    }

    pub fn inverse_arrow(&self, a: usize) -> usize {
        self.inv[a].expect("arrow has no inverse")
    }

    pub fn arrows_from_to(&self, x: usize, y: usize) -> Vec<usize> {
        (0..self.arrows.len())
            .filter(|&a| self.arrows[a].src == x && self.arrows[a].tgt == y)
            .collect()
    }

    /// Exhaustive axiom check; the report is empty exactly when the tables
    /// form a groupoid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.arrows.len();
        let mut push = |msg: String| out.push(Violation(msg));

        for (x, u) in self.unit.iter().enumerate() {
            match *u {
                None => push(format!("object {} has no unit arrow", self.objects[x])),
                Some(u) => {
                    if self.arrows[u].src != x || self.arrows[u].tgt != x {
                        push(format!("unit at {} is not a self-arrow", self.objects[x]));
                    }
                }
            }
        }
        for g in 0..n {
            for h in 0..n {
                let defined = self.compose[g * n + h].is_some();
                let composable = self.arrows[g].src == self.arrows[h].tgt;
                if defined != composable {
                    push(format!(
                        "composition of ({},{}) {} defined",
                        self.arrows[g].id,
                        self.arrows[h].id,
                        if defined { "wrongly" } else { "not" }
                    ));
                }
                if let Some(gh) = self.compose[g * n + h] {
                    if self.arrows[gh].src != self.arrows[h].src
                        || self.arrows[gh].tgt != self.arrows[g].tgt
                    {
                        push(format!(
                            "composite of ({},{}) has wrong endpoints",
                            self.arrows[g].id, self.arrows[h].id
                        ));
                    }
                }
            }
        }
        for g in 0..n {
            for h in 0..n {
                for k in 0..n {
                    let gh_k = self.compose_idx(g, h).and_then(|gh| self.compose_idx(gh, k));
                    let g_hk = self.compose_idx(h, k).and_then(|hk| self.compose_idx(g, hk));
                    if self.arrows[g].src == self.arrows[h].tgt
                        && self.arrows[h].src == self.arrows[k].tgt
                        && gh_k != g_hk
                    {
                        push(format!(
                            "associativity fails at ({},{},{})",
                            self.arrows[g].id, self.arrows[h].id, self.arrows[k].id
                        ));
                    }
                }
            }
        }
        for g in 0..n {
            let (s, t) = (self.arrows[g].src, self.arrows[g].tgt);
            if let (Some(us), Some(ut)) = (self.unit[s], self.unit[t]) {
                if self.compose_idx(g, us) != Some(g) {
                    push(format!("{} ∘ unit ≠ {}", self.arrows[g].id, self.arrows[g].id));
                }
                if self.compose_idx(ut, g) != Some(g) {
                    push(format!("unit ∘ {} ≠ {}", self.arrows[g].id, self.arrows[g].id));
                }
            }
            if self.inv[g].is_none() {
                push(format!("arrow {} has no two-sided inverse", self.arrows[g].id));
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Partition of the objects into orbits (x ~ y iff an arrow x→y exists).
    pub fn orbits(&self) -> Vec<BTreeSet<String>> {
        let mut parent: Vec<usize> = (0..self.objects.len()).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for a in &self.arrows {
            let (ri, rj) = (find(&mut parent, a.src), find(&mut parent, a.tgt));
            parent[ri] = rj;
        }
        let mut blocks: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for i in 0..self.objects.len() {
            let r = find(&mut parent, i);
            blocks.entry(r).or_default().insert(self.objects[i].clone());
        }
        blocks.into_values().collect()
    }

    /// The isotropy group at `x`, together with the map from group elements
    /// (named by arrow id) to self-arrows.
    pub fn isotropy(&self, x: &str) -> Result<(FiniteGroup, BTreeMap<String, String>), Error> {
        let ix = self.object_index(x).ok_or_else(|| Error::invalid(format!("unknown object {x}")))?;
        let selfs = self.arrows_from_to(ix, ix);
        let elements: Vec<String> = selfs.iter().map(|&a| self.arrows[a].id.clone()).collect();
        let mut table = Vec::new();
        for &g in &selfs {
            for &h in &selfs {
                let gh = self
                    .compose_idx(g, h)
                    .ok_or_else(|| Error::invalid("isotropy composition missing"))?;
                table.push((
                    self.arrows[g].id.clone(),
                    self.arrows[h].id.clone(),
                    self.arrows[gh].id.clone(),
                ));
            }
        }
        let unit = self.unit[ix].ok_or_else(|| Error::invalid("missing unit"))?;
        let group = FiniteGroup::from_table(elements.clone(), &table, &self.arrows[unit].id)?;
        let embed = elements.iter().map(|e| (e.clone(), e.clone())).collect();
        Ok((group, embed))
    }

    /// The full subgroupoid on `T`, the inclusion homomorphism, and whether
    /// `T` is a complete transversal (meets every orbit).
    pub fn restrict_to_transversal(
        &self,
        t: &Transversal,
    ) -> Result<(FiniteGroupoid, GroupoidHom, bool), Error> {
        for o in &t.subset {
            if self.object_index(o).is_none() {
                return Err(Error::invalid(format!("transversal object {o} unknown")));
            }
        }
        let objects: Vec<String> = self.objects.iter().filter(|o| t.subset.contains(*o)).cloned().collect();
        let keep: Vec<usize> = (0..self.arrows.len())
            .filter(|&a| {
                t.subset.contains(self.object(self.arrows[a].src))
                    && t.subset.contains(self.object(self.arrows[a].tgt))
            })
            .collect();
        let arrows: Vec<(String, String, String)> = keep
            .iter()
            .map(|&a| {
                (
                    self.arrows[a].id.clone(),
                    self.objects[self.arrows[a].src].clone(),
                    self.objects[self.arrows[a].tgt].clone(),
                )
            })
            .collect();
        let mut compose = Vec::new();
        for &g in &keep {
            for &h in &keep {
                if let Some(gh) = self.compose_idx(g, h) {
                    compose.push((
                        self.arrows[g].id.clone(),
                        self.arrows[h].id.clone(),
                        self.arrows[gh].id.clone(),
                    ));
                }
            }
        }
        let units: BTreeMap<String, String> = objects
            .iter()
            .filter_map(|o| self.unit_of(o).map(|u| (o.clone(), u.to_string())))
            .collect();
        let sub = FiniteGroupoid::from_tables(objects.clone(), arrows, &compose, &units)?;
        let incl = GroupoidHom {
            obj_map: objects.iter().map(|o| (o.clone(), o.clone())).collect(),
            arr_map: keep.iter().map(|&a| (self.arrows[a].id.clone(), self.arrows[a].id.clone())).collect(),
        };
        let complete = self.orbits().iter().all(|orbit| orbit.iter().any(|o| t.subset.contains(o)));
        Ok((sub, incl, complete))
    }

    /// Checks the two weak-equivalence conditions for `phi: H → self` and
    /// returns a counterexample witness when one fails.
    pub fn check_weak_equivalence(
        &self,
        h: &FiniteGroupoid,
        phi: &GroupoidHom,
    ) -> Result<WeakEquivalence, Error> {
        phi.validate(h, self)?;
        let image_objects: BTreeSet<usize> =
            h.objects().iter().map(|o| self.object_index(&phi.obj_map[o]).unwrap()).collect();
        let mut essentially_surjective = None;
        'outer: for y in 0..self.objects.len() {
            for &x in &image_objects {
                if !self.arrows_from_to(x, y).is_empty() {
                    continue 'outer;
                }
            }
            essentially_surjective = Some(self.objects[y].clone());
            break;
        }
        let mut fully_faithful = None;
        'pairs: for x in 0..h.objects().len() {
            for y in 0..h.objects().len() {
                let dom_arrows = h.arrows_from_to(x, y);
                let px = self.object_index(&phi.obj_map[h.object(x)]).unwrap();
                let py = self.object_index(&phi.obj_map[h.object(y)]).unwrap();
                let cod_arrows = self.arrows_from_to(px, py);
                let images: BTreeSet<usize> = dom_arrows
                    .iter()
                    .map(|&a| self.arrow_index(&phi.arr_map[&h.arrow(a).id]).unwrap())
                    .collect();
                if images.len() != dom_arrows.len() || images.len() != cod_arrows.len() {
                    fully_faithful = Some((h.object(x).to_string(), h.object(y).to_string()));
                    break 'pairs;
                }
            }
        }
        Ok(WeakEquivalence {
            not_essentially_surjective_at: essentially_surjective,
            not_fully_faithful_at: fully_faithful,
        })
    }

    /// Quotient by a normal isotropy subbundle: `sub[x]` is a set of
    /// self-arrow ids at `x`. Arrows of the quotient are cosets `g·K_{src g}`.
    pub fn quotient_by_bundle(
        &self,
        sub: &BTreeMap<String, BTreeSet<String>>,
    ) -> Result<(FiniteGroupoid, GroupoidHom), Error> {
        let n = self.arrows.len();
        let mut member = vec![false; n];
        for (x, ids) in sub {
            let ix = self.object_index(x).ok_or_else(|| Error::invalid(format!("unknown object {x}")))?;
            let mut idxs = Vec::new();
            for id in ids {
                let a = self.arrow_index(id).ok_or_else(|| Error::invalid(format!("unknown arrow {id}")))?;
                if self.arrows[a].src != ix || self.arrows[a].tgt != ix {
                    return Err(Error::precondition(format!("{id} is not a self-arrow at {x}")));
                }
                idxs.push(a);
                member[a] = true;
            }
            let unit = self.unit[ix].ok_or_else(|| Error::invalid("missing unit"))?;
            if !idxs.contains(&unit) {
                return Err(Error::precondition(format!("fiber at {x} misses the unit")));
            }
            for &a in &idxs {
                let ai = self.inv[a].ok_or_else(|| Error::invalid("missing inverse"))?;
                if !idxs.contains(&ai) {
                    return Err(Error::precondition(format!("fiber at {x} not closed under inverse")));
                }
                for &b in &idxs {
                    let ab = self.compose_arrows(a, b);
                    if !idxs.contains(&ab) {
                        return Err(Error::precondition(format!("fiber at {x} not closed under product")));
                    }
                }
            }
        }
        for x in 0..self.objects.len() {
            if !sub.contains_key(&self.objects[x]) {
                return Err(Error::precondition(format!("no fiber given at {}", self.objects[x])));
            }
        }
        // Normality: conjugation by every arrow stays in the bundle.
        for g in 0..n {
            for k in 0..n {
                if member[k] && self.arrows[k].src == self.arrows[g].src {
                    let conj = self.compose_arrows(self.compose_arrows(g, k), self.inverse_arrow(g));
                    if !member[conj] {
                        return Err(Error::precondition(format!(
                            "bundle not normal: conjugating {} by {} leaves it",
                            self.arrows[k].id, self.arrows[g].id
                        )));
                    }
                }
            }
        }
        // Cosets g·K_src(g), canonical representative = least arrow id.
        let mut coset_rep = vec![usize::MAX; n];
        for g in 0..n {
            let mut best = g;
            for k in 0..n {
                if member[k] && self.arrows[k].src == self.arrows[k].tgt {
                    if self.arrows[g].src == self.arrows[k].tgt {
                        let gk = self.compose_arrows(g, k);
                        if self.arrows[gk].id < self.arrows[best].id {
                            best = gk;
                        }
                    }
                }
            }
            coset_rep[g] = best;
        }
        let reps: Vec<usize> = {
            let mut r: Vec<usize> = coset_rep.clone();
            r.sort();
            r.dedup();
            r
        };
        let class_id = |g: usize| format!("[{}]", self.arrows[coset_rep[g]].id);
        let arrows: Vec<(String, String, String)> = reps
            .iter()
            .map(|&g| {
                (
                    class_id(g),
                    self.objects[self.arrows[g].src].clone(),
                    self.objects[self.arrows[g].tgt].clone(),
                )
            })
            .collect();
        let mut compose = Vec::new();
        for &g in &reps {
            for &h in &reps {
                if let Some(gh) = self.compose_idx(g, h) {
                    compose.push((class_id(g), class_id(h), class_id(gh)));
                }
            }
        }
        let units: BTreeMap<String, String> = self
            .objects
            .iter()
            .enumerate()
            .map(|(ix, o)| (o.clone(), class_id(self.unit[ix].unwrap())))
            .collect();
        let quotient = FiniteGroupoid::from_tables(self.objects.clone(), arrows, &compose, &units)?;
        let pi = GroupoidHom {
            obj_map: self.objects.iter().map(|o| (o.clone(), o.clone())).collect(),
            arr_map: (0..n).map(|g| (self.arrows[g].id.clone(), class_id(g))).collect(),
        };
        Ok((quotient, pi))
    }

    // ---- standard constructions ----

    /// The pair groupoid: one arrow `x<y` for every ordered pair.
    pub fn pair_groupoid<S: Into<String> + Clone>(objects: &[S]) -> FiniteGroupoid {
        let objs: Vec<String> = objects.iter().cloned().map(Into::into).collect();
        let arrow_id = |x: &str, y: &str| format!("{y}<{x}");
        let mut arrows = Vec::new();
        for x in &objs {
            for y in &objs {
                arrows.push((arrow_id(x, y), x.clone(), y.clone()));
            }
        }
        let mut compose = Vec::new();
        for x in &objs {
            for y in &objs {
                for z in &objs {
                    compose.push((arrow_id(y, z), arrow_id(x, y), arrow_id(x, z)));
                }
            }
        }
        let units = objs.iter().map(|x| (x.clone(), arrow_id(x, x))).collect();
        FiniteGroupoid::from_tables(objs.clone(), arrows, &compose, &units).unwrap()
    }

    /// One-object groupoid on a group (deloopings `B(G)`); the object is "*".
    pub fn delooping(group: &FiniteGroup) -> FiniteGroupoid {
        let objs = vec!["*".to_string()];
        let arrows: Vec<(String, String, String)> =
            group.elements().iter().map(|e| (e.clone(), "*".into(), "*".into())).collect();
        let mut compose = Vec::new();
        for a in 0..group.order() {
            for b in 0..group.order() {
                compose.push((
                    group.element(a).to_string(),
                    group.element(b).to_string(),
                    group.element(group.mul_idx(a, b)).to_string(),
                ));
            }
        }
        let units = [("*".to_string(), group.identity().to_string())].into();
        FiniteGroupoid::from_tables(objs, arrows, &compose, &units).unwrap()
    }

    /// Transitive groupoid over `objects` with isotropy `group`: arrows are
    /// `(x, y, k)` with composition `(y,z,k)∘(x,y,l) = (x,z,kl)`.
    pub fn transitive_with_isotropy<S: Into<String> + Clone>(
        objects: &[S],
        group: &FiniteGroup,
    ) -> FiniteGroupoid {
        let objs: Vec<String> = objects.iter().cloned().map(Into::into).collect();
        let aid = |x: &str, y: &str, k: &str| format!("{y}<{x}:{k}");
        let mut arrows = Vec::new();
        for x in &objs {
            for y in &objs {
                for k in group.elements() {
                    arrows.push((aid(x, y, k), x.clone(), y.clone()));
                }
            }
        }
        let mut compose = Vec::new();
        for x in &objs {
            for y in &objs {
                for z in &objs {
                    for a in 0..group.order() {
                        for b in 0..group.order() {
                            compose.push((
                                aid(y, z, group.element(a)),
                                aid(x, y, group.element(b)),
                                aid(x, z, group.element(group.mul_idx(a, b))),
                            ));
                        }
                    }
                }
            }
        }
        let units = objs.iter().map(|x| (x.clone(), aid(x, x, group.identity()))).collect();
        FiniteGroupoid::from_tables(objs.clone(), arrows, &compose, &units).unwrap()
    }

    /// Action groupoid of a group acting on a finite set; `act(g, x) = g·x`
    /// must be a left action. Arrows `(g, x): x → g·x`.
    pub fn action_groupoid<S: AsRef<str>>(
        group: &FiniteGroup,
        points: &[S],
        act: impl Fn(usize, usize) -> usize,
    ) -> FiniteGroupoid {
        let objs: Vec<String> = points.iter().map(|p| p.as_ref().to_string()).collect();
        let aid = |g: usize, x: usize| format!("({},{})", group.element(g), objs[x]);
        let mut arrows = Vec::new();
        for g in 0..group.order() {
            for x in 0..objs.len() {
                arrows.push((aid(g, x), objs[x].clone(), objs[act(g, x)].clone()));
            }
        }
        let mut compose = Vec::new();
        for g in 0..group.order() {
            for h in 0..group.order() {
                for x in 0..objs.len() {
                    // (g, h·x) ∘ (h, x) = (gh, x)
                    compose.push((aid(g, act(h, x)), aid(h, x), aid(group.mul_idx(g, h), x)));
                }
            }
        }
        let units = (0..objs.len()).map(|x| (objs[x].clone(), aid(group.id_idx(), x))).collect();
        FiniteGroupoid::from_tables(objs.clone(), arrows, &compose, &units).unwrap()
    }

    /// Disjoint union; arrow and object ids must not clash.
    pub fn disjoint_union(a: &FiniteGroupoid, b: &FiniteGroupoid) -> Result<FiniteGroupoid, Error> {
        let objects: Vec<String> = a.objects.iter().chain(&b.objects).cloned().collect();
        let arrows: Vec<(String, String, String)> = a
            .arrows
            .iter()
            .map(|ar| (ar.id.clone(), a.objects[ar.src].clone(), a.objects[ar.tgt].clone()))
            .chain(
                b.arrows
                    .iter()
                    .map(|ar| (ar.id.clone(), b.objects[ar.src].clone(), b.objects[ar.tgt].clone())),
            )
            .collect();
        let mut compose = Vec::new();
        for side in [a, b] {
            for g in 0..side.arrow_count() {
                for h in 0..side.arrow_count() {
                    if let Some(gh) = side.compose_idx(g, h) {
                        compose.push((
                            side.arrows[g].id.clone(),
                            side.arrows[h].id.clone(),
                            side.arrows[gh].id.clone(),
                        ));
                    }
                }
            }
        }
        let mut units = BTreeMap::new();
        for side in [a, b] {
            for o in side.objects() {
                units.insert(o.clone(), side.unit_of(o).unwrap().to_string());
            }
        }
        FiniteGroupoid::from_tables(objects, arrows, &compose, &units)
    }
}

/// Outcome of the weak-equivalence check; `ok()` when both witnesses are absent.
#[derive(Clone, Debug)]
pub struct WeakEquivalence {
    /// An object of the codomain receiving no arrow from the image.
    pub not_essentially_surjective_at: Option<String>,
    /// A hom-set on which the map fails to be bijective.
    pub not_fully_faithful_at: Option<(String, String)>,
}

impl WeakEquivalence {
    pub fn ok(&self) -> bool {
        self.not_essentially_surjective_at.is_none() && self.not_fully_faithful_at.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_groupoid_is_valid_with_one_orbit() {
        let g = FiniteGroupoid::pair_groupoid(&["a", "b"]);
        assert!(g.validate().is_empty());
        assert_eq!(g.orbits().len(), 1);
    }

    #[test]
    fn delooping_z2_is_valid() {
        let g = FiniteGroupoid::delooping(&FiniteGroup::cyclic(2));
        assert!(g.validate().is_empty());
        let (iso, _) = g.isotropy("*").unwrap();
        assert_eq!(iso.order(), 2);
    }

    #[test]
    fn corrupted_entry_is_reported() {
        let mut g = FiniteGroupoid::delooping(&FiniteGroup::cyclic(2));
        // overwrite 1∘1 = 0 with 1∘1 = 1
        g.set_composition_entry("1", "1", "1").unwrap();
        let report = g.validate();
        assert!(!report.is_empty());
        assert!(report.iter().any(|v| v.0.contains("associativity") || v.0.contains("inverse")));
    }

    #[test]
    fn orbits_of_disjoint_union() {
        let a = FiniteGroupoid::delooping(&FiniteGroup::cyclic(2));
        let b = FiniteGroupoid::pair_groupoid(&["x", "y"]);
        // rename to avoid clash: delooping uses "*", pair uses x/y ids
        let u = FiniteGroupoid::disjoint_union(&a, &b).unwrap();
        assert_eq!(u.orbits().len(), 2);
    }

    #[test]
    fn orbit_via_generated_reachability() {
        // objects {1,2,3}, arrows generated by 1→2 only
        let g = FiniteGroupoid::from_tables(
            vec!["1".into(), "2".into(), "3".into()],
            vec![
                ("u1".into(), "1".into(), "1".into()),
                ("u2".into(), "2".into(), "2".into()),
                ("u3".into(), "3".into(), "3".into()),
                ("f".into(), "1".into(), "2".into()),
                ("finv".into(), "2".into(), "1".into()),
            ],
            &[
                ("u1".into(), "u1".into(), "u1".into()),
                ("u2".into(), "u2".into(), "u2".into()),
                ("u3".into(), "u3".into(), "u3".into()),
                ("f".into(), "u1".into(), "f".into()),
                ("u2".into(), "f".into(), "f".into()),
                ("finv".into(), "u2".into(), "finv".into()),
                ("u1".into(), "finv".into(), "finv".into()),
                ("finv".into(), "f".into(), "u1".into()),
                ("f".into(), "finv".into(), "u2".into()),
            ],
            &[("1".into(), "u1".into()), ("2".into(), "u2".into()), ("3".into(), "u3".into())].into(),
        )
        .unwrap();
        assert!(g.validate().is_empty());
        let orbits = g.orbits();
        assert_eq!(orbits.len(), 2);
        assert!(orbits.iter().any(|b| b.len() == 2 && b.contains("1") && b.contains("2")));
    }

    #[test]
    fn isotropy_of_trivial_action_groupoid() {
        let z2 = FiniteGroup::cyclic(2);
        let g = FiniteGroupoid::action_groupoid(&z2, &["a", "b"], |_, x| x);
        assert!(g.validate().is_empty());
        let (iso, _) = g.isotropy("a").unwrap();
        assert_eq!(iso.order(), 2);
    }

    #[test]
    fn transversal_restriction_is_weak_equivalence_when_complete() {
        let g = FiniteGroupoid::pair_groupoid(&["a", "b"]);
        let (sub, incl, complete) = g.restrict_to_transversal(&Transversal::new(["a"])).unwrap();
        assert!(complete);
        assert_eq!(sub.arrow_count(), 1);
        let we = g.check_weak_equivalence(&sub, &incl).unwrap();
        assert!(we.ok());
    }

    #[test]
    fn incomplete_transversal_fails_essential_surjectivity() {
        let a = FiniteGroupoid::delooping(&FiniteGroup::cyclic(2));
        let b = FiniteGroupoid::pair_groupoid(&["x", "y"]);
        let u = FiniteGroupoid::disjoint_union(&a, &b).unwrap();
        let (sub, incl, complete) = u.restrict_to_transversal(&Transversal::new(["x"])).unwrap();
        assert!(!complete);
        let we = u.check_weak_equivalence(&sub, &incl).unwrap();
        assert_eq!(we.not_essentially_surjective_at, Some("*".to_string()));
    }

    #[test]
    fn collapsing_pair_groupoid_onto_bz2_is_not_fully_faithful() {
        let pair = FiniteGroupoid::pair_groupoid(&["a", "b"]);
        let bz2 = FiniteGroupoid::delooping(&FiniteGroup::cyclic(2));
        // send every object to *, every arrow to the unit
        let phi = GroupoidHom {
            obj_map: [("a".into(), "*".into()), ("b".into(), "*".into())].into(),
            arr_map: pair.arrow_ids().map(|a| (a.to_string(), "0".to_string())).collect(),
        };
        let we = bz2.check_weak_equivalence(&pair, &phi).unwrap();
        assert!(!we.ok());
        assert!(we.not_fully_faithful_at.is_some());
    }

    #[test]
    fn quotient_bz4_by_z2_is_bz2() {
        let g = FiniteGroupoid::delooping(&FiniteGroup::cyclic(4));
        let sub = [("*".to_string(), BTreeSet::from(["0".to_string(), "2".to_string()]))].into();
        let (q, pi) = g.quotient_by_bundle(&sub).unwrap();
        assert!(q.validate().is_empty());
        assert_eq!(q.arrow_count(), 2);
        pi.validate(&g, &q).unwrap();
        // kernel of pi is exactly the designated bundle
        let unit = q.unit_of("*").unwrap();
        let kernel: BTreeSet<String> = g
            .arrow_ids()
            .filter(|a| pi.arr_map[*a] == unit)
            .map(str::to_string)
            .collect();
        assert_eq!(kernel, BTreeSet::from(["0".to_string(), "2".to_string()]));
        // orbits unchanged
        assert_eq!(q.orbits(), g.orbits());
    }

    #[test]
    fn quotient_bs3_by_a3_is_bz2() {
        let s3 = FiniteGroup::symmetric(3);
        let g = FiniteGroupoid::delooping(&s3);
        // A3 = even permutations: identity and the two 3-cycles
        let a3: BTreeSet<String> = ["012", "120", "201"].iter().map(|s| s.to_string()).collect();
        let (q, _) = g.quotient_by_bundle(&[("*".to_string(), a3)].into()).unwrap();
        assert_eq!(q.arrow_count(), 2);
        assert!(q.validate().is_empty());
    }

    #[test]
    fn non_normal_bundle_is_rejected_with_witness() {
        let s3 = FiniteGroup::symmetric(3);
        let g = FiniteGroupoid::delooping(&s3);
        // the subgroup generated by the transposition (01): {012 -> "012", "102"}
        let h: BTreeSet<String> = ["012", "102"].iter().map(|s| s.to_string()).collect();
        let err = g.quotient_by_bundle(&[("*".to_string(), h)].into());
        assert!(matches!(err, Err(Error::Precondition(m)) if m.contains("not normal")));
    }

    #[test]
    fn trivial_quotient_is_isomorphic_copy() {
        let g = FiniteGroupoid::pair_groupoid(&["a", "b"]);
        let sub: BTreeMap<String, BTreeSet<String>> = g
            .objects()
            .iter()
            .map(|o| (o.clone(), BTreeSet::from([g.unit_of(o).unwrap().to_string()])))
            .collect();
        let (q, _) = g.quotient_by_bundle(&sub).unwrap();
        assert_eq!(q.arrow_count(), g.arrow_count());
    }
}
