//! Bundles of finite groups over a finite base, and right actions of a
//! groupoid on such a bundle.

use crate::error::Error;
use crate::group::FiniteGroup;
use crate::groupoid::FiniteGroupoid;
use std::collections::BTreeMap;

/// A fiberwise finite group over a finite base set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupBundle {
    pub base: Vec<String>,
    pub fibers: BTreeMap<String, FiniteGroup>,
}

impl GroupBundle {
    pub fn new(base: Vec<String>, fibers: BTreeMap<String, FiniteGroup>) -> Result<GroupBundle, Error> {
        for b in &base {
            if !fibers.contains_key(b) {
                return Err(Error::invalid(format!("no fiber over {b}")));
            }
        }
        if fibers.len() != base.len() {
            return Err(Error::invalid("fiber over unknown base point"));
        }
        Ok(GroupBundle { base, fibers })
    }

    /// The same group over every point.
    pub fn constant(base: Vec<String>, fiber: FiniteGroup) -> GroupBundle {
        let fibers = base.iter().map(|b| (b.clone(), fiber.clone())).collect();
        GroupBundle { base, fibers }
    }

    pub fn fiber(&self, x: &str) -> &FiniteGroup {
        &self.fibers[x]
    }

    pub fn is_abelian(&self) -> bool {
        self.fibers.values().all(FiniteGroup::is_abelian)
    }

    /// Restrict to a sub-base.
    pub fn restrict(&self, keep: &[String]) -> GroupBundle {
        GroupBundle {
            base: keep.to_vec(),
            fibers: keep.iter().map(|b| (b.clone(), self.fibers[b].clone())).collect(),
        }
    }
}

/// A right action `μ` of a groupoid `E` on a bundle `K` over the objects of
/// `E`: for `e: x → y` and `k ∈ K_y`, a value `k·e ∈ K_x`, functorial in `e`
/// with each `(−)·e` an isomorphism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionData {
    /// `(arrow id, element of K_{tgt}) → element of K_{src}`.
    pub table: BTreeMap<(String, String), String>,
}

impl ActionData {
    /// The trivial action; fibers along every arrow must carry equal tables.
    pub fn trivial(e: &FiniteGroupoid, k: &GroupBundle) -> Result<ActionData, Error> {
        let mut table = BTreeMap::new();
        for a in 0..e.arrow_count() {
            let arrow = e.arrow(a);
            let kx = k.fiber(e.object(arrow.src));
            let ky = k.fiber(e.object(arrow.tgt));
            if kx != ky {
                return Err(Error::precondition(format!(
                    "fibers differ along {}; trivial action undefined",
                    arrow.id
                )));
            }
            for elem in ky.elements() {
                table.insert((arrow.id.clone(), elem.clone()), elem.clone());
            }
        }
        Ok(ActionData { table })
    }

    /// Builds an action from a per-arrow map `K_{tgt} → K_{src}` given as
    /// elementwise images.
    pub fn from_maps(
        e: &FiniteGroupoid,
        _k: &GroupBundle,
        mut map_for: impl FnMut(&str) -> BTreeMap<String, String>,
    ) -> ActionData {
        let mut table = BTreeMap::new();
        for a in 0..e.arrow_count() {
            let id = &e.arrow(a).id;
            for (from, to) in map_for(id) {
                table.insert((id.clone(), from), to);
            }
        }
        ActionData { table }
    }

    pub fn act(&self, k: &str, arrow: &str) -> Option<&str> {
        self.table.get(&(arrow.to_string(), k.to_string())).map(String::as_str)
    }

    pub fn validate(&self, e: &FiniteGroupoid, k: &GroupBundle) -> Result<(), Error> {
        for a in 0..e.arrow_count() {
            let arrow = e.arrow(a);
            let kx = k.fiber(e.object(arrow.src));
            let ky = k.fiber(e.object(arrow.tgt));
            let mut image: Vec<usize> = Vec::with_capacity(ky.order());
            for elem in ky.elements() {
                let img = self
                    .act(elem, &arrow.id)
                    .ok_or_else(|| Error::invalid(format!("action of {} misses {elem}", arrow.id)))?;
                let img_idx = kx
                    .index_of(img)
                    .ok_or_else(|| Error::invalid(format!("action image {img} not in fiber")))?;
                image.push(img_idx);
            }
            if !ky.is_homomorphism(kx, &image) {
                return Err(Error::invalid(format!("action along {} is not a homomorphism", arrow.id)));
            }
            let mut seen = image.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != ky.order() {
                return Err(Error::invalid(format!("action along {} is not bijective", arrow.id)));
            }
        }
        // functoriality: k·(g∘h) = (k·g)·h, and units act as the identity
        for x in 0..e.objects().len() {
            let u = e.unit_idx(x).ok_or_else(|| Error::invalid("missing unit"))?;
            let uid = &e.arrow(u).id;
            for elem in k.fiber(e.object(x)).elements() {
                if self.act(elem, uid) != Some(elem) {
                    return Err(Error::invalid(format!("unit at {} acts nontrivially", e.object(x))));
                }
            }
        }
        for g in 0..e.arrow_count() {
            for h in 0..e.arrow_count() {
                if let Some(gh) = e.compose_idx(g, h) {
                    let (gid, hid, ghid) = (&e.arrow(g).id, &e.arrow(h).id, &e.arrow(gh).id);
                    for elem in k.fiber(e.object(e.tgt_idx(g))).elements() {
                        let via_pair = self.act(elem, gid).and_then(|m| self.act(m, hid));
                        if via_pair != self.act(elem, ghid) {
                            return Err(Error::invalid(format!(
                                "action not functorial at ({gid},{hid})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A bundle with a validated groupoid action; the coefficient datum for
/// cohomology and obstruction computations.
#[derive(Clone, Debug)]
pub struct EquivariantBundle {
    pub groupoid: FiniteGroupoid,
    pub bundle: GroupBundle,
    pub action: ActionData,
}

impl EquivariantBundle {
    pub fn new(
        groupoid: FiniteGroupoid,
        bundle: GroupBundle,
        action: ActionData,
    ) -> Result<EquivariantBundle, Error> {
        action.validate(&groupoid, &bundle)?;
        Ok(EquivariantBundle { groupoid, bundle, action })
    }

    /// `k · e` by arrow index, with ids resolved internally.
    pub fn act_idx(&self, fiber_elem: &str, arrow: usize) -> &str {
        self.action.act(fiber_elem, &self.groupoid.arrow(arrow).id).expect("action entry missing")
    }
}
