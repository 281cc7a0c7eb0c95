//! Extensions `K → G → E` of finite groupoids by group bundles: validation,
//! the induced action, twisting by bitorsors, section-induced isomorphisms,
//! the connecting bitorsor of two extensions with isomorphic restrictions,
//! Baer sums, restriction and reconstruction, and brute-force enumeration of
//! extension classes.

use crate::bundle::{ActionData, EquivariantBundle, GroupBundle};
use crate::error::Error;
use crate::group::FiniteGroup;
use crate::groupoid::{FiniteGroupoid, GroupoidHom, Transversal};
use crate::torsor::{Bitorsor, TorsorSection};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// An extension of `E` by the bundle `K`, all over one object set:
/// a fiberwise embedding `j: K → G` and a projection `π: G → E` that is the
/// identity on objects.
#[derive(Clone, PartialEq, Eq)]
pub struct Extension {
    pub bundle: GroupBundle,
    pub total: FiniteGroupoid,
    pub base: FiniteGroupoid,
    /// Per object: fiber element → self-arrow of `total`.
    pub embed: BTreeMap<String, BTreeMap<String, String>>,
    pub proj: GroupoidHom,
}

impl fmt::Debug for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Extension(|K| = {}, |G| = {}, |E| = {})",
            self.bundle.fibers.values().map(FiniteGroup::order).sum::<usize>(),
            self.total.arrow_count(),
            self.base.arrow_count()
        )
    }
}

impl Extension {
    /// Arrow of `total` embedding the fiber element `k` at `x`.
    pub fn embed_arrow(&self, x: &str, k: &str) -> usize {
        self.total.arrow_index(&self.embed[x][k]).expect("embedded arrow")
    }

    /// `j⁻¹` on kernel arrows: the fiber element embedded as this arrow.
    pub fn kernel_element(&self, arrow: usize) -> Option<(String, String)> {
        let id = &self.total.arrow(arrow).id;
        for (x, m) in &self.embed {
            for (k, a) in m {
                if a == id {
                    return Some((x.clone(), k.clone()));
                }
            }
        }
        None
    }

    /// The π-fiber over a base arrow, sorted by arrow id.
    pub fn fiber(&self, base_arrow: usize) -> Vec<usize> {
        let target = &self.base.arrow(base_arrow).id;
        let mut out: Vec<usize> = (0..self.total.arrow_count())
            .filter(|&g| &self.proj.arr_map[&self.total.arrow(g).id] == target)
            .collect();
        out.sort_by(|&a, &b| self.total.arrow(a).id.cmp(&self.total.arrow(b).id));
        out
    }

    /// Deterministic set-section of π: least arrow id per fiber, the unit
    /// arrow over units.
    pub fn canonical_section(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for e in 0..self.base.arrow_count() {
            let fiber = self.fiber(e);
            let choice = if let Some(x) = (0..self.base.objects().len())
                .find(|&x| self.base.unit_idx(x) == Some(e))
            {
                self.total.unit_idx(x).expect("unit arrow")
            } else {
                *fiber.first().expect("nonempty fiber")
            };
            out.insert(e, choice);
        }
        out
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.total.objects() != self.base.objects() {
            out.push("total and base have different object sets".to_string());
            return out;
        }
        if self.bundle.base != self.base.objects() {
            out.push("bundle base differs from the object set".to_string());
            return out;
        }
        for v in self.total.validate() {
            out.push(format!("total groupoid: {v}"));
        }
        for v in self.base.validate() {
            out.push(format!("base groupoid: {v}"));
        }
        if !out.is_empty() {
            return out;
        }
        if let Err(e) = self.proj.validate(&self.total, &self.base) {
            out.push(format!("projection: {e}"));
            return out;
        }
        for o in self.total.objects() {
            if self.proj.obj_map[o] != *o {
                out.push(format!("projection moves object {o}"));
            }
        }
        // embedding: fiberwise injective homomorphism into isotropy
        for x in self.total.objects() {
            let k = self.bundle.fiber(x);
            let Some(m) = self.embed.get(x) else {
                out.push(format!("no embedding at {x}"));
                continue;
            };
            let mut images = BTreeSet::new();
            for elem in k.elements() {
                let Some(aid) = m.get(elem) else {
                    out.push(format!("embedding at {x} misses {elem}"));
                    continue;
                };
                let Some(a) = self.total.arrow_index(aid) else {
                    out.push(format!("embedding image {aid} unknown"));
                    continue;
                };
                let ix = self.total.object_index(x).unwrap();
                if self.total.src_idx(a) != ix || self.total.tgt_idx(a) != ix {
                    out.push(format!("embedded {elem} at {x} is not a self-arrow"));
                }
                images.insert(a);
            }
            if images.len() != k.order() {
                out.push(format!("embedding at {x} is not injective"));
            }
            if out.is_empty() {
                for a in k.elements() {
                    for b in k.elements() {
                        let ab = k.mul_elem(a, b).unwrap();
                        let ia = self.embed_arrow(x, a);
                        let ib = self.embed_arrow(x, b);
                        if self.total.compose_idx(ia, ib) != Some(self.embed_arrow(x, ab)) {
                            out.push(format!("embedding at {x} is not a homomorphism"));
                        }
                    }
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
        // surjectivity and exactness: π(g) is a unit iff g is embedded
        let image: BTreeSet<&String> = self.proj.arr_map.values().collect();
        if image.len() != self.base.arrow_count() {
            out.push("projection is not surjective on arrows".to_string());
        }
        let embedded: BTreeSet<String> =
            self.embed.values().flat_map(|m| m.values().cloned()).collect();
        for g in 0..self.total.arrow_count() {
            let gid = &self.total.arrow(g).id;
            let pg = self.base.arrow_index(&self.proj.arr_map[gid]).unwrap();
            let is_unit = (0..self.base.objects().len()).any(|x| self.base.unit_idx(x) == Some(pg));
            if is_unit != embedded.contains(gid) {
                out.push(format!("kernel exactness fails at arrow {gid}"));
            }
        }
        if !out.is_empty() {
            return out;
        }
        // fibers are left K-torsors under the embedding
        for e in 0..self.base.arrow_count() {
            let fiber = self.fiber(e);
            if fiber.is_empty() {
                out.push(format!("empty fiber over {}", self.base.arrow(e).id));
                continue;
            }
            let y = self.base.object(self.base.tgt_idx(e));
            let k = self.bundle.fiber(y);
            let g0 = fiber[0];
            let orbit: BTreeSet<usize> = k
                .elements()
                .iter()
                .map(|elem| self.total.compose_arrows(self.embed_arrow(y, elem), g0))
                .collect();
            if orbit.len() != k.order() || orbit.len() != fiber.len() {
                out.push(format!(
                    "fiber over {} is not a K-torsor",
                    self.base.arrow(e).id
                ));
            }
        }
        // normality of the embedded bundle under conjugation
        for g in 0..self.total.arrow_count() {
            let x = self.total.object(self.total.src_idx(g));
            let y = self.total.object(self.total.tgt_idx(g));
            for elem in self.bundle.fiber(x).elements() {
                let conj = self.total.compose_arrows(
                    self.total.compose_arrows(g, self.embed_arrow(x, elem)),
                    self.total.inverse_arrow(g),
                );
                let conj_id = &self.total.arrow(conj).id;
                if !self.embed[y].values().any(|a| a == conj_id) {
                    out.push(format!(
                        "embedded bundle not closed under conjugation by {}",
                        self.total.arrow(g).id
                    ));
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// The action of `E` on an abelian `K` induced by conjugation through
    /// any lift; rejects non-abelian kernels and verifies lift-independence.
    pub fn induced_action(&self) -> Result<ActionData, Error> {
        if !self.bundle.is_abelian() {
            return Err(Error::precondition("induced action needs an abelian kernel"));
        }
        let mut table = BTreeMap::new();
        for e in 0..self.base.arrow_count() {
            let x = self.base.object(self.base.src_idx(e));
            let y = self.base.object(self.base.tgt_idx(e));
            let fiber = self.fiber(e);
            for k in self.bundle.fiber(y).elements() {
                let jk = self.embed_arrow(y, k);
                let mut value: Option<String> = None;
                for &g in &fiber {
                    let conj = self.total.compose_arrows(
                        self.total.compose_arrows(self.total.inverse_arrow(g), jk),
                        g,
                    );
                    let conj_id = &self.total.arrow(conj).id;
                    let elem = self.embed[x]
                        .iter()
                        .find(|(_, a)| *a == conj_id)
                        .map(|(el, _)| el.clone())
                        .ok_or_else(|| Error::invalid("conjugate left the kernel"))?;
                    match &value {
                        None => value = Some(elem),
                        Some(prev) if *prev != elem => {
                            return Err(Error::precondition(format!(
                                "action along {} depends on the lift",
                                self.base.arrow(e).id
                            )))
                        }
                        _ => {}
                    }
                }
                table.insert((self.base.arrow(e).id.clone(), k.clone()), value.unwrap());
            }
        }
        Ok(ActionData { table })
    }

    /// For a constant bundle: does every embedded element commute with every
    /// composable arrow?
    pub fn is_central(&self) -> Result<bool, Error> {
        let first = self.bundle.fibers.values().next().ok_or_else(|| Error::invalid("empty base"))?;
        if self.bundle.fibers.values().any(|f| f != first) {
            return Err(Error::precondition("centrality needs a constant bundle"));
        }
        for g in 0..self.total.arrow_count() {
            let x = self.total.object(self.total.src_idx(g));
            let y = self.total.object(self.total.tgt_idx(g));
            for k in first.elements() {
                let left = self.total.compose_arrows(self.embed_arrow(y, k), g);
                let right = self.total.compose_arrows(g, self.embed_arrow(x, k));
                if left != right {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Full restriction over a subset of objects; flags incomplete
    /// transversals.
    pub fn restrict(&self, t: &Transversal) -> Result<(Extension, bool), Error> {
        let (total, _, complete_g) = self.total.restrict_to_transversal(t)?;
        let (base, _, _) = self.base.restrict_to_transversal(t)?;
        let keep: Vec<String> =
            self.base.objects().iter().filter(|o| t.subset.contains(*o)).cloned().collect();
        let bundle = self.bundle.restrict(&keep);
        let embed = self
            .embed
            .iter()
            .filter(|(x, _)| t.subset.contains(*x))
            .map(|(x, m)| (x.clone(), m.clone()))
            .collect();
        let proj = GroupoidHom {
            obj_map: keep.iter().map(|o| (o.clone(), o.clone())).collect(),
            arr_map: total
                .arrow_ids()
                .map(|a| (a.to_string(), self.proj.arr_map[a].clone()))
                .collect(),
        };
        Ok((Extension { bundle, total, base, embed, proj }, complete_g))
    }
}

/// The semidirect product extension `K ⋊ E` of an equivariant bundle: the
/// unit for the Baer sum.
pub fn semidirect_unit(coeff: &EquivariantBundle) -> Extension {
    let e = &coeff.groupoid;
    let k = &coeff.bundle;
    let aid = |kel: &str, earr: &str| format!("({kel};{earr})");
    let mut arrows = Vec::new();
    for a in 0..e.arrow_count() {
        let x = e.object(e.src_idx(a));
        let y = e.object(e.tgt_idx(a));
        for kel in k.fiber(x).elements() {
            arrows.push((aid(kel, &e.arrow(a).id), x.to_string(), y.to_string()));
        }
    }
    let mut compose = Vec::new();
    for f in 0..e.arrow_count() {
        for a in 0..e.arrow_count() {
            let Some(fa) = e.compose_idx(f, a) else { continue };
            let x = e.object(e.src_idx(a));
            let y = e.object(e.tgt_idx(a));
            let kx = k.fiber(x);
            for l in k.fiber(y).elements() {
                for kel in kx.elements() {
                    // (l,f)(k,e) = ((l·e)·k, f∘e)
                    let le = coeff.action.act(l, &e.arrow(a).id).expect("action entry");
                    let prod = kx.mul_elem(le, kel).unwrap();
                    compose.push((
                        aid(l, &e.arrow(f).id),
                        aid(kel, &e.arrow(a).id),
                        aid(prod, &e.arrow(fa).id),
                    ));
                }
            }
        }
    }
    let units: BTreeMap<String, String> = e
        .objects()
        .iter()
        .map(|x| {
            let u = e.unit_of(x).unwrap();
            (x.clone(), aid(k.fiber(x).identity(), u))
        })
        .collect();
    let total =
        FiniteGroupoid::from_tables(e.objects().to_vec(), arrows, &compose, &units).unwrap();
    let embed: BTreeMap<String, BTreeMap<String, String>> = e
        .objects()
        .iter()
        .map(|x| {
            let u = e.unit_of(x).unwrap();
            (
                x.clone(),
                k.fiber(x).elements().iter().map(|kel| (kel.clone(), aid(kel, u))).collect(),
            )
        })
        .collect();
    let proj = GroupoidHom {
        obj_map: e.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
        arr_map: (0..e.arrow_count())
            .flat_map(|a| {
                let x = e.object(e.src_idx(a)).to_string();
                let eid = e.arrow(a).id.clone();
                k.fiber(&x)
                    .elements()
                    .iter()
                    .map(move |kel| (aid(kel, &eid), eid.clone()))
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    Extension { bundle: k.clone(), total, base: e.clone(), embed, proj }
}

/// The opposite extension: inverse for the Baer sum. The kernel embeds by
/// `k ↦ i(k)^op`, which is a homomorphism for the abelian kernels the Baer
/// sum acts on; the projection sends `g^op` to `π(g⁻¹)`.
pub fn opposite_extension(ext: &Extension) -> Result<Extension, Error> {
    if !ext.bundle.is_abelian() {
        return Err(Error::precondition("opposite extension needs an abelian kernel"));
    }
    let g = &ext.total;
    let opid = |id: &str| format!("~{id}");
    let arrows: Vec<(String, String, String)> = (0..g.arrow_count())
        .map(|a| {
            (
                opid(&g.arrow(a).id),
                g.object(g.tgt_idx(a)).to_string(),
                g.object(g.src_idx(a)).to_string(),
            )
        })
        .collect();
    let mut compose = Vec::new();
    for a in 0..g.arrow_count() {
        for b in 0..g.arrow_count() {
            // f^op ∘ g^op = (g ∘ f)^op
            if let Some(ba) = g.compose_idx(b, a) {
                compose.push((opid(&g.arrow(a).id), opid(&g.arrow(b).id), opid(&g.arrow(ba).id)));
            }
        }
    }
    let units: BTreeMap<String, String> =
        g.objects().iter().map(|x| (x.clone(), opid(g.unit_of(x).unwrap()))).collect();
    let total = FiniteGroupoid::from_tables(g.objects().to_vec(), arrows, &compose, &units).unwrap();
    let embed: BTreeMap<String, BTreeMap<String, String>> = ext
        .embed
        .iter()
        .map(|(x, m)| {
            (x.clone(), m.iter().map(|(el, a)| (el.clone(), opid(a))).collect())
        })
        .collect();
    let proj = GroupoidHom {
        obj_map: g.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
        arr_map: (0..g.arrow_count())
            .map(|a| {
                let ainv = g.inverse_arrow(a);
                (opid(&g.arrow(a).id), ext.proj.arr_map[&g.arrow(ainv).id].clone())
            })
            .collect(),
    };
    Ok(Extension { bundle: ext.bundle.clone(), total, base: ext.base.clone(), embed, proj })
}

/// The Baer sum `G ⊗_K H` of two abelian extensions inducing the same action.
pub fn baer_sum(e1: &Extension, e2: &Extension) -> Result<Extension, Error> {
    if e1.base != e2.base || e1.bundle != e2.bundle {
        return Err(Error::precondition("Baer sum needs matching base and bundle"));
    }
    if !e1.bundle.is_abelian() {
        return Err(Error::precondition("Baer sum needs an abelian kernel"));
    }
    if e1.induced_action()? != e2.induced_action()? {
        return Err(Error::precondition("Baer sum needs equal induced actions"));
    }
    let base = &e1.base;
    let sec2 = e2.canonical_section();
    // canonical representative of g⊗h: h normalized to the canonical section
    // of its fiber by moving a kernel factor onto g
    let canon = |g: usize, h: usize| -> (usize, usize) {
        let e = base.arrow_index(&e1.proj.arr_map[&e1.total.arrow(g).id]).unwrap();
        let einv = base.inverse_arrow(e);
        let h0 = sec2[&einv];
        // h = j2(k) ∘ h0 for a unique k ∈ K_x (x = src of g = tgt of h)
        let x = e1.total.object(e1.total.src_idx(g)).to_string();
        let diff = e2.total.compose_arrows(h, e2.total.inverse_arrow(h0));
        let diff_id = &e2.total.arrow(diff).id;
        let k = e2.embed[&x]
            .iter()
            .find(|(_, a)| *a == diff_id)
            .map(|(el, _)| el.clone())
            .expect("fiber difference lies in the kernel");
        // (g, j(k)∘h0) ~ (g∘i(k⁻¹), h0): the kernel factor crosses the
        // tensor with a sign flip, which is what makes classes add
        let kx = e1.bundle.fiber(&x);
        let kinv = kx.element(kx.inv_idx(kx.index_of(&k).unwrap())).to_string();
        let g_new = e1.total.compose_arrows(g, e1.embed_arrow(&x, &kinv));
        (g_new, h0)
    };
    let label = |g: usize, h: usize| {
        format!("{}⊗{}", e1.total.arrow(g).id, e2.total.arrow(h).id)
    };
    // enumerate canonical pairs
    let mut pairs = BTreeSet::new();
    for g in 0..e1.total.arrow_count() {
        let e = base.arrow_index(&e1.proj.arr_map[&e1.total.arrow(g).id]).unwrap();
        let einv = base.inverse_arrow(e);
        pairs.insert(canon(g, sec2[&einv]));
    }
    let arrows: Vec<(String, String, String)> = pairs
        .iter()
        .map(|&(g, h)| {
            (
                label(g, h),
                e1.total.object(e1.total.src_idx(g)).to_string(),
                e1.total.object(e1.total.tgt_idx(g)).to_string(),
            )
        })
        .collect();
    let mut compose = Vec::new();
    for &(g, h) in &pairs {
        for &(g2, h2) in &pairs {
            // (g⊗h)(g2⊗h2) = g∘g2 ⊗ h2∘h
            if e1.total.src_idx(g) != e1.total.tgt_idx(g2) {
                continue;
            }
            let gprod = e1.total.compose_arrows(g, g2);
            let hprod = e2.total.compose_arrows(h2, h);
            let (cg, ch) = canon(gprod, hprod);
            compose.push((label(g, h), label(g2, h2), label(cg, ch)));
        }
    }
    let units: BTreeMap<String, String> = base
        .objects()
        .iter()
        .map(|x| {
            let ix = e1.total.object_index(x).unwrap();
            let (cg, ch) =
                canon(e1.total.unit_idx(ix).unwrap(), e2.total.unit_idx(ix).unwrap());
            (x.clone(), label(cg, ch))
        })
        .collect();
    let total =
        FiniteGroupoid::from_tables(base.objects().to_vec(), arrows, &compose, &units)?;
    let embed: BTreeMap<String, BTreeMap<String, String>> = base
        .objects()
        .iter()
        .map(|x| {
            let ix = e1.total.object_index(x).unwrap();
            let m = e1.bundle
                .fiber(x)
                .elements()
                .iter()
                .map(|k| {
                    let jk = e1.embed_arrow(x, k);
                    let (cg, ch) = canon(jk, e2.total.unit_idx(ix).unwrap());
                    (k.clone(), label(cg, ch))
                })
                .collect();
            (x.clone(), m)
        })
        .collect();
    let proj = GroupoidHom {
        obj_map: base.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
        arr_map: pairs
            .iter()
            .map(|&(g, h)| (label(g, h), e1.proj.arr_map[&e1.total.arrow(g).id].clone()))
            .collect(),
    };
    Ok(Extension { bundle: e1.bundle.clone(), total, base: base.clone(), embed, proj })
}

// ---------------------------------------------------------------------------
// Twisting by bitorsors.
// ---------------------------------------------------------------------------

/// A twisted extension `P ⊗_K G ⊗_K P⁻¹` together with the basepoints that
/// canonicalize its arrow classes.
pub struct Twisted {
    pub ext: Extension,
    basepoints: BTreeMap<String, String>,
    source: Extension,
    bitorsor: Bitorsor,
}

impl Twisted {
    /// The class of a triple `(q, g, p⁻¹)` as an arrow id of the twisted
    /// groupoid: `q ∈ P_y`, `g: x → y`, `p ∈ P_x`.
    pub fn class_of(&self, q: &str, g: &str, p: &str) -> Result<String, Error> {
        let src = &self.source;
        let gi = src.total.arrow_index(g).ok_or_else(|| Error::invalid("unknown middle arrow"))?;
        let x = src.total.object(src.total.src_idx(gi)).to_string();
        let y = src.total.object(src.total.tgt_idx(gi)).to_string();
        let k_y = self.bitorsor.right.division(&y, &self.basepoints[&y], q)?;
        let l_x = self.bitorsor.right.division(&x, &self.basepoints[&x], p)?;
        // (q₀·k, g, p₀·l) ~ (q₀, j(k)∘g∘j(l⁻¹), p₀)
        let kx = src.bundle.fiber(&x);
        let l_inv = kx.element(kx.inv_idx(kx.index_of(&l_x).unwrap()));
        let mid = src.total.compose_arrows(
            src.total.compose_arrows(src.embed_arrow(&y, &k_y), gi),
            src.embed_arrow(&x, l_inv),
        );
        Ok(format!("tw({})", src.total.arrow(mid).id))
    }
}

/// Twists an extension by an `L`-`K` bitorsor over the same object set; the
/// result is an extension of the same base by `L`.
pub fn twist(p: &Bitorsor, ext: &Extension) -> Result<Twisted, Error> {
    if p.right.bundle != ext.bundle {
        return Err(Error::precondition("right bundle of the bitorsor must match the kernel"));
    }
    let g = &ext.total;
    let basepoints: BTreeMap<String, String> =
        p.fibers().iter().map(|(x, pts)| (x.clone(), pts[0].clone())).collect();
    let twid = |a: usize| format!("tw({})", g.arrow(a).id);
    let arrows: Vec<(String, String, String)> = (0..g.arrow_count())
        .map(|a| {
            (
                twid(a),
                g.object(g.src_idx(a)).to_string(),
                g.object(g.tgt_idx(a)).to_string(),
            )
        })
        .collect();
    let mut compose = Vec::new();
    for a in 0..g.arrow_count() {
        for b in 0..g.arrow_count() {
            if let Some(ab) = g.compose_idx(a, b) {
                compose.push((twid(a), twid(b), twid(ab)));
            }
        }
    }
    let units: BTreeMap<String, String> = g
        .objects()
        .iter()
        .map(|x| {
            let u = g.unit_idx(g.object_index(x).unwrap()).unwrap();
            (x.clone(), twid(u))
        })
        .collect();
    let total = FiniteGroupoid::from_tables(g.objects().to_vec(), arrows, &compose, &units)?;
    // j_P(l) = l·q ⊗ 1 ⊗ q⁻¹ for q the basepoint: tw(j(δ(q, l·q)))
    let mut embed: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for x in g.objects() {
        let q0 = &basepoints[x];
        let mut m = BTreeMap::new();
        for l in p.left_bundle.fiber(x).elements() {
            let moved = p.act_left(l, q0);
            let k = p.right.division(x, q0, moved)?;
            m.insert(l.clone(), twid(ext.embed_arrow(x, &k)));
        }
        embed.insert(x.clone(), m);
    }
    let proj = GroupoidHom {
        obj_map: g.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
        arr_map: (0..g.arrow_count())
            .map(|a| (twid(a), ext.proj.arr_map[&g.arrow(a).id].clone()))
            .collect(),
    };
    let twisted = Extension {
        bundle: p.left_bundle.clone(),
        total,
        base: ext.base.clone(),
        embed,
        proj,
    };
    Ok(Twisted { ext: twisted, basepoints, source: ext.clone(), bitorsor: p.clone() })
}

/// The extension isomorphism induced by a total section `β` of the bitorsor:
/// `β̂(g) = β(y) ⊗ g ⊗ β(x)⁻¹` with `β̄` the conjugation by `β`.
pub fn section_isomorphism(
    tw: &Twisted,
    beta: &TorsorSection,
) -> Result<(BTreeMap<String, BTreeMap<String, String>>, GroupoidHom), Error> {
    let ext = &tw.source;
    for x in ext.total.objects() {
        if !beta.values.contains_key(x) {
            return Err(Error::precondition(format!("section misses {x}")));
        }
    }
    let mut arr_map = BTreeMap::new();
    for a in 0..ext.total.arrow_count() {
        let x = ext.total.object(ext.total.src_idx(a));
        let y = ext.total.object(ext.total.tgt_idx(a));
        let img = tw.class_of(&beta.values[y], &ext.total.arrow(a).id, &beta.values[x])?;
        arr_map.insert(ext.total.arrow(a).id.clone(), img);
    }
    let hom = GroupoidHom {
        obj_map: ext.total.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
        arr_map,
    };
    let conj = crate::torsor::conjugation_by_section(&tw.bitorsor, beta)?;
    Ok((conj, hom))
}

/// Recovers the unique total section `β` with `β̂ = u` from an isomorphism of
/// extensions `u: G → P⊗G⊗P⁻¹` restricting to `α̂` over the transversal.
pub fn recover_section(
    tw: &Twisted,
    u: &GroupoidHom,
    alpha: &TorsorSection,
    t: &Transversal,
) -> Result<TorsorSection, Error> {
    let ext = &tw.source;
    u.validate(&ext.total, &tw.ext.total)?;
    // τ-data: for each object a chosen arrow into the transversal
    let mut tau: BTreeMap<String, usize> = BTreeMap::new();
    for x in ext.total.objects() {
        if t.subset.contains(x) {
            tau.insert(x.clone(), ext.total.unit_idx(ext.total.object_index(x).unwrap()).unwrap());
            continue;
        }
        let ix = ext.total.object_index(x).unwrap();
        let arrow = (0..ext.total.arrow_count())
            .filter(|&a| {
                ext.total.src_idx(a) == ix
                    && t.subset.contains(ext.total.object(ext.total.tgt_idx(a)))
            })
            .min_by_key(|&a| ext.total.arrow(a).id.clone())
            .ok_or_else(|| Error::precondition(format!("no arrow from {x} into the transversal")))?;
        tau.insert(x.clone(), arrow);
    }
    // β(x) is the unique p with u(τ_x) = α(γ(x)) ⊗ τ_x ⊗ p⁻¹
    let mut values = BTreeMap::new();
    for x in ext.total.objects() {
        let tx = tau[x];
        let gamma = ext.total.object(ext.total.tgt_idx(tx)).to_string();
        let aval = alpha
            .values
            .get(&gamma)
            .ok_or_else(|| Error::precondition(format!("α undefined at {gamma}")))?;
        let target = &u.arr_map[&ext.total.arrow(tx).id];
        let mut found = Vec::new();
        for pt in &tw.bitorsor.fibers()[x] {
            if tw.class_of(aval, &ext.total.arrow(tx).id, pt)? == *target {
                found.push(pt.clone());
            }
        }
        match found.len() {
            1 => {
                values.insert(x.clone(), found.pop().unwrap());
            }
            0 => {
                return Err(Error::precondition(format!(
                    "u does not restrict to α̂: no point matches at arrow {}",
                    ext.total.arrow(tx).id
                )))
            }
            _ => return Err(Error::invalid("section point not unique")),
        }
    }
    let beta = TorsorSection::total(values);
    // confirm β̂ = u everywhere, reporting the first failing arrow
    let (_, bhat) = section_isomorphism(tw, &beta)?;
    for a in ext.total.arrow_ids() {
        if bhat.arr_map[a] != u.arr_map[a] {
            return Err(Error::precondition(format!(
                "u does not restrict to α̂: mismatch at arrow {a}"
            )));
        }
    }
    Ok(beta)
}

/// The connecting bitorsor of two extensions with isomorphic restrictions:
/// pairs `(g: t→x in G, h: x→t in H)` with `π(g)ρ(h) = 1` modulo the
/// `H_T`-action, carrying commuting `K`-actions; with its central section
/// over `T` and the isomorphism `ψ: P⊗H⊗P⁻¹ → G`.
pub struct ConnectingBitorsor {
    pub bitorsor: Bitorsor,
    pub alpha: TorsorSection,
    pub twisted: Twisted,
    pub psi: GroupoidHom,
}

pub fn connecting_bitorsor(
    ext_g: &Extension,
    ext_h: &Extension,
    t: &Transversal,
    phi: &GroupoidHom,
) -> Result<ConnectingBitorsor, Error> {
    if ext_g.base != ext_h.base || ext_g.bundle != ext_h.bundle {
        return Err(Error::precondition("extensions must share base and bundle"));
    }
    let (gt, complete) = ext_g.restrict(t)?;
    let (ht, _) = ext_h.restrict(t)?;
    if !complete {
        return Err(Error::precondition("transversal must be complete"));
    }
    phi.validate(&ht.total, &gt.total)?;
    for (a, b) in &phi.arr_map {
        if ht.proj.arr_map[a] != gt.proj.arr_map[b] {
            return Err(Error::precondition("φ does not commute with the projections"));
        }
    }
    for (x, m) in &ht.embed {
        for (k, a) in m {
            if phi.arr_map[a] != gt.embed[x][k] {
                return Err(Error::precondition("φ does not fix the kernel"));
            }
        }
    }
    if phi.arr_map.values().collect::<BTreeSet<_>>().len() != gt.total.arrow_count() {
        return Err(Error::precondition("φ is not bijective"));
    }

    let g = &ext_g.total;
    let h = &ext_h.total;
    // pairs (g: t→x, h: x→t) with π(g)ρ(h) = 1_x
    let mut raw: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for x in g.objects() {
        let ix = g.object_index(x).unwrap();
        let mut pairs = Vec::new();
        for ga in 0..g.arrow_count() {
            if g.tgt_idx(ga) != ix || !t.subset.contains(g.object(g.src_idx(ga))) {
                continue;
            }
            for ha in 0..h.arrow_count() {
                if h.src_idx(ha) != ix || h.tgt_idx(ha) != g.src_idx(ga) {
                    continue;
                }
                let pg = ext_g.base.arrow_index(&ext_g.proj.arr_map[&g.arrow(ga).id]).unwrap();
                let rh = ext_h.base.arrow_index(&ext_h.proj.arr_map[&h.arrow(ha).id]).unwrap();
                let prod = ext_g.base.compose_arrows(pg, rh);
                if ext_g.base.unit_idx(ix) == Some(prod) {
                    pairs.push((ga, ha));
                }
            }
        }
        raw.insert(x.clone(), pairs);
    }
    // orbit closure under (g,h)·f = (g∘φ(f), f⁻¹∘h) for f in H_T
    let ht_arrows: Vec<usize> = ht
        .total
        .arrow_ids()
        .map(|a| h.arrow_index(a).unwrap())
        .collect();
    let canon = |x: &str, pair: (usize, usize)| -> (usize, usize) {
        let mut best = pair;
        let key = |p: &(usize, usize)| {
            (
                g.object(g.src_idx(p.0)).to_string(),
                g.arrow(p.0).id.clone(),
                h.arrow(p.1).id.clone(),
            )
        };
        for &f in &ht_arrows {
            // f: t' → t must end at the transversal point of the pair
            if h.tgt_idx(f) != g.src_idx(pair.0) {
                continue;
            }
            let phi_f_id = &phi.arr_map[&h.arrow(f).id];
            let phi_f = g.arrow_index(phi_f_id).unwrap();
            // (g,h)·f = (g∘φ(f), f⁻¹∘h)
            let moved = (
                g.compose_arrows(pair.0, phi_f),
                h.compose_arrows(h.inverse_arrow(f), pair.1),
            );
            if key(&moved) < key(&best) {
                best = moved;
            }
        }
        let _ = x;
        best
    };
    let plabel = |pair: (usize, usize)| format!("⟨{},{}⟩", g.arrow(pair.0).id, h.arrow(pair.1).id);
    let mut fibers: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut canon_pairs: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for (x, pairs) in &raw {
        let mut reps: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &p in pairs {
            reps.insert(canon(x, p));
        }
        let reps: Vec<(usize, usize)> = reps.into_iter().collect();
        fibers.insert(x.clone(), reps.iter().map(|&p| plabel(p)).collect());
        canon_pairs.insert(x.clone(), reps);
    }
    // actions: k·(g⊗h) = (j_G(k)∘g, h); (g⊗h)·k = (g, h∘j_H(k))
    let mut right = BTreeMap::new();
    let mut left = BTreeMap::new();
    for (x, reps) in &canon_pairs {
        for &(ga, ha) in reps {
            for k in ext_g.bundle.fiber(x).elements() {
                let moved_left =
                    canon(x, (g.compose_arrows(ext_g.embed_arrow(x, k), ga), ha));
                left.insert((k.clone(), plabel((ga, ha))), plabel(moved_left));
                let moved_right =
                    canon(x, (ga, h.compose_arrows(ha, ext_h.embed_arrow(x, k))));
                right.insert((plabel((ga, ha)), k.clone()), plabel(moved_right));
            }
        }
    }
    let bitorsor = Bitorsor::from_parts(
        crate::torsor::Torsor {
            bundle: ext_g.bundle.clone(),
            fibers: fibers.clone(),
            right,
        },
        ext_g.bundle.clone(),
        left,
    );
    bitorsor.validate()?;
    let alpha = TorsorSection::total(
        t.subset
            .iter()
            .map(|tp| {
                let it = g.object_index(tp).unwrap();
                let pair = canon(tp, (g.unit_idx(it).unwrap(), h.unit_idx(it).unwrap()));
                (tp.clone(), plabel(pair))
            })
            .collect(),
    );
    let twisted = twist(&bitorsor, ext_h)?;
    // ψ((g₂⊗h₂) ⊗ h ⊗ (g₁⊗h₁)⁻¹) = g₂ ∘ φ(h₂ h h₁⁻¹) ∘ g₁⁻¹, evaluated on the
    // canonical triples that label twisted arrows
    let mut arr_map = BTreeMap::new();
    for a in 0..twisted.ext.total.arrow_count() {
        let id = twisted.ext.total.arrow(a).id.clone();
        let mid_id = id.strip_prefix("tw(").and_then(|s| s.strip_suffix(')')).unwrap();
        let mid = h.arrow_index(mid_id).unwrap();
        let x = h.object(h.src_idx(mid)).to_string();
        let y = h.object(h.tgt_idx(mid)).to_string();
        let q0 = &twisted.basepoints[&y];
        let p0 = &twisted.basepoints[&x];
        let find_pair = |label: &str, x: &str| -> (usize, usize) {
            canon_pairs[x][fibers[x].iter().position(|l| l == label).unwrap()]
        };
        let (g2, h2) = find_pair(q0, &y);
        let (g1, h1) = find_pair(p0, &x);
        let inner = h.compose_arrows(h.compose_arrows(h2, mid), h.inverse_arrow(h1));
        let phi_inner = g.arrow_index(&phi.arr_map[&h.arrow(inner).id]).unwrap();
        let out = g.compose_arrows(g.compose_arrows(g2, phi_inner), g.inverse_arrow(g1));
        arr_map.insert(id, g.arrow(out).id.clone());
    }
    let psi = GroupoidHom {
        obj_map: g.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
        arr_map,
    };
    Ok(ConnectingBitorsor { bitorsor, alpha, twisted, psi })
}

// ---------------------------------------------------------------------------
// Descent cocycles and reconstruction.
// ---------------------------------------------------------------------------

/// Cocycle data for reconstructing a groupoid over `M` from its restriction
/// over `T`: covering subsets, retractions `γ_i`, and transition arrows
/// `τ_ij(x): γ_j(x) → γ_i(x)` in the groupoid over `T`.
#[derive(Clone, Debug)]
pub struct DescentCocycle {
    pub points: Vec<String>,
    pub cover: Vec<BTreeSet<String>>,
    pub gamma: Vec<BTreeMap<String, String>>,
    /// `(i, j)` → per-point arrow id.
    pub tau: BTreeMap<(usize, usize), BTreeMap<String, String>>,
}

impl DescentCocycle {
    pub fn validate(&self, over_t: &FiniteGroupoid) -> Result<(), Error> {
        for x in &self.points {
            if !self.cover.iter().any(|u| u.contains(x)) {
                return Err(Error::precondition(format!("cover misses {x}")));
            }
        }
        for (i, u) in self.cover.iter().enumerate() {
            for x in u {
                if !self.gamma[i].contains_key(x) {
                    return Err(Error::invalid(format!("γ_{i} undefined at {x}")));
                }
            }
        }
        for i in 0..self.cover.len() {
            for j in 0..self.cover.len() {
                for x in self.cover[i].intersection(&self.cover[j]) {
                    let tid = self
                        .tau
                        .get(&(i, j))
                        .and_then(|m| m.get(x))
                        .ok_or_else(|| Error::invalid(format!("τ_{i}{j} undefined at {x}")))?;
                    let a = over_t
                        .arrow_index(tid)
                        .ok_or_else(|| Error::invalid(format!("unknown arrow {tid}")))?;
                    let src = over_t.object(over_t.src_idx(a));
                    let tgt = over_t.object(over_t.tgt_idx(a));
                    if src != self.gamma[j][x] || tgt != self.gamma[i][x] {
                        return Err(Error::invalid(format!(
                            "τ_{i}{j}({x}) has endpoints {src}→{tgt}"
                        )));
                    }
                    if i == j && Some(tid.as_str()) != over_t.unit_of(&self.gamma[i][x]) {
                        return Err(Error::invalid(format!("τ_{i}{i}({x}) is not a unit")));
                    }
                }
                for k in 0..self.cover.len() {
                    for x in self.cover[i].iter().filter(|x| {
                        self.cover[j].contains(*x) && self.cover[k].contains(*x)
                    }) {
                        let tij = over_t.arrow_index(&self.tau[&(i, j)][x]).unwrap();
                        let tjk = over_t.arrow_index(&self.tau[&(j, k)][x]).unwrap();
                        let tik = over_t.arrow_index(&self.tau[&(i, k)][x]).unwrap();
                        if over_t.compose_idx(tij, tjk) != Some(tik) {
                            return Err(Error::invalid(format!(
                                "cocycle identity fails at ({i},{j},{k}) over {x}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn least_index(&self, x: &str) -> usize {
        self.cover.iter().position(|u| u.contains(x)).expect("cover misses point")
    }
}

/// Rebuilds a groupoid over the cover's points from `G_T` and a descent
/// cocycle; arrows `x→y` are classes of `(i, h, j)` with
/// `h: γ_i(x) → γ_j(y)`, canonicalized to the least cover indices.
pub fn reconstruct_from_cocycle(
    g_t: &FiniteGroupoid,
    dc: &DescentCocycle,
) -> Result<FiniteGroupoid, Error> {
    dc.validate(g_t)?;
    let aid = |x: &str, h: usize, y: &str| format!("[{x};{};{y}]", g_t.arrow(h).id);
    let mut arrows = Vec::new();
    let mut arrow_info = Vec::new();
    for x in &dc.points {
        let i0 = dc.least_index(x);
        let gx = g_t.object_index(&dc.gamma[i0][x]).unwrap();
        for y in &dc.points {
            let j0 = dc.least_index(y);
            let gy = g_t.object_index(&dc.gamma[j0][y]).unwrap();
            for h in g_t.arrows_from_to(gx, gy) {
                arrows.push((aid(x, h, y), x.clone(), y.clone()));
                arrow_info.push((x.clone(), h, y.clone()));
            }
        }
    }
    let mut compose = Vec::new();
    for (x, h1, y) in &arrow_info {
        for (y2, h2, z) in &arrow_info {
            if y2 != y {
                continue;
            }
            let prod = g_t.compose_arrows(*h2, *h1);
            compose.push((aid(y2, *h2, z), aid(x, *h1, y), aid(x, prod, z)));
        }
    }
    let units: BTreeMap<String, String> = dc
        .points
        .iter()
        .map(|x| {
            let i0 = dc.least_index(x);
            let u = g_t.unit_of(&dc.gamma[i0][x]).unwrap();
            (x.clone(), aid(x, g_t.arrow_index(u).unwrap(), x))
        })
        .collect();
    FiniteGroupoid::from_tables(dc.points.clone(), arrows, &compose, &units)
}

/// Translates a general `(i, h, j)` triple into the canonical arrow id of the
/// reconstructed groupoid.
pub fn reconstructed_class(
    g_t: &FiniteGroupoid,
    dc: &DescentCocycle,
    x: &str,
    i: usize,
    h: &str,
    j: usize,
    y: &str,
) -> Result<String, Error> {
    let i0 = dc.least_index(x);
    let j0 = dc.least_index(y);
    let hi = g_t.arrow_index(h).ok_or_else(|| Error::invalid("unknown arrow"))?;
    let tjj0 = g_t.arrow_index(&dc.tau[&(j0, j)][y]).unwrap();
    let tii0 = g_t.arrow_index(&dc.tau[&(i, i0)][x]).unwrap();
    let h0 = g_t.compose_arrows(g_t.compose_arrows(tjj0, hi), tii0);
    Ok(format!("[{x};{};{y}]", g_t.arrow(h0).id))
}

// ---------------------------------------------------------------------------
// Isomorphism search and brute-force class enumeration.
// ---------------------------------------------------------------------------

/// Searches for an isomorphism of extensions fixing `K` and `E`
/// (`π₂∘φ = π₁`, `φ∘j₁ = j₂`, multiplicative). Complete at finite scale.
pub fn extensions_isomorphic(e1: &Extension, e2: &Extension) -> Option<GroupoidHom> {
    if e1.base != e2.base || e1.bundle != e2.bundle {
        return None;
    }
    let base = &e1.base;
    let sec1 = e1.canonical_section();
    // assign images for section arrows over non-unit base arrows
    let unit_arrows: BTreeSet<usize> = (0..base.objects().len())
        .map(|x| base.unit_idx(x).unwrap())
        .collect();
    let order: Vec<usize> = (0..base.arrow_count()).filter(|e| !unit_arrows.contains(e)).collect();
    // unit fibers are forced: φ(1_x) = 1_x
    let mut assign: BTreeMap<usize, usize> = unit_arrows
        .iter()
        .map(|&e| {
            let x = (0..base.objects().len()).find(|&x| base.unit_idx(x) == Some(e)).unwrap();
            (e, e2.total.unit_idx(x).unwrap())
        })
        .collect();
    fn kernel_factor(ext: &Extension, g: usize, g0: usize) -> Option<String> {
        // g = j(k) ∘ g0: returns k
        let t = &ext.total;
        let y = t.object(t.tgt_idx(g)).to_string();
        let d = t.compose_idx(g, t.inv_idx(g0)?)?;
        let did = &t.arrow(d).id;
        ext.embed[&y].iter().find(|(_, a)| *a == did).map(|(k, _)| k.clone())
    }
    struct Search<'a> {
        e1: &'a Extension,
        e2: &'a Extension,
        sec1: &'a BTreeMap<usize, usize>,
        order: &'a [usize],
    }
    impl Search<'_> {
        fn image_of(&self, assign: &BTreeMap<usize, usize>, g: usize) -> Option<usize> {
            // φ(g) for arbitrary g: g = j1(k) ∘ s1(e): φ(g) = j2(k) ∘ assign(e)
            let e = self
                .e1
                .base
                .arrow_index(&self.e1.proj.arr_map[&self.e1.total.arrow(g).id])
                .unwrap();
            let &img_s = assign.get(&e)?;
            let k = kernel_factor(self.e1, g, self.sec1[&e])?;
            let y = self.e1.total.object(self.e1.total.tgt_idx(g));
            Some(self.e2.total.compose_arrows(self.e2.embed_arrow(y, &k), img_s))
        }

        fn consistent(&self, assign: &BTreeMap<usize, usize>) -> bool {
            // check multiplicativity on all fully assigned section pairs
            for (&ea, &sa) in assign {
                for (&eb, &sb) in assign {
                    let Some(eab) = self.e1.base.compose_idx(ea, eb) else { continue };
                    if !assign.contains_key(&eab) {
                        continue;
                    }
                    let g1prod =
                        self.e1.total.compose_arrows(self.sec1[&ea], self.sec1[&eb]);
                    let lhs = self.image_of(assign, g1prod).unwrap();
                    let rhs = self.e2.total.compose_arrows(sa, sb);
                    if lhs != rhs {
                        return false;
                    }
                }
            }
            true
        }

        fn dfs(&self, pos: usize, assign: &mut BTreeMap<usize, usize>) -> bool {
            let Some(&e) = self.order.get(pos) else {
                return true;
            };
            let fiber2 = self.e2.fiber(e);
            for cand in fiber2 {
                assign.insert(e, cand);
                if self.consistent(assign) && self.dfs(pos + 1, assign) {
                    return true;
                }
                assign.remove(&e);
            }
            false
        }
    }
    let search = Search { e1, e2, sec1: &sec1, order: &order };
    if !search.dfs(0, &mut assign) {
        return None;
    }
    let arr_map: BTreeMap<String, String> = (0..e1.total.arrow_count())
        .map(|g| {
            let img = search.image_of(&assign, g).expect("assignment is total");
            (e1.total.arrow(g).id.clone(), e2.total.arrow(img).id.clone())
        })
        .collect();
    let hom = GroupoidHom {
        obj_map: e1.total.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
        arr_map,
    };
    // final verification
    if hom.validate(&e1.total, &e2.total).is_err() {
        return None;
    }
    Some(hom)
}

/// One extension per isomorphism class with kernel `K`, base `E` and induced
/// action `μ`, found by brute force over normalized groupoid factor sets.
pub fn enumerate_extension_classes(
    coeff: &EquivariantBundle,
    guard: u128,
) -> Result<Vec<Extension>, Error> {
    if !coeff.bundle.is_abelian() {
        return Err(Error::precondition("brute-force enumeration needs abelian K"));
    }
    let e = &coeff.groupoid;
    let k = &coeff.bundle;
    let unit_arrows: BTreeSet<usize> =
        (0..e.objects().len()).map(|x| e.unit_idx(x).unwrap()).collect();
    // free slots: composable pairs of non-unit arrows
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for f in 0..e.arrow_count() {
        for a in 0..e.arrow_count() {
            if e.compose_idx(f, a).is_some()
                && !unit_arrows.contains(&f)
                && !unit_arrows.contains(&a)
            {
                slots.push((f, a));
            }
        }
    }
    let slot_index: BTreeMap<(usize, usize), usize> =
        slots.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut space: u128 = 1;
    for &(_, a) in &slots {
        let x = e.object(e.src_idx(a));
        space = space.saturating_mul(k.fiber(x).order() as u128);
        if space > guard {
            return Err(Error::guard(format!("factor-set space exceeds {guard}")));
        }
    }
    // triples (f2, f1, a) of composable non-unit arrows, with their slots
    struct Triple {
        lhs_pair: Option<usize>, // (f2, f1)
        lhs_whole: Option<usize>, // (f2∘f1, a)
        rhs_inner: Option<usize>, // (f1, a)
        rhs_outer: Option<usize>, // (f2, f1∘a)
        act_arrow: usize,         // a, acting on c(f2,f1)
        fiber: String,            // src of a
        max_slot: usize,
    }
    let mut triples = Vec::new();
    for f2 in 0..e.arrow_count() {
        for f1 in 0..e.arrow_count() {
            let Some(f21) = e.compose_idx(f2, f1) else { continue };
            for a in 0..e.arrow_count() {
                if e.compose_idx(f1, a).is_none() {
                    continue;
                }
                let f1a = e.compose_arrows(f1, a);
                let lhs_pair = slot_index.get(&(f2, f1)).copied();
                let lhs_whole = slot_index.get(&(f21, a)).copied();
                let rhs_inner = slot_index.get(&(f1, a)).copied();
                let rhs_outer = slot_index.get(&(f2, f1a)).copied();
                let involved: Vec<usize> =
                    [lhs_pair, lhs_whole, rhs_inner, rhs_outer].into_iter().flatten().collect();
                if involved.is_empty() {
                    continue;
                }
                triples.push(Triple {
                    lhs_pair,
                    lhs_whole,
                    rhs_inner,
                    rhs_outer,
                    act_arrow: a,
                    fiber: e.object(e.src_idx(a)).to_string(),
                    max_slot: involved.into_iter().max().unwrap(),
                });
            }
        }
    }
    let mut by_slot: Vec<Vec<usize>> = vec![Vec::new(); slots.len().max(1)];
    for (i, t) in triples.iter().enumerate() {
        if !slots.is_empty() {
            by_slot[t.max_slot].push(i);
        }
    }
    // DFS over slot assignments
    let mut results: Vec<Vec<usize>> = Vec::new();
    let mut cur: Vec<usize> = vec![0; slots.len()];
    fn check(
        coeff: &EquivariantBundle,
        slots: &[(usize, usize)],
        cur: &[usize],
        t: &Triple,
    ) -> bool {
        let k = coeff.bundle.fiber(&t.fiber);
        let id = k.id_idx();
        let val = |slot: Option<usize>| slot.map_or(id, |s| cur[s]);
        // (c(f2,f1)·a) · c(f2∘f1, a) = c(f1,a) · c(f2, f1∘a)
        let acted = match t.lhs_pair {
            None => id,
            Some(s) => {
                // c(f2,f1) lives in the fiber at src(f1); transport along a
                let f1 = slots[s].1;
                let src_f1 = coeff.groupoid.object(coeff.groupoid.src_idx(f1));
                let kf = coeff.bundle.fiber(src_f1);
                let name = kf.element(cur[s]);
                let moved = coeff
                    .action
                    .act(name, &coeff.groupoid.arrow(t.act_arrow).id)
                    .expect("action entry");
                k.index_of(moved).unwrap()
            }
        };
        let lhs = k.mul_idx(acted, val(t.lhs_whole));
        let rhs = k.mul_idx(val(t.rhs_inner), val(t.rhs_outer));
        lhs == rhs
    }
    fn dfs(
        coeff: &EquivariantBundle,
        slots: &[(usize, usize)],
        by_slot: &[Vec<usize>],
        triples: &[Triple],
        cur: &mut Vec<usize>,
        pos: usize,
        results: &mut Vec<Vec<usize>>,
    ) {
        if pos == slots.len() {
            results.push(cur.clone());
            return;
        }
        let (_, a) = slots[pos];
        let x = coeff.groupoid.object(coeff.groupoid.src_idx(a));
        for v in 0..coeff.bundle.fiber(x).order() {
            cur[pos] = v;
            if by_slot[pos].iter().all(|&t| check(coeff, slots, cur, &triples[t])) {
                dfs(coeff, slots, by_slot, triples, cur, pos + 1, results);
            }
        }
        cur[pos] = 0;
    }
    if slots.is_empty() {
        // still must check the unit-only triples vacuously
        results.push(Vec::new());
    } else {
        dfs(coeff, &slots, &by_slot, &triples, &mut cur, 0, &mut results);
    }

    // build extensions from factor sets and bucket by isomorphism
    let mut classes: Vec<Extension> = Vec::new();
    for assignment in results {
        let c = |f: usize, a: usize| -> usize {
            let x = e.object(e.src_idx(a));
            match slot_index.get(&(f, a)) {
                Some(&s) => assignment[s],
                None => k.fiber(x).id_idx(),
            }
        };
        let ext = extension_from_factor_set(coeff, &c)?;
        if classes.iter().all(|rep| extensions_isomorphic(rep, &ext).is_none()) {
            classes.push(ext);
        }
    }
    Ok(classes)
}

/// Builds the extension with arrows `(k; e)` and multiplication
/// `(l,f)(k,e) = ((l·e)·k·c(f,e), f∘e)` from a normalized factor set.
pub fn extension_from_factor_set(
    coeff: &EquivariantBundle,
    c: &dyn Fn(usize, usize) -> usize,
) -> Result<Extension, Error> {
    let e = &coeff.groupoid;
    let k = &coeff.bundle;
    let aid = |kel: &str, earr: &str| format!("({kel};{earr})");
    let mut arrows = Vec::new();
    for a in 0..e.arrow_count() {
        let x = e.object(e.src_idx(a));
        let y = e.object(e.tgt_idx(a));
        for kel in k.fiber(x).elements() {
            arrows.push((aid(kel, &e.arrow(a).id), x.to_string(), y.to_string()));
        }
    }
    let mut compose = Vec::new();
    for f in 0..e.arrow_count() {
        for a in 0..e.arrow_count() {
            let Some(fa) = e.compose_idx(f, a) else { continue };
            let x = e.object(e.src_idx(a));
            let y = e.object(e.tgt_idx(a));
            let kx = k.fiber(x);
            let cofactor = c(f, a);
            for l in k.fiber(y).elements() {
                let le = coeff.action.act(l, &e.arrow(a).id).expect("action entry");
                let le_idx = kx.index_of(le).unwrap();
                for (ki, kel) in kx.elements().iter().enumerate() {
                    let prod = kx.mul_idx(kx.mul_idx(le_idx, ki), cofactor);
                    compose.push((
                        aid(l, &e.arrow(f).id),
                        aid(kel, &e.arrow(a).id),
                        aid(kx.element(prod), &e.arrow(fa).id),
                    ));
                }
            }
        }
    }
    let units: BTreeMap<String, String> = e
        .objects()
        .iter()
        .map(|x| (x.clone(), aid(k.fiber(x).identity(), e.unit_of(x).unwrap())))
        .collect();
    let total = FiniteGroupoid::from_tables(e.objects().to_vec(), arrows, &compose, &units)?;
    let embed: BTreeMap<String, BTreeMap<String, String>> = e
        .objects()
        .iter()
        .map(|x| {
            let u = e.unit_of(x).unwrap();
            (
                x.clone(),
                k.fiber(x).elements().iter().map(|kel| (kel.clone(), aid(kel, u))).collect(),
            )
        })
        .collect();
    let proj = GroupoidHom {
        obj_map: e.objects().iter().map(|o| (o.clone(), o.clone())).collect(),
        arr_map: (0..e.arrow_count())
            .flat_map(|a| {
                let x = e.object(e.src_idx(a)).to_string();
                let eid = e.arrow(a).id.clone();
                k.fiber(&x)
                    .elements()
                    .iter()
                    .map(move |kel| (aid(kel, &eid), eid.clone()))
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    Ok(Extension { bundle: k.clone(), total, base: e.clone(), embed, proj })
}
