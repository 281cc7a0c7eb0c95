//! Fiberwise torsors and bitorsors over a finite base: division maps,
//! inversion, tensor products, adjoint bundles, conjugation by sections,
//! and the classification of bitorsors over a discrete base.

use crate::error::Error;
use crate::group::FiniteGroup;
use crate::bundle::GroupBundle;
use itertools::Itertools;
use std::collections::{BTreeMap, BTreeSet};

/// A right `K`-torsor: finite fibers with a free transitive right action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Torsor {
    pub bundle: GroupBundle,
    /// Points of each fiber, sorted.
    pub fibers: BTreeMap<String, Vec<String>>,
    /// `(point, fiber element) → point`.
    pub right: BTreeMap<(String, String), String>,
}

/// A left `L`-torsor; the mirror of [`Torsor`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeftTorsor {
    pub bundle: GroupBundle,
    pub fibers: BTreeMap<String, Vec<String>>,
    /// `(fiber element, point) → point`.
    pub left: BTreeMap<(String, String), String>,
}

/// A left-`L`, right-`K` bitorsor with commuting actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitorsor {
    pub right: Torsor,
    pub left_bundle: GroupBundle,
    pub left: BTreeMap<(String, String), String>,
}

/// A partial section of a torsor: a chosen point in each fiber over `domain`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorsorSection {
    pub values: BTreeMap<String, String>,
}

impl TorsorSection {
    pub fn total(values: BTreeMap<String, String>) -> TorsorSection {
        TorsorSection { values }
    }

    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

impl Torsor {
    /// The trivial torsor: each fiber is `K_x` acting on itself.
    pub fn trivial(bundle: &GroupBundle) -> Torsor {
        let mut fibers = BTreeMap::new();
        let mut right = BTreeMap::new();
        for x in &bundle.base {
            let k = bundle.fiber(x);
            let pts: Vec<String> = k.elements().iter().map(|e| format!("{x}.{e}")).collect();
            for (i, p) in pts.iter().enumerate() {
                for (j, e) in k.elements().iter().enumerate() {
                    right.insert((p.clone(), e.clone()), format!("{x}.{}", k.element(k.mul_idx(i, j))));
                }
            }
            fibers.insert(x.clone(), pts);
        }
        Torsor { bundle: bundle.clone(), fibers, right }
    }

    pub fn fiber_of_point(&self, p: &str) -> Option<&str> {
        self.fibers.iter().find(|(_, pts)| pts.iter().any(|q| q == p)).map(|(x, _)| x.as_str())
    }

    pub fn act(&self, p: &str, k: &str) -> &str {
        &self.right[&(p.to_string(), k.to_string())]
    }

    pub fn validate(&self) -> Result<(), Error> {
        for x in &self.bundle.base {
            let pts = self
                .fibers
                .get(x)
                .ok_or_else(|| Error::invalid(format!("missing fiber over {x}")))?;
            if pts.is_empty() {
                return Err(Error::invalid(format!("empty torsor fiber over {x}")));
            }
            let k = self.bundle.fiber(x);
            for p in pts {
                // k ↦ p·k must be a bijection onto the fiber
                let mut seen = BTreeSet::new();
                for e in k.elements() {
                    let q = self
                        .right
                        .get(&(p.clone(), e.clone()))
                        .ok_or_else(|| Error::invalid(format!("action of {e} on {p} missing")))?;
                    if !pts.contains(q) {
                        return Err(Error::invalid(format!("action leaves the fiber at {p}·{e}")));
                    }
                    seen.insert(q.clone());
                }
                if seen.len() != pts.len() {
                    return Err(Error::invalid(format!("action at {p} is not free and transitive")));
                }
                if self.act(p, k.identity()) != p {
                    return Err(Error::invalid(format!("identity moves {p}")));
                }
                for a in k.elements() {
                    for b in k.elements() {
                        let ab = k.mul_elem(a, b).unwrap();
                        if self.act(self.act(p, a), b) != self.act(p, ab) {
                            return Err(Error::invalid(format!("associativity fails at ({p},{a},{b})")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The unique `k` with `q·k = p` (both in the fiber over `x`).
    pub fn division(&self, x: &str, q: &str, p: &str) -> Result<String, Error> {
        let pts = self.fibers.get(x).ok_or_else(|| Error::invalid(format!("unknown base point {x}")))?;
        if !pts.contains(&q.to_string()) || !pts.contains(&p.to_string()) {
            return Err(Error::precondition(format!("{q} and {p} must lie in the fiber over {x}")));
        }
        let k = self.bundle.fiber(x);
        for e in k.elements() {
            if self.act(q, e) == p {
                return Ok(e.clone());
            }
        }
        unreachable!("free transitive action always divides")
    }

    /// The inverse left torsor `P⁻¹` with `k·p⁻¹ = (p·k⁻¹)⁻¹` (same points).
    pub fn invert(&self) -> LeftTorsor {
        let mut left = BTreeMap::new();
        for x in &self.bundle.base {
            let k = self.bundle.fiber(x);
            for p in &self.fibers[x] {
                for e in k.elements() {
                    let einv = k.element(k.inv_idx(k.index_of(e).unwrap()));
                    left.insert((e.clone(), p.clone()), self.act(p, einv).to_string());
                }
            }
        }
        LeftTorsor { bundle: self.bundle.clone(), fibers: self.fibers.clone(), left }
    }

    /// Pushforward `τ_!(P)`: same points, new action `p * k = p·τ⁻¹(k)`,
    /// where `τ` is a per-fiber automorphism given elementwise.
    pub fn pushforward(&self, tau: &BTreeMap<String, BTreeMap<String, String>>) -> Torsor {
        let mut right = BTreeMap::new();
        for x in &self.bundle.base {
            let k = self.bundle.fiber(x);
            let t = &tau[x];
            let tinv: BTreeMap<&String, &String> = t.iter().map(|(a, b)| (b, a)).collect();
            for p in &self.fibers[x] {
                for e in k.elements() {
                    right.insert((p.clone(), e.clone()), self.act(p, tinv[e]).to_string());
                }
            }
        }
        Torsor { bundle: self.bundle.clone(), fibers: self.fibers.clone(), right }
    }
}

impl LeftTorsor {
    pub fn act(&self, k: &str, p: &str) -> &str {
        &self.left[&(k.to_string(), p.to_string())]
    }

    /// Double inversion: back to a right torsor (`(P⁻¹)⁻¹`).
    pub fn invert(&self) -> Torsor {
        let mut right = BTreeMap::new();
        for x in &self.bundle.base {
            let k = self.bundle.fiber(x);
            for p in &self.fibers[x] {
                for e in k.elements() {
                    let einv = k.element(k.inv_idx(k.index_of(e).unwrap()));
                    right.insert((p.clone(), e.clone()), self.act(einv, p).to_string());
                }
            }
        }
        Torsor { bundle: self.bundle.clone(), fibers: self.fibers.clone(), right }
    }
}

impl Bitorsor {
    /// The trivial `K`-`K` bitorsor (left and right translation on `K`).
    pub fn trivial(bundle: &GroupBundle) -> Bitorsor {
        Bitorsor::twisted(bundle, &identity_automorphism(bundle))
    }

    /// `(P, σ)`: trivial underlying right torsor, left action `k·p = p·σ(k)`.
    pub fn twisted(bundle: &GroupBundle, sigma: &BTreeMap<String, BTreeMap<String, String>>) -> Bitorsor {
        let right = Torsor::trivial(bundle);
        let mut left = BTreeMap::new();
        for x in &bundle.base {
            for p in &right.fibers[x] {
                for e in bundle.fiber(x).elements() {
                    left.insert((e.clone(), p.clone()), right.act(p, &sigma[x][e]).to_string());
                }
            }
        }
        Bitorsor { right, left_bundle: bundle.clone(), left }
    }

    pub fn from_parts(
        right: Torsor,
        left_bundle: GroupBundle,
        left: BTreeMap<(String, String), String>,
    ) -> Bitorsor {
        Bitorsor { right, left_bundle, left }
    }

    pub fn base(&self) -> &[String] {
        &self.right.bundle.base
    }

    pub fn fibers(&self) -> &BTreeMap<String, Vec<String>> {
        &self.right.fibers
    }

    pub fn act_left(&self, l: &str, p: &str) -> &str {
        &self.left[&(l.to_string(), p.to_string())]
    }

    pub fn act_right(&self, p: &str, k: &str) -> &str {
        self.right.act(p, k)
    }

    /// Division for the left action: the unique `l` with `l·q = p`.
    pub fn left_division(&self, x: &str, q: &str, p: &str) -> Result<String, Error> {
        for l in self.left_bundle.fiber(x).elements() {
            if self.act_left(l, q) == p {
                return Ok(l.clone());
            }
        }
        Err(Error::precondition(format!("{q} and {p} not in one fiber over {x}")))
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.right.validate()?;
        for x in self.base() {
            let l = self.left_bundle.fiber(x);
            let pts = &self.right.fibers[x];
            for p in pts {
                let mut seen = BTreeSet::new();
                for e in l.elements() {
                    let q = self
                        .left
                        .get(&(e.clone(), p.clone()))
                        .ok_or_else(|| Error::invalid(format!("left action of {e} on {p} missing")))?;
                    seen.insert(q.clone());
                }
                if seen.len() != pts.len() {
                    return Err(Error::invalid(format!("left action at {p} not free and transitive")));
                }
                if self.act_left(l.identity(), p) != p {
                    return Err(Error::invalid(format!("left identity moves {p}")));
                }
                for a in l.elements() {
                    for b in l.elements() {
                        let ab = l.mul_elem(a, b).unwrap();
                        if self.act_left(a, self.act_left(b, p)) != self.act_left(ab, p) {
                            return Err(Error::invalid(format!("left associativity fails at {p}")));
                        }
                    }
                }
                // compatibility l(pk) = (lp)k
                for e in l.elements() {
                    for k in self.right.bundle.fiber(x).elements() {
                        if self.act_left(e, self.act_right(p, k))
                            != self.act_right(self.act_left(e, p), k)
                        {
                            return Err(Error::invalid(format!("actions do not commute at {p}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The inverse `K`-`L` bitorsor `P⁻¹`.
    pub fn invert(&self) -> Bitorsor {
        // Right action of L on P⁻¹: p⁻¹·l = (l⁻¹·p)⁻¹; left action of K:
        // k·p⁻¹ = (p·k⁻¹)⁻¹.
        let mut right = BTreeMap::new();
        let mut left = BTreeMap::new();
        for x in self.base() {
            let l = self.left_bundle.fiber(x);
            let k = self.right.bundle.fiber(x);
            for p in &self.right.fibers[x] {
                for e in l.elements() {
                    let einv = l.element(l.inv_idx(l.index_of(e).unwrap()));
                    right.insert((p.clone(), e.clone()), self.act_left(einv, p).to_string());
                }
                for e in k.elements() {
                    let einv = k.element(k.inv_idx(k.index_of(e).unwrap()));
                    left.insert((e.clone(), p.clone()), self.act_right(p, einv).to_string());
                }
            }
        }
        Bitorsor {
            right: Torsor {
                bundle: self.left_bundle.clone(),
                fibers: self.right.fibers.clone(),
                right,
            },
            left_bundle: self.right.bundle.clone(),
            left,
        }
    }

    /// For abelian `K` and a `K`-`K` bitorsor, the automorphism `σ` with
    /// `k·p = p·σ(k)` (§3.5 form). Errors when the bitorsor is not of this
    /// form (non-abelian or point-dependent).
    pub fn twist_automorphism(&self) -> Result<BTreeMap<String, BTreeMap<String, String>>, Error> {
        let mut out = BTreeMap::new();
        for x in self.base() {
            let k = self.right.bundle.fiber(x);
            let mut sigma: Option<BTreeMap<String, String>> = None;
            for p in &self.right.fibers[x] {
                let cand: BTreeMap<String, String> = k
                    .elements()
                    .iter()
                    .map(|e| {
                        let lp = self.act_left(e, p);
                        (e.clone(), self.right.division(x, p, lp).unwrap())
                    })
                    .collect();
                match &sigma {
                    None => sigma = Some(cand),
                    Some(prev) if *prev != cand => {
                        return Err(Error::precondition(format!(
                            "left action at {x} is not right translation by a single automorphism"
                        )))
                    }
                    _ => {}
                }
            }
            out.insert(x.clone(), sigma.unwrap());
        }
        Ok(out)
    }
}

fn identity_automorphism(bundle: &GroupBundle) -> BTreeMap<String, BTreeMap<String, String>> {
    bundle
        .base
        .iter()
        .map(|x| {
            (
                x.clone(),
                bundle.fiber(x).elements().iter().map(|e| (e.clone(), e.clone())).collect(),
            )
        })
        .collect()
}

/// Canonical representative of the class of `(p, q)` under `(pk, q) ~ (p, kq)`:
/// the lexicographically least equivalent pair.
fn tensor_class(
    p: &str,
    q: &str,
    right_of_p: &Torsor,
    left_of_q: &dyn Fn(&str, &str) -> String,
    k: &FiniteGroup,
) -> (String, String) {
    let mut best = (p.to_string(), q.to_string());
    for e in k.elements() {
        let einv = k.element(k.inv_idx(k.index_of(e).unwrap()));
        let cand = (right_of_p.act(p, e).to_string(), left_of_q(einv, q));
        if cand < best {
            best = cand;
        }
    }
    best
}

/// The tensor product `P ⊗_K Q` of a right torsor and a left torsor over the
/// same bundle: fibers of size `|K_x|` with canonical least-pair labels.
pub fn tensor_fibers(p: &Torsor, q: &LeftTorsor) -> Result<BTreeMap<String, Vec<(String, String)>>, Error> {
    if p.bundle != q.bundle {
        return Err(Error::precondition("tensor requires matching structure bundles"));
    }
    let mut out = BTreeMap::new();
    for x in &p.bundle.base {
        let k = p.bundle.fiber(x);
        let mut classes = BTreeSet::new();
        for pt in &p.fibers[x] {
            for qt in &q.fibers[x] {
                let left_act = |e: &str, point: &str| q.act(e, point).to_string();
                classes.insert(tensor_class(pt, qt, p, &left_act, k));
            }
        }
        let classes: Vec<(String, String)> = classes.into_iter().collect();
        if classes.len() != k.order() {
            return Err(Error::invalid(format!(
                "tensor fiber over {x} has {} classes, expected |K| = {}",
                classes.len(),
                k.order()
            )));
        }
        out.insert(x.clone(), classes);
    }
    Ok(out)
}

/// Tensor product of bitorsors: for `_L P _K` and `_K Q _H` this is
/// `_L (P ⊗_K Q) _H`, with point labels `p⊗q` canonicalized to the least pair.
pub fn tensor_bitorsors(p: &Bitorsor, q: &Bitorsor) -> Result<Bitorsor, Error> {
    if p.right.bundle != q.left_bundle {
        return Err(Error::precondition("right bundle of P must equal left bundle of Q"));
    }
    let mid = &p.right.bundle;
    let label = |pair: &(String, String)| format!("{}⊗{}", pair.0, pair.1);
    let mut fibers = BTreeMap::new();
    let mut right = BTreeMap::new();
    let mut left = BTreeMap::new();
    for x in p.base() {
        let k = mid.fiber(x);
        let canon = |pt: &str, qt: &str| {
            let left_act = |e: &str, point: &str| q.act_left(e, point).to_string();
            tensor_class(pt, qt, &p.right, &left_act, k)
        };
        let mut classes = BTreeSet::new();
        for pt in &p.right.fibers[x] {
            for qt in &q.right.fibers[x] {
                classes.insert(canon(pt, qt));
            }
        }
        let classes: Vec<(String, String)> = classes.into_iter().collect();
        for pair in &classes {
            for h in q.right.bundle.fiber(x).elements() {
                let img = canon(&pair.0, q.act_right(&pair.1, h));
                right.insert((label(pair), h.clone()), label(&img));
            }
            for l in p.left_bundle.fiber(x).elements() {
                let img = canon(p.act_left(l, &pair.0), &pair.1);
                left.insert((l.clone(), label(pair)), label(&img));
            }
        }
        fibers.insert(x.clone(), classes.iter().map(&label).collect());
    }
    Ok(Bitorsor {
        right: Torsor { bundle: q.right.bundle.clone(), fibers: fibers.clone(), right },
        left_bundle: p.left_bundle.clone(),
        left,
    })
}

/// The adjoint bundle `P ⊗_K P⁻¹` of a right torsor, with multiplication
/// `(p⊗q⁻¹)(r⊗s⁻¹) = p(q⁻¹r) ⊗ s⁻¹`.
pub fn adjoint_bundle(p: &Torsor) -> Result<GroupBundle, Error> {
    let pinv = p.invert();
    let classes = tensor_fibers(p, &pinv)?;
    let mut fibers = BTreeMap::new();
    for x in &p.bundle.base {
        let k = p.bundle.fiber(x);
        let canon = |a: &str, b: &str| {
            let left_act = |e: &str, point: &str| pinv.act(e, point).to_string();
            let c = tensor_class(a, b, p, &left_act, k);
            format!("{}⊗{}", c.0, c.1)
        };
        let elements: Vec<String> = classes[x].iter().map(|c| format!("{}⊗{}", c.0, c.1)).collect();
        let mut table = Vec::new();
        for (a, b) in &classes[x] {
            for (c, d) in &classes[x] {
                // (a⊗b⁻¹)(c⊗d⁻¹) = a(b⁻¹c) ⊗ d⁻¹
                let binv_c = p.division(x, b, c)?;
                let prod = canon(p.act(a, &binv_c), d);
                table.push((canon(a, b), canon(c, d), prod));
            }
        }
        let unit_pt = &p.fibers[x][0];
        let unit = canon(unit_pt, unit_pt);
        fibers.insert(x.clone(), FiniteGroup::from_table(elements, &table, &unit)?);
    }
    GroupBundle::new(p.bundle.base.clone(), fibers)
}

/// Conjugation by a section of an `L`-`K` bitorsor: `ᾱ(k)` is the unique `l`
/// with `α(x)·k = l·α(x)`. Returns the per-point map `K_x → L_x`.
pub fn conjugation_by_section(
    p: &Bitorsor,
    alpha: &TorsorSection,
) -> Result<BTreeMap<String, BTreeMap<String, String>>, Error> {
    let mut out = BTreeMap::new();
    for (x, pt) in &alpha.values {
        let k = p.right.bundle.fiber(x);
        let mut conj = BTreeMap::new();
        for e in k.elements() {
            let moved = p.act_right(pt, e);
            conj.insert(e.clone(), p.left_division(x, pt, moved)?);
        }
        out.insert(x.clone(), conj);
    }
    Ok(out)
}

/// Is a section of a `K`-`K` bitorsor central (conjugation = identity)?
pub fn is_central_section(p: &Bitorsor, alpha: &TorsorSection) -> Result<bool, Error> {
    if p.left_bundle != p.right.bundle {
        return Err(Error::precondition("centrality needs a K-K bitorsor"));
    }
    let conj = conjugation_by_section(p, alpha)?;
    Ok(conj.iter().all(|(_, m)| m.iter().all(|(a, b)| a == b)))
}

/// Searches for an isomorphism of bitorsors (bijections per fiber commuting
/// with both actions); `None` when the two are not isomorphic.
pub fn bitorsors_isomorphic(p: &Bitorsor, q: &Bitorsor) -> Option<BTreeMap<String, String>> {
    if p.base() != q.base() || p.right.bundle != q.right.bundle || p.left_bundle != q.left_bundle {
        return None;
    }
    let mut map = BTreeMap::new();
    for x in p.base() {
        let l = p.left_bundle.fiber(x);
        let pf = &p.right.fibers[x];
        let qf = &q.right.fibers[x];
        if pf.len() != qf.len() {
            return None;
        }
        // an equivariant map is determined by the image of one point
        let base_pt = &pf[0];
        let image = qf.iter().find(|&cand| {
            // φ(base_pt·d) := cand·d is right-equivariant by construction;
            // left-equivariance everywhere follows from left-equivariance at
            // the base point because the two actions commute.
            l.elements().iter().all(|f| {
                let p_moved = p.act_left(f, base_pt);
                let kdiv = p.right.division(x, base_pt, p_moved).unwrap();
                q.act_right(cand, &kdiv) == q.act_left(f, cand)
            })
        })?;
        for pt in pf {
            let d = p.right.division(x, base_pt, pt).unwrap();
            map.insert(pt.clone(), q.act_right(image, &d).to_string());
        }
    }
    Some(map)
}

/// The group of `K`-`K` bitorsor classes over a discrete base under tensor:
/// representatives, the class multiplication table, and the abstract group.
pub struct BitorsorClassification {
    pub representatives: Vec<Bitorsor>,
    pub group: FiniteGroup,
}

/// Enumerates `K`-`K` bitorsors up to isomorphism for abelian `K` over a
/// finite discrete base. Every right torsor over such a base trivializes, so
/// classes are enumerated on trivialized carriers; multiplication is computed
/// by the actual bitorsor tensor followed by isomorphism search.
pub fn classify_bitorsors(bundle: &GroupBundle) -> Result<BitorsorClassification, Error> {
    if !bundle.is_abelian() {
        return Err(Error::precondition("classification formula requires abelian fibers"));
    }
    let per_point: Vec<(String, Vec<Vec<usize>>)> = bundle
        .base
        .iter()
        .map(|x| (x.clone(), bundle.fiber(x).automorphisms()))
        .collect();
    let mut reps: Vec<Bitorsor> = Vec::new();
    for combo in per_point.iter().map(|(_, auts)| 0..auts.len()).multi_cartesian_product() {
        let sigma: BTreeMap<String, BTreeMap<String, String>> = per_point
            .iter()
            .zip(&combo)
            .map(|((x, auts), &i)| {
                let k = bundle.fiber(x);
                let m: BTreeMap<String, String> = (0..k.order())
                    .map(|e| (k.element(e).to_string(), k.element(auts[i][e]).to_string()))
                    .collect();
                (x.clone(), m)
            })
            .collect();
        let cand = Bitorsor::twisted(bundle, &sigma);
        if reps.iter().all(|r| bitorsors_isomorphic(r, &cand).is_none()) {
            reps.push(cand);
        }
    }
    let class_of = |b: &Bitorsor| -> usize {
        reps.iter()
            .position(|r| bitorsors_isomorphic(r, b).is_some())
            .expect("tensor of classes must land in a class")
    };
    let elements: Vec<String> = (0..reps.len()).map(|i| format!("c{i}")).collect();
    let mut table = Vec::new();
    let mut identity = None;
    let trivial = Bitorsor::trivial(bundle);
    for (i, a) in reps.iter().enumerate() {
        if bitorsors_isomorphic(a, &trivial).is_some() {
            identity = Some(i);
        }
        for (j, b) in reps.iter().enumerate() {
            let prod = tensor_bitorsors(a, b)?;
            table.push((elements[i].clone(), elements[j].clone(), format!("c{}", class_of(&prod))));
        }
    }
    let id = identity.ok_or_else(|| Error::invalid("no trivial class found"))?;
    let group = FiniteGroup::from_table(elements.clone(), &table, &format!("c{id}"))?;
    Ok(BitorsorClassification { representatives: reps, group })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z3_bundle() -> GroupBundle {
        GroupBundle::constant(vec!["x".into()], FiniteGroup::cyclic(3))
    }

    #[test]
    fn trivial_torsor_validates_and_divides() {
        let t = Torsor::trivial(&z3_bundle());
        t.validate().unwrap();
        // q = 1, p = 2 in additive notation: k = 1
        assert_eq!(t.division("x", "x.1", "x.2").unwrap(), "1");
        assert_eq!(t.division("x", "x.2", "x.2").unwrap(), "0");
    }

    #[test]
    fn division_in_s3_torsor() {
        let s3 = FiniteGroup::symmetric(3);
        let b = GroupBundle::constant(vec!["x".into()], s3.clone());
        let t = Torsor::trivial(&b);
        // q = (12) = "102", p = (123); in one-line words the product q·k = p
        let q = "x.102";
        let p = "x.201";
        let k = t.division("x", q, p).unwrap();
        assert_eq!(s3.mul_elem("102", &k), Some("201"));
    }

    #[test]
    fn double_inversion_restores_action() {
        let t = Torsor::trivial(&GroupBundle::constant(vec!["x".into()], FiniteGroup::cyclic(4)));
        let back = t.invert().invert();
        assert_eq!(t, back);
    }

    #[test]
    fn left_action_of_inverse_follows_defining_identity() {
        let k2 = FiniteGroup::cyclic(2);
        let t = Torsor::trivial(&GroupBundle::constant(vec!["x".into()], k2.clone()));
        let inv = t.invert();
        // k·p⁻¹ = (p·k⁻¹)⁻¹: for Z/2, 1·(0)⁻¹ = (0·1)⁻¹ = point 1
        assert_eq!(inv.act("1", "x.0"), "x.1");
    }

    #[test]
    fn z4_inverse_action_example() {
        let t = Torsor::trivial(&GroupBundle::constant(vec!["x".into()], FiniteGroup::cyclic(4)));
        let inv = t.invert();
        // k=1 acting on p=0 in P⁻¹: (0·(−1))⁻¹ = point 3
        assert_eq!(inv.act("1", "x.0"), "x.3");
    }

    #[test]
    fn tensor_with_trivial_has_fiber_size_k() {
        let b = GroupBundle::constant(vec!["x".into(), "y".into()], FiniteGroup::cyclic(2));
        let p = Torsor::trivial(&b);
        let q = Torsor::trivial(&b).invert();
        let classes = tensor_fibers(&p, &q).unwrap();
        assert!(classes.values().all(|c| c.len() == 2));
    }

    #[test]
    fn tensor_inverse_law_gives_adjoint_iso_to_k_for_abelian() {
        let b = z3_bundle();
        let adj = adjoint_bundle(&Torsor::trivial(&b)).unwrap();
        // abelian case: p⊗q⁻¹ ↦ q⁻¹p is an isomorphism onto K
        let k = b.fiber("x");
        let t = Torsor::trivial(&b);
        let mut images = BTreeSet::new();
        for cls in adj.fiber("x").elements() {
            let (a, bpt) = cls.split_once('⊗').unwrap();
            images.insert(t.division("x", bpt, a).unwrap());
        }
        assert_eq!(images.len(), k.order());
        assert_eq!(adj.fiber("x").order(), k.order());
        assert!(adj.fiber("x").is_abelian());
    }

    #[test]
    fn adjoint_of_s3_torsor_is_s3_shaped() {
        let s3 = FiniteGroup::symmetric(3);
        let b = GroupBundle::constant(vec!["x".into()], s3.clone());
        let adj = adjoint_bundle(&Torsor::trivial(&b)).unwrap();
        assert_eq!(adj.fiber("x").order(), 6);
        assert!(!adj.fiber("x").is_abelian());
    }

    #[test]
    fn unit_section_of_adjoint_is_independent_of_point() {
        let b = GroupBundle::constant(vec!["x".into()], FiniteGroup::cyclic(4));
        let p = Torsor::trivial(&b);
        let pinv = p.invert();
        let k = b.fiber("x");
        let canon = |a: &str, c: &str| {
            let left_act = |e: &str, point: &str| pinv.act(e, point).to_string();
            tensor_class(a, c, &p, &left_act, k)
        };
        let units: BTreeSet<_> = p.fibers["x"].iter().map(|pt| canon(pt, pt)).collect();
        assert_eq!(units.len(), 1);
    }

    #[test]
    fn conjugation_by_section_of_trivial_bitorsor_is_identity() {
        let b = z3_bundle();
        let bt = Bitorsor::trivial(&b);
        bt.validate().unwrap();
        let alpha = TorsorSection::total([("x".into(), "x.1".into())].into());
        assert!(is_central_section(&bt, &alpha).unwrap());
    }

    #[test]
    fn twisted_bitorsor_section_is_not_central() {
        let b = GroupBundle::constant(vec!["x".into()], FiniteGroup::cyclic(4));
        let k = FiniteGroup::cyclic(4);
        // σ = inversion on Z/4
        let sigma: BTreeMap<String, BTreeMap<String, String>> = [(
            "x".to_string(),
            k.elements()
                .iter()
                .map(|e| {
                    let i = k.index_of(e).unwrap();
                    (e.clone(), k.element(k.inv_idx(i)).to_string())
                })
                .collect(),
        )]
        .into();
        let bt = Bitorsor::twisted(&b, &sigma);
        bt.validate().unwrap();
        let alpha = TorsorSection::total([("x".into(), "x.0".into())].into());
        assert!(!is_central_section(&bt, &alpha).unwrap());
        let conj = conjugation_by_section(&bt, &alpha).unwrap();
        // ᾱ(k) solves α·k = l·α = α·σ(l): so ᾱ = σ⁻¹ = inversion
        assert_eq!(conj["x"]["1"], "3");
    }

    #[test]
    fn abelian_bitorsor_sections_are_central_for_identity_twist() {
        let b = z3_bundle();
        let bt = Bitorsor::trivial(&b);
        for pt in &bt.right.fibers["x"] {
            let alpha = TorsorSection::total([("x".into(), pt.clone())].into());
            assert!(is_central_section(&bt, &alpha).unwrap());
        }
    }

    #[test]
    fn classify_bitorsors_over_point_z3() {
        let c = classify_bitorsors(&z3_bundle()).unwrap();
        assert_eq!(c.group.order(), 2);
    }

    #[test]
    fn classify_bitorsors_over_point_z2_is_trivial() {
        let b = GroupBundle::constant(vec!["x".into()], FiniteGroup::cyclic(2));
        let c = classify_bitorsors(&b).unwrap();
        assert_eq!(c.group.order(), 1);
    }

    #[test]
    fn classify_bitorsors_two_points_z4() {
        let b = GroupBundle::constant(vec!["x".into(), "y".into()], FiniteGroup::cyclic(4));
        let c = classify_bitorsors(&b).unwrap();
        assert_eq!(c.group.order(), 4);
    }

    #[test]
    fn classification_rejects_nonabelian() {
        let b = GroupBundle::constant(vec!["x".into()], FiniteGroup::symmetric(3));
        assert!(classify_bitorsors(&b).is_err());
    }

    #[test]
    fn abelian_tensor_formula_agrees_at_class_level() {
        // (P,σ)⊗(Q,τ) ≅ (τ_!(P) ⊗^(r) Q, τσ) — compare classes both ways
        let b = GroupBundle::constant(vec!["x".into()], FiniteGroup::cyclic(4));
        let k = FiniteGroup::cyclic(4);
        let auts = k.automorphisms();
        for sa in &auts {
            for ta in &auts {
                let to_map = |a: &Vec<usize>| -> BTreeMap<String, BTreeMap<String, String>> {
                    [(
                        "x".to_string(),
                        (0..k.order())
                            .map(|e| (k.element(e).to_string(), k.element(a[e]).to_string()))
                            .collect::<BTreeMap<_, _>>(),
                    )]
                    .into()
                };
                let p = Bitorsor::twisted(&b, &to_map(sa));
                let q = Bitorsor::twisted(&b, &to_map(ta));
                let lhs = tensor_bitorsors(&p, &q).unwrap();
                // τσ composite automorphism
                let comp: Vec<usize> = (0..k.order()).map(|e| ta[sa[e]]).collect();
                let rhs = Bitorsor::twisted(&b, &to_map(&comp));
                assert!(
                    bitorsors_isomorphic(&lhs, &rhs).is_some(),
                    "tensor formula mismatch for twists {sa:?}, {ta:?}"
                );
            }
        }
    }
}
