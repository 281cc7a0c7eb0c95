//! Finite groups as explicit multiplication tables.

use crate::error::Error;
use crate::linalg::{smith, IntMat};
use std::collections::BTreeMap;
use std::fmt;

/// A finite group given by a total multiplication table. Elements are opaque
/// string identifiers; all structure is index-based internally.
#[derive(Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    elements: Vec<String>,
    index: BTreeMap<String, usize>,
    mul: Vec<usize>,
    inv: Vec<usize>,
    id: usize,
}

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteGroup(order {})", self.order())
    }
}

impl FiniteGroup {
    /// Builds a group from `(a, b, ab)` triples and checks the group axioms.
    pub fn from_table(
        elements: Vec<String>,
        table: &[(String, String, String)],
        identity: &str,
    ) -> Result<FiniteGroup, Error> {
        let n = elements.len();
        if n == 0 {
            return Err(Error::invalid("group must be nonempty"));
        }
        let index: BTreeMap<String, usize> =
            elements.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        if index.len() != n {
            return Err(Error::invalid("duplicate group element identifier"));
        }
        let mut mul = vec![usize::MAX; n * n];
        for (a, b, ab) in table {
            let (&i, &j, &k) = match (index.get(a), index.get(b), index.get(ab)) {
                (Some(i), Some(j), Some(k)) => (i, j, k),
                _ => return Err(Error::invalid(format!("unknown element in entry ({a},{b},{ab})"))),
            };
            if mul[i * n + j] != usize::MAX && mul[i * n + j] != k {
                return Err(Error::invalid(format!("conflicting products for ({a},{b})")));
            }
            mul[i * n + j] = k;
        }
        if let Some(pos) = mul.iter().position(|&v| v == usize::MAX) {
            return Err(Error::invalid(format!(
                "missing product ({},{})",
                elements[pos / n],
                elements[pos % n]
            )));
        }
        let id = *index
            .get(identity)
            .ok_or_else(|| Error::invalid(format!("unknown identity element {identity}")))?;
        let mut inv = vec![usize::MAX; n];
        for i in 0..n {
            if mul[id * n + i] != i || mul[i * n + id] != i {
                return Err(Error::invalid(format!("{identity} is not a two-sided identity")));
            }
            for j in 0..n {
                if mul[i * n + j] == id && mul[j * n + i] == id {
                    inv[i] = j;
                }
            }
            if inv[i] == usize::MAX {
                return Err(Error::invalid(format!("element {} has no inverse", elements[i])));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if mul[mul[a * n + b] * n + c] != mul[a * n + mul[b * n + c]] {
                        return Err(Error::invalid(format!(
                            "associativity fails at ({},{},{})",
                            elements[a], elements[b], elements[c]
                        )));
                    }
                }
            }
        }
        Ok(FiniteGroup { elements, index, mul, inv, id })
    }

    fn from_indexed(elements: Vec<String>, mul: Vec<usize>, id: usize) -> FiniteGroup {
        let n = elements.len();
        let index = elements.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let mut inv = vec![0; n];
        for i in 0..n {
            inv[i] = (0..n).find(|&j| mul[i * n + j] == id && mul[j * n + i] == id).unwrap();
        }
        FiniteGroup { elements, index, mul, inv, id }
    }

    /// The cyclic group Z/n with elements "0",…,"n-1".
    pub fn cyclic(n: usize) -> FiniteGroup {
        assert!(n >= 1);
        let elements: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let mut mul = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                mul[i * n + j] = (i + j) % n;
            }
        }
        FiniteGroup::from_indexed(elements, mul, 0)
    }

    /// The symmetric group on `n` letters (n ≤ 4 is plenty here); elements
    /// are one-line permutation words like "1320".
    pub fn symmetric(n: usize) -> FiniteGroup {
        assert!((1..=4).contains(&n), "symmetric(n) supported for n <= 4");
        let mut perms: Vec<Vec<usize>> = vec![vec![]];
        for k in 0..n {
            let mut next = Vec::new();
            for p in &perms {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, k);
                    next.push(q);
                }
            }
            perms = next;
        }
        perms.sort();
        let word = |p: &Vec<usize>| p.iter().map(usize::to_string).collect::<String>();
        let elements: Vec<String> = perms.iter().map(word).collect();
        let m = perms.len();
        let mut mul = vec![0; m * m];
        for (i, p) in perms.iter().enumerate() {
            for (j, q) in perms.iter().enumerate() {
                // (p * q)(x) = p(q(x))
                let composite: Vec<usize> = (0..n).map(|x| p[q[x]]).collect();
                mul[i * m + j] = perms.iter().position(|r| *r == composite).unwrap();
            }
        }
        let id = perms.iter().position(|p| p.iter().enumerate().all(|(i, &v)| i == v)).unwrap();
        FiniteGroup::from_indexed(elements, mul, id)
    }

    /// Dihedral group of order `2n`: rotations "r<i>" and reflections "s<i>".
    pub fn dihedral(order: usize) -> FiniteGroup {
        assert!(order >= 2 && order % 2 == 0, "dihedral order must be even");
        let n = order / 2;
        let elements: Vec<String> = (0..n)
            .map(|i| format!("r{i}"))
            .chain((0..n).map(|i| format!("s{i}")))
            .collect();
        // r^i * r^j = r^{i+j}; r^i * s^j = s^{i+j}; s^i * r^j = s^{i-j}; s^i * s^j = r^{i-j}
        let mut mul = vec![0; order * order];
        let rot = |i: usize| i % n;
        for i in 0..n {
            for j in 0..n {
                mul[i * order + j] = rot(i + j);
                mul[i * order + (n + j)] = n + rot(i + j);
                mul[(n + i) * order + j] = n + rot(i + n - rot(j));
                mul[(n + i) * order + (n + j)] = rot(i + n - rot(j));
            }
        }
        FiniteGroup::from_indexed(elements, mul, 0)
    }

    /// Direct product; elements are "a|b".
    pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> FiniteGroup {
        let (na, nb) = (a.order(), b.order());
        let elements: Vec<String> = (0..na)
            .flat_map(|i| (0..nb).map(move |j| (i, j)))
            .map(|(i, j)| format!("{}|{}", a.elements[i], b.elements[j]))
            .collect();
        let n = na * nb;
        let mut mul = vec![0; n * n];
        for i1 in 0..na {
            for j1 in 0..nb {
                for i2 in 0..na {
                    for j2 in 0..nb {
                        let x = i1 * nb + j1;
                        let y = i2 * nb + j2;
                        mul[x * n + y] = a.mul_idx(i1, i2) * nb + b.mul_idx(j1, j2);
                    }
                }
            }
        }
        FiniteGroup::from_indexed(elements, mul, a.id * nb + b.id)
    }

    /// Parses shorthand like "Z/4", "S3", "D12" and products "Z/2×Z/2"
    /// (an ASCII "x" separator is accepted too).
    pub fn from_shorthand(spec: &str) -> Result<FiniteGroup, Error> {
        let parts: Vec<&str> = spec.split(['×', 'x']).map(str::trim).collect();
        let mut groups = Vec::new();
        for part in &parts {
            let g = if let Some(n) = part.strip_prefix("Z/") {
                let n: usize = n.parse().map_err(|_| Error::invalid(format!("bad modulus in {part}")))?;
                if n == 0 {
                    return Err(Error::invalid("Z/0 is not finite"));
                }
                FiniteGroup::cyclic(n)
            } else if let Some(n) = part.strip_prefix('S') {
                let n: usize = n.parse().map_err(|_| Error::invalid(format!("bad degree in {part}")))?;
                FiniteGroup::symmetric(n)
            } else if let Some(n) = part.strip_prefix('D') {
                let n: usize = n.parse().map_err(|_| Error::invalid(format!("bad order in {part}")))?;
                FiniteGroup::dihedral(n)
            } else {
                return Err(Error::invalid(format!("unknown group shorthand {part}")));
            };
            groups.push(g);
        }
        let mut it = groups.into_iter();
        let first = it.next().ok_or_else(|| Error::invalid("empty group shorthand"))?;
        Ok(it.fold(first, |acc, g| FiniteGroup::direct_product(&acc, &g)))
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &str {
        &self.elements[i]
    }

    pub fn index_of(&self, e: &str) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn id_idx(&self) -> usize {
        self.id
    }

    pub fn identity(&self) -> &str {
        &self.elements[self.id]
    }

    #[inline]
    pub fn mul_idx(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.elements.len() + b]
    }

    #[inline]
    pub fn inv_idx(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn mul_elem(&self, a: &str, b: &str) -> Option<&str> {
        let (i, j) = (self.index_of(a)?, self.index_of(b)?);
        Some(self.element(self.mul_idx(i, j)))
    }

    pub fn element_order(&self, a: usize) -> usize {
        let mut ord = 1;
        let mut acc = a;
        while acc != self.id {
            acc = self.mul_idx(acc, a);
            ord += 1;
        }
        ord
    }

    pub fn pow_idx(&self, a: usize, n: i128) -> usize {
        let mut e = n.rem_euclid(self.element_order(a) as i128);
        let mut acc = self.id;
        while e > 0 {
            acc = self.mul_idx(acc, a);
            e -= 1;
        }
        acc
    }

    pub fn conjugate_idx(&self, g: usize, x: usize) -> usize {
        self.mul_idx(self.mul_idx(g, x), self.inv_idx(g))
    }

    pub fn is_abelian(&self) -> bool {
        let n = self.order();
        (0..n).all(|a| (a..n).all(|b| self.mul_idx(a, b) == self.mul_idx(b, a)))
    }

    /// Is the given subset of element indices a subgroup?
    pub fn is_subgroup(&self, subset: &[usize]) -> bool {
        if !subset.contains(&self.id) {
            return false;
        }
        subset.iter().all(|&a| {
            subset.contains(&self.inv_idx(a))
                && subset.iter().all(|&b| subset.contains(&self.mul_idx(a, b)))
        })
    }

    /// A small generating set, greedily extended.
    pub fn generating_set(&self) -> Vec<usize> {
        let mut gens: Vec<usize> = Vec::new();
        let mut span = vec![false; self.order()];
        span[self.id] = true;
        let mut covered = 1;
        while covered < self.order() {
            let next = (0..self.order()).find(|&i| !span[i]).unwrap();
            gens.push(next);
            // close the span
            let mut frontier = vec![next];
            while let Some(g) = frontier.pop() {
                if span[g] {
                    continue;
                }
                span[g] = true;
                covered += 1;
                for h in 0..self.order() {
                    if span[h] {
                        let p = self.mul_idx(g, h);
                        if !span[p] {
                            frontier.push(p);
                        }
                        let q = self.mul_idx(h, g);
                        if !span[q] {
                            frontier.push(q);
                        }
                    }
                }
            }
        }
        gens
    }

    /// All automorphisms, as elementwise image tables.
    pub fn automorphisms(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        let mut found = Vec::new();
        let mut image = vec![usize::MAX; n];
        image[self.id] = self.id;
        self.extend_automorphism(&mut image, &mut found);
        found.sort();
        found
    }

    fn extend_automorphism(&self, image: &mut Vec<usize>, found: &mut Vec<Vec<usize>>) {
        let n = self.order();
        let Some(next) = (0..n).find(|&i| image[i] == usize::MAX) else {
            found.push(image.clone());
            return;
        };
        'cand: for cand in 0..n {
            if image.contains(&cand) {
                continue;
            }
            image[next] = cand;
            // check all products among currently assigned elements
            for a in 0..n {
                if image[a] == usize::MAX {
                    continue;
                }
                for b in 0..n {
                    if image[b] == usize::MAX {
                        continue;
                    }
                    let p = self.mul_idx(a, b);
                    if image[p] != usize::MAX && self.mul_idx(image[a], image[b]) != image[p] {
                        image[next] = usize::MAX;
                        continue 'cand;
                    }
                }
            }
            self.extend_automorphism(image, found);
            image[next] = usize::MAX;
        }
    }

    /// Checks that `map` (elementwise images) is a homomorphism into `target`.
    pub fn is_homomorphism(&self, target: &FiniteGroup, map: &[usize]) -> bool {
        map.len() == self.order()
            && (0..self.order()).all(|a| {
                (0..self.order())
                    .all(|b| target.mul_idx(map[a], map[b]) == map[self.mul_idx(a, b)])
            })
    }
}

/// Coordinates for a finite abelian group: an isomorphism with
/// `⊕ Z/d_i` extracted from the multiplication table by Smith reduction
/// of the relation lattice.
#[derive(Clone, Debug)]
pub struct AbelianStructure {
    /// Invariant factors `d_1 | d_2 | …`, each > 1 (trivial group: empty).
    pub factors: Vec<i128>,
    to_coords: Vec<Vec<i128>>,
    from_coords: BTreeMap<Vec<i128>, usize>,
    /// One group element per coordinate factor, mapping to that unit vector.
    pub coord_reps: Vec<usize>,
}

impl AbelianStructure {
    pub fn order(&self) -> i128 {
        self.factors.iter().product()
    }

    pub fn coords(&self, elem: usize) -> &[i128] {
        &self.to_coords[elem]
    }

    pub fn element_of(&self, coords: &[i128]) -> usize {
        let key = self.normalize(coords);
        self.from_coords[&key]
    }

    pub fn normalize(&self, coords: &[i128]) -> Vec<i128> {
        coords.iter().zip(&self.factors).map(|(&c, &d)| c.rem_euclid(d)).collect()
    }
}

/// Decomposes an abelian group given by a table; `None` when non-abelian.
pub fn abelian_structure(g: &FiniteGroup) -> Option<AbelianStructure> {
    if !g.is_abelian() {
        return None;
    }
    let n = g.order();
    let gens = g.generating_set();
    // Relations e_a + e_h - e_{ah} for all a and generating h present the group
    // on the basis of all elements.
    let mut cols: Vec<Vec<i128>> = Vec::new();
    for a in 0..n {
        for &h in &gens {
            let mut col = vec![0i128; n];
            col[a] += 1;
            col[h] += 1;
            col[g.mul_idx(a, h)] -= 1;
            if col.iter().any(|&v| v != 0) {
                cols.push(col);
            }
        }
    }
    // The identity is trivial in the quotient.
    let mut e1 = vec![0i128; n];
    e1[g.id_idx()] = 1;
    cols.push(e1);
    let rel = IntMat::from_cols(cols, n);
    let s = smith(&rel);
    assert_eq!(s.rank, n, "finite group must have full-rank relation lattice");
    let diag = s.diagonal();
    let kept: Vec<usize> = (0..n).filter(|&i| diag[i] > 1).collect();
    let factors: Vec<i128> = kept.iter().map(|&i| diag[i]).collect();

    let mut to_coords = Vec::with_capacity(n);
    for e in 0..n {
        let mut unit = vec![0i128; n];
        unit[e] = 1;
        let w = s.u.mul_vec(&unit);
        let coords: Vec<i128> =
            kept.iter().zip(&factors).map(|(&i, &d)| w[i].rem_euclid(d)).collect();
        to_coords.push(coords);
    }
    let from_coords: BTreeMap<Vec<i128>, usize> =
        to_coords.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    assert_eq!(from_coords.len(), n, "coordinate map must be bijective");

    let coord_reps: Vec<usize> = (0..factors.len())
        .map(|j| {
            let mut unit = vec![0i128; factors.len()];
            unit[j] = 1;
            from_coords[&unit]
        })
        .collect();
    Some(AbelianStructure { factors, to_coords, from_coords, coord_reps })
}

/// The matrix of a homomorphism between abelian groups, with respect to the
/// coordinates of the given structures.
pub fn hom_matrix(
    dom: &AbelianStructure,
    cod: &AbelianStructure,
    map: impl Fn(usize) -> usize,
) -> IntMat {
    let cols: Vec<Vec<i128>> =
        dom.coord_reps.iter().map(|&rep| cod.coords(map(rep)).to_vec()).collect();
    IntMat::from_cols(cols, cod.factors.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_tables() {
        let z4 = FiniteGroup::cyclic(4);
        assert_eq!(z4.order(), 4);
        assert_eq!(z4.mul_elem("3", "2"), Some("1"));
        assert!(z4.is_abelian());
    }

    #[test]
    fn symmetric_three_is_nonabelian_of_order_six() {
        let s3 = FiniteGroup::symmetric(3);
        assert_eq!(s3.order(), 6);
        assert!(!s3.is_abelian());
        assert_eq!(s3.automorphisms().len(), 6);
    }

    #[test]
    fn dihedral_twelve() {
        let d12 = FiniteGroup::dihedral(12);
        assert_eq!(d12.order(), 12);
        assert!(!d12.is_abelian());
    }

    #[test]
    fn shorthand_parses_products() {
        let g = FiniteGroup::from_shorthand("Z/2×Z/3").unwrap();
        assert_eq!(g.order(), 6);
        assert!(g.is_abelian());
        assert!(FiniteGroup::from_shorthand("Q8").is_err());
    }

    #[test]
    fn abelian_structure_of_klein_group() {
        let v4 = FiniteGroup::from_shorthand("Z/2×Z/2").unwrap();
        let st = abelian_structure(&v4).unwrap();
        assert_eq!(st.factors, vec![2, 2]);
        for e in 0..4 {
            assert_eq!(st.element_of(st.coords(e)), e);
        }
        assert!(abelian_structure(&FiniteGroup::symmetric(3)).is_none());
    }

    #[test]
    fn abelian_structure_of_z6_is_single_factor() {
        let z6 = FiniteGroup::cyclic(6);
        let st = abelian_structure(&z6).unwrap();
        assert_eq!(st.factors, vec![6]);
    }

    #[test]
    fn automorphisms_of_cyclic_groups() {
        assert_eq!(FiniteGroup::cyclic(3).automorphisms().len(), 2);
        assert_eq!(FiniteGroup::cyclic(4).automorphisms().len(), 2);
        assert_eq!(FiniteGroup::cyclic(2).automorphisms().len(), 1);
    }

    #[test]
    fn table_validation_rejects_bad_identity() {
        let err = FiniteGroup::from_table(
            vec!["a".into(), "b".into()],
            &[
                ("a".into(), "a".into(), "a".into()),
                ("a".into(), "b".into(), "b".into()),
                ("b".into(), "a".into(), "b".into()),
                ("b".into(), "b".into(), "b".into()),
            ],
            "a",
        );
        assert!(err.is_err());
    }
}
