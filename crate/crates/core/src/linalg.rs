//! Dense integer matrices and Smith normal form over the integers.
//!
//! All cohomology in this crate reduces to exact integer linear algebra on
//! small matrices, so the implementation favours clarity over asymptotics:
//! pivoting on the minimum absolute value, clearing a cross, and restoring
//! divisibility of the diagonal. Transform matrices and their inverses are
//! tracked so that quotient groups come with explicit coordinates.

use std::fmt;

/// Column-major would buy nothing here; entries are `data[r * cols + c]`.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    data: Vec<i128>,
}

fn checked_mul(a: i128, b: i128) -> i128 {
    a.checked_mul(b).expect("integer overflow in exact arithmetic")
}

fn checked_add(a: i128, b: i128) -> i128 {
    a.checked_add(b).expect("integer overflow in exact arithmetic")
}

impl IntMat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMat { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMat::zero(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i128>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        IntMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_cols(cols: Vec<Vec<i128>>, rows: usize) -> Self {
        let c = cols.len();
        let mut m = IntMat::zero(rows, c);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged columns");
            for (i, &v) in col.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn diagonal(entries: &[i128]) -> Self {
        let n = entries.len();
        let mut m = IntMat::zero(n, n);
        for (i, &d) in entries.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> i128 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: i128) {
        self.data[r * self.cols + c] = v;
    }

    pub fn col(&self, c: usize) -> Vec<i128> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn mul(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = IntMat::zero(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let v = checked_add(out.get(r, c), checked_mul(a, other.get(k, c)));
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[i128]) -> Vec<i128> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|r| {
                (0..self.cols).fold(0i128, |acc, c| {
                    checked_add(acc, checked_mul(self.get(r, c), v[c]))
                })
            })
            .collect()
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.rows, other.rows, "row mismatch");
        let mut out = IntMat::zero(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r, c, self.get(r, c));
            }
            for c in 0..other.cols {
                out.set(r, self.cols + c, other.get(r, c));
            }
        }
        out
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for r in 0..self.rows {
            self.data.swap(r * self.cols + a, r * self.cols + b);
        }
    }

    fn negate_row(&mut self, r: usize) {
        for c in 0..self.cols {
            let v = self.get(r, c);
            self.set(r, c, -v);
        }
    }

    /// row[dst] += q * row[src]
    fn add_row(&mut self, dst: usize, src: usize, q: i128) {
        for c in 0..self.cols {
            let v = checked_add(self.get(dst, c), checked_mul(q, self.get(src, c)));
            self.set(dst, c, v);
        }
    }

    /// col[dst] += q * col[src]
    fn add_col(&mut self, dst: usize, src: usize, q: i128) {
        for r in 0..self.rows {
            let v = checked_add(self.get(r, dst), checked_mul(q, self.get(r, src)));
            self.set(r, dst, v);
        }
    }
}

impl fmt::Debug for IntMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMat {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// `u * a * v = d` with `u`, `v` unimodular and `d` in Smith normal form.
/// `u_inv` and `v_inv` are the tracked inverses.
pub struct Smith {
    pub u: IntMat,
    pub u_inv: IntMat,
    pub v: IntMat,
    pub v_inv: IntMat,
    pub d: IntMat,
    pub rank: usize,
}

impl Smith {
    pub fn diagonal(&self) -> Vec<i128> {
        (0..self.rank).map(|i| self.d.get(i, i)).collect()
    }
}

pub fn smith(a: &IntMat) -> Smith {
    let mut d = a.clone();
    let (rows, cols) = (d.rows, d.cols);
    let mut u = IntMat::identity(rows);
    let mut u_inv = IntMat::identity(rows);
    let mut v = IntMat::identity(cols);
    let mut v_inv = IntMat::identity(cols);

    let n = rows.min(cols);
    let mut k = 0;
    while k < n {
        // Locate the minimum nonzero entry in the trailing block.
        let mut pivot: Option<(usize, usize)> = None;
        for r in k..rows {
            for c in k..cols {
                let val = d.get(r, c).abs();
                if val != 0 && pivot.is_none_or(|(pr, pc)| val < d.get(pr, pc).abs()) {
                    pivot = Some((r, c));
                }
            }
        }
        let Some((pr, pc)) = pivot else { break };
        d.swap_rows(k, pr);
        u.swap_rows(k, pr);
        u_inv.swap_cols(k, pr);
        d.swap_cols(k, pc);
        v.swap_cols(k, pc);
        v_inv.swap_rows(k, pc);

        // Clear row and column k; restart if a remainder forces a smaller pivot.
        let mut dirty = false;
        for r in k + 1..rows {
            let q = d.get(r, k).div_euclid(d.get(k, k));
            if q != 0 {
                d.add_row(r, k, -q);
                u.add_row(r, k, -q);
                u_inv.add_col(k, r, q);
            }
            if d.get(r, k) != 0 {
                dirty = true;
            }
        }
        for c in k + 1..cols {
            let q = d.get(k, c).div_euclid(d.get(k, k));
            if q != 0 {
                d.add_col(c, k, -q);
                v.add_col(c, k, -q);
                v_inv.add_row(k, c, q);
            }
            if d.get(k, c) != 0 {
                dirty = true;
            }
        }
        if dirty {
            continue;
        }

        // Divisibility: fold any entry not divisible by d[k,k] into row k.
        let dk = d.get(k, k);
        let mut offender = None;
        'scan: for r in k + 1..rows {
            for c in k + 1..cols {
                if d.get(r, c) % dk != 0 {
                    offender = Some(r);
                    break 'scan;
                }
            }
        }
        if let Some(r) = offender {
            d.add_row(k, r, 1);
            u.add_row(k, r, 1);
            u_inv.add_col(r, k, -1);
            continue;
        }

        if d.get(k, k) < 0 {
            d.negate_row(k);
            u.negate_row(k);
            for r in 0..rows {
                let val = u_inv.get(r, k);
                u_inv.set(r, k, -val);
            }
        }
        k += 1;
    }

    let rank = (0..n).take_while(|&i| d.get(i, i) != 0).count();
    Smith { u, u_inv, v, v_inv, d, rank }
}

/// One integer solution of `a x = b`, if any.
pub fn solve(a: &IntMat, b: &[i128]) -> Option<Vec<i128>> {
    let s = smith(a);
    let ub = s.u.mul_vec(b);
    let mut y = vec![0i128; a.cols()];
    for (i, &ubi) in ub.iter().enumerate() {
        if i < s.rank {
            let d = s.d.get(i, i);
            if ubi % d != 0 {
                return None;
            }
            y[i] = ubi / d;
        } else if ubi != 0 {
            return None;
        }
    }
    Some(s.v.mul_vec(&y))
}

/// A basis for the integer kernel lattice `{x : a x = 0}`.
pub fn kernel_basis(a: &IntMat) -> Vec<Vec<i128>> {
    let s = smith(a);
    (s.rank..a.cols()).map(|j| s.v.col(j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smith_known_form() {
        let a = IntMat::from_rows(vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, 4, 16]]);
        let s = smith(&a);
        assert_eq!(s.diagonal(), vec![2, 2, 156]);
    }

    #[test]
    fn solve_finds_witness() {
        let a = IntMat::from_rows(vec![vec![2, 0], vec![0, 3]]);
        assert_eq!(solve(&a, &[4, 9]), Some(vec![2, 3]));
        assert_eq!(solve(&a, &[1, 0]), None);
    }

    #[test]
    fn kernel_of_projection() {
        let a = IntMat::from_rows(vec![vec![1, 1, 0]]);
        let basis = kernel_basis(&a);
        assert_eq!(basis.len(), 2);
        for b in basis {
            assert_eq!(a.mul_vec(&b), vec![0]);
        }
    }

    proptest! {
        #[test]
        fn smith_transforms_are_consistent(
            entries in proptest::collection::vec(-9i128..=9, 12),
        ) {
            let a = IntMat { rows: 3, cols: 4, data: entries };
            let s = smith(&a);
            prop_assert_eq!(s.u.mul(&a).mul(&s.v), s.d.clone());
            prop_assert_eq!(s.u.mul(&s.u_inv), IntMat::identity(3));
            prop_assert_eq!(s.v.mul(&s.v_inv), IntMat::identity(4));
            for i in 0..s.rank.saturating_sub(1) {
                prop_assert_eq!(s.d.get(i + 1, i + 1) % s.d.get(i, i), 0);
            }
        }
    }
}
