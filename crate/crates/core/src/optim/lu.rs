//! Sparse LU factorization of simplex bases (left-looking, threshold
//! partial pivoting) and product-form updates between refactorizations.

const NONE: usize = usize::MAX;
const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;

/// Compressed sparse column.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseCol {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

/// `P B Q = L U` with columns processed in `pivot_pos` order.
#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactor {
    m: usize,
    pivot_row: Vec<usize>,
    pivot_pos: Vec<usize>,
    l_start: Vec<usize>,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_step: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
}

/// A basis column that turned out linearly dependent and was swapped for
/// the logical column of `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Replacement {
    pub position: usize,
    pub row: usize,
}

impl LuFactor {
    /// Factorizes the basis whose column at position `p` is `cols[p]`.
    /// Logical columns are `-e_row`.
    pub fn factorize(m: usize, cols: &[SparseCol]) -> (Self, Vec<Replacement>) {
        assert_eq!(cols.len(), m);
        let mut row_count = vec![0usize; m];
        for c in cols {
            for &i in &c.idx {
                row_count[i] += 1;
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| (cols[p].idx.len(), p));

        let mut f = LuFactor {
            m,
            pivot_row: Vec::with_capacity(m),
            pivot_pos: Vec::with_capacity(m),
            l_start: vec![0],
            u_start: vec![0],
            ..Default::default()
        };
        let mut step_of_row = vec![NONE; m];
        let mut x = vec![0.0; m];
        let mut in_pattern = vec![false; m];
        let mut pattern: Vec<usize> = Vec::new();
        let mut visited = vec![false; m];
        let mut topo: Vec<usize> = Vec::new();
        let mut dfs_stack: Vec<(usize, usize)> = Vec::new();
        let mut rejected = Vec::new();

        for &pos in &order {
            let col = &cols[pos];
            pattern.clear();
            for (&i, &v) in col.idx.iter().zip(&col.val) {
                if !in_pattern[i] {
                    in_pattern[i] = true;
                    pattern.push(i);
                }
                x[i] += v;
            }

            // steps reachable from the column through L, in topological order
            topo.clear();
            for &i in &col.idx {
                let s = step_of_row[i];
                if s == NONE || visited[s] {
                    continue;
                }
                visited[s] = true;
                dfs_stack.push((s, f.l_start[s]));
                while let Some(&mut (node, ref mut next)) = dfs_stack.last_mut() {
                    let end = f.l_start[node + 1];
                    let mut pushed = false;
                    while *next < end {
                        let r = f.l_row[*next];
                        *next += 1;
                        let child = step_of_row[r];
                        if child != NONE && !visited[child] {
                            visited[child] = true;
                            dfs_stack.push((child, f.l_start[child]));
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        topo.push(node);
                        dfs_stack.pop();
                    }
                }
            }
            for &s in topo.iter().rev() {
                visited[s] = false;
                let xs = x[f.pivot_row[s]];
                if xs == 0.0 {
                    continue;
                }
                for k in f.l_start[s]..f.l_start[s + 1] {
                    let r = f.l_row[k];
                    if !in_pattern[r] {
                        in_pattern[r] = true;
                        pattern.push(r);
                    }
                    x[r] -= f.l_val[k] * xs;
                }
            }

            let max_abs = pattern
                .iter()
                .filter(|&&r| step_of_row[r] == NONE)
                .map(|&r| x[r].abs())
                .fold(0.0, f64::max);
            let mut pivot = NONE;
            if max_abs > SINGULAR_TOL {
                let mut best = (usize::MAX, 0.0f64, usize::MAX);
                for &r in &pattern {
                    if step_of_row[r] != NONE || x[r].abs() < PIVOT_THRESHOLD * max_abs {
                        continue;
                    }
                    let key = (row_count[r], x[r].abs(), r);
                    if key.0 < best.0
                        || (key.0 == best.0 && (key.1 > best.1 || (key.1 == best.1 && key.2 < best.2)))
                    {
                        best = key;
                    }
                }
                pivot = best.2;
            }

            if pivot == NONE {
                rejected.push(pos);
            } else {
                let step = f.pivot_row.len();
                let d = x[pivot];
                for &r in &pattern {
                    let s = step_of_row[r];
                    if s != NONE {
                        if x[r] != 0.0 {
                            f.u_step.push(s);
                            f.u_val.push(x[r]);
                        }
                    } else if r != pivot && x[r] != 0.0 {
                        f.l_row.push(r);
                        f.l_val.push(x[r] / d);
                    }
                }
                f.u_diag.push(d);
                f.u_start.push(f.u_step.len());
                f.l_start.push(f.l_row.len());
                f.pivot_row.push(pivot);
                f.pivot_pos.push(pos);
                step_of_row[pivot] = step;
            }
            for &r in &pattern {
                x[r] = 0.0;
                in_pattern[r] = false;
            }
        }

        let mut replacements = Vec::new();
        if !rejected.is_empty() {
            let free_rows = (0..m).filter(|&r| step_of_row[r] == NONE);
            for (pos, row) in rejected.into_iter().zip(free_rows.collect::<Vec<_>>()) {
                let step = f.pivot_row.len();
                f.u_diag.push(-1.0);
                f.u_start.push(f.u_step.len());
                f.l_start.push(f.l_row.len());
                f.pivot_row.push(row);
                f.pivot_pos.push(pos);
                step_of_row[row] = step;
                replacements.push(Replacement { position: pos, row });
            }
        }
        debug_assert_eq!(f.pivot_row.len(), m);
        (f, replacements)
    }

    /// Solves `B z = rhs` in place: `rhs` is indexed by row on entry and by
    /// basis position on exit.
    pub fn solve(&self, rhs: &mut [f64], work: &mut [f64]) {
        for s in 0..self.m {
            let v = rhs[self.pivot_row[s]];
            if v != 0.0 {
                for k in self.l_start[s]..self.l_start[s + 1] {
                    rhs[self.l_row[k]] -= self.l_val[k] * v;
                }
            }
        }
        for s in 0..self.m {
            work[s] = rhs[self.pivot_row[s]];
        }
        for s in (0..self.m).rev() {
            let z = work[s] / self.u_diag[s];
            work[s] = z;
            if z != 0.0 {
                for k in self.u_start[s]..self.u_start[s + 1] {
                    work[self.u_step[k]] -= self.u_val[k] * z;
                }
            }
        }
        for s in 0..self.m {
            rhs[self.pivot_pos[s]] = work[s];
        }
    }

    /// Solves `B^T y = c` in place: `c` is indexed by basis position on entry
    /// and by row on exit.
    pub fn solve_transpose(&self, c: &mut [f64], work: &mut [f64]) {
        for s in 0..self.m {
            let mut v = c[self.pivot_pos[s]];
            for k in self.u_start[s]..self.u_start[s + 1] {
                v -= self.u_val[k] * work[self.u_step[k]];
            }
            work[s] = v / self.u_diag[s];
        }
        for s in (0..self.m).rev() {
            let mut v = work[s];
            for k in self.l_start[s]..self.l_start[s + 1] {
                v -= self.l_val[k] * c[self.l_row[k]];
            }
            c[self.pivot_row[s]] = v;
        }
    }
}

/// Elementary column transform recorded for one basis change.
#[derive(Debug, Clone)]
pub(crate) struct Eta {
    position: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Eta {
    /// `alpha` is the entering column expressed in the current basis.
    pub fn new(position: usize, alpha: &[f64]) -> Self {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != position && a.abs() > 1e-14 {
                idx.push(i);
                val.push(a);
            }
        }
        Eta {
            position,
            pivot: alpha[position],
            idx,
            val,
        }
    }

    pub fn apply(&self, z: &mut [f64]) {
        let zr = z[self.position] / self.pivot;
        z[self.position] = zr;
        if zr != 0.0 {
            for (&i, &a) in self.idx.iter().zip(&self.val) {
                z[i] -= a * zr;
            }
        }
    }

    pub fn apply_transpose(&self, c: &mut [f64]) {
        let mut v = c[self.position];
        for (&i, &a) in self.idx.iter().zip(&self.val) {
            v -= a * c[i];
        }
        c[self.position] = v / self.pivot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_mul(cols: &[SparseCol], z: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (p, c) in cols.iter().enumerate() {
            for (&i, &v) in c.idx.iter().zip(&c.val) {
                out[i] += v * z[p];
            }
        }
        out
    }

    fn random_basis(rng: &mut ChaCha8Rng, m: usize) -> Vec<SparseCol> {
        (0..m)
            .map(|p| {
                if rng.random_bool(0.3) {
                    SparseCol { idx: vec![p], val: vec![-1.0] }
                } else {
                    let mut idx: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.3)).collect();
                    if !idx.contains(&p) {
                        idx.push(p);
                    }
                    idx.sort();
                    let val = idx
                        .iter()
                        .map(|&i| if i == p { 4.0 + rng.random::<f64>() } else { rng.random_range(-1.0..1.0) })
                        .collect();
                    SparseCol { idx, val }
                }
            })
            .collect()
    }

    #[test]
    fn solves_match_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [1usize, 2, 5, 17, 40] {
            let cols = random_basis(&mut rng, m);
            let (lu, rep) = LuFactor::factorize(m, &cols);
            assert!(rep.is_empty());
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut z = b.clone();
            let mut work = vec![0.0; m];
            lu.solve(&mut z, &mut work);
            let back = dense_mul(&cols, &z, m);
            for i in 0..m {
                assert!((back[i] - b[i]).abs() < 1e-10, "m={m} row {i}");
            }
            // transpose: sum_i cols[p][i] * y[i] = c[p]
            let c: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut y = c.clone();
            lu.solve_transpose(&mut y, &mut work);
            for (p, col) in cols.iter().enumerate() {
                let dot: f64 = col.idx.iter().zip(&col.val).map(|(&i, &v)| v * y[i]).sum();
                assert!((dot - c[p]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_column_is_replaced() {
        let cols = vec![
            SparseCol { idx: vec![0, 1], val: vec![1.0, 1.0] },
            SparseCol { idx: vec![0, 1], val: vec![2.0, 2.0] },
            SparseCol { idx: vec![2], val: vec![1.0] },
        ];
        let (_, rep) = LuFactor::factorize(3, &cols);
        assert_eq!(rep.len(), 1);
    }

    #[test]
    fn eta_update_matches_refactorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 12;
        let mut cols = random_basis(&mut rng, m);
        let (lu, _) = LuFactor::factorize(m, &cols);
        let mut work = vec![0.0; m];
        // swap column at position 4 for a new one
        let newcol = SparseCol { idx: vec![1, 4, 9], val: vec![0.5, 3.0, -1.0] };
        let mut alpha = vec![0.0; m];
        for (&i, &v) in newcol.idx.iter().zip(&newcol.val) {
            alpha[i] = v;
        }
        lu.solve(&mut alpha, &mut work);
        let eta = Eta::new(4, &alpha);
        cols[4] = newcol;
        let b: Vec<f64> = (0..m).map(|i| i as f64 - 3.0).collect();
        let mut z = b.clone();
        lu.solve(&mut z, &mut work);
        eta.apply(&mut z);
        let back = dense_mul(&cols, &z, m);
        for i in 0..m {
            assert!((back[i] - b[i]).abs() < 1e-9);
        }
        let c: Vec<f64> = (0..m).map(|i| (i * i) as f64 * 0.1).collect();
        let mut y = c.clone();
        eta.apply_transpose(&mut y);
        lu.solve_transpose(&mut y, &mut work);
        for (p, col) in cols.iter().enumerate() {
            let dot: f64 = col.idx.iter().zip(&col.val).map(|(&i, &v)| v * y[i]).sum();
            assert!((dot - c[p]).abs() < 1e-9);
        }
    }
}
