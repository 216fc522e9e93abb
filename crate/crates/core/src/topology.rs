//! Periodic lattices, q-th degree neighborhoods, and subarray partitions.
//!
//! Cell ids are row-major integers in `[0, N)` with axis 0 slowest; subarray
//! ids are row-major over the `(n/m)^dim` grid. Both are independent of how
//! the lattice is later partitioned, which keeps per-cell stream identities
//! stable across partitions.

use crate::error::{arg_err, Result};

/// A d-dimensional periodic (wrap-around) lattice with `side^dim` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    dim: usize,
    side: usize,
}

impl Lattice {
    /// `dim` must be 1, 2, or 3. Sides below 3 are accepted so degenerate
    /// arrays can be simulated, but only for `side >= 3` does every cell have
    /// the full `2*dim` distinct first-degree neighbors; smaller sides
    /// collapse the neighbor set.
    pub fn new(dim: usize, side: usize) -> Result<Lattice> {
        if !(1..=3).contains(&dim) {
            return arg_err(format!("lattice dim must be 1, 2, or 3 (got {dim})"));
        }
        if side == 0 {
            return arg_err("lattice side must be >= 1");
        }
        if side.checked_pow(dim as u32).is_none() {
            return arg_err("lattice too large");
        }
        Ok(Lattice { dim, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cell_count(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn contains(&self, cell: usize) -> bool {
        cell < self.cell_count()
    }

    pub fn coords(&self, cell: usize) -> [usize; 3] {
        debug_assert!(self.contains(cell));
        let mut c = [0usize; 3];
        let mut rest = cell;
        for slot in c[..self.dim].iter_mut().rev() {
            *slot = rest % self.side;
            rest /= self.side;
        }
        c
    }

    pub fn cell_at(&self, coords: [usize; 3]) -> usize {
        coords[..self.dim]
            .iter()
            .fold(0, |cell, &coord| cell * self.side + coord % self.side)
    }

    fn offset(&self, cell: usize, axis: usize, delta: isize) -> usize {
        let mut c = self.coords(cell);
        let n = self.side as isize;
        c[axis] = ((c[axis] as isize + delta).rem_euclid(n)) as usize;
        self.cell_at(c)
    }

    /// First-degree (von Neumann) neighbors of `cell`, excluding the cell
    /// itself. Deduplicated and sorted; `2*dim` entries when `side >= 3`.
    pub fn von_neumann(&self, cell: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.dim);
        for axis in 0..self.dim {
            for delta in [-1isize, 1] {
                let nb = self.offset(cell, axis, delta);
                if nb != cell {
                    out.push(nb);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Moore neighbors (all cells within Chebyshev distance 1), excluding the
    /// cell itself. 8 entries in 2-D when `side >= 3`.
    pub fn moore(&self, cell: usize) -> Vec<usize> {
        let center = self.coords(cell);
        let n = self.side as isize;
        let mut out = Vec::new();
        let deltas: &[isize] = &[-1, 0, 1];
        let mut push = |c: [usize; 3]| {
            let id = self.cell_at(c);
            if id != cell {
                out.push(id);
            }
        };
        match self.dim {
            1 => {
                for &dx in deltas {
                    let mut c = center;
                    c[0] = ((c[0] as isize + dx).rem_euclid(n)) as usize;
                    push(c);
                }
            }
            2 => {
                for &dx in deltas {
                    for &dy in deltas {
                        let mut c = center;
                        c[0] = ((c[0] as isize + dx).rem_euclid(n)) as usize;
                        c[1] = ((c[1] as isize + dy).rem_euclid(n)) as usize;
                        push(c);
                    }
                }
            }
            3 => {
                for &dx in deltas {
                    for &dy in deltas {
                        for &dz in deltas {
                            let mut c = center;
                            c[0] = ((c[0] as isize + dx).rem_euclid(n)) as usize;
                            c[1] = ((c[1] as isize + dy).rem_euclid(n)) as usize;
                            c[2] = ((c[2] as isize + dz).rem_euclid(n)) as usize;
                            push(c);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The q-th degree neighborhood of `cell`, including the cell itself:
    /// `neighbors^q(c) = neighbors(neighbors^{q-1}(c))`. In 2-D with
    /// `side` large enough the size is `2q(q+1) + 1`.
    pub fn neighbors(&self, cell: usize, q: usize) -> Result<Vec<usize>> {
        if !self.contains(cell) {
            return arg_err(format!("cell id {cell} out of range"));
        }
        if q == 0 {
            return arg_err("neighborhood degree must be >= 1");
        }
        let mut set = vec![cell];
        for _ in 0..q {
            let mut next = set.clone();
            for &c in &set {
                for axis in 0..self.dim {
                    for delta in [-1isize, 1] {
                        next.push(self.offset(c, axis, delta));
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            set = next;
        }
        Ok(set)
    }
}

/// A decomposition of a lattice into `(n/m)^dim` cubic subarrays of side `m`,
/// with `q` the neighborhood degree used for the waiting sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    lattice: Lattice,
    m: usize,
    q: usize,
}

impl Partition {
    pub fn new(lattice: Lattice, m: usize, q: usize) -> Result<Partition> {
        if m == 0 || !lattice.side().is_multiple_of(m) {
            return arg_err(format!(
                "subarray side {m} must divide lattice side {}",
                lattice.side()
            ));
        }
        if q == 0 {
            return arg_err("neighborhood degree must be >= 1");
        }
        Ok(Partition { lattice, m, q })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn subarray_side(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    /// PEs per lattice axis.
    pub fn grid_side(&self) -> usize {
        self.lattice.side() / self.m
    }

    pub fn subarray_count(&self) -> usize {
        self.grid_side().pow(self.lattice.dim() as u32)
    }

    pub fn cells_per_subarray(&self) -> usize {
        self.m.pow(self.lattice.dim() as u32)
    }

    pub fn subarray_of(&self, cell: usize) -> usize {
        let coords = self.lattice.coords(cell);
        let grid = self.grid_side();
        coords[..self.lattice.dim()]
            .iter()
            .fold(0, |sub, &coord| sub * grid + coord / self.m)
    }

    /// Cells of subarray `sub` in ascending cell-id order.
    pub fn cells_of(&self, sub: usize) -> Result<Vec<usize>> {
        if sub >= self.subarray_count() {
            return arg_err(format!("subarray id {sub} out of range"));
        }
        let mut cells: Vec<usize> = (0..self.lattice.cell_count())
            .filter(|&c| self.subarray_of(c) == sub)
            .collect();
        cells.sort_unstable();
        Ok(cells)
    }

    /// The set `W(c)`: subarrays other than the cell's own that host any
    /// member of its q-th degree neighborhood. Empty exactly for kernel
    /// cells, which can be updated without consulting any other PE.
    pub fn w_set(&self, cell: usize) -> Result<Vec<usize>> {
        let own = self.subarray_of(cell);
        let mut subs: Vec<usize> = self
            .lattice
            .neighbors(cell, self.q)?
            .into_iter()
            .map(|c| self.subarray_of(c))
            .filter(|&s| s != own)
            .collect();
        subs.sort_unstable();
        subs.dedup();
        Ok(subs)
    }

    /// True when every cell of the q-neighborhood lies inside the cell's own
    /// subarray: along each axis either the whole axis belongs to one
    /// subarray (wrap-around stays local) or the local coordinate falls in
    /// `[q, m-q)`.
    pub fn is_kernel(&self, cell: usize) -> bool {
        let coords = self.lattice.coords(cell);
        let single = self.grid_side() == 1;
        (0..self.lattice.dim()).all(|axis| {
            if single {
                return true;
            }
            let local = coords[axis] % self.m;
            self.m > 2 * self.q && local >= self.q && local < self.m - self.q
        })
    }

    /// Cells of `sub` with empty waiting set; `(m-2q)^dim` of them when
    /// `m > 2q`, none otherwise.
    pub fn kernel_cells(&self, sub: usize) -> Result<Vec<usize>> {
        Ok(self.cells_of(sub)?.into_iter().filter(|&c| self.is_kernel(c)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dim_and_zero_side() {
        assert!(Lattice::new(0, 8).is_err());
        assert!(Lattice::new(4, 8).is_err());
        assert!(Lattice::new(2, 0).is_err());
    }

    #[test]
    fn second_degree_2d_size() {
        let lat = Lattice::new(2, 16).unwrap();
        for c in [0, 37, 255] {
            let nb = lat.neighbors(c, 2).unwrap();
            assert_eq!(nb.len() - 1, 12); // 2q(q+1) with q=2
            assert!(nb.contains(&c));
        }
    }

    #[test]
    fn degree_size_formula_2d() {
        let lat = Lattice::new(2, 32).unwrap();
        for q in 1..=4 {
            let nb = lat.neighbors(100, q).unwrap();
            assert_eq!(nb.len() - 1, 2 * q * (q + 1));
        }
    }

    #[test]
    fn circle_wraps() {
        let lat = Lattice::new(1, 5).unwrap();
        assert_eq!(lat.neighbors(0, 1).unwrap(), vec![0, 1, 4]);
    }

    #[test]
    fn von_neumann_plus_self_is_five() {
        let lat = Lattice::new(2, 8).unwrap();
        for c in 0..lat.cell_count() {
            assert_eq!(lat.neighbors(c, 1).unwrap().len(), 5);
            assert_eq!(lat.von_neumann(c).len(), 4);
        }
    }

    #[test]
    fn neighbor_symmetry() {
        let lat = Lattice::new(2, 6).unwrap();
        for q in 1..=2 {
            for c in 0..lat.cell_count() {
                for &d in &lat.neighbors(c, q).unwrap() {
                    assert!(lat.neighbors(d, q).unwrap().contains(&c));
                }
            }
        }
    }

    #[test]
    fn invalid_cell_is_error() {
        let lat = Lattice::new(2, 4).unwrap();
        assert!(lat.neighbors(16, 1).is_err());
    }

    #[test]
    fn moore_in_2d() {
        let lat = Lattice::new(2, 8).unwrap();
        assert_eq!(lat.moore(0).len(), 8);
    }

    #[test]
    fn w_set_interior_edge_corner() {
        // 8x8 torus split into four 4x4 subarrays, q = 1.
        let lat = Lattice::new(2, 8).unwrap();
        let part = Partition::new(lat, 4, 1).unwrap();
        // interior of subarray 0
        let interior = lat.cell_at([1, 1, 0]);
        assert!(part.w_set(interior).unwrap().is_empty());
        // edge (non-corner) cell: one neighbor subarray
        let edge = lat.cell_at([1, 3, 0]);
        assert_eq!(part.w_set(edge).unwrap().len(), 1);
        // corner cell: two adjacent subarrays
        let corner = lat.cell_at([3, 3, 0]);
        assert_eq!(part.w_set(corner).unwrap().len(), 2);
    }

    #[test]
    fn kernel_counts() {
        let lat = Lattice::new(2, 8).unwrap();
        let part = Partition::new(lat, 4, 1).unwrap();
        assert_eq!(part.kernel_cells(0).unwrap().len(), 4); // (4-2)^2

        let lat = Lattice::new(2, 24).unwrap();
        let part = Partition::new(lat, 12, 1).unwrap();
        assert_eq!(part.kernel_cells(0).unwrap().len(), 100); // (12-2)^2

        let lat = Lattice::new(2, 8).unwrap();
        let part = Partition::new(lat, 4, 2).unwrap();
        assert_eq!(part.kernel_cells(0).unwrap().len(), 0); // m = 2q
    }

    #[test]
    fn kernel_iff_empty_w_set() {
        let lat = Lattice::new(2, 12).unwrap();
        // Includes the single-subarray case, where wrap-around keeps every
        // neighborhood local.
        for (m, q) in [(4, 1), (6, 1), (4, 2), (12, 2), (12, 1)] {
            let part = Partition::new(lat, m, q).unwrap();
            for c in 0..lat.cell_count() {
                assert_eq!(
                    part.is_kernel(c),
                    part.w_set(c).unwrap().is_empty(),
                    "m={m} q={q} cell={c}"
                );
            }
        }
        let lat = Lattice::new(1, 9).unwrap();
        let part = Partition::new(lat, 3, 1).unwrap();
        for c in 0..9 {
            assert_eq!(part.is_kernel(c), part.w_set(c).unwrap().is_empty());
        }
    }

    #[test]
    fn kernel_and_boundary_partition_subarray() {
        let lat = Lattice::new(2, 8).unwrap();
        let part = Partition::new(lat, 4, 1).unwrap();
        for sub in 0..part.subarray_count() {
            let cells = part.cells_of(sub).unwrap();
            let kernel = part.kernel_cells(sub).unwrap();
            let boundary: Vec<usize> =
                cells.iter().copied().filter(|&c| !part.is_kernel(c)).collect();
            assert_eq!(kernel.len() + boundary.len(), cells.len());
            assert!(kernel.iter().all(|c| !boundary.contains(c)));
        }
    }

    #[test]
    fn w_set_small_for_first_degree() {
        // q = 1: a PE waits for at most dim neighbors (axis-adjacent only).
        for dim in [1usize, 2, 3] {
            let lat = Lattice::new(dim, 6).unwrap();
            let part = Partition::new(lat, 3, 1).unwrap();
            for c in 0..lat.cell_count() {
                assert!(part.w_set(c).unwrap().len() <= dim);
            }
        }
    }

    #[test]
    fn w_set_at_most_three_in_2d_higher_degree() {
        // q > 1 can pull in one diagonal subarray, never more.
        let lat = Lattice::new(2, 16).unwrap();
        let part = Partition::new(lat, 8, 2).unwrap();
        let max = (0..lat.cell_count())
            .map(|c| part.w_set(c).unwrap().len())
            .max()
            .unwrap();
        assert_eq!(max, 3);
    }

    #[test]
    fn subarray_count_and_membership() {
        let lat = Lattice::new(2, 12).unwrap();
        let part = Partition::new(lat, 4, 1).unwrap();
        assert_eq!(part.subarray_count(), 9);
        let mut seen = vec![0usize; lat.cell_count()];
        for sub in 0..9 {
            for c in part.cells_of(sub).unwrap() {
                seen[c] += 1;
            }
        }
        assert!(seen.iter().all(|&k| k == 1));
    }

    #[test]
    fn indivisible_side_rejected() {
        let lat = Lattice::new(2, 10).unwrap();
        assert!(Partition::new(lat, 4, 1).is_err());
    }
}
