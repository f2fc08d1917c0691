//! Communication-volume models for block partitions of an iteration space.
//!
//! Closed forms work on the workload vector `w_m = l_m / d_m` as exact
//! rationals, so they are defined for non-divisible extents too. The
//! brute-force [`oracle_boundary_count`] enumerates cells and is what the
//! closed forms are checked against.

use num_bigint::BigInt;
use num_traits::One;
use thiserror::Error;

use crate::decompose::{integer, rational, Factorization, Rational};

/// Cells the oracle is willing to enumerate.
pub const ORACLE_CELL_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VolumeError {
    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("dimension {dim} out of range for a {rank}-dimensional grid")]
    DimOutOfRange { dim: usize, rank: usize },
    #[error("invalid block grid: {0}")]
    InvalidGrid(String),
    #[error("{cells} cells exceed the oracle enumeration cap of {cap}")]
    TooLarge { cells: u64, cap: u64 },
}

/// An iteration space `extents` cut into `grid[m]` blocks along each
/// dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockGrid {
    extents: Vec<u64>,
    grid: Vec<u64>,
}

impl BlockGrid {
    pub fn new(extents: Vec<u64>, grid: Vec<u64>) -> Result<Self, VolumeError> {
        if extents.len() != grid.len() {
            return Err(VolumeError::ShapeMismatch { expected: extents.len(), got: grid.len() });
        }
        if extents.is_empty() {
            return Err(VolumeError::InvalidGrid("no dimensions".into()));
        }
        for (m, (&l, &d)) in extents.iter().zip(&grid).enumerate() {
            if d == 0 || d > l {
                return Err(VolumeError::InvalidGrid(format!(
                    "dimension {m}: {d} blocks over extent {l} (need 1 <= blocks <= extent)"
                )));
            }
        }
        Ok(BlockGrid { extents, grid })
    }

    pub fn from_factorization(extents: Vec<u64>, f: &Factorization) -> Result<Self, VolumeError> {
        BlockGrid::new(extents, f.0.clone())
    }

    pub fn extents(&self) -> &[u64] {
        &self.extents
    }

    pub fn grid(&self) -> &[u64] {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.extents.len()
    }

    pub fn blocks(&self) -> u64 {
        self.grid.iter().product()
    }

    pub fn workload(&self) -> Vec<Rational> {
        self.extents.iter().zip(&self.grid).map(|(&l, &d)| rational(l, d)).collect()
    }

    /// Every block has exactly `l_m / d_m` cells along each dimension.
    pub fn is_divisible(&self) -> bool {
        self.extents.iter().zip(&self.grid).all(|(&l, &d)| l % d == 0)
    }

    fn check_halo(&self, halo: &HaloSpec) -> Result<(), VolumeError> {
        if halo.widths.len() == self.rank() {
            Ok(())
        } else {
            Err(VolumeError::ShapeMismatch { expected: self.rank(), got: halo.widths.len() })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HaloSpec {
    pub widths: Vec<u64>,
}

impl HaloSpec {
    pub fn new(widths: Vec<u64>) -> Self {
        HaloSpec { widths }
    }

    pub fn unit(k: usize) -> Self {
        HaloSpec { widths: vec![1; k] }
    }
}

/// `SA(x) = 2 * (prod x_m) * (sum 1/x_m)`.
pub fn surface_area(x: &[Rational]) -> Rational {
    let prod: Rational = x.iter().product();
    let inv: Rational = x.iter().map(|v| v.recip()).sum();
    integer(2) * prod * inv
}

/// `SA(w) * d - SA(l)`: the summed surface of all blocks minus the outer
/// surface, i.e. boundary cells counted once per side of every cut.
pub fn surface_volume(grid: &BlockGrid) -> Rational {
    let w = grid.workload();
    let l: Vec<Rational> = grid.extents.iter().map(|&x| integer(x)).collect();
    surface_area(&w) * integer(grid.blocks()) - surface_area(&l)
}

/// `2 (w1 + w2) d - 2 (l1 + l2)`, the two-dimensional perimeter form.
pub fn perimeter_volume_2d(grid: &BlockGrid) -> Result<Rational, VolumeError> {
    if grid.rank() != 2 {
        return Err(VolumeError::ShapeMismatch { expected: 2, got: grid.rank() });
    }
    let w = grid.workload();
    let two = integer(2);
    Ok(&two * (&w[0] + &w[1]) * integer(grid.blocks()) - two * integer(grid.extents[0] + grid.extents[1]))
}

/// Area of the internal cut surfaces, each counted once (half of
/// [`surface_volume`]).
pub fn interface_area(grid: &BlockGrid) -> Rational {
    surface_volume(grid) / integer(2)
}

/// `V = sum_n d_n h_n prod_{m != n} l_m`.
pub fn halo_volume(grid: &BlockGrid, halo: &HaloSpec) -> Result<Rational, VolumeError> {
    grid.check_halo(halo)?;
    let total: BigInt = (0..grid.rank())
        .map(|n| {
            let others = grid
                .extents
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != n)
                .fold(BigInt::one(), |acc, (_, &l)| acc * l);
            BigInt::from(grid.grid[n]) * halo.widths[n] * others
        })
        .sum();
    Ok(Rational::from_integer(total))
}

/// `(sum_n h_n / w_n) * prod_m l_m`; equal to [`halo_volume`] because
/// `l_n = w_n d_n` holds for the rational workload.
pub fn halo_volume_dual(grid: &BlockGrid, halo: &HaloSpec) -> Result<Rational, VolumeError> {
    grid.check_halo(halo)?;
    let w = grid.workload();
    let ratio: Rational = w.iter().zip(&halo.widths).map(|(wn, &h)| integer(h) / wn).sum();
    let prod: Rational = grid.extents.iter().map(|&l| integer(l)).product();
    Ok(ratio * prod)
}

/// All-to-all transpose volume along dimension `n`:
/// `(1 - 1/d_n) * (prod_m w_m) * d`.
pub fn transpose_volume(grid: &BlockGrid, n: usize) -> Result<Rational, VolumeError> {
    if n >= grid.rank() {
        return Err(VolumeError::DimOutOfRange { dim: n, rank: grid.rank() });
    }
    let keep = Rational::one() - rational(1, grid.grid[n]);
    let work: Rational = grid.workload().into_iter().product();
    Ok(keep * work * integer(grid.blocks()))
}

/// Per-partition transpose volume `v_n = ((d_n - 1) / d_n) prod_m w_m`.
pub fn transpose_volume_per_partition(grid: &BlockGrid, n: usize) -> Result<Rational, VolumeError> {
    if n >= grid.rank() {
        return Err(VolumeError::DimOutOfRange { dim: n, rank: grid.rank() });
    }
    let d = grid.grid[n];
    let work: Rational = grid.workload().into_iter().product();
    Ok(rational(d - 1, d) * work)
}

/// Block index of every coordinate along one dimension, using the same
/// floor division a block mapping does: `block(x) = x * d / l`.
fn block_of(l: u64, d: u64) -> Vec<u64> {
    (0..l).map(|x| x * d / l).collect()
}

/// Brute-force count of boundary cells: for each internal face between
/// two adjacent blocks, the cells within `h_n` of the face on either side.
/// A cell near several faces is counted once per face.
pub fn oracle_boundary_count(grid: &BlockGrid, halo: &HaloSpec) -> Result<u64, VolumeError> {
    grid.check_halo(halo)?;
    let cells = grid.extents.iter().try_fold(1u64, |acc, &l| acc.checked_mul(l));
    let cells = match cells {
        Some(c) if c <= ORACLE_CELL_CAP => c,
        Some(c) => return Err(VolumeError::TooLarge { cells: c, cap: ORACLE_CELL_CAP }),
        None => return Err(VolumeError::TooLarge { cells: u64::MAX, cap: ORACLE_CELL_CAP }),
    };

    // Per dimension and coordinate: how many faces this coordinate is
    // within halo distance of. Block extents come from scanning the
    // block assignment, not from a closed form.
    let near: Vec<Vec<u64>> = (0..grid.rank())
        .map(|m| {
            let (l, d, h) = (grid.extents[m], grid.grid[m], halo.widths[m]);
            let blocks = block_of(l, d);
            let mut lo = vec![u64::MAX; d as usize];
            let mut hi = vec![0u64; d as usize];
            for (x, &b) in blocks.iter().enumerate() {
                lo[b as usize] = lo[b as usize].min(x as u64);
                hi[b as usize] = hi[b as usize].max(x as u64);
            }
            blocks
                .iter()
                .enumerate()
                .map(|(x, &b)| {
                    let x = x as u64;
                    let mut n = 0;
                    if b > 0 && x - lo[b as usize] < h {
                        n += 1;
                    }
                    if b + 1 < d && hi[b as usize] - x < h {
                        n += 1;
                    }
                    n
                })
                .collect()
        })
        .collect();

    let mut total = 0u64;
    let mut coord = vec![0usize; grid.rank()];
    for _ in 0..cells {
        total += coord.iter().enumerate().map(|(m, &x)| near[m][x]).sum::<u64>();
        for m in (0..coord.len()).rev() {
            coord[m] += 1;
            if (coord[m] as u64) < grid.extents[m] {
                break;
            }
            coord[m] = 0;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(l: &[u64], d: &[u64]) -> BlockGrid {
        BlockGrid::new(l.to_vec(), d.to_vec()).unwrap()
    }

    #[test]
    fn surface_volume_examples() {
        assert_eq!(surface_volume(&grid(&[12, 18], &[3, 2])), integer(96));
        assert_eq!(surface_volume(&grid(&[18, 12], &[3, 2])), integer(84));
        assert_eq!(surface_volume(&grid(&[12, 18], &[2, 3])), integer(84));
        assert_eq!(surface_volume(&grid(&[5, 7, 3], &[1, 1, 1])), integer(0));
        // SA(2,2,2) * 16 - SA(4,8,4) = 384 - 160
        assert_eq!(surface_volume(&grid(&[4, 8, 4], &[2, 4, 2])), integer(224));
        assert_eq!(interface_area(&grid(&[4, 8, 4], &[2, 4, 2])), integer(112));
    }

    #[test]
    fn perimeter_form_matches() {
        let g = grid(&[12, 18], &[3, 2]);
        assert_eq!(perimeter_volume_2d(&g).unwrap(), surface_volume(&g));
        assert!(perimeter_volume_2d(&grid(&[4, 4, 4], &[2, 2, 1])).is_err());
    }

    #[test]
    fn halo_examples() {
        let g = grid(&[12, 18], &[3, 2]);
        assert_eq!(halo_volume(&g, &HaloSpec::unit(2)).unwrap(), integer(78));
        assert_eq!(halo_volume(&g, &HaloSpec::new(vec![0, 0])).unwrap(), integer(0));
        let g3 = grid(&[4, 8, 4], &[2, 4, 2]);
        assert_eq!(halo_volume(&g3, &HaloSpec::unit(3)).unwrap(), integer(192));
        assert_eq!(halo_volume_dual(&g3, &HaloSpec::unit(3)).unwrap(), integer(192));
        assert!(matches!(halo_volume(&g, &HaloSpec::unit(3)), Err(VolumeError::ShapeMismatch { .. })));
    }

    #[test]
    fn transpose_examples() {
        let g3 = grid(&[4, 8, 4], &[2, 4, 2]);
        assert_eq!(transpose_volume(&g3, 1).unwrap(), integer(96));
        // V* = v_n * d
        assert_eq!(transpose_volume_per_partition(&g3, 1).unwrap() * integer(16), integer(96));
        assert_eq!(transpose_volume(&grid(&[12, 18], &[1, 6]), 0).unwrap(), integer(0));
        assert_eq!(transpose_volume(&grid(&[12, 18], &[2, 3]), 0).unwrap(), integer(108));
        assert!(matches!(transpose_volume(&g3, 3), Err(VolumeError::DimOutOfRange { .. })));
    }

    #[test]
    fn oracle_examples() {
        let h = HaloSpec::unit(2);
        assert_eq!(oracle_boundary_count(&grid(&[12, 18], &[3, 2]), &h).unwrap(), 96);
        assert_eq!(oracle_boundary_count(&grid(&[18, 12], &[3, 2]), &h).unwrap(), 84);
        assert_eq!(oracle_boundary_count(&grid(&[4, 8, 4], &[2, 4, 2]), &HaloSpec::unit(3)).unwrap(), 224);
        assert_eq!(oracle_boundary_count(&grid(&[9, 9], &[1, 1]), &h).unwrap(), 0);
        // zero width in a dimension removes its faces
        assert_eq!(oracle_boundary_count(&grid(&[12, 18], &[3, 2]), &HaloSpec::new(vec![0, 1])).unwrap(), 24);
    }

    #[test]
    fn oracle_wider_halo() {
        // dim 0: 2 cuts * 2 sides * 2 rows * 18 = 144; dim 1: 1 cut * 2 * 1 * 12 = 24
        let g = grid(&[12, 18], &[3, 2]);
        assert_eq!(oracle_boundary_count(&g, &HaloSpec::new(vec![2, 1])).unwrap(), 168);
    }

    #[test]
    fn oracle_refuses_huge_spaces() {
        let g = grid(&[10_000, 10_000], &[2, 2]);
        assert!(matches!(oracle_boundary_count(&g, &HaloSpec::unit(2)), Err(VolumeError::TooLarge { .. })));
    }

    #[test]
    fn grid_validation() {
        assert!(BlockGrid::new(vec![4, 4], vec![2]).is_err());
        assert!(BlockGrid::new(vec![4], vec![0]).is_err());
        assert!(BlockGrid::new(vec![4], vec![5]).is_err());
        assert!(BlockGrid::new(vec![], vec![]).is_err());
    }
}
