use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{Point, Scalar};

/// An observed cell: id, centroid and current load.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell<T> {
    pub id: u32,
    pub position: Point<T>,
    pub load: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor<T> {
    pub cell_id: u32,
    pub distance: T,
    pub load: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Nearest,
    Random,
}

/// Cells used to estimate one target, ordered by ascending distance.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSet<T> {
    pub target: u32,
    pub selection: Selection,
    members: Vec<Neighbor<T>>,
    d_max: T,
}

fn by_distance<T: Scalar>(a: &Neighbor<T>, b: &Neighbor<T>) -> Ordering {
    a.distance
        .partial_cmp(&b.distance)
        .unwrap_or(Ordering::Equal)
        .then(a.cell_id.cmp(&b.cell_id))
}

impl<T: Scalar> NeighborSet<T> {
    pub fn new(target: u32, selection: Selection, mut members: Vec<Neighbor<T>>) -> Self {
        members.sort_by(by_distance);
        let d_max = members.last().map_or(T::zero(), |m| m.distance);
        Self {
            target,
            selection,
            members,
            d_max,
        }
    }

    pub fn members(&self) -> &[Neighbor<T>] {
        &self.members
    }

    pub fn d_max(&self) -> T {
        self.d_max
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn as_neighbor<T: Scalar>(from: &Point<T>, c: &Cell<T>) -> Neighbor<T> {
    Neighbor {
        cell_id: c.id,
        distance: from.distance(&c.position),
        load: c.load,
    }
}

/// The `n` active cells nearest to `target`, ties broken by lower id.
/// `cells` must hold active cells only; `target` itself is skipped.
pub fn rank_neighbors<T: Scalar>(
    target: u32,
    position: &Point<T>,
    cells: &[Cell<T>],
    n: usize,
) -> Result<NeighborSet<T>> {
    let mut all: Vec<Neighbor<T>> = cells
        .iter()
        .filter(|c| c.id != target)
        .map(|c| as_neighbor(position, c))
        .collect();
    if all.len() < n {
        return Err(Error::InsufficientNeighbors {
            needed: n,
            available: all.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "neighbor count must be positive".into(),
        ));
    }
    if n < all.len() {
        all.select_nth_unstable_by(n - 1, by_distance);
        all.truncate(n);
    }
    Ok(NeighborSet::new(target, Selection::Nearest, all))
}

/// `n` distinct active cells drawn uniformly without replacement.
pub fn select_random<T: Scalar>(
    target: u32,
    position: &Point<T>,
    cells: &[Cell<T>],
    n: usize,
    seed: u64,
) -> Result<NeighborSet<T>> {
    let pool: Vec<&Cell<T>> = cells.iter().filter(|c| c.id != target).collect();
    if pool.len() < n {
        return Err(Error::InsufficientNeighbors {
            needed: n,
            available: pool.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "neighbor count must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| as_neighbor(position, pool[i]))
        .collect();
    Ok(NeighborSet::new(target, Selection::Random, members))
}

/// Every candidate cell pre-sorted by distance from one target, so that
/// nearest-active queries over many slots avoid re-sorting.
#[derive(Clone, Debug)]
pub struct SortedNeighbors<T> {
    target: u32,
    order: Vec<(T, usize)>,
}

impl<T: Scalar> SortedNeighbors<T> {
    /// `positions[i]` belongs to cell `ids[i]`.
    pub fn new(target: u32, position: &Point<T>, ids: &[u32], positions: &[Point<T>]) -> Self {
        let mut order: Vec<(T, usize)> = ids
            .iter()
            .zip(positions)
            .enumerate()
            .filter(|(_, (&id, _))| id != target)
            .map(|(i, (_, p))| (position.distance(p), i))
            .collect();
        order.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then(ids[a.1].cmp(&ids[b.1]))
        });
        Self { target, order }
    }

    /// The `n` nearest cells for which `active(i)` holds, with loads from `load(i)`.
    pub fn nearest(
        &self,
        n: usize,
        ids: &[u32],
        active: impl Fn(usize) -> bool,
        load: impl Fn(usize) -> T,
    ) -> Result<NeighborSet<T>> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "neighbor count must be positive".into(),
            ));
        }
        let members: Vec<Neighbor<T>> = self
            .order
            .iter()
            .filter(|(_, i)| active(*i))
            .take(n)
            .map(|&(d, i)| Neighbor {
                cell_id: ids[i],
                distance: d,
                load: load(i),
            })
            .collect();
        if members.len() < n {
            return Err(Error::InsufficientNeighbors {
                needed: n,
                available: members.len(),
            });
        }
        Ok(NeighborSet::new(self.target, Selection::Nearest, members))
    }
}
