use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    pub fn euclidean(self, other: Cell) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Compass direction; the declaration order N, E, S, W is the tie-break
/// order used everywhere a neighbor has to be chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn reversed(self) -> Heading {
        match self {
            Heading::North => Heading::South,
            Heading::East => Heading::West,
            Heading::South => Heading::North,
            Heading::West => Heading::East,
        }
    }
}

/// Square wall grid. `y` grows southwards (row index), `x` eastwards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    size: usize,
    walls: Vec<bool>,
}

impl Grid {
    pub fn open(size: usize) -> Self {
        Grid {
            size,
            walls: vec![false; size * size],
        }
    }

    pub fn from_walls(size: usize, walls: Vec<bool>) -> Result<Self> {
        if walls.len() != size * size {
            return Err(Error::Config(format!(
                "wall mask has {} cells, expected {}",
                walls.len(),
                size * size
            )));
        }
        Ok(Grid { size, walls })
    }

    /// Parses rows of `#` (wall) and `.` (free).
    pub fn parse(rows: &[&str]) -> Result<Self> {
        let size = rows.len();
        let mut walls = Vec::with_capacity(size * size);
        for row in rows {
            if row.chars().count() != size {
                return Err(Error::Config("grid rows must form a square".into()));
            }
            walls.extend(row.chars().map(|c| c == '#'));
        }
        Grid::from_walls(size, walls)
    }

    /// Random interior walls at `density`, resampled until the free cells
    /// form one 4-connected component with at least `min_free` cells.
    pub fn generate<R: Rng + ?Sized>(
        size: usize,
        density: f64,
        min_free: usize,
        rng: &mut R,
    ) -> Result<Self> {
        const MAX_ATTEMPTS: usize = 10_000;
        if size == 0 || !(0.0..=1.0).contains(&density) {
            return Err(Error::Generation(format!(
                "grid size {size} / wall density {density} is invalid"
            )));
        }
        for _ in 0..MAX_ATTEMPTS {
            let walls: Vec<bool> = (0..size * size).map(|_| rng.gen_bool(density)).collect();
            let grid = Grid { size, walls };
            if grid.free_count() >= min_free.max(1) && grid.is_connected() {
                return Ok(grid);
            }
        }
        Err(Error::Generation(format!(
            "no connected layout with {min_free} free cells after {MAX_ATTEMPTS} attempts"
        )))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn walls(&self) -> &[bool] {
        &self.walls
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y * self.size + c.x
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(index % self.size, index / self.size)
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.walls[self.index(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.x < self.size && c.y < self.size && !self.is_wall(c)
    }

    pub fn free_count(&self) -> usize {
        self.walls.iter().filter(|w| !**w).count()
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.walls.len())
            .filter(|&i| !self.walls[i])
            .map(|i| self.cell(i))
    }

    /// The in-grid cell one step from `c` in direction `h`.
    pub fn neighbor(&self, c: Cell, h: Heading) -> Option<Cell> {
        let n = match h {
            Heading::North => Cell::new(c.x, c.y.checked_sub(1)?),
            Heading::East => Cell::new(c.x + 1, c.y),
            Heading::South => Cell::new(c.x, c.y + 1),
            Heading::West => Cell::new(c.x.checked_sub(1)?, c.y),
        };
        (n.x < self.size && n.y < self.size).then_some(n)
    }

    pub fn free_neighbors(&self, c: Cell) -> impl Iterator<Item = (Heading, Cell)> + '_ {
        Heading::ALL
            .into_iter()
            .filter_map(move |h| self.neighbor(c, h).map(|n| (h, n)))
            .filter(|(_, n)| !self.is_wall(*n))
    }

    /// Breadth-first distances from `from` over free cells; `None` marks
    /// unreachable cells.
    pub fn distances(&self, from: Cell) -> Vec<Option<usize>> {
        let (dist, _) = self.bfs(from);
        dist
    }

    fn bfs(&self, from: Cell) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
        let mut dist = vec![None; self.walls.len()];
        let mut parent = vec![None; self.walls.len()];
        if !self.is_free(from) {
            return (dist, parent);
        }
        let mut queue = VecDeque::new();
        dist[self.index(from)] = Some(0);
        queue.push_back(from);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index(c)].expect("queued cells have a distance");
            for (_, n) in self.free_neighbors(c) {
                let ni = self.index(n);
                if dist[ni].is_none() {
                    dist[ni] = Some(d + 1);
                    parent[ni] = Some(self.index(c));
                    queue.push_back(n);
                }
            }
        }
        (dist, parent)
    }

    pub fn is_connected(&self) -> bool {
        let Some(start) = self.free_cells().next() else {
            return false;
        };
        let reached = self.distances(start).iter().filter(|d| d.is_some()).count();
        reached == self.free_count()
    }

    /// Shortest 4-connected path from `from` toward `destination`.
    ///
    /// When the destination is a wall or unreachable, the reachable cell
    /// nearest to it (Euclidean; ties by path length, then row-major
    /// index) is used instead. The returned moves exclude `from`.
    pub fn plan_path(&self, from: Cell, destination: Cell) -> Vec<Cell> {
        let (dist, parent) = self.bfs(from);
        let goal = (0..dist.len())
            .filter_map(|i| dist[i].map(|d| (i, d)))
            .min_by(|&(a, da), &(b, db)| {
                let ea = self.cell(a).euclidean(destination);
                let eb = self.cell(b).euclidean(destination);
                ea.total_cmp(&eb).then(da.cmp(&db)).then(a.cmp(&b))
            });
        let Some((mut cur, _)) = goal else {
            return Vec::new();
        };
        let mut path = Vec::new();
        let start = self.index(from);
        while cur != start {
            path.push(self.cell(cur));
            cur = parent[cur].expect("reachable cells have parents");
        }
        path.reverse();
        path
    }

    /// Cells within Chebyshev distance `radius` of `center`, clipped to the
    /// grid. Walls do not occlude.
    pub fn square(&self, center: Cell, radius: usize) -> impl Iterator<Item = Cell> {
        let size = self.size;
        let x0 = center.x.saturating_sub(radius);
        let y0 = center.y.saturating_sub(radius);
        let x1 = (center.x + radius).min(size - 1);
        let y1 = (center.y + radius).min(size - 1);
        (y0..=y1).flat_map(move |y| (x0..=x1).map(move |x| Cell::new(x, y)))
    }
}
