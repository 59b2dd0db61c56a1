//! Seeded instance generators: random-DFS mazes, random buildings, the
//! bundled 2D fixtures and small random graphs of convex sets.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conic::AffineExpr;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, ConvexSet};
use crate::graph::{simple_paths, EdgeConstraint, EdgeLength, GcsBuilder, GcsProblem, VertexId};
use crate::planner::{BoundaryVelocity, PlanningProblem, PlanningSpec};

fn unit_box(n: usize) -> ConvexSet {
    ConvexSet::Box(Aabb {
        lo: vec![-1.0; n],
        hi: vec![1.0; n],
    })
}

fn aabb(lo: &[f64], hi: &[f64]) -> Aabb {
    Aabb {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
    }
}

// ---------------------------------------------------------------- mazes

/// Direction of a wall relative to the cell that owns it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WallSide {
    /// Between `(x, y)` and `(x + 1, y)`.
    East,
    /// Between `(x, y)` and `(x, y + 1)`.
    North,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MazeWall {
    pub x: usize,
    pub y: usize,
    pub side: WallSide,
}

/// Gap left between a cell box and each wall bounding it.
pub const MAZE_WALL_INSET: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct MazeInstance {
    pub width: usize,
    pub height: usize,
    /// `east[y * width + x]`: wall between `(x, y)` and `(x + 1, y)`.
    pub east: Vec<bool>,
    /// `north[y * width + x]`: wall between `(x, y)` and `(x, y + 1)`.
    pub north: Vec<bool>,
    pub removed: Vec<MazeWall>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub seed: u64,
}

fn interior_walls(w: usize, h: usize) -> impl Iterator<Item = MazeWall> {
    (0..h).flat_map(move |y| {
        (0..w).flat_map(move |x| {
            let e = (x + 1 < w).then_some(MazeWall { x, y, side: WallSide::East });
            let n = (y + 1 < h).then_some(MazeWall { x, y, side: WallSide::North });
            e.into_iter().chain(n)
        })
    })
}

/// Perfect maze by randomized depth-first search from the bottom-left
/// cell, followed by the removal of `removed_walls` distinct walls chosen
/// uniformly among those still standing.
pub fn generate_maze(width: usize, height: usize, removed_walls: usize, seed: u64) -> Result<MazeInstance> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidArgument(format!("maze needs at least 2x2 cells, got {width}x{height}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = |x: usize, y: usize| y * width + x;
    let mut east = vec![true; width * height];
    let mut north = vec![true; width * height];
    for y in 0..height {
        east[idx(width - 1, y)] = false;
    }
    for x in 0..width {
        north[idx(x, height - 1)] = false;
    }
    let mut visited = vec![false; width * height];
    let mut stack = vec![(0usize, 0usize)];
    visited[0] = true;
    while let Some(&(x, y)) = stack.last() {
        let mut next = Vec::with_capacity(4);
        if x + 1 < width && !visited[idx(x + 1, y)] {
            next.push((x + 1, y));
        }
        if x > 0 && !visited[idx(x - 1, y)] {
            next.push((x - 1, y));
        }
        if y + 1 < height && !visited[idx(x, y + 1)] {
            next.push((x, y + 1));
        }
        if y > 0 && !visited[idx(x, y - 1)] {
            next.push((x, y - 1));
        }
        let Some(&(nx, ny)) = next.choose(&mut rng) else {
            stack.pop();
            continue;
        };
        match (nx.cmp(&x), ny.cmp(&y)) {
            (core::cmp::Ordering::Greater, _) => east[idx(x, y)] = false,
            (core::cmp::Ordering::Less, _) => east[idx(nx, ny)] = false,
            (_, core::cmp::Ordering::Greater) => north[idx(x, y)] = false,
            _ => north[idx(nx, ny)] = false,
        }
        visited[idx(nx, ny)] = true;
        stack.push((nx, ny));
    }
    let standing: Vec<MazeWall> = interior_walls(width, height)
        .filter(|w| match w.side {
            WallSide::East => east[idx(w.x, w.y)],
            WallSide::North => north[idx(w.x, w.y)],
        })
        .collect();
    if removed_walls > standing.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot remove {removed_walls} walls, only {} interior walls stand",
            standing.len()
        )));
    }
    let mut removed: Vec<MazeWall> = sample(&mut rng, standing.len(), removed_walls)
        .into_iter()
        .map(|i| standing[i])
        .collect();
    removed.sort();
    for w in &removed {
        match w.side {
            WallSide::East => east[idx(w.x, w.y)] = false,
            WallSide::North => north[idx(w.x, w.y)] = false,
        }
    }
    Ok(MazeInstance {
        width,
        height,
        east,
        north,
        removed,
        start: (0, 0),
        goal: (width - 1, height - 1),
        seed,
    })
}

impl MazeInstance {
    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Whether a wall separates `(x, y)` from its neighbour on `side`;
    /// the outer boundary always counts as a wall.
    pub fn wall(&self, x: usize, y: usize, side: WallSide) -> bool {
        match side {
            WallSide::East => x + 1 >= self.width || self.east[self.idx(x, y)],
            WallSide::North => y + 1 >= self.height || self.north[self.idx(x, y)],
        }
    }

    fn wall_west(&self, x: usize, y: usize) -> bool {
        x == 0 || self.wall(x - 1, y, WallSide::East)
    }

    fn wall_south(&self, x: usize, y: usize) -> bool {
        y == 0 || self.wall(x, y - 1, WallSide::North)
    }

    /// Number of standing interior walls.
    pub fn wall_count(&self) -> usize {
        interior_walls(self.width, self.height)
            .filter(|w| self.wall(w.x, w.y, w.side))
            .count()
    }

    /// Pairs of side-adjacent cells not separated by a wall.
    pub fn adjacencies(&self) -> Vec<((usize, usize), (usize, usize))> {
        interior_walls(self.width, self.height)
            .filter(|w| !self.wall(w.x, w.y, w.side))
            .map(|w| match w.side {
                WallSide::East => ((w.x, w.y), (w.x + 1, w.y)),
                WallSide::North => ((w.x, w.y), (w.x, w.y + 1)),
            })
            .collect()
    }

    /// Cell box pulled back by [`MAZE_WALL_INSET`] from every wall, so
    /// cells only touch across removed walls. Region `y * W + x`.
    pub fn cell_box(&self, x: usize, y: usize) -> Aabb {
        let g = MAZE_WALL_INSET;
        let inset = |walled: bool| if walled { g } else { 0.0 };
        let (fx, fy) = (x as f64, y as f64);
        aabb(
            &[fx + inset(self.wall_west(x, y)), fy + inset(self.wall_south(x, y))],
            &[
                fx + 1.0 - inset(self.wall(x, y, WallSide::East)),
                fy + 1.0 - inset(self.wall(x, y, WallSide::North)),
            ],
        )
    }

    pub fn regions(&self) -> Vec<ConvexSet> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| ConvexSet::Box(self.cell_box(x, y)))
            .collect()
    }

    pub fn q0(&self) -> Vec<f64> {
        vec![self.start.0 as f64 + 0.5, self.start.1 as f64 + 0.5]
    }

    pub fn qt(&self) -> Vec<f64> {
        vec![self.goal.0 as f64 + 0.5, self.goal.1 as f64 + 0.5]
    }

    /// Minimum-length query from the start cell centre to the goal cell
    /// centre with unit speed bounds.
    pub fn problem(&self) -> PlanningProblem {
        let t_max = 2.0 * (self.width * self.height) as f64;
        PlanningProblem {
            regions: self.regions(),
            spec: PlanningSpec::new(self.q0(), self.qt(), unit_box(2), t_max),
        }
    }

    /// Text drawing with the top row first; `S` and `G` mark start and goal.
    pub fn ascii(&self) -> String {
        let mut out = String::new();
        out.push('+');
        for _ in 0..self.width {
            out.push_str("--+");
        }
        out.push('\n');
        for y in (0..self.height).rev() {
            out.push('|');
            for x in 0..self.width {
                let mark = if (x, y) == self.start {
                    "S "
                } else if (x, y) == self.goal {
                    "G "
                } else {
                    "  "
                };
                out.push_str(mark);
                out.push(if self.wall(x, y, WallSide::East) { '|' } else { ' ' });
            }
            out.push_str("\n+");
            for x in 0..self.width {
                out.push_str(if self.wall_south(x, y) { "--+" } else { "  +" });
            }
            out.push('\n');
        }
        out
    }
}

// ------------------------------------------------------------- buildings

/// Free numeric parameters of the building generator.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildingConfig {
    pub cell: f64,
    pub height: f64,
    pub wall_thickness: f64,
    pub robot_radius: f64,
    pub door_width: f64,
    pub door_height: f64,
    pub window_width: f64,
    pub window_bottom: f64,
    pub window_top: f64,
    pub tree_side: f64,
    pub tree_probability: f64,
    /// Probability that an inner cell next to a room joins the building.
    pub room_probability: f64,
    /// Height of the start and goal configurations.
    pub hover_height: f64,
}

impl Default for BuildingConfig {
    fn default() -> Self {
        Self {
            cell: 5.0,
            height: 3.0,
            wall_thickness: 0.25,
            robot_radius: 0.2,
            door_width: 1.2,
            door_height: 2.0,
            window_width: 1.2,
            window_bottom: 1.0,
            window_top: 2.2,
            tree_side: 1.0,
            tree_probability: 0.5,
            room_probability: 0.5,
            hover_height: 1.0,
        }
    }
}

pub const BUILDING_GRID: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Occupancy {
    Room,
    Tree,
    Grass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OuterWall {
    Doorway,
    Window,
    TwoWindows,
    Solid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Divider {
    Doorway,
    VerticalHalfWall,
    HorizontalHalfWall,
    NoWall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WallKind {
    Outer(OuterWall),
    Divider(Divider),
}

/// Wall on the shared side of two 4-adjacent cells, `a` before `b` in
/// row-major order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildingWall {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub kind: WallKind,
}

/// Rectangular hole in a wall: lateral offsets along the shared side
/// (from its lower coordinate) and a height interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Opening {
    pub u: (f64, f64),
    pub z: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildingInstance {
    pub config: BuildingConfig,
    /// Row-major, `cells[y * 5 + x]`.
    pub cells: Vec<Occupancy>,
    pub walls: Vec<BuildingWall>,
    /// Tree footprints, one per tree cell, in cell order.
    pub trees: Vec<Aabb>,
    /// Exact partition of the world into free and solid boxes.
    pub free_boxes: Vec<Aabb>,
    pub solids: Vec<Aabb>,
    /// Collision-free regions for the robot centre.
    pub regions: Vec<Aabb>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub seed: u64,
}

const START_CELL: (usize, usize) = (0, 0);
const GOAL_CELL: (usize, usize) = (3, 2);

fn is_inner(c: (usize, usize)) -> bool {
    (1..BUILDING_GRID - 1).contains(&c.0) && (1..BUILDING_GRID - 1).contains(&c.1)
}

fn neighbours(c: (usize, usize)) -> impl Iterator<Item = (usize, usize)> {
    let (x, y) = c;
    [
        (x + 1 < BUILDING_GRID).then(|| (x + 1, y)),
        (x > 0).then(|| (x - 1, y)),
        (y + 1 < BUILDING_GRID).then(|| (x, y + 1)),
        (y > 0).then(|| (x, y - 1)),
    ]
    .into_iter()
    .flatten()
}

impl BuildingConfig {
    fn openings(&self, kind: WallKind) -> Vec<Opening> {
        let (s, t, h) = (self.cell, self.wall_thickness, self.height);
        let centred = |c: f64, w: f64| (c - w / 2.0, c + w / 2.0);
        let window = (self.window_bottom, self.window_top);
        match kind {
            WallKind::Outer(OuterWall::Doorway) | WallKind::Divider(Divider::Doorway) => vec![Opening {
                u: centred(s / 2.0, self.door_width),
                z: (0.0, self.door_height),
            }],
            WallKind::Outer(OuterWall::Window) => vec![Opening {
                u: centred(s / 2.0, self.window_width),
                z: window,
            }],
            WallKind::Outer(OuterWall::TwoWindows) => vec![
                Opening {
                    u: centred(s / 3.0, self.window_width),
                    z: window,
                },
                Opening {
                    u: centred(2.0 * s / 3.0, self.window_width),
                    z: window,
                },
            ],
            WallKind::Outer(OuterWall::Solid) | WallKind::Divider(Divider::NoWall) => Vec::new(),
            WallKind::Divider(Divider::VerticalHalfWall) => vec![Opening {
                u: (s / 2.0, s - t / 2.0),
                z: (0.0, h),
            }],
            WallKind::Divider(Divider::HorizontalHalfWall) => vec![Opening {
                u: (t / 2.0, s - t / 2.0),
                z: (h / 2.0, h),
            }],
        }
    }
}

/// Random building following the goal-first growth procedure: inner cells
/// next to a room join the building at random, the remaining inner cells
/// are outside and may hold a tree, the border ring is grass.
pub fn generate_building(seed: u64) -> BuildingInstance {
    generate_building_with(seed, &BuildingConfig::default())
}

pub fn generate_building_with(seed: u64, config: &BuildingConfig) -> BuildingInstance {
    let n = BUILDING_GRID;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let at = |c: (usize, usize)| c.1 * n + c.0;
    let mut cells = vec![Occupancy::Grass; n * n];
    let mut assigned = vec![false; n * n];
    cells[at(GOAL_CELL)] = Occupancy::Room;
    assigned[at(GOAL_CELL)] = true;
    let mut queue = alloc::collections::VecDeque::from([GOAL_CELL]);
    while let Some(c) = queue.pop_front() {
        for nb in neighbours(c) {
            if !is_inner(nb) || assigned[at(nb)] {
                continue;
            }
            assigned[at(nb)] = true;
            if rng.random_bool(config.room_probability) {
                cells[at(nb)] = Occupancy::Room;
                queue.push_back(nb);
            }
        }
    }
    for y in 1..n - 1 {
        for x in 1..n - 1 {
            if cells[at((x, y))] != Occupancy::Room && rng.random_bool(config.tree_probability) {
                cells[at((x, y))] = Occupancy::Tree;
            }
        }
    }

    const OUTER: [OuterWall; 4] = [OuterWall::Doorway, OuterWall::Window, OuterWall::TwoWindows, OuterWall::Solid];
    const DIVIDERS: [Divider; 4] = [
        Divider::Doorway,
        Divider::VerticalHalfWall,
        Divider::HorizontalHalfWall,
        Divider::NoWall,
    ];
    let mut walls = Vec::new();
    for y in 0..n {
        for x in 0..n {
            for b in [(x + 1, y), (x, y + 1)] {
                if b.0 >= n || b.1 >= n {
                    continue;
                }
                let rooms = (cells[at((x, y))] == Occupancy::Room) as u8 + (cells[at(b)] == Occupancy::Room) as u8;
                let kind = match rooms {
                    0 => continue,
                    1 => WallKind::Outer(*OUTER.choose(&mut rng).unwrap()),
                    _ => WallKind::Divider(*DIVIDERS.choose(&mut rng).unwrap()),
                };
                walls.push(BuildingWall { a: (x, y), b, kind });
            }
        }
    }
    let outer: Vec<usize> = (0..walls.len())
        .filter(|&i| matches!(walls[i].kind, WallKind::Outer(_)))
        .collect();
    if outer.iter().all(|&i| walls[i].kind == WallKind::Outer(OuterWall::Solid)) {
        let i = *outer.choose(&mut rng).expect("the goal room has outer walls");
        walls[i].kind = WallKind::Outer(OuterWall::Doorway);
    }

    let (s, t, r) = (config.cell, config.wall_thickness, config.robot_radius);
    let core = s - t;
    let margin = 2.0 * r + 0.5;
    let mut trees = Vec::new();
    for y in 0..n {
        for x in 0..n {
            if cells[at((x, y))] == Occupancy::Tree {
                let span = core - config.tree_side - 2.0 * margin;
                let ox = x as f64 * s + t / 2.0 + margin + rng.random::<f64>() * span;
                let oy = y as f64 * s + t / 2.0 + margin + rng.random::<f64>() * span;
                trees.push(aabb(&[ox, oy], &[ox + config.tree_side, oy + config.tree_side]));
            }
        }
    }

    let mut inst = BuildingInstance {
        config: config.clone(),
        cells,
        walls,
        trees,
        free_boxes: Vec::new(),
        solids: Vec::new(),
        regions: Vec::new(),
        start: START_CELL,
        goal: GOAL_CELL,
        seed,
    };
    inst.decompose();
    inst
}

/// Box with `lo/hi` given per axis as (x, y, z) intervals.
fn box3(x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> Aabb {
    aabb(&[x.0, y.0, z.0], &[x.1, y.1, z.1])
}

fn nonempty(b: &Aabb) -> bool {
    b.lo.iter().zip(&b.hi).all(|(l, h)| h - l > 1e-12)
}

impl BuildingInstance {
    pub fn occupancy(&self, c: (usize, usize)) -> Occupancy {
        self.cells[c.1 * BUILDING_GRID + c.0]
    }

    /// World extent `[0, 25] x [0, 25] x [0, H]` for the default config.
    pub fn world(&self) -> Aabb {
        let w = self.config.cell * BUILDING_GRID as f64;
        aabb(&[0.0, 0.0, 0.0], &[w, w, self.config.height])
    }

    /// The wall on the shared side of `a` and `b`, if one stands there.
    pub fn wall_between(&self, a: (usize, usize), b: (usize, usize)) -> Option<&BuildingWall> {
        self.walls
            .iter()
            .find(|w| (w.a == a && w.b == b) || (w.a == b && w.b == a))
            .filter(|w| w.kind != WallKind::Divider(Divider::NoWall))
    }

    fn tree_in(&self, c: (usize, usize)) -> Option<&Aabb> {
        let before = self.cells[..c.1 * BUILDING_GRID + c.0]
            .iter()
            .filter(|o| **o == Occupancy::Tree)
            .count();
        (self.occupancy(c) == Occupancy::Tree).then(|| &self.trees[before])
    }

    /// Fills `free_boxes`, `solids` and `regions`.
    fn decompose(&mut self) {
        let cfg = self.config.clone();
        let (s, t, r, h) = (cfg.cell, cfg.wall_thickness, cfg.robot_radius, cfg.height);
        let ht = t / 2.0;
        let n = BUILDING_GRID;
        let zfull = (0.0, h);
        let zsafe = (r, h - r);
        let mut free = Vec::new();
        let mut solids = Vec::new();
        let mut regions = Vec::new();

        for y in 0..n {
            for x in 0..n {
                let c = (x, y);
                let (x0, y0) = (x as f64 * s, y as f64 * s);
                let (cx, cy) = ((x0 + ht, x0 + s - ht), (y0 + ht, y0 + s - ht));
                if let Some(tree) = self.tree_in(c).cloned() {
                    let (tx, ty) = ((tree.lo[0], tree.hi[0]), (tree.lo[1], tree.hi[1]));
                    solids.push(box3(tx, ty, zfull));
                    free.push(box3((cx.0, tx.0), cy, zfull));
                    free.push(box3((tx.1, cx.1), cy, zfull));
                    free.push(box3(tx, (cy.0, ty.0), zfull));
                    free.push(box3(tx, (ty.1, cy.1), zfull));
                    let e = 2.0 * r;
                    regions.push(box3((cx.0 + r, tx.0 - r), (cy.0 + r, cy.1 - r), zsafe));
                    regions.push(box3((tx.1 + r, cx.1 - r), (cy.0 + r, cy.1 - r), zsafe));
                    regions.push(box3((tx.0 - e, tx.1 + e), (cy.0 + r, ty.0 - r), zsafe));
                    regions.push(box3((tx.0 - e, tx.1 + e), (ty.1 + r, cy.1 - r), zsafe));
                } else {
                    free.push(box3(cx, cy, zfull));
                    regions.push(box3((cx.0 + r, cx.1 - r), (cy.0 + r, cy.1 - r), zsafe));
                }

                // side bands: (neighbour, crossing interval, lateral interval, vertical side?)
                let bands = [
                    (x.checked_sub(1).map(|v| (v, y)), (x0, x0 + ht), cy, true),
                    ((x + 1 < n).then(|| (x + 1, y)), (x0 + s - ht, x0 + s), cy, true),
                    (y.checked_sub(1).map(|v| (x, v)), (y0, y0 + ht), cx, false),
                    ((y + 1 < n).then(|| (x, y + 1)), (y0 + s - ht, y0 + s), cx, false),
                ];
                let mut walled = [false; 4];
                for (k, (nb, cross, lat, vertical)) in bands.into_iter().enumerate() {
                    let place = |l: (f64, f64), z: (f64, f64)| {
                        if vertical {
                            box3(cross, l, z)
                        } else {
                            box3(l, cross, z)
                        }
                    };
                    let wall = nb.and_then(|nb| self.wall_between(c, nb)).copied();
                    walled[k] = wall.is_some();
                    let Some(wall) = wall else {
                        free.push(place(lat, zfull));
                        continue;
                    };
                    let base = if vertical { y0 } else { x0 };
                    let holes: Vec<Opening> = cfg
                        .openings(wall.kind)
                        .into_iter()
                        .map(|o| Opening {
                            u: (base + o.u.0, base + o.u.1),
                            z: o.z,
                        })
                        .collect();
                    let mut us = vec![lat.0, lat.1];
                    let mut zs = vec![0.0, h];
                    for o in &holes {
                        us.extend([o.u.0, o.u.1]);
                        zs.extend([o.z.0, o.z.1]);
                    }
                    for v in [&mut us, &mut zs] {
                        v.sort_by(f64::total_cmp);
                        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
                    }
                    for uw in us.windows(2) {
                        for zw in zs.windows(2) {
                            let (um, zm) = ((uw[0] + uw[1]) / 2.0, (zw[0] + zw[1]) / 2.0);
                            let open = holes
                                .iter()
                                .any(|o| o.u.0 < um && um < o.u.1 && o.z.0 < zm && zm < o.z.1);
                            let piece = place((uw[0], uw[1]), (zw[0], zw[1]));
                            if open {
                                free.push(piece);
                            } else {
                                solids.push(piece);
                            }
                        }
                    }
                }
                // corner squares, solid when an incident side of this cell is walled
                let corners = [
                    ((x0, x0 + ht), (y0, y0 + ht), walled[0] || walled[2]),
                    ((x0 + s - ht, x0 + s), (y0, y0 + ht), walled[1] || walled[2]),
                    ((x0, x0 + ht), (y0 + s - ht, y0 + s), walled[0] || walled[3]),
                    ((x0 + s - ht, x0 + s), (y0 + s - ht, y0 + s), walled[1] || walled[3]),
                ];
                for (qx, qy, solid) in corners {
                    if solid {
                        solids.push(box3(qx, qy, zfull));
                    } else {
                        free.push(box3(qx, qy, zfull));
                    }
                }
            }
        }

        // passages and openings across shared sides
        let e = 2.0 * r;
        for y in 0..n {
            for x in 0..n {
                for (b, vertical) in [((x + 1, y), true), ((x, y + 1), false)] {
                    if b.0 >= n || b.1 >= n {
                        continue;
                    }
                    let (x0, y0) = (x as f64 * s, y as f64 * s);
                    let (line, base) = if vertical { (x0 + s, y0) } else { (y0 + s, x0) };
                    let cross = (line - ht - e, line + ht + e);
                    let place = |l: (f64, f64), z: (f64, f64)| {
                        if vertical {
                            box3(cross, l, z)
                        } else {
                            box3(l, cross, z)
                        }
                    };
                    match self.wall_between((x, y), b) {
                        None => regions.push(place((base + ht + r, base + s - ht - r), zsafe)),
                        Some(w) => {
                            for o in cfg.openings(w.kind) {
                                let z = ((o.z.0 + r).max(r), (o.z.1 - r).min(h - r));
                                regions.push(place((base + o.u.0 + r, base + o.u.1 - r), z));
                            }
                        }
                    }
                }
            }
        }
        regions.retain(nonempty);
        self.free_boxes = free;
        self.solids = solids;
        self.regions = regions;
    }

    pub fn q0(&self) -> Vec<f64> {
        let s = self.config.cell;
        vec![(self.start.0 as f64 + 0.5) * s, (self.start.1 as f64 + 0.5) * s, self.config.hover_height]
    }

    pub fn qt(&self) -> Vec<f64> {
        let s = self.config.cell;
        vec![(self.goal.0 as f64 + 0.5) * s, (self.goal.1 as f64 + 0.5) * s, self.config.hover_height]
    }

    /// Minimum-length query between the hover points above the start and
    /// goal cells.
    pub fn problem(&self) -> PlanningProblem {
        PlanningProblem {
            regions: self.regions.iter().cloned().map(ConvexSet::Box).collect(),
            spec: PlanningSpec::new(self.q0(), self.qt(), unit_box(3), 1000.0),
        }
    }
}

// ------------------------------------------------------------ 2D fixtures

/// Box `[0, 5]^2` rows plus the halfspace `n . x >= c`.
fn world_halfplane(n: [f64; 2], c: f64) -> ConvexSet {
    let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0], vec![-n[0], -n[1]]];
    ConvexSet::hpolytope(rows, vec![5.0, 0.0, 5.0, 0.0, -c]).expect("static fixture")
}

/// Corners of the fixture's obstacle, counter-clockwise.
pub const FIXTURE_OBSTACLE: [[f64; 2]; 4] = [[0.8, 0.6], [1.4, 0.35], [4.4, 4.1], [1.8, 3.0]];

/// The 5 x 5 world with one convex obstacle stretched along the diagonal
/// between `(0.2, 0.2)` and `(4.8, 4.8)`. Region `k` is the part of the
/// world outside edge `k` of the obstacle, so the four regions cover the
/// free space exactly. The start lies in regions 0 and 3, the goal in
/// region 2; region 1 runs below the obstacle and region 3 above it. This only approximates the
/// published figure.
pub fn fixture_2d() -> PlanningProblem {
    let v = FIXTURE_OBSTACLE;
    let regions = (0..4)
        .map(|k| {
            let (a, b) = (v[k], v[(k + 1) % 4]);
            // outward normal of a counter-clockwise edge
            let n = [b[1] - a[1], a[0] - b[0]];
            world_halfplane(n, n[0] * a[0] + n[1] * a[1])
        })
        .collect();
    PlanningProblem {
        regions,
        spec: PlanningSpec::new(vec![0.2, 0.2], vec![4.8, 4.8], unit_box(2), 100.0),
    }
}

/// Which side of the fixture obstacle a point lies on: `true` above the
/// line through its first and third corners.
pub fn fixture_above(p: &[f64]) -> bool {
    let (a, b) = (FIXTURE_OBSTACLE[0], FIXTURE_OBSTACLE[2]);
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > 0.0
}

/// Smooth minimum-time variant: `a = 1`, `η = 2`, degree 6, zero boundary
/// velocities and accelerations, `ḣ_min = 0.1`, regularizer weight `eps`.
pub fn fixture_2d_smooth(eps: f64) -> PlanningProblem {
    let mut p = fixture_2d();
    let s = &mut p.spec;
    s.a = 1.0;
    s.b = 0.0;
    s.eta = 2;
    s.degree = 6;
    s.qdot0 = BoundaryVelocity::Fixed(vec![0.0, 0.0]);
    s.qdott = BoundaryVelocity::Fixed(vec![0.0, 0.0]);
    s.zero_derivatives = vec![2];
    s.hdot_min = 0.1;
    s.eps = eps;
    s.reg_order = 2;
    p
}

/// Minimum-time variant with free boundary velocities.
pub fn fixture_2d_min_time() -> PlanningProblem {
    let mut p = fixture_2d();
    p.spec.a = 1.0;
    p.spec.b = 0.0;
    p
}

/// Two ways from `(0.5, 0.5)` to `(4.5, 4.5)`: an L-shaped pair of
/// axis-aligned corridors (regions 0 and 1) and a corridor around the
/// diagonal (region 2). Minimum-time with unit box speeds.
pub fn two_route_fixture() -> PlanningProblem {
    let left = ConvexSet::Box(aabb(&[0.0, 0.0], &[1.0, 5.0]));
    let top = ConvexSet::Box(aabb(&[0.0, 4.0], &[5.0, 5.0]));
    let rows = vec![
        vec![1.0, -1.0],
        vec![-1.0, 1.0],
        vec![1.0, 0.0],
        vec![-1.0, 0.0],
        vec![0.0, 1.0],
        vec![0.0, -1.0],
    ];
    let diagonal = ConvexSet::hpolytope(rows, vec![0.4, 0.4, 5.0, 0.0, 5.0, 0.0]).expect("static fixture");
    let mut spec = PlanningSpec::new(vec![0.5, 0.5], vec![4.5, 4.5], unit_box(2), 100.0);
    spec.a = 1.0;
    spec.b = 0.0;
    PlanningProblem {
        regions: vec![left, top, diagonal],
        spec,
    }
}

// ---------------------------------------------------------- small graphs

fn l2_between(dim: usize) -> EdgeLength {
    EdgeLength::L2Sum(vec![(0..dim)
        .map(|j| AffineExpr::term(dim + j, 1.0) - AffineExpr::term(j, 1.0))
        .collect()])
}

fn squared_between(dim: usize) -> EdgeLength {
    let u = (0..dim).map(|j| AffineExpr::term(dim + j, 1.0) - AffineExpr::term(j, 1.0)).collect();
    EdgeLength::QuadOverLinSum(vec![(u, AffineExpr::constant(1.0))])
}

/// Largest number of simple source-target paths a random instance may have.
pub const RANDOM_GCS_PATH_LIMIT: usize = 60;

/// Random planar graph of convex sets with 4 to 10 vertices and between 1
/// and [`RANDOM_GCS_PATH_LIMIT`] simple source-target paths. The source and
/// target are points, the other vertices are boxes. Edge lengths mix
/// Euclidean distance, squared distance and a constant toll; some edges
/// carry a linear constraint.
pub fn random_gcs(seed: u64) -> GcsProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(p) = random_gcs_attempt(&mut rng) {
            return p;
        }
    }
}

fn random_gcs_attempt(rng: &mut ChaCha8Rng) -> Option<GcsProblem> {
    let n = rng.random_range(4..=10usize);
    let mut b = GcsBuilder::new();
    let s = b.add_vertex("s", Some(ConvexSet::point(vec![0.0, rng.random_range(0.0..4.0)]).ok()?));
    let inner: Vec<VertexId> = (0..n - 2)
        .map(|i| {
            let c = [rng.random_range(1.0..9.0), rng.random_range(0.0..4.0)];
            let w = [rng.random_range(0.2..1.5), rng.random_range(0.2..1.5)];
            let set = ConvexSet::boxed(vec![c[0] - w[0], c[1] - w[1]], vec![c[0] + w[0], c[1] + w[1]]).ok();
            b.add_vertex(format!("v{i}"), set)
        })
        .collect();
    let t = b.add_vertex("t", Some(ConvexSet::point(vec![10.0, rng.random_range(0.0..4.0)]).ok()?));
    let density = rng.random_range(0.25..0.5);
    let mut tails = vec![s];
    tails.extend(&inner);
    let mut heads = inner.clone();
    heads.push(t);
    for &u in &tails {
        for &v in &heads {
            if u == v || (u == s && v == t) || !rng.random_bool(density) {
                continue;
            }
            let length = match rng.random_range(0..4u8) {
                0 => squared_between(2),
                1 => EdgeLength::WeightedSum(vec![
                    (1.0, l2_between(2)),
                    (rng.random_range(0.1..1.0), EdgeLength::Affine(AffineExpr::constant(1.0))),
                ]),
                _ => l2_between(2),
            };
            let constraint = if rng.random_bool(0.15) {
                // the head lies no further left than the tail
                EdgeConstraint {
                    equalities: Vec::new(),
                    inequalities: vec![AffineExpr::term(0, 1.0) - AffineExpr::term(2, 1.0)],
                }
            } else {
                EdgeConstraint::none()
            };
            b.add_edge(u, v, length, constraint);
        }
    }
    b.set_source(s).set_target(t);
    let p = b.build().ok()?;
    match simple_paths(&p, RANDOM_GCS_PATH_LIMIT) {
        Ok(paths) if !paths.is_empty() => Some(p),
        _ => None,
    }
}

/// Vertex ids of [`unique_path_fixture`]: `s`, `1` to `6`, `t`.
pub const UNIQUE_PATH: [VertexId; 5] = [0, 2, 6, 3, 7];

/// Eight vertices whose only simple source-target path is
/// `s, 2, 6, 3, t`. Vertex 1 is a dead end hanging off 2, vertices 4 and
/// 5 form a triangle with 6, and the path edges 2-6 and 6-3 also exist in
/// reverse.
pub fn unique_path_fixture() -> GcsProblem {
    let cell = |x: f64, y: f64| ConvexSet::boxed(vec![x, y], vec![x + 0.8, y + 0.8]).ok();
    let mut b = GcsBuilder::new();
    let s = b.add_vertex("s", ConvexSet::point(vec![0.0, 0.4]).ok());
    let pos = [(1.0, 1.0), (1.0, 0.0), (3.0, 0.0), (2.0, 1.0), (3.0, 1.0), (2.0, 0.0)];
    let ids: Vec<VertexId> = pos
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| b.add_vertex(format!("{}", i + 1), cell(x, y)))
        .collect();
    let t = b.add_vertex("t", ConvexSet::point(vec![4.4, 0.4]).ok());
    let v = |k: usize| ids[k - 1];
    let edges = [
        (s, v(2)),
        (v(2), v(6)),
        (v(6), v(3)),
        (v(3), t),
        (v(6), v(2)),
        (v(3), v(6)),
        (v(1), v(2)),
        (v(2), v(1)),
        (v(4), v(5)),
        (v(5), v(4)),
        (v(5), v(6)),
        (v(6), v(5)),
        (v(4), v(6)),
        (v(6), v(4)),
    ];
    for (u, w) in edges {
        b.add_edge(u, w, l2_between(2), EdgeConstraint::none());
    }
    b.set_source(s).set_target(t);
    b.build().expect("static fixture")
}

#[cfg(all(test, feature = "std"))]
mod tests {
    use super::*;
    use crate::backend::AutoSolver;
    use crate::planner::build_graph;
    use alloc::collections::BTreeSet;

    fn cell_graph_paths(m: &MazeInstance, from: (usize, usize), to: (usize, usize)) -> usize {
        // count simple paths in the cell adjacency graph by DFS
        let adj = m.adjacencies();
        let mut nb = vec![Vec::new(); m.width * m.height];
        for (a, b) in adj {
            nb[m.idx(a.0, a.1)].push(m.idx(b.0, b.1));
            nb[m.idx(b.0, b.1)].push(m.idx(a.0, a.1));
        }
        fn go(v: usize, t: usize, nb: &[Vec<usize>], seen: &mut [bool]) -> usize {
            if v == t {
                return 1;
            }
            seen[v] = true;
            let mut c = 0;
            for &w in &nb[v] {
                if !seen[w] {
                    c += go(w, t, nb, seen);
                }
            }
            seen[v] = false;
            c
        }
        let mut seen = vec![false; m.width * m.height];
        go(m.idx(from.0, from.1), m.idx(to.0, to.1), &nb, &mut seen)
    }

    #[test]
    fn perfect_maze_is_a_spanning_tree() {
        for seed in 0..20 {
            let m = generate_maze(6, 5, 0, seed).unwrap();
            assert_eq!(m.adjacencies().len(), 6 * 5 - 1);
            for a in [(0, 0), (3, 2), (5, 4)] {
                for b in [(5, 0), (0, 4), (2, 2)] {
                    assert_eq!(cell_graph_paths(&m, a, b), 1);
                }
            }
        }
        let m = generate_maze(2, 2, 0, 7).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert_eq!(cell_graph_paths(&m, (a % 2, a / 2), (b % 2, b / 2)), 1);
                }
            }
        }
    }

    #[test]
    fn removals_add_adjacencies_and_paths() {
        for seed in 0..10 {
            let base = generate_maze(5, 5, 0, seed).unwrap();
            let more = generate_maze(5, 5, 4, seed).unwrap();
            assert_eq!(more.removed.len(), 4);
            assert_eq!(more.adjacencies().len(), 24 + 4);
            assert_eq!(more.removed.iter().collect::<BTreeSet<_>>().len(), 4);
            assert!(cell_graph_paths(&more, more.start, more.goal) > cell_graph_paths(&base, base.start, base.goal));
        }
        let interior = 5 * 4 * 2;
        assert!(generate_maze(5, 5, interior - 24, 1).is_ok());
        assert!(generate_maze(5, 5, interior - 24 + 1, 1).is_err());
        assert!(generate_maze(1, 5, 0, 1).is_err());
    }

    #[test]
    fn maze_is_deterministic_per_seed() {
        let a = generate_maze(10, 10, 5, 42).unwrap();
        assert_eq!(a, generate_maze(10, 10, 5, 42).unwrap());
        assert_ne!(a.east, generate_maze(10, 10, 5, 43).unwrap().east);
    }

    #[test]
    fn maze_regions_touch_exactly_across_open_sides() {
        let m = generate_maze(6, 6, 6, 3).unwrap();
        let regions = m.regions();
        let solver = AutoSolver;
        let open: BTreeSet<(usize, usize)> = m
            .adjacencies()
            .into_iter()
            .map(|(a, b)| (m.idx(a.0, a.1), m.idx(b.0, b.1)))
            .collect();
        for i in 0..regions.len() {
            for j in i + 1..regions.len() {
                let (xi, yi, xj, yj) = (i % 6, i / 6, j % 6, j / 6);
                let side = xi.abs_diff(xj) + yi.abs_diff(yj) == 1;
                let meet = crate::geometry::intersects(&regions[i], &regions[j], &solver).unwrap();
                if side {
                    assert_eq!(meet, open.contains(&(i, j)), "cells {i} {j}");
                } else if meet {
                    // diagonal contact only through a fully open 2x2 block
                    assert!(xi.abs_diff(xj) == 1 && yi.abs_diff(yj) == 1);
                    let (x, y) = (xi.min(xj), yi.min(yj));
                    assert!(!m.wall(x, y, WallSide::East) && !m.wall(x, y, WallSide::North));
                    assert!(!m.wall(x + 1, y, WallSide::North) && !m.wall(x, y + 1, WallSide::East));
                }
            }
        }
        let ascii = m.ascii();
        assert_eq!(ascii.lines().count(), 2 * 6 + 1);
        assert!(ascii.contains('S') && ascii.contains('G'));
    }

    fn solid_overlap(b: &BuildingInstance, region: &Aabb) -> f64 {
        let r = b.config.robot_radius;
        let grown = Aabb {
            lo: region.lo.iter().map(|v| v - r).collect(),
            hi: region.hi.iter().map(|v| v + r).collect(),
        };
        b.solids.iter().map(|s| s.overlap_volume(&grown)).sum()
    }

    #[test]
    fn building_tiles_the_world() {
        for seed in 0..20 {
            let b = generate_building(seed);
            let world = b.world();
            let boxes: Vec<&Aabb> = b.free_boxes.iter().chain(&b.solids).collect();
            let total: f64 = boxes.iter().map(|x| x.volume()).sum();
            assert!((total - world.volume()).abs() < 1e-9, "seed {seed}: {total}");
            for i in 0..boxes.len() {
                assert!(boxes[i].lo.iter().zip(&world.lo).all(|(a, w)| *a >= w - 1e-12));
                assert!(boxes[i].hi.iter().zip(&world.hi).all(|(a, w)| *a <= w + 1e-12));
                for j in i + 1..boxes.len() {
                    assert!(boxes[i].overlap_volume(boxes[j]) < 1e-12, "seed {seed}: {i} {j}");
                }
            }
        }
    }

    #[test]
    fn building_regions_keep_clear_of_solids() {
        for seed in 0..20 {
            let b = generate_building(seed);
            for region in &b.regions {
                assert!(solid_overlap(&b, region) < 1e-12, "seed {seed}: {region:?}");
            }
        }
    }

    #[test]
    fn building_goal_is_a_room_and_border_is_grass() {
        for seed in 0..100 {
            let b = generate_building(seed);
            assert_eq!(b.occupancy(b.goal), Occupancy::Room);
            for i in 0..BUILDING_GRID {
                for c in [(i, 0), (0, i), (i, 4), (4, i)] {
                    assert_eq!(b.occupancy(c), Occupancy::Grass);
                }
            }
            assert!(b
                .walls
                .iter()
                .any(|w| matches!(w.kind, WallKind::Outer(k) if k != OuterWall::Solid)));
        }
    }

    #[test]
    fn building_graph_connects_start_and_goal() {
        for seed in 0..10 {
            let b = generate_building(seed);
            let g = build_graph(&b.problem(), &AutoSolver).unwrap();
            assert!(g.problem.has_path(), "seed {seed}");
        }
        assert_eq!(generate_building(9), generate_building(9));
    }

    #[test]
    fn fixture_has_routes_on_both_sides() {
        let p = fixture_2d();
        let contains = |q: &[f64]| p.regions.iter().filter(|r| r.contains(q).unwrap()).count();
        assert!(contains(&p.spec.q0) >= 1 && contains(&p.spec.qt) >= 1);
        let g = build_graph(&p, &AutoSolver).unwrap();
        let paths = simple_paths(&g.problem, 1000).unwrap();
        let below = |path: &Vec<VertexId>| path.contains(&1) && !path.contains(&3);
        let above = |path: &Vec<VertexId>| path.contains(&3) && !path.contains(&1);
        assert!(paths.iter().any(below));
        assert!(paths.iter().any(above));
        assert!(!fixture_above(&[3.0, 1.0]) && fixture_above(&[1.0, 3.0]));
    }

    #[test]
    fn random_instances_respect_limits() {
        for seed in 0..30 {
            let p = random_gcs(seed);
            assert!(p.vertices().len() <= 10);
            let paths = simple_paths(&p, RANDOM_GCS_PATH_LIMIT).unwrap();
            assert!(!paths.is_empty() && paths.len() <= RANDOM_GCS_PATH_LIMIT);
        }
        assert_eq!(random_gcs(5).edges().len(), random_gcs(5).edges().len());
    }

    #[test]
    fn unique_path_fixture_has_one_path() {
        let p = unique_path_fixture();
        assert_eq!(simple_paths(&p, 10).unwrap(), vec![UNIQUE_PATH.to_vec()]);
    }
}
