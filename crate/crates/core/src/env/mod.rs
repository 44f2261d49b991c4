//! Seedable achievement gridworld with a Crafter-style technology chain:
//! collect wood, place a table, craft a wood pickaxe, collect stone, craft a
//! stone pickaxe. Observations are symbolic (egocentric one-hot window plus
//! inventory and facing); captions follow fixed natural-language templates.

mod captions;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use captions::{caption_observation, caption_transition, transition_captions, EMPTY_TRANSITION};

use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 8;
pub const VIEW: usize = 5;
pub const EPISODE_LIMIT: u32 = 256;
pub const INVENTORY_CAP: u32 = 9;
/// One-hot cell channels per window position.
pub const CELL_CHANNELS: usize = 4;
pub const OBS_DIM: usize = VIEW * VIEW * CELL_CHANNELS + 4 + 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    Tree,
    Stone,
    Table,
}

impl Cell {
    fn channel(self) -> usize {
        match self {
            Cell::Empty => 0,
            Cell::Tree => 1,
            Cell::Stone => 2,
            Cell::Table => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cell::Empty => "empty",
            Cell::Tree => "tree",
            Cell::Stone => "stone",
            Cell::Table => "table",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Interact,
    PlaceTable,
    CraftWoodPickaxe,
    CraftStonePickaxe,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Interact,
        Action::PlaceTable,
        Action::CraftWoodPickaxe,
        Action::CraftStonePickaxe,
    ];
    pub const COUNT: usize = 8;

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&a| a == self).expect("listed")
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::Interact => "interact",
            Action::PlaceTable => "place_table",
            Action::CraftWoodPickaxe => "craft_wood_pickaxe",
            Action::CraftStonePickaxe => "craft_stone_pickaxe",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAction(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Facing {
    Up,
    Down,
    Left,
    Right,
}

impl Facing {
    fn delta(self) -> (isize, isize) {
        match self {
            Facing::Up => (-1, 0),
            Facing::Down => (1, 0),
            Facing::Left => (0, -1),
            Facing::Right => (0, 1),
        }
    }

    fn index(self) -> usize {
        match self {
            Facing::Up => 0,
            Facing::Down => 1,
            Facing::Left => 2,
            Facing::Right => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Inventory {
    pub wood: u32,
    pub stone: u32,
    pub wood_pickaxe: u32,
    pub stone_pickaxe: u32,
}

impl Inventory {
    pub fn is_empty(&self) -> bool {
        *self == Inventory::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Achievement {
    CollectWood,
    PlaceTable,
    MakeWoodPickaxe,
    CollectStone,
    MakeStonePickaxe,
}

impl Achievement {
    pub const ALL: [Achievement; 5] = [
        Achievement::CollectWood,
        Achievement::PlaceTable,
        Achievement::MakeWoodPickaxe,
        Achievement::CollectStone,
        Achievement::MakeStonePickaxe,
    ];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn name(self) -> &'static str {
        match self {
            Achievement::CollectWood => "collect_wood",
            Achievement::PlaceTable => "place_table",
            Achievement::MakeWoodPickaxe => "make_wood_pickaxe",
            Achievement::CollectStone => "collect_stone",
            Achievement::MakeStonePickaxe => "make_stone_pickaxe",
        }
    }

    /// The transition caption emitted when this achievement's action succeeds.
    pub fn caption(self) -> &'static str {
        match self {
            Achievement::CollectWood => "collect the wood",
            Achievement::PlaceTable => "place the table",
            Achievement::MakeWoodPickaxe => "craft the wood pickaxe",
            Achievement::CollectStone => "collect the stone",
            Achievement::MakeStonePickaxe => "craft the stone pickaxe",
        }
    }
}

/// Set of unlocked achievements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Achievements(u8);

impl Achievements {
    pub fn contains(self, a: Achievement) -> bool {
        self.0 & a.bit() != 0
    }

    /// Returns true if `a` was not already unlocked.
    pub fn insert(&mut self, a: Achievement) -> bool {
        let fresh = !self.contains(a);
        self.0 |= a.bit();
        fresh
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn all(self) -> bool {
        self.count() == Achievement::ALL.len()
    }

    pub fn iter(self) -> impl Iterator<Item = Achievement> {
        Achievement::ALL.into_iter().filter(move |&a| self.contains(a))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Moved,
    Collected,
    Placed,
    Crafted,
    Noop,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EnvEvent {
    pub kind: EventKind,
    pub object: Option<&'static str>,
}

impl EnvEvent {
    pub fn noop() -> Self {
        Self {
            kind: EventKind::Noop,
            object: None,
        }
    }

    fn new(kind: EventKind, object: &'static str) -> Self {
        Self {
            kind,
            object: Some(object),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WorldState {
    size: usize,
    grid: Vec<Cell>,
    player: (usize, usize),
    facing: Facing,
    pub inventory: Inventory,
    pub achievements: Achievements,
    pub step_count: u32,
    pub episode_limit: u32,
    terminated: bool,
}

/// What the goal providers and goal-quality metrics are allowed to see.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StateSummary {
    pub sees_tree: bool,
    pub sees_stone: bool,
    pub sees_table: bool,
    pub table_nearby: bool,
    pub inventory: Inventory,
    pub achievements: Achievements,
}

impl WorldState {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cell(&self, r: usize, c: usize) -> Cell {
        self.grid[r * self.size + c]
    }

    pub fn player(&self) -> (usize, usize) {
        self.player
    }

    pub fn facing(&self) -> Facing {
        self.facing
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    fn offset(&self, (r, c): (usize, usize), (dr, dc): (isize, isize)) -> Option<(usize, usize)> {
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        let n = self.size as isize;
        (nr >= 0 && nc >= 0 && nr < n && nc < n).then_some((nr as usize, nc as usize))
    }

    fn facing_cell(&self) -> Option<(usize, usize)> {
        self.offset(self.player, self.facing.delta())
    }

    fn set(&mut self, (r, c): (usize, usize), cell: Cell) {
        self.grid[r * self.size + c] = cell;
    }

    /// Cells of the egocentric window, `None` outside the grid.
    pub fn window(&self) -> Vec<Option<Cell>> {
        let half = (VIEW / 2) as isize;
        let mut out = Vec::with_capacity(VIEW * VIEW);
        for dr in -half..=half {
            for dc in -half..=half {
                out.push(self.offset(self.player, (dr, dc)).map(|(r, c)| self.cell(r, c)));
            }
        }
        out
    }

    /// A table within one step in any of the eight directions.
    pub fn table_nearby(&self) -> bool {
        (-1..=1).any(|dr| {
            (-1..=1).any(|dc| {
                self.offset(self.player, (dr, dc))
                    .is_some_and(|(r, c)| self.cell(r, c) == Cell::Table)
            })
        })
    }

    pub fn summary(&self) -> StateSummary {
        let window = self.window();
        let sees = |c: Cell| window.iter().any(|w| *w == Some(c));
        StateSummary {
            sees_tree: sees(Cell::Tree),
            sees_stone: sees(Cell::Stone),
            sees_table: sees(Cell::Table),
            table_nearby: self.table_nearby(),
            inventory: self.inventory,
            achievements: self.achievements,
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        let mut x = vec![0.0; OBS_DIM];
        for (i, cell) in self.window().into_iter().enumerate() {
            if let Some(c) = cell {
                x[i * CELL_CHANNELS + c.channel()] = 1.0;
            }
        }
        let base = VIEW * VIEW * CELL_CHANNELS;
        let inv = self.inventory;
        let cap = INVENTORY_CAP as f64;
        x[base] = inv.wood as f64 / cap;
        x[base + 1] = inv.stone as f64 / cap;
        x[base + 2] = inv.wood_pickaxe as f64 / cap;
        x[base + 3] = inv.stone_pickaxe as f64 / cap;
        x[base + 4 + self.facing.index()] = 1.0;
        x
    }
}

#[derive(Clone, Debug)]
pub struct ResetOutput {
    pub observation: Vec<f64>,
    pub observation_caption: String,
    pub transition_caption: String,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// `false` once the episode has ended.
    pub cont: bool,
    pub event: EnvEvent,
}

/// The gridworld. A pure function of (seed, action sequence).
#[derive(Clone, Debug)]
pub struct MiniGrid {
    size: usize,
    episode_limit: u32,
    state: WorldState,
}

impl Default for MiniGrid {
    fn default() -> Self {
        Self::new(GRID_SIZE, EPISODE_LIMIT)
    }
}

impl MiniGrid {
    pub fn new(size: usize, episode_limit: u32) -> Self {
        assert!(size >= 3, "grid too small");
        let mut env = Self {
            size,
            episode_limit,
            state: WorldState {
                size,
                grid: vec![Cell::Empty; size * size],
                player: (0, 0),
                facing: Facing::Down,
                inventory: Inventory::default(),
                achievements: Achievements::default(),
                step_count: 0,
                episode_limit,
                terminated: false,
            },
        };
        env.reset(0);
        env
    }

    /// Builds an environment from rows of `.`, `T`, `S`, `B` (table) and `P`
    /// (player on an empty cell).
    pub fn from_layout(rows: &[&str], episode_limit: u32) -> Self {
        let size = rows.len();
        let mut grid = Vec::with_capacity(size * size);
        let mut player = (0, 0);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), size, "layout must be square");
            for (c, ch) in row.chars().enumerate() {
                grid.push(match ch {
                    'T' => Cell::Tree,
                    'S' => Cell::Stone,
                    'B' => Cell::Table,
                    'P' => {
                        player = (r, c);
                        Cell::Empty
                    }
                    _ => Cell::Empty,
                });
            }
        }
        Self {
            size,
            episode_limit,
            state: WorldState {
                size,
                grid,
                player,
                facing: Facing::Down,
                inventory: Inventory::default(),
                achievements: Achievements::default(),
                step_count: 0,
                episode_limit,
                terminated: false,
            },
        }
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn set_state(&mut self, state: WorldState) {
        self.state = state;
    }

    /// Procedurally places 4-8 trees and 3-6 stones (at least two of each on
    /// small grids) and drops the player on a random empty cell.
    pub fn reset(&mut self, seed: u64) -> ResetOutput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.size;
        let cells = n * n;
        let trees = if cells >= 36 { rng.gen_range(4..=8) } else { 2 };
        let stones = if cells >= 36 { rng.gen_range(3..=6) } else { 2 };
        let mut idx: Vec<usize> = (0..cells).collect();
        idx.shuffle(&mut rng);
        let mut grid = vec![Cell::Empty; cells];
        for &i in &idx[..trees] {
            grid[i] = Cell::Tree;
        }
        for &i in &idx[trees..trees + stones] {
            grid[i] = Cell::Stone;
        }
        let p = idx[trees + stones];
        self.state = WorldState {
            size: n,
            grid,
            player: (p / n, p % n),
            facing: Facing::Down,
            inventory: Inventory::default(),
            achievements: Achievements::default(),
            step_count: 0,
            episode_limit: self.episode_limit,
            terminated: false,
        };
        ResetOutput {
            observation: self.state.observation(),
            observation_caption: caption_observation(&self.state),
            transition_caption: EMPTY_TRANSITION.to_string(),
        }
    }

    fn unlock(&mut self, a: Achievement) -> f64 {
        if self.state.achievements.insert(a) {
            1.0
        } else {
            0.0
        }
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutput> {
        if self.state.terminated {
            return Err(Error::StepAfterTermination);
        }
        let mut reward = 0.0;
        let s = &mut self.state;
        let event = match action {
            Action::Up | Action::Down | Action::Left | Action::Right => {
                s.facing = match action {
                    Action::Up => Facing::Up,
                    Action::Down => Facing::Down,
                    Action::Left => Facing::Left,
                    _ => Facing::Right,
                };
                match s.facing_cell() {
                    Some(pos) if s.cell(pos.0, pos.1) == Cell::Empty => {
                        s.player = pos;
                        EnvEvent::new(EventKind::Moved, "player")
                    }
                    _ => EnvEvent::noop(),
                }
            }
            Action::Interact => match s.facing_cell().map(|p| (p, s.cell(p.0, p.1))) {
                Some((_, Cell::Tree)) => {
                    s.inventory.wood = (s.inventory.wood + 1).min(INVENTORY_CAP);
                    reward += self.unlock(Achievement::CollectWood);
                    EnvEvent::new(EventKind::Collected, "wood")
                }
                Some((pos, Cell::Stone)) if s.inventory.wood_pickaxe >= 1 => {
                    s.inventory.stone = (s.inventory.stone + 1).min(INVENTORY_CAP);
                    s.set(pos, Cell::Empty);
                    reward += self.unlock(Achievement::CollectStone);
                    EnvEvent::new(EventKind::Collected, "stone")
                }
                _ => EnvEvent::noop(),
            },
            Action::PlaceTable => match s.facing_cell() {
                Some(pos) if s.inventory.wood >= 1 && s.cell(pos.0, pos.1) == Cell::Empty => {
                    s.inventory.wood -= 1;
                    s.set(pos, Cell::Table);
                    reward += self.unlock(Achievement::PlaceTable);
                    EnvEvent::new(EventKind::Placed, "table")
                }
                _ => EnvEvent::noop(),
            },
            Action::CraftWoodPickaxe => {
                if s.inventory.wood >= 1 && s.table_nearby() {
                    s.inventory.wood -= 1;
                    s.inventory.wood_pickaxe = (s.inventory.wood_pickaxe + 1).min(INVENTORY_CAP);
                    reward += self.unlock(Achievement::MakeWoodPickaxe);
                    EnvEvent::new(EventKind::Crafted, "wood pickaxe")
                } else {
                    EnvEvent::noop()
                }
            }
            Action::CraftStonePickaxe => {
                if s.inventory.wood >= 1 && s.inventory.stone >= 1 && s.table_nearby() {
                    s.inventory.wood -= 1;
                    s.inventory.stone -= 1;
                    s.inventory.stone_pickaxe = (s.inventory.stone_pickaxe + 1).min(INVENTORY_CAP);
                    reward += self.unlock(Achievement::MakeStonePickaxe);
                    EnvEvent::new(EventKind::Crafted, "stone pickaxe")
                } else {
                    EnvEvent::noop()
                }
            }
        };
        let s = &mut self.state;
        s.step_count += 1;
        if s.step_count >= s.episode_limit || s.achievements.all() {
            s.terminated = true;
        }
        Ok(StepOutput {
            observation: s.observation(),
            reward,
            cont: !s.terminated,
            event,
        })
    }
}

/// One line of an episode trace dump.
#[derive(Serialize)]
pub struct TraceLine<'a> {
    pub step: u32,
    pub action: Action,
    pub event: &'a EnvEvent,
    pub r: f64,
    pub c: bool,
}

/// Appends `line` as JSON to `w`, newline-terminated.
pub fn write_trace_line<W: Write>(w: &mut W, line: &TraceLine<'_>) -> Result<()> {
    let s = serde_json::to_string(line).map_err(|e| Error::Io(e.into()))?;
    writeln!(w, "{s}")?;
    Ok(())
}

#[cfg(test)]
mod tests;
