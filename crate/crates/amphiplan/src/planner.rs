//! Roadmap construction and incremental replanning over belief maps.
//!
//! A probabilistic roadmap is sampled over the voxels currently believed
//! traversable, with every node pair inside a connection radius joined by
//! a directed edge pair priced from the stop-stop energy tables. Edges
//! whose straight line touches an *assumed* obstacle are not discarded:
//! they carry a large-but-finite cost `C_large`, so the planner prefers
//! believed-free routes yet will still push through unconfirmed blockage
//! when nothing cheaper remains — the behavior that lets a vehicle escape
//! a map whose only believed-free corridor turns out to be walled off.
//! Confirmed obstacles price at infinity and are never crossed.
//!
//! Replanning is D*-Lite: goal-rooted `g`/`rhs` values under an
//! admissible energy heuristic, repaired incrementally as sensing
//! repriced edges and as new nodes are folded in mid-flight.

use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use crate::costtable::{transition_cost, CostTable};
use crate::error::{Error, Result};
use crate::voxelworld::{classify_edge, line_voxels, EdgeClass, Medium, Voxel, WorldMap};

/// Which media the roadmap may place nodes in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PlannerMode {
    /// Nodes in both media, joined by vertical surface-crossing edges.
    Hybrid,
    AirOnly,
    WaterOnly,
}

impl PlannerMode {
    fn admits(&self, m: Medium) -> bool {
        match self {
            PlannerMode::Hybrid => true,
            PlannerMode::AirOnly => m == Medium::Air,
            PlannerMode::WaterOnly => m == Medium::Water,
        }
    }
}

/// What to do when the planner reports no path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EdgeCasePolicy {
    /// Declare the mission unsolved and fly home over believed-free edges.
    Practical,
    /// Exhaust every sensed free voxel as a node before giving up.
    Complete,
}

/// How edges through assumed (unconfirmed) obstacles are priced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PricingMode {
    /// Assumed blockage costs `C_large`: finite, so unexplored walls are
    /// still candidate routes of last resort.
    CostModified,
    /// Assumed blockage costs infinity, exactly like confirmed blockage.
    Standard,
}

/// Roadmap construction and replanning parameters.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    /// Number of sampled roadmap nodes (start and goal come extra).
    pub n_nodes: usize,
    /// Connection radius, m. At most the table range (8 lattice units).
    pub r_max_edge: f64,
    /// Nodes folded in from freshly sensed voxels per replanning cycle.
    pub k_new: usize,
    /// Price of an edge through assumed blockage, J.
    pub c_large: f64,
    pub mode: PlannerMode,
    pub edge_case: EdgeCasePolicy,
    pub pricing: PricingMode,
}

impl PlannerConfig {
    /// Defaults for a map: 0.5% of believed-free voxels as nodes, 5 m
    /// connection radius, 3 on-the-go samples, cost-modified pricing.
    /// `c_large` must still be set from the tables via [`compute_c_large`].
    pub fn for_map(map: &WorldMap, c_large: f64) -> Self {
        let free = map.non_obstacle_voxels().count();
        Self {
            n_nodes: (free / 200).max(1),
            r_max_edge: 5.0,
            k_new: 3,
            c_large,
            mode: PlannerMode::Hybrid,
            edge_case: EdgeCasePolicy::Practical,
            pricing: PricingMode::CostModified,
        }
    }

    pub fn validate(&self, resolution: f64) -> Result<()> {
        if !(self.r_max_edge > 0.0
            && self.r_max_edge <= crate::costtable::RANGE as f64 * resolution)
        {
            return Err(Error::InvalidParameter(format!(
                "connection radius {} m outside (0, {}]",
                self.r_max_edge,
                crate::costtable::RANGE as f64 * resolution
            )));
        }
        if !(self.c_large.is_finite() && self.c_large > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "C_large must be positive and finite, got {}",
                self.c_large
            )));
        }
        if self.n_nodes == 0 {
            return Err(Error::InvalidParameter(
                "node count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The two per-medium cost tables the planner prices edges from.
#[derive(Clone, Copy, Debug)]
pub struct CostModel<'a> {
    pub air: &'a CostTable,
    pub water: &'a CostTable,
}

impl<'a> CostModel<'a> {
    pub fn table(&self, m: Medium) -> &'a CostTable {
        match m {
            Medium::Air => self.air,
            Medium::Water => self.water,
        }
    }

    /// Smallest energy per meter over every entry of both tables: the
    /// slope of the admissible straight-line heuristic. Every edge costs
    /// at least this rate times its length.
    pub fn min_energy_rate(&self) -> f64 {
        let mut rate = f64::INFINITY;
        for table in [self.air, self.water] {
            for dx in 0..=crate::costtable::RANGE {
                for dy in 0..=crate::costtable::RANGE {
                    for dh in -crate::costtable::RANGE..=crate::costtable::RANGE {
                        if dx == 0 && dy == 0 && dh == 0 {
                            continue;
                        }
                        let len = ((dx * dx + dy * dy + dh * dh) as f64).sqrt()
                            * table.resolution;
                        if let Ok(e) = table.lookup([dx, dy, dh]) {
                            rate = rate.min(e / len);
                        }
                    }
                }
            }
        }
        rate
    }
}

/// Price of an edge through assumed blockage: two and a half traversals
/// of the grid's largest dimension at the *worst* unit-displacement rate,
/// comfortably past the cost of crossing the environment twice, so the
/// planner abandons an assumed wall as soon as any believed-free route
/// exists, yet never prices it out of existence.
pub fn compute_c_large(map: &WorldMap, model: &CostModel) -> f64 {
    let extent = map.grid.extent();
    let l_max = extent.x.max(extent.y).max(extent.z);
    let mut unit = 0.0_f64;
    for table in [model.air, model.water] {
        for d in [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, -1]] {
            if let Ok(e) = table.lookup(d) {
                unit = unit.max(e);
            }
        }
    }
    2.5 * l_max * unit
}

/// One roadmap node: a believed-free voxel, its center, and its medium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub voxel: Voxel,
    /// Voxel center in world coordinates (x, y, h), m.
    pub position: Vector3<f64>,
    pub medium: Medium,
}

/// A directed, priced roadmap edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub to: usize,
    /// Energy price, J; `C_large` through assumed blockage, `+∞` through
    /// confirmed blockage.
    pub cost: f64,
    pub class: EdgeClass,
    /// Whether this edge crosses the water surface.
    pub transition: bool,
}

/// Probabilistic roadmap over a belief map with energy-priced edges.
#[derive(Clone, Debug)]
pub struct MotionGraph {
    nodes: Vec<Node>,
    adj: Vec<Vec<Edge>>,
    start: usize,
    goal: usize,
    resolution: f64,
    water_level: f64,
    by_voxel: HashMap<Voxel, usize>,
    /// Voxel → directed edges (node, adjacency slot) whose straight line
    /// touches it; the repricing index.
    touching: HashMap<Voxel, Vec<(usize, usize)>>,
}

impl MotionGraph {
    /// Empty graph; nodes and edges are added explicitly. Mostly useful
    /// for tests and tools — missions build graphs via [`sample_prm`].
    pub fn empty(resolution: f64, water_level: f64) -> Self {
        Self {
            nodes: Vec::new(),
            adj: Vec::new(),
            start: 0,
            goal: 0,
            resolution,
            water_level,
            by_voxel: HashMap::new(),
            touching: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> Result<&Node> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self, id: usize) -> &[Edge] {
        &self.adj[id]
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn set_endpoints(&mut self, start: usize, goal: usize) {
        self.start = start;
        self.goal = goal;
    }

    pub fn node_id(&self, v: &Voxel) -> Option<usize> {
        self.by_voxel.get(v).copied()
    }

    /// Add a node at a voxel center; an existing node at the same voxel
    /// is returned instead of duplicated.
    pub fn add_node(&mut self, voxel: Voxel, medium: Medium) -> usize {
        if let Some(&id) = self.by_voxel.get(&voxel) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            voxel,
            position: voxel.center(self.resolution),
            medium,
        });
        self.adj.push(Vec::new());
        self.by_voxel.insert(voxel, id);
        id
    }

    /// Add a directed edge pair with explicit costs (test/tool path; the
    /// sampling path prices edges itself).
    pub fn add_edge_pair(&mut self, a: usize, b: usize, cost_ab: f64, cost_ba: f64) {
        self.adj[a].push(Edge {
            to: b,
            cost: cost_ab,
            class: EdgeClass::Free,
            transition: false,
        });
        self.adj[b].push(Edge {
            to: a,
            cost: cost_ba,
            class: EdgeClass::Free,
            transition: false,
        });
    }

    /// Overwrite the cost of the directed edge `from → to`; returns the
    /// previous cost.
    pub fn set_edge_cost(&mut self, from: usize, to: usize, cost: f64) -> Result<f64> {
        for e in &mut self.adj[from] {
            if e.to == to {
                let old = e.cost;
                e.cost = cost;
                return Ok(old);
            }
        }
        Err(Error::UnknownNode(to))
    }

    fn price(&self, class: EdgeClass, a: usize, b: usize, cfg: &PlannerConfig, model: &CostModel) -> Result<f64> {
        match class {
            EdgeClass::ConfirmedBlocked => Ok(f64::INFINITY),
            EdgeClass::AssumedBlocked => Ok(match cfg.pricing {
                PricingMode::CostModified => cfg.c_large,
                PricingMode::Standard => f64::INFINITY,
            }),
            EdgeClass::Free => {
                let (na, nb) = (&self.nodes[a], &self.nodes[b]);
                if na.medium == nb.medium {
                    let (dx, dy, dh) = nb.voxel.delta(&na.voxel);
                    model.table(na.medium).lookup([dx, dy, dh])
                } else {
                    transition_cost(
                        model.air,
                        model.water,
                        &na.position,
                        &nb.position,
                        self.water_level,
                    )
                }
            }
        }
    }

    /// Classify, price, and insert the edge pair between two nodes.
    /// Cross-medium pairs that are not vertically aligned are skipped, as
    /// are pairs whose displacement the tables cannot price. Returns the
    /// directed edges added.
    fn connect(
        &mut self,
        a: usize,
        b: usize,
        map: &WorldMap,
        cfg: &PlannerConfig,
        model: &CostModel,
    ) -> Result<Vec<(usize, usize)>> {
        let (na, nb) = (self.nodes[a], self.nodes[b]);
        if na.medium != nb.medium {
            let (dx, dy, _) = nb.voxel.delta(&na.voxel);
            if dx != 0 || dy != 0 {
                return Ok(Vec::new());
            }
        }
        let class = classify_edge(map, &na.position, &nb.position)?;
        let cost_ab = match self.price(class, a, b, cfg, model) {
            Ok(c) => c,
            Err(Error::TableRange(..)) => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let cost_ba = match self.price(class, b, a, cfg, model) {
            Ok(c) => c,
            Err(Error::TableRange(..)) => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let transition = na.medium != nb.medium;
        let slot_a = self.adj[a].len();
        self.adj[a].push(Edge {
            to: b,
            cost: cost_ab,
            class,
            transition,
        });
        let slot_b = self.adj[b].len();
        self.adj[b].push(Edge {
            to: a,
            cost: cost_ba,
            class,
            transition,
        });
        for v in line_voxels(&map.grid, &na.position, &nb.position)? {
            let entry = self.touching.entry(v).or_default();
            entry.push((a, slot_a));
            entry.push((b, slot_b));
        }
        Ok(vec![(a, b), (b, a)])
    }

    /// Re-classify and re-price every edge whose line touches one of the
    /// `dirty` voxels (typically the set a sensor reading just changed).
    /// Returns the directed edges whose cost actually moved — the change
    /// set for [`DStarLite::update`].
    pub fn reprice(
        &mut self,
        map: &WorldMap,
        cfg: &PlannerConfig,
        model: &CostModel,
        dirty: &[Voxel],
    ) -> Result<Vec<(usize, usize)>> {
        let mut slots: BTreeSet<(usize, usize)> = BTreeSet::new();
        for v in dirty {
            if let Some(list) = self.touching.get(v) {
                slots.extend(list.iter().copied());
            }
        }
        let mut changed = Vec::new();
        for (node, slot) in slots {
            let to = self.adj[node][slot].to;
            let class = classify_edge(map, &self.nodes[node].position, &self.nodes[to].position)?;
            let cost = self.price(class, node, to, cfg, model)?;
            let e = &mut self.adj[node][slot];
            if e.cost != cost || e.class != class {
                e.cost = cost;
                e.class = class;
                changed.push((node, to));
            }
        }
        Ok(changed)
    }

    /// Write the graph as line-oriented text: one `node` line per node
    /// (id, voxel, medium, optional start/goal tag), one `edge` line per
    /// directed edge (from, to, cost, class, transition flag).
    pub fn export(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "# roadmap v1 nodes={} res={}", self.nodes.len(), self.resolution)?;
        for (id, n) in self.nodes.iter().enumerate() {
            let tag = if id == self.start {
                " start"
            } else if id == self.goal {
                " goal"
            } else {
                ""
            };
            writeln!(
                w,
                "node {id} {} {} {} {:?}{tag}",
                n.voxel.x, n.voxel.y, n.voxel.h, n.medium
            )?;
        }
        for (id, edges) in self.adj.iter().enumerate() {
            for e in edges {
                writeln!(
                    w,
                    "edge {id} {} {} {:?}{}",
                    e.to,
                    e.cost,
                    e.class,
                    if e.transition { " transition" } else { "" }
                )?;
            }
        }
        Ok(())
    }
}

/// Sample a roadmap over the believed-free voxels of a map.
///
/// `n_nodes` voxels are drawn uniformly without replacement from the
/// believed-traversable set (restricted to the mode's medium), the start
/// and goal voxels are inserted unconditionally, and every node pair
/// within the connection radius is joined — cross-medium pairs only when
/// vertically aligned. If the start or goal ends up with no edges at all,
/// one retry connects it with a radius relaxed 1.5× (capped at the table
/// range), so a thinly sampled region cannot strand the endpoints.
pub fn sample_prm(
    map: &WorldMap,
    start: Voxel,
    goal: Voxel,
    cfg: &PlannerConfig,
    model: &CostModel,
    seed: u64,
) -> Result<MotionGraph> {
    cfg.validate(map.grid.resolution())?;
    for (name, v) in [("start", start), ("goal", goal)] {
        if map.belief(v)?.is_obstacle() {
            return Err(Error::InvalidParameter(format!(
                "{name} voxel ({}, {}, {}) is believed occupied",
                v.x, v.y, v.h
            )));
        }
        if !cfg.mode.admits(map.medium_of(v)) {
            return Err(Error::InvalidParameter(format!(
                "{name} voxel ({}, {}, {}) lies in {:?}, outside the {:?} planning mode",
                v.x,
                v.y,
                v.h,
                map.medium_of(v),
                cfg.mode
            )));
        }
    }

    let mut graph = MotionGraph::empty(map.grid.resolution(), map.water.level);
    let s = graph.add_node(start, map.medium_of(start));
    let g = graph.add_node(goal, map.medium_of(goal));
    graph.set_endpoints(s, g);

    // Uniform sample without replacement, deterministic in the seed —
    // drawn per medium, each medium from its own stream, with the node
    // budget split in proportion to the media's free-voxel counts. The
    // air nodes of a hybrid roadmap are then the same nodes an air-only
    // roadmap over the same map and seed draws (likewise water), so a
    // hybrid graph contains each single-medium graph it is compared
    // against, up to budget rounding.
    let media: &[Medium] = match cfg.mode {
        PlannerMode::Hybrid => &[Medium::Air, Medium::Water],
        PlannerMode::AirOnly => &[Medium::Air],
        PlannerMode::WaterOnly => &[Medium::Water],
    };
    let mut pools: Vec<(Medium, Vec<Voxel>)> = media
        .iter()
        .map(|&m| {
            let pool: Vec<Voxel> = map
                .non_obstacle_voxels()
                .filter(|v| map.medium_of(*v) == m && *v != start && *v != goal)
                .collect();
            (m, pool)
        })
        .collect();
    let total: usize = pools.iter().map(|(_, p)| p.len()).sum();
    for (medium, pool) in &mut pools {
        if total == 0 {
            break;
        }
        let share = (cfg.n_nodes as f64 * pool.len() as f64 / total as f64).round() as usize;
        let take = share.min(pool.len());
        let salt: u64 = match medium {
            Medium::Air => 0x00a1,
            Medium::Water => 0x57a7,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
        for i in 0..take {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
            let v = pool[i];
            graph.add_node(v, map.medium_of(v));
        }
    }

    let n = graph.len();
    for a in 0..n {
        for b in (a + 1)..n {
            let d = (graph.nodes[a].position - graph.nodes[b].position).norm();
            if d <= cfg.r_max_edge {
                graph.connect(a, b, map, cfg, model)?;
            }
        }
    }

    // Endpoint rescue: a start or goal with no edges gets one relaxed
    // connection pass.
    let relaxed = (1.5 * cfg.r_max_edge)
        .min(crate::costtable::RANGE as f64 * map.grid.resolution());
    for id in [s, g] {
        if graph.adj[id].is_empty() {
            log::warn!(
                "roadmap endpoint {id} isolated at radius {}; retrying at {relaxed}",
                cfg.r_max_edge
            );
            for other in 0..n {
                if other == id {
                    continue;
                }
                let d = (graph.nodes[id].position - graph.nodes[other].position).norm();
                if d > cfg.r_max_edge && d <= relaxed {
                    graph.connect(id, other, map, cfg, model)?;
                }
            }
        }
    }
    Ok(graph)
}

/// Grow the roadmap with up to `k_new` nodes drawn from freshly sensed
/// voxels (believed traversable, medium-compatible, not yet nodes) and
/// connect them under the usual rules. Returns the new directed edges —
/// the change set for [`DStarLite::update`] after a
/// [`DStarLite::extend`].
pub fn prm_on_the_go(
    graph: &mut MotionGraph,
    map: &WorldMap,
    sensed: &[Voxel],
    cfg: &PlannerConfig,
    model: &CostModel,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    let mut candidates: Vec<Voxel> = sensed
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|v| {
            map.belief(*v).map(|b| !b.is_obstacle()).unwrap_or(false)
                && cfg.mode.admits(map.medium_of(*v))
                && graph.node_id(v).is_none()
        })
        .collect();
    let take = cfg.k_new.min(candidates.len());
    let mut changed = Vec::new();
    for i in 0..take {
        let j = rng.random_range(i..candidates.len());
        candidates.swap(i, j);
        let v = candidates[i];
        let id = graph.add_node(v, map.medium_of(v));
        for other in 0..id {
            let d = (graph.nodes[id].position - graph.nodes[other].position).norm();
            if d <= cfg.r_max_edge {
                changed.extend(graph.connect(id, other, map, cfg, model)?);
            }
        }
    }
    Ok(changed)
}

/// Result of a (re)planning query.
#[derive(Clone, Debug, PartialEq)]
pub enum PlanOutcome {
    /// Node ids from the current node to the goal, inclusive.
    Path(Vec<usize>),
    /// The goal is unreachable through finite-cost edges.
    NoPath,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapEntry {
    k1: f64,
    k2: f64,
    node: usize,
    stamp: u64,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for min-first, break key ties
        // by node id for determinism.
        other
            .k1
            .total_cmp(&self.k1)
            .then_with(|| other.k2.total_cmp(&self.k2))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Incremental D*-Lite planner state rooted at a fixed goal.
///
/// `g` and `rhs` estimate cost-to-goal; the queue holds locally
/// inconsistent nodes keyed by heuristic-inflated cost, with the `km`
/// accumulator compensating for start motion so keys never need global
/// rebuilds. Stale queue entries are skipped lazily via per-node stamps.
#[derive(Clone, Debug)]
pub struct DStarLite {
    g: Vec<f64>,
    rhs: Vec<f64>,
    stamp: Vec<u64>,
    queue: BinaryHeap<HeapEntry>,
    km: f64,
    start: usize,
    rate: f64,
}

impl DStarLite {
    /// Initialize for a graph and a starting node; heuristic slope from
    /// [`CostModel::min_energy_rate`] (pass 0.0 to disable the heuristic —
    /// the algorithm degrades to incremental Dijkstra).
    pub fn new(graph: &MotionGraph, start: usize, rate: f64) -> Self {
        let n = graph.len();
        let mut s = Self {
            g: vec![f64::INFINITY; n],
            rhs: vec![f64::INFINITY; n],
            stamp: vec![0; n],
            queue: BinaryHeap::new(),
            km: 0.0,
            start,
            rate,
        };
        s.rhs[graph.goal()] = 0.0;
        let key = s.key(graph, graph.goal());
        s.push(graph.goal(), key);
        s
    }

    fn h(&self, graph: &MotionGraph, a: usize, b: usize) -> f64 {
        self.rate * (graph.nodes[a].position - graph.nodes[b].position).norm()
    }

    fn key(&self, graph: &MotionGraph, u: usize) -> (f64, f64) {
        let m = self.g[u].min(self.rhs[u]);
        (m + self.h(graph, self.start, u) + self.km, m)
    }

    fn push(&mut self, u: usize, key: (f64, f64)) {
        self.stamp[u] += 1;
        self.queue.push(HeapEntry {
            k1: key.0,
            k2: key.1,
            node: u,
            stamp: self.stamp[u],
        });
    }

    /// Drop node `u`'s queue presence (lazily).
    fn unqueue(&mut self, u: usize) {
        self.stamp[u] += 1;
    }

    fn update_vertex(&mut self, graph: &MotionGraph, u: usize) {
        if u != graph.goal() {
            let mut best = f64::INFINITY;
            for e in graph.edges(u) {
                best = best.min(e.cost + self.g[e.to]);
            }
            self.rhs[u] = best;
        }
        self.unqueue(u);
        if self.g[u] != self.rhs[u] {
            let key = self.key(graph, u);
            self.push(u, key);
        }
    }

    fn compute_shortest_path(&mut self, graph: &MotionGraph) {
        loop {
            // Skim stale entries off the top.
            while let Some(top) = self.queue.peek() {
                if top.stamp != self.stamp[top.node] {
                    self.queue.pop();
                } else {
                    break;
                }
            }
            let top = match self.queue.peek() {
                Some(t) => *t,
                None => break,
            };
            let start_key = self.key(graph, self.start);
            let top_less = (top.k1, top.k2) < start_key;
            if !top_less && self.rhs[self.start] == self.g[self.start] {
                break;
            }
            self.queue.pop();
            let u = top.node;
            let k_now = self.key(graph, u);
            if (top.k1, top.k2) < k_now {
                self.push(u, k_now);
            } else if self.g[u] > self.rhs[u] {
                self.g[u] = self.rhs[u];
                self.unqueue(u);
                // Connectivity is symmetric by construction, so the
                // predecessors of `u` are exactly its out-neighbors.
                for i in 0..graph.edges(u).len() {
                    let p = graph.edges(u)[i].to;
                    self.update_vertex(graph, p);
                }
            } else {
                self.g[u] = f64::INFINITY;
                self.update_vertex(graph, u);
                for i in 0..graph.edges(u).len() {
                    let p = graph.edges(u)[i].to;
                    self.update_vertex(graph, p);
                }
            }
        }
    }

    /// Converged cost-to-goal from a node, as of the last (re)plan.
    pub fn cost_to_goal(&self, u: usize) -> f64 {
        self.g[u]
    }

    /// Initial plan from the configured start.
    pub fn plan(&mut self, graph: &MotionGraph) -> PlanOutcome {
        self.compute_shortest_path(graph);
        self.extract(graph)
    }

    /// Grow internal arrays after nodes were added to the graph.
    pub fn extend(&mut self, graph: &MotionGraph) {
        let n = graph.len();
        self.g.resize(n, f64::INFINITY);
        self.rhs.resize(n, f64::INFINITY);
        self.stamp.resize(n, 0);
    }

    /// Replan after motion and/or edge cost changes.
    ///
    /// `current` is the node the vehicle now occupies; `changed` lists
    /// directed edges whose cost in `graph` already holds the new value
    /// (from [`MotionGraph::reprice`] / [`prm_on_the_go`]).
    pub fn update(
        &mut self,
        graph: &MotionGraph,
        changed: &[(usize, usize)],
        current: usize,
    ) -> PlanOutcome {
        if current != self.start {
            self.km += self.h(graph, self.start, current);
            self.start = current;
        }
        let mut sources: BTreeSet<usize> = BTreeSet::new();
        for (u, _) in changed {
            sources.insert(*u);
        }
        for u in sources {
            self.update_vertex(graph, u);
        }
        self.compute_shortest_path(graph);
        self.extract(graph)
    }

    fn extract(&self, graph: &MotionGraph) -> PlanOutcome {
        if !self.g[self.start].is_finite() {
            return PlanOutcome::NoPath;
        }
        let mut path = vec![self.start];
        let mut u = self.start;
        while u != graph.goal() {
            let mut best: Option<(f64, usize)> = None;
            for e in graph.edges(u) {
                let c = e.cost + self.g[e.to];
                let better = match best {
                    None => c.is_finite(),
                    Some((bc, bn)) => c < bc || (c == bc && e.to < bn),
                };
                if better {
                    best = Some((c, e.to));
                }
            }
            match best {
                Some((_, next)) => {
                    u = next;
                    path.push(u);
                }
                None => return PlanOutcome::NoPath,
            }
            if path.len() > graph.len() + 1 {
                // A cycle would mean inconsistent g-values; treat as no
                // path rather than looping forever.
                return PlanOutcome::NoPath;
            }
        }
        PlanOutcome::Path(path)
    }
}

/// What the mission should do after a NoPath verdict.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeCaseOutcome {
    /// Practical policy: the mission is unsolved; fly home along the
    /// returned believed-free node chain if one exists.
    ReturnToStart(Option<Vec<usize>>),
    /// Complete policy: the roadmap was extended with every remaining
    /// sensed-free voxel; update the planner with these new edges and try
    /// again.
    Expanded(Vec<(usize, usize)>),
    /// Complete policy with nothing left to add: genuinely no path.
    Exhausted,
}

/// Resolve a NoPath verdict per the configured policy.
///
/// Practical: give up and compute a Dijkstra route from `current` back to
/// the start over free-classified edges only. Complete: promote every
/// not-yet-sampled believed-free voxel in the accumulated sensed set
/// `s_all` to a node so the verdict can be retried at full resolution.
pub fn edge_case(
    graph: &mut MotionGraph,
    map: &WorldMap,
    cfg: &PlannerConfig,
    model: &CostModel,
    s_all: &[Voxel],
    current: usize,
) -> Result<EdgeCaseOutcome> {
    match cfg.edge_case {
        EdgeCasePolicy::Practical => {
            Ok(EdgeCaseOutcome::ReturnToStart(free_route(
                graph,
                current,
                graph.start(),
            )))
        }
        EdgeCasePolicy::Complete => {
            let candidates: Vec<Voxel> = s_all
                .iter()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .filter(|v| {
                    map.belief(*v).map(|b| !b.is_obstacle()).unwrap_or(false)
                        && cfg.mode.admits(map.medium_of(*v))
                        && graph.node_id(v).is_none()
                })
                .collect();
            if candidates.is_empty() {
                return Ok(EdgeCaseOutcome::Exhausted);
            }
            let mut changed = Vec::new();
            for v in candidates {
                let id = graph.add_node(v, map.medium_of(v));
                for other in 0..id {
                    let d = (graph.nodes[id].position - graph.nodes[other].position).norm();
                    if d <= cfg.r_max_edge {
                        changed.extend(graph.connect(id, other, map, cfg, model)?);
                    }
                }
            }
            Ok(EdgeCaseOutcome::Expanded(changed))
        }
    }
}

/// Cheapest node chain from `from` to `to` using free-classified edges
/// only (uniform Dijkstra; costs as priced). `None` when unreachable.
fn free_route(graph: &MotionGraph, from: usize, to: usize) -> Option<Vec<usize>> {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(HeapEntry {
        k1: 0.0,
        k2: 0.0,
        node: from,
        stamp: 0,
    });
    while let Some(e) = heap.pop() {
        if e.k1 > dist[e.node] {
            continue;
        }
        if e.node == to {
            break;
        }
        for edge in graph.edges(e.node) {
            if edge.class != EdgeClass::Free || !edge.cost.is_finite() {
                continue;
            }
            let nd = dist[e.node] + edge.cost;
            if nd < dist[edge.to] {
                dist[edge.to] = nd;
                prev[edge.to] = e.node;
                heap.push(HeapEntry {
                    k1: nd,
                    k2: 0.0,
                    node: edge.to,
                    stamp: 0,
                });
            }
        }
    }
    if !dist[to].is_finite() {
        return None;
    }
    let mut path = vec![to];
    let mut u = to;
    while u != from {
        u = prev[u];
        path.push(u);
    }
    path.reverse();
    Some(path)
}


/// Configuration used with the two-corridor regression scenario: every
/// believed-free voxel becomes a node, so the outcome depends only on
/// pricing, never on sampling luck.
pub fn two_corridor_config(map: &WorldMap, model: &CostModel) -> PlannerConfig {
    PlannerConfig {
        n_nodes: map.non_obstacle_voxels().count(),
        r_max_edge: 5.0,
        k_new: 3,
        c_large: compute_c_large(map, model),
        mode: PlannerMode::Hybrid,
        edge_case: EdgeCasePolicy::Practical,
        pricing: PricingMode::CostModified,
    }
}

/// The two-corridor replanning scenario: a single flight layer with two
/// rooms joined by two corridors. Corridor A (y = 2) is believed free but
/// actually walled at (6, 2, 3); corridor B (y = 8) is actually open but
/// believed blocked. A planner that prices assumed blockage at infinity
/// is stuck the moment A's wall is confirmed; finite `C_large` pricing
/// routes through B and lets sensing clear it. Returns the ground-truth
/// environment, the initial belief map, and the start and goal voxels.
pub fn two_corridor_fixture() -> (
    crate::voxelworld::Environment,
    WorldMap,
    Voxel,
    Voxel,
) {
    use crate::voxelworld::{Belief, Environment, Grid3, WaterSurface};

    let dims = [13, 11, 6];
    let res = 1.0;
    let level = dims[2] as f64 * res / 2.0;
    let mut truth = Grid3::filled(dims, res, true).unwrap();
    let mut belief = Grid3::filled(dims, res, Belief::AssumedObstacle).unwrap();

    let open = |truth: &mut Grid3<bool>, belief: &mut Grid3<Belief>, v: Voxel| {
        truth.set(v, false).unwrap();
        belief.set(v, Belief::AssumedFree).unwrap();
    };

    // Rooms, flight layer h = 3.
    for y in 1..=9 {
        for x in 1..=3 {
            open(&mut truth, &mut belief, Voxel::new(x, y, 3));
        }
        for x in 8..=11 {
            open(&mut truth, &mut belief, Voxel::new(x, y, 3));
        }
    }
    // Corridor A at y = 2: open in belief along its whole run, but the
    // truth keeps a wall at x = 6.
    for x in 4..=7 {
        let v = Voxel::new(x, 2, 3);
        truth.set(v, x == 6).unwrap();
        belief.set(v, Belief::AssumedFree).unwrap();
    }
    // Corridor B at y = 8: open in truth, believed blocked.
    for x in 4..=7 {
        let v = Voxel::new(x, 8, 3);
        truth.set(v, false).unwrap();
        belief.set(v, Belief::AssumedObstacle).unwrap();
    }
    // Boundary shell is confirmed wall.
    let voxels: Vec<Voxel> = belief.voxels().collect();
    for v in voxels {
        if belief.is_boundary(v) {
            belief.set(v, Belief::ConfirmedObstacle).unwrap();
        }
    }

    let env = Environment {
        grid: truth,
        water: WaterSurface::new(level),
        seed: 0,
    };
    let map = WorldMap {
        grid: belief,
        water: WaterSurface::new(level),
        seed: 0,
        plane_yz: 1,
        plane_xy: 3,
    };
    (env, map, Voxel::new(2, 2, 3), Voxel::new(11, 2, 3))
}
