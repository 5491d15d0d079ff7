//! Node deployment, domain partitioning and hello-message adjacency.
//!
//! The deployment area is split into an equal-size rectangular grid of
//! domain cells. Cells are half-open (`[x0, x1) x [y0, y1)`) with the
//! final row and column closed, so every position maps to exactly one
//! domain. Two nodes are neighbors iff their Euclidean distance is at
//! most the transmission range (inclusive boundary), which keeps the
//! adjacency symmetric and deterministic.

use std::fmt;
use std::path::Path;

use rand::Rng;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Dense 0-based node index, stable for the lifetime of one deployment.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Domain index in `[0, D)`, row-major over the grid cells.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DomainId(pub u32);

impl DomainId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct NodeState {
    pub id: NodeId,
    /// Position (x, y) in meters, inside the area bounds.
    pub position: (f64, f64),
    /// Abstract energy units; only relative order matters for election.
    pub battery: u32,
    pub domain: DomainId,
    pub compromised: bool,
    /// Neighbor ids sorted ascending; symmetric and irreflexive.
    pub neighbors: Vec<NodeId>,
}

#[derive(Clone, Debug)]
pub struct DomainState {
    pub id: DomainId,
    pub members: Vec<NodeId>,
}

#[derive(Clone, Debug)]
pub struct Topology {
    pub area: (f64, f64),
    pub range: f64,
    grid: (u32, u32),
    pub nodes: Vec<NodeState>,
    pub domains: Vec<DomainState>,
}

/// Grid dimensions (columns, rows) for a domain count. Counts must be 2
/// or a perfect square so the area tiles into equal rectangles.
pub fn grid_dims(num_domains: u32) -> Result<(u32, u32)> {
    if num_domains < 2 {
        return Err(Error::config(format!(
            "need at least 2 domains, got {num_domains}"
        )));
    }
    if num_domains == 2 {
        return Ok((2, 1));
    }
    let side = (num_domains as f64).sqrt().round() as u32;
    if side * side == num_domains {
        Ok((side, side))
    } else {
        Err(Error::config(format!(
            "domain count must be 2 or a perfect square, got {num_domains}"
        )))
    }
}

/// Deploys nodes uniformly at random over the area, assigns batteries,
/// partitions the area into domains and builds the neighbor tables.
pub fn deploy_nodes(config: &ScenarioConfig, rng: &mut SimRng) -> Result<Topology> {
    config.validate()?;
    let (w, h) = config.area;
    let mut nodes = Vec::with_capacity(config.num_nodes as usize);
    for id in 0..config.num_nodes {
        let x = rng.random::<f64>() * w;
        let y = rng.random::<f64>() * h;
        let battery = rng.random_range(100..=1000);
        nodes.push(NodeState {
            id: NodeId(id),
            position: (x, y),
            battery,
            domain: DomainId(0),
            compromised: false,
            neighbors: Vec::new(),
        });
    }
    let mut topology = Topology {
        area: config.area,
        range: config.range,
        grid: (1, 1),
        nodes,
        domains: Vec::new(),
    };
    topology.partition_domains(config.num_domains)?;
    topology.build_neighbor_tables();
    Ok(topology)
}

impl Topology {
    /// Builds a topology from explicit positions (fixtures and tests).
    /// Batteries default to 100; adjust via `nodes` afterwards.
    pub fn from_positions(
        area: (f64, f64),
        range: f64,
        num_domains: u32,
        positions: &[(f64, f64)],
    ) -> Result<Topology> {
        if positions.len() < 2 {
            return Err(Error::config("need at least 2 nodes"));
        }
        let nodes = positions
            .iter()
            .enumerate()
            .map(|(i, &position)| NodeState {
                id: NodeId(i as u32),
                position,
                battery: 100,
                domain: DomainId(0),
                compromised: false,
                neighbors: Vec::new(),
            })
            .collect();
        let mut topology = Topology {
            area,
            range,
            grid: (1, 1),
            nodes,
            domains: Vec::new(),
        };
        topology.partition_domains(num_domains)?;
        topology.build_neighbor_tables();
        Ok(topology)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn grid(&self) -> (u32, u32) {
        self.grid
    }

    pub fn node(&self, v: NodeId) -> &NodeState {
        &self.nodes[v.index()]
    }

    pub fn node_mut(&mut self, v: NodeId) -> &mut NodeState {
        &mut self.nodes[v.index()]
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v.index()].neighbors
    }

    pub fn are_neighbors(&self, a: NodeId, b: NodeId) -> bool {
        self.nodes[a.index()].neighbors.binary_search(&b).is_ok()
    }

    pub fn domain_of(&self, v: NodeId) -> DomainId {
        self.nodes[v.index()].domain
    }

    pub fn position_of(&self, v: NodeId) -> (f64, f64) {
        self.nodes[v.index()].position
    }

    /// Grid cell (column, row) of a domain.
    pub fn domain_cell(&self, d: DomainId) -> (u32, u32) {
        (d.0 % self.grid.0, d.0 / self.grid.0)
    }

    pub fn domain_at_cell(&self, cx: u32, cy: u32) -> DomainId {
        DomainId(cy * self.grid.0 + cx)
    }

    /// Cell bounds of a domain: `((x0, y0), (x1, y1))`.
    pub fn cell_bounds(&self, d: DomainId) -> ((f64, f64), (f64, f64)) {
        let (gx, gy) = self.grid;
        let (cx, cy) = self.domain_cell(d);
        let cw = self.area.0 / gx as f64;
        let ch = self.area.1 / gy as f64;
        (
            (cx as f64 * cw, cy as f64 * ch),
            ((cx + 1) as f64 * cw, (cy + 1) as f64 * ch),
        )
    }

    /// Domain containing a position under the half-open cell rule.
    pub fn domain_of_position(&self, position: (f64, f64)) -> DomainId {
        let (gx, gy) = self.grid;
        let cx = ((position.0 / (self.area.0 / gx as f64)) as u32).min(gx - 1);
        let cy = ((position.1 / (self.area.1 / gy as f64)) as u32).min(gy - 1);
        self.domain_at_cell(cx, cy)
    }

    /// Assigns every node to the grid cell containing its position and
    /// rebuilds the per-domain member lists.
    pub fn partition_domains(&mut self, num_domains: u32) -> Result<()> {
        self.grid = grid_dims(num_domains)?;
        self.domains = (0..num_domains)
            .map(|d| DomainState {
                id: DomainId(d),
                members: Vec::new(),
            })
            .collect();
        for i in 0..self.nodes.len() {
            let d = self.domain_of_position(self.nodes[i].position);
            self.nodes[i].domain = d;
            self.domains[d.index()].members.push(self.nodes[i].id);
        }
        Ok(())
    }

    /// Recomputes the hello-message neighbor tables from positions:
    /// `neighbors(v) = { u != v : dist(u, v) <= range }`.
    pub fn build_neighbor_tables(&mut self) {
        let n = self.nodes.len();
        let range_sq = self.range * self.range;
        let mut lists: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for i in 0..n {
            let (xi, yi) = self.nodes[i].position;
            for j in (i + 1)..n {
                let (xj, yj) = self.nodes[j].position;
                let (dx, dy) = (xi - xj, yi - yj);
                if dx * dx + dy * dy <= range_sq {
                    lists[i].push(NodeId(j as u32));
                    lists[j].push(NodeId(i as u32));
                }
            }
        }
        for (node, list) in self.nodes.iter_mut().zip(lists) {
            // built in ascending order by construction
            node.neighbors = list;
        }
    }

    /// Redraws every node's position uniformly within its own domain
    /// cell and rebuilds adjacency. Domain membership, batteries and
    /// compromised flags are unchanged.
    pub fn reshuffle_positions(&mut self, rng: &mut SimRng) {
        for i in 0..self.nodes.len() {
            let ((x0, y0), (x1, y1)) = self.cell_bounds(self.nodes[i].domain);
            let x = x0 + rng.random::<f64>() * (x1 - x0);
            let y = y0 + rng.random::<f64>() * (y1 - y0);
            self.nodes[i].position = (x, y);
        }
        self.build_neighbor_tables();
    }

    /// Canonical dump: one `id,x,y,battery,domain,compromised` record per
    /// node, coordinates with 6 decimals. Byte-stable for a given seed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,x,y,battery,domain,compromised\n");
        for node in &self.nodes {
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{},{}\n",
                node.id,
                node.position.0,
                node.position.1,
                node.battery,
                node.domain,
                u8::from(node.compromised),
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
