//! Static unit-disk topologies.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ATTEMPT_BUDGET: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    positions: Vec<Position>,
    range: f64,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds the unit-disk graph over `positions`: nodes `i != j` are
    /// adjacent iff their distance is at most `range`.
    pub fn from_positions(positions: Vec<Position>, range: f64) -> Result<Self> {
        if !(range > 0.0) {
            return Err(Error::invalid(format!(
                "range must be positive, got {range}"
            )));
        }
        let n = positions.len();
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if positions[i].distance(&positions[j]) <= range {
                    neighbors[i].push(j);
                    neighbors[j].push(i);
                }
            }
        }
        Ok(Topology {
            positions,
            range,
            neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].contains(&b)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// Reads "id x y" lines (meters). Blank lines and `#` comments are
    /// skipped; ids must be 0..N-1 in any order. The result must be
    /// connected.
    pub fn from_position_file(path: &Path, range: f64) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, msg: &str| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {line}: {msg}"),
        };
        let mut entries: Vec<(usize, Position)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(i + 1, "expected 'id x y'"));
            }
            let id = fields[0]
                .parse()
                .map_err(|_| parse_err(i + 1, "bad node id"))?;
            let x = fields[1]
                .parse()
                .map_err(|_| parse_err(i + 1, "bad x coordinate"))?;
            let y = fields[2]
                .parse()
                .map_err(|_| parse_err(i + 1, "bad y coordinate"))?;
            entries.push((id, Position { x, y }));
        }
        entries.sort_by_key(|(id, _)| *id);
        if entries.iter().enumerate().any(|(i, (id, _))| *id != i) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: "node ids must be exactly 0..N-1".into(),
            });
        }
        let topo = Topology::from_positions(entries.into_iter().map(|(_, p)| p).collect(), range)?;
        if !topo.is_connected() {
            return Err(Error::invalid(format!(
                "imported topology {} is not connected",
                path.display()
            )));
        }
        Ok(topo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub nodes: usize,
    pub width: f64,
    pub height: f64,
    pub range: f64,
    pub attempts: u32,
}

impl TopologyParams {
    pub fn new(nodes: usize, width: f64, height: f64, range: f64) -> Self {
        TopologyParams {
            nodes,
            width,
            height,
            range,
            attempts: DEFAULT_ATTEMPT_BUDGET,
        }
    }
}

/// Places nodes uniformly over the area, redrawing every position until the
/// unit-disk graph is connected.
pub fn generate_topology<R: Rng + ?Sized>(
    params: &TopologyParams,
    rng: &mut R,
) -> Result<Topology> {
    let TopologyParams {
        nodes,
        width,
        height,
        range,
        attempts,
    } = *params;
    if nodes == 0 {
        return Err(Error::invalid("node count must be at least 1"));
    }
    if !(width >= 0.0 && height >= 0.0) || !(range > 0.0) {
        return Err(Error::invalid(format!(
            "bad geometry: area {width}x{height}, range {range}"
        )));
    }
    for _ in 0..attempts.max(1) {
        let positions = (0..nodes)
            .map(|_| Position {
                x: rng.random::<f64>() * width,
                y: rng.random::<f64>() * height,
            })
            .collect();
        let topo = Topology::from_positions(positions, range)?;
        if topo.is_connected() {
            return Ok(topo);
        }
    }
    Err(Error::TopologyInfeasible {
        attempts,
        nodes,
        width,
        height,
        range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use rand::SeedableRng;
    use std::io::Write;

    fn p(x: f64, y: f64) -> Position {
        Position { x, y }
    }

    #[test]
    fn single_node_is_trivially_connected() {
        let mut rng = SimRng::seed_from_u64(1);
        let t =
            generate_topology(&TopologyParams::new(1, 1000.0, 1000.0, 100.0), &mut rng).unwrap();
        assert!(t.is_connected());
        assert!(t.neighbors(0).is_empty());
    }

    #[test]
    fn unit_disk_boundary() {
        let near = Topology::from_positions(vec![p(0.0, 0.0), p(99.0, 0.0)], 100.0).unwrap();
        assert!(near.adjacent(0, 1) && near.is_connected());
        let exact = Topology::from_positions(vec![p(0.0, 0.0), p(0.0, 100.0)], 100.0).unwrap();
        assert!(exact.adjacent(0, 1));
        let far = Topology::from_positions(vec![p(0.0, 0.0), p(101.0, 0.0)], 100.0).unwrap();
        assert!(!far.adjacent(0, 1) && !far.is_connected());
    }

    // independent connectivity check by repeated relaxation
    fn connected_by_closure(t: &Topology) -> bool {
        let n = t.node_count();
        let mut reach = vec![false; n];
        reach[0] = true;
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if reach[i]
                        && !reach[j]
                        && i != j
                        && t.positions()[i].distance(&t.positions()[j]) <= t.range()
                    {
                        reach[j] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        reach.iter().all(|&r| r)
    }

    #[test]
    fn generated_topologies_are_connected() {
        for seed in 0..100 {
            let mut rng = SimRng::seed_from_u64(seed);
            let t =
                generate_topology(&TopologyParams::new(20, 300.0, 300.0, 100.0), &mut rng).unwrap();
            assert_eq!(t.node_count(), 20);
            assert!(connected_by_closure(&t), "seed {seed}");
            assert!((0..20).all(|i| !t.neighbors(i).is_empty()));
            assert!(t
                .positions()
                .iter()
                .all(|q| (0.0..=300.0).contains(&q.x) && (0.0..=300.0).contains(&q.y)));
        }
    }

    #[test]
    fn default_area_three_nodes_feasible() {
        let mut rng = SimRng::seed_from_u64(4);
        let t =
            generate_topology(&TopologyParams::new(3, 1000.0, 1000.0, 100.0), &mut rng).unwrap();
        assert!(connected_by_closure(&t));
    }

    #[test]
    fn infeasible_scenario_reported() {
        let mut rng = SimRng::seed_from_u64(4);
        let mut params = TopologyParams::new(20, 1000.0, 1000.0, 100.0);
        params.attempts = 50;
        match generate_topology(&params, &mut rng) {
            Err(Error::TopologyInfeasible {
                attempts, nodes, ..
            }) => {
                assert_eq!((attempts, nodes), (50, 20));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let params = TopologyParams::new(5, 200.0, 200.0, 100.0);
        let a = generate_topology(&params, &mut SimRng::seed_from_u64(8)).unwrap();
        let b = generate_topology(&params, &mut SimRng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn position_file_import() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# id x y\n1 50 0\n0 0 0\n2 100 0").unwrap();
        let t = Topology::from_position_file(f.path(), 60.0).unwrap();
        assert_eq!(t.positions()[1], p(50.0, 0.0));
        assert!(t.adjacent(0, 1) && !t.adjacent(0, 2));

        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "0 0 0\n1 500 0").unwrap();
        assert!(Topology::from_position_file(g.path(), 60.0).is_err());

        let mut h = tempfile::NamedTempFile::new().unwrap();
        writeln!(h, "0 0\n").unwrap();
        assert!(matches!(
            Topology::from_position_file(h.path(), 60.0),
            Err(Error::Parse { .. })
        ));
    }
}
