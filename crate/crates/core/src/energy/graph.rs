//! Mode parameters from a transition graph.
//!
//! Nodes carry steady power, edges carry the energy and time of a transition.
//! For a power-saving node `m` the switching time is the fastest round trip
//! `on → m → on`; among equally fast round trips the cheaper one wins.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{EnergyError, EnergyMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub label: String,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub energy: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionGraph {
    pub nodes: Vec<GraphNode>,
    #[serde(default)]
    pub edges: Vec<GraphEdge>,
}

/// Path length ordered by time first, then energy.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost {
    time: f64,
    energy: f64,
}

impl Cost {
    const ZERO: Cost = Cost {
        time: 0.0,
        energy: 0.0,
    };

    fn add(self, o: Cost) -> Cost {
        Cost {
            time: self.time + o.time,
            energy: self.energy + o.energy,
        }
    }

    fn cmp(&self, o: &Cost) -> Ordering {
        self.time
            .total_cmp(&o.time)
            .then(self.energy.total_cmp(&o.energy))
    }
}

/// Single-source lexicographic shortest paths (dense Dijkstra).
fn shortest_from(adj: &[Vec<Option<Cost>>], src: usize) -> Vec<Option<Cost>> {
    let n = adj.len();
    let mut dist: Vec<Option<Cost>> = vec![None; n];
    let mut done = vec![false; n];
    dist[src] = Some(Cost::ZERO);
    loop {
        let next = (0..n)
            .filter(|&v| !done[v])
            .filter_map(|v| dist[v].map(|d| (v, d)))
            .min_by(|a, b| a.1.cmp(&b.1));
        let Some((u, du)) = next else { break };
        done[u] = true;
        for v in 0..n {
            if let Some(w) = adj[u][v] {
                let cand = du.add(w);
                if dist[v].map_or(true, |d| cand.cmp(&d) == Ordering::Less) {
                    dist[v] = Some(cand);
                }
            }
        }
    }
    dist
}

/// Derives one [`EnergyMode`] per node. The node labelled `"on"` becomes
/// the processing mode.
pub fn from_transition_graph(graph: &TransitionGraph) -> Result<Vec<EnergyMode>, EnergyError> {
    let idx = |label: &str| graph.nodes.iter().position(|n| n.label == label);
    let on = idx("on").ok_or_else(|| EnergyError::Graph("graph has no 'on' node".into()))?;
    for (i, n) in graph.nodes.iter().enumerate() {
        if !n.power.is_finite() || n.power < 0.0 {
            return Err(EnergyError::Validation(format!(
                "node '{}' has invalid power {}",
                n.label, n.power
            )));
        }
        if graph.nodes[..i].iter().any(|m| m.label == n.label) {
            return Err(EnergyError::Graph(format!("duplicate node '{}'", n.label)));
        }
    }

    let n = graph.nodes.len();
    let mut adj: Vec<Vec<Option<Cost>>> = vec![vec![None; n]; n];
    for e in &graph.edges {
        if !(e.energy.is_finite() && e.time.is_finite()) || e.energy < 0.0 || e.time < 0.0 {
            return Err(EnergyError::Validation(format!(
                "edge {} -> {} has invalid label ({}, {})",
                e.from, e.to, e.energy, e.time
            )));
        }
        let (Some(u), Some(v)) = (idx(&e.from), idx(&e.to)) else {
            return Err(EnergyError::Graph(format!(
                "edge {} -> {} references an unknown node",
                e.from, e.to
            )));
        };
        let c = Cost {
            time: e.time,
            energy: e.energy,
        };
        if adj[u][v].map_or(true, |old| c.cmp(&old) == Ordering::Less) {
            adj[u][v] = Some(c);
        }
    }

    let out = shortest_from(&adj, on);
    let back: Vec<Option<Cost>> = (0..n).map(|v| shortest_from(&adj, v)[on]).collect();

    graph
        .nodes
        .iter()
        .enumerate()
        .map(|(v, node)| {
            if v == on {
                return Ok(EnergyMode::on(node.power));
            }
            match (out[v], back[v]) {
                (Some(a), Some(b)) => {
                    let rt = a.add(b);
                    Ok(EnergyMode::new(node.label.clone(), node.power, rt.time, rt.energy))
                }
                _ => Err(EnergyError::Graph(format!(
                    "node '{}' is not reachable from 'on' and back",
                    node.label
                ))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(label: &str, power: f64) -> GraphNode {
        GraphNode {
            label: label.into(),
            power,
        }
    }

    fn edge(from: &str, to: &str, energy: f64, time: f64) -> GraphEdge {
        GraphEdge {
            from: from.into(),
            to: to.into(),
            energy,
            time,
        }
    }

    #[test]
    fn on_off_graph() {
        let g = TransitionGraph {
            nodes: vec![node("on", 40.0), node("off", 0.0)],
            edges: vec![edge("on", "off", 0.0, 1.0), edge("off", "on", 11.0, 2.0)],
        };
        let modes = from_transition_graph(&g).unwrap();
        assert_eq!(modes[1], EnergyMode::new("off", 0.0, 3.0, 11.0));
        assert!(modes[0].is_processing());
    }

    #[test]
    fn single_node() {
        let g = TransitionGraph {
            nodes: vec![node("on", 40.0)],
            edges: vec![],
        };
        assert_eq!(from_transition_graph(&g).unwrap(), vec![EnergyMode::on(40.0)]);
    }

    #[test]
    fn fastest_round_trip_wins() {
        // direct on<->off: 3 h / 11; via idle both ways: 4 h / 9
        let g = TransitionGraph {
            nodes: vec![node("on", 40.0), node("idle", 20.0), node("off", 0.0)],
            edges: vec![
                edge("on", "off", 0.0, 1.0),
                edge("off", "on", 11.0, 2.0),
                edge("on", "idle", 1.0, 1.0),
                edge("idle", "off", 0.0, 0.5),
                edge("off", "idle", 6.0, 1.0),
                edge("idle", "on", 2.0, 1.5),
            ],
        };
        let modes = from_transition_graph(&g).unwrap();
        assert_eq!(modes[2], EnergyMode::new("off", 0.0, 3.0, 11.0));
        assert_eq!(modes[1], EnergyMode::new("idle", 20.0, 2.5, 3.0));
    }

    #[test]
    fn errors() {
        let missing_on = TransitionGraph {
            nodes: vec![node("off", 0.0)],
            edges: vec![],
        };
        assert!(matches!(from_transition_graph(&missing_on), Err(EnergyError::Graph(_))));

        let unreachable = TransitionGraph {
            nodes: vec![node("on", 40.0), node("off", 0.0)],
            edges: vec![edge("on", "off", 0.0, 1.0)],
        };
        assert!(matches!(from_transition_graph(&unreachable), Err(EnergyError::Graph(_))));

        let negative = TransitionGraph {
            nodes: vec![node("on", 40.0), node("off", 0.0)],
            edges: vec![edge("on", "off", -1.0, 1.0), edge("off", "on", 1.0, 1.0)],
        };
        assert!(matches!(from_transition_graph(&negative), Err(EnergyError::Validation(_))));
    }
}
