//! JSON game files.
//!
//! A file is an object with a `"kind"` field. The explicit kinds are
//! `finite`, `geometric` and `graph`:
//!
//! ```json
//! {"kind": "finite",
//!  "targets": [{"id": "y1", "mass": 0.3}, {"id": "y2", "mass": 0.7}],
//!  "positions": ["a", "b"],
//!  "distance": [[0, 1], [1, 0]],
//!  "tie_tolerance": 0}
//!
//! {"kind": "geometric", "metric": "euclidean", "lower": 0, "upper": 1, "grid": 101,
//!  "targets": [{"id": "y1", "mass": 0.5, "point": [0, 0]}, ...]}
//!
//! {"kind": "graph", "vertices": ["a", "b"],
//!  "edges": [{"from": "a", "to": "b", "weight": 1}],
//!  "targets": [{"id": "a", "mass": 1, "vertex": "a"}]}
//! ```
//!
//! In `distance`, `null` stands for an infinite proximity. Any other kind
//! names an [`InstanceSpec`] variant and carries its parameters.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::game::{Edge, GameDefinition, Metric, Space, Target};
use crate::instances::{build, default_grid, InstanceSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointTarget {
    pub id: String,
    pub mass: f64,
    pub point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexTarget {
    pub id: String,
    pub mass: f64,
    pub vertex: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameFile {
    Finite {
        targets: Vec<Target>,
        positions: Vec<String>,
        distance: Vec<Vec<Option<f64>>>,
        #[serde(default)]
        tie_tolerance: f64,
    },
    Geometric {
        targets: Vec<PointTarget>,
        #[serde(default)]
        metric: Metric,
        #[serde(default)]
        lower: Option<f64>,
        #[serde(default)]
        upper: Option<f64>,
        #[serde(default)]
        grid: Option<usize>,
    },
    Graph {
        targets: Vec<VertexTarget>,
        vertices: Vec<String>,
        edges: Vec<Edge>,
    },
}

impl GameFile {
    pub fn from_game(game: &GameDefinition) -> Self {
        let targets = game.targets();
        match game.space() {
            Space::Finite { labels, distance } => GameFile::Finite {
                targets: targets.to_vec(),
                positions: labels.clone(),
                distance: distance
                    .iter()
                    .map(|row| row.iter().map(|&d| if d.is_finite() { Some(d) } else { None }).collect())
                    .collect(),
                tie_tolerance: game.tie_tolerance(),
            },
            Space::Geometric { metric, lower, upper, points, grid, .. } => GameFile::Geometric {
                targets: targets
                    .iter()
                    .zip(points)
                    .map(|(t, p)| PointTarget { id: t.id.clone(), mass: t.mass, point: p.clone() })
                    .collect(),
                metric: *metric,
                lower: Some(*lower),
                upper: Some(*upper),
                grid: Some(*grid),
            },
            Space::Graph { labels, edges, target_vertex, .. } => GameFile::Graph {
                targets: targets
                    .iter()
                    .zip(target_vertex)
                    .map(|(t, &v)| VertexTarget { id: t.id.clone(), mass: t.mass, vertex: labels[v].clone() })
                    .collect(),
                vertices: labels.clone(),
                edges: edges.clone(),
            },
        }
    }

    pub fn into_game(self) -> Result<GameDefinition> {
        match self {
            GameFile::Finite { targets, positions, distance, tie_tolerance } => {
                let distance = distance
                    .into_iter()
                    .map(|row| row.into_iter().map(|d| d.unwrap_or(f64::INFINITY)).collect())
                    .collect();
                Ok(GameDefinition::finite(positions, targets, distance)?.with_tie_tolerance(tie_tolerance))
            }
            GameFile::Geometric { targets, metric, lower, upper, grid } => {
                let dim = targets.first().map_or(1, |t| t.point.len());
                let (ts, points) = targets.into_iter().map(|t| (Target::new(t.id, t.mass), t.point)).unzip();
                GameDefinition::geometric(
                    ts,
                    points,
                    metric,
                    lower.unwrap_or(0.0),
                    upper.unwrap_or(1.0),
                    grid.unwrap_or_else(|| default_grid(dim)),
                )
            }
            GameFile::Graph { targets, vertices, edges } => {
                let ts = targets.into_iter().map(|t| (Target::new(t.id, t.mass), t.vertex)).collect();
                GameDefinition::graph(vertices, edges, ts)
            }
        }
    }
}

const EXPLICIT: &[&str] = &["finite", "geometric", "graph"];

/// Parse a game file of any kind.
pub fn parse_game(text: &str) -> Result<GameDefinition> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::spec(format!("malformed JSON: {e}")))?;
    game_from_value(value)
}

pub fn game_from_value(value: Value) -> Result<GameDefinition> {
    let kind = value
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::spec("game file needs a string \"kind\" field"))?
        .to_owned();
    if EXPLICIT.contains(&kind.as_str()) {
        let file: GameFile = serde_json::from_value(value).map_err(|e| Error::spec(format!("{kind} game: {e}")))?;
        file.into_game()
    } else {
        let spec: InstanceSpec = serde_json::from_value(value).map_err(|e| Error::spec(format!("{kind}: {e}")))?;
        build(&spec)
    }
}

/// The explicit JSON form of a game.
pub fn game_to_json(game: &GameDefinition) -> Value {
    serde_json::to_value(GameFile::from_game(game)).expect("game files serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Position;

    #[test]
    fn explicit_round_trip() {
        let games = [
            GameDefinition::separated(&[0.3, 0.7]).unwrap(),
            build(&InstanceSpec::ThreeNode { epsilon: 0.5, n: 7 }).unwrap(),
            build(&InstanceSpec::ForecastingM2 { epsilon1: 0.9, epsilon2: 0.4, n: 8, grid: Some(5) }).unwrap(),
        ];
        for g in games {
            let text = serde_json::to_string(&game_to_json(&g)).unwrap();
            assert_eq!(parse_game(&text).unwrap(), g);
        }
    }

    #[test]
    fn infinite_distance_is_null() {
        let text = r#"{"kind":"finite","targets":[{"id":"y","mass":1}],"positions":["a","b"],"distance":[[0],[null]]}"#;
        let g = parse_game(text).unwrap();
        assert_eq!(g.proximity(&Position::Site(1), "y").unwrap(), f64::INFINITY);
        assert!(game_to_json(&g).to_string().contains("null"));
    }

    #[test]
    fn named_kind() {
        let g = parse_game(r#"{"kind":"three_node","epsilon":0.5,"n":7}"#).unwrap();
        assert_eq!(g.targets().len(), 3);
        assert!(matches!(parse_game(r#"{"kind":"nope"}"#), Err(Error::InvalidSpec(_))));
        assert!(matches!(parse_game("[1,2"), Err(Error::InvalidSpec(_))));
    }
}
