//! Agent communication graphs and their factorisation into subsystems.
//!
//! Agents are numbered from 1. A [`FactorialSubsystem`] lists its members in
//! ascending order; that order is the canonical layout of joint states,
//! joint controls and cache files everywhere else in the crate.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Undirected agent graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentGraph {
    n_agents: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl AgentGraph {
    /// Builds a graph on agents `1..=n_agents`. Edges are unordered; duplicates
    /// and reversed duplicates collapse.
    pub fn new(n_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::Graph("a graph needs at least one agent".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for v in [a, b] {
                if v == 0 || v > n_agents {
                    return Err(Error::Graph(format!(
                        "edge ({a}, {b}) references agent {v} outside 1..={n_agents}"
                    )));
                }
            }
            if a == b {
                return Err(Error::Graph(format!("self-loop on agent {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { n_agents, edges: set })
    }

    /// Path graph `1 - 2 - ... - n`.
    pub fn path(n_agents: usize) -> Result<Self> {
        Self::new(n_agents, (1..n_agents).map(|i| (i, i + 1)))
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, agent: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == agent {
                    Some(b)
                } else if b == agent {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_agents + 1];
        let mut queue = VecDeque::from([1usize]);
        seen[1] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n_agents
    }
}

/// A central agent together with its graph neighbours.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorialSubsystem {
    central: usize,
    neighbors: Vec<usize>,
    members: Vec<usize>,
}

impl FactorialSubsystem {
    /// Subsystem with an explicit member set. `neighbors` must not contain
    /// `central`; members become the sorted union.
    pub fn new(central: usize, neighbors: impl IntoIterator<Item = usize>) -> Result<Self> {
        let neighbors: BTreeSet<usize> = neighbors.into_iter().collect();
        if central == 0 || neighbors.contains(&0) {
            return Err(Error::Graph("agent indices start at 1".into()));
        }
        if neighbors.contains(&central) {
            return Err(Error::Graph(format!("agent {central} cannot neighbour itself")));
        }
        let mut members: Vec<usize> = neighbors.iter().copied().collect();
        members.push(central);
        members.sort_unstable();
        Ok(Self {
            central,
            neighbors: neighbors.into_iter().collect(),
            members,
        })
    }

    pub fn central(&self) -> usize {
        self.central
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    /// Members in canonical (ascending) order.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Position of `agent` in the canonical member order.
    pub fn position(&self, agent: usize) -> Result<usize> {
        self.members.binary_search(&agent).map_err(|_| Error::NotAMember {
            agent,
            members: self.members.clone(),
        })
    }

    pub fn central_position(&self) -> usize {
        self.position(self.central)
            .expect("central agent is always a member")
    }
}

/// One subsystem per agent; subsystem `i` (0-based in the returned vector)
/// is centred at agent `i + 1`.
pub fn factorize(graph: &AgentGraph) -> Result<Vec<FactorialSubsystem>> {
    if !graph.is_connected() {
        return Err(Error::Graph("the agent graph is not connected".into()));
    }
    (1..=graph.n_agents())
        .map(|j| FactorialSubsystem::new(j, graph.neighbors(j)))
        .collect()
}

/// Row-major product space over per-member local state spaces. The first
/// member is the most significant digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSpace {
    members: Vec<usize>,
    cards: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl JointSpace {
    /// `cards[k]` is the number of local states of `members[k]`.
    pub fn new(members: Vec<usize>, cards: Vec<usize>) -> Result<Self> {
        if members.len() != cards.len() {
            return Err(Error::DimensionMismatch {
                what: "local cardinalities",
                expected: members.len(),
                got: cards.len(),
            });
        }
        if members.is_empty() {
            return Err(Error::invalid("members", "joint space needs a member"));
        }
        let mut strides = vec![1usize; cards.len()];
        let mut len = 1usize;
        for k in (0..cards.len()).rev() {
            if cards[k] == 0 {
                return Err(Error::invalid("cards", "local state spaces must be nonempty"));
            }
            strides[k] = len;
            len = len
                .checked_mul(cards[k])
                .ok_or_else(|| Error::invalid("cards", "joint state count overflows"))?;
        }
        Ok(Self {
            members,
            cards,
            strides,
            len,
        })
    }

    /// Joint space of a subsystem; `card_of(agent)` gives each member's local
    /// cardinality.
    pub fn for_subsystem(subsystem: &FactorialSubsystem, card_of: impl Fn(usize) -> usize) -> Result<Self> {
        let cards = subsystem.members().iter().map(|&a| card_of(a)).collect();
        Self::new(subsystem.members().to_vec(), cards)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn arity(&self) -> usize {
        self.cards.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn position(&self, agent: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == agent)
    }

    pub fn flatten(&self, locals: &[usize]) -> Result<usize> {
        if locals.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                what: "local states",
                expected: self.arity(),
                got: locals.len(),
            });
        }
        let mut idx = 0;
        for ((&x, &card), &stride) in locals.iter().zip(&self.cards).zip(&self.strides) {
            if x >= card {
                return Err(Error::invalid(
                    "locals",
                    format!("local state {x} out of range 0..{card}"),
                ));
            }
            idx += x * stride;
        }
        Ok(idx)
    }

    pub fn unflatten(&self, index: usize) -> Result<Vec<usize>> {
        let mut out = vec![0; self.arity()];
        self.unflatten_into(index, &mut out)?;
        Ok(out)
    }

    pub fn unflatten_into(&self, index: usize, out: &mut [usize]) -> Result<()> {
        if index >= self.len {
            return Err(Error::invalid(
                "index",
                format!("joint index {index} out of range 0..{}", self.len),
            ));
        }
        if out.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                what: "local states",
                expected: self.arity(),
                got: out.len(),
            });
        }
        let mut rest = index;
        for (o, &stride) in out.iter_mut().zip(&self.strides) {
            *o = rest / stride;
            rest %= stride;
        }
        Ok(())
    }

    /// Local state of the member at `position` inside joint state `index`.
    pub fn component(&self, index: usize, position: usize) -> usize {
        (index / self.strides[position]) % self.cards[position]
    }
}

/// Flat joint index of `locals` (one per member, canonical order).
pub fn joint_index(subsystem: &FactorialSubsystem, locals: &[usize], cards: &[usize]) -> Result<usize> {
    JointSpace::new(subsystem.members().to_vec(), cards.to_vec())?.flatten(locals)
}
