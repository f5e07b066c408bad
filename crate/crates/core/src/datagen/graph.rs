use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{Category, Slot};
use crate::error::{Error, Result};

/// One text row of a screen, drawn on a filled box.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub text: String,
    pub fill: [f32; 3],
}

/// What a screen shows. Text may contain `{slot}` placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenSpec {
    pub name: String,
    pub header: String,
    pub header_fill: [f32; 3],
    pub rows: Vec<Row>,
    /// Launcher icons drawn as a grid of coloured squares.
    pub icons: Vec<[f32; 3]>,
    pub keyboard: bool,
}

/// Where the user touches to trigger a macro.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tap {
    Header,
    Row(usize),
    Icon(usize),
    Keyboard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: String,
    pub tap: Tap,
    pub slots: Vec<Slot>,
    /// Detour edges leading to or from a distractor screen.
    pub detour: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UiGraph {
    pub category: Category,
    pub vertices: Vec<ScreenSpec>,
    pub edges: Vec<Edge>,
    pub start: usize,
    pub goal: usize,
    pub intent_template: String,
    pub slots: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub params: BTreeMap<Slot, String>,
    /// Positions in `edges` that belong to injected detours.
    pub noise: Vec<usize>,
}

impl UiGraph {
    pub fn outgoing(&self, v: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.from == v)
    }

    fn core_successors(&self, v: usize) -> Vec<usize> {
        self.outgoing(v).filter(|(_, e)| !e.detour).map(|(i, _)| i).collect()
    }

    /// Number of distinct start-to-goal paths over non-detour edges.
    pub fn count_paths(&self) -> usize {
        fn go(g: &UiGraph, v: usize, depth: usize) -> usize {
            if v == g.goal {
                return 1;
            }
            if depth > g.vertices.len() {
                return 0;
            }
            g.core_successors(v).into_iter().map(|e| go(g, g.edges[e].to, depth + 1)).sum()
        }
        go(self, self.start, 0)
    }

    fn reaches_goal(&self, from: usize, detours: bool) -> bool {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == self.goal {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend(self.outgoing(v).filter(|(_, e)| detours || !e.detour).map(|(_, e)| e.to));
        }
        false
    }

    /// Structural checks: edges in range, goal reachable from every vertex,
    /// core edges acyclic and each on some start-to-goal path, at least two
    /// such paths.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.start >= n || self.goal >= n {
            return Err(Error::contract("start or goal out of range"));
        }
        if let Some(e) = self.edges.iter().find(|e| e.from >= n || e.to >= n) {
            return Err(Error::contract(format!("edge {} -> {} out of range", e.from, e.to)));
        }
        for v in 0..n {
            if !self.reaches_goal(v, true) {
                return Err(Error::contract(format!("goal unreachable from {}", self.vertices[v].name)));
            }
        }
        // core edges: acyclic via Kahn, every core edge on a start->goal path
        let mut indeg = vec![0usize; n];
        for e in self.edges.iter().filter(|e| !e.detour) {
            indeg[e.to] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut visited = 0;
        while let Some(v) = queue.pop() {
            visited += 1;
            for e in self.core_successors(v) {
                let t = self.edges[e].to;
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    queue.push(t);
                }
            }
        }
        if visited != n {
            return Err(Error::contract(format!("{}: core edges contain a cycle", self.category.name())));
        }
        let mut from_start = vec![false; n];
        let mut stack = vec![self.start];
        while let Some(v) = stack.pop() {
            if !std::mem::replace(&mut from_start[v], true) {
                stack.extend(self.core_successors(v).into_iter().map(|e| self.edges[e].to));
            }
        }
        for e in self.edges.iter().filter(|e| !e.detour) {
            if !from_start[e.from] || !self.reaches_goal(e.to, false) {
                return Err(Error::contract(format!(
                    "{}: edge {} is on no start-goal path",
                    self.category.name(),
                    e.label
                )));
            }
        }
        if self.outgoing(self.goal).any(|(_, e)| !e.detour) {
            return Err(Error::contract("goal has outgoing core edges"));
        }
        let declared: Vec<String> = self.slots.iter().map(|s| format!("{{{}}}", s.key())).collect();
        for screen in &self.vertices {
            for text in std::iter::once(&screen.header).chain(screen.rows.iter().map(|r| &r.text)) {
                let mut rest = text.as_str();
                while let Some(open) = rest.find('{') {
                    let close = rest[open..].find('}').map_or(rest.len(), |c| open + c + 1);
                    if !declared.iter().any(|d| d == &rest[open..close]) {
                        return Err(Error::contract(format!("screen {} uses undeclared slot {}", screen.name, &rest[open..close])));
                    }
                    rest = &rest[close..];
                }
            }
        }
        if self.count_paths() < 2 {
            return Err(Error::contract(format!("{}: fewer than two paths", self.category.name())));
        }
        Ok(())
    }

    /// Goal-guided walk: from the start, repeatedly take a uniformly chosen
    /// core edge (all of which lie on start-to-goal paths) until the goal.
    /// Then `noise_steps` detours (out to a distractor screen and straight
    /// back) are spliced in at uniformly chosen non-goal vertices.
    pub fn traverse(&self, params: BTreeMap<Slot, String>, rng: &mut impl Rng, noise_steps: usize) -> Result<Trace> {
        let mut vertices = vec![self.start];
        let mut edges = Vec::new();
        let mut v = self.start;
        while v != self.goal {
            let options = self.core_successors(v);
            let &e = options
                .choose(rng)
                .ok_or_else(|| Error::contract(format!("dead end at {}", self.vertices[v].name)))?;
            edges.push(e);
            v = self.edges[e].to;
            vertices.push(v);
        }
        let mut noise = Vec::new();
        for _ in 0..noise_steps {
            // vertex positions before the final (goal) vertex
            let pos = rng.gen_range(0..vertices.len() - 1);
            let at = vertices[pos];
            let outs: Vec<usize> = self.outgoing(at).filter(|(_, e)| e.detour).map(|(i, _)| i).collect();
            let Some(&out) = outs.choose(rng) else { continue };
            let d = self.edges[out].to;
            let back = self
                .outgoing(d)
                .find(|(_, e)| e.to == at)
                .map(|(i, _)| i)
                .ok_or_else(|| Error::contract("distractor without a way back"))?;
            edges.splice(pos..pos, [out, back]);
            vertices.splice(pos + 1..pos + 1, [d, at]);
            for n in noise.iter_mut().filter(|n| **n >= pos) {
                *n += 2;
            }
            noise.extend([pos, pos + 1]);
        }
        noise.sort_unstable();
        Ok(Trace { vertices, edges, params, noise })
    }
}

impl Trace {
    /// Path edges agree with the graph and the walk ends at the goal.
    pub fn is_consistent(&self, g: &UiGraph) -> bool {
        self.vertices.len() == self.edges.len() + 1
            && self.vertices[0] == g.start
            && *self.vertices.last().unwrap() == g.goal
            && self.edges.iter().enumerate().all(|(i, &e)| {
                g.edges.get(e).is_some_and(|e| e.from == self.vertices[i] && e.to == self.vertices[i + 1])
            })
    }
}
