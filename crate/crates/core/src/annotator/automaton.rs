//! Aho-Corasick automaton over token ids.
//!
//! The alphabet is the interned vocabulary of pattern tokens, so a document
//! token outside the vocabulary can never be part of a match and simply
//! resets the automaton to the root.

use std::collections::VecDeque;

const NONE: u32 = u32::MAX;
pub(crate) const ROOT: u32 = 0;

#[derive(Debug, Clone)]
struct Node {
    /// Sorted by token id.
    next: Vec<(u32, u32)>,
    fail: u32,
    /// Nearest node on the failure chain that has outputs.
    dict_link: u32,
    /// Patterns ending exactly here.
    outputs: Vec<u32>,
}

impl Node {
    fn new() -> Self {
        Node {
            next: Vec::new(),
            fail: ROOT,
            dict_link: NONE,
            outputs: Vec::new(),
        }
    }

    #[inline]
    fn goto(&self, token: u32) -> Option<u32> {
        self.next
            .binary_search_by_key(&token, |&(t, _)| t)
            .ok()
            .map(|i| self.next[i].1)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct TokenAutomaton {
    nodes: Vec<Node>,
    /// Dense root transition table indexed by token id.
    root_next: Vec<u32>,
    pattern_lens: Vec<u32>,
}

impl TokenAutomaton {
    /// `patterns[i]` is a non-empty sequence of ids below `vocab_size`.
    pub(crate) fn build(patterns: &[Vec<u32>], vocab_size: usize) -> Self {
        let mut nodes = vec![Node::new()];
        for (pid, pat) in patterns.iter().enumerate() {
            debug_assert!(!pat.is_empty());
            let mut cur = ROOT as usize;
            for &tok in pat {
                cur = match nodes[cur].goto(tok) {
                    Some(n) => n as usize,
                    None => {
                        let id = nodes.len() as u32;
                        nodes.push(Node::new());
                        let next = &mut nodes[cur].next;
                        let pos = next.partition_point(|&(t, _)| t < tok);
                        next.insert(pos, (tok, id));
                        id as usize
                    }
                };
            }
            nodes[cur].outputs.push(pid as u32);
        }

        let mut root_next = vec![NONE; vocab_size];
        for &(t, n) in &nodes[ROOT as usize].next {
            root_next[t as usize] = n;
        }

        // breadth-first failure links
        let mut queue: VecDeque<u32> = nodes[ROOT as usize].next.iter().map(|&(_, n)| n).collect();
        while let Some(u) = queue.pop_front() {
            let children = nodes[u as usize].next.clone();
            for (tok, v) in children {
                queue.push_back(v);
                let mut f = nodes[u as usize].fail;
                let target = loop {
                    if let Some(n) = nodes[f as usize].goto(tok) {
                        break n;
                    }
                    if f == ROOT {
                        break ROOT;
                    }
                    f = nodes[f as usize].fail;
                };
                let fail = if target == v { ROOT } else { target };
                nodes[v as usize].fail = fail;
                nodes[v as usize].dict_link = if !nodes[fail as usize].outputs.is_empty() {
                    fail
                } else {
                    nodes[fail as usize].dict_link
                };
            }
        }

        TokenAutomaton {
            nodes,
            root_next,
            pattern_lens: patterns.iter().map(|p| p.len() as u32).collect(),
        }
    }

    pub(crate) fn state_count(&self) -> usize {
        self.nodes.len()
    }

    /// Advances from `state` on `token` (`None` = out-of-vocabulary).
    #[inline]
    pub(crate) fn step(&self, mut state: u32, token: Option<u32>) -> u32 {
        let Some(tok) = token else { return ROOT };
        loop {
            if state == ROOT {
                let n = self.root_next[tok as usize];
                return if n == NONE { ROOT } else { n };
            }
            if let Some(n) = self.nodes[state as usize].goto(tok) {
                return n;
            }
            state = self.nodes[state as usize].fail;
        }
    }

    /// Calls `f(pattern_id, pattern_len)` for every pattern ending in `state`.
    #[inline]
    pub(crate) fn for_each_output<F: FnMut(u32, u32)>(&self, state: u32, mut f: F) {
        let mut s = state;
        if self.nodes[s as usize].outputs.is_empty() {
            s = self.nodes[s as usize].dict_link;
        }
        while s != NONE {
            for &p in &self.nodes[s as usize].outputs {
                f(p, self.pattern_lens[p as usize]);
            }
            s = self.nodes[s as usize].dict_link;
        }
    }
}
