//! Folded light-cone network of a one-point function and its dual-unitary
//! reduction.
//!
//! Local coordinates: the observable sits on site `x0 = t + 1` of a strip of
//! `2t + 4` sites; the top-row gate acts on `(x0, x0 + 1)`. The cut legs
//! `s_0, …, s_t` are the folded segments of the worldline of `x0`, `s_j` lying
//! just above row `j` (row 0 being the dimers). Nodes on gates/dimers with
//! `x + 1 ≤ x0` belong to the left influence matrix, the rest to the right one.

use std::collections::{BTreeMap, BTreeSet};

use crate::numkernel::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// Folded dimer; legs `(left, right)`.
    Dimer,
    /// Folded gate; legs `(out_left, out_right, in_left, in_right)`.
    Gate,
    /// Trace vector closing a worldline that leaves the light cone.
    Cap,
    /// Trace vector closing the observable's worldline at the top.
    TopCap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub legs: Vec<Label>,
    pub side: Side,
    pub row: usize,
    pub x: usize,
}

#[derive(Clone, Debug)]
pub struct ConeGeometry {
    pub t: usize,
    pub x0: usize,
    pub nodes: Vec<Node>,
    /// Cut legs bottom to top; `cut.len() == t + 1`.
    pub cut: Vec<Label>,
}

impl ConeGeometry {
    pub fn new(t: usize) -> Self {
        let x0 = t + 1;
        let n_sites = 2 * t + 4;
        let mut region: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); t + 1];
        region[t].insert(x0);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); t + 1];
        for r in (1..=t).rev() {
            let par = (x0 + t - r) % 2;
            let gs: Vec<usize> = (0..n_sites - 1)
                .filter(|&x| x % 2 == par && (region[r].contains(&x) || region[r].contains(&(x + 1))))
                .collect();
            region[r - 1] = gs.iter().flat_map(|&x| [x, x + 1]).collect();
            rows[r] = gs;
        }
        let par0 = (x0 + t) % 2;
        let dimers: Vec<usize> = (0..n_sites - 1)
            .filter(|&x| x % 2 == par0 && (region[0].contains(&x) || region[0].contains(&(x + 1))))
            .collect();

        let side_of_pair = |x: usize| if x < x0 { Side::Left } else { Side::Right };
        let side_of_site = |s: usize| if s < x0 { Side::Left } else { Side::Right };
        let mut nodes = Vec::new();
        let mut next: Label = 0;
        let mut fresh = || {
            next += 1;
            next - 1
        };
        let mut cur: BTreeMap<usize, Label> = BTreeMap::new();
        let mut cut = Vec::with_capacity(t + 1);
        for &x in &dimers {
            let (a, b) = (fresh(), fresh());
            nodes.push(Node { kind: NodeKind::Dimer, legs: vec![a, b], side: side_of_pair(x), row: 0, x });
            cur.insert(x, a);
            cur.insert(x + 1, b);
        }
        let close = |cur: &mut BTreeMap<usize, Label>, nodes: &mut Vec<Node>, keep: &BTreeSet<usize>, row: usize| {
            let gone: Vec<usize> = cur.keys().copied().filter(|s| !keep.contains(s)).collect();
            for s in gone {
                let l = cur.remove(&s).unwrap();
                nodes.push(Node { kind: NodeKind::Cap, legs: vec![l], side: side_of_site(s), row, x: s });
            }
        };
        close(&mut cur, &mut nodes, &region[0], 0);
        cut.push(cur[&x0]);
        for r in 1..=t {
            for &x in &rows[r] {
                let (a, b) = (fresh(), fresh());
                let legs = vec![a, b, cur[&x], cur[&(x + 1)]];
                nodes.push(Node { kind: NodeKind::Gate, legs, side: side_of_pair(x), row: r, x });
                cur.insert(x, a);
                cur.insert(x + 1, b);
            }
            close(&mut cur, &mut nodes, &region[r], r);
            cut.push(cur[&x0]);
        }
        nodes.push(Node { kind: NodeKind::TopCap, legs: vec![cut[t]], side: Side::Left, row: t + 1, x: x0 });
        Self { t, x0, nodes, cut }
    }

    /// Number of cut legs, `t + 1`.
    pub fn n_legs(&self) -> usize {
        self.cut.len()
    }

    fn owners(&self) -> BTreeMap<Label, Vec<(usize, usize)>> {
        let mut o: BTreeMap<Label, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            for (k, &l) in n.legs.iter().enumerate() {
                o.entry(l).or_default().push((i, k));
            }
        }
        o
    }

    /// Removes the gates fixed by dual unitarity when the first `t0` cut legs
    /// are contracted. Valid for `t0 ≤ t`.
    pub fn reduce(&self, t0: usize) -> ReducedNetwork {
        assert!(t0 <= self.t, "reduction needs at least one open cut leg");
        let owners = self.owners();
        let cut_index: BTreeMap<Label, usize> = self.cut.iter().enumerate().map(|(j, &l)| (l, j)).collect();
        let other = |l: Label, i: usize| owners[&l].iter().copied().find(|&(j, _)| j != i);

        // Follow a straight light ray through gates until it meets the cut.
        let follow = |mut i: usize, mut k: usize| -> Option<usize> {
            loop {
                let l = self.nodes[i].legs[k];
                if let Some(&j) = cut_index.get(&l) {
                    return Some(j);
                }
                let (j, kk) = other(l, i)?;
                if self.nodes[j].kind != NodeKind::Gate {
                    return None;
                }
                i = j;
                k = match kk {
                    2 => 1,
                    3 => 0,
                    0 => 3,
                    _ => 2,
                };
            }
        };

        let mut removed = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind != NodeKind::Gate {
                continue;
            }
            let (a, b) = match n.side {
                Side::Left => (follow(i, 3), follow(i, 1)),
                Side::Right => (follow(i, 2), follow(i, 0)),
            };
            if matches!((a, b), (Some(a), Some(b)) if a >= t0 && b >= t0) {
                removed.insert(i);
            }
        }

        let mut kept = Vec::new();
        let mut dropped_caps = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if removed.contains(&i) || n.kind == NodeKind::TopCap {
                continue;
            }
            if n.kind == NodeKind::Cap && n.legs.iter().any(|&l| other(l, i).is_some_and(|(j, _)| removed.contains(&j)))
            {
                dropped_caps += 1;
                continue;
            }
            kept.push(i);
        }
        let kept_set: BTreeSet<usize> = kept.iter().copied().collect();
        let free: BTreeSet<Label> = self.cut[t0..].iter().copied().collect();
        let mut open: Vec<(Side, usize, usize, usize, Label)> = Vec::new();
        for &i in &kept {
            let n = &self.nodes[i];
            for (k, &l) in n.legs.iter().enumerate() {
                let partner_gone = owners[&l].iter().any(|&(j, _)| j != i && !kept_set.contains(&j));
                if free.contains(&l) || partner_gone {
                    open.push((n.side, n.row, n.x, k, l));
                }
            }
        }
        open.sort();
        let a_prime: Vec<Label> = open.iter().filter(|o| o.0 == Side::Left).map(|o| o.4).collect();
        let a_bar: Vec<Label> = open.iter().filter(|o| o.0 == Side::Right).map(|o| o.4).collect();
        debug_assert!(a_prime.iter().all(|l| !a_bar.contains(l)), "open leg shared by both sides");
        ReducedNetwork { t0, kept, a_prime, a_bar, dropped_caps, removed_gates: removed.len() }
    }
}

/// Trapezoid network left after removing the dual-unitary triangles.
#[derive(Clone, Debug)]
pub struct ReducedNetwork {
    pub t0: usize,
    /// Indices into [`ConeGeometry::nodes`].
    pub kept: Vec<usize>,
    /// Open legs of the left part, bottom to top.
    pub a_prime: Vec<Label>,
    /// Open legs of the right part, bottom to top.
    pub a_bar: Vec<Label>,
    pub dropped_caps: usize,
    pub removed_gates: usize,
}
