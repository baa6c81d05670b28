//! Pairwise contraction of small dense tensor networks with greedy orders.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkernel::{contract, Budget, DenseTensor, C64};

pub type Label = usize;

#[derive(Clone, Debug, Default)]
pub struct TensorNetwork {
    tensors: Vec<DenseTensor>,
    labels: Vec<Vec<Label>>,
}

/// Pairwise order chosen by the greedy heuristic together with its cost model.
#[derive(Clone, Debug)]
pub struct ContractionPlan {
    pub steps: Vec<(usize, usize)>,
    /// Largest intermediate, in complex entries.
    pub peak_elements: f64,
    /// Sum over steps of the multiply-add count.
    pub flops: f64,
}

struct Operand {
    labels: Vec<usize>,
    size: f64,
}

impl TensorNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Adds a tensor whose axes carry `labels`. A label may appear on at most
    /// two tensors; repeated labels inside one tensor are rejected.
    pub fn push(&mut self, tensor: DenseTensor, labels: Vec<Label>) -> Result<()> {
        if labels.len() != tensor.rank() {
            return Err(Error::Dimension(format!("{} labels for a rank-{} tensor", labels.len(), tensor.rank())));
        }
        let uniq: BTreeSet<_> = labels.iter().collect();
        if uniq.len() != labels.len() {
            return Err(Error::Dimension(format!("repeated label within one tensor: {labels:?}")));
        }
        self.tensors.push(tensor);
        self.labels.push(labels);
        Ok(())
    }

    fn label_dims(&self) -> Result<BTreeMap<Label, (usize, usize)>> {
        let mut dims: BTreeMap<Label, (usize, usize)> = BTreeMap::new();
        for (t, ls) in self.tensors.iter().zip(&self.labels) {
            for (ax, &l) in ls.iter().enumerate() {
                let d = t.shape()[ax];
                let e = dims.entry(l).or_insert((d, 0));
                if e.0 != d {
                    return Err(Error::Dimension(format!("label {l} has dimensions {} and {d}", e.0)));
                }
                e.1 += 1;
                if e.1 > 2 {
                    return Err(Error::Dimension(format!("label {l} appears on more than two tensors")));
                }
            }
        }
        Ok(dims)
    }

    /// Best of several greedy orders, see [`TensorNetwork::plan_within`].
    pub fn plan(&self, output: &[Label]) -> Result<ContractionPlan> {
        self.plan_within(output, f64::INFINITY)
    }

    /// Runs deterministic greedy heuristics, plus seeded randomized greedy
    /// trials when those are expensive, and keeps the cheapest plan whose peak fits `max_elements`
    /// (the smallest peak if none fits). Equal inputs give equal plans.
    pub fn plan_within(&self, output: &[Label], max_elements: f64) -> Result<ContractionPlan> {
        let dims = self.label_dims()?;
        let out_set: BTreeSet<Label> = output.iter().copied().collect();
        for l in output {
            match dims.get(l) {
                Some(&(_, 1)) => {}
                Some(_) => return Err(Error::Dimension(format!("output label {l} is shared by two tensors"))),
                None => return Err(Error::Dimension(format!("output label {l} is absent"))),
            }
        }
        for (&l, &(_, c)) in &dims {
            if c == 1 && !out_set.contains(&l) {
                return Err(Error::Dimension(format!("label {l} is dangling but not in the output")));
            }
        }
        // Compact label ids.
        let ids: BTreeMap<Label, usize> = dims.keys().enumerate().map(|(i, &l)| (l, i)).collect();
        let dim: Vec<f64> = dims.values().map(|&(d, _)| d as f64).collect();
        let labels: Vec<Vec<usize>> = self.labels.iter().map(|ls| ls.iter().map(|l| ids[l]).collect()).collect();

        let better = |a: &ContractionPlan, b: &ContractionPlan| -> bool {
            match (a.peak_elements <= max_elements, b.peak_elements <= max_elements) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => a.flops < b.flops,
                (false, false) => a.peak_elements < b.peak_elements,
            }
        };
        let mut best = [Strategy::SizeDiff, Strategy::MinOutput, Strategy::MinFlops]
            .into_iter()
            .map(|s| greedy(&labels, &dim, s))
            .reduce(|b, p| if better(&p, &b) { p } else { b })
            .expect("three strategies");
        if best.flops >= SEARCH_FLOPS || best.peak_elements > max_elements {
            for seed in 0..RANDOM_TRIALS {
                let p = greedy(&labels, &dim, Strategy::Thermal(seed));
                if better(&p, &best) {
                    best = p;
                }
            }
        }
        Ok(best)
    }

    /// Contracts the whole network; the result axes follow `output`.
    pub fn contract(self, output: &[Label], budget: &Budget) -> Result<DenseTensor> {
        let plan = self.plan_within(output, budget.max_elements())?;
        self.execute(&plan, output, budget)
    }

    pub fn execute(self, plan: &ContractionPlan, output: &[Label], budget: &Budget) -> Result<DenseTensor> {
        budget.check_elements(plan.peak_elements, "tensor network intermediate")?;
        if self.tensors.is_empty() {
            return Ok(DenseTensor::scalar(C64::new(1.0, 0.0)));
        }
        let mut slots: Vec<Option<(DenseTensor, Vec<Label>)>> =
            self.tensors.into_iter().zip(self.labels).map(Some).collect();
        for &(i, j) in &plan.steps {
            let (ta, la) = slots[i].take().expect("plan refers to a consumed operand");
            let (tb, lb) = slots[j].take().expect("plan refers to a consumed operand");
            let pairs: Vec<(usize, usize)> =
                la.iter().enumerate().filter_map(|(ai, l)| lb.iter().position(|m| m == l).map(|bj| (ai, bj))).collect();
            let res = contract(&ta, &tb, &pairs)?;
            slots[i] = Some((res, merged_labels(&la, &lb)));
        }
        let (t, ls) = slots.into_iter().flatten().next().expect("network has one remaining operand");
        let perm: Vec<usize> =
            output.iter().map(|l| ls.iter().position(|m| m == l).expect("output label survives")).collect();
        t.permute(&perm)
    }
}

const RANDOM_TRIALS: u64 = 24;
/// Plans cheaper than this skip the randomized search.
const SEARCH_FLOPS: f64 = 1e7;
/// Candidates considered by a randomized step.
const THERMAL_BRANCH: usize = 6;

#[derive(Clone, Copy, Debug)]
enum Strategy {
    /// `size(out) − size(a) − size(b)`.
    SizeDiff,
    MinOutput,
    MinFlops,
    /// Boltzmann choice among the best size-diff candidates, seeded.
    Thermal(u64),
}

/// One greedy pass. Candidates are pairs sharing a label; a disconnected
/// remainder is joined smallest-first by outer products.
fn greedy(init: &[Vec<usize>], dim: &[f64], strategy: Strategy) -> ContractionPlan {
    let mut rng = match strategy {
        Strategy::Thermal(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); dim.len()];
    let mut ops: Vec<Option<Operand>> = Vec::with_capacity(init.len());
    for (i, ls) in init.iter().enumerate() {
        for &l in ls {
            owners[l].push(i);
        }
        let size = ls.iter().map(|&l| dim[l]).product();
        ops.push(Some(Operand { labels: ls.clone(), size }));
    }
    let pair_cost = |a: &Operand, b: &Operand| -> f64 {
        let out: f64 = merged_labels(&a.labels, &b.labels).iter().map(|&l| dim[l]).product();
        match strategy {
            Strategy::SizeDiff | Strategy::Thermal(_) => out - a.size - b.size,
            Strategy::MinOutput => out,
            Strategy::MinFlops => {
                let shared: f64 = a.labels.iter().filter(|l| b.labels.contains(l)).map(|&l| dim[l]).product();
                out * shared
            }
        }
    };
    let mut cand: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for o in owners.iter().filter(|o| o.len() == 2) {
        let (i, j) = (o[0].min(o[1]), o[0].max(o[1]));
        cand.entry((i, j)).or_insert_with(|| pair_cost(ops[i].as_ref().unwrap(), ops[j].as_ref().unwrap()));
    }
    let mut steps = Vec::new();
    let mut peak: f64 = ops.iter().flatten().map(|o| o.size).fold(1.0, f64::max);
    let mut flops = 0.0;
    let mut live_count = ops.len();
    while live_count > 1 {
        let pick = match rng.as_mut() {
            Some(rng) if cand.len() > 1 => {
                let mut top: Vec<(f64, usize, usize)> = cand.iter().map(|(&(i, j), &c)| (c, i, j)).collect();
                top.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
                top.truncate(THERMAL_BRANCH);
                let c0 = top[0].0;
                let scale = c0.abs().max(1.0);
                let w: Vec<f64> = top.iter().map(|c| (-(c.0 - c0) / scale).exp()).collect();
                let mut u = rng.random::<f64>() * w.iter().sum::<f64>();
                let mut k = 0;
                while k + 1 < w.len() && u >= w[k] {
                    u -= w[k];
                    k += 1;
                }
                Some((top[k].1, top[k].2))
            }
            _ => {
                let mut best: Option<(f64, usize, usize)> = None;
                for (&(i, j), &cost) in &cand {
                    if best.is_none_or(|(c, _, _)| cost < c) {
                        best = Some((cost, i, j));
                    }
                }
                best.map(|(_, i, j)| (i, j))
            }
        };
        let (i, j) = match pick {
            Some(p) => p,
            None => {
                let mut by_size: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].is_some()).collect();
                by_size.sort_by(|&x, &y| {
                    ops[x].as_ref().unwrap().size.total_cmp(&ops[y].as_ref().unwrap().size).then(x.cmp(&y))
                });
                let (x, y) = (by_size[0], by_size[1]);
                (x.min(y), x.max(y))
            }
        };
        let a = ops[i].take().unwrap();
        let b = ops[j].take().unwrap();
        let labels = merged_labels(&a.labels, &b.labels);
        let size: f64 = labels.iter().map(|&l| dim[l]).product();
        let shared: f64 = a.labels.iter().filter(|l| b.labels.contains(l)).map(|&l| dim[l]).product();
        for &l in a.labels.iter().chain(&b.labels) {
            owners[l].retain(|&x| x != i && x != j);
        }
        cand.retain(|&(x, y), _| x != i && x != j && y != i && y != j);
        for &l in &labels {
            owners[l].push(i);
        }
        let merged = Operand { labels, size };
        for &l in &merged.labels {
            if let [x, y] = owners[l][..] {
                let k = if x == i { y } else { x };
                let key = (i.min(k), i.max(k));
                cand.entry(key).or_insert_with(|| pair_cost(ops[k].as_ref().unwrap(), &merged));
            }
        }
        flops += size * shared;
        peak = peak.max(size);
        ops[i] = Some(merged);
        steps.push((i, j));
        live_count -= 1;
    }
    ContractionPlan { steps, peak_elements: peak, flops }
}

/// Labels of the pairwise result: unshared labels of `a` then of `b`.
fn merged_labels<T: Copy + PartialEq>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().filter(|l| !b.contains(l)).chain(b.iter().filter(|l| !a.contains(l))).copied().collect()
}
