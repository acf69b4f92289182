use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::agreement::Assignments;
use crate::rng::named_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMethod {
    /// Cycle every reviewer subset of size `per_sample` evenly.
    TripleCycle,
    /// Seeded greedy balancing with random tie-breaks.
    RandomBalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignmentParams {
    pub per_sample: usize,
    pub anchors_per_reviewer: usize,
    /// Total presentations of each anchor, first pass included.
    pub presentations: u8,
    pub method: AssignmentMethod,
    pub seed: u64,
}

impl Default for AssignmentParams {
    fn default() -> Self {
        Self { per_sample: 3, anchors_per_reviewer: 20, presentations: 5, method: AssignmentMethod::TripleCycle, seed: 20240601 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    /// Opaque id shown to the reviewer.
    pub presentation_id: String,
    pub sample_id: String,
    /// 1 for the first pass; 2.. for anchor repeats.
    pub presentation_index: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub reviewers: Vec<String>,
    pub presentations: u8,
    /// Sample id -> assigned reviewers.
    pub assignments: Assignments,
    /// Reviewer -> grading queue, anchors interleaved.
    pub queues: BTreeMap<String, Vec<QueueEntry>>,
    /// Reviewer -> anchor sample ids.
    pub anchors: BTreeMap<String, Vec<String>>,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

fn validate(samples: &[String], reviewers: &[String], p: &AssignmentParams) -> Result<(), StudyError> {
    let (n, r, k) = (samples.len(), reviewers.len(), p.per_sample);
    let infeasible = |m: String| Err(StudyError::Assignment(m));
    if k == 0 || k > r {
        return infeasible(format!("per_sample {k} must be in 1..={r}"));
    }
    if BTreeSet::from_iter(samples).len() != n || BTreeSet::from_iter(reviewers).len() != r {
        return infeasible("sample and reviewer ids must be unique".into());
    }
    if (n * k) % r != 0 {
        return infeasible(format!("samples x per_sample ({n} x {k}) must be divisible by reviewers ({r})"));
    }
    if p.method == AssignmentMethod::TripleCycle {
        let c = combinations(r, k).len();
        if n % c != 0 {
            return infeasible(format!("samples ({n}) must be divisible by C({r}, {k}) = {c}"));
        }
    }
    if p.presentations == 0 {
        return infeasible("presentations must be at least 1".into());
    }
    let uniques = n * k / r;
    if p.anchors_per_reviewer > uniques {
        return infeasible(format!("anchors_per_reviewer ({}) exceeds unique samples per reviewer ({uniques})", p.anchors_per_reviewer));
    }
    Ok(())
}

fn triple_cycle(samples: &[String], r: usize, p: &AssignmentParams) -> Vec<Vec<usize>> {
    let combos = combinations(r, p.per_sample);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut named_rng(p.seed, "assignment/order", 0));
    let mut out = vec![Vec::new(); samples.len()];
    for (slot, &s) in order.iter().enumerate() {
        out[s] = combos[slot % combos.len()].clone();
    }
    out
}

fn random_balanced(samples: &[String], r: usize, p: &AssignmentParams, attempt: u64) -> Vec<Vec<usize>> {
    let mut rng = named_rng(p.seed, "assignment/balanced", attempt);
    let mut capacity = vec![samples.len() * p.per_sample / r; r];
    let mut out = Vec::with_capacity(samples.len());
    for _ in samples {
        let mut keyed: Vec<(usize, u64, usize)> = (0..r).map(|j| (capacity[j], rng.random::<u64>(), j)).collect();
        keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut chosen: Vec<usize> = keyed[..p.per_sample].iter().map(|t| t.2).collect();
        chosen.sort_unstable();
        for &j in &chosen {
            capacity[j] -= 1;
        }
        out.push(chosen);
    }
    out
}

fn connected(sets: &[Vec<usize>], r: usize) -> bool {
    let mut seen = vec![vec![false; r]; r];
    for s in sets {
        for &a in s {
            for &b in s {
                seen[a][b] = true;
            }
        }
    }
    (0..r).all(|a| (0..r).all(|b| a == b || seen[a][b]))
}

/// Builds the reviewer assignment and per-reviewer grading queues.
pub fn build_assignment(samples: &[String], reviewers: &[String], params: &AssignmentParams) -> Result<AssignmentPlan, StudyError> {
    validate(samples, reviewers, params)?;
    let r = reviewers.len();
    let sets = match params.method {
        AssignmentMethod::TripleCycle => triple_cycle(samples, r, params),
        AssignmentMethod::RandomBalanced => (0..64)
            .map(|a| random_balanced(samples, r, params, a))
            .find(|s| connected(s, r))
            .ok_or_else(|| StudyError::Assignment("no connected random-balanced design found in 64 attempts".into()))?,
    };
    if r > 1 && !connected(&sets, r) {
        return Err(StudyError::Assignment("design leaves a reviewer pair without a co-rated sample".into()));
    }

    let mut assignments = Assignments::new();
    let mut uniques: BTreeMap<String, Vec<String>> = reviewers.iter().map(|x| (x.clone(), Vec::new())).collect();
    for (s, set) in samples.iter().zip(&sets) {
        let ids: Vec<String> = set.iter().map(|&j| reviewers[j].clone()).collect();
        for id in &ids {
            uniques.get_mut(id).expect("reviewer").push(s.clone());
        }
        assignments.insert(s.clone(), ids);
    }

    let mut queues = BTreeMap::new();
    let mut anchors = BTreeMap::new();
    for (ri, reviewer) in reviewers.iter().enumerate() {
        let own = &uniques[reviewer];
        let mut pool = own.clone();
        pool.shuffle(&mut named_rng(params.seed, "assignment/anchors", ri as u64));
        let mut picked: Vec<String> = pool[..params.anchors_per_reviewer].to_vec();
        picked.sort();
        let mut tokens: Vec<&String> = own.iter().collect();
        for a in &picked {
            for _ in 1..params.presentations {
                tokens.push(a);
            }
        }
        tokens.shuffle(&mut named_rng(params.seed, "assignment/queue", ri as u64));
        let mut ids = named_rng(params.seed, "assignment/presentation-ids", ri as u64);
        let mut count: BTreeMap<&String, u8> = BTreeMap::new();
        let queue: Vec<QueueEntry> = tokens
            .into_iter()
            .map(|s| {
                let c = count.entry(s).or_insert(0);
                *c += 1;
                QueueEntry { presentation_id: format!("p{:016x}", ids.random::<u64>()), sample_id: s.clone(), presentation_index: *c }
            })
            .collect();
        queues.insert(reviewer.clone(), queue);
        anchors.insert(reviewer.clone(), picked);
    }
    let plan = AssignmentPlan { reviewers: reviewers.to_vec(), presentations: params.presentations, assignments, queues, anchors };
    let problems = plan.audit();
    if !problems.is_empty() {
        return Err(StudyError::Assignment(problems.join("; ")));
    }
    Ok(plan)
}

/// The six default panel ids, in table order.
pub fn default_reviewers() -> Vec<String> {
    ["MD1", "MD2", "MD3", "NP1", "NP2", "NP3"].map(String::from).to_vec()
}

impl AssignmentPlan {
    pub fn unique_count(&self, reviewer: &str) -> usize {
        self.assignments.values().filter(|v| v.iter().any(|r| r == reviewer)).count()
    }

    pub fn queue_len(&self, reviewer: &str) -> usize {
        self.queues.get(reviewer).map_or(0, Vec::len)
    }

    /// Samples co-rated by two reviewers.
    pub fn co_reviews(&self, a: &str, b: &str) -> usize {
        self.assignments.values().filter(|v| v.iter().any(|r| r == a) && v.iter().any(|r| r == b)).count()
    }

    /// Queue entry by reviewer and presentation id.
    pub fn entry(&self, reviewer: &str, presentation_id: &str) -> Option<&QueueEntry> {
        self.queues.get(reviewer)?.iter().find(|e| e.presentation_id == presentation_id)
    }

    /// Structural problems; empty when the plan is consistent.
    pub fn audit(&self) -> Vec<String> {
        let mut out = Vec::new();
        let k = self.assignments.values().map(Vec::len).max().unwrap_or(0);
        for (s, rs) in &self.assignments {
            if rs.len() != k || BTreeSet::from_iter(rs).len() != rs.len() {
                out.push(format!("sample {s}: reviewers {rs:?}"));
            }
        }
        let mut pids = BTreeSet::new();
        for reviewer in &self.reviewers {
            let queue = self.queues.get(reviewer).map(Vec::as_slice).unwrap_or(&[]);
            let anchors = self.anchors.get(reviewer).map(Vec::as_slice).unwrap_or(&[]);
            let expected = self.unique_count(reviewer) + anchors.len() * (usize::from(self.presentations) - 1);
            if queue.len() != expected {
                out.push(format!("{reviewer}: queue {} != {expected}", queue.len()));
            }
            let mut seen: BTreeMap<&str, u8> = BTreeMap::new();
            for e in queue {
                if !pids.insert(&e.presentation_id) {
                    out.push(format!("duplicate presentation id {}", e.presentation_id));
                }
                let c = seen.entry(&e.sample_id).or_insert(0);
                *c += 1;
                if e.presentation_index != *c {
                    out.push(format!("{reviewer}: {} presented out of order", e.sample_id));
                }
                if !self.assignments.get(&e.sample_id).is_some_and(|v| v.contains(reviewer)) {
                    out.push(format!("{reviewer}: {} not assigned", e.sample_id));
                }
            }
            for a in anchors {
                if seen.get(a.as_str()).copied() != Some(self.presentations) {
                    out.push(format!("{reviewer}: anchor {a} not presented {} times", self.presentations));
                }
            }
        }
        for (i, a) in self.reviewers.iter().enumerate() {
            for b in &self.reviewers[i + 1..] {
                if self.co_reviews(a, b) == 0 {
                    out.push(format!("{a} and {b} share no sample"));
                }
            }
        }
        out
    }
}
