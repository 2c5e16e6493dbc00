//! Randomised consensus for two processes sharing a bounded counter.
//! Each process flips a coin, moves the counter up or down, and decides
//! once the counter leaves the band `(N, range - N)`.

use std::collections::HashMap;

use nwr::poly::{rat, Rational};

/// `(counter, pc1, coin1, pc2, coin2)`.
pub type ConsensusState = [u32; 5];

/// One nondeterministic step: owning process (`None` for the final
/// self-loop) and its successor distribution.
pub type Step = (Option<usize>, Vec<(Rational, ConsensusState)>);

const N: u32 = 2;

fn process(st: &ConsensusState, i: usize, k: u32) -> Vec<Vec<(Rational, ConsensusState)>> {
    let range = 2 * (k + 1) * N;
    let (left, right) = (N, range - N);
    let c = st[0];
    let (pc, coin) = (st[1 + 2 * i], st[2 + 2 * i]);
    let upd = |c2: u32, pc2: u32, coin2: u32| {
        let mut s = *st;
        s[0] = c2;
        s[1 + 2 * i] = pc2;
        s[2 + 2 * i] = coin2;
        s
    };
    let mut res = Vec::new();
    if pc == 0 {
        res.push(vec![(rat(1, 2), upd(c, 1, 0)), (rat(1, 2), upd(c, 1, 1))]);
    }
    if pc == 1 && coin == 0 && c > 0 {
        res.push(vec![(rat(1, 1), upd(c - 1, 2, 0))]);
    }
    if pc == 1 && coin == 1 && c < range {
        res.push(vec![(rat(1, 1), upd(c + 1, 2, 0))]);
    }
    if pc == 2 && c <= left {
        res.push(vec![(rat(1, 1), upd(c, 3, 0))]);
    }
    if pc == 2 && c >= right {
        res.push(vec![(rat(1, 1), upd(c, 3, 1))]);
    }
    if pc == 2 && c > left && c < right {
        res.push(vec![(rat(1, 1), upd(c, 0, coin))]);
    }
    res
}

/// Explores the MDP breadth-first. Per state: the steps of process 0,
/// then of process 1, then a self-loop once both have decided. Masses of
/// equal successors within a step are merged.
pub fn explore(k: u32) -> (Vec<ConsensusState>, Vec<Vec<(Option<usize>, Vec<(usize, Rational)>)>>) {
    let init: ConsensusState = [(k + 1) * N, 0, 0, 0, 0];
    let mut index: HashMap<ConsensusState, usize> = HashMap::from([(init, 0)]);
    let mut order = vec![init];
    let mut out = Vec::new();
    let mut next = 0;
    while next < order.len() {
        let st = order[next];
        next += 1;
        let mut steps: Vec<Step> = Vec::new();
        for i in 0..2 {
            steps.extend(process(&st, i, k).into_iter().map(|d| (Some(i), d)));
        }
        if st[1] == 3 && st[3] == 3 {
            steps.push((None, vec![(rat(1, 1), st)]));
        }
        let mut choices = Vec::new();
        for (owner, dist) in steps {
            let mut row: Vec<(usize, Rational)> = Vec::new();
            for (p, ns) in dist {
                let j = *index.entry(ns).or_insert_with(|| {
                    order.push(ns);
                    order.len() - 1
                });
                match row.iter_mut().find(|(t, _)| *t == j) {
                    Some((_, m)) => *m += p,
                    None => row.push((j, p)),
                }
            }
            choices.push((owner, row));
        }
        out.push(choices);
    }
    (order, out)
}

pub fn state_name(st: &ConsensusState) -> String {
    format!("c={},pc1={},coin1={},pc2={},coin2={}", st[0], st[1], st[2], st[3], st[4])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusLabel {
    /// Both processes decided with different coins.
    Disagree,
    /// Both decided with coin 1.
    All1,
    /// Both decided, not both with coin 1.
    NotAll1,
}

impl ConsensusLabel {
    pub fn name(self) -> &'static str {
        match self {
            ConsensusLabel::Disagree => "disagree",
            ConsensusLabel::All1 => "all1",
            ConsensusLabel::NotAll1 => "notall1",
        }
    }

    pub fn holds(self, st: &ConsensusState) -> bool {
        let done = st[1] == 3 && st[3] == 3;
        let all1 = st[2] == 1 && st[4] == 1;
        done && match self {
            ConsensusLabel::Disagree => st[2] != st[4],
            ConsensusLabel::All1 => all1,
            ConsensusLabel::NotAll1 => !all1,
        }
    }
}
