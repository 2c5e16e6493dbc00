//! Bounded retransmission protocol: sender, receiver, tester and two lossy
//! channels composed synchronously, then turned into a Markov chain by
//! resolving the remaining nondeterminism uniformly.

use std::collections::HashMap;

use nwr::poly::{rat, Rational};

const S: usize = 0;
const SREP: usize = 1;
const NRTR: usize = 2;
const I: usize = 3;
const BS: usize = 4;
const S_AB: usize = 5;
const FS: usize = 6;
const LS: usize = 7;
const R: usize = 8;
const RREP: usize = 9;
const FR: usize = 10;
const LR: usize = 11;
const BR: usize = 12;
const R_AB: usize = 13;
const RECV: usize = 14;
const T: usize = 15;
const K: usize = 16;
const L: usize = 17;

pub const FIELD_NAMES: [&str; 18] =
    ["s", "srep", "nrtr", "i", "bs", "s_ab", "fs", "ls", "r", "rrep", "fr", "lr", "br", "r_ab", "recv", "T", "k", "l"];
const BOOLEAN: [bool; 18] = [
    false, false, false, false, true, true, true, true, false, false, true, true, true, true, true, true, false, false,
];

/// Valuation of all protocol variables; booleans are stored as 0/1.
pub type BrpState = [u32; 18];

type Update = Vec<(usize, u32)>;
type Dist = Vec<(Rational, Update)>;
/// `None` marks an internal step; synchronised steps carry their label.
type ModuleChoice = (Option<&'static str>, Dist);

const SYNC_ACTIONS: [&str; 8] = ["NewFile", "SyncWait", "TO_Ack", "TO_Msg", "aA", "aB", "aF", "aG"];

fn one(u: Update) -> Dist {
    vec![(rat(1, 1), u)]
}

fn b(x: bool) -> u32 {
    u32::from(x)
}

fn sender(st: &BrpState, n: u32, max: u32) -> Vec<ModuleChoice> {
    let mut res = Vec::new();
    let (s, i, nrtr) = (st[S], st[I], st[NRTR]);
    let send = |nrtr: u32| one(vec![(S, 2), (FS, b(i == 1)), (LS, b(i == n)), (BS, st[S_AB]), (NRTR, nrtr)]);
    match s {
        0 => res.push((Some("NewFile"), one(vec![(S, 1), (I, 1), (SREP, 0)]))),
        1 => res.push((Some("aF"), send(0))),
        2 => {
            res.push((Some("aB"), one(vec![(S, 4), (S_AB, 1 - st[S_AB])])));
            res.push((Some("TO_Msg"), one(vec![(S, 3)])));
            res.push((Some("TO_Ack"), one(vec![(S, 3)])));
        }
        3 if nrtr < max => res.push((Some("aF"), send(nrtr + 1))),
        3 if nrtr == max && i < n => res.push((None, one(vec![(S, 5), (SREP, 1)]))),
        3 if nrtr == max && i == n => res.push((None, one(vec![(S, 5), (SREP, 2)]))),
        4 if i < n => res.push((None, one(vec![(S, 1), (I, i + 1)]))),
        4 if i == n => res.push((None, one(vec![(S, 0), (SREP, 3)]))),
        5 => res.push((Some("SyncWait"), one(vec![(S, 6)]))),
        6 => res.push((Some("SyncWait"), one(vec![(S, 0), (S_AB, 0)]))),
        _ => {}
    }
    res
}

fn receiver(st: &BrpState) -> Vec<ModuleChoice> {
    let mut res = Vec::new();
    let receive = |r: u32| one(vec![(R, r), (FR, st[FS]), (LR, st[LS]), (BR, st[BS]), (RECV, st[T])]);
    match st[R] {
        0 => {
            res.push((Some("SyncWait"), one(vec![(R, 0)])));
            res.push((Some("aG"), receive(1)));
        }
        1 => res.push((None, one(vec![(R, 2), (R_AB, st[BR])]))),
        2 if st[R_AB] == st[BR] => {
            let (fr, lr) = (st[FR] == 1, st[LR] == 1);
            if fr && !lr {
                res.push((None, one(vec![(R, 3), (RREP, 1)])));
            }
            if !fr && !lr {
                res.push((None, one(vec![(R, 3), (RREP, 2)])));
            }
            if !fr && lr {
                res.push((None, one(vec![(R, 3), (RREP, 3)])));
            }
        }
        2 => res.push((Some("aA"), one(vec![(R, 4)]))),
        3 => res.push((Some("aA"), one(vec![(R, 4), (R_AB, 1 - st[R_AB])]))),
        4 => {
            res.push((Some("aG"), receive(2)));
            if st[LS] == 1 {
                res.push((Some("SyncWait"), one(vec![(R, 5)])));
            } else {
                res.push((Some("SyncWait"), one(vec![(R, 5), (RREP, 4)])));
            }
        }
        5 => res.push((Some("SyncWait"), one(vec![(R, 0), (RREP, 0)]))),
        _ => {}
    }
    res
}

fn tester(st: &BrpState) -> Vec<ModuleChoice> {
    if st[T] == 0 {
        vec![(Some("NewFile"), one(vec![(T, 1)]))]
    } else {
        vec![]
    }
}

fn channel_k(st: &BrpState) -> Vec<ModuleChoice> {
    match st[K] {
        0 => vec![(Some("aF"), vec![(rat(98, 100), vec![(K, 1)]), (rat(2, 100), vec![(K, 2)])])],
        1 => vec![(Some("aG"), one(vec![(K, 0)]))],
        2 => vec![(Some("TO_Msg"), one(vec![(K, 0)]))],
        _ => vec![],
    }
}

fn channel_l(st: &BrpState) -> Vec<ModuleChoice> {
    match st[L] {
        0 => vec![(Some("aA"), vec![(rat(99, 100), vec![(L, 1)]), (rat(1, 100), vec![(L, 2)])])],
        1 => vec![(Some("aB"), one(vec![(L, 0)]))],
        2 => vec![(Some("TO_Ack"), one(vec![(L, 0)]))],
        _ => vec![],
    }
}

const ALPHABETS: [&[&str]; 5] = [
    &["NewFile", "aF", "aB", "TO_Msg", "TO_Ack", "SyncWait"],
    &["SyncWait", "aG", "aA"],
    &["NewFile"],
    &["aF", "aG", "TO_Msg"],
    &["aA", "aB", "TO_Ack"],
];

/// Choices of the composed system: internal steps in module order, then
/// one choice per combination of synchronising module steps for each
/// label in sorted order.
fn product_choices(st: &BrpState, n: u32, max: u32) -> Vec<Dist> {
    let outs = [sender(st, n, max), receiver(st), tester(st), channel_k(st), channel_l(st)];
    let mut choices: Vec<Dist> = Vec::new();
    for out in &outs {
        for (a, d) in out {
            if a.is_none() {
                choices.push(d.clone());
            }
        }
    }
    for a in SYNC_ACTIONS {
        let mut parts: Vec<Vec<&Dist>> = Vec::new();
        for (mi, alphabet) in ALPHABETS.iter().enumerate() {
            if alphabet.contains(&a) {
                parts.push(outs[mi].iter().filter(|(x, _)| *x == Some(a)).map(|(_, d)| d).collect());
            }
        }
        if parts.iter().any(|p| p.is_empty()) {
            continue;
        }
        let mut combos: Vec<Dist> = vec![vec![(rat(1, 1), Vec::new())]];
        for part in &parts {
            let mut next = Vec::new();
            for prefix in &combos {
                for d in part {
                    let mut dist = Vec::new();
                    for (p, u) in prefix {
                        for (q, v) in d.iter() {
                            let mut w = u.clone();
                            w.extend(v.iter().copied());
                            dist.push((p * q, w));
                        }
                    }
                    next.push(dist);
                }
            }
            combos = next;
        }
        choices.extend(combos);
    }
    choices
}

/// Explores the chain breadth-first from the initial state. Returns the
/// states in discovery order and, per state, its successor distribution
/// with mass merged per successor in first-seen order. Deadlocks become
/// self-loops.
pub fn explore(n: u32, max: u32) -> (Vec<BrpState>, Vec<Vec<(usize, Rational)>>) {
    let init: BrpState = [0; 18];
    let mut index: HashMap<BrpState, usize> = HashMap::from([(init, 0)]);
    let mut order = vec![init];
    let mut rows = Vec::new();
    let mut next = 0;
    while next < order.len() {
        let st = order[next];
        next += 1;
        let mut choices = product_choices(&st, n, max);
        if choices.is_empty() {
            choices.push(vec![(rat(1, 1), Vec::new())]);
        }
        let k = Rational::from_integer(choices.len().into());
        let mut row: Vec<(usize, Rational)> = Vec::new();
        for c in &choices {
            for (p, u) in c {
                let mut ns = st;
                for &(f, v) in u {
                    ns[f] = v;
                }
                let j = *index.entry(ns).or_insert_with(|| {
                    order.push(ns);
                    order.len() - 1
                });
                let mass = p / &k;
                match row.iter_mut().find(|(t, _)| *t == j) {
                    Some((_, m)) => *m += mass,
                    None => row.push((j, mass)),
                }
            }
        }
        rows.push(row);
    }
    (order, rows)
}

/// Readable state name listing the variables that differ from 0/false.
pub fn state_name(st: &BrpState) -> String {
    let parts: Vec<String> = (0..18)
        .filter(|&f| st[f] != 0)
        .map(|f| if BOOLEAN[f] { FIELD_NAMES[f].to_string() } else { format!("{}={}", FIELD_NAMES[f], st[f]) })
        .collect();
    if parts.is_empty() {
        "init".to_string()
    } else {
        parts.join(",")
    }
}

/// Target labels used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrpLabel {
    /// The sender reports an unsuccessful transmission (`s = 5`).
    NoSuccTrans,
    /// The sender reported something although the receiver got nothing.
    NotRecButSent,
}

impl BrpLabel {
    pub fn name(self) -> &'static str {
        match self {
            BrpLabel::NoSuccTrans => "no_succ_trans",
            BrpLabel::NotRecButSent => "not_rec_but_sent",
        }
    }

    pub fn holds(self, st: &BrpState) -> bool {
        match self {
            BrpLabel::NoSuccTrans => st[S] == 5,
            BrpLabel::NotRecButSent => st[SREP] != 0 && st[RECV] == 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instance_is_stochastic() {
        let (states, rows) = explore(4, 2);
        assert_eq!(states.len(), rows.len());
        for row in &rows {
            let total: Rational = row.iter().map(|(_, p)| p.clone()).sum();
            assert_eq!(total, rat(1, 1));
        }
        assert_eq!(state_name(&states[0]), "init");
    }
}
