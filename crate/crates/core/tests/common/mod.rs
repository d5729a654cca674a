//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

pub mod corpus;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A finite labelled transition system over states `0..n`.
#[derive(Clone, Debug)]
pub struct Lts {
    pub states: usize,
    pub labels: usize,
    pub edges: BTreeSet<(usize, usize, usize)>,
}

pub const LABELS: [&str; 2] = ["a", "b"];

impl Lts {
    pub fn random(rng: &mut ChaCha8Rng, max_states: usize, max_labels: usize) -> Lts {
        let states = rng.gen_range(1..=max_states);
        let labels = rng.gen_range(1..=max_labels);
        let density = rng.gen_range(0.1..0.6);
        let mut edges = BTreeSet::new();
        for s in 0..states {
            for a in 0..labels {
                for t in 0..states {
                    if rng.gen_bool(density) {
                        edges.insert((s, a, t));
                    }
                }
            }
        }
        Lts { states, labels, edges }
    }

    pub fn state(i: usize) -> String {
        format!("s{i}")
    }

    /// System text declaring the LTS `L`, its bisimulation chain `BIS` and
    /// the relational techniques.
    pub fn system_text(&self) -> String {
        let edges: Vec<String> =
            self.edges.iter().map(|&(s, a, t)| format!("({} {} {})", Lts::state(s), LABELS[a], Lts::state(t))).collect();
        let states: Vec<String> = (0..self.states).map(Lts::state).collect();
        let labels = &LABELS[..self.labels];
        format!(
            "(coalgebra L lts ({}) (states {}) (labels {}))\n(lifting B bisim)\n(chain BIS (transformer B L))\n\
             (technique TR transitive BIS)\n(technique CV converse BIS)\n",
            edges.join(" "),
            states.join(" "),
            labels.join(" ")
        )
    }

    fn succ(&self, s: usize, a: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(x, l, _)| x == s && l == a).map(|&(_, _, t)| t).collect()
    }

    /// One step of the bisimulation transformer on an explicit relation.
    pub fn bisim_step(&self, r: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for x in 0..self.states {
            for y in 0..self.states {
                let ok = (0..self.labels).all(|a| {
                    let (sx, sy) = (self.succ(x, a), self.succ(y, a));
                    sx.iter().all(|&x2| sy.iter().any(|&y2| r.contains(&(x2, y2))))
                        && sy.iter().all(|&y2| sx.iter().any(|&x2| r.contains(&(x2, y2))))
                });
                if ok {
                    out.insert((x, y));
                }
            }
        }
        out
    }

    pub fn all_pairs(&self) -> BTreeSet<(usize, usize)> {
        (0..self.states).flat_map(|x| (0..self.states).map(move |y| (x, y))).collect()
    }

    /// The `n`-th approximant of bisimilarity, by direct iteration.
    pub fn approximant(&self, n: usize) -> BTreeSet<(usize, usize)> {
        let mut r = self.all_pairs();
        for _ in 0..n {
            r = self.bisim_step(&r);
        }
        r
    }

    /// Bisimilarity by partition refinement: split blocks by the set of
    /// `(label, successor block)` signatures until stable.
    pub fn partition_refinement(&self) -> BTreeSet<(usize, usize)> {
        let mut block: Vec<usize> = vec![0; self.states];
        loop {
            let mut sigs: BTreeMap<(usize, BTreeSet<(usize, usize)>), usize> = BTreeMap::new();
            let mut next = vec![0; self.states];
            for s in 0..self.states {
                let sig: BTreeSet<(usize, usize)> =
                    self.edges.iter().filter(|&&(x, _, _)| x == s).map(|&(_, a, t)| (a, block[t])).collect();
                let len = sigs.len();
                next[s] = *sigs.entry((block[s], sig)).or_insert(len);
            }
            let stable = count_blocks(&next) == count_blocks(&block);
            block = next;
            if stable {
                break;
            }
        }
        self.all_pairs().into_iter().filter(|&(x, y)| block[x] == block[y]).collect()
    }
}

fn count_blocks(b: &[usize]) -> usize {
    b.iter().collect::<BTreeSet<_>>().len()
}

/// Relational composition.
pub fn compose(r: &BTreeSet<(usize, usize)>, s: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for &(a, b) in r {
        for &(b2, c) in s {
            if b == b2 {
                out.insert((a, c));
            }
        }
    }
    out
}

/// Descending chains as bitmask sequences: `len` entries over `points` points.
pub fn mask_chains(points: usize, len: usize) -> Vec<Vec<u32>> {
    let full = (1u32 << points) - 1;
    let mut seqs: Vec<Vec<u32>> = (0..=full).map(|m| vec![m]).collect();
    for _ in 1..len {
        seqs = seqs
            .into_iter()
            .flat_map(|seq| {
                let last = *seq.last().unwrap();
                (0..=full).filter(move |m| m & last == *m).map(move |m| {
                    let mut s = seq.clone();
                    s.push(m);
                    s
                })
            })
            .collect();
    }
    seqs
}

/// Entry `n` of a mask chain; the last entry repeats.
pub fn mask_at(c: &[u32], n: usize) -> u32 {
    c[n.min(c.len() - 1)]
}

/// `(t^s)_n = ⋀_{m≤n} (¬s_m ∨ t_m)` on masks.
pub fn mask_exp(s: &[u32], t: &[u32], n: usize, full: u32) -> u32 {
    (0..=n).fold(full, |acc, m| acc & ((!mask_at(s, m) & full) | mask_at(t, m)))
}

/// Stream values of the closed forms used by the quantitative checks.
pub fn closed_form(name: &str, k: usize) -> num_rational::BigRational {
    use num_rational::BigRational;
    let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
    match name {
        "one" => r(1, 1),
        "zero" => r(0, 1),
        "half" => r(1, 2),
        "flip" => {
            if k.is_multiple_of(2) {
                r(0, 1)
            } else {
                r(1, 2)
            }
        }
        "decay" => r(1, 1 << k.min(62)),
        _ => panic!("no closed form for {name}"),
    }
}
