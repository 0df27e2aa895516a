use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{MdpModel, SimplexPolicy};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// One observed step `(x_t, a_t, x_{t+1}, c_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: usize,
    pub x: usize,
    pub a: usize,
    pub x_next: usize,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<Transition>,
}

impl Dataset {
    pub fn new(n_states: usize, n_actions: usize, transitions: Vec<Transition>) -> Result<Self> {
        let d = Dataset {
            n_states,
            n_actions,
            transitions,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for tr in &self.transitions {
            if tr.x >= self.n_states || tr.x_next >= self.n_states || tr.a >= self.n_actions {
                return Err(Error::validation(format!(
                    "transition at t={} has ids out of range ({} states, {} actions)",
                    tr.t, self.n_states, self.n_actions
                )));
            }
            if !(tr.c.is_finite() && tr.c >= 0.0) {
                return Err(Error::validation(format!(
                    "transition at t={} has invalid cost {}",
                    tr.t, tr.c
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// True when every record continues where the previous one ended.
    pub fn is_path(&self) -> bool {
        self.transitions.windows(2).all(|w| w[0].x_next == w[1].x)
    }

    /// Visit counts indexed `[i][k]`.
    pub fn pair_counts(&self) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0usize; self.n_actions]; self.n_states];
        for tr in &self.transitions {
            counts[tr.x][tr.a] += 1;
        }
        counts
    }

    /// First `n` transitions.
    pub fn prefix(&self, n: usize) -> Dataset {
        Dataset {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transitions: self.transitions[..n.min(self.len())].to_vec(),
        }
    }

    /// CSV with header `t,x,a,x_next,c`; costs carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,a,x_next,c")?;
        for tr in &self.transitions {
            writeln!(w, "{},{},{},{},{:.16e}", tr.t, tr.x, tr.a, tr.x_next, tr.c)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    pub fn read_csv<R: Read>(r: R, n_states: usize, n_actions: usize) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x", "a", "x_next", "c"] {
            return Err(Error::validation(format!(
                "dataset header must be t,x,a,x_next,c (got {})",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let transitions = reader
            .deserialize()
            .collect::<std::result::Result<Vec<Transition>, _>>()?;
        Dataset::new(n_states, n_actions, transitions)
    }

    /// Hash of the canonical CSV encoding.
    pub fn hash(&self) -> String {
        crate::hashing::sha256_hex(self.to_csv_string().as_bytes())
    }
}

/// Run `policy` on `model` from `x0` and record `t_max - 1` transitions, with
/// `t` counting from 1. One random stream drives action, next-state and cost
/// draws in that order, so a longer run extends a shorter one with the same seed.
pub fn simulate(
    model: &MdpModel,
    policy: &SimplexPolicy,
    t_max: usize,
    x0: usize,
    seed: u64,
) -> Result<Dataset> {
    if t_max < 2 {
        return Err(Error::validation(format!(
            "t_max must be at least 2, got {t_max}"
        )));
    }
    if x0 >= model.n_states {
        return Err(Error::validation(format!(
            "initial state {x0} out of range"
        )));
    }
    if policy.n_states() != model.n_states || policy.n_actions() != model.n_actions {
        return Err(Error::validation("policy shape does not match the model"));
    }
    let mut rng = rng_from_seed(seed);
    let mut x = x0;
    let mut out = Vec::with_capacity(t_max - 1);
    for t in 1..t_max {
        let a = policy.sample_action(x, &mut rng);
        let row = &model.transitions[a][x];
        let u: f64 = rand::Rng::random(&mut rng);
        let mut acc = 0.0;
        let mut x_next = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                x_next = j;
                break;
            }
        }
        let c = model.sample_cost_unchecked(x, a, x_next, &mut rng);
        out.push(Transition { t, x, a, x_next, c });
        x = x_next;
    }
    Ok(Dataset {
        n_states: model.n_states,
        n_actions: model.n_actions,
        transitions: out,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedPair {
    pub state: usize,
    pub action: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub min_count: usize,
    /// Visit counts indexed `[i][k]`.
    pub counts: Vec<Vec<usize>>,
    pub flagged: Vec<FlaggedPair>,
}

impl CoverageReport {
    pub fn is_covered(&self) -> bool {
        self.flagged.is_empty()
    }

    pub fn min_observed(&self) -> usize {
        self.counts.iter().flatten().copied().min().unwrap_or(0)
    }
}

/// Count visits per state-action pair and flag the pairs seen fewer than `min_count` times.
pub fn check_coverage(
    dataset: &Dataset,
    n_states: usize,
    n_actions: usize,
    min_count: usize,
) -> Result<CoverageReport> {
    if dataset.n_states != n_states || dataset.n_actions != n_actions {
        return Err(Error::validation(
            "dataset dimensions do not match the requested coverage shape",
        ));
    }
    let counts = dataset.pair_counts();
    let flagged = counts
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &c)| c < min_count)
                .map(move |(k, &c)| FlaggedPair {
                    state: i,
                    action: k,
                    count: c,
                })
        })
        .collect();
    Ok(CoverageReport {
        min_count,
        counts,
        flagged,
    })
}
