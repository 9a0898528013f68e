//! Pooled tests under the OR channel with optional Z-channel noise.
//!
//! A test is positive iff some pooled member is infected; a positive result
//! is then flipped to negative with probability `z`. Negative results are
//! never flipped.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::infection::InfectionState;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DesignFile", into = "DesignFile")]
pub struct TestDesign {
    n: usize,
    pools: Vec<Vec<usize>>,
    /// Row split `(T1, T2)` for two-stage designs.
    stages: Option<(usize, usize)>,
}

/// On-disk form: `{"T": int, "n": int, "pools": [[int,...],...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignFile {
    #[serde(rename = "T")]
    pub t: usize,
    pub n: usize,
    pub pools: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<(usize, usize)>,
}

impl TryFrom<DesignFile> for TestDesign {
    type Error = Error;

    fn try_from(f: DesignFile) -> Result<Self> {
        if f.t != f.pools.len() {
            return Err(Error::DimensionMismatch(format!(
                "T = {} but {} pools given",
                f.t,
                f.pools.len()
            )));
        }
        let mut d = TestDesign::new(f.n, f.pools)?;
        if let Some((t1, t2)) = f.stages {
            d = d.with_stages(t1, t2)?;
        }
        Ok(d)
    }
}

impl From<TestDesign> for DesignFile {
    fn from(d: TestDesign) -> Self {
        DesignFile {
            t: d.pools.len(),
            n: d.n,
            pools: d.pools,
            stages: d.stages,
        }
    }
}

impl TestDesign {
    /// Pools are sorted; out-of-range or repeated ids are rejected.
    pub fn new(n: usize, pools: Vec<Vec<usize>>) -> Result<Self> {
        let mut sorted = Vec::with_capacity(pools.len());
        for (r, mut pool) in pools.into_iter().enumerate() {
            pool.sort_unstable();
            if let Some(&v) = pool.iter().find(|&&v| v >= n) {
                return Err(Error::MemberOutOfRange { id: v, n });
            }
            if let Some(w) = pool.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateMember {
                    member: w[0],
                    context: format!("test {r}"),
                });
            }
            sorted.push(pool);
        }
        Ok(Self {
            n,
            pools: sorted,
            stages: None,
        })
    }

    pub fn with_stages(mut self, t1: usize, t2: usize) -> Result<Self> {
        if t1 + t2 != self.pools.len() {
            return Err(Error::DimensionMismatch(format!(
                "stage split {t1} + {t2} != {} rows",
                self.pools.len()
            )));
        }
        self.stages = Some((t1, t2));
        Ok(self)
    }

    /// Stack `top` over `bottom`, recording the split.
    pub fn stack(top: &TestDesign, bottom: &TestDesign) -> Result<Self> {
        if top.n != bottom.n {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack designs over {} and {} members",
                top.n, bottom.n
            )));
        }
        let pools = top.pools.iter().chain(&bottom.pools).cloned().collect();
        Ok(Self {
            n: top.n,
            pools,
            stages: Some((top.rows(), bottom.rows())),
        })
    }

    pub fn rows(&self) -> usize {
        self.pools.len()
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn pools(&self) -> &[Vec<usize>] {
        &self.pools
    }

    pub fn pool(&self, r: usize) -> &[usize] {
        &self.pools[r]
    }

    pub fn stages(&self) -> Option<(usize, usize)> {
        self.stages
    }

    /// Rows containing each member.
    pub fn member_tests(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (r, pool) in self.pools.iter().enumerate() {
            for &v in pool {
                out[v].push(r);
            }
        }
        out
    }

    pub fn column_weights(&self) -> Vec<usize> {
        let mut w = vec![0; self.n];
        for pool in &self.pools {
            for &v in pool {
                w[v] += 1;
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OutcomesFile", into = "OutcomesFile")]
pub struct TestOutcomes {
    pub z: f64,
    pub y: Vec<bool>,
}

/// On-disk form: `{"z": float, "y": [0/1,...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomesFile {
    pub z: f64,
    pub y: Vec<u8>,
}

impl TryFrom<OutcomesFile> for TestOutcomes {
    type Error = Error;

    fn try_from(f: OutcomesFile) -> Result<Self> {
        check_probability("z", f.z)?;
        let y = f
            .y
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidParameter(format!("outcome {other} is not 0/1"))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { z: f.z, y })
    }
}

impl From<TestOutcomes> for OutcomesFile {
    fn from(o: TestOutcomes) -> Self {
        OutcomesFile {
            z: o.z,
            y: o.y.iter().map(|&b| b as u8).collect(),
        }
    }
}

impl TestOutcomes {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Outcomes of rows `range`, keeping the noise level.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TestOutcomes {
        TestOutcomes {
            z: self.z,
            y: self.y[range].to_vec(),
        }
    }
}

fn z_channel(truth: bool, z: f64, seed: u64, key: u64) -> bool {
    truth && !(z > 0.0 && seed::keyed_uniform(seed, &[key]) < z)
}

/// Apply `d` to `state`. Row `r`'s noise depends only on `(seed, r)`.
pub fn run_design(d: &TestDesign, state: &InfectionState, z: f64, seed: u64) -> Result<TestOutcomes> {
    check_probability("z", z)?;
    if d.n != state.member_status.len() {
        return Err(Error::DimensionMismatch(format!(
            "design over {} members, state over {}",
            d.n,
            state.member_status.len()
        )));
    }
    let y = d
        .pools
        .iter()
        .enumerate()
        .map(|(r, pool)| {
            let truth = pool.iter().any(|&v| state.member_status[v]);
            z_channel(truth, z, seed, r as u64)
        })
        .collect();
    Ok(TestOutcomes { z, y })
}

/// Interactive test source for adaptive algorithms. Every query consumes one
/// test; the hidden state is only observable through outcomes.
#[derive(Debug)]
pub struct TestOracle {
    status: Vec<bool>,
    z: f64,
    seed: u64,
    counter: usize,
}

impl TestOracle {
    pub fn new(state: &InfectionState, z: f64, seed: u64) -> Result<Self> {
        check_probability("z", z)?;
        Ok(Self {
            status: state.member_status.clone(),
            z,
            seed,
            counter: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.status.len()
    }

    pub fn tests_used(&self) -> usize {
        self.counter
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.status.len() {
            return Err(Error::MemberOutOfRange { id: v, n: self.status.len() });
        }
        Ok(())
    }

    fn answer(&mut self, truth: bool) -> bool {
        let out = z_channel(truth, self.z, self.seed, self.counter as u64);
        self.counter += 1;
        out
    }

    pub fn query(&mut self, pool: &[usize]) -> Result<bool> {
        let mut truth = false;
        for &v in pool {
            self.check(v)?;
            truth |= self.status[v];
        }
        Ok(self.answer(truth))
    }

    /// One test on the union of several pools (a group test over mixed samples).
    pub fn query_mixed<P: AsRef<[usize]>>(&mut self, pools: &[P]) -> Result<bool> {
        let mut truth = false;
        for pool in pools {
            for &v in pool.as_ref() {
                self.check(v)?;
                truth |= self.status[v];
            }
        }
        Ok(self.answer(truth))
    }
}
